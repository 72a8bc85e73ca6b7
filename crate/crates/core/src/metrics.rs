//! OOD-detection metrics and uncertainty summaries.
//!
//! Scores follow the convention "higher means more likely OOD". AUROC is the
//! Mann-Whitney statistic with ties counted one half; AUPR is average
//! precision over a descending threshold sweep (step interpolation, tied
//! scores handled as one threshold); FPR90 is the ID false-positive rate at
//! the largest threshold that still recalls 90% of the OOD scores.

use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::model::UncertaintyReport;
use crate::rng;

/// Two score populations; higher = more OOD.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoredSet {
    pub id_scores: Vec<f64>,
    pub ood_scores: Vec<f64>,
}

impl ScoredSet {
    pub fn new(id_scores: Vec<f64>, ood_scores: Vec<f64>) -> Self {
        Self {
            id_scores,
            ood_scores,
        }
    }

    /// The same scores with the roles of the populations exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            id_scores: self.ood_scores.clone(),
            ood_scores: self.id_scores.clone(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.id_scores.is_empty() {
            return Err(Error::Empty("ID score population".into()));
        }
        if self.ood_scores.is_empty() {
            return Err(Error::Empty("OOD score population".into()));
        }
        if self
            .id_scores
            .iter()
            .chain(&self.ood_scores)
            .any(|s| s.is_nan())
        {
            return Err(Error::domain("NaN score"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionMetrics {
    pub auroc: f64,
    pub aupr: f64,
    pub fpr90: f64,
}

/// Which population counts as "positive" for AUPR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Positive {
    #[default]
    Ood,
    Id,
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Doubled Mann-Whitney count: 2 per (ood > id) pair, 1 per tie.
fn doubled_pair_count(s: &ScoredSet) -> u128 {
    let ids = sorted(&s.id_scores);
    s.ood_scores
        .iter()
        .map(|&o| {
            let below = ids.partition_point(|&x| x < o) as u128;
            let not_above = ids.partition_point(|&x| x <= o) as u128;
            2 * below + (not_above - below)
        })
        .sum()
}

pub fn auroc(s: &ScoredSet) -> Result<f64> {
    s.check()?;
    let pairs = 2 * s.id_scores.len() as u128 * s.ood_scores.len() as u128;
    Ok(doubled_pair_count(s) as f64 / pairs as f64)
}

pub fn aupr(s: &ScoredSet, positive: Positive) -> Result<f64> {
    s.check()?;
    let (pos, neg): (Vec<f64>, Vec<f64>) = match positive {
        Positive::Ood => (s.ood_scores.clone(), s.id_scores.clone()),
        Positive::Id => (
            s.id_scores.iter().map(|x| -x).collect(),
            s.ood_scores.iter().map(|x| -x).collect(),
        ),
    };
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&x| (x, true))
        .chain(neg.iter().map(|&x| (x, false)))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));
    let n_pos = pos.len() as f64;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    let mut i = 0;
    while i < all.len() {
        let t = all[i].0;
        while i < all.len() && all[i].0 == t {
            if all[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / n_pos;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(area)
}

/// False-positive rate on ID at the largest threshold `t` whose OOD recall
/// `|{ood >= t}| / |ood|` reaches `recall_target`.
pub fn fpr_at_recall(s: &ScoredSet, recall_target: f64) -> Result<f64> {
    s.check()?;
    if !(recall_target > 0.0 && recall_target <= 1.0) {
        return Err(Error::domain(format!(
            "recall target {recall_target} outside (0, 1]"
        )));
    }
    let mut ood = s.ood_scores.clone();
    ood.sort_by(|a, b| b.total_cmp(a));
    let n = ood.len();
    let needed = ((recall_target * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let t = ood[needed.min(n) - 1];
    let flagged = s.id_scores.iter().filter(|&&x| x >= t).count();
    Ok(flagged as f64 / s.id_scores.len() as f64)
}

pub fn detection_metrics(s: &ScoredSet) -> Result<DetectionMetrics> {
    Ok(DetectionMetrics {
        auroc: auroc(s)?,
        aupr: aupr(s, Positive::Ood)?,
        fpr90: fpr_at_recall(s, 0.9)?,
    })
}

/// `|OOD| : |ID|` for evaluation mixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaseRate {
    pub ood: usize,
    pub id: usize,
}

impl BaseRate {
    pub const ONE_TO_FIVE: BaseRate = BaseRate { ood: 1, id: 5 };
}

/// Keeps every ID score and a seeded subsample of `|ID| * ood / id` OOD scores.
pub fn subsample_base_rate(
    id_pool: &[f64],
    ood_pool: &[f64],
    ratio: BaseRate,
    seed: u64,
) -> Result<ScoredSet> {
    if ratio.ood == 0 || ratio.id == 0 {
        return Err(Error::domain("base-rate parts must be positive"));
    }
    if id_pool.is_empty() {
        return Err(Error::InsufficientPool {
            what: "ID",
            needed: 1,
            available: 0,
        });
    }
    let needed = id_pool.len() * ratio.ood / ratio.id;
    if needed == 0 || ood_pool.len() < needed {
        return Err(Error::InsufficientPool {
            what: "OOD",
            needed: needed.max(1),
            available: ood_pool.len(),
        });
    }
    let mut rng = rng::stream(seed, &[rng::STREAM_SUBSAMPLE]);
    let mut picked = sample(&mut rng, ood_pool.len(), needed).into_vec();
    picked.sort_unstable();
    Ok(ScoredSet {
        id_scores: id_pool.to_vec(),
        ood_scores: picked.into_iter().map(|i| ood_pool[i]).collect(),
    })
}

/// Five-number summary with nearest-rank quantiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Nearest-rank quantile: the `ceil(p n)`-th smallest value (1-based), `p = 0` gives the minimum.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p * n as f64) - 1e-12).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

pub fn five_number(values: &[f64]) -> Option<FiveNumber> {
    if values.is_empty() {
        return None;
    }
    let s = sorted(values);
    Some(FiveNumber {
        min: s[0],
        q1: nearest_rank(&s, 0.25),
        median: nearest_rank(&s, 0.5),
        q3: nearest_rank(&s, 0.75),
        max: s[s.len() - 1],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    Vacuity,
    Dissonance,
    Entropy,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::Vacuity, Measure::Dissonance, Measure::Entropy];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Vacuity => "vacuity",
            Measure::Dissonance => "dissonance",
            Measure::Entropy => "entropy",
        }
    }

    pub fn of(self, r: &UncertaintyReport) -> f64 {
        match self {
            Measure::Vacuity => r.vacuity,
            Measure::Dissonance => r.dissonance,
            Measure::Entropy => r.entropy,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub measure: Measure,
    pub group: &'static str,
    pub count: usize,
    pub stats: FiveNumber,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct UncertaintySummary {
    pub rows: Vec<SummaryRow>,
    /// Groups left out because they had no members.
    pub omitted: Vec<&'static str>,
}

pub const SUMMARY_HEADER: &str = "measure,group,count,min,q1,median,q3,max";

impl UncertaintySummary {
    pub fn get(&self, measure: Measure, group: &str) -> Option<&FiveNumber> {
        self.rows
            .iter()
            .find(|r| r.measure == measure && r.group == group)
            .map(|r| &r.stats)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{SUMMARY_HEADER}\n");
        for r in &self.rows {
            let f = &r.stats;
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.measure.name(),
                r.group,
                r.count,
                f.min,
                f.q1,
                f.median,
                f.q3,
                f.max
            ));
        }
        s
    }
}

/// Boxplot statistics per measure for the groups `id`, `ood`, `id_correct`
/// and `id_incorrect`. `id_labels[i]` is the true class of `id_reports[i]`.
pub fn summarize_uncertainty(
    id_reports: &[UncertaintyReport],
    id_labels: &[usize],
    ood_reports: &[UncertaintyReport],
) -> Result<UncertaintySummary> {
    if id_reports.is_empty() && ood_reports.is_empty() {
        return Err(Error::Empty("no reports to summarize".into()));
    }
    if id_labels.len() != id_reports.len() {
        return Err(Error::domain("one label per ID report is required"));
    }
    let correct: Vec<&UncertaintyReport> = id_reports
        .iter()
        .zip(id_labels)
        .filter(|(r, y)| r.predicted_class == **y)
        .map(|(r, _)| r)
        .collect();
    let incorrect: Vec<&UncertaintyReport> = id_reports
        .iter()
        .zip(id_labels)
        .filter(|(r, y)| r.predicted_class != **y)
        .map(|(r, _)| r)
        .collect();
    let groups: [(&'static str, Vec<&UncertaintyReport>); 4] = [
        ("id", id_reports.iter().collect()),
        ("ood", ood_reports.iter().collect()),
        ("id_correct", correct),
        ("id_incorrect", incorrect),
    ];
    let mut out = UncertaintySummary::default();
    for (name, members) in &groups {
        if members.is_empty() {
            out.omitted.push(name);
            continue;
        }
        for m in Measure::ALL {
            let vals: Vec<f64> = members.iter().map(|r| m.of(r)).collect();
            out.rows.push(SummaryRow {
                measure: m,
                group: name,
                count: vals.len(),
                stats: five_number(&vals).expect("nonempty"),
            });
        }
    }
    Ok(out)
}
