use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::corpus::Corpus;
use super::grid::GridSpec;
use crate::error::{Error, Result};
use crate::model::LabeledExample;
use crate::rng;

/// Two-class Gaussian mixture with ring-shaped outlier and OOD sets, all
/// centred on the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub means: Vec<[f64; 2]>,
    /// Row-major 2x2 covariance per class.
    pub covariances: Vec<[[f64; 2]; 2]>,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub oe_count: usize,
    pub oe_radii: (f64, f64),
    pub far_count: usize,
    pub far_radii: (f64, f64),
    pub core_probes_per_class: usize,
    /// Standard deviation of the jitter around each mean for core probes.
    pub core_jitter: f64,
    pub boundary_probes: usize,
    /// Boundary probes lie on the inter-mean segment at these fractions.
    pub boundary_span: (f64, f64),
    pub grid: GridSpec,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            means: vec![[-2.0, 0.0], [2.0, 0.0]],
            covariances: vec![[[1.0, 0.0], [0.0, 1.0]]; 2],
            train_per_class: 500,
            test_per_class: 500,
            oe_count: 1000,
            oe_radii: (6.0, 8.0),
            far_count: 500,
            far_radii: (10.0, 12.0),
            core_probes_per_class: 100,
            core_jitter: 0.25,
            boundary_probes: 200,
            boundary_span: (0.4, 0.6),
            grid: GridSpec::default(),
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.means.len() < 2 || self.means.len() != self.covariances.len() {
            return bad("need at least two classes with one covariance each");
        }
        for c in &self.covariances {
            if !(c[0][0] > 0.0 && c[0][0] * c[1][1] - c[0][1] * c[1][0] > 0.0 && c[0][1] == c[1][0])
            {
                return bad("covariances must be symmetric positive definite");
            }
        }
        let counts = [
            self.train_per_class,
            self.test_per_class,
            self.oe_count,
            self.far_count,
            self.core_probes_per_class,
            self.boundary_probes,
        ];
        if counts.contains(&0) {
            return bad("all counts must be positive");
        }
        for (lo, hi) in [self.oe_radii, self.far_radii] {
            if !(lo > 0.0 && hi >= lo) {
                return bad("ring radii must satisfy 0 < inner <= outer");
            }
        }
        self.grid.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub train: Corpus,
    pub test: Corpus,
    /// Unlabeled outliers on the inner ring.
    pub oe: Corpus,
    /// Unlabeled test OOD points on the outer ring.
    pub far_ood: Corpus,
    pub core_probes: Vec<[f64; 2]>,
    pub boundary_probes: Vec<[f64; 2]>,
}

fn gaussian(rng: &mut ChaCha8Rng, mean: [f64; 2], cov: &[[f64; 2]; 2]) -> [f64; 2] {
    let l11 = cov[0][0].sqrt();
    let l21 = cov[1][0] / l11;
    let l22 = (cov[1][1] - l21 * l21).sqrt();
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    [mean[0] + l11 * z1, mean[1] + l21 * z1 + l22 * z2]
}

/// Uniform in area over the annulus `lo <= r <= hi`.
fn ring(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> [f64; 2] {
    let r = rng.random_range(lo * lo..=hi * hi).sqrt();
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    [r * theta.cos(), r * theta.sin()]
}

fn class_split(spec: &SyntheticSpec, per_class: usize, tag: u64, name: &str) -> Result<Corpus> {
    let mut rng = rng::stream(spec.seed, &[rng::STREAM_SYNTHETIC, tag]);
    let mut examples = Vec::with_capacity(per_class * spec.means.len());
    for (k, (m, c)) in spec.means.iter().zip(&spec.covariances).enumerate() {
        for _ in 0..per_class {
            examples.push(LabeledExample::features(
                gaussian(&mut rng, *m, c).to_vec(),
                Some(k),
            ));
        }
    }
    Corpus::new(examples, class_names(spec), name)
}

fn class_names(spec: &SyntheticSpec) -> Vec<String> {
    (0..spec.means.len()).map(|k| format!("class{k}")).collect()
}

fn ring_set(
    spec: &SyntheticSpec,
    n: usize,
    radii: (f64, f64),
    tag: u64,
    name: &str,
) -> Result<Corpus> {
    let mut rng = rng::stream(spec.seed, &[rng::STREAM_SYNTHETIC, tag]);
    let examples = (0..n)
        .map(|_| LabeledExample::features(ring(&mut rng, radii).to_vec(), None))
        .collect();
    Corpus::new(examples, Vec::new(), name)
}

pub fn generate_synthetic_2d(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let train = class_split(spec, spec.train_per_class, 0, "synthetic-train")?;
    let test = class_split(spec, spec.test_per_class, 1, "synthetic-test")?;
    let oe = ring_set(spec, spec.oe_count, spec.oe_radii, 2, "synthetic-oe")?;
    let far_ood = ring_set(spec, spec.far_count, spec.far_radii, 3, "synthetic-far-ood")?;

    let mut rng = rng::stream(spec.seed, &[rng::STREAM_SYNTHETIC, 4]);
    let mut core_probes = Vec::new();
    for m in &spec.means {
        for _ in 0..spec.core_probes_per_class {
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            core_probes.push([m[0] + spec.core_jitter * dx, m[1] + spec.core_jitter * dy]);
        }
    }
    let (a, b) = (spec.means[0], spec.means[1]);
    let (lo, hi) = spec.boundary_span;
    let n = spec.boundary_probes;
    let boundary_probes = (0..n)
        .map(|i| {
            let t = if n == 1 {
                (lo + hi) / 2.0
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            };
            [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
        })
        .collect();
    Ok(SyntheticData {
        train,
        test,
        oe,
        far_ood,
        core_probes,
        boundary_probes,
    })
}
