//! Reference computations that share no code with the implementations they
//! check: Monte-Carlo Dirichlet sampling for the evidential loss, exhaustive
//! pair counting and threshold scans for the detection metrics.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::metrics::ScoredSet;

/// One draw from `Dir(alpha)` by normalized Gamma variates.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let mut p = Vec::with_capacity(alpha.len());
    for &a in alpha {
        let g = Gamma::new(a, 1.0).map_err(|e| Error::domain(format!("gamma({a}): {e}")))?;
        p.push(g.sample(rng));
    }
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    Ok(p)
}

/// Sample mean of `||y - p||^2` over `draws` Dirichlet samples.
pub fn monte_carlo_enn_loss<R: Rng + ?Sized>(
    alpha: &[f64],
    y: &[f64],
    draws: usize,
    rng: &mut R,
) -> Result<f64> {
    if alpha.len() != y.len() || draws == 0 {
        return Err(Error::domain(
            "alpha and y must match in length and draws must be positive",
        ));
    }
    let gammas = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).map_err(|e| Error::domain(format!("gamma({a}): {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let mut buf = vec![0.0; alpha.len()];
    let mut total = 0.0;
    for _ in 0..draws {
        let mut s = 0.0;
        for (b, g) in buf.iter_mut().zip(&gammas) {
            *b = g.sample(rng);
            s += *b;
        }
        total += buf
            .iter()
            .zip(y)
            .map(|(b, yk)| (yk - b / s).powi(2))
            .sum::<f64>();
    }
    Ok(total / draws as f64)
}

/// Exhaustive pair average: 1 per (ood > id), 1/2 per tie.
pub fn brute_force_auroc(s: &ScoredSet) -> f64 {
    let mut doubled: u64 = 0;
    for &o in &s.ood_scores {
        for &i in &s.id_scores {
            doubled += if o > i {
                2
            } else if o == i {
                1
            } else {
                0
            };
        }
    }
    doubled as f64 / (2 * s.id_scores.len() * s.ood_scores.len()) as f64
}

/// Average over OOD points of the precision at the threshold equal to that point's score.
pub fn brute_force_aupr(s: &ScoredSet) -> f64 {
    let total: f64 = s
        .ood_scores
        .iter()
        .map(|&t| {
            let tp = s.ood_scores.iter().filter(|&&x| x >= t).count();
            let fp = s.id_scores.iter().filter(|&&x| x >= t).count();
            tp as f64 / (tp + fp) as f64
        })
        .sum();
    total / s.ood_scores.len() as f64
}

/// Scans every candidate threshold and keeps the largest one that reaches the
/// recall target.
pub fn brute_force_fpr_at_recall(s: &ScoredSet, target: f64) -> f64 {
    let n = s.ood_scores.len() as f64;
    let best = s
        .ood_scores
        .iter()
        .copied()
        .filter(|&t| s.ood_scores.iter().filter(|&&x| x >= t).count() as f64 / n >= target - 1e-12)
        .fold(f64::NEG_INFINITY, f64::max);
    s.id_scores.iter().filter(|&&x| x >= best).count() as f64 / s.id_scores.len() as f64
}
