//! Subjective-logic opinions over Dirichlet evidence.
//!
//! An opinion over K classes assigns a belief mass to every class plus an
//! explicit uncertainty mass (vacuity); the masses sum to one. With uniform
//! base rates `1/K` and prior weight `W = K`, an opinion maps one-to-one to a
//! Dirichlet with concentration `alpha = evidence + 1`.
//!
//! Everything here is a pure function of its inputs.

use crate::error::{Error, Result};

/// Tolerance on the mass-sum invariants of [`Opinion`].
pub const MASS_TOL: f64 = 1e-12;

/// A multinomial opinion `(beliefs, uncertainty, base_rates)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Opinion {
    beliefs: Vec<f64>,
    uncertainty: f64,
    base_rates: Vec<f64>,
}

impl Opinion {
    /// Builds an opinion directly from its masses, checking every invariant.
    pub fn new(beliefs: Vec<f64>, uncertainty: f64, base_rates: Vec<f64>) -> Result<Self> {
        let k = beliefs.len();
        if k < 2 {
            return Err(Error::domain(format!(
                "opinion needs K >= 2 classes, got {k}"
            )));
        }
        if base_rates.len() != k {
            return Err(Error::domain(format!(
                "base rates have {} entries, beliefs have {k}",
                base_rates.len()
            )));
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if beliefs.iter().any(|b| !(b.is_finite() && *b >= 0.0)) || !(uncertainty >= 0.0) {
            return Err(Error::domain(
                "belief and uncertainty masses must be nonnegative",
            ));
        }
        let total: f64 = beliefs.iter().sum::<f64>() + uncertainty;
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::domain(format!("masses sum to {total}, expected 1")));
        }
        check_base_rates(&base_rates)?;
        Ok(Self {
            beliefs,
            uncertainty,
            base_rates,
        })
    }

    pub fn beliefs(&self) -> &[f64] {
        &self.beliefs
    }

    pub fn uncertainty(&self) -> f64 {
        self.uncertainty
    }

    pub fn base_rates(&self) -> &[f64] {
        &self.base_rates
    }

    pub fn num_classes(&self) -> usize {
        self.beliefs.len()
    }
}

/// Dirichlet concentration parameters with every `alpha_j >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams {
    alpha: Vec<f64>,
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::domain(format!(
                "Dirichlet needs K >= 2 classes, got {}",
                alpha.len()
            )));
        }
        if let Some(a) = alpha.iter().find(|a| !(a.is_finite() && **a >= 1.0)) {
            return Err(Error::domain(format!(
                "concentration {a} is below 1 (negative evidence)"
            )));
        }
        Ok(Self { alpha })
    }

    /// `alpha = evidence + 1`.
    pub fn from_evidence(evidence: &[f64]) -> Result<Self> {
        check_evidence(evidence)?;
        Self::new(evidence.iter().map(|e| e + 1.0).collect())
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn num_classes(&self) -> usize {
        self.alpha.len()
    }

    pub fn evidence(&self) -> Vec<f64> {
        self.alpha.iter().map(|a| a - 1.0).collect()
    }

    /// Dirichlet strength `S = sum(alpha)`.
    pub fn strength(&self) -> f64 {
        self.alpha.iter().sum()
    }

    /// Non-informative prior weight `W = K`.
    pub fn prior_weight(&self) -> f64 {
        self.alpha.len() as f64
    }

    /// The opinion under uniform base rates.
    pub fn opinion(&self) -> Opinion {
        let k = self.alpha.len();
        let s = self.strength();
        let beliefs: Vec<f64> = self.alpha.iter().map(|a| (a - 1.0) / s).collect();
        let uncertainty = self.prior_weight() / s;
        Opinion {
            beliefs,
            uncertainty,
            base_rates: vec![1.0 / k as f64; k],
        }
    }
}

fn check_evidence(evidence: &[f64]) -> Result<()> {
    if evidence.len() < 2 {
        return Err(Error::domain(format!(
            "evidence needs K >= 2 classes, got {}",
            evidence.len()
        )));
    }
    if let Some(e) = evidence.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(Error::domain(format!(
            "negative or non-finite evidence {e}"
        )));
    }
    Ok(())
}

fn check_base_rates(base_rates: &[f64]) -> Result<()> {
    if base_rates.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(Error::domain("base rates must be positive"));
    }
    let total: f64 = base_rates.iter().sum();
    if (total - 1.0).abs() > MASS_TOL {
        return Err(Error::domain(format!(
            "base rates sum to {total}, expected 1"
        )));
    }
    Ok(())
}

/// Uniform base rates `1/K`.
pub fn uniform_base_rates(k: usize) -> Vec<f64> {
    vec![1.0 / k as f64; k]
}

/// Maps evidence to an opinion: `b_j = r_j / S`, `u = W / S`, with `W = K`
/// and `S = sum(r) + W`. `W` stays `K` even for non-uniform base rates.
pub fn opinion_from_evidence(evidence: &[f64], base_rates: &[f64]) -> Result<Opinion> {
    check_evidence(evidence)?;
    if base_rates.len() != evidence.len() {
        return Err(Error::domain(format!(
            "base rates have {} entries, evidence has {}",
            base_rates.len(),
            evidence.len()
        )));
    }
    check_base_rates(base_rates)?;
    let w = evidence.len() as f64;
    let s = evidence.iter().sum::<f64>() + w;
    Ok(Opinion {
        beliefs: evidence.iter().map(|r| r / s).collect(),
        uncertainty: w / s,
        base_rates: base_rates.to_vec(),
    })
}

/// `p_j = b_j + a_j * u`.
pub fn projected_probability(op: &Opinion) -> Vec<f64> {
    op.beliefs
        .iter()
        .zip(&op.base_rates)
        .map(|(b, a)| b + a * op.uncertainty)
        .collect()
}

/// Dirichlet mean `alpha_j / S`.
pub fn expected_probability(d: &DirichletParams) -> Vec<f64> {
    let s = d.strength();
    d.alpha.iter().map(|a| a / s).collect()
}

/// Uncertainty from lack of evidence, `W / S`.
pub fn vacuity(d: &DirichletParams) -> f64 {
    d.prior_weight() / d.strength()
}

/// Relative balance of two belief masses; 0 when either mass is zero.
pub fn mass_balance(b_j: f64, b_i: f64) -> f64 {
    if b_j * b_i != 0.0 {
        1.0 - (b_j - b_i).abs() / (b_j + b_i)
    } else {
        0.0
    }
}

/// Uncertainty from conflicting evidence.
///
/// A term whose denominator `sum_{j != i} b_j` is zero contributes 0, so an
/// opinion with at most one nonzero belief has no dissonance.
pub fn dissonance(d: &DirichletParams) -> f64 {
    belief_dissonance(d.opinion().beliefs())
}

/// Dissonance evaluated directly on a belief vector.
pub fn belief_dissonance(beliefs: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, &b_i) in beliefs.iter().enumerate() {
        let mut num = 0.0;
        let mut den = 0.0;
        for (j, &b_j) in beliefs.iter().enumerate() {
            if j == i {
                continue;
            }
            num += b_j * mass_balance(b_j, b_i);
            den += b_j;
        }
        if den > 0.0 {
            total += b_i * num / den;
        }
    }
    total
}

/// Shannon entropy in nats, `0 ln 0 = 0`; divided by `ln K` when `normalized`.
pub fn shannon_entropy(p: &[f64], normalized: bool) -> f64 {
    let h: f64 = -p
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>();
    let h = h.max(0.0);
    if normalized && p.len() > 1 {
        (h / (p.len() as f64).ln()).min(1.0)
    } else {
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dir(alpha: &[f64]) -> DirichletParams {
        DirichletParams::new(alpha.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn opinion_from_evidence_examples() {
        let half = [0.5, 0.5];
        let op = opinion_from_evidence(&[0.0, 0.0], &half).unwrap();
        assert_eq!(op.beliefs(), &[0.0, 0.0]);
        assert_eq!(op.uncertainty(), 1.0);

        let op = opinion_from_evidence(&[49.0, 49.0], &half).unwrap();
        assert!(close(op.beliefs(), &[0.49, 0.49], 1e-15));
        assert!((op.uncertainty() - 0.02).abs() < 1e-15);

        let op = opinion_from_evidence(&[0.0, 98.0], &half).unwrap();
        assert!(close(op.beliefs(), &[0.0, 0.98], 1e-15));
        assert!((op.uncertainty() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn opinion_from_evidence_rejects_bad_input() {
        assert!(matches!(
            opinion_from_evidence(&[-1.0, 2.0], &[0.5, 0.5]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            opinion_from_evidence(&[1.0], &[1.0]),
            Err(Error::Domain(_))
        ));
        assert!(opinion_from_evidence(&[1.0, 1.0], &[0.7, 0.7]).is_err());
        assert!(DirichletParams::new(vec![0.5, 2.0]).is_err());
        assert!(Opinion::new(vec![0.5, 0.6], 0.1, vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn non_uniform_base_rates_keep_prior_weight_k() {
        let op = opinion_from_evidence(&[2.0, 0.0, 0.0], &[0.5, 0.25, 0.25]).unwrap();
        assert!((op.uncertainty() - 3.0 / 5.0).abs() < 1e-15);
        let p = projected_probability(&op);
        assert!(close(&p, &[0.4 + 0.3, 0.15, 0.15], 1e-15));
    }

    #[test]
    fn projected_probability_examples() {
        let op = Opinion::new(vec![0.0, 0.0], 1.0, vec![0.5, 0.5]).unwrap();
        assert_eq!(projected_probability(&op), vec![0.5, 0.5]);
        let op = Opinion::new(vec![0.0, 0.98], 0.02, vec![0.5, 0.5]).unwrap();
        assert!(close(&projected_probability(&op), &[0.01, 0.99], 1e-12));
        let op = Opinion::new(vec![0.49, 0.49], 0.02, vec![0.5, 0.5]).unwrap();
        assert!(close(&projected_probability(&op), &[0.5, 0.5], 1e-12));
    }

    #[test]
    fn expected_probability_examples() {
        assert_eq!(expected_probability(&dir(&[1.0, 1.0])), vec![0.5, 0.5]);
        assert!(close(
            &expected_probability(&dir(&[50.0, 50.0])),
            &[0.5, 0.5],
            1e-12
        ));
        assert!(close(
            &expected_probability(&dir(&[1.0, 99.0])),
            &[0.01, 0.99],
            1e-12
        ));
    }

    #[test]
    fn vacuity_examples() {
        assert_eq!(vacuity(&dir(&[1.0, 1.0])), 1.0);
        assert!((vacuity(&dir(&[50.0, 50.0])) - 0.02).abs() < 1e-15);
        assert!((vacuity(&dir(&[1.0, 99.0])) - 0.02).abs() < 1e-15);
    }

    #[test]
    fn mass_balance_examples() {
        assert_eq!(mass_balance(0.5, 0.5), 1.0);
        assert_eq!(mass_balance(0.0, 0.7), 0.0);
        assert_eq!(mass_balance(0.7, 0.0), 0.0);
        assert!((mass_balance(0.2, 0.6) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dissonance_examples() {
        assert_eq!(dissonance(&dir(&[1.0, 1.0])), 0.0);
        assert!((dissonance(&dir(&[50.0, 50.0])) - 0.98).abs() < 1e-12);
        assert_eq!(dissonance(&dir(&[1.0, 99.0])), 0.0);
        assert!((dissonance(&dir(&[2.0, 2.0, 2.0])) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(shannon_entropy(&[1.0, 0.0], false), 0.0);
        assert!((shannon_entropy(&[0.5, 0.5], true) - 1.0).abs() < 1e-15);
        assert!((shannon_entropy(&[0.01, 0.99], false) - 0.056002).abs() < 1e-5);
    }

    #[test]
    fn dissonance_two_class_peaks_at_equal_evidence() {
        // Grid over evidence splits at fixed strength.
        for s in [10.0_f64, 100.0] {
            let total_evidence = s - 2.0;
            let steps = 200;
            let mut best = (0.0, f64::NEG_INFINITY);
            for i in 0..=steps {
                let e0 = total_evidence * i as f64 / steps as f64;
                let d = dissonance(
                    &DirichletParams::from_evidence(&[e0, total_evidence - e0]).unwrap(),
                );
                if d > best.1 {
                    best = (e0, d);
                }
            }
            assert!(
                (best.0 - total_evidence / 2.0).abs() < 1e-9,
                "peak at {}",
                best.0
            );
        }
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn evidence() -> impl Strategy<Value = Vec<f64>> {
        (2usize..=10).prop_flat_map(|k| proptest::collection::vec(0.0f64..1e3, k))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn opinion_invariants(e in evidence()) {
            let k = e.len();
            let op = opinion_from_evidence(&e, &uniform_base_rates(k)).unwrap();
            let total: f64 = op.beliefs().iter().sum::<f64>() + op.uncertainty();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            prop_assert!(op.uncertainty() > 0.0 && op.uncertainty() <= 1.0);
            let d = DirichletParams::from_evidence(&e).unwrap();
            let diss = dissonance(&d);
            prop_assert!((0.0..1.0).contains(&diss));
            let h = shannon_entropy(&expected_probability(&d), true);
            prop_assert!((0.0..=1.0).contains(&h));
        }

        #[test]
        fn expected_equals_projected(e in evidence()) {
            let d = DirichletParams::from_evidence(&e).unwrap();
            let p = projected_probability(&opinion_from_evidence(&e, &uniform_base_rates(e.len())).unwrap());
            for (a, b) in expected_probability(&d).iter().zip(&p) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn vacuity_decreases_with_evidence(e in evidence(), j in 0usize..10, extra in 1e-3f64..100.0) {
            let d = DirichletParams::from_evidence(&e).unwrap();
            let mut more = e.clone();
            let j = j % e.len();
            more[j] += extra;
            prop_assert!(vacuity(&DirichletParams::from_evidence(&more).unwrap()) < vacuity(&d));
        }

        #[test]
        fn mass_balance_is_symmetric(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            prop_assert_eq!(mass_balance(a, b), mass_balance(b, a));
            prop_assert!((0.0..=1.0).contains(&mass_balance(a, b)));
        }
    }
}
