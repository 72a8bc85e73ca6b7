//! Release gate: exact worked cases, the Monte-Carlo loss oracle, gradient
//! checks of the full objective, and metric oracles.

use std::fmt::Write as _;
use std::thread;

use rand::Rng;

use crate::adversarial::{generate_off_manifold, PerturbationConfig};
use crate::error::Result;
use crate::metrics::{aupr, auroc, fpr_at_recall, Positive, ScoredSet};
use crate::model::{
    enn_loss_value, total_objective, Activation, Architecture, Betas, Head, Input, LabeledExample,
    Model, ModelSpec,
};
use crate::nn::{finite_difference_gradient, max_relative_error, Graph, ModelParams};
use crate::oracles::{brute_force_auroc, monte_carlo_enn_loss};
use crate::rng;
use crate::subjective_logic::{dissonance, expected_probability, vacuity, DirichletParams};

/// One line of the report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    /// Passes when `measured <= tolerance`.
    pub fn within(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            passed: measured <= tolerance,
        }
    }

    /// A yes/no property; `measured` is the number of violations.
    pub fn holds(name: impl Into<String>, violations: usize) -> Self {
        Self::within(name, violations as f64, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfcheckOptions {
    pub seed: u64,
    pub mc_cases: usize,
    pub mc_draws: usize,
    /// Constant added to the evidential loss under test; nonzero values must make the loss checks fail.
    pub loss_perturbation: f64,
}

impl Default for SelfcheckOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            mc_cases: 200,
            mc_draws: 1_000_000,
            loss_perturbation: 0.0,
        }
    }
}

fn dir(a: &[f64]) -> DirichletParams {
    DirichletParams::new(a.to_vec()).expect("valid alpha")
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn worked_cases() -> Vec<CheckResult> {
    let (a, b, c) = (dir(&[1.0, 99.0]), dir(&[50.0, 50.0]), dir(&[1.0, 1.0]));
    let mut out = vec![
        CheckResult::within(
            "expected_probability([1,99]) = [0.01,0.99]",
            max_abs_diff(&expected_probability(&a), &[0.01, 0.99]),
            1e-9,
        ),
        CheckResult::within(
            "expected_probability([50,50]) = [0.5,0.5]",
            max_abs_diff(&expected_probability(&b), &[0.5, 0.5]),
            1e-9,
        ),
        CheckResult::within("vacuity([1,1]) = 1", (vacuity(&c) - 1.0).abs(), 1e-9),
    ];
    let order_v = vacuity(&c) > vacuity(&b) && vacuity(&b) == vacuity(&a);
    let order_d = dissonance(&b) > dissonance(&a) && dissonance(&a) == 0.0 && dissonance(&c) == 0.0;
    out.push(CheckResult::holds(
        "vacuity([1,1]) > vacuity([50,50]) = vacuity([1,99])",
        usize::from(!order_v),
    ));
    out.push(CheckResult::holds(
        "dissonance([50,50]) > dissonance([1,99]) = dissonance([1,1]) = 0",
        usize::from(!order_d),
    ));
    out
}

pub fn loss_checks(opts: &SelfcheckOptions) -> Result<Vec<CheckResult>> {
    let loss = |a: &[f64], y: usize| enn_loss_value(a, y) + opts.loss_perturbation;
    let mut out = vec![
        CheckResult::within(
            "enn_loss([1,1], y=0) = 2/3",
            (loss(&[1.0, 1.0], 0) - 2.0 / 3.0).abs(),
            1e-9,
        ),
        CheckResult::within(
            "enn_loss([1,99], y=0) = 1.9602 + 0.0198/101 (1.960396)",
            (loss(&[1.0, 99.0], 0) - (1.9602 + 0.0198 / 101.0)).abs(),
            1e-9,
        ),
    ];

    let mut case_rng = rng::stream(opts.seed, &[rng::STREAM_SYNTHETIC, 100]);
    let cases: Vec<(Vec<f64>, usize)> = (0..opts.mc_cases)
        .map(|_| {
            let k = case_rng.random_range(2..=5);
            let alpha = (0..k).map(|_| case_rng.random_range(1.0..=100.0)).collect();
            (alpha, case_rng.random_range(0..k))
        })
        .collect();
    let workers = thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(cases.len().max(1));
    let errors: Vec<Result<f64>> = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let cases = &cases;
                s.spawn(move || {
                    let mut worst: f64 = 0.0;
                    for (i, (alpha, y)) in cases.iter().enumerate().skip(w).step_by(workers) {
                        let mut target = vec![0.0; alpha.len()];
                        target[*y] = 1.0;
                        let mut r = rng::stream(opts.seed, &[rng::STREAM_SYNTHETIC, 101, i as u64]);
                        let mc = monte_carlo_enn_loss(alpha, &target, opts.mc_draws, &mut r)?;
                        worst = worst.max((loss(alpha, *y) - mc).abs());
                    }
                    Ok(worst)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut worst: f64 = 0.0;
    for e in errors {
        worst = worst.max(e?);
    }
    out.push(CheckResult::within(
        format!(
            "enn_loss vs Monte-Carlo ({} cases x {} draws), max abs error",
            opts.mc_cases, opts.mc_draws
        ),
        worst,
        1e-2,
    ));
    Ok(out)
}

/// Regularizer weights used by [`objective_gradient_error`]; all active.
pub const GRADIENT_CHECK_BETAS: Betas = Betas {
    beta_in: 0.3,
    beta_oe: 0.7,
    beta_ad: 0.5,
};

/// Maximum relative error between backprop and central differences of the
/// full mixed objective (all three regularizers active) on a small model.
pub fn objective_gradient_error(arch: Architecture, seed: u64) -> Result<f64> {
    objective_gradient_error_with(arch, GRADIENT_CHECK_BETAS, seed)
}

/// As [`objective_gradient_error`] with chosen weights.
pub fn objective_gradient_error_with(arch: Architecture, betas: Betas, seed: u64) -> Result<f64> {
    let spec = ModelSpec {
        arch: arch.clone(),
        num_classes: 3,
        head: Head::Evidential(Activation::Softplus),
    };
    let (model, params) = Model::init(spec, seed)?;
    let mut r = rng::stream(seed, &[rng::STREAM_SYNTHETIC, 200]);
    let input = |r: &mut rand_chacha::ChaCha8Rng| match arch {
        Architecture::Mlp2d { input_dim, .. } => {
            Input::Features((0..input_dim).map(|_| r.random_range(-2.0..2.0)).collect())
        }
        Architecture::Gru { vocab_size, .. } => {
            let len = r.random_range(1..=4);
            Input::Tokens((0..len).map(|_| r.random_range(0..vocab_size)).collect())
        }
    };
    let id: Vec<LabeledExample> = (0..4)
        .map(|i| LabeledExample::labeled(input(&mut r), i % 3))
        .collect();
    let oe: Vec<Input> = (0..3).map(|_| input(&mut r)).collect();
    let id_refs: Vec<&LabeledExample> = id.iter().collect();
    let id_inputs: Vec<&Input> = id.iter().map(|e| &e.input).collect();
    let oe_refs: Vec<&Input> = oe.iter().collect();
    let ad = generate_off_manifold(
        &model,
        &params,
        &id_refs,
        &PerturbationConfig::new(0.05, seed),
        0,
    )?;
    let objective = |p: &ModelParams| -> Result<(Graph, crate::nn::NodeId)> {
        let mut g = Graph::new();
        let bound = model.bind(&mut g, p);
        let obj = total_objective(
            &mut g,
            &model,
            &bound,
            &id_refs,
            &oe_refs,
            Some((&id_inputs, &ad.offsets)),
            betas,
        )?;
        Ok((g, obj))
    };
    let (mut g, obj) = objective(&params)?;
    g.backward(obj)?;
    let analytic = g.param_grads(&params)?;
    let numeric = finite_difference_gradient(
        |p| {
            let (g, o) = objective(p).expect("objective evaluates");
            g.scalar(o)
        },
        &params,
        1e-5,
    );
    Ok(max_relative_error(&analytic, &numeric, 1e-6))
}

/// The two architectures at the sizes used by the gradient check.
pub fn gradient_check_architectures() -> [Architecture; 2] {
    [
        Architecture::Mlp2d {
            input_dim: 2,
            embed_dim: 8,
            hidden_dim: 8,
        },
        Architecture::Gru {
            vocab_size: 10,
            embed_dim: 8,
            hidden_dim: 8,
            layers: 2,
        },
    ]
}

pub fn gradient_checks(seed: u64) -> Result<Vec<CheckResult>> {
    gradient_check_architectures()
        .into_iter()
        .map(|arch| {
            let name = format!(
                "objective gradient vs finite differences ({}), max rel error",
                arch.name()
            );
            Ok(CheckResult::within(
                name,
                objective_gradient_error(arch, seed)?,
                1e-4,
            ))
        })
        .collect()
}

pub fn metric_checks(seed: u64) -> Result<Vec<CheckResult>> {
    let mut r = rng::stream(seed, &[rng::STREAM_SYNTHETIC, 300]);
    let mut mismatches = 0;
    let mut variance = 0;
    for _ in 0..500 {
        let n = r.random_range(1..=10);
        let m = r.random_range(1..=10);
        let mut draw = |k: usize| {
            (0..k)
                .map(|_| (r.random_range(0..8) as f64) / 7.0)
                .collect::<Vec<_>>()
        };
        let s = ScoredSet::new(draw(n), draw(m));
        if auroc(&s)? != brute_force_auroc(&s) {
            mismatches += 1;
        }
        let t = ScoredSet::new(
            s.id_scores.iter().map(|x| (3.0 * x).exp() + 1.0).collect(),
            s.ood_scores.iter().map(|x| (3.0 * x).exp() + 1.0).collect(),
        );
        if auroc(&s)? != auroc(&t)?
            || aupr(&s, Positive::Ood)? != aupr(&t, Positive::Ood)?
            || fpr_at_recall(&s, 0.9)? != fpr_at_recall(&t, 0.9)?
        {
            variance += 1;
        }
    }
    let hand = ScoredSet::new(vec![0.55, 0.45, 0.35, 0.25], vec![0.9, 0.8, 0.7, 0.6, 0.5]);
    Ok(vec![
        CheckResult::holds(
            "auroc equals brute-force pair counting (500 instances)",
            mismatches,
        ),
        CheckResult::within(
            "fpr90 hand case = 0.25",
            (fpr_at_recall(&hand, 0.9)? - 0.25).abs(),
            0.0,
        ),
        CheckResult::holds(
            "metrics invariant under monotone transform (500 instances)",
            variance,
        ),
    ])
}

pub fn run_selfcheck(opts: &SelfcheckOptions) -> Result<Vec<CheckResult>> {
    let mut out = worked_cases();
    out.extend(loss_checks(opts)?);
    out.extend(gradient_checks(opts.seed)?);
    out.extend(metric_checks(opts.seed)?);
    Ok(out)
}

pub fn format_report(results: &[CheckResult]) -> String {
    let mut s = String::new();
    for r in results {
        let _ = writeln!(
            s,
            "{} {}  measured={:.3e} tolerance={:.1e}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.measured,
            r.tolerance
        );
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    let _ = writeln!(s, "{} checks, {} failed", results.len(), failed);
    s
}
