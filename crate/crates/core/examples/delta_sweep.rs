//! Effect of the off-manifold radius on detection: one model per radius,
//! FPR at 90% OOD recall of the vacuity score.
//!
//! `cargo run --release --example delta_sweep`

use evidential_ood::cli::{evaluate_ood, ScoreChoice};
use evidential_ood::data::{generate_synthetic_2d, SyntheticSpec};
use evidential_ood::trainer::{train, TrainingConfig};

fn main() -> evidential_ood::Result<()> {
    let data = generate_synthetic_2d(&SyntheticSpec::default())?;
    // Without outlier exposure the off-manifold term carries the OOD signal alone.
    let mut base = TrainingConfig::synthetic_preset(0);
    base.betas.beta_oe = 0.0;
    base.epochs = 40;
    let id_test = ("synthetic".to_string(), data.test.clone());
    let ood = [("far-ood".to_string(), data.far_ood.clone())];
    println!("delta_off,auroc,fpr90");
    for delta in [0.001, 0.01, 0.1, 1.0] {
        let cfg = TrainingConfig {
            delta_off: delta,
            ..base.clone()
        };
        let t = train(&data.train.examples, &[], &cfg)?;
        let rows = evaluate_ood(
            &(t.model, t.params),
            None,
            &id_test,
            &ood,
            &[ScoreChoice::Vacuity],
            0,
        )?;
        println!(
            "{delta},{:.4},{:.4}",
            rows[0].metrics.auroc, rows[0].metrics.fpr90
        );
    }
    Ok(())
}
