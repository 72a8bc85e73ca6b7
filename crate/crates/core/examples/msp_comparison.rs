//! Evidential vacuity against the softmax-confidence baseline for detecting
//! far-away points, at a 1:5 OOD-to-ID mix.
//!
//! `cargo run --release --example msp_comparison`

use evidential_ood::cli::{evaluate_ood, metrics_csv, ScoreChoice};
use evidential_ood::data::{generate_synthetic_2d, SyntheticSpec};
use evidential_ood::trainer::{train, train_softmax_baseline, TrainingConfig};

fn main() -> evidential_ood::Result<()> {
    let data = generate_synthetic_2d(&SyntheticSpec::default())?;
    let cfg = TrainingConfig::synthetic_preset(0);
    let enn = train(&data.train.examples, &data.oe.examples, &cfg)?;
    let msp = train_softmax_baseline(&data.train.examples, &cfg)?;
    let rows = evaluate_ood(
        &(enn.model, enn.params),
        Some(&(msp.model, msp.params)),
        &("synthetic".into(), data.test),
        &[("far-ood".into(), data.far_ood)],
        &ScoreChoice::All.expand(),
        0,
    )?;
    print!("{}", metrics_csv(&rows));
    Ok(())
}
