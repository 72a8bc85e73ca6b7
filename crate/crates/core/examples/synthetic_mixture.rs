//! Trains the evidential model on the two-Gaussian task with outlier and
//! off-manifold regularization, then reports accuracy, vacuity on far-OOD
//! points, dissonance at the class boundary and OOD-detection AUROC.
//!
//! Run with `cargo run --release --example synthetic_mixture`.

use std::time::Instant;

use evidential_ood::data::{generate_synthetic_2d, SyntheticSpec};
use evidential_ood::metrics::{auroc, ScoredSet};
use evidential_ood::model::{predict_reports, Input};
use evidential_ood::trainer::{evaluate_epoch, train, TrainingConfig};

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn main() -> evidential_ood::Result<()> {
    let data = generate_synthetic_2d(&SyntheticSpec::default())?;
    let cfg = TrainingConfig::synthetic_preset(0);
    let start = Instant::now();
    let trained = train(&data.train.examples, &data.oe.examples, &cfg)?;
    println!("trained {} epochs in {:.1?}", cfg.epochs, start.elapsed());
    for rec in trained.log.epochs.iter().step_by(10) {
        println!(
            "epoch {:3}  loss {:.4}  id vac {:.3}  oe vac {:.3}  ad vac {:.3}  acc {:.3}",
            rec.epoch,
            rec.id_loss,
            rec.id_vacuity,
            rec.oe_vacuity.unwrap_or(f64::NAN),
            rec.ad_vacuity.unwrap_or(f64::NAN),
            rec.id_accuracy
        );
    }

    let (model, params) = (&trained.model, &trained.params);
    let test = evaluate_epoch(model, params, &data.test.examples)?;
    let id_reports = predict_reports(model, params, &data.test.inputs())?;
    let far_reports = predict_reports(model, params, &data.far_ood.inputs())?;
    let probe = |pts: &[[f64; 2]]| {
        let inputs: Vec<Input> = pts.iter().map(|p| Input::Features(p.to_vec())).collect();
        predict_reports(model, params, &inputs.iter().collect::<Vec<_>>())
    };
    let core = probe(&data.core_probes)?;
    let boundary = probe(&data.boundary_probes)?;

    let scores = ScoredSet::new(
        id_reports.iter().map(|r| r.vacuity).collect(),
        far_reports.iter().map(|r| r.vacuity).collect(),
    );
    println!("test accuracy           {:.4}", test.accuracy);
    println!(
        "mean vacuity far-OOD    {:.4}",
        mean(far_reports.iter().map(|r| r.vacuity))
    );
    println!(
        "mean vacuity ID test    {:.4}",
        mean(id_reports.iter().map(|r| r.vacuity))
    );
    println!(
        "mean vacuity core       {:.4}",
        mean(core.iter().map(|r| r.vacuity))
    );
    println!(
        "mean dissonance core    {:.4}",
        mean(core.iter().map(|r| r.dissonance))
    );
    println!(
        "mean dissonance border  {:.4}",
        mean(boundary.iter().map(|r| r.dissonance))
    );
    println!("AUROC vacuity           {:.4}", auroc(&scores)?);
    Ok(())
}
