//! AUROC, AUPR and FPR90 on small hand-made score sets, the 1:5 base-rate
//! subsample, and a nearest-rank boxplot summary.
//!
//! `cargo run --example detection_metrics`

use evidential_ood::metrics::{
    aupr, auroc, detection_metrics, five_number, fpr_at_recall, subsample_base_rate, BaseRate,
    Positive, ScoredSet,
};

fn main() -> evidential_ood::Result<()> {
    let s = ScoredSet::new(vec![0.55, 0.45, 0.35, 0.25], vec![0.9, 0.8, 0.7, 0.6, 0.5]);
    println!(
        "AUROC {}  AUPR(OOD+) {}  AUPR(ID+) {:.4}",
        auroc(&s)?,
        aupr(&s, Positive::Ood)?,
        aupr(&s, Positive::Id)?
    );
    println!("FPR at 90% recall {}", fpr_at_recall(&s, 0.9)?);

    let ties = ScoredSet::new(vec![0.3, 0.5, 0.9], vec![0.3, 0.5, 0.9]);
    println!("identical populations: AUROC {}", auroc(&ties)?);

    let id: Vec<f64> = (0..1000).map(|i| (i % 100) as f64 / 100.0).collect();
    let ood: Vec<f64> = (0..1000).map(|i| 0.5 + (i % 100) as f64 / 100.0).collect();
    let mix = subsample_base_rate(&id, &ood, BaseRate::ONE_TO_FIVE, 0)?;
    println!(
        "1:5 mix keeps {} ID and {} OOD scores: {:?}",
        mix.id_scores.len(),
        mix.ood_scores.len(),
        detection_metrics(&mix)?
    );
    println!(
        "boxplot of ID scores: {:?}",
        five_number(&mix.id_scores).expect("nonempty")
    );
    Ok(())
}
