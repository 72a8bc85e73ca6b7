//! Off-manifold samples: one signed-gradient step from each training point's
//! embedding, projected onto the l-inf sphere of radius `delta_off`.
//!
//! `cargo run --release --example off_manifold`

use evidential_ood::adversarial::{generate_off_manifold, perturb, PerturbationConfig};
use evidential_ood::data::{generate_synthetic_2d, SyntheticSpec};
use evidential_ood::trainer::{train, TrainingConfig};

fn main() -> evidential_ood::Result<()> {
    // The rule on raw numbers: noise plus a signed step, then projection.
    let x = [0.5, -1.0, 2.0];
    let xp = perturb(&x, &[0.3, -0.2, 0.0], &[0.004, 0.006, -0.002], 0.01);
    println!("x {x:?} -> x' {xp:?}");

    let data = generate_synthetic_2d(&SyntheticSpec::default())?;
    let mut cfg = TrainingConfig::synthetic_preset(0);
    cfg.epochs = 30;
    let t = train(&data.train.examples, &data.oe.examples, &cfg)?;
    let batch: Vec<_> = data.train.examples.iter().take(1000).collect();
    for delta in [0.01, 0.1, 1.0] {
        let out = generate_off_manifold(
            &t.model,
            &t.params,
            &batch,
            &PerturbationConfig::new(delta, 1),
            0,
        )?;
        let on_sphere = out
            .samples
            .iter()
            .filter(|s| (s.linf_distance() - delta).abs() <= 1e-12)
            .count();
        let max = out
            .samples
            .iter()
            .map(|s| s.linf_distance())
            .fold(0.0, f64::max);
        println!(
            "delta {delta}: {} samples, max distance {max:.6}, on sphere {on_sphere}, zero gradient {}",
            out.samples.len(),
            out.zero_gradient
        );
    }
    Ok(())
}
