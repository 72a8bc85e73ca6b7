//! The three opinions of the worked example: confident, conflicting and
//! evidence-free predictions, with their vacuity, dissonance and entropy.
//!
//! `cargo run --example worked_opinions`

use evidential_ood::model::UncertaintyReport;
use evidential_ood::subjective_logic::{
    opinion_from_evidence, projected_probability, uniform_base_rates, DirichletParams,
};

fn main() -> evidential_ood::Result<()> {
    println!(
        "{:>10}  {:>14}  {:>8}  {:>10}  {:>8}",
        "alpha", "expected p", "vacuity", "dissonance", "entropy"
    );
    for alpha in [[1.0, 99.0], [50.0, 50.0], [1.0, 1.0]] {
        let d = DirichletParams::new(alpha.to_vec())?;
        let r = UncertaintyReport::from_dirichlet(&d);
        println!(
            "{:>10}  {:>14}  {:>8.4}  {:>10.4}  {:>8.4}",
            format!("{alpha:?}"),
            format!("[{:.2}, {:.2}]", r.expected_probs[0], r.expected_probs[1]),
            r.vacuity,
            r.dissonance,
            r.entropy
        );
    }

    // The same numbers through the opinion view: beliefs, uncertainty mass, base rates.
    let op = opinion_from_evidence(&[0.0, 98.0], &uniform_base_rates(2))?;
    println!(
        "\nevidence [0, 98]: beliefs {:?}, uncertainty {}, projected {:?}",
        op.beliefs(),
        op.uncertainty(),
        projected_probability(&op)
    );
    Ok(())
}
