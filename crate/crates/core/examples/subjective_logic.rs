//! How vacuity and dissonance respond to the amount and the balance of
//! evidence for a three-class prediction.
//!
//! `cargo run --example subjective_logic`

use evidential_ood::subjective_logic::{
    dissonance, expected_probability, shannon_entropy, vacuity, DirichletParams,
};

fn main() -> evidential_ood::Result<()> {
    println!("total evidence grows, split evenly between two of three classes:");
    for total in [0.0, 2.0, 10.0, 50.0, 250.0] {
        let d = DirichletParams::from_evidence(&[total / 2.0, total / 2.0, 0.0])?;
        println!(
            "  evidence {total:>6}: vacuity {:.3}  dissonance {:.3}  entropy {:.3}",
            vacuity(&d),
            dissonance(&d),
            shannon_entropy(&expected_probability(&d), true)
        );
    }
    println!("fixed evidence 100, shifting from balanced to one-sided:");
    for share in [0.5, 0.6, 0.75, 0.9, 1.0] {
        let d = DirichletParams::from_evidence(&[100.0 * share, 100.0 * (1.0 - share), 0.0])?;
        println!(
            "  share {share:.2}: vacuity {:.3}  dissonance {:.3}",
            vacuity(&d),
            dissonance(&d)
        );
    }
    Ok(())
}
