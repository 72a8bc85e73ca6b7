//! The release-gate checks with a reduced Monte-Carlo budget; the `evood
//! selfcheck` command runs the full-size version.
//!
//! `cargo run --release --example selfcheck`

use evidential_ood::selfcheck::{format_report, run_selfcheck, SelfcheckOptions};

fn main() -> evidential_ood::Result<()> {
    let opts = SelfcheckOptions {
        mc_cases: 20,
        mc_draws: 100_000,
        ..SelfcheckOptions::default()
    };
    print!("{}", format_report(&run_selfcheck(&opts)?));
    Ok(())
}
