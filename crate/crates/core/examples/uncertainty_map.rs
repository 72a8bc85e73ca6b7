//! Trains on the two-Gaussian task and writes the vacuity/dissonance/entropy
//! grid as CSV for plotting, printing a coarse text rendering of vacuity.
//!
//! `cargo run --release --example uncertainty_map [out.csv]`

use evidential_ood::data::{
    generate_synthetic_2d, uncertainty_grid, write_grid_csv, GridSpec, SyntheticSpec,
};
use evidential_ood::trainer::{train, TrainingConfig};

fn main() -> evidential_ood::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "uncertainty_grid.csv".into());
    let data = generate_synthetic_2d(&SyntheticSpec::default())?;
    let t = train(
        &data.train.examples,
        &data.oe.examples,
        &TrainingConfig::synthetic_preset(0),
    )?;
    let grid = uncertainty_grid(&t.model, &t.params, &GridSpec::default())?;
    write_grid_csv(&out, &grid)?;
    println!("{} points written to {out}", grid.len());

    // Every fifth row and column; darker characters mean higher vacuity.
    let shades = [' ', '.', ':', '-', '=', '+', '*', '#', '%', '@'];
    for row in (0..101).rev().step_by(5) {
        let line: String = (0..101)
            .step_by(5)
            .map(|col| {
                let v = grid[row * 101 + col].report.vacuity;
                shades[((v * 9.0).round() as usize).min(9)]
            })
            .collect();
        println!("|{line}|");
    }
    Ok(())
}
