// Kingman's coalescent as a reference point with exact answers.
//
// Run with `cargo run --release --example kingman_closed_forms`.

use lambdacoal::harness::{run_experiment, ExperimentConfig, Statistic};
use lambdacoal::{LambdaMeasure, LevyKernel};

pub fn run_example() -> lambdacoal::Result<()> {
    let k = LevyKernel::new(LambdaMeasure::kingman())?;
    println!("psi(3) = {} (q^2/2), v(0.5) = {} (2/t), t_100 = {} (2/n)", k.psi(3.0)?, k.speed_v(0.5)?, k.t_n(100)?);
    let cfg = ExperimentConfig { n: vec![50, 100], reps: 2000, stats: vec![Statistic::Counts], ..ExperimentConfig::new("kingman") };
    let report = run_experiment(&cfg)?;
    for n in [50, 100] {
        let row = report.row(n, "S_n").expect("counts requested");
        println!(
            "n = {n}: mean S_n {:.3} +/- {:.3}, exact 2 H_(n-1) = {:.3}, {:?}",
            row.mean,
            row.se.unwrap_or(0.0),
            row.prediction.unwrap_or(f64::NAN),
            row.status
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> lambdacoal::Result<()> {
    run_example()
}
