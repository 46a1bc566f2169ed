// Removing large mergers: truncation keeps the small-merger behaviour and
// therefore the asymptotic constants.
//
// Run with `cargo run --release --example truncated_measure`.

use lambdacoal::harness::{run_experiment, ExperimentConfig, Statistic};

pub fn run_example() -> lambdacoal::Result<()> {
    let n = 3000;
    for eta in [None, Some(0.1)] {
        let cfg = ExperimentConfig {
            eta,
            n: vec![n],
            reps: 200,
            seed: 5,
            stats: vec![Statistic::Counts, Statistic::Spectrum],
            kmax: 2,
            ..ExperimentConfig::beta_alpha(1.5)
        };
        let report = run_experiment(&cfg)?;
        let show = |name: &str| {
            let r = report.row(n, name).expect("requested");
            format!("{name} {:.3} (limit {:.3})", r.mean, r.prediction.unwrap_or(f64::NAN))
        };
        println!("eta {eta:?}: {}; {}; {}", show("A_n*n^(alpha-2)"), show("F_1/A_n"), show("M_2/S_n"));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> lambdacoal::Result<()> {
    run_example()
}
