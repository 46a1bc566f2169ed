// A convergence experiment described in TOML, run on all cores and written
// as a CSV report.
//
// Run with `cargo run --release --example convergence_experiment`.

use lambdacoal::harness::{emit_string, run_experiment, ExperimentConfig, Format};

const CONFIG: &str = r#"
measure = "beta"
alpha = 1.5
theta = 1.0
n = [100, 1000]
reps = 200
seed = 42
stats = ["counts", "spectrum", "unblocked"]
kmax = 3
"#;

pub fn run_example() -> lambdacoal::Result<()> {
    let cfg = ExperimentConfig::from_toml_str(CONFIG)?;
    let report = run_experiment(&cfg)?;
    print!("{}", emit_string(&report, Format::Csv)?);
    let failing: Vec<_> = report.failures().map(|r| r.statistic.as_str()).collect();
    println!("checks failing at n = {}: {failing:?}", cfg.n.iter().max().unwrap());
    Ok(())
}

#[allow(dead_code)]
fn main() -> lambdacoal::Result<()> {
    run_example()
}
