// Age of a randomly chosen mutation, rescaled, against its limit law.
//
// Run with `cargo run --release --example mutation_age`.

use lambdacoal::asymptotics::{mn_limit_quantile, mn_limit_quantile_alt, PredictionSet};
use lambdacoal::harness::ks_compare;
use lambdacoal::mutation::ReplicateStats;
use lambdacoal::{LambdaMeasure, Simulator};
use rayon::prelude::*;

pub fn run_example() -> lambdacoal::Result<()> {
    let m = LambdaMeasure::beta_alpha(1.5)?;
    let p = PredictionSet::from_measure(&m, 1.0, 1)?;
    let (n, reps) = (2000, 2000u64);
    let sim = Simulator::new(&m, n)?;
    let scale = (n as f64).powf(p.alpha - 1.0);
    let ages = (0..reps)
        .into_par_iter()
        .map(|r| ReplicateStats::simulate(&sim, n, 1.0, 11, r).map(|s| s.mutation_age * scale))
        .collect::<lambdacoal::Result<Vec<_>>>()?;
    let main = ks_compare(&ages, |u| mn_limit_quantile(&p, u).unwrap_or(f64::NAN), 0.05)?;
    let alt = ks_compare(&ages, |u| mn_limit_quantile_alt(&p, u).unwrap_or(f64::NAN), 0.05)?;
    println!("n = {n}, {reps} replicates of M_n * n^(alpha-1)");
    println!("  KS vs c((1-u)^(-1/abar) - 1): {:.4}", main.distance);
    println!("  KS vs c(1-u)^(-1/abar) - 1:   {:.4}", alt.distance);
    Ok(())
}

#[allow(dead_code)]
fn main() -> lambdacoal::Result<()> {
    run_example()
}
