// Predicted constants for a regularly varying measure and the curves they
// define.
//
// Run with `cargo run --example asymptotic_constants`.

use lambdacoal::asymptotics::{lemma_asymptotics, predict_allele_frequency, predict_counts, LemmaClaim, PredictionSet};
use lambdacoal::LambdaMeasure;

pub fn run_example() -> lambdacoal::Result<()> {
    for alpha in [1.25, 1.5, 1.75] {
        let p = PredictionSet::from_measure(&LambdaMeasure::beta_alpha(alpha)?, 1.0, 5)?;
        println!("alpha = {alpha}: B = {:.6}, c = {:.6}, abar = {:.4}", p.b, p.c, p.abar);
        println!("  c_k    = {:.5?}", p.c_k);
        println!("  cbar_k = {:.5?}", p.cbar_k);
        println!("  allele frequency constant {:.5}, P_10 ~ {:.3e}", p.frequency_constant(), predict_allele_frequency(&p, 10));
        for n in [1_000u64, 100_000] {
            let (s, a) = predict_counts(&p, n);
            let length = lemma_asymptotics(&p, LemmaClaim::TreeLength).eval(n as f64).unwrap_or(f64::NAN);
            println!("  n = {n:>6}: E S_n ~ {s:.2}, E A_n ~ {a:.2}, tree length ~ {length:.2}");
        }
        println!("  weighted length: {:?}", lemma_asymptotics(&p, LemmaClaim::WeightedLength));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> lambdacoal::Result<()> {
    run_example()
}
