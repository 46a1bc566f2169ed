// Merger rates of several measures and the jump law they induce.
//
// Run with `cargo run --example collision_rates`.

use lambdacoal::measure::{LambdaMeasure, MergerSampler};
use lambdacoal::rng::{stream, Purpose};
use rand::Rng;

pub fn run_example() -> lambdacoal::Result<()> {
    let measures = [
        ("kingman", LambdaMeasure::kingman()),
        ("uniform (Bolthausen-Sznitman)", LambdaMeasure::uniform()),
        ("beta alpha=1.5", LambdaMeasure::beta_alpha(1.5)?),
        ("beta alpha=1.5 truncated at 0.1", LambdaMeasure::beta_alpha(1.5)?.truncate(0.1)?),
        ("power density x^-0.4", LambdaMeasure::power(-0.4, 1.0)?),
    ];
    let b = 10;
    for (name, m) in &measures {
        let table = m.rate_table(b)?;
        print!("{name:>32}: total rate {:>9.4}  P(k):", table.total);
        for k in 2..=5 {
            print!(" {:.4}", table.probability(k));
        }
        println!();
        // λ_{b,k} = λ_{b+1,k} + λ_{b+1,k+1}
        let gap = m.collision_rate(b, 3)? - m.collision_rate(b + 1, 3)? - m.collision_rate(b + 1, 4)?;
        assert!(gap.abs() <= 1e-9 * m.collision_rate(b, 3)?);
    }

    // empirical merger sizes against the table
    let m = LambdaMeasure::beta_alpha(1.2)?;
    let sampler = MergerSampler::new(&m, 1000)?;
    let table = m.rate_table(1000)?;
    let mut rng = stream(1, 1000, 0, Purpose::Sampling);
    let draws = 100_000;
    let mut hits = [0u32; 4];
    for _ in 0..draws {
        let k = sampler.sample(1000, rng.random())? as usize;
        if k <= 5 {
            hits[k - 2] += 1;
        }
    }
    println!("beta alpha=1.2, b=1000: merger size frequencies vs table");
    for k in 2..=5 {
        println!("  k={k}: {:.4} vs {:.4}", hits[k - 2] as f64 / draws as f64, table.probability(k as u64));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> lambdacoal::Result<()> {
    run_example()
}
