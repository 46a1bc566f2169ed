// One genealogy: Newick export, block-count trajectory and restriction to a
// subsample.
//
// Run with `cargo run --example simulate_genealogy`.

use lambdacoal::rng::{stream, Purpose};
use lambdacoal::{LambdaMeasure, Simulator};

pub fn run_example() -> lambdacoal::Result<()> {
    let m = LambdaMeasure::beta_alpha(1.5)?;
    let n = 12;
    let sim = Simulator::new(&m, n)?;
    let (tree, traj) = sim.simulate(n, &mut stream(2024, n as u64, 0, Purpose::Tree))?;
    println!("newick: {}", tree.to_newick());
    println!("tmrca {:.4}, total length {:.4}, events {}", tree.tmrca(), tree.total_length(), traj.jump_times.len());
    // ∫ N(t) dt over [0, τ_1] is the tree length
    assert!((traj.integral() - tree.total_length()).abs() < 1e-9 * tree.total_length());

    let mut csv = Vec::new();
    traj.write_csv(&mut csv).expect("writing to memory");
    print!("{}", String::from_utf8_lossy(&csv));

    let sub = tree.restrict(4)?;
    println!("first 4 leaves: {}", sub.to_newick());
    Ok(())
}

#[allow(dead_code)]
fn main() -> lambdacoal::Result<()> {
    run_example()
}
