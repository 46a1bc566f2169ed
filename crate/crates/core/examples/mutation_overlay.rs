// Mutations on a genealogy: segregating sites, site frequency spectrum,
// allelic partition and ordered allele frequencies.
//
// Run with `cargo run --release --example mutation_overlay`.

use lambdacoal::mutation::{allele_frequencies, allelic_partition, overlay_mutations, site_spectrum, unblocked_fraction};
use lambdacoal::rng::{stream, Purpose};
use lambdacoal::{LambdaMeasure, Simulator};

pub fn run_example() -> lambdacoal::Result<()> {
    let m = LambdaMeasure::beta_alpha(1.5)?;
    let (n, theta) = (2000, 1.0);
    let sim = Simulator::new(&m, n)?;
    let (tree, _) = sim.simulate(n, &mut stream(7, n as u64, 0, Purpose::Tree))?;
    let overlay = overlay_mutations(&tree, theta, &mut stream(7, n as u64, 0, Purpose::Mutation))?;
    let sfs = site_spectrum(&overlay, n);
    let partition = allelic_partition(&tree, &overlay);
    let s = overlay.segregating_sites();
    let a = partition.allele_count();
    println!("n = {n}, theta = {theta}: S = {s}, A = {a}");
    println!("site spectrum M_1..M_5: {:?}", (1..=5).map(|k| sfs.get(k)).collect::<Vec<_>>());
    println!("family spectrum F_1..F_5: {:?}", &partition.family_spectrum()[..5]);
    let freqs = allele_frequencies(&partition);
    println!("largest allele frequencies: {:.4?}", &freqs[..freqs.len().min(5)]);
    println!("fraction of mutations seen as singleton alleles: {:.3}", unblocked_fraction(&tree, &overlay, 1)?);
    assert!(a <= s + 1);
    Ok(())
}

#[allow(dead_code)]
fn main() -> lambdacoal::Result<()> {
    run_example()
}
