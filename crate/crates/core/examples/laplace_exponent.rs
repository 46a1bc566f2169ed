// The Laplace exponent, Grey's condition and the speed of coming down.
//
// Run with `cargo run --release --example laplace_exponent`.

use lambdacoal::{GreyStatus, LambdaMeasure, LevyKernel};

pub fn run_example() -> lambdacoal::Result<()> {
    let opaque = std::sync::Arc::new(|x: f64, _: f64| 1.0 + x);
    let measures = [
        ("kingman", LambdaMeasure::kingman()),
        ("beta alpha=1.5", LambdaMeasure::beta_alpha(1.5)?),
        ("beta alpha=1.2", LambdaMeasure::beta_alpha(1.2)?),
        ("uniform", LambdaMeasure::uniform()),
        ("density 1+x", LambdaMeasure::general_density("1+x", opaque, None)?),
    ];
    for (name, m) in measures {
        let k = LevyKernel::new(m)?;
        let psi: Vec<String> = [1.0, 1e2, 1e4].iter().map(|&q| Ok(format!("{:.4e}", k.psi(q)?))).collect::<lambdacoal::Result<_>>()?;
        let grey = k.grey_condition()?;
        println!("{name:>15}: psi(1, 1e2, 1e4) = [{}]  grey: {grey:?}", psi.join(", "));
        if let GreyStatus::Holds { .. } = grey {
            let n = 1000;
            let curve = k.speed_curve(n, &[1e-3, 1e-2, 1e-1])?;
            println!(
                "{:>15}  t_n = {:.5}, length integral = {:.3}, v(t_n + t) at t = 1e-3, 1e-2, 1e-1: {:.1?}",
                "",
                curve.t_n,
                k.length_integral(n)?,
                curve.values
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> lambdacoal::Result<()> {
    run_example()
}
