//! Log-space special functions used by the rate and kernel computations.

pub use statrs::function::gamma::{gamma, ln_gamma};

/// `ln B(a, b)` for positive arguments.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `ln C(n, k)`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Regularized incomplete Beta function and its complement, `(I_x(a,b), 1 - I_x(a,b))`.
///
/// Whichever of the two is evaluated by the continued fraction keeps full
/// relative precision; the other is obtained by subtraction.
pub fn beta_reg_pair(a: f64, b: f64, x: f64) -> (f64, f64) {
    debug_assert!(a > 0.0 && b > 0.0);
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0);
    }
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        let lower = (ln_front + betacf(a, b, x).ln()).exp() / a;
        (lower, 1.0 - lower)
    } else {
        let upper = (ln_front + betacf(b, a, 1.0 - x).ln()).exp() / b;
        (1.0 - upper, upper)
    }
}

/// Modified Lentz evaluation of the incomplete Beta continued fraction.
fn betacf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..20_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// `(e^{-y} - 1 + y) / y^2`, accurate for all `y >= 0`.
pub fn laplace_kernel(y: f64) -> f64 {
    if y < 0.5 {
        // alternating series sum_{j>=0} (-y)^j / (j+2)!
        let mut term = 0.5;
        let mut sum = 0.5;
        for j in 1..20 {
            term *= -y / (j as f64 + 2.0);
            sum += term;
            if term.abs() < 1e-18 * sum {
                break;
            }
        }
        sum
    } else {
        ((-y).exp_m1() + y) / (y * y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_reg_matches_power_series() {
        for &(a, b, x) in &[(2.5f64, 3.0f64, 0.3f64), (1.5, 7.0, 0.9), (4.0, 1.5, 0.6), (30.0, 2.5, 0.9)] {
            let full = ln_beta(a, b).exp();
            // power series x^a/B * sum_n (1-b)_n x^n / (n! (a+n))
            let mut term = 1.0;
            let mut series = 0.0;
            for n in 0..20_000 {
                series += term / (a + n as f64);
                term *= (n as f64 + 1.0 - b) / (n as f64 + 1.0) * x;
            }
            let direct = x.powf(a) * series / full;
            let (lower, upper) = beta_reg_pair(a, b, x);
            assert!((lower - direct).abs() < 1e-12, "{a} {b} {x}: {lower} vs {direct}");
            assert!((lower + upper - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn beta_reg_large_parameters_converge() {
        let (lower, upper) = beta_reg_pair(0.5, 1e5, 0.9);
        assert_eq!(lower, 1.0);
        assert!(upper >= 0.0 && upper < 1e-300_f64.max(f64::MIN_POSITIVE) * 1e10);
        let (lower, _) = beta_reg_pair(5e4, 5e4, 0.5);
        assert!((lower - 0.5).abs() < 1e-3);
    }

    #[test]
    fn laplace_kernel_is_continuous_at_switch() {
        let below = laplace_kernel(0.5 - 1e-12);
        let above = laplace_kernel(0.5);
        assert!((below - above).abs() < 1e-12);
        assert!((laplace_kernel(0.0) - 0.5).abs() < 1e-18);
        let y = 3.0_f64;
        assert!((laplace_kernel(y) - ((-y).exp() - 1.0 + y) / 9.0).abs() < 1e-15);
    }
}
