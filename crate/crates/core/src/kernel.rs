//! The Laplace exponent `ψ(q) = ∫ (e^{-qx} - 1 + qx) x^{-2} Λ(dx)` and the
//! coming-down-from-infinity quantities built on it: Grey's integral, the
//! speed function `v(t)`, the time scale `t_n = ∫_n^∞ dq/ψ(q)` and the tree
//! length integral `∫_1^n q/ψ(q) dq`.

use crate::error::{invalid, Error, Result};
use crate::measure::LambdaMeasure;
use crate::quad::{gauss_kronrod, tanh_sinh, Tolerance};
use crate::special::{gamma, laplace_kernel};

/// Power-law tail `ψ(q) ≈ C q^α + D q` used beyond the switch point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiTail {
    /// `C = A Γ(2-α) / (α (α-1))`.
    pub coef: f64,
    pub alpha: f64,
    /// Linear correction fitted at the switch point.
    pub linear: f64,
    pub switch: f64,
}

impl PsiTail {
    fn psi(&self, q: f64) -> f64 {
        self.coef * q.powf(self.alpha) + self.linear * q
    }

    /// `∫_s^∞ dq / (C q^α + D q)` in closed form.
    fn tail_integral(&self, s: f64) -> f64 {
        let am1 = self.alpha - 1.0;
        let lead = s.powf(-am1) / (self.coef * am1);
        let z = self.linear / (self.coef * s.powf(am1));
        if z.abs() < 1e-12 {
            lead
        } else {
            lead * z.ln_1p() / z
        }
    }

    /// Inverse of [`Self::tail_integral`].
    fn tail_inverse(&self, t: f64) -> f64 {
        let am1 = self.alpha - 1.0;
        let u = if self.linear == 0.0 {
            1.0 / (self.coef * am1 * t)
        } else {
            self.linear / (self.coef * (am1 * self.linear * t).exp_m1())
        };
        u.powf(1.0 / am1)
    }
}

/// Outcome of testing `∫_1^∞ dq/ψ(q) < ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GreyStatus {
    Holds { integral: f64 },
    Fails,
    Undecidable,
}

impl GreyStatus {
    pub fn holds(&self) -> bool {
        matches!(self, GreyStatus::Holds { .. })
    }
}

#[derive(Debug, Clone)]
pub struct LevyKernel {
    measure: LambdaMeasure,
    psi_tail: Option<PsiTail>,
    pub quadrature_tol: f64,
}

const DEFAULT_SWITCH: f64 = 1e8;

impl LevyKernel {
    pub fn new(measure: LambdaMeasure) -> Result<Self> {
        let mut kernel = LevyKernel { measure, psi_tail: None, quadrature_tol: 1e-10 };
        if let (Some(rv), false) = (kernel.measure.regvar(), kernel.measure.is_kingman()) {
            let alpha = rv.alpha;
            let coef = rv.scale * gamma(2.0 - alpha) / (alpha * (alpha - 1.0));
            let mut switch = DEFAULT_SWITCH;
            // fit the linear term at the switch point, validate it one decade up
            let tail = loop {
                let linear = (kernel.psi(switch)? - coef * switch.powf(alpha)) / switch;
                let tail = PsiTail { coef, alpha, linear, switch };
                let check = 10.0 * switch;
                let rel = (kernel.psi(check)? / tail.psi(check) - 1.0).abs();
                if rel < 1e-6 || switch >= 1e12 {
                    break tail;
                }
                switch *= 10.0;
            };
            kernel.psi_tail = Some(tail);
        }
        Ok(kernel)
    }

    pub fn measure(&self) -> &LambdaMeasure {
        &self.measure
    }

    pub fn psi_tail(&self) -> Option<PsiTail> {
        self.psi_tail
    }

    fn tol(&self) -> Tolerance {
        Tolerance::rel(self.quadrature_tol)
    }

    /// `ψ(q)`.
    pub fn psi(&self, q: f64) -> Result<f64> {
        if !(q >= 0.0) {
            return Err(invalid(format!("psi needs q >= 0, got {q}")));
        }
        if q == 0.0 {
            return Ok(0.0);
        }
        if self.measure.is_kingman() {
            return Ok(self.measure.total_mass() * q * q / 2.0);
        }
        let upper = self.measure.support_upper();
        let mut points = vec![0.0];
        let mut x = 1e-2 / q;
        // no sliver segments next to the upper end
        while x < 0.5 * upper {
            points.push(x);
            x *= 10.0;
        }
        points.push(upper);
        let m = &self.measure;
        let integrand = |x: f64, xc: f64| {
            let f = m.density(x, xc).unwrap_or(0.0);
            q * q * laplace_kernel(q * x) * f
        };
        let tol = Tolerance::rel(self.quadrature_tol.min(1e-12));
        let mut total = 0.0;
        for w in points.windows(2) {
            total += tanh_sinh(integrand, w[0], w[1], tol)?.value;
        }
        Ok(total)
    }

    /// Grey's condition, with `∫_1^∞ dq/ψ(q)` when it holds.
    ///
    /// Kingman and regularly varying measures hold. A density with
    /// `f(x) = O(x^γ)`, `γ >= 0`, has `ψ(q) = O(q log q)` and fails. Otherwise
    /// failure is declared only when `ψ(q)/(q log q)` does not grow between
    /// `q = 1e6` and `q = 1e8`; anything else is reported as undecidable.
    pub fn grey_condition(&self) -> Result<GreyStatus> {
        if self.measure.is_kingman() || self.psi_tail.is_some() {
            return Ok(GreyStatus::Holds { integral: self.grey_integral(1.0)? });
        }
        if let Some(g) = self.measure.zero_exponent() {
            if g >= 0.0 {
                return Ok(GreyStatus::Fails);
            }
        }
        let r6 = self.psi(1e6)? / (1e6 * 1e6f64.ln());
        let r8 = self.psi(1e8)? / (1e8 * 1e8f64.ln());
        if r8 <= 1.01 * r6 {
            Ok(GreyStatus::Fails)
        } else {
            Ok(GreyStatus::Undecidable)
        }
    }

    fn require_grey(&self, what: &'static str) -> Result<()> {
        if self.measure.is_kingman() || self.psi_tail.is_some() {
            return Ok(());
        }
        match self.grey_condition()? {
            GreyStatus::Holds { .. } => Ok(()),
            GreyStatus::Fails => Err(Error::GreyFails(what)),
            GreyStatus::Undecidable => Err(Error::GreyUndecidable),
        }
    }

    /// `∫_a^b h(q) dq` with `q = e^y`, breakpoints at every decade. `ψ` is
    /// replaced by its fitted tail beyond the switch point.
    fn log_integral(&self, a: f64, b: f64, weight: impl Fn(f64, f64) -> f64) -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        let (ya, yb) = (a.ln(), b.ln());
        let step = std::f64::consts::LN_10;
        let mut points = vec![ya];
        let mut y = (ya / step).floor() * step + step;
        while y < yb {
            points.push(y);
            y += step;
        }
        points.push(yb);
        let err = std::cell::Cell::new(None);
        let f = |y: f64| {
            let q = y.exp();
            let psi = match self.psi_tail {
                Some(t) if q > t.switch => t.psi(q),
                _ => match self.psi(q) {
                    Ok(p) => p,
                    Err(e) => {
                        err.set(Some(e));
                        f64::NAN
                    }
                },
            };
            weight(q, psi)
        };
        let est = gauss_kronrod(f, &points, self.tol(), 4000)?;
        if let Some(e) = err.take() {
            return Err(e);
        }
        Ok(est.value)
    }

    /// `∫_s^∞ dq/ψ(q)` for `s > 0`.
    pub fn grey_integral(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(invalid(format!("grey integral needs s > 0, got {s}")));
        }
        if self.measure.is_kingman() {
            return Ok(2.0 / (self.measure.total_mass() * s));
        }
        let tail = self.psi_tail.ok_or(Error::GreyFails("the tail integral"))?;
        if s >= tail.switch {
            return Ok(tail.tail_integral(s));
        }
        Ok(self.log_integral(s, tail.switch, |q, psi| q / psi)? + tail.tail_integral(tail.switch))
    }

    /// `v(t) = inf{s : ∫_s^∞ dq/ψ(q) < t}`.
    pub fn speed_v(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(invalid(format!("speed function needs t > 0, got {t}")));
        }
        self.require_grey("v(t)")?;
        if self.measure.is_kingman() {
            return Ok(2.0 / (self.measure.total_mass() * t));
        }
        let tail = self.psi_tail.expect("grey holds with a tail");
        if t <= tail.tail_integral(tail.switch) {
            return Ok(tail.tail_inverse(t));
        }
        // bracket in y = ln s on (lo, hi) with G(lo) >= t >= G(hi)
        // c = α/(AΓ(2-α)) = 1/(C(α-1))
        let c = 1.0 / (tail.coef * (tail.alpha - 1.0));
        let guess = (c / t).powf(1.0 / (tail.alpha - 1.0));
        let mut hi = (2.0 * guess).max(2.0).min(tail.switch).ln();
        let mut lo = 0.0_f64;
        while self.grey_integral(lo.exp())? < t {
            hi = lo;
            lo -= std::f64::consts::LN_10;
        }
        if self.grey_integral(hi.exp())? > t {
            hi = tail.switch.ln();
        }
        let mut y = 0.5 * (lo + hi);
        for _ in 0..200 {
            let s = y.exp();
            let g = self.grey_integral(s)? - t;
            if g > 0.0 {
                lo = y;
            } else {
                hi = y;
            }
            // Newton step on y: dG/dy = -s/ψ(s)
            let mut next = y + g * self.psi(s)? / s;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - y).abs() < 1e-13 || hi - lo < 1e-13 {
                return Ok(next.exp());
            }
            y = next;
        }
        Ok(y.exp())
    }

    /// `t_n = ∫_n^∞ dq/ψ(q)`.
    pub fn t_n(&self, n: u64) -> Result<f64> {
        if n < 1 {
            return Err(invalid("t_n needs n >= 1"));
        }
        self.require_grey("t_n")?;
        self.grey_integral(n as f64)
    }

    /// `∫_1^n q/ψ(q) dq`.
    pub fn length_integral(&self, n: u64) -> Result<f64> {
        if n < 1 {
            return Err(invalid("length integral needs n >= 1"));
        }
        if n == 1 {
            return Ok(0.0);
        }
        if self.measure.is_kingman() {
            return Ok(2.0 * (n as f64).ln() / self.measure.total_mass());
        }
        self.log_integral(1.0, n as f64, |q, psi| q * q / psi)
    }

    /// `v(t_n + t)` on a grid of `t`; the reference curve for block-count
    /// trajectories started from `n` lineages.
    pub fn speed_curve(&self, n: u64, t_grid: &[f64]) -> Result<SpeedCurve> {
        let t_n = self.t_n(n)?;
        let ascending = t_grid.windows(2).all(|w| w[0] < w[1]) && t_grid.first().is_some_and(|&t| t > 0.0);
        let incremental = ascending && !self.measure.is_kingman() && (n as f64) < self.psi_tail.map_or(0.0, |t| t.switch);
        let values = if incremental {
            let mut values = Vec::with_capacity(t_grid.len());
            let (mut s_prev, mut t_prev) = (n as f64, 0.0);
            for &t in t_grid {
                s_prev = self.step_back(s_prev, t - t_prev)?;
                t_prev = t;
                values.push(s_prev);
            }
            values
        } else {
            t_grid.iter().map(|t| self.speed_v(t_n + t)).collect::<Result<Vec<_>>>()?
        };
        Ok(SpeedCurve { n, t_n, t_grid: t_grid.to_vec(), values })
    }

    /// The `s < upper` with `∫_s^upper dq/ψ(q) = dt`, by safeguarded Newton
    /// in `ln s`. Only short integrals are evaluated.
    fn step_back(&self, upper: f64, dt: f64) -> Result<f64> {
        let gap = |y: f64| -> Result<f64> {
            let s = y.exp();
            if s >= upper {
                return Ok(-dt);
            }
            Ok(self.log_integral(s, upper, |q, psi| q / psi)? - dt)
        };
        let hi0 = upper.ln();
        let (mut lo, mut hi) = (hi0 - std::f64::consts::LN_10, hi0);
        while gap(lo)? < 0.0 {
            hi = lo;
            lo -= std::f64::consts::LN_10;
        }
        let mut y = (hi0 - dt * self.psi(upper)? / upper).clamp(lo, hi);
        for _ in 0..200 {
            let g = gap(y)?;
            if g > 0.0 {
                lo = y;
            } else {
                hi = y;
            }
            // dgap/dy = -s/ψ(s)
            let s = y.exp();
            let mut next = y + g * self.psi(s)? / s;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - y).abs() < 1e-13 || hi - lo < 1e-13 {
                return Ok(next.exp());
            }
            y = next;
        }
        Ok(y.exp())
    }
}

/// Precomputed `v(t_n + t)` on a grid, reusable across replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedCurve {
    pub n: u64,
    pub t_n: f64,
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
}
