//! Finite measures Λ on [0, 1] and the collision rates they induce.
//!
//! With `b` blocks present, any given `k`-tuple merges at rate
//! `λ_{b,k} = ∫ x^{k-2} (1-x)^{b-k} Λ(dx)`. Rates are evaluated in log-Gamma
//! space for the parametric families and by tanh–sinh quadrature for general
//! densities.

use std::fmt;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex};

use lru::LruCache;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quad::{tanh_sinh, Tolerance};
use crate::special::{beta_reg_pair, gamma, ln_beta, ln_binomial};

/// Strong α-regular variation at zero: `f(x) ~ A x^{1-α}` as `x -> 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegVar {
    pub alpha: f64,
    /// The constant `A`.
    pub scale: f64,
}

/// Evaluable density `f(x)`; the second argument is `1 - x` computed without
/// cancellation.
pub type DensityFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A density on (0, 1] supplied as code, plus the exponent `γ` in
/// `f(x) = O(x^γ)` near zero when known.
#[derive(Clone)]
pub struct GeneralDensity {
    pub name: String,
    pub f: DensityFn,
    pub zero_exponent: Option<f64>,
}

impl fmt::Debug for GeneralDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralDensity")
            .field("name", &self.name)
            .field("zero_exponent", &self.zero_exponent)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum MeasureKind {
    /// Unit atom at 0 (scaled by the total mass): Kingman's coalescent.
    KingmanAtom,
    /// Beta(a, b) probability density scaled by the total mass.
    Beta { a: f64, b: f64 },
    /// Density 1 on [0, 1] (Bolthausen–Sznitman), scaled by the total mass.
    UniformDensity,
    GeneralDensity(GeneralDensity),
    /// `Λ_η(dx) = Λ(dx) 1_{[0, 1-η]}(x)`.
    Truncated { base: Box<LambdaMeasure>, eta: f64 },
}

/// A finite measure on [0, 1] with no atom at 1.
#[derive(Debug, Clone)]
pub struct LambdaMeasure {
    kind: MeasureKind,
    total_mass: f64,
    regvar: Option<RegVar>,
}

const RATE_TOL: f64 = 1e-13;

impl LambdaMeasure {
    pub fn kingman() -> Self {
        LambdaMeasure { kind: MeasureKind::KingmanAtom, total_mass: 1.0, regvar: None }
    }

    /// Probability-normalized Beta(a, b). A regular-variation tag with
    /// `α = 2 - a`, `A = 1/B(a, b)` is attached when `0 < a < 1`.
    pub fn beta(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(invalid(format!("Beta parameters must be positive, got ({a}, {b})")));
        }
        let regvar = (a < 1.0).then(|| RegVar { alpha: 2.0 - a, scale: (-ln_beta(a, b)).exp() });
        Ok(LambdaMeasure { kind: MeasureKind::Beta { a, b }, total_mass: 1.0, regvar })
    }

    /// The Beta(2 - α, α) coalescent, `1 < α < 2`.
    pub fn beta_alpha(alpha: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(invalid(format!("alpha must lie in (1, 2), got {alpha}")));
        }
        Self::beta(2.0 - alpha, alpha)
    }

    pub fn uniform() -> Self {
        LambdaMeasure { kind: MeasureKind::UniformDensity, total_mass: 1.0, regvar: None }
    }

    /// Built-in power density `f(x) = mass (γ + 1) x^γ`, `γ > -1`.
    pub fn power(exponent: f64, mass: f64) -> Result<Self> {
        if !(exponent > -1.0) {
            return Err(Error::MeasureNotFinite(format!(
                "power density x^{exponent} is not integrable at 0"
            )));
        }
        let coef = mass * (exponent + 1.0);
        let f: DensityFn = Arc::new(move |x: f64, _| coef * x.powf(exponent));
        let mut m = Self::general_density("power", f, Some(exponent))?;
        if exponent < 0.0 {
            m.regvar = Some(RegVar { alpha: 1.0 - exponent, scale: coef });
        }
        Ok(m)
    }

    /// A general density. The total mass is computed by quadrature; a known
    /// zero exponent `γ <= -1` is rejected as non-integrable.
    pub fn general_density(name: &str, f: DensityFn, zero_exponent: Option<f64>) -> Result<Self> {
        if let Some(g) = zero_exponent {
            if g <= -1.0 {
                return Err(Error::MeasureNotFinite(format!(
                    "density `{name}` behaves like x^{g} at 0"
                )));
            }
        }
        let density = GeneralDensity { name: name.to_string(), f, zero_exponent };
        let mass = integrate_density(&density, 1.0, |_, _| 1.0)?;
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::MeasureNotFinite(format!("density `{name}` has mass {mass}")));
        }
        Ok(LambdaMeasure { kind: MeasureKind::GeneralDensity(density), total_mass: mass, regvar: None })
    }

    /// Rescales the measure by `mass / total_mass`.
    pub fn with_mass(mut self, mass: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(invalid(format!("mass must be positive, got {mass}")));
        }
        match self.kind {
            MeasureKind::KingmanAtom | MeasureKind::Beta { .. } | MeasureKind::UniformDensity => {
                let factor = mass / self.total_mass;
                self.total_mass = mass;
                if let Some(rv) = self.regvar.as_mut() {
                    rv.scale *= factor;
                }
                Ok(self)
            }
            _ => Err(invalid("with_mass applies to parametric measures only")),
        }
    }

    /// Attaches an asserted regular-variation tag. For Beta(2 - α, α) the tag
    /// must agree with `A = mass / (Γ(2-α) Γ(α))` to 1e-12.
    pub fn with_regvar(mut self, alpha: f64, scale: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0 && scale > 0.0) {
            return Err(invalid(format!("regvar tag needs 1 < alpha < 2, A > 0; got ({alpha}, {scale})")));
        }
        if let MeasureKind::Beta { a, b } = self.kind {
            if (a + alpha - 2.0).abs() < 1e-12 && (b - alpha).abs() < 1e-12 {
                let expected = self.total_mass / (gamma(2.0 - alpha) * gamma(alpha));
                if ((scale - expected) / expected).abs() > 1e-12 {
                    return Err(invalid(format!(
                        "Beta(2-α, α) requires A = {expected:.15}, got {scale}"
                    )));
                }
            }
        }
        self.regvar = Some(RegVar { alpha, scale });
        Ok(self)
    }

    /// `Λ_η`: the restriction of the measure to `[0, 1 - η]`. The
    /// regular-variation tag is kept, since behaviour at zero is unchanged.
    pub fn truncate(&self, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(invalid(format!("eta must lie in (0, 1), got {eta}")));
        }
        // nested truncations collapse to the tightest one
        let (base, eta) = match &self.kind {
            MeasureKind::Truncated { base, eta: inner } => ((**base).clone(), eta.max(*inner)),
            _ => (self.clone(), eta),
        };
        let upper = 1.0 - eta;
        let total_mass = match &base.kind {
            MeasureKind::KingmanAtom => base.total_mass,
            MeasureKind::Beta { a, b } => base.total_mass * beta_reg_pair(*a, *b, upper).0,
            MeasureKind::UniformDensity => base.total_mass * upper,
            MeasureKind::GeneralDensity(d) => integrate_density(d, upper, |_, _| 1.0)?,
            MeasureKind::Truncated { .. } => unreachable!("collapsed above"),
        };
        let regvar = base.regvar;
        Ok(LambdaMeasure {
            kind: MeasureKind::Truncated { base: Box::new(base), eta },
            total_mass,
            regvar,
        })
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    /// `Λ([0, 1])`.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn regvar(&self) -> Option<RegVar> {
        self.regvar
    }

    pub fn is_kingman(&self) -> bool {
        matches!(self.untruncated().kind, MeasureKind::KingmanAtom)
    }

    /// The measure with any truncation removed, and the truncation level.
    pub fn untruncated(&self) -> &LambdaMeasure {
        match &self.kind {
            MeasureKind::Truncated { base, .. } => base,
            _ => self,
        }
    }

    pub fn eta(&self) -> Option<f64> {
        match &self.kind {
            MeasureKind::Truncated { eta, .. } => Some(*eta),
            _ => None,
        }
    }

    /// Right end of the support.
    pub fn support_upper(&self) -> f64 {
        self.eta().map_or(1.0, |eta| 1.0 - eta)
    }

    /// Exponent `γ` with `f(x) = O(x^γ)` at zero, when known. `None` for the
    /// atom at zero.
    pub fn zero_exponent(&self) -> Option<f64> {
        match &self.untruncated().kind {
            MeasureKind::KingmanAtom => None,
            MeasureKind::Beta { a, .. } => Some(a - 1.0),
            MeasureKind::UniformDensity => Some(0.0),
            MeasureKind::GeneralDensity(d) => d.zero_exponent,
            MeasureKind::Truncated { .. } => unreachable!(),
        }
    }

    /// Density at `x` (with `xc = 1 - x`), or `None` for the atom at zero.
    /// Zero outside the support.
    pub fn density(&self, x: f64, xc: f64) -> Option<f64> {
        match &self.kind {
            MeasureKind::KingmanAtom => None,
            MeasureKind::Beta { a, b } => Some(
                (self.total_mass.ln() + (a - 1.0) * x.ln() + (b - 1.0) * xc.ln() - ln_beta(*a, *b)).exp(),
            ),
            MeasureKind::UniformDensity => Some(self.total_mass),
            MeasureKind::GeneralDensity(d) => Some((d.f)(x, xc)),
            MeasureKind::Truncated { base, eta } => {
                let f = base.density(x, xc)?;
                Some(if x <= 1.0 - eta { f } else { 0.0 })
            }
        }
    }

    /// `λ_{b,k} = ∫ x^{k-2} (1-x)^{b-k} Λ(dx)`.
    pub fn collision_rate(&self, b: u64, k: u64) -> Result<f64> {
        if b < 2 || k < 2 || k > b {
            return Err(invalid(format!("collision rate needs 2 <= k <= b, got b={b}, k={k}")));
        }
        let p = (k - 2) as i32;
        let q = (b - k) as i32;
        match &self.kind {
            MeasureKind::KingmanAtom => Ok(if k == 2 { self.total_mass } else { 0.0 }),
            MeasureKind::Beta { a, b: bb } => {
                Ok(self.total_mass * (ln_beta(p as f64 + a, q as f64 + bb) - ln_beta(*a, *bb)).exp())
            }
            MeasureKind::UniformDensity => {
                Ok(self.total_mass * ln_beta(p as f64 + 1.0, q as f64 + 1.0).exp())
            }
            MeasureKind::GeneralDensity(d) => {
                integrate_density(d, 1.0, |x, xc| x.powi(p) * xc.powi(q))
            }
            MeasureKind::Truncated { base, eta } => {
                let upper = 1.0 - eta;
                match &base.kind {
                    MeasureKind::KingmanAtom => base.collision_rate(b, k),
                    MeasureKind::Beta { a, b: bb } => Ok(base.collision_rate(b, k)?
                        * beta_reg_pair(p as f64 + a, q as f64 + bb, upper).0),
                    MeasureKind::UniformDensity => Ok(base.collision_rate(b, k)?
                        * beta_reg_pair(p as f64 + 1.0, q as f64 + 1.0, upper).0),
                    MeasureKind::GeneralDensity(d) => {
                        integrate_density(d, upper, |x, xc| x.powi(p) * xc.powi(q))
                    }
                    MeasureKind::Truncated { .. } => unreachable!("truncations are collapsed"),
                }
            }
        }
    }

    /// Full table of log-weights `ln(C(b,k) λ_{b,k})`, `k = 2..=b`.
    pub fn rate_table(&self, b: u64) -> Result<RateTable> {
        if b < 2 {
            return Err(invalid(format!("rate table needs b >= 2, got {b}")));
        }
        let mut log_rates = Vec::with_capacity(b as usize - 1);
        for k in 2..=b {
            let rate = self.collision_rate(b, k)?;
            log_rates.push(ln_binomial(b, k) + rate.ln());
        }
        let shift = log_rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total = shift.exp() * log_rates.iter().map(|l| (l - shift).exp()).sum::<f64>();
        Ok(RateTable { b, log_rates, total })
    }
}

/// `∫_0^upper g(x) f(x) dx` for a general density, split into segments that
/// are each handled by tanh–sinh.
fn integrate_density(d: &GeneralDensity, upper: f64, g: impl Fn(f64, f64) -> f64) -> Result<f64> {
    let mut points = vec![0.0];
    let mut x = 1e-6;
    while x < upper / 8.0 {
        points.push(x);
        x *= 8.0;
    }
    for j in 1..8 {
        points.push(upper * j as f64 / 8.0);
    }
    points.push(upper);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut total = 0.0;
    for w in points.windows(2) {
        total += tanh_sinh(|x, xc| g(x, xc) * (d.f)(x, xc), w[0], w[1], Tolerance::rel(RATE_TOL))?.value;
    }
    Ok(total)
}

/// Cached jump law out of a `b`-block state.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub b: u64,
    /// `ln(C(b,k) λ_{b,k})` at index `k - 2`; `-inf` for zero rates.
    pub log_rates: Vec<f64>,
    /// `λ_b = Σ_k C(b,k) λ_{b,k}`.
    pub total: f64,
}

impl RateTable {
    /// Raw `λ_{b,k}`.
    pub fn raw_rate(&self, k: u64) -> f64 {
        (self.log_rates[(k - 2) as usize] - ln_binomial(self.b, k)).exp()
    }

    /// `P(merger size = k)`.
    pub fn probability(&self, k: u64) -> f64 {
        self.log_rates[(k - 2) as usize].exp() / self.total
    }

    /// Inverse-CDF selection of the merger size for `u` in `[0, 1)`.
    /// Intervals are half-open, so the lowest `k` wins a boundary.
    pub fn sample_merger_size(&self, u: f64) -> u64 {
        let shift = self.log_rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = self.log_rates.iter().map(|l| (l - shift).exp()).collect();
        let target = u * weights.iter().sum::<f64>();
        let mut cum = 0.0;
        let mut last_positive = 2;
        for (i, w) in weights.iter().enumerate() {
            if *w > 0.0 {
                last_positive = i as u64 + 2;
            }
            cum += w;
            if target < cum {
                return i as u64 + 2;
            }
        }
        last_positive
    }
}

/// Concurrent LRU cache of rate tables for a single measure.
pub struct RateCache {
    measure: LambdaMeasure,
    tables: Mutex<LruCache<u64, Arc<RateTable>>>,
}

impl RateCache {
    pub const DEFAULT_CAPACITY: usize = 4096;

    pub fn new(measure: LambdaMeasure, capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).expect("capacity >= 1");
        RateCache { measure, tables: Mutex::new(LruCache::new(cap)) }
    }

    pub fn measure(&self) -> &LambdaMeasure {
        &self.measure
    }

    pub fn get(&self, b: u64) -> Result<Arc<RateTable>> {
        if let Some(t) = self.tables.lock().expect("rate cache poisoned").get(&b) {
            return Ok(Arc::clone(t));
        }
        // computed outside the lock; a racing insert stores an equal table
        let table = Arc::new(self.measure.rate_table(b)?);
        self.tables.lock().expect("rate cache poisoned").put(b, Arc::clone(&table));
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.tables.lock().expect("rate cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Merger-size law used by the simulator.
///
/// Parametric families (Kingman, Beta, uniform and their truncations) scan
/// the weights `C(b,k) λ_{b,k}` upward from `k = 2` using the exact ratio
/// recurrence, which costs `O(k)` per event. General densities go through a
/// [`RateCache`]. Total jump rates come from
/// `λ_b = Σ_{j=1}^{b-1} j ∫ (1-x)^{j-1} Λ(dx)`, accumulated once up to `b_max`.
pub struct MergerSampler {
    law: Law,
    totals: Vec<f64>,
}

enum Law {
    Kingman,
    Beta { a: f64, b: f64, mass: f64, upper: Option<f64> },
    Tabulated(RateCache),
}

impl MergerSampler {
    pub fn new(measure: &LambdaMeasure, b_max: u64) -> Result<Self> {
        let b_max = b_max.max(2);
        let upper = measure.eta().map(|eta| 1.0 - eta);
        let base = measure.untruncated();
        let law = match base.kind {
            MeasureKind::KingmanAtom => Law::Kingman,
            MeasureKind::Beta { a, b } => Law::Beta { a, b, mass: base.total_mass, upper },
            MeasureKind::UniformDensity => Law::Beta { a: 1.0, b: 1.0, mass: base.total_mass, upper },
            MeasureKind::GeneralDensity(_) => {
                Law::Tabulated(RateCache::new(measure.clone(), RateCache::DEFAULT_CAPACITY))
            }
            MeasureKind::Truncated { .. } => unreachable!(),
        };
        // moments mu_m = ∫ (1-x)^m Λ(dx) = λ_{m+2,2}
        let mut totals = vec![0.0; b_max as usize + 1];
        let mut acc = 0.0;
        let mut mu_full = base.total_mass;
        for j in 1..b_max {
            let m = j - 1;
            let mu = match &law {
                Law::Kingman => base.total_mass,
                Law::Beta { a, b, upper, .. } => {
                    if m > 0 {
                        let mf = (m - 1) as f64;
                        mu_full *= (b + mf) / (a + b + mf);
                    }
                    match upper {
                        Some(u) => mu_full * beta_reg_pair(*a, b + m as f64, *u).0,
                        None => mu_full,
                    }
                }
                Law::Tabulated(_) => measure.collision_rate(m + 2, 2)?,
            };
            acc += j as f64 * mu;
            totals[j as usize + 1] = acc;
        }
        Ok(MergerSampler { law, totals })
    }

    pub fn b_max(&self) -> u64 {
        self.totals.len() as u64 - 1
    }

    /// `λ_b`, the total jump rate out of a `b`-block state.
    pub fn total_rate(&self, b: u64) -> f64 {
        self.totals[b as usize]
    }

    /// Merger size for uniform `u` in `[0, 1)`.
    pub fn sample(&self, b: u64, u: f64) -> Result<u64> {
        debug_assert!(b >= 2 && b <= self.b_max());
        match &self.law {
            Law::Kingman => Ok(2),
            Law::Tabulated(cache) => Ok(cache.get(b)?.sample_merger_size(u)),
            Law::Beta { a, b: bb, mass, upper } => {
                let target = u * self.total_rate(b);
                let bf = b as f64;
                let mut w_full = (ln_binomial(b, 2) + ln_beta(*a, bf - 2.0 + bb) - ln_beta(*a, *bb)).exp() * mass;
                let mut cum = 0.0;
                let mut last_positive = 2;
                for k in 2..=b {
                    let w = match upper {
                        Some(x) => w_full * beta_reg_pair(k as f64 - 2.0 + a, (b - k) as f64 + bb, *x).0,
                        None => w_full,
                    };
                    if w > 0.0 {
                        last_positive = k;
                    }
                    cum += w;
                    if target < cum {
                        return Ok(k);
                    }
                    if k < b {
                        let kf = k as f64;
                        w_full *= (bf - kf) / (kf + 1.0) * (kf - 2.0 + a) / (bf - kf - 1.0 + bb);
                    }
                }
                Ok(last_positive)
            }
        }
    }
}

/// Measure block of a config file or command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    /// `"beta" | "kingman" | "uniform" | "density"`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Name of a built-in density (`"power"`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    /// Mass of an atom at 1; any positive value is rejected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atom_at_one: Option<f64>,
}

impl MeasureSpec {
    pub fn beta_alpha(alpha: f64) -> Self {
        MeasureSpec {
            kind: "beta".into(),
            alpha: Some(alpha),
            a: None,
            b: None,
            mass: None,
            eta: None,
            density: None,
            exponent: None,
            atom_at_one: None,
        }
    }

    pub fn kingman() -> Self {
        MeasureSpec { kind: "kingman".into(), alpha: None, ..Self::beta_alpha(1.5) }
    }

    pub fn build(&self) -> Result<LambdaMeasure> {
        if self.atom_at_one.unwrap_or(0.0) > 0.0 {
            return Err(Error::AtomAtOne);
        }
        let mut m = match self.kind.as_str() {
            "kingman" => LambdaMeasure::kingman(),
            "uniform" => LambdaMeasure::uniform(),
            "beta" => match (self.alpha, self.a, self.b) {
                (Some(alpha), None, None) => LambdaMeasure::beta_alpha(alpha)?,
                (None, Some(a), Some(b)) => LambdaMeasure::beta(a, b)?,
                _ => return Err(Error::Config("beta needs either `alpha` or both `a` and `b`".into())),
            },
            "density" => match self.density.as_deref() {
                Some("power") => {
                    let exponent = self
                        .exponent
                        .ok_or_else(|| Error::Config("power density needs `exponent`".into()))?;
                    LambdaMeasure::power(exponent, self.mass.unwrap_or(1.0))?
                }
                Some(other) => return Err(Error::Config(format!("unknown built-in density `{other}`"))),
                None => return Err(Error::Config("density kind needs a `density` name".into())),
            },
            other => return Err(Error::Config(format!("unknown measure kind `{other}`"))),
        };
        if let Some(mass) = self.mass {
            if self.kind != "density" {
                m = m.with_mass(mass)?;
            }
        }
        if let Some(eta) = self.eta {
            m = m.truncate(eta)?;
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn beta_as_density(a: f64, b: f64) -> LambdaMeasure {
        let lb = ln_beta(a, b);
        let f: DensityFn = Arc::new(move |x: f64, xc: f64| ((a - 1.0) * x.ln() + (b - 1.0) * xc.ln() - lb).exp());
        LambdaMeasure::general_density("beta", f, Some(a - 1.0)).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn kingman_rates() {
        let m = LambdaMeasure::kingman();
        assert_eq!(m.collision_rate(5, 2).unwrap(), 1.0);
        assert_eq!(m.collision_rate(5, 3).unwrap(), 0.0);
        let s = MergerSampler::new(&m, 10).unwrap();
        assert_eq!(s.total_rate(10), 45.0);
        assert_eq!(s.sample(10, 0.999).unwrap(), 2);
    }

    #[test]
    fn uniform_rates_are_factorial_ratios() {
        // λ_{b,k} = (k-2)! (b-k)! / (b-1)!, λ_b = b - 1
        let m = LambdaMeasure::uniform();
        let fact = |n: u64| (1..=n).map(|i| i as f64).product::<f64>();
        for b in 2..12u64 {
            for k in 2..=b {
                let want = fact(k - 2) * fact(b - k) / fact(b - 1);
                assert!(rel(m.collision_rate(b, k).unwrap(), want) < 1e-12);
            }
        }
        let s = MergerSampler::new(&m, 200).unwrap();
        for b in [2u64, 3, 10, 200] {
            assert!(rel(s.total_rate(b), (b - 1) as f64) < 1e-12);
        }
    }

    #[test]
    fn beta_closed_form_matches_quadrature() {
        for &(a, b) in &[(0.5, 1.5), (0.8, 1.2), (1.5, 3.0)] {
            let closed = LambdaMeasure::beta(a, b).unwrap();
            let quad = beta_as_density(a, b);
            assert!(rel(quad.total_mass(), 1.0) < 1e-10);
            for &(bb, k) in &[(2u64, 2u64), (5, 3), (20, 2), (20, 17), (60, 30)] {
                let x = closed.collision_rate(bb, k).unwrap();
                let y = quad.collision_rate(bb, k).unwrap();
                assert!(rel(y, x) < 1e-9, "a={a} b={b} ({bb},{k}): {x} vs {y}");
            }
        }
    }

    #[test]
    fn truncated_beta_matches_quadrature() {
        let m = LambdaMeasure::beta_alpha(1.5).unwrap().truncate(0.3).unwrap();
        let q = beta_as_density(0.5, 1.5).truncate(0.3).unwrap();
        assert!(rel(m.total_mass(), q.total_mass()) < 1e-10);
        for &(b, k) in &[(2u64, 2u64), (8, 4), (30, 30)] {
            assert!(rel(q.collision_rate(b, k).unwrap(), m.collision_rate(b, k).unwrap()) < 1e-9);
        }
        assert!(m.regvar().is_some());
        // nested truncation keeps the tighter level
        assert_eq!(m.truncate(0.1).unwrap().eta(), Some(0.3));
        assert_eq!(m.truncate(0.5).unwrap().eta(), Some(0.5));
    }

    #[test]
    fn sampler_totals_match_rate_tables() {
        let measures = [
            LambdaMeasure::beta_alpha(1.3).unwrap(),
            LambdaMeasure::beta(2.0, 0.7).unwrap().with_mass(3.0).unwrap(),
            LambdaMeasure::beta_alpha(1.7).unwrap().truncate(0.2).unwrap(),
            LambdaMeasure::uniform().truncate(0.5).unwrap(),
            LambdaMeasure::power(-0.4, 2.0).unwrap(),
        ];
        for m in &measures {
            let s = MergerSampler::new(m, 40).unwrap();
            for b in [2u64, 3, 7, 40] {
                let t = m.rate_table(b).unwrap();
                assert!(rel(s.total_rate(b), t.total) < 1e-9, "{m:?} b={b}");
            }
        }
    }

    #[test]
    fn sampler_scan_matches_table_probabilities() {
        let m = LambdaMeasure::beta_alpha(1.2).unwrap().truncate(0.1).unwrap();
        let b = 25u64;
        let s = MergerSampler::new(&m, b).unwrap();
        let t = m.rate_table(b).unwrap();
        let grid = 40_000;
        let mut hist = vec![0usize; b as usize + 1];
        for i in 0..grid {
            hist[s.sample(b, (i as f64 + 0.5) / grid as f64).unwrap() as usize] += 1;
        }
        for k in 2..=b {
            let freq = hist[k as usize] as f64 / grid as f64;
            assert!((freq - t.probability(k)).abs() < 2.0 / grid as f64, "k={k}");
        }
        assert_eq!(t.sample_merger_size(0.0), 2);
    }

    #[test]
    fn cache_reuses_tables() {
        let cache = RateCache::new(LambdaMeasure::power(-0.5, 1.0).unwrap(), 2);
        let a = cache.get(6).unwrap();
        let b = cache.get(6).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        cache.get(7).unwrap();
        cache.get(8).unwrap();
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(LambdaMeasure::power(-1.0, 1.0), Err(Error::MeasureNotFinite(_))));
        let spec = MeasureSpec { atom_at_one: Some(0.1), ..MeasureSpec::beta_alpha(1.5) };
        assert_eq!(spec.build().unwrap_err(), Error::AtomAtOne);
        let m = LambdaMeasure::beta_alpha(1.5).unwrap();
        let good = 1.0 / (gamma(0.5) * gamma(1.5));
        assert!(m.clone().with_regvar(1.5, good).is_ok());
        assert!(m.with_regvar(1.5, good * 1.001).is_err());
        assert!(LambdaMeasure::beta_alpha(2.0).is_err());
        assert!(LambdaMeasure::uniform().truncate(1.0).is_err());
    }

    #[test]
    fn regvar_constants() {
        let rv = LambdaMeasure::beta_alpha(1.5).unwrap().with_mass(2.0).unwrap().regvar().unwrap();
        assert!(rel(rv.scale, 2.0 / (gamma(0.5) * gamma(1.5))) < 1e-13);
        let rv = LambdaMeasure::power(-0.25, 3.0).unwrap().regvar().unwrap();
        assert_eq!((rv.alpha, rv.scale), (1.25, 2.25));
    }

    #[test]
    fn spec_builds_from_toml() {
        let spec: MeasureSpec = toml::from_str("kind = \"beta\"\nalpha = 1.5\neta = 0.25\n").unwrap();
        let m = spec.build().unwrap();
        assert_eq!(m.eta(), Some(0.25));
        let bad: std::result::Result<MeasureSpec, _> = toml::from_str("kind = \"beta\"\nalfa = 1.5\n");
        assert!(bad.is_err());
    }

    proptest! {
        // λ_{b,k} = λ_{b+1,k} + λ_{b+1,k+1}
        #[test]
        fn consistency_recursion(alpha in 1.05f64..1.95, eta in prop::option::of(0.05f64..0.9), b in 2u64..60, kf in 0.0f64..1.0) {
            let mut m = LambdaMeasure::beta_alpha(alpha).unwrap();
            if let Some(e) = eta { m = m.truncate(e).unwrap(); }
            let k = 2 + ((b - 2) as f64 * kf) as u64;
            let lhs = m.collision_rate(b, k).unwrap();
            let rhs = m.collision_rate(b + 1, k).unwrap() + m.collision_rate(b + 1, k + 1).unwrap();
            prop_assert!(((lhs - rhs) / lhs).abs() < 1e-10);
        }

        #[test]
        fn jump_law_is_a_distribution(alpha in 1.05f64..1.95, b in 2u64..80) {
            let t = LambdaMeasure::beta_alpha(alpha).unwrap().rate_table(b).unwrap();
            let total: f64 = (2..=b).map(|k| t.probability(k)).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!((2..=b).all(|k| t.probability(k) >= 0.0));
        }

        #[test]
        fn sampled_size_in_range(alpha in 1.05f64..1.95, b in 2u64..300, u in 0.0f64..1.0) {
            let s = MergerSampler::new(&LambdaMeasure::beta_alpha(alpha).unwrap(), b).unwrap();
            let k = s.sample(b, u).unwrap();
            prop_assert!(k >= 2 && k <= b);
        }
    }
}
