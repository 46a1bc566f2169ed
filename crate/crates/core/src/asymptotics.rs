//! Large-`n` predictions for a strongly α-regularly varying measure with
//! constant `A`, against which simulations are compared.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::measure::LambdaMeasure;
use crate::special::gamma;

/// Constants of the regularly varying regime, plus `c_k` for `k = 1..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub alpha: f64,
    /// `A` in `f(x) ~ A x^{1-α}`.
    pub scale: f64,
    pub theta: f64,
    /// `B = α(α-1) / (A Γ(2-α) (2-α))`.
    pub b: f64,
    /// `c = α / (A Γ(2-α))`.
    pub c: f64,
    /// `ᾱ = (2-α)/(α-1)`.
    pub abar: f64,
    /// `c_k` at index `k - 1`.
    pub c_k: Vec<f64>,
    /// `c̄_k = Σ_{j>=k} c_j` at index `k - 1`.
    pub cbar_k: Vec<f64>,
}

impl PredictionSet {
    pub fn new(alpha: f64, scale: f64, theta: f64, k_max: usize) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(invalid(format!("alpha must lie in (1, 2), got {alpha}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid(format!("A must be positive, got {scale}")));
        }
        if !(theta >= 0.0 && theta.is_finite()) {
            return Err(invalid(format!("theta must be non-negative, got {theta}")));
        }
        let g = gamma(2.0 - alpha);
        let k_max = k_max.max(1);
        // c_1 = 2-α, c_{k+1}/c_k = (k+α-2)/(k+1); c̄_1 = 1, c̄_{k+1}/c̄_k = (k+α-2)/k
        let mut c_k = Vec::with_capacity(k_max);
        let mut cbar_k = Vec::with_capacity(k_max);
        let (mut ck, mut cbar) = (2.0 - alpha, 1.0);
        for k in 1..=k_max {
            c_k.push(ck);
            cbar_k.push(cbar);
            let kf = k as f64;
            ck *= (kf + alpha - 2.0) / (kf + 1.0);
            cbar *= (kf + alpha - 2.0) / kf;
        }
        Ok(PredictionSet {
            alpha,
            scale,
            theta,
            b: alpha * (alpha - 1.0) / (scale * g * (2.0 - alpha)),
            c: alpha / (scale * g),
            abar: (2.0 - alpha) / (alpha - 1.0),
            c_k,
            cbar_k,
        })
    }

    /// Constants read off a measure's regular-variation tag.
    pub fn from_measure(measure: &LambdaMeasure, theta: f64, k_max: usize) -> Result<Self> {
        let rv = measure
            .regvar()
            .ok_or_else(|| invalid("predictions need a strongly regularly varying measure"))?;
        Self::new(rv.alpha, rv.scale, theta, k_max)
    }

    pub fn k_max(&self) -> usize {
        self.c_k.len()
    }

    /// `c_k` for any `k >= 1`, extending the table by the recurrence.
    pub fn c(&self, k: usize) -> f64 {
        assert!(k >= 1, "c_k is defined for k >= 1");
        if k <= self.c_k.len() {
            return self.c_k[k - 1];
        }
        self.cbar(k) * (2.0 - self.alpha) / k as f64
    }

    /// `c̄_k = Γ(k+α-2) / ((k-1)! Γ(α-1))`, the tail `Σ_{j>=k} c_j`.
    pub fn cbar(&self, k: usize) -> f64 {
        assert!(k >= 1, "c̄_k is defined for k >= 1");
        if k <= self.cbar_k.len() {
            return self.cbar_k[k - 1];
        }
        let mut cbar = *self.cbar_k.last().expect("k_max >= 1");
        for j in self.cbar_k.len()..k {
            cbar *= (j as f64 + self.alpha - 2.0) / j as f64;
        }
        cbar
    }

    /// `C = (θB/Γ(α-1))^{1/(2-α)}`.
    pub fn frequency_constant(&self) -> f64 {
        (self.theta * self.b / gamma(self.alpha - 1.0)).powf(1.0 / (2.0 - self.alpha))
    }
}

/// `(S_n, A_n)` predictions, both `θ B n^{2-α}`.
pub fn predict_counts(p: &PredictionSet, n: u64) -> (f64, f64) {
    let x = p.theta * p.b * (n as f64).powf(2.0 - p.alpha);
    (x, x)
}

/// `θ B c_k n^{2-α}`, the shared prediction for `F_{k,n}` and `M_{k,n}`.
pub fn predict_spectrum(p: &PredictionSet, n: u64, k: usize) -> f64 {
    p.theta * p.b * p.c(k) * (n as f64).powf(2.0 - p.alpha)
}

/// `P_j ≈ C j^{-1/(2-α)}`.
pub fn predict_allele_frequency(p: &PredictionSet, j: usize) -> f64 {
    p.frequency_constant() * (j as f64).powf(-1.0 / (2.0 - p.alpha))
}

fn check_unit(u: f64) -> Result<()> {
    if u > 0.0 && u < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("quantile level must lie in (0, 1), got {u}")))
    }
}

/// `u`-quantile of `c (U^{-(α-1)/(2-α)} - 1)`, the limit law of
/// `M_n n^{α-1}`.
pub fn mn_limit_quantile(p: &PredictionSet, u: f64) -> Result<f64> {
    check_unit(u)?;
    Ok(p.c * ((1.0 - u).powf(-1.0 / p.abar) - 1.0))
}

/// `u`-quantile of the competing form `c U^{-(α-1)/(2-α)} - 1`.
pub fn mn_limit_quantile_alt(p: &PredictionSet, u: f64) -> Result<f64> {
    check_unit(u)?;
    Ok(p.c * (1.0 - u).powf(-1.0 / p.abar) - 1.0)
}

/// Mean of the limit law, `c(α-1)/(3-2α)`; infinite for `α >= 3/2`.
pub fn mn_limit_mean(p: &PredictionSet) -> f64 {
    if p.alpha >= 1.5 {
        f64::INFINITY
    } else {
        p.c * (p.alpha - 1.0) / (3.0 - 2.0 * p.alpha)
    }
}

/// Scale of `E[M_n]`: `n^{1-α}` below 3/2, `n^{-1/2} log n` at 3/2 and
/// `n^{α-2}` above.
pub fn g_scale(alpha: f64, n: f64) -> f64 {
    if alpha < 1.5 {
        n.powf(1.0 - alpha)
    } else if alpha == 1.5 {
        n.ln() / n.sqrt()
    } else {
        n.powf(alpha - 2.0)
    }
}

/// Which coming-down-from-infinity asymptotic to return.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaClaim {
    TauN,
    TN,
    TreeLength,
    WeightedLength,
}

/// A deterministic asymptotic curve, or the statement that the limit is
/// random.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AsymptoticCurve {
    /// `coef · x^exponent`.
    Power { coef: f64, exponent: f64 },
    /// `coef · log(1/x)`.
    Log { coef: f64 },
    /// The quantity converges to a random limit with no closed-form law.
    RandomLimit,
}

impl AsymptoticCurve {
    pub fn eval(&self, x: f64) -> Option<f64> {
        match *self {
            AsymptoticCurve::Power { coef, exponent } => Some(coef * x.powf(exponent)),
            AsymptoticCurve::Log { coef } => Some(coef * (1.0 / x).ln()),
            AsymptoticCurve::RandomLimit => None,
        }
    }
}

/// `τ_n, t_n ~ c n^{1-α}`; `L_n ~ (c/ᾱ) n^{2-α}`; `∫_x u N(u) du ~
/// c_2 x^{1-ᾱ}` (`ᾱ > 1`) or `c_2 log(1/x)` (`ᾱ = 1`), with
/// `c_2 = c^{1/(α-1)} / (ᾱ - 1)` and `c^{1/(α-1)}` respectively.
pub fn lemma_asymptotics(p: &PredictionSet, which: LemmaClaim) -> AsymptoticCurve {
    match which {
        LemmaClaim::TauN | LemmaClaim::TN => AsymptoticCurve::Power { coef: p.c, exponent: 1.0 - p.alpha },
        LemmaClaim::TreeLength => AsymptoticCurve::Power { coef: p.c / p.abar, exponent: 2.0 - p.alpha },
        LemmaClaim::WeightedLength => {
            let lead = p.c.powf(1.0 / (p.alpha - 1.0));
            if p.alpha == 1.5 {
                AsymptoticCurve::Log { coef: lead }
            } else if p.abar > 1.0 {
                AsymptoticCurve::Power { coef: lead / (p.abar - 1.0), exponent: 1.0 - p.abar }
            } else {
                AsymptoticCurve::RandomLimit
            }
        }
    }
}
