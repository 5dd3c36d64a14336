//! Moments of the block average throughput and approximations of its
//! expected maximum over blocks.
//!
//! `C_b` is the mean of `log₂(1 + γ_n)` over a block. Its marginal mean is
//! exact (`γ_n` is exponential). The variance comes from a first or second
//! order Taylor (delta-method) expansion of `log₂(1 + γ)` about `γ̄`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exponential integral `E₁(x) = ∫₁^∞ e^{-xt} / t dt`, `x > 0`.
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("E1 is defined for x > 0, got {x}")));
    }
    if x <= 1.0 {
        Ok(e1_series(x))
    } else {
        Ok(e1_continued_fraction(x) * (-x).exp())
    }
}

/// `e^x E₁(x)`, finite for large `x` where `E₁` alone underflows.
pub fn exp_scaled_e1(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("E1 is defined for x > 0, got {x}")));
    }
    if x <= 1.0 {
        Ok(x.exp() * e1_series(x))
    } else {
        Ok(e1_continued_fraction(x))
    }
}

// E1(x) = -γ - ln x - Σ_{k≥1} (-x)^k / (k·k!)
fn e1_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut fact = 1.0;
    for k in 1..200 {
        fact *= -x / k as f64;
        let term = fact / k as f64;
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

// Modified Lentz evaluation of e^x E1(x), x > 1.
fn e1_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// `E[C_b] = E[log₂(1 + γ)] = e^{1/γ̄} E₁(1/γ̄) / ln 2`.
pub fn mean_cb(snr_scale: f64) -> Result<f64> {
    if !(snr_scale > 0.0) {
        return Err(invalid(format!("snr_scale must be positive, got {snr_scale}")));
    }
    Ok(exp_scaled_e1(snr_scale.recip())? / LN_2)
}

/// `V₁ = Var[γ] / ((1 + γ̄) ln 2)²` with `Var[γ] = γ̄²`.
pub fn v1(snr_scale: f64) -> f64 {
    (snr_scale / ((1.0 + snr_scale) * LN_2)).powi(2)
}

/// First-order variance `V₁ · S_SC(1, 0, S)`.
pub fn var_cb_first_order(snr_scale: f64, s_sc_intra: f64) -> f64 {
    v1(snr_scale) * s_sc_intra
}

/// Quadratic fit `log₂(1+γ) ≈ A₁ + A₂γ + A₃γ²` about `γ̄` and the
/// resulting covariance weights `B₁`, `B₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaCoefficients {
    pub snr_scale: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl DeltaCoefficients {
    pub fn second_order(snr_scale: f64) -> Self {
        let g = snr_scale;
        let slope = 1.0 / ((1.0 + g) * LN_2);
        let curv = -1.0 / (2.0 * (1.0 + g).powi(2) * LN_2);
        Self::from_taylor(g, slope, curv)
    }

    /// Second-order form with the curvature term removed; its variance is
    /// the first-order variance.
    pub fn first_order(snr_scale: f64) -> Self {
        Self::from_taylor(snr_scale, 1.0 / ((1.0 + snr_scale) * LN_2), 0.0)
    }

    // Taylor polynomial c0 + c1(γ-γ̄) + c2(γ-γ̄)² rewritten in powers of γ.
    fn from_taylor(g: f64, slope: f64, curv: f64) -> Self {
        let c0 = (1.0 + g).log2();
        Self {
            snr_scale: g,
            a1: c0 - slope * g + curv * g * g,
            a2: slope - 2.0 * curv * g,
            a3: curv,
        }
    }

    /// `B₁ = γ̄²(A₂² + 8A₂A₃γ̄ + 16A₃²γ̄²)`.
    pub fn b1(&self) -> f64 {
        let g = self.snr_scale;
        g * g * (self.a2 * self.a2 + 8.0 * self.a2 * self.a3 * g + 16.0 * self.a3 * self.a3 * g * g)
    }

    /// `B₂ = 4A₃²γ̄⁴`.
    pub fn b2(&self) -> f64 {
        4.0 * self.a3 * self.a3 * self.snr_scale.powi(4)
    }

    pub fn variance(&self, s_sc_1: f64, s_sc_2: f64) -> f64 {
        self.b1() * s_sc_1 + self.b2() * s_sc_2
    }
}

/// Second-order variance `B₁ S_SC(1,0,S) + B₂ S_SC(2,0,S)`.
pub fn var_cb_second_order(snr_scale: f64, s_sc_1: f64, s_sc_2: f64) -> f64 {
    DeltaCoefficients::second_order(snr_scale).variance(s_sc_1, s_sc_2)
}

/// Moments of `C_b` for one channel at one block size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CbMoments {
    pub snr_scale: f64,
    pub mean: f64,
    pub var_fo: f64,
    pub var_so: f64,
    /// `E[log₂(1 + γ₁)]`; equal to `mean`.
    pub e1: f64,
    pub v1: f64,
    pub s_sc_intra: f64,
}

impl CbMoments {
    pub fn new(snr_scale: f64, s_sc_1: f64, s_sc_2: f64) -> Result<Self> {
        if !(0.0..=1.0 + 1e-12).contains(&s_sc_1) || !(0.0..=1.0 + 1e-12).contains(&s_sc_2) {
            return Err(invalid("intra-block sums must lie in [0, 1]"));
        }
        let e1 = mean_cb(snr_scale)?;
        Ok(Self {
            snr_scale,
            mean: e1,
            var_fo: var_cb_first_order(snr_scale, s_sc_1),
            var_so: var_cb_second_order(snr_scale, s_sc_1, s_sc_2),
            e1,
            v1: v1(snr_scale),
            s_sc_intra: s_sc_1,
        })
    }

    pub fn variance(&self, model: VarianceModel) -> f64 {
        match model {
            VarianceModel::FirstOrder => self.var_fo,
            VarianceModel::SecondOrder => self.var_so,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceModel {
    #[default]
    FirstOrder,
    SecondOrder,
}

fn check_phi(phi: f64) -> Result<()> {
    if !(phi > 0.0 && phi <= 1.0 + 1e-12) {
        return Err(invalid(format!("phi must lie in (0, 1], got {phi}")));
    }
    Ok(())
}

/// `(N − 1) / √(2N − 1)` with the real-valued block count `N = 1/Φ`.
pub fn os_gain_factor(phi: f64) -> f64 {
    let n = phi.recip();
    (n - 1.0).max(0.0) / (2.0 * n - 1.0).sqrt()
}

/// `𝓔 = √(S_SC(1,0,S) · ln(1/Φ))`.
pub fn gaussian_gain_term(s_sc_intra: f64, phi: f64) -> f64 {
    (s_sc_intra * phi.recip().ln().max(0.0)).sqrt()
}

/// Order-statistics approximation
/// `E₁ + (1/Φ − 1)/√(2/Φ − 1) · √Var[C_b]` (first-order variance).
pub fn max_cb_os_bound(moments: &CbMoments, phi: f64) -> Result<f64> {
    max_cb_os_bound_with(moments, phi, VarianceModel::FirstOrder)
}

pub fn max_cb_os_bound_with(moments: &CbMoments, phi: f64, model: VarianceModel) -> Result<f64> {
    check_phi(phi)?;
    Ok(moments.e1 + os_gain_factor(phi) * moments.variance(model).sqrt())
}

/// Gaussian approximation `E₁ + √(S_SC(1,0,S) ln(1/Φ)) · √(2V₁)`.
pub fn max_cb_gaussian(moments: &CbMoments, s_sc_intra: f64, phi: f64) -> Result<f64> {
    check_phi(phi)?;
    Ok(moments.e1 + gaussian_gain_term(s_sc_intra, phi) * (2.0 * moments.v1).sqrt())
}

/// Gaussian approximation `E₁ + √(2 Var[C_b] ln(1/Φ))` with a chosen
/// variance model.
pub fn max_cb_gaussian_with(moments: &CbMoments, phi: f64, model: VarianceModel) -> Result<f64> {
    check_phi(phi)?;
    Ok(moments.e1 + (2.0 * moments.variance(model) * phi.recip().ln().max(0.0)).sqrt())
}
