//! Closed-form correlation calculus of a power delay profile.
//!
//! Everything here is a deterministic function of the profile (and, for
//! CDD, the cyclic delays). The subcarrier SNR correlation is
//! `ρ_SC(Δn) = |Σ_m α_m² e^{-j2π m Δn / N_sc}|²`; block-level quantities are
//! built from sums of it over block pairs.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{cdd_compose_pdp, CddConfig, FrequencyTransform, OfdmConfig, PowerDelayProfile};
use crate::error::{invalid, Error, Result};

/// Default power-capture ratio for the Chebyshev maximum delay.
pub const DEFAULT_KAPPA: f64 = 0.9;

/// Coherence constant that maps an RMS delay of one sample to a coherence
/// bandwidth of `N_sc / 2π` subcarriers.
pub fn default_k_c(n_sc: usize) -> f64 {
    2.0 * PI / n_sc as f64
}

/// `Cov(H_n, H_{n+Δn}) = Σ_m α_m² e^{-j2π m Δn / N_sc}`, evaluated directly.
pub fn cov_h(pdp: &PowerDelayProfile, delta_n: i64, n_sc: usize) -> Complex64 {
    let n = n_sc as i64;
    let dn = delta_n.rem_euclid(n);
    pdp.gains()
        .iter()
        .enumerate()
        .map(|(m, &a)| {
            let k = (m as i64 * dn).rem_euclid(n);
            Complex64::from_polar(a * a, -2.0 * PI * k as f64 / n_sc as f64)
        })
        .sum()
}

/// Subcarrier SNR correlation coefficient `|Cov(H_n, H_{n+Δn})|²`.
pub fn rho_sc(pdp: &PowerDelayProfile, delta_n: i64, n_sc: usize) -> f64 {
    cov_h(pdp, delta_n, n_sc).norm_sqr().min(1.0)
}

/// `ρ_SC(Δn)` for every `Δn ∈ [0, N_sc)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    rho: Vec<f64>,
}

impl CorrelationTable {
    /// One FFT of the tap powers.
    pub fn new(pdp: &PowerDelayProfile, n_sc: usize) -> Result<Self> {
        if pdp.len() > n_sc {
            return Err(invalid(format!(
                "profile with {} taps exceeds {} subcarriers",
                pdp.len(),
                n_sc
            )));
        }
        let cov = FrequencyTransform::new(n_sc).transform_real(&pdp.powers())?;
        Ok(Self {
            rho: cov.iter().map(|c| c.norm_sqr().min(1.0)).collect(),
        })
    }

    /// Table of a CDD channel with identical per-antenna profiles:
    /// `ρ_SC(Δn) · w(Δn)`.
    pub fn with_cdd(pdp: &PowerDelayProfile, cdd: &CddConfig, n_sc: usize) -> Result<Self> {
        cdd.validate_for(n_sc)?;
        let mut table = Self::new(pdp, n_sc)?;
        for (dn, r) in table.rho.iter_mut().enumerate() {
            *r *= cdd_weight(cdd, dn as i64, n_sc);
        }
        Ok(table)
    }

    /// Synthetic correlation profile (e.g. independent subcarriers).
    pub fn from_values(rho: Vec<f64>) -> Result<Self> {
        if rho.is_empty() {
            return Err(invalid("correlation table must not be empty"));
        }
        if rho.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(invalid("correlation values must lie in [0, 1]"));
        }
        if (rho[0] - 1.0).abs() > 1e-12 {
            return Err(invalid("correlation at zero lag must be 1"));
        }
        Ok(Self { rho })
    }

    pub fn n_sc(&self) -> usize {
        self.rho.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.rho
    }

    /// Periodic lookup.
    pub fn rho(&self, delta_n: i64) -> f64 {
        self.rho[delta_n.rem_euclid(self.rho.len() as i64) as usize]
    }

    fn check_block(&self, block_size: usize) -> Result<usize> {
        if block_size == 0 || self.n_sc() % block_size != 0 {
            return Err(invalid(format!(
                "block size {block_size} does not divide n_sc {}",
                self.n_sc()
            )));
        }
        Ok(self.n_sc() / block_size)
    }

    /// `S_SC(r, Δb, S) = (1/S²) Σ_{n1,n2} ρ_SC(Δb·S + n2 − n1)^r`.
    ///
    /// Collapsed to a single sum over the in-block offset `d = n2 − n1`,
    /// which occurs `S − |d|` times.
    pub fn sum_sc(&self, r: u32, delta_b: i64, block_size: usize) -> Result<f64> {
        if !(1..=2).contains(&r) {
            return Err(Error::UnsupportedOrder(r));
        }
        self.check_block(block_size)?;
        let s = block_size as i64;
        let base = delta_b * s;
        let total: f64 = (-(s - 1)..s)
            .map(|d| {
                let rho = self.rho(base + d);
                let v = if r == 1 { rho } else { rho * rho };
                (s - d.abs()) as f64 * v
            })
            .sum();
        Ok(total / (s * s) as f64)
    }

    /// Block throughput correlation `S_SC(1, Δb, S) / S_SC(1, 0, S)` (first
    /// order in the delta-method expansion).
    pub fn rho_rb(&self, delta_b: i64, block_size: usize) -> Result<f64> {
        let intra = self.sum_sc(1, 0, block_size)?;
        Ok((self.sum_sc(1, delta_b, block_size)? / intra).clamp(0.0, 1.0))
    }

    pub fn rho_rb_profile(&self, block_size: usize) -> Result<Vec<f64>> {
        let n_rb = self.check_block(block_size)?;
        (0..n_rb as i64).map(|b| self.rho_rb(b, block_size)).collect()
    }

    /// Inter-block sum correlation `Φ(S) = (1/N_RB) Σ_b ρ_RB(b)`.
    pub fn inter_block_sum(&self, block_size: usize) -> Result<f64> {
        Ok(phi_from_rho_rb(&self.rho_rb_profile(block_size)?))
    }

    /// `1 / S_SC(1, 0, N_sc)`: whole-band effective number of paths.
    pub fn effective_paths(&self) -> f64 {
        let mean = self.rho.iter().sum::<f64>() / self.rho.len() as f64;
        mean.recip()
    }

    pub fn summary(&self, block_size: usize) -> Result<CorrelationSummary> {
        let s_sc_intra = self.sum_sc(1, 0, block_size)?;
        let s_sc_intra_2 = self.sum_sc(2, 0, block_size)?;
        let rho_rb = self.rho_rb_profile(block_size)?;
        let phi = phi_from_rho_rb(&rho_rb);
        Ok(CorrelationSummary {
            block_size,
            rho_sc: self.rho.clone(),
            s_sc_intra,
            s_sc_intra_2,
            phi,
            eff_paths: self.effective_paths(),
            eff_blocks: phi.recip(),
            rho_rb,
        })
    }
}

/// `Φ` from a block correlation profile over `Δb ∈ [0, N_RB)`.
pub fn phi_from_rho_rb(rho_rb: &[f64]) -> f64 {
    rho_rb.iter().sum::<f64>() / rho_rb.len() as f64
}

/// Correlation analytics of one channel at one block size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub block_size: usize,
    /// `ρ_SC(Δn)`, `Δn ∈ [0, N_sc)`.
    pub rho_sc: Vec<f64>,
    /// Intra-block sum correlation `S_SC(1, 0, S)`.
    pub s_sc_intra: f64,
    /// Second-order intra-block sum `S_SC(2, 0, S)`.
    pub s_sc_intra_2: f64,
    /// Inter-block sum correlation `Φ(S)`.
    pub phi: f64,
    pub eff_paths: f64,
    pub eff_blocks: f64,
    /// `ρ_RB(Δb)`, `Δb ∈ [0, N_RB)`.
    pub rho_rb: Vec<f64>,
}

pub fn correlation_summary(pdp: &PowerDelayProfile, cfg: &OfdmConfig) -> Result<CorrelationSummary> {
    CorrelationTable::new(pdp, cfg.n_sc)?.summary(cfg.block_size)
}

/// Summary of the CDD channel, through the composed profile so per-antenna
/// profiles may differ.
pub fn correlation_summary_cdd(
    pdps: &[PowerDelayProfile],
    cdd: &CddConfig,
    cfg: &OfdmConfig,
) -> Result<CorrelationSummary> {
    correlation_summary(&cdd_compose_pdp(pdps, cdd, cfg)?, cfg)
}

/// `S_SC(r, Δb, S)` of a profile.
pub fn sum_sc(
    pdp: &PowerDelayProfile,
    r: u32,
    delta_b: i64,
    block_size: usize,
    n_sc: usize,
) -> Result<f64> {
    CorrelationTable::new(pdp, n_sc)?.sum_sc(r, delta_b, block_size)
}

pub fn rho_rb(pdp: &PowerDelayProfile, delta_b: i64, block_size: usize, n_sc: usize) -> Result<f64> {
    CorrelationTable::new(pdp, n_sc)?.rho_rb(delta_b, block_size)
}

pub fn inter_block_sum(pdp: &PowerDelayProfile, block_size: usize, n_sc: usize) -> Result<f64> {
    CorrelationTable::new(pdp, n_sc)?.inter_block_sum(block_size)
}

/// Frequency selectivity `1 / S_SC(1, 0, N_sc)` through the correlation
/// sum. Equals [`PowerDelayProfile::effective_paths`] whenever the profile
/// fits in `N_sc` taps.
pub fn selectivity_measure(pdp: &PowerDelayProfile, n_sc: usize) -> Result<f64> {
    Ok(CorrelationTable::new(pdp, n_sc)?.effective_paths())
}

/// CDD weight `|Σ_i e^{-j2π D_i Δn / N_sc} / N_Tx|²`.
pub fn cdd_weight(cdd: &CddConfig, delta_n: i64, n_sc: usize) -> f64 {
    let n = n_sc as i64;
    let s: Complex64 = cdd
        .delays()
        .iter()
        .map(|&d| {
            let k = (d as i64 * delta_n).rem_euclid(n);
            Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n_sc as f64)
        })
        .sum();
    (s / cdd.n_tx() as f64).norm_sqr().min(1.0)
}

/// `ρ_SC^cdd(Δn) = ρ_SC(Δn) · w(Δn)` for identical per-antenna profiles.
pub fn rho_sc_cdd(
    pdps: &[PowerDelayProfile],
    cdd: &CddConfig,
    delta_n: i64,
    n_sc: usize,
) -> Result<f64> {
    let pdp = identical_profile(pdps, cdd)?;
    Ok(rho_sc(pdp, delta_n, n_sc) * cdd_weight(cdd, delta_n, n_sc))
}

fn identical_profile<'a>(pdps: &'a [PowerDelayProfile], cdd: &CddConfig) -> Result<&'a PowerDelayProfile> {
    if pdps.len() != cdd.n_tx() {
        return Err(invalid(format!(
            "{} antenna profiles for {} antennas",
            pdps.len(),
            cdd.n_tx()
        )));
    }
    let first = &pdps[0];
    if pdps.iter().any(|p| p != first) {
        return Err(Error::UnsupportedConfiguration(
            "the CDD correlation weight needs identical per-antenna profiles; \
             compose the profile with cdd_compose_pdp instead"
                .into(),
        ));
    }
    Ok(first)
}

/// Effective paths of a linear-delay CDD channel (`D_i = (i-1)·delay`) with
/// identical per-antenna profiles:
/// `N_Tx² / Σ_{i,j} R(|i-j|·delay)`, `R(k) = Σ_m α_m² α_{m+k}²`.
///
/// For two antennas this is `2 / (Σα⁴ + Σ_{m>D} α_m² α_{m-D}²)`. Delays
/// that wrap around `N_sc` are not modelled; see
/// [`cdd_compose_pdp`](crate::channel::cdd_compose_pdp) for that case.
pub fn effective_paths_cdd(pdp: &PowerDelayProfile, delay: usize, n_tx: usize) -> Result<f64> {
    if n_tx == 0 {
        return Err(invalid("n_tx must be at least 1"));
    }
    let p = pdp.powers();
    let overlap = |k: usize| -> f64 {
        if k >= p.len() {
            0.0
        } else {
            p[k..].iter().zip(&p).map(|(a, b)| a * b).sum()
        }
    };
    let mut denom = 0.0;
    for i in 0..n_tx {
        for j in 0..n_tx {
            denom += overlap(i.abs_diff(j) * delay);
        }
    }
    Ok((n_tx * n_tx) as f64 / denom)
}

/// Excess-delay statistics of one antenna's profile, in samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaySpreadStats {
    pub mu: f64,
    pub tau_rms: f64,
    pub tau_max: usize,
    pub kappa: f64,
}

impl DelaySpreadStats {
    pub fn new(mu: f64, tau_rms: f64, kappa: f64) -> Result<Self> {
        if !(tau_rms >= 0.0) {
            return Err(invalid(format!("tau_rms must be nonnegative, got {tau_rms}")));
        }
        Ok(Self {
            mu,
            tau_rms,
            tau_max: tau_max(tau_rms, kappa)?,
            kappa,
        })
    }
}

/// Mean excess delay and RMS delay spread with the default κ.
pub fn rms_delay(pdp: &PowerDelayProfile) -> DelaySpreadStats {
    delay_spread(pdp, DEFAULT_KAPPA).expect("default kappa is valid")
}

pub fn delay_spread(pdp: &PowerDelayProfile, kappa: f64) -> Result<DelaySpreadStats> {
    let powers = pdp.powers();
    let mu: f64 = powers.iter().enumerate().map(|(m, p)| m as f64 * p).sum();
    // Central form avoids cancellation in Σm²p − μ².
    let var: f64 = powers
        .iter()
        .enumerate()
        .map(|(m, p)| (m as f64 - mu).powi(2) * p)
        .sum();
    DelaySpreadStats::new(mu, var.max(0.0).sqrt(), kappa)
}

/// Chebyshev maximum delay spread `⌈2τ_rms / √(1-κ)⌉ + 1`.
pub fn tau_max(tau_rms: f64, kappa: f64) -> Result<usize> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(invalid(format!("kappa must lie in (0, 1), got {kappa}")));
    }
    let x = 2.0 * tau_rms / (1.0 - kappa).sqrt();
    // Absorb round-off so exact integers do not step up.
    let ceil = (x - 1e-12 * x.max(1.0)).ceil().max(0.0);
    Ok(ceil as usize + 1)
}

/// RMS delay spread of the CDD channel from per-antenna statistics:
/// `√(Σ(τ_i² + (μ_i + D_i)²)/N_Tx − (Σ(μ_i + D_i)/N_Tx)²)`.
pub fn cdd_rms_delay(stats: &[DelaySpreadStats], cdd: &CddConfig) -> Result<f64> {
    if stats.len() != cdd.n_tx() {
        return Err(invalid(format!(
            "{} antenna statistics for {} antennas",
            stats.len(),
            cdd.n_tx()
        )));
    }
    let n = stats.len() as f64;
    let (mut second, mut first) = (0.0, 0.0);
    for (s, &d) in stats.iter().zip(cdd.delays()) {
        let shifted = s.mu + d as f64;
        second += (s.tau_rms * s.tau_rms + shifted * shifted) / n;
        first += shifted / n;
    }
    Ok((second - first * first).max(0.0).sqrt())
}

/// Constants of `τ_rms^cdd(D) = √(aD² + bD + c + τ̄²)` for `D_i = (i-1)D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearDelaySpread {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Mean of the per-antenna `τ_rms²`.
    pub tau_bar_sq: f64,
}

impl LinearDelaySpread {
    pub fn new(stats: &[DelaySpreadStats]) -> Result<Self> {
        if stats.is_empty() {
            return Err(invalid("need at least one antenna"));
        }
        let n = stats.len() as f64;
        let mu1 = stats.iter().map(|s| s.mu).sum::<f64>() / n;
        let mu_w = stats
            .iter()
            .enumerate()
            .map(|(i, s)| (i + 1) as f64 * s.mu)
            .sum::<f64>()
            / n;
        let mu2 = stats.iter().map(|s| s.mu * s.mu).sum::<f64>() / n;
        Ok(Self {
            a: (n * n - 1.0) / 12.0,
            b: 2.0 * mu_w - mu1 * (n + 1.0),
            c: mu2 - mu1 * mu1,
            tau_bar_sq: stats.iter().map(|s| s.tau_rms * s.tau_rms).sum::<f64>() / n,
        })
    }

    pub fn tau_rms(&self, delay: f64) -> f64 {
        (self.a * delay * delay + self.b * delay + self.c + self.tau_bar_sq)
            .max(0.0)
            .sqrt()
    }
}

/// Coherence bandwidth `1 / (k_c · τ_rms)`; infinite for a flat channel.
///
/// # Panics
/// If `k_c` is not positive.
pub fn coherence_bandwidth_cdd(tau_rms_cdd: f64, k_c: f64) -> f64 {
    assert!(k_c > 0.0, "coherence constant must be positive");
    if tau_rms_cdd <= 0.0 {
        f64::INFINITY
    } else {
        (k_c * tau_rms_cdd).recip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::make_exponential_pdp;
    use approx::assert_abs_diff_eq;

    fn two_tap(p1: f64) -> PowerDelayProfile {
        PowerDelayProfile::from_powers(&[p1, 1.0 - p1]).unwrap()
    }

    #[test]
    fn cov_basics() {
        let pdp = make_exponential_pdp(3.0, 20).unwrap();
        assert_abs_diff_eq!(cov_h(&pdp, 0, 256).re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cov_h(&pdp, 0, 256).im, 0.0, epsilon = 1e-12);
        let flat = PowerDelayProfile::single_tap();
        for dn in [-7, 1, 100, 255] {
            assert_abs_diff_eq!(cov_h(&flat, dn, 256).re, 1.0, epsilon = 1e-15);
        }
        // ½(1 + e^{-jπ}) = 0
        assert!(cov_h(&two_tap(0.5), 128, 256).norm() < 1e-15);
        assert!(rho_sc(&two_tap(0.5), 128, 256) < 1e-30);
    }

    #[test]
    fn table_matches_direct_rho() {
        let pdp = make_exponential_pdp(4.0, 30).unwrap();
        let t = CorrelationTable::new(&pdp, 128).unwrap();
        for dn in 0..128 {
            assert_abs_diff_eq!(t.rho(dn), rho_sc(&pdp, dn, 128), epsilon = 1e-13);
        }
        assert_abs_diff_eq!(t.rho(-5), t.rho(123), epsilon = 0.0);
    }

    #[test]
    fn sum_sc_order_checked() {
        let pdp = PowerDelayProfile::uniform(4).unwrap();
        assert_eq!(sum_sc(&pdp, 3, 0, 8, 64), Err(Error::UnsupportedOrder(3)));
        assert_eq!(sum_sc(&pdp, 0, 0, 8, 64), Err(Error::UnsupportedOrder(0)));
        assert!(sum_sc(&pdp, 1, 0, 7, 64).is_err());
    }

    #[test]
    fn flat_channel_sums_are_one() {
        let flat = PowerDelayProfile::single_tap();
        for r in [1, 2] {
            for db in [0, 1, 5] {
                assert_abs_diff_eq!(sum_sc(&flat, r, db, 8, 64).unwrap(), 1.0, epsilon = 1e-12);
            }
        }
        assert_abs_diff_eq!(inter_block_sum(&flat, 8, 64).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rho_rb(&flat, 3, 8, 64).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn independent_subcarriers_hit_lower_bound() {
        let mut rho = vec![0.0; 64];
        rho[0] = 1.0;
        let t = CorrelationTable::from_values(rho).unwrap();
        assert_abs_diff_eq!(t.sum_sc(1, 0, 8).unwrap(), 1.0 / 8.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.effective_paths(), 64.0, epsilon = 1e-12);
    }

    #[test]
    fn ch_c_phi() {
        let mut rho_rb = vec![0.0; 32];
        rho_rb[0] = 1.0;
        assert_abs_diff_eq!(phi_from_rho_rb(&rho_rb), 1.0 / 32.0, epsilon = 1e-15);
    }

    #[test]
    fn reference_effective_paths() {
        assert_abs_diff_eq!(selectivity_measure(&two_tap(0.5), 1024).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            selectivity_measure(&two_tap(2.0 / 3.0), 1024).unwrap(),
            9.0 / 5.0,
            epsilon = 1e-12
        );
        for l in [1, 3, 17, 64] {
            let pdp = PowerDelayProfile::uniform(l).unwrap();
            assert_abs_diff_eq!(selectivity_measure(&pdp, 1024).unwrap(), l as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_block_degenerate() {
        let pdp = make_exponential_pdp(2.0, 16).unwrap();
        let s = correlation_summary(&pdp, &OfdmConfig::new(64, 64, 1.0).unwrap()).unwrap();
        assert_eq!(s.rho_rb.len(), 1);
        assert_abs_diff_eq!(s.phi, 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(s.eff_blocks, 1.0, epsilon = 0.0);
    }

    #[test]
    fn cdd_weight_values() {
        let zero = CddConfig::new(vec![0, 0, 0]).unwrap();
        for dn in 0..16 {
            assert_abs_diff_eq!(cdd_weight(&zero, dn, 64), 1.0, epsilon = 1e-15);
        }
        let two = CddConfig::new(vec![0, 4]).unwrap();
        // Δn = N/(2D) = 8
        assert!(cdd_weight(&two, 8, 64) < 1e-30);
        assert_abs_diff_eq!(cdd_weight(&two, 0, 64), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn cdd_flat_two_point_weight() {
        let flat = PowerDelayProfile::single_tap();
        let cdd = CddConfig::new(vec![0, 1]).unwrap();
        for dn in 0..64 {
            let v = rho_sc_cdd(&[flat.clone(), flat.clone()], &cdd, dn, 64).unwrap();
            let expect = (PI * dn as f64 / 64.0).cos().powi(2);
            assert_abs_diff_eq!(v, expect, epsilon = 1e-14);
        }
    }

    #[test]
    fn cdd_rejects_mismatched_profiles() {
        let cdd = CddConfig::new(vec![0, 1]).unwrap();
        let a = PowerDelayProfile::uniform(2).unwrap();
        let b = PowerDelayProfile::uniform(3).unwrap();
        assert!(matches!(
            rho_sc_cdd(&[a.clone(), b], &cdd, 3, 64),
            Err(Error::UnsupportedConfiguration(_))
        ));
        assert!(matches!(rho_sc_cdd(&[a], &cdd, 3, 64), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn cdd_effective_paths_uniform() {
        for l in [1usize, 4, 9] {
            let pdp = PowerDelayProfile::uniform(l).unwrap();
            for d in 0..3 * l {
                let expect = if d < l {
                    2.0 * (l * l) as f64 / (2 * l - d) as f64
                } else {
                    2.0 * l as f64
                };
                assert_abs_diff_eq!(effective_paths_cdd(&pdp, d, 2).unwrap(), expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rms_delay_cases() {
        let s = rms_delay(&PowerDelayProfile::single_tap());
        assert_eq!((s.mu, s.tau_rms, s.tau_max), (0.0, 0.0, 1));
        let s = rms_delay(&two_tap(0.5));
        assert_abs_diff_eq!(s.mu, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.tau_rms, 0.5, epsilon = 1e-15);
        for l in [2usize, 5, 64] {
            let s = rms_delay(&PowerDelayProfile::uniform(l).unwrap());
            let expect = (((l * l) as f64 - 1.0) / 12.0).sqrt();
            assert_abs_diff_eq!(s.tau_rms, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn tau_max_cases() {
        assert_eq!(tau_max(0.0, 0.9).unwrap(), 1);
        assert_eq!(tau_max(1.0, 0.9).unwrap(), 8);
        assert_eq!(tau_max(0.5, 0.75).unwrap(), 3);
        assert!(tau_max(1.0, 1.0).is_err());
        assert!(tau_max(1.0, 0.0).is_err());
    }

    #[test]
    fn cdd_rms_cases() {
        let s = rms_delay(&make_exponential_pdp(3.0, 20).unwrap());
        assert_abs_diff_eq!(cdd_rms_delay(&[s], &CddConfig::siso()).unwrap(), s.tau_rms, epsilon = 1e-14);
        let zero = CddConfig::new(vec![0, 0]).unwrap();
        assert_abs_diff_eq!(cdd_rms_delay(&[s, s], &zero).unwrap(), s.tau_rms, epsilon = 1e-12);
        let flat = rms_delay(&PowerDelayProfile::single_tap());
        for d in [1usize, 4, 11] {
            let cdd = CddConfig::new(vec![0, d]).unwrap();
            assert_abs_diff_eq!(cdd_rms_delay(&[flat, flat], &cdd).unwrap(), d as f64 / 2.0, epsilon = 1e-12);
        }
        assert!(cdd_rms_delay(&[flat], &CddConfig::new(vec![0, 1]).unwrap()).is_err());
    }

    #[test]
    fn linear_route_matches_general() {
        let stats: Vec<_> = [0.7, 2.0, 5.0]
            .iter()
            .map(|&t| rms_delay(&make_exponential_pdp(t, 40).unwrap()))
            .collect();
        let lin = LinearDelaySpread::new(&stats).unwrap();
        for d in 0..20 {
            let cdd = CddConfig::linear(3, d).unwrap();
            assert_abs_diff_eq!(lin.tau_rms(d as f64), cdd_rms_delay(&stats, &cdd).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn coherence_bandwidth() {
        assert!(coherence_bandwidth_cdd(0.0, 0.1).is_infinite());
        assert_abs_diff_eq!(coherence_bandwidth_cdd(10.0, 1.0 / 50.0), 5.0, epsilon = 1e-12);
        let k = default_k_c(1024);
        assert_abs_diff_eq!(
            coherence_bandwidth_cdd(3.0, k) / coherence_bandwidth_cdd(6.0, k),
            2.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(coherence_bandwidth_cdd(1.0, k), 1024.0 / (2.0 * PI), epsilon = 1e-9);
    }
}
