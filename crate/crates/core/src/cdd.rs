//! Per-user cyclic delay selection.
//!
//! Two families of methods choose the delay `D` of the linear pattern
//! `D_i = (i - 1)·D`:
//!
//! * exhaustive search of an analytic `E[max_b C_b]` approximation over `D`
//!   ([`search_delay`]), and
//! * a closed form that takes the largest delay keeping the CDD coherence
//!   bandwidth above the block size, capped by the Chebyshev maximum delay
//!   spread ([`closed_form_delay`]).

use serde::{Deserialize, Serialize};

use crate::channel::{cdd_compose_pdp, CddConfig, OfdmConfig, PowerDelayProfile};
use crate::error::{invalid, Result};
use crate::selectivity::{default_k_c, rms_delay, tau_max, CorrelationTable, DelaySpreadStats, LinearDelaySpread};
use crate::throughput::{gaussian_gain_term, mean_cb, os_gain_factor, v1};

/// Consecutive post-peak delays over which both the effective block count
/// and the intra-block sum must fall before the search stops.
pub const STOP_RUN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Order-statistics approximation.
    Os,
    /// Gaussian approximation.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayMethod {
    OsSearch,
    GaussianSearch,
    RmsClosedForm,
}

impl From<Objective> for DelayMethod {
    fn from(o: Objective) -> Self {
        match o {
            Objective::Os => DelayMethod::OsSearch,
            Objective::Gaussian => DelayMethod::GaussianSearch,
        }
    }
}

/// One delay on the search surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub delay: usize,
    /// Approximate `E[max_b C_b]` in bits/s/Hz.
    pub objective: f64,
    pub eff_paths: f64,
    pub eff_blocks: f64,
    pub s_sc_intra: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayDecision {
    pub d_star: usize,
    pub method: DelayMethod,
    pub block_size: usize,
    pub n_tx: usize,
    pub objective_curve: Option<Vec<CurvePoint>>,
    /// Largest delay meeting the coherence-bandwidth constraint.
    pub d_bc: Option<usize>,
    /// Chebyshev maximum delay constraint.
    pub d_max: Option<usize>,
    pub kappa: Option<f64>,
    pub k_c: Option<f64>,
    /// Inclusive delay range that was searched.
    pub search_range: Option<(usize, usize)>,
}

fn max_linear_delay(n_tx: usize, n_sc: usize) -> usize {
    if n_tx <= 1 {
        0
    } else {
        (n_sc - 1) / (n_tx - 1)
    }
}

fn evaluate(
    pdps: &[PowerDelayProfile],
    cfg: &OfdmConfig,
    delay: usize,
    objective: Objective,
    e1: f64,
    v1: f64,
) -> Result<CurvePoint> {
    let cdd = CddConfig::linear(pdps.len(), delay)?;
    let composed = cdd_compose_pdp(pdps, &cdd, cfg)?;
    let table = CorrelationTable::new(&composed, cfg.n_sc)?;
    let s = table.sum_sc(1, 0, cfg.block_size)?;
    let phi = table.inter_block_sum(cfg.block_size)?;
    let gain = match objective {
        Objective::Os => os_gain_factor(phi) * (v1 * s).sqrt(),
        Objective::Gaussian => gaussian_gain_term(s, phi) * (2.0 * v1).sqrt(),
    };
    Ok(CurvePoint {
        delay,
        objective: e1 + gain,
        eff_paths: table.effective_paths(),
        eff_blocks: phi.recip(),
        s_sc_intra: s,
    })
}

/// Objective curve over `D = 0, 1, …, D_stop` for (possibly different)
/// per-antenna profiles. `D_stop` is the first delay at which the effective
/// block count and the intra-block sum have both fallen for
/// [`STOP_RUN`] consecutive delays, or the largest admissible delay.
pub fn delay_objective_curve_profiles(
    pdps: &[PowerDelayProfile],
    cfg: &OfdmConfig,
    objective: Objective,
) -> Result<Vec<CurvePoint>> {
    let n_tx = pdps.len();
    if n_tx == 0 {
        return Err(invalid("n_tx must be at least 1"));
    }
    let e1 = mean_cb(cfg.snr_scale)?;
    let v1 = v1(cfg.snr_scale);
    let limit = max_linear_delay(n_tx, cfg.n_sc);
    let mut curve: Vec<CurvePoint> = Vec::new();
    let mut falling = 0;
    for delay in 0..=limit {
        let point = evaluate(pdps, cfg, delay, objective, e1, v1)?;
        if let Some(prev) = curve.last() {
            if point.eff_blocks < prev.eff_blocks && point.s_sc_intra < prev.s_sc_intra {
                falling += 1;
            } else {
                falling = 0;
            }
        }
        curve.push(point);
        if falling >= STOP_RUN {
            break;
        }
    }
    Ok(curve)
}

/// Objective curve for identical per-antenna profiles.
pub fn delay_objective_curve(
    pdp: &PowerDelayProfile,
    cfg: &OfdmConfig,
    n_tx: usize,
    objective: Objective,
) -> Result<Vec<CurvePoint>> {
    if n_tx == 0 {
        return Err(invalid("n_tx must be at least 1"));
    }
    delay_objective_curve_profiles(&vec![pdp.clone(); n_tx], cfg, objective)
}

/// Argmax of the curve; ties go to the smaller delay.
fn argmax(curve: &[CurvePoint]) -> usize {
    let mut best = &curve[0];
    for p in &curve[1..] {
        if p.objective > best.objective {
            best = p;
        }
    }
    best.delay
}

pub fn search_delay_profiles(
    pdps: &[PowerDelayProfile],
    cfg: &OfdmConfig,
    objective: Objective,
) -> Result<DelayDecision> {
    let curve = delay_objective_curve_profiles(pdps, cfg, objective)?;
    let last = curve.last().map(|p| p.delay).unwrap_or(0);
    Ok(DelayDecision {
        d_star: argmax(&curve),
        method: objective.into(),
        block_size: cfg.block_size,
        n_tx: pdps.len(),
        objective_curve: Some(curve),
        d_bc: None,
        d_max: None,
        kappa: None,
        k_c: None,
        search_range: Some((0, last)),
    })
}

/// Exhaustive search of the chosen approximation over the linear delay.
pub fn search_delay(
    pdp: &PowerDelayProfile,
    cfg: &OfdmConfig,
    n_tx: usize,
    objective: Objective,
) -> Result<DelayDecision> {
    if n_tx == 0 {
        return Err(invalid("n_tx must be at least 1"));
    }
    search_delay_profiles(&vec![pdp.clone(); n_tx], cfg, objective)
}

/// Closed-form delay `min(D_Bc, D_max)` from per-antenna delay statistics.
///
/// `D_Bc = ⌊√((1/(k_c²S²) − τ̄² + (b² − 4ac)/(4a))₊ / a) − b/(2a)⌋`, clamped at
/// zero, and `D_max = min_{i < N_Tx} (⌈2τ_i/√(1−κ)⌉ + 1)`.
pub fn closed_form_delay(
    stats: &[DelaySpreadStats],
    block_size: usize,
    k_c: f64,
    kappa: f64,
    n_tx: usize,
) -> Result<DelayDecision> {
    if n_tx == 0 || stats.len() != n_tx {
        return Err(invalid(format!(
            "{} antenna statistics for {n_tx} antennas",
            stats.len()
        )));
    }
    if !(k_c > 0.0) {
        return Err(invalid(format!("k_c must be positive, got {k_c}")));
    }
    if block_size == 0 {
        return Err(invalid("block size must be positive"));
    }
    // Validates κ even when there is a single antenna.
    tau_max(0.0, kappa)?;
    let (d_bc, d_max) = if n_tx == 1 {
        (0, 0)
    } else {
        let lin = LinearDelaySpread::new(stats)?;
        let target = (k_c * block_size as f64).powi(2).recip();
        let radicand =
            (target - lin.tau_bar_sq + (lin.b * lin.b - 4.0 * lin.a * lin.c) / (4.0 * lin.a)).max(0.0);
        let d_bc = ((radicand / lin.a).sqrt() - lin.b / (2.0 * lin.a)).max(0.0);
        // Round-off guard for exact integer roots.
        let d_bc = (d_bc + 1e-9).floor() as usize;
        let d_max = stats[..n_tx - 1]
            .iter()
            .map(|s| tau_max(s.tau_rms, kappa))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .min()
            .unwrap_or(0);
        (d_bc, d_max)
    };
    Ok(DelayDecision {
        d_star: d_bc.min(d_max),
        method: DelayMethod::RmsClosedForm,
        block_size,
        n_tx,
        objective_curve: None,
        d_bc: Some(d_bc),
        d_max: Some(d_max),
        kappa: Some(kappa),
        k_c: Some(k_c),
        search_range: None,
    })
}

/// [`closed_form_delay`] for identical per-antenna profiles.
pub fn closed_form_delay_for_pdp(
    pdp: &PowerDelayProfile,
    block_size: usize,
    k_c: f64,
    kappa: f64,
    n_tx: usize,
) -> Result<DelayDecision> {
    let stats = vec![rms_delay(pdp); n_tx];
    closed_form_delay(&stats, block_size, k_c, kappa, n_tx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KcCalibration {
    pub k_c: f64,
    /// `Σ |D_closed_form − D_gaussian|` over the reference channels.
    pub total_mismatch: usize,
    /// `(gaussian-search D*, closed-form D*)` per reference channel.
    pub delays: Vec<(usize, usize)>,
}

/// Picks the candidate `k_c` whose closed-form delays best match the
/// Gaussian-search delays on `reference`. Ties go to the candidate closest
/// (in log scale) to [`default_k_c`].
pub fn calibrate_k_c(
    reference: &[PowerDelayProfile],
    cfg: &OfdmConfig,
    n_tx: usize,
    kappa: f64,
    candidates: &[f64],
) -> Result<KcCalibration> {
    if reference.is_empty() || candidates.is_empty() {
        return Err(invalid("calibration needs reference channels and candidates"));
    }
    let targets = reference
        .iter()
        .map(|p| Ok(search_delay(p, cfg, n_tx, Objective::Gaussian)?.d_star))
        .collect::<Result<Vec<_>>>()?;
    let anchor = default_k_c(cfg.n_sc).ln();
    let mut best: Option<(usize, f64, KcCalibration)> = None;
    for &k_c in candidates {
        let delays = reference
            .iter()
            .zip(&targets)
            .map(|(p, &t)| Ok((t, closed_form_delay_for_pdp(p, cfg.block_size, k_c, kappa, n_tx)?.d_star)))
            .collect::<Result<Vec<_>>>()?;
        let mismatch = delays.iter().map(|&(a, b)| a.abs_diff(b)).sum();
        let distance = (k_c.ln() - anchor).abs();
        let better = match &best {
            None => true,
            Some((m, d, _)) => mismatch < *m || (mismatch == *m && distance < *d),
        };
        if better {
            best = Some((
                mismatch,
                distance,
                KcCalibration {
                    k_c,
                    total_mismatch: mismatch,
                    delays,
                },
            ));
        }
    }
    Ok(best.expect("candidates is nonempty").2)
}

/// Log-spaced candidate grid around the default constant.
pub fn k_c_candidates(n_sc: usize, points: usize) -> Vec<f64> {
    let base = default_k_c(n_sc);
    (0..points)
        .map(|i| {
            let t = if points > 1 { i as f64 / (points - 1) as f64 } else { 0.5 };
            base * 4f64.powf(2.0 * t - 1.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{exponential_pdp_for_eff_paths, make_exponential_pdp};
    use crate::selectivity::DEFAULT_KAPPA;

    fn cfg(block: usize) -> OfdmConfig {
        OfdmConfig::new(1024, block, 100.0).unwrap()
    }

    #[test]
    fn flat_channel_gains_from_first_delay() {
        let flat = PowerDelayProfile::single_tap();
        for obj in [Objective::Os, Objective::Gaussian] {
            let curve = delay_objective_curve(&flat, &cfg(32), 2, obj).unwrap();
            assert!(curve[1].objective > curve[0].objective);
            let d = search_delay(&flat, &cfg(32), 2, obj).unwrap();
            assert_eq!(d.d_star, 1);
            assert_eq!(curve.len(), d.search_range.unwrap().1 + 1);
        }
    }

    #[test]
    fn strongly_selective_channel_gains_little() {
        let pdp = PowerDelayProfile::uniform(64).unwrap();
        for obj in [Objective::Os, Objective::Gaussian] {
            let curve = delay_objective_curve(&pdp, &cfg(32), 2, obj).unwrap();
            let best = curve.iter().map(|p| p.objective).fold(f64::MIN, f64::max);
            assert!(best / curve[0].objective - 1.0 < 0.01);
        }
    }

    #[test]
    fn curve_is_pure() {
        let pdp = make_exponential_pdp(1.4, 64).unwrap();
        let a = delay_objective_curve(&pdp, &cfg(32), 2, Objective::Gaussian).unwrap();
        let b = delay_objective_curve(&pdp, &cfg(32), 2, Objective::Gaussian).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_antenna_only_zero_delay() {
        let pdp = make_exponential_pdp(1.4, 64).unwrap();
        let d = search_delay(&pdp, &cfg(32), 1, Objective::Gaussian).unwrap();
        assert_eq!(d.d_star, 0);
        assert_eq!(d.search_range, Some((0, 0)));
        assert!(search_delay(&pdp, &cfg(32), 0, Objective::Gaussian).is_err());
    }

    #[test]
    fn closed_form_identical_antennas_reduction() {
        let n_tx = 3;
        let k_c = default_k_c(1024);
        for tau in [0.3, 1.0, 2.5, 4.0] {
            let pdp = make_exponential_pdp(tau, 64).unwrap();
            let s = rms_delay(&pdp);
            let d = closed_form_delay_for_pdp(&pdp, 16, k_c, DEFAULT_KAPPA, n_tx).unwrap();
            let inner = (12.0 / ((n_tx * n_tx) as f64 - 1.0)
                * ((k_c * 16.0).powi(2).recip() - s.tau_rms.powi(2)).max(0.0))
            .sqrt();
            let dmax = tau_max(s.tau_rms, DEFAULT_KAPPA).unwrap();
            assert_eq!(d.d_bc.unwrap(), inner.floor() as usize);
            assert_eq!(d.d_max.unwrap(), dmax);
            assert_eq!(d.d_star, (inner.floor() as usize).min(dmax));
        }
    }

    #[test]
    fn closed_form_flat_and_wide() {
        let k_c = default_k_c(1024);
        let flat = closed_form_delay_for_pdp(&PowerDelayProfile::single_tap(), 32, k_c, 0.9, 2).unwrap();
        assert_eq!(flat.d_max, Some(1));
        assert_eq!(flat.d_star, 1);
        let wide = exponential_pdp_for_eff_paths(64.0, 64).unwrap();
        let d = closed_form_delay_for_pdp(&wide, 32, k_c, 0.9, 2).unwrap();
        assert_eq!(d.d_bc, Some(0));
        assert_eq!(d.d_star, 0);
    }

    #[test]
    fn closed_form_rejects_bad_input() {
        let s = rms_delay(&PowerDelayProfile::single_tap());
        assert!(closed_form_delay(&[s], 32, 0.1, 0.9, 2).is_err());
        assert!(closed_form_delay(&[s, s], 32, 0.0, 0.9, 2).is_err());
        assert!(closed_form_delay(&[s, s], 32, 0.1, 1.0, 2).is_err());
    }

    #[test]
    fn calibration_prefers_matching_constant() {
        let c = cfg(32);
        let refs: Vec<_> = [1.2, 1.6246, 2.5]
            .iter()
            .map(|&e| exponential_pdp_for_eff_paths(e, 64).unwrap())
            .collect();
        let cands = k_c_candidates(1024, 9);
        let cal = calibrate_k_c(&refs, &c, 2, 0.9, &cands).unwrap();
        for &k in &cands {
            let mismatch: usize = refs
                .iter()
                .zip(&cal.delays)
                .map(|(p, &(t, _))| t.abs_diff(closed_form_delay_for_pdp(p, 32, k, 0.9, 2).unwrap().d_star))
                .sum();
            assert!(mismatch >= cal.total_mismatch);
        }
    }
}
