//! Multipath Rayleigh channel synthesis and cyclic delay diversity.
//!
//! Taps are spaced one sample (`T / N_sc`) apart, so every delay in this
//! module is an integer sample count. Subcarriers are indexed `0..N_sc`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng;

/// Tolerance on `Σ α_m² = 1`.
pub const POWER_TOLERANCE: f64 = 1e-12;

/// Fraction of the untruncated exponential profile power kept when choosing
/// the tap count of [`make_exponential_pdp`].
pub const EXPONENTIAL_POWER_CAPTURE: f64 = 0.9999;

/// Normalised per-path average amplitudes `α_m`, `Σ α_m² = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PowerDelayProfile {
    gains: Vec<f64>,
}

impl PowerDelayProfile {
    /// Accepts amplitudes that already have unit total power.
    pub fn new(gains: Vec<f64>) -> Result<Self> {
        validate_gains(&gains)?;
        let power: f64 = gains.iter().map(|a| a * a).sum();
        if (power - 1.0).abs() > POWER_TOLERANCE {
            return Err(invalid(format!(
                "power delay profile must have unit power, got {power}"
            )));
        }
        Ok(Self { gains })
    }

    /// Rescales arbitrary nonnegative amplitudes to unit power.
    pub fn normalized(gains: Vec<f64>) -> Result<Self> {
        validate_gains(&gains)?;
        let power: f64 = gains.iter().map(|a| a * a).sum();
        if power <= 0.0 {
            return Err(invalid("power delay profile has zero power"));
        }
        let scale = power.sqrt().recip();
        Ok(Self {
            gains: gains.into_iter().map(|a| a * scale).collect(),
        })
    }

    /// Same as [`normalized`](Self::normalized) but from per-tap powers.
    pub fn from_powers(powers: &[f64]) -> Result<Self> {
        if powers.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid("tap powers must be finite and nonnegative"));
        }
        Self::normalized(powers.iter().map(|p| p.sqrt()).collect())
    }

    pub fn single_tap() -> Self {
        Self { gains: vec![1.0] }
    }

    pub fn uniform(taps: usize) -> Result<Self> {
        if taps == 0 {
            return Err(invalid("uniform profile needs at least one tap"));
        }
        Self::normalized(vec![1.0; taps])
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn powers(&self) -> Vec<f64> {
        self.gains.iter().map(|a| a * a).collect()
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    /// `1 / Σ α_m⁴`.
    pub fn effective_paths(&self) -> f64 {
        let s: f64 = self.gains.iter().map(|a| a.powi(4)).sum();
        s.recip()
    }
}

impl TryFrom<Vec<f64>> for PowerDelayProfile {
    type Error = crate::Error;

    fn try_from(gains: Vec<f64>) -> Result<Self> {
        Self::normalized(gains)
    }
}

impl From<PowerDelayProfile> for Vec<f64> {
    fn from(p: PowerDelayProfile) -> Self {
        p.gains
    }
}

fn validate_gains(gains: &[f64]) -> Result<()> {
    if gains.is_empty() {
        return Err(invalid("power delay profile needs at least one tap"));
    }
    if let Some(bad) = gains.iter().find(|a| !a.is_finite() || **a < 0.0) {
        return Err(invalid(format!(
            "path gains must be finite and nonnegative, got {bad}"
        )));
    }
    Ok(())
}

/// OFDM grid: `n_sc = n_rb × block_size` subcarriers and the SNR scale
/// `P / σ_w²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfdmConfig {
    pub n_sc: usize,
    pub block_size: usize,
    pub n_rb: usize,
    pub snr_scale: f64,
}

impl OfdmConfig {
    pub fn new(n_sc: usize, block_size: usize, snr_scale: f64) -> Result<Self> {
        if n_sc == 0 || !n_sc.is_power_of_two() {
            return Err(invalid(format!("n_sc must be a power of two, got {n_sc}")));
        }
        if block_size == 0 || n_sc % block_size != 0 {
            return Err(invalid(format!(
                "block size {block_size} does not divide n_sc {n_sc}"
            )));
        }
        if !(snr_scale > 0.0 && snr_scale.is_finite()) {
            return Err(invalid(format!("snr_scale must be positive, got {snr_scale}")));
        }
        Ok(Self {
            n_sc,
            block_size,
            n_rb: n_sc / block_size,
            snr_scale,
        })
    }

    pub fn with_block_size(&self, block_size: usize) -> Result<Self> {
        Self::new(self.n_sc, block_size, self.snr_scale)
    }
}

/// One draw of per-path complex gains `α_m h_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub taps: Vec<Complex64>,
    /// Seed the draw came from, when known.
    pub rng_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyResponse {
    pub values: Vec<Complex64>,
}

/// Cyclic delays of the transmit antennas. `delays[0]` is always zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CddConfig {
    delays: Vec<usize>,
}

impl CddConfig {
    pub fn new(delays: Vec<usize>) -> Result<Self> {
        match delays.first() {
            None => Err(invalid("CDD needs at least one antenna")),
            Some(&d) if d != 0 => Err(invalid("the first antenna's cyclic delay must be 0")),
            _ => Ok(Self { delays }),
        }
    }

    /// Linear pattern `D_i = (i - 1) · delay`.
    pub fn linear(n_tx: usize, delay: usize) -> Result<Self> {
        if n_tx == 0 {
            return Err(invalid("n_tx must be at least 1"));
        }
        Self::new((0..n_tx).map(|i| i * delay).collect())
    }

    pub fn siso() -> Self {
        Self { delays: vec![0] }
    }

    pub fn n_tx(&self) -> usize {
        self.delays.len()
    }

    pub fn delays(&self) -> &[usize] {
        &self.delays
    }

    pub fn validate_for(&self, n_sc: usize) -> Result<()> {
        match self.delays.iter().find(|&&d| d >= n_sc) {
            Some(d) => Err(invalid(format!(
                "cyclic delay {d} outside [0, {}]",
                n_sc - 1
            ))),
            None => Ok(()),
        }
    }
}

/// `α_m ∝ exp(-m / τ_o)`, truncated to
/// `min(max_taps, smallest L keeping EXPONENTIAL_POWER_CAPTURE of the power)`.
pub fn make_exponential_pdp(tau_o: f64, max_taps: usize) -> Result<PowerDelayProfile> {
    if !(tau_o > 0.0) || !tau_o.is_finite() {
        return Err(invalid(format!("tau_o must be positive, got {tau_o}")));
    }
    if max_taps == 0 {
        return Err(invalid("max_taps must be at least 1"));
    }
    // Tap powers form a geometric series with ratio exp(-2/τ_o).
    let needed = ((1.0 - EXPONENTIAL_POWER_CAPTURE).ln() / (-2.0 / tau_o)).ceil();
    let taps = if needed.is_finite() && needed >= 1.0 {
        (needed as usize).min(max_taps)
    } else {
        1
    };
    // exp(-(m-1)/τ) instead of exp(-m/τ): same after normalisation, no underflow.
    let gains = (0..taps).map(|m| (-(m as f64) / tau_o).exp()).collect();
    PowerDelayProfile::normalized(gains)
}

/// Exponential profile whose effective path count `1/Σα⁴` equals `target`,
/// found by bisection on `log τ_o`.
pub fn exponential_pdp_for_eff_paths(target: f64, max_taps: usize) -> Result<PowerDelayProfile> {
    if max_taps == 0 {
        return Err(invalid("max_taps must be at least 1"));
    }
    if !(target >= 1.0) || target > max_taps as f64 {
        return Err(invalid(format!(
            "effective path target {target} outside [1, {max_taps}]"
        )));
    }
    if target - 1.0 < 1e-12 {
        return Ok(PowerDelayProfile::single_tap());
    }
    if max_taps as f64 - target < 1e-9 {
        return PowerDelayProfile::uniform(max_taps);
    }
    let eff = |log_tau: f64| -> Result<f64> {
        Ok(make_exponential_pdp(log_tau.exp(), max_taps)?.effective_paths())
    };
    let (mut lo, mut hi) = (1e-3_f64.ln(), 1e9_f64.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eff(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    make_exponential_pdp((0.5 * (lo + hi)).exp(), max_taps)
}

/// Draws `α_m h_m` with `h_m` i.i.d. CN(0, 1).
pub fn sample_channel<R: Rng + ?Sized>(pdp: &PowerDelayProfile, rng: &mut R) -> ChannelRealization {
    let taps = pdp
        .gains()
        .iter()
        .map(|&a| rng::complex_gaussian(rng) * a)
        .collect();
    ChannelRealization {
        taps,
        rng_seed: None,
    }
}

pub fn sample_channel_from_seed(pdp: &PowerDelayProfile, seed: u64) -> ChannelRealization {
    let mut rng = rng::seeded(seed);
    ChannelRealization {
        rng_seed: Some(seed),
        ..sample_channel(pdp, &mut rng)
    }
}

/// Reusable zero-padded DFT of tap vectors.
#[derive(Clone)]
pub struct FrequencyTransform {
    n_sc: usize,
    fft: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for FrequencyTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FrequencyTransform")
            .field("n_sc", &self.n_sc)
            .finish()
    }
}

impl FrequencyTransform {
    pub fn new(n_sc: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(n_sc);
        let scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        Self { n_sc, fft, scratch }
    }

    pub fn n_sc(&self) -> usize {
        self.n_sc
    }

    /// Writes `Σ_m taps_m e^{-j2π m n / N_sc}` for every `n` into `out`.
    pub fn response_into(&mut self, taps: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        if taps.len() > self.n_sc {
            return Err(invalid(format!(
                "{} taps exceed {} subcarriers",
                taps.len(),
                self.n_sc
            )));
        }
        if out.len() != self.n_sc {
            return Err(invalid("output buffer length must equal n_sc"));
        }
        out[..taps.len()].copy_from_slice(taps);
        out[taps.len()..].fill(Complex64::default());
        self.fft.process_with_scratch(out, &mut self.scratch);
        Ok(())
    }

    /// Real-input convenience used by the correlation tables.
    pub fn transform_real(&mut self, values: &[f64]) -> Result<Vec<Complex64>> {
        let taps: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut out = vec![Complex64::default(); self.n_sc];
        self.response_into(&taps, &mut out)?;
        Ok(out)
    }
}

/// `H_n = Σ_m taps_m e^{-j2π m n / N_sc}` via FFT.
pub fn freq_response(ch: &ChannelRealization, cfg: &OfdmConfig) -> Result<FrequencyResponse> {
    let mut out = vec![Complex64::default(); cfg.n_sc];
    FrequencyTransform::new(cfg.n_sc).response_into(&ch.taps, &mut out)?;
    Ok(FrequencyResponse { values: out })
}

/// Direct O(L·N_sc) evaluation of the same sum as [`freq_response`].
pub fn freq_response_direct(ch: &ChannelRealization, cfg: &OfdmConfig) -> Result<FrequencyResponse> {
    let n_sc = cfg.n_sc;
    if ch.taps.len() > n_sc {
        return Err(invalid(format!(
            "{} taps exceed {} subcarriers",
            ch.taps.len(),
            n_sc
        )));
    }
    let values = (0..n_sc)
        .map(|n| {
            ch.taps
                .iter()
                .enumerate()
                .map(|(m, &t)| {
                    let k = (m * n) % n_sc;
                    t * Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n_sc as f64)
                })
                .sum()
        })
        .collect();
    Ok(FrequencyResponse { values })
}

/// `γ_n = snr_scale · |H_n|²`.
pub fn snr_grid(fr: &FrequencyResponse, cfg: &OfdmConfig) -> Vec<f64> {
    fr.values
        .iter()
        .map(|h| cfg.snr_scale * h.norm_sqr())
        .collect()
}

/// Equivalent single-antenna profile of a CDD transmitter: tap power at
/// delay `d` is `(1/N_Tx) Σ_i α²_{i,(d - D_i) mod N_sc}`.
pub fn cdd_compose_pdp(
    pdps: &[PowerDelayProfile],
    cdd: &CddConfig,
    cfg: &OfdmConfig,
) -> Result<PowerDelayProfile> {
    if pdps.len() != cdd.n_tx() {
        return Err(invalid(format!(
            "{} antenna profiles for {} antennas",
            pdps.len(),
            cdd.n_tx()
        )));
    }
    cdd.validate_for(cfg.n_sc)?;
    if let Some(p) = pdps.iter().find(|p| p.len() > cfg.n_sc) {
        return Err(invalid(format!(
            "profile with {} taps exceeds {} subcarriers",
            p.len(),
            cfg.n_sc
        )));
    }
    let span = pdps
        .iter()
        .zip(cdd.delays())
        .map(|(p, &d)| d + p.len())
        .max()
        .unwrap_or(1)
        .min(cfg.n_sc);
    let mut powers = vec![0.0; span];
    let weight = (cdd.n_tx() as f64).recip();
    for (pdp, &delay) in pdps.iter().zip(cdd.delays()) {
        for (m, &a) in pdp.gains().iter().enumerate() {
            powers[(m + delay) % cfg.n_sc] += weight * a * a;
        }
    }
    PowerDelayProfile::from_powers(&powers)
}

/// `H^cdd_n = (1/√N_Tx) Σ_i H_{i,n} e^{-j2π D_i n / N_sc}`.
pub fn cdd_freq_response(
    frs: &[FrequencyResponse],
    cdd: &CddConfig,
    cfg: &OfdmConfig,
) -> Result<FrequencyResponse> {
    if frs.len() != cdd.n_tx() {
        return Err(invalid(format!(
            "{} antenna responses for {} antennas",
            frs.len(),
            cdd.n_tx()
        )));
    }
    cdd.validate_for(cfg.n_sc)?;
    if frs.iter().any(|f| f.values.len() != cfg.n_sc) {
        return Err(invalid("antenna response length must equal n_sc"));
    }
    let mut values = vec![Complex64::default(); cfg.n_sc];
    CddCombiner::new(cdd, cfg.n_sc).combine(frs.iter().map(|f| f.values.as_slice()), &mut values);
    Ok(FrequencyResponse { values })
}

/// Precomputed phase ramps `e^{-j2π D_i n / N_sc} / √N_Tx`.
#[derive(Debug, Clone)]
pub struct CddCombiner {
    ramps: Vec<Vec<Complex64>>,
}

impl CddCombiner {
    pub fn new(cdd: &CddConfig, n_sc: usize) -> Self {
        let scale = (cdd.n_tx() as f64).sqrt().recip();
        let ramps = cdd
            .delays()
            .iter()
            .map(|&d| {
                (0..n_sc)
                    .map(|n| {
                        let k = (d * n) % n_sc;
                        Complex64::from_polar(scale, -2.0 * PI * k as f64 / n_sc as f64)
                    })
                    .collect()
            })
            .collect();
        Self { ramps }
    }

    pub fn combine<'a>(
        &self,
        antennas: impl IntoIterator<Item = &'a [Complex64]>,
        out: &mut [Complex64],
    ) {
        out.fill(Complex64::default());
        for (h, ramp) in antennas.into_iter().zip(&self.ramps) {
            for ((o, &x), &w) in out.iter_mut().zip(h).zip(ramp) {
                *o += x * w;
            }
        }
    }
}
