//! Monte Carlo proportional-fair scheduling with best-N block feedback.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{CddConfig, FrequencyTransform, OfdmConfig, PowerDelayProfile};
use crate::error::{invalid, Result};
use crate::rng;
use crate::stats::{Accumulator, Estimate};
use crate::throughput::mean_cb;

pub const DEFAULT_T_C: f64 = 100.0;
pub const DEFAULT_N_FB: usize = 1;

/// `C_b = (1/S) Σ_{n in block b} log2(1 + γ_n)`.
pub fn block_throughputs(snrs: &[f64], cfg: &OfdmConfig) -> Result<Vec<f64>> {
    if snrs.len() != cfg.n_sc {
        return Err(invalid(format!(
            "SNR grid has {} entries, expected {}",
            snrs.len(),
            cfg.n_sc
        )));
    }
    let mut out = vec![0.0; cfg.n_rb];
    block_throughputs_into(snrs, cfg.block_size, &mut out);
    Ok(out)
}

fn block_throughputs_into(snrs: &[f64], block_size: usize, out: &mut [f64]) {
    let scale = (block_size as f64).recip();
    for (c, chunk) in out.iter_mut().zip(snrs.chunks_exact(block_size)) {
        *c = chunk.iter().map(|g| g.ln_1p()).sum::<f64>() * scale * std::f64::consts::LOG2_E;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackReport {
    pub user_id: usize,
    /// `(block, C_b)`, best first; equal values keep the lower block first.
    pub entries: Vec<(usize, f64)>,
}

/// Best `n_fb` blocks of one user.
pub fn feedback_report(user_id: usize, c: &[f64], n_fb: usize) -> Result<FeedbackReport> {
    if n_fb == 0 || c.is_empty() {
        return Err(invalid("feedback needs at least one block and n_fb >= 1"));
    }
    let mut idx: Vec<usize> = (0..c.len()).collect();
    idx.sort_by(|&a, &b| c[b].total_cmp(&c[a]).then(a.cmp(&b)));
    idx.truncate(n_fb);
    Ok(FeedbackReport {
        user_id,
        entries: idx.into_iter().map(|b| (b, c[b])).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutagePolicy {
    /// Unreported blocks stay idle and are left out of the sum rate.
    #[default]
    Skip,
    /// Unreported blocks go to the next user in rotation at its true rate.
    RoundRobin,
}

impl std::str::FromStr for OutagePolicy {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "skip" => Ok(Self::Skip),
            "round_robin" => Ok(Self::RoundRobin),
            _ => Err(invalid(format!("unknown outage policy '{s}' (skip | round_robin)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerState {
    /// EWMA average throughput per user.
    pub t_k: Vec<f64>,
    pub t_c: f64,
    /// Number of EWMA updates applied so far.
    pub time_index: u64,
    /// Next user in the round-robin rotation.
    pub rr_next: usize,
}

impl SchedulerState {
    pub fn new(k_users: usize, t_c: f64, initial: f64) -> Result<Self> {
        if k_users == 0 {
            return Err(invalid("at least one user is required"));
        }
        if !(t_c >= 1.0 && t_c.is_finite()) {
            return Err(invalid(format!("t_c must be >= 1, got {t_c}")));
        }
        if !(initial > 0.0 && initial.is_finite()) {
            return Err(invalid(format!("initial throughput must be positive, got {initial}")));
        }
        Ok(Self {
            t_k: vec![initial; k_users],
            t_c,
            time_index: 0,
            rr_next: 0,
        })
    }

    /// Warm-up initialization `T_k = mean_cb(snr) / K`.
    pub fn warm(k_users: usize, t_c: f64, snr_scale: f64) -> Result<Self> {
        Self::new(k_users, t_c, mean_cb(snr_scale)? / k_users.max(1) as f64)
    }

    /// `T_k ← (1 − 1/t_c) T_k + (1/t_c) C 1[k = winner]` for every user.
    pub fn update(&mut self, winner: Option<(usize, f64)>) {
        let beta = self.t_c.recip();
        for t in &mut self.t_k {
            *t *= 1.0 - beta;
        }
        if let Some((k, c)) = winner {
            self.t_k[k] += beta * c;
        }
        self.time_index += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotAssignment {
    /// `(user, C)` per block; `None` is a scheduling outage left idle.
    pub blocks: Vec<Option<(usize, f64)>>,
    pub sum_rate: f64,
    /// Blocks no user reported.
    pub n_outage: usize,
}

/// One slot of sequential PF assignment over `n_rb` blocks.
///
/// `csi` holds every user's full `C_b` vector and is required by
/// [`OutagePolicy::RoundRobin`].
pub fn pf_schedule_slot(
    reports: &[FeedbackReport],
    csi: Option<&[Vec<f64>]>,
    n_rb: usize,
    state: &mut SchedulerState,
    policy: OutagePolicy,
) -> Result<SlotAssignment> {
    if reports.is_empty() {
        return Err(invalid("no users to schedule"));
    }
    if reports.iter().any(|r| r.user_id >= state.t_k.len()) {
        return Err(invalid("report user id outside the scheduler state"));
    }
    if reports.iter().flat_map(|r| &r.entries).any(|&(b, _)| b >= n_rb) {
        return Err(invalid("reported block index outside the grid"));
    }
    if policy == OutagePolicy::RoundRobin {
        match csi {
            Some(c) if c.len() == state.t_k.len() && c.iter().all(|v| v.len() == n_rb) => {}
            _ => return Err(invalid("round-robin outage policy needs full CSI for every user")),
        }
    }

    let mut blocks: Vec<Option<(usize, f64)>> = vec![None; n_rb];
    loop {
        let mut best: Option<(f64, usize, usize, f64)> = None;
        for r in reports {
            let t = state.t_k[r.user_id];
            for &(b, c) in &r.entries {
                if blocks[b].is_some() {
                    continue;
                }
                let metric = c / t;
                let better = match best {
                    None => true,
                    Some((m, k, bb, _)) => metric > m || (metric == m && (r.user_id, b) < (k, bb)),
                };
                if better {
                    best = Some((metric, r.user_id, b, c));
                }
            }
        }
        let Some((_, k, b, c)) = best else { break };
        blocks[b] = Some((k, c));
        state.update(Some((k, c)));
    }

    let n_outage = blocks.iter().filter(|b| b.is_none()).count();
    if let (OutagePolicy::RoundRobin, Some(csi)) = (policy, csi) {
        let k_users = state.t_k.len();
        for b in 0..n_rb {
            if blocks[b].is_none() {
                let k = state.rr_next;
                state.rr_next = (k + 1) % k_users;
                let c = csi[k][b];
                blocks[b] = Some((k, c));
                state.update(Some((k, c)));
            }
        }
    }

    let (total, assigned) = blocks
        .iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), &(_, c)| (s + c, n + 1));
    let sum_rate = if assigned == 0 { 0.0 } else { total / assigned as f64 };
    Ok(SlotAssignment {
        blocks,
        sum_rate,
        n_outage,
    })
}

/// Channel seen by one user: per-antenna profiles and their cyclic delays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub antenna_pdps: Vec<PowerDelayProfile>,
    pub cdd: CddConfig,
}

impl ChannelSpec {
    pub fn siso(pdp: PowerDelayProfile) -> Self {
        Self {
            antenna_pdps: vec![pdp],
            cdd: CddConfig::siso(),
        }
    }

    pub fn cdd(antenna_pdps: Vec<PowerDelayProfile>, cdd: CddConfig) -> Result<Self> {
        if antenna_pdps.len() != cdd.n_tx() {
            return Err(invalid(format!(
                "{} antenna profiles for {} antennas",
                antenna_pdps.len(),
                cdd.n_tx()
            )));
        }
        Ok(Self { antenna_pdps, cdd })
    }

    /// Same profile on every antenna with linear delay `d`.
    pub fn linear(pdp: &PowerDelayProfile, n_tx: usize, d: usize) -> Result<Self> {
        Self::cdd(vec![pdp.clone(); n_tx], CddConfig::linear(n_tx, d)?)
    }

    fn validate(&self, cfg: &OfdmConfig) -> Result<()> {
        self.cdd.validate_for(cfg.n_sc)?;
        if self.antenna_pdps.iter().any(|p| p.len() > cfg.n_sc) {
            return Err(invalid("profile longer than n_sc"));
        }
        Ok(())
    }
}

/// Draws block throughput vectors for one user channel.
///
/// The CDD response `(1/√N_Tx) Σ_i H_i e^{-j2π D_i n/N_sc}` is built by
/// cyclically shifting each antenna's taps before a single FFT. Random draws
/// depend only on the profile lengths, so changing the delays keeps common
/// random numbers.
#[derive(Debug, Clone)]
pub struct BlockSampler {
    spec: ChannelSpec,
    cfg: OfdmConfig,
    transform: FrequencyTransform,
    taps: Vec<Complex64>,
    response: Vec<Complex64>,
    snr: Vec<f64>,
    blocks: Vec<f64>,
}

impl BlockSampler {
    pub fn new(spec: ChannelSpec, cfg: OfdmConfig) -> Result<Self> {
        spec.validate(&cfg)?;
        Ok(Self {
            spec,
            cfg,
            transform: FrequencyTransform::new(cfg.n_sc),
            taps: vec![Complex64::default(); cfg.n_sc],
            response: vec![Complex64::default(); cfg.n_sc],
            snr: vec![0.0; cfg.n_sc],
            blocks: vec![0.0; cfg.n_rb],
        })
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[f64] {
        let n_sc = self.cfg.n_sc;
        let scale = (self.spec.cdd.n_tx() as f64).sqrt().recip();
        self.taps.fill(Complex64::default());
        for (pdp, &d) in self.spec.antenna_pdps.iter().zip(self.spec.cdd.delays()) {
            for (m, &a) in pdp.gains().iter().enumerate() {
                self.taps[(m + d) % n_sc] += rng::complex_gaussian(rng) * (a * scale);
            }
        }
        self.transform
            .response_into(&self.taps, &mut self.response)
            .expect("buffers sized to n_sc");
        for (g, h) in self.snr.iter_mut().zip(&self.response) {
            *g = self.cfg.snr_scale * h.norm_sqr();
        }
        block_throughputs_into(&self.snr, self.cfg.block_size, &mut self.blocks);
        &self.blocks
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub k_users: usize,
    pub n_fb: usize,
    pub t_c: f64,
    /// Measured slots.
    pub n_slots: usize,
    /// Slots run before measurement starts.
    pub warmup_slots: usize,
    pub seed: u64,
    pub outage_policy: OutagePolicy,
}

impl CampaignConfig {
    /// Defaults with a warm-up of `t_c` slots.
    pub fn new(k_users: usize, n_slots: usize, seed: u64) -> Self {
        Self {
            k_users,
            n_fb: DEFAULT_N_FB,
            t_c: DEFAULT_T_C,
            n_slots,
            warmup_slots: DEFAULT_T_C as usize,
            seed,
            outage_policy: OutagePolicy::Skip,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignStats {
    /// Per-slot average achieved `C` over assigned blocks.
    pub sum_rate: Estimate,
    /// Per-user-draw `max_b C_b` from the raw grids.
    pub max_cb: Estimate,
    /// Per-user-draw mean of `C_b`.
    pub mean_cb: Estimate,
    /// Fraction of assigned blocks won by each user.
    pub win_share: Vec<f64>,
    /// Fraction of blocks with no reporting user.
    pub outage_rate: f64,
    pub slots: usize,
}

/// Sequential campaign; every user sees an independent draw of `spec` each slot.
pub fn run_campaign(spec: &ChannelSpec, cfg: &OfdmConfig, camp: &CampaignConfig) -> Result<CampaignStats> {
    run_campaign_with_progress(spec, cfg, camp, &|_, _| {})
}

/// [`run_campaign`] calling `progress(done, total)` after every slot,
/// warm-up included.
pub fn run_campaign_with_progress(
    spec: &ChannelSpec,
    cfg: &OfdmConfig,
    camp: &CampaignConfig,
    progress: &dyn Fn(usize, usize),
) -> Result<CampaignStats> {
    if camp.k_users == 0 || camp.n_fb == 0 || camp.n_slots == 0 {
        return Err(invalid("k_users, n_fb and n_slots must be positive"));
    }
    let n_fb = camp.n_fb.min(cfg.n_rb);
    let mut sampler = BlockSampler::new(spec.clone(), *cfg)?;
    let mut rng = rng::seeded(camp.seed);
    let mut state = SchedulerState::warm(camp.k_users, camp.t_c, cfg.snr_scale)?;
    let mut csi = vec![vec![0.0; cfg.n_rb]; camp.k_users];
    let mut reports = Vec::with_capacity(camp.k_users);

    let mut sum_rate = Accumulator::new();
    let mut max_cb = Accumulator::new();
    let mut mean = Accumulator::new();
    let mut wins = vec![0u64; camp.k_users];
    let mut outages = 0u64;

    let total = camp.warmup_slots + camp.n_slots;
    for slot in 0..total {
        let measured = slot >= camp.warmup_slots;
        reports.clear();
        for (k, row) in csi.iter_mut().enumerate() {
            row.copy_from_slice(sampler.sample(&mut rng));
            reports.push(feedback_report(k, row, n_fb)?);
            if measured {
                max_cb.push(row.iter().copied().fold(f64::NEG_INFINITY, f64::max));
                mean.push(row.iter().sum::<f64>() / row.len() as f64);
            }
        }
        let a = pf_schedule_slot(&reports, Some(&csi), cfg.n_rb, &mut state, camp.outage_policy)?;
        if measured {
            sum_rate.push(a.sum_rate);
            outages += a.n_outage as u64;
            for &(k, _) in a.blocks.iter().flatten() {
                wins[k] += 1;
            }
        }
        progress(slot + 1, total);
    }

    let total_wins: u64 = wins.iter().sum();
    Ok(CampaignStats {
        sum_rate: sum_rate.estimate(),
        max_cb: max_cb.estimate(),
        mean_cb: mean.estimate(),
        win_share: wins
            .iter()
            .map(|&w| if total_wins == 0 { 0.0 } else { w as f64 / total_wins as f64 })
            .collect(),
        outage_rate: outages as f64 / (camp.n_slots * cfg.n_rb) as f64,
        slots: camp.n_slots,
    })
}

/// Trials per independent random stream in [`empirical_max_cb`].
pub const TRIALS_PER_STREAM: usize = 1024;

/// `E[max_b C_b]` for a single user, estimated from `n_trials` draws.
///
/// Trials are split into fixed chunks with their own stream, so the result
/// does not depend on the number of worker threads.
pub fn empirical_max_cb(spec: &ChannelSpec, cfg: &OfdmConfig, n_trials: usize, seed: u64) -> Result<Estimate> {
    if n_trials == 0 {
        return Err(invalid("n_trials must be at least 1"));
    }
    let sampler = BlockSampler::new(spec.clone(), *cfg)?;
    let chunks = n_trials.div_ceil(TRIALS_PER_STREAM);
    let parts: Vec<Accumulator> = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let mut s = sampler.clone();
            let mut rng = rng::stream(seed, i as u64);
            let mut acc = Accumulator::new();
            let n = TRIALS_PER_STREAM.min(n_trials - i * TRIALS_PER_STREAM);
            for _ in 0..n {
                acc.push(s.sample(&mut rng).iter().copied().fold(f64::NEG_INFINITY, f64::max));
            }
            acc
        })
        .collect();
    let mut total = Accumulator::new();
    for p in &parts {
        total.merge(p);
    }
    Ok(total.estimate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::make_exponential_pdp;

    #[test]
    fn unit_snr_gives_unit_blocks() {
        let cfg = OfdmConfig::new(64, 8, 1.0).unwrap();
        let c = block_throughputs(&[1.0; 64], &cfg).unwrap();
        assert_eq!(c.len(), 8);
        for v in c {
            assert!((v - 1.0).abs() < 1e-15);
        }
        assert!(block_throughputs(&[1.0; 63], &cfg).is_err());
    }

    #[test]
    fn block_throughputs_match_naive_loop() {
        let cfg = OfdmConfig::new(128, 16, 1.0).unwrap();
        let mut r = rng::seeded(3);
        let snr: Vec<f64> = (0..128).map(|_| r.random::<f64>() * 50.0).collect();
        let c = block_throughputs(&snr, &cfg).unwrap();
        for b in 0..8 {
            let mut s = 0.0;
            for n in b * 16..(b + 1) * 16 {
                s += (1.0 + snr[n]).log2();
            }
            assert!((c[b] - s / 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn feedback_sorted_with_ties_to_lower_block() {
        let r = feedback_report(4, &[1.0, 3.0, 2.0, 3.0], 3).unwrap();
        assert_eq!(r.entries, vec![(1, 3.0), (3, 3.0), (2, 2.0)]);
        assert_eq!(feedback_report(0, &[1.0, 2.0], 9).unwrap().entries.len(), 2);
        assert!(feedback_report(0, &[1.0], 0).is_err());
    }

    #[test]
    fn single_user_full_feedback_takes_everything() {
        let c = vec![0.5, 2.0, 1.0, 1.5];
        let rep = feedback_report(0, &c, 4).unwrap();
        let mut st = SchedulerState::new(1, 100.0, 1.0).unwrap();
        let a = pf_schedule_slot(&[rep], None, 4, &mut st, OutagePolicy::Skip).unwrap();
        assert_eq!(a.n_outage, 0);
        assert!((a.sum_rate - 1.25).abs() < 1e-15);
        assert!(a.blocks.iter().all(|b| b.unwrap().0 == 0));
        assert_eq!(st.time_index, 4);
    }

    #[test]
    fn outage_policies() {
        let csi = vec![vec![3.0, 1.0, 0.5], vec![2.0, 0.2, 0.1]];
        let reports: Vec<_> = csi
            .iter()
            .enumerate()
            .map(|(k, c)| feedback_report(k, c, 1).unwrap())
            .collect();
        let mut st = SchedulerState::new(2, 10.0, 1.0).unwrap();
        let skip = pf_schedule_slot(&reports, None, 3, &mut st, OutagePolicy::Skip).unwrap();
        assert_eq!(skip.blocks[0], Some((0, 3.0)));
        assert_eq!(skip.n_outage, 2);
        assert_eq!(skip.sum_rate, 3.0);

        let mut st = SchedulerState::new(2, 10.0, 1.0).unwrap();
        assert!(pf_schedule_slot(&reports, None, 3, &mut st, OutagePolicy::RoundRobin).is_err());
        let rr = pf_schedule_slot(&reports, Some(&csi), 3, &mut st, OutagePolicy::RoundRobin).unwrap();
        assert_eq!(rr.blocks, vec![Some((0, 3.0)), Some((0, 1.0)), Some((1, 0.1))]);
        assert_eq!(rr.n_outage, 2);
        assert_eq!(st.rr_next, 0);
    }

    #[test]
    fn empty_user_list_rejected() {
        let mut st = SchedulerState::new(1, 10.0, 1.0).unwrap();
        assert!(pf_schedule_slot(&[], None, 4, &mut st, OutagePolicy::Skip).is_err());
    }

    #[test]
    fn pf_prefers_starved_user() {
        let reports = vec![
            FeedbackReport { user_id: 0, entries: vec![(0, 2.0)] },
            FeedbackReport { user_id: 1, entries: vec![(0, 1.0)] },
        ];
        let mut st = SchedulerState::new(2, 10.0, 1.0).unwrap();
        st.t_k = vec![4.0, 1.0];
        let a = pf_schedule_slot(&reports, None, 1, &mut st, OutagePolicy::Skip).unwrap();
        assert_eq!(a.blocks[0], Some((1, 1.0)));
    }

    #[test]
    fn sampler_siso_matches_fft_path() {
        use crate::channel::{freq_response, sample_channel, snr_grid};
        let cfg = OfdmConfig::new(256, 16, 10.0).unwrap();
        let pdp = make_exponential_pdp(3.0, 64).unwrap();
        let mut s = BlockSampler::new(ChannelSpec::siso(pdp.clone()), cfg).unwrap();
        let got = s.sample(&mut rng::seeded(9)).to_vec();
        let ch = sample_channel(&pdp, &mut rng::seeded(9));
        let want = block_throughputs(&snr_grid(&freq_response(&ch, &cfg).unwrap(), &cfg), &cfg).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sampler_cdd_matches_combiner() {
        use crate::channel::{cdd_freq_response, freq_response, sample_channel, snr_grid};
        let cfg = OfdmConfig::new(256, 16, 10.0).unwrap();
        let pdp = make_exponential_pdp(2.0, 64).unwrap();
        let spec = ChannelSpec::linear(&pdp, 2, 5).unwrap();
        let mut s = BlockSampler::new(spec.clone(), cfg).unwrap();
        let got = s.sample(&mut rng::seeded(2)).to_vec();
        let mut r = rng::seeded(2);
        let frs: Vec<_> = (0..2)
            .map(|_| freq_response(&sample_channel(&pdp, &mut r), &cfg).unwrap())
            .collect();
        let fr = cdd_freq_response(&frs, &spec.cdd, &cfg).unwrap();
        let want = block_throughputs(&snr_grid(&fr, &cfg), &cfg).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn empirical_max_cb_flat_channel() {
        let cfg = OfdmConfig::new(64, 8, 1.0).unwrap();
        let spec = ChannelSpec::siso(PowerDelayProfile::single_tap());
        let e = empirical_max_cb(&spec, &cfg, 20_000, 1).unwrap();
        let want = mean_cb(1.0).unwrap();
        assert!((e.mean - want).abs() < 4.0 * e.stderr, "{} vs {want}", e.mean);
        assert_eq!(e, empirical_max_cb(&spec, &cfg, 20_000, 1).unwrap());
    }

    #[test]
    fn campaign_is_deterministic() {
        let cfg = OfdmConfig::new(64, 8, 10.0).unwrap();
        let spec = ChannelSpec::siso(make_exponential_pdp(2.0, 16).unwrap());
        let camp = CampaignConfig::new(4, 200, 11);
        let a = run_campaign(&spec, &cfg, &camp).unwrap();
        let b = run_campaign(&spec, &cfg, &camp).unwrap();
        assert_eq!(a, b);
        assert!((a.win_share.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
