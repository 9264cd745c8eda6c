//! Silicon-photonics soliton transmitter.
//!
//! Four comb carriers are picked by 2nd-order CROW add-drops, modulated by two
//! IQ-MZMs with sech-shaped QPSK drives, delayed by the on-chip loop (channels
//! 1 and 2), dropped onto two buses by 4th-order CROW OADMs (odd channels on
//! bus 1, even on bus 2) and merged by an MMI.

mod crow;
mod mzm;
mod phase_noise;
mod qpsk;
mod timing;

pub use crow::{crow_filter, crow_power_response};
pub use mzm::{calibrate_penalty, modulation_penalty, mzm_modulate, single_pole_lowpass};
pub use phase_noise::phase_noise;
pub use qpsk::{demap, map_pair, nearest, qpsk_map};
pub use timing::{
    centers_for, nearest_feasible_dt, timing_solve, TimingSolution, TAU_WG_OPTIONS, TIMING_TOL,
};

use crate::error::{Error, Result};
use crate::rng;
use crate::signal::{ComplexEnvelope, SignalGrid};
use crate::units::{dbm_to_w, w_to_dbm};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

pub const N_CHANNELS: usize = 4;

/// Minimum samples per `T0` for a resolvable pulse.
pub const MIN_SAMPLES_PER_T0: f64 = 8.0;

/// Pulses are truncated beyond this many `T0` from their centre.
const PULSE_SUPPORT_T0: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonParams {
    /// Characteristic width of `sech(t / T0)`, s.
    pub t0: f64,
    /// Complex drive amplitude at the pulse peak, V. `1/sqrt(2)` V gives each
    /// quadrature a 1 Vpp swing over the QPSK alphabet.
    pub peak_drive: f64,
}

impl Default for SolitonParams {
    fn default() -> Self {
        Self {
            t0: 38e-12,
            peak_drive: FRAC_1_SQRT_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MzmParams {
    pub vpi: f64,
    pub eo_bandwidth: f64,
    pub il_db: f64,
    pub drive_gain: f64,
}

impl Default for MzmParams {
    fn default() -> Self {
        // V_pi L = 2.45 V cm over a 4.4 mm phase shifter
        Self {
            vpi: 2.45 / 0.44,
            eo_bandwidth: 14e9,
            il_db: 4.5,
            drive_gain: 1.0,
        }
    }
}

impl MzmParams {
    fn validate(&self) -> Result<()> {
        if !(self.vpi > 0.0 && self.eo_bandwidth > 0.0) {
            return Err(Error::InvalidArgument("MZM needs vpi > 0 and bandwidth > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrowFilterSpec {
    pub order: u32,
    pub bandwidth_3db: f64,
    pub center_offset: f64,
    pub il_db: f64,
}

impl CrowFilterSpec {
    pub fn drop_2nd_order(center_offset: f64) -> Self {
        Self {
            order: 2,
            bandwidth_3db: 6.5e9,
            center_offset,
            il_db: 1.6,
        }
    }

    pub fn mux_4th_order(center_offset: f64) -> Self {
        Self {
            order: 4,
            bandwidth_3db: 17.5e9,
            center_offset,
            il_db: 2.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !matches!(self.order, 2 | 4) || !(self.bandwidth_3db > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "CROW order must be 2 or 4 with positive bandwidth (got {} / {:e})",
                self.order, self.bandwidth_3db
            )));
        }
        Ok(())
    }
}

/// Frequency and time programming of the four channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPlan {
    pub delta_f: [f64; N_CHANNELS],
    pub comb_fsr: f64,
    pub dt: f64,
    pub tw: f64,
    pub tau_wg: f64,
    pub tau_awg: f64,
    pub linewidth: f64,
    pub phase_noise: bool,
}

/// Comb FSR tuning range, Hz.
pub const COMB_FSR_RANGE: (f64, f64) = (6e9, 14e9);

impl ChannelPlan {
    /// Plan with the default carrier grid and delays solved for `(dt, tw)`.
    pub fn programmed(dt: f64, tw: f64) -> Result<Self> {
        let sol = timing_solve(dt, tw, &TAU_WG_OPTIONS)?;
        let plan = Self {
            delta_f: [-15e9, -5e9, 5e9, 15e9],
            comb_fsr: 10e9,
            dt,
            tw,
            tau_wg: sol.tau_wg,
            tau_awg: sol.tau_awg,
            linewidth: 80e3,
            phase_noise: false,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = COMB_FSR_RANGE;
        for w in self.delta_f.windows(2) {
            let gap = w[1] - w[0];
            if !(gap > 0.0) {
                return Err(Error::InvalidArgument("carrier offsets must increase".into()));
            }
            if gap < lo - 1.0 || gap > hi + 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "carrier spacing {gap:e} Hz outside comb FSR range"
                )));
            }
        }
        if !(self.dt > 0.0) || 4.0 * self.dt > self.tw + TIMING_TOL {
            return Err(Error::InvalidArgument(format!(
                "four pulses spaced {:e} s do not fit a {:e} s window",
                self.dt, self.tw
            )));
        }
        if !TAU_WG_OPTIONS.iter().any(|&o| (o - self.tau_wg).abs() < TIMING_TOL) {
            return Err(Error::InvalidArgument(format!(
                "tau_wg {:e} s is not a hardware loop delay",
                self.tau_wg
            )));
        }
        if self.linewidth < 0.0 {
            return Err(Error::InvalidArgument("negative linewidth".into()));
        }
        Ok(())
    }

    pub fn centers(&self) -> [f64; N_CHANNELS] {
        centers_for(self.tau_wg, self.tau_awg, self.tw)
    }

    /// Delay of channel `k` (0-based) relative to MZM A's undelayed pulse,
    /// before wrapping into the window.
    fn unwrapped_offset(&self, k: usize) -> f64 {
        let looped = if k < 2 { self.tau_wg } else { 0.0 };
        let awg = if k % 2 == 1 { self.tau_awg } else { 0.0 };
        looped + awg
    }

    /// Absolute centre of channel `k`'s pulse in window `n`. Channel 1's pulse
    /// of window 0 sits at `Dt / 2`.
    pub fn pulse_center(&self, k: usize, n: usize) -> f64 {
        let origin = 0.5 * self.dt - self.unwrapped_offset(0);
        n as f64 * self.tw + origin + self.unwrapped_offset(k)
    }
}

/// Real I and Q drive voltages for one modulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Drive {
    pub i: Vec<f64>,
    pub q: Vec<f64>,
}

/// Sum of `s_k peak_drive sech((t - t_k) / T0)` on a periodic grid. Zero
/// symbols emit no pulse.
pub fn soliton_drive(
    symbols: &[Complex64],
    centers: &[f64],
    sp: &SolitonParams,
    grid: SignalGrid,
) -> Result<Drive> {
    if symbols.len() != centers.len() {
        return Err(Error::LengthMismatch(symbols.len(), centers.len()));
    }
    if !(sp.t0 > 0.0) || sp.t0 * grid.sample_rate() < MIN_SAMPLES_PER_T0 {
        return Err(Error::InvalidArgument(format!(
            "T0 = {:e} s spans fewer than {MIN_SAMPLES_PER_T0} samples",
            sp.t0
        )));
    }
    let dur = grid.duration();
    let mut active: Vec<f64> = symbols
        .iter()
        .zip(centers)
        .filter(|(s, _)| s.norm_sqr() > 0.0)
        .map(|(_, c)| c.rem_euclid(dur))
        .collect();
    active.sort_by(f64::total_cmp);
    let too_close = active.windows(2).any(|w| w[1] - w[0] < grid.dt())
        || (active.len() > 1 && active[0] + dur - active[active.len() - 1] < grid.dt());
    if too_close {
        return Err(Error::InvalidArgument("pulse centres closer than one sample".into()));
    }

    let n = grid.n_samples();
    let fs = grid.sample_rate();
    let support = (PULSE_SUPPORT_T0 * sp.t0 * fs).ceil() as i64;
    let mut i = vec![0.0; n];
    let mut q = vec![0.0; n];
    for (s, &c) in symbols.iter().zip(centers) {
        if s.norm_sqr() == 0.0 {
            continue;
        }
        let a = s * sp.peak_drive;
        let c = c.rem_euclid(dur);
        let mid = (c * fs).round() as i64;
        let lo = (mid - support).max(mid - n as i64 / 2);
        let hi = (mid + support).min(lo + n as i64 - 1);
        for m in lo..=hi {
            let idx = m.rem_euclid(n as i64) as usize;
            let env = 1.0 / ((m as f64 / fs - c) / sp.t0).cosh();
            i[idx] += a.re * env;
            q[idx] += a.im * env;
        }
    }
    Ok(Drive { i, q })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TxMode {
    /// Two IQ-MZMs: channels 1/3 and 2/4 carry the same data.
    HardwareFaithful,
    /// Four independent data streams.
    Idealized,
}

impl TxMode {
    /// Data bits carried per transmission window.
    pub fn bits_per_window(&self) -> usize {
        match self {
            TxMode::HardwareFaithful => 4,
            TxMode::Idealized => 8,
        }
    }
}

/// Everything the transmitter model needs besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct TxSetup {
    pub plan: ChannelPlan,
    pub soliton: SolitonParams,
    pub mzm: MzmParams,
    /// Per-line carrier power arriving at the add-drop CROWs, dBm.
    pub line_power_dbm: f64,
    pub add_drop: CrowFilterSpec,
    pub mux: CrowFilterSpec,
    pub delay_il_db: f64,
    pub mmi_il_db: f64,
    pub tap_il_db: f64,
    pub output_gc_il_db: f64,
    pub sample_rate: f64,
}

impl TxSetup {
    /// Component values of the fabricated chip, with the MZM calibrated to a
    /// 13.5 dB insertion-plus-modulation penalty.
    pub fn paper(plan: ChannelPlan, sample_rate: f64) -> Result<Self> {
        let soliton = SolitonParams::default();
        let mzm = calibrate_penalty(&MzmParams::default(), &soliton, 13.5)?;
        Ok(Self {
            plan,
            soliton,
            mzm,
            // 10 dBm per line after the EDFA, minus the 3 dB input coupler
            line_power_dbm: 7.0,
            add_drop: CrowFilterSpec::drop_2nd_order(0.0),
            mux: CrowFilterSpec::mux_4th_order(0.0),
            delay_il_db: 3.0,
            mmi_il_db: 3.0,
            tap_il_db: 1.5,
            output_gc_il_db: 3.0,
            sample_rate,
        })
    }

    /// Grid covering `n_windows` transmission windows.
    pub fn grid(&self, n_windows: usize) -> Result<SignalGrid> {
        let exact = n_windows as f64 * self.plan.tw * self.sample_rate;
        let n = exact.round();
        if (exact - n).abs() > 1e-6 * exact.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "{n_windows} windows of {:e} s are not a whole number of samples at {:e} S/s",
                self.plan.tw, self.sample_rate
            )));
        }
        SignalGrid::new(n as usize, self.sample_rate)
    }
}

/// What channel `channel` (1-based) actually sent.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTruth {
    pub channel: usize,
    pub symbols: Vec<Complex64>,
    pub bits: Vec<u8>,
    pub centers: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TxOutput {
    pub output: ComplexEnvelope,
    pub truth: Vec<ChannelTruth>,
    /// Per-channel output peak power after equalization, dBm.
    pub channel_peak_dbm: [f64; N_CHANNELS],
    /// Attenuation applied by the mux OADMs to equalize peaks, dB.
    pub equalization_db: [f64; N_CHANNELS],
    pub n_windows: usize,
}

impl TxOutput {
    /// Per-channel truth records as CSV.
    pub fn truth_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("channel,symbol_index,t_center_ps,re,im\n");
        for t in &self.truth {
            for (k, (s, c)) in t.symbols.iter().zip(&t.centers).enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{:.9},{:.9},{:.9}",
                    t.channel,
                    k,
                    c * 1e12,
                    s.re,
                    s.im
                );
            }
        }
        out
    }
}

/// Splits data bits into per-channel bit streams.
pub fn split_bits(bits: &[u8], mode: TxMode) -> Result<[Vec<u8>; N_CHANNELS]> {
    let per_window = mode.bits_per_window();
    if bits.len() % per_window != 0 || bits.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "bit count {} is not a positive multiple of {per_window}",
            bits.len()
        )));
    }
    let mut streams: [Vec<u8>; N_CHANNELS] = Default::default();
    for chunk in bits.chunks_exact(per_window) {
        match mode {
            TxMode::Idealized => {
                for (k, s) in streams.iter_mut().enumerate() {
                    s.extend_from_slice(&chunk[2 * k..2 * k + 2]);
                }
            }
            TxMode::HardwareFaithful => {
                // MZM A feeds channels 3 and 1, MZM B channels 4 and 2
                streams[2].extend_from_slice(&chunk[0..2]);
                streams[0].extend_from_slice(&chunk[0..2]);
                streams[3].extend_from_slice(&chunk[2..4]);
                streams[1].extend_from_slice(&chunk[2..4]);
            }
        }
    }
    Ok(streams)
}

pub fn assemble_tx(bits: &[u8], setup: &TxSetup, mode: TxMode, seed: u64) -> Result<TxOutput> {
    let streams = split_bits(bits, mode)?;
    let mut symbols: [Vec<Complex64>; N_CHANNELS] = Default::default();
    for (k, s) in streams.iter().enumerate() {
        symbols[k] = qpsk_map(s)?;
    }
    let mut out = assemble_symbols(&symbols, setup, seed)?;
    for (t, b) in out.truth.iter_mut().zip(streams) {
        t.bits = b;
    }
    Ok(out)
}

/// Transmitter for explicit per-channel symbol streams (zero symbols leave
/// their slot dark). All streams must have one entry per window.
pub fn assemble_symbols(
    symbols: &[Vec<Complex64>; N_CHANNELS],
    setup: &TxSetup,
    seed: u64,
) -> Result<TxOutput> {
    let plan = &setup.plan;
    plan.validate()?;
    let n_windows = symbols[0].len();
    if let Some(s) = symbols.iter().find(|s| s.len() != n_windows) {
        return Err(Error::LengthMismatch(s.len(), n_windows));
    }
    let grid = setup.grid(n_windows)?;
    let dur = grid.duration();

    let line_w = dbm_to_w(setup.line_power_dbm) * crow_power_response(&setup.add_drop, 0.0);

    let per_channel: Vec<(ComplexEnvelope, Vec<f64>)> = (0..N_CHANNELS)
        .into_par_iter()
        .map(|k| -> Result<_> {
            let centers: Vec<f64> = (0..n_windows)
                .map(|n| plan.pulse_center(k, n).rem_euclid(dur))
                .collect();
            let drive = soliton_drive(&symbols[k], &centers, &setup.soliton, grid)?;
            let mut field = mzm_modulate(grid, line_w, &drive.i, &drive.q, &setup.mzm)?;
            if plan.phase_noise {
                field = phase_noise(&field, plan.linewidth, rng::stream_key(seed, &[k as u64]));
            }
            let mut field = field.frequency_shift(plan.delta_f[k])?;
            if k < 2 {
                scale_db(&mut field, -setup.delay_il_db);
            }
            let mux = CrowFilterSpec {
                center_offset: plan.delta_f[k],
                ..setup.mux
            };
            let field = crow_filter(&field, &mux)?;
            Ok((field, centers))
        })
        .collect::<Result<_>>()?;

    let common_db = setup.mmi_il_db + setup.tap_il_db + setup.output_gc_il_db;
    let peaks: Vec<f64> = per_channel
        .iter()
        .map(|(f, _)| w_to_dbm(f.peak_power()) - common_db)
        .collect();
    let lit: Vec<f64> = peaks.iter().copied().filter(|p| p.is_finite()).collect();
    let floor = lit.iter().copied().fold(f64::INFINITY, f64::min);
    let mut equalization_db = [0.0; N_CHANNELS];
    let mut channel_peak_dbm = [f64::NEG_INFINITY; N_CHANNELS];
    for k in 0..N_CHANNELS {
        if peaks[k].is_finite() {
            equalization_db[k] = peaks[k] - floor;
            channel_peak_dbm[k] = floor;
        }
    }

    let mut total = vec![Complex64::new(0.0, 0.0); grid.n_samples()];
    for (k, (field, _)) in per_channel.iter().enumerate() {
        let g = 10f64.powf(-(equalization_db[k] + common_db) / 20.0);
        for (acc, s) in total.iter_mut().zip(field.samples()) {
            *acc += s * g;
        }
    }
    let output = ComplexEnvelope::new(grid, total)?;

    let truth = per_channel
        .into_iter()
        .enumerate()
        .map(|(k, (_, centers))| ChannelTruth {
            channel: k + 1,
            symbols: symbols[k].clone(),
            bits: Vec::new(),
            centers,
        })
        .collect();

    Ok(TxOutput {
        output,
        truth,
        channel_peak_dbm,
        equalization_db,
        n_windows,
    })
}

fn scale_db(e: &mut ComplexEnvelope, db: f64) {
    let g = 10f64.powf(db / 20.0);
    for s in e.samples_mut() {
        *s *= g;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sech(x: f64) -> f64 {
        1.0 / x.cosh()
    }

    fn grid() -> SignalGrid {
        SignalGrid::new(1024, 256e9).unwrap()
    }

    #[test]
    fn single_real_symbol_drive() {
        let sp = SolitonParams::default();
        let g = grid();
        let tc = g.time(300);
        let d = soliton_drive(&[Complex64::new(1.0, 0.0)], &[tc], &sp, g).unwrap();
        assert!((d.i[300] - sp.peak_drive).abs() < 1e-15);
        assert!(d.q.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn imaginary_symbol_drives_q_only() {
        let sp = SolitonParams::default();
        let d = soliton_drive(&[Complex64::new(0.0, 1.0)], &[1e-9], &sp, grid()).unwrap();
        assert!(d.i.iter().all(|&v| v == 0.0));
        assert!(d.q.iter().any(|&v| v > 0.0));
    }

    #[test]
    fn mid_gap_amplitude_of_two_pulses() {
        let sp = SolitonParams::default();
        let g = grid();
        let t1 = g.time(200);
        let t2 = t1 + 250e-12;
        let one = Complex64::new(1.0, 0.0);
        let d = soliton_drive(&[one, one], &[t1, t2], &sp, g).unwrap();
        let mid = 200 + 32; // 125 ps at 256 GS/s
        let oracle = 2.0 * sech(125.0 / 38.0) * sp.peak_drive;
        assert!((d.i[mid] - oracle).abs() / oracle < 1e-6);
    }

    #[test]
    fn drive_error_paths() {
        let sp = SolitonParams::default();
        let coarse = SignalGrid::new(64, 100e9).unwrap();
        let one = Complex64::new(1.0, 0.0);
        assert!(soliton_drive(&[one], &[0.0], &sp, coarse).is_err());
        let g = grid();
        assert!(soliton_drive(&[one, one], &[1e-9, 1e-9 + 1e-12], &sp, g).is_err());
    }

    #[test]
    fn pulses_wrap_periodically() {
        let sp = SolitonParams::default();
        let g = grid();
        let one = Complex64::new(1.0, 0.0);
        let d = soliton_drive(&[one], &[0.0], &sp, g).unwrap();
        assert!((d.i[0] - sp.peak_drive).abs() < 1e-15);
        assert!((d.i[1] - d.i[1023]).abs() < 1e-15);
    }

    #[test]
    fn plan_validation() {
        let p = ChannelPlan::programmed(250e-12, 1000e-12).unwrap();
        assert_eq!(p.tau_wg, 500e-12);
        let mut bad = p.clone();
        bad.delta_f = [-15e9, -5e9, 5e9, 25e9];
        assert!(bad.validate().is_err());
        let mut bad = p.clone();
        bad.tau_wg = 400e-12;
        assert!(bad.validate().is_err());
        let mut bad = p.clone();
        bad.delta_f = [-15e9, 5e9, -5e9, 15e9];
        assert!(bad.validate().is_err());
    }

    #[test]
    fn pulse_centers_follow_channel_order() {
        for (dt, tw) in [(250e-12, 1000e-12), (150e-12, 600e-12), (100e-12, 500e-12)] {
            let p = ChannelPlan::programmed(dt, tw).unwrap();
            for k in 0..3 {
                let gap = p.pulse_center(k + 1, 3) - p.pulse_center(k, 3);
                assert!(timing::mod_distance(gap - dt, tw) < 1e-15);
            }
            assert!((p.pulse_center(0, 0) - dt / 2.0).abs() < 1e-18);
        }
    }

    #[test]
    fn hardware_mode_duplicates_streams() {
        let bits: Vec<u8> = (0..32).map(|k| ((k * 7 + 3) % 5 % 2) as u8).collect();
        let s = split_bits(&bits, TxMode::HardwareFaithful).unwrap();
        assert_eq!(s[0], s[2]);
        assert_eq!(s[1], s[3]);
        assert_eq!(s[0].len(), 16);
        let s = split_bits(&bits, TxMode::Idealized).unwrap();
        assert_eq!(s[0].len(), 8);
        assert_eq!(&s[1][..2], &bits[2..4]);
        assert!(split_bits(&bits[..6], TxMode::Idealized).is_err());
    }

    #[test]
    fn crosstalk_and_containment() {
        // a same-bus neighbour sits two comb spacings away
        let mux = CrowFilterSpec::mux_4th_order(0.0);
        let xt = 10.0 * (crow_power_response(&mux, 20e9) / crow_power_response(&mux, 0.0)).log10();
        assert!(xt < -20.0, "{xt}");
    }
}
