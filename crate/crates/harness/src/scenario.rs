//! End-to-end sweeps: transmitter, booster, amplified link tapped at every
//! requested distance, NLFT receiver and BER scoring.
//!
//! Each seed owns one link realization: span `k`'s ASE comes from the stream
//! keyed by `(seed, segment, k)`, so a longer distance is the shorter one
//! propagated further. Rows come out ordered by distance, then by seed.

use crate::config::ScenarioConfig;
use num_complex::Complex64;
use rayon::prelude::*;
use solitx_core::fiber::{edfa_amplify, EdfaParams, LinkPropagator};
use solitx_core::nlft::NormalizationScales;
use solitx_core::rng;
use solitx_core::rx::{
    decide_and_count_with_erasures, receive_window, recover_phase, PulseWindow, SymbolDiagnostic,
};
use solitx_core::signal::ComplexEnvelope;
use solitx_core::tx::{assemble_symbols, demap, qpsk_map, split_bits, TxOutput, N_CHANNELS};
use solitx_core::units::{dbm_to_w, OpticalConstants, PS};
use solitx_core::Result;
use std::f64::consts::PI;
use std::fmt::Write as _;

const BITS_STREAM: u64 = 0x42495453;
const BOOSTER_STREAM: u64 = 0x424f4f53;
const LINK_STREAM: u64 = 0x4c494e4b;

/// Significance (in combined standard errors) a BER drop needs to count as
/// a ripple.
pub const RIPPLE_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub distance_km: f64,
    pub dt_ps: f64,
    pub seed: u64,
    /// `None` for dark channels.
    pub ber: [Option<f64>; N_CHANNELS],
    pub ber_avg: f64,
    pub osnr_db: f64,
    pub n_eigenvalue_failures: usize,
    /// Data bits scored over all lit channels.
    pub n_bits: usize,
}

pub const CSV_HEADER: &str =
    "distance_km,dt_ps,seed,ber_ch1,ber_ch2,ber_ch3,ber_ch4,ber_avg,osnr_db,n_eigenvalue_failures";

/// Rounds to 9 significant digits and prints without exponent noise.
pub fn sig9(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.8e}").parse().unwrap_or(x);
    format!("{rounded}")
}

impl ResultRow {
    pub fn csv_line(&self) -> String {
        let mut s = format!("{},{},{}", sig9(self.distance_km), sig9(self.dt_ps), self.seed);
        for b in &self.ber {
            s.push(',');
            if let Some(b) = b {
                s.push_str(&sig9(*b));
            }
        }
        let _ = write!(
            s,
            ",{},{},{}",
            sig9(self.ber_avg),
            sig9(self.osnr_db),
            self.n_eigenvalue_failures
        );
        s
    }
}

pub fn rows_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Tally {
    bit_errors: usize,
    erasures: usize,
    n_bits: usize,
    erasure_weight: f64,
}

impl Tally {
    fn ber(&self) -> f64 {
        if self.n_bits == 0 {
            0.0
        } else {
            (self.bit_errors as f64 + 2.0 * self.erasure_weight * self.erasures as f64)
                / self.n_bits as f64
        }
    }

    fn add(&mut self, o: &Tally) {
        self.bit_errors += o.bit_errors;
        self.erasures += o.erasures;
        self.n_bits += o.n_bits;
        self.erasure_weight = o.erasure_weight;
    }
}

/// One transmitted block ready for the link.
pub struct Launch {
    pub tx: TxOutput,
    /// Launch field including booster noise.
    pub field: ComplexEnvelope,
    /// Noiseless average launch power, W.
    pub signal_power: f64,
    /// Launch peak, W.
    pub peak_power: f64,
}

/// Number of periodic segments and windows per segment.
pub fn segmentation(cfg: &ScenarioConfig) -> (usize, usize) {
    let windows = cfg.n_bits / cfg.mode.bits_per_window();
    let per_window = cfg.tw() * cfg.tx.sample_rate;
    let cap = ((cfg.max_samples as f64 / per_window).floor() as usize).max(1);
    let n_seg = windows.div_ceil(cap);
    (n_seg, windows / n_seg)
}

/// Transmits segment `segment` of seed `seed` and lifts it to the launch
/// peak.
pub fn launch(cfg: &ScenarioConfig, seed: u64, segment: usize) -> Result<Launch> {
    let (n_seg, per_seg) = segmentation(cfg);
    let windows = if segment + 1 == n_seg {
        cfg.n_bits / cfg.mode.bits_per_window() - per_seg * (n_seg - 1)
    } else {
        per_seg
    };
    let n_bits = windows * cfg.mode.bits_per_window();
    let mut r = rng::stream(seed, &[BITS_STREAM, segment as u64]);
    let bits: Vec<u8> = (0..n_bits).map(|_| rand::Rng::gen_range(&mut r, 0..2u8)).collect();
    let streams = split_bits(&bits, cfg.mode)?;
    let mut symbols: [Vec<Complex64>; N_CHANNELS] = Default::default();
    for k in 0..N_CHANNELS {
        symbols[k] = if cfg.channels.contains(&(k + 1)) {
            qpsk_map(&streams[k])?
        } else {
            vec![Complex64::new(0.0, 0.0); windows]
        };
    }
    let mut tx = assemble_symbols(&symbols, &cfg.tx, seed)?;
    for (t, b) in tx.truth.iter_mut().zip(streams) {
        if cfg.channels.contains(&t.channel) {
            t.bits = b;
        }
    }

    let pic_peak = tx
        .channel_peak_dbm
        .iter()
        .copied()
        .filter(|p| p.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let gain = cfg.launch_peak_dbm - pic_peak;
    let booster = EdfaParams {
        gain,
        nf: cfg.booster.nf_db,
        noise: cfg.booster.noise,
    };
    let key = rng::stream_key(seed, &[BOOSTER_STREAM, segment as u64]);
    let amp = edfa_amplify(&tx.output, &booster, &OpticalConstants::default(), key)?;
    let g = 10f64.powf(gain / 10.0);
    let signal_power = tx.output.average_power(None)? * g;
    Ok(Launch {
        tx,
        field: amp.envelope,
        signal_power,
        peak_power: dbm_to_w(cfg.launch_peak_dbm),
    })
}

/// Scales the receiver normalizes with: launch peak and the fiber's
/// dispersion length.
pub fn rx_scales(cfg: &ScenarioConfig) -> Result<NormalizationScales> {
    let t0 = cfg.tx.soliton.t0;
    NormalizationScales::new(t0, dbm_to_w(cfg.launch_peak_dbm), cfg.fiber.dispersion_length(t0))
}

/// Pulse spacing in ps, free of float noise from unit conversion.
pub fn dt_ps(cfg: &ScenarioConfig) -> f64 {
    (cfg.dt() / PS * 1e6).round() / 1e6
}

/// Group delay of channel `k` after `km`, relative to the frame, s.
pub fn walk_off(cfg: &ScenarioConfig, k: usize, km: f64) -> f64 {
    -cfg.fiber.beta2 * PS * PS * 2.0 * PI * cfg.tx.plan.delta_f[k] * km
}

pub fn pulse_windows(cfg: &ScenarioConfig, tx: &TxOutput, k: usize, km: f64) -> Vec<PulseWindow> {
    let hw = PulseWindow::default_half_width(cfg.dt(), cfg.tw());
    let shift = walk_off(cfg, k, km);
    tx.truth[k]
        .centers
        .iter()
        .map(|&c| PulseWindow {
            channel: k + 1,
            center: c + shift,
            half_width: hw,
        })
        .collect()
}

struct ChannelScore {
    tally: Tally,
    failures: usize,
    diagnostics: Vec<SymbolDiagnostic>,
}

fn score_channel(
    cfg: &ScenarioConfig,
    field: &ComplexEnvelope,
    tx: &TxOutput,
    k: usize,
    km: f64,
    ns: &NormalizationScales,
    keep_diagnostics: bool,
) -> Result<ChannelScore> {
    let truth = &tx.truth[k];
    let windows = pulse_windows(cfg, tx, k, km);
    let est = receive_window(
        field,
        cfg.tx.plan.delta_f[k],
        cfg.rx.rx_bw,
        ns,
        &windows,
        km,
        cfg.rx.centroid_reach,
    )?;
    let raw: Vec<Option<Complex64>> = est.iter().map(|e| e.raw).collect();
    let pilots = cfg.rx.pilots.min(truth.symbols.len());
    let recovered = recover_phase(&raw, &truth.symbols[..pilots], &cfg.rx)?;
    let count = decide_and_count_with_erasures(
        &recovered[pilots..],
        &truth.bits[2 * pilots..],
        cfg.rx.erasure_weight,
    )?;
    let failures = raw.iter().filter(|r| r.is_none()).count();
    let diagnostics = if keep_diagnostics {
        est.iter()
            .zip(&recovered)
            .enumerate()
            .map(|(n, (e, s))| {
                let decided = s.map(demap);
                let correct = decided
                    .map(|d| d[0] == truth.bits[2 * n] && d[1] == truth.bits[2 * n + 1])
                    .unwrap_or(false);
                SymbolDiagnostic {
                    channel: k + 1,
                    window_index: n,
                    point: e.point,
                    decided,
                    correct,
                }
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ChannelScore {
        tally: Tally {
            bit_errors: count.bit_errors,
            erasures: count.erasures,
            n_bits: count.n_bits,
            erasure_weight: cfg.rx.erasure_weight,
        },
        failures,
        diagnostics,
    })
}

/// Per-distance tallies of one (seed, segment) link.
struct SegmentResult {
    tallies: Vec<[Tally; N_CHANNELS]>,
    failures: Vec<usize>,
    osnr_db: Vec<f64>,
}

fn run_segment(cfg: &ScenarioConfig, seed: u64, segment: usize) -> Result<SegmentResult> {
    let l = launch(cfg, seed, segment)?;
    let ns = rx_scales(cfg)?;
    let key = rng::stream_key(seed, &[LINK_STREAM, segment as u64]);
    let mut link = LinkPropagator::new(l.field.clone(), cfg.fiber, cfg.edfa, cfg.step, key)?;
    let mut out = SegmentResult {
        tallies: Vec::new(),
        failures: Vec::new(),
        osnr_db: Vec::new(),
    };
    for &km in &cfg.distances_km {
        link.advance_to(cfg.span_count(km))?;
        let scored: Vec<(usize, ChannelScore)> = cfg
            .channels
            .par_iter()
            .map(|&ch| {
                score_channel(cfg, link.field(), &l.tx, ch - 1, km, &ns, false).map(|s| (ch - 1, s))
            })
            .collect::<Result<_>>()?;
        let mut tallies = [Tally::default(); N_CHANNELS];
        let mut fails = 0;
        for (k, s) in scored {
            tallies[k] = s.tally;
            fails += s.failures;
        }
        out.tallies.push(tallies);
        out.failures.push(fails);
        out.osnr_db.push(osnr_db(l.signal_power, link.ase_psd(), cfg.osnr_ref_bandwidth));
    }
    Ok(out)
}

/// OSNR of the noiseless launch power against the span ASE (booster noise
/// excluded), dual polarization in `ref_bw`.
pub fn osnr_db(signal_power: f64, ase_psd: f64, ref_bw: f64) -> f64 {
    if ase_psd == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (signal_power / (2.0 * ase_psd * ref_bw)).log10()
    }
}

/// Mean BER per distance with its pooled binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub distance_km: f64,
    pub mean_ber: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ripple {
    pub distance_km: f64,
    pub next_km: f64,
    /// BER drop to the next distance, in combined standard errors.
    pub significance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub dt_ps: f64,
    pub curve: Vec<CurvePoint>,
    /// Longest distance up to which every mean BER is at or below the
    /// threshold; 0 when the first distance already fails.
    pub hd_reach_km: f64,
    pub sd_reach_km: f64,
    pub ripples: Vec<Ripple>,
}

impl Summary {
    pub fn mean_ber_at(&self, km: f64) -> Option<f64> {
        self.curve
            .iter()
            .find(|p| (p.distance_km - km).abs() < 1e-9)
            .map(|p| p.mean_ber)
    }

    pub fn ripples_between(&self, lo_km: f64, hi_km: f64) -> Vec<Ripple> {
        self.ripples
            .iter()
            .copied()
            .filter(|r| r.distance_km >= lo_km - 1e-9 && r.next_km <= hi_km + 1e-9)
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "Dt = {} ps: HD-FEC reach {} km, SD-FEC reach {} km\n",
            self.dt_ps, self.hd_reach_km, self.sd_reach_km
        );
        if self.ripples.is_empty() {
            s.push_str("no significant ripples\n");
        }
        for r in &self.ripples {
            let _ = writeln!(
                s,
                "ripple: BER falls from {} km to {} km ({:.1} sigma)",
                r.distance_km, r.next_km, r.significance
            );
        }
        s
    }
}

pub fn reach(curve: &[CurvePoint], threshold: f64) -> f64 {
    let mut r = 0.0;
    for p in curve {
        if p.mean_ber <= threshold {
            r = p.distance_km;
        } else {
            break;
        }
    }
    r
}

/// Significant local decreases of the mean BER curve.
pub fn find_ripples(curve: &[CurvePoint], sigmas: f64) -> Vec<Ripple> {
    curve
        .windows(2)
        .filter_map(|w| {
            let drop = w[0].mean_ber - w[1].mean_ber;
            let se = (w[0].std_err.powi(2) + w[1].std_err.powi(2)).sqrt();
            let significance = if se > 0.0 { drop / se } else { 0.0 };
            (drop > 0.0 && significance > sigmas).then_some(Ripple {
                distance_km: w[0].distance_km,
                next_km: w[1].distance_km,
                significance,
            })
        })
        .collect()
}

pub fn summarize(cfg: &ScenarioConfig, rows: &[ResultRow]) -> Summary {
    let curve: Vec<CurvePoint> = cfg
        .distances_km
        .iter()
        .map(|&km| {
            let at: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| (r.distance_km - km).abs() < 1e-9)
                .collect();
            let n = at.len().max(1) as f64;
            let mean = at.iter().map(|r| r.ber_avg).sum::<f64>() / n;
            let bits: usize = at.iter().map(|r| r.n_bits).sum();
            let std_err = if bits > 0 {
                (mean * (1.0 - mean) / bits as f64).sqrt()
            } else {
                0.0
            };
            CurvePoint {
                distance_km: km,
                mean_ber: mean,
                std_err,
            }
        })
        .collect();
    Summary {
        dt_ps: dt_ps(cfg),
        hd_reach_km: reach(&curve, cfg.fec.hd),
        sd_reach_km: reach(&curve, cfg.fec.sd),
        ripples: find_ripples(&curve, RIPPLE_SIGMAS),
        curve,
    }
}

/// Runs every (seed, segment) link in parallel and emits rows in canonical
/// order.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(Vec<ResultRow>, Summary)> {
    let (n_seg, _) = segmentation(cfg);
    let jobs: Vec<(usize, usize)> = (0..cfg.seeds.len())
        .flat_map(|s| (0..n_seg).map(move |g| (s, g)))
        .collect();
    let results: Vec<SegmentResult> = jobs
        .par_iter()
        .map(|&(s, g)| run_segment(cfg, cfg.seeds[s], g))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (d, &km) in cfg.distances_km.iter().enumerate() {
        for (s, &seed) in cfg.seeds.iter().enumerate() {
            let mut tallies = [Tally::default(); N_CHANNELS];
            let mut failures = 0;
            let mut osnr = 0.0;
            for g in 0..n_seg {
                let r = &results[s * n_seg + g];
                for k in 0..N_CHANNELS {
                    tallies[k].add(&r.tallies[d][k]);
                }
                failures += r.failures[d];
                osnr = r.osnr_db[d];
            }
            let mut ber = [None; N_CHANNELS];
            let mut total = Tally::default();
            for &ch in &cfg.channels {
                ber[ch - 1] = Some(tallies[ch - 1].ber());
                total.add(&tallies[ch - 1]);
            }
            rows.push(ResultRow {
                distance_km: km,
                dt_ps: dt_ps(cfg),
                seed,
                ber,
                ber_avg: total.ber(),
                osnr_db: osnr,
                n_eigenvalue_failures: failures,
                n_bits: total.n_bits,
            });
        }
    }
    let summary = summarize(cfg, &rows);
    Ok((rows, summary))
}

/// Per-symbol NLFT diagnostics of every lit channel at `km` for `seed`
/// (first segment).
pub fn diagnostics(cfg: &ScenarioConfig, seed: u64, km: f64) -> Result<Vec<SymbolDiagnostic>> {
    let l = launch(cfg, seed, 0)?;
    let ns = rx_scales(cfg)?;
    let key = rng::stream_key(seed, &[LINK_STREAM, 0]);
    let mut link = LinkPropagator::new(l.field.clone(), cfg.fiber, cfg.edfa, cfg.step, key)?;
    link.advance_to(cfg.span_count(km))?;
    let mut out = Vec::new();
    for &ch in &cfg.channels {
        out.extend(score_channel(cfg, link.field(), &l.tx, ch - 1, km, &ns, true)?.diagnostics);
    }
    Ok(out)
}

/// Received field of the first segment of `seed` after `km`.
pub fn field_at(cfg: &ScenarioConfig, seed: u64, km: f64) -> Result<(Launch, ComplexEnvelope)> {
    let l = launch(cfg, seed, 0)?;
    let key = rng::stream_key(seed, &[LINK_STREAM, 0]);
    let mut link = LinkPropagator::new(l.field.clone(), cfg.fiber, cfg.edfa, cfg.step, key)?;
    link.advance_to(cfg.span_count(km))?;
    let f = link.field().clone();
    Ok((l, f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_formatting() {
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(2.5e-4), "0.00025");
        assert_eq!(sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(sig9(18.912345678912), "18.9123457");
        assert_eq!(sig9(f64::INFINITY), "inf");
        assert_eq!(sig9(3750.0), "3750");
    }

    fn point(km: f64, ber: f64, se: f64) -> CurvePoint {
        CurvePoint {
            distance_km: km,
            mean_ber: ber,
            std_err: se,
        }
    }

    #[test]
    fn reach_is_contiguous() {
        let c = [point(50.0, 0.0, 0.0), point(100.0, 1e-3, 1e-4), point(150.0, 5e-3, 1e-4), point(200.0, 1e-3, 1e-4)];
        assert_eq!(reach(&c, 3.8e-3), 100.0);
        assert_eq!(reach(&c, 2e-2), 200.0);
        assert_eq!(reach(&[point(50.0, 0.1, 0.0)], 3.8e-3), 0.0);
    }

    #[test]
    fn ripples_need_significance() {
        let c = [point(50.0, 1e-2, 1e-3), point(100.0, 9e-3, 1e-3), point(150.0, 2e-3, 1e-3)];
        let r = find_ripples(&c, 3.0);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].distance_km, 100.0);
    }

    #[test]
    fn segmentation_respects_cap() {
        let mut cfg = ScenarioConfig::paper(250.0, 1000.0).unwrap();
        assert_eq!(segmentation(&cfg), (1, 500));
        cfg.max_samples = 256 * 100;
        assert_eq!(segmentation(&cfg), (5, 100));
    }

    #[test]
    fn walk_off_direction() {
        let cfg = ScenarioConfig::paper(250.0, 1000.0).unwrap();
        // anomalous dispersion delays the upper channels
        assert!(walk_off(&cfg, 3, 1000.0) > 0.0);
        assert!(walk_off(&cfg, 0, 1000.0) < 0.0);
        let w = walk_off(&cfg, 2, 1000.0) - walk_off(&cfg, 1, 1000.0);
        let expect = cfg.fiber.beta2.abs() * 1e-24 * 2.0 * PI * 10e9 * 1000.0;
        assert!((w - expect).abs() < 1e-18);
    }
}
