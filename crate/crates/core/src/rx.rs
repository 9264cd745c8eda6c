//! NLFT receiver: demultiplexing, per-pulse eigenvalue detection, phase
//! recovery and BER scoring.
//!
//! Diagnostics CSV columns: `channel,window_index,zeta_re,zeta_im,b_re,b_im,
//! decided_bits,correct`. Erased symbols leave the numeric fields empty.

use crate::error::{Error, Result};
use crate::nlft::{
    channel_compensate, find_eigenvalue_with, zs_scatter_with, NewtonOptions, NlftPoint,
    NormalizationScales, NormalizedField, ScatterOptions, DEFAULT_GUESS,
};
use crate::signal::{apply_spectral_gain, ComplexEnvelope};
use crate::tx::{demap, nearest};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

type C = Complex64;

/// `b` of an unmodulated `sech` pulse referenced to its own centre.
pub const REFERENCE_B: C = C::new(-1.0, 0.0);

/// Power response of an order-`n` Butterworth low-pass of full width `bw`.
pub fn butterworth_power(f: f64, bw: f64, order: u32) -> f64 {
    1.0 / (1.0 + (2.0 * f / bw).powi(2 * order as i32))
}

pub const DEMUX_ORDER: u32 = 4;

/// Shifts `channel_offset` to baseband and low-passes with a zero-phase
/// 4th-order Butterworth magnitude of full width `rx_bw`.
pub fn demux(e: &ComplexEnvelope, channel_offset: f64, rx_bw: f64) -> Result<ComplexEnvelope> {
    if !(rx_bw > 0.0) || 0.5 * rx_bw >= e.grid().nyquist() {
        return Err(Error::InvalidArgument(format!(
            "receiver bandwidth {rx_bw:e} Hz does not fit the grid"
        )));
    }
    if channel_offset.abs() + 0.5 * rx_bw >= e.grid().nyquist() {
        return Err(Error::Aliasing(format!(
            "channel at {channel_offset:e} Hz lies outside the sampled band"
        )));
    }
    let base = e.frequency_shift_unchecked(-channel_offset);
    let fs = e.grid().sample_rate();
    let out = apply_spectral_gain(base.samples(), fs, |f| {
        butterworth_power(f, rx_bw, DEMUX_ORDER).sqrt()
    });
    ComplexEnvelope::new(*e.grid(), out)
}

/// Where to look for one channel's pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseWindow {
    pub channel: usize,
    /// Expected pulse centre, s.
    pub center: f64,
    pub half_width: f64,
}

impl PulseWindow {
    /// Default half width `2 Dt` capped at `TW / 2`.
    pub fn default_half_width(dt: f64, tw: f64) -> f64 {
        (2.0 * dt).min(0.5 * tw)
    }

    pub fn validate(&self, e: &ComplexEnvelope) -> Result<()> {
        if !(1..=4).contains(&self.channel) {
            return Err(Error::InvalidArgument(format!("channel {}", self.channel)));
        }
        if !(self.half_width > 0.0) || 2.0 * self.half_width > e.grid().duration() {
            return Err(Error::InvalidArgument(format!(
                "window half width {:e} s does not fit the signal",
                self.half_width
            )));
        }
        Ok(())
    }
}

/// Samples of the periodic envelope over `[center - hw, center + hw]`,
/// normalized, with `tau = 0` at `center`.
pub fn extract_window(
    e: &ComplexEnvelope,
    center: f64,
    half_width: f64,
    ns: &NormalizationScales,
) -> NormalizedField {
    let fs = e.grid().sample_rate();
    let n = e.len() as i64;
    let first = ((center - half_width) * fs).ceil() as i64;
    let last = ((center + half_width) * fs).floor() as i64;
    let g = 1.0 / ns.p_sol.sqrt();
    let q = (first..=last)
        .map(|m| e.samples()[m.rem_euclid(n) as usize] * g)
        .collect();
    NormalizedField {
        h: 1.0 / (fs * ns.t0),
        tau0: (first as f64 / fs - center) / ns.t0,
        q,
    }
}

/// `|A|^2`-weighted mean time within `[center - reach, center + reach]` of a
/// periodic envelope.
pub fn local_centroid(e: &ComplexEnvelope, center: f64, reach: f64) -> f64 {
    let fs = e.grid().sample_rate();
    let n = e.len() as i64;
    let first = ((center - reach) * fs).ceil() as i64;
    let last = ((center + reach) * fs).floor() as i64;
    let (mut w, mut m) = (0.0, 0.0);
    for k in first..=last {
        let p = e.samples()[k.rem_euclid(n) as usize].norm_sqr();
        w += p;
        m += p * k as f64 / fs;
    }
    if w > 0.0 {
        m / w
    } else {
        center
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RxConfig {
    /// Demux low-pass full width, Hz.
    pub rx_bw: f64,
    /// Centroid search reach around the expected centre, s.
    pub centroid_reach: f64,
    /// Bit-error weight of an erased symbol's bits.
    pub erasure_weight: f64,
    pub bps_test_phases: usize,
    pub bps_window: usize,
    pub pilots: usize,
}

impl RxConfig {
    pub fn for_spacing(dt: f64) -> Self {
        Self {
            rx_bw: 9e9,
            centroid_reach: 0.5 * dt,
            erasure_weight: 0.5,
            bps_test_phases: 32,
            bps_window: 65,
            pilots: 16,
        }
    }
}

/// Per-pulse NLFT result; `None` marks an erasure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseEstimate {
    /// Eigenvalue and channel-compensated `b`.
    pub point: Option<NlftPoint>,
    /// Unit-modulus symbol carried by `b`, before phase recovery.
    pub raw: Option<C>,
}

/// Detects one pulse: centroid refinement, normalization, eigenvalue search,
/// scattering at the eigenvalue, channel compensation.
pub fn detect_pulse(
    baseband: &ComplexEnvelope,
    window: &PulseWindow,
    ns: &NormalizationScales,
    distance_km: f64,
    reach: f64,
) -> PulseEstimate {
    let center = local_centroid(baseband, window.center, reach);
    let q = extract_window(baseband, center, window.half_width, ns);
    let opts = ScatterOptions {
        edge_tol: f64::INFINITY,
        eigen_tol: 1e-6,
        ratio_tol: 1e-3,
    };
    let point = find_eigenvalue_with(&q, DEFAULT_GUESS, &NewtonOptions::default())
        .and_then(|z| zs_scatter_with(&q, z, &opts))
        .map(|p| channel_compensate(&p, ns.xi(distance_km)));
    match point {
        Ok(p) => {
            // the carried phase is -arg b
            let s = (p.b / REFERENCE_B).conj();
            let raw = if s.norm() > 0.0 && s.is_finite() {
                Some(s / s.norm())
            } else {
                None
            };
            PulseEstimate {
                point: raw.map(|_| p),
                raw,
            }
        }
        Err(_) => PulseEstimate {
            point: None,
            raw: None,
        },
    }
}

/// Demultiplexes `channel_offset` and detects every window in order.
pub fn receive_window(
    e: &ComplexEnvelope,
    channel_offset: f64,
    rx_bw: f64,
    ns: &NormalizationScales,
    windows: &[PulseWindow],
    distance_km: f64,
    reach: f64,
) -> Result<Vec<PulseEstimate>> {
    for w in windows {
        w.validate(e)?;
    }
    let base = demux(e, channel_offset, rx_bw)?;
    Ok(windows
        .par_iter()
        .map(|w| detect_pulse(&base, w, ns, distance_km, reach))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpsOutput {
    pub symbols: Vec<C>,
    /// Removed phase per symbol, unwrapped, rad.
    pub phase: Vec<f64>,
}

fn nearest_sq_dist(s: C) -> f64 {
    (s - nearest(s)).norm_sqr()
}

/// Blind phase search over `n_test` phases in `[0, pi/2)` with a centred
/// sliding window of `window` symbols; the estimate is unwrapped by
/// continuity. Zero symbols (erasures) carry no information.
pub fn blind_phase_search(symbols: &[C], n_test: usize, window: usize) -> Result<BpsOutput> {
    if n_test < 4 || window % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "phase search needs n_test >= 4 and an odd window (got {n_test}, {window})"
        )));
    }
    let n = symbols.len();
    let half = window / 2;
    let step = FRAC_PI_2 / n_test as f64;
    // prefix sums of the per-symbol cost for every test phase
    let mut prefix = vec![vec![0.0; n + 1]; n_test];
    for (b, row) in prefix.iter_mut().enumerate() {
        let rot = C::from_polar(1.0, -(b as f64) * step);
        for (k, s) in symbols.iter().enumerate() {
            let cost = if s.norm_sqr() > 0.0 {
                nearest_sq_dist(s * rot)
            } else {
                0.0
            };
            row[k + 1] = row[k] + cost;
        }
    }
    let mut phase = Vec::with_capacity(n);
    let mut prev: Option<f64> = None;
    for k in 0..n {
        let lo = k.saturating_sub(half);
        let hi = (k + half + 1).min(n);
        let best = (0..n_test)
            .min_by(|&x, &y| {
                let cx = prefix[x][hi] - prefix[x][lo];
                let cy = prefix[y][hi] - prefix[y][lo];
                cx.total_cmp(&cy)
            })
            .unwrap_or(0);
        let mut p = best as f64 * step;
        if let Some(q) = prev {
            p += FRAC_PI_2 * ((q - p) / FRAC_PI_2).round();
        }
        prev = Some(p);
        phase.push(p);
    }
    let corrected = symbols
        .iter()
        .zip(&phase)
        .map(|(s, p)| s * C::from_polar(1.0, -p))
        .collect();
    Ok(BpsOutput {
        symbols: corrected,
        phase,
    })
}

/// Rotates by the multiple of `pi/2` that best aligns the leading symbols
/// with the known `pilots`.
pub fn resolve_quadrant(symbols: &mut [C], pilots: &[C]) {
    let corr: C = symbols
        .iter()
        .zip(pilots)
        .map(|(r, t)| r * t.conj())
        .sum();
    if corr.norm() == 0.0 {
        return;
    }
    let k = (corr.arg() / FRAC_PI_2).round();
    let rot = C::from_polar(1.0, -k * FRAC_PI_2);
    for s in symbols.iter_mut() {
        *s *= rot;
    }
}

/// Phase recovery for one channel stream: BPS over the raw estimates, then a
/// pilot-resolved quadrant. Erasures stay `None`.
pub fn recover_phase(raw: &[Option<C>], pilots: &[C], cfg: &RxConfig) -> Result<Vec<Option<C>>> {
    let filled: Vec<C> = raw.iter().map(|s| s.unwrap_or(C::new(0.0, 0.0))).collect();
    let mut out = blind_phase_search(&filled, cfg.bps_test_phases, cfg.bps_window)?.symbols;
    resolve_quadrant(&mut out, pilots);
    Ok(raw.iter().zip(out).map(|(r, s)| r.map(|_| s)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BerCount {
    pub ber: f64,
    pub bit_errors: usize,
    pub erasures: usize,
    pub n_bits: usize,
}

pub fn decide_and_count(rx: &[C], tx_bits: &[u8]) -> Result<BerCount> {
    let wrapped: Vec<Option<C>> = rx.iter().copied().map(Some).collect();
    decide_and_count_with_erasures(&wrapped, tx_bits, 0.5)
}

/// Nearest-point decisions; each erased symbol adds `2 * erasure_weight`
/// errors.
pub fn decide_and_count_with_erasures(
    rx: &[Option<C>],
    tx_bits: &[u8],
    erasure_weight: f64,
) -> Result<BerCount> {
    if 2 * rx.len() != tx_bits.len() {
        return Err(Error::LengthMismatch(2 * rx.len(), tx_bits.len()));
    }
    let mut bit_errors = 0;
    let mut erasures = 0;
    for (s, b) in rx.iter().zip(tx_bits.chunks_exact(2)) {
        match s {
            Some(s) => {
                let d = demap(*s);
                bit_errors += (d[0] != b[0]) as usize + (d[1] != b[1]) as usize;
            }
            None => erasures += 1,
        }
    }
    let n_bits = tx_bits.len();
    let errors = bit_errors as f64 + 2.0 * erasure_weight * erasures as f64;
    let ber = if n_bits == 0 { 0.0 } else { errors / n_bits as f64 };
    Ok(BerCount {
        ber,
        bit_errors,
        erasures,
        n_bits,
    })
}

/// One row of the per-symbol diagnostics export.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolDiagnostic {
    pub channel: usize,
    pub window_index: usize,
    pub point: Option<NlftPoint>,
    pub decided: Option<[u8; 2]>,
    pub correct: bool,
}

pub fn diagnostics_csv(rows: &[SymbolDiagnostic]) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("channel,window_index,zeta_re,zeta_im,b_re,b_im,decided_bits,correct\n");
    for r in rows {
        let _ = write!(out, "{},{},", r.channel, r.window_index);
        match r.point {
            Some(p) => {
                let _ = write!(
                    out,
                    "{:.9e},{:.9e},{:.9e},{:.9e},",
                    p.zeta.re, p.zeta.im, p.b.re, p.b.im
                );
            }
            None => out.push_str(",,,,"),
        }
        match r.decided {
            Some(d) => {
                let _ = write!(out, "{}{}", d[0], d[1]);
            }
            None => {}
        }
        let _ = writeln!(out, ",{}", r.correct as u8);
    }
    out
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::signal::SignalGrid;
    use crate::tx::qpsk_map;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_bits(n: usize, seed: u64) -> Vec<u8> {
        let mut r = rng::stream(seed, &[1]);
        (0..n).map(|_| r.gen_range(0..2u8)).collect()
    }

    #[test]
    fn butterworth_points() {
        assert_eq!(butterworth_power(0.0, 9e9, 4), 1.0);
        assert!((butterworth_power(4.5e9, 9e9, 4) - 0.5).abs() < 1e-15);
        let xt = 10.0 * butterworth_power(10e9, 9e9, 4).log10();
        assert!((xt + 10.0 * (1.0 + (20.0f64 / 9.0).powi(8)).log10()).abs() < 1e-12);
    }

    #[test]
    fn demux_neighbour_suppression_matches_filter() {
        let g = SignalGrid::new(4096, 256e9).unwrap();
        let df = 10e9;
        let bin = g.bin_width() * (df / g.bin_width()).round();
        let e = ComplexEnvelope::from_fn(g, |t| {
            C::new(1.0, 0.0) + C::from_polar(1.0, 2.0 * PI * bin * t)
        });
        let out = demux(&e, 0.0, 9e9).unwrap();
        let spec = out.spectrum();
        let n = g.n_samples() as f64;
        let k = (bin / g.bin_width()).round() as usize;
        let own = spec[0].norm_sqr() / (n * n);
        let neighbour = spec[k].norm_sqr() / (n * n);
        let measured = 10.0 * (neighbour / own).log10();
        let predicted = 10.0 * butterworth_power(bin, 9e9, 4).log10();
        assert!((measured - predicted).abs() < 0.5, "{measured} vs {predicted}");
    }

    #[test]
    fn demux_of_baseband_is_lowpass_and_shift_is_undone() {
        let g = SignalGrid::new(1024, 256e9).unwrap();
        let tc = g.time(512);
        let pulse = ComplexEnvelope::from_fn(g, |t| C::new(1.0 / ((t - tc) / 38e-12).cosh(), 0.0));
        let lp = demux(&pulse, 0.0, 9e9).unwrap();
        let shifted = pulse.frequency_shift(5e9).unwrap();
        let back = demux(&shifted, 5e9, 9e9).unwrap();
        for (a, b) in lp.samples().iter().zip(back.samples()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(demux(&pulse, 127e9, 9e9).is_err());
    }

    #[test]
    fn perfect_symbols_have_zero_ber() {
        let bits = random_bits(4000, 1);
        let s = qpsk_map(&bits).unwrap();
        let c = decide_and_count(&s, &bits).unwrap();
        assert_eq!(c.ber, 0.0);
        assert_eq!(c.n_bits, 4000);
        let mut flipped = bits.clone();
        flipped[17] ^= 1;
        let c = decide_and_count(&s, &flipped).unwrap();
        assert_eq!(c.bit_errors, 1);
        assert!((c.ber - 2.5e-4).abs() < 1e-15);
        assert!(decide_and_count(&s[..3], &bits).is_err());
    }

    #[test]
    fn erasures_count_half() {
        let bits = vec![0, 0, 1, 1];
        let s = qpsk_map(&bits).unwrap();
        let c = decide_and_count_with_erasures(&[Some(s[0]), None], &bits, 0.5).unwrap();
        assert_eq!(c.erasures, 1);
        assert!((c.ber - 0.25).abs() < 1e-15);
    }

    fn erfc(x: f64) -> f64 {
        statrs::function::erf::erfc(x)
    }

    #[test]
    fn qpsk_awgn_ber_matches_closed_form() {
        let es_n0 = 10f64.powf(1.0);
        let n_sym = 200_000;
        let bits = random_bits(2 * n_sym, 5);
        let tx = qpsk_map(&bits).unwrap();
        let sigma = (1.0 / (2.0 * es_n0)).sqrt();
        let mut r = rng::stream(5, &[2]);
        let rx: Vec<C> = tx
            .iter()
            .map(|s| {
                let n: (f64, f64) = (r.sample(StandardNormal), r.sample(StandardNormal));
                s + C::new(n.0, n.1) * sigma
            })
            .collect();
        let c = decide_and_count(&rx, &bits).unwrap();
        let p = 0.5 * erfc((es_n0).sqrt() / 2f64.sqrt());
        let sd = (p * (1.0 - p) / c.n_bits as f64).sqrt();
        assert!((c.ber - p).abs() < 3.0 * sd, "{} vs {p}", c.ber);
    }

    #[test]
    fn bps_identity_and_constant_offset() {
        let bits = random_bits(2000, 3);
        let s = qpsk_map(&bits).unwrap();
        let out = blind_phase_search(&s, 32, 65).unwrap();
        for (a, b) in out.symbols.iter().zip(&s) {
            assert!((a - b).norm() < 1e-12);
        }
        let off = PI / 8.0;
        let rot: Vec<C> = s.iter().map(|x| x * C::from_polar(1.0, off)).collect();
        let out = blind_phase_search(&rot, 32, 65).unwrap();
        for p in &out.phase {
            assert!((p - off).abs() <= PI / 64.0 + 1e-12);
        }
        assert!(blind_phase_search(&s, 3, 65).is_err());
        assert!(blind_phase_search(&s, 32, 64).is_err());
    }

    #[test]
    fn bps_beats_no_recovery_under_wiener_phase_noise() {
        let n = 10_000;
        for seed in 0..5u64 {
            let bits = random_bits(2 * n, 100 + seed);
            let tx = qpsk_map(&bits).unwrap();
            let mut r = rng::stream(100 + seed, &[3]);
            let mut theta = 0.0;
            let rx: Vec<C> = tx
                .iter()
                .map(|s| {
                    let d: f64 = r.sample(StandardNormal);
                    theta += d * 1e-3f64.sqrt();
                    s * C::from_polar(1.0, theta)
                })
                .collect();
            let ser = |x: &[C]| {
                x.iter().zip(&tx).filter(|(a, b)| (nearest(**a) - **b).norm() > 1e-9).count()
            };
            let baseline = ser(&rx);
            let mut bps = blind_phase_search(&rx, 32, 65).unwrap().symbols;
            resolve_quadrant(&mut bps, &tx[..16]);
            assert!(ser(&bps) < baseline, "seed {seed}: {} vs {baseline}", ser(&bps));
        }
    }

    #[test]
    fn quadrant_from_pilots() {
        let bits = random_bits(200, 4);
        let tx = qpsk_map(&bits).unwrap();
        let mut rx: Vec<C> = tx.iter().map(|s| s * C::new(0.0, 1.0)).collect();
        resolve_quadrant(&mut rx, &tx[..16]);
        for (a, b) in rx.iter().zip(&tx) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn detects_single_soliton_symbol() {
        let g = SignalGrid::new(2048, 256e9).unwrap();
        let t0 = 38e-12;
        let ns = NormalizationScales::new(t0, 1e-3, 1000.0).unwrap();
        let tc = g.time(1000) + 1.3e-12;
        let sym = C::from_polar(1.0, 3.0 * PI / 4.0);
        let e = ComplexEnvelope::from_fn(g, |t| sym * (1e-3f64.sqrt() / ((t - tc) / t0).cosh()));
        let w = PulseWindow {
            channel: 1,
            center: tc + 20e-12,
            half_width: 500e-12,
        };
        let est = detect_pulse(&e, &w, &ns, 0.0, 125e-12);
        let raw = est.raw.unwrap();
        assert!((raw - sym).norm() < 1e-6, "{raw}");
        assert!((est.point.unwrap().zeta - C::new(0.0, 0.5)).norm() < 1e-3);
    }

    #[test]
    fn window_extraction_wraps() {
        let g = SignalGrid::new(64, 1e12).unwrap();
        let e = ComplexEnvelope::from_fn(g, |t| C::new(t * 1e12, 0.0));
        let ns = NormalizationScales::new(1e-12, 1.0, 1.0).unwrap();
        let q = extract_window(&e, 0.0, 2e-12, &ns);
        let vals: Vec<f64> = q.q.iter().map(|s| s.re.round()).collect();
        assert_eq!(vals, vec![62.0, 63.0, 0.0, 1.0, 2.0]);
        assert!((q.tau0 + 2.0).abs() < 1e-12);
    }

    #[test]
    fn diagnostics_layout() {
        let rows = [
            SymbolDiagnostic {
                channel: 2,
                window_index: 0,
                point: Some(NlftPoint {
                    zeta: C::new(0.0, 0.5),
                    a: C::new(0.0, 0.0),
                    b: C::new(-1.0, 0.0),
                }),
                decided: Some([0, 1]),
                correct: true,
            },
            SymbolDiagnostic {
                channel: 2,
                window_index: 1,
                point: None,
                decided: None,
                correct: false,
            },
        ];
        let csv = diagnostics_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].ends_with(",01,1"));
        assert_eq!(lines[2], "2,1,,,,,,0");
    }

    #[test]
    fn angle_wrapping() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
    }
}
