//! IQ Mach-Zehnder modulator biased at null.
//!
//! Each quadrature passes its drive through a single-pole electro-optic
//! response and then the sine field transfer of a push-pull MZM at null bias.

use super::{MzmParams, SolitonParams};
use crate::error::{Error, Result};
use crate::fft;
use crate::signal::{ComplexEnvelope, SignalGrid};
use num_complex::Complex64;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Single-pole low-pass `1 / (1 + i f / f3db)` applied to a real waveform.
pub fn single_pole_lowpass(x: &[f64], sample_rate: f64, f3db: f64) -> Vec<f64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft::forward(&mut buf);
    let freqs = fft::frequencies(buf.len(), sample_rate);
    for (v, f) in buf.iter_mut().zip(&freqs) {
        *v /= Complex64::new(1.0, f / f3db);
    }
    fft::inverse(&mut buf);
    buf.iter().map(|c| c.re).collect()
}

pub fn mzm_modulate(
    grid: SignalGrid,
    carrier_power: f64,
    drive_i: &[f64],
    drive_q: &[f64],
    mp: &MzmParams,
) -> Result<ComplexEnvelope> {
    let n = grid.n_samples();
    if drive_i.len() != n || drive_q.len() != n {
        return Err(Error::LengthMismatch(drive_i.len().max(drive_q.len()), n));
    }
    mp.validate()?;
    let vmax = drive_i
        .iter()
        .chain(drive_q)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if vmax > mp.vpi {
        return Err(Error::OverModulation { v: vmax, vpi: mp.vpi });
    }
    let fi = single_pole_lowpass(drive_i, grid.sample_rate(), mp.eo_bandwidth);
    let fq = single_pole_lowpass(drive_q, grid.sample_rate(), mp.eo_bandwidth);
    let k = PI * mp.drive_gain / (2.0 * mp.vpi);
    let amp = carrier_power.sqrt() * 10f64.powf(-mp.il_db / 20.0) * FRAC_1_SQRT_2;
    let samples = fi
        .iter()
        .zip(&fq)
        .map(|(&vi, &vq)| amp * Complex64::new((k * vi).sin(), (k * vq).sin()))
        .collect();
    ComplexEnvelope::new(grid, samples)
}

/// Drive of a single `e^{i pi/4}` soliton symbol on a fine reference grid.
fn reference_drive(sp: &SolitonParams) -> (SignalGrid, Vec<f64>, Vec<f64>) {
    let fs = 2048e9;
    let n = 8192;
    let grid = SignalGrid::new(n, fs).expect("static grid");
    let tc = grid.duration() / 2.0;
    let s = Complex64::from_polar(1.0, PI / 4.0);
    let (i, q) = grid
        .times()
        .map(|t| {
            let v = s * sp.peak_drive / ((t - tc) / sp.t0).cosh();
            (v.re, v.im)
        })
        .unzip();
    (grid, i, q)
}

/// Peak attenuation relative to the carrier, dB, for the reference drive.
pub fn modulation_penalty(mp: &MzmParams, sp: &SolitonParams) -> Result<f64> {
    let (grid, i, q) = reference_drive(sp);
    let out = mzm_modulate(grid, 1.0, &i, &q, mp)?;
    Ok(-10.0 * out.peak_power().log10())
}

/// Fits `drive_gain` in (0, 10] so the reference drive shows `target_db` of
/// peak attenuation.
pub fn calibrate_penalty(mp: &MzmParams, sp: &SolitonParams, target_db: f64) -> Result<MzmParams> {
    const MAX_GAIN: f64 = 10.0;
    let penalty = |g: f64| modulation_penalty(&MzmParams { drive_gain: g, ..*mp }, sp);
    // transfer stays monotone only while the filtered peak phase is below pi/2
    let (grid, i, q) = reference_drive(sp);
    let peak_v = single_pole_lowpass(&i, grid.sample_rate(), mp.eo_bandwidth)
        .iter()
        .chain(single_pole_lowpass(&q, grid.sample_rate(), mp.eo_bandwidth).iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let g_top = if peak_v > 0.0 {
        MAX_GAIN.min(mp.vpi / peak_v)
    } else {
        MAX_GAIN
    };
    let best = penalty(g_top)?;
    if !(target_db > best) || !target_db.is_finite() {
        return Err(Error::UnreachablePenalty { target_db });
    }
    let (mut lo, mut hi) = (0.0, g_top);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if penalty(mid)? > target_db {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(MzmParams {
        drive_gain: 0.5 * (lo + hi),
        ..*mp
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SignalGrid {
        SignalGrid::new(1024, 256e9).unwrap()
    }

    #[test]
    fn zero_drive_extinguishes() {
        let z = vec![0.0; 1024];
        let out = mzm_modulate(grid(), 1e-3, &z, &z, &MzmParams::default()).unwrap();
        assert_eq!(out.peak_power(), 0.0);
    }

    #[test]
    fn dc_drive_at_full_swing() {
        let mp = MzmParams {
            drive_gain: 2.0,
            ..MzmParams::default()
        };
        let v = vec![mp.vpi / mp.drive_gain; 1024];
        let z = vec![0.0; 1024];
        let out = mzm_modulate(grid(), 1.0, &v, &z, &mp).unwrap();
        let want = 10f64.powf(-mp.il_db / 20.0) * FRAC_1_SQRT_2;
        for s in out.samples() {
            assert!((s.re - want).abs() < 1e-12);
            assert!(s.im.abs() < 1e-12);
        }
    }

    #[test]
    fn over_modulation_rejected() {
        let mp = MzmParams::default();
        let v = vec![mp.vpi * 1.01; 1024];
        assert!(matches!(
            mzm_modulate(grid(), 1.0, &v, &v, &mp),
            Err(Error::OverModulation { .. })
        ));
    }

    #[test]
    fn calibration_hits_target() {
        let sp = SolitonParams::default();
        let mp = calibrate_penalty(&MzmParams::default(), &sp, 13.5).unwrap();
        assert!(mp.drive_gain > 0.0 && mp.drive_gain <= 10.0);
        let got = modulation_penalty(&mp, &sp).unwrap();
        assert!((got - 13.5).abs() < 0.05, "{got}");
    }

    #[test]
    fn calibration_at_insertion_loss_is_unreachable() {
        let sp = SolitonParams::default();
        let r = calibrate_penalty(&MzmParams::default(), &sp, 4.5);
        assert!(matches!(r, Err(Error::UnreachablePenalty { .. })));
    }

    #[test]
    fn larger_penalty_needs_less_gain() {
        let sp = SolitonParams::default();
        let base = MzmParams::default();
        let g13 = calibrate_penalty(&base, &sp, 13.5).unwrap().drive_gain;
        let g20 = calibrate_penalty(&base, &sp, 20.0).unwrap().drive_gain;
        assert!(g20 < g13);
        // bisection oracle on the raw penalty curve, coarse grid scan
        let pen = |g: f64| modulation_penalty(&MzmParams { drive_gain: g, ..base }, &sp).unwrap();
        let scan: Vec<f64> = (1..=100).map(|k| k as f64 * 0.1).collect();
        let crossing = |target: f64| scan.iter().copied().find(|&g| pen(g) <= target).unwrap();
        assert!((crossing(20.0) - g20).abs() <= 0.1 + 1e-9);
        assert!((crossing(13.5) - g13).abs() <= 0.1 + 1e-9);
    }
}
