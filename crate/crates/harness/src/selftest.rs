//! Built-in oracle suite: every closed-form reference and structural
//! invariant the model is expected to satisfy, runnable from the binary.

use crate::oracles;
use num_complex::Complex64 as C;
use rand_distr::{Distribution, StandardNormal};
use solitx_core::budget::{cascade, check_gc_limit, paper_chain, PAPER_SOURCE_DBM};
use solitx_core::fiber::{
    edfa_amplify, guiding_center_launch_power, osnr_estimate, propagate_link, soliton_power, ssfm,
    EdfaParams, FiberParams, LinkPropagator, StepControl, OSNR_REF_BANDWIDTH,
};
use solitx_core::nlft::{
    find_eigenvalue, transfer_matrix, zs_scatter, zs_scatter_with, Mat, NormalizationScales,
    NormalizedField, ScatterOptions, DEFAULT_GUESS,
};
use solitx_core::rx::{blind_phase_search, decide_and_count, detect_pulse, wrap_angle, PulseWindow};
use solitx_core::signal::{ComplexEnvelope, SignalGrid};
use solitx_core::tx::{
    crow_power_response, phase_noise, qpsk_map, timing_solve, CrowFilterSpec, TAU_WG_OPTIONS,
};
use solitx_core::units::{OpticalConstants, PS};
use solitx_core::{fft, rng};
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Outcome of one named oracle group.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub checks: Vec<CheckResult>,
    /// Deliberately broken check; it must fail for the suite to pass.
    pub negative_control: CheckResult,
}

impl SelftestReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass) && !self.negative_control.pass
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(s, "{} {:<28} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        let n = &self.negative_control;
        let _ = writeln!(
            s,
            "{} {:<28} negative control {} ({})",
            if n.pass { "FAIL" } else { "PASS" },
            n.name,
            if n.pass { "unexpectedly passed" } else { "failed as designed" },
            n.detail
        );
        let passed = self.checks.iter().filter(|c| c.pass).count();
        let _ = writeln!(
            s,
            "{passed}/{} oracle groups passed; overall {}",
            self.checks.len(),
            if self.pass() { "PASS" } else { "FAIL" }
        );
        s
    }
}

type Outcome = Result<String, String>;

fn check(name: &'static str, f: impl FnOnce() -> Outcome) -> CheckResult {
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
        Ok(Ok(detail)) => CheckResult { name, pass: true, detail },
        Ok(Err(detail)) => CheckResult { name, pass: false, detail },
        Err(_) => CheckResult {
            name,
            pass: false,
            detail: "panicked".into(),
        },
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn sech(x: f64) -> f64 {
    1.0 / x.cosh()
}

fn sech_field(amp: f64, h: f64, half: f64) -> NormalizedField {
    let n = (2.0 * half / h).round() as usize;
    NormalizedField::from_fn(h, -half + 0.5 * h, n, |t| C::new(amp * sech(t), 0.0))
        .expect("valid field")
}

fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let mut m = [[C::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    m
}

/// Largest relative element error between the whole-window transfer matrix
/// and the product over its two halves, the halves sampled `coarsen` times
/// more sparsely.
pub fn layer_doubling_error(coarsen: usize) -> f64 {
    let q = sech_field(1.1, 0.01, 20.0);
    let m = q.len() / 2 + 17;
    let (l, r) = q.split_at(m);
    let thin = |f: &NormalizedField| {
        if coarsen <= 1 {
            return f.clone();
        }
        let samples: Vec<C> = f.q.iter().step_by(coarsen).copied().collect();
        NormalizedField::new(f.h * coarsen as f64, f.tau0, samples).expect("valid field")
    };
    let (l, r) = (thin(&l), thin(&r));
    let mut worst: f64 = 0.0;
    for zeta in [C::new(0.0, 0.6), C::new(0.4, 0.1), C::new(-0.3, 0.0)] {
        let whole = transfer_matrix(&q, zeta);
        let parts = mat_mul(&transfer_matrix(&r, zeta), &transfer_matrix(&l, zeta));
        for i in 0..2 {
            for j in 0..2 {
                let e = (whole[i][j] - parts[i][j]).norm() / whole[i][j].norm().max(1.0);
                worst = worst.max(e);
            }
        }
    }
    worst
}

const LAYER_TOL: f64 = 1e-8;

fn satsuma_yajima() -> Outcome {
    let zetas = [
        C::new(0.0, 0.3),
        C::new(0.5, 0.2),
        C::new(-0.4, 0.7),
        C::new(0.1, 1.2),
        C::new(0.8, 0.05),
        C::new(-1.0, 0.4),
        C::new(0.25, 0.25),
        C::new(0.0, 1.5),
        C::new(1.3, 0.6),
        C::new(-0.6, 0.15),
    ];
    let mut worst: f64 = 0.0;
    for amp in [0.8, 1.0, 1.4] {
        let q = sech_field(amp, 0.002, 30.0);
        for z in zetas {
            let p = zs_scatter_with(&q, z, &ScatterOptions::default()).map_err(|e| e.to_string())?;
            worst = worst.max((p.a - oracles::sech_a(amp, z)).norm());
        }
    }
    ensure(worst < 1e-6, || format!("max |a - oracle| = {worst:.2e}"))?;
    Ok(format!("30 points, max |a - oracle| = {worst:.1e}"))
}

fn eigenvalues() -> Outcome {
    let mut worst: f64 = 0.0;
    for amp in [0.8, 1.0, 1.4] {
        let q = sech_field(amp, 0.002, 30.0);
        let z = find_eigenvalue(&q, DEFAULT_GUESS).map_err(|e| e.to_string())?;
        worst = worst.max((z - oracles::sech_eigenvalues(amp)[0]).norm());
    }
    ensure(worst < 1e-5, || format!("max eigenvalue error {worst:.2e}"))?;
    let none = find_eigenvalue(&sech_field(0.4, 0.01, 30.0), DEFAULT_GUESS);
    ensure(none.is_err(), || "A = 0.4 produced an eigenvalue".into())?;
    Ok(format!("max |zeta - i(A - 1/2)| = {worst:.1e}; A = 0.4 has none"))
}

fn rectangle() -> Outcome {
    let (amp, len, n) = (0.8, 3.0, 300);
    let h = len / n as f64;
    let q = NormalizedField::from_fn(h, 0.5 * h, n, |_| C::new(amp, 0.0)).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for z in [C::new(0.4, 0.3), C::new(-0.2, 0.1), C::new(1.0, 0.0)] {
        worst = worst.max((transfer_matrix(&q, z)[0][0] - oracles::rectangle_a(amp, len, z)).norm());
    }
    ensure(worst < 1e-8, || format!("max error {worst:.2e}"))?;
    Ok(format!("max |a - oracle| = {worst:.1e}"))
}

fn free_scattering() -> Outcome {
    let q = NormalizedField::new(0.1, -5.0, vec![C::new(0.0, 0.0); 101]).map_err(|e| e.to_string())?;
    for z in [C::new(0.3, 0.2), C::new(-1.0, 0.5), C::new(0.7, 0.0)] {
        let p = zs_scatter(&q, z).map_err(|e| e.to_string())?;
        ensure((p.a - 1.0).norm() < 1e-14 && p.b.norm() < 1e-14, || format!("{z}: a {} b {}", p.a, p.b))?;
        let t = transfer_matrix(&q, z);
        ensure(t[0][1].norm() < 1e-14 && t[1][0].norm() < 1e-14, || "off-diagonal transfer".into())?;
    }
    Ok("a = 1, b = 0, diagonal transfer".into())
}

fn layer_doubling() -> Outcome {
    let e = layer_doubling_error(1);
    ensure(e < LAYER_TOL, || format!("relative error {e:.2e}"))?;
    Ok(format!("relative error {e:.1e}"))
}

fn phase_and_shift() -> Outcome {
    let h = 0.005;
    let q = sech_field(1.0, h, 30.0);
    let point = |q: &NormalizedField| {
        let z = find_eigenvalue(q, DEFAULT_GUESS).map_err(|e| e.to_string())?;
        zs_scatter(q, z).map_err(|e| e.to_string())
    };
    let p0 = point(&q)?;
    ensure((p0.b + 1.0).norm() < 1e-5, || format!("b(sech) = {}", p0.b))?;
    for theta in [PI / 4.0, PI / 2.0, PI] {
        let rot = C::from_polar(1.0, theta);
        let qr = NormalizedField {
            q: q.q.iter().map(|s| s * rot).collect(),
            ..q.clone()
        };
        let p = point(&qr)?;
        ensure((p.b - p0.b * rot.conj()).norm() < 1e-8, || format!("theta {theta}: b {}", p.b))?;
    }
    let shifted = NormalizedField::from_fn(h, q.tau0, q.len(), |t| C::new(sech(t - 1.0), 0.0))
        .map_err(|e| e.to_string())?;
    let p1 = point(&shifted)?;
    let expect = p0.b * (C::new(0.0, -2.0) * p0.zeta).exp();
    let err = (p1.b - expect).norm() / expect.norm();
    ensure(err < 1e-6, || format!("shift covariance error {err:.2e}"))?;
    Ok(format!("b(sech) = -1, phase counter-rotation, shift error {err:.1e}"))
}

fn lossless(beta2: f64, gamma: f64) -> FiberParams {
    FiberParams {
        alpha: 0.0,
        beta2,
        gamma,
        span_length: 50.0,
    }
}

fn soliton_env(g: SignalGrid, p0: f64, t0: f64) -> ComplexEnvelope {
    let tc = g.duration() / 2.0;
    ComplexEnvelope::from_fn(g, |t| C::new(p0.sqrt() * sech((t - tc) / t0), 0.0))
}

fn dispersion() -> Outcome {
    let g = SignalGrid::new(4096, 512e9).map_err(|e| e.to_string())?;
    let (t0, beta2, z) = (20e-12, -20.0, 60.0);
    let tc = g.duration() / 2.0;
    let e = ComplexEnvelope::from_fn(g, |t| C::new((-(t - tc).powi(2) / (2.0 * t0 * t0)).exp(), 0.0));
    let out = ssfm(&e, &lossless(beta2, 0.0), z, &StepControl::Fixed { dz: 7.0 }).map_err(|e| e.to_string())?;
    let b2z = beta2 * PS * PS * z;
    let oracle: Vec<C> = g.times().map(|t| oracles::chirped_gaussian(t - tc, t0, b2z)).collect();
    let err = oracles::rel_l2(out.samples(), &oracle);
    ensure(err < 1e-3, || format!("relative L2 error {err:.2e}"))?;
    Ok(format!("relative L2 error {err:.1e} (broadening x{:.3})", oracles::gaussian_broadening(t0, b2z)))
}

fn fwhm(e: &ComplexEnvelope) -> f64 {
    let p: Vec<f64> = e.powers().collect();
    let (imax, peak) = p
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |b, (i, v)| if v > b.1 { (i, v) } else { b });
    let half = peak / 2.0;
    let crossing = |step: isize| {
        let mut i = imax as isize;
        while p[(i + step) as usize] >= half {
            i += step;
        }
        let (a, b) = (p[i as usize], p[(i + step) as usize]);
        i as f64 + step as f64 * (a - half) / (a - b)
    };
    (crossing(1) - crossing(-1)) * e.grid().dt()
}

fn soliton_invariance() -> Outcome {
    let fp = lossless(-2.16, 1.6);
    let t0 = 38e-12;
    let p0 = soliton_power(&fp, t0).map_err(|e| e.to_string())?;
    let g = SignalGrid::new(2048, 512e9).map_err(|e| e.to_string())?;
    let e = soliton_env(g, p0, t0);
    let z = 20.0 * fp.dispersion_length(t0);
    let out = ssfm(&e, &fp, z, &StepControl::default()).map_err(|e| e.to_string())?;
    let dp = (out.peak_power() - p0).abs() / p0;
    let w0 = 2.0 * (2f64.sqrt() + 1.0).ln() * t0;
    let dw = (fwhm(&out) - w0).abs() / w0;
    ensure(dp < 0.01 && dw < 0.01, || format!("peak drift {dp:.2e}, width drift {dw:.2e}"))?;
    Ok(format!("20 L_D: peak drift {dp:.1e}, width drift {dw:.1e}"))
}

/// Error ratio when the SSFM step is halved.
pub fn ssfm_halving_ratio() -> Result<f64, String> {
    let fp = lossless(-2.16, 1.6);
    let t0 = 38e-12;
    let g = SignalGrid::new(1024, 256e9).map_err(|e| e.to_string())?;
    let p = 2.25 * soliton_power(&fp, t0).map_err(|e| e.to_string())?;
    let e = soliton_env(g, p, t0);
    let z = 400.0;
    let run = |dz: f64| ssfm(&e, &fp, z, &StepControl::Fixed { dz }).map_err(|e| e.to_string());
    let reference = run(z / 4096.0)?;
    let coarse = oracles::rel_l2(run(z / 64.0)?.samples(), reference.samples());
    let fine = oracles::rel_l2(run(z / 128.0)?.samples(), reference.samples());
    Ok(coarse / fine)
}

fn ssfm_order() -> Outcome {
    let r = ssfm_halving_ratio()?;
    ensure(r >= 4.0, || format!("halving ratio {r:.2}"))?;
    Ok(format!("error ratio on halving dz: {r:.2}"))
}

fn energy() -> Outcome {
    let g = SignalGrid::new(1024, 256e9).map_err(|e| e.to_string())?;
    let e = soliton_env(g, 3e-3, 38e-12);
    let out = ssfm(&e, &lossless(-0.85, 1.6), 50.0, &StepControl::default()).map_err(|e| e.to_string())?;
    let de = (out.energy() - e.energy()).abs() / e.energy();
    ensure(de < 1e-10, || format!("relative energy change {de:.2e}"))?;
    Ok(format!("relative energy change {de:.1e}"))
}

fn linear_link() -> Outcome {
    let fp = FiberParams {
        gamma: 0.0,
        ..FiberParams::nzdsf()
    };
    let ep = EdfaParams::new(fp.span_loss_db(), 5.0).noiseless();
    let g = SignalGrid::new(1024, 256e9).map_err(|e| e.to_string())?;
    let e = soliton_env(g, 1e-3, 20e-12);
    let n = 6;
    let out = propagate_link(&e, n, &fp, &ep, &StepControl::default(), 1).map_err(|e| e.to_string())?;
    let beta2 = fp.beta2 * PS * PS;
    let z = n as f64 * fp.span_length;
    let mut spec = e.samples().to_vec();
    fft::forward(&mut spec);
    for (s, f) in spec.iter_mut().zip(g.frequencies()) {
        let w = 2.0 * PI * f;
        *s *= C::from_polar(1.0, 0.5 * beta2 * w * w * z);
    }
    fft::inverse(&mut spec);
    let err = oracles::rel_l2(out.envelope.samples(), &spec);
    ensure(err < 1e-9, || format!("relative error {err:.2e}"))?;
    Ok(format!("6 transparent spans vs one spectral filter: {err:.1e}"))
}

fn ase() -> Outcome {
    let c = OpticalConstants::default();
    let ep = EdfaParams::new(10.0, 5.0);
    let rho = ep.ase_psd(&c);
    let oracle = oracles::ase_psd(10.0, 5.0, c.carrier_frequency);
    ensure((rho - oracle).abs() / oracle < 1e-12, || format!("{rho:e} vs {oracle:e}"))?;
    let fp = FiberParams::nzdsf();
    let g = SignalGrid::new(256, 256e9).map_err(|e| e.to_string())?;
    let mut link = LinkPropagator::new(
        soliton_env(g, 1e-3, 38e-12),
        fp,
        EdfaParams::new(fp.span_loss_db(), 5.0),
        StepControl::default(),
        1,
    )
    .map_err(|e| e.to_string())?;
    link.advance_to(75).map_err(|e| e.to_string())?;
    let acc = link.ase_psd() / (75.0 * rho);
    ensure((acc - 1.0).abs() < 1e-12, || format!("75-span accumulation ratio {acc}"))?;
    // noise variance per sample
    let big = SignalGrid::new(1 << 16, 256e9).map_err(|e| e.to_string())?;
    let out = edfa_amplify(&ComplexEnvelope::zeros(big), &ep, &c, 3).map_err(|e| e.to_string())?;
    let var = out.envelope.average_power(None).map_err(|e| e.to_string())?;
    let rel = (var / (rho * big.sample_rate()) - 1.0).abs();
    ensure(rel < 0.02, || format!("sample variance off by {rel:.3}"))?;
    Ok(format!("rho = {rho:.3e} W/Hz, 75 spans additive, variance within {:.1}%", 100.0 * rel))
}

fn osnr_law() -> Outcome {
    let g = SignalGrid::new(256, 256e9).map_err(|e| e.to_string())?;
    let e = soliton_env(g, 1e-3, 38e-12);
    let rho = oracles::ase_psd(10.0, 5.0, 193.4e12);
    let inf = osnr_estimate(&e, 0.0, OSNR_REF_BANDWIDTH).map_err(|e| e.to_string())?;
    ensure(inf.is_infinite(), || "noiseless OSNR not infinite".into())?;
    let a = osnr_estimate(&e, 10.0 * rho, OSNR_REF_BANDWIDTH).map_err(|e| e.to_string())?;
    let b = osnr_estimate(&e, 20.0 * rho, OSNR_REF_BANDWIDTH).map_err(|e| e.to_string())?;
    let d = a - b;
    ensure((d - 3.0103).abs() < 1e-3, || format!("doubling drop {d:.4} dB"))?;
    Ok(format!("doubling the spans costs {d:.3} dB"))
}

fn qpsk_awgn() -> Outcome {
    let es_n0: f64 = 10.0;
    let n_sym = 200_000;
    let mut r = rng::stream(11, &[0x5157]);
    let bits: Vec<u8> = (0..2 * n_sym).map(|_| rand::Rng::gen_range(&mut r, 0..2u8)).collect();
    let sym = qpsk_map(&bits).map_err(|e| e.to_string())?;
    let sigma = (0.5 / es_n0).sqrt();
    let noisy: Vec<C> = sym
        .iter()
        .map(|s| {
            let nr: f64 = StandardNormal.sample(&mut r);
            let ni: f64 = StandardNormal.sample(&mut r);
            s + C::new(nr, ni) * sigma
        })
        .collect();
    let got = decide_and_count(&noisy, &bits).map_err(|e| e.to_string())?;
    let p = oracles::qpsk_ber(es_n0);
    let sd = (p * (1.0 - p) / got.n_bits as f64).sqrt();
    let z = (got.ber - p) / sd;
    ensure(z.abs() < 3.0, || format!("BER {:.3e} vs {p:.3e} ({z:.1} sigma)", got.ber))?;
    Ok(format!("BER {:.3e} vs erfc {p:.3e} ({z:+.1} sigma)", got.ber))
}

fn budget() -> Outcome {
    let report = cascade(&paper_chain(), PAPER_SOURCE_DBM, 4).map_err(|e| e.to_string())?;
    for &p in &report.final_peak_power {
        ensure((p + 20.6).abs() < 0.05, || format!("final peak {p:.2} dBm"))?;
    }
    let gc = check_gc_limit(&report, 4).map_err(|e| e.to_string())?;
    ensure(gc.pass && gc.margin_display() == 0.0, || format!("GC margin {:.2} dB", gc.margin_db))?;
    Ok(format!(
        "final {:.2} dBm per channel, GC total {:.2} dBm, margin {:.1} dB",
        report.final_peak_power[0],
        gc.total_dbm,
        gc.margin_display()
    ))
}

fn wiener() -> Outcome {
    let lw = 80e3;
    let g = SignalGrid::new(1002, 1e9).map_err(|e| e.to_string())?;
    let e = ComplexEnvelope::from_fn(g, |_| C::new(1.0, 0.0));
    let n = 10_000;
    let var = (0..n)
        .map(|s| {
            let out = phase_noise(&e, lw, s);
            let x = out.samples();
            (x[1000] / x[0]).arg().powi(2)
        })
        .sum::<f64>()
        / n as f64;
    let oracle = oracles::wiener_variance(lw, 1e-6);
    let rel = (var / oracle - 1.0).abs();
    ensure(rel < 0.05, || format!("variance {var:.4} vs {oracle:.4}"))?;
    Ok(format!("1 us increment variance {var:.4} vs {oracle:.4} rad^2"))
}

fn timing_lattice() -> Outcome {
    let mut lines = Vec::new();
    for (dt, tw) in [(250.0, 1000.0), (150.0, 600.0), (100.0, 500.0)] {
        let sol = timing_solve(dt * PS, tw * PS, &TAU_WG_OPTIONS).map_err(|e| e.to_string())?;
        let all = oracles::enumerate_timings(dt * PS, tw * PS, &TAU_WG_OPTIONS, 1e-12);
        let found = all
            .iter()
            .any(|&(wg, awg)| (wg - sol.tau_wg).abs() < 1e-13 && (awg - sol.tau_awg).abs() < 0.5e-12);
        ensure(found, || format!("Dt {dt}: solver pair not in the enumerated set {all:?}"))?;
        let mut c = sol.centers;
        c.sort_by(f64::total_cmp);
        let gaps: Vec<f64> = (0..4)
            .map(|i| if i < 3 { c[i + 1] - c[i] } else { tw * PS - c[3] + c[0] } / PS)
            .collect();
        lines.push(format!(
            "Dt {dt}: tau_wg {:.0} ps, cyclic gaps {gaps:.0?}",
            sol.tau_wg / PS
        ));
    }
    let bad = timing_solve(200.0 * PS, 1000.0 * PS, &TAU_WG_OPTIONS);
    let none = oracles::enumerate_timings(200.0 * PS, 1000.0 * PS, &TAU_WG_OPTIONS, 1e-12);
    ensure(bad.is_err() && none.is_empty(), || "Dt 200 / TW 1000 should be infeasible".into())?;
    Ok(lines.join("; "))
}

fn crow_response() -> Outcome {
    let spec = CrowFilterSpec::drop_2nd_order(0.0);
    let centre = crow_power_response(&spec, 0.0);
    let off = crow_power_response(&spec, 10e9);
    let rej = 10.0 * (centre / off).log10();
    let oracle = oracles::butterworth_rejection_db(2, 6.5e9, 10e9);
    ensure((rej - oracle).abs() < 1e-9, || format!("{rej:.3} vs {oracle:.3} dB"))?;
    let edge = 10.0 * (centre / crow_power_response(&spec, 3.25e9)).log10();
    ensure((edge - 3.0103).abs() < 1e-3, || format!("edge {edge:.3} dB"))?;
    Ok(format!("10 GHz rejection {rej:.2} dB, band edge {edge:.3} dB"))
}

fn bps() -> Outcome {
    let mut r = rng::stream(5, &[0x425053]);
    let bits: Vec<u8> = (0..2000).map(|_| rand::Rng::gen_range(&mut r, 0..2u8)).collect();
    let sym = qpsk_map(&bits).map_err(|e| e.to_string())?;
    let rot = C::from_polar(1.0, PI / 8.0);
    let rx: Vec<C> = sym.iter().map(|s| s * rot).collect();
    let out = blind_phase_search(&rx, 32, 65).map_err(|e| e.to_string())?;
    let worst = out
        .phase
        .iter()
        .map(|&p| {
            // the estimate is defined modulo a quarter turn
            let d = wrap_angle(4.0 * (p - PI / 8.0)) / 4.0;
            d.abs()
        })
        .fold(0.0, f64::max);
    let bound = PI / (2.0 * 32.0);
    ensure(worst <= bound + 1e-12, || format!("phase error {worst:.4} > {bound:.4}"))?;
    Ok(format!("pi/8 offset recovered within {worst:.4} rad (bound {bound:.4})"))
}

fn phase_channel() -> Outcome {
    let fp = FiberParams::nzdsf();
    let t0 = 38e-12;
    let p = guiding_center_launch_power(&fp, t0).map_err(|e| e.to_string())?;
    let g = SignalGrid::new(4096, 256e9).map_err(|e| e.to_string())?;
    let tc = g.time(2048);
    let e = ComplexEnvelope::from_fn(g, |t| C::new(0.0, p.sqrt() * sech((t - tc) / t0)));
    let ep = EdfaParams::new(fp.span_loss_db(), 5.0).noiseless();
    let ns = NormalizationScales::new(t0, p, fp.dispersion_length(t0)).map_err(|e| e.to_string())?;
    let mut link = LinkPropagator::new(e, fp, ep, StepControl::default(), 1).map_err(|e| e.to_string())?;
    let w = PulseWindow {
        channel: 1,
        center: tc,
        half_width: 500e-12,
    };
    let mut phases = Vec::new();
    for km in [500.0, 1000.0, 1500.0] {
        link.advance_to((km / fp.span_length) as usize).map_err(|e| e.to_string())?;
        let pt = detect_pulse(link.field(), &w, &ns, km, 100e-12)
            .point
            .ok_or("eigenvalue search failed")?;
        phases.push(pt.b.arg());
    }
    let spread = phases
        .iter()
        .map(|&x| wrap_angle(x - phases[0]).abs())
        .fold(0.0, f64::max);
    ensure(spread < 1e-2, || format!("arg b spread {spread:.2e} rad"))?;
    Ok(format!("arg b spread over 500/1000/1500 km: {spread:.1e} rad"))
}

/// Named oracle groups, in report order.
const GROUPS: &[(&str, fn() -> Outcome)] = &[
    ("zs-satsuma-yajima", satsuma_yajima),
    ("zs-eigenvalue-scaling", eigenvalues),
    ("zs-rectangle", rectangle),
    ("zs-free-scattering", free_scattering),
    ("zs-layer-doubling", layer_doubling),
    ("zs-phase-and-shift", phase_and_shift),
    ("ssfm-chirped-gaussian", dispersion),
    ("ssfm-soliton-20-ld", soliton_invariance),
    ("ssfm-second-order", ssfm_order),
    ("ssfm-energy", energy),
    ("link-linear-equivalence", linear_link),
    ("edfa-ase", ase),
    ("osnr-doubling-law", osnr_law),
    ("qpsk-awgn-ber", qpsk_awgn),
    ("budget-db-sum", budget),
    ("wiener-phase-noise", wiener),
    ("timing-lattice", timing_lattice),
    ("crow-butterworth", crow_response),
    ("bps-offset", bps),
    ("phase-channel", phase_channel),
];

pub fn group_names() -> impl Iterator<Item = &'static str> {
    GROUPS.iter().map(|g| g.0)
}

/// Runs one named group.
pub fn run_group(name: &str) -> Option<CheckResult> {
    GROUPS.iter().find(|g| g.0 == name).map(|&(n, f)| check(n, f))
}

/// Runs every oracle group and the negative control.
pub fn selftest() -> SelftestReport {
    let checks = GROUPS.iter().map(|&(n, f)| check(n, f)).collect();
    let negative_control = check("zs-layer-doubling-coarse", || {
        let e = layer_doubling_error(100);
        ensure(e < LAYER_TOL, || format!("relative error {e:.2e} with 100x coarser halves"))?;
        Ok(format!("relative error {e:.1e}"))
    });
    SelftestReport {
        checks,
        negative_control,
    }
}
