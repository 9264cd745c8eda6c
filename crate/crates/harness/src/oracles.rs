//! Closed-form references the model is checked against. Nothing here calls
//! into the model; each function is an independent derivation.

use num_complex::Complex64 as C;
use std::f64::consts::PI;

const I: C = C::new(0.0, 1.0);

/// Complex Gamma function (Lanczos, g = 7, n = 9) with reflection for
/// `Re z < 1/2`. Relative accuracy ~1e-15 on the right half-plane.
pub fn gamma(z: C) -> C {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if z.re < 0.5 {
        return C::new(PI, 0.0) / ((z * PI).sin() * gamma(1.0 - z));
    }
    let z = z - 1.0;
    let mut x = C::new(COEF[0], 0.0);
    for (k, &c) in COEF.iter().enumerate().skip(1) {
        x += c / (z + k as f64);
    }
    let t = z + G + 0.5;
    (2.0 * PI).sqrt() * t.powc(z + 0.5) * (-t).exp() * x
}

/// `1 / Gamma(z)`, entire: exactly zero at the poles of Gamma.
pub fn recip_gamma(z: C) -> C {
    if z.re < 0.5 {
        return (z * PI).sin() * gamma(1.0 - z) / PI;
    }
    1.0 / gamma(z)
}

/// `a(zeta)` of the potential `A sech(tau)`.
pub fn sech_a(amp: f64, zeta: C) -> C {
    let s = C::new(0.5, 0.0) - I * zeta;
    gamma(s) * gamma(s) * recip_gamma(s + amp) * recip_gamma(s - amp)
}

/// Discrete eigenvalues `i (A - k + 1/2)` of `A sech(tau)`, `k = 1, 2, ...`
/// while positive.
pub fn sech_eigenvalues(amp: f64) -> Vec<C> {
    (1..)
        .map(|k| amp - k as f64 + 0.5)
        .take_while(|&e| e > 0.0)
        .map(|e| C::new(0.0, e))
        .collect()
}

/// `a(zeta)` of a constant potential `A` on an interval of length `len`,
/// normalized so that the free solution contributes `exp(i zeta len)`.
pub fn rectangle_a(amp: f64, len: f64, zeta: C) -> C {
    let d = (zeta * zeta + amp * amp).sqrt();
    (I * zeta * len).exp() * ((d * len).cos() - I * zeta * (d * len).sin() / d)
}

/// Gaussian `exp(-t^2 / (2 t0^2))` after dispersion `beta2 z` (s^2), with no
/// nonlinearity or loss.
pub fn chirped_gaussian(t: f64, t0: f64, beta2_z: f64) -> C {
    let q = C::new(t0 * t0, -beta2_z);
    (t0 / q.sqrt()) * (-(t * t) / (2.0 * q)).exp()
}

/// RMS-width broadening factor of a dispersed unchirped Gaussian.
pub fn gaussian_broadening(t0: f64, beta2_z: f64) -> f64 {
    (1.0 + (beta2_z / (t0 * t0)).powi(2)).sqrt()
}

/// Bit error rate of Gray-coded QPSK in AWGN at symbol SNR `es_n0` (linear).
pub fn qpsk_ber(es_n0: f64) -> f64 {
    0.5 * statrs::function::erf::erfc((es_n0 / 2.0).sqrt())
}

/// 99 % (or any `fraction`) power bandwidth of `sech(t / t0)`, whose power
/// spectrum is `sech^2(pi^2 t0 f)`.
pub fn sech_power_bandwidth(t0: f64, fraction: f64) -> f64 {
    2.0 * fraction.atanh() / (PI * PI * t0)
}

/// Variance of a Wiener phase after time `t` for Lorentzian `linewidth`.
pub fn wiener_variance(linewidth: f64, t: f64) -> f64 {
    2.0 * PI * linewidth * t
}

/// One-sided ASE PSD per polarization, W/Hz.
pub fn ase_psd(gain_db: f64, nf_db: f64, nu: f64) -> f64 {
    const H: f64 = 6.626_070_15e-34;
    (10f64.powf(nf_db / 10.0) * 10f64.powf(gain_db / 10.0) - 1.0) * H * nu / 2.0
}

/// Extra rejection of an order-`n` Butterworth band at `df` from centre, dB.
pub fn butterworth_rejection_db(order: u32, bw: f64, df: f64) -> f64 {
    10.0 * (1.0 + (2.0 * df / bw).powi(2 * order as i32)).log10()
}

/// Every `(tau_wg, tau_awg)` on a `step` lattice whose pulse centres
/// (channels 1 and 2 delayed by `tau_wg`, channels 2 and 4 by `tau_awg`)
/// are four slots `dt` apart in cyclic order modulo `tw`.
pub fn enumerate_timings(dt: f64, tw: f64, wg_options: &[f64], step: f64) -> Vec<(f64, f64)> {
    let tol = 0.25 * step;
    let n = (tw / step).round() as usize;
    let mut out = Vec::new();
    for &wg in wg_options {
        for k in 0..n {
            let awg = k as f64 * step;
            let c = [wg, wg + awg, 0.0, awg].map(|t| t.rem_euclid(tw));
            let mut s = c;
            s.sort_by(f64::total_cmp);
            let gaps: Vec<f64> = (0..4)
                .map(|i| if i < 3 { s[i + 1] - s[i] } else { tw - s[3] + s[0] })
                .collect();
            // three consecutive cyclic gaps of dt; the fourth is the down time
            let ok = (0..4).any(|r| (0..3).all(|j| (gaps[(r + j) % 4] - dt).abs() < tol));
            if ok {
                out.push((wg, awg));
            }
        }
    }
    out
}

/// Relative L2 distance.
pub fn rel_l2(a: &[C], b: &[C]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}
