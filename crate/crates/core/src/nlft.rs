//! Zakharov-Shabat scattering for the focusing NLSE.
//!
//! Conventions (all phase signs live here):
//!
//! * normalized field obeys `i q_xi + q_tt / 2 + |q|^2 q = 0`;
//! * scattering problem `v' = [[-i z, q], [-q*, i z]] v`;
//! * Jost solutions `phi -> (1, 0) e^{-i z t}` on the left, `psi -> (0, 1)
//!   e^{i z t}` and `psibar -> (1, 0) e^{-i z t}` on the right, with
//!   `phi = a psibar + b psi`;
//! * multiplying `q` by `e^{i theta}` multiplies `b` by `e^{-i theta}`, so the
//!   carried phase is `-arg b`;
//! * `b(xi) = b(0) exp(2 i z^2 xi)`, undone by [`channel_compensate`];
//! * delaying the pulse by `t0` multiplies `b` by `exp(-2 i z t0)`;
//! * `q = sech(t)` has its eigenvalue at `i/2` with `b = -1`.
//!
//! The potential is taken constant over each sample cell `[t_j - h/2, t_j +
//! h/2]`, so each cell contributes an exact 2x2 matrix exponential.

use crate::error::{Error, Result};
use crate::fiber::{soliton_power, FiberParams};
use crate::signal::ComplexEnvelope;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

type C = Complex64;
/// 2x2 complex matrix, row-major.
pub type Mat = [[C; 2]; 2];

const I: C = C::new(0.0, 1.0);

/// Scales mapping a physical envelope onto soliton units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationScales {
    /// Time scale, s.
    pub t0: f64,
    /// Power scale, W.
    pub p_sol: f64,
    /// Dispersion length, km.
    pub l_d: f64,
}

impl NormalizationScales {
    pub fn new(t0: f64, p_sol: f64, l_d: f64) -> Result<Self> {
        if t0 > 0.0 && p_sol > 0.0 && l_d > 0.0 {
            Ok(Self { t0, p_sol, l_d })
        } else {
            Err(Error::InvalidArgument(format!(
                "normalization scales must be positive (T0 {t0:e}, P {p_sol:e}, L_D {l_d:e})"
            )))
        }
    }

    /// Scales of the fundamental soliton of width `t0` in fiber `fp`.
    pub fn for_fiber(fp: &FiberParams, t0: f64) -> Result<Self> {
        Self::new(t0, soliton_power(fp, t0)?, fp.dispersion_length(t0))
    }

    /// Normalized distance for `km`.
    pub fn xi(&self, km: f64) -> f64 {
        km / self.l_d
    }
}

/// Uniformly sampled normalized potential; sample `j` sits at `tau0 + j h`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedField {
    pub h: f64,
    pub tau0: f64,
    pub q: Vec<C>,
}

impl NormalizedField {
    pub fn new(h: f64, tau0: f64, q: Vec<C>) -> Result<Self> {
        if !(h > 0.0) || q.is_empty() {
            return Err(Error::InvalidArgument("normalized field needs h > 0 and samples".into()));
        }
        Ok(Self { h, tau0, q })
    }

    /// Samples `f(tau)` on `n` points starting at `tau0`.
    pub fn from_fn(h: f64, tau0: f64, n: usize, f: impl Fn(f64) -> C) -> Result<Self> {
        Self::new(h, tau0, (0..n).map(|j| f(tau0 + j as f64 * h)).collect())
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn tau(&self, j: usize) -> f64 {
        self.tau0 + j as f64 * self.h
    }

    /// Left edge of the first cell.
    pub fn left(&self) -> f64 {
        self.tau0 - 0.5 * self.h
    }

    /// Right edge of the last cell.
    pub fn right(&self) -> f64 {
        self.tau0 + (self.q.len() as f64 - 0.5) * self.h
    }

    /// Index of the cell containing the `|q|^2` centroid.
    pub fn centroid_index(&self) -> usize {
        let (mut w, mut m) = (0.0, 0.0);
        for (j, s) in self.q.iter().enumerate() {
            let p = s.norm_sqr();
            w += p;
            m += p * j as f64;
        }
        if w == 0.0 {
            self.q.len() / 2
        } else {
            ((m / w).round() as usize).min(self.q.len() - 1)
        }
    }

    /// Splits at sample `m` into `[0, m)` and `[m, n)`.
    pub fn split_at(&self, m: usize) -> (Self, Self) {
        let left = Self {
            h: self.h,
            tau0: self.tau0,
            q: self.q[..m].to_vec(),
        };
        let right = Self {
            h: self.h,
            tau0: self.tau(m),
            q: self.q[m..].to_vec(),
        };
        (left, right)
    }
}

/// `q(tau) = A(tau T0) / sqrt(P_sol)` with `tau = t / T0` on the envelope's
/// own time axis.
pub fn normalize(e: &ComplexEnvelope, ns: &NormalizationScales) -> NormalizedField {
    let g = 1.0 / ns.p_sol.sqrt();
    NormalizedField {
        h: e.grid().dt() / ns.t0,
        tau0: 0.0,
        q: e.samples().iter().map(|s| s * g).collect(),
    }
}

/// Scattering data at one spectral parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlftPoint {
    pub zeta: C,
    pub a: C,
    pub b: C,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterOptions {
    /// Largest `|q|` tolerated at the window edges.
    pub edge_tol: f64,
    /// Below this `|a|` the point is treated as an eigenvalue and `b` is
    /// taken from the Jost ratios.
    pub eigen_tol: f64,
    /// Largest relative disagreement of the two Jost ratios.
    pub ratio_tol: f64,
}

impl Default for ScatterOptions {
    fn default() -> Self {
        Self {
            edge_tol: 1e-6,
            eigen_tol: 1e-6,
            ratio_tol: 1e-6,
        }
    }
}

fn cell_exp(q: C, zeta: C, h: f64, sign: f64) -> Mat {
    // exp(s h A) with A^2 = k^2 I, k^2 = -zeta^2 - |q|^2
    let k2 = -zeta * zeta - q.norm_sqr();
    let x2 = k2 * h * h;
    let (ch, sh_over_k) = if x2.norm() < 1e-6 {
        (
            C::new(1.0, 0.0) + x2 / 2.0 + x2 * x2 / 24.0,
            (C::new(1.0, 0.0) + x2 / 6.0 + x2 * x2 / 120.0) * h,
        )
    } else {
        let k = k2.sqrt();
        ((k * h).cosh(), (k * h).sinh() / k)
    };
    let s = sh_over_k * sign;
    [[ch - I * zeta * s, q * s], [-q.conj() * s, ch + I * zeta * s]]
}

fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

fn mat_vec(m: &Mat, v: [C; 2]) -> [C; 2] {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

/// Normalized transfer matrix `E(R)^-1 prod(M_j) E(L)` with `E(t) =
/// diag(e^{-i z t}, e^{i z t})`. `T[0][0] = a`, `T[1][0] = b`, and the
/// matrices of adjacent windows compose by multiplication.
pub fn transfer_matrix(q: &NormalizedField, zeta: C) -> Mat {
    let mut m: Mat = [[C::new(1.0, 0.0), C::new(0.0, 0.0)], [C::new(0.0, 0.0), C::new(1.0, 0.0)]];
    for &s in &q.q {
        m = mat_mul(&cell_exp(s, zeta, q.h, 1.0), &m);
    }
    let (l, r) = (q.left(), q.right());
    let el = [(-I * zeta * l).exp(), (I * zeta * l).exp()];
    let er_inv = [(I * zeta * r).exp(), (-I * zeta * r).exp()];
    let mut t = m;
    for (i, row) in t.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v *= er_inv[i] * el[j];
        }
    }
    t
}

struct Jost {
    phi: [C; 2],
    psi: [C; 2],
    psibar: [C; 2],
}

fn forward_backward(q: &NormalizedField, zeta: C, m: usize) -> Jost {
    let mut phi = [(-I * zeta * q.left()).exp(), C::new(0.0, 0.0)];
    for &s in &q.q[..m] {
        phi = mat_vec(&cell_exp(s, zeta, q.h, 1.0), phi);
    }
    let r = q.right();
    let mut psi = [C::new(0.0, 0.0), (I * zeta * r).exp()];
    let mut psibar = [(-I * zeta * r).exp(), C::new(0.0, 0.0)];
    for &s in q.q[m..].iter().rev() {
        let inv = cell_exp(s, zeta, q.h, -1.0);
        psi = mat_vec(&inv, psi);
        psibar = mat_vec(&inv, psibar);
    }
    Jost { phi, psi, psibar }
}

fn check_edges(q: &NormalizedField, tol: f64) -> Result<()> {
    let edge = q.q[0].norm().max(q.q[q.q.len() - 1].norm());
    if edge > tol {
        return Err(Error::InsufficientDecay { edge });
    }
    Ok(())
}

/// `a(zeta)` alone, by forward-backward integration to the centroid.
pub fn scattering_a(q: &NormalizedField, zeta: C) -> C {
    let j = forward_backward(q, zeta, q.centroid_index());
    j.phi[0] * j.psi[1] - j.phi[1] * j.psi[0]
}

pub fn zs_scatter(q: &NormalizedField, zeta: C) -> Result<NlftPoint> {
    zs_scatter_with(q, zeta, &ScatterOptions::default())
}

/// Forward-backward scattering with the matching point at the `|q|^2`
/// centroid. At an eigenvalue `b = phi1/psi1 = phi2/psi2`, cross-checked.
pub fn zs_scatter_with(q: &NormalizedField, zeta: C, opts: &ScatterOptions) -> Result<NlftPoint> {
    check_edges(q, opts.edge_tol)?;
    let j = forward_backward(q, zeta, q.centroid_index());
    let a = j.phi[0] * j.psi[1] - j.phi[1] * j.psi[0];
    let b = if a.norm() < opts.eigen_tol {
        let r1 = j.phi[0] / j.psi[0];
        let r2 = j.phi[1] / j.psi[1];
        let b = if j.psi[0].norm() >= j.psi[1].norm() { r1 } else { r2 };
        let mismatch = (r1 - r2).norm() / b.norm();
        if !(mismatch <= opts.ratio_tol) {
            return Err(Error::RatioMismatch { mismatch });
        }
        b
    } else {
        j.psibar[0] * j.phi[1] - j.psibar[1] * j.phi[0]
    };
    Ok(NlftPoint { zeta, a, b })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iter: usize,
    pub a_tol: f64,
    pub step_tol: f64,
    /// Finite-difference half step for `da/dzeta`.
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            a_tol: 1e-9,
            step_tol: 1e-10,
            fd_step: 1e-6,
        }
    }
}

/// Default initial guess for a fundamental soliton.
pub const DEFAULT_GUESS: C = C::new(0.0, 0.5);

pub fn find_eigenvalue(q: &NormalizedField, zeta0: C) -> Result<C> {
    find_eigenvalue_with(q, zeta0, &NewtonOptions::default())
}

/// Newton iteration on `a(zeta) = 0` with a central-difference derivative.
pub fn find_eigenvalue_with(q: &NormalizedField, zeta0: C, opts: &NewtonOptions) -> Result<C> {
    if !(zeta0.im > 0.0) {
        return Err(Error::EscapedHalfPlane {
            re: zeta0.re,
            im: zeta0.im,
        });
    }
    let m = q.centroid_index();
    let a_at = |z: C| {
        let j = forward_backward(q, z, m);
        j.phi[0] * j.psi[1] - j.phi[1] * j.psi[0]
    };
    let d = opts.fd_step;
    let mut zeta = zeta0;
    for _ in 0..opts.max_iter {
        let a = a_at(zeta);
        if a.norm() < opts.a_tol {
            return Ok(zeta);
        }
        let da = (a_at(zeta + d) - a_at(zeta - d)) / (2.0 * d);
        let step = a / da;
        if !step.is_finite() {
            break;
        }
        zeta -= step;
        if !(zeta.im > 0.0) {
            return Err(Error::EscapedHalfPlane {
                re: zeta.re,
                im: zeta.im,
            });
        }
        if step.norm() < opts.step_tol {
            return Ok(zeta);
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
    })
}

/// Removes the propagation phase of `b` accumulated over `xi`.
pub fn channel_compensate(p: &NlftPoint, xi: f64) -> NlftPoint {
    NlftPoint {
        b: p.b * compensation_factor(p.zeta, xi),
        ..*p
    }
}

/// `exp(-2 i zeta^2 xi)`.
pub fn compensation_factor(zeta: C, xi: f64) -> C {
    (-2.0 * I * zeta * zeta * xi).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sech(x: f64) -> f64 {
        1.0 / x.cosh()
    }

    fn sech_field(amp: f64, h: f64, half: f64) -> NormalizedField {
        let n = (2.0 * half / h).round() as usize + 1;
        NormalizedField::from_fn(h, -half, n, |t| C::new(amp * sech(t), 0.0)).unwrap()
    }

    // Lanczos approximation (g = 7, n = 9) with reflection for Re z < 1/2.
    fn gamma(z: C) -> C {
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

    fn satsuma_yajima_a(amp: f64, zeta: C) -> C {
        let s = C::new(0.5, 0.0) - I * zeta;
        gamma(s) * gamma(s) / (gamma(s + amp) * gamma(s - amp))
    }

    #[test]
    fn gamma_oracle_sanity() {
        assert!((gamma(C::new(5.0, 0.0)) - 24.0).norm() < 1e-10);
        assert!((gamma(C::new(0.5, 0.0)) - PI.sqrt()).norm() < 1e-12);
        // |Gamma(1/2 + i y)|^2 = pi / cosh(pi y)
        let g = gamma(C::new(0.5, 1.3));
        assert!((g.norm_sqr() - PI / (PI * 1.3).cosh()).abs() < 1e-12);
    }

    #[test]
    fn free_field_scatters_trivially() {
        let q = NormalizedField::new(0.1, -5.0, vec![C::new(0.0, 0.0); 101]).unwrap();
        for zeta in [C::new(0.3, 0.2), C::new(-1.0, 0.5), C::new(0.7, 0.0)] {
            let p = zs_scatter(&q, zeta).unwrap();
            assert!((p.a - 1.0).norm() < 1e-14);
            assert!(p.b.norm() < 1e-14);
            let t = transfer_matrix(&q, zeta);
            assert!(t[0][1].norm() < 1e-14 && t[1][0].norm() < 1e-14);
            assert!((t[0][0].norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn sech_matches_satsuma_yajima() {
        let q = sech_field(1.0, 0.002, 30.0);
        for zeta in [C::new(0.0, 0.3), C::new(0.5, 0.2)] {
            let p = zs_scatter_with(&q, zeta, &ScatterOptions::default()).unwrap();
            let oracle = satsuma_yajima_a(1.0, zeta);
            assert!((p.a - oracle).norm() < 1e-6, "{zeta}: {} vs {oracle}", p.a);
        }
    }

    #[test]
    fn rectangle_matches_closed_form() {
        let (amp, len, n) = (0.8, 3.0, 300);
        let h = len / n as f64;
        let q = NormalizedField::from_fn(h, 0.5 * h, n, |_| C::new(amp, 0.0)).unwrap();
        for zeta in [C::new(0.4, 0.3), C::new(-0.2, 0.1), C::new(1.0, 0.0)] {
            let t = transfer_matrix(&q, zeta);
            let delta = (zeta * zeta + amp * amp).sqrt();
            let oracle =
                (I * zeta * len).exp() * ((delta * len).cos() - I * zeta * (delta * len).sin() / delta);
            assert!((t[0][0] - oracle).norm() < 1e-8, "{zeta}");
            let fb = scattering_a(&q, zeta);
            assert!((fb - oracle).norm() < 1e-8);
        }
    }

    #[test]
    fn transfer_matrix_is_unimodular_and_matches_forward_backward() {
        let q = sech_field(1.2, 0.01, 20.0);
        let zeta = C::new(0.3, 0.0);
        let t = transfer_matrix(&q, zeta);
        let det = t[0][0] * t[1][1] - t[0][1] * t[1][0];
        assert!((det - 1.0).norm() < 1e-10);
        // real zeta: |a|^2 + |b|^2 = 1 in the focusing case
        assert!((t[0][0].norm_sqr() + t[1][0].norm_sqr() - 1.0).abs() < 1e-10);
        let p = zs_scatter_with(&q, zeta, &ScatterOptions { edge_tol: 1e-8, ..Default::default() })
            .unwrap();
        assert!((p.a - t[0][0]).norm() < 1e-10);
        assert!((p.b - t[1][0]).norm() < 1e-10);
    }

    #[test]
    fn eigenvalues_follow_amplitude() {
        for (amp, expect) in [(1.0, 0.5), (1.4, 0.9), (0.8, 0.3)] {
            let q = sech_field(amp, 0.002, 30.0);
            let z = find_eigenvalue(&q, DEFAULT_GUESS).unwrap();
            assert!((z - C::new(0.0, expect)).norm() < 1e-6, "{amp}: {z}");
        }
    }

    #[test]
    fn no_bound_state_below_half() {
        let q = sech_field(0.4, 0.01, 30.0);
        let err = find_eigenvalue(&q, DEFAULT_GUESS).unwrap_err();
        assert!(
            matches!(err, Error::NoConvergence { .. } | Error::EscapedHalfPlane { .. }),
            "{err:?}"
        );
        assert!(find_eigenvalue(&q, C::new(0.0, -0.1)).is_err());
    }

    #[test]
    fn reference_b_of_sech() {
        let q = sech_field(1.0, 0.002, 30.0);
        let z = find_eigenvalue(&q, DEFAULT_GUESS).unwrap();
        let p = zs_scatter(&q, z).unwrap();
        assert!((p.b - C::new(-1.0, 0.0)).norm() < 1e-5, "{}", p.b);
    }

    #[test]
    fn edge_decay_guard() {
        let q = sech_field(1.0, 0.01, 5.0);
        assert!(matches!(
            zs_scatter(&q, DEFAULT_GUESS),
            Err(Error::InsufficientDecay { .. })
        ));
    }

    #[test]
    fn ratio_check_rejects_non_eigenvalue_in_ratio_mode() {
        let q = sech_field(1.0, 0.01, 30.0);
        let opts = ScatterOptions {
            eigen_tol: 10.0,
            ..Default::default()
        };
        assert!(matches!(
            zs_scatter_with(&q, C::new(0.1, 0.8), &opts),
            Err(Error::RatioMismatch { .. })
        ));
    }

    fn eigen_point(q: &NormalizedField) -> NlftPoint {
        let z = find_eigenvalue(q, DEFAULT_GUESS).unwrap();
        zs_scatter(q, z).unwrap()
    }

    #[test]
    fn b_counter_rotates_with_field_phase() {
        let q = sech_field(1.0, 0.005, 30.0);
        let p0 = eigen_point(&q);
        for theta in [PI / 4.0, PI / 2.0, PI] {
            let rot = C::from_polar(1.0, theta);
            let qr = NormalizedField {
                q: q.q.iter().map(|s| s * rot).collect(),
                ..q.clone()
            };
            let p = eigen_point(&qr);
            assert!((p.zeta - p0.zeta).norm() < 1e-9);
            assert!((p.b - p0.b * rot.conj()).norm() < 1e-8, "{theta}");
        }
    }

    #[test]
    fn time_shift_scales_b() {
        let h = 0.005;
        let q = sech_field(1.0, h, 30.0);
        let shifted = NormalizedField::from_fn(h, -30.0, q.len(), |t| C::new(sech(t - 1.0), 0.0))
            .unwrap();
        let p0 = eigen_point(&q);
        let p1 = eigen_point(&shifted);
        let expect = p0.b * (-2.0 * I * p0.zeta * 1.0).exp();
        assert!((p1.b - expect).norm() / expect.norm() < 1e-6);
    }

    #[test]
    fn layer_doubling() {
        let q = sech_field(1.1, 0.01, 20.0);
        let (l, r) = q.split_at(q.len() / 2 + 17);
        for zeta in [C::new(0.0, 0.6), C::new(0.4, 0.1), C::new(-0.3, 0.0)] {
            let whole = transfer_matrix(&q, zeta);
            let parts = mat_mul(&transfer_matrix(&r, zeta), &transfer_matrix(&l, zeta));
            for i in 0..2 {
                for j in 0..2 {
                    let err = (whole[i][j] - parts[i][j]).norm() / whole[i][j].norm().max(1.0);
                    assert!(err < 1e-8);
                }
            }
        }
    }

    #[test]
    fn compensation_convention() {
        let p = NlftPoint {
            zeta: C::new(0.0, 0.5),
            a: C::new(0.0, 0.0),
            b: C::new(-1.0, 0.0),
        };
        assert_eq!(channel_compensate(&p, 0.0), p);
        // zeta = i/2: exp(-2 i (-1/4) xi) = exp(i xi / 2), unit modulus
        let c = channel_compensate(&p, 1.0);
        assert!((c.b - C::new(-1.0, 0.0) * C::from_polar(1.0, 0.5)).norm() < 1e-15);
        assert_eq!(c.a, p.a);
        // off-axis eigenvalues also change |b|
        let z = C::new(0.1, 0.5);
        let f = compensation_factor(z, 1.0);
        assert!((f.norm() - (4.0 * 0.1 * 0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn normalize_maps_soliton_to_sech() {
        let g = crate::signal::SignalGrid::new(512, 256e9).unwrap();
        let ns = NormalizationScales::new(38e-12, 2e-3, 100.0).unwrap();
        let tc = g.time(256);
        let e = ComplexEnvelope::from_fn(g, |t| C::new(2e-3f64.sqrt() * sech((t - tc) / 38e-12), 0.0));
        let q = normalize(&e, &ns);
        for j in 0..512 {
            let want = sech(q.tau(j) - tc / 38e-12);
            assert!((q.q[j] - want).norm() < 1e-12);
        }
        assert!(normalize(&ComplexEnvelope::zeros(g), &ns).q.iter().all(|s| s.norm() == 0.0));
        assert!(NormalizationScales::new(0.0, 1.0, 1.0).is_err());
    }
}
