//! Fiber channel: split-step NLSE spans, lumped EDFAs with ASE, link assembly
//! and OSNR accounting.
//!
//! The field obeys `dA/dz = -(a/2) A - i (b2/2) d2A/dt2 + i g |A|^2 A`. In the
//! spectral domain (forward FFT with `exp(-i w t)`) the linear part is
//! `exp((i b2 w^2 / 2 - a / 2) z)`.

use crate::error::{Error, Result};
use crate::fft;
use crate::rng;
use crate::signal::ComplexEnvelope;
use crate::units::{db_to_lin, OpticalConstants, PS};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{Read, Write};

/// Largest nonlinear phase a single step may apply, rad.
pub const MAX_STEP_PHASE: f64 = 0.1;

/// Default reference bandwidth for OSNR, Hz.
pub const OSNR_REF_BANDWIDTH: f64 = 12.5e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberParams {
    /// Attenuation, dB/km.
    pub alpha: f64,
    /// Group-velocity dispersion, ps^2/km (anomalous < 0).
    pub beta2: f64,
    /// Kerr coefficient, 1/(W km).
    pub gamma: f64,
    /// Span length, km.
    pub span_length: f64,
}

impl FiberParams {
    /// NZDSF with the dispersion chosen so that a 38 ps pulse at -0.3 dBm
    /// peak satisfies the fundamental-soliton condition (about -2.16 ps^2/km).
    pub fn nzdsf() -> Self {
        let gamma = 1.6;
        let launch = crate::units::dbm_to_w(-0.3);
        Self {
            alpha: 0.2,
            beta2: -gamma * (38.0f64).powi(2) * launch,
            gamma,
            span_length: 50.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha >= 0.0
            && self.span_length > 0.0
            && self.gamma >= 0.0
            && self.beta2.is_finite()
            && self.alpha.is_finite()
            && self.gamma.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid fiber parameters {self:?}")))
        }
    }

    /// Power attenuation in nepers per km.
    pub fn alpha_np(&self) -> f64 {
        self.alpha * std::f64::consts::LN_10 / 10.0
    }

    /// Span loss, dB.
    pub fn span_loss_db(&self) -> f64 {
        self.alpha * self.span_length
    }

    /// Ratio of span-averaged to launch power, `(1 - exp(-aL)) / (aL)`.
    pub fn path_average_factor(&self) -> f64 {
        let al = self.alpha_np() * self.span_length;
        if al < 1e-12 {
            1.0
        } else {
            -(-al).exp_m1() / al
        }
    }

    /// Dispersion length for width `t0` (s), km.
    pub fn dispersion_length(&self, t0: f64) -> f64 {
        (t0 / PS).powi(2) / self.beta2.abs()
    }
}

impl Default for FiberParams {
    fn default() -> Self {
        Self::nzdsf()
    }
}

/// Fundamental soliton peak power `|b2| / (g T0^2)`, W.
pub fn soliton_power(fp: &FiberParams, t0: f64) -> Result<f64> {
    if !(fp.beta2 < 0.0) {
        return Err(Error::InvalidArgument("soliton needs anomalous dispersion".into()));
    }
    if !(fp.gamma > 0.0) || !(t0 > 0.0) {
        return Err(Error::InvalidArgument("soliton needs gamma > 0 and T0 > 0".into()));
    }
    Ok(fp.beta2.abs() / (fp.gamma * (t0 / PS).powi(2)))
}

/// Launch peak whose span average equals the soliton power (lumped
/// amplification, guiding-centre soliton).
pub fn guiding_center_launch_power(fp: &FiberParams, t0: f64) -> Result<f64> {
    Ok(soliton_power(fp, t0)? / fp.path_average_factor())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdfaParams {
    /// Gain, dB.
    pub gain: f64,
    /// Noise figure, dB.
    pub nf: f64,
    /// Add the co-polarized ASE to the field. When false the PSD is still
    /// tracked for OSNR accounting.
    pub noise: bool,
}

impl EdfaParams {
    pub fn new(gain: f64, nf: f64) -> Self {
        Self {
            gain,
            nf,
            noise: true,
        }
    }

    pub fn noiseless(self) -> Self {
        Self {
            noise: false,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain >= 0.0 && self.gain.is_finite()) {
            return Err(Error::InvalidArgument(format!("EDFA gain {} dB", self.gain)));
        }
        if !(self.nf >= 3.01) {
            return Err(Error::InvalidArgument(format!(
                "noise figure {} dB is below the phase-insensitive limit",
                self.nf
            )));
        }
        Ok(())
    }

    /// One-sided ASE PSD per polarization, `(F G - 1) h nu / 2`, W/Hz.
    pub fn ase_psd(&self, constants: &OpticalConstants) -> f64 {
        let g = db_to_lin(self.gain);
        let f = db_to_lin(self.nf);
        (f * g - 1.0).max(0.0) * constants.photon_energy() / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum StepControl {
    /// Constant step, km.
    Fixed { dz: f64 },
    /// Step bounded by the peak nonlinear phase, rad.
    Adaptive { max_nl_phase: f64 },
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl::Adaptive {
            max_nl_phase: 1e-3,
        }
    }
}

impl StepControl {
    fn validate(&self) -> Result<()> {
        let v = match *self {
            StepControl::Fixed { dz } => dz,
            StepControl::Adaptive { max_nl_phase } => max_nl_phase,
        };
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("step parameter {v}")))
        }
    }
}

/// Propagates one span of `fp.span_length`.
pub fn ssfm_span(e: &ComplexEnvelope, fp: &FiberParams, sc: &StepControl) -> Result<ComplexEnvelope> {
    ssfm(e, fp, fp.span_length, sc)
}

/// Symmetric split-step over `length` km. Consecutive linear half steps are
/// merged, so each step costs one forward and one inverse FFT.
pub fn ssfm(
    e: &ComplexEnvelope,
    fp: &FiberParams,
    length: f64,
    sc: &StepControl,
) -> Result<ComplexEnvelope> {
    fp.validate()?;
    sc.validate()?;
    if !(length >= 0.0) {
        return Err(Error::InvalidArgument(format!("length {length} km")));
    }
    let grid = e.grid();
    let mut a = e.samples().to_vec();
    if length == 0.0 {
        return Ok(e.with_samples(a));
    }

    let beta2 = fp.beta2 * PS * PS; // s^2/km
    let half_alpha = fp.alpha_np() / 2.0;
    let omega2: Vec<f64> = grid
        .frequencies()
        .into_iter()
        .map(|f| (2.0 * PI * f).powi(2))
        .collect();
    let linear = |spec: &mut [Complex64], h: f64| {
        for (s, w2) in spec.iter_mut().zip(&omega2) {
            let arg = Complex64::new(-half_alpha * h, 0.5 * beta2 * w2 * h);
            *s *= arg.exp();
        }
    };
    let peak = |x: &[Complex64]| x.iter().map(|s| s.norm_sqr()).fold(0.0, f64::max);
    let next_dz = |p: f64, remaining: f64| -> f64 {
        let dz = match *sc {
            StepControl::Fixed { dz } => dz,
            StepControl::Adaptive { max_nl_phase } => {
                if fp.gamma * p > 0.0 {
                    max_nl_phase / (fp.gamma * p)
                } else {
                    f64::INFINITY
                }
            }
        };
        // avoid a sliver step at the end
        if dz >= remaining * (1.0 - 1e-9) {
            remaining
        } else {
            dz
        }
    };

    let mut z = 0.0;
    let mut dz = next_dz(peak(&a), length);
    let mut pending = 0.5 * dz;
    fft::forward(&mut a);
    loop {
        linear(&mut a, pending);
        fft::inverse(&mut a);
        let p = peak(&a);
        let phase = fp.gamma * p * dz;
        if phase > MAX_STEP_PHASE {
            return Err(Error::StepTooCoarse { phase });
        }
        if fp.gamma > 0.0 {
            for s in a.iter_mut() {
                *s *= Complex64::from_polar(1.0, fp.gamma * s.norm_sqr() * dz);
            }
        }
        z += dz;
        fft::forward(&mut a);
        let remaining = length - z;
        if remaining <= length * 1e-12 {
            linear(&mut a, 0.5 * dz);
            break;
        }
        let following = next_dz(p * (-2.0 * half_alpha * dz).exp(), remaining);
        pending = 0.5 * (dz + following);
        dz = following;
    }
    fft::inverse(&mut a);
    Ok(e.with_samples(a))
}

/// Amplified field and the per-polarization ASE PSD this amplifier added.
#[derive(Debug, Clone)]
pub struct Amplified {
    pub envelope: ComplexEnvelope,
    pub ase_psd: f64,
}

/// Lumped EDFA. Complex white noise of variance `rho fs` per sample is added
/// when `ep.noise` is set; `seed` keys the noise stream.
pub fn edfa_amplify(
    e: &ComplexEnvelope,
    ep: &EdfaParams,
    constants: &OpticalConstants,
    seed: u64,
) -> Result<Amplified> {
    ep.validate()?;
    let g = db_to_lin(ep.gain).sqrt();
    let rho = ep.ase_psd(constants);
    let sigma = (rho * e.grid().sample_rate() / 2.0).sqrt();
    let mut out: Vec<Complex64> = e.samples().iter().map(|s| s * g).collect();
    if ep.noise && sigma > 0.0 {
        let mut r = rng::stream(seed, &[0x45444641]);
        for s in out.iter_mut() {
            let re: f64 = r.sample(StandardNormal);
            let im: f64 = r.sample(StandardNormal);
            *s += Complex64::new(re, im) * sigma;
        }
    }
    Ok(Amplified {
        envelope: e.with_samples(out),
        ase_psd: rho,
    })
}

/// Span-by-span propagation through a transparent amplified link. Each span's
/// noise comes from its own stream keyed by `(seed, span index)`, so a link
/// can be tapped after any span and continued.
#[derive(Debug, Clone)]
pub struct LinkPropagator {
    field: ComplexEnvelope,
    fiber: FiberParams,
    edfa: EdfaParams,
    step: StepControl,
    constants: OpticalConstants,
    seed: u64,
    spans_done: usize,
    ase_psd: f64,
}

/// Relative tolerance on `gain == span loss`.
const TRANSPARENCY_TOL_DB: f64 = 1e-6;

impl LinkPropagator {
    pub fn new(
        launch: ComplexEnvelope,
        fiber: FiberParams,
        edfa: EdfaParams,
        step: StepControl,
        seed: u64,
    ) -> Result<Self> {
        fiber.validate()?;
        edfa.validate()?;
        step.validate()?;
        let loss = fiber.span_loss_db();
        if (edfa.gain - loss).abs() > TRANSPARENCY_TOL_DB {
            return Err(Error::NonTransparent {
                gain_db: edfa.gain,
                loss_db: loss,
            });
        }
        Ok(Self {
            field: launch,
            fiber,
            edfa,
            step,
            constants: OpticalConstants::default(),
            seed,
            spans_done: 0,
            ase_psd: 0.0,
        })
    }

    pub fn with_constants(mut self, constants: OpticalConstants) -> Self {
        self.constants = constants;
        self
    }

    pub fn step_span(&mut self) -> Result<()> {
        let out = ssfm_span(&self.field, &self.fiber, &self.step)?;
        let key = rng::stream_key(self.seed, &[self.spans_done as u64]);
        let amp = edfa_amplify(&out, &self.edfa, &self.constants, key)?;
        self.field = amp.envelope;
        self.ase_psd += amp.ase_psd;
        self.spans_done += 1;
        Ok(())
    }

    pub fn advance_to(&mut self, n_spans: usize) -> Result<()> {
        if n_spans < self.spans_done {
            return Err(Error::InvalidArgument(format!(
                "link already at span {}, cannot go back to {n_spans}",
                self.spans_done
            )));
        }
        while self.spans_done < n_spans {
            self.step_span()?;
        }
        Ok(())
    }

    pub fn field(&self) -> &ComplexEnvelope {
        &self.field
    }

    pub fn spans_done(&self) -> usize {
        self.spans_done
    }

    pub fn distance_km(&self) -> f64 {
        self.spans_done as f64 * self.fiber.span_length
    }

    /// ASE PSD accumulated over the spans so far, per polarization, W/Hz.
    pub fn ase_psd(&self) -> f64 {
        self.ase_psd
    }
}

#[derive(Debug, Clone)]
pub struct LinkOutput {
    pub envelope: ComplexEnvelope,
    pub accumulated_ase_psd: f64,
}

pub fn propagate_link(
    e: &ComplexEnvelope,
    n_spans: usize,
    fp: &FiberParams,
    ep: &EdfaParams,
    sc: &StepControl,
    seed: u64,
) -> Result<LinkOutput> {
    let mut link = LinkPropagator::new(e.clone(), *fp, *ep, *sc, seed)?;
    link.advance_to(n_spans)?;
    Ok(LinkOutput {
        envelope: link.field,
        accumulated_ase_psd: link.ase_psd,
    })
}

/// `10 log10(P_avg / (2 rho B_ref))`: signal power averaged over the whole
/// envelope against dual-polarization ASE in `ref_bandwidth`. Returns
/// `f64::INFINITY` for a noiseless link.
pub fn osnr_estimate(signal: &ComplexEnvelope, ase_psd: f64, ref_bandwidth: f64) -> Result<f64> {
    if !(ase_psd >= 0.0) || !(ref_bandwidth > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "OSNR needs ase_psd >= 0 and ref_bandwidth > 0 (got {ase_psd:e}, {ref_bandwidth:e})"
        )));
    }
    if ase_psd == 0.0 {
        return Ok(f64::INFINITY);
    }
    let p = signal.average_power(None)?;
    Ok(10.0 * (p / (2.0 * ase_psd * ref_bandwidth)).log10())
}

/// Writes one field snapshot: little-endian `u64 n_samples`, `f64
/// sample_rate`, `u64 span`, then interleaved `f64` re/im pairs.
pub fn write_snapshot<W: Write>(w: &mut W, e: &ComplexEnvelope, span: u64) -> std::io::Result<()> {
    w.write_all(&(e.len() as u64).to_le_bytes())?;
    w.write_all(&e.grid().sample_rate().to_le_bytes())?;
    w.write_all(&span.to_le_bytes())?;
    for s in e.samples() {
        w.write_all(&s.re.to_le_bytes())?;
        w.write_all(&s.im.to_le_bytes())?;
    }
    Ok(())
}

/// Reads one snapshot written by [`write_snapshot`]; `None` at end of stream.
pub fn read_snapshot<R: Read>(r: &mut R) -> std::io::Result<Option<(u64, ComplexEnvelope)>> {
    let mut word = [0u8; 8];
    match r.read_exact(&mut word) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let n = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let fs = f64::from_le_bytes(word);
    r.read_exact(&mut word)?;
    let span = u64::from_le_bytes(word);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut word)?;
        let re = f64::from_le_bytes(word);
        r.read_exact(&mut word)?;
        samples.push(Complex64::new(re, f64::from_le_bytes(word)));
    }
    let bad = |m: String| std::io::Error::new(std::io::ErrorKind::InvalidData, m);
    let grid = crate::signal::SignalGrid::new(n, fs).map_err(|e| bad(e.to_string()))?;
    let e = ComplexEnvelope::new(grid, samples).map_err(|e| bad(e.to_string()))?;
    Ok(Some((span, e)))
}
