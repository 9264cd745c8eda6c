//! Sampled time/frequency grids and complex envelopes.
//!
//! Sample `n` of an envelope sits at `t_n = n / sample_rate`. Spectra use the
//! forward FFT convention of [`crate::fft`], so multiplying by
//! `exp(i 2 pi df t)` moves spectral content to `+df`.

use crate::error::{Error, Result};
use crate::fft;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Uniform sampling grid shared by all envelopes of one simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalGrid {
    n_samples: usize,
    sample_rate: f64,
}

impl SignalGrid {
    pub fn new(n_samples: usize, sample_rate: f64) -> Result<Self> {
        if n_samples < 2 || n_samples % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "n_samples must be even and >= 2, got {n_samples}"
            )));
        }
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "sample_rate must be positive, got {sample_rate}"
            )));
        }
        Ok(Self {
            n_samples,
            sample_rate,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.n_samples as f64 / self.sample_rate
    }

    /// Spectral bin width, Hz.
    pub fn bin_width(&self) -> f64 {
        self.sample_rate / self.n_samples as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 / self.sample_rate
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_samples).map(move |n| self.time(n))
    }

    /// Bin frequencies in FFT order.
    pub fn frequencies(&self) -> Vec<f64> {
        fft::frequencies(self.n_samples, self.sample_rate)
    }

    pub fn nyquist(&self) -> f64 {
        0.5 * self.sample_rate
    }
}

/// How [`ComplexEnvelope::delay`] treats samples pushed past the grid end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayMode {
    Circular,
    ZeroPad,
}

/// Complex baseband field in sqrt(W) on a [`SignalGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexEnvelope {
    grid: SignalGrid,
    samples: Vec<Complex64>,
    /// Baseband reference frequency relative to the optical carrier, Hz.
    pub center_offset: f64,
}

impl ComplexEnvelope {
    pub fn new(grid: SignalGrid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.n_samples() {
            return Err(Error::LengthMismatch(samples.len(), grid.n_samples()));
        }
        if let Some(i) = samples.iter().position(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            grid,
            samples,
            center_offset: 0.0,
        })
    }

    pub fn zeros(grid: SignalGrid) -> Self {
        Self {
            grid,
            samples: vec![Complex64::new(0.0, 0.0); grid.n_samples()],
            center_offset: 0.0,
        }
    }

    /// Samples an analytic field `f(t)` on the grid.
    pub fn from_fn(grid: SignalGrid, f: impl Fn(f64) -> Complex64) -> Self {
        let samples = grid.times().map(f).collect();
        Self {
            grid,
            samples,
            center_offset: 0.0,
        }
    }

    pub fn grid(&self) -> &SignalGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Same grid and offset, new samples.
    pub(crate) fn with_samples(&self, samples: Vec<Complex64>) -> Self {
        debug_assert_eq!(samples.len(), self.samples.len());
        Self {
            grid: self.grid,
            samples,
            center_offset: self.center_offset,
        }
    }

    pub fn powers(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.norm_sqr())
    }

    /// Time-domain energy, J.
    pub fn energy(&self) -> f64 {
        self.powers().sum::<f64>() * self.grid.dt()
    }

    /// Unnormalized DFT of the samples.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut buf = self.samples.clone();
        fft::forward(&mut buf);
        buf
    }

    /// Energy computed from the spectrum (Parseval counterpart of [`Self::energy`]).
    pub fn spectral_energy(&self) -> f64 {
        let n = self.len() as f64;
        self.spectrum().iter().map(|x| x.norm_sqr()).sum::<f64>() * self.grid.dt() / n
    }

    /// Mean of `|A|^2` over `[t0, t1)` or the whole grid.
    pub fn average_power(&self, window: Option<(f64, f64)>) -> Result<f64> {
        let range = match window {
            None => 0..self.len(),
            Some((t0, t1)) => {
                let dur = self.grid.duration();
                if t0 < 0.0 || t1 > dur + 0.5 * self.grid.dt() || t0 > t1 {
                    return Err(Error::InvalidArgument(format!(
                        "window [{t0:e}, {t1:e}) outside grid duration {dur:e}"
                    )));
                }
                let a = (t0 * self.grid.sample_rate()).ceil() as usize;
                let b = ((t1 * self.grid.sample_rate()).ceil() as usize).min(self.len());
                a..b
            }
        };
        if range.is_empty() {
            return Err(Error::InvalidArgument("empty averaging window".into()));
        }
        let n = range.len() as f64;
        Ok(self.samples[range].iter().map(|s| s.norm_sqr()).sum::<f64>() / n)
    }

    pub fn peak_power(&self) -> f64 {
        self.powers().fold(0.0, f64::max)
    }

    /// Power-weighted mean frequency of the spectrum, Hz.
    pub fn spectral_centroid(&self) -> Option<f64> {
        let spec = self.spectrum();
        let freqs = self.grid.frequencies();
        let (mut num, mut den) = (0.0, 0.0);
        for (x, f) in spec.iter().zip(&freqs) {
            let p = x.norm_sqr();
            num += p * f;
            den += p;
        }
        (den > 0.0).then(|| num / den)
    }

    /// Multiplies by `exp(i 2 pi df t)`; rejects shifts that would push the
    /// occupied band past Nyquist.
    pub fn frequency_shift(&self, df: f64) -> Result<Self> {
        let nyq = self.grid.nyquist();
        let (centroid, half_bw) = match self.spectral_centroid() {
            Some(c) => (c, 0.5 * self.power_bandwidth(0.999)?),
            None => (0.0, 0.0),
        };
        if (centroid + df).abs() + half_bw >= nyq {
            return Err(Error::Aliasing(format!(
                "shift {df:e} Hz moves band (centroid {centroid:e}, half-width {half_bw:e}) past Nyquist {nyq:e}"
            )));
        }
        Ok(self.frequency_shift_unchecked(df))
    }

    pub(crate) fn frequency_shift_unchecked(&self, df: f64) -> Self {
        if df == 0.0 {
            return self.clone();
        }
        let w = 2.0 * PI * df;
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(n, s)| s * Complex64::from_polar(1.0, w * self.grid.time(n)))
            .collect();
        let mut out = self.with_samples(samples);
        out.center_offset += df;
        out
    }

    /// Translates the field by `tau` seconds. Whole-sample delays in circular
    /// mode are exact rotations; anything else is a spectral phase ramp.
    pub fn delay(&self, tau: f64, mode: DelayMode) -> Result<Self> {
        let dur = self.grid.duration();
        match mode {
            DelayMode::Circular => {
                let k = tau * self.grid.sample_rate();
                if (k - k.round()).abs() < 1e-9 {
                    let n = self.len() as i64;
                    let shift = (k.round() as i64).rem_euclid(n) as usize;
                    let mut samples = self.samples.clone();
                    samples.rotate_right(shift);
                    return Ok(self.with_samples(samples));
                }
                Ok(self.with_samples(spectral_delay(&self.samples, tau, self.grid.sample_rate())))
            }
            DelayMode::ZeroPad => {
                if tau.abs() >= dur {
                    return Err(Error::InvalidArgument(format!(
                        "zero-pad delay {tau:e} s not shorter than grid duration {dur:e} s"
                    )));
                }
                let n = self.len();
                let mut padded = self.samples.clone();
                padded.resize(2 * n, Complex64::new(0.0, 0.0));
                if tau < 0.0 {
                    // move the zeros in front so the advanced signal slides into them
                    padded.rotate_right(n);
                }
                let shifted = spectral_delay(&padded, tau, self.grid.sample_rate());
                let range = if tau < 0.0 { n..2 * n } else { 0..n };
                Ok(self.with_samples(shifted[range].to_vec()))
            }
        }
    }

    /// Width of the smallest band centred on the spectral centroid holding
    /// `fraction` of the spectral power. Each bin's power is spread evenly
    /// over its width, so the result varies continuously with `fraction`.
    pub fn power_bandwidth(&self, fraction: f64) -> Result<f64> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "fraction must lie in (0, 1), got {fraction}"
            )));
        }
        let spec = self.spectrum();
        let freqs = self.grid.frequencies();
        let powers: Vec<f64> = spec.iter().map(|x| x.norm_sqr()).collect();
        let total: f64 = powers.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("zero-energy envelope".into()));
        }
        let centroid = powers.iter().zip(&freqs).map(|(p, f)| p * f).sum::<f64>() / total;
        let bin = self.grid.bin_width();
        let captured = |h: f64| -> f64 {
            let (lo, hi) = (centroid - h, centroid + h);
            powers
                .iter()
                .zip(&freqs)
                .map(|(p, f)| {
                    let overlap = (hi.min(f + 0.5 * bin) - lo.max(f - 0.5 * bin)).max(0.0);
                    p * overlap / bin
                })
                .sum::<f64>()
        };
        let target = fraction * total;
        let (mut lo, mut hi) = (0.0, self.grid.sample_rate());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if captured(mid) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-9 * bin {
                break;
            }
        }
        Ok(2.0 * hi)
    }
}

/// Circular delay by a linear spectral phase ramp.
pub(crate) fn spectral_delay(samples: &[Complex64], tau: f64, sample_rate: f64) -> Vec<Complex64> {
    let mut buf = samples.to_vec();
    fft::forward(&mut buf);
    let freqs = fft::frequencies(buf.len(), sample_rate);
    for (x, f) in buf.iter_mut().zip(&freqs) {
        *x *= Complex64::from_polar(1.0, -2.0 * PI * f * tau);
    }
    fft::inverse(&mut buf);
    buf
}

/// Applies a real, zero-phase spectral gain `h(f)` to a sample buffer.
pub(crate) fn apply_spectral_gain(
    samples: &[Complex64],
    sample_rate: f64,
    h: impl Fn(f64) -> f64,
) -> Vec<Complex64> {
    let mut buf = samples.to_vec();
    fft::forward(&mut buf);
    let freqs = fft::frequencies(buf.len(), sample_rate);
    for (x, f) in buf.iter_mut().zip(&freqs) {
        *x *= h(*f);
    }
    fft::inverse(&mut buf);
    buf
}
