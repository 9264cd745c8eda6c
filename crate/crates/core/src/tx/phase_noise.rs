use crate::rng;
use crate::signal::ComplexEnvelope;
use num_complex::Complex64;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

/// Laser phase noise: multiplies by `exp(i phi(t))` with `phi` a Wiener
/// process starting at 0 whose increments have variance `2 pi linewidth dt`.
pub fn phase_noise(e: &ComplexEnvelope, linewidth: f64, seed: u64) -> ComplexEnvelope {
    if linewidth <= 0.0 {
        return e.clone();
    }
    let sigma = (2.0 * PI * linewidth * e.grid().dt()).sqrt();
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let mut rng = rng::stream(seed, &[0x5048_4153]);
    let mut phi = 0.0;
    let samples = e
        .samples()
        .iter()
        .enumerate()
        .map(|(n, s)| {
            if n > 0 {
                phi += normal.sample(&mut rng);
            }
            s * Complex64::from_polar(1.0, phi)
        })
        .collect();
    e.with_samples(samples)
}
