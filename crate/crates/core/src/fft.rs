//! Thin wrapper over `rustfft` with per-thread plan caching.
//!
//! Forward transforms are unnormalized (`X_k = sum x_n e^{-2 pi i k n / N}`),
//! inverse transforms divide by `N`, matching the usual DSP convention.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub fn forward(buf: &mut [Complex64]) {
    PLANNER.with(|p| {
        let plan = p.borrow_mut().plan_fft_forward(buf.len());
        plan.process(buf);
    });
}

pub fn inverse(buf: &mut [Complex64]) {
    PLANNER.with(|p| {
        let plan = p.borrow_mut().plan_fft_inverse(buf.len());
        plan.process(buf);
    });
    let scale = 1.0 / buf.len() as f64;
    for x in buf.iter_mut() {
        *x *= scale;
    }
}

/// FFT bin frequencies in natural (unshifted) order; bin `N/2` maps to `-fs/2`.
pub fn frequencies(n: usize, sample_rate: f64) -> Vec<f64> {
    let df = sample_rate / n as f64;
    (0..n)
        .map(|k| {
            if k < n / 2 {
                k as f64 * df
            } else {
                (k as f64 - n as f64) * df
            }
        })
        .collect()
}
