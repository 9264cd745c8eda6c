//! Gray-coded QPSK.
//!
//! Bit pairs map to `00 -> e^{i pi/4}`, `01 -> e^{i 3pi/4}`, `11 -> e^{i 5pi/4}`,
//! `10 -> e^{i 7pi/4}`: the first bit is the sign of Q, the second the sign of I.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;

pub fn map_pair(b0: u8, b1: u8) -> Complex64 {
    let i = if b1 == 0 { 1.0 } else { -1.0 };
    let q = if b0 == 0 { 1.0 } else { -1.0 };
    Complex64::new(i * FRAC_1_SQRT_2, q * FRAC_1_SQRT_2)
}

pub fn qpsk_map(bits: &[u8]) -> Result<Vec<Complex64>> {
    if bits.len() % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "QPSK needs an even bit count, got {}",
            bits.len()
        )));
    }
    Ok(bits.chunks_exact(2).map(|p| map_pair(p[0], p[1])).collect())
}

/// Nearest constellation point, as its bit pair.
pub fn demap(s: Complex64) -> [u8; 2] {
    [(s.im < 0.0) as u8, (s.re < 0.0) as u8]
}

pub fn nearest(s: Complex64) -> Complex64 {
    let [b0, b1] = demap(s);
    map_pair(b0, b1)
}
