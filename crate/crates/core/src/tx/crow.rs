//! CROW add-drop filters modelled as zero-phase Butterworth magnitudes.

use super::CrowFilterSpec;
use crate::error::{Error, Result};
use crate::signal::{apply_spectral_gain, ComplexEnvelope};

/// Power transfer `|H(f)|^2` of the filter.
pub fn crow_power_response(spec: &CrowFilterSpec, f: f64) -> f64 {
    let x = 2.0 * (f - spec.center_offset) / spec.bandwidth_3db;
    10f64.powf(-spec.il_db / 10.0) / (1.0 + x.powi(2 * spec.order as i32))
}

pub fn crow_filter(e: &ComplexEnvelope, spec: &CrowFilterSpec) -> Result<ComplexEnvelope> {
    spec.validate()?;
    let nyq = e.grid().nyquist();
    if spec.center_offset.abs() + 0.5 * spec.bandwidth_3db >= nyq {
        return Err(Error::Aliasing(format!(
            "filter band {:e} +/- {:e} Hz outside Nyquist {nyq:e}",
            spec.center_offset,
            0.5 * spec.bandwidth_3db
        )));
    }
    let out = apply_spectral_gain(e.samples(), e.grid().sample_rate(), |f| {
        crow_power_response(spec, f).sqrt()
    });
    let mut r = ComplexEnvelope::new(*e.grid(), out)?;
    r.center_offset = e.center_offset;
    Ok(r)
}
