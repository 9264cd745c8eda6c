//! Unit conversions and physical constants.

pub const PLANCK: f64 = 6.626_070_15e-34;

/// Default optical carrier, Hz.
pub const DEFAULT_CARRIER_HZ: f64 = 193.4e12;

pub const PS: f64 = 1e-12;
pub const GHZ: f64 = 1e9;

#[inline]
pub fn dbm_to_w(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

#[inline]
pub fn w_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}

#[inline]
pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn lin_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Carrier frequency and Planck constant used by the ASE model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalConstants {
    pub carrier_frequency: f64,
    pub planck_h: f64,
}

impl Default for OpticalConstants {
    fn default() -> Self {
        Self {
            carrier_frequency: DEFAULT_CARRIER_HZ,
            planck_h: PLANCK,
        }
    }
}

impl OpticalConstants {
    pub fn photon_energy(&self) -> f64 {
        self.planck_h * self.carrier_frequency
    }
}
