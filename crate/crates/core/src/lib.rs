//! Simulation model of a four-channel DWDM first-order soliton link.
//!
//! The crate follows the signal path end to end:
//!
//! * [`signal`]: sampled complex envelopes, grids and spectral metrics.
//! * [`budget`]: dB ledger of the transmitter component chain.
//! * [`tx`]: silicon-photonics transmitter (QPSK soliton drives, IQ-MZM,
//!   CROW OADMs, delay network, MMI combiner).
//! * [`fiber`]: split-step NLSE spans, EDFA noise and OSNR accounting.
//! * [`nlft`]: Zakharov-Shabat scattering and eigenvalue search.
//! * [`rx`]: demultiplexing, NLFT symbol recovery, phase search and BER.
//!
//! Envelopes carry sqrt(W) amplitudes, so `|A|^2` is power in watts.

pub mod budget;
pub mod error;
pub mod fft;
pub mod fiber;
pub mod nlft;
pub mod rng;
pub mod rx;
pub mod signal;
pub mod tx;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use signal::{ComplexEnvelope, SignalGrid};
