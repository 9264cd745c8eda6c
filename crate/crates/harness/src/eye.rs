//! Eye-diagram export: the demultiplexed channel magnitude folded on the
//! pulse spacing or the transmission window.
//!
//! CSV columns: `t_fold_ps` (time modulo the fold period, ps) and
//! `magnitude_sqrt_w` (|field| after demux, sqrt(W)); one row per sample of
//! the analysed segment, in time order.

use crate::config::ScenarioConfig;
use crate::scenario::field_at;
use serde::{Deserialize, Serialize};
use solitx_core::rx::demux;
use solitx_core::tx::N_CHANNELS;
use solitx_core::units::PS;
use solitx_core::{Error, Result};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum Fold {
    /// Pulse spacing.
    Dt,
    /// Transmission window.
    Tw,
}

pub const EYE_HEADER: &str = "t_fold_ps,magnitude_sqrt_w";

/// Folded `(t, |A|)` samples of `channel` (1-based) after `km`, first seed.
pub fn eye_samples(cfg: &ScenarioConfig, km: f64, channel: usize, fold: Fold) -> Result<Vec<(f64, f64)>> {
    if !(1..=N_CHANNELS).contains(&channel) {
        return Err(Error::InvalidArgument(format!("unknown channel {channel}")));
    }
    if !cfg.distances_km.iter().any(|&d| (d - km).abs() < 1e-9) {
        return Err(Error::InvalidArgument(format!("distance {km} km is not in the sweep")));
    }
    let (_, field) = field_at(cfg, cfg.seeds[0], km)?;
    let base = demux(&field, cfg.tx.plan.delta_f[channel - 1], cfg.rx.rx_bw)?;
    let period = match fold {
        Fold::Dt => cfg.dt(),
        Fold::Tw => cfg.tw(),
    };
    let g = *base.grid();
    Ok(base
        .samples()
        .iter()
        .enumerate()
        .map(|(n, s)| (g.time(n).rem_euclid(period), s.norm()))
        .collect())
}

pub fn eye_csv(samples: &[(f64, f64)]) -> String {
    let mut out = String::with_capacity(samples.len() * 32 + 32);
    out.push_str(EYE_HEADER);
    out.push('\n');
    for (t, m) in samples {
        let _ = writeln!(out, "{},{}", crate::scenario::sig9(t / PS), crate::scenario::sig9(*m));
    }
    out
}
