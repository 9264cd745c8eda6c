//! Scenario configuration file.
//!
//! TOML with units in the key names; unknown keys are rejected. Every table
//! and key is optional and falls back to the paper operating point:
//!
//! ```toml
//! [scenario]
//! n_bits = 4000
//! dt_ps = 250.0
//! tw_ps = 1000.0
//! max_distance_km = 3750.0     # or an explicit list: distances_km = [...]
//! seeds = [1, 2, 3]
//! launch_peak_dbm = -0.3
//! mode = "idealized"           # or "hardware-faithful"
//!
//! [fiber]
//! alpha_db_per_km = 0.2
//! beta2_ps2_per_km = -2.16
//! gamma_per_w_km = 1.6
//! span_km = 50.0
//! ```

use serde::{Deserialize, Serialize};
use solitx_core::budget::ComponentSpec;
use solitx_core::fiber::{EdfaParams, FiberParams, StepControl};
use solitx_core::rx::RxConfig;
use solitx_core::tx::{ChannelPlan, MzmParams, SolitonParams, TxMode, TxSetup, N_CHANNELS};
use solitx_core::units::{GHZ, PS};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] solitx_core::Error),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub n_bits: usize,
    pub dt_ps: f64,
    pub tw_ps: f64,
    pub distances_km: Option<Vec<f64>>,
    pub max_distance_km: f64,
    pub seeds: Vec<u64>,
    pub launch_peak_dbm: f64,
    pub mode: TxMode,
    /// Channels carrying data (1-based); the rest stay dark.
    pub channels: Vec<usize>,
    pub sample_rate_gsps: f64,
    /// Largest simulated block before the bit stream is split into
    /// independent periodic segments.
    pub max_samples: usize,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            n_bits: 4000,
            dt_ps: 250.0,
            tw_ps: 1000.0,
            distances_km: None,
            max_distance_km: 3750.0,
            seeds: vec![1, 2, 3],
            launch_peak_dbm: -0.3,
            mode: TxMode::Idealized,
            channels: vec![1, 2, 3, 4],
            sample_rate_gsps: 256.0,
            max_samples: 1 << 22,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FecSection {
    pub hd: f64,
    pub sd: f64,
}

impl Default for FecSection {
    fn default() -> Self {
        Self { hd: 3.8e-3, sd: 2.0e-2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberSection {
    pub alpha_db_per_km: f64,
    pub beta2_ps2_per_km: f64,
    pub gamma_per_w_km: f64,
    pub span_km: f64,
}

impl Default for FiberSection {
    fn default() -> Self {
        let fp = FiberParams::nzdsf();
        Self {
            alpha_db_per_km: fp.alpha,
            beta2_ps2_per_km: fp.beta2,
            gamma_per_w_km: fp.gamma,
            span_km: fp.span_length,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmplifierSection {
    /// In-line gain; must equal the span loss when given.
    pub gain_db: Option<f64>,
    pub nf_db: f64,
    pub noise: bool,
}

impl Default for AmplifierSection {
    fn default() -> Self {
        Self {
            gain_db: None,
            nf_db: 5.0,
            noise: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoosterSection {
    pub nf_db: f64,
    pub noise: bool,
}

impl Default for BoosterSection {
    fn default() -> Self {
        Self {
            nf_db: 5.0,
            noise: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepSection {
    pub max_nl_phase_rad: Option<f64>,
    pub dz_km: Option<f64>,
}

impl Default for StepSection {
    fn default() -> Self {
        Self {
            max_nl_phase_rad: Some(1e-3),
            dz_km: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TxSection {
    pub t0_ps: f64,
    pub peak_drive_v: f64,
    pub vpi_v: f64,
    pub eo_bandwidth_ghz: f64,
    pub mzm_il_db: f64,
    /// Target insertion-plus-modulation penalty the drive gain is calibrated to.
    pub mzm_penalty_db: f64,
    pub delta_f_ghz: [f64; N_CHANNELS],
    pub comb_fsr_ghz: f64,
    pub linewidth_khz: f64,
    pub phase_noise: bool,
}

impl Default for TxSection {
    fn default() -> Self {
        let sp = SolitonParams::default();
        let mp = MzmParams::default();
        Self {
            t0_ps: sp.t0 / PS,
            peak_drive_v: sp.peak_drive,
            vpi_v: mp.vpi,
            eo_bandwidth_ghz: mp.eo_bandwidth / GHZ,
            mzm_il_db: mp.il_db,
            mzm_penalty_db: 13.5,
            delta_f_ghz: [-15.0, -5.0, 5.0, 15.0],
            comb_fsr_ghz: 10.0,
            linewidth_khz: 80.0,
            phase_noise: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RxSection {
    pub bw_ghz: f64,
    pub erasure_weight: f64,
    pub bps_test_phases: usize,
    pub bps_window: usize,
    pub pilots: usize,
}

impl Default for RxSection {
    fn default() -> Self {
        let rc = RxConfig::for_spacing(1.0);
        Self {
            bw_ghz: rc.rx_bw / GHZ,
            erasure_weight: rc.erasure_weight,
            bps_test_phases: rc.bps_test_phases,
            bps_window: rc.bps_window,
            pilots: rc.pilots,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OsnrSection {
    pub ref_bandwidth_ghz: f64,
}

impl Default for OsnrSection {
    fn default() -> Self {
        Self {
            ref_bandwidth_ghz: 12.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetSection {
    pub source_dbm: f64,
    pub n_lines: usize,
    /// Replaces the fabricated chip's component chain when non-empty.
    pub chain: Vec<ComponentSpec>,
}

impl Default for BudgetSection {
    fn default() -> Self {
        Self {
            source_dbm: solitx_core::budget::PAPER_SOURCE_DBM,
            n_lines: N_CHANNELS,
            chain: Vec::new(),
        }
    }
}

/// Raw file contents.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: ScenarioSection,
    pub fec: FecSection,
    pub fiber: FiberSection,
    pub edfa: AmplifierSection,
    pub booster: BoosterSection,
    pub step: StepSection,
    pub tx: TxSection,
    pub rx: RxSection,
    pub osnr: OsnrSection,
    pub budget: BudgetSection,
}

/// Validated scenario in model units.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_bits: usize,
    pub distances_km: Vec<f64>,
    pub seeds: Vec<u64>,
    pub launch_peak_dbm: f64,
    pub mode: TxMode,
    pub channels: Vec<usize>,
    pub max_samples: usize,
    pub tx: TxSetup,
    pub fiber: FiberParams,
    pub edfa: EdfaParams,
    pub booster: BoosterSection,
    pub step: StepControl,
    pub rx: RxConfig,
    pub fec: FecSection,
    pub osnr_ref_bandwidth: f64,
    pub budget: BudgetSection,
}

impl ScenarioConfig {
    pub fn dt(&self) -> f64 {
        self.tx.plan.dt
    }

    pub fn tw(&self) -> f64 {
        self.tx.plan.tw
    }

    pub fn span_count(&self, km: f64) -> usize {
        (km / self.fiber.span_length).round() as usize
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let file: ConfigFile = toml::from_str(text)?;
        Self::from_file(&file)
    }

    pub fn from_file(f: &ConfigFile) -> Result<Self, ConfigError> {
        let s = &f.scenario;
        if s.n_bits == 0 || s.n_bits % 8 != 0 {
            return invalid(format!("n_bits = {} must be a positive multiple of 8", s.n_bits));
        }
        if s.seeds.is_empty() {
            return invalid("at least one seed is required");
        }
        if s.channels.is_empty() || s.channels.iter().any(|c| !(1..=N_CHANNELS).contains(c)) {
            return invalid(format!("channels {:?} must be drawn from 1..=4", s.channels));
        }

        let fiber = FiberParams {
            alpha: f.fiber.alpha_db_per_km,
            beta2: f.fiber.beta2_ps2_per_km,
            gamma: f.fiber.gamma_per_w_km,
            span_length: f.fiber.span_km,
        };
        fiber.validate()?;
        let span = fiber.span_length;
        let gain = f.edfa.gain_db.unwrap_or(fiber.span_loss_db());
        if (gain - fiber.span_loss_db()).abs() > 1e-6 {
            return invalid(format!(
                "in-line gain {gain} dB must equal the span loss {} dB",
                fiber.span_loss_db()
            ));
        }
        let edfa = EdfaParams {
            gain,
            nf: f.edfa.nf_db,
            noise: f.edfa.noise,
        };
        edfa.validate()?;
        EdfaParams::new(0.0, f.booster.nf_db).validate()?;

        let distances_km = match &s.distances_km {
            Some(d) => d.clone(),
            None => {
                let n = (s.max_distance_km / span).round() as usize;
                (1..=n).map(|k| k as f64 * span).collect()
            }
        };
        if distances_km.is_empty() {
            return invalid("no distances to simulate");
        }
        for &d in &distances_km {
            let k = d / span;
            if !(d >= 0.0) || (k - k.round()).abs() > 1e-9 {
                return invalid(format!("distance {d} km is not a multiple of the {span} km span"));
            }
        }
        let mut sorted = distances_km.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();

        let step = match (f.step.max_nl_phase_rad, f.step.dz_km) {
            (_, Some(dz)) => StepControl::Fixed { dz },
            (Some(p), None) => StepControl::Adaptive { max_nl_phase: p },
            (None, None) => StepControl::default(),
        };

        let t = &f.tx;
        let mut plan = ChannelPlan::programmed(s.dt_ps * PS, s.tw_ps * PS)?;
        plan.delta_f = t.delta_f_ghz.map(|x| x * GHZ);
        plan.comb_fsr = t.comb_fsr_ghz * GHZ;
        plan.linewidth = t.linewidth_khz * 1e3;
        plan.phase_noise = t.phase_noise;
        plan.validate()?;
        let mut tx = TxSetup::paper(plan, s.sample_rate_gsps * GHZ)?;
        tx.soliton = SolitonParams {
            t0: t.t0_ps * PS,
            peak_drive: t.peak_drive_v,
        };
        let mzm = MzmParams {
            vpi: t.vpi_v,
            eo_bandwidth: t.eo_bandwidth_ghz * GHZ,
            il_db: t.mzm_il_db,
            drive_gain: 1.0,
        };
        tx.mzm = solitx_core::tx::calibrate_penalty(&mzm, &tx.soliton, t.mzm_penalty_db)?;

        let windows = s.n_bits / s.mode.bits_per_window();
        let pilots = f.rx.pilots;
        if pilots >= windows {
            return invalid(format!("{pilots} pilots leave no data in {windows} symbols"));
        }
        let rx = RxConfig {
            rx_bw: f.rx.bw_ghz * GHZ,
            centroid_reach: 0.5 * s.dt_ps * PS,
            erasure_weight: f.rx.erasure_weight,
            bps_test_phases: f.rx.bps_test_phases,
            bps_window: f.rx.bps_window,
            pilots,
        };
        if !(0.0..=1.0).contains(&rx.erasure_weight) {
            return invalid("erasure_weight must lie in [0, 1]");
        }
        if rx.bps_test_phases < 4 || rx.bps_window % 2 == 0 {
            return invalid("bps_test_phases >= 4 and an odd bps_window are required");
        }
        if !(f.fec.hd > 0.0 && f.fec.hd <= f.fec.sd && f.fec.sd < 0.5) {
            return invalid("FEC thresholds must satisfy 0 < hd <= sd < 0.5");
        }
        if !(f.osnr.ref_bandwidth_ghz > 0.0) {
            return invalid("OSNR reference bandwidth must be positive");
        }
        if s.max_samples < 1024 {
            return invalid("max_samples must be at least 1024");
        }

        Ok(Self {
            n_bits: s.n_bits,
            distances_km: sorted,
            seeds: s.seeds.clone(),
            launch_peak_dbm: s.launch_peak_dbm,
            mode: s.mode,
            channels: s.channels.clone(),
            max_samples: s.max_samples,
            tx,
            fiber,
            edfa,
            booster: f.booster,
            step,
            rx,
            fec: f.fec,
            osnr_ref_bandwidth: f.osnr.ref_bandwidth_ghz * GHZ,
            budget: f.budget.clone(),
        })
    }

    /// Paper operating point for spacing `dt_ps` in a `tw_ps` window.
    pub fn paper(dt_ps: f64, tw_ps: f64) -> Result<Self, ConfigError> {
        let mut f = ConfigFile::default();
        f.scenario.dt_ps = dt_ps;
        f.scenario.tw_ps = tw_ps;
        Self::from_file(&f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_paper_default() {
        let c = ScenarioConfig::from_toml("").unwrap();
        assert_eq!(c.n_bits, 4000);
        assert_eq!(c.distances_km.len(), 75);
        assert_eq!(c.distances_km[74], 3750.0);
        assert_eq!(c.tx.plan.tau_wg, 500e-12);
        assert_eq!(c.edfa.gain, 10.0);
        assert_eq!(c.fec.hd, 3.8e-3);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = ScenarioConfig::from_toml("[scenario]\ndt = 250\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)), "{err}");
        assert!(ScenarioConfig::from_toml("[fibre]\nspan_km = 50\n").is_err());
    }

    #[test]
    fn invariants_enforced() {
        assert!(ScenarioConfig::from_toml("[scenario]\nn_bits = 4004\n").is_err());
        assert!(ScenarioConfig::from_toml("[scenario]\ndistances_km = [75.0]\n").is_err());
        assert!(ScenarioConfig::from_toml("[scenario]\ndt_ps = 200.0\n").is_err());
        assert!(ScenarioConfig::from_toml("[edfa]\ngain_db = 12.0\n").is_err());
        assert!(ScenarioConfig::from_toml("[rx]\nbps_window = 64\n").is_err());
    }

    #[test]
    fn explicit_distances_sorted() {
        let c = ScenarioConfig::from_toml("[scenario]\ndistances_km = [100.0, 0.0, 50.0]\n").unwrap();
        assert_eq!(c.distances_km, vec![0.0, 50.0, 100.0]);
    }

    #[test]
    fn chain_override_parses() {
        let text = r#"
[budget]
source_dbm = -6.0
[[budget.chain]]
name = "comb line"
kind = "source"
applies_to = [1, 2, 3, 4]
[[budget.chain]]
name = "filter"
kind = "filter"
insertion_loss_db = 2.0
applies_to = [1, 2, 3, 4]
"#;
        let c = ScenarioConfig::from_toml(text).unwrap();
        assert_eq!(c.budget.chain.len(), 2);
    }
}
