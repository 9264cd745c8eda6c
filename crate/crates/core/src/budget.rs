//! Power ledger for the transmitter component cascade.
//!
//! Powers are per carrier line (per channel) in dBm. A stage either sets the
//! power (sources, amplifiers driven to a target) or subtracts its insertion
//! loss from the channels it applies to. Mux OADM stages marked `equalize`
//! additionally attenuate the stronger channels down to the weakest one.

use crate::error::{Error, Result};
use crate::units::{dbm_to_w, w_to_dbm};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Reported powers below this are clamped.
pub const REPORT_FLOOR_DBM: f64 = -90.0;

/// Grating-coupler damage threshold for the total PIC input power.
pub const GC_LIMIT_DBM: f64 = 16.0;

/// Resolution at which power limits are compared (ledger values carry 0.1 dB).
pub const LIMIT_TOLERANCE_DB: f64 = 0.05;

pub const INPUT_GC_STAGE: &str = "input GC";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentKind {
    Source,
    Filter,
    AmplifierToTarget,
    FixedLoss,
    Modulator,
    SplitterCombiner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub name: String,
    pub kind: ComponentKind,
    #[serde(default)]
    pub insertion_loss_db: f64,
    #[serde(default)]
    pub target_power_dbm: Option<f64>,
    #[serde(default)]
    pub bandwidth_ghz: Option<f64>,
    /// 1-based channel indices the stage acts on.
    pub applies_to: Vec<usize>,
    /// Attenuate stronger channels to the weakest after this stage.
    #[serde(default)]
    pub equalize: bool,
}

impl ComponentSpec {
    pub fn new(name: &str, kind: ComponentKind, loss_db: f64, applies_to: &[usize]) -> Self {
        Self {
            name: name.to_string(),
            kind,
            insertion_loss_db: loss_db,
            target_power_dbm: None,
            bandwidth_ghz: None,
            applies_to: applies_to.to_vec(),
            equalize: false,
        }
    }

    pub fn amplifier(name: &str, target_dbm: f64, applies_to: &[usize]) -> Self {
        Self {
            target_power_dbm: Some(target_dbm),
            ..Self::new(name, ComponentKind::AmplifierToTarget, 0.0, applies_to)
        }
    }

    fn bandwidth(mut self, ghz: f64) -> Self {
        self.bandwidth_ghz = Some(ghz);
        self
    }

    fn equalizing(mut self) -> Self {
        self.equalize = true;
        self
    }

    fn validate(&self, n_lines: usize) -> Result<()> {
        if self.applies_to.is_empty() {
            return Err(Error::MalformedChain(format!("stage `{}` applies to no channel", self.name)));
        }
        if let Some(&c) = self.applies_to.iter().find(|&&c| c == 0 || c > n_lines) {
            return Err(Error::MalformedChain(format!(
                "stage `{}` names channel {c} outside 1..={n_lines}",
                self.name
            )));
        }
        if !(self.insertion_loss_db >= 0.0) || !self.insertion_loss_db.is_finite() {
            return Err(Error::MalformedChain(format!(
                "stage `{}` has invalid insertion loss {}",
                self.name, self.insertion_loss_db
            )));
        }
        if self.kind == ComponentKind::AmplifierToTarget
            && !self.target_power_dbm.is_some_and(f64::is_finite)
        {
            return Err(Error::MalformedChain(format!(
                "amplifier `{}` needs a finite target power",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregate {
    PerChannel,
    Total,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetyConstraint {
    pub name: String,
    /// Stage whose output power is checked.
    pub location: String,
    pub limit_dbm: f64,
    pub aggregate: Aggregate,
}

impl SafetyConstraint {
    pub fn gc_damage(location: &str) -> Self {
        Self {
            name: "grating coupler damage".into(),
            location: location.into(),
            limit_dbm: GC_LIMIT_DBM,
            aggregate: Aggregate::Total,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub name: String,
    /// Per-channel power after the stage, dBm.
    pub power_dbm: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudgetReport {
    pub stages: Vec<Stage>,
    pub final_peak_power: Vec<f64>,
    pub violations: Vec<String>,
}

/// Per-channel dB list needed to bring every peak down to the weakest one.
pub fn equalize_peaks(per_channel_peaks_dbm: &[f64]) -> Vec<f64> {
    let min = per_channel_peaks_dbm.iter().copied().fold(f64::INFINITY, f64::min);
    per_channel_peaks_dbm.iter().map(|p| p - min).collect()
}

/// Sum of `n_lines` equal per-line powers.
pub fn total_dbm(per_line_dbm: f64, n_lines: usize) -> f64 {
    w_to_dbm(dbm_to_w(per_line_dbm) * n_lines as f64)
}

fn clamp(p: f64) -> f64 {
    p.max(REPORT_FLOOR_DBM)
}

/// Runs the ledger through `chain` for `n_lines` carriers starting at
/// `source_power_dbm` each, and evaluates `constraints`.
pub fn cascade_with(
    chain: &[ComponentSpec],
    source_power_dbm: f64,
    n_lines: usize,
    constraints: &[SafetyConstraint],
) -> Result<LinkBudgetReport> {
    if chain.is_empty() {
        return Err(Error::MalformedChain("empty component chain".into()));
    }
    if n_lines == 0 {
        return Err(Error::MalformedChain("no carrier lines".into()));
    }
    for c in chain {
        c.validate(n_lines)?;
    }
    let mut power = vec![source_power_dbm; n_lines];
    let mut stages = Vec::with_capacity(chain.len());
    for c in chain {
        for &ch in &c.applies_to {
            let p = &mut power[ch - 1];
            match c.kind {
                ComponentKind::Source => *p = source_power_dbm,
                ComponentKind::AmplifierToTarget => *p = c.target_power_dbm.unwrap_or(*p),
                _ => *p -= c.insertion_loss_db,
            }
        }
        if c.equalize {
            let members: Vec<f64> = c.applies_to.iter().map(|&ch| power[ch - 1]).collect();
            for (&ch, att) in c.applies_to.iter().zip(equalize_peaks(&members)) {
                power[ch - 1] -= att;
            }
        }
        stages.push(Stage {
            name: c.name.clone(),
            power_dbm: power.iter().copied().map(clamp).collect(),
        });
    }
    let mut violations = Vec::new();
    for con in constraints {
        let Some(stage) = stages.iter().find(|s| s.name == con.location) else {
            return Err(Error::MissingStage(con.location.clone()));
        };
        let violated = match con.aggregate {
            Aggregate::PerChannel => stage
                .power_dbm
                .iter()
                .any(|&p| p > con.limit_dbm + LIMIT_TOLERANCE_DB),
            Aggregate::Total => {
                let total: f64 = stage.power_dbm.iter().map(|&p| dbm_to_w(p)).sum();
                w_to_dbm(total) > con.limit_dbm + LIMIT_TOLERANCE_DB
            }
        };
        if violated {
            violations.push(con.name.clone());
        }
    }
    Ok(LinkBudgetReport {
        final_peak_power: power.into_iter().map(clamp).collect(),
        stages,
        violations,
    })
}

/// [`cascade_with`] using the grating-coupler limit on the stage feeding the
/// input GC, when the chain has one.
pub fn cascade(
    chain: &[ComponentSpec],
    source_power_dbm: f64,
    n_lines: usize,
) -> Result<LinkBudgetReport> {
    let constraints: Vec<SafetyConstraint> = chain
        .iter()
        .position(|c| c.name == INPUT_GC_STAGE)
        .filter(|&i| i > 0)
        .map(|i| vec![SafetyConstraint::gc_damage(&chain[i - 1].name)])
        .unwrap_or_default();
    cascade_with(chain, source_power_dbm, n_lines, &constraints)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitCheck {
    pub pass: bool,
    /// Limit minus aggregate power, dB (negative when exceeded).
    pub margin_db: f64,
    pub total_dbm: f64,
}

impl LimitCheck {
    /// Margin rounded to the ledger's 0.1 dB resolution.
    pub fn margin_display(&self) -> f64 {
        let m = (self.margin_db * 10.0).round() / 10.0;
        if m == 0.0 {
            0.0
        } else {
            m
        }
    }
}

fn check_total(per_line_dbm: &[f64], n_lines: usize, limit_dbm: f64) -> LimitCheck {
    // all lines share the stage power before the chip
    let per_line = per_line_dbm.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total = total_dbm(per_line, n_lines);
    let margin_db = limit_dbm - total;
    LimitCheck {
        pass: margin_db >= -LIMIT_TOLERANCE_DB,
        margin_db,
        total_dbm: total,
    }
}

/// Total power of `n_lines` carriers entering the input grating coupler
/// against the 16 dBm damage threshold.
pub fn check_gc_limit(report: &LinkBudgetReport, n_lines: usize) -> Result<LimitCheck> {
    let idx = report
        .stages
        .iter()
        .position(|s| s.name == INPUT_GC_STAGE)
        .ok_or_else(|| Error::MissingStage(INPUT_GC_STAGE.into()))?;
    if idx == 0 {
        return Err(Error::MissingStage(format!("stage before `{INPUT_GC_STAGE}`")));
    }
    Ok(check_total(&report.stages[idx - 1].power_dbm, n_lines, GC_LIMIT_DBM))
}

/// Gain that lifts the PIC output peak to the launch peak.
pub fn required_launch_gain(pic_output_peak_dbm: f64, target_launch_peak_dbm: f64) -> f64 {
    target_launch_peak_dbm - pic_output_peak_dbm
}

/// Comb source power per line, dBm.
pub const PAPER_SOURCE_DBM: f64 = -6.0;

/// Four-channel transmitter chain from comb line to output grating coupler.
pub fn paper_chain() -> Vec<ComponentSpec> {
    use ComponentKind::*;
    let all = [1, 2, 3, 4];
    vec![
        ComponentSpec::new("comb line", Source, 0.0, &all),
        ComponentSpec::new("external filter", Filter, 2.0, &all).bandwidth(45.0),
        ComponentSpec::amplifier("EDFA", 10.0, &all),
        ComponentSpec::new(INPUT_GC_STAGE, FixedLoss, 3.0, &all),
        ComponentSpec::new("CROW-2 OADM", Filter, 1.6, &all).bandwidth(6.5),
        ComponentSpec::new("IQ-MZM", Modulator, 13.5, &all).bandwidth(14.0),
        ComponentSpec::new("delay line", FixedLoss, 3.0, &[1, 2]),
        ComponentSpec::new("CROW-4 mux OADM", Filter, 2.0, &all)
            .bandwidth(17.5)
            .equalizing(),
        ComponentSpec::new("MMI", SplitterCombiner, 3.0, &all),
        ComponentSpec::new("interconnect and taps", FixedLoss, 1.5, &all),
        ComponentSpec::new("output GC", FixedLoss, 3.0, &all),
    ]
}

impl LinkBudgetReport {
    /// Channels sharing the lowest power after stage `i`, and that power.
    fn weakest_group(&self, i: usize) -> (String, f64) {
        let p = &self.stages[i].power_dbm;
        let min = p.iter().copied().fold(f64::INFINITY, f64::min);
        let members: Vec<String> = p
            .iter()
            .enumerate()
            .filter(|(_, &x)| (x - min).abs() < 1e-9)
            .map(|(c, _)| (c + 1).to_string())
            .collect();
        (members.join(" "), min)
    }

    /// CSV with one row per stage: the weakest channel group and its power.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,channel_group,power_dbm\n");
        for i in 0..self.stages.len() {
            let (group, p) = self.weakest_group(i);
            let _ = writeln!(out, "{},{},{:.9}", self.stages[i].name, group, p);
        }
        out
    }

    pub fn to_table(&self) -> String {
        let n = self.final_peak_power.len();
        let width = self.stages.iter().map(|s| s.name.len()).max().unwrap_or(5).max(5);
        let mut out = format!("{:<width$}", "stage");
        for c in 1..=n {
            let _ = write!(out, "  {:>8}", format!("ch{c} dBm"));
        }
        out.push('\n');
        for s in &self.stages {
            let _ = write!(out, "{:<width$}", s.name);
            for p in &s.power_dbm {
                let _ = write!(out, "  {p:>8.2}");
            }
            out.push('\n');
        }
        if self.violations.is_empty() {
            out.push_str("violations: none\n");
        } else {
            let _ = writeln!(out, "violations: {}", self.violations.join(", "));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn paper_chain_reaches_minus_20_6() {
        let r = cascade(&paper_chain(), PAPER_SOURCE_DBM, 4).unwrap();
        for p in &r.final_peak_power {
            assert!((p + 20.6).abs() < 1e-9, "{p}");
        }
        assert!(r.violations.is_empty());
        assert_eq!(r.stages.len(), paper_chain().len());
    }

    #[test]
    fn partial_chain_through_modulator() {
        let chain: Vec<_> = paper_chain().into_iter().take(6).collect();
        let r = cascade(&chain, PAPER_SOURCE_DBM, 4).unwrap();
        // 10 - 3 - 1.6 - 13.5
        assert!((r.final_peak_power[0] + 8.1).abs() < 1e-9);
    }

    #[test]
    fn source_only_chain() {
        let chain = vec![ComponentSpec::new("src", ComponentKind::Source, 0.0, &[1, 2])];
        let r = cascade(&chain, -6.0, 2).unwrap();
        assert_eq!(r.final_peak_power, vec![-6.0, -6.0]);
    }

    #[test]
    fn delay_line_spread_is_three_db() {
        let r = cascade(&paper_chain(), PAPER_SOURCE_DBM, 4).unwrap();
        let delay = r.stages.iter().find(|s| s.name == "delay line").unwrap();
        assert!(((delay.power_dbm[2] - delay.power_dbm[0]) - 3.0).abs() < 1e-12);
        assert_eq!(delay.power_dbm[0], delay.power_dbm[1]);
        assert_eq!(delay.power_dbm[2], delay.power_dbm[3]);
    }

    #[test]
    fn malformed_chains_rejected() {
        assert!(cascade(&[], 0.0, 4).is_err());
        let mut amp = ComponentSpec::amplifier("a", 10.0, &[1]);
        amp.target_power_dbm = None;
        assert!(cascade(&[amp], 0.0, 1).is_err());
        let amp = ComponentSpec::amplifier("a", f64::INFINITY, &[1]);
        assert!(cascade(&[amp], 0.0, 1).is_err());
        let empty = ComponentSpec::new("x", ComponentKind::FixedLoss, 1.0, &[]);
        assert!(cascade(&[empty], 0.0, 1).is_err());
        let neg = ComponentSpec::new("x", ComponentKind::FixedLoss, -1.0, &[1]);
        assert!(cascade(&[neg], 0.0, 1).is_err());
        let out_of_range = ComponentSpec::new("x", ComponentKind::FixedLoss, 1.0, &[5]);
        assert!(cascade(&[out_of_range], 0.0, 4).is_err());
    }

    fn pre_gc_chain(amp_dbm: f64) -> Vec<ComponentSpec> {
        vec![
            ComponentSpec::amplifier("EDFA", amp_dbm, &[1, 2, 3, 4]),
            ComponentSpec::new(INPUT_GC_STAGE, ComponentKind::FixedLoss, 3.0, &[1, 2, 3, 4]),
        ]
    }

    #[test]
    fn gc_limit_cases() {
        let r = cascade(&pre_gc_chain(10.0), -6.0, 4).unwrap();
        let c = check_gc_limit(&r, 4).unwrap();
        assert!(c.pass);
        assert_eq!(c.margin_display(), 0.0);
        assert!((c.total_dbm - 16.0).abs() < 0.05);

        let c = check_gc_limit(&r, 1).unwrap();
        assert!(c.pass);
        assert!((c.margin_db - 6.0).abs() < 1e-12);

        let r = cascade(&pre_gc_chain(11.0), -6.0, 4).unwrap();
        let c = check_gc_limit(&r, 4).unwrap();
        assert!(!c.pass);
        assert_eq!(c.margin_display(), -1.0);
        // mW-sum oracle: 4 * 10^(1.1) mW
        let oracle = 10.0 * (4.0 * 10f64.powf(1.1)).log10();
        assert!((c.total_dbm - oracle).abs() < 1e-12);
        assert_eq!(r.violations, vec!["grating coupler damage".to_string()]);
    }

    #[test]
    fn gc_limit_needs_stage() {
        let chain = vec![ComponentSpec::amplifier("EDFA", 10.0, &[1])];
        let r = cascade(&chain, -6.0, 1).unwrap();
        assert!(matches!(check_gc_limit(&r, 1), Err(Error::MissingStage(_))));
    }

    #[test]
    fn launch_gain() {
        assert!((required_launch_gain(-20.6, -0.3) - 20.3).abs() < 1e-12);
        assert_eq!(required_launch_gain(-3.0, -3.0), 0.0);
        assert!((required_launch_gain(-20.6, 3.0) - 23.6).abs() < 1e-12);
    }

    #[test]
    fn equalize_examples() {
        assert_eq!(equalize_peaks(&[-5.0, -5.0]), vec![0.0, 0.0]);
        let a = equalize_peaks(&[-17.6, -17.6, -14.6, -14.6]);
        for (x, y) in a.iter().zip([0.0, 0.0, 3.0, 3.0]) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(equalize_peaks(&[-3.3]), vec![0.0]);
    }

    #[test]
    fn report_formats() {
        let r = cascade(&paper_chain(), PAPER_SOURCE_DBM, 4).unwrap();
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 1 + paper_chain().len());
        assert!(csv.lines().last().unwrap().starts_with("output GC,1 2 3 4,-20.6"));
        assert!(csv.contains("delay line,1 2,"));
        assert!(r.to_table().contains("violations: none"));
    }

    #[test]
    fn floor_clamp() {
        let chain = vec![
            ComponentSpec::new("src", ComponentKind::Source, 0.0, &[1]),
            ComponentSpec::new("dump", ComponentKind::FixedLoss, 200.0, &[1]),
        ];
        let r = cascade(&chain, 0.0, 1).unwrap();
        assert_eq!(r.final_peak_power[0], REPORT_FLOOR_DBM);
    }

    proptest! {
        #[test]
        fn adjacent_fixed_losses_commute(a in 0.0f64..20.0, b in 0.0f64..20.0, src in -20.0f64..10.0) {
            let x = ComponentSpec::new("x", ComponentKind::FixedLoss, a, &[1, 2]);
            let y = ComponentSpec::new("y", ComponentKind::Filter, b, &[1, 2]);
            let r1 = cascade(&[x.clone(), y.clone()], src, 2).unwrap();
            let r2 = cascade(&[y, x], src, 2).unwrap();
            for (p, q) in r1.final_peak_power.iter().zip(&r2.final_peak_power) {
                prop_assert!((p - q).abs() < 1e-9);
            }
        }

        #[test]
        fn cascade_is_deterministic(src in -20.0f64..10.0) {
            let a = cascade(&paper_chain(), src, 4).unwrap();
            let b = cascade(&paper_chain(), src, 4).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
