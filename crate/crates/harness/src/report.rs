//! Link-budget report: per-stage table, CSV, and the grating-coupler check.

use crate::config::ScenarioConfig;
use solitx_core::budget::{cascade, check_gc_limit, paper_chain, LimitCheck, LinkBudgetReport, GC_LIMIT_DBM};
use solitx_core::Result;

#[derive(Debug, Clone)]
pub struct BudgetOutput {
    pub report: LinkBudgetReport,
    pub gc: LimitCheck,
}

impl BudgetOutput {
    pub fn gc_line(&self) -> String {
        format!(
            "GC limit: {:.1} dBm total at PIC input (limit {:.1} dBm), margin {:.1} dB, {}",
            self.gc.total_dbm,
            GC_LIMIT_DBM,
            self.gc.margin_display(),
            if self.gc.pass { "PASS" } else { "FAIL" }
        )
    }

    pub fn to_text(&self) -> String {
        format!("{}{}\n", self.report.to_table(), self.gc_line())
    }

    pub fn to_csv(&self) -> String {
        self.report.to_csv()
    }
}

/// Runs the configured chain (the fabricated chip's when none is given).
pub fn budget_report(cfg: &ScenarioConfig) -> Result<BudgetOutput> {
    let chain = if cfg.budget.chain.is_empty() {
        paper_chain()
    } else {
        cfg.budget.chain.clone()
    };
    let report = cascade(&chain, cfg.budget.source_dbm, cfg.budget.n_lines)?;
    let gc = check_gc_limit(&report, cfg.budget.n_lines)?;
    Ok(BudgetOutput { report, gc })
}
