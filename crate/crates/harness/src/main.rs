use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use solitx::config::{ConfigError, ConfigFile, ScenarioConfig};
use solitx::eye::{eye_csv, eye_samples, Fold};
use solitx::report::budget_report;
use solitx::scenario::{diagnostics, rows_csv, run_scenario};
use solitx::selftest::selftest;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(version, about = "Soliton superchannel transmitter and link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario TOML; the chip's operating point when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured seed list with a single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// 40000 bits per seed instead of the configured count.
    #[arg(long)]
    full: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Link budget of the transmitter chip and the grating-coupler check.
    Budget {
        #[command(flatten)]
        common: Common,
    },
    /// BER-versus-distance sweep.
    Run {
        #[command(flatten)]
        common: Common,
        /// Overrides the pulse spacing, ps.
        #[arg(long)]
        dt_ps: Option<f64>,
        /// Overrides the transmission window, ps.
        #[arg(long)]
        tw_ps: Option<f64>,
        /// Also write per-symbol NLFT diagnostics at this distance (first seed).
        #[arg(long)]
        diagnostics_km: Option<f64>,
    },
    /// Folded magnitude trace of one demultiplexed channel.
    Eye {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        distance_km: f64,
        /// Channel 1..=4.
        #[arg(long)]
        channel: usize,
        /// Fold period.
        #[arg(long, value_enum, default_value = "dt")]
        fold: Fold,
    },
    /// Runs the built-in oracle suite.
    Selftest,
}

fn load(common: &Common, edit: impl FnOnce(&mut ConfigFile)) -> Result<ScenarioConfig, ConfigError> {
    let mut file = match &common.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.display().to_string(),
                source,
            })?;
            toml::from_str(&text)?
        }
        None => ConfigFile::default(),
    };
    if let Some(s) = common.seed {
        file.scenario.seeds = vec![s];
    }
    if common.full {
        file.scenario.n_bits = 40_000;
    }
    edit(&mut file);
    ScenarioConfig::from_file(&file)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let config_error = |e: ConfigError| {
        eprintln!("error: {e}");
        Ok(ExitCode::from(2))
    };
    match cli.command {
        Command::Budget { common } => {
            let cfg = match load(&common, |_| {}) {
                Ok(c) => c,
                Err(e) => return config_error(e),
            };
            let b = budget_report(&cfg)?;
            write(&common.out, "budget.csv", &b.to_csv())?;
            print!("{}", b.to_text());
        }
        Command::Run {
            common,
            dt_ps,
            tw_ps,
            diagnostics_km,
        } => {
            let cfg = match load(&common, |f| {
                if let Some(d) = dt_ps {
                    f.scenario.dt_ps = d;
                }
                if let Some(t) = tw_ps {
                    f.scenario.tw_ps = t;
                }
            }) {
                Ok(c) => c,
                Err(e) => return config_error(e),
            };
            let (rows, summary) = run_scenario(&cfg)?;
            let csv = write(&common.out, "results.csv", &rows_csv(&rows))?;
            write(&common.out, "summary.txt", &summary.to_text())?;
            for p in &summary.curve {
                println!("{:7.0} km  mean BER {:.3e} (se {:.1e})", p.distance_km, p.mean_ber, p.std_err);
            }
            print!("{}", summary.to_text());
            if let Some(km) = diagnostics_km {
                let d = diagnostics(&cfg, cfg.seeds[0], km)?;
                write(&common.out, "diagnostics.csv", &solitx_core::rx::diagnostics_csv(&d))?;
            }
            eprintln!("wrote {}", csv.display());
        }
        Command::Eye {
            common,
            distance_km,
            channel,
            fold,
        } => {
            let cfg = match load(&common, |f| {
                if f.scenario.distances_km.is_none() {
                    f.scenario.distances_km = Some(vec![distance_km]);
                }
            }) {
                Ok(c) => c,
                Err(e) => return config_error(e),
            };
            let s = eye_samples(&cfg, distance_km, channel, fold)?;
            let path = write(&common.out, &format!("eye_ch{channel}_{distance_km}km.csv"), &eye_csv(&s))?;
            eprintln!("wrote {} ({} samples)", path.display(), s.len());
        }
        Command::Selftest => {
            let report = selftest();
            print!("{}", report.to_text());
            if !report.pass() {
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
