use anyhow::Context;
use clap::{Parser, Subcommand};
use phasefield::harness::{self, apply_override, HarnessError, Scenario};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "phasefield", version, about = "Structure-preserving Cahn-Hilliard solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or a config file.
    Run {
        /// Preset name or path to a `key = value` config file.
        target: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        dt: Option<String>,
        /// `N`, `NxM`, or a comma-separated ladder.
        #[arg(long)]
        cells: Option<String>,
        #[arg(long)]
        t_end: Option<String>,
        /// `seq` or `oddeven`.
        #[arg(long)]
        schedule: Option<String>,
        /// Abort on the first invariant violation.
        #[arg(long)]
        strict: bool,
        /// Comma-separated snapshot times.
        #[arg(long)]
        snapshots: Option<String>,
        /// Use the reduced desk-scale variant of the preset.
        #[arg(long)]
        desk: bool,
    },
    /// List the presets.
    List,
}

fn load(target: &str) -> Result<Scenario, HarnessError> {
    if Path::new(target).is_file() {
        Ok(harness::parse_config(Path::new(target))?)
    } else {
        Ok(harness::preset(target)?)
    }
}

fn config_error(msg: String) -> HarnessError {
    HarnessError::Config(harness::ConfigError::Validation(msg))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            let mut out = std::io::stdout().lock();
            for name in harness::PRESETS {
                let s = harness::preset(name).expect("built-in presets exist");
                let cells: Vec<String> = s.cells.iter().map(|c| format!("{}x{}", c[0], c[1])).collect();
                let _ =
                    writeln!(out, "{name:<22} {}D  cells {}  dt {}  t_end {}", s.dim, cells.join(","), s.dt, s.t_end);
            }
            ExitCode::SUCCESS
        }
        Command::Run { target, out, seed, dt, cells, t_end, schedule, strict, snapshots, desk } => {
            let result = (|| -> anyhow::Result<harness::RunSummary> {
                let mut s = load(&target)?;
                if desk {
                    s = s.desk_scale();
                }
                if let Some(seed) = seed {
                    s.seed = seed;
                }
                if t_end.is_some() && snapshots.is_none() {
                    // Preset snapshot times past a shortened run are dropped
                    // rather than rejected.
                    let end: f64 = t_end.as_deref().unwrap_or("").trim().parse().unwrap_or(f64::INFINITY);
                    s.snapshots.retain(|&t| t <= end);
                }
                for (key, value) in
                    [("dt", dt), ("cells", cells), ("t_end", t_end), ("schedule", schedule), ("snapshots", snapshots)]
                {
                    if let Some(v) = value {
                        apply_override(&mut s, key, &v).map_err(|m| config_error(format!("--{key}: {m}")))?;
                    }
                }
                s.strict |= strict;
                s.validate().map_err(HarnessError::from)?;
                let summary = harness::run(&s, &out).with_context(|| format!("running {}", s.name))?;
                Ok(summary)
            })();
            match result {
                Ok(summary) => {
                    // A closed stdout (e.g. piped into `head`) is not an error.
                    let mut stdout = std::io::stdout().lock();
                    for v in &summary.variants {
                        let mut line = format!(
                            "{:<14} t={:<8} F={:.10e} mass drift={:.2e} bound excess={:.2e} max dF={:.2e}",
                            v.label,
                            v.final_time,
                            v.final_energy,
                            v.stats.mass_drift,
                            v.stats.bound_excess,
                            v.stats.energy_increase
                        );
                        if let Some(e) = v.l1_error {
                            line += &format!(" L1={e:.4e}");
                        }
                        if let Some(a) = v.contact_angle {
                            line += &format!(" angle={a:.4}");
                        }
                        let _ = writeln!(stdout, "{line}");
                    }
                    if !summary.orders.is_empty() {
                        let o: Vec<String> =
                            summary.orders.iter().map(|o| o.map_or("-".into(), |x| format!("{x:.2}"))).collect();
                        let _ = writeln!(stdout, "orders: {}", o.join(" "));
                    }
                    let _ = writeln!(stdout, "output written to {}", out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    let code = e.downcast_ref::<HarnessError>().map_or(1, HarnessError::exit_code);
                    ExitCode::from(code as u8)
                }
            }
        }
    }
}
