use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use groupinv_cli::audit::{run_audit, AuditConfig};
use groupinv_cli::case_control::{run_case_control, CaseControlConfig};
use groupinv_cli::hothand_run::{run_hothand, HotHandRunConfig};
use groupinv_cli::symmetry::{run_symmetry, SymmetryConfig};
use groupinv_cli::toy::run_toy_eprocess;
use groupinv_cli::trace::{write_output_with_manifest, RunManifest};
use groupinv_cli::ville_bound;

#[derive(Parser)]
#[command(
    name = "groupinv",
    about = "E-values, test martingales and e-processes for group invariance",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the exactness, optimality and group-law audit suites.
    Audit(AuditArgs),
    /// Print the two-letter toy e-process with all stopping-time audits.
    ToyEprocess(ToyArgs),
    /// Case-control test martingale with a learned Gaussian alternative.
    CaseControl(CaseControlArgs),
    /// Sign-symmetry martingale versus the unnormalized exp(Z - Z^2/2).
    Symmetry(SymmetryArgs),
    /// Per-shooter hot-hand e-values and their products.
    Hothand(HothandArgs),
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long, default_value_t = 3)]
    seed: u64,
    /// Replications for the counterexample simulation.
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
}

#[derive(Args)]
struct ToyArgs {
    /// Write the per-step trace table here (CSV).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CaseControlArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 40)]
    batches: usize,
    /// Poisson intensity of each arm's batch size (floor 1).
    #[arg(long, default_value_t = 25.0)]
    theta: f64,
    /// Treated-arm mean; the control arm stays at zero.
    #[arg(long, default_value_t = 0.0)]
    effect: f64,
    /// Permutations drawn per batch for the normalization estimate.
    #[arg(long, default_value_t = 100)]
    mc_draws: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Learn from the first batch without counting it as evidence.
    #[arg(long, default_value_t = false)]
    skip_first: bool,
    /// Write the quantile trace here (CSV).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SymmetryArgs {
    #[arg(long, default_value_t = 2)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    /// Number of streamed observations per path.
    #[arg(long, default_value_t = 60)]
    batches: usize,
    /// True mean of the observations.
    #[arg(long, default_value_t = 1.0)]
    effect: f64,
    /// Inverse temperature of the sign-symmetry e-value.
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Write the two quantile traces here (CSV; `.dlp` suffix added for
    /// the comparison path).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HothandArgs {
    /// Shot data: one "shooter_id,bitstring" row per shooter.
    #[arg(long)]
    data: PathBuf,
    /// Write the per-shooter table here (CSV).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    reset_sigpipe();
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

/// Die quietly when stdout is piped into a closed reader instead of
/// panicking on the broken pipe.
#[cfg(unix)]
fn reset_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn reset_sigpipe() {}

fn run() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Audit(args) => {
            let cfg = AuditConfig {
                seed: args.seed,
                replications: args.reps,
            };
            let report = run_audit(&cfg)?;
            for (suite, worst) in report.worst_by_suite() {
                println!("suite {suite:<28} worst deviation {worst:>12.3e}");
            }
            println!(
                "counterexample rejection rate at alpha=1/3: {:.4} (expected ~0.5: the \
                 first-coordinate statistic is not valid for this dependent data)",
                report.counterexample_rate
            );
            println!(
                "same harness, exchangeable data:            {:.4} (anchored at 1/3)",
                report.exchangeable_rate
            );
            println!(
                "injected constant-2 e-value deviates by {:.1} (detected)",
                report.injected_deviation
            );
            if report.all_pass() {
                println!("audit: all suites passed");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("audit: FAILURES detected");
                Ok(ExitCode::FAILURE)
            }
        }
        Command::ToyEprocess(args) => {
            let report = run_toy_eprocess()?;
            print!("{}", report.render());
            let worst = report
                .stopped_audits
                .iter()
                .map(|(_, _, e)| *e)
                .fold(f64::MIN, f64::max);
            if let Some(out) = args.out {
                let mut buf = Vec::new();
                report.table.write_trace(&mut buf, ',')?;
                let manifest = RunManifest {
                    command: "toy-eprocess",
                    seed: 0,
                    config: &serde_json::json!({}),
                    version: env!("CARGO_PKG_VERSION"),
                };
                write_output_with_manifest(&out, &String::from_utf8(buf)?, &manifest)?;
                println!("trace written to {}", out.display());
            }
            Ok(if worst <= 1.0 + 1e-14 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::CaseControl(args) => {
            let cfg = CaseControlConfig {
                seed: args.seed,
                replications: args.reps,
                batches: args.batches,
                theta: args.theta,
                effect_a: args.effect,
                effect_b: 0.0,
                mc_draws: args.mc_draws,
                skip_first: args.skip_first,
                ..CaseControlConfig::default()
            };
            let result = run_case_control(&cfg)?;
            let threshold = 1.0 / args.alpha;
            let final_fraction = result.crossing_fraction(threshold, args.batches);
            println!(
                "case-control: {} reps, {} batches, effect {}: {:.1}% crossed {threshold}",
                args.reps,
                args.batches,
                args.effect,
                100.0 * final_fraction
            );
            if args.effect == 0.0 {
                let bound = ville_bound(args.alpha, args.reps);
                println!(
                    "null calibration: crossing fraction {final_fraction:.4} vs Ville bound \
                     {bound:.4} {}",
                    if final_fraction <= bound {
                        "(ok)"
                    } else {
                        "(VIOLATED)"
                    }
                );
            }
            if let Some(out) = args.out {
                let mut buf = Vec::new();
                result.trace.write_csv(&mut buf)?;
                let manifest = RunManifest {
                    command: "case-control",
                    seed: args.seed,
                    config: &cfg,
                    version: env!("CARGO_PKG_VERSION"),
                };
                write_output_with_manifest(&out, &String::from_utf8(buf)?, &manifest)?;
                println!("quantile trace written to {}", out.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Symmetry(args) => {
            let cfg = SymmetryConfig {
                seed: args.seed,
                replications: args.reps,
                steps: args.batches,
                effect: args.effect,
                mu: args.mu,
            };
            let threshold = 1.0 / args.alpha;
            let result = run_symmetry(&cfg, threshold)?;
            let fmt = |m: Option<usize>| {
                m.map(|t| t.to_string())
                    .unwrap_or_else(|| "never (>half censored)".into())
            };
            println!(
                "symmetry: median crossing of {threshold}: sign-symmetry {} vs exp(Z-Z^2/2) {}",
                fmt(result.median_crossing_sign()),
                fmt(result.median_crossing_dlp())
            );
            if args.effect == 0.0 {
                let bound = ville_bound(args.alpha, args.reps);
                println!(
                    "null calibration: crossing fractions {:.4} / {:.4} vs Ville bound {bound:.4}",
                    result.crossing_fraction_sign(),
                    result.crossing_fraction_dlp()
                );
            }
            if let Some(out) = args.out {
                let mut buf = Vec::new();
                result.trace_sign.write_csv(&mut buf)?;
                let manifest = RunManifest {
                    command: "symmetry",
                    seed: args.seed,
                    config: &cfg,
                    version: env!("CARGO_PKG_VERSION"),
                };
                write_output_with_manifest(&out, &String::from_utf8(buf)?, &manifest)?;
                let dlp_path = out.with_extension("dlp.csv");
                let mut buf = Vec::new();
                result.trace_dlp.write_csv(&mut buf)?;
                std::fs::write(&dlp_path, buf)?;
                println!("quantile traces written to {} (+ .dlp.csv)", out.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Hothand(args) => {
            let grid = run_hothand(&args.data)?;
            println!("{}", grid.summary_table());
            println!("{}", grid.per_shooter_table());
            if let Some(out) = args.out {
                let cfg = HotHandRunConfig {
                    data_path: args.data.display().to_string(),
                };
                let manifest = RunManifest {
                    command: "hothand",
                    seed: 0,
                    config: &cfg,
                    version: env!("CARGO_PKG_VERSION"),
                };
                write_output_with_manifest(&out, &grid.per_shooter_table(), &manifest)?;
                let summary_path = out.with_extension("summary.json");
                std::fs::write(
                    &summary_path,
                    serde_json::to_string_pretty(&grid.summary_json())?,
                )?;
                println!(
                    "per-shooter table written to {} (summary in {})",
                    out.display(),
                    summary_path.display()
                );
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
