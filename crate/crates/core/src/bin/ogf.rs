//! `ogf`: import networks, build and solve relaxations, verify solutions,
//! and produce sweep and batch reports.
//!
//! Exit codes: 0 success, 1 infeasible, 2 time limit, 3 input error,
//! 4 internal error. `OGF_LOG` sets the log filter.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use thiserror::Error;

use ogf_core::formulation::{build, FormulationOptions};
use ogf_core::ingest::{
    load_network, network_to_json, parse_decision_groups, parse_nomination, sniff_format,
    IngestOptions, NetworkFormat, Nomination,
};
use ogf_core::model::{export, from_json, Solution, SolveStatus};
use ogf_core::network::Network;
use ogf_core::physics::{build_context, Eos, Nominals, NondimContext};
use ogf_core::solver::{solve_auto, SolveOptions};
use ogf_core::verify::{
    relative_gap, residuals, resistor_error_sweep, run_batch, write_batch_csv, write_stats_csv,
    write_sweep_csv, BatchOptions, SweepGrid, DEFAULT_TOLERANCE,
};

/// Model meta key holding the resolved nomination as json.
const META_NOMINATION: &str = "nomination-json";

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn input(e: impl std::fmt::Display) -> Self {
        CliError::Input(e.to_string())
    }
    fn internal(e: impl std::fmt::Display) -> Self {
        CliError::Internal(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    GaslibXml,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Relaxation {
    Minlp,
    Lr,
    Misoc,
}

impl Relaxation {
    fn name(self) -> &'static str {
        match self {
            Relaxation::Minlp => "minlp",
            Relaxation::Lr => "lr",
            Relaxation::Misoc => "misoc",
        }
    }
}

#[derive(Parser)]
#[command(name = "ogf", version, about = "Optimal gas flow relaxations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a GasLib or json network into canonical json.
    Import {
        #[arg(long)]
        net: PathBuf,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Decision groups (json list or GasLib XML).
        #[arg(long)]
        groups: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a model; the output extension picks json, mps or cbf.
    Build {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        nomination: PathBuf,
        #[arg(long, value_enum, default_value = "lr")]
        model: Relaxation,
        /// Refinement rounds of every hull.
        #[arg(long, default_value_t = 0)]
        refine: usize,
        #[arg(long, default_value = "bisect-all")]
        refinement: String,
        #[arg(long)]
        ideal_eos: bool,
        /// Seed for costs the nomination leaves open.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve a json model.
    Solve {
        #[arg(long)]
        model: PathBuf,
        /// Seconds.
        #[arg(long, default_value_t = 1000.0)]
        time_limit: f64,
        /// Relative optimality gap.
        #[arg(long)]
        gap: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a solution against the exact physics and mode logic.
    Verify {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        /// Overrides the nomination recorded in the solution.
        #[arg(long)]
        nomination: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tol: f64,
        /// Feasible objective in kg/s cost units; adds a relative gap.
        #[arg(long)]
        reference: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Outlet-pressure error of the potential approximation for a resistor.
    SweepResistor {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        arc: String,
        #[arg(long, default_value_t = 500)]
        points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve every nomination in a directory and tabulate the results.
    Batch {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        nominations: PathBuf,
        #[arg(long, value_enum, default_value = "lr")]
        model: Relaxation,
        #[arg(long, default_value_t = 0)]
        refine: usize,
        #[arg(long)]
        ideal_eos: bool,
        #[arg(long, default_value_t = 1000.0)]
        time_limit: f64,
        /// Concurrent instances; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Statistics table; defaults to `<out>.stats.csv`.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
}

fn load_net(path: &Path) -> Result<Network, CliError> {
    let text = read(path)?;
    load_network(&text, sniff_format(&text), &IngestOptions::default()).map_err(CliError::input)
}

fn load_nomination(path: &Path, net: &Network, seed: u64) -> Result<Nomination, CliError> {
    let text = read(path)?;
    parse_nomination(
        &text,
        sniff_format(&text),
        net,
        seed,
        &IngestOptions::default(),
    )
    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn context(net: &Network, eos: Eos) -> Result<NondimContext, CliError> {
    build_context(net, Nominals::default(), eos).map_err(CliError::input)
}

fn status_code(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Optimal => 0,
        SolveStatus::Infeasible => 1,
        SolveStatus::TimeLimit => 2,
        SolveStatus::Unbounded | SolveStatus::Error => 4,
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Import {
            net,
            format,
            groups,
            out,
        } => {
            let text = read(&net)?;
            let format = match format {
                Some(Format::GaslibXml) => NetworkFormat::GaslibXml,
                Some(Format::Json) => NetworkFormat::Json,
                None => sniff_format(&text),
            };
            let mut network =
                load_network(&text, format, &IngestOptions::default()).map_err(CliError::input)?;
            if let Some(g) = groups {
                let gt = read(&g)?;
                let extra = parse_decision_groups(&gt, sniff_format(&gt), &network)
                    .map_err(CliError::input)?;
                let mut all = network.decision_groups().to_vec();
                all.extend(extra);
                network = network.with_decision_groups(all);
            }
            info!(
                "imported `{}`: {} nodes, {} arcs",
                network.name(),
                network.nodes().len(),
                network.arcs().len()
            );
            write(&out, network_to_json(&network).as_bytes())?;
            Ok(0)
        }
        Command::Build {
            net,
            nomination,
            model,
            refine,
            refinement,
            ideal_eos,
            seed,
            out,
        } => {
            let network = load_net(&net)?;
            let nom = load_nomination(&nomination, &network, seed)?;
            for w in &nom.warnings {
                warn!("{w}");
            }
            let ctx = context(&network, Eos::Cnga)?;
            let opts = FormulationOptions {
                relaxation: model.name().into(),
                refine_rounds: refine,
                refinement,
                ideal_eos,
                ..Default::default()
            };
            let mut m = build(&network, &nom, &ctx, &opts).map_err(CliError::input)?;
            m.set_meta(
                META_NOMINATION,
                serde_json::to_string(&nom).map_err(CliError::internal)?,
            );
            let format = out
                .extension()
                .and_then(|e| e.to_str())
                .unwrap_or("json")
                .to_ascii_lowercase();
            let format = if format == "json" {
                "model-json".to_string()
            } else {
                format
            };
            let bytes = export(&m, &format).map_err(CliError::input)?;
            write(&out, &bytes)?;
            Ok(0)
        }
        Command::Solve {
            model,
            time_limit,
            gap,
            seed,
            out,
        } => {
            let m = from_json(&read(&model)?).map_err(CliError::input)?;
            let mut opts = SolveOptions {
                time_limit,
                seed,
                ..Default::default()
            };
            if let Some(g) = gap {
                opts.rel_gap = g;
            }
            opts.validate().map_err(CliError::input)?;
            let mut sol = solve_auto(&m, &opts).map_err(|e| match e {
                ogf_core::solver::SolverError::HasNonlinear(_) => CliError::input(e),
                other => CliError::internal(other),
            })?;
            for (k, v) in m.meta() {
                sol.meta.entry(k.clone()).or_insert_with(|| v.clone());
            }
            info!("{}: objective {:?}", sol.status, sol.objective);
            let text = serde_json::to_string_pretty(&sol).map_err(CliError::internal)?;
            write(&out, text.as_bytes())?;
            Ok(status_code(sol.status))
        }
        Command::Verify {
            net,
            solution,
            nomination,
            tol,
            reference,
            out,
        } => {
            let network = load_net(&net)?;
            let sol: Solution = serde_json::from_str(&read(&solution)?).map_err(CliError::input)?;
            let nom = match nomination {
                Some(p) => load_nomination(&p, &network, 0)?,
                None => match sol.meta.get(META_NOMINATION) {
                    Some(j) => serde_json::from_str(j).map_err(CliError::input)?,
                    None => {
                        warn!("solution carries no nomination; using network demands");
                        Nomination::from_network(&network)
                    }
                },
            };
            let eos = match sol.meta.get("eos").map(String::as_str) {
                Some("ideal") => Eos::Ideal,
                _ => Eos::Cnga,
            };
            let applied = nom.apply(&network);
            let ctx = context(&applied, Eos::Cnga)?;
            let ctx = if eos == Eos::Ideal { ctx.ideal() } else { ctx };
            if sol.status != SolveStatus::Optimal && sol.values.is_empty() {
                return Err(CliError::Input(format!(
                    "solution has status {} and no values",
                    sol.status
                )));
            }
            let mut report = residuals(&applied, &ctx, &sol, tol).map_err(CliError::input)?;
            if let Some(z) = reference {
                let gap = relative_gap(report.objective * ctx.f0, z).map_err(CliError::input)?;
                report.relative_gap = Some(gap);
            }
            info!(
                "max residual {:.3e} ({})",
                report.max_abs,
                if report.feasible {
                    "feasible"
                } else {
                    "violated"
                }
            );
            let text = serde_json::to_string_pretty(&report).map_err(CliError::internal)?;
            write(&out, text.as_bytes())?;
            Ok(if report.feasible { 0 } else { 1 })
        }
        Command::SweepResistor {
            net,
            arc,
            points,
            out,
        } => {
            let network = load_net(&net)?;
            let ctx = context(&network, Eos::Cnga)?;
            let pts = resistor_error_sweep(&network, &arc, &ctx, SweepGrid::with_total(points))
                .map_err(CliError::input)?;
            let mut w = create(&out)?;
            write_sweep_csv(&pts, &arc, &mut w).map_err(CliError::internal)?;
            Ok(0)
        }
        Command::Batch {
            net,
            nominations,
            model,
            refine,
            ideal_eos,
            time_limit,
            workers,
            seed,
            out,
            stats,
        } => {
            let network = load_net(&net)?;
            let mut files: Vec<PathBuf> = fs::read_dir(&nominations)
                .map_err(|e| CliError::Input(format!("{}: {e}", nominations.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.is_file()
                        && matches!(
                            p.extension().and_then(|e| e.to_str()),
                            Some("json" | "xml" | "scn")
                        )
                })
                .collect();
            files.sort();
            let noms = files
                .iter()
                .map(|p| load_nomination(p, &network, seed))
                .collect::<Result<Vec<_>, _>>()?;
            let ctx = context(&network, Eos::Cnga)?;
            let opts = BatchOptions {
                formulation: FormulationOptions {
                    relaxation: model.name().into(),
                    refine_rounds: refine,
                    ideal_eos,
                    ..Default::default()
                },
                solve: SolveOptions {
                    time_limit,
                    seed,
                    ..Default::default()
                },
                workers,
                tolerance: DEFAULT_TOLERANCE,
            };
            let summary = run_batch(&network, &noms, &ctx, &opts);
            let mut w = create(&out)?;
            write_batch_csv(&summary, &mut w).map_err(CliError::internal)?;
            let stats = stats.unwrap_or_else(|| out.with_extension("stats.csv"));
            let mut w = create(&stats)?;
            write_stats_csv(&summary, &mut w).map_err(CliError::internal)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("OGF_LOG", "warn")).init();
    // usage errors share the input-error code; 2 means a time limit
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(3);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                CliError::Input(_) => 3,
                CliError::Internal(_) => 4,
            })
        }
    }
}
