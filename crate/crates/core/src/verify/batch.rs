//! Many nominations against one network, solved concurrently, summarised
//! as per-instance rows plus min/max/mean/std statistics.

use std::io::Write;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use super::{recover_pressures, relative_gap, residuals_of, VerifyError, REPORT_SCHEMA};
use crate::formulation::{build, FormulationOptions};
use crate::ingest::Nomination;
use crate::model::{Solution, SolveStatus};
use crate::network::Network;
use crate::physics::NondimContext;
use crate::solver::{solve_auto, SolveOptions};

#[derive(Debug, Clone)]
pub struct BatchOptions {
    pub formulation: FormulationOptions,
    pub solve: SolveOptions,
    /// Concurrent instances; 0 uses the rayon default.
    pub workers: usize,
    /// Residual tolerance for accepting a point as MINLP-feasible.
    pub tolerance: f64,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            formulation: FormulationOptions::default(),
            solve: SolveOptions::default(),
            workers: 0,
            tolerance: super::DEFAULT_TOLERANCE,
        }
    }
}

/// Where the feasible objective behind a gap came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapSource {
    /// `reference_objective` of the nomination.
    Reference,
    /// The relaxation optimum itself satisfies the exact physics.
    RelaxationFeasible,
    /// Pressures recomputed for the relaxation's flows and decisions
    /// satisfy the exact physics; same objective.
    Recovered,
    None,
}

impl GapSource {
    pub fn as_str(self) -> &'static str {
        match self {
            GapSource::Reference => "reference",
            GapSource::RelaxationFeasible => "relaxation-feasible",
            GapSource::Recovered => "recovered",
            GapSource::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchRow {
    pub instance: String,
    pub relaxation: String,
    pub status: SolveStatus,
    /// Wall-clock build plus solve time.
    pub seconds: f64,
    /// `sum c s` with `s` in kg/s.
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    /// Percent.
    pub gap: Option<f64>,
    pub gap_source: GapSource,
    pub nodes: u64,
    pub message: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Sample standard deviation; 0 for fewer than two values.
    pub std: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(Self {
            count: values.len(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            std: var.sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub rows: Vec<BatchRow>,
    /// Over instances solved to optimality.
    pub time: Option<Aggregate>,
    /// Over instances with a gap.
    pub gap: Option<Aggregate>,
    pub optimal: usize,
    pub infeasible: usize,
    pub time_limit: usize,
    pub error: usize,
}

fn gap_for(
    network: &Network,
    ctx: &NondimContext,
    nom: &Nomination,
    sol: &Solution,
    objective_si: f64,
    tol: f64,
) -> (Option<f64>, GapSource) {
    if let Some(r) = nom.reference_objective {
        return match relative_gap(objective_si, r) {
            Ok(g) => (Some(g), GapSource::Reference),
            Err(e) => {
                warn!("{}: {e}", nom.id);
                (None, GapSource::None)
            }
        };
    }
    let applied = nom.apply(network);
    let ok = |values| {
        residuals_of(&applied, ctx, values, tol)
            .map(|r| r.feasible)
            .unwrap_or(false)
    };
    if ok(&sol.values) {
        return (Some(0.0), GapSource::RelaxationFeasible);
    }
    match recover_pressures(&applied, ctx, &sol.values) {
        Some(values) if ok(&values) => (Some(0.0), GapSource::Recovered),
        _ => (None, GapSource::None),
    }
}

fn run_one(
    network: &Network,
    ctx: &NondimContext,
    nom: &Nomination,
    opts: &BatchOptions,
) -> BatchRow {
    let start = Instant::now();
    let mut row = BatchRow {
        instance: nom.id.clone(),
        relaxation: opts.formulation.relaxation.clone(),
        status: SolveStatus::Error,
        seconds: 0.0,
        objective: None,
        bound: None,
        gap: None,
        gap_source: GapSource::None,
        nodes: 0,
        message: None,
    };
    let ctx_used = if opts.formulation.ideal_eos {
        ctx.ideal()
    } else {
        *ctx
    };
    let sol = build(network, nom, ctx, &opts.formulation)
        .map_err(|e| e.to_string())
        .and_then(|m| solve_auto(&m, &opts.solve).map_err(|e| e.to_string()));
    row.seconds = start.elapsed().as_secs_f64();
    let sol = match sol {
        Ok(s) => s,
        Err(e) => {
            row.message = Some(e);
            return row;
        }
    };
    row.status = sol.status;
    row.nodes = sol.nodes;
    row.message = sol.message.clone();
    row.objective = sol.objective.map(|z| z * ctx_used.f0);
    row.bound = sol.bound.map(|z| z * ctx_used.f0);
    if let (SolveStatus::Optimal, Some(z)) = (sol.status, row.objective) {
        let (gap, source) = gap_for(network, &ctx_used, nom, &sol, z, opts.tolerance);
        row.gap = gap;
        row.gap_source = source;
    }
    row
}

/// Solves every nomination; rows keep the input order.
pub fn run_batch(
    network: &Network,
    nominations: &[Nomination],
    ctx: &NondimContext,
    opts: &BatchOptions,
) -> BatchSummary {
    let work = || {
        nominations
            .par_iter()
            .map(|n| run_one(network, ctx, n, opts))
            .collect::<Vec<_>>()
    };
    let rows = match rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
    {
        Ok(pool) => pool.install(work),
        Err(e) => {
            warn!("worker pool unavailable ({e}); using the global pool");
            work()
        }
    };
    let count = |s: SolveStatus| rows.iter().filter(|r| r.status == s).count();
    let times: Vec<f64> = rows
        .iter()
        .filter(|r| r.status == SolveStatus::Optimal)
        .map(|r| r.seconds)
        .collect();
    let gaps: Vec<f64> = rows.iter().filter_map(|r| r.gap).collect();
    let summary = BatchSummary {
        time: Aggregate::of(&times),
        gap: Aggregate::of(&gaps),
        optimal: count(SolveStatus::Optimal),
        infeasible: count(SolveStatus::Infeasible),
        time_limit: count(SolveStatus::TimeLimit),
        error: count(SolveStatus::Error) + count(SolveStatus::Unbounded),
        rows,
    };
    info!(
        "batch: {} instances, {} optimal, {} infeasible",
        summary.rows.len(),
        summary.optimal,
        summary.infeasible
    );
    summary
}

fn num(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_default()
}

/// One row per instance.
pub fn write_batch_csv(summary: &BatchSummary, w: &mut dyn Write) -> Result<(), VerifyError> {
    writeln!(w, "# {REPORT_SCHEMA} kind=batch")?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record([
        "instance",
        "relaxation",
        "status",
        "seconds",
        "objective",
        "bound",
        "gap_percent",
        "gap_source",
        "nodes",
        "message",
    ])?;
    for r in &summary.rows {
        csv.write_record([
            r.instance.clone(),
            r.relaxation.clone(),
            r.status.as_str().to_string(),
            format!("{:.4}", r.seconds),
            num(r.objective, 9),
            num(r.bound, 9),
            num(r.gap, 2),
            r.gap_source.as_str().to_string(),
            r.nodes.to_string(),
            r.message.clone().unwrap_or_default(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Statistic rows (minimum, maximum, mean, std. dev.) with time in seconds
/// and relative gap in percent, followed by status counts.
pub fn write_stats_csv(summary: &BatchSummary, w: &mut dyn Write) -> Result<(), VerifyError> {
    writeln!(w, "# {REPORT_SCHEMA} kind=batch-stats")?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["statistic", "time_s", "rel_gap_percent"])?;
    let pick = |a: Option<Aggregate>, f: fn(&Aggregate) -> f64, d: usize| num(a.as_ref().map(f), d);
    let stats: [(&str, fn(&Aggregate) -> f64); 4] = [
        ("minimum", |a| a.min),
        ("maximum", |a| a.max),
        ("mean", |a| a.mean),
        ("std. dev.", |a| a.std),
    ];
    for (name, f) in stats {
        csv.write_record([
            name.to_string(),
            pick(summary.time, f, 2),
            pick(summary.gap, f, 2),
        ])?;
    }
    for (name, n) in [
        ("instances", summary.rows.len()),
        ("optimal", summary.optimal),
        ("infeasible", summary.infeasible),
        ("time limit", summary.time_limit),
        ("error", summary.error),
    ] {
        csv.write_record([name.to_string(), n.to_string(), String::new()])?;
    }
    csv.flush()?;
    Ok(())
}
