use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use stfv::problems::{error_norms, overheating_metric, ErrorNorms, InitialData, ProblemSetup};
use stfv::spacetime_solver::{advance, Boundary, Run};
use stfv::{ConsState, GasParams};

use crate::config::{Resolved, RunConfig};
use crate::error::CliError;

pub const BUDGET_FILE: &str = "budget.csv";
pub const SUMMARY_FILE: &str = "summary.json";

pub fn snapshot_file(level: usize) -> String {
    format!("snapshot_{level:05}.csv")
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub config: RunConfig,
    pub grid: GridSummary,
    pub conservation: ConservationSummary,
    pub entropy: EntropySummary,
    pub newton: NewtonSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_norms: Option<ErrorNorms>,
    /// Relative internal-energy error next to the diaphragm, Riemann data only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overheating: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSummary {
    pub n_cells: usize,
    pub dx: f64,
    pub dt: f64,
    pub n_slabs: usize,
    pub final_time: f64,
    /// `max(|u| + a) Δt/Δx` on the initial data.
    pub cfl: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConservationSummary {
    /// `Σ_j u_j Δx` of the initial data, per component `(ρ, ρu, E)`.
    pub initial: [f64; 3],
    /// The same at the final temporal interface.
    #[serde(rename = "final")]
    pub final_totals: [f64; 3],
    pub delta: [f64; 3],
    /// Largest change over all interfaces relative to the largest `Σ_j |u_j| Δx`.
    pub relative_drift: [f64; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropySummary {
    pub initial_total_u: f64,
    pub final_total_u: f64,
    /// `Σ_j U_j Δx` never increased from one temporal interface to the next.
    pub monotone_decrease: bool,
    pub largest_increase: f64,
    pub temporal_production: f64,
    pub spatial_production: f64,
    pub max_cell_residual: f64,
    /// `max |R_j + ℰ_j Δt| / max(1, |ℰ_j Δt|)` over all cells and slabs.
    pub max_formula_mismatch: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NewtonSummary {
    pub solves: usize,
    pub total_iterations: usize,
    pub max_iterations: usize,
    pub max_final_residual: f64,
    /// Solves that needed time-step continuation after Newton stalled.
    pub continuation_solves: usize,
}

pub struct Outcome {
    pub summary: Summary,
    pub files: Vec<PathBuf>,
}

/// Runs `config` and writes snapshots, budget and summary into `out_dir`.
pub fn execute(config: &RunConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    let resolved = config.resolve()?;
    let gas = *resolved.scheme.gas();
    let initial = resolved
        .setup
        .initial_states(resolved.grid.n_cells, &gas)
        .map_err(|e| CliError::Config(format!("problem: {e}")))?;
    let run = advance(&initial, &resolved.scheme, &resolved.grid, resolved.mode)?;
    let summary = summarize(config, &resolved, &initial, &run)?;

    fs::create_dir_all(out_dir).map_err(|source| io(out_dir, source))?;
    let mut files = Vec::new();
    let centers = resolved.setup.cell_centers(resolved.grid.n_cells);
    for &level in &resolved.snapshots {
        let states = if level == 0 {
            &initial
        } else {
            &run.trajectory.slabs[level - 1].states
        };
        let path = out_dir.join(snapshot_file(level));
        write(&path, &snapshot_csv(&centers, states, &gas)?)?;
        files.push(path);
    }
    let path = out_dir.join(BUDGET_FILE);
    write(&path, &budget_csv(&run))?;
    files.push(path);
    let path = out_dir.join(SUMMARY_FILE);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write(&path, &(json + "\n"))?;
    files.push(path);
    Ok(Outcome { summary, files })
}

fn io(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| io(path, source))
}

// 17 significant digits round-trip every double
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn snapshot_csv(centers: &[f64], states: &[ConsState], gas: &GasParams) -> Result<String, CliError> {
    let mut out = String::from("x,rho,u,p,S,U\n");
    for (x, u) in centers.iter().zip(states) {
        let w = gas.cons_to_prim(u)?;
        let s = w.specific_entropy(gas);
        let big_u = -w.rho * s / (gas.gamma - 1.0);
        let cols = [*x, w.rho, w.u, w.p, s, big_u].map(num);
        writeln!(out, "{}", cols.join(",")).unwrap();
    }
    Ok(out)
}

pub fn budget_csv(run: &Run) -> String {
    let mut out = String::from(
        "slab_index,t,total_U,total_rhoS,temporal_production,spatial_production,max_cell_residual\n",
    );
    for b in &run.budgets {
        let cols = [
            b.time,
            b.total_entropy_future,
            b.total_rho_s_future,
            b.temporal_production_total,
            b.spatial_production_total,
            b.max_cell_residual,
        ]
        .map(num);
        writeln!(out, "{},{}", b.slab, cols.join(",")).unwrap();
    }
    out
}

fn has_oracle(setup: &ProblemSetup) -> bool {
    match setup.data {
        InitialData::Riemann(_) => setup.boundary == Boundary::Transmissive,
        InitialData::DensityWave { .. } => setup.boundary == Boundary::Periodic,
        InitialData::Constant(_) => true,
    }
}

fn summarize(config: &RunConfig, r: &Resolved, initial: &[ConsState], run: &Run) -> Result<Summary, CliError> {
    let gas = *r.scheme.gas();
    let grid = &r.grid;
    let traj = &run.trajectory;
    let t_end = grid.final_time();

    let totals = traj.conserved_totals(grid.dx);
    let (first, last) = (totals[0], totals[totals.len() - 1]);
    let conservation = ConservationSummary {
        initial: first,
        final_totals: last,
        delta: [0, 1, 2].map(|c| last[c] - first[c]),
        relative_drift: traj.conservation_drift(grid.dx),
    };

    let series = &run.entropy_series;
    let largest_increase = series.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let budgets = &run.budgets;
    let entropy = EntropySummary {
        initial_total_u: series[0],
        final_total_u: series[series.len() - 1],
        monotone_decrease: series.windows(2).all(|w| w[1] <= w[0]),
        largest_increase,
        temporal_production: budgets.iter().map(|b| b.temporal_production_total).sum(),
        spatial_production: budgets.iter().map(|b| b.spatial_production_total).sum(),
        max_cell_residual: budgets.iter().map(|b| b.max_cell_residual).fold(0.0, f64::max),
        max_formula_mismatch: budgets.iter().map(|b| b.formula_mismatch()).fold(0.0, f64::max),
    };

    // slabs of one block share their diagnostics; count each block once
    let block_starts = (0..traj.n_slabs()).filter(|&n| n == 0 || !traj.coupled[n - 1]);
    let mut newton = NewtonSummary {
        solves: 0,
        total_iterations: 0,
        max_iterations: 0,
        max_final_residual: 0.0,
        continuation_solves: 0,
    };
    for n in block_starts {
        let d = traj.slabs[n].diagnostics;
        newton.solves += 1;
        newton.total_iterations += d.iterations;
        newton.max_iterations = newton.max_iterations.max(d.iterations);
        newton.max_final_residual = newton.max_final_residual.max(d.final_residual);
        newton.continuation_solves += usize::from(d.continuation_stages > 0);
    }

    let (error_norms, overheating) = if has_oracle(&r.setup) {
        let exact = r.setup.exact_prims(grid.n_cells, t_end, &gas)?;
        let norms = error_norms(traj.final_states(), &exact, grid.dx, &gas)?;
        let heat = match r.setup.data {
            InitialData::Riemann(_) => Some(overheating_metric(traj.final_states(), &r.setup, t_end, &gas)?),
            _ => None,
        };
        (Some(norms), heat)
    } else {
        (None, None)
    };

    Ok(Summary {
        config: config.clone(),
        grid: GridSummary {
            n_cells: grid.n_cells,
            dx: grid.dx,
            dt: grid.dt,
            n_slabs: grid.n_slabs,
            final_time: t_end,
            cfl: grid.cfl(initial, &gas)?,
        },
        conservation,
        entropy,
        newton,
        error_norms,
        overheating,
    })
}
