//! Space-time finite-volume solver.
//!
//! Each cell `(j, n)` of a time slab satisfies
//!
//! ```text
//! [u_j^{n+½} - u_j^{n-½}] + λ [f_{j+½}^n - f_{j-½}^n] = 0,   λ = Δt/Δx
//! ```
//!
//! where `u^{n±½}` are temporal interface fluxes. Slabs are grouped in blocks
//! solved by one Newton iteration each: inside a block the configured
//! temporal flux couples neighbouring slabs, at block boundaries the flux is
//! upwind (the past-slab state), so a block size of one marches slab by slab.
//! The initial data is imposed at the bottom of the first slab and the top of
//! the last slab is closed by upwinding.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dissipation::{es_interface_flux, Dissipation, DissipationSpec};
use crate::entropy_ledger::{self, EntropyBudget};
use crate::error::{Error, Result};
use crate::flux_algebra::{
    roe_ec_spatial_flux, roe_ec_temporal_flux, tadmor_ec_spatial_flux_prim, tadmor_ec_temporal_flux_prim,
    Direction, InterfaceFluxKind,
};
use crate::gas_model::{sub, ConsState, EntropyVars, GasParams, PrimState, Vec3};
use crate::linalg::BlockTridiagonal;
use crate::quadrature::{QuadratureRule, DEFAULT_ORDER};

/// Step halvings allowed in the Newton line search.
pub const MAX_STEP_HALVINGS: usize = 30;

/// First fraction of `Δt` tried when falling back to continuation.
pub const INITIAL_CONTINUATION_STEP: f64 = 0.25;

/// Continuation gives up once its `Δt` increment drops below this fraction.
pub const MIN_CONTINUATION_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    /// Ghost cells copy the adjacent interior state.
    Transmissive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    pub n_cells: usize,
    pub dx: f64,
    pub dt: f64,
    pub n_slabs: usize,
    pub boundary: Boundary,
}

impl SpaceTimeGrid {
    pub fn new(n_cells: usize, dx: f64, dt: f64, n_slabs: usize, boundary: Boundary) -> Result<Self> {
        let grid = Self {
            n_cells,
            dx,
            dt,
            n_slabs,
            boundary,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cells < 3 {
            return Err(Error::Config(format!("need at least 3 cells, got {}", self.n_cells)));
        }
        if self.n_slabs == 0 {
            return Err(Error::Config("need at least one time slab".into()));
        }
        if !(self.dx > 0.0 && self.dt > 0.0) || !self.dx.is_finite() || !self.dt.is_finite() {
            return Err(Error::Config(format!("dx = {}, dt = {} must be positive", self.dx, self.dt)));
        }
        Ok(())
    }

    pub fn lambda(&self) -> f64 {
        self.dt / self.dx
    }

    pub fn final_time(&self) -> f64 {
        self.dt * self.n_slabs as f64
    }

    /// `λ · max_j(|u_j| + a_j)`; a diagnostic, the scheme is implicit.
    pub fn cfl(&self, states: &[ConsState], gas: &GasParams) -> Result<f64> {
        let mut speed: f64 = 0.0;
        for u in states {
            speed = speed.max(gas.cons_to_prim(u)?.max_wave_speed(gas));
        }
        Ok(self.lambda() * speed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingMode {
    /// Upwind at every temporal interface; one slab per solve.
    CausalSequential,
    /// Blocks of `block_size` coupled slabs, upwind between blocks.
    BlockCoupled { block_size: usize },
    /// All slabs in one solve.
    FullyCoupled,
}

impl CouplingMode {
    pub fn block_size(&self, n_slabs: usize) -> Result<usize> {
        match *self {
            Self::CausalSequential => Ok(1),
            Self::BlockCoupled { block_size } if block_size >= 1 => Ok(block_size),
            Self::BlockCoupled { .. } => Err(Error::Config("block size must be at least 1".into())),
            Self::FullyCoupled => Ok(n_slabs),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iterations: usize,
    /// Initial step length of the line search, in `(0, 1]`.
    pub damping: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-13,
            max_iterations: 30,
            damping: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeConfig {
    pub gas: GasParams,
    pub spatial_flux: InterfaceFluxKind,
    pub temporal_flux: InterfaceFluxKind,
    /// Gauss–Legendre order for path-integral fluxes.
    pub quadrature_order: usize,
    /// Gauss–Legendre order used by the entropy ledger to evaluate the
    /// upwind-equivalent temporal dissipation.
    pub ledger_quadrature_order: usize,
    pub newton: NewtonSettings,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            gas: GasParams::default(),
            spatial_flux: InterfaceFluxKind::EsSpace {
                dissipation: DissipationSpec::ScalarTimesH { factor: 1.0 },
            },
            temporal_flux: InterfaceFluxKind::UpwindTime,
            quadrature_order: DEFAULT_ORDER,
            ledger_quadrature_order: 32,
            newton: NewtonSettings::default(),
        }
    }
}

/// Cell state with its primitive and entropy-variable forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub u: ConsState,
    pub w: PrimState,
    pub v: EntropyVars,
}

impl Cell {
    pub fn new(u: ConsState, gas: &GasParams) -> Result<Self> {
        let w = gas.cons_to_prim(&u)?;
        Ok(Self {
            u,
            w,
            v: gas.entropy_vars(&w),
        })
    }
}

pub fn cells_of(states: &[ConsState], gas: &GasParams, slab: usize) -> Result<Vec<Cell>> {
    states
        .iter()
        .enumerate()
        .map(|(cell, u)| {
            Cell::new(*u, gas).map_err(|_| {
                let rho = u.rho;
                let p = (gas.gamma - 1.0) * (u.ener - 0.5 * u.mom * u.mom / u.rho);
                Error::CellState { slab, cell, rho, p }
            })
        })
        .collect()
}

/// Which temporal flux sits at the bottom of a slab.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PastInterface {
    /// The past state is imposed (initial data or upwinding from the previous block).
    Imposed,
    /// The configured temporal flux between the previous and current slab.
    Coupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonDiagnostics {
    /// Newton updates, summed over continuation stages and failed attempts.
    pub iterations: usize,
    pub initial_residual: f64,
    pub final_residual: f64,
    /// Time-step continuation stages; 0 when the direct solve converged.
    pub continuation_stages: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlabSolution {
    pub states: Vec<ConsState>,
    pub diagnostics: NewtonDiagnostics,
}

/// A [`SchemeConfig`] with quadrature rules and dissipation operators built.
#[derive(Debug, Clone)]
pub struct Scheme {
    config: SchemeConfig,
    rule: QuadratureRule,
    ledger_rule: QuadratureRule,
    spatial_dissipation: Option<Dissipation>,
    temporal_dissipation: Option<Dissipation>,
}

impl Scheme {
    pub fn new(config: SchemeConfig) -> Result<Self> {
        GasParams::new(config.gas.gamma)?;
        if config.spatial_flux.direction() != Direction::Space {
            return Err(Error::Config(format!("{:?} is not a spatial flux", config.spatial_flux)));
        }
        if config.temporal_flux.direction() != Direction::Time {
            return Err(Error::Config(format!("{:?} is not a temporal flux", config.temporal_flux)));
        }
        let n = &config.newton;
        if !(n.abs_tol > 0.0 && n.rel_tol > 0.0) {
            return Err(Error::Config("Newton tolerances must be positive".into()));
        }
        if !(n.damping > 0.0 && n.damping <= 1.0) {
            return Err(Error::Config(format!("Newton damping {} outside (0, 1]", n.damping)));
        }
        if n.max_iterations == 0 {
            return Err(Error::Config("Newton needs at least one iteration".into()));
        }
        let spatial_dissipation = config
            .spatial_flux
            .dissipation()
            .map(|d| Dissipation::new(*d, Direction::Space))
            .transpose()?;
        let temporal_dissipation = config
            .temporal_flux
            .dissipation()
            .map(|d| Dissipation::new(*d, Direction::Time))
            .transpose()?;
        Ok(Self {
            rule: QuadratureRule::gauss_legendre(config.quadrature_order)?,
            ledger_rule: QuadratureRule::gauss_legendre(config.ledger_quadrature_order)?,
            config,
            spatial_dissipation,
            temporal_dissipation,
        })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    pub fn gas(&self) -> &GasParams {
        &self.config.gas
    }

    pub fn ledger_rule(&self) -> &QuadratureRule {
        &self.ledger_rule
    }

    pub fn spatial_dissipation(&self) -> Option<&Dissipation> {
        self.spatial_dissipation.as_ref()
    }

    pub fn temporal_dissipation(&self) -> Option<&Dissipation> {
        self.temporal_dissipation.as_ref()
    }

    /// Spatial interface flux; equal states return the physical flux exactly.
    pub fn spatial_flux(&self, l: &Cell, r: &Cell) -> Result<Vec3> {
        let gas = self.gas();
        if l.u == r.u {
            return Ok(gas.physical_flux(&l.w));
        }
        match self.config.spatial_flux {
            InterfaceFluxKind::RoeEcSpace => roe_ec_spatial_flux(&l.w, &r.w, gas),
            InterfaceFluxKind::TadmorEcSpace => tadmor_ec_spatial_flux_prim(&l.w, &r.w, &self.rule, gas),
            InterfaceFluxKind::EsSpace { .. } => {
                let ec = roe_ec_spatial_flux(&l.w, &r.w, gas)?;
                let dv = sub(&r.v.to_array(), &l.v.to_array());
                let diss = self.spatial_dissipation.as_ref().expect("validated in constructor");
                es_interface_flux(&ec, &dv, diss, &l.w, &r.w, gas)
            }
            other => Err(Error::Config(format!("{other:?} is not a spatial flux"))),
        }
    }

    /// Temporal interface flux between a past and a future slab; equal states
    /// return the state itself exactly.
    pub fn temporal_flux(&self, past: &Cell, future: &Cell) -> Result<Vec3> {
        let gas = self.gas();
        if past.u == future.u || self.config.temporal_flux.is_causal() {
            return Ok(past.u.to_array());
        }
        match self.config.temporal_flux {
            InterfaceFluxKind::RoeEcTime => roe_ec_temporal_flux(&past.w, &future.w, gas),
            InterfaceFluxKind::TadmorEcTime => tadmor_ec_temporal_flux_prim(&past.w, &future.w, &self.rule, gas),
            InterfaceFluxKind::EsTime { .. } => {
                let ec = roe_ec_temporal_flux(&past.w, &future.w, gas)?;
                let dv = sub(&future.v.to_array(), &past.v.to_array());
                let diss = self.temporal_dissipation.as_ref().expect("validated in constructor");
                es_interface_flux(&ec, &dv, diss, &past.w, &future.w, gas)
            }
            other => Err(Error::Config(format!("{other:?} is not a temporal flux"))),
        }
    }

    /// Spatial fluxes at the `n_cells + 1` interfaces of a slab; entry `i`
    /// sits at `x_{i-½}`.
    pub fn spatial_fluxes(&self, cells: &[Cell], grid: &SpaceTimeGrid) -> Result<Vec<Vec3>> {
        let n = cells.len();
        let mut fluxes = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let (l, r) = interface_cells(i, n, grid.boundary);
            if grid.boundary == Boundary::Periodic && i == n {
                let first = fluxes[0];
                fluxes.push(first);
            } else {
                fluxes.push(self.spatial_flux(&cells[l], &cells[r])?);
            }
        }
        Ok(fluxes)
    }

    /// Residual of one slab.
    ///
    /// `past` selects the bottom flux: the imposed state `prev` itself, or the
    /// configured temporal flux between `prev` and `cur`. Without `next` the top
    /// flux is upwind (`cur`), otherwise the configured flux between `cur` and
    /// `next`.
    pub fn slab_residual(
        &self,
        prev: &[ConsState],
        cur: &[ConsState],
        next: Option<&[ConsState]>,
        past: PastInterface,
        grid: &SpaceTimeGrid,
    ) -> Result<Vec<Vec3>> {
        let gas = self.gas();
        let cur_cells = cells_of(cur, gas, 0)?;
        let bottom: Vec<Vec3> = match past {
            PastInterface::Imposed => prev.iter().map(|u| u.to_array()).collect(),
            PastInterface::Coupled => {
                let prev_cells = cells_of(prev, gas, 0)?;
                prev_cells
                    .iter()
                    .zip(&cur_cells)
                    .map(|(p, f)| self.temporal_flux(p, f))
                    .collect::<Result<_>>()?
            }
        };
        let top: Vec<Vec3> = match next {
            None => cur.iter().map(|u| u.to_array()).collect(),
            Some(next) => {
                let next_cells = cells_of(next, gas, 0)?;
                cur_cells
                    .iter()
                    .zip(&next_cells)
                    .map(|(p, f)| self.temporal_flux(p, f))
                    .collect::<Result<_>>()?
            }
        };
        let fluxes = self.spatial_fluxes(&cur_cells, grid)?;
        Ok(cell_residuals(&top, &bottom, &fluxes, grid.lambda()))
    }

    fn block_residual(&self, prev: &[ConsState], block: &[Vec<Cell>], grid: &SpaceTimeGrid) -> Result<Vec<Vec<Vec3>>> {
        let k_slabs = block.len();
        let mut temporal: Vec<Vec<Vec3>> = Vec::with_capacity(k_slabs + 1);
        temporal.push(prev.iter().map(|u| u.to_array()).collect());
        for k in 1..k_slabs {
            temporal.push(
                block[k - 1]
                    .iter()
                    .zip(&block[k])
                    .map(|(p, f)| self.temporal_flux(p, f))
                    .collect::<Result<_>>()?,
            );
        }
        temporal.push(block[k_slabs - 1].iter().map(|c| c.u.to_array()).collect());
        (0..k_slabs)
            .map(|k| {
                let fluxes = self.spatial_fluxes(&block[k], grid)?;
                Ok(cell_residuals(&temporal[k + 1], &temporal[k], &fluxes, grid.lambda()))
            })
            .collect()
    }

    /// Finite-difference Jacobian of the block residual, assembled from the
    /// derivatives of every interface flux. Unknowns are ordered cell-major so
    /// that each spatial cell is one block of size `3·K`.
    fn block_jacobian(&self, block: &[Vec<Cell>], grid: &SpaceTimeGrid) -> Result<BlockTridiagonal> {
        let k_slabs = block.len();
        let n = grid.n_cells;
        let lambda = grid.lambda();
        let mut jac = BlockTridiagonal::zeros(n, 3 * k_slabs, grid.boundary == Boundary::Periodic);
        let gas = *self.gas();

        for (k, cells) in block.iter().enumerate() {
            for i in 0..=n {
                let (l, r) = interface_cells(i, n, grid.boundary);
                let ghost = l == r && (i == 0 || i == n) && grid.boundary == Boundary::Transmissive;
                if ghost {
                    let base = self.spatial_flux(&cells[l], &cells[l])?;
                    let d = fd_partial(&gas, &cells[l], &base, |c| self.spatial_flux(c, c))?;
                    let sign = if i == 0 { -lambda } else { lambda };
                    add_block(&mut jac.diag[l], k, k, sign, &d);
                    continue;
                }
                if grid.boundary == Boundary::Periodic && i == n {
                    continue;
                }
                let base = self.spatial_flux(&cells[l], &cells[r])?;
                let dl = fd_partial(&gas, &cells[l], &base, |c| self.spatial_flux(c, &cells[r]))?;
                let dr = fd_partial(&gas, &cells[r], &base, |c| self.spatial_flux(&cells[l], c))?;
                // cell r sees this interface on its left (-λ f), cell l on its right (+λ f)
                add_block(&mut jac.diag[r], k, k, -lambda, &dr);
                add_block(&mut jac.lower[r], k, k, -lambda, &dl);
                add_block(&mut jac.diag[l], k, k, lambda, &dl);
                add_block(&mut jac.upper[l], k, k, lambda, &dr);
            }
        }

        for k in 0..k_slabs.saturating_sub(1) {
            for j in 0..n {
                let (past, future) = (&block[k][j], &block[k + 1][j]);
                let (dp, df) = if self.config.temporal_flux.is_causal() {
                    (IDENTITY3, [[0.0; 3]; 3])
                } else {
                    let base = self.temporal_flux(past, future)?;
                    (
                        fd_partial(&gas, past, &base, |c| self.temporal_flux(c, future))?,
                        fd_partial(&gas, future, &base, |c| self.temporal_flux(past, c))?,
                    )
                };
                add_block(&mut jac.diag[j], k, k, 1.0, &dp);
                add_block(&mut jac.diag[j], k, k + 1, 1.0, &df);
                add_block(&mut jac.diag[j], k + 1, k, -1.0, &dp);
                add_block(&mut jac.diag[j], k + 1, k + 1, -1.0, &df);
            }
        }
        for j in 0..n {
            add_block(&mut jac.diag[j], k_slabs - 1, k_slabs - 1, 1.0, &IDENTITY3);
        }
        Ok(jac)
    }

    /// Damped Newton solve of `block_size` coupled slabs above `prev`, starting
    /// from `prev` in every slab.
    pub fn solve_block(&self, prev: &[ConsState], block_size: usize, grid: &SpaceTimeGrid) -> Result<Vec<SlabSolution>> {
        if block_size == 0 {
            return Err(Error::Config("block size must be at least 1".into()));
        }
        self.solve_block_from(prev, vec![prev.to_vec(); block_size], grid)
    }

    /// Single-slab solve; the degenerate block of size one.
    pub fn newton_solve_slab(
        &self,
        prev: &[ConsState],
        guess: Option<&[ConsState]>,
        grid: &SpaceTimeGrid,
    ) -> Result<SlabSolution> {
        let guess = guess.unwrap_or(prev).to_vec();
        let mut out = self.solve_block_from(prev, vec![guess], grid)?;
        Ok(out.remove(0))
    }

    /// Newton solve of the block from `guess`. When Newton stalls, the block
    /// is re-solved by continuation in the time step: `Δt` is ramped from 0,
    /// where `prev` is the exact solution, up to its full value, each stage
    /// starting from the previous one. The equations solved at the last stage
    /// are the original ones.
    pub fn solve_block_from(
        &self,
        prev: &[ConsState],
        guess: Vec<Vec<ConsState>>,
        grid: &SpaceTimeGrid,
    ) -> Result<Vec<SlabSolution>> {
        grid.validate()?;
        let n = grid.n_cells;
        if prev.len() != n || guess.iter().any(|g| g.len() != n) || guess.is_empty() {
            return Err(Error::Config(format!("slab data must have {n} cells")));
        }
        let gas = *self.gas();
        cells_of(prev, &gas, 0)?;
        let block: Vec<Vec<Cell>> = guess
            .iter()
            .enumerate()
            .map(|(k, g)| cells_of(g, &gas, k))
            .collect::<Result<_>>()?;
        let k_slabs = block.len();

        let (block, diagnostics) = match self.newton(prev, block, grid) {
            Err(Error::NoConvergence { iterations, .. }) => self.continuation(prev, k_slabs, grid, iterations)?,
            other => other?,
        };
        Ok(block
            .into_iter()
            .map(|cells| SlabSolution {
                states: cells.iter().map(|c| c.u).collect(),
                diagnostics,
            })
            .collect())
    }

    fn continuation(
        &self,
        prev: &[ConsState],
        k_slabs: usize,
        grid: &SpaceTimeGrid,
        spent: usize,
    ) -> Result<(Vec<Vec<Cell>>, NewtonDiagnostics)> {
        let mut block = vec![cells_of(prev, self.gas(), 0)?; k_slabs];
        let mut d = NewtonDiagnostics {
            iterations: spent,
            initial_residual: max_norm(&self.block_residual(prev, &block, grid)?),
            final_residual: f64::NAN,
            continuation_stages: 0,
        };
        let (mut s, mut ds) = (0.0, INITIAL_CONTINUATION_STEP);
        while s < 1.0 {
            let s_try = f64::min(s + ds, 1.0);
            let stage = SpaceTimeGrid {
                dt: s_try * grid.dt,
                ..*grid
            };
            match self.newton(prev, block.clone(), &stage) {
                Ok((solved, stage_d)) => {
                    block = solved;
                    s = s_try;
                    ds *= 2.0;
                    d.iterations += stage_d.iterations;
                    d.final_residual = stage_d.final_residual;
                    d.continuation_stages += 1;
                }
                Err(Error::NoConvergence { iterations, residual, .. }) => {
                    d.iterations += iterations;
                    ds *= 0.25;
                    if ds < MIN_CONTINUATION_STEP {
                        return Err(Error::NoConvergence {
                            slab: 0,
                            iterations: d.iterations,
                            residual,
                        });
                    }
                }
                Err(e) => return Err(e),
            }
        }
        Ok((block, d))
    }

    fn newton(
        &self,
        prev: &[ConsState],
        mut block: Vec<Vec<Cell>>,
        grid: &SpaceTimeGrid,
    ) -> Result<(Vec<Vec<Cell>>, NewtonDiagnostics)> {
        let n = grid.n_cells;
        let gas = *self.gas();
        let settings = self.config.newton;
        let k_slabs = block.len();
        let mut residual = self.block_residual(prev, &block, grid)?;
        let initial = max_norm(&residual);
        let target = settings.abs_tol.max(settings.rel_tol * initial);
        let mut current = initial;
        let mut iterations = 0;

        while current > target {
            if iterations == settings.max_iterations {
                return Err(Error::NoConvergence {
                    slab: 0,
                    iterations,
                    residual: current,
                });
            }
            let jac = self.block_jacobian(&block, grid)?;
            let rhs = flatten_cell_major(&residual, n, k_slabs, -1.0);
            let step = jac.solve(&rhs)?;
            let l2 = l2_norm(&residual);

            let mut alpha = settings.damping;
            let mut accepted = None;
            for _ in 0..=MAX_STEP_HALVINGS {
                if let Some(trial) = apply_step(&block, &step, alpha, &gas) {
                    if let Ok(trial_residual) = self.block_residual(prev, &trial, grid) {
                        if l2_norm(&trial_residual) <= (1.0 - 1e-4 * alpha) * l2 {
                            accepted = Some((trial, trial_residual));
                            break;
                        }
                    }
                }
                alpha *= 0.5;
            }
            iterations += 1;
            match accepted {
                Some((trial, trial_residual)) => {
                    block = trial;
                    residual = trial_residual;
                    current = max_norm(&residual);
                }
                None => {
                    return Err(Error::NoConvergence {
                        slab: 0,
                        iterations,
                        residual: current,
                    })
                }
            }
        }

        let diagnostics = NewtonDiagnostics {
            iterations,
            initial_residual: initial,
            final_residual: current,
            continuation_stages: 0,
        };
        Ok((block, diagnostics))
    }

    /// Solves every slab of `grid` above `initial`, block by block.
    pub fn march(&self, initial: &[ConsState], grid: &SpaceTimeGrid, mode: CouplingMode) -> Result<Trajectory> {
        grid.validate()?;
        let gas = *self.gas();
        cells_of(initial, &gas, 0)?;
        let block_size = mode.block_size(grid.n_slabs)?;
        let mut slabs: Vec<SlabSolution> = Vec::with_capacity(grid.n_slabs);
        let mut coupled = Vec::with_capacity(grid.n_slabs.saturating_sub(1));
        let mut start = 0;
        while start < grid.n_slabs {
            let size = block_size.min(grid.n_slabs - start);
            let prev = slabs.last().map_or(initial, |s| s.states.as_slice());
            let block = self.solve_block(prev, size, grid).map_err(|e| offset_slab(e, start))?;
            if start > 0 {
                coupled.push(false);
            }
            coupled.extend(std::iter::repeat_n(true, size - 1));
            slabs.extend(block);
            start += size;
        }

        let mut temporal_fluxes = Vec::with_capacity(grid.n_slabs + 1);
        temporal_fluxes.push(initial.iter().map(|u| u.to_array()).collect());
        for n in 0..grid.n_slabs - 1 {
            let flux = if coupled[n] {
                let past = cells_of(&slabs[n].states, &gas, n)?;
                let future = cells_of(&slabs[n + 1].states, &gas, n + 1)?;
                past.iter()
                    .zip(&future)
                    .map(|(p, f)| self.temporal_flux(p, f))
                    .collect::<Result<Vec<_>>>()?
            } else {
                slabs[n].states.iter().map(|u| u.to_array()).collect()
            };
            temporal_fluxes.push(flux);
        }
        temporal_fluxes.push(slabs[grid.n_slabs - 1].states.iter().map(|u| u.to_array()).collect());

        Ok(Trajectory {
            initial: initial.to_vec(),
            slabs,
            coupled,
            temporal_fluxes,
        })
    }
}

/// Solution over all slabs of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: Vec<ConsState>,
    pub slabs: Vec<SlabSolution>,
    /// `coupled[n]`: whether interface `n+½` carries the configured temporal
    /// flux (otherwise it is a block boundary and upwind).
    pub coupled: Vec<bool>,
    /// Temporal fluxes per interface; entry `i` sits at `t_{i-½}`, so entry 0
    /// is the imposed initial data and the last entry the final upwind closure.
    pub temporal_fluxes: Vec<Vec<Vec3>>,
}

impl Trajectory {
    pub fn n_slabs(&self) -> usize {
        self.slabs.len()
    }

    pub fn final_states(&self) -> &[ConsState] {
        &self.slabs.last().expect("at least one slab").states
    }

    /// `Σ_j u_j^{i-½} Δx` per temporal interface.
    pub fn conserved_totals(&self, dx: f64) -> Vec<Vec3> {
        self.temporal_fluxes
            .iter()
            .map(|fluxes| {
                let mut total = [0.0; 3];
                for f in fluxes {
                    for c in 0..3 {
                        total[c] += f[c] * dx;
                    }
                }
                total
            })
            .collect()
    }

    /// Largest change of each conserved total across the run, relative to
    /// the largest `Σ_j |u_j| Δx` met at any temporal interface (absolute
    /// when that is zero).
    pub fn conservation_drift(&self, dx: f64) -> Vec3 {
        let totals = self.conserved_totals(dx);
        let mut drift = [0.0; 3];
        for c in 0..3 {
            let scale = self
                .temporal_fluxes
                .iter()
                .map(|fluxes| fluxes.iter().map(|f| f[c].abs() * dx).sum::<f64>())
                .fold(0.0, f64::max);
            let scale = if scale > 0.0 { scale } else { 1.0 };
            for t in &totals {
                drift[c] = f64::max(drift[c], (t[c] - totals[0][c]).abs() / scale);
            }
        }
        drift
    }
}

/// A solved trajectory together with its entropy accounting.
#[derive(Debug, Clone)]
pub struct Run {
    pub trajectory: Trajectory,
    pub budgets: Vec<EntropyBudget>,
    /// `Σ_j Û_j Δx` per temporal interface.
    pub entropy_series: Vec<f64>,
}

/// Marches the scheme over the grid and balances entropy slab by slab.
pub fn advance(
    initial: &[ConsState],
    scheme: &Scheme,
    grid: &SpaceTimeGrid,
    mode: CouplingMode,
) -> Result<Run> {
    let trajectory = scheme.march(initial, grid, mode)?;
    let budgets = (0..trajectory.n_slabs())
        .map(|n| entropy_ledger::slab_entropy_balance(&trajectory, n, scheme, grid))
        .collect::<Result<Vec<_>>>()?;
    let entropy_series = entropy_ledger::global_entropy_series(&trajectory, scheme, grid)?;
    Ok(Run {
        trajectory,
        budgets,
        entropy_series,
    })
}

/// Left and right cell of spatial interface `i` (at `x_{i-½}`).
pub fn interface_cells(i: usize, n: usize, boundary: Boundary) -> (usize, usize) {
    match boundary {
        Boundary::Periodic => ((i + n - 1) % n, i % n),
        Boundary::Transmissive => {
            if i == 0 {
                (0, 0)
            } else if i == n {
                (n - 1, n - 1)
            } else {
                (i - 1, i)
            }
        }
    }
}

fn cell_residuals(top: &[Vec3], bottom: &[Vec3], fluxes: &[Vec3], lambda: f64) -> Vec<Vec3> {
    (0..top.len())
        .map(|j| {
            let mut r = [0.0; 3];
            for c in 0..3 {
                r[c] = (top[j][c] - bottom[j][c]) + lambda * (fluxes[j + 1][c] - fluxes[j][c]);
            }
            r
        })
        .collect()
}

const IDENTITY3: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn add_block(mat: &mut DMatrix<f64>, row_slab: usize, col_slab: usize, s: f64, d: &[[f64; 3]; 3]) {
    for (i, row) in d.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            mat[(3 * row_slab + i, 3 * col_slab + j)] += s * x;
        }
    }
}

// Forward-difference derivative of `f` with respect to the conservative state
// of `at`; steps backward when the forward perturbation is inadmissible.
fn fd_partial(
    gas: &GasParams,
    at: &Cell,
    base: &Vec3,
    f: impl Fn(&Cell) -> Result<Vec3>,
) -> Result<[[f64; 3]; 3]> {
    let x = at.u.to_array();
    let scale = x.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    let mut d = [[0.0; 3]; 3];
    for c in 0..3 {
        let h = f64::EPSILON.sqrt() * x[c].abs().max(scale);
        let mut column = None;
        for step in [h, -h] {
            let mut xp = x;
            xp[c] += step;
            if let Ok(cell) = Cell::new(ConsState::from_array(xp), gas) {
                let fp = f(&cell)?;
                column = Some((fp, xp[c] - x[c]));
                break;
            }
        }
        let (fp, step) = column.ok_or(Error::InvalidState { rho: at.w.rho, p: at.w.p })?;
        for (i, row) in d.iter_mut().enumerate() {
            row[c] = (fp[i] - base[i]) / step;
        }
    }
    Ok(d)
}

fn flatten_cell_major(residual: &[Vec<Vec3>], n: usize, k_slabs: usize, s: f64) -> Vec<f64> {
    let mut out = vec![0.0; n * k_slabs * 3];
    for (k, slab) in residual.iter().enumerate() {
        for (j, r) in slab.iter().enumerate() {
            for c in 0..3 {
                out[(j * k_slabs + k) * 3 + c] = s * r[c];
            }
        }
    }
    out
}

fn apply_step(block: &[Vec<Cell>], step: &[f64], alpha: f64, gas: &GasParams) -> Option<Vec<Vec<Cell>>> {
    let k_slabs = block.len();
    block
        .iter()
        .enumerate()
        .map(|(k, cells)| {
            cells
                .iter()
                .enumerate()
                .map(|(j, cell)| {
                    let mut x = cell.u.to_array();
                    for c in 0..3 {
                        x[c] += alpha * step[(j * k_slabs + k) * 3 + c];
                    }
                    Cell::new(ConsState::from_array(x), gas).ok()
                })
                .collect::<Option<Vec<_>>>()
        })
        .collect()
}

fn max_norm(residual: &[Vec<Vec3>]) -> f64 {
    residual
        .iter()
        .flatten()
        .flat_map(|r| r.iter())
        .fold(0.0, |m: f64, x| m.max(x.abs()))
}

fn l2_norm(residual: &[Vec<Vec3>]) -> f64 {
    residual
        .iter()
        .flatten()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}

fn offset_slab(err: Error, offset: usize) -> Error {
    match err {
        Error::CellState { slab, cell, rho, p } => Error::CellState {
            slab: slab + offset,
            cell,
            rho,
            p,
        },
        Error::NoConvergence {
            slab,
            iterations,
            residual,
        } => Error::NoConvergence {
            slab: slab + offset,
            iterations,
            residual,
        },
        Error::InSlab { slab, source } => Error::InSlab {
            slab: slab + offset,
            source,
        },
        other => Error::InSlab {
            slab: offset,
            source: Box::new(other),
        },
    }
}
