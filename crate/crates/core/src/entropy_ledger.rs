//! Discrete entropy accounting for space-time runs.
//!
//! Numerical entropy fluxes take the symmetric form
//! `F̂ = ½(v_L + v_R)·f − ½(ψ_L + ψ_R)` in space and
//! `Û = ½(v_P + v_F)·u − ½(φ_P + φ_F)` in time, so that
//!
//! ```text
//! R_j^n = [Û^{n+½} − Û^{n−½}] + λ[F̂_{j+½} − F̂_{j−½}]
//!       = v_j·(cell residual) − ½(P_{n−½} + P_{n+½}) − ½λ(P_{j−½} + P_{j+½})
//! ```
//!
//! with interface productions `P = [potential] − [v]·flux`. The imposed
//! initial data and the upwind closure of the last slab are one-sided
//! interfaces: their entropy flux is `v·u − φ` of the adjacent solved slab and
//! they carry no production.

use serde::Serialize;

use crate::dissipation::{
    entropy_production_space, entropy_production_time, upwind_equivalent_t_prim, SymMatrix3,
};
use crate::error::Result;
use crate::flux_algebra::InterfaceFluxKind;
use crate::gas_model::{dot, flux_potentials, sub, EntropyVars, GasParams, Vec3};
use crate::spacetime_solver::{cells_of, interface_cells, Cell, Scheme, SpaceTimeGrid, Trajectory};

/// `½(v_L + v_R)·f − ½(ψ_L + ψ_R)`.
pub fn numerical_entropy_flux_space(
    vl: &EntropyVars,
    vr: &EntropyVars,
    flux: &Vec3,
    gas: &GasParams,
) -> Result<f64> {
    let (psi_l, _) = flux_potentials(&gas.vars_to_prim(vl)?);
    let (psi_r, _) = flux_potentials(&gas.vars_to_prim(vr)?);
    Ok(two_point(&vl.to_array(), &vr.to_array(), psi_l, psi_r, flux))
}

/// `½(v_P + v_F)·u − ½(φ_P + φ_F)`.
pub fn numerical_entropy_flux_time(
    v_past: &EntropyVars,
    v_future: &EntropyVars,
    flux: &Vec3,
    gas: &GasParams,
) -> Result<f64> {
    let (_, phi_p) = flux_potentials(&gas.vars_to_prim(v_past)?);
    let (_, phi_f) = flux_potentials(&gas.vars_to_prim(v_future)?);
    Ok(two_point(&v_past.to_array(), &v_future.to_array(), phi_p, phi_f, flux))
}

fn two_point(va: &Vec3, vb: &Vec3, pot_a: f64, pot_b: f64, flux: &Vec3) -> f64 {
    let mean = [0.5 * (va[0] + vb[0]), 0.5 * (va[1] + vb[1]), 0.5 * (va[2] + vb[2])];
    dot(&mean, flux) - 0.5 * (pot_a + pot_b)
}

fn spatial_potential(c: &Cell) -> f64 {
    flux_potentials(&c.w).0
}

fn temporal_potential(c: &Cell) -> f64 {
    flux_potentials(&c.w).1
}

/// `[potential] − [v]·flux` across an interface.
fn measured_production(a: &Cell, b: &Cell, pot_a: f64, pot_b: f64, flux: &Vec3) -> f64 {
    let dv = sub(&b.v.to_array(), &a.v.to_array());
    (pot_b - pot_a) - dot(&dv, flux)
}

/// Entropy accounting of one slab. Temporal quantities are stored per cell at
/// the interfaces below (`past`) and above (`future`) the slab; spatial ones
/// per interface, entry `i` at `x_{i−½}`. Productions are integrated over the
/// cell in the units of `R_j` (i.e. multiplied by `Δt`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyBudget {
    pub slab: usize,
    /// Time of the upper temporal interface.
    pub time: f64,
    pub cell_residual: Vec<f64>,
    pub temporal_production_past: Vec<f64>,
    pub temporal_production_future: Vec<f64>,
    pub spatial_production: Vec<f64>,
    pub temporal_production_formula_past: Vec<f64>,
    pub temporal_production_formula_future: Vec<f64>,
    pub spatial_production_formula: Vec<f64>,
    /// `½(P_{n−½} + P_{n+½}) + ½λ(P_{j−½} + P_{j+½})`.
    pub cell_production: Vec<f64>,
    /// Same from the dissipation matrices, `ℰ_j Δt`.
    pub cell_production_formula: Vec<f64>,
    /// `Σ_j Û^{n−½} Δx`.
    pub total_entropy_past: f64,
    /// `Σ_j Û^{n+½} Δx`.
    pub total_entropy_future: f64,
    /// `Σ_j ρS Δx` at the upper interface, `−(γ−1)` times the U-total.
    pub total_rho_s_future: f64,
    pub temporal_production_total: f64,
    pub spatial_production_total: f64,
    pub max_cell_residual: f64,
}

impl EntropyBudget {
    /// `max_j |R_j + ℰ_j Δt| / max(1, |ℰ_j Δt|)`.
    pub fn formula_mismatch(&self) -> f64 {
        self.cell_residual
            .iter()
            .zip(&self.cell_production_formula)
            .map(|(r, e)| (r + e).abs() / e.abs().max(1.0))
            .fold(0.0, f64::max)
    }

    /// Largest disagreement between a measured interface production and its
    /// formula, relative to `max(1, |formula|)`.
    pub fn interface_mismatch(&self) -> f64 {
        let pairs = self
            .temporal_production_past
            .iter()
            .zip(&self.temporal_production_formula_past)
            .chain(self.temporal_production_future.iter().zip(&self.temporal_production_formula_future))
            .chain(self.spatial_production.iter().zip(&self.spatial_production_formula));
        pairs.map(|(m, f)| (m - f).abs() / f.abs().max(1.0)).fold(0.0, f64::max)
    }

    /// Smallest interface production; negative values beyond roundoff mean
    /// entropy was created by a flux that should dissipate it.
    pub fn min_production(&self) -> f64 {
        self.temporal_production_past
            .iter()
            .chain(&self.temporal_production_future)
            .chain(&self.spatial_production)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Dissipation matrix implied by a temporal flux between two solved slabs.
fn temporal_matrix(scheme: &Scheme, kind: InterfaceFluxKind, p: &Cell, f: &Cell) -> Result<SymMatrix3> {
    let gas = scheme.gas();
    match kind {
        InterfaceFluxKind::UpwindTime => upwind_equivalent_t_prim(&p.w, &f.w, scheme.ledger_rule(), gas),
        InterfaceFluxKind::EsTime { .. } => scheme
            .temporal_dissipation()
            .expect("validated in scheme")
            .matrix(&p.w, &f.w, gas),
        _ => Ok(SymMatrix3::ZERO),
    }
}

fn spatial_matrix(scheme: &Scheme, l: &Cell, r: &Cell) -> Result<SymMatrix3> {
    match scheme.spatial_dissipation() {
        Some(d) => d.matrix(&l.w, &r.w, scheme.gas()),
        None => Ok(SymMatrix3::ZERO),
    }
}

struct TemporalInterface {
    entropy_flux: Vec<f64>,
    production: Vec<f64>,
    formula: Vec<f64>,
}

// Interface `i` sits at `t_{i−½}`; `i = 0` and `i = n_slabs` are one-sided.
fn temporal_interface(traj: &Trajectory, i: usize, scheme: &Scheme, formulas: bool) -> Result<TemporalInterface> {
    let gas = scheme.gas();
    let n_slabs = traj.n_slabs();
    let fluxes = &traj.temporal_fluxes[i];
    if i == 0 || i == n_slabs {
        let slab = if i == 0 { 0 } else { n_slabs - 1 };
        let cells = cells_of(&traj.slabs[slab].states, gas, slab)?;
        let entropy_flux = cells
            .iter()
            .zip(fluxes)
            .map(|(c, f)| dot(&c.v.to_array(), f) - temporal_potential(c))
            .collect();
        return Ok(TemporalInterface {
            entropy_flux,
            production: vec![0.0; cells.len()],
            formula: vec![0.0; cells.len()],
        });
    }
    let past = cells_of(&traj.slabs[i - 1].states, gas, i - 1)?;
    let future = cells_of(&traj.slabs[i].states, gas, i)?;
    let kind = if traj.coupled[i - 1] {
        scheme.config().temporal_flux
    } else {
        InterfaceFluxKind::UpwindTime
    };
    let n = past.len();
    let mut out = TemporalInterface {
        entropy_flux: Vec::with_capacity(n),
        production: Vec::with_capacity(n),
        formula: Vec::with_capacity(n),
    };
    for ((p, f), flux) in past.iter().zip(&future).zip(fluxes) {
        let (phi_p, phi_f) = (temporal_potential(p), temporal_potential(f));
        out.entropy_flux.push(two_point(&p.v.to_array(), &f.v.to_array(), phi_p, phi_f, flux));
        out.production.push(measured_production(p, f, phi_p, phi_f, flux));
        let formula = if formulas && p.u != f.u {
            let dv = sub(&f.v.to_array(), &p.v.to_array());
            // Δt·(1/(2Δt))·(quad + 0) doubled back to the full interface value
            2.0 * entropy_production_time(&[0.0; 3], &dv, &SymMatrix3::ZERO, &temporal_matrix(scheme, kind, p, f)?, 1.0)
        } else {
            0.0
        };
        out.formula.push(formula);
    }
    Ok(out)
}

/// Entropy balance of slab `n` of a solved trajectory.
pub fn slab_entropy_balance(traj: &Trajectory, n: usize, scheme: &Scheme, grid: &SpaceTimeGrid) -> Result<EntropyBudget> {
    let gas = scheme.gas();
    let cells = cells_of(&traj.slabs[n].states, gas, n)?;
    let n_cells = cells.len();
    let lambda = grid.lambda();

    let past = temporal_interface(traj, n, scheme, true)?;
    let future = temporal_interface(traj, n + 1, scheme, true)?;

    let fluxes = scheme.spatial_fluxes(&cells, grid)?;
    let mut entropy_flux = Vec::with_capacity(n_cells + 1);
    let mut spatial_production = Vec::with_capacity(n_cells + 1);
    let mut spatial_formula = Vec::with_capacity(n_cells + 1);
    for (i, f) in fluxes.iter().enumerate() {
        let (l, r) = interface_cells(i, n_cells, grid.boundary);
        let (cl, cr) = (&cells[l], &cells[r]);
        let (psi_l, psi_r) = (spatial_potential(cl), spatial_potential(cr));
        entropy_flux.push(two_point(&cl.v.to_array(), &cr.v.to_array(), psi_l, psi_r, f));
        spatial_production.push(measured_production(cl, cr, psi_l, psi_r, f));
        let formula = if cl.u != cr.u {
            let dv = sub(&cr.v.to_array(), &cl.v.to_array());
            2.0 * entropy_production_space(&[0.0; 3], &dv, &SymMatrix3::ZERO, &spatial_matrix(scheme, cl, cr)?, 1.0)
        } else {
            0.0
        };
        spatial_formula.push(formula);
    }

    let mut cell_residual = Vec::with_capacity(n_cells);
    let mut cell_production = Vec::with_capacity(n_cells);
    let mut cell_production_formula = Vec::with_capacity(n_cells);
    for j in 0..n_cells {
        cell_residual.push(
            (future.entropy_flux[j] - past.entropy_flux[j]) + lambda * (entropy_flux[j + 1] - entropy_flux[j]),
        );
        cell_production.push(
            0.5 * (past.production[j] + future.production[j])
                + 0.5 * lambda * (spatial_production[j] + spatial_production[j + 1]),
        );
        cell_production_formula.push(
            0.5 * (past.formula[j] + future.formula[j])
                + 0.5 * lambda * (spatial_formula[j] + spatial_formula[j + 1]),
        );
    }

    let dx = grid.dx;
    let total_entropy_future: f64 = future.entropy_flux.iter().sum::<f64>() * dx;
    Ok(EntropyBudget {
        slab: n,
        time: (n + 1) as f64 * grid.dt,
        max_cell_residual: cell_residual.iter().fold(0.0, |m: f64, r| m.max(r.abs())),
        cell_residual,
        temporal_production_total: 0.5 * (past.production.iter().sum::<f64>() + future.production.iter().sum::<f64>()) * dx,
        spatial_production_total: 0.5
            * lambda
            * dx
            * (0..n_cells).map(|j| spatial_production[j] + spatial_production[j + 1]).sum::<f64>(),
        temporal_production_past: past.production,
        temporal_production_future: future.production,
        spatial_production,
        temporal_production_formula_past: past.formula,
        temporal_production_formula_future: future.formula,
        spatial_production_formula: spatial_formula,
        cell_production,
        cell_production_formula,
        total_entropy_past: past.entropy_flux.iter().sum::<f64>() * dx,
        total_entropy_future,
        total_rho_s_future: -(gas.gamma - 1.0) * total_entropy_future,
    })
}

/// `Σ_j Û_j Δx` at every temporal interface, from the imposed data to the
/// final closure.
pub fn global_entropy_series(traj: &Trajectory, scheme: &Scheme, grid: &SpaceTimeGrid) -> Result<Vec<f64>> {
    (0..=traj.n_slabs())
        .map(|i| Ok(temporal_interface(traj, i, scheme, false)?.entropy_flux.iter().sum::<f64>() * grid.dx))
        .collect()
}
