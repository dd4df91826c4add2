//! Entropy-conservative interface fluxes in space and in time.
//!
//! A spatial flux `f*` is entropy conservative when `[v]·f* = [ψ]` with
//! `ψ = ρu`; a temporal flux `u*` when `[v]·u* = [φ]` with `φ = ρ`. The
//! Roe-type fluxes solve those conditions in closed form through the
//! z-variables, the Tadmor-type fluxes integrate along the straight path in
//! entropy variables and are exact only up to quadrature error.

use serde::{Deserialize, Serialize};

use crate::dissipation::DissipationSpec;
use crate::error::{Error, Result};
use crate::gas_model::{
    arith_mean, dot, flux_potentials, log_mean, sub, EntropyVars, GasParams, PrimState, Vec3,
    ZVars,
};
use crate::quadrature::QuadratureRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Space,
    Time,
}

/// Interface flux selection. Entropy-stable variants subtract a dissipation
/// term from the Roe-type entropy-conservative flux of the same direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InterfaceFluxKind {
    RoeEcSpace,
    TadmorEcSpace,
    RoeEcTime,
    TadmorEcTime,
    UpwindTime,
    EsSpace { dissipation: DissipationSpec },
    EsTime { dissipation: DissipationSpec },
}

impl InterfaceFluxKind {
    pub fn direction(&self) -> Direction {
        match self {
            Self::RoeEcSpace | Self::TadmorEcSpace | Self::EsSpace { .. } => Direction::Space,
            Self::RoeEcTime | Self::TadmorEcTime | Self::UpwindTime | Self::EsTime { .. } => {
                Direction::Time
            }
        }
    }

    pub fn dissipation(&self) -> Option<&DissipationSpec> {
        match self {
            Self::EsSpace { dissipation } | Self::EsTime { dissipation } => Some(dissipation),
            _ => None,
        }
    }

    /// True when the flux reads only the past-slab state.
    pub fn is_causal(&self) -> bool {
        matches!(self, Self::UpwindTime)
    }
}

struct ZMeans {
    z1: f64,
    z2: f64,
    z3: f64,
    z1_ln: f64,
    z3_ln: f64,
}

fn z_means(wl: &PrimState, wr: &PrimState) -> Result<ZMeans> {
    wl.validate()?;
    wr.validate()?;
    let zl = ZVars::from_prim(wl);
    let zr = ZVars::from_prim(wr);
    Ok(ZMeans {
        z1: arith_mean(zl.z1, zr.z1),
        z2: arith_mean(zl.z2, zr.z2),
        z3: arith_mean(zl.z3, zr.z3),
        z1_ln: log_mean(zl.z1, zr.z1)?,
        z3_ln: log_mean(zl.z3, zr.z3)?,
    })
}

/// Closed-form entropy-conservative spatial flux.
pub fn roe_ec_spatial_flux(wl: &PrimState, wr: &PrimState, gas: &GasParams) -> Result<Vec3> {
    let z = z_means(wl, wr)?;
    let g = gas.gamma;
    let f1 = z.z2 * z.z3_ln;
    let f2 = (z.z3 + f1 * z.z2) / z.z1;
    let f3 = (-f1 * ((1.0 + g) / (1.0 - g)) / z.z1_ln + f2 * z.z2) / (2.0 * z.z1);
    Ok([f1, f2, f3])
}

/// Closed-form entropy-conservative temporal flux.
pub fn roe_ec_temporal_flux(w_past: &PrimState, w_future: &PrimState, gas: &GasParams) -> Result<Vec3> {
    let z = z_means(w_past, w_future)?;
    let g = gas.gamma;
    let u1 = z.z1 * z.z3_ln;
    let u2 = u1 * z.z2 / z.z1;
    let u3 = (-u1 * ((1.0 + g) / (1.0 - g)) / z.z1_ln + u2 * z.z2 - z.z3) / (2.0 * z.z1);
    Ok([u1, u2, u3])
}

/// Primitive states at the quadrature nodes of the straight path
/// `v(ξ) = vL + ξ(vR - vL)`, paired with `(ξ, weight)`.
pub fn path_states(
    vl: &EntropyVars,
    vr: &EntropyVars,
    q: &QuadratureRule,
    gas: &GasParams,
) -> Result<Vec<(f64, f64, PrimState)>> {
    let a = vl.to_array();
    let dv = sub(&vr.to_array(), &a);
    q.iter()
        .enumerate()
        .map(|(node, (xi, w))| {
            let v = EntropyVars::from_array([a[0] + xi * dv[0], a[1] + xi * dv[1], a[2] + xi * dv[2]]);
            gas.vars_to_prim(&v)
                .map(|state| (xi, w, state))
                .map_err(|_| Error::PathInadmissible { node, xi })
        })
        .collect()
}

/// [`path_states`] for admissible primitive endpoints, evaluated without the
/// cancellation in `v1 + v2²/(2β)` that the generic inverse map suffers for
/// fast or dilute states.
///
/// With `e = v1 + v2²/(2β) = (γ − S)/(γ − 1)` and `β = ρ/p`, along the straight
/// path `e(ξ) = (1−ξ)e_L + ξe_R − ξ(1−ξ)β_Lβ_R(u_L − u_R)²/(2β(ξ))`.
pub fn path_states_prim(
    wl: &PrimState,
    wr: &PrimState,
    q: &QuadratureRule,
    gas: &GasParams,
) -> Result<Vec<(f64, f64, PrimState)>> {
    wl.validate()?;
    wr.validate()?;
    let g = gas.gamma;
    let (bl, br) = (wl.rho / wl.p, wr.rho / wr.p);
    let (ml, mr) = (bl * wl.u, br * wr.u);
    let el = (g - wl.specific_entropy(gas)) / (g - 1.0);
    let er = (g - wr.specific_entropy(gas)) / (g - 1.0);
    let bend = 0.5 * bl * br * (wl.u - wr.u) * (wl.u - wr.u);
    q.iter()
        .enumerate()
        .map(|(node, (xi, w))| {
            let beta = (1.0 - xi) * bl + xi * br;
            let u = ((1.0 - xi) * ml + xi * mr) / beta;
            let e = (1.0 - xi) * el + xi * er - xi * (1.0 - xi) * bend / beta;
            let s = g - (g - 1.0) * e;
            let rho = ((s + beta.ln()) / (1.0 - g)).exp();
            let state = PrimState::new(rho, u, rho / beta);
            state
                .validate()
                .map(|_| (xi, w, state))
                .map_err(|_| Error::PathInadmissible { node, xi })
        })
        .collect()
}

fn path_average(
    states: Vec<(f64, f64, PrimState)>,
    integrand: impl Fn(&PrimState) -> Vec3,
) -> Result<Vec3> {
    let mut acc = [0.0; 3];
    for (_, w, state) in states {
        let f = integrand(&state);
        for i in 0..3 {
            acc[i] += w * f[i];
        }
    }
    Ok(acc)
}

/// `∫₀¹ f(v(ξ)) dξ` by quadrature.
pub fn tadmor_ec_spatial_flux(
    vl: &EntropyVars,
    vr: &EntropyVars,
    q: &QuadratureRule,
    gas: &GasParams,
) -> Result<Vec3> {
    if vl == vr {
        return Ok(gas.physical_flux(&gas.vars_to_prim(vl)?));
    }
    path_average(path_states(vl, vr, q, gas)?, |w| gas.physical_flux(w))
}

/// [`tadmor_ec_spatial_flux`] from primitive endpoints.
pub fn tadmor_ec_spatial_flux_prim(wl: &PrimState, wr: &PrimState, q: &QuadratureRule, gas: &GasParams) -> Result<Vec3> {
    if wl == wr {
        wl.validate()?;
        return Ok(gas.physical_flux(wl));
    }
    path_average(path_states_prim(wl, wr, q, gas)?, |w| gas.physical_flux(w))
}

/// `∫₀¹ u(v(ξ)) dξ` by quadrature.
pub fn tadmor_ec_temporal_flux(
    v_past: &EntropyVars,
    v_future: &EntropyVars,
    q: &QuadratureRule,
    gas: &GasParams,
) -> Result<Vec3> {
    if v_past == v_future {
        return Ok(gas.state_vector(&gas.vars_to_prim(v_past)?));
    }
    path_average(path_states(v_past, v_future, q, gas)?, |w| gas.state_vector(w))
}

/// [`tadmor_ec_temporal_flux`] from primitive endpoints.
pub fn tadmor_ec_temporal_flux_prim(
    w_past: &PrimState,
    w_future: &PrimState,
    q: &QuadratureRule,
    gas: &GasParams,
) -> Result<Vec3> {
    if w_past == w_future {
        w_past.validate()?;
        return Ok(gas.state_vector(w_past));
    }
    path_average(path_states_prim(w_past, w_future, q, gas)?, |w| gas.state_vector(w))
}

/// `[v]·flux - [ψ]` in space or `[v]·flux - [φ]` in time.
pub fn ec_residual(
    flux: &Vec3,
    vl: &EntropyVars,
    vr: &EntropyVars,
    direction: Direction,
    gas: &GasParams,
) -> Result<f64> {
    let (psi_l, phi_l) = flux_potentials(&gas.vars_to_prim(vl)?);
    let (psi_r, phi_r) = flux_potentials(&gas.vars_to_prim(vr)?);
    let jump = match direction {
        Direction::Space => psi_r - psi_l,
        Direction::Time => phi_r - phi_l,
    };
    Ok(dot(&sub(&vr.to_array(), &vl.to_array()), flux) - jump)
}

/// Same as [`ec_residual`] but with the potential jump computed from
/// primitive states directly, avoiding the round trip through `v`.
pub fn ec_residual_prim(
    flux: &Vec3,
    wl: &PrimState,
    wr: &PrimState,
    direction: Direction,
    gas: &GasParams,
) -> f64 {
    let (psi_l, phi_l) = flux_potentials(wl);
    let (psi_r, phi_r) = flux_potentials(wr);
    let jump = match direction {
        Direction::Space => psi_r - psi_l,
        Direction::Time => phi_r - phi_l,
    };
    let dv = sub(&gas.entropy_vars(wr).to_array(), &gas.entropy_vars(wl).to_array());
    dot(&dv, flux) - jump
}
