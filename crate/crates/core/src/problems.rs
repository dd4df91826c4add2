//! Verification problems: initial data, exact solutions and error metrics.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gas_model::{ConsState, GasParams, PrimState};
use crate::spacetime_solver::{Boundary, SpaceTimeGrid};

pub const RIEMANN_TOL: f64 = 1e-12;
const RIEMANN_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiemannIc {
    pub left: PrimState,
    pub right: PrimState,
    pub x0: f64,
    pub xa: f64,
    pub xb: f64,
}

impl RiemannIc {
    pub fn validate(&self) -> Result<()> {
        if !(self.xa < self.x0 && self.x0 < self.xb) {
            return Err(Error::Config(format!(
                "diaphragm {} outside ({}, {})",
                self.x0, self.xa, self.xb
            )));
        }
        self.left.validate()?;
        self.right.validate()
    }
}

/// Initial data of a problem, as a function of position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitialData {
    Riemann(RiemannIc),
    /// `ρ = 1 + amplitude·sin(2πx)` advected with constant `u`, `p`.
    DensityWave { amplitude: f64, velocity: f64, pressure: f64 },
    Constant(PrimState),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSetup {
    pub data: InitialData,
    pub xa: f64,
    pub xb: f64,
    pub boundary: Boundary,
    pub final_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Toro123,
    Sod,
    DensityWave,
    Constant,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Toro123, Preset::Sod, Preset::DensityWave, Preset::Constant];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Toro123 => "toro123",
            Self::Sod => "sod",
            Self::DensityWave => "density_wave",
            Self::Constant => "constant",
        }
    }

    pub fn setup(&self) -> ProblemSetup {
        let riemann = |left, right| InitialData::Riemann(RiemannIc {
            left,
            right,
            x0: 0.5,
            xa: 0.0,
            xb: 1.0,
        });
        let (data, boundary, final_time) = match self {
            Self::Toro123 => (
                riemann(PrimState::new(1.0, -2.0, 0.4), PrimState::new(1.0, 2.0, 0.4)),
                Boundary::Transmissive,
                0.15,
            ),
            Self::Sod => (
                riemann(PrimState::new(1.0, 0.0, 1.0), PrimState::new(0.125, 0.0, 0.1)),
                Boundary::Transmissive,
                0.2,
            ),
            Self::DensityWave => (
                InitialData::DensityWave {
                    amplitude: 0.2,
                    velocity: 1.0,
                    pressure: 1.0,
                },
                Boundary::Periodic,
                1.0,
            ),
            Self::Constant => (
                InitialData::Constant(PrimState::new(1.0, 0.0, 1.0)),
                Boundary::Periodic,
                1.0,
            ),
        };
        ProblemSetup {
            data,
            xa: 0.0,
            xb: 1.0,
            boundary,
            final_time,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|p| p.name() == key || (key == "densitywave" && *p == Self::DensityWave))
            .ok_or_else(|| Error::Config(format!("unknown preset '{s}'")))
    }
}

impl ProblemSetup {
    pub fn validate(&self) -> Result<()> {
        if !(self.xa < self.xb) {
            return Err(Error::Config(format!("empty domain [{}, {}]", self.xa, self.xb)));
        }
        if !(self.final_time > 0.0) {
            return Err(Error::Config(format!("final time {} must be positive", self.final_time)));
        }
        match self.data {
            InitialData::Riemann(ic) => {
                ic.validate()?;
                if ic.xa != self.xa || ic.xb != self.xb {
                    return Err(Error::Config("Riemann domain differs from problem domain".into()));
                }
            }
            InitialData::DensityWave { amplitude, pressure, .. } => {
                if !(amplitude.abs() < 1.0 && pressure > 0.0) {
                    return Err(Error::Config("density wave needs |amplitude| < 1 and p > 0".into()));
                }
            }
            InitialData::Constant(w) => w.validate()?,
        }
        Ok(())
    }

    pub fn dx(&self, n_cells: usize) -> f64 {
        (self.xb - self.xa) / n_cells as f64
    }

    pub fn cell_centers(&self, n_cells: usize) -> Vec<f64> {
        let dx = self.dx(n_cells);
        (0..n_cells).map(|j| self.xa + (j as f64 + 0.5) * dx).collect()
    }

    pub fn initial_at(&self, x: f64) -> PrimState {
        match self.data {
            InitialData::Riemann(ic) => {
                if x < ic.x0 {
                    ic.left
                } else {
                    ic.right
                }
            }
            InitialData::DensityWave {
                amplitude,
                velocity,
                pressure,
            } => PrimState::new(1.0 + amplitude * (2.0 * PI * x).sin(), velocity, pressure),
            InitialData::Constant(w) => w,
        }
    }

    /// Cell means by midpoint sampling.
    pub fn initial_prims(&self, n_cells: usize) -> Vec<PrimState> {
        self.cell_centers(n_cells).into_iter().map(|x| self.initial_at(x)).collect()
    }

    pub fn initial_states(&self, n_cells: usize, gas: &GasParams) -> Result<Vec<ConsState>> {
        self.initial_prims(n_cells).iter().map(|w| gas.prim_to_cons(w)).collect()
    }

    /// Exact solution at `(x, t)`.
    pub fn exact_at(&self, x: f64, t: f64, gas: &GasParams) -> Result<PrimState> {
        match self.data {
            InitialData::Riemann(ic) => {
                if t <= 0.0 {
                    return Ok(self.initial_at(x));
                }
                exact_riemann(&ic.left, &ic.right, (x - ic.x0) / t, gas)
            }
            InitialData::DensityWave { velocity, .. } => {
                let len = self.xb - self.xa;
                let shifted = (x - velocity * t - self.xa).rem_euclid(len) + self.xa;
                Ok(self.initial_at(shifted))
            }
            InitialData::Constant(w) => Ok(w),
        }
    }

    pub fn exact_prims(&self, n_cells: usize, t: f64, gas: &GasParams) -> Result<Vec<PrimState>> {
        self.cell_centers(n_cells).into_iter().map(|x| self.exact_at(x, t, gas)).collect()
    }

    fn max_initial_speed(&self, n_cells: usize, gas: &GasParams) -> f64 {
        self.initial_prims(n_cells)
            .iter()
            .map(|w| w.max_wave_speed(gas))
            .fold(0.0, f64::max)
    }

    /// Grid reaching `t_final` with `Δt` no larger than `cfl·Δx / max(|u|+a)`
    /// measured on the initial data.
    pub fn grid_to_time(&self, n_cells: usize, cfl: f64, t_final: f64, gas: &GasParams) -> Result<SpaceTimeGrid> {
        if !(cfl > 0.0 && t_final > 0.0) {
            return Err(Error::Config(format!("cfl {cfl} and final time {t_final} must be positive")));
        }
        let dx = self.dx(n_cells);
        let dt_max = cfl * dx / self.max_initial_speed(n_cells, gas);
        let n_slabs = (t_final / dt_max - 1e-9).ceil().max(1.0) as usize;
        SpaceTimeGrid::new(n_cells, dx, t_final / n_slabs as f64, n_slabs, self.boundary)
    }

    /// Grid of `n_slabs` slabs with `Δt = cfl·Δx / max(|u|+a)`.
    pub fn grid_with_slabs(&self, n_cells: usize, cfl: f64, n_slabs: usize, gas: &GasParams) -> Result<SpaceTimeGrid> {
        if !(cfl > 0.0) {
            return Err(Error::Config(format!("cfl {cfl} must be positive")));
        }
        let dx = self.dx(n_cells);
        let dt = cfl * dx / self.max_initial_speed(n_cells, gas);
        SpaceTimeGrid::new(n_cells, dx, dt, n_slabs, self.boundary)
    }
}

pub fn preset_ic(p: Preset, n_cells: usize, gas: &GasParams) -> Result<Vec<ConsState>> {
    p.setup().initial_states(n_cells, gas)
}

/// Star region of a Riemann problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannSolution {
    pub left: PrimState,
    pub right: PrimState,
    pub p_star: f64,
    pub u_star: f64,
    pub gamma: f64,
}

impl RiemannSolution {
    pub fn solve(left: &PrimState, right: &PrimState, gas: &GasParams) -> Result<Self> {
        left.validate()?;
        right.validate()?;
        let g = gas.gamma;
        let (al, ar) = (left.sound_speed(gas), right.sound_speed(gas));
        let du = right.u - left.u;
        let critical = 2.0 * (al + ar) / (g - 1.0);
        if critical <= du {
            return Err(Error::Vacuum { critical, jump: du });
        }

        // two-rarefaction guess, exact when both waves are rarefactions
        let z = (g - 1.0) / (2.0 * g);
        let mut p = ((al + ar - 0.5 * (g - 1.0) * du) / (al / left.p.powf(z) + ar / right.p.powf(z))).powf(1.0 / z);
        let mut converged = false;
        for _ in 0..RIEMANN_MAX_ITER {
            let (fl, dfl) = pressure_function(p, left, al, g);
            let (fr, dfr) = pressure_function(p, right, ar, g);
            let mut next = p - (fl + fr + du) / (dfl + dfr);
            if next <= 0.0 {
                next = 0.5 * p;
            }
            let change = 2.0 * (next - p).abs() / (next + p);
            p = next;
            if change <= RIEMANN_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence {
                slab: 0,
                iterations: RIEMANN_MAX_ITER,
                residual: p,
            });
        }
        let (fl, _) = pressure_function(p, left, al, g);
        let (fr, _) = pressure_function(p, right, ar, g);
        Ok(Self {
            left: *left,
            right: *right,
            p_star: p,
            u_star: 0.5 * (left.u + right.u) + 0.5 * (fr - fl),
            gamma: g,
        })
    }

    /// Density on the left and right of the contact.
    pub fn star_densities(&self) -> (f64, f64) {
        (
            star_density(&self.left, self.p_star, self.gamma),
            star_density(&self.right, self.p_star, self.gamma),
        )
    }

    /// State along the ray `x/t = ξ`.
    pub fn sample(&self, xi: f64) -> PrimState {
        if xi <= self.u_star {
            sample_left(&self.left, self.p_star, self.u_star, xi, self.gamma)
        } else {
            sample_left(&self.right.mirrored(), self.p_star, -self.u_star, -xi, self.gamma).mirrored()
        }
    }
}

/// Exact solution of the Riemann problem along `x/t = ξ`.
pub fn exact_riemann(left: &PrimState, right: &PrimState, xi: f64, gas: &GasParams) -> Result<PrimState> {
    if left == right {
        left.validate()?;
        return Ok(*left);
    }
    Ok(RiemannSolution::solve(left, right, gas)?.sample(xi))
}

// Toro's f_K(p) and its derivative.
fn pressure_function(p: f64, w: &PrimState, a: f64, g: f64) -> (f64, f64) {
    if p > w.p {
        let big_a = 2.0 / ((g + 1.0) * w.rho);
        let big_b = (g - 1.0) / (g + 1.0) * w.p;
        let root = (big_a / (p + big_b)).sqrt();
        ((p - w.p) * root, root * (1.0 - 0.5 * (p - w.p) / (p + big_b)))
    } else {
        let ratio = p / w.p;
        let f = 2.0 * a / (g - 1.0) * (ratio.powf((g - 1.0) / (2.0 * g)) - 1.0);
        let df = ratio.powf(-(g + 1.0) / (2.0 * g)) / (w.rho * a);
        (f, df)
    }
}

fn star_density(w: &PrimState, p_star: f64, g: f64) -> f64 {
    let ratio = p_star / w.p;
    if ratio > 1.0 {
        let g6 = (g - 1.0) / (g + 1.0);
        w.rho * (ratio + g6) / (g6 * ratio + 1.0)
    } else {
        w.rho * ratio.powf(1.0 / g)
    }
}

// Left of the contact, for the wave travelling left.
fn sample_left(w: &PrimState, p_star: f64, u_star: f64, xi: f64, g: f64) -> PrimState {
    let a = (g * w.p / w.rho).sqrt();
    let star = PrimState::new(star_density(w, p_star, g), u_star, p_star);
    if p_star > w.p {
        let speed = w.u - a * ((g + 1.0) / (2.0 * g) * p_star / w.p + (g - 1.0) / (2.0 * g)).sqrt();
        return if xi <= speed { *w } else { star };
    }
    let head = w.u - a;
    let tail = u_star - a * (p_star / w.p).powf((g - 1.0) / (2.0 * g));
    if xi <= head {
        *w
    } else if xi >= tail {
        star
    } else {
        let c = 2.0 / (g + 1.0) * (a + 0.5 * (g - 1.0) * (w.u - xi));
        PrimState::new(
            w.rho * (c / a).powf(2.0 / (g - 1.0)),
            2.0 / (g + 1.0) * (a + 0.5 * (g - 1.0) * w.u + xi),
            w.p * (c / a).powf(2.0 * g / (g - 1.0)),
        )
    }
}

/// L1, L2 and L∞ norms per primitive variable `(ρ, u, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorNorms {
    pub l1: [f64; 3],
    pub l2: [f64; 3],
    pub linf: [f64; 3],
}

/// Cell-midpoint comparison of a numerical solution against exact values.
pub fn error_norms(numerical: &[ConsState], exact: &[PrimState], dx: f64, gas: &GasParams) -> Result<ErrorNorms> {
    if numerical.len() != exact.len() {
        return Err(Error::Config(format!(
            "{} numerical cells vs {} exact",
            numerical.len(),
            exact.len()
        )));
    }
    let mut norms = ErrorNorms {
        l1: [0.0; 3],
        l2: [0.0; 3],
        linf: [0.0; 3],
    };
    for (u, w) in numerical.iter().zip(exact) {
        let n = gas.cons_to_prim(u)?;
        for (c, e) in [n.rho - w.rho, n.u - w.u, n.p - w.p].into_iter().enumerate() {
            let e = e.abs();
            norms.l1[c] += e * dx;
            norms.l2[c] += e * e * dx;
            norms.linf[c] = norms.linf[c].max(e);
        }
    }
    for c in 0..3 {
        norms.l2[c] = norms.l2[c].sqrt();
    }
    Ok(norms)
}

/// Relative error of the specific internal energy in the cells adjacent to
/// the diaphragm, `(e_num − e_exact)/e_exact`; positive means overheating.
pub fn overheating_metric(final_states: &[ConsState], setup: &ProblemSetup, t: f64, gas: &GasParams) -> Result<f64> {
    let InitialData::Riemann(ic) = setup.data else {
        return Err(Error::Config("overheating is defined for Riemann problems".into()));
    };
    let n = final_states.len();
    let centers = setup.cell_centers(n);
    let right = centers.partition_point(|x| *x < ic.x0).min(n - 1);
    let cells = if right == 0 { vec![0] } else { vec![right - 1, right] };
    let (mut num, mut exact) = (0.0, 0.0);
    for j in cells {
        num += gas.cons_to_prim(&final_states[j])?.internal_energy(gas);
        exact += setup.exact_at(centers[j], t, gas)?.internal_energy(gas);
    }
    Ok((num - exact) / exact)
}

/// `log2(e_coarse / e_fine)` for successive refinements by two.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const AIR: GasParams = GasParams { gamma: 1.4 };

    #[test]
    fn preset_examples() {
        let c = Preset::Constant.setup().initial_prims(5);
        assert!(c.iter().all(|w| *w == PrimState::new(1.0, 0.0, 1.0)));

        let toro = Preset::Toro123.setup().initial_prims(10);
        assert_eq!(toro[0], PrimState::new(1.0, -2.0, 0.4));
        assert_eq!(toro[9], PrimState::new(1.0, 2.0, 0.4));

        let wave = Preset::DensityWave.setup();
        assert!((wave.initial_at(0.25).rho - 1.2).abs() < 1e-15);
        assert_eq!(wave.boundary, Boundary::Periodic);
        assert_eq!(Preset::Sod.setup().final_time, 0.2);
        assert_eq!(Preset::Toro123.setup().final_time, 0.15);
        for p in Preset::ALL {
            p.setup().validate().unwrap();
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("nope".parse::<Preset>().is_err());
    }

    #[test]
    fn equal_states_are_preserved() {
        let w = PrimState::new(0.7, 0.3, 1.9);
        for xi in [-3.0, 0.0, 0.4, 5.0] {
            assert_eq!(exact_riemann(&w, &w, xi, &AIR).unwrap(), w);
        }
    }

    #[test]
    fn sod_star_state() {
        let s = RiemannSolution::solve(&PrimState::new(1.0, 0.0, 1.0), &PrimState::new(0.125, 0.0, 0.1), &AIR).unwrap();
        assert!((s.p_star - 0.30313).abs() < 1e-5, "{}", s.p_star);
        assert!((s.u_star - 0.92745).abs() < 1e-5, "{}", s.u_star);
        let w = s.sample(0.0);
        assert!((w.p - s.p_star).abs() < 1e-14 && (w.u - s.u_star).abs() < 1e-14);
    }

    #[test]
    fn toro123_is_symmetric_two_rarefaction() {
        let ic = PrimState::new(1.0, -2.0, 0.4);
        let s = RiemannSolution::solve(&ic, &ic.mirrored(), &AIR).unwrap();
        assert!(s.u_star.abs() < 1e-12);
        assert!(s.p_star < 0.4 && s.p_star > 0.0);
        assert!((s.p_star - 0.00189).abs() < 1e-5, "{}", s.p_star);
        for k in 0..50 {
            let xi = 0.1 * k as f64;
            let (a, b) = (s.sample(xi), s.sample(-xi));
            assert!((a.rho - b.rho).abs() <= 1e-10 && (a.u + b.u).abs() <= 1e-10 && (a.p - b.p).abs() <= 1e-10);
        }
    }

    #[test]
    fn vacuum_is_reported() {
        let l = PrimState::new(1.0, -10.0, 0.4);
        assert!(matches!(
            exact_riemann(&l, &l.mirrored(), 0.0, &AIR),
            Err(Error::Vacuum { .. })
        ));
    }

    #[test]
    fn wave_relations_hold() {
        let g = AIR.gamma;
        let (l, r) = (PrimState::new(1.0, 0.0, 1.0), PrimState::new(0.125, 0.0, 0.1));
        let s = RiemannSolution::solve(&l, &r, &AIR).unwrap();
        let (rho_l, rho_r) = s.star_densities();

        // left rarefaction: isentropic, u + 2a/(γ-1) constant
        let star_l = PrimState::new(rho_l, s.u_star, s.p_star);
        assert!((l.p / l.rho.powf(g) - star_l.p / star_l.rho.powf(g)).abs() <= 1e-10);
        let inv = |w: &PrimState| w.u + 2.0 * w.sound_speed(&AIR) / (g - 1.0);
        assert!((inv(&l) - inv(&star_l)).abs() <= 1e-10);
        for xi in [-1.0, -0.8, -0.5, -0.2] {
            let w = s.sample(xi);
            assert!((inv(&w) - inv(&l)).abs() <= 1e-10);
        }

        // right shock: Rankine–Hugoniot in mass, momentum and energy
        let star_r = PrimState::new(rho_r, s.u_star, s.p_star);
        let speed = (rho_r * s.u_star - r.rho * r.u) / (rho_r - r.rho);
        let ua = AIR.prim_to_cons(&r).unwrap().to_array();
        let ub = AIR.prim_to_cons(&star_r).unwrap().to_array();
        let fa = AIR.physical_flux(&r);
        let fb = AIR.physical_flux(&star_r);
        for c in 0..3 {
            assert!(((fb[c] - fa[c]) - speed * (ub[c] - ua[c])).abs() <= 1e-10, "component {c}");
        }
        assert_eq!(s.sample(speed + 1e-9), r);
    }

    #[test]
    fn exact_density_wave_is_translated() {
        let setup = Preset::DensityWave.setup();
        let w = setup.exact_at(0.25 + 0.3, 0.3, &AIR).unwrap();
        assert!((w.rho - 1.2).abs() < 1e-14);
        let w = setup.exact_at(0.25, 1.0, &AIR).unwrap();
        assert!((w.rho - 1.2).abs() < 1e-12);
    }

    #[test]
    fn norms_vanish_for_exact_data() {
        let setup = Preset::Sod.setup();
        let exact = setup.exact_prims(20, 0.1, &AIR).unwrap();
        let num: Vec<_> = exact.iter().map(|w| AIR.prim_to_cons(w).unwrap()).collect();
        let norms = error_norms(&num, &exact, setup.dx(20), &AIR).unwrap();
        assert!(norms.l1.iter().chain(&norms.l2).chain(&norms.linf).all(|e| *e < 1e-14));
    }

    #[test]
    fn overheating_zero_for_exact_solution() {
        let setup = Preset::Toro123.setup();
        let exact = setup.exact_prims(40, 0.15, &AIR).unwrap();
        let num: Vec<_> = exact.iter().map(|w| AIR.prim_to_cons(w).unwrap()).collect();
        assert!(overheating_metric(&num, &setup, 0.15, &AIR).unwrap().abs() < 1e-12);
        assert!(overheating_metric(&num, &Preset::Constant.setup(), 0.15, &AIR).is_err());
    }

    #[test]
    fn grid_helpers() {
        let setup = Preset::DensityWave.setup();
        let g = setup.grid_to_time(50, 0.5, 1.0, &AIR).unwrap();
        assert!((g.final_time() - 1.0).abs() < 1e-12);
        let u = setup.initial_states(50, &AIR).unwrap();
        assert!(g.cfl(&u, &AIR).unwrap() <= 0.5 + 1e-12);
        let g = setup.grid_with_slabs(100, 0.5, 20, &AIR).unwrap();
        assert_eq!(g.n_slabs, 20);
        assert_eq!(observed_orders(&[4.0, 2.0, 1.0]), vec![1.0, 1.0]);
    }
}
