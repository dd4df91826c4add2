//! Perfect-gas thermodynamics for the 1D Euler equations.
//!
//! The entropy pair is `U = -ρS/(γ-1)`, `F = uU` with specific entropy
//! `S = ln p - γ ln ρ`. Its entropy variables `v = ∂U/∂u` have a closed-form
//! inverse, so every conversion here is direct.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Plain 3-vector used for fluxes, jumps and entropy variables.
pub type Vec3 = [f64; 3];

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(s: f64, a: &Vec3) -> Vec3 {
    [s * a[0], s * a[1], s * a[2]]
}

pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Below this value of `ζ² = ((a-b)/(a+b))²` the logarithmic mean switches to
/// its series form.
pub const LOG_MEAN_SERIES_THRESHOLD: f64 = 1e-4;

/// Number of terms kept in `1 + ζ²/3 + ζ⁴/5 + ζ⁶/7 + ...`.
pub const LOG_MEAN_SERIES_TERMS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasParams {
    pub gamma: f64,
}

impl Default for GasParams {
    fn default() -> Self {
        Self { gamma: 1.4 }
    }
}

/// Conservative variables `(ρ, ρu, ρe^t)` of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsState {
    pub rho: f64,
    pub mom: f64,
    pub ener: f64,
}

/// Primitive variables `(ρ, u, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimState {
    pub rho: f64,
    pub u: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyVars {
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
}

/// Algebraic variables `z1 = √(ρ/p)`, `z2 = z1·u`, `z3 = √(ρp)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZVars {
    pub z1: f64,
    pub z2: f64,
    pub z3: f64,
}

impl ConsState {
    pub const fn new(rho: f64, mom: f64, ener: f64) -> Self {
        Self { rho, mom, ener }
    }

    pub fn to_array(self) -> Vec3 {
        [self.rho, self.mom, self.ener]
    }

    pub fn from_array(a: Vec3) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl PrimState {
    pub const fn new(rho: f64, u: f64, p: f64) -> Self {
        Self { rho, u, p }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho > 0.0 && self.p > 0.0 && self.rho.is_finite() && self.p.is_finite() && self.u.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidState {
                rho: self.rho,
                p: self.p,
            })
        }
    }

    pub fn sound_speed(&self, gas: &GasParams) -> f64 {
        (gas.gamma * self.p / self.rho).sqrt()
    }

    pub fn internal_energy(&self, gas: &GasParams) -> f64 {
        self.p / ((gas.gamma - 1.0) * self.rho)
    }

    pub fn total_enthalpy(&self, gas: &GasParams) -> f64 {
        let a = self.sound_speed(gas);
        a * a / (gas.gamma - 1.0) + 0.5 * self.u * self.u
    }

    pub fn specific_entropy(&self, gas: &GasParams) -> f64 {
        self.p.ln() - gas.gamma * self.rho.ln()
    }

    /// Largest characteristic speed `|u| + a`.
    pub fn max_wave_speed(&self, gas: &GasParams) -> f64 {
        self.u.abs() + self.sound_speed(gas)
    }

    pub fn mirrored(&self) -> Self {
        Self::new(self.rho, -self.u, self.p)
    }
}

impl EntropyVars {
    pub fn to_array(self) -> Vec3 {
        [self.v1, self.v2, self.v3]
    }

    pub fn from_array(a: Vec3) -> Self {
        Self {
            v1: a[0],
            v2: a[1],
            v3: a[2],
        }
    }
}

impl ZVars {
    pub fn from_prim(w: &PrimState) -> Self {
        let z1 = (w.rho / w.p).sqrt();
        Self {
            z1,
            z2: z1 * w.u,
            z3: (w.rho * w.p).sqrt(),
        }
    }
}

impl GasParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma > 1.0 && gamma.is_finite() {
            Ok(Self { gamma })
        } else {
            Err(Error::InvalidGamma(gamma))
        }
    }

    pub fn prim_to_cons(&self, w: &PrimState) -> Result<ConsState> {
        w.validate()?;
        Ok(ConsState::new(
            w.rho,
            w.rho * w.u,
            w.p / (self.gamma - 1.0) + 0.5 * w.rho * w.u * w.u,
        ))
    }

    pub fn cons_to_prim(&self, u: &ConsState) -> Result<PrimState> {
        let vel = u.mom / u.rho;
        let p = (self.gamma - 1.0) * (u.ener - 0.5 * u.mom * vel);
        let w = PrimState::new(u.rho, vel, p);
        w.validate().map_err(|_| Error::InvalidState { rho: u.rho, p })?;
        Ok(w)
    }

    /// Euler flux `(ρu, ρu² + p, ρu h^t)`.
    pub fn physical_flux(&self, w: &PrimState) -> Vec3 {
        let m = w.rho * w.u;
        [m, m * w.u + w.p, m * w.total_enthalpy(self)]
    }

    /// Conservative state as a plain vector, without validation.
    pub fn state_vector(&self, w: &PrimState) -> Vec3 {
        [
            w.rho,
            w.rho * w.u,
            w.p / (self.gamma - 1.0) + 0.5 * w.rho * w.u * w.u,
        ]
    }

    /// Entropy `U` and entropy flux `F`.
    pub fn entropy_pair(&self, w: &PrimState) -> (f64, f64) {
        let entropy = -w.rho * w.specific_entropy(self) / (self.gamma - 1.0);
        (entropy, w.u * entropy)
    }

    pub fn entropy_vars(&self, w: &PrimState) -> EntropyVars {
        let g = self.gamma;
        let s = w.specific_entropy(self);
        let beta = w.rho / w.p;
        EntropyVars {
            v1: (g - s) / (g - 1.0) - 0.5 * beta * w.u * w.u,
            v2: beta * w.u,
            v3: -beta,
        }
    }

    /// Closed-form inverse of [`GasParams::entropy_vars`].
    pub fn vars_to_prim(&self, v: &EntropyVars) -> Result<PrimState> {
        if !(v.v3 < 0.0) || !v.v1.is_finite() || !v.v2.is_finite() {
            return Err(Error::InvalidEntropyVars { v3: v.v3 });
        }
        let g = self.gamma;
        let beta = -v.v3;
        let u = v.v2 / beta;
        let s = g - (g - 1.0) * (v.v1 + 0.5 * beta * u * u);
        let rho = ((s + beta.ln()) / (1.0 - g)).exp();
        let w = PrimState::new(rho, u, rho / beta);
        w.validate()?;
        Ok(w)
    }

    pub fn cons_to_vars(&self, u: &ConsState) -> Result<EntropyVars> {
        Ok(self.entropy_vars(&self.cons_to_prim(u)?))
    }
}

/// Spatial and temporal flux potentials `(ψ, φ) = (ρu, ρ)`.
pub fn flux_potentials(w: &PrimState) -> (f64, f64) {
    (w.rho * w.u, w.rho)
}

/// `ψ = v·f - F` evaluated from its definition rather than the closed form.
pub fn spatial_potential_from_definition(gas: &GasParams, w: &PrimState) -> f64 {
    let v = gas.entropy_vars(w).to_array();
    let (_, flux) = gas.entropy_pair(w);
    dot(&v, &gas.physical_flux(w)) - flux
}

/// `φ = v·u - U` evaluated from its definition.
pub fn temporal_potential_from_definition(gas: &GasParams, w: &PrimState) -> f64 {
    let v = gas.entropy_vars(w).to_array();
    let (entropy, _) = gas.entropy_pair(w);
    dot(&v, &gas.state_vector(w)) - entropy
}

pub fn arith_mean(a: f64, b: f64) -> f64 {
    0.5 * (a + b)
}

/// Logarithmic mean `(b - a)/(ln b - ln a)`.
pub fn log_mean(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::LogMeanDomain { a, b });
    }
    // bitwise symmetric in its arguments
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    let zeta = (a - b) / (a + b);
    let mean = if zeta * zeta < LOG_MEAN_SERIES_THRESHOLD {
        log_mean_series(a, b)
    } else {
        log_mean_direct(a, b)
    };
    Ok(mean.clamp(a, b))
}

// ln(a/b) = 2ζ(1 + ζ²/3 + ζ⁴/5 + ...)
fn log_mean_series(a: f64, b: f64) -> f64 {
    let zeta = (a - b) / (a + b);
    let f = zeta * zeta;
    let mut denom = 0.0;
    let mut fk = 1.0;
    for k in 0..LOG_MEAN_SERIES_TERMS {
        denom += fk / (2 * k + 1) as f64;
        fk *= f;
    }
    (a + b) / (2.0 * denom)
}

fn log_mean_direct(a: f64, b: f64) -> f64 {
    let zeta = (a - b) / (a + b);
    if zeta.abs() <= 0.5 {
        (a - b) / (2.0 * zeta.atanh())
    } else {
        (a - b) / (a.ln() - b.ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const AIR: GasParams = GasParams { gamma: 1.4 };

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn prim_cons_examples() {
        let u = AIR.prim_to_cons(&PrimState::new(1.0, 0.0, 1.0)).unwrap();
        assert!(u.rho == 1.0 && u.mom == 0.0 && close(u.ener, 2.5, 1e-15));
        let u = AIR.prim_to_cons(&PrimState::new(1.0, 1.0, 1.0)).unwrap();
        assert!(close(u.ener, 3.0, 1e-15) && u.mom == 1.0);
        let w = AIR.cons_to_prim(&ConsState::new(1.0, 1.0, 3.0)).unwrap();
        assert!(close(w.p, 1.0, 1e-15) && w.u == 1.0 && w.rho == 1.0);
    }

    #[test]
    fn rejects_inadmissible_states() {
        assert_eq!(
            AIR.prim_to_cons(&PrimState::new(-1.0, 0.0, 1.0)),
            Err(Error::InvalidState { rho: -1.0, p: 1.0 })
        );
        assert!(matches!(
            AIR.cons_to_prim(&ConsState::new(1.0, 2.0, 1.0)),
            Err(Error::InvalidState { .. })
        ));
        assert!(GasParams::new(1.0).is_err());
        assert!(AIR
            .vars_to_prim(&EntropyVars { v1: 1.0, v2: 0.0, v3: 0.0 })
            .is_err());
    }

    #[test]
    fn physical_flux_examples() {
        assert_eq!(AIR.physical_flux(&PrimState::new(1.0, 0.0, 1.0)), [0.0, 1.0, 0.0]);
        let f = AIR.physical_flux(&PrimState::new(1.0, 1.0, 1.0));
        assert!(close(f[0], 1.0, 1e-15) && close(f[1], 2.0, 1e-15) && close(f[2], 4.0, 1e-15));
        assert_eq!(AIR.physical_flux(&PrimState::new(2.0, 0.0, 0.5)), [0.0, 0.5, 0.0]);
    }

    #[test]
    fn entropy_pair_examples() {
        let (u, f) = AIR.entropy_pair(&PrimState::new(1.0, 5.0, 1.0));
        assert_eq!((u, f), (0.0, 0.0));
        let seven_ln2 = 7.0 * 2f64.ln();
        let (u, _) = AIR.entropy_pair(&PrimState::new(2.0, 0.0, 1.0));
        assert!(close(u, seven_ln2, 1e-14));
        assert!((seven_ln2 - 4.852030).abs() < 1e-6);
        let (u, f) = AIR.entropy_pair(&PrimState::new(2.0, 1.0, 1.0));
        assert!(close(u, seven_ln2, 1e-14) && close(f, seven_ln2, 1e-14));
    }

    #[test]
    fn entropy_vars_examples() {
        let v = AIR.entropy_vars(&PrimState::new(1.0, 0.0, 1.0));
        assert!(close(v.v1, 3.5, 1e-15) && v.v2 == 0.0 && v.v3 == -1.0);
        let v = AIR.entropy_vars(&PrimState::new(1.0, 1.0, 1.0));
        assert!(close(v.v1, 3.0, 1e-15) && v.v2 == 1.0 && v.v3 == -1.0);
    }

    #[test]
    fn potentials_match_definitions() {
        assert_eq!(flux_potentials(&PrimState::new(1.0, 2.0, 1.0)), (2.0, 1.0));
        let w = PrimState::new(1.0, 1.0, 1.0);
        assert!(close(spatial_potential_from_definition(&AIR, &w), 1.0, 1e-14));
        let w = PrimState::new(1.0, 0.0, 1.0);
        assert!(close(temporal_potential_from_definition(&AIR, &w), 1.0, 1e-14));
    }

    #[test]
    fn log_mean_examples() {
        assert_eq!(log_mean(3.0, 3.0).unwrap(), 3.0);
        assert!(close(log_mean(1.0, 2.0).unwrap(), 1.0 / 2f64.ln(), 1e-15));
        assert!((log_mean(1.0, 2.0).unwrap() - 1.442695).abs() < 1e-6);
        assert!(matches!(log_mean(0.0, 1.0), Err(Error::LogMeanDomain { .. })));
        assert!(log_mean(1.0, -2.0).is_err());
    }

    #[test]
    fn log_mean_nearly_equal_arguments() {
        // For b = 1 + d the log mean is 1 + d/2 - d²/12 + O(d³); at d ~ 1e-14 the
        // quadratic term is far below one ulp, so the oracle is the exact midpoint.
        let b = 1.0 + 1e-14;
        let d = b - 1.0;
        let oracle = 1.0 + 0.5 * d;
        let lm = log_mean(1.0, b).unwrap();
        assert!((lm - oracle).abs() <= 1e-16, "{lm} vs {oracle}");
        // 1 + 5e-15 itself sits between two doubles; one ulp is the attainable bound
        assert!((lm - (1.0 + 5e-15)).abs() <= f64::EPSILON);
    }

    #[test]
    fn log_mean_continuous_at_series_switch() {
        // ζ² = threshold  ⇔  b/a = (1+ζ)/(1-ζ)
        let zeta = LOG_MEAN_SERIES_THRESHOLD.sqrt();
        let ratio = (1.0 + zeta) / (1.0 - zeta);
        for a in [1e-3, 0.3, 1.0, 7.5, 1e3] {
            let b = a * ratio;
            let series = log_mean_series(a, b);
            let direct = log_mean_direct(a, b);
            assert!((series - direct).abs() <= 1e-14 * direct, "a = {a}: {series} vs {direct}");
        }
    }
}
