//! Dissipation operators in space and time.
//!
//! Every dissipative interface flux has the viscosity form
//! `flux = ec_flux - M Δv` with `M` symmetric positive definite and
//! `Δv = v_right - v_left` (or `v_future - v_past`). The temporal Jacobian
//! `H(v) = du/dv` supplies the matrices, and upwinding in time is itself of
//! this form with `T = ∫₀¹ (1 - ξ) H(v(ξ)) dξ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux_algebra::{path_states, path_states_prim, tadmor_ec_temporal_flux_prim, Direction};
use crate::gas_model::{norm, sub, ConsState, EntropyVars, GasParams, PrimState, Vec3};
use crate::quadrature::QuadratureRule;

/// Symmetric 3×3 matrix stored as its upper triangle
/// `[a00, a01, a02, a11, a12, a22]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMatrix3 {
    upper: [f64; 6],
}

const IDX: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];

impl SymMatrix3 {
    pub const ZERO: Self = Self { upper: [0.0; 6] };
    pub const IDENTITY: Self = Self {
        upper: [1.0, 0.0, 0.0, 1.0, 0.0, 1.0],
    };

    pub fn from_upper(upper: [f64; 6]) -> Self {
        Self { upper }
    }

    /// Symmetric part of a full matrix.
    pub fn from_full(m: &[[f64; 3]; 3]) -> Self {
        let mut upper = [0.0; 6];
        for i in 0..3 {
            for j in i..3 {
                upper[IDX[i][j]] = 0.5 * (m[i][j] + m[j][i]);
            }
        }
        Self { upper }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[IDX[i][j]]
    }

    pub fn to_full(&self) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = self.get(i, j);
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &Vec3) -> Vec3 {
        let mut y = [0.0; 3];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..3).map(|j| self.get(i, j) * x[j]).sum();
        }
        y
    }

    /// `xᵀ M x`.
    pub fn quad_form(&self, x: &Vec3) -> f64 {
        let y = self.mul_vec(x);
        x[0] * y[0] + x[1] * y[1] + x[2] * y[2]
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            upper: self.upper.map(|a| s * a),
        }
    }

    pub fn add_scaled(&mut self, s: f64, other: &Self) {
        for (a, b) in self.upper.iter_mut().zip(other.upper) {
            *a += s * b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.upper.iter().all(|&a| a == 0.0)
    }

    /// Lower Cholesky factor; fails unless the matrix is positive definite.
    pub fn cholesky(&self) -> Result<[[f64; 3]; 3]> {
        let mut l = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite);
                    }
                    l[i][i] = s.sqrt();
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        Ok(l)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.cholesky().is_ok()
    }
}

fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

#[cfg(test)]
fn invert(m: &[[f64; 3]; 3]) -> Result<[[f64; 3]; 3]> {
    let cof = |i: usize, j: usize| {
        let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
        let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
        m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
    };
    let det = m[0][0] * cof(0, 0) + m[0][1] * cof(0, 1) + m[0][2] * cof(0, 2);
    if det == 0.0 || !det.is_finite() {
        return Err(Error::Singular);
    }
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = cof(j, i) / det;
        }
    }
    Ok(inv)
}

/// Analytic `dv/du`, the Hessian of `U` in conservative variables.
pub fn entropy_hessian(w: &PrimState, gas: &GasParams) -> [[f64; 3]; 3] {
    let g = gas.gamma;
    let (rho, u, p) = (w.rho, w.u, w.p);
    let gm1 = g - 1.0;
    let dv_dw = [
        [
            g / (gm1 * rho) - 0.5 * u * u / p,
            -rho * u / p,
            -1.0 / (gm1 * p) + 0.5 * rho * u * u / (p * p),
        ],
        [u / p, rho / p, -rho * u / (p * p)],
        [-1.0 / p, 0.0, rho / (p * p)],
    ];
    let dw_du = [
        [1.0, 0.0, 0.0],
        [-u / rho, 1.0 / rho, 0.0],
        [0.5 * gm1 * u * u, -gm1 * u, gm1],
    ];
    mat_mul(&dv_dw, &dw_du)
}

/// `H(v) = du/dv`, the inverse of [`entropy_hessian`].
pub fn temporal_jacobian(v: &EntropyVars, gas: &GasParams) -> Result<SymMatrix3> {
    let w = gas.vars_to_prim(v)?;
    temporal_jacobian_prim(&w, gas)
}

/// Closed form `[[ρ, ρu, E], [ρu, ρu² + p, ρuh], [E, ρuh, ρh² − a²p/(γ−1)]]`.
/// With `c = γp/((γ−1)ρ)` and `k = u²/2` the last entry is `ρ(c²/γ + 2ck + k²)`,
/// which avoids the cancellation of the textbook form.
pub fn temporal_jacobian_prim(w: &PrimState, gas: &GasParams) -> Result<SymMatrix3> {
    w.validate()?;
    let g = gas.gamma;
    let (rho, u, p) = (w.rho, w.u, w.p);
    let c = g * p / ((g - 1.0) * rho);
    let k = 0.5 * u * u;
    let e = p / (g - 1.0) + rho * k;
    let m = rho * u;
    Ok(SymMatrix3::from_upper([
        rho,
        m,
        e,
        m * u + p,
        m * (c + k),
        rho * (c * c / g + 2.0 * c * k + k * k),
    ]))
}

/// Upwinding in time: the temporal flux is the past-slab state.
pub fn upwind_temporal_flux(u_past: &ConsState) -> ConsState {
    *u_past
}

/// `T = Σ_k w_k (1 - ξ_k) H(v(ξ_k))` along the straight entropy-variable path.
pub fn upwind_equivalent_t(
    v_past: &EntropyVars,
    v_future: &EntropyVars,
    q: &QuadratureRule,
    gas: &GasParams,
) -> Result<SymMatrix3> {
    upwind_t_along(path_states(v_past, v_future, q, gas)?, gas)
}

/// [`upwind_equivalent_t`] from primitive endpoints.
pub fn upwind_equivalent_t_prim(
    w_past: &PrimState,
    w_future: &PrimState,
    q: &QuadratureRule,
    gas: &GasParams,
) -> Result<SymMatrix3> {
    upwind_t_along(path_states_prim(w_past, w_future, q, gas)?, gas)
}

fn upwind_t_along(states: Vec<(f64, f64, PrimState)>, gas: &GasParams) -> Result<SymMatrix3> {
    let mut t = SymMatrix3::ZERO;
    for (xi, w, state) in states {
        t.add_scaled(w * (1.0 - xi), &temporal_jacobian_prim(&state, gas)?);
    }
    Ok(t)
}

/// Defect `‖u_past - (u* - T Δv)‖` of the viscosity-form decomposition of
/// upwinding in time, with `u*` the quadrature entropy-conservative temporal
/// flux and `T` the upwind-equivalent matrix on the same rule.
pub fn verify_upwind_decomposition(
    w_past: &PrimState,
    w_future: &PrimState,
    q: &QuadratureRule,
    gas: &GasParams,
) -> Result<f64> {
    w_past.validate()?;
    w_future.validate()?;
    let vp = gas.entropy_vars(w_past);
    let vf = gas.entropy_vars(w_future);
    let u_star = tadmor_ec_temporal_flux_prim(w_past, w_future, q, gas)?;
    let t = upwind_equivalent_t_prim(w_past, w_future, q, gas)?;
    let dv = sub(&vf.to_array(), &vp.to_array());
    let reconstructed = sub(&u_star, &t.mul_vec(&dv));
    Ok(norm(&sub(&gas.state_vector(w_past), &reconstructed)))
}

/// Rule for the dissipation matrix `M` in `flux = ec_flux - M Δv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DissipationSpec {
    /// `factor · max(|u| + a) · H(v̄)` over the two interface states.
    ScalarTimesH { factor: f64 },
    /// The matrix that turns the quadrature EC temporal flux into upwinding.
    UpwindEquivalentIntegral { order: usize },
    /// `θ · H(v̄)`, θ ∈ [0, 1].
    ThetaTimesH { theta: f64 },
}

impl DissipationSpec {
    pub fn validate(&self, direction: Direction) -> Result<()> {
        match (*self, direction) {
            (Self::ScalarTimesH { factor }, Direction::Space) => {
                if !(factor >= 0.0) || !factor.is_finite() {
                    return Err(Error::Dissipation(format!("wave-speed factor {factor} must be >= 0")));
                }
            }
            (Self::ThetaTimesH { theta }, _) => {
                if !(0.0..=1.0).contains(&theta) {
                    return Err(Error::Dissipation(format!("theta {theta} outside [0, 1]")));
                }
            }
            (Self::UpwindEquivalentIntegral { order }, Direction::Time) => {
                if order == 0 {
                    return Err(Error::QuadratureOrder(order));
                }
            }
            (spec, dir) => {
                return Err(Error::Dissipation(format!("{spec:?} does not apply to {dir:?} interfaces")))
            }
        }
        Ok(())
    }
}

/// A [`DissipationSpec`] with its quadrature rule built once.
#[derive(Debug, Clone)]
pub struct Dissipation {
    spec: DissipationSpec,
    rule: Option<QuadratureRule>,
}

impl Dissipation {
    pub fn new(spec: DissipationSpec, direction: Direction) -> Result<Self> {
        spec.validate(direction)?;
        let rule = match spec {
            DissipationSpec::UpwindEquivalentIntegral { order } => Some(QuadratureRule::gauss_legendre(order)?),
            _ => None,
        };
        Ok(Self { spec, rule })
    }

    pub fn spec(&self) -> &DissipationSpec {
        &self.spec
    }

    /// The dissipation matrix between two admissible states. Arithmetic
    /// averages of the entropy variables define `v̄`.
    pub fn matrix(&self, wl: &PrimState, wr: &PrimState, gas: &GasParams) -> Result<SymMatrix3> {
        let vl = gas.entropy_vars(wl);
        let vr = gas.entropy_vars(wr);
        let h_mean = || {
            let mean = EntropyVars {
                v1: 0.5 * (vl.v1 + vr.v1),
                v2: 0.5 * (vl.v2 + vr.v2),
                v3: 0.5 * (vl.v3 + vr.v3),
            };
            temporal_jacobian(&mean, gas)
        };
        match self.spec {
            DissipationSpec::ScalarTimesH { factor } => {
                if factor == 0.0 {
                    return Ok(SymMatrix3::ZERO);
                }
                let alpha = wl.max_wave_speed(gas).max(wr.max_wave_speed(gas));
                Ok(h_mean()?.scaled(factor * alpha))
            }
            DissipationSpec::ThetaTimesH { theta } => {
                if theta == 0.0 {
                    return Ok(SymMatrix3::ZERO);
                }
                Ok(h_mean()?.scaled(theta))
            }
            DissipationSpec::UpwindEquivalentIntegral { .. } => {
                let rule = self.rule.as_ref().expect("rule built in constructor");
                upwind_equivalent_t_prim(wl, wr, rule, gas)
            }
        }
    }
}

/// `ec_flux - M Δv`; a zero matrix leaves the flux entropy conservative.
pub fn es_interface_flux(
    ec_flux: &Vec3,
    dv: &Vec3,
    dissipation: &Dissipation,
    wl: &PrimState,
    wr: &PrimState,
    gas: &GasParams,
) -> Result<Vec3> {
    let m = dissipation.matrix(wl, wr, gas)?;
    if m.is_zero() {
        return Ok(*ec_flux);
    }
    m.cholesky()?;
    Ok(sub(ec_flux, &m.mul_vec(dv)))
}

/// `(1/(2Δt)) [Δv₊ᵀT₊Δv₊ + Δv₋ᵀT₋Δv₋]`.
pub fn entropy_production_time(
    dv_minus: &Vec3,
    dv_plus: &Vec3,
    t_minus: &SymMatrix3,
    t_plus: &SymMatrix3,
    dt: f64,
) -> f64 {
    (t_plus.quad_form(dv_plus) + t_minus.quad_form(dv_minus)) / (2.0 * dt)
}

/// `(1/(2Δx)) [Δv_{j+½}ᵀQΔv_{j+½} + Δv_{j-½}ᵀQΔv_{j-½}]`.
pub fn entropy_production_space(
    dv_minus: &Vec3,
    dv_plus: &Vec3,
    q_minus: &SymMatrix3,
    q_plus: &SymMatrix3,
    dx: f64,
) -> f64 {
    (q_plus.quad_form(dv_plus) + q_minus.quad_form(dv_minus)) / (2.0 * dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux_algebra::roe_ec_temporal_flux;
    use crate::gas_model::scale;

    const AIR: GasParams = GasParams { gamma: 1.4 };

    // u(v) = prim_to_cons(vars_to_prim(v))
    fn u_of_v(v: &Vec3) -> Vec3 {
        let w = AIR.vars_to_prim(&EntropyVars::from_array(*v)).unwrap();
        AIR.state_vector(&w)
    }

    fn fd_jacobian(v: &Vec3) -> [[f64; 3]; 3] {
        let mut jac = [[0.0; 3]; 3];
        for j in 0..3 {
            let h = 1e-5 * v[j].abs().max(1.0);
            let mut plus = *v;
            let mut minus = *v;
            plus[j] += h;
            minus[j] -= h;
            let (up, um) = (u_of_v(&plus), u_of_v(&minus));
            for i in 0..3 {
                jac[i][j] = (up[i] - um[i]) / (2.0 * h);
            }
        }
        jac
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let w = PrimState::new(1.0, 0.0, 1.0);
        let v = AIR.entropy_vars(&w);
        let h = temporal_jacobian(&v, &AIR).unwrap();
        let fd = fd_jacobian(&v.to_array());
        for i in 0..3 {
            for j in 0..3 {
                assert!((h.get(i, j) - fd[i][j]).abs() <= 1e-6 * h.max_abs());
            }
        }
        h.cholesky().unwrap();
    }

    #[test]
    fn jacobian_matches_closed_form() {
        // du/dv = [[ρ, ρu, E], [ρu, ρu² + p, ρu h], [E, ρu h, ρh² - a²p/(γ-1)]]
        let w = PrimState::new(0.7, -1.3, 2.2);
        let h = temporal_jacobian_prim(&w, &AIR).unwrap();
        let e = AIR.state_vector(&w)[2];
        let ht = w.total_enthalpy(&AIR);
        let a2 = AIR.gamma * w.p / w.rho;
        let expected = [
            [w.rho, w.rho * w.u, e],
            [w.rho * w.u, w.rho * w.u * w.u + w.p, w.rho * w.u * ht],
            [e, w.rho * w.u * ht, w.rho * ht * ht - a2 * w.p / (AIR.gamma - 1.0)],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!((h.get(i, j) - expected[i][j]).abs() < 1e-12 * h.max_abs(), "({i},{j})");
            }
        }
        let inv = invert(&entropy_hessian(&w, &AIR)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((h.get(i, j) - inv[i][j]).abs() < 1e-11 * h.max_abs(), "({i},{j})");
            }
        }
    }

    #[test]
    fn entropy_hessian_is_symmetric() {
        let m = entropy_hessian(&PrimState::new(1.7, 0.4, 0.3), &AIR);
        for i in 0..3 {
            for j in 0..3 {
                assert!((m[i][j] - m[j][i]).abs() < 1e-12 * m[i][j].abs().max(1.0));
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = SymMatrix3::from_upper([1.0, 2.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(m.cholesky(), Err(Error::NotPositiveDefinite));
        assert!(SymMatrix3::IDENTITY.is_positive_definite());
        assert!(!SymMatrix3::ZERO.is_positive_definite());
    }

    #[test]
    fn upwind_flux_is_identity() {
        let u = ConsState::new(1.0, 0.0, 2.5);
        assert_eq!(upwind_temporal_flux(&u), u);
    }

    #[test]
    fn upwind_t_equal_states_is_half_h() {
        let w = PrimState::new(1.2, 0.3, 0.8);
        let v = AIR.entropy_vars(&w);
        let h = temporal_jacobian(&v, &AIR).unwrap();
        for order in [1, 2, 5, 8] {
            let q = QuadratureRule::gauss_legendre(order).unwrap();
            let t = upwind_equivalent_t(&v, &v, &q, &AIR).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    assert!((t.get(i, j) - 0.5 * h.get(i, j)).abs() <= 1e-14 * h.max_abs());
                }
            }
        }
    }

    #[test]
    fn decomposition_defect_examples() {
        let q = QuadratureRule::gauss_legendre(8).unwrap();
        let w = PrimState::new(1.0, 0.0, 1.0);
        assert_eq!(verify_upwind_decomposition(&w, &w, &q, &AIR).unwrap(), 0.0);
        let wf = PrimState::new(1.2, 0.1, 1.1);
        let defect = verify_upwind_decomposition(&w, &wf, &q, &AIR).unwrap();
        assert!(defect <= 1e-12 * norm(&AIR.state_vector(&w)), "{defect}");
    }

    #[test]
    fn theta_half_reproduces_upwind_to_second_order() {
        let wp = PrimState::new(1.0, 0.2, 1.0);
        let spec = Dissipation::new(DissipationSpec::ThetaTimesH { theta: 0.5 }, Direction::Time).unwrap();
        let mut ratios = Vec::new();
        for eps in [1e-1, 5e-2, 2.5e-2, 1.25e-2] {
            let wf = PrimState::new(1.0 + eps, 0.2 + 0.5 * eps, 1.0 - eps);
            let vp = AIR.entropy_vars(&wp);
            let vf = AIR.entropy_vars(&wf);
            let dv = sub(&vf.to_array(), &vp.to_array());
            let ec = roe_ec_temporal_flux(&wp, &wf, &AIR).unwrap();
            let es = es_interface_flux(&ec, &dv, &spec, &wp, &wf, &AIR).unwrap();
            let defect = norm(&sub(&es, &AIR.state_vector(&wp)));
            ratios.push(defect / norm(&dv).powi(2));
        }
        // defect / |Δv|² stays bounded as the jump shrinks
        assert!(ratios.iter().all(|r| *r < 10.0), "{ratios:?}");
        assert!((ratios[3] / ratios[2] - 1.0).abs() < 0.2, "{ratios:?}");
    }

    #[test]
    fn zero_jump_leaves_flux_unchanged() {
        let w = PrimState::new(1.0, 0.5, 1.0);
        let spec = Dissipation::new(DissipationSpec::ScalarTimesH { factor: 1.0 }, Direction::Space).unwrap();
        let f = [1.0, 2.0, 3.0];
        assert_eq!(es_interface_flux(&f, &[0.0; 3], &spec, &w, &w, &AIR).unwrap(), f);
    }

    #[test]
    fn spatial_dissipation_on_sod_states_is_positive() {
        let wl = PrimState::new(1.0, 0.0, 1.0);
        let wr = PrimState::new(0.125, 0.0, 0.1);
        let spec = Dissipation::new(DissipationSpec::ScalarTimesH { factor: 1.0 }, Direction::Space).unwrap();
        let q = spec.matrix(&wl, &wr, &AIR).unwrap();
        let dv = sub(&AIR.entropy_vars(&wr).to_array(), &AIR.entropy_vars(&wl).to_array());
        assert!(q.is_positive_definite());
        assert!(q.quad_form(&dv) > 0.0);
    }

    #[test]
    fn spec_validation() {
        assert!(DissipationSpec::ThetaTimesH { theta: 1.5 }.validate(Direction::Time).is_err());
        assert!(DissipationSpec::ThetaTimesH { theta: 0.0 }.validate(Direction::Time).is_ok());
        assert!(DissipationSpec::ScalarTimesH { factor: 1.0 }.validate(Direction::Time).is_err());
        assert!(DissipationSpec::UpwindEquivalentIntegral { order: 8 }.validate(Direction::Space).is_err());
        assert!(DissipationSpec::UpwindEquivalentIntegral { order: 0 }.validate(Direction::Time).is_err());
    }

    #[test]
    fn production_formulas() {
        let z = [0.0; 3];
        let i = SymMatrix3::IDENTITY;
        assert_eq!(entropy_production_time(&z, &z, &i, &i, 0.1), 0.0);
        let p = entropy_production_time(&z, &[0.0, 0.0, 0.1], &i, &i, 0.1);
        assert!((p - 0.05).abs() < 1e-15);
        assert_eq!(entropy_production_space(&z, &z, &i, &i, 0.5), 0.0);
        let dv = [0.1, 0.0, 0.0];
        let p = entropy_production_space(&dv, &dv, &i, &i, 0.5);
        assert!((p - 0.02).abs() < 1e-15);
        // scaling a jump by s scales the production by s²
        let d = [0.3, -0.1, 0.2];
        let p1 = entropy_production_time(&d, &z, &i, &i, 1.0);
        let p2 = entropy_production_time(&scale(2.0, &d), &z, &i, &i, 1.0);
        assert!((p2 - 4.0 * p1).abs() < 1e-15);
    }
}
