use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stfv::dissipation::{
    temporal_jacobian_prim, upwind_equivalent_t_prim, Dissipation, DissipationSpec, SymMatrix3,
};
use stfv::entropy_ledger::{numerical_entropy_flux_space, numerical_entropy_flux_time};
use stfv::flux_algebra::{
    ec_residual_prim, roe_ec_spatial_flux, roe_ec_temporal_flux, tadmor_ec_temporal_flux_prim,
    Direction,
};
use stfv::gas_model::{dot, flux_potentials, norm, sub, Vec3};
use stfv::{GasParams, PrimState, QuadratureRule};

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 20_240_517;

/// Offending cases listed in a report before truncating.
const MAX_LISTED: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    /// Entropy-conservation conditions of the closed-form fluxes.
    EcConditions,
    /// Positive definiteness of H, T and the dissipation matrices.
    Spd,
    /// Upwinding written as EC flux minus T times the jump.
    UpwindDecomposition,
    /// Numerical entropy fluxes telescope across a cell.
    Telescoping,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Self::EcConditions, Self::Spd, Self::UpwindDecomposition, Self::Telescoping];

    pub fn name(&self) -> &'static str {
        match self {
            Self::EcConditions => "ec-conditions",
            Self::Spd => "spd",
            Self::UpwindDecomposition => "upwind-decomposition",
            Self::Telescoping => "telescoping",
        }
    }

    pub fn default_samples(&self) -> usize {
        match self {
            Self::UpwindDecomposition => 100,
            _ => 1000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub seed: u64,
    pub samples: Option<usize>,
    pub gas: GasParams,
    /// Test hook: corrupts the quantity under test by a sign flip.
    pub inject_fault: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            samples: None,
            gas: GasParams::default(),
            inject_fault: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub worst: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub suite: Suite,
    pub seed: u64,
    pub samples: usize,
    pub checks: Vec<Check>,
    pub failures: Vec<String>,
    pub failure_count: usize,
}

impl Report {
    fn new(suite: Suite, opts: &VerifyOptions) -> Self {
        Self {
            suite,
            seed: opts.seed,
            samples: opts.samples.unwrap_or(suite.default_samples()),
            checks: Vec::new(),
            failures: Vec::new(),
            failure_count: 0,
        }
    }

    pub fn passed(&self) -> bool {
        self.failure_count == 0
    }

    fn record(&mut self, check: usize, value: f64, case: impl FnOnce() -> String) {
        let c = &mut self.checks[check];
        // NaN must count as a breach
        let ok = value <= c.tolerance;
        c.worst = if value.is_nan() { f64::NAN } else { c.worst.max(value) };
        if !ok {
            self.failure_count += 1;
            if self.failures.len() < MAX_LISTED {
                self.failures.push(format!("{}: {value:.3e} for {}", c.name, case()));
            }
        }
    }

    fn check(&mut self, name: &str, tolerance: f64) -> usize {
        self.checks.push(Check {
            name: name.to_string(),
            worst: 0.0,
            tolerance,
        });
        self.checks.len() - 1
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "suite {} (seed {}, {} samples)", self.suite.name(), self.seed, self.samples)?;
        for c in &self.checks {
            writeln!(f, "  {:<40} max {:.3e}  limit {:.1e}", c.name, c.worst, c.tolerance)?;
        }
        if self.passed() {
            write!(f, "PASS")
        } else {
            writeln!(f, "{} breaches, first {}:", self.failure_count, self.failures.len())?;
            for line in &self.failures {
                writeln!(f, "  {line}")?;
            }
            write!(f, "FAIL")
        }
    }
}

pub fn verify(suite: Suite, opts: &VerifyOptions) -> Result<Report, CliError> {
    let mut report = Report::new(suite, opts);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    match suite {
        Suite::EcConditions => ec_conditions(&mut report, &mut rng, opts)?,
        Suite::Spd => spd(&mut report, &mut rng, opts)?,
        Suite::UpwindDecomposition => upwind_decomposition(&mut report, &mut rng, opts)?,
        Suite::Telescoping => telescoping(&mut report, &mut rng, opts)?,
    }
    Ok(report)
}

/// `ρ, p ∈ [0.1, 10]`, `u ∈ [−5, 5]`.
pub fn random_state(rng: &mut ChaCha8Rng) -> PrimState {
    PrimState::new(
        rng.random_range(0.1..=10.0),
        rng.random_range(-5.0..=5.0),
        rng.random_range(0.1..=10.0),
    )
}

fn fault(opts: &VerifyOptions) -> f64 {
    if opts.inject_fault {
        -1.0
    } else {
        1.0
    }
}

fn jump(wl: &PrimState, wr: &PrimState, gas: &GasParams) -> Vec3 {
    sub(&gas.entropy_vars(wr).to_array(), &gas.entropy_vars(wl).to_array())
}

fn ec_conditions(report: &mut Report, rng: &mut ChaCha8Rng, opts: &VerifyOptions) -> Result<(), CliError> {
    let gas = &opts.gas;
    let space = report.check("space |[v]·f − [ψ]| / scale", 1e-11);
    let time = report.check("time |[v]·u − [φ]| / scale", 1e-11);
    for _ in 0..report.samples {
        let (wl, wr) = (random_state(rng), random_state(rng));
        let dv = jump(&wl, &wr, gas);
        let (psi_l, phi_l) = flux_potentials(&wl);
        let (psi_r, phi_r) = flux_potentials(&wr);
        for (check, direction, pot_jump) in [(space, Direction::Space, psi_r - psi_l), (time, Direction::Time, phi_r - phi_l)] {
            let mut flux = match direction {
                Direction::Space => roe_ec_spatial_flux(&wl, &wr, gas)?,
                Direction::Time => roe_ec_temporal_flux(&wl, &wr, gas)?,
            };
            flux[1] *= fault(opts);
            let scale = (0..3).map(|c| (dv[c] * flux[c]).abs()).sum::<f64>().max(pot_jump.abs()).max(1.0);
            let r = ec_residual_prim(&flux, &wl, &wr, direction, gas).abs() / scale;
            report.record(check, r, || format!("{wl:?} / {wr:?}"));
        }
    }
    Ok(())
}

// Smallest Cholesky pivot squared relative to the largest entry; zero or
// NaN when the factorization fails.
fn definiteness(m: &SymMatrix3) -> f64 {
    match m.cholesky() {
        Ok(l) => (0..3).map(|i| l[i][i] * l[i][i]).fold(f64::INFINITY, f64::min) / m.max_abs(),
        Err(_) => 0.0,
    }
}

fn spd(report: &mut Report, rng: &mut ChaCha8Rng, opts: &VerifyOptions) -> Result<(), CliError> {
    let gas = &opts.gas;
    let graded = QuadratureRule::graded(20, 10, 0.2)?;
    let rusanov = Dissipation::new(DissipationSpec::ScalarTimesH { factor: 1.0 }, Direction::Space)?;
    let theta = Dissipation::new(DissipationSpec::ThetaTimesH { theta: 0.5 }, Direction::Time)?;
    // 1/definiteness, so the tolerance reads as a condition bound
    let h = report.check("H(v): 1 / relative pivot", 1e14);
    let q = report.check("spatial Q: 1 / relative pivot", 1e14);
    let th = report.check("θH(v̄): 1 / relative pivot", 1e14);
    let t = report.check("upwind T: 1 / relative pivot", 1e14);
    let s = fault(opts);
    for k in 0..report.samples {
        let (wl, wr) = (random_state(rng), random_state(rng));
        let case = || format!("{wl:?} / {wr:?}");
        report.record(h, 1.0 / definiteness(&temporal_jacobian_prim(&wl, gas)?.scaled(s)), case);
        report.record(q, 1.0 / definiteness(&rusanov.matrix(&wl, &wr, gas)?.scaled(s)), case);
        report.record(th, 1.0 / definiteness(&theta.matrix(&wl, &wr, gas)?.scaled(s)), case);
        // the graded rule is costly; a tenth of the pairs suffices
        if k % 10 == 0 {
            let m = upwind_equivalent_t_prim(&wl, &wr, &graded, gas)?.scaled(s);
            report.record(t, 1.0 / definiteness(&m), case);
        }
    }
    Ok(())
}

fn upwind_decomposition(report: &mut Report, rng: &mut ChaCha8Rng, opts: &VerifyOptions) -> Result<(), CliError> {
    let gas = &opts.gas;
    let q = QuadratureRule::graded(20, 10, 0.2)?;
    let check = report.check("|u_past − (u* − TΔv)| / |u_past|", 1e-12);
    for _ in 0..report.samples {
        let (wp, wf) = (random_state(rng), random_state(rng));
        let u_star = tadmor_ec_temporal_flux_prim(&wp, &wf, &q, gas)?;
        let t = upwind_equivalent_t_prim(&wp, &wf, &q, gas)?.scaled(fault(opts));
        let past = gas.state_vector(&wp);
        let defect = norm(&sub(&past, &sub(&u_star, &t.mul_vec(&jump(&wp, &wf, gas)))));
        report.record(check, defect / norm(&past), || format!("{wp:?} / {wf:?}"));
    }
    Ok(())
}

fn telescoping(report: &mut Report, rng: &mut ChaCha8Rng, opts: &VerifyOptions) -> Result<(), CliError> {
    let gas = &opts.gas;
    let space = report.check("space [F̂] − v·[f] / scale", 1e-11);
    let time = report.check("time [Û] − v·[u] / scale", 1e-11);
    for _ in 0..report.samples {
        let w = [random_state(rng), random_state(rng), random_state(rng)];
        let v = w.map(|s| gas.entropy_vars(&s));
        for (check, direction) in [(space, Direction::Space), (time, Direction::Time)] {
            let (f_minus, f_plus) = match direction {
                Direction::Space => (roe_ec_spatial_flux(&w[0], &w[1], gas)?, roe_ec_spatial_flux(&w[1], &w[2], gas)?),
                Direction::Time => (roe_ec_temporal_flux(&w[0], &w[1], gas)?, roe_ec_temporal_flux(&w[1], &w[2], gas)?),
            };
            let mut f_plus = f_plus;
            f_plus[0] *= fault(opts);
            let (g_minus, g_plus) = match direction {
                Direction::Space => (
                    numerical_entropy_flux_space(&v[0], &v[1], &f_minus, gas)?,
                    numerical_entropy_flux_space(&v[1], &v[2], &f_plus, gas)?,
                ),
                Direction::Time => (
                    numerical_entropy_flux_time(&v[0], &v[1], &f_minus, gas)?,
                    numerical_entropy_flux_time(&v[1], &v[2], &f_plus, gas)?,
                ),
            };
            let df = sub(&f_plus, &f_minus);
            let centre = v[1].to_array();
            let scale = (0..3)
                .map(|c| (centre[c] * df[c]).abs())
                .sum::<f64>()
                .max(g_plus.abs())
                .max(g_minus.abs())
                .max(1.0);
            let r = ((g_plus - g_minus) - dot(&centre, &df)).abs() / scale;
            report.record(check, r, || format!("{:?} / {:?} / {:?}", w[0], w[1], w[2]));
        }
    }
    Ok(())
}
