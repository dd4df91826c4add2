use stfv::dissipation::DissipationSpec;
use stfv::flux_algebra::InterfaceFluxKind;
use stfv::problems::{InitialData, Preset, ProblemSetup, RiemannIc};
use stfv::spacetime_solver::{advance, Boundary, CouplingMode, Scheme, SchemeConfig, SpaceTimeGrid};
use stfv::{ConsState, Error, GasParams, PrimState};

const GAS: GasParams = GasParams { gamma: 1.4 };

fn scheme(spatial: InterfaceFluxKind, temporal: InterfaceFluxKind) -> Scheme {
    Scheme::new(SchemeConfig {
        spatial_flux: spatial,
        temporal_flux: temporal,
        ..SchemeConfig::default()
    })
    .unwrap()
}

fn es_space() -> InterfaceFluxKind {
    InterfaceFluxKind::EsSpace {
        dissipation: DissipationSpec::ScalarTimesH { factor: 1.0 },
    }
}

fn setup(n: usize, cfl: f64, slabs: usize, p: Preset) -> (ProblemSetup, Vec<ConsState>, SpaceTimeGrid) {
    let s = p.setup();
    let init = s.initial_states(n, &GAS).unwrap();
    let grid = s.grid_with_slabs(n, cfl, slabs, &GAS).unwrap();
    (s, init, grid)
}

#[test]
fn every_flux_pairing_conserves_mass_momentum_and_energy() {
    let spatial = [
        InterfaceFluxKind::RoeEcSpace,
        InterfaceFluxKind::TadmorEcSpace,
        es_space(),
        InterfaceFluxKind::EsSpace {
            dissipation: DissipationSpec::ThetaTimesH { theta: 0.5 },
        },
    ];
    let temporal = [
        InterfaceFluxKind::UpwindTime,
        InterfaceFluxKind::RoeEcTime,
        InterfaceFluxKind::TadmorEcTime,
        InterfaceFluxKind::EsTime {
            dissipation: DissipationSpec::ThetaTimesH { theta: 0.5 },
        },
        InterfaceFluxKind::EsTime {
            dissipation: DissipationSpec::UpwindEquivalentIntegral { order: 16 },
        },
    ];
    let (_, init, grid) = setup(24, 0.4, 3, Preset::DensityWave);
    for s in spatial {
        for t in temporal {
            let traj = scheme(s, t).march(&init, &grid, CouplingMode::FullyCoupled).unwrap();
            let drift = traj.conservation_drift(grid.dx);
            assert!(drift.iter().all(|d| *d <= 1e-12), "{s:?} / {t:?}: drift {drift:?}");
        }
    }
}

#[test]
fn causal_slabs_ignore_the_future() {
    let (s, init, _) = setup(40, 0.5, 3, Preset::Sod);
    let sch = scheme(es_space(), InterfaceFluxKind::UpwindTime);
    let short = s.grid_with_slabs(40, 0.5, 3, &GAS).unwrap();
    let long = SpaceTimeGrid { n_slabs: 6, ..short };
    let a = sch.march(&init, &short, CouplingMode::CausalSequential).unwrap();
    let b = sch.march(&init, &long, CouplingMode::CausalSequential).unwrap();
    assert_eq!(a.slabs[..], b.slabs[..3]);

    // one joint solve agrees up to the Newton tolerance
    let c = sch.march(&init, &long, CouplingMode::FullyCoupled).unwrap();
    for n in 0..3 {
        for (x, y) in a.slabs[n].states.iter().zip(&c.slabs[n].states) {
            for (p, q) in x.to_array().iter().zip(y.to_array()) {
                assert!((p - q).abs() <= 1e-11, "slab {n}: {p} vs {q}");
            }
        }
    }
}

#[test]
fn coupled_ec_time_lets_later_slabs_reach_back() {
    let (s, init, _) = setup(40, 0.5, 3, Preset::Sod);
    let sch = scheme(es_space(), InterfaceFluxKind::RoeEcTime);
    let short = s.grid_with_slabs(40, 0.5, 2, &GAS).unwrap();
    let long = SpaceTimeGrid { n_slabs: 4, ..short };
    let a = sch.march(&init, &short, CouplingMode::FullyCoupled).unwrap();
    let b = sch.march(&init, &long, CouplingMode::FullyCoupled).unwrap();
    assert_ne!(a.slabs[0].states, b.slabs[0].states);

    // separate blocks stay causal with respect to each other
    let a = sch.march(&init, &short, CouplingMode::BlockCoupled { block_size: 2 }).unwrap();
    let b = sch.march(&init, &long, CouplingMode::BlockCoupled { block_size: 2 }).unwrap();
    assert_eq!(a.slabs[..2], b.slabs[..2]);
}

#[test]
fn constant_state_is_a_fixed_point_of_every_mode() {
    let (_, init, grid) = setup(16, 0.8, 8, Preset::Constant);
    for temporal in [InterfaceFluxKind::UpwindTime, InterfaceFluxKind::TadmorEcTime] {
        let sch = scheme(es_space(), temporal);
        for mode in [
            CouplingMode::CausalSequential,
            CouplingMode::BlockCoupled { block_size: 4 },
            CouplingMode::FullyCoupled,
        ] {
            let traj = sch.march(&init, &grid, mode).unwrap();
            for slab in &traj.slabs {
                assert_eq!(slab.states, init, "{temporal:?} {mode:?}");
                assert_eq!(slab.diagnostics.iterations, 0);
            }
        }
    }
}

#[test]
fn long_constant_run_keeps_entropy_and_totals_exact() {
    let (_, init, grid) = setup(10, 0.9, 50, Preset::Constant);
    let run = advance(&init, &scheme(es_space(), InterfaceFluxKind::UpwindTime), &grid, CouplingMode::CausalSequential).unwrap();
    assert_eq!(run.entropy_series.len(), 51);
    assert!(run.entropy_series.iter().all(|s| *s == run.entropy_series[0]));
    assert_eq!(run.trajectory.conservation_drift(grid.dx), [0.0; 3]);
    for b in &run.budgets {
        assert_eq!(b.max_cell_residual, 0.0);
    }
}

#[test]
fn entropy_stable_run_never_gains_entropy() {
    // periodic, so no entropy leaves through the boundary
    let (s, init, _) = setup(60, 0.6, 30, Preset::Sod);
    let grid = SpaceTimeGrid {
        boundary: Boundary::Periodic,
        ..s.grid_with_slabs(60, 0.6, 30, &GAS).unwrap()
    };
    let run = advance(&init, &scheme(es_space(), InterfaceFluxKind::UpwindTime), &grid, CouplingMode::CausalSequential).unwrap();
    for pair in run.entropy_series.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-12 * pair[0].abs().max(1.0), "{} -> {}", pair[0], pair[1]);
    }
    for b in &run.budgets {
        assert!(b.min_production() >= -1e-12);
    }
}

#[test]
fn newton_handles_large_time_steps() {
    let (_, init, grid) = setup(32, 20.0, 2, Preset::DensityWave);
    let traj = scheme(es_space(), InterfaceFluxKind::UpwindTime)
        .march(&init, &grid, CouplingMode::CausalSequential)
        .unwrap();
    for slab in &traj.slabs {
        let d = slab.diagnostics;
        assert!(d.final_residual <= 1e-12_f64.max(1e-13 * d.initial_residual), "{d:?}");
    }
    assert!(traj.conservation_drift(grid.dx).iter().all(|d| *d <= 1e-12));
}

#[test]
fn stalled_newton_recovers_by_time_step_continuation() {
    // a shock driven into the low-pressure side; plain Newton from the
    // previous state heads towards vacuum in the first cell past the diaphragm
    let s = ProblemSetup {
        data: InitialData::Riemann(RiemannIc {
            left: PrimState::new(1.0, 0.75, 1.0),
            right: PrimState::new(0.125, 0.0, 0.1),
            x0: 0.3,
            xa: 0.0,
            xb: 1.0,
        }),
        ..Preset::Sod.setup()
    };
    let init = s.initial_states(100, &GAS).unwrap();
    let grid = s.grid_with_slabs(100, 0.5, 3, &GAS).unwrap();
    let traj = scheme(es_space(), InterfaceFluxKind::UpwindTime)
        .march(&init, &grid, CouplingMode::CausalSequential)
        .unwrap();
    let first = traj.slabs[0].diagnostics;
    assert!(first.continuation_stages > 0, "{first:?}");
    assert!(first.final_residual <= 1e-12, "{first:?}");
    assert_eq!(traj.slabs[2].diagnostics.continuation_stages, 0);

    // the continuation result solves the original slab equations
    let again = scheme(es_space(), InterfaceFluxKind::UpwindTime)
        .newton_solve_slab(&init, Some(&traj.slabs[0].states), &grid)
        .unwrap();
    assert_eq!(again.diagnostics.iterations, 0);
}

#[test]
fn vacuum_like_start_reports_the_failing_slab() {
    let (_, mut init, grid) = setup(8, 0.5, 2, Preset::Sod);
    init[3].ener = 0.5 * init[3].mom * init[3].mom / init[3].rho - 1e-3;
    let err = scheme(es_space(), InterfaceFluxKind::UpwindTime)
        .march(&init, &grid, CouplingMode::CausalSequential)
        .unwrap_err();
    assert!(matches!(err, Error::CellState { slab: 0, cell: 3, .. }), "{err}");
}
