use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stfv::problems::{Preset, ProblemSetup};
use stfv::spacetime_solver::{Boundary, CouplingMode, Scheme, SchemeConfig, SpaceTimeGrid};

use crate::error::CliError;

pub const DEFAULT_CFL: f64 = 0.5;

/// Relative tolerance on `t_final = n_slabs · dt` when all three are given.
const TIME_MATCH_TOL: f64 = 1e-12;

/// One run, read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default = "causal")]
    pub coupling: CouplingMode,
    #[serde(default)]
    pub output: OutputConfig,
}

fn causal() -> CouplingMode {
    CouplingMode::CausalSequential
}

/// Either a named preset or an explicit setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setup: Option<ProblemSetup>,
    /// Replaces the boundary of the preset or setup.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<Boundary>,
}

/// `dt` or `cfl` fixes the step; `n_slabs` or `t_final` the horizon. With
/// neither horizon the problem's own final time is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_cells: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_slabs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Relative paths are taken from the directory holding the config file.
    pub dir: PathBuf,
    /// Time levels to write, `0` being the initial data and `n` the state
    /// after slab `n`. Defaults to the first and last level.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<Vec<usize>>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("output"),
            snapshots: None,
        }
    }
}

/// A config checked and turned into solver objects.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub setup: ProblemSetup,
    pub grid: SpaceTimeGrid,
    pub scheme: Scheme,
    pub mode: CouplingMode,
    pub snapshots: Vec<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let at = if path == "." { String::new() } else { format!("field `{path}`, ") };
            CliError::Config(format!("{at}line {} column {}: {inner}", inner.line(), inner.column()))
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn setup(&self) -> Result<ProblemSetup, CliError> {
        let p = &self.problem;
        let mut setup = match (p.preset, p.setup) {
            (Some(preset), None) => preset.setup(),
            (None, Some(setup)) => setup,
            (Some(_), Some(_)) => return Err(config("problem: give either `preset` or `setup`, not both")),
            (None, None) => return Err(config("problem: one of `preset` or `setup` is required")),
        };
        if let Some(b) = p.boundary {
            setup.boundary = b;
        }
        setup.validate().map_err(|e| config(format!("problem: {e}")))?;
        Ok(setup)
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let setup = self.setup()?;
        let grid = self.space_time_grid(&setup)?;
        let scheme = Scheme::new(self.scheme).map_err(|e| config(format!("scheme: {e}")))?;
        self.coupling
            .block_size(grid.n_slabs)
            .map_err(|e| config(format!("coupling: {e}")))?;
        let snapshots = match &self.output.snapshots {
            Some(levels) => levels.clone(),
            None => vec![0, grid.n_slabs],
        };
        if let Some(bad) = snapshots.iter().find(|k| **k > grid.n_slabs) {
            return Err(config(format!(
                "output.snapshots: level {bad} beyond the last slab ({})",
                grid.n_slabs
            )));
        }
        Ok(Resolved {
            setup,
            grid,
            scheme,
            mode: self.coupling,
            snapshots,
        })
    }

    fn space_time_grid(&self, setup: &ProblemSetup) -> Result<SpaceTimeGrid, CliError> {
        let g = &self.grid;
        let gas = &self.scheme.gas;
        if g.n_cells == 0 {
            return Err(config("grid.n_cells must be positive"));
        }
        for (name, value) in [("dt", g.dt), ("cfl", g.cfl), ("t_final", g.t_final)] {
            if let Some(x) = value {
                if !(x > 0.0 && x.is_finite()) {
                    return Err(config(format!("grid.{name} must be positive, got {x}")));
                }
            }
        }
        if g.n_slabs == Some(0) {
            return Err(config("grid.n_slabs must be positive"));
        }
        if g.dt.is_some() && g.cfl.is_some() {
            return Err(config("grid: give either `dt` or `cfl`, not both"));
        }

        let dx = setup.dx(g.n_cells);
        let grid = |dt: f64, n: usize| SpaceTimeGrid::new(g.n_cells, dx, dt, n, setup.boundary);
        let solver = |e: stfv::Error| config(format!("grid: {e}"));
        match (g.n_slabs, g.t_final, g.dt) {
            (Some(n), Some(t), Some(dt)) => {
                if (n as f64 * dt - t).abs() > TIME_MATCH_TOL * t {
                    return Err(config(format!("grid: t_final {t} differs from n_slabs·dt = {}", n as f64 * dt)));
                }
                grid(dt, n).map_err(solver)
            }
            (Some(n), Some(t), None) => {
                if g.cfl.is_some() {
                    return Err(config("grid: `cfl` conflicts with giving both `n_slabs` and `t_final`"));
                }
                grid(t / n as f64, n).map_err(solver)
            }
            (Some(n), None, Some(dt)) => grid(dt, n).map_err(solver),
            (Some(n), None, None) => setup
                .grid_with_slabs(g.n_cells, g.cfl.unwrap_or(DEFAULT_CFL), n, gas)
                .map_err(solver),
            (None, t, dt) => {
                let t = t.unwrap_or(setup.final_time);
                match dt {
                    Some(dt) => {
                        let n = (t / dt).round().max(1.0);
                        if (n * dt - t).abs() > TIME_MATCH_TOL * t {
                            return Err(config(format!("grid: t_final {t} is not a whole number of steps dt = {dt}")));
                        }
                        grid(dt, n as usize).map_err(solver)
                    }
                    None => setup
                        .grid_to_time(g.n_cells, g.cfl.unwrap_or(DEFAULT_CFL), t, gas)
                        .map_err(solver),
                }
            }
        }
    }

    /// Output directory, relative paths taken from `base`.
    pub fn output_dir(&self, base: &Path) -> PathBuf {
        if self.output.dir.is_absolute() {
            self.output.dir.clone()
        } else {
            base.join(&self.output.dir)
        }
    }
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::from_json(text)
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse(r#"{"problem": {"preset": "sod"}, "grid": {"n_cells": 50}}"#).unwrap();
        assert_eq!(c.scheme, SchemeConfig::default());
        assert_eq!(c.coupling, CouplingMode::CausalSequential);
        let r = c.resolve().unwrap();
        assert!((r.grid.final_time() - 0.2).abs() < 1e-14);
        assert_eq!(r.snapshots, vec![0, r.grid.n_slabs]);
    }

    #[test]
    fn field_errors_name_the_field_and_line() {
        let text = "{\n  \"problem\": {\"preset\": \"sod\"},\n  \"grid\": {\"n_cells\": \"many\"}\n}";
        let msg = parse(text).unwrap_err().to_string();
        assert!(msg.contains("grid.n_cells"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");

        let msg = parse(r#"{"problem": {"preset": "sod"}, "grid": {"n_cells": 5, "nslabs": 3}}"#)
            .unwrap_err()
            .to_string();
        assert!(msg.contains("nslabs"), "{msg}");
    }

    #[test]
    fn horizon_rules() {
        let grid = |g: &str| {
            parse(&format!(r#"{{"problem": {{"preset": "constant"}}, "grid": {g}}}"#))
                .unwrap()
                .resolve()
                .map(|r| r.grid)
        };
        let g = grid(r#"{"n_cells": 10, "dt": 0.01, "n_slabs": 7}"#).unwrap();
        assert_eq!((g.dt, g.n_slabs), (0.01, 7));
        let g = grid(r#"{"n_cells": 10, "n_slabs": 4, "t_final": 0.2}"#).unwrap();
        assert_eq!(g.dt, 0.05);
        let g = grid(r#"{"n_cells": 10, "dt": 0.25}"#).unwrap();
        assert_eq!(g.n_slabs, 4);
        assert!(grid(r#"{"n_cells": 10, "dt": 0.01, "n_slabs": 7, "t_final": 0.5}"#).is_err());
        assert!(grid(r#"{"n_cells": 10, "dt": 0.01, "cfl": 0.5}"#).is_err());
        assert!(grid(r#"{"n_cells": 10, "dt": 0.3}"#).is_err());
        assert!(grid(r#"{"n_cells": 0}"#).is_err());
        assert!(grid(r#"{"n_cells": 10, "cfl": -1}"#).is_err());
    }

    #[test]
    fn problem_needs_exactly_one_source() {
        let c = parse(r#"{"problem": {}, "grid": {"n_cells": 5}}"#).unwrap();
        assert!(matches!(c.resolve(), Err(CliError::Config(_))));
    }

    #[test]
    fn echo_round_trips() {
        let c = parse(
            r#"{"problem": {"preset": "toro123", "boundary": "periodic"},
                "grid": {"n_cells": 20, "cfl": 0.1234567890123456789, "n_slabs": 3},
                "coupling": {"mode": "block_coupled", "block_size": 2},
                "scheme": {"temporal_flux": {"kind": "roe_ec_time"}},
                "output": {"dir": "out", "snapshots": [1, 2]}}"#,
        )
        .unwrap();
        assert_eq!(parse(&c.to_json()).unwrap(), c);
    }
}
