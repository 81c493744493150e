//! JSON run configuration.
//!
//! A document has exactly the groups `physics`, `wave`, `grid`, `solver`,
//! `evolve`, `experiment` and `output`; the first three are required.
//! Unknown keys anywhere are rejected and every default is materialized, so
//! the echoed configuration reproduces a run on its own.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolution::EvolveConfig;
use crate::functionals::{PhysParams, WaveParams};
use crate::grid::{default_extent, Grid};
use crate::ground_state::SolverConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("cannot read config: {0}")]
    Io(String),
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Validation { field: field.to_string(), reason: reason.into() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSection {
    pub omega: f64,
    pub c: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub d: usize,
    pub n: Vec<usize>,
    /// Defaults to 40, 30 or 20 per axis in one, two or three dimensions.
    #[serde(default)]
    pub extent: Vec<f64>,
}

/// Knobs of the individual experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// Seed for solver restarts and all random perturbations.
    pub seed: u64,
    /// Perturbation size for `stability`.
    pub delta: f64,
    pub tau0_factor: f64,
    pub place_in_well: bool,
    /// Frequencies for `mu-scan`; velocities are `sqrt(omega) c` with `c` from `wave`
    /// read at `omega = 1`.
    pub omegas: Vec<f64>,
    /// Extra curve points for `h-curve`.
    pub taus: Vec<f64>,
    /// Threshold against which `G_display` is compared.
    pub eta_probe: f64,
    /// `evolve` starts from `initial_scale * phi + initial_perturbation * eta`.
    pub initial_scale: f64,
    pub initial_perturbation: f64,
    pub monitor_orbit: bool,
    /// Random states used by `check` for the well comparison and coercivity.
    pub check_samples: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            seed: 0,
            delta: 1e-2,
            tau0_factor: 0.05,
            place_in_well: true,
            omegas: vec![0.5, 2.0, 4.0],
            taus: Vec::new(),
            eta_probe: 0.0,
            initial_scale: 1.0,
            initial_perturbation: 0.0,
            monitor_orbit: false,
            check_samples: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".to_string() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub physics: PhysicsSection,
    pub wave: WaveSection,
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub evolve: EvolveConfig,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn phys(&self) -> PhysParams {
        PhysParams::new(self.physics.alpha, self.physics.beta, self.physics.gamma).expect("validated")
    }

    pub fn wave(&self) -> WaveParams {
        WaveParams::new(self.wave.omega, self.wave.c.clone())
    }

    pub fn grid(&self) -> Grid {
        Grid::new(&self.grid.n, &self.grid.extent).expect("validated")
    }

    /// Fills defaults that depend on other fields and checks every invariant,
    /// including admissibility `omega > sigma |c|^2 / 4`.
    pub fn finalize(mut self) -> Result<Self, ConfigError> {
        let d = self.grid.d;
        if !(1..=3).contains(&d) {
            return Err(invalid("grid.d", format!("must be 1, 2 or 3, got {d}")));
        }
        if self.grid.n.len() != d {
            return Err(invalid("grid.n", format!("needs {d} entries, got {}", self.grid.n.len())));
        }
        if self.grid.extent.is_empty() {
            self.grid.extent = vec![default_extent(d); d];
        }
        if self.grid.extent.len() != d {
            return Err(invalid("grid.extent", format!("needs {d} entries, got {}", self.grid.extent.len())));
        }
        Grid::new(&self.grid.n, &self.grid.extent).map_err(|e| invalid("grid", e.to_string()))?;

        let phys = PhysParams::new(self.physics.alpha, self.physics.beta, self.physics.gamma)
            .map_err(|e| invalid("physics", e.to_string()))?;
        if self.wave.c.len() != d {
            return Err(invalid("wave.c", format!("needs {d} entries, got {}", self.wave.c.len())));
        }
        if !(self.wave.omega.is_finite() && self.wave.c.iter().all(|c| c.is_finite())) {
            return Err(invalid("wave", "values must be finite"));
        }
        let wave = self.wave();
        if !wave.is_admissible(&phys) {
            return Err(invalid(
                "wave.omega",
                format!("{} must exceed sigma |c|^2 / 4 = {}", wave.omega, wave.threshold(&phys)),
            ));
        }

        self.solver.validate().map_err(|e| invalid("solver", e.to_string()))?;
        if !self.solver.ansatz.center.is_empty() && self.solver.ansatz.center.len() != d {
            return Err(invalid("solver.ansatz.center", format!("needs {d} entries")));
        }
        self.evolve.validate().map_err(|e| invalid("evolve", e.to_string()))?;

        let ex = &self.experiment;
        if !(ex.delta.is_finite() && ex.delta >= 0.0) {
            return Err(invalid("experiment.delta", "must be non-negative"));
        }
        if !(ex.tau0_factor > 0.0 && ex.tau0_factor < 1.0) {
            return Err(invalid("experiment.tau0_factor", "must lie in (0, 1)"));
        }
        if ex.omegas.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(invalid("experiment.omegas", "frequencies must be positive"));
        }
        if !(ex.initial_scale.is_finite() && ex.initial_perturbation.is_finite() && ex.initial_perturbation >= 0.0) {
            return Err(invalid("experiment", "initial_scale and initial_perturbation must be finite, the latter non-negative"));
        }
        if self.output.dir.is_empty() {
            return Err(invalid("output.dir", "must not be empty"));
        }
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses and validates a JSON configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    raw.finalize()
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"physics":{"alpha":1,"beta":1,"gamma":1},"wave":{"omega":1,"c":[0]},"grid":{"d":1,"n":[512],"extent":[40]}}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.solver, SolverConfig::default());
        assert_eq!(cfg.evolve, EvolveConfig::default());
        assert_eq!(cfg.output.dir, "out");
        // the echo is itself a complete, equivalent config
        let echoed = cfg.to_json();
        for key in ["max_iter", "residual_tol", "record_stride", "scheme", "check_samples"] {
            assert!(echoed.contains(key), "{key} missing from echo");
        }
        assert_eq!(parse_config(&echoed).unwrap(), cfg);
    }

    #[test]
    fn extent_defaults_by_dimension() {
        let text = r#"{"physics":{"alpha":1,"beta":1,"gamma":1},"wave":{"omega":1,"c":[0,0]},"grid":{"d":2,"n":[64,64]}}"#;
        assert_eq!(parse_config(text).unwrap().grid.extent, vec![30.0, 30.0]);
    }

    #[test]
    fn inadmissible_wave_is_rejected() {
        let text = MINIMAL.replace(r#""omega":1,"c":[0]"#, r#""omega":0.1,"c":[1]"#);
        match parse_config(&text) {
            Err(ConfigError::Validation { field, .. }) => assert_eq!(field, "wave.omega"),
            other => panic!("{other:?}"),
        }
        // exactly at the threshold is still inadmissible
        let text = MINIMAL.replace(r#""omega":1,"c":[0]"#, r#""omega":0.25,"c":[1]"#);
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("omega", "omga");
        match parse_config(&text) {
            Err(ConfigError::Parse { message, line, .. }) => {
                assert!(message.contains("omga"));
                assert_eq!(line, 1);
            }
            other => panic!("{other:?}"),
        }
        let nested = MINIMAL.replace(r#""grid""#, r#""solver":{"max_iters":3},"grid""#);
        assert!(matches!(parse_config(&nested), Err(ConfigError::Parse { message, .. }) if message.contains("max_iters")));
    }

    #[test]
    fn structural_errors() {
        let bad_n = MINIMAL.replace("[512]", "[500]");
        assert!(matches!(parse_config(&bad_n), Err(ConfigError::Validation { field, .. }) if field == "grid"));
        let bad_c = MINIMAL.replace(r#""c":[0]"#, r#""c":[0,0]"#);
        assert!(matches!(parse_config(&bad_c), Err(ConfigError::Validation { field, .. }) if field == "wave.c"));
        let bad_alpha = MINIMAL.replace(r#""alpha":1"#, r#""alpha":-1"#);
        assert!(matches!(parse_config(&bad_alpha), Err(ConfigError::Validation { field, .. }) if field == "physics"));
        let bad_dt = MINIMAL.replace(r#""grid""#, r#""evolve":{"dt":-1},"grid""#);
        assert!(matches!(parse_config(&bad_dt), Err(ConfigError::Validation { field, .. }) if field == "evolve"));
        assert!(matches!(parse_config("{"), Err(ConfigError::Parse { .. })));
    }
}
