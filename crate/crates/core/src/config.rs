//! JSON problem configurations and their translation into grids and problem
//! data.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::fields::{SpaceTimeFieldSpec, SpatialField};
use crate::grid::{Grid, MAX_DIM};
use crate::problem::{ExponentField, ProblemSpec, Regime};
use crate::Result;

/// Axis-aligned box.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// On-disk problem description.
///
/// The singular weight `g` is a spatial field by type: configurations cannot
/// express a time-dependent weight.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub dim: usize,
    #[serde(rename = "box")]
    pub domain: BoxSpec,
    /// Cells per axis.
    pub resolution: Vec<usize>,
    pub p: ExponentField,
    pub q: ExponentField,
    pub delta: ExponentField,
    pub g: SpatialField,
    pub f: SpaceTimeFieldSpec,
    pub u0: SpatialField,
    pub lambda: f64,
    pub beta: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub r: f64,
    pub regime: Regime,
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<ProblemConfig> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<ProblemConfig> {
        let text = std::fs::read_to_string(path)?;
        ProblemConfig::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    /// Builds the grid and samples all data onto it, then validates the data
    /// (not the structural hypotheses; those are a separate, reportable
    /// check).
    pub fn build(&self) -> Result<(Arc<Grid>, Arc<ProblemSpec>)> {
        if self.dim == 0 || self.dim > MAX_DIM {
            return Err(Error::Config(format!(
                "dim must be between 1 and {MAX_DIM}, got {}",
                self.dim
            )));
        }
        for (name, len) in [
            ("box.lo", self.domain.lo.len()),
            ("box.hi", self.domain.hi.len()),
            ("resolution", self.resolution.len()),
        ] {
            if len != self.dim {
                return Err(Error::Config(format!(
                    "{name} has {len} entries but dim = {}",
                    self.dim
                )));
            }
        }
        let grid = Grid::new(&self.domain.lo, &self.domain.hi, &self.resolution)?;
        let spec = ProblemSpec {
            grid: grid.clone(),
            p: self.p.clone(),
            q: self.q.clone(),
            delta: self.delta.clone(),
            g: self.g.sample(&grid)?,
            f: self.f.build(&grid)?,
            u0: self.u0.sample(&grid)?,
            lambda: self.lambda,
            beta: self.beta,
            horizon: self.horizon,
            r: self.r,
            regime: self.regime,
        };
        spec.validate_data()?;
        Ok((grid, Arc::new(spec)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical_json() -> String {
        r#"{
            "dim": 2,
            "box": {"lo": [0.0, 0.0], "hi": [1.0, 1.0]},
            "resolution": [8, 8],
            "p": {"const": 1.8},
            "q": {"const": 2.0},
            "delta": {"const": 0.5},
            "g": {"const": 0.2},
            "f": {"const": 0.5},
            "u0": {"prod_sin": {"amplitude": 0.1}},
            "lambda": 0.5,
            "beta": 1.0,
            "T": 0.05,
            "r": 3.0,
            "regime": "A"
        }"#
        .to_string()
    }

    #[test]
    fn canonical_config_builds() {
        let cfg = ProblemConfig::from_json(&canonical_json()).unwrap();
        let (grid, spec) = cfg.build().unwrap();
        assert_eq!(grid.dim(), 2);
        assert_eq!(grid.dims(), &[9, 9]);
        assert_eq!(spec.horizon, 0.05);
        assert_eq!(spec.regime, Regime::A);
        assert_eq!(spec.p.at_node(&grid, 0), 1.8);
        assert!(spec.u0.respects_boundary());
        assert!((spec.g.values()[grid.interior_nodes()[0]] - 0.2).abs() < 1e-15);
        assert_eq!(spec.f.eval(0, 0.03), 0.5);
    }

    #[test]
    fn round_trip_preserves_the_config() {
        let cfg = ProblemConfig::from_json(&canonical_json()).unwrap();
        let again = ProblemConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = canonical_json().replace("\"lambda\"", "\"lambdaa\"");
        assert!(matches!(
            ProblemConfig::from_json(&text),
            Err(Error::Json(_))
        ));
    }

    #[test]
    fn time_dependent_singular_weight_cannot_parse() {
        let text = canonical_json().replace(
            r#""g": {"const": 0.2}"#,
            r#""g": {"separable": {"space": {"const": 0.2}, "time_poly": [1.0, 1.0]}}"#,
        );
        assert!(matches!(
            ProblemConfig::from_json(&text),
            Err(Error::Json(_))
        ));
    }

    #[test]
    fn shape_mismatches_are_reported() {
        let cfg_text = canonical_json().replace("\"resolution\": [8, 8]", "\"resolution\": [8]");
        let cfg = ProblemConfig::from_json(&cfg_text).unwrap();
        match cfg.build() {
            Err(Error::Config(msg)) => assert!(msg.contains("resolution")),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn dimension_out_of_range_is_reported() {
        let text = canonical_json().replace("\"dim\": 2", "\"dim\": 4");
        let cfg = ProblemConfig::from_json(&text).unwrap();
        assert!(matches!(cfg.build(), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_data_fails_validation_with_exit_code_two() {
        let text = canonical_json().replace(
            r#""u0": {"prod_sin": {"amplitude": 0.1}}"#,
            r#""u0": {"prod_sin": {"amplitude": -0.1}}"#,
        );
        let cfg = ProblemConfig::from_json(&text).unwrap();
        match cfg.build() {
            Err(e) => assert_eq!(e.exit_code(), 2, "got {e:?}"),
            Ok(_) => panic!("negative initial data must not validate"),
        }
    }

    #[test]
    fn nonpositive_horizon_is_rejected() {
        let text = canonical_json().replace("\"T\": 0.05", "\"T\": 0.0");
        let cfg = ProblemConfig::from_json(&text).unwrap();
        assert!(cfg.build().is_err());
    }

    #[test]
    fn files_load_like_strings() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("problem.json");
        std::fs::write(&path, canonical_json()).unwrap();
        let cfg = ProblemConfig::from_file(&path).unwrap();
        assert_eq!(cfg.dim, 2);
        assert!(matches!(
            ProblemConfig::from_file(&dir.path().join("missing.json")),
            Err(Error::Io(_))
        ));
    }
}
