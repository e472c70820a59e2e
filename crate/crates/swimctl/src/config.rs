//! Run configuration: JSON in, validated and with defaults resolved.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axiswim_core::geometry::{equivalent_radius, ShapeFamily, StickDonut, ThreeSphere};
use axiswim_core::optimize::{StrokeMode, StrokeSetup};
use axiswim_core::sqp::SqpOptions;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("invalid field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    ThreeSphere,
    StickDonut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    #[default]
    Free,
    FixedInitial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol_kkt: f64,
    pub tol_feas: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SqpOptions::default();
        Self { tol_kkt: d.tol_kkt, tol_feas: d.tol_feas, max_iterations: d.max_iterations }
    }
}

fn one() -> f64 {
    1.0
}

fn fifteen() -> usize {
    15
}

/// As written in the JSON file. Optional fields are filled in by
/// [`RunConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub family: FamilyKind,
    /// Sphere radius `a` or stick radius `R₀`.
    #[serde(default)]
    pub geometry_scale_mm: Option<f64>,
    #[serde(default = "one")]
    pub viscosity_mpa_s: f64,
    pub target_displacement_mm: f64,
    #[serde(default = "one")]
    pub period_s: f64,
    #[serde(default = "fifteen")]
    pub spatial_controls_per_patch: usize,
    #[serde(default = "fifteen")]
    pub time_controls: usize,
    #[serde(default)]
    pub mode: ModeKind,
    #[serde(default)]
    pub initial_shape: Option<Vec<f64>>,
    #[serde(default)]
    pub bounds: Option<BoundsConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// A validated configuration with the objects it describes.
#[derive(Debug, Clone)]
pub struct Resolved {
    /// Echo with every default written out.
    pub config: RunConfig,
    pub family: Arc<dyn ShapeFamily>,
    pub setup: StrokeSetup,
    pub solver: SqpOptions,
}

impl RunConfig {
    pub fn from_json(text: &str, path: &Path) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text, path)
    }

    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let positive = |field: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(field, format!("must be positive and finite, got {v}")))
            }
        };
        let scale = self.geometry_scale_mm.unwrap_or(match self.family {
            FamilyKind::ThreeSphere => 0.05,
            FamilyKind::StickDonut => equivalent_radius(0.05),
        });
        positive("geometry_scale_mm", scale)?;
        positive("viscosity_mpa_s", self.viscosity_mpa_s)?;
        positive("period_s", self.period_s)?;
        let c = self.target_displacement_mm;
        if !(c >= 0.0 && c.is_finite()) {
            return Err(invalid("target_displacement_mm", format!("must be non-negative and finite, got {c}")));
        }
        if self.spatial_controls_per_patch < 4 {
            return Err(invalid("spatial_controls_per_patch", "a cubic patch needs at least 4 controls"));
        }
        if self.time_controls < 4 {
            return Err(invalid("time_controls", "a cubic time basis needs at least 4 controls"));
        }
        let n = self.spatial_controls_per_patch;
        let family: Arc<dyn ShapeFamily> = match self.family {
            FamilyKind::ThreeSphere => Arc::new(ThreeSphere::new(scale, n).map_err(|e| invalid("geometry_scale_mm", e.to_string()))?),
            FamilyKind::StickDonut => Arc::new(StickDonut::new(scale, n).map_err(|e| invalid("geometry_scale_mm", e.to_string()))?),
        };
        let (flo, fhi) = family.bounds();
        let dim = family.dim();
        let (lo, hi) = match &self.bounds {
            None => (flo.clone(), fhi.clone()),
            Some(b) => {
                if b.lower.len() != dim || b.upper.len() != dim {
                    return Err(invalid("bounds", format!("expected {dim} entries in `lower` and `upper`")));
                }
                for i in 0..dim {
                    let tol = 1e-12 * (fhi[i] - flo[i]);
                    if !(b.lower[i] < b.upper[i]) {
                        return Err(invalid("bounds", format!("lower[{i}] = {} is not below upper[{i}] = {}", b.lower[i], b.upper[i])));
                    }
                    if b.lower[i] < flo[i] - tol || b.upper[i] > fhi[i] + tol {
                        return Err(invalid(
                            "bounds",
                            format!("[{}, {}] leaves the admissible interval [{}, {}] of ξ{}", b.lower[i], b.upper[i], flo[i], fhi[i], i + 1),
                        ));
                    }
                }
                (b.lower.clone(), b.upper.clone())
            }
        };
        let mode = match (self.mode, &self.initial_shape) {
            (ModeKind::Free, None) => StrokeMode::Free,
            (ModeKind::Free, Some(_)) => return Err(invalid("initial_shape", "only used with mode `fixed_initial`")),
            (ModeKind::FixedInitial, None) => return Err(invalid("initial_shape", "required with mode `fixed_initial`")),
            (ModeKind::FixedInitial, Some(x0)) => {
                if x0.len() != dim {
                    return Err(invalid("initial_shape", format!("expected {dim} entries, got {}", x0.len())));
                }
                for i in 0..dim {
                    if !(x0[i] >= lo[i] && x0[i] <= hi[i]) {
                        return Err(invalid("initial_shape", format!("ξ{} = {} is outside the bounds [{}, {}]", i + 1, x0[i], lo[i], hi[i])));
                    }
                }
                StrokeMode::FixedInitial(x0.clone())
            }
        };
        let s = &self.solver;
        positive("solver.tol_kkt", s.tol_kkt)?;
        positive("solver.tol_feas", s.tol_feas)?;
        if s.max_iterations == 0 {
            return Err(invalid("solver.max_iterations", "must be at least 1"));
        }
        let mut config = self.clone();
        config.geometry_scale_mm = Some(scale);
        config.bounds = Some(BoundsConfig { lower: lo.clone(), upper: hi.clone() });
        Ok(Resolved {
            config,
            family,
            setup: StrokeSetup { target: c, period: self.period_s, controls: self.time_controls, mode, bounds: (lo, hi) },
            solver: SqpOptions { tol_kkt: s.tol_kkt, tol_feas: s.tol_feas, max_iterations: s.max_iterations, ..SqpOptions::default() },
        })
    }
}
