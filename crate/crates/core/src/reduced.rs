//! Reduced model per shape: drift `V(ξ)` and energy metric `G(ξ)`.
//!
//! For a shape rate `ξ̇` the swimmer translates with `φ̇ = V(ξ)·ξ̇`, chosen
//! so that the net axial force vanishes, and dissipates `ξ̇ᵀG(ξ)ξ̇`.
//! Here `φ̇` is a physical velocity (mm/s), independent of the family's
//! own unit for `φ`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::bem::{assemble_with, flatten, AssemblyOptions, BemError, BoundaryOperator, OperatorCache};
use crate::geometry::{Configuration, GeometryError, ShapeFamily};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReducedError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Bem(#[from] BemError),
    #[error("degenerate configuration: axial drag coefficient {drag} is not positive")]
    Degenerate { drag: f64 },
}

/// Reduced quantities at one shape `ξ`.
#[derive(Debug, Clone)]
pub struct ReducedCoefficients {
    pub xi: Vec<f64>,
    /// Translation velocity per unit shape rate, mm per unit of `ξ_i`.
    pub v: DVector<f64>,
    /// Energy metric, pJ·s per (unit of `ξ`)².
    pub g: DMatrix<f64>,
    /// Axial force of the shape fields at rest, `N_i = ∫DN(ζ_i)·e`.
    pub n: DVector<f64>,
    /// Axial drag coefficient `M̄ = ∫DN(e)·e`.
    pub drag: f64,
    /// Force-free fields `w_i = ζ_i + V_i e`, flattened coefficients.
    pub force_free: Vec<DVector<f64>>,
    /// Force densities `DN(w_i)`.
    pub force_free_density: Vec<DVector<f64>>,
}

/// Evaluates reduced coefficients of a family at fixed viscosity.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    family: Arc<dyn ShapeFamily>,
    eta: f64,
    opts: AssemblyOptions,
    cache: Arc<OperatorCache>,
}

impl ReducedModel {
    pub fn new(family: Arc<dyn ShapeFamily>, eta: f64) -> Self {
        Self { family, eta, opts: AssemblyOptions::default(), cache: Arc::new(OperatorCache::default()) }
    }

    pub fn with_options(mut self, opts: AssemblyOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn family(&self) -> &Arc<dyn ShapeFamily> {
        &self.family
    }

    pub fn viscosity(&self) -> f64 {
        self.eta
    }

    /// Same model at another viscosity. The patch cache is shared, the
    /// cached blocks are viscosity-free.
    pub fn with_viscosity(&self, eta: f64) -> Self {
        Self { eta, ..self.clone() }
    }

    /// Configuration and assembled operator at `(ξ, φ)`.
    pub fn operator(&self, xi: &[f64], phi: f64) -> Result<(Configuration, BoundaryOperator), ReducedError> {
        let cfg = self.family.configure(xi, phi)?;
        let op = assemble_with(&cfg.curve, self.eta, self.opts, Some(&self.cache))?;
        Ok((cfg, op))
    }

    pub fn compute(&self, xi: &[f64]) -> Result<ReducedCoefficients, ReducedError> {
        self.compute_at(xi, 0.0)
    }

    /// As [`ReducedModel::compute`], at an explicit axial position. The
    /// result does not depend on `φ` beyond round-off.
    pub fn compute_at(&self, xi: &[f64], phi: f64) -> Result<ReducedCoefficients, ReducedError> {
        let (cfg, op) = self.operator(xi, phi)?;
        reduce(&cfg, &op, xi)
    }

    /// Independent evaluation at each sample, order preserved.
    pub fn path(&self, samples: &[Vec<f64>]) -> Vec<Result<ReducedCoefficients, ReducedError>> {
        samples.par_iter().map(|xi| self.compute(xi)).collect()
    }
}

/// One-shot evaluation without a shared cache.
pub fn compute_reduced(family: Arc<dyn ShapeFamily>, xi: &[f64], eta: f64) -> Result<ReducedCoefficients, ReducedError> {
    ReducedModel::new(family, eta).compute(xi)
}

/// `V` and `G` from an assembled operator: one factorization, `N + 1`
/// right-hand sides.
pub fn reduce(cfg: &Configuration, op: &BoundaryOperator, xi: &[f64]) -> Result<ReducedCoefficients, ReducedError> {
    let e = flatten(&cfg.axis);
    let me = op.mass() * &e;
    let fe = op.dn_map(&e)?;
    let drag = fe.dot(&me);
    let zetas: Vec<DVector<f64>> = cfg.zeta.iter().map(|z| flatten(z)).collect();
    let fz = zetas.iter().map(|z| op.dn_map(z)).collect::<Result<Vec<_>, _>>()?;
    let n = DVector::from_iterator(zetas.len(), fz.iter().map(|f| f.dot(&me)));
    let scale = n.amax().max(drag.abs());
    if !(drag > 1e-12 * scale) {
        return Err(ReducedError::Degenerate { drag });
    }
    let v = -&n / drag;
    let force_free: Vec<DVector<f64>> = zetas.iter().zip(v.iter()).map(|(z, &vi)| z + &e * vi).collect();
    let density: Vec<DVector<f64>> = fz.iter().zip(v.iter()).map(|(f, &vi)| f + &fe * vi).collect();
    let k = zetas.len();
    let mw: Vec<DVector<f64>> = force_free.iter().map(|w| op.mass() * w).collect();
    let mut g = DMatrix::from_fn(k, k, |i, j| density[i].dot(&mw[j]));
    g = (&g + g.transpose()) * 0.5;
    Ok(ReducedCoefficients { xi: xi.to_vec(), v, g, n, drag, force_free, force_free_density: density })
}
