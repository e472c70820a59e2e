//! Galerkin boundary elements for the axisymmetric Stokes single layer.
//!
//! Unknowns are spline coefficients of a surface field on the generator
//! curve, flattened as `2·i + c` with `c = 0` for the axial and `c = 1` for
//! the radial component. The force density `f` is the one the swimmer
//! exerts on the fluid, so the boundary velocity is
//! `u(x) = 1/(8πη) ∫ S(x, y) f(y) dΓ(y)` and the dissipated power is
//! `∫ f·u dΓ ≥ 0`.

mod assembly;
pub mod kernel;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

pub use assembly::{assemble, assemble_with, AssemblyOptions, OperatorCache};
pub use kernel::{ring_stokeslet, KernelError, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BemError {
    #[error("degenerate panel {panel} of patch {patch}: {reason}")]
    DegeneratePanel { patch: usize, panel: usize, reason: &'static str },
    #[error("closed patch {0} needs at least 3 panels")]
    TooFewPanels(usize),
    #[error("viscosity must be positive, got {0}")]
    NonPositiveViscosity(f64),
    #[error("{which} is not positive definite; factorization failed")]
    NotPositiveDefinite { which: &'static str },
    #[error("vector of length {got} does not match operator size {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Assembled single-layer and mass matrices for one configuration.
#[derive(Clone)]
pub struct BoundaryOperator {
    single_layer: DMatrix<f64>,
    mass: DMatrix<f64>,
    normal_loads: Vec<DVector<f64>>,
    deflated: Cholesky<f64, Dyn>,
    mass_chol: Cholesky<f64, Dyn>,
    eta: f64,
    asymmetry: f64,
}

impl std::fmt::Debug for BoundaryOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundaryOperator")
            .field("dim", &self.dim())
            .field("eta", &self.eta)
            .field("asymmetry", &self.asymmetry)
            .finish()
    }
}

impl BoundaryOperator {
    pub(crate) fn from_parts(
        single_layer: DMatrix<f64>,
        mass: DMatrix<f64>,
        normal_loads: Vec<DVector<f64>>,
        eta: f64,
        asymmetry: f64,
    ) -> Result<Self, BemError> {
        let dim = single_layer.nrows();
        // Each closed body carries one near-null vector (the normal field,
        // whose single layer vanishes). Lift it by the mean diagonal.
        let beta = single_layer.trace() / dim as f64;
        let mut deflated = single_layer.clone();
        for b in &normal_loads {
            let nb = b.norm();
            if nb > 0.0 {
                let u = b / nb;
                deflated.ger(beta, &u, &u, 1.0);
            }
        }
        let deflated = Cholesky::new(deflated).ok_or(BemError::NotPositiveDefinite { which: "single-layer matrix" })?;
        let mass_chol = Cholesky::new(mass.clone()).ok_or(BemError::NotPositiveDefinite { which: "mass matrix" })?;
        Ok(Self { single_layer, mass, normal_loads, deflated, mass_chol, eta, asymmetry })
    }

    pub fn dim(&self) -> usize {
        self.single_layer.nrows()
    }

    /// Symmetrized single-layer Galerkin matrix.
    pub fn single_layer(&self) -> &DMatrix<f64> {
        &self.single_layer
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub fn viscosity(&self) -> f64 {
        self.eta
    }

    /// `max|A - Aᵀ| / max|A|` of the raw quadrature, before symmetrization.
    pub fn raw_asymmetry(&self) -> f64 {
        self.asymmetry
    }

    /// Load vectors `∫ψ_i n dΓ`, one per patch.
    pub fn normal_loads(&self) -> &[DVector<f64>] {
        &self.normal_loads
    }

    /// Coefficients `n_h` of the unit normal field of each patch (mass
    /// projection).
    pub fn normal_fields(&self) -> Vec<DVector<f64>> {
        self.normal_loads.iter().map(|b| self.mass_chol.solve(b)).collect()
    }

    fn check(&self, v: &DVector<f64>) -> Result<(), BemError> {
        if v.len() != self.dim() {
            return Err(BemError::DimensionMismatch { got: v.len(), expected: self.dim() });
        }
        Ok(())
    }

    /// Force density coefficients producing the boundary velocity `v`.
    pub fn dn_map(&self, v: &DVector<f64>) -> Result<DVector<f64>, BemError> {
        self.check(v)?;
        Ok(self.deflated.solve(&(&self.mass * v)))
    }

    /// Boundary velocity coefficients produced by the force density `f`.
    pub fn nd_map(&self, f: &DVector<f64>) -> Result<DVector<f64>, BemError> {
        self.check(f)?;
        Ok(self.mass_chol.solve(&(&self.single_layer * f)))
    }

    /// `∫ f·v dΓ`.
    pub fn pairing(&self, v: &DVector<f64>, f: &DVector<f64>) -> f64 {
        v.dot(&(&self.mass * f))
    }

    /// Net force along the axis, `∫ f·e dΓ`.
    pub fn axial_force(&self, f: &DVector<f64>) -> f64 {
        let e = axial_field(self.dim() / 2);
        self.pairing(&e, f)
    }
}

/// Flattens 2-vector coefficients into the operator layout.
pub fn flatten(coeffs: &[[f64; 2]]) -> DVector<f64> {
    DVector::from_iterator(coeffs.len() * 2, coeffs.iter().flat_map(|c| c.iter().copied()))
}

/// Constant unit axial field with `m` coefficients, flattened.
pub fn axial_field(m: usize) -> DVector<f64> {
    DVector::from_fn(2 * m, |r, _| if r % 2 == 0 { 1.0 } else { 0.0 })
}
