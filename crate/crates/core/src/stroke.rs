//! Time-discretized strokes and the discrete energy and displacement
//! functionals with their gradients.
//!
//! A stroke `ξ(t) = Σ_α ξ^α ψ_α(t)` is stored with flat coefficient index
//! `I = i + α·N`, where `i` runs over shape variables and `α` over time
//! controls.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::bspline::{BasisSet, SplineError};
use crate::quadrature::{gauss_legendre, Rule};
use crate::reduced::{ReducedCoefficients, ReducedError, ReducedModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrokeError {
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error(transparent)]
    Reduced(#[from] ReducedError),
    #[error("period must be positive, got {0}")]
    BadPeriod(f64),
    #[error("{got} coefficients do not fit {n} shape variables × {q} time controls")]
    CoefficientCount { got: usize, n: usize, q: usize },
    #[error("stroke has {got} shape variables, family expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("finite-difference step {0} underflows")]
    StepUnderflow(f64),
}

/// How the time basis treats the period ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeBasis {
    /// Wrapped knots, `ξ(0) = ξ(T)` with C² continuity.
    Periodic,
    /// Open knots; the first and last coefficients are the end shapes.
    Clamped,
}

/// Spline trajectory in shape space.
#[derive(Debug, Clone, PartialEq)]
pub struct StrokePath {
    basis: BasisSet,
    kind: TimeBasis,
    n: usize,
    coeffs: Vec<f64>,
    period: f64,
}

impl StrokePath {
    pub fn new(kind: TimeBasis, n: usize, q: usize, period: f64, coeffs: Vec<f64>) -> Result<Self, StrokeError> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(StrokeError::BadPeriod(period));
        }
        let basis = match kind {
            TimeBasis::Periodic => BasisSet::periodic(q, (0.0, period))?,
            TimeBasis::Clamped => BasisSet::clamped(q, (0.0, period))?,
        };
        if coeffs.len() != n * q {
            return Err(StrokeError::CoefficientCount { got: coeffs.len(), n, q });
        }
        Ok(Self { basis, kind, n, coeffs, period })
    }

    /// Constant stroke sitting at `xi0`.
    pub fn constant(kind: TimeBasis, q: usize, period: f64, xi0: &[f64]) -> Result<Self, StrokeError> {
        let coeffs = (0..q).flat_map(|_| xi0.iter().copied()).collect();
        Self::new(kind, xi0.len(), q, period, coeffs)
    }

    pub fn kind(&self) -> TimeBasis {
        self.kind
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    /// Number of shape variables `N`.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of time controls `Q`.
    pub fn controls(&self) -> usize {
        self.basis.len()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Copy with other coefficients, same basis.
    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> Result<Self, StrokeError> {
        if coeffs.len() != self.coeffs.len() {
            return Err(StrokeError::CoefficientCount { got: coeffs.len(), n: self.n, q: self.controls() });
        }
        Ok(Self { coeffs, ..self.clone() })
    }

    /// Same coefficients on a period of different length.
    pub fn with_period(&self, period: f64) -> Result<Self, StrokeError> {
        Self::new(self.kind, self.n, self.controls(), period, self.coeffs.clone())
    }

    /// Least-squares fit of samples `(t, ξ(t))`; exact for samples of a
    /// path in the same basis, given enough of them.
    pub fn fit(kind: TimeBasis, q: usize, period: f64, samples: &[(f64, Vec<f64>)]) -> Result<Self, StrokeError> {
        let n = samples.first().map_or(0, |s| s.1.len());
        let template = Self::new(kind, n, q, period, vec![0.0; n * q])?;
        if samples.len() < q || samples.iter().any(|s| s.1.len() != n) {
            return Err(StrokeError::CoefficientCount { got: samples.len() * n, n, q });
        }
        let mut b = DMatrix::zeros(samples.len(), q);
        let mut rhs = DMatrix::zeros(samples.len(), n);
        for (r, (t, xi)) in samples.iter().enumerate() {
            let local = template.basis.eval_local(*t)?;
            for (slot, &alpha) in local.indices.iter().enumerate() {
                b[(r, alpha)] += local.ders[0][slot];
            }
            for (i, v) in xi.iter().enumerate() {
                rhs[(r, i)] = *v;
            }
        }
        let sol = b.svd(true, true).solve(&rhs, 1e-14).map_err(|_| StrokeError::CoefficientCount { got: samples.len(), n, q })?;
        let coeffs = (0..q).flat_map(|a| (0..n).map(move |i| (a, i))).map(|(a, i)| sol[(a, i)]).collect();
        template.with_coeffs(coeffs)
    }

    /// `ξ(t)` and `ξ̇(t)`.
    pub fn eval(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>), StrokeError> {
        let local = self.basis.eval_local(t)?;
        Ok(self.combine(&local))
    }

    fn combine(&self, local: &crate::bspline::LocalBasis) -> (Vec<f64>, Vec<f64>) {
        let xi = (0..self.n).map(|i| local.combine_strided(&self.coeffs, self.n, i, 0)).collect();
        // the time basis is a partition of unity, so its derivatives sum to
        // zero: measuring from one local coefficient keeps constant
        // stretches exactly at rest
        let rate = (0..self.n)
            .map(|i| {
                let base = self.coeffs[local.indices[0] * self.n + i];
                local.indices.iter().zip(&local.ders[1]).map(|(&k, d)| d * (self.coeffs[k * self.n + i] - base)).sum()
            })
            .collect();
        (xi, rate)
    }
}

/// Values at one time-quadrature node.
#[derive(Debug, Clone)]
pub struct NodeRecord {
    pub t: f64,
    pub weight: f64,
    pub xi: Vec<f64>,
    pub xi_dot: Vec<f64>,
    pub v: DVector<f64>,
    pub g: DMatrix<f64>,
    /// Translation velocity `V·ξ̇`, mm/s.
    pub phi_dot: f64,
}

/// Energy (pJ), displacement (mm) and optionally their gradients.
#[derive(Debug, Clone)]
pub struct StrokeEvaluation {
    pub energy: f64,
    pub displacement: f64,
    pub nodes: Vec<NodeRecord>,
    pub grad_energy: Option<Vec<f64>>,
    pub grad_displacement: Option<Vec<f64>>,
}

/// Discrete functionals of a stroke for one family.
#[derive(Debug, Clone)]
pub struct StrokeFunctional {
    model: ReducedModel,
    rule: Rule,
    /// Relative step of the shape differences, in units of the box width.
    fd_step: f64,
}

struct NodeEval {
    record: NodeRecord,
    dv: Vec<DVector<f64>>,
    dg: Vec<DMatrix<f64>>,
}

impl StrokeFunctional {
    pub fn new(model: ReducedModel) -> Self {
        Self::with_points(model, 8)
    }

    /// Gauss rule with `points` nodes per knot span of the time basis.
    pub fn with_points(model: ReducedModel, points: usize) -> Self {
        Self { model, rule: gauss_legendre(points), fd_step: 1e-6 }
    }

    pub fn model(&self) -> &ReducedModel {
        &self.model
    }

    pub fn energy(&self, path: &StrokePath) -> Result<f64, StrokeError> {
        Ok(self.evaluate(path, false)?.energy)
    }

    pub fn displacement(&self, path: &StrokePath) -> Result<f64, StrokeError> {
        Ok(self.evaluate(path, false)?.displacement)
    }

    /// `(∇E, ∇C)` with respect to the flat coefficients.
    pub fn gradients(&self, path: &StrokePath) -> Result<(Vec<f64>, Vec<f64>), StrokeError> {
        let ev = self.evaluate(path, true)?;
        Ok((ev.grad_energy.unwrap_or_default(), ev.grad_displacement.unwrap_or_default()))
    }

    /// Quadrature nodes `(t, weight)` of the time rule.
    pub fn nodes(&self, path: &StrokePath) -> Vec<(f64, f64)> {
        path.basis()
            .spans()
            .iter()
            .flat_map(|span| self.rule.iter().map(move |(x, w)| (span.at(x), w * span.len())))
            .collect()
    }

    /// Evaluates both functionals. With `gradient`, the shape derivatives
    /// of `V` and `G` are taken by central differences at every node, and
    /// combined with the spline basis (each coefficient only touches the
    /// nodes in the support of its basis function).
    pub fn evaluate(&self, path: &StrokePath, gradient: bool) -> Result<StrokeEvaluation, StrokeError> {
        let family = self.model.family();
        if path.dim() != family.dim() {
            return Err(StrokeError::DimensionMismatch { got: path.dim(), expected: family.dim() });
        }
        let (lo, hi) = family.bounds();
        let steps: Vec<f64> = lo.iter().zip(&hi).map(|(l, u)| self.fd_step * (u - l)).collect();
        if steps.iter().any(|h| !(*h > f64::EPSILON * 16.0)) {
            return Err(StrokeError::StepUnderflow(steps.iter().cloned().fold(f64::INFINITY, f64::min)));
        }
        let basis = path.basis();
        let mut jobs = Vec::new();
        for span in basis.spans() {
            for (x, w) in self.rule.iter() {
                let t = span.at(x);
                jobs.push((t, w * span.len(), basis.eval_span(span, t)));
            }
        }
        let evals: Vec<NodeEval> = jobs
            .par_iter()
            .map(|(t, w, local)| self.node(path, *t, *w, local, gradient.then_some(&steps[..])))
            .collect::<Result<_, _>>()?;

        let n = path.dim();
        let mut energy = 0.0;
        let mut displacement = 0.0;
        let mut ge = vec![0.0; path.coeffs().len()];
        let mut gc = vec![0.0; path.coeffs().len()];
        for (ev, (_, w, local)) in evals.iter().zip(&jobs) {
            let r = &ev.record;
            let rate = DVector::from_column_slice(&r.xi_dot);
            let grate = &r.g * &rate;
            energy += w * rate.dot(&grate);
            displacement += w * r.phi_dot;
            if gradient {
                for i in 0..n {
                    let de = rate.dot(&(&ev.dg[i] * &rate));
                    let dc = ev.dv[i].dot(&rate);
                    for (slot, &alpha) in local.indices.iter().enumerate() {
                        let idx = i + alpha * n;
                        let (b, db) = (local.ders[0][slot], local.ders[1][slot]);
                        ge[idx] += w * (b * de + 2.0 * db * grate[i]);
                        gc[idx] += w * (b * dc + db * r.v[i]);
                    }
                }
            }
        }
        Ok(StrokeEvaluation {
            energy,
            displacement,
            nodes: evals.into_iter().map(|e| e.record).collect(),
            grad_energy: gradient.then_some(ge),
            grad_displacement: gradient.then_some(gc),
        })
    }

    fn node(
        &self,
        path: &StrokePath,
        t: f64,
        weight: f64,
        local: &crate::bspline::LocalBasis,
        steps: Option<&[f64]>,
    ) -> Result<NodeEval, StrokeError> {
        let (xi, xi_dot) = path.combine(local);
        let base = self.model.compute(&xi)?;
        let (mut dv, mut dg) = (Vec::new(), Vec::new());
        if let Some(steps) = steps {
            for (i, &h) in steps.iter().enumerate() {
                let shifted = |sign: f64| -> Result<ReducedCoefficients, StrokeError> {
                    let mut p = xi.clone();
                    p[i] += sign * h;
                    Ok(self.model.compute(&p)?)
                };
                let (plus, minus) = (shifted(1.0)?, shifted(-1.0)?);
                dv.push((&plus.v - &minus.v) / (2.0 * h));
                dg.push((&plus.g - &minus.g) / (2.0 * h));
            }
        }
        let phi_dot = base.v.iter().zip(&xi_dot).map(|(a, b)| a * b).sum();
        let record = NodeRecord { t, weight, xi, xi_dot, v: base.v, g: base.g, phi_dot };
        Ok(NodeEval { record, dv, dg })
    }
}
