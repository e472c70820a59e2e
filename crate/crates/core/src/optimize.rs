//! Energy-optimal strokes: the discrete problem `min E_h` subject to
//! `C_h = c` with coefficient bounds, posed for the SQP solver.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::sqp::{self, Derivatives, IterationLog, NlpProblem, SqpError, SqpOptions, SqpOutcome, SqpReport, SqpStatus, Values};
use crate::stroke::{StrokeError, StrokeEvaluation, StrokeFunctional, StrokePath, TimeBasis};

/// How the stroke ends are treated.
#[derive(Debug, Clone, PartialEq)]
pub enum StrokeMode {
    /// Periodic time basis, no shape imposed.
    Free,
    /// Clamped basis starting and ending at the given shape.
    FixedInitial(Vec<f64>),
}

/// Everything that defines one optimal-stroke problem besides the family.
#[derive(Debug, Clone, PartialEq)]
pub struct StrokeSetup {
    pub target: f64,
    pub period: f64,
    pub controls: usize,
    pub mode: StrokeMode,
    /// Box on the shape variables, applied to every coefficient.
    pub bounds: (Vec<f64>, Vec<f64>),
}

/// SQP view of a stroke problem over the flat coefficient vector.
pub struct StrokeProblem<'a> {
    functional: &'a StrokeFunctional,
    template: StrokePath,
    target: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    fixed: Vec<usize>,
}

impl<'a> StrokeProblem<'a> {
    pub fn new(functional: &'a StrokeFunctional, template: StrokePath, target: f64, bounds: &(Vec<f64>, Vec<f64>)) -> Self {
        let n = template.dim();
        let q = template.controls();
        let lower = (0..n * q).map(|k| bounds.0[k % n]).collect();
        let upper = (0..n * q).map(|k| bounds.1[k % n]).collect();
        let fixed = match template.kind() {
            TimeBasis::Periodic => Vec::new(),
            TimeBasis::Clamped => (0..n).chain((q - 1) * n..q * n).collect(),
        };
        Self { functional, template, target, lower, upper, fixed }
    }

    pub fn path(&self, x: &[f64]) -> Result<StrokePath, StrokeError> {
        self.template.with_coeffs(x.to_vec())
    }

    fn eval(&self, x: &[f64], gradient: bool) -> Result<StrokeEvaluation, SqpError> {
        let path = self.path(x).map_err(|e| SqpError::Evaluation(e.to_string()))?;
        self.functional.evaluate(&path, gradient).map_err(|e| SqpError::Evaluation(e.to_string()))
    }
}

impl NlpProblem for StrokeProblem<'_> {
    fn dim(&self) -> usize {
        self.template.coeffs().len()
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.lower.clone(), self.upper.clone())
    }

    fn fixed(&self) -> Vec<usize> {
        self.fixed.clone()
    }

    fn values(&self, x: &[f64]) -> Result<Values, SqpError> {
        let ev = self.eval(x, false)?;
        Ok(Values { f: ev.energy, c: ev.displacement - self.target })
    }

    fn derivatives(&self, x: &[f64]) -> Result<Derivatives, SqpError> {
        let ev = self.eval(x, true)?;
        Ok(Derivatives {
            f: ev.energy,
            c: ev.displacement - self.target,
            grad_f: ev.grad_energy.unwrap_or_default(),
            grad_c: ev.grad_displacement.unwrap_or_default(),
        })
    }

    /// The part of `∇²E` from its quadratic dependence on `ξ̇`,
    /// `2∫ψ̇_α ψ̇_β G dt`, plus a small multiple of the identity for the
    /// directions it misses (uniform shifts of a periodic stroke).
    fn initial_hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let path = self.path(x).ok()?;
        let ev = self.functional.evaluate(&path, false).ok()?;
        let n = path.dim();
        let dim = x.len();
        let mut h = DMatrix::zeros(dim, dim);
        for node in &ev.nodes {
            let local = path.basis().eval_local(node.t).ok()?;
            for (ra, &a) in local.indices.iter().enumerate() {
                for (rb, &b) in local.indices.iter().enumerate() {
                    let s = 2.0 * node.weight * local.ders[1][ra] * local.ders[1][rb];
                    for i in 0..n {
                        for j in 0..n {
                            h[(a * n + i, b * n + j)] += s * node.g[(i, j)];
                        }
                    }
                }
            }
        }
        let h = (&h + h.transpose()) * 0.5;
        let shift = 1e-2 * h.diagonal().max();
        Some(h + DMatrix::identity(dim, dim) * shift)
    }
}

/// Greville abscissae of the time basis, one per coefficient.
fn greville(path: &StrokePath) -> Vec<f64> {
    let k = path.basis().knots();
    (0..path.controls()).map(|a| (k[a + 1] + k[a + 2] + k[a + 3]) / 3.0).collect()
}

/// Closed loop through `θ ∈ [0, 2π]` with amplitudes `r` and orientation
/// `sign`, as a map to shape space.
fn loop_point(mode: &StrokeMode, centre: &[f64], r: &[f64], sign: f64, theta: f64) -> Vec<f64> {
    match mode {
        StrokeMode::Free => {
            let (c, s) = (theta.cos(), sign * theta.sin());
            centre.iter().zip(r).enumerate().map(|(i, (m, a))| m + a * if i % 2 == 0 { c } else { s }).collect()
        }
        StrokeMode::FixedInitial(x0) => {
            // A teardrop leaving x0 towards `centre` and back; the
            // transverse part vanishes to third order at x0, so the loop
            // never crosses the bounding planes through x0.
            let u = 1.0 - theta.cos();
            let w = 0.5 * sign * theta.sin() * u;
            x0.iter()
                .zip(centre)
                .zip(r)
                .enumerate()
                .map(|(i, ((x, m), a))| {
                    let towards = (m - x).signum();
                    let side = if i % 2 == 0 { 1.0 } else { -1.0 };
                    x + towards * a * (u + side * w) / 3.0
                })
                .collect()
        }
    }
}

fn loop_path(template: &StrokePath, mode: &StrokeMode, centre: &[f64], r: &[f64], sign: f64) -> Result<StrokePath, StrokeError> {
    let period = template.period();
    let q = template.controls();
    let g = greville(template);
    let mut coeffs = Vec::with_capacity(q * template.dim());
    for (a, t) in g.iter().enumerate() {
        let theta = match (mode, a) {
            (StrokeMode::FixedInitial(_), 0) => 0.0,
            (StrokeMode::FixedInitial(_), a) if a + 1 == q => 2.0 * PI,
            _ => 2.0 * PI * t / period,
        };
        coeffs.extend(loop_point(mode, centre, r, sign, theta));
    }
    template.with_coeffs(coeffs)
}

/// Starting stroke. Small loops are tried at a few centres and sizes
/// (through the imposed shape in fixed mode); the one with the least
/// energy per unit displacement is oriented and rescaled towards
/// `setup.target`, using that both grow quadratically with amplitude.
pub fn initial_stroke(functional: &StrokeFunctional, setup: &StrokeSetup) -> Result<StrokePath, StrokeError> {
    let (lo, hi) = &setup.bounds;
    let n = lo.len();
    let (kind, x0) = match &setup.mode {
        StrokeMode::Free => (TimeBasis::Periodic, lo.iter().zip(hi).map(|(l, u)| 0.5 * (l + u)).collect()),
        StrokeMode::FixedInitial(x0) => (TimeBasis::Clamped, x0.clone()),
    };
    let template = StrokePath::constant(kind, setup.controls, setup.period, &x0)?;
    if setup.target == 0.0 {
        return Ok(template);
    }
    // (centre, largest admissible amplitudes)
    let mut shapes: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    match &setup.mode {
        StrokeMode::Free => {
            let fractions = [0.25, 0.5, 0.75];
            for &f1 in &fractions {
                for &f2 in &fractions {
                    let f = [f1, f2];
                    let centre: Vec<f64> = (0..n).map(|i| lo[i] + f[i % 2] * (hi[i] - lo[i])).collect();
                    let room = (0..n).map(|i| 0.95 * (centre[i] - lo[i]).min(hi[i] - centre[i])).collect();
                    shapes.push((centre, room));
                }
            }
        }
        StrokeMode::FixedInitial(x0) => {
            // loop towards the farther side in each variable
            let centre: Vec<f64> = (0..n).map(|i| if x0[i] - lo[i] > hi[i] - x0[i] { lo[i] } else { hi[i] }).collect();
            let room = (0..n).map(|i| 0.95 * (centre[i] - x0[i]).abs()).collect();
            shapes.push((centre, room));
        }
    }
    let mut best: Option<(f64, Vec<f64>, Vec<f64>, f64)> = None;
    for (centre, room) in &shapes {
        for size in [0.3, 0.7] {
            let r: Vec<f64> = room.iter().map(|m| size * m).collect();
            let path = loop_path(&template, &setup.mode, centre, &r, 1.0)?;
            let ev = functional.evaluate(&path, false)?;
            if ev.displacement == 0.0 || !ev.energy.is_finite() {
                continue;
            }
            let score = ev.energy / ev.displacement.abs();
            if best.as_ref().map_or(true, |b| score < b.0) {
                let sign = if ev.displacement * setup.target < 0.0 { -1.0 } else { 1.0 };
                let scale = (setup.target.abs() / ev.displacement.abs()).sqrt().min(1.0 / size);
                let scaled = r.iter().map(|v| v * scale).collect();
                best = Some((score, centre.clone(), scaled, sign));
            }
        }
    }
    let Some((_, centre, r, sign)) = best else {
        return Ok(template);
    };
    loop_path(&template, &setup.mode, &centre, &r, sign)
}

/// Optimal stroke and the solver's account of how it was found.
#[derive(Debug, Clone)]
pub struct StrokeOptimum {
    pub path: StrokePath,
    pub initial: StrokePath,
    pub evaluation: StrokeEvaluation,
    pub lambda: f64,
    pub report: SqpReport,
}

impl StrokeOptimum {
    pub fn converged(&self) -> bool {
        self.report.status == SqpStatus::Converged
    }
}

#[derive(Debug, thiserror::Error)]
pub enum OptimizeError {
    #[error(transparent)]
    Stroke(#[from] StrokeError),
    #[error(transparent)]
    Sqp(#[from] SqpError),
}

/// Minimizes energy at prescribed displacement, starting from
/// [`initial_stroke`] unless `start` is given.
pub fn optimize_stroke(
    functional: &StrokeFunctional,
    setup: &StrokeSetup,
    start: Option<StrokePath>,
    opts: &SqpOptions,
    observer: &mut dyn FnMut(&IterationLog),
) -> Result<StrokeOptimum, OptimizeError> {
    let initial = match start {
        Some(p) => p,
        None if setup.target == 0.0 => {
            // staying put costs nothing, which no other stroke beats
            let path = initial_stroke(functional, setup)?;
            let evaluation = functional.evaluate(&path, false)?;
            let report = SqpReport {
                status: SqpStatus::Converged,
                iterations: 0,
                objective: evaluation.energy,
                constraint: evaluation.displacement,
                stationarity: 0.0,
                feasibility: evaluation.displacement.abs(),
                function_evaluations: 1,
                gradient_evaluations: 0,
                history: Vec::new(),
                min_hessian_eigenvalue: f64::NAN,
            };
            return Ok(StrokeOptimum { initial: path.clone(), path, evaluation, lambda: 0.0, report });
        }
        None => initial_stroke(functional, setup)?,
    };
    let problem = StrokeProblem::new(functional, initial.clone(), setup.target, &setup.bounds);
    let SqpOutcome { x, lambda, report } = sqp::solve_observed(&problem, initial.coeffs(), opts, observer)?;
    let path = problem.path(&x)?;
    let evaluation = functional.evaluate(&path, false)?;
    Ok(StrokeOptimum { path, initial, evaluation, lambda, report })
}
