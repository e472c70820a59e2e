//! Generator curves of axisymmetric swimmers and the two built-in shape
//! families.
//!
//! A swimmer surface is obtained by rotating a meridian curve
//! `X(s) = (x(s), σ(s))`, `s ∈ [0, 1]`, around the x axis. The curve is a
//! cubic spline split into patches, one per rigid or deformable body part.
//! Patches are either arcs that start and end on the axis (spheres, the
//! capped stick) or closed loops off the axis (the donut).

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::bspline::{BasisSet, SplineError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("shape variable {index} = {value} outside [{lo}, {hi}]")]
    OutOfBounds { index: usize, value: f64, lo: f64, hi: f64 },
    #[error("expected {expected} shape variables, got {got}")]
    WrongDimension { expected: usize, got: usize },
    #[error("length scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("donut volume/gap system has no positive root for R1 = {0}")]
    NoDonutRoot(f64),
    #[error("invalid generator curve: {0}")]
    InvalidCurve(String),
    #[error(transparent)]
    Spline(#[from] SplineError),
}

/// Topology of one patch of the generator curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchKind {
    /// Starts and ends on the symmetry axis with a vertical tangent.
    AxisArc,
    /// Closed loop strictly off the axis; first and last control coincide.
    ClosedLoop,
}

/// Spline meridian curve with its patch structure.
#[derive(Debug, Clone)]
pub struct GeneratorCurve {
    basis: Arc<BasisSet>,
    coeffs: Vec<[f64; 2]>,
    kinds: Vec<PatchKind>,
}

impl GeneratorCurve {
    pub fn new(basis: Arc<BasisSet>, coeffs: Vec<[f64; 2]>, kinds: Vec<PatchKind>) -> Result<Self, GeometryError> {
        if coeffs.len() != basis.len() {
            return Err(SplineError::DimensionMismatch { got: coeffs.len(), expected: basis.len() }.into());
        }
        if kinds.len() != basis.patch_count() || basis.is_periodic() {
            return Err(GeometryError::InvalidCurve(format!(
                "{} patch kinds for a basis with {} patches",
                kinds.len(),
                basis.patch_count()
            )));
        }
        Ok(Self { basis, coeffs, kinds })
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn shared_basis(&self) -> &Arc<BasisSet> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[[f64; 2]] {
        &self.coeffs
    }

    pub fn patch_kinds(&self) -> &[PatchKind] {
        &self.kinds
    }

    /// Point (order 0) or derivative with respect to `s`.
    pub fn eval(&self, s: f64, order: usize) -> Result<[f64; 2], SplineError> {
        crate::bspline::eval_curve(&self.coeffs, &self.basis, s, order)
    }

    /// Copy shifted by `dx` along the axis.
    pub fn translated(&self, dx: f64) -> Self {
        let coeffs = self.coeffs.iter().map(|c| [c[0] + dx, c[1]]).collect();
        Self { basis: self.basis.clone(), coeffs, kinds: self.kinds.clone() }
    }

    /// `count` uniformly spaced samples `(s, X(s))` over one patch,
    /// endpoints included.
    pub fn sample_patch(&self, patch: usize, count: usize) -> Vec<(f64, [f64; 2])> {
        let (lo, hi) = self.basis.patch_range(patch);
        let count = count.max(2);
        (0..count)
            .map(|k| {
                let s = lo + (hi - lo) * k as f64 / (count - 1) as f64;
                let span = self.patch_span(patch, s);
                (s, self.basis.eval_span(&span, s).combine(&self.coeffs, 0))
            })
            .collect()
    }

    fn patch_span(&self, patch: usize, s: f64) -> crate::bspline::Span {
        // the right edge of a patch belongs to that patch, not the next one
        let spans = self.basis.patch_spans(patch);
        let idx = spans.partition_point(|sp| sp.start <= s);
        spans[idx.saturating_sub(1)]
    }

    /// Smallest σ over dense samples, the minimum distance to the axis.
    pub fn min_sigma(&self, per_patch: usize) -> f64 {
        (0..self.kinds.len())
            .flat_map(|p| self.sample_patch(p, per_patch))
            .map(|(_, x)| x[1])
            .fold(f64::INFINITY, f64::min)
    }
}

/// One admissible configuration: the curve, the shape fields `ζ_i` and the
/// axis field `e`, all as spline coefficients on the curve's basis.
#[derive(Debug, Clone)]
pub struct Configuration {
    pub curve: GeneratorCurve,
    /// `zeta[i]` is `∂X/∂ξ_i` in mm per unit of `ξ_i`.
    pub zeta: Vec<Vec<[f64; 2]>>,
    /// Unit axial field.
    pub axis: Vec<[f64; 2]>,
}

/// A parametric family `(ξ, φ) ↦ X`.
///
/// `φ` is the rigid axial position in family units; one unit of `φ` moves
/// the swimmer by [`ShapeFamily::displacement_scale`] millimetres.
pub trait ShapeFamily: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;
    /// Admissible box `(ξ_L, ξ_U)`.
    fn bounds(&self) -> (Vec<f64>, Vec<f64>);
    /// a for the three-sphere swimmer, R₀ for the stick and donut.
    fn length_scale(&self) -> f64;
    fn displacement_scale(&self) -> f64;
    fn basis(&self) -> &Arc<BasisSet>;
    fn configure(&self, xi: &[f64], phi: f64) -> Result<Configuration, GeometryError>;

    /// Rejects `ξ` outside the box, allowing a margin of `1e-3` of the box
    /// width so that centred differences at the bounds stay admissible.
    fn check(&self, xi: &[f64]) -> Result<(), GeometryError> {
        let (lo, hi) = self.bounds();
        if xi.len() != lo.len() {
            return Err(GeometryError::WrongDimension { expected: lo.len(), got: xi.len() });
        }
        for (index, ((&v, &l), &u)) in xi.iter().zip(&lo).zip(&hi).enumerate() {
            let slack = 1e-3 * (u - l);
            if !(v >= l - slack && v <= u + slack) {
                return Err(GeometryError::OutOfBounds { index, value: v, lo: l, hi: u });
            }
        }
        Ok(())
    }
}

/// Least-squares projection of sampled patch functions onto a clamped
/// cubic basis, with some controls pinned to samples. Linear in the data,
/// so fitting the ξ-derivative of the samples gives the derivative of the
/// fit.
#[derive(Debug, Clone)]
pub struct PatchFitter {
    n: usize,
    params: Vec<f64>,
    comps: [ComponentFit; 2],
}

#[derive(Debug, Clone)]
struct ComponentFit {
    /// (control index, sample index)
    pins: Vec<(usize, usize)>,
    free: Vec<usize>,
    /// maps residual samples to free controls
    solve: DMatrix<f64>,
    pinned_cols: DMatrix<f64>,
}

impl PatchFitter {
    /// Fitter for `n` controls with `10·n` uniformly spaced samples.
    pub fn new(n: usize, kind: PatchKind) -> Result<Self, GeometryError> {
        let basis = BasisSet::clamped(n, (0.0, 1.0))?;
        let count = 10 * n;
        let params: Vec<f64> = (0..count).map(|k| k as f64 / (count - 1) as f64).collect();
        let mut design = DMatrix::zeros(count, n);
        for (r, &u) in params.iter().enumerate() {
            let v = basis.eval_basis(u, 0)?;
            for c in 0..n {
                design[(r, c)] = v[c];
            }
        }
        let last = count - 1;
        let (px, ps) = match kind {
            PatchKind::AxisArc => (vec![(0, 0), (1, 0), (n - 2, last), (n - 1, last)], vec![(0, 0), (n - 1, last)]),
            PatchKind::ClosedLoop => (vec![(0, 0), (n - 1, 0)], vec![(0, 0), (n - 1, 0)]),
        };
        let comps = [ComponentFit::new(&design, px)?, ComponentFit::new(&design, ps)?];
        Ok(Self { n, params, comps })
    }

    /// Local sample parameters in `[0, 1]`.
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Control points from samples taken at [`PatchFitter::params`].
    pub fn fit(&self, samples: &[[f64; 2]]) -> Vec<[f64; 2]> {
        let cx = self.comps[0].fit(samples, 0, self.n);
        let cs = self.comps[1].fit(samples, 1, self.n);
        cx.into_iter().zip(cs).map(|(x, s)| [x, s]).collect()
    }
}

impl ComponentFit {
    fn new(design: &DMatrix<f64>, pins: Vec<(usize, usize)>) -> Result<Self, GeometryError> {
        let n = design.ncols();
        let free: Vec<usize> = (0..n).filter(|c| !pins.iter().any(|p| p.0 == *c)).collect();
        let bf = design.select_columns(free.iter());
        let pinned_cols = design.select_columns(pins.iter().map(|p| &p.0));
        let normal = bf.transpose() * &bf;
        let chol = normal
            .cholesky()
            .ok_or_else(|| GeometryError::InvalidCurve("singular fit system".into()))?;
        let solve = chol.solve(&bf.transpose());
        Ok(Self { pins, free, solve, pinned_cols })
    }

    fn fit(&self, samples: &[[f64; 2]], comp: usize, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        let pinned = DVector::from_iterator(self.pins.len(), self.pins.iter().map(|p| samples[p.1][comp]));
        for (p, v) in self.pins.iter().zip(pinned.iter()) {
            out[p.0] = *v;
        }
        let y = DVector::from_iterator(samples.len(), samples.iter().map(|s| s[comp]));
        let resid = y - &self.pinned_cols * pinned;
        let free = &self.solve * resid;
        for (c, v) in self.free.iter().zip(free.iter()) {
            out[*c] = *v;
        }
        out
    }
}

fn patch_basis(n: usize, patches: usize) -> Result<Arc<BasisSet>, GeometryError> {
    let breaks: Vec<f64> = (1..patches).map(|p| p as f64 / patches as f64).collect();
    Ok(Arc::new(BasisSet::patched(n, &breaks, (0.0, 1.0))?))
}

/// Single sphere of radius `a` centred at `(center, 0)`, one axis arc.
pub fn sphere(a: f64, center: f64, n_controls: usize) -> Result<GeneratorCurve, GeometryError> {
    if !(a > 0.0) {
        return Err(GeometryError::NonPositiveScale(a));
    }
    let basis = patch_basis(n_controls, 1)?;
    let fitter = PatchFitter::new(n_controls, PatchKind::AxisArc)?;
    let samples: Vec<[f64; 2]> = fitter.params().iter().map(|&u| semicircle(center, a, u)).collect();
    GeneratorCurve::new(basis, fitter.fit(&samples), vec![PatchKind::AxisArc])
}

fn semicircle(center: f64, a: f64, u: f64) -> [f64; 2] {
    [center - a * (PI * u).cos(), a * (PI * u).sin()]
}

/// Three equal spheres on the axis; `ξ` are the surface gaps (mm) between
/// the left and the central sphere and between the central and the right
/// one, `φ` the position of the central centre (mm).
#[derive(Debug, Clone)]
pub struct ThreeSphere {
    a: f64,
    basis: Arc<BasisSet>,
    /// unit-radius sphere at the origin
    unit: Vec<[f64; 2]>,
    n: usize,
}

impl ThreeSphere {
    pub fn new(a: f64, n_controls: usize) -> Result<Self, GeometryError> {
        if !(a > 0.0) {
            return Err(GeometryError::NonPositiveScale(a));
        }
        let unit = sphere(1.0, 0.0, n_controls)?.coeffs().to_vec();
        Ok(Self { a, basis: patch_basis(n_controls, 3)?, unit, n: n_controls })
    }

    pub fn radius(&self) -> f64 {
        self.a
    }

    /// Sphere centres for a given configuration.
    pub fn centers(&self, xi: &[f64], phi: f64) -> [f64; 3] {
        let a = self.a;
        [phi - xi[0] - 2.0 * a, phi, phi + xi[1] + 2.0 * a]
    }

    /// Exact meridian point on patch `p` at local parameter `u`.
    pub fn exact_point(&self, xi: &[f64], phi: f64, patch: usize, u: f64) -> [f64; 2] {
        semicircle(self.centers(xi, phi)[patch], self.a, u)
    }
}

impl ShapeFamily for ThreeSphere {
    fn name(&self) -> &'static str {
        "three_sphere"
    }

    fn dim(&self) -> usize {
        2
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; 2], vec![6.0 * self.a; 2])
    }

    fn length_scale(&self) -> f64 {
        self.a
    }

    fn displacement_scale(&self) -> f64 {
        1.0
    }

    fn basis(&self) -> &Arc<BasisSet> {
        &self.basis
    }

    fn configure(&self, xi: &[f64], phi: f64) -> Result<Configuration, GeometryError> {
        self.check(xi)?;
        let centers = self.centers(xi, phi);
        let mut coeffs = Vec::with_capacity(3 * self.n);
        for c in centers {
            coeffs.extend(self.unit.iter().map(|u| [c + self.a * u[0], self.a * u[1]]));
        }
        let m = coeffs.len();
        let mut z1 = vec![[0.0; 2]; m];
        let mut z2 = vec![[0.0; 2]; m];
        for i in self.basis.patch_indices(0) {
            z1[i] = [-1.0, 0.0];
        }
        for i in self.basis.patch_indices(2) {
            z2[i] = [1.0, 0.0];
        }
        let curve = GeneratorCurve::new(self.basis.clone(), coeffs, vec![PatchKind::AxisArc; 3])?;
        Ok(Configuration { curve, zeta: vec![z1, z2], axis: vec![[1.0, 0.0]; m] })
    }
}

/// Volume of the stick (and of the donut) in units of R₀³.
pub const STICK_VOLUME: f64 = 19.0 * PI / 3.0;
/// Radial gap between the cylinder and the donut, in R₀.
pub const DONUT_GAP: f64 = 1.5;
const STICK_HALF_CYLINDER: f64 = 2.5;
const BODY_LENGTH: f64 = 7.0;

/// Donut section of the stick and donut swimmer, in units of R₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DonutSection {
    /// Axial offset of the section centre from the stick centre.
    pub offset: f64,
    /// Horizontal (axial) semi-axis.
    pub r1: f64,
    /// Vertical (radial) semi-axis.
    pub r2: f64,
    /// Distance of the section centre from the axis.
    pub center: f64,
    /// Derivatives of (offset, r1, r2, center) with respect to ξ₁ and ξ₂.
    pub d_xi: [[f64; 4]; 2],
}

impl DonutSection {
    pub fn new(xi: &[f64]) -> Result<Self, GeometryError> {
        // The donut travels backwards as ξ₁ grows, so that the clockwise
        // square stroke (power phase at ξ₂ = 1) swims towards +x.
        let offset = (0.5 - xi[0]) * 2.0 * STICK_HALF_CYLINDER;
        let d_offset = -2.0 * STICK_HALF_CYLINDER;
        let r1 = STICK_HALF_CYLINDER * (1.0 - xi[1]) + 0.2 * xi[1];
        let d_r1 = 0.2 - STICK_HALF_CYLINDER;
        if !(r1 > 0.0) {
            return Err(GeometryError::NoDonutRoot(r1));
        }
        // 2π² (r2 + 1 + gap) r1 r2 = volume
        let q = STICK_VOLUME / (2.0 * PI * PI * r1);
        let b = 1.0 + DONUT_GAP;
        let r2 = 0.5 * (-b + (b * b + 4.0 * q).sqrt());
        if !(r2 > 0.0) || !r2.is_finite() {
            return Err(GeometryError::NoDonutRoot(r1));
        }
        let dr2_dr1 = -(r2 + b) * r2 / ((2.0 * r2 + b) * r1);
        let d_r2 = dr2_dr1 * d_r1;
        Ok(Self {
            offset,
            r1,
            r2,
            center: r2 + b,
            d_xi: [[d_offset, 0.0, 0.0, 0.0], [0.0, d_r1, d_r2, d_r2]],
        })
    }

    /// Volume by Pappus, in R₀³.
    pub fn volume(&self) -> f64 {
        2.0 * PI * PI * self.center * self.r1 * self.r2
    }
}

/// Capped cylinder ("stick") of radius R₀ and length 7R₀ with an elliptic
/// torus ("donut") around it. `ξ₁` slides the donut along the stick, `ξ₂`
/// changes the aspect of its section at fixed volume and fixed gap.
/// `φ = 1` is one body length.
#[derive(Debug, Clone)]
pub struct StickDonut {
    r0: f64,
    basis: Arc<BasisSet>,
    stick: Vec<[f64; 2]>,
    loop_fit: PatchFitter,
}

impl StickDonut {
    pub fn new(r0: f64, n_controls: usize) -> Result<Self, GeometryError> {
        if !(r0 > 0.0) {
            return Err(GeometryError::NonPositiveScale(r0));
        }
        let arc_fit = PatchFitter::new(n_controls, PatchKind::AxisArc)?;
        let samples: Vec<[f64; 2]> = arc_fit.params().iter().map(|&u| stick_point(u)).collect();
        Ok(Self {
            r0,
            basis: patch_basis(n_controls, 2)?,
            stick: arc_fit.fit(&samples),
            loop_fit: PatchFitter::new(n_controls, PatchKind::ClosedLoop)?,
        })
    }

    pub fn base_radius(&self) -> f64 {
        self.r0
    }

    /// Exact meridian point (mm): patch 0 is the stick, patch 1 the donut.
    pub fn exact_point(&self, xi: &[f64], phi: f64, patch: usize, u: f64) -> Result<[f64; 2], GeometryError> {
        let xs = BODY_LENGTH * phi;
        let p = if patch == 0 {
            let p = stick_point(u);
            [p[0] + xs, p[1]]
        } else {
            let d = DonutSection::new(xi)?;
            let (c, s) = donut_angle(u);
            [xs + d.offset + d.r1 * c, d.center + d.r2 * s]
        };
        Ok([p[0] * self.r0, p[1] * self.r0])
    }
}

/// Stick meridian by arclength, centred at the origin, in R₀.
fn stick_point(u: f64) -> [f64; 2] {
    let cap = 0.5 * PI;
    let len = 2.0 * cap + 2.0 * STICK_HALF_CYLINDER;
    let l = u * len;
    if l <= cap {
        let t = l;
        [-STICK_HALF_CYLINDER - t.cos(), t.sin()]
    } else if l < cap + 2.0 * STICK_HALF_CYLINDER {
        [-STICK_HALF_CYLINDER + (l - cap), 1.0]
    } else {
        let t = l - cap - 2.0 * STICK_HALF_CYLINDER;
        [STICK_HALF_CYLINDER + t.sin(), t.cos()]
    }
}

/// Section angle: start on top, run clockwise so the normal points out.
fn donut_angle(u: f64) -> (f64, f64) {
    let th = 0.5 * PI - 2.0 * PI * u;
    (th.cos(), th.sin())
}

impl ShapeFamily for StickDonut {
    fn name(&self) -> &'static str {
        "stick_donut"
    }

    fn dim(&self) -> usize {
        2
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; 2], vec![1.0; 2])
    }

    fn length_scale(&self) -> f64 {
        self.r0
    }

    fn displacement_scale(&self) -> f64 {
        BODY_LENGTH * self.r0
    }

    fn basis(&self) -> &Arc<BasisSet> {
        &self.basis
    }

    fn configure(&self, xi: &[f64], phi: f64) -> Result<Configuration, GeometryError> {
        self.check(xi)?;
        let r0 = self.r0;
        let xs = BODY_LENGTH * phi;
        let d = DonutSection::new(xi)?;
        let n = self.stick.len();
        let params = self.loop_fit.params();
        let mut pts = Vec::with_capacity(params.len());
        let mut dpts = [Vec::with_capacity(params.len()), Vec::with_capacity(params.len())];
        for &u in params {
            let (c, s) = donut_angle(u);
            pts.push([(xs + d.offset + d.r1 * c) * r0, (d.center + d.r2 * s) * r0]);
            for (i, dd) in d.d_xi.iter().enumerate() {
                dpts[i].push([(dd[0] + dd[1] * c) * r0, (dd[3] + dd[2] * s) * r0]);
            }
        }
        let mut coeffs: Vec<[f64; 2]> = self.stick.iter().map(|c| [(c[0] + xs) * r0, c[1] * r0]).collect();
        coeffs.extend(self.loop_fit.fit(&pts));
        let zeta = dpts
            .iter()
            .map(|dp| {
                let mut z = vec![[0.0; 2]; n];
                z.extend(self.loop_fit.fit(dp));
                z
            })
            .collect();
        let m = coeffs.len();
        let curve = GeneratorCurve::new(self.basis.clone(), coeffs, vec![PatchKind::AxisArc, PatchKind::ClosedLoop])?;
        Ok(Configuration { curve, zeta, axis: vec![[1.0, 0.0]; m] })
    }
}

/// Base radius R₀ of the stick and donut swimmer whose total volume (stick
/// plus donut, each `19πR₀³/3`) equals that of three spheres of radius `a`.
pub fn equivalent_radius(a: f64) -> f64 {
    let three_spheres = 4.0 * PI * a.powi(3);
    (three_spheres / (2.0 * STICK_VOLUME)).cbrt()
}
