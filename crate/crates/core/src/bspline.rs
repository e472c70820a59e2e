//! Cubic B-spline bases.
//!
//! One [`BasisSet`] type covers the three layouts used by the solver:
//!
//! * open (clamped) knots on a parameter interval, optionally split into
//!   patches by interior break points of full multiplicity, so that the
//!   space is discontinuous across patches while keeping a single global
//!   coefficient index;
//! * clamped knots without breaks (time paths with pinned endpoints);
//! * periodic knots, wrapped so that every basis function is C² across the
//!   seam of the period.
//!
//! Knots are uniform inside each patch.

use thiserror::Error;

/// Polynomial degree of every basis in this crate.
pub const DEGREE: usize = 3;
const ORDER: usize = DEGREE + 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplineError {
    #[error("a cubic patch needs at least {min} control points, got {got}")]
    TooFewControls { got: usize, min: usize },
    #[error("patch breaks must be strictly increasing inside the open domain ({lo}, {hi})")]
    BadBreaks { lo: f64, hi: f64 },
    #[error("periodic bases cannot carry patch breaks")]
    PeriodicWithBreaks,
    #[error("parameter {param} outside the basis domain [{lo}, {hi}]")]
    OutOfDomain { param: f64, lo: f64, hi: f64 },
    #[error("derivative order {0} not supported (0, 1 or 2)")]
    DerivativeOrder(usize),
    #[error("coefficient count {got} does not match basis size {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("domain [{lo}, {hi}] is empty")]
    EmptyDomain { lo: f64, hi: f64 },
}

/// One non-degenerate knot span, the unit of quadrature (a "panel").
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Span {
    /// Index into the (possibly extended) knot vector with
    /// `knots[knot] <= t < knots[knot + 1]`.
    pub knot: usize,
    pub start: f64,
    pub end: f64,
    pub patch: usize,
    /// Position of the span inside its patch.
    pub local: usize,
}

impl Span {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.len() <= 0.0
    }

    /// Maps a unit coordinate in `[0, 1]` to the span.
    pub fn at(&self, unit: f64) -> f64 {
        self.start + unit * (self.end - self.start)
    }
}

/// Values of the four basis functions that are nonzero on a span, together
/// with their first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalBasis {
    pub indices: [usize; ORDER],
    /// `ders[k][r]` is the k-th derivative of basis `indices[r]`.
    pub ders: [[f64; ORDER]; 3],
}

impl LocalBasis {
    pub fn values(&self) -> &[f64; ORDER] {
        &self.ders[0]
    }

    /// Linear combination of 2-vector coefficients.
    pub fn combine(&self, coeffs: &[[f64; 2]], order: usize) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (r, &i) in self.indices.iter().enumerate() {
            let w = self.ders[order][r];
            out[0] += w * coeffs[i][0];
            out[1] += w * coeffs[i][1];
        }
        out
    }

    /// Linear combination of scalar coefficients taken with a stride, i.e.
    /// `sum_r ders[order][r] * coeffs[indices[r] * stride + offset]`.
    pub fn combine_strided(&self, coeffs: &[f64], stride: usize, offset: usize, order: usize) -> f64 {
        self.indices
            .iter()
            .enumerate()
            .map(|(r, &i)| self.ders[order][r] * coeffs[i * stride + offset])
            .sum()
    }
}

/// Cubic spline basis with uniform knots per patch.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    knots: Vec<f64>,
    domain: (f64, f64),
    periodic: bool,
    len: usize,
    controls_per_patch: usize,
    breaks: Vec<f64>,
    spans: Vec<Span>,
}

/// Builds a cubic basis on `[0, 1]`.
///
/// With `periodic = false`, each of the `breaks.len() + 1` patches gets
/// `n_controls_per_patch` functions and the patches are fully decoupled.
/// With `periodic = true` the result has exactly `n_controls_per_patch`
/// functions wrapped around the unit period.
pub fn build_basis(
    n_controls_per_patch: usize,
    patch_breaks: &[f64],
    periodic: bool,
) -> Result<BasisSet, SplineError> {
    if periodic {
        if !patch_breaks.is_empty() {
            return Err(SplineError::PeriodicWithBreaks);
        }
        BasisSet::periodic(n_controls_per_patch, (0.0, 1.0))
    } else {
        BasisSet::patched(n_controls_per_patch, patch_breaks, (0.0, 1.0))
    }
}

impl BasisSet {
    /// Open knots on `domain`, one clamped cubic patch per interval between
    /// consecutive breaks.
    pub fn patched(
        n_controls_per_patch: usize,
        breaks: &[f64],
        domain: (f64, f64),
    ) -> Result<Self, SplineError> {
        let (lo, hi) = domain;
        if !(hi > lo) {
            return Err(SplineError::EmptyDomain { lo, hi });
        }
        if n_controls_per_patch < ORDER {
            return Err(SplineError::TooFewControls { got: n_controls_per_patch, min: ORDER });
        }
        let mut edges = Vec::with_capacity(breaks.len() + 2);
        edges.push(lo);
        for &b in breaks {
            let last = *edges.last().unwrap();
            if !(b > last && b < hi) {
                return Err(SplineError::BadBreaks { lo, hi });
            }
            edges.push(b);
        }
        edges.push(hi);

        let n_spans = n_controls_per_patch - DEGREE;
        // Breaks carry multiplicity ORDER, so each patch owns exactly
        // n_controls_per_patch functions and nothing couples across a break.
        let mut knots = vec![lo; ORDER];
        let mut spans = Vec::new();
        for (patch, w) in edges.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            for j in 1..n_spans {
                knots.push(a + (b - a) * j as f64 / n_spans as f64);
            }
            knots.extend_from_slice(&[b; ORDER]);
            let base = patch * n_controls_per_patch + DEGREE;
            for j in 0..n_spans {
                let knot = base + j;
                spans.push(Span { knot, start: knots[knot], end: knots[knot + 1], patch, local: j });
            }
        }
        let len = knots.len() - ORDER;
        Ok(Self {
            knots,
            domain,
            periodic: false,
            len,
            controls_per_patch: n_controls_per_patch,
            breaks: breaks.to_vec(),
            spans,
        })
    }

    /// Clamped cubic basis without breaks; the first and last functions
    /// interpolate the endpoints.
    pub fn clamped(n_controls: usize, domain: (f64, f64)) -> Result<Self, SplineError> {
        Self::patched(n_controls, &[], domain)
    }

    /// Periodic cubic basis with `n_controls` functions on `domain`.
    pub fn periodic(n_controls: usize, domain: (f64, f64)) -> Result<Self, SplineError> {
        let (lo, hi) = domain;
        if !(hi > lo) {
            return Err(SplineError::EmptyDomain { lo, hi });
        }
        if n_controls < ORDER {
            return Err(SplineError::TooFewControls { got: n_controls, min: ORDER });
        }
        let h = (hi - lo) / n_controls as f64;
        // t_{-3} .. t_{Q+3}
        let knots: Vec<f64> = (0..n_controls + 2 * DEGREE + 1)
            .map(|j| lo + (j as f64 - DEGREE as f64) * h)
            .collect();
        let spans = (0..n_controls)
            .map(|j| {
                let knot = j + DEGREE;
                let end = if j + 1 == n_controls { hi } else { knots[knot + 1] };
                Span { knot, start: knots[knot], end, patch: 0, local: j }
            })
            .collect();
        Ok(Self {
            knots,
            domain,
            periodic: true,
            len: n_controls,
            controls_per_patch: n_controls,
            breaks: Vec::new(),
            spans,
        })
    }

    /// Number of basis functions `M`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn degree(&self) -> usize {
        DEGREE
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn controls_per_patch(&self) -> usize {
        self.controls_per_patch
    }

    pub fn patch_count(&self) -> usize {
        self.breaks.len() + 1
    }

    /// Parameter interval of a patch.
    pub fn patch_range(&self, patch: usize) -> (f64, f64) {
        let lo = if patch == 0 { self.domain.0 } else { self.breaks[patch - 1] };
        let hi = if patch == self.breaks.len() { self.domain.1 } else { self.breaks[patch] };
        (lo, hi)
    }

    /// Global indices of the basis functions belonging to a patch.
    pub fn patch_indices(&self, patch: usize) -> std::ops::Range<usize> {
        if self.periodic {
            0..self.len
        } else {
            let n = self.controls_per_patch;
            patch * n..(patch + 1) * n
        }
    }

    /// Patch owning a global basis index.
    pub fn patch_of_index(&self, index: usize) -> usize {
        if self.periodic {
            0
        } else {
            index / self.controls_per_patch
        }
    }

    /// Non-degenerate knot spans in parameter order.
    pub fn spans(&self) -> &[Span] {
        &self.spans
    }

    /// Spans of one patch.
    pub fn patch_spans(&self, patch: usize) -> &[Span] {
        let per = self.spans.len() / self.patch_count();
        &self.spans[patch * per..(patch + 1) * per]
    }

    /// Span containing `param`. Interior break points belong to the patch on
    /// their right; the right end of the domain belongs to the last span.
    pub fn find_span(&self, param: f64) -> Result<&Span, SplineError> {
        let (lo, hi) = self.domain;
        if !(param >= lo && param <= hi) {
            return Err(SplineError::OutOfDomain { param, lo, hi });
        }
        let idx = self.spans.partition_point(|s| s.start <= param);
        Ok(&self.spans[idx.saturating_sub(1)])
    }

    /// Basis values and derivatives (orders 0..=2) on a known span.
    /// `param` may sit anywhere in the closed span.
    pub fn eval_span(&self, span: &Span, param: f64) -> LocalBasis {
        let ders = ders_basis(&self.knots, span.knot, param);
        let mut indices = [0usize; ORDER];
        for (r, idx) in indices.iter_mut().enumerate() {
            let e = span.knot - DEGREE + r;
            *idx = if self.periodic { e % self.len } else { e };
        }
        LocalBasis { indices, ders }
    }

    /// Locates the span of `param` and evaluates the local basis there.
    pub fn eval_local(&self, param: f64) -> Result<LocalBasis, SplineError> {
        let span = *self.find_span(param)?;
        Ok(self.eval_span(&span, param))
    }

    /// Dense vector of all `M` basis values (or derivatives) at `param`.
    pub fn eval_basis(&self, param: f64, derivative_order: usize) -> Result<Vec<f64>, SplineError> {
        if derivative_order > 2 {
            return Err(SplineError::DerivativeOrder(derivative_order));
        }
        let local = self.eval_local(param)?;
        let mut out = vec![0.0; self.len];
        for (r, &i) in local.indices.iter().enumerate() {
            out[i] += local.ders[derivative_order][r];
        }
        Ok(out)
    }
}

/// Evaluates a planar spline curve (or one of its first two derivatives).
pub fn eval_curve(
    coeffs: &[[f64; 2]],
    basis: &BasisSet,
    param: f64,
    derivative_order: usize,
) -> Result<[f64; 2], SplineError> {
    if coeffs.len() != basis.len() {
        return Err(SplineError::DimensionMismatch { got: coeffs.len(), expected: basis.len() });
    }
    if derivative_order > 2 {
        return Err(SplineError::DerivativeOrder(derivative_order));
    }
    Ok(basis.eval_local(param)?.combine(coeffs, derivative_order))
}

/// Basis functions and derivatives of a cubic B-spline (Cox–de Boor with the
/// triangular derivative table).
fn ders_basis(knots: &[f64], span: usize, u: f64) -> [[f64; ORDER]; 3] {
    const P: usize = DEGREE;
    const N: usize = 2;
    let mut ndu = [[0.0f64; ORDER]; ORDER];
    let mut left = [0.0f64; ORDER];
    let mut right = [0.0f64; ORDER];
    ndu[0][0] = 1.0;
    for j in 1..=P {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }

    let mut ders = [[0.0f64; ORDER]; 3];
    for j in 0..=P {
        ders[0][j] = ndu[j][P];
    }
    let mut a = [[0.0f64; ORDER]; 2];
    for r in 0..=P {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..=N {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = P - k;
            if r >= k {
                let rk = rk as usize;
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                d = a[s2][0] * ndu[rk][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { P - r };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut factor = P as f64;
    for (k, row) in ders.iter_mut().enumerate().skip(1) {
        for v in row.iter_mut() {
            *v *= factor;
        }
        factor *= (P - k) as f64;
    }
    ders
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_patch_space_has_45_functions() {
        let b = build_basis(15, &[1.0 / 3.0, 2.0 / 3.0], false).unwrap();
        assert_eq!(b.len(), 45);
        assert_eq!(b.patch_count(), 3);
        assert_eq!(b.spans().len(), 36);
        assert_eq!(b.patch_indices(1), 15..30);
    }

    #[test]
    fn single_bezier_patch() {
        let b = build_basis(4, &[], false).unwrap();
        assert_eq!(b.len(), 4);
        for k in 0..=20 {
            let s = k as f64 / 20.0;
            let v = b.eval_basis(s, 0).unwrap();
            // Bernstein polynomials of degree 3
            let bern = [(1.0 - s).powi(3), 3.0 * s * (1.0 - s).powi(2), 3.0 * s * s * (1.0 - s), s.powi(3)];
            for (x, y) in v.iter().zip(bern) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn periodic_seam_matches() {
        let b = BasisSet::periodic(15, (0.0, 2.0)).unwrap();
        assert_eq!(b.len(), 15);
        for order in 0..=2 {
            let v0 = b.eval_basis(0.0, order).unwrap();
            let v1 = b.eval_basis(2.0, order).unwrap();
            for (x, y) in v0.iter().zip(&v1) {
                assert!((x - y).abs() < 1e-12, "order {order}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn uniform_knot_values() {
        // Hand oracle: the uniform cubic B-spline takes 1/6, 2/3, 1/6 at a knot.
        let b = BasisSet::periodic(8, (0.0, 8.0)).unwrap();
        let mut v = b.eval_basis(3.0, 0).unwrap();
        v.retain(|x| x.abs() > 1e-15);
        assert_eq!(v.len(), 3);
        let expect = [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0];
        for (x, y) in v.iter().zip(expect) {
            assert!((x - y).abs() < 1e-15);
        }
        let open = build_basis(10, &[], false).unwrap();
        let mut v = open.eval_basis(4.0 / 7.0, 0).unwrap();
        v.retain(|x| x.abs() > 1e-15);
        for (x, y) in v.iter().zip(expect) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(build_basis(3, &[], false), Err(SplineError::TooFewControls { .. })));
        assert!(matches!(build_basis(6, &[0.6, 0.4], false), Err(SplineError::BadBreaks { .. })));
        assert!(matches!(build_basis(6, &[1.0], false), Err(SplineError::BadBreaks { .. })));
        let b = build_basis(6, &[], false).unwrap();
        assert!(matches!(b.eval_basis(1.5, 0), Err(SplineError::OutOfDomain { .. })));
        assert!(matches!(b.eval_basis(0.5, 3), Err(SplineError::DerivativeOrder(3))));
        assert!(eval_curve(&[[0.0; 2]; 3], &b, 0.5, 0).is_err());
    }

    #[test]
    fn patch_indicator_is_representable() {
        let b = build_basis(6, &[0.5], false).unwrap();
        let coeffs: Vec<[f64; 2]> = (0..b.len()).map(|i| if b.patch_of_index(i) == 0 { [1.0, 0.0] } else { [0.0, 0.0] }).collect();
        for k in 0..50 {
            let s = k as f64 / 50.0;
            let v = eval_curve(&coeffs, &b, s, 0).unwrap()[0];
            let expect = if s < 0.5 { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn reproduces_cubics() {
        // Interpolate a cubic at the Greville abscissae; clamped cubic splines
        // contain all cubics, so interpolation must be exact.
        let b = build_basis(9, &[], false).unwrap();
        let f = |s: f64| 1.0 - 2.0 * s + 3.0 * s * s - 0.5 * s.powi(3);
        let knots = b.knots();
        let n = b.len();
        let greville: Vec<f64> = (0..n).map(|i| (knots[i + 1] + knots[i + 2] + knots[i + 3]) / 3.0).collect();
        let mut mat = nalgebra::DMatrix::zeros(n, n);
        for (r, &g) in greville.iter().enumerate() {
            let v = b.eval_basis(g, 0).unwrap();
            for c in 0..n {
                mat[(r, c)] = v[c];
            }
        }
        let rhs = nalgebra::DVector::from_iterator(n, greville.iter().map(|&g| f(g)));
        let c = mat.lu().solve(&rhs).unwrap();
        let coeffs: Vec<[f64; 2]> = c.iter().map(|&v| [v, 0.0]).collect();
        for k in 0..=40 {
            let s = k as f64 / 40.0;
            let v = eval_curve(&coeffs, &b, s, 0).unwrap()[0];
            assert!((v - f(s)).abs() < 1e-13);
            let d = eval_curve(&coeffs, &b, s, 1).unwrap()[0];
            assert!((d - (-2.0 + 6.0 * s - 1.5 * s * s)).abs() < 1e-11);
        }
    }

    #[test]
    fn constants_have_zero_tangent() {
        let b = build_basis(15, &[1.0 / 3.0, 2.0 / 3.0], false).unwrap();
        let coeffs = vec![[0.7, -1.2]; b.len()];
        for k in 0..=30 {
            let s = k as f64 / 30.0;
            let p = eval_curve(&coeffs, &b, s, 0).unwrap();
            let t = eval_curve(&coeffs, &b, s, 1).unwrap();
            assert!((p[0] - 0.7).abs() < 1e-14 && (p[1] + 1.2).abs() < 1e-14);
            assert!(t[0].abs() < 1e-11 && t[1].abs() < 1e-11);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn partition_of_unity(s in 0.0f64..=1.0) {
            let b = build_basis(15, &[], false).unwrap();
            let v: f64 = b.eval_basis(s, 0).unwrap().iter().sum();
            let d: f64 = b.eval_basis(s, 1).unwrap().iter().sum();
            let dd: f64 = b.eval_basis(s, 2).unwrap().iter().sum();
            prop_assert!((v - 1.0).abs() < 1e-12);
            prop_assert!(d.abs() < 1e-12 * 100.0);
            prop_assert!(dd.abs() < 1e-9);
        }

        #[test]
        fn periodic_partition_of_unity(t in 0.0f64..=3.0) {
            let b = BasisSet::periodic(11, (0.0, 3.0)).unwrap();
            let v: f64 = b.eval_basis(t, 0).unwrap().iter().sum();
            let d: f64 = b.eval_basis(t, 1).unwrap().iter().sum();
            prop_assert!((v - 1.0).abs() < 1e-12);
            prop_assert!(d.abs() < 1e-11);
        }
    }
}
