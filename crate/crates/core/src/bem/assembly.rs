use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::kernel::{ring_parameter, ring_tensor, ring_tensor_log};
use super::{BemError, BoundaryOperator};
use crate::bspline::{LocalBasis, Span};
use crate::geometry::{GeneratorCurve, PatchKind};
use crate::quadrature::{gauss_legendre, gauss_log, Rule};

/// Quadrature orders used by [`assemble_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AssemblyOptions {
    /// Gauss points per panel, outer and inner.
    pub gauss_points: usize,
    /// Points of the logarithmic rule on each side of a self point.
    pub log_points: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self { gauss_points: 8, log_points: 8 }
    }
}

/// Assembles the operator with the default 8-point rules.
pub fn assemble(curve: &GeneratorCurve, eta: f64) -> Result<BoundaryOperator, BemError> {
    assemble_with(curve, eta, AssemblyOptions::default(), None)
}

/// Reuses the diagonal (patch with itself) blocks of patches that are rigid
/// translates of previously assembled ones.
///
/// Two patches match when their control points agree up to an axial shift
/// to about 12 significant digits. Off-diagonal blocks are never cached.
#[derive(Debug)]
pub struct OperatorCache {
    capacity: usize,
    entries: Mutex<Vec<(PatchKey, Arc<PatchBlock>)>>,
}

impl OperatorCache {
    pub fn new(capacity: usize) -> Self {
        Self { capacity: capacity.max(1), entries: Mutex::new(Vec::new()) }
    }

    fn get(&self, key: &PatchKey) -> Option<Arc<PatchBlock>> {
        let mut entries = self.entries.lock().unwrap_or_else(|e| e.into_inner());
        let pos = entries.iter().position(|(k, _)| k == key)?;
        let hit = entries.remove(pos);
        let block = hit.1.clone();
        entries.push(hit);
        Some(block)
    }

    fn insert(&self, key: PatchKey, block: Arc<PatchBlock>) {
        let mut entries = self.entries.lock().unwrap_or_else(|e| e.into_inner());
        if entries.iter().any(|(k, _)| *k == key) {
            return;
        }
        if entries.len() >= self.capacity {
            entries.remove(0);
        }
        entries.push((key, block));
    }

    /// Number of cached patch blocks.
    pub fn len(&self) -> usize {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for OperatorCache {
    fn default() -> Self {
        Self::new(8)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct PatchKey {
    kind: PatchKind,
    opts: AssemblyOptions,
    scale: i64,
    coords: Vec<i64>,
}

impl PatchKey {
    fn new(kind: PatchKind, opts: AssemblyOptions, coeffs: &[[f64; 2]]) -> Self {
        let x0 = coeffs[0][0];
        let scale = coeffs.iter().map(|c| (c[0] - x0).abs().max(c[1].abs())).fold(0.0, f64::max);
        let q = |v: f64| (v / scale * 1e12).round() as i64;
        let coords = coeffs.iter().flat_map(|c| [q(c[0] - x0), q(c[1])]).collect();
        Self { kind, opts, scale: (scale.ln() * 1e12).round() as i64, coords }
    }
}

/// Self-interaction of one patch, in patch-local dof numbering, without the
/// viscosity factor.
#[derive(Debug)]
struct PatchBlock {
    single_layer: DMatrix<f64>,
    mass: DMatrix<f64>,
    normal_load: DVector<f64>,
    asymmetry: f64,
}

struct Rules {
    gauss: Rule,
    log: Rule,
}

fn rules(opts: AssemblyOptions) -> Rules {
    static DEFAULT: OnceLock<(Rule, Rule)> = OnceLock::new();
    if opts == AssemblyOptions::default() {
        let (g, l) = DEFAULT.get_or_init(|| (gauss_legendre(8), gauss_log(8)));
        Rules { gauss: g.clone(), log: l.clone() }
    } else {
        Rules { gauss: gauss_legendre(opts.gauss_points), log: gauss_log(opts.log_points) }
    }
}

/// Curve data at one parameter value. Basis indices are patch-local.
#[derive(Clone, Copy)]
struct Node {
    s: f64,
    x: f64,
    sigma: f64,
    /// `σ·J`, the meridian measure without the 2π.
    measure: f64,
    tangent: [f64; 2],
    basis: LocalBasis,
}

/// Parametric view of one patch.
struct PatchView<'a> {
    curve: &'a GeneratorCurve,
    first_dof: usize,
    n: usize,
}

impl PatchView<'_> {
    fn node(&self, span: &Span, s: f64) -> Node {
        let mut basis = self.curve.basis().eval_span(span, s);
        let p = basis.combine(self.curve.coeffs(), 0);
        let t = basis.combine(self.curve.coeffs(), 1);
        for i in basis.indices.iter_mut() {
            *i -= self.first_dof;
        }
        let jac = t[0].hypot(t[1]);
        Node { s, x: p[0], sigma: p[1], measure: p[1] * jac, tangent: t, basis }
    }
}

/// Panel with its precomputed Gauss nodes and weights (scaled to the span).
struct Panel {
    span: Span,
    nodes: Vec<Node>,
    weights: Vec<f64>,
    /// Panels of the same patch sharing its left and right endpoint.
    left: Option<usize>,
    right: Option<usize>,
    /// Nodes graded towards the axis, for panels ending on it.
    graded: Option<(Vec<Node>, Vec<f64>)>,
}

/// Levels of the graded rule on a panel ending on the axis; the smallest
/// subinterval is `2^-GRADED_LEVELS` of the panel.
const GRADED_LEVELS: i32 = 6;

/// Assembles `A` (single layer) and `M` (mass) on the curve's spline space.
///
/// Every pair of panels is integrated with tensor Gauss rules, except
/// * the diagonal pair, where the inner integral is split at the outer
///   node and the logarithmic part of the kernel goes to a Gauss–Log rule;
/// * pairs of adjacent panels of one patch, where the inner rule is graded
///   geometrically towards the shared endpoint.
///
/// The choice depends only on the parametric layout, so the matrices are
/// smooth functions of the control points.
pub fn assemble_with(
    curve: &GeneratorCurve,
    eta: f64,
    opts: AssemblyOptions,
    cache: Option<&OperatorCache>,
) -> Result<BoundaryOperator, BemError> {
    if !(eta > 0.0) {
        return Err(BemError::NonPositiveViscosity(eta));
    }
    let rules = rules(opts);
    let basis = curve.basis();
    let dim = 2 * basis.len();
    let npatch = curve.patch_kinds().len();
    let views: Vec<PatchView> = (0..npatch)
        .map(|p| {
            let r = basis.patch_indices(p);
            PatchView { curve, first_dof: r.start, n: r.len() }
        })
        .collect();
    let panels = (0..npatch).map(|p| build_panels(&views[p], p, &rules.gauss)).collect::<Result<Vec<_>, _>>()?;

    let mut blocks: Vec<Arc<PatchBlock>> = Vec::with_capacity(npatch);
    for p in 0..npatch {
        let kind = curve.patch_kinds()[p];
        let range = basis.patch_indices(p);
        let key = PatchKey::new(kind, opts, &curve.coeffs()[range]);
        let local_hit = (0..p).find(|&q| {
            curve.patch_kinds()[q] == kind && PatchKey::new(kind, opts, &curve.coeffs()[basis.patch_indices(q)]) == key
        });
        let block = match (local_hit, cache.and_then(|c| c.get(&key))) {
            (Some(q), _) => blocks[q].clone(),
            (None, Some(b)) => b,
            (None, None) => {
                let b = Arc::new(patch_block(&views[p], &panels[p], &rules));
                if let Some(c) = cache {
                    c.insert(key, b.clone());
                }
                b
            }
        };
        blocks.push(block);
    }

    let scale = 2.0 * PI / (8.0 * PI * eta);
    let mut a = DMatrix::zeros(dim, dim);
    let mut mass = DMatrix::zeros(dim, dim);
    let mut loads = Vec::with_capacity(npatch);
    let mut asymmetry = 0.0f64;
    for (p, block) in blocks.iter().enumerate() {
        let o = 2 * views[p].first_dof;
        let w = 2 * views[p].n;
        a.view_mut((o, o), (w, w)).copy_from(&(&block.single_layer * scale));
        mass.view_mut((o, o), (w, w)).copy_from(&block.mass);
        let mut load = DVector::zeros(dim);
        load.rows_mut(o, w).copy_from(&block.normal_load);
        loads.push(load);
        asymmetry = asymmetry.max(block.asymmetry);
    }
    let pairs: Vec<(usize, usize)> = (0..npatch).flat_map(|p| (p + 1..npatch).map(move |q| (p, q))).collect();
    let cross: Vec<DMatrix<f64>> = pairs
        .par_iter()
        .map(|&(p, q)| cross_block(&panels[p], &panels[q], 2 * views[p].n, 2 * views[q].n))
        .collect();
    for (&(p, q), block) in pairs.iter().zip(&cross) {
        let (op, oq) = (2 * views[p].first_dof, 2 * views[q].first_dof);
        let scaled = block * scale;
        a.view_mut((op, oq), scaled.shape()).copy_from(&scaled);
        a.view_mut((oq, op), (scaled.ncols(), scaled.nrows())).copy_from(&scaled.transpose());
    }
    BoundaryOperator::from_parts(a, mass, loads, eta, asymmetry)
}

fn build_panels(view: &PatchView, patch: usize, gauss: &Rule) -> Result<Vec<Panel>, BemError> {
    let kind = view.curve.patch_kinds()[patch];
    let spans = view.curve.basis().patch_spans(patch);
    let n = spans.len();
    if kind == PatchKind::ClosedLoop && n < 3 {
        return Err(BemError::TooFewPanels(patch));
    }
    let closed = kind == PatchKind::ClosedLoop;
    let mut panels = Vec::with_capacity(n);
    for (k, span) in spans.iter().enumerate() {
        let h = span.len();
        let mut nodes = Vec::with_capacity(gauss.len());
        let mut weights = Vec::with_capacity(gauss.len());
        for (x, w) in gauss.iter() {
            let node = view.node(span, span.at(x));
            if !(node.sigma > 0.0) {
                return Err(BemError::DegeneratePanel { patch, panel: k, reason: "curve touches the axis inside the panel" });
            }
            if !(node.measure > 1e-14 * node.sigma) {
                return Err(BemError::DegeneratePanel { patch, panel: k, reason: "vanishing Jacobian" });
            }
            nodes.push(node);
            weights.push(w * h);
        }
        let left = if k > 0 { Some(k - 1) } else if closed { Some(n - 1) } else { None };
        let right = if k + 1 < n { Some(k + 1) } else if closed { Some(0) } else { None };
        let graded = match (closed, k == 0, k + 1 == n) {
            (false, true, _) => Some(graded_nodes(view, span, true, gauss)),
            (false, _, true) => Some(graded_nodes(view, span, false, gauss)),
            _ => None,
        };
        panels.push(Panel { span: *span, nodes, weights, left, right, graded });
    }
    Ok(panels)
}

/// Composite rule on `span` with subintervals halving towards its start
/// (`at_start`) or end.
fn graded_nodes(view: &PatchView, span: &Span, at_start: bool, gauss: &Rule) -> (Vec<Node>, Vec<f64>) {
    let h = span.len();
    let mut breaks = vec![0.0];
    breaks.extend((0..GRADED_LEVELS).rev().map(|l| h * 0.5f64.powi(l + 1)));
    breaks.push(h);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for w in breaks.windows(2) {
        let len = w[1] - w[0];
        for (x, wt) in gauss.iter() {
            let tau = w[0] + len * x;
            let s = if at_start { span.start + tau } else { span.end - tau };
            nodes.push(view.node(span, s));
            weights.push(wt * len);
        }
    }
    (nodes, weights)
}

/// Row accumulator for one outer node: `row[a][2j + b] = Σ w σJ S_ab ψ_j`.
struct KernelRow {
    cols: usize,
    data: Vec<f64>,
}

impl KernelRow {
    fn new(cols: usize) -> Self {
        Self { cols, data: vec![0.0; 2 * cols] }
    }

    fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn add(&mut self, t: &[[f64; 2]; 2], weight: f64, basis: &LocalBasis) {
        let (r0, r1) = self.data.split_at_mut(self.cols);
        for (&j, &v) in basis.indices.iter().zip(basis.values()) {
            let c = weight * v;
            let col = 2 * j;
            r0[col] += c * t[0][0];
            r0[col + 1] += c * t[0][1];
            r1[col] += c * t[1][0];
            r1[col + 1] += c * t[1][1];
        }
    }

    #[inline]
    fn add_node(&mut self, q: &Node, s: &Node, weight: f64) {
        let t = ring_tensor(s.x - q.x, q.sigma, s.sigma);
        self.add(&t, weight * s.measure, &s.basis);
    }

    /// `block[2i + a][..] += weight·ψ_i(q)·row[a][..]` for the outer basis.
    fn scatter(&self, q: &Node, weight: f64, block: &mut DMatrix<f64>) {
        for (&i, &v) in q.basis.indices.iter().zip(q.basis.values()) {
            let c = weight * v;
            for a in 0..2 {
                let r = 2 * i + a;
                for (col, s) in self.data[a * self.cols..(a + 1) * self.cols].iter().enumerate() {
                    block[(r, col)] += c * s;
                }
            }
        }
    }
}

fn patch_block(view: &PatchView, panels: &[Panel], rules: &Rules) -> PatchBlock {
    let w = 2 * view.n;
    let parts: Vec<DMatrix<f64>> = (0..panels.len())
        .into_par_iter()
        .map(|p| {
            let mut block = DMatrix::zeros(w, w);
            let mut row = KernelRow::new(w);
            let panel = &panels[p];
            for (q, &wq) in panel.nodes.iter().zip(&panel.weights) {
                row.clear();
                for (k, other) in panels.iter().enumerate() {
                    if k == p || Some(k) == panel.left || Some(k) == panel.right {
                        continue;
                    }
                    for (s, &ws) in other.nodes.iter().zip(&other.weights) {
                        row.add_node(q, s, ws);
                    }
                }
                self_panel(view, panel, q, rules, &mut row);
                if let Some(l) = panel.left {
                    neighbour(view, &panels[l], q, q.s - panel.span.start, false, &rules.gauss, &mut row);
                }
                if let Some(r) = panel.right {
                    neighbour(view, &panels[r], q, panel.span.end - q.s, true, &rules.gauss, &mut row);
                }
                row.scatter(q, wq * q.measure, &mut block);
            }
            block
        })
        .collect();
    let mut raw = DMatrix::zeros(w, w);
    for part in parts {
        raw += part;
    }
    let amax = raw.amax();
    let asymmetry = if amax > 0.0 { (&raw - raw.transpose()).amax() / amax } else { 0.0 };
    let single_layer = (&raw + raw.transpose()) * 0.5;
    let (mass, normal_load) = mass_and_normal(panels, view.n);
    PatchBlock { single_layer, mass, normal_load, asymmetry }
}

/// Interaction of two distinct patches: tensor Gauss, except between two
/// panels ending on the axis, which may face each other across a small
/// gap and use the graded rules on both sides.
fn cross_block(rows: &[Panel], cols: &[Panel], nrows: usize, ncols: usize) -> DMatrix<f64> {
    let mut block = DMatrix::zeros(nrows, ncols);
    let mut row = KernelRow::new(ncols);
    for panel in rows {
        let graded_pair = |other: &Panel| panel.graded.is_some() && other.graded.is_some();
        for (q, &wq) in panel.nodes.iter().zip(&panel.weights) {
            row.clear();
            for other in cols.iter().filter(|o| !graded_pair(o)) {
                for (s, &ws) in other.nodes.iter().zip(&other.weights) {
                    row.add_node(q, s, ws);
                }
            }
            row.scatter(q, wq * q.measure, &mut block);
        }
        let Some((outer, outer_w)) = &panel.graded else {
            continue;
        };
        for (q, &wq) in outer.iter().zip(outer_w) {
            row.clear();
            for (nodes, weights) in cols.iter().filter_map(|o| o.graded.as_ref()) {
                for (s, &ws) in nodes.iter().zip(weights) {
                    row.add_node(q, s, ws);
                }
            }
            row.scatter(q, wq * q.measure, &mut block);
        }
    }
    block
}

/// Smooth switch from 0 (m ≤ 0.3) to 1 (m ≥ 0.6). The logarithmic
/// coefficient is only needed near the self point, where m → 1, and its
/// closed form loses accuracy for small m.
fn log_weight(m: f64) -> f64 {
    let t = (m - 0.3) / 0.3;
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let g = |x: f64| (-1.0 / x).exp();
        g(t) / (g(t) + g(1.0 - t))
    }
}

/// Inner integral over the panel containing the outer node. The kernel
/// behaves like `χ(s)·ln|s - q|` with `χ = 2·L·w(m)`; the remainder is
/// smooth on each side of `q` and goes to Gauss, the log part to Gauss–Log.
fn self_panel(view: &PatchView, panel: &Panel, q: &Node, rules: &Rules, row: &mut KernelRow) {
    for (len, dir) in [(q.s - panel.span.start, -1.0), (panel.span.end - q.s, 1.0)] {
        if len <= 0.0 {
            continue;
        }
        for (x, w) in rules.gauss.iter() {
            let t = len * x;
            let s = view.node(&panel.span, q.s + dir * t);
            let dx = s.x - q.x;
            let lw = log_weight(ring_parameter(dx, q.sigma, s.sigma));
            let weight = w * len * s.measure;
            if lw > 0.0 {
                let (full, log) = ring_tensor_log(dx, q.sigma, s.sigma);
                let c = 2.0 * lw * (len / t).ln();
                let tt = [
                    [full[0][0] + c * log[0][0], full[0][1] + c * log[0][1]],
                    [full[1][0] + c * log[1][0], full[1][1] + c * log[1][1]],
                ];
                row.add(&tt, weight, &s.basis);
            } else {
                row.add(&ring_tensor(dx, q.sigma, s.sigma), weight, &s.basis);
            }
        }
        for (x, w) in rules.log.iter() {
            let t = len * x;
            let s = view.node(&panel.span, q.s + dir * t);
            let dx = s.x - q.x;
            let lw = log_weight(ring_parameter(dx, q.sigma, s.sigma));
            if lw > 0.0 {
                let (_, log) = ring_tensor_log(dx, q.sigma, s.sigma);
                row.add(&log, -2.0 * lw * w * len * s.measure, &s.basis);
            }
        }
    }
}

/// Inner integral over a panel adjacent to the outer one. `delta` is the
/// parametric distance from `q` to the shared endpoint; subintervals grow
/// geometrically from that endpoint, `τ_{k+1} = 2τ_k + δ`.
fn neighbour(view: &PatchView, panel: &Panel, q: &Node, delta: f64, shared_is_start: bool, gauss: &Rule, row: &mut KernelRow) {
    let h = panel.span.len();
    let delta = delta.max(1e-3 * h);
    let mut lo = 0.0;
    while lo < h {
        let hi = (2.0 * lo + delta).min(h);
        let hi = if h - hi < 0.25 * (hi - lo) { h } else { hi };
        let len = hi - lo;
        for (x, w) in gauss.iter() {
            let tau = lo + len * x;
            let s = if shared_is_start { panel.span.start + tau } else { panel.span.end - tau };
            let node = view.node(&panel.span, s);
            row.add_node(q, &node, w * len);
        }
        lo = hi;
    }
}

fn mass_and_normal(panels: &[Panel], n: usize) -> (DMatrix<f64>, DVector<f64>) {
    let w = 2 * n;
    let mut mass = DMatrix::zeros(w, w);
    let mut load = DVector::zeros(w);
    for panel in panels {
        for (node, &wt) in panel.nodes.iter().zip(&panel.weights) {
            let wm = 2.0 * PI * wt * node.measure;
            let wn = 2.0 * PI * wt * node.sigma;
            let normal = [-node.tangent[1], node.tangent[0]];
            let b = &node.basis;
            for (&i, &vi) in b.indices.iter().zip(b.values()) {
                for (&j, &vj) in b.indices.iter().zip(b.values()) {
                    let c = wm * vi * vj;
                    mass[(2 * i, 2 * j)] += c;
                    mass[(2 * i + 1, 2 * j + 1)] += c;
                }
                load[2 * i] += wn * vi * normal[0];
                load[2 * i + 1] += wn * vi * normal[1];
            }
        }
    }
    (mass, load)
}
