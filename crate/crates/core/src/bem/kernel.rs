//! Ring Stokeslet: the free-space Stokeslet `I/r + r⊗r/r³` integrated over
//! a ring of sources around the axis, projected on the meridian plane.
//!
//! Entry `[a][b]` maps the source force component `b` to the target
//! velocity component `a`, components ordered `(x, σ)`. The result carries
//! dimension 1/length and no `1/(8πη)` factor.

use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

use thiserror::Error;

use crate::elliptic::{ke_log_split, ke_pair};

pub type Tensor = [[f64; 2]; 2];

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum KernelError {
    #[error("source and target rings coincide")]
    Coincident,
    #[error("ring radius must be positive (σ = {sigma}, σ0 = {sigma0})")]
    OnAxis { sigma: f64, sigma0: f64 },
}

/// Ring Stokeslet between a target ring `(x0, σ0)` and a source ring
/// `(x, σ)`.
pub fn ring_stokeslet(target: [f64; 2], source: [f64; 2]) -> Result<Tensor, KernelError> {
    let [x0, s0] = target;
    let [x, s] = source;
    if !(s > 0.0 && s0 > 0.0) {
        return Err(KernelError::OnAxis { sigma: s, sigma0: s0 });
    }
    if x == x0 && s == s0 {
        return Err(KernelError::Coincident);
    }
    Ok(ring_tensor(x - x0, s0, s))
}

/// Ring Stokeslet from the axial offset `dx = x - x0` and both radii. No
/// validation.
#[inline]
pub fn ring_tensor(dx: f64, s0: f64, s: f64) -> Tensor {
    let g = RingGeometry::new(dx, s0, s);
    let aux = if g.m < SERIES_BELOW { series_aux(g.m) } else { closed_aux(ke_pair(g.m, g.m1), g.m, g.m1) };
    g.tensor(&aux)
}

/// Ring Stokeslet split as `S = R + ln(m1)·L` with `m1 = r²/ρ²` the
/// complementary parameter; `L` is smooth through the coincidence point.
/// Returns `(S, L)`. Only meaningful for `m` bounded away from zero.
#[inline]
pub fn ring_tensor_log(dx: f64, s0: f64, s: f64) -> (Tensor, Tensor) {
    let g = RingGeometry::new(dx, s0, s);
    let (kr, kl, er, el) = ke_log_split(g.m, g.m1);
    let lm = g.m1.ln();
    let full = g.tensor(&closed_aux((kr + lm * kl, er + lm * el), g.m, g.m1));
    let log = g.tensor(&closed_aux((kl, el), g.m, g.m1));
    (full, log)
}

/// Parameter `m = 4σσ0/ρ²` for a pair of rings.
#[inline]
pub fn ring_parameter(dx: f64, s0: f64, s: f64) -> f64 {
    4.0 * s * s0 / (dx * dx + (s + s0) * (s + s0))
}

const SERIES_BELOW: f64 = 0.1;
const SERIES_TERMS: usize = 22;

struct RingGeometry {
    dx: f64,
    s0: f64,
    s: f64,
    rho: f64,
    m: f64,
    m1: f64,
}

impl RingGeometry {
    #[inline]
    fn new(dx: f64, s0: f64, s: f64) -> Self {
        let sp = s + s0;
        let sm = s - s0;
        let rho2 = dx * dx + sp * sp;
        let r2 = dx * dx + sm * sm;
        Self { dx, s0, s, rho: rho2.sqrt(), m: 4.0 * s * s0 / rho2, m1: r2 / rho2 }
    }

    /// Assembles the tensor from the auxiliary integrals, grouped so that
    /// the `1/r²` parts only appear multiplied by vanishing factors.
    #[inline]
    fn tensor(&self, aux: &Aux) -> Tensor {
        let f1 = 4.0 / self.rho;
        let f3 = f1 / (self.rho * self.rho);
        let ds = self.s - self.s0;
        let i10 = f1 * aux.a0;
        let i11 = f1 * (2.0 * aux.a1 - aux.a0);
        let i30 = f3 * aux.b0;
        let i31 = f3 * (aux.b0 - 2.0 * aux.a1);
        let dx = self.dx;
        [
            [i10 + dx * dx * i30, dx * f3 * (ds * aux.b0 + 2.0 * self.s0 * aux.a1)],
            [dx * f3 * (ds * aux.b0 - 2.0 * self.s * aux.a1), i11 + ds * ds * i31 - 4.0 * self.s * self.s0 * f3 * aux.d],
        ]
    }
}

/// Integrals over `ψ ∈ [0, π/2]` with `c = cos ψ`:
/// `a0 = ∫(1-mc²)^{-1/2}`, `a1 = ∫c²(1-mc²)^{-1/2}`, `b0 = ∫(1-mc²)^{-3/2}`,
/// `d = ∫sin⁴ψ (1-mc²)^{-3/2}`.
struct Aux {
    a0: f64,
    a1: f64,
    b0: f64,
    d: f64,
}

/// Auxiliary integrals from `(K, E)`. Linear in `(K, E)`, which is what
/// makes the logarithmic split work.
#[inline]
fn closed_aux((k, e): (f64, f64), m: f64, m1: f64) -> Aux {
    Aux { a0: k, a1: (k - e) / m, b0: e / m1, d: (e * (2.0 - m) - 2.0 * m1 * k) / (m * m) }
}

struct SeriesTable {
    a0: [f64; SERIES_TERMS],
    a1: [f64; SERIES_TERMS],
    b0: [f64; SERIES_TERMS],
    d: [f64; SERIES_TERMS],
}

fn series_table() -> &'static SeriesTable {
    static TABLE: OnceLock<SeriesTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        // W_p = ∫ c^{2p} = (π/2) (1/2)_p / p!
        let mut w = [0.0; SERIES_TERMS + 2];
        w[0] = FRAC_PI_2;
        for p in 1..w.len() {
            w[p] = w[p - 1] * (p as f64 - 0.5) / p as f64;
        }
        let mut t = SeriesTable { a0: [0.0; SERIES_TERMS], a1: [0.0; SERIES_TERMS], b0: [0.0; SERIES_TERMS], d: [0.0; SERIES_TERMS] };
        let (mut dj, mut cj) = (1.0, 1.0);
        for j in 0..SERIES_TERMS {
            if j > 0 {
                let jf = j as f64;
                dj *= (jf - 0.5) / jf;
                cj *= (jf + 0.5) / jf;
            }
            t.a0[j] = dj * w[j];
            t.a1[j] = dj * w[j + 1];
            t.b0[j] = cj * w[j];
            t.d[j] = cj * (w[j] - 2.0 * w[j + 1] + w[j + 2]);
        }
        t
    })
}

fn series_aux(m: f64) -> Aux {
    let t = series_table();
    let horner = |c: &[f64; SERIES_TERMS]| c.iter().rev().fold(0.0, |acc, &v| acc * m + v);
    Aux { a0: horner(&t.a0), a1: horner(&t.a1), b0: horner(&t.b0), d: horner(&t.d) }
}
