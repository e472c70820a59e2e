//! Gauss rules on `[0, 1]`, built by Golub–Welsch.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights of a quadrature rule on the unit interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

/// Gauss–Legendre rule with `n` points on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n > 0, "empty quadrature rule");
    let alpha = vec![0.5; n];
    let beta: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            0.25 / (4.0 - 1.0 / (k * k))
        })
        .collect();
    golub_welsch(&alpha, &beta, 1.0)
}

/// Gauss rule for the weight `-ln x` on `[0, 1]`:
/// `∫_0^1 -ln(x) f(x) dx ≈ Σ w_k f(x_k)`, exact for polynomials of degree
/// `2n - 1`.
///
/// The recurrence is obtained from the modified moments of `-ln x` with
/// respect to shifted monic Legendre polynomials (modified Chebyshev
/// algorithm), which is well conditioned.
pub fn gauss_log(n: usize) -> Rule {
    assert!(n > 0, "empty quadrature rule");
    let two_n = 2 * n;
    // recurrence of the shifted monic Legendre polynomials
    let a = vec![0.5; two_n];
    let b: Vec<f64> = (0..two_n)
        .map(|k| {
            if k == 0 {
                1.0
            } else {
                let k = k as f64;
                0.25 / (4.0 - 1.0 / (k * k))
            }
        })
        .collect();
    // modified moments ∫ -ln(x) p_k(x) dx
    let mut mom = vec![0.0; two_n];
    mom[0] = 1.0;
    let mut fact_ratio = 1.0; // (k!)^2 / (2k)!
    for (k, m) in mom.iter_mut().enumerate().skip(1) {
        let kf = k as f64;
        fact_ratio *= kf * kf / ((2.0 * kf - 1.0) * (2.0 * kf));
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        *m = sign * fact_ratio / (kf * (kf + 1.0));
    }
    let (alpha, beta) = modified_chebyshev(&a, &b, &mom, n);
    golub_welsch(&alpha, &beta[1..], beta[0])
}

/// Modified Chebyshev algorithm (Gautschi). Returns `n` recurrence
/// coefficients `alpha` and `beta` (with `beta[0]` the total mass).
fn modified_chebyshev(a: &[f64], b: &[f64], mom: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let two_n = 2 * n;
    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    let mut sig_prev = vec![0.0; two_n + 1];
    let mut sig: Vec<f64> = mom.to_vec();
    sig.push(0.0);
    alpha[0] = a[0] + mom[1] / mom[0];
    beta[0] = mom[0];
    for k in 1..n {
        let mut next = vec![0.0; two_n + 1];
        for l in k..(two_n - k) {
            next[l] = sig[l + 1] - (alpha[k - 1] - a[l]) * sig[l] - beta[k - 1] * sig_prev[l]
                + b[l] * if l > 0 { sig[l - 1] } else { 0.0 };
        }
        alpha[k] = a[k] + next[k + 1] / next[k] - sig[k] / sig[k - 1];
        beta[k] = next[k] / sig[k - 1];
        sig_prev = sig;
        sig = next;
    }
    (alpha, beta)
}

fn golub_welsch(alpha: &[f64], beta: &[f64], mass: f64) -> Rule {
    let n = alpha.len();
    let mut jac = DMatrix::zeros(n, n);
    for i in 0..n {
        jac[(i, i)] = alpha[i];
        if i + 1 < n {
            let off = beta[i].sqrt();
            jac[(i, i + 1)] = off;
            jac[(i + 1, i)] = off;
        }
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mass * v0 * v0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}
