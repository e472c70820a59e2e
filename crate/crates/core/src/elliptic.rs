//! Complete elliptic integrals of the first and second kind.
//!
//! Both are evaluated by the arithmetic-geometric mean, which converges
//! quadratically. The internal entry point takes the parameter `m = k²`
//! together with its complement `m1 = 1 - m`; callers that can form `m1`
//! without cancellation (the ring kernel does) avoid the loss of accuracy
//! near `m -> 1`, where `K` has its logarithmic singularity.

use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum EllipticError {
    #[error("modulus {0} outside [0, 1)")]
    ModulusOutOfRange(f64),
    #[error("modulus {0} outside [0, 1]")]
    ModulusOutOfRangeE(f64),
}

const MAX_ITER: usize = 40;

/// `K(k) = ∫_0^{π/2} (1 - k² sin²θ)^{-1/2} dθ` for modulus `k` in `[0, 1)`.
pub fn complete_k(k: f64) -> Result<f64, EllipticError> {
    if !(0.0..1.0).contains(&k) {
        return Err(EllipticError::ModulusOutOfRange(k));
    }
    let m = k * k;
    Ok(ke_pair(m, (1.0 - k) * (1.0 + k)).0)
}

/// `E(k) = ∫_0^{π/2} (1 - k² sin²θ)^{1/2} dθ` for modulus `k` in `[0, 1]`.
pub fn complete_e(k: f64) -> Result<f64, EllipticError> {
    if !(0.0..=1.0).contains(&k) {
        return Err(EllipticError::ModulusOutOfRangeE(k));
    }
    if k == 1.0 {
        return Ok(1.0);
    }
    let m = k * k;
    Ok(ke_pair(m, (1.0 - k) * (1.0 + k)).1)
}

/// `(K, E)` for parameter `m` with precomputed complement `m1 = 1 - m`.
///
/// Requires `0 <= m` and `0 < m1 <= 1`. No validation, this sits in the
/// innermost loop of operator assembly.
#[inline]
pub fn ke_pair(m: f64, m1: f64) -> (f64, f64) {
    let mut a = 1.0f64;
    let mut b = m1.sqrt();
    let mut c2 = m;
    let mut sum = 0.5 * c2;
    let mut pow = 0.5;
    for _ in 0..MAX_ITER {
        let an = 0.5 * (a + b);
        let cn = 0.5 * (a - b);
        pow *= 2.0;
        let cn2 = cn * cn;
        sum += pow * cn2;
        b = (a * b).sqrt();
        a = an;
        c2 = cn2;
        if c2 <= 1e-34 * a * a {
            break;
        }
    }
    let k = FRAC_PI_2 / a;
    (k, k * (1.0 - sum))
}

/// Logarithmic split `K = Kr + ln(m1)·Kl`, `E = Er + ln(m1)·El`, where all
/// four parts are analytic in `m1` on `[0, 1)`. Evaluated from the
/// Legendre-type relations `Kl = -K(m1)/π`, `El = -(K(m1) - E(m1))/π`.
///
/// Returns `(Kr, Kl, Er, El)`. Valid for `m1` well below 1; the regular parts
/// lose accuracy as `m1 -> 1` because both terms of the split blow up.
#[inline]
pub fn ke_log_split(m: f64, m1: f64) -> (f64, f64, f64, f64) {
    let (k, e) = ke_pair(m, m1);
    let (kc, ec) = ke_pair(m1, m);
    let kl = -kc / PI;
    let el = -(kc - ec) / PI;
    let lm = m1.ln();
    (k - lm * kl, kl, e - lm * el, el)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        // Closed form at k = 1/√2 via the gamma function:
        // K = Γ(1/4)² / (4√π), E = K/2 + π/(4K).
        let gamma_quarter = 3.625_609_908_221_908_f64;
        let kk = gamma_quarter * gamma_quarter / (4.0 * PI.sqrt());
        let ee = kk / 2.0 + PI / (4.0 * kk);
        let k = std::f64::consts::FRAC_1_SQRT_2;
        assert!((complete_k(k).unwrap() - kk).abs() < 1e-14);
        assert!((complete_e(k).unwrap() - ee).abs() < 1e-14);
        assert!((complete_k(0.0).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((complete_e(0.0).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(complete_e(1.0).unwrap(), 1.0);
    }

    #[test]
    fn domain_errors() {
        assert!(complete_k(1.0).is_err());
        assert!(complete_k(-0.1).is_err());
        assert!(complete_e(1.1).is_err());
        assert!(complete_k(f64::NAN).is_err());
    }

    #[test]
    fn split_regular_limits() {
        let m1 = 1e-12;
        let (kr, _, er, _) = ke_log_split(1.0 - m1, m1);
        assert!((kr - 4f64.ln()).abs() < 1e-10);
        assert!((er - 1.0).abs() < 1e-10);
        let m1 = 0.3;
        let (k, e) = ke_pair(0.7, 0.3);
        let (kr, kl, er, el) = ke_log_split(0.7, m1);
        assert!((kr + m1.ln() * kl - k).abs() < 1e-14);
        assert!((er + m1.ln() * el - e).abs() < 1e-14);
    }
}
