use std::f64::consts::PI;

use axiswim_core::bem::{assemble, axial_field, flatten, ring_stokeslet, BemError, KernelError};
use axiswim_core::geometry::{sphere, ShapeFamily, StickDonut, ThreeSphere};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Azimuthal trapezoid rule over the free-space Stokeslet; spectrally
/// accurate for separated rings.
fn brute_ring(target: [f64; 2], source: [f64; 2], n: usize) -> [[f64; 2]; 2] {
    let [x0, s0] = target;
    let [x, s] = source;
    let mut out = [[0.0; 2]; 2];
    let h = 2.0 * PI / n as f64;
    for k in 0..n {
        let th = k as f64 * h;
        let (sn, cs) = th.sin_cos();
        let d = [x - x0, s * cs - s0, s * sn];
        let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let st = |i: usize, j: usize| (if i == j { 1.0 / r } else { 0.0 }) + d[i] * d[j] / (r * r * r);
        // source force along e_σ(θ) = (0, cos θ, sin θ); target components along (1,0,0), (0,1,0)
        out[0][0] += h * st(0, 0);
        out[0][1] += h * (st(0, 1) * cs + st(0, 2) * sn);
        out[1][0] += h * st(1, 0);
        out[1][1] += h * (st(1, 1) * cs + st(1, 2) * sn);
    }
    out
}

#[test]
fn ring_kernel_matches_azimuthal_quadrature() {
    let cases = [([0.0, 1.0], [0.0, 2.0]), ([0.3, 1.0], [1.1, 0.4]), ([0.0, 1.0], [0.2, 1.1]), ([-2.0, 0.05], [1.0, 3.0])];
    for (t, s) in cases {
        let got = ring_stokeslet(t, s).unwrap();
        let want = brute_ring(t, s, 100_000);
        for a in 0..2 {
            for b in 0..2 {
                let scale = want[a][b].abs().max(1e-3 * want[0][0].abs());
                assert!((got[a][b] - want[a][b]).abs() <= 1e-9 * scale, "{t:?} {s:?} [{a}][{b}]: {} vs {}", got[a][b], want[a][b]);
            }
        }
    }
}

#[test]
fn ring_kernel_translation_and_scaling() {
    let base = ring_stokeslet([0.0, 1.0], [0.0, 2.0]).unwrap();
    let shifted = ring_stokeslet([5.0, 1.0], [5.0, 2.0]).unwrap();
    let scaled = ring_stokeslet([0.0, 2.0], [0.0, 4.0]).unwrap();
    for a in 0..2 {
        for b in 0..2 {
            assert!((base[a][b] - shifted[a][b]).abs() <= 1e-14 * base[a][b].abs().max(1.0));
            assert!((0.5 * base[a][b] - scaled[a][b]).abs() <= 1e-14 * base[a][b].abs().max(1.0));
        }
    }
    assert_eq!(ring_stokeslet([0.0, 1.0], [0.0, 1.0]), Err(KernelError::Coincident));
}

#[test]
fn ring_kernel_log_singularity() {
    // diagonal entries grow like -2 ln r as the rings approach
    let d1 = ring_stokeslet([0.0, 1.0], [1e-4, 1.0]).unwrap();
    let d2 = ring_stokeslet([0.0, 1.0], [1e-6, 1.0]).unwrap();
    let slope = (d2[1][1] - d1[1][1]) / (1e-6f64.ln() - 1e-4f64.ln());
    assert!((slope + 2.0).abs() < 1e-3, "{slope}");
    let slope = (d2[0][0] - d1[0][0]) / (1e-6f64.ln() - 1e-4f64.ln());
    assert!((slope + 2.0).abs() < 1e-3, "{slope}");
}

fn sphere_drag(n: usize) -> f64 {
    let curve = sphere(1.0, 0.0, n).unwrap();
    let op = assemble(&curve, 1.0).unwrap();
    let v = axial_field(curve.basis().len());
    let f = op.dn_map(&v).unwrap();
    op.axial_force(&f)
}

#[test]
fn sphere_drag_converges_to_stokes_law() {
    let exact = 6.0 * PI;
    let errors: Vec<f64> = [10, 15, 20, 30].iter().map(|&n| (sphere_drag(n) - exact).abs() / exact).collect();
    assert!(errors[1] < 5e-3, "{errors:?}");
    for w in errors.windows(2) {
        assert!(w[1] < w[0], "{errors:?}");
    }
}

#[test]
fn sphere_density_is_uniform() {
    // exact traction for a translating sphere is 3ηU/(2a) e
    let curve = sphere(0.7, 0.3, 15).unwrap();
    let op = assemble(&curve, 2.0).unwrap();
    let f = op.dn_map(&axial_field(curve.basis().len())).unwrap();
    let expect = 3.0 * 2.0 / (2.0 * 0.7);
    for i in 2..13 {
        assert!((f[2 * i] - expect).abs() < 2e-2 * expect, "{i}: {}", f[2 * i]);
        assert!(f[2 * i + 1].abs() < 2e-2 * expect);
    }
}

#[test]
fn operator_structure() {
    let fam = ThreeSphere::new(0.05, 15).unwrap();
    let cfg = fam.configure(&[0.07, 0.12], 0.01).unwrap();
    let op = assemble(&cfg.curve, 1.0).unwrap();
    assert!(op.raw_asymmetry() < 1e-2, "{}", op.raw_asymmetry());
    let a = op.single_layer();
    assert!((a - a.transpose()).amax() <= 1e-10 * a.amax());
    let eig = a.clone().symmetric_eigen();
    // only the normal fields may dip below zero, by their discretization error
    assert!(eig.eigenvalues.min() > -1e-6 * eig.eigenvalues.max());

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dim = op.dim();
    let zero = op.nd_map(&DVector::zeros(dim)).unwrap();
    assert_eq!(zero.amax(), 0.0);
    for _ in 0..100 {
        let v = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        let f = op.dn_map(&v).unwrap();
        assert!(op.pairing(&v, &f) >= 0.0);
    }
    let f1 = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
    let f2 = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
    let sum = op.nd_map(&(&f1 + &f2)).unwrap();
    let parts = op.nd_map(&f1).unwrap() + op.nd_map(&f2).unwrap();
    assert!((sum - &parts).amax() <= 1e-12 * parts.amax());
    assert!(matches!(op.dn_map(&DVector::zeros(3)), Err(BemError::DimensionMismatch { .. })));
}

#[test]
fn translation_invariance_of_traction() {
    let fam = ThreeSphere::new(0.05, 15).unwrap();
    let cfg = fam.configure(&[0.1, 0.05], 0.0).unwrap();
    let moved = cfg.curve.translated(10.0);
    let v = flatten(&cfg.zeta[0]);
    let f0 = assemble(&cfg.curve, 1.0).unwrap().dn_map(&v).unwrap();
    let f1 = assemble(&moved, 1.0).unwrap().dn_map(&v).unwrap();
    assert!((&f0 - &f1).amax() <= 1e-10 * f0.amax(), "{}", (&f0 - &f1).amax() / f0.amax());
}

fn normal_residual(n: usize) -> f64 {
    let curve = sphere(1.0, 0.0, n).unwrap();
    let op = assemble(&curve, 1.0).unwrap();
    let nh = &op.normal_fields()[0];
    let a = op.single_layer();
    (a * nh).norm() / (a.norm() * nh.norm())
}

#[test]
fn normal_field_is_near_null() {
    let r15 = normal_residual(15);
    let r30 = normal_residual(30);
    assert!(r15 < 1e-4, "{r15}");
    assert!(r30 < r15 / 3.0, "{r15} {r30}");

    let curve = sphere(1.0, 0.0, 15).unwrap();
    let op = assemble(&curve, 1.0).unwrap();
    let nh = &op.normal_fields()[0];
    let v = op.nd_map(nh).unwrap();
    assert!(v.norm() < 1e-3 * nh.norm(), "{}", v.norm() / nh.norm());
}

#[test]
fn stick_donut_operator_assembles() {
    let fam = StickDonut::new(0.034, 15).unwrap();
    for xi in [[0.0, 0.0], [1.0, 1.0], [0.5, 0.5]] {
        let cfg = fam.configure(&xi, 0.0).unwrap();
        let op = assemble(&cfg.curve, 1.0).unwrap();
        let f = op.dn_map(&axial_field(cfg.curve.basis().len())).unwrap();
        assert!(op.axial_force(&f) > 0.0);
        assert!(op.raw_asymmetry() < 1e-2);
    }
}

/// Stimson–Jeffery drag factor for two equal spheres translating along
/// their line of centres at distance `2a·cosh α`.
fn stimson_jeffery(alpha: f64) -> f64 {
    let sum: f64 = (1..200)
        .map(|n| {
            let n = n as f64;
            let num = 4.0 * ((n + 0.5) * alpha).sinh().powi(2) - (2.0 * n + 1.0).powi(2) * alpha.sinh().powi(2);
            let den = 2.0 * ((2.0 * n + 1.0) * alpha).sinh() + (2.0 * n + 1.0) * (2.0 * alpha).sinh();
            n * (n + 1.0) / ((2.0 * n - 1.0) * (2.0 * n + 3.0)) * (1.0 - num / den)
        })
        .sum();
    4.0 / 3.0 * alpha.sinh() * sum
}

#[test]
fn two_sphere_drag_matches_stimson_jeffery() {
    use axiswim_core::geometry::{GeneratorCurve, PatchKind};
    use axiswim_core::BasisSet;
    use std::sync::Arc;
    let n = 15;
    for alpha in [0.3, 0.6, 1.2] {
        let d = 2.0 * f64::cosh(alpha);
        let mut coeffs = sphere(1.0, -0.5 * d, n).unwrap().coeffs().to_vec();
        coeffs.extend_from_slice(sphere(1.0, 0.5 * d, n).unwrap().coeffs());
        let basis = Arc::new(BasisSet::patched(n, &[0.5], (0.0, 1.0)).unwrap());
        let curve = GeneratorCurve::new(basis, coeffs, vec![PatchKind::AxisArc; 2]).unwrap();
        let op = assemble(&curve, 1.0).unwrap();
        let f = op.dn_map(&axial_field(2 * n)).unwrap();
        let lambda = op.axial_force(&f) / (2.0 * 6.0 * PI);
        let exact = stimson_jeffery(alpha);
        assert!((lambda - exact).abs() < 1e-4 * exact, "α={alpha}: {lambda} vs {exact}");
    }
}
