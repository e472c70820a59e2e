use axiswim_core::geometry::{equivalent_radius, ShapeFamily, StickDonut, ThreeSphere};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `ζᵢ` against central differences of the control points.
fn shape_fields_match_differences(family: &dyn ShapeFamily, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = family.bounds();
    for _ in 0..5 {
        let xi: Vec<f64> = lo.iter().zip(&hi).map(|(l, u)| l + (u - l) * rng.gen_range(0.05..0.95)).collect();
        let cfg = family.configure(&xi, 0.1).unwrap();
        for i in 0..xi.len() {
            let h = 1e-6 * (hi[i] - lo[i]);
            let mut up = xi.clone();
            let mut down = xi.clone();
            up[i] += h;
            down[i] -= h;
            let a = family.configure(&up, 0.1).unwrap();
            let b = family.configure(&down, 0.1).unwrap();
            let scale = cfg.zeta[i].iter().flat_map(|z| z.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
            for (k, z) in cfg.zeta[i].iter().enumerate() {
                for c in 0..2 {
                    let fd = (a.curve.coeffs()[k][c] - b.curve.coeffs()[k][c]) / (2.0 * h);
                    assert!((fd - z[c]).abs() <= 1e-6 * scale, "{} ξ{} point {k}: {fd} vs {}", family.name(), i + 1, z[c]);
                }
            }
        }
    }
}

#[test]
fn three_sphere_shape_fields() {
    shape_fields_match_differences(&ThreeSphere::new(0.05, 12).unwrap(), 21);
}

#[test]
fn stick_donut_shape_fields() {
    shape_fields_match_differences(&StickDonut::new(equivalent_radius(0.05), 12).unwrap(), 22);
}
