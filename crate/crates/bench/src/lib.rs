//! Fixtures shared by the benchmarks.

use axiswim_core::geometry::{equivalent_radius, Configuration, ShapeFamily, StickDonut, ThreeSphere};

/// Three-sphere swimmer of radius 0.05 mm with 15 controls per sphere.
pub fn three_sphere() -> ThreeSphere {
    ThreeSphere::new(0.05, 15).expect("valid three-sphere family")
}

/// Stick and donut swimmer with the same volume as [`three_sphere`].
pub fn stick_donut() -> StickDonut {
    StickDonut::new(equivalent_radius(0.05), 15).expect("valid stick and donut family")
}

/// Configuration at the centre of the family's shape box.
pub fn central_configuration(family: &dyn ShapeFamily) -> Configuration {
    let (lo, hi) = family.bounds();
    let xi: Vec<f64> = lo.iter().zip(&hi).map(|(l, u)| 0.5 * (l + u)).collect();
    family.configure(&xi, 0.0).expect("central shape is admissible")
}
