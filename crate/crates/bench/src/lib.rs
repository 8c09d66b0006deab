//! Inputs shared by the benchmarks.

use gcm_core::{build_coefficient, default_inner_region, Aabb, CoefficientField, Grid3, Inclusion, PlaneField, PlaneGrid, C64};

/// The default box with the single reference cube.
pub fn reference_medium() -> CoefficientField {
    let grid = Grid3::covering(&Aabb::default_domain(), 5.0 / 75.0).expect("default grid");
    let cube = Inclusion::new(Aabb::new([-0.3, -0.3, 0.0], [0.3, 0.3, 0.6]), 5.0);
    build_coefficient(&[cube], &grid, &default_inner_region(&grid)).expect("reference cube")
}

/// A spherical wave from the origin sampled on the default measurement plane.
pub fn measured_plane(k: f64) -> PlaneField {
    let plane = PlaneGrid::cell_centred(-7.6, (-5.0, 5.0), (-5.0, 5.0), 100, 100).expect("default plane");
    PlaneField::from_fn(plane, k, |p| {
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        C64::from_polar(1.0 / r, k * r)
    })
}
