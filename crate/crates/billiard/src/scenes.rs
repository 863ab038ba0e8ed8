//! Ready-made obstacle configurations used across examples and tests.

use nalgebra::DVector;

use crate::geometry::{Obstacle, Scene};

/// Three equal disks at the vertices of an equilateral triangle.
pub fn equilateral_disks(side: f64, radius: f64) -> Scene {
    let h = side * 3.0_f64.sqrt() / 2.0;
    let centers = [
        (0.0, 0.0),
        (side, 0.0),
        (side / 2.0, h),
    ];
    let obstacles = centers
        .iter()
        .map(|&(x, y)| Obstacle::sphere(DVector::from_vec(vec![x, y]), radius).unwrap())
        .collect();
    Scene::new(2, obstacles).expect("valid by construction")
}

/// The standard desk-scale configuration: three unit disks centered at
/// (0,0), (6,0) and (3, 3*sqrt(3)).
pub fn three_disks() -> Scene {
    equilateral_disks(6.0, 1.0)
}

/// Three unit spheres at the vertices of an equilateral triangle in the
/// z = 0 plane of R^3, side 6. The pair (1, 2) realizes the minimal gap 4.
pub fn three_spheres() -> Scene {
    let h = 3.0 * 3.0_f64.sqrt();
    let centers = [
        (0.0, 0.0, 0.0),
        (6.0, 0.0, 0.0),
        (3.0, h, 0.0),
    ];
    let obstacles = centers
        .iter()
        .map(|&(x, y, z)| Obstacle::sphere(DVector::from_vec(vec![x, y, z]), 1.0).unwrap())
        .collect();
    Scene::new(3, obstacles).expect("valid by construction")
}

/// A single unit disk at the origin embedded in a scene with two far-away
/// spectator disks, for ray and map tests that only involve obstacle 1.
/// The spectators sit on the positive y side, far from the x axis.
pub fn single_disk_scene() -> Scene {
    let obstacles = vec![
        Obstacle::sphere(DVector::from_vec(vec![0.0, 0.0]), 1.0).unwrap(),
        Obstacle::sphere(DVector::from_vec(vec![0.0, 500.0]), 1.0).unwrap(),
        Obstacle::sphere(DVector::from_vec(vec![40.0, 500.0]), 1.0).unwrap(),
    ];
    Scene::new(2, obstacles).expect("valid by construction")
}
