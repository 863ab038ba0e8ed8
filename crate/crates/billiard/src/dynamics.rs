//! The billiard flow on phase points, the inversion-composed map
//! `Phi = i ∘ phi_{2 lambda}`, and central finite-difference differentials
//! used as the universal numerical oracle for flow derivatives.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{ray_cast_raw, BoundaryHit, Scene};

/// Tangency threshold: hits with `cos_phi` below this are treated as
/// degenerate. On the non-wandering set of a no-eclipse scene all hits are
/// uniformly transversal, so reaching this indicates the caller left the
/// relevant domain.
pub const TANGENCY_THRESHOLD: f64 = 1e-9;

/// Default step for finite-difference Jacobians.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// A point of the phase space: position plus unit direction.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub position: DVector<f64>,
    pub direction: DVector<f64>,
}

impl PhasePoint {
    /// Builds a phase point, normalizing the direction. Directions more than
    /// 1e-9 away from unit norm are rejected.
    pub fn new(position: DVector<f64>, direction: DVector<f64>) -> Result<Self> {
        let norm = direction.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "phase direction norm {norm:.12} is not 1"
            )));
        }
        Ok(PhasePoint {
            position,
            direction: direction / norm,
        })
    }

    pub fn dimension(&self) -> usize {
        self.position.len()
    }

    /// Concatenated coordinates `(position, direction)` for FD stencils.
    pub fn to_vector(&self) -> DVector<f64> {
        let n = self.position.len();
        DVector::from_fn(2 * n, |i, _| {
            if i < n {
                self.position[i]
            } else {
                self.direction[i - n]
            }
        })
    }

    /// Splits a concatenated vector back into (position, velocity) without
    /// normalizing; used by finite-difference stencils.
    pub fn split_vector(v: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let n = v.len() / 2;
        (v.rows(0, n).into_owned(), v.rows(n, n).into_owned())
    }
}

/// Outcome of flowing a phase point for a fixed time.
#[derive(Debug, Clone)]
pub struct FlowResult {
    pub endpoint: PhasePoint,
    /// Boundary hits in trajectory order; `time` fields are cumulative.
    pub hits: Vec<BoundaryHit>,
    pub escaped: bool,
}

/// Specular reflection `xi - 2 <xi, nu> nu`.
pub fn reflect(direction: &DVector<f64>, normal: &DVector<f64>) -> DVector<f64> {
    direction - normal * (2.0 * direction.dot(normal))
}

/// Flows a phase point for time `t >= 0`, composing free flights and
/// reflections. When the trajectory leaves every obstacle behind, the
/// endpoint is the straight-line continuation and `escaped` is set.
pub fn flow(scene: &Scene, start: &PhasePoint, t: f64) -> Result<FlowResult> {
    if t < 0.0 {
        return Err(Error::Domain(format!("flow time {t} is negative")));
    }
    if scene.inside_any_obstacle(&start.position) {
        return Err(Error::Domain(
            "phase point lies inside an obstacle".into(),
        ));
    }
    let mut pos = start.position.clone();
    let mut dir = start.direction.clone();
    let mut remaining = t;
    let mut elapsed = 0.0;
    let mut hits = Vec::new();
    let cap = (t / scene.min_gap()).ceil() as usize + 2;
    for _ in 0..cap {
        match ray_cast_raw(scene, &pos, &dir) {
            None => {
                return Ok(FlowResult {
                    endpoint: PhasePoint {
                        position: pos + &dir * remaining,
                        direction: dir,
                    },
                    hits,
                    escaped: true,
                });
            }
            Some(hit) if hit.time > remaining => {
                return Ok(FlowResult {
                    endpoint: PhasePoint {
                        position: pos + &dir * remaining,
                        direction: dir,
                    },
                    hits,
                    escaped: false,
                });
            }
            Some(hit) => {
                if hit.cos_phi < TANGENCY_THRESHOLD {
                    return Err(Error::DegenerateTrajectory {
                        cos_phi: hit.cos_phi,
                    });
                }
                remaining -= hit.time;
                elapsed += hit.time;
                pos = hit.point.clone();
                dir = reflect(&dir, &hit.normal).normalize();
                hits.push(BoundaryHit {
                    time: elapsed,
                    ..hit
                });
            }
        }
    }
    Err(Error::Solver {
        context: "flow exceeded the reflection budget".into(),
        iterations: cap,
        residual: remaining,
    })
}

/// The map `Phi(x, xi) = i ∘ phi_{2 lambda} (x, xi) = (z + (2 lambda - t) eta, -eta)`,
/// where `z = x + t xi` is the first boundary point ahead and `eta` the
/// reflected direction. Defined only when the hit time satisfies
/// `0 < t < 2 lambda` and no second reflection occurs before `2 lambda`.
pub fn phi_map(scene: &Scene, sigma: &PhasePoint, lambda: f64) -> Result<PhasePoint> {
    if lambda <= 0.0 {
        return Err(Error::Domain(format!("lambda = {lambda} must be positive")));
    }
    if scene.inside_any_obstacle(&sigma.position) {
        return Err(Error::Domain(
            "phase point lies inside an obstacle".into(),
        ));
    }
    let (pos, dir) = phi_map_vec(scene, &sigma.position, &sigma.direction, lambda)?;
    PhasePoint::new(pos, dir)
}

/// `phi_map` on raw (position, velocity) pairs; tolerates non-unit
/// velocities so finite-difference stencils can probe all coordinates.
/// `t` is the ray parameter, matching the extended flow `x + t xi`.
pub fn phi_map_vec(
    scene: &Scene,
    position: &DVector<f64>,
    velocity: &DVector<f64>,
    lambda: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let hit = ray_cast_raw(scene, position, velocity).ok_or_else(|| {
        Error::Domain("Phi undefined: the forward ray never reaches a boundary".into())
    })?;
    if hit.time >= 2.0 * lambda {
        return Err(Error::Domain(format!(
            "Phi undefined: hit time {:.6} is not below 2 lambda = {:.6}",
            hit.time,
            2.0 * lambda
        )));
    }
    if hit.cos_phi < TANGENCY_THRESHOLD {
        return Err(Error::DegenerateTrajectory {
            cos_phi: hit.cos_phi,
        });
    }
    let eta = reflect(velocity, &hit.normal);
    if let Some(second) = ray_cast_raw(scene, &hit.point, &eta) {
        if hit.time + second.time < 2.0 * lambda {
            return Err(Error::Domain(format!(
                "Phi undefined: second hit at time {:.6} before 2 lambda = {:.6}",
                hit.time + second.time,
                2.0 * lambda
            )));
        }
    }
    let g = &hit.point + &eta * (2.0 * lambda - hit.time);
    Ok((g, -eta))
}

/// Time-`t` billiard flow on raw (position, velocity) pairs, for use inside
/// finite-difference stencils. Velocities need not be unit; the trajectory
/// is `x + s v` between reflections, so `t` is the flow parameter. When
/// `expected_hits` is given, a deviating reflection count is reported as a
/// stencil error (the stencil crossed a discontinuity).
pub fn flow_vec(
    scene: &Scene,
    position: &DVector<f64>,
    velocity: &DVector<f64>,
    t: f64,
    expected_hits: Option<usize>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let mut pos = position.clone();
    let mut vel = velocity.clone();
    let mut remaining = t;
    let mut count = 0usize;
    let speed = velocity.norm();
    let cap = (t * speed / scene.min_gap()).ceil() as usize + 2;
    for _ in 0..cap {
        match ray_cast_raw(scene, &pos, &vel) {
            Some(hit) if hit.time <= remaining => {
                if hit.cos_phi < TANGENCY_THRESHOLD {
                    return Err(Error::Stencil(format!(
                        "tangential hit with cos_phi {:.3e}",
                        hit.cos_phi
                    )));
                }
                remaining -= hit.time;
                pos = hit.point.clone();
                vel = reflect(&vel, &hit.normal);
                count += 1;
            }
            _ => {
                pos += &vel * remaining;
                if let Some(m) = expected_hits {
                    if count != m {
                        return Err(Error::Stencil(format!(
                            "stencil saw {count} reflections, expected {m}"
                        )));
                    }
                }
                return Ok((pos, vel));
            }
        }
    }
    Err(Error::Stencil("flight budget exceeded".into()))
}

/// Central-difference Jacobian of a map `R^m -> R^m`. The error is `O(h^2)`
/// for C^3 maps; failures of the sampled map surface as stencil errors.
pub fn fd_jacobian<F>(map: F, point: &DVector<f64>, step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    if step <= 0.0 {
        return Err(Error::Domain(format!("fd step {step} must be positive")));
    }
    let m = point.len();
    let mut jac = DMatrix::zeros(m, m);
    for j in 0..m {
        let mut plus = point.clone();
        plus[j] += step;
        let mut minus = point.clone();
        minus[j] -= step;
        let fp = map(&plus).map_err(|e| Error::Stencil(e.to_string()))?;
        let fm = map(&minus).map_err(|e| Error::Stencil(e.to_string()))?;
        if fp.len() != m || fm.len() != m {
            return Err(Error::Stencil(format!(
                "map returned dimension {} at column {j}, expected {m}",
                fp.len()
            )));
        }
        let col = (fp - fm) / (2.0 * step);
        jac.set_column(j, &col);
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ray_cast;
    use crate::scenes;
    use proptest::prelude::*;

    fn vec2(x: f64, y: f64) -> DVector<f64> {
        DVector::from_vec(vec![x, y])
    }

    fn pp(x: f64, y: f64, dx: f64, dy: f64) -> PhasePoint {
        PhasePoint::new(vec2(x, y), vec2(dx, dy)).unwrap()
    }

    #[test]
    fn reflect_examples() {
        let r = reflect(&vec2(-1.0, 0.0), &vec2(1.0, 0.0));
        assert!((r - vec2(1.0, 0.0)).norm() < 1e-15);
        let g = reflect(&vec2(0.0, 1.0), &vec2(1.0, 0.0));
        assert!((g - vec2(0.0, 1.0)).norm() < 1e-15);
        let s = 0.5_f64.sqrt();
        let m = reflect(&vec2(-s, -s), &vec2(0.0, 1.0));
        assert!((m - vec2(-s, s)).norm() < 1e-15);
    }

    proptest! {
        #[test]
        fn reflect_is_an_involution(tx in -1.0_f64..1.0, ty in -1.0_f64..1.0,
                                    nx in -1.0_f64..1.0, ny in -1.0_f64..1.0) {
            prop_assume!((tx * tx + ty * ty) > 1e-4 && (nx * nx + ny * ny) > 1e-4);
            let d = vec2(tx, ty).normalize();
            let n = vec2(nx, ny).normalize();
            let r = reflect(&d, &n);
            prop_assert!((r.norm() - 1.0).abs() < 1e-14);
            prop_assert!((reflect(&r, &n) - &d).norm() < 1e-14);
        }
    }

    #[test]
    fn flow_single_bounce_arithmetic() {
        let scene = scenes::three_disks();
        let res = flow(&scene, &pp(3.0, 0.0, -1.0, 0.0), 3.0).unwrap();
        assert_eq!(res.hits.len(), 1);
        assert!(!res.escaped);
        assert!((res.hits[0].point[0] - 1.0).abs() < 1e-12);
        assert!((res.endpoint.position - vec2(2.0, 0.0)).norm() < 1e-12);
        assert!((res.endpoint.direction - vec2(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn flow_closes_the_two_bounce_orbit() {
        let scene = scenes::three_disks();
        let res = flow(&scene, &pp(1.0, 0.0, 1.0, 0.0), 8.0).unwrap();
        assert_eq!(res.hits.len(), 2);
        assert!((res.endpoint.position - vec2(1.0, 0.0)).norm() < 1e-10);
        assert!((res.endpoint.direction - vec2(1.0, 0.0)).norm() < 1e-12);
        // Cumulative hit times strictly increase.
        assert!(res.hits[0].time < res.hits[1].time);
        assert!((res.hits[0].time - 4.0).abs() < 1e-10);
        assert!((res.hits[1].time - 8.0).abs() < 1e-10);
    }

    #[test]
    fn flow_escapes_when_pointing_away() {
        let scene = scenes::three_disks();
        let res = flow(&scene, &pp(3.0, 7.0, 0.0, 1.0), 10.0).unwrap();
        assert!(res.escaped);
        assert!(res.hits.is_empty());
        assert!((res.endpoint.position - vec2(3.0, 17.0)).norm() < 1e-12);
    }

    #[test]
    fn flow_semigroup_on_hit_free_windows() {
        let scene = scenes::three_disks();
        let start = pp(3.0, 0.0, -1.0, 0.0);
        let once = flow(&scene, &start, 2.5).unwrap();
        let twice = flow(&scene, &once.endpoint, 0.7).unwrap();
        let direct = flow(&scene, &start, 3.2).unwrap();
        assert!((twice.endpoint.position - &direct.endpoint.position).norm() < 1e-10);
        assert!((twice.endpoint.direction - &direct.endpoint.direction).norm() < 1e-10);
    }

    #[test]
    fn inter_hit_segments_are_obstacle_free() {
        let scene = scenes::three_disks();
        // Slightly perturbed off the two-bounce orbit: the trajectory stays
        // for several bounces before escaping.
        let dir = vec2(1.0, 2e-4).normalize();
        let start = PhasePoint::new(vec2(1.0, 0.0), dir).unwrap();
        let res = flow(&scene, &start, 30.0).unwrap();
        assert!(res.hits.len() >= 3, "{} hits", res.hits.len());
        for pair in res.hits.windows(2) {
            let dir = (&pair[1].point - &pair[0].point).normalize();
            let recheck = ray_cast(&scene, &pair[0].point, &dir).unwrap().unwrap();
            let gap_time = pair[1].time - pair[0].time;
            assert!((recheck.time - gap_time).abs() < 1e-9);
            assert_eq!(recheck.obstacle_index, pair[1].obstacle_index);
        }
    }

    #[test]
    fn flow_preserves_unit_directions() {
        let scene = scenes::three_disks();
        let start = pp(5.0, 0.3, -0.9, 0.435_889_894_354_067_4);
        let res = flow(&scene, &start, 25.0).unwrap();
        assert!((res.endpoint.direction.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn phi_fixes_the_perpendicular_point() {
        let scene = scenes::single_disk_scene();
        let sigma = pp(2.0, 0.0, -1.0, 0.0);
        let image = phi_map(&scene, &sigma, 1.0).unwrap();
        assert!((image.position - &sigma.position).norm() < 1e-12);
        assert!((image.direction - &sigma.direction).norm() < 1e-12);
    }

    #[test]
    fn phi_is_an_involution_near_the_perpendicular_point() {
        let scene = scenes::single_disk_scene();
        let sigma = pp(2.0, 0.1, -1.0, 0.0);
        let once = phi_map(&scene, &sigma, 1.0).unwrap();
        assert!((once.direction.norm() - 1.0).abs() < 1e-12);
        let back = phi_map(&scene, &once, 1.0).unwrap();
        assert!((back.position - &sigma.position).norm() < 1e-10);
        assert!((back.direction - &sigma.direction).norm() < 1e-10);
    }

    #[test]
    fn phi_rejects_small_lambda() {
        let scene = scenes::single_disk_scene();
        let sigma = pp(2.0, 0.0, -1.0, 0.0);
        assert!(matches!(
            phi_map(&scene, &sigma, 0.4),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn fd_jacobian_of_free_flight_is_exact() {
        let t = 1.7;
        let map = |v: &DVector<f64>| -> crate::Result<DVector<f64>> {
            let (x, xi) = PhasePoint::split_vector(v);
            let moved = &x + &xi * t;
            Ok(DVector::from_fn(4, |i, _| {
                if i < 2 {
                    moved[i]
                } else {
                    xi[i - 2]
                }
            }))
        };
        let point = DVector::from_vec(vec![0.3, -0.2, 0.6, 0.8]);
        let jac = fd_jacobian(map, &point, 1e-5).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j {
                    1.0
                } else if j == i + 2 {
                    t
                } else {
                    0.0
                };
                assert!(
                    (jac[(i, j)] - expected).abs() < 1e-9,
                    "entry ({i},{j}) = {}",
                    jac[(i, j)]
                );
            }
        }
    }

    #[test]
    fn fd_jacobian_scalar_calibration() {
        let map = |v: &DVector<f64>| -> crate::Result<DVector<f64>> {
            Ok(DVector::from_vec(vec![v[0] * v[0]]))
        };
        let jac = fd_jacobian(map, &DVector::from_vec(vec![3.0]), 1e-5).unwrap();
        assert!((jac[(0, 0)] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn fd_jacobian_propagates_stencil_errors() {
        let map = |_: &DVector<f64>| -> crate::Result<DVector<f64>> {
            Err(Error::Domain("outside".into()))
        };
        assert!(matches!(
            fd_jacobian(map, &DVector::from_vec(vec![0.0]), 1e-5),
            Err(Error::Stencil(_))
        ));
    }

    #[test]
    fn flow_vec_detects_changed_hit_counts() {
        let scene = scenes::three_disks();
        // Time 4.5 from (3,0) towards disk 1 sees exactly one reflection.
        let ok = flow_vec(&scene, &vec2(3.0, 0.0), &vec2(-1.0, 0.0), 4.5, Some(1));
        assert!(ok.is_ok());
        let bad = flow_vec(&scene, &vec2(3.0, 0.0), &vec2(-1.0, 0.0), 4.5, Some(2));
        assert!(matches!(bad, Err(Error::Stencil(_))));
    }
}
