//! Periodic billiard orbits for admissible cyclic words, located by
//! minimizing the total cyclic length over boundary points, and shadowing
//! return times for cylinder words.
//!
//! Boundary points are parametrized through the quadric's affine image of
//! the unit sphere, with a per-point rotated spherical chart centered at the
//! initial guess so chart singularities stay far from the iterates.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dynamics::reflect;
use crate::error::{Error, Result};
use crate::geometry::Scene;
use crate::symbolic::{primitive_necklaces, Word};

/// Iteration cap for the orbit solver.
const MAX_ITERATIONS: usize = 500;

/// A closed billiard trajectory realizing a cyclic itinerary.
#[derive(Debug, Clone, Serialize)]
pub struct PeriodicOrbit {
    pub word: Word,
    /// Reflection points, one per symbol.
    pub points: Vec<DVector<f64>>,
    /// `flight_lengths[j] = |points[j+1] - points[j]|` cyclically.
    pub flight_lengths: Vec<f64>,
    /// Incidence angle at each reflection point (between the outgoing
    /// direction and the outward normal).
    pub angles: Vec<f64>,
    /// Total length of the closed trajectory.
    pub length: f64,
    pub primitive: bool,
}

impl PeriodicOrbit {
    pub fn period(&self) -> usize {
        self.points.len()
    }

    /// Unit direction of the flight leaving reflection point `j`.
    pub fn outgoing_direction(&self, j: usize) -> DVector<f64> {
        let m = self.points.len();
        (&self.points[(j + 1) % m] - &self.points[j]) / self.flight_lengths[j]
    }
}

/// Finds the unique closed billiard trajectory with the given cyclic
/// itinerary by damped Newton on the cyclic length functional, with a
/// gradient-descent fallback. Converged when the gradient infinity norm
/// falls below `tol`.
pub fn find_periodic_orbit(scene: &Scene, word: &Word, tol: f64) -> Result<PeriodicOrbit> {
    if !word.is_cyclic() {
        return Err(Error::Domain("periodic orbits need cyclic words".into()));
    }
    let syms = word.symbols();
    let m = syms.len();
    if syms.iter().any(|&s| s > scene.obstacle_count()) {
        return Err(Error::Domain(format!(
            "word {} references a missing obstacle",
            word.label()
        )));
    }
    let n = scene.dimension();
    let dof = n - 1;

    // Chart setup: point j is obstacle(syms[j]).boundary_point(R_j s(theta_j))
    // with the chart centered (theta = pi/2,...,pi/2) at the initial guess.
    let mut charts = Vec::with_capacity(m);
    for j in 0..m {
        let ob = scene.obstacle(syms[j]);
        let prev = scene.obstacle(syms[(j + m - 1) % m]);
        let next = scene.obstacle(syms[(j + 1) % m]);
        let midpoint = (prev.center() + next.center()) * 0.5;
        let p_init = ob.nearest_boundary_point(&midpoint);
        let u_init = ob.to_unit_sphere(&p_init);
        charts.push(rotation_onto(&chart_center(n), &u_init));
    }

    let point_at = |j: usize, theta: &[f64]| -> DVector<f64> {
        let (s, _) = sphere_chart(theta);
        scene.obstacle(syms[j]).boundary_point(&(&charts[j] * s))
    };
    let eval = |theta: &DVector<f64>| -> (f64, DVector<f64>) {
        let points: Vec<DVector<f64>> =
            (0..m).map(|j| point_at(j, theta.as_slice().chunks(dof).nth(j).unwrap())).collect();
        let mut length = 0.0;
        let mut grad = DVector::zeros(m * dof);
        let mut units = Vec::with_capacity(m);
        for j in 0..m {
            let diff = &points[(j + 1) % m] - &points[j];
            let d = diff.norm();
            length += d;
            units.push(diff / d);
        }
        for j in 0..m {
            // d length / d p_j = e_{j-1} - e_j.
            let dl_dp = &units[(j + m - 1) % m] - &units[j];
            let th = theta.as_slice().chunks(dof).nth(j).unwrap();
            let (_, jac) = sphere_chart(th);
            let ob = scene.obstacle(syms[j]);
            // d p / d theta = M R ds/dtheta with M the sqrt-inverse shape.
            for a in 0..dof {
                let ds = jac.column(a).into_owned();
                let dp = ob.boundary_differential(&(&charts[j] * ds));
                grad[j * dof + a] = dp.dot(&dl_dp);
            }
        }
        (length, grad)
    };

    let mut theta = DVector::from_element(m * dof, std::f64::consts::FRAC_PI_2);
    // The chart center maps to the initial point: set the last angle of each
    // block to 0 so s = chart center exactly.
    for j in 0..m {
        theta[j * dof + dof - 1] = 0.0;
    }
    // In the generic chart the center is s(pi/2, ..., pi/2, 0).
    let (mut length, mut grad) = eval(&theta);
    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..MAX_ITERATIONS {
        iterations = iter;
        let gnorm = grad.amax();
        if gnorm < tol {
            converged = true;
            break;
        }
        // FD Hessian of the analytic gradient.
        let dim = theta.len();
        let mut hess = DMatrix::zeros(dim, dim);
        let h = 1e-6;
        for c in 0..dim {
            let mut tp = theta.clone();
            tp[c] += h;
            let mut tm = theta.clone();
            tm[c] -= h;
            let (_, gp) = eval(&tp);
            let (_, gm) = eval(&tm);
            hess.set_column(c, &((gp - gm) / (2.0 * h)));
        }
        let hess = (&hess + hess.transpose()) * 0.5;

        let mut accepted = false;
        let mut tau = 0.0_f64;
        for _ in 0..12 {
            let damped = &hess + DMatrix::identity(dim, dim) * tau;
            if let Some(delta) = damped.lu().solve(&(-&grad)) {
                let cand = &theta + &delta;
                let (lc, gc) = eval(&cand);
                if lc < length || gc.amax() < 0.5 * gnorm {
                    theta = cand;
                    length = lc;
                    grad = gc;
                    accepted = true;
                    break;
                }
            }
            tau = if tau == 0.0 { 1e-8 } else { tau * 100.0 };
        }
        if !accepted {
            // Gradient descent fallback with backtracking.
            let mut step = 1.0 / (1.0 + grad.norm());
            for _ in 0..60 {
                let cand = &theta - &grad * step;
                let (lc, gc) = eval(&cand);
                if lc < length {
                    theta = cand;
                    length = lc;
                    grad = gc;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
        }
        if !accepted {
            break;
        }
    }
    if !converged {
        let gnorm = grad.amax();
        if gnorm >= tol {
            return Err(Error::Solver {
                context: format!("orbit solver stalled on word {}", word.label()),
                iterations,
                residual: gnorm,
            });
        }
    }

    let points: Vec<DVector<f64>> = (0..m)
        .map(|j| point_at(j, theta.as_slice().chunks(dof).nth(j).unwrap()))
        .collect();
    assemble_orbit(scene, word.clone(), points)
}

/// Validates the reflection law and gap bounds, and packages the orbit.
fn assemble_orbit(scene: &Scene, word: Word, points: Vec<DVector<f64>>) -> Result<PeriodicOrbit> {
    let m = points.len();
    let syms = word.symbols();
    let d0 = scene.min_gap();
    let mut flight_lengths = Vec::with_capacity(m);
    let mut units = Vec::with_capacity(m);
    for j in 0..m {
        let diff = &points[(j + 1) % m] - &points[j];
        let d = diff.norm();
        if d < d0 - 1e-9 {
            return Err(Error::Solver {
                context: format!(
                    "flight {j} of {} shorter than the minimal gap ({d:.9} < {d0:.9})",
                    word.label()
                ),
                iterations: 0,
                residual: d0 - d,
            });
        }
        flight_lengths.push(d);
        units.push(diff / d);
    }
    let mut angles = Vec::with_capacity(m);
    for j in 0..m {
        let ob = scene.obstacle(syms[j]);
        let nu = ob.normal(&points[j]);
        let incoming = &units[(j + m - 1) % m];
        let outgoing = &units[j];
        let residual = (outgoing - reflect(incoming, &nu)).norm();
        if residual > 1e-9 {
            return Err(Error::Solver {
                context: format!(
                    "reflection law violated at point {j} of {}",
                    word.label()
                ),
                iterations: 0,
                residual,
            });
        }
        let cos_phi = outgoing.dot(&nu).clamp(-1.0, 1.0);
        let phi = cos_phi.acos();
        if phi >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::Solver {
                context: format!("grazing reflection at point {j} of {}", word.label()),
                iterations: 0,
                residual: phi,
            });
        }
        angles.push(phi);
    }
    let length = flight_lengths.iter().sum();
    let primitive = word.is_primitive();
    Ok(PeriodicOrbit {
        word,
        points,
        flight_lengths,
        angles,
        length,
        primitive,
    })
}

/// Deterministic cyclic closure of a cylinder word: the word itself when the
/// wrap-around is admissible, otherwise the smallest appended symbol that
/// yields an admissible, primitive cyclic word (primitivity keeps the
/// shadowing orbit a genuine orbit of the extended word; without it, words
/// like 1-2-1 would close onto the doubled two-bounce orbit).
pub fn shadow_closure(word: &Word, k0: usize) -> Result<Word> {
    let syms = word.symbols();
    let n = syms.len();
    if n >= 2 && syms[n - 1] != syms[0] {
        return Word::cyclic(syms.to_vec());
    }
    let mut fallback = None;
    for extra in 1..=k0 {
        if extra == syms[n - 1] || extra == syms[0] {
            continue;
        }
        let mut ext = syms.to_vec();
        ext.push(extra);
        if let Ok(w) = Word::cyclic(ext) {
            if w.is_primitive() {
                return Ok(w);
            }
            fallback.get_or_insert(w);
        }
    }
    fallback.ok_or_else(|| Error::Domain(format!("word {} has no closure", word.label())))
}

/// Shadowing return time of a cylinder word: the first flight length of the
/// closed orbit for the word's deterministic cyclic closure.
pub fn cylinder_shadow_time(scene: &Scene, word: &Word) -> Result<f64> {
    let closed = shadow_closure(word, scene.obstacle_count())?;
    let orbit = find_periodic_orbit(scene, &closed, 1e-12)?;
    Ok(orbit.flight_lengths[0])
}

/// Empirical lower bound for the maximal incidence angle: the maximum angle
/// over all primitive necklaces with period up to `max_period`.
pub fn max_angle_estimate(scene: &Scene, max_period: usize) -> Result<f64> {
    if max_period < 2 {
        return Err(Error::Domain("max_period must be at least 2".into()));
    }
    let mut max_angle: f64 = 0.0;
    for period in 2..=max_period {
        for neck in primitive_necklaces(scene.obstacle_count(), period) {
            let orbit = find_periodic_orbit(scene, &neck.representative, 1e-12)?;
            for &phi in &orbit.angles {
                max_angle = max_angle.max(phi);
            }
        }
    }
    Ok(max_angle)
}

// --- spherical charts -------------------------------------------------------

/// Generalized spherical coordinates `theta in R^{n-1} -> s in S^{n-1}` and
/// the Jacobian `ds/dtheta` (n x (n-1)). Coordinate `i` is the sine prefix
/// product `sin(theta_0) ... sin(theta_{i-1})` times `cos(theta_i)`
/// (no cosine factor for the last coordinate).
fn sphere_chart(theta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let dof = theta.len();
    let n = dof + 1;
    let sin: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
    let cos: Vec<f64> = theta.iter().map(|t| t.cos()).collect();
    let mut s = DVector::zeros(n);
    let mut jac = DMatrix::zeros(n, dof);
    for i in 0..n {
        let prefix_len = i.min(dof);
        let tail = if i < dof { cos[i] } else { 1.0 };
        let mut prefix = 1.0;
        for k in 0..prefix_len {
            prefix *= sin[k];
        }
        s[i] = prefix * tail;
        for m in 0..dof {
            jac[(i, m)] = if i < dof && m == i {
                -prefix * sin[i]
            } else if m < prefix_len {
                let mut prod = 1.0;
                for k in 0..prefix_len {
                    prod *= if k == m { cos[k] } else { sin[k] };
                }
                prod * tail
            } else {
                0.0
            };
        }
    }
    (s, jac)
}

/// Chart center: `s(pi/2, ..., pi/2, 0)`.
fn chart_center(n: usize) -> DVector<f64> {
    let mut theta = vec![std::f64::consts::FRAC_PI_2; n - 1];
    theta[n - 2] = 0.0;
    sphere_chart(&theta).0
}

/// Orthogonal map sending unit vector `a` to unit vector `b`
/// (a double reflection; well-defined also near `b = -a`).
fn rotation_onto(a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let n = a.len();
    let sum = a + b;
    if sum.norm_squared() > 1e-12 {
        DMatrix::from_fn(n, n, |i, j| {
            2.0 * sum[i] * sum[j] / sum.norm_squared() - if i == j { 1.0 } else { 0.0 }
        })
    } else {
        // Antipodal: route through an intermediate direction.
        let mut c = DVector::zeros(n);
        c[if a[0].abs() < 0.9 { 0 } else { 1 }] = 1.0;
        let c = (&c - a * a.dot(&c)).normalize();
        rotation_onto(&c, b) * rotation_onto(a, &c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenes;

    fn std3() -> Scene {
        scenes::three_disks()
    }

    #[test]
    fn sphere_chart_matches_finite_differences() {
        for theta in [
            vec![0.7],
            vec![0.9, 0.4],
            vec![1.2, 0.8, -0.3],
        ] {
            let (s, jac) = sphere_chart(&theta);
            assert!((s.norm() - 1.0).abs() < 1e-13);
            let h = 1e-6;
            for m in 0..theta.len() {
                let mut tp = theta.clone();
                tp[m] += h;
                let mut tm = theta.clone();
                tm[m] -= h;
                let fd = (sphere_chart(&tp).0 - sphere_chart(&tm).0) / (2.0 * h);
                assert!(
                    (jac.column(m) - &fd).norm() < 1e-9,
                    "theta {theta:?} column {m}"
                );
            }
        }
    }

    #[test]
    fn two_bounce_orbit_is_the_shortest_segment() {
        let orbit =
            find_periodic_orbit(&std3(), &Word::cyclic(vec![1, 2]).unwrap(), 1e-12).unwrap();
        assert!((orbit.length - 8.0).abs() < 1e-9);
        assert!((&orbit.points[0] - DVector::from_vec(vec![1.0, 0.0])).norm() < 1e-9);
        assert!((&orbit.points[1] - DVector::from_vec(vec![5.0, 0.0])).norm() < 1e-9);
        assert!(orbit.primitive);
    }

    #[test]
    fn triangle_orbit_matches_symmetry_closed_form() {
        let orbit =
            find_periodic_orbit(&std3(), &Word::cyclic(vec![1, 2, 3]).unwrap(), 1e-12).unwrap();
        let expected = 18.0 - 3.0 * 3.0_f64.sqrt();
        assert!((orbit.length - expected).abs() < 1e-9, "{}", orbit.length);
        for &phi in &orbit.angles {
            assert!((phi - std::f64::consts::FRAC_PI_6).abs() < 1e-9);
        }
    }

    #[test]
    fn four_bounce_orbit_passes_invariants() {
        let orbit =
            find_periodic_orbit(&std3(), &Word::cyclic(vec![1, 2, 1, 3]).unwrap(), 1e-12).unwrap();
        assert!(orbit.length >= 16.0);
        // Residuals were checked during assembly; spot-check one manually.
        let nu = std3().obstacle(2).normal(&orbit.points[1]);
        let r = (orbit.outgoing_direction(1)
            - reflect(&orbit.outgoing_direction(0), &nu))
        .norm();
        assert!(r < 1e-9);
    }

    #[test]
    fn rotated_words_give_rotated_orbits() {
        let scene = std3();
        let w = Word::cyclic(vec![1, 2, 1, 3]).unwrap();
        let a = find_periodic_orbit(&scene, &w, 1e-12).unwrap();
        let b = find_periodic_orbit(&scene, &w.rotated(2), 1e-12).unwrap();
        assert!((a.length - b.length).abs() < 1e-10);
        assert!((&a.points[2] - &b.points[0]).norm() < 1e-8);
    }

    #[test]
    fn orientation_reversal_preserves_length() {
        let scene = std3();
        for word in [vec![1, 2, 3], vec![1, 2, 1, 3], vec![1, 2, 3, 1, 3]] {
            let w = Word::cyclic(word).unwrap();
            let a = find_periodic_orbit(&scene, &w, 1e-12).unwrap();
            let b = find_periodic_orbit(&scene, &w.reversed(), 1e-12).unwrap();
            assert!((a.length - b.length).abs() < 1e-10);
        }
    }

    #[test]
    fn solutions_are_local_minima_of_length() {
        let scene = std3();
        for period in 2..=4usize {
            for neck in primitive_necklaces(3, period) {
                let orbit = find_periodic_orbit(&scene, &neck.representative, 1e-12).unwrap();
                for j in 0..orbit.period() {
                    for delta in [1e-4, -1e-4] {
                        let mut pts = orbit.points.clone();
                        let ob = scene.obstacle(orbit.word.symbols()[j]);
                        let u = ob.to_unit_sphere(&pts[j]);
                        let angle = u[1].atan2(u[0]) + delta;
                        pts[j] = ob.boundary_point(&DVector::from_vec(vec![
                            angle.cos(),
                            angle.sin(),
                        ]));
                        let perturbed: f64 = (0..orbit.period())
                            .map(|i| (&pts[(i + 1) % orbit.period()] - &pts[i]).norm())
                            .sum();
                        assert!(
                            perturbed > orbit.length,
                            "perturbation decreased length for {}",
                            neck.representative.label()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn shadow_times_for_standard_words() {
        let scene = std3();
        let t12 = cylinder_shadow_time(&scene, &Word::linear(vec![1, 2]).unwrap()).unwrap();
        assert!((t12 - 4.0).abs() < 1e-9);
        let t123 = cylinder_shadow_time(&scene, &Word::linear(vec![1, 2, 3]).unwrap()).unwrap();
        assert!((t123 - (6.0 - 3.0_f64.sqrt())).abs() < 1e-9);
    }

    #[test]
    fn closure_appends_the_smallest_primitive_symbol() {
        let w = Word::linear(vec![1, 2, 1]).unwrap();
        let closed = shadow_closure(&w, 3).unwrap();
        // Appending 2 would give the non-primitive 1-2-1-2.
        assert_eq!(closed.label(), "1-2-1-3");
        let w2 = Word::linear(vec![2, 3, 2]).unwrap();
        assert_eq!(shadow_closure(&w2, 3).unwrap().label(), "2-3-2-1");
        let single = Word::linear(vec![2]).unwrap();
        assert_eq!(shadow_closure(&single, 3).unwrap().label(), "2-1");
        let already = Word::linear(vec![1, 2, 3]).unwrap();
        assert_eq!(shadow_closure(&already, 3).unwrap().label(), "1-2-3");
    }

    #[test]
    fn max_angle_estimates() {
        let scene = std3();
        let a2 = max_angle_estimate(&scene, 2).unwrap();
        assert!(a2 < 1e-6, "period-2 orbits are perpendicular, got {a2}");
        let a3 = max_angle_estimate(&scene, 3).unwrap();
        assert!((a3 - std::f64::consts::FRAC_PI_6).abs() < 1e-9);
        let a4 = max_angle_estimate(&scene, 4).unwrap();
        let a6 = max_angle_estimate(&scene, 6).unwrap();
        assert!(a6 >= a3 - 1e-12);
        assert!(a6 >= a4 - 1e-12);
    }

    #[test]
    fn orbits_in_three_dimensions() {
        let scene = scenes::three_spheres();
        let two = find_periodic_orbit(&scene, &Word::cyclic(vec![1, 2]).unwrap(), 1e-12).unwrap();
        assert!((two.length - 8.0).abs() < 1e-9);
        let tri =
            find_periodic_orbit(&scene, &Word::cyclic(vec![1, 2, 3]).unwrap(), 1e-12).unwrap();
        assert!((tri.length - (18.0 - 3.0 * 3.0_f64.sqrt())).abs() < 1e-9);
    }
}
