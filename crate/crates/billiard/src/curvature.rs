//! Curvature-operator evolution of unstable fronts along billiard
//! trajectories: the free-flight fractional-linear update, the reflection
//! update `B -> S B S + 2 cos(phi) V* N V`, the backward-limit fixed
//! curvature of unstable manifolds, and the per-bounce expansion factors
//! whose product gives the reciprocal unstable expansion of the period map.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dynamics::{fd_jacobian, flow_vec, reflect, PhasePoint, TANGENCY_THRESHOLD};
use crate::error::{Error, Result};
use crate::geometry::{
    orthonormal_complement, shape_operator_ambient, BoundaryHit, Scene,
};
use crate::orbits::PeriodicOrbit;

/// Orthonormal frame of the hyperplane orthogonal to a reference direction.
#[derive(Debug, Clone)]
pub struct Frame {
    reference: DVector<f64>,
    basis: Vec<DVector<f64>>,
}

impl Frame {
    /// Deterministic frame orthogonal to a unit direction.
    pub fn orthogonal_to(reference: &DVector<f64>) -> Frame {
        Frame {
            basis: orthonormal_complement(reference),
            reference: reference.clone(),
        }
    }

    pub fn from_parts(reference: DVector<f64>, basis: Vec<DVector<f64>>) -> Result<Frame> {
        let f = Frame { reference, basis };
        f.validate()?;
        Ok(f)
    }

    pub fn reference(&self) -> &DVector<f64> {
        &self.reference
    }

    pub fn basis(&self) -> &[DVector<f64>] {
        &self.basis
    }

    pub fn validate(&self) -> Result<()> {
        for (k, e) in self.basis.iter().enumerate() {
            if (e.norm() - 1.0).abs() > 1e-13 || e.dot(&self.reference).abs() > 1e-13 {
                return Err(Error::Domain(format!(
                    "frame vector {k} violates orthonormality"
                )));
            }
            for f in self.basis.iter().skip(k + 1) {
                if e.dot(f).abs() > 1e-13 {
                    return Err(Error::Domain("frame vectors not orthogonal".into()));
                }
            }
        }
        Ok(())
    }

    /// Image frame under the boundary reflection `S w = w - 2 <w, nu> nu`.
    fn reflected(&self, normal: &DVector<f64>) -> Frame {
        let mut frame = Frame {
            reference: reflect(&self.reference, normal),
            basis: self.basis.iter().map(|e| reflect(e, normal)).collect(),
        };
        // S is an isometry, so drift is pure roundoff; re-orthonormalize
        // only if it ever exceeds 1e-12.
        if frame.drift() > 1e-12 {
            frame.gram_schmidt();
        }
        frame
    }

    fn drift(&self) -> f64 {
        let mut worst: f64 = (self.reference.norm() - 1.0).abs();
        for (k, e) in self.basis.iter().enumerate() {
            worst = worst.max((e.norm() - 1.0).abs());
            worst = worst.max(e.dot(&self.reference).abs());
            for f in self.basis.iter().skip(k + 1) {
                worst = worst.max(e.dot(f).abs());
            }
        }
        worst
    }

    fn gram_schmidt(&mut self) {
        self.reference = self.reference.normalize();
        for k in 0..self.basis.len() {
            let mut v = self.basis[k].clone();
            v -= &self.reference * v.dot(&self.reference);
            for l in 0..k {
                let b = self.basis[l].clone();
                v -= &b * v.dot(&b);
            }
            self.basis[k] = v.normalize();
        }
    }

    /// Change-of-basis matrix from `self` coordinates to `other` coordinates;
    /// both frames must span the same hyperplane.
    pub fn coordinates_in(&self, other: &Frame) -> Result<DMatrix<f64>> {
        if self.reference.dot(&other.reference).abs() < 1.0 - 1e-9 {
            return Err(Error::Domain(
                "frames span different hyperplanes".into(),
            ));
        }
        let m = self.basis.len();
        Ok(DMatrix::from_fn(m, m, |k, l| {
            other.basis[k].dot(&self.basis[l])
        }))
    }
}

/// Symmetric curvature operator of a front, expressed in an orthonormal
/// frame of the hyperplane orthogonal to the flow direction.
#[derive(Debug, Clone)]
pub struct CurvatureState {
    pub matrix: DMatrix<f64>,
    pub frame: Frame,
    pub base: PhasePoint,
}

impl CurvatureState {
    /// The operator matrix re-expressed in another frame of the same plane.
    pub fn matrix_in_frame(&self, target: &Frame) -> Result<DMatrix<f64>> {
        let o = self.frame.coordinates_in(target)?;
        Ok(&o * &self.matrix * o.transpose())
    }

    /// Eigenvalues of the curvature operator, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .matrix
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }
}

/// Free flight of length `d`: `B -> B (I + d B)^{-1}`, computed in the
/// eigenbasis; the frame rides along unchanged.
pub fn free_flight_update(state: &CurvatureState, d: f64) -> Result<CurvatureState> {
    if d <= 0.0 {
        return Err(Error::Domain(format!("flight length {d} must be positive")));
    }
    let eig = state.matrix.clone().symmetric_eigen();
    for &lam in eig.eigenvalues.iter() {
        if (1.0 + d * lam).abs() < 1e-14 {
            return Err(Error::DegenerateFront(format!(
                "I + dB singular at eigenvalue {lam}"
            )));
        }
    }
    let updated = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l / (1.0 + d * l)))
        * eig.eigenvectors.transpose();
    Ok(CurvatureState {
        matrix: updated,
        frame: state.frame.clone(),
        base: PhasePoint {
            position: &state.base.position + &state.base.direction * d,
            direction: state.base.direction.clone(),
        },
    })
}

/// Reflection update at a boundary hit. The incoming state's reference
/// direction must be the incoming flight direction; the returned state sits
/// at the hit point with the reflected direction, the frame mapped by the
/// boundary symmetry `S`, and the matrix updated by
/// `B -> S B^- S + 2 cos(phi) V* N V` (the conjugation is the identity on
/// coordinates in the transported frame).
pub fn collision_update(
    scene: &Scene,
    state: &CurvatureState,
    hit: &BoundaryHit,
) -> Result<CurvatureState> {
    if hit.cos_phi < TANGENCY_THRESHOLD {
        return Err(Error::DegenerateFront(format!(
            "tangential reflection, cos_phi = {:.3e}",
            hit.cos_phi
        )));
    }
    if (&state.base.position - &hit.point).norm() > 1e-6 {
        return Err(Error::Domain(
            "curvature state is not based at the hit point".into(),
        ));
    }
    let nu = &hit.normal;
    let xi_out = reflect(&state.base.direction, nu).normalize();
    let cos_phi = xi_out.dot(nu);
    let frame = state.frame.reflected(nu);
    let m = frame.basis.len();
    let n_op = shape_operator_ambient(scene.obstacle(hit.obstacle_index), &hit.point);
    // Matrix of V* N V in the reflected frame: V projects the plane
    // orthogonal to the outgoing direction onto the boundary tangent space
    // along xi_out; V* projects back along the normal.
    let mut vnv = DMatrix::zeros(m, m);
    for l in 0..m {
        let e = &frame.basis[l];
        let v_e = e - &xi_out * (e.dot(nu) / cos_phi);
        let n_ve = &n_op * v_e;
        let vstar = &n_ve - nu * (n_ve.dot(&xi_out) / cos_phi);
        for k in 0..m {
            vnv[(k, l)] = frame.basis[k].dot(&vstar);
        }
    }
    let vnv = (&vnv + vnv.transpose()) * 0.5;
    let matrix = &state.matrix + vnv * (2.0 * cos_phi);
    Ok(CurvatureState {
        matrix,
        frame,
        base: PhasePoint {
            position: hit.point.clone(),
            direction: xi_out,
        },
    })
}

/// Synthetic boundary hit at reflection point `j` of an orbit, with the
/// incoming direction implied by the orbit.
fn orbit_hit(scene: &Scene, orbit: &PeriodicOrbit, j: usize) -> BoundaryHit {
    let m = orbit.period();
    let point = orbit.points[j].clone();
    let normal = scene.obstacle(orbit.word.symbols()[j]).normal(&point);
    let incoming = orbit.outgoing_direction((j + m - 1) % m);
    BoundaryHit {
        obstacle_index: orbit.word.symbols()[j],
        point,
        time: orbit.flight_lengths[(j + m - 1) % m],
        normal: normal.clone(),
        cos_phi: -incoming.dot(&normal),
    }
}

/// Post-collision curvature states at every bounce of one period, starting
/// from the converged unstable curvature at bounce 0.
fn converged_period_states(
    scene: &Scene,
    orbit: &PeriodicOrbit,
    seed: f64,
) -> Result<Vec<CurvatureState>> {
    let m = orbit.period();
    let n = scene.dimension();
    let dir0 = orbit.outgoing_direction(0);
    let frame0 = Frame::orthogonal_to(&dir0);
    let mut state = CurvatureState {
        matrix: DMatrix::identity(n - 1, n - 1) * seed,
        frame: frame0.clone(),
        base: PhasePoint {
            position: orbit.points[0].clone(),
            direction: dir0,
        },
    };
    let mut previous: Option<DMatrix<f64>> = None;
    for _period in 0..200 {
        for j in 0..m {
            state = free_flight_update(&state, orbit.flight_lengths[j])?;
            state = collision_update(scene, &state, &orbit_hit(scene, orbit, (j + 1) % m))?;
        }
        let in_initial_frame = state.matrix_in_frame(&frame0)?;
        if let Some(prev) = &previous {
            if (&in_initial_frame - prev).abs().max() < 1e-12 {
                // Converged: collect the states of one more period.
                let mut states = Vec::with_capacity(m);
                states.push(state.clone());
                for j in 0..m {
                    state = free_flight_update(&state, orbit.flight_lengths[j])?;
                    state =
                        collision_update(scene, &state, &orbit_hit(scene, orbit, (j + 1) % m))?;
                    if j + 1 < m {
                        states.push(state.clone());
                    }
                }
                return Ok(states);
            }
        }
        previous = Some(in_initial_frame);
    }
    Err(Error::Solver {
        context: "unstable curvature iteration did not converge".into(),
        iterations: 200,
        residual: f64::NAN,
    })
}

fn min_scene_curvature(scene: &Scene) -> f64 {
    scene
        .obstacles()
        .iter()
        .map(|ob| ob.curvature_range().0)
        .fold(f64::INFINITY, f64::min)
}

/// Curvature operator of the local unstable manifold along a periodic
/// orbit: the backward-limit fixed point of the period map on curvature
/// operators, reported just after reflection `at_index` and advanced by
/// `flight_offset` along the following flight.
pub fn unstable_curvature(
    scene: &Scene,
    orbit: &PeriodicOrbit,
    at_index: usize,
    flight_offset: f64,
) -> Result<CurvatureState> {
    unstable_curvature_seeded(
        scene,
        orbit,
        at_index,
        flight_offset,
        min_scene_curvature(scene),
    )
}

/// `unstable_curvature` with an explicit seed curvature. The limit does not
/// depend on the seed (the period map is a strict contraction on positive
/// definite operators); exposed for seed-independence checks.
pub fn unstable_curvature_seeded(
    scene: &Scene,
    orbit: &PeriodicOrbit,
    at_index: usize,
    flight_offset: f64,
    seed: f64,
) -> Result<CurvatureState> {
    let m = orbit.period();
    if at_index >= m {
        return Err(Error::Domain(format!(
            "bounce index {at_index} out of range for period {m}"
        )));
    }
    if flight_offset < 0.0 || flight_offset >= orbit.flight_lengths[at_index] {
        return Err(Error::Domain(format!(
            "flight offset {flight_offset} outside [0, {})",
            orbit.flight_lengths[at_index]
        )));
    }
    let states = converged_period_states(scene, orbit, seed)?;
    let state = states[at_index].clone();
    if flight_offset > 0.0 {
        free_flight_update(&state, flight_offset)
    } else {
        Ok(state)
    }
}

/// Per-bounce data entering the expansion product.
#[derive(Debug, Clone, Serialize)]
pub struct BounceRecord {
    /// Flight length leaving this bounce.
    pub d: f64,
    /// Incidence angle at this bounce.
    pub phi: f64,
    /// Eigenvalues of the post-collision curvature operator, ascending.
    pub b_eigenvalues: Vec<f64>,
    /// Normal curvature `<u, B u>` in the evolved front direction.
    pub k: f64,
    /// `|B u|` for the unit evolved front direction.
    pub b_u_norm: f64,
    /// Positive root of `(1 + d l)^2 = 1 + 2 d k + d^2 |B u|^2`.
    pub ell: f64,
    /// Contraction factor `1 / (1 + d l)`.
    pub delta: f64,
}

/// Expansion factors along a periodic orbit.
#[derive(Debug, Clone, Serialize)]
pub struct ExpansionReport {
    pub bounces: Vec<BounceRecord>,
    /// Product of all `delta` factors: the reciprocal unstable expansion of
    /// the `periods`-fold period map along the evolved front direction.
    pub product: f64,
}

impl ExpansionReport {
    pub fn ell(&self) -> Vec<f64> {
        self.bounces.iter().map(|b| b.ell).collect()
    }

    pub fn delta(&self) -> Vec<f64> {
        self.bounces.iter().map(|b| b.delta).collect()
    }
}

/// Positive root `l` of `(1 + d l)^2 = 1 + 2 d k + d^2 w2` together with the
/// factor `1/(1 + d l)`; `w2 = |B u|^2`.
pub(crate) fn ell_delta(d: f64, k: f64, w2: f64) -> (f64, f64) {
    let rhs = 1.0 + 2.0 * d * k + d * d * w2;
    let root = rhs.sqrt();
    let ell = (root - 1.0) / d;
    (ell, 1.0 / root)
}

/// Computes the per-bounce front curvatures `k_j`, the growth rates `l_j`
/// and the contraction factors `delta_j` over `periods` periods of the
/// orbit, evolving the front tangent direction from the unstable
/// eigendirection of the period map. In the transported frames collisions
/// act as the identity on front tangents, so the direction evolves only by
/// `u -> (I + d B) u` along flights.
pub fn expansion_factors(
    scene: &Scene,
    orbit: &PeriodicOrbit,
    periods: usize,
) -> Result<ExpansionReport> {
    if periods == 0 {
        return Err(Error::Domain("periods must be at least 1".into()));
    }
    let m = orbit.period();
    let dim = scene.dimension() - 1;
    let states = converged_period_states(scene, orbit, min_scene_curvature(scene))?;

    // Period map on front tangents in transported coordinates; the frame
    // returns to a (possibly rotated) basis of the initial plane, so close
    // the loop with the change of basis back to the initial frame.
    let mut period_map = DMatrix::identity(dim, dim);
    for j in 0..m {
        let step = DMatrix::identity(dim, dim) + &states[j].matrix * orbit.flight_lengths[j];
        period_map = step * period_map;
    }
    let mut end_frame = states[0].frame.clone();
    for j in 0..m {
        end_frame = end_frame.reflected(&orbit_hit(scene, orbit, (j + 1) % m).normal);
    }
    let back = end_frame.coordinates_in(&states[0].frame)?;
    let closed_map = &back * &period_map;
    let mut u = leading_eigenvector(&closed_map);

    let mut bounces = Vec::with_capacity(periods * m);
    let mut product = 1.0;
    for _ in 0..periods {
        for j in 0..m {
            let d = orbit.flight_lengths[j];
            let matrix = &states[j].matrix;
            let uhat = u.normalize();
            let w = matrix * &uhat;
            let k = uhat.dot(&w);
            let (ell, delta) = ell_delta(d, k, w.norm_squared());
            let mut eigs: Vec<f64> = matrix
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .collect();
            eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            bounces.push(BounceRecord {
                d,
                phi: orbit.angles[j],
                b_eigenvalues: eigs,
                k,
                b_u_norm: w.norm(),
                ell,
                delta,
            });
            product *= delta;
            u = (DMatrix::identity(dim, dim) + matrix * d) * uhat;
        }
        // The frame returns to the initial plane rotated by the loop
        // holonomy; map the evolved direction back to the coordinates the
        // recorded matrices use before the next period.
        u = &back * u;
    }
    Ok(ExpansionReport { bounces, product })
}

fn leading_eigenvector(map: &DMatrix<f64>) -> DVector<f64> {
    let dim = map.nrows();
    let mut v = DVector::from_element(dim, 1.0).normalize();
    for _ in 0..500 {
        let w = map * &v;
        let norm = w.norm();
        if norm == 0.0 {
            break;
        }
        let w = w / norm;
        if (&w - &v).norm() < 1e-14 || (&w + &v).norm() < 1e-14 {
            return w;
        }
        v = w;
    }
    v
}

/// Finite-difference oracle for the unstable expansion: the largest-modulus
/// eigenvalue of the central-difference Jacobian of the
/// time-`periods * l(gamma)` flow map, evaluated at the midpoint of the
/// orbit's first flight (clear of all reflections).
pub fn fd_period_expansion(
    scene: &Scene,
    orbit: &PeriodicOrbit,
    periods: usize,
    step: f64,
) -> Result<f64> {
    let m = orbit.period();
    let total_time = orbit.length * periods as f64;
    let base = PhasePoint {
        position: &orbit.points[0] + orbit.outgoing_direction(0) * (0.5 * orbit.flight_lengths[0]),
        direction: orbit.outgoing_direction(0),
    };
    let expected = periods * m;
    let map = |v: &DVector<f64>| -> Result<DVector<f64>> {
        let (pos, vel) = PhasePoint::split_vector(v);
        let (p, w) = flow_vec(scene, &pos, &vel, total_time, Some(expected))?;
        let n = p.len();
        Ok(DVector::from_fn(2 * n, |i, _| {
            if i < n {
                p[i]
            } else {
                w[i - n]
            }
        }))
    };
    let jac = fd_jacobian(map, &base.to_vector(), step)?;
    let eigs = jac.complex_eigenvalues();
    Ok(eigs.iter().map(|z| z.norm()).fold(0.0, f64::max))
}
