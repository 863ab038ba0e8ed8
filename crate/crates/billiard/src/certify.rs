//! Pinching and non-integrability certificates: the gap/curvature
//! inequality, the derived expansion exponents, the symmetric operator `P`
//! pairing unstable vectors with their images under `Phi`, and the
//! cross-validated analytic/finite-difference differentials of `Phi`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curvature::{unstable_curvature, Frame};
use crate::dynamics::{fd_jacobian, phi_map_vec, PhasePoint, DEFAULT_FD_STEP};
use crate::error::{Error, Result};
use crate::geometry::{shape_operator, Scene, SceneConstants};
use crate::orbits::find_periodic_orbit;
use crate::symbolic::Word;

/// Outcome of the gap/curvature inequality
/// `(1 + (d0+a) lambda0)^(d0+a) < (1 + d0 mu0)^(2 d0)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// Logarithms of the two sides, which stay finite when the powers
    /// overflow.
    pub log_lhs: f64,
    pub log_rhs: f64,
}

/// Evaluates the inequality in log space.
pub fn check_gap_curvature_inequality(c: &SceneConstants) -> ConditionCheck {
    let log_lhs = (c.d0 + c.a) * (1.0 + (c.d0 + c.a) * c.lambda0).ln();
    let log_rhs = 2.0 * c.d0 * (1.0 + c.d0 * c.mu0).ln();
    ConditionCheck {
        holds: log_lhs < log_rhs,
        lhs: log_lhs.exp(),
        rhs: log_rhs.exp(),
        log_lhs,
        log_rhs,
    }
}

/// Pinching exponents and margin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PinchingReport {
    /// Lower expansion exponent `ln(1 + d0 mu0) / (d0 + a)`.
    pub alpha0: f64,
    /// Upper expansion exponent `ln(1 + (d0+a) lambda0) / d0`.
    pub beta0: f64,
    /// `2 alpha0 - beta0`; positive exactly when the inequality holds.
    pub margin: f64,
    pub inequality_holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// The angle bound behind these constants is an empirical lower bound
    /// from finitely many orbits, not the supremum over the whole
    /// non-wandering set.
    pub phi0_empirical: bool,
}

/// Computes the pinching exponents from scene constants.
pub fn pinching_exponents(c: &SceneConstants) -> PinchingReport {
    let cond = check_gap_curvature_inequality(c);
    let alpha0 = (1.0 + c.d0 * c.mu0).ln() / (c.d0 + c.a);
    let beta0 = (1.0 + (c.d0 + c.a) * c.lambda0).ln() / c.d0;
    PinchingReport {
        alpha0,
        beta0,
        margin: 2.0 * alpha0 - beta0,
        inequality_holds: cond.holds,
        lhs: cond.lhs,
        rhs: cond.rhs,
        phi0_empirical: true,
    }
}

/// The symmetric operator
/// `P = 2H + 2L + 2 lambda (HL + LH + L^2 + lambda L H L)`.
pub fn nonintegrability_operator(h: &DMatrix<f64>, l: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let hl = h * l;
    let lh = l * h;
    let ll = l * l;
    let lhl = l * h * l;
    let p = h * 2.0 + l * 2.0 + (hl + lh + ll + lhl * lambda) * (2.0 * lambda);
    (&p + p.transpose()) * 0.5
}

/// Analytic differential of `Phi` at a perpendicular configuration,
/// restricted to the tangent blocks: with `H'` the boundary curvature at
/// the impact point,
/// `dPhi = [[I + 2l H', 2l I + 2l^2 H'], [-2H', -(I + 2l H')]]`.
pub fn dphi_analytic(hp: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let m = hp.nrows();
    let id = DMatrix::identity(m, m);
    let top_left = &id + hp * (2.0 * lambda);
    let top_right = &id * (2.0 * lambda) + hp * (2.0 * lambda * lambda);
    let bottom_left = hp * (-2.0);
    let bottom_right = -(&id + hp * (2.0 * lambda));
    let mut out = DMatrix::zeros(2 * m, 2 * m);
    out.view_mut((0, 0), (m, m)).copy_from(&top_left);
    out.view_mut((0, m), (m, m)).copy_from(&top_right);
    out.view_mut((m, 0), (m, m)).copy_from(&bottom_left);
    out.view_mut((m, m), (m, m)).copy_from(&bottom_right);
    out
}

/// The standard symplectic form on concatenated position/direction tangent
/// pairs: `dalpha((u, u~), (p, p~)) = -<u, p~> + <u~, p>`.
pub fn symplectic_form(first: &DVector<f64>, second: &DVector<f64>) -> f64 {
    let n = first.len() / 2;
    let mut value = 0.0;
    for i in 0..n {
        value += -first[i] * second[n + i] + first[n + i] * second[i];
    }
    value
}

/// Report of the symplectic non-integrability verification at a
/// perpendicular phase point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymplecticReport {
    pub lambda_used: f64,
    /// Boundary curvature at the impact point, in the tangent frame.
    pub h_matrix: Vec<Vec<f64>>,
    /// Unstable-front curvature at the base point, in the same frame.
    pub l_matrix: Vec<Vec<f64>>,
    pub p_matrix: Vec<Vec<f64>>,
    pub min_eig_p: f64,
    /// Largest pairwise disagreement of the three evaluation routes over
    /// the sampled unit vectors.
    pub max_abs_error: f64,
    /// Largest relative deviation between the analytic and
    /// finite-difference tangent blocks of `dPhi`.
    pub dphi_block_error: f64,
    /// Realized lower bound `min_eig(P) / (C (1 + C^2))` with `C` the
    /// measured operator norm of `dPhi`.
    pub mu_bound: f64,
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Verifies the non-integrability pairing on the perpendicular two-bounce
/// orbit between obstacles `pair.0` and `pair.1`: evaluates
/// `dalpha(v(u), dPhi v(u'))` through the operator `P`, through the
/// analytic `dPhi` blocks, and through a finite-difference `dPhi`, over
/// `samples` random unit pairs, and reports the spectral floor of `P`.
pub fn verify_nonintegrability(
    scene: &Scene,
    pair: (usize, usize),
    lambda: f64,
    samples: usize,
    seed: u64,
) -> Result<SymplecticReport> {
    let (i, j) = pair;
    let k0 = scene.obstacle_count();
    if i == j || i == 0 || j == 0 || i > k0 || j > k0 {
        return Err(Error::Domain(format!("invalid obstacle pair ({i}, {j})")));
    }
    let gap = scene.gap(i, j);
    if lambda <= 0.0 || lambda >= gap / 2.0 {
        return Err(Error::Domain(format!(
            "lambda = {lambda} outside (0, {})",
            gap / 2.0
        )));
    }

    // Perpendicular two-bounce orbit; sigma0 sits lambda before the impact
    // on K_j, moving along the common perpendicular.
    let word = Word::cyclic(vec![i, j])?;
    let orbit = find_periodic_orbit(scene, &word, 1e-12)?;
    let flight = orbit.flight_lengths[0];
    let direction = orbit.outgoing_direction(0);
    let impact = orbit.points[1].clone();
    let sigma0 = PhasePoint {
        position: &impact - &direction * lambda,
        direction: direction.clone(),
    };

    // Tangent frame at the impact point; the impact is perpendicular, so
    // the boundary tangent space and the front plane coincide.
    let obstacle = scene.obstacle(j);
    let normal = obstacle.normal(&impact);
    let frame = Frame::orthogonal_to(&normal);
    let h = shape_operator(obstacle, &impact, frame.basis())?;

    let plane = Frame::from_parts(direction.clone(), frame.basis().to_vec())?;
    let l_state = unstable_curvature(scene, &orbit, 0, flight - lambda)?;
    let l = l_state.matrix_in_frame(&plane)?;

    let p = nonintegrability_operator(&h, &l, lambda);
    let min_eig_p = p.clone().symmetric_eigen().eigenvalues.min();

    let analytic = dphi_analytic(&h, lambda);

    let map = |v: &DVector<f64>| -> Result<DVector<f64>> {
        let (x, xi) = PhasePoint::split_vector(v);
        let (g, eta) = phi_map_vec(scene, &x, &xi, lambda)?;
        let n = g.len();
        Ok(DVector::from_fn(2 * n, |r, _| {
            if r < n {
                g[r]
            } else {
                eta[r - n]
            }
        }))
    };
    let fd = fd_jacobian(map, &sigma0.to_vector(), DEFAULT_FD_STEP)?;

    // Blockwise comparison of the analytic and FD differentials on the
    // tangent frame.
    let n = scene.dimension();
    let m = n - 1;
    let basis_matrix = {
        let mut fmat = DMatrix::zeros(n, m);
        for (c, e) in frame.basis().iter().enumerate() {
            fmat.set_column(c, e);
        }
        fmat
    };
    let scale = analytic.abs().max();
    let mut block_err: f64 = 0.0;
    for bi in 0..2 {
        for bj in 0..2 {
            let sub = fd.view((bi * n, bj * n), (n, n)).into_owned();
            let reduced = basis_matrix.transpose() * sub * &basis_matrix;
            let ana = analytic.view((bi * m, bj * m), (m, m)).into_owned();
            block_err = block_err.max((&reduced - ana).abs().max() / scale);
        }
    }

    // Operator bound of dPhi, from the FD matrix.
    let c_bound = fd.clone().svd(false, false).singular_values.max();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = |rng: &mut ChaCha8Rng| -> DVector<f64> {
        loop {
            let v = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
            let norm = v.norm();
            if norm > 1e-3 {
                return v / norm;
            }
        }
    };
    let embed = |u: &DVector<f64>| -> DVector<f64> {
        // v(u) = (u, L u) in ambient coordinates.
        let pos = &basis_matrix * u;
        let dir = &basis_matrix * (&l * u);
        let mut out = DVector::zeros(2 * n);
        for r in 0..n {
            out[r] = pos[r];
            out[n + r] = dir[r];
        }
        out
    };
    let embed_frame = |u: &DVector<f64>| -> DVector<f64> {
        let lu = &l * u;
        let mut out = DVector::zeros(2 * m);
        for r in 0..m {
            out[r] = u[r];
            out[m + r] = lu[r];
        }
        out
    };

    let mut max_abs_error: f64 = 0.0;
    for _ in 0..samples.max(1) {
        let u = unit(&mut rng);
        let u2 = unit(&mut rng);
        let route_p = (&p * &u2).dot(&u);
        let w_frame = &analytic * embed_frame(&u2);
        let route_analytic = symplectic_form(&embed_frame(&u), &w_frame);
        let w_fd = &fd * embed(&u2);
        let route_fd = symplectic_form(&embed(&u), &w_fd);
        max_abs_error = max_abs_error
            .max((route_p - route_analytic).abs())
            .max((route_p - route_fd).abs())
            .max((route_analytic - route_fd).abs());
    }
    if max_abs_error > 1e-5 {
        return Err(Error::Verification(format!(
            "evaluation routes disagree by {max_abs_error:.3e} (tolerance 1e-5)"
        )));
    }

    let mu_bound = min_eig_p / (c_bound * (1.0 + c_bound * c_bound));
    Ok(SymplecticReport {
        lambda_used: lambda,
        h_matrix: matrix_rows(&h),
        l_matrix: matrix_rows(&l),
        p_matrix: matrix_rows(&p),
        min_eig_p,
        max_abs_error,
        dphi_block_error: block_err,
        mu_bound,
    })
}
