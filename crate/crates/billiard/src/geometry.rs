//! Obstacle scenes: strictly convex quadric bodies, exact ray casting,
//! boundary differential geometry, and scene-level constants including the
//! no-eclipse certificate.
//!
//! Obstacles are quadrics `{x : (x-c)^T A (x-c) = 1}` with `A` symmetric
//! positive definite (a sphere when `A = r^-2 I`). This keeps ray
//! intersections closed-form and the shape operator analytic.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum advance along a ray for a boundary hit to count.
pub const MIN_HIT_TIME: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Sphere { radius: f64 },
    Ellipsoid,
}

/// A strictly convex quadric body `{x : (x-c)^T A (x-c) <= 1}`.
#[derive(Debug, Clone)]
pub struct Obstacle {
    center: DVector<f64>,
    shape: DMatrix<f64>,
    kind: Kind,
    // Eigendecomposition of the shape matrix, cached for projections and
    // boundary parametrization: shape = evecs * diag(evals) * evecs^T.
    evals: DVector<f64>,
    evecs: DMatrix<f64>,
    sqrt_inv: DMatrix<f64>,
}

impl Obstacle {
    /// Builds an obstacle from an arbitrary SPD shape matrix.
    pub fn new(center: DVector<f64>, shape: DMatrix<f64>) -> Result<Self> {
        let n = center.len();
        if shape.nrows() != n || shape.ncols() != n {
            return Err(Error::Scene(format!(
                "shape matrix is {}x{}, expected {}x{}",
                shape.nrows(),
                shape.ncols(),
                n,
                n
            )));
        }
        let asym = (&shape - shape.transpose()).abs().max();
        if asym > 1e-12 * shape.abs().max().max(1.0) {
            return Err(Error::Scene(format!(
                "shape matrix not symmetric (asymmetry {asym:.3e})"
            )));
        }
        let sym = (shape.clone() + shape.transpose()) * 0.5;
        let eig = sym.clone().symmetric_eigen();
        let min_eval = eig.eigenvalues.min();
        if min_eval <= 0.0 {
            return Err(Error::Scene(format!(
                "shape matrix not positive definite (min eigenvalue {min_eval:.3e})"
            )));
        }
        let sqrt_inv = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(|d| 1.0 / d.sqrt()))
            * eig.eigenvectors.transpose();
        // Detect spheres so gap and curvature computations can use closed forms.
        let r2 = n as f64 / eig.eigenvalues.iter().sum::<f64>();
        let kind = if eig
            .eigenvalues
            .iter()
            .all(|&d| (d * r2 - 1.0).abs() < 1e-12)
        {
            Kind::Sphere { radius: r2.sqrt() }
        } else {
            Kind::Ellipsoid
        };
        Ok(Obstacle {
            center,
            shape: sym,
            kind,
            evals: eig.eigenvalues,
            evecs: eig.eigenvectors,
            sqrt_inv,
        })
    }

    /// Ball of the given radius.
    pub fn sphere(center: DVector<f64>, radius: f64) -> Result<Self> {
        if radius <= 0.0 {
            return Err(Error::Scene(format!("radius {radius} must be positive")));
        }
        let n = center.len();
        Obstacle::new(center, DMatrix::identity(n, n) / (radius * radius))
    }

    /// Axis-aligned ellipsoid with the given semi-axes, optionally rotated.
    /// `rotation` maps body coordinates to world coordinates.
    pub fn ellipsoid(
        center: DVector<f64>,
        semi_axes: &[f64],
        rotation: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = center.len();
        if semi_axes.len() != n {
            return Err(Error::Scene(format!(
                "{} semi-axes for dimension {}",
                semi_axes.len(),
                n
            )));
        }
        if semi_axes.iter().any(|&a| a <= 0.0) {
            return Err(Error::Scene("semi-axes must be positive".into()));
        }
        let diag = DMatrix::from_diagonal(&DVector::from_iterator(
            n,
            semi_axes.iter().map(|&a| 1.0 / (a * a)),
        ));
        let shape = match rotation {
            Some(rot) => {
                if rot.nrows() != n || rot.ncols() != n {
                    return Err(Error::Scene("rotation matrix has wrong size".into()));
                }
                let orth = (&rot * rot.transpose() - DMatrix::identity(n, n)).abs().max();
                if orth > 1e-9 {
                    return Err(Error::Scene(format!(
                        "rotation matrix not orthogonal (residual {orth:.3e})"
                    )));
                }
                &rot * diag * rot.transpose()
            }
            None => diag,
        };
        Obstacle::new(center, shape)
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    pub fn dimension(&self) -> usize {
        self.center.len()
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self.kind, Kind::Sphere { .. })
    }

    pub fn sphere_radius(&self) -> Option<f64> {
        match self.kind {
            Kind::Sphere { radius } => Some(radius),
            Kind::Ellipsoid => None,
        }
    }

    pub fn diameter(&self) -> f64 {
        2.0 / self.evals.min().sqrt()
    }

    /// Value of the defining quadratic form; boundary points give 1.
    pub fn quad(&self, point: &DVector<f64>) -> f64 {
        let d = point - &self.center;
        (self.shape.clone() * &d).dot(&d)
    }

    pub fn contains(&self, point: &DVector<f64>) -> bool {
        self.quad(point) <= 1.0
    }

    /// Outward unit normal at a boundary point.
    pub fn normal(&self, point: &DVector<f64>) -> DVector<f64> {
        let g = self.shape.clone() * (point - &self.center);
        let norm = g.norm();
        g / norm
    }

    /// Maps a unit direction to the boundary point `c + A^{-1/2} u`.
    pub fn boundary_point(&self, unit: &DVector<f64>) -> DVector<f64> {
        &self.center + &self.sqrt_inv * unit
    }

    /// Differential of `boundary_point`: `A^{-1/2} w`.
    pub fn boundary_differential(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.sqrt_inv * w
    }

    /// Inverse of `boundary_point`: the unit-sphere preimage `A^{1/2} (p - c)`
    /// of a boundary point, normalized against roundoff.
    pub fn to_unit_sphere(&self, point: &DVector<f64>) -> DVector<f64> {
        let w = self.evecs.transpose() * (point - &self.center);
        let scaled = DVector::from_iterator(
            w.len(),
            w.iter().zip(self.evals.iter()).map(|(wi, di)| wi * di.sqrt()),
        );
        (&self.evecs * scaled).normalize()
    }

    /// Euclidean projection of a point onto the body (identity inside).
    /// Returns the projected point and the distance to it.
    pub fn project(&self, point: &DVector<f64>) -> (DVector<f64>, f64) {
        let w = self.evecs.transpose() * (point - &self.center);
        let q: f64 = w
            .iter()
            .zip(self.evals.iter())
            .map(|(wi, di)| di * wi * wi)
            .sum();
        if q <= 1.0 {
            return (point.clone(), 0.0);
        }
        // Solve sum d_i w_i^2 / (1 + mu d_i)^2 = 1 for mu > 0; g is strictly
        // decreasing so Newton with a bisection safeguard always converges.
        let g = |mu: f64| -> f64 {
            w.iter()
                .zip(self.evals.iter())
                .map(|(wi, di)| di * wi * wi / (1.0 + mu * di).powi(2))
                .sum::<f64>()
                - 1.0
        };
        let mut lo = 0.0;
        let mut hi = 1.0 / self.evals.min();
        while g(hi) > 0.0 {
            hi *= 2.0;
        }
        let mut mu = 0.5 * hi;
        for _ in 0..200 {
            let val = g(mu);
            if val.abs() < 1e-15 {
                break;
            }
            if val > 0.0 {
                lo = mu;
            } else {
                hi = mu;
            }
            let dg: f64 = w
                .iter()
                .zip(self.evals.iter())
                .map(|(wi, di)| -2.0 * di * di * wi * wi / (1.0 + mu * di).powi(3))
                .sum();
            let newton = mu - val / dg;
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - mu).abs() < 1e-16 * (1.0 + mu) || hi - lo < 1e-16 * (1.0 + hi) {
                mu = next;
                break;
            }
            mu = next;
        }
        let proj_local = DVector::from_iterator(
            w.len(),
            w.iter()
                .zip(self.evals.iter())
                .map(|(wi, di)| wi / (1.0 + mu * di)),
        );
        let proj = &self.center + &self.evecs * proj_local;
        let dist = (point - &proj).norm();
        (proj, dist)
    }

    /// Nearest boundary point to an exterior point. Interior points get a
    /// boundary point along the outward gradient direction, which is exact
    /// for spheres and an approximation for ellipsoids (adequate for the
    /// initial guesses this is used for).
    pub fn nearest_boundary_point(&self, point: &DVector<f64>) -> DVector<f64> {
        let (p, d) = self.project(point);
        if d > 0.0 {
            return p;
        }
        // Interior point: walk out along the gradient direction.
        let dir = {
            let g = self.shape.clone() * (point - &self.center);
            let norm = g.norm();
            if norm < 1e-14 {
                let mut e = DVector::zeros(self.dimension());
                e[0] = 1.0;
                e
            } else {
                g / norm
            }
        };
        // Scale the local direction so the result lands exactly on the quadric.
        let local = self.evecs.transpose() * ((point + &dir) - &self.center);
        let q: f64 = local
            .iter()
            .zip(self.evals.iter())
            .map(|(wi, di)| di * wi * wi)
            .sum();
        &self.center + self.evecs.clone() * (local / q.sqrt())
    }

    /// Closed-form principal curvature extremes over the whole boundary
    /// (attained at axis points for quadrics).
    pub fn curvature_range(&self) -> (f64, f64) {
        (self.min_curvature(), self.max_curvature())
    }

    fn min_curvature(&self) -> f64 {
        match self.kind {
            Kind::Sphere { radius } => 1.0 / radius,
            // a_min / a_max^2 in terms of eigenvalues d = 1/a^2:
            // kappa_min = sqrt(d_max) * d_min / d_max = d_min / sqrt(d_max).
            Kind::Ellipsoid => self.evals.min() / self.evals.max().sqrt(),
        }
    }

    fn max_curvature(&self) -> f64 {
        match self.kind {
            Kind::Sphere { radius } => 1.0 / radius,
            Kind::Ellipsoid => self.evals.max() / self.evals.min().sqrt(),
        }
    }
}

/// The scene: dimension and an ordered list of pairwise disjoint obstacles.
#[derive(Debug, Clone)]
pub struct Scene {
    dimension: usize,
    obstacles: Vec<Obstacle>,
    // gaps[i][j] = dist(K_{i+1}, K_{j+1}) for i < j, cached at construction.
    gaps: Vec<Vec<f64>>,
}

impl Scene {
    pub fn new(dimension: usize, obstacles: Vec<Obstacle>) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::Scene(format!("dimension {dimension} < 2")));
        }
        if obstacles.len() < 3 {
            return Err(Error::Scene(format!(
                "{} obstacles, need at least 3",
                obstacles.len()
            )));
        }
        for (i, ob) in obstacles.iter().enumerate() {
            if ob.dimension() != dimension {
                return Err(Error::Scene(format!(
                    "obstacle {} has dimension {}, scene has {}",
                    i + 1,
                    ob.dimension(),
                    dimension
                )));
            }
        }
        let k = obstacles.len();
        let mut gaps = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in (i + 1)..k {
                let d = body_gap(&obstacles[i], &obstacles[j]);
                if d <= 0.0 {
                    return Err(Error::Scene(format!(
                        "obstacles {} and {} are not disjoint (gap {d:.3e})",
                        i + 1,
                        j + 1
                    )));
                }
                gaps[i][j] = d;
                gaps[j][i] = d;
            }
        }
        Ok(Scene {
            dimension,
            obstacles,
            gaps,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn obstacle_count(&self) -> usize {
        self.obstacles.len()
    }

    /// Obstacle by 1-based symbol index.
    pub fn obstacle(&self, symbol: usize) -> &Obstacle {
        &self.obstacles[symbol - 1]
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    /// Gap between two obstacles, by 1-based symbol indices.
    pub fn gap(&self, i: usize, j: usize) -> f64 {
        self.gaps[i - 1][j - 1]
    }

    pub fn min_gap(&self) -> f64 {
        let k = self.obstacles.len();
        let mut d = f64::INFINITY;
        for i in 0..k {
            for j in (i + 1)..k {
                d = d.min(self.gaps[i][j]);
            }
        }
        d
    }

    pub fn max_gap(&self) -> f64 {
        let k = self.obstacles.len();
        let mut d: f64 = 0.0;
        for i in 0..k {
            for j in (i + 1)..k {
                d = d.max(self.gaps[i][j]);
            }
        }
        d
    }

    pub fn max_diameter(&self) -> f64 {
        self.obstacles
            .iter()
            .map(Obstacle::diameter)
            .fold(0.0, f64::max)
    }

    /// True when the point lies strictly inside some obstacle
    /// (beyond a small tolerance).
    pub fn inside_any_obstacle(&self, point: &DVector<f64>) -> bool {
        self.obstacles.iter().any(|ob| ob.quad(point) < 1.0 - 1e-9)
    }

    /// Parses the scene JSON format.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: SceneFile = serde_json::from_str(text)?;
        Scene::try_from(file)
    }
}

/// First boundary intersection of a ray.
#[derive(Debug, Clone)]
pub struct BoundaryHit {
    /// 1-based obstacle symbol.
    pub obstacle_index: usize,
    pub point: DVector<f64>,
    /// Ray parameter (flight length for unit directions).
    pub time: f64,
    pub normal: DVector<f64>,
    /// Cosine of the angle between the reflected direction and the normal.
    pub cos_phi: f64,
}

/// Casts a ray and returns the first boundary hit strictly ahead, or `None`
/// when the ray escapes to infinity.
pub fn ray_cast(
    scene: &Scene,
    start: &DVector<f64>,
    direction: &DVector<f64>,
) -> Result<Option<BoundaryHit>> {
    if (direction.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "ray direction norm {:.3e} is not 1",
            direction.norm()
        )));
    }
    for (i, ob) in scene.obstacles.iter().enumerate() {
        if ob.quad(start) < 1.0 - 1e-9 {
            return Err(Error::Domain(format!(
                "ray start lies inside obstacle {}",
                i + 1
            )));
        }
    }
    Ok(ray_cast_raw(scene, start, direction))
}

/// Ray cast without precondition checks; tolerates non-unit directions
/// (the ray is `start + t * direction`, so `time` is the ray parameter).
pub(crate) fn ray_cast_raw(
    scene: &Scene,
    start: &DVector<f64>,
    direction: &DVector<f64>,
) -> Option<BoundaryHit> {
    let mut best: Option<(usize, f64)> = None;
    for (i, ob) in scene.obstacles.iter().enumerate() {
        if let Some(t) = first_root(ob, start, direction) {
            if best.is_none_or(|(_, tb)| t < tb) {
                best = Some((i, t));
            }
        }
    }
    best.map(|(i, t)| {
        let ob = &scene.obstacles[i];
        let point = start + direction * t;
        let normal = ob.normal(&point);
        let speed = direction.norm();
        let cos_phi = -direction.dot(&normal) / speed;
        BoundaryHit {
            obstacle_index: i + 1,
            point,
            time: t,
            normal,
            cos_phi,
        }
    })
}

/// Smallest root of the quadric intersection beyond `MIN_HIT_TIME`.
fn first_root(ob: &Obstacle, start: &DVector<f64>, direction: &DVector<f64>) -> Option<f64> {
    let rel = start - &ob.center;
    let a_dir = ob.shape.clone() * direction;
    let a = a_dir.dot(direction);
    let b = a_dir.dot(&rel);
    let c = (ob.shape.clone() * &rel).dot(&rel) - 1.0;
    let disc = b * b - a * c;
    if disc < 0.0 || a <= 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // Stable quadratic roots: q = -(b + sign(b) sqrt(disc)).
    let q = -(b + b.signum() * sq);
    let mut roots = [q / a, if q.abs() > 0.0 { c / q } else { -b / a }];
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    roots.into_iter().find(|&t| t > MIN_HIT_TIME)
}

/// Matrix of the shape operator of the obstacle boundary at `point`, with
/// respect to the outward normal, in the given orthonormal tangent frame.
pub fn shape_operator(
    obstacle: &Obstacle,
    point: &DVector<f64>,
    frame: &[DVector<f64>],
) -> Result<DMatrix<f64>> {
    let q = obstacle.quad(point);
    if (q - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "point is off the boundary (quadratic form value {q:.12})"
        )));
    }
    let m = obstacle.dimension() - 1;
    if frame.len() != m {
        return Err(Error::Domain(format!(
            "frame has {} vectors, expected {}",
            frame.len(),
            m
        )));
    }
    let normal = obstacle.normal(point);
    for (k, e) in frame.iter().enumerate() {
        if (e.norm() - 1.0).abs() > 1e-10 || e.dot(&normal).abs() > 1e-10 {
            return Err(Error::Domain(format!(
                "frame vector {k} is not unit or not tangent"
            )));
        }
        for other in frame.iter().skip(k + 1) {
            if e.dot(other).abs() > 1e-10 {
                return Err(Error::Domain("frame is not orthogonal".into()));
            }
        }
    }
    let grad_norm = (obstacle.shape.clone() * (point - &obstacle.center)).norm();
    let mut mat = DMatrix::zeros(m, m);
    for k in 0..m {
        let a_ek = obstacle.shape.clone() * &frame[k];
        for l in 0..m {
            mat[(k, l)] = a_ek.dot(&frame[l]) / grad_norm;
        }
    }
    // Symmetrize to kill roundoff; the form is symmetric by construction.
    let sym = (&mat + mat.transpose()) * 0.5;
    Ok(sym)
}

/// Ambient form of the shape operator: maps tangent vectors at `point` to
/// tangent vectors, `(I - nu nu^T) A / |A (p - c)|`.
pub fn shape_operator_ambient(obstacle: &Obstacle, point: &DVector<f64>) -> DMatrix<f64> {
    let n = obstacle.dimension();
    let nu = obstacle.normal(point);
    let grad_norm = (obstacle.shape.clone() * (point - &obstacle.center)).norm();
    let proj = DMatrix::identity(n, n) - &nu * nu.transpose();
    proj * &obstacle.shape / grad_norm
}

/// Certificate for the no-eclipse condition: for every pair `(i, j)` and
/// every third obstacle `l`, the convex hull of `K_i ∪ K_j` stays at
/// positive distance from `K_l`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EclipseCertificate {
    pub holds: bool,
    /// Minimum over all triples of `dist(hull(K_i ∪ K_j), K_l)`.
    pub min_margin: f64,
    /// Violating triple `((i, j), l)` with 1-based symbols, when `holds` fails.
    pub witness: Option<((usize, usize), usize)>,
}

/// Checks the no-eclipse condition over all obstacle triples.
pub fn check_no_eclipse(scene: &Scene) -> EclipseCertificate {
    let k = scene.obstacle_count();
    let mut min_margin = f64::INFINITY;
    let mut witness = None;
    for i in 0..k {
        for j in (i + 1)..k {
            for l in 0..k {
                if l == i || l == j {
                    continue;
                }
                let margin = hull_distance(scene, i, j, l);
                if margin < min_margin {
                    min_margin = margin;
                    if margin <= 0.0 {
                        witness = Some(((i + 1, j + 1), l + 1));
                    }
                }
            }
        }
    }
    EclipseCertificate {
        holds: min_margin > 0.0,
        min_margin,
        witness,
    }
}

/// Distance from `K_l` to `hull(K_i ∪ K_j)` (0-based indices).
fn hull_distance(scene: &Scene, i: usize, j: usize, l: usize) -> f64 {
    let (ka, kb, kl) = (
        &scene.obstacles[i],
        &scene.obstacles[j],
        &scene.obstacles[l],
    );
    match (ka.kind, kb.kind, kl.kind) {
        (Kind::Sphere { radius: ra }, Kind::Sphere { radius: rb }, Kind::Sphere { radius: rl })
            if (ra - rb).abs() < 1e-14 =>
        {
            // Equal radii: the hull is the capsule around the center segment.
            (point_segment_distance(&kl.center, &ka.center, &kb.center) - ra - rl).max(0.0)
        }
        _ => hull_distance_numeric(ka, kb, kl, (i as u64) << 32 | (j as u64) << 16 | l as u64),
    }
}

fn point_segment_distance(p: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Projected-gradient minimization of `dist((1-t) p + t q, K_l)` over
/// `p ∈ K_i`, `q ∈ K_j`, `t ∈ [0, 1]`, with seeded random restarts. All step
/// sizes and stopping thresholds scale with the configuration, so the result
/// is equivariant under similarity transformations.
fn hull_distance_numeric(ka: &Obstacle, kb: &Obstacle, kl: &Obstacle, seed: u64) -> f64 {
    let n = ka.dimension();
    let scale = (ka.center() - kb.center())
        .norm()
        .max((ka.center() - kl.center()).norm())
        .max((kb.center() - kl.center()).norm());
    let mut rng = ChaCha8Rng::seed_from_u64(0x9a11_d157 ^ seed);
    let mut best = f64::INFINITY;
    for restart in 0..64 {
        let (mut p, mut q, mut t) = if restart == 0 {
            // Deterministic warm start: centers and midpoint.
            (ka.center.clone(), kb.center.clone(), 0.5)
        } else {
            let mut u = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            if u.norm() < 1e-9 {
                u[0] = 1.0;
            }
            let u = u.normalize();
            let mut v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            if v.norm() < 1e-9 {
                v[0] = 1.0;
            }
            let v = v.normalize();
            (
                ka.boundary_point(&u),
                kb.boundary_point(&v),
                rng.random_range(0.0..1.0),
            )
        };
        let mut f_prev = f64::INFINITY;
        for _ in 0..600 {
            let y = &p * (1.0 - t) + &q * t;
            let (x, dist) = kl.project(&y);
            if dist <= 0.0 {
                best = 0.0;
                break;
            }
            let g = (&y - &x) / dist;
            let gp = &g * (1.0 - t);
            let gq = &g * t;
            let gt = (&q - &p).dot(&g);
            let grad_sq = gp.norm_squared() + gq.norm_squared() + gt * gt;
            if grad_sq < 1e-30 {
                break;
            }
            // Backtracking step, initialized at the Cauchy-like scale.
            let mut step = dist / grad_sq.max(1e-30);
            let mut improved = false;
            for _ in 0..50 {
                let (pp, _) = ka.project(&(&p - &gp * step));
                let (qq, _) = kb.project(&(&q - &gq * step));
                let tt = (t - gt * step).clamp(0.0, 1.0);
                let yy = &pp * (1.0 - tt) + &qq * tt;
                let (_, dd) = kl.project(&yy);
                if dd < dist {
                    p = pp;
                    q = qq;
                    t = tt;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if !improved || (f_prev - dist).abs() < 1e-14 * scale {
                break;
            }
            f_prev = dist;
        }
        if best <= 0.0 {
            return 0.0;
        }
        let polished = polish_hull_distance(ka, kb, kl, p, q, t, scale);
        best = best.min(polished);
    }
    best
}

/// Block-coordinate refinement of `dist((1-t) p + t q, K_l)`: each block
/// update (nearest obstacle point for fixed partner, optimal segment
/// parameter, projection onto `K_l`) is an exact projection, so the
/// iteration is monotone and converges to full precision near a minimum.
fn polish_hull_distance(
    ka: &Obstacle,
    kb: &Obstacle,
    kl: &Obstacle,
    mut p: DVector<f64>,
    mut q: DVector<f64>,
    mut t: f64,
    scale: f64,
) -> f64 {
    let mut prev = f64::INFINITY;
    for _ in 0..2000 {
        let y = &p * (1.0 - t) + &q * t;
        let (x, dist) = kl.project(&y);
        if dist <= 0.0 {
            return 0.0;
        }
        if prev - dist < 1e-15 * scale {
            return dist;
        }
        prev = dist;
        let chord = &q - &p;
        let denom = chord.norm_squared();
        if denom > 0.0 {
            t = ((&x - &p).dot(&chord) / denom).clamp(0.0, 1.0);
        }
        if 1.0 - t > 1e-12 {
            let target = (&x - &q * t) / (1.0 - t);
            p = ka.project(&target).0;
        }
        if t > 1e-12 {
            let target = (&x - &p * (1.0 - t)) / t;
            q = kb.project(&target).0;
        }
    }
    prev
}

/// Gap between two bodies: closed form for sphere pairs, alternating
/// projection otherwise.
fn body_gap(a: &Obstacle, b: &Obstacle) -> f64 {
    if let (Kind::Sphere { radius: ra }, Kind::Sphere { radius: rb }) = (a.kind, b.kind) {
        return (a.center() - b.center()).norm() - ra - rb;
    }
    let scale = (a.center() - b.center()).norm();
    let mut x = a.nearest_boundary_point(b.center());
    let mut prev = f64::INFINITY;
    for _ in 0..10_000 {
        let (y, _) = b.project(&x);
        let y = if b.contains(&x) {
            b.nearest_boundary_point(&x)
        } else {
            y
        };
        let (x2, _) = a.project(&y);
        let x2 = if a.contains(&y) {
            a.nearest_boundary_point(&y)
        } else {
            x2
        };
        let d = (&y - &x2).norm();
        if (prev - d).abs() < 1e-12 * scale.max(1.0) {
            return d;
        }
        prev = d;
        x = x2;
    }
    prev
}

/// Scene-level constants entering the pinching certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneConstants {
    /// Minimum pairwise gap between obstacles.
    pub d0: f64,
    /// Spread: all gaps lie in `[d0, d0 + a]`.
    pub a: f64,
    pub kappa_min: f64,
    pub kappa_max: f64,
    /// Empirical maximum incidence angle supplied by the caller.
    pub phi0: f64,
    /// `2 cos(phi0) kappa_min`.
    pub mu0: f64,
    /// `1/d0 + 2 kappa_max / cos(phi0)`.
    pub lambda0: f64,
    /// True when curvature bounds are exact (all obstacles are spheres);
    /// sampled ellipsoid bounds carry a ±1e-6 slack.
    pub kappa_exact: bool,
}

/// Computes gaps, curvature bounds and the derived constants for a scene.
/// `phi0` must lie in `[0, pi/2)`.
pub fn scene_constants(scene: &Scene, phi0: f64) -> Result<SceneConstants> {
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&phi0) {
        return Err(Error::Domain(format!(
            "phi0 = {phi0} outside [0, pi/2)"
        )));
    }
    let d0 = scene.min_gap();
    let a = scene.max_gap() - d0;
    let mut kappa_min = f64::INFINITY;
    let mut kappa_max: f64 = 0.0;
    let mut exact = true;
    for ob in &scene.obstacles {
        if ob.is_sphere() {
            kappa_min = kappa_min.min(ob.min_curvature());
            kappa_max = kappa_max.max(ob.max_curvature());
        } else {
            exact = false;
            let (lo, hi) = sampled_curvature_extremes(ob);
            kappa_min = kappa_min.min(lo);
            kappa_max = kappa_max.max(hi);
        }
    }
    let mu0 = 2.0 * phi0.cos() * kappa_min;
    let lambda0 = 1.0 / d0 + 2.0 * kappa_max / phi0.cos();
    Ok(SceneConstants {
        d0,
        a,
        kappa_min,
        kappa_max,
        phi0,
        mu0,
        lambda0,
        kappa_exact: exact,
    })
}

/// Curvature extremes of an ellipsoid boundary: principal-curvature
/// extremes over 10^4 boundary samples, polished by local hill climbing.
/// For quadrics the global extremes sit at axis points, so the closed-form
/// values are also folded in.
fn sampled_curvature_extremes(ob: &Obstacle) -> (f64, f64) {
    let n = ob.dimension();
    let mut lo = ob.min_curvature();
    let mut hi = ob.max_curvature();
    let mut lo_dir: Option<DVector<f64>> = None;
    let mut hi_dir: Option<DVector<f64>> = None;
    let samples = 10_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5ce0_e5ce);
    for s in 0..samples {
        let u = if n == 2 {
            let th = 2.0 * std::f64::consts::PI * (s as f64) / (samples as f64);
            DVector::from_vec(vec![th.cos(), th.sin()])
        } else {
            let mut v = DVector::from_fn(n, |_, _| {
                let x: f64 = rng.random_range(-1.0..1.0);
                x
            });
            while v.norm() < 1e-6 {
                v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            }
            v.normalize()
        };
        let (kmin, kmax) = curvature_extremes_at(ob, &u);
        if kmin < lo {
            lo = kmin;
            lo_dir = Some(u.clone());
        }
        if kmax > hi {
            hi = kmax;
            hi_dir = Some(u);
        }
    }
    if let Some(u) = lo_dir {
        lo = lo.min(polish(ob, &u, false));
    }
    if let Some(u) = hi_dir {
        hi = hi.max(polish(ob, &u, true));
    }
    (lo, hi)
}

/// Min and max eigenvalue of the shape operator at the boundary point for
/// the given unit-sphere parameter.
fn curvature_extremes_at(ob: &Obstacle, unit: &DVector<f64>) -> (f64, f64) {
    let p = ob.boundary_point(unit);
    let nu = ob.normal(&p);
    let frame = orthonormal_complement(&nu);
    let l = shape_operator(ob, &p, &frame).expect("boundary point by construction");
    let eig = l.symmetric_eigen();
    (eig.eigenvalues.min(), eig.eigenvalues.max())
}

fn polish(ob: &Obstacle, start: &DVector<f64>, maximize: bool) -> f64 {
    let mut u = start.clone();
    let score = |u: &DVector<f64>| {
        let (lo, hi) = curvature_extremes_at(ob, u);
        if maximize {
            hi
        } else {
            -lo
        }
    };
    let mut best = score(&u);
    let mut step = 0.05;
    while step > 1e-9 {
        let mut improved = false;
        let tangent = orthonormal_complement(&u);
        for t in &tangent {
            for sgn in [1.0, -1.0] {
                let cand = (&u + t * (sgn * step)).normalize();
                let sc = score(&cand);
                if sc > best {
                    best = sc;
                    u = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    if maximize {
        best
    } else {
        -best
    }
}

/// Deterministic orthonormal basis of the hyperplane orthogonal to a unit
/// vector, via the Householder map sending `e1` to the vector.
pub fn orthonormal_complement(unit: &DVector<f64>) -> Vec<DVector<f64>> {
    let n = unit.len();
    let mut e1 = DVector::zeros(n);
    e1[0] = 1.0;
    let sign = if unit[0] >= 0.0 { 1.0 } else { -1.0 };
    let v = unit + &e1 * sign;
    let vnorm2 = v.norm_squared();
    let mut basis = Vec::with_capacity(n - 1);
    for k in 1..n {
        let mut ek = DVector::zeros(n);
        ek[k] = 1.0;
        // H ek with H = I - 2 v v^T / |v|^2, then flip by the same sign so
        // the map sends e1 exactly to `unit`.
        let h = (&ek - &v * (2.0 * v.dot(&ek) / vnorm2)) * (-sign);
        basis.push(h);
    }
    basis
}

// --- Scene file format -----------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct SceneFile {
    dimension: usize,
    obstacles: Vec<ObstacleSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum ObstacleSpec {
    Sphere {
        center: Vec<f64>,
        radius: f64,
    },
    Ellipsoid {
        center: Vec<f64>,
        semi_axes: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rotation: Option<Vec<Vec<f64>>>,
    },
}

impl TryFrom<SceneFile> for Scene {
    type Error = Error;

    fn try_from(file: SceneFile) -> Result<Self> {
        let n = file.dimension;
        let mut obstacles = Vec::with_capacity(file.obstacles.len());
        for spec in file.obstacles {
            let ob = match spec {
                ObstacleSpec::Sphere { center, radius } => {
                    Obstacle::sphere(DVector::from_vec(center), radius)?
                }
                ObstacleSpec::Ellipsoid {
                    center,
                    semi_axes,
                    rotation,
                } => {
                    let rot = match rotation {
                        Some(rows) => {
                            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                                return Err(Error::Format(
                                    "rotation must be a row-major n x n array".into(),
                                ));
                            }
                            let flat: Vec<f64> = rows.into_iter().flatten().collect();
                            Some(DMatrix::from_row_slice(n, n, &flat))
                        }
                        None => None,
                    };
                    Obstacle::ellipsoid(DVector::from_vec(center), &semi_axes, rot)?
                }
            };
            obstacles.push(ob);
        }
        Scene::new(n, obstacles)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenes;

    fn vec2(x: f64, y: f64) -> DVector<f64> {
        DVector::from_vec(vec![x, y])
    }

    #[test]
    fn ray_hits_axis_aligned_disk() {
        let scene = scenes::single_disk_scene();
        let hit = ray_cast(&scene, &vec2(3.0, 0.0), &vec2(-1.0, 0.0))
            .unwrap()
            .expect("hit");
        assert_eq!(hit.obstacle_index, 1);
        assert!((hit.time - 2.0).abs() < 1e-12);
        assert!((hit.point[0] - 1.0).abs() < 1e-12 && hit.point[1].abs() < 1e-12);
        assert!((hit.normal[0] - 1.0).abs() < 1e-12);
        assert!((hit.cos_phi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ray_pointing_away_escapes() {
        let scene = scenes::single_disk_scene();
        let hit = ray_cast(&scene, &vec2(3.0, 0.0), &vec2(1.0, 0.0)).unwrap();
        assert!(hit.is_none());
    }

    #[test]
    fn ray_across_the_standard_gap() {
        let scene = scenes::three_disks();
        let hit = ray_cast(&scene, &vec2(5.0, 0.0), &vec2(-1.0, 0.0))
            .unwrap()
            .expect("hit");
        assert_eq!(hit.obstacle_index, 1);
        assert!((hit.time - 4.0).abs() < 1e-12);
        assert!((hit.point[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ray_start_inside_is_domain_error() {
        let scene = scenes::single_disk_scene();
        let err = ray_cast(&scene, &vec2(0.2, 0.0), &vec2(1.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn hit_point_satisfies_quadric_and_minimality() {
        let scene = scenes::three_disks();
        let dirs = [
            vec2(-1.0, 0.0),
            vec2(-0.8, 0.6),
            vec2(-0.6, 0.8),
            vec2(0.0, 1.0),
        ];
        for d in dirs {
            if let Some(hit) = ray_cast(&scene, &vec2(5.0, 0.1), &d.normalize()).unwrap() {
                let ob = scene.obstacle(hit.obstacle_index);
                assert!((ob.quad(&hit.point) - 1.0).abs() < 1e-12);
                // No obstacle has a smaller positive root.
                for other in scene.obstacles() {
                    if let Some(t) = first_root(other, &vec2(5.0, 0.1), &d.normalize()) {
                        assert!(t >= hit.time - 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn unit_circle_shape_operator_is_one() {
        let ob = Obstacle::sphere(vec2(0.0, 0.0), 1.0).unwrap();
        let p = vec2(1.0, 0.0);
        let frame = orthonormal_complement(&ob.normal(&p));
        let l = shape_operator(&ob, &p, &frame).unwrap();
        assert!((l[(0, 0)] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn sphere_radius_two_has_curvature_half() {
        let center = DVector::from_vec(vec![0.0, 0.0, 0.0]);
        let ob = Obstacle::sphere(center, 2.0).unwrap();
        let p = DVector::from_vec(vec![0.0, 0.0, 2.0]);
        let frame = orthonormal_complement(&ob.normal(&p));
        let l = shape_operator(&ob, &p, &frame).unwrap();
        for k in 0..2 {
            for m in 0..2 {
                let expected = if k == m { 0.5 } else { 0.0 };
                assert!((l[(k, m)] - expected).abs() < 1e-13);
            }
        }
    }

    /// Curvature oracle: rotate the outward normal along an arc-length
    /// parametrization of the ellipse and differentiate numerically
    /// (`|dn/ds| = kappa` for plane curves).
    fn ellipse_curvature_fd(a: f64, b: f64, theta: f64) -> f64 {
        let h = 1e-6;
        let speed = |t: f64| vec2(-a * t.sin(), b * t.cos()).norm();
        let normal = |t: f64| vec2(t.cos() / a, t.sin() / b).normalize();
        let dn = (normal(theta + h) - normal(theta - h)) / (2.0 * h);
        dn.norm() / speed(theta)
    }

    #[test]
    fn ellipse_vertex_curvature_matches_fd_oracle() {
        let ob = Obstacle::ellipsoid(vec2(0.0, 0.0), &[2.0, 1.0], None).unwrap();
        let p = vec2(2.0, 0.0);
        let frame = orthonormal_complement(&ob.normal(&p));
        let l = shape_operator(&ob, &p, &frame).unwrap();
        // kappa = a/b^2 = 2 at the end of the major axis.
        assert!((l[(0, 0)] - 2.0).abs() < 1e-12);
        let oracle = ellipse_curvature_fd(2.0, 1.0, 0.0);
        assert!((l[(0, 0)] - oracle).abs() < 1e-5, "fd oracle {oracle}");
        // An off-axis point for good measure.
        let theta: f64 = 0.7;
        let q = vec2(2.0 * theta.cos(), theta.sin());
        let frame_q = orthonormal_complement(&ob.normal(&q));
        let lq = shape_operator(&ob, &q, &frame_q).unwrap()[(0, 0)];
        let oq = ellipse_curvature_fd(2.0, 1.0, theta);
        assert!((lq - oq).abs() < 1e-5, "got {lq}, oracle {oq}");
    }

    #[test]
    fn shape_operator_rejects_off_boundary_points() {
        let ob = Obstacle::sphere(vec2(0.0, 0.0), 1.0).unwrap();
        let p = vec2(1.5, 0.0);
        let frame = vec![vec2(0.0, 1.0)];
        assert!(matches!(
            shape_operator(&ob, &p, &frame),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn no_eclipse_margin_for_standard_scene() {
        let scene = scenes::three_disks();
        let cert = check_no_eclipse(&scene);
        assert!(cert.holds);
        // Closed form: height of the triangle minus the two unit radii.
        let expected = 3.0 * 3.0_f64.sqrt() - 2.0;
        assert!((cert.min_margin - expected).abs() < 1e-12);
        assert!(cert.witness.is_none());
    }

    #[test]
    fn collinear_disks_violate_no_eclipse() {
        let obstacles = vec![
            Obstacle::sphere(vec2(0.0, 0.0), 1.0).unwrap(),
            Obstacle::sphere(vec2(4.0, 0.0), 1.0).unwrap(),
            Obstacle::sphere(vec2(8.0, 0.0), 1.0).unwrap(),
        ];
        let scene = Scene::new(2, obstacles).unwrap();
        let cert = check_no_eclipse(&scene);
        assert!(!cert.holds);
        assert_eq!(cert.witness, Some(((1, 3), 2)));
    }

    #[test]
    fn no_eclipse_margin_is_scale_equivariant() {
        for s in [0.5, 2.0, 10.0] {
            let scene = scenes::equilateral_disks(6.0 * s, s);
            let cert = check_no_eclipse(&scene);
            let expected = s * (3.0 * 3.0_f64.sqrt() - 2.0);
            assert!(
                (cert.min_margin - expected).abs() < 1e-9 * expected,
                "scale {s}: margin {} vs {expected}",
                cert.min_margin
            );
        }
    }

    #[test]
    fn numeric_hull_distance_agrees_with_capsule_form() {
        // Same geometry as the standard scene but forced down the numeric
        // path by an ellipsoid third obstacle with equal semi-axes ratios.
        let h = 3.0 * 3.0_f64.sqrt();
        let obstacles = vec![
            Obstacle::sphere(vec2(0.0, 0.0), 1.0).unwrap(),
            Obstacle::sphere(vec2(6.0, 0.0), 1.0).unwrap(),
            Obstacle::ellipsoid(vec2(3.0, h), &[1.0, 1.0], None).unwrap(),
        ];
        let scene = Scene::new(2, obstacles).unwrap();
        let cert = check_no_eclipse(&scene);
        let expected = h - 2.0;
        assert!(cert.holds);
        assert!(
            (cert.min_margin - expected).abs() < 1e-7,
            "margin {} vs {}",
            cert.min_margin,
            expected
        );
    }

    #[test]
    fn no_eclipse_scale_equivariance_on_ellipsoid_scene() {
        let margin_at = |s: f64| {
            let obstacles = vec![
                Obstacle::ellipsoid(vec2(0.0, 0.0), &[1.2 * s, 0.8 * s], None).unwrap(),
                Obstacle::sphere(vec2(6.0 * s, 0.0), s).unwrap(),
                Obstacle::sphere(vec2(3.0 * s, 5.2 * s), s).unwrap(),
            ];
            check_no_eclipse(&Scene::new(2, obstacles).unwrap()).min_margin
        };
        let base = margin_at(1.0);
        for s in [0.5, 2.0, 10.0] {
            let m = margin_at(s);
            assert!(
                (m - s * base).abs() < 1e-9 * s * base.max(1.0),
                "scale {s}: {m} vs {}",
                s * base
            );
        }
    }

    #[test]
    fn standard_scene_constants() {
        let scene = scenes::three_disks();
        let c = scene_constants(&scene, std::f64::consts::FRAC_PI_6).unwrap();
        assert!((c.d0 - 4.0).abs() < 1e-12);
        assert!(c.a.abs() < 1e-12);
        assert!((c.kappa_min - 1.0).abs() < 1e-12);
        assert!((c.kappa_max - 1.0).abs() < 1e-12);
        assert!((c.mu0 - 3.0_f64.sqrt()).abs() < 1e-12);
        assert!((c.lambda0 - (0.25 + 4.0 / 3.0_f64.sqrt())).abs() < 1e-12);
        assert!(c.kappa_exact);
    }

    #[test]
    fn phi0_zero_degenerates_to_plain_curvatures() {
        let scene = scenes::three_disks();
        let c = scene_constants(&scene, 0.0).unwrap();
        assert!((c.mu0 - 2.0 * c.kappa_min).abs() < 1e-14);
        assert!((c.lambda0 - (1.0 / c.d0 + 2.0 * c.kappa_max)).abs() < 1e-14);
    }

    #[test]
    fn spread_constant_from_unequal_gaps() {
        // Two unit disks at gap 4 plus a third at gap 5 from each.
        let d = 7.0_f64;
        let x = 3.0;
        let y = (d * d - x * x).sqrt();
        let obstacles = vec![
            Obstacle::sphere(vec2(0.0, 0.0), 1.0).unwrap(),
            Obstacle::sphere(vec2(6.0, 0.0), 1.0).unwrap(),
            Obstacle::sphere(vec2(x, y), 1.0).unwrap(),
        ];
        let scene = Scene::new(2, obstacles).unwrap();
        let c = scene_constants(&scene, 0.3).unwrap();
        assert!((c.d0 - 4.0).abs() < 1e-12);
        assert!((c.a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phi0_at_right_angle_is_rejected() {
        let scene = scenes::three_disks();
        assert!(matches!(
            scene_constants(&scene, std::f64::consts::FRAC_PI_2),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn mu0_never_exceeds_lambda0() {
        let scene = scenes::three_disks();
        for phi in [0.0, 0.3, 0.7, 1.2, 1.5] {
            let c = scene_constants(&scene, phi).unwrap();
            assert!(c.mu0 <= c.lambda0);
        }
    }

    #[test]
    fn ellipsoid_curvature_extremes_match_closed_form() {
        let ob = Obstacle::ellipsoid(vec2(0.0, 0.0), &[2.0, 1.0], None).unwrap();
        let (lo, hi) = sampled_curvature_extremes(&ob);
        // kappa_min = b/a^2 = 0.25, kappa_max = a/b^2 = 2.
        assert!((lo - 0.25).abs() < 1e-6);
        assert!((hi - 2.0).abs() < 1e-6);
    }

    #[test]
    fn ellipsoid_gap_matches_sphere_closed_form() {
        // Ellipsoids with equal axes are spheres in disguise; compare the
        // alternating-projection gap with the exact value.
        let a = Obstacle::ellipsoid(vec2(0.0, 0.0), &[1.0, 1.0], None).unwrap();
        let b = Obstacle::sphere(vec2(6.0, 0.0), 1.0).unwrap();
        assert_eq!(a.kind, Kind::Sphere { radius: 1.0 });
        let gap = body_gap(&a, &b);
        assert!((gap - 4.0).abs() < 1e-10);
        // A genuinely anisotropic pair, gap along the line of centers.
        let e = Obstacle::ellipsoid(vec2(0.0, 0.0), &[2.0, 1.0], None).unwrap();
        let gap2 = body_gap(&e, &b);
        assert!((gap2 - 3.0).abs() < 1e-9, "gap {gap2}");
    }

    #[test]
    fn scene_requires_three_disjoint_obstacles() {
        let two = vec![
            Obstacle::sphere(vec2(0.0, 0.0), 1.0).unwrap(),
            Obstacle::sphere(vec2(6.0, 0.0), 1.0).unwrap(),
        ];
        assert!(Scene::new(2, two).is_err());
        let touching = vec![
            Obstacle::sphere(vec2(0.0, 0.0), 1.0).unwrap(),
            Obstacle::sphere(vec2(1.5, 0.0), 1.0).unwrap(),
            Obstacle::sphere(vec2(3.0, 4.0), 1.0).unwrap(),
        ];
        assert!(Scene::new(2, touching).is_err());
    }

    #[test]
    fn scene_json_round_trip() {
        let text = r#"{
            "dimension": 2,
            "obstacles": [
                {"type": "sphere", "center": [0, 0], "radius": 1},
                {"type": "sphere", "center": [6, 0], "radius": 1},
                {"type": "ellipsoid", "center": [3, 5.196152422706632], "semi_axes": [1, 1]}
            ]
        }"#;
        let scene = Scene::from_json_str(text).unwrap();
        assert_eq!(scene.obstacle_count(), 3);
        assert!((scene.gap(1, 2) - 4.0).abs() < 1e-9);
        assert!(Scene::from_json_str("{\"dimension\": 2}").is_err());
    }

    #[test]
    fn rotated_ellipsoid_from_json() {
        let c45 = std::f64::consts::FRAC_1_SQRT_2;
        let text = format!(
            r#"{{
                "dimension": 2,
                "obstacles": [
                    {{"type": "ellipsoid", "center": [0, 0], "semi_axes": [2, 1],
                      "rotation": [[{c45}, {n45}], [{c45}, {c45}]]}},
                    {{"type": "sphere", "center": [10, 0], "radius": 1}},
                    {{"type": "sphere", "center": [5, 10], "radius": 1}}
                ]
            }}"#,
            c45 = c45,
            n45 = -c45,
        );
        let scene = Scene::from_json_str(&text).unwrap();
        let ob = scene.obstacle(1);
        assert!(!ob.is_sphere());
        // Rotation preserves the curvature extremes and the diameter.
        let (lo, hi) = ob.curvature_range();
        assert!((lo - 0.25).abs() < 1e-12 && (hi - 2.0).abs() < 1e-12);
        assert!((ob.diameter() - 4.0).abs() < 1e-12);
        // The long axis now points along (1, 1): the sphere preimage of its
        // tip is the rotated first axis, and the tip sits at distance 2.
        let tip = ob.boundary_point(&vec2(c45, c45));
        assert!((tip.norm() - 2.0).abs() < 1e-12);
        assert!((tip[0] - tip[1]).abs() < 1e-9);
        // A non-orthogonal rotation is rejected.
        let bad = r#"{"dimension": 2, "obstacles": [
            {"type": "ellipsoid", "center": [0, 0], "semi_axes": [2, 1],
             "rotation": [[1, 1], [0, 1]]}]}"#;
        assert!(Scene::from_json_str(bad).is_err());
    }

    #[test]
    fn orthonormal_complement_is_orthonormal() {
        for v in [
            DVector::from_vec(vec![1.0, 0.0, 0.0]),
            DVector::from_vec(vec![-1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.3, -0.4, 0.866_025]).normalize(),
        ] {
            let basis = orthonormal_complement(&v);
            assert_eq!(basis.len(), 2);
            for (k, e) in basis.iter().enumerate() {
                assert!((e.norm() - 1.0).abs() < 1e-13);
                assert!(e.dot(&v).abs() < 1e-13);
                for f in basis.iter().skip(k + 1) {
                    assert!(e.dot(f).abs() < 1e-13);
                }
            }
        }
    }
}
