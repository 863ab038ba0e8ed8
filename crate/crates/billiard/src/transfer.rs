//! Cylinder-discretized Ruelle transfer operators: depth-N word models with
//! shadowing return times, the weighted preimage-sum operator
//! `(L h)(w) = sum_u exp(f(u) - (P + a + ib) tau(u)) h(u)`, pressure and
//! entropy roots, Lipschitz norms scaled by the frequency, and empirical
//! contraction curves for the twisted operators.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::curvature::expansion_factors;
use crate::error::{Error, Result};
use crate::geometry::Scene;
use crate::orbits::{cylinder_shadow_time, find_periodic_orbit};
use crate::symbolic::{enumerate_words, preimage_words, Word};

/// Depth-N discretization of the symbolic space: one state per admissible
/// length-N word, each carrying the shadowing return time of its cylinder.
#[derive(Debug, Clone)]
pub struct CylinderModel {
    pub k0: usize,
    pub depth: usize,
    /// Admissible words in lexicographic order.
    pub words: Vec<Word>,
    /// Return time per word, aligned with `words`.
    pub tau: Vec<f64>,
    /// Base of the symbolic metric `d(w, w') = theta^(common prefix)`.
    pub theta: f64,
    preimages: Vec<Vec<usize>>,
}

impl CylinderModel {
    /// Assembles a model from explicit return times (the `words` order is
    /// the lexicographic enumeration of the given depth).
    pub fn from_parts(k0: usize, depth: usize, tau: Vec<f64>, theta: f64) -> Result<Self> {
        let words = enumerate_words(k0, depth, false);
        if tau.len() != words.len() {
            return Err(Error::Domain(format!(
                "{} return times for {} words",
                tau.len(),
                words.len()
            )));
        }
        if !(0.0..1.0).contains(&theta) || theta == 0.0 {
            return Err(Error::Domain(format!("theta = {theta} outside (0, 1)")));
        }
        let index: HashMap<Vec<usize>, usize> = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.symbols().to_vec(), i))
            .collect();
        let preimages = words
            .iter()
            .map(|w| {
                preimage_words(w, k0)
                    .iter()
                    .map(|u| index[u.symbols()])
                    .collect()
            })
            .collect();
        Ok(CylinderModel {
            k0,
            depth,
            words,
            tau,
            theta,
            preimages,
        })
    }

    /// Degenerate lattice model with a constant return time; useful as a
    /// control case where every twist is a global phase.
    pub fn with_constant_tau(k0: usize, depth: usize, c: f64, theta: f64) -> Result<Self> {
        let count = enumerate_words(k0, depth, false).len();
        CylinderModel::from_parts(k0, depth, vec![c; count], theta)
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn preimage_indices(&self, word_index: usize) -> &[usize] {
        &self.preimages[word_index]
    }

    pub fn tau_min(&self) -> f64 {
        self.tau.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn tau_max(&self) -> f64 {
        self.tau.iter().copied().fold(0.0, f64::max)
    }

    /// Length of the common prefix of two words (strictly below the depth
    /// for distinct words).
    pub fn common_prefix(&self, a: usize, b: usize) -> usize {
        let wa = self.words[a].symbols();
        let wb = self.words[b].symbols();
        wa.iter().zip(wb.iter()).take_while(|(x, y)| x == y).count()
    }
}

/// A function on the cylinder states, aligned with `model.words`.
#[derive(Debug, Clone)]
pub struct SymbolicFunction {
    pub values: Vec<Complex64>,
}

impl SymbolicFunction {
    pub fn constant(model: &CylinderModel, value: Complex64) -> Self {
        SymbolicFunction {
            values: vec![value; model.word_count()],
        }
    }

    pub fn zero(model: &CylinderModel) -> Self {
        SymbolicFunction::constant(model, Complex64::new(0.0, 0.0))
    }

    pub fn from_real_fn(model: &CylinderModel, mut f: impl FnMut(&Word) -> f64) -> Self {
        SymbolicFunction {
            values: model
                .words
                .iter()
                .map(|w| Complex64::new(f(w), 0.0))
                .collect(),
        }
    }

    pub fn from_fn(model: &CylinderModel, f: impl FnMut(&Word) -> Complex64) -> Self {
        SymbolicFunction {
            values: model.words.iter().map(f).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn ensure_real(&self, what: &str) -> Result<Vec<f64>> {
        if self.values.iter().any(|z| z.im != 0.0) {
            return Err(Error::Domain(format!("{what} must be real-valued")));
        }
        Ok(self.values.iter().map(|z| z.re).collect())
    }
}

/// Builds the depth-N cylinder model for a scene: enumerates admissible
/// words, solves the shadowing orbit of every cylinder for its return time,
/// and picks the symbolic metric base. With `theta = None` the base is the
/// largest single-bounce contraction factor over the two-bounce orbits.
pub fn build_cylinder_model(
    scene: &Scene,
    depth: usize,
    theta: Option<f64>,
) -> Result<CylinderModel> {
    if depth < 1 {
        return Err(Error::Domain("depth must be at least 1".into()));
    }
    let k0 = scene.obstacle_count();
    let theta = match theta {
        Some(t) => t,
        None => auto_theta(scene)?,
    };
    let words = enumerate_words(k0, depth, false);
    let d0 = scene.min_gap();
    let spread = scene.max_gap() - d0;
    let tau_cap = d0 + spread + 2.0 * scene.max_diameter() + 1e-6;
    let mut tau = Vec::with_capacity(words.len());
    for w in &words {
        let t = cylinder_shadow_time(scene, w)?;
        if t < d0 - 1e-9 || t > tau_cap {
            return Err(Error::Verification(format!(
                "return time {t:.9} for word {} outside [{:.9}, {:.9}]",
                w.label(),
                d0 - 1e-9,
                tau_cap
            )));
        }
        tau.push(t);
    }
    CylinderModel::from_parts(k0, depth, tau, theta)
}

/// Largest single-bounce contraction factor over all two-bounce orbits.
fn auto_theta(scene: &Scene) -> Result<f64> {
    let k0 = scene.obstacle_count();
    let mut theta: f64 = 0.0;
    for i in 1..=k0 {
        for j in (i + 1)..=k0 {
            let orbit = find_periodic_orbit(scene, &Word::cyclic(vec![i, j])?, 1e-12)?;
            let report = expansion_factors(scene, &orbit, 1)?;
            for b in &report.bounces {
                theta = theta.max(b.delta);
            }
        }
    }
    Ok(theta.clamp(1e-6, 0.999_999))
}

/// One application of the Ruelle operator with real potential `f`, pressure
/// shift `pshift`, and twist `a + ib`:
/// `(L h)(w) = sum_{u in pre(w)} exp(f(u) - (pshift + a) tau(u)) e^{-i b tau(u)} h(u)`.
pub fn apply_operator(
    model: &CylinderModel,
    f: &SymbolicFunction,
    pshift: f64,
    a: f64,
    b: f64,
    h: &SymbolicFunction,
) -> Result<SymbolicFunction> {
    let f_real = f.ensure_real("the potential")?;
    if h.values.len() != model.word_count() {
        return Err(Error::Domain("function dimension mismatch".into()));
    }
    let weights: Vec<Complex64> = (0..model.word_count())
        .map(|u| {
            let amp = (f_real[u] - (pshift + a) * model.tau[u]).exp();
            Complex64::from_polar(amp, -b * model.tau[u])
        })
        .collect();
    let values = (0..model.word_count())
        .map(|w| {
            model.preimages[w]
                .iter()
                .map(|&u| weights[u] * h.values[u])
                .sum()
        })
        .collect();
    Ok(SymbolicFunction { values })
}

/// Leading eigenvalue of the positive operator (`a = b = 0`) at the given
/// pressure shift, by power iteration on the constant function.
pub fn leading_eigenvalue(model: &CylinderModel, f: &SymbolicFunction, pshift: f64) -> Result<f64> {
    let mut h = SymbolicFunction::constant(model, Complex64::new(1.0, 0.0));
    let mut lambda = 1.0;
    for _ in 0..2000 {
        let lh = apply_operator(model, f, pshift, 0.0, 0.0, &h)?;
        let next = lh.sup_norm();
        if next == 0.0 {
            return Ok(0.0);
        }
        let scaled = SymbolicFunction {
            values: lh.values.iter().map(|z| z / next).collect(),
        };
        if (next - lambda).abs() < 1e-14 * next {
            return Ok(next);
        }
        lambda = next;
        h = scaled;
    }
    Ok(lambda)
}

/// The unique `P` with leading eigenvalue 1 for the operator with weights
/// `exp(f - P tau)`, found by bisection; `tol` bounds the bracket width.
pub fn pressure_root(model: &CylinderModel, f: &SymbolicFunction, tol: f64) -> Result<f64> {
    let f_real = f.ensure_real("the potential")?;
    let f_min = f_real.iter().copied().fold(f64::INFINITY, f64::min);
    let f_max = f_real.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let growth = ((model.k0 - 1) as f64).ln();
    let mut lo = (growth + f_min) / model.tau_max() - 1.0;
    let mut hi = (growth + f_max) / model.tau_min() + 1.0;
    // The leading eigenvalue is strictly decreasing in P; widen the bracket
    // if the safety margins were not enough.
    for _ in 0..60 {
        if leading_eigenvalue(model, f, lo)? > 1.0 {
            break;
        }
        lo -= (hi - lo).max(1.0);
    }
    for _ in 0..60 {
        if leading_eigenvalue(model, f, hi)? < 1.0 {
            break;
        }
        hi += (hi - lo).max(1.0);
    }
    if leading_eigenvalue(model, f, lo)? <= 1.0 || leading_eigenvalue(model, f, hi)? >= 1.0 {
        return Err(Error::Solver {
            context: "pressure bracketing failed".into(),
            iterations: 60,
            residual: f64::NAN,
        });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if leading_eigenvalue(model, f, mid)? > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Topological entropy of the model: the pressure root for the zero
/// potential.
pub fn entropy(model: &CylinderModel) -> Result<f64> {
    pressure_root(model, &SymbolicFunction::zero(model), 1e-12)
}

/// The frequency-scaled Lipschitz norm `|h|_0 + Lip(h) / |b|`, with
/// `Lip(h) = max |h(w) - h(w')| / theta^(common prefix)`. For `b = 0` the
/// raw sum `|h|_0 + Lip(h)` is returned instead.
pub fn lip_b_norm(model: &CylinderModel, h: &SymbolicFunction, b: f64) -> f64 {
    let sup = h.sup_norm();
    let count = model.word_count();
    let mut lip: f64 = 0.0;
    for w in 0..count {
        for w2 in (w + 1)..count {
            let s = model.common_prefix(w, w2);
            let diff = (h.values[w] - h.values[w2]).norm();
            lip = lip.max(diff / model.theta.powi(s as i32));
        }
    }
    if b == 0.0 {
        sup + lip
    } else {
        sup + lip / b.abs()
    }
}

/// Power-iteration estimate of the spectral radius of the twisted operator,
/// using the Rayleigh-quotient modulus.
pub fn spectral_radius_estimate(
    model: &CylinderModel,
    f: &SymbolicFunction,
    pshift: f64,
    a: f64,
    b: f64,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51e7_2a11);
    let mut v = SymbolicFunction::from_fn(model, |_| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let mut rho = 0.0;
    for _ in 0..2000 {
        let lv = apply_operator(model, f, pshift, a, b, &v)?;
        let norm_sq: f64 = v.values.iter().map(|z| z.norm_sqr()).sum();
        let rayleigh: Complex64 = v
            .values
            .iter()
            .zip(lv.values.iter())
            .map(|(x, y)| x.conj() * y)
            .sum();
        let next = rayleigh.norm() / norm_sq;
        let scale = lv.sup_norm();
        if scale == 0.0 {
            return Ok(0.0);
        }
        v = SymbolicFunction {
            values: lv.values.iter().map(|z| z / scale).collect(),
        };
        if (next - rho).abs() < 1e-12 {
            return Ok(next);
        }
        rho = next;
    }
    Ok(rho)
}

/// One point of the contraction curve.
#[derive(Debug, Clone, Serialize)]
pub struct ContractionPoint {
    pub b: f64,
    /// Max over seed functions of `(|L^m h| / |h|)^(1/m)` in the
    /// frequency-scaled norm.
    pub rho_seed_max: f64,
    /// Power-iteration spectral-radius estimate of the twisted operator.
    pub rho_spectral: f64,
}

/// Empirical contraction exponents of the twisted operators at the given
/// frequencies. Seeds: the constant function, the first-symbol indicators,
/// and `trials` random complex functions.
#[allow(clippy::too_many_arguments)]
pub fn contraction_curve(
    model: &CylinderModel,
    f: &SymbolicFunction,
    pshift: f64,
    a: f64,
    b_list: &[f64],
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<ContractionPoint>> {
    if m == 0 {
        return Err(Error::Domain("iterate count m must be positive".into()));
    }
    let mut out = Vec::with_capacity(b_list.len());
    for (bi, &b) in b_list.iter().enumerate() {
        let mut seeds: Vec<SymbolicFunction> =
            vec![SymbolicFunction::constant(model, Complex64::new(1.0, 0.0))];
        for s in 1..=model.k0 {
            seeds.push(SymbolicFunction::from_fn(model, |w| {
                if w.symbols()[0] == s {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(bi as u64));
        for _ in 0..trials {
            seeds.push(SymbolicFunction::from_fn(model, |_| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            }));
        }
        let mut rho_seed_max: f64 = 0.0;
        for h in &seeds {
            let before = lip_b_norm(model, h, b);
            if before == 0.0 {
                continue;
            }
            let mut iter = h.clone();
            for _ in 0..m {
                iter = apply_operator(model, f, pshift, a, b, &iter)?;
            }
            let after = lip_b_norm(model, &iter, b);
            rho_seed_max = rho_seed_max.max((after / before).powf(1.0 / m as f64));
        }
        let rho_spectral = spectral_radius_estimate(model, f, pshift, a, b, seed)?;
        out.push(ContractionPoint {
            b,
            rho_seed_max,
            rho_spectral,
        });
    }
    Ok(out)
}

/// Summary of a transfer-operator run at a given depth.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    /// Pressure root of the zero potential at the deepest model.
    pub pressure: f64,
    /// Topological entropy estimate (same as `pressure` for f = 0).
    pub entropy: f64,
    /// Leading eigenvalue of the pressure-normalized positive operator.
    pub leading_eigenvalue: f64,
    pub contraction: Vec<ContractionPoint>,
    pub depths_used: Vec<usize>,
    /// Entropy per depth, aligned with `depths_used`.
    pub entropy_by_depth: Vec<f64>,
    pub theta: f64,
    /// Caveat carried by every spectrum report: the theta-symbolic metric
    /// is only bi-Lipschitz equivalent to the billiard arc metric, with an
    /// equivalence constant this artifact does not compute.
    pub metric_note: &'static str,
}

pub const METRIC_NOTE: &str = "Lipschitz norms use the theta-symbolic metric; it is bi-Lipschitz \
     equivalent to the billiard metric with an uncomputed constant";

/// Runs the full spectrum pipeline: entropy at every depth up to `depth`
/// for convergence diagnostics, then the contraction curve at the deepest
/// model.
pub fn spectral_report(
    scene: &Scene,
    depth: usize,
    theta: Option<f64>,
    b_list: &[f64],
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<SpectralReport> {
    let mut depths_used = Vec::new();
    let mut entropy_by_depth = Vec::new();
    let mut deepest: Option<CylinderModel> = None;
    for d in 1..=depth {
        let model = build_cylinder_model(scene, d, theta)?;
        depths_used.push(d);
        entropy_by_depth.push(entropy(&model)?);
        deepest = Some(model);
    }
    let model = deepest.ok_or_else(|| Error::Domain("depth must be at least 1".into()))?;
    let h_t = *entropy_by_depth.last().expect("at least one depth");
    let zero = SymbolicFunction::zero(&model);
    let leading = leading_eigenvalue(&model, &zero, h_t)?;
    let contraction = contraction_curve(&model, &zero, h_t, 0.0, b_list, m, trials, seed)?;
    Ok(SpectralReport {
        pressure: h_t,
        entropy: h_t,
        leading_eigenvalue: leading,
        contraction,
        depths_used,
        entropy_by_depth,
        theta: model.theta,
        metric_note: METRIC_NOTE,
    })
}
