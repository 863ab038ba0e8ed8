//! Primitive-orbit length tables, the counting function against
//! `li(e^(h t))`, and truncated zeta products over primitive closed orbits.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Scene;
use crate::orbits::find_periodic_orbit;
use crate::symbolic::{primitive_necklaces, Word};

/// One primitive orbit in the table.
#[derive(Debug, Clone, Serialize)]
pub struct OrbitEntry {
    /// Canonical (lexicographically minimal) cyclic representative.
    pub word: Word,
    pub period: usize,
    pub length: f64,
    pub min_angle: f64,
    pub max_angle: f64,
    pub primitive: bool,
}

/// All primitive orbits up to a period bound, sorted by length.
#[derive(Debug, Clone, Serialize)]
pub struct OrbitTable {
    pub entries: Vec<OrbitEntry>,
    pub max_period: usize,
    /// True when every primitive necklace up to `max_period` was solved.
    pub complete: bool,
    /// Minimal obstacle gap, fixing the completeness horizon.
    pub d0: f64,
    /// Words whose solves failed, with diagnostics.
    pub failures: Vec<(Word, String)>,
}

impl OrbitTable {
    /// Largest length for which the table is certainly complete: any orbit
    /// of period `max_period + 1` is at least this long.
    pub fn horizon(&self) -> f64 {
        (self.max_period as f64 + 1.0) * self.d0
    }
}

/// Solves every primitive necklace up to `max_period`. Solves run in
/// parallel; the table is sorted by (length, word) so the output is
/// deterministic regardless of scheduling.
pub fn orbit_table(scene: &Scene, max_period: usize) -> Result<OrbitTable> {
    if max_period < 2 {
        return Err(Error::Domain("max_period must be at least 2".into()));
    }
    let k0 = scene.obstacle_count();
    let necklaces: Vec<_> = (2..=max_period)
        .flat_map(|p| primitive_necklaces(k0, p))
        .collect();
    let solved: Vec<std::result::Result<OrbitEntry, (Word, String)>> = necklaces
        .par_iter()
        .map(|neck| {
            match find_periodic_orbit(scene, &neck.representative, 1e-12) {
                Ok(orbit) => {
                    let min_angle = orbit.angles.iter().copied().fold(f64::INFINITY, f64::min);
                    let max_angle = orbit.angles.iter().copied().fold(0.0, f64::max);
                    Ok(OrbitEntry {
                        word: neck.representative.clone(),
                        period: neck.period,
                        length: orbit.length,
                        min_angle,
                        max_angle,
                        primitive: orbit.primitive,
                    })
                }
                Err(e) => Err((neck.representative.clone(), e.to_string())),
            }
        })
        .collect();
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for item in solved {
        match item {
            Ok(entry) => entries.push(entry),
            Err(fail) => failures.push(fail),
        }
    }
    // Quantize lengths for the sort key so orbits of equal length (the
    // solver resolves them to ~1e-13) tie-break lexicographically.
    entries.sort_by(|a, b| {
        let qa = (a.length * 1e9).round() as i64;
        let qb = (b.length * 1e9).round() as i64;
        qa.cmp(&qb)
            .then_with(|| a.word.symbols().cmp(b.word.symbols()))
    });
    let d0 = scene.min_gap();
    for e in &entries {
        if e.length < e.period as f64 * d0 - 1e-9 {
            return Err(Error::Verification(format!(
                "orbit {} shorter than {} gaps",
                e.word.label(),
                e.period
            )));
        }
    }
    Ok(OrbitTable {
        complete: failures.is_empty(),
        entries,
        max_period,
        d0,
        failures,
    })
}

/// Number of primitive orbits with length at most `lam`. Rejects queries
/// beyond the completeness horizon `(max_period + 1) d0`.
pub fn pi_counting(table: &OrbitTable, lam: f64) -> Result<usize> {
    if !table.complete {
        return Err(Error::Domain(
            "orbit table is incomplete (solver failures recorded)".into(),
        ));
    }
    if lam > table.horizon() {
        return Err(Error::Horizon {
            requested: lam,
            horizon: table.horizon(),
        });
    }
    Ok(table.entries.iter().filter(|e| e.length <= lam).count())
}

/// The offset logarithmic integral `int_2^x du / ln(u)` by adaptive
/// Simpson quadrature to 1e-10 absolute.
pub fn li(x: f64) -> Result<f64> {
    if x < 2.0 {
        return Err(Error::Domain(format!("li domain starts at 2, got {x}")));
    }
    if x == 2.0 {
        return Ok(0.0);
    }
    let f = |u: f64| 1.0 / u.ln();
    Ok(adaptive_simpson(&f, 2.0, x, 1e-11, 48))
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Truncated zeta product `prod (1 - e^{-s l})^{-1}` over table entries
/// with length at most `length_cutoff`.
pub fn zeta_partial(table: &OrbitTable, s: Complex64, length_cutoff: f64) -> Result<Complex64> {
    if length_cutoff > table.horizon() {
        return Err(Error::Horizon {
            requested: length_cutoff,
            horizon: table.horizon(),
        });
    }
    let mut product = Complex64::new(1.0, 0.0);
    for entry in table.entries.iter().filter(|e| e.length <= length_cutoff) {
        let factor = Complex64::new(1.0, 0.0) - (-s * entry.length).exp();
        if factor.norm() < 1e-14 {
            return Err(Error::PoleProximity(factor.norm()));
        }
        product /= factor;
    }
    Ok(product)
}

/// One row of a counting report.
#[derive(Debug, Clone, Serialize)]
pub struct CountingRow {
    pub lambda: f64,
    pub pi: usize,
    pub li_value: f64,
    pub ratio: f64,
}

/// Counting rows `(lambda, pi(lambda), li(e^{h lambda}), ratio)` for a grid
/// of lengths within the table's horizon.
pub fn counting_report(table: &OrbitTable, entropy: f64, lambdas: &[f64]) -> Result<Vec<CountingRow>> {
    lambdas
        .iter()
        .map(|&lambda| {
            let pi = pi_counting(table, lambda)?;
            let li_value = li((entropy * lambda).exp().max(2.0))?;
            let ratio = if li_value > 0.0 {
                pi as f64 / li_value
            } else {
                f64::NAN
            };
            Ok(CountingRow {
                lambda,
                pi,
                li_value,
                ratio,
            })
        })
        .collect()
}
