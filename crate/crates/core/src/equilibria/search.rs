//! Exhaustive equilibrium search: every nonempty colour support is a face of
//! the simplex; on each face the remaining colours are fixed at zero and the
//! subset law is re-attributed by intersecting subsets with the support.
//! Damped Newton from quasi-random interior starts finds the face-interior
//! roots, which embed back as equilibria of the full system.
//!
//! A face is *flagged* when some positive-probability subset lies entirely in
//! the zeroed colour set: its terms are indeterminate there and are dropped.
//! The dropped mass leaks out of the component-sum identity, so flagged faces
//! cannot hold equilibria; they are still searched, and candidates are
//! rejected by the simplex-sum check.

use super::{
    classify_spectrum, sorted_spectrum, support_lower_bound, Equilibrium, EquilibriumCatalog,
    SearchMeta,
};
use crate::dynamics::{drift_raw, jacobian_raw, SimplexPoint};
use crate::model::WarmModel;
use nalgebra::DVector;

#[derive(Debug, Clone)]
pub struct SearchOptions {
    /// Newton starts per face: the face barycenter plus quasi-random interior
    /// points.
    pub starts_per_face: usize,
    pub max_newton_iter: usize,
    /// Newton is polished until the face residual falls below this.
    pub polish_tol: f64,
    /// Sup-norm radius below which two points are the same equilibrium.
    pub dedup_radius: f64,
    /// Catalogue admission threshold on the full-system residual.
    pub residual_tol: f64,
    /// Zero band for eigenvalue classification.
    pub eig_eps: f64,
    /// Above this colour count, face enumeration is abandoned and only the
    /// full simplex is multi-started.
    pub max_enumerated_colours: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            starts_per_face: 50,
            max_newton_iter: 80,
            polish_tol: 1e-12,
            dedup_radius: super::DEDUP_RADIUS,
            residual_tol: super::RESIDUAL_TOL,
            eig_eps: super::EIG_EPS,
            max_enumerated_colours: 20,
        }
    }
}

struct Face {
    /// Global colour indices, ascending.
    colours: Vec<usize>,
    /// Subset law re-attributed to local indices.
    entries: Vec<(u64, f64)>,
    /// Probability mass of subsets living entirely in the zeroed colours.
    dropped: f64,
}

fn reduce_face(model: &WarmModel, support: u64) -> Face {
    let colours: Vec<usize> = (0..model.n())
        .filter(|&i| support & (1u64 << i) != 0)
        .collect();
    let mut local_of = vec![usize::MAX; model.n()];
    for (local, &c) in colours.iter().enumerate() {
        local_of[c] = local;
    }
    let mut acc: std::collections::BTreeMap<u64, f64> = std::collections::BTreeMap::new();
    let mut dropped = 0.0;
    for &(mask, p) in model.dist().entries() {
        let hit = mask & support;
        if hit == 0 {
            dropped += p;
            continue;
        }
        let mut local_mask = 0u64;
        let mut m = hit;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            local_mask |= 1u64 << local_of[i];
            m &= m - 1;
        }
        *acc.entry(local_mask).or_insert(0.0) += p;
    }
    Face {
        colours,
        entries: acc.into_iter().collect(),
        dropped,
    }
}

const PRIMES: [usize; 64] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293, 307,
    311,
];

fn halton(mut index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// Deterministic low-discrepancy interior point of the d-simplex.
fn quasi_start(j: usize, d: usize) -> Vec<f64> {
    let mut u: Vec<f64> = (0..d)
        .map(|i| {
            let h = halton(j, PRIMES[i % PRIMES.len()]);
            -(1.0 - h).max(1e-12).ln() + 1e-9
        })
        .collect();
    let sum: f64 = u.iter().sum();
    for x in u.iter_mut() {
        *x /= sum;
    }
    u
}

/// Two-level starts: for every proper split of the face colours, most of the
/// mass on one side. The known equilibrium families are two-level on their
/// support, and their Newton basins can be thin; a dedicated start per split
/// makes the search complete for them regardless of the quasi-random budget.
fn pattern_starts(d: usize) -> Vec<Vec<f64>> {
    if d < 2 || d > 12 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for high_mask in 1u32..((1u32 << d) - 1) {
        let hi = high_mask.count_ones() as usize;
        let lo = d - hi;
        let hi_val = 0.75 / hi as f64;
        let lo_val = 0.25 / lo as f64;
        out.push(
            (0..d)
                .map(|i| {
                    if high_mask & (1 << i) != 0 {
                        hi_val
                    } else {
                        lo_val
                    }
                })
                .collect(),
        );
    }
    out
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

/// Damped Newton with Armijo backtracking on the squared residual, keeping
/// all components strictly positive. Returns the root or None.
fn newton_on_face(
    entries: &[(u64, f64)],
    alpha: f64,
    start: Vec<f64>,
    opts: &SearchOptions,
) -> Option<Vec<f64>> {
    let d = start.len();
    let mut u = start;
    let mut g = drift_raw(entries, alpha, &u, false).ok()?;
    for _ in 0..opts.max_newton_iter {
        if inf_norm(&g) < opts.polish_tol {
            return Some(u);
        }
        let jac = jacobian_raw(entries, alpha, &u, false).ok()?;
        let rhs = DVector::from_iterator(d, g.iter().map(|&x| -x));
        let delta = jac.lu().solve(&rhs)?;
        // Largest step keeping the iterate in the open positive orthant.
        let mut s: f64 = 1.0;
        for i in 0..d {
            if delta[i] < 0.0 {
                s = s.min(-0.95 * u[i] / delta[i]);
            }
        }
        let phi0: f64 = g.iter().map(|&x| x * x).sum::<f64>();
        let mut accepted = false;
        while s > 1e-12 {
            let cand: Vec<f64> = (0..d).map(|i| u[i] + s * delta[i]).collect();
            if cand.iter().all(|&x| x > 0.0) {
                if let Ok(gc) = drift_raw(entries, alpha, &cand, false) {
                    let phi: f64 = gc.iter().map(|&x| x * x).sum::<f64>();
                    if phi <= phi0 * (1.0 - 1e-4 * s) {
                        u = cand;
                        g = gc;
                        accepted = true;
                        break;
                    }
                }
            }
            s *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    if inf_norm(&g) < opts.polish_tol {
        Some(u)
    } else {
        None
    }
}

/// At a critical parameter the Jacobian is singular along one direction and
/// Newton stalls anywhere in a flat basin around the true root (the residual
/// is cubic in the offset). Refines the root along the near-null direction by
/// a scalar bisection of the directional residual.
fn critical_polish(entries: &[(u64, f64)], alpha: f64, u: &mut [f64]) {
    let d = u.len();
    let Ok(jac) = jacobian_raw(entries, alpha, u, false) else {
        return;
    };
    let svd = jac.svd(false, true);
    let mut idx = 0usize;
    let mut smin = f64::INFINITY;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s < smin {
            smin = s;
            idx = i;
        }
    }
    if smin > 1e-6 {
        return;
    }
    let vt = match svd.v_t.as_ref() {
        Some(m) => m,
        None => return,
    };
    let dir: Vec<f64> = (0..d).map(|j| vt[(idx, j)]).collect();
    let g = |s: f64| -> Option<f64> {
        let cand: Vec<f64> = (0..d).map(|i| u[i] + s * dir[i]).collect();
        if cand.iter().any(|&x| x <= 0.0) {
            return None;
        }
        let f = drift_raw(entries, alpha, &cand, false).ok()?;
        Some(dir.iter().zip(&f).map(|(a, b)| a * b).sum())
    };
    let mut bracket = None;
    let mut w = 1e-2;
    for _ in 0..12 {
        if let (Some(gm), Some(gp)) = (g(-w), g(w)) {
            if gm != 0.0 && gp != 0.0 && (gm > 0.0) != (gp > 0.0) {
                bracket = Some((-w, w, gm > 0.0));
                break;
            }
        }
        w *= 0.5;
    }
    let Some((mut lo, mut hi, sign_lo)) = bracket else {
        return;
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        match g(mid) {
            Some(v) if v == 0.0 => {
                lo = mid;
                hi = mid;
                break;
            }
            Some(v) => {
                if (v > 0.0) == sign_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            None => return,
        }
    }
    let s = 0.5 * (lo + hi);
    let cand: Vec<f64> = (0..d).map(|i| u[i] + s * dir[i]).collect();
    let old = drift_raw(entries, alpha, u, false)
        .map(|f| inf_norm(&f))
        .unwrap_or(f64::INFINITY);
    if let Ok(f) = drift_raw(entries, alpha, &cand, false) {
        if inf_norm(&f) <= old.max(1e-13) {
            u.copy_from_slice(&cand);
        }
    }
}

/// Positive lower bound for equilibrium components, evaluated on a face's
/// re-attributed law. Used to reject roots that collapsed onto a sub-face.
fn face_bounds(entries: &[(u64, f64)], alpha: f64, d: usize) -> Vec<f64> {
    let mut sums = vec![0.0f64; d];
    for &(mask, p) in entries {
        let size = mask.count_ones() as f64;
        let term = (p / size).powf(1.0 - alpha);
        let mut m = mask;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            sums[i] += term;
            m &= m - 1;
        }
    }
    sums.iter().map(|&s| s.powf(1.0 / (1.0 - alpha))).collect()
}

/// Finds all equilibria with default search options.
pub fn find_equilibria(model: &WarmModel) -> EquilibriumCatalog {
    find_equilibria_with(model, &SearchOptions::default())
}

/// Finds all equilibria: exhaustive face enumeration for up to
/// `max_enumerated_colours` colours, full-simplex multi-start beyond that.
pub fn find_equilibria_with(model: &WarmModel, opts: &SearchOptions) -> EquilibriumCatalog {
    let n = model.n();
    let alpha = model.alpha();
    let full: u64 = if n == 64 { !0 } else { (1u64 << n) - 1 };
    let mut meta = SearchMeta {
        starts_per_face: opts.starts_per_face,
        ..Default::default()
    };
    let global_bounds = support_lower_bound(model);

    let supports: Vec<u64> = if n <= opts.max_enumerated_colours {
        (1..=full).collect()
    } else {
        vec![full]
    };
    let extra_starts = if n <= opts.max_enumerated_colours {
        1
    } else {
        8
    };

    let mut found: Vec<(Vec<f64>, f64)> = Vec::new(); // (full point, residual)
    for support in supports {
        let face = reduce_face(model, support);
        meta.faces_explored += 1;
        let flagged = face.dropped > 0.0;
        if flagged {
            meta.faces_flagged += 1;
        }
        let d = face.colours.len();
        let bounds = face_bounds(&face.entries, alpha, d);
        let n_starts = opts.starts_per_face * extra_starts;
        let mut starts: Vec<Vec<f64>> = Vec::with_capacity(n_starts + (1 << d.min(16)));
        starts.push(vec![1.0 / d as f64; d]);
        starts.extend(pattern_starts(d));
        starts.extend((1..n_starts).map(|j| quasi_start(j, d)));
        for start in starts {
            let Some(mut root) = newton_on_face(&face.entries, alpha, start, opts) else {
                meta.newton_failures += 1;
                continue;
            };
            critical_polish(&face.entries, alpha, &mut root);
            // Roots off the simplex (flagged faces) or with a component that
            // undershoots the face's equilibrium bound belong elsewhere.
            let sum: f64 = root.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                continue;
            }
            if root.iter().zip(&bounds).any(|(&x, &b)| x < 0.5 * b) {
                continue;
            }
            let mut point = vec![0.0f64; n];
            for (local, &c) in face.colours.iter().enumerate() {
                point[c] = root[local];
            }
            let Ok(resid_vec) = drift_raw(model.dist().entries(), alpha, &point, false) else {
                continue;
            };
            let residual = inf_norm(&resid_vec);
            if residual > opts.residual_tol {
                continue;
            }
            // Same root when closer than the dedup radius, or when the
            // midpoint also has vanishing residual: near a critical parameter
            // Newton endpoints smear across a flat basin around one root.
            let mut duplicate = false;
            for (q, qres) in found.iter_mut() {
                let dist = point
                    .iter()
                    .zip(q.iter())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                let same = dist < opts.dedup_radius
                    || (dist < 1e-2 && {
                        let mid: Vec<f64> = point
                            .iter()
                            .zip(q.iter())
                            .map(|(a, b)| 0.5 * (a + b))
                            .collect();
                        matches!(
                            drift_raw(model.dist().entries(), alpha, &mid, false),
                            Ok(f) if inf_norm(&f) < opts.residual_tol
                        )
                    });
                if same {
                    duplicate = true;
                    if residual < *qres {
                        *q = point.clone();
                        *qres = residual;
                    }
                    break;
                }
            }
            if !duplicate {
                found.push((point, residual));
            }
        }
    }

    let mut equilibria: Vec<Equilibrium> = found
        .into_iter()
        .map(|(point, residual)| {
            let jac = jacobian_raw(model.dist().entries(), alpha, &point, false)
                .expect("admitted point has no degenerate subset");
            let eigenvalues = sorted_spectrum(&jac);
            let class = classify_spectrum(&eigenvalues, opts.eig_eps);
            let sp = SimplexPoint::new(point).expect("admitted point is on the simplex");
            Equilibrium {
                support: sp.support(),
                point: sp,
                eigenvalues,
                class,
                residual,
            }
        })
        .collect();
    // Catalogued equilibria respect the global per-colour bound; anything
    // below it is a solver artefact.
    equilibria.retain(|e| {
        e.support
            .iter()
            .all(|&i| e.point[i] >= 0.5 * global_bounds[i])
    });
    equilibria.sort_by(|a, b| {
        let pa = a.point.as_slice();
        let pb = b.point.as_slice();
        for (x, y) in pa.iter().zip(pb) {
            match x.total_cmp(y) {
                std::cmp::Ordering::Equal => continue,
                other => return other.reverse(),
            }
        }
        std::cmp::Ordering::Equal
    });

    EquilibriumCatalog {
        model_fingerprint: model.fingerprint(),
        alpha,
        equilibria,
        meta,
    }
}
