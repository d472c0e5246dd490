//! Closed-form and semi-closed-form equilibrium solvers for the star,
//! triangle and symmetric whisker families, together with their structured
//! eigenvalue formulas.
//!
//! Each family reduces the equilibrium system to a scalar equation in
//! `t = ln(ratio of the two distinct component values)`. Brackets for the
//! bisections come from the monotonicity/convexity structure of these scalar
//! curves (inflection points, tangency slopes), not from blind scanning.

use super::{classify, Stability};
use crate::dynamics::SimplexPoint;
use crate::model::{build_cycle, build_whisker, graph_to_warm};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyError {
    #[error("bad family parameters: {0}")]
    BadParams(String),
    #[error("input is not an equilibrium of the family (residual {0:e})")]
    NotAnEquilibrium(f64),
}

/// Direction of the branch's dominant component as a function of alpha.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchDirection {
    Increasing,
    Decreasing,
}

/// A two-level star equilibrium `((v)_k, (u)_{n-k})` with `v > u`.
#[derive(Debug, Clone, Copy)]
pub struct StarEquilibrium {
    pub v: f64,
    pub u: f64,
    /// `t = ln(v/u)`.
    pub t: f64,
    pub direction: BranchDirection,
}

fn bisect(lo: f64, hi: f64, sign_lo_positive: bool, g: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let val = g(mid);
        if val == 0.0 {
            return mid;
        }
        if (val > 0.0) == sign_lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Finds a point approaching `limit` from `from` where `g > 0`.
fn expand_towards(limit: f64, from: f64, g: impl Fn(f64) -> f64) -> Option<f64> {
    for j in 1..=100 {
        let t = limit - (limit - from) * 0.5f64.powi(j);
        if g(t) > 0.0 {
            return Some(t);
        }
    }
    None
}

/// The scalar curve whose intersections with `y = alpha t` are the two-level
/// star equilibria.
pub(crate) struct StarCurve {
    pub a: f64,
    pub b: f64,
    pub ln_b: f64,
    /// Inflection point `ln(ab)/2`.
    pub t_inflect: f64,
    c: f64,
}

impl StarCurve {
    pub fn new(n: usize, k: usize) -> Self {
        let a = (n - k) as f64 / (n - k + 1) as f64;
        let b = (1 + k) as f64 / k as f64;
        Self {
            a,
            b,
            ln_b: b.ln(),
            t_inflect: (a * b).ln() / 2.0,
            c: (n + 1 - k) as f64 / k as f64,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let e = t.exp();
        self.c.ln() + (e - self.a).ln() - (self.b - e).ln()
    }

    pub fn slope(&self, t: f64) -> f64 {
        let e = t.exp();
        self.a / (e - self.a) + self.b / (self.b - e)
    }
}

fn star_point(n: usize, k: usize, t: f64) -> (f64, f64) {
    let u = 1.0 / (n as f64 + k as f64 * (t.exp() - 1.0));
    (t.exp() * u, u)
}

/// All two-level equilibria `((v)_k, (u)_{n-k})`, `v > u`, of the star graph
/// with `n` edges. Returns 0, 1 or 2 solutions depending on the regime.
pub fn star_equilibria(
    n: usize,
    k: usize,
    alpha: f64,
) -> Result<Vec<StarEquilibrium>, FamilyError> {
    if n < 2 || k == 0 || k >= n {
        return Err(FamilyError::BadParams(format!(
            "need 1 <= k <= n-1, got n={n} k={k}"
        )));
    }
    if !(alpha > 1.0) {
        return Err(FamilyError::BadParams(format!(
            "alpha must be > 1, got {alpha}"
        )));
    }
    let curve = StarCurve::new(n, k);
    let g = |t: f64| curve.value(t) - alpha * t;
    let np1 = (n + 1) as f64;
    let mut out = Vec::new();

    let push = |out: &mut Vec<StarEquilibrium>, t: f64, direction: BranchDirection| {
        let (v, u) = star_point(n, k, t);
        out.push(StarEquilibrium { v, u, t, direction });
    };

    if curve.t_inflect > 0.0 {
        // k < n/2: the curve is concave then convex past the inflection; the
        // slope decreases to its minimum there, then increases without bound.
        let slope_min = curve.slope(curve.t_inflect);
        if alpha <= slope_min {
            return Ok(out);
        }
        let t_hi = bisect(curve.t_inflect, curve.ln_b - 1e-15, true, |t| {
            alpha - curve.slope(t)
        });
        if alpha >= np1 {
            // Single solution past the slope-matching point.
            if let Some(ub) = expand_towards(curve.ln_b, t_hi, g) {
                push(
                    &mut out,
                    bisect(t_hi, ub, false, g),
                    BranchDirection::Increasing,
                );
            }
        } else {
            let g_hi = g(t_hi);
            if g_hi < 0.0 {
                // Two solutions straddling the line's second tangency window.
                let t_lo = bisect(1e-300, curve.t_inflect, false, |t| alpha - curve.slope(t));
                push(
                    &mut out,
                    bisect(t_lo, t_hi, true, g),
                    BranchDirection::Decreasing,
                );
                if let Some(ub) = expand_towards(curve.ln_b, t_hi, g) {
                    push(
                        &mut out,
                        bisect(t_hi, ub, false, g),
                        BranchDirection::Increasing,
                    );
                }
            } else if g_hi == 0.0 {
                // Exact tangency: a double root.
                push(&mut out, t_hi, BranchDirection::Increasing);
            }
        }
    } else {
        // k >= n/2: the curve is convex on (0, ln b) with initial slope n+1,
        // so a (unique) solution exists if and only if alpha > n+1.
        if alpha > np1 {
            let t_hi = bisect(1e-300, curve.ln_b - 1e-15, true, |t| alpha - curve.slope(t));
            if let Some(ub) = expand_towards(curve.ln_b, t_hi, g) {
                push(
                    &mut out,
                    bisect(t_hi, ub, false, g),
                    BranchDirection::Increasing,
                );
            }
        }
    }
    Ok(out)
}

/// Tangency of the line `y = alpha t` with the star curve, for `k < n/2`.
/// Returns `(t, alpha)` at the tangency point; this alpha is the birth point
/// of the two-level star branches.
pub fn star_tangency_curve(n: usize, k: usize) -> Result<(f64, f64), FamilyError> {
    if k == 0 || 2 * k >= n {
        return Err(FamilyError::BadParams(format!(
            "tangency regime needs 1 <= k < n/2, got n={n} k={k}"
        )));
    }
    let curve = StarCurve::new(n, k);
    // At tangency t f'(t) = f(t); the defect t f'(t) - f(t) is strictly
    // increasing past the inflection point and negative at it.
    let defect = |t: f64| t * curve.slope(t) - curve.value(t);
    if defect(curve.t_inflect) >= 0.0 {
        return Err(FamilyError::BadParams(
            "no tangency past the inflection point".into(),
        ));
    }
    let ub = expand_towards(curve.ln_b, curve.t_inflect, defect)
        .ok_or_else(|| FamilyError::BadParams("tangency bracket not found".into()))?;
    let t_star = bisect(curve.t_inflect, ub, false, defect);
    Ok((t_star, curve.slope(t_star)))
}

/// Closed-form spectrum at a two-level star equilibrium, as
/// (eigenvalue, multiplicity) pairs summing to n.
pub fn star_structured_eigen(
    n: usize,
    k: usize,
    v: f64,
    u: f64,
    alpha: f64,
) -> Result<Vec<(f64, usize)>, FamilyError> {
    let np1 = (n + 1) as f64;
    let eta = k as f64 * v.powf(alpha) + (n - k) as f64 * u.powf(alpha);
    let eq = |x: f64| x - 1.0 / np1 - x.powf(alpha) / (np1 * eta);
    let balance = k as f64 * v + (n - k) as f64 * u - 1.0;
    let worst = eq(v).abs().max(eq(u).abs()).max(balance.abs());
    if worst > 1e-10 {
        return Err(FamilyError::NotAnEquilibrium(worst));
    }
    let xi = alpha / (np1 * eta * eta);
    let mut eig = vec![(-1.0, 1), (-1.0 + xi * (u * v).powf(alpha - 1.0), 1)];
    if k >= 2 {
        eig.push((-1.0 + xi * eta * v.powf(alpha - 1.0), k - 1));
    }
    if n - k >= 2 {
        eig.push((-1.0 + xi * eta * u.powf(alpha - 1.0), n - k - 1));
    }
    Ok(eig)
}

/// One equilibrium branch of the triangle, listed with components in
/// decreasing order.
#[derive(Debug, Clone)]
pub struct TriangleEquilibrium {
    /// Branch tag: "uniform", "half-half-zero", "asym-zero", "low-pair",
    /// "high-pair".
    pub branch: &'static str,
    pub point: [f64; 3],
    pub class: Stability,
}

fn triangle_scalar(t: f64) -> f64 {
    (3.0 / (4.0 - t.exp())).ln()
}

/// All equilibria of the triangle at the given exponent, with components
/// sorted in decreasing order and classified by the dense eigensolver.
pub fn triangle_equilibria(alpha: f64) -> Result<Vec<TriangleEquilibrium>, FamilyError> {
    if !(alpha > 1.0) {
        return Err(FamilyError::BadParams(format!(
            "alpha must be > 1, got {alpha}"
        )));
    }
    let model = graph_to_warm(&build_cycle(3).unwrap(), alpha).unwrap();
    let classify_point = |p: [f64; 3]| -> Stability {
        let sp = SimplexPoint::new(p.to_vec()).expect("family point on simplex");
        classify(&model, &sp)
            .expect("family point is an equilibrium")
            .class
    };
    let mut out = Vec::new();

    let third = 1.0 / 3.0;
    out.push(TriangleEquilibrium {
        branch: "uniform",
        point: [third; 3],
        class: classify_point([third; 3]),
    });
    out.push(TriangleEquilibrium {
        branch: "half-half-zero",
        point: [0.5, 0.5, 0.0],
        class: classify_point([0.5, 0.5, 0.0]),
    });
    if alpha > 3.0 {
        // The positive-support pair on a zeroed edge is the two-edge star
        // equilibrium.
        let star = star_equilibria(2, 1, alpha)?;
        if let Some(s) = star.first() {
            out.push(TriangleEquilibrium {
                branch: "asym-zero",
                point: [s.v, s.u, 0.0],
                class: classify_point([s.v, s.u, 0.0]),
            });
        }
    }
    // Interior pairs solve ln(3/(4 - e^t)) = (alpha - 1) t; the curve is
    // convex with slope 1/3 at zero, so the sign of alpha - 4/3 picks the
    // root's side. The minimum of the defect sits where e^t = 4(1 - 1/alpha).
    let g = |t: f64| triangle_scalar(t) - (alpha - 1.0) * t;
    let t_min = (4.0 * (1.0 - 1.0 / alpha)).ln();
    if alpha < 4.0 / 3.0 {
        // Negative root: components (v, v, u) with u < v.
        let mut t_left = -1.0;
        while g(t_left) <= 0.0 {
            t_left *= 2.0;
        }
        let t = bisect(t_left, t_min, true, g);
        let v = 1.0 / (2.0 + t.exp());
        let u = t.exp() * v;
        out.push(TriangleEquilibrium {
            branch: "low-pair",
            point: [v, v, u],
            class: classify_point([v, v, u]),
        });
    } else if alpha > 4.0 / 3.0 {
        // Positive root: components (v, u, u) with v > u.
        if let Some(ub) = expand_towards(4f64.ln(), t_min, g) {
            let t = bisect(t_min, ub, false, g);
            let u = 1.0 / (2.0 + t.exp());
            let v = t.exp() * u;
            out.push(TriangleEquilibrium {
                branch: "high-pair",
                point: [v, u, u],
                class: classify_point([v, u, u]),
            });
        }
    }
    Ok(out)
}

/// Closed-form spectrum at a triangle equilibrium of shape `(v, u, u)` (or a
/// permutation): `{-1, -1 + eta/(uv), -1 + (alpha + 6 eta)/(6u)}` with
/// `eta = alpha (uv)^alpha / (3 (u^alpha + v^alpha)^2)`.
pub fn triangle_structured_eigen(v: f64, u: f64, alpha: f64) -> Result<[f64; 3], FamilyError> {
    let model = graph_to_warm(&build_cycle(3).unwrap(), alpha).unwrap();
    let point = SimplexPoint::new(vec![v, u, u])
        .map_err(|_| FamilyError::NotAnEquilibrium(f64::INFINITY))?;
    let f = crate::dynamics::drift(&model, &point)
        .map_err(|_| FamilyError::NotAnEquilibrium(f64::INFINITY))?;
    let residual = f.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if residual > 1e-10 {
        return Err(FamilyError::NotAnEquilibrium(residual));
    }
    let eta = alpha * (u * v).powf(alpha) / (3.0 * (u.powf(alpha) + v.powf(alpha)).powi(2));
    Ok([
        -1.0,
        -1.0 + eta / (u * v),
        -1.0 + (alpha + 6.0 * eta) / (6.0 * u),
    ])
}

/// A symmetric whisker equilibrium `((v)_r, u, (v)_r)` with hub edge `u > v`.
#[derive(Debug, Clone, Copy)]
pub struct WhiskerEquilibrium {
    /// Common value of the 2r leaf edges.
    pub leaf: f64,
    /// Hub-hub edge value.
    pub hub: f64,
    /// `t = ln(hub/leaf)`, in (0, ln 2).
    pub t: f64,
    pub stable: bool,
}

/// Positive-hub equilibria of the symmetric whisker with `r` leaves per hub:
/// solutions of `(alpha - 1) t = ln((r+1)/(2 - e^t))` on (0, ln 2). Returns
/// 0 or 2 entries, ordered by t; at most one is stable.
pub fn whisker_symmetric_equilibria(
    r: usize,
    alpha: f64,
) -> Result<Vec<WhiskerEquilibrium>, FamilyError> {
    if r < 1 {
        return Err(FamilyError::BadParams("whisker needs r >= 1".into()));
    }
    if !(alpha > 1.0) {
        return Err(FamilyError::BadParams(format!(
            "alpha must be > 1, got {alpha}"
        )));
    }
    let rf = r as f64;
    let h = |t: f64| ((rf + 1.0) / (2.0 - t.exp())).ln();
    let g = |t: f64| h(t) - (alpha - 1.0) * t;
    // The defect g is convex with g(0) = ln(r+1) > 0; its minimum sits where
    // e^t = 2(1 - 1/alpha), which enters (0, ln 2) only for alpha > 2.
    if alpha <= 2.0 {
        return Ok(Vec::new());
    }
    let t_min = (2.0 * (1.0 - 1.0 / alpha)).ln();
    if g(t_min) >= 0.0 {
        return Ok(Vec::new());
    }
    let ln2 = 2f64.ln();
    let t1 = bisect(0.0, t_min, true, g);
    let ub = expand_towards(ln2, t_min, g)
        .ok_or_else(|| FamilyError::BadParams("upper bracket not found".into()))?;
    let t2 = bisect(t_min, ub, false, g);

    let make = |t: f64| -> WhiskerEquilibrium {
        let leaf = 1.0 / (2.0 * rf + t.exp());
        let hub = t.exp() * leaf;
        let delta = rf * leaf.powf(alpha) + hub.powf(alpha);
        let xi = alpha / (2.0 * (rf + 1.0) * delta * delta);
        let cond_hub = xi * hub.powf(alpha - 1.0) * leaf.powf(alpha - 1.0) < 1.0;
        let cond_leaf = r < 2 || delta * xi * leaf.powf(alpha - 1.0) < 1.0;
        WhiskerEquilibrium {
            leaf,
            hub,
            t,
            stable: cond_hub && cond_leaf,
        }
    };
    Ok(vec![make(t1), make(t2)])
}

/// Closed-form spectrum at a symmetric whisker equilibrium, as
/// (eigenvalue, multiplicity) pairs summing to 2r + 1.
pub fn whisker_structured_eigen(
    r: usize,
    v: f64,
    u_hub: f64,
    alpha: f64,
) -> Result<Vec<(f64, usize)>, FamilyError> {
    if r < 1 {
        return Err(FamilyError::BadParams("whisker needs r >= 1".into()));
    }
    let model = graph_to_warm(&build_whisker(r, r).unwrap(), alpha)
        .map_err(|e| FamilyError::BadParams(e.to_string()))?;
    let mut coords = vec![v; 2 * r + 1];
    coords[r] = u_hub;
    let point =
        SimplexPoint::new(coords).map_err(|_| FamilyError::NotAnEquilibrium(f64::INFINITY))?;
    let f = crate::dynamics::drift(&model, &point)
        .map_err(|_| FamilyError::NotAnEquilibrium(f64::INFINITY))?;
    let residual = f.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if residual > 1e-10 {
        return Err(FamilyError::NotAnEquilibrium(residual));
    }
    let rf = r as f64;
    let delta = rf * v.powf(alpha) + u_hub.powf(alpha);
    let xi = alpha / (2.0 * (rf + 1.0) * delta * delta);
    let mut eig = vec![
        (-1.0, 1),
        (xi * u_hub.powf(alpha - 1.0) * v.powf(alpha - 1.0) - 1.0, 1),
        (xi * v.powf(alpha - 1.0) * u_hub.powf(alpha) - 1.0, 1),
    ];
    if r >= 2 {
        // One copy per leaf block on each side of the hub.
        eig.push((delta * xi * v.powf(alpha - 1.0) - 1.0, 2 * (r - 1)));
    }
    Ok(eig)
}
