//! Critical exponents: closed forms where the families admit them, certified
//! scalar bisections where they do not. Every bracket comes from the
//! monotonicity/convexity structure of the underlying scalar curve.

use crate::equilibria::{star_tangency_curve, FamilyError};
use crate::model::{check_symmetry, WarmModel};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThresholdError {
    #[error("model does not satisfy strong symmetry")]
    NotStronglySymmetric,
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Family(#[from] FamilyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Bisection,
}

/// A critical exponent with its provenance.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdResult {
    pub family: String,
    pub params: serde_json::Value,
    pub alpha_star: f64,
    pub method: Method,
    /// False when the relevant equilibrium is unstable for every exponent
    /// (even cycles, complete graphs beyond the triangle); `alpha_star` is
    /// then reported as 1.
    pub exists: bool,
    /// Set when the uniform-threshold formula was evaluated outside its
    /// hypothesis (full-subset probability equal to 1).
    pub precondition_violated: bool,
}

impl ThresholdResult {
    fn closed(family: &str, params: serde_json::Value, alpha_star: f64) -> Self {
        Self {
            family: family.into(),
            params,
            alpha_star,
            method: Method::ClosedForm,
            exists: true,
            precondition_violated: false,
        }
    }

    fn none(family: &str, params: serde_json::Value) -> Self {
        Self {
            family: family.into(),
            params,
            alpha_star: 1.0,
            method: Method::ClosedForm,
            exists: false,
            precondition_violated: false,
        }
    }
}

/// Stability threshold of the uniform point for strongly symmetric models:
/// `alpha* = 1 / (n^2 sum_{m>=2} (p_m/m^2) C(n-2, m-2))`.
pub fn uniform_threshold(model: &WarmModel) -> Result<ThresholdResult, ThresholdError> {
    let rep = check_symmetry(model.dist());
    if !rep.strong {
        return Err(ThresholdError::NotStronglySymmetric);
    }
    let n = model.n();
    let mut denom = 0.0f64;
    let mut p_full = 0.0f64;
    for c in &rep.size_classes {
        if c.size == n {
            p_full = c.prob;
        }
        if c.size >= 2 {
            let ratio = n as f64 / c.size as f64;
            denom += c.prob * ratio * ratio * crate::model::binomial(n - 2, c.size - 2) as f64;
        }
    }
    let mut out = ThresholdResult::closed(
        "uniform",
        serde_json::json!({ "n": n }),
        if denom > 0.0 {
            1.0 / denom
        } else {
            f64::INFINITY
        },
    );
    if p_full >= 1.0 {
        out.precondition_violated = true;
    }
    Ok(out)
}

/// Uniform-point threshold on the cycle with `n` edges: `cos(pi/2n)^-2` for
/// odd `n`, no threshold for even `n`.
pub fn cycle_threshold(n: usize) -> Result<ThresholdResult, ThresholdError> {
    if n < 3 {
        return Err(ThresholdError::BadParams(format!(
            "cycle needs n >= 3, got {n}"
        )));
    }
    let params = serde_json::json!({ "n": n });
    if n % 2 == 0 {
        Ok(ThresholdResult::none("cycle", params))
    } else {
        let c = (std::f64::consts::PI / (2.0 * n as f64)).cos();
        Ok(ThresholdResult::closed("cycle", params, 1.0 / (c * c)))
    }
}

/// Uniform-point threshold on the complete graph: 4/3 for the triangle, no
/// threshold for four or more vertices.
pub fn complete_threshold(n_v: usize) -> Result<ThresholdResult, ThresholdError> {
    if n_v < 3 {
        return Err(ThresholdError::BadParams(format!(
            "complete graph needs n_v >= 3, got {n_v}"
        )));
    }
    let params = serde_json::json!({ "n_v": n_v });
    if n_v == 3 {
        Ok(ThresholdResult::closed("complete", params, 4.0 / 3.0))
    } else {
        Ok(ThresholdResult::none("complete", params))
    }
}

/// Stability threshold of the partially-supported uniform point
/// `((1/k)_k, (0)_{n-k})` in the fixed-size-m subset model, for
/// `k >= n - m + 1`.
pub fn reduced_fixed_m_threshold(
    n: usize,
    m: usize,
    k: usize,
) -> Result<ThresholdResult, ThresholdError> {
    if m == 0 || m > n {
        return Err(ThresholdError::BadParams(format!(
            "need 1 <= m <= n, got n={n} m={m}"
        )));
    }
    if k + m < n + 1 || k > n {
        return Err(ThresholdError::BadParams(format!(
            "need n-m+1 <= k <= n, got n={n} m={m} k={k}"
        )));
    }
    let lo = m.saturating_sub(k);
    let hi = (n - k).min(m.saturating_sub(2));
    let mut denom = 0.0f64;
    if m >= 2 {
        for r in lo..=hi {
            let inner = if k >= 2 {
                crate::model::binomial(k - 2, m - r - 2)
            } else {
                0
            };
            denom +=
                crate::model::binomial(n - k, r) as f64 * inner as f64 / ((m - r) * (m - r)) as f64;
        }
    }
    let kk = (k * k) as f64;
    let alpha_star = if denom > 0.0 {
        crate::model::binomial(n, m) as f64 / (kk * denom)
    } else {
        f64::INFINITY
    };
    Ok(ThresholdResult::closed(
        "fixed_m_reduced",
        serde_json::json!({ "n": n, "m": m, "k": k }),
        alpha_star,
    ))
}

/// Birth exponent of the two-level star branches for `1 <= k < n/2`,
/// from the tangency of `y = alpha t` with the star curve.
pub fn star_tangency_alpha(n: usize, k: usize) -> Result<ThresholdResult, ThresholdError> {
    let (_, alpha) = star_tangency_curve(n, k)?;
    Ok(ThresholdResult {
        family: "star_tangency".into(),
        params: serde_json::json!({ "n": n, "k": k }),
        alpha_star: alpha,
        method: Method::Bisection,
        exists: true,
        precondition_violated: false,
    })
}

/// Birth exponent of the positive-hub equilibria on the symmetric whisker
/// with `r` leaves per hub: the unique root of
/// `(alpha-1) ln(2(alpha-1)) - alpha ln(alpha) = ln((1+r)/2)`.
pub fn whisker_alpha_r(r: usize) -> Result<ThresholdResult, ThresholdError> {
    if r < 1 {
        return Err(ThresholdError::BadParams("whisker needs r >= 1".into()));
    }
    let target = ((1.0 + r as f64) / 2.0).ln();
    let g = |a: f64| (a - 1.0) * (2.0 * (a - 1.0)).ln() - a * a.ln() - target;
    // g dips to -inf slope at 1+ and grows without bound; it is negative on
    // (1, root) and positive after, so plain bisection applies.
    let mut lo = 1.0 + 1e-9;
    let mut hi = 100.0;
    debug_assert!(g(lo) < 0.0 && g(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThresholdResult {
        family: "whisker".into(),
        params: serde_json::json!({ "r": r }),
        alpha_star: 0.5 * (lo + hi),
        method: Method::Bisection,
        exists: true,
        precondition_violated: false,
    })
}
