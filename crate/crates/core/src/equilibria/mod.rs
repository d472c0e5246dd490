//! Equilibrium catalogues: exhaustive per-face root finding, eigenvalue
//! classification, and closed-form solvers for the star, triangle and
//! whisker families.

mod eigen;
mod families;
mod search;

pub use families::{
    star_equilibria, star_structured_eigen, star_tangency_curve, triangle_equilibria,
    triangle_structured_eigen, whisker_structured_eigen, whisker_symmetric_equilibria,
    BranchDirection, FamilyError, StarEquilibrium, TriangleEquilibrium, WhiskerEquilibrium,
};
pub use search::{find_equilibria, find_equilibria_with, SearchOptions};

use crate::dynamics::{self, SimplexPoint};
use crate::model::WarmModel;
use nalgebra::DMatrix;
use num_complex::Complex;
use serde::Serialize;
use thiserror::Error;

/// Half-width of the eigenvalue band treated as zero when classifying.
pub const EIG_EPS: f64 = 1e-8;
/// Catalogued equilibria must have drift sup-norm below this.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Points closer than this in sup-norm are considered the same equilibrium.
pub const DEDUP_RADIUS: f64 = 1e-7;
/// A point may be classified only if its residual is below this.
pub const CLASSIFY_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriaError {
    #[error("point is not an equilibrium: residual {0:e}")]
    NotAnEquilibrium(f64),
    #[error(transparent)]
    Dynamics(#[from] dynamics::DynamicsError),
}

/// Linear stability class from the Jacobian spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Critical,
}

impl std::fmt::Display for Stability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Critical => "critical",
        };
        write!(f, "{s}")
    }
}

/// An equilibrium point with its spectrum and classification.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub point: SimplexPoint,
    /// Colours with strictly positive weight.
    pub support: Vec<usize>,
    /// All n eigenvalues of the Jacobian (zero rows contribute -1).
    pub eigenvalues: Vec<Complex<f64>>,
    pub class: Stability,
    /// Sup-norm of the drift at the point.
    pub residual: f64,
}

impl Equilibrium {
    pub fn max_real_eigenvalue(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Search bookkeeping attached to a catalogue.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SearchMeta {
    pub faces_explored: usize,
    /// Faces where some positive-probability subset lies entirely in the
    /// zeroed colour set; searched with the indeterminate terms dropped but
    /// unable to hold equilibria.
    pub faces_flagged: usize,
    pub newton_failures: usize,
    pub starts_per_face: usize,
}

/// All equilibria found for one model at one exponent.
#[derive(Debug, Clone)]
pub struct EquilibriumCatalog {
    pub model_fingerprint: u64,
    pub alpha: f64,
    pub equilibria: Vec<Equilibrium>,
    pub meta: SearchMeta,
}

impl EquilibriumCatalog {
    pub fn stable(&self) -> impl Iterator<Item = &Equilibrium> {
        self.equilibria
            .iter()
            .filter(|e| e.class == Stability::Stable)
    }

    /// Closest catalogue entry in sup-norm.
    pub fn nearest(&self, v: &[f64]) -> Option<(usize, f64)> {
        self.equilibria
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let d = e
                    .point
                    .as_slice()
                    .iter()
                    .zip(v)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                (i, d)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let eqs: Vec<serde_json::Value> = self
            .equilibria
            .iter()
            .map(|e| {
                serde_json::json!({
                    "v": e.point.as_slice(),
                    "support": e.support,
                    "eigenvalues_re": e.eigenvalues.iter().map(|z| z.re).collect::<Vec<_>>(),
                    "eigenvalues_im": e.eigenvalues.iter().map(|z| z.im).collect::<Vec<_>>(),
                    "class": e.class,
                    "residual": e.residual,
                })
            })
            .collect();
        serde_json::json!({
            "schema": 1,
            "alpha": self.alpha,
            "equilibria": eqs,
            "meta": {
                "model_fingerprint": format!("{:016x}", self.model_fingerprint),
                "faces_explored": self.meta.faces_explored,
                "faces_flagged": self.meta.faces_flagged,
                "newton_failures": self.meta.newton_failures,
                "starts_per_face": self.meta.starts_per_face,
            },
        })
    }
}

/// Eigenvalues of a real matrix, sorted by (re, im). On the (very rare) QR
/// stall a deterministic perturbation two orders below the accuracy contract
/// breaks the cycle on retry.
pub(crate) fn sorted_spectrum(d: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let n = d.nrows();
    let scale = d.iter().fold(0.0f64, |m, &x| m.max(x.abs())).max(1e-300);
    let mut work = d.clone();
    let mut eig: Option<Vec<Complex<f64>>> = None;
    for attempt in 0..6u32 {
        if let Ok(values) = eigen::eigenvalues(&work) {
            eig = Some(values);
            break;
        }
        let eps = scale * 1e-12;
        let mut lcg: u64 = 0x248b_7a31 ^ u64::from(attempt + 1).wrapping_mul(0x9e37_79b9);
        for i in 0..n {
            for j in 0..n {
                lcg = lcg
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                work[(i, j)] = d[(i, j)] + eps * ((lcg >> 11) as f64 / (1u64 << 53) as f64 - 0.5);
            }
        }
    }
    let mut eig = eig.expect("eigenvalue iteration failed after perturbed retries");
    eig.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    eig
}

pub(crate) fn classify_spectrum(eig: &[Complex<f64>], eig_eps: f64) -> Stability {
    let max_re = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if max_re < -eig_eps {
        Stability::Stable
    } else if max_re > eig_eps {
        Stability::Unstable
    } else {
        Stability::Critical
    }
}

/// Classifies a point by the spectrum of the full Jacobian. The point must
/// already be an equilibrium (residual below [`CLASSIFY_RESIDUAL_TOL`]).
pub fn classify(model: &WarmModel, point: &SimplexPoint) -> Result<Equilibrium, EquilibriaError> {
    let f = dynamics::drift(model, point)?;
    let residual = f.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if residual >= CLASSIFY_RESIDUAL_TOL {
        return Err(EquilibriaError::NotAnEquilibrium(residual));
    }
    let d = dynamics::jacobian(model, point)?;
    let eigenvalues = sorted_spectrum(&d);
    let class = classify_spectrum(&eigenvalues, EIG_EPS);
    Ok(Equilibrium {
        point: point.clone(),
        support: point.support(),
        eigenvalues,
        class,
        residual,
    })
}

/// Per-colour positive lower bound on the nonzero components of any
/// equilibrium: `v_i >= (sum_{A ni i} (p_A/|A|)^(1-alpha))^(1/(1-alpha))`.
pub fn support_lower_bound(model: &WarmModel) -> Vec<f64> {
    let alpha = model.alpha();
    let n = model.n();
    let mut sums = vec![0.0f64; n];
    for &(mask, p) in model.dist().entries() {
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

/// `det(R + y w^T)` for diagonal `R`, valid even when `R` is singular:
/// `det(R) + sum_i w_i y_i prod_{j != i} R_jj`.
pub fn det_rank_one_update(r_diag: &[f64], y: &[f64], w: &[f64]) -> f64 {
    let n = r_diag.len();
    assert_eq!(y.len(), n);
    assert_eq!(w.len(), n);
    // prod_{j != i} R_jj via prefix/suffix products, no division.
    let mut prefix = vec![1.0f64; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] * r_diag[i];
    }
    let mut suffix = vec![1.0f64; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] * r_diag[i];
    }
    let det_r = prefix[n];
    let mut acc = det_r;
    for i in 0..n {
        acc += w[i] * y[i] * prefix[i] * suffix[i + 1];
    }
    acc
}
