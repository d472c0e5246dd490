//! Mean-field dynamics: the drift field whose zeros are the candidate
//! limiting proportions, its Jacobian, a Lyapunov function that increases
//! along the flow, and a fixed-step RK4 integrator that stays on the simplex.
//!
//! Conventions on faces: powers of zero components are taken as 0 (consistent
//! with the `alpha > 1` limit), so a zero component contributes nothing to
//! any subset weight and its Jacobian row collapses to `-1` on the diagonal.
//! A positive-probability subset whose components are all zero makes the
//! field genuinely indeterminate (0/0) and is reported as a degenerate-face
//! error.

use crate::model::WarmModel;
use nalgebra::DMatrix;
use serde::Serialize;
use std::io::{self, Write};
use thiserror::Error;

/// Tolerance on the simplex sum constraint.
pub const SIMPLEX_SUM_TOL: f64 = 1e-10;
/// Drift components must sum to zero within this.
pub const DRIFT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("point has {got} components, model has {expect} colours")]
    DimensionMismatch { expect: usize, got: usize },
    #[error("component {idx} is negative ({value})")]
    NegativeComponent { idx: usize, value: f64 },
    #[error("components sum to {0}, not 1 within {SIMPLEX_SUM_TOL}")]
    NotNormalized(f64),
    #[error("degenerate face: positive-probability subset {mask:#x} has all-zero weight")]
    DegenerateFace { mask: u64 },
    #[error("integration step must be positive, got {0}")]
    BadStep(f64),
    #[error("non-finite state at t = {time}")]
    NonFinite { time: f64 },
    #[error("state left the simplex at t = {time} (component {idx} = {value})")]
    LeftSimplex { time: f64, idx: usize, value: f64 },
}

/// A probability vector: nonnegative components summing to 1 within
/// [`SIMPLEX_SUM_TOL`]. Tiny negative roundoff (>= -1e-12) is clamped to 0 on
/// construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    pub fn new(mut v: Vec<f64>) -> Result<Self, DynamicsError> {
        for (i, x) in v.iter_mut().enumerate() {
            if *x < 0.0 {
                if *x >= -1e-12 {
                    *x = 0.0;
                } else {
                    return Err(DynamicsError::NegativeComponent { idx: i, value: *x });
                }
            }
        }
        let sum: f64 = v.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(DynamicsError::NotNormalized(sum));
        }
        Ok(Self(v))
    }

    /// The barycenter (1/n, ..., 1/n).
    pub fn barycenter(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    /// Normalizes a nonnegative vector by its sum.
    pub fn project(mut v: Vec<f64>) -> Result<Self, DynamicsError> {
        let sum: f64 = v.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(DynamicsError::NotNormalized(sum));
        }
        for x in v.iter_mut() {
            *x /= sum;
        }
        Self::new(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Colour indices with strictly positive weight.
    pub fn support(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| self.0[i] > 0.0).collect()
    }
}

impl std::ops::Index<usize> for SimplexPoint {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

// ---------------------------------------------------------------------------
// Raw kernels over (mask, prob) entry lists. These back both full models and
// the face-restricted systems used by the equilibrium search.
// ---------------------------------------------------------------------------

#[inline]
pub(crate) fn pow_zero_safe(v: f64, e: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.powf(e)
    }
}

/// v^alpha and v^(alpha-1) componentwise, with 0 short-circuited.
pub(crate) fn powers(alpha: f64, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let xa: Vec<f64> = v.iter().map(|&x| pow_zero_safe(x, alpha)).collect();
    let qa: Vec<f64> = v.iter().map(|&x| pow_zero_safe(x, alpha - 1.0)).collect();
    (xa, qa)
}

/// Drift over a raw entry list. `lenient` drops all-zero subsets instead of
/// erroring; the dropped probability mass then leaks out of the component sum.
pub(crate) fn drift_raw(
    entries: &[(u64, f64)],
    alpha: f64,
    v: &[f64],
    lenient: bool,
) -> Result<Vec<f64>, DynamicsError> {
    let n = v.len();
    let (xa, _) = powers(alpha, v);
    let mut rate = vec![0.0f64; n];
    for &(mask, p) in entries {
        let mut s = 0.0;
        let mut m = mask;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            s += xa[i];
            m &= m - 1;
        }
        if s <= 0.0 {
            if lenient {
                continue;
            }
            return Err(DynamicsError::DegenerateFace { mask });
        }
        let c = p / s;
        let mut m = mask;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            rate[i] += c * xa[i];
            m &= m - 1;
        }
    }
    Ok((0..n).map(|i| rate[i] - v[i]).collect())
}

/// Jacobian of the drift over a raw entry list.
pub(crate) fn jacobian_raw(
    entries: &[(u64, f64)],
    alpha: f64,
    v: &[f64],
    lenient: bool,
) -> Result<DMatrix<f64>, DynamicsError> {
    let n = v.len();
    let (xa, qa) = powers(alpha, v);
    let mut diag_acc = vec![0.0f64; n];
    let mut pair_acc = DMatrix::<f64>::zeros(n, n);
    let mut idx = Vec::with_capacity(64);
    for &(mask, p) in entries {
        idx.clear();
        let mut s = 0.0;
        let mut m = mask;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            idx.push(i);
            s += xa[i];
            m &= m - 1;
        }
        if s <= 0.0 {
            if lenient {
                continue;
            }
            return Err(DynamicsError::DegenerateFace { mask });
        }
        let inv_s2 = p / (s * s);
        for &i in &idx {
            diag_acc[i] += inv_s2 * (s - xa[i]);
            for &k in &idx {
                if k != i {
                    pair_acc[(i, k)] += inv_s2;
                }
            }
        }
    }
    let mut d = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = -1.0 + alpha * qa[i] * diag_acc[i];
        for k in 0..n {
            if k != i {
                d[(i, k)] = -alpha * qa[k] * xa[i] * pair_acc[(i, k)];
            }
        }
    }
    Ok(d)
}

fn check_dims(model: &WarmModel, v: &SimplexPoint) -> Result<(), DynamicsError> {
    if v.len() != model.n() {
        return Err(DynamicsError::DimensionMismatch {
            expect: model.n(),
            got: v.len(),
        });
    }
    Ok(())
}

/// The mean-field drift F(v). Components sum to zero within
/// [`DRIFT_SUM_TOL`]; zero components contribute nothing.
pub fn drift(model: &WarmModel, v: &SimplexPoint) -> Result<Vec<f64>, DynamicsError> {
    check_dims(model, v)?;
    drift_raw(model.dist().entries(), model.alpha(), v.as_slice(), false)
}

/// Drift evaluated at an arbitrary nonnegative vector. The field extends
/// smoothly off the simplex; finite-difference probes need that extension.
pub fn drift_at(model: &WarmModel, v: &[f64]) -> Result<Vec<f64>, DynamicsError> {
    if v.len() != model.n() {
        return Err(DynamicsError::DimensionMismatch {
            expect: model.n(),
            got: v.len(),
        });
    }
    drift_raw(model.dist().entries(), model.alpha(), v, false)
}

/// Lyapunov value at an arbitrary nonnegative vector; see [`drift_at`].
pub fn lyapunov_at(model: &WarmModel, v: &[f64]) -> Result<f64, DynamicsError> {
    if v.len() != model.n() {
        return Err(DynamicsError::DimensionMismatch {
            expect: model.n(),
            got: v.len(),
        });
    }
    lyapunov_raw(model.dist().entries(), model.alpha(), v)
}

/// The matrix of partial derivatives of the drift at `v`. Rows of zero
/// components collapse to -1 on the diagonal.
pub fn jacobian(model: &WarmModel, v: &SimplexPoint) -> Result<DMatrix<f64>, DynamicsError> {
    check_dims(model, v)?;
    jacobian_raw(model.dist().entries(), model.alpha(), v.as_slice(), false)
}

/// Strict Lyapunov function for the drift:
/// `L(x) = -sum_i x_i + (1/alpha) sum_A p_A ln(sum_{j in A} x_j^alpha)`.
pub fn lyapunov(model: &WarmModel, v: &SimplexPoint) -> Result<f64, DynamicsError> {
    check_dims(model, v)?;
    lyapunov_raw(model.dist().entries(), model.alpha(), v.as_slice())
}

pub(crate) fn lyapunov_raw(
    entries: &[(u64, f64)],
    alpha: f64,
    v: &[f64],
) -> Result<f64, DynamicsError> {
    let (xa, _) = powers(alpha, v);
    let mut total: f64 = -v.iter().sum::<f64>();
    for &(mask, p) in entries {
        let mut s = 0.0;
        let mut m = mask;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            s += xa[i];
            m &= m - 1;
        }
        if s <= 0.0 {
            return Err(DynamicsError::DegenerateFace { mask });
        }
        total += p * s.ln() / alpha;
    }
    Ok(total)
}

/// Gradient of the Lyapunov function. Satisfies `x_i * grad_i = F_i(x)`.
pub fn lyapunov_gradient(model: &WarmModel, v: &SimplexPoint) -> Result<Vec<f64>, DynamicsError> {
    check_dims(model, v)?;
    let alpha = model.alpha();
    let x = v.as_slice();
    let (xa, qa) = powers(alpha, x);
    let mut acc = vec![0.0f64; x.len()];
    for &(mask, p) in model.dist().entries() {
        let mut s = 0.0;
        let mut m = mask;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            s += xa[i];
            m &= m - 1;
        }
        if s <= 0.0 {
            return Err(DynamicsError::DegenerateFace { mask });
        }
        let c = p / s;
        let mut m = mask;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            acc[i] += c * qa[i];
            m &= m - 1;
        }
    }
    Ok(acc.iter().map(|&a| a - 1.0).collect())
}

/// Why the integrator stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopReason {
    /// Sup-norm of the drift fell below the tolerance.
    DriftBelowTol,
    /// No Lyapunov increase beyond `plateau_eps` for `plateau_window` steps.
    Plateau,
    /// Reached `t_max`.
    TimeExhausted,
}

#[derive(Debug, Clone)]
pub struct FlowOptions {
    pub t_max: f64,
    pub step: f64,
    /// Record every k-th step (the initial and final points are always kept).
    pub record_stride: usize,
    /// Early-stop threshold on the sup-norm of the drift.
    pub drift_tol: f64,
    pub plateau_window: usize,
    pub plateau_eps: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            t_max: 200.0,
            step: 1e-2,
            record_stride: 1,
            drift_tol: 1e-12,
            plateau_window: 1000,
            plateau_eps: 1e-14,
        }
    }
}

/// A time-indexed solution of `dv/dt = F(v)` with the Lyapunov value at each
/// recorded point.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<SimplexPoint>,
    pub lyapunov: Vec<f64>,
    pub terminal_drift_norm: f64,
    pub stop: StopReason,
}

impl Trajectory {
    pub fn final_point(&self) -> &SimplexPoint {
        self.points
            .last()
            .expect("trajectory has at least the initial point")
    }

    /// CSV with header `t,x_0,...,x_{n-1},L`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let n = self.points.first().map_or(0, |p| p.len());
        write!(w, "t")?;
        for i in 0..n {
            write!(w, ",x_{i}")?;
        }
        writeln!(w, ",L")?;
        for ((t, p), l) in self.times.iter().zip(&self.points).zip(&self.lyapunov) {
            write!(w, "{t}")?;
            for x in p.as_slice() {
                write!(w, ",{x}")?;
            }
            writeln!(w, ",{l}")?;
        }
        Ok(())
    }
}

/// Integrates `dv/dt = F(v)` by classical RK4 with renormalization after each
/// step. The state stays on the simplex; integration stops early when the
/// drift norm falls below `opts.drift_tol` or the Lyapunov value plateaus.
pub fn flow(
    model: &WarmModel,
    v0: &SimplexPoint,
    opts: &FlowOptions,
) -> Result<Trajectory, DynamicsError> {
    check_dims(model, v0)?;
    if !(opts.step > 0.0) {
        return Err(DynamicsError::BadStep(opts.step));
    }
    let entries = model.dist().entries();
    let alpha = model.alpha();
    let n = model.n();
    let h = opts.step;
    let stride = opts.record_stride.max(1);

    let mut v: Vec<f64> = v0.as_slice().to_vec();
    let mut t = 0.0;
    let mut times = vec![0.0];
    let mut points = vec![v0.clone()];
    let mut lyap = vec![lyapunov_raw(entries, alpha, &v)?];

    let mut best_l = lyap[0];
    let mut last_improvement: usize = 0;
    let mut terminal_norm;
    let stop;

    let eval = |v: &[f64]| drift_raw(entries, alpha, v, false);
    let mut step_idx: usize = 0;
    loop {
        let k1 = eval(&v)?;
        terminal_norm = k1.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        if terminal_norm < opts.drift_tol {
            stop = StopReason::DriftBelowTol;
            break;
        }
        if step_idx.saturating_sub(last_improvement) >= opts.plateau_window {
            stop = StopReason::Plateau;
            break;
        }
        if t >= opts.t_max {
            stop = StopReason::TimeExhausted;
            break;
        }

        let at = |v: &[f64], k: &[f64], c: f64| -> Vec<f64> {
            v.iter().zip(k).map(|(&a, &b)| a + c * b).collect()
        };
        let k2 = eval(&at(&v, &k1, h / 2.0))?;
        let k3 = eval(&at(&v, &k2, h / 2.0))?;
        let k4 = eval(&at(&v, &k3, h))?;
        for i in 0..n {
            v[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += h;
        step_idx += 1;

        let mut sum = 0.0;
        for (i, x) in v.iter_mut().enumerate() {
            if !x.is_finite() {
                return Err(DynamicsError::NonFinite { time: t });
            }
            if *x < 0.0 {
                if *x < -1e-12 {
                    return Err(DynamicsError::LeftSimplex {
                        time: t,
                        idx: i,
                        value: *x,
                    });
                }
                *x = 0.0;
            }
            sum += *x;
        }
        for x in v.iter_mut() {
            *x /= sum;
        }

        let l = lyapunov_raw(entries, alpha, &v)?;
        if l > best_l + opts.plateau_eps {
            best_l = l;
            last_improvement = step_idx;
        }
        if step_idx % stride == 0 {
            times.push(t);
            points.push(SimplexPoint::new(v.clone())?);
            lyap.push(l);
        }
    }

    if *times.last().unwrap() < t {
        times.push(t);
        points.push(SimplexPoint::new(v.clone())?);
        lyap.push(lyapunov_raw(entries, alpha, &v)?);
    }

    Ok(Trajectory {
        times,
        points,
        lyapunov: lyap,
        terminal_drift_norm: terminal_norm,
        stop,
    })
}

/// Sup-norm of the drift; used as the equilibrium residual.
pub fn drift_norm(model: &WarmModel, v: &SimplexPoint) -> Result<f64, DynamicsError> {
    Ok(drift(model, v)?.iter().fold(0.0f64, |m, &x| m.max(x.abs())))
}
