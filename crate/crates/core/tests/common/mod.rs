//! Shared fixtures for the integration suites: a model corpus spanning every
//! builder family, deterministic interior sampling, and finite-difference
//! oracles kept independent of the analytic code paths they check.

// Each test binary uses its own subset of these helpers.
#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use warm_core::dynamics::{drift_at, lyapunov_at};
use warm_core::model::*;

pub fn graph_model(g: &GraphSpec, alpha: f64) -> WarmModel {
    graph_to_warm(g, alpha).expect("corpus graph is valid")
}

/// Models spanning every family, used by the randomized oracles.
pub fn corpus() -> Vec<(&'static str, WarmModel)> {
    vec![
        ("triangle a=2", graph_model(&build_cycle(3).unwrap(), 2.0)),
        ("star2 a=4", graph_model(&build_star(2).unwrap(), 4.0)),
        ("star3 a=2", graph_model(&build_star(3).unwrap(), 2.0)),
        ("star5 a=3.2", graph_model(&build_star(5).unwrap(), 3.2)),
        ("cycle4 a=2.5", graph_model(&build_cycle(4).unwrap(), 2.5)),
        ("cycle5 a=1.08", graph_model(&build_cycle(5).unwrap(), 1.08)),
        ("path3 a=2", graph_model(&build_path(3).unwrap(), 2.0)),
        (
            "whisker11 a=5",
            graph_model(&build_whisker(1, 1).unwrap(), 5.0),
        ),
        (
            "whisker22 a=6",
            graph_model(&build_whisker(2, 2).unwrap(), 6.0),
        ),
        (
            "complete4 a=2",
            graph_model(&build_complete(4).unwrap(), 2.0),
        ),
        (
            "fixed_m(4,2) a=2",
            build_fixed_m(4, 2).unwrap().with_alpha(2.0).unwrap(),
        ),
        (
            "fixed_m(5,3) a=1.7",
            build_fixed_m(5, 3).unwrap().with_alpha(1.7).unwrap(),
        ),
        (
            "bernoulli(3,0.4) a=2",
            build_bernoulli(3, 0.4).unwrap().with_alpha(2.0).unwrap(),
        ),
        (
            "bernoulli(2,0.5) a=2.5",
            build_bernoulli(2, 0.5).unwrap().with_alpha(2.5).unwrap(),
        ),
    ]
}

/// Deterministic interior point of the n-simplex, bounded away from faces.
pub fn interior_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| -(1.0 - rng.random::<f64>()).ln() + 0.05)
        .collect();
    let sum: f64 = v.iter().sum();
    for x in v.iter_mut() {
        *x /= sum;
    }
    v
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

/// Central-difference Jacobian of the drift; the independent oracle for the
/// analytic Jacobian.
pub fn fd_jacobian(model: &WarmModel, v: &[f64], step: f64) -> Vec<Vec<f64>> {
    let n = v.len();
    let mut cols = vec![vec![0.0f64; n]; n];
    for k in 0..n {
        let mut plus = v.to_vec();
        plus[k] += step;
        let mut minus = v.to_vec();
        minus[k] -= step;
        let fp = drift_at(model, &plus).expect("interior probe");
        let fm = drift_at(model, &minus).expect("interior probe");
        for i in 0..n {
            cols[k][i] = (fp[i] - fm[i]) / (2.0 * step);
        }
    }
    // Transpose into row-major d[i][k].
    let mut d = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for k in 0..n {
            d[i][k] = cols[k][i];
        }
    }
    d
}

/// Central-difference gradient of the Lyapunov value.
pub fn fd_lyapunov_gradient(model: &WarmModel, v: &[f64], step: f64) -> Vec<f64> {
    (0..v.len())
        .map(|k| {
            let mut plus = v.to_vec();
            plus[k] += step;
            let mut minus = v.to_vec();
            minus[k] -= step;
            let lp = lyapunov_at(model, &plus).expect("interior probe");
            let lm = lyapunov_at(model, &minus).expect("interior probe");
            (lp - lm) / (2.0 * step)
        })
        .collect()
}

/// Expands (value, multiplicity) pairs, sorts both spectra by real part, and
/// checks elementwise agreement. Structured spectra here are real, so dense
/// imaginary parts must vanish at the same tolerance.
pub fn assert_spectra_match(
    structured: &[(f64, usize)],
    dense: &[num_complex::Complex<f64>],
    tol: f64,
    what: &str,
) {
    let mut expanded: Vec<f64> = Vec::new();
    for &(val, mult) in structured {
        for _ in 0..mult {
            expanded.push(val);
        }
    }
    assert_eq!(expanded.len(), dense.len(), "{what}: spectrum size");
    expanded.sort_by(f64::total_cmp);
    let mut dense: Vec<_> = dense.to_vec();
    dense.sort_by(|a, b| a.re.total_cmp(&b.re));
    for (s, z) in expanded.iter().zip(&dense) {
        assert!(
            (s - z.re).abs() <= tol && z.im.abs() <= tol,
            "{what}: structured {s} vs dense {z}"
        );
    }
}
