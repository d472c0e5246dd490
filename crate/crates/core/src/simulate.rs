//! Exact Monte-Carlo simulation of the urn process. Subset draws go through
//! a Vose alias table built once per model; colour selection inside the drawn
//! subset rescales the count weights by the subset maximum, which leaves the
//! selection law untouched and keeps powers bounded by 1 for any exponent.
//!
//! Randomness comes from ChaCha8 (counter-based, 64-bit seedable); run `i` of
//! a batch uses stream `base_seed + i`, so batches reproduce bit-identically
//! regardless of execution order.

use crate::equilibria::EquilibriumCatalog;
use crate::model::{check_symmetry, WarmModel};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

/// Runs farther than this from every catalogue point stay unassigned.
pub const ASSIGNMENT_RADIUS: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulateError {
    #[error("steps must be >= 1")]
    NoSteps,
    #[error("catalogue is empty; nothing to assign endpoints to")]
    EmptyCatalog,
}

/// Ball counts at one time step. Counts start at one per colour and the total
/// grows by one per step.
#[derive(Debug, Clone, PartialEq)]
pub struct UrnState {
    counts: Vec<u64>,
    t: u64,
}

impl UrnState {
    pub fn new(n: usize) -> Self {
        Self {
            counts: vec![1; n],
            t: 0,
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn total(&self) -> u64 {
        self.counts.len() as u64 + self.t
    }

    /// Proportions N_i / (n + t).
    pub fn proportions(&self) -> Vec<f64> {
        let total = self.total() as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }
}

/// Vose alias sampler over the subset law.
struct AliasTable {
    masks: Vec<u64>,
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    fn new(entries: &[(u64, f64)]) -> Self {
        let k = entries.len();
        let masks: Vec<u64> = entries.iter().map(|&(m, _)| m).collect();
        let mut prob = vec![0.0f64; k];
        let mut alias = vec![0usize; k];
        let mut scaled: Vec<f64> = entries.iter().map(|&(_, p)| p * k as f64).collect();
        let mut small: Vec<usize> = (0..k).filter(|&i| scaled[i] < 1.0).collect();
        let mut large: Vec<usize> = (0..k).filter(|&i| scaled[i] >= 1.0).collect();
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            prob[s] = scaled[s];
            alias[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        for &i in small.iter().chain(large.iter()) {
            prob[i] = 1.0;
        }
        Self { masks, prob, alias }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        let k = self.masks.len();
        let slot = rng.random_range(0..k);
        if rng.random::<f64>() < self.prob[slot] {
            self.masks[slot]
        } else {
            self.masks[self.alias[slot]]
        }
    }
}

/// One simulation endpoint.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub final_proportions: Vec<f64>,
    /// Catalogue index and sup-norm distance, when within the assignment
    /// radius of some equilibrium.
    pub assigned: Option<(usize, f64)>,
    /// Distance to the nearest catalogue point even when unassigned.
    pub nearest_distance: Option<f64>,
    /// (t, proportions) at the recording stride.
    pub trace: Option<Vec<(u64, Vec<f64>)>>,
}

/// Reusable simulator: model plus the prebuilt subset sampler.
pub struct UrnSimulator<'m> {
    model: &'m WarmModel,
    alias: AliasTable,
}

impl<'m> UrnSimulator<'m> {
    pub fn new(model: &'m WarmModel) -> Self {
        Self {
            model,
            alias: AliasTable::new(model.dist().entries()),
        }
    }

    /// Draws one subset, reinforces one colour in it.
    pub fn step(&self, state: &mut UrnState, rng: &mut ChaCha8Rng) {
        let mask = self.alias.sample(rng);
        let colour = self.pick_colour(mask, &state.counts, rng);
        state.counts[colour] += 1;
        state.t += 1;
    }

    fn pick_colour(&self, mask: u64, counts: &[u64], rng: &mut ChaCha8Rng) -> usize {
        let alpha = self.model.alpha();
        // Rescale by the subset maximum: weights (N_i/N_max)^alpha lie in
        // (0, 1], so no exponent or count overflows the floats.
        let mut n_max = 0u64;
        let mut m = mask;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            n_max = n_max.max(counts[i]);
            m &= m - 1;
        }
        let mut total = 0.0f64;
        let mut weights = [0.0f64; 64];
        let mut idx = [0usize; 64];
        let mut len = 0;
        let mut m = mask;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            let w = (counts[i] as f64 / n_max as f64).powf(alpha);
            weights[len] = w;
            idx[len] = i;
            total += w;
            len += 1;
            m &= m - 1;
        }
        let mut u = rng.random::<f64>() * total;
        for j in 0..len {
            u -= weights[j];
            if u <= 0.0 {
                return idx[j];
            }
        }
        idx[len - 1]
    }

    /// Exact conditional law of the reinforced colour given the counts.
    pub fn step_distribution(&self, counts: &[u64]) -> Vec<f64> {
        step_distribution(self.model, counts)
    }
}

/// Exact conditional law of the reinforced colour given the counts, by
/// enumerating the subset draw.
pub fn step_distribution(model: &WarmModel, counts: &[u64]) -> Vec<f64> {
    let alpha = model.alpha();
    let mut law = vec![0.0f64; model.n()];
    for &(mask, p) in model.dist().entries() {
        let mut n_max = 0u64;
        let mut m = mask;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            n_max = n_max.max(counts[i]);
            m &= m - 1;
        }
        let mut total = 0.0f64;
        let mut m = mask;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            total += (counts[i] as f64 / n_max as f64).powf(alpha);
            m &= m - 1;
        }
        let mut m = mask;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            law[i] += p * (counts[i] as f64 / n_max as f64).powf(alpha) / total;
            m &= m - 1;
        }
    }
    law
}

/// One deterministic run from the all-ones start.
pub fn run(
    model: &WarmModel,
    steps: u64,
    seed: u64,
    record_stride: u64,
) -> Result<RunSummary, SimulateError> {
    if steps == 0 {
        return Err(SimulateError::NoSteps);
    }
    let sim = UrnSimulator::new(model);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = UrnState::new(model.n());
    let mut trace = if record_stride > 0 {
        Some(vec![(0u64, state.proportions())])
    } else {
        None
    };
    for s in 1..=steps {
        sim.step(&mut state, &mut rng);
        if let Some(tr) = trace.as_mut() {
            if s % record_stride == 0 || s == steps {
                tr.push((s, state.proportions()));
            }
        }
    }
    Ok(RunSummary {
        seed,
        final_proportions: state.proportions(),
        assigned: None,
        nearest_distance: None,
        trace,
    })
}

/// Endpoint histogram over the catalogue plus an unresolved bucket.
#[derive(Debug, Clone, Serialize)]
pub struct BatchSummary {
    /// One count per catalogue equilibrium, in catalogue order.
    pub histogram: Vec<usize>,
    pub unresolved: usize,
    pub assignment_radius: f64,
    /// Endpoints of colour-symmetric models are matched on sorted coordinates.
    pub sorted_matching: bool,
    pub runs: Vec<RunSummary>,
}

fn sorted_desc(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn endpoint_distance(a: &[f64], b: &[f64], sorted: bool) -> f64 {
    let (x, y) = if sorted {
        (sorted_desc(a), sorted_desc(b))
    } else {
        (a.to_vec(), b.to_vec())
    };
    x.iter()
        .zip(&y)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0f64, f64::max)
}

/// Nearest catalogue equilibrium for an endpoint, with sorted-coordinate
/// matching when requested (colour-symmetric models).
pub fn nearest_endpoint(
    catalog: &EquilibriumCatalog,
    proportions: &[f64],
    sorted_matching: bool,
) -> Option<(usize, f64)> {
    catalog
        .equilibria
        .iter()
        .enumerate()
        .map(|(j, e)| {
            (
                j,
                endpoint_distance(proportions, e.point.as_slice(), sorted_matching),
            )
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Runs `runs` independent simulations with seeds `base_seed + i` and assigns
/// each endpoint to its nearest catalogue equilibrium within the assignment
/// radius.
pub fn batch(
    model: &WarmModel,
    runs: u64,
    steps: u64,
    base_seed: u64,
    catalog: &EquilibriumCatalog,
) -> Result<BatchSummary, SimulateError> {
    if catalog.equilibria.is_empty() {
        return Err(SimulateError::EmptyCatalog);
    }
    let sorted_matching = check_symmetry(model.dist()).weak;
    let mut histogram = vec![0usize; catalog.equilibria.len()];
    let mut unresolved = 0usize;
    let mut summaries = Vec::with_capacity(runs as usize);
    for i in 0..runs {
        let mut summary = run(model, steps, base_seed.wrapping_add(i), 0)?;
        let (best_idx, best_dist) =
            nearest_endpoint(catalog, &summary.final_proportions, sorted_matching)
                .expect("catalogue is nonempty");
        summary.nearest_distance = Some(best_dist);
        if best_dist <= ASSIGNMENT_RADIUS {
            summary.assigned = Some((best_idx, best_dist));
            histogram[best_idx] += 1;
        } else {
            unresolved += 1;
        }
        summaries.push(summary);
    }
    Ok(BatchSummary {
        histogram,
        unresolved,
        assignment_radius: ASSIGNMENT_RADIUS,
        sorted_matching,
        runs: summaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;

    #[test]
    fn counts_are_conserved() {
        let model = graph_to_warm(&build_cycle(3).unwrap(), 2.0).unwrap();
        let sim = UrnSimulator::new(&model);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut state = UrnState::new(3);
        for t in 1..=5000u64 {
            sim.step(&mut state, &mut rng);
            assert_eq!(state.counts().iter().sum::<u64>(), 3 + t);
            assert_eq!(state.t(), t);
        }
    }

    #[test]
    fn single_colour_always_chosen() {
        let model = build_fixed_m(1, 1).unwrap().with_alpha(3.0).unwrap();
        let s = run(&model, 41, 1, 0).unwrap();
        assert_eq!(s.final_proportions, vec![1.0]);
    }

    #[test]
    fn initial_law_matches_subset_enumeration() {
        // With all counts equal, colour i is chosen with probability
        // sum over subsets containing i of p_A / |A|.
        for model in [
            graph_to_warm(&build_star(3).unwrap(), 2.0).unwrap(),
            graph_to_warm(&build_path(3).unwrap(), 1.5).unwrap(),
            build_bernoulli(3, 0.4).unwrap().with_alpha(2.0).unwrap(),
        ] {
            let law = step_distribution(&model, &vec![1; model.n()]);
            for i in 0..model.n() {
                let expect: f64 = model
                    .dist()
                    .entries()
                    .iter()
                    .filter(|&&(mask, _)| mask & (1 << i) != 0)
                    .map(|&(mask, p)| p / mask.count_ones() as f64)
                    .sum();
                assert!((law[i] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn seeds_reproduce_bit_identically() {
        let model = graph_to_warm(&build_cycle(4).unwrap(), 2.0).unwrap();
        let a = run(&model, 20_000, 99, 0).unwrap();
        let b = run(&model, 20_000, 99, 0).unwrap();
        assert_eq!(a.final_proportions, b.final_proportions);
        let c = run(&model, 20_000, 100, 0).unwrap();
        assert_ne!(a.final_proportions, c.final_proportions);
    }

    #[test]
    fn trace_respects_stride() {
        let model = graph_to_warm(&build_cycle(3).unwrap(), 2.0).unwrap();
        let s = run(&model, 100, 5, 25).unwrap();
        let trace = s.trace.unwrap();
        let ts: Vec<u64> = trace.iter().map(|&(t, _)| t).collect();
        assert_eq!(ts, vec![0, 25, 50, 75, 100]);
    }

    #[test]
    fn high_exponent_long_run_stays_finite() {
        // Overflow safety: rescaled weights stay in (0, 1] even at large
        // exponent and count, out to 10^7 steps.
        let model = graph_to_warm(&build_star(2).unwrap(), 50.0).unwrap();
        let s = run(&model, 10_000_000, 3, 0).unwrap();
        assert!(s.final_proportions.iter().all(|x| x.is_finite()));
        assert!((s.final_proportions.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_colour_batch_is_one_bucket() {
        let model = build_fixed_m(1, 1).unwrap().with_alpha(2.0).unwrap();
        let catalog = crate::equilibria::find_equilibria(&model);
        assert_eq!(catalog.equilibria.len(), 1);
        let b = batch(&model, 10, 50, 0, &catalog).unwrap();
        assert_eq!(b.histogram, vec![10]);
        assert_eq!(b.unresolved, 0);
    }

    #[test]
    fn fixed_m_keeps_n_minus_m_plus_1_colours() {
        // In the fixed-size-m model at strong reinforcement, at least
        // n - m + 1 = 3 colours keep positive proportion in every run.
        let model = build_fixed_m(4, 2).unwrap().with_alpha(8.0).unwrap();
        for seed in 0..10u64 {
            let s = run(&model, 100_000, seed, 0).unwrap();
            let mut props = s.final_proportions.clone();
            props.sort_by(|a, b| b.total_cmp(a));
            assert!(props[2] > 0.05, "seed {seed}: third-largest {props:?}");
        }
    }
}
