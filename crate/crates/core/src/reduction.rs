//! Subgraph decomposition: vertex partitions into non-trivial connected
//! parts, embedding of per-part equilibria into the parent graph, and
//! stability composition (the parent is stable exactly when every part is;
//! the zeroed edges contribute eigenvalue -1).

use crate::dynamics::SimplexPoint;
use crate::equilibria::{classify, Stability};
use crate::model::{graph_to_warm, GraphSpec, ModelError};
use serde::Serialize;
use thiserror::Error;

/// Partition enumeration cap; set-partition growth is super-exponential.
pub const MAX_PARTITION_VERTICES: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReductionError {
    #[error(
        "graph has {0} vertices, exhaustive partition enumeration caps at {MAX_PARTITION_VERTICES}"
    )]
    GraphTooLarge(usize),
    #[error("collection has {parts} parts but {given} per-part inputs were given")]
    PartCountMismatch { parts: usize, given: usize },
    #[error("part {part} expects {expect} edge weights, got {got}")]
    PartDimensionMismatch {
        part: usize,
        expect: usize,
        got: usize,
    },
    #[error("embedded point is not a parent equilibrium (residual {0:e})")]
    ResidualCheckFailed(f64),
    #[error("composed class {composed} disagrees with dense classification {dense}")]
    ConsistencyFailure {
        composed: Stability,
        dense: Stability,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("classification failed: {0}")]
    Classify(String),
}

/// One connected induced subgraph of a spanning collection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Part {
    pub vertices: Vec<usize>,
    /// Parent edge indices with both endpoints in `vertices`.
    pub edges: Vec<usize>,
}

/// A partition of the parent's vertices into connected induced parts of size
/// at least two.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanningCollection {
    pub parts: Vec<Part>,
}

impl SpanningCollection {
    /// Parent edge indices carrying weight in this collection.
    pub fn covered_edges(&self) -> Vec<usize> {
        let mut e: Vec<usize> = self
            .parts
            .iter()
            .flat_map(|p| p.edges.iter().copied())
            .collect();
        e.sort_unstable();
        e
    }
}

/// An equilibrium supported exactly on a spanning collection's edges.
#[derive(Debug, Clone, Serialize)]
pub struct Allocation {
    pub collection: SpanningCollection,
    pub point: SimplexPoint,
    pub class: Stability,
}

fn induced_part(g: &GraphSpec, vertices: &[usize]) -> Part {
    let inside = |v: usize| vertices.contains(&v);
    let edges: Vec<usize> = g
        .edges()
        .iter()
        .enumerate()
        .filter(|(_, &(a, b))| inside(a) && inside(b))
        .map(|(i, _)| i)
        .collect();
    Part {
        vertices: vertices.to_vec(),
        edges,
    }
}

fn part_is_connected(g: &GraphSpec, part: &Part) -> bool {
    if part.vertices.len() < 2 || part.edges.is_empty() {
        return false;
    }
    let mut adj: std::collections::HashMap<usize, Vec<usize>> = std::collections::HashMap::new();
    for &e in &part.edges {
        let (a, b) = g.edges()[e];
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut visited = std::collections::HashSet::new();
    let mut stack = vec![part.vertices[0]];
    visited.insert(part.vertices[0]);
    while let Some(v) = stack.pop() {
        for &w in adj.get(&v).into_iter().flatten() {
            if visited.insert(w) {
                stack.push(w);
            }
        }
    }
    part.vertices.iter().all(|v| visited.contains(v))
}

/// All partitions of the vertex set into connected induced parts of size at
/// least two. Exhaustive, with part-size pruning; capped at
/// [`MAX_PARTITION_VERTICES`] vertices.
pub fn enumerate_spanning_collections(
    g: &GraphSpec,
) -> Result<Vec<SpanningCollection>, ReductionError> {
    let n_v = g.n_vertices();
    if n_v > MAX_PARTITION_VERTICES {
        return Err(ReductionError::GraphTooLarge(n_v));
    }
    let mut out = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    // Restricted-growth assignment: vertex v joins an existing group or opens
    // the next one; singleton groups must still be fillable by the remaining
    // vertices.
    fn recurse(
        g: &GraphSpec,
        v: usize,
        groups: &mut Vec<Vec<usize>>,
        out: &mut Vec<SpanningCollection>,
    ) {
        let n_v = g.n_vertices();
        if v == n_v {
            let parts: Vec<Part> = groups.iter().map(|vs| induced_part(g, vs)).collect();
            if parts
                .iter()
                .all(|p| p.vertices.len() >= 2 && part_is_connected(g, p))
            {
                out.push(SpanningCollection { parts });
            }
            return;
        }
        let remaining = n_v - v;
        let singletons = groups.iter().filter(|grp| grp.len() == 1).count();
        if singletons > remaining {
            return;
        }
        for gi in 0..groups.len() {
            groups[gi].push(v);
            recurse(g, v + 1, groups, out);
            groups[gi].pop();
        }
        if groups.len() < n_v / 2 {
            groups.push(vec![v]);
            recurse(g, v + 1, groups, out);
            groups.pop();
        }
    }
    groups.push(vec![0]);
    recurse(g, 1, &mut groups, &mut out);
    Ok(out)
}

fn check_part_inputs(
    collection: &SpanningCollection,
    per_part: &[SimplexPoint],
) -> Result<(), ReductionError> {
    if per_part.len() != collection.parts.len() {
        return Err(ReductionError::PartCountMismatch {
            parts: collection.parts.len(),
            given: per_part.len(),
        });
    }
    for (i, (part, point)) in collection.parts.iter().zip(per_part).enumerate() {
        if point.len() != part.edges.len() {
            return Err(ReductionError::PartDimensionMismatch {
                part: i,
                expect: part.edges.len(),
                got: point.len(),
            });
        }
    }
    Ok(())
}

/// Scales each part's standalone equilibrium by |V_part|/|V| and places it on
/// the part's edges, zero elsewhere. The result is checked to be an
/// equilibrium of the parent model (residual below 1e-10).
pub fn embed_equilibrium(
    g: &GraphSpec,
    alpha: f64,
    collection: &SpanningCollection,
    per_part: &[SimplexPoint],
) -> Result<SimplexPoint, ReductionError> {
    check_part_inputs(collection, per_part)?;
    let n_v = g.n_vertices() as f64;
    let mut v = vec![0.0f64; g.n_edges()];
    for (part, point) in collection.parts.iter().zip(per_part) {
        let scale = part.vertices.len() as f64 / n_v;
        for (slot, &e) in part.edges.iter().enumerate() {
            v[e] = scale * point[slot];
        }
    }
    let parent = graph_to_warm(g, alpha)?;
    let point =
        SimplexPoint::new(v).map_err(|_| ReductionError::ResidualCheckFailed(f64::INFINITY))?;
    let f = crate::dynamics::drift(&parent, &point)
        .map_err(|e| ReductionError::Classify(e.to_string()))?;
    let residual = f.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if residual > 1e-10 {
        return Err(ReductionError::ResidualCheckFailed(residual));
    }
    Ok(point)
}

fn compose_classes(classes: &[Stability]) -> Stability {
    if classes.iter().any(|&c| c == Stability::Unstable) {
        Stability::Unstable
    } else if classes.iter().any(|&c| c == Stability::Critical) {
        Stability::Critical
    } else {
        Stability::Stable
    }
}

/// Composes per-part stability classes (block spectrum union; the zeroed
/// edges add eigenvalue -1) and cross-checks against the dense classification
/// of the embedded parent point.
pub fn compose_stability(
    g: &GraphSpec,
    alpha: f64,
    collection: &SpanningCollection,
    per_part_points: &[SimplexPoint],
    per_part_classes: &[Stability],
) -> Result<Stability, ReductionError> {
    if per_part_classes.len() != collection.parts.len() {
        return Err(ReductionError::PartCountMismatch {
            parts: collection.parts.len(),
            given: per_part_classes.len(),
        });
    }
    let composed = compose_classes(per_part_classes);
    let point = embed_equilibrium(g, alpha, collection, per_part_points)?;
    let parent = graph_to_warm(g, alpha)?;
    let dense = classify(&parent, &point)
        .map_err(|e| ReductionError::Classify(e.to_string()))?
        .class;
    if dense != composed {
        return Err(ReductionError::ConsistencyFailure { composed, dense });
    }
    Ok(composed)
}

fn part_is_star(g: &GraphSpec, part: &Part) -> bool {
    // Star as induced subgraph: a tree where one centre touches every edge.
    if part.edges.len() != part.vertices.len() - 1 {
        return false;
    }
    part.vertices.iter().any(|&c| {
        part.edges.iter().all(|&e| {
            let (a, b) = g.edges()[e];
            a == c || b == c
        })
    })
}

/// Enumerates spanning collections whose parts are all stars and allocates
/// the uniform per-star equilibrium on each, classified against the parent.
pub fn star_forest_allocation(
    g: &GraphSpec,
    alpha: f64,
) -> Result<Vec<Allocation>, ReductionError> {
    let mut out = Vec::new();
    for collection in enumerate_spanning_collections(g)? {
        if !collection.parts.iter().all(|p| part_is_star(g, p)) {
            continue;
        }
        let per_part: Vec<SimplexPoint> = collection
            .parts
            .iter()
            .map(|p| SimplexPoint::new(vec![1.0 / p.edges.len() as f64; p.edges.len()]).unwrap())
            .collect();
        let point = embed_equilibrium(g, alpha, &collection, &per_part)?;
        let parent = graph_to_warm(g, alpha)?;
        let class = classify(&parent, &point)
            .map_err(|e| ReductionError::Classify(e.to_string()))?
            .class;
        out.push(Allocation {
            collection,
            point,
            class,
        });
    }
    Ok(out)
}

/// True when the given support edges form a spanning forest of trees of
/// diameter at most three (each component a whisker), covering every vertex.
pub fn is_spanning_whisker_forest(g: &GraphSpec, support: &[usize]) -> bool {
    if support.is_empty() {
        return false;
    }
    let mut adj: std::collections::HashMap<usize, Vec<usize>> = std::collections::HashMap::new();
    let mut verts: std::collections::BTreeSet<usize> = std::collections::BTreeSet::new();
    for &e in support {
        let (a, b) = g.edges()[e];
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
        verts.insert(a);
        verts.insert(b);
    }
    if verts.len() != g.n_vertices() {
        return false;
    }
    // Decompose into components; each must be a tree of diameter <= 3.
    let mut seen: std::collections::HashSet<usize> = std::collections::HashSet::new();
    for &start in &verts {
        if seen.contains(&start) {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = vec![start];
        seen.insert(start);
        while let Some(v) = stack.pop() {
            comp.push(v);
            for &w in adj.get(&v).into_iter().flatten() {
                if seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        let edge_count = support
            .iter()
            .filter(|&&e| {
                let (a, b) = g.edges()[e];
                comp.contains(&a) && comp.contains(&b)
            })
            .count();
        if edge_count != comp.len() - 1 {
            return false; // has a cycle
        }
        if tree_diameter(&comp, &adj) > 3 {
            return false;
        }
    }
    true
}

fn tree_diameter(comp: &[usize], adj: &std::collections::HashMap<usize, Vec<usize>>) -> usize {
    let bfs_far = |s: usize| -> (usize, usize) {
        let mut dist: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
        dist.insert(s, 0);
        let mut queue = std::collections::VecDeque::from([s]);
        let mut far = (s, 0);
        while let Some(v) = queue.pop_front() {
            let dv = dist[&v];
            if dv > far.1 {
                far = (v, dv);
            }
            for &w in adj.get(&v).into_iter().flatten() {
                if !dist.contains_key(&w) {
                    dist.insert(w, dv + 1);
                    queue.push_back(w);
                }
            }
        }
        far
    };
    let (a, _) = bfs_far(comp[0]);
    bfs_far(a).1
}

/// One probe entry: a stable equilibrium support and whether it forms a
/// spanning whisker forest. Reported, never asserted.
#[derive(Debug, Clone, Serialize)]
pub struct WhiskerProbeEntry {
    pub alpha: f64,
    pub support: Vec<usize>,
    pub is_whisker_forest: bool,
}

/// Scans an exponent grid, catalogues stable equilibria and reports whether
/// each support is a spanning whisker forest.
pub fn whisker_forest_probe(
    g: &GraphSpec,
    alphas: &[f64],
) -> Result<Vec<WhiskerProbeEntry>, ReductionError> {
    let mut out = Vec::new();
    for &alpha in alphas {
        let model = graph_to_warm(g, alpha)?;
        let catalog = crate::equilibria::find_equilibria(&model);
        for e in catalog.stable() {
            out.push(WhiskerProbeEntry {
                alpha,
                support: e.support.clone(),
                is_whisker_forest: is_spanning_whisker_forest(g, &e.support),
            });
        }
    }
    Ok(out)
}
