//! Model definitions: subset-selection laws, the reinforcement exponent, and
//! graph-based builders.
//!
//! A model is a pair (subset distribution, alpha). Subsets of the `n` colours
//! are encoded as 64-bit masks, which caps `n` at 64; the enumerative builders
//! ([`build_fixed_m`], [`build_bernoulli`]) are further capped at `n <= 20` to
//! bound the 2^n blowup. Graph builders produce a [`GraphSpec`] whose edges
//! are the colours; [`graph_to_warm`] turns it into a model by letting each
//! vertex contribute its incident-edge set with probability `1/n_v`.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Tolerance on probability normalization.
pub const PROB_TOL: f64 = 1e-12;
/// Hard cap on the colour count (subsets are 64-bit masks).
pub const MAX_COLOURS: usize = 64;
/// Cap on colour count for enumerative builders.
pub const MAX_ENUM_COLOURS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("colour count {0} out of range (must be 1..={MAX_COLOURS})")]
    ColourCountOutOfRange(usize),
    #[error("colour count {0} too large for exhaustive enumeration (max {MAX_ENUM_COLOURS})")]
    TooManyColoursForEnumeration(usize),
    #[error("empty subset has positive probability")]
    EmptySubset,
    #[error("subset probabilities sum to {0}, not 1 within {PROB_TOL}")]
    ProbabilitiesNotNormalized(f64),
    #[error("duplicate subset {0:#x}")]
    DuplicateSubset(u64),
    #[error("colour {0} appears in no positive-probability subset")]
    UncoveredColour(usize),
    #[error("subset {mask:#x} references colours outside 0..{n}")]
    SubsetOutOfRange { mask: u64, n: usize },
    #[error("subset probability {0} not in (0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("alpha must be > 1 strictly, got {0}")]
    AlphaOutOfRange(f64),
    #[error("subset size {m} out of range for {n} colours")]
    SubsetSizeOutOfRange { n: usize, m: usize },
    #[error("bernoulli parameter p={0} outside (0, 1)")]
    BernoulliParamOutOfRange(f64),
    #[error("graph has {0} vertices, need at least {1}")]
    GraphTooSmall(usize, usize),
    #[error("edge ({0}, {1}) invalid: self-loop or vertex out of range")]
    BadEdge(usize, usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("graph has no edges")]
    NoEdges,
    #[error("vertex {0} is isolated: its incident-edge set would be empty")]
    IsolatedVertex(usize),
    #[error("model file is not valid JSON: {0}")]
    Json(String),
    #[error("unknown family {0:?}")]
    UnknownFamily(String),
    #[error("family {family:?} missing parameter {param:?}")]
    MissingParam { family: String, param: String },
    #[error("model does not satisfy strong symmetry")]
    NotStronglySymmetric,
}

/// A probability law over nonempty subsets of `[0, n)`, subsets encoded as
/// bit masks.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetDistribution {
    n: usize,
    /// Sorted by mask; probabilities in (0, 1], summing to 1.
    entries: Vec<(u64, f64)>,
}

impl SubsetDistribution {
    /// Validates the invariants in declaration order and returns the first
    /// violated one as an error: no empty subset, normalization, distinct
    /// subsets, full colour coverage.
    pub fn new(n: usize, mut entries: Vec<(u64, f64)>) -> Result<Self, ModelError> {
        if n == 0 || n > MAX_COLOURS {
            return Err(ModelError::ColourCountOutOfRange(n));
        }
        let full: u64 = if n == 64 { !0 } else { (1u64 << n) - 1 };
        for &(mask, p) in &entries {
            if mask == 0 {
                return Err(ModelError::EmptySubset);
            }
            if mask & !full != 0 {
                return Err(ModelError::SubsetOutOfRange { mask, n });
            }
            if !(p > 0.0 && p <= 1.0) {
                return Err(ModelError::ProbabilityOutOfRange(p));
            }
        }
        let total: f64 = entries.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(ModelError::ProbabilitiesNotNormalized(total));
        }
        entries.sort_by_key(|&(mask, _)| mask);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(ModelError::DuplicateSubset(w[0].0));
            }
        }
        let mut covered: u64 = 0;
        for &(mask, _) in &entries {
            covered |= mask;
        }
        if covered != full {
            let missing = (0..n).find(|&i| covered & (1 << i) == 0).unwrap();
            return Err(ModelError::UncoveredColour(missing));
        }
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Entries as (mask, probability), sorted by mask.
    pub fn entries(&self) -> &[(u64, f64)] {
        &self.entries
    }

    /// Attach a reinforcement exponent.
    pub fn with_alpha(self, alpha: f64) -> Result<WarmModel, ModelError> {
        WarmModel::new(self, alpha)
    }
}

/// A full model: subset law plus reinforcement exponent `alpha > 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmModel {
    dist: SubsetDistribution,
    alpha: f64,
}

impl WarmModel {
    pub fn new(dist: SubsetDistribution, alpha: f64) -> Result<Self, ModelError> {
        if !(alpha > 1.0) || !alpha.is_finite() {
            return Err(ModelError::AlphaOutOfRange(alpha));
        }
        Ok(Self { dist, alpha })
    }

    pub fn n(&self) -> usize {
        self.dist.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dist(&self) -> &SubsetDistribution {
        &self.dist
    }

    /// Same subset law at a different exponent.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self, ModelError> {
        Self::new(self.dist.clone(), alpha)
    }

    /// Stable 64-bit fingerprint of (n, alpha, entries), FNV-1a over the
    /// canonical byte encoding. Used to tie catalogues to the model that
    /// produced them.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x100_0000_01b3);
            }
        };
        eat(&(self.dist.n as u64).to_le_bytes());
        eat(&self.alpha.to_bits().to_le_bytes());
        for &(mask, p) in &self.dist.entries {
            eat(&mask.to_le_bytes());
            eat(&p.to_bits().to_le_bytes());
        }
        h
    }
}

/// An undirected simple graph whose edges play the role of colours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    n_v: usize,
    /// Unordered pairs, stored with the smaller vertex first. The position in
    /// this list is the edge's colour index.
    edges: Vec<(usize, usize)>,
    connected: bool,
}

impl GraphSpec {
    pub fn new(n_v: usize, edges: Vec<(usize, usize)>) -> Result<Self, ModelError> {
        if n_v < 2 {
            return Err(ModelError::GraphTooSmall(n_v, 2));
        }
        if edges.is_empty() {
            return Err(ModelError::NoEdges);
        }
        let edges: Vec<(usize, usize)> = edges
            .into_iter()
            .map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
            .collect();
        let mut seen = std::collections::HashSet::new();
        for &(a, b) in &edges {
            if a == b || b >= n_v {
                return Err(ModelError::BadEdge(a, b));
            }
            if !seen.insert((a, b)) {
                return Err(ModelError::DuplicateEdge(a, b));
            }
        }
        let connected = {
            let mut adj = vec![Vec::new(); n_v];
            for &(a, b) in &edges {
                adj[a].push(b);
                adj[b].push(a);
            }
            let mut visited = vec![false; n_v];
            let mut stack = vec![0usize];
            visited[0] = true;
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if !visited[w] {
                        visited[w] = true;
                        stack.push(w);
                    }
                }
            }
            visited.iter().all(|&v| v)
        };
        Ok(Self {
            n_v,
            edges,
            connected,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_v
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    /// Edge indices incident to `v`, as a bit mask.
    pub fn incident_mask(&self, v: usize) -> u64 {
        let mut mask = 0u64;
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            if a == v || b == v {
                mask |= 1 << i;
            }
        }
        mask
    }

    /// Vertex degrees.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n_v];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }
}

/// Uniform law over all subsets of a fixed size `m`.
pub fn build_fixed_m(n: usize, m: usize) -> Result<SubsetDistribution, ModelError> {
    if n == 0 || n > MAX_ENUM_COLOURS {
        return Err(ModelError::TooManyColoursForEnumeration(n));
    }
    if m == 0 || m > n {
        return Err(ModelError::SubsetSizeOutOfRange { n, m });
    }
    let count = binomial(n, m);
    let p = 1.0 / count as f64;
    let mut entries = Vec::with_capacity(count as usize);
    // Gosper's hack: iterate all n-bit masks with popcount m in increasing order.
    let full: u64 = if n == 64 { !0 } else { (1u64 << n) - 1 };
    let mut mask: u64 = (1u64 << m) - 1;
    loop {
        entries.push((mask, p));
        if entries.len() == count as usize {
            break;
        }
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        mask = (((r ^ mask) >> 2) / c) | r;
        if mask > full {
            break;
        }
    }
    SubsetDistribution::new(n, entries)
}

/// Each colour enters the subset independently with probability `p`,
/// conditioned on the subset being nonempty.
pub fn build_bernoulli(n: usize, p: f64) -> Result<SubsetDistribution, ModelError> {
    if n == 0 || n > MAX_ENUM_COLOURS {
        return Err(ModelError::TooManyColoursForEnumeration(n));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(ModelError::BernoulliParamOutOfRange(p));
    }
    let p_empty = (1.0 - p).powi(n as i32);
    let norm = 1.0 - p_empty;
    let mut entries = Vec::with_capacity((1usize << n) - 1);
    for mask in 1u64..(1u64 << n) {
        let m = mask.count_ones() as i32;
        // The quotient can overshoot 1 by an ulp when the subset is forced.
        let prob = (p.powi(m) * (1.0 - p).powi(n as i32 - m) / norm).min(1.0);
        entries.push((mask, prob));
    }
    SubsetDistribution::new(n, entries)
}

/// Star with `n_leaves` edges: one hub joined to `n_leaves` leaves.
pub fn build_star(n_leaves: usize) -> Result<GraphSpec, ModelError> {
    if n_leaves < 1 {
        return Err(ModelError::GraphTooSmall(n_leaves + 1, 2));
    }
    GraphSpec::new(n_leaves + 1, (1..=n_leaves).map(|i| (0, i)).collect())
}

/// Cycle with `n >= 3` vertices and edges.
pub fn build_cycle(n: usize) -> Result<GraphSpec, ModelError> {
    if n < 3 {
        return Err(ModelError::GraphTooSmall(n, 3));
    }
    GraphSpec::new(n, (0..n).map(|i| (i, (i + 1) % n)).collect())
}

/// Complete graph on `n_v >= 3` vertices.
pub fn build_complete(n_v: usize) -> Result<GraphSpec, ModelError> {
    if n_v < 3 {
        return Err(ModelError::GraphTooSmall(n_v, 3));
    }
    let mut edges = Vec::new();
    for a in 0..n_v {
        for b in a + 1..n_v {
            edges.push((a, b));
        }
    }
    GraphSpec::new(n_v, edges)
}

/// Path with `n_edges >= 1` edges.
pub fn build_path(n_edges: usize) -> Result<GraphSpec, ModelError> {
    if n_edges < 1 {
        return Err(ModelError::GraphTooSmall(n_edges, 2));
    }
    GraphSpec::new(n_edges + 1, (0..n_edges).map(|i| (i, i + 1)).collect())
}

/// Two hubs joined by a distinguished edge, with `r` leaves on one hub and
/// `s` on the other. Edge indices: `0..r` are the first hub's leaf edges,
/// `r` is the hub-hub edge, `r+1..r+s+1` the second hub's leaf edges.
pub fn build_whisker(r: usize, s: usize) -> Result<GraphSpec, ModelError> {
    if r < 1 || s < 1 {
        return Err(ModelError::GraphTooSmall(r + s + 2, 4));
    }
    let mut edges = Vec::with_capacity(r + s + 1);
    for i in 0..r {
        edges.push((0, 2 + i));
    }
    edges.push((0, 1));
    for j in 0..s {
        edges.push((1, 2 + r + j));
    }
    GraphSpec::new(r + s + 2, edges)
}

/// Turns a graph into a model: each vertex contributes its incident-edge set
/// with probability `1/n_v`; identical incident sets merge by summing.
pub fn graph_to_warm(g: &GraphSpec, alpha: f64) -> Result<WarmModel, ModelError> {
    if g.n_edges() > MAX_COLOURS {
        return Err(ModelError::ColourCountOutOfRange(g.n_edges()));
    }
    let p = 1.0 / g.n_v as f64;
    let mut acc: BTreeMap<u64, f64> = BTreeMap::new();
    for v in 0..g.n_v {
        let mask = g.incident_mask(v);
        if mask == 0 {
            return Err(ModelError::IsolatedVertex(v));
        }
        *acc.entry(mask).or_insert(0.0) += p;
    }
    let dist = SubsetDistribution::new(g.n_edges(), acc.into_iter().collect())?;
    WarmModel::new(dist, alpha)
}

/// Per-size probability class extracted by [`check_symmetry`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeClass {
    /// Subset size m.
    pub size: usize,
    /// Common probability of positive subsets of this size.
    pub prob: f64,
    /// Number of positive subsets of this size containing any given colour.
    pub per_colour: usize,
}

/// Result of the symmetry check: `weak` means same-size positive subsets
/// share one probability and every colour meets the same number of them;
/// `strong` additionally requires every same-size subset to be present.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub strong: bool,
    pub weak: bool,
    /// Populated when `weak` holds; one entry per subset size with mass.
    pub size_classes: Vec<SizeClass>,
}

/// Classifies the distribution's colour symmetry.
pub fn check_symmetry(dist: &SubsetDistribution) -> SymmetryReport {
    let n = dist.n();
    let mut by_size: BTreeMap<usize, Vec<(u64, f64)>> = BTreeMap::new();
    for &(mask, p) in dist.entries() {
        by_size
            .entry(mask.count_ones() as usize)
            .or_default()
            .push((mask, p));
    }

    let mut weak = true;
    let mut strong = true;
    let mut size_classes = Vec::new();
    for (&m, subsets) in &by_size {
        let p_m = subsets[0].1;
        if subsets.iter().any(|&(_, p)| (p - p_m).abs() > PROB_TOL) {
            weak = false;
            strong = false;
            break;
        }
        if subsets.len() as u64 != binomial(n, m) {
            strong = false;
        }
        let mut per_colour = vec![0usize; n];
        for &(mask, _) in subsets {
            for i in 0..n {
                if mask & (1 << i) != 0 {
                    per_colour[i] += 1;
                }
            }
        }
        let a_m = per_colour[0];
        if per_colour.iter().any(|&c| c != a_m) {
            weak = false;
            strong = false;
            break;
        }
        size_classes.push(SizeClass {
            size: m,
            prob: p_m,
            per_colour: a_m,
        });
    }
    if !weak {
        size_classes.clear();
    }
    SymmetryReport {
        strong,
        weak,
        size_classes,
    }
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

// ---------------------------------------------------------------------------
// JSON model files
// ---------------------------------------------------------------------------

/// Family tag plus parameters, the compact of the two accepted file shapes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: String,
    pub alpha: f64,
    #[serde(default)]
    pub params: FamilyParams,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FamilyParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_v: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    /// Support size for partially-supported thresholds; not a builder input.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[usize; 2]>>,
}

impl fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.family)?;
        let p = &self.params;
        let mut parts = Vec::new();
        if let Some(n) = p.n {
            parts.push(format!("n={n}"));
        }
        if let Some(m) = p.m {
            parts.push(format!("m={m}"));
        }
        if let Some(pp) = p.p {
            parts.push(format!("p={pp}"));
        }
        if let Some(n_v) = p.n_v {
            parts.push(format!("n_v={n_v}"));
        }
        if let Some(r) = p.r {
            parts.push(format!("r={r}"));
        }
        if let Some(s) = p.s {
            parts.push(format!("s={s}"));
        }
        if !parts.is_empty() {
            write!(f, "({})", parts.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct ExplicitFile {
    n: usize,
    alpha: f64,
    subsets: Vec<ExplicitSubset>,
}

#[derive(Debug, Deserialize)]
struct ExplicitSubset {
    colours: Vec<usize>,
    p: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ModelFile {
    Family(FamilySpec),
    Explicit(ExplicitFile),
}

fn require(v: Option<usize>, family: &str, param: &str) -> Result<usize, ModelError> {
    v.ok_or_else(|| ModelError::MissingParam {
        family: family.into(),
        param: param.into(),
    })
}

/// Builds the graph named by a family spec, for families that are graphs.
pub fn family_graph(spec: &FamilySpec) -> Result<Option<GraphSpec>, ModelError> {
    let p = &spec.params;
    let g = match spec.family.as_str() {
        "star" => Some(build_star(require(p.n, "star", "n")?)?),
        "cycle" => Some(build_cycle(require(p.n, "cycle", "n")?)?),
        "complete" => Some(build_complete(require(p.n_v, "complete", "n_v")?)?),
        "path" => Some(build_path(require(p.n, "path", "n")?)?),
        "triangle" => Some(build_cycle(3)?),
        "whisker" => Some(build_whisker(
            require(p.r, "whisker", "r")?,
            require(p.s, "whisker", "s")?,
        )?),
        "graph" => {
            let n_v = require(p.n_v, "graph", "n_v")?;
            let edges = p
                .edges
                .clone()
                .ok_or_else(|| ModelError::MissingParam {
                    family: "graph".into(),
                    param: "edges".into(),
                })?
                .into_iter()
                .map(|[a, b]| (a, b))
                .collect();
            Some(GraphSpec::new(n_v, edges)?)
        }
        _ => None,
    };
    Ok(g)
}

/// Instantiates a family spec as a model.
pub fn build_family(spec: &FamilySpec) -> Result<WarmModel, ModelError> {
    if let Some(g) = family_graph(spec)? {
        return graph_to_warm(&g, spec.alpha);
    }
    let p = &spec.params;
    match spec.family.as_str() {
        "fixed_m" => {
            let dist = build_fixed_m(require(p.n, "fixed_m", "n")?, require(p.m, "fixed_m", "m")?)?;
            dist.with_alpha(spec.alpha)
        }
        "bernoulli" => {
            let n = require(p.n, "bernoulli", "n")?;
            let prob = p.p.ok_or_else(|| ModelError::MissingParam {
                family: "bernoulli".into(),
                param: "p".into(),
            })?;
            build_bernoulli(n, prob)?.with_alpha(spec.alpha)
        }
        other => Err(ModelError::UnknownFamily(other.into())),
    }
}

/// Parses either file shape and validates all invariants, reporting the first
/// violated one.
pub fn load_model_json(text: &str) -> Result<WarmModel, ModelError> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
    match file {
        ModelFile::Family(spec) => build_family(&spec),
        ModelFile::Explicit(file) => {
            let mut entries = Vec::with_capacity(file.subsets.len());
            for sub in &file.subsets {
                let mut mask = 0u64;
                for &c in &sub.colours {
                    if c >= file.n {
                        return Err(ModelError::SubsetOutOfRange {
                            mask: 1 << c,
                            n: file.n,
                        });
                    }
                    mask |= 1 << c;
                }
                entries.push((mask, sub.p));
            }
            SubsetDistribution::new(file.n, entries)?.with_alpha(file.alpha)
        }
    }
}

/// Serializes a model in the explicit file shape.
pub fn model_to_json(model: &WarmModel) -> serde_json::Value {
    let subsets: Vec<serde_json::Value> = model
        .dist()
        .entries()
        .iter()
        .map(|&(mask, p)| {
            let colours: Vec<usize> = (0..model.n()).filter(|&i| mask & (1 << i) != 0).collect();
            serde_json::json!({ "colours": colours, "p": p })
        })
        .collect();
    serde_json::json!({
        "schema": 1,
        "n": model.n(),
        "alpha": model.alpha(),
        "subsets": subsets,
    })
}
