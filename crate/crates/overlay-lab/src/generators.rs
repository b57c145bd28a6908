/*!
Topology generators for overlay networks under an optional hard degree
cutoff `k_c`.

Four models share the same config type:

- `Pa`: growth by preferential attachment, rejection-sampled.
- `Cm`: configuration model over a prescribed power-law degree sequence,
  built by uniform stub pairing; self-loops and parallel edges are dropped
  and reported.
- `Hapa`: growth where each joiner first tries one uniformly random node,
  then walks the existing overlay hop by hop, attempting a degree-biased
  attachment at every stop. Without a cutoff this condenses into star-like
  super-hubs.
- `Dapa`: growth constrained by a physical substrate (geometric random
  network or 2-D mesh). A joiner discovers peers within `tau_sub` substrate
  hops and attaches preferentially inside that horizon only.

All generators draw from a caller-supplied RNG; `generate` seeds one from
the config so identical configs reproduce identical edge sets.
*/

use std::io::{self, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{BfsScratch, Graph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Pa,
    Cm,
    Hapa,
    Dapa,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubstrateKind {
    /// Geometric random network: uniform points in the unit box, edge iff
    /// Euclidean distance < radius.
    Grn,
    /// Regular 2-D four-neighbor mesh with `floor(sqrt(n))^2` nodes.
    Mesh,
}

#[derive(Clone, Debug)]
pub struct SubstrateConfig {
    pub n_substrate: usize,
    pub radius: f64,
    pub dimensions: usize,
    pub kind: SubstrateKind,
    pub seed: u64,
}

impl SubstrateConfig {
    pub fn grn(n_substrate: usize, radius: f64, seed: u64) -> Self {
        SubstrateConfig {
            n_substrate,
            radius,
            dimensions: 2,
            kind: SubstrateKind::Grn,
            seed,
        }
    }

    pub fn mesh(n_substrate: usize, seed: u64) -> Self {
        SubstrateConfig {
            n_substrate,
            radius: 0.0,
            dimensions: 2,
            kind: SubstrateKind::Mesh,
            seed,
        }
    }

    /// Node count the substrate will actually have once built.
    pub fn effective_nodes(&self) -> usize {
        match self.kind {
            SubstrateKind::Grn => self.n_substrate,
            SubstrateKind::Mesh => {
                let side = isqrt(self.n_substrate);
                side * side
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct GeneratorConfig {
    pub model: Model,
    /// Overlay size (peer count for `Dapa`).
    pub n_nodes: usize,
    /// Stub count m: edges placed per joining node / minimum target degree.
    pub stubs: usize,
    /// Hard degree cutoff k_c; `None` leaves degrees unconstrained.
    pub hard_cutoff: Option<usize>,
    /// Target exponent for the configuration model.
    pub gamma_target: Option<f64>,
    /// Discovery horizon in substrate hops (`Dapa` only).
    pub tau_sub: Option<usize>,
    /// Physical substrate (`Dapa` only).
    pub substrate: Option<SubstrateConfig>,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn new(model: Model, n_nodes: usize, stubs: usize, seed: u64) -> Self {
        GeneratorConfig {
            model,
            n_nodes,
            stubs,
            hard_cutoff: None,
            gamma_target: None,
            tau_sub: None,
            substrate: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        let m = self.stubs;
        if m == 0 {
            return Err(GeneratorError::InvalidConfig("stubs must be >= 1".into()));
        }
        if let Some(kc) = self.hard_cutoff {
            if kc <= m {
                return Err(GeneratorError::InvalidConfig(format!(
                    "hard cutoff {} must exceed stub count {}",
                    kc, m
                )));
            }
        }
        match self.model {
            Model::Pa | Model::Hapa => {
                if self.n_nodes < m + 2 {
                    return Err(GeneratorError::InvalidConfig(format!(
                        "growth models need at least m + 2 = {} nodes, got {}",
                        m + 2,
                        self.n_nodes
                    )));
                }
            }
            Model::Cm => {
                let gamma = self.gamma_target.ok_or_else(|| {
                    GeneratorError::InvalidConfig("configuration model needs gamma_target".into())
                })?;
                if !(gamma > 1.0) {
                    return Err(GeneratorError::InvalidConfig(format!(
                        "gamma_target must exceed 1, got {}",
                        gamma
                    )));
                }
                if self.n_nodes < 2 {
                    return Err(GeneratorError::InvalidConfig(
                        "configuration model needs at least 2 nodes".into(),
                    ));
                }
            }
            Model::Dapa => {
                let tau = self.tau_sub.ok_or_else(|| {
                    GeneratorError::InvalidConfig("substrate model needs tau_sub".into())
                })?;
                if tau == 0 {
                    return Err(GeneratorError::InvalidConfig("tau_sub must be >= 1".into()));
                }
                let sub = self.substrate.as_ref().ok_or_else(|| {
                    GeneratorError::InvalidConfig("substrate model needs a substrate config".into())
                })?;
                validate_substrate(sub)?;
                if self.n_nodes < 2 {
                    return Err(GeneratorError::InvalidConfig(
                        "overlay needs at least 2 peers".into(),
                    ));
                }
                if self.n_nodes > sub.effective_nodes() {
                    return Err(GeneratorError::InvalidConfig(format!(
                        "overlay size {} exceeds substrate size {}",
                        self.n_nodes,
                        sub.effective_nodes()
                    )));
                }
            }
        }
        Ok(())
    }
}

fn validate_substrate(cfg: &SubstrateConfig) -> Result<(), GeneratorError> {
    if cfg.n_substrate == 0 {
        return Err(GeneratorError::InvalidConfig(
            "substrate needs at least 1 node".into(),
        ));
    }
    match cfg.kind {
        SubstrateKind::Grn => {
            if cfg.dimensions == 0 {
                return Err(GeneratorError::InvalidConfig(
                    "substrate dimensions must be >= 1".into(),
                ));
            }
            if !(cfg.radius > 0.0) || !cfg.radius.is_finite() {
                return Err(GeneratorError::InvalidConfig(format!(
                    "substrate radius must be positive and finite, got {}",
                    cfg.radius
                )));
            }
        }
        SubstrateKind::Mesh => {
            if isqrt(cfg.n_substrate) < 2 {
                return Err(GeneratorError::InvalidConfig(
                    "mesh substrate needs at least 4 nodes".into(),
                ));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("attachment stalled at node {node}: no eligible target")]
    Stalled { node: usize },
    #[error("candidate pool exhausted after {peers_joined} of {target} peers joined")]
    Exhausted { peers_joined: usize, target: usize },
}

/// Candidate pool for a degree-biased pick.
#[derive(Clone, Copy, Debug)]
pub enum Candidates<'a> {
    /// All node ids in `0..bound` (the already-grown prefix).
    Below(usize),
    /// An explicit id list, e.g. a discovery horizon.
    Among(&'a [usize]),
}

impl Candidates<'_> {
    fn len(&self) -> usize {
        match self {
            Candidates::Below(n) => *n,
            Candidates::Among(s) => s.len(),
        }
    }

    #[inline]
    fn get(&self, i: usize) -> usize {
        match self {
            Candidates::Below(_) => i,
            Candidates::Among(s) => s[i],
        }
    }
}

/// How many consecutive rejections the sampling loop tolerates before it
/// switches to an exact scan, per node in the graph.
const REJECTION_GUARD_FACTOR: usize = 50;

/// Draws a candidate with probability proportional to its degree among the
/// eligible ones (not the joiner, not already adjacent to it, and below the
/// cutoff when one is set).
///
/// The draw loop picks a uniform candidate and accepts it with probability
/// `degree / degree_norm`. `degree_norm` is the caller's normalizer: the
/// whole graph's total degree during plain growth, or the summed horizon
/// degree when attachment is restricted to a discovered subset. The
/// normalizer affects only the acceptance rate, not the conditional law.
/// After `REJECTION_GUARD_FACTOR * n` consecutive rejections the loop falls
/// back to an exact degree-weighted roulette over the eligible candidates
/// (the same distribution), returning `None` only when nothing is eligible.
pub fn preferential_pick<R: Rng>(
    g: &Graph,
    candidates: Candidates<'_>,
    joiner: usize,
    hard_cutoff: Option<usize>,
    degree_norm: usize,
    rng: &mut R,
) -> Option<usize> {
    let len = candidates.len();
    if len == 0 {
        return None;
    }
    let cutoff = hard_cutoff.map(|c| c as u32).unwrap_or(u32::MAX);
    let norm = degree_norm as f64;
    let degrees = g.degrees();
    let max_rejections = REJECTION_GUARD_FACTOR.saturating_mul(g.node_count().max(1));
    if norm > 0.0 {
        for _ in 0..max_rejections {
            let node = candidates.get(rng.gen_range(0..len));
            let k = degrees[node];
            let r: f64 = rng.gen();
            if k < cutoff && r * norm < k as f64 && node != joiner && !g.has_edge(joiner, node) {
                return Some(node);
            }
        }
    }
    roulette_pick(g, candidates, joiner, cutoff, rng)
}

/// Exact degree-weighted draw over eligible candidates; `None` when no
/// candidate is eligible (or all eligible ones have degree zero, which the
/// degree-proportional law cannot select).
fn roulette_pick<R: Rng>(
    g: &Graph,
    candidates: Candidates<'_>,
    joiner: usize,
    cutoff: u32,
    rng: &mut R,
) -> Option<usize> {
    let degrees = g.degrees();
    let mut eligible: Vec<(usize, u32)> = Vec::new();
    let mut total: u64 = 0;
    for i in 0..candidates.len() {
        let node = candidates.get(i);
        let k = degrees[node];
        if k > 0 && k < cutoff && node != joiner && !g.has_edge(joiner, node) {
            eligible.push((node, k));
            total += k as u64;
        }
    }
    if total == 0 {
        return None;
    }
    let mut t = rng.gen_range(0..total);
    for (node, k) in eligible {
        if t < k as u64 {
            return Some(node);
        }
        t -= k as u64;
    }
    unreachable!("roulette weights exhausted");
}

fn seed_clique(g: &mut Graph, m: usize) {
    for u in 0..=m {
        for v in (u + 1)..=m {
            g.add_edge(u, v).expect("clique ids in range");
        }
    }
}

/// Preferential-attachment growth. Starts from an (m+1)-clique; each new
/// node fills m stubs by degree-biased picks over all existing nodes.
pub fn generate_pa<R: Rng>(cfg: &GeneratorConfig, rng: &mut R) -> Result<Graph, GeneratorError> {
    cfg.validate()?;
    let (n, m) = (cfg.n_nodes, cfg.stubs);
    let mut g = Graph::new(n);
    seed_clique(&mut g, m);
    for i in (m + 1)..n {
        for _ in 0..m {
            let target = preferential_pick(
                &g,
                Candidates::Below(i),
                i,
                cfg.hard_cutoff,
                g.total_degree(),
                rng,
            )
            .ok_or(GeneratorError::Stalled { node: i })?;
            g.add_edge(i, target).expect("ids in range");
        }
    }
    Ok(g)
}

/// Hop-and-attempt growth. Each joiner makes one attempt at a uniformly
/// random existing node, then walks the overlay (uniform neighbor hops,
/// restarting from a uniform node whenever the walker sits on a degree-zero
/// node, i.e. the joiner itself before its first edge) and attempts a
/// degree-biased attachment at every stop until its m stubs are placed.
/// The walk continues from the last stop whether or not an attempt
/// succeeded. The same rejection guard as `preferential_pick` applies.
pub fn generate_hapa<R: Rng>(cfg: &GeneratorConfig, rng: &mut R) -> Result<Graph, GeneratorError> {
    cfg.validate()?;
    let (n, m) = (cfg.n_nodes, cfg.stubs);
    let cutoff = cfg.hard_cutoff.map(|c| c as u32).unwrap_or(u32::MAX);
    let mut g = Graph::new(n);
    seed_clique(&mut g, m);
    let guard = REJECTION_GUARD_FACTOR.saturating_mul(n.max(1));
    for i in (m + 1)..n {
        let mut placed = 0;

        // One-shot first attempt at a uniform existing node.
        let first = rng.gen_range(0..i);
        let k = g.degree(first) as u32;
        let r: f64 = rng.gen();
        if k < cutoff && r * (g.total_degree() as f64) < k as f64 && !g.has_edge(i, first) {
            g.add_edge(i, first).expect("ids in range");
            placed += 1;
        }

        let mut cur = i;
        let mut rejections = 0usize;
        while placed < m {
            cur = if g.degree(cur) == 0 {
                rng.gen_range(0..i)
            } else {
                let nbrs = g.neighbors(cur);
                nbrs[rng.gen_range(0..nbrs.len())]
            };
            let k = g.degree(cur) as u32;
            let r: f64 = rng.gen();
            if cur != i
                && k < cutoff
                && r * (g.total_degree() as f64) < k as f64
                && !g.has_edge(i, cur)
            {
                g.add_edge(i, cur).expect("ids in range");
                placed += 1;
                rejections = 0;
            } else {
                rejections += 1;
                if rejections >= guard {
                    match roulette_pick(&g, Candidates::Below(i), i, cutoff, rng) {
                        Some(target) => {
                            g.add_edge(i, target).expect("ids in range");
                            placed += 1;
                            rejections = 0;
                        }
                        None => return Err(GeneratorError::Stalled { node: i }),
                    }
                }
            }
        }
    }
    Ok(g)
}

/// Prescribed degrees for a configuration-model build: every entry in
/// `[min_degree, max_degree]`, even sum.
#[derive(Clone, Debug)]
pub struct DegreeSequence(Vec<usize>);

impl DegreeSequence {
    pub fn new(
        degrees: Vec<usize>,
        min_degree: usize,
        max_degree: usize,
    ) -> Result<Self, GeneratorError> {
        if degrees.iter().any(|&k| k < min_degree || k > max_degree) {
            return Err(GeneratorError::InvalidConfig(format!(
                "degree sequence entries must lie in [{}, {}]",
                min_degree, max_degree
            )));
        }
        let sum: usize = degrees.iter().sum();
        if sum % 2 != 0 {
            return Err(GeneratorError::InvalidConfig(
                "degree sequence must have an even sum".into(),
            ));
        }
        Ok(DegreeSequence(degrees))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn sum(&self) -> usize {
        self.0.iter().sum()
    }
}

/// Samples `n` degrees from the truncated power law with exponent `gamma`
/// on `[m, k_c]` via inverse transform of the continuous law,
/// `k = floor(m * (1 - u)^(-1/(gamma-1)))`, redrawing any value above
/// `k_c`. An odd sum is repaired by bumping one random entry that still
/// has room below the cutoff.
pub fn sample_powerlaw_degree_sequence<R: Rng>(
    n: usize,
    m: usize,
    gamma: f64,
    k_c: usize,
    rng: &mut R,
) -> Result<DegreeSequence, GeneratorError> {
    if m == 0 {
        return Err(GeneratorError::InvalidConfig(
            "minimum degree must be >= 1".into(),
        ));
    }
    if k_c <= m {
        return Err(GeneratorError::InvalidConfig(format!(
            "degree cutoff {} must exceed minimum degree {}",
            k_c, m
        )));
    }
    if !(gamma > 1.0) {
        return Err(GeneratorError::InvalidConfig(format!(
            "gamma must exceed 1, got {}",
            gamma
        )));
    }
    let exponent = -1.0 / (gamma - 1.0);
    let mf = m as f64;
    let kcf = k_c as f64;
    let mut degrees = Vec::with_capacity(n);
    let mut sum: usize = 0;
    for _ in 0..n {
        let k = loop {
            let u: f64 = rng.gen();
            let x = (mf * (1.0 - u).powf(exponent)).floor();
            if x <= kcf {
                break x as usize;
            }
        };
        sum += k;
        degrees.push(k);
    }
    if sum % 2 != 0 {
        let below: Vec<usize> = (0..n).filter(|&i| degrees[i] < k_c).collect();
        if below.is_empty() {
            // Every entry saturated at k_c: make room by decrementing one.
            let i = rng.gen_range(0..n);
            degrees[i] -= 1;
        } else {
            let i = below[rng.gen_range(0..below.len())];
            degrees[i] += 1;
        }
    }
    DegreeSequence::new(degrees, m, k_c)
}

/// Configuration-model output: the simple graph plus how many stub pairs
/// were discarded as self-loops or parallel edges.
#[derive(Debug)]
pub struct CmBuild {
    pub graph: Graph,
    pub self_loops_removed: usize,
    pub multi_edges_removed: usize,
}

/// Uniform stub pairing over a prescribed degree sequence. Self-loops and
/// parallel edges are deleted (not rewired), so realized degrees can fall
/// below the prescription for a small fraction of nodes.
pub fn generate_cm<R: Rng>(seq: &DegreeSequence, rng: &mut R) -> CmBuild {
    let n = seq.len();
    let mut stubs: Vec<usize> = Vec::with_capacity(seq.sum());
    for (node, &k) in seq.as_slice().iter().enumerate() {
        stubs.extend(std::iter::repeat(node).take(k));
    }
    // Uniform perfect matching on stubs: shuffle once, pair consecutive.
    for i in (1..stubs.len()).rev() {
        let j = rng.gen_range(0..=i);
        stubs.swap(i, j);
    }
    let mut graph = Graph::new(n);
    let mut self_loops_removed = 0;
    let mut multi_edges_removed = 0;
    for pair in stubs.chunks_exact(2) {
        let (u, v) = (pair[0], pair[1]);
        if u == v {
            self_loops_removed += 1;
        } else if !graph.add_edge(u, v).expect("stub ids in range") {
            multi_edges_removed += 1;
        }
    }
    CmBuild {
        graph,
        self_loops_removed,
        multi_edges_removed,
    }
}

/// Node positions for a geometric substrate, `dims` coordinates per node.
#[derive(Clone, Debug)]
pub struct Coordinates {
    dims: usize,
    data: Vec<f64>,
}

impl Coordinates {
    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn node_count(&self) -> usize {
        self.data.len() / self.dims
    }

    pub fn get(&self, node: usize) -> &[f64] {
        &self.data[node * self.dims..(node + 1) * self.dims]
    }

    /// One `id c1 c2 ...` line per node.
    pub fn write<W: Write>(&self, mut w: W) -> io::Result<()> {
        for node in 0..self.node_count() {
            write!(w, "{}", node)?;
            for c in self.get(node) {
                write!(w, " {}", c)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Geometric random network: `n_substrate` uniform points in the unit box,
/// an edge wherever the Euclidean distance is below `radius`. Neighbor
/// search uses a spatial grid with cells at least `radius` wide, so only
/// the 3^d surrounding cells need checking.
pub fn generate_grn<R: Rng>(
    cfg: &SubstrateConfig,
    rng: &mut R,
) -> Result<(Graph, Coordinates), GeneratorError> {
    validate_substrate(cfg)?;
    let n = cfg.n_substrate;
    let d = cfg.dimensions;
    let r = cfg.radius;
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        data.push(rng.gen::<f64>());
    }
    let coords = Coordinates { dims: d, data };

    // Cell side >= radius keeps the 3^d neighborhood sufficient; the cap by
    // ~n^(1/d) bounds the cell count for very small radii.
    let by_radius = (1.0 / r).floor().max(1.0) as usize;
    let by_count = ((n as f64).powf(1.0 / d as f64).ceil() as usize).max(1);
    let cells_per_dim = by_radius.min(by_count).max(1);
    let cell_size = 1.0 / cells_per_dim as f64;
    let n_cells = cells_per_dim.pow(d as u32);
    let mut cells: Vec<Vec<u32>> = vec![Vec::new(); n_cells];

    let cell_of = |p: &[f64]| -> usize {
        let mut idx = 0usize;
        for &x in p {
            let c = ((x / cell_size) as usize).min(cells_per_dim - 1);
            idx = idx * cells_per_dim + c;
        }
        idx
    };
    let r2 = r * r;
    let mut g = Graph::new(n);
    // 3^d offsets enumerated by odometer; nodes inserted in id order so each
    // pair is examined once.
    let mut offsets: Vec<Vec<isize>> = Vec::new();
    {
        let mut counter = vec![0usize; d];
        loop {
            offsets.push(counter.iter().map(|&c| c as isize - 1).collect());
            let mut i = 0;
            loop {
                if i == d {
                    break;
                }
                counter[i] += 1;
                if counter[i] < 3 {
                    break;
                }
                counter[i] = 0;
                i += 1;
            }
            if counter.iter().all(|&c| c == 0) {
                break;
            }
        }
    }
    let mut home = vec![0usize; d];
    for i in 0..n {
        let pi = coords.get(i);
        for (axis, &x) in pi.iter().enumerate() {
            home[axis] = ((x / cell_size) as usize).min(cells_per_dim - 1);
        }
        for off in &offsets {
            let mut idx = 0usize;
            let mut ok = true;
            for axis in 0..d {
                let c = home[axis] as isize + off[axis];
                if c < 0 || c >= cells_per_dim as isize {
                    ok = false;
                    break;
                }
                idx = idx * cells_per_dim + c as usize;
            }
            if !ok {
                continue;
            }
            for &j in &cells[idx] {
                let pj = coords.get(j as usize);
                let mut dist2 = 0.0;
                for axis in 0..d {
                    let delta = pi[axis] - pj[axis];
                    dist2 += delta * delta;
                }
                if dist2 < r2 {
                    g.add_edge(i, j as usize).expect("ids in range");
                }
            }
        }
        cells[cell_of(pi)].push(i as u32);
    }
    Ok((g, coords))
}

/// Regular 2-D mesh with four-neighbor connectivity and open boundaries.
pub fn generate_mesh2d(rows: usize, cols: usize) -> Graph {
    let mut g = Graph::new(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let id = r * cols + c;
            if c + 1 < cols {
                g.add_edge(id, id + 1).expect("ids in range");
            }
            if r + 1 < rows {
                g.add_edge(id, id + cols).expect("ids in range");
            }
        }
    }
    g
}

/// Discovery-horizon growth output. Overlay ids are dense join-order ids;
/// `substrate_node_of[overlay_id]` maps back to the substrate.
#[derive(Debug)]
pub struct DapaBuild {
    pub overlay: Graph,
    pub substrate: Graph,
    pub substrate_node_of: Vec<usize>,
    pub coordinates: Option<Coordinates>,
}

/// Substrate-constrained growth. The overlay seeds with two random
/// substrate nodes joined by one edge. Candidates are drawn uniformly from
/// substrate nodes not yet in the overlay; each runs a bounded BFS on the
/// substrate and collects its horizon: overlay peers within `tau_sub`
/// substrate hops whose overlay degree is still below the cutoff. An empty
/// horizon skips the candidate (it stays in the pool for later). A horizon
/// of at most m peers is connected in full; a larger one feeds m
/// degree-biased picks normalized by the horizon's total degree.
pub fn generate_dapa<R: Rng>(
    cfg: &GeneratorConfig,
    rng: &mut R,
) -> Result<DapaBuild, GeneratorError> {
    cfg.validate()?;
    let sub_cfg = cfg.substrate.as_ref().expect("validated");
    let tau = cfg.tau_sub.expect("validated");
    let m = cfg.stubs;
    let cutoff = cfg.hard_cutoff;
    let cutoff_u32 = cutoff.map(|c| c as u32).unwrap_or(u32::MAX);

    let mut sub_rng = ChaCha8Rng::seed_from_u64(sub_cfg.seed);
    let (substrate, coordinates) = match sub_cfg.kind {
        SubstrateKind::Grn => {
            let (g, c) = generate_grn(sub_cfg, &mut sub_rng)?;
            (g, Some(c))
        }
        SubstrateKind::Mesh => {
            let side = isqrt(sub_cfg.n_substrate);
            (generate_mesh2d(side, side), None)
        }
    };
    let ns = substrate.node_count();
    let no = cfg.n_nodes;

    let mut overlay = Graph::new(no);
    let mut substrate_node_of: Vec<usize> = Vec::with_capacity(no);
    let mut overlay_of: Vec<Option<u32>> = vec![None; ns];

    let s0 = rng.gen_range(0..ns);
    let s1 = loop {
        let x = rng.gen_range(0..ns);
        if x != s0 {
            break x;
        }
    };
    for s in [s0, s1] {
        overlay_of[s] = Some(substrate_node_of.len() as u32);
        substrate_node_of.push(s);
    }
    overlay.add_edge(0, 1).expect("seed ids in range");

    let mut scratch = BfsScratch::new();
    let mut horizon: Vec<usize> = Vec::new();
    let guard = REJECTION_GUARD_FACTOR.saturating_mul(ns);
    let mut fruitless = 0usize;

    while substrate_node_of.len() < no {
        let candidate = {
            let c = rng.gen_range(0..ns);
            if overlay_of[c].is_some() {
                fruitless += 1;
                if fruitless >= guard {
                    match rescue_candidate(
                        &substrate,
                        &overlay,
                        &overlay_of,
                        &substrate_node_of,
                        tau,
                        cutoff_u32,
                        &mut scratch,
                        rng,
                    ) {
                        Some(c) => c,
                        None => {
                            return Err(GeneratorError::Exhausted {
                                peers_joined: substrate_node_of.len(),
                                target: no,
                            })
                        }
                    }
                } else {
                    continue;
                }
            } else {
                c
            }
        };
        scratch.run(&substrate, candidate, Some(tau));
        horizon.clear();
        for (peer, &sub_node) in substrate_node_of.iter().enumerate() {
            if let Some(dist) = scratch.dist(sub_node) {
                if dist > 0 && (overlay.degree(peer) as u32) < cutoff_u32 {
                    horizon.push(peer);
                }
            }
        }
        if horizon.is_empty() {
            fruitless += 1;
            if fruitless >= guard {
                let rescued = rescue_candidate(
                    &substrate,
                    &overlay,
                    &overlay_of,
                    &substrate_node_of,
                    tau,
                    cutoff_u32,
                    &mut scratch,
                    rng,
                );
                match rescued {
                    Some(c) => {
                        scratch.run(&substrate, c, Some(tau));
                        horizon.clear();
                        for (peer, &sub_node) in substrate_node_of.iter().enumerate() {
                            if let Some(dist) = scratch.dist(sub_node) {
                                if dist > 0 && (overlay.degree(peer) as u32) < cutoff_u32 {
                                    horizon.push(peer);
                                }
                            }
                        }
                        attach_within_horizon(
                            &mut overlay,
                            &mut substrate_node_of,
                            &mut overlay_of,
                            c,
                            &horizon,
                            m,
                            cutoff,
                            rng,
                        );
                        fruitless = 0;
                    }
                    None => {
                        return Err(GeneratorError::Exhausted {
                            peers_joined: substrate_node_of.len(),
                            target: no,
                        })
                    }
                }
            }
            continue;
        }
        attach_within_horizon(
            &mut overlay,
            &mut substrate_node_of,
            &mut overlay_of,
            candidate,
            &horizon,
            m,
            cutoff,
            rng,
        );
        fruitless = 0;
    }

    Ok(DapaBuild {
        overlay,
        substrate,
        substrate_node_of,
        coordinates,
    })
}

/// Joins `candidate` to the overlay using its discovered horizon.
#[allow(clippy::too_many_arguments)]
fn attach_within_horizon<R: Rng>(
    overlay: &mut Graph,
    substrate_node_of: &mut Vec<usize>,
    overlay_of: &mut [Option<u32>],
    candidate: usize,
    horizon: &[usize],
    m: usize,
    cutoff: Option<usize>,
    rng: &mut R,
) {
    let new_id = substrate_node_of.len();
    overlay_of[candidate] = Some(new_id as u32);
    substrate_node_of.push(candidate);
    if horizon.len() <= m {
        for &peer in horizon {
            overlay.add_edge(new_id, peer).expect("ids in range");
        }
    } else {
        let mut norm: usize = horizon.iter().map(|&p| overlay.degree(p)).sum();
        for _ in 0..m {
            match preferential_pick(
                overlay,
                Candidates::Among(horizon),
                new_id,
                cutoff,
                norm,
                rng,
            ) {
                Some(peer) => {
                    overlay.add_edge(new_id, peer).expect("ids in range");
                    norm += 1; // the chosen peer's degree grew
                }
                None => break,
            }
        }
    }
}

/// Exact stall check: scans every substrate node still outside the overlay
/// for a non-empty horizon and returns a uniform choice among the viable
/// ones. `None` means no remaining candidate can ever join at the current
/// overlay state.
#[allow(clippy::too_many_arguments)]
fn rescue_candidate<R: Rng>(
    substrate: &Graph,
    overlay: &Graph,
    overlay_of: &[Option<u32>],
    substrate_node_of: &[usize],
    tau: usize,
    cutoff_u32: u32,
    scratch: &mut BfsScratch,
    rng: &mut R,
) -> Option<usize> {
    let mut viable: Vec<usize> = Vec::new();
    for c in 0..substrate.node_count() {
        if overlay_of[c].is_some() {
            continue;
        }
        scratch.run(substrate, c, Some(tau));
        let ok = substrate_node_of.iter().enumerate().any(|(peer, &s)| {
            scratch
                .dist(s)
                .map(|d| d > 0 && (overlay.degree(peer) as u32) < cutoff_u32)
                .unwrap_or(false)
        });
        if ok {
            viable.push(c);
        }
    }
    if viable.is_empty() {
        None
    } else {
        Some(viable[rng.gen_range(0..viable.len())])
    }
}

/// Everything a single generator run produces.
#[derive(Debug)]
pub struct GeneratedNetwork {
    pub graph: Graph,
    pub self_loops_removed: usize,
    pub multi_edges_removed: usize,
    pub substrate: Option<SubstrateArtifacts>,
}

#[derive(Debug)]
pub struct SubstrateArtifacts {
    pub graph: Graph,
    /// `node_map[overlay_id]` = substrate id.
    pub node_map: Vec<usize>,
    pub coordinates: Option<Coordinates>,
}

/// Builds the configured model with an RNG seeded from `cfg.seed`.
/// Identical configs yield identical edge sets.
pub fn generate(cfg: &GeneratorConfig) -> Result<GeneratedNetwork, GeneratorError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match cfg.model {
        Model::Pa => Ok(plain(generate_pa(cfg, &mut rng)?)),
        Model::Hapa => Ok(plain(generate_hapa(cfg, &mut rng)?)),
        Model::Cm => {
            let gamma = cfg.gamma_target.expect("validated");
            // Without an explicit cutoff a simple graph still cannot exceed
            // degree n-1.
            let k_c = cfg.hard_cutoff.unwrap_or(cfg.n_nodes.saturating_sub(1));
            let seq =
                sample_powerlaw_degree_sequence(cfg.n_nodes, cfg.stubs, gamma, k_c, &mut rng)?;
            let build = generate_cm(&seq, &mut rng);
            Ok(GeneratedNetwork {
                graph: build.graph,
                self_loops_removed: build.self_loops_removed,
                multi_edges_removed: build.multi_edges_removed,
                substrate: None,
            })
        }
        Model::Dapa => {
            let build = generate_dapa(cfg, &mut rng)?;
            Ok(GeneratedNetwork {
                graph: build.overlay,
                self_loops_removed: 0,
                multi_edges_removed: 0,
                substrate: Some(SubstrateArtifacts {
                    graph: build.substrate,
                    node_map: build.substrate_node_of,
                    coordinates: build.coordinates,
                }),
            })
        }
    }
}

fn plain(graph: Graph) -> GeneratedNetwork {
    GeneratedNetwork {
        graph,
        self_loops_removed: 0,
        multi_edges_removed: 0,
        substrate: None,
    }
}

/// One `overlay_id substrate_id` line per overlay node.
pub fn write_peer_map<W: Write>(node_map: &[usize], mut w: W) -> io::Result<()> {
    for (overlay_id, substrate_id) in node_map.iter().enumerate() {
        writeln!(w, "{} {}", overlay_id, substrate_id)?;
    }
    Ok(())
}

fn isqrt(n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let mut s = (n as f64).sqrt() as usize;
    while (s + 1) * (s + 1) <= n {
        s += 1;
    }
    while s * s > n {
        s -= 1;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn edge_set(g: &Graph) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for u in 0..g.node_count() {
            for &v in g.neighbors(u) {
                if u < v {
                    edges.push((u, v));
                }
            }
        }
        edges
    }

    /// Fixed 8-node graph with known degrees for kernel tests.
    fn frozen_graph() -> Graph {
        let mut g = Graph::new(9); // node 8 reserved as the joiner
        for (u, v) in [(0, 1), (0, 2), (0, 3), (1, 2), (3, 4), (4, 5), (5, 6), (6, 7), (0, 7)] {
            g.add_edge(u, v).unwrap();
        }
        g
    }

    #[test]
    fn pick_is_uniform_over_equal_degrees() {
        // Ring of 10: all degrees 2. Chi-square over 1e4 draws, df=9,
        // critical value at p=0.001 is 27.88.
        let mut g = Graph::new(11);
        for i in 0..10 {
            g.add_edge(i, (i + 1) % 10).unwrap();
        }
        let mut r = rng(11);
        let mut counts = [0usize; 10];
        let draws = 10_000;
        for _ in 0..draws {
            let node = preferential_pick(
                &g,
                Candidates::Below(10),
                10,
                None,
                g.total_degree(),
                &mut r,
            )
            .unwrap();
            counts[node] += 1;
        }
        let expected = draws as f64 / 10.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 27.88, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn pick_weights_follow_degree_ratio() {
        // Path 0-1-2: degrees 1, 2, 1. Node 1 should win ~half the draws.
        let mut g = Graph::new(4);
        g.add_edge(0, 1).unwrap();
        g.add_edge(1, 2).unwrap();
        let mut r = rng(12);
        let draws = 20_000;
        let mut hub = 0usize;
        for _ in 0..draws {
            let node =
                preferential_pick(&g, Candidates::Below(3), 3, None, g.total_degree(), &mut r)
                    .unwrap();
            if node == 1 {
                hub += 1;
            }
        }
        let frac = hub as f64 / draws as f64;
        assert!((frac - 0.5).abs() < 0.02, "hub fraction {frac}");
    }

    #[test]
    fn pick_matches_exact_kernel_within_3_sigma() {
        let g = frozen_graph();
        let degrees: Vec<usize> = (0..8).map(|u| g.degree(u)).collect();
        let total: usize = degrees.iter().sum();
        let mut r = rng(13);
        let draws = 100_000usize;
        let mut counts = vec![0usize; 8];
        for _ in 0..draws {
            let node =
                preferential_pick(&g, Candidates::Below(8), 8, None, g.total_degree(), &mut r)
                    .unwrap();
            counts[node] += 1;
        }
        for u in 0..8 {
            let p = degrees[u] as f64 / total as f64;
            let mean = draws as f64 * p;
            let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
            assert!(
                (counts[u] as f64 - mean).abs() <= 3.0 * sigma,
                "node {u}: count {} vs mean {mean:.1} (sigma {sigma:.1})",
                counts[u]
            );
        }
    }

    #[test]
    fn pick_returns_none_when_all_saturated() {
        // Triangle: all degrees 2, cutoff 2 excludes everyone.
        let mut g = Graph::new(4);
        g.add_edge(0, 1).unwrap();
        g.add_edge(1, 2).unwrap();
        g.add_edge(0, 2).unwrap();
        let mut r = rng(14);
        let got = preferential_pick(
            &g,
            Candidates::Below(3),
            3,
            Some(2),
            g.total_degree(),
            &mut r,
        );
        assert_eq!(got, None);
    }

    #[test]
    fn pick_empty_pool_is_none() {
        let g = Graph::new(3);
        let mut r = rng(15);
        assert_eq!(
            preferential_pick(&g, Candidates::Below(0), 2, None, 0, &mut r),
            None
        );
        assert_eq!(
            preferential_pick(&g, Candidates::Among(&[]), 2, None, 4, &mut r),
            None
        );
    }

    #[test]
    fn pick_guard_falls_back_to_exact_roulette() {
        // Absurd normalizer makes loop acceptance essentially impossible, so
        // the guard must kick in and still honor degree weights 1:2:1.
        let mut g = Graph::new(5);
        g.add_edge(0, 1).unwrap();
        g.add_edge(1, 2).unwrap();
        let mut r = rng(16);
        let mut hub = 0usize;
        let draws = 2_000;
        for _ in 0..draws {
            let node = preferential_pick(
                &g,
                Candidates::Among(&[0, 1, 2, 4]), // degree-0 node 4 must never win
                3,
                None,
                usize::MAX,
                &mut r,
            )
            .unwrap();
            assert_ne!(node, 4);
            if node == 1 {
                hub += 1;
            }
        }
        // weights: nodes 0 and 2 -> 1 each, node 1 -> 2
        let frac = hub as f64 / draws as f64;
        assert!((frac - 0.5).abs() < 0.04, "hub fraction {frac}");
    }

    #[test]
    fn pa_smallest_network_attaches_fully() {
        let cfg = GeneratorConfig::new(Model::Pa, 4, 2, 7);
        let g = generate_pa(&cfg, &mut rng(7)).unwrap();
        assert_eq!(g.degree(3), 2);
        assert_eq!(g.edge_count(), 3 + 2); // triangle + two new stubs
    }

    #[test]
    fn pa_respects_cutoff_and_min_degree() {
        let mut cfg = GeneratorConfig::new(Model::Pa, 600, 2, 21);
        cfg.hard_cutoff = Some(6);
        let g = generate_pa(&cfg, &mut rng(21)).unwrap();
        for u in 0..g.node_count() {
            assert!(g.degree(u) >= 2, "node {u} degree {}", g.degree(u));
            assert!(g.degree(u) <= 6, "node {u} degree {}", g.degree(u));
        }
        let (giant, _) = crate::graph::giant_component(&g);
        assert_eq!(giant, 600, "growth keeps the graph connected");
    }

    #[test]
    fn pa_is_deterministic_per_seed() {
        let cfg = GeneratorConfig::new(Model::Pa, 300, 2, 99);
        let a = generate_pa(&cfg, &mut rng(99)).unwrap();
        let b = generate_pa(&cfg, &mut rng(99)).unwrap();
        let c = generate_pa(&cfg, &mut rng(100)).unwrap();
        assert_eq!(edge_set(&a), edge_set(&b));
        assert_ne!(edge_set(&a), edge_set(&c));
    }

    #[test]
    fn pa_stalls_when_cutoff_starves_growth() {
        // m=2, k_c=3: nodes 3 and 4 can still join, node 5 finds only one
        // unsaturated target and must stall.
        let mut cfg = GeneratorConfig::new(Model::Pa, 6, 2, 5);
        cfg.hard_cutoff = Some(3);
        match generate_pa(&cfg, &mut rng(5)) {
            Err(GeneratorError::Stalled { node }) => assert_eq!(node, 5),
            other => panic!("expected stall at node 5, got {other:?}"),
        }
    }

    #[test]
    fn config_validation_rejects_bad_inputs() {
        let mut cfg = GeneratorConfig::new(Model::Pa, 10, 0, 1);
        assert!(cfg.validate().is_err());
        cfg.stubs = 3;
        cfg.hard_cutoff = Some(3);
        assert!(cfg.validate().is_err());
        cfg.hard_cutoff = Some(4);
        assert!(cfg.validate().is_ok());
        cfg.n_nodes = 4;
        assert!(cfg.validate().is_err(), "needs at least m + 2 nodes");

        let cm = GeneratorConfig::new(Model::Cm, 10, 1, 1);
        assert!(cm.validate().is_err(), "CM needs gamma_target");
    }

    #[test]
    fn degree_sequence_validation() {
        assert!(DegreeSequence::new(vec![1, 1], 1, 10).is_ok());
        assert!(DegreeSequence::new(vec![1, 1, 1], 1, 10).is_err()); // odd
        assert!(DegreeSequence::new(vec![1, 11], 1, 10).is_err()); // over cap
        assert!(DegreeSequence::new(vec![0, 2], 1, 10).is_err()); // under min
    }

    #[test]
    fn sampler_respects_bounds_parity_and_mean() {
        let mut r = rng(31);
        let (n, m, gamma, k_c) = (100_000, 1usize, 3.0, 1_000_000usize);
        let seq = sample_powerlaw_degree_sequence(n, m, gamma, k_c, &mut r).unwrap();
        assert_eq!(seq.len(), n);
        assert_eq!(seq.sum() % 2, 0);
        assert!(seq.as_slice().iter().all(|&k| k >= m && k <= k_c));
        // Analytic mean of the floored law: sum_k k * (k^-(g-1) - (k+1)^-(g-1)).
        let mut expected = 0.0f64;
        for k in m..2_000_000usize {
            let a = gamma - 1.0;
            let p = (m as f64).powf(a) * ((k as f64).powf(-a) - ((k + 1) as f64).powf(-a));
            expected += k as f64 * p;
        }
        let mean = seq.sum() as f64 / n as f64;
        assert!(
            (mean - expected).abs() / expected < 0.05,
            "sample mean {mean:.4} vs analytic {expected:.4}"
        );
    }

    #[test]
    fn sampler_rejects_cutoff_at_or_below_min() {
        let mut r = rng(32);
        assert!(sample_powerlaw_degree_sequence(10, 3, 2.5, 3, &mut r).is_err());
        assert!(sample_powerlaw_degree_sequence(10, 3, 2.5, 2, &mut r).is_err());
    }

    #[test]
    fn cm_two_ones_is_a_single_edge() {
        let seq = DegreeSequence::new(vec![1, 1], 1, 1).unwrap();
        let build = generate_cm(&seq, &mut rng(41));
        assert_eq!(build.graph.edge_count(), 1);
        assert!(build.graph.has_edge(0, 1));
        assert_eq!(build.self_loops_removed, 0);
        assert_eq!(build.multi_edges_removed, 0);
    }

    #[test]
    fn cm_reports_discarded_pairs() {
        // Two nodes of degree 2 must produce either a double edge (one
        // removal) or two self-loops, never a clean multigraph.
        let seq = DegreeSequence::new(vec![2, 2], 1, 2).unwrap();
        let build = generate_cm(&seq, &mut rng(42));
        assert_eq!(
            build.self_loops_removed + build.multi_edges_removed,
            2 - build.graph.edge_count()
        );
    }

    #[test]
    fn cm_realized_degrees_track_prescription() {
        // Discarded-pair counts are size-independent for a convergent-variance
        // law, so the sub-1% shortfall needs n large enough.
        let n = 10_000;
        let mut r = rng(43);
        let seq = sample_powerlaw_degree_sequence(n, 2, 2.6, 100, &mut r).unwrap();
        let build = generate_cm(&seq, &mut r);
        let below: usize = (0..n)
            .filter(|&u| build.graph.degree(u) < seq.as_slice()[u])
            .count();
        assert!(
            (below as f64) < 0.01 * n as f64,
            "{below} nodes fell below prescription"
        );
        // Degrees never exceed the prescription.
        assert!((0..n).all(|u| build.graph.degree(u) <= seq.as_slice()[u]));
    }

    #[test]
    fn hapa_respects_cutoff_and_places_all_stubs() {
        let mut cfg = GeneratorConfig::new(Model::Hapa, 800, 1, 55);
        cfg.hard_cutoff = Some(10);
        let g = generate_hapa(&cfg, &mut rng(55)).unwrap();
        assert!((0..800).all(|u| g.degree(u) >= 1));
        assert!((0..800).all(|u| g.degree(u) <= 10));
        let (giant, _) = crate::graph::giant_component(&g);
        assert_eq!(giant, 800);
    }

    #[test]
    fn hapa_without_cutoff_grows_a_dominant_hub() {
        let cfg = GeneratorConfig::new(Model::Hapa, 2_000, 1, 56);
        let g = generate_hapa(&cfg, &mut rng(56)).unwrap();
        let max_deg = (0..2_000).map(|u| g.degree(u)).max().unwrap();
        assert!(
            max_deg > 200,
            "expected a super-hub, largest degree was {max_deg}"
        );
    }

    #[test]
    fn hapa_is_deterministic_per_seed() {
        let cfg = GeneratorConfig::new(Model::Hapa, 400, 2, 57);
        let a = generate_hapa(&cfg, &mut rng(57)).unwrap();
        let b = generate_hapa(&cfg, &mut rng(57)).unwrap();
        assert_eq!(edge_set(&a), edge_set(&b));
    }

    #[test]
    fn grn_grid_matches_brute_force() {
        for (seed, radius, dims) in [(61u64, 0.09, 2usize), (62, 0.2, 2), (63, 0.3, 3), (64, 0.05, 1)]
        {
            let cfg = SubstrateConfig {
                n_substrate: 400,
                radius,
                dimensions: dims,
                kind: SubstrateKind::Grn,
                seed,
            };
            let (g, coords) = generate_grn(&cfg, &mut rng(seed)).unwrap();
            let mut expected = 0usize;
            for i in 0..400 {
                for j in (i + 1)..400 {
                    let (pi, pj) = (coords.get(i), coords.get(j));
                    let d2: f64 = (0..dims).map(|a| (pi[a] - pj[a]).powi(2)).sum();
                    let should = d2 < radius * radius;
                    assert_eq!(
                        g.has_edge(i, j),
                        should,
                        "pair ({i},{j}) radius {radius} dims {dims}"
                    );
                    if should {
                        expected += 1;
                    }
                }
            }
            assert_eq!(g.edge_count(), expected);
        }
    }

    #[test]
    fn grn_radius_beyond_box_diameter_is_complete() {
        let cfg = SubstrateConfig {
            n_substrate: 30,
            radius: 1.5, // > sqrt(2)
            dimensions: 2,
            kind: SubstrateKind::Grn,
            seed: 65,
        };
        let (g, _) = generate_grn(&cfg, &mut rng(65)).unwrap();
        assert_eq!(g.edge_count(), 30 * 29 / 2);
    }

    #[test]
    fn grn_mean_degree_tracks_density() {
        // E[k] ~ n * pi * R^2 up to boundary losses (<= ~5% here).
        let cfg = SubstrateConfig::grn(5_000, 0.03, 66);
        let (g, _) = generate_grn(&cfg, &mut rng(66)).unwrap();
        let mean = g.total_degree() as f64 / 5_000.0;
        let predicted = 5_000.0 * std::f64::consts::PI * 0.03 * 0.03;
        assert!(
            (mean - predicted).abs() / predicted < 0.08,
            "mean degree {mean:.2} vs predicted {predicted:.2}"
        );
    }

    #[test]
    fn mesh_counts_and_corner_degrees() {
        let g = generate_mesh2d(3, 3);
        assert_eq!(g.node_count(), 9);
        assert_eq!(g.edge_count(), 12);
        assert_eq!(g.degree(0), 2); // corner
        assert_eq!(g.degree(4), 4); // center
        assert_eq!(g.degree(1), 3); // edge midpoint
    }

    fn small_dapa_config(tau: usize, m: usize, seed: u64) -> GeneratorConfig {
        let mut cfg = GeneratorConfig::new(Model::Dapa, 300, m, seed);
        cfg.tau_sub = Some(tau);
        cfg.substrate = Some(SubstrateConfig::grn(800, 0.08, seed.wrapping_add(1)));
        cfg
    }

    #[test]
    fn dapa_builds_complete_overlay() {
        let cfg = small_dapa_config(4, 2, 71);
        let build = generate_dapa(&cfg, &mut rng(71)).unwrap();
        assert_eq!(build.overlay.node_count(), 300);
        assert_eq!(build.substrate_node_of.len(), 300);
        // substrate ids are distinct and in range
        let mut seen = vec![false; build.substrate.node_count()];
        for &s in &build.substrate_node_of {
            assert!(!seen[s]);
            seen[s] = true;
        }
        // every peer has at least one overlay edge
        assert!((0..300).all(|p| build.overlay.degree(p) >= 1));
    }

    #[test]
    fn dapa_honors_hard_cutoff() {
        let mut cfg = small_dapa_config(6, 2, 72);
        cfg.hard_cutoff = Some(5);
        let build = generate_dapa(&cfg, &mut rng(72)).unwrap();
        assert!((0..300).all(|p| build.overlay.degree(p) <= 5));
    }

    #[test]
    fn dapa_narrow_horizon_leaves_some_peers_under_m() {
        // With a tight horizon some joiners find fewer than m peers.
        let mut cfg = GeneratorConfig::new(Model::Dapa, 500, 3, 73);
        cfg.tau_sub = Some(1);
        cfg.substrate = Some(SubstrateConfig::grn(1_000, 0.07, 74));
        let build = generate_dapa(&cfg, &mut rng(73)).unwrap();
        let under: usize = (0..500)
            .filter(|&p| build.overlay.degree(p) < 3)
            .count();
        assert!(under > 0, "expected some peers below m stubs");
    }

    #[test]
    fn dapa_mesh_substrate_works() {
        let mut cfg = GeneratorConfig::new(Model::Dapa, 100, 1, 75);
        cfg.tau_sub = Some(3);
        cfg.substrate = Some(SubstrateConfig::mesh(400, 76));
        let build = generate_dapa(&cfg, &mut rng(75)).unwrap();
        assert_eq!(build.substrate.node_count(), 400);
        assert!(build.coordinates.is_none());
        assert_eq!(build.overlay.node_count(), 100);
    }

    #[test]
    fn dapa_is_deterministic_per_seed() {
        let cfg = small_dapa_config(4, 2, 77);
        let a = generate_dapa(&cfg, &mut rng(77)).unwrap();
        let b = generate_dapa(&cfg, &mut rng(77)).unwrap();
        assert_eq!(edge_set(&a.overlay), edge_set(&b.overlay));
        assert_eq!(a.substrate_node_of, b.substrate_node_of);
    }

    #[test]
    fn dapa_reports_exhaustion() {
        // Overlay demands every substrate node, but an isolated substrate
        // node can never discover a peer.
        let mut cfg = GeneratorConfig::new(Model::Dapa, 16, 1, 78);
        cfg.tau_sub = Some(2);
        // 4x4 mesh minus nothing is connected; use a GRN with a radius so
        // small that isolated nodes are almost certain.
        cfg.substrate = Some(SubstrateConfig::grn(16, 0.01, 79));
        match generate_dapa(&cfg, &mut rng(78)) {
            Err(GeneratorError::Exhausted { peers_joined, target }) => {
                assert!(peers_joined < target);
            }
            Ok(build) => {
                // Astronomically unlikely with radius 0.01, but if the GRN
                // happened to be connected the build is legitimate.
                assert_eq!(build.overlay.node_count(), 16);
            }
            Err(other) => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn dispatcher_is_deterministic_and_complete() {
        let mut cfg = GeneratorConfig::new(Model::Cm, 500, 1, 81);
        cfg.gamma_target = Some(2.6);
        cfg.hard_cutoff = Some(50);
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(edge_set(&a.graph), edge_set(&b.graph));
        assert_eq!(a.self_loops_removed, b.self_loops_removed);

        let mut dapa = small_dapa_config(4, 1, 82);
        dapa.model = Model::Dapa;
        let out = generate(&dapa).unwrap();
        let sub = out.substrate.expect("substrate artifacts");
        assert_eq!(sub.node_map.len(), 300);
        assert!(sub.coordinates.is_some());
    }

    #[test]
    fn peer_map_format() {
        let mut buf = Vec::new();
        write_peer_map(&[5, 9, 2], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0 5\n1 9\n2 2\n");
    }

    #[test]
    fn isqrt_edges() {
        assert_eq!(isqrt(0), 0);
        assert_eq!(isqrt(1), 1);
        assert_eq!(isqrt(3), 1);
        assert_eq!(isqrt(4), 2);
        assert_eq!(isqrt(24), 4);
        assert_eq!(isqrt(25), 5);
    }
}

