/*!
Undirected simple graphs over dense integer node ids `0..n`.

Adjacency is kept as a sorted vector per node, which gives O(log k)
membership tests (generators probe membership constantly while rejection
sampling) and a deterministic neighbor order for seeded random walks.
Node count is fixed at construction; generators pre-declare it.
*/

use std::collections::VecDeque;
use std::io::{self, BufRead, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("node {node} out of range for graph of {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

#[derive(Clone, Debug)]
pub struct Graph {
    /// Sorted neighbor list per node.
    adjacency: Vec<Vec<usize>>,
    /// degrees[u] == adjacency[u].len(), kept separately so hot loops can
    /// index a flat array.
    degrees: Vec<u32>,
    /// Sum of all degrees (2x edge count).
    total_degree: usize,
}

impl Graph {
    pub fn new(n_nodes: usize) -> Self {
        Graph {
            adjacency: vec![Vec::new(); n_nodes],
            degrees: vec![0; n_nodes],
            total_degree: 0,
        }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.total_degree / 2
    }

    pub fn total_degree(&self) -> usize {
        self.total_degree
    }

    pub fn degree(&self, u: usize) -> usize {
        self.degrees[u] as usize
    }

    /// Flat degree array, indexed by node id.
    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    /// Neighbors of `u` in ascending order.
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adjacency[u]
    }

    /// True iff the edge `{u, v}` exists. Out-of-range ids are simply absent.
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        let n = self.adjacency.len();
        if u >= n || v >= n || u == v {
            return false;
        }
        // Probe the shorter list.
        let (a, b) = if self.degrees[u] <= self.degrees[v] {
            (u, v)
        } else {
            (v, u)
        };
        self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Inserts the undirected edge `{u, v}`.
    ///
    /// Returns `Ok(true)` if the edge was added, `Ok(false)` if it was a
    /// self-loop or already present (the graph is left unchanged), and an
    /// error if either id is out of range.
    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<bool, GraphError> {
        let n = self.adjacency.len();
        if u >= n {
            return Err(GraphError::NodeOutOfRange { node: u, n });
        }
        if v >= n {
            return Err(GraphError::NodeOutOfRange { node: v, n });
        }
        if u == v {
            return Ok(false);
        }
        let (a, b) = if self.degrees[u] <= self.degrees[v] {
            (u, v)
        } else {
            (v, u)
        };
        match self.adjacency[a].binary_search(&b) {
            Ok(_) => Ok(false),
            Err(pos) => {
                self.adjacency[a].insert(pos, b);
                let pos_b = self.adjacency[b]
                    .binary_search(&a)
                    .expect_err("asymmetric adjacency");
                self.adjacency[b].insert(pos_b, a);
                self.degrees[a] += 1;
                self.degrees[b] += 1;
                self.total_degree += 2;
                Ok(true)
            }
        }
    }

    /// Exact hop distances from `source` to every node.
    pub fn bfs_distances(&self, source: usize) -> Result<DistanceMap, GraphError> {
        let n = self.adjacency.len();
        if source >= n {
            return Err(GraphError::NodeOutOfRange { node: source, n });
        }
        let mut dist: Vec<Option<u32>> = vec![None; n];
        dist[source] = Some(0);
        let mut queue = VecDeque::new();
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].expect("queued node has a distance");
            for &v in &self.adjacency[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        Ok(DistanceMap { source, dist })
    }
}

/// BFS result: hop counts from a single source. Unreachable nodes carry an
/// explicit `None`, never a sentinel value.
#[derive(Clone, Debug)]
pub struct DistanceMap {
    pub source: usize,
    dist: Vec<Option<u32>>,
}

impl DistanceMap {
    pub fn get(&self, v: usize) -> Option<usize> {
        self.dist.get(v).copied().flatten().map(|d| d as usize)
    }

    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }

    /// Number of nodes with a distance (the source's component size).
    pub fn reachable_count(&self) -> usize {
        self.dist.iter().filter(|d| d.is_some()).count()
    }
}

/// Reusable bounded-BFS workspace.
///
/// Distance arrays are epoch-stamped instead of cleared, so tight loops
/// (e.g. one BFS per joining candidate during overlay construction) avoid
/// an O(n) reset per run.
#[derive(Debug, Default)]
pub struct BfsScratch {
    stamp: Vec<u32>,
    dist: Vec<u32>,
    epoch: u32,
    queue: VecDeque<usize>,
}

impl BfsScratch {
    pub fn new() -> Self {
        Self::default()
    }

    /// Runs BFS from `source`, stopping at `max_hops` when given.
    /// Panics if `source` is out of range (internal callers validate).
    pub fn run(&mut self, g: &Graph, source: usize, max_hops: Option<usize>) {
        let n = g.node_count();
        assert!(source < n, "bfs source out of range");
        if self.stamp.len() < n {
            self.stamp.resize(n, 0);
            self.dist.resize(n, 0);
        }
        if self.epoch == u32::MAX {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 0;
        }
        self.epoch += 1;
        let epoch = self.epoch;
        let limit = max_hops.map(|h| h as u32).unwrap_or(u32::MAX);
        self.queue.clear();
        self.stamp[source] = epoch;
        self.dist[source] = 0;
        self.queue.push_back(source);
        while let Some(u) = self.queue.pop_front() {
            let du = self.dist[u];
            if du >= limit {
                continue;
            }
            for &v in g.neighbors(u) {
                if self.stamp[v] != epoch {
                    self.stamp[v] = epoch;
                    self.dist[v] = du + 1;
                    self.queue.push_back(v);
                }
            }
        }
    }

    /// Distance recorded by the most recent `run`, if `v` was reached.
    pub fn dist(&self, v: usize) -> Option<usize> {
        if v < self.stamp.len() && self.stamp[v] == self.epoch {
            Some(self.dist[v] as usize)
        } else {
            None
        }
    }
}

/// Size of the largest connected component and a membership mask for it.
/// Ties go to the component containing the lowest node id.
pub fn giant_component(g: &Graph) -> (usize, Vec<bool>) {
    let n = g.node_count();
    let mut comp: Vec<Option<u32>> = vec![None; n];
    let mut queue = VecDeque::new();
    let mut best: (usize, u32) = (0, 0); // (size, component id)
    let mut next_id: u32 = 0;
    for root in 0..n {
        if comp[root].is_some() {
            continue;
        }
        let id = next_id;
        next_id += 1;
        comp[root] = Some(id);
        queue.push_back(root);
        let mut size = 0usize;
        while let Some(u) = queue.pop_front() {
            size += 1;
            for &v in g.neighbors(u) {
                if comp[v].is_none() {
                    comp[v] = Some(id);
                    queue.push_back(v);
                }
            }
        }
        // Strict: on equal size keep the earlier (lower-min-id) component.
        if size > best.0 {
            best = (size, id);
        }
    }
    let mask: Vec<bool> = comp.iter().map(|c| *c == Some(best.1)).collect();
    (best.0, mask)
}

/// Mean shortest-path length estimated from full BFS out of
/// `sample_sources` distinct sources chosen uniformly (all sources when
/// `sample_sources >= n`). Averages hop counts over all (source, reachable
/// target) pairs, excluding the trivial zero self-distance.
pub fn approx_avg_shortest_path(
    g: &Graph,
    sample_sources: usize,
    seed: u64,
) -> Result<f64, GraphError> {
    let n = g.node_count();
    if n == 0 || g.edge_count() == 0 {
        return Err(GraphError::Degenerate("graph has no edges".into()));
    }
    let sources: Vec<usize> = if sample_sources >= n {
        (0..n).collect()
    } else {
        // Partial Fisher-Yates: first `sample_sources` entries are a
        // uniform sample without replacement.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ids: Vec<usize> = (0..n).collect();
        for i in 0..sample_sources {
            let j = rng.gen_range(i..n);
            ids.swap(i, j);
        }
        ids.truncate(sample_sources);
        ids
    };
    let mut scratch = BfsScratch::new();
    let mut sum = 0u64;
    let mut pairs = 0u64;
    for &s in &sources {
        scratch.run(g, s, None);
        for v in 0..n {
            if v == s {
                continue;
            }
            if let Some(d) = scratch.dist(v) {
                sum += d as u64;
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        return Err(GraphError::Degenerate(
            "no reachable pairs from sampled sources".into(),
        ));
    }
    Ok(sum as f64 / pairs as f64)
}

#[derive(Debug, Error)]
pub enum EdgeListError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Writes one `u v` pair per line (each undirected edge once, ascending),
/// preceded by a `# nodes N` comment so isolated trailing nodes survive a
/// round trip.
pub fn write_edge_list<W: Write>(g: &Graph, mut w: W) -> io::Result<()> {
    writeln!(w, "# nodes {}", g.node_count())?;
    for u in 0..g.node_count() {
        for &v in g.neighbors(u) {
            if u < v {
                writeln!(w, "{} {}", u, v)?;
            }
        }
    }
    Ok(())
}

/// Reads the format produced by [`write_edge_list`]. Lines starting with
/// `#` are comments; a `# nodes N` comment fixes the node count, otherwise
/// it is inferred as max id + 1. Duplicate edges and self-loops are
/// tolerated and collapse silently.
pub fn read_edge_list<R: BufRead>(r: R) -> Result<Graph, EdgeListError> {
    let mut declared: Option<usize> = None;
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut max_id: usize = 0;
    let mut seen_any = false;
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(count) = rest.strip_prefix("nodes ") {
                declared = Some(count.trim().parse().map_err(|_| EdgeListError::Parse {
                    line: line_no,
                    msg: format!("bad node count '{}'", count.trim()),
                })?);
            }
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let (a, b) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(EdgeListError::Parse {
                    line: line_no,
                    msg: format!("expected 'u v', got '{}'", trimmed),
                })
            }
        };
        let u: usize = a.parse().map_err(|_| EdgeListError::Parse {
            line: line_no,
            msg: format!("bad node id '{}'", a),
        })?;
        let v: usize = b.parse().map_err(|_| EdgeListError::Parse {
            line: line_no,
            msg: format!("bad node id '{}'", b),
        })?;
        max_id = max_id.max(u).max(v);
        seen_any = true;
        edges.push((u, v));
    }
    let n = declared.unwrap_or(if seen_any { max_id + 1 } else { 0 });
    let mut g = Graph::new(n);
    for (line_no, (u, v)) in edges.into_iter().enumerate() {
        g.add_edge(u, v).map_err(|e| EdgeListError::Parse {
            line: line_no + 1,
            msg: e.to_string(),
        })?;
    }
    Ok(g)
}
