/*!
Blind-search primitives over an overlay graph and TTL-sweep measurement.

Three algorithms share one outcome type:

- flooding: every node first reached at hop `h < ttl` forwards to all
  neighbors except the one it heard from; the reached set is exactly the
  BFS ball of radius `ttl`.
- normalized flooding: like flooding, but each forwarder sends to at most
  `k_min` random distinct neighbors (the sender excluded), which caps the
  per-node fan-out on heavy-tailed topologies.
- random walk: a single walker takes exactly `ttl` uniform steps, never
  immediately backtracking except out of a dead end.

`messages` counts every transmission, including ones that land on nodes
that were already reached. `hits` counts distinct nodes reached, source
excluded. For budget-matched comparisons, `normalized_rw_budget` converts
a flood outcome into the step allowance for a walker.
*/

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::derive_seed;
use crate::graph::{BfsScratch, Graph};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchAlgorithm {
    Flooding,
    NormalizedFlooding,
    RandomWalk,
}

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub algorithm: SearchAlgorithm,
    pub source: usize,
    pub ttl: usize,
    /// Fan-out cap for normalized flooding; ignored by the others.
    pub k_min: Option<usize>,
    pub seed: u64,
    /// Optional lookup target. Reaching it sets `delivery_hops`; the walker
    /// additionally stops early.
    pub target: Option<usize>,
}

impl SearchConfig {
    pub fn new(algorithm: SearchAlgorithm, source: usize, ttl: usize, seed: u64) -> Self {
        SearchConfig {
            algorithm,
            source,
            ttl,
            k_min: None,
            seed,
            target: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchOutcome {
    /// Distinct nodes reached, source excluded.
    pub hits: usize,
    /// Total transmissions, duplicates included.
    pub messages: usize,
    pub ttl_used: usize,
    pub source: usize,
    /// Hop (flooding) or step (walk) count at first contact with the target.
    pub delivery_hops: Option<usize>,
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("source {node} out of range for {n} nodes")]
    SourceOutOfRange { node: usize, n: usize },
    #[error("target {target} out of range for {n} nodes")]
    TargetOutOfRange { target: usize, n: usize },
    #[error("ttl must be >= 1")]
    ZeroTtl,
    #[error("normalized flooding needs k_min >= 1")]
    MissingKMin,
    #[error("random walk cannot leave isolated source {node}")]
    IsolatedSource { node: usize },
}

fn check_common(g: &Graph, cfg: &SearchConfig) -> Result<(), SearchError> {
    let n = g.node_count();
    if cfg.source >= n {
        return Err(SearchError::SourceOutOfRange {
            node: cfg.source,
            n,
        });
    }
    if let Some(t) = cfg.target {
        if t >= n {
            return Err(SearchError::TargetOutOfRange { target: t, n });
        }
    }
    if cfg.ttl == 0 {
        return Err(SearchError::ZeroTtl);
    }
    Ok(())
}

/// Plain TTL-limited flooding. Deterministic: reaches the BFS ball of
/// radius `ttl` around the source; messages are `deg(source)` plus
/// `deg(v) - 1` for every node v strictly inside the ball's last shell.
pub fn flood_search(g: &Graph, cfg: &SearchConfig) -> Result<SearchOutcome, SearchError> {
    check_common(g, cfg)?;
    let mut scratch = BfsScratch::new();
    scratch.run(g, cfg.source, Some(cfg.ttl));
    let mut hits = 0usize;
    let mut messages = g.degree(cfg.source);
    for v in 0..g.node_count() {
        if let Some(d) = scratch.dist(v) {
            if d == 0 {
                continue;
            }
            hits += 1;
            if d < cfg.ttl {
                messages += g.degree(v) - 1;
            }
        }
    }
    let delivery_hops = cfg.target.and_then(|t| scratch.dist(t));
    Ok(SearchOutcome {
        hits,
        messages,
        ttl_used: cfg.ttl,
        source: cfg.source,
        delivery_hops,
    })
}

/// Per-level record of a normalized flood, enough to reconstruct the
/// outcome at any ttl up to the simulated horizon.
struct FloodTrace {
    /// nodes first reached at each hop; index 0 is the source alone.
    reached_per_level: Vec<usize>,
    /// transmissions sent by the nodes of each level.
    sent_per_level: Vec<usize>,
    /// level at which the target was first reached, if ever.
    target_level: Option<usize>,
}

impl FloodTrace {
    fn hits_at(&self, ttl: usize) -> usize {
        self.reached_per_level
            .iter()
            .take(ttl + 1)
            .skip(1)
            .sum()
    }

    fn messages_at(&self, ttl: usize) -> usize {
        self.sent_per_level.iter().take(ttl).sum()
    }
}

/// Level-synchronous normalized flood out to `ttl` hops. Every node
/// forwards at most `k_min` messages, chosen uniformly among its neighbors
/// minus the one it first heard from; nodes whose remaining neighbor count
/// is within the cap forward to all of them.
fn run_normalized_flood<R: Rng>(
    g: &Graph,
    source: usize,
    ttl: usize,
    k_min: usize,
    target: Option<usize>,
    rng: &mut R,
) -> FloodTrace {
    let n = g.node_count();
    let mut parent: Vec<usize> = vec![usize::MAX; n];
    let mut level_of: Vec<u32> = vec![u32::MAX; n];
    level_of[source] = 0;
    let mut frontier = vec![source];
    let mut next = Vec::new();
    let mut reached_per_level = vec![1usize];
    let mut sent_per_level = Vec::new();
    let mut target_level = if target == Some(source) { Some(0) } else { None };
    let mut pick_buf: Vec<usize> = Vec::new();

    for level in 0..ttl {
        if frontier.is_empty() {
            break;
        }
        let mut sent = 0usize;
        for &v in &frontier {
            pick_buf.clear();
            pick_buf.extend(
                g.neighbors(v)
                    .iter()
                    .copied()
                    .filter(|&u| u != parent[v]),
            );
            let fan_out = pick_buf.len().min(k_min);
            // partial Fisher-Yates: the first fan_out slots become the
            // uniformly chosen recipients
            for slot in 0..fan_out {
                let j = rng.gen_range(slot..pick_buf.len());
                pick_buf.swap(slot, j);
                let u = pick_buf[slot];
                sent += 1;
                if level_of[u] == u32::MAX {
                    level_of[u] = level as u32 + 1;
                    parent[u] = v;
                    next.push(u);
                    if target == Some(u) && target_level.is_none() {
                        target_level = Some(level + 1);
                    }
                }
            }
        }
        sent_per_level.push(sent);
        reached_per_level.push(next.len());
        frontier.clear();
        std::mem::swap(&mut frontier, &mut next);
    }
    FloodTrace {
        reached_per_level,
        sent_per_level,
        target_level,
    }
}

/// Normalized flooding with fan-out cap `cfg.k_min`.
pub fn normalized_flood_search(g: &Graph, cfg: &SearchConfig) -> Result<SearchOutcome, SearchError> {
    check_common(g, cfg)?;
    let k_min = match cfg.k_min {
        Some(k) if k >= 1 => k,
        _ => return Err(SearchError::MissingKMin),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let trace = run_normalized_flood(g, cfg.source, cfg.ttl, k_min, cfg.target, &mut rng);
    Ok(SearchOutcome {
        hits: trace.hits_at(cfg.ttl),
        messages: trace.messages_at(cfg.ttl),
        ttl_used: cfg.ttl,
        source: cfg.source,
        delivery_hops: trace.target_level,
    })
}

/// Distinct-hit counts after each step of one walk, for prefix reuse.
struct WalkTrace {
    /// hits_after[t] = distinct non-source nodes visited within t steps;
    /// hits_after[0] = 0.
    hits_after: Vec<usize>,
    target_step: Option<usize>,
    steps_taken: usize,
}

/// One random walk of up to `max_steps` steps (fewer only when the target
/// is hit or the source is isolated). Never revisits the node it just came
/// from unless that is the only neighbor.
fn run_walk<R: Rng>(
    g: &Graph,
    source: usize,
    max_steps: usize,
    target: Option<usize>,
    stop_at_target: bool,
    rng: &mut R,
) -> WalkTrace {
    let mut visited = vec![false; g.node_count()];
    visited[source] = true;
    let mut hits_after = Vec::with_capacity(max_steps + 1);
    hits_after.push(0usize);
    let mut hits = 0usize;
    let mut target_step = if target == Some(source) { Some(0) } else { None };
    let mut cur = source;
    let mut prev: Option<usize> = None;
    let mut steps_taken = 0;
    for step in 1..=max_steps {
        let nbrs = g.neighbors(cur);
        if nbrs.is_empty() {
            break;
        }
        let nxt = match prev {
            Some(p) if nbrs.len() > 1 => {
                let pos = nbrs.binary_search(&p).expect("prev is adjacent");
                let r = rng.gen_range(0..nbrs.len() - 1);
                nbrs[if r >= pos { r + 1 } else { r }]
            }
            Some(_) => nbrs[0], // dead end: the walk backtracks
            None => nbrs[rng.gen_range(0..nbrs.len())],
        };
        prev = Some(cur);
        cur = nxt;
        steps_taken = step;
        if !visited[cur] {
            visited[cur] = true;
            hits += 1;
        }
        hits_after.push(hits);
        if target == Some(cur) && target_step.is_none() {
            target_step = Some(step);
            if stop_at_target {
                break;
            }
        }
    }
    WalkTrace {
        hits_after,
        target_step,
        steps_taken,
    }
}

/// Single random walk of `cfg.ttl` steps. Messages equal steps taken; the
/// walk stops early only on reaching `cfg.target`.
pub fn random_walk_search(g: &Graph, cfg: &SearchConfig) -> Result<SearchOutcome, SearchError> {
    check_common(g, cfg)?;
    if g.degree(cfg.source) == 0 {
        return Err(SearchError::IsolatedSource { node: cfg.source });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let trace = run_walk(g, cfg.source, cfg.ttl, cfg.target, true, &mut rng);
    Ok(SearchOutcome {
        hits: *trace.hits_after.last().unwrap(),
        messages: trace.steps_taken,
        ttl_used: cfg.ttl,
        source: cfg.source,
        delivery_hops: trace.target_step,
    })
}

/// Step allowance for a walker budget-matched against a flood: one step
/// per message the flood spent.
pub fn normalized_rw_budget(flood: &SearchOutcome) -> usize {
    flood.messages
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveAlgorithm {
    Flooding,
    NormalizedFlooding,
    RandomWalk,
    /// Random walk whose step budget at each ttl equals the messages a
    /// normalized flood from the same source spends at that ttl.
    BudgetedWalk,
}

#[derive(Clone, Debug)]
pub struct CurvePoint {
    pub ttl: usize,
    pub mean_hits: f64,
    pub stderr_hits: f64,
    pub mean_messages: f64,
    pub stderr_messages: f64,
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

const TAG_FLOOD: u64 = 1;
const TAG_WALK: u64 = 2;

/// Per-source RNG stream: independent of source order, stable across runs.
fn source_seed(seed: u64, source: usize, tag: u64) -> u64 {
    derive_seed(seed, &[source as u64, tag])
}

/// Measures hits and messages as a function of ttl, averaged over
/// `n_sources` distinct random sources (all nodes when the graph is
/// smaller). One simulation at the largest ttl serves every smaller ttl:
/// level-synchronous floods and fixed-stream walks consume randomness in
/// level/step order, so truncating the trace reproduces the shorter run
/// exactly. Isolated sources contribute zero rows rather than errors.
pub fn measure_search_curve(
    g: &Graph,
    algorithm: CurveAlgorithm,
    ttls: &[usize],
    n_sources: usize,
    k_min: Option<usize>,
    seed: u64,
) -> Result<Vec<CurvePoint>, SearchError> {
    if ttls.is_empty() || n_sources == 0 {
        return Ok(Vec::new());
    }
    if ttls.iter().any(|&t| t == 0) {
        return Err(SearchError::ZeroTtl);
    }
    let needs_kmin = matches!(
        algorithm,
        CurveAlgorithm::NormalizedFlooding | CurveAlgorithm::BudgetedWalk
    );
    let k_min = match (needs_kmin, k_min) {
        (true, Some(k)) if k >= 1 => k,
        (true, _) => return Err(SearchError::MissingKMin),
        (false, _) => 0,
    };
    let ttl_max = *ttls.iter().max().unwrap();
    let n = g.node_count();

    // distinct random sources via partial Fisher-Yates
    let mut ids: Vec<usize> = (0..n).collect();
    let mut src_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
    let take = n_sources.min(n);
    for i in 0..take {
        let j = src_rng.gen_range(i..n);
        ids.swap(i, j);
    }
    let sources = &ids[..take];

    let mut hits_by_ttl: Vec<Vec<f64>> = vec![Vec::with_capacity(take); ttls.len()];
    let mut msgs_by_ttl: Vec<Vec<f64>> = vec![Vec::with_capacity(take); ttls.len()];
    let mut scratch = BfsScratch::new();

    for &s in sources {
        match algorithm {
            CurveAlgorithm::Flooding => {
                scratch.run(g, s, Some(ttl_max));
                // per-shell node counts and degree sums
                let mut cnt = vec![0usize; ttl_max + 1];
                let mut degsum = vec![0usize; ttl_max + 1];
                for v in 0..n {
                    if let Some(d) = scratch.dist(v) {
                        cnt[d] += 1;
                        degsum[d] += g.degree(v);
                    }
                }
                for (i, &ttl) in ttls.iter().enumerate() {
                    let hits: usize = cnt[1..=ttl].iter().sum();
                    let mut messages = if g.degree(s) > 0 { g.degree(s) } else { 0 };
                    for h in 1..ttl {
                        messages += degsum[h] - cnt[h];
                    }
                    hits_by_ttl[i].push(hits as f64);
                    msgs_by_ttl[i].push(messages as f64);
                }
            }
            CurveAlgorithm::NormalizedFlooding => {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(source_seed(seed, s, TAG_FLOOD));
                let trace = run_normalized_flood(g, s, ttl_max, k_min, None, &mut rng);
                for (i, &ttl) in ttls.iter().enumerate() {
                    hits_by_ttl[i].push(trace.hits_at(ttl) as f64);
                    msgs_by_ttl[i].push(trace.messages_at(ttl) as f64);
                }
            }
            CurveAlgorithm::RandomWalk => {
                let mut rng = ChaCha8Rng::seed_from_u64(source_seed(seed, s, TAG_WALK));
                let trace = run_walk(g, s, ttl_max, None, false, &mut rng);
                for (i, &ttl) in ttls.iter().enumerate() {
                    let steps = ttl.min(trace.steps_taken);
                    hits_by_ttl[i].push(trace.hits_after[steps] as f64);
                    msgs_by_ttl[i].push(steps as f64);
                }
            }
            CurveAlgorithm::BudgetedWalk => {
                let mut flood_rng =
                    ChaCha8Rng::seed_from_u64(source_seed(seed, s, TAG_FLOOD));
                let trace = run_normalized_flood(g, s, ttl_max, k_min, None, &mut flood_rng);
                let budget_max = trace.messages_at(ttl_max);
                let mut walk_rng =
                    ChaCha8Rng::seed_from_u64(source_seed(seed, s, TAG_WALK));
                let walk = run_walk(g, s, budget_max, None, false, &mut walk_rng);
                for (i, &ttl) in ttls.iter().enumerate() {
                    let budget = trace.messages_at(ttl);
                    let steps = budget.min(walk.steps_taken);
                    hits_by_ttl[i].push(walk.hits_after[steps] as f64);
                    msgs_by_ttl[i].push(steps as f64);
                }
            }
        }
    }

    Ok(ttls
        .iter()
        .enumerate()
        .map(|(i, &ttl)| {
            let (mean_hits, stderr_hits) = mean_stderr(&hits_by_ttl[i]);
            let (mean_messages, stderr_messages) = mean_stderr(&msgs_by_ttl[i]);
            CurvePoint {
                ttl,
                mean_hits,
                stderr_hits,
                mean_messages,
                stderr_messages,
            }
        })
        .collect())
}
