/*!
Experiment orchestration: a flat `key=value` spec format, deterministic
ensemble execution over a sweep grid, and CSV/JSON emission.

A spec document is whitespace-separated `key=value` tokens with `#`
comments. List-valued keys (`n_nodes`, `m`, `cutoffs`, `gamma_target`,
`tau_sub`) sweep the cross product in that nesting order. Every
(sweep point, realization) pair derives its seed purely from
(master seed, sweep index, realization index), so reruns of the same spec
are byte-identical.

Per sweep point the harness emits into `<out>/<label>/` (labels like
`pa_n10000_m2_kc10`): `histogram.csv`, `logbinned.csv`, `fit.json`, one
`search_<algo>.csv` per requested algorithm, optionally
`realizations.csv`, or `error.txt` when that point failed. A top-level
`manifest.txt` echoes the spec verbatim and lists every emitted file.
*/

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{
    classify_distribution, cutoff_spike_fraction, default_fit_range, fit_powerlaw_exponent,
    log_bin_histogram, write_logbinned_csv, DegreeHistogram, DistributionClass, ExponentFit,
    FitMethod, SpikeReport,
};
use crate::derive_seed;
use crate::generators::{
    generate, GeneratorConfig, Model, SubstrateConfig, SubstrateKind,
};
use crate::graph::giant_component;
use crate::search::{measure_search_curve, CurveAlgorithm, CurvePoint};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("spec error: {0}")]
    Spec(String),
    #[error("output directory {0} is not empty (pass --overwrite to reuse it)")]
    DirNotEmpty(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Parsed and validated experiment description.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub model: Model,
    pub n_nodes: Vec<usize>,
    pub m: Vec<usize>,
    pub cutoffs: Vec<Option<usize>>,
    pub gamma_targets: Vec<f64>,
    pub tau_subs: Vec<usize>,
    pub substrate_n: Option<usize>,
    pub substrate_radius: Option<f64>,
    pub substrate_kind: SubstrateKind,
    pub realizations: usize,
    pub n_sources: usize,
    pub ttls: Vec<usize>,
    pub search: Vec<CurveAlgorithm>,
    pub k_min: Option<usize>,
    pub bins_per_decade: usize,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    /// original document, echoed into the manifest
    pub raw_text: String,
}

/// One cell of the sweep grid.
#[derive(Clone, Debug, Serialize)]
pub struct PointParams {
    pub model: Model,
    pub n_nodes: usize,
    pub m: usize,
    pub hard_cutoff: Option<usize>,
    pub gamma_target: Option<f64>,
    pub tau_sub: Option<usize>,
}

impl PointParams {
    /// Directory-safe label, e.g. `cm_n10000_m2_kc40_g2.6`.
    pub fn label(&self) -> String {
        let mut s = format!(
            "{}_n{}_m{}",
            model_token(self.model),
            self.n_nodes,
            self.m
        );
        match self.hard_cutoff {
            Some(kc) => write!(s, "_kc{}", kc).unwrap(),
            None => s.push_str("_kcnone"),
        }
        if let Some(g) = self.gamma_target {
            write!(s, "_g{}", g).unwrap();
        }
        if let Some(t) = self.tau_sub {
            write!(s, "_tau{}", t).unwrap();
        }
        s
    }

    /// Generator configuration for this point; substrate parameters come
    /// from the spec, the substrate seed is derived from `seed`.
    pub fn to_config(&self, spec: &ExperimentSpec, seed: u64) -> GeneratorConfig {
        let mut cfg = GeneratorConfig::new(self.model, self.n_nodes, self.m, seed);
        cfg.hard_cutoff = self.hard_cutoff;
        cfg.gamma_target = self.gamma_target;
        cfg.tau_sub = self.tau_sub;
        if self.model == Model::Dapa {
            let n_sub = spec.substrate_n.unwrap_or(0);
            let substrate_seed = derive_seed(seed, &[3]);
            cfg.substrate = Some(match spec.substrate_kind {
                SubstrateKind::Grn => SubstrateConfig::grn(
                    n_sub,
                    spec.substrate_radius.unwrap_or(0.0),
                    substrate_seed,
                ),
                SubstrateKind::Mesh => SubstrateConfig::mesh(n_sub, substrate_seed),
            });
        }
        cfg
    }
}

fn model_token(m: Model) -> &'static str {
    match m {
        Model::Pa => "pa",
        Model::Cm => "cm",
        Model::Hapa => "hapa",
        Model::Dapa => "dapa",
    }
}

fn curve_token(a: CurveAlgorithm) -> &'static str {
    match a {
        CurveAlgorithm::Flooding => "fl",
        CurveAlgorithm::NormalizedFlooding => "nf",
        CurveAlgorithm::RandomWalk => "rw",
        CurveAlgorithm::BudgetedWalk => "rw_budget",
    }
}

fn spec_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Spec(msg.into())
}

fn parse_list<T, F>(key: &str, value: &str, f: F) -> Result<Vec<T>, HarnessError>
where
    F: Fn(&str) -> Result<T, HarnessError>,
{
    let items: Result<Vec<T>, _> = value.split(',').map(|v| f(v.trim())).collect();
    let items = items?;
    if items.is_empty() {
        return Err(spec_err(format!("key `{key}` has an empty list")));
    }
    Ok(items)
}

fn parse_usize(key: &str, v: &str) -> Result<usize, HarnessError> {
    v.parse()
        .map_err(|_| spec_err(format!("key `{key}`: `{v}` is not a non-negative integer")))
}

fn parse_f64(key: &str, v: &str) -> Result<f64, HarnessError> {
    v.parse()
        .map_err(|_| spec_err(format!("key `{key}`: `{v}` is not a number")))
}

/// Parses a ttl list such as `1-10` or `2,4,8-12`: comma-separated items,
/// each a positive integer or an inclusive `a-b` range.
pub fn parse_ttl_list(s: &str) -> Result<Vec<usize>, HarnessError> {
    let mut all = Vec::new();
    for item in parse_list("ttls", s, parse_ttl_item)? {
        all.extend(item);
    }
    Ok(all)
}

/// `a-b` expands to the inclusive integer range; plain integers pass through.
fn parse_ttl_item(v: &str) -> Result<Vec<usize>, HarnessError> {
    if let Some((a, b)) = v.split_once('-') {
        let lo = parse_usize("ttls", a)?;
        let hi = parse_usize("ttls", b)?;
        if lo == 0 || hi < lo {
            return Err(spec_err(format!("key `ttls`: bad range `{v}`")));
        }
        Ok((lo..=hi).collect())
    } else {
        let t = parse_usize("ttls", v)?;
        if t == 0 {
            return Err(spec_err("key `ttls`: ttl values must be >= 1"));
        }
        Ok(vec![t])
    }
}

/// Parses a spec document; defaults are applied, unknown keys rejected, and
/// every sweep point is constraint-checked before anything runs.
pub fn parse_spec(text: &str) -> Result<ExperimentSpec, HarnessError> {
    let mut model: Option<Model> = None;
    let mut n_nodes: Option<Vec<usize>> = None;
    let mut m: Option<Vec<usize>> = None;
    let mut cutoffs: Vec<Option<usize>> = vec![None];
    let mut gamma_targets: Vec<f64> = Vec::new();
    let mut tau_subs: Vec<usize> = Vec::new();
    let mut substrate_n = None;
    let mut substrate_radius = None;
    let mut substrate_kind = SubstrateKind::Grn;
    let mut realizations = 10usize;
    let mut n_sources = 100usize;
    let mut ttls: Vec<usize> = (1..=10).collect();
    let mut search: Vec<CurveAlgorithm> = Vec::new();
    let mut k_min: Option<usize> = None;
    let mut bins_per_decade = 10usize;
    let mut seed = 0u64;
    let mut output_dir: Option<PathBuf> = None;
    let mut seen = BTreeSet::new();

    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for token in line.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| spec_err(format!("token `{token}` is not key=value")))?;
            if !seen.insert(key.to_string()) {
                return Err(spec_err(format!("duplicate key `{key}`")));
            }
            match key {
                "model" => {
                    model = Some(match value.to_ascii_lowercase().as_str() {
                        "pa" => Model::Pa,
                        "cm" => Model::Cm,
                        "hapa" => Model::Hapa,
                        "dapa" => Model::Dapa,
                        other => {
                            return Err(spec_err(format!(
                                "key `model`: unknown model `{other}` (pa, cm, hapa, dapa)"
                            )))
                        }
                    });
                }
                "n_nodes" => n_nodes = Some(parse_list(key, value, |v| parse_usize(key, v))?),
                "m" => m = Some(parse_list(key, value, |v| parse_usize(key, v))?),
                "cutoffs" => {
                    cutoffs = parse_list(key, value, |v| {
                        if v.eq_ignore_ascii_case("none") {
                            Ok(None)
                        } else {
                            parse_usize(key, v).map(Some)
                        }
                    })?;
                }
                "gamma_target" => {
                    gamma_targets = parse_list(key, value, |v| parse_f64(key, v))?;
                }
                "tau_sub" => tau_subs = parse_list(key, value, |v| parse_usize(key, v))?,
                "substrate_n" => substrate_n = Some(parse_usize(key, value)?),
                "substrate_radius" => substrate_radius = Some(parse_f64(key, value)?),
                "substrate_kind" => {
                    substrate_kind = match value.to_ascii_lowercase().as_str() {
                        "grn" => SubstrateKind::Grn,
                        "mesh" => SubstrateKind::Mesh,
                        other => {
                            return Err(spec_err(format!(
                                "key `substrate_kind`: unknown kind `{other}` (grn, mesh)"
                            )))
                        }
                    };
                }
                "realizations" => realizations = parse_usize(key, value)?,
                "n_sources" => n_sources = parse_usize(key, value)?,
                "ttls" => ttls = parse_ttl_list(value)?,
                "search" => {
                    search = parse_list(key, value, |v| {
                        Ok(match v.to_ascii_lowercase().as_str() {
                            "fl" => CurveAlgorithm::Flooding,
                            "nf" => CurveAlgorithm::NormalizedFlooding,
                            "rw" => CurveAlgorithm::RandomWalk,
                            "rw_budget" => CurveAlgorithm::BudgetedWalk,
                            other => {
                                return Err(spec_err(format!(
                                    "key `search`: unknown algorithm `{other}` (fl, nf, rw, rw_budget)"
                                )))
                            }
                        })
                    })?;
                }
                "k_min" => k_min = Some(parse_usize(key, value)?),
                "bins_per_decade" => bins_per_decade = parse_usize(key, value)?,
                "seed" => {
                    seed = value
                        .parse()
                        .map_err(|_| spec_err(format!("key `seed`: `{value}` is not an integer")))?;
                }
                "output_dir" => output_dir = Some(PathBuf::from(value)),
                other => return Err(spec_err(format!("unknown key `{other}`"))),
            }
        }
    }

    let model = model.ok_or_else(|| spec_err("missing required key `model`"))?;
    let n_nodes = n_nodes.ok_or_else(|| spec_err("missing required key `n_nodes`"))?;
    let m = m.ok_or_else(|| spec_err("missing required key `m`"))?;
    if model == Model::Cm && gamma_targets.is_empty() {
        return Err(spec_err("model cm requires key `gamma_target`"));
    }
    if model == Model::Dapa {
        if tau_subs.is_empty() {
            return Err(spec_err("model dapa requires key `tau_sub`"));
        }
        if substrate_n.is_none() {
            return Err(spec_err("model dapa requires key `substrate_n`"));
        }
        if substrate_kind == SubstrateKind::Grn && substrate_radius.is_none() {
            return Err(spec_err("model dapa requires key `substrate_radius`"));
        }
    }
    if realizations == 0 {
        return Err(spec_err("key `realizations` must be >= 1"));
    }
    if bins_per_decade == 0 {
        return Err(spec_err("key `bins_per_decade` must be >= 1"));
    }
    if !search.is_empty() && (ttls.is_empty() || n_sources == 0) {
        return Err(spec_err("search runs need non-empty `ttls` and `n_sources` >= 1"));
    }

    let spec = ExperimentSpec {
        model,
        n_nodes,
        m,
        cutoffs,
        gamma_targets,
        tau_subs,
        substrate_n,
        substrate_radius,
        substrate_kind,
        realizations,
        n_sources,
        ttls,
        search,
        k_min,
        bins_per_decade,
        seed,
        output_dir,
        raw_text: text.to_string(),
    };
    // Constraint-check every sweep point now so a bad grid fails fast.
    for point in build_sweep(&spec) {
        point
            .to_config(&spec, 0)
            .validate()
            .map_err(|e| spec_err(format!("sweep point {}: {}", point.label(), e)))?;
    }
    Ok(spec)
}

/// Cross product of the sweep axes, nested `n_nodes -> m -> cutoffs ->
/// gamma_target -> tau_sub` (outermost varies slowest).
pub fn build_sweep(spec: &ExperimentSpec) -> Vec<PointParams> {
    let gammas: Vec<Option<f64>> = if spec.model == Model::Cm {
        spec.gamma_targets.iter().map(|&g| Some(g)).collect()
    } else {
        vec![None]
    };
    let taus: Vec<Option<usize>> = if spec.model == Model::Dapa {
        spec.tau_subs.iter().map(|&t| Some(t)).collect()
    } else {
        vec![None]
    };
    let mut points = Vec::new();
    for &n in &spec.n_nodes {
        for &m in &spec.m {
            for &kc in &spec.cutoffs {
                for &g in &gammas {
                    for &t in &taus {
                        points.push(PointParams {
                            model: spec.model,
                            n_nodes: n,
                            m,
                            hard_cutoff: kc,
                            gamma_target: g,
                            tau_sub: t,
                        });
                    }
                }
            }
        }
    }
    points
}

/// One realization's bookkeeping, kept for `realizations.csv`.
#[derive(Clone, Debug)]
pub struct RealizationRecord {
    pub index: usize,
    pub seed: u64,
    pub edges: usize,
    pub k_max: usize,
    pub giant_size: usize,
    pub self_loops_removed: usize,
    pub multi_edges_removed: usize,
}

struct RealizationOutput {
    record: RealizationRecord,
    histogram: DegreeHistogram,
    curves: Vec<Vec<CurvePoint>>, // indexed like spec.search
}

/// Aggregated results for one sweep point.
pub struct PointSummary {
    pub histogram: DegreeHistogram,
    pub records: Vec<RealizationRecord>,
    pub fit: Option<ExponentFit>,
    pub fit_error: Option<String>,
    pub spike: Option<SpikeReport>,
    pub classification: Option<(DistributionClass, f64, f64)>,
    /// ensemble mean/stderr over realizations, one curve per spec.search entry
    pub curves: Vec<(CurveAlgorithm, Vec<CurvePoint>)>,
    pub k_max_mean: f64,
    pub k_max_stderr: f64,
    pub giant_fraction_mean: f64,
}

pub struct PointResult {
    pub params: PointParams,
    pub outcome: Result<PointSummary, String>,
}

pub struct ExperimentResult {
    pub points: Vec<PointResult>,
}

impl ExperimentResult {
    pub fn succeeded(&self) -> usize {
        self.points.iter().filter(|p| p.outcome.is_ok()).count()
    }
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

fn run_realization(
    spec: &ExperimentSpec,
    point: &PointParams,
    sweep_idx: usize,
    real_idx: usize,
) -> Result<RealizationOutput, String> {
    let child_seed = derive_seed(spec.seed, &[sweep_idx as u64, real_idx as u64]);
    let cfg = point.to_config(spec, child_seed);
    let net = generate(&cfg).map_err(|e| e.to_string())?;
    let g = &net.graph;
    let histogram = DegreeHistogram::from_graph(g);
    let k_max = (0..g.node_count()).map(|u| g.degree(u)).max().unwrap_or(0);
    let (giant_size, _) = giant_component(g);
    let record = RealizationRecord {
        index: real_idx,
        seed: child_seed,
        edges: g.edge_count(),
        k_max,
        giant_size,
        self_loops_removed: net.self_loops_removed,
        multi_edges_removed: net.multi_edges_removed,
    };
    let search_seed = derive_seed(child_seed, &[7]);
    let k_min = spec.k_min.unwrap_or(point.m);
    let mut curves = Vec::with_capacity(spec.search.len());
    for &algo in &spec.search {
        let curve = measure_search_curve(
            g,
            algo,
            &spec.ttls,
            spec.n_sources,
            Some(k_min),
            search_seed,
        )
        .map_err(|e| e.to_string())?;
        curves.push(curve);
    }
    Ok(RealizationOutput {
        record,
        histogram,
        curves,
    })
}

fn summarize_point(
    spec: &ExperimentSpec,
    point: &PointParams,
    outputs: Vec<RealizationOutput>,
) -> PointSummary {
    let mut histogram = DegreeHistogram::default();
    let mut records = Vec::with_capacity(outputs.len());
    for out in &outputs {
        histogram.merge(&out.histogram);
        records.push(out.record.clone());
    }
    let (k_max_mean, k_max_stderr) =
        mean_stderr(&records.iter().map(|r| r.k_max as f64).collect::<Vec<_>>());
    let giant_fraction_mean = records
        .iter()
        .map(|r| r.giant_size as f64 / point.n_nodes as f64)
        .sum::<f64>()
        / records.len().max(1) as f64;

    let (fit, fit_error) = match default_fit_range(&histogram, point.m, point.hard_cutoff)
        .and_then(|(lo, hi)| {
            fit_powerlaw_exponent(
                &histogram,
                FitMethod::LogBinnedLs {
                    bins_per_decade: spec.bins_per_decade,
                },
                lo,
                hi,
            )
        }) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let spike = match (point.hard_cutoff, &fit) {
        (Some(kc), Some(f)) => Some(cutoff_spike_fraction(&histogram, kc, f)),
        _ => None,
    };
    // shape classification skips k<2: the smallest-degree bin reflects the
    // attachment floor, not the tail law (same convention as the fit range)
    let classification = histogram.max_degree().filter(|&k| k >= 2).and_then(|kmax| {
        classify_distribution(&histogram, spec.bins_per_decade, 2, kmax).ok()
    });

    let mut curves = Vec::with_capacity(spec.search.len());
    for (a_idx, &algo) in spec.search.iter().enumerate() {
        let mut points = Vec::with_capacity(spec.ttls.len());
        for (t_idx, &ttl) in spec.ttls.iter().enumerate() {
            let hits: Vec<f64> = outputs
                .iter()
                .map(|o| o.curves[a_idx][t_idx].mean_hits)
                .collect();
            let msgs: Vec<f64> = outputs
                .iter()
                .map(|o| o.curves[a_idx][t_idx].mean_messages)
                .collect();
            let (mean_hits, stderr_hits) = mean_stderr(&hits);
            let (mean_messages, stderr_messages) = mean_stderr(&msgs);
            points.push(CurvePoint {
                ttl,
                mean_hits,
                stderr_hits,
                mean_messages,
                stderr_messages,
            });
        }
        curves.push((algo, points));
    }

    PointSummary {
        histogram,
        records,
        fit,
        fit_error,
        spike,
        classification,
        curves,
        k_max_mean,
        k_max_stderr,
        giant_fraction_mean,
    }
}

/// Runs every (sweep point, realization) task, optionally capping worker
/// threads. A failed realization aborts its sweep point (recorded as that
/// point's error); other points are unaffected.
pub fn run_experiment(
    spec: &ExperimentSpec,
    workers: Option<usize>,
) -> Result<ExperimentResult, HarnessError> {
    let points = build_sweep(spec);
    let tasks: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..spec.realizations).map(move |r| (p, r)))
        .collect();

    let run_all = || {
        tasks
            .par_iter()
            .map(|&(p, r)| run_realization(spec, &points[p], p, r))
            .collect::<Vec<_>>()
    };
    let mut results = match workers {
        Some(w) if w > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| HarnessError::Pool(e.to_string()))?
            .install(run_all),
        _ => run_all(),
    };

    // Group back by sweep point, preserving order.
    let mut point_results = Vec::with_capacity(points.len());
    for (p_idx, params) in points.into_iter().enumerate() {
        let chunk: Vec<Result<RealizationOutput, String>> = results
            .splice(0..spec.realizations.min(results.len()), std::iter::empty())
            .collect();
        debug_assert_eq!(chunk.len(), spec.realizations, "point {p_idx}");
        let mut outputs = Vec::with_capacity(chunk.len());
        let mut failure: Option<String> = None;
        for (r_idx, res) in chunk.into_iter().enumerate() {
            match res {
                Ok(o) => outputs.push(o),
                Err(e) => {
                    failure.get_or_insert(format!("realization {r_idx}: {e}"));
                }
            }
        }
        let outcome = match failure {
            Some(e) => Err(e),
            None => Ok(summarize_point(spec, &params, outputs)),
        };
        point_results.push(PointResult { params, outcome });
    }
    Ok(ExperimentResult {
        points: point_results,
    })
}

/// Creates `dir` if needed; refuses a non-empty one unless `overwrite`.
pub fn prepare_output_dir(dir: &Path, overwrite: bool) -> Result<(), HarnessError> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir)?.next().is_some();
        if non_empty && !overwrite {
            return Err(HarnessError::DirNotEmpty(dir.display().to_string()));
        }
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

#[derive(Serialize)]
struct ClassificationReport {
    class: DistributionClass,
    power_r2: Option<f64>,
    exponential_r2: Option<f64>,
}

#[derive(Serialize)]
struct FitReport<'a> {
    label: String,
    #[serde(flatten)]
    params: &'a PointParams,
    realizations: usize,
    fit: Option<&'a ExponentFit>,
    fit_error: Option<&'a String>,
    cutoff_spike: Option<&'a SpikeReport>,
    classification: Option<ClassificationReport>,
    k_max_mean: f64,
    k_max_stderr: f64,
    giant_fraction_mean: f64,
    self_loops_removed_total: u64,
    multi_edges_removed_total: u64,
}

fn not_nan(x: f64) -> Option<f64> {
    if x.is_nan() {
        None
    } else {
        Some(x)
    }
}

fn write_point_files(
    dir: &Path,
    spec: &ExperimentSpec,
    result: &PointResult,
    per_realization: bool,
    manifest: &mut Vec<String>,
) -> Result<(), HarnessError> {
    let label = result.params.label();
    let point_dir = dir.join(&label);
    fs::create_dir_all(&point_dir)?;
    let mut emit = |name: &str, bytes: &[u8]| -> Result<(), HarnessError> {
        fs::write(point_dir.join(name), bytes)?;
        manifest.push(format!("{label}/{name}"));
        Ok(())
    };

    let summary = match &result.outcome {
        Err(e) => {
            emit("error.txt", format!("{e}\n").as_bytes())?;
            return Ok(());
        }
        Ok(s) => s,
    };

    let mut buf = Vec::new();
    summary.histogram.write_csv(&mut buf)?;
    emit("histogram.csv", &buf)?;

    let kmax = summary.histogram.max_degree().unwrap_or(0);
    buf.clear();
    if kmax >= 1 {
        let bins = log_bin_histogram(&summary.histogram, spec.bins_per_decade, 1, kmax)
            .map_err(|e| spec_err(format!("binning {label}: {e}")))?;
        write_logbinned_csv(&bins, &mut buf)?;
    } else {
        writeln!(&mut buf, "k_center,density")?;
    }
    emit("logbinned.csv", &buf)?;

    let report = FitReport {
        label: label.clone(),
        params: &result.params,
        realizations: summary.records.len(),
        fit: summary.fit.as_ref(),
        fit_error: summary.fit_error.as_ref(),
        cutoff_spike: summary.spike.as_ref(),
        classification: summary.classification.map(|(class, p, e)| ClassificationReport {
            class,
            power_r2: not_nan(p),
            exponential_r2: not_nan(e),
        }),
        k_max_mean: summary.k_max_mean,
        k_max_stderr: summary.k_max_stderr,
        giant_fraction_mean: summary.giant_fraction_mean,
        self_loops_removed_total: summary
            .records
            .iter()
            .map(|r| r.self_loops_removed as u64)
            .sum(),
        multi_edges_removed_total: summary
            .records
            .iter()
            .map(|r| r.multi_edges_removed as u64)
            .sum(),
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| spec_err(format!("serializing fit report for {label}: {e}")))?;
    emit("fit.json", format!("{json}\n").as_bytes())?;

    for (algo, curve) in &summary.curves {
        buf.clear();
        writeln!(&mut buf, "tau,mean_hits,stderr_hits,mean_messages,stderr_messages")?;
        for p in curve {
            writeln!(
                &mut buf,
                "{},{},{},{},{}",
                p.ttl, p.mean_hits, p.stderr_hits, p.mean_messages, p.stderr_messages
            )?;
        }
        emit(&format!("search_{}.csv", curve_token(*algo)), &buf)?;
    }

    if per_realization {
        buf.clear();
        writeln!(
            &mut buf,
            "realization,seed,edges,k_max,giant_size,self_loops_removed,multi_edges_removed"
        )?;
        for r in &summary.records {
            writeln!(
                &mut buf,
                "{},{},{},{},{},{},{}",
                r.index,
                r.seed,
                r.edges,
                r.k_max,
                r.giant_size,
                r.self_loops_removed,
                r.multi_edges_removed
            )?;
        }
        emit("realizations.csv", &buf)?;
    }
    Ok(())
}

/// Writes all per-point files plus `manifest.txt` (spec echoed verbatim,
/// then the sorted file list). Refuses a non-empty directory unless
/// `overwrite` is set.
pub fn emit_outputs(
    result: &ExperimentResult,
    spec: &ExperimentSpec,
    dir: &Path,
    overwrite: bool,
    per_realization: bool,
) -> Result<Vec<String>, HarnessError> {
    prepare_output_dir(dir, overwrite)?;
    let mut manifest: Vec<String> = Vec::new();
    for point in &result.points {
        write_point_files(dir, spec, point, per_realization, &mut manifest)?;
    }
    manifest.sort();
    let mut text = String::new();
    text.push_str("== spec ==\n");
    text.push_str(&spec.raw_text);
    if !spec.raw_text.ends_with('\n') {
        text.push('\n');
    }
    text.push_str("== files ==\n");
    for f in &manifest {
        text.push_str(f);
        text.push('\n');
    }
    fs::write(dir.join("manifest.txt"), text)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_spec_gets_defaults() {
        let spec = parse_spec("model=PA n_nodes=1000 m=2").unwrap();
        assert_eq!(spec.model, Model::Pa);
        assert_eq!(spec.n_nodes, vec![1000]);
        assert_eq!(spec.m, vec![2]);
        assert_eq!(spec.cutoffs, vec![None]);
        assert_eq!(spec.realizations, 10);
        assert_eq!(spec.n_sources, 100);
        assert_eq!(spec.bins_per_decade, 10);
        assert_eq!(spec.ttls, (1..=10).collect::<Vec<_>>());
        assert!(spec.search.is_empty());
        assert_eq!(spec.seed, 0);
    }

    #[test]
    fn comments_and_lists_parse() {
        let text = "# sweep over cutoffs\nmodel=pa n_nodes=500 m=1\ncutoffs=10,40,none # three points\nttls=1-3,8 search=fl,rw_budget seed=9";
        let spec = parse_spec(text).unwrap();
        assert_eq!(spec.cutoffs, vec![Some(10), Some(40), None]);
        assert_eq!(spec.ttls, vec![1, 2, 3, 8]);
        assert_eq!(
            spec.search,
            vec![CurveAlgorithm::Flooding, CurveAlgorithm::BudgetedWalk]
        );
        assert_eq!(spec.seed, 9);
        assert_eq!(spec.raw_text, text);
    }

    #[test]
    fn parse_errors_name_the_offender() {
        let err = parse_spec("model=cm n_nodes=100 m=1").unwrap_err().to_string();
        assert!(err.contains("gamma_target"), "{err}");
        let err = parse_spec("model=pa n_nodes=100 m=2 frobnicate=1")
            .unwrap_err()
            .to_string();
        assert!(err.contains("frobnicate"), "{err}");
        let err = parse_spec("model=pa n_nodes=ten m=2").unwrap_err().to_string();
        assert!(err.contains("n_nodes"), "{err}");
        let err = parse_spec("model=pa n_nodes=100 m=2 m=3").unwrap_err().to_string();
        assert!(err.contains("duplicate"), "{err}");
        let err = parse_spec("n_nodes=100 m=2").unwrap_err().to_string();
        assert!(err.contains("model"), "{err}");
        // cutoff at or below m is caught at parse time, naming the point
        let err = parse_spec("model=pa n_nodes=100 m=2 cutoffs=2")
            .unwrap_err()
            .to_string();
        assert!(err.contains("cutoff"), "{err}");
    }

    #[test]
    fn sweep_is_a_nested_cross_product() {
        let spec = parse_spec("model=pa n_nodes=100,200 m=1 cutoffs=10,none").unwrap();
        let labels: Vec<String> = build_sweep(&spec).iter().map(|p| p.label()).collect();
        assert_eq!(
            labels,
            vec![
                "pa_n100_m1_kc10",
                "pa_n100_m1_kcnone",
                "pa_n200_m1_kc10",
                "pa_n200_m1_kcnone"
            ]
        );
    }

    #[test]
    fn labels_cover_model_specific_axes() {
        let spec =
            parse_spec("model=cm n_nodes=100 m=2 gamma_target=2.2,3 cutoffs=40").unwrap();
        let labels: Vec<String> = build_sweep(&spec).iter().map(|p| p.label()).collect();
        assert_eq!(labels, vec!["cm_n100_m2_kc40_g2.2", "cm_n100_m2_kc40_g3"]);
    }

    fn smoke_spec() -> ExperimentSpec {
        parse_spec(
            "model=pa n_nodes=120 m=2 realizations=2 n_sources=5 ttls=1-4 search=fl,nf,rw,rw_budget seed=11",
        )
        .unwrap()
    }

    #[test]
    fn experiment_smoke_runs_and_aggregates() {
        let spec = smoke_spec();
        let result = run_experiment(&spec, None).unwrap();
        assert_eq!(result.points.len(), 1);
        let summary = result.points[0].outcome.as_ref().unwrap();
        assert_eq!(summary.records.len(), 2);
        assert_eq!(summary.histogram.n_nodes(), 240); // pooled over realizations
        assert_eq!(summary.curves.len(), 4);
        for (_, curve) in &summary.curves {
            assert_eq!(curve.len(), 4);
        }
        // budgeted walk spends exactly the normalized-flood budget
        let nf = &summary.curves[1].1;
        let bw = &summary.curves[3].1;
        for (a, b) in nf.iter().zip(bw) {
            assert!((a.mean_messages - b.mean_messages).abs() < 1e-9);
        }
        assert!(summary.k_max_mean >= 2.0);
        assert!(summary.giant_fraction_mean > 0.99);
        assert!(summary.fit.is_some() || summary.fit_error.is_some());
    }

    #[test]
    fn failed_points_are_isolated() {
        // cutoff 3 with m=2 deterministically starves growth at 6 nodes
        let spec =
            parse_spec("model=pa n_nodes=6 m=2 cutoffs=3,none realizations=1 seed=5").unwrap();
        let result = run_experiment(&spec, None).unwrap();
        assert_eq!(result.points.len(), 2);
        assert!(result.points[0].outcome.is_err());
        assert!(result.points[1].outcome.is_ok());
        assert_eq!(result.succeeded(), 1);
    }

    #[test]
    fn emitted_files_match_counted_contract() {
        let spec = parse_spec(
            "model=pa n_nodes=80 m=1 realizations=1 n_sources=3 ttls=1-2 search=fl seed=2",
        )
        .unwrap();
        let result = run_experiment(&spec, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_outputs(&result, &spec, dir.path(), false, false).unwrap();
        // one point, flooding only: histogram, logbinned, fit, search_fl
        assert_eq!(
            files,
            vec![
                "pa_n80_m1_kcnone/fit.json",
                "pa_n80_m1_kcnone/histogram.csv",
                "pa_n80_m1_kcnone/logbinned.csv",
                "pa_n80_m1_kcnone/search_fl.csv"
            ]
        );
        let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
        assert!(manifest.contains("== spec =="));
        assert!(manifest.contains(&spec.raw_text));
        for f in &files {
            assert!(manifest.contains(f.as_str()));
            assert!(dir.path().join(f).is_file());
        }
    }

    #[test]
    fn sweep_points_get_their_own_directories() {
        let spec = parse_spec(
            "model=pa n_nodes=60 m=1 cutoffs=5,10,none realizations=1 seed=3",
        )
        .unwrap();
        let result = run_experiment(&spec, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_outputs(&result, &spec, dir.path(), false, false).unwrap();
        for label in ["pa_n60_m1_kc5", "pa_n60_m1_kc10", "pa_n60_m1_kcnone"] {
            assert!(dir.path().join(label).is_dir(), "{label}");
        }
    }

    #[test]
    fn refuses_non_empty_dir_without_overwrite() {
        let spec = parse_spec("model=pa n_nodes=60 m=1 realizations=1 seed=3").unwrap();
        let result = run_experiment(&spec, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("keep.txt"), "existing").unwrap();
        let err = emit_outputs(&result, &spec, dir.path(), false, false);
        assert!(matches!(err, Err(HarnessError::DirNotEmpty(_))));
        emit_outputs(&result, &spec, dir.path(), true, false).unwrap();
        assert!(dir.path().join("manifest.txt").is_file());
    }

    #[test]
    fn reruns_are_byte_identical() {
        let spec = smoke_spec();
        let dirs: Vec<tempfile::TempDir> = (0..2)
            .map(|_| {
                let result = run_experiment(&spec, None).unwrap();
                let dir = tempfile::tempdir().unwrap();
                emit_outputs(&result, &spec, dir.path(), false, true).unwrap();
                dir
            })
            .collect();
        let mut names: Vec<PathBuf> = Vec::new();
        for entry in walk(dirs[0].path()) {
            names.push(entry.strip_prefix(dirs[0].path()).unwrap().to_path_buf());
        }
        assert!(!names.is_empty());
        for rel in names {
            let a = fs::read(dirs[0].path().join(&rel)).unwrap();
            let b = fs::read(dirs[1].path().join(&rel)).unwrap();
            assert_eq!(a, b, "file {} differs between reruns", rel.display());
        }
    }

    #[test]
    fn per_realization_csv_reconciles_with_summary() {
        let spec = parse_spec("model=pa n_nodes=150 m=2 realizations=4 seed=21").unwrap();
        let result = run_experiment(&spec, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_outputs(&result, &spec, dir.path(), false, true).unwrap();
        let csv =
            fs::read_to_string(dir.path().join("pa_n150_m2_kcnone/realizations.csv")).unwrap();
        let kmaxes: Vec<f64> = csv
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(3).unwrap().parse::<f64>().unwrap())
            .collect();
        assert_eq!(kmaxes.len(), 4);
        let mean = kmaxes.iter().sum::<f64>() / 4.0;
        let summary = result.points[0].outcome.as_ref().unwrap();
        assert!((mean - summary.k_max_mean).abs() < 1e-12);
    }

    #[test]
    fn failed_point_writes_error_file() {
        let spec =
            parse_spec("model=pa n_nodes=6 m=2 cutoffs=3 realizations=1 seed=5").unwrap();
        let result = run_experiment(&spec, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_outputs(&result, &spec, dir.path(), false, false).unwrap();
        assert_eq!(files, vec!["pa_n6_m2_kc3/error.txt"]);
        let msg = fs::read_to_string(dir.path().join("pa_n6_m2_kc3/error.txt")).unwrap();
        assert!(msg.contains("stalled"), "{msg}");
    }

    fn walk(dir: &Path) -> Vec<PathBuf> {
        let mut out = Vec::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for entry in fs::read_dir(&d).unwrap() {
                let p = entry.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    out.push(p);
                }
            }
        }
        out.sort();
        out
    }
}
