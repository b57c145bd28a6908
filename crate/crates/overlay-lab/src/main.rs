/*!
Command-line front end.

Exit codes: 0 success, 2 spec/usage error, 3 generation failure,
4 I/O failure.
*/

use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use overlay_lab::analysis::{
    classify_distribution, cutoff_spike_fraction, default_fit_range, fit_powerlaw_exponent,
    log_bin_histogram, write_logbinned_csv, AnalysisError, DegreeHistogram, DistributionClass,
    ExponentFit, FitMethod, SpikeReport,
};
use overlay_lab::generators::{generate, write_peer_map, GeneratorError, Model};
use overlay_lab::graph::{read_edge_list, write_edge_list, EdgeListError, Graph};
use overlay_lab::harness::{
    build_sweep, emit_outputs, parse_spec, parse_ttl_list, prepare_output_dir, run_experiment,
    ExperimentSpec, HarnessError,
};
use overlay_lab::search::{measure_search_curve, CurveAlgorithm};

const EXIT_SPEC: u8 = 2;
const EXIT_GENERATION: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "overlay-lab",
    version,
    about = "Simulate and measure peer-to-peer overlay topologies under degree cutoffs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SearchAlgoArg {
    Fl,
    Nf,
    Rw,
    RwBudget,
}

impl From<SearchAlgoArg> for CurveAlgorithm {
    fn from(a: SearchAlgoArg) -> Self {
        match a {
            SearchAlgoArg::Fl => CurveAlgorithm::Flooding,
            SearchAlgoArg::Nf => CurveAlgorithm::NormalizedFlooding,
            SearchAlgoArg::Rw => CurveAlgorithm::RandomWalk,
            SearchAlgoArg::RwBudget => CurveAlgorithm::BudgetedWalk,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Build one topology from a single-point spec and write its edge list
    /// (plus peer map and coordinates for substrate-backed models).
    Generate {
        /// spec file; must describe exactly one sweep point
        spec: PathBuf,
        /// override the spec's master seed
        #[arg(long)]
        seed: Option<u64>,
        /// edge-list path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a degree distribution from an edge-list file.
    Analyze {
        /// edge-list file as produced by `generate`
        edges: PathBuf,
        #[arg(long, default_value_t = 10)]
        bins_per_decade: usize,
        /// hard cutoff the graph was built with, if any (sets the default
        /// fit range and enables the cutoff-spike report)
        #[arg(long)]
        cutoff: Option<usize>,
        /// explicit fit range lower bound (inclusive)
        #[arg(long)]
        lo: Option<usize>,
        /// explicit fit range upper bound (inclusive)
        #[arg(long)]
        hi: Option<usize>,
        /// fit via truncated maximum likelihood instead of log-binned
        /// least squares
        #[arg(long)]
        mle: bool,
        /// directory for histogram.csv, logbinned.csv, fit.json
        /// (JSON report on stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        overwrite: bool,
    },
    /// Measure a search hit/message curve on an edge-list file.
    Search {
        edges: PathBuf,
        #[arg(long, value_enum)]
        algorithm: SearchAlgoArg,
        /// comma list of ttls; items may be inclusive ranges like 1-10
        #[arg(long, default_value = "1-10")]
        ttls: String,
        #[arg(long, default_value_t = 100)]
        n_sources: usize,
        /// fan-out cap for nf / rw_budget
        #[arg(long)]
        k_min: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a full ensemble sweep from a spec file into an output directory.
    Experiment {
        spec: PathBuf,
        /// output directory (overrides output_dir in the spec)
        #[arg(long)]
        out: Option<PathBuf>,
        /// override the spec's master seed
        #[arg(long)]
        seed: Option<u64>,
        /// cap on concurrent worker threads
        #[arg(long)]
        workers: Option<usize>,
        /// reuse a non-empty output directory
        #[arg(long)]
        overwrite: bool,
        /// additionally emit realizations.csv per sweep point
        #[arg(long)]
        per_realization: bool,
    },
    /// Parse and validate a spec file without running anything.
    SpecCheck { spec: PathBuf },
}

/// Prints `error: ...` and maps the error type onto the exit-code contract.
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn new(code: u8, msg: impl Into<String>) -> Self {
        Failure {
            code,
            msg: msg.into(),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        let code = match &e {
            HarnessError::Spec(_) | HarnessError::Pool(_) => EXIT_SPEC,
            HarnessError::DirNotEmpty(_) | HarnessError::Io(_) => EXIT_IO,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<GeneratorError> for Failure {
    fn from(e: GeneratorError) -> Self {
        let code = match &e {
            GeneratorError::InvalidConfig(_) => EXIT_SPEC,
            _ => EXIT_GENERATION,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<EdgeListError> for Failure {
    fn from(e: EdgeListError) -> Self {
        let code = match &e {
            EdgeListError::Io(_) => EXIT_IO,
            EdgeListError::Parse { .. } => EXIT_SPEC,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        Failure::new(EXIT_SPEC, e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::new(EXIT_IO, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.cmd {
        Cmd::Generate { spec, seed, out } => cmd_generate(&spec, seed, out.as_deref()),
        Cmd::Analyze {
            edges,
            bins_per_decade,
            cutoff,
            lo,
            hi,
            mle,
            out,
            overwrite,
        } => cmd_analyze(&edges, bins_per_decade, cutoff, lo, hi, mle, out.as_deref(), overwrite),
        Cmd::Search {
            edges,
            algorithm,
            ttls,
            n_sources,
            k_min,
            seed,
            out,
        } => cmd_search(&edges, algorithm.into(), &ttls, n_sources, k_min, seed, out.as_deref()),
        Cmd::Experiment {
            spec,
            out,
            seed,
            workers,
            overwrite,
            per_realization,
        } => cmd_experiment(&spec, out, seed, workers, overwrite, per_realization),
        Cmd::SpecCheck { spec } => cmd_spec_check(&spec),
    }
}

/// Writes to stdout, treating a closed pipe (e.g. `| head`) as success.
fn print_stdout(s: &str) -> Result<(), Failure> {
    match io::stdout().write_all(s.as_bytes()) {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn read_spec_file(path: &Path, seed_override: Option<u64>) -> Result<ExperimentSpec, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_IO, format!("reading {}: {e}", path.display())))?;
    let mut spec = parse_spec(&text)?;
    if let Some(s) = seed_override {
        spec.seed = s;
    }
    Ok(spec)
}

fn cmd_generate(
    spec_path: &Path,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<ExitCode, Failure> {
    let spec = read_spec_file(spec_path, seed)?;
    let points = build_sweep(&spec);
    if points.len() != 1 {
        return Err(Failure::new(
            EXIT_SPEC,
            format!(
                "generate needs a single-point spec, got {} sweep points (use experiment)",
                points.len()
            ),
        ));
    }
    let point = &points[0];
    if point.model == Model::Dapa && out.is_none() {
        return Err(Failure::new(
            EXIT_SPEC,
            "substrate-backed models need --out so the peer map and coordinates can be written alongside",
        ));
    }
    let cfg = point.to_config(&spec, spec.seed);
    let net = generate(&cfg)?;

    match out {
        Some(path) => {
            let file = fs::File::create(path)?;
            write_edge_list(&net.graph, BufWriter::new(file))?;
            if let Some(sub) = &net.substrate {
                let peers = sibling_file(path, "peers");
                write_peer_map(&sub.node_map, BufWriter::new(fs::File::create(&peers)?))?;
                eprintln!("peer map -> {}", peers.display());
                if let Some(coords) = &sub.coordinates {
                    let cpath = sibling_file(path, "coords");
                    coords.write(BufWriter::new(fs::File::create(&cpath)?))?;
                    eprintln!("substrate coordinates -> {}", cpath.display());
                }
            }
            eprintln!(
                "{}: {} nodes, {} edges -> {}",
                point.label(),
                net.graph.node_count(),
                net.graph.edge_count(),
                path.display()
            );
        }
        None => {
            let stdout = io::stdout();
            match write_edge_list(&net.graph, BufWriter::new(stdout.lock())) {
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => {}
                r => r?,
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// `edges.txt` -> `edges.peers.txt` (keeps the extension, inserts a tag).
fn sibling_file(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = path.extension().and_then(|s| s.to_str());
    let name = match ext {
        Some(e) => format!("{stem}.{tag}.{e}"),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

#[derive(Serialize)]
struct AnalyzeReport {
    n_nodes: u64,
    n_edges: usize,
    fit_lo: usize,
    fit_hi: usize,
    fit: ExponentFit,
    classification: ClassReport,
    cutoff_spike: Option<SpikeReport>,
}

#[derive(Serialize)]
struct ClassReport {
    class: DistributionClass,
    power_r2: Option<f64>,
    exponential_r2: Option<f64>,
}

fn load_graph(path: &Path) -> Result<Graph, Failure> {
    let file = fs::File::open(path)
        .map_err(|e| Failure::new(EXIT_IO, format!("opening {}: {e}", path.display())))?;
    Ok(read_edge_list(BufReader::new(file))?)
}

#[allow(clippy::too_many_arguments)]
fn cmd_analyze(
    edges: &Path,
    bins_per_decade: usize,
    cutoff: Option<usize>,
    lo: Option<usize>,
    hi: Option<usize>,
    mle: bool,
    out: Option<&Path>,
    overwrite: bool,
) -> Result<ExitCode, Failure> {
    let g = load_graph(edges)?;
    let hist = DegreeHistogram::from_graph(&g);
    let min_degree = hist
        .iter()
        .find(|&(k, _)| k >= 1)
        .map(|(k, _)| k)
        .unwrap_or(1);
    let (def_lo, def_hi) = default_fit_range(&hist, min_degree, cutoff)?;
    let (fit_lo, fit_hi) = (lo.unwrap_or(def_lo), hi.unwrap_or(def_hi));
    let method = if mle {
        FitMethod::TruncatedMle
    } else {
        FitMethod::LogBinnedLs { bins_per_decade }
    };
    let fit = fit_powerlaw_exponent(&hist, method, fit_lo, fit_hi)?;
    let kmax = hist.max_degree().unwrap_or(1);
    // classification skips the k=1 attachment-floor bin, like the fit range
    let class_lo = if kmax >= 2 { 2 } else { 1 };
    let (class, power_r2, exp_r2) = classify_distribution(&hist, bins_per_decade, class_lo, kmax)?;
    let spike = cutoff.map(|kc| cutoff_spike_fraction(&hist, kc, &fit));
    let report = AnalyzeReport {
        n_nodes: hist.n_nodes(),
        n_edges: g.edge_count(),
        fit_lo,
        fit_hi,
        fit,
        classification: ClassReport {
            class,
            power_r2: if power_r2.is_nan() { None } else { Some(power_r2) },
            exponential_r2: if exp_r2.is_nan() { None } else { Some(exp_r2) },
        },
        cutoff_spike: spike,
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Failure::new(EXIT_IO, format!("serializing report: {e}")))?;

    match out {
        Some(dir) => {
            prepare_output_dir(dir, overwrite)?;
            let mut buf = Vec::new();
            hist.write_csv(&mut buf)?;
            fs::write(dir.join("histogram.csv"), &buf)?;
            buf.clear();
            let bins = log_bin_histogram(&hist, bins_per_decade, 1, kmax)?;
            write_logbinned_csv(&bins, &mut buf)?;
            fs::write(dir.join("logbinned.csv"), &buf)?;
            fs::write(dir.join("fit.json"), format!("{json}\n"))?;
            eprintln!("analysis -> {}", dir.display());
        }
        None => print_stdout(&format!("{json}\n"))?,
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_search(
    edges: &Path,
    algorithm: CurveAlgorithm,
    ttls: &str,
    n_sources: usize,
    k_min: Option<usize>,
    seed: u64,
    out: Option<&Path>,
) -> Result<ExitCode, Failure> {
    let g = load_graph(edges)?;
    let ttls = parse_ttl_list(ttls)?;
    let curve = measure_search_curve(&g, algorithm, &ttls, n_sources, k_min, seed)
        .map_err(|e| Failure::new(EXIT_SPEC, e.to_string()))?;
    let mut buf = String::from("tau,mean_hits,stderr_hits,mean_messages,stderr_messages\n");
    for p in &curve {
        buf.push_str(&format!(
            "{},{},{},{},{}\n",
            p.ttl, p.mean_hits, p.stderr_hits, p.mean_messages, p.stderr_messages
        ));
    }
    match out {
        Some(path) => {
            fs::write(path, buf)?;
            eprintln!("search curve -> {}", path.display());
        }
        None => print_stdout(&buf)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_experiment(
    spec_path: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    workers: Option<usize>,
    overwrite: bool,
    per_realization: bool,
) -> Result<ExitCode, Failure> {
    let spec = read_spec_file(spec_path, seed)?;
    let out_dir = out
        .or_else(|| spec.output_dir.clone())
        .ok_or_else(|| Failure::new(EXIT_SPEC, "no output directory: pass --out or set output_dir in the spec"))?;
    // Claim the directory before doing any work so an unwritable path
    // fails fast instead of discarding a finished ensemble.
    prepare_output_dir(&out_dir, overwrite)?;

    let result = run_experiment(&spec, workers)?;
    let files = emit_outputs(&result, &spec, &out_dir, true, per_realization)?;

    let mut failed = 0usize;
    let mut report = String::new();
    for p in &result.points {
        match &p.outcome {
            Ok(s) => {
                let gamma = s
                    .fit
                    .as_ref()
                    .map(|f| format!("gamma_hat={:.3} r2={:.4}", f.gamma_hat, f.r_squared))
                    .unwrap_or_else(|| "no fit".into());
                report.push_str(&format!(
                    "{}: ok ({} realizations, k_max_mean={:.1}, {})\n",
                    p.params.label(),
                    s.records.len(),
                    s.k_max_mean,
                    gamma
                ));
            }
            Err(e) => {
                failed += 1;
                report.push_str(&format!("{}: FAILED: {e}\n", p.params.label()));
            }
        }
    }
    report.push_str(&format!(
        "wrote {} files to {} ({} points, {} failed)\n",
        files.len() + 1, // + manifest
        out_dir.display(),
        result.points.len(),
        failed
    ));
    print_stdout(&report)?;
    if failed == result.points.len() {
        return Err(Failure::new(EXIT_GENERATION, "all sweep points failed"));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_spec_check(spec_path: &Path) -> Result<ExitCode, Failure> {
    let spec = read_spec_file(spec_path, None)?;
    let points = build_sweep(&spec);
    let mut report = format!(
        "spec ok: {} sweep point(s) x {} realization(s), seed {}\n",
        points.len(),
        spec.realizations,
        spec.seed
    );
    for p in &points {
        report.push_str(&format!("  {}\n", p.label()));
    }
    print_stdout(&report)?;
    Ok(ExitCode::SUCCESS)
}
