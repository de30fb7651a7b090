//! Command-line driver: parse a [`RunConfig`], run the addressed benchmark
//! and write a JSON report (plus optional CSV series).

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use qbench::apps::{self, Algorithm, AppSpec, SuiteConfig};
use qbench::circuit::{Circuit, Gate};
use qbench::clops::{self, ClockMode, ClopsConfig, LatencyModel};
use qbench::mirror::{self, MirrorQvConfig, MirrorRbConfig};
use qbench::opt::{pec_expectation, OverheadLedger, PecConfig, Pipeline, Technique};
use qbench::qv::{self, QvConfig};
use qbench::report::{self, BenchmarkReport, Series, Status};
use qbench::sim::{Executor, NoiseModel, PauliString};
use qbench::stats::{self, CurveConfig, Resampling};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "QBENCH_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "qbench", version, about = "Quantum benchmarks on a simulated noisy device")]
pub struct RunConfig {
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quantum volume at one width.
    Qv(QvArgs),
    /// Quantum volume over increasing widths until the first failure.
    ScanQv(ScanQvArgs),
    /// Mirror quantum volume circuits.
    MirrorQv(MirrorQvArgs),
    /// Mirror randomized benchmarking.
    MirrorRb(MirrorRbArgs),
    /// Circuit layer operations per second.
    Clops(ClopsArgs),
    /// Application-oriented circuits.
    Apps(AppsCommand),
    /// Monte Carlo study of the pass criterion.
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Probabilistic error cancellation of an expectation value.
    Pec(PecArgs),
    /// Inspect existing reports.
    #[command(subcommand)]
    Report(ReportCommand),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Noise preset (none, kolkata-like) or path to a noise-model JSON file.
    #[arg(long, default_value = "none")]
    pub noise: String,
    /// Comma list of techniques, e.g. `layout,dd,mmit` or `pec:gamma_cap=50`.
    #[arg(long, default_value = "none")]
    pub pipeline: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON report path. Defaults to `<benchmark>.json` in the output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Directory for one CSV file per report series.
    #[arg(long)]
    #[serde(skip)]
    pub csv_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct QvArgs {
    #[arg(long)]
    pub width: usize,
    #[arg(long, default_value_t = qv::MIN_CIRCUITS)]
    pub circuits: usize,
    #[arg(long, default_value_t = qv::DEFAULT_SHOTS)]
    pub shots: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScanQvArgs {
    /// Inclusive range `a..b`.
    #[arg(long, default_value = "2..6")]
    pub widths: String,
    #[arg(long, default_value_t = qv::MIN_CIRCUITS)]
    pub circuits: usize,
    #[arg(long, default_value_t = qv::DEFAULT_SHOTS)]
    pub shots: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MirrorQvArgs {
    #[arg(long)]
    pub width: usize,
    #[arg(long, default_value_t = 100)]
    pub circuits: usize,
    #[arg(long, default_value_t = 1000)]
    pub shots: u64,
    /// Prepend a random Pauli layer and score against the flipped target.
    #[arg(long)]
    pub twirl: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MirrorRbArgs {
    #[arg(long, default_value = "2,4,6")]
    pub widths: String,
    #[arg(long, default_value = "2,4,8,16")]
    pub depths: String,
    #[arg(long, default_value_t = 0.25)]
    pub density: f64,
    #[arg(long, default_value_t = 20)]
    pub circuits: usize,
    #[arg(long, default_value_t = 100)]
    pub shots: u64,
    /// Shorthand for adding `dd` to the pipeline.
    #[arg(long, value_enum, default_value = "off")]
    pub dd: Switch,
    #[arg(long)]
    pub twirl: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClopsArgs {
    #[arg(long, default_value_t = 100)]
    pub templates: usize,
    #[arg(long, default_value_t = 10)]
    pub updates: usize,
    #[arg(long, default_value_t = 100)]
    pub shots: u64,
    /// Template layers. Defaults to log₂ of the volume in `--from-report`.
    #[arg(long)]
    pub layers: Option<usize>,
    /// A qv or scan-qv report whose passing width sets `--layers`.
    #[arg(long)]
    pub from_report: Option<PathBuf>,
    /// Latency model JSON file.
    #[arg(long)]
    pub latency: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "virtual")]
    pub clock: Clock,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clock {
    Virtual,
    Wall,
}

#[derive(Debug, Args)]
#[command(args_conflicts_with_subcommands = true)]
pub struct AppsCommand {
    #[command(subcommand)]
    pub action: Option<AppsAction>,
    #[command(flatten)]
    pub run: AppsArgs,
}

#[derive(Debug, Subcommand)]
pub enum AppsAction {
    /// Fit the logistic volume curve to a CSV of points.
    FitLogistic(FitArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AppsArgs {
    #[arg(long, default_value = "bv,hs,hamsim,ghz")]
    pub algos: String,
    /// Inclusive range `a..b` or comma list; unsupported sizes are skipped.
    #[arg(long, default_value = "2..6")]
    pub sizes: String,
    #[arg(long, default_value_t = 10)]
    pub ncircs: usize,
    #[arg(long, default_value_t = 1)]
    pub nparams: usize,
    #[arg(long, default_value_t = 1000)]
    pub shots: u64,
    #[arg(long, default_value_t = 4)]
    pub qv_log2: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// CSV with `x,y` or `normalized_volume,F_mean` columns.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum StatsCommand {
    /// Pass probability against true heavy-output probability.
    Curves(CurvesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResampleArg {
    Circuit,
    Shot,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CurvesArgs {
    #[arg(long, default_value = "100,200,1000")]
    pub nc: String,
    #[arg(long, default_value_t = 100)]
    pub ns: u64,
    #[arg(long, default_value = "0.60:0.75:0.0025")]
    pub pgrid: String,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 100)]
    pub resamples: usize,
    #[arg(long, value_enum, default_value = "circuit")]
    pub resampling: ResampleArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV path. Defaults to `curves.csv` in the output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// JSON report path. Defaults to `stats.json` in the output directory.
    #[arg(long)]
    #[serde(skip)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PecArgs {
    /// Circuit JSON file. Defaults to a chain of `--depth` X gates on one qubit.
    #[arg(long)]
    pub circuit: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
    /// Single-qubit depolarizing probability; overrides `p1` of `--noise`.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, default_value = "Z")]
    pub observable: String,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[arg(long, default_value_t = 100)]
    pub shots: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Subcommand)]
pub enum ReportCommand {
    /// Check a report against the published schema.
    Validate { path: PathBuf },
    /// Write one CSV per series of a report.
    Curves {
        path: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// Files written by a run and a one-line summary.
#[derive(Debug, Default)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    pub summary: String,
}

/// Write via a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

fn load_noise(spec: &str) -> anyhow::Result<NoiseModel> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {spec}"))?;
        return Ok(NoiseModel::from_json(&text)?);
    }
    Ok(NoiseModel::preset(spec)?)
}

fn parse_pipeline(spec: &str) -> anyhow::Result<Pipeline> {
    spec.parse::<Pipeline>().with_context(|| format!("invalid argument `pipeline`: `{spec}`"))
}

/// `a..b` (inclusive) or a comma list.
pub fn parse_sizes(spec: &str, name: &str) -> anyhow::Result<Vec<usize>> {
    let bad = || anyhow!("invalid argument `{name}`: expected `a..b` or a comma list, got `{spec}`");
    if let Some((a, b)) = spec.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    spec.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

fn config_value<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).expect("arguments serialize")
}

fn emit(report: BenchmarkReport, common: &Common) -> anyhow::Result<Outcome> {
    report.validate()?;
    let path = common
        .out
        .clone()
        .unwrap_or_else(|| out_dir().join(format!("{}.json", report.benchmark)));
    write_atomic(&path, &report.to_json())?;
    let mut written = vec![path];
    if let Some(dir) = &common.csv_dir {
        written.extend(write_curves(&report.to_value(), dir)?);
    }
    Ok(Outcome {
        written,
        summary: format!("{} [{}]", report.benchmark, serde_json::to_value(report.status)?.as_str().unwrap_or("")),
    })
}

fn write_curves(report: &Value, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    report::emit_curves(report)?
        .into_iter()
        .map(|(name, csv)| {
            let path = dir.join(format!("{name}.csv"));
            write_atomic(&path, &csv)?;
            Ok(path)
        })
        .collect()
}

fn series_map(series: Vec<(&str, Series)>) -> Value {
    Value::Object(series.into_iter().map(|(k, s)| (k.to_string(), json!(s))).collect())
}

fn run_qv(args: &QvArgs) -> anyhow::Result<Outcome> {
    let nm = load_noise(&args.common.noise)?;
    let pipeline = parse_pipeline(&args.common.pipeline)?;
    let cfg = QvConfig {
        m: args.width,
        n_c: args.circuits,
        n_s: args.shots,
        seed: args.common.seed,
    };
    let run = qv::run_qv(&cfg, &nm, &pipeline, &Executor::new())?;
    let mut hop = Series::new(&["circuit", "heavy_count", "hop"]);
    for (i, &h) in run.result.heavy_counts.iter().enumerate() {
        hop.push(vec![json!(i), json!(h), json!(h as f64 / args.shots as f64)]);
    }
    let mut metrics = json!(run.result);
    metrics["series"] = series_map(vec![("hop", hop)]);
    let report = BenchmarkReport::new(
        "qv",
        Status::Benchmark,
        config_value(args),
        args.common.seed,
        metrics,
        run.manifest,
        run.ledger,
    );
    emit(report, &args.common)
}

fn run_scan_qv(args: &ScanQvArgs) -> anyhow::Result<Outcome> {
    let nm = load_noise(&args.common.noise)?;
    let pipeline = parse_pipeline(&args.common.pipeline)?;
    let widths = parse_sizes(&args.widths, "widths")?;
    let (lo, hi) = (widths[0], *widths.last().expect("nonempty"));
    let template = QvConfig {
        m: lo,
        n_c: args.circuits,
        n_s: args.shots,
        seed: args.common.seed,
    };
    let scan = qv::scan_volume(lo..=hi, &template, &nm, &pipeline, &Executor::new())?;
    let mut series = Series::new(&["m", "hop_mean", "lower_bound", "passed"]);
    for r in &scan.results {
        series.push(vec![json!(r.m), json!(r.hop_mean), json!(r.lower_bound), json!(r.passed)]);
    }
    let metrics = json!({
        "log2_vq": scan.log2_vq,
        "quantum_volume": scan.log2_vq.map(|m| 1u64 << m),
        "widths": scan.results.iter().map(|r| json!({
            "m": r.m, "n_h": r.n_h, "hop_mean": r.hop_mean,
            "lower_bound": r.lower_bound, "passed": r.passed,
        })).collect::<Vec<_>>(),
        "series": series_map(vec![("scan", series)]),
    });
    let report = BenchmarkReport::new(
        "scan-qv",
        Status::Benchmark,
        config_value(args),
        args.common.seed,
        metrics,
        scan.manifest,
        scan.ledger,
    );
    emit(report, &args.common)
}

fn run_mirror_qv(args: &MirrorQvArgs) -> anyhow::Result<Outcome> {
    let nm = load_noise(&args.common.noise)?;
    let pipeline = parse_pipeline(&args.common.pipeline)?;
    let cfg = MirrorQvConfig {
        n_c: args.circuits,
        n_s: args.shots,
        pauli_twirl: args.twirl,
        ..MirrorQvConfig::new(args.width, args.common.seed)
    };
    let run = mirror::run_mirror_qv(&cfg, &nm, &pipeline, &Executor::new())?;
    let mut s = Series::new(&["circuit", "success"]);
    for (i, v) in run.result.success.iter().enumerate() {
        s.push(vec![json!(i), json!(v)]);
    }
    let mut metrics = json!(run.result);
    metrics["series"] = series_map(vec![("success", s)]);
    let report = BenchmarkReport::new(
        "mirror-qv",
        Status::Benchmark,
        config_value(args),
        args.common.seed,
        metrics,
        run.manifest,
        run.ledger,
    );
    emit(report, &args.common)
}

fn run_mirror_rb(args: &MirrorRbArgs) -> anyhow::Result<Outcome> {
    let nm = load_noise(&args.common.noise)?;
    let mut pipeline = parse_pipeline(&args.common.pipeline)?;
    if args.dd == Switch::On && !pipeline.has("dd") {
        let mut t = pipeline.techniques().to_vec();
        t.push(Technique::Dd);
        pipeline = Pipeline::new(t)?;
    }
    let cfg = MirrorRbConfig {
        widths: parse_sizes(&args.widths, "widths")?,
        depths: parse_sizes(&args.depths, "depths")?,
        density: args.density,
        circuits: args.circuits,
        shots: args.shots,
        pauli_twirl: args.twirl,
        seed: args.common.seed,
    };
    let run = mirror::run_mirror_rb(&cfg, &nm, &pipeline, &Executor::new())?;
    let mut points = Series::new(&["width", "depth", "s"]);
    for p in &run.result.points {
        points.push(vec![json!(p.width), json!(p.depth), json!(p.s)]);
    }
    let mut fits = Series::new(&["width", "p", "eps_layer", "eps_qubit"]);
    for f in &run.result.fits {
        fits.push(vec![json!(f.width), json!(f.p), json!(f.eps_layer), json!(f.eps_qubit)]);
    }
    let mut metrics = json!(run.result);
    metrics["series"] = series_map(vec![("points", points), ("fits", fits)]);
    let report = BenchmarkReport::new(
        "mirror-rb",
        Status::Benchmark,
        config_value(args),
        args.common.seed,
        metrics,
        run.manifest,
        run.ledger,
    );
    emit(report, &args.common)
}

/// Passing width recorded in a qv or scan-qv report.
fn layers_from_report(path: &Path) -> anyhow::Result<usize> {
    let v: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    let m = &v["metrics"];
    let layers = match v["benchmark"].as_str() {
        Some("scan-qv") => m["log2_vq"].as_u64(),
        Some("qv") if m["passed"].as_bool() == Some(true) => m["m"].as_u64(),
        _ => None,
    };
    layers
        .map(|l| l as usize)
        .ok_or_else(|| anyhow!("{} records no passed quantum volume", path.display()))
}

fn run_clops(args: &ClopsArgs) -> anyhow::Result<Outcome> {
    let nm = load_noise(&args.common.noise)?;
    let pipeline = parse_pipeline(&args.common.pipeline)?;
    if !pipeline.is_empty() {
        bail!("invalid argument `pipeline`: clops runs templates as compiled");
    }
    let d = match (args.layers, &args.from_report) {
        (Some(d), _) => d,
        (None, Some(p)) => layers_from_report(p)?,
        (None, None) => bail!("invalid argument `layers`: give --layers or --from-report"),
    };
    let latency = match &args.latency {
        Some(p) => LatencyModel::from_json(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => LatencyModel::default(),
    };
    let cfg = ClopsConfig {
        m: args.templates,
        k: args.updates,
        s: args.shots,
        d,
        seed: args.common.seed,
    };
    let clock = match args.clock {
        Clock::Virtual => ClockMode::Virtual,
        Clock::Wall => ClockMode::Wall,
    };
    let executor = Executor::new();
    let result = clops::run_clops(&cfg, &latency, clock, &nm, &executor)?;
    let mut ledger = OverheadLedger::new();
    let circuits = (cfg.m * cfg.k) as u64;
    ledger.record_base(circuits, circuits * cfg.s);
    ledger.reconcile(&executor.stats())?;
    let mut s = Series::new(&["iteration", "latency", "simulation", "total"]);
    for it in &result.iterations {
        s.push(vec![json!(it.iteration), json!(it.latency), json!(it.simulation), json!(it.total)]);
    }
    let mut metrics = json!(result);
    if clock == ClockMode::Virtual {
        // Keep virtual-clock reports reproducible.
        for it in metrics["iterations"].as_array_mut().expect("array") {
            it["simulation"] = json!(0.0);
        }
        s.rows.iter_mut().for_each(|r| r[2] = json!(0.0));
    }
    metrics["series"] = series_map(vec![("iterations", s)]);
    let report = BenchmarkReport::new(
        "clops",
        Status::Benchmark,
        config_value(args),
        args.common.seed,
        metrics,
        pipeline.manifest(),
        ledger,
    );
    emit(report, &args.common)
}

fn run_apps(args: &AppsArgs) -> anyhow::Result<Outcome> {
    let nm = load_noise(&args.common.noise)?;
    let pipeline = parse_pipeline(&args.common.pipeline)?;
    let algos: Vec<Algorithm> = args.algos.split(',').map(|a| a.parse()).collect::<Result<_, _>>()?;
    let sizes = parse_sizes(&args.sizes, "sizes")?;
    let specs: Vec<AppSpec> = algos
        .iter()
        .flat_map(|&a| sizes.iter().map(move |&n| (a, n)))
        .filter(|(a, n)| a.supports(*n))
        .map(|(a, n)| AppSpec {
            n_params: args.nparams,
            ..AppSpec::new(a, n, args.ncircs, args.common.seed)
        })
        .collect();
    if specs.is_empty() {
        bail!("invalid argument `sizes`: no algorithm supports any requested size");
    }
    let cfg = SuiteConfig {
        shots: args.shots,
        qv_log2: args.qv_log2,
        seed: args.common.seed,
    };
    let run = apps::run_suite(&specs, &nm, &pipeline, &Executor::new(), &cfg)?;
    let mut table = Series::new(&["algorithm", "n", "F_mean", "F_std", "normalized_volume"]);
    for p in &run.points {
        table.push(vec![
            json!(p.algorithm.name()),
            json!(p.n),
            json!(p.f_mean),
            json!(p.f_std),
            json!(p.normalized_volume),
        ]);
    }
    let mut volume = Series::new(&["x", "y", "pipeline"]);
    for v in &run.volume_points {
        volume.push(vec![json!(v.x), json!(v.y), json!(v.pipeline)]);
    }
    let metrics = json!({
        "points": run.points,
        "series": series_map(vec![("apps", table), ("volume", volume)]),
    });
    let report = BenchmarkReport::new(
        "apps",
        Status::Diagnostic,
        config_value(args),
        args.common.seed,
        metrics,
        run.manifest,
        run.ledger,
    );
    emit(report, &args.common)
}

fn read_points(path: &Path) -> anyhow::Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or_else(|| anyhow!("{} is empty", path.display()))?.split(',').collect();
    let col = |names: &[&str]| header.iter().position(|h| names.contains(&h.trim()));
    let (xi, yi) = match (col(&["x", "normalized_volume"]), col(&["y", "F_mean"])) {
        (Some(x), Some(y)) => (x, y),
        _ => bail!("invalid argument `in`: need x,y or normalized_volume,F_mean columns"),
    };
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let get = |i: usize| -> anyhow::Result<f64> {
                f.get(i).ok_or_else(|| anyhow!("short row `{l}`"))?.trim().parse().with_context(|| format!("row `{l}`"))
            };
            Ok((get(xi)?, get(yi)?))
        })
        .collect()
}

fn run_fit(args: &FitArgs) -> anyhow::Result<Outcome> {
    let fit = apps::fit_logistic(&read_points(&args.input)?)?;
    let text = format!("{}\n", serde_json::to_string_pretty(&fit)?);
    let mut written = Vec::new();
    if let Some(p) = &args.out {
        write_atomic(p, &text)?;
        written.push(p.clone());
    }
    Ok(Outcome {
        written,
        summary: text.trim_end().to_string(),
    })
}

fn run_curves(args: &CurvesArgs) -> anyhow::Result<Outcome> {
    let cfg = CurveConfig {
        p_grid: stats::parse_grid(&args.pgrid)?,
        n_c: parse_sizes(&args.nc, "nc")?,
        n_s: args.ns,
        trials: args.trials,
        resamples: args.resamples,
        resampling: match args.resampling {
            ResampleArg::Circuit => Resampling::Circuit,
            ResampleArg::Shot => Resampling::Shot,
        },
        seed: args.seed,
    };
    let curves = stats::failure_curves(&cfg)?;
    let series = stats::curves_series(&curves);
    let csv_path = args.out.clone().unwrap_or_else(|| out_dir().join("curves.csv"));
    write_atomic(&csv_path, &series.to_csv()?)?;
    let metrics = json!({
        "curves": curves,
        "series": series_map(vec![("curves", series)]),
    });
    let report = BenchmarkReport::new(
        "stats",
        Status::Benchmark,
        config_value(args),
        args.seed,
        metrics,
        Pipeline::empty().manifest(),
        OverheadLedger::new(),
    );
    report.validate()?;
    let json_path = args.report.clone().unwrap_or_else(|| out_dir().join("stats.json"));
    write_atomic(&json_path, &report.to_json())?;
    Ok(Outcome {
        written: vec![csv_path, json_path],
        summary: format!("stats [{} curves]", curves.len()),
    })
}

fn run_pec(args: &PecArgs) -> anyhow::Result<Outcome> {
    let mut nm = load_noise(&args.common.noise)?;
    if let Some(p) = args.p {
        nm.p1 = p;
        nm.validate()?;
    }
    let pipeline = parse_pipeline(&args.common.pipeline)?;
    let c = match &args.circuit {
        Some(p) => serde_json::from_str::<Circuit>(&fs::read_to_string(p)?)?,
        None => {
            let mut c = Circuit::new(1);
            for _ in 0..args.depth {
                c.push(vec![Gate::x(0)])?;
            }
            c
        }
    };
    let observable = PauliString::parse(&args.observable)?;
    let cfg = PecConfig {
        samples: args.samples,
        shots_per_sample: args.shots,
        gamma_cap: pipeline.gamma_cap().unwrap_or(qbench::opt::DEFAULT_GAMMA_CAP),
        seed: args.common.seed,
    };
    let executor = Executor::new();
    let est = pec_expectation(&c, &observable, &nm, &cfg, &executor)?;
    let mut ledger = OverheadLedger::new();
    ledger.record("pec", est.circuits, est.shots);
    ledger.note_multiplier("pec", est.multiplier);
    ledger.reconcile(&executor.stats())?;
    let manifest = if pipeline.has("pec") {
        pipeline.manifest()
    } else {
        let mut t = pipeline.techniques().to_vec();
        t.push(Technique::Pec { gamma_cap: cfg.gamma_cap });
        Pipeline::new(t)?.manifest()
    };
    let report = BenchmarkReport::new(
        "pec",
        Status::Diagnostic,
        config_value(args),
        args.common.seed,
        json!(est),
        manifest,
        ledger,
    );
    emit(report, &args.common)
}

fn run_report(cmd: &ReportCommand) -> anyhow::Result<Outcome> {
    let read = |p: &Path| -> anyhow::Result<Value> {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        Ok(serde_json::from_str(&text)?)
    };
    match cmd {
        ReportCommand::Validate { path } => {
            report::validate_report(&read(path)?)?;
            Ok(Outcome {
                written: Vec::new(),
                summary: format!("{}: valid", path.display()),
            })
        }
        ReportCommand::Curves { path, out_dir: dir } => {
            let dir = dir.clone().unwrap_or_else(out_dir);
            let written = write_curves(&read(path)?, &dir)?;
            Ok(Outcome {
                summary: format!("{} series", written.len()),
                written,
            })
        }
    }
}

/// Execute one parsed command line.
pub fn run(config: &RunConfig) -> anyhow::Result<Outcome> {
    if config.threads > 0 {
        // Only the first call in a process can size the global pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(config.threads).build_global();
    }
    match &config.command {
        Command::Qv(a) => run_qv(a),
        Command::ScanQv(a) => run_scan_qv(a),
        Command::MirrorQv(a) => run_mirror_qv(a),
        Command::MirrorRb(a) => run_mirror_rb(a),
        Command::Clops(a) => run_clops(a),
        Command::Apps(AppsCommand { action: Some(AppsAction::FitLogistic(f)), .. }) => run_fit(f),
        Command::Apps(AppsCommand { action: None, run }) => run_apps(run),
        Command::Stats(StatsCommand::Curves(a)) => run_curves(a),
        Command::Pec(a) => run_pec(a),
        Command::Report(r) => run_report(r),
    }
}

/// Process exit code for an error: 3 for rule violations, 2 for anything
/// else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<qbench::Error>() {
        Some(qbench::Error::RuleViolation { .. }) => 3,
        _ => 2,
    }
}
