mod render;

use std::collections::BTreeSet;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use pnp_core::engine::Trace;
use pnp_core::metrics::{self, RunReport};
use pnp_core::scenario::{self, MetricsConfig, ScenarioConfig, Severity};

use render::{Layer, RenderSpec};

/// Default output directory when `-o` is not given.
const OUT_ENV: &str = "PNP_OUT_DIR";

#[derive(Parser)]
#[command(name = "pnp", version, about = "Self-deployment of mobile sensors over a hexagonal tiling")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a preset or a config file over one or more seeds and sizes.
    Run(RunArgs),
    /// Draw SVG panels of a recorded trace.
    Render(RenderArgs),
    /// Recompute the metrics of a recorded trace.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// One of random80, boundary80, center80, narrows.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// TOML scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sensor count, or an inclusive sweep `lo..hi:step`.
    #[arg(long)]
    n: Option<String>,
    /// Run this single seed.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Run seeds 1 through this count.
    #[arg(long)]
    seeds: Option<u64>,
    /// Output directory [default: $PNP_OUT_DIR or ./out].
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Exit 0 even if some run never goes quiet.
    #[arg(long)]
    allow_nonterm: bool,
    /// SVG panels written per run, evenly spaced over the trace.
    #[arg(long, default_value_t = 4)]
    panels: usize,
    /// Parallel runs [default: available cores].
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    max_time: Option<f64>,
}

#[derive(Args)]
struct RenderArgs {
    trace: PathBuf,
    /// Comma-separated instants in seconds.
    #[arg(long, value_delimiter = ',', conflicts_with = "panels")]
    times: Vec<f64>,
    /// Evenly spaced panels from start to end.
    #[arg(long)]
    panels: Option<usize>,
    #[arg(long, default_value_t = 800)]
    width: u32,
    #[arg(long, value_delimiter = ',', value_enum, default_values_t = Layer::ALL)]
    layers: Vec<Layer>,
    /// Output directory [default: $PNP_OUT_DIR or ./out].
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    trace: PathBuf,
    #[arg(long)]
    coverage_threshold: Option<f64>,
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long)]
    quiescence_window: Option<f64>,
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// `150`, or `150..300:50` for 150, 200, 250, 300.
fn parse_sizes(s: &str) -> Result<Vec<usize>, String> {
    let bad = || format!("invalid --n `{s}`: expected N or LO..HI:STEP");
    let Some((range, step)) = s.split_once(':').or_else(|| s.contains("..").then_some((s, "1"))) else {
        return s.parse().map(|n| vec![n]).map_err(|_| bad());
    };
    let (lo, hi) = range.split_once("..").ok_or_else(bad)?;
    let (lo, hi, step): (usize, usize, usize) = (
        lo.parse().map_err(|_| bad())?,
        hi.parse().map_err(|_| bad())?,
        step.parse().map_err(|_| bad())?,
    );
    if step == 0 || lo > hi {
        return Err(bad());
    }
    Ok((lo..=hi).step_by(step).collect())
}

fn err(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

struct Job {
    n: usize,
    seed: u64,
}

fn cmd_run(a: RunArgs) -> ExitCode {
    let (base, label) = match (&a.preset, &a.config) {
        (Some(p), _) => match ScenarioConfig::preset(p, 150) {
            Ok(c) => (c, p.clone()),
            Err(e) => return err(e),
        },
        (None, Some(path)) => match scenario::load_config(path) {
            Ok((c, diags)) => {
                for d in &diags {
                    eprintln!("{}: {d}", path.display());
                }
                let stem = path.file_stem().map_or("config".into(), |s| s.to_string_lossy().into_owned());
                (c, stem)
            }
            Err(e) => return err(e),
        },
        (None, None) => unreachable!("clap requires one of --preset/--config"),
    };
    let sizes = match &a.n {
        Some(s) => match parse_sizes(s) {
            Ok(v) => v,
            Err(e) => return err(e),
        },
        None => vec![base.n_sensors],
    };
    let seeds: Vec<u64> = match (a.seed, a.seeds) {
        (Some(s), _) => vec![s],
        (None, Some(k)) => (1..=k).collect(),
        (None, None) => base.seeds.clone(),
    };
    let mut base = base;
    if let Some(t) = a.max_time {
        base.max_time = t;
    }
    for &n in &sizes {
        let mut c = base.clone();
        c.n_sensors = n;
        let diags = c.validate();
        let errors: Vec<_> = diags.iter().filter(|d| d.severity == Severity::Error).collect();
        if !errors.is_empty() {
            for d in errors {
                eprintln!("n = {n}: {d}");
            }
            return ExitCode::from(2);
        }
    }

    let out = out_dir(a.out);
    if let Err(e) = fs::create_dir_all(&out) {
        return err(format!("{}: {e}", out.display()));
    }
    let jobs: Vec<Job> = sizes
        .iter()
        .flat_map(|&n| seeds.iter().map(move |&seed| Job { n, seed }))
        .collect();
    let workers = a
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, jobs.len().max(1));
    let next = Mutex::new(0usize);
    let results: Mutex<Vec<Option<Result<RunReport, String>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = {
                    let mut g = next.lock().unwrap();
                    let i = *g;
                    *g += 1;
                    i
                };
                let Some(job) = jobs.get(i) else { break };
                let mut cfg = base.clone();
                cfg.n_sensors = job.n;
                let dir = out.join(format!("{label}-n{}-s{}", job.n, job.seed));
                let r = run_one(&cfg, job.seed, &dir, a.panels);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });

    let mut reports = Vec::new();
    let mut failed = false;
    for (job, r) in jobs.iter().zip(results.into_inner().unwrap()) {
        match r.expect("every job ran") {
            Ok(rep) => {
                println!(
                    "n={} seed={} coverage={:.4} termination={} messages/sensor={:.1}",
                    job.n,
                    job.seed,
                    rep.final_coverage,
                    rep.termination_time.map_or("none".into(), |t| format!("{t:.1}")),
                    rep.messages_per_sensor
                );
                reports.push(rep);
            }
            Err(e) => {
                eprintln!("n={} seed={}: {e}", job.n, job.seed);
                failed = true;
            }
        }
    }
    let table = out.join("aggregate.csv");
    if let Err(e) = fs::write(&table, metrics::csv_table(&reports)) {
        return err(format!("{}: {e}", table.display()));
    }
    if failed {
        return ExitCode::from(2);
    }
    let nonterm = reports.iter().filter(|r| !r.terminated()).count();
    if nonterm > 0 && !a.allow_nonterm {
        eprintln!("{nonterm} run(s) did not terminate");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}

/// Simulate once and write the trace, the report and the panels to `dir`.
fn run_one(cfg: &ScenarioConfig, seed: u64, dir: &Path, panels: usize) -> Result<RunReport, String> {
    let io = |p: &Path, e: std::io::Error| format!("{}: {e}", p.display());
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let trace = scenario::run(cfg, seed).map_err(|e| e.to_string())?;
    let rep = metrics::report(&trace, &cfg.metrics);
    let p = dir.join("trace.jsonl");
    let f = fs::File::create(&p).map_err(|e| io(&p, e))?;
    trace
        .write_jsonl(std::io::BufWriter::new(f))
        .map_err(|e| io(&p, e))?;
    let p = dir.join("report.json");
    let json = serde_json::to_string_pretty(&rep).expect("report serializes");
    fs::write(&p, json + "\n").map_err(|e| io(&p, e))?;
    if panels > 0 {
        let spec = RenderSpec {
            times: render::even_times(&trace, panels),
            width: 800,
            layers: Layer::ALL.into_iter().collect(),
        };
        write_panels(&trace, &spec, dir)?;
    }
    Ok(rep)
}

fn write_panels(trace: &Trace, spec: &RenderSpec, dir: &Path) -> Result<(), String> {
    let svgs = render::render(trace, spec).map_err(|e| e.to_string())?;
    for (i, (svg, t)) in svgs.iter().zip(&spec.times).enumerate() {
        let p = dir.join(format!("snapshot-{i:02}-t{t:.0}.svg"));
        fs::write(&p, svg).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    Ok(())
}

fn read_trace(path: &Path) -> Result<Trace, String> {
    let f = fs::File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Trace::read_jsonl(BufReader::new(f)).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_render(a: RenderArgs) -> ExitCode {
    let trace = match read_trace(&a.trace) {
        Ok(t) => t,
        Err(e) => return err(e),
    };
    let times = match a.panels {
        Some(k) => render::even_times(&trace, k),
        None => a.times,
    };
    let spec = RenderSpec {
        times,
        width: a.width,
        layers: a.layers.into_iter().collect::<BTreeSet<_>>(),
    };
    let out = out_dir(a.out);
    if let Err(e) = fs::create_dir_all(&out) {
        return err(format!("{}: {e}", out.display()));
    }
    match write_panels(&trace, &spec, &out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => err(e),
    }
}

fn cmd_report(a: ReportArgs) -> ExitCode {
    let trace = match read_trace(&a.trace) {
        Ok(t) => t,
        Err(e) => return err(e),
    };
    let mut m = MetricsConfig::default();
    if let Some(v) = a.coverage_threshold {
        m.coverage_threshold = v;
    }
    if let Some(v) = a.resolution {
        m.resolution = v;
    }
    if let Some(v) = a.quiescence_window {
        m.quiescence_window = v;
    }
    let rep = metrics::report(&trace, &m);
    println!("{}", serde_json::to_string_pretty(&rep).expect("report serializes"));
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Render(a) => cmd_render(a),
        Cmd::Report(a) => cmd_report(a),
    }
}
