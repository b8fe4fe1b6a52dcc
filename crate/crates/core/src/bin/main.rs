#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rwm_meanfield::analysis::build_report;
use rwm_meanfield::benchmark::{determinism_criterion, run_benchmark, BenchmarkConfig};
use rwm_meanfield::chain::{run_replicas, ChainConfig, InitialDistribution};
use rwm_meanfield::closed_forms::oracle::identity_suite;
use rwm_meanfield::closed_forms::ScalingParams;
use rwm_meanfield::gaussian_ode::integrate_moment_ode;
use rwm_meanfield::io::{
    chain_table, fmt_f64, limit_table, marginals_table, ode_table, parse_chain, parse_limit, report_table, CsvTable,
    Manifest,
};
use rwm_meanfield::limit::{run_ensemble, EnsembleConfig};
use rwm_meanfield::potentials::Potential;
use rwm_meanfield::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "rwm-meanfield", version, about = "Random walk Metropolis in high dimension and its mean-field limit")]
struct Cli {
    /// Worker threads; defaults to all cores. Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Flat `key=value` file; flags on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo check of the closed-form Gaussian expectations.
    VerifyClosedForms(VerifyArgs),
    /// Run independent replicas of the random walk Metropolis chain.
    RunChain(ChainArgs),
    /// Simulate the mean-field limit with an interacting particle ensemble.
    RunLimit(LimitArgs),
    /// Integrate the second-moment ODE for the Gaussian target.
    GaussianOde(OdeArgs),
    /// Compare a chain CSV with a limit CSV.
    Compare(CompareArgs),
    /// Run the full benchmark and report each acceptance criterion.
    FullBenchmark(BenchArgs),
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Parameter draws per identity.
    #[arg(long, default_value_t = 20)]
    draws: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct ChainArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2.38)]
    l: f64,
    #[arg(long)]
    steps: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "gaussian:1")]
    potential: String,
    #[arg(long, default_value = "stationary")]
    init: String,
    /// Comma-separated record times in units of n steps.
    #[arg(long, value_delimiter = ',', required = true)]
    record: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    replicas: u64,
    /// Leading components stored per record.
    #[arg(long, default_value_t = 1)]
    components: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct LimitArgs {
    #[arg(long)]
    particles: usize,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long)]
    horizon: f64,
    #[arg(long, default_value_t = 2.38)]
    l: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "gaussian:1")]
    potential: String,
    #[arg(long, default_value = "stationary")]
    init: String,
    /// Draw the initial ensemble from shuffled quantiles instead of i.i.d.
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    stratified: bool,
    /// Comma-separated snapshot times for the marginal dump.
    #[arg(long, value_delimiter = ',')]
    record: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Marginal samples `(t, particle, x)` at every record time.
    #[arg(long)]
    marginals: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct OdeArgs {
    #[arg(long)]
    m0: f64,
    #[arg(long, default_value_t = 2.38)]
    l: f64,
    #[arg(long)]
    horizon: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct CompareArgs {
    #[arg(long)]
    chain: PathBuf,
    #[arg(long)]
    limit: PathBuf,
    /// Marginal dump of the limit run; enables the W₁ column.
    #[arg(long)]
    marginals: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct BenchArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Directory receiving every benchmark CSV.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Reduced sizes for smoke testing; statistical criteria may fail.
    #[arg(long, default_value_t = false)]
    quick: bool,
}

fn emit(table: &CsvTable, out: Option<&Path>) -> Result<()> {
    let bytes = table.to_bytes()?;
    match out {
        Some(p) => fs::write(p, bytes)?,
        None => std::io::stdout().lock().write_all(&bytes)?,
    }
    Ok(())
}

fn join(ts: &[f64]) -> String {
    ts.iter().map(|t| fmt_f64(*t)).collect::<Vec<_>>().join(",")
}

fn read_csv(path: &Path) -> Result<CsvTable> {
    CsvTable::read(path).map_err(|e| match e {
        Error::Io(io) => Error::InvalidParameter(format!("cannot read {}: {io}", path.display())),
        other => other,
    })
}

fn verify(a: &VerifyArgs) -> Result<bool> {
    let rows = identity_suite(a.draws, a.samples, a.seed)?;
    let m = Manifest::new("verify-closed-forms").with("samples", a.samples).with("seed", a.seed).with("draws", a.draws);
    let mut t = CsvTable::new(m, &["identity", "params", "closed_form", "mc_mean", "mc_se", "z_score"]);
    for r in &rows {
        t.push(vec![
            r.identity.name().into(),
            r.params_string(),
            fmt_f64(r.closed_form),
            fmt_f64(r.mc.mean),
            fmt_f64(r.mc.se),
            fmt_f64(r.z_score()),
        ]);
    }
    emit(&t, a.out.as_deref())?;
    let bad = rows.iter().filter(|r| !(r.z_score().abs() <= 3.0)).count();
    eprintln!("{} identity checks, {bad} beyond 3 standard errors", rows.len());
    Ok(bad == 0)
}

fn run_chain(a: &ChainArgs) -> Result<bool> {
    let p = Potential::parse(&a.potential)?;
    let cfg = ChainConfig {
        n: a.n,
        l: a.l,
        steps: a.steps,
        seed: a.seed,
        init: InitialDistribution::parse(&a.init)?,
        keep_components: a.components,
    };
    let trs = run_replicas(&cfg, &p, &a.record, a.replicas)?;
    let m = Manifest::new("run-chain")
        .with("n", a.n)
        .with("l", fmt_f64(a.l))
        .with("steps", a.steps)
        .with("seed", a.seed)
        .with("potential", &a.potential)
        .with("init", &cfg.init)
        .with("record", join(&a.record))
        .with("replicas", a.replicas)
        .with("components", a.components);
    emit(&chain_table(m, &trs), a.out.as_deref())?;
    let acc: f64 = trs.iter().map(|t| t.acceptance_rate()).sum::<f64>() / trs.len() as f64;
    eprintln!("mean acceptance rate {acc:.4}");
    Ok(true)
}

fn run_limit(a: &LimitArgs) -> Result<bool> {
    let p = Potential::parse(&a.potential)?;
    let cfg = EnsembleConfig {
        n_particles: a.particles,
        dt: a.dt,
        horizon: a.horizon,
        l: a.l,
        seed: a.seed,
        init: InitialDistribution::parse(&a.init)?,
        stratified_init: a.stratified,
    };
    let run = run_ensemble(&cfg, &p, &a.record)?;
    let m = Manifest::new("run-limit")
        .with("particles", a.particles)
        .with("dt", fmt_f64(a.dt))
        .with("horizon", fmt_f64(a.horizon))
        .with("l", fmt_f64(a.l))
        .with("seed", a.seed)
        .with("potential", &a.potential)
        .with("init", &cfg.init)
        .with("stratified", a.stratified)
        .with("record", join(&a.record));
    emit(&limit_table(m.clone(), &run.history), a.out.as_deref())?;
    if let Some(path) = &a.marginals {
        marginals_table(m.with("artifact", "marginals"), &run.snapshots).write(path)?;
    }
    Ok(true)
}

fn gaussian_ode(a: &OdeArgs) -> Result<bool> {
    let curve = integrate_moment_ode(a.m0, a.l, a.horizon, a.dt)?;
    let m = Manifest::new("gaussian-ode")
        .with("m0", fmt_f64(a.m0))
        .with("l", fmt_f64(a.l))
        .with("horizon", fmt_f64(a.horizon))
        .with("dt", fmt_f64(a.dt))
        .with("err_estimate", fmt_f64(curve.err_estimate));
    emit(&ode_table(m, &curve), a.out.as_deref())?;
    Ok(true)
}

fn compare(a: &CompareArgs) -> Result<bool> {
    let chain_csv = read_csv(&a.chain)?;
    let limit_csv = read_csv(&a.limit)?;
    let marg_csv = a.marginals.as_deref().map(read_csv).transpose()?;
    let l = limit_csv.manifest.get_f64("l")?;
    if let Ok(lc) = chain_csv.manifest.get_f64("l") {
        if lc != l {
            return Err(Error::InvalidParameter(format!("chain uses l={lc} but limit uses l={l}")));
        }
    }
    let chain = parse_chain(&chain_csv)?;
    let limit = parse_limit(&limit_csv, marg_csv.as_ref())?;
    let mut meta = vec![("l".to_string(), fmt_f64(l))];
    for (src, m) in [("chain", &chain_csv.manifest), ("limit", &limit_csv.manifest)] {
        for (k, v) in &m.entries {
            if k != "subcommand" && k != "version" {
                meta.push((format!("{src}_{k}"), v.clone()));
            }
        }
    }
    let rep = build_report(&chain, &limit, ScalingParams::new(l)?, meta)?;
    emit(&report_table(Manifest::new("compare"), &rep), a.out.as_deref())?;
    eprintln!("sup |acc_emp - acc_pred| = {:.4}", rep.sup_acc_error());
    Ok(true)
}

fn full_benchmark(a: &BenchArgs, threads: usize) -> Result<bool> {
    let cfg = if a.quick {
        BenchmarkConfig::quick(a.seed)
    } else {
        BenchmarkConfig { seed: a.seed, ..BenchmarkConfig::default() }
    };
    let start = Instant::now();
    let out = run_benchmark(&cfg)?;
    eprintln!("benchmark finished in {:.1}s on {threads} thread(s)", start.elapsed().as_secs_f64());
    // Same configuration on a different thread count must give the same bytes.
    let other = if threads == 1 { 2 } else { 1 };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(other)
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let start = Instant::now();
    let rerun = pool.install(|| run_benchmark(&cfg))?;
    eprintln!("rerun finished in {:.1}s on {other} thread(s)", start.elapsed().as_secs_f64());
    let mut criteria = out.criteria.clone();
    criteria.push(determinism_criterion(&out, &rerun, &format!("{threads} vs {other} threads")));
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir)?;
        for (name, bytes) in &out.files {
            fs::write(dir.join(name), bytes)?;
        }
    }
    for c in &criteria {
        println!("{}", c.line());
    }
    Ok(criteria.iter().all(|c| c.passed()))
}

/// Expands `--config` into flags placed right after the subcommand, so that
/// flags given on the command line override the file.
fn expand_config(args: Vec<OsString>) -> std::result::Result<Vec<OsString>, String> {
    let pos = args.iter().position(|a| a == "--config" || a.to_string_lossy().starts_with("--config="));
    let Some(pos) = pos else { return Ok(args) };
    let (path, used) = match args[pos].to_string_lossy().strip_prefix("--config=") {
        Some(p) => (PathBuf::from(p), 1),
        None => match args.get(pos + 1) {
            Some(p) => (PathBuf::from(p), 2),
            None => return Err("--config requires a path".into()),
        },
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut flags = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("{}:{}: expected key=value", path.display(), i + 1))?;
        flags.push(OsString::from(format!("--{}", k.trim().replace('_', "-"))));
        flags.push(OsString::from(v.trim()));
    }
    let mut rest: Vec<OsString> = args[..pos].to_vec();
    rest.extend(args[pos + used..].iter().cloned());
    let sub = rest.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-'));
    let insert_at = sub.map_or(rest.len(), |i| i + 2);
    rest.splice(insert_at..insert_at, flags);
    Ok(rest)
}

fn main() -> ExitCode {
    let args = match expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let threads = cli.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        eprintln!("error: --threads must be positive");
        return ExitCode::from(2);
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let start = Instant::now();
    let result = pool.install(|| match &cli.command {
        Command::VerifyClosedForms(a) => verify(a),
        Command::RunChain(a) => run_chain(a),
        Command::RunLimit(a) => run_limit(a),
        Command::GaussianOde(a) => gaussian_ode(a),
        Command::Compare(a) => compare(a),
        Command::FullBenchmark(a) => full_benchmark(a, threads),
    });
    eprintln!("wall clock {:.3}s", start.elapsed().as_secs_f64());
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
