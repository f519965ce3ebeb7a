//! `mwclust` command-line front end.
//!
//! Exit codes: 0 on success, 2 for usage or validation errors, 3 when a fit
//! stopped at its iteration cap (the model is still written), 1 for I/O and
//! solver failures.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use mwclust::io::{read_dataset, read_json, write_dataset, write_json};
use mwclust::measure::cost_matrix;
use mwclust::metrics::{ami, ari, nmi, state_to_truth};
use mwclust::multilevel::{equivalence_check, random_tiny_instance, timed_fit, FitConfig, FittedModel, Lambda, LocalScale, Variant};
use mwclust::synth::{add_noise, gen_context, gen_lc, gen_nc, ContextParams, GenParams, Truth, VarianceMode};
use mwclust::transport::{solve_plan, OtMode, TransportPlan};
use mwclust::{GroupedDataset, Runtime};

#[derive(Debug, Parser)]
#[command(name = "mwclust", version, about = "Multilevel clustering of grouped data with optimal transport")]
struct Cli {
    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// Random seed.
    #[arg(long, global = true, env = "MWCLUST_SEED", default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a synthetic dataset and write it with its truth sidecar.
    Generate(GenerateArgs),
    /// Fit a multilevel clustering model.
    Fit(FitArgs),
    /// Score a fitted model against truth and/or labels (CSV on stdout).
    Eval(EvalArgs),
    /// Time fits over a sweep of group counts and worker counts.
    Bench(BenchArgs),
    /// Compare the measure-of-measures and tuple forms on tiny instances.
    CheckEquivalence(EquivalenceArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Nc,
    Lc,
    Context,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Variance {
    Constant,
    Proportional,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    kind: Kind,
    /// Number of groups.
    #[arg(long, default_value_t = 50)]
    m: usize,
    /// Points per group.
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    d: usize,
    /// Global clusters.
    #[arg(long = "M", default_value_t = 5)]
    clusters: usize,
    /// Shared atoms (lc).
    #[arg(long = "K", default_value_t = 50)]
    shared_atoms: usize,
    /// Atoms per global measure (nc, lc).
    #[arg(long, default_value_t = 6)]
    global_atoms: usize,
    /// Atoms per local measure (nc, lc).
    #[arg(long, default_value_t = 5)]
    local_atoms: usize,
    /// Context dimension.
    #[arg(long, default_value_t = 2)]
    context_dim: usize,
    /// Content components (context).
    #[arg(long, default_value_t = 6)]
    components: usize,
    #[arg(long, value_enum, default_value_t = Variance::Constant)]
    variance: Variance,
    /// Fraction of extra noise points to inject.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Dataset JSONL path.
    #[arg(long)]
    out: PathBuf,
    /// Truth sidecar path; defaults to `<out>.truth.json`.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitArgs {
    variant: Variant,
    #[arg(long)]
    data: PathBuf,
    /// Atoms per local measure.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Global clusters.
    #[arg(long = "M", default_value_t = 5)]
    clusters: usize,
    /// Shared atoms (mwms).
    #[arg(long = "K", default_value_t = 50)]
    shared_atoms: usize,
    /// Support cap of every global measure.
    #[arg(long = "L", default_value_t = 10)]
    support_cap: usize,
    /// `auto` or a nonnegative number.
    #[arg(long, default_value = "auto")]
    lambda: Lambda,
    /// Entropic regularization.
    #[arg(long, default_value_t = 10.0)]
    tau: f64,
    /// Use exact transport instead of Sinkhorn.
    #[arg(long)]
    exact: bool,
    /// Compare entropic values including the entropy penalty.
    #[arg(long)]
    include_entropy: bool,
    /// Weigh every group's own cost by its size.
    #[arg(long)]
    count_scale: bool,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Model JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Per-iteration timing CSV (iteration, seconds).
    #[arg(long)]
    timing: Option<PathBuf>,
    /// Final group-to-local transport plans as JSON, for debugging.
    #[arg(long)]
    plans: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    model: PathBuf,
    /// Truth sidecar written by `generate`.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// JSON array of reference labels (overrides the truth labels).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Value of the run_id column.
    #[arg(long, default_value = "0")]
    run_id: String,
    /// Omit the header row.
    #[arg(long)]
    no_header: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Group counts, e.g. `m=1000,2000,4000`.
    #[arg(long, default_value = "m=1000,2000,4000")]
    sweep: String,
    #[arg(long, value_delimiter = ',', default_value = "mwm")]
    variants: Vec<Variant>,
    #[arg(long, value_delimiter = ',', default_value = "1,8")]
    workers_list: Vec<usize>,
    /// Points per group.
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    d: usize,
    #[arg(long, default_value_t = 10)]
    max_iter: usize,
    /// CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EquivalenceArgs {
    #[arg(long, default_value_t = 50)]
    instances: usize,
    #[arg(long, default_value_t = 4)]
    max_groups: usize,
    #[arg(long, default_value_t = 2)]
    max_clusters: usize,
    #[arg(long, default_value_t = 3)]
    max_atoms: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

/// Truth sidecar: the generating measures plus the flags that produced them.
#[derive(Debug, Serialize, Deserialize)]
struct TruthFile {
    generator: serde_json::Value,
    #[serde(flatten)]
    truth: Truth,
}

/// Model file: the fitted model plus run metadata.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    #[serde(flatten)]
    model: FittedModel,
    wall_clock_s: f64,
}

/// Failure classes that map to distinct exit codes.
#[derive(Debug, thiserror::Error)]
enum Usage {
    #[error("{0}")]
    Invalid(String),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    use mwclust::Error as E;
    for cause in e.chain() {
        if cause.downcast_ref::<Usage>().is_some() {
            return 2;
        }
        if let Some(err) = cause.downcast_ref::<E>() {
            let inner = match err {
                E::Task { source, .. } => source.as_ref(),
                other => other,
            };
            return match inner {
                E::InvalidParameter(_)
                | E::MissingContexts
                | E::TooManyClusters { .. }
                | E::DimensionMismatch { .. }
                | E::LengthMismatch { .. }
                | E::InvalidWeights(_)
                | E::EmptyPointSet
                | E::InstanceTooLarge(_)
                | E::Json(_) => 2,
                _ => 1,
            };
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Generate(a) => generate(&a, cli.seed),
        Command::Fit(a) => fit(&a, cli.seed, cli.workers),
        Command::Eval(a) => eval(&a),
        Command::Bench(a) => bench(&a, cli.seed),
        Command::CheckEquivalence(a) => check_equivalence(&a, cli.seed),
    }
}

fn generate(a: &GenerateArgs, seed: u64) -> anyhow::Result<ExitCode> {
    if !(0.0..=1.0).contains(&a.noise) {
        return Err(Usage::Invalid(format!("--noise must lie in [0, 1], got {}", a.noise)).into());
    }
    let (dataset, truth) = match a.kind {
        Kind::Nc | Kind::Lc => {
            let p = GenParams {
                m: a.m,
                n: a.n,
                d: a.d,
                clusters: a.clusters,
                global_atoms: a.global_atoms,
                local_atoms: a.local_atoms,
                shared_atoms: a.shared_atoms,
                context_dim: a.context_dim,
                variance: match a.variance {
                    Variance::Constant => VarianceMode::Constant,
                    Variance::Proportional => VarianceMode::ClusterProportional,
                },
                seed,
            };
            if matches!(a.kind, Kind::Nc) {
                gen_nc(&p)?
            } else {
                gen_lc(&p)?
            }
        }
        Kind::Context => gen_context(&ContextParams {
            m: a.m,
            n: a.n,
            d: a.d,
            context_dim: a.context_dim,
            clusters: a.clusters,
            components: a.components,
            seed,
            ..ContextParams::default()
        })?,
    };
    let dataset = if a.noise > 0.0 { add_noise(&dataset, a.noise, seed)? } else { dataset };
    write_dataset(&dataset, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let sidecar = a.truth.clone().unwrap_or_else(|| truth_path(&a.out));
    let generator = serde_json::json!({
        "kind": a.kind,
        "m": a.m,
        "n": a.n,
        "d": a.d,
        "M": a.clusters,
        "K": a.shared_atoms,
        "global_atoms": a.global_atoms,
        "local_atoms": a.local_atoms,
        "context_dim": a.context_dim,
        "components": a.components,
        "variance": format!("{:?}", a.variance).to_lowercase(),
        "noise": a.noise,
        "seed": seed,
    });
    write_json(&TruthFile { generator, truth }, &sidecar).with_context(|| format!("writing {}", sidecar.display()))?;
    Ok(ExitCode::SUCCESS)
}

fn truth_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".truth.json");
    PathBuf::from(s)
}

fn fit(a: &FitArgs, seed: u64, workers: usize) -> anyhow::Result<ExitCode> {
    let dataset = read_dataset(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let mut config = FitConfig::new(a.variant);
    config.local_atoms = a.k;
    config.global_clusters = a.clusters;
    config.shared_atoms = a.shared_atoms;
    config.support_cap = a.support_cap;
    config.lambda = a.lambda;
    config.mode = if a.exact {
        OtMode::Exact
    } else {
        OtMode::Entropic {
            tau: a.tau,
            include_entropy: a.include_entropy,
        }
    };
    config.max_iter = a.max_iter;
    config.tol = a.tol;
    config.seed = seed;
    if a.count_scale {
        config.local_scale = LocalScale::Count;
    }
    config.validate()?;
    let runtime = Runtime::new(workers)?;

    let start = Instant::now();
    let (state, seconds) = timed_fit(&dataset, &config, &runtime)?;
    let wall_clock_s = start.elapsed().as_secs_f64();
    for w in &state.warnings {
        log::warn!("{w}");
    }
    let converged = state.converged;
    if let Some(path) = &a.plans {
        write_json(&local_plans(&dataset, &state.locals, config.mode, &config)?, path)?;
    }
    if let Some(path) = &a.timing {
        let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        writeln!(w, "iteration,seconds")?;
        for (i, s) in seconds.iter().enumerate() {
            writeln!(w, "{},{s}", i + 1)?;
        }
        w.flush()?;
    }
    let file = ModelFile {
        model: FittedModel { state, config },
        wall_clock_s,
    };
    write_json(&file, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(if converged { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn local_plans(dataset: &GroupedDataset, locals: &[mwclust::DiscreteMeasure], mode: OtMode, config: &FitConfig) -> anyhow::Result<Vec<TransportPlan>> {
    dataset
        .empirical_measures()
        .iter()
        .zip(locals)
        .map(|(p, g)| {
            let m = cost_matrix(p.atoms(), g.atoms(), config.order())?;
            Ok(solve_plan(p.weights(), g.weights(), &m, mode, &config.inner.sinkhorn)?)
        })
        .collect()
}

fn eval(a: &EvalArgs) -> anyhow::Result<ExitCode> {
    if a.truth.is_none() && a.labels.is_none() {
        return Err(Usage::Invalid("eval needs --truth or --labels".into()).into());
    }
    let model: ModelFile = read_json(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let state = &model.model.state;
    let truth: Option<TruthFile> = match &a.truth {
        Some(p) => Some(read_json(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let labels: Option<Vec<usize>> = match (&a.labels, &truth) {
        (Some(p), _) => Some(read_json(p).with_context(|| format!("reading {}", p.display()))?),
        (None, Some(t)) => Some(t.truth.labels.clone()),
        (None, None) => None,
    };
    let fmt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    let (n, r, m) = match &labels {
        Some(l) => (Some(nmi(l, &state.assignments)?), Some(ari(l, &state.assignments)?), Some(ami(l, &state.assignments)?)),
        None => (None, None, None),
    };
    let w = match &truth {
        Some(t) => Some(state_to_truth(state, &t.truth.locals, &t.truth.globals)?),
        None => None,
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    if !a.no_header {
        writeln!(out, "run_id,variant,nmi,ari,ami,w_to_truth,wall_clock_s")?;
    }
    writeln!(
        out,
        "{},{},{},{},{},{},{}",
        a.run_id,
        state.variant,
        fmt(n),
        fmt(r),
        fmt(m),
        fmt(w),
        model.wall_clock_s
    )?;
    Ok(ExitCode::SUCCESS)
}

fn parse_sweep(s: &str) -> anyhow::Result<Vec<usize>> {
    let Some(list) = s.strip_prefix("m=") else {
        bail!(Usage::Invalid(format!("--sweep must look like m=1000,2000, got {s:?}")));
    };
    list.split(',')
        .map(|v| {
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|m| *m > 0)
                .ok_or_else(|| Usage::Invalid(format!("bad group count {v:?} in --sweep")).into())
        })
        .collect()
}

fn bench(a: &BenchArgs, seed: u64) -> anyhow::Result<ExitCode> {
    let sizes = parse_sweep(&a.sweep)?;
    if a.workers_list.is_empty() || a.variants.is_empty() {
        return Err(Usage::Invalid("--variants and --workers-list must not be empty".into()).into());
    }
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    };
    writeln!(out, "variant,m,workers,iterations,final_objective,wall_clock_s")?;
    for &variant in &a.variants {
        for &m in &sizes {
            let dataset = bench_data(variant, m, a.n, a.d, seed)?;
            let mut config = FitConfig::new(variant);
            config.max_iter = a.max_iter;
            config.seed = seed;
            for &workers in &a.workers_list {
                let runtime = Runtime::new(workers)?;
                let start = Instant::now();
                let (state, _) = timed_fit(&dataset, &config, &runtime)?;
                let secs = start.elapsed().as_secs_f64();
                writeln!(
                    out,
                    "{variant},{m},{},{},{},{secs}",
                    runtime.workers(),
                    state.iterations(),
                    state.final_objective().unwrap_or(f64::NAN)
                )?;
                out.flush()?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn bench_data(variant: Variant, m: usize, n: usize, d: usize, seed: u64) -> anyhow::Result<GroupedDataset> {
    Ok(match variant {
        Variant::Mwmc => {
            gen_context(&ContextParams {
                m,
                n,
                d,
                seed,
                ..ContextParams::default()
            })?
            .0
        }
        Variant::Mwms => gen_lc(&GenParams { m, n, d, seed, ..GenParams::default() })?.0,
        _ => gen_nc(&GenParams { m, n, d, seed, ..GenParams::default() })?.0,
    })
}

fn check_equivalence(a: &EquivalenceArgs, seed: u64) -> anyhow::Result<ExitCode> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "instance,m,M,measure_of_measures,tuple_form,gap")?;
    let mut worst: f64 = 0.0;
    for i in 0..a.instances {
        let (locals, clusters) = random_tiny_instance(seed.wrapping_add(i as u64), a.max_groups, a.max_clusters, a.max_atoms);
        let r = equivalence_check(&locals, clusters)?;
        worst = worst.max(r.gap());
        writeln!(out, "{i},{},{clusters},{},{},{}", locals.len(), r.measure_of_measures, r.tuple_form, r.gap())?;
    }
    if worst > a.tol {
        eprintln!("largest gap {worst:e} exceeds {:e}", a.tol);
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}
