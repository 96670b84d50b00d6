//! `sonclust`: command-line surface over `sonclust-core`.
//!
//! Exit codes: 0 success, 1 domain failure, 2 usage or input error.

mod error;
mod io;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sonclust_core::certificate::{
    certify_partition_with, check_sufficient_with, CertificateConfig,
};
use sonclust_core::clusterpath::default_refine_tolerance;
use sonclust_core::mixture::{default_epsilon, separation_constant};
use sonclust_core::{
    check_agglomeration, compute_path, merge_tree, refine_merge_lambdas, sample_mixture,
    separation_bound, solve, CertificateResult, ClusterDelta, ClusterPath, Dendrogram,
    LambdaBounds, LambdaGrid, LambdaPolicy, MixtureModel, RecoveryExperiment, RecoveryReport,
    SolverConfig, SonSolution, TrialStatus,
};

pub use error::{CliError, CliResult};
pub use io::SCHEMA_VERSION;

#[derive(Debug, Parser)]
#[command(
    name = "sonclust",
    version,
    about = "Equal-weight sum-of-norms clustering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a Gaussian mixture into dataset and label CSVs.
    Gen(GenArgs),
    /// Solve at one lambda.
    Solve(SolveArgs),
    /// Check fusion certificates for candidate clusters.
    Certify(CertifyArgs),
    /// Sweep a lambda grid and build the merge tree.
    Path(PathArgs),
    /// Lambda window and separation bound for a mixture.
    Bounds(BoundsArgs),
    /// Seeded recovery trials on a mixture.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args, Serialize)]
struct SolverArgs {
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    /// Primal and dual residual tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iterations: usize,
    /// Merge distance for cluster extraction (default: 1e-5 x data diameter).
    #[arg(long)]
    delta: Option<f64>,
}

impl SolverArgs {
    fn config(&self, lambda: f64) -> SolverConfig {
        SolverConfig {
            lambda,
            rho: self.rho,
            tol_primal: self.tol,
            tol_dual: self.tol,
            max_iterations: self.max_iterations,
            cluster_delta: self.delta.map_or(ClusterDelta::Auto, ClusterDelta::Fixed),
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct GenArgs {
    /// Mixture model JSON: {"means": [[..]], "sigmas": [..], "weights": [..]}.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Dataset CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Component labels, one per line.
    #[arg(long)]
    labels: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SolveArgs {
    dataset: PathBuf,
    #[arg(long)]
    lambda: f64,
    /// The dataset CSV starts with a header line.
    #[arg(long)]
    header: bool,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(group = clap::ArgGroup::new("candidates").required(true).args(["cluster", "from_solution"]))]
struct CertifyArgs {
    dataset: PathBuf,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    header: bool,
    /// Comma-separated 0-based indices of one candidate cluster.
    #[arg(long, value_delimiter = ',')]
    cluster: Option<Vec<usize>>,
    /// Certify every cluster of a `solve` output.
    #[arg(long)]
    from_solution: Option<PathBuf>,
    /// Refinement iteration limit.
    #[arg(long, default_value_t = 5000)]
    max_iterations: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct PathArgs {
    dataset: PathBuf,
    /// start:stop:count:geometric|linear
    #[arg(long)]
    lambda_grid: String,
    #[arg(long)]
    header: bool,
    /// Exit 1 when the path is not agglomerative.
    #[arg(long)]
    strict: bool,
    /// Bisect each merge between its bracketing grid values.
    #[arg(long)]
    refine_merges: bool,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the dendrogram alone to this file.
    #[arg(long)]
    dendrogram: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct BoundsArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    theta: f64,
    /// Defaults to c_d * w_min / 2.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(group = clap::ArgGroup::new("policy").required(true).args(["lambda", "midpoint"]))]
struct ExperimentArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    theta: f64,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Fixed lambda for every trial.
    #[arg(long)]
    lambda: Option<f64>,
    /// Geometric mean of the largest lower bound and the upper bound.
    #[arg(long)]
    midpoint: bool,
    #[arg(long)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Provenance block embedded in (or written next to) every output.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    fn new<P: Serialize>(
        command: &str,
        params: &P,
        seed: Option<u64>,
        inputs: &[&Path],
        outputs: &[&Path],
        start: Instant,
    ) -> Self {
        Self {
            command: command.to_string(),
            parameters: serde_json::to_value(params).unwrap_or(serde_json::Value::Null),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: inputs.iter().map(|p| p.to_path_buf()).collect(),
            outputs: outputs.iter().map(|p| p.to_path_buf()).collect(),
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        }
    }
}

#[derive(Serialize)]
struct Document<T: Serialize> {
    schema_version: u32,
    manifest: RunManifest,
    #[serde(flatten)]
    body: T,
}

fn document<T: Serialize>(manifest: RunManifest, body: T) -> Document<T> {
    Document {
        schema_version: SCHEMA_VERSION,
        manifest,
        body,
    }
}

/// Solution as written by `solve` and read back by `certify --from-solution`.
#[derive(Debug, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub lambda: f64,
    pub x_star: Vec<Vec<f64>>,
    /// Member lists, 0-based, in canonical cluster order.
    pub partition: Vec<Vec<usize>>,
    pub assignment: Vec<usize>,
    pub num_clusters: usize,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective_value: f64,
    pub converged: bool,
}

impl From<&SonSolution> for SolutionRecord {
    fn from(s: &SonSolution) -> Self {
        Self {
            lambda: s.lambda,
            x_star: s.x_star.to_rows(),
            partition: s.partition.clusters(),
            assignment: s.partition.assignment().to_vec(),
            num_clusters: s.partition.num_clusters(),
            iterations: s.iterations,
            primal_residual: s.primal_residual,
            dual_residual: s.dual_residual,
            objective_value: s.objective_value,
            converged: s.converged,
        }
    }
}

#[derive(Deserialize)]
struct SolutionFile {
    solution: SolutionRecord,
}

#[derive(Serialize)]
struct CertificateRecord {
    cluster: Vec<usize>,
    status: sonclust_core::CertificateStatus,
    feasible: bool,
    max_norm: f64,
    equality_residual: f64,
    iterations_used: usize,
    /// `(i, j, z_ij)` for `i < j` in cluster order.
    multipliers: Vec<(usize, usize, Vec<f64>)>,
}

impl From<&CertificateResult> for CertificateRecord {
    fn from(r: &CertificateResult) -> Self {
        let m = &r.multipliers;
        let k = m.cluster.len();
        let mut multipliers = Vec::with_capacity(k * k.saturating_sub(1) / 2);
        for p in 0..k {
            for q in (p + 1)..k {
                multipliers.push((m.cluster[p], m.cluster[q], m.get(p, q)));
            }
        }
        Self {
            cluster: m.cluster.clone(),
            status: r.status,
            feasible: r.status.is_feasible(),
            max_norm: m.max_norm,
            equality_residual: m.equality_residual,
            iterations_used: r.iterations_used,
            multipliers,
        }
    }
}

#[derive(Serialize)]
struct PathRecord<'a> {
    lambdas: &'a [f64],
    partitions: Vec<Vec<Vec<usize>>>,
    cluster_counts: Vec<usize>,
    merge_events: &'a [sonclust_core::MergeEvent],
    iterations: Vec<usize>,
    primal_residuals: Vec<f64>,
    dual_residuals: Vec<f64>,
    converged: Vec<bool>,
}

impl<'a> From<&'a ClusterPath> for PathRecord<'a> {
    fn from(p: &'a ClusterPath) -> Self {
        Self {
            lambdas: &p.lambdas,
            partitions: p.partitions.iter().map(|q| q.clusters()).collect(),
            cluster_counts: p.cluster_counts(),
            merge_events: &p.merge_events,
            iterations: p.solutions_meta.iter().map(|m| m.iterations).collect(),
            primal_residuals: p.solutions_meta.iter().map(|m| m.primal_residual).collect(),
            dual_residuals: p.solutions_meta.iter().map(|m| m.dual_residual).collect(),
            converged: p.solutions_meta.iter().map(|m| m.converged).collect(),
        }
    }
}

#[derive(Serialize)]
struct AgglomerationRecord {
    holds: bool,
    violations: Vec<(usize, usize)>,
}

#[derive(Serialize)]
struct BoundsRecord {
    n: usize,
    theta: f64,
    epsilon: f64,
    lambda_lower: Vec<f64>,
    max_lambda_lower: f64,
    lambda_upper: Option<f64>,
    window_nonempty: bool,
    min_mean_separation: Option<f64>,
    separation_bound: f64,
    c_d: f64,
}

#[derive(Serialize)]
struct ExperimentSummary {
    trials: usize,
    solved: usize,
    recovered: usize,
}

fn run_gen(args: &GenArgs, start: Instant) -> CliResult<()> {
    let model: MixtureModel = io::read_json(&args.model)?;
    let (points, labels) = sample_mixture(&model, args.n, args.seed);
    io::write_points(&args.out, &points)?;
    io::write_labels(&args.labels, &labels)?;
    let manifest_path = sidecar(&args.out);
    let manifest = RunManifest::new(
        "gen",
        args,
        Some(args.seed),
        &[&args.model],
        &[&args.out, &args.labels],
        start,
    );
    io::emit_json(
        Some(&manifest_path),
        &document(manifest, serde_json::json!({})),
    )
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn run_solve(args: &SolveArgs, start: Instant) -> CliResult<()> {
    let dataset = io::read_dataset(&args.dataset, args.header)?;
    let solution = solve(&dataset, &args.solver.config(args.lambda), None)?;
    let outputs: Vec<&Path> = args.out.iter().map(PathBuf::as_path).collect();
    let manifest = RunManifest::new("solve", args, None, &[&args.dataset], &outputs, start);
    #[derive(Serialize)]
    struct Body {
        solution: SolutionRecord,
    }
    io::emit_json(
        args.out.as_deref(),
        &document(
            manifest,
            Body {
                solution: SolutionRecord::from(&solution),
            },
        ),
    )
}

fn run_certify(args: &CertifyArgs, start: Instant) -> CliResult<()> {
    let dataset = io::read_dataset(&args.dataset, args.header)?;
    let config = CertificateConfig {
        tol: args.tol,
        max_iterations: args.max_iterations,
    };
    let mut inputs: Vec<&Path> = vec![&args.dataset];
    let results = match (&args.cluster, &args.from_solution) {
        (Some(cluster), None) => vec![check_sufficient_with(
            &dataset,
            cluster,
            args.lambda,
            &config,
        )?],
        (None, Some(path)) => {
            inputs.push(path);
            let file: SolutionFile = io::read_json(path)?;
            let record = file.solution;
            let partition =
                sonclust_core::Partition::from_clusters(dataset.len(), &record.partition)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            let solution = SonSolution {
                x_star: dataset.points().clone(),
                partition,
                lambda: args.lambda,
                iterations: record.iterations,
                primal_residual: record.primal_residual,
                dual_residual: record.dual_residual,
                objective_value: record.objective_value,
                converged: record.converged,
            };
            certify_partition_with(&dataset, &solution, &config)?
        }
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --cluster or --from-solution".into(),
            ))
        }
    };
    let outputs: Vec<&Path> = args.out.iter().map(PathBuf::as_path).collect();
    let manifest = RunManifest::new("certify", args, None, &inputs, &outputs, start);
    #[derive(Serialize)]
    struct Body {
        lambda: f64,
        all_feasible: bool,
        certificates: Vec<CertificateRecord>,
    }
    let body = Body {
        lambda: args.lambda,
        all_feasible: results.iter().all(|r| r.status.is_feasible()),
        certificates: results.iter().map(CertificateRecord::from).collect(),
    };
    io::emit_json(args.out.as_deref(), &document(manifest, body))
}

fn run_path(args: &PathArgs, start: Instant) -> CliResult<()> {
    let dataset = io::read_dataset(&args.dataset, args.header)?;
    let grid: LambdaGrid = args.lambda_grid.parse()?;
    let config = args.solver.config(0.0);
    let mut path = compute_path(&dataset, &grid.values()?, &config)?;
    let violations = check_agglomeration(&path);
    if args.refine_merges && violations.is_empty() {
        refine_merge_lambdas(
            &dataset,
            &mut path,
            &config,
            default_refine_tolerance(&dataset),
        )?;
    }
    let dendrogram: Option<Dendrogram> = merge_tree(&path).ok();
    let mut outputs: Vec<&Path> = args.out.iter().map(PathBuf::as_path).collect();
    outputs.extend(args.dendrogram.iter().map(PathBuf::as_path));
    let manifest = RunManifest::new("path", args, None, &[&args.dataset], &outputs, start);

    if let Some(target) = &args.dendrogram {
        #[derive(Serialize)]
        struct Body<'a> {
            dendrogram: &'a Option<Dendrogram>,
        }
        let m = RunManifest::new("path", args, None, &[&args.dataset], &outputs, start);
        io::emit_json(
            Some(target),
            &document(
                m,
                Body {
                    dendrogram: &dendrogram,
                },
            ),
        )?;
    }

    #[derive(Serialize)]
    struct Body<'a> {
        path: PathRecord<'a>,
        agglomeration: AgglomerationRecord,
        dendrogram: Option<Dendrogram>,
    }
    let holds = violations.is_empty();
    let body = Body {
        path: PathRecord::from(&path),
        agglomeration: AgglomerationRecord {
            holds,
            violations: violations.clone(),
        },
        dendrogram,
    };
    io::emit_json(args.out.as_deref(), &document(manifest, body))?;
    if args.strict && !holds {
        return Err(CliError::Domain(format!(
            "agglomeration violated between grid indices {violations:?}"
        )));
    }
    Ok(())
}

fn run_bounds(args: &BoundsArgs, start: Instant) -> CliResult<()> {
    let model: MixtureModel = io::read_json(&args.model)?;
    let epsilon = args.epsilon.unwrap_or_else(|| default_epsilon(&model));
    let bounds = LambdaBounds::compute(&model, args.n, args.theta, epsilon)?;
    let min_sep = (model.components() >= 2).then(|| {
        let mut best = f64::INFINITY;
        for (m, a) in model.means.iter().enumerate() {
            for b in &model.means[m + 1..] {
                let d = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                best = best.min(d);
            }
        }
        best
    });
    let record = BoundsRecord {
        n: args.n,
        theta: args.theta,
        epsilon,
        max_lambda_lower: bounds.max_lower(),
        window_nonempty: bounds.upper.is_some_and(|u| bounds.max_lower() < u),
        lambda_lower: bounds.lower,
        lambda_upper: bounds.upper,
        min_mean_separation: min_sep,
        separation_bound: separation_bound(&model),
        c_d: separation_constant(model.dim()),
    };
    let outputs: Vec<&Path> = args.out.iter().map(PathBuf::as_path).collect();
    let manifest = RunManifest::new("bounds", args, None, &[&args.model], &outputs, start);
    #[derive(Serialize)]
    struct Body {
        bounds: BoundsRecord,
    }
    io::emit_json(
        args.out.as_deref(),
        &document(manifest, Body { bounds: record }),
    )
}

fn run_experiment(args: &ExperimentArgs, start: Instant) -> CliResult<()> {
    let model: MixtureModel = io::read_json(&args.model)?;
    let policy = match args.lambda {
        Some(l) => LambdaPolicy::Explicit(l),
        None => LambdaPolicy::MidpointOfBounds,
    };
    let experiment = RecoveryExperiment {
        epsilon: args.epsilon.unwrap_or_else(|| default_epsilon(&model)),
        model,
        n: args.n,
        theta: args.theta,
        policy,
        trials: args.trials,
        seed: args.seed,
        solver: args.solver.config(0.0),
    };
    let reports: Vec<RecoveryReport> = experiment.run()?;
    let summary = ExperimentSummary {
        trials: reports.len(),
        solved: reports
            .iter()
            .filter(|r| r.status == TrialStatus::Solved)
            .count(),
        recovered: reports.iter().filter(|r| r.recovered()).count(),
    };
    let outputs: Vec<&Path> = args.out.iter().map(PathBuf::as_path).collect();
    let manifest = RunManifest::new(
        "experiment",
        args,
        Some(args.seed),
        &[&args.model],
        &outputs,
        start,
    );
    let all_skipped = summary.solved == 0;
    #[derive(Serialize)]
    struct Body {
        summary: ExperimentSummary,
        reports: Vec<RecoveryReport>,
    }
    io::emit_json(
        args.out.as_deref(),
        &document(manifest, Body { summary, reports }),
    )?;
    if all_skipped {
        return Err(CliError::Domain(
            "lambda window is empty: every trial was skipped".into(),
        ));
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let start = Instant::now();
    match &cli.command {
        Command::Gen(a) => run_gen(a, start),
        Command::Solve(a) => run_solve(a, start),
        Command::Certify(a) => run_certify(a, start),
        Command::Path(a) => run_path(a, start),
        Command::Bounds(a) => run_bounds(a, start),
        Command::Experiment(a) => run_experiment(a, start),
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("sonclust: {e}");
            e.exit_code()
        }
    }
}
