mod manifest;
mod reports;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use poincert::certsolver::{self, CertificateProblem, Certificate, Method, SolverOptions};
use poincert::cones::Exponent;
use poincert::expander::{self, EdgeConvention};
use poincert::group::{self, GroupTable};
use poincert::io::{self, Document, KernelFile};
use poincert::metric::{from_graph, BoundFunction, FiniteMetricSpace, Graph};
use poincert::{compression, oracle, Error, Result};

use manifest::RunManifest;

/// Poincaré-inequality certificates for finite metric spaces and groups.
#[derive(Debug, Parser)]
#[command(name = "poincert", version)]
struct Cli {
    /// Write the result here instead of stdout; a run manifest goes to
    /// `<out>.manifest.json`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for family sweeps and oracle restarts.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a graph, space or group.
    Gen(GenArgs),
    /// Compute a certificate for a space (or graph metric).
    Solve(SolveArgs),
    /// Check a growth exponent against certificates at several scales.
    Certify(CertifyArgs),
    /// Check a certificate against admissible kernels.
    Verify(VerifyArgs),
    /// Spectral gap and Poincaré constant of a graph.
    Spectral(SpectralArgs),
    /// Turn a regular graph into a far-pair expander certificate.
    Convert(SpectralArgs),
    /// Invariant certificate on a finite group with word length.
    GroupCert(GroupCertArgs),
    /// Bounds over a range of thresholds with a fitted growth exponent.
    Compress(CompressArgs),
    /// Brute-force reference values.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Family {
    Regular,
    Path,
    Cycle,
    Complete,
    Bipartite,
    Petersen,
    CyclicGroup,
    DihedralGroup,
    SymmetricGroup,
    QuaternionGroup,
}

#[derive(Debug, Args)]
struct GenArgs {
    family: Family,
    #[arg(long)]
    n: Option<usize>,
    /// Degree of a random regular graph.
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Part sizes of a complete bipartite graph.
    #[arg(long)]
    a: Option<usize>,
    #[arg(long)]
    b: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Emit the graph's shortest-path metric instead of the graph.
    #[arg(long)]
    metric: bool,
}

#[derive(Debug, Args)]
struct ProblemArgs {
    /// Exponent of the cone: 1 (cut cone) or 2 (negative type).
    #[arg(long, default_value_t = 2)]
    p: u32,
    /// Far-pair threshold.
    #[arg(long = "T")]
    threshold: f64,
    /// Upper control function: identity, power:b, affine:a,b or table:t,v;...
    #[arg(long, default_value = "identity")]
    rho: String,
    /// Pairs closer than this are unconstrained.
    #[arg(long, default_value_t = 1.0)]
    lower_cutoff: f64,
}

impl ProblemArgs {
    fn problem(&self, space: FiniteMetricSpace) -> Result<CertificateProblem> {
        Ok(CertificateProblem::new(space, self.threshold, Exponent::try_from(self.p)?)
            .with_rho_plus(self.rho.parse()?)
            .with_lower_cutoff(self.lower_cutoff))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    CuttingPlane,
    InteriorPoint,
}

#[derive(Debug, Args)]
struct SolveArgs {
    input: PathBuf,
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_enum, default_value = "auto")]
    method: MethodArg,
    #[arg(long, default_value_t = certsolver::DEFAULT_MAX_CUTS)]
    max_cuts: usize,
    /// Stop after this many cuts and report the partial certificate.
    #[arg(long)]
    truncate: Option<usize>,
    /// Also write the optimal kernel to this file.
    #[arg(long)]
    kernel_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 2)]
    p: u32,
    #[arg(long)]
    beta: f64,
    #[arg(long = "K")]
    k: f64,
    /// Scales to check, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<f64>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    certificate: PathBuf,
    space: PathBuf,
    /// Upper control function the certificate was computed with.
    #[arg(long, default_value = "identity")]
    rho: String,
    #[arg(long, default_value_t = 1.0)]
    lower_cutoff: f64,
    /// Kernel files to test; repeatable.
    #[arg(long)]
    kernel: Vec<PathBuf>,
    /// Random admissible kernels to draw in addition.
    #[arg(long, default_value_t = 0)]
    samples: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct SpectralArgs {
    graph: PathBuf,
    #[arg(long, default_value = "ordered")]
    edge_convention: String,
    /// Use inverse iteration instead of the dense eigensolver.
    #[arg(long)]
    iterative: bool,
}

#[derive(Debug, Args)]
struct GroupCertArgs {
    group: PathBuf,
    /// Word-length threshold of the far elements.
    #[arg(long)]
    n: f64,
}

#[derive(Debug, Args)]
struct CompressArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 2)]
    p: u32,
    /// Thresholds, comma separated.
    #[arg(long = "T", value_delimiter = ',', required = true)]
    thresholds: Vec<f64>,
    #[arg(long, default_value = "identity")]
    rho: String,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(subcommand)]
    kind: OracleKind,
}

#[derive(Debug, Subcommand)]
enum OracleKind {
    /// Gradient search over point configurations (a lower bound, p = 2).
    Embed {
        space: PathBuf,
        #[arg(long = "T")]
        threshold: f64,
        #[arg(long, default_value = "identity")]
        rho: String,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        #[arg(long, default_value_t = 4000)]
        steps: usize,
        #[arg(long)]
        dimension: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Exact p = 1 value by enumerating every cut (at most 12 points).
    Cuts {
        space: PathBuf,
        #[arg(long = "T")]
        threshold: f64,
    },
}

/// What a command produced, before it is written out.
struct Outcome {
    payload: String,
    inputs: Vec<PathBuf>,
    seeds: Vec<u64>,
    /// Nonzero exit for a completed run whose check failed.
    failed: bool,
}

impl Outcome {
    fn new(payload: String, inputs: Vec<PathBuf>) -> Self {
        Outcome {
            payload,
            inputs,
            seeds: Vec::new(),
            failed: false,
        }
    }

    fn seeded(mut self, seed: u64) -> Self {
        self.seeds.push(seed);
        self
    }
}

fn effective_seed(seed: Option<u64>) -> u64 {
    let s = seed.unwrap_or(0);
    eprintln!("seed: {s}");
    s
}

/// A metric space, or a graph read as its shortest-path metric.
fn load_space(path: &Path) -> Result<FiniteMetricSpace> {
    let text = std::fs::read_to_string(path)?;
    match io::peek_kind(&text)?.as_str() {
        "graph" => from_graph(&Graph::from_json(&text)?),
        _ => FiniteMetricSpace::from_json(&text),
    }
}

fn gen(args: &GenArgs) -> Result<Outcome> {
    let need_n = || args.n.ok_or_else(|| Error::Invalid("this family needs --n".into()));
    let mut seeds = Vec::new();
    let graph = match args.family {
        Family::Regular => {
            let seed = effective_seed(args.seed);
            seeds.push(seed);
            Some(expander::random_regular(need_n()?, args.k, seed)?)
        }
        Family::Path => Some(Graph::path(need_n()?)),
        Family::Cycle => Some(Graph::cycle(need_n()?)),
        Family::Complete => Some(Graph::complete(need_n()?)),
        Family::Bipartite => {
            let (a, b) = args
                .a
                .zip(args.b)
                .ok_or_else(|| Error::Invalid("bipartite needs --a and --b".into()))?;
            Some(Graph::complete_bipartite(a, b))
        }
        Family::Petersen => Some(Graph::petersen()),
        _ => None,
    };
    let payload = match graph {
        Some(g) if args.metric => from_graph(&g)?.to_json(),
        Some(g) => g.to_json(),
        None => {
            let g = match args.family {
                Family::CyclicGroup => GroupTable::cyclic(need_n()?)?,
                Family::DihedralGroup => GroupTable::dihedral(need_n()?)?,
                Family::SymmetricGroup => GroupTable::symmetric(need_n()?)?,
                _ => GroupTable::quaternion()?,
            };
            g.to_json()
        }
    };
    let mut out = Outcome::new(payload, vec![]);
    out.seeds = seeds;
    Ok(out)
}

fn solve(args: &SolveArgs) -> Result<Outcome> {
    let prob = args.problem.problem(load_space(&args.input)?)?;
    let opts = SolverOptions {
        method: match args.method {
            MethodArg::Auto => Method::Auto,
            MethodArg::CuttingPlane => Method::CuttingPlane,
            MethodArg::InteriorPoint => Method::InteriorPoint,
        },
        max_cuts: args.max_cuts,
        truncate_at: args.truncate,
        ..SolverOptions::default()
    };
    let (primal, cert) = certsolver::solve_with(&prob, &opts)?;
    if let Some(path) = &args.kernel_out {
        KernelFile {
            p: prob.p,
            kernel: primal.q,
        }
        .write(path)?;
    }
    Ok(Outcome::new(cert.to_json(), vec![args.input.clone()]))
}

fn certify(args: &CertifyArgs) -> Result<Outcome> {
    let space = load_space(&args.input)?;
    let verdicts = compression::certify_exponent(&space, args.beta, args.k, &args.n, Exponent::try_from(args.p)?)?;
    let report = reports::ExponentReport::new(args.beta, args.k, args.p, &verdicts);
    let failed = !report.pass;
    let mut out = Outcome::new(reports::to_json(&report), vec![args.input.clone()]);
    out.failed = failed;
    Ok(out)
}

fn verify(args: &VerifyArgs) -> Result<Outcome> {
    let cert = Certificate::read(&args.certificate)?;
    let space = load_space(&args.space)?;
    let prob = CertificateProblem::new(space, cert.threshold, cert.p)
        .with_rho_plus(args.rho.parse::<BoundFunction>()?)
        .with_lower_cutoff(args.lower_cutoff);
    let mut inputs = vec![args.certificate.clone(), args.space.clone()];
    let mut samples = Vec::new();
    for path in &args.kernel {
        let k = KernelFile::read(path)?;
        if k.p != cert.p {
            return Err(Error::Invalid(format!("kernel {} has p = {}, certificate has p = {}", path.display(), k.p, cert.p)));
        }
        samples.push(k.kernel);
        inputs.push(path.clone());
    }
    let mut seeds = Vec::new();
    if args.samples > 0 {
        let seed = effective_seed(args.seed);
        seeds.push(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..args.samples {
            samples.push(certsolver::random_feasible_kernel(&prob, &mut rng)?);
        }
    }
    if samples.is_empty() {
        return Err(Error::Invalid("nothing to verify: pass --kernel or --samples".into()));
    }
    let report = certsolver::verify(&cert, &prob, &samples)?;
    let out = reports::VerifyOutput::from(&report);
    let mut outcome = Outcome::new(reports::to_json(&out), inputs);
    outcome.seeds = seeds;
    outcome.failed = !report.pass;
    Ok(outcome)
}

fn spectral(args: &SpectralArgs) -> Result<Outcome> {
    let g = Graph::read(&args.graph)?;
    let conv: EdgeConvention = args.edge_convention.parse()?;
    let stats = if args.iterative {
        expander::poincare_constant_iterative(&g, conv)?
    } else {
        expander::poincare_constant(&g, conv)?
    };
    Ok(Outcome::new(
        reports::to_json(&reports::SpectralOutput::from(&stats)),
        vec![args.graph.clone()],
    ))
}

fn convert(args: &SpectralArgs) -> Result<Outcome> {
    let g = Graph::read(&args.graph)?;
    let conv: EdgeConvention = args.edge_convention.parse()?;
    let result = expander::classical_to_generalized(&g, conv)?;
    Ok(Outcome::new(result.to_json(), vec![args.graph.clone()]))
}

fn group_cert(args: &GroupCertArgs) -> Result<Outcome> {
    let g = GroupTable::read(&args.group)?;
    let cert = group::invariant_certificate(&g, args.n)?;
    Ok(Outcome::new(cert.to_json(), vec![args.group.clone()]))
}

fn compress(args: &CompressArgs) -> Result<Outcome> {
    let space = load_space(&args.input)?;
    let report = compression::opt_curve(&space, &args.thresholds, Exponent::try_from(args.p)?, &args.rho.parse()?)?;
    Ok(Outcome::new(report.to_json(), vec![args.input.clone()]))
}

fn run_oracle(args: &OracleArgs) -> Result<Outcome> {
    match &args.kind {
        OracleKind::Embed {
            space,
            threshold,
            rho,
            restarts,
            steps,
            dimension,
            seed,
        } => {
            let s = load_space(space)?;
            let seed = effective_seed(*seed);
            let cfg = oracle::EmbedSearchConfig {
                restarts: *restarts,
                steps: *steps,
                dimension: *dimension,
                seed,
                ..Default::default()
            };
            let (value, points) = oracle::best_min_far(&s, *threshold, &rho.parse()?, &cfg)?;
            let out = reports::EmbedOutput {
                threshold: *threshold,
                value,
                points: points.coords().to_vec(),
            };
            Ok(Outcome::new(reports::to_json(&out), vec![space.clone()]).seeded(seed))
        }
        OracleKind::Cuts { space, threshold } => {
            let s = load_space(space)?;
            let value = oracle::exhaustive_cut_opt(&s, *threshold)?;
            let out = reports::CutOutput {
                threshold: *threshold,
                value,
            };
            Ok(Outcome::new(reports::to_json(&out), vec![space.clone()]))
        }
    }
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Certify(a) => certify(a),
        Command::Verify(a) => verify(a),
        Command::Spectral(a) => spectral(a),
        Command::Convert(a) => convert(a),
        Command::GroupCert(a) => group_cert(a),
        Command::Compress(a) => compress(a),
        Command::Oracle(a) => run_oracle(a),
    }
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Gen(_) => "gen",
        Command::Solve(_) => "solve",
        Command::Certify(_) => "certify",
        Command::Verify(_) => "verify",
        Command::Spectral(_) => "spectral",
        Command::Convert(_) => "convert",
        Command::GroupCert(_) => "group-cert",
        Command::Compress(_) => "compress",
        Command::Oracle(_) => "oracle",
    }
}

fn exit_code(e: &Error) -> ExitCode {
    if e.is_numerical() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot start {jobs} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    let start = Instant::now();
    let outcome = match dispatch(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let written = match &cli.out {
        None => {
            print!("{}", outcome.payload);
            Ok(())
        }
        Some(path) => std::fs::write(path, &outcome.payload)
            .map_err(Error::from)
            .and_then(|()| {
                let manifest = RunManifest::new(
                    command_name(&cli.command),
                    std::env::args().skip(1).collect(),
                    outcome.seeds.clone(),
                    &outcome.inputs,
                    &outcome.payload,
                    start.elapsed().as_secs_f64(),
                )?;
                manifest.write(&manifest::manifest_path(path))
            }),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return exit_code(&e);
    }
    if outcome.failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
