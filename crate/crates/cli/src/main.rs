use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use activeop::experiments::{
    emit_plot_data, run_convergence_experiment, run_gamma_sweep, run_lower_bound_demo, write_rows,
    ExperimentConfig, ExperimentOutput, LowerBoundConfig, ResultRow,
};
use activeop::{
    brownian_eigensystem, dirichlet_box_eigensystem, kernels, l2_norm, nystrom_eigensystem, rbf_eigensystem_nd,
    torus_eigensystem, CoefficientLaw, Domain, EigenSystem, Error, FieldFunction, Grid, HeatFd, HeatSpectral,
    KlSampler, Measure, Oracle, PoissonFd, PoissonSpectral,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "activeop", version, about = "Active operator learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the spectrum of a kernel eigensystem.
    Eig {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw Karhunen-Loeve fields and write them as CSV.
    Sample {
        #[command(flatten)]
        system: SystemArgs,
        /// Grid points per axis.
        #[arg(long, default_value_t = 129)]
        grid_size: usize,
        /// KL truncation; defaults to the system's pair count.
        #[arg(long)]
        truncation: Option<usize>,
        #[arg(long, value_enum, default_value_t = LawArg::Gaussian)]
        law: LawArg,
        /// Sparsity of the three-point law.
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        /// Number of fields.
        #[arg(long, default_value_t = 1)]
        samples_out: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply a PDE oracle once.
    Solve {
        #[arg(long, value_enum, default_value_t = EquationArg::Poisson)]
        equation: EquationArg,
        #[arg(long, value_enum, default_value_t = OracleArg::Fd)]
        oracle: OracleArg,
        /// Grid points per axis.
        #[arg(long, default_value_t = 64)]
        grid_size: usize,
        #[arg(long, default_value_t = 1e-2)]
        tau: f64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        /// Input field CSV (`x,y,value`); defaults to a sine mode.
        #[arg(long, conflicts_with = "mode")]
        input: Option<PathBuf>,
        /// Sine mode `k,l` used as input, giving sin(k pi x) sin(l pi y).
        #[arg(long, value_delimiter = ',', num_args = 2)]
        mode: Option<Vec<usize>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convergence experiment over training budgets.
    Converge(RunArgs),
    /// Convergence experiment repeated over a list of gammas.
    Sweep(RunArgs),
    /// Hard-instance lower-bound demonstration.
    LowerBound(RunArgs),
    /// Group a results CSV and emit means, standard errors and log10 columns.
    Aggregate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "experiment,gamma,n,estimator,metric")]
        group_by: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SystemArgs {
    #[arg(long, value_enum, default_value_t = Family::Torus)]
    family: Family,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Number of eigenpairs.
    #[arg(long, default_value_t = 20)]
    count: usize,
    #[arg(long, default_value_t = 1.0)]
    lengthscale: f64,
    /// Variance of the Gaussian base measure (RBF families).
    #[arg(long, default_value_t = 1.0)]
    variance: f64,
    /// Nystrom sample size.
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Torus,
    Box,
    Brownian,
    Rbf,
    NystromRbf,
    NystromBrownian,
}

#[derive(Clone, Copy, ValueEnum)]
enum LawArg {
    Gaussian,
    ThreePoint,
}

#[derive(Clone, Copy, ValueEnum)]
enum EquationArg {
    Poisson,
    Heat,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleArg {
    Fd,
    Spectral,
}

enum CliError {
    Core(Error),
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> CliResult<PathBuf> {
    match cmd {
        Command::Eig { system, out } => eig(&system, out_dir(out, None, "eig")),
        Command::Sample { system, grid_size, truncation, law, p, samples_out, out } => {
            let law = match law {
                LawArg::Gaussian => CoefficientLaw::StandardGaussian,
                LawArg::ThreePoint => CoefficientLaw::ThreePoint { p },
            };
            sample(&system, grid_size, truncation, law, samples_out, out_dir(out, None, "sample"))
        }
        Command::Solve { equation, oracle, grid_size, tau, steps, input, mode, out } => {
            solve(equation, oracle, grid_size, tau, steps, input, mode, out_dir(out, None, "solve"))
        }
        Command::Converge(args) => {
            let cfg = experiment_config(&args)?;
            let dir = out_dir(args.out, cfg.output.clone(), "converge");
            finish(run_convergence_experiment(&cfg)?, dir)
        }
        Command::Sweep(args) => {
            let cfg = experiment_config(&args)?;
            let dir = out_dir(args.out, cfg.output.clone(), "sweep");
            finish(run_gamma_sweep(&cfg)?, dir)
        }
        Command::LowerBound(args) => {
            let mut cfg = match &args.config {
                Some(p) => LowerBoundConfig::from_path(p)?,
                None => LowerBoundConfig::default(),
            };
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            let dir = out_dir(args.out, cfg.output.clone(), "lower-bound");
            finish(run_lower_bound_demo(&cfg)?, dir)
        }
        Command::Aggregate { input, group_by, out } => aggregate(&input, &group_by, out_dir(out, None, "aggregate")),
    }
}

fn out_dir(flag: Option<PathBuf>, cfg: Option<PathBuf>, name: &str) -> PathBuf {
    flag.or(cfg).unwrap_or_else(|| Path::new("out").join(name))
}

fn experiment_config(args: &RunArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::from_path(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn finish(out: ExperimentOutput, dir: PathBuf) -> CliResult<PathBuf> {
    out.write_to_dir(&dir)?;
    Ok(dir)
}

fn write_manifest(dir: &Path, manifest: &serde_json::Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(Error::Json)?;
    fs::write(dir.join("manifest.json"), text + "\n")?;
    Ok(())
}

fn build_system(a: &SystemArgs) -> CliResult<EigenSystem> {
    let sys = match a.family {
        Family::Torus => torus_eigensystem(a.alpha, a.beta, a.gamma, a.dim, a.count)?,
        Family::Box => dirichlet_box_eigensystem(a.alpha, a.beta, a.gamma, a.dim, a.count)?,
        Family::Brownian => {
            if a.dim != 1 {
                return Err(CliError::Usage("the Brownian system is one-dimensional".into()));
            }
            brownian_eigensystem(a.count)?
        }
        Family::Rbf => rbf_eigensystem_nd(a.lengthscale, a.variance, a.dim, a.count)?,
        Family::NystromRbf => nystrom_eigensystem(
            kernels::rbf(a.lengthscale),
            Measure::Gaussian { variance: a.variance },
            Domain::Interval { half_width: gaussian_half_width(a.variance) },
            a.dim,
            a.samples,
            a.count,
            a.seed,
        )?,
        Family::NystromBrownian => nystrom_eigensystem(
            kernels::brownian(),
            Measure::Lebesgue,
            Domain::Box01,
            1,
            a.samples,
            a.count,
            a.seed,
        )?,
    };
    Ok(sys)
}

fn gaussian_half_width(variance: f64) -> f64 {
    6.0 * variance.sqrt()
}

fn system_grid(a: &SystemArgs, sys: &EigenSystem, n: usize) -> CliResult<Arc<Grid>> {
    let (domain, measure) = match a.family {
        Family::Torus => (Domain::Torus01, Measure::Lebesgue),
        Family::Box | Family::Brownian | Family::NystromBrownian => (Domain::Box01, Measure::Lebesgue),
        Family::Rbf | Family::NystromRbf => (
            Domain::Interval { half_width: gaussian_half_width(a.variance) },
            Measure::Gaussian { variance: a.variance },
        ),
    };
    Ok(Grid::new(sys.dim(), n, domain, measure)?)
}

fn system_row(sys: &EigenSystem, a: &SystemArgs, experiment: &str) -> ResultRow {
    let gamma = matches!(a.family, Family::Torus | Family::Box).then_some(a.gamma);
    ResultRow {
        experiment: experiment.into(),
        kernel: sys.kind().name().into(),
        gamma,
        n: None,
        trial: None,
        estimator: String::new(),
        metric: String::new(),
        value: 0.0,
        stderr: None,
        seed: Some(a.seed),
    }
}

fn eig(a: &SystemArgs, dir: PathBuf) -> CliResult<PathBuf> {
    let sys = build_system(a)?;
    fs::create_dir_all(&dir)?;
    let base = system_row(&sys, a, "eig");
    let mut rows: Vec<ResultRow> = sys
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(j, &v)| ResultRow { n: Some(j + 1), metric: "eigenvalue".into(), value: v, ..base.clone() })
        .collect();
    if let Some(rest) = sys.remainder() {
        rows.push(ResultRow { metric: "tail_remainder".into(), value: rest, ..base.clone() });
    }
    write_rows(&rows, fs::File::create(dir.join("results.csv"))?)?;
    sys.write_spectrum_csv(fs::File::create(dir.join("spectrum.csv"))?)?;
    write_manifest(&dir, &json!({ "kind": "eig", "system": sys.params_json(), "summary": sys.summary() }))?;
    Ok(dir)
}

fn sample(
    a: &SystemArgs,
    grid_size: usize,
    truncation: Option<usize>,
    law: CoefficientLaw,
    count: usize,
    dir: PathBuf,
) -> CliResult<PathBuf> {
    let sys = build_system(a)?;
    let grid = system_grid(a, &sys, grid_size)?;
    let m = truncation.unwrap_or(sys.len());
    let sampler = KlSampler::new(&sys, m, &grid, law, a.seed)?;
    fs::create_dir_all(dir.join("fields"))?;
    let base = system_row(&sys, a, "sample");
    let mut rows = Vec::with_capacity(count);
    for i in 0..count {
        let s = sampler.sample(i as u64);
        s.field.write_csv(fs::File::create(dir.join("fields").join(format!("sample_{i:04}.csv")))?)?;
        rows.push(ResultRow { trial: Some(i), metric: "l2_norm".into(), value: l2_norm(&s.field), ..base.clone() });
    }
    write_rows(&rows, fs::File::create(dir.join("results.csv"))?)?;
    write_manifest(
        &dir,
        &json!({
            "kind": "sample",
            "system": sys.params_json(),
            "truncation": m,
            "law": law,
            "grid_size": grid_size,
            "seed": a.seed,
            "samples": count,
        }),
    )?;
    Ok(dir)
}

#[allow(clippy::too_many_arguments)]
fn solve(
    equation: EquationArg,
    oracle: OracleArg,
    grid_size: usize,
    tau: f64,
    steps: usize,
    input: Option<PathBuf>,
    mode: Option<Vec<usize>>,
    dir: PathBuf,
) -> CliResult<PathBuf> {
    let grid = Grid::new(2, grid_size, Domain::Box01, Measure::Lebesgue)?;
    let oracle: Box<dyn Oracle> = match (equation, oracle) {
        (EquationArg::Poisson, OracleArg::Fd) => Box::new(PoissonFd::new(grid.clone())?),
        (EquationArg::Poisson, OracleArg::Spectral) => Box::new(PoissonSpectral::full(grid.clone())?),
        (EquationArg::Heat, OracleArg::Fd) => Box::new(HeatFd::new(grid.clone(), tau, steps)?),
        (EquationArg::Heat, OracleArg::Spectral) => Box::new(HeatSpectral::full(grid.clone(), tau)?),
    };
    let (v, source) = match (input, mode) {
        (Some(path), _) => (FieldFunction::read_csv(grid.clone(), fs::File::open(&path)?)?, json!(path)),
        (None, mode) => {
            let (k, l) = match mode.as_deref() {
                Some([k, l]) if *k >= 1 && *l >= 1 => (*k as f64, *l as f64),
                Some(_) => return Err(CliError::Usage("--mode needs two positive integers".into())),
                None => (1.0, 1.0),
            };
            let pi = std::f64::consts::PI;
            let v = FieldFunction::from_fn(grid.clone(), |x| (k * pi * x[0]).sin() * (l * pi * x[1]).sin())?;
            (v, json!({ "mode": [k, l] }))
        }
    };
    let u = oracle.apply(&v)?;
    fs::create_dir_all(&dir)?;
    u.write_csv(fs::File::create(dir.join("output.csv"))?)?;
    let desc = oracle.descriptor();
    let base = ResultRow {
        experiment: "solve".into(),
        kernel: String::new(),
        gamma: None,
        n: None,
        trial: None,
        estimator: desc.discretization.clone(),
        metric: String::new(),
        value: 0.0,
        stderr: None,
        seed: None,
    };
    let rows = vec![
        ResultRow { metric: "input_l2".into(), value: l2_norm(&v), ..base.clone() },
        ResultRow { metric: "output_l2".into(), value: l2_norm(&u), ..base.clone() },
        ResultRow { metric: "output_max_abs".into(), value: u.max_abs(), ..base },
    ];
    write_rows(&rows, fs::File::create(dir.join("results.csv"))?)?;
    write_manifest(&dir, &json!({ "kind": "solve", "oracle": desc, "input": source }))?;
    Ok(dir)
}

fn aggregate(input: &Path, group_by: &[String], dir: PathBuf) -> CliResult<PathBuf> {
    let file = fs::File::open(input)?;
    let mut buf = Vec::new();
    let groups = emit_plot_data(file, group_by, &mut buf)?;
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("results.csv"), buf)?;
    write_manifest(
        &dir,
        &json!({ "kind": "aggregate", "input": input, "group_by": group_by, "groups": groups.len() }),
    )?;
    Ok(dir)
}
