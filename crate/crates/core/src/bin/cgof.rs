//! `cgof`: exponentiality tests for right-censored data from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use censored_gof::asymptotics::{covariance_estimate, j_asymptotic_test, laguerre_grid, limiting_eigenvalues, sigma2_j};
use censored_gof::bootstrap::{bootstrap_test, BootstrapConfig};
use censored_gof::power_study::{emit_table, parse_table_csv, run_power_study_with_progress, StudyConfig, TableFormat};
use censored_gof::statistics::{chi2_asymptotic_test, Hypothesis, StatKind, StatisticSpec, TestOutcome};
use censored_gof::{CensoredSample, Characterization, Error};

#[derive(Parser)]
#[command(name = "cgof", version, about = "Exponentiality tests for randomly right-censored data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test a data file (CSV with columns time,event) for exponentiality.
    Test(TestArgs),
    /// Run a Monte-Carlo power study from a config file.
    Simulate(SimulateArgs),
    /// Re-render a stored power-study CSV.
    Report(ReportArgs),
    /// Large-sample quantities: variance of J and eigenvalues for M.
    Asymptotics(AsymptoticsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum HypothesisArg {
    Simple,
    Composite,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Markdown,
    Latex,
}

impl From<FormatArg> for TableFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => TableFormat::Csv,
            FormatArg::Markdown => TableFormat::Markdown,
            FormatArg::Latex => TableFormat::Latex,
        }
    }
}

#[derive(Args)]
struct NullArgs {
    /// Null hypothesis: exponential with mean `--mu`, or with unknown mean.
    #[arg(long, value_enum, default_value = "simple")]
    hypothesis: HypothesisArg,
    /// Exponential mean under the simple hypothesis.
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
}

impl NullArgs {
    fn resolve(&self) -> Hypothesis {
        match self.hypothesis {
            HypothesisArg::Simple => Hypothesis::Simple { mu: self.mu },
            HypothesisArg::Composite => Hypothesis::Composite,
        }
    }

    fn describe(&self) -> String {
        match self.resolve() {
            Hypothesis::Simple { mu } => format!("simple (mu = {mu})"),
            Hypothesis::Composite => "composite".into(),
        }
    }
}

#[derive(Args)]
struct TestArgs {
    /// CSV file with header `time,event`.
    data: PathBuf,
    /// Statistic, e.g. `J:PR:a=1`, `M:D:a=2`, `cvm`, `chi2:r=3`, `qns`, `delta`.
    #[arg(long, default_value = "J:PR:a=1")]
    spec: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Bootstrap iterations.
    #[arg(long = "B", default_value_t = 1000)]
    b: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    null: NullArgs,
    /// Use the normal approximation instead of the bootstrap (J only).
    #[arg(long)]
    asymptotic: bool,
    /// Print the outcome as JSON.
    #[arg(long)]
    json: bool,
    /// Exit with status 2 when the null hypothesis is rejected.
    #[arg(long)]
    exit_code_on_reject: bool,
    /// Worker threads for the bootstrap (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct SimulateArgs {
    /// Study config file (`key = value` lines).
    config: PathBuf,
    /// Output path prefix; defaults to the config file name in the current directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Rendered format written next to the CSV.
    #[arg(long, value_enum, default_value = "markdown")]
    format: FormatArg,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's thread budget (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// CSV written by `cgof simulate`.
    table: PathBuf,
    #[arg(long, value_enum, default_value = "markdown")]
    format: FormatArg,
}

#[derive(Args)]
struct AsymptoticsArgs {
    /// CSV file with header `time,event`.
    data: PathBuf,
    /// Characterization: PR (Puri-Rubin) or D (Desu).
    #[arg(long = "char", default_value = "PR")]
    characterization: String,
    /// Tuning parameter a.
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Gauss-Laguerre nodes of the covariance grid.
    #[arg(long, default_value_t = 100)]
    nodes: usize,
    /// Number of eigenvalues to report.
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[command(flatten)]
    null: NullArgs,
    #[arg(long)]
    json: bool,
}

/// Prints configuration lines to stdout, or to stderr when stdout carries JSON.
fn announce(json: bool, lines: &[String]) {
    for l in lines {
        if json {
            eprintln!("# {l}");
        } else {
            println!("# {l}");
        }
    }
}

fn init_threads(threads: usize) -> Result<(), Error> {
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Input(format!("cannot configure threads: {e}")))?;
    }
    Ok(())
}

fn run_test(args: &TestArgs) -> Result<TestOutcome, Error> {
    init_threads(args.threads)?;
    let spec: StatisticSpec = args.spec.parse()?;
    let hypothesis = args.null.resolve();
    let sample = CensoredSample::from_csv_path(&args.data)?;
    let method = if spec.kind == StatKind::AkritasChi2 {
        "asymptotic chi-square".to_string()
    } else if args.asymptotic {
        "asymptotic normal".to_string()
    } else {
        format!("bootstrap (B = {})", args.b)
    };
    announce(
        args.json,
        &[
            format!("data = {} (n = {}, events = {})", args.data.display(), sample.len(), sample.event_count()),
            format!("spec = {spec}"),
            format!("hypothesis = {}", args.null.describe()),
            format!("alpha = {}", args.alpha),
            format!("method = {method}"),
            format!("seed = {}", args.seed),
        ],
    );
    if spec.kind == StatKind::AkritasChi2 {
        return chi2_asymptotic_test(&sample, hypothesis, spec.r, args.alpha);
    }
    if args.asymptotic {
        if spec.kind != StatKind::J {
            return Err(Error::Input("--asymptotic is only available for J statistics".into()));
        }
        return j_asymptotic_test(&sample, spec.characterization, spec.a, args.alpha, hypothesis);
    }
    let cfg = BootstrapConfig::new(args.b, args.alpha, hypothesis, args.seed)?;
    bootstrap_test(&sample, &spec, &cfg)
}

fn output_prefix(args: &SimulateArgs) -> PathBuf {
    args.out.clone().unwrap_or_else(|| {
        let stem = args.config.file_stem().map_or_else(|| "study".into(), |s| s.to_os_string());
        PathBuf::from(stem)
    })
}

fn with_extension(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn run_simulate(args: &SimulateArgs) -> Result<(), Error> {
    let mut cfg = StudyConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    println!("# config = {} (hash {})", args.config.display(), cfg.hash());
    for line in cfg.canonical().lines() {
        println!("# {line}");
    }
    println!("# threads = {}", if cfg.threads == 0 { "all".to_string() } else { cfg.threads.to_string() });
    let table = run_power_study_with_progress(&cfg, |p| {
        eprintln!(
            "[{}/{}] {} p = {} done ({:.1}s)",
            p.done,
            p.total,
            p.alternative.label(),
            p.rate,
            p.elapsed_secs
        );
    })?;
    let prefix = output_prefix(args);
    let csv_path = with_extension(&prefix, "csv");
    write_file(&csv_path, &emit_table(&table, TableFormat::Csv)?)?;
    println!("wrote {}", csv_path.display());
    let format: TableFormat = args.format.into();
    if format != TableFormat::Csv {
        let ext = if format == TableFormat::Markdown { "md" } else { "tex" };
        let path = with_extension(&prefix, ext);
        let text = emit_table(&table, format)?;
        write_file(&path, &text)?;
        println!("wrote {}", path.display());
        if format == TableFormat::Markdown {
            print!("{text}");
        }
    }
    Ok(())
}

fn run_report(args: &ReportArgs) -> Result<(), Error> {
    let text = std::fs::read_to_string(&args.table).map_err(|e| Error::Input(format!("{}: {e}", args.table.display())))?;
    let table = parse_table_csv(&text)?;
    print!("{}", emit_table(&table, args.format.into())?);
    Ok(())
}

fn run_asymptotics(args: &AsymptoticsArgs) -> Result<(), Error> {
    let ch: Characterization = args.characterization.parse()?;
    let hypothesis = args.null.resolve();
    let sample = CensoredSample::from_csv_path(&args.data)?;
    announce(
        args.json,
        &[
            format!("data = {} (n = {}, events = {})", args.data.display(), sample.len(), sample.event_count()),
            format!("characterization = {ch}, a = {}", args.a),
            format!("hypothesis = {}", args.null.describe()),
            format!("nodes = {}, k = {}", args.nodes, args.k),
        ],
    );
    let scaled = match hypothesis {
        Hypothesis::Simple { mu } => sample.scaled(1.0 / mu),
        Hypothesis::Composite => sample.scaled(1.0 / censored_gof::survival::censored_exp_mle(&sample)?),
    };
    let sigma2 = sigma2_j(&scaled, ch, args.a)?;
    let test = j_asymptotic_test(&sample, ch, args.a, args.alpha, hypothesis)?;
    let cov = covariance_estimate(&scaled, ch, &laguerre_grid(args.a, args.nodes))?;
    let eig = limiting_eigenvalues(&cov, args.a, args.k.min(args.nodes))?;
    if args.json {
        let v = serde_json::json!({ "sigma2_j": sigma2, "j_test": test, "eigenvalues": eig });
        println!("{}", serde_json::to_string_pretty(&v).expect("serializable"));
    } else {
        println!("sigma2_J    {sigma2:.6}");
        println!("{test}");
        println!("eigenvalues of the limiting operator for M:");
        for (k, l) in eig.iter().enumerate() {
            println!("  {:>3}  {l:.6e}", k + 1);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Test(args) => run_test(args).map(|outcome| {
            if args.json {
                println!("{}", serde_json::to_string_pretty(&outcome).expect("serializable"));
            } else {
                println!("{outcome}");
            }
            if outcome.reject && args.exit_code_on_reject {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }),
        Command::Simulate(args) => run_simulate(args).map(|_| ExitCode::SUCCESS),
        Command::Report(args) => run_report(args).map(|_| ExitCode::SUCCESS),
        Command::Asymptotics(args) => run_asymptotics(args).map(|_| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
