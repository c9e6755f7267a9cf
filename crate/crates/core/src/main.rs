use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use hausdorff_lab::cli::{cmd_dim, cmd_measure, cmd_operator, cmd_sweep, cmd_verify, RunConfig};
use hausdorff_lab::Error;

#[derive(Parser)]
#[command(name = "hlab", version, about = "Hausdorff dimension and measure of truncated Gauss systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand)]
enum Command {
    /// Dimension table: n, h_n, residual, n(1-h_n), extrapolation.
    Dim,
    /// Hausdorff measure bracket from the density-ratio search.
    Measure,
    /// Leading eigenvalue and perturbation probes of the transfer operator.
    Operator,
    /// Run every invariant suite; exit 1 on any failed assertion.
    Verify,
    /// Dimension, measure and lower-bound witnesses per n and eps.
    Sweep,
}

#[derive(Args)]
struct Flags {
    /// key=value file applied before the flags below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// linear or gauss.
    #[arg(long, global = true)]
    kind: Option<String>,
    /// Single value, list (2,4,inf) or range (2..256).
    #[arg(long, global = true)]
    n: Option<String>,
    /// Ranges step by doubling.
    #[arg(long, global = true)]
    geometric: bool,
    /// Exponent list for the operator command.
    #[arg(long, global = true)]
    t: Option<String>,
    /// Collocation grid size.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Endpoint depth of the exhaustive family.
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Word length of the image family.
    #[arg(long, global = true)]
    image_depth: Option<usize>,
    #[arg(long, global = true)]
    eps: Option<String>,
    /// Candidate families (a,b,c,d or names); "default" or empty.
    #[arg(long, global = true)]
    families: Option<String>,
    /// Largest number of candidates a search may plan.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// csv or json.
    #[arg(long, global = true)]
    format: Option<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Add per-family best ratios to the measure table.
    #[arg(long, global = true)]
    explain: bool,
    /// Multiply every verify tolerance.
    #[arg(long, global = true)]
    tol_scale: Option<f64>,
    /// Shift every dimension before the verify suites build measures.
    #[arg(long, global = true, allow_hyphen_values = true)]
    inject_h_offset: Option<f64>,
}

impl Flags {
    fn pairs(&self) -> Vec<(String, String)> {
        let mut p = Vec::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                p.push((k.to_string(), v));
            }
        };
        put("kind", self.kind.clone());
        put("geometric", self.geometric.then(|| "true".into()));
        put("n", self.n.clone());
        put("t", self.t.clone());
        put("grid", self.grid.map(|v| v.to_string()));
        put("depth", self.depth.map(|v| v.to_string()));
        put("image_depth", self.image_depth.map(|v| v.to_string()));
        put("eps", self.eps.clone());
        put("families", self.families.clone());
        put("budget", self.budget.map(|v| v.to_string()));
        put("format", self.format.clone());
        put("out", self.out.as_ref().map(|v| v.display().to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("jobs", self.jobs.map(|v| v.to_string()));
        put("explain", self.explain.then(|| "true".into()));
        put("tol_scale", self.tol_scale.map(|v| v.to_string()));
        put("inject_h_offset", self.inject_h_offset.map(|v| v.to_string()));
        p
    }
}

fn load_config(flags: &Flags) -> anyhow::Result<RunConfig> {
    let mut config = RunConfig::default();
    if let Some(path) = &flags.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        config.apply(&RunConfig::parse_pairs(&text)?)?;
    }
    config.apply(&flags.pairs())?;
    Ok(config)
}

/// 0 ok, 1 failed assertion, 2 usage, 3 nonconvergence.
fn run(cli: Cli) -> anyhow::Result<u8> {
    let config = load_config(&cli.flags)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build_global()
        .context("starting the worker pool")?;
    let (table, code) = match cli.command {
        Command::Dim => (cmd_dim(&config)?, 0),
        Command::Measure => (cmd_measure(&config)?, 0),
        Command::Operator => (cmd_operator(&config)?, 0),
        Command::Sweep => (cmd_sweep(&config)?, 0),
        Command::Verify => {
            let report = cmd_verify(&config)?;
            for c in report.checks.iter().filter(|c| c.failures > 0) {
                eprintln!("FAIL {}::{}: {}", c.suite, c.name, c.detail);
            }
            eprintln!("{} assertions, {} failures", report.assertions(), report.failures());
            (report.table(&config)?, if report.passed() { 0 } else { 1 })
        }
    };
    let text = table.render(config.format);
    match &config.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(code)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::NonConvergence { .. } | Error::BracketFailure { .. }) => 3,
        Some(_) => 2,
        None => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
