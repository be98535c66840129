mod commands;
mod config;
mod report;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use config::{parse_boundary, parse_alpha, parse_log_base, RunConfig};
use lacunary::cz::LogBase;
use lacunary::spherical::Boundary;

#[derive(Parser, Debug)]
#[command(name = "lacunary", version, about = "Dyadic decompositions and lacunary spherical maximal functions")]
struct Cli {
    /// Seed for every generated instance.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON file with run settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct RegionArgs {
    /// Dimension of the root cube.
    #[arg(long)]
    dim: Option<usize>,
    /// The root cube has side 2^root_scale.
    #[arg(long)]
    root_scale: Option<i32>,
    /// Finest cells have side 2^base_scale.
    #[arg(long, allow_hyphen_values = true)]
    base_scale: Option<i32>,
    /// Instances to draw when no input file is given.
    #[arg(long)]
    count: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct CzArgs {
    /// Height of the decomposition.
    #[arg(long)]
    alpha: Option<f64>,
    /// Lower Whitney distance constant, as a rational such as 3/2.
    #[arg(long)]
    whitney_a: Option<String>,
    /// Upper Whitney distance constant.
    #[arg(long)]
    whitney_b: Option<String>,
    /// Largest polynomial degree in the projections.
    #[arg(long)]
    degree_cap: Option<usize>,
    /// Longest chain of box splits per level set.
    #[arg(long)]
    max_chain: Option<usize>,
    /// Logarithm in the scale thresholds: e, 2 or 10.
    #[arg(long, value_parser = parse_log_base)]
    log_base: Option<LogBase>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GenKind {
    Set,
    Function,
    Grid,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Stage {
    Metrics,
    Split,
    Lemma,
    Chain,
    Function,
    Cz,
    Exceptional,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw seeded random sets, functions or grids.
    Gen {
        #[arg(long, value_enum, default_value = "set")]
        kind: GenKind,
        #[command(flatten)]
        region: RegionArgs,
        #[arg(long)]
        density: Option<f64>,
    },
    /// Length, thickness and critical thickness.
    Metrics {
        /// Set file; without it sets are drawn.
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        region: RegionArgs,
    },
    /// Split a set into a small-length part and a generalized box.
    Split {
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        region: RegionArgs,
    },
    /// Iterated splits.
    Chain {
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        region: RegionArgs,
        #[arg(long)]
        max_chain: Option<usize>,
    },
    /// Calderón–Zygmund decomposition of a step function.
    Cz {
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        region: RegionArgs,
        #[command(flatten)]
        cz: CzArgs,
    },
    /// Lacunary spherical maximal function of grid functions.
    Maximal {
        /// Grid file; without it the radial test suite is used.
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        region: RegionArgs,
        /// Smallest radius is 2^kmin.
        #[arg(long, allow_hyphen_values = true)]
        kmin: Option<i32>,
        /// Largest radius is 2^kmax.
        #[arg(long, allow_hyphen_values = true)]
        kmax: Option<i32>,
        /// Quadrature points per sphere.
        #[arg(long)]
        quad: Option<usize>,
        /// Comma-separated thresholds.
        #[arg(long, value_delimiter = ',', value_parser = parse_alpha)]
        alpha_sweep: Option<Vec<f64>>,
        /// Values outside the grid: zero or reject.
        #[arg(long, value_parser = parse_boundary)]
        boundary: Option<Boundary>,
    },
    /// Exceptional set of a decomposition.
    Exceptional {
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        region: RegionArgs,
        #[command(flatten)]
        cz: CzArgs,
        /// Scale of the cubes approximating each sphere.
        #[arg(long, allow_hyphen_values = true)]
        approx_scale: Option<i32>,
        /// Fail instead of clipping sphere sums at the root boundary.
        #[arg(long)]
        no_clip: bool,
    },
    /// Run an invariant suite; exit code 0 iff every check passes.
    Verify {
        #[arg(long, value_enum)]
        stage: Stage,
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        region: RegionArgs,
        #[command(flatten)]
        cz: CzArgs,
    },
    /// Collect run outputs into CSV and JSON tables.
    Report {
        /// Directory holding earlier outputs.
        #[arg(long)]
        input: PathBuf,
    },
}

/// Machine-readable failure.
#[derive(Debug)]
pub struct CliError {
    kind: &'static str,
    message: String,
}

impl CliError {
    pub fn config(message: String) -> Self {
        CliError { kind: "config", message }
    }

    pub fn input(message: String) -> Self {
        CliError { kind: "input", message }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError {
            kind: "io",
            message: format!("{}: {e}", path.display()),
        }
    }

    fn to_json(&self) -> serde_json::Value {
        json!({"error": {"kind": self.kind, "message": self.message}})
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl From<lacunary::Error> for CliError {
    fn from(e: lacunary::Error) -> Self {
        CliError {
            kind: "domain",
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::input(e.to_string())
    }
}

impl RegionArgs {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(v) = self.dim {
            c.dim = v;
        }
        if let Some(v) = self.root_scale {
            c.root_scale = v;
        }
        if let Some(v) = self.base_scale {
            c.base_scale = v;
        }
        if let Some(v) = self.count {
            c.count = v;
        }
    }
}

impl CzArgs {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(v) = &self.whitney_a {
            c.whitney_a = v.clone();
        }
        if let Some(v) = &self.whitney_b {
            c.whitney_b = v.clone();
        }
        if let Some(v) = self.degree_cap {
            c.degree_cap = v;
        }
        if let Some(v) = self.max_chain {
            c.max_chain = v;
        }
        if let Some(v) = self.log_base {
            c.log_base = v;
        }
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut c = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    match &cli.command {
        Command::Gen { region, density, .. } => {
            region.apply(&mut c);
            if let Some(d) = density {
                c.set.density = *d;
                c.function.density = *d;
            }
        }
        Command::Metrics { region, .. } | Command::Split { region, .. } => region.apply(&mut c),
        Command::Chain { region, max_chain, .. } => {
            region.apply(&mut c);
            if let Some(m) = max_chain {
                c.max_chain = *m;
            }
        }
        Command::Cz { region, cz, .. } | Command::Verify { region, cz, .. } => {
            region.apply(&mut c);
            cz.apply(&mut c);
        }
        Command::Exceptional {
            region,
            cz,
            approx_scale,
            no_clip,
            ..
        } => {
            region.apply(&mut c);
            cz.apply(&mut c);
            if approx_scale.is_some() {
                c.approx_scale = *approx_scale;
            }
            if *no_clip {
                c.allow_clip = false;
            }
        }
        Command::Maximal {
            region,
            kmin,
            kmax,
            quad,
            alpha_sweep,
            boundary,
            ..
        } => {
            region.apply(&mut c);
            if let Some(v) = kmin {
                c.kmin = *v;
            }
            if let Some(v) = kmax {
                c.kmax = *v;
            }
            if quad.is_some() {
                c.quad_points = *quad;
            }
            if let Some(v) = alpha_sweep {
                c.alpha_sweep = v.clone();
            }
            if let Some(v) = boundary {
                c.boundary = *v;
            }
        }
        Command::Report { .. } => {}
    }
    Ok(c)
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    let cfg = build_config(cli)?;
    let out = cli.out.as_deref();
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    match &cli.command {
        Command::Gen { kind, .. } => commands::gen(&cfg, *kind, out).map(|_| true),
        Command::Metrics { input, .. } => commands::metrics(&cfg, input.as_deref(), out).map(|_| true),
        Command::Split { input, .. } => commands::split(&cfg, input.as_deref(), out).map(|_| true),
        Command::Chain { input, .. } => commands::chain(&cfg, input.as_deref(), out).map(|_| true),
        Command::Cz { input, .. } => commands::cz(&cfg, input.as_deref(), out).map(|_| true),
        Command::Maximal { input, .. } => commands::maximal(&cfg, input.as_deref(), out).map(|_| true),
        Command::Exceptional { input, .. } => commands::exceptional(&cfg, input.as_deref(), out).map(|_| true),
        Command::Verify { stage, input, .. } => commands::verify(&cfg, *stage, input.as_deref(), out),
        Command::Report { input } => report::report(input, out.unwrap_or(input)).map(|_| true),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            let err = CliError {
                kind: "usage",
                message: e.to_string().lines().next().unwrap_or_default().to_string(),
            };
            eprintln!("{}", err.to_json());
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(2)
        }
    }
}
