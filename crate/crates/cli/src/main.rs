//! Command-line front end for the adaptive finite-volume solvers.

mod config;
mod runner;
mod sweep;

use adaptive_fv::cases::{self, CaseSpec};
use adaptive_fv::io::read_grid;
use adaptive_fv::metrics::l1_uniform;
use adaptive_fv::unigrid::restrict_to_level;
use adaptive_fv::{Result, SolverError};
use clap::{Args, Parser, Subcommand};
use config::{parse_scheme, read_key_values, KeyValues, RunConfig, SweepConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "adaptive-fv", version, about = "Adaptive finite-volume Euler solvers: FV, MR, MRLT, AMR, AMRLT")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver and write its report, snapshot and mesh dumps.
    Run(RunArgs),
    /// Run a method x level matrix and tabulate rates against the FV runs.
    Sweep(SweepArgs),
    /// Build or look up a cached reference solution.
    Reference(ReferenceArgs),
    /// L1 difference of two grid snapshots.
    Compare(CompareArgs),
}

/// Settings shared by `run` and `sweep`; flags override the config file.
#[derive(Args)]
struct Overrides {
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    case: Option<String>,
    /// Time steps instead of the case schedule
    #[arg(long)]
    steps: Option<usize>,
    /// MR threshold
    #[arg(long)]
    eps: Option<f64>,
    /// AMR density threshold
    #[arg(long)]
    eps_rho: Option<f64>,
    /// AMR pressure threshold
    #[arg(long)]
    eps_p: Option<f64>,
    /// AMR clustering efficiency
    #[arg(long)]
    eta: Option<f64>,
    /// MR detail norm: unit or max
    #[arg(long)]
    detail_norm: Option<String>,
    /// Disable the AMR flux correction
    #[arg(long)]
    no_flux_correction: bool,
    /// mr-preset or amr-preset
    #[arg(long)]
    scheme: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Mesh dump cadence in fine steps (0: final mesh only)
    #[arg(long)]
    dump_every: Option<usize>,
    /// Level of the reference for L1 errors ("none" to skip)
    #[arg(long)]
    reference_level: Option<String>,
    /// Extra key=value settings
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Overrides {
    fn key_values(&self) -> Result<KeyValues> {
        let mut m = match &self.config {
            Some(p) => read_key_values(p)?,
            None => KeyValues::new(),
        };
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        put("case", self.case.clone());
        put("steps", self.steps.map(|v| v.to_string()));
        put("eps", self.eps.map(|v| v.to_string()));
        put("eps_rho", self.eps_rho.map(|v| v.to_string()));
        put("eps_p", self.eps_p.map(|v| v.to_string()));
        put("eta", self.eta.map(|v| v.to_string()));
        put("detail_norm", self.detail_norm.clone());
        put("flux_correction", self.no_flux_correction.then(|| "false".to_string()));
        put("scheme", self.scheme.clone());
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        put("dump_every", self.dump_every.map(|v| v.to_string()));
        put("reference_level", self.reference_level.clone());
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| SolverError::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            m.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(m)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Overrides,
    /// fv, mr, mrlt, amr or amrlt
    #[arg(long)]
    method: Option<String>,
    /// Finest level L (2^L cells per axis)
    #[arg(long)]
    level: Option<u32>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Overrides,
    /// Comma-separated methods
    #[arg(long)]
    methods: Option<String>,
    /// Comma-separated levels
    #[arg(long)]
    levels: Option<String>,
    /// Run entries concurrently (timings become non-comparable)
    #[arg(long)]
    parallel: bool,
}

#[derive(Args)]
struct ReferenceArgs {
    #[arg(long)]
    case: String,
    /// Defaults to the case's reference level
    #[arg(long)]
    level: Option<u32>,
    /// mr-preset or amr-preset
    #[arg(long, default_value = "mr-preset")]
    scheme: String,
}

#[derive(Args)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
}

/// 2: configuration, 3: numerical failure, 4: I/O.
fn exit_code(e: &SolverError) -> u8 {
    match e {
        SolverError::Config(_) | SolverError::BadDomain { .. } | SolverError::LevelMismatch { .. } => 2,
        SolverError::Io(_) | SolverError::Format(_) | SolverError::CacheCorrupt(_) => 4,
        _ => 3,
    }
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let mut m = args.common.key_values()?;
    if let Some(v) = &args.method {
        m.insert("method".into(), v.clone());
    }
    if let Some(v) = args.level {
        m.insert("level".into(), v.to_string());
    }
    let cfg = RunConfig::from_key_values(&m)?;
    let out = runner::run(&cfg)?;
    let r = &out.report;
    let row = runner::standalone_row(r)?;
    println!(
        "{} {} L={} N_I={} wall {:.3}s mesh {:.1}% memory {:.1}%{}",
        r.case,
        r.method.tag(),
        r.level,
        r.n_steps,
        r.wall_s,
        100.0 * row.mesh_compression.unwrap_or(f64::NAN),
        100.0 * row.memory_compression.unwrap_or(f64::NAN),
        r.l1_rho().map(|e| format!(" L1(rho) {e:.4e}")).unwrap_or_default()
    );
    for p in &out.artifacts {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<Option<SolverError>> {
    let mut m = args.common.key_values()?;
    if let Some(v) = &args.methods {
        m.insert("methods".into(), v.clone());
    }
    if let Some(v) = &args.levels {
        m.insert("levels".into(), v.clone());
    }
    if args.parallel {
        m.insert("parallel".into(), "true".into());
    }
    let cfg = SweepConfig::from_key_values(&m)?;
    let out = sweep::sweep(&cfg)?;
    print!("{}", out.table);
    for p in &out.files {
        println!("wrote {}", p.display());
    }
    Ok(out.first_error().cloned())
}

fn cmd_reference(args: &ReferenceArgs) -> Result<()> {
    let case = CaseSpec::by_name(&args.case)?;
    let level = args.level.unwrap_or(case.reference_level);
    let scheme = parse_scheme(&args.scheme)?;
    let dir = cases::cache_dir();
    let path = cases::reference_path(&dir, &case, level, &scheme)?;
    let cached = path.exists();
    cases::reference(&case, level, &scheme, &dir)?;
    println!("{} {}", if cached { "cached" } else { "computed" }, path.display());
    Ok(())
}

fn read(path: &Path) -> Result<adaptive_fv::unigrid::UniformGrid> {
    read_grid(path).map_err(|e| match e {
        SolverError::Io(m) => SolverError::Io(format!("{}: {m}", path.display())),
        SolverError::Format(m) => SolverError::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let (a, b) = (read(&args.a)?, read(&args.b)?);
    if a.dim() != b.dim() || a.lower != b.lower || a.extent != b.extent {
        return Err(SolverError::Config("snapshots cover different domains".into()));
    }
    let level = a.level.min(b.level);
    let e = l1_uniform(&restrict_to_level(&a, level)?, &restrict_to_level(&b, level)?)?;
    let names: &[&str] = if a.dim() == 2 { &["rho", "m1", "m2", "E"] } else { &["rho", "m1", "m2", "m3", "E"] };
    println!("level {level}");
    println!("{:<5} {:>12}", "var", "L1");
    let idx: Vec<usize> = if a.dim() == 2 { vec![0, 1, 2, 4] } else { vec![0, 1, 2, 3, 4] };
    for (n, i) in names.iter().zip(idx) {
        println!("{n:<5} {:>12.6e}", e[i]);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Run(a) => cmd_run(a).map(|_| None),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Reference(a) => cmd_reference(a).map(|_| None),
        Command::Compare(a) => cmd_compare(a).map(|_| None),
    };
    match res {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(e)) => {
            eprintln!("error: sweep finished with failures; first: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
