//! `vicsek`: runs experiments, transport problems and the verification suite.
//!
//! Exit codes: 0 success, 1 runtime failure (or failing checks for
//! `verify`), 2 malformed or invalid configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use vicsek_core::config::{ExperimentConfig, ResolvedExperiment, SolverSelection};
use vicsek_core::density::momentum;
use vicsek_core::fpsolver::{run, TrajectoryRecord};
use vicsek_core::io::{nodes_to_csv, plan_to_csv, read_density, write_trajectory, GridSpec};
use vicsek_core::jko::{jko_run, JkoTrajectory};
use vicsek_core::presets::Preset;
use vicsek_core::sphere::{norm, Resolution};
use vicsek_core::transport::{solve, OtConfig, OtMethod, EXACT_CAP};
use vicsek_core::verify::{reports_to_json, run_all, SuiteConfig};
use vicsek_core::{build_grid, Error};

/// Environment variable overriding the base output directory.
const OUTPUT_ENV: &str = "VICSEK_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "vicsek", version, about = "Kolmogorov-Vicsek Fokker-Planck laboratory on the sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solvers selected in a TOML experiment file.
    Simulate(RunArgs),
    /// Run only the minimizing-movement solver of an experiment file.
    Jko(RunArgs),
    /// Squared-distance transport between two density files.
    Transport(TransportArgs),
    /// Run the verification suite and write JSON reports.
    Verify(VerifyArgs),
    /// Describe a grid and optionally write its node table.
    GridInfo(GridArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    config: PathBuf,
    /// Base output directory; overrides the config and VICSEK_OUTPUT_DIR.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    Entropic,
}

#[derive(Args)]
struct TransportArgs {
    /// Source density file.
    a: PathBuf,
    /// Target density file.
    b: PathBuf,
    #[arg(long, value_enum, default_value = "exact")]
    method: MethodArg,
    /// Entropic regularization strength.
    #[arg(long, default_value_t = 1e-2)]
    gamma: f64,
    /// Sinkhorn iteration limit.
    #[arg(long, default_value_t = 20_000)]
    max_iters: usize,
    /// Sinkhorn marginal tolerance (L1).
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    /// Write the plan as `i,j,mass` triples.
    #[arg(long)]
    plan_out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Reduced grids and horizons.
    #[arg(long)]
    quick: bool,
    /// Restrict to these checks (name or criterion number); repeatable.
    #[arg(long)]
    only: Vec<String>,
    /// JSON report path.
    #[arg(long, default_value = "verify_report.json")]
    out: PathBuf,
    #[arg(long, default_value_t = 20240917)]
    seed: u64,
    /// Zero the runtimes so reports are byte-identical across runs.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct GridArgs {
    /// Ambient dimension: 2 (circle) or 3 (sphere).
    #[arg(long, default_value_t = 3)]
    dim: usize,
    /// Circle node count.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    n_theta: Option<usize>,
    #[arg(long)]
    n_phi: Option<usize>,
    /// Write `index,x,y,z,weight` rows.
    #[arg(long)]
    nodes_out: Option<PathBuf>,
}

/// Error tagged with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Parse(_) => 2,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: 1, message: format!("i/o error: {e}") }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => cmd_run(&a, None),
        Command::Jko(a) => cmd_run(&a, Some(SolverSelection::Jko)),
        Command::Transport(a) => cmd_transport(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::GridInfo(a) => cmd_grid_info(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure { code: 2, message: format!("cannot read {}: {e}", path.display()) })?;
    Ok(ExperimentConfig::parse(&text)?)
}

/// First 12 hex digits of the SHA-256 of the canonical config.
fn config_hash(config: &ExperimentConfig) -> String {
    let digest = Sha256::digest(config.canonical_json().as_bytes());
    hex::encode(digest)[..12].to_string()
}

fn output_root(args: &RunArgs, config: &ExperimentConfig) -> PathBuf {
    if let Some(d) = &args.output_dir {
        return d.clone();
    }
    if let Ok(d) = std::env::var(OUTPUT_ENV) {
        if !d.is_empty() {
            return PathBuf::from(d);
        }
    }
    config.output_dir.as_ref().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}

fn cmd_run(args: &RunArgs, force: Option<SolverSelection>) -> Result<u8, Failure> {
    let mut config = load_config(&args.config)?;
    if let Some(s) = force {
        config.solver = s;
    }
    // file presets are relative to the config file
    if let Preset::FromFile { path } = &mut config.initial {
        if path.is_relative() {
            if let Some(base) = args.config.parent() {
                *path = base.join(&*path);
            }
        }
    }
    let exp = config.resolve()?;
    let stem = args.config.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    let dir = output_root(args, &config).join(format!("{stem}-{}", config_hash(&config)));
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("config.toml"), config.to_toml())?;
    std::fs::write(dir.join("grid.json"), GridSpec::of(&exp.grid).to_json())?;
    println!("output: {}", dir.display());

    let mut summary = serde_json::Map::new();
    if config.solver != SolverSelection::Jko {
        let record = run(&exp.initial, &config.direct)?;
        write_trajectory(&dir.join("direct"), &record)?;
        print_summary("direct", &record);
        summary.insert("direct".into(), summary_json(&record, &exp));
    }
    if config.solver != SolverSelection::Direct {
        let traj = jko_run(&exp.initial, config.jko.t_end, &config.jko.config())?;
        let jdir = dir.join("jko");
        write_trajectory(&jdir, &traj.record)?;
        std::fs::write(jdir.join("steps.csv"), jko_steps_csv(&traj))?;
        print_summary("jko", &traj.record);
        summary.insert("jko".into(), summary_json(&traj.record, &exp));
    }
    let text = serde_json::to_string_pretty(&serde_json::Value::Object(summary)).expect("summary");
    std::fs::write(dir.join("summary.json"), text + "\n")?;
    Ok(0)
}

fn print_summary(label: &str, record: &TrajectoryRecord) {
    let last = record.last();
    println!(
        "{label}: t = {:.4}, |J| = {:.10}, H = {:.6e}, |rho - M|_1 = {:.6e}, E = {:.10} (E0 = {:.10}), steps = {}",
        last.t,
        last.j_norm,
        last.rel_entropy,
        last.l1_to_m,
        last.energy,
        record.initial().energy,
        record.steps,
    );
}

fn summary_json(record: &TrajectoryRecord, exp: &ResolvedExperiment) -> serde_json::Value {
    let last = record.last();
    serde_json::json!({
        "t_final": last.t,
        "steps": record.steps,
        "j_final": last.j,
        "j_norm_final": last.j_norm,
        "j_norm_initial": norm(&momentum(&exp.initial)),
        "energy_initial": record.initial().energy,
        "energy_final": last.energy,
        "relative_entropy_final": last.rel_entropy,
        "l1_to_equilibrium_final": last.l1_to_m,
        "max_energy_increase": record.max_energy_increase,
        "min_value": record.min_value,
    })
}

fn jko_steps_csv(traj: &JkoTrajectory) -> String {
    let mut s = String::from("n,t,energy,objective,previous_energy,w2,slope,outer_iterations\n");
    for st in &traj.steps {
        let _ = writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            st.n,
            st.t,
            st.energy,
            st.objective,
            st.previous_energy,
            st.w2,
            st.slope,
            st.outer.len()
        );
    }
    s
}

fn cmd_transport(args: &TransportArgs) -> Result<u8, Failure> {
    let a = read_density(&args.a)?;
    let b = read_density(&args.b)?;
    let method = match args.method {
        MethodArg::Exact => OtMethod::Exact,
        MethodArg::Entropic => OtMethod::Entropic,
    };
    let config = OtConfig {
        method,
        entropic_gamma: args.gamma,
        max_iters: args.max_iters,
        tolerance: args.tolerance,
    };
    config.validate()?;
    let (plan, w2) = solve(&a, &b, &config)?;
    println!("W2 = {w2:.16e}");
    println!("plan cost <C, pi> = {:.16e}", plan.cost());
    println!("marginal violation = {:.3e}", plan.marginal_violation());
    if let Some(p) = &args.plan_out {
        std::fs::write(p, plan_to_csv(&plan))?;
        println!("plan: {} entries -> {}", plan.entries.len(), p.display());
    }
    Ok(0)
}

fn cmd_verify(args: &VerifyArgs) -> Result<u8, Failure> {
    let config = SuiteConfig {
        quick: args.quick,
        only: args.only.clone(),
        seed: args.seed,
        timing: !args.no_timing,
    };
    let reports = run_all(&config)?;
    if reports.is_empty() {
        return Err(Failure { code: 2, message: "no check matches --only".into() });
    }
    for r in &reports {
        println!("{}", r.summary_line());
    }
    std::fs::write(&args.out, reports_to_json(&reports) + "\n")?;
    let failed = reports.iter().filter(|r| r.is_failure()).count();
    println!("{} checks, {failed} failing; report: {}", reports.len(), args.out.display());
    Ok(if failed == 0 { 0 } else { 1 })
}

fn cmd_grid_info(args: &GridArgs) -> Result<u8, Failure> {
    let resolution = match (args.dim, args.n, args.n_theta, args.n_phi) {
        (2, Some(n), None, None) => Resolution::Circle { n },
        (2, None, None, None) => Resolution::Circle { n: 128 },
        (3, None, t, p) => Resolution::LatLon { n_theta: t.unwrap_or(32), n_phi: p.unwrap_or(64) },
        _ => {
            return Err(Failure {
                code: 2,
                message: "use --n with --dim 2, or --n-theta/--n-phi with --dim 3".into(),
            })
        }
    };
    let grid = build_grid(args.dim, resolution)?;
    println!("kind: {}", grid.kind());
    println!("spec: {}", GridSpec::of(&grid).to_json());
    println!("nodes: {}", grid.len());
    println!("edges: {}", grid.edges.len());
    println!("total area: {:.16e}", grid.total_area());
    println!("mesh width h: {:.6e}", grid.mesh_width());
    println!("min spacing: {:.6e}", grid.min_spacing());
    println!("exact transport: {}", if grid.len() <= EXACT_CAP { "available" } else { "entropic only" });
    if let Some(p) = &args.nodes_out {
        std::fs::write(p, nodes_to_csv(&grid))?;
    }
    Ok(0)
}
