//! `condbridge`: runs one experiment from command-line flags or a TOML
//! config and writes its CSV/JSON artifacts plus a manifest.
//!
//! Exit codes: 0 on success, 1 on a runtime error or a failed verdict in
//! test mode, 2 on an invalid configuration.

mod config;
mod experiments;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Map};

use config::{Config, ConfigError, Origin};
use output::{Artifact, Verdict};

#[derive(Parser)]
#[command(name = "condbridge", version, about = "Brownian bridges conditioned above curved barriers")]
struct Cli {
    /// Directory for the artifacts (overrides the config).
    #[arg(long, global = true, env = "CONDBRIDGE_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// Worker threads (overrides the config; 1 is the deterministic default).
    #[arg(long, global = true, env = "CONDBRIDGE_WORKERS")]
    workers: Option<usize>,
    /// Exit 1 when any verdict fails.
    #[arg(long, global = true)]
    test_mode: bool,
    /// Random seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Airy zeros and derivatives at the zeros.
    AiryTable(AiryTableArgs),
    /// Euler-Maruyama paths of the stationary diffusion.
    Simulate(SimulateArgs),
    /// Rejection-sampled Brownian bridges above a barrier.
    SampleBridge(SampleBridgeArgs),
    /// Entrance, exit, marginal and killed densities on a grid.
    Density(DensityArgs),
    /// Convergence of the finite-horizon entrance/exit law to its limit.
    EntranceLaw(EntranceLawArgs),
    /// Piecewise-parabolic approximations of the semicircle as T grows.
    ScalingStudy(ScalingStudyArgs),
    /// Exact lattice checks of the barrier and start-point orderings.
    Monotonicity(MonotonicityArgs),
    /// Aggregates the verdicts of earlier runs.
    Report(ReportArgs),
    /// Runs the experiment described by a TOML config file.
    Run {
        config: PathBuf,
    },
}

#[derive(Args, Serialize, Default)]
struct ShapeArgs {
    /// Barrier shape kind.
    #[arg(long = "shape")]
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    /// Half-width T of the barrier's time domain.
    #[arg(long = "horizon")]
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    t_horizon: Option<f64>,
    /// Relative observation time in (-1, 1).
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tau: Option<f64>,
    /// Power-parabola exponent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
}

impl ShapeArgs {
    fn is_empty(&self) -> bool {
        self.kind.is_none() && self.t_horizon.is_none() && self.tau.is_none() && self.gamma.is_none()
    }
}

#[derive(Args, Serialize)]
struct AiryTableArgs {
    /// Number of zeros.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    modes: Option<usize>,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_paths: Option<usize>,
    /// Keep every k-th point (the last point is always kept).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    record_every: Option<usize>,
    /// Start point; omitted means a draw from the stationary law.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    x0: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    ks_threshold: Option<f64>,
}

#[derive(Args, Serialize)]
struct SampleBridgeArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_steps: Option<usize>,
    /// Accepted bridges to emit.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_paths: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_attempts: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    crossing_correction: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    refinement_check: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    refinement_attempts: Option<u64>,
    /// Height above the barrier at the left end.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    start: Option<f64>,
    /// Height above the barrier at the right end.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    end: Option<f64>,
    #[command(flatten)]
    #[serde(skip)]
    shape: ShapeArgs,
}

#[derive(Args, Serialize)]
struct DensityArgs {
    /// stationary, joint-limit, joint-finite, marginal, killed or transfer.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    density: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    modes: Option<usize>,
    /// Window N on each side of the observation time.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    window: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_panels: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tolerance: Option<f64>,
    /// dimensional or cube-root.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    f_coefficient: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    start: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t_start: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t_end: Option<f64>,
    #[command(flatten)]
    #[serde(skip)]
    shape: ShapeArgs,
}

#[derive(Args, Serialize)]
struct EntranceLawArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    modes: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    window: Option<f64>,
    /// Comma-separated horizons T.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    horizons: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_points: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tolerance: Option<f64>,
    #[command(flatten)]
    #[serde(skip)]
    shape: ShapeArgs,
}

#[derive(Args, Serialize)]
struct ScalingStudyArgs {
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    horizons: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    taus: Option<Vec<f64>>,
    /// Points per exported shape curve (0 disables the export).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    export_points: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    containment_points: Option<usize>,
}

#[derive(Args, Serialize)]
struct MonotonicityArgs {
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    lattice_n: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    random_instances: Option<usize>,
}

#[derive(Args, Serialize)]
struct ReportArgs {
    /// Directory searched recursively for JSON files with verdicts.
    #[serde(skip_serializing_if = "Option::is_none")]
    input_dir: Option<String>,
}

/// Config text equivalent to the flags of a subcommand.
fn flags_to_toml(experiment: &str, args: &impl Serialize, shape: Option<&ShapeArgs>) -> String {
    let mut table = toml::Table::try_from(args).expect("flag values serialize");
    table.insert("experiment".into(), experiment.into());
    if let Some(s) = shape.filter(|s| !s.is_empty()) {
        let mut t = toml::Table::try_from(s).expect("flag values serialize");
        t.entry("kind").or_insert_with(|| "".into());
        table.insert("shape".into(), toml::Value::Table(t));
    }
    toml::to_string(&table).expect("table serializes")
}

enum Failure {
    Config(ConfigError),
    Usage(String),
    Runtime(String),
}

fn load(cli: &Cli) -> Result<Config, Failure> {
    let (text, origin) = match &cli.command {
        Command::Run { config } => {
            let text = std::fs::read_to_string(config)
                .map_err(|e| Failure::Usage(format!("{}: {e}", config.display())))?;
            (text, Origin::File(config.clone()))
        }
        cmd => {
            let text = match cmd {
                Command::AiryTable(a) => flags_to_toml("airy-table", a, None),
                Command::Simulate(a) => flags_to_toml("simulate", a, None),
                Command::SampleBridge(a) => flags_to_toml("sample-bridge", a, Some(&a.shape)),
                Command::Density(a) => flags_to_toml("density", a, Some(&a.shape)),
                Command::EntranceLaw(a) => flags_to_toml("entrance-law", a, Some(&a.shape)),
                Command::ScalingStudy(a) => flags_to_toml("scaling-study", a, None),
                Command::Monotonicity(a) => flags_to_toml("monotonicity", a, None),
                Command::Report(a) => flags_to_toml("report", a, None),
                Command::Run { .. } => unreachable!(),
            };
            (text, Origin::CommandLine)
        }
    };
    let mut cfg = Config::parse(&text, origin).map_err(Failure::Config)?;
    if let Some(d) = &cli.output_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(w) = cli.workers {
        if !(1..=1024).contains(&w) {
            return Err(Failure::Usage(format!("--workers (CONDBRIDGE_WORKERS): must lie in 1..=1024, got {w}")));
        }
        cfg.workers = w;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.test_mode |= cli.test_mode;
    Ok(cfg)
}

fn manifest(cfg: &Config, artifacts: &[Artifact], verdicts: &[Verdict]) -> Artifact {
    let mut m = Map::new();
    m.insert("experiment".into(), json!(cfg.experiment.name()));
    m.insert("config_hash".into(), json!(format!("sha256:{}", cfg.hash())));
    m.insert(
        "config_source".into(),
        json!(match &cfg.origin {
            Origin::File(_) => "file",
            Origin::CommandLine => "command-line",
        }),
    );
    m.insert("seed".into(), json!(cfg.seed));
    m.insert("workers".into(), json!(cfg.workers));
    m.insert("test_mode".into(), json!(cfg.test_mode));
    m.insert(
        "versions".into(),
        json!({"condbridge": condbridge::VERSION, "condbridge-cli": env!("CARGO_PKG_VERSION")}),
    );
    m.insert("f_coefficient".into(), json!(cfg.f_coefficient.name()));
    m.insert("normalization".into(), json!("killed"));
    m.insert("files".into(), json!(artifacts.iter().map(|a| a.name.as_str()).collect::<Vec<_>>()));
    m.insert("passed".into(), json!(verdicts.iter().all(|v| v.pass)));
    m.insert("verdicts".into(), serde_json::to_value(verdicts).expect("verdicts serialize"));
    Artifact::json("manifest.json", "condbridge.manifest/1", m)
}

fn write_all(dir: &Path, artifacts: &[Artifact]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for a in artifacts {
        std::fs::write(dir.join(&a.name), &a.bytes)?;
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<bool, Failure> {
    let cfg = load(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    let outcome = pool.install(|| experiments::run(&cfg)).map_err(|e| Failure::Runtime(e.0))?;
    let mut artifacts = outcome.artifacts;
    artifacts.push(manifest(&cfg, &artifacts, &outcome.verdicts));
    write_all(&cfg.output_dir, &artifacts)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", cfg.output_dir.display())))?;
    for v in &outcome.verdicts {
        println!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    println!("wrote {} files to {}", artifacts.len(), cfg.output_dir.display());
    Ok(!cfg.test_mode || outcome.verdicts.iter().all(|v| v.pass))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("condbridge: verdict failed in test mode");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("condbridge: invalid config: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("condbridge: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("condbridge: {e}");
            ExitCode::from(1)
        }
    }
}
