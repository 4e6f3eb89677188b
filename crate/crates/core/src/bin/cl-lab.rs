use cl_lab::harness::{
    self, ConfigFile, ExperimentKind, ExperimentOutput, ExperimentSpec, HarnessError, PValues,
    ScenarioKind, SigmaValues,
};
use cl_lab::ordering::Objective;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Theory and simulation of continual learning in linear models.
#[derive(Parser)]
#[command(name = "cl-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form forgetting and generalization over a (p, sigma) grid.
    Theory(Flags),
    /// Monte Carlo estimates next to the closed forms.
    Simulate(Flags),
    /// Sweep over p with simulation (defaults: p = 60,100,200,400,1000; sigma = 0.1,0.3,0.5).
    SweepP(Flags),
    /// Rank every effective task order of a scenario.
    OrderSearch(Flags),
    /// Run the built-in invariant suite.
    Validate(Flags),
}

#[derive(Args, Clone)]
struct Flags {
    /// JSON experiment description; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (falls back to CL_LAB_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo runs per grid point.
    #[arg(long)]
    runs: Option<usize>,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// identical | orthogonal | one-vs-many | categories | custom-geometry
    #[arg(long)]
    scenario: Option<ScenarioKind>,
    /// Number of tasks.
    #[arg(long = "T")]
    tasks: Option<usize>,
    /// Samples per task.
    #[arg(long)]
    n: Option<usize>,
    /// Feature counts: a value, a comma list, or a:b:step.
    #[arg(long)]
    p: Option<PValues>,
    /// Noise levels: a value or a comma list.
    #[arg(long)]
    sigma: Option<SigmaValues>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// forgetting | generalization (order-search).
    #[arg(long)]
    objective: Option<Objective>,
    /// Squared distance between categories or to the special task.
    #[arg(long)]
    cross_distance: Option<f64>,
    /// 1-based position of the special task (one-vs-many).
    #[arg(long)]
    special_position: Option<usize>,
    /// Category sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    tasks_per_category: Option<Vec<usize>>,
    /// JSON file with norms_sq and dist_sq (custom-geometry).
    #[arg(long)]
    geometry: Option<PathBuf>,
}

impl Flags {
    fn overrides(&self) -> ConfigFile {
        ConfigFile {
            kind: None,
            scenario: self.scenario,
            tasks: self.tasks,
            n: self.n,
            p: self.p.clone(),
            sigma: self.sigma.clone(),
            runs: self.runs,
            seed: self.seed,
            workers: self.workers,
            out: self.out.clone(),
            objective: self.objective,
            support: None,
            cross_distance: self.cross_distance,
            special_position: self.special_position,
            tasks_per_category: self.tasks_per_category.clone(),
            geometry_file: self.geometry.clone(),
        }
    }
}

fn run(kind: ExperimentKind, flags: &Flags) -> Result<(), HarnessError> {
    let file = flags.config.as_deref().map(ConfigFile::load).transpose()?;
    let env_seed = std::env::var(harness::config::SEED_ENV).ok();
    let spec = ExperimentSpec::resolve(kind, flags.overrides(), file, env_seed.as_deref())?;
    log::info!("{} on {} with seed {}", spec.kind, spec.scenario.name(), spec.master_seed);
    let output = harness::run_experiment(&spec)?;
    harness::write_output(&output, spec.output.as_deref())?;
    match output {
        ExperimentOutput::Validation(report) if !report.passed() => {
            Err(HarnessError::Validation("invariant suite reported failures".into()))
        }
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (kind, flags) = match &cli.command {
        Command::Theory(f) => (ExperimentKind::Theory, f),
        Command::Simulate(f) => (ExperimentKind::Simulate, f),
        Command::SweepP(f) => (ExperimentKind::SweepP, f),
        Command::OrderSearch(f) => (ExperimentKind::OrderSearch, f),
        Command::Validate(f) => (ExperimentKind::Validate, f),
    };
    match run(kind, flags) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cl-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
