//! Command-line front end: reads a JSON scene, runs one construction or
//! audit and writes CSV tables plus a Markdown summary.

pub mod commands;
pub mod error;
pub mod report;
pub mod scene;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

pub use error::{CliError, CliResult};
use report::Outcome;
use scene::{load, read_scene, Overrides};

#[derive(Debug, Parser)]
#[command(name = "martree", version, about = "Harmonic functions and boundary martingales on trees")]
pub struct Cli {
    /// Seed for every random stream of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Working depth of the task; at most the declared tree depth.
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    /// Number of generations swept by audits.
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
    /// Tolerance for floating-point comparisons.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Directory receiving CSV tables and summary.md.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Group,
}

#[derive(Debug, Subcommand)]
pub enum Group {
    /// Circle, ball and front sizes; linear branches.
    Tree {
        #[command(subcommand)]
        action: TreeAction,
    },
    /// Arc masses and the ν ↔ Q round trip.
    Measure {
        #[command(subcommand)]
        action: MeasureAction,
    },
    /// First passage, hitting distribution and regularity.
    Operator {
        #[command(subcommand)]
        action: OperatorAction,
    },
    /// Dirichlet problem on a contour.
    Dirichlet {
        #[command(subcommand)]
        action: DirichletAction,
    },
    /// Frequently universal construction and its audits.
    Universal {
        #[command(subcommand)]
        action: UniversalAction,
    },
    /// Monte Carlo estimates against analytic values.
    Walk {
        #[command(subcommand)]
        action: WalkAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum TreeAction {
    Check { scene: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum MeasureAction {
    Build { scene: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum OperatorAction {
    Solve { scene: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum DirichletAction {
    Solve { scene: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum UniversalAction {
    Build { scene: PathBuf },
    Audit { scene: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum WalkAction {
    Estimate { scene: PathBuf },
}

/// Result of a run: the outcome and the files written.
#[derive(Debug)]
pub struct Run {
    pub outcome: Outcome,
    pub files: Vec<PathBuf>,
}

impl Run {
    pub fn exit_code(&self) -> i32 {
        if self.outcome.passed() {
            0
        } else {
            1
        }
    }
}

pub fn run(cli: &Cli, invocation: &str) -> CliResult<Run> {
    type Command = fn(&scene::Loaded) -> CliResult<Outcome>;
    let (scene_path, command): (&PathBuf, Command) = match &cli.command {
        Group::Tree { action: TreeAction::Check { scene } } => (scene, commands::tree_check),
        Group::Measure { action: MeasureAction::Build { scene } } => (scene, commands::measure_build),
        Group::Operator { action: OperatorAction::Solve { scene } } => (scene, commands::operator_solve),
        Group::Dirichlet { action: DirichletAction::Solve { scene } } => (scene, commands::dirichlet_solve),
        Group::Universal { action: UniversalAction::Build { scene } } => (scene, commands::universal_build),
        Group::Universal { action: UniversalAction::Audit { scene } } => (scene, commands::universal_audit),
        Group::Walk { action: WalkAction::Estimate { scene } } => (scene, commands::walk_estimate),
    };
    let over = Overrides {
        seed: cli.seed,
        depth: cli.depth,
        horizon: cli.horizon,
        tol: cli.tol,
    };
    let loaded = load(read_scene(scene_path)?, &over)?;
    let mut outcome = command(&loaded)?;
    let files = report::emit(&cli.out_dir, &mut outcome, invocation)?;
    Ok(Run { outcome, files })
}
