use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub mod classify;
pub mod config;
pub mod failure;
pub mod portrait;
pub mod run;
pub mod verify;

use failure::Failure;

#[derive(Parser)]
#[command(name = "bachflow", version, about = "Bach flow on homogeneous product 4-manifolds")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one flow and write trajectory.csv and fate.json.
    Run(RunArgs),
    /// Check the polynomial identities and the two curvature routes.
    Verify(VerifyArgs),
    /// Print the predicted fate of the flow from h.
    Classify(ClassifyArgs),
    /// Classify or integrate every point of a grid and write portrait.csv.
    Portrait(PortraitArgs),
}

#[derive(Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub geometry: Option<String>,
    /// Four metric components, or two scales for the pure 2×2 families.
    #[arg(long, num_args = 2..=4, allow_negative_numbers = true)]
    pub h: Option<Vec<String>>,
    #[arg(long)]
    pub t_end: Option<String>,
    #[arg(long)]
    pub rtol: Option<String>,
    #[arg(long)]
    pub atol: Option<String>,
    #[arg(long)]
    pub floor_eps: Option<String>,
    #[arg(long)]
    pub stall_tol: Option<String>,
    #[arg(long)]
    pub h_max: Option<String>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Rescale onto the initial determinant after every step.
    #[arg(long)]
    pub projection: bool,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// Random metrics per geometry for the curvature cross-check.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Perturb one table coefficient, as ID:delta (e.g. Q3:1).
    #[arg(long, hide = true)]
    pub inject_fault: Option<String>,
}

#[derive(Args)]
pub struct ClassifyArgs {
    pub geometry: String,
    #[arg(num_args = 2..=4, allow_negative_numbers = true)]
    pub h: Vec<String>,
    #[arg(long)]
    pub margin_tol: Option<f64>,
}

#[derive(Args)]
pub struct PortraitArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the config's worker count.
    #[arg(long)]
    pub threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { failure::CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let res = match cli.cmd {
        Cmd::Run(a) => run::cmd_run(&a),
        Cmd::Verify(a) => verify::cmd_verify(&a),
        Cmd::Classify(a) => classify::cmd_classify(&a),
        Cmd::Portrait(a) => portrait::cmd_portrait(&a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            if let Some(e) = error {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(code)
        }
    }
}
