use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use discrim::loss::{EstimatorMethod, LossKind};
use discrim_cli::workflows::designs_from_result;
use discrim_cli::{error_record, exit_code, run, Overrides, RunConfig, Workflow};

#[derive(Parser)]
#[command(name = "discrim", about = "Classification-based Bayesian design for model discrimination")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    family: Option<String>,
    /// tree-train, tree-test, rf-oob, rf-train, bayes or abc.
    #[arg(long, global = true)]
    method: Option<EstimatorMethod>,
    /// 01 or mdl.
    #[arg(long, global = true)]
    loss: Option<LossKind>,
    #[arg(long, global = true)]
    n_points: Option<usize>,
    #[arg(long, global = true)]
    restarts: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Multi-start coordinate-exchange design search.
    Search,
    /// Estimate the loss at the configured designs.
    Evaluate,
    /// Loss curves over a one-coordinate grid.
    Sweep,
    /// Loss curves including the ABC estimator.
    AbcSweep,
    /// Fresh-forest validation of designs, optionally with likelihood-based posteriors.
    Validate {
        /// Also compute posterior model probabilities with the exact likelihood.
        #[arg(long)]
        likelihood: bool,
        /// Validate the optimal design recorded in a search output directory.
        #[arg(long)]
        designs_from: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let c = cli.common;
    let workflow = match &cli.command {
        Command::Search => Workflow::Search,
        Command::Evaluate => Workflow::Evaluate,
        Command::Sweep => Workflow::Sweep,
        Command::AbcSweep => Workflow::AbcSweep,
        Command::Validate { likelihood: true, .. } => Workflow::ValidateLikelihood,
        Command::Validate { .. } => Workflow::Validate,
    };
    let flags = Overrides {
        workflow: Some(workflow),
        seed: c.seed,
        threads: c.threads,
        out: c.out,
        family: c.family,
        method: c.method,
        loss: c.loss,
        n_points: c.n_points,
        restarts: c.restarts,
    };
    let result = (|| {
        let mut cfg = match &c.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        cfg.apply(&flags);
        if let Command::Validate { designs_from: Some(dir), .. } = &cli.command {
            cfg.designs = designs_from_result(dir)?.into_iter().map(|d| d.blocks).collect();
        }
        run(&cfg)
    })();
    match result {
        Ok(report) => {
            println!("{}", serde_json::json!({ "run_id": report.run_id, "dir": report.dir, "summary": report.summary }));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_record(&e));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
