use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cascade_cli::commands;
use cascade_cli::{CliError, Result, RunConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "cascade",
    version,
    about = "Train and dissect small transformers that add and subtract"
)]
struct Cli {
    /// Run configuration (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replaces every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the first training batches as question=answer lines.
    GenData {
        #[arg(long, default_value_t = 10)]
        batches: u64,
    },
    /// Print the exact answer to a question such as 555+448.
    Oracle { question: String },
    /// Train a model; writes model.ckpt and training_loss.json.
    Train {
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Measure accuracy with Clopper-Pearson intervals.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Questions to evaluate (default: eval.n_questions).
        #[arg(long)]
        n: Option<u64>,
    },
    /// Find useful nodes, tag subtasks, check the algorithm schema and
    /// draw maps.
    Analyze {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Addition model the checkpoint was initialised from, when its
        /// metadata does not say.
        #[arg(long)]
        donor: Option<PathBuf>,
    },
    /// Train once per seed and summarise final losses.
    SweepSeeds {
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long, default_value = "sweep")]
        category: String,
    },
    /// Score chat models on the cascading-carry prompts.
    Survey {
        /// Use a local scripted gateway instead of survey.gateway.
        #[arg(long)]
        mock: bool,
    },
    /// Print the effective configuration as JSON, and its hash on stderr.
    ShowConfig,
    /// Redraw maps from an analysis.json.
    Render {
        #[arg(long)]
        analysis: PathBuf,
    },
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig> {
    let cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    Ok(match seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.out.as_path();
    if let Command::Oracle { question } = &cli.command {
        println!("{}", commands::oracle(question)?);
        return Ok(());
    }
    let mut cfg = load_config(cli.config.as_deref(), cli.seed)?;
    match cli.command {
        Command::Oracle { .. } => unreachable!("handled above"),
        Command::ShowConfig => {
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            eprintln!("config_hash {}", cfg.hash());
        }
        Command::GenData { batches } => {
            let path = commands::gen_data(&cfg, batches, out)?;
            println!("{}", path.display());
        }
        Command::Train { steps } => {
            if let Some(s) = steps {
                cfg.train.total_steps = s;
            }
            cfg.validate()?;
            let o = commands::train_model(&cfg, out, true)?;
            println!(
                "steps {} final loss {:.3e} wall {:.0}s -> {}",
                o.log.final_.steps_run,
                o.log.final_.loss,
                o.log.final_.wall_secs,
                out.join("model.ckpt").display()
            );
        }
        Command::Eval { checkpoint, n } => {
            let n = n.unwrap_or(cfg.eval.n_questions);
            if n == 0 {
                return Err(CliError::Config(vec!["--n must be positive".into()]));
            }
            let r = commands::eval_model(&cfg, &checkpoint, n, out)?;
            println!(
                "{} questions, {} fails, accuracy {:.6}, 95% Clopper-Pearson failure rate [{:.2e}, {:.2e}]",
                r.total.n, r.total.fails, r.total.accuracy, r.total.interval.0, r.total.interval.1
            );
        }
        Command::Analyze { checkpoint, donor } => {
            let o = commands::analyze_model(&cfg, &checkpoint, donor.as_deref(), out)?;
            for t in &o.analysis.tags {
                let nodes: Vec<String> = t.nodes().iter().map(|n| n.to_string()).collect();
                println!("{} {}", t.subtask(), nodes.join("+"));
            }
            let failures = o.analysis.constraints.failures();
            println!(
                "{} tags, {} constraints, {} failed",
                o.analysis.tags.len(),
                o.analysis.constraints.results.len(),
                failures.len()
            );
            for f in failures {
                println!("FAIL {}: {}", f.constraint, f.witness);
            }
            if let Some(p) = o.polysemanticity {
                println!(
                    "inserted nodes {}, reused for subtraction {} ({:.1}%)",
                    p.inserted,
                    p.inserted_reused_for_subtraction,
                    100.0 * p.reused_fraction
                );
            }
        }
        Command::SweepSeeds { seeds, category } => {
            let s = commands::sweep_seeds(&cfg, &seeds, &category, out)?;
            println!(
                "{}: min {:.3e} median {:.3e} max {:.3e} mean {:.3e} variance {:.3e}",
                s.category, s.min, s.median, s.max, s.mean, s.variance
            );
        }
        Command::Survey { mock } => {
            let r = commands::survey(&cfg, mock, out)?;
            for m in &r.models {
                match &m.error {
                    Some(e) => println!("{} {} ({e})", m.model, m.score),
                    None => println!("{} {}", m.model, m.score),
                }
            }
        }
        Command::Render { analysis } => {
            for g in commands::render(&analysis, out)? {
                println!("{}", out.join(format!("{}.svg", g.name)).display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
