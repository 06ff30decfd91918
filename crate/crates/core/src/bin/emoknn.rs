use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use emoknn::config::ExperimentConfig;
use emoknn::data::Emotion;
use emoknn::runner::{validate, Experiment, RunOptions};

#[derive(Parser)]
#[command(
    name = "emoknn",
    version,
    about = "Explainable wkNN ensembles for emotion intensity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validate the configured grid and ensemble.
    Sweep(Common),
    /// Train on train+dev and write test-set submissions.
    Predict(Common),
    /// Write explanation reports for selected test instances.
    Explain(Common),
    /// Check that all configured artifacts exist and agree.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// One emotion, or "all".
    #[arg(long, default_value = "all")]
    emotion: String,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fold-assignment seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    jobs: Option<usize>,
    /// Comma-separated instance ids to explain.
    #[arg(long, value_delimiter = ',')]
    ids: Vec<String>,
}

impl Common {
    fn options(&self) -> emoknn::Result<RunOptions> {
        let emotion = match self.emotion.as_str() {
            "all" => None,
            s => Some(s.parse::<Emotion>()?),
        };
        Ok(RunOptions {
            emotion,
            out_dir: self.out.clone(),
            seed: self.seed,
            jobs: self.jobs,
            ids: self.ids.clone(),
        })
    }
}

fn run(cli: Cli) -> emoknn::Result<bool> {
    match cli.command {
        Command::Validate(c) => {
            let opts = c.options()?;
            let config = ExperimentConfig::load(&c.config)?;
            let report = validate(&config, opts.emotion);
            print!("{}", report.render());
            Ok(report.ok())
        }
        Command::Sweep(c) => {
            let exp = Experiment::new(ExperimentConfig::load(&c.config)?, &c.options()?)?;
            let outcome = exp.sweep()?;
            exp.write_sweep(&outcome)?;
            for &e in exp.emotions() {
                match outcome.best(e) {
                    Some(r) => println!(
                        "{e}: best {} mean PCC {}",
                        r.member.label(),
                        r.report.mean_pcc.unwrap_or(f64::NAN)
                    ),
                    None => println!("{e}: no successful setup"),
                }
            }
            for r in &outcome.ensembles {
                match r.report.mean_pcc {
                    Some(m) => println!("{}: ensemble mean PCC {m}", r.emotion),
                    None => println!("{}: ensemble failed", r.emotion),
                }
            }
            println!("results in {}", exp.out_dir().display());
            Ok(true)
        }
        Command::Predict(c) => {
            let exp = Experiment::new(ExperimentConfig::load(&c.config)?, &c.options()?)?;
            let preds = exp.predict()?;
            for p in &preds {
                println!("{}: {} predictions", p.emotion, p.predictions.len());
            }
            println!("results in {}", exp.out_dir().display());
            Ok(true)
        }
        Command::Explain(c) => {
            let exp = Experiment::new(ExperimentConfig::load(&c.config)?, &c.options()?)?;
            for r in exp.explain()? {
                println!("{}", r.render_text());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
