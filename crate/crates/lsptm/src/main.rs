use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lsptm::checkpoint::{load_checkpoint, save_checkpoint};
use lsptm::config::resolve;
use lsptm::core::dataset::SynthSpec;
use lsptm::core::models::BackboneKind;
use lsptm::core::train::{ExperimentConfig, InitSource};
use lsptm::error::{Error, Result};
use lsptm::experiment::{evaluate_manifest, run_crossval, train};
use lsptm::manifest::load_manifest;
use lsptm::report::{emit_report, from_json, to_json, Format};
use lsptm::synth::generate_synthetic;

#[derive(Parser)]
#[command(name = "lsptm", version, about = "Laryngoscopic video clip classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic dataset and print its manifest path.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// k-fold cross-validation; writes a JSON report.
    Crossval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_parser = parse_backbone)]
        backbone: BackboneKind,
        /// Partial JSON merged over the backbone's defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(2..))]
        k: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Folds trained concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Fit on a whole manifest and write a checkpoint.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_parser = parse_backbone)]
        backbone: BackboneKind,
        #[arg(long)]
        config: Option<PathBuf>,
        /// `scratch` or a checkpoint path.
        #[arg(long, default_value = "scratch")]
        init: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on a manifest; writes a one-fold JSON report.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Reject checkpoints of any other backbone.
        #[arg(long, value_parser = parse_backbone)]
        backbone: Option<BackboneKind>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print stored reports as a table or canonical JSON.
    Report {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

fn parse_backbone(s: &str) -> std::result::Result<BackboneKind, String> {
    BackboneKind::parse(s).ok_or_else(|| format!("unknown backbone `{s}` (c3d, timesformer, videoswin)"))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(Error::io(path))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(Error::io(path))
}

fn experiment(kind: BackboneKind, config: Option<&Path>) -> Result<ExperimentConfig> {
    let text = config.map(read_text).transpose()?;
    resolve(kind, text.as_deref())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { spec, out, jobs } => {
            let spec: SynthSpec = serde_json::from_str(&read_text(&spec)?).map_err(Error::json("spec"))?;
            let path = generate_synthetic(&spec, &out, jobs)?;
            println!("{}", path.display());
        }
        Command::Crossval {
            manifest,
            backbone,
            config,
            k,
            seed,
            out,
            jobs,
        } => {
            let mut exp = experiment(backbone, config.as_deref())?;
            exp.train.seed = seed;
            let manifest = load_manifest(&manifest)?;
            let report = run_crossval(&manifest, &exp, k as usize, jobs)?;
            write_text(&out, &to_json(&report))?;
            print!("{}", emit_report(&[report], Format::Table)?);
        }
        Command::Train {
            manifest,
            backbone,
            config,
            init,
            seed,
            out,
        } => {
            let mut exp = experiment(backbone, config.as_deref())?;
            if let Some(seed) = seed {
                exp.train.seed = seed;
            }
            exp.train.init = match init.as_str() {
                "scratch" => InitSource::Scratch,
                path => InitSource::Checkpoint(path.to_string()),
            };
            let manifest = load_manifest(&manifest)?;
            let outcome = train(&manifest, &exp, |epoch, loss| println!("epoch {epoch}: loss {loss:.4}"))?;
            save_checkpoint(&out, &exp, &outcome.params)?;
        }
        Command::Eval {
            ckpt,
            manifest,
            backbone,
            out,
        } => {
            let ckpt = load_checkpoint(&ckpt, backbone)?;
            let manifest = load_manifest(&manifest)?;
            let report = evaluate_manifest(&manifest, &ckpt.config, ckpt.params)?;
            write_text(&out, &to_json(&report))?;
            print!("{}", emit_report(&[report], Format::Table)?);
        }
        Command::Report { inputs, format } => {
            let reports = inputs
                .iter()
                .map(|p| read_text(p).and_then(|t| from_json(&t)))
                .collect::<Result<Vec<_>>>()?;
            print!("{}", emit_report(&reports, format)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
