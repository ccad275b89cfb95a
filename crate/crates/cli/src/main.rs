use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use semgrasp::distill::{read_checkpoint, write_checkpoint};
use semgrasp::eval::Task;
use semgrasp::hand::{bundled_hand, load_hand, HandModel};
use semgrasp::pipeline::{self, LoadedScene, MaskSource, PipelineConfig};
use semgrasp::record::{read_records, write_records};
use semgrasp::{par, Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "semgrasp",
    version,
    about = "Region-conditioned grasp dataset pipeline"
)]
struct Cli {
    /// Pipeline config (TOML). Defaults apply to anything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; defaults to the scene's seed (or the config's train seed
    /// for `train`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TaskArg {
    Lift,
    Shake,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Propose a useful region per (object, prompt).
    Regions {
        #[arg(long)]
        scene: PathBuf,
        /// Directory holding object<i>/ mask folders.
        #[arg(long, required_unless_present = "oracle", conflicts_with = "oracle")]
        masks: Option<PathBuf>,
        /// Use synthetic masks of the scene's planted regions.
        #[arg(long)]
        oracle: bool,
        /// Output directory for region files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimize grasps on every region.
    Synth {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        regions: PathBuf,
        /// Hand description; the bundled 16-DoF hand if omitted.
        #[arg(long)]
        hand: Option<PathBuf>,
        /// Grasps per (object, prompt); overrides the config.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score candidates with lift/shake and smooth labels.
    Eval {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        hand: Option<PathBuf>,
        /// Task behind the smooth label; overrides the config.
        #[arg(long, value_enum)]
        task: Option<TaskArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep records whose smooth label reaches the threshold.
    Dataset {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Attach basis-point encodings of each record's object.
    Bps {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the diffusion sampler; also writes <out stem>.loss.csv.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw grasps for the scene's target object.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        hand: Option<PathBuf>,
        #[arg(long, short = 'n', default_value_t = 64)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one OBJ per record with the hand and the scene.
    Export {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        hand: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn load_hand_or_bundled(path: Option<&Path>) -> Result<HandModel> {
    let hand = match path {
        Some(p) => load_hand(p)?,
        None => bundled_hand(),
    };
    if let Some(w) = hand.dof_warning() {
        log::warn!("{w}");
    }
    Ok(hand)
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    let scene_seed = |scene: &LoadedScene| cli.seed.unwrap_or(scene.description.seed);
    match cli.command {
        Command::Regions {
            scene,
            masks,
            oracle,
            out,
        } => {
            let scene = LoadedScene::load(&scene)?;
            let source = match (oracle, masks) {
                (true, _) => MaskSource::Oracle,
                (false, Some(dir)) => MaskSource::Dir(dir),
                (false, None) => {
                    return Err(Error::invalid("either --masks or --oracle is required"))
                }
            };
            let written = pipeline::regions(&scene, &source, &config, scene_seed(&scene), &out)?;
            log::info!("wrote {} region files to {}", written.len(), out.display());
        }
        Command::Synth {
            scene,
            regions,
            hand,
            count,
            out,
        } => {
            let scene = LoadedScene::load(&scene)?;
            let hand = load_hand_or_bundled(hand.as_deref())?;
            let count = count.unwrap_or(config.synth.count);
            let records =
                pipeline::synth(&scene, &regions, &hand, &config, scene_seed(&scene), count)?;
            write_records(&out, &records)?;
            log::info!("wrote {} candidates to {}", records.len(), out.display());
        }
        Command::Eval {
            scene,
            candidates,
            hand,
            task,
            out,
        } => {
            let scene = LoadedScene::load(&scene)?;
            let hand = load_hand_or_bundled(hand.as_deref())?;
            let task = match task {
                Some(TaskArg::Lift) => Task::Lift,
                Some(TaskArg::Shake) => Task::Shake,
                None => config.eval.task,
            };
            let records = read_records(&candidates)?;
            let evaluated = pipeline::evaluate(&scene, &hand, &config, &records, task)?;
            write_records(&out, &evaluated)?;
            let lifted = evaluated.iter().filter(|r| r.lift == Some(true)).count();
            log::info!("{lifted} of {} records lift", evaluated.len());
        }
        Command::Dataset {
            records,
            threshold,
            out,
        } => {
            let threshold = threshold.unwrap_or(config.dataset.threshold);
            let records = read_records(&records)?;
            let kept = pipeline::dataset(&config, &records, threshold)?;
            write_records(&out, &kept)?;
            log::info!("kept {} of {} records", kept.len(), records.len());
        }
        Command::Bps {
            scene,
            records,
            out,
        } => {
            let scene = LoadedScene::load(&scene)?;
            let records = read_records(&records)?;
            write_records(&out, &pipeline::attach_bps(&scene, &config, &records)?)?;
        }
        Command::Train { dataset, out } => {
            let records = read_records(&dataset)?;
            let seed = cli.seed.unwrap_or(config.train.seed);
            let trained = pipeline::train(&config, &records, seed)?;
            write_checkpoint(&out, &trained.model)?;
            let trace = out.with_extension("loss.csv");
            std::fs::write(&trace, pipeline::loss_csv(&trained.loss_trace))
                .map_err(|e| Error::io(&trace, e))?;
            if let (Some(first), Some(last)) =
                (trained.loss_trace.first(), trained.loss_trace.last())
            {
                log::info!("probe loss {first:.4} -> {last:.4}");
            }
        }
        Command::Sample {
            checkpoint,
            scene,
            hand,
            n,
            out,
        } => {
            let scene = LoadedScene::load(&scene)?;
            let hand = load_hand_or_bundled(hand.as_deref())?;
            let model = read_checkpoint(&checkpoint)?;
            let records = pipeline::sample(&scene, &hand, &config, &model, scene_seed(&scene), n)?;
            write_records(&out, &records)?;
        }
        Command::Export {
            scene,
            records,
            hand,
            out,
        } => {
            let scene = LoadedScene::load(&scene)?;
            let hand = load_hand_or_bundled(hand.as_deref())?;
            let records = read_records(&records)?;
            let written = pipeline::export(&scene, &hand, &config, &records, &out)?;
            log::info!("wrote {} meshes to {}", written.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let jobs = cli.jobs;
    match par::with_jobs(jobs, || run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
