use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use rirprompt_core::fusion::FusionKind;
use rirprompt_core::metrics::{Enhancer, Identity, MetricReport};
use rirprompt_core::nlms::{NlmsConfig, NlmsEnhancer, NlmsInit};
use rirprompt_core::rir::{export_rir, image_method, sample_room, RIR_LEN};
use rirprompt_core::synth::{build_dataset, clip_seed, Manifest, ScenarioConfig, Synthesizer};
use rirprompt_core::train::{
    evaluate_dirs, gradcheck_suite, load_checkpoint, save_checkpoint, train, TrainConfig,
};
use rirprompt_core::Split;

/// Sections of the `--config` file; every field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Config {
    scenario: ScenarioConfig,
    train: TrainConfig,
    nlms: NlmsConfig,
}

#[derive(Parser)]
#[command(
    name = "rirprompt",
    version,
    about = "RIR-prompted neural echo cancellation toolkit"
)]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SetArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value = "train")]
    split: Split,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate room impulse responses for a split's room grid.
    Rir(SetArgs),
    /// Synthesize a dataset split with its manifest.
    Synth(SetArgs),
    /// Train a model and write its checkpoint.
    Train {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        val: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        fusion: Option<FusionKind>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score checkpoints (and the unprocessed mixture) on split directories.
    Eval {
        /// Checkpoint directories; may repeat.
        #[arg(long = "checkpoint")]
        checkpoints: Vec<PathBuf>,
        /// Split directories; may repeat. Missing ones are skipped.
        #[arg(long = "data", required = true)]
        data: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also score the unprocessed microphone signal.
        #[arg(long)]
        mix: bool,
    },
    /// Finite-difference check of every primitive and composite.
    Gradcheck,
    /// Score the NLMS baseline on split directories.
    Nlms {
        #[arg(long = "data", required = true)]
        data: Vec<PathBuf>,
        #[arg(long)]
        init: Option<NlmsInit>,
        /// Fusion (d) checkpoint providing the denoiser.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_report(report: &MetricReport, out: &Path) -> Result<()> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    report.write_csv(out)?;
    print!("{}", report.to_csv());
    Ok(())
}

fn score(enhancer: &dyn Enhancer, data: &[PathBuf], report: &mut MetricReport) -> Result<()> {
    let (r, skipped) = evaluate_dirs(enhancer, data)?;
    for dir in skipped {
        eprintln!("warning: no manifest in {}, skipped", dir.display());
    }
    report.extend(r);
    Ok(())
}

fn rir(seed: u64, scenario: &ScenarioConfig, args: &SetArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out)?;
    for i in 0..args.count {
        let room_seed = clip_seed(seed, args.split, i);
        let room = sample_room(args.split, &mut ChaCha8Rng::seed_from_u64(room_seed))?;
        let h = image_method(&room, RIR_LEN, scenario.absorption)?;
        export_rir(
            &args.out,
            &format!("{}_rir_{i:06}", args.split),
            &h,
            room_seed,
        )?;
    }
    println!("wrote {} RIRs to {}", args.count, args.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Rir(args) => rir(cli.seed, &cfg.scenario, &args)?,
        Command::Synth(args) => {
            let synth = Synthesizer::new(cfg.scenario)?;
            let m = build_dataset(&synth, args.split, args.count, cli.seed, &args.out)?;
            println!("wrote {} clips to {}", m.records.len(), args.out.display());
        }
        Command::Train {
            train: train_dir,
            val,
            out,
            fusion,
            epochs,
        } => {
            let tc = &mut cfg.train;
            tc.seed = cli.seed;
            if let Some(f) = fusion {
                tc.model.fusion = f;
            }
            if let Some(e) = epochs {
                tc.max_epochs = e;
            }
            tc.train_dir = train_dir.or(tc.train_dir.take());
            tc.val_dir = val.or(tc.val_dir.take());
            let Some(train_dir) = tc.train_dir.clone() else {
                bail!("no training set: pass --train or set train.train_dir");
            };
            let train_set = Manifest::load(&train_dir)?;
            let val_set = match &tc.val_dir {
                Some(d) => Manifest::load(d)?,
                None => Manifest {
                    dir: train_dir,
                    records: Vec::new(),
                },
            };
            let outcome = train(tc, &train_set, &val_set, &mut |r| {
                println!(
                    "epoch {:3}  train {:.5}  val {:.5}  lr {:.2e}{}",
                    r.epoch,
                    r.train_loss,
                    r.val_loss,
                    r.lr,
                    if r.improved { "  *" } else { "" }
                )
            })?;
            save_checkpoint(&out, &outcome.model, Some(&outcome.history))?;
            println!(
                "best epoch {} ({} parameters) saved to {}",
                outcome.history.best_epoch,
                outcome.model.num_params(),
                out.display()
            );
        }
        Command::Eval {
            checkpoints,
            data,
            out,
            mix,
        } => {
            let mut report = MetricReport::default();
            if mix {
                score(&Identity, &data, &mut report)?;
            }
            for dir in &checkpoints {
                let model =
                    load_checkpoint(dir).with_context(|| format!("loading {}", dir.display()))?;
                score(&model, &data, &mut report)?;
            }
            if report.clips.is_empty() {
                bail!("nothing was evaluated");
            }
            write_report(&report, &out)?;
        }
        Command::Gradcheck => {
            let results = gradcheck_suite()?;
            let mut ok = true;
            println!(
                "{:<24} {:>12} {:>10}  result",
                "check", "max rel err", "tolerance"
            );
            for r in &results {
                ok &= r.passed();
                println!(
                    "{:<24} {:>12.3e} {:>10.0e}  {}",
                    r.name,
                    r.max_rel_error,
                    r.tolerance,
                    if r.passed() { "ok" } else { "FAIL" }
                );
            }
            return Ok(ok);
        }
        Command::Nlms {
            data,
            init,
            checkpoint,
            out,
        } => {
            let mut nc = cfg.nlms;
            if let Some(i) = init {
                nc.init = i;
            }
            let enhancer = match checkpoint {
                Some(dir) => {
                    let model = load_checkpoint(&dir)?;
                    if model.config.fusion != FusionKind::D {
                        bail!("{} is not a fusion (d) checkpoint", dir.display());
                    }
                    NlmsEnhancer::with_denoiser(nc, model.params, model.config.prompt)
                }
                None => NlmsEnhancer::new(nc),
            };
            let mut report = MetricReport::default();
            score(&enhancer, &data, &mut report)?;
            if report.clips.is_empty() {
                bail!("nothing was evaluated");
            }
            write_report(&report, &out)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
