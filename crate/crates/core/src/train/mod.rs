//! Training loop, checkpoints, evaluation over stored splits and the
//! gradient-check suite.

mod adam;
mod checkpoint;
mod gradcheck;
mod schedule;

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use adam::Adam;
pub use checkpoint::{
    load_checkpoint, load_history, save_checkpoint, ModelFile, HISTORY_FILE, MODEL_FILE,
    PARAMS_FILE,
};
pub use gradcheck::{composite_suite, gradcheck_suite};
pub use schedule::{lr_schedule_step, replay, Decision, ScheduleState};

use crate::autodiff::{Tape, Tensor};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_set, total_loss, Enhancer, LossConfig, LossReport, MetricReport};
use crate::model::{AecModel, ModelConfig, ModelInput};
use crate::signal::energy;
use crate::synth::{ClipSource, Manifest, Mixture};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    /// Non-improving epochs in a row before the rate halves.
    pub plateau_epochs: usize,
    /// Non-improving epochs in a row before training stops.
    pub stop_epochs: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Optional cap on optimizer steps over the whole run.
    pub max_steps: Option<usize>,
    pub seed: u64,
    pub model: ModelConfig,
    pub loss: LossConfig,
    /// Weight of an extra loss pulling the denoised RIR towards the clean
    /// one; fusion (d) only, off by default.
    pub denoiser_aux_weight: f64,
    pub train_dir: Option<PathBuf>,
    pub val_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            plateau_epochs: 2,
            stop_epochs: 10,
            batch_size: 8,
            max_epochs: 50,
            max_steps: None,
            seed: 0,
            model: ModelConfig::default(),
            loss: LossConfig::default(),
            denoiser_aux_weight: 0.0,
            train_dir: None,
            val_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.lr > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.plateau_epochs == 0 || self.plateau_epochs >= self.stop_epochs {
            return Err(Error::Config(
                "need 0 < plateau_epochs < stop_epochs".into(),
            ));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "batch size and epoch count must be positive".into(),
            ));
        }
        if self.denoiser_aux_weight < 0.0 {
            return Err(Error::Config(
                "auxiliary weight must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Rate used during this epoch.
    pub lr: f64,
    pub steps: usize,
    pub improved: bool,
    pub halved: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_loss: Option<f64>,
    pub stopped_early: bool,
    pub param_digest: String,
}

pub struct TrainOutcome {
    /// Parameters of the best validation epoch.
    pub model: AecModel,
    pub history: RunHistory,
}

fn model_input(clip: &Mixture) -> ModelInput<'_> {
    ModelInput {
        y: clip.y.samples(),
        x: clip.x.samples(),
        rir: Some(clip.rir_noisy.taps()),
    }
}

/// Loss of one clip and, when `grads` is set, parameter gradients in store
/// order.
pub fn clip_step(
    model: &AecModel,
    clip: &Mixture,
    cfg: &TrainConfig,
    grads: bool,
) -> Result<(LossReport, Option<Vec<Tensor>>)> {
    let mut tape = Tape::new();
    let params = model.params.attach(&mut tape);
    let out = model.forward(&mut tape, &params, model_input(clip))?;
    let loss = total_loss(&mut tape, out.s_hat, clip.s.samples(), &cfg.loss)?;
    let report = loss.report(&tape);
    if !report.is_finite() {
        return Err(Error::NonFiniteLoss {
            clip: clip.id().to_string(),
            ri: report.l_ri,
            mag: report.l_mag,
            ssisnr: report.l_ssisnr,
        });
    }
    if !grads {
        return Ok((report, None));
    }
    let mut objective = loss.total;
    if let (Some(d), true) = (out.denoised, cfg.denoiser_aux_weight > 0.0) {
        let clean = clip.rir_clean.taps();
        let n = tape.shape(d)[0];
        let mut target = clean[..clean.len().min(n)].to_vec();
        target.resize(n, 0.0);
        let norm = energy(&target).max(1e-12);
        let t = tape.constant(Tensor::from_vec(target));
        let diff = tape.sub(d, t)?;
        let sq = tape.sum_squares(diff);
        let aux = tape.scale(sq, cfg.denoiser_aux_weight / norm);
        objective = tape.add(objective, aux)?;
    }
    let mut g = tape.backward(objective)?;
    let grads = params.collect_grads(&tape, &mut g);
    if grads.iter().any(|t| !t.all_finite()) {
        return Err(Error::NonFiniteValue(format!(
            "gradients of clip {}",
            clip.id()
        )));
    }
    Ok((report, Some(grads)))
}

/// Mean total loss over a set, in clip order.
pub fn mean_loss(model: &AecModel, source: &dyn ClipSource, cfg: &TrainConfig) -> Result<f64> {
    if source.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    let losses = (0..source.len())
        .into_par_iter()
        .map(|i| Ok(clip_step(model, &source.clip(i)?, cfg, false)?.0.l_total))
        .collect::<Result<Vec<f64>>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

fn derived_seed(seed: u64, tag: &str, n: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    h.update(n.to_le_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

/// Trains a fresh model on `train`, scoring `val` after every epoch, and
/// returns the parameters of the best validation epoch. Every source of
/// randomness derives from `cfg.seed`; batches reduce gradients in clip
/// order, so runs are reproducible regardless of thread count.
pub fn train(
    cfg: &TrainConfig,
    train: &dyn ClipSource,
    val: &dyn ClipSource,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut model = AecModel::new(cfg.model.clone(), derived_seed(cfg.seed, "init", 0))?;
    let mut adam = Adam::new(&model.params);
    let mut best = model.params.clone();
    let mut schedule = ScheduleState::new(cfg.lr);
    let mut history = RunHistory::default();
    let mut steps = 0usize;

    for epoch in 1..=cfg.max_epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derived_seed(
            cfg.seed,
            "epoch",
            epoch as u64,
        )));
        let lr = schedule.lr;
        let (mut loss_sum, mut seen, mut epoch_steps) = (0.0, 0usize, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            if cfg.max_steps.is_some_and(|m| steps >= m) {
                break;
            }
            let results = batch
                .par_iter()
                .map(|&i| {
                    let clip = train.clip(i)?;
                    clip_step(&model, &clip, cfg, true)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut acc: Option<Vec<Tensor>> = None;
            for (report, grads) in results {
                loss_sum += report.l_total;
                seen += 1;
                let grads = grads.expect("requested");
                match acc.as_mut() {
                    None => acc = Some(grads),
                    Some(a) => a.iter_mut().zip(&grads).for_each(|(x, g)| x.add_assign(g)),
                }
            }
            let mut acc = acc.expect("non-empty batch");
            acc.iter_mut()
                .for_each(|g| g.scale_assign(1.0 / batch.len() as f64));
            adam.step(&mut model.params, &acc, lr)?;
            steps += 1;
            epoch_steps += 1;
        }
        if seen == 0 {
            break;
        }
        let train_loss = loss_sum / seen as f64;
        let val_loss = if val.is_empty() {
            train_loss
        } else {
            mean_loss(&model, val, cfg)?
        };
        let (next, decision) =
            lr_schedule_step(schedule, val_loss, cfg.plateau_epochs, cfg.stop_epochs);
        schedule = next;
        if decision.improved {
            best = model.params.clone();
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr,
            steps: epoch_steps,
            improved: decision.improved,
            halved: decision.halved,
        };
        on_epoch(&record);
        history.epochs.push(record);
        if decision.stop {
            history.stopped_early = true;
            break;
        }
    }
    history.best_epoch = schedule.best_epoch;
    history.best_val_loss = schedule.best;
    history.param_digest = best.digest();
    let model = AecModel::from_parts(cfg.model.clone(), best)?;
    Ok(TrainOutcome { model, history })
}

impl Enhancer for AecModel {
    fn name(&self) -> String {
        format!("aec:{}", self.config.fusion)
    }

    fn enhance(&self, clip: &Mixture) -> Result<Vec<f64>> {
        AecModel::enhance(self, model_input(clip))
    }
}

/// Scores `enhancer` on every split directory that exists; missing
/// directories are skipped and returned.
pub fn evaluate_dirs(
    enhancer: &dyn Enhancer,
    dirs: &[PathBuf],
) -> Result<(MetricReport, Vec<PathBuf>)> {
    let mut report = MetricReport::default();
    let mut skipped = Vec::new();
    for dir in dirs {
        if !dir.join(crate::synth::MANIFEST_FILE).is_file() {
            skipped.push(dir.clone());
            continue;
        }
        report.extend(evaluate_set(enhancer, &Manifest::load(dir)?)?);
    }
    Ok((report, skipped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::split::Split;
    use crate::synth::{ScenarioConfig, SynthSet, Synthesizer};

    fn tiny_set(count: usize, seed: u64) -> Vec<Mixture> {
        let set = SynthSet {
            synth: Synthesizer::new(ScenarioConfig {
                clip_seconds: 0.5,
                double_talk_fraction: 1.0,
                ..Default::default()
            })
            .unwrap(),
            split: Split::Train,
            count,
            master_seed: seed,
        };
        (0..count).map(|i| set.clip(i).unwrap()).collect()
    }

    #[test]
    fn same_seed_same_parameters() {
        let data = tiny_set(3, 1);
        let cfg = TrainConfig {
            batch_size: 2,
            max_epochs: 2,
            ..Default::default()
        };
        let a = train(&cfg, &data, &data, &mut |_| {}).unwrap();
        let b = train(&cfg, &data, &data, &mut |_| {}).unwrap();
        assert_eq!(a.model.params.digest(), b.model.params.digest());
        assert_eq!(a.history, b.history);
        assert_eq!(a.history.epochs.len(), 2);
    }

    #[test]
    fn checkpoint_round_trip() {
        let data = tiny_set(2, 2);
        let cfg = TrainConfig {
            batch_size: 2,
            max_epochs: 1,
            model: ModelConfig::with_fusion(crate::fusion::FusionKind::B),
            ..Default::default()
        };
        let out = train(&cfg, &data, &data, &mut |_| {}).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(dir.path(), &out.model, Some(&out.history)).unwrap();
        let back = load_checkpoint(dir.path()).unwrap();
        assert_eq!(back.params, out.model.params);
        assert_eq!(back.config, out.model.config);
        assert_eq!(load_history(dir.path()).unwrap(), out.history);
        let e1 = crate::metrics::evaluate_source(&out.model, &data).unwrap();
        let e2 = crate::metrics::evaluate_source(&back, &data).unwrap();
        assert_eq!(e1.to_csv(), e2.to_csv());

        std::fs::write(
            dir.path().join(PARAMS_FILE),
            vec![0u8; out.model.num_params() * 8],
        )
        .unwrap();
        assert!(load_checkpoint(dir.path()).is_err());
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            TrainConfig {
                lr: 0.0,
                ..Default::default()
            },
            TrainConfig {
                plateau_epochs: 10,
                ..Default::default()
            },
            TrainConfig {
                batch_size: 0,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }
}
