use rirprompt_core::fusion::FusionKind;
use rirprompt_core::metrics::{evaluate_source, LossConfig};
use rirprompt_core::model::ModelConfig;
use rirprompt_core::synth::{ClipSource, ScenarioConfig, SynthSet, Synthesizer};
use rirprompt_core::train::{clip_step, load_checkpoint, save_checkpoint, train, TrainConfig};
use rirprompt_core::Split;

fn tiny_set(split: Split, count: usize) -> SynthSet {
    let synth = Synthesizer::new(ScenarioConfig {
        clip_seconds: 0.5,
        ..Default::default()
    })
    .unwrap();
    SynthSet {
        synth,
        split,
        count,
        master_seed: 11,
    }
}

fn spectral(model: &rirprompt_core::model::AecModel, set: &SynthSet, cfg: &TrainConfig) -> f64 {
    (0..set.len())
        .map(|i| {
            let (r, _) = clip_step(model, &set.clip(i).unwrap(), cfg, false).unwrap();
            r.l_ri + r.l_mag
        })
        .sum::<f64>()
        / set.len() as f64
}

#[test]
fn overfits_four_clips() {
    let set = tiny_set(Split::Train, 4);
    let cfg = TrainConfig {
        batch_size: 4,
        max_epochs: 200,
        stop_epochs: 201,
        plateau_epochs: 200,
        lr: 3e-3,
        seed: 5,
        model: ModelConfig::with_fusion(FusionKind::None),
        loss: LossConfig::default(),
        ..Default::default()
    };
    let fresh = rirprompt_core::model::AecModel::new(cfg.model.clone(), 0).unwrap();
    let before = spectral(&fresh, &set, &cfg);
    let outcome = train(&cfg, &set, &set, &mut |_| {}).unwrap();
    let after = spectral(&outcome.model, &set, &cfg);
    assert!(
        after < 0.5 * before,
        "spectral loss {before:.4} -> {after:.4}"
    );
}

#[test]
fn checkpoint_reload_gives_identical_metrics() {
    let cfg = TrainConfig {
        batch_size: 2,
        max_epochs: 1,
        seed: 6,
        model: ModelConfig::with_fusion(FusionKind::D),
        ..Default::default()
    };
    let (tr, val) = (tiny_set(Split::Train, 2), tiny_set(Split::Match, 4));
    let outcome = train(&cfg, &tr, &val, &mut |_| {}).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_checkpoint(dir.path(), &outcome.model, Some(&outcome.history)).unwrap();
    let loaded = load_checkpoint(dir.path()).unwrap();
    let a = evaluate_source(&outcome.model, &val).unwrap();
    let b = evaluate_source(&loaded, &val).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
}
