mod common;

use proptest::prelude::*;

use rirprompt_core::autodiff::Tape;
use rirprompt_core::fusion::{spectrum_tensor, FusionKind};
use rirprompt_core::metrics::erle;
use rirprompt_core::model::{AecModel, ModelConfig, ModelInput};
use rirprompt_core::synth::Scenario;

use common::white;

fn kinds() -> impl Strategy<Value = FusionKind> {
    proptest::sample::select(FusionKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn mask_is_bounded_and_never_amplifies(seed in 0u64..1000, kind in kinds(), scale in 0.01f64..2.0) {
        let m = AecModel::new(ModelConfig::with_fusion(kind), seed).unwrap();
        let (y, x, h) = (white(2400, scale, seed), white(2400, scale, seed + 1), white(8000, 0.05, seed + 2));
        let mut tape = Tape::new();
        let p = m.params.attach(&mut tape);
        let out = m.forward(&mut tape, &p, ModelInput { y: &y, x: &x, rir: Some(&h) }).unwrap();
        let ys = spectrum_tensor(&y, &m.config.stft).unwrap();
        let (mask, s) = (tape.value(out.mask).data(), tape.value(out.s_spec).data());
        let plane = mask.len() / 2;
        for i in 0..plane {
            prop_assert!(mask[i].hypot(mask[plane + i]) < 1.0);
            prop_assert!(s[i].hypot(s[plane + i]) <= ys.data()[i].hypot(ys.data()[plane + i]) * (1.0 + 1e-12));
        }
    }

    /// Output samples before a cut depend only on input before the cut,
    /// up to one analysis window of look-back in the synthesis overlap.
    #[test]
    fn output_is_causal(seed in 0u64..1000, kind in kinds(), frame in 4usize..12) {
        let m = AecModel::new(ModelConfig::with_fusion(kind), seed).unwrap();
        let (y, x, h) = (white(3200, 0.2, seed), white(3200, 0.2, seed + 1), white(8000, 0.05, seed + 2));
        let cut = 160 * frame + 320;
        let zero_after = |v: &[f64]| {
            let mut v = v.to_vec();
            v[cut..].iter_mut().for_each(|s| *s = 0.0);
            v
        };
        let a = m.enhance(ModelInput { y: &y, x: &x, rir: Some(&h) }).unwrap();
        let b = m.enhance(ModelInput { y: &zero_after(&y), x: &zero_after(&x), rir: Some(&h) }).unwrap();
        let safe = 160 * frame;
        for (u, v) in a[..safe].iter().zip(&b[..safe]) {
            prop_assert!((u - v).abs() <= 1e-9 * u.abs().max(1e-3));
        }
    }

    /// On far-end single talk the estimate never carries more energy than
    /// the microphone signal.
    #[test]
    fn untrained_models_do_not_add_echo(seed in 0u64..1000, kind in kinds()) {
        let m = AecModel::new(ModelConfig::with_fusion(kind), seed).unwrap();
        let (y, x, h) = (white(4000, 0.3, seed), white(4000, 0.3, seed + 1), white(8000, 0.05, seed + 2));
        let s = m.enhance(ModelInput { y: &y, x: &x, rir: Some(&h) }).unwrap();
        prop_assert!(erle(Scenario::FarEndSingleTalk, &y, &s).unwrap() >= -0.1);
    }
}
