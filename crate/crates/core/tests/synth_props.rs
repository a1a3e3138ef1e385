use proptest::prelude::*;

use rirprompt_core::signal::db_ratio;
use rirprompt_core::synth::{clip_seed, Scenario, ScenarioConfig, Synthesizer};
use rirprompt_core::Split;

fn short() -> Synthesizer {
    Synthesizer::new(ScenarioConfig {
        clip_seconds: 0.5,
        ..Default::default()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mixture_is_the_exact_sum(master in 0u64..1000, index in 0usize..10_000) {
        let m = short().clip(Split::Train, index, clip_seed(master, Split::Train, index)).unwrap();
        for i in 0..m.y.len() {
            prop_assert_eq!(m.y.samples()[i] - (m.s.samples()[i] + m.v.samples()[i] + m.d.samples()[i]), 0.0);
        }
    }

    #[test]
    fn stored_ratios_match_components(master in 0u64..1000, index in 0usize..10_000) {
        let m = short().clip(Split::Mismatch, index, clip_seed(master, Split::Mismatch, index)).unwrap();
        let (es, ev, ed) = (m.s.energy(), m.v.energy(), m.d.energy());
        if let Some(ser) = m.spec.ser_db_measured {
            prop_assert!((db_ratio(es, ev) - ser).abs() < 1e-6);
        }
        if let Some(snr) = m.spec.snr_db_measured {
            let reference = if m.scenario() == Scenario::DoubleTalk { es } else { ev };
            prop_assert!((db_ratio(reference, ed) - snr).abs() < 1e-6);
        }
    }

    #[test]
    fn near_end_energy_follows_scenario(master in 0u64..1000, index in 0usize..10_000) {
        let m = short().clip(Split::Val, index, clip_seed(master, Split::Val, index)).unwrap();
        match m.scenario() {
            Scenario::DoubleTalk => prop_assert!(m.s.energy() > 0.0),
            Scenario::FarEndSingleTalk => prop_assert_eq!(m.s.energy(), 0.0),
        }
    }
}
