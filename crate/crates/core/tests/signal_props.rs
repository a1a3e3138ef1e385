mod common;

use proptest::prelude::*;
use rirprompt_core::signal::{convolve, stft, Complex64, StftConfig};

use common::white;

fn presets() -> impl Strategy<Value = StftConfig> {
    prop_oneof![Just(StftConfig::MODEL), Just(StftConfig::LOSS)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stft_is_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0, cfg in presets()) {
        let w = white(4000, 1.0, seed);
        let u = white(4000, 1.0, seed + 1);
        let mix: Vec<f64> = w.iter().zip(&u).map(|(p, q)| a * p + b * q).collect();
        let (sm, sw, su) = (stft(&mix, &cfg).unwrap(), stft(&w, &cfg).unwrap(), stft(&u, &cfg).unwrap());
        for ((m, p), q) in sm.data().iter().zip(sw.data()).zip(su.data()) {
            prop_assert!((m - (p * a + q * b)).norm() < 1e-9);
        }
    }

    #[test]
    fn frame_energy_matches_spectrum(seed in 0u64..1000, cfg in presets()) {
        let x = white(3000, 1.0, seed);
        let spec = stft(&x, &cfg).unwrap();
        let win = cfg.window();
        let n = cfg.fft_len as f64;
        for t in 0..spec.frames() {
            let frame = &x[t * cfg.hop..t * cfg.hop + cfg.win_len];
            let time: f64 = frame.iter().zip(&win).map(|(v, w)| (v * w).powi(2)).sum();
            // one-sided spectrum: interior bins stand for two
            let bins = spec.frame(t);
            let last = bins.len() - 1;
            let freq: f64 = bins
                .iter()
                .enumerate()
                .map(|(f, z): (usize, &Complex64)| {
                    let k = if f == 0 || (f == last && cfg.fft_len % 2 == 0) { 1.0 } else { 2.0 };
                    k * z.norm_sqr()
                })
                .sum::<f64>()
                / n;
            prop_assert!((time - freq).abs() <= 1e-6 * time.max(1e-12));
        }
    }

    #[test]
    fn convolution_commutes(seed in 0u64..1000, nx in 1usize..600, nh in 1usize..600) {
        let x = white(nx, 1.0, seed);
        let h = white(nh, 1.0, seed + 7);
        let a = convolve(&x, &h).unwrap();
        let b = convolve(&h, &x).unwrap();
        prop_assert_eq!(a.len(), nx + nh - 1);
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() < 1e-10);
        }
    }
}
