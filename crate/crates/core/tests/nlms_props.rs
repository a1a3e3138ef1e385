mod common;

use proptest::prelude::*;

use rirprompt_core::nlms::{nlms_run, NlmsConfig};

use common::white;

fn norm(w: &[f64]) -> f64 {
    w.iter().map(|v| v * v).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn weights_stay_finite(seed in 0u64..1000, taps in 1usize..64, mu in 0.01f64..1.99, gap in 0usize..400) {
        let mut x = white(800, 1.0, seed);
        // a silent stretch exercises the regularizer
        x[200..200 + gap].iter_mut().for_each(|v| *v = 0.0);
        let y = white(800, 1.0, seed + 1);
        let cfg = NlmsConfig { taps, mu, eps: 1e-9, ..Default::default() };
        let out = nlms_run(&x, &y, &cfg, None).unwrap();
        prop_assert!(out.weights.iter().chain(&out.e).all(|v| v.is_finite()));
    }

    /// From the same state a larger regularizer takes a shorter step.
    #[test]
    fn doubling_eps_never_lengthens_the_step(seed in 0u64..1000, taps in 1usize..64, eps in 1e-8f64..1.0, n in 1usize..64) {
        let x = white(n, 1.0, seed);
        let mut y = vec![0.0; n];
        y[n - 1] = 1.0 + white(1, 1.0, seed + 1)[0];
        let cfg = NlmsConfig { taps, eps, ..Default::default() };
        let a = nlms_run(&x, &y, &cfg, None).unwrap();
        let b = nlms_run(&x, &y, &NlmsConfig { eps: 2.0 * eps, ..cfg }, None).unwrap();
        prop_assert!(norm(&b.weights) <= norm(&a.weights) * (1.0 + 1e-12));
    }
}
