mod common;

use proptest::prelude::*;

use rirprompt_core::autodiff::{Tape, Tensor};

use common::white;

fn tensor(shape: &[usize], seed: u64) -> Tensor {
    Tensor::new(shape.to_vec(), white(shape.iter().product(), 1.0, seed)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// A node used twice receives the sum of both incoming gradients.
    #[test]
    fn fan_out_sums_gradients(seed in 0u64..1000, n in 1usize..40, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mut t = Tape::new();
        let x = t.param(tensor(&[n], seed));
        let p = t.scale(x, a);
        let q = t.scale(x, b);
        let y = t.add(p, q).unwrap();
        let l = t.sum(y);
        let g = t.backward(l).unwrap();
        for v in g.get(x).unwrap().data() {
            prop_assert!((v - (a + b)).abs() < 1e-12);
        }
    }

    /// Reshape, permute, concat and narrow only move gradient entries around.
    #[test]
    fn layout_ops_conserve_gradient_energy(seed in 0u64..1000, c in 1usize..4, f in 1usize..6, w in 2usize..7) {
        let mut t = Tape::new();
        let x = t.param(tensor(&[1, c, f, w], seed));
        let z = t.param(tensor(&[1, c, f, 3], seed + 1));
        let r = t.reshape(x, &[c, f * w]).unwrap();
        let r = t.reshape(r, &[1, c, f, w]).unwrap();
        let p = t.permute(r, &[0, 3, 1, 2]).unwrap();
        let p = t.permute(p, &[0, 2, 3, 1]).unwrap();
        let cat = t.concat(&[p, z], 3).unwrap();
        let crop = t.narrow(cat, 3, 0, w + 3).unwrap();
        let up = tensor(&[1, c, f, w + 3], seed + 2);
        let weights = t.constant(up.clone());
        let prod = t.mul(crop, weights).unwrap();
        let l = t.sum(prod);
        let g = t.backward(l).unwrap();
        let total = g.get(x).unwrap().norm_sq() + g.get(z).unwrap().norm_sq();
        prop_assert!((total - up.norm_sq()).abs() < 1e-9 * up.norm_sq().max(1.0));
    }
}
