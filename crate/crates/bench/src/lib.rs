//! Shared inputs for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rirprompt_core::rir::{image_method, AbsorptionModel, Rir, RoomSpec, RIR_LEN};

pub fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect()
}

pub fn room() -> RoomSpec {
    RoomSpec::new([6.0, 5.0, 3.0], [2.3, 2.0, 1.5], [2.0, 2.0, 1.5], 0.4).expect("valid room")
}

pub fn rir() -> Rir {
    image_method(&room(), RIR_LEN, AbsorptionModel::default()).expect("valid room")
}
