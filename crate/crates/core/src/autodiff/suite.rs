//! Finite-difference checks of every primitive, shared by the unit tests,
//! the `gradcheck` command and the acceptance suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{grad_check, Conv2dSpec, Tape, Tensor, Var};
use crate::error::Result;
use crate::signal::StftConfig;

/// Tolerance every primitive must meet.
pub const PRIMITIVE_TOLERANCE: f64 = 1e-5;
/// Tolerance for composite pipelines.
pub const COMPOSITE_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

fn random(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .expect("sized from shape")
}

/// `sum(v ⊙ r)` for a fixed random `r`, so every output element carries a
/// distinct weight.
pub fn weighted_sum(tape: &mut Tape, v: Var, seed: u64) -> Result<Var> {
    let w = tape.constant(random(tape.shape(v), seed ^ 0x5eed));
    let p = tape.mul(v, w)?;
    Ok(tape.sum(p))
}

type CheckFn = Box<dyn Fn() -> Result<f64>>;

fn unary(f: fn(&mut Tape, Var) -> Result<Var>, shape: &'static [usize]) -> CheckFn {
    Box::new(move || {
        grad_check(
            |t, v| {
                let y = f(t, v[0])?;
                weighted_sum(t, y, 1)
            },
            &[random(shape, 2)],
            1e-5,
        )
    })
}

fn checks() -> Vec<(&'static str, CheckFn)> {
    let cfg_small = StftConfig::MODEL;
    vec![
        (
            "linear",
            Box::new(|| {
                grad_check(
                    |t, v| {
                        let y = t.linear(v[0], v[1], Some(v[2]))?;
                        weighted_sum(t, y, 3)
                    },
                    &[random(&[2, 3, 4], 4), random(&[5, 4], 5), random(&[5], 6)],
                    1e-5,
                )
            }) as CheckFn,
        ),
        (
            "conv2d_stride2",
            Box::new(|| {
                grad_check(
                    |t, v| {
                        let y = t.conv2d(
                            v[0],
                            v[1],
                            v[2],
                            Conv2dSpec {
                                stride_f: 2,
                                pad_f: 1,
                            },
                        )?;
                        weighted_sum(t, y, 7)
                    },
                    &[
                        random(&[1, 2, 7, 5], 8),
                        random(&[3, 2, 3, 3], 9),
                        random(&[3], 10),
                    ],
                    1e-5,
                )
            }),
        ),
        (
            "conv2d_stride1",
            Box::new(|| {
                grad_check(
                    |t, v| {
                        let y = t.conv2d(
                            v[0],
                            v[1],
                            v[2],
                            Conv2dSpec {
                                stride_f: 1,
                                pad_f: 1,
                            },
                        )?;
                        weighted_sum(t, y, 11)
                    },
                    &[
                        random(&[2, 2, 4, 3], 12),
                        random(&[2, 2, 3, 3], 13),
                        random(&[2], 14),
                    ],
                    1e-5,
                )
            }),
        ),
        (
            "recurrent_cell",
            Box::new(|| {
                grad_check(
                    |t, v| {
                        let y = t.gru(v[0], v[1], v[2], v[3], v[4])?;
                        weighted_sum(t, y, 15)
                    },
                    &[
                        random(&[5, 3], 16),
                        random(&[12, 3], 17),
                        random(&[12, 4], 18),
                        random(&[12], 19),
                        random(&[12], 20),
                    ],
                    1e-5,
                )
            }),
        ),
        ("gelu", unary(|t, v| Ok(t.gelu(v)), &[3, 7])),
        ("sigmoid", unary(|t, v| Ok(t.sigmoid(v)), &[3, 7])),
        ("tanh", unary(|t, v| Ok(t.tanh(v)), &[3, 7])),
        ("scale", unary(|t, v| Ok(t.scale(v, -1.7)), &[4])),
        (
            "add_sub_mul",
            Box::new(|| {
                grad_check(
                    |t, v| {
                        let a = t.add(v[0], v[1])?;
                        let s = t.sub(a, v[1])?;
                        let m = t.mul(s, v[1])?;
                        let m = t.mul(m, v[0])?;
                        weighted_sum(t, m, 21)
                    },
                    &[random(&[2, 3], 22), random(&[2, 3], 23)],
                    1e-5,
                )
            }),
        ),
        (
            "concat",
            Box::new(|| {
                grad_check(
                    |t, v| {
                        let c = t.concat(&[v[0], v[1], v[0]], 1)?;
                        weighted_sum(t, c, 24)
                    },
                    &[random(&[2, 1, 3], 25), random(&[2, 4, 3], 26)],
                    1e-5,
                )
            }),
        ),
        ("reshape", unary(|t, v| t.reshape(v, &[6, 2]), &[3, 4])),
        (
            "permute",
            unary(|t, v| t.permute(v, &[2, 0, 1]), &[2, 3, 4]),
        ),
        ("mean_axis", unary(|t, v| t.mean_axis(v, 1), &[2, 5, 3])),
        ("narrow", unary(|t, v| t.narrow(v, 2, 1, 2), &[2, 3, 4])),
        ("pad", unary(|t, v| t.pad(v, 1, 2, 1), &[2, 3, 2])),
        ("repeat", unary(|t, v| t.repeat(v, 2, 3), &[2, 2, 1])),
        (
            "gather",
            unary(|t, v| t.gather(v, 0, vec![0, 0, 2, 1, 2]), &[3, 2]),
        ),
        ("sum_squares", unary(|t, v| Ok(t.sum_squares(v)), &[5])),
        (
            "stft",
            Box::new(move || {
                grad_check(
                    |t, v| {
                        let s = t.stft(v[0], cfg_small)?;
                        weighted_sum(t, s, 27)
                    },
                    &[random(&[640], 28)],
                    1e-5,
                )
            }),
        ),
        (
            "istft",
            Box::new(move || {
                grad_check(
                    |t, v| {
                        let s = t.istft(v[0], cfg_small)?;
                        weighted_sum(t, s, 29)
                    },
                    &[random(&[1, 2, 161, 3], 30)],
                    1e-5,
                )
            }),
        ),
        (
            "convolve",
            Box::new(|| {
                grad_check(
                    |t, v| {
                        let y = t.convolve(v[0], v[1])?;
                        weighted_sum(t, y, 31)
                    },
                    &[random(&[40], 32), random(&[600], 33)],
                    1e-5,
                )
            }),
        ),
        ("compress", unary(|t, v| t.compress(v, 0.5), &[1, 2, 3, 4])),
        (
            "magnitude_pow",
            unary(|t, v| t.magnitude_pow(v, 0.5), &[1, 2, 3, 4]),
        ),
        (
            "bounded_mask",
            unary(|t, v| t.bounded_mask(v), &[1, 2, 3, 4]),
        ),
        (
            "complex_mul",
            Box::new(|| {
                grad_check(
                    |t, v| {
                        let y = t.complex_mul(v[0], v[1])?;
                        weighted_sum(t, y, 34)
                    },
                    &[random(&[2, 3, 2], 35), random(&[2, 3, 2], 36)],
                    1e-5,
                )
            }),
        ),
        (
            "s_sisnr",
            Box::new(|| {
                let reference = random(&[64], 37);
                grad_check(
                    move |t, v| t.s_sisnr(v[0], reference.data()),
                    &[random(&[64], 38)],
                    1e-5,
                )
            }),
        ),
    ]
}

/// Runs every primitive check.
pub fn primitive_suite() -> Result<Vec<CheckResult>> {
    checks()
        .into_iter()
        .map(|(name, f)| {
            Ok(CheckResult {
                name: name.to_string(),
                max_rel_error: f()?,
                tolerance: PRIMITIVE_TOLERANCE,
            })
        })
        .collect()
}
