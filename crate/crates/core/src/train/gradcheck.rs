use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::suite::{primitive_suite, weighted_sum, CheckResult, COMPOSITE_TOLERANCE};
use crate::autodiff::{grad_check_with, Conv2dSpec, GradCheckConfig, ParamStore, Tensor};
use crate::error::Result;
use crate::fusion::{self, FusionKind, PromptConfig};
use crate::metrics::{total_loss, LossConfig};
use crate::model::{AecModel, ModelConfig, ModelInput};

fn random_vec(n: usize, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn random(shape: &[usize], scale: f64, seed: u64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), random_vec(n, scale, seed)).expect("sized from shape")
}

fn probes() -> GradCheckConfig {
    GradCheckConfig {
        max_coords: 400,
        ..Default::default()
    }
}

fn store_with(
    init: impl FnOnce(&mut ParamStore, &mut ChaCha8Rng) -> Result<()>,
) -> Result<ParamStore> {
    let mut store = ParamStore::new();
    init(&mut store, &mut ChaCha8Rng::seed_from_u64(7))?;
    Ok(store)
}

fn fusion_a() -> Result<f64> {
    let cfg = PromptConfig::default();
    let store = store_with(|s, r| fusion::init_embed_params(s, &cfg, r))?;
    let rir = random_vec(cfg.l1, 0.2, 1);
    grad_check_with(
        |t, v| {
            let p = store.bind(v)?;
            let feat = fusion::rir_features(t, &rir, &cfg)?;
            let e = fusion::fusion_a_embed(t, &p, feat, 3)?;
            weighted_sum(t, e, 2)
        },
        &store.tensors(),
        probes(),
    )
}

/// Prepend, a causal convolution so the extra frame reaches later ones,
/// then strip.
fn fusion_b() -> Result<f64> {
    let spec = Conv2dSpec {
        stride_f: 1,
        pad_f: 1,
    };
    grad_check_with(
        |t, v| {
            let x = fusion::fusion_b_prepend(t, v[0], v[1])?;
            let y = t.conv2d(x, v[2], v[3], spec)?;
            let y = t.tanh(y);
            let y = fusion::fusion_b_strip(t, y)?;
            weighted_sum(t, y, 3)
        },
        &[
            random(&[1, 2, 9, 6], 1.0, 4),
            random(&[1, 4, 9, 5], 1.0, 5),
            random(&[3, 4, 3, 3], 0.5, 6),
            random(&[3], 0.5, 7),
        ],
        probes(),
    )
}

fn fusion_c() -> Result<f64> {
    let cfg = PromptConfig::default();
    let spec = Conv2dSpec {
        stride_f: 2,
        pad_f: 1,
    };
    grad_check_with(
        |t, v| {
            let stack = fusion::fusion_c_stack(t, v[0], 2, &cfg)?;
            let x = t.concat(&[v[1], stack], 1)?;
            let y = t.conv2d(x, v[2], v[3], spec)?;
            weighted_sum(t, y, 8)
        },
        &[
            random(&[1, 2, 5, 24], 1.0, 9),
            random(&[1, 4, 5, 2], 1.0, 10),
            random(&[2, 44, 3, 3], 0.2, 11),
            random(&[2], 0.2, 12),
        ],
        probes(),
    )
}

fn fusion_d() -> Result<f64> {
    let cfg = PromptConfig::default();
    let store = store_with(|s, r| fusion::init_denoiser_params(s, &cfg, r))?;
    let rir = random_vec(cfg.l1, 0.2, 13);
    let x = random_vec(1600, 0.5, 14);
    grad_check_with(
        |t, v| {
            let p = store.bind(v)?;
            let d = fusion::denoise_rir(t, &p, &rir, &cfg)?;
            let xv = t.constant(Tensor::from_vec(x.clone()));
            let echo = fusion::fusion_d_prompt_echo(t, d.rir, xv, &cfg)?;
            let spec = t.stft(echo, crate::signal::StftConfig::MODEL)?;
            let c = t.compress(spec, 0.5)?;
            weighted_sum(t, c, 15)
        },
        &store.tensors(),
        probes(),
    )
}

/// Whole model plus training loss, with respect to every parameter.
fn backbone(fusion: FusionKind) -> Result<f64> {
    let model = AecModel::new(ModelConfig::with_fusion(fusion), 16)?;
    let (y, x, s) = (
        random_vec(1600, 0.5, 17),
        random_vec(1600, 0.5, 18),
        random_vec(1600, 0.3, 19),
    );
    let rir = random_vec(8000, 0.1, 20);
    let loss = LossConfig::default();
    grad_check_with(
        |t, v| {
            let p = model.params.bind(v)?;
            let out = model.forward(
                t,
                &p,
                ModelInput {
                    y: &y,
                    x: &x,
                    rir: Some(&rir),
                },
            )?;
            Ok(total_loss(t, out.s_hat, &s, &loss)?.total)
        },
        &model.params.tensors(),
        probes(),
    )
}

fn loss_wrt_estimate() -> Result<f64> {
    let s = random_vec(1600, 0.3, 21);
    let cfg = LossConfig::default();
    grad_check_with(
        |t, v| Ok(total_loss(t, v[0], &s, &cfg)?.total),
        &[Tensor::from_vec(random_vec(1600, 0.3, 22))],
        probes(),
    )
}

/// Fusion pipelines, the backbone with its loss, and the loss alone.
pub fn composite_suite() -> Result<Vec<CheckResult>> {
    let checks: Vec<(&str, Box<dyn Fn() -> Result<f64>>)> = vec![
        ("fusion_a", Box::new(fusion_a)),
        ("fusion_b", Box::new(fusion_b)),
        ("fusion_c", Box::new(fusion_c)),
        ("fusion_d", Box::new(fusion_d)),
        ("backbone", Box::new(|| backbone(FusionKind::None))),
        ("backbone_d", Box::new(|| backbone(FusionKind::D))),
        ("total_loss", Box::new(loss_wrt_estimate)),
    ];
    checks
        .into_iter()
        .map(|(name, f)| {
            Ok(CheckResult {
                name: name.to_string(),
                max_rel_error: f()?,
                tolerance: COMPOSITE_TOLERANCE,
            })
        })
        .collect()
}

/// Every primitive followed by every composite.
pub fn gradcheck_suite() -> Result<Vec<CheckResult>> {
    let mut all = primitive_suite()?;
    all.extend(composite_suite()?);
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composites_pass() {
        for r in composite_suite().unwrap() {
            assert!(r.passed(), "{} error {:.3e}", r.name, r.max_rel_error);
        }
    }
}
