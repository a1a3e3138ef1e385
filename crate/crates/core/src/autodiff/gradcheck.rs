use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckConfig {
    pub eps: f64,
    /// Above this many input scalars, random directions replace
    /// per-coordinate differences.
    pub max_coords: usize,
    pub probes: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            eps: 1e-5,
            max_coords: 10_000,
            probes: 32,
            seed: 0x6ad,
        }
    }
}

fn evaluate<F>(f: &F, inputs: &[Tensor]) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let v = tape.value(out).item()?;
    if !v.is_finite() {
        return Err(Error::NonFiniteValue("gradient check".into()));
    }
    Ok(v)
}

fn rel_error(ad: f64, fd: f64) -> f64 {
    (ad - fd).abs() / ad.abs().max(fd.abs()).max(1e-8)
}

/// Maximum relative error between reverse-mode gradients of `f` and central
/// finite differences, with the default settings and step `eps`.
pub fn grad_check<F>(f: F, inputs: &[Tensor], eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    grad_check_with(
        f,
        inputs,
        GradCheckConfig {
            eps,
            ..Default::default()
        },
    )
}

pub fn grad_check_with<F>(f: F, inputs: &[Tensor], cfg: GradCheckConfig) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    if !tape.value(out).item()?.is_finite() {
        return Err(Error::NonFiniteValue("gradient check".into()));
    }
    let grads = tape.backward(out)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| {
            grads
                .get(v)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(t.shape().to_vec()))
        })
        .collect();
    if analytic.iter().any(|g| !g.all_finite()) {
        return Err(Error::NonFiniteValue("gradient check".into()));
    }
    drop(tape);

    let total: usize = inputs.iter().map(Tensor::len).sum();
    let mut worst = 0.0f64;
    let mut shifted = inputs.to_vec();
    if total <= cfg.max_coords {
        for (i, t) in inputs.iter().enumerate() {
            for k in 0..t.len() {
                let x0 = t.data()[k];
                shifted[i].data_mut()[k] = x0 + cfg.eps;
                let fp = evaluate(&f, &shifted)?;
                shifted[i].data_mut()[k] = x0 - cfg.eps;
                let fm = evaluate(&f, &shifted)?;
                shifted[i].data_mut()[k] = x0;
                let fd = (fp - fm) / (2.0 * cfg.eps);
                worst = worst.max(rel_error(analytic[i].data()[k], fd));
            }
        }
        return Ok(worst);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.probes {
        let mut dir: Vec<Vec<f64>> = inputs
            .iter()
            .map(|t| (0..t.len()).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let norm = dir
            .iter()
            .flatten()
            .map(|v: &f64| v * v)
            .sum::<f64>()
            .sqrt();
        dir.iter_mut().flatten().for_each(|v| *v /= norm);
        let ad: f64 = analytic
            .iter()
            .zip(&dir)
            .map(|(g, d)| g.data().iter().zip(d).map(|(a, b)| a * b).sum::<f64>())
            .sum();
        let mut eval_at = |sign: f64| {
            for ((s, t), d) in shifted.iter_mut().zip(inputs).zip(&dir) {
                for ((y, x), u) in s.data_mut().iter_mut().zip(t.data()).zip(d) {
                    *y = x + sign * cfg.eps * u;
                }
            }
            evaluate(&f, &shifted)
        };
        let fp = eval_at(1.0)?;
        let fm = eval_at(-1.0)?;
        worst = worst.max(rel_error(ad, (fp - fm) / (2.0 * cfg.eps)));
    }
    Ok(worst)
}
