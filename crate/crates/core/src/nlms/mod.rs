//! Normalized LMS echo canceller, optionally started from an RIR estimate.

use serde::{Deserialize, Serialize};

use crate::autodiff::ParamStore;
use crate::error::{Error, Result};
use crate::fusion::{denoise_rir_waveform, PromptConfig};
use crate::metrics::{evaluate_source, Enhancer, MetricReport};
use crate::synth::{ClipSource, Mixture};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NlmsInit {
    #[default]
    Zeros,
    CleanRir,
    NoisyRir,
    DenoisedRir,
}

impl NlmsInit {
    pub const ALL: [NlmsInit; 4] = [
        NlmsInit::Zeros,
        NlmsInit::CleanRir,
        NlmsInit::NoisyRir,
        NlmsInit::DenoisedRir,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NlmsInit::Zeros => "zeros",
            NlmsInit::CleanRir => "clean_rir",
            NlmsInit::NoisyRir => "noisy_rir",
            NlmsInit::DenoisedRir => "denoised_rir",
        }
    }
}

impl std::str::FromStr for NlmsInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NlmsInit::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown NLMS init '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NlmsConfig {
    pub taps: usize,
    pub mu: f64,
    /// Regularizer per tap; the update divides by `‖x‖² + taps·eps`.
    pub eps: f64,
    pub init: NlmsInit,
}

impl Default for NlmsConfig {
    fn default() -> Self {
        NlmsConfig {
            taps: 3200,
            mu: 0.5,
            eps: 1e-6,
            init: NlmsInit::Zeros,
        }
    }
}

impl NlmsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu < 2.0) {
            return Err(Error::Config(format!(
                "NLMS step {} outside (0, 2)",
                self.mu
            )));
        }
        if self.taps == 0 {
            return Err(Error::Config("NLMS needs at least one tap".into()));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::Config(
                "NLMS regularizer must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Residual `e` (the near-end estimate) and final filter of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct NlmsOutput {
    pub e: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Runs NLMS sample by sample: `e(n) = y(n) − wᵀx(n)`, then
/// `w += mu·e(n)·x(n) / (‖x(n)‖² + taps·eps)` where `x(n)` holds the last
/// `taps` far-end samples, newest first. `eps` is a per-tap power floor, so
/// the regularization keeps its meaning when the filter length changes.
/// `init` is truncated or zero-padded to `taps`.
pub fn nlms_run(
    x: &[f64],
    y: &[f64],
    cfg: &NlmsConfig,
    init: Option<&[f64]>,
) -> Result<NlmsOutput> {
    cfg.validate()?;
    if x.len() != y.len() {
        return Err(Error::shape(
            "nlms",
            format!("far end {} vs mic {} samples", x.len(), y.len()),
        ));
    }
    let l = cfg.taps;
    // weights kept oldest-first so each step is a forward dot product with
    // a window of the zero-prefixed far-end signal
    let mut w = vec![0.0; l];
    if let Some(h) = init {
        for (k, &v) in h.iter().take(l).enumerate() {
            w[l - 1 - k] = v;
        }
    }
    let mut xp = vec![0.0; l - 1];
    xp.extend_from_slice(x);
    let floor = cfg.eps * l as f64;
    let mut power = 0.0;
    let mut e = Vec::with_capacity(y.len());
    for n in 0..y.len() {
        let new = xp[n + l - 1];
        power += new * new;
        if n >= 1 && n % l == 0 {
            power = xp[n..n + l].iter().map(|v| v * v).sum();
        }
        let win = &xp[n..n + l];
        let est: f64 = w.iter().zip(win).map(|(a, b)| a * b).sum();
        let err = y[n] - est;
        e.push(err);
        let g = cfg.mu * err / (power.max(0.0) + floor);
        if g != 0.0 && g.is_finite() {
            for (wk, xk) in w.iter_mut().zip(win) {
                *wk += g * xk;
            }
        }
        let old = if n + 1 < y.len() { xp[n] } else { 0.0 };
        power -= old * old;
    }
    w.reverse();
    Ok(NlmsOutput { e, weights: w })
}

/// NLMS as a clip enhancer. The RIR initializations are scaled by the
/// clip's echo gain; the denoised one needs a fusion (d) denoiser.
#[derive(Clone, Debug)]
pub struct NlmsEnhancer {
    pub config: NlmsConfig,
    pub denoiser: Option<(ParamStore, PromptConfig)>,
}

impl NlmsEnhancer {
    pub fn new(config: NlmsConfig) -> Self {
        NlmsEnhancer {
            config,
            denoiser: None,
        }
    }

    pub fn with_denoiser(config: NlmsConfig, params: ParamStore, prompt: PromptConfig) -> Self {
        NlmsEnhancer {
            config,
            denoiser: Some((params, prompt)),
        }
    }

    /// Initial filter for a clip, `None` for zeros.
    pub fn initial_filter(&self, clip: &Mixture) -> Result<Option<Vec<f64>>> {
        let rir = match self.config.init {
            NlmsInit::Zeros => return Ok(None),
            NlmsInit::CleanRir => clip.rir_clean.clone(),
            NlmsInit::NoisyRir => clip.rir_noisy.clone(),
            NlmsInit::DenoisedRir => {
                let (params, prompt) = self.denoiser.as_ref().ok_or_else(|| {
                    Error::Config("denoised_rir init needs a fusion 'd' checkpoint".into())
                })?;
                denoise_rir_waveform(params, &clip.rir_noisy, prompt)?
            }
        };
        let g = clip.spec.echo_gain;
        Ok(Some(
            rir.taps()
                .iter()
                .take(self.config.taps)
                .map(|v| g * v)
                .collect(),
        ))
    }
}

impl Enhancer for NlmsEnhancer {
    fn name(&self) -> String {
        format!("nlms:{}", self.config.init.name())
    }

    fn enhance(&self, clip: &Mixture) -> Result<Vec<f64>> {
        let init = self.initial_filter(clip)?;
        Ok(nlms_run(
            clip.x.samples(),
            clip.y.samples(),
            &self.config,
            init.as_deref(),
        )?
        .e)
    }
}

/// Scores NLMS over every clip of `source`.
pub fn baseline_report(source: &dyn ClipSource, enhancer: &NlmsEnhancer) -> Result<MetricReport> {
    evaluate_source(enhancer, source)
}
