//! Toy complex-mask echo canceller: a causal convolutional encoder, a
//! recurrent bottleneck over time and a mirrored decoder that predicts a
//! bounded complex ratio mask for the microphone spectrum.
//!
//! Inputs are power-law compressed spectra of the microphone and far-end
//! signals, plus whatever the selected [`FusionKind`] adds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Conv2dSpec, ParamStore, Params, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::fusion::{self, FusionKind, PromptConfig};
use crate::signal::StftConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub enc_widths: Vec<usize>,
    pub hidden: usize,
    /// Kernel size over (frequency, time).
    pub kernel: [usize; 2],
    pub fusion: FusionKind,
    pub prompt: PromptConfig,
    /// Compression exponent of the input spectra.
    pub compress: f64,
    pub stft: StftConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            enc_widths: vec![16, 32],
            hidden: 64,
            kernel: [3, 3],
            fusion: FusionKind::None,
            prompt: PromptConfig::default(),
            compress: 0.5,
            stft: StftConfig::MODEL,
        }
    }
}

impl ModelConfig {
    pub fn with_fusion(fusion: FusionKind) -> Self {
        ModelConfig {
            fusion,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        self.prompt.validate()?;
        if self.enc_widths.is_empty() || self.enc_widths.contains(&0) || self.hidden == 0 {
            return Err(Error::Config(
                "encoder widths and hidden size must be positive".into(),
            ));
        }
        if self.kernel[0] % 2 == 0 || self.kernel[1] == 0 {
            return Err(Error::Config(
                "frequency kernel must be odd, time kernel positive".into(),
            ));
        }
        if self.prompt.stft.num_bins() != self.stft.num_bins() {
            return Err(Error::Config(
                "prompt and model STFTs disagree on bin count".into(),
            ));
        }
        self.freq_levels()?;
        Ok(())
    }

    /// Channels entering the first encoder layer.
    pub fn input_channels(&self) -> usize {
        4 + match self.fusion {
            FusionKind::None | FusionKind::B => 0,
            FusionKind::A => self.prompt.embed_channels,
            FusionKind::C => 2 * self.prompt.crop_frames,
            FusionKind::D => 2,
        }
    }

    fn enc_spec(&self) -> Conv2dSpec {
        Conv2dSpec {
            stride_f: 2,
            pad_f: self.kernel[0] / 2,
        }
    }

    fn same_spec(&self) -> Conv2dSpec {
        Conv2dSpec {
            stride_f: 1,
            pad_f: self.kernel[0] / 2,
        }
    }

    /// Frequency sizes from the input down to the bottleneck.
    pub fn freq_levels(&self) -> Result<Vec<usize>> {
        let mut levels = vec![self.stft.num_bins()];
        for _ in &self.enc_widths {
            let f = *levels.last().expect("non-empty");
            let next = self
                .enc_spec()
                .out_freq(f, self.kernel[0])
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::Config("too many encoder layers for the bin count".into()))?;
            levels.push(next);
        }
        Ok(levels)
    }

    fn embed_extra(&self) -> usize {
        if self.fusion == FusionKind::A {
            self.prompt.embed_channels
        } else {
            0
        }
    }

    fn enc_in(&self, i: usize) -> usize {
        let base = if i == 0 {
            self.input_channels() - self.embed_extra()
        } else {
            self.enc_widths[i - 1]
        };
        base + self.embed_extra()
    }

    fn bottleneck_width(&self) -> Result<usize> {
        let levels = self.freq_levels()?;
        Ok(self.enc_widths[self.enc_widths.len() - 1] * levels[levels.len() - 1])
    }
}

/// Trainable scalar count of the model described by `cfg`, counted layer
/// by layer.
pub fn param_count(cfg: &ModelConfig) -> Result<usize> {
    cfg.validate()?;
    let k = cfg.kernel[0] * cfg.kernel[1];
    let w = &cfg.enc_widths;
    let conv = |cin: usize, cout: usize| cin * cout * k + cout;
    let mut n: usize = (0..w.len()).map(|i| conv(cfg.enc_in(i), w[i])).sum();
    let (d, h) = (cfg.bottleneck_width()?, cfg.hidden);
    n += 3 * h * d + 3 * h * h + 6 * h;
    n += d * h + d;
    n += (1..w.len()).map(|i| conv(w[i], w[i - 1])).sum::<usize>();
    n += conv(w[0], 2);
    n += match cfg.fusion {
        FusionKind::A => fusion::embed_param_count(&cfg.prompt)?,
        FusionKind::D => fusion::denoiser_param_count(&cfg.prompt),
        _ => 0,
    };
    Ok(n)
}

/// Signals for one forward pass.
#[derive(Clone, Copy, Debug)]
pub struct ModelInput<'a> {
    /// Microphone signal.
    pub y: &'a [f64],
    /// Far-end reference.
    pub x: &'a [f64],
    /// Noisy RIR prompt of `prompt.l1` samples, required by every fusion
    /// kind except `none`.
    pub rir: Option<&'a [f64]>,
}

pub struct ModelOutput {
    /// Near-end estimate, same length as the microphone signal.
    pub s_hat: Var,
    /// Estimated spectrum `[1, 2, F, T2]`.
    pub s_spec: Var,
    /// Bounded complex mask `[1, 2, F, T2]`.
    pub mask: Var,
    /// Denoised RIR for fusion (d).
    pub denoised: Option<Var>,
}

#[derive(Clone, Debug)]
pub struct AecModel {
    pub config: ModelConfig,
    pub params: ParamStore,
}

fn uniform_conv(
    store: &mut ParamStore,
    name: &str,
    cin: usize,
    cout: usize,
    k: [usize; 2],
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let bound = 1.0 / ((cin * k[0] * k[1]) as f64).sqrt();
    store.insert_uniform(format!("{name}.w"), &[cout, cin, k[0], k[1]], bound, rng)?;
    store.insert_uniform(format!("{name}.b"), &[cout], bound, rng)
}

/// Index list `0, 2, 4, ..` picking `n` of every other bin.
fn subsample(n: usize) -> Vec<usize> {
    (0..n).map(|j| 2 * j).collect()
}

/// Index list mapping `n` bins onto bins `j / 2` of the coarser level.
fn upsample(n: usize) -> Vec<usize> {
    (0..n).map(|j| j / 2).collect()
}

impl AecModel {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let (w, k) = (&config.enc_widths, config.kernel);
        for i in 0..w.len() {
            uniform_conv(
                &mut store,
                &format!("enc.{i}"),
                config.enc_in(i),
                w[i],
                k,
                &mut rng,
            )?;
        }
        let (d, h) = (config.bottleneck_width()?, config.hidden);
        let b = 1.0 / (h as f64).sqrt();
        store.insert_uniform("gru.wx", &[3 * h, d], b, &mut rng)?;
        store.insert_uniform("gru.wh", &[3 * h, h], b, &mut rng)?;
        store.insert_uniform("gru.bx", &[3 * h], b, &mut rng)?;
        store.insert_uniform("gru.bh", &[3 * h], b, &mut rng)?;
        store.insert_uniform("bott.w", &[d, h], b, &mut rng)?;
        store.insert_uniform("bott.b", &[d], b, &mut rng)?;
        for i in 1..w.len() {
            uniform_conv(&mut store, &format!("dec.{i}"), w[i], w[i - 1], k, &mut rng)?;
        }
        uniform_conv(&mut store, "out", w[0], 2, k, &mut rng)?;
        match config.fusion {
            FusionKind::A => fusion::init_embed_params(&mut store, &config.prompt, &mut rng)?,
            FusionKind::D => fusion::init_denoiser_params(&mut store, &config.prompt, &mut rng)?,
            _ => {}
        }
        Ok(AecModel {
            config,
            params: store,
        })
    }

    /// Wraps loaded parameters after checking them against the layout
    /// `config` implies.
    pub fn from_parts(config: ModelConfig, params: ParamStore) -> Result<Self> {
        let fresh = AecModel::new(config.clone(), 0)?;
        let (want, got) = (fresh.params.index(), params.index());
        if want.len() != got.len()
            || want
                .iter()
                .zip(&got)
                .any(|(a, b)| a.name != b.name || a.shape != b.shape)
        {
            return Err(Error::Config(format!(
                "parameters do not match a fusion '{}' model",
                config.fusion
            )));
        }
        Ok(AecModel { config, params })
    }

    pub fn num_params(&self) -> usize {
        self.params.num_scalars()
    }

    /// Records the forward pass on `tape`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &Params,
        input: ModelInput<'_>,
    ) -> Result<ModelOutput> {
        let cfg = &self.config;
        if input.y.len() != input.x.len() {
            return Err(Error::shape(
                "model",
                format!(
                    "mic has {} samples, far end {}",
                    input.y.len(),
                    input.x.len()
                ),
            ));
        }
        let n = input.y.len();
        let rir = match (cfg.fusion, input.rir) {
            (FusionKind::None, _) => None,
            (_, Some(r)) => Some(r),
            (kind, None) => {
                return Err(Error::Config(format!(
                    "fusion '{kind}' needs an RIR prompt"
                )));
            }
        };

        let y_spec = tape.constant(fusion::spectrum_tensor(input.y, &cfg.stft)?);
        let x_spec = tape.constant(fusion::spectrum_tensor(input.x, &cfg.stft)?);
        let t2 = tape.shape(y_spec)[3];
        let y_c = tape.compress(y_spec, cfg.compress)?;
        let x_c = tape.compress(x_spec, cfg.compress)?;
        let mut h = tape.concat(&[y_c, x_c], 1)?;

        let mut embed = None;
        let mut denoised = None;
        let feat = match rir {
            Some(r) if cfg.fusion != FusionKind::D => {
                Some(fusion::rir_features(tape, r, &cfg.prompt)?)
            }
            _ => None,
        };
        match cfg.fusion {
            FusionKind::None => {}
            FusionKind::A => {
                embed = Some(fusion::fusion_a_embed(
                    tape,
                    params,
                    feat.expect("prompt present"),
                    t2,
                )?);
            }
            FusionKind::B => {
                h = fusion::fusion_b_prepend(tape, feat.expect("prompt present"), h)?;
            }
            FusionKind::C => {
                let stack =
                    fusion::fusion_c_stack(tape, feat.expect("prompt present"), t2, &cfg.prompt)?;
                h = tape.concat(&[h, stack], 1)?;
            }
            FusionKind::D => {
                let d =
                    fusion::denoise_rir(tape, params, rir.expect("prompt present"), &cfg.prompt)?;
                let x = tape.constant(Tensor::from_vec(input.x.to_vec()));
                let v = fusion::fusion_d_prompt_echo(tape, d.rir, x, &cfg.prompt)?;
                let v_spec = tape.stft(v, cfg.stft)?;
                let v_c = tape.compress(v_spec, cfg.compress)?;
                h = tape.concat(&[h, v_c], 1)?;
                denoised = Some(d.rir);
            }
        }
        let have = tape.shape(h)[1]
            + if embed.is_some() {
                cfg.prompt.embed_channels
            } else {
                0
            };
        if have != cfg.input_channels() {
            return Err(Error::shape(
                "model",
                format!(
                    "{have} input channels, fusion '{}' expects {}",
                    cfg.fusion,
                    cfg.input_channels()
                ),
            ));
        }

        let levels = cfg.freq_levels()?;
        let w = &cfg.enc_widths;
        let mut skips = Vec::with_capacity(w.len());
        let mut emb_level = embed;
        for i in 0..w.len() {
            if let Some(e) = emb_level {
                h = tape.concat(&[h, e], 1)?;
            }
            let y = tape.conv2d(
                h,
                params.get(&format!("enc.{i}.w"))?,
                params.get(&format!("enc.{i}.b"))?,
                cfg.enc_spec(),
            )?;
            h = tape.gelu(y);
            skips.push(h);
            if let Some(e) = emb_level {
                emb_level = Some(tape.gather(e, 2, subsample(levels[i + 1]))?);
            }
        }

        // recurrent bottleneck over frames, [1, C, F, T] <-> [T, C·F]
        let shape = tape.shape(h).to_vec();
        let (c, f, t) = (shape[1], shape[2], shape[3]);
        let seq = tape.permute(h, &[3, 0, 1, 2])?;
        let seq = tape.reshape(seq, &[t, c * f])?;
        let r = tape.gru(
            seq,
            params.get("gru.wx")?,
            params.get("gru.wh")?,
            params.get("gru.bx")?,
            params.get("gru.bh")?,
        )?;
        let r = tape.linear(r, params.get("bott.w")?, Some(params.get("bott.b")?))?;
        let r = tape.reshape(r, &[t, 1, c, f])?;
        let r = tape.permute(r, &[1, 2, 3, 0])?;
        h = tape.add(h, r)?;

        for i in (1..w.len()).rev() {
            let y = tape.conv2d(
                h,
                params.get(&format!("dec.{i}.w"))?,
                params.get(&format!("dec.{i}.b"))?,
                cfg.same_spec(),
            )?;
            h = tape.gelu(y);
            h = tape.gather(h, 2, upsample(levels[i]))?;
            h = tape.add(h, skips[i - 1])?;
        }
        h = tape.gather(h, 2, upsample(levels[0]))?;
        let mut raw = tape.conv2d(
            h,
            params.get("out.w")?,
            params.get("out.b")?,
            cfg.same_spec(),
        )?;
        if cfg.fusion == FusionKind::B {
            raw = fusion::fusion_b_strip(tape, raw)?;
        }

        let mask = tape.bounded_mask(raw)?;
        let s_spec = tape.complex_mul(mask, y_spec)?;
        let wav = tape.istft(s_spec, cfg.stft)?;
        let len = tape.shape(wav)[0];
        let s_hat = if len >= n {
            tape.narrow(wav, 0, 0, n)?
        } else {
            tape.pad(wav, 0, 0, n - len)?
        };
        Ok(ModelOutput {
            s_hat,
            s_spec,
            mask,
            denoised,
        })
    }

    /// Runs the model once and returns the near-end estimate.
    pub fn enhance(&self, input: ModelInput<'_>) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let params = self.params.attach(&mut tape);
        let out = self.forward(&mut tape, &params, input)?;
        Ok(tape.value(out.s_hat).data().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect()
    }

    #[test]
    fn input_channels_per_fusion() {
        let ch: Vec<usize> = FusionKind::ALL
            .iter()
            .map(|&k| ModelConfig::with_fusion(k).input_channels())
            .collect();
        assert_eq!(ch, vec![4, 20, 4, 44, 6]);
    }

    #[test]
    fn param_count_matches_store_and_hand_count() {
        // enc 4·16·9+16, 16·32·9+32; recurrent 3·64·1312 + 3·64·64 + 6·64;
        // bottleneck 64·1312 + 1312; dec 32·16·9+16; out 16·2·9+2
        let hand = 592 + 4640 + (251_904 + 12_288 + 384) + 85_280 + 4624 + 290;
        assert_eq!(param_count(&ModelConfig::default()).unwrap(), hand);
        for k in FusionKind::ALL {
            let cfg = ModelConfig::with_fusion(k);
            let m = AecModel::new(cfg.clone(), 1).unwrap();
            assert_eq!(m.num_params(), param_count(&cfg).unwrap(), "{k}");
        }
        let none = param_count(&ModelConfig::default()).unwrap();
        assert_eq!(
            param_count(&ModelConfig::with_fusion(FusionKind::B)).unwrap(),
            none
        );
        // (d) adds the denoiser plus two prompt-echo input channels to the first conv
        let d = param_count(&ModelConfig::with_fusion(FusionKind::D)).unwrap();
        let den = fusion::denoiser_param_count(&ModelConfig::default().prompt);
        assert_eq!(d, none + den + 2 * 16 * 9);
    }

    #[test]
    fn zero_mic_gives_zero_output() {
        for k in FusionKind::ALL {
            let m = AecModel::new(ModelConfig::with_fusion(k), 2).unwrap();
            let y = vec![0.0; 4000];
            let x = noise(4000, 3);
            let h = noise(8000, 4);
            let out = m
                .enhance(ModelInput {
                    y: &y,
                    x: &x,
                    rir: Some(&h),
                })
                .unwrap();
            assert_eq!(out.len(), 4000);
            assert!(out.iter().all(|v| *v == 0.0), "{k}");
        }
    }

    fn spectra(m: &AecModel, y: &[f64], x: &[f64], h: &[f64]) -> (Tensor, Tensor, Tensor) {
        let mut tape = Tape::new();
        let p = m.params.attach(&mut tape);
        let out = m
            .forward(&mut tape, &p, ModelInput { y, x, rir: Some(h) })
            .unwrap();
        let ys = fusion::spectrum_tensor(y, &m.config.stft).unwrap();
        (
            tape.value(out.s_spec).clone(),
            tape.value(out.mask).clone(),
            ys,
        )
    }

    #[test]
    fn future_frames_do_not_leak() {
        let (y, x, h) = (noise(4000, 5), noise(4000, 6), noise(8000, 7));
        let t0 = 10;
        let cut = 160 * t0 + 320;
        let trunc = |v: &[f64]| {
            let mut v = v.to_vec();
            v[cut..].iter_mut().for_each(|s| *s = 0.0);
            v
        };
        for k in FusionKind::ALL {
            let m = AecModel::new(ModelConfig::with_fusion(k), 8).unwrap();
            let (a, _, _) = spectra(&m, &y, &x, &h);
            let (b, _, _) = spectra(&m, &trunc(&y), &trunc(&x), &h);
            let frames = a.shape()[3];
            for (row, (ra, rb)) in a
                .data()
                .chunks(frames)
                .zip(b.data().chunks(frames))
                .enumerate()
            {
                // FFT convolution in fusion (d) leaves round-off from later samples
                for (u, v) in ra[..=t0].iter().zip(&rb[..=t0]) {
                    assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0), "{k} row {row}");
                }
            }
            assert_ne!(a, b, "{k}");
        }
    }

    #[test]
    fn mask_never_amplifies() {
        let m = AecModel::new(ModelConfig::with_fusion(FusionKind::A), 9).unwrap();
        let (s, mask, y) = spectra(&m, &noise(3200, 1), &noise(3200, 2), &noise(8000, 3));
        let plane = s.len() / 2;
        for i in 0..plane {
            let mag = |t: &Tensor| t.data()[i].hypot(t.data()[plane + i]);
            assert!(mag(&mask) < 1.0);
            assert!(mag(&s) <= mag(&y) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let (y, x, h) = (noise(3200, 1), noise(3200, 2), noise(8000, 3));
        let a = AecModel::new(ModelConfig::with_fusion(FusionKind::D), 4).unwrap();
        let b = AecModel::new(ModelConfig::with_fusion(FusionKind::D), 4).unwrap();
        let input = ModelInput {
            y: &y,
            x: &x,
            rir: Some(&h),
        };
        assert_eq!(a.enhance(input).unwrap(), b.enhance(input).unwrap());
    }

    #[test]
    fn missing_prompt_is_an_error() {
        let m = AecModel::new(ModelConfig::with_fusion(FusionKind::C), 0).unwrap();
        let y = noise(1600, 1);
        assert!(m
            .enhance(ModelInput {
                y: &y,
                x: &y,
                rir: None
            })
            .is_err());
        assert!(m
            .enhance(ModelInput {
                y: &y,
                x: &y[..800],
                rir: None
            })
            .is_err());
    }

    #[test]
    fn from_parts_checks_layout() {
        let m = AecModel::new(ModelConfig::with_fusion(FusionKind::D), 0).unwrap();
        assert!(
            AecModel::from_parts(ModelConfig::with_fusion(FusionKind::D), m.params.clone()).is_ok()
        );
        assert!(AecModel::from_parts(ModelConfig::default(), m.params).is_err());
    }
}
