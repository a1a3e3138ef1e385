//! Four ways of turning a noisy RIR capture into conditioning for the
//! echo canceller:
//!
//! * (a) a learned embedding of the RIR spectrogram, concatenated to the
//!   input of every encoder layer;
//! * (b) the time-averaged RIR spectrum prepended as an extra frame;
//! * (c) the first frames of the RIR spectrogram stacked into channels;
//! * (d) a mask-based RIR denoiser whose output, convolved with the far-end
//!   signal, becomes a prompt echo input.
//!
//! Prompt tensors share the model layout `[1, C, F, T]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamStore, Params, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rir::{Rir, RirKind};
use crate::signal::{istft_frames, stft_frames, StftConfig, Waveform};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionKind {
    #[default]
    None,
    A,
    B,
    C,
    D,
}

impl FusionKind {
    pub const ALL: [FusionKind; 5] = [
        FusionKind::None,
        FusionKind::A,
        FusionKind::B,
        FusionKind::C,
        FusionKind::D,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FusionKind::None => "none",
            FusionKind::A => "a",
            FusionKind::B => "b",
            FusionKind::C => "c",
            FusionKind::D => "d",
        }
    }

    pub fn uses_prompt(self) -> bool {
        self != FusionKind::None
    }
}

impl std::fmt::Display for FusionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FusionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FusionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown fusion kind '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptConfig {
    /// Length of the RIR prompt in samples.
    pub l1: usize,
    /// Length the denoised RIR is cut to before convolution.
    pub l3: usize,
    pub crop_frames: usize,
    pub embed_channels: usize,
    pub denoiser_hidden: usize,
    /// Initial bias of the denoiser mask logits.
    pub denoiser_mask_bias: f64,
    pub compress: f64,
    pub stft: StftConfig,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            l1: 8000,
            l3: 3200,
            crop_frames: 20,
            embed_channels: 16,
            denoiser_hidden: 64,
            denoiser_mask_bias: 3.0,
            compress: 0.5,
            stft: StftConfig::MODEL,
        }
    }
}

impl PromptConfig {
    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        if self.l3 == 0 || self.l3 > self.l1 {
            return Err(Error::Config("need 0 < l3 <= l1".into()));
        }
        if self.crop_frames == 0 || self.embed_channels == 0 || self.denoiser_hidden == 0 {
            return Err(Error::Config("prompt widths must be positive".into()));
        }
        self.t1()?;
        Ok(())
    }

    /// Frame count of the RIR prompt.
    pub fn t1(&self) -> Result<usize> {
        self.stft.num_frames(self.l1)
    }

    pub fn bins(&self) -> usize {
        self.stft.num_bins()
    }
}

/// Frame-major STFT turned into a constant `[1, 2, F, T]` tensor.
pub fn spectrum_tensor(signal: &[f64], cfg: &StftConfig) -> Result<Tensor> {
    let (frames, bins) = stft_frames(signal, cfg)?;
    Ok(crate::autodiff::ops::bins_to_tensor(
        &bins,
        frames,
        cfg.num_bins(),
    ))
}

fn check_prompt_len(rir: &[f64], cfg: &PromptConfig) -> Result<()> {
    if rir.len() != cfg.l1 {
        return Err(Error::shape(
            "prompt",
            format!("RIR prompt has {} samples, expected {}", rir.len(), cfg.l1),
        ));
    }
    Ok(())
}

/// Compressed complex spectrogram of the RIR prompt, `[1, 2, F, T1]`.
pub fn rir_features(tape: &mut Tape, rir: &[f64], cfg: &PromptConfig) -> Result<Var> {
    check_prompt_len(rir, cfg)?;
    let spec = tape.constant(spectrum_tensor(rir, &cfg.stft)?);
    tape.compress(spec, cfg.compress)
}

/// Parameters of fusion method (a).
pub fn init_embed_params<R: Rng>(
    store: &mut ParamStore,
    cfg: &PromptConfig,
    rng: &mut R,
) -> Result<()> {
    let (c, f, t1) = (cfg.embed_channels, cfg.bins(), cfg.t1()?);
    let b = |fan_in: usize| 1.0 / (fan_in as f64).sqrt();
    store.insert_uniform("fa.ch.w", &[c, 2], b(2), rng)?;
    store.insert_uniform("fa.ch.b", &[c], b(2), rng)?;
    // residual branches start small so the embedding is near its input
    store.insert_uniform("fa.freq.w", &[f, f], 0.1 * b(f), rng)?;
    store.insert("fa.freq.b", Tensor::zeros([f]))?;
    store.insert_uniform("fa.time.w", &[t1, t1], 0.1 * b(t1), rng)?;
    store.insert("fa.time.b", Tensor::zeros([t1]))?;
    store.insert_uniform("fa.pool.w", &[1, t1], b(t1), rng)?;
    store.insert("fa.pool.b", Tensor::zeros([1]))?;
    Ok(())
}

pub fn embed_param_count(cfg: &PromptConfig) -> Result<usize> {
    let (c, f, t1) = (cfg.embed_channels, cfg.bins(), cfg.t1()?);
    Ok(2 * c + c + f * f + f + t1 * t1 + t1 + t1 + 1)
}

/// Method (a): learned RIR embedding repeated over `t2` frames,
/// `[1, C, F, t2]`.
pub fn fusion_a_embed(tape: &mut Tape, params: &Params, feat: Var, t2: usize) -> Result<Var> {
    if t2 < 1 {
        return Err(Error::shape(
            "fusion_a",
            "target frame count must be positive",
        ));
    }
    // [1, 2, F, T1] -> [1, F, T1, 2] -> channel map -> [1, C, F, T1]
    let x = tape.permute(feat, &[0, 2, 3, 1])?;
    let x = tape.linear(x, params.get("fa.ch.w")?, Some(params.get("fa.ch.b")?))?;
    let x = tape.permute(x, &[0, 3, 1, 2])?;
    // frequency map with residual, over [1, C, T1, F]
    let xf = tape.permute(x, &[0, 1, 3, 2])?;
    let h = tape.linear(xf, params.get("fa.freq.w")?, Some(params.get("fa.freq.b")?))?;
    let h = tape.gelu(h);
    let xf = tape.add(xf, h)?;
    // time map with residual, over [1, C, F, T1]
    let xt = tape.permute(xf, &[0, 1, 3, 2])?;
    let h = tape.linear(xt, params.get("fa.time.w")?, Some(params.get("fa.time.b")?))?;
    let h = tape.gelu(h);
    let xt = tape.add(xt, h)?;
    let pooled = tape.linear(xt, params.get("fa.pool.w")?, Some(params.get("fa.pool.b")?))?;
    tape.repeat(pooled, 3, t2)
}

/// Method (b): the time-mean RIR frame, tiled over the input's channels,
/// placed in front of `input [1, C, F, T2]`.
pub fn fusion_b_prepend(tape: &mut Tape, feat: Var, input: Var) -> Result<Var> {
    let shape = tape.shape(input).to_vec();
    if shape.len() != 4 || shape[1] % 2 != 0 {
        return Err(Error::shape(
            "fusion_b",
            format!("input channels must be a multiple of 2, got {shape:?}"),
        ));
    }
    let frame = tape.mean_axis(feat, 3)?;
    let frame = tape.repeat(frame, 1, shape[1] / 2)?;
    tape.concat(&[frame, input], 3)
}

/// Drops the leading frame added by [`fusion_b_prepend`].
pub fn fusion_b_strip(tape: &mut Tape, output: Var) -> Result<Var> {
    let shape = tape.shape(output).to_vec();
    if shape.len() != 4 || shape[3] < 2 {
        return Err(Error::shape(
            "fusion_b_strip",
            format!("need at least 2 frames, got {shape:?}"),
        ));
    }
    tape.narrow(output, 3, 1, shape[3] - 1)
}

/// Method (c): the first `crop_frames` RIR frames stacked into channels,
/// `[1, 2·crop, F, t2]`, channel index `c·crop + t`.
pub fn fusion_c_stack(tape: &mut Tape, feat: Var, t2: usize, cfg: &PromptConfig) -> Result<Var> {
    let shape = tape.shape(feat).to_vec();
    let crop = cfg.crop_frames;
    if shape.len() != 4 || shape[3] < crop {
        return Err(Error::shape(
            "fusion_c",
            format!("need {crop} RIR frames, got {shape:?}"),
        ));
    }
    let f = shape[2];
    let x = tape.narrow(feat, 3, 0, crop)?;
    let x = tape.permute(x, &[0, 1, 3, 2])?;
    let x = tape.reshape(x, &[1, 2 * crop, f, 1])?;
    tape.repeat(x, 3, t2)
}

/// Parameters of the method (d) denoiser.
pub fn init_denoiser_params<R: Rng>(
    store: &mut ParamStore,
    cfg: &PromptConfig,
    rng: &mut R,
) -> Result<()> {
    let (f, h) = (cfg.bins(), cfg.denoiser_hidden);
    let b = 1.0 / (h as f64).sqrt();
    store.insert_uniform("den.gru.wx", &[3 * h, f], b, rng)?;
    store.insert_uniform("den.gru.wh", &[3 * h, h], b, rng)?;
    store.insert_uniform("den.gru.bx", &[3 * h], b, rng)?;
    store.insert_uniform("den.gru.bh", &[3 * h], b, rng)?;
    store.insert_uniform("den.out.w", &[f, h], 0.1 * b, rng)?;
    store.insert("den.out.b", Tensor::full([f], cfg.denoiser_mask_bias))?;
    Ok(())
}

pub fn denoiser_param_count(cfg: &PromptConfig) -> usize {
    let (f, h) = (cfg.bins(), cfg.denoiser_hidden);
    3 * h * f + 3 * h * h + 6 * h + f * h + f
}

/// Output of [`denoise_rir`].
pub struct Denoised {
    /// Denoised RIR, `[L1]`.
    pub rir: Var,
    /// Magnitude mask in (0, 1), `[1, 1, F, T1]`.
    pub mask: Var,
}

/// Applies a magnitude mask `[1, 1, F, T1]` to the RIR spectrum and
/// resynthesizes `L1` samples.
pub fn apply_rir_mask(tape: &mut Tape, rir: &[f64], mask: Var, cfg: &PromptConfig) -> Result<Var> {
    check_prompt_len(rir, cfg)?;
    let spec = tape.constant(spectrum_tensor(rir, &cfg.stft)?);
    let m2 = tape.repeat(mask, 1, 2)?;
    let masked = tape.mul(spec, m2)?;
    let out = tape.istft(masked, cfg.stft)?;
    let n = tape.shape(out)[0];
    if n < cfg.l1 {
        tape.pad(out, 0, 0, cfg.l1 - n)
    } else {
        Ok(out)
    }
}

/// Method (d) denoiser: a recurrent mask estimator over the RIR's
/// compressed magnitude frames.
pub fn denoise_rir(
    tape: &mut Tape,
    params: &Params,
    rir: &[f64],
    cfg: &PromptConfig,
) -> Result<Denoised> {
    check_prompt_len(rir, cfg)?;
    let spec = tape.constant(spectrum_tensor(rir, &cfg.stft)?);
    let mag = tape.magnitude_pow(spec, cfg.compress)?;
    let shape = tape.shape(mag).to_vec();
    let (f, t1) = (shape[2], shape[3]);
    let seq = tape.reshape(mag, &[f, t1])?;
    let seq = tape.permute(seq, &[1, 0])?;
    let h = tape.gru(
        seq,
        params.get("den.gru.wx")?,
        params.get("den.gru.wh")?,
        params.get("den.gru.bx")?,
        params.get("den.gru.bh")?,
    )?;
    let logits = tape.linear(h, params.get("den.out.w")?, Some(params.get("den.out.b")?))?;
    let m = tape.sigmoid(logits);
    let m = tape.permute(m, &[1, 0])?;
    let mask = tape.reshape(m, &[1, 1, f, t1])?;
    let rir = apply_rir_mask(tape, rir, mask, cfg)?;
    Ok(Denoised { rir, mask })
}

/// Method (d) prompt echo: `x * rir_d[..L3]`, cut to `x`'s length.
pub fn fusion_d_prompt_echo(
    tape: &mut Tape,
    rir_d: Var,
    x: Var,
    cfg: &PromptConfig,
) -> Result<Var> {
    let n = tape.shape(x)[0];
    let h = tape.narrow(rir_d, 0, 0, cfg.l3)?;
    let full = tape.convolve(x, h)?;
    tape.narrow(full, 0, 0, n)
}

/// Runs the denoiser outside of training and returns a denoised [`Rir`].
pub fn denoise_rir_waveform(params: &ParamStore, rir: &Rir, cfg: &PromptConfig) -> Result<Rir> {
    let mut tape = Tape::new();
    let p = params.attach(&mut tape);
    let d = denoise_rir(&mut tape, &p, rir.taps(), cfg)?;
    Ok(Rir {
        h: Waveform::new(tape.value(d.rir).data().to_vec())?,
        room: rir.room.clone(),
        kind: RirKind::Denoised,
    })
}

/// Resynthesis check used by tests: the identity mask reproduces the RIR.
pub fn identity_resynthesis(rir: &[f64], cfg: &PromptConfig) -> Result<Vec<f64>> {
    let (frames, bins) = stft_frames(rir, &cfg.stft)?;
    let mut out = istft_frames(&bins, frames, &cfg.stft)?;
    out.resize(cfg.l1, 0.0);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-0.1..0.1)).collect()
    }

    #[test]
    fn prompt_frame_count() {
        assert_eq!(PromptConfig::default().t1().unwrap(), 49);
    }

    #[test]
    fn embed_is_time_constant() {
        let cfg = PromptConfig::default();
        let mut store = ParamStore::new();
        init_embed_params(&mut store, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(store.num_scalars(), embed_param_count(&cfg).unwrap());
        let mut t = Tape::new();
        let p = store.attach(&mut t);
        let feat = rir_features(&mut t, &noise(8000, 1), &cfg).unwrap();
        let e = fusion_a_embed(&mut t, &p, feat, 7).unwrap();
        assert_eq!(t.shape(e), &[1, 16, 161, 7]);
        for row in t.value(e).data().chunks(7) {
            assert!(row.iter().all(|v| *v == row[0]));
        }
        assert!(fusion_a_embed(&mut t, &p, feat, 0).is_err());
    }

    #[test]
    fn prepend_and_strip() {
        let cfg = PromptConfig::default();
        let mut t = Tape::new();
        let feat = rir_features(&mut t, &noise(8000, 2), &cfg).unwrap();
        let input = t.constant(Tensor::ones([1, 4, 161, 5]));
        let out = fusion_b_prepend(&mut t, feat, input).unwrap();
        assert_eq!(t.shape(out), &[1, 4, 161, 6]);
        let mean = t.mean_axis(feat, 3).unwrap();
        let (o, m) = (t.value(out).data(), t.value(mean).data());
        for c in 0..4 {
            for f in 0..161 {
                assert_eq!(o[(c * 161 + f) * 6], m[(c % 2) * 161 + f]);
            }
        }
        let back = fusion_b_strip(&mut t, out).unwrap();
        assert_eq!(t.value(back), t.value(input));
        let odd = t.constant(Tensor::ones([1, 3, 161, 5]));
        assert!(fusion_b_prepend(&mut t, feat, odd).is_err());
        let one = t.constant(Tensor::ones([1, 2, 161, 1]));
        assert!(fusion_b_strip(&mut t, one).is_err());

        let zero = rir_features(&mut t, &vec![0.0; 8000], &cfg).unwrap();
        let z = fusion_b_prepend(&mut t, zero, input).unwrap();
        let zd = t.value(z).data();
        assert!((0..4 * 161).all(|k| zd[k * 6] == 0.0));
    }

    #[test]
    fn stack_is_a_permutation() {
        let cfg = PromptConfig::default();
        let mut t = Tape::new();
        let feat = rir_features(&mut t, &noise(8000, 3), &cfg).unwrap();
        let s = fusion_c_stack(&mut t, feat, 4, &cfg).unwrap();
        assert_eq!(t.shape(s), &[1, 40, 161, 4]);
        let fv = t.value(feat).data();
        let sv = t.value(s).data();
        for c in 0..2 {
            for tt in 0..20 {
                for f in 0..161 {
                    let src = fv[(c * 161 + f) * 49 + tt];
                    let dst = sv[((c * 20 + tt) * 161 + f) * 4 + 3];
                    assert_eq!(src, dst);
                }
            }
        }
        let mut a: Vec<f64> = (0..2)
            .flat_map(|c| (0..161).flat_map(move |f| (0..20).map(move |tt| (c, f, tt))))
            .map(|(c, f, tt)| fv[(c * 161 + f) * 49 + tt])
            .collect();
        let mut b: Vec<f64> = sv.iter().step_by(4).copied().collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
        let short = t.constant(Tensor::zeros([1, 2, 161, 19]));
        assert!(fusion_c_stack(&mut t, short, 4, &cfg).is_err());
    }

    #[test]
    fn identity_mask_reproduces_rir() {
        let cfg = PromptConfig::default();
        let h = noise(8000, 4);
        let mut t = Tape::new();
        let ones = t.constant(Tensor::ones([1, 1, 161, 49]));
        let out = apply_rir_mask(&mut t, &h, ones, &cfg).unwrap();
        let o = t.value(out).data();
        let err: f64 = o
            .iter()
            .zip(&h)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = h.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err / norm < 1e-6);
        assert_eq!(identity_resynthesis(&h, &cfg).unwrap().len(), 8000);
    }

    #[test]
    fn denoiser_mask_in_unit_interval() {
        let cfg = PromptConfig::default();
        let mut store = ParamStore::new();
        init_denoiser_params(&mut store, &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(store.num_scalars(), denoiser_param_count(&cfg));
        let mut t = Tape::new();
        let p = store.attach(&mut t);
        let d = denoise_rir(&mut t, &p, &noise(8000, 6), &cfg).unwrap();
        assert!(t.value(d.mask).data().iter().all(|&m| m > 0.0 && m < 1.0));
        assert_eq!(t.shape(d.rir), &[8000]);
    }

    #[test]
    fn prompt_echo_matches_linear_echo() {
        let cfg = PromptConfig::default();
        let x = noise(4000, 7);
        let mut h = vec![0.0; 8000];
        h[3] = 0.5;
        h[100] = -0.25;
        h[3000] = 0.1;
        let mut t = Tape::new();
        let xv = t.constant(Tensor::from_vec(x.clone()));
        let hv = t.constant(Tensor::from_vec(h.clone()));
        let v = fusion_d_prompt_echo(&mut t, hv, xv, &cfg).unwrap();
        let direct = crate::signal::convolve_direct(&x, &h).unwrap();
        let got = t.value(v).data();
        assert_eq!(got.len(), 4000);
        let err: f64 = got
            .iter()
            .zip(&direct)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = direct[..4000].iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err / norm < 1e-6);
        let z = t.constant(Tensor::zeros([8000]));
        let v0 = fusion_d_prompt_echo(&mut t, z, xv, &cfg).unwrap();
        assert!(t.value(v0).data().iter().all(|v| *v == 0.0));
    }
}
