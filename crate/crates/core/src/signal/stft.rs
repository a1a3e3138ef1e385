use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::fft::plans;
use super::Complex64;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hamming,
}

impl WindowKind {
    /// Periodic (DFT-even) window of length `len`.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            WindowKind::Hamming => (0..len)
                .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub win_len: usize,
    pub hop: usize,
    pub fft_len: usize,
    pub window: WindowKind,
}

impl StftConfig {
    /// 20 ms window, 10 ms shift: model front end.
    pub const MODEL: StftConfig = StftConfig {
        win_len: 320,
        hop: 160,
        fft_len: 320,
        window: WindowKind::Hamming,
    };

    /// 20 ms window, 5 ms shift: spectral loss terms.
    pub const LOSS: StftConfig = StftConfig {
        win_len: 320,
        hop: 80,
        fft_len: 320,
        window: WindowKind::Hamming,
    };

    pub fn new(win_len: usize, hop: usize, fft_len: usize) -> Result<Self> {
        let cfg = StftConfig {
            win_len,
            hop,
            fft_len,
            window: WindowKind::Hamming,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0 < self.hop && self.hop <= self.win_len && self.win_len <= self.fft_len) {
            return Err(Error::InvalidStft(format!(
                "need 0 < hop <= win_len <= fft_len, got hop={} win={} fft={}",
                self.hop, self.win_len, self.fft_len
            )));
        }
        Ok(())
    }

    pub fn num_bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    /// Frame count `1 + floor((n - win) / hop)` without padding.
    pub fn num_frames(&self, n: usize) -> Result<usize> {
        if n < self.win_len {
            return Err(Error::SignalTooShort {
                len: n,
                needed: self.win_len,
            });
        }
        Ok(1 + (n - self.win_len) / self.hop)
    }

    /// Number of samples covered by `frames` frames.
    pub fn covered_len(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.hop + self.win_len
        }
    }

    pub fn window(&self) -> Vec<f64> {
        self.window.coefficients(self.win_len)
    }
}

/// One-sided spectrogram, frame-major (`[T, F]`).
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSpectrogram {
    data: Vec<Complex64>,
    frames: usize,
    bins: usize,
    config: StftConfig,
}

impl ComplexSpectrogram {
    pub fn new(data: Vec<Complex64>, frames: usize, config: StftConfig) -> Result<Self> {
        let bins = config.num_bins();
        if data.len() != frames * bins {
            return Err(Error::shape(
                "spectrogram",
                format!("{} values for {frames}x{bins}", data.len()),
            ));
        }
        Ok(Self {
            data,
            frames,
            bins,
            config,
        })
    }

    pub fn zeros(frames: usize, config: StftConfig) -> Self {
        let bins = config.num_bins();
        Self {
            data: vec![Complex64::new(0.0, 0.0); frames * bins],
            frames,
            bins,
            config,
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn get(&self, t: usize, f: usize) -> Complex64 {
        self.data[t * self.bins + f]
    }

    pub fn frame(&self, t: usize) -> &[Complex64] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }
}

/// Forward STFT returning frame-major complex bins.
pub fn stft_frames(signal: &[f64], cfg: &StftConfig) -> Result<(usize, Vec<Complex64>)> {
    cfg.validate()?;
    let frames = cfg.num_frames(signal.len())?;
    let bins = cfg.num_bins();
    let window = cfg.window();
    let plan = plans(cfg.fft_len);
    let mut input = plan.forward.make_input_vec();
    let mut output = plan.forward.make_output_vec();
    let mut scratch = plan.forward.make_scratch_vec();
    let mut data = Vec::with_capacity(frames * bins);
    for t in 0..frames {
        let start = t * cfg.hop;
        input.iter_mut().for_each(|v| *v = 0.0);
        for (n, (dst, w)) in input.iter_mut().zip(&window).enumerate() {
            *dst = signal[start + n] * w;
        }
        plan.forward
            .process_with_scratch(&mut input, &mut output, &mut scratch)
            .expect("fft buffer sizes");
        data.extend_from_slice(&output);
    }
    Ok((frames, data))
}

pub fn stft(signal: &[f64], cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    let (frames, data) = stft_frames(signal, cfg)?;
    ComplexSpectrogram::new(data, frames, *cfg)
}

fn synthesis_norm(frames: usize, cfg: &StftConfig, window: &[f64]) -> Result<Vec<f64>> {
    let len = cfg.covered_len(frames);
    let mut denom = vec![0.0; len];
    for t in 0..frames {
        let start = t * cfg.hop;
        for (n, w) in window.iter().enumerate() {
            denom[start + n] += w * w;
        }
    }
    if let Some(sample) = denom.iter().position(|d| *d <= 0.0) {
        return Err(Error::ColaViolation { sample });
    }
    Ok(denom)
}

/// Least-squares overlap-add inverse of [`stft_frames`].
pub fn istft_frames(spec: &[Complex64], frames: usize, cfg: &StftConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let bins = cfg.num_bins();
    if spec.len() != frames * bins {
        return Err(Error::shape(
            "istft",
            format!("{} values for {frames}x{bins}", spec.len()),
        ));
    }
    let window = cfg.window();
    let denom = synthesis_norm(frames, cfg, &window)?;
    let plan = plans(cfg.fft_len);
    let mut input = plan.inverse.make_input_vec();
    let mut output = plan.inverse.make_output_vec();
    let mut scratch = plan.inverse.make_scratch_vec();
    let scale = 1.0 / cfg.fft_len as f64;
    let mut out = vec![0.0; denom.len()];
    for t in 0..frames {
        input.copy_from_slice(&spec[t * bins..(t + 1) * bins]);
        clear_edge_imag(&mut input, cfg.fft_len);
        plan.inverse
            .process_with_scratch(&mut input, &mut output, &mut scratch)
            .expect("fft buffer sizes");
        let start = t * cfg.hop;
        for (n, w) in window.iter().enumerate() {
            out[start + n] += w * output[n] * scale;
        }
    }
    for (o, d) in out.iter_mut().zip(&denom) {
        *o /= d;
    }
    Ok(out)
}

pub fn istft(spec: &ComplexSpectrogram) -> Result<Vec<f64>> {
    istft_frames(spec.data(), spec.frames(), spec.config())
}

fn clear_edge_imag(buf: &mut [Complex64], fft_len: usize) {
    buf[0].im = 0.0;
    if fft_len % 2 == 0 {
        let last = buf.len() - 1;
        buf[last].im = 0.0;
    }
}

/// Vector-Jacobian product of [`stft_frames`]: maps a gradient on the
/// spectrogram (real and imaginary parts treated as independent outputs)
/// back onto a signal of `n_samples`.
pub fn stft_adjoint_frames(
    grad: &[Complex64],
    frames: usize,
    n_samples: usize,
    cfg: &StftConfig,
) -> Vec<f64> {
    let bins = cfg.num_bins();
    let window = cfg.window();
    let plan = plans(cfg.fft_len);
    let mut input = plan.inverse.make_input_vec();
    let mut output = plan.inverse.make_output_vec();
    let mut scratch = plan.inverse.make_scratch_vec();
    let even = cfg.fft_len % 2 == 0;
    let mut dx = vec![0.0; n_samples];
    for t in 0..frames {
        input.copy_from_slice(&grad[t * bins..(t + 1) * bins]);
        for (k, v) in input.iter_mut().enumerate() {
            let edge = k == 0 || (even && k == bins - 1);
            if edge {
                v.im = 0.0;
            } else {
                *v *= 0.5;
            }
        }
        plan.inverse
            .process_with_scratch(&mut input, &mut output, &mut scratch)
            .expect("fft buffer sizes");
        let start = t * cfg.hop;
        for (n, w) in window.iter().enumerate() {
            dx[start + n] += w * output[n];
        }
    }
    dx
}

/// Vector-Jacobian product of [`istft_frames`] with respect to the bins.
pub fn istft_adjoint_frames(
    grad: &[f64],
    frames: usize,
    cfg: &StftConfig,
) -> Result<Vec<Complex64>> {
    let bins = cfg.num_bins();
    let window = cfg.window();
    let denom = synthesis_norm(frames, cfg, &window)?;
    let plan = plans(cfg.fft_len);
    let mut input = plan.forward.make_input_vec();
    let mut output = plan.forward.make_output_vec();
    let mut scratch = plan.forward.make_scratch_vec();
    let n = cfg.fft_len as f64;
    let even = cfg.fft_len % 2 == 0;
    let mut out = Vec::with_capacity(frames * bins);
    for t in 0..frames {
        let start = t * cfg.hop;
        input.iter_mut().for_each(|v| *v = 0.0);
        for (i, w) in window.iter().enumerate() {
            input[i] = w * grad[start + i] / denom[start + i];
        }
        plan.forward
            .process_with_scratch(&mut input, &mut output, &mut scratch)
            .expect("fft buffer sizes");
        for (k, v) in output.iter().enumerate() {
            let edge = k == 0 || (even && k == bins - 1);
            if edge {
                out.push(Complex64::new(v.re / n, 0.0));
            } else {
                out.push(*v * (2.0 / n));
            }
        }
    }
    Ok(out)
}
