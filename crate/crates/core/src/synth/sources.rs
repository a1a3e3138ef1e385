//! Near-end, far-end and noise material.
//!
//! A corpus directory of 16 kHz mono WAV files is used when configured.
//! Without one, a formant synthesizer produces speech-like signals (voiced
//! syllables with pitch contours and formant resonances, plus fricative
//! bursts) and a small family of colored noises stands in for the noise
//! library.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{energy, read_wav, SAMPLE_RATE};

const FS: f64 = SAMPLE_RATE as f64;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub near_dir: Option<PathBuf>,
    pub far_dir: Option<PathBuf>,
    pub noise_dir: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub enum SourcePool {
    SyntheticSpeech,
    SyntheticNoise,
    Corpus(Vec<PathBuf>),
}

impl SourcePool {
    pub fn corpus(dir: &Path) -> Result<Self> {
        let mut files = Vec::new();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
            {
                files.push(path);
            }
        }
        files.sort();
        if files.is_empty() {
            return Err(Error::Config(format!("no .wav files in {}", dir.display())));
        }
        Ok(SourcePool::Corpus(files))
    }

    /// Draws `len` samples with non-zero energy.
    pub fn draw<R: Rng>(&self, rng: &mut R, len: usize) -> Result<Vec<f64>> {
        match self {
            SourcePool::SyntheticSpeech => Ok(synth_speech(rng, len)),
            SourcePool::SyntheticNoise => Ok(synth_noise(rng, len)),
            SourcePool::Corpus(files) => {
                for _ in 0..16 {
                    let path = &files[rng.gen_range(0..files.len())];
                    let w = read_wav(path)?;
                    if w.is_empty() {
                        continue;
                    }
                    let offset = if w.len() > len {
                        rng.gen_range(0..=w.len() - len)
                    } else {
                        0
                    };
                    let seg: Vec<f64> = (0..len)
                        .map(|i| w.samples()[(offset + i) % w.len()])
                        .collect();
                    if energy(&seg) > 0.0 {
                        return Ok(seg);
                    }
                }
                Err(Error::ZeroEnergy("corpus segments after 16 draws"))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Sources {
    pub near: SourcePool,
    pub far: SourcePool,
    pub noise: SourcePool,
}

impl Sources {
    pub fn synthetic() -> Self {
        Sources {
            near: SourcePool::SyntheticSpeech,
            far: SourcePool::SyntheticSpeech,
            noise: SourcePool::SyntheticNoise,
        }
    }

    pub fn from_config(cfg: &SourceConfig) -> Result<Self> {
        let pick = |dir: &Option<PathBuf>, fallback: SourcePool| match dir {
            Some(d) => SourcePool::corpus(d),
            None => Ok(fallback),
        };
        Ok(Sources {
            near: pick(&cfg.near_dir, SourcePool::SyntheticSpeech)?,
            far: pick(&cfg.far_dir, SourcePool::SyntheticSpeech)?,
            noise: pick(&cfg.noise_dir, SourcePool::SyntheticNoise)?,
        })
    }
}

/// Two-pole resonator with unit peak gain near its center frequency.
struct Resonator {
    a1: f64,
    a2: f64,
    gain: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new(freq: f64, bandwidth: f64) -> Self {
        let r = (-PI * bandwidth / FS).exp();
        let theta = 2.0 * PI * freq / FS;
        Resonator {
            a1: 2.0 * r * theta.cos(),
            a2: -r * r,
            gain: 1.0 - r,
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn tick(&mut self, x: f64) -> f64 {
        let y = self.gain * x + self.a1 * self.y1 + self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// Speech-like signal: syllables separated by short pauses.
pub fn synth_speech<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    let base_f0 = rng.gen_range(85.0..255.0);
    let tract_scale = rng.gen_range(0.85..1.2);
    let mut pos = (rng.gen_range(0.0..0.15) * FS) as usize;
    while pos < len {
        let dur = (rng.gen_range(0.12..0.38) * FS) as usize;
        let end = (pos + dur).min(len);
        if rng.gen_bool(0.8) {
            voiced(rng, &mut out[pos..end], base_f0, tract_scale);
        } else {
            fricative(rng, &mut out[pos..end]);
        }
        pos = end + (rng.gen_range(0.03..0.22) * FS) as usize;
    }
    if energy(&out) == 0.0 {
        // clip shorter than the initial pause
        voiced(rng, &mut out, base_f0, tract_scale);
    }
    out
}

fn envelope(i: usize, n: usize) -> f64 {
    let x = (i as f64 + 0.5) / n as f64;
    (PI * x).sin().powf(0.6)
}

fn voiced<R: Rng>(rng: &mut R, out: &mut [f64], base_f0: f64, tract_scale: f64) {
    let n = out.len();
    let f_start = base_f0 * rng.gen_range(0.85..1.15);
    let f_end = base_f0 * rng.gen_range(0.8..1.2);
    let formants = [
        (rng.gen_range(300.0..850.0), rng.gen_range(60.0..120.0)),
        (rng.gen_range(850.0..2400.0), rng.gen_range(80.0..160.0)),
        (rng.gen_range(2300.0..3300.0), rng.gen_range(120.0..250.0)),
    ];
    let mut tract: Vec<Resonator> = formants
        .iter()
        .map(|(f, b)| Resonator::new((f * tract_scale).min(7000.0), *b))
        .collect();
    let amp = rng.gen_range(0.5..1.0);
    let breath = rng.gen_range(0.01..0.05);
    let mut phase = rng.gen_range(0.0..1.0);
    let mut glottal = 0.0;
    for (i, o) in out.iter_mut().enumerate() {
        let f0 = f_start + (f_end - f_start) * i as f64 / n as f64;
        phase += f0 / FS;
        let mut excitation = 0.0;
        if phase >= 1.0 {
            phase -= 1.0;
            excitation = 1.0;
        }
        // leaky integration softens the pulse train's top end
        glottal = 0.7 * glottal + excitation;
        let src = glottal + breath * rng.gen_range(-1.0..1.0);
        let mut y = src;
        for r in tract.iter_mut() {
            y = r.tick(y) * 3.0;
        }
        *o += amp * envelope(i, n) * y;
    }
}

fn fricative<R: Rng>(rng: &mut R, out: &mut [f64]) {
    let n = out.len();
    let mut shape = Resonator::new(rng.gen_range(2500.0..6500.0), rng.gen_range(800.0..2000.0));
    let amp = rng.gen_range(0.1..0.4);
    for (i, o) in out.iter_mut().enumerate() {
        *o += amp * envelope(i, n) * shape.tick(rng.gen_range(-1.0..1.0)) * 4.0;
    }
}

/// Colored background noise with slow level fluctuation.
pub fn synth_noise<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let kind = rng.gen_range(0..4);
    let mut out = Vec::with_capacity(len);
    match kind {
        0 => out.extend((0..len).map(|_| rng.gen_range(-1.0..1.0))),
        1 => {
            // Kellet's pink filter
            let mut b = [0.0f64; 7];
            for _ in 0..len {
                let w: f64 = rng.gen_range(-1.0..1.0);
                b[0] = 0.99886 * b[0] + w * 0.0555179;
                b[1] = 0.99332 * b[1] + w * 0.0750759;
                b[2] = 0.96900 * b[2] + w * 0.1538520;
                b[3] = 0.86650 * b[3] + w * 0.3104856;
                b[4] = 0.55000 * b[4] + w * 0.5329522;
                b[5] = -0.7616 * b[5] - w * 0.0168980;
                out.push(b[..6].iter().sum::<f64>() + b[6] + w * 0.5362);
                b[6] = w * 0.115926;
            }
        }
        2 => {
            let mut acc = 0.0;
            for _ in 0..len {
                acc = 0.995 * acc + rng.gen_range(-1.0..1.0);
                out.push(acc);
            }
        }
        _ => {
            let mains = if rng.gen_bool(0.5) { 50.0 } else { 60.0 };
            let mut hum_phase = rng.gen_range(0.0..1.0);
            for _ in 0..len {
                hum_phase += mains / FS;
                let t = 2.0 * PI * hum_phase;
                let hum = t.sin() + 0.5 * (3.0 * t).sin() + 0.25 * (5.0 * t).sin();
                out.push(0.6 * hum + rng.gen_range(-1.0..1.0));
            }
        }
    }
    let rate = rng.gen_range(0.1..1.5);
    let depth = rng.gen_range(0.0..0.6);
    let offset = rng.gen_range(0.0..2.0 * PI);
    for (i, v) in out.iter_mut().enumerate() {
        *v *= 1.0 - depth * 0.5 * (1.0 + (2.0 * PI * rate * i as f64 / FS + offset).sin());
    }
    out
}
