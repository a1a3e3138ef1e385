use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::nonlinear::apply_nonlinearity;
use super::sources::{SourceConfig, Sources};
use crate::error::{Error, Result};
use crate::rir::{
    image_method, import_rir, make_noisy_rir, sample_room, AbsorptionModel, Rir, RirKind, RoomSpec,
    RIR_LEN,
};
use crate::signal::{convolve, db_ratio, energy, gain_for_ratio, quantize, Waveform, SAMPLE_RATE};
use crate::split::Split;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// Near-end talker, far-end echo and background noise together.
    #[serde(rename = "DT")]
    DoubleTalk,
    /// Far-end echo only (plus noise); the target is silence.
    #[serde(rename = "ST_FE")]
    FarEndSingleTalk,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::DoubleTalk => "DT",
            Scenario::FarEndSingleTalk => "ST_FE",
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub clip_seconds: f64,
    pub nonlinear_fraction: f64,
    pub double_talk_fraction: f64,
    /// Inclusive integer SER range in dB.
    pub ser_db_range: [i32; 2],
    /// `None` disables background noise.
    pub snr_db_range: Option<[f64; 2]>,
    pub rir_snr_db_range: [f64; 2],
    /// RMS level range of the far-end and near-end sources, dBFS.
    pub source_level_dbfs: [f64; 2],
    /// Gate the near-end talker to a random sub-window in double talk.
    pub partial_overlap: bool,
    pub absorption: AbsorptionModel,
    pub sources: SourceConfig,
    /// Directory of measured RIR WAVs for the real split.
    pub real_rir_dir: Option<PathBuf>,
    pub headroom_peak: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            clip_seconds: 2.0,
            nonlinear_fraction: 0.9,
            double_talk_fraction: 0.5,
            ser_db_range: [-10, 10],
            snr_db_range: Some([5.0, 15.0]),
            rir_snr_db_range: [5.0, 15.0],
            source_level_dbfs: [-35.0, -25.0],
            partial_overlap: false,
            absorption: AbsorptionModel::ImageDecay,
            sources: SourceConfig::default(),
            real_rir_dir: None,
            headroom_peak: 0.9,
        }
    }
}

impl ScenarioConfig {
    pub fn clip_len(&self) -> usize {
        (self.clip_seconds * SAMPLE_RATE as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.clip_len() < 320 {
            return bad("clip_seconds too short for one STFT frame");
        }
        for (name, p) in [
            ("nonlinear_fraction", self.nonlinear_fraction),
            ("double_talk_fraction", self.double_talk_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.ser_db_range[0] > self.ser_db_range[1] {
            return bad("empty SER range");
        }
        if self.snr_db_range.is_some_and(|r| r[0] > r[1])
            || self.rir_snr_db_range[0] > self.rir_snr_db_range[1]
        {
            return bad("empty SNR range");
        }
        if !(self.headroom_peak > 0.0 && self.headroom_peak < 1.0) {
            return bad("headroom_peak must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Echo at the microphone: `x_play * h` truncated to `clip_len`.
pub fn synth_echo(x_play: &[f64], rir: &Rir, clip_len: usize) -> Result<Vec<f64>> {
    if !matches!(rir.kind, RirKind::Clean | RirKind::Imported) {
        return Err(Error::Config(format!(
            "echo path must be a clean or imported RIR, got {:?}",
            rir.kind
        )));
    }
    let mut v = convolve(x_play, rir.taps())?;
    v.resize(clip_len, 0.0);
    Ok(v)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixParts {
    pub s: Vec<f64>,
    pub v: Vec<f64>,
    pub d: Vec<f64>,
    pub y: Vec<f64>,
    pub echo_gain: f64,
    pub noise_gain: f64,
}

/// Scales echo and noise to the requested ratios and sums the mixture.
///
/// In double talk the echo is scaled to `ser_db` against `s` and the noise
/// to `snr_db` against `s`. In far-end single talk `s` must be silent, the
/// echo keeps unit gain and the noise is referenced to the echo.
pub fn mix(
    scenario: Scenario,
    s: &[f64],
    v: &[f64],
    noise: Option<(&[f64], f64)>,
    ser_db: f64,
) -> Result<MixParts> {
    let n = s.len();
    if v.len() != n || noise.is_some_and(|(d, _)| d.len() != n) {
        return Err(Error::shape("mix", "component lengths differ"));
    }
    let (echo_gain, reference): (f64, &[f64]) = match scenario {
        Scenario::DoubleTalk => (gain_for_ratio(ser_db, s, v)?, s),
        Scenario::FarEndSingleTalk => {
            if energy(s) != 0.0 {
                return Err(Error::Config(
                    "far-end single talk needs a silent near end".into(),
                ));
            }
            if energy(v) <= 0.0 {
                return Err(Error::ZeroEnergy("echo"));
            }
            (1.0, v)
        }
    };
    let v: Vec<f64> = v.iter().map(|x| x * echo_gain).collect();
    let reference = if scenario == Scenario::FarEndSingleTalk {
        &v[..]
    } else {
        reference
    };
    let (d, noise_gain) = match noise {
        Some((d, snr_db)) => {
            let g = gain_for_ratio(snr_db, reference, d)?;
            (d.iter().map(|x| x * g).collect(), g)
        }
        None => (vec![0.0; n], 0.0),
    };
    let y = (0..n).map(|i| s[i] + v[i] + d[i]).collect();
    Ok(MixParts {
        s: s.to_vec(),
        v,
        d,
        y,
        echo_gain,
        noise_gain,
    })
}

/// Per-clip generation parameters and measured levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipSpec {
    pub id: String,
    pub split: Split,
    pub index: usize,
    pub seed: u64,
    pub scenario: Scenario,
    /// Target SER, `None` in far-end single talk.
    pub ser_db: Option<i32>,
    pub snr_db: Option<f64>,
    pub nonlinear: bool,
    pub rir_snr_db: f64,
    pub room: Option<RoomSpec>,
    /// Multiplier from `x_play * h_clean` to the stored echo.
    pub echo_gain: f64,
    pub ser_db_measured: Option<f64>,
    pub snr_db_measured: Option<f64>,
}

/// One synthesized clip. All waveforms sit on the 16-bit grid, so writing
/// and reading them back is lossless, and `y == s + v + d` exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct Mixture {
    pub spec: ClipSpec,
    pub y: Waveform,
    pub x: Waveform,
    pub s: Waveform,
    pub v: Waveform,
    pub d: Waveform,
    pub rir_clean: Rir,
    pub rir_noisy: Rir,
}

impl Mixture {
    pub fn id(&self) -> &str {
        &self.spec.id
    }

    pub fn scenario(&self) -> Scenario {
        self.spec.scenario
    }
}

pub fn clip_id(split: Split, index: usize) -> String {
    format!("{split}_{index:06}")
}

/// Deterministic per-clip seed.
pub fn clip_seed(master_seed: u64, split: Split, index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update(split.tag().to_le_bytes());
    h.update((index as u64).to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn quantized(x: &[f64]) -> Waveform {
    Waveform::new(x.iter().map(|v| quantize(*v)).collect()).expect("quantized samples are finite")
}

fn quantized_rir(rir: &Rir) -> Rir {
    Rir {
        h: quantized(rir.taps()),
        room: rir.room.clone(),
        kind: rir.kind,
    }
}

fn set_level(x: &mut [f64], dbfs: f64, peak_cap: f64) -> Result<()> {
    let rms = (energy(x) / x.len() as f64).sqrt();
    if rms == 0.0 {
        return Err(Error::ZeroEnergy("source"));
    }
    let mut g = 10f64.powf(dbfs / 20.0) / rms;
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs())) * g;
    if peak > peak_cap {
        g *= peak_cap / peak;
    }
    x.iter_mut().for_each(|v| *v *= g);
    Ok(())
}

fn gate(x: &mut [f64], rng: &mut impl Rng) {
    let n = x.len();
    let active = rng.gen_range(n / 2..=n);
    let start = rng.gen_range(0..=n - active);
    let ramp = (SAMPLE_RATE as usize / 100).min(active / 2).max(1);
    for (i, v) in x.iter_mut().enumerate() {
        let g = if i < start || i >= start + active {
            0.0
        } else {
            let k = (i - start).min(start + active - 1 - i);
            (k as f64 / ramp as f64).min(1.0)
        };
        *v *= g;
    }
}

/// Draws complete clips from a configuration and source pools.
#[derive(Clone, Debug)]
pub struct Synthesizer {
    cfg: ScenarioConfig,
    sources: Sources,
    real_rirs: Vec<Rir>,
}

impl Synthesizer {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let sources = Sources::from_config(&cfg.sources)?;
        let mut real_rirs = Vec::new();
        if let Some(dir) = &cfg.real_rir_dir {
            let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
                .map_err(|e| Error::io(dir, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
                .collect();
            paths.sort();
            for p in paths {
                real_rirs.push(import_rir(&p, RIR_LEN)?);
            }
        }
        Ok(Synthesizer {
            cfg,
            sources,
            real_rirs,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    fn echo_path(&self, split: Split, rng: &mut ChaCha8Rng) -> Result<Rir> {
        if split == Split::Real {
            if self.real_rirs.is_empty() {
                return Err(Error::Config(
                    "real split needs real_rir_dir with WAV files".into(),
                ));
            }
            return Ok(self.real_rirs[rng.gen_range(0..self.real_rirs.len())].clone());
        }
        let room = sample_room(split, rng)?;
        image_method(&room, RIR_LEN, self.cfg.absorption)
    }

    /// Synthesizes clip `index` of `split` from its own seed.
    pub fn clip(&self, split: Split, index: usize, seed: u64) -> Result<Mixture> {
        self.clip_inner(split, index, seed)
            .map_err(|e| Error::Clip {
                index,
                source: Box::new(e),
            })
    }

    fn clip_inner(&self, split: Split, index: usize, seed: u64) -> Result<Mixture> {
        let cfg = &self.cfg;
        let len = cfg.clip_len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let rir_clean = quantized_rir(&self.echo_path(split, &mut rng)?);
        let capture_noise = Waveform::new(self.sources.noise.draw(&mut rng, 2 * RIR_LEN)?)?;
        let rir_snr_db = rng.gen_range(cfg.rir_snr_db_range[0]..=cfg.rir_snr_db_range[1]);
        let rir_noisy = quantized_rir(&make_noisy_rir(
            &rir_clean,
            rir_snr_db,
            &mut rng,
            &capture_noise,
        )?);

        let mut x = self.sources.far.draw(&mut rng, len)?;
        let level = rng.gen_range(cfg.source_level_dbfs[0]..=cfg.source_level_dbfs[1]);
        set_level(&mut x, level, cfg.headroom_peak)?;
        let x = quantized(&x);
        let nonlinear = rng.gen_bool(cfg.nonlinear_fraction);
        let x_play = if nonlinear {
            apply_nonlinearity(&x)
        } else {
            x.clone()
        };
        let echo = synth_echo(x_play.samples(), &rir_clean, len)?;

        let scenario = if rng.gen_bool(cfg.double_talk_fraction) {
            Scenario::DoubleTalk
        } else {
            Scenario::FarEndSingleTalk
        };
        let (s, ser_db) = match scenario {
            Scenario::DoubleTalk => {
                let mut s = self.sources.near.draw(&mut rng, len)?;
                let level = rng.gen_range(cfg.source_level_dbfs[0]..=cfg.source_level_dbfs[1]);
                set_level(&mut s, level, cfg.headroom_peak)?;
                if cfg.partial_overlap {
                    gate(&mut s, &mut rng);
                }
                let ser = rng.gen_range(cfg.ser_db_range[0]..=cfg.ser_db_range[1]);
                (s, Some(ser))
            }
            Scenario::FarEndSingleTalk => (vec![0.0; len], None),
        };
        let noise = match cfg.snr_db_range {
            Some(r) => Some((
                self.sources.noise.draw(&mut rng, len)?,
                rng.gen_range(r[0]..=r[1]),
            )),
            None => None,
        };
        let parts = mix(
            scenario,
            &s,
            &echo,
            noise.as_ref().map(|(d, snr)| (&d[..], *snr)),
            ser_db.unwrap_or(0) as f64,
        )?;

        let y_peak = parts.y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let headroom = if y_peak > cfg.headroom_peak {
            cfg.headroom_peak / y_peak
        } else {
            1.0
        };
        let s = quantized(&parts.s.iter().map(|v| v * headroom).collect::<Vec<_>>());
        let v = quantized(&parts.v.iter().map(|v| v * headroom).collect::<Vec<_>>());
        let d = quantized(&parts.d.iter().map(|v| v * headroom).collect::<Vec<_>>());
        let y = Waveform::new(
            (0..len)
                .map(|i| s.samples()[i] + v.samples()[i] + d.samples()[i])
                .collect(),
        )?;

        let (ser_db_measured, reference) = match scenario {
            Scenario::DoubleTalk => (Some(db_ratio(s.energy(), v.energy())), s.energy()),
            Scenario::FarEndSingleTalk => (None, v.energy()),
        };
        let snr_db_measured = noise
            .as_ref()
            .filter(|_| d.energy() > 0.0)
            .map(|_| db_ratio(reference, d.energy()));
        let spec = ClipSpec {
            id: clip_id(split, index),
            split,
            index,
            seed,
            scenario,
            ser_db,
            snr_db: noise.as_ref().map(|(_, snr)| *snr),
            nonlinear,
            rir_snr_db,
            room: rir_clean.room.clone(),
            echo_gain: parts.echo_gain * headroom,
            ser_db_measured,
            snr_db_measured,
        };
        Ok(Mixture {
            spec,
            y,
            x,
            s,
            v,
            d,
            rir_clean,
            rir_noisy,
        })
    }
}
