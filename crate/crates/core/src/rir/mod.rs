//! Room impulse responses: shoebox simulation, noisy pulse capture and
//! import/export of measured responses.

mod image;

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use image::image_response;

use crate::error::{Error, Result};
use crate::signal::{energy, gain_for_ratio, read_wav, write_wav, Waveform, SAMPLE_RATE};
use crate::split::Split;

/// RIR length handed to the prompt path (0.5 s).
pub const RIR_LEN: usize = 8000;
pub const SPEED_OF_SOUND: f64 = 343.0;
/// Minimum distance of the microphone (and loudspeaker) from any wall.
pub const WALL_MARGIN: f64 = 0.5;
pub const T60_CHOICES: [f64; 6] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
pub const IMPORT_PEAK: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub dims: [f64; 3],
    pub src: [f64; 3],
    pub mic: [f64; 3],
    pub t60: f64,
    pub fs: u32,
    pub c: f64,
}

impl RoomSpec {
    pub fn new(dims: [f64; 3], src: [f64; 3], mic: [f64; 3], t60: f64) -> Result<Self> {
        let room = Self {
            dims,
            src,
            mic,
            t60,
            fs: SAMPLE_RATE,
            c: SPEED_OF_SOUND,
        };
        room.validate()?;
        Ok(room)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::InvalidRoom(format!("dimensions {:?}", self.dims)));
        }
        for (name, p) in [("source", self.src), ("microphone", self.mic)] {
            if (0..3).any(|i| !(p[i] > 0.0 && p[i] < self.dims[i])) {
                return Err(Error::InvalidRoom(format!(
                    "{name} {p:?} not strictly inside {:?}",
                    self.dims
                )));
            }
        }
        if !(self.t60 > 0.0) {
            return Err(Error::InvalidRoom(format!("t60 {}", self.t60)));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.dims.iter().product()
    }

    pub fn surface(&self) -> f64 {
        let [l, w, h] = self.dims;
        2.0 * (l * w + w * h + l * h)
    }

    pub fn ml_distance(&self) -> f64 {
        (0..3)
            .map(|i| (self.src[i] - self.mic[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Tap index of the direct path under nearest-sample placement.
    pub fn direct_tap(&self) -> usize {
        (self.fs as f64 * self.ml_distance() / self.c).round() as usize
    }
}

/// Reverberation formula used to turn a target T60 into wall absorption.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AbsorptionModel {
    Sabine,
    /// Image sources lose energy per reflection, so their early decay
    /// follows the Eyring relation.
    Eyring,
    /// Inverts the direction-averaged decay of the image model itself, as a
    /// -5..-25 dB Schroeder fit would see it. Unlike Eyring this accounts
    /// for the slower late decay of flat or elongated rooms.
    #[default]
    ImageDecay,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Absorption {
    pub alpha: f64,
    /// Pressure reflection coefficient `sqrt(1 - alpha)`, uniform over walls.
    pub beta: f64,
}

pub fn absorption_from_t60(room: &RoomSpec, model: AbsorptionModel) -> Result<Absorption> {
    if !(room.t60 > 0.0) {
        return Err(Error::InvalidRoom(format!("t60 {}", room.t60)));
    }
    let sabine = 0.161 * room.volume() / (room.surface() * room.t60);
    let alpha = match model {
        AbsorptionModel::Sabine => sabine,
        AbsorptionModel::Eyring => 1.0 - (-sabine).exp(),
        AbsorptionModel::ImageDecay => 1.0 - (-image_decay_exponent(room)).exp(),
    };
    if alpha >= 1.0 {
        return Err(Error::UnachievableT60 {
            t60: room.t60,
            alpha,
        });
    }
    Ok(Absorption {
        alpha,
        beta: (1.0 - alpha).sqrt(),
    })
}

/// Energy exponent `a = -ln(beta^2)` at which a Schroeder T20 fit of the
/// image model reads the room's T60.
///
/// Along direction `u` an image at delay `t` has undergone
/// `c·t·Σ|u_i|/L_i` reflections, so with image density `1/V` and spherical
/// spreading the reverberant energy arrives at rate
/// `c/(4πV)·mean_u exp(-a·c·g(u)·t)`. The direct path adds `1/(4πd)^2` at
/// the start, which decides where the -5 dB point falls. The fitted T60
/// scales close to `1/a`, so a few fixed-point steps settle `a`.
fn image_decay_exponent(room: &RoomSpec) -> f64 {
    const N: usize = 24;
    let h = std::f64::consts::FRAC_PI_2 / N as f64;
    // midpoint rule over one octant, which holds every |u_i| combination
    let mut dirs = Vec::with_capacity(N * N);
    let mut total_weight = 0.0;
    for i in 0..N {
        let theta = (i as f64 + 0.5) * h;
        for j in 0..N {
            let phi = (j as f64 + 0.5) * h;
            let u = [
                theta.sin() * phi.cos(),
                theta.sin() * phi.sin(),
                theta.cos(),
            ];
            let g: f64 = (0..3).map(|k| u[k] / room.dims[k]).sum();
            dirs.push((room.c * g, theta.sin()));
            total_weight += theta.sin();
        }
    }
    let rate = room.c / (4.0 * PI * room.volume());
    let d = room.ml_distance();
    let direct = (4.0 * PI * d).powi(-2);

    let fitted_t60 = |a: f64| {
        let reverb = |t: f64| -> f64 {
            dirs.iter()
                .map(|(k, w)| w * (-a * k * t).exp() / (a * k))
                .sum::<f64>()
                * rate
                / total_weight
        };
        let e0 = direct + reverb(0.0);
        let edc_db = |t: f64| 10.0 * (reverb(t) / e0).log10();
        let crossing = |level: f64| {
            let (mut lo, mut hi) = (0.0, 1e-3);
            while edc_db(hi) > level {
                lo = hi;
                hi *= 2.0;
            }
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if edc_db(mid) > level {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let (t0, t1) = (crossing(-5.0), crossing(-25.0));
        let m = 64;
        let pts: Vec<(f64, f64)> = (0..=m)
            .map(|i| {
                let t = t0 + (t1 - t0) * i as f64 / m as f64;
                (t, edc_db(t))
            })
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        -60.0 * sxx / sxy
    };

    // Eyring start: the early decay of the image model
    let mut a = 0.161 * room.volume() / (room.surface() * room.t60);
    for _ in 0..8 {
        let next = a * fitted_t60(a) / room.t60;
        let done = (next / a - 1.0).abs() < 1e-6;
        a = next;
        if done {
            break;
        }
    }
    a
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RirKind {
    Clean,
    Noisy,
    Denoised,
    Imported,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rir {
    pub h: Waveform,
    pub room: Option<RoomSpec>,
    pub kind: RirKind,
}

impl Rir {
    pub fn taps(&self) -> &[f64] {
        self.h.samples()
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

/// Clean RIR of `out_len` taps for `room`.
pub fn image_method(room: &RoomSpec, out_len: usize, model: AbsorptionModel) -> Result<Rir> {
    let Absorption { beta, .. } = absorption_from_t60(room, model)?;
    let h = image_response(room, beta, out_len)?;
    Ok(Rir {
        h: Waveform::new(h)?,
        room: Some(room.clone()),
        kind: RirKind::Clean,
    })
}

/// Adds a capture-noise segment to a clean RIR so that the energy ratio of
/// RIR to noise over the first `RIR_LEN` taps equals `snr_db`. The segment
/// starts at a random offset when `noise` is longer than needed.
pub fn make_noisy_rir<R: Rng>(
    rir: &Rir,
    snr_db: f64,
    rng: &mut R,
    noise: &Waveform,
) -> Result<Rir> {
    if !matches!(rir.kind, RirKind::Clean | RirKind::Imported) {
        return Err(Error::Config(format!(
            "noisy capture expects a clean or imported RIR, got {:?}",
            rir.kind
        )));
    }
    let window = rir.len().min(RIR_LEN);
    if noise.len() < window {
        return Err(Error::SignalTooShort {
            len: noise.len(),
            needed: window,
        });
    }
    let offset = if noise.len() > window {
        rng.gen_range(0..=noise.len() - window)
    } else {
        0
    };
    let segment = &noise.samples()[offset..offset + window];
    if energy(segment) <= 0.0 {
        return Err(Error::ZeroEnergy("RIR capture noise"));
    }
    let gain = gain_for_ratio(snr_db, &rir.taps()[..window], segment)?;
    let mut h = rir.taps().to_vec();
    for (dst, n) in h.iter_mut().zip(segment) {
        *dst += gain * n;
    }
    Ok(Rir {
        h: Waveform::new(h)?,
        room: rir.room.clone(),
        kind: RirKind::Noisy,
    })
}

/// Draws a room from the training grid with the split's M-L distance.
pub fn sample_room<R: Rng>(split: Split, rng: &mut R) -> Result<RoomSpec> {
    let distances = split.ml_distances().ok_or_else(|| {
        Error::Config("the real split uses imported RIRs, not simulated rooms".into())
    })?;
    let dims = [
        rng.gen_range(4..=8) as f64,
        rng.gen_range(4..=7) as f64,
        rng.gen_range(3..=5) as f64,
    ];
    let t60 = *T60_CHOICES.choose(rng).expect("non-empty");
    let distance = *distances.choose(rng).expect("non-empty");
    let mut mic = [0.0; 3];
    for i in 0..3 {
        mic[i] = rng.gen_range(WALL_MARGIN..dims[i] - WALL_MARGIN);
    }
    let inside =
        |p: &[f64; 3]| (0..3).all(|i| p[i] >= WALL_MARGIN && p[i] <= dims[i] - WALL_MARGIN);
    for _ in 0..1000 {
        let dir = random_unit(rng);
        let src = [
            mic[0] + distance * dir[0],
            mic[1] + distance * dir[1],
            mic[2] + distance * dir[2],
        ];
        if inside(&src) {
            return RoomSpec::new(dims, src, mic, t60);
        }
    }
    Err(Error::DegenerateGeometry(format!(
        "no in-room source direction at {distance} m after 1000 attempts"
    )))
}

fn random_unit<R: Rng>(rng: &mut R) -> [f64; 3] {
    loop {
        let v = [
            rng.gen_range(-1.0..1.0f64),
            rng.gen_range(-1.0..1.0f64),
            rng.gen_range(-1.0..1.0f64),
        ];
        let n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        if n2 > 1e-6 && n2 <= 1.0 {
            let n = n2.sqrt();
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Pads or truncates `h` to `out_len` and peak-normalizes to [`IMPORT_PEAK`].
pub fn normalize_imported(h: &[f64], out_len: usize) -> Result<Waveform> {
    let mut taps = h.to_vec();
    taps.resize(out_len, 0.0);
    let peak = taps.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::ZeroEnergy("RIR"));
    }
    Waveform::new(taps.iter().map(|v| v * IMPORT_PEAK / peak).collect())
}

pub fn import_rir(path: impl AsRef<Path>, out_len: usize) -> Result<Rir> {
    let w = read_wav(path)?;
    Ok(Rir {
        h: normalize_imported(w.samples(), out_len)?,
        room: None,
        kind: RirKind::Imported,
    })
}

/// Sidecar metadata written next to an exported RIR.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RirMetadata {
    pub dims: Option<[f64; 3]>,
    pub src: Option<[f64; 3]>,
    pub mic: Option<[f64; 3]>,
    pub t60: Option<f64>,
    pub seed: u64,
    pub kind: RirKind,
}

/// Writes `<stem>.wav` and `<stem>.json` into `dir`.
pub fn export_rir(dir: impl AsRef<Path>, stem: &str, rir: &Rir, seed: u64) -> Result<()> {
    let dir = dir.as_ref();
    write_wav(dir.join(format!("{stem}.wav")), &rir.h)?;
    let meta = RirMetadata {
        dims: rir.room.as_ref().map(|r| r.dims),
        src: rir.room.as_ref().map(|r| r.src),
        mic: rir.room.as_ref().map(|r| r.mic),
        t60: rir.room.as_ref().map(|r| r.t60),
        seed,
        kind: rir.kind,
    };
    let path = dir.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::json(&path, e))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn room_534(t60: f64) -> RoomSpec {
        RoomSpec::new([5.0, 4.0, 3.0], [2.3, 2.0, 1.5], [2.0, 2.0, 1.5], t60).unwrap()
    }

    #[test]
    fn sabine_worked_example() {
        let a = absorption_from_t60(&room_534(0.3), AbsorptionModel::Sabine).unwrap();
        assert!((a.alpha - 0.342553).abs() < 1e-5, "{}", a.alpha);
        assert!((a.beta - 0.810831).abs() < 1e-5, "{}", a.beta);
    }

    #[test]
    fn eyring_is_below_one_and_above_sabine_limit() {
        let room = room_534(0.3);
        let e = absorption_from_t60(&room, AbsorptionModel::Eyring).unwrap();
        let s = absorption_from_t60(&room, AbsorptionModel::Sabine).unwrap();
        assert!((e.alpha - (1.0 - (-s.alpha).exp())).abs() < 1e-15);
        assert!(e.alpha < s.alpha);
    }

    #[test]
    fn lossless_limit() {
        for model in [AbsorptionModel::Sabine, AbsorptionModel::Eyring] {
            let a = absorption_from_t60(&room_534(1e9), model).unwrap();
            assert!(a.alpha < 1e-8 && (a.beta - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn image_decay_tracks_target() {
        let mut last = 0.0;
        for t60 in [0.6, 0.4, 0.2] {
            let a = absorption_from_t60(&room_534(t60), AbsorptionModel::ImageDecay).unwrap();
            assert!(a.alpha > last && a.alpha < 1.0);
            last = a.alpha;
        }
        // a flat room decays slower than Eyring predicts late on, so it
        // needs more absorption for the same target
        let flat = RoomSpec::new([8.0, 7.0, 3.0], [4.3, 3.5, 1.5], [4.0, 3.5, 1.5], 0.4).unwrap();
        let image = absorption_from_t60(&flat, AbsorptionModel::ImageDecay).unwrap();
        let eyring = absorption_from_t60(&flat, AbsorptionModel::Eyring).unwrap();
        assert!(image.alpha > eyring.alpha);
    }

    #[test]
    fn unachievable_t60_errors() {
        let room = RoomSpec::new([4.0, 4.0, 3.0], [2.3, 2.0, 1.5], [2.0, 2.0, 1.5], 0.05).unwrap();
        assert!(matches!(
            absorption_from_t60(&room, AbsorptionModel::Sabine),
            Err(Error::UnachievableT60 { .. })
        ));
    }

    #[test]
    fn anechoic_single_tap() {
        let room = room_534(0.3);
        let h = image_response(&room, 0.0, RIR_LEN).unwrap();
        let nonzero: Vec<usize> = (0..h.len()).filter(|&i| h[i] != 0.0).collect();
        assert_eq!(nonzero, vec![14]);
        let expected = 1.0 / (4.0 * PI * room.ml_distance());
        assert!((h[14] - expected).abs() < 1e-12);
        assert!((h[14] - 0.26526).abs() < 1e-5);
    }

    #[test]
    fn coincident_source_is_degenerate() {
        let room = RoomSpec::new([5.0, 4.0, 3.0], [2.0, 2.0, 1.5], [2.0, 2.0, 1.5], 0.3).unwrap();
        assert!(matches!(
            image_method(&room, 100, AbsorptionModel::Eyring),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn prefix_stable_under_longer_output() {
        let room = room_534(0.4);
        let a = image_method(&room, 2000, AbsorptionModel::Eyring).unwrap();
        let b = image_method(&room, 4000, AbsorptionModel::Eyring).unwrap();
        assert_eq!(a.taps(), &b.taps()[..2000]);
    }

    #[test]
    fn energy_grows_with_reflection_coefficient() {
        let room = room_534(0.3);
        let mut last = 0.0;
        for beta in [0.0, 0.3, 0.6, 0.9] {
            let e = energy(&image_response(&room, beta, 4000).unwrap());
            assert!(e > last);
            last = e;
        }
    }

    #[test]
    fn sampled_rooms_respect_grid_and_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..2000 {
            let r = sample_room(Split::Train, &mut rng).unwrap();
            assert!((4.0..=8.0).contains(&r.dims[0]));
            assert!((4.0..=7.0).contains(&r.dims[1]));
            assert!((3.0..=5.0).contains(&r.dims[2]));
            assert!(r.dims.iter().all(|d| d.fract() == 0.0));
            assert!(T60_CHOICES.contains(&r.t60));
            assert!((r.ml_distance() - 0.3).abs() < 1e-12);
        }
        for _ in 0..500 {
            let r = sample_room(Split::Mismatch, &mut rng).unwrap();
            let d = r.ml_distance();
            assert!([0.4, 0.5, 0.8].iter().any(|m| (d - m).abs() < 1e-12), "{d}");
        }
        assert!(sample_room(Split::Real, &mut rng).is_err());
    }

    #[test]
    fn noisy_rir_hits_snr_and_is_deterministic() {
        let room = room_534(0.3);
        let clean = image_method(&room, RIR_LEN, AbsorptionModel::Eyring).unwrap();
        let mut nrng = ChaCha8Rng::seed_from_u64(3);
        let noise =
            Waveform::new((0..12_000).map(|_| nrng.gen_range(-1.0..1.0)).collect()).unwrap();
        let a = make_noisy_rir(&clean, 10.0, &mut ChaCha8Rng::seed_from_u64(1), &noise).unwrap();
        let b = make_noisy_rir(&clean, 10.0, &mut ChaCha8Rng::seed_from_u64(1), &noise).unwrap();
        assert_eq!(a, b);
        let diff: Vec<f64> = a
            .taps()
            .iter()
            .zip(clean.taps())
            .map(|(x, y)| x - y)
            .collect();
        let measured = 10.0 * (energy(clean.taps()) / energy(&diff)).log10();
        assert!((measured - 10.0).abs() < 1e-9, "{measured}");
        assert_eq!(a.kind, RirKind::Noisy);
        assert!(make_noisy_rir(&a, 10.0, &mut nrng, &noise).is_err());
        assert!(make_noisy_rir(&clean, 10.0, &mut nrng, &Waveform::zeros(9000)).is_err());
    }

    #[test]
    fn import_normalizes_and_rejects_silence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.wav");
        let h = Waveform::new(vec![0.0, 0.25, -0.5, 0.125]).unwrap();
        write_wav(&path, &h).unwrap();
        let rir = import_rir(&path, 16).unwrap();
        assert_eq!(rir.len(), 16);
        assert_eq!(rir.kind, RirKind::Imported);
        let expected = normalize_imported(h.samples(), 16).unwrap();
        assert_eq!(rir.h, expected);
        assert!((rir.h.peak() - 0.9).abs() < 1e-15);

        let silent = dir.path().join("z.wav");
        write_wav(&silent, &Waveform::zeros(32)).unwrap();
        let err = import_rir(&silent, 16).unwrap_err().to_string();
        assert!(err.contains("zero-energy RIR"), "{err}");
    }

    #[test]
    fn export_writes_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let rir = image_method(&room_534(0.2), 512, AbsorptionModel::Eyring).unwrap();
        export_rir(dir.path(), "r0", &rir, 42).unwrap();
        let meta: RirMetadata =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("r0.json")).unwrap())
                .unwrap();
        assert_eq!(meta.seed, 42);
        assert_eq!(meta.kind, RirKind::Clean);
        assert_eq!(meta.dims, Some([5.0, 4.0, 3.0]));
    }
}
