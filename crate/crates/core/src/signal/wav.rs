use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{Waveform, SAMPLE_RATE};
use crate::error::{Error, Result};

/// Reads a mono 16-bit PCM file at the pipeline rate.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let format_err = |reason: String| Error::WavFormat {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(format_err(format!(
            "expected mono, found {} channels",
            spec.channels
        )));
    }
    if spec.sample_rate != SAMPLE_RATE {
        return Err(format_err(format!(
            "expected sample rate {SAMPLE_RATE} Hz, found {} Hz",
            spec.sample_rate
        )));
    }
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(format_err(format!(
            "expected 16-bit integer PCM, found {}-bit {:?}",
            spec.bits_per_sample, spec.sample_format
        )));
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(wav_err)?;
    Waveform::new(samples)
}

pub fn write_wav(path: impl AsRef<Path>, w: &Waveform) -> Result<()> {
    let path = path.as_ref();
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let spec = WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).map_err(wav_err)?;
    for v in w.samples() {
        writer.write_sample(to_i16(*v)).map_err(wav_err)?;
    }
    writer.finalize().map_err(wav_err)
}

pub(crate) fn to_i16(v: f64) -> i16 {
    (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Snaps a sample to the 16-bit grid so the in-memory value equals what a
/// WAV round trip produces.
pub fn quantize(v: f64) -> f64 {
    to_i16(v) as f64 / 32768.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_within_one_lsb() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = Waveform::new((0..4000).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        write_wav(&path, &w).unwrap();
        let r = read_wav(&path).unwrap();
        assert_eq!(r.len(), w.len());
        let max = r
            .samples()
            .iter()
            .zip(w.samples())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(max <= 1.0 / 32768.0);
    }

    #[test]
    fn quantized_values_survive_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.wav");
        let w = Waveform::new(
            [0.1, -0.5, 0.77, -1.0]
                .iter()
                .map(|v| quantize(*v))
                .collect(),
        )
        .unwrap();
        write_wav(&path, &w).unwrap();
        assert_eq!(read_wav(&path).unwrap(), w);
    }

    fn write_raw(path: &Path, channels: u16, rate: u32, bits: u16) {
        let spec = WavSpec {
            channels,
            sample_rate: rate,
            bits_per_sample: bits,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(path, spec).unwrap();
        for _ in 0..(16 * channels) {
            if bits == 16 {
                w.write_sample(0i16).unwrap();
            } else {
                w.write_sample(0i32).unwrap();
            }
        }
        w.finalize().unwrap();
    }

    #[test]
    fn stereo_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.wav");
        write_raw(&path, 2, 16_000, 16);
        let err = read_wav(&path).unwrap_err().to_string();
        assert!(err.contains("mono"), "{err}");
    }

    #[test]
    fn wrong_rate_names_expected_rate() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.wav");
        write_raw(&path, 1, 8_000, 16);
        let err = read_wav(&path).unwrap_err().to_string();
        assert!(err.contains("16000"), "{err}");
    }

    #[test]
    fn wrong_depth_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.wav");
        write_raw(&path, 1, 16_000, 24);
        assert!(read_wav(&path).is_err());
    }
}
