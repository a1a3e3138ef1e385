use crate::error::{Error, Result};
use crate::signal::{energy, stft_frames, StftConfig};
use crate::synth::Scenario;

/// Cap on SI-SNR and SDR magnitudes, dB.
pub const RATIO_CAP_DB: f64 = 60.0;
/// Cap on ERLE, dB.
pub const ERLE_CAP_DB: f64 = 80.0;

fn check_pair(op: &'static str, a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::shape(
            op,
            format!("{} vs {} samples", a.len(), b.len()),
        ));
    }
    Ok(())
}

fn capped_ratio(num: f64, den: f64) -> f64 {
    if den <= 0.0 {
        return RATIO_CAP_DB;
    }
    if num <= 0.0 {
        return -RATIO_CAP_DB;
    }
    (10.0 * (num / den).log10()).clamp(-RATIO_CAP_DB, RATIO_CAP_DB)
}

/// Scale-invariant SNR of `estimate` against `reference`, capped at
/// ±60 dB.
pub fn sisnr(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    check_pair("sisnr", reference, estimate)?;
    let es = energy(reference);
    if es <= 0.0 {
        return Err(Error::ZeroEnergy("reference"));
    }
    if energy(estimate) <= 0.0 {
        return Err(Error::ZeroEnergy("estimate"));
    }
    let a = reference
        .iter()
        .zip(estimate)
        .map(|(s, e)| s * e)
        .sum::<f64>()
        / es;
    let target: f64 = a * a * es;
    let resid: f64 = reference
        .iter()
        .zip(estimate)
        .map(|(s, e)| (e - a * s).powi(2))
        .sum();
    Ok(capped_ratio(target, resid))
}

/// Signal-to-distortion ratio in its projection form, which coincides
/// with [`sisnr`]; no distortion filter is fitted.
pub fn sdr(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    sisnr(reference, estimate)
}

/// Echo return loss enhancement `10·log10(E(y) / E(ŝ))`, capped at 80 dB.
/// Only defined while the near end is silent.
pub fn erle(scenario: Scenario, y: &[f64], estimate: &[f64]) -> Result<f64> {
    if scenario != Scenario::FarEndSingleTalk {
        return Err(Error::ErleUndefined);
    }
    check_pair("erle", y, estimate)?;
    let ey = energy(y);
    if ey <= 0.0 {
        return Err(Error::ZeroEnergy("microphone signal"));
    }
    let ee = energy(estimate);
    if ee <= 0.0 {
        return Ok(ERLE_CAP_DB);
    }
    Ok((10.0 * (ey / ee).log10()).min(ERLE_CAP_DB))
}

/// Log-spectral distance in dB: per-frame RMS difference of log power
/// spectra, averaged over frames.
pub fn lsd(reference: &[f64], estimate: &[f64], cfg: &StftConfig) -> Result<f64> {
    check_pair("lsd", reference, estimate)?;
    const FLOOR: f64 = 1e-10;
    let (frames, a) = stft_frames(reference, cfg)?;
    let (_, b) = stft_frames(estimate, cfg)?;
    let bins = cfg.num_bins();
    let mut total = 0.0;
    for t in 0..frames {
        let mut acc = 0.0;
        for f in 0..bins {
            let k = t * bins + f;
            let d = 10.0 * ((a[k].norm_sqr() + FLOOR) / (b[k].norm_sqr() + FLOOR)).log10();
            acc += d * d;
        }
        total += (acc / bins as f64).sqrt();
    }
    Ok(total / frames as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::Scenario::{DoubleTalk, FarEndSingleTalk};

    fn tone(n: usize, w: f64) -> Vec<f64> {
        (0..n).map(|i| (i as f64 * w).sin()).collect()
    }

    #[test]
    fn caps_and_scale_invariance() {
        let s = tone(800, 0.05);
        let e: Vec<f64> = s.iter().map(|v| 2.5 * v).collect();
        assert_eq!(sisnr(&s, &e).unwrap(), RATIO_CAP_DB);
        assert_eq!(sisnr(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), -RATIO_CAP_DB);
        let noisy: Vec<f64> = s
            .iter()
            .zip(tone(800, 0.37))
            .map(|(a, b)| a + 0.3 * b)
            .collect();
        let scaled: Vec<f64> = noisy.iter().map(|v| 3.0 * v).collect();
        let (a, b) = (sisnr(&s, &noisy).unwrap(), sisnr(&s, &scaled).unwrap());
        assert!((a - b).abs() < 1e-9);
        assert!(sisnr(&[0.0; 4], &[1.0; 4]).is_err());
        assert!(sisnr(&[1.0; 4], &[0.0; 4]).is_err());
    }

    #[test]
    fn equal_parts_give_zero_db() {
        let s = [1.0, 0.0];
        assert!(sdr(&s, &[1.0, 1.0]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn erle_worked_values() {
        let y = tone(1000, 0.1);
        assert!(erle(FarEndSingleTalk, &y, &y).unwrap().abs() < 1e-12);
        let tenth: Vec<f64> = y.iter().map(|v| v / 10.0).collect();
        assert!((erle(FarEndSingleTalk, &y, &tenth).unwrap() - 20.0).abs() < 1e-9);
        assert_eq!(
            erle(FarEndSingleTalk, &y, &[0.0; 1000]).unwrap(),
            ERLE_CAP_DB
        );
        assert!(matches!(
            erle(DoubleTalk, &y, &y),
            Err(Error::ErleUndefined)
        ));
    }

    #[test]
    fn lsd_zero_on_identity() {
        let s = tone(3200, 0.2);
        let cfg = StftConfig::MODEL;
        assert_eq!(lsd(&s, &s, &cfg).unwrap(), 0.0);
        let half: Vec<f64> = s.iter().map(|v| v * 0.5).collect();
        // uniform 0.5 gain is about 6.02 dB everywhere above the floor
        assert!((lsd(&s, &half, &cfg).unwrap() - 6.0206).abs() < 0.05);
    }
}
