#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn white(n: usize, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

pub fn rel_l2(reference: &[f64], estimate: &[f64]) -> f64 {
    let err: f64 = reference
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    let e: f64 = reference.iter().map(|v| v * v).sum();
    (err / e).sqrt()
}

/// First-order high-pass at `cutoff` Hz.
fn high_pass(h: &[f64], fs: f64, cutoff: f64) -> Vec<f64> {
    let rc = 1.0 / (2.0 * std::f64::consts::PI * cutoff);
    let a = rc / (rc + 1.0 / fs);
    let mut out = Vec::with_capacity(h.len());
    let (mut prev_in, mut prev_out) = (0.0, 0.0);
    for &x in h {
        let y = a * (prev_out + x - prev_in);
        out.push(y);
        prev_in = x;
        prev_out = y;
    }
    out
}

/// Reverberation time from Schroeder backward integration: a least-squares
/// line through the decay curve between -5 and -25 dB, extrapolated to
/// -60 dB. The response is high-passed at 100 Hz first, since the
/// nearest-sample image taps carry a slowly decaying DC component.
pub fn schroeder_t60(h: &[f64], fs: f64) -> Option<f64> {
    let h = high_pass(h, fs, 100.0);
    let mut edc = vec![0.0; h.len()];
    let mut acc = 0.0;
    for i in (0..h.len()).rev() {
        acc += h[i] * h[i];
        edc[i] = acc;
    }
    if edc[0] <= 0.0 {
        return None;
    }
    let db: Vec<f64> = edc.iter().map(|e| 10.0 * (e / edc[0]).log10()).collect();
    let start = db.iter().position(|&d| d <= -5.0)?;
    let end = db.iter().position(|&d| d <= -25.0)?;
    if end <= start + 1 {
        return None;
    }
    let pts: Vec<(f64, f64)> = (start..=end).map(|i| (i as f64 / fs, db[i])).collect();
    let n = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope < 0.0).then(|| -60.0 / slope)
}
