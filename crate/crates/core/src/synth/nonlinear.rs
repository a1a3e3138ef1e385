use crate::signal::Waveform;

/// Hard-clip threshold relative to the input peak.
pub const CLIP_RATIO: f64 = 0.8;

/// Loudspeaker nonlinearity: hard clipping, a memoryless quadratic curve
/// and an asymmetric sigmoid. The output is rescaled to the input peak.
pub fn apply_nonlinearity(x: &Waveform) -> Waveform {
    let peak = x.peak();
    if peak == 0.0 {
        return x.clone();
    }
    let x_max = CLIP_RATIO * peak;
    let mut out: Vec<f64> = x
        .samples()
        .iter()
        .map(|&v| sigmoid_stage(quadratic_stage(v.clamp(-x_max, x_max))))
        .collect();
    let out_peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if out_peak > 0.0 {
        let g = peak / out_peak;
        out.iter_mut().for_each(|v| *v *= g);
    }
    Waveform::new(out).expect("nonlinearity keeps samples finite")
}

fn quadratic_stage(x: f64) -> f64 {
    1.5 * x - 0.3 * x * x
}

fn sigmoid_stage(b: f64) -> f64 {
    let a = if b > 0.0 { 4.0 } else { 0.5 };
    4.0 * (2.0 / (1.0 + (-a * b).exp()) - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_maps_to_zero() {
        let y = apply_nonlinearity(&Waveform::zeros(64));
        assert!(y.samples().iter().all(|v| *v == 0.0));
        assert_eq!(sigmoid_stage(quadratic_stage(0.0)), 0.0);
    }

    #[test]
    fn samples_above_threshold_saturate_together() {
        let y = apply_nonlinearity(&Waveform::new(vec![1.0, 0.9, 0.8, 0.5, -1.0]).unwrap());
        let y = y.samples();
        assert_eq!(y[0], y[1]);
        assert_eq!(y[1], y[2]);
        assert!(y[3] < y[2]);
    }

    #[test]
    fn monotone_on_dense_grid() {
        let grid: Vec<f64> = (0..=20_000).map(|i| -1.0 + i as f64 / 10_000.0).collect();
        let y = apply_nonlinearity(&Waveform::new(grid).unwrap());
        for w in y.samples().windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!((y.peak() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_response() {
        // positive excursions saturate harder than negative ones
        assert!(sigmoid_stage(0.5) > -sigmoid_stage(-0.5));
    }
}
