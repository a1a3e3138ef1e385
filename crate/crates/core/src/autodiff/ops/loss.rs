use crate::autodiff::tape::{Tape, Var};
use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};

/// Clamp margin on the cosine of the angle between reference and estimate.
pub const COS_CLAMP: f64 = 1e-7;

const DB: f64 = 10.0 / std::f64::consts::LN_10;

/// Cosine of the angle between two signals; errors on zero energy.
pub fn cosine(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::shape(
            "cosine",
            format!("{} vs {} samples", reference.len(), estimate.len()),
        ));
    }
    let es: f64 = reference.iter().map(|v| v * v).sum();
    let ee: f64 = estimate.iter().map(|v| v * v).sum();
    if es <= 0.0 {
        return Err(Error::ZeroEnergy("reference"));
    }
    if ee <= 0.0 {
        return Err(Error::ZeroEnergy("estimate"));
    }
    let dot: f64 = reference.iter().zip(estimate).map(|(a, b)| a * b).sum();
    Ok(dot / (es.sqrt() * ee.sqrt()))
}

/// Half-angle SI-SNR `10·log10((1 + cos β) / (1 − cos β))` in dB with the
/// cosine clamped away from ±1.
pub fn s_sisnr_db(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    let c = cosine(reference, estimate)?.clamp(-1.0 + COS_CLAMP, 1.0 - COS_CLAMP);
    Ok(DB * ((1.0 + c) / (1.0 - c)).ln())
}

impl Tape {
    /// Differentiable [`s_sisnr_db`] of a 1-D estimate against a fixed
    /// reference. Returns a scalar in dB.
    pub fn s_sisnr(&mut self, estimate: Var, reference: &[f64]) -> Result<Var> {
        let est = self.value(estimate);
        if est.ndim() != 1 {
            return Err(Error::shape(
                "s_sisnr",
                format!("expected 1-D, got {:?}", est.shape()),
            ));
        }
        let raw = cosine(reference, est.data())?;
        let c = raw.clamp(-1.0 + COS_CLAMP, 1.0 - COS_CLAMP);
        let clamped = c != raw;
        let out = Tensor::scalar(DB * ((1.0 + c) / (1.0 - c)).ln());
        let reference = reference.to_vec();
        Ok(self.push(
            out,
            &[estimate],
            Box::new(move |ctx| {
                let e = ctx.inputs[0].data();
                if clamped {
                    return vec![Some(Tensor::zeros(vec![e.len()]))];
                }
                let g = ctx.grad.data()[0] * DB * 2.0 / (1.0 - c * c);
                let ns = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
                let ee: f64 = e.iter().map(|v| v * v).sum();
                let ne = ee.sqrt();
                let d = reference
                    .iter()
                    .zip(e)
                    .map(|(s, x)| g * (s / (ns * ne) - c * x / ee))
                    .collect();
                vec![Some(Tensor::from_vec(d))]
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_values() {
        assert!(s_sisnr_db(&[1.0, 0.0], &[0.0, 1.0]).unwrap().abs() < 1e-12);
        let v = s_sisnr_db(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((v - 7.6561).abs() < 1e-3, "{v}");
        let anti = s_sisnr_db(&[1.0, 2.0], &[-1.0, -2.0]).unwrap();
        assert!(anti.is_finite() && anti < -70.0 && anti > -76.0, "{anti}");
        assert!(s_sisnr_db(&[0.0, 0.0], &[1.0, 1.0]).is_err());
    }
}
