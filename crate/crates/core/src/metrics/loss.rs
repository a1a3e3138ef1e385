use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::fusion::spectrum_tensor;
use crate::signal::{energy, StftConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    /// Spectral compression exponent.
    pub p: f64,
    /// Weight of the half-angle SI-SNR term, which enters negated.
    pub ssisnr_scale: f64,
    pub stft: StftConfig,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            p: 0.5,
            ssisnr_scale: 0.1,
            stft: StftConfig::LOSS,
        }
    }
}

impl LossConfig {
    /// Unweighted sum of the three terms.
    pub fn strict() -> Self {
        LossConfig {
            ssisnr_scale: 1.0,
            ..Default::default()
        }
    }
}

/// Loss values of one clip. `l_total` is computed as the sum of the other
/// three fields.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub l_ri: f64,
    pub l_mag: f64,
    pub l_ssisnr: f64,
    pub l_total: f64,
}

impl LossReport {
    pub fn new(l_ri: f64, l_mag: f64, l_ssisnr: f64) -> Self {
        LossReport {
            l_ri,
            l_mag,
            l_ssisnr,
            l_total: l_ri + l_mag + l_ssisnr,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.l_ri, self.l_mag, self.l_ssisnr, self.l_total]
            .iter()
            .all(|v| v.is_finite())
    }
}

fn spectral_pair(tape: &Tape, s: Var, s_hat: Var, op: &'static str) -> Result<usize> {
    let (a, b) = (tape.shape(s), tape.shape(s_hat));
    if a != b || a.len() < 3 {
        return Err(Error::shape(op, format!("{a:?} vs {b:?}")));
    }
    let n = a.len();
    Ok(a[n - 2] * a[n - 1])
}

/// Mean over bins of the squared gap between compressed magnitudes.
pub fn mag_loss(tape: &mut Tape, s: Var, s_hat: Var, p: f64) -> Result<Var> {
    let bins = spectral_pair(tape, s, s_hat, "mag_loss")?;
    let a = tape.magnitude_pow(s, p)?;
    let b = tape.magnitude_pow(s_hat, p)?;
    let d = tape.sub(a, b)?;
    let sq = tape.sum_squares(d);
    Ok(tape.scale(sq, 1.0 / bins as f64))
}

/// Mean over bins of the squared complex distance between compressed
/// spectra, phase kept.
pub fn ri_loss(tape: &mut Tape, s: Var, s_hat: Var, p: f64) -> Result<Var> {
    let bins = spectral_pair(tape, s, s_hat, "ri_loss")?;
    let a = tape.compress(s, p)?;
    let b = tape.compress(s_hat, p)?;
    let d = tape.sub(a, b)?;
    let sq = tape.sum_squares(d);
    Ok(tape.scale(sq, 1.0 / bins as f64))
}

/// Loss terms recorded on a tape.
pub struct LossVars {
    pub ri: Var,
    pub mag: Var,
    /// `None` when the reference is silent and the term is dropped.
    pub ssisnr: Option<Var>,
    pub total: Var,
}

impl LossVars {
    pub fn report(&self, tape: &Tape) -> LossReport {
        let v = |x: Var| tape.value(x).data()[0];
        LossReport::new(v(self.ri), v(self.mag), self.ssisnr.map_or(0.0, v))
    }
}

/// Composite training loss of the estimate `s_hat [N]` against the clean
/// near-end signal `s`. Spectra use `cfg.stft` whatever the model's STFT.
/// With a silent reference the angle is undefined, so only the spectral
/// terms remain.
pub fn total_loss(tape: &mut Tape, s_hat: Var, s: &[f64], cfg: &LossConfig) -> Result<LossVars> {
    let est_spec = tape.stft(s_hat, cfg.stft)?;
    let ref_spec = tape.constant(spectrum_tensor(s, &cfg.stft)?);
    let ri = ri_loss(tape, ref_spec, est_spec, cfg.p)?;
    let mag = mag_loss(tape, ref_spec, est_spec, cfg.p)?;
    let spectral = tape.add(ri, mag)?;
    let (ssisnr, total) = if energy(s) > 0.0 {
        let db = tape.s_sisnr(s_hat, s)?;
        let term = tape.scale(db, -cfg.ssisnr_scale);
        (Some(term), tape.add(spectral, term)?)
    } else {
        (None, spectral)
    };
    Ok(LossVars {
        ri,
        mag,
        ssisnr,
        total,
    })
}

/// [`total_loss`] evaluated without gradients.
pub fn loss_report(s_hat: &[f64], s: &[f64], cfg: &LossConfig) -> Result<LossReport> {
    let mut tape = Tape::new();
    let v = tape.constant(crate::autodiff::Tensor::from_vec(s_hat.to_vec()));
    Ok(total_loss(&mut tape, v, s, cfg)?.report(&tape))
}
