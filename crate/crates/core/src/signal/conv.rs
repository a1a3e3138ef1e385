use super::fft::plans;
use super::Complex64;
use crate::error::{Error, Result};

/// Below this many multiply-adds the direct path is used.
const DIRECT_LIMIT: usize = 1 << 14;

/// Full linear convolution, length `x.len() + h.len() - 1`.
pub fn convolve(x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    check(x, h)?;
    if x.len().min(h.len()) <= 32 || x.len() * h.len() <= DIRECT_LIMIT {
        Ok(direct(x, h))
    } else {
        Ok(fft(x, h))
    }
}

pub fn convolve_direct(x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    check(x, h)?;
    Ok(direct(x, h))
}

pub fn convolve_fft(x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    check(x, h)?;
    Ok(fft(x, h))
}

/// Gradient of `convolve(x, h)[..out_len]` with respect to `h`, given the
/// output gradient `grad` (length `out_len`): `dh[j] = sum_n grad[n] x[n - j]`.
pub fn correlate_for_kernel(x: &[f64], grad: &[f64], kernel_len: usize) -> Result<Vec<f64>> {
    check(x, grad)?;
    let rev: Vec<f64> = x.iter().rev().copied().collect();
    let full = convolve(&rev, grad)?;
    let offset = x.len() - 1;
    Ok((0..kernel_len)
        .map(|j| full.get(j + offset).copied().unwrap_or(0.0))
        .collect())
}

fn check(x: &[f64], h: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::Empty("convolution input"));
    }
    if h.is_empty() {
        return Err(Error::Empty("convolution kernel"));
    }
    Ok(())
}

fn direct(x: &[f64], h: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len() + h.len() - 1];
    for (i, xi) in x.iter().enumerate() {
        if *xi == 0.0 {
            continue;
        }
        for (o, hj) in out[i..i + h.len()].iter_mut().zip(h) {
            *o += xi * hj;
        }
    }
    out
}

fn fft(x: &[f64], h: &[f64]) -> Vec<f64> {
    let out_len = x.len() + h.len() - 1;
    let n = out_len.next_power_of_two();
    let plan = plans(n);
    let mut scratch = plan.forward.make_scratch_vec();
    let mut spectrum = |sig: &[f64]| -> Vec<Complex64> {
        let mut buf = vec![0.0; n];
        buf[..sig.len()].copy_from_slice(sig);
        let mut out = plan.forward.make_output_vec();
        plan.forward
            .process_with_scratch(&mut buf, &mut out, &mut scratch)
            .expect("fft buffer sizes");
        out
    };
    let fx = spectrum(x);
    let fh = spectrum(h);
    let mut prod: Vec<Complex64> = fx.iter().zip(&fh).map(|(a, b)| a * b).collect();
    prod[0].im = 0.0;
    let last = prod.len() - 1;
    prod[last].im = 0.0;
    let mut time = plan.inverse.make_output_vec();
    let mut scratch = plan.inverse.make_scratch_vec();
    plan.inverse
        .process_with_scratch(&mut prod, &mut time, &mut scratch)
        .expect("fft buffer sizes");
    let scale = 1.0 / n as f64;
    time.truncate(out_len);
    time.iter_mut().for_each(|v| *v *= scale);
    time
}
