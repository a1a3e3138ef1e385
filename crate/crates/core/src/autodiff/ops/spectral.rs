//! Spectral and complex-valued primitives. Complex tensors keep real and
//! imaginary parts as a size-2 channel axis in third-to-last position,
//! `[.., 2, F, T]`.

use crate::autodiff::tape::{Tape, Var};
use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};
use crate::signal::{
    convolve, correlate_for_kernel, istft_adjoint_frames, istft_frames, stft_adjoint_frames,
    stft_frames, Complex64, StftConfig,
};

/// Floor added to squared magnitudes before fractional powers.
pub const COMPRESS_EPS: f64 = 1e-12;

/// `(blocks, plane)` for a complex tensor laid out `[lead.., 2, F, T]`.
fn complex_layout(op: &'static str, shape: &[usize]) -> Result<(usize, usize)> {
    if shape.len() < 3 || shape[shape.len() - 3] != 2 {
        return Err(Error::shape(
            op,
            format!("expected [.., 2, F, T], got {shape:?}"),
        ));
    }
    let nd = shape.len();
    let lead = shape[..nd - 3].iter().product();
    Ok((lead, shape[nd - 2] * shape[nd - 1]))
}

/// Visits `(re_index, im_index)` pairs of a complex layout.
fn for_pairs(lead: usize, plane: usize, mut f: impl FnMut(usize, usize)) {
    for b in 0..lead {
        let base = b * 2 * plane;
        for i in 0..plane {
            f(base + i, base + plane + i);
        }
    }
}

/// Frame-major complex bins to a `[1, 2, F, T]` tensor.
pub fn bins_to_tensor(bins: &[Complex64], frames: usize, n_bins: usize) -> Tensor {
    let plane = frames * n_bins;
    let mut data = vec![0.0; 2 * plane];
    for t in 0..frames {
        for f in 0..n_bins {
            let v = bins[t * n_bins + f];
            data[f * frames + t] = v.re;
            data[plane + f * frames + t] = v.im;
        }
    }
    Tensor::new(vec![1, 2, n_bins, frames], data).expect("layout sizes")
}

fn tensor_to_bins(data: &[f64], frames: usize, n_bins: usize) -> Vec<Complex64> {
    let plane = frames * n_bins;
    let mut out = vec![Complex64::new(0.0, 0.0); plane];
    for f in 0..n_bins {
        for t in 0..frames {
            out[t * n_bins + f] =
                Complex64::new(data[f * frames + t], data[plane + f * frames + t]);
        }
    }
    out
}

fn pair_map(
    op: &'static str,
    x: &Tensor,
    mut f: impl FnMut(f64, f64) -> (f64, f64),
) -> Result<Tensor> {
    let (lead, plane) = complex_layout(op, x.shape())?;
    let mut out = vec![0.0; x.len()];
    let d = x.data();
    for_pairs(lead, plane, |r, i| {
        let (a, b) = f(d[r], d[i]);
        out[r] = a;
        out[i] = b;
    });
    Tensor::new(x.shape().to_vec(), out)
}

/// Gradient through a 2×2 Jacobian `[[jrr, jri], [jir, jii]]` per pair,
/// where `jab = d out_a / d in_b`.
fn pair_vjp(x: &Tensor, g: &Tensor, mut jac: impl FnMut(f64, f64) -> [f64; 4]) -> Tensor {
    let (lead, plane) = complex_layout("vjp", x.shape()).expect("checked in forward");
    let (d, gd) = (x.data(), g.data());
    let mut out = vec![0.0; x.len()];
    for_pairs(lead, plane, |r, i| {
        let [jrr, jri, jir, jii] = jac(d[r], d[i]);
        out[r] = gd[r] * jrr + gd[i] * jir;
        out[i] = gd[r] * jri + gd[i] * jii;
    });
    Tensor::new(x.shape().to_vec(), out).expect("same shape")
}

/// `tanh(r)/r` and `(d/dr (tanh(r)/r)) / r` for the bounded mask.
fn mask_gain(r: f64) -> (f64, f64) {
    if r < 1e-4 {
        let r2 = r * r;
        (1.0 - r2 / 3.0, -2.0 / 3.0 + 8.0 * r2 / 15.0)
    } else {
        let t = r.tanh();
        let sech2 = 1.0 - t * t;
        (t / r, (r * sech2 - t) / (r * r * r))
    }
}

impl Tape {
    /// STFT of a 1-D signal into `[1, 2, F, T]`.
    pub fn stft(&mut self, signal: Var, cfg: StftConfig) -> Result<Var> {
        let v = self.value(signal);
        if v.ndim() != 1 {
            return Err(Error::shape(
                "stft",
                format!("expected a 1-D signal, got {:?}", v.shape()),
            ));
        }
        let n = v.len();
        let (frames, bins) = stft_frames(v.data(), &cfg)?;
        let n_bins = cfg.num_bins();
        let out = bins_to_tensor(&bins, frames, n_bins);
        Ok(self.push(
            out,
            &[signal],
            Box::new(move |c| {
                let g = tensor_to_bins(c.grad.data(), frames, n_bins);
                vec![Some(Tensor::from_vec(stft_adjoint_frames(
                    &g, frames, n, &cfg,
                )))]
            }),
        ))
    }

    /// Least-squares inverse STFT of a `[.., 2, F, T]` tensor with a single
    /// leading block.
    pub fn istft(&mut self, spec: Var, cfg: StftConfig) -> Result<Var> {
        let v = self.value(spec);
        let (lead, _) = complex_layout("istft", v.shape())?;
        let nd = v.ndim();
        let (n_bins, frames) = (v.shape()[nd - 2], v.shape()[nd - 1]);
        if lead != 1 || n_bins != cfg.num_bins() {
            return Err(Error::shape(
                "istft",
                format!("{:?} with {} bins per frame", v.shape(), cfg.num_bins()),
            ));
        }
        let bins = tensor_to_bins(v.data(), frames, n_bins);
        let out = Tensor::from_vec(istft_frames(&bins, frames, &cfg)?);
        let in_shape = v.shape().to_vec();
        Ok(self.push(
            out,
            &[spec],
            Box::new(move |c| {
                let g = istft_adjoint_frames(c.grad.data(), frames, &cfg)
                    .expect("validated in forward");
                let t = bins_to_tensor(&g, frames, n_bins);
                vec![Some(t.reshaped(in_shape.clone()).expect("same size"))]
            }),
        ))
    }

    /// Full linear convolution of two 1-D tensors.
    pub fn convolve(&mut self, x: Var, h: Var) -> Result<Var> {
        let (xv, hv) = (self.value(x), self.value(h));
        if xv.ndim() != 1 || hv.ndim() != 1 {
            return Err(Error::shape(
                "convolve",
                format!(
                    "expected 1-D inputs, got {:?} and {:?}",
                    xv.shape(),
                    hv.shape()
                ),
            ));
        }
        let out = Tensor::from_vec(convolve(xv.data(), hv.data())?);
        Ok(self.push(
            out,
            &[x, h],
            Box::new(|c| {
                let (xv, hv) = (c.inputs[0].data(), c.inputs[1].data());
                let g = c.grad.data();
                vec![
                    c.needs[0].then(|| {
                        Tensor::from_vec(correlate_for_kernel(hv, g, xv.len()).expect("non-empty"))
                    }),
                    c.needs[1].then(|| {
                        Tensor::from_vec(correlate_for_kernel(xv, g, hv.len()).expect("non-empty"))
                    }),
                ]
            }),
        ))
    }

    /// Power-law magnitude compression with phase kept:
    /// `z · (|z|² + eps)^((p-1)/2)`.
    pub fn compress(&mut self, z: Var, p: f64) -> Result<Var> {
        let out = pair_map("compress", self.value(z), |re, im| {
            let s = (re * re + im * im + COMPRESS_EPS).powf((p - 1.0) / 2.0);
            (re * s, im * s)
        })?;
        Ok(self.push(
            out,
            &[z],
            Box::new(move |c| {
                vec![Some(pair_vjp(c.inputs[0], c.grad, |re, im| {
                    let m2 = re * re + im * im + COMPRESS_EPS;
                    let s = m2.powf((p - 1.0) / 2.0);
                    let q = (p - 1.0) * s / m2;
                    [s + re * re * q, re * im * q, re * im * q, s + im * im * q]
                }))]
            }),
        ))
    }

    /// Compressed magnitude `(|z|² + eps)^(p/2)`; the channel axis shrinks
    /// from 2 to 1.
    pub fn magnitude_pow(&mut self, z: Var, p: f64) -> Result<Var> {
        let v = self.value(z);
        let (lead, plane) = complex_layout("magnitude", v.shape())?;
        let d = v.data();
        let mut out = Vec::with_capacity(lead * plane);
        for_pairs(lead, plane, |r, i| {
            out.push((d[r] * d[r] + d[i] * d[i] + COMPRESS_EPS).powf(p / 2.0));
        });
        let mut shape = v.shape().to_vec();
        let nd = shape.len();
        shape[nd - 3] = 1;
        let out = Tensor::new(shape, out)?;
        Ok(self.push(
            out,
            &[z],
            Box::new(move |c| {
                let x = c.inputs[0].data();
                let (g, m) = (c.grad.data(), c.output.data());
                let mut dx = vec![0.0; x.len()];
                let mut k = 0;
                for_pairs(lead, plane, |r, i| {
                    let m2 = x[r] * x[r] + x[i] * x[i] + COMPRESS_EPS;
                    let s = g[k] * p * m[k] / m2;
                    dx[r] = s * x[r];
                    dx[i] = s * x[i];
                    k += 1;
                });
                vec![Some(
                    Tensor::new(c.inputs[0].shape().to_vec(), dx).expect("same shape"),
                )]
            }),
        ))
    }

    /// Rescales each complex value so its magnitude becomes `tanh(|m|)`.
    pub fn bounded_mask(&mut self, m: Var) -> Result<Var> {
        let out = pair_map("bounded_mask", self.value(m), |re, im| {
            let (f, _) = mask_gain((re * re + im * im).sqrt());
            (re * f, im * f)
        })?;
        Ok(self.push(
            out,
            &[m],
            Box::new(|c| {
                vec![Some(pair_vjp(c.inputs[0], c.grad, |re, im| {
                    let (f, u) = mask_gain((re * re + im * im).sqrt());
                    [f + re * re * u, re * im * u, re * im * u, f + im * im * u]
                }))]
            }),
        ))
    }

    /// Pointwise complex product.
    pub fn complex_mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::shape(
                "complex_mul",
                format!("{:?} vs {:?}", va.shape(), vb.shape()),
            ));
        }
        let (lead, plane) = complex_layout("complex_mul", va.shape())?;
        let (x, y) = (va.data(), vb.data());
        let mut out = vec![0.0; x.len()];
        for_pairs(lead, plane, |r, i| {
            out[r] = x[r] * y[r] - x[i] * y[i];
            out[i] = x[r] * y[i] + x[i] * y[r];
        });
        let out = Tensor::new(va.shape().to_vec(), out)?;
        Ok(self.push(
            out,
            &[a, b],
            Box::new(move |c| {
                let g = c.grad.data();
                // d(a·b)/da contracted with g is g·conj(b)
                let conj_mul = |other: &Tensor| {
                    let o = other.data();
                    let mut d = vec![0.0; o.len()];
                    for_pairs(lead, plane, |r, i| {
                        d[r] = g[r] * o[r] + g[i] * o[i];
                        d[i] = -g[r] * o[i] + g[i] * o[r];
                    });
                    Tensor::new(other.shape().to_vec(), d).expect("same shape")
                };
                vec![
                    c.needs[0].then(|| conj_mul(c.inputs[1])),
                    c.needs[1].then(|| conj_mul(c.inputs[0])),
                ]
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_round_trip() {
        let bins: Vec<Complex64> = (0..12)
            .map(|k| Complex64::new(k as f64, -(k as f64)))
            .collect();
        let t = bins_to_tensor(&bins, 4, 3);
        assert_eq!(t.shape(), &[1, 2, 3, 4]);
        assert_eq!(tensor_to_bins(t.data(), 4, 3), bins);
    }

    #[test]
    fn bounded_mask_keeps_phase_and_bounds_magnitude() {
        let mut t = Tape::new();
        let m =
            t.constant(Tensor::new([1, 2, 1, 3], vec![3.0, 0.0, 1e-9, 4.0, 0.0, -1e-9]).unwrap());
        let y = t.bounded_mask(m).unwrap();
        let d = t.value(y).data().to_vec();
        let mag0 = (d[0] * d[0] + d[3] * d[3]).sqrt();
        assert!((mag0 - 5f64.tanh()).abs() < 1e-12);
        assert!((d[3] / d[0] - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(d[1], 0.0);
        assert!((d[2] - 1e-9).abs() < 1e-20);
    }

    #[test]
    fn complex_mul_matches_num_complex() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::new([2, 1, 1], vec![1.5, -0.5]).unwrap());
        let b = t.constant(Tensor::new([2, 1, 1], vec![0.25, 2.0]).unwrap());
        let c = t.complex_mul(a, b).unwrap();
        let z = Complex64::new(1.5, -0.5) * Complex64::new(0.25, 2.0);
        assert_eq!(t.value(c).data(), &[z.re, z.im]);
    }

    #[test]
    fn compressed_magnitude_agrees() {
        let mut t = Tape::new();
        let z = t.constant(Tensor::new([2, 1, 2], vec![3.0, 0.0, 4.0, 2.0]).unwrap());
        let c = t.compress(z, 0.5).unwrap();
        let m = t.magnitude_pow(z, 0.5).unwrap();
        let cd = t.value(c).data().to_vec();
        let md = t.value(m).data().to_vec();
        assert!((md[0] - 5f64.sqrt()).abs() < 1e-9);
        assert!(((cd[0] * cd[0] + cd[2] * cd[2]).sqrt() - 5f64.sqrt()).abs() < 1e-9);
        assert!((md[1] - 2f64.sqrt()).abs() < 1e-9);
    }
}
