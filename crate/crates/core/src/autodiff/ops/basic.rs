//! Elementwise maps, reductions and shape manipulation.

use std::f64::consts::PI;

use crate::autodiff::tape::{Tape, Var};
use crate::autodiff::tensor::{split_axis, strides, Tensor};
use crate::error::{Error, Result};

const GELU_C: f64 = 0.044_715;

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            op,
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

fn check_axis(op: &'static str, shape: &[usize], axis: usize) -> Result<()> {
    if axis >= shape.len() {
        return Err(Error::shape(
            op,
            format!("axis {axis} out of range for {shape:?}"),
        ));
    }
    Ok(())
}

/// `gelu` with the tanh approximation.
pub fn gelu_scalar(x: f64) -> f64 {
    let k = (2.0 / PI).sqrt();
    0.5 * x * (1.0 + (k * (x + GELU_C * x * x * x)).tanh())
}

/// Derivative of [`gelu_scalar`] given the inner `tanh` value `t`.
fn gelu_grad(x: f64, t: f64) -> f64 {
    let k = (2.0 / PI).sqrt();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * GELU_C * x * x)
}

pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Permutes `data` laid out as `shape` so that output axis `i` is input
/// axis `perm[i]`.
pub(crate) fn permute_data(
    data: &[f64],
    shape: &[usize],
    perm: &[usize],
) -> (Vec<f64>, Vec<usize>) {
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let in_strides = strides(shape);
    let src_strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let n = data.len();
    let mut out = Vec::with_capacity(n);
    let nd = out_shape.len();
    if nd == 0 {
        return (data.to_vec(), out_shape);
    }
    let last = nd - 1;
    let mut idx = vec![0usize; nd];
    let mut base = 0usize;
    while out.len() < n {
        let s = src_strides[last];
        for k in 0..out_shape[last] {
            out.push(data[base + k * s]);
        }
        // advance the outer counters
        let mut ax = last;
        loop {
            if ax == 0 {
                break;
            }
            ax -= 1;
            idx[ax] += 1;
            base += src_strides[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            base -= src_strides[ax] * out_shape[ax];
            idx[ax] = 0;
        }
    }
    (out, out_shape)
}

fn gather_data(
    data: &[f64],
    shape: &[usize],
    axis: usize,
    indices: &[usize],
) -> (Vec<f64>, Vec<usize>) {
    let (outer, len, inner) = split_axis(shape, axis);
    let mut out = Vec::with_capacity(outer * indices.len() * inner);
    for o in 0..outer {
        let base = o * len * inner;
        for &j in indices {
            out.extend_from_slice(&data[base + j * inner..base + (j + 1) * inner]);
        }
    }
    let mut out_shape = shape.to_vec();
    out_shape[axis] = indices.len();
    (out, out_shape)
}

fn scatter_add(grad: &[f64], in_shape: &[usize], axis: usize, indices: &[usize]) -> Vec<f64> {
    let (outer, len, inner) = split_axis(in_shape, axis);
    let mut out = vec![0.0; outer * len * inner];
    let m = indices.len();
    for o in 0..outer {
        for (k, &j) in indices.iter().enumerate() {
            let src = &grad[(o * m + k) * inner..(o * m + k + 1) * inner];
            let dst = &mut out[(o * len + j) * inner..(o * len + j + 1) * inner];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }
    out
}

impl Tape {
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        same_shape("add", va, vb)?;
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| x + y)
            .collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        Ok(self.push(
            out,
            &[a, b],
            Box::new(|c| vec![Some(c.grad.clone()), Some(c.grad.clone())]),
        ))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        same_shape("sub", va, vb)?;
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| x - y)
            .collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        Ok(self.push(
            out,
            &[a, b],
            Box::new(|c| vec![Some(c.grad.clone()), Some(c.grad.map(|g| -g))]),
        ))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        same_shape("mul", va, vb)?;
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| x * y)
            .collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        Ok(self.push(
            out,
            &[a, b],
            Box::new(|c| {
                let prod = |t: &Tensor| {
                    let d = c
                        .grad
                        .data()
                        .iter()
                        .zip(t.data())
                        .map(|(g, v)| g * v)
                        .collect();
                    Tensor::new(t.shape().to_vec(), d).expect("same shape")
                };
                vec![
                    c.needs[0].then(|| prod(c.inputs[1])),
                    c.needs[1].then(|| prod(c.inputs[0])),
                ]
            }),
        ))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let out = self.value(a).map(|v| v * k);
        self.push(
            out,
            &[a],
            Box::new(move |c| vec![Some(c.grad.map(|g| g * k))]),
        )
    }

    fn unary(&mut self, a: Var, f: fn(f64) -> f64, df: fn(f64, f64) -> f64) -> Var {
        let out = self.value(a).map(f);
        self.push(
            out,
            &[a],
            Box::new(move |c| {
                let d = c
                    .grad
                    .data()
                    .iter()
                    .zip(c.inputs[0].data())
                    .zip(c.output.data())
                    .map(|((g, x), y)| g * df(*x, *y))
                    .collect();
                vec![Some(
                    Tensor::new(c.grad.shape().to_vec(), d).expect("same shape"),
                )]
            }),
        )
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let k = (2.0 / PI).sqrt();
        let v = self.value(a);
        let inner: Vec<f64> = v
            .data()
            .iter()
            .map(|&x| (k * (x + GELU_C * x * x * x)).tanh())
            .collect();
        let out = v
            .data()
            .iter()
            .zip(&inner)
            .map(|(x, t)| 0.5 * x * (1.0 + t))
            .collect();
        let out = Tensor::new(v.shape().to_vec(), out).expect("same shape");
        self.push(
            out,
            &[a],
            Box::new(move |c| {
                let d = c
                    .grad
                    .data()
                    .iter()
                    .zip(c.inputs[0].data())
                    .zip(&inner)
                    .map(|((g, &x), &t)| g * gelu_grad(x, t))
                    .collect();
                vec![Some(
                    Tensor::new(c.grad.shape().to_vec(), d).expect("same shape"),
                )]
            }),
        )
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid_scalar, |_, y| y * (1.0 - y))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, |_, y| 1.0 - y * y)
    }

    /// Sum of all elements as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let shape = v.shape().to_vec();
        let out = Tensor::scalar(v.data().iter().sum());
        self.push(
            out,
            &[a],
            Box::new(move |c| vec![Some(Tensor::full(shape.clone(), c.grad.data()[0]))]),
        )
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Sum of squared elements as a scalar.
    pub fn sum_squares(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).norm_sq());
        self.push(
            out,
            &[a],
            Box::new(|c| {
                let g = 2.0 * c.grad.data()[0];
                vec![Some(c.inputs[0].map(|v| g * v))]
            }),
        )
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let v = self.value(a);
        let in_shape = v.shape().to_vec();
        let out = v.clone().reshaped(shape.to_vec())?;
        Ok(self.push(
            out,
            &[a],
            Box::new(move |c| {
                vec![Some(
                    c.grad
                        .clone()
                        .reshaped(in_shape.clone())
                        .expect("same size"),
                )]
            }),
        ))
    }

    /// Output axis `i` is input axis `perm[i]`.
    pub fn permute(&mut self, a: Var, perm: &[usize]) -> Result<Var> {
        let v = self.value(a);
        let mut seen = vec![false; v.ndim()];
        if perm.len() != v.ndim()
            || perm
                .iter()
                .any(|&p| p >= v.ndim() || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::shape(
                "permute",
                format!("{perm:?} for {:?}", v.shape()),
            ));
        }
        let (data, out_shape) = permute_data(v.data(), v.shape(), perm);
        let mut inverse = vec![0; perm.len()];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i;
        }
        let out = Tensor::new(out_shape, data)?;
        Ok(self.push(
            out,
            &[a],
            Box::new(move |c| {
                let (d, s) = permute_data(c.grad.data(), c.grad.shape(), &inverse);
                vec![Some(Tensor::new(s, d).expect("permutation keeps size"))]
            }),
        ))
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::shape("concat", "no inputs"));
        }
        let first = self.shape(parts[0]).to_vec();
        check_axis("concat", &first, axis)?;
        let mut sizes = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.shape(p);
            let compatible = s.len() == first.len()
                && s.iter()
                    .zip(&first)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(Error::shape(
                    "concat",
                    format!("{:?} vs {first:?} on axis {axis}", s),
                ));
            }
            sizes.push(s[axis]);
        }
        let total: usize = sizes.iter().sum();
        let (outer, _, inner) = split_axis(&first, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (&p, &len) in parts.iter().zip(&sizes) {
                let d = self.value(p).data();
                data.extend_from_slice(&d[o * len * inner..(o + 1) * len * inner]);
            }
        }
        let mut out_shape = first.clone();
        out_shape[axis] = total;
        let out = Tensor::new(out_shape, data)?;
        Ok(self.push(
            out,
            parts,
            Box::new(move |c| {
                let g = c.grad.data();
                let mut offset = 0;
                sizes
                    .iter()
                    .zip(&c.needs)
                    .map(|(&len, &need)| {
                        let start = offset;
                        offset += len;
                        need.then(|| {
                            let mut d = Vec::with_capacity(outer * len * inner);
                            for o in 0..outer {
                                let base = (o * total + start) * inner;
                                d.extend_from_slice(&g[base..base + len * inner]);
                            }
                            let mut s = c.grad.shape().to_vec();
                            s[axis] = len;
                            Tensor::new(s, d).expect("partition sizes")
                        })
                    })
                    .collect()
            }),
        ))
    }

    /// Selects `indices` along `axis`; repeated indices are allowed.
    pub fn gather(&mut self, a: Var, axis: usize, indices: Vec<usize>) -> Result<Var> {
        let v = self.value(a);
        check_axis("gather", v.shape(), axis)?;
        if let Some(&bad) = indices.iter().find(|&&i| i >= v.shape()[axis]) {
            return Err(Error::shape(
                "gather",
                format!(
                    "index {bad} out of range for axis {axis} of {:?}",
                    v.shape()
                ),
            ));
        }
        let in_shape = v.shape().to_vec();
        let (data, out_shape) = gather_data(v.data(), &in_shape, axis, &indices);
        let out = Tensor::new(out_shape, data)?;
        Ok(self.push(
            out,
            &[a],
            Box::new(move |c| {
                let d = scatter_add(c.grad.data(), &in_shape, axis, &indices);
                vec![Some(Tensor::new(in_shape.clone(), d).expect("input shape"))]
            }),
        ))
    }

    /// Crop: `len` entries of `axis` starting at `start`.
    pub fn narrow(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(a);
        check_axis("narrow", shape, axis)?;
        if start + len > shape[axis] {
            return Err(Error::shape(
                "narrow",
                format!("{start}+{len} exceeds axis {axis} of {shape:?}"),
            ));
        }
        self.gather(a, axis, (start..start + len).collect())
    }

    /// Zero padding along `axis`.
    pub fn pad(&mut self, a: Var, axis: usize, before: usize, after: usize) -> Result<Var> {
        let v = self.value(a);
        check_axis("pad", v.shape(), axis)?;
        let in_shape = v.shape().to_vec();
        let (outer, len, inner) = split_axis(&in_shape, axis);
        let new_len = before + len + after;
        let mut data = vec![0.0; outer * new_len * inner];
        for o in 0..outer {
            let dst = (o * new_len + before) * inner;
            data[dst..dst + len * inner]
                .copy_from_slice(&v.data()[o * len * inner..(o + 1) * len * inner]);
        }
        let mut out_shape = in_shape.clone();
        out_shape[axis] = new_len;
        let out = Tensor::new(out_shape, data)?;
        Ok(self.push(
            out,
            &[a],
            Box::new(move |c| {
                let (d, s) = gather_data(
                    c.grad.data(),
                    c.grad.shape(),
                    axis,
                    &(before..before + len).collect::<Vec<_>>(),
                );
                vec![Some(Tensor::new(s, d).expect("input shape"))]
            }),
        ))
    }

    /// Tiles `axis` `times` times.
    pub fn repeat(&mut self, a: Var, axis: usize, times: usize) -> Result<Var> {
        let shape = self.shape(a);
        check_axis("repeat", shape, axis)?;
        if times == 0 {
            return Err(Error::shape("repeat", "zero repetitions"));
        }
        let len = shape[axis];
        self.gather(a, axis, (0..times).flat_map(|_| 0..len).collect())
    }

    /// Mean along `axis`, keeping it with length 1.
    pub fn mean_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let v = self.value(a);
        check_axis("mean", v.shape(), axis)?;
        let in_shape = v.shape().to_vec();
        let (outer, len, inner) = split_axis(&in_shape, axis);
        if len == 0 {
            return Err(Error::shape("mean", "empty axis"));
        }
        let mut data = vec![0.0; outer * inner];
        for o in 0..outer {
            for j in 0..len {
                let src = &v.data()[(o * len + j) * inner..(o * len + j + 1) * inner];
                for (d, s) in data[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        let inv = 1.0 / len as f64;
        data.iter_mut().for_each(|d| *d *= inv);
        let mut out_shape = in_shape.clone();
        out_shape[axis] = 1;
        let out = Tensor::new(out_shape, data)?;
        Ok(self.push(
            out,
            &[a],
            Box::new(move |c| {
                let d = gather_data(c.grad.data(), c.grad.shape(), axis, &vec![0; len]).0;
                vec![Some(
                    Tensor::new(in_shape.clone(), d)
                        .expect("input shape")
                        .map(|g| g * inv),
                )]
            }),
        ))
    }
}
