//! Dense layers: affine map, causal 2-D convolution and a gated recurrent
//! unit over time.

use crate::autodiff::ops::basic::sigmoid_scalar;
use crate::autodiff::tape::{Tape, Var};
use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};

/// `C[m×n] = op(A)[m×k] · op(B)[k×n] + beta·C` on row-major buffers.
/// `at`/`bt` mean the stored buffer is the transpose of the operand.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    at: bool,
    b: &[f64],
    bt: bool,
    c: &mut [f64],
    beta: f64,
) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if at { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if bt { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the strides above describe in-bounds row-major layouts of the
    // asserted sizes, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn col_sums(g: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for r in 0..rows {
        for (o, v) in out.iter_mut().zip(&g[r * cols..(r + 1) * cols]) {
            *o += v;
        }
    }
    out
}

/// Strided view of a matrix inside a buffer.
#[derive(Clone, Copy)]
struct View {
    off: usize,
    rs: usize,
    cs: usize,
}

impl View {
    fn last(&self, rows: usize, cols: usize) -> usize {
        self.off + (rows - 1) * self.rs + (cols - 1) * self.cs
    }
}

/// `C[m×n] = A[m×k]·B[k×n] + beta·C` over arbitrary strided views.
#[allow(clippy::too_many_arguments)]
fn gemm_view(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    av: View,
    b: &[f64],
    bv: View,
    c: &mut [f64],
    cv: View,
    beta: f64,
) {
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    assert!(av.last(m, k) < a.len() && bv.last(k, n) < b.len() && cv.last(m, n) < c.len());
    // SAFETY: the assertion bounds every element the views address, and `c`
    // is a distinct mutable buffer.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr().add(av.off),
            av.rs as isize,
            av.cs as isize,
            b.as_ptr().add(bv.off),
            bv.rs as isize,
            bv.cs as isize,
            beta,
            c.as_mut_ptr().add(cv.off),
            cv.rs as isize,
            cv.cs as isize,
        );
    }
}

/// Geometry of a convolution over `[B, C, F, T]` tensors. Time is always
/// causal: `kt - 1` zero frames are padded on the left only.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2dSpec {
    pub stride_f: usize,
    pub pad_f: usize,
}

impl Conv2dSpec {
    pub fn out_freq(&self, f: usize, kf: usize) -> Option<usize> {
        let padded = f + 2 * self.pad_f;
        (padded >= kf).then(|| (padded - kf) / self.stride_f + 1)
    }
}

/// Geometry of one convolution. The input is rearranged into `stride`
/// phase planes, each zero-padded in frequency and causally in time, so
/// every kernel tap becomes one GEMM over a contiguous window. Output
/// columns run over padded rows of width `tp`; the columns past `t` are
/// scratch and get dropped.
struct ConvGeom {
    cin: usize,
    f: usize,
    t: usize,
    kf: usize,
    kt: usize,
    fo: usize,
    stride: usize,
    pad: usize,
}

impl ConvGeom {
    fn n(&self) -> usize {
        self.fo * self.t
    }

    fn tp(&self) -> usize {
        self.t + self.kt - 1
    }

    /// Rows per phase plane.
    fn rows(&self) -> usize {
        self.fo + (self.kf - 1) / self.stride + 1
    }

    fn plane_len(&self) -> usize {
        self.rows() * self.tp()
    }

    fn cols(&self) -> usize {
        self.fo * self.tp()
    }

    /// Plane buffer position of input row `fi`, if it lands in a plane.
    fn slot(&self, ci: usize, fi: usize) -> Option<usize> {
        let r = fi + self.pad;
        let (p, q) = (r % self.stride, r / self.stride);
        (q < self.rows()).then(|| ((p * self.cin + ci) * self.rows() + q) * self.tp() + self.kt - 1)
    }

    fn to_planes(&self, x: &[f64]) -> Vec<f64> {
        let mut planes = vec![0.0; self.stride * self.cin * self.plane_len()];
        for ci in 0..self.cin {
            for fi in 0..self.f {
                if let Some(o) = self.slot(ci, fi) {
                    planes[o..o + self.t]
                        .copy_from_slice(&x[(ci * self.f + fi) * self.t..][..self.t]);
                }
            }
        }
        planes
    }

    fn from_planes(&self, planes: &[f64], dx: &mut [f64]) {
        for ci in 0..self.cin {
            for fi in 0..self.f {
                if let Some(o) = self.slot(ci, fi) {
                    let dst = &mut dx[(ci * self.f + fi) * self.t..][..self.t];
                    for (d, s) in dst.iter_mut().zip(&planes[o..o + self.t]) {
                        *d += s;
                    }
                }
            }
        }
    }

    /// Views of tap `(a, b)`: the weight slice `[cout, cin]` and the input
    /// window `[cin, cols]` inside the planes.
    fn tap_views(&self, a: usize, b: usize) -> (View, View) {
        let taps = self.kf * self.kt;
        let w = View {
            off: a * self.kt + b,
            rs: self.cin * taps,
            cs: taps,
        };
        let p = a % self.stride;
        let x = View {
            off: (p * self.cin * self.rows() + a / self.stride) * self.tp() + b,
            rs: self.plane_len(),
            cs: 1,
        };
        (w, x)
    }

    fn forward(&self, cout: usize, x: &[f64], w: &[f64], bias: &[f64], out: &mut [f64]) {
        let (cols, tp, t) = (self.cols(), self.tp(), self.t);
        let planes = self.to_planes(x);
        let mut acc = vec![0.0; cout * cols];
        for (co, row) in acc.chunks_mut(cols).enumerate() {
            row.iter_mut().for_each(|v| *v = bias[co]);
        }
        let cv = View {
            off: 0,
            rs: cols,
            cs: 1,
        };
        for a in 0..self.kf {
            for b in 0..self.kt {
                let (wv, xv) = self.tap_views(a, b);
                gemm_view(cout, self.cin, cols, w, wv, &planes, xv, &mut acc, cv, 1.0);
            }
        }
        for co in 0..cout {
            for fo in 0..self.fo {
                out[(co * self.fo + fo) * t..][..t]
                    .copy_from_slice(&acc[co * cols + fo * tp..][..t]);
            }
        }
    }

    /// Accumulates weight and input gradients for one batch element.
    fn backward(
        &self,
        cout: usize,
        g: &[f64],
        x: &[f64],
        w: &[f64],
        dw: Option<&mut [f64]>,
        dx: Option<&mut [f64]>,
    ) {
        let (cols, tp, t) = (self.cols(), self.tp(), self.t);
        let mut gp = vec![0.0; cout * cols];
        for co in 0..cout {
            for fo in 0..self.fo {
                gp[co * cols + fo * tp..][..t].copy_from_slice(&g[(co * self.fo + fo) * t..][..t]);
            }
        }
        let gv = View {
            off: 0,
            rs: cols,
            cs: 1,
        };
        if let Some(dw) = dw {
            let planes = self.to_planes(x);
            for a in 0..self.kf {
                for b in 0..self.kt {
                    let (wv, xv) = self.tap_views(a, b);
                    let xt = View {
                        off: xv.off,
                        rs: xv.cs,
                        cs: xv.rs,
                    };
                    gemm_view(cout, cols, self.cin, &gp, gv, &planes, xt, dw, wv, 1.0);
                }
            }
        }
        if let Some(dx) = dx {
            let mut dplanes = vec![0.0; self.stride * self.cin * self.plane_len()];
            for a in 0..self.kf {
                for b in 0..self.kt {
                    let (wv, xv) = self.tap_views(a, b);
                    let wt = View {
                        off: wv.off,
                        rs: wv.cs,
                        cs: wv.rs,
                    };
                    gemm_view(self.cin, cout, cols, w, wt, &gp, gv, &mut dplanes, xv, 1.0);
                }
            }
            self.from_planes(&dplanes, dx);
        }
    }
}

impl Tape {
    /// Affine map over the last axis: `x [.., D]`, `w [O, D]`, `b [O]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        let bad = || Error::shape("linear", format!("x {xs:?}, w {ws:?}"));
        let d = *xs.last().ok_or_else(bad)?;
        if ws.len() != 2 || ws[1] != d {
            return Err(bad());
        }
        let o = ws[0];
        if let Some(b) = b {
            if self.shape(b) != [o] {
                return Err(Error::shape(
                    "linear",
                    format!("bias {:?} for {o} outputs", self.shape(b)),
                ));
            }
        }
        let rows = self.value(x).len() / d.max(1);
        let mut out = vec![0.0; rows * o];
        if let Some(b) = b {
            let bv = self.value(b).data();
            for r in 0..rows {
                out[r * o..(r + 1) * o].copy_from_slice(bv);
            }
        }
        gemm(
            rows,
            d,
            o,
            self.value(x).data(),
            false,
            self.value(w).data(),
            true,
            &mut out,
            1.0,
        );
        let mut out_shape = xs.clone();
        *out_shape.last_mut().expect("non-empty") = o;
        let out = Tensor::new(out_shape, out)?;
        let mut parents = vec![x, w];
        parents.extend(b);
        Ok(self.push(
            out,
            &parents,
            Box::new(move |c| {
                let g = c.grad.data();
                let (xv, wv) = (c.inputs[0], c.inputs[1]);
                let dx = c.needs[0].then(|| {
                    let mut dx = vec![0.0; rows * d];
                    gemm(rows, o, d, g, false, wv.data(), false, &mut dx, 0.0);
                    Tensor::new(xv.shape().to_vec(), dx).expect("x shape")
                });
                let dw = c.needs[1].then(|| {
                    let mut dw = vec![0.0; o * d];
                    gemm(o, rows, d, g, true, xv.data(), false, &mut dw, 0.0);
                    Tensor::new(vec![o, d], dw).expect("w shape")
                });
                let mut grads = vec![dx, dw];
                if c.inputs.len() == 3 {
                    grads.push(c.needs[2].then(|| Tensor::from_vec(col_sums(g, rows, o))));
                }
                grads
            }),
        ))
    }

    /// Convolution of `x [B, Cin, F, T]` with `w [Cout, Cin, KF, KT]` and
    /// bias `b [Cout]`; output `[B, Cout, F', T]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, spec: Conv2dSpec) -> Result<Var> {
        let (xs, ws, bs) = (
            self.shape(x).to_vec(),
            self.shape(w).to_vec(),
            self.shape(b).to_vec(),
        );
        let bad = || Error::shape("conv2d", format!("x {xs:?}, w {ws:?}, b {bs:?}"));
        if xs.len() != 4 || ws.len() != 4 || ws[1] != xs[1] || bs != [ws[0]] || spec.stride_f == 0 {
            return Err(bad());
        }
        let (batch, cout) = (xs[0], ws[0]);
        let geom = ConvGeom {
            cin: xs[1],
            f: xs[2],
            t: xs[3],
            kf: ws[2],
            kt: ws[3],
            fo: spec.out_freq(xs[2], ws[2]).ok_or_else(bad)?,
            stride: spec.stride_f,
            pad: spec.pad_f,
        };
        let n = geom.n();
        let in_size = geom.cin * geom.f * geom.t;
        let mut out = vec![0.0; batch * cout * n];
        let (xv, wv, bv) = (
            self.value(x).data(),
            self.value(w).data(),
            self.value(b).data(),
        );
        for bi in 0..batch {
            let dst = &mut out[bi * cout * n..(bi + 1) * cout * n];
            geom.forward(cout, &xv[bi * in_size..(bi + 1) * in_size], wv, bv, dst);
        }
        let out = Tensor::new(vec![batch, cout, geom.fo, geom.t], out)?;
        Ok(self.push(
            out,
            &[x, w, b],
            Box::new(move |c| {
                let g = c.grad.data();
                let (xv, wv) = (c.inputs[0].data(), c.inputs[1].data());
                let mut dx = c.needs[0].then(|| vec![0.0; batch * in_size]);
                let mut dw = c.needs[1].then(|| vec![0.0; wv.len()]);
                let mut db = c.needs[2].then(|| vec![0.0; cout]);
                for bi in 0..batch {
                    let gb = &g[bi * cout * n..(bi + 1) * cout * n];
                    let xb = &xv[bi * in_size..(bi + 1) * in_size];
                    let dxb = dx
                        .as_mut()
                        .map(|d| &mut d[bi * in_size..(bi + 1) * in_size]);
                    geom.backward(cout, gb, xb, wv, dw.as_deref_mut(), dxb);
                    if let Some(db) = db.as_mut() {
                        for (co, row) in gb.chunks(n).enumerate() {
                            db[co] += row.iter().sum::<f64>();
                        }
                    }
                }
                vec![
                    dx.map(|d| Tensor::new(c.inputs[0].shape().to_vec(), d).expect("x shape")),
                    dw.map(|d| Tensor::new(c.inputs[1].shape().to_vec(), d).expect("w shape")),
                    db.map(Tensor::from_vec),
                ]
            }),
        ))
    }

    /// Gated recurrent unit over `x [T, D]` with zero initial state.
    /// Gate rows of `wx [3H, D]`, `wh [3H, H]`, `bx`, `bh [3H]` are ordered
    /// reset, update, candidate. Returns all hidden states `[T, H]`.
    pub fn gru(&mut self, x: Var, wx: Var, wh: Var, bx: Var, bh: Var) -> Result<Var> {
        let shapes: Vec<Vec<usize>> = [x, wx, wh, bx, bh]
            .iter()
            .map(|&v| self.shape(v).to_vec())
            .collect();
        let bad = || Error::shape("gru", format!("x, wx, wh, bx, bh = {shapes:?}"));
        let (xs, wxs, whs) = (&shapes[0], &shapes[1], &shapes[2]);
        if xs.len() != 2 || wxs.len() != 2 || whs.len() != 2 {
            return Err(bad());
        }
        let (t_len, d) = (xs[0], xs[1]);
        let h = whs[1];
        let g3 = 3 * h;
        if wxs[..] != [g3, d] || whs[0] != g3 || shapes[3] != [g3] || shapes[4] != [g3] {
            return Err(bad());
        }
        let (xv, wxv, whv) = (
            self.value(x).data(),
            self.value(wx).data(),
            self.value(wh).data(),
        );
        let (bxv, bhv) = (self.value(bx).data(), self.value(bh).data());
        let mut xp = vec![0.0; t_len * g3];
        for t in 0..t_len {
            xp[t * g3..(t + 1) * g3].copy_from_slice(bxv);
        }
        gemm(t_len, d, g3, xv, false, wxv, true, &mut xp, 1.0);

        let mut hs = vec![0.0; t_len * h];
        let mut r_s = vec![0.0; t_len * h];
        let mut z_s = vec![0.0; t_len * h];
        let mut n_s = vec![0.0; t_len * h];
        let mut hn_s = vec![0.0; t_len * h];
        let mut hp = vec![0.0; g3];
        let mut prev = vec![0.0; h];
        for t in 0..t_len {
            for (i, out) in hp.iter_mut().enumerate() {
                let row = &whv[i * h..(i + 1) * h];
                *out = bhv[i] + row.iter().zip(&prev).map(|(a, b)| a * b).sum::<f64>();
            }
            let xt = &xp[t * g3..(t + 1) * g3];
            for j in 0..h {
                let r = sigmoid_scalar(xt[j] + hp[j]);
                let z = sigmoid_scalar(xt[h + j] + hp[h + j]);
                let hn = hp[2 * h + j];
                let n = (xt[2 * h + j] + r * hn).tanh();
                let k = t * h + j;
                r_s[k] = r;
                z_s[k] = z;
                n_s[k] = n;
                hn_s[k] = hn;
                hs[k] = (1.0 - z) * n + z * prev[j];
            }
            prev.copy_from_slice(&hs[t * h..(t + 1) * h]);
        }
        let out = Tensor::new(vec![t_len, h], hs)?;
        Ok(self.push(
            out,
            &[x, wx, wh, bx, bh],
            Box::new(move |c| {
                let dy = c.grad.data();
                let hs = c.output.data();
                let (xv, wxv, whv) = (c.inputs[0].data(), c.inputs[1].data(), c.inputs[2].data());
                let mut gx = vec![0.0; t_len * g3];
                let mut gh = vec![0.0; t_len * g3];
                let mut dh_next = vec![0.0; h];
                for t in (0..t_len).rev() {
                    let mut dh_prev = vec![0.0; h];
                    for j in 0..h {
                        let k = t * h + j;
                        let (r, z, n, hn) = (r_s[k], z_s[k], n_s[k], hn_s[k]);
                        let h_prev = if t > 0 { hs[k - h] } else { 0.0 };
                        let dh = dy[k] + dh_next[j];
                        let dn = dh * (1.0 - z);
                        let dz = dh * (h_prev - n);
                        dh_prev[j] = dh * z;
                        let dan = dn * (1.0 - n * n);
                        let dar = dan * hn * r * (1.0 - r);
                        let daz = dz * z * (1.0 - z);
                        let row = t * g3;
                        gx[row + j] = dar;
                        gx[row + h + j] = daz;
                        gx[row + 2 * h + j] = dan;
                        gh[row + j] = dar;
                        gh[row + h + j] = daz;
                        gh[row + 2 * h + j] = dan * r;
                    }
                    let ght = &gh[t * g3..(t + 1) * g3];
                    for (i, &gi) in ght.iter().enumerate() {
                        if gi == 0.0 {
                            continue;
                        }
                        for (dp, w) in dh_prev.iter_mut().zip(&whv[i * h..(i + 1) * h]) {
                            *dp += gi * w;
                        }
                    }
                    dh_next = dh_prev;
                }
                let dx = c.needs[0].then(|| {
                    let mut dx = vec![0.0; t_len * d];
                    gemm(t_len, g3, d, &gx, false, wxv, false, &mut dx, 0.0);
                    Tensor::new(vec![t_len, d], dx).expect("x shape")
                });
                let dwx = c.needs[1].then(|| {
                    let mut dw = vec![0.0; g3 * d];
                    gemm(g3, t_len, d, &gx, true, xv, false, &mut dw, 0.0);
                    Tensor::new(vec![g3, d], dw).expect("wx shape")
                });
                let dwh = c.needs[2].then(|| {
                    let mut h_prev = vec![0.0; t_len * h];
                    if t_len > 1 {
                        h_prev[h..].copy_from_slice(&hs[..(t_len - 1) * h]);
                    }
                    let mut dw = vec![0.0; g3 * h];
                    gemm(g3, t_len, h, &gh, true, &h_prev, false, &mut dw, 0.0);
                    Tensor::new(vec![g3, h], dw).expect("wh shape")
                });
                vec![
                    dx,
                    dwx,
                    dwh,
                    c.needs[3].then(|| Tensor::from_vec(col_sums(&gx, t_len, g3))),
                    c.needs[4].then(|| Tensor::from_vec(col_sums(&gh, t_len, g3))),
                ]
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_transposes() {
        // A = [[1,2],[3,4]], B = [[5,6],[7,8]]
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let mut c = [0.0; 4];
        gemm(2, 2, 2, &a, false, &b, false, &mut c, 0.0);
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
        gemm(2, 2, 2, &a, true, &b, false, &mut c, 0.0);
        assert_eq!(c, [26.0, 30.0, 38.0, 44.0]);
        gemm(2, 2, 2, &a, false, &b, true, &mut c, 0.0);
        assert_eq!(c, [17.0, 23.0, 39.0, 53.0]);
    }

    #[test]
    fn conv_output_sizes() {
        let s = Conv2dSpec {
            stride_f: 2,
            pad_f: 1,
        };
        assert_eq!(s.out_freq(161, 3), Some(81));
        assert_eq!(s.out_freq(81, 3), Some(41));
        let s1 = Conv2dSpec {
            stride_f: 1,
            pad_f: 1,
        };
        assert_eq!(s1.out_freq(41, 3), Some(41));
    }

    fn direct_conv(x: &Tensor, w: &Tensor, b: &Tensor, spec: Conv2dSpec) -> Vec<f64> {
        let (xs, ws) = (x.shape(), w.shape());
        let (batch, cin, f, tl) = (xs[0], xs[1], xs[2], xs[3]);
        let (cout, kf, kt) = (ws[0], ws[2], ws[3]);
        let fo = spec.out_freq(f, kf).unwrap();
        let mut out = Vec::new();
        for bi in 0..batch {
            for co in 0..cout {
                for o in 0..fo {
                    for ti in 0..tl {
                        let mut acc = b.data()[co];
                        for ci in 0..cin {
                            for a in 0..kf {
                                for bb in 0..kt {
                                    let fi = (spec.stride_f * o + a) as isize - spec.pad_f as isize;
                                    let tt = ti as isize + bb as isize - (kt as isize - 1);
                                    if fi < 0 || fi >= f as isize || tt < 0 {
                                        continue;
                                    }
                                    let xv = x.data()
                                        [((bi * cin + ci) * f + fi as usize) * tl + tt as usize];
                                    acc += w.data()[((co * cin + ci) * kf + a) * kt + bb] * xv;
                                }
                            }
                        }
                        out.push(acc);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_direct_sum() {
        for (stride, pad, kf, kt, batch, f) in [
            (2, 1, 3, 3, 1, 5),
            (1, 1, 3, 3, 2, 4),
            (2, 2, 5, 2, 1, 9),
            (3, 0, 3, 1, 2, 7),
            (1, 0, 1, 4, 1, 3),
        ] {
            let (cin, tl, cout) = (2, 4, 3);
            let x = Tensor::new(
                [batch, cin, f, tl],
                (0..batch * cin * f * tl)
                    .map(|v| (v as f64 * 0.37).sin())
                    .collect(),
            )
            .unwrap();
            let w = Tensor::new(
                [cout, cin, kf, kt],
                (0..cout * cin * kf * kt)
                    .map(|v| (v as f64 * 0.11).cos())
                    .collect(),
            )
            .unwrap();
            let b = Tensor::from_vec(vec![0.1, -0.2, 0.3]);
            let spec = Conv2dSpec {
                stride_f: stride,
                pad_f: pad,
            };
            let mut t = Tape::new();
            let (xv, wv, bv) = (
                t.constant(x.clone()),
                t.constant(w.clone()),
                t.constant(b.clone()),
            );
            let y = t.conv2d(xv, wv, bv, spec).unwrap();
            let want = direct_conv(&x, &w, &b, spec);
            assert_eq!(t.value(y).len(), want.len());
            for (g, e) in t.value(y).data().iter().zip(&want) {
                assert!((g - e).abs() < 1e-12, "stride {stride} kf {kf} kt {kt}");
            }
        }
    }

    #[test]
    fn conv_gradients_on_odd_geometries() {
        for (stride, pad, kf, kt) in [(2, 2, 5, 2), (3, 0, 3, 1), (1, 0, 1, 4)] {
            let err = crate::autodiff::grad_check(
                |t, v| {
                    let y = t.conv2d(
                        v[0],
                        v[1],
                        v[2],
                        Conv2dSpec {
                            stride_f: stride,
                            pad_f: pad,
                        },
                    )?;
                    crate::autodiff::suite::weighted_sum(t, y, 3)
                },
                &[
                    Tensor::new(
                        [2, 2, 7, 3],
                        (0..84).map(|v| (v as f64 * 0.7).sin()).collect(),
                    )
                    .unwrap(),
                    Tensor::new(
                        [2, 2, kf, kt],
                        (0..4 * kf * kt).map(|v| (v as f64 * 0.3).cos()).collect(),
                    )
                    .unwrap(),
                    Tensor::from_vec(vec![0.2, -0.1]),
                ],
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-6, "stride {stride}: {err}");
        }
    }

    #[test]
    fn shape_errors_name_the_op() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::zeros([3, 4]));
        let w = t.constant(Tensor::zeros([2, 5]));
        let e = t.linear(x, w, None).unwrap_err().to_string();
        assert!(e.contains("linear"), "{e}");
    }
}
