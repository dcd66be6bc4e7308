//! Per-layer forward and backward kernels over flat row-major buffers.
//!
//! Each output element is computed with a fixed summation order that does not
//! depend on the batch size, so a sample's logits are the same whether it is
//! evaluated alone or inside a batch.

use alloc::vec;
use alloc::vec::Vec;

use crate::Scalar;

#[inline]
fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    let mut acc = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// `y[n, o] = b[o] + sum_i x[n, i] * w[o, i]`
pub(crate) fn dense_forward<F: Scalar>(x: &[F], n: usize, w: &[F], b: &[F]) -> Vec<F> {
    let out = b.len();
    let inp = w.len() / out;
    let mut y = Vec::with_capacity(n * out);
    for row in x.chunks_exact(inp) {
        for (wo, &bo) in w.chunks_exact(inp).zip(b) {
            y.push(bo + dot(row, wo));
        }
    }
    y
}

/// Returns `(dx, dw, db)`.
pub(crate) fn dense_backward<F: Scalar>(x: &[F], delta: &[F], w: &[F], out: usize) -> (Vec<F>, Vec<F>, Vec<F>) {
    let inp = w.len() / out;
    let mut dx = vec![F::zero(); x.len()];
    let mut dw = vec![F::zero(); w.len()];
    let mut db = vec![F::zero(); out];
    for ((xr, dr), dxr) in x
        .chunks_exact(inp)
        .zip(delta.chunks_exact(out))
        .zip(dx.chunks_exact_mut(inp))
    {
        for (o, &d) in dr.iter().enumerate() {
            if d == F::zero() {
                continue;
            }
            db[o] += d;
            let wo = &w[o * inp..(o + 1) * inp];
            let dwo = &mut dw[o * inp..(o + 1) * inp];
            for i in 0..inp {
                dwo[i] += d * xr[i];
                dxr[i] += d * wo[i];
            }
        }
    }
    (dx, dw, db)
}

/// Geometry of a 2-D convolution or pooling window sweep.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Window {
    pub channels: usize,
    pub h: usize,
    pub w: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Window {
    pub fn out_h(&self) -> usize {
        (self.h + 2 * self.padding - self.kernel) / self.stride + 1
    }
    pub fn out_w(&self) -> usize {
        (self.w + 2 * self.padding - self.kernel) / self.stride + 1
    }
    /// Input coordinate for output position `o` and kernel offset `k`, if inside.
    #[inline]
    fn src(&self, o: usize, k: usize, size: usize) -> Option<usize> {
        let p = (o * self.stride + k) as isize - self.padding as isize;
        (p >= 0 && (p as usize) < size).then_some(p as usize)
    }
}

pub(crate) fn conv2d_forward<F: Scalar>(x: &[F], n: usize, g: Window, weight: &[F], bias: &[F]) -> Vec<F> {
    let oc = bias.len();
    let (oh, ow) = (g.out_h(), g.out_w());
    let in_len = g.channels * g.h * g.w;
    let k = g.kernel;
    let mut y = Vec::with_capacity(n * oc * oh * ow);
    for s in 0..n {
        let xs = &x[s * in_len..(s + 1) * in_len];
        for o in 0..oc {
            let wo = &weight[o * g.channels * k * k..(o + 1) * g.channels * k * k];
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias[o];
                    for c in 0..g.channels {
                        for ky in 0..k {
                            let Some(iy) = g.src(oy, ky, g.h) else { continue };
                            for kx in 0..k {
                                let Some(ix) = g.src(ox, kx, g.w) else { continue };
                                acc += wo[(c * k + ky) * k + kx] * xs[(c * g.h + iy) * g.w + ix];
                            }
                        }
                    }
                    y.push(acc);
                }
            }
        }
    }
    y
}

/// Returns `(dx, dw, db)`.
pub(crate) fn conv2d_backward<F: Scalar>(
    x: &[F],
    delta: &[F],
    n: usize,
    g: Window,
    weight: &[F],
    oc: usize,
) -> (Vec<F>, Vec<F>, Vec<F>) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let in_len = g.channels * g.h * g.w;
    let out_len = oc * oh * ow;
    let k = g.kernel;
    let mut dx = vec![F::zero(); x.len()];
    let mut dw = vec![F::zero(); weight.len()];
    let mut db = vec![F::zero(); oc];
    for s in 0..n {
        let xs = &x[s * in_len..(s + 1) * in_len];
        let ds = &delta[s * out_len..(s + 1) * out_len];
        let dxs = &mut dx[s * in_len..(s + 1) * in_len];
        for o in 0..oc {
            let base = o * g.channels * k * k;
            for oy in 0..oh {
                for ox in 0..ow {
                    let d = ds[(o * oh + oy) * ow + ox];
                    if d == F::zero() {
                        continue;
                    }
                    db[o] += d;
                    for c in 0..g.channels {
                        for ky in 0..k {
                            let Some(iy) = g.src(oy, ky, g.h) else { continue };
                            for kx in 0..k {
                                let Some(ix) = g.src(ox, kx, g.w) else { continue };
                                let wi = base + (c * k + ky) * k + kx;
                                let xi = (c * g.h + iy) * g.w + ix;
                                dw[wi] += d * xs[xi];
                                dxs[xi] += d * weight[wi];
                            }
                        }
                    }
                }
            }
        }
    }
    (dx, dw, db)
}

/// Max pooling without padding. Returns the pooled values and, for each output
/// element, the flat input index it was taken from (first maximum wins).
pub(crate) fn maxpool_forward<F: Scalar>(x: &[F], n: usize, g: Window) -> (Vec<F>, Vec<usize>) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let k = g.kernel;
    let mut y = Vec::with_capacity(n * g.channels * oh * ow);
    let mut arg = Vec::with_capacity(y.capacity());
    for s in 0..n {
        for c in 0..g.channels {
            let plane = (s * g.channels + c) * g.h * g.w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = plane + (oy * g.stride) * g.w + ox * g.stride;
                    for ky in 0..k {
                        for kx in 0..k {
                            let i = plane + (oy * g.stride + ky) * g.w + ox * g.stride + kx;
                            if x[i] > x[best] {
                                best = i;
                            }
                        }
                    }
                    y.push(x[best]);
                    arg.push(best);
                }
            }
        }
    }
    (y, arg)
}

pub(crate) fn maxpool_backward<F: Scalar>(delta: &[F], argmax: &[usize], in_len: usize) -> Vec<F> {
    let mut dx = vec![F::zero(); in_len];
    for (&d, &i) in delta.iter().zip(argmax) {
        dx[i] += d;
    }
    dx
}
