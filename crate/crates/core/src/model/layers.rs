//! Layer graph with hand-written forward and backward passes.
//!
//! Parameters live in one flat vector; each parametrized layer records the
//! offsets of its weights and biases. Backward passes accumulate into a
//! gradient vector with the same layout.

use super::tensor::{output_extent, FeatureMap};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Conv {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    /// Weights laid out `[ky][kx][in_c][out_c]`.
    pub w_off: usize,
    pub b_off: usize,
}

impl Conv {
    pub fn param_count(&self) -> usize {
        self.k * self.k * self.in_c * self.out_c + self.out_c
    }

    pub fn fan_in(&self) -> usize {
        self.k * self.k * self.in_c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Layer {
    Conv(Conv),
    Relu,
    MaxPool {
        k: usize,
        stride: usize,
    },
    /// `x + branch(x)`; the branch must preserve the shape.
    Residual(Vec<Layer>),
    /// Channel concatenation `[x, branch(x)]`; the branch must preserve the
    /// spatial extent.
    DenseConcat(Vec<Layer>),
    GlobalAvgPool,
    Linear {
        in_f: usize,
        out_f: usize,
        w_off: usize,
        b_off: usize,
    },
}

pub(crate) enum Cache<T> {
    Conv { input: FeatureMap<T> },
    Relu { output: FeatureMap<T> },
    MaxPool { argmax: Vec<usize>, in_dims: (usize, usize, usize) },
    Residual(Vec<Cache<T>>),
    DenseConcat { branch: Vec<Cache<T>>, in_c: usize },
    GlobalAvgPool { in_dims: (usize, usize, usize) },
    Linear { input: FeatureMap<T> },
}

/// Static shape propagation; `None` when a layer cannot accept its input.
pub(crate) fn output_dims(layers: &[Layer], dims: (usize, usize, usize)) -> Option<(usize, usize, usize)> {
    layers.iter().try_fold(dims, |(h, w, c), layer| match layer {
        Layer::Conv(cv) => {
            if cv.in_c != c {
                return None;
            }
            Some((output_extent(h, cv.k, cv.stride, cv.pad)?, output_extent(w, cv.k, cv.stride, cv.pad)?, cv.out_c))
        }
        Layer::Relu => Some((h, w, c)),
        Layer::MaxPool { k, stride } => Some((output_extent(h, *k, *stride, 0)?, output_extent(w, *k, *stride, 0)?, c)),
        Layer::Residual(branch) => (output_dims(branch, (h, w, c))? == (h, w, c)).then_some((h, w, c)),
        Layer::DenseConcat(branch) => {
            let (bh, bw, bc) = output_dims(branch, (h, w, c))?;
            (bh == h && bw == w).then_some((h, w, c + bc))
        }
        Layer::GlobalAvgPool => Some((1, 1, c)),
        Layer::Linear { in_f, out_f, .. } => (h * w * c == *in_f).then_some((1, 1, *out_f)),
    })
}

pub(crate) fn forward_seq<T: Scalar>(
    layers: &[Layer],
    params: &[T],
    input: FeatureMap<T>,
    caches: Option<&mut Vec<Cache<T>>>,
) -> FeatureMap<T> {
    let mut x = input;
    match caches {
        Some(caches) => {
            for layer in layers {
                let (y, cache) = forward(layer, params, x, true);
                caches.push(cache.expect("cache requested"));
                x = y;
            }
        }
        None => {
            for layer in layers {
                x = forward(layer, params, x, false).0;
            }
        }
    }
    x
}

pub(crate) fn backward_seq<T: Scalar>(
    layers: &[Layer],
    params: &[T],
    caches: &[Cache<T>],
    grad_out: FeatureMap<T>,
    grads: &mut [T],
) -> FeatureMap<T> {
    let mut g = grad_out;
    for (layer, cache) in layers.iter().zip(caches).rev() {
        g = backward(layer, params, cache, g, grads);
    }
    g
}

fn forward<T: Scalar>(layer: &Layer, params: &[T], x: FeatureMap<T>, keep: bool) -> (FeatureMap<T>, Option<Cache<T>>) {
    match layer {
        Layer::Conv(cv) => {
            let y = conv_forward(cv, params, &x);
            (y, keep.then(|| Cache::Conv { input: x }))
        }
        Layer::Relu => {
            let mut y = x;
            for v in y.data.iter_mut() {
                if *v < T::zero() {
                    *v = T::zero();
                }
            }
            let cache = keep.then(|| Cache::Relu { output: y.clone() });
            (y, cache)
        }
        Layer::MaxPool { k, stride } => {
            let (y, argmax) = maxpool_forward(&x, *k, *stride);
            (y, keep.then(|| Cache::MaxPool { argmax, in_dims: (x.h, x.w, x.c) }))
        }
        Layer::Residual(branch) => {
            let mut caches = keep.then(Vec::new);
            let mut y = forward_seq(branch, params, x.clone(), caches.as_mut());
            for (o, i) in y.data.iter_mut().zip(&x.data) {
                *o += *i;
            }
            (y, caches.map(Cache::Residual))
        }
        Layer::DenseConcat(branch) => {
            let in_c = x.c;
            let mut caches = keep.then(Vec::new);
            let b = forward_seq(branch, params, x.clone(), caches.as_mut());
            let c = in_c + b.c;
            let mut y = FeatureMap::zeros(x.h, x.w, c);
            for p in 0..x.h * x.w {
                y.data[p * c..p * c + in_c].copy_from_slice(&x.data[p * in_c..(p + 1) * in_c]);
                y.data[p * c + in_c..(p + 1) * c].copy_from_slice(&b.data[p * b.c..(p + 1) * b.c]);
            }
            (y, caches.map(|branch| Cache::DenseConcat { branch, in_c }))
        }
        Layer::GlobalAvgPool => {
            let mut y = FeatureMap::zeros(1, 1, x.c);
            let n = T::of_usize(x.h * x.w);
            for p in 0..x.h * x.w {
                for ch in 0..x.c {
                    y.data[ch] += x.data[p * x.c + ch];
                }
            }
            for v in y.data.iter_mut() {
                *v /= n;
            }
            (y, keep.then_some(Cache::GlobalAvgPool { in_dims: (x.h, x.w, x.c) }))
        }
        Layer::Linear { in_f, out_f, w_off, b_off } => {
            let mut y = FeatureMap::zeros(1, 1, *out_f);
            for o in 0..*out_f {
                let w = &params[w_off + o * in_f..w_off + (o + 1) * in_f];
                y.data[o] = params[b_off + o] + w.iter().zip(&x.data).map(|(&a, &b)| a * b).sum::<T>();
            }
            (y, keep.then(|| Cache::Linear { input: x }))
        }
    }
}

fn backward<T: Scalar>(
    layer: &Layer,
    params: &[T],
    cache: &Cache<T>,
    g: FeatureMap<T>,
    grads: &mut [T],
) -> FeatureMap<T> {
    match (layer, cache) {
        (Layer::Conv(cv), Cache::Conv { input }) => conv_backward(cv, params, input, &g, grads),
        (Layer::Relu, Cache::Relu { output }) => {
            let mut g = g;
            for (gv, &o) in g.data.iter_mut().zip(&output.data) {
                if o <= T::zero() {
                    *gv = T::zero();
                }
            }
            g
        }
        (Layer::MaxPool { .. }, Cache::MaxPool { argmax, in_dims }) => {
            let mut gi = FeatureMap::zeros(in_dims.0, in_dims.1, in_dims.2);
            for (&src, &gv) in argmax.iter().zip(&g.data) {
                gi.data[src] += gv;
            }
            gi
        }
        (Layer::Residual(branch), Cache::Residual(caches)) => {
            let mut gi = backward_seq(branch, params, caches, g.clone(), grads);
            for (a, b) in gi.data.iter_mut().zip(&g.data) {
                *a += *b;
            }
            gi
        }
        (Layer::DenseConcat(branch), Cache::DenseConcat { branch: caches, in_c }) => {
            let bc = g.c - in_c;
            let mut g_skip = FeatureMap::zeros(g.h, g.w, *in_c);
            let mut g_branch = FeatureMap::zeros(g.h, g.w, bc);
            for p in 0..g.h * g.w {
                g_skip.data[p * in_c..(p + 1) * in_c].copy_from_slice(&g.data[p * g.c..p * g.c + in_c]);
                g_branch.data[p * bc..(p + 1) * bc].copy_from_slice(&g.data[p * g.c + in_c..(p + 1) * g.c]);
            }
            let mut gi = backward_seq(branch, params, caches, g_branch, grads);
            for (a, b) in gi.data.iter_mut().zip(&g_skip.data) {
                *a += *b;
            }
            gi
        }
        (Layer::GlobalAvgPool, Cache::GlobalAvgPool { in_dims: (h, w, c) }) => {
            let n = T::of_usize(h * w);
            let mut gi = FeatureMap::zeros(*h, *w, *c);
            for p in 0..h * w {
                for ch in 0..*c {
                    gi.data[p * c + ch] = g.data[ch] / n;
                }
            }
            gi
        }
        (Layer::Linear { in_f, out_f, w_off, b_off }, Cache::Linear { input }) => {
            let mut gi = FeatureMap::zeros(input.h, input.w, input.c);
            for o in 0..*out_f {
                let go = g.data[o];
                grads[b_off + o] += go;
                let row = w_off + o * in_f;
                for i in 0..*in_f {
                    grads[row + i] += go * input.data[i];
                    gi.data[i] += go * params[row + i];
                }
            }
            gi
        }
        _ => unreachable!("cache does not match layer"),
    }
}

fn conv_forward<T: Scalar>(cv: &Conv, params: &[T], x: &FeatureMap<T>) -> FeatureMap<T> {
    let oh = output_extent(x.h, cv.k, cv.stride, cv.pad).expect("validated shape");
    let ow = output_extent(x.w, cv.k, cv.stride, cv.pad).expect("validated shape");
    let (in_c, out_c) = (cv.in_c, cv.out_c);
    let weights = &params[cv.w_off..cv.w_off + cv.k * cv.k * in_c * out_c];
    let bias = &params[cv.b_off..cv.b_off + out_c];
    let mut y = FeatureMap::zeros(oh, ow, out_c);
    for oy in 0..oh {
        for ox in 0..ow {
            let out = &mut y.data[(oy * ow + ox) * out_c..(oy * ow + ox + 1) * out_c];
            out.copy_from_slice(bias);
            for ky in 0..cv.k {
                let iy = (oy * cv.stride + ky) as isize - cv.pad as isize;
                if iy < 0 || iy >= x.h as isize {
                    continue;
                }
                for kx in 0..cv.k {
                    let ix = (ox * cv.stride + kx) as isize - cv.pad as isize;
                    if ix < 0 || ix >= x.w as isize {
                        continue;
                    }
                    let src = &x.data[(iy as usize * x.w + ix as usize) * in_c..][..in_c];
                    let wbase = (ky * cv.k + kx) * in_c * out_c;
                    for (ci, &v) in src.iter().enumerate() {
                        let wrow = &weights[wbase + ci * out_c..wbase + (ci + 1) * out_c];
                        for (o, &wv) in out.iter_mut().zip(wrow) {
                            *o += v * wv;
                        }
                    }
                }
            }
        }
    }
    y
}

fn conv_backward<T: Scalar>(
    cv: &Conv,
    params: &[T],
    x: &FeatureMap<T>,
    g: &FeatureMap<T>,
    grads: &mut [T],
) -> FeatureMap<T> {
    let (in_c, out_c) = (cv.in_c, cv.out_c);
    let wlen = cv.k * cv.k * in_c * out_c;
    let weights = &params[cv.w_off..cv.w_off + wlen];
    let mut gi = FeatureMap::zeros(x.h, x.w, in_c);
    {
        let gb = &mut grads[cv.b_off..cv.b_off + out_c];
        for p in 0..g.h * g.w {
            for (acc, &v) in gb.iter_mut().zip(&g.data[p * out_c..(p + 1) * out_c]) {
                *acc += v;
            }
        }
    }
    let gw = &mut grads[cv.w_off..cv.w_off + wlen];
    for oy in 0..g.h {
        for ox in 0..g.w {
            let go = &g.data[(oy * g.w + ox) * out_c..(oy * g.w + ox + 1) * out_c];
            for ky in 0..cv.k {
                let iy = (oy * cv.stride + ky) as isize - cv.pad as isize;
                if iy < 0 || iy >= x.h as isize {
                    continue;
                }
                for kx in 0..cv.k {
                    let ix = (ox * cv.stride + kx) as isize - cv.pad as isize;
                    if ix < 0 || ix >= x.w as isize {
                        continue;
                    }
                    let base = (iy as usize * x.w + ix as usize) * in_c;
                    let wbase = (ky * cv.k + kx) * in_c * out_c;
                    for ci in 0..in_c {
                        let v = x.data[base + ci];
                        let wrow = &weights[wbase + ci * out_c..wbase + (ci + 1) * out_c];
                        let gwrow = &mut gw[wbase + ci * out_c..wbase + (ci + 1) * out_c];
                        let mut acc = T::zero();
                        for ((gwv, &wv), &gv) in gwrow.iter_mut().zip(wrow).zip(go) {
                            *gwv += v * gv;
                            acc += wv * gv;
                        }
                        gi.data[base + ci] += acc;
                    }
                }
            }
        }
    }
    gi
}

fn maxpool_forward<T: Scalar>(x: &FeatureMap<T>, k: usize, stride: usize) -> (FeatureMap<T>, Vec<usize>) {
    let oh = output_extent(x.h, k, stride, 0).expect("validated shape");
    let ow = output_extent(x.w, k, stride, 0).expect("validated shape");
    let mut y = FeatureMap::zeros(oh, ow, x.c);
    let mut argmax = vec![0usize; oh * ow * x.c];
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..x.c {
                let mut best = x.idx(oy * stride, ox * stride, ch);
                for ky in 0..k {
                    for kx in 0..k {
                        let i = x.idx(oy * stride + ky, ox * stride + kx, ch);
                        if x.data[i] > x.data[best] {
                            best = i;
                        }
                    }
                }
                let o = y.idx(oy, ox, ch);
                y.data[o] = x.data[best];
                argmax[o] = best;
            }
        }
    }
    (y, argmax)
}

/// Fingerprint of every ReLU on/off decision and max-pool winner. Two inputs
/// with equal fingerprints lie in the same linear region of the network.
pub(crate) fn activation_pattern<T: Scalar>(layers: &[Layer], params: &[T], input: FeatureMap<T>) -> Vec<u64> {
    let mut caches = Vec::new();
    forward_seq(layers, params, input, Some(&mut caches));
    let mut out = Vec::new();
    collect_pattern(&caches, &mut out);
    out
}

fn collect_pattern<T: Scalar>(caches: &[Cache<T>], out: &mut Vec<u64>) {
    for cache in caches {
        match cache {
            Cache::Relu { output } => {
                out.extend(output.data.iter().map(|&v| u64::from(v > T::zero())));
            }
            Cache::MaxPool { argmax, .. } => out.extend(argmax.iter().map(|&i| i as u64)),
            Cache::Residual(inner) => collect_pattern(inner, out),
            Cache::DenseConcat { branch, .. } => collect_pattern(branch, out),
            _ => {}
        }
    }
}
