//! Batched propagation of values and input derivatives, and its adjoint.
//!
//! Points are processed in chunks. For a chunk of `n` points every layer carries a
//! matrix of shape `width × (channels · n)` whose column blocks hold, in order:
//! the activations, their derivative with respect to each raw input coordinate,
//! and their pure second derivative with respect to each spatial coordinate.
//! An affine layer maps all blocks with one matrix product (the bias only touches
//! the value block); the activation mixes blocks pointwise:
//!
//! ```text
//! a   = σ(z)
//! a_i = σ'(z) z_i
//! a_ii = σ''(z) z_i² + σ'(z) z_ii
//! ```
//!
//! The reverse pass walks the same recurrences backwards, so the gradient of any
//! loss written in terms of values, gradients, Laplacians and time derivatives is
//! exact.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use super::{DerivativeBundle, InputLayout, MlpParams, ParamGradient};
use crate::{Error, Result};

const CHUNK: usize = 64;

/// Network values and input derivatives for a batch of points.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleBatch {
    spatial_dim: usize,
    has_time: bool,
    pub value: Vec<f64>,
    /// Row-major `n × spatial_dim`.
    pub grad: Vec<f64>,
    pub laplacian: Vec<f64>,
    /// Empty when the layout has no time coordinate.
    pub du_dt: Vec<f64>,
}

/// Loss sensitivities with respect to every entry of a [`BundleBatch`].
#[derive(Debug, Clone, PartialEq)]
pub struct BundleSeeds {
    spatial_dim: usize,
    has_time: bool,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    pub laplacian: Vec<f64>,
    pub du_dt: Vec<f64>,
}

impl BundleBatch {
    fn with_len(n: usize, layout: &InputLayout) -> Self {
        let d = layout.spatial_dim();
        BundleBatch {
            spatial_dim: d,
            has_time: layout.has_time(),
            value: vec![0.0; n],
            grad: vec![0.0; n * d],
            laplacian: vec![0.0; n],
            du_dt: if layout.has_time() { vec![0.0; n] } else { Vec::new() },
        }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn spatial_dim(&self) -> usize {
        self.spatial_dim
    }

    pub fn has_time(&self) -> bool {
        self.has_time
    }

    pub fn grad(&self, i: usize) -> &[f64] {
        &self.grad[i * self.spatial_dim..(i + 1) * self.spatial_dim]
    }

    pub fn du_dt(&self, i: usize) -> Option<f64> {
        self.has_time.then(|| self.du_dt[i])
    }

    pub fn get(&self, i: usize) -> DerivativeBundle {
        DerivativeBundle {
            value: self.value[i],
            grad_x: self.grad(i).to_vec(),
            laplacian: self.laplacian[i],
            du_dt: self.du_dt(i),
        }
    }

    /// Zero-filled seeds with the same layout.
    pub fn zero_seeds(&self) -> BundleSeeds {
        BundleSeeds {
            spatial_dim: self.spatial_dim,
            has_time: self.has_time,
            value: vec![0.0; self.value.len()],
            grad: vec![0.0; self.grad.len()],
            laplacian: vec![0.0; self.laplacian.len()],
            du_dt: vec![0.0; self.du_dt.len()],
        }
    }

    fn first_non_finite(&self) -> Option<usize> {
        (0..self.len()).find(|&i| !self.get(i).is_finite())
    }
}

impl BundleSeeds {
    pub fn grad_mut(&mut self, i: usize) -> &mut [f64] {
        let d = self.spatial_dim;
        &mut self.grad[i * d..(i + 1) * d]
    }

    fn first_non_finite(&self) -> Option<usize> {
        let d = self.spatial_dim;
        (0..self.value.len()).find(|&i| {
            !self.value[i].is_finite()
                || !self.laplacian[i].is_finite()
                || self.grad[i * d..(i + 1) * d].iter().any(|g| !g.is_finite())
                || (self.has_time && !self.du_dt[i].is_finite())
        })
    }
}

struct Tape {
    /// Input of every layer, `inputs[0]` being the encoded points.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Array2<f64>>,
}

fn check_points(params: &MlpParams, layout: &InputLayout, points: &ArrayView2<f64>) -> Result<()> {
    if points.ncols() != layout.raw_dim() {
        return Err(Error::input(format!(
            "points have {} coordinates, layout expects {}",
            points.ncols(),
            layout.raw_dim()
        )));
    }
    if params.input_dim() != layout.feature_dim() {
        return Err(Error::input(format!(
            "network takes {} inputs but the layout produces {} features",
            params.input_dim(),
            layout.feature_dim()
        )));
    }
    Ok(())
}

/// Encoded input channels of a chunk, shape `feature_dim × (channels · n)`.
fn encode(layout: &InputLayout, points: &ArrayView2<f64>) -> Array2<f64> {
    let n = points.nrows();
    let d = layout.spatial_dim();
    let raw = layout.raw_dim();
    let cn = layout.channels() * n;
    let mut a = Array2::zeros((layout.feature_dim(), cn));
    let jac = |i: usize| (1 + i) * n;
    let hess = |i: usize| (1 + raw + i) * n;
    match layout.periods() {
        None => {
            for (p, x) in points.outer_iter().enumerate() {
                for i in 0..raw {
                    a[[i, p]] = x[i];
                    a[[i, jac(i) + p]] = 1.0;
                }
            }
        }
        Some(periods) => {
            for (p, x) in points.outer_iter().enumerate() {
                for i in 0..d {
                    let w = std::f64::consts::TAU / periods[i];
                    let (s, c) = (w * x[i]).sin_cos();
                    a[[2 * i, p]] = s;
                    a[[2 * i + 1, p]] = c;
                    a[[2 * i, jac(i) + p]] = w * c;
                    a[[2 * i + 1, jac(i) + p]] = -w * s;
                    a[[2 * i, hess(i) + p]] = -w * w * s;
                    a[[2 * i + 1, hess(i) + p]] = -w * w * c;
                }
                if layout.has_time() {
                    a[[2 * d, p]] = x[d];
                    a[[2 * d, jac(d) + p]] = 1.0;
                }
            }
        }
    }
    a
}

fn affine(layer: &super::Layer, input: &Array2<f64>, n: usize) -> Array2<f64> {
    let mut z = Array2::zeros((layer.out_dim(), input.ncols()));
    general_mat_mul(1.0, &layer.weight, input, 0.0, &mut z);
    for (mut row, b) in z.outer_iter_mut().zip(layer.bias.iter()) {
        row.slice_mut(ndarray::s![..n]).mapv_inplace(|v| v + b);
    }
    z
}

fn activate(params: &MlpParams, layout: &InputLayout, z: &Array2<f64>, n: usize) -> Array2<f64> {
    let act = params.activation();
    let raw = layout.raw_dim();
    let d = layout.spatial_dim();
    let cn = z.ncols();
    let zs = z.as_slice().expect("standard layout");
    let mut out = vec![0.0; zs.len()];
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for (zr, ar) in zs.chunks_exact(cn).zip(out.chunks_exact_mut(cn)) {
        let (head, rest) = ar.split_at_mut(n);
        for p in 0..n {
            let y = act.apply(zr[p]);
            let (a1, a2, _) = act.derivatives_from_output(y);
            head[p] = y;
            d1[p] = a1;
            d2[p] = a2;
        }
        let (jac_out, hess_out) = rest.split_at_mut(raw * n);
        for (o, zc) in jac_out.chunks_exact_mut(n).zip(zr[n..].chunks_exact(n)) {
            for ((o, zv), a1) in o.iter_mut().zip(zc).zip(&d1) {
                *o = a1 * zv;
            }
        }
        for i in 0..d {
            let zi = &zr[(1 + i) * n..(2 + i) * n];
            let zh = &zr[(1 + raw + i) * n..(2 + raw + i) * n];
            let o = &mut hess_out[i * n..(i + 1) * n];
            for p in 0..n {
                o[p] = d2[p] * zi[p] * zi[p] + d1[p] * zh[p];
            }
        }
    }
    Array2::from_shape_vec(z.dim(), out).expect("shape preserved")
}

/// Overwrites `da` (adjoint of the activation output) with the adjoint of the
/// pre-activation.
fn activate_backward(
    params: &MlpParams,
    layout: &InputLayout,
    z: &Array2<f64>,
    a: &Array2<f64>,
    da: &mut Array2<f64>,
    n: usize,
) {
    let act = params.activation();
    let raw = layout.raw_dim();
    let d = layout.spatial_dim();
    let cn = z.ncols();
    let zs = z.as_slice().expect("standard layout");
    let avals = a.as_slice().expect("standard layout");
    let g = da.as_slice_mut().expect("standard layout");
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    let mut d3 = vec![0.0; n];
    let mut gz = vec![0.0; n];
    for ((zr, ar), gr) in zs
        .chunks_exact(cn)
        .zip(avals.chunks_exact(cn))
        .zip(g.chunks_exact_mut(cn))
    {
        for p in 0..n {
            let (a1, a2, a3) = act.derivatives_from_output(ar[p]);
            d1[p] = a1;
            d2[p] = a2;
            d3[p] = a3;
            gz[p] = gr[p] * a1;
        }
        for c in 1..=raw {
            let gc = &mut gr[c * n..(c + 1) * n];
            let zc = &zr[c * n..(c + 1) * n];
            for p in 0..n {
                gz[p] += gc[p] * d2[p] * zc[p];
                gc[p] *= d1[p];
            }
        }
        // the Jacobian adjoints pick up a Hessian term only after scaling
        for i in 0..d {
            let (lo, hi) = gr.split_at_mut((1 + raw + i) * n);
            let gj = &mut lo[(1 + i) * n..(2 + i) * n];
            let gh = &mut hi[..n];
            let zi = &zr[(1 + i) * n..(2 + i) * n];
            let zh = &zr[(1 + raw + i) * n..(2 + raw + i) * n];
            for p in 0..n {
                let h = gh[p];
                gz[p] += h * (d3[p] * zi[p] * zi[p] + d2[p] * zh[p]);
                gj[p] += h * 2.0 * d2[p] * zi[p];
                gh[p] = h * d1[p];
            }
        }
        gr[..n].copy_from_slice(&gz);
    }
}

fn forward_chunk(
    params: &MlpParams,
    layout: &InputLayout,
    points: ArrayView2<f64>,
    keep_tape: bool,
) -> (BundleBatch, Option<Tape>) {
    let n = points.nrows();
    let layers = params.layers();
    let last = layers.len() - 1;
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pre = Vec::with_capacity(last);
    let mut a = encode(layout, &points);
    for layer in &layers[..last] {
        let z = affine(layer, &a, n);
        let next = activate(params, layout, &z, n);
        if keep_tape {
            inputs.push(a);
            pre.push(z);
        }
        a = next;
    }
    let y = affine(&layers[last], &a, n);
    if keep_tape {
        inputs.push(a);
    }

    let d = layout.spatial_dim();
    let raw = layout.raw_dim();
    let y = y.as_slice().expect("standard layout");
    let mut out = BundleBatch::with_len(n, layout);
    for p in 0..n {
        out.value[p] = y[p];
        for i in 0..d {
            out.grad[p * d + i] = y[(1 + i) * n + p];
            out.laplacian[p] += y[(1 + raw + i) * n + p];
        }
        if layout.has_time() {
            out.du_dt[p] = y[(1 + d) * n + p];
        }
    }
    (out, keep_tape.then_some(Tape { inputs, pre }))
}

fn backward_chunk(
    params: &MlpParams,
    layout: &InputLayout,
    tape: &Tape,
    seeds: &BundleSeeds,
    offset: usize,
    n: usize,
) -> ParamGradient {
    let d = layout.spatial_dim();
    let raw = layout.raw_dim();
    let cn = layout.channels() * n;
    let mut dy = Array2::zeros((1, cn));
    {
        let s = dy.as_slice_mut().expect("standard layout");
        for p in 0..n {
            let q = offset + p;
            s[p] = seeds.value[q];
            for i in 0..d {
                s[(1 + i) * n + p] = seeds.grad[q * d + i];
                s[(1 + raw + i) * n + p] = seeds.laplacian[q];
            }
            if layout.has_time() {
                s[(1 + d) * n + p] = seeds.du_dt[q];
            }
        }
    }

    let layers = params.layers();
    let mut grad = params.zero_gradient();
    let mut upstream = dy;
    for k in (0..layers.len()).rev() {
        if k + 1 < layers.len() {
            activate_backward(params, layout, &tape.pre[k], &tape.inputs[k + 1], &mut upstream, n);
        }
        let gk = &mut grad.layers[k];
        general_mat_mul(1.0, &upstream, &tape.inputs[k].t(), 0.0, &mut gk.weight);
        gk.bias = upstream.slice(ndarray::s![.., ..n]).sum_axis(Axis(1));
        if k > 0 {
            let mut below = Array2::zeros((layers[k].in_dim(), cn));
            general_mat_mul(1.0, &layers[k].weight.t(), &upstream, 0.0, &mut below);
            upstream = below;
        }
    }
    grad
}

fn chunk_ranges(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .step_by(CHUNK)
        .map(|s| (s, (s + CHUNK).min(n)))
        .collect()
}

fn concat(parts: Vec<BundleBatch>, layout: &InputLayout) -> BundleBatch {
    let n = parts.iter().map(BundleBatch::len).sum();
    let mut out = BundleBatch::with_len(0, layout);
    out.value.reserve(n);
    for part in parts {
        out.value.extend(part.value);
        out.grad.extend(part.grad);
        out.laplacian.extend(part.laplacian);
        out.du_dt.extend(part.du_dt);
    }
    out
}

/// Values and input derivatives at every row of `points`.
pub fn evaluate(
    params: &MlpParams,
    layout: &InputLayout,
    points: ArrayView2<f64>,
) -> Result<BundleBatch> {
    check_points(params, layout, &points)?;
    let parts: Vec<BundleBatch> = chunk_ranges(points.nrows())
        .into_par_iter()
        .map(|(s, e)| forward_chunk(params, layout, points.slice(ndarray::s![s..e, ..]), false).0)
        .collect();
    Ok(concat(parts, layout))
}

/// Values and input derivatives at a single point.
pub fn derivatives(params: &MlpParams, layout: &InputLayout, x: &[f64]) -> Result<DerivativeBundle> {
    let view = ArrayView2::from_shape((1, x.len()), x)
        .map_err(|e| Error::input(e.to_string()))?;
    check_points(params, layout, &view)?;
    Ok(forward_chunk(params, layout, view, false).0.get(0))
}

/// Loss value and its exact gradient with respect to every weight and bias.
///
/// `loss` receives the bundles at all `points` and returns the scalar loss along
/// with its partial derivatives with respect to each bundle entry.
pub fn loss_gradient<F>(
    params: &MlpParams,
    layout: &InputLayout,
    points: ArrayView2<f64>,
    loss: F,
) -> Result<(f64, ParamGradient)>
where
    F: FnOnce(&BundleBatch) -> (f64, BundleSeeds),
{
    check_points(params, layout, &points)?;
    let ranges = chunk_ranges(points.nrows());
    let (parts, tapes): (Vec<BundleBatch>, Vec<Tape>) = ranges
        .par_iter()
        .map(|&(s, e)| {
            let (b, t) = forward_chunk(params, layout, points.slice(ndarray::s![s..e, ..]), true);
            (b, t.expect("tape requested"))
        })
        .unzip();
    let bundles = concat(parts, layout);
    let (value, seeds) = loss(&bundles);
    if !value.is_finite() {
        let point = bundles
            .first_non_finite()
            .or_else(|| seeds.first_non_finite());
        return Err(Error::numerical(point, format!("loss evaluated to {value}")));
    }
    if seeds.value.len() != bundles.len() {
        return Err(Error::input("seed count does not match the point count"));
    }

    let partials: Vec<ParamGradient> = ranges
        .par_iter()
        .zip(tapes.par_iter())
        .map(|(&(s, e), tape)| backward_chunk(params, layout, tape, &seeds, s, e - s))
        .collect();
    let mut grad = params.zero_gradient();
    for part in &partials {
        grad.add_assign(part);
    }
    Ok((value, grad))
}
