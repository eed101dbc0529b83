//! Dense multilayer perceptrons and their derivative engine.
//!
//! A network maps an input point to a scalar through affine layers with a smooth
//! activation after every layer except the last. Besides plain evaluation, the
//! [`engine`] propagates the input Jacobian and the pure second derivatives with
//! respect to the spatial coordinates, which is everything a Burgers residual
//! needs, and back-propagates any loss built on those quantities to the weights.

pub mod checkpoint;
mod engine;

use ndarray::{Array1, Array2};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub use engine::{derivatives, evaluate, loss_gradient, BundleBatch, BundleSeeds};

/// Smooth activation applied after every hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::InvalidArchitecture(format!(
                "unknown activation `{other}`"
            ))),
        }
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                // one exp instead of libm's expm1-based tanh; absolute error stays
                // at a few ulp of 1
                let e = (-2.0 * z.abs()).exp();
                ((1.0 - e) / (1.0 + e)).copysign(z)
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// First, second and third derivatives expressed through the activation
    /// output `y = σ(z)`.
    #[inline]
    pub fn derivatives_from_output(self, y: f64) -> (f64, f64, f64) {
        match self {
            Activation::Tanh => {
                let d1 = 1.0 - y * y;
                let d2 = -2.0 * y * d1;
                let d3 = -2.0 * d1 * (1.0 - 3.0 * y * y);
                (d1, d2, d3)
            }
            Activation::Sigmoid => {
                let d1 = y * (1.0 - y);
                let d2 = d1 * (1.0 - 2.0 * y);
                let d3 = d2 * (1.0 - 2.0 * y) - 2.0 * d1 * d1;
                (d1, d2, d3)
            }
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One affine map `z = W v + b` with `W` of shape `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Layer {
            weight: Array2::zeros((out_dim, in_dim)),
            bias: Array1::zeros(out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }
}

/// Network parameters together with the activation kind.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<Layer>,
    activation: Activation,
}

/// Gradient of a scalar loss, shaped like the [`MlpParams`] it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradient {
    pub layers: Vec<Layer>,
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::InvalidArchitecture(format!(
            "need at least an input and an output size, got {sizes:?}"
        )));
    }
    if sizes.contains(&0) {
        return Err(Error::InvalidArchitecture(format!(
            "layer sizes must be positive, got {sizes:?}"
        )));
    }
    if *sizes.last().unwrap() != 1 {
        return Err(Error::InvalidArchitecture(format!(
            "output size must be 1, got {sizes:?}"
        )));
    }
    Ok(())
}

/// Glorot-uniform weights, zero biases.
pub fn init_network(sizes: &[usize], activation: Activation, seed: u64) -> Result<MlpParams> {
    check_sizes(sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = sizes
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            Layer {
                weight: Array2::from_shape_simple_fn((fan_out, fan_in), || dist.sample(&mut rng)),
                bias: Array1::zeros(fan_out),
            }
        })
        .collect();
    Ok(MlpParams { layers, activation })
}

impl MlpParams {
    /// Builds a network from explicit layers, validating that dimensions chain.
    pub fn new(layers: Vec<Layer>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArchitecture("no layers".into()));
        }
        for (k, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.out_dim() {
                return Err(Error::InvalidArchitecture(format!(
                    "layer {k}: bias length {} does not match {} outputs",
                    layer.bias.len(),
                    layer.out_dim()
                )));
            }
            if k > 0 && layer.in_dim() != layers[k - 1].out_dim() {
                return Err(Error::InvalidArchitecture(format!(
                    "layer {k} expects {} inputs but layer {} produces {}",
                    layer.in_dim(),
                    k - 1,
                    layers[k - 1].out_dim()
                )));
            }
        }
        let sizes: Vec<usize> = std::iter::once(layers[0].in_dim())
            .chain(layers.iter().map(Layer::out_dim))
            .collect();
        check_sizes(&sizes)?;
        let params = MlpParams { layers, activation };
        if !params.is_finite() {
            return Err(Error::InvalidArchitecture("non-finite parameter".into()));
        }
        Ok(params)
    }

    pub fn init(sizes: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        init_network(sizes, activation, seed)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable access for tests and manual construction. Shapes must be preserved.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Layer::out_dim))
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weight.iter().all(|v| v.is_finite()) && l.bias.iter().all(|v| v.is_finite())
        })
    }

    /// Flattens as weights (row-major) then biases, layer by layer.
    pub fn to_flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        unflatten_into(&mut self.layers, flat)
    }

    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        let mut out = self.clone();
        out.set_flat(flat)?;
        Ok(out)
    }

    pub fn zero_gradient(&self) -> ParamGradient {
        ParamGradient {
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.in_dim(), l.out_dim()))
                .collect(),
        }
    }

    /// Plain evaluation at one input point.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::input(format!(
                "point has {} coordinates, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut v = Array1::from(x.to_vec());
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = layer.weight.dot(&v) + &layer.bias;
            if k < last {
                z.mapv_inplace(|s| self.activation.apply(s));
            }
            v = z;
        }
        Ok(v[0])
    }
}

/// Free-function form of [`MlpParams::forward`].
pub fn forward(params: &MlpParams, x: &[f64]) -> Result<f64> {
    params.forward(x)
}

impl ParamGradient {
    pub fn to_flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()))
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub(crate) fn add_assign(&mut self, other: &ParamGradient) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
    }

    pub fn is_congruent(&self, params: &MlpParams) -> bool {
        self.layers.len() == params.layers.len()
            && self
                .layers
                .iter()
                .zip(&params.layers)
                .all(|(g, p)| g.weight.dim() == p.weight.dim() && g.bias.len() == p.bias.len())
    }
}

fn flatten(layers: &[Layer]) -> Vec<f64> {
    let n = layers.iter().map(|l| l.weight.len() + l.bias.len()).sum();
    let mut out = Vec::with_capacity(n);
    for l in layers {
        out.extend(l.weight.iter().copied());
        out.extend(l.bias.iter().copied());
    }
    out
}

fn unflatten_into(layers: &mut [Layer], flat: &[f64]) -> Result<()> {
    let n: usize = layers.iter().map(|l| l.weight.len() + l.bias.len()).sum();
    if flat.len() != n {
        return Err(Error::input(format!(
            "flat parameter vector has {} entries, network has {n}",
            flat.len()
        )));
    }
    let mut rest = flat;
    for l in layers.iter_mut() {
        let (w, tail) = rest.split_at(l.weight.len());
        l.weight.iter_mut().zip(w).for_each(|(d, s)| *d = *s);
        let (b, tail) = tail.split_at(l.bias.len());
        l.bias.iter_mut().zip(b).for_each(|(d, s)| *d = *s);
        rest = tail;
    }
    Ok(())
}

/// How raw coordinates `(x_1, ..., x_d[, t])` enter the network.
///
/// Spatial coordinates come first and time, when present, is last. With periodic
/// features every spatial coordinate is replaced by `(sin ωx, cos ωx)` with
/// `ω = 2π / period`, which makes the network exactly periodic in that axis.
#[derive(Debug, Clone, PartialEq)]
pub struct InputLayout {
    spatial_dim: usize,
    time: bool,
    periods: Option<Vec<f64>>,
}

impl InputLayout {
    pub fn new(spatial_dim: usize, time: bool) -> Self {
        assert!(spatial_dim > 0, "spatial dimension must be positive");
        InputLayout {
            spatial_dim,
            time,
            periods: None,
        }
    }

    pub fn stationary(spatial_dim: usize) -> Self {
        Self::new(spatial_dim, false)
    }

    pub fn time_dependent(spatial_dim: usize) -> Self {
        Self::new(spatial_dim, true)
    }

    pub fn with_periodic_features(mut self, periods: Vec<f64>) -> Result<Self> {
        if periods.len() != self.spatial_dim || periods.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::input(format!(
                "need {} positive periods, got {periods:?}",
                self.spatial_dim
            )));
        }
        self.periods = Some(periods);
        Ok(self)
    }

    pub fn spatial_dim(&self) -> usize {
        self.spatial_dim
    }

    pub fn has_time(&self) -> bool {
        self.time
    }

    pub fn periods(&self) -> Option<&[f64]> {
        self.periods.as_deref()
    }

    /// Number of raw coordinates per point.
    pub fn raw_dim(&self) -> usize {
        self.spatial_dim + usize::from(self.time)
    }

    /// Number of network inputs after encoding.
    pub fn feature_dim(&self) -> usize {
        let spatial = if self.periods.is_some() {
            2 * self.spatial_dim
        } else {
            self.spatial_dim
        };
        spatial + usize::from(self.time)
    }

    /// Value, one first-derivative channel per raw coordinate, one pure
    /// second-derivative channel per spatial coordinate.
    pub(crate) fn channels(&self) -> usize {
        1 + self.raw_dim() + self.spatial_dim
    }
}

/// Value and input derivatives of the network at a single point.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeBundle {
    pub value: f64,
    pub grad_x: Vec<f64>,
    pub laplacian: f64,
    pub du_dt: Option<f64>,
}

impl DerivativeBundle {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.laplacian.is_finite()
            && self.grad_x.iter().all(|g| g.is_finite())
            && self.du_dt.is_none_or(f64::is_finite)
    }
}
