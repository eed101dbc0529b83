//! Plain-text checkpoints.
//!
//! ```text
//! layers: 2 32 32 1; activation: tanh
//! <weights of layer 0, row-major, one value per line>
//! <biases of layer 0>
//! <weights of layer 1>
//! ...
//! ```
//!
//! Values are written with 17 significant digits, which round-trips every `f64`.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, Layer, MlpParams};
use crate::{Error, Result};

pub fn to_string(params: &MlpParams) -> String {
    let sizes: Vec<String> = params.sizes().iter().map(|s| s.to_string()).collect();
    let mut out = format!(
        "layers: {}; activation: {}\n",
        sizes.join(" "),
        params.activation()
    );
    for layer in params.layers() {
        for v in layer.weight.iter().chain(layer.bias.iter()) {
            writeln!(out, "{v:.16e}").unwrap();
        }
    }
    out
}

pub fn from_str(text: &str) -> Result<MlpParams> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Checkpoint("empty checkpoint".into()))?;
    let (sizes, activation) = parse_header(header)?;

    let mut values = lines.filter(|l| !l.trim().is_empty()).map(|l| {
        l.trim()
            .parse::<f64>()
            .map_err(|e| Error::Checkpoint(format!("bad value `{l}`: {e}")))
    });
    let mut take = |count: usize| -> Result<Vec<f64>> {
        (0..count)
            .map(|_| {
                values
                    .next()
                    .unwrap_or_else(|| Err(Error::Checkpoint("truncated checkpoint".into())))
            })
            .collect()
    };
    let mut layers = Vec::with_capacity(sizes.len() - 1);
    for w in sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let weight = Array2::from_shape_vec((fan_out, fan_in), take(fan_in * fan_out)?)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        let bias = Array1::from(take(fan_out)?);
        layers.push(Layer { weight, bias });
    }
    if values.next().is_some() {
        return Err(Error::Checkpoint("trailing values after the last layer".into()));
    }
    MlpParams::new(layers, activation)
}

fn parse_header(header: &str) -> Result<(Vec<usize>, Activation)> {
    let bad = || Error::Checkpoint(format!("bad header `{header}`"));
    let (layers, act) = header.split_once(';').ok_or_else(bad)?;
    let sizes = layers
        .trim()
        .strip_prefix("layers:")
        .ok_or_else(bad)?
        .split_whitespace()
        .map(|s| s.parse::<usize>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    let act = act
        .trim()
        .strip_prefix("activation:")
        .ok_or_else(bad)?;
    if sizes.len() < 2 {
        return Err(bad());
    }
    Ok((sizes, Activation::from_name(act)?))
}

pub fn save(params: &MlpParams, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, to_string(params))
}

pub fn load(path: &Path) -> std::result::Result<MlpParams, LoadError> {
    let text = std::fs::read_to_string(path)?;
    Ok(from_str(&text)?)
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Format(#[from] Error),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::init_network;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let p = init_network(&[2, 3, 1], Activation::Sigmoid, 1).unwrap();
        let text = to_string(&p);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("layers: 2 3 1; activation: sigmoid"));
        assert_eq!(lines.count(), p.num_params());
    }

    #[test]
    fn malformed_inputs() {
        assert!(from_str("").is_err());
        assert!(from_str("layers: 2 1; activation: relu\n0\n0\n0\n").is_err());
        assert!(from_str("layers: 2 1; activation: tanh\n0\n0\n").is_err());
        assert!(from_str("layers: 2 1; activation: tanh\n0\n0\n0\n0\n").is_err());
        assert!(from_str("layers: 2 1; activation: tanh\n0\nx\n0\n").is_err());
        assert!(from_str("layers: 2 1; activation: tanh\n1\n2\n3\n").is_ok());
    }

    proptest! {
        #[test]
        fn roundtrip_is_bitwise(seed in any::<u64>(), scale in -1e6f64..1e6) {
            let mut p = init_network(&[3, 5, 4, 1], Activation::Tanh, seed).unwrap();
            let flat: Vec<f64> = p.to_flat().iter().map(|v| v * scale + 1e-300).collect();
            p.set_flat(&flat).unwrap();
            let q = from_str(&to_string(&p)).unwrap();
            let bits = |m: &MlpParams| m.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&p), bits(&q));
            prop_assert_eq!(
                p.forward(&[0.1, 0.2, 0.3]).unwrap().to_bits(),
                q.forward(&[0.1, 0.2, 0.3]).unwrap().to_bits()
            );
        }
    }
}
