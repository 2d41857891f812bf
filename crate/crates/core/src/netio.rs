//! Feedforward ReLU networks: the `hiqlip-net-v1` weight file format,
//! deterministic synthetic generation, and the per-class two-layer reduction.
//!
//! Weights are stored out×in (row = output neuron). Biases are parsed and kept
//! so files round-trip, but no estimator reads them: the gradient of a ReLU
//! network never involves the bias terms.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::{Error, Result};

pub const FORMAT_TAG: &str = "hiqlip-net-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    weights: Matrix,
    bias: Option<Vec<f64>>,
}

impl WeightMatrix {
    pub fn new(weights: Matrix, bias: Option<Vec<f64>>) -> Result<Self> {
        if let Some(b) = &bias {
            if b.len() != weights.rows() {
                return Err(Error::invalid(format!(
                    "bias has length {}, expected {}",
                    b.len(),
                    weights.rows()
                )));
            }
        }
        Ok(WeightMatrix { weights, bias })
    }

    pub fn from_matrix(weights: Matrix) -> Self {
        WeightMatrix {
            weights,
            bias: None,
        }
    }

    /// Number of output neurons.
    pub fn rows(&self) -> usize {
        self.weights.rows()
    }

    /// Number of input neurons.
    pub fn cols(&self) -> usize {
        self.weights.cols()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> Option<&[f64]> {
        self.bias.as_deref()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<WeightMatrix>,
    activation: Activation,
    metadata: BTreeMap<String, String>,
}

impl Network {
    /// Validates depth, shape chaining and finiteness. Layer indices in
    /// errors are 1-based.
    pub fn new(layers: Vec<WeightMatrix>) -> Result<Self> {
        Self::with_metadata(layers, BTreeMap::new())
    }

    pub fn with_metadata(
        layers: Vec<WeightMatrix>,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape {
                layer: 0,
                msg: "network needs at least one layer".into(),
            });
        }
        for (idx, layer) in layers.iter().enumerate() {
            if layer.weights.is_empty() {
                return Err(Error::Shape {
                    layer: idx + 1,
                    msg: "empty weight matrix".into(),
                });
            }
            if !layer.weights.all_finite() {
                return Err(Error::Value {
                    layer: idx + 1,
                    msg: "non-finite weight".into(),
                });
            }
            if layer.bias().is_some_and(|b| b.iter().any(|v| !v.is_finite())) {
                return Err(Error::Value {
                    layer: idx + 1,
                    msg: "non-finite bias".into(),
                });
            }
            if idx > 0 && layers[idx - 1].rows() != layer.cols() {
                return Err(Error::Shape {
                    layer: idx + 1,
                    msg: format!(
                        "input width {} does not match previous layer output {}",
                        layer.cols(),
                        layers[idx - 1].rows()
                    ),
                });
            }
        }
        Ok(Network {
            layers,
            activation: Activation::Relu,
            metadata,
        })
    }

    /// Builds a bias-free network from out×in matrices.
    pub fn from_matrices(mats: Vec<Matrix>) -> Result<Self> {
        Self::new(mats.into_iter().map(WeightMatrix::from_matrix).collect())
    }

    /// Number of weight matrices.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[WeightMatrix] {
        &self.layers
    }

    /// Weight matrix of layer `idx` (0-based).
    pub fn weights(&self, idx: usize) -> &Matrix {
        &self.layers[idx].weights
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].rows()
    }

    /// Widths of the hidden layers (outputs of every layer but the last).
    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.rows())
            .collect()
    }

    pub fn check_class(&self, class_index: usize) -> Result<()> {
        if class_index >= self.output_dim() {
            return Err(Error::invalid(format!(
                "class index {class_index} out of range for {} outputs",
                self.output_dim()
            )));
        }
        Ok(())
    }

    /// The row of the final layer belonging to one output class.
    pub fn class_row(&self, class_index: usize) -> Result<Vec<f64>> {
        self.check_class(class_index)?;
        Ok(self.weights(self.depth() - 1).row(class_index).to_vec())
    }

    /// The same network with its last layer reduced to a single output row.
    pub fn single_output(&self, class_index: usize) -> Result<Network> {
        let row = self.class_row(class_index)?;
        let mut layers: Vec<WeightMatrix> = self.layers[..self.depth() - 1]
            .iter()
            .map(|l| WeightMatrix::from_matrix(l.weights.clone()))
            .collect();
        layers.push(WeightMatrix::from_matrix(Matrix::from_vec(1, row.len(), row)));
        Network::new(layers)
    }

    /// Contiguous sub-network over layers `range` (0-based, half-open),
    /// biases dropped.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Network> {
        if range.is_empty() || range.end > self.depth() {
            return Err(Error::invalid(format!(
                "layer range {range:?} invalid for depth {}",
                self.depth()
            )));
        }
        Network::new(
            self.layers[range]
                .iter()
                .map(|l| WeightMatrix::from_matrix(l.weights.clone()))
                .collect(),
        )
    }

    /// Serializes to the `hiqlip-net-v1` JSON document (compact, newline
    /// terminated).
    pub fn to_json(&self) -> String {
        let file = NetFile {
            format: FORMAT_TAG.to_string(),
            activation: self.activation,
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    out_dim: l.rows(),
                    in_dim: l.cols(),
                    weights: l
                        .weights
                        .iter_rows()
                        .map(|r| r.iter().map(|&v| Entry::Num(v)).collect())
                        .collect(),
                    bias: l.bias.as_ref().map(|b| b.iter().map(|&v| Entry::Num(v)).collect()),
                })
                .collect(),
            metadata: self
                .metadata
                .iter()
                .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
                .collect(),
        };
        let mut s = serde_json::to_string(&file).expect("network serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if file.format != FORMAT_TAG {
            return Err(Error::Parse(format!(
                "unsupported format tag {:?}, expected {FORMAT_TAG:?}",
                file.format
            )));
        }
        let mut layers = Vec::with_capacity(file.layers.len());
        for (idx, lf) in file.layers.into_iter().enumerate() {
            let layer = idx + 1;
            if lf.weights.len() != lf.out_dim {
                return Err(Error::Shape {
                    layer,
                    msg: format!("{} weight rows, header says out={}", lf.weights.len(), lf.out_dim),
                });
            }
            let mut data = Vec::with_capacity(lf.out_dim * lf.in_dim);
            for (r, row) in lf.weights.iter().enumerate() {
                if row.len() != lf.in_dim {
                    return Err(Error::Shape {
                        layer,
                        msg: format!("row {r} has {} entries, header says in={}", row.len(), lf.in_dim),
                    });
                }
                for e in row {
                    data.push(e.to_f64().map_err(|msg| Error::Value { layer, msg })?);
                }
            }
            let bias = match lf.bias {
                Some(b) => Some(
                    b.iter()
                        .map(|e| e.to_f64().map_err(|msg| Error::Value { layer, msg }))
                        .collect::<Result<Vec<_>>>()?,
                ),
                None => None,
            };
            let weights = Matrix::from_vec(lf.out_dim, lf.in_dim, data);
            let wm = WeightMatrix::new(weights, bias).map_err(|e| Error::Shape {
                layer,
                msg: e.to_string(),
            })?;
            layers.push(wm);
        }
        let metadata = file
            .metadata
            .into_iter()
            .map(|(k, v)| match v {
                serde_json::Value::String(s) => (k, s),
                other => (k, other.to_string()),
            })
            .collect();
        Network::with_metadata(layers, metadata)
    }
}

/// Reads and validates a `hiqlip-net-v1` file.
pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Network::from_json(&text)
}

pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, net.to_json()).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Deterministic random network. `dims` lists layer sizes input first; every
/// weight is drawn i.i.d. uniform on `[-scale, scale]`, row-major, layer by
/// layer, from a ChaCha8 stream seeded with `seed_from_u64(seed)`. ChaCha8 and
/// the inclusive float range sampler are portable, so files reproduce across
/// platforms.
pub fn generate_synthetic(seed: u64, dims: &[usize], scale: f64) -> Result<Network> {
    if dims.len() < 2 {
        return Err(Error::invalid(format!(
            "need at least two layer sizes, got {}",
            dims.len()
        )));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid(format!("scale must be positive, got {scale}")));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::invalid("layer sizes must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mats = dims
        .windows(2)
        .map(|w| Matrix::from_fn(w[1], w[0], |_, _| rng.gen_range(-scale..=scale)))
        .collect();
    let mut net = Network::from_matrices(mats)?;
    net.metadata.insert("generator".into(), "synthetic".into());
    net.metadata.insert("seed".into(), seed.to_string());
    net.metadata.insert("scale".into(), format!("{scale}"));
    Ok(net)
}

/// Two-layer reduction for one output class: `w` is the first layer (m×n,
/// hidden × input), `u` the class row of the second layer and
/// `a[i][j] = w[j][i] * u[j]` (n×m).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassReduction {
    pub w: Matrix,
    pub u: Vec<f64>,
    pub a: Matrix,
}

impl ClassReduction {
    pub fn from_parts(w: Matrix, u: Vec<f64>) -> Result<Self> {
        if u.len() != w.rows() {
            return Err(Error::invalid(format!(
                "u has length {}, first layer has {} outputs",
                u.len(),
                w.rows()
            )));
        }
        let a = Matrix::from_fn(w.cols(), w.rows(), |i, j| w[(j, i)] * u[j]);
        Ok(ClassReduction { w, u, a })
    }

    pub fn input_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.a.cols()
    }
}

pub fn class_reduction(net: &Network, class_index: usize) -> Result<ClassReduction> {
    if net.depth() != 2 {
        return Err(Error::invalid(format!(
            "class reduction needs a depth-2 network, got depth {}",
            net.depth()
        )));
    }
    let u = net.class_row(class_index)?;
    ClassReduction::from_parts(net.weights(0).clone(), u)
}

#[derive(Serialize, Deserialize)]
struct NetFile {
    format: String,
    #[serde(default)]
    activation: Activation,
    layers: Vec<LayerFile>,
    #[serde(default)]
    metadata: BTreeMap<String, serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    #[serde(rename = "out")]
    out_dim: usize,
    #[serde(rename = "in")]
    in_dim: usize,
    weights: Vec<Vec<Entry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias: Option<Vec<Entry>>,
}

/// JSON has no literal for NaN/Inf; some exporters write them as strings.
/// Those are accepted by the parser so validation can name the layer.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Entry {
    Num(f64),
    Text(String),
}

impl Entry {
    fn to_f64(&self) -> std::result::Result<f64, String> {
        match self {
            Entry::Num(v) if v.is_finite() => Ok(*v),
            Entry::Num(v) => Err(format!("non-finite entry {v}")),
            Entry::Text(s) => match s.trim().to_ascii_lowercase().as_str() {
                "nan" | "inf" | "+inf" | "-inf" | "infinity" | "+infinity" | "-infinity" => {
                    Err(format!("non-finite entry {s:?}"))
                }
                _ => Err(format!("entry {s:?} is not a number")),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_json(layers: &str) -> String {
        format!(r#"{{"format":"hiqlip-net-v1","activation":"relu","layers":{layers},"metadata":{{}}}}"#)
    }

    #[test]
    fn loads_minimal_two_layer_file() {
        let net = Network::from_json(&tiny_json(
            r#"[{"out":2,"in":1,"weights":[[1.0],[-1.0]]},{"out":1,"in":2,"weights":[[1.0,1.0]]}]"#,
        ))
        .unwrap();
        assert_eq!(net.depth(), 2);
        assert_eq!(net.input_dim(), 1);
        assert_eq!(net.hidden_widths(), vec![2]);
    }

    #[test]
    fn shape_mismatch_names_second_layer() {
        let err = Network::from_json(&tiny_json(
            r#"[{"out":3,"in":1,"weights":[[1],[2],[3]]},{"out":1,"in":4,"weights":[[1,2,3,4]]}]"#,
        ))
        .unwrap_err();
        match err {
            Error::Shape { layer, .. } => assert_eq!(layer, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nan_entry_is_value_error() {
        let err = Network::from_json(&tiny_json(
            r#"[{"out":1,"in":2,"weights":[[1.0,"NaN"]]}]"#,
        ))
        .unwrap_err();
        assert!(matches!(err, Error::Value { layer: 1, .. }), "{err:?}");
    }

    #[test]
    fn malformed_file_is_parse_error() {
        assert!(matches!(
            Network::from_json("{\"format\": \"hiqlip-net-v1\", \"layers\": [").unwrap_err(),
            Error::Parse(_)
        ));
        assert!(matches!(
            Network::from_json(r#"{"format":"other","layers":[]}"#).unwrap_err(),
            Error::Parse(_)
        ));
    }

    #[test]
    fn header_row_count_checked() {
        let err = Network::from_json(&tiny_json(r#"[{"out":2,"in":1,"weights":[[1.0]]}]"#))
            .unwrap_err();
        assert!(matches!(err, Error::Shape { layer: 1, .. }));
    }

    #[test]
    fn biases_survive_round_trip() {
        let w = WeightMatrix::new(Matrix::from_rows(&[[0.5, -0.25]]), Some(vec![0.1])).unwrap();
        let net = Network::new(vec![w]).unwrap();
        let back = Network::from_json(&net.to_json()).unwrap();
        assert_eq!(back.layers()[0].bias(), Some(&[0.1][..]));
    }

    #[test]
    fn synthetic_is_deterministic() {
        let a = generate_synthetic(7, &[4, 3, 1], 1.0).unwrap();
        let b = generate_synthetic(7, &[4, 3, 1], 1.0).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = generate_synthetic(8, &[4, 3, 1], 1.0).unwrap();
        assert_ne!(a.weights(0), c.weights(0));
        assert!(a
            .weights(0)
            .as_slice()
            .iter()
            .all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn synthetic_rejects_short_dims() {
        assert!(generate_synthetic(1, &[5], 1.0).is_err());
        assert!(generate_synthetic(1, &[5, 2], 0.0).is_err());
    }

    #[test]
    fn reduction_of_small_net() {
        let net = Network::from_matrices(vec![
            Matrix::from_rows(&[[1.0], [-1.0]]),
            Matrix::from_rows(&[[1.0, 1.0]]),
        ])
        .unwrap();
        let red = class_reduction(&net, 0).unwrap();
        assert_eq!(red.a, Matrix::from_rows(&[[1.0, -1.0]]));

        let red0 = ClassReduction::from_parts(net.weights(0).clone(), vec![0.0, 0.0]).unwrap();
        assert!(red0.a.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reduction_matches_definition_entrywise() {
        let w = generate_synthetic(3, &[2, 3], 1.0).unwrap().weights(0).clone();
        let u = vec![2.0, -1.0, 0.5];
        let red = ClassReduction::from_parts(w.clone(), u.clone()).unwrap();
        assert_eq!((red.a.rows(), red.a.cols()), (2, 3));
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(red.a[(i, j)], w[(j, i)] * u[j]);
            }
        }
    }

    #[test]
    fn reduction_errors() {
        let net3 = generate_synthetic(1, &[2, 2, 2, 1], 1.0).unwrap();
        assert!(class_reduction(&net3, 0).is_err());
        let net2 = generate_synthetic(1, &[2, 2, 1], 1.0).unwrap();
        assert!(class_reduction(&net2, 1).is_err());
    }
}
