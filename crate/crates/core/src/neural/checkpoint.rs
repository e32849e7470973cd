//! Plain-text model checkpoints.
//!
//! ```text
//! slnfed-model 1
//! activation softplus
//! layers <L>
//! layer <inputs> <outputs>
//! weights <outputs * inputs values, row-major>
//! bias <outputs values>
//! ...                      (one layer/weights/bias triple per layer)
//! mean <6 values>
//! std <6 values>
//! ```
//!
//! Values use the shortest decimal form that parses back to the same bits.

use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use super::{forward, Activation, Layer, ModelParams};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, Standardizer, FEATURE_COUNT};
use crate::scalar::Scalar;

const MAGIC: &str = "slnfed-model 1";

/// Network parameters together with the feature scaling they were trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier<S> {
    pub params: ModelParams<S>,
    pub standardizer: Standardizer<S>,
}

impl<S: Scalar> Classifier<S> {
    pub fn predict(&self, x: &FeatureVector<S>) -> Result<S> {
        self.predict_array(&x.to_array())
    }

    pub fn predict_array(&self, x: &[S; FEATURE_COUNT]) -> Result<S> {
        forward(&self.params, &self.standardizer.apply_array(x))
    }
}

fn write_values<S: Scalar>(out: &mut impl Write, key: &str, values: &[S]) -> Result<()> {
    write!(out, "{key}")?;
    for v in values {
        write!(out, " {v}")?;
    }
    writeln!(out)?;
    Ok(())
}

pub fn write_checkpoint<S: Scalar>(mut out: impl Write, model: &Classifier<S>) -> Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "activation {}", model.params.activation.name())?;
    writeln!(out, "layers {}", model.params.layers.len())?;
    for layer in &model.params.layers {
        writeln!(out, "layer {} {}", layer.inputs, layer.outputs)?;
        write_values(&mut out, "weights", &layer.weights)?;
        write_values(&mut out, "bias", &layer.bias)?;
    }
    write_values(&mut out, "mean", &model.standardizer.mean)?;
    write_values(&mut out, "std", &model.standardizer.std)?;
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self, key: &str) -> Result<Vec<String>> {
        let text = self
            .inner
            .next()
            .ok_or_else(|| Error::Checkpoint(format!("unexpected end of file, expected `{key}`")))??;
        self.line += 1;
        let mut fields = text.split_whitespace().map(str::to_string);
        match fields.next() {
            Some(k) if k == key => Ok(fields.collect()),
            other => Err(Error::Checkpoint(format!("line {}: expected `{key}`, found {other:?}", self.line))),
        }
    }

    fn values<S: Scalar + FromStr>(&mut self, key: &str, expected: usize) -> Result<Vec<S>> {
        let fields = self.next(key)?;
        if fields.len() != expected {
            return Err(Error::Checkpoint(format!(
                "line {}: `{key}` needs {expected} values, found {}",
                self.line,
                fields.len()
            )));
        }
        fields
            .iter()
            .map(|f| f.parse::<S>().map_err(|_| Error::Checkpoint(format!("line {}: bad number `{f}`", self.line))))
            .collect()
    }

    fn count(&mut self, key: &str, n: usize) -> Result<Vec<usize>> {
        let fields = self.next(key)?;
        let parsed: Option<Vec<usize>> = fields.iter().map(|f| f.parse().ok()).collect();
        match parsed {
            Some(v) if v.len() == n => Ok(v),
            _ => Err(Error::Checkpoint(format!("line {}: malformed `{key}`", self.line))),
        }
    }
}

pub fn read_checkpoint<S: Scalar + FromStr>(input: impl BufRead) -> Result<Classifier<S>> {
    let mut lines = Lines { inner: input.lines(), line: 0 };
    let header = lines.inner.next().transpose()?.unwrap_or_default();
    lines.line += 1;
    if header.trim() != MAGIC {
        return Err(Error::Checkpoint(format!("not a model checkpoint (header `{header}`)")));
    }
    let activation = lines.next("activation")?;
    let activation = activation
        .first()
        .and_then(|a| Activation::from_name(a))
        .ok_or_else(|| Error::Checkpoint("unknown activation".into()))?;
    let layer_count = lines.count("layers", 1)?[0];
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let dims = lines.count("layer", 2)?;
        let (inputs, outputs) = (dims[0], dims[1]);
        let weights = lines.values("weights", inputs * outputs)?;
        let bias = lines.values("bias", outputs)?;
        layers.push(Layer { inputs, outputs, weights, bias });
    }
    if layers.windows(2).any(|w| w[0].outputs != w[1].inputs) {
        return Err(Error::Checkpoint("layer widths do not chain".into()));
    }
    let mean: Vec<S> = lines.values("mean", FEATURE_COUNT)?;
    let std: Vec<S> = lines.values("std", FEATURE_COUNT)?;
    Ok(Classifier {
        params: ModelParams { layers, activation },
        standardizer: Standardizer {
            mean: mean.try_into().expect("length checked"),
            std: std.try_into().expect("length checked"),
        },
    })
}

pub fn save_checkpoint<S: Scalar>(path: impl AsRef<Path>, model: &Classifier<S>) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(&mut file, model)?;
    file.flush()?;
    Ok(())
}

pub fn load_checkpoint<S: Scalar + FromStr>(path: impl AsRef<Path>) -> Result<Classifier<S>> {
    read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn checkpoint_round_trips_bit_exact(seed in any::<u64>()) {
            let params = ModelParams::<f64>::init_default(&mut rng::stream(seed, 0));
            let model = Classifier {
                params,
                standardizer: Standardizer { mean: [0.1, 1.0 / 3.0, 2.5, 1e-9, 7.0, 0.0], std: [1.0, 2.0, 0.3, 4.0, 1e12, 0.7] },
            };
            let mut buf = Vec::new();
            write_checkpoint(&mut buf, &model).unwrap();
            let back: Classifier<f64> = read_checkpoint(buf.as_slice()).unwrap();
            prop_assert_eq!(back, model);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_checkpoint::<f64>("hello\n".as_bytes()).is_err());
        let truncated = format!("{MAGIC}\nactivation softplus\nlayers 1\nlayer 6 1\nweights 1 2 3\n");
        assert!(read_checkpoint::<f64>(truncated.as_bytes()).is_err());
    }

    #[test]
    fn single_precision_round_trip() {
        let model = Classifier {
            params: ModelParams::<f32>::init_default(&mut rng::stream(4, 0)),
            standardizer: Standardizer::identity(),
        };
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &model).unwrap();
        assert_eq!(read_checkpoint::<f32>(buf.as_slice()).unwrap(), model);
    }
}
