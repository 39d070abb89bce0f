//! Three message-passing layers followed by a linear head.
//!
//! Layer `n` maps features `h` to `sum_{j in N(i)} mlp_n(h_i, h_j, sqrt(w_ij) (h_j - h_i))`;
//! there is no separate vertex update. Rectifiers sit between the linear
//! sublayers of each MLP, never after the last one.

use std::fs;
use std::path::Path;
use std::rc::Rc;

use graphvar_core::{Graph, Signal};
use ndarray::{concatenate, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tape::{Tape, Var};

pub const HIDDEN: usize = 64;

/// `y = x W + b`, with `W` stored `in x out` and `b` as a `1 x out` row.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array2<f64>,
}

impl Linear {
    /// Uniform fan-in initialization `U(-1/sqrt(in), 1/sqrt(in))` for weights and bias.
    fn init(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        Self {
            weight: Array2::from_shape_fn((inputs, outputs), |_| rng.random_range(-bound..bound)),
            bias: Array2::from_shape_fn((1, outputs), |_| rng.random_range(-bound..bound)),
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight) + &self.bias
    }
}

/// Precomputed arc indices of a graph in the form the network consumes.
#[derive(Debug, Clone)]
pub struct GraphIndex {
    pub vertices: usize,
    pub sources: Rc<[usize]>,
    pub targets: Rc<[usize]>,
    pub sqrt_weights: Rc<[f64]>,
    pub weights: Rc<[f64]>,
}

impl GraphIndex {
    pub fn new(graph: &Graph) -> Self {
        Self {
            vertices: graph.vertex_count(),
            sources: graph.arc_sources().into(),
            targets: graph.col_indices().into(),
            sqrt_weights: graph.sqrt_weights().into(),
            weights: graph.weights().into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    in_dim: usize,
    out_dim: usize,
    layers: Vec<Vec<Linear>>,
    head: Linear,
}

/// Parameter vars of a model recorded on a tape, in [`GnnModel::tensors`] order.
pub struct TapeParams(pub Vec<Var>);

impl GnnModel {
    /// Input features of dimension `in_dim`, output of dimension `out_dim`.
    pub fn new(in_dim: usize, out_dim: usize, seed: u64) -> Self {
        assert!(in_dim >= 1 && out_dim >= 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mlp = |widths: &[usize]| -> Vec<Linear> {
            widths.windows(2).map(|w| Linear::init(w[0], w[1], &mut rng)).collect()
        };
        let layers = vec![
            mlp(&[3 * in_dim, HIDDEN, HIDDEN]),
            mlp(&[3 * HIDDEN, HIDDEN, HIDDEN, HIDDEN]),
            mlp(&[3 * HIDDEN, HIDDEN, HIDDEN, HIDDEN]),
        ];
        let head = Linear::init(HIDDEN, out_dim, &mut rng);
        let model = Self {
            in_dim,
            out_dim,
            layers,
            head,
        };
        if (in_dim, out_dim) == (3, 3) {
            assert_eq!(model.layer_param_counts(), [4800, 20672, 20672, 195]);
        }
        model
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// Parameters (weights and biases) of layer 1, 2, 3 and the head.
    pub fn layer_param_counts(&self) -> [usize; 4] {
        let mlp = |l: &[Linear]| l.iter().map(Linear::param_count).sum();
        [
            mlp(&self.layers[0]),
            mlp(&self.layers[1]),
            mlp(&self.layers[2]),
            self.head.param_count(),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.layer_param_counts().iter().sum()
    }

    /// Named parameter tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out = Vec::new();
        for (n, mlp) in self.layers.iter().enumerate() {
            for (s, lin) in mlp.iter().enumerate() {
                out.push((format!("layer{}.{s}.weight", n + 1), &lin.weight));
                out.push((format!("layer{}.{s}.bias", n + 1), &lin.bias));
            }
        }
        out.push(("head.weight".into(), &self.head.weight));
        out.push(("head.bias".into(), &self.head.bias));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out = Vec::new();
        for lin in self.layers.iter_mut().flatten() {
            out.push(&mut lin.weight);
            out.push(&mut lin.bias);
        }
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }

    fn check_input(&self, index: &GraphIndex, f: &Signal) -> Result<()> {
        f.check_shape(index.vertices, self.in_dim)?;
        Ok(())
    }

    /// Inference without recording a tape.
    pub fn forward(&self, index: &GraphIndex, f: &Signal) -> Result<Signal> {
        self.forward_impl(index, f, None)
    }

    /// Forward pass that also reports, for every rectifier input, whether it
    /// was positive. Two parameter settings with equal patterns lie on the
    /// same smooth piece of the network.
    pub fn forward_with_pattern(&self, index: &GraphIndex, f: &Signal) -> Result<(Signal, Vec<bool>)> {
        let mut pattern = Vec::new();
        let out = self.forward_impl(index, f, Some(&mut pattern))?;
        Ok((out, pattern))
    }

    fn forward_impl(
        &self,
        index: &GraphIndex,
        f: &Signal,
        mut pattern: Option<&mut Vec<bool>>,
    ) -> Result<Signal> {
        self.check_input(index, f)?;
        let mut h = signal_to_array(f);
        for mlp in &self.layers {
            let hi = gather(&h, &index.sources);
            let hj = gather(&h, &index.targets);
            let mut diff = &hj - &hi;
            for (mut row, &s) in diff.rows_mut().into_iter().zip(index.sqrt_weights.iter()) {
                row *= s;
            }
            let mut x = concatenate(Axis(1), &[hi.view(), hj.view(), diff.view()])
                .expect("matching rows");
            for (s, lin) in mlp.iter().enumerate() {
                x = lin.apply(&x);
                if s + 1 < mlp.len() {
                    if let Some(p) = pattern.as_deref_mut() {
                        p.extend(x.iter().map(|&v| v > 0.0));
                    }
                    x.mapv_inplace(|v| v.max(0.0));
                }
            }
            h = scatter_sum(&x, &index.sources, index.vertices);
        }
        array_to_signal(self.head.apply(&h))
    }

    /// Records the parameters as leaves on `tape`.
    pub fn record_params(&self, tape: &mut Tape) -> TapeParams {
        TapeParams(self.tensors().into_iter().map(|(_, t)| tape.leaf(t.clone())).collect())
    }

    /// Same computation as [`GnnModel::forward`], recorded on `tape`.
    pub fn forward_tape(&self, tape: &mut Tape, params: &TapeParams, index: &GraphIndex, f: Var) -> Var {
        let mut p = params.0.iter().copied();
        let mut h = f;
        for mlp in &self.layers {
            let hi = tape.gather_rows(h, index.sources.clone());
            let hj = tape.gather_rows(h, index.targets.clone());
            let d = tape.sub(hj, hi);
            let diff = tape.scale_rows(d, index.sqrt_weights.clone());
            let mut x = tape.concat(&[hi, hj, diff]);
            for s in 0..mlp.len() {
                let (w, b) = (p.next().unwrap(), p.next().unwrap());
                x = tape.linear(x, w, b);
                if s + 1 < mlp.len() {
                    x = tape.relu(x);
                }
            }
            h = tape.scatter_sum(x, index.sources.clone(), index.vertices);
        }
        let (w, b) = (p.next().unwrap(), p.next().unwrap());
        tape.linear(h, w, b)
    }

    pub fn to_checkpoint(&self, config: serde_json::Value) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            hidden: HIDDEN,
            config,
            tensors: self
                .tensors()
                .into_iter()
                .map(|(name, t)| NamedTensor {
                    name,
                    shape: [t.nrows(), t.ncols()],
                    data: t.iter().copied().collect(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        if ck.hidden != HIDDEN {
            return Err(Error::Checkpoint(format!("hidden width {} != {HIDDEN}", ck.hidden)));
        }
        let mut model = Self::new(ck.in_dim, ck.out_dim, 0);
        let names: Vec<String> = model.tensors().into_iter().map(|(n, _)| n).collect();
        if ck.tensors.len() != names.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                names.len(),
                ck.tensors.len()
            )));
        }
        for ((slot, name), t) in model.tensors_mut().into_iter().zip(&names).zip(&ck.tensors) {
            if &t.name != name || [slot.nrows(), slot.ncols()] != t.shape || t.data.len() != slot.len() {
                return Err(Error::Checkpoint(format!(
                    "tensor '{}' {:?} does not match '{name}' {:?}",
                    t.name,
                    t.shape,
                    slot.dim()
                )));
            }
            *slot = Array2::from_shape_vec((t.shape[0], t.shape[1]), t.data.clone())
                .expect("checked length");
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path, config: serde_json::Value) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.to_checkpoint(config))?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Self, serde_json::Value)> {
        let ck: Checkpoint = serde_json::from_slice(&fs::read(path)?)?;
        Ok((Self::from_checkpoint(&ck)?, ck.config))
    }
}

const CHECKPOINT_FORMAT: &str = "graphvar-gnn";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: [usize; 2],
    /// Row-major values.
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub in_dim: usize,
    pub out_dim: usize,
    pub hidden: usize,
    /// Snapshot of the training configuration.
    pub config: serde_json::Value,
    pub tensors: Vec<NamedTensor>,
}

fn gather(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    let mut y = Array2::zeros((idx.len(), x.ncols()));
    for (r, &i) in idx.iter().enumerate() {
        y.row_mut(r).assign(&x.row(i));
    }
    y
}

fn scatter_sum(x: &Array2<f64>, idx: &[usize], rows: usize) -> Array2<f64> {
    let mut y = Array2::zeros((rows, x.ncols()));
    for (r, &i) in idx.iter().enumerate() {
        let mut out = y.row_mut(i);
        out += &x.row(r);
    }
    y
}

pub fn signal_to_array(f: &Signal) -> Array2<f64> {
    Array2::from_shape_vec((f.vertex_count(), f.dim()), f.as_slice().to_vec()).expect("row-major")
}

pub fn array_to_signal(a: Array2<f64>) -> Result<Signal> {
    let dim = a.ncols();
    let values = if a.is_standard_layout() {
        a.into_raw_vec_and_offset().0
    } else {
        a.iter().copied().collect()
    };
    Ok(Signal::new(values, dim)?)
}
