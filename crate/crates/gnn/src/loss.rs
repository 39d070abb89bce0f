//! Training objectives: the smoothed variational energy of the network output
//! (unsupervised) and the squared distance to a precomputed solver output
//! (distillation).

use graphvar_core::{Norm, ProblemParams, Signal};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{signal_to_array, GnnModel, GraphIndex};
use crate::tape::{Tape, Var};

/// Loss value and one gradient per model tensor, in [`GnnModel::tensors`] order.
#[derive(Debug, Clone)]
pub struct LossAndGrad {
    pub loss: f64,
    pub grads: Vec<Array2<f64>>,
}

/// Records `J_eps(g)` for the network output `g`, mirroring `objective_eps`.
pub fn record_objective_eps(
    tape: &mut Tape,
    index: &GraphIndex,
    g: Var,
    f0: Var,
    params: &ProblemParams,
) -> Var {
    let r = tape.sub(g, f0);
    let sq = tape.square(r);
    let s = tape.sum(sq);
    let fidelity = tape.scale(s, 0.5);
    if params.lambda == 0.0 {
        return fidelity;
    }

    let gi = tape.gather_rows(g, index.sources.clone());
    let gj = tape.gather_rows(g, index.targets.clone());
    let diff = tape.sub(gj, gi);
    let (q, eps) = (params.q, params.epsilon);
    let reg = match params.norm {
        Norm::L2 => {
            // sum_i (sum_j w_ij |g_j - g_i|^2 + eps^2)^(q/2)
            let sq = tape.square(diff);
            let per_arc = tape.row_sum(sq);
            let weighted = tape.scale_rows(per_arc, index.weights.clone());
            let norms = tape.scatter_sum(weighted, index.sources.clone(), index.vertices);
            let shifted = tape.add_scalar(norms, eps * eps);
            let powered = tape.powf(shifted, q / 2.0);
            tape.sum(powered)
        }
        Norm::L1 => {
            // sum_arcs sum_k w^(q/2) (|g_jk - g_ik| + eps)^q
            let a = tape.abs(diff);
            let shifted = tape.add_scalar(a, eps);
            let powered = tape.powf(shifted, q);
            let scale: Vec<f64> = index.weights.iter().map(|w| w.powf(q / 2.0)).collect();
            let weighted = tape.scale_rows(powered, scale.into());
            tape.sum(weighted)
        }
    };
    let reg = tape.scale(reg, params.lambda / q);
    tape.add(fidelity, reg)
}

fn finish(model: &GnnModel, tape: &Tape, params: &[Var], root: Var) -> LossAndGrad {
    let mut grads = tape.backward(root);
    let tensors = model.tensors();
    LossAndGrad {
        loss: tape.scalar(root),
        grads: params
            .iter()
            .zip(tensors)
            .map(|(&v, (_, t))| grads.take_or_zeros(v, t))
            .collect(),
    }
}

/// `J_eps(G(f0), f0)` and its gradient with respect to every parameter.
pub fn loss_unsupervised(
    model: &GnnModel,
    index: &GraphIndex,
    f0: &Signal,
    params: &ProblemParams,
) -> Result<LossAndGrad> {
    params.validate()?;
    if !(params.epsilon > 0.0) {
        return Err(Error::InvalidInput(
            "unsupervised loss needs epsilon > 0".into(),
        ));
    }
    if model.out_dim() != model.in_dim() {
        return Err(Error::InvalidInput(
            "unsupervised loss compares the output with f0; dimensions must agree".into(),
        ));
    }
    f0.check_shape(index.vertices, model.in_dim())?;
    let mut tape = Tape::new();
    let p = model.record_params(&mut tape);
    let x = tape.leaf(signal_to_array(f0));
    let out = model.forward_tape(&mut tape, &p, index, x);
    let root = record_objective_eps(&mut tape, index, out, x, params);
    Ok(finish(model, &tape, &p.0, root))
}

/// `|G(f0) - target|^2` and its parameter gradient.
pub fn loss_distill(
    model: &GnnModel,
    index: &GraphIndex,
    f0: &Signal,
    target: &Signal,
) -> Result<LossAndGrad> {
    f0.check_shape(index.vertices, model.in_dim())?;
    target.check_shape(index.vertices, model.out_dim())?;
    let mut tape = Tape::new();
    let p = model.record_params(&mut tape);
    let x = tape.leaf(signal_to_array(f0));
    let out = model.forward_tape(&mut tape, &p, index, x);
    let t = tape.leaf(signal_to_array(target));
    let r = tape.sub(out, t);
    let sq = tape.square(r);
    let root = tape.sum(sq);
    Ok(finish(model, &tape, &p.0, root))
}
