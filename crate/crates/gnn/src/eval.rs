//! Comparison of network outputs against the reference solver.

use std::io::Write;
use std::time::Instant;

use graphvar_core::operators::objective;
use graphvar_core::{ProblemParams, SolverConfig};

use crate::data::{attach_solver_target, Instance};
use crate::error::Result;
use crate::model::GnnModel;

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceEval {
    pub name: String,
    pub vertices: usize,
    /// Exact objective of the network output.
    pub j_gnn: f64,
    /// Exact objective of the reference solver output.
    pub j_ref: f64,
    /// `100 (j_gnn - j_ref) / j_ref`.
    pub gap_pct: f64,
    /// `100 |G - F| / |F|`.
    pub signal_err_pct: f64,
    pub gnn_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<InstanceEval>,
    pub mean_gap_pct: f64,
    pub mean_signal_err_pct: f64,
}

pub const EVAL_CSV_HEADER: &str = "name,vertices,J_gnn,J_ref,gap_pct,signal_err_pct,gnn_ms";

impl EvalReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{EVAL_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{:e},{:e},{:e},{:e},{:.3}",
                r.name, r.vertices, r.j_gnn, r.j_ref, r.gap_pct, r.signal_err_pct, r.gnn_ms
            )?;
        }
        Ok(())
    }
}

/// Mean relative objective gap (in percent) of the network against the
/// reference solver. Instances without a stored target are solved with
/// `reference` first.
pub fn evaluate_relative_error(
    model: &GnnModel,
    instances: &mut [Instance],
    reference: &SolverConfig,
) -> Result<EvalReport> {
    let params: ProblemParams = reference.problem;
    let mut rows = Vec::with_capacity(instances.len());
    for inst in instances.iter_mut() {
        if inst.target.is_none() {
            attach_solver_target(inst, reference)?;
        }
        let target = inst.target.as_ref().expect("attached");
        let start = Instant::now();
        let out = model.forward(&inst.index, &inst.f0)?;
        let gnn_ms = start.elapsed().as_secs_f64() * 1e3;
        let j_gnn = objective(&inst.graph, &out, &inst.f0, &params)?;
        let j_ref = objective(&inst.graph, target, &inst.f0, &params)?;
        rows.push(InstanceEval {
            name: inst.name.clone(),
            vertices: inst.graph.vertex_count(),
            j_gnn,
            j_ref,
            gap_pct: 100.0 * (j_gnn - j_ref) / j_ref,
            signal_err_pct: 100.0 * (out.distance_sq(target) / target.norm_sq()).sqrt(),
            gnn_ms,
        });
    }
    let n = rows.len().max(1) as f64;
    Ok(EvalReport {
        mean_gap_pct: rows.iter().map(|r| r.gap_pct).sum::<f64>() / n,
        mean_signal_err_pct: rows.iter().map(|r| r.signal_err_pct).sum::<f64>() / n,
        rows,
    })
}
