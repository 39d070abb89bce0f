//! Gauss-Jacobi iterated filter.
//!
//! Each sweep recomputes the coefficients `gamma` from the current iterate,
//! then updates every vertex independently:
//!
//! ```text
//! f_i <- (f0_i + lambda sum_j gamma_ij f_j) / (1 + lambda sum_j gamma_ij)
//! ```

use super::trace::Tracer;
use super::{check_input, SolveTrace, SolverConfig, SolverKind};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::operators::gamma;
use crate::signal::Signal;

/// Runs `config.max_iters` sweeps starting from `f0`.
pub fn solve_gj(graph: &Graph, f0: &Signal, config: &SolverConfig) -> Result<(Signal, SolveTrace)> {
    check_input(graph, f0, config)?;
    let params = config.problem;
    let lambda = params.lambda;
    let d = f0.dim();
    let cols = graph.col_indices();

    let mut f = f0.clone();
    let mut next = f0.clone();
    let mut tracer = Tracer::start(SolverKind::Gj.name(), graph, f0, params, config.trace_every);
    tracer.record(0, &f)?;

    for t in 1..=config.max_iters {
        let gamma = gamma(graph, &f, &params)?;
        for i in 0..graph.vertex_count() {
            let arcs = graph.arcs_of(i);
            let fi0 = f0.row(i);
            let out = next.row_mut(i);
            for k in 0..d {
                let mut num = 0.0;
                let mut den = 0.0;
                for a in arcs.clone() {
                    let c = gamma.get(a, k);
                    num += c * f.as_slice()[cols[a] * d + k];
                    den += c;
                }
                out[k] = (fi0[k] + lambda * num) / (1.0 + lambda * den);
            }
        }
        std::mem::swap(&mut f, &mut next);

        if tracer.due(t, config.max_iters) && !tracer.record(t, &f)? {
            return Err(Error::Divergence {
                solver: SolverKind::Gj.name().into(),
                iteration: t,
                trace: Box::new(tracer.finish()),
            });
        }
    }
    Ok((f, tracer.finish()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{grad_objective_eps, Norm, ProblemParams};

    fn config(norm: Norm, q: f64, lambda: f64, eps: f64, iters: usize) -> SolverConfig {
        SolverConfig::new(SolverKind::Gj, ProblemParams::new(norm, q, lambda, eps).unwrap())
            .with_iters(iters)
    }

    #[test]
    fn zero_lambda_keeps_f0() {
        let g = Graph::from_edges(3, &[(0, 1, 1.0), (1, 2, 0.5)]).unwrap();
        let f0 = Signal::new(vec![0.3, -1.0, 2.5], 1).unwrap();
        let (f, _) = solve_gj(&g, &f0, &config(Norm::L2, 1.0, 0.0, 1e-8, 7)).unwrap();
        assert_eq!(f, f0);
    }

    #[test]
    fn single_sweep_two_nodes() {
        // p = 1, q = 2 gives gamma = 2 w; node 0: (0 + 0.5 * 2 * 1) / (1 + 0.5 * 2).
        let g = Graph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let f0 = Signal::new(vec![0.0, 1.0], 1).unwrap();
        let (f, trace) = solve_gj(&g, &f0, &config(Norm::L1, 2.0, 0.5, 0.0, 1)).unwrap();
        assert_eq!(f.as_slice(), &[0.5, 0.5]);
        assert_eq!(trace.records.len(), 2);
    }

    #[test]
    fn constant_input_is_a_fixed_point() {
        let g = Graph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let f0 = Signal::new(vec![0.2, 0.4, 0.2, 0.4, 0.2, 0.4], 2).unwrap();
        let cfg = config(Norm::L2, 1.0, 0.7, 1e-8, 10).with_trace_every(1);
        let (f, trace) = solve_gj(&g, &f0, &cfg).unwrap();
        // (c + l s c) / (1 + l s) is c up to rounding.
        assert!(f.max_abs_diff(&f0) < 1e-15);
        let floor = 0.7 * 3.0 * 1e-8;
        for r in &trace.records {
            assert!((r.objective_eps - floor).abs() < 1e-20);
        }
    }

    #[test]
    fn singular_coefficients_propagate() {
        let g = Graph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let f0 = Signal::new(vec![1.0, 1.0], 1).unwrap();
        assert!(matches!(
            solve_gj(&g, &f0, &config(Norm::L2, 1.0, 0.5, 0.0, 3)),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn converged_iterate_is_stationary_for_tikhonov() {
        let g = Graph::from_edges(4, &[(0, 1, 1.0), (1, 2, 0.5), (2, 3, 2.0), (3, 0, 1.0)])
            .unwrap();
        let f0 = Signal::new(vec![0.0, 1.0, -0.5, 2.0], 1).unwrap();
        let cfg = config(Norm::L2, 2.0, 0.3, 1e-8, 2000);
        let (f, _) = solve_gj(&g, &f0, &cfg).unwrap();
        let r = grad_objective_eps(&g, &f, &f0, &cfg.problem).unwrap();
        assert!(r.norm_sq().sqrt() < 1e-12);
    }
}
