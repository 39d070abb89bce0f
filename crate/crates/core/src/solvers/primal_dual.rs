//! First-order primal-dual splitting for the exact `q = 1` problem.
//!
//! With `K = grad`, `A = |.|_{1,p}` and `B = |. - f0|^2 / (2 lambda)`:
//!
//! ```text
//! g    <- Proj_{B_{inf,p'}}(g + beta K fbar)
//! f'   <- Prox_{tau B}(f - tau K* g)
//! fbar <- f' + theta (f' - f)
//! ```
//!
//! Starting point `f = fbar = f0`, `g = 0`.

use super::trace::Tracer;
use super::{check_input, SolveTrace, SolverConfig, SolverKind};
use crate::error::{Error, Result};
use crate::graph::{max_weighted_degree, Graph};
use crate::operators::{adjoint_into, grad_into, project_ball_in_place};
use crate::signal::{EdgeField, Signal};

/// Step sizes `(tau, beta)` for a graph, scaled by `scale`.
///
/// Uses `|K|^2 <= 4 max_i sum_j w_ij` and the default
/// `tau = beta = (4 max_i sum_j w_ij)^-1`, capped so that `tau beta |K|^2 < 1`
/// still holds on lightly weighted graphs. Fails if `scale` breaks the bound.
pub fn pd_step_sizes(graph: &Graph, scale: f64) -> Result<(f64, f64)> {
    if graph.arc_count() == 0 {
        return Err(Error::InvalidParameter(
            "primal-dual needs a graph with at least one arc".into(),
        ));
    }
    let norm_bound = 4.0 * max_weighted_degree(graph);
    if norm_bound == 0.0 {
        // K = 0: any step is admissible.
        return Ok((scale, scale));
    }
    let base = (1.0 / norm_bound).min(0.99 / norm_bound.sqrt());
    let step = scale * base;
    if step * step * norm_bound >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "pd step {step} violates tau * beta * |K|^2 < 1 (|K|^2 <= {norm_bound})"
        )));
    }
    Ok((step, step))
}

pub fn solve_pd(graph: &Graph, f0: &Signal, config: &SolverConfig) -> Result<(Signal, SolveTrace)> {
    check_input(graph, f0, config)?;
    let (tau, beta) = pd_step_sizes(graph, config.pd_step_scale)?;
    let params = config.problem;
    let (lambda, theta) = (params.lambda, config.pd_theta);
    let d = f0.dim();

    let mut f = f0.clone();
    let mut f_bar = f0.clone();
    let mut f_next = f0.clone();
    let mut g = EdgeField::zeros(graph.arc_count(), d);
    let mut k_f = EdgeField::zeros(graph.arc_count(), d);
    let mut k_adj = Signal::zeros(graph.vertex_count(), d);

    let mut tracer = Tracer::start(SolverKind::Pd.name(), graph, f0, params, config.trace_every);
    tracer.record(0, &f)?;

    let denom = lambda + tau;
    for t in 1..=config.max_iters {
        grad_into(graph, &f_bar, &mut k_f);
        for (gv, kv) in g.as_mut_slice().iter_mut().zip(k_f.as_slice()) {
            *gv += beta * kv;
        }
        project_ball_in_place(graph, &mut g, params.norm);

        adjoint_into(graph, &g, &mut k_adj);
        for (((out, &x), &x0), &ka) in f_next
            .as_mut_slice()
            .iter_mut()
            .zip(f.as_slice())
            .zip(f0.as_slice())
            .zip(k_adj.as_slice())
        {
            *out = (lambda * (x - tau * ka) + tau * x0) / denom;
        }
        for ((fb, &xn), &x) in f_bar
            .as_mut_slice()
            .iter_mut()
            .zip(f_next.as_slice())
            .zip(f.as_slice())
        {
            *fb = xn + theta * (xn - x);
        }
        std::mem::swap(&mut f, &mut f_next);

        if tracer.due(t, config.max_iters) && !tracer.record(t, &f)? {
            return Err(Error::Divergence {
                solver: SolverKind::Pd.name().into(),
                iteration: t,
                trace: Box::new(tracer.finish()),
            });
        }
    }
    Ok((f, tracer.finish()))
}
