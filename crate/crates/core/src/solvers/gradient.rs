//! Gradient baselines on the smoothed objective `J_eps`, all with a fixed
//! learning rate and no line search.

use std::collections::VecDeque;

use super::trace::Tracer;
use super::{check_input, SolveTrace, SolverConfig, SolverKind};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::operators::grad_objective_eps;
use crate::signal::Signal;

/// Produces the next iterate from the current one and its gradient.
trait Stepper {
    fn step(&mut self, f: &mut Signal, grad: &Signal);
}

struct Descent {
    lr: f64,
}

impl Stepper for Descent {
    fn step(&mut self, f: &mut Signal, grad: &Signal) {
        for (x, g) in f.as_mut_slice().iter_mut().zip(grad.as_slice()) {
            *x -= self.lr * g;
        }
    }
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Stepper for Adam {
    fn step(&mut self, f: &mut Signal, grad: &Signal) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((x, &g), m), v) in f
            .as_mut_slice()
            .iter_mut()
            .zip(grad.as_slice())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *x -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

struct CurvaturePair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

struct Lbfgs {
    lr: f64,
    capacity: usize,
    history: VecDeque<CurvaturePair>,
    previous: Option<(Vec<f64>, Vec<f64>)>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Lbfgs {
    /// Two-loop recursion: returns `H grad` for the implicit inverse-Hessian estimate.
    fn apply_inverse_hessian(&self, grad: &[f64]) -> Vec<f64> {
        let mut q = grad.to_vec();
        let mut alphas = Vec::with_capacity(self.history.len());
        for pair in self.history.iter().rev() {
            let alpha = pair.rho * dot(&pair.s, &q);
            for (qi, yi) in q.iter_mut().zip(&pair.y) {
                *qi -= alpha * yi;
            }
            alphas.push(alpha);
        }
        if let Some(last) = self.history.back() {
            let scale = dot(&last.s, &last.y) / dot(&last.y, &last.y);
            for qi in &mut q {
                *qi *= scale;
            }
        }
        for (pair, alpha) in self.history.iter().zip(alphas.into_iter().rev()) {
            let beta = pair.rho * dot(&pair.y, &q);
            for (qi, si) in q.iter_mut().zip(&pair.s) {
                *qi += (alpha - beta) * si;
            }
        }
        q
    }
}

impl Stepper for Lbfgs {
    fn step(&mut self, f: &mut Signal, grad: &Signal) {
        let x = f.as_slice();
        let g = grad.as_slice();
        if let Some((x_prev, g_prev)) = self.previous.take() {
            let s: Vec<f64> = x.iter().zip(&x_prev).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g.iter().zip(&g_prev).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            // Pairs without positive curvature would break the estimate; skip them.
            if sy > 0.0 && sy.is_finite() {
                if self.history.len() == self.capacity {
                    self.history.pop_front();
                }
                self.history.push_back(CurvaturePair { s, y, rho: 1.0 / sy });
            }
        }
        self.previous = Some((x.to_vec(), g.to_vec()));
        let direction = self.apply_inverse_hessian(g);
        for (xi, di) in f.as_mut_slice().iter_mut().zip(direction) {
            *xi -= self.lr * di;
        }
    }
}

fn descend(
    graph: &Graph,
    f0: &Signal,
    config: &SolverConfig,
    kind: SolverKind,
    mut stepper: impl Stepper,
) -> Result<(Signal, SolveTrace)> {
    check_input(graph, f0, config)?;
    let params = config.problem;
    let mut f = f0.clone();
    let mut tracer = Tracer::start(kind.name(), graph, f0, params, config.trace_every);
    tracer.record(0, &f)?;

    for t in 1..=config.max_iters {
        let grad = grad_objective_eps(graph, &f, f0, &params)?;
        stepper.step(&mut f, &grad);
        let finite = f.is_finite();
        if (!finite || tracer.due(t, config.max_iters)) && !(tracer.record(t, &f)? && finite) {
            return Err(Error::Divergence {
                solver: kind.name().into(),
                iteration: t,
                trace: Box::new(tracer.finish()),
            });
        }
    }
    Ok((f, tracer.finish()))
}

/// Fixed-step gradient descent `f <- f - lr grad J_eps(f)`.
pub fn solve_gd(graph: &Graph, f0: &Signal, config: &SolverConfig) -> Result<(Signal, SolveTrace)> {
    let stepper = Descent {
        lr: config.learning_rate,
    };
    descend(graph, f0, config, SolverKind::Gd, stepper)
}

/// Adam with bias-corrected moments and a fixed learning rate.
pub fn solve_adam(
    graph: &Graph,
    f0: &Signal,
    config: &SolverConfig,
) -> Result<(Signal, SolveTrace)> {
    let n = f0.as_slice().len();
    let stepper = Adam {
        lr: config.learning_rate,
        beta1: config.adam_beta1,
        beta2: config.adam_beta2,
        eps: config.adam_eps,
        t: 0,
        m: vec![0.0; n],
        v: vec![0.0; n],
    };
    descend(graph, f0, config, SolverKind::Adam, stepper)
}

/// L-BFGS direction from the last `lbfgs_history` curvature pairs, applied
/// with the fixed step `learning_rate`.
pub fn solve_lbfgs(
    graph: &Graph,
    f0: &Signal,
    config: &SolverConfig,
) -> Result<(Signal, SolveTrace)> {
    let stepper = Lbfgs {
        lr: config.learning_rate,
        capacity: config.lbfgs_history,
        history: VecDeque::with_capacity(config.lbfgs_history),
        previous: None,
    };
    descend(graph, f0, config, SolverKind::Lbfgs, stepper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{Norm, ProblemParams};

    fn graph() -> Graph {
        Graph::from_edges(3, &[(0, 1, 1.0), (1, 2, 0.5), (0, 2, 0.25)]).unwrap()
    }

    fn f0() -> Signal {
        Signal::new(vec![0.0, 1.0, 0.5, -0.5, 2.0, 0.25], 2).unwrap()
    }

    fn config(kind: SolverKind, lambda: f64, lr: f64, iters: usize) -> SolverConfig {
        SolverConfig::new(kind, ProblemParams::new(Norm::L2, 1.0, lambda, 1e-3).unwrap())
            .with_iters(iters)
            .with_learning_rate(lr)
    }

    #[test]
    fn gd_unit_step_without_regularization_lands_on_f0() {
        let start = f0();
        let mut stepper = Descent { lr: 1.0 };
        let mut f = Signal::new(vec![3.0, -1.0, 0.0, 0.0, 1.0, 1.0], 2).unwrap();
        let grad = grad_objective_eps(
            &graph(),
            &f,
            &start,
            &ProblemParams::new(Norm::L2, 1.0, 0.0, 1e-3).unwrap(),
        )
        .unwrap();
        stepper.step(&mut f, &grad);
        assert_eq!(f, start);

        let (f, _) = solve_gd(&graph(), &start, &config(SolverKind::Gd, 0.0, 1.0, 3)).unwrap();
        assert_eq!(f, start);
    }

    #[test]
    fn adam_first_step_moves_each_coordinate_by_lr() {
        let cfg = config(SolverKind::Adam, 0.4, 1e-2, 1);
        let start = f0();
        let grad = grad_objective_eps(&graph(), &start, &start, &cfg.problem).unwrap();
        let (f, _) = solve_adam(&graph(), &start, &cfg).unwrap();
        for ((x, x0), g) in f.as_slice().iter().zip(start.as_slice()).zip(grad.as_slice()) {
            let expected = 1e-2 * g.abs() / (g.abs() + 1e-8);
            assert!(((x - x0).abs() - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn lbfgs_with_empty_history_is_a_gd_step() {
        let start = f0();
        let (a, _) = solve_lbfgs(&graph(), &start, &config(SolverKind::Lbfgs, 0.3, 0.05, 1)).unwrap();
        let (b, _) = solve_gd(&graph(), &start, &config(SolverKind::Gd, 0.3, 0.05, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn two_loop_recursion_inverts_a_quadratic() {
        // For f(x) = 1/2 x^T diag(1, 4) x, exact pairs give H grad = diag(1, 1/4) grad.
        let mut lbfgs = Lbfgs {
            lr: 1.0,
            capacity: 5,
            history: VecDeque::new(),
            previous: None,
        };
        for s in [[1.0, 0.0], [0.0, 1.0]] {
            let y = vec![s[0], 4.0 * s[1]];
            let rho = 1.0 / dot(&s, &y);
            lbfgs.history.push_back(CurvaturePair { s: s.to_vec(), y, rho });
        }
        let h = lbfgs.apply_inverse_hessian(&[2.0, 8.0]);
        assert!((h[0] - 2.0).abs() < 1e-12 && (h[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn baselines_decrease_the_objective() {
        for (kind, lr) in [
            (SolverKind::Gd, 0.05),
            (SolverKind::Adam, 0.01),
            (SolverKind::Lbfgs, 0.05),
        ] {
            let cfg = config(kind, 0.3, lr, 500);
            let (_, trace) = super::super::solve(&graph(), &f0(), &cfg).unwrap();
            let first = trace.records.first().unwrap().objective_eps;
            let last = trace.last().unwrap().objective_eps;
            assert!(last < first, "{kind}: {first} -> {last}");
        }
    }

    #[test]
    fn divergence_keeps_the_partial_trace() {
        let cfg = config(SolverKind::Gd, 1.0, 1e4, 1000).with_trace_every(10);
        match solve_gd(&graph(), &f0(), &cfg) {
            Err(Error::Divergence { iteration, trace, .. }) => {
                assert!(iteration < 1000);
                assert!(!trace.records.is_empty());
                assert_eq!(trace.records[0].iteration, 0);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
