//! Iterative solvers for the non-local regularization problem.
//!
//! Two message-passing solvers work directly on the graph structure:
//! Gauss-Jacobi (any `q`, on the smoothed objective) and primal-dual
//! (`q = 1`, exact objective). Three gradient baselines (fixed-step gradient
//! descent, Adam, L-BFGS) descend the smoothed objective with its analytic
//! gradient.

mod gauss_jacobi;
mod gradient;
mod primal_dual;
mod trace;

use std::fmt;
use std::str::FromStr;

pub use gauss_jacobi::solve_gj;
pub use gradient::{solve_adam, solve_gd, solve_lbfgs};
pub use primal_dual::{pd_step_sizes, solve_pd};
pub use trace::{SolveTrace, TraceRecord};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::operators::ProblemParams;
use crate::signal::Signal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolverKind {
    Gj,
    Pd,
    Gd,
    Adam,
    Lbfgs,
}

impl SolverKind {
    pub const ALL: [SolverKind; 5] = [
        SolverKind::Gj,
        SolverKind::Pd,
        SolverKind::Gd,
        SolverKind::Adam,
        SolverKind::Lbfgs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Gj => "gj",
            SolverKind::Pd => "pd",
            SolverKind::Gd => "gd",
            SolverKind::Adam => "adam",
            SolverKind::Lbfgs => "lbfgs",
        }
    }

    pub fn is_gradient_based(self) -> bool {
        matches!(self, SolverKind::Gd | SolverKind::Adam | SolverKind::Lbfgs)
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown solver '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub problem: ProblemParams,
    pub max_iters: usize,
    /// Fixed step for gd / adam / lbfgs.
    pub learning_rate: f64,
    pub pd_theta: f64,
    /// Multiplies the default primal-dual step `tau = beta`.
    pub pd_step_scale: f64,
    pub lbfgs_history: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub trace_every: usize,
}

impl SolverConfig {
    pub fn new(kind: SolverKind, problem: ProblemParams) -> Self {
        Self {
            kind,
            problem,
            max_iters: 20_000,
            learning_rate: 1e-3,
            pd_theta: 1.0,
            pd_step_scale: 1.0,
            lbfgs_history: 10,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            trace_every: 100,
        }
    }

    pub fn with_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_learning_rate(mut self, learning_rate: f64) -> Self {
        self.learning_rate = learning_rate;
        self
    }

    pub fn with_trace_every(mut self, trace_every: usize) -> Self {
        self.trace_every = trace_every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if self.kind.is_gradient_based() {
            if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "learning_rate = {} must be > 0",
                    self.learning_rate
                )));
            }
            if !(self.problem.epsilon > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{} descends the smoothed objective and needs epsilon > 0",
                    self.kind
                )));
            }
        }
        match self.kind {
            SolverKind::Pd => {
                if self.problem.q != 1.0 {
                    return Err(Error::Unsupported(format!(
                        "primal-dual solves q = 1 only (got q = {})",
                        self.problem.q
                    )));
                }
                if !(0.0..=1.0).contains(&self.pd_theta) {
                    return Err(Error::InvalidParameter(format!(
                        "pd_theta = {} must lie in [0, 1]",
                        self.pd_theta
                    )));
                }
                if !(self.pd_step_scale > 0.0) {
                    return Err(Error::InvalidParameter("pd_step_scale must be > 0".into()));
                }
            }
            SolverKind::Adam => {
                if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2)
                {
                    return Err(Error::InvalidParameter("adam betas must lie in [0, 1)".into()));
                }
            }
            SolverKind::Lbfgs if self.lbfgs_history == 0 => {
                return Err(Error::InvalidParameter("lbfgs_history must be >= 1".into()));
            }
            _ => {}
        }
        Ok(())
    }
}

/// Dispatches on `config.kind`.
pub fn solve(graph: &Graph, f0: &Signal, config: &SolverConfig) -> Result<(Signal, SolveTrace)> {
    match config.kind {
        SolverKind::Gj => solve_gj(graph, f0, config),
        SolverKind::Pd => solve_pd(graph, f0, config),
        SolverKind::Gd => solve_gd(graph, f0, config),
        SolverKind::Adam => solve_adam(graph, f0, config),
        SolverKind::Lbfgs => solve_lbfgs(graph, f0, config),
    }
}

#[derive(Debug)]
pub struct BenchmarkEntry {
    pub kind: SolverKind,
    pub outcome: Result<(Signal, SolveTrace)>,
}

/// Runs every configuration on the same instance. A failing solver does not
/// stop the others; its error is kept in its entry.
pub fn run_benchmark(
    graph: &Graph,
    f0: &Signal,
    configs: &[SolverConfig],
) -> Result<Vec<BenchmarkEntry>> {
    if let Some(first) = configs.first() {
        let (a, b) = (first.problem, configs.iter().map(|c| c.problem));
        for p in b {
            if (p.norm, p.q, p.lambda) != (a.norm, a.q, a.lambda) {
                return Err(Error::InvalidParameter(
                    "benchmark configurations must share (p, q, lambda)".into(),
                ));
            }
        }
    }
    Ok(configs
        .iter()
        .map(|config| BenchmarkEntry {
            kind: config.kind,
            outcome: solve(graph, f0, config),
        })
        .collect())
}

fn check_input(graph: &Graph, f0: &Signal, config: &SolverConfig) -> Result<()> {
    config.validate()?;
    if f0.vertex_count() != graph.vertex_count() {
        return Err(Error::DimensionMismatch {
            expected: graph.vertex_count(),
            found: f0.vertex_count(),
        });
    }
    if !f0.is_finite() {
        return Err(Error::InvalidParameter("f0 has non-finite entries".into()));
    }
    Ok(())
}
