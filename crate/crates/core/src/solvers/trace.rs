use std::io::Write;
use std::time::{Duration, Instant};

use crate::error::Result;
use crate::graph::Graph;
use crate::operators::{objective, objective_eps, ProblemParams};
use crate::signal::Signal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Exact objective `J`.
    pub objective: f64,
    /// Smoothed objective `J_eps` at the configured epsilon.
    pub objective_eps: f64,
    /// Solver time in milliseconds, excluding the time spent logging.
    pub time_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub solver: String,
    pub records: Vec<TraceRecord>,
}

impl SolveTrace {
    pub const CSV_HEADER: &'static str = "iter,J,J_eps,time_ms";

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.last().map(|r| r.objective)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{:.3}",
                r.iteration, r.objective, r.objective_eps, r.time_ms
            )?;
        }
        Ok(())
    }
}

/// Logs objectives every `every` iterations while keeping the logging cost
/// out of the reported solver time.
pub(crate) struct Tracer<'a> {
    graph: &'a Graph,
    f0: &'a Signal,
    params: ProblemParams,
    every: usize,
    elapsed: Duration,
    running_since: Instant,
    trace: SolveTrace,
}

impl<'a> Tracer<'a> {
    pub fn start(
        solver: &str,
        graph: &'a Graph,
        f0: &'a Signal,
        params: ProblemParams,
        every: usize,
    ) -> Self {
        Self {
            graph,
            f0,
            params,
            every: every.max(1),
            elapsed: Duration::ZERO,
            running_since: Instant::now(),
            trace: SolveTrace {
                solver: solver.to_owned(),
                records: Vec::new(),
            },
        }
    }

    pub fn due(&self, iteration: usize, last: usize) -> bool {
        iteration % self.every == 0 || iteration == last
    }

    /// Records `f` as the iterate after `iteration` steps. Returns whether the
    /// objective is finite.
    pub fn record(&mut self, iteration: usize, f: &Signal) -> Result<bool> {
        self.elapsed += self.running_since.elapsed();
        let j = objective(self.graph, f, self.f0, &self.params)?;
        let j_eps = objective_eps(self.graph, f, self.f0, &self.params)?;
        self.trace.records.push(TraceRecord {
            iteration,
            objective: j,
            objective_eps: j_eps,
            time_ms: self.elapsed.as_secs_f64() * 1e3,
        });
        self.running_since = Instant::now();
        Ok(j.is_finite() && j_eps.is_finite())
    }

    pub fn finish(self) -> SolveTrace {
        self.trace
    }
}
