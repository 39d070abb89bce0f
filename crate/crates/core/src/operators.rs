//! Weighted difference operator, its adjoint, and the non-local objective.
//!
//! For a graph with weights `w` and a signal `f`:
//!
//! ```text
//! (grad f)_{ij}   = sqrt(w_ij) (f_j - f_i)                 per arc
//! (grad* g)_i     = sum_j sqrt(w_ij) (g_ji - g_ij)         per vertex
//! J(f)            = 1/2 |f - f0|^2 + lambda/q R(f)
//! R(f)   (p = 2)  = sum_i |(grad f)_i.|_2^q
//! R(f)   (p = 1)  = sum_{ij,k} |(grad f)_ijk|^q
//! R_eps  (p = 2)  = sum_i (|(grad f)_i.|^2 + eps^2)^(q/2)
//! R_eps  (p = 1)  = sum_{ij,k} w_ij^(q/2) (|f_ik - f_jk| + eps)^q
//! ```
//!
//! `(grad f)_i.` collects every arc leaving `i` and every channel. All
//! per-vertex reductions run in CSR order so results are reproducible.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::signal::{EdgeField, Signal};

/// Inner norm of the regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Norm {
    /// Anisotropic: every arc difference penalized separately.
    L1,
    /// Isotropic: arc differences grouped per vertex.
    L2,
}

impl Norm {
    pub fn from_p(p: f64) -> Result<Self> {
        if p == 1.0 {
            Ok(Norm::L1)
        } else if p == 2.0 {
            Ok(Norm::L2)
        } else {
            Err(Error::Unsupported(format!("p = {p}; only p = 1 and p = 2 are implemented")))
        }
    }

    pub fn p(self) -> f64 {
        match self {
            Norm::L1 => 1.0,
            Norm::L2 => 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    pub norm: Norm,
    pub q: f64,
    pub lambda: f64,
    pub epsilon: f64,
}

impl ProblemParams {
    pub fn new(norm: Norm, q: f64, lambda: f64, epsilon: f64) -> Result<Self> {
        let params = Self {
            norm,
            q,
            lambda,
            epsilon,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::InvalidParameter(format!("q = {} must be > 0", self.q)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda = {} must be >= 0",
                self.lambda
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon = {} must be >= 0",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Self { epsilon, ..self }
    }
}

fn check_signal(graph: &Graph, f: &Signal) -> Result<()> {
    if f.vertex_count() != graph.vertex_count() {
        return Err(Error::DimensionMismatch {
            expected: graph.vertex_count(),
            found: f.vertex_count(),
        });
    }
    Ok(())
}

fn check_field(graph: &Graph, g: &EdgeField) -> Result<()> {
    if g.arc_count() != graph.arc_count() {
        return Err(Error::DimensionMismatch {
            expected: graph.arc_count(),
            found: g.arc_count(),
        });
    }
    Ok(())
}

/// `base^exponent`, rejecting a zero base under a negative exponent.
fn checked_pow(base: f64, exponent: f64, location: impl FnOnce() -> String) -> Result<f64> {
    if base == 0.0 && exponent < 0.0 {
        return Err(Error::Singular {
            location: location(),
            exponent,
        });
    }
    Ok(base.powf(exponent))
}

pub fn grad(graph: &Graph, f: &Signal) -> Result<EdgeField> {
    check_signal(graph, f)?;
    let mut out = EdgeField::zeros(graph.arc_count(), f.dim());
    grad_into(graph, f, &mut out);
    Ok(out)
}

/// Shape-unchecked [`grad`] writing into a preallocated field.
pub(crate) fn grad_into(graph: &Graph, f: &Signal, out: &mut EdgeField) {
    let d = f.dim();
    let fv = f.as_slice();
    let sw = graph.sqrt_weights();
    let out = out.as_mut_slice();
    for (a, (&i, &j)) in graph.arc_sources().iter().zip(graph.col_indices()).enumerate() {
        let s = sw[a];
        for k in 0..d {
            out[a * d + k] = s * (fv[j * d + k] - fv[i * d + k]);
        }
    }
}

pub fn adjoint(graph: &Graph, g: &EdgeField) -> Result<Signal> {
    check_field(graph, g)?;
    let mut out = Signal::zeros(graph.vertex_count(), g.dim());
    adjoint_into(graph, g, &mut out);
    Ok(out)
}

pub(crate) fn adjoint_into(graph: &Graph, g: &EdgeField, out: &mut Signal) {
    let d = g.dim();
    let gv = g.as_slice();
    let sw = graph.sqrt_weights();
    let rev = graph.reverse_arc();
    for i in 0..graph.vertex_count() {
        let row = out.row_mut(i);
        row.fill(0.0);
        for a in graph.arcs_of(i) {
            let r = rev[a];
            for k in 0..d {
                row[k] += sw[a] * (gv[r * d + k] - gv[a * d + k]);
            }
        }
    }
}

/// `sum_i |g_i.|_p`, the inner norm running over the arcs leaving `i` and all channels.
pub fn composed_norm(graph: &Graph, g: &EdgeField, norm: Norm) -> Result<f64> {
    check_field(graph, g)?;
    let d = g.dim();
    let gv = g.as_slice();
    let mut total = 0.0;
    for i in 0..graph.vertex_count() {
        let arcs = graph.arcs_of(i);
        let row = &gv[arcs.start * d..arcs.end * d];
        total += match norm {
            Norm::L1 => row.iter().map(|x| x.abs()).sum::<f64>(),
            Norm::L2 => row.iter().map(|x| x * x).sum::<f64>().sqrt(),
        };
    }
    Ok(total)
}

/// Per-vertex squared norms `|(grad f)_i.|^2`, computed without materializing `grad f`.
fn vertex_grad_norms_sq(graph: &Graph, f: &Signal) -> Vec<f64> {
    let d = f.dim();
    let fv = f.as_slice();
    let cols = graph.col_indices();
    let w = graph.weights();
    (0..graph.vertex_count())
        .map(|i| {
            let mut acc = 0.0;
            for a in graph.arcs_of(i) {
                let j = cols[a];
                let mut diff = 0.0;
                for k in 0..d {
                    let t = fv[j * d + k] - fv[i * d + k];
                    diff += t * t;
                }
                acc += w[a] * diff;
            }
            acc
        })
        .collect()
}

fn fidelity(f: &Signal, f0: &Signal) -> f64 {
    0.5 * f.distance_sq(f0)
}

fn check_pair(graph: &Graph, f: &Signal, f0: &Signal) -> Result<()> {
    check_signal(graph, f)?;
    f0.check_shape(f.vertex_count(), f.dim())
}

/// Exact (non-smoothed) regularizer `R(f)`; `epsilon` is ignored.
pub fn regularizer(graph: &Graph, f: &Signal, params: &ProblemParams) -> Result<f64> {
    params.validate()?;
    check_signal(graph, f)?;
    let q = params.q;
    Ok(match params.norm {
        Norm::L2 => vertex_grad_norms_sq(graph, f)
            .into_iter()
            .map(|n2| n2.sqrt().powf(q))
            .sum(),
        Norm::L1 => {
            let g = grad(graph, f)?;
            g.as_slice().iter().map(|x| x.abs().powf(q)).sum()
        }
    })
}

/// `J(f) = 1/2 |f - f0|^2 + lambda/q R(f)`; ignores `params.epsilon`.
pub fn objective(graph: &Graph, f: &Signal, f0: &Signal, params: &ProblemParams) -> Result<f64> {
    check_pair(graph, f, f0)?;
    let r = regularizer(graph, f, params)?;
    Ok(fidelity(f, f0) + params.lambda / params.q * r)
}

/// Smoothed regularizer `R_eps(f)`.
pub fn regularizer_eps(graph: &Graph, f: &Signal, params: &ProblemParams) -> Result<f64> {
    params.validate()?;
    check_signal(graph, f)?;
    let (q, eps) = (params.q, params.epsilon);
    Ok(match params.norm {
        Norm::L2 => vertex_grad_norms_sq(graph, f)
            .into_iter()
            .map(|n2| (n2 + eps * eps).powf(q / 2.0))
            .sum(),
        Norm::L1 => {
            let d = f.dim();
            let fv = f.as_slice();
            let mut total = 0.0;
            for (i, j, w) in graph.arcs() {
                if w == 0.0 {
                    continue;
                }
                let scale = w.powf(q / 2.0);
                for k in 0..d {
                    total += scale * ((fv[i * d + k] - fv[j * d + k]).abs() + eps).powf(q);
                }
            }
            total
        }
    })
}

/// `J_eps(f) = 1/2 |f - f0|^2 + lambda/q R_eps(f)`; equals [`objective`] at `eps = 0`.
pub fn objective_eps(
    graph: &Graph,
    f: &Signal,
    f0: &Signal,
    params: &ProblemParams,
) -> Result<f64> {
    check_pair(graph, f, f0)?;
    let r = regularizer_eps(graph, f, params)?;
    Ok(fidelity(f, f0) + params.lambda / params.q * r)
}

/// Per-arc Gauss-Jacobi coefficients.
///
/// With `p = 2` there is one coefficient per arc. With `p = 1` the penalty is
/// separable per channel, so there is one coefficient per arc and channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Gamma {
    values: Vec<f64>,
    channels: usize,
}

impl Gamma {
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Coefficient of arc `a` for channel `k`.
    pub fn get(&self, a: usize, k: usize) -> f64 {
        if self.channels == 1 {
            self.values[a]
        } else {
            self.values[a * self.channels + k]
        }
    }
}

pub fn gamma(graph: &Graph, f: &Signal, params: &ProblemParams) -> Result<Gamma> {
    params.validate()?;
    check_signal(graph, f)?;
    let (q, eps) = (params.q, params.epsilon);
    let w = graph.weights();
    match params.norm {
        Norm::L2 => {
            // Pre-pass: per-vertex (|grad f_i|^2 + eps^2)^((q-2)/2), infinite when singular.
            let exponent = (q - 2.0) / 2.0;
            let s: Vec<f64> = vertex_grad_norms_sq(graph, f)
                .into_iter()
                .map(|n2| (n2 + eps * eps).powf(exponent))
                .collect();
            let values = graph
                .arcs()
                .enumerate()
                .map(|(a, (i, j, _))| {
                    if w[a] == 0.0 {
                        return Ok(0.0);
                    }
                    if !s[i].is_finite() || !s[j].is_finite() {
                        return Err(Error::Singular {
                            location: format!("arc {i}->{j} (zero vertex gradient)"),
                            exponent,
                        });
                    }
                    Ok(w[a] * (s[i] + s[j]))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Gamma {
                values,
                channels: 1,
            })
        }
        Norm::L1 => {
            let d = f.dim();
            let fv = f.as_slice();
            let mut values = Vec::with_capacity(graph.arc_count() * d);
            for (a, (i, j, _)) in graph.arcs().enumerate() {
                if w[a] == 0.0 {
                    values.extend(std::iter::repeat_n(0.0, d));
                    continue;
                }
                let scale = 2.0 * w[a].powf(q / 2.0);
                for k in 0..d {
                    let base = (fv[i * d + k] - fv[j * d + k]).abs() + eps;
                    let p = checked_pow(base, q - 2.0, || format!("arc {i}->{j} channel {k}"))?;
                    values.push(scale * p);
                }
            }
            Ok(Gamma {
                values,
                channels: d,
            })
        }
    }
}

/// `Prox_{tau B}(f) = (lambda f + tau f0) / (lambda + tau)`.
pub fn prox_fidelity(f: &Signal, f0: &Signal, lambda: f64, tau: f64) -> Result<Signal> {
    f0.check_shape(f.vertex_count(), f.dim())?;
    let denom = lambda + tau;
    if !(denom > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda + tau = {denom} must be > 0"
        )));
    }
    let values = f
        .as_slice()
        .iter()
        .zip(f0.as_slice())
        .map(|(x, x0)| (lambda * x + tau * x0) / denom)
        .collect();
    Signal::new(values, f.dim())
}

/// Projection onto the unit ball of the dual norm: per-vertex l2 rescaling
/// for `p = 2`, entrywise clamp to `[-1, 1]` for `p = 1`.
pub fn project_ball(graph: &Graph, g: &EdgeField, norm: Norm) -> Result<EdgeField> {
    check_field(graph, g)?;
    let mut out = g.clone();
    project_ball_in_place(graph, &mut out, norm);
    Ok(out)
}

pub(crate) fn project_ball_in_place(graph: &Graph, g: &mut EdgeField, norm: Norm) {
    let d = g.dim();
    match norm {
        Norm::L1 => {
            for x in g.as_mut_slice() {
                *x /= x.abs().max(1.0);
            }
        }
        Norm::L2 => {
            let gv = g.as_mut_slice();
            for i in 0..graph.vertex_count() {
                let arcs = graph.arcs_of(i);
                let row = &mut gv[arcs.start * d..arcs.end * d];
                let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                // A rescaled row can come out a few ulps above 1; leave it as is
                // so the projection is idempotent.
                if n > 1.0 + ROW_NORM_SLACK {
                    for x in row {
                        *x /= n;
                    }
                }
            }
        }
    }
}

const ROW_NORM_SLACK: f64 = 8.0 * f64::EPSILON;

/// Closed-form gradient of [`objective_eps`].
pub fn grad_objective_eps(
    graph: &Graph,
    f: &Signal,
    f0: &Signal,
    params: &ProblemParams,
) -> Result<Signal> {
    check_pair(graph, f, f0)?;
    params.validate()?;
    let d = f.dim();
    let fv = f.as_slice();
    let mut out: Vec<f64> = fv.iter().zip(f0.as_slice()).map(|(x, x0)| x - x0).collect();
    if params.lambda == 0.0 {
        return Signal::new(out, d);
    }
    let lambda = params.lambda;
    let cols = graph.col_indices();
    match params.norm {
        Norm::L2 => {
            // d/df_i = lambda sum_j gamma_ij (f_i - f_j)
            let gamma = gamma(graph, f, params)?;
            for i in 0..graph.vertex_count() {
                for a in graph.arcs_of(i) {
                    let j = cols[a];
                    let c = lambda * gamma.get(a, 0);
                    for k in 0..d {
                        out[i * d + k] += c * (fv[i * d + k] - fv[j * d + k]);
                    }
                }
            }
        }
        Norm::L1 => {
            // d/df_i = lambda sum_j 2 w^(q/2) (|f_i - f_j| + eps)^(q-1) sign(f_i - f_j)
            let (q, eps) = (params.q, params.epsilon);
            let w = graph.weights();
            for i in 0..graph.vertex_count() {
                for a in graph.arcs_of(i) {
                    if w[a] == 0.0 {
                        continue;
                    }
                    let j = cols[a];
                    let scale = 2.0 * lambda * w[a].powf(q / 2.0);
                    for k in 0..d {
                        let diff = fv[i * d + k] - fv[j * d + k];
                        let base = diff.abs() + eps;
                        if base == 0.0 && q < 2.0 {
                            return Err(Error::Singular {
                                location: format!("arc {i}->{j} channel {k}"),
                                exponent: q - 2.0,
                            });
                        }
                        if diff != 0.0 {
                            out[i * d + k] += scale * base.powf(q - 1.0) * diff.signum();
                        }
                    }
                }
            }
        }
    }
    Signal::new(out, d)
}
