#![allow(dead_code)]

use graphvar_core::{EdgeField, Graph, Signal};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdos-Renyi style graph with weights in [0.1, 2).
pub fn random_graph(rng: &mut impl Rng, n: usize, density: f64) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                edges.push((i, j, rng.random_range(0.1..2.0)));
            }
        }
    }
    Graph::from_edges(n, &edges).unwrap()
}

/// Random graph guaranteed to contain a spanning path.
pub fn connected_graph(rng: &mut impl Rng, n: usize, density: f64) -> Graph {
    let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i, rng.random_range(0.1..2.0))).collect();
    for i in 0..n {
        for j in i + 2..n {
            if rng.random_bool(density) {
                edges.push((i, j, rng.random_range(0.1..2.0)));
            }
        }
    }
    Graph::from_edges(n, &edges).unwrap()
}

pub fn random_signal(rng: &mut impl Rng, n: usize, d: usize) -> Signal {
    Signal::new((0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect(), d).unwrap()
}

pub fn random_field(rng: &mut impl Rng, arcs: usize, d: usize, scale: f64) -> EdgeField {
    EdgeField::new(
        (0..arcs * d).map(|_| scale * rng.random_range(-1.0..1.0)).collect(),
        d,
    )
    .unwrap()
}

pub fn random_permutation(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

/// Row `i` of `f` becomes row `perm[i]` of the result.
pub fn permute_signal(f: &Signal, perm: &[usize]) -> Signal {
    let mut out = Signal::zeros(f.vertex_count(), f.dim());
    for (i, row) in f.rows().enumerate() {
        out.row_mut(perm[i]).copy_from_slice(row);
    }
    out
}

/// Dense solve of `(I + 2 lambda L) f = f0`, `L = D - W`, by Cholesky.
/// This is the stationarity condition of the p = q = 2 objective.
pub fn tikhonov_direct(graph: &Graph, f0: &Signal, lambda: f64) -> Signal {
    let n = graph.vertex_count();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        a[i * n + i] = 1.0;
    }
    for (i, j, w) in graph.arcs() {
        a[i * n + i] += 2.0 * lambda * w;
        a[i * n + j] -= 2.0 * lambda * w;
    }
    // In-place lower Cholesky factor.
    for j in 0..n {
        let mut s = a[j * n + j];
        for k in 0..j {
            s -= a[j * n + k] * a[j * n + k];
        }
        assert!(s > 0.0, "matrix not positive definite");
        let l = s.sqrt();
        a[j * n + j] = l;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / l;
        }
    }
    let d = f0.dim();
    let mut out = Signal::zeros(n, d);
    for c in 0..d {
        let mut y: Vec<f64> = (0..n).map(|i| f0.row(i)[c]).collect();
        for i in 0..n {
            for k in 0..i {
                y[i] -= a[i * n + k] * y[k];
            }
            y[i] /= a[i * n + i];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= a[k * n + i] * y[k];
            }
            y[i] /= a[i * n + i];
        }
        for i in 0..n {
            out.row_mut(i)[c] = y[i];
        }
    }
    out
}

pub fn relative_l2(a: &Signal, b: &Signal) -> f64 {
    (a.distance_sq(b) / b.norm_sq().max(f64::MIN_POSITIVE)).sqrt()
}
