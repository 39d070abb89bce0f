//! Reverse-mode differentiation over dense row-major matrices.
//!
//! Every value is an `Array2<f64>`; scalars are `1 x 1`. Nodes are appended
//! in evaluation order, so a single reverse sweep over the node list visits
//! each node after all of its consumers.

use std::rc::Rc;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    /// `x w + b`, with `b` a `1 x out` row broadcast over rows.
    Linear { x: Var, w: Var, b: Var },
    Relu(Var),
    /// `y[r] = x[idx[r]]`.
    Gather { x: Var, idx: Rc<[usize]> },
    /// `y[idx[r]] += x[r]`.
    ScatterSum { x: Var, idx: Rc<[usize]> },
    Concat(Vec<Var>),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `y[r, :] = s[r] x[r, :]` for a constant `s`.
    ScaleRows { x: Var, s: Rc<[f64]> },
    Scale(Var, f64),
    AddScalar(Var),
    Powf(Var, f64),
    Sqrt(Var),
    Abs(Var),
    Square(Var),
    /// Sum over columns, `n x c -> n x 1`.
    RowSum(Var),
    Sum(Var),
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints indexed by [`Var`]; `None` for nodes the root does not depend on.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads[v.0].as_ref()
    }

    /// Adjoint of `v`, or zeros shaped like `like` if the root does not depend on it.
    pub fn take_or_zeros(&mut self, v: Var, like: &Array2<f64>) -> Array2<f64> {
        self.grads[v.0]
            .take()
            .unwrap_or_else(|| Array2::zeros(like.raw_dim()))
    }
}

fn accumulate(slot: &mut Option<Array2<f64>>, delta: Array2<f64>) {
    match slot {
        Some(g) => *g += &delta,
        None => *slot = Some(delta),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let x = self.value(v);
        assert_eq!(x.dim(), (1, 1), "not a scalar");
        x[[0, 0]]
    }

    /// Parameters and constants alike; adjoints are produced for every leaf.
    pub fn leaf(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        assert_eq!(xv.ncols(), wv.nrows(), "linear: inner dimensions");
        assert_eq!(bv.dim(), (1, wv.ncols()), "linear: bias shape");
        let y = xv.dot(wv) + bv;
        self.push(y, Op::Linear { x, w, b })
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let y = self.value(x).mapv(|v| v.max(0.0));
        self.push(y, Op::Relu(x))
    }

    pub fn gather_rows(&mut self, x: Var, idx: Rc<[usize]>) -> Var {
        let xv = self.value(x);
        let mut y = Array2::zeros((idx.len(), xv.ncols()));
        for (r, &i) in idx.iter().enumerate() {
            y.row_mut(r).assign(&xv.row(i));
        }
        self.push(y, Op::Gather { x, idx })
    }

    /// Sums rows of `x` into `rows` output rows; rows are added in input order.
    pub fn scatter_sum(&mut self, x: Var, idx: Rc<[usize]>, rows: usize) -> Var {
        let xv = self.value(x);
        assert_eq!(xv.nrows(), idx.len(), "scatter_sum: index length");
        let mut y = Array2::zeros((rows, xv.ncols()));
        for (r, &i) in idx.iter().enumerate() {
            let mut out = y.row_mut(i);
            out += &xv.row(r);
        }
        self.push(y, Op::ScatterSum { x, idx })
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let views: Vec<ArrayView2<f64>> = parts.iter().map(|&p| self.value(p).view()).collect();
        let y = concatenate(Axis(1), &views).expect("concat: row counts differ");
        self.push(y, Op::Concat(parts.to_vec()))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) {
        assert_eq!(self.value(a).dim(), self.value(b).dim(), "{what}: shapes differ");
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.same_shape(a, b, "add");
        let y = self.value(a) + self.value(b);
        self.push(y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.same_shape(a, b, "sub");
        let y = self.value(a) - self.value(b);
        self.push(y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.same_shape(a, b, "mul");
        let y = self.value(a) * self.value(b);
        self.push(y, Op::Mul(a, b))
    }

    pub fn scale_rows(&mut self, x: Var, s: Rc<[f64]>) -> Var {
        let mut y = self.value(x).clone();
        assert_eq!(y.nrows(), s.len(), "scale_rows: length");
        for (mut row, &c) in y.rows_mut().into_iter().zip(s.iter()) {
            row *= c;
        }
        self.push(y, Op::ScaleRows { x, s })
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let y = self.value(x) * c;
        self.push(y, Op::Scale(x, c))
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        let y = self.value(x) + c;
        self.push(y, Op::AddScalar(x))
    }

    pub fn powf(&mut self, x: Var, e: f64) -> Var {
        let y = self.value(x).mapv(|v| v.powf(e));
        self.push(y, Op::Powf(x, e))
    }

    pub fn sqrt(&mut self, x: Var) -> Var {
        let y = self.value(x).mapv(f64::sqrt);
        self.push(y, Op::Sqrt(x))
    }

    pub fn abs(&mut self, x: Var) -> Var {
        let y = self.value(x).mapv(f64::abs);
        self.push(y, Op::Abs(x))
    }

    pub fn square(&mut self, x: Var) -> Var {
        let y = self.value(x).mapv(|v| v * v);
        self.push(y, Op::Square(x))
    }

    pub fn row_sum(&mut self, x: Var) -> Var {
        let y = self.value(x).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.push(y, Op::RowSum(x))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let y = Array2::from_elem((1, 1), self.value(x).sum());
        self.push(y, Op::Sum(x))
    }

    /// Adjoints of `root` (which must be a scalar) with respect to every node.
    pub fn backward(&self, root: Var) -> Gradients {
        assert_eq!(self.value(root).dim(), (1, 1), "backward: root must be scalar");
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Array2::ones((1, 1)));

        for k in (0..=root.0).rev() {
            let Some(dy) = grads[k].take() else { continue };
            let node = &self.nodes[k];
            let val = |v: Var| &self.nodes[v.0].value;
            match &node.op {
                Op::Leaf => {
                    grads[k] = Some(dy);
                    continue;
                }
                Op::Linear { x, w, b } => {
                    accumulate(&mut grads[x.0], dy.dot(&val(*w).t()));
                    accumulate(&mut grads[w.0], val(*x).t().dot(&dy));
                    accumulate(&mut grads[b.0], dy.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
                Op::Relu(x) => {
                    let mut d = dy;
                    d.zip_mut_with(val(*x), |g, &v| {
                        if v <= 0.0 {
                            *g = 0.0;
                        }
                    });
                    accumulate(&mut grads[x.0], d);
                }
                Op::Gather { x, idx } => {
                    let mut dx = Array2::zeros(val(*x).raw_dim());
                    for (r, &i) in idx.iter().enumerate() {
                        let mut out = dx.row_mut(i);
                        out += &dy.row(r);
                    }
                    accumulate(&mut grads[x.0], dx);
                }
                Op::ScatterSum { x, idx } => {
                    let mut dx = Array2::zeros(val(*x).raw_dim());
                    for (r, &i) in idx.iter().enumerate() {
                        dx.row_mut(r).assign(&dy.row(i));
                    }
                    accumulate(&mut grads[x.0], dx);
                }
                Op::Concat(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let width = val(*p).ncols();
                        accumulate(&mut grads[p.0], dy.slice(s![.., start..start + width]).to_owned());
                        start += width;
                    }
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], dy.clone());
                    accumulate(&mut grads[b.0], dy);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads[a.0], dy.clone());
                    accumulate(&mut grads[b.0], -dy);
                }
                Op::Mul(a, b) => {
                    accumulate(&mut grads[a.0], &dy * val(*b));
                    accumulate(&mut grads[b.0], dy * val(*a));
                }
                Op::ScaleRows { x, s } => {
                    let mut d = dy;
                    for (mut row, &c) in d.rows_mut().into_iter().zip(s.iter()) {
                        row *= c;
                    }
                    accumulate(&mut grads[x.0], d);
                }
                Op::Scale(x, c) => accumulate(&mut grads[x.0], dy * *c),
                Op::AddScalar(x) => accumulate(&mut grads[x.0], dy),
                Op::Powf(x, e) => {
                    let e = *e;
                    let mut d = dy;
                    d.zip_mut_with(val(*x), |g, &v| *g *= e * v.powf(e - 1.0));
                    accumulate(&mut grads[x.0], d);
                }
                Op::Sqrt(x) => {
                    let mut d = dy;
                    d.zip_mut_with(&node.value, |g, &y| *g *= 0.5 / y);
                    accumulate(&mut grads[x.0], d);
                }
                Op::Abs(x) => {
                    let mut d = dy;
                    d.zip_mut_with(val(*x), |g, &v| *g *= sign(v));
                    accumulate(&mut grads[x.0], d);
                }
                Op::Square(x) => {
                    let mut d = dy;
                    d.zip_mut_with(val(*x), |g, &v| *g *= 2.0 * v);
                    accumulate(&mut grads[x.0], d);
                }
                Op::RowSum(x) => {
                    let shape = val(*x).raw_dim();
                    let d = dy.broadcast(shape).expect("row_sum adjoint").to_owned();
                    accumulate(&mut grads[x.0], d);
                }
                Op::Sum(x) => {
                    let d = Array2::from_elem(val(*x).raw_dim(), dy[[0, 0]]);
                    accumulate(&mut grads[x.0], d);
                }
            }
        }
        grads.resize(self.nodes.len(), None);
        Gradients { grads }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
