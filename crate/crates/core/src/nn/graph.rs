//! Tape-based reverse-mode automatic differentiation over dense matrices.
//!
//! Every node holds its forward value; [`Graph::backward`] walks the tape in
//! reverse and accumulates vector-Jacobian products. Values are 2-D
//! `[rows, cols]`; biases are rows of length `cols`.

use super::params::{ModelParams, ParamId};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    AddBias(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Softplus(NodeId),
    Relu(NodeId),
    Gather {
        table: NodeId,
        ids: Vec<usize>,
    },
    MaskedMean {
        steps: Vec<NodeId>,
        /// Row-major `[rows, steps]` weights in {0, 1}.
        mask: Vec<f64>,
    },
    Mean(NodeId),
    EnnLoss {
        alpha: NodeId,
        targets: Vec<usize>,
    },
    Vacuity(NodeId),
    SoftmaxXent {
        logits: NodeId,
        targets: Vec<usize>,
    },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param(_) => "param",
            Op::MatMul(..) => "matmul",
            Op::AddBias(..) => "add_bias",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::Tanh(_) => "tanh",
            Op::Sigmoid(_) => "sigmoid",
            Op::Softplus(_) => "softplus",
            Op::Relu(_) => "relu",
            Op::Gather { .. } => "gather",
            Op::MaskedMean { .. } => "masked_mean",
            Op::Mean(_) => "mean",
            Op::EnnLoss { .. } => "enn_loss",
            Op::Vacuity(_) => "vacuity",
            Op::SoftmaxXent { .. } => "softmax_xent",
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Forward values plus the tape needed to differentiate them.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Option<Vec<Option<Vec<f64>>>>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn elementwise(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let mut out = t.detached();
    out.values_mut().iter_mut().for_each(|v| *v = f(*v));
    out
}

fn shape2(t: &Tensor) -> (usize, usize) {
    (t.rows(), t.cols())
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.grads = None;
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Scalar value of a `[1, 1]` node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value.values()[0]
    }

    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Input, value)
    }

    pub fn param(&mut self, params: &ModelParams, id: ParamId) -> NodeId {
        self.push(Op::Param(id), params.get(id).detached())
    }

    fn check_same(&self, what: &str, a: NodeId, b: NodeId) -> Result<()> {
        let (sa, sb) = (shape2(self.value(a)), shape2(self.value(b)));
        if sa != sb {
            return Err(Error::shape(
                what,
                format!("operands {sa:?} and {sb:?} differ"),
            ));
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (n, k) = shape2(self.value(a));
        let (k2, m) = shape2(self.value(b));
        if k != k2 {
            return Err(Error::shape(
                "matmul",
                format!("[{n}, {k}] x [{k2}, {m}]: inner dimensions differ"),
            ));
        }
        let av = self.value(a).values();
        let bv = self.value(b).values();
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let orow = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let x = av[i * k + p];
                if x == 0.0 {
                    continue;
                }
                let brow = &bv[p * m..(p + 1) * m];
                for (o, w) in orow.iter_mut().zip(brow) {
                    *o += x * w;
                }
            }
        }
        Ok(self.push(Op::MatMul(a, b), Tensor::matrix(n, m, out)))
    }

    /// Adds a bias row to every row of `a`.
    pub fn add_bias(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let (n, m) = shape2(self.value(a));
        let b = self.value(bias);
        if b.len() != m {
            return Err(Error::shape(
                "add_bias",
                format!("bias of length {} for {m} columns", b.len()),
            ));
        }
        let bv = b.values().to_vec();
        let mut out = self.value(a).detached();
        for row in out.values_mut().chunks_mut(m) {
            row.iter_mut().zip(&bv).for_each(|(o, b)| *o += b);
        }
        let out = Tensor::matrix(n, m, out.into_values());
        Ok(self.push(Op::AddBias(a, bias), out))
    }

    /// `x W + b`.
    pub fn affine(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let xw = self.matmul(x, w)?;
        self.add_bias(xw, b)
    }

    fn zip_with(
        &mut self,
        op: Op,
        a: NodeId,
        b: NodeId,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<NodeId> {
        self.check_same(op.name(), a, b)?;
        let (n, m) = shape2(self.value(a));
        let out: Vec<f64> = self
            .value(a)
            .values()
            .iter()
            .zip(self.value(b).values())
            .map(|(x, y)| f(*x, *y))
            .collect();
        Ok(self.push(op, Tensor::matrix(n, m, out)))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_with(Op::Add(a, b), a, b, |x, y| x + y)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_with(Op::Sub(a, b), a, b, |x, y| x - y)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_with(Op::Mul(a, b), a, b, |x, y| x * y)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = elementwise(self.value(a), |x| c * x);
        self.push(Op::Scale(a, c), v)
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = elementwise(self.value(a), |x| x + c);
        self.push(Op::AddScalar(a), v)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = elementwise(self.value(a), f64::tanh);
        self.push(Op::Tanh(a), v)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = elementwise(self.value(a), sigmoid);
        self.push(Op::Sigmoid(a), v)
    }

    pub fn softplus(&mut self, a: NodeId) -> NodeId {
        let v = elementwise(self.value(a), softplus);
        self.push(Op::Softplus(a), v)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = elementwise(self.value(a), |x| x.max(0.0));
        self.push(Op::Relu(a), v)
    }

    /// Row lookup `table[ids[i]]` for every `i`.
    pub fn gather(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId> {
        let t = self.value(table);
        let (v, d) = shape2(t);
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= v {
                return Err(Error::shape(
                    "gather",
                    format!("row {id} out of range for a table with {v} rows"),
                ));
            }
            out.extend_from_slice(t.row(id));
        }
        let out = Tensor::matrix(ids.len(), d, out);
        Ok(self.push(
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
            out,
        ))
    }

    /// Per-row mean of `steps[t]` over the positions where `mask[row, t] = 1`.
    /// Rows with an empty mask produce zeros.
    pub fn masked_mean(&mut self, steps: &[NodeId], mask: &[f64]) -> Result<NodeId> {
        let first = *steps
            .first()
            .ok_or_else(|| Error::shape("masked_mean", "no steps"))?;
        let (n, d) = shape2(self.value(first));
        let t_len = steps.len();
        if mask.len() != n * t_len {
            return Err(Error::shape(
                "masked_mean",
                format!("mask has {} entries, expected {n} x {t_len}", mask.len()),
            ));
        }
        let mut out = vec![0.0; n * d];
        for (t, &s) in steps.iter().enumerate() {
            if shape2(self.value(s)) != (n, d) {
                return Err(Error::shape(
                    "masked_mean",
                    format!("step {t} has a different shape"),
                ));
            }
            let sv = self.value(s).values();
            for r in 0..n {
                let w = mask[r * t_len + t];
                if w != 0.0 {
                    for c in 0..d {
                        out[r * d + c] += w * sv[r * d + c];
                    }
                }
            }
        }
        for r in 0..n {
            let count: f64 = mask[r * t_len..(r + 1) * t_len].iter().sum();
            if count > 0.0 {
                out[r * d..(r + 1) * d].iter_mut().for_each(|v| *v /= count);
            }
        }
        let out = Tensor::matrix(n, d, out);
        Ok(self.push(
            Op::MaskedMean {
                steps: steps.to_vec(),
                mask: mask.to_vec(),
            },
            out,
        ))
    }

    /// Mean over all elements, as a `[1, 1]` node.
    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).values();
        let m = if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        };
        self.push(Op::Mean(a), Tensor::scalar(m))
    }

    /// Per-row expected squared error under `Dir(alpha)` against one-hot targets.
    pub fn enn_loss(&mut self, alpha: NodeId, targets: &[usize]) -> Result<NodeId> {
        let a = self.value(alpha);
        let (n, k) = shape2(a);
        if targets.len() != n {
            return Err(Error::shape(
                "enn_loss",
                format!("{} targets for {n} rows", targets.len()),
            ));
        }
        if let Some(t) = targets.iter().find(|&&t| t >= k) {
            return Err(Error::shape(
                "enn_loss",
                format!("target {t} out of range for K = {k}"),
            ));
        }
        let out: Vec<f64> = (0..n)
            .map(|r| crate::model::enn_loss_value(a.row(r), targets[r]))
            .collect();
        Ok(self.push(
            Op::EnnLoss {
                alpha,
                targets: targets.to_vec(),
            },
            Tensor::matrix(n, 1, out),
        ))
    }

    /// Per-row `K / sum(alpha)`.
    pub fn vacuity(&mut self, alpha: NodeId) -> NodeId {
        let a = self.value(alpha);
        let (n, k) = shape2(a);
        let out: Vec<f64> = (0..n)
            .map(|r| k as f64 / a.row(r).iter().sum::<f64>())
            .collect();
        self.push(Op::Vacuity(alpha), Tensor::matrix(n, 1, out))
    }

    /// Per-row softmax cross-entropy.
    pub fn softmax_xent(&mut self, logits: NodeId, targets: &[usize]) -> Result<NodeId> {
        let l = self.value(logits);
        let (n, k) = shape2(l);
        if targets.len() != n || targets.iter().any(|&t| t >= k) {
            return Err(Error::shape("softmax_xent", "targets do not match logits"));
        }
        let out: Vec<f64> = (0..n)
            .map(|r| {
                let row = l.row(r);
                let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = mx + row.iter().map(|x| (x - mx).exp()).sum::<f64>().ln();
                lse - row[targets[r]]
            })
            .collect();
        Ok(self.push(
            Op::SoftmaxXent {
                logits,
                targets: targets.to_vec(),
            },
            Tensor::matrix(n, 1, out),
        ))
    }

    /// Reverse pass from a scalar root with seed gradient 1.
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        self.backward_with_seed(root, 1.0)
    }

    pub fn backward_with_seed(&mut self, root: NodeId, seed: f64) -> Result<()> {
        if self.nodes.is_empty() || root.0 >= self.nodes.len() {
            return Err(Error::Usage(
                "backward called before any forward evaluation".into(),
            ));
        }
        if self.nodes[root.0].value.len() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar root, node `{}` has {} values",
                self.nodes[root.0].op.name(),
                self.nodes[root.0].value.len()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(vec![seed]);

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        self.grads = Some(grads);
        Ok(())
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let out = node.value.values();
        let val = |id: NodeId| self.nodes[id.0].value.values();
        match &node.op {
            Op::Input | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (n, k) = shape2(&self.nodes[a.0].value);
                let m = self.nodes[b.0].value.cols();
                let (av, bv) = (val(*a), val(*b));
                // dA = G B^T
                let mut da = vec![0.0; n * k];
                for i in 0..n {
                    let grow = &g[i * m..(i + 1) * m];
                    for p in 0..k {
                        let brow = &bv[p * m..(p + 1) * m];
                        da[i * k + p] = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
                    }
                }
                // dB = A^T G
                let mut db = vec![0.0; k * m];
                for i in 0..n {
                    let grow = &g[i * m..(i + 1) * m];
                    for p in 0..k {
                        let x = av[i * k + p];
                        if x == 0.0 {
                            continue;
                        }
                        let drow = &mut db[p * m..(p + 1) * m];
                        drow.iter_mut().zip(grow).for_each(|(d, gg)| *d += x * gg);
                    }
                }
                accumulate(grads, *a, da);
                accumulate(grads, *b, db);
            }
            Op::AddBias(a, b) => {
                let m = self.nodes[a.0].value.cols();
                let mut db = vec![0.0; m];
                for row in g.chunks(m) {
                    db.iter_mut().zip(row).for_each(|(d, x)| *d += x);
                }
                accumulate(grads, *a, g.to_vec());
                accumulate(grads, *b, db);
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.to_vec());
                accumulate(grads, *b, g.to_vec());
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, g.to_vec());
                accumulate(grads, *b, g.iter().map(|x| -x).collect());
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                accumulate(grads, *a, g.iter().zip(bv).map(|(x, y)| x * y).collect());
                accumulate(grads, *b, g.iter().zip(av).map(|(x, y)| x * y).collect());
            }
            Op::Scale(a, c) => accumulate(grads, *a, g.iter().map(|x| c * x).collect()),
            Op::AddScalar(a) => accumulate(grads, *a, g.to_vec()),
            Op::Tanh(a) => accumulate(
                grads,
                *a,
                g.iter().zip(out).map(|(x, y)| x * (1.0 - y * y)).collect(),
            ),
            Op::Sigmoid(a) => accumulate(
                grads,
                *a,
                g.iter().zip(out).map(|(x, y)| x * y * (1.0 - y)).collect(),
            ),
            Op::Softplus(a) => accumulate(
                grads,
                *a,
                g.iter()
                    .zip(val(*a))
                    .map(|(x, z)| x * sigmoid(*z))
                    .collect(),
            ),
            Op::Relu(a) => accumulate(
                grads,
                *a,
                g.iter()
                    .zip(val(*a))
                    .map(|(x, z)| if *z > 0.0 { *x } else { 0.0 })
                    .collect(),
            ),
            Op::Gather { table, ids } => {
                let t = &self.nodes[table.0].value;
                let d = t.cols();
                let mut dt = vec![0.0; t.len()];
                for (r, &id) in ids.iter().enumerate() {
                    let src = &g[r * d..(r + 1) * d];
                    dt[id * d..(id + 1) * d]
                        .iter_mut()
                        .zip(src)
                        .for_each(|(o, x)| *o += x);
                }
                accumulate(grads, *table, dt);
            }
            Op::MaskedMean { steps, mask } => {
                let (n, d) = shape2(&node.value);
                let t_len = steps.len();
                for (t, s) in steps.iter().enumerate() {
                    let mut ds = vec![0.0; n * d];
                    for r in 0..n {
                        let w = mask[r * t_len + t];
                        if w == 0.0 {
                            continue;
                        }
                        let count: f64 = mask[r * t_len..(r + 1) * t_len].iter().sum();
                        let f = w / count;
                        for c in 0..d {
                            ds[r * d + c] = f * g[r * d + c];
                        }
                    }
                    accumulate(grads, *s, ds);
                }
            }
            Op::Mean(a) => {
                let n = self.nodes[a.0].value.len();
                let v = if n == 0 { 0.0 } else { g[0] / n as f64 };
                accumulate(grads, *a, vec![v; n]);
            }
            Op::EnnLoss { alpha, targets } => {
                let a = &self.nodes[alpha.0].value;
                let k = a.cols();
                let mut da = Vec::with_capacity(a.len());
                for (r, &y) in targets.iter().enumerate() {
                    let row = a.row(r);
                    let s: f64 = row.iter().sum();
                    let ya: f64 = row[y];
                    let q: f64 = row.iter().map(|x| x * x).sum::<f64>() + s;
                    let den = s * (s + 1.0);
                    for (j, &aj) in row.iter().enumerate() {
                        let yj = if j == y { 1.0 } else { 0.0 };
                        let d_fit = -2.0 * (yj / s - ya / (s * s));
                        let d_var = (2.0 * aj + 1.0) / den - q * (2.0 * s + 1.0) / (den * den);
                        da.push(g[r] * (d_fit + d_var));
                    }
                    debug_assert_eq!(da.len(), (r + 1) * k);
                }
                accumulate(grads, *alpha, da);
            }
            Op::Vacuity(alpha) => {
                let a = &self.nodes[alpha.0].value;
                let k = a.cols();
                let mut da = Vec::with_capacity(a.len());
                for (r, gr) in g.iter().enumerate() {
                    let s: f64 = a.row(r).iter().sum();
                    let d = -(k as f64) / (s * s) * gr;
                    da.extend(std::iter::repeat_n(d, k));
                }
                accumulate(grads, *alpha, da);
            }
            Op::SoftmaxXent { logits, targets } => {
                let l = &self.nodes[logits.0].value;
                let mut dl = Vec::with_capacity(l.len());
                for (r, &y) in targets.iter().enumerate() {
                    let p = softmax(l.row(r));
                    dl.extend(
                        p.iter()
                            .enumerate()
                            .map(|(j, pj)| g[r] * (pj - if j == y { 1.0 } else { 0.0 })),
                    );
                }
                accumulate(grads, *logits, dl);
            }
        }
    }

    /// Gradient of the last backward root with respect to `id`, if it was reached.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.grads.as_ref()?.get(id.0)?.as_deref()
    }

    /// Gradients for every parameter of `params`, in registration order.
    /// Parameters that did not influence the root get zeros.
    pub fn param_grads(&self, params: &ModelParams) -> Result<Vec<Vec<f64>>> {
        let grads = self
            .grads
            .as_ref()
            .ok_or_else(|| Error::Usage("param_grads called before backward".into()))?;
        let mut out: Vec<Vec<f64>> = params
            .ids()
            .map(|id| vec![0.0; params.get(id).len()])
            .collect();
        for (node, g) in self.nodes.iter().zip(grads) {
            if let (Op::Param(pid), Some(g)) = (&node.op, g) {
                out[pid.0].iter_mut().zip(g).for_each(|(o, x)| *o += x);
            }
        }
        Ok(out)
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], id: NodeId, g: Vec<f64>) {
    match &mut grads[id.0] {
        Some(existing) => existing.iter_mut().zip(&g).for_each(|(e, x)| *e += x),
        slot @ None => *slot = Some(g),
    }
}

pub fn softmax(row: &[f64]) -> Vec<f64> {
    let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|x| (x - mx).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_identity_is_noop() {
        let mut g = Graph::new();
        let x = g.input(Tensor::matrix(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.0, -1.5]));
        let mut eye = vec![0.0; 9];
        (0..3).for_each(|i| eye[i * 3 + i] = 1.0);
        let w = g.input(Tensor::matrix(3, 3, eye));
        let b = g.input(Tensor::row_vector(vec![0.0; 3]));
        let y = g.affine(x, w, b).unwrap();
        assert_eq!(g.value(y).values(), g.value(x).values());
    }

    #[test]
    fn softplus_at_zero_is_ln2() {
        let mut g = Graph::new();
        let x = g.input(Tensor::scalar(0.0));
        let y = g.softplus(x);
        assert!((g.scalar(y) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn masked_mean_of_equal_vectors() {
        let mut g = Graph::new();
        let v = vec![0.25, -1.0, 4.0];
        let steps: Vec<_> = (0..3)
            .map(|_| g.input(Tensor::matrix(1, 3, v.clone())))
            .collect();
        let m = g.masked_mean(&steps, &[1.0, 1.0, 1.0]).unwrap();
        for (a, b) in g.value(m).values().iter().zip(&v) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn masked_mean_ignores_padding() {
        let mut g = Graph::new();
        let a = g.input(Tensor::matrix(1, 2, vec![1.0, 2.0]));
        let pad = g.input(Tensor::matrix(1, 2, vec![100.0, 100.0]));
        let m = g.masked_mean(&[a, pad], &[1.0, 0.0]).unwrap();
        assert_eq!(g.value(m).values(), &[1.0, 2.0]);
    }

    #[test]
    fn square_gradient() {
        let mut g = Graph::new();
        let x = g.input(Tensor::scalar(3.0));
        let y = g.mul(x, x).unwrap();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[6.0]);
    }

    #[test]
    fn softplus_sum_gradient_at_zero() {
        let mut g = Graph::new();
        let x = g.input(Tensor::matrix(1, 4, vec![0.0; 4]));
        let y = g.softplus(x);
        let m = g.mean(y);
        let s = g.scale(m, 4.0);
        g.backward(s).unwrap();
        for v in g.grad(x).unwrap() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_root_gives_zero_param_grads() {
        let mut params = ModelParams::new(0);
        let w = params
            .register("w", Tensor::matrix(1, 1, vec![2.0]))
            .unwrap();
        let mut g = Graph::new();
        let _ = g.param(&params, w);
        let c = g.input(Tensor::scalar(5.0));
        g.backward(c).unwrap();
        assert_eq!(g.param_grads(&params).unwrap(), vec![vec![0.0]]);
    }

    #[test]
    fn backward_before_forward_is_usage_error() {
        let mut g = Graph::new();
        let err = g.backward(NodeId(0)).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
        let g2 = Graph::new();
        assert!(g2.param_grads(&ModelParams::new(0)).is_err());
    }

    #[test]
    fn shape_mismatch_names_node() {
        let mut g = Graph::new();
        let a = g.input(Tensor::matrix(2, 3, vec![0.0; 6]));
        let b = g.input(Tensor::matrix(2, 3, vec![0.0; 6]));
        match g.matmul(a, b) {
            Err(Error::Shape { node, .. }) => assert_eq!(node, "matmul"),
            other => panic!("unexpected {other:?}"),
        }
        let c = g.input(Tensor::matrix(3, 2, vec![0.0; 6]));
        assert!(matches!(g.add(a, c), Err(Error::Shape { .. })));
    }

    #[test]
    fn softplus_gradient_finite_on_wide_range() {
        let xs: Vec<f64> = (0..=1000).map(|i| -50.0 + i as f64 * 0.1).collect();
        let mut g = Graph::new();
        let x = g.input(Tensor::row_vector(xs));
        let y = g.softplus(x);
        let m = g.mean(y);
        g.backward(m).unwrap();
        assert!(g.value(y).values().iter().all(|v| v.is_finite()));
        assert!(g.grad(x).unwrap().iter().all(|v| v.is_finite()));
    }
}
