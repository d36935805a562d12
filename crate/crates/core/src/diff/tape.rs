//! Reverse-mode automatic differentiation over dense tensors.
//!
//! A [`Tape`] records every primitive in evaluation order. Each recorded
//! node keeps its forward value plus whatever its adjoint rule needs, so
//! [`Tape::backward`] is a single sweep over the nodes in reverse.

use rand::Rng;

use super::tensor::gemm;
use super::{ParamStore, Tensor};
use crate::error::{param_err, shape_err, Error, Result};
use crate::graph::Graph;
use crate::rng;

/// Handle to a value recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<'g> {
    Constant,
    Param(String),
    MatMul(Var, Var),
    AddRowBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    Softplus(Var),
    Logistic(Var),
    Abs(Var),
    MeanAggregate(&'g Graph, Var),
    /// Per-entry multiplier (0 or 1/(1-p)).
    Dropout(Var, Vec<f64>),
    ReduceMean(Var),
    Sum(Var),
    SelectRows(Var, Vec<usize>),
    Column(Var, usize),
    /// 1x1 value broadcast to `rows x cols`.
    Broadcast(Var),
}

#[derive(Debug)]
struct Node<'g> {
    value: Tensor,
    op: Op<'g>,
}

/// Recorded computation; `'g` is the lifetime of any graph used for aggregation.
#[derive(Debug, Default)]
pub struct Tape<'g> {
    nodes: Vec<Node<'g>>,
}

/// Adjoints of every recorded node after a backward sweep.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Adjoint of `v`; `None` when `v` does not influence the loss.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

pub fn softplus_scalar(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn logistic_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'g> Tape<'g> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op<'g>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Input that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant)
    }

    /// Leaf bound to a named parameter; its adjoint is accumulated into the
    /// store by [`Tape::backward`].
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        let value = store.value(name)?.clone();
        Ok(self.push(value, Op::Param(name.to_string())))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    /// `a + 1 * bias` where `bias` is `1 x cols(a)`.
    pub fn add_row_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(bias));
        if bv.rows() != 1 || bv.cols() != av.cols() {
            return shape_err(format!(
                "bias {:?} for activations {:?}",
                bv.shape(),
                av.shape()
            ));
        }
        let mut out = av.clone();
        for r in 0..out.rows() {
            for (o, b) in out.row_mut(r).iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        Ok(self.push(out, Op::AddRowBias(a, bias)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y)?;
        Ok(self.push(out, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| c * x);
        self.push(out, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| x + c);
        self.push(out, Op::AddScalar(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(out, Op::Relu(a))
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(&mut self, a: Var) -> Var {
        let out = self.value(a).map(softplus_scalar);
        self.push(out, Op::Softplus(a))
    }

    pub fn logistic(&mut self, a: Var) -> Var {
        let out = self.value(a).map(logistic_scalar);
        self.push(out, Op::Logistic(a))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::abs);
        self.push(out, Op::Abs(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x * x);
        self.push(out, Op::Mul(a, a))
    }

    /// Row `v` becomes the mean of the rows of `v`'s neighbors (zero if none).
    pub fn mean_aggregate(&mut self, graph: &'g Graph, h: Var) -> Result<Var> {
        let hv = self.value(h);
        if hv.rows() != graph.num_nodes() {
            return shape_err(format!(
                "aggregating {} rows over a graph with {} nodes",
                hv.rows(),
                graph.num_nodes()
            ));
        }
        let out = crate::graph::neighbor_mean(graph, hv);
        Ok(self.push(out, Op::MeanAggregate(graph, h)))
    }

    /// Inverted dropout. Identity when `train_mode` is false or `p == 0`.
    pub fn dropout(&mut self, a: Var, p: f64, seed: u64, train_mode: bool) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return param_err(format!("dropout probability {p} must lie in [0, 1)"));
        }
        if !train_mode || p == 0.0 {
            return Ok(a);
        }
        let keep_scale = 1.0 / (1.0 - p);
        let mut rng = rng::stream(seed, "dropout", 0);
        let mask: Vec<f64> = (0..self.value(a).len())
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep_scale })
            .collect();
        let av = self.value(a);
        let data = av.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let out = Tensor::from_vec(av.rows(), av.cols(), data)?;
        Ok(self.push(out, Op::Dropout(a, mask)))
    }

    pub fn reduce_mean(&mut self, a: Var) -> Result<Var> {
        if self.value(a).is_empty() {
            return Err(Error::Contract("mean of an empty tensor".into()));
        }
        let out = Tensor::scalar(self.value(a).mean());
        Ok(self.push(out, Op::ReduceMean(a)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(out, Op::Sum(a))
    }

    /// Keep rows where `mask` is true.
    pub fn masked_select(&mut self, a: Var, mask: &[bool]) -> Result<Var> {
        if mask.len() != self.value(a).rows() {
            return shape_err(format!(
                "mask of length {} for {} rows",
                mask.len(),
                self.value(a).rows()
            ));
        }
        let idx = crate::graph::mask_indices(mask);
        self.select_rows(a, idx)
    }

    pub fn select_rows(&mut self, a: Var, idx: Vec<usize>) -> Result<Var> {
        let av = self.value(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= av.rows()) {
            return shape_err(format!("row {bad} out of {}", av.rows()));
        }
        let out = av.select_rows(&idx);
        Ok(self.push(out, Op::SelectRows(a, idx)))
    }

    /// Column `c` as an `n x 1` tensor.
    pub fn column(&mut self, a: Var, c: usize) -> Result<Var> {
        let av = self.value(a);
        if c >= av.cols() {
            return shape_err(format!("column {c} of {} columns", av.cols()));
        }
        let out = Tensor::column(av.col(c));
        Ok(self.push(out, Op::Column(a, c)))
    }

    pub fn broadcast(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let av = self.value(a);
        if av.shape() != (1, 1) {
            return shape_err(format!("broadcast of {:?}", av.shape()));
        }
        let out = Tensor::filled(rows, cols, av.item());
        Ok(self.push(out, Op::Broadcast(a)))
    }

    /// Sweep adjoints from a scalar `loss` seeded with `seed`.
    pub fn gradients_scaled(&self, loss: Var, seed: f64) -> Result<Gradients> {
        if self.value(loss).shape() != (1, 1) {
            return Err(Error::Contract(format!(
                "backward from a non-scalar node of shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Tensor::scalar(seed));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    pub fn gradients(&self, loss: Var) -> Result<Gradients> {
        self.gradients_scaled(loss, 1.0)
    }

    /// Accumulate `d loss / d param` into the store's gradient slots.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<()> {
        self.backward_scaled(loss, 1.0, store)
    }

    pub fn backward_scaled(&self, loss: Var, seed: f64, store: &mut ParamStore) -> Result<()> {
        let grads = self.gradients_scaled(loss, seed)?;
        for (i, node) in self.nodes.iter().enumerate().take(loss.0 + 1) {
            if let (Op::Param(name), Some(g)) = (&node.op, &grads.grads[i]) {
                store.accumulate(name, g)?;
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let acc = |grads: &mut [Option<Tensor>], v: Var, t: Tensor| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&t),
            slot @ None => *slot = Some(t),
        };
        let val = |v: Var| &self.nodes[v.0].value;
        match &self.nodes[i].op {
            Op::Constant | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let mut ga = Tensor::zeros(av.rows(), av.cols());
                gemm(g, false, bv, true, &mut ga, 0.0);
                let mut gb = Tensor::zeros(bv.rows(), bv.cols());
                gemm(av, true, g, false, &mut gb, 0.0);
                acc(grads, *a, ga);
                acc(grads, *b, gb);
            }
            Op::AddRowBias(a, b) => {
                let mut gb = Tensor::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for (o, x) in gb.data_mut().iter_mut().zip(g.row(r)) {
                        *o += x;
                    }
                }
                acc(grads, *a, g.clone());
                acc(grads, *b, gb);
            }
            Op::Add(a, b) => {
                acc(grads, *a, g.clone());
                acc(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(grads, *a, g.clone());
                acc(grads, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let ga = g.zip_map(val(*b), |x, y| x * y).expect("recorded shapes");
                let gb = g.zip_map(val(*a), |x, y| x * y).expect("recorded shapes");
                acc(grads, *a, ga);
                acc(grads, *b, gb);
            }
            Op::Scale(a, c) => acc(grads, *a, g.map(|x| c * x)),
            Op::AddScalar(a) => acc(grads, *a, g.clone()),
            Op::Relu(a) => {
                let ga = g
                    .zip_map(val(*a), |x, z| if z > 0.0 { x } else { 0.0 })
                    .expect("recorded shapes");
                acc(grads, *a, ga);
            }
            Op::Softplus(a) => {
                let ga = g
                    .zip_map(val(*a), |x, z| x * logistic_scalar(z))
                    .expect("recorded shapes");
                acc(grads, *a, ga);
            }
            Op::Logistic(a) => {
                let out = &self.nodes[i].value;
                let ga = g
                    .zip_map(out, |x, s| x * s * (1.0 - s))
                    .expect("recorded shapes");
                acc(grads, *a, ga);
            }
            Op::Abs(a) => {
                let ga = g
                    .zip_map(val(*a), |x, z| {
                        if z > 0.0 {
                            x
                        } else if z < 0.0 {
                            -x
                        } else {
                            0.0
                        }
                    })
                    .expect("recorded shapes");
                acc(grads, *a, ga);
            }
            Op::MeanAggregate(graph, h) => {
                let mut gh = Tensor::zeros(g.rows(), g.cols());
                for v in 0..graph.num_nodes() {
                    let nb = graph.neighbors(v);
                    if nb.is_empty() {
                        continue;
                    }
                    let inv = 1.0 / nb.len() as f64;
                    for &u in nb {
                        for (o, x) in gh.row_mut(u).iter_mut().zip(g.row(v)) {
                            *o += inv * x;
                        }
                    }
                }
                acc(grads, *h, gh);
            }
            Op::Dropout(a, mask) => {
                let data = g.data().iter().zip(mask).map(|(x, m)| x * m).collect();
                acc(
                    grads,
                    *a,
                    Tensor::from_vec(g.rows(), g.cols(), data).expect("recorded shapes"),
                );
            }
            Op::ReduceMean(a) => {
                let av = val(*a);
                let c = g.item() / av.len() as f64;
                acc(grads, *a, Tensor::filled(av.rows(), av.cols(), c));
            }
            Op::Sum(a) => {
                let av = val(*a);
                acc(grads, *a, Tensor::filled(av.rows(), av.cols(), g.item()));
            }
            Op::SelectRows(a, idx) => {
                let av = val(*a);
                let mut ga = Tensor::zeros(av.rows(), av.cols());
                for (k, &r) in idx.iter().enumerate() {
                    for (o, x) in ga.row_mut(r).iter_mut().zip(g.row(k)) {
                        *o += x;
                    }
                }
                acc(grads, *a, ga);
            }
            Op::Column(a, c) => {
                let av = val(*a);
                let mut ga = Tensor::zeros(av.rows(), av.cols());
                for r in 0..av.rows() {
                    ga.set(r, *c, g.get(r, 0));
                }
                acc(grads, *a, ga);
            }
            Op::Broadcast(a) => acc(grads, *a, Tensor::scalar(g.sum())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity_and_relu() {
        let mut t = Tape::new();
        let a = Tensor::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let i = t.constant(Tensor::identity(2));
        let av = t.constant(a.clone());
        let p = t.matmul(i, av).unwrap();
        assert_eq!(t.value(p), &a);

        let x = t.constant(Tensor::from_vec(1, 2, vec![-1.0, 2.0]).unwrap());
        let r = t.relu(x);
        assert_eq!(t.value(r).data(), &[0.0, 2.0]);
    }

    #[test]
    fn softplus_values() {
        assert!((softplus_scalar(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((softplus_scalar(50.0) - 50.0).abs() < 1e-12);
        assert!(softplus_scalar(-700.0) > 0.0);
        assert!(softplus_scalar(1000.0).is_finite());
    }

    #[test]
    fn square_gradient() {
        let mut store = ParamStore::new();
        store.insert("theta", Tensor::scalar(3.0));
        let mut t = Tape::new();
        let th = t.param(&store, "theta").unwrap();
        let sq = t.square(th);
        t.backward(sq, &mut store).unwrap();
        assert_eq!(store.grad("theta").unwrap().item(), 6.0);
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let mut store = ParamStore::new();
        store.insert("w", Tensor::filled(2, 2, 1.5));
        let mut t = Tape::new();
        let _w = t.param(&store, "w").unwrap();
        let c = t.constant(Tensor::scalar(4.0));
        t.backward(c, &mut store).unwrap();
        assert!(store.grad("w").unwrap().data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_from_vector_is_rejected() {
        let mut store = ParamStore::new();
        let mut t = Tape::new();
        let v = t.constant(Tensor::zeros(3, 1));
        assert!(matches!(
            t.backward(v, &mut store),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn mean_aggregate_on_path() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let mut t = Tape::new();
        let h = t.constant(Tensor::column(vec![1.0, 5.0, 3.0]));
        let m = t.mean_aggregate(&g, h).unwrap();
        assert_eq!(t.value(m).data(), &[5.0, 2.0, 5.0]);

        let iso = Graph::empty(2);
        let h = t.constant(Tensor::filled(2, 3, 7.0));
        let m = t.mean_aggregate(&iso, h).unwrap();
        assert!(t.value(m).data().iter().all(|&x| x == 0.0));
        let bad = t.constant(Tensor::zeros(5, 1));
        assert!(t.mean_aggregate(&g, bad).is_err());
    }

    #[test]
    fn dropout_identities_and_errors() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::filled(4, 4, 1.0));
        assert_eq!(t.dropout(a, 0.0, 1, true).unwrap(), a);
        assert_eq!(t.dropout(a, 0.7, 1, false).unwrap(), a);
        assert!(t.dropout(a, 1.0, 1, true).is_err());
        let d1 = t.dropout(a, 0.5, 9, true).unwrap();
        let d2 = t.dropout(a, 0.5, 9, true).unwrap();
        assert_eq!(t.value(d1), t.value(d2));
    }

    #[test]
    fn dropout_is_unbiased() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::filled(1000, 100, 1.0));
        let d = t.dropout(a, 0.2, 5, true).unwrap();
        let mean = t.value(d).mean();
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn reductions_and_selection() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::from_vec(1, 2, vec![1.0, 3.0]).unwrap());
        let m = t.reduce_mean(a).unwrap();
        assert_eq!(t.value(m).item(), 2.0);
        let col = t.constant(Tensor::column(vec![1.0, 2.0, 3.0]));
        let s = t.masked_select(col, &[true, true, true]).unwrap();
        assert_eq!(t.value(s), t.value(col));
        let s = t.masked_select(col, &[false, true, false]).unwrap();
        assert_eq!(t.value(s).data(), &[2.0]);
        assert!(t.masked_select(col, &[true]).is_err());
    }

    #[test]
    fn shape_errors() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::zeros(2, 3));
        let b = t.constant(Tensor::zeros(2, 3));
        assert!(matches!(t.matmul(a, b), Err(Error::Shape(_))));
        let bias = t.constant(Tensor::zeros(1, 2));
        assert!(t.add_row_bias(a, bias).is_err());
        let c = t.constant(Tensor::zeros(3, 2));
        assert!(t.add(a, c).is_err());
    }
}
