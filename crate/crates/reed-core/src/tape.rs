//! Minimal reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records an append-only sequence of matrix operations with
//! eagerly computed forward values. Node ids are topologically ordered
//! by construction, so [`Tape::backward`] is a single reverse sweep
//! that accumulates gradients into every registered parameter.
//!
//! The op set is exactly what the message-passing encoder, the two
//! triplet decoders, and the hinge training objective need: matrix
//! multiplication (dense and against a constant sparse operand), row
//! gathering, horizontal concatenation, addition, subtraction, scaling,
//! negation, elementwise product, LeakyReLU, and per-row Euclidean
//! norms. Scalars are 1x1 matrices.
//!
//! [`grad_check`] is the finite-difference oracle used by the tests:
//! central differences on a random sample of parameter coordinates,
//! with coordinates skipped when a perturbation flips the branch of
//! any LeakyReLU entry (finite differences across a kink measure the
//! wrong thing).

use crate::error::{Error, Result};
use crate::matrix::{CsrMatrix, Mat};
use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::sync::Arc;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

/// Handle to a sparse constant registered on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SparseId(usize);

#[derive(Debug, Clone)]
enum Op {
    /// Constant or parameter leaf.
    Leaf,
    MatMul(NodeId, NodeId),
    /// Sparse constant times dense node.
    SpMatMul(SparseId, NodeId),
    GatherRows(NodeId, Arc<Vec<usize>>),
    HConcat(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Scale(NodeId, f64),
    Negate(NodeId),
    Mul(NodeId, NodeId),
    LeakyRelu(NodeId, f64),
    /// Per-row Euclidean norm: k x d -> k x 1.
    RowNorms(NodeId),
}

/// Gradients per registered parameter, in registration order.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Mat>,
}

impl Gradients {
    /// Gradient of the `i`-th registered parameter.
    pub fn param(&self, i: usize) -> &Mat {
        &self.grads[i]
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Mat> {
        self.grads.iter()
    }

    pub fn max_abs(&self) -> f64 {
        self.grads
            .iter()
            .flat_map(|g| g.iter())
            .map(|x| x.abs())
            .fold(0.0, f64::max)
    }
}

/// Append-only computation tape.
pub struct Tape {
    ops: Vec<Op>,
    values: Vec<Mat>,
    needs_grad: Vec<bool>,
    params: Vec<NodeId>,
    sparse: Vec<CsrMatrix>,
    /// FNV hash of the sign pattern of every LeakyReLU input entry,
    /// in evaluation order. Two evaluations of the same expression
    /// with different hashes crossed an activation kink.
    kink_signature: u64,
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            ops: Vec::new(),
            values: Vec::new(),
            needs_grad: Vec::new(),
            params: Vec::new(),
            sparse: Vec::new(),
            kink_signature: FNV_OFFSET,
        }
    }

    fn push(&mut self, op: Op, value: Mat, needs_grad: bool) -> NodeId {
        let id = NodeId(self.ops.len());
        self.ops.push(op);
        self.values.push(value);
        self.needs_grad.push(needs_grad);
        id
    }

    /// Register a non-trainable constant.
    pub fn constant(&mut self, value: Mat) -> NodeId {
        self.push(Op::Leaf, value, false)
    }

    /// Register a trainable parameter leaf.
    pub fn param(&mut self, value: Mat) -> NodeId {
        let id = self.push(Op::Leaf, value, true);
        self.params.push(id);
        id
    }

    /// Register a sparse constant for [`Tape::sparse_matmul`].
    pub fn sparse_constant(&mut self, m: CsrMatrix) -> SparseId {
        self.sparse.push(m);
        SparseId(self.sparse.len() - 1)
    }

    /// Forward value of a node.
    pub fn value(&self, id: NodeId) -> &Mat {
        &self.values[id.0]
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, id: NodeId) -> Result<f64> {
        let v = self.value(id);
        if v.dim() != (1, 1) {
            return Err(Error::Validation(format!(
                "expected scalar node, found {}x{}",
                v.nrows(),
                v.ncols()
            )));
        }
        Ok(v[(0, 0)])
    }

    /// Hash of the LeakyReLU branch pattern seen during forward
    /// evaluation; see [`grad_check`].
    pub fn kink_signature(&self) -> u64 {
        self.kink_signature
    }

    fn dims(&self, id: NodeId) -> (usize, usize) {
        self.values[id.0].dim()
    }

    fn shape_err(&self, op: &str, a: NodeId, b: NodeId) -> Error {
        Error::Shape {
            op: op.to_string(),
            left: self.dims(a),
            right: self.dims(b),
        }
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ar, ac) = self.dims(a);
        let (br, bc) = self.dims(b);
        if ac != br {
            return Err(self.shape_err("matmul", a, b));
        }
        let value = self.values[a.0].dot(&self.values[b.0]);
        let ng = self.needs_grad[a.0] || self.needs_grad[b.0];
        let _ = (ar, bc);
        Ok(self.push(Op::MatMul(a, b), value, ng))
    }

    /// Constant sparse matrix times dense node.
    pub fn sparse_matmul(&mut self, s: SparseId, b: NodeId) -> Result<NodeId> {
        let sm = &self.sparse[s.0];
        let (br, _) = self.dims(b);
        if sm.cols != br {
            return Err(Error::Shape {
                op: "sparse_matmul".to_string(),
                left: (sm.rows, sm.cols),
                right: self.dims(b),
            });
        }
        let value = sm.matmul_dense(&self.values[b.0]);
        let ng = self.needs_grad[b.0];
        Ok(self.push(Op::SpMatMul(s, b), value, ng))
    }

    /// Select one row as a 1 x d node.
    pub fn row_select(&mut self, a: NodeId, row: usize) -> Result<NodeId> {
        self.gather_rows(a, Arc::new(vec![row]))
    }

    /// Gather rows by index into a k x d node.
    pub fn gather_rows(&mut self, a: NodeId, rows: Arc<Vec<usize>>) -> Result<NodeId> {
        let (ar, ac) = self.dims(a);
        if let Some(&bad) = rows.iter().find(|&&r| r >= ar) {
            return Err(Error::Argument(format!(
                "gather_rows: row {bad} out of range for {ar}x{ac} matrix"
            )));
        }
        let src = &self.values[a.0];
        let mut value = Array2::zeros((rows.len(), ac));
        for (i, &r) in rows.iter().enumerate() {
            value.row_mut(i).assign(&src.row(r));
        }
        let ng = self.needs_grad[a.0];
        Ok(self.push(Op::GatherRows(a, rows), value, ng))
    }

    /// Horizontal concatenation [a | b] of two nodes with equal row counts.
    pub fn horizontal_concat(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ar, _) = self.dims(a);
        let (br, _) = self.dims(b);
        if ar != br {
            return Err(self.shape_err("horizontal_concat", a, b));
        }
        let value = ndarray::concatenate(
            Axis(1),
            &[self.values[a.0].view(), self.values[b.0].view()],
        )
        .expect("hconcat row counts checked");
        let ng = self.needs_grad[a.0] || self.needs_grad[b.0];
        Ok(self.push(Op::HConcat(a, b), value, ng))
    }

    fn binary_same_shape(&mut self, op: &str, a: NodeId, b: NodeId) -> Result<()> {
        if self.dims(a) != self.dims(b) {
            return Err(self.shape_err(op, a, b));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape("add", a, b)?;
        let value = &self.values[a.0] + &self.values[b.0];
        let ng = self.needs_grad[a.0] || self.needs_grad[b.0];
        Ok(self.push(Op::Add(a, b), value, ng))
    }

    pub fn subtract(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape("subtract", a, b)?;
        let value = &self.values[a.0] - &self.values[b.0];
        let ng = self.needs_grad[a.0] || self.needs_grad[b.0];
        Ok(self.push(Op::Sub(a, b), value, ng))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let value = &self.values[a.0] * factor;
        let ng = self.needs_grad[a.0];
        self.push(Op::Scale(a, factor), value, ng)
    }

    pub fn negate(&mut self, a: NodeId) -> NodeId {
        let value = -&self.values[a.0];
        let ng = self.needs_grad[a.0];
        self.push(Op::Negate(a), value, ng)
    }

    /// Elementwise product of two same-shape nodes.
    pub fn elementwise_product(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape("elementwise_product", a, b)?;
        let value = &self.values[a.0] * &self.values[b.0];
        let ng = self.needs_grad[a.0] || self.needs_grad[b.0];
        Ok(self.push(Op::Mul(a, b), value, ng))
    }

    /// LeakyReLU with the given negative slope; a slope of 0 is ReLU.
    /// The subgradient at 0 uses the positive branch (slope 1).
    pub fn leaky_relu(&mut self, a: NodeId, slope: f64) -> NodeId {
        let mut sig = self.kink_signature;
        let value = self.values[a.0].mapv(|x| {
            sig = (sig ^ u64::from(x >= 0.0)).wrapping_mul(FNV_PRIME);
            if x >= 0.0 {
                x
            } else {
                slope * x
            }
        });
        self.kink_signature = sig;
        let ng = self.needs_grad[a.0];
        self.push(Op::LeakyRelu(a, slope), value, ng)
    }

    /// Per-row Euclidean norm: k x d input yields a k x 1 node. A 1 x d
    /// vector therefore yields its scalar norm.
    pub fn euclidean_norm(&mut self, a: NodeId) -> NodeId {
        let src = &self.values[a.0];
        let mut value = Array2::zeros((src.nrows(), 1));
        for (i, row) in src.rows().into_iter().enumerate() {
            value[(i, 0)] = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        }
        let ng = self.needs_grad[a.0];
        self.push(Op::RowNorms(a), value, ng)
    }

    /// Reverse sweep from a scalar root. Returns gradients for every
    /// registered parameter (zeros for parameters the root does not
    /// depend on).
    pub fn backward(&self, root: NodeId) -> Result<Gradients> {
        if self.dims(root) != (1, 1) {
            return Err(Error::Validation(format!(
                "backward root must be scalar, found {}x{}",
                self.dims(root).0,
                self.dims(root).1
            )));
        }
        let mut grads: Vec<Option<Mat>> = vec![None; self.ops.len()];
        grads[root.0] = Some(Array2::ones((1, 1)));

        for id in (0..=root.0).rev() {
            let g = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            match &self.ops[id] {
                Op::Leaf => {
                    grads[id] = Some(g); // keep for parameter collection
                    continue;
                }
                Op::MatMul(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.needs_grad[a.0] {
                        let da = g.dot(&self.values[b.0].t());
                        accumulate(&mut grads[a.0], da);
                    }
                    if self.needs_grad[b.0] {
                        let db = self.values[a.0].t().dot(&g);
                        accumulate(&mut grads[b.0], db);
                    }
                }
                Op::SpMatMul(s, b) => {
                    let (s, b) = (*s, *b);
                    if self.needs_grad[b.0] {
                        let db = self.sparse[s.0].transpose_matmul_dense(&g);
                        accumulate(&mut grads[b.0], db);
                    }
                }
                Op::GatherRows(a, rows) => {
                    let a = *a;
                    if self.needs_grad[a.0] {
                        let mut da = Array2::zeros(self.dims(a));
                        for (i, &r) in rows.iter().enumerate() {
                            let mut dst = da.row_mut(r);
                            dst += &g.row(i);
                        }
                        accumulate(&mut grads[a.0], da);
                    }
                }
                Op::HConcat(a, b) => {
                    let (a, b) = (*a, *b);
                    let ac = self.dims(a).1;
                    if self.needs_grad[a.0] {
                        let da = g.slice(ndarray::s![.., ..ac]).to_owned();
                        accumulate(&mut grads[a.0], da);
                    }
                    if self.needs_grad[b.0] {
                        let db = g.slice(ndarray::s![.., ac..]).to_owned();
                        accumulate(&mut grads[b.0], db);
                    }
                }
                Op::Add(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.needs_grad[a.0] {
                        accumulate(&mut grads[a.0], g.clone());
                    }
                    if self.needs_grad[b.0] {
                        accumulate(&mut grads[b.0], g.clone());
                    }
                }
                Op::Sub(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.needs_grad[a.0] {
                        accumulate(&mut grads[a.0], g.clone());
                    }
                    if self.needs_grad[b.0] {
                        accumulate(&mut grads[b.0], -&g);
                    }
                }
                Op::Scale(a, c) => {
                    let (a, c) = (*a, *c);
                    if self.needs_grad[a.0] {
                        accumulate(&mut grads[a.0], &g * c);
                    }
                }
                Op::Negate(a) => {
                    let a = *a;
                    if self.needs_grad[a.0] {
                        accumulate(&mut grads[a.0], -&g);
                    }
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.needs_grad[a.0] {
                        let da = &g * &self.values[b.0];
                        accumulate(&mut grads[a.0], da);
                    }
                    if self.needs_grad[b.0] {
                        let db = &g * &self.values[a.0];
                        accumulate(&mut grads[b.0], db);
                    }
                }
                Op::LeakyRelu(a, slope) => {
                    let (a, slope) = (*a, *slope);
                    if self.needs_grad[a.0] {
                        let mask = self.values[a.0].mapv(|x| if x >= 0.0 { 1.0 } else { slope });
                        accumulate(&mut grads[a.0], &g * &mask);
                    }
                }
                Op::RowNorms(a) => {
                    let a = *a;
                    if self.needs_grad[a.0] {
                        let src = &self.values[a.0];
                        let norms = &self.values[id];
                        let mut da = Array2::zeros(src.dim());
                        for i in 0..src.nrows() {
                            let n = norms[(i, 0)];
                            if n > 0.0 {
                                let scale = g[(i, 0)] / n;
                                let mut dst = da.row_mut(i);
                                dst.assign(&src.row(i));
                                dst *= scale;
                            }
                        }
                        accumulate(&mut grads[a.0], da);
                    }
                }
            }
        }

        let collected = self
            .params
            .iter()
            .map(|&p| grads[p.0].take().unwrap_or_else(|| Array2::zeros(self.dims(p))))
            .collect();
        Ok(Gradients { grads: collected })
    }
}

fn accumulate(slot: &mut Option<Mat>, g: Mat) {
    match slot {
        Some(existing) => *existing += &g,
        None => *slot = Some(g),
    }
}

/// Central-finite-difference check of [`Tape::backward`].
///
/// `build` must construct the same scalar expression every time it is
/// called, registering one parameter leaf per entry of `params` in
/// order. Up to `samples_per_param` coordinates per parameter are
/// perturbed by `+/-eps`; a coordinate is skipped when any of the three
/// evaluations disagrees on a LeakyReLU branch (the perturbation
/// crossed a kink). Returns the maximum relative deviation between the
/// finite-difference and reverse-mode derivatives.
pub fn grad_check<F>(
    params: &[Mat],
    build: F,
    eps: f64,
    samples_per_param: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId>,
{
    if eps <= 0.0 {
        return Err(Error::Argument("grad_check: eps must be positive".into()));
    }
    let evaluate = |values: &[Mat]| -> Result<(f64, u64)> {
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = values.iter().map(|v| tape.param(v.clone())).collect();
        let root = build(&mut tape, &ids)?;
        Ok((tape.scalar(root)?, tape.kink_signature()))
    };

    // analytic gradients at the base point
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = params.iter().map(|v| tape.param(v.clone())).collect();
    let root = build(&mut tape, &ids)?;
    let base_sig = tape.kink_signature();
    let analytic = tape.backward(root)?;

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut max_rel = 0.0f64;
    let mut work: Vec<Mat> = params.to_vec();

    for (pi, p) in params.iter().enumerate() {
        let total = p.len();
        let coords: Vec<usize> = if total <= samples_per_param {
            (0..total).collect()
        } else {
            // sample distinct flat coordinates
            let mut chosen = std::collections::BTreeSet::new();
            while chosen.len() < samples_per_param {
                chosen.insert(rng.gen_range(0..total));
            }
            chosen.into_iter().collect()
        };
        let (rows, cols) = p.dim();
        let _ = rows;
        for flat in coords {
            let coord = (flat / cols, flat % cols);
            let original = work[pi][coord];
            work[pi][coord] = original + eps;
            let (f_plus, sig_plus) = evaluate(&work)?;
            work[pi][coord] = original - eps;
            let (f_minus, sig_minus) = evaluate(&work)?;
            work[pi][coord] = original;

            if sig_plus != base_sig || sig_minus != base_sig {
                continue; // crossed an activation kink
            }
            let fd = (f_plus - f_minus) / (2.0 * eps);
            let an = analytic.param(pi)[coord];
            let denom = fd.abs().max(an.abs());
            if denom > 1e-12 {
                max_rel = max_rel.max((fd - an).abs() / denom);
            }
        }
    }
    Ok(max_rel)
}
