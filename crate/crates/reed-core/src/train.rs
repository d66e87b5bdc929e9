//! Full-batch training of the encoder/decoder model.
//!
//! The optimizer minimizes the hinge surrogate of the margin loss over
//! the training triplets with Adam, and after every step projects each
//! learnable matrix back to the target Frobenius norm (when a target
//! is set). Gradients come from a fresh [`Tape`] per epoch; the loss
//! expression is batched per relation so the inner work is dense
//! matrix products.
//!
//! Everything is deterministic given the seed: initialization order,
//! relation iteration order, and the reduction order of the loss are
//! all fixed.

use crate::decoder::{
    score_all, DecoderKind, DecoderParams, ScorePair, SmDecoderParams, TdDecoderParams,
    TdRelationParams,
};
use crate::diffusion::{Aggregator, DiffusionSet};
use crate::encoder::{encode, Activation, ActivationTriple, EncoderLayer, EncoderParams, RepState};
use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, LabeledTriplet, Split, Triplet};
use crate::matrix::{frobenius_norm, is_identity, Mat};
use crate::tape::{NodeId, Tape};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::sync::Arc;

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Encoder layer count L (0 = decoder only).
    pub layers: usize,
    /// Entity hidden sizes d_1..d_{L+1} (shared, per the experimental
    /// protocol).
    pub hidden_dim: usize,
    /// Relation hidden sizes d'_1..d'_L.
    pub rel_hidden_dim: usize,
    pub decoder: DecoderKind,
    pub aggregator: Aggregator,
    /// Margin of the training objective.
    pub gamma: f64,
    /// Frobenius-norm target for every learnable matrix; 0 disables
    /// renormalization.
    pub s_target: f64,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            layers: 1,
            hidden_dim: 48,
            rel_hidden_dim: 48,
            decoder: DecoderKind::Td,
            aggregator: Aggregator::Mean,
            gamma: 0.75,
            s_target: 10.0,
            lr: 2e-4,
            epochs: 2000,
            seed: 0,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gamma <= 0.0 {
            return Err(Error::Argument(format!(
                "gamma must be positive, found {}",
                self.gamma
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Argument("epochs must be at least 1".into()));
        }
        if self.hidden_dim == 0 || (self.layers > 0 && self.rel_hidden_dim == 0) {
            return Err(Error::Argument("hidden dimensions must be positive".into()));
        }
        if self.s_target < 0.0 {
            return Err(Error::Argument(format!(
                "s_target must be non-negative, found {}",
                self.s_target
            )));
        }
        Ok(())
    }

    /// Parse a flat `key = value` config file body. Unknown keys are
    /// rejected; missing keys keep their defaults.
    pub fn from_key_values(body: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (lineno, raw) in body.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: "<config>".into(),
                line: lineno + 1,
                msg: format!("expected key = value, found {line:?}"),
            })?;
            cfg.apply_key(key.trim(), value.trim())
                .map_err(|e| Error::Parse {
                    path: "<config>".into(),
                    line: lineno + 1,
                    msg: e.to_string(),
                })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub(crate) fn apply_key(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Argument(format!("bad {what} value {value:?}"));
        match key {
            "layers" => self.layers = value.parse().map_err(|_| bad("layers"))?,
            "hidden_dim" => {
                self.hidden_dim = value.parse().map_err(|_| bad("hidden_dim"))?;
                self.rel_hidden_dim = self.hidden_dim;
            }
            "rel_hidden_dim" => {
                self.rel_hidden_dim = value.parse().map_err(|_| bad("rel_hidden_dim"))?
            }
            "decoder" => self.decoder = value.parse()?,
            "aggregator" => self.aggregator = value.parse()?,
            "gamma" => self.gamma = value.parse().map_err(|_| bad("gamma"))?,
            "s_target" => self.s_target = value.parse().map_err(|_| bad("s_target"))?,
            "lr" => self.lr = value.parse().map_err(|_| bad("lr"))?,
            "epochs" => self.epochs = value.parse().map_err(|_| bad("epochs"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "adam_beta1" => self.adam_betas.0 = value.parse().map_err(|_| bad("adam_beta1"))?,
            "adam_beta2" => self.adam_betas.1 = value.parse().map_err(|_| bad("adam_beta2"))?,
            "adam_eps" => self.adam_eps = value.parse().map_err(|_| bad("adam_eps"))?,
            other => {
                return Err(Error::Argument(format!("unknown config key {other:?}")));
            }
        }
        Ok(())
    }
}

/// Encoder plus decoder weights.
#[derive(Debug, Clone)]
pub struct Model {
    pub encoder: EncoderParams,
    pub decoder: DecoderParams,
}

impl Model {
    /// Learnable matrices in canonical order: per encoder layer W0,
    /// U0, then the per-relation W_r and U_r blocks; then the decoder
    /// matrices per relation per head.
    pub fn params(&self) -> Vec<&Mat> {
        let mut out = Vec::new();
        for layer in &self.encoder.layers {
            out.push(&layer.w_self);
            out.push(&layer.u_self);
            out.extend(layer.w_rel.iter());
            out.extend(layer.u_rel.iter());
        }
        match &self.decoder {
            DecoderParams::Td(d) => {
                for rel in &d.relations {
                    for j in 0..2 {
                        out.push(&rel.w[j]);
                        out.push(&rel.u[j]);
                        out.push(&rel.v[j]);
                    }
                }
            }
            DecoderParams::Sm(d) => {
                for rel in &d.relations {
                    out.extend(rel.iter());
                }
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Mat> {
        let mut out: Vec<&mut Mat> = Vec::new();
        for layer in &mut self.encoder.layers {
            out.push(&mut layer.w_self);
            out.push(&mut layer.u_self);
            out.extend(layer.w_rel.iter_mut());
            out.extend(layer.u_rel.iter_mut());
        }
        match &mut self.decoder {
            DecoderParams::Td(d) => {
                for rel in &mut d.relations {
                    let TdRelationParams { w, u, v } = rel;
                    for ((wj, uj), vj) in w.iter_mut().zip(u.iter_mut()).zip(v.iter_mut()) {
                        out.push(wj);
                        out.push(uj);
                        out.push(vj);
                    }
                }
            }
            DecoderParams::Sm(d) => {
                for rel in &mut d.relations {
                    for j in rel.iter_mut() {
                        out.push(j);
                    }
                }
            }
        }
        out
    }

    /// Canonical parameter names, aligned with [`Model::params`].
    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        let n_rel = self.decoder.n_relations();
        for l in 1..=self.encoder.n_layers() {
            out.push(format!("enc.l{l}.w0"));
            out.push(format!("enc.l{l}.u0"));
            for r in 0..n_rel {
                out.push(format!("enc.l{l}.w.r{r}"));
            }
            for r in 0..n_rel {
                out.push(format!("enc.l{l}.u.r{r}"));
            }
        }
        match self.decoder.kind() {
            DecoderKind::Td => {
                for r in 0..n_rel {
                    for j in 0..2 {
                        out.push(format!("dec.r{r}.j{j}.w"));
                        out.push(format!("dec.r{r}.j{j}.u"));
                        out.push(format!("dec.r{r}.j{j}.v"));
                    }
                }
            }
            DecoderKind::Sm => {
                for r in 0..n_rel {
                    for j in 0..2 {
                        out.push(format!("dec.r{r}.j{j}.u"));
                    }
                }
            }
        }
        out
    }

    /// Total learnable matrix count.
    pub fn n_matrices(&self) -> usize {
        self.params().len()
    }

    /// Maximum Frobenius norm over the encoder matrices of one layer
    /// (1-based), or over the decoder matrices for `layer == L + 1`.
    pub fn layer_norm_max(&self, layer: usize) -> f64 {
        let l_count = self.encoder.n_layers();
        if layer >= 1 && layer <= l_count {
            let lay = &self.encoder.layers[layer - 1];
            let mut m = frobenius_norm(&lay.w_self).max(frobenius_norm(&lay.u_self));
            for w in lay.w_rel.iter().chain(lay.u_rel.iter()) {
                m = m.max(frobenius_norm(w));
            }
            m
        } else {
            match &self.decoder {
                DecoderParams::Td(d) => d
                    .relations
                    .iter()
                    .flat_map(|r| r.w.iter().chain(r.u.iter()).chain(r.v.iter()))
                    .map(frobenius_norm)
                    .fold(0.0, f64::max),
                DecoderParams::Sm(d) => d
                    .relations
                    .iter()
                    .flat_map(|r| r.iter())
                    .map(frobenius_norm)
                    .fold(0.0, f64::max),
            }
        }
    }
}

/// Glorot-style initialization in canonical order, renormalized to the
/// Frobenius target when one is set.
pub fn init_model(
    config: &TrainConfig,
    n_relations: usize,
    d0: usize,
    d0_rel: usize,
) -> Result<Model> {
    config.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut draw = |rows: usize, cols: usize| -> Mat {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
    };

    let mut layers = Vec::with_capacity(config.layers);
    let mut d_prev = d0;
    let mut dr_prev = d0_rel;
    for _ in 0..config.layers {
        let d_next = config.hidden_dim;
        let dr_next = config.rel_hidden_dim;
        layers.push(EncoderLayer {
            w_self: draw(d_prev, d_next),
            u_self: draw(dr_prev, dr_next),
            w_rel: (0..n_relations).map(|_| draw(d_prev, d_next)).collect(),
            u_rel: (0..n_relations).map(|_| draw(dr_prev, d_next)).collect(),
        });
        d_prev = d_next;
        dr_prev = dr_next;
    }
    let d_out = config.hidden_dim;
    let decoder = match config.decoder {
        DecoderKind::Td => DecoderParams::Td(TdDecoderParams {
            relations: (0..n_relations)
                .map(|_| TdRelationParams {
                    w: [draw(d_prev, d_out), draw(d_prev, d_out)],
                    u: [draw(dr_prev, d_out), draw(dr_prev, d_out)],
                    v: [draw(d_prev, d_out), draw(d_prev, d_out)],
                })
                .collect(),
        }),
        DecoderKind::Sm => DecoderParams::Sm(SmDecoderParams {
            relations: (0..n_relations)
                .map(|_| [draw(d_prev, d_prev), draw(d_prev, d_prev)])
                .collect(),
        }),
    };
    let mut model = Model {
        encoder: EncoderParams {
            layers,
            activations: ActivationTriple::default_experiment(),
        },
        decoder,
    };
    if config.s_target > 0.0 {
        renormalize_weights(&mut model, config.s_target)?;
    }
    Ok(model)
}

/// Rescale every learnable matrix to Frobenius norm `s_target`.
/// Errors on an exactly-zero matrix.
pub fn renormalize_weights(model: &mut Model, s_target: f64) -> Result<()> {
    if s_target <= 0.0 {
        return Err(Error::Argument(format!(
            "s_target must be positive, found {s_target}"
        )));
    }
    for m in model.params_mut() {
        let norm = frobenius_norm(m);
        if norm == 0.0 {
            return Err(Error::Validation(
                "cannot renormalize an exactly-zero matrix".into(),
            ));
        }
        let factor = s_target / norm;
        m.mapv_inplace(|x| x * factor);
    }
    Ok(())
}

/// Adam with bias correction.
struct Adam {
    m: Vec<Mat>,
    v: Vec<Mat>,
    t: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    fn new(shapes: &[&Mat], lr: f64, betas: (f64, f64), eps: f64) -> Self {
        Adam {
            m: shapes.iter().map(|p| Array2::zeros(p.dim())).collect(),
            v: shapes.iter().map(|p| Array2::zeros(p.dim())).collect(),
            t: 0,
            lr,
            beta1: betas.0,
            beta2: betas.1,
            eps,
        }
    }

    fn step(&mut self, params: &mut [&mut Mat], grads: &crate::tape::Gradients) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, p) in params.iter_mut().enumerate() {
            let g = grads.param(i);
            self.m[i].zip_mut_with(g, |m, &g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
            self.v[i]
                .zip_mut_with(g, |v, &g| *v = self.beta2 * *v + (1.0 - self.beta2) * g * g);
            let (m, v) = (&self.m[i], &self.v[i]);
            ndarray::Zip::from(&mut **p).and(m).and(v).for_each(|p, &m, &v| {
                *p -= self.lr * (m / bc1) / ((v / bc2).sqrt() + self.eps);
            });
        }
    }
}

/// Per-relation training batch: triplet endpoints plus the positions
/// of positive and negative triplets within the batch.
#[derive(Debug, Clone)]
struct RelationBatch {
    relation: usize,
    heads: Arc<Vec<usize>>,
    tails: Arc<Vec<usize>>,
    pos_rows: Arc<Vec<usize>>,
    neg_rows: Arc<Vec<usize>>,
}

/// Everything needed to rebuild the training-loss expression on a
/// fresh tape: constants, batches, and the model layout. Parameters
/// arrive as tape leaves in canonical order, which keeps the builder
/// reusable for the finite-difference gradient oracle.
pub struct LossPlan {
    x_ent: Mat,
    x_rel: Mat,
    sparse: Vec<crate::matrix::CsrMatrix>,
    row_sums: Vec<Vec<f64>>,
    batches: Vec<RelationBatch>,
    total_triplets: usize,
    gamma: f64,
    layers: usize,
    n_rel: usize,
    decoder: DecoderKind,
    activations: ActivationTriple,
    one_hot: bool,
}

fn tape_activation(tape: &mut Tape, act: Activation, x: NodeId) -> Result<NodeId> {
    match act {
        Activation::Identity => Ok(x),
        Activation::Relu => Ok(tape.leaky_relu(x, 0.0)),
        Activation::LeakyRelu(slope) => Ok(tape.leaky_relu(x, slope)),
        Activation::Tanh => Err(Error::Argument(
            "tanh is not differentiable on this tape; training supports identity/ReLU/LeakyReLU"
                .into(),
        )),
    }
}

impl LossPlan {
    pub fn new(
        graph: &KnowledgeGraph,
        diffusion: &DiffusionSet,
        train: &[LabeledTriplet],
        model: &Model,
        gamma: f64,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Argument("training set is empty".into()));
        }
        if gamma <= 0.0 {
            return Err(Error::Argument("gamma must be positive".into()));
        }
        let n_rel = graph.n_relations();
        let mut grouped: Vec<Vec<LabeledTriplet>> = vec![Vec::new(); n_rel];
        for lt in train {
            grouped[lt.triplet.relation].push(*lt);
        }
        let mut batches = Vec::new();
        for (relation, triplets) in grouped.into_iter().enumerate() {
            if triplets.is_empty() {
                continue;
            }
            let heads: Vec<usize> = triplets.iter().map(|lt| lt.triplet.head).collect();
            let tails: Vec<usize> = triplets.iter().map(|lt| lt.triplet.tail).collect();
            let pos_rows: Vec<usize> = triplets
                .iter()
                .enumerate()
                .filter(|(_, lt)| lt.label)
                .map(|(i, _)| i)
                .collect();
            let neg_rows: Vec<usize> = triplets
                .iter()
                .enumerate()
                .filter(|(_, lt)| !lt.label)
                .map(|(i, _)| i)
                .collect();
            batches.push(RelationBatch {
                relation,
                heads: Arc::new(heads),
                tails: Arc::new(tails),
                pos_rows: Arc::new(pos_rows),
                neg_rows: Arc::new(neg_rows),
            });
        }
        let one_hot = is_identity(graph.ent_features())
            && is_identity(graph.rel_features())
            && model.encoder.activations.psi.is_identity();
        Ok(LossPlan {
            x_ent: graph.ent_features().clone(),
            x_rel: graph.rel_features().clone(),
            sparse: (0..n_rel).map(|r| diffusion.matrix(r).clone()).collect(),
            row_sums: (0..n_rel).map(|r| diffusion.matrix(r).row_sums()).collect(),
            batches,
            total_triplets: train.len(),
            gamma,
            layers: model.encoder.n_layers(),
            n_rel,
            decoder: model.decoder.kind(),
            activations: model.encoder.activations,
            one_hot,
        })
    }

    /// Flat-id layout: encoder layer `l` starts at `l * (2 + 2R)`;
    /// decoder follows all encoder layers.
    fn dec_base(&self) -> usize {
        self.layers * (2 + 2 * self.n_rel)
    }

    /// Build the scalar hinge loss. `ids` are the parameter leaves in
    /// canonical order.
    pub fn build(&self, tape: &mut Tape, ids: &[NodeId]) -> Result<NodeId> {
        let expected = self.dec_base()
            + match self.decoder {
                DecoderKind::Td => 6 * self.n_rel,
                DecoderKind::Sm => 2 * self.n_rel,
            };
        if ids.len() != expected {
            return Err(Error::Argument(format!(
                "loss plan expects {expected} parameters, found {}",
                ids.len()
            )));
        }

        let sparse_ids: Vec<_> = self
            .sparse
            .iter()
            .map(|s| tape.sparse_constant(s.clone()))
            .collect();
        let mut h = tape.constant(self.x_ent.clone());
        let mut r = tape.constant(self.x_rel.clone());
        let mut h_is_raw_one_hot = self.one_hot;

        for l in 0..self.layers {
            let base = l * (2 + 2 * self.n_rel);
            let w0 = ids[base];
            let u0 = ids[base + 1];
            let w_rel = &ids[base + 2..base + 2 + self.n_rel];
            let u_rel = &ids[base + 2 + self.n_rel..base + 2 + 2 * self.n_rel];

            let psi_h = if h_is_raw_one_hot {
                h // only consumed through the aliasing branch below
            } else {
                tape_activation(tape, self.activations.psi, h)?
            };
            let psi_r = if h_is_raw_one_hot {
                r
            } else {
                tape_activation(tape, self.activations.psi, r)?
            };

            let mut agg: Option<NodeId> = None;
            for rel in 0..self.n_rel {
                if self.sparse[rel].nnz() == 0 {
                    continue;
                }
                let projected = if h_is_raw_one_hot {
                    w_rel[rel]
                } else {
                    tape.matmul(psi_h, w_rel[rel])?
                };
                let mut term = tape.sparse_matmul(sparse_ids[rel], projected)?;
                let u_msg = if h_is_raw_one_hot {
                    tape.row_select(u_rel[rel], rel)?
                } else {
                    let r_row = tape.row_select(psi_r, rel)?;
                    tape.matmul(r_row, u_rel[rel])?
                };
                let sums = &self.row_sums[rel];
                if sums.iter().any(|&s| s != 0.0) {
                    let col = Array2::from_shape_fn((sums.len(), 1), |(i, _)| sums[i]);
                    let col = tape.constant(col);
                    let broadcast = tape.matmul(col, u_msg)?;
                    term = tape.add(term, broadcast)?;
                }
                agg = Some(match agg {
                    Some(a) => tape.add(a, term)?,
                    None => term,
                });
            }

            let self_term = if h_is_raw_one_hot {
                w0
            } else {
                tape.matmul(h, w0)?
            };
            let pre = match agg {
                Some(a) => {
                    let msg = tape_activation(tape, self.activations.rho, a)?;
                    tape.add(self_term, msg)?
                }
                None => self_term,
            };
            h = tape_activation(tape, self.activations.phi, pre)?;
            r = if h_is_raw_one_hot {
                u0
            } else {
                tape.matmul(r, u0)?
            };
            h_is_raw_one_hot = false;
        }

        // decoder scores and hinge terms, batched per relation
        let dec = self.dec_base();
        let mut total: Option<NodeId> = None;
        for batch in &self.batches {
            let rel = batch.relation;
            let k = batch.heads.len();
            let scores: [NodeId; 2] = match self.decoder {
                DecoderKind::Td => {
                    let mut out = [None, None];
                    for j in 0..2 {
                        let w = ids[dec + rel * 6 + j * 3];
                        let u = ids[dec + rel * 6 + j * 3 + 1];
                        let v = ids[dec + rel * 6 + j * 3 + 2];
                        let (proj_w, proj_v, u_row) = if h_is_raw_one_hot {
                            (w, v, tape.row_select(u, rel)?)
                        } else {
                            let r_row = tape.row_select(r, rel)?;
                            (
                                tape.matmul(h, w)?,
                                tape.matmul(h, v)?,
                                tape.matmul(r_row, u)?,
                            )
                        };
                        let hh = tape.gather_rows(proj_w, batch.heads.clone())?;
                        let ht = tape.gather_rows(proj_v, batch.tails.clone())?;
                        let ones = tape.constant(Array2::ones((k, 1)));
                        let rel_bias = tape.matmul(ones, u_row)?;
                        let shifted = tape.add(hh, rel_bias)?;
                        let residual = tape.subtract(shifted, ht)?;
                        let norms = tape.euclidean_norm(residual);
                        out[j] = Some(tape.negate(norms));
                    }
                    [out[0].unwrap(), out[1].unwrap()]
                }
                DecoderKind::Sm => {
                    let mut out = [None, None];
                    for j in 0..2 {
                        let u = ids[dec + rel * 2 + j];
                        let proj = if h_is_raw_one_hot {
                            u
                        } else {
                            tape.matmul(h, u)?
                        };
                        let hh = tape.gather_rows(proj, batch.heads.clone())?;
                        let ht = tape.gather_rows(h, batch.tails.clone())?;
                        let prod = tape.elementwise_product(hh, ht)?;
                        // per-row sum: prod (k x d) * ones (d x 1)
                        let d = tape.value(prod).ncols();
                        let ones_col = tape.constant(Array2::ones((d, 1)));
                        out[j] = Some(tape.matmul(prod, ones_col)?);
                    }
                    [out[0].unwrap(), out[1].unwrap()]
                }
            };

            // gap = f[y] - f[1-y]; hinge = relu(gamma - gap)
            let diff = tape.subtract(scores[1], scores[0])?; // s1 - s0, k x 1
            for (rows, positive) in [(&batch.pos_rows, true), (&batch.neg_rows, false)] {
                if rows.is_empty() {
                    continue;
                }
                let gap_signed = tape.gather_rows(diff, (*rows).clone())?;
                let gap = if positive {
                    gap_signed
                } else {
                    tape.negate(gap_signed)
                };
                let gamma_col = tape.constant(Array2::from_elem((rows.len(), 1), self.gamma));
                let violation = tape.subtract(gamma_col, gap)?;
                let hinge = tape.leaky_relu(violation, 0.0);
                let ones_row = tape.constant(Array2::ones((1, rows.len())));
                let summed = tape.matmul(ones_row, hinge)?;
                total = Some(match total {
                    Some(t) => tape.add(t, summed)?,
                    None => summed,
                });
            }
        }
        let total = total.ok_or_else(|| Error::Argument("no training batches".into()))?;
        Ok(tape.scale(total, 1.0 / self.total_triplets as f64))
    }
}

/// Per-epoch statistics passed to training observers.
#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: usize,
    pub hinge_loss: f64,
    pub grad_max: f64,
    /// Maximum |Frobenius norm - s_target| over all matrices after the
    /// step (0 when renormalization is off).
    pub norm_deviation: f64,
}

/// A trained model with its configuration and dataset provenance.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: Model,
    pub config: TrainConfig,
    pub dataset_hash: [u8; 32],
}

/// Full-batch Adam on the hinge surrogate over the training split.
pub fn train(graph: &KnowledgeGraph, split: &Split, config: &TrainConfig) -> Result<TrainedModel> {
    train_with_observer(graph, split, config, |_| {})
}

/// [`train`] with a per-epoch observer.
pub fn train_with_observer(
    graph: &KnowledgeGraph,
    split: &Split,
    config: &TrainConfig,
    mut observer: impl FnMut(&EpochStats),
) -> Result<TrainedModel> {
    config.validate()?;
    let train_set = split.train_triplets(graph);
    if train_set.is_empty() {
        return Err(Error::Argument("training split is empty".into()));
    }
    let diffusion = DiffusionSet::for_split(graph, split, config.aggregator);
    let mut model = init_model(
        config,
        graph.n_relations(),
        graph.ent_features().ncols(),
        graph.rel_features().ncols(),
    )?;
    let plan = LossPlan::new(graph, &diffusion, &train_set, &model, config.gamma)?;

    let mut adam = {
        let params = model.params();
        Adam::new(&params, config.lr, config.adam_betas, config.adam_eps)
    };

    for epoch in 1..=config.epochs {
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = model.params().iter().map(|p| tape.param((*p).clone())).collect();
        let loss_node = plan.build(&mut tape, &ids)?;
        let loss = tape.scalar(loss_node)?;
        let grads = tape.backward(loss_node)?;
        let grad_max = grads.max_abs();
        if !loss.is_finite() || !grad_max.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch,
                loss,
                max_grad: grad_max,
            });
        }
        {
            let mut params = model.params_mut();
            adam.step(&mut params, &grads);
        }
        if config.s_target > 0.0 {
            renormalize_weights(&mut model, config.s_target)?;
        }
        let norm_deviation = if config.s_target > 0.0 {
            model
                .params()
                .iter()
                .map(|m| (frobenius_norm(m) - config.s_target).abs())
                .fold(0.0, f64::max)
        } else {
            0.0
        };
        observer(&EpochStats {
            epoch,
            hinge_loss: loss,
            grad_max,
            norm_deviation,
        });
    }

    Ok(TrainedModel {
        model,
        config: config.clone(),
        dataset_hash: graph.dataset_hash(),
    })
}

/// Encode and score a triplet list (plain forward path).
pub fn forward_scores(
    model: &Model,
    graph: &KnowledgeGraph,
    diffusion: &DiffusionSet,
    triplets: &[Triplet],
) -> Result<Vec<ScorePair>> {
    let state = encode_graph(model, graph, diffusion)?;
    score_all(&state, &model.decoder, triplets)
}

/// Run the encoder over a graph's features.
pub fn encode_graph(
    model: &Model,
    graph: &KnowledgeGraph,
    diffusion: &DiffusionSet,
) -> Result<RepState> {
    encode(
        graph.ent_features(),
        graph.rel_features(),
        diffusion,
        &model.encoder,
    )
}

/// Margin loss on the training split and classification loss on the
/// full set — the two quantities whose gap is the generalization
/// error.
pub fn evaluate_losses(
    trained: &TrainedModel,
    graph: &KnowledgeGraph,
    split: &Split,
    diffusion: &DiffusionSet,
) -> Result<EvaluatedLosses> {
    let state = encode_graph(&trained.model, graph, diffusion)?;
    let all = graph.all_triplets();
    let all_triplets: Vec<Triplet> = all.iter().map(|lt| lt.triplet).collect();
    let all_labels: Vec<bool> = all.iter().map(|lt| lt.label).collect();
    let all_scores = score_all(&state, &trained.model.decoder, &all_triplets)?;

    let train_rows = split.train_indices();
    let train_scores: Vec<ScorePair> = train_rows.iter().map(|&i| all_scores[i]).collect();
    let train_labels: Vec<bool> = train_rows.iter().map(|&i| all_labels[i]).collect();

    let empirical_margin =
        crate::loss::margin_loss(&train_scores, &train_labels, trained.config.gamma)?;
    let expected_cls = crate::loss::classification_loss(&all_scores, &all_labels)?;
    let holdout: Vec<usize> = {
        let train_set: std::collections::HashSet<usize> = train_rows.iter().copied().collect();
        (0..all.len()).filter(|i| !train_set.contains(i)).collect()
    };
    let holdout_cls = if holdout.is_empty() {
        f64::NAN
    } else {
        let s: Vec<ScorePair> = holdout.iter().map(|&i| all_scores[i]).collect();
        let l: Vec<bool> = holdout.iter().map(|&i| all_labels[i]).collect();
        crate::loss::classification_loss(&s, &l)?
    };
    Ok(EvaluatedLosses {
        empirical_margin,
        expected_cls,
        holdout_cls,
    })
}

/// The loss pair of one run (plus the holdout-only classification loss
/// for the non-default generalization-error convention).
#[derive(Debug, Clone, Copy)]
pub struct EvaluatedLosses {
    /// Margin loss on the training split.
    pub empirical_margin: f64,
    /// Classification loss on the full labeled set.
    pub expected_cls: f64,
    /// Classification loss on the complement of the training split.
    pub holdout_cls: f64,
}

impl EvaluatedLosses {
    /// Generalization error: expected loss minus empirical margin loss.
    pub fn gen_error(&self) -> f64 {
        self.expected_cls - self.empirical_margin
    }
}
