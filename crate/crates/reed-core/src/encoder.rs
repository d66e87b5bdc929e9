//! Relation-aware message-passing encoder.
//!
//! Layer update for entity representations `H` and relation
//! representations `R` (layer 0 is the raw features):
//!
//! ```text
//! H_l = phi( H_{l-1} W0_l + rho( sum_r S_r psi([H_{l-1} | R_{l-1}[r,:]]) [Wr_l; Ur_l] ) )
//! R_l = R_{l-1} U0_l
//! ```
//!
//! The concatenated message matrix is never materialized: for an
//! elementwise `psi` the block product splits into
//! `S_r (psi(H) Wr) + (S_r 1) (psi(R[r,:]) Ur)`, where `S_r 1` is the
//! per-row sum column of the diffusion matrix. This is algebraically
//! identical and avoids an `|R|`-fold memory blowup.
//!
//! [`PresetEncoder`] materializes the effective per-layer weights for
//! the classic graph-convolution instantiations (R-GCN, WGCN, and the
//! three CompGCN composition operators).

use crate::diffusion::{Aggregator, DiffusionSet};
use crate::error::{Error, Result};
use crate::matrix::Mat;
use ndarray::Array2;

/// Elementwise activation with a known Lipschitz constant and a fixed
/// point at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    /// LeakyReLU with the given negative slope in [0, 1].
    LeakyRelu(f64),
    Tanh,
}

impl Activation {
    pub fn apply_scalar(&self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => {
                if x >= 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(slope) => {
                if x >= 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    pub fn apply(&self, m: &Mat) -> Mat {
        match self {
            Activation::Identity => m.clone(),
            _ => m.mapv(|x| self.apply_scalar(x)),
        }
    }

    /// Declared Lipschitz constant (1 for every supported activation).
    pub fn lipschitz(&self) -> f64 {
        1.0
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Activation::Identity)
    }

    /// Encoding for weight archives.
    pub fn code(&self) -> (u8, f64) {
        match self {
            Activation::Identity => (0, 0.0),
            Activation::Relu => (1, 0.0),
            Activation::LeakyRelu(s) => (2, *s),
            Activation::Tanh => (3, 0.0),
        }
    }

    pub fn from_code(code: u8, param: f64) -> Result<Self> {
        match code {
            0 => Ok(Activation::Identity),
            1 => Ok(Activation::Relu),
            2 => Ok(Activation::LeakyRelu(param)),
            3 => Ok(Activation::Tanh),
            other => Err(Error::Archive(format!("unknown activation code {other}"))),
        }
    }
}

/// The (phi, rho, psi) activation triple of the encoder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationTriple {
    pub phi: Activation,
    pub rho: Activation,
    pub psi: Activation,
}

impl ActivationTriple {
    /// Experiment default: phi = LeakyReLU(0.01), rho = psi = identity.
    pub fn default_experiment() -> Self {
        ActivationTriple {
            phi: Activation::LeakyRelu(0.01),
            rho: Activation::Identity,
            psi: Activation::Identity,
        }
    }

    pub fn all_identity() -> Self {
        ActivationTriple {
            phi: Activation::Identity,
            rho: Activation::Identity,
            psi: Activation::Identity,
        }
    }

    /// Product of the three Lipschitz constants (the kappa prefactor).
    pub fn lipschitz_product(&self) -> f64 {
        self.phi.lipschitz() * self.rho.lipschitz() * self.psi.lipschitz()
    }
}

/// Learnable weights of one encoder layer.
#[derive(Debug, Clone)]
pub struct EncoderLayer {
    /// Self-term entity projection `W0_l`, `d_{l-1} x d_l`.
    pub w_self: Mat,
    /// Relation-representation update `U0_l`, `d'_{l-1} x d'_l`.
    pub u_self: Mat,
    /// Per-relation entity-message projections `Wr_l`, `d_{l-1} x d_l`.
    pub w_rel: Vec<Mat>,
    /// Per-relation relation-message projections `Ur_l`, `d'_{l-1} x d_l`.
    pub u_rel: Vec<Mat>,
}

/// All learnable encoder weights plus the activation triple.
#[derive(Debug, Clone)]
pub struct EncoderParams {
    pub layers: Vec<EncoderLayer>,
    pub activations: ActivationTriple,
}

impl EncoderParams {
    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// Entity dimension chain `d_0..d_L` implied by the weight shapes,
    /// starting from the given feature width.
    pub fn ent_dims(&self, d0: usize) -> Vec<usize> {
        let mut dims = vec![d0];
        for layer in &self.layers {
            dims.push(layer.w_self.ncols());
        }
        dims
    }

    /// Relation dimension chain `d'_0..d'_L`.
    pub fn rel_dims(&self, d0_rel: usize) -> Vec<usize> {
        let mut dims = vec![d0_rel];
        for layer in &self.layers {
            dims.push(layer.u_self.ncols());
        }
        dims
    }

    /// Check every matrix shape against the implied dimension chains.
    pub fn validate(&self, n_relations: usize, d0: usize, d0_rel: usize) -> Result<()> {
        let (mut d_prev, mut dr_prev) = (d0, d0_rel);
        for (li, layer) in self.layers.iter().enumerate() {
            let l = li + 1;
            if layer.w_self.nrows() != d_prev {
                return Err(Error::Dimension {
                    layer: l,
                    relation: usize::MAX,
                    msg: format!(
                        "w_self has {} rows, expected {d_prev}",
                        layer.w_self.nrows()
                    ),
                });
            }
            if layer.u_self.nrows() != dr_prev {
                return Err(Error::Dimension {
                    layer: l,
                    relation: usize::MAX,
                    msg: format!(
                        "u_self has {} rows, expected {dr_prev}",
                        layer.u_self.nrows()
                    ),
                });
            }
            if layer.w_rel.len() != n_relations || layer.u_rel.len() != n_relations {
                return Err(Error::Dimension {
                    layer: l,
                    relation: usize::MAX,
                    msg: format!(
                        "layer has {} relation projections, expected {n_relations}",
                        layer.w_rel.len()
                    ),
                });
            }
            let d_next = layer.w_self.ncols();
            for (r, (w, u)) in layer.w_rel.iter().zip(layer.u_rel.iter()).enumerate() {
                if w.dim() != (d_prev, d_next) {
                    return Err(Error::Dimension {
                        layer: l,
                        relation: r,
                        msg: format!("w_rel is {:?}, expected ({d_prev}, {d_next})", w.dim()),
                    });
                }
                if u.dim() != (dr_prev, d_next) {
                    return Err(Error::Dimension {
                        layer: l,
                        relation: r,
                        msg: format!("u_rel is {:?}, expected ({dr_prev}, {d_next})", u.dim()),
                    });
                }
            }
            d_prev = d_next;
            dr_prev = layer.u_self.ncols();
        }
        Ok(())
    }
}

/// Entity and relation representations at every layer 0..=L.
#[derive(Debug, Clone)]
pub struct RepState {
    pub h: Vec<Mat>,
    pub r: Vec<Mat>,
}

impl RepState {
    pub fn n_layers(&self) -> usize {
        self.h.len() - 1
    }

    /// Final entity representations `H^(L)`.
    pub fn h_final(&self) -> &Mat {
        self.h.last().expect("layer 0 always present")
    }

    /// Final relation representations `R^(L)`.
    pub fn r_final(&self) -> &Mat {
        self.r.last().expect("layer 0 always present")
    }
}

/// Run the encoder. With zero layers the features pass through
/// unchanged.
pub fn encode(
    ent_features: &Mat,
    rel_features: &Mat,
    diffusion: &DiffusionSet,
    params: &EncoderParams,
) -> Result<RepState> {
    params.validate(
        diffusion.n_relations(),
        ent_features.ncols(),
        rel_features.ncols(),
    )?;
    let n_entities = ent_features.nrows();
    if !params.layers.is_empty() && diffusion.n_entities() != n_entities {
        return Err(Error::Validation(format!(
            "diffusion built for {} entities, features have {n_entities}",
            diffusion.n_entities()
        )));
    }

    let acts = &params.activations;
    let mut h = vec![ent_features.clone()];
    let mut r = vec![rel_features.clone()];

    for layer in &params.layers {
        let h_prev = h.last().unwrap();
        let r_prev = r.last().unwrap();
        let psi_h = acts.psi.apply(h_prev);
        let psi_r = acts.psi.apply(r_prev);

        let d_next = layer.w_self.ncols();
        let mut agg: Mat = Array2::zeros((n_entities, d_next));
        for (rel, (w_rel, u_rel)) in layer.w_rel.iter().zip(layer.u_rel.iter()).enumerate() {
            let s = diffusion.matrix(rel);
            if s.nnz() == 0 {
                continue;
            }
            agg += &s.matmul_dense(&psi_h.dot(w_rel));
            // (S_r 1) outer (psi(R[r,:]) Ur)
            let u_msg = psi_r.row(rel).dot(u_rel);
            let row_sums = s.row_sums();
            for (i, &rs) in row_sums.iter().enumerate() {
                if rs != 0.0 {
                    let mut out_row = agg.row_mut(i);
                    out_row.iter_mut().zip(u_msg.iter()).for_each(|(o, &u)| *o += rs * u);
                }
            }
        }
        let pre = h_prev.dot(&layer.w_self) + acts.rho.apply(&agg);
        h.push(acts.phi.apply(&pre));
        r.push(r_prev.dot(&layer.u_self));
    }
    Ok(RepState { h, r })
}

/// Classic graph-convolution encoders expressible as parameter
/// choices of the message-passing layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderPreset {
    Rgcn,
    Wgcn,
    CompGcnSub,
    CompGcnMult,
    CompGcnCorr,
}

/// CompGCN relation role (the lambda(r) tag).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationRole {
    Normal,
    Inverse,
    SelfLoop,
}

/// Per-preset extra parameters.
#[derive(Debug, Clone)]
pub enum PresetDetail {
    /// Free per-layer per-relation projections.
    Rgcn { w_rel: Vec<Vec<Mat>> },
    /// Per-layer per-relation scalars multiplying the self projection.
    Wgcn { alpha: Vec<Vec<f64>> },
    /// Shared role projections W_normal / W_inverse / W_self per layer
    /// plus the role tag of every relation.
    CompGcn {
        w_role: Vec<[Mat; 3]>,
        roles: Vec<RelationRole>,
    },
}

/// A preset encoder: shared self projections plus preset-specific
/// detail, materialized into effective layer weights on demand.
#[derive(Debug, Clone)]
pub struct PresetEncoder {
    pub kind: EncoderPreset,
    pub w_self: Vec<Mat>,
    pub u_self: Vec<Mat>,
    pub detail: PresetDetail,
}

/// Circulant matrix of a row vector: `C[i, j] = v[(i + j) mod d]`.
pub fn circulant(v: &[f64]) -> Mat {
    let d = v.len();
    Array2::from_shape_fn((d, d), |(i, j)| v[(i + j) % d])
}

impl PresetEncoder {
    pub fn n_layers(&self) -> usize {
        self.w_self.len()
    }

    /// The activation triple the preset prescribes.
    pub fn activations(&self) -> ActivationTriple {
        let phi = match self.kind {
            EncoderPreset::Rgcn => Activation::Relu,
            _ => Activation::Tanh,
        };
        ActivationTriple {
            phi,
            rho: Activation::Identity,
            psi: Activation::Identity,
        }
    }

    /// The aggregator the preset prescribes: per-relation mean for
    /// R-GCN (the `1/c_{v,r}` normalization), raw adjacency otherwise.
    pub fn aggregator(&self) -> Aggregator {
        match self.kind {
            EncoderPreset::Rgcn => Aggregator::Mean,
            _ => Aggregator::Sum,
        }
    }

    /// Effective (Wr, Ur) weights of one layer given the previous
    /// relation representations (CompGCN Mult/Corr compose with them).
    pub fn effective_layer(&self, layer: usize, r_prev: &Mat) -> Result<EncoderLayer> {
        let w_self = self.w_self[layer].clone();
        let u_self = self.u_self[layer].clone();
        let n_rel = r_prev.nrows();
        let d_in = w_self.nrows();
        let d_out = w_self.ncols();
        let dr_in = r_prev.ncols();

        let zero_u = || Array2::zeros((dr_in, d_out));
        let (w_rel, u_rel): (Vec<Mat>, Vec<Mat>) = match &self.detail {
            PresetDetail::Rgcn { w_rel } => (
                w_rel[layer].clone(),
                (0..n_rel).map(|_| zero_u()).collect(),
            ),
            PresetDetail::Wgcn { alpha } => (
                alpha[layer].iter().map(|&a| &w_self * a).collect(),
                (0..n_rel).map(|_| zero_u()).collect(),
            ),
            PresetDetail::CompGcn { w_role, roles } => {
                if d_in != dr_in || d_in != d_out {
                    return Err(Error::Dimension {
                        layer: layer + 1,
                        relation: usize::MAX,
                        msg: format!(
                            "composition presets need equal entity/relation dims, found {d_in}, {dr_in}, {d_out}"
                        ),
                    });
                }
                let role_w = |r: usize| -> &Mat {
                    let idx = match roles[r] {
                        RelationRole::Normal => 0,
                        RelationRole::Inverse => 1,
                        RelationRole::SelfLoop => 2,
                    };
                    &w_role[layer][idx]
                };
                match self.kind {
                    EncoderPreset::CompGcnSub => (
                        (0..n_rel).map(|r| role_w(r).clone()).collect(),
                        (0..n_rel).map(|r| -role_w(r)).collect(),
                    ),
                    EncoderPreset::CompGcnMult => (
                        (0..n_rel)
                            .map(|r| {
                                Array2::from_shape_fn((d_in, d_out), |(i, j)| {
                                    r_prev[(r, i)] * role_w(r)[(i, j)]
                                })
                            })
                            .collect(),
                        (0..n_rel).map(|_| zero_u()).collect(),
                    ),
                    EncoderPreset::CompGcnCorr => (
                        (0..n_rel)
                            .map(|r| {
                                let c = circulant(r_prev.row(r).as_slice().unwrap());
                                c.dot(role_w(r))
                            })
                            .collect(),
                        (0..n_rel).map(|_| zero_u()).collect(),
                    ),
                    _ => unreachable!("CompGcn detail with non-CompGCN kind"),
                }
            }
        };
        Ok(EncoderLayer {
            w_self,
            u_self,
            w_rel,
            u_rel,
        })
    }

    /// Full forward pass, materializing the effective weights of every
    /// layer against the evolving relation representations.
    pub fn encode(
        &self,
        ent_features: &Mat,
        rel_features: &Mat,
        diffusion: &DiffusionSet,
    ) -> Result<RepState> {
        let mut state = RepState {
            h: vec![ent_features.clone()],
            r: vec![rel_features.clone()],
        };
        for layer in 0..self.n_layers() {
            let effective = self.effective_layer(layer, state.r.last().unwrap())?;
            let params = EncoderParams {
                layers: vec![effective],
                activations: self.activations(),
            };
            let step = encode(
                state.h.last().unwrap(),
                state.r.last().unwrap(),
                diffusion,
                &params,
            )?;
            state.h.push(step.h[1].clone());
            state.r.push(step.r[1].clone());
        }
        Ok(state)
    }
}
