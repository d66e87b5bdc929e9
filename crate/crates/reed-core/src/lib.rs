//! Knowledge-graph representation learning with relation-aware message
//! passing, triplet-classification decoders, and PAC-Bayesian
//! generalization-bound certificates.
//!
//! The crate is organized around one pipeline:
//!
//! 1. [`kg`] loads a labeled triplet set, splits it into train/full
//!    parts, generates corruption negatives, and builds per-relation
//!    sparse diffusion matrices ([`diffusion`]).
//! 2. [`encoder`] runs relation-aware message passing over those
//!    diffusion matrices; [`decoder`] scores triplets with either a
//!    translational-distance or a semantic-matching head.
//! 3. [`zoo`] maps classic embedding models (TransE, RotatE, DistMult,
//!    QuatE, ...) onto the encoder/decoder parameter space and keeps
//!    independent native scorers around as equivalence oracles.
//! 4. [`train`] fits the model with full-batch Adam on a hinge
//!    surrogate of the margin loss, renormalizing every weight matrix
//!    to a fixed Frobenius norm after each step ([`tape`] provides the
//!    reverse-mode gradients).
//! 5. [`bounds`] evaluates every scalar of the generalization-bound
//!    certificates and empirically validates the norm-propagation and
//!    perturbation conditions they rest on.
//! 6. [`experiment`] orchestrates seeded sweeps over aggregator, weight
//!    norm, depth, and width, and reports generalization-error trends.

pub mod archive;
pub mod bounds;
pub mod decoder;
pub mod diffusion;
pub mod encoder;
pub mod error;
pub mod experiment;
pub mod kg;
pub mod loss;
pub mod matrix;
pub mod synth;
pub mod tape;
pub mod train;
pub mod zoo;

pub use error::{Error, Result};
