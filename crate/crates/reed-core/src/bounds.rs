//! Generalization-bound certificates and their empirical validation.
//!
//! Given a trained model and a train/full split, [`compute_bound_terms`]
//! assembles every scalar the certificates need:
//!
//! * diffusion ceilings `k_r` over the full positive set, and from
//!   them `kappa = C_phi C_rho C_psi * sum_r k_r` and `tau = C_phi + kappa`;
//! * the representation-norm growth factors
//!   `eta_L = tau^L ||X_ent|| + kappa ||X_rel|| sum_{i<L} tau^i` and
//!   `zeta_L = 2 eta_L + ||X_rel||` (with one-hot features and
//!   1-Lipschitz activations these collapse to `2 tau^L - 1` and
//!   `4 tau^L - 1`);
//! * per-layer maxima `s_l` of the Frobenius norms (the decoder is
//!   layer L+1) and their maximum `s`;
//! * the matrix count `N_w`, the maximum dimension `d`, the grid
//!   approximation `s_ring` of `s`, the prior scale `sigma`, the KL
//!   divergence, the derandomization factor `theta`, and the covering
//!   size.
//!
//! [`generalization_bound`] evaluates the closed-form bound on the
//! generalization error (reported raw and clamped to 1, since losses
//! live in [0,1]); [`simplified_complexity`] is the simplified trend
//! comparator. [`verify_norm_propagation`] and
//! [`verify_perturbation_condition`] check, by direct perturbed
//! forward passes, the layerwise norm bounds and the probability
//! condition that the prior scale is constructed to guarantee.

use crate::decoder::DecoderKind;
use crate::diffusion::{compute_k_r, DiffusionSet};
use crate::encoder::RepState;
use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, Split, Triplet};
use crate::matrix::{has_non_finite, max_row_norm, Mat};
use crate::train::{encode_graph, Model, TrainedModel};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use std::f64::consts::E;

/// Spectral norm by power iteration on `M^T M` with a deterministic
/// all-ones start; re-seeded deterministically if the iteration
/// stalls.
pub fn spectral_norm(m: &Mat, tol: f64) -> Result<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::Argument("spectral norm of an empty matrix".into()));
    }
    if has_non_finite(m) {
        return Err(Error::NonFinite("spectral_norm input".into()));
    }
    if tol <= 0.0 {
        return Err(Error::Argument("spectral norm tolerance must be positive".into()));
    }
    let n = m.ncols();
    let mut best = 0.0f64;
    for restart in 0..4u64 {
        let mut v: ndarray::Array1<f64> = if restart == 0 {
            ndarray::Array1::from_elem(n, 1.0 / (n as f64).sqrt())
        } else {
            // deterministic re-seed on a stalled start vector
            let mut rng = ChaCha12Rng::seed_from_u64(0x5eed ^ restart);
            let raw = ndarray::Array1::from_shape_fn(n, |_| {
                rand::Rng::gen_range(&mut rng, -1.0..1.0)
            });
            let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            raw / norm
        };
        let mut prev = f64::NAN;
        let mut converged = false;
        for _ in 0..10_000 {
            let u = m.dot(&v);
            let sigma = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            if sigma == 0.0 {
                break; // v fell in the null space
            }
            if prev.is_finite() && (sigma - prev).abs() <= tol * sigma {
                best = best.max(sigma);
                converged = true;
                break;
            }
            prev = sigma;
            let w = m.t().dot(&u);
            let wn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if wn == 0.0 {
                break;
            }
            v = w / wn;
        }
        if !converged && prev.is_finite() {
            best = best.max(prev);
        }
        if converged {
            break;
        }
    }
    Ok(best)
}

/// Derandomization factor `theta(m, n) = 3 sqrt(m (1 - m/n)) ln m`.
/// Requires the admissible split range `20 <= m <= n - 20`, `n >= 40`.
pub fn theta(m: usize, n: usize) -> Result<f64> {
    if n < 40 || m < 20 || m + 20 > n {
        return Err(Error::Argument(format!(
            "split sizes m={m}, n={n} violate the admissible range (20 <= m <= n-20, n >= 40)"
        )));
    }
    let (mf, nf) = (m as f64, n as f64);
    Ok(3.0 * (mf * (1.0 - mf / nf)).sqrt() * mf.ln())
}

/// Every scalar entering the generalization-bound certificates.
#[derive(Debug, Clone)]
pub struct BoundTerms {
    pub variant: DecoderKind,
    pub layers: usize,
    pub k_r: Vec<f64>,
    pub kappa: f64,
    pub tau: f64,
    /// `eta_L` (representation-norm growth).
    pub eta: f64,
    /// `zeta_L = 2 eta_L + ||X_rel||`.
    pub zeta: f64,
    /// Per-layer Frobenius maxima `s_1 .. s_{L+1}`.
    pub s_per_layer: Vec<f64>,
    /// `max_l s_l`.
    pub s: f64,
    /// Learnable matrix count.
    pub n_w: usize,
    /// Maximum representation dimension in the variant's range.
    pub d: usize,
    pub x_ent_norm: f64,
    pub x_rel_norm: f64,
    pub m: usize,
    pub n: usize,
    pub gamma: f64,
    pub delta: f64,
    /// Grid approximation of `s` used by the prior.
    pub s_ring: f64,
    /// Prior/perturbation standard deviation.
    pub sigma: f64,
    /// KL divergence of the posterior from the prior.
    pub kl: f64,
    pub theta: f64,
    /// Covering size |C|.
    pub covering: f64,
}

/// `eta_l` for any layer given tau, kappa and the feature norms.
pub fn eta_at(layer: usize, tau: f64, kappa: f64, x_ent_norm: f64, x_rel_norm: f64) -> f64 {
    let geo: f64 = (0..layer).map(|i| tau.powi(i as i32)).sum();
    tau.powi(layer as i32) * x_ent_norm + kappa * x_rel_norm * geo
}

/// The matrix count `N_w` for a given decoder family.
pub fn n_w_formula(variant: DecoderKind, n_relations: usize, layers: usize) -> usize {
    match variant {
        DecoderKind::Td => 2 * n_relations * layers + 6 * n_relations + 2 * layers,
        DecoderKind::Sm => 2 * n_relations * layers + 2 * n_relations + 2 * layers,
    }
}

/// Admissible weight-scale range of the covering argument.
fn s_range(variant: DecoderKind, layers: usize, gamma: f64, eta: f64, zeta: f64, m: usize, n: usize) -> (f64, f64) {
    let (mf, nf) = (m as f64, n as f64);
    let ratio = (mf / (1.0 - mf / nf)).sqrt();
    match variant {
        DecoderKind::Td => {
            let expo = 1.0 / (layers as f64 + 1.0);
            let base = gamma / (2.0 * zeta);
            (base.powf(expo), (base * ratio).powf(expo))
        }
        DecoderKind::Sm => {
            let expo = 1.0 / (2.0 * layers as f64 + 1.0);
            let base = gamma / (2.0 * eta * eta);
            (base.powf(expo), (base * ratio).powf(expo))
        }
    }
}

/// Pick the covering-grid center nearest the measured `s`: centers
/// spaced `2s/(L+2)` (TD) or `2s/(2L+2)` (SM) across the admissible
/// range, mirroring the `|s - s_ring| <= s/(L+2)` covering constraint.
fn nearest_grid_center(
    variant: DecoderKind,
    layers: usize,
    s: f64,
    lo: f64,
    hi: f64,
) -> f64 {
    let denom = match variant {
        DecoderKind::Td => layers as f64 + 2.0,
        DecoderKind::Sm => 2.0 * layers as f64 + 2.0,
    };
    let step = 2.0 * s / denom;
    if step.is_nan() || step <= 0.0 || lo >= hi {
        return s.max(lo.min(hi));
    }
    let mut best = lo + step / 2.0;
    let mut center = best;
    while center - step / 2.0 < hi {
        if (center - s).abs() < (best - s).abs() {
            best = center;
        }
        center += step;
        if center > hi * 4.0 + step {
            break;
        }
    }
    best
}

/// Prior scale for the given terms (uses `s_ring`, `zeta`/`eta`, `d`,
/// `N_w`, `gamma`).
pub fn sigma_prior(terms: &BoundTerms) -> f64 {
    let l = terms.layers as f64;
    let root = (2.0 * terms.d as f64 * (4.0 * terms.n_w as f64 * terms.d as f64).ln()).sqrt();
    match terms.variant {
        DecoderKind::Td => {
            terms.gamma / (4.0 * E.powi(2) * (l + 1.0) * terms.s_ring.powi(terms.layers as i32) * terms.zeta) / root
        }
        DecoderKind::Sm => {
            terms.gamma
                / (4.0
                    * E.powi(2)
                    * (2.0 * l + 1.0)
                    * terms.eta.powi(2)
                    * terms.s_ring.powi(2 * terms.layers as i32))
                / root
        }
    }
}

/// KL divergence of the Gaussian posterior centered at the weights
/// from the zero-mean Gaussian prior: `sum ||W||_F^2 / (2 sigma^2)`.
pub fn kl_divergence(model: &Model, sigma: f64) -> Result<f64> {
    if sigma <= 0.0 {
        return Err(Error::Argument(format!(
            "sigma must be positive, found {sigma}"
        )));
    }
    let total: f64 = model
        .params()
        .iter()
        .map(|m| m.iter().map(|x| x * x).sum::<f64>())
        .sum();
    Ok(total / (2.0 * sigma * sigma))
}

/// Covering size |C| for the variant.
pub fn covering_size(variant: DecoderKind, layers: usize, m: usize, n: usize) -> Result<f64> {
    let gap = 1.0 / m as f64 - 1.0 / n as f64;
    if gap <= 0.0 {
        return Err(Error::Argument(format!(
            "covering size needs m < n, found m={m}, n={n}"
        )));
    }
    let l = layers as f64;
    let c = match variant {
        DecoderKind::Td => (l + 2.0) / 2.0 * (gap.powf(-1.0 / (2.0 * (l + 1.0))) - 1.0),
        DecoderKind::Sm => (2.0 * l + 2.0) / 2.0 * (gap.powf(-1.0 / (2.0 * (2.0 * l + 1.0))) - 1.0),
    };
    if c <= 0.0 {
        return Err(Error::Validation(format!(
            "covering size {c} is not positive (m={m}, n={n})"
        )));
    }
    Ok(c)
}

/// Assemble every bound ingredient from a trained model and its split.
pub fn compute_bound_terms(
    trained: &TrainedModel,
    graph: &KnowledgeGraph,
    split: &Split,
    gamma: f64,
    delta: f64,
) -> Result<BoundTerms> {
    if gamma <= 0.0 || delta <= 0.0 {
        return Err(Error::Argument(
            "gamma and delta must be positive".into(),
        ));
    }
    let (m, n) = (split.m(), split.n());
    let theta_val = theta(m, n)?; // also enforces the admissible range
    let model = &trained.model;
    let layers = model.encoder.n_layers();
    let variant = model.decoder.kind();

    let k_r = compute_k_r(
        graph.positives(),
        graph.n_entities(),
        graph.n_relations(),
        trained.config.aggregator,
    );
    let acts = &model.encoder.activations;
    let lip_product = acts.lipschitz_product();
    let kappa = lip_product * k_r.iter().sum::<f64>();
    let tau = acts.phi.lipschitz() + kappa;

    let x_ent_norm = spectral_norm(graph.ent_features(), 1e-10)?;
    let x_rel_norm = spectral_norm(graph.rel_features(), 1e-10)?;
    let eta = eta_at(layers, tau, kappa, x_ent_norm, x_rel_norm);
    let zeta = 2.0 * eta + x_rel_norm;

    let s_per_layer: Vec<f64> = (1..=layers + 1).map(|l| model.layer_norm_max(l)).collect();
    let s = s_per_layer.iter().copied().fold(0.0, f64::max);

    let n_w = n_w_formula(variant, graph.n_relations(), layers);
    debug_assert_eq!(n_w, model.n_matrices());

    let d0 = graph.ent_features().ncols();
    let d0_rel = graph.rel_features().ncols();
    let ent_dims = model.encoder.ent_dims(d0);
    let rel_dims = model.encoder.rel_dims(d0_rel);
    let d = match variant {
        DecoderKind::Td => ent_dims
            .iter()
            .chain(rel_dims.iter())
            .copied()
            .chain([model.decoder.d_out()])
            .max()
            .unwrap_or(0),
        DecoderKind::Sm => ent_dims.iter().chain(rel_dims.iter()).copied().max().unwrap_or(0),
    };

    let (lo, hi) = s_range(variant, layers, gamma, eta, zeta, m, n);
    let s_ring = nearest_grid_center(variant, layers, s, lo, hi);
    let covering = covering_size(variant, layers, m, n)?;

    let mut terms = BoundTerms {
        variant,
        layers,
        k_r,
        kappa,
        tau,
        eta,
        zeta,
        s_per_layer,
        s,
        n_w,
        d,
        x_ent_norm,
        x_rel_norm,
        m,
        n,
        gamma,
        delta,
        s_ring,
        sigma: 0.0,
        kl: 0.0,
        theta: theta_val,
        covering,
    };
    terms.sigma = sigma_prior(&terms);
    terms.kl = kl_divergence(model, terms.sigma)?;
    Ok(terms)
}

/// A bound evaluation: the raw closed-form value and its clamp to 1.
#[derive(Debug, Clone, Copy)]
pub struct BoundValue {
    pub raw: f64,
    pub clamped: f64,
    pub was_clamped: bool,
}

/// Closed-form generalization-error bound (the pre-asymptotic
/// expression, including the covering correction).
pub fn generalization_bound(terms: &BoundTerms) -> Result<BoundValue> {
    let (mf, nf) = (terms.m as f64, terms.n as f64);
    let d = terms.d as f64;
    let n_w = terms.n_w as f64;
    let l = terms.layers as f64;
    let log_term = (4.0 * n_w * d).ln();
    let complexity = match terms.variant {
        DecoderKind::Td => {
            16.0 * E.powi(6)
                * n_w
                * (l + 1.0).powi(2)
                * terms.s.powi(2 * terms.layers as i32 + 2)
                * terms.zeta.powi(2)
                * d
                * log_term
                / terms.gamma.powi(2)
        }
        DecoderKind::Sm => {
            16.0 * E.powi(6)
                * n_w
                * (2.0 * l + 1.0).powi(2)
                * terms.eta.powi(4)
                * terms.s.powi(4 * terms.layers as i32 + 2)
                * d
                * log_term
                / terms.gamma.powi(2)
        }
    };
    let confidence = 0.5 * (4.0 * terms.theta * terms.covering / terms.delta).ln();
    let raw = ((1.0 - mf / nf) / mf * (complexity + confidence)).sqrt();
    if !raw.is_finite() {
        return Err(Error::NonFinite("generalization bound".into()));
    }
    Ok(BoundValue {
        raw,
        clamped: raw.min(1.0),
        was_clamped: raw > 1.0,
    })
}

/// Simplified complexity comparator for trend analysis (not a
/// probability-valid bound): `L tau^L s^L sqrt(N_w ln N_w)` for TD and
/// `L tau^{2L} s^{2L} sqrt(N_w ln N_w)` for SM. Requires one-hot
/// features and 1-Lipschitz activations; degenerate (0) at L = 0.
pub fn simplified_complexity(terms: &BoundTerms) -> Result<f64> {
    if (terms.x_ent_norm - 1.0).abs() > 1e-9 || (terms.x_rel_norm - 1.0).abs() > 1e-9 {
        return Err(Error::Argument(
            "simplified complexity requires one-hot (unit spectral norm) features".into(),
        ));
    }
    let l = terms.layers as f64;
    let n_w = terms.n_w as f64;
    let growth = match terms.variant {
        DecoderKind::Td => (terms.tau * terms.s).powi(terms.layers as i32),
        DecoderKind::Sm => (terms.tau * terms.s).powi(2 * terms.layers as i32),
    };
    Ok(l * growth * (n_w * n_w.ln()).sqrt())
}

/// Per-layer norm-propagation measurements against their analytic
/// bounds.
#[derive(Debug, Clone)]
pub struct LayerNormCheck {
    pub layer: usize,
    pub phi_measured: f64,
    pub phi_bound: f64,
    pub psi_measured: f64,
    pub psi_bound: f64,
    pub lambda_measured: f64,
    pub lambda_bound: f64,
    pub gamma_measured: f64,
    pub gamma_bound: f64,
}

/// Result of [`verify_norm_propagation`].
#[derive(Debug, Clone)]
pub struct NormPropagationReport {
    pub s_dot: f64,
    pub trials: usize,
    pub layers: Vec<LayerNormCheck>,
    /// Max over trials and triplets of the score deviation.
    pub deviation_measured: f64,
    /// End-to-end deviation bound at the perturbation budget.
    pub deviation_bound: f64,
    pub violations: usize,
    pub pass: bool,
}

const NORM_SLACK: f64 = 1e-9;

fn perturb_model(model: &Model, s_dot: f64, rng: &mut ChaCha12Rng) -> Result<Model> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut perturbed = model.clone();
    for p in perturbed.params_mut() {
        let noise = Array2::from_shape_fn(p.dim(), |_| normal.sample(rng));
        let spec = spectral_norm(&noise, 1e-9)?;
        let scaled = if spec > s_dot {
            noise * (s_dot / spec)
        } else {
            noise
        };
        *p = &*p + &scaled;
    }
    Ok(perturbed)
}

/// Draw perturbations with every matrix rescaled to spectral norm at
/// most `s_dot`, run perturbed and unperturbed forward passes, and
/// compare the measured per-layer norms and end-to-end score
/// deviations against the analytic bounds.
pub fn verify_norm_propagation(
    trained: &TrainedModel,
    graph: &KnowledgeGraph,
    diffusion: &DiffusionSet,
    s_dot: f64,
    trials: usize,
    seed: u64,
) -> Result<NormPropagationReport> {
    if s_dot <= 0.0 {
        return Err(Error::Argument("s_dot must be positive".into()));
    }
    let model = &trained.model;
    let layers = model.encoder.n_layers();
    let acts = &model.encoder.activations;
    let lip = acts.lipschitz_product();
    let k_r = compute_k_r(
        graph.positives(),
        graph.n_entities(),
        graph.n_relations(),
        trained.config.aggregator,
    );
    let kappa = lip * k_r.iter().sum::<f64>();
    let tau = acts.phi.lipschitz() + kappa;
    let x_ent_norm = spectral_norm(graph.ent_features(), 1e-10)?;
    let x_rel_norm = spectral_norm(graph.rel_features(), 1e-10)?;

    let s_per_layer: Vec<f64> = (1..=layers + 1).map(|l| model.layer_norm_max(l)).collect();
    let s = s_per_layer.iter().copied().fold(0.0, f64::max);
    let eta_final = eta_at(layers, tau, kappa, x_ent_norm, x_rel_norm);
    let zeta_final = 2.0 * eta_final + x_rel_norm;

    let prod = |k: usize, bump: f64| -> f64 {
        s_per_layer[..k].iter().map(|&si| si + bump).product::<f64>()
    };

    let base_state = encode_graph(model, graph, diffusion)?;
    let all: Vec<Triplet> = graph.all_triplets().iter().map(|lt| lt.triplet).collect();
    let base_scores = crate::decoder::score_all(&base_state, &model.decoder, &all)?;

    let deviation_bound = match model.decoder.kind() {
        DecoderKind::Td => {
            s_dot * (layers as f64 + 1.0) * (s + s_dot).powi(layers as i32) * zeta_final
        }
        DecoderKind::Sm => {
            eta_final.powi(2)
                * ((s + s_dot).powi(2 * layers as i32 + 1) - s.powi(2 * layers as i32 + 1))
        }
    };

    let mut checks: Vec<LayerNormCheck> = (1..=layers)
        .map(|l| LayerNormCheck {
            layer: l,
            phi_measured: 0.0,
            phi_bound: eta_at(l, tau, kappa, x_ent_norm, x_rel_norm) * prod(l, 0.0),
            psi_measured: 0.0,
            psi_bound: eta_at(l, tau, kappa, x_ent_norm, x_rel_norm)
                * (prod(l, s_dot) - prod(l, 0.0)),
            lambda_measured: 0.0,
            lambda_bound: x_rel_norm * prod(l, 0.0),
            gamma_measured: 0.0,
            gamma_bound: x_rel_norm * (prod(l, s_dot) - prod(l, 0.0)),
        })
        .collect();

    let mut deviation_measured = 0.0f64;
    let mut violations = 0usize;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let perturbed = perturb_model(model, s_dot, &mut rng)?;
        let pert_state = encode_graph(&perturbed, graph, diffusion)?;
        for l in 1..=layers {
            let check = &mut checks[l - 1];
            let phi = max_row_norm(&base_state.h[l]);
            let lambda = max_row_norm(&base_state.r[l]);
            let psi = max_row_norm(&(&pert_state.h[l] - &base_state.h[l]));
            let gamma = max_row_norm(&(&pert_state.r[l] - &base_state.r[l]));
            check.phi_measured = check.phi_measured.max(phi);
            check.lambda_measured = check.lambda_measured.max(lambda);
            check.psi_measured = check.psi_measured.max(psi);
            check.gamma_measured = check.gamma_measured.max(gamma);
            for (measured, bound) in [
                (phi, check.phi_bound),
                (lambda, check.lambda_bound),
                (psi, check.psi_bound),
                (gamma, check.gamma_bound),
            ] {
                if measured > bound * (1.0 + NORM_SLACK) {
                    violations += 1;
                }
            }
        }
        let pert_scores = crate::decoder::score_all(&pert_state, &perturbed.decoder, &all)?;
        let dev = base_scores
            .iter()
            .zip(&pert_scores)
            .map(|(a, b)| (a.s0 - b.s0).abs().max((a.s1 - b.s1).abs()))
            .fold(0.0, f64::max);
        deviation_measured = deviation_measured.max(dev);
        if dev > deviation_bound * (1.0 + NORM_SLACK) {
            violations += 1;
        }
    }

    Ok(NormPropagationReport {
        s_dot,
        trials,
        layers: checks,
        deviation_measured,
        deviation_bound,
        violations,
        pass: violations == 0,
    })
}

/// Monte-Carlo estimate of the probability that a Gaussian weight
/// perturbation of scale `sigma` moves every score by less than
/// `gamma / 4`. Trials run in parallel with per-trial derived seeds.
pub fn verify_perturbation_condition(
    trained: &TrainedModel,
    graph: &KnowledgeGraph,
    diffusion: &DiffusionSet,
    sigma: f64,
    gamma: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::Argument("need at least one trial".into()));
    }
    if sigma <= 0.0 || gamma <= 0.0 {
        return Err(Error::Argument("sigma and gamma must be positive".into()));
    }
    let model = &trained.model;
    let base_state = encode_graph(model, graph, diffusion)?;
    let all: Vec<Triplet> = graph.all_triplets().iter().map(|lt| lt.triplet).collect();
    let base_scores = crate::decoder::score_all(&base_state, &model.decoder, &all)?;

    let successes: usize = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<usize> {
            let mut rng =
                ChaCha12Rng::seed_from_u64(seed ^ (t as u64).wrapping_mul(0x9E3779B97F4A7C15));
            let normal = Normal::new(0.0, sigma).expect("valid sigma");
            let mut perturbed = model.clone();
            for p in perturbed.params_mut() {
                let noise = Array2::from_shape_fn(p.dim(), |_| normal.sample(&mut rng));
                *p = &*p + &noise;
            }
            let state = encode_graph(&perturbed, graph, diffusion)?;
            let scores = crate::decoder::score_all(&state, &perturbed.decoder, &all)?;
            let dev = base_scores
                .iter()
                .zip(&scores)
                .map(|(a, b)| (a.s0 - b.s0).abs().max((a.s1 - b.s1).abs()))
                .fold(0.0, f64::max);
            Ok(usize::from(dev < gamma / 4.0))
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum();
    Ok(successes as f64 / trials as f64)
}

/// Base state accessor used by diagnostics.
pub fn representation_norms(state: &RepState) -> Vec<(f64, f64)> {
    (0..state.h.len())
        .map(|l| (max_row_norm(&state.h[l]), max_row_norm(&state.r[l])))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    /// One-sided Jacobi SVD: rotate column pairs until orthogonal;
    /// singular values are the resulting column norms. Independent of
    /// the power-iteration path.
    fn jacobi_largest_singular_value(m: &Mat) -> f64 {
        let mut a = m.clone();
        let n = a.ncols();
        for _sweep in 0..60 {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    let (mut app, mut aqq, mut apq) = (0.0, 0.0, 0.0);
                    for i in 0..a.nrows() {
                        app += a[(i, p)] * a[(i, p)];
                        aqq += a[(i, q)] * a[(i, q)];
                        apq += a[(i, p)] * a[(i, q)];
                    }
                    off = off.max(apq.abs());
                    if apq.abs() < 1e-15 {
                        continue;
                    }
                    let zeta = (aqq - app) / (2.0 * apq);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for i in 0..a.nrows() {
                        let (aip, aiq) = (a[(i, p)], a[(i, q)]);
                        a[(i, p)] = c * aip - s * aiq;
                        a[(i, q)] = s * aip + c * aiq;
                    }
                }
            }
            if off < 1e-14 {
                break;
            }
        }
        (0..n)
            .map(|j| (0..a.nrows()).map(|i| a[(i, j)] * a[(i, j)]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    #[test]
    fn spectral_norm_identity_and_diagonal() {
        assert!((spectral_norm(&Array2::eye(7), 1e-12).unwrap() - 1.0).abs() < 1e-10);
        let d = array![[3.0, 0.0], [0.0, -4.0]];
        assert!((spectral_norm(&d, 1e-12).unwrap() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn spectral_norm_matches_jacobi_svd() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for trial in 0..10 {
            let rows = 20;
            let cols = if trial % 2 == 0 { 20 } else { 13 };
            let m = Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0));
            let power = spectral_norm(&m, 1e-12).unwrap();
            let jacobi = jacobi_largest_singular_value(&m);
            let rel = (power - jacobi).abs() / jacobi.max(1e-300);
            assert!(rel < 1e-8, "trial {trial}: {power} vs {jacobi} (rel {rel})");
        }
    }

    #[test]
    fn spectral_norm_rejects_bad_input() {
        assert!(spectral_norm(&Array2::zeros((0, 3)), 1e-9).is_err());
        let mut m = Array2::zeros((2, 2));
        m[(0, 0)] = f64::NAN;
        assert!(spectral_norm(&m, 1e-9).is_err());
        // exactly-zero matrix has spectral norm 0
        assert_eq!(spectral_norm(&Array2::zeros((3, 3)), 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn theta_worked_values_and_range() {
        // theta(20, 40) = 3 sqrt(10) ln 20 = 28.4200117335156... (frozen
        // from a 30-digit evaluation of the closed form)
        let expect = 3.0 * 10.0f64.sqrt() * 20.0f64.ln();
        assert!((theta(20, 40).unwrap() - expect).abs() < 1e-12);
        assert!((expect - 28.420_011_733_515_64).abs() < 1e-12);
        assert!(theta(19, 40).is_err());
        assert!(theta(21, 40).is_err());
        assert!(theta(20, 39).is_err());
        assert!(theta(10174, 12732).unwrap() > 0.0);
    }

    #[test]
    fn eta_zeta_closed_forms_under_one_hot() {
        // with x norms 1 and 1-Lipschitz activations:
        // eta_L = 2 tau^L - 1, zeta_L = 4 tau^L - 1
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for layers in 0..=4usize {
            for _ in 0..20 {
                let k_sum: f64 = (0..5).map(|_| rng.gen_range(0.0..4.0)).sum();
                let kappa = k_sum;
                let tau = 1.0 + kappa;
                let eta = eta_at(layers, tau, kappa, 1.0, 1.0);
                let zeta = 2.0 * eta + 1.0;
                let eta_closed = 2.0 * tau.powi(layers as i32) - 1.0;
                let zeta_closed = 4.0 * tau.powi(layers as i32) - 1.0;
                assert!((eta - eta_closed).abs() <= 1e-12 * eta_closed.abs());
                assert!((zeta - zeta_closed).abs() <= 1e-12 * zeta_closed.abs());
            }
        }
    }

    #[test]
    fn worked_kappa_tau_example() {
        // sum k_r = 2, L = 1: kappa = 2, tau = 3, zeta_1 = 11, eta_1 = 5
        let kappa = 2.0;
        let tau = 1.0 + kappa;
        let eta = eta_at(1, tau, kappa, 1.0, 1.0);
        let zeta = 2.0 * eta + 1.0;
        assert_eq!(eta, 5.0);
        assert_eq!(zeta, 11.0);
    }

    #[test]
    fn n_w_worked_values() {
        assert_eq!(n_w_formula(DecoderKind::Td, 43, 2), 2 * 43 * 2 + 6 * 43 + 4);
        assert_eq!(n_w_formula(DecoderKind::Td, 43, 2), 434);
        assert_eq!(n_w_formula(DecoderKind::Td, 7, 0), 42);
        assert_eq!(n_w_formula(DecoderKind::Sm, 5, 3), 30 + 10 + 6);
    }

    fn reference_terms(variant: DecoderKind) -> BoundTerms {
        let layers = 1;
        let kappa = 2.0;
        let tau = 3.0;
        let eta = eta_at(layers, tau, kappa, 1.0, 1.0);
        BoundTerms {
            variant,
            layers,
            k_r: vec![1.0, 1.0],
            kappa,
            tau,
            eta,
            zeta: 2.0 * eta + 1.0,
            s_per_layer: vec![10.0, 10.0],
            s: 10.0,
            n_w: n_w_formula(variant, 2, layers),
            d: 50,
            x_ent_norm: 1.0,
            x_rel_norm: 1.0,
            m: 800,
            n: 1000,
            gamma: 0.75,
            delta: 0.05,
            s_ring: 10.0,
            sigma: 0.0,
            kl: 0.0,
            theta: theta(800, 1000).unwrap(),
            covering: covering_size(variant, layers, 800, 1000).unwrap(),
        }
    }

    #[test]
    fn sigma_prior_homogeneity_and_monotonicity() {
        for variant in [DecoderKind::Td, DecoderKind::Sm] {
            let base = reference_terms(variant);
            let sigma = sigma_prior(&base);
            assert!(sigma > 0.0);

            // doubling gamma doubles sigma
            let mut doubled = base.clone();
            doubled.gamma *= 2.0;
            assert!((sigma_prior(&doubled) - 2.0 * sigma).abs() < 1e-15 * sigma);

            // sigma decreases in s_ring, d, N_w
            for f in [
                &mut |t: &mut BoundTerms| t.s_ring *= 1.5,
                &mut |t: &mut BoundTerms| t.d *= 2,
                &mut |t: &mut BoundTerms| t.n_w *= 2,
            ] as [&mut dyn FnMut(&mut BoundTerms); 3]
            {
                let mut bumped = base.clone();
                f(&mut bumped);
                assert!(sigma_prior(&bumped) < sigma);
            }
        }
    }

    #[test]
    fn sigma_prior_decoder_only_formula() {
        // TD at L = 0: sigma = gamma / (4 e^2 zeta_0 sqrt(2 d ln(4 N_w d)))
        let mut t = reference_terms(DecoderKind::Td);
        t.layers = 0;
        t.s_per_layer = vec![10.0];
        t.n_w = n_w_formula(DecoderKind::Td, 2, 0);
        t.eta = eta_at(0, t.tau, t.kappa, 1.0, 1.0);
        t.zeta = 2.0 * t.eta + 1.0;
        let direct = t.gamma
            / (4.0 * E.powi(2) * t.zeta)
            / (2.0 * t.d as f64 * (4.0 * t.n_w as f64 * t.d as f64).ln()).sqrt();
        assert!((sigma_prior(&t) - direct).abs() < 1e-18);
    }

    #[test]
    fn generalization_bound_monotonicity() {
        for variant in [DecoderKind::Td, DecoderKind::Sm] {
            let base = reference_terms(variant);
            let b0 = generalization_bound(&base).unwrap().raw;

            let grow: [&mut dyn FnMut(&mut BoundTerms); 3] = [
                &mut |t: &mut BoundTerms| t.s *= 2.0,
                &mut |t: &mut BoundTerms| t.d *= 2,
                &mut |t: &mut BoundTerms| t.n_w *= 2,
            ];
            for f in grow {
                let mut bumped = base.clone();
                f(&mut bumped);
                assert!(generalization_bound(&bumped).unwrap().raw > b0);
            }
            // increasing L (with the covering/eta/zeta refreshed)
            let mut deeper = base.clone();
            deeper.layers = 2;
            deeper.eta = eta_at(2, deeper.tau, deeper.kappa, 1.0, 1.0);
            deeper.zeta = 2.0 * deeper.eta + 1.0;
            deeper.n_w = n_w_formula(variant, 2, 2);
            deeper.covering = covering_size(variant, 2, deeper.m, deeper.n).unwrap();
            assert!(generalization_bound(&deeper).unwrap().raw > b0);

            // decreasing in gamma
            let mut wider = base.clone();
            wider.gamma *= 2.0;
            assert!(generalization_bound(&wider).unwrap().raw < b0);

            // raw values at desk scale are far above 1 and get clamped
            let b = generalization_bound(&base).unwrap();
            assert!(b.was_clamped);
            assert_eq!(b.clamped, 1.0);
        }
    }

    #[test]
    fn simplified_complexity_values_and_preconditions() {
        let t = reference_terms(DecoderKind::Td);
        // L = 1, tau = 3, s = 10 -> 30 sqrt(N_w ln N_w)
        let expect = 30.0 * (t.n_w as f64 * (t.n_w as f64).ln()).sqrt();
        assert!((simplified_complexity(&t).unwrap() - expect).abs() < 1e-9);

        // SM value = TD value x (tau s)^L for equal N_w
        let mut sm = reference_terms(DecoderKind::Sm);
        sm.n_w = t.n_w;
        let ratio = simplified_complexity(&sm).unwrap() / simplified_complexity(&t).unwrap();
        assert!((ratio - 30.0).abs() < 1e-9);

        // degenerate at L = 0
        let mut shallow = reference_terms(DecoderKind::Td);
        shallow.layers = 0;
        assert_eq!(simplified_complexity(&shallow).unwrap(), 0.0);

        // non-unit feature norms rejected
        let mut bad = reference_terms(DecoderKind::Td);
        bad.x_ent_norm = 2.0;
        assert!(simplified_complexity(&bad).is_err());
    }

    #[test]
    fn kl_divergence_worked_examples() {
        use crate::decoder::{DecoderParams, SmDecoderParams};
        use crate::encoder::{ActivationTriple, EncoderParams};
        use crate::train::Model;
        use ndarray::array;

        let zero = Model {
            encoder: EncoderParams {
                layers: vec![],
                activations: ActivationTriple::default_experiment(),
            },
            decoder: DecoderParams::Sm(SmDecoderParams {
                relations: vec![[Array2::zeros((2, 2)), Array2::zeros((2, 2))]],
            }),
        };
        assert_eq!(kl_divergence(&zero, 1.0).unwrap(), 0.0);

        let single = Model {
            encoder: EncoderParams {
                layers: vec![],
                activations: ActivationTriple::default_experiment(),
            },
            decoder: DecoderParams::Sm(SmDecoderParams {
                relations: vec![[array![[3.0]], array![[0.0]]]],
            }),
        };
        assert_eq!(kl_divergence(&single, 1.0).unwrap(), 4.5); // w^2 / 2

        // N_w matrices each at Frobenius norm s: N_w s^2 / (2 sigma^2)
        let s = 5.0;
        let sigma = 0.25;
        let uniform = Model {
            encoder: EncoderParams {
                layers: vec![],
                activations: ActivationTriple::default_experiment(),
            },
            decoder: DecoderParams::Sm(SmDecoderParams {
                relations: vec![
                    [array![[s, 0.0], [0.0, 0.0]], array![[0.0, s], [0.0, 0.0]]],
                    [array![[0.0, 0.0], [s, 0.0]], array![[0.0, 0.0], [0.0, s]]],
                ],
            }),
        };
        let expect = 4.0 * s * s / (2.0 * sigma * sigma);
        assert!((kl_divergence(&uniform, sigma).unwrap() - expect).abs() < 1e-9);
        assert!(kl_divergence(&uniform, 0.0).is_err());
    }

    #[test]
    fn covering_size_positive_for_admissible_splits() {
        for variant in [DecoderKind::Td, DecoderKind::Sm] {
            for layers in 0..=3 {
                for (m, n) in [(20usize, 40usize), (10174, 12732), (500, 501)] {
                    if m + 20 > n {
                        continue;
                    }
                    assert!(covering_size(variant, layers, m, n).unwrap() > 0.0);
                }
            }
        }
        assert!(covering_size(DecoderKind::Td, 1, 100, 100).is_err());
    }

    #[test]
    fn bound_terms_fields_from_a_trained_model() {
        use crate::kg::{generate_negatives, split_train, KnowledgeGraph, Triplet};
        use crate::train::{train, TrainConfig};

        // 50 entities, one-hot features, enough triplets for A.3
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let mut positives = Vec::new();
        let mut seen = std::collections::HashSet::new();
        while positives.len() < 60 {
            let t = Triplet::new(rng.gen_range(0..50), rng.gen_range(0..4), rng.gen_range(0..50));
            if seen.insert(t) {
                positives.push(t);
            }
        }
        let g = KnowledgeGraph::new(
            (0..50).map(|i| format!("e{i}")).collect(),
            (0..4).map(|i| format!("r{i}")).collect(),
            positives,
            vec![],
            None,
            None,
        )
        .unwrap();
        let negs = generate_negatives(&g, 0).unwrap();
        let g = g.with_negatives(negs).unwrap();
        let split = split_train(&g, 0.8, 0).unwrap();
        let cfg = TrainConfig {
            layers: 1,
            hidden_dim: 8,
            rel_hidden_dim: 8,
            decoder: DecoderKind::Td,
            aggregator: crate::diffusion::Aggregator::Mean,
            gamma: 0.75,
            s_target: 10.0,
            epochs: 3,
            seed: 1,
            ..TrainConfig::default()
        };
        let trained = train(&g, &split, &cfg).unwrap();
        let terms = compute_bound_terms(&trained, &g, &split, 0.75, 0.05).unwrap();

        // mean aggregator over one-hot features: kappa = #occurring
        // relations, tau = 1 + kappa, closed forms hold
        let occurring: f64 = terms.k_r.iter().sum();
        assert_eq!(terms.kappa, occurring);
        assert_eq!(terms.tau, 1.0 + occurring);
        assert!((terms.eta - (2.0 * terms.tau.powi(1) - 1.0)).abs() < 1e-9);
        assert!((terms.zeta - (4.0 * terms.tau.powi(1) - 1.0)).abs() < 1e-9);
        // renormalization pins every per-layer max at s_target
        for s_l in &terms.s_per_layer {
            assert!((s_l - 10.0).abs() < 1e-9);
        }
        assert!((terms.s - 10.0).abs() < 1e-9);
        // one-hot: d = |V| (larger than every hidden dim, TD includes d_{L+1})
        assert_eq!(terms.d, 50);
        assert_eq!(terms.n_w, n_w_formula(DecoderKind::Td, 4, 1));
        assert_eq!(terms.m, split.m());
        assert_eq!(terms.n, split.n());
        assert!(terms.sigma > 0.0 && terms.kl > 0.0 && terms.covering > 0.0);
        // KL consistency: N_w matrices all at norm s -> N_w s^2 / (2 sigma^2)
        let expect_kl = terms.n_w as f64 * 100.0 / (2.0 * terms.sigma * terms.sigma);
        assert!((terms.kl - expect_kl).abs() < 1e-6 * expect_kl);
        let bound = generalization_bound(&terms).unwrap();
        assert!(bound.raw.is_finite() && bound.raw > 0.0);
    }

    #[test]
    fn bound_computation_is_pure() {
        let t = reference_terms(DecoderKind::Td);
        let a = generalization_bound(&t).unwrap();
        let b = generalization_bound(&t).unwrap();
        assert_eq!(a.raw.to_bits(), b.raw.to_bits());
        assert_eq!(sigma_prior(&t).to_bits(), sigma_prior(&t).to_bits());
        let m = Array2::from_shape_fn((9, 7), |(i, j)| ((i * 7 + j) as f64).sin());
        assert_eq!(
            spectral_norm(&m, 1e-12).unwrap().to_bits(),
            spectral_norm(&m, 1e-12).unwrap().to_bits()
        );
    }

    #[test]
    fn theta_umls_split_value() {
        // theta(10174, 12732), frozen from a 30-digit evaluation
        let v = theta(10174, 12732).unwrap();
        let expect = 3.0 * (10174.0f64 * (1.0 - 10174.0 / 12732.0)).sqrt() * 10174.0f64.ln();
        assert!((v - expect).abs() < 1e-12);
        assert!((v - 1251.576500644777).abs() < 1e-9);
    }
}
