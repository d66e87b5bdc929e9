//! Triplet-classification decoders.
//!
//! Both decoders emit two scores per triplet: index 0 is evidence for
//! the triplet being false, index 1 for it being true, with fully
//! independent parameters per head.
//!
//! * Translational distance: `f[j] = -|| H[h] Wbar_rj + R[r] Ubar_rj - H[t] V_rj ||`
//!   (always non-positive).
//! * Semantic matching: `f[j] = H[h] Ubar_rj H[t]^T` (a bilinear form,
//!   sign-unrestricted).

use crate::encoder::RepState;
use crate::error::{Error, Result};
use crate::kg::Triplet;
use crate::matrix::Mat;

/// The two per-label scores of one triplet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScorePair {
    /// Score for label 0 (false).
    pub s0: f64,
    /// Score for label 1 (true).
    pub s1: f64,
}

impl ScorePair {
    pub fn get(&self, label: bool) -> f64 {
        if label {
            self.s1
        } else {
            self.s0
        }
    }
}

/// Per-relation weights of the translational-distance decoder, one set
/// per head j in {0, 1}.
#[derive(Debug, Clone)]
pub struct TdRelationParams {
    /// Head projection `Wbar_r^<j>`, `d_L x d_{L+1}`.
    pub w: [Mat; 2],
    /// Relation projection `Ubar_r^<j>`, `d'_L x d_{L+1}`.
    pub u: [Mat; 2],
    /// Tail projection `V_r^<j>`, `d_L x d_{L+1}`.
    pub v: [Mat; 2],
}

#[derive(Debug, Clone)]
pub struct TdDecoderParams {
    pub relations: Vec<TdRelationParams>,
}

/// Per-relation square bilinear forms of the semantic-matching
/// decoder, one per head.
#[derive(Debug, Clone)]
pub struct SmDecoderParams {
    pub relations: Vec<[Mat; 2]>,
}

/// Either decoder's parameters.
#[derive(Debug, Clone)]
pub enum DecoderParams {
    Td(TdDecoderParams),
    Sm(SmDecoderParams),
}

/// Decoder family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecoderKind {
    Td,
    Sm,
}

impl std::fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DecoderKind::Td => write!(f, "td"),
            DecoderKind::Sm => write!(f, "sm"),
        }
    }
}

impl std::str::FromStr for DecoderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "td" => Ok(DecoderKind::Td),
            "sm" => Ok(DecoderKind::Sm),
            other => Err(Error::Argument(format!(
                "unknown decoder {other:?} (expected td or sm)"
            ))),
        }
    }
}

impl DecoderParams {
    pub fn kind(&self) -> DecoderKind {
        match self {
            DecoderParams::Td(_) => DecoderKind::Td,
            DecoderParams::Sm(_) => DecoderKind::Sm,
        }
    }

    pub fn n_relations(&self) -> usize {
        match self {
            DecoderParams::Td(p) => p.relations.len(),
            DecoderParams::Sm(p) => p.relations.len(),
        }
    }

    /// Output dimension `d_{L+1}` (TD); the entity dimension itself
    /// for SM.
    pub fn d_out(&self) -> usize {
        match self {
            DecoderParams::Td(p) => p.relations.first().map_or(0, |r| r.w[0].ncols()),
            DecoderParams::Sm(p) => p.relations.first().map_or(0, |r| r[0].ncols()),
        }
    }
}

fn check_triplet(state: &RepState, n_relations: usize, t: &Triplet) -> Result<()> {
    let nv = state.h_final().nrows();
    if t.head >= nv || t.tail >= nv || t.relation >= n_relations {
        return Err(Error::Argument(format!(
            "triplet ({},{},{}) out of range for |V|={nv}, |R|={n_relations}",
            t.head, t.relation, t.tail
        )));
    }
    Ok(())
}

/// Translational-distance score pair of one triplet.
pub fn score_td(state: &RepState, params: &TdDecoderParams, t: &Triplet) -> Result<ScorePair> {
    check_triplet(state, params.relations.len(), t)?;
    let h = state.h_final();
    let r = state.r_final();
    let rel = &params.relations[t.relation];
    let mut scores = [0.0f64; 2];
    for (j, score) in scores.iter_mut().enumerate() {
        let residual =
            h.row(t.head).dot(&rel.w[j]) + r.row(t.relation).dot(&rel.u[j]) - h.row(t.tail).dot(&rel.v[j]);
        *score = -residual.iter().map(|x| x * x).sum::<f64>().sqrt();
    }
    Ok(ScorePair {
        s0: scores[0],
        s1: scores[1],
    })
}

/// Semantic-matching score pair of one triplet.
pub fn score_sm(state: &RepState, params: &SmDecoderParams, t: &Triplet) -> Result<ScorePair> {
    check_triplet(state, params.relations.len(), t)?;
    let h = state.h_final();
    let rel = &params.relations[t.relation];
    let mut scores = [0.0f64; 2];
    for j in 0..2 {
        scores[j] = h.row(t.head).dot(&rel[j]).dot(&h.row(t.tail));
    }
    Ok(ScorePair {
        s0: scores[0],
        s1: scores[1],
    })
}

/// Score with either decoder.
pub fn score(state: &RepState, params: &DecoderParams, t: &Triplet) -> Result<ScorePair> {
    match params {
        DecoderParams::Td(p) => score_td(state, p, t),
        DecoderParams::Sm(p) => score_sm(state, p, t),
    }
}

/// Score many triplets, batching the entity projections per relation.
/// Produces exactly the same values as the per-triplet path.
pub fn score_all(
    state: &RepState,
    params: &DecoderParams,
    triplets: &[Triplet],
) -> Result<Vec<ScorePair>> {
    for t in triplets {
        check_triplet(state, params.n_relations(), t)?;
    }
    let h = state.h_final();
    let r = state.r_final();
    let mut out = vec![
        ScorePair {
            s0: f64::NAN,
            s1: f64::NAN
        };
        triplets.len()
    ];
    let mut by_relation: Vec<Vec<usize>> = vec![Vec::new(); params.n_relations()];
    for (i, t) in triplets.iter().enumerate() {
        by_relation[t.relation].push(i);
    }
    for (rel, idxs) in by_relation.iter().enumerate() {
        if idxs.is_empty() {
            continue;
        }
        match params {
            DecoderParams::Td(p) => {
                let rp = &p.relations[rel];
                for j in 0..2 {
                    let proj_w = h.dot(&rp.w[j]);
                    let proj_v = h.dot(&rp.v[j]);
                    let proj_u = r.row(rel).dot(&rp.u[j]);
                    for &i in idxs {
                        let t = &triplets[i];
                        let mut sq = 0.0;
                        for c in 0..proj_w.ncols() {
                            let x = proj_w[(t.head, c)] + proj_u[c] - proj_v[(t.tail, c)];
                            sq += x * x;
                        }
                        let s = -sq.sqrt();
                        if j == 0 {
                            out[i].s0 = s;
                        } else {
                            out[i].s1 = s;
                        }
                    }
                }
            }
            DecoderParams::Sm(p) => {
                for j in 0..2 {
                    let proj = h.dot(&p.relations[rel][j]);
                    for &i in idxs {
                        let t = &triplets[i];
                        let s = proj.row(t.head).dot(&h.row(t.tail));
                        if j == 0 {
                            out[i].s0 = s;
                        } else {
                            out[i].s1 = s;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Classify from a score pair: label 1 iff `s1 > s0` (ties predict 0).
pub fn predict(score: &ScorePair) -> Result<u8> {
    if score.s0.is_nan() || score.s1.is_nan() {
        return Err(Error::NonFinite("score pair".into()));
    }
    Ok(u8::from(score.s1 > score.s0))
}
