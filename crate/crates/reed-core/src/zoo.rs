//! Classic knowledge-graph embedding models expressed as decoder
//! parameter choices, with independent native scorers as equivalence
//! oracles.
//!
//! Every model here is a shallow architecture: the entity/relation
//! embedding tables play the role of the simulation adapters, so with
//! zero encoder layers and one-hot features the decoder reproduces the
//! native scoring function exactly. [`build_td`] / [`build_sm`] emit
//! the decoder matrices; [`ZooModel::reference_scores`] computes the
//! same score with model-native arithmetic (complex multiplication for
//! RotatE/ComplEx, Hamilton products for QuatE, circular correlation
//! for HolE) and never touches the decoder path.
//!
//! Translational-distance family: TransE, TransH, TransR, RotatE,
//! PairRE. Semantic-matching family: DistMult, RESCAL, ANALOGY,
//! SimplE, QuatE, ComplEx, HolE (the latter two are special cases of
//! the ANALOGY bilinear-form construction, but their reference scorers
//! stay native).

use crate::decoder::{ScorePair, SmDecoderParams, TdDecoderParams, TdRelationParams};
use crate::error::{Error, Result};
use crate::kg::Triplet;
use crate::matrix::Mat;
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Model identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ZooKind {
    TransE,
    TransH,
    TransR,
    RotatE,
    PairRe,
    DistMult,
    Rescal,
    Analogy,
    SimplE,
    QuatE,
    ComplEx,
    HolE,
}

impl ZooKind {
    pub const ALL: [ZooKind; 12] = [
        ZooKind::TransE,
        ZooKind::TransH,
        ZooKind::TransR,
        ZooKind::RotatE,
        ZooKind::PairRe,
        ZooKind::DistMult,
        ZooKind::Rescal,
        ZooKind::Analogy,
        ZooKind::SimplE,
        ZooKind::QuatE,
        ZooKind::ComplEx,
        ZooKind::HolE,
    ];

    /// True for the translational-distance family.
    pub fn is_td(&self) -> bool {
        matches!(
            self,
            ZooKind::TransE | ZooKind::TransH | ZooKind::TransR | ZooKind::RotatE | ZooKind::PairRe
        )
    }
}

impl std::fmt::Display for ZooKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ZooKind::TransE => "transe",
            ZooKind::TransH => "transh",
            ZooKind::TransR => "transr",
            ZooKind::RotatE => "rotate",
            ZooKind::PairRe => "pairre",
            ZooKind::DistMult => "distmult",
            ZooKind::Rescal => "rescal",
            ZooKind::Analogy => "analogy",
            ZooKind::SimplE => "simple",
            ZooKind::QuatE => "quate",
            ZooKind::ComplEx => "complex",
            ZooKind::HolE => "hole",
        };
        write!(f, "{name}")
    }
}

impl std::str::FromStr for ZooKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "transe" => Ok(ZooKind::TransE),
            "transh" => Ok(ZooKind::TransH),
            "transr" => Ok(ZooKind::TransR),
            "rotate" => Ok(ZooKind::RotatE),
            "pairre" => Ok(ZooKind::PairRe),
            "distmult" => Ok(ZooKind::DistMult),
            "rescal" => Ok(ZooKind::Rescal),
            "analogy" => Ok(ZooKind::Analogy),
            "simple" => Ok(ZooKind::SimplE),
            "quate" => Ok(ZooKind::QuatE),
            "complex" => Ok(ZooKind::ComplEx),
            "hole" => Ok(ZooKind::HolE),
            other => Err(Error::Argument(format!("unknown zoo model {other:?}"))),
        }
    }
}

/// Per-relation ANALOGY parameters: 2x2 rotation-scaling blocks plus a
/// free diagonal tail. Sharing this structure across relations makes
/// every constructed matrix normal and the family pairwise commuting.
#[derive(Debug, Clone)]
pub struct AnalogyRelation {
    pub blocks: Vec<(f64, f64)>,
    pub tail: Vec<f64>,
}

impl AnalogyRelation {
    pub fn dim(&self) -> usize {
        2 * self.blocks.len() + self.tail.len()
    }

    /// Materialize the block-diagonal normal matrix.
    pub fn to_matrix(&self) -> Mat {
        let d = self.dim();
        let mut m = Array2::zeros((d, d));
        for (i, &(a, b)) in self.blocks.iter().enumerate() {
            m[(2 * i, 2 * i)] = a;
            m[(2 * i, 2 * i + 1)] = b;
            m[(2 * i + 1, 2 * i)] = -b;
            m[(2 * i + 1, 2 * i + 1)] = a;
        }
        for (i, &t) in self.tail.iter().enumerate() {
            let k = 2 * self.blocks.len() + i;
            m[(k, k)] = t;
        }
        m
    }
}

/// One head's raw parameter bundle, in the model's native layout.
#[derive(Debug, Clone)]
pub enum ZooParams {
    /// Unit-norm entity rows.
    TransE { ent: Mat, rel: Mat },
    /// `normals` rows are the unit hyperplane normals f_r.
    TransH { ent: Mat, rel: Mat, normals: Mat },
    /// One projection map F_r per relation.
    TransR {
        ent: Mat,
        rel: Mat,
        maps: Vec<Mat>,
    },
    /// Entity columns are [real | imaginary]; `phases` columns are
    /// [p | q] with p^2 + q^2 = 1 per coordinate.
    RotatE { ent: Mat, phases: Mat },
    /// Unit-norm entity rows; `head`/`tail` are the two relation parts.
    PairRe { ent: Mat, head: Mat, tail: Mat },
    DistMult { ent: Mat, rel: Mat },
    Rescal { ent: Mat, b: Vec<Mat> },
    Analogy {
        ent: Mat,
        relations: Vec<AnalogyRelation>,
    },
    /// Separate head-role/tail-role entity tables and forward/inverse
    /// relation tables.
    SimplE {
        ent_head: Mat,
        ent_tail: Mat,
        rel: Mat,
        rel_inv: Mat,
    },
    /// Entity columns are the four quaternion components
    /// [a | b | c | d]; `quat` holds the four relation component
    /// tables, unit per coordinate.
    QuatE { ent: Mat, quat: [Mat; 4] },
    ComplEx {
        ent_re: Mat,
        ent_im: Mat,
        rel_re: Mat,
        rel_im: Mat,
    },
    HolE { ent: Mat, rel: Mat },
}

/// A zoo model: two independent raw bundles, one per decoder head.
#[derive(Debug, Clone)]
pub struct ZooModel {
    pub kind: ZooKind,
    pub heads: [ZooParams; 2],
}

const UNIT_TOL: f64 = 1e-9;
/// Norms within this distance of 1 are left untouched by projection,
/// which makes projecting twice bitwise equal to projecting once.
const PROJECT_SKIP_TOL: f64 = 1e-12;

fn normalize_rows_to_unit(m: &mut Mat, what: &str) -> Result<()> {
    for mut row in m.rows_mut() {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Validation(format!(
                "cannot normalize an exactly-zero {what} vector"
            )));
        }
        if (norm - 1.0).abs() > PROJECT_SKIP_TOL {
            row.iter_mut().for_each(|x| *x /= norm);
        }
    }
    Ok(())
}

/// Normalize coordinate groups spread across `parts` matrices: entry i
/// of every part forms one vector to put on the unit sphere.
fn normalize_grouped(parts: &mut [&mut Mat], what: &str) -> Result<()> {
    let (rows, cols) = parts[0].dim();
    for r in 0..rows {
        for c in 0..cols {
            let norm = parts
                .iter()
                .map(|p| p[(r, c)] * p[(r, c)])
                .sum::<f64>()
                .sqrt();
            if norm == 0.0 {
                return Err(Error::Validation(format!(
                    "cannot normalize an exactly-zero {what} coordinate"
                )));
            }
            if (norm - 1.0).abs() > PROJECT_SKIP_TOL {
                for p in parts.iter_mut() {
                    p[(r, c)] /= norm;
                }
            }
        }
    }
    Ok(())
}

impl ZooModel {
    pub fn n_entities(&self) -> usize {
        match &self.heads[0] {
            ZooParams::TransE { ent, .. }
            | ZooParams::TransH { ent, .. }
            | ZooParams::TransR { ent, .. }
            | ZooParams::RotatE { ent, .. }
            | ZooParams::PairRe { ent, .. }
            | ZooParams::DistMult { ent, .. }
            | ZooParams::Rescal { ent, .. }
            | ZooParams::Analogy { ent, .. }
            | ZooParams::QuatE { ent, .. }
            | ZooParams::HolE { ent, .. } => ent.nrows(),
            ZooParams::SimplE { ent_head, .. } => ent_head.nrows(),
            ZooParams::ComplEx { ent_re, .. } => ent_re.nrows(),
        }
    }

    pub fn n_relations(&self) -> usize {
        match &self.heads[0] {
            ZooParams::TransE { rel, .. }
            | ZooParams::TransH { rel, .. }
            | ZooParams::TransR { rel, .. }
            | ZooParams::DistMult { rel, .. }
            | ZooParams::HolE { rel, .. } => rel.nrows(),
            ZooParams::RotatE { phases, .. } => phases.nrows(),
            ZooParams::PairRe { head, .. } => head.nrows(),
            ZooParams::Rescal { b, .. } => b.len(),
            ZooParams::Analogy { relations, .. } => relations.len(),
            ZooParams::SimplE { rel, .. } => rel.nrows(),
            ZooParams::QuatE { quat, .. } => quat[0].nrows(),
            ZooParams::ComplEx { rel_re, .. } => rel_re.nrows(),
        }
    }

    /// Draw a random model with both heads independent; constrained
    /// quantities are projected onto their manifolds.
    pub fn random(kind: ZooKind, n_ent: usize, n_rel: usize, dim: usize, seed: u64) -> Result<Self> {
        match kind {
            ZooKind::RotatE | ZooKind::SimplE | ZooKind::ComplEx => {
                if !dim.is_multiple_of(2) {
                    return Err(Error::Argument(format!(
                        "{kind} needs an even embedding dimension, found {dim}"
                    )));
                }
            }
            ZooKind::QuatE
                if !dim.is_multiple_of(4) => {
                    return Err(Error::Argument(format!(
                        "quate needs a dimension divisible by 4, found {dim}"
                    )));
                }
            _ => {}
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut draw = |rows: usize, cols: usize| -> Mat {
            Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
        };
        let mut head = |kind: ZooKind| -> ZooParams {
            match kind {
                ZooKind::TransE => ZooParams::TransE {
                    ent: draw(n_ent, dim),
                    rel: draw(n_rel, dim),
                },
                ZooKind::TransH => ZooParams::TransH {
                    ent: draw(n_ent, dim),
                    rel: draw(n_rel, dim),
                    normals: draw(n_rel, dim),
                },
                ZooKind::TransR => ZooParams::TransR {
                    ent: draw(n_ent, dim),
                    rel: draw(n_rel, dim),
                    maps: (0..n_rel).map(|_| draw(dim, dim)).collect(),
                },
                ZooKind::RotatE => ZooParams::RotatE {
                    ent: draw(n_ent, dim),
                    phases: draw(n_rel, dim),
                },
                ZooKind::PairRe => ZooParams::PairRe {
                    ent: draw(n_ent, dim),
                    head: draw(n_rel, dim),
                    tail: draw(n_rel, dim),
                },
                ZooKind::DistMult => ZooParams::DistMult {
                    ent: draw(n_ent, dim),
                    rel: draw(n_rel, dim),
                },
                ZooKind::Rescal => ZooParams::Rescal {
                    ent: draw(n_ent, dim),
                    b: (0..n_rel).map(|_| draw(dim, dim)).collect(),
                },
                ZooKind::Analogy => {
                    let n_blocks = dim / 2;
                    let n_tail = dim - 2 * n_blocks;
                    ZooParams::Analogy {
                        ent: draw(n_ent, dim),
                        relations: (0..n_rel)
                            .map(|_| AnalogyRelation {
                                blocks: (0..n_blocks)
                                    .map(|_| {
                                        let a = draw(1, 1)[(0, 0)];
                                        let b = draw(1, 1)[(0, 0)];
                                        (a, b)
                                    })
                                    .collect(),
                                tail: (0..n_tail).map(|_| draw(1, 1)[(0, 0)]).collect(),
                            })
                            .collect(),
                    }
                }
                ZooKind::SimplE => ZooParams::SimplE {
                    ent_head: draw(n_ent, dim / 2),
                    ent_tail: draw(n_ent, dim / 2),
                    rel: draw(n_rel, dim / 2),
                    rel_inv: draw(n_rel, dim / 2),
                },
                ZooKind::QuatE => ZooParams::QuatE {
                    ent: draw(n_ent, dim),
                    quat: [
                        draw(n_rel, dim / 4),
                        draw(n_rel, dim / 4),
                        draw(n_rel, dim / 4),
                        draw(n_rel, dim / 4),
                    ],
                },
                ZooKind::ComplEx => ZooParams::ComplEx {
                    ent_re: draw(n_ent, dim / 2),
                    ent_im: draw(n_ent, dim / 2),
                    rel_re: draw(n_rel, dim / 2),
                    rel_im: draw(n_rel, dim / 2),
                },
                ZooKind::HolE => ZooParams::HolE {
                    ent: draw(n_ent, dim),
                    rel: draw(n_rel, dim),
                },
            }
        };
        let model = ZooModel {
            kind,
            heads: [head(kind), head(kind)],
        };
        model.project_constraints()
    }

    /// Project every constrained quantity onto its manifold: unit
    /// entity rows (TransE/PairRE), unit hyperplane normals (TransH),
    /// unit phase pairs (RotatE), unit quaternion quadruples (QuatE).
    /// Idempotent; errors on an exactly-zero vector.
    pub fn project_constraints(mut self) -> Result<Self> {
        for head in self.heads.iter_mut() {
            match head {
                ZooParams::TransE { ent, .. } => normalize_rows_to_unit(ent, "entity")?,
                ZooParams::PairRe { ent, .. } => normalize_rows_to_unit(ent, "entity")?,
                ZooParams::TransH { normals, .. } => {
                    normalize_rows_to_unit(normals, "hyperplane normal")?
                }
                ZooParams::RotatE { phases, .. } => {
                    let k = phases.ncols() / 2;
                    let (mut p, mut q) = (
                        phases.slice(ndarray::s![.., ..k]).to_owned(),
                        phases.slice(ndarray::s![.., k..]).to_owned(),
                    );
                    normalize_grouped(&mut [&mut p, &mut q], "phase")?;
                    phases.slice_mut(ndarray::s![.., ..k]).assign(&p);
                    phases.slice_mut(ndarray::s![.., k..]).assign(&q);
                }
                ZooParams::QuatE { quat, .. } => {
                    let [a, b, c, d] = quat;
                    let mut parts = [&mut *a, &mut *b, &mut *c, &mut *d];
                    normalize_grouped(&mut parts, "quaternion")?;
                }
                _ => {}
            }
        }
        Ok(self)
    }

    /// Verify the constrained quantities are on their manifolds.
    pub fn check_invariants(&self) -> Result<()> {
        let check_unit_rows = |m: &Mat, what: &str| -> Result<()> {
            for row in m.rows() {
                let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > UNIT_TOL {
                    return Err(Error::Validation(format!(
                        "{what} vector has norm {norm}, expected 1"
                    )));
                }
            }
            Ok(())
        };
        for head in &self.heads {
            match head {
                ZooParams::TransE { ent, .. } | ZooParams::PairRe { ent, .. } => {
                    check_unit_rows(ent, "entity")?
                }
                ZooParams::TransH { normals, .. } => check_unit_rows(normals, "hyperplane normal")?,
                ZooParams::RotatE { phases, .. } => {
                    let k = phases.ncols() / 2;
                    for r in 0..phases.nrows() {
                        for i in 0..k {
                            let n = phases[(r, i)].powi(2) + phases[(r, k + i)].powi(2);
                            if (n - 1.0).abs() > UNIT_TOL {
                                return Err(Error::Validation(format!(
                                    "phase pair has squared norm {n}, expected 1"
                                )));
                            }
                        }
                    }
                }
                ZooParams::QuatE { quat, .. } => {
                    for r in 0..quat[0].nrows() {
                        for i in 0..quat[0].ncols() {
                            let n: f64 = quat.iter().map(|m| m[(r, i)] * m[(r, i)]).sum();
                            if (n - 1.0).abs() > UNIT_TOL {
                                return Err(Error::Validation(format!(
                                    "quaternion has squared norm {n}, expected 1"
                                )));
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Native score for one head, computed with model-native
    /// arithmetic and no decoder machinery.
    pub fn reference_score_head(&self, t: &Triplet, head: usize) -> f64 {
        native_score(&self.heads[head], t)
    }

    /// Native scores of both heads.
    pub fn reference_scores(&self, t: &Triplet) -> ScorePair {
        ScorePair {
            s0: self.reference_score_head(t, 0),
            s1: self.reference_score_head(t, 1),
        }
    }
}

fn native_score(params: &ZooParams, t: &Triplet) -> f64 {
    let (h, r, ti) = (t.head, t.relation, t.tail);
    match params {
        ZooParams::TransE { ent, rel } => {
            let mut sq = 0.0;
            for i in 0..ent.ncols() {
                let x = ent[(h, i)] + rel[(r, i)] - ent[(ti, i)];
                sq += x * x;
            }
            -sq.sqrt()
        }
        ZooParams::TransH { ent, rel, normals } => {
            let d = ent.ncols();
            let dot = |e: usize| -> f64 { (0..d).map(|i| ent[(e, i)] * normals[(r, i)]).sum() };
            let (hf, tf) = (dot(h), dot(ti));
            let mut sq = 0.0;
            for i in 0..d {
                let hp = ent[(h, i)] - hf * normals[(r, i)];
                let tp = ent[(ti, i)] - tf * normals[(r, i)];
                let x = hp + rel[(r, i)] - tp;
                sq += x * x;
            }
            -sq.sqrt()
        }
        ZooParams::TransR { ent, rel, maps } => {
            let map = &maps[r];
            let d_out = map.ncols();
            let mut sq = 0.0;
            for j in 0..d_out {
                let mut hp = 0.0;
                let mut tp = 0.0;
                for i in 0..map.nrows() {
                    hp += ent[(h, i)] * map[(i, j)];
                    tp += ent[(ti, i)] * map[(i, j)];
                }
                let x = hp + rel[(r, j)] - tp;
                sq += x * x;
            }
            -sq.sqrt()
        }
        ZooParams::RotatE { ent, phases } => {
            let k = ent.ncols() / 2;
            let mut sq = 0.0;
            for i in 0..k {
                let hc = Complex64::new(ent[(h, i)], ent[(h, k + i)]);
                let tc = Complex64::new(ent[(ti, i)], ent[(ti, k + i)]);
                let rc = Complex64::new(phases[(r, i)], phases[(r, k + i)]);
                sq += (hc * rc - tc).norm_sqr();
            }
            -sq.sqrt()
        }
        ZooParams::PairRe { ent, head, tail } => {
            let mut sq = 0.0;
            for i in 0..ent.ncols() {
                let x = ent[(h, i)] * head[(r, i)] - ent[(ti, i)] * tail[(r, i)];
                sq += x * x;
            }
            -sq.sqrt()
        }
        ZooParams::DistMult { ent, rel } => (0..ent.ncols())
            .map(|i| ent[(h, i)] * rel[(r, i)] * ent[(ti, i)])
            .sum(),
        ZooParams::Rescal { ent, b } => {
            let m = &b[r];
            let mut total = 0.0;
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    total += ent[(h, i)] * m[(i, j)] * ent[(ti, j)];
                }
            }
            total
        }
        ZooParams::Analogy { ent, relations } => {
            let rel = &relations[r];
            let mut total = 0.0;
            for (i, &(a, b)) in rel.blocks.iter().enumerate() {
                let (h1, h2) = (ent[(h, 2 * i)], ent[(h, 2 * i + 1)]);
                let (t1, t2) = (ent[(ti, 2 * i)], ent[(ti, 2 * i + 1)]);
                total += a * (h1 * t1 + h2 * t2) + b * (h1 * t2 - h2 * t1);
            }
            for (i, &d) in rel.tail.iter().enumerate() {
                let k = 2 * rel.blocks.len() + i;
                total += d * ent[(h, k)] * ent[(ti, k)];
            }
            total
        }
        ZooParams::SimplE {
            ent_head,
            ent_tail,
            rel,
            rel_inv,
        } => {
            let k = ent_head.ncols();
            let forward: f64 = (0..k)
                .map(|i| ent_head[(h, i)] * rel[(r, i)] * ent_tail[(ti, i)])
                .sum();
            let backward: f64 = (0..k)
                .map(|i| ent_head[(ti, i)] * rel_inv[(r, i)] * ent_tail[(h, i)])
                .sum();
            0.5 * (forward + backward)
        }
        ZooParams::QuatE { ent, quat } => {
            let k = ent.ncols() / 4;
            let mut total = 0.0;
            for i in 0..k {
                let (ha, hb, hc, hd) = (
                    ent[(h, i)],
                    ent[(h, k + i)],
                    ent[(h, 2 * k + i)],
                    ent[(h, 3 * k + i)],
                );
                let (ra, rb, rc, rd) = (
                    quat[0][(r, i)],
                    quat[1][(r, i)],
                    quat[2][(r, i)],
                    quat[3][(r, i)],
                );
                // Hamilton product h (x) r
                let pa = ha * ra - hb * rb - hc * rc - hd * rd;
                let pb = ha * rb + hb * ra + hc * rd - hd * rc;
                let pc = ha * rc - hb * rd + hc * ra + hd * rb;
                let pd = ha * rd + hb * rc - hc * rb + hd * ra;
                total += pa * ent[(ti, i)]
                    + pb * ent[(ti, k + i)]
                    + pc * ent[(ti, 2 * k + i)]
                    + pd * ent[(ti, 3 * k + i)];
            }
            total
        }
        ZooParams::ComplEx {
            ent_re,
            ent_im,
            rel_re,
            rel_im,
        } => {
            let mut total = Complex64::new(0.0, 0.0);
            for i in 0..ent_re.ncols() {
                let hc = Complex64::new(ent_re[(h, i)], ent_im[(h, i)]);
                let rc = Complex64::new(rel_re[(r, i)], rel_im[(r, i)]);
                let tc = Complex64::new(ent_re[(ti, i)], ent_im[(ti, i)]);
                total += hc * rc * tc.conj();
            }
            total.re
        }
        ZooParams::HolE { ent, rel } => {
            // score = sum_k rel[k] * (h (star) t)[k], circular correlation
            let d = ent.ncols();
            let mut total = 0.0;
            for k in 0..d {
                let mut corr = 0.0;
                for i in 0..d {
                    corr += ent[(h, i)] * ent[(ti, (k + i) % d)];
                }
                total += rel[(r, k)] * corr;
            }
            total
        }
    }
}

/// HolE bilinear form: `M[i, j] = rel[(j - i) mod d]`, a circulant
/// (normal, pairwise commuting) matrix family.
fn hole_circulant(rel_row: &[f64]) -> Mat {
    let d = rel_row.len();
    Array2::from_shape_fn((d, d), |(i, j)| rel_row[(j + d - i) % d])
}

/// ComplEx as an ANALOGY family: interleave (re, im) coordinate pairs
/// and use 2x2 rotation-scaling blocks from the relation components.
fn complex_interleaved(re: &Mat, im: &Mat) -> Mat {
    let (n, k) = re.dim();
    Array2::from_shape_fn((n, 2 * k), |(r, c)| {
        if c % 2 == 0 {
            re[(r, c / 2)]
        } else {
            im[(r, c / 2)]
        }
    })
}

/// Assemble the semantic-matching form `T B T^T`.
fn bilinear(ent: &Mat, b: &Mat) -> Mat {
    ent.dot(b).dot(&ent.t())
}

/// Build translational-distance decoder weights from a TD-family
/// model. Errors for semantic-matching kinds or violated constraints.
pub fn build_td(model: &ZooModel) -> Result<TdDecoderParams> {
    if !model.kind.is_td() {
        return Err(Error::Argument(format!(
            "{} is not a translational-distance model",
            model.kind
        )));
    }
    model.check_invariants()?;
    let n_rel = model.n_relations();

    let per_head = |params: &ZooParams, r: usize| -> (Mat, Mat, Mat) {
        match params {
            ZooParams::TransE { ent, rel } => (ent.clone(), rel.clone(), ent.clone()),
            ZooParams::TransH { ent, rel, normals } => {
                let d = ent.ncols();
                let f = normals.row(r);
                // I - f^T f
                let projector = Array2::from_shape_fn((d, d), |(i, j)| {
                    (if i == j { 1.0 } else { 0.0 }) - f[i] * f[j]
                });
                let projected = ent.dot(&projector);
                (projected.clone(), rel.clone(), projected)
            }
            ZooParams::TransR { ent, rel, maps } => {
                let projected = ent.dot(&maps[r]);
                (projected.clone(), rel.clone(), projected)
            }
            ZooParams::RotatE { ent, phases } => {
                let k = phases.ncols() / 2;
                let rot = Array2::from_shape_fn((2 * k, 2 * k), |(i, j)| {
                    let (p, q) = (phases[(r, j % k)], phases[(r, k + (j % k))]);
                    if i == j {
                        p // diagonal blocks P
                    } else if i + k == j {
                        q // upper-right block Q
                    } else if i == j + k {
                        -q // lower-left block -Q
                    } else {
                        0.0
                    }
                });
                let u = Array2::zeros((phases.nrows(), 2 * k));
                (ent.dot(&rot), u, ent.clone())
            }
            ZooParams::PairRe { ent, head, tail } => {
                let d = ent.ncols();
                let scale = |v: ndarray::ArrayView1<f64>| {
                    Array2::from_shape_fn((ent.nrows(), d), |(e, i)| ent[(e, i)] * v[i])
                };
                let u = Array2::zeros((head.nrows(), d));
                (scale(head.row(r)), u, scale(tail.row(r)))
            }
            _ => unreachable!("TD family checked above"),
        }
    };

    let relations = (0..n_rel)
        .map(|r| {
            let (w0, u0, v0) = per_head(&model.heads[0], r);
            let (w1, u1, v1) = per_head(&model.heads[1], r);
            TdRelationParams {
                w: [w0, w1],
                u: [u0, u1],
                v: [v0, v1],
            }
        })
        .collect();
    Ok(TdDecoderParams { relations })
}

/// Build semantic-matching decoder weights from an SM-family model.
/// ComplEx and HolE route through the same `T B T^T` assembly as
/// ANALOGY with their specific commuting normal families.
pub fn build_sm(model: &ZooModel) -> Result<SmDecoderParams> {
    if model.kind.is_td() {
        return Err(Error::Argument(format!(
            "{} is not a semantic-matching model",
            model.kind
        )));
    }
    model.check_invariants()?;
    let n_rel = model.n_relations();

    let per_head = |params: &ZooParams, r: usize| -> Mat {
        match params {
            ZooParams::DistMult { ent, rel } => {
                let b = Array2::from_diag(&rel.row(r));
                bilinear(ent, &b)
            }
            ZooParams::Rescal { ent, b } => bilinear(ent, &b[r]),
            ZooParams::Analogy { ent, relations } => bilinear(ent, &relations[r].to_matrix()),
            ZooParams::SimplE {
                ent_head,
                ent_tail,
                rel,
                rel_inv,
            } => {
                let k = rel.ncols();
                let ent = ndarray::concatenate(
                    ndarray::Axis(1),
                    &[ent_head.view(), ent_tail.view()],
                )
                .expect("simple halves");
                // diag([rel | rel_inv]) times the block swap, halved
                let mut b = Array2::zeros((2 * k, 2 * k));
                for i in 0..k {
                    b[(i, k + i)] = 0.5 * rel[(r, i)];
                    b[(k + i, i)] = 0.5 * rel_inv[(r, i)];
                }
                bilinear(&ent, &b)
            }
            ZooParams::QuatE { ent, quat } => {
                let k = quat[0].ncols();
                let diag =
                    |m: &Mat, sign: f64| Array2::from_shape_fn((k, k), |(i, j)| {
                        if i == j {
                            sign * m[(r, i)]
                        } else {
                            0.0
                        }
                    });
                let (a, b, c, d) = (&quat[0], &quat[1], &quat[2], &quat[3]);
                let mut ham = Array2::zeros((4 * k, 4 * k));
                let blocks: [[(&Mat, f64); 4]; 4] = [
                    [(a, 1.0), (b, 1.0), (c, 1.0), (d, 1.0)],
                    [(b, -1.0), (a, 1.0), (d, -1.0), (c, 1.0)],
                    [(c, -1.0), (d, 1.0), (a, 1.0), (b, -1.0)],
                    [(d, -1.0), (c, -1.0), (b, 1.0), (a, 1.0)],
                ];
                for (bi, row) in blocks.iter().enumerate() {
                    for (bj, &(m, sign)) in row.iter().enumerate() {
                        ham.slice_mut(ndarray::s![
                            bi * k..(bi + 1) * k,
                            bj * k..(bj + 1) * k
                        ])
                        .assign(&diag(m, sign));
                    }
                }
                bilinear(ent, &ham)
            }
            ZooParams::ComplEx {
                ent_re,
                ent_im,
                rel_re,
                rel_im,
            } => {
                let ent = complex_interleaved(ent_re, ent_im);
                let analogy = AnalogyRelation {
                    blocks: (0..rel_re.ncols())
                        .map(|i| (rel_re[(r, i)], rel_im[(r, i)]))
                        .collect(),
                    tail: vec![],
                };
                bilinear(&ent, &analogy.to_matrix())
            }
            ZooParams::HolE { ent, rel } => {
                let b = hole_circulant(rel.row(r).as_slice().expect("contiguous"));
                bilinear(ent, &b)
            }
            _ => unreachable!("SM family checked above"),
        }
    };

    let relations = (0..n_rel)
        .map(|r| [per_head(&model.heads[0], r), per_head(&model.heads[1], r)])
        .collect();
    Ok(SmDecoderParams { relations })
}

/// Result of an equivalence run for one model kind.
#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub kind: ZooKind,
    pub trials: usize,
    pub triplets_per_trial: usize,
    pub max_relative_error: f64,
    pub tolerance: f64,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error <= self.tolerance
    }
}

/// Compare decoder-path scores against native reference scores over
/// random parameter draws and random triplets. The decoder path runs
/// at zero encoder layers with one-hot features, where the embedding
/// tables coincide with the simulation adapters.
pub fn verify_equivalence(
    kind: ZooKind,
    trials: usize,
    triplets_per_trial: usize,
    seed: u64,
) -> Result<EquivalenceReport> {
    use crate::decoder::{score, DecoderParams};
    use crate::encoder::RepState;

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut max_rel = 0.0f64;
    for trial in 0..trials {
        let n_ent = rng.gen_range(4..12);
        let n_rel = rng.gen_range(1..5);
        let dim = 4 * rng.gen_range(1..4); // divisible by 4 for every family
        let model = ZooModel::random(kind, n_ent, n_rel, dim, seed ^ (trial as u64) << 17)?;
        let params = if kind.is_td() {
            DecoderParams::Td(build_td(&model)?)
        } else {
            DecoderParams::Sm(build_sm(&model)?)
        };
        let state = RepState {
            h: vec![Array2::eye(n_ent)],
            r: vec![Array2::eye(n_rel)],
        };
        for _ in 0..triplets_per_trial {
            let t = Triplet::new(
                rng.gen_range(0..n_ent),
                rng.gen_range(0..n_rel),
                rng.gen_range(0..n_ent),
            );
            let reed = score(&state, &params, &t)?;
            let native = model.reference_scores(&t);
            for (a, b) in [(reed.s0, native.s0), (reed.s1, native.s1)] {
                let denom = a.abs().max(b.abs());
                if denom > 1e-12 {
                    max_rel = max_rel.max((a - b).abs() / denom);
                }
            }
        }
    }
    Ok(EquivalenceReport {
        kind,
        trials,
        triplets_per_trial,
        max_relative_error: max_rel,
        tolerance: 1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rotate_quarter_turn_rotation_block() {
        // (p, q) = (cos pi/2, sin pi/2) = (0, 1): head (1,0) maps to (0,1)
        let model = ZooModel {
            kind: ZooKind::RotatE,
            heads: [
                ZooParams::RotatE {
                    ent: array![[1.0, 0.0], [0.0, 1.0]],
                    phases: array![[0.0, 1.0]],
                },
                ZooParams::RotatE {
                    ent: array![[1.0, 0.0], [0.0, 1.0]],
                    phases: array![[0.0, 1.0]],
                },
            ],
        };
        let td = build_td(&model).unwrap();
        // w = ent . [[0, 1], [-1, 0]]
        assert_eq!(td.relations[0].w[0], array![[0.0, 1.0], [-1.0, 0.0]]);
        // native score of (h=0, r, t=1) is 0: e^{i pi/2} * 1 = i = t
        let s = model.reference_scores(&Triplet::new(0, 0, 1));
        assert!(s.s0.abs() < 1e-15 && s.s1.abs() < 1e-15);
    }

    #[test]
    fn transh_projector_zeroes_normal_coordinate() {
        let model = ZooModel {
            kind: ZooKind::TransH,
            heads: [0, 1].map(|_| ZooParams::TransH {
                ent: array![[0.6, 0.8], [0.0, 1.0]],
                rel: array![[0.0, 0.0]],
                normals: array![[1.0, 0.0]],
            }),
        };
        let td = build_td(&model).unwrap();
        // first coordinate of every projected entity must be zero
        for e in 0..2 {
            assert_eq!(td.relations[0].w[0][(e, 0)], 0.0);
        }
    }

    #[test]
    fn transe_exact_translation_scores_zero() {
        let ent = array![[0.6, 0.8], [0.6, 0.8]];
        let rel = array![[0.0, 0.0]];
        let model = ZooModel {
            kind: ZooKind::TransE,
            heads: [0, 1].map(|_| ZooParams::TransE {
                ent: ent.clone(),
                rel: rel.clone(),
            }),
        };
        let s = model.reference_scores(&Triplet::new(0, 0, 1));
        assert_eq!(s.s1, 0.0);
    }

    #[test]
    fn distmult_hand_value() {
        let model = ZooModel {
            kind: ZooKind::DistMult,
            heads: [0, 1].map(|_| ZooParams::DistMult {
                ent: array![[1.0, 1.0]],
                rel: array![[2.0, 3.0]],
            }),
        };
        assert_eq!(model.reference_scores(&Triplet::new(0, 0, 0)).s1, 5.0);
        let sm = build_sm(&model).unwrap();
        assert_eq!(sm.relations[0][0][(0, 0)], 5.0);
    }

    #[test]
    fn simple_block_structure() {
        // four entities whose packed [head | tail] rows form the 4x4
        // identity, exposing the raw block structure of U
        let ent_head = array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]];
        let ent_tail = array![[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let model = ZooModel {
            kind: ZooKind::SimplE,
            heads: [0, 1].map(|_| ZooParams::SimplE {
                ent_head: ent_head.clone(),
                ent_tail: ent_tail.clone(),
                rel: array![[2.0, 4.0]],
                rel_inv: array![[6.0, 8.0]],
            }),
        };
        // with identity adapters, U equals the halved swap form itself
        let sm = build_sm(&model).unwrap();
        let u = &sm.relations[0][0];
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(u[(i, j)], 0.0, "head-head block must be zero");
                assert_eq!(u[(2 + i, 2 + j)], 0.0, "tail-tail block must be zero");
            }
        }
        assert_eq!(u[(0, 2)], 1.0); // 0.5 * 2
        assert_eq!(u[(1, 3)], 2.0); // 0.5 * 4
        assert_eq!(u[(2, 0)], 3.0); // 0.5 * 6
        assert_eq!(u[(3, 1)], 4.0); // 0.5 * 8
    }

    #[test]
    fn quate_identity_quaternion_gives_identity_form() {
        let model = ZooModel {
            kind: ZooKind::QuatE,
            heads: [0, 1].map(|_| ZooParams::QuatE {
                ent: Array2::eye(4),
                quat: [
                    array![[1.0]],
                    array![[0.0]],
                    array![[0.0]],
                    array![[0.0]],
                ],
            }),
        };
        let sm = build_sm(&model).unwrap();
        assert_eq!(sm.relations[0][0], Array2::eye(4));
    }

    #[test]
    fn project_constraints_radial_examples_and_idempotence() {
        let model = ZooModel {
            kind: ZooKind::RotatE,
            heads: [0, 1].map(|_| ZooParams::RotatE {
                ent: array![[1.0, 0.0]],
                phases: array![[3.0, 4.0]],
            }),
        };
        let projected = model.project_constraints().unwrap();
        match &projected.heads[0] {
            ZooParams::RotatE { phases, .. } => {
                assert_eq!(phases[(0, 0)], 0.6);
                assert_eq!(phases[(0, 1)], 0.8);
            }
            _ => unreachable!(),
        }
        projected.check_invariants().unwrap();
        // bitwise idempotence
        let twice = projected.clone().project_constraints().unwrap();
        match (&projected.heads[0], &twice.heads[0]) {
            (
                ZooParams::RotatE { phases: a, .. },
                ZooParams::RotatE { phases: b, .. },
            ) => {
                for (x, y) in a.iter().zip(b.iter()) {
                    assert_eq!(x.to_bits(), y.to_bits());
                }
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn project_zero_vector_errors() {
        let model = ZooModel {
            kind: ZooKind::QuatE,
            heads: [0, 1].map(|_| ZooParams::QuatE {
                ent: Array2::eye(4),
                quat: [
                    array![[0.0]],
                    array![[0.0]],
                    array![[0.0]],
                    array![[0.0]],
                ],
            }),
        };
        assert!(model.project_constraints().is_err());
    }

    #[test]
    fn family_mismatch_rejected() {
        let td_model = ZooModel::random(ZooKind::TransE, 4, 2, 4, 0).unwrap();
        assert!(build_sm(&td_model).is_err());
        let sm_model = ZooModel::random(ZooKind::DistMult, 4, 2, 4, 0).unwrap();
        assert!(build_td(&sm_model).is_err());
    }

    #[test]
    fn analogy_relations_commute_and_are_normal() {
        let model = ZooModel::random(ZooKind::Analogy, 4, 3, 6, 5).unwrap();
        if let ZooParams::Analogy { relations, .. } = &model.heads[0] {
            let mats: Vec<Mat> = relations.iter().map(|r| r.to_matrix()).collect();
            for a in &mats {
                let normal_gap = (a.dot(&a.t()) - a.t().dot(a))
                    .iter()
                    .map(|x| x.abs())
                    .fold(0.0, f64::max);
                assert!(normal_gap < 1e-12, "not normal: {normal_gap}");
                for b in &mats {
                    let comm_gap = (a.dot(b) - b.dot(a))
                        .iter()
                        .map(|x| x.abs())
                        .fold(0.0, f64::max);
                    assert!(comm_gap < 1e-12, "do not commute: {comm_gap}");
                }
            }
        } else {
            unreachable!()
        }
    }

    #[test]
    fn hole_circulant_family_commutes() {
        let rows = [
            vec![1.0, 2.0, 3.0, 4.0],
            vec![-0.5, 0.25, 2.0, 1.5],
        ];
        let mats: Vec<Mat> = rows.iter().map(|r| hole_circulant(r)).collect();
        let comm_gap = (mats[0].dot(&mats[1]) - mats[1].dot(&mats[0]))
            .iter()
            .map(|x| x.abs())
            .fold(0.0, f64::max);
        assert!(comm_gap < 1e-12);
        // spot-check the layout: M[i, j] = rel[(j - i) mod d]
        assert_eq!(mats[0][(0, 0)], 1.0);
        assert_eq!(mats[0][(1, 0)], 4.0); // (0 - 1) mod 4 = 3
        assert_eq!(mats[0][(1, 2)], 2.0); // (2 - 1) mod 4 = 1
    }

    #[test]
    fn quick_equivalence_all_kinds() {
        for kind in ZooKind::ALL {
            let report = verify_equivalence(kind, 4, 20, 99).unwrap();
            assert!(
                report.passed(),
                "{kind}: max relative error {}",
                report.max_relative_error
            );
        }
    }
}
