//! Knowledge-graph data model: labeled triplet sets, vocabulary
//! management, train/full splitting, corruption negatives, and
//! neighborhood subgraph sampling.
//!
//! A [`KnowledgeGraph`] is a fully observed labeled triplet set: a set
//! of true triplets, a disjoint set of false triplets, and dense
//! feature matrices for entities and relations (one-hot identity by
//! default). Training operates on a [`Split`]: a subset of the full
//! labeled set sampled uniformly without replacement.
//!
//! All sampling here is pure given an explicit seed, and every type is
//! immutable after construction.

use crate::error::{Error, Result};
use crate::matrix::{is_identity, Mat};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

/// An (head, relation, tail) index triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triplet {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

impl Triplet {
    pub fn new(head: usize, relation: usize, tail: usize) -> Self {
        Triplet {
            head,
            relation,
            tail,
        }
    }
}

/// A triplet with its ground-truth label (`true` = positive).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledTriplet {
    pub triplet: Triplet,
    pub label: bool,
}

/// Supported triplet file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TripletFormat {
    /// UTF-8, tab-separated `head\trelation\ttail[\tlabel]`.
    Tsv,
}

/// Feature matrix file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureFormat {
    /// Header `id,f0,f1,...`, one row per entity/relation id.
    Csv,
    /// 16-byte header (rows: u64 LE, cols: u64 LE), then row-major
    /// little-endian f64 payload in vocabulary order.
    Binary,
}

impl FeatureFormat {
    /// Pick a format from a file extension: `.csv` is CSV, anything
    /// else is the raw binary layout.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => FeatureFormat::Csv,
            _ => FeatureFormat::Binary,
        }
    }
}

/// A fully observed knowledge graph with labeled triplets and dense
/// entity/relation feature matrices.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entities: Vec<String>,
    relations: Vec<String>,
    positives: Vec<Triplet>,
    negatives: Vec<Triplet>,
    positive_set: HashSet<Triplet>,
    negative_set: HashSet<Triplet>,
    ent_features: Mat,
    rel_features: Mat,
}

impl KnowledgeGraph {
    /// Build a graph and validate every invariant: disjoint labeled
    /// sets, in-range indices, and feature row counts matching the
    /// vocabulary sizes. One-hot identity features are installed when
    /// `None` is passed.
    pub fn new(
        entities: Vec<String>,
        relations: Vec<String>,
        positives: Vec<Triplet>,
        negatives: Vec<Triplet>,
        ent_features: Option<Mat>,
        rel_features: Option<Mat>,
    ) -> Result<Self> {
        let nv = entities.len();
        let nr = relations.len();
        for t in positives.iter().chain(negatives.iter()) {
            if t.head >= nv || t.tail >= nv || t.relation >= nr {
                return Err(Error::Validation(format!(
                    "triplet ({},{},{}) out of range for |V|={nv}, |R|={nr}",
                    t.head, t.relation, t.tail
                )));
            }
        }
        let positive_set: HashSet<Triplet> = positives.iter().copied().collect();
        let negative_set: HashSet<Triplet> = negatives.iter().copied().collect();
        if let Some(t) = positive_set.intersection(&negative_set).next() {
            return Err(Error::Validation(format!(
                "triplet ({},{},{}) is labeled both positive and negative",
                t.head, t.relation, t.tail
            )));
        }
        // dedupe while preserving first-appearance order
        let positives = dedupe(positives);
        let negatives = dedupe(negatives);

        let ent_features = match ent_features {
            Some(m) => m,
            None => Array2::eye(nv),
        };
        let rel_features = match rel_features {
            Some(m) => m,
            None => Array2::eye(nr),
        };
        if ent_features.nrows() != nv {
            return Err(Error::Validation(format!(
                "entity feature rows {} != |V| {nv}",
                ent_features.nrows()
            )));
        }
        if rel_features.nrows() != nr {
            return Err(Error::Validation(format!(
                "relation feature rows {} != |R| {nr}",
                rel_features.nrows()
            )));
        }
        Ok(KnowledgeGraph {
            entities,
            relations,
            positives,
            negatives,
            positive_set,
            negative_set,
            ent_features,
            rel_features,
        })
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    /// Total labeled triplet count `n = |E|`.
    pub fn n_triplets(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn positives(&self) -> &[Triplet] {
        &self.positives
    }

    pub fn negatives(&self) -> &[Triplet] {
        &self.negatives
    }

    pub fn is_positive(&self, t: &Triplet) -> bool {
        self.positive_set.contains(t)
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entities
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relations
    }

    pub fn ent_features(&self) -> &Mat {
        &self.ent_features
    }

    pub fn rel_features(&self) -> &Mat {
        &self.rel_features
    }

    /// The full labeled set in canonical order: positives first, then
    /// negatives, each in first-appearance order.
    pub fn all_triplets(&self) -> Vec<LabeledTriplet> {
        self.positives
            .iter()
            .map(|&t| LabeledTriplet {
                triplet: t,
                label: true,
            })
            .chain(self.negatives.iter().map(|&t| LabeledTriplet {
                triplet: t,
                label: false,
            }))
            .collect()
    }

    /// Replace the feature matrices, revalidating row counts.
    pub fn with_features(self, ent: Mat, rel: Mat) -> Result<Self> {
        KnowledgeGraph::new(
            self.entities,
            self.relations,
            self.positives,
            self.negatives,
            Some(ent),
            Some(rel),
        )
    }

    /// Extend the negative set (e.g. with [`generate_negatives`] output).
    pub fn with_negatives(mut self, extra: Vec<Triplet>) -> Result<Self> {
        self.negatives.extend(extra);
        KnowledgeGraph::new(
            self.entities,
            self.relations,
            self.positives,
            self.negatives,
            Some(self.ent_features),
            Some(self.rel_features),
        )
    }

    /// SHA-256 over the canonical serialization of vocabulary,
    /// triplets, and features; used as dataset provenance in weight
    /// archives.
    pub fn dataset_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        let mut header = String::new();
        let _ = write!(
            header,
            "kg:{}:{}:{}:{}",
            self.entities.len(),
            self.relations.len(),
            self.positives.len(),
            self.negatives.len()
        );
        h.update(header.as_bytes());
        for name in self.entities.iter().chain(self.relations.iter()) {
            h.update(name.as_bytes());
            h.update([0u8]);
        }
        for t in self.positives.iter().chain(self.negatives.iter()) {
            h.update((t.head as u64).to_le_bytes());
            h.update((t.relation as u64).to_le_bytes());
            h.update((t.tail as u64).to_le_bytes());
        }
        for m in [&self.ent_features, &self.rel_features] {
            h.update((m.nrows() as u64).to_le_bytes());
            h.update((m.ncols() as u64).to_le_bytes());
            for v in m.iter() {
                h.update(v.to_le_bytes());
            }
        }
        h.finalize().into()
    }
}

fn dedupe(triplets: Vec<Triplet>) -> Vec<Triplet> {
    let mut seen = HashSet::with_capacity(triplets.len());
    triplets.into_iter().filter(|t| seen.insert(*t)).collect()
}

/// Load a labeled triplet file. Vocabularies are built in
/// first-appearance order; unlabeled lines default to positive.
pub fn load_triplets(path: impl AsRef<Path>, format: TripletFormat) -> Result<KnowledgeGraph> {
    let TripletFormat::Tsv = format;
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    parse_tsv(reader, &path.display().to_string())
}

fn parse_tsv(reader: impl BufRead, path: &str) -> Result<KnowledgeGraph> {
    let mut entities: Vec<String> = Vec::new();
    let mut relations: Vec<String> = Vec::new();
    let mut ent_index: HashMap<String, usize> = HashMap::new();
    let mut rel_index: HashMap<String, usize> = HashMap::new();
    let mut positives = Vec::new();
    let mut negatives = Vec::new();

    let intern = |table: &mut Vec<String>, index: &mut HashMap<String, usize>, name: &str| {
        if let Some(&i) = index.get(name) {
            i
        } else {
            let i = table.len();
            table.push(name.to_string());
            index.insert(name.to_string(), i);
            i
        }
    };

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(path.to_string(), e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 && fields.len() != 4 {
            return Err(Error::Parse {
                path: path.to_string(),
                line: lineno,
                msg: format!("expected 3 or 4 tab-separated fields, found {}", fields.len()),
            });
        }
        if fields[..3].iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                path: path.to_string(),
                line: lineno,
                msg: "empty head/relation/tail field".to_string(),
            });
        }
        let h = intern(&mut entities, &mut ent_index, fields[0]);
        let r = intern(&mut relations, &mut rel_index, fields[1]);
        let t = intern(&mut entities, &mut ent_index, fields[2]);
        let label = match fields.get(3) {
            None => true,
            Some(&"1") => true,
            Some(&"0") => false,
            Some(other) => {
                return Err(Error::Validation(format!(
                    "{path}:{lineno}: label must be 0 or 1, found {other:?}"
                )))
            }
        };
        let triplet = Triplet::new(h, r, t);
        if label {
            positives.push(triplet);
        } else {
            negatives.push(triplet);
        }
    }
    KnowledgeGraph::new(entities, relations, positives, negatives, None, None)
}

/// Write the labeled triplet set as TSV with an explicit label column.
pub fn save_triplets(graph: &KnowledgeGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for lt in graph.all_triplets() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            graph.entity_names()[lt.triplet.head],
            graph.relation_names()[lt.triplet.relation],
            graph.entity_names()[lt.triplet.tail],
            u8::from(lt.label),
        );
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// One-hot identity features: `|V| x |V|` and `|R| x |R|` identity
/// matrices (spectral norm exactly 1).
pub fn one_hot_features(n_entities: usize, n_relations: usize) -> Result<(Mat, Mat)> {
    if n_entities == 0 || n_relations == 0 {
        return Err(Error::Argument(
            "one_hot_features: entity and relation counts must be positive".into(),
        ));
    }
    Ok((Array2::eye(n_entities), Array2::eye(n_relations)))
}

/// Load a dense feature matrix. CSV rows are matched to the given
/// vocabulary by id; the binary layout is assumed to follow vocabulary
/// order.
pub fn load_feature_matrix(
    path: impl AsRef<Path>,
    format: FeatureFormat,
    vocabulary: &[String],
) -> Result<Mat> {
    let path = path.as_ref();
    let display = path.display().to_string();
    match format {
        FeatureFormat::Csv => {
            let file = std::fs::File::open(path).map_err(|e| Error::io(&display, e))?;
            let reader = BufReader::new(file);
            let mut lines = reader.lines().enumerate();
            let header = match lines.next() {
                Some((_, line)) => line.map_err(|e| Error::io(&display, e))?,
                None => {
                    return Err(Error::Parse {
                        path: display,
                        line: 1,
                        msg: "missing header".into(),
                    })
                }
            };
            let cols = header.split(',').count();
            if cols < 2 || !header.starts_with("id,") {
                return Err(Error::Parse {
                    path: display,
                    line: 1,
                    msg: "header must be id,f0,f1,...".into(),
                });
            }
            let dim = cols - 1;
            let index: HashMap<&str, usize> = vocabulary
                .iter()
                .enumerate()
                .map(|(i, s)| (s.as_str(), i))
                .collect();
            let mut matrix = Array2::zeros((vocabulary.len(), dim));
            let mut seen = vec![false; vocabulary.len()];
            for (lineno, line) in lines {
                let lineno = lineno + 1;
                let line = line.map_err(|e| Error::io(&display, e))?;
                if line.is_empty() {
                    continue;
                }
                let mut fields = line.split(',');
                let id = fields.next().unwrap_or("");
                let row = *index.get(id).ok_or_else(|| Error::Parse {
                    path: display.clone(),
                    line: lineno,
                    msg: format!("unknown id {id:?}"),
                })?;
                let values: Vec<f64> = fields
                    .map(|f| {
                        f.parse::<f64>().map_err(|_| Error::Parse {
                            path: display.clone(),
                            line: lineno,
                            msg: format!("bad float {f:?}"),
                        })
                    })
                    .collect::<Result<_>>()?;
                if values.len() != dim {
                    return Err(Error::Parse {
                        path: display.clone(),
                        line: lineno,
                        msg: format!("expected {dim} values, found {}", values.len()),
                    });
                }
                matrix.row_mut(row).assign(&ndarray::ArrayView1::from(&values));
                seen[row] = true;
            }
            if let Some(missing) = seen.iter().position(|&s| !s) {
                return Err(Error::Validation(format!(
                    "feature file {display} has no row for id {:?}",
                    vocabulary[missing]
                )));
            }
            Ok(matrix)
        }
        FeatureFormat::Binary => {
            let mut file = std::fs::File::open(path).map_err(|e| Error::io(&display, e))?;
            let mut header = [0u8; 16];
            file.read_exact(&mut header)
                .map_err(|e| Error::io(&display, e))?;
            let rows = u64::from_le_bytes(header[0..8].try_into().unwrap()) as usize;
            let cols = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
            if rows != vocabulary.len() {
                return Err(Error::Validation(format!(
                    "feature file {display} has {rows} rows, vocabulary has {}",
                    vocabulary.len()
                )));
            }
            let mut payload = vec![0u8; rows * cols * 8];
            file.read_exact(&mut payload)
                .map_err(|e| Error::io(&display, e))?;
            let data: Vec<f64> = payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Array2::from_shape_vec((rows, cols), data)
                .map_err(|e| Error::Validation(format!("feature file {display}: {e}")))
        }
    }
}

/// Write a dense feature matrix in the raw binary layout.
pub fn save_feature_matrix_binary(matrix: &Mat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(&display, e))?;
    file.write_all(&(matrix.nrows() as u64).to_le_bytes())
        .and_then(|_| file.write_all(&(matrix.ncols() as u64).to_le_bytes()))
        .map_err(|e| Error::io(&display, e))?;
    for v in matrix.iter() {
        file.write_all(&v.to_le_bytes())
            .map_err(|e| Error::io(&display, e))?;
    }
    Ok(())
}

/// A train/full split of the labeled triplet set.
///
/// Train indices point into [`KnowledgeGraph::all_triplets`] order and
/// are stored sorted, so identical (graph, fraction, seed) inputs
/// serialize identically.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    train_indices: Vec<usize>,
    n: usize,
    pub seed: u64,
    pub fraction: f64,
}

impl Split {
    /// Training-set size `m`.
    pub fn m(&self) -> usize {
        self.train_indices.len()
    }

    /// Full-set size `n`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train_indices
    }

    /// Training triplets in canonical (sorted-index) order.
    pub fn train_triplets(&self, graph: &KnowledgeGraph) -> Vec<LabeledTriplet> {
        let all = graph.all_triplets();
        self.train_indices.iter().map(|&i| all[i]).collect()
    }

    /// Positive training triplets only (the message-passing edges).
    pub fn train_positives(&self, graph: &KnowledgeGraph) -> Vec<Triplet> {
        self.train_triplets(graph)
            .into_iter()
            .filter(|lt| lt.label)
            .map(|lt| lt.triplet)
            .collect()
    }
}

/// Sample `round(fraction * n)` training triplets uniformly without
/// replacement (round half to even). Reproducible from `seed`.
pub fn split_train(graph: &KnowledgeGraph, fraction: f64, seed: u64) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Argument(format!(
            "split fraction must be in (0,1), found {fraction}"
        )));
    }
    let n = graph.n_triplets();
    if n < 2 {
        return Err(Error::Argument(format!(
            "cannot split a graph with {n} triplets"
        )));
    }
    let m = (fraction * n as f64).round_ties_even() as usize;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut train_indices = sample_without_replacement(n, m, &mut rng);
    train_indices.sort_unstable();
    Ok(Split {
        train_indices,
        n,
        seed,
        fraction,
    })
}

/// Partial Fisher-Yates: the first `m` entries of a shuffled 0..n.
fn sample_without_replacement(n: usize, m: usize, rng: &mut ChaCha12Rng) -> Vec<usize> {
    assert!(m <= n);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..m {
        let j = rng.gen_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(m);
    pool
}

/// Corruption cap: attempts per positive before giving up.
const CORRUPTION_RETRY_FACTOR: usize = 100;

/// One corruption negative per positive triplet: replace the head or
/// the tail (fair coin) with a uniformly random entity, resampling
/// while the candidate is a known positive or already produced. Labels
/// are 0; the output is disjoint from the positive set and from any
/// pre-existing negatives.
pub fn generate_negatives(graph: &KnowledgeGraph, seed: u64) -> Result<Vec<Triplet>> {
    let nv = graph.n_entities();
    if graph.positives().is_empty() || nv < 2 {
        return Err(Error::Argument(
            "negative generation needs at least one positive triplet and two entities".into(),
        ));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let cap = CORRUPTION_RETRY_FACTOR * nv;
    let mut produced: HashSet<Triplet> = HashSet::with_capacity(graph.positives().len());
    let mut out = Vec::with_capacity(graph.positives().len());
    for &pos in graph.positives() {
        let mut accepted = None;
        for _ in 0..cap {
            let corrupt_head = rng.gen_bool(0.5);
            let entity = rng.gen_range(0..nv);
            let candidate = if corrupt_head {
                Triplet::new(entity, pos.relation, pos.tail)
            } else {
                Triplet::new(pos.head, pos.relation, entity)
            };
            if graph.is_positive(&candidate)
                || graph.negative_set.contains(&candidate)
                || produced.contains(&candidate)
            {
                continue;
            }
            accepted = Some(candidate);
            break;
        }
        match accepted {
            Some(c) => {
                produced.insert(c);
                out.push(c);
            }
            None => {
                return Err(Error::Validation(format!(
                    "could not corrupt triplet ({},{},{}) within {cap} attempts",
                    pos.head, pos.relation, pos.tail
                )))
            }
        }
    }
    Ok(out)
}

/// Sample a neighborhood subgraph: `seed_count` uniformly chosen seed
/// entities, expanded for `hops` hops with up to `per_hop` sampled
/// neighbors per frontier entity per hop (over positive edges, both
/// directions), keeping every triplet among the sampled entities.
/// Vocabularies are re-indexed densely in original order.
pub fn sample_subgraph(
    graph: &KnowledgeGraph,
    seed_count: usize,
    hops: usize,
    per_hop: usize,
    seed: u64,
) -> Result<KnowledgeGraph> {
    let nv = graph.n_entities();
    if seed_count > nv {
        return Err(Error::Argument(format!(
            "seed_count {seed_count} exceeds |V| = {nv}"
        )));
    }
    let mut neighbors: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nv];
    for t in graph.positives() {
        neighbors[t.head].insert(t.tail);
        neighbors[t.tail].insert(t.head);
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let seeds = sample_without_replacement(nv, seed_count, &mut rng);
    let mut kept: BTreeSet<usize> = seeds.iter().copied().collect();
    let mut frontier: Vec<usize> = kept.iter().copied().collect();

    for _ in 0..hops {
        let mut added: BTreeSet<usize> = BTreeSet::new();
        for &v in &frontier {
            let candidates: Vec<usize> = neighbors[v]
                .iter()
                .copied()
                .filter(|u| !kept.contains(u) && !added.contains(u))
                .collect();
            let take = per_hop.min(candidates.len());
            let picked = sample_without_replacement(candidates.len(), take, &mut rng);
            for idx in picked {
                added.insert(candidates[idx]);
            }
        }
        kept.extend(added.iter().copied());
        frontier = added.into_iter().collect();
    }

    induced_subgraph(graph, &kept)
}

/// Restrict a graph to an entity subset, re-indexing densely.
fn induced_subgraph(graph: &KnowledgeGraph, kept: &BTreeSet<usize>) -> Result<KnowledgeGraph> {
    let ent_map: HashMap<usize, usize> = kept.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let keep =
        |t: &Triplet| -> bool { ent_map.contains_key(&t.head) && ent_map.contains_key(&t.tail) };

    let mut rel_map: HashMap<usize, usize> = HashMap::new();
    let mut relations: Vec<String> = Vec::new();
    let mut map_triplet = |t: &Triplet, rel_map: &mut HashMap<usize, usize>| {
        let r = *rel_map.entry(t.relation).or_insert_with(|| {
            relations.push(graph.relation_names()[t.relation].clone());
            relations.len() - 1
        });
        Triplet::new(ent_map[&t.head], r, ent_map[&t.tail])
    };
    let positives: Vec<Triplet> = graph
        .positives()
        .iter()
        .filter(|t| keep(t))
        .map(|t| map_triplet(t, &mut rel_map))
        .collect();
    let negatives: Vec<Triplet> = graph
        .negatives()
        .iter()
        .filter(|t| keep(t))
        .map(|t| map_triplet(t, &mut rel_map))
        .collect();
    let entities: Vec<String> = kept
        .iter()
        .map(|&v| graph.entity_names()[v].clone())
        .collect();

    // One-hot features are regenerated at the new sizes; explicit
    // features keep their columns and drop unselected rows.
    let ent_features = if is_identity(graph.ent_features()) {
        None
    } else {
        let mut m = Array2::zeros((entities.len(), graph.ent_features().ncols()));
        for (new, &old) in kept.iter().enumerate() {
            m.row_mut(new).assign(&graph.ent_features().row(old));
        }
        Some(m)
    };
    let rel_features = if is_identity(graph.rel_features()) {
        None
    } else {
        let mut kept_rels: Vec<(usize, usize)> = rel_map.iter().map(|(&o, &n)| (n, o)).collect();
        kept_rels.sort_unstable();
        let mut m = Array2::zeros((relations.len(), graph.rel_features().ncols()));
        for (new, old) in kept_rels {
            m.row_mut(new).assign(&graph.rel_features().row(old));
        }
        Some(m)
    };

    KnowledgeGraph::new(
        entities,
        relations,
        positives,
        negatives,
        ent_features,
        rel_features,
    )
}
