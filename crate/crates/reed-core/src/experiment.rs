//! Sweep orchestration: seeded grids over decoder, aggregator, weight
//! norm, depth, and width, with crash-resumable CSV output and trend
//! verdicts over seed means.
//!
//! Each grid point trains one model, evaluates the empirical margin
//! loss on the training split and the classification loss on the full
//! set (their difference is the generalization error), and evaluates
//! the certificate bound. Grid points run on a worker pool; rows are
//! appended to `results.csv` as they complete and the file is
//! rewritten in canonical order at the end, so reruns produce
//! identical files modulo the wall-time column.

use crate::bounds::{compute_bound_terms, generalization_bound};
use crate::decoder::DecoderKind;
use crate::diffusion::{Aggregator, DiffusionSet};
use crate::error::{Error, Result};
use crate::kg::{
    generate_negatives, load_feature_matrix, load_triplets, split_train, FeatureFormat,
    KnowledgeGraph, TripletFormat,
};
use crate::synth;
use crate::train::{evaluate_losses, train, TrainConfig};
use rayon::prelude::*;
use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

/// Sweep definition: grid lists plus base training hyperparameters.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Dataset path (TSV) or `synth:umls[:seed]` for the builtin
    /// generator.
    pub dataset: String,
    pub decoders: Vec<DecoderKind>,
    pub aggregators: Vec<Aggregator>,
    pub s_values: Vec<f64>,
    pub l_values: Vec<usize>,
    /// Hidden widths; empty means the base config's width.
    pub d_values: Vec<usize>,
    pub seeds: Vec<u64>,
    pub split_fraction: f64,
    pub delta: f64,
    /// Optional feature files (CSV or raw binary by extension).
    pub ent_features: Option<String>,
    pub rel_features: Option<String>,
    /// Seed for corruption negatives when the dataset has none.
    pub neg_seed: u64,
    /// Non-default: measure the expected loss on the holdout
    /// complement instead of the full set.
    pub gen_error_on_holdout: bool,
    pub base: TrainConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            dataset: "synth:umls".into(),
            decoders: vec![DecoderKind::Td, DecoderKind::Sm],
            aggregators: vec![Aggregator::Mean, Aggregator::Sum],
            s_values: vec![10.0, 15.0, 20.0],
            l_values: vec![1, 2, 3],
            d_values: vec![],
            seeds: (0..10).map(|i| i * 10).collect(),
            split_fraction: 0.8,
            delta: 0.05,
            ent_features: None,
            rel_features: None,
            neg_seed: 0,
            gen_error_on_holdout: false,
            base: TrainConfig::default(),
        }
    }
}

impl SweepConfig {
    /// Parse a flat `key = value` sweep file; list values are
    /// comma-separated. Keys not recognized here fall through to the
    /// base training config.
    pub fn from_key_values(body: &str) -> Result<Self> {
        let mut cfg = SweepConfig::default();
        for (lineno, raw) in body.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: "<sweep>".into(),
                line: lineno + 1,
                msg: format!("expected key = value, found {line:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let parse_err = |msg: String| Error::Parse {
                path: "<sweep>".into(),
                line: lineno + 1,
                msg,
            };
            let split_list = |v: &str| -> Vec<String> {
                v.split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            };
            match key {
                "dataset" => cfg.dataset = value.to_string(),
                "decoders" => {
                    cfg.decoders = split_list(value)
                        .iter()
                        .map(|s| s.parse())
                        .collect::<Result<_>>()
                        .map_err(|e| parse_err(e.to_string()))?
                }
                "aggregators" => {
                    cfg.aggregators = split_list(value)
                        .iter()
                        .map(|s| s.parse())
                        .collect::<Result<_>>()
                        .map_err(|e| parse_err(e.to_string()))?
                }
                "s_values" => {
                    cfg.s_values = split_list(value)
                        .iter()
                        .map(|s| s.parse::<f64>().map_err(|e| parse_err(e.to_string())))
                        .collect::<std::result::Result<_, _>>()?
                }
                "l_values" => {
                    cfg.l_values = split_list(value)
                        .iter()
                        .map(|s| s.parse::<usize>().map_err(|e| parse_err(e.to_string())))
                        .collect::<std::result::Result<_, _>>()?
                }
                "d_values" => {
                    cfg.d_values = split_list(value)
                        .iter()
                        .map(|s| s.parse::<usize>().map_err(|e| parse_err(e.to_string())))
                        .collect::<std::result::Result<_, _>>()?
                }
                "seeds" => {
                    cfg.seeds = split_list(value)
                        .iter()
                        .map(|s| s.parse::<u64>().map_err(|e| parse_err(e.to_string())))
                        .collect::<std::result::Result<_, _>>()?
                }
                "split_fraction" => {
                    cfg.split_fraction =
                        value.parse().map_err(|_| parse_err("bad split_fraction".into()))?
                }
                "delta" => cfg.delta = value.parse().map_err(|_| parse_err("bad delta".into()))?,
                "ent_features" => cfg.ent_features = Some(value.to_string()),
                "rel_features" => cfg.rel_features = Some(value.to_string()),
                "neg_seed" => {
                    cfg.neg_seed = value.parse().map_err(|_| parse_err("bad neg_seed".into()))?
                }
                "gen_error_on_holdout" => {
                    cfg.gen_error_on_holdout = value
                        .parse()
                        .map_err(|_| parse_err("bad gen_error_on_holdout".into()))?
                }
                other => cfg
                    .base
                    .apply_key(other, value)
                    .map_err(|e| parse_err(e.to_string()))?,
            }
        }
        Ok(cfg)
    }

    /// Load or synthesize the dataset, install features, and add
    /// corruption negatives when the file carries none.
    pub fn load_dataset(&self) -> Result<KnowledgeGraph> {
        let mut graph = if let Some(rest) = self.dataset.strip_prefix("synth:") {
            let mut parts = rest.split(':');
            let name = parts.next().unwrap_or("");
            if name != "umls" {
                return Err(Error::Argument(format!(
                    "unknown synthetic dataset {name:?} (expected synth:umls[:seed])"
                )));
            }
            let seed = match parts.next() {
                Some(s) => s
                    .parse::<u64>()
                    .map_err(|_| Error::Argument(format!("bad synthetic seed {s:?}")))?,
                None => 0,
            };
            synth::generate(&synth::SynthConfig::default(), seed)?
        } else {
            load_triplets(&self.dataset, TripletFormat::Tsv)?
        };
        if graph.negatives().is_empty() && !graph.positives().is_empty() {
            let negatives = generate_negatives(&graph, self.neg_seed)?;
            graph = graph.with_negatives(negatives)?;
        }
        if let (Some(ent), Some(rel)) = (&self.ent_features, &self.rel_features) {
            let ent_path = PathBuf::from(ent);
            let rel_path = PathBuf::from(rel);
            let ent_m = load_feature_matrix(
                &ent_path,
                FeatureFormat::from_path(&ent_path),
                graph.entity_names(),
            )?;
            let rel_m = load_feature_matrix(
                &rel_path,
                FeatureFormat::from_path(&rel_path),
                graph.relation_names(),
            )?;
            graph = graph.with_features(ent_m, rel_m)?;
        } else if self.ent_features.is_some() != self.rel_features.is_some() {
            return Err(Error::Argument(
                "ent_features and rel_features must be supplied together".into(),
            ));
        }
        Ok(graph)
    }
}

/// One sweep row.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub dataset: String,
    pub decoder: DecoderKind,
    pub aggregator: Aggregator,
    pub s_target: f64,
    pub layers: usize,
    pub d: usize,
    pub seed: u64,
    pub empirical_margin_loss: f64,
    pub expected_loss: f64,
    pub gen_error: f64,
    pub bound_value: f64,
    pub wall_time_s: f64,
    /// "ok" or an error description (commas stripped).
    pub status: String,
}

impl ResultRow {
    fn key(&self) -> RowKey {
        (
            self.decoder,
            self.aggregator,
            self.s_target.to_bits(),
            self.layers,
            self.d,
            self.seed,
        )
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

type RowKey = (DecoderKind, Aggregator, u64, usize, usize, u64);

pub const CSV_HEADER: &str = "dataset,decoder,aggregator,s_target,layers,d,seed,empirical_margin_loss,expected_loss,gen_error,bound_value,wall_time_s,status";

fn row_to_csv(r: &ResultRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.dataset,
        r.decoder,
        r.aggregator,
        r.s_target,
        r.layers,
        r.d,
        r.seed,
        r.empirical_margin_loss,
        r.expected_loss,
        r.gen_error,
        r.bound_value,
        r.wall_time_s,
        r.status
    )
}

fn row_from_csv(line: &str, lineno: usize, path: &str) -> Result<ResultRow> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 13 {
        return Err(Error::Parse {
            path: path.to_string(),
            line: lineno,
            msg: format!("expected 13 fields, found {}", fields.len()),
        });
    }
    let parse_f = |s: &str, what: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|_| Error::Parse {
            path: path.to_string(),
            line: lineno,
            msg: format!("bad {what} {s:?}"),
        })
    };
    let parse_u = |s: &str, what: &str| -> Result<usize> {
        s.parse::<usize>().map_err(|_| Error::Parse {
            path: path.to_string(),
            line: lineno,
            msg: format!("bad {what} {s:?}"),
        })
    };
    Ok(ResultRow {
        dataset: fields[0].to_string(),
        decoder: fields[1].parse()?,
        aggregator: fields[2].parse()?,
        s_target: parse_f(fields[3], "s_target")?,
        layers: parse_u(fields[4], "layers")?,
        d: parse_u(fields[5], "d")?,
        seed: fields[6].parse::<u64>().map_err(|_| Error::Parse {
            path: path.to_string(),
            line: lineno,
            msg: format!("bad seed {:?}", fields[6]),
        })?,
        empirical_margin_loss: parse_f(fields[7], "empirical_margin_loss")?,
        expected_loss: parse_f(fields[8], "expected_loss")?,
        gen_error: parse_f(fields[9], "gen_error")?,
        bound_value: parse_f(fields[10], "bound_value")?,
        wall_time_s: parse_f(fields[11], "wall_time_s")?,
        status: fields[12].to_string(),
    })
}

/// Parse a results CSV.
pub fn parse_results_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let body = std::fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
    let mut rows = Vec::new();
    for (lineno, line) in body.lines().enumerate() {
        if lineno == 0 {
            if line != CSV_HEADER {
                return Err(Error::Parse {
                    path: display,
                    line: 1,
                    msg: "unexpected results header".into(),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        rows.push(row_from_csv(line, lineno + 1, &display)?);
    }
    Ok(rows)
}

fn canonical_sort(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        (
            &a.dataset,
            format!("{}", a.decoder),
            format!("{}", a.aggregator),
            a.s_target.to_bits(),
            a.layers,
            a.d,
            a.seed,
        )
            .cmp(&(
                &b.dataset,
                format!("{}", b.decoder),
                format!("{}", b.aggregator),
                b.s_target.to_bits(),
                b.layers,
                b.d,
                b.seed,
            ))
    });
}

/// One grid point of the sweep.
#[derive(Debug, Clone, Copy)]
struct GridPoint {
    decoder: DecoderKind,
    aggregator: Aggregator,
    s_target: f64,
    layers: usize,
    d: usize,
    seed: u64,
}

fn run_point(
    config: &SweepConfig,
    graph: &KnowledgeGraph,
    point: &GridPoint,
) -> Result<ResultRow> {
    let start = Instant::now();
    let split = split_train(graph, config.split_fraction, point.seed)?;
    let cfg = TrainConfig {
        layers: point.layers,
        hidden_dim: point.d,
        rel_hidden_dim: point.d,
        decoder: point.decoder,
        aggregator: point.aggregator,
        s_target: point.s_target,
        seed: point.seed,
        ..config.base.clone()
    };
    let trained = train(graph, &split, &cfg)?;
    let diffusion = DiffusionSet::for_split(graph, &split, cfg.aggregator);
    let losses = evaluate_losses(&trained, graph, &split, &diffusion)?;
    let expected = if config.gen_error_on_holdout {
        losses.holdout_cls
    } else {
        losses.expected_cls
    };
    let terms = compute_bound_terms(&trained, graph, &split, cfg.gamma, config.delta)?;
    let bound = generalization_bound(&terms)?;
    Ok(ResultRow {
        dataset: config.dataset.clone(),
        decoder: point.decoder,
        aggregator: point.aggregator,
        s_target: point.s_target,
        layers: point.layers,
        d: point.d,
        seed: point.seed,
        empirical_margin_loss: losses.empirical_margin,
        expected_loss: expected,
        gen_error: expected - losses.empirical_margin,
        bound_value: bound.raw,
        wall_time_s: start.elapsed().as_secs_f64(),
        status: "ok".into(),
    })
}

/// Run a sweep. Completed rows present in `out_dir/results.csv` are
/// skipped when `resume` is set; failed grid points produce error
/// rows and the sweep continues. The final file is rewritten in
/// canonical order.
pub fn run_experiment(
    config: &SweepConfig,
    out_dir: impl AsRef<Path>,
    resume: bool,
) -> Result<Vec<ResultRow>> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let csv_path = out_dir.join("results.csv");

    let mut done: Vec<ResultRow> = Vec::new();
    if resume && csv_path.exists() {
        done = parse_results_csv(&csv_path)?
            .into_iter()
            .filter(|r| r.is_ok())
            .collect();
    }
    let done_keys: HashSet<RowKey> = done.iter().map(|r| r.key()).collect();

    let graph = config.load_dataset()?;
    let d_list = if config.d_values.is_empty() {
        vec![config.base.hidden_dim]
    } else {
        config.d_values.clone()
    };
    let mut grid = Vec::new();
    for &decoder in &config.decoders {
        for &aggregator in &config.aggregators {
            for &s_target in &config.s_values {
                for &layers in &config.l_values {
                    for &d in &d_list {
                        for &seed in &config.seeds {
                            let p = GridPoint {
                                decoder,
                                aggregator,
                                s_target,
                                layers,
                                d,
                                seed,
                            };
                            let key =
                                (decoder, aggregator, s_target.to_bits(), layers, d, seed);
                            if !done_keys.contains(&key) {
                                grid.push(p);
                            }
                        }
                    }
                }
            }
        }
    }

    // start fresh unless resuming over completed rows
    let io_err = |e: std::io::Error| Error::io(csv_path.display().to_string(), e);
    if done.is_empty() {
        std::fs::write(&csv_path, format!("{CSV_HEADER}\n")).map_err(io_err)?;
    }
    let file = std::fs::OpenOptions::new()
        .append(true)
        .open(&csv_path)
        .map_err(io_err)?;
    let sink = Mutex::new(std::io::BufWriter::new(file));

    let fresh_rows: Vec<ResultRow> = grid
        .par_iter()
        .map(|point| {
            let row = match run_point(config, &graph, point) {
                Ok(row) => row,
                Err(e) => ResultRow {
                    dataset: config.dataset.clone(),
                    decoder: point.decoder,
                    aggregator: point.aggregator,
                    s_target: point.s_target,
                    layers: point.layers,
                    d: point.d,
                    seed: point.seed,
                    empirical_margin_loss: f64::NAN,
                    expected_loss: f64::NAN,
                    gen_error: f64::NAN,
                    bound_value: f64::NAN,
                    wall_time_s: 0.0,
                    status: format!("error: {}", e.to_string().replace(',', ";")),
                },
            };
            let mut w = sink.lock().expect("csv sink");
            let _ = writeln!(w, "{}", row_to_csv(&row));
            let _ = w.flush();
            row
        })
        .collect();

    let mut all = done;
    all.extend(fresh_rows);
    canonical_sort(&mut all);
    emit_outputs(&all, out_dir)?;
    Ok(all)
}

/// Trend verdicts over seed means.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    InsufficientData,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Pass => write!(f, "pass"),
            Verdict::Fail => write!(f, "fail"),
            Verdict::InsufficientData => write!(f, "insufficient data"),
        }
    }
}

/// Seed-mean/std statistics and directional verdicts.
#[derive(Debug, Clone)]
pub struct TrendReport {
    /// Mean aggregator strictly below sum in every (decoder, s, L, d)
    /// cell.
    pub aggregator_verdict: Verdict,
    /// Generalization error weakly nondecreasing in s.
    pub s_verdict: Verdict,
    /// Weakly nondecreasing in L.
    pub l_verdict: Verdict,
    /// Weakly nondecreasing in d.
    pub d_verdict: Verdict,
    /// Rows where the certificate bound fails to dominate the
    /// measured generalization error (must stay empty).
    pub bound_violations: usize,
    pub lines: Vec<String>,
}

impl TrendReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "aggregator trend (mean < sum per cell): {}", self.aggregator_verdict);
        let _ = writeln!(out, "s trend (nondecreasing): {}", self.s_verdict);
        let _ = writeln!(out, "L trend (nondecreasing): {}", self.l_verdict);
        let _ = writeln!(out, "d trend (nondecreasing): {}", self.d_verdict);
        let _ = writeln!(out, "bound violations: {}", self.bound_violations);
        for line in &self.lines {
            let _ = writeln!(out, "{line}");
        }
        out
    }
}

/// Population mean and standard deviation.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

type CellKey = (String, String, u64, usize, usize); // dataset, decoder, s bits, layers, d

fn seed_mean_by<F, K>(rows: &[ResultRow], key_of: F) -> Vec<(K, f64, f64, usize)>
where
    F: Fn(&ResultRow) -> K,
    K: Ord + Clone,
{
    let mut grouped: std::collections::BTreeMap<K, Vec<f64>> = std::collections::BTreeMap::new();
    for r in rows.iter().filter(|r| r.is_ok()) {
        grouped.entry(key_of(r)).or_default().push(r.gen_error);
    }
    grouped
        .into_iter()
        .map(|(k, v)| {
            let (m, s) = mean_std(&v);
            (k, m, s, v.len())
        })
        .collect()
}

/// Compute trend verdicts from sweep rows.
pub fn trend_report(rows: &[ResultRow]) -> TrendReport {
    let ok_rows: Vec<&ResultRow> = rows.iter().filter(|r| r.is_ok()).collect();
    let mut lines = Vec::new();

    // (a) aggregator comparison per (dataset, decoder, s, L, d) cell
    let cell_means = seed_mean_by(rows, |r| -> (CellKey, String) {
        (
            (
                r.dataset.clone(),
                format!("{}", r.decoder),
                r.s_target.to_bits(),
                r.layers,
                r.d,
            ),
            format!("{}", r.aggregator),
        )
    });
    let mut cells: std::collections::BTreeMap<CellKey, Vec<(String, f64, usize)>> =
        std::collections::BTreeMap::new();
    for ((cell, agg), mean, _std, count) in cell_means {
        cells.entry(cell).or_default().push((agg, mean, count));
    }
    let mut aggregator_verdict = Verdict::Pass;
    let mut compared = 0;
    for (cell, entries) in &cells {
        let mean_of = |name: &str| entries.iter().find(|(a, _, _)| a == name);
        if let (Some((_, m_mean, c1)), Some((_, m_sum, c2))) = (mean_of("mean"), mean_of("sum")) {
            if *c1 < 2 || *c2 < 2 {
                if aggregator_verdict == Verdict::Pass {
                    aggregator_verdict = Verdict::InsufficientData;
                }
                continue;
            }
            compared += 1;
            lines.push(format!(
                "cell decoder={} s={} L={} d={}: mean-agg {m_mean:.4} vs sum-agg {m_sum:.4}",
                cell.1,
                f64::from_bits(cell.2),
                cell.3,
                cell.4
            ));
            if m_mean >= m_sum {
                aggregator_verdict = Verdict::Fail;
            }
        }
    }
    if compared == 0 {
        aggregator_verdict = Verdict::InsufficientData;
    }

    // monotonicity in one coordinate with everything else controlled
    let monotone = |axis: &str| -> Verdict {
        type Rest = (String, String, String, u64, usize, usize);
        let mut grouped: std::collections::BTreeMap<Rest, Vec<(u64, f64, usize)>> =
            std::collections::BTreeMap::new();
        for r in &ok_rows {
            let (coord_bits, rest): (u64, Rest) = match axis {
                "s" => (
                    r.s_target.to_bits(),
                    (
                        r.dataset.clone(),
                        format!("{}", r.decoder),
                        format!("{}", r.aggregator),
                        0,
                        r.layers,
                        r.d,
                    ),
                ),
                "l" => (
                    r.layers as u64,
                    (
                        r.dataset.clone(),
                        format!("{}", r.decoder),
                        format!("{}", r.aggregator),
                        r.s_target.to_bits(),
                        0,
                        r.d,
                    ),
                ),
                _ => (
                    r.d as u64,
                    (
                        r.dataset.clone(),
                        format!("{}", r.decoder),
                        format!("{}", r.aggregator),
                        r.s_target.to_bits(),
                        r.layers,
                        0,
                    ),
                ),
            };
            grouped.entry(rest).or_default().push((coord_bits, r.gen_error, 1));
        }
        let mut any = false;
        let mut pass = true;
        for (_, entries) in grouped {
            // average per coordinate over seeds
            let mut per_coord: std::collections::BTreeMap<u64, Vec<f64>> =
                std::collections::BTreeMap::new();
            for (c, g, _) in entries {
                per_coord.entry(c).or_default().push(g);
            }
            if per_coord.len() < 2 || per_coord.values().any(|v| v.len() < 2) {
                continue;
            }
            let mut coords: Vec<(f64, f64)> = per_coord
                .into_iter()
                .map(|(c, v)| {
                    let coord = match axis {
                        "s" => f64::from_bits(c),
                        _ => c as f64,
                    };
                    (coord, mean_std(&v).0)
                })
                .collect();
            coords.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite coords"));
            any = true;
            for w in coords.windows(2) {
                if w[1].1 < w[0].1 {
                    pass = false;
                }
            }
        }
        if !any {
            Verdict::InsufficientData
        } else if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    };

    let bound_violations = ok_rows
        .iter()
        .filter(|r| r.bound_value < r.gen_error)
        .count();

    TrendReport {
        aggregator_verdict,
        s_verdict: monotone("s"),
        l_verdict: monotone("l"),
        d_verdict: monotone("d"),
        bound_violations,
        lines,
    }
}

/// Write `results.csv` (canonical order), `trends.txt`, and per-axis
/// plot-data files (x, mean, std). Returns the written paths.
pub fn emit_outputs(rows: &[ResultRow], out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let mut written = Vec::new();

    let mut sorted: Vec<ResultRow> = rows.to_vec();
    canonical_sort(&mut sorted);
    let csv_path = out_dir.join("results.csv");
    {
        let mut body = String::from(CSV_HEADER);
        body.push('\n');
        for r in &sorted {
            body.push_str(&row_to_csv(r));
            body.push('\n');
        }
        std::fs::write(&csv_path, body)
            .map_err(|e| Error::io(csv_path.display().to_string(), e))?;
        written.push(csv_path);
    }

    let report = trend_report(&sorted);
    let trends_path = out_dir.join("trends.txt");
    let mut trend_text = report.to_text();
    if report.bound_violations > 0 {
        let warning = format!(
            "WARNING: {} rows violate bound >= generalization error\n",
            report.bound_violations
        );
        trend_text.push_str(&warning);
        eprint!("{warning}");
    }
    std::fs::write(&trends_path, trend_text)
        .map_err(|e| Error::io(trends_path.display().to_string(), e))?;
    written.push(trends_path);

    // plot data: per (decoder, aggregator), one file per swept axis
    for axis in ["s", "l", "d"] {
        let mut grouped: std::collections::BTreeMap<(String, String, String), std::collections::BTreeMap<u64, Vec<f64>>> =
            std::collections::BTreeMap::new();
        for r in sorted.iter().filter(|r| r.is_ok()) {
            let coord = match axis {
                "s" => r.s_target.to_bits(),
                "l" => r.layers as u64,
                _ => r.d as u64,
            };
            grouped
                .entry((r.dataset.clone(), format!("{}", r.decoder), format!("{}", r.aggregator)))
                .or_default()
                .entry(coord)
                .or_default()
                .push(r.gen_error);
        }
        for ((_dataset, dec, agg), coords) in grouped {
            if coords.len() < 2 {
                continue;
            }
            let path = out_dir.join(format!("plot_{axis}_{dec}_{agg}.csv"));
            let mut body = String::from("x,mean,std\n");
            for (bits, values) in coords {
                let x = match axis {
                    "s" => f64::from_bits(bits),
                    _ => bits as f64,
                };
                let (m, s) = mean_std(&values);
                let _ = writeln!(body, "{x},{m},{s}");
            }
            std::fs::write(&path, body)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            written.push(path);
        }
    }
    Ok(written)
}
