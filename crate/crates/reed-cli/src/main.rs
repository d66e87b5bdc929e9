//! Command-line interface for the knowledge-graph representation
//! learning engine: dataset utilities, training, bound certificates,
//! zoo equivalence checks, and experiment sweeps.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use reed_core::archive::{load_model, save_model};
use reed_core::bounds::{
    compute_bound_terms, simplified_complexity, sigma_prior, generalization_bound, verify_norm_propagation,
    verify_perturbation_condition,
};
use reed_core::diffusion::DiffusionSet;
use reed_core::experiment::{parse_results_csv, run_experiment, trend_report, SweepConfig};
use reed_core::kg::{
    load_feature_matrix, load_triplets, sample_subgraph, save_feature_matrix_binary,
    save_triplets, split_train, FeatureFormat, TripletFormat,
};
use reed_core::synth;
use reed_core::train::{evaluate_losses, train, TrainConfig};
use reed_core::zoo::{verify_equivalence, ZooKind};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "reed",
    about = "Relation-aware encoder-decoder engine for knowledge graphs with generalization-bound certificates"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a neighborhood subgraph from a triplet file.
    SampleSubgraph {
        /// Number of uniformly chosen seed entities.
        #[arg(long)]
        seeds: usize,
        /// Expansion hops.
        #[arg(long)]
        hops: usize,
        /// Sampled neighbors per frontier entity per hop.
        #[arg(long = "per-hop")]
        per_hop: usize,
        /// RNG seed.
        #[arg(long)]
        seed: u64,
        /// Input triplet TSV.
        #[arg(long = "in")]
        input: PathBuf,
        /// Output triplet TSV.
        #[arg(long = "out")]
        output: PathBuf,
    },
    /// Embedding-model zoo utilities.
    Zoo {
        #[command(subcommand)]
        sub: ZooCmd,
    },
    /// Train a model from a flat key=value config.
    Train {
        /// Config file (TrainConfig keys plus split_fraction,
        /// split_seed, neg_seed).
        #[arg(long)]
        config: PathBuf,
        /// Triplet TSV, or synth:umls[:seed].
        #[arg(long)]
        data: String,
        /// Output weight archive.
        #[arg(long = "out")]
        output: PathBuf,
        /// Optional entity feature file (.csv or raw binary).
        #[arg(long = "ent-features")]
        ent_features: Option<PathBuf>,
        /// Optional relation feature file.
        #[arg(long = "rel-features")]
        rel_features: Option<PathBuf>,
    },
    /// Evaluate the generalization-bound certificate of a trained
    /// model.
    Bound {
        /// Weight archive.
        #[arg(long)]
        model: PathBuf,
        /// Triplet TSV, or synth:umls[:seed].
        #[arg(long)]
        data: String,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        delta: f64,
        /// Monte-Carlo trials for the perturbation checks.
        #[arg(long = "monte-carlo")]
        monte_carlo: Option<usize>,
        /// Split fraction used to reconstruct the training split.
        #[arg(long = "split-fraction", default_value_t = 0.8)]
        split_fraction: f64,
        /// Split seed; defaults to the seed stored in the archive.
        #[arg(long = "split-seed")]
        split_seed: Option<u64>,
        /// Negative-generation seed when the dataset has no negatives.
        #[arg(long = "neg-seed", default_value_t = 0)]
        neg_seed: u64,
        #[arg(long = "ent-features")]
        ent_features: Option<PathBuf>,
        #[arg(long = "rel-features")]
        rel_features: Option<PathBuf>,
    },
    /// Run a sweep from a flat key=value sweep config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "out")]
        out_dir: PathBuf,
        /// Skip grid points already present in results.csv.
        #[arg(long)]
        resume: bool,
    },
    /// Recompute trend verdicts from an experiment directory.
    Trends {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Generate a deterministic synthetic dataset TSV.
    GenData {
        #[arg(long = "out")]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 133)]
        entities: usize,
        #[arg(long, default_value_t = 43)]
        relations: usize,
        #[arg(long, default_value_t = 6366)]
        positives: usize,
    },
    /// Generate deterministic dense feature files for a dataset.
    GenFeatures {
        /// Triplet TSV, or synth:umls[:seed].
        #[arg(long)]
        data: String,
        /// Feature dimension.
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path for entity features (raw binary).
        #[arg(long = "ent-out")]
        ent_out: PathBuf,
        /// Output path for relation features (raw binary).
        #[arg(long = "rel-out")]
        rel_out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ZooCmd {
    /// Check decoder-path scores against native reference scorers.
    Verify {
        /// Model name or "all".
        #[arg(long)]
        model: String,
        /// Random parameter draws.
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        /// Random triplets per draw.
        #[arg(long, default_value_t = 100)]
        triplets: usize,
    },
}

fn load_dataset(spec: &str, neg_seed: u64) -> Result<reed_core::kg::KnowledgeGraph> {
    let cfg = SweepConfig {
        dataset: spec.to_string(),
        neg_seed,
        ..SweepConfig::default()
    };
    Ok(cfg.load_dataset()?)
}

fn attach_features(
    graph: reed_core::kg::KnowledgeGraph,
    ent: &Option<PathBuf>,
    rel: &Option<PathBuf>,
) -> Result<reed_core::kg::KnowledgeGraph> {
    match (ent, rel) {
        (Some(e), Some(r)) => {
            let ent_m = load_feature_matrix(e, FeatureFormat::from_path(e), graph.entity_names())?;
            let rel_m = load_feature_matrix(r, FeatureFormat::from_path(r), graph.relation_names())?;
            Ok(graph.with_features(ent_m, rel_m)?)
        }
        (None, None) => Ok(graph),
        _ => bail!("--ent-features and --rel-features must be supplied together"),
    }
}

/// Split a train-CLI config body into split/negative keys and the
/// TrainConfig remainder.
fn parse_train_cli_config(body: &str) -> Result<(TrainConfig, f64, Option<u64>, u64)> {
    let mut split_fraction = 0.8f64;
    let mut split_seed: Option<u64> = None;
    let mut neg_seed = 0u64;
    let mut rest = String::new();
    for line in body.lines() {
        let trimmed = line.trim();
        if let Some((k, v)) = trimmed.split_once('=') {
            match k.trim() {
                "split_fraction" => {
                    split_fraction = v.trim().parse().context("bad split_fraction")?;
                    continue;
                }
                "split_seed" => {
                    split_seed = Some(v.trim().parse().context("bad split_seed")?);
                    continue;
                }
                "neg_seed" => {
                    neg_seed = v.trim().parse().context("bad neg_seed")?;
                    continue;
                }
                _ => {}
            }
        }
        rest.push_str(line);
        rest.push('\n');
    }
    Ok((
        TrainConfig::from_key_values(&rest)?,
        split_fraction,
        split_seed,
        neg_seed,
    ))
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::SampleSubgraph {
            seeds,
            hops,
            per_hop,
            seed,
            input,
            output,
        } => {
            let graph = load_triplets(&input, TripletFormat::Tsv)?;
            let sub = sample_subgraph(&graph, seeds, hops, per_hop, seed)?;
            save_triplets(&sub, &output)?;
            println!(
                "sampled subgraph: |V|={}, |R|={}, |E+|={}, |E-|={} -> {}",
                sub.n_entities(),
                sub.n_relations(),
                sub.positives().len(),
                sub.negatives().len(),
                output.display()
            );
        }
        Cmd::Zoo {
            sub:
                ZooCmd::Verify {
                    model,
                    trials,
                    seed,
                    triplets,
                },
        } => {
            let kinds: Vec<ZooKind> = if model == "all" {
                ZooKind::ALL.to_vec()
            } else {
                vec![model.parse()?]
            };
            let mut all_pass = true;
            for kind in kinds {
                let report = verify_equivalence(kind, trials, triplets, seed)?;
                let status = if report.passed() { "PASS" } else { "FAIL" };
                println!(
                    "[{status}] {kind}: {} draws x {} triplets, max relative error {:.3e} (tolerance {:.0e})",
                    report.trials, report.triplets_per_trial, report.max_relative_error, report.tolerance
                );
                all_pass &= report.passed();
            }
            if !all_pass {
                bail!("zoo equivalence failed");
            }
        }
        Cmd::Train {
            config,
            data,
            output,
            ent_features,
            rel_features,
        } => {
            let body = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let (cfg, split_fraction, split_seed, neg_seed) = parse_train_cli_config(&body)?;
            let graph = attach_features(load_dataset(&data, neg_seed)?, &ent_features, &rel_features)?;
            let split = split_train(&graph, split_fraction, split_seed.unwrap_or(cfg.seed))?;
            let trained = train(&graph, &split, &cfg)?;
            let diffusion = DiffusionSet::for_split(&graph, &split, cfg.aggregator);
            let losses = evaluate_losses(&trained, &graph, &split, &diffusion)?;
            save_model(
                &trained,
                graph.n_entities(),
                graph.n_relations(),
                graph.ent_features().ncols(),
                graph.rel_features().ncols(),
                &output,
            )?;
            println!(
                "trained {} epochs: empirical margin loss {:.4}, expected classification loss {:.4}, gen error {:.4} -> {}",
                cfg.epochs,
                losses.empirical_margin,
                losses.expected_cls,
                losses.gen_error(),
                output.display()
            );
        }
        Cmd::Bound {
            model,
            data,
            gamma,
            delta,
            monte_carlo,
            split_fraction,
            split_seed,
            neg_seed,
            ent_features,
            rel_features,
        } => {
            let loaded = load_model(&model)?;
            let graph = attach_features(load_dataset(&data, neg_seed)?, &ent_features, &rel_features)?;
            if graph.n_entities() != loaded.n_entities || graph.n_relations() != loaded.n_relations
            {
                bail!(
                    "dataset shape |V|={}, |R|={} does not match archive (|V|={}, |R|={})",
                    graph.n_entities(),
                    graph.n_relations(),
                    loaded.n_entities,
                    loaded.n_relations
                );
            }
            if graph.dataset_hash() != loaded.trained.dataset_hash {
                eprintln!("warning: dataset hash differs from the archive provenance");
            }
            let trained = loaded.trained;
            let split = split_train(
                &graph,
                split_fraction,
                split_seed.unwrap_or(trained.config.seed),
            )?;
            let terms = compute_bound_terms(&trained, &graph, &split, gamma, delta)?;
            let bound = generalization_bound(&terms)?;

            println!("variant = {}", terms.variant);
            println!("layers = {}", terms.layers);
            println!(
                "k_r = [{}]",
                terms
                    .k_r
                    .iter()
                    .map(|k| format!("{k}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            println!("kappa = {}", terms.kappa);
            println!("tau = {}", terms.tau);
            println!("eta_L = {}", terms.eta);
            println!("zeta_L = {}", terms.zeta);
            println!(
                "s_per_layer = [{}]",
                terms
                    .s_per_layer
                    .iter()
                    .map(|s| format!("{s:.6}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            println!("s = {}", terms.s);
            println!("N_w = {}", terms.n_w);
            println!("d = {}", terms.d);
            println!("x_ent_norm = {}", terms.x_ent_norm);
            println!("x_rel_norm = {}", terms.x_rel_norm);
            println!("m = {}", terms.m);
            println!("n = {}", terms.n);
            println!("gamma = {}", terms.gamma);
            println!("delta = {}", terms.delta);
            println!("s_ring = {}", terms.s_ring);
            println!("sigma = {:e}", terms.sigma);
            println!("kl = {:e}", terms.kl);
            println!("theta = {}", terms.theta);
            println!("covering = {}", terms.covering);
            println!("bound_raw = {:e}", bound.raw);
            println!(
                "bound_clamped = {}{}",
                bound.clamped,
                if bound.was_clamped { " (clamped)" } else { "" }
            );
            match simplified_complexity(&terms) {
                Ok(c) => println!(
                    "simplified_complexity = {c:e}{}",
                    if terms.layers == 0 {
                        " (degenerate at L = 0)"
                    } else {
                        ""
                    }
                ),
                Err(e) => println!("simplified_complexity = n/a ({e})"),
            }

            if let Some(trials) = monte_carlo {
                let diffusion = DiffusionSet::for_split(&graph, &split, trained.config.aggregator);
                let sigma = sigma_prior(&terms);
                let p = verify_perturbation_condition(
                    &trained, &graph, &diffusion, sigma, gamma, trials, 1,
                )?;
                println!("perturbation_condition: P(max deviation < gamma/4) ~= {p:.4} over {trials} trials (needs > 0.5)");
                let s_dot = terms.s / (terms.layers as f64 + 2.0);
                let report =
                    verify_norm_propagation(&trained, &graph, &diffusion, s_dot, trials.min(50), 2)?;
                println!(
                    "norm_propagation: {} violations over {} trials at s_dot = {:.4} ({})",
                    report.violations,
                    report.trials,
                    report.s_dot,
                    if report.pass { "PASS" } else { "FAIL" }
                );
            }
        }
        Cmd::Experiment {
            config,
            out_dir,
            resume,
        } => {
            let body = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let cfg = SweepConfig::from_key_values(&body)?;
            let rows = run_experiment(&cfg, &out_dir, resume)?;
            let ok = rows.iter().filter(|r| r.is_ok()).count();
            println!(
                "sweep complete: {} rows ({} ok, {} failed) -> {}",
                rows.len(),
                ok,
                rows.len() - ok,
                out_dir.join("results.csv").display()
            );
            let report = trend_report(&rows);
            print!("{}", report.to_text());
        }
        Cmd::Trends { input } => {
            let rows = parse_results_csv(input.join("results.csv"))?;
            let report = trend_report(&rows);
            print!("{}", report.to_text());
        }
        Cmd::GenData {
            output,
            seed,
            entities,
            relations,
            positives,
        } => {
            let cfg = synth::SynthConfig {
                n_entities: entities,
                n_relations: relations,
                n_positives: positives,
                ..synth::SynthConfig::default()
            };
            let graph = synth::generate(&cfg, seed)?;
            save_triplets(&graph, &output)?;
            println!(
                "generated |V|={}, |R|={}, |E|={} -> {}",
                graph.n_entities(),
                graph.n_relations(),
                graph.n_triplets(),
                output.display()
            );
        }
        Cmd::GenFeatures {
            data,
            dim,
            seed,
            ent_out,
            rel_out,
        } => {
            let graph = load_dataset(&data, 0)?;
            let ent = synth::random_features(graph.n_entities(), dim, seed);
            let rel = synth::random_features(graph.n_relations(), dim, seed ^ 0xfeed);
            save_feature_matrix_binary(&ent, &ent_out)?;
            save_feature_matrix_binary(&rel, &rel_out)?;
            println!(
                "wrote {}x{dim} entity features -> {} and {}x{dim} relation features -> {}",
                graph.n_entities(),
                ent_out.display(),
                graph.n_relations(),
                rel_out.display()
            );
        }
    }
    Ok(())
}
