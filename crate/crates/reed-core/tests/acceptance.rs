//! Acceptance suite: one test per release gate, each printing a
//! `[PASS]`/`[FAIL]` line (visible with `--nocapture`).
//!
//! The sweep-based gates run a reduced CI profile by default
//! (200 epochs, 3 seeds). Set `REED_ACCEPTANCE_FULL=1` to run the full
//! protocol (2,000 epochs, 10 seeds) and additionally gate the
//! monotone s/L trends, which are only stable at full scale.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use reed_core::bounds::{
    compute_bound_terms, covering_size, eta_at, n_w_formula, sigma_prior, generalization_bound, theta,
    verify_norm_propagation, verify_perturbation_condition, BoundTerms,
};
use reed_core::decoder::DecoderKind;
use reed_core::diffusion::{compute_k_r, Aggregator, DiffusionSet};
use reed_core::experiment::{run_experiment, trend_report, ResultRow, SweepConfig, Verdict};
use reed_core::kg::{generate_negatives, split_train, KnowledgeGraph, Triplet};
use reed_core::synth;
use reed_core::tape::grad_check;
use reed_core::train::{
    init_model, train, train_with_observer, LossPlan, TrainConfig, TrainedModel,
};
use reed_core::zoo::{verify_equivalence, ZooKind};
use std::sync::OnceLock;

/// Double-double (~31 significant digits) arithmetic: the independent
/// high-precision oracle for the closed-form scalar checks.
mod dd {
    #[derive(Debug, Clone, Copy)]
    pub struct Dd {
        pub hi: f64,
        pub lo: f64,
    }

    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    /// ln 2 to double-double precision.
    pub const LN2: Dd = Dd {
        hi: std::f64::consts::LN_2,
        lo: 2.319_046_813_846_299_6e-17,
    };

    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    }

    fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        (s, b - (s - a))
    }

    fn two_prod(a: f64, b: f64) -> (f64, f64) {
        let p = a * b;
        (p, a.mul_add(b, -p))
    }

    fn renorm(hi: f64, lo: f64) -> Dd {
        let (s, e) = quick_two_sum(hi, lo);
        Dd { hi: s, lo: e }
    }

    pub fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn from_usize(x: usize) -> Dd {
        from(x as f64) // exact for the sizes used here (< 2^53)
    }

    impl Dd {
        pub fn add(self, o: Dd) -> Dd {
            let (s1, s2) = two_sum(self.hi, o.hi);
            let (t1, t2) = two_sum(self.lo, o.lo);
            let s2 = s2 + t1;
            let (s1, s2) = quick_two_sum(s1, s2);
            renorm(s1, s2 + t2)
        }

        pub fn neg(self) -> Dd {
            Dd {
                hi: -self.hi,
                lo: -self.lo,
            }
        }

        pub fn sub(self, o: Dd) -> Dd {
            self.add(o.neg())
        }

        pub fn mul(self, o: Dd) -> Dd {
            let (p1, p2) = two_prod(self.hi, o.hi);
            renorm(p1, p2 + self.hi * o.lo + self.lo * o.hi)
        }

        pub fn div(self, o: Dd) -> Dd {
            let q1 = self.hi / o.hi;
            let r = self.sub(o.mul(super::dd::from(q1)));
            let q2 = r.hi / o.hi;
            let r2 = r.sub(o.mul(super::dd::from(q2)));
            let q3 = r2.hi / o.hi;
            let (s, e) = quick_two_sum(q1, q2);
            renorm(s, e + q3)
        }

        pub fn sqrt(self) -> Dd {
            assert!(self.hi >= 0.0);
            if self.hi == 0.0 {
                return ZERO;
            }
            let x = from(self.hi.sqrt());
            // one Newton step: x + (a - x^2) / (2x)
            let corr = self.sub(x.mul(x)).div(x.mul(from(2.0)));
            x.add(corr)
        }

        fn scale_pow2(self, k: i32) -> Dd {
            let f = 2.0f64.powi(k);
            Dd {
                hi: self.hi * f,
                lo: self.lo * f,
            }
        }

        pub fn exp(self) -> Dd {
            let k = (self.hi / LN2.hi).round();
            let r = self.sub(LN2.mul(from(k)));
            let mut term = ONE;
            let mut sum = ONE;
            for i in 1..40 {
                term = term.mul(r).div(from(i as f64));
                sum = sum.add(term);
                if term.hi.abs() < 1e-35 {
                    break;
                }
            }
            sum.scale_pow2(k as i32)
        }

        pub fn ln(self) -> Dd {
            assert!(self.hi > 0.0);
            let mut y = from(self.hi.ln());
            for _ in 0..3 {
                // Newton: y += a e^{-y} - 1
                y = y.add(self.mul(y.neg().exp()).sub(ONE));
            }
            y
        }

        pub fn powf(self, p: Dd) -> Dd {
            self.ln().mul(p).exp()
        }

        pub fn to_f64(self) -> f64 {
            self.hi + self.lo
        }
    }

    /// Relative deviation of an f64 value from the oracle.
    pub fn rel_err(value: f64, oracle: Dd) -> f64 {
        let o = oracle.to_f64();
        if o == 0.0 {
            value.abs()
        } else {
            (value - o).abs() / o.abs()
        }
    }
}

fn pass(line: &str) {
    eprintln!("[PASS] {line}");
}

/// Random small labeled graph for the gradient and norm checks.
fn random_graph(n_ent: usize, n_rel: usize, n_pos: usize, seed: u64) -> KnowledgeGraph {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut positives = Vec::new();
    let mut seen = std::collections::HashSet::new();
    while positives.len() < n_pos {
        let t = Triplet::new(
            rng.gen_range(0..n_ent),
            rng.gen_range(0..n_rel),
            rng.gen_range(0..n_ent),
        );
        if seen.insert(t) {
            positives.push(t);
        }
    }
    let g = KnowledgeGraph::new(
        (0..n_ent).map(|i| format!("e{i}")).collect(),
        (0..n_rel).map(|i| format!("r{i}")).collect(),
        positives,
        vec![],
        None,
        None,
    )
    .unwrap();
    let negs = generate_negatives(&g, seed ^ 0xabcd).unwrap();
    g.with_negatives(negs).unwrap()
}

struct Profile {
    epochs: usize,
    seeds: Vec<u64>,
    full: bool,
}

fn profile() -> Profile {
    let full = std::env::var("REED_ACCEPTANCE_FULL").is_ok_and(|v| v == "1");
    if full {
        Profile {
            epochs: 2000,
            seeds: (0..10).map(|i| i * 10).collect(),
            full: true,
        }
    } else {
        Profile {
            epochs: 200,
            seeds: vec![0, 10, 20],
            full: false,
        }
    }
}

/// Shared aggregator/s/L sweep (criteria 6 and 7). TD and SM run as
/// separate sub-sweeps because the protocol gives them different
/// learning rates.
fn main_sweep() -> &'static Vec<ResultRow> {
    static ROWS: OnceLock<Vec<ResultRow>> = OnceLock::new();
    ROWS.get_or_init(|| {
        let p = profile();
        // the full profile takes hours: keep it resumable across runs
        let (dir, _guard) = if p.full {
            let stable = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
                .join("../../target/acceptance-full");
            (stable, None)
        } else {
            let tmp = tempfile::tempdir().expect("sweep dir");
            (tmp.path().to_path_buf(), Some(tmp))
        };
        let mut rows = Vec::new();
        for (decoder, lr) in [(DecoderKind::Td, 2e-4), (DecoderKind::Sm, 5e-4)] {
            let cfg = SweepConfig {
                dataset: "synth:umls".into(),
                decoders: vec![decoder],
                aggregators: vec![Aggregator::Mean, Aggregator::Sum],
                s_values: vec![10.0, 15.0, 20.0],
                l_values: vec![1, 2, 3],
                d_values: vec![],
                seeds: p.seeds.clone(),
                base: TrainConfig {
                    epochs: p.epochs,
                    hidden_dim: 48,
                    rel_hidden_dim: 48,
                    gamma: 0.75,
                    lr,
                    ..TrainConfig::default()
                },
                ..SweepConfig::default()
            };
            let out = dir.join(format!("{decoder}"));
            rows.extend(run_experiment(&cfg, &out, p.full).expect("sweep"));
        }
        rows
    })
}

#[test]
fn criterion_01_zoo_equivalence() {
    for kind in ZooKind::ALL {
        let report = verify_equivalence(kind, 100, 100, 0x5eed).unwrap();
        assert!(
            report.passed(),
            "{kind}: max relative error {} exceeds 1e-9",
            report.max_relative_error
        );
    }
    pass("criterion 1: zoo equivalence, 12 models x 100 draws x 100 triplets within 1e-9 relative");
}

#[test]
fn criterion_02_gradient_correctness() {
    let mut worst = 0.0f64;
    for instance in 0..20u64 {
        let decoder = if instance % 2 == 0 {
            DecoderKind::Td
        } else {
            DecoderKind::Sm
        };
        let g = random_graph(10, 3, 24, 1000 + instance);
        let split = split_train(&g, 0.8, instance).unwrap();
        let cfg = TrainConfig {
            layers: 1 + (instance as usize % 2),
            hidden_dim: 6,
            rel_hidden_dim: 5,
            decoder,
            aggregator: if instance % 3 == 0 {
                Aggregator::Sum
            } else {
                Aggregator::Mean
            },
            gamma: 0.5,
            s_target: 3.0,
            seed: instance,
            ..TrainConfig::default()
        };
        let model = init_model(&cfg, g.n_relations(), g.n_entities(), g.n_relations()).unwrap();
        let diffusion = DiffusionSet::for_split(&g, &split, cfg.aggregator);
        let train_set = split.train_triplets(&g);
        let plan = LossPlan::new(&g, &diffusion, &train_set, &model, cfg.gamma).unwrap();
        let params: Vec<Array2<f64>> = model.params().iter().map(|p| (*p).clone()).collect();
        let err = grad_check(&params, |t, ids| plan.build(t, ids), 1e-5, 5, instance).unwrap();
        worst = worst.max(err);
        assert!(err < 1e-4, "instance {instance} ({decoder}): error {err}");
    }
    pass(&format!(
        "criterion 2: gradient correctness on 20 random 10-entity instances, max rel err {worst:.2e} < 1e-4"
    ));
}

#[test]
fn criterion_03_norm_propagation() {
    let mut draws = 0usize;
    for decoder in [DecoderKind::Td, DecoderKind::Sm] {
        for layers in [1usize, 2, 3] {
            for model_idx in 0..10u64 {
                let g = random_graph(12, 3, 30, 31 * layers as u64 + model_idx);
                let split = split_train(&g, 0.8, model_idx).unwrap();
                let cfg = TrainConfig {
                    layers,
                    hidden_dim: 6,
                    rel_hidden_dim: 6,
                    decoder,
                    aggregator: if model_idx % 2 == 0 {
                        Aggregator::Mean
                    } else {
                        Aggregator::Sum
                    },
                    gamma: 0.5,
                    s_target: 2.0 + model_idx as f64 % 3.0,
                    seed: model_idx,
                    ..TrainConfig::default()
                };
                let model =
                    init_model(&cfg, g.n_relations(), g.n_entities(), g.n_relations()).unwrap();
                let trained = TrainedModel {
                    model,
                    config: cfg.clone(),
                    dataset_hash: g.dataset_hash(),
                };
                let diffusion = DiffusionSet::for_split(&g, &split, cfg.aggregator);
                let s = (1..=layers + 1)
                    .map(|l| trained.model.layer_norm_max(l))
                    .fold(0.0, f64::max);
                let s_dot = s / (layers as f64 + 2.0);
                let report =
                    verify_norm_propagation(&trained, &g, &diffusion, s_dot, 10, model_idx)
                        .unwrap();
                draws += report.trials;
                assert!(
                    report.pass,
                    "{decoder} L={layers} model {model_idx}: {} violations (dev {} vs bound {})",
                    report.violations, report.deviation_measured, report.deviation_bound
                );
            }
        }
    }
    pass(&format!(
        "criterion 3: norm-propagation and deviation bounds, 100 draws per decoder-L cell ({draws} total), zero violations"
    ));
}

#[test]
fn criterion_04_closed_form_simplifications() {
    let mut rng = ChaCha12Rng::seed_from_u64(99);
    for layers in 0..=4usize {
        for _ in 0..40 {
            let n_rel = rng.gen_range(1..8);
            let k_r: Vec<f64> = (0..n_rel).map(|_| rng.gen_range(0.0..5.0)).collect();
            let kappa: f64 = k_r.iter().sum();
            let tau = 1.0 + kappa;
            let eta = eta_at(layers, tau, kappa, 1.0, 1.0);
            let zeta = 2.0 * eta + 1.0;
            let eta_closed = 2.0 * tau.powi(layers as i32) - 1.0;
            let zeta_closed = 4.0 * tau.powi(layers as i32) - 1.0;
            assert!(
                (eta - eta_closed).abs() <= 1e-12 * eta_closed.abs(),
                "eta: {eta} vs {eta_closed}"
            );
            assert!(
                (zeta - zeta_closed).abs() <= 1e-12 * zeta_closed.abs(),
                "zeta: {zeta} vs {zeta_closed}"
            );
        }
    }
    pass("criterion 4: eta_L = 2 tau^L - 1 and zeta_L = 4 tau^L - 1 under one-hot/1-Lipschitz, 1e-12 relative, L in 0..=4");
}

fn umls_scale_trained_td() -> (KnowledgeGraph, reed_core::kg::Split, TrainedModel) {
    let p = profile();
    let graph = synth::generate(&synth::SynthConfig::default(), 0).unwrap();
    let split = split_train(&graph, 0.8, 0).unwrap();
    let cfg = TrainConfig {
        layers: 1,
        hidden_dim: 48,
        rel_hidden_dim: 48,
        decoder: DecoderKind::Td,
        aggregator: Aggregator::Mean,
        gamma: 0.75,
        s_target: 10.0,
        lr: 2e-4,
        epochs: if p.full { 2000 } else { 300 },
        seed: 0,
        ..TrainConfig::default()
    };
    let trained = train(&graph, &split, &cfg).unwrap();
    (graph, split, trained)
}

#[test]
fn criterion_05_perturbation_condition() {
    let (graph, split, trained) = umls_scale_trained_td();
    let terms = compute_bound_terms(&trained, &graph, &split, 0.75, 0.05).unwrap();
    let sigma = sigma_prior(&terms);
    let diffusion = DiffusionSet::for_split(&graph, &split, trained.config.aggregator);
    let p = verify_perturbation_condition(&trained, &graph, &diffusion, sigma, 0.75, 200, 7)
        .unwrap();
    assert!(p > 0.5, "P(max deviation < gamma/4) = {p} <= 0.5");

    // sanity inversions: a vanishing scale always satisfies the
    // condition, an inflated one never does
    let p_tiny =
        verify_perturbation_condition(&trained, &graph, &diffusion, sigma * 1e-6, 0.75, 20, 8)
            .unwrap();
    assert_eq!(p_tiny, 1.0);
    let p_huge =
        verify_perturbation_condition(&trained, &graph, &diffusion, sigma * 1e6, 0.75, 20, 9)
            .unwrap();
    assert!(p_huge < 0.5, "inflated sigma still satisfied: {p_huge}");
    pass(&format!(
        "criterion 5: P(max deviation < gamma/4) = {p:.3} > 0.5 with sigma = {sigma:.3e} over 200 draws"
    ));
}

#[test]
fn criterion_06_bound_validity() {
    let rows = main_sweep();
    assert!(!rows.is_empty());
    let mut checked = 0;
    for r in rows {
        assert!(r.is_ok(), "run failed: {}", r.status);
        assert!(
            r.bound_value >= r.gen_error,
            "bound {} < gen error {} at decoder={} agg={} s={} L={} seed={}",
            r.bound_value,
            r.gen_error,
            r.decoder,
            r.aggregator,
            r.s_target,
            r.layers,
            r.seed
        );
        checked += 1;
    }
    pass(&format!(
        "criterion 6: certificate bound dominates the measured generalization error in {checked}/{checked} sweep rows"
    ));
}

#[test]
fn criterion_07_aggregator_and_scale_trends() {
    let p = profile();
    let rows = main_sweep();
    let report = trend_report(rows);
    assert_eq!(
        report.aggregator_verdict,
        Verdict::Pass,
        "mean-aggregator cells must beat sum-aggregator cells:\n{}",
        report.to_text()
    );
    if p.full {
        assert_eq!(report.s_verdict, Verdict::Pass, "{}", report.to_text());
        assert_eq!(report.l_verdict, Verdict::Pass, "{}", report.to_text());
        pass("criterion 7: mean < sum in every cell; gen error nondecreasing in s and L (full profile)");
    } else {
        pass(&format!(
            "criterion 7: mean < sum in every (decoder, s, L) cell at the CI profile; s-trend: {}, L-trend: {} (informational at CI scale)",
            report.s_verdict, report.l_verdict
        ));
    }
}

#[test]
fn criterion_08_width_trend_with_feature_files() {
    let p = profile();
    let (dir, _guard) = if p.full {
        let stable = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../target/acceptance-full/width");
        std::fs::create_dir_all(&stable).unwrap();
        (stable, None)
    } else {
        let tmp = tempfile::tempdir().unwrap();
        (tmp.path().to_path_buf(), Some(tmp))
    };
    // write the 32-dim feature files the sweep consumes
    let graph = synth::generate(&synth::SynthConfig::default(), 0).unwrap();
    let ent = synth::random_features(graph.n_entities(), 32, 101);
    let rel = synth::random_features(graph.n_relations(), 32, 202);
    let ent_path = dir.join("ent_features.bin");
    let rel_path = dir.join("rel_features.bin");
    reed_core::kg::save_feature_matrix_binary(&ent, &ent_path).unwrap();
    reed_core::kg::save_feature_matrix_binary(&rel, &rel_path).unwrap();

    let mut rows = Vec::new();
    for (decoder, lr) in [(DecoderKind::Td, 2e-4), (DecoderKind::Sm, 5e-4)] {
        let cfg = SweepConfig {
            dataset: "synth:umls".into(),
            decoders: vec![decoder],
            aggregators: vec![Aggregator::Mean],
            s_values: vec![10.0],
            l_values: vec![1],
            d_values: vec![64, 96, 128],
            seeds: p.seeds.clone(),
            ent_features: Some(ent_path.display().to_string()),
            rel_features: Some(rel_path.display().to_string()),
            base: TrainConfig {
                epochs: p.epochs,
                gamma: 0.75,
                lr,
                ..TrainConfig::default()
            },
            ..SweepConfig::default()
        };
        let out = dir.join(format!("d_{decoder}"));
        rows.extend(run_experiment(&cfg, &out, p.full).unwrap());
    }
    assert!(rows.iter().all(|r| r.is_ok()));
    let report = trend_report(&rows);
    assert_eq!(
        report.d_verdict,
        Verdict::Pass,
        "gen error must be weakly nondecreasing in d:\n{}",
        report.to_text()
    );
    pass("criterion 8: gen error weakly nondecreasing in d in {64, 96, 128} with 32-dim feature files, both decoders");
}

#[test]
fn criterion_09_k_r_law() {
    let graph = synth::generate(&synth::SynthConfig::default(), 3).unwrap();
    let nv = graph.n_entities();
    let nr = graph.n_relations();

    // brute-force recount, independent of the diffusion module
    let mut max_in_degree = vec![0usize; nr];
    let mut occurs = vec![false; nr];
    let mut counts: std::collections::HashMap<(usize, usize), usize> =
        std::collections::HashMap::new();
    for t in graph.positives() {
        occurs[t.relation] = true;
        *counts.entry((t.relation, t.tail)).or_default() += 1;
    }
    for (&(r, _), &c) in &counts {
        max_in_degree[r] = max_in_degree[r].max(c);
    }

    let k_sum = compute_k_r(graph.positives(), nv, nr, Aggregator::Sum);
    let k_mean = compute_k_r(graph.positives(), nv, nr, Aggregator::Mean);
    for r in 0..nr {
        assert_eq!(k_sum[r], max_in_degree[r] as f64, "relation {r}");
        assert_eq!(k_mean[r], if occurs[r] { 1.0 } else { 0.0 }, "relation {r}");
    }
    pass("criterion 9: k_r equals brute-force max per-relation in-degree (sum) and the exact 0/1 law (mean)");
}

#[test]
fn criterion_10_renormalization_invariant() {
    for decoder in [DecoderKind::Td, DecoderKind::Sm] {
        let graph = random_graph(20, 4, 60, 77);
        let split = split_train(&graph, 0.8, 5).unwrap();
        let cfg = TrainConfig {
            layers: 2,
            hidden_dim: 8,
            rel_hidden_dim: 8,
            decoder,
            gamma: 0.5,
            s_target: 10.0,
            epochs: 30,
            lr: 1e-3,
            seed: 5,
            ..TrainConfig::default()
        };
        let mut max_dev = 0.0f64;
        let mut epochs_seen = 0;
        train_with_observer(&graph, &split, &cfg, |stats| {
            max_dev = max_dev.max(stats.norm_deviation);
            epochs_seen += 1;
        })
        .unwrap();
        assert_eq!(epochs_seen, 30);
        assert!(
            max_dev < 1e-9,
            "{decoder}: max Frobenius deviation {max_dev} after a step"
        );
    }
    pass("criterion 10: every learnable Frobenius norm equals s_target within 1e-9 after every optimizer step");
}

#[test]
fn criterion_11_theta_and_covering_vs_arbitrary_precision() {
    // oracle self-checks first
    let two = dd::from(2.0);
    assert!(dd::rel_err(2.0f64.sqrt(), two.sqrt()) < 1e-15);
    let x = dd::from(1.2345);
    assert!((x.ln().exp().to_f64() - 1.2345).abs() < 1e-25);

    let mut rng = ChaCha12Rng::seed_from_u64(0xddcc);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(40..1_000_000usize);
        let m = rng.gen_range(20..=n - 20);
        let layers = rng.gen_range(0..=4usize);

        // theta(m, n) = 3 sqrt(m (1 - m/n)) ln m
        let m_dd = dd::from_usize(m);
        let n_dd = dd::from_usize(n);
        let inner = m_dd.mul(dd::ONE.sub(m_dd.div(n_dd)));
        let theta_oracle = dd::from(3.0).mul(inner.sqrt()).mul(m_dd.ln());
        let err = dd::rel_err(theta(m, n).unwrap(), theta_oracle);
        worst = worst.max(err);
        assert!(err < 1e-12, "theta({m}, {n}): rel err {err}");

        // covering size per variant
        let gap = dd::ONE.div(m_dd).sub(dd::ONE.div(n_dd));
        for variant in [DecoderKind::Td, DecoderKind::Sm] {
            let l = layers as f64;
            let (factor, expo) = match variant {
                DecoderKind::Td => ((l + 2.0) / 2.0, -1.0 / (2.0 * (l + 1.0))),
                DecoderKind::Sm => ((2.0 * l + 2.0) / 2.0, -1.0 / (2.0 * (2.0 * l + 1.0))),
            };
            let oracle = dd::from(factor).mul(gap.powf(dd::from(expo)).sub(dd::ONE));
            let err = dd::rel_err(covering_size(variant, layers, m, n).unwrap(), oracle);
            worst = worst.max(err);
            assert!(err < 1e-12, "covering({variant}, L={layers}, {m}, {n}): rel err {err}");
        }
    }

    // full closed-form bound at the desk-scale shape (|R| = 43, L = 1,
    // s = 10, d = 133, gamma = 0.75, delta = 0.05, TD, mean aggregator)
    let layers = 1usize;
    let n_rel = 43usize;
    let kappa = 43.0;
    let tau = 1.0 + kappa;
    let eta = eta_at(layers, tau, kappa, 1.0, 1.0);
    let zeta = 2.0 * eta + 1.0;
    let (m, n) = (10_186usize, 12_732usize);
    let terms = BoundTerms {
        variant: DecoderKind::Td,
        layers,
        k_r: vec![1.0; n_rel],
        kappa,
        tau,
        eta,
        zeta,
        s_per_layer: vec![10.0, 10.0],
        s: 10.0,
        n_w: n_w_formula(DecoderKind::Td, n_rel, layers),
        d: 133,
        x_ent_norm: 1.0,
        x_rel_norm: 1.0,
        m,
        n,
        gamma: 0.75,
        delta: 0.05,
        s_ring: 10.0,
        sigma: 0.0,
        kl: 0.0,
        theta: theta(m, n).unwrap(),
        covering: covering_size(DecoderKind::Td, layers, m, n).unwrap(),
    };
    let bound = generalization_bound(&terms).unwrap();
    let oracle = {
        let e = dd::ONE.exp();
        let m_dd = dd::from_usize(m);
        let n_dd = dd::from_usize(n);
        let n_w = dd::from_usize(terms.n_w);
        let d = dd::from_usize(terms.d);
        let zeta_dd = dd::from(4.0).mul(dd::from(tau)).sub(dd::ONE);
        let complexity = dd::from(16.0)
            .mul(e.powf(dd::from(6.0)))
            .mul(n_w)
            .mul(dd::from(4.0)) // (L+1)^2 at L = 1
            .mul(dd::from(10.0).powf(dd::from(4.0))) // s^{2L+2}
            .mul(zeta_dd.mul(zeta_dd))
            .mul(d)
            .mul(dd::from(4.0).mul(n_w).mul(d).ln())
            .div(dd::from(0.75).mul(dd::from(0.75)));
        let theta_dd = dd::from(3.0)
            .mul(m_dd.mul(dd::ONE.sub(m_dd.div(n_dd))).sqrt())
            .mul(m_dd.ln());
        let gap = dd::ONE.div(m_dd).sub(dd::ONE.div(n_dd));
        let covering = dd::from(1.5).mul(gap.powf(dd::from(-0.25)).sub(dd::ONE));
        let confidence = dd::from(0.5).mul(
            dd::from(4.0)
                .mul(theta_dd)
                .mul(covering)
                .div(dd::from(0.05))
                .ln(),
        );
        dd::ONE
            .sub(m_dd.div(n_dd))
            .div(m_dd)
            .mul(complexity.add(confidence))
            .sqrt()
    };
    let err = dd::rel_err(bound.raw, oracle);
    assert!(err < 1e-12, "full bound value: rel err {err}");
    assert!(bound.was_clamped, "desk-scale bound must be far above 1");

    pass(&format!(
        "criterion 11: theta/covering/full-bound match the double-double oracle, worst rel err {worst:.2e} < 1e-12 over 50 tuples"
    ));
}
