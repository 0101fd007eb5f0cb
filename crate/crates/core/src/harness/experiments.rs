//! Experiment drivers: shapes, federation, multi-round load and throughput.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::categories::{synth_categories, CategoryModel, CategoryProfile};
use super::report::{ExperimentReport, Table};
use super::sensors::{synth_sensors_with, SensorConfig};
use super::shapes::synth_shapes;
use super::HarnessError;
use crate::entropy::Codebook;
use crate::knowledge_base::KnowledgeBase;
use crate::link::{throughput, LinkProfile};
use crate::multi_round::{
    compress_multi_with, fit_piecewise, profile_load_curve, LoadCurve, MultiRoundConfig, MultiRoundElement,
    PiecewiseModel, DEFAULT_MAX_ROUNDS,
};
use crate::scene_graph::{serialize_text, Corpus, SceneGraph};
use crate::two_stage::{compress, compression_ratio, encode_stream, recover, render_text, RatioBasis, Thresholds};

fn sub_seed(seed: u64, tag: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ tag.wrapping_mul(0xbf58_476d_1ce4_e5b9)
}

fn stats(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone)]
pub struct ShapesOutcome {
    pub report: ExperimentReport,
    pub mean_rho: f64,
    /// Test triplets whose relation is the knowledge base's argmax for the pair.
    pub dominant: usize,
    /// Test triplets sent without their relation.
    pub elided: usize,
    /// Elided triplets whose relation is not the argmax; always zero.
    pub elided_non_dominant: usize,
    pub lossless: bool,
}

/// Shapes corpus split into a training prefix and a test suffix.
pub fn run_shapes_experiment(
    n_graphs: usize,
    n_train: usize,
    thresholds: Thresholds,
    seed: u64,
) -> Result<ShapesOutcome, HarnessError> {
    if n_train == 0 || n_train >= n_graphs {
        return Err(HarnessError::Config("need 0 < n_train < n_graphs".into()));
    }
    let corpus = synth_shapes(n_graphs, seed);
    let train = Corpus::new(corpus.graphs[..n_train].to_vec());
    let kb = KnowledgeBase::build(&train)?;
    let mut table = Table::new(&["image_id", "triplets", "relations_elided", "tails_elided", "rho_tokens", "rho_utf8", "lossless"]);
    let (mut dominant, mut elided, mut elided_non_dominant) = (0, 0, 0);
    let mut rhos = Vec::new();
    let mut lossless = true;
    for g in &corpus.graphs[n_train..] {
        let s = compress(&kb, g, thresholds);
        let mut back = recover(&kb, &s)?;
        back.image_id = g.image_id.clone();
        let ok = &back == g;
        lossless &= ok;
        for (t, el) in g.triplets.iter().zip(&s.elements) {
            let is_dominant = kb.relation_argmax(&t.head.class, &t.tail.class).map(|(r, _)| r) == Some(t.relation.as_str());
            let is_elided = !matches!(el, crate::two_stage::CompressedElement::Full { .. });
            dominant += usize::from(is_dominant);
            elided += usize::from(is_elided);
            elided_non_dominant += usize::from(is_elided && !is_dominant);
        }
        let rho = compression_ratio(g, &s, RatioBasis::Tokens)?;
        let rho_utf8 = compression_ratio(g, &s, RatioBasis::Utf8)?;
        rhos.push(rho);
        table.push(vec![
            json!(g.image_id),
            json!(g.triplets.len()),
            json!(s.relations_elided()),
            json!(s.tails_elided()),
            json!(rho),
            json!(rho_utf8),
            json!(ok),
        ]);
    }
    let (mean_rho, _) = stats(&rhos);
    let mut report = ExperimentReport::new(
        "shapes",
        json!({"n_graphs": n_graphs, "n_train": n_train, "seed": seed,
               "theta_r": thresholds.theta_r, "theta_t": thresholds.theta_t}),
    );
    report.tables.insert("graphs".into(), table);
    let mut summary = Table::new(&["mean_rho_tokens", "dominant", "elided", "elided_non_dominant", "lossless"]);
    summary.push(vec![json!(mean_rho), json!(dominant), json!(elided), json!(elided_non_dominant), json!(lossless)]);
    report.tables.insert("summary".into(), summary);
    Ok(ShapesOutcome {
        report,
        mean_rho,
        dominant,
        elided,
        elided_non_dominant,
        lossless,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodecKind {
    TwoStage,
    MultiRound,
}

impl CodecKind {
    pub fn name(self) -> &'static str {
        match self {
            CodecKind::TwoStage => "two_stage",
            CodecKind::MultiRound => "multi_round",
        }
    }
}

/// Mean token-basis ratio of `test` under `kb`.
pub fn mean_ratio(kb: &KnowledgeBase, test: &Corpus, codec: CodecKind, thresholds: Thresholds) -> Result<f64, HarnessError> {
    let mut rhos = Vec::with_capacity(test.len());
    for g in &test.graphs {
        let rho = match codec {
            CodecKind::TwoStage => compression_ratio(g, &compress(kb, g, thresholds), RatioBasis::Tokens)?,
            CodecKind::MultiRound => {
                let config = MultiRoundConfig {
                    max_rounds: DEFAULT_MAX_ROUNDS,
                    audit: false,
                };
                compress_multi_with(kb, &g.class_triplets(), config)?.ratio()
            }
        };
        rhos.push(rho);
    }
    Ok(stats(&rhos).0)
}

fn covers(shared: &KnowledgeBase, local: &KnowledgeBase) -> bool {
    local.relation_table.iter().all(|(pair, rels)| {
        shared
            .relation_table
            .get(pair)
            .is_some_and(|s| rels.keys().all(|r| s.contains_key(r)))
    }) && local.cooccurrence_table.iter().all(|(h, tails)| {
        shared
            .cooccurrence_table
            .get(h)
            .is_some_and(|s| tails.keys().all(|t| s.contains_key(t)))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationPoint {
    pub size: usize,
    /// `user<k>` or `shared`.
    pub kb: String,
    pub mean_rho: f64,
    pub stderr: f64,
    pub coverage_superset: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FederationConfig {
    pub profiles: Vec<CategoryProfile>,
    pub test_profile: CategoryProfile,
    pub n_test: usize,
    pub training_sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub codec: CodecKind,
    pub theta_r: f64,
    pub theta_t: f64,
}

impl Default for FederationConfig {
    fn default() -> Self {
        FederationConfig {
            profiles: vec![
                CategoryProfile::new(&[("human", 0.7), ("animal", 0.2), ("transport", 0.1)]),
                CategoryProfile::new(&[("transport", 0.7), ("animal", 0.2), ("human", 0.1)]),
            ],
            test_profile: CategoryProfile::new(&[("transport", 0.4), ("human", 0.4), ("animal", 0.2)]),
            n_test: 100,
            training_sizes: vec![50, 100, 200, 500, 1000],
            seeds: vec![1, 2, 3, 4, 5],
            codec: CodecKind::TwoStage,
            theta_r: 0.5,
            theta_t: 0.5,
        }
    }
}

impl FederationConfig {
    fn validate(&self) -> Result<(), HarnessError> {
        if self.profiles.is_empty() || self.training_sizes.is_empty() || self.seeds.is_empty() {
            return Err(HarnessError::Config("profiles, sizes and seeds must be non-empty".into()));
        }
        if self.training_sizes.windows(2).any(|w| w[1] <= w[0]) || self.training_sizes[0] == 0 {
            return Err(HarnessError::Config("training sizes must be positive and ascending".into()));
        }
        Thresholds::new(self.theta_r, self.theta_t)?;
        Ok(())
    }
}

/// Training corpus of user `k` (0-based) of the given size for one seed.
pub fn user_corpus(
    model: &CategoryModel,
    profile: &CategoryProfile,
    user: usize,
    size: usize,
    seed: u64,
) -> Result<Corpus, HarnessError> {
    synth_categories(model, profile, size, sub_seed(seed, 100 + user as u64), &format!("user{}-s{seed}", user + 1))
}

pub fn test_corpus(model: &CategoryModel, profile: &CategoryProfile, n: usize, seed: u64) -> Result<Corpus, HarnessError> {
    synth_categories(model, profile, n, sub_seed(seed, 1), &format!("test-s{seed}"))
}

/// One seed: local knowledge bases per profile and their merge, evaluated
/// on `test` at every training size. Training sets are nested prefixes.
pub fn run_federation(
    model: &CategoryModel,
    profiles: &[CategoryProfile],
    training_sizes: &[usize],
    test: &Corpus,
    codec: CodecKind,
    thresholds: Thresholds,
    seed: u64,
) -> Result<Vec<FederationPoint>, HarnessError> {
    let max = *training_sizes.iter().max().ok_or_else(|| HarnessError::Config("no training sizes".into()))?;
    let corpora: Vec<Corpus> = profiles
        .iter()
        .enumerate()
        .map(|(u, p)| user_corpus(model, p, u, max, seed))
        .collect::<Result<_, _>>()?;
    let mut points = Vec::new();
    for &size in training_sizes {
        let locals: Vec<KnowledgeBase> = corpora
            .iter()
            .map(|c| KnowledgeBase::build(&Corpus::new(c.graphs[..size].to_vec())))
            .collect::<Result<_, _>>()?;
        let mut shared = locals[0].clone();
        for kb in &locals[1..] {
            shared = shared.merge(kb)?;
        }
        let superset = locals.iter().all(|l| covers(&shared, l));
        for (u, kb) in locals.iter().enumerate() {
            points.push(FederationPoint {
                size,
                kb: format!("user{}", u + 1),
                mean_rho: mean_ratio(kb, test, codec, thresholds)?,
                stderr: 0.0,
                coverage_superset: true,
            });
        }
        points.push(FederationPoint {
            size,
            kb: "shared".into(),
            mean_rho: mean_ratio(&shared, test, codec, thresholds)?,
            stderr: 0.0,
            coverage_superset: superset,
        });
    }
    Ok(points)
}

#[derive(Debug, Clone)]
pub struct FederationOutcome {
    pub report: ExperimentReport,
    /// Means over seeds, ordered by size then knowledge base.
    pub points: Vec<FederationPoint>,
}

impl FederationOutcome {
    pub fn curve(&self, kb: &str) -> Vec<(usize, f64)> {
        self.points
            .iter()
            .filter(|p| p.kb == kb)
            .map(|p| (p.size, p.mean_rho))
            .collect()
    }
}

/// [`run_federation`] over every seed, each with its own test set, averaged.
pub fn run_federation_seeds(model: &CategoryModel, config: &FederationConfig) -> Result<FederationOutcome, HarnessError> {
    config.validate()?;
    let thresholds = Thresholds::new(config.theta_r, config.theta_t)?;
    let per_seed: Vec<Vec<FederationPoint>> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let test = test_corpus(model, &config.test_profile, config.n_test, seed)?;
            run_federation(model, &config.profiles, &config.training_sizes, &test, config.codec, thresholds, seed)
        })
        .collect::<Result<_, _>>()?;

    let mut seeds_table = Table::new(&["seed", "size", "kb", "codec", "mean_rho"]);
    for (seed, points) in config.seeds.iter().zip(&per_seed) {
        for p in points {
            seeds_table.push(vec![json!(seed), json!(p.size), json!(p.kb), json!(config.codec.name()), json!(p.mean_rho)]);
        }
    }
    let mut points = Vec::new();
    let mut table = Table::new(&["size", "kb", "codec", "mean_rho", "stderr", "seeds", "coverage_superset"]);
    for i in 0..per_seed[0].len() {
        let values: Vec<f64> = per_seed.iter().map(|ps| ps[i].mean_rho).collect();
        let (mean, se) = stats(&values);
        let template = &per_seed[0][i];
        let superset = per_seed.iter().all(|ps| ps[i].coverage_superset);
        table.push(vec![
            json!(template.size),
            json!(template.kb),
            json!(config.codec.name()),
            json!(mean),
            json!(se),
            json!(values.len()),
            json!(superset),
        ]);
        points.push(FederationPoint {
            size: template.size,
            kb: template.kb.clone(),
            mean_rho: mean,
            stderr: se,
            coverage_superset: superset,
        });
    }
    let mut report = ExperimentReport::new(
        "federation",
        json!({"config": config, "zipf_exponent": model.zipf_exponent, "law_seed": model.law_seed}),
    );
    report.tables.insert("mean".into(), table);
    report.tables.insert("per_seed".into(), seeds_table);
    Ok(FederationOutcome { report, points })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadConfig {
    pub n_minutes: usize,
    pub n_residents: usize,
    /// Leading fraction of minutes used to build the knowledge base.
    pub train_fraction: f64,
    pub sweep: Vec<u32>,
    pub repetitions: usize,
    pub segments: usize,
    pub sensors: SensorConfig,
}

impl Default for LoadConfig {
    fn default() -> Self {
        LoadConfig {
            n_minutes: 2000,
            n_residents: 1,
            train_fraction: 0.75,
            sweep: vec![1, 2, 3, 4],
            repetitions: crate::multi_round::DEFAULT_REPETITIONS,
            segments: 2,
            sensors: SensorConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadOutcome {
    pub report: ExperimentReport,
    pub curve: LoadCurve,
    pub model: Option<PiecewiseModel>,
    /// Fraction of triplets left after round 1 that round 2 omits.
    pub round2_fraction: f64,
}

/// Sensor knowledge base from the training window, load curve over the
/// held-out window, and a segmented fit of runtime against ratio.
pub fn run_load_experiment(config: &LoadConfig, seed: u64) -> Result<LoadOutcome, HarnessError> {
    if config.sweep.is_empty() {
        return Err(HarnessError::Config("sweep is empty".into()));
    }
    if !(config.train_fraction > 0.0 && config.train_fraction < 1.0) {
        return Err(HarnessError::Config("train_fraction must lie in (0, 1)".into()));
    }
    let samples = synth_sensors_with(&config.sensors, config.n_minutes, config.n_residents, seed)?;
    let split = ((config.n_minutes as f64 * config.train_fraction) as usize).clamp(1, config.n_minutes - 1);
    let (train, held_out) = samples.split_at(split);
    let kb = KnowledgeBase::from_samples(train.iter().map(|s| s.iter().cloned()));
    let curve = profile_load_curve(&kb, held_out, &config.sweep, config.repetitions)?;
    let model = fit_piecewise(&curve, config.segments).ok();

    // Round statistics at the largest budget.
    let max_rounds = *config.sweep.iter().max().expect("non-empty sweep");
    let mut per_round = vec![0usize; max_rounds as usize + 1];
    let mut mid_after_round1 = 0;
    for m in held_out {
        let s = compress_multi_with(&kb, m, MultiRoundConfig { max_rounds, audit: false })?;
        for e in &s.elements {
            if let Some(r) = e.omit_round() {
                per_round[r as usize] += 1;
            }
            if matches!(e, MultiRoundElement::RefOmit { .. } | MultiRoundElement::Retained(_)) {
                mid_after_round1 += 1;
            }
        }
    }
    let round2_fraction = if mid_after_round1 == 0 {
        0.0
    } else {
        per_round.get(2).copied().unwrap_or(0) as f64 / mid_after_round1 as f64
    };

    let mut report = ExperimentReport::new("load", json!({"config": config, "seed": seed, "train_minutes": split}));
    let mut c = Table::new(&["rho", "runtime_s", "rounds"]);
    for s in &curve.samples {
        c.push(vec![json!(s.rho), json!(s.runtime_s), json!(s.rounds)]);
    }
    report.tables.insert("curve".into(), c);
    let mut f = Table::new(&["segment", "A", "B", "D"]);
    if let Some(m) = &model {
        for (i, s) in m.segments.iter().enumerate() {
            f.push(vec![json!(i + 1), json!(s.slope), json!(s.intercept), json!(s.left)]);
        }
    }
    report.tables.insert("fit".into(), f);
    let mut r = Table::new(&["round", "omitted"]);
    for (round, n) in per_round.iter().enumerate().skip(1) {
        r.push(vec![json!(round), json!(n)]);
    }
    report.tables.insert("omissions".into(), r);
    Ok(LoadOutcome {
        report,
        curve,
        model,
        round2_fraction,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThroughputConfig {
    /// Scene-graph payload per message.
    pub semantic_bits: u64,
    /// Pixel-codec payload per message.
    pub baseline_bits: u64,
}

impl Default for ThroughputConfig {
    fn default() -> Self {
        ThroughputConfig {
            semantic_bits: 2400,
            baseline_bits: 50 * 1024 * 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ThroughputOutcome {
    pub report: ExperimentReport,
    /// Per schedule step: (snr_db, semantic msgs/s, baseline msgs/s).
    pub rows: Vec<(f64, f64, f64)>,
    /// Full over filtered size of the test set, text form.
    pub gain_utf8: f64,
    /// Full over filtered size of the test set, entropy-coded wire form without layout.
    pub gain_wire: f64,
}

/// Messages per second at every schedule threshold, plus the filtered-versus-full
/// payload gain measured on `test` under `kb`.
pub fn run_throughput_experiment(
    profile: &LinkProfile,
    config: &ThroughputConfig,
    kb: &KnowledgeBase,
    test: &Corpus,
    thresholds: Thresholds,
) -> Result<ThroughputOutcome, HarnessError> {
    profile.validate()?;
    let cb = Codebook::build(&kb.vocabulary).map_err(|e| HarnessError::Config(e.to_string()))?;
    let (mut full_text, mut filt_text, mut full_wire, mut filt_wire) = (0u64, 0u64, 0u64, 0u64);
    for g in &test.graphs {
        let bare = SceneGraph::new(g.image_id.clone(), g.triplets.clone());
        let s = compress(kb, &bare, thresholds);
        full_text += serialize_text(&bare).len() as u64;
        filt_text += render_text(&s).len() as u64;
        full_wire += encode_stream(&crate::two_stage::full_stream(&bare), &cb).len() as u64;
        filt_wire += encode_stream(&s, &cb).len() as u64;
    }
    if filt_text == 0 || filt_wire == 0 {
        return Err(HarnessError::Config("test corpus is empty".into()));
    }
    let gain_utf8 = full_text as f64 / filt_text as f64;
    let gain_wire = full_wire as f64 / filt_wire as f64;
    let n = test.len().max(1) as u64;
    let full_bits = (8 * full_text).div_ceil(n);
    let filt_bits = (8 * filt_text).div_ceil(n);

    let mut table = Table::new(&[
        "snr_db",
        "rate",
        "semantic_msgs_s",
        "baseline_msgs_s",
        "semantic_over_baseline",
        "full_text_msgs_s",
        "filtered_text_msgs_s",
    ]);
    let mut rows = Vec::new();
    for step in &profile.schedule {
        let sem = throughput(profile, step.snr_db, config.semantic_bits)?;
        let base = throughput(profile, step.snr_db, config.baseline_bits)?;
        table.push(vec![
            json!(step.snr_db),
            json!(format!("{}/{}", step.rate_num, step.rate_den)),
            json!(sem),
            json!(base),
            json!(sem / base),
            json!(throughput(profile, step.snr_db, full_bits)?),
            json!(throughput(profile, step.snr_db, filt_bits)?),
        ]);
        rows.push((step.snr_db, sem, base));
    }
    let mut payload = Table::new(&["basis", "full_bytes", "filtered_bytes", "gain"]);
    payload.push(vec![json!("utf8"), json!(full_text), json!(filt_text), json!(gain_utf8)]);
    payload.push(vec![json!("wire"), json!(full_wire), json!(filt_wire), json!(gain_wire)]);
    let mut report = ExperimentReport::new(
        "throughput",
        json!({"profile": profile, "config": config, "test_graphs": test.len(),
               "theta_r": thresholds.theta_r, "theta_t": thresholds.theta_t}),
    );
    report.tables.insert("throughput".into(), table);
    report.tables.insert("payload".into(), payload);
    Ok(ThroughputOutcome {
        report,
        rows,
        gain_utf8,
        gain_wire,
    })
}

/// Shared knowledge base of all profiles at one training size and seed.
pub fn shared_kb(
    model: &CategoryModel,
    profiles: &[CategoryProfile],
    size: usize,
    seed: u64,
) -> Result<KnowledgeBase, HarnessError> {
    let mut shared: Option<KnowledgeBase> = None;
    for (u, p) in profiles.iter().enumerate() {
        let kb = KnowledgeBase::build(&user_corpus(model, p, u, size, seed)?)?;
        shared = Some(match shared {
            None => kb,
            Some(s) => s.merge(&kb)?,
        });
    }
    shared.ok_or_else(|| HarnessError::Config("no profiles".into()))
}
