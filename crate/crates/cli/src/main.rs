//! `sgcodec` command-line driver.
//!
//! Exit codes: 0 on success, 1 on usage or validation errors, 2 on I/O errors.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use sgcodec::harness::{
    run_federation_seeds, run_load_experiment, run_shapes_experiment, run_throughput_experiment, shared_kb,
    synth_categories, synth_sensors_with, test_corpus, CategoryModel, CategoryProfile, CodecKind, ExperimentReport,
    FederationConfig, HarnessError, LoadConfig, SensorConfig, Table, ThroughputConfig, Vocabularies,
};
use sgcodec::link::{ber_estimate, corrupt_payload, rows_to_csv, throughput, LinkRow};
use sgcodec::multi_round::{decode_multi, encode_multi, fit_piecewise, profile_load_curve, MultiRoundConfig};
use sgcodec::scene_graph::parse_annotations;
use sgcodec::two_stage::{compression_ratio, decode_stream, encode_stream};
use sgcodec::{
    compress, recover, recover_multi, ClassTriplet, Codebook, Corpus, KnowledgeBase, LinkProfile, Modulation,
    NoiseSeed, RatioBasis, SceneGraph, Thresholds,
};

#[derive(Debug)]
enum CliError {
    Invalid(String),
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Io { .. } => 2,
        }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "error: {m}"),
            CliError::Io { path, source } => write!(f, "error: {}: {source}", path.display()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn invalid(e: impl Display) -> CliError {
    CliError::Invalid(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "sgcodec", version, about = "Knowledge-base driven scene-graph compression toolkit")]
struct Cli {
    /// Indent JSON output.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build, merge or inspect knowledge bases.
    #[command(subcommand)]
    Kb(KbCommand),
    /// Two-stage compression of one scene graph.
    Compress(CompressArgs),
    /// Recover a scene graph from a two-stage stream.
    Recover(RecoverArgs),
    /// Multi-round compression of class-level triplet messages.
    #[command(subcommand)]
    Mr(MrCommand),
    /// Channel and link accounting.
    #[command(subcommand)]
    Link(LinkCommand),
    /// Synthetic corpora.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Experiment drivers.
    #[command(subcommand)]
    Exp(ExpCommand),
}

#[derive(Debug, Subcommand)]
enum KbCommand {
    /// Knowledge base from an annotation document, scene-graph JSON or sample list.
    Build {
        #[arg(long = "in", value_name = "FILE", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Entrywise sum of knowledge bases, in argument order.
    Merge {
        #[arg(required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Table sizes and top entries.
    Stats {
        #[arg(long)]
        kb: PathBuf,
    },
}

#[derive(Debug, Args)]
struct Threshold {
    #[arg(long, default_value_t = 0.5)]
    theta_r: f64,
    #[arg(long, default_value_t = 0.5)]
    theta_t: f64,
}

impl Threshold {
    fn resolve(&self) -> Result<Thresholds> {
        Thresholds::new(self.theta_r, self.theta_t).map_err(invalid)
    }
}

#[derive(Debug, Args)]
struct CompressArgs {
    #[arg(long)]
    kb: PathBuf,
    /// Scene-graph JSON or annotation document.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Graph to select when the input holds several.
    #[arg(long)]
    image_id: Option<String>,
    #[command(flatten)]
    thresholds: Threshold,
}

#[derive(Debug, Args)]
struct RecoverArgs {
    #[arg(long)]
    kb: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Image id to attach to the recovered graph.
    #[arg(long, default_value = "")]
    image_id: String,
}

#[derive(Debug, Subcommand)]
enum MrCommand {
    /// Compress a JSON list of `[head, relation, tail]` triplets.
    Compress {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = sgcodec::multi_round::DEFAULT_MAX_ROUNDS)]
        max_rounds: u32,
    },
    /// Recover the triplet list from a multi-round stream.
    Recover {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Runtime against ratio over a sweep of round budgets, with a segmented fit.
    Profile {
        #[arg(long)]
        kb: PathBuf,
        /// JSON list of messages, each a list of triplets.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [1u32, 2, 3, 4])]
        sweep: Vec<u32>,
        #[arg(long, default_value_t = sgcodec::multi_round::DEFAULT_REPETITIONS)]
        repetitions: usize,
        #[arg(long, default_value_t = 2)]
        segments: usize,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModulationArg {
    Bpsk,
    Qpsk,
}

impl From<ModulationArg> for Modulation {
    fn from(m: ModulationArg) -> Self {
        match m {
            ModulationArg::Bpsk => Modulation::Bpsk,
            ModulationArg::Qpsk => Modulation::Qpsk,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct Output {
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum LinkCommand {
    /// Monte-Carlo bit error rate over AWGN.
    Ber {
        #[arg(long, value_enum, default_value_t = ModulationArg::Bpsk)]
        modulation: ModulationArg,
        /// Eb/N0 points in dB.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        ebn0: Vec<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        bits: u64,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Messages per second for a payload size.
    Throughput {
        /// Link profile JSON; defaults to 5 MHz QPSK.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long, allow_negative_numbers = true)]
        snr: f64,
        #[arg(long)]
        payload_bits: u64,
    },
    /// Pass a file through a BPSK channel and write the hard decisions.
    Corrupt {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        ebn0: f64,
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Debug, Subcommand)]
enum SynthCommand {
    /// Two or three shapes per scene with spatial relations.
    Shapes {
        #[arg(long, default_value_t = 25)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Category-skewed scenes.
    Categories {
        /// Comma-separated `category=weight` pairs.
        #[arg(long, value_parser = parse_profile)]
        profile: CategoryProfile,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "synth")]
        id_prefix: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-minute sensor samples.
    Sensors {
        #[arg(long, default_value_t = 2000)]
        minutes: usize,
        #[arg(long, default_value_t = 1)]
        residents: usize,
        #[arg(long)]
        seed: u64,
        /// Sensor process configuration JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CodecArg {
    TwoStage,
    MultiRound,
}

#[derive(Debug, Subcommand)]
enum ExpCommand {
    /// Local versus shared knowledge bases across training sizes.
    Federation {
        /// First seed; runs use `seed..seed + seeds`.
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, value_delimiter = ',', default_values_t = [50usize, 100, 200, 500, 1000])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        n_test: usize,
        #[arg(long, value_enum, default_value_t = CodecArg::TwoStage)]
        codec: CodecArg,
        #[command(flatten)]
        thresholds: Threshold,
        #[command(flatten)]
        output: Output,
    },
    /// Multi-round runtime curve on sensor data.
    Load {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        minutes: usize,
        #[arg(long, default_value_t = 1)]
        residents: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [1u32, 2, 3, 4])]
        sweep: Vec<u32>,
        #[arg(long, default_value_t = sgcodec::multi_round::DEFAULT_REPETITIONS)]
        repetitions: usize,
        #[arg(long, default_value_t = 2)]
        segments: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Throughput per rate step and filtered-versus-full payload gain.
    Throughput {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Training graphs per user for the shared knowledge base.
        #[arg(long, default_value_t = 1000)]
        size: usize,
        #[arg(long, default_value_t = 100)]
        n_test: usize,
        #[arg(long, default_value_t = 2400)]
        semantic_bits: u64,
        #[arg(long, default_value_t = 50 * 1024 * 8)]
        baseline_bits: u64,
        #[command(flatten)]
        thresholds: Threshold,
        #[command(flatten)]
        output: Output,
    },
    /// Shapes corpus split into training and test graphs.
    Shapes {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 25)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        n_train: usize,
        #[command(flatten)]
        thresholds: Threshold,
        #[command(flatten)]
        output: Output,
    },
}

fn parse_profile(s: &str) -> std::result::Result<CategoryProfile, String> {
    let mut weights = BTreeMap::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("expected category=weight, got {part:?}"))?;
        let w: f64 = v.trim().parse().map_err(|e| format!("weight of {k:?}: {e}"))?;
        weights.insert(k.trim().to_string(), w);
    }
    if weights.is_empty() {
        return Err("profile is empty".into());
    }
    Ok(CategoryProfile { weights })
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json(value: &impl serde::Serialize, pretty: bool) -> String {
    let mut s = if pretty {
        serde_json::to_string_pretty(value)
    } else {
        serde_json::to_string(value)
    }
    .expect("value serializes");
    s.push('\n');
    s
}

fn emit_report(report: &ExperimentReport, output: &Output, pretty: bool) -> Result<()> {
    let text = match output.format {
        Format::Json => {
            let mut s = report.to_json(pretty);
            s.push('\n');
            s
        }
        Format::Csv => report.to_csv(),
    };
    emit(output.out.as_deref(), &text)
}

fn load_kb(path: &Path) -> Result<KnowledgeBase> {
    KnowledgeBase::load(&read(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn codebook(kb: &KnowledgeBase) -> Result<Codebook> {
    Codebook::build(&kb.vocabulary).map_err(invalid)
}

/// Annotation document, a single scene graph, or a list of scene graphs.
fn read_graphs(path: &Path) -> Result<Corpus> {
    let bytes = read(path)?;
    let value: Value = serde_json::from_slice(&bytes).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let corpus = if value.get("images").is_some() {
        parse_annotations(&bytes).map_err(invalid)?
    } else if value.is_array() {
        Corpus::new(serde_json::from_value(value).map_err(invalid)?)
    } else {
        Corpus::new(vec![serde_json::from_value::<SceneGraph>(value).map_err(invalid)?])
    };
    corpus.validate().map_err(invalid)?;
    Ok(corpus)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_slice(&read(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn link_profile(path: Option<&Path>) -> Result<LinkProfile> {
    match path {
        Some(p) => LinkProfile::from_json(&read(p)?).map_err(invalid),
        None => Ok(LinkProfile::nr_5mhz_qpsk()),
    }
}

fn model() -> Result<CategoryModel> {
    let vocab = Vocabularies::from_env().map_err(|e| match e {
        HarnessError::Io { path, source } => CliError::Io {
            path: path.into(),
            source,
        },
        other => invalid(other),
    })?;
    CategoryModel::new(vocab, sgcodec::harness::DEFAULT_ZIPF, sgcodec::harness::DEFAULT_LAW_SEED).map_err(invalid)
}

fn run_kb(cmd: KbCommand, pretty: bool) -> Result<()> {
    match cmd {
        KbCommand::Build { inputs, out } => {
            let mut kb = KnowledgeBase::empty();
            for path in &inputs {
                let bytes = read(path)?;
                let part = match serde_json::from_slice::<Vec<Vec<ClassTriplet>>>(&bytes) {
                    Ok(samples) => KnowledgeBase::from_samples(samples),
                    Err(_) => KnowledgeBase::build(&read_graphs(path)?).map_err(invalid)?,
                };
                kb = kb.merge(&part).map_err(invalid)?;
            }
            if kb.sample_count() == 0 {
                return Err(invalid("inputs contain no graphs"));
            }
            write(&out, &kb.persist())
        }
        KbCommand::Merge { inputs, out } => {
            let mut kb = KnowledgeBase::empty();
            for path in &inputs {
                kb = kb.merge(&load_kb(path)?).map_err(invalid)?;
            }
            write(&out, &kb.persist())
        }
        KbCommand::Stats { kb } => {
            let kb = load_kb(&kb)?;
            let mut top: Vec<(&String, &u64)> = kb.vocabulary.iter().collect();
            top.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
            top.truncate(10);
            let stats = json!({
                "version": kb.version,
                "samples": kb.sample_count(),
                "triplets": kb.triplet_count(),
                "pairs": kb.relation_table.len(),
                "heads": kb.cooccurrence_table.len(),
                "vocabulary": kb.vocabulary.len(),
                "top_tokens": top.iter().map(|(t, c)| json!([t, c])).collect::<Vec<_>>(),
            });
            emit(None, &to_json(&stats, pretty))
        }
    }
}

fn run_compress(args: CompressArgs, pretty: bool) -> Result<()> {
    let th = args.thresholds.resolve()?;
    let kb = load_kb(&args.kb)?;
    let corpus = read_graphs(&args.input)?;
    let graph = match &args.image_id {
        Some(id) => corpus
            .graphs
            .iter()
            .find(|g| &g.image_id == id)
            .ok_or_else(|| invalid(format!("no graph with image id {id:?}")))?,
        None if corpus.len() == 1 => &corpus.graphs[0],
        None => return Err(invalid("input holds several graphs; select one with --image-id")),
    };
    let cb = codebook(&kb)?;
    let stream = compress(&kb, graph, th);
    let bytes = encode_stream(&stream, &cb);
    write(&args.out, &bytes)?;
    let summary = json!({
        "config": {"kb": args.kb, "in": args.input, "out": args.out, "image_id": graph.image_id,
                   "theta_r": th.theta_r, "theta_t": th.theta_t},
        "triplets": graph.triplets.len(),
        "relations_elided": stream.relations_elided(),
        "tails_elided": stream.tails_elided(),
        "rho_tokens": compression_ratio(graph, &stream, RatioBasis::Tokens).map_err(invalid)?,
        "rho_utf8": compression_ratio(graph, &stream, RatioBasis::Utf8).map_err(invalid)?,
        "bytes": bytes.len(),
    });
    emit(None, &to_json(&summary, pretty))
}

fn run_recover(args: RecoverArgs, pretty: bool) -> Result<()> {
    let kb = load_kb(&args.kb)?;
    let cb = codebook(&kb)?;
    let stream = decode_stream(&read(&args.input)?, &cb).map_err(invalid)?;
    let mut graph = recover(&kb, &stream).map_err(invalid)?;
    graph.image_id = args.image_id;
    write(&args.out, to_json(&graph, pretty).as_bytes())
}

fn run_mr(cmd: MrCommand, pretty: bool) -> Result<()> {
    match cmd {
        MrCommand::Compress {
            kb,
            input,
            out,
            max_rounds,
        } => {
            let kb = load_kb(&kb)?;
            let triplets: Vec<ClassTriplet> = read_json(&input)?;
            let stream = sgcodec::multi_round::compress_multi_with(
                &kb,
                &triplets,
                MultiRoundConfig {
                    max_rounds,
                    audit: false,
                },
            )
            .map_err(invalid)?;
            let bytes = encode_multi(&stream, &codebook(&kb)?);
            write(&out, &bytes)?;
            let per_round: Vec<usize> = (1..=stream.rounds_executed).map(|n| stream.omitted_after_round(n)).collect();
            let summary = json!({
                "config": {"max_rounds": max_rounds},
                "triplets": triplets.len(),
                "rounds_executed": stream.rounds_executed,
                "omitted_after_round": per_round,
                "rho_tokens": stream.ratio(),
                "rho_wire": stream.wire_ratio(),
                "bytes": bytes.len(),
            });
            emit(None, &to_json(&summary, pretty))
        }
        MrCommand::Recover { kb, input, out } => {
            let kb = load_kb(&kb)?;
            let stream = decode_multi(&read(&input)?, &codebook(&kb)?).map_err(invalid)?;
            let triplets = recover_multi(&kb, &stream).map_err(invalid)?;
            write(&out, to_json(&triplets, pretty).as_bytes())
        }
        MrCommand::Profile {
            kb,
            input,
            sweep,
            repetitions,
            segments,
            output,
        } => {
            let kb_data = load_kb(&kb)?;
            let messages: Vec<Vec<ClassTriplet>> = read_json(&input)?;
            let curve = profile_load_curve(&kb_data, &messages, &sweep, repetitions).map_err(invalid)?;
            let mut report = ExperimentReport::new(
                "profile",
                json!({"kb": kb, "in": input, "sweep": sweep, "repetitions": repetitions, "segments": segments}),
            );
            let mut c = Table::new(&["rho", "runtime_s", "rounds"]);
            for s in &curve.samples {
                c.push(vec![json!(s.rho), json!(s.runtime_s), json!(s.rounds)]);
            }
            report.tables.insert("curve".into(), c);
            let mut f = Table::new(&["segment", "A", "B", "D"]);
            match fit_piecewise(&curve, segments) {
                Ok(m) => {
                    for (i, s) in m.segments.iter().enumerate() {
                        f.push(vec![json!(i + 1), json!(s.slope), json!(s.intercept), json!(s.left)]);
                    }
                }
                Err(e) => eprintln!("warning: no segmented fit: {e}"),
            }
            report.tables.insert("fit".into(), f);
            emit_report(&report, &output, pretty)
        }
    }
}

fn run_link(cmd: LinkCommand, pretty: bool) -> Result<()> {
    match cmd {
        LinkCommand::Ber {
            modulation,
            ebn0,
            bits,
            seed,
            output,
        } => {
            let mut rows = Vec::new();
            for (i, &e) in ebn0.iter().enumerate() {
                let r = ber_estimate(modulation.into(), e, bits, NoiseSeed::new(seed.wrapping_add(i as u64)))
                    .map_err(invalid)?;
                rows.push(LinkRow {
                    snr_db: e,
                    value: r.ber,
                    n: r.n_bits,
                    stderr: r.stderr,
                });
            }
            let text = match output.format {
                Format::Csv => rows_to_csv(&rows),
                Format::Json => to_json(
                    &json!({"config": {"modulation": Modulation::from(modulation), "ebn0_db": ebn0,
                                       "bits": bits, "seed": seed},
                            "rows": rows}),
                    pretty,
                ),
            };
            emit(output.out.as_deref(), &text)
        }
        LinkCommand::Throughput {
            profile,
            snr,
            payload_bits,
        } => {
            let p = link_profile(profile.as_deref())?;
            let t = throughput(&p, snr, payload_bits).map_err(invalid)?;
            println!("{t:.1}");
            Ok(())
        }
        LinkCommand::Corrupt {
            input,
            out,
            ebn0,
            seed,
        } => {
            let bytes = read(&input)?;
            let c = corrupt_payload(&bytes, 8 * bytes.len() as u64, ebn0, NoiseSeed::new(seed)).map_err(invalid)?;
            write(&out, &c.bytes)?;
            let summary = json!({"config": {"ebn0_db": ebn0, "seed": seed}, "bits": 8 * bytes.len(),
                                 "bit_errors": c.bit_errors});
            emit(None, &to_json(&summary, pretty))
        }
    }
}

fn run_synth(cmd: SynthCommand, pretty: bool) -> Result<()> {
    match cmd {
        SynthCommand::Shapes { n, seed, out } => {
            if n == 0 {
                return Err(invalid("--n must be at least 1"));
            }
            let corpus = sgcodec::harness::synth_shapes(n, seed);
            emit_corpus(&corpus, out.as_deref(), pretty)
        }
        SynthCommand::Categories {
            profile,
            n,
            seed,
            id_prefix,
            out,
        } => {
            let corpus = synth_categories(&model()?, &profile, n, seed, &id_prefix).map_err(invalid)?;
            emit_corpus(&corpus, out.as_deref(), pretty)
        }
        SynthCommand::Sensors {
            minutes,
            residents,
            seed,
            config,
            out,
        } => {
            let cfg: SensorConfig = match config {
                Some(p) => read_json(&p)?,
                None => SensorConfig::default(),
            };
            let samples = synth_sensors_with(&cfg, minutes, residents, seed).map_err(invalid)?;
            emit(out.as_deref(), &to_json(&samples, pretty))
        }
    }
}

fn emit_corpus(corpus: &Corpus, out: Option<&Path>, pretty: bool) -> Result<()> {
    let doc: Value = serde_json::from_slice(&corpus.to_annotation_json()).expect("annotation document is JSON");
    emit(out, &to_json(&doc, pretty))
}

fn run_exp(cmd: ExpCommand, pretty: bool) -> Result<()> {
    match cmd {
        ExpCommand::Federation {
            seed,
            seeds,
            sizes,
            n_test,
            codec,
            thresholds,
            output,
        } => {
            let th = thresholds.resolve()?;
            let config = FederationConfig {
                n_test,
                training_sizes: sizes,
                seeds: (seed..seed + seeds.max(1)).collect(),
                codec: match codec {
                    CodecArg::TwoStage => CodecKind::TwoStage,
                    CodecArg::MultiRound => CodecKind::MultiRound,
                },
                theta_r: th.theta_r,
                theta_t: th.theta_t,
                ..FederationConfig::default()
            };
            let o = run_federation_seeds(&model()?, &config).map_err(invalid)?;
            emit_report(&o.report, &output, pretty)
        }
        ExpCommand::Load {
            seed,
            minutes,
            residents,
            sweep,
            repetitions,
            segments,
            output,
        } => {
            let config = LoadConfig {
                n_minutes: minutes,
                n_residents: residents,
                sweep,
                repetitions,
                segments,
                ..LoadConfig::default()
            };
            let o = run_load_experiment(&config, seed).map_err(invalid)?;
            emit_report(&o.report, &output, pretty)
        }
        ExpCommand::Throughput {
            seed,
            profile,
            size,
            n_test,
            semantic_bits,
            baseline_bits,
            thresholds,
            output,
        } => {
            let th = thresholds.resolve()?;
            let p = link_profile(profile.as_deref())?;
            let m = model()?;
            let fed = FederationConfig::default();
            let kb = shared_kb(&m, &fed.profiles, size, seed).map_err(invalid)?;
            let test = test_corpus(&m, &fed.test_profile, n_test, seed).map_err(invalid)?;
            let config = ThroughputConfig {
                semantic_bits,
                baseline_bits,
            };
            let mut o = run_throughput_experiment(&p, &config, &kb, &test, th).map_err(invalid)?;
            if let Value::Object(cfg) = &mut o.report.config {
                cfg.insert("seed".into(), json!(seed));
                cfg.insert("training_size".into(), json!(size));
            }
            emit_report(&o.report, &output, pretty)
        }
        ExpCommand::Shapes {
            seed,
            n,
            n_train,
            thresholds,
            output,
        } => {
            let o = run_shapes_experiment(n, n_train, thresholds.resolve()?, seed).map_err(invalid)?;
            emit_report(&o.report, &output, pretty)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let pretty = cli.pretty;
    match cli.command {
        Command::Kb(c) => run_kb(c, pretty),
        Command::Compress(a) => run_compress(a, pretty),
        Command::Recover(a) => run_recover(a, pretty),
        Command::Mr(c) => run_mr(c, pretty),
        Command::Link(c) => run_link(c, pretty),
        Command::Synth(c) => run_synth(c, pretty),
        Command::Exp(c) => run_exp(c, pretty),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
