//! Synthetic corpora and experiment drivers.

mod categories;
mod experiments;
mod report;
mod sensors;
mod shapes;

pub use categories::{
    synth_categories, CategoryModel, CategoryProfile, CategoryVocab, Vocabularies, CONFIG_DIR_ENV, DEFAULT_LAW_SEED,
    DEFAULT_ZIPF,
};
pub use experiments::{
    mean_ratio, run_federation, run_federation_seeds, run_load_experiment, run_shapes_experiment,
    run_throughput_experiment, shared_kb, test_corpus, user_corpus, CodecKind, FederationConfig, FederationOutcome,
    FederationPoint, LoadConfig, LoadOutcome, ShapesOutcome, ThroughputConfig, ThroughputOutcome,
};
pub use report::{ExperimentReport, Table};
pub use sensors::{sensor_names, synth_sensors, synth_sensors_with, SensorConfig};
pub use shapes::{synth_shapes, SHAPES, SHAPE_RELATIONS};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::knowledge_base::KbError;
use crate::link::LinkError;
use crate::multi_round::{LoadError, MultiRoundError};
use crate::scene_graph::SceneGraphError;
use crate::two_stage::CodecError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot read configuration {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Graph(#[from] SceneGraphError),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    MultiRound(#[from] MultiRoundError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Link(#[from] LinkError),
}

/// Generator for sub-run `stream` of a seeded run.
pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
