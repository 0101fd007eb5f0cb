//! Scene-graph compression against a shared knowledge base, with recovery,
//! entropy coding, link-level accounting and reproducible experiment drivers.

pub mod entropy;
pub mod harness;
pub mod knowledge_base;
pub mod link;
pub mod multi_round;
pub mod scene_graph;
pub mod two_stage;
pub mod wire;

pub use entropy::{Codebook, EntropyError};
pub use knowledge_base::{Distribution, KbError, KnowledgeBase};
pub use link::{LinkError, LinkProfile, Modulation, NoiseSeed};
pub use multi_round::{compress_multi, recover_multi, MultiRoundElement, MultiRoundError, MultiRoundStream};
pub use scene_graph::{BoundingBox, ClassTriplet, Corpus, EntityRef, SceneGraph, SceneGraphError, Triplet};
pub use two_stage::{compress, recover, CodecError, CompressedElement, CompressedStream, RatioBasis, Thresholds};
