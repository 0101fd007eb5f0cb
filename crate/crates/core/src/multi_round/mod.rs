//! Multi-round compression over class-level triplets.
//!
//! Round 1 elides every relation that the unconditional distribution
//! predicts. Round `n >= 2` retries the remaining triplets, conditioning on
//! `n - 1` triplets of the same message that were elided in earlier rounds;
//! the successful context travels as a list of element indices.

mod load;

pub use load::{
    fit_piecewise, profile_load_curve, LoadCurve, LoadError, LoadSample, PiecewiseModel, Segment, DEFAULT_REPETITIONS,
};

use std::collections::BTreeSet;

use thiserror::Error;

use crate::entropy::{Codebook, TokenReader, TokenWriter};
use crate::knowledge_base::{KnowledgeBase, SampleIndex, SampleSet};
use crate::scene_graph::ClassTriplet;
use crate::wire::{pack_tags, put_varint, unpack_tags, ByteReader, WireError};

pub const MAGIC: &str = "SGMR";
pub const STREAM_VERSION: u8 = 1;
pub const DEFAULT_MAX_ROUNDS: u32 = 4;

const TAG_NEW: u8 = 0;
const TAG_OMIT1: u8 = 1;
const TAG_REF_OMIT: u8 = 2;
const TAG_RETAINED: u8 = 3;

#[derive(Debug, Error, PartialEq)]
pub enum MultiRoundError {
    #[error("malformed stream at element {index}: {reason}")]
    Malformed { index: usize, reason: String },
    #[error("element {index} cannot be recovered: {reason}")]
    Unrecoverable { index: usize, reason: String },
    #[error("max_rounds must be at least 1")]
    ZeroRounds,
    #[error(transparent)]
    Wire(#[from] WireError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MultiRoundElement {
    /// Pair or relation unknown to the knowledge base.
    New(ClassTriplet),
    /// Relation predicted unconditionally.
    Omit1 { head: String, tail: String },
    /// Relation predicted given the triplets at `context_indices`.
    RefOmit {
        head: String,
        tail: String,
        round: u32,
        context_indices: Vec<usize>,
    },
    /// Known but not predictable within the round budget.
    Retained(ClassTriplet),
}

impl MultiRoundElement {
    fn tag(&self) -> u8 {
        match self {
            MultiRoundElement::New(_) => TAG_NEW,
            MultiRoundElement::Omit1 { .. } => TAG_OMIT1,
            MultiRoundElement::RefOmit { .. } => TAG_REF_OMIT,
            MultiRoundElement::Retained(_) => TAG_RETAINED,
        }
    }

    /// Round in which the relation was elided, if it was.
    pub fn omit_round(&self) -> Option<u32> {
        match self {
            MultiRoundElement::Omit1 { .. } => Some(1),
            MultiRoundElement::RefOmit { round, .. } => Some(*round),
            _ => None,
        }
    }

    /// Label/relation tokens carried by the element.
    pub fn token_cost(&self) -> u64 {
        match self {
            MultiRoundElement::New(_) | MultiRoundElement::Retained(_) => 3,
            MultiRoundElement::Omit1 { .. } | MultiRoundElement::RefOmit { .. } => 2,
        }
    }

    /// Tokens plus one unit for the round and one per context index.
    pub fn wire_units(&self) -> u64 {
        match self {
            MultiRoundElement::RefOmit { context_indices, .. } => 3 + context_indices.len() as u64,
            other => other.token_cost(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiRoundStream {
    pub version: u8,
    pub elements: Vec<MultiRoundElement>,
    pub rounds_executed: u32,
}

impl MultiRoundStream {
    pub fn token_count(&self) -> u64 {
        self.elements.iter().map(MultiRoundElement::token_cost).sum()
    }

    /// Token-basis ratio against three tokens per source triplet; 1 for an empty message.
    pub fn ratio(&self) -> f64 {
        if self.elements.is_empty() {
            return 1.0;
        }
        self.token_count() as f64 / (3 * self.elements.len()) as f64
    }

    /// Ratio that also charges round numbers and context indices.
    pub fn wire_ratio(&self) -> f64 {
        if self.elements.is_empty() {
            return 1.0;
        }
        let units: u64 = self.elements.iter().map(MultiRoundElement::wire_units).sum();
        units as f64 / (3 * self.elements.len()) as f64
    }

    /// Size of the omitted set after round `n`.
    pub fn omitted_after_round(&self, n: u32) -> usize {
        self.elements
            .iter()
            .filter(|e| e.omit_round().is_some_and(|r| r <= n))
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultiRoundConfig {
    pub max_rounds: u32,
    /// Re-derive every elided relation with the recovery query while compressing.
    pub audit: bool,
}

impl Default for MultiRoundConfig {
    fn default() -> Self {
        MultiRoundConfig {
            max_rounds: DEFAULT_MAX_ROUNDS,
            audit: false,
        }
    }
}

pub fn compress_multi(
    kb: &KnowledgeBase,
    triplets: &[ClassTriplet],
    max_rounds: u32,
) -> Result<MultiRoundStream, MultiRoundError> {
    compress_multi_with(
        kb,
        triplets,
        MultiRoundConfig {
            max_rounds,
            audit: cfg!(debug_assertions),
        },
    )
}

enum Slot {
    New,
    Mid,
    Omitted { round: u32, context: Vec<usize> },
}

pub fn compress_multi_with(
    kb: &KnowledgeBase,
    triplets: &[ClassTriplet],
    config: MultiRoundConfig,
) -> Result<MultiRoundStream, MultiRoundError> {
    if config.max_rounds == 0 {
        return Err(MultiRoundError::ZeroRounds);
    }
    let mut slots: Vec<Slot> = triplets
        .iter()
        .map(|t| {
            if !kb.has_relation(&t.head, &t.relation, &t.tail) {
                Slot::New
            } else if kb.relation_argmax(&t.head, &t.tail).map(|(r, _)| r) == Some(t.relation.as_str()) {
                Slot::Omitted {
                    round: 1,
                    context: Vec::new(),
                }
            } else {
                Slot::Mid
            }
        })
        .collect();

    let mut rounds = 1;
    let mut new_omissions = slots.iter().any(|s| matches!(s, Slot::Omitted { .. }));
    let index = kb.index();
    while rounds < config.max_rounds && new_omissions {
        let round = rounds + 1;
        let omitted: Vec<usize> = (0..slots.len())
            .filter(|&i| matches!(slots[i], Slot::Omitted { .. }))
            .collect();
        rounds = round;
        new_omissions = false;
        let depth = (round - 1) as usize;
        if omitted.len() < depth {
            break;
        }
        let context_sets: Vec<&SampleSet> = omitted
            .iter()
            .map(|&i| &index.by_triplet[&triplets[i]])
            .collect();
        let mid: Vec<usize> = (0..slots.len()).filter(|&i| matches!(slots[i], Slot::Mid)).collect();
        let mut found = Vec::new();
        for i in mid {
            if let Some(choice) = search_context(index, &triplets[i], &context_sets, depth) {
                let context: Vec<usize> = choice.iter().map(|&c| omitted[c]).collect();
                found.push((i, context));
            }
        }
        for (i, context) in found {
            slots[i] = Slot::Omitted { round, context };
            new_omissions = true;
        }
    }

    let elements: Vec<MultiRoundElement> = slots
        .into_iter()
        .zip(triplets)
        .map(|(slot, t)| match slot {
            Slot::New => MultiRoundElement::New(t.clone()),
            Slot::Mid => MultiRoundElement::Retained(t.clone()),
            Slot::Omitted { round: 1, .. } => MultiRoundElement::Omit1 {
                head: t.head.clone(),
                tail: t.tail.clone(),
            },
            Slot::Omitted { round, context } => MultiRoundElement::RefOmit {
                head: t.head.clone(),
                tail: t.tail.clone(),
                round,
                context_indices: context,
            },
        })
        .collect();
    let stream = MultiRoundStream {
        version: STREAM_VERSION,
        elements,
        rounds_executed: rounds,
    };
    if config.audit {
        audit(kb, triplets, &stream);
    }
    Ok(stream)
}

/// Panics unless every elided relation equals what recovery will predict.
fn audit(kb: &KnowledgeBase, triplets: &[ClassTriplet], stream: &MultiRoundStream) {
    for (i, el) in stream.elements.iter().enumerate() {
        let t = &triplets[i];
        let predicted = match el {
            MultiRoundElement::Omit1 { .. } => kb.relation_argmax(&t.head, &t.tail).map(|(r, _)| r.to_string()),
            MultiRoundElement::RefOmit { context_indices, .. } => {
                let ctx: Vec<ClassTriplet> = context_indices.iter().map(|&c| triplets[c].clone()).collect();
                kb.conditional_relation(&t.head, &t.tail, &ctx)
                    .argmax_label()
                    .map(str::to_string)
            }
            _ => continue,
        };
        assert_eq!(
            predicted.as_deref(),
            Some(t.relation.as_str()),
            "audit: element {i} elided a relation recovery would not reproduce"
        );
    }
}

/// First context, in ascending lexicographic order of positions into
/// `contexts`, under which `target` is the conditional argmax.
fn search_context(
    index: &SampleIndex,
    target: &ClassTriplet,
    contexts: &[&SampleSet],
    depth: usize,
) -> Option<Vec<usize>> {
    let (pair_set, relations) = index.by_pair.get(&(target.head.clone(), target.tail.clone()))?;
    let rivals: Vec<(&String, &SampleSet)> = relations
        .iter()
        .filter(|r| **r != target.relation)
        .map(|r| {
            let key = ClassTriplet::new(&target.head, r, &target.tail);
            (r, &index.by_triplet[&key])
        })
        .collect();
    let own = &index.by_triplet[target];
    // Restricting to samples with the target triplet prunes as soon as it
    // can no longer be counted; rival counts use the same prefix sets.
    let mut frames: Vec<SampleSet> = vec![pair_set.clone(); depth + 1];
    let mut chosen = Vec::with_capacity(depth);
    let ctx = Search {
        own,
        rivals: &rivals,
        relation: &target.relation,
        contexts,
        depth,
    };
    if ctx.dfs(&mut frames, &mut chosen, 0) {
        Some(chosen)
    } else {
        None
    }
}

struct Search<'a> {
    own: &'a SampleSet,
    rivals: &'a [(&'a String, &'a SampleSet)],
    relation: &'a str,
    contexts: &'a [&'a SampleSet],
    depth: usize,
}

impl Search<'_> {
    fn dfs(&self, frames: &mut [SampleSet], chosen: &mut Vec<usize>, start: usize) -> bool {
        let level = chosen.len();
        if level == self.depth {
            return self.wins(&frames[level]);
        }
        let slack = self.depth - level - 1;
        for c in start..self.contexts.len().saturating_sub(slack) {
            let (head, tail) = frames.split_at_mut(level + 1);
            head[level].intersect_into(self.contexts[c], &mut tail[0]);
            if tail[0].intersection_count(self.own) == 0 {
                continue;
            }
            chosen.push(c);
            if self.dfs(frames, chosen, c + 1) {
                return true;
            }
            chosen.pop();
        }
        false
    }

    /// Argmax with ties broken toward the smaller label.
    fn wins(&self, restricted: &SampleSet) -> bool {
        let own = restricted.intersection_count(self.own);
        own > 0
            && self.rivals.iter().all(|(r, set)| {
                let c = restricted.intersection_count(set);
                if r.as_str() < self.relation {
                    own > c
                } else {
                    own >= c
                }
            })
    }
}

pub fn recover_multi(kb: &KnowledgeBase, stream: &MultiRoundStream) -> Result<Vec<ClassTriplet>, MultiRoundError> {
    let n = stream.elements.len();
    let mut out: Vec<Option<ClassTriplet>> = vec![None; n];
    let mut pending: Vec<(u32, usize)> = Vec::new();
    for (index, el) in stream.elements.iter().enumerate() {
        match el {
            MultiRoundElement::New(t) | MultiRoundElement::Retained(t) => out[index] = Some(t.clone()),
            MultiRoundElement::Omit1 { head, tail } => {
                let (r, _) = kb.relation_argmax(head, tail).ok_or_else(|| MultiRoundError::Unrecoverable {
                    index,
                    reason: format!("no known relation for ({head}, {tail})"),
                })?;
                out[index] = Some(ClassTriplet::new(head, r, tail));
            }
            MultiRoundElement::RefOmit {
                round,
                context_indices,
                ..
            } => {
                check_context(stream, index, *round, context_indices)?;
                pending.push((*round, index));
            }
        }
    }
    pending.sort_unstable();
    for (_, index) in pending {
        let MultiRoundElement::RefOmit {
            head,
            tail,
            context_indices,
            ..
        } = &stream.elements[index]
        else {
            unreachable!()
        };
        let ctx: Vec<ClassTriplet> = context_indices
            .iter()
            .map(|&c| out[c].clone().expect("context recovered in an earlier round"))
            .collect();
        let dist = kb.conditional_relation(head, tail, &ctx);
        let r = dist.argmax_label().ok_or_else(|| MultiRoundError::Unrecoverable {
            index,
            reason: format!("empty conditional distribution for ({head}, {tail})"),
        })?;
        out[index] = Some(ClassTriplet::new(head, r, tail));
    }
    Ok(out.into_iter().map(|t| t.expect("every element recovered")).collect())
}

fn check_context(stream: &MultiRoundStream, index: usize, round: u32, ctx: &[usize]) -> Result<(), MultiRoundError> {
    let bad = |reason: String| MultiRoundError::Malformed { index, reason };
    if round < 2 {
        return Err(bad(format!("reference round {round} below 2")));
    }
    if round > stream.rounds_executed {
        return Err(bad(format!("round {round} exceeds rounds executed {}", stream.rounds_executed)));
    }
    if ctx.len() != (round - 1) as usize {
        return Err(bad(format!("round {round} needs {} context indices, got {}", round - 1, ctx.len())));
    }
    if ctx.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad("context indices not strictly increasing".into()));
    }
    for &c in ctx {
        let earlier = stream
            .elements
            .get(c)
            .and_then(MultiRoundElement::omit_round)
            .is_some_and(|r| r < round);
        if !earlier {
            return Err(bad(format!("context index {c} is not an element omitted before round {round}")));
        }
    }
    Ok(())
}

/// Serializes to the `SGMR` wire format.
///
/// ```text
/// "SGMR" | version u8 | varint elements | varint rounds executed
///        | varint token count | varint payload bits
///        | tag bytes (2 bits per element) | payload bit stream
/// ```
///
/// `New`/`Retained` carry head, relation and tail tokens; `Omit1` head and
/// tail; `RefOmit` head, tail, a varint round and `round - 1` varint indices.
pub fn encode_multi(stream: &MultiRoundStream, cb: &Codebook) -> Vec<u8> {
    let mut w = TokenWriter::new(cb);
    for el in &stream.elements {
        match el {
            MultiRoundElement::New(t) | MultiRoundElement::Retained(t) => {
                w.write_token(&t.head);
                w.write_token(&t.relation);
                w.write_token(&t.tail);
            }
            MultiRoundElement::Omit1 { head, tail } => {
                w.write_token(head);
                w.write_token(tail);
            }
            MultiRoundElement::RefOmit {
                head,
                tail,
                round,
                context_indices,
            } => {
                w.write_token(head);
                w.write_token(tail);
                w.write_varint(u64::from(*round));
                for &c in context_indices {
                    w.write_varint(c as u64);
                }
            }
        }
    }
    let (payload, tokens) = w.finish();
    let mut out = MAGIC.as_bytes().to_vec();
    out.push(stream.version);
    put_varint(&mut out, stream.elements.len() as u64);
    put_varint(&mut out, u64::from(stream.rounds_executed));
    put_varint(&mut out, tokens);
    put_varint(&mut out, payload.bit_len);
    let tags: Vec<u8> = stream.elements.iter().map(MultiRoundElement::tag).collect();
    out.extend(pack_tags(&tags));
    out.extend(payload.bytes);
    out
}

pub fn decode_multi(bytes: &[u8], cb: &Codebook) -> Result<MultiRoundStream, MultiRoundError> {
    let mut r = ByteReader::new(bytes);
    r.expect_magic(MAGIC)?;
    let version = r.byte()?;
    if version != STREAM_VERSION {
        return Err(WireError::UnsupportedVersion(version).into());
    }
    let n = r.varint()? as usize;
    let rounds_executed = u32::try_from(r.varint()?).map_err(|_| MultiRoundError::Malformed {
        index: 0,
        reason: "round count overflow".into(),
    })?;
    let declared_tokens = r.varint()?;
    let bit_len = r.varint()?;
    let tags = unpack_tags(r.take(n.div_ceil(4))?, n);
    let payload_len = usize::try_from(bit_len.div_ceil(8)).map_err(|_| WireError::Truncated(bytes.len()))?;
    let payload = r.take(payload_len)?;
    let trailing = r.rest().len();
    if trailing > 0 {
        return Err(WireError::TrailingBytes(trailing).into());
    }
    let mut tr = TokenReader::new(cb, payload, bit_len).map_err(WireError::from)?;
    let tok = |tr: &mut TokenReader<'_, '_>| tr.read_token().map_err(WireError::from);
    let mut elements = Vec::with_capacity(n.min(1 << 16));
    for (index, &tag) in tags.iter().enumerate() {
        let el = match tag {
            TAG_NEW | TAG_RETAINED => {
                let t = ClassTriplet {
                    head: tok(&mut tr)?,
                    relation: tok(&mut tr)?,
                    tail: tok(&mut tr)?,
                };
                if tag == TAG_NEW {
                    MultiRoundElement::New(t)
                } else {
                    MultiRoundElement::Retained(t)
                }
            }
            TAG_OMIT1 => MultiRoundElement::Omit1 {
                head: tok(&mut tr)?,
                tail: tok(&mut tr)?,
            },
            _ => {
                let head = tok(&mut tr)?;
                let tail = tok(&mut tr)?;
                let round = tr.read_varint().map_err(WireError::from)?;
                let round = u32::try_from(round)
                    .ok()
                    .filter(|&r| r >= 2 && r <= rounds_executed)
                    .ok_or_else(|| MultiRoundError::Malformed {
                        index,
                        reason: format!("invalid reference round {round}"),
                    })?;
                let mut context_indices = Vec::with_capacity((round - 1) as usize);
                for _ in 1..round {
                    let c = tr.read_varint().map_err(WireError::from)?;
                    context_indices.push(usize::try_from(c).unwrap_or(usize::MAX));
                }
                MultiRoundElement::RefOmit {
                    head,
                    tail,
                    round,
                    context_indices,
                }
            }
        };
        elements.push(el);
    }
    tr.expect_end().map_err(WireError::from)?;
    if tr.token_count() != declared_tokens {
        return Err(WireError::TokenCount {
            declared: declared_tokens,
            actual: tr.token_count(),
        }
        .into());
    }
    let stream = MultiRoundStream {
        version,
        elements,
        rounds_executed,
    };
    for (index, el) in stream.elements.iter().enumerate() {
        if let MultiRoundElement::RefOmit {
            round,
            context_indices,
            ..
        } = el
        {
            check_context(&stream, index, *round, context_indices)?;
        }
    }
    Ok(stream)
}

/// Distinct class triplets referenced as contexts anywhere in the stream.
pub fn context_triplets(stream: &MultiRoundStream) -> BTreeSet<usize> {
    stream
        .elements
        .iter()
        .filter_map(|e| match e {
            MultiRoundElement::RefOmit { context_indices, .. } => Some(context_indices.iter().copied()),
            _ => None,
        })
        .flatten()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ct(h: &str, r: &str, t: &str) -> ClassTriplet {
        ClassTriplet::new(h, r, t)
    }

    /// Five samples over sensors s2, s3 and person p1.
    fn sensor_kb() -> KnowledgeBase {
        KnowledgeBase::from_samples(vec![
            vec![ct("s3", "on", "p1"), ct("s2", "on", "p1")],
            vec![ct("s3", "on", "p1"), ct("s2", "on", "p1")],
            vec![ct("s3", "on", "p1"), ct("s2", "off", "p1")],
            vec![ct("s3", "off", "p1"), ct("s2", "off", "p1")],
            vec![ct("s3", "off", "p1"), ct("s2", "off", "p1")],
        ])
    }

    fn message() -> Vec<ClassTriplet> {
        vec![ct("s3", "on", "p1"), ct("s2", "on", "p1")]
    }

    #[test]
    fn worked_example() {
        let kb = sensor_kb();
        let s = compress_multi(&kb, &message(), 4).unwrap();
        assert_eq!(
            s.elements,
            vec![
                MultiRoundElement::Omit1 {
                    head: "s3".into(),
                    tail: "p1".into()
                },
                MultiRoundElement::RefOmit {
                    head: "s2".into(),
                    tail: "p1".into(),
                    round: 2,
                    context_indices: vec![0]
                },
            ]
        );
        assert_eq!(recover_multi(&kb, &s).unwrap(), message());
        assert!((s.ratio() - 4.0 / 6.0).abs() < 1e-12);
        assert!((s.wire_ratio() - 6.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn single_round_never_references() {
        let s = compress_multi(&sensor_kb(), &message(), 1).unwrap();
        assert_eq!(s.rounds_executed, 1);
        assert!(matches!(s.elements[1], MultiRoundElement::Retained(_)));
        assert_eq!(recover_multi(&sensor_kb(), &s).unwrap(), message());
    }

    #[test]
    fn unseen_message_is_all_new() {
        let m = vec![ct("x", "y", "z"), ct("s3", "blinking", "p1")];
        let s = compress_multi(&sensor_kb(), &m, 4).unwrap();
        assert!(s.elements.iter().all(|e| matches!(e, MultiRoundElement::New(_))));
        assert_eq!(s.rounds_executed, 1);
        assert_eq!(recover_multi(&sensor_kb(), &s).unwrap(), m);
    }

    #[test]
    fn zero_rounds_rejected() {
        assert_eq!(compress_multi(&sensor_kb(), &message(), 0), Err(MultiRoundError::ZeroRounds));
    }

    #[test]
    fn bad_contexts_rejected() {
        let kb = sensor_kb();
        let mut s = compress_multi(&kb, &message(), 4).unwrap();
        s.elements.swap(0, 1);
        if let MultiRoundElement::RefOmit { context_indices, .. } = &mut s.elements[0] {
            *context_indices = vec![0];
        }
        assert!(matches!(recover_multi(&kb, &s), Err(MultiRoundError::Malformed { index: 0, .. })));
        let s = MultiRoundStream {
            version: STREAM_VERSION,
            rounds_executed: 2,
            elements: vec![
                MultiRoundElement::Retained(ct("s3", "on", "p1")),
                MultiRoundElement::RefOmit {
                    head: "s2".into(),
                    tail: "p1".into(),
                    round: 2,
                    context_indices: vec![0],
                },
            ],
        };
        assert!(matches!(recover_multi(&kb, &s), Err(MultiRoundError::Malformed { index: 1, .. })));
    }

    #[test]
    fn deeper_contexts_in_lexicographic_order() {
        // c is predictable only when both a and b are known to be on.
        let mut samples = Vec::new();
        for _ in 0..3 {
            samples.push(vec![ct("a", "on", "p"), ct("b", "on", "p"), ct("c", "on", "p")]);
        }
        for _ in 0..3 {
            samples.push(vec![ct("a", "on", "p"), ct("b", "off", "p"), ct("c", "off", "p")]);
        }
        for _ in 0..3 {
            samples.push(vec![ct("a", "off", "p"), ct("b", "on", "p"), ct("c", "off", "p")]);
        }
        for _ in 0..4 {
            samples.push(vec![ct("a", "on", "p"), ct("b", "on", "p"), ct("c", "off", "p")]);
        }
        for _ in 0..2 {
            samples.push(vec![ct("a", "off", "p"), ct("b", "off", "p"), ct("c", "off", "p")]);
        }
        let kb = KnowledgeBase::from_samples(samples);
        let m = vec![ct("a", "on", "p"), ct("b", "on", "p"), ct("c", "on", "p")];
        let s = compress_multi(&kb, &m, 4).unwrap();
        assert_eq!(recover_multi(&kb, &s).unwrap(), m);
        assert!(s.omitted_after_round(1) <= s.omitted_after_round(2));
        assert!(s.rounds_executed <= 4);
    }

    #[test]
    fn wire_roundtrip() {
        let kb = sensor_kb();
        let cb = Codebook::build(&kb.vocabulary).unwrap();
        let mut m = message();
        m.push(ct("dog", "chasing", "cat"));
        let s = compress_multi(&kb, &m, 4).unwrap();
        let bytes = encode_multi(&s, &cb);
        assert_eq!(&bytes[..4], b"SGMR");
        assert_eq!(decode_multi(&bytes, &cb).unwrap(), s);
        assert!(decode_multi(&bytes[..bytes.len() - 1], &cb).is_err());
        assert_eq!(context_triplets(&s), BTreeSet::from([0]));
    }
}
