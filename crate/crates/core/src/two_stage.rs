//! Two-stage compression and its inverse.
//!
//! Stage 1 drops a relation whenever the knowledge base predicts it from the
//! `(head, tail)` pair; stage 2 then drops the tail of such a pair whenever
//! it is the most likely tail for the head. An element is only elided if the
//! receiver's deterministic prediction reproduces it exactly, so
//! `recover(compress(g)) == g` for every graph and threshold setting.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::entropy::{varint_len, Codebook, TokenReader, TokenWriter};
use crate::knowledge_base::KnowledgeBase;
use crate::scene_graph::{BoundingBox, EntityRef, SceneGraph, Triplet};
use crate::wire::{pack_tags, put_varint, unpack_tags, ByteReader, WireError};

pub const MAGIC: &str = "SGSC";
pub const STREAM_VERSION: u8 = 1;

const TAG_FULL: u8 = 0;
const TAG_PAIR: u8 = 1;
const TAG_HEAD: u8 = 2;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("element {index} cannot be recovered: {reason}")]
    Unrecoverable { index: usize, reason: String },
    #[error("thresholds must lie in [0, 1]: theta_r={theta_r}, theta_t={theta_t}")]
    Thresholds { theta_r: f64, theta_t: f64 },
    #[error("original graph has zero size on the selected basis")]
    EmptyOriginal,
    #[error(transparent)]
    Wire(#[from] WireError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub theta_r: f64,
    pub theta_t: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            theta_r: 0.5,
            theta_t: 0.5,
        }
    }
}

impl Thresholds {
    pub fn new(theta_r: f64, theta_t: f64) -> Result<Self, CodecError> {
        let ok = |v: f64| (0.0..=1.0).contains(&v);
        if ok(theta_r) && ok(theta_t) {
            Ok(Thresholds { theta_r, theta_t })
        } else {
            Err(CodecError::Thresholds { theta_r, theta_t })
        }
    }

    /// Thresholds outside `[0, 1]`; values above 1 disable elision.
    pub fn unchecked(theta_r: f64, theta_t: f64) -> Self {
        Thresholds { theta_r, theta_t }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CompressedElement {
    Full {
        head: EntityRef,
        relation: String,
        tail: EntityRef,
    },
    /// Relation elided.
    Pair { head: EntityRef, tail: EntityRef },
    /// Relation and tail class elided; only the tail's ordinal survives.
    Head { head: EntityRef, tail_instance: u32 },
}

impl CompressedElement {
    fn tag(&self) -> u8 {
        match self {
            CompressedElement::Full { .. } => TAG_FULL,
            CompressedElement::Pair { .. } => TAG_PAIR,
            CompressedElement::Head { .. } => TAG_HEAD,
        }
    }

    /// Label/relation tokens plus the carried ordinal token for `Head`.
    pub fn token_cost(&self) -> u64 {
        match self {
            CompressedElement::Full { .. } => 3,
            CompressedElement::Pair { .. } => 2,
            CompressedElement::Head { .. } => 2,
        }
    }

    pub fn head(&self) -> &EntityRef {
        match self {
            CompressedElement::Full { head, .. }
            | CompressedElement::Pair { head, .. }
            | CompressedElement::Head { head, .. } => head,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedStream {
    pub version: u8,
    pub elements: Vec<CompressedElement>,
    pub layout: BTreeMap<EntityRef, BoundingBox>,
}

impl CompressedStream {
    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn relations_elided(&self) -> usize {
        self.elements
            .iter()
            .filter(|e| !matches!(e, CompressedElement::Full { .. }))
            .count()
    }

    pub fn tails_elided(&self) -> usize {
        self.elements
            .iter()
            .filter(|e| matches!(e, CompressedElement::Head { .. }))
            .count()
    }

    pub fn token_count(&self) -> u64 {
        self.elements.iter().map(CompressedElement::token_cost).sum()
    }
}

/// Compresses a canonical graph against `kb`.
pub fn compress(kb: &KnowledgeBase, graph: &SceneGraph, th: Thresholds) -> CompressedStream {
    let elements = graph
        .triplets
        .iter()
        .map(|t| {
            let stage1 = kb
                .relation_argmax(&t.head.class, &t.tail.class)
                .is_some_and(|(best, p)| best == t.relation && p >= th.theta_r);
            if !stage1 {
                return CompressedElement::Full {
                    head: t.head.clone(),
                    relation: t.relation.clone(),
                    tail: t.tail.clone(),
                };
            }
            let stage2 = kb
                .tail_argmax(&t.head.class)
                .is_some_and(|(best, p)| best == t.tail.class && p >= th.theta_t);
            if stage2 {
                CompressedElement::Head {
                    head: t.head.clone(),
                    tail_instance: t.tail.instance,
                }
            } else {
                CompressedElement::Pair {
                    head: t.head.clone(),
                    tail: t.tail.clone(),
                }
            }
        })
        .collect();
    CompressedStream {
        version: STREAM_VERSION,
        elements,
        layout: graph.layout.clone(),
    }
}

/// Restores tails first, then relations, by argmax queries against `kb`.
/// The recovered graph carries an empty image id.
pub fn recover(kb: &KnowledgeBase, stream: &CompressedStream) -> Result<SceneGraph, CodecError> {
    let mut triplets = Vec::with_capacity(stream.elements.len());
    for (index, el) in stream.elements.iter().enumerate() {
        let fail = |reason: String| CodecError::Unrecoverable { index, reason };
        let (head, tail) = match el {
            CompressedElement::Full {
                head,
                relation,
                tail,
            } => {
                triplets.push(Triplet::new(head.clone(), relation.clone(), tail.clone()));
                continue;
            }
            CompressedElement::Pair { head, tail } => (head.clone(), tail.clone()),
            CompressedElement::Head {
                head,
                tail_instance,
            } => {
                let (class, _) = kb
                    .tail_argmax(&head.class)
                    .ok_or_else(|| fail(format!("no known tail for head {:?}", head.class)))?;
                let tail = EntityRef {
                    class: class.to_string(),
                    instance: *tail_instance,
                };
                (head.clone(), tail)
            }
        };
        let (relation, _) = kb
            .relation_argmax(&head.class, &tail.class)
            .ok_or_else(|| fail(format!("no known relation for ({}, {})", head.class, tail.class)))?;
        triplets.push(Triplet::new(head, relation, tail));
    }
    Ok(SceneGraph {
        image_id: String::new(),
        triplets,
        layout: stream.layout.clone(),
    })
}

/// Size basis for [`compression_ratio`].
#[derive(Debug, Clone, Copy)]
pub enum RatioBasis<'a> {
    /// Label/relation tokens; `Head` is charged one extra token for its ordinal.
    Tokens,
    /// Bytes of the text rendering (see [`render_text`]).
    Utf8,
    /// Bits of the entropy-coded element section: tags plus payload, no header or layout.
    HuffmanBits(&'a Codebook),
}

pub fn compression_ratio(
    original: &SceneGraph,
    stream: &CompressedStream,
    basis: RatioBasis<'_>,
) -> Result<f64, CodecError> {
    let (num, den) = match basis {
        RatioBasis::Tokens => (stream.token_count(), 3 * original.triplets.len() as u64),
        RatioBasis::Utf8 => (
            render_text(stream).len() as u64,
            crate::scene_graph::serialize_text(original).len() as u64,
        ),
        RatioBasis::HuffmanBits(cb) => {
            let full = full_stream(original);
            (element_bits(stream, cb), element_bits(&full, cb))
        }
    };
    if den == 0 {
        return Err(CodecError::EmptyOriginal);
    }
    Ok(num as f64 / den as f64)
}

/// The stream that elides nothing.
pub fn full_stream(graph: &SceneGraph) -> CompressedStream {
    compress(&KnowledgeBase::empty(), graph, Thresholds::default())
}

/// Text form of a filtered graph, one element per line: `h#i<TAB>r<TAB>t#j`,
/// `h#i<TAB>t#j`, or `h#i<TAB>#j` for a head with an elided tail.
pub fn render_text(stream: &CompressedStream) -> Vec<u8> {
    let mut out = String::new();
    for el in &stream.elements {
        match el {
            CompressedElement::Full {
                head,
                relation,
                tail,
            } => out.push_str(&format!("{head}\t{relation}\t{tail}\n")),
            CompressedElement::Pair { head, tail } => out.push_str(&format!("{head}\t{tail}\n")),
            CompressedElement::Head {
                head,
                tail_instance,
            } => out.push_str(&format!("{head}\t#{tail_instance}\n")),
        }
    }
    out.into_bytes()
}

/// Bits of the tag section plus the entropy-coded element payload.
pub fn element_bits(stream: &CompressedStream, cb: &Codebook) -> u64 {
    let ord = |v: u32| 8 * varint_len(u64::from(v));
    stream
        .elements
        .iter()
        .map(|el| {
            2 + match el {
                CompressedElement::Full {
                    head,
                    relation,
                    tail,
                } => {
                    cb.token_bits(&head.class)
                        + ord(head.instance)
                        + cb.token_bits(relation)
                        + cb.token_bits(&tail.class)
                        + ord(tail.instance)
                }
                CompressedElement::Pair { head, tail } => {
                    cb.token_bits(&head.class) + ord(head.instance) + cb.token_bits(&tail.class) + ord(tail.instance)
                }
                CompressedElement::Head {
                    head,
                    tail_instance,
                } => cb.token_bits(&head.class) + ord(head.instance) + ord(*tail_instance),
            }
        })
        .sum()
}

/// Serializes to the `SGSC` wire format.
///
/// ```text
/// "SGSC" | version u8 | varint elements | varint layout entries
///        | varint token count | varint payload bits
///        | tag bytes (2 bits per element, first element in the high bits)
///        | payload bit stream
/// ```
///
/// The payload holds, per element, its tokens with LEB128 ordinals after
/// each entity, then per layout entry the entity token, its ordinal and four
/// 16-bit box fields.
pub fn encode_stream(stream: &CompressedStream, cb: &Codebook) -> Vec<u8> {
    let mut w = TokenWriter::new(cb);
    let entity = |w: &mut TokenWriter<'_>, e: &EntityRef| {
        w.write_token(&e.class);
        w.write_varint(u64::from(e.instance));
    };
    for el in &stream.elements {
        match el {
            CompressedElement::Full {
                head,
                relation,
                tail,
            } => {
                entity(&mut w, head);
                w.write_token(relation);
                entity(&mut w, tail);
            }
            CompressedElement::Pair { head, tail } => {
                entity(&mut w, head);
                entity(&mut w, tail);
            }
            CompressedElement::Head {
                head,
                tail_instance,
            } => {
                entity(&mut w, head);
                w.write_varint(u64::from(*tail_instance));
            }
        }
    }
    for (e, b) in &stream.layout {
        entity(&mut w, e);
        for v in [b.x, b.y, b.w, b.h] {
            w.write_u16(v);
        }
    }
    let (payload, tokens) = w.finish();

    let mut out = MAGIC.as_bytes().to_vec();
    out.push(stream.version);
    put_varint(&mut out, stream.elements.len() as u64);
    put_varint(&mut out, stream.layout.len() as u64);
    put_varint(&mut out, tokens);
    put_varint(&mut out, payload.bit_len);
    let tags: Vec<u8> = stream.elements.iter().map(CompressedElement::tag).collect();
    out.extend(pack_tags(&tags));
    out.extend(payload.bytes);
    out
}

pub fn decode_stream(bytes: &[u8], cb: &Codebook) -> Result<CompressedStream, CodecError> {
    let mut r = ByteReader::new(bytes);
    r.expect_magic(MAGIC)?;
    let version = r.byte()?;
    if version != STREAM_VERSION {
        return Err(WireError::UnsupportedVersion(version).into());
    }
    let n_elements = r.varint()? as usize;
    let n_layout = r.varint()? as usize;
    let declared_tokens = r.varint()?;
    let bit_len = r.varint()?;
    let tags = unpack_tags(r.take(n_elements.div_ceil(4))?, n_elements);
    let payload_len = usize::try_from(bit_len.div_ceil(8)).map_err(|_| WireError::Truncated(bytes.len()))?;
    let payload = r.take(payload_len)?;
    let trailing = r.rest().len();
    if trailing > 0 {
        return Err(WireError::TrailingBytes(trailing).into());
    }

    let mut tr = TokenReader::new(cb, payload, bit_len).map_err(WireError::from)?;
    let malformed = |index: usize, message: String| WireError::Malformed { index, message };
    let read_entity = |tr: &mut TokenReader<'_, '_>, index: usize| -> Result<EntityRef, WireError> {
        let class = tr.read_token()?;
        let instance = ordinal(tr.read_varint()?).ok_or_else(|| malformed(index, "ordinal overflow".into()))?;
        EntityRef::new(class, instance).map_err(|e| malformed(index, e.to_string()))
    };

    let mut elements = Vec::with_capacity(n_elements.min(1 << 16));
    for (index, &tag) in tags.iter().enumerate() {
        let el = match tag {
            TAG_FULL => {
                let head = read_entity(&mut tr, index)?;
                let relation = tr.read_token().map_err(WireError::from)?;
                let tail = read_entity(&mut tr, index)?;
                CompressedElement::Full {
                    head,
                    relation,
                    tail,
                }
            }
            TAG_PAIR => CompressedElement::Pair {
                head: read_entity(&mut tr, index)?,
                tail: read_entity(&mut tr, index)?,
            },
            TAG_HEAD => {
                let head = read_entity(&mut tr, index)?;
                let tail_instance = ordinal(tr.read_varint().map_err(WireError::from)?)
                    .ok_or_else(|| malformed(index, "ordinal overflow".into()))?;
                CompressedElement::Head {
                    head,
                    tail_instance,
                }
            }
            tag => return Err(WireError::BadTag { index, tag }.into()),
        };
        elements.push(el);
    }
    let mut layout = BTreeMap::new();
    for i in 0..n_layout {
        let index = n_elements + i;
        let e = read_entity(&mut tr, index)?;
        let mut f = [0u16; 4];
        for v in &mut f {
            *v = tr.read_u16().map_err(WireError::from)?;
        }
        let b = BoundingBox::new(f[0], f[1], f[2], f[3]).map_err(|m| malformed(index, m))?;
        layout.insert(e, b);
    }
    tr.expect_end().map_err(WireError::from)?;
    if tr.token_count() != declared_tokens {
        return Err(WireError::TokenCount {
            declared: declared_tokens,
            actual: tr.token_count(),
        }
        .into());
    }
    Ok(CompressedStream {
        version,
        elements,
        layout,
    })
}

fn ordinal(v: u64) -> Option<u32> {
    u32::try_from(v).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene_graph::Corpus;

    fn e(s: &str) -> EntityRef {
        s.parse().unwrap()
    }

    fn kb() -> KnowledgeBase {
        KnowledgeBase::build(&Corpus::new(vec![
            SceneGraph::new(
                "g1",
                vec![
                    Triplet::parse("man#0", "wearing", "hat#0"),
                    Triplet::parse("man#0", "holding", "cup#0"),
                ],
            ),
            SceneGraph::new(
                "g2",
                vec![
                    Triplet::parse("man#0", "wearing", "hat#0"),
                    Triplet::parse("man#0", "near", "cup#0"),
                ],
            ),
        ]))
        .unwrap()
    }

    fn g1() -> SceneGraph {
        SceneGraph::new(
            "g1",
            vec![
                Triplet::parse("man#0", "wearing", "hat#0"),
                Triplet::parse("man#0", "holding", "cup#0"),
            ],
        )
    }

    #[test]
    fn worked_example() {
        let kb = kb();
        let s = compress(&kb, &g1(), Thresholds::default());
        assert_eq!(
            s.elements,
            vec![
                CompressedElement::Pair {
                    head: e("man#0"),
                    tail: e("hat#0")
                },
                CompressedElement::Head {
                    head: e("man#0"),
                    tail_instance: 0
                },
            ]
        );
        let r = recover(&kb, &s).unwrap();
        assert_eq!(r.triplets, g1().triplets);
        let ratio = compression_ratio(&g1(), &s, RatioBasis::Tokens).unwrap();
        assert!((ratio - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn unseen_pair_is_full() {
        let g = SceneGraph::new("x", vec![Triplet::parse("dog#0", "chewing", "bone#0")]);
        let s = compress(&kb(), &g, Thresholds::default());
        assert!(matches!(s.elements[0], CompressedElement::Full { .. }));
        assert_eq!(compression_ratio(&g, &s, RatioBasis::Tokens).unwrap(), 1.0);
    }

    #[test]
    fn unreachable_threshold_disables_elision() {
        let s = compress(&kb(), &g1(), Thresholds::unchecked(1.01, 0.5));
        assert_eq!(s.relations_elided(), 0);
        assert_eq!(s.token_count(), 3 * 2);
    }

    #[test]
    fn full_only_stream_passes_through() {
        let g = g1();
        let s = full_stream(&g);
        assert_eq!(recover(&KnowledgeBase::empty(), &s).unwrap().triplets, g.triplets);
    }

    #[test]
    fn pair_without_knowledge_fails() {
        let s = CompressedStream {
            version: STREAM_VERSION,
            elements: vec![CompressedElement::Pair {
                head: e("dog#0"),
                tail: e("bone#0"),
            }],
            layout: BTreeMap::new(),
        };
        assert!(matches!(
            recover(&kb(), &s),
            Err(CodecError::Unrecoverable { index: 0, .. })
        ));
        let s = CompressedStream {
            elements: vec![
                CompressedElement::Pair {
                    head: e("man#0"),
                    tail: e("hat#0"),
                },
                CompressedElement::Head {
                    head: e("dog#0"),
                    tail_instance: 0,
                },
            ],
            ..s
        };
        assert!(matches!(
            recover(&kb(), &s),
            Err(CodecError::Unrecoverable { index: 1, .. })
        ));
    }

    #[test]
    fn threshold_validation() {
        assert!(Thresholds::new(0.5, 0.5).is_ok());
        assert!(Thresholds::new(-0.1, 0.5).is_err());
        assert!(Thresholds::new(0.5, 1.5).is_err());
    }

    #[test]
    fn theta_t_gates_stage_two() {
        let kb = kb();
        let s = compress(&kb, &g1(), Thresholds::new(0.5, 0.6).unwrap());
        assert_eq!(s.tails_elided(), 0);
        assert_eq!(s.relations_elided(), 2);
    }

    #[test]
    fn utf8_and_bits_bases() {
        let kb = kb();
        let cb = Codebook::build(&kb.vocabulary).unwrap();
        let s = compress(&kb, &g1(), Thresholds::default());
        assert_eq!(render_text(&s), b"man#0\that#0\nman#0\t#0\n");
        let utf8 = compression_ratio(&g1(), &s, RatioBasis::Utf8).unwrap();
        assert!((utf8 - 21.0 / 40.0).abs() < 1e-12);
        let bits = compression_ratio(&g1(), &s, RatioBasis::HuffmanBits(&cb)).unwrap();
        assert!(bits > 0.0 && bits < 1.0);
        assert_eq!(
            compression_ratio(&SceneGraph::default(), &full_stream(&SceneGraph::default()), RatioBasis::Tokens),
            Err(CodecError::EmptyOriginal)
        );
    }

    #[test]
    fn wire_roundtrip_with_layout_and_escapes() {
        let kb = kb();
        let cb = Codebook::build(&kb.vocabulary).unwrap();
        let mut g = g1();
        g.triplets.push(Triplet::parse("zebra#2", "grazing", "field#0"));
        g.layout.insert(e("zebra#2"), BoundingBox::new(1, 2, 300, 4).unwrap());
        g.layout.insert(e("man#0"), BoundingBox::new(0, 0, 65535, 65535).unwrap());
        let s = compress(&kb, &g, Thresholds::default());
        let bytes = encode_stream(&s, &cb);
        assert_eq!(&bytes[..4], b"SGSC");
        assert_eq!(bytes[4], STREAM_VERSION);
        let back = decode_stream(&bytes, &cb).unwrap();
        assert_eq!(back, s);
        let mut rec = recover(&kb, &back).unwrap();
        rec.image_id = g.image_id.clone();
        assert_eq!(rec, g);
        // element section size agrees with the encoder
        let payload_bits = element_bits(&s, &cb) - 2 * s.elements.len() as u64;
        let layout_bits: u64 = s
            .layout
            .keys()
            .map(|e| cb.token_bits(&e.class) + 8 + 64)
            .sum();
        let mut r = ByteReader::new(&bytes[5..]);
        let _ = (r.varint(), r.varint(), r.varint());
        assert_eq!(r.varint().unwrap(), payload_bits + layout_bits);
    }

    #[test]
    fn wire_rejects_garbage() {
        let cb = Codebook::build(&kb().vocabulary).unwrap();
        let bytes = encode_stream(&compress(&kb(), &g1(), Thresholds::default()), &cb);
        assert!(decode_stream(b"XXXX", &cb).is_err());
        assert!(decode_stream(&bytes[..bytes.len() - 1], &cb).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(
            decode_stream(&extra, &cb),
            Err(CodecError::Wire(WireError::TrailingBytes(1)))
        ));
        let mut v = bytes.clone();
        v[4] = 9;
        assert!(matches!(
            decode_stream(&v, &cb),
            Err(CodecError::Wire(WireError::UnsupportedVersion(9)))
        ));
    }
}
