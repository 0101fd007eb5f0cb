//! Scene-graph data model, annotation ingestion and the line-oriented text form.
//!
//! A scene graph is an ordered list of `(head, relation, tail)` triplets over
//! instanced entities (`man#0`, `man#1`, ...) plus an optional bounding-box
//! layout per entity. Statistics elsewhere in the crate only look at class
//! labels; the instance ordinals ride along so that instanced graphs survive
//! compression unchanged.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Characters that may never appear inside a label.
pub const RESERVED_CHARS: [char; 3] = ['\t', '\n', '#'];

#[derive(Debug, Error, PartialEq)]
pub enum SceneGraphError {
    #[error("malformed annotation document at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("image {image_id}: {message}")]
    Validation { image_id: String, message: String },
    #[error("invalid label {label:?}: {reason}")]
    Label { label: String, reason: &'static str },
    #[error("line {line}: {message}")]
    TextLine { line: usize, message: String },
}

fn check_label(label: &str) -> Result<(), SceneGraphError> {
    let err = |reason| {
        Err(SceneGraphError::Label {
            label: label.to_string(),
            reason,
        })
    };
    if label.is_empty() {
        return err("empty");
    }
    if label.trim() != label {
        return err("surrounding whitespace");
    }
    if label.contains(RESERVED_CHARS) {
        return err("contains a reserved separator");
    }
    Ok(())
}

/// Lowercases and trims a raw label, then validates it.
pub fn canonical_label(raw: &str) -> Result<String, SceneGraphError> {
    let label = raw.trim().to_lowercase();
    check_label(&label)?;
    Ok(label)
}

/// An instanced entity, rendered as `class#instance`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityRef {
    pub class: String,
    pub instance: u32,
}

impl EntityRef {
    pub fn new(class: impl Into<String>, instance: u32) -> Result<Self, SceneGraphError> {
        let class = class.into();
        check_label(&class)?;
        Ok(Self { class, instance })
    }
}

impl fmt::Display for EntityRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.class, self.instance)
    }
}

impl FromStr for EntityRef {
    type Err = SceneGraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |reason| SceneGraphError::Label {
            label: s.to_string(),
            reason,
        };
        let (class, instance) = s.rsplit_once('#').ok_or_else(|| bad("missing '#ordinal'"))?;
        let instance = instance
            .parse::<u32>()
            .map_err(|_| bad("ordinal is not a non-negative integer"))?;
        EntityRef::new(class, instance)
    }
}

impl Serialize for EntityRef {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EntityRef {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "(EntityRef, String, EntityRef)", from = "(EntityRef, String, EntityRef)")]
pub struct Triplet {
    pub head: EntityRef,
    pub relation: String,
    pub tail: EntityRef,
}

impl From<Triplet> for (EntityRef, String, EntityRef) {
    fn from(t: Triplet) -> Self {
        (t.head, t.relation, t.tail)
    }
}

impl From<(EntityRef, String, EntityRef)> for Triplet {
    fn from((head, relation, tail): (EntityRef, String, EntityRef)) -> Self {
        Triplet {
            head,
            relation,
            tail,
        }
    }
}

impl Triplet {
    pub fn new(head: EntityRef, relation: impl Into<String>, tail: EntityRef) -> Self {
        Triplet {
            head,
            relation: relation.into(),
            tail,
        }
    }

    /// Convenience constructor from `class#ordinal` strings. Panics on bad input.
    pub fn parse(head: &str, relation: &str, tail: &str) -> Self {
        Triplet::new(
            head.parse().expect("head entity"),
            relation,
            tail.parse().expect("tail entity"),
        )
    }

    pub fn class_triplet(&self) -> ClassTriplet {
        ClassTriplet::new(&self.head.class, &self.relation, &self.tail.class)
    }
}

/// A triplet over class labels only; the unit of knowledge-base statistics.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "[String; 3]", from = "[String; 3]")]
pub struct ClassTriplet {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

impl ClassTriplet {
    pub fn new(head: &str, relation: &str, tail: &str) -> Self {
        ClassTriplet {
            head: head.to_string(),
            relation: relation.to_string(),
            tail: tail.to_string(),
        }
    }
}

impl From<ClassTriplet> for [String; 3] {
    fn from(t: ClassTriplet) -> Self {
        [t.head, t.relation, t.tail]
    }
}

impl From<[String; 3]> for ClassTriplet {
    fn from([head, relation, tail]: [String; 3]) -> Self {
        ClassTriplet {
            head,
            relation,
            tail,
        }
    }
}

impl fmt::Display for ClassTriplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.head, self.relation, self.tail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "[u16; 4]", try_from = "[u16; 4]")]
pub struct BoundingBox {
    pub x: u16,
    pub y: u16,
    pub w: u16,
    pub h: u16,
}

impl BoundingBox {
    pub fn new(x: u16, y: u16, w: u16, h: u16) -> Result<Self, String> {
        if w == 0 || h == 0 {
            return Err(format!("bounding box extents must be positive, got {w}x{h}"));
        }
        Ok(BoundingBox { x, y, w, h })
    }

    pub fn center(&self) -> (f64, f64) {
        (
            f64::from(self.x) + f64::from(self.w) / 2.0,
            f64::from(self.y) + f64::from(self.h) / 2.0,
        )
    }
}

impl From<BoundingBox> for [u16; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

impl TryFrom<[u16; 4]> for BoundingBox {
    type Error = String;

    fn try_from([x, y, w, h]: [u16; 4]) -> Result<Self, Self::Error> {
        BoundingBox::new(x, y, w, h)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    #[serde(default)]
    pub image_id: String,
    pub triplets: Vec<Triplet>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub layout: BTreeMap<EntityRef, BoundingBox>,
}

impl SceneGraph {
    pub fn new(image_id: impl Into<String>, triplets: Vec<Triplet>) -> Self {
        SceneGraph {
            image_id: image_id.into(),
            triplets,
            layout: BTreeMap::new(),
        }
    }

    pub fn entities(&self) -> BTreeSet<&EntityRef> {
        self.triplets
            .iter()
            .flat_map(|t| [&t.head, &t.tail])
            .collect()
    }

    pub fn class_triplets(&self) -> Vec<ClassTriplet> {
        self.triplets.iter().map(Triplet::class_triplet).collect()
    }

    /// Checks label, triplet and layout invariants. Does not require canonical case.
    pub fn validate(&self) -> Result<(), SceneGraphError> {
        let invalid = |message: String| SceneGraphError::Validation {
            image_id: self.image_id.clone(),
            message,
        };
        for (i, t) in self.triplets.iter().enumerate() {
            check_label(&t.head.class).map_err(|e| invalid(format!("triplet {i}: {e}")))?;
            check_label(&t.tail.class).map_err(|e| invalid(format!("triplet {i}: {e}")))?;
            check_label(&t.relation).map_err(|e| invalid(format!("triplet {i}: {e}")))?;
            if t.head == t.tail {
                return Err(invalid(format!("triplet {i}: head and tail are both {}", t.head)));
            }
        }
        let entities = self.entities();
        for (entity, bbox) in &self.layout {
            if !entities.contains(entity) {
                return Err(invalid(format!("layout entry {entity} appears in no triplet")));
            }
            if bbox.w == 0 || bbox.h == 0 {
                return Err(invalid(format!("layout entry {entity} has an empty box")));
            }
        }
        Ok(())
    }

    pub fn is_canonical(&self) -> bool {
        let canon = |s: &str| s.trim() == s && s.to_lowercase() == s;
        self.validate().is_ok()
            && self.triplets.iter().all(|t| {
                canon(&t.head.class) && canon(&t.relation) && canon(&t.tail.class)
            })
    }
}

/// Pixel-codec payload sizes carried as corpus metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineSizes {
    pub jpeg_bytes: u64,
    pub jpeg2000_bytes: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub graphs: Vec<SceneGraph>,
    pub baselines: BTreeMap<String, BaselineSizes>,
}

impl Corpus {
    pub fn new(graphs: Vec<SceneGraph>) -> Self {
        Corpus {
            graphs,
            baselines: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn validate(&self) -> Result<(), SceneGraphError> {
        let mut seen = BTreeSet::new();
        for g in &self.graphs {
            if !seen.insert(g.image_id.as_str()) {
                return Err(SceneGraphError::Validation {
                    image_id: g.image_id.clone(),
                    message: "duplicate image id".into(),
                });
            }
            g.validate()?;
        }
        Ok(())
    }

    /// Concatenation; graphs of `self` come first.
    pub fn concat(&self, other: &Corpus) -> Corpus {
        let mut graphs = self.graphs.clone();
        graphs.extend(other.graphs.iter().cloned());
        let mut baselines = self.baselines.clone();
        baselines.extend(other.baselines.iter().map(|(k, v)| (k.clone(), *v)));
        Corpus { graphs, baselines }
    }

    /// Renders the corpus back into the annotation document schema.
    pub fn to_annotation_json(&self) -> Vec<u8> {
        let images = self
            .graphs
            .iter()
            .map(|g| {
                let mut ids: BTreeMap<&EntityRef, usize> = BTreeMap::new();
                let mut objects = Vec::new();
                for e in g.triplets.iter().flat_map(|t| [&t.head, &t.tail]) {
                    if !ids.contains_key(e) {
                        ids.insert(e, objects.len());
                        objects.push(RawObject {
                            id: objects.len() as i64,
                            label: e.class.clone(),
                            bbox: g.layout.get(e).map(|b| [b.x, b.y, b.w, b.h]),
                        });
                    }
                }
                let relationships = g
                    .triplets
                    .iter()
                    .map(|t| RawRelationship {
                        subject: ids[&t.head] as i64,
                        predicate: t.relation.clone(),
                        object: ids[&t.tail] as i64,
                    })
                    .collect();
                RawImage {
                    id: g.image_id.clone(),
                    objects,
                    relationships,
                }
            })
            .collect();
        let doc = RawDocument {
            images,
            baselines: if self.baselines.is_empty() {
                None
            } else {
                Some(self.baselines.clone())
            },
        };
        serde_json::to_vec(&doc).expect("annotation document serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct RawDocument {
    images: Vec<RawImage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    baselines: Option<BTreeMap<String, BaselineSizes>>,
}

#[derive(Serialize, Deserialize)]
struct RawImage {
    id: String,
    #[serde(default)]
    objects: Vec<RawObject>,
    #[serde(default)]
    relationships: Vec<RawRelationship>,
}

#[derive(Serialize, Deserialize)]
struct RawObject {
    id: i64,
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bbox: Option<[u16; 4]>,
}

#[derive(Serialize, Deserialize)]
struct RawRelationship {
    subject: i64,
    predicate: String,
    object: i64,
}

fn byte_offset(document: &[u8], line: usize, column: usize) -> usize {
    let line_start: usize = document
        .split(|&b| b == b'\n')
        .take(line.saturating_sub(1))
        .map(|l| l.len() + 1)
        .sum();
    (line_start + column.saturating_sub(1)).min(document.len())
}

/// Parses a Visual-Genome-style annotation document into a canonical corpus.
///
/// Entities that take part in at least one relationship receive per-class
/// ordinals in the order they appear in the image's `objects` list. Objects
/// that no relationship references are dropped together with their boxes.
pub fn parse_annotations(document: &[u8]) -> Result<Corpus, SceneGraphError> {
    let raw: RawDocument = serde_json::from_slice(document).map_err(|e| SceneGraphError::Parse {
        offset: byte_offset(document, e.line(), e.column()),
        message: e.to_string(),
    })?;

    let mut graphs = Vec::with_capacity(raw.images.len());
    for image in raw.images {
        let invalid = |message: String| SceneGraphError::Validation {
            image_id: image.id.clone(),
            message,
        };
        let mut objects: HashMap<i64, usize> = HashMap::new();
        for (pos, obj) in image.objects.iter().enumerate() {
            if objects.insert(obj.id, pos).is_some() {
                return Err(invalid(format!("duplicate object id {}", obj.id)));
            }
        }
        let mut referenced = vec![false; image.objects.len()];
        for rel in &image.relationships {
            for id in [rel.subject, rel.object] {
                let pos = *objects
                    .get(&id)
                    .ok_or_else(|| invalid(format!("relationship references unknown object id {id}")))?;
                referenced[pos] = true;
            }
        }

        let mut next_ordinal: HashMap<String, u32> = HashMap::new();
        let mut entity_of: Vec<Option<EntityRef>> = vec![None; image.objects.len()];
        let mut layout = BTreeMap::new();
        for (pos, obj) in image.objects.iter().enumerate() {
            if !referenced[pos] {
                continue;
            }
            let class = canonical_label(&obj.label).map_err(|e| invalid(e.to_string()))?;
            let ordinal = next_ordinal.entry(class.clone()).or_insert(0);
            let entity = EntityRef {
                class,
                instance: *ordinal,
            };
            *ordinal += 1;
            if let Some([x, y, w, h]) = obj.bbox {
                let bbox = BoundingBox::new(x, y, w, h)
                    .map_err(|e| invalid(format!("object {}: {e}", obj.id)))?;
                layout.insert(entity.clone(), bbox);
            }
            entity_of[pos] = Some(entity);
        }

        let mut triplets = Vec::with_capacity(image.relationships.len());
        for rel in &image.relationships {
            let head = entity_of[objects[&rel.subject]].clone().expect("referenced");
            let tail = entity_of[objects[&rel.object]].clone().expect("referenced");
            let relation = canonical_label(&rel.predicate).map_err(|e| invalid(e.to_string()))?;
            if head == tail {
                return Err(invalid(format!("object {} relates to itself", rel.subject)));
            }
            triplets.push(Triplet {
                head,
                relation,
                tail,
            });
        }
        graphs.push(SceneGraph {
            image_id: image.id,
            triplets,
            layout,
        });
    }

    let corpus = Corpus {
        graphs,
        baselines: raw.baselines.unwrap_or_default(),
    };
    corpus.validate()?;
    Ok(corpus)
}

/// Lowercases and trims every label, optionally dropping exact duplicate
/// triplets (first occurrence wins). Order is otherwise preserved.
pub fn canonicalize(graph: &SceneGraph, dedup: bool) -> Result<SceneGraph, SceneGraphError> {
    let canon_entity = |e: &EntityRef| -> Result<EntityRef, SceneGraphError> {
        Ok(EntityRef {
            class: canonical_label(&e.class)?,
            instance: e.instance,
        })
    };
    let wrap = |e: SceneGraphError| SceneGraphError::Validation {
        image_id: graph.image_id.clone(),
        message: e.to_string(),
    };

    let mut seen = BTreeSet::new();
    let mut triplets = Vec::with_capacity(graph.triplets.len());
    for t in &graph.triplets {
        let t = Triplet {
            head: canon_entity(&t.head).map_err(wrap)?,
            relation: canonical_label(&t.relation).map_err(wrap)?,
            tail: canon_entity(&t.tail).map_err(wrap)?,
        };
        if dedup && !seen.insert(t.clone()) {
            continue;
        }
        triplets.push(t);
    }
    let mut layout = BTreeMap::new();
    for (e, b) in &graph.layout {
        layout.insert(canon_entity(e).map_err(wrap)?, *b);
    }
    let out = SceneGraph {
        image_id: graph.image_id.clone(),
        triplets,
        layout,
    };
    out.validate()?;
    Ok(out)
}

/// One line per triplet: `head#i<TAB>relation<TAB>tail#j<LF>`.
pub fn serialize_text(graph: &SceneGraph) -> Vec<u8> {
    let mut out = String::new();
    for t in &graph.triplets {
        out.push_str(&format!("{}\t{}\t{}\n", t.head, t.relation, t.tail));
    }
    out.into_bytes()
}

/// Inverse of [`serialize_text`].
pub fn parse_text(text: &[u8]) -> Result<Vec<Triplet>, SceneGraphError> {
    let text = std::str::from_utf8(text).map_err(|e| SceneGraphError::TextLine {
        line: 0,
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (i, line) in text.split_terminator('\n').enumerate() {
        let err = |message: String| SceneGraphError::TextLine {
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        let [head, relation, tail] = fields[..] else {
            return Err(err(format!("expected 3 tab-separated fields, found {}", fields.len())));
        };
        check_label(relation).map_err(|e| err(e.to_string()))?;
        out.push(Triplet {
            head: head.parse().map_err(|e: SceneGraphError| err(e.to_string()))?,
            relation: relation.to_string(),
            tail: tail.parse().map_err(|e: SceneGraphError| err(e.to_string()))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn e(s: &str) -> EntityRef {
        s.parse().unwrap()
    }

    #[test]
    fn single_relationship() {
        let doc = br#"{"images":[{"id":"img1","objects":[{"id":0,"label":"man"},{"id":1,"label":"hat"}],
            "relationships":[{"subject":0,"predicate":"wearing","object":1}]}]}"#;
        let corpus = parse_annotations(doc).unwrap();
        assert_eq!(corpus.graphs.len(), 1);
        assert_eq!(
            corpus.graphs[0].triplets,
            vec![Triplet::new(e("man#0"), "wearing", e("hat#0"))]
        );
    }

    #[test]
    fn ordinals_follow_appearance_order() {
        let doc = br#"{"images":[{"id":"a","objects":[
            {"id":5,"label":"man","bbox":[0,0,10,10]},{"id":3,"label":"Man"},{"id":9,"label":"hat"}],
            "relationships":[{"subject":3,"predicate":"near","object":5},{"subject":5,"predicate":"wearing","object":9}]}]}"#;
        let g = &parse_annotations(doc).unwrap().graphs[0];
        assert_eq!(g.triplets[0], Triplet::new(e("man#1"), "near", e("man#0")));
        assert_eq!(g.triplets[1], Triplet::new(e("man#0"), "wearing", e("hat#0")));
        assert_eq!(g.layout[&e("man#0")], BoundingBox::new(0, 0, 10, 10).unwrap());
    }

    #[test]
    fn dangling_object_reference() {
        let doc = br#"{"images":[{"id":"img7","objects":[{"id":0,"label":"man"}],
            "relationships":[{"subject":0,"predicate":"wearing","object":7}]}]}"#;
        match parse_annotations(doc) {
            Err(SceneGraphError::Validation { image_id, message }) => {
                assert_eq!(image_id, "img7");
                assert!(message.contains('7'));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_offset() {
        let doc = b"{\"images\": [\n  {\"id\": \"x\",, }]}";
        match parse_annotations(doc) {
            Err(SceneGraphError::Parse { offset, .. }) => {
                assert!((25..=27).contains(&offset), "offset {offset}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_and_baselines() {
        let doc = br#"{"version":3,"images":[{"id":"a","url":"x","objects":[{"id":0,"label":"a","color":"red"},{"id":1,"label":"b"}],
            "relationships":[{"subject":0,"predicate":"r","object":1,"synsets":[]}]}],
            "baselines":{"a":{"jpeg_bytes":51200,"jpeg2000_bytes":80000}}}"#;
        let corpus = parse_annotations(doc).unwrap();
        assert_eq!(corpus.baselines["a"].jpeg_bytes, 51200);
    }

    #[test]
    fn duplicate_image_ids_rejected() {
        let doc = br#"{"images":[{"id":"a"},{"id":"a"}]}"#;
        assert!(matches!(parse_annotations(doc), Err(SceneGraphError::Validation { .. })));
    }

    #[test]
    fn canonicalize_normalizes_labels() {
        let g = SceneGraph::new(
            "x",
            vec![Triplet {
                head: EntityRef {
                    class: "Man".into(),
                    instance: 0,
                },
                relation: " Wearing ".into(),
                tail: EntityRef {
                    class: "HAT".into(),
                    instance: 0,
                },
            }],
        );
        let c = canonicalize(&g, false).unwrap();
        assert_eq!(c.triplets, vec![Triplet::parse("man#0", "wearing", "hat#0")]);
        assert_eq!(canonicalize(&c, false).unwrap(), c);
    }

    #[test]
    fn canonicalize_dedup() {
        let t = Triplet::parse("a#0", "r", "b#0");
        let g = SceneGraph::new("x", vec![t.clone(), t.clone()]);
        assert_eq!(canonicalize(&g, true).unwrap().triplets, vec![t.clone()]);
        assert_eq!(canonicalize(&g, false).unwrap().triplets.len(), 2);
    }

    #[test]
    fn canonicalize_rejects_blank_label() {
        let mut g = SceneGraph::new("x", vec![Triplet::parse("a#0", "r", "b#0")]);
        g.triplets[0].relation = "   ".into();
        assert!(canonicalize(&g, false).is_err());
    }

    #[test]
    fn text_form() {
        let g = SceneGraph::new("x", vec![Triplet::parse("man#0", "wearing", "hat#0")]);
        let bytes = serialize_text(&g);
        assert_eq!(bytes, b"man#0\twearing\that#0\n");
        assert_eq!(bytes.len(), 20);
        assert!(serialize_text(&SceneGraph::default()).is_empty());
        assert_eq!(parse_text(&bytes).unwrap(), g.triplets);
    }

    #[test]
    fn reserved_characters_rejected() {
        assert!(EntityRef::new("a#b", 0).is_err());
        assert!(EntityRef::new("a\tb", 0).is_err());
        assert!(EntityRef::new("", 0).is_err());
        assert!(EntityRef::new(" a", 0).is_err());
    }

    #[test]
    fn self_loop_rejected() {
        let g = SceneGraph::new("x", vec![Triplet::parse("a#0", "r", "a#0")]);
        assert!(g.validate().is_err());
        assert!(SceneGraph::new("x", vec![Triplet::parse("a#0", "r", "a#1")])
            .validate()
            .is_ok());
    }

    #[test]
    fn layout_must_reference_triplet_entity() {
        let mut g = SceneGraph::new("x", vec![Triplet::parse("a#0", "r", "b#0")]);
        g.layout.insert(e("c#0"), BoundingBox::new(1, 1, 1, 1).unwrap());
        assert!(g.validate().is_err());
    }

    #[test]
    fn annotation_json_roundtrip() {
        let mut g = SceneGraph::new(
            "img",
            vec![
                Triplet::parse("man#0", "wearing", "hat#0"),
                Triplet::parse("man#1", "near", "man#0"),
            ],
        );
        g.layout.insert(e("hat#0"), BoundingBox::new(3, 4, 5, 6).unwrap());
        let corpus = Corpus::new(vec![g]);
        let parsed = parse_annotations(&corpus.to_annotation_json()).unwrap();
        assert_eq!(parsed, corpus);
    }

    fn label() -> impl Strategy<Value = String> {
        "[a-z][a-z0-9 _-]{0,6}[a-z0-9]".prop_filter("no padding", |s| s.trim() == s)
    }

    fn triplet() -> impl Strategy<Value = Triplet> {
        (label(), 0u32..3, label(), label(), 0u32..3)
            .prop_filter_map("self loop", |(h, hi, r, t, ti)| {
                let head = EntityRef::new(h, hi).ok()?;
                let tail = EntityRef::new(t, ti).ok()?;
                (head != tail).then(|| Triplet::new(head, r, tail))
            })
    }

    proptest! {
        #[test]
        fn text_roundtrip(triplets in prop::collection::vec(triplet(), 0..20)) {
            let g = SceneGraph::new("p", triplets);
            prop_assert_eq!(parse_text(&serialize_text(&g)).unwrap(), g.triplets);
        }

        #[test]
        fn canonicalize_idempotent(triplets in prop::collection::vec(triplet(), 0..20), dedup: bool) {
            let g = SceneGraph::new("p", triplets);
            let once = canonicalize(&g, dedup).unwrap();
            prop_assert_eq!(canonicalize(&once, dedup).unwrap(), once);
        }
    }
}
