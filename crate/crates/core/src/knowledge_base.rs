//! Shared probability graphs built from a training corpus.
//!
//! Three count structures make up a [`KnowledgeBase`]:
//!
//! * a relation table, `(head, tail) -> relation -> count`, from which
//!   `p(r | h, t)` is estimated;
//! * a co-occurrence table, `head -> tail -> count`, for `p(t | h)`;
//! * the sample store: the set of class triplets of every training graph,
//!   filtered at query time to estimate relation likelihoods conditioned on
//!   other triplets of the same message.
//!
//! All counts are integers, so merging knowledge bases built on disjoint
//! shards is exact and order-independent.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene_graph::{ClassTriplet, Corpus};

/// Current on-disk format version.
pub const KB_VERSION: u32 = 1;

const CRC_PREFIX: &[u8] = b"#crc32=";

#[derive(Debug, Error, PartialEq)]
pub enum KbError {
    #[error("cannot build a knowledge base from an empty corpus")]
    EmptyCorpus,
    #[error("knowledge base version mismatch: {0} vs {1}")]
    VersionMismatch(u32, u32),
    #[error("unsupported knowledge base version {0}")]
    UnsupportedVersion(u32),
    #[error("knowledge base file truncated or missing checksum line")]
    MissingChecksum,
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("corrupt knowledge base at line {line}, column {column}: {message}")]
    Corrupt {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("inconsistent knowledge base: {0}")]
    Inconsistent(String),
}

pub type RelationTable = BTreeMap<(String, String), BTreeMap<String, u64>>;
pub type CooccurrenceTable = BTreeMap<String, BTreeMap<String, u64>>;

/// Counts behind a discrete distribution. Probabilities are `count / total`.
///
/// For unconditional queries `total` is the sum of `counts`; for conditional
/// queries it is the number of restricted samples containing the pair, which
/// may be smaller than the sum when a sample holds several relations for the
/// same pair.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Distribution {
    pub counts: BTreeMap<String, u64>,
    pub total: u64,
}

impl Distribution {
    fn from_counts(counts: BTreeMap<String, u64>) -> Self {
        let total = counts.values().sum();
        Distribution { counts, total }
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn probability(&self, label: &str) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.counts.get(label).copied().unwrap_or(0) as f64 / self.total as f64
    }

    pub fn probabilities(&self) -> BTreeMap<&str, f64> {
        self.counts
            .keys()
            .map(|k| (k.as_str(), self.probability(k)))
            .collect()
    }

    /// Most probable label; ties go to the smallest label in byte order.
    pub fn argmax(&self) -> Option<(&str, f64)> {
        let mut best: Option<(&str, u64)> = None;
        // BTreeMap iterates in ascending byte order, so a strict `>` keeps the first maximum.
        for (label, &count) in &self.counts {
            if best.is_none_or(|(_, c)| count > c) {
                best = Some((label, count));
            }
        }
        best.filter(|_| self.total > 0)
            .map(|(l, c)| (l, c as f64 / self.total as f64))
    }

    pub fn argmax_label(&self) -> Option<&str> {
        self.argmax().map(|(l, _)| l)
    }
}

/// Fixed-size bit set over sample indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct SampleSet(Vec<u64>);

impl SampleSet {
    pub(crate) fn empty(n: usize) -> Self {
        SampleSet(vec![0; n.div_ceil(64)])
    }

    pub(crate) fn full(n: usize) -> Self {
        let mut words = vec![u64::MAX; n.div_ceil(64)];
        if !n.is_multiple_of(64) {
            if let Some(last) = words.last_mut() {
                *last = (1u64 << (n % 64)) - 1;
            }
        }
        SampleSet(words)
    }

    fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    pub(crate) fn intersect(&self, other: &SampleSet) -> SampleSet {
        SampleSet(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    pub(crate) fn intersect_into(&self, other: &SampleSet, out: &mut SampleSet) {
        for ((o, a), b) in out.0.iter_mut().zip(&self.0).zip(&other.0) {
            *o = a & b;
        }
    }

    #[cfg(test)]
    pub(crate) fn count(&self) -> u64 {
        self.0.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    pub(crate) fn intersection_count(&self, other: &SampleSet) -> u64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| u64::from((a & b).count_ones()))
            .sum()
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }
}

/// Inverted index from triplets and pairs to the samples containing them.
#[derive(Debug, Clone)]
pub(crate) struct SampleIndex {
    pub(crate) n_samples: usize,
    pub(crate) by_triplet: HashMap<ClassTriplet, SampleSet>,
    /// `(head, tail)` -> samples holding the pair, plus the relations seen for it.
    pub(crate) by_pair: HashMap<(String, String), (SampleSet, BTreeSet<String>)>,
}

impl SampleIndex {
    fn new(samples: &[BTreeSet<ClassTriplet>]) -> Self {
        let n = samples.len();
        let mut by_triplet: HashMap<ClassTriplet, SampleSet> = HashMap::new();
        let mut by_pair: HashMap<(String, String), (SampleSet, BTreeSet<String>)> = HashMap::new();
        for (i, sample) in samples.iter().enumerate() {
            for t in sample {
                by_triplet
                    .entry(t.clone())
                    .or_insert_with(|| SampleSet::empty(n))
                    .insert(i);
                let (set, rels) = by_pair
                    .entry((t.head.clone(), t.tail.clone()))
                    .or_insert_with(|| (SampleSet::empty(n), BTreeSet::new()));
                set.insert(i);
                rels.insert(t.relation.clone());
            }
        }
        SampleIndex {
            n_samples: n,
            by_triplet,
            by_pair,
        }
    }

    /// Samples that contain every triplet in `context`.
    pub(crate) fn restrict<'a>(&self, context: impl IntoIterator<Item = &'a ClassTriplet>) -> SampleSet {
        let mut set = SampleSet::full(self.n_samples);
        for t in context {
            match self.by_triplet.get(t) {
                Some(s) => set = set.intersect(s),
                None => return SampleSet::empty(self.n_samples),
            }
        }
        set
    }

    /// Relation distribution for `(head, tail)` over the restricted samples.
    pub(crate) fn relation_distribution(&self, head: &str, tail: &str, restricted: &SampleSet) -> Distribution {
        let Some((pair_set, relations)) = self.by_pair.get(&(head.to_string(), tail.to_string())) else {
            return Distribution::default();
        };
        if pair_set.intersection_count(restricted) == 0 {
            return Distribution::default();
        }
        // Normalized over sample-relation incidences, so a sample carrying the
        // pair under two relations still yields a proper distribution.
        let mut counts = BTreeMap::new();
        for r in relations {
            let key = ClassTriplet::new(head, r, tail);
            let c = self.by_triplet[&key].intersection_count(restricted);
            if c > 0 {
                counts.insert(r.clone(), c);
            }
        }
        let total = counts.values().sum();
        Distribution { counts, total }
    }
}

#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    pub version: u32,
    pub relation_table: RelationTable,
    pub cooccurrence_table: CooccurrenceTable,
    pub samples: Vec<BTreeSet<ClassTriplet>>,
    pub vocabulary: BTreeMap<String, u64>,
    index: OnceLock<SampleIndex>,
}

impl PartialEq for KnowledgeBase {
    fn eq(&self, other: &Self) -> bool {
        self.version == other.version
            && self.relation_table == other.relation_table
            && self.cooccurrence_table == other.cooccurrence_table
            && self.samples == other.samples
            && self.vocabulary == other.vocabulary
    }
}

impl Default for KnowledgeBase {
    fn default() -> Self {
        Self::empty()
    }
}

impl KnowledgeBase {
    /// The identity element of [`merge`](Self::merge).
    pub fn empty() -> Self {
        KnowledgeBase {
            version: KB_VERSION,
            relation_table: BTreeMap::new(),
            cooccurrence_table: BTreeMap::new(),
            samples: Vec::new(),
            vocabulary: BTreeMap::new(),
            index: OnceLock::new(),
        }
    }

    pub fn build(corpus: &Corpus) -> Result<Self, KbError> {
        if corpus.is_empty() {
            return Err(KbError::EmptyCorpus);
        }
        Ok(Self::from_samples(corpus.graphs.iter().map(|g| g.class_triplets())))
    }

    /// Builds from per-graph triplet lists, counting every triplet occurrence.
    pub fn from_samples<I, S>(samples: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: IntoIterator<Item = ClassTriplet>,
    {
        let mut kb = Self::empty();
        for sample in samples {
            let mut set = BTreeSet::new();
            for t in sample {
                kb.observe(&t);
                set.insert(t);
            }
            kb.samples.push(set);
        }
        kb
    }

    fn observe(&mut self, t: &ClassTriplet) {
        *self
            .relation_table
            .entry((t.head.clone(), t.tail.clone()))
            .or_default()
            .entry(t.relation.clone())
            .or_insert(0) += 1;
        *self
            .cooccurrence_table
            .entry(t.head.clone())
            .or_default()
            .entry(t.tail.clone())
            .or_insert(0) += 1;
        for token in [&t.head, &t.relation, &t.tail] {
            *self.vocabulary.entry(token.clone()).or_insert(0) += 1;
        }
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    pub fn triplet_count(&self) -> u64 {
        self.relation_table.values().flat_map(|m| m.values()).sum()
    }

    /// `p(r | h, t)` from the relation table.
    pub fn query_relation(&self, head: &str, tail: &str) -> Distribution {
        self.relation_table
            .get(&(head.to_string(), tail.to_string()))
            .map(|m| Distribution::from_counts(m.clone()))
            .unwrap_or_default()
    }

    /// `p(t | h)` from the co-occurrence table.
    pub fn query_tail(&self, head: &str) -> Distribution {
        self.cooccurrence_table
            .get(head)
            .map(|m| Distribution::from_counts(m.clone()))
            .unwrap_or_default()
    }

    pub fn relation_argmax(&self, head: &str, tail: &str) -> Option<(&str, f64)> {
        let counts = self.relation_table.get(&(head.to_string(), tail.to_string()))?;
        argmax_counts(counts)
    }

    pub fn tail_argmax(&self, head: &str) -> Option<(&str, f64)> {
        argmax_counts(self.cooccurrence_table.get(head)?)
    }

    pub fn has_relation(&self, head: &str, relation: &str, tail: &str) -> bool {
        self.relation_table
            .get(&(head.to_string(), tail.to_string()))
            .is_some_and(|m| m.contains_key(relation))
    }

    pub(crate) fn index(&self) -> &SampleIndex {
        self.index.get_or_init(|| SampleIndex::new(&self.samples))
    }

    /// Relation distribution for `(head, tail)` restricted to the training
    /// samples that contain every triplet of `context`.
    ///
    /// The denominator is the number of restricted samples that hold the pair
    /// under any relation, so conditioning on a context present in every
    /// sample reproduces [`query_relation`](Self::query_relation) when each
    /// sample holds the pair at most once.
    pub fn conditional_relation(&self, head: &str, tail: &str, context: &[ClassTriplet]) -> Distribution {
        let index = self.index();
        let restricted = index.restrict(context);
        if restricted.is_empty() {
            return Distribution::default();
        }
        index.relation_distribution(head, tail, &restricted)
    }

    /// Entrywise sum of all count tables; samples of `self` first.
    pub fn merge(&self, other: &KnowledgeBase) -> Result<KnowledgeBase, KbError> {
        if self.version != other.version {
            return Err(KbError::VersionMismatch(self.version, other.version));
        }
        let mut out = self.clone();
        out.index = OnceLock::new();
        for (pair, rels) in &other.relation_table {
            let dst = out.relation_table.entry(pair.clone()).or_default();
            for (r, c) in rels {
                *dst.entry(r.clone()).or_insert(0) += c;
            }
        }
        for (h, tails) in &other.cooccurrence_table {
            let dst = out.cooccurrence_table.entry(h.clone()).or_default();
            for (t, c) in tails {
                *dst.entry(t.clone()).or_insert(0) += c;
            }
        }
        for (tok, c) in &other.vocabulary {
            *out.vocabulary.entry(tok.clone()).or_insert(0) += c;
        }
        out.samples.extend(other.samples.iter().cloned());
        Ok(out)
    }

    /// Checks the cross-table invariants.
    pub fn validate(&self) -> Result<(), KbError> {
        let bad = |m: String| Err(KbError::Inconsistent(m));
        for ((h, t), rels) in &self.relation_table {
            if rels.is_empty() || rels.values().any(|&c| c == 0) {
                return bad(format!("relation entry ({h}, {t}) has a zero or missing count"));
            }
            let sum: u64 = rels.values().sum();
            match self.cooccurrence_table.get(h).and_then(|m| m.get(t)) {
                Some(&c) if c == sum => {}
                other => {
                    return bad(format!(
                        "co-occurrence ({h}, {t}) = {other:?} but relation counts sum to {sum}"
                    ))
                }
            }
            for tok in rels.keys().chain([h, t]) {
                if !self.vocabulary.contains_key(tok) {
                    return bad(format!("token {tok:?} missing from vocabulary"));
                }
            }
        }
        for (h, tails) in &self.cooccurrence_table {
            for (t, &c) in tails {
                if c == 0 || !self.relation_table.contains_key(&(h.clone(), t.clone())) {
                    return bad(format!("co-occurrence ({h}, {t}) has no relation entry"));
                }
            }
        }
        Ok(())
    }

    /// Canonical JSON (sorted keys) followed by a `#crc32=` line.
    pub fn persist(&self) -> Vec<u8> {
        let mut relation_table: BTreeMap<&str, BTreeMap<&str, &BTreeMap<String, u64>>> = BTreeMap::new();
        for ((h, t), rels) in &self.relation_table {
            relation_table.entry(h).or_default().insert(t, rels);
        }
        let file = KbFileRef {
            cooccurrence_table: &self.cooccurrence_table,
            relation_table,
            samples: self.samples.iter().map(|s| s.iter().collect()).collect(),
            version: self.version,
            vocabulary: &self.vocabulary,
        };
        let mut out = serde_json::to_vec(&file).expect("knowledge base serializes");
        out.push(b'\n');
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(format!("#crc32={crc:08x}\n").as_bytes());
        out
    }

    pub fn load(bytes: &[u8]) -> Result<KnowledgeBase, KbError> {
        let body_end = bytes
            .windows(CRC_PREFIX.len() + 1)
            .rposition(|w| w[0] == b'\n' && &w[1..] == CRC_PREFIX)
            .map(|p| p + 1)
            .ok_or(KbError::MissingChecksum)?;
        let (body, trailer) = bytes.split_at(body_end);
        let hex = trailer[CRC_PREFIX.len()..]
            .strip_suffix(b"\n")
            .unwrap_or(&trailer[CRC_PREFIX.len()..]);
        let stored = std::str::from_utf8(hex)
            .ok()
            .filter(|s| s.len() == 8 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')))
            .and_then(|s| u32::from_str_radix(s, 16).ok())
            .ok_or(KbError::MissingChecksum)?;
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(KbError::Checksum { stored, computed });
        }

        let file: KbFile = serde_json::from_slice(body).map_err(|e| KbError::Corrupt {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if file.version != KB_VERSION {
            return Err(KbError::UnsupportedVersion(file.version));
        }
        let mut relation_table = BTreeMap::new();
        for (h, tails) in file.relation_table {
            for (t, rels) in tails {
                relation_table.insert((h.clone(), t), rels);
            }
        }
        let kb = KnowledgeBase {
            version: file.version,
            relation_table,
            cooccurrence_table: file.cooccurrence_table,
            samples: file.samples.into_iter().map(|s| s.into_iter().collect()).collect(),
            vocabulary: file.vocabulary,
            index: OnceLock::new(),
        };
        kb.validate()?;
        Ok(kb)
    }
}

fn argmax_counts(counts: &BTreeMap<String, u64>) -> Option<(&str, f64)> {
    let total: u64 = counts.values().sum();
    let mut best: Option<(&str, u64)> = None;
    for (label, &count) in counts {
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((label, count));
        }
    }
    best.filter(|_| total > 0)
        .map(|(l, c)| (l, c as f64 / total as f64))
}

// Field order is alphabetical so the emitted JSON has sorted keys throughout.
#[derive(Serialize)]
struct KbFileRef<'a> {
    cooccurrence_table: &'a CooccurrenceTable,
    relation_table: BTreeMap<&'a str, BTreeMap<&'a str, &'a BTreeMap<String, u64>>>,
    samples: Vec<Vec<&'a ClassTriplet>>,
    version: u32,
    vocabulary: &'a BTreeMap<String, u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KbFile {
    cooccurrence_table: CooccurrenceTable,
    relation_table: BTreeMap<String, BTreeMap<String, BTreeMap<String, u64>>>,
    samples: Vec<Vec<ClassTriplet>>,
    version: u32,
    vocabulary: BTreeMap<String, u64>,
}
