//! Category-skewed synthetic scene graphs.
//!
//! A [`CategoryModel`] fixes, per category, a popularity order over
//! entities, a short partner list per head and a relation subset per pair.
//! Every draw is Zipf-distributed over those orders, so each conditional
//! has a clear argmax. The model is shared by all users; only the category
//! mix and the sampling seed differ between corpora.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};

use super::{rng_for, HarnessError};
use crate::scene_graph::{canonical_label, BaselineSizes, BoundingBox, Corpus, EntityRef, SceneGraph, Triplet};

pub const CONFIG_DIR_ENV: &str = "SGCODEC_CONFIG_DIR";
const BUILTIN: &str = include_str!("../../data/categories.json");
const VOCAB_FILE: &str = "categories.json";

pub const DEFAULT_ZIPF: f64 = 1.1;
pub const DEFAULT_LAW_SEED: u64 = 0x5eed_ca7e;
const PARTNERS: usize = 3;
const MIN_TRIPLETS: usize = 3;
const MAX_TRIPLETS: usize = 8;
const NEW_INSTANCE_P: f64 = 0.15;
const JPEG_MEAN: f64 = 51_200.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryVocab {
    pub entities: Vec<String>,
    pub relations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vocabularies(pub BTreeMap<String, CategoryVocab>);

impl Vocabularies {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN.as_bytes()).expect("bundled vocabulary is valid")
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, HarnessError> {
        let v: Vocabularies = serde_json::from_slice(bytes).map_err(|e| HarnessError::Config(e.to_string()))?;
        v.validate()?;
        Ok(v)
    }

    /// Reads `categories.json` from `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, HarnessError> {
        let path = dir.join(VOCAB_FILE);
        let bytes = std::fs::read(&path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&bytes)
    }

    /// The directory named by [`CONFIG_DIR_ENV`] if set, else the bundled lists.
    pub fn from_env() -> Result<Self, HarnessError> {
        match std::env::var_os(CONFIG_DIR_ENV) {
            Some(dir) => Self::from_dir(Path::new(&dir)),
            None => Ok(Self::builtin()),
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.0.is_empty() {
            return bad("no categories".into());
        }
        for (name, v) in &self.0 {
            let distinct: BTreeSet<&String> = v.entities.iter().collect();
            if distinct.len() != v.entities.len() || v.entities.len() <= PARTNERS {
                return bad(format!("category {name} needs more than {PARTNERS} distinct entities"));
            }
            if v.relations.iter().collect::<BTreeSet<_>>().len() < 3 {
                return bad(format!("category {name} needs at least 3 distinct relations"));
            }
            for l in v.entities.iter().chain(&v.relations) {
                match canonical_label(l) {
                    Ok(c) if &c == l => {}
                    _ => return bad(format!("label {l:?} in category {name} is not canonical")),
                }
            }
        }
        Ok(())
    }
}

/// Category mix of one user or test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoryProfile {
    pub weights: BTreeMap<String, f64>,
}

impl CategoryProfile {
    pub fn new(weights: &[(&str, f64)]) -> Self {
        CategoryProfile {
            weights: weights.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    pub fn validate(&self, vocab: &Vocabularies) -> Result<(), HarnessError> {
        let mut sum = 0.0;
        for (k, &w) in &self.weights {
            if !vocab.0.contains_key(k) {
                return Err(HarnessError::Config(format!("unknown category {k:?}")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(HarnessError::Config(format!("weight of {k:?} must be non-negative")));
            }
            sum += w;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(HarnessError::Config(format!("weights sum to {sum}, not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct CategoryLaw {
    /// Entities in popularity order.
    heads: Vec<String>,
    /// Per head, partner tails in popularity order.
    partners: BTreeMap<String, Vec<String>>,
    /// Per pair, relations in popularity order.
    relations: BTreeMap<(String, String), Vec<String>>,
}

/// The fixed popularity law over every category.
#[derive(Debug, Clone)]
pub struct CategoryModel {
    pub vocab: Vocabularies,
    pub zipf_exponent: f64,
    pub law_seed: u64,
    laws: BTreeMap<String, CategoryLaw>,
}

impl CategoryModel {
    pub fn new(vocab: Vocabularies, zipf_exponent: f64, law_seed: u64) -> Result<Self, HarnessError> {
        if !(zipf_exponent.is_finite() && zipf_exponent > 0.0) {
            return Err(HarnessError::Config(format!("zipf exponent {zipf_exponent} must be positive")));
        }
        let laws = vocab
            .0
            .iter()
            .enumerate()
            .map(|(i, (name, v))| {
                let mut rng = rng_for(law_seed, i as u64);
                let mut heads = v.entities.clone();
                heads.shuffle(&mut rng);
                let mut partners = BTreeMap::new();
                let mut relations = BTreeMap::new();
                for h in &v.entities {
                    let mut others: Vec<String> = v.entities.iter().filter(|e| *e != h).cloned().collect();
                    others.shuffle(&mut rng);
                    others.truncate(PARTNERS);
                    for t in &others {
                        let mut rels = v.relations.clone();
                        rels.shuffle(&mut rng);
                        rels.truncate(rng.random_range(2..=3));
                        relations.insert((h.clone(), t.clone()), rels);
                    }
                    partners.insert(h.clone(), others);
                }
                (
                    name.clone(),
                    CategoryLaw {
                        heads,
                        partners,
                        relations,
                    },
                )
            })
            .collect();
        Ok(CategoryModel {
            vocab,
            zipf_exponent,
            law_seed,
            laws,
        })
    }

    pub fn builtin() -> Self {
        Self::new(Vocabularies::builtin(), DEFAULT_ZIPF, DEFAULT_LAW_SEED).expect("bundled model is valid")
    }

    fn zipf_pick<'a>(&self, rng: &mut ChaCha8Rng, items: &'a [String]) -> &'a str {
        let z = Zipf::new(items.len() as f64, self.zipf_exponent).expect("valid zipf");
        let k = z.sample(rng) as usize;
        &items[k.clamp(1, items.len()) - 1]
    }

    /// Category of each generated graph, by image id.
    pub fn category_of(image_id: &str) -> Option<&str> {
        image_id.split('/').nth(1)
    }
}

/// `n_graphs` graphs whose category is drawn from `profile`. Image ids have
/// the form `<prefix>/<category>/<index>`; `n_graphs = 0` yields an empty corpus.
pub fn synth_categories(
    model: &CategoryModel,
    profile: &CategoryProfile,
    n_graphs: usize,
    seed: u64,
    id_prefix: &str,
) -> Result<Corpus, HarnessError> {
    profile.validate(&model.vocab)?;
    let mut rng = rng_for(seed, 0);
    let cats: Vec<(&String, f64)> = profile.weights.iter().map(|(k, &w)| (k, w)).collect();
    let mut corpus = Corpus::default();
    for g in 0..n_graphs {
        let mut u: f64 = rng.random();
        let mut cat = cats.last().expect("validated profile").0;
        for (k, w) in &cats {
            if u < *w {
                cat = k;
                break;
            }
            u -= w;
        }
        let law = &model.laws[cat];
        let target = rng.random_range(MIN_TRIPLETS..=MAX_TRIPLETS);
        let mut graph = SceneGraph::new(format!("{id_prefix}/{cat}/{g:05}"), Vec::new());
        let mut seen = BTreeSet::new();
        let mut next_instance: BTreeMap<String, u32> = BTreeMap::new();
        let mut attempts = 0;
        while graph.triplets.len() < target && attempts < 8 * MAX_TRIPLETS {
            attempts += 1;
            let h = model.zipf_pick(&mut rng, &law.heads).to_string();
            let t = model.zipf_pick(&mut rng, &law.partners[&h]).to_string();
            let r = model.zipf_pick(&mut rng, &law.relations[&(h.clone(), t.clone())]).to_string();
            let mut instance = |class: &str, rng: &mut ChaCha8Rng| {
                let next = next_instance.entry(class.to_string()).or_insert(0);
                if *next == 0 {
                    *next = 1;
                    0
                } else if rng.random_bool(NEW_INSTANCE_P) {
                    *next += 1;
                    *next - 1
                } else {
                    0
                }
            };
            let hi = instance(&h, &mut rng);
            let ti = instance(&t, &mut rng);
            let triplet = Triplet::new(EntityRef::new(h, hi)?, r, EntityRef::new(t, ti)?);
            if seen.insert(triplet.clone()) {
                graph.triplets.push(triplet);
            }
        }
        for e in graph.entities().into_iter().cloned().collect::<Vec<_>>() {
            let w = rng.random_range(20..=300u16);
            let h = rng.random_range(20..=300u16);
            let x = rng.random_range(0..=(640 - w));
            let y = rng.random_range(0..=(480u16.saturating_sub(h)));
            graph.layout.insert(e, BoundingBox::new(x, y, w, h).expect("positive extent"));
        }
        let jpeg = (JPEG_MEAN * rng.random_range(0.9..1.1)) as u64;
        corpus.baselines.insert(
            graph.image_id.clone(),
            BaselineSizes {
                jpeg_bytes: jpeg,
                jpeg2000_bytes: (jpeg as f64 * rng.random_range(1.1..1.3)) as u64,
            },
        );
        corpus.graphs.push(graph);
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn human_heavy() -> CategoryProfile {
        CategoryProfile::new(&[("human", 0.7), ("animal", 0.2), ("transport", 0.1)])
    }

    #[test]
    fn category_frequencies_follow_weights() {
        let m = CategoryModel::builtin();
        let c = synth_categories(&m, &human_heavy(), 1000, 1, "u1").unwrap();
        c.validate().unwrap();
        let n = c.len() as f64;
        for (cat, w) in &human_heavy().weights {
            let k = c
                .graphs
                .iter()
                .filter(|g| CategoryModel::category_of(&g.image_id) == Some(cat))
                .count() as f64;
            let sigma = (n * w * (1.0 - w)).sqrt();
            assert!((k - n * w).abs() <= 3.0 * sigma, "{cat}: {k} vs {}", n * w);
        }
        for g in &c.graphs {
            assert!((MIN_TRIPLETS..=MAX_TRIPLETS).contains(&g.triplets.len()));
            assert!(g.is_canonical());
        }
    }

    #[test]
    fn weights_must_sum_to_one() {
        let m = CategoryModel::builtin();
        let p = CategoryProfile::new(&[("human", 0.7), ("animal", 0.2)]);
        assert!(synth_categories(&m, &p, 10, 1, "x").is_err());
        let p = CategoryProfile::new(&[("human", 0.5), ("robots", 0.5)]);
        assert!(synth_categories(&m, &p, 10, 1, "x").is_err());
        assert!(synth_categories(&m, &human_heavy(), 0, 1, "x").unwrap().is_empty());
    }

    #[test]
    fn deterministic() {
        let m = CategoryModel::builtin();
        let a = synth_categories(&m, &human_heavy(), 40, 7, "a").unwrap();
        let b = synth_categories(&m, &human_heavy(), 40, 7, "a").unwrap();
        assert_eq!(a.to_annotation_json(), b.to_annotation_json());
    }

    #[test]
    fn vocabulary_checks() {
        assert!(Vocabularies::parse(br#"{"a": {"entities": ["X", "y", "z", "w"], "relations": ["r", "s", "t"]}}"#).is_err());
        assert!(Vocabularies::parse(br#"{"a": {"entities": ["x", "y"], "relations": ["r", "s", "t"]}}"#).is_err());
        assert!(Vocabularies::parse(br#"{"a": {"entities": ["x", "y", "z", "w"], "relations": ["r", "s", "t"]}}"#).is_ok());
    }
}
