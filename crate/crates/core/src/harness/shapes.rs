//! Synthetic scenes of two or three simple shapes with spatial relations.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::rng_for;
use crate::scene_graph::{BaselineSizes, BoundingBox, Corpus, EntityRef, SceneGraph, Triplet};

pub const SHAPES: [&str; 3] = ["triangle", "circle", "rectangle"];
pub const SHAPE_RELATIONS: [&str; 4] = ["left", "right", "above", "below"];

const IMAGE_SIDE: f64 = 512.0;
/// Mean normalized centre per shape; the bias makes one relation dominate per pair.
const ANCHORS: [(f64, f64); 3] = [(0.25, 0.2), (0.75, 0.45), (0.3, 0.8)];
const JITTER: f64 = 0.12;

/// Relation of `head` to `tail` along the axis of larger displacement,
/// with image y growing downward.
pub(crate) fn spatial_relation(head: &BoundingBox, tail: &BoundingBox) -> &'static str {
    let (hx, hy) = head.center();
    let (tx, ty) = tail.center();
    let (dx, dy) = (tx - hx, ty - hy);
    if dx.abs() >= dy.abs() {
        if dx >= 0.0 {
            "left"
        } else {
            "right"
        }
    } else if dy >= 0.0 {
        "above"
    } else {
        "below"
    }
}

/// `n_graphs` scenes, each with every pairwise relation between its shapes
/// (earlier shape in [`SHAPES`] order as head) and a box per shape.
pub fn synth_shapes(n_graphs: usize, seed: u64) -> Corpus {
    let mut rng = rng_for(seed, 0);
    let jitter = Normal::new(0.0, JITTER).expect("valid jitter");
    let mut corpus = Corpus::default();
    for g in 0..n_graphs {
        let chosen: Vec<usize> = if rng.random_bool(0.5) {
            vec![0, 1, 2]
        } else {
            let skip = rng.random_range(0..3);
            (0..3).filter(|&i| i != skip).collect()
        };
        let mut boxes = Vec::with_capacity(chosen.len());
        for &s in &chosen {
            let (ax, ay) = ANCHORS[s];
            let w = rng.random_range(40..=100u16);
            let h = rng.random_range(40..=100u16);
            let cx = ((ax + jitter.sample(&mut rng)).clamp(0.05, 0.95)) * IMAGE_SIDE;
            let cy = ((ay + jitter.sample(&mut rng)).clamp(0.05, 0.95)) * IMAGE_SIDE;
            let x = (cx - f64::from(w) / 2.0).clamp(0.0, IMAGE_SIDE - f64::from(w)) as u16;
            let y = (cy - f64::from(h) / 2.0).clamp(0.0, IMAGE_SIDE - f64::from(h)) as u16;
            boxes.push(BoundingBox::new(x, y, w, h).expect("positive extent"));
        }
        let entity = |i: usize| EntityRef::new(SHAPES[chosen[i]], 0).expect("valid shape label");
        let mut graph = SceneGraph::new(format!("shape-{g:04}"), Vec::new());
        for i in 0..chosen.len() {
            for j in i + 1..chosen.len() {
                let rel = spatial_relation(&boxes[i], &boxes[j]);
                graph.triplets.push(Triplet::new(entity(i), rel, entity(j)));
            }
            graph.layout.insert(entity(i), boxes[i]);
        }
        corpus.baselines.insert(
            graph.image_id.clone(),
            BaselineSizes {
                jpeg_bytes: rng.random_range(9_000..=11_000),
                jpeg2000_bytes: rng.random_range(11_000..=13_000),
            },
        );
        corpus.graphs.push(graph);
    }
    corpus
}
