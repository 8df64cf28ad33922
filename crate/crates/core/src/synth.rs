//! Random valid scene metadata, for load tests, benchmarks, and property
//! tests. Values land on exact rule thresholds often enough to exercise
//! boundary behaviour.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::digest;
use crate::metadata::{
    DepthSummary, LayoutMap, ObjectInventory, Placement, SceneMetadata, ViewFactors, CITYSCAPES_CLASSES,
    DETECTOR_LABELS,
};

const TOP_ENTITIES: [&str; 4] = ["building", "sky", "vegetation", "tree"];
const DEPTH_LANDMARKS: [f64; 4] = [0.0, 20.0, 40.0, 80.0];

/// View-factor triple summing to at most one.
fn view_factors(rng: &mut ChaCha8Rng) -> ViewFactors {
    let g = rng.random_range(0..=100u32);
    let s = rng.random_range(0..=100 - g);
    let b = rng.random_range(0..=100 - g - s);
    let mut hundredths = [g, s, b];
    hundredths.shuffle(rng);
    let mut v = hundredths.map(|h| f64::from(h) / 100.0);
    if rng.random_bool(0.5) {
        for x in &mut v {
            *x += rng.random_range(0.0..0.01);
        }
        let mass: f64 = v.iter().sum();
        if mass > 1.0 {
            v = v.map(|x| x / mass);
        }
        v = v.map(|x| x.min(1.0));
    }
    ViewFactors {
        greenery: v[0],
        sky: v[1],
        building: v[2],
    }
}

fn objects(rng: &mut ChaCha8Rng) -> ObjectInventory {
    let mut counts = BTreeMap::new();
    for label in DETECTOR_LABELS {
        if rng.random_bool(0.55) {
            let n = if rng.random_bool(0.9) {
                rng.random_range(1..=8)
            } else {
                rng.random_range(9..=40)
            };
            counts.insert(label.to_owned(), n);
        }
    }
    for label in ["building", "pole", "traffic sign", "rider"] {
        if rng.random_bool(0.2) {
            counts.insert(label.to_owned(), rng.random_range(1..=5));
        }
    }
    ObjectInventory::new(counts)
}

fn depth(rng: &mut ChaCha8Rng, objects: &ObjectInventory) -> DepthSummary {
    let range = if rng.random_bool(0.15) {
        *DEPTH_LANDMARKS.choose(rng).unwrap()
    } else {
        (rng.random_range(0.0..80.0f64) * 10.0).round() / 10.0
    };
    let mut means = BTreeMap::new();
    for label in objects.present_labels() {
        if rng.random_bool(0.8) {
            means.insert(label.to_owned(), (rng.random_range(0.5..60.0f64) * 10.0).round() / 10.0);
        }
    }
    if rng.random_bool(0.5) {
        let extra = *CITYSCAPES_CLASSES.choose(rng).unwrap();
        means
            .entry(extra.to_owned())
            .or_insert_with(|| (rng.random_range(0.5..60.0f64) * 10.0).round() / 10.0);
    }
    DepthSummary::from_means(range, means)
}

fn layout(rng: &mut ChaCha8Rng, objects: &ObjectInventory) -> LayoutMap {
    let mut placement = BTreeMap::new();
    for label in objects.present_labels() {
        if rng.random_bool(0.7) {
            placement.insert(label.to_owned(), *Placement::ALL.choose(rng).unwrap());
        }
    }
    let top_entity = rng
        .random_bool(0.9)
        .then(|| (*TOP_ENTITIES.choose(rng).unwrap()).to_owned());
    LayoutMap { placement, top_entity }
}

/// One valid record, determined by `(seed, index)`.
pub fn scene(seed: u64, index: usize) -> SceneMetadata {
    let image_id = format!("synth_{index:07}");
    let mut rng = digest::rng_for(seed, &image_id);
    let view_factors = view_factors(&mut rng);
    let objects = objects(&mut rng);
    let depth = depth(&mut rng, &objects);
    let layout = layout(&mut rng, &objects);
    SceneMetadata {
        image_id,
        view_factors,
        objects,
        depth,
        layout,
        extra: BTreeMap::new(),
    }
}

/// `n` valid records with distinct, sorted image ids.
pub fn scenes(seed: u64, n: usize) -> Vec<SceneMetadata> {
    (0..n).map(|i| scene(seed, i)).collect()
}
