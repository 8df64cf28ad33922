//! Per-image scene metadata: wire format, validation, canonical serialization.
//!
//! One record per line (JSONL):
//!
//! ```text
//! {"image_id": "...",
//!  "proportions": {"greenery": 0.35, "sky": 0.15, "building": 0.40},
//!  "objects": {"person": 2, "car": 5},
//!  "depth": {"range": 41.5, "per_object_mean": {...}, "closest_object": "person", "order": [...]},
//!  "layout": {"placement": {"building": "left side"}, "top_entity": "building"}}
//! ```
//!
//! Unknown top-level fields are kept and written back out on serialization.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The 19 Cityscapes segmentation classes.
pub const CITYSCAPES_CLASSES: [&str; 19] = [
    "road",
    "sidewalk",
    "building",
    "wall",
    "fence",
    "pole",
    "traffic light",
    "traffic sign",
    "vegetation",
    "terrain",
    "sky",
    "person",
    "rider",
    "car",
    "truck",
    "bus",
    "train",
    "motorcycle",
    "bicycle",
];

/// Urban-relevant detector labels. Object questions draw their subjects
/// from this list.
pub const DETECTOR_LABELS: [&str; 9] = [
    "person",
    "car",
    "bus",
    "truck",
    "bicycle",
    "motorcycle",
    "bench",
    "traffic light",
    "tree",
];

/// Tolerance on the view-factor mass bound.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Returns true when `label` belongs to the closed object vocabulary.
pub fn is_vocabulary_label(label: &str) -> bool {
    CITYSCAPES_CLASSES.contains(&label) || DETECTOR_LABELS.contains(&label)
}

/// Sorted, deduplicated vocabulary (Cityscapes classes plus detector labels).
pub fn vocabulary() -> Vec<&'static str> {
    let mut v: Vec<&'static str> = CITYSCAPES_CLASSES
        .iter()
        .chain(DETECTOR_LABELS.iter())
        .copied()
        .collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// A view factor measured by segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewFactor {
    Greenery,
    Sky,
    Building,
}

impl ViewFactor {
    pub const ALL: [ViewFactor; 3] = [ViewFactor::Greenery, ViewFactor::Sky, ViewFactor::Building];

    pub fn as_str(self) -> &'static str {
        match self {
            ViewFactor::Greenery => "greenery",
            ViewFactor::Sky => "sky",
            ViewFactor::Building => "building",
        }
    }
}

impl fmt::Display for ViewFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ViewFactor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "greenery" => Ok(ViewFactor::Greenery),
            "sky" => Ok(ViewFactor::Sky),
            "building" => Ok(ViewFactor::Building),
            other => Err(format!("unknown view factor `{other}`")),
        }
    }
}

/// Green, sky, and building view fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewFactors {
    pub greenery: f64,
    pub sky: f64,
    pub building: f64,
}

impl ViewFactors {
    pub fn get(&self, factor: ViewFactor) -> f64 {
        match factor {
            ViewFactor::Greenery => self.greenery,
            ViewFactor::Sky => self.sky,
            ViewFactor::Building => self.building,
        }
    }
}

/// Object counts keyed by vocabulary label. An absent key means zero.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "BTreeMap<String, u32>", into = "BTreeMap<String, u32>")]
pub struct ObjectInventory {
    counts: BTreeMap<String, u32>,
}

impl ObjectInventory {
    pub fn new(counts: BTreeMap<String, u32>) -> Self {
        let mut inv = ObjectInventory { counts };
        inv.canonicalize();
        inv
    }

    pub fn count(&self, label: &str) -> u32 {
        self.counts.get(label).copied().unwrap_or(0)
    }

    pub fn is_present(&self, label: &str) -> bool {
        self.count(label) >= 1
    }

    /// Labels with a count of at least one, in sorted order.
    pub fn present_labels(&self) -> impl Iterator<Item = &str> {
        self.counts
            .iter()
            .filter(|(_, &n)| n > 0)
            .map(|(k, _)| k.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v))
    }

    // Explicit zero and a missing key must be indistinguishable downstream,
    // including on re-serialization.
    fn canonicalize(&mut self) {
        self.counts.retain(|_, n| *n > 0);
    }
}

impl From<BTreeMap<String, u32>> for ObjectInventory {
    fn from(counts: BTreeMap<String, u32>) -> Self {
        ObjectInventory::new(counts)
    }
}

impl From<ObjectInventory> for BTreeMap<String, u32> {
    fn from(inv: ObjectInventory) -> Self {
        inv.counts
    }
}

impl FromIterator<(String, u32)> for ObjectInventory {
    fn from_iter<T: IntoIterator<Item = (String, u32)>>(iter: T) -> Self {
        ObjectInventory::new(iter.into_iter().collect())
    }
}

/// Depth statistics from the monocular depth map, in relative model units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthSummary {
    pub range: f64,
    #[serde(default)]
    pub per_object_mean: BTreeMap<String, f64>,
    #[serde(default)]
    pub closest_object: Option<String>,
    #[serde(default)]
    pub order: Vec<String>,
}

impl DepthSummary {
    /// Builds a consistent summary from per-object means: `order` is sorted
    /// nearest to farthest (ties by label) and `closest_object` is its head.
    pub fn from_means(range: f64, per_object_mean: BTreeMap<String, f64>) -> Self {
        let mut order: Vec<String> = per_object_mean.keys().cloned().collect();
        order.sort_by(|a, b| {
            per_object_mean[a]
                .total_cmp(&per_object_mean[b])
                .then_with(|| a.cmp(b))
        });
        DepthSummary {
            range,
            closest_object: order.first().cloned(),
            per_object_mean,
            order,
        }
    }

    pub fn mean(&self, label: &str) -> Option<f64> {
        self.per_object_mean.get(label).copied()
    }
}

/// Horizontal placement literal for an object class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Placement {
    #[serde(rename = "left side")]
    Left,
    #[serde(rename = "right side")]
    Right,
    #[serde(rename = "even")]
    Even,
}

impl Placement {
    pub const ALL: [Placement; 3] = [Placement::Left, Placement::Right, Placement::Even];

    pub fn as_str(self) -> &'static str {
        match self {
            Placement::Left => "left side",
            Placement::Right => "right side",
            Placement::Even => "even",
        }
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutMap {
    #[serde(default)]
    pub placement: BTreeMap<String, Placement>,
    #[serde(default)]
    pub top_entity: Option<String>,
}

/// The structured record grounding every question about one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMetadata {
    pub image_id: String,
    #[serde(rename = "proportions")]
    pub view_factors: ViewFactors,
    #[serde(default)]
    pub objects: ObjectInventory,
    pub depth: DepthSummary,
    #[serde(default)]
    pub layout: LayoutMap,
    /// Unrecognized top-level fields, preserved verbatim.
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl SceneMetadata {
    /// Compact canonical JSON (one line, keys in fixed order).
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("metadata serializes")
    }
}

/// A single violated invariant, addressed by a dotted field path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }
}

#[derive(Debug, Error)]
pub enum MetadataError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("invariant violation: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvariantViolation(Vec<Violation>),
}

/// Parses one serialized record and checks every invariant.
pub fn parse_metadata_record(text: &str) -> Result<SceneMetadata, MetadataError> {
    let meta: SceneMetadata = serde_json::from_str(text.trim_end()).map_err(|e| {
        use serde_json::error::Category;
        match e.classify() {
            Category::Data => MetadataError::SchemaViolation(e.to_string()),
            _ => MetadataError::MalformedRecord(e.to_string()),
        }
    })?;
    if !meta.extra.is_empty() {
        log::warn!(
            "record {}: unknown fields {:?} kept as-is",
            meta.image_id,
            meta.extra.keys().collect::<Vec<_>>()
        );
    }
    let report = validate_metadata(&meta);
    if report.is_valid() {
        Ok(meta)
    } else {
        Err(MetadataError::InvariantViolation(report.violations))
    }
}

fn check_fraction(report: &mut ValidationReport, path: &str, value: f64) {
    if !value.is_finite() || !(0.0..=1.0).contains(&value) {
        report.push(path, format!("{value} is outside [0, 1]"));
    }
}

fn check_label(report: &mut ValidationReport, path: String, label: &str) {
    if !is_vocabulary_label(label) {
        report.push(path, format!("`{label}` is not a vocabulary label"));
    }
}

/// Lists every violated invariant. An empty report means the record is valid.
pub fn validate_metadata(meta: &SceneMetadata) -> ValidationReport {
    let mut report = ValidationReport::default();

    if meta.image_id.trim().is_empty() {
        report.push("image_id", "must be nonempty");
    }

    let vf = &meta.view_factors;
    check_fraction(&mut report, "proportions.greenery", vf.greenery);
    check_fraction(&mut report, "proportions.sky", vf.sky);
    check_fraction(&mut report, "proportions.building", vf.building);
    let mass = vf.greenery + vf.sky + vf.building;
    if mass > 1.0 + MASS_TOLERANCE {
        report.push("proportions", format!("greenery + sky + building = {mass} exceeds 1"));
    }

    for (label, _) in meta.objects.iter() {
        check_label(&mut report, format!("objects.{label}"), label);
    }

    let depth = &meta.depth;
    if !depth.range.is_finite() || depth.range < 0.0 {
        report.push("depth.range", format!("{} must be a nonnegative number", depth.range));
    }
    for (label, &mean) in &depth.per_object_mean {
        check_label(&mut report, format!("depth.per_object_mean.{label}"), label);
        if !mean.is_finite() || mean < 0.0 {
            report.push(
                format!("depth.per_object_mean.{label}"),
                format!("{mean} must be a nonnegative number"),
            );
        }
    }
    check_depth_order(&mut report, depth);

    for label in meta.layout.placement.keys() {
        check_label(&mut report, format!("layout.placement.{label}"), label);
    }
    if let Some(top) = &meta.layout.top_entity {
        check_label(&mut report, "layout.top_entity".to_owned(), top);
    }

    report
}

fn check_depth_order(report: &mut ValidationReport, depth: &DepthSummary) {
    let mut listed: Vec<&str> = depth.order.iter().map(String::as_str).collect();
    listed.sort_unstable();
    let keys: Vec<&str> = depth.per_object_mean.keys().map(String::as_str).collect();
    if listed != keys {
        report.push(
            "depth.order",
            "must be a permutation of depth.per_object_mean keys",
        );
    } else if depth
        .order
        .windows(2)
        .any(|w| depth.per_object_mean[&w[0]] > depth.per_object_mean[&w[1]])
    {
        report.push("depth.order", "must be sorted nearest to farthest by mean depth");
    }

    match (&depth.closest_object, depth.order.first()) {
        (Some(closest), Some(first)) if closest != first => report.push(
            "depth.closest_object",
            format!("`{closest}` differs from first entry of depth.order `{first}`"),
        ),
        (Some(closest), None) => report.push(
            "depth.closest_object",
            format!("`{closest}` given but depth.order is empty"),
        ),
        (None, Some(_)) => report.push("depth.closest_object", "missing while depth.order is nonempty"),
        _ => {}
    }
}

/// The metadata of the worked example image, used throughout the
/// tests and the README walkthrough.
pub fn example_scene() -> SceneMetadata {
    parse_metadata_record(EXAMPLE_RECORD).expect("example record is valid")
}

pub const EXAMPLE_RECORD: &str = r#"{"image_id":"example_0001","proportions":{"greenery":0.35,"sky":0.15,"building":0.40},"objects":{"person":2,"car":5,"building":2},"depth":{"range":41.5,"per_object_mean":{"person":6.2,"car":14.8,"building":33.0},"closest_object":"person","order":["person","car","building"]},"layout":{"placement":{"building":"left side","car":"right side"},"top_entity":"building"}}"#;
