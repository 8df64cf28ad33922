//! Corpus generation: every applicable subtype for every record.
//!
//! All randomness (object picks, option order, template choice) comes from
//! streams derived from `(seed, image_id, subtype)`, so a record's questions
//! do not depend on which other records or subtypes are processed, nor on
//! thread scheduling.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::composite::CompositeCatalog;
use super::derive::derive_answer;
use super::templates::render_question;
use super::{qa_id, QAPair, QuestionSpec, Subtype};
use crate::digest;
use crate::metadata::{validate_metadata, SceneMetadata, ViewFactor, DETECTOR_LABELS};

/// Records processed per parallel batch when streaming.
pub const STREAM_BATCH: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    /// Subtypes to emit. Empty means all.
    pub enabled: BTreeSet<Subtype>,
    /// Maximum questions per record for a subtype.
    pub max_per_record: BTreeMap<Subtype, usize>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            enabled: Subtype::ALL.iter().copied().collect(),
            max_per_record: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading generation config: {0}")]
    Io(#[from] io::Error),
    #[error("parsing generation config: {0}")]
    Parse(#[from] serde_json::Error),
}

impl GenerationConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn is_enabled(&self, subtype: Subtype) -> bool {
        self.enabled.is_empty() || self.enabled.contains(&subtype)
    }

    pub fn only(subtypes: impl IntoIterator<Item = Subtype>) -> Self {
        GenerationConfig {
            enabled: subtypes.into_iter().collect(),
            ..Default::default()
        }
    }
}

fn stream_rng(seed: u64, image_id: &str, subtype: Subtype) -> ChaCha8Rng {
    digest::rng_for(seed, &format!("{image_id}\u{1f}{subtype}"))
}

fn detector_split(meta: &SceneMetadata) -> (Vec<&'static str>, Vec<&'static str>) {
    DETECTOR_LABELS
        .iter()
        .copied()
        .partition(|l| meta.objects.is_present(l))
}

/// Candidate specs for one subtype on one record, before caps.
fn candidates(
    meta: &SceneMetadata,
    subtype: Subtype,
    catalog: &CompositeCatalog,
    rng: &mut ChaCha8Rng,
) -> Vec<QuestionSpec> {
    use Subtype::*;
    let spec = || QuestionSpec::new(subtype);
    let (present, absent) = detector_split(meta);

    match subtype {
        ProportionDominance | ProportionSparsity | ProportionScalar => ViewFactor::ALL
            .iter()
            .map(|f| spec().with("factor", f.as_str()))
            .collect(),
        DepthBinary | DepthCategorical | CfCountPerturbation | CfAbsenceProportion
        | CfAttributeSubstitution | NegationConjunction | MultihopCountCompare => vec![spec()],
        DepthClosestObject => {
            if meta.depth.closest_object.is_some() && !meta.depth.order.is_empty() {
                vec![spec()]
            } else {
                vec![]
            }
        }
        LayoutBinary | LayoutLabel => meta
            .layout
            .placement
            .keys()
            .map(|o| spec().with("object", o.as_str()))
            .collect(),
        LayoutTopEntity => {
            if meta.layout.top_entity.is_some() {
                vec![spec()]
            } else {
                vec![]
            }
        }
        ObjectCount | ObjectPresence => {
            let mut out: Vec<QuestionSpec> =
                present.iter().map(|o| spec().with("object", *o)).collect();
            if let Some(o) = absent.choose(rng) {
                out.push(spec().with("object", *o));
            }
            out
        }
        ObjectCooccurrence => {
            let first = present.choose(rng).or_else(|| DETECTOR_LABELS.choose(rng)).copied();
            match first {
                Some(a) => {
                    let others: Vec<&str> =
                        DETECTOR_LABELS.iter().copied().filter(|l| *l != a).collect();
                    let b = others.choose(rng).expect("vocabulary has several labels");
                    vec![spec().with("object_a", a).with("object_b", *b)]
                }
                None => vec![],
            }
        }
        NegationAbsence => {
            let mut out = Vec::new();
            if let Some(o) = absent.choose(rng) {
                out.push(spec().with("object", *o));
            }
            if let Some(o) = present.choose(rng) {
                out.push(spec().with("object", *o));
            }
            out
        }
        NegationExclusionChoice => {
            if absent.is_empty() {
                return vec![];
            }
            let mut options: Vec<&str> = present.choose_multiple(rng, 2).copied().collect();
            let fill = 3 - options.len();
            options.extend(absent.choose_multiple(rng, fill).copied());
            options.shuffle(rng);
            vec![spec().with_list("options", options)]
        }
        NegationSpatialRefute => {
            if meta.depth.order.len() < 2 {
                return vec![];
            }
            let pair: Vec<&String> = meta.depth.order.choose_multiple(rng, 2).collect();
            let (a, b) = if rand::Rng::random_bool(rng, 0.5) {
                (pair[0], pair[1])
            } else {
                (pair[1], pair[0])
            };
            vec![spec().with("object_a", a.as_str()).with("object_b", b.as_str())]
        }
        NegationComposite => match catalog.statements.choose(rng) {
            Some(s) => vec![spec()
                .with("statement_id", s.id.as_str())
                .with("statement", s.statement.as_str())],
            None => vec![],
        },
        CfOcclusionMovement => {
            if meta.objects.is_present("bus") && meta.objects.is_present("person") {
                vec![spec()]
            } else {
                vec![]
            }
        }
        MultihopWhichIsMore => {
            if meta.objects.count("person") != meta.objects.count("car") {
                vec![spec()]
            } else {
                vec![]
            }
        }
    }
}

/// All QA pairs for one record, sorted by `qa_id`.
pub fn generate_for_record(
    meta: &SceneMetadata,
    config: &GenerationConfig,
    catalog: &CompositeCatalog,
    seed: u64,
) -> Vec<QAPair> {
    let render_seed = digest::derive_seed(seed, &meta.image_id);
    let mut out = Vec::new();
    for &subtype in Subtype::ALL {
        if !config.is_enabled(subtype) {
            continue;
        }
        let mut rng = stream_rng(seed, &meta.image_id, subtype);
        let mut specs = candidates(meta, subtype, catalog, &mut rng);
        if let Some(&cap) = config.max_per_record.get(&subtype) {
            if specs.len() > cap {
                specs.shuffle(&mut rng);
                specs.truncate(cap);
            }
        }
        for spec in specs {
            let answer = match derive_answer(meta, &spec, catalog) {
                Ok(a) => a,
                Err(e) => {
                    log::debug!("{}: skipping {}: {e}", meta.image_id, spec.subtype);
                    continue;
                }
            };
            let rendered = match render_question(&spec, render_seed) {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("{}: cannot render {}: {e}", meta.image_id, spec.subtype);
                    continue;
                }
            };
            out.push(QAPair {
                qa_id: qa_id(&meta.image_id, &spec),
                image_id: meta.image_id.clone(),
                category: spec.category,
                subtype: spec.subtype,
                params: spec.params,
                question: rendered.text,
                answer,
                template_id: Some(rendered.template_id),
            });
        }
    }
    out.sort_by(|a, b| a.qa_id.cmp(&b.qa_id));
    out.dedup_by(|a, b| a.qa_id == b.qa_id);
    out
}

/// Drops invalid records and repeated image ids (first wins), then sorts
/// by image id. Returns the kept records and the number skipped.
pub fn prepare_records(records: impl IntoIterator<Item = SceneMetadata>) -> (Vec<SceneMetadata>, usize) {
    let mut seen = BTreeSet::new();
    let mut kept = Vec::new();
    let mut skipped = 0;
    for meta in records {
        let report = validate_metadata(&meta);
        if !report.is_valid() {
            log::warn!("skipping invalid record {}: {:?}", meta.image_id, report.violations);
            skipped += 1;
            continue;
        }
        if !seen.insert(meta.image_id.clone()) {
            log::warn!("skipping repeated image id {}", meta.image_id);
            skipped += 1;
            continue;
        }
        kept.push(meta);
    }
    kept.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    (kept, skipped)
}

/// Generates the full corpus in canonical `(image_id, qa_id)` order.
pub fn generate_corpus(
    records: impl IntoIterator<Item = SceneMetadata>,
    config: &GenerationConfig,
    catalog: &CompositeCatalog,
    seed: u64,
) -> Vec<QAPair> {
    let (records, _) = prepare_records(records);
    records
        .par_iter()
        .map(|m| generate_for_record(m, config, catalog, seed))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Streams the corpus as JSONL in canonical order, processing records in
/// parallel batches. `records` must already be prepared (validated, unique,
/// sorted). Calls `observe` on each pair in output order.
pub fn write_corpus<W: Write>(
    records: &[SceneMetadata],
    config: &GenerationConfig,
    catalog: &CompositeCatalog,
    seed: u64,
    mut out: W,
    mut observe: impl FnMut(&QAPair, &str),
) -> io::Result<usize> {
    let mut written = 0;
    for batch in records.chunks(STREAM_BATCH) {
        let lines: Vec<Vec<(QAPair, String)>> = batch
            .par_iter()
            .map(|m| {
                generate_for_record(m, config, catalog, seed)
                    .into_iter()
                    .map(|qa| {
                        let line = qa.to_json();
                        (qa, line)
                    })
                    .collect()
            })
            .collect();
        for (qa, line) in lines.iter().flatten() {
            out.write_all(line.as_bytes())?;
            out.write_all(b"\n")?;
            observe(qa, line);
            written += 1;
        }
    }
    out.flush()?;
    Ok(written)
}
