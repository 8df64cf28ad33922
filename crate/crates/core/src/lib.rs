//! Deterministic VQA corpus construction from urban-scene metadata, plus
//! rule-based answer parsing and evaluation.

pub mod answer;
pub mod cot;
pub mod dataset;
pub mod digest;
pub mod metadata;
pub mod metrics;
pub mod parser;
pub mod qa;
pub mod synth;

pub use answer::{AnswerKind, AnswerValue, Hundredths};
pub use metadata::{
    parse_metadata_record, validate_metadata, DepthSummary, LayoutMap, MetadataError, ObjectInventory,
    Placement, SceneMetadata, ValidationReport, ViewFactor, ViewFactors, Violation,
};
pub use metrics::{
    compare_runs, evaluate, join_predictions, EvalRecord, MetricDelta, MetricError, MetricReport, Prediction,
};
pub use parser::{parse, ParseConfig, ParsedAnswer};
pub use qa::{
    derive_answer, generate_corpus, generate_for_record, render_question, Category, CompositeCatalog,
    DeriveError, GenerationConfig, QAPair, QuestionSpec, Subtype,
};
