//! Chain-of-thought records: prompt construction, client invocation, and
//! validation that each rationale ends in the fixed base answer.

pub mod client;
pub mod rules;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer::AnswerValue;
use crate::digest;
use crate::metadata::SceneMetadata;
use crate::parser::{after_last_marker, normalize_answer, parse, ParseConfig};
use crate::qa::{Params, QAPair, Subtype};

pub use client::{display_answer, ClientError, HttpChatClient, HttpConfig, MockVerbalizer, TextGenerator};
pub use rules::{missing_rules, rule_for, ReasoningRule, RULES};

/// Directive every prompt closes its task list with.
pub const ANSWER_DIRECTIVE: &str = "Conclude your reasoning with: Answer: <final answer>.";

const PREAMBLE: &str =
    "You are an assistant that generates chain-of-thought (CoT) answers for visual question answering tasks.";

const TASK: [&str; 5] = [
    "Your task is to generate a detailed step-by-step reasoning process (CoT Answer) that explains how the provided answer is derived based on the metadata.",
    "You must strictly follow the reasoning rule associated with the question’s subtype as defined in the subtype-to-reasoning mapping table.",
    "You must not use reasoning from any other subtype. Only apply the rule that matches the provided subtype.",
    "You must always arrive at the same provided answer. The final answer should never change.",
    ANSWER_DIRECTIVE,
];

const CONSTRAINTS: [&str; 3] = [
    "The metadata, question, and answer are fixed and must not be modified.",
    "You must write as if directly observing the image. Do not mention metadata, rules, or the dataset.",
    "Do not invent additional information not present in the metadata.",
];

#[derive(Debug, Error)]
pub enum CotError {
    #[error("unknown subtype `{0}`")]
    UnknownSubtype(String),
    #[error("QA {qa_id} is for image {qa_image} but metadata is for {meta_image}")]
    ImageMismatch {
        qa_id: String,
        qa_image: String,
        meta_image: String,
    },
    #[error("no metadata for image {image_id} (QA {qa_id})")]
    MissingMetadata { qa_id: String, image_id: String },
    #[error("client failed on QA {qa_id}: {source}")]
    ClientFailure {
        qa_id: String,
        #[source]
        source: ClientError,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn lookup_rule(subtype: &str) -> Result<&'static ReasoningRule, CotError> {
    rules::find_rule(subtype).ok_or_else(|| CotError::UnknownSubtype(subtype.to_owned()))
}

/// Everything the generator is given for one QA pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CoTPrompt {
    pub qa_id: String,
    pub subtype: Subtype,
    pub params: Params,
    /// The record serialized as JSON.
    pub metadata_block: String,
    pub question: String,
    pub answer: AnswerValue,
    pub rule_text: &'static str,
}

impl CoTPrompt {
    /// The full prompt text sent to a client.
    pub fn text(&self) -> String {
        let mut s = String::with_capacity(2048 + self.metadata_block.len());
        let _ = writeln!(s, "{PREAMBLE}\n");
        let _ = writeln!(s, "Given:");
        let _ = writeln!(s, "- Metadata: {}", self.metadata_block);
        let _ = writeln!(s, "- Question: {}", self.question);
        let _ = writeln!(s, "- Answer: {}\n", display_answer(&self.answer));
        let _ = writeln!(s, "Reasoning rule:");
        let _ = writeln!(s, "- Subtype: {}", self.subtype);
        let _ = writeln!(s, "- Rule: {}\n", self.rule_text);
        let _ = writeln!(s, "Your task:");
        for line in TASK {
            let _ = writeln!(s, "- {line}");
        }
        let _ = writeln!(s, "\nImportant Constraints:");
        for line in CONSTRAINTS {
            let _ = writeln!(s, "- {line}");
        }
        s
    }

    /// SHA-256 of [`CoTPrompt::text`].
    pub fn hash(&self) -> String {
        digest::sha256_hex(self.text().as_bytes())
    }
}

pub fn build_prompt(qa: &QAPair, meta: &SceneMetadata) -> Result<CoTPrompt, CotError> {
    if qa.image_id != meta.image_id {
        return Err(CotError::ImageMismatch {
            qa_id: qa.qa_id.clone(),
            qa_image: qa.image_id.clone(),
            meta_image: meta.image_id.clone(),
        });
    }
    Ok(CoTPrompt {
        qa_id: qa.qa_id.clone(),
        subtype: qa.subtype,
        params: qa.params.clone(),
        metadata_block: meta.to_json(),
        question: qa.question.clone(),
        answer: qa.answer.clone(),
        rule_text: rule_for(qa.subtype).rule_text,
    })
}

/// Why a rationale was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CotIssue {
    MissingAnswerLine,
    Unparsable,
    Mismatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CotValidation {
    pub valid: bool,
    /// The parsed final answer, when one could be read.
    pub final_answer: Option<AnswerValue>,
    pub issue: Option<CotIssue>,
}

/// Reads the last `Answer:` line of `rationale` and compares it with `base`
/// under the answer parser's normalization.
pub fn validate_cot(rationale: &str, base: &AnswerValue, config: &ParseConfig) -> CotValidation {
    let reject = |final_answer, issue| CotValidation {
        valid: false,
        final_answer,
        issue: Some(issue),
    };
    if after_last_marker(rationale).is_none() {
        return reject(None, CotIssue::MissingAnswerLine);
    }
    let parsed = parse(rationale, base.kind(), config);
    if parsed.defaulted {
        return reject(None, CotIssue::Unparsable);
    }
    if parsed.value != normalize_answer(base, config) {
        return reject(Some(parsed.value), CotIssue::Mismatch);
    }
    CotValidation {
        valid: true,
        final_answer: Some(parsed.value),
        issue: None,
    }
}

/// One line of CoT output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoTRecord {
    pub qa_id: String,
    pub prompt_hash: String,
    pub rationale: String,
    pub final_answer: Option<AnswerValue>,
    pub valid: bool,
    #[serde(skip)]
    pub issue: Option<CotIssue>,
}

impl CoTRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("cot record serializes")
    }
}

/// Builds the prompt, calls the client once, and validates the result.
/// Rejected rationales still produce a record (with `valid = false`).
pub fn generate_cot(
    qa: &QAPair,
    meta: &SceneMetadata,
    client: &dyn TextGenerator,
    config: &ParseConfig,
) -> Result<CoTRecord, CotError> {
    let prompt = build_prompt(qa, meta)?;
    let rationale = client.complete(&prompt).map_err(|source| CotError::ClientFailure {
        qa_id: qa.qa_id.clone(),
        source,
    })?;
    let check = validate_cot(&rationale, &qa.answer, config);
    Ok(CoTRecord {
        qa_id: qa.qa_id.clone(),
        prompt_hash: prompt.hash(),
        rationale,
        final_answer: check.final_answer,
        valid: check.valid,
        issue: check.issue,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CotRunStats {
    pub total: usize,
    pub valid: usize,
    pub invalid: usize,
}

/// Generates CoT records for `pairs` with up to `in_flight` concurrent client
/// calls, handing records to `sink` in input order.
pub fn run_cot(
    pairs: &[QAPair],
    metadata: &HashMap<String, SceneMetadata>,
    client: &dyn TextGenerator,
    config: &ParseConfig,
    in_flight: usize,
    mut sink: impl FnMut(&CoTRecord) -> io::Result<()>,
) -> Result<CotRunStats, CotError> {
    let mut stats = CotRunStats::default();
    for chunk in pairs.chunks(in_flight.max(1)) {
        let records: Vec<Result<CoTRecord, CotError>> = chunk
            .par_iter()
            .map(|qa| {
                let meta = metadata.get(&qa.image_id).ok_or_else(|| CotError::MissingMetadata {
                    qa_id: qa.qa_id.clone(),
                    image_id: qa.image_id.clone(),
                })?;
                generate_cot(qa, meta, client, config)
            })
            .collect();
        for record in records {
            let record = record?;
            stats.total += 1;
            if record.valid {
                stats.valid += 1;
            } else {
                stats.invalid += 1;
            }
            sink(&record)?;
        }
    }
    Ok(stats)
}
