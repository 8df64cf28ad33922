//! Rule-based recovery of typed answers from free-form model output.
//!
//! Parsing is total: every input yields a [`ParsedAnswer`], falling back to
//! the configured default (and setting `defaulted`) when nothing usable is
//! found. When the text contains `answer:` markers, only the text after the
//! last one is considered.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer::{AnswerKind, AnswerValue, Hundredths};
use crate::metadata::vocabulary;

const DEFAULT_CONFIG: &str = include_str!("../../../config/parse_config.json");

static MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)answer\s*:").unwrap());
static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)%?").unwrap());
static DIGITS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+").unwrap());
static CLOSEST: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)([a-z][a-z ]*?)\s+(?:is|are)\s+(?:the\s+)?(?:closest|nearest)").unwrap()
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Defaults {
    pub binary: String,
    pub scalar: f64,
    pub count: u32,
    pub label: String,
}

/// Token lists, number words, and the label remapping table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseConfig {
    pub version: u32,
    pub affirmative_tokens: Vec<String>,
    pub negative_tokens: Vec<String>,
    pub affirmative_phrases: Vec<String>,
    pub negative_phrases: Vec<String>,
    pub number_words: BTreeMap<String, u32>,
    /// Canonical labels beyond the object vocabulary.
    pub extra_labels: Vec<String>,
    /// Synonym, plural, and fine-class remapping (source → canonical).
    pub remap: BTreeMap<String, String>,
    pub scalar_range: (f64, f64),
    pub count_clamp: u32,
    pub defaults: Defaults,
    #[serde(skip)]
    canonical: BTreeSet<String>,
}

#[derive(Debug, Error)]
pub enum ParseConfigError {
    #[error("reading parse config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing parse config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("parse config is inconsistent: {0}")]
    Invalid(String),
}

impl Default for ParseConfig {
    fn default() -> Self {
        ParseConfig::from_json(DEFAULT_CONFIG).expect("bundled parse config is valid")
    }
}

impl ParseConfig {
    pub fn from_json(text: &str) -> Result<Self, ParseConfigError> {
        let mut config: ParseConfig = serde_json::from_str(text)?;
        config.canonical = config.compute_canonical_labels();
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ParseConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn check(&self) -> Result<(), ParseConfigError> {
        let yes: BTreeSet<&str> = self
            .affirmative_tokens
            .iter()
            .chain(&self.affirmative_phrases)
            .map(String::as_str)
            .collect();
        let no: BTreeSet<&str> = self
            .negative_tokens
            .iter()
            .chain(&self.negative_phrases)
            .map(String::as_str)
            .collect();
        if let Some(t) = yes.intersection(&no).next() {
            return Err(ParseConfigError::Invalid(format!(
                "`{t}` is both affirmative and negative"
            )));
        }
        let canonical = &self.canonical;
        for (from, to) in &self.remap {
            if !canonical.contains(to) {
                return Err(ParseConfigError::Invalid(format!(
                    "remap `{from}` → `{to}` targets a non-canonical label"
                )));
            }
        }
        if self.defaults.binary != "yes" && self.defaults.binary != "no" {
            return Err(ParseConfigError::Invalid("binary default must be yes or no".into()));
        }
        let (lo, hi) = self.scalar_range;
        if !(lo <= self.defaults.scalar && self.defaults.scalar <= hi) {
            return Err(ParseConfigError::Invalid("scalar default outside range".into()));
        }
        Ok(())
    }

    /// Labels that normalize to themselves: the vocabulary plus extra
    /// labels, minus anything the remap table rewrites.
    pub fn canonical_labels(&self) -> &BTreeSet<String> {
        &self.canonical
    }

    fn compute_canonical_labels(&self) -> BTreeSet<String> {
        vocabulary()
            .into_iter()
            .map(str::to_owned)
            .chain(self.extra_labels.iter().cloned())
            .filter(|l| !self.remap.contains_key(l))
            .collect()
    }

    pub fn default_value(&self, kind: AnswerKind) -> AnswerValue {
        match kind {
            AnswerKind::Binary => AnswerValue::Binary(self.defaults.binary == "yes"),
            AnswerKind::Scalar => AnswerValue::Scalar(
                Hundredths::from_f64(self.defaults.scalar).unwrap_or(Hundredths::ZERO),
            ),
            AnswerKind::Count => AnswerValue::Count(self.defaults.count),
            AnswerKind::Label => AnswerValue::Label(self.defaults.label.clone()),
        }
    }

    /// Resolves one phrase to a canonical label without the `other` fallback.
    fn resolve(&self, phrase: &str, canonical: &BTreeSet<String>) -> Option<String> {
        let lookup = |p: &str| -> Option<String> {
            if let Some(to) = self.remap.get(p) {
                Some(to.clone())
            } else if canonical.contains(p) {
                Some(p.to_owned())
            } else {
                None
            }
        };
        if let Some(l) = lookup(phrase) {
            return Some(l);
        }
        // trailing-s singularization, tried on "-es" first ("buses", "benches")
        for suffix in ["es", "s"] {
            if let Some(stem) = phrase.strip_suffix(suffix) {
                if !stem.is_empty() {
                    if let Some(l) = lookup(stem) {
                        return Some(l);
                    }
                }
            }
        }
        None
    }
}

/// A recovered answer plus how it was obtained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAnswer {
    pub kind: AnswerKind,
    pub value: AnswerValue,
    /// The configured default was substituted.
    pub defaulted: bool,
    /// A count exceeded the clamp bound and was reduced to it.
    pub clamped: bool,
}

impl ParsedAnswer {
    fn found(value: AnswerValue) -> Self {
        ParsedAnswer {
            kind: value.kind(),
            value,
            defaulted: false,
            clamped: false,
        }
    }

    fn defaulted(kind: AnswerKind, config: &ParseConfig) -> Self {
        ParsedAnswer {
            kind,
            value: config.default_value(kind),
            defaulted: true,
            clamped: false,
        }
    }
}

/// Canonical text of an answer.
pub fn format_answer(answer: &AnswerValue) -> String {
    answer.canonical()
}

/// Text after the last `answer:` marker, or `None` when there is no marker.
pub fn after_last_marker(text: &str) -> Option<&str> {
    MARKER.find_iter(text).last().map(|m| &text[m.end()..])
}

fn tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

fn strip_articles(mut toks: &[String]) -> &[String] {
    while let Some(first) = toks.first() {
        if matches!(first.as_str(), "the" | "a" | "an") {
            toks = &toks[1..];
        } else {
            break;
        }
    }
    toks
}

/// Lowercases, strips punctuation and articles, singularizes, and applies
/// the remap table. Unmatched input maps to `other`.
pub fn normalize_object_label(token: &str, config: &ParseConfig) -> String {
    let toks = tokens(token);
    let phrase = strip_articles(&toks).join(" ");
    config
        .resolve(&phrase, config.canonical_labels())
        .unwrap_or_else(|| "other".to_owned())
}

/// Normalizes a gold answer so it compares equal to parsed predictions.
pub fn normalize_answer(answer: &AnswerValue, config: &ParseConfig) -> AnswerValue {
    match answer {
        AnswerValue::Label(l) => AnswerValue::Label(normalize_object_label(l, config)),
        other => other.clone(),
    }
}

fn phrase_at(toks: &[String], i: usize, phrase: &str) -> bool {
    let parts: Vec<&str> = phrase.split_whitespace().collect();
    toks.len() >= i + parts.len() && parts.iter().zip(&toks[i..]).all(|(p, t)| p == t)
}

/// Earliest phrase occurrence; at equal positions the longer phrase wins.
fn first_phrase(toks: &[String], phrases: &[(&str, bool)]) -> Option<bool> {
    for i in 0..toks.len() {
        let hit = phrases
            .iter()
            .filter(|(p, _)| phrase_at(toks, i, p))
            .max_by_key(|(p, _)| p.split_whitespace().count());
        if let Some((_, value)) = hit {
            return Some(*value);
        }
    }
    None
}

fn parse_binary(region: &str, config: &ParseConfig) -> Option<AnswerValue> {
    let toks = tokens(region);
    let strict: Vec<(&str, bool)> = config
        .affirmative_tokens
        .iter()
        .map(|t| (t.as_str(), true))
        .chain(config.negative_tokens.iter().map(|t| (t.as_str(), false)))
        .collect();
    let fallback: Vec<(&str, bool)> = config
        .affirmative_phrases
        .iter()
        .map(|t| (t.as_str(), true))
        .chain(config.negative_phrases.iter().map(|t| (t.as_str(), false)))
        .collect();
    first_phrase(&toks, &strict)
        .or_else(|| first_phrase(&toks, &fallback))
        .map(AnswerValue::Binary)
}

fn parse_scalar(region: &str, config: &ParseConfig) -> Option<AnswerValue> {
    let m = NUMBER.find(region)?;
    let raw = m.as_str();
    let (digits, percent) = match raw.strip_suffix('%') {
        Some(d) => (d, true),
        None => (raw, false),
    };
    let mut value: f64 = digits.parse().ok()?;
    if percent {
        value /= 100.0;
    }
    let (lo, hi) = config.scalar_range;
    if !(lo..=hi).contains(&value) {
        return None;
    }
    Hundredths::from_f64(value).map(AnswerValue::Scalar)
}

/// Returns the count and whether it was clamped.
fn parse_count(region: &str, config: &ParseConfig) -> Option<(u32, bool)> {
    let clamp = config.count_clamp;
    if let Some(m) = DIGITS.find(region) {
        return Some(match m.as_str().parse::<u64>() {
            Ok(n) if n <= u64::from(clamp) => (n as u32, false),
            _ => (clamp, true),
        });
    }
    tokens(region)
        .iter()
        .find_map(|t| config.number_words.get(t).copied())
        .map(|n| if n > clamp { (clamp, true) } else { (n, false) })
}

/// First (or last) label mentioned in `toks`, matching up to three-token
/// phrases, longest first.
fn scan_label(toks: &[String], config: &ParseConfig, canonical: &BTreeSet<String>, last: bool) -> Option<String> {
    let mut found = None;
    let mut i = 0;
    while i < toks.len() {
        let mut matched = None;
        for len in (1..=3.min(toks.len() - i)).rev() {
            let phrase = toks[i..i + len].join(" ");
            if let Some(label) = config.resolve(&phrase, canonical) {
                matched = Some((label, len));
                break;
            }
        }
        match matched {
            Some((label, len)) => {
                if !last {
                    return Some(label);
                }
                found = Some(label);
                i += len;
            }
            None => i += 1,
        }
    }
    found
}

fn parse_label(text: &str, config: &ParseConfig) -> ParsedAnswer {
    let canonical = config.canonical_labels();
    let (region, prefer_last) = match after_last_marker(text) {
        Some(r) => (r.to_owned(), false),
        None => match CLOSEST.captures_iter(text).last() {
            Some(c) => (c[1].to_owned(), true),
            None => (text.to_owned(), false),
        },
    };
    let toks = tokens(&region);
    let core = strip_articles(&toks);
    if core.is_empty() {
        return ParsedAnswer::defaulted(AnswerKind::Label, config);
    }
    let label = config
        .resolve(&core.join(" "), canonical)
        .or_else(|| scan_label(core, config, canonical, prefer_last))
        .unwrap_or_else(|| "other".to_owned());
    ParsedAnswer::found(AnswerValue::Label(label))
}

/// Parses raw model output as an answer of the expected kind.
pub fn parse(raw: &str, kind: AnswerKind, config: &ParseConfig) -> ParsedAnswer {
    let region = after_last_marker(raw).unwrap_or(raw);
    match kind {
        AnswerKind::Binary => parse_binary(region, config)
            .map(ParsedAnswer::found)
            .unwrap_or_else(|| ParsedAnswer::defaulted(kind, config)),
        AnswerKind::Scalar => parse_scalar(region, config)
            .map(ParsedAnswer::found)
            .unwrap_or_else(|| ParsedAnswer::defaulted(kind, config)),
        AnswerKind::Count => match parse_count(region, config) {
            Some((n, clamped)) => ParsedAnswer {
                clamped,
                ..ParsedAnswer::found(AnswerValue::Count(n))
            },
            None => ParsedAnswer::defaulted(kind, config),
        },
        AnswerKind::Label => parse_label(raw, config),
    }
}
