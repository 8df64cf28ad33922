//! Typed answers shared by generation, parsing, and scoring.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Upper bound for count answers. Parsed counts above it are clamped.
pub const COUNT_CLAMP: u32 = 100;

/// Answer family of a question subtype.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerKind {
    Binary,
    Scalar,
    Count,
    Label,
}

impl AnswerKind {
    pub const ALL: [AnswerKind; 4] = [
        AnswerKind::Binary,
        AnswerKind::Scalar,
        AnswerKind::Count,
        AnswerKind::Label,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AnswerKind::Binary => "binary",
            AnswerKind::Scalar => "scalar",
            AnswerKind::Count => "count",
            AnswerKind::Label => "label",
        }
    }

    /// Numeric kinds are scored by MAE, the rest by accuracy and F1.
    pub fn is_numeric(self) -> bool {
        matches!(self, AnswerKind::Scalar | AnswerKind::Count)
    }
}

impl fmt::Display for AnswerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnswerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" => Ok(AnswerKind::Binary),
            "scalar" => Ok(AnswerKind::Scalar),
            "count" => Ok(AnswerKind::Count),
            "label" => Ok(AnswerKind::Label),
            other => Err(format!("unknown answer kind `{other}`")),
        }
    }
}

/// A proportion in [0, 1] held as an integer number of hundredths, so the
/// two-decimal canonical form is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Hundredths(u8);

impl Hundredths {
    pub const ZERO: Hundredths = Hundredths(0);

    pub fn new(hundredths: u8) -> Option<Self> {
        (hundredths <= 100).then_some(Hundredths(hundredths))
    }

    /// Rounds half-up to two decimals. Returns `None` outside [0, 1] or for
    /// non-finite input.
    pub fn from_f64(value: f64) -> Option<Self> {
        if !value.is_finite() || !(0.0..=1.0).contains(&value) {
            return None;
        }
        // the epsilon absorbs representation error in `value * 100`, e.g.
        // 0.285 * 100 == 28.499999999999996
        let scaled = (value * 100.0 + 0.5 + 1e-12).floor();
        Some(Hundredths(scaled.min(100.0) as u8))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 100.0
    }
}

impl fmt::Display for Hundredths {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

/// A typed answer value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AnswerValue {
    Binary(bool),
    Scalar(Hundredths),
    Count(u32),
    Label(String),
}

impl AnswerValue {
    pub fn yes() -> Self {
        AnswerValue::Binary(true)
    }

    pub fn no() -> Self {
        AnswerValue::Binary(false)
    }

    pub fn label(token: impl Into<String>) -> Self {
        AnswerValue::Label(token.into())
    }

    pub fn kind(&self) -> AnswerKind {
        match self {
            AnswerValue::Binary(_) => AnswerKind::Binary,
            AnswerValue::Scalar(_) => AnswerKind::Scalar,
            AnswerValue::Count(_) => AnswerKind::Count,
            AnswerValue::Label(_) => AnswerKind::Label,
        }
    }

    /// Numeric view used by MAE; `None` for binary and label answers.
    pub fn as_number(&self) -> Option<f64> {
        match self {
            AnswerValue::Scalar(h) => Some(h.as_f64()),
            AnswerValue::Count(n) => Some(f64::from(*n)),
            _ => None,
        }
    }

    /// Canonical text: `yes`/`no`, two-decimal scalar, decimal count, or
    /// the label token.
    pub fn canonical(&self) -> String {
        match self {
            AnswerValue::Binary(true) => "yes".to_owned(),
            AnswerValue::Binary(false) => "no".to_owned(),
            AnswerValue::Scalar(h) => h.to_string(),
            AnswerValue::Count(n) => n.to_string(),
            AnswerValue::Label(l) => l.clone(),
        }
    }
}

impl fmt::Display for AnswerValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

// Wire form: {"kind": "...", "value": ...}. Binary and label values are
// strings, scalars are JSON numbers, counts are integers.
#[derive(Serialize, Deserialize)]
struct WireAnswer {
    kind: AnswerKind,
    value: serde_json::Value,
}

impl Serialize for AnswerValue {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let value = match self {
            AnswerValue::Binary(_) | AnswerValue::Label(_) => {
                serde_json::Value::String(self.canonical())
            }
            AnswerValue::Scalar(h) => serde_json::Number::from_f64(h.as_f64())
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
            AnswerValue::Count(n) => serde_json::Value::from(*n),
        };
        WireAnswer {
            kind: self.kind(),
            value,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for AnswerValue {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let wire = WireAnswer::deserialize(deserializer)?;
        match (wire.kind, wire.value) {
            (AnswerKind::Binary, serde_json::Value::String(s)) => match s.as_str() {
                "yes" => Ok(AnswerValue::Binary(true)),
                "no" => Ok(AnswerValue::Binary(false)),
                other => Err(D::Error::custom(format!("binary answer `{other}`"))),
            },
            (AnswerKind::Scalar, serde_json::Value::Number(n)) => n
                .as_f64()
                .and_then(Hundredths::from_f64)
                .map(AnswerValue::Scalar)
                .ok_or_else(|| D::Error::custom(format!("scalar answer {n} outside [0,1]"))),
            (AnswerKind::Count, serde_json::Value::Number(n)) => n
                .as_u64()
                .and_then(|v| u32::try_from(v).ok())
                .map(AnswerValue::Count)
                .ok_or_else(|| D::Error::custom(format!("count answer {n}"))),
            (AnswerKind::Label, serde_json::Value::String(s)) => Ok(AnswerValue::Label(s)),
            (kind, value) => Err(D::Error::custom(format!(
                "answer value {value} does not match kind {kind}"
            ))),
        }
    }
}
