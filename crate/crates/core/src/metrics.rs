//! Scoring parsed predictions against gold answers.
//!
//! Numeric subtypes (`proportion.scalar`, `object.count`) are scored by MAE;
//! every other subtype by exact-match accuracy and support-weighted F1.
//! Labels are compared in canonical (normalized) form.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer::{AnswerKind, AnswerValue};
use crate::parser::{normalize_answer, parse, ParseConfig, ParsedAnswer};
use crate::qa::{Category, QAPair, Subtype};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("no records to score")]
    EmptyInput,
    #[error("{subtype}: expected {expected} answers, found {found}")]
    KindMismatch {
        subtype: Subtype,
        expected: AnswerKind,
        found: AnswerKind,
    },
    #[error("subtype {0} is missing from one of the reports")]
    MissingSubtype(String),
    #[error("numeric metric requested for non-numeric answers")]
    NotNumeric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub qa_id: String,
    pub subtype: Subtype,
    pub gold: AnswerValue,
    pub prediction: ParsedAnswer,
}

/// One raw model output keyed by the QA it answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub qa_id: String,
    #[serde(alias = "output", alias = "response", alias = "text")]
    pub prediction: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct JoinSummary {
    /// Gold pairs with no prediction; scored as empty output.
    pub missing: usize,
    /// Predictions whose qa_id is not in the gold set; ignored.
    pub unmatched: usize,
}

/// Parses each prediction against its gold pair's answer kind and
/// normalizes gold labels, ready for [`evaluate`].
pub fn join_predictions(
    gold: &[QAPair],
    predictions: &[Prediction],
    config: &ParseConfig,
) -> (Vec<EvalRecord>, JoinSummary) {
    let by_id: BTreeMap<&str, &str> = predictions
        .iter()
        .map(|p| (p.qa_id.as_str(), p.prediction.as_str()))
        .collect();
    let gold_ids: std::collections::BTreeSet<&str> = gold.iter().map(|q| q.qa_id.as_str()).collect();
    let mut summary = JoinSummary {
        missing: 0,
        unmatched: by_id.keys().filter(|id| !gold_ids.contains(*id)).count(),
    };
    let records = gold
        .iter()
        .map(|qa| {
            let raw = by_id.get(qa.qa_id.as_str()).copied().unwrap_or_else(|| {
                summary.missing += 1;
                ""
            });
            EvalRecord {
                qa_id: qa.qa_id.clone(),
                subtype: qa.subtype,
                gold: normalize_answer(&qa.answer, config),
                prediction: parse(raw, qa.subtype.answer_kind(), config),
            }
        })
        .collect();
    (records, summary)
}

/// Mean absolute error over numeric records.
pub fn mae(records: &[EvalRecord]) -> Result<f64, MetricError> {
    if records.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let mut total = 0.0;
    for r in records {
        let gold = r.gold.as_number().ok_or(MetricError::NotNumeric)?;
        let pred = r.prediction.value.as_number().ok_or(MetricError::NotNumeric)?;
        total += (pred - gold).abs();
    }
    Ok(total / records.len() as f64)
}

/// Fraction of records whose prediction matches gold exactly.
pub fn accuracy(records: &[EvalRecord]) -> Result<f64, MetricError> {
    if records.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let hits = records.iter().filter(|r| r.prediction.value == r.gold).count();
    Ok(hits as f64 / records.len() as f64)
}

/// Per-class F1 averaged with weights equal to each class's share of the
/// gold labels. Classes with undefined precision or recall score 0.
pub fn weighted_f1(records: &[EvalRecord]) -> Result<f64, MetricError> {
    if records.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let pairs: Vec<(String, String)> = records
        .iter()
        .map(|r| (r.gold.canonical(), r.prediction.value.canonical()))
        .collect();
    Ok(weighted_f1_labels(&pairs))
}

/// Weighted F1 over `(gold, predicted)` label pairs.
pub fn weighted_f1_labels(pairs: &[(String, String)]) -> f64 {
    #[derive(Default)]
    struct Tally {
        tp: usize,
        fp: usize,
        fn_: usize,
        support: usize,
    }
    let mut classes: BTreeMap<&str, Tally> = BTreeMap::new();
    for (gold, pred) in pairs {
        classes.entry(gold).or_default().support += 1;
        if gold == pred {
            classes.entry(gold).or_default().tp += 1;
        } else {
            classes.entry(gold).or_default().fn_ += 1;
            classes.entry(pred).or_default().fp += 1;
        }
    }
    let n = pairs.len() as f64;
    classes
        .values()
        .filter(|t| t.support > 0)
        .map(|t| {
            let precision_den = t.tp + t.fp;
            let recall_den = t.tp + t.fn_;
            let f1 = if precision_den == 0 || recall_den == 0 || t.tp == 0 {
                0.0
            } else {
                let p = t.tp as f64 / precision_den as f64;
                let r = t.tp as f64 / recall_den as f64;
                2.0 * p * r / (p + r)
            };
            f1 * t.support as f64 / n
        })
        .sum()
}

/// Scores for one subtype.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtypeMetrics {
    pub n: usize,
    pub kind: AnswerKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighted_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mae: Option<f64>,
    pub default_rate: f64,
    pub clamp_rate: f64,
}

/// Category-level aggregates. `micro` pools the category's records;
/// `macro` averages the per-subtype scores.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy_micro: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy_macro: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighted_f1_micro: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighted_f1_macro: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mae_micro: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mae_macro: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub subtypes: BTreeMap<Subtype, SubtypeMetrics>,
    pub groups: BTreeMap<Category, GroupMetrics>,
    pub total: usize,
    pub default_rate: f64,
    pub clamp_rate: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Builds the per-subtype and per-category report.
pub fn evaluate(records: &[EvalRecord]) -> Result<MetricReport, MetricError> {
    if records.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let mut by_subtype: BTreeMap<Subtype, Vec<EvalRecord>> = BTreeMap::new();
    for r in records {
        let expected = r.subtype.answer_kind();
        for found in [r.gold.kind(), r.prediction.value.kind()] {
            if found != expected {
                return Err(MetricError::KindMismatch {
                    subtype: r.subtype,
                    expected,
                    found,
                });
            }
        }
        by_subtype.entry(r.subtype).or_default().push(r.clone());
    }

    let rate = |rs: &[EvalRecord], f: fn(&ParsedAnswer) -> bool| {
        rs.iter().filter(|r| f(&r.prediction)).count() as f64 / rs.len() as f64
    };

    let mut subtypes = BTreeMap::new();
    for (&subtype, rs) in &by_subtype {
        let kind = subtype.answer_kind();
        let (acc, f1, m) = if kind.is_numeric() {
            (None, None, Some(mae(rs)?))
        } else {
            (Some(accuracy(rs)?), Some(weighted_f1(rs)?), None)
        };
        subtypes.insert(
            subtype,
            SubtypeMetrics {
                n: rs.len(),
                kind,
                accuracy: acc,
                weighted_f1: f1,
                mae: m,
                default_rate: rate(rs, |p| p.defaulted),
                clamp_rate: rate(rs, |p| p.clamped),
            },
        );
    }

    let mut groups = BTreeMap::new();
    for category in Category::ALL {
        let members: Vec<(&Subtype, &SubtypeMetrics)> =
            subtypes.iter().filter(|(s, _)| s.category() == category).collect();
        if members.is_empty() {
            continue;
        }
        let pooled = |numeric: bool| -> Vec<EvalRecord> {
            by_subtype
                .iter()
                .filter(|(s, _)| s.category() == category && s.answer_kind().is_numeric() == numeric)
                .flat_map(|(_, rs)| rs.iter().cloned())
                .collect()
        };
        let classification = pooled(false);
        let numeric = pooled(true);
        groups.insert(
            category,
            GroupMetrics {
                n: members.iter().map(|(_, m)| m.n).sum(),
                accuracy_micro: accuracy(&classification).ok(),
                accuracy_macro: mean(members.iter().filter_map(|(_, m)| m.accuracy)),
                weighted_f1_micro: weighted_f1(&classification).ok(),
                weighted_f1_macro: mean(members.iter().filter_map(|(_, m)| m.weighted_f1)),
                // count and proportion errors live on different scales, so
                // pooled MAE is only reported within a single numeric subtype
                mae_micro: mae(&numeric).ok(),
                mae_macro: mean(members.iter().filter_map(|(_, m)| m.mae)),
            },
        );
    }

    Ok(MetricReport {
        subtypes,
        groups,
        total: records.len(),
        default_rate: rate(records, |p| p.defaulted),
        clamp_rate: rate(records, |p| p.clamped),
    })
}

/// Percent change per subtype; positive always means improvement.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighted_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mae: Option<f64>,
    /// Metrics whose baseline was zero, so no percentage exists.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<String>,
}

/// `100 * (after - before) / before`, or `None` when `before` is zero.
pub fn percent_gain(before: f64, after: f64) -> Option<f64> {
    (before != 0.0).then(|| 100.0 * (after - before) / before)
}

/// Same as [`percent_gain`] with the sign flipped, for lower-is-better metrics.
pub fn percent_reduction(before: f64, after: f64) -> Option<f64> {
    (before != 0.0).then(|| 100.0 * (before - after) / before)
}

pub fn compare_runs(
    before: &MetricReport,
    after: &MetricReport,
) -> Result<BTreeMap<Subtype, MetricDelta>, MetricError> {
    for key in before.subtypes.keys().chain(after.subtypes.keys()) {
        if !before.subtypes.contains_key(key) || !after.subtypes.contains_key(key) {
            return Err(MetricError::MissingSubtype(key.to_string()));
        }
    }
    let mut out = BTreeMap::new();
    for (subtype, b) in &before.subtypes {
        let a = &after.subtypes[subtype];
        let mut delta = MetricDelta::default();
        let mut track = |name: &str, pair: Option<(f64, f64)>, f: fn(f64, f64) -> Option<f64>| {
            let (x, y) = pair?;
            let d = f(x, y);
            if d.is_none() {
                delta.undefined.push(name.to_owned());
            }
            d
        };
        let accuracy = track("accuracy", b.accuracy.zip(a.accuracy), percent_gain);
        let weighted_f1 = track("weighted_f1", b.weighted_f1.zip(a.weighted_f1), percent_gain);
        let mae = track("mae", b.mae.zip(a.mae), percent_reduction);
        delta.accuracy = accuracy;
        delta.weighted_f1 = weighted_f1;
        delta.mae = mae;
        out.insert(*subtype, delta);
    }
    Ok(out)
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into())
}

fn pct(v: Option<f64>) -> String {
    v.map(|x| format!("{x:+.1}%")).unwrap_or_else(|| "-".into())
}

impl MetricReport {
    /// Aligned plain-text tables: subtypes, then category aggregates.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<28} {:>6} {:>6} {:>6} {:>6} {:>8} {:>8}",
            "subtype", "n", "Acc↑", "F1↑", "MAE↓", "default", "clamped"
        );
        for (subtype, m) in &self.subtypes {
            let _ = writeln!(
                s,
                "{:<28} {:>6} {:>6} {:>6} {:>6} {:>7.1}% {:>7.1}%",
                subtype.as_str(),
                m.n,
                cell(m.accuracy),
                cell(m.weighted_f1),
                cell(m.mae),
                100.0 * m.default_rate,
                100.0 * m.clamp_rate
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<16} {:>6} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
            "category", "n", "Acc micro", "Acc macro", "F1 micro", "F1 macro", "MAE micro", "MAE macro"
        );
        for (category, g) in &self.groups {
            let _ = writeln!(
                s,
                "{:<16} {:>6} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
                category.title(),
                g.n,
                cell(g.accuracy_micro),
                cell(g.accuracy_macro),
                cell(g.weighted_f1_micro),
                cell(g.weighted_f1_macro),
                cell(g.mae_micro),
                cell(g.mae_macro)
            );
        }
        let _ = writeln!(
            s,
            "\ntotal {}  default rate {:.1}%  clamp rate {:.1}%",
            self.total,
            100.0 * self.default_rate,
            100.0 * self.clamp_rate
        );
        s
    }

    /// One row per subtype, for external plotting.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("subtype,category,n,accuracy,weighted_f1,mae,default_rate,clamp_rate\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (subtype, m) in &self.subtypes {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                subtype,
                subtype.category(),
                m.n,
                opt(m.accuracy),
                opt(m.weighted_f1),
                opt(m.mae),
                m.default_rate,
                m.clamp_rate
            );
        }
        s
    }
}

/// Plain-text table of percent changes.
pub fn deltas_table(deltas: &BTreeMap<Subtype, MetricDelta>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<28} {:>10} {:>10} {:>10}", "subtype", "Acc Δ", "F1 Δ", "MAE Δ");
    for (subtype, d) in deltas {
        let _ = writeln!(
            s,
            "{:<28} {:>10} {:>10} {:>10}",
            subtype.as_str(),
            pct(d.accuracy),
            pct(d.weighted_f1),
            pct(d.mae)
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::answer::Hundredths;

    fn bin(subtype: Subtype, gold: bool, pred: bool) -> EvalRecord {
        EvalRecord {
            qa_id: String::new(),
            subtype,
            gold: AnswerValue::Binary(gold),
            prediction: ParsedAnswer {
                kind: AnswerKind::Binary,
                value: AnswerValue::Binary(pred),
                defaulted: false,
                clamped: false,
            },
        }
    }

    fn count(gold: u32, pred: u32) -> EvalRecord {
        EvalRecord {
            qa_id: String::new(),
            subtype: Subtype::ObjectCount,
            gold: AnswerValue::Count(gold),
            prediction: ParsedAnswer {
                kind: AnswerKind::Count,
                value: AnswerValue::Count(pred),
                defaulted: false,
                clamped: false,
            },
        }
    }

    fn scalar(gold: u8, pred: u8) -> EvalRecord {
        EvalRecord {
            qa_id: String::new(),
            subtype: Subtype::ProportionScalar,
            gold: AnswerValue::Scalar(Hundredths::new(gold).unwrap()),
            prediction: ParsedAnswer {
                kind: AnswerKind::Scalar,
                value: AnswerValue::Scalar(Hundredths::new(pred).unwrap()),
                defaulted: false,
                clamped: false,
            },
        }
    }

    fn yn(golds: &[bool], preds: &[bool]) -> Vec<EvalRecord> {
        golds
            .iter()
            .zip(preds)
            .map(|(&g, &p)| bin(Subtype::ObjectPresence, g, p))
            .collect()
    }

    #[test]
    fn mae_cases() {
        assert!((mae(&[scalar(35, 30)]).unwrap() - 0.05).abs() < 1e-12);
        assert_eq!(mae(&[count(2, 2), count(5, 5)]).unwrap(), 0.0);
        assert_eq!(mae(&[count(2, 0), count(2, 4)]).unwrap(), 2.0);
        assert_eq!(mae(&[]), Err(MetricError::EmptyInput));
    }

    #[test]
    fn accuracy_cases() {
        assert_eq!(accuracy(&yn(&[true, true, false, false], &[true, true, false, true])).unwrap(), 0.75);
        assert_eq!(accuracy(&yn(&[true, false], &[true, false])).unwrap(), 1.0);
        assert_eq!(accuracy(&yn(&[true, false], &[false, true])).unwrap(), 0.0);
    }

    #[test]
    fn weighted_f1_cases() {
        let f = weighted_f1(&yn(&[true, true, false, false], &[true, false, false, false])).unwrap();
        assert!((f - 0.733_333_333_333_333_3).abs() < 1e-9, "{f}");
        assert_eq!(weighted_f1(&yn(&[true, true], &[true, true])).unwrap(), 1.0);
        assert_eq!(weighted_f1(&yn(&[true, false], &[false, true])).unwrap(), 0.0);
    }

    #[test]
    fn evaluate_structure_and_rates() {
        let mut rs = yn(&[true, false], &[true, true]);
        rs.push(count(3, 1));
        let report = evaluate(&rs).unwrap();
        assert_eq!(report.subtypes.len(), 2);
        assert_eq!(report.subtypes[&Subtype::ObjectCount].mae, Some(2.0));
        assert!(report.subtypes[&Subtype::ObjectCount].accuracy.is_none());
        assert_eq!(report.subtypes[&Subtype::ObjectPresence].accuracy, Some(0.5));
        assert_eq!(report.groups[&Category::Object].n, 3);

        let mut defaulted = yn(&[true, false], &[false, false]);
        for r in &mut defaulted {
            r.prediction.defaulted = true;
        }
        assert_eq!(evaluate(&defaulted).unwrap().subtypes[&Subtype::ObjectPresence].default_rate, 1.0);
        assert_eq!(evaluate(&[]), Err(MetricError::EmptyInput));
    }

    #[test]
    fn evaluate_rejects_kind_mismatch() {
        let mut r = bin(Subtype::ObjectCount, true, true);
        r.subtype = Subtype::ObjectCount;
        assert!(matches!(evaluate(&[r]), Err(MetricError::KindMismatch { .. })));
    }

    #[test]
    fn compare_runs_sign_convention() {
        assert!((percent_gain(0.33, 0.89).unwrap() - 169.697).abs() < 0.001);
        assert!((percent_reduction(0.21, 0.11).unwrap() - 47.619).abs() < 0.001);
        assert_eq!(percent_gain(0.0, 0.5), None);

        let report = evaluate(&yn(&[true, false], &[true, true])).unwrap();
        let deltas = compare_runs(&report, &report).unwrap();
        let d = &deltas[&Subtype::ObjectPresence];
        assert_eq!(d.accuracy, Some(0.0));
        assert_eq!(d.weighted_f1, Some(0.0));

        let other = evaluate(&[count(1, 1)]).unwrap();
        assert!(matches!(compare_runs(&report, &other), Err(MetricError::MissingSubtype(_))));
    }

    #[test]
    fn join_normalizes_gold_and_counts_gaps() {
        use crate::qa::{qa_id, QuestionSpec};
        let cfg = ParseConfig::default();
        let spec = QuestionSpec::new(Subtype::DepthClosestObject);
        let gold = QAPair {
            qa_id: qa_id("img", &spec),
            image_id: "img".into(),
            category: spec.category,
            subtype: spec.subtype,
            params: spec.params,
            question: String::new(),
            answer: AnswerValue::label("car"),
            template_id: None,
        };
        let preds = vec![
            Prediction { qa_id: gold.qa_id.clone(), prediction: "The bus is closest.".into() },
            Prediction { qa_id: "stray".into(), prediction: "yes".into() },
        ];
        let (records, summary) = join_predictions(std::slice::from_ref(&gold), &preds, &cfg);
        assert_eq!(summary, JoinSummary { missing: 0, unmatched: 1 });
        assert_eq!(accuracy(&records).unwrap(), 1.0);

        let (records, summary) = join_predictions(&[gold], &[], &cfg);
        assert_eq!(summary.missing, 1);
        assert!(records[0].prediction.defaulted);
    }

    #[test]
    fn zero_baseline_is_undefined() {
        let zero = evaluate(&yn(&[true, false], &[false, true])).unwrap();
        let good = evaluate(&yn(&[true, false], &[true, false])).unwrap();
        let d = &compare_runs(&zero, &good).unwrap()[&Subtype::ObjectPresence];
        assert_eq!(d.accuracy, None);
        assert!(d.undefined.contains(&"accuracy".to_owned()));
    }
}
