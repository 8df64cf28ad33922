use serde::Deserialize;
use urbanvqa_core::parser::{normalize_object_label, parse, ParseConfig};
use urbanvqa_core::AnswerKind;

const CASES: &str = include_str!("../../../fixtures/parser_cases.jsonl");

#[derive(Deserialize)]
struct Case {
    raw: String,
    kind: AnswerKind,
    expected: String,
    defaulted: bool,
    clamped: bool,
}

#[test]
fn fixture_outputs_parse_to_expected_answers() {
    let cfg = ParseConfig::default();
    let cases: Vec<Case> = CASES.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(cases.len() >= 50);
    for kind in AnswerKind::ALL {
        assert!(cases.iter().any(|c| c.kind == kind), "no {kind} fixtures");
    }
    let failures: Vec<String> = cases
        .iter()
        .filter_map(|c| {
            let got = parse(&c.raw, c.kind, &cfg);
            let ok = got.value.canonical() == c.expected && got.defaulted == c.defaulted && got.clamped == c.clamped;
            (!ok).then(|| format!("{:?} as {}: got {:?}", c.raw, c.kind, got))
        })
        .collect();
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn object_label_normalization() {
    let cfg = ParseConfig::default();
    assert_eq!(normalize_object_label("Cars", &cfg), "vehicle");
    assert_eq!(normalize_object_label("person", &cfg), "person");
    assert_eq!(normalize_object_label("zeppelin", &cfg), "other");
    assert_eq!(normalize_object_label("The Benches", &cfg), "bench");
}
