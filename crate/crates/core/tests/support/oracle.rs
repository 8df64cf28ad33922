//! Brute-force transcription of the derivation tables over raw JSON.
//!
//! Shares no code with the engine: it reads metadata as untyped JSON,
//! rounds scalars on the decimal text of the value, and evaluates composite
//! statements straight from the catalog file.

#![allow(dead_code)]

use serde_json::Value;

pub const CATALOG_JSON: &str = include_str!("../../../../config/composite_catalog.json");

/// Expected `(kind, canonical value)` for a question, or `None` when the
/// question cannot be asked of this record.
pub fn expected(meta: &Value, subtype: &str, params: &Value, catalog: &Value) -> Option<(&'static str, String)> {
    let prop = |f: &str| meta["proportions"][f].as_f64().unwrap_or(0.0);
    let count = |o: &str| meta["objects"][o].as_u64().unwrap_or(0);
    let range = meta["depth"]["range"].as_f64().unwrap_or(0.0);
    let mean = |o: &str| meta["depth"]["per_object_mean"][o].as_f64();
    let text = |k: &str| params[k].as_str().unwrap_or("");
    let yes_no = |b: bool| Some(("binary", if b { "yes" } else { "no" }.to_owned()));
    let label = |s: &str| Some(("label", s.to_owned()));

    match subtype {
        "proportion.dominance" => yes_no(prop(text("factor")) > 0.5),
        "proportion.sparsity" => yes_no(prop(text("factor")) <= 0.2),
        "proportion.scalar" => Some(("scalar", round_half_up_2(prop(text("factor"))))),
        "depth.binary" => label(if range > 20.0 { "complex" } else { "simple" }),
        "depth.categorical" => label(if range > 40.0 {
            "high"
        } else if range > 20.0 {
            "moderate"
        } else {
            "low"
        }),
        "depth.closest_object" => meta["depth"]["closest_object"].as_str().and_then(label),
        "layout.binary" => {
            let p = meta["layout"]["placement"][text("object")].as_str()?;
            yes_no(p == "left side")
        }
        "layout.label" => meta["layout"]["placement"][text("object")].as_str().and_then(label),
        "layout.top_entity" => meta["layout"]["top_entity"].as_str().and_then(label),
        "object.count" => Some(("count", count(text("object")).to_string())),
        "object.presence" => yes_no(count(text("object")) >= 1),
        "object.cooccurrence" => yes_no(count(text("object_a")) >= 1 && count(text("object_b")) >= 1),
        "negation.absence" => yes_no(count(text("object")) == 0),
        "negation.conjunction" => yes_no(prop("greenery") <= 0.2 || prop("sky") <= 0.2),
        "negation.exclusion_choice" => params["options"]
            .as_array()?
            .iter()
            .filter_map(Value::as_str)
            .find(|o| count(o) == 0)
            .and_then(label),
        "negation.spatial_refute" => yes_no(mean(text("object_a"))? >= mean(text("object_b"))?),
        "negation.composite" => {
            let id = text("statement_id");
            let statement = catalog["statements"]
                .as_array()?
                .iter()
                .find(|s| s["id"].as_str() == Some(id))?;
            let results = statement["conditions"].as_array()?.iter().map(|c| {
                let p = prop(c["factor"].as_str().unwrap());
                let v = c["value"].as_f64().unwrap();
                match c["op"].as_str().unwrap() {
                    "gt" => p > v,
                    "ge" => p >= v,
                    "lt" => p < v,
                    "le" => p <= v,
                    other => panic!("unknown op {other}"),
                }
            });
            let holds = match statement["mode"].as_str().unwrap_or("all") {
                "any" => results.into_iter().any(|b| b),
                _ => results.into_iter().all(|b| b),
            };
            yes_no(!holds)
        }
        "cf.count_perturbation" => yes_no(count("person") + 2 >= 5),
        "cf.absence_proportion" => yes_no(prop("building") > 0.3),
        "cf.attribute_substitution" => yes_no(prop("sky") > 0.4),
        "cf.occlusion_movement" => {
            if count("bus") >= 1 && count("person") >= 1 {
                yes_no(true)
            } else {
                None
            }
        }
        "multihop.count_compare" => yes_no(count("person") > count("car")),
        "multihop.which_is_more" => {
            let (p, c) = (count("person"), count("car"));
            if p > c {
                label("person")
            } else if c > p {
                label("car")
            } else {
                None
            }
        }
        other => panic!("oracle has no rule for {other}"),
    }
}

/// Half-up rounding to two decimals performed on the shortest decimal text
/// of `x` (e.g. "0.285" -> "0.29").
pub fn round_half_up_2(x: f64) -> String {
    let text = format!("{x}");
    let (int, frac) = text.split_once('.').unwrap_or((&text, ""));
    let digits: Vec<u32> = frac.chars().map(|c| c.to_digit(10).unwrap()).chain([0, 0, 0]).collect();
    let mut hundredths = int.parse::<u32>().unwrap() * 100 + digits[0] * 10 + digits[1];
    if digits[2] >= 5 {
        hundredths += 1;
    }
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

pub fn catalog() -> Value {
    serde_json::from_str(CATALOG_JSON).unwrap()
}

#[test]
fn rounding_oracle_examples() {
    assert_eq!(round_half_up_2(0.35), "0.35");
    assert_eq!(round_half_up_2(0.285), "0.29");
    assert_eq!(round_half_up_2(0.125), "0.13");
    assert_eq!(round_half_up_2(0.0), "0.00");
    assert_eq!(round_half_up_2(1.0), "1.00");
    assert_eq!(round_half_up_2(0.995), "1.00");
    assert_eq!(round_half_up_2(0.3449), "0.34");
}
