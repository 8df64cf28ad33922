//! Subtype-to-reasoning-rule table.

use crate::qa::Subtype;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReasoningRule {
    pub subtype: &'static str,
    pub rule_text: &'static str,
}

const fn rule(subtype: &'static str, rule_text: &'static str) -> ReasoningRule {
    ReasoningRule { subtype, rule_text }
}

/// Rule sentences keyed by subtype id. `count` is a legacy alias of
/// `object.count`.
pub static RULES: &[ReasoningRule] = &[
    rule("count", "The answer is the total count of the specified object."),
    rule(
        "proportion.dominance",
        "If the view factor proportion is greater than 0.5, the answer is “Yes”. Otherwise, “No”.",
    ),
    rule(
        "proportion.sparsity",
        "If the view factor proportion is less than or equal to 0.2, the answer is “Yes”. Otherwise, “No”.",
    ),
    rule(
        "proportion.scalar",
        "The answer is the numerical proportion of the specified view factor, rounded to two decimal places.",
    ),
    rule(
        "object.count",
        "The answer is the integer value of the object detection results in the metadata",
    ),
    rule(
        "object.presence",
        "If the object detection results for the object is greater than or equal to 1, the answer is “Yes”. Otherwise, “No”.",
    ),
    rule(
        "object.cooccurrence",
        "If the object detection results for both of the objects are greater than or equal to 1, the answer is “Yes”. Otherwise, “No”.",
    ),
    rule(
        "depth.binary",
        "The answer is “Complex” if depth range is greater than 20. Otherwise, “Simple”.",
    ),
    rule(
        "depth.categorical",
        "If the depth range is greater than 40, label is “high”. If greater than 20, label is “moderate”. Otherwise, “low”.",
    ),
    rule(
        "depth.closest_object",
        "The answer is the object listed as closest in the image.",
    ),
    rule(
        "layout.binary",
        "If the layout for the object is “left side”, the answer is “Yes”. Otherwise, “No”.",
    ),
    rule(
        "layout.label",
        "The answer is the layout of the object: “left side”, “right side”, or “even”.",
    ),
    rule(
        "layout.top_entity",
        "The answer is the top_entity visible in the image.",
    ),
    rule(
        "negation.absence",
        "If the object count is 0, the answer is “Yes”. Otherwise, “No”.",
    ),
    rule(
        "negation.conjunction",
        "If the greenery or sky view factor is less than 0.2, the answer is “Yes”. Otherwise, “No”.",
    ),
    rule(
        "negation.exclusion_choice",
        "The answer is the object that is missing among the listed options.",
    ),
    rule(
        "negation.spatial_refute",
        "If the depth of the first object is greater than or equal to the second, the answer is “Yes”. Otherwise, “No”.",
    ),
    rule(
        "negation.composite",
        "Pre-written composite statements; typically answered “No” if the scene satisfies the described conditions.",
    ),
    rule(
        "cf.count_perturbation",
        "If the number of people plus two is greater than or equal to five, the answer is “Yes”. Otherwise, “No”.",
    ),
    rule(
        "cf.absence_proportion",
        "If the building proportion is greater than 0.3, the answer is “Yes”. Otherwise, “No”.",
    ),
    rule(
        "cf.attribute_substitution",
        "If the sky proportion is greater than 0.4, the answer is “Yes”. Otherwise, “No”.",
    ),
    rule(
        "cf.occlusion_movement",
        "If both “bus” and “pedestrian” are present, the answer is “Yes”.",
    ),
    rule(
        "multihop.count_compare",
        "Compare the number of people and cars. If the number of people is greater, the answer is “Yes”. Otherwise, “No”.",
    ),
    rule(
        "multihop.which_is_more",
        "Compare the number of people and cars. Answer which one is greater.",
    ),
];

pub fn find_rule(subtype: &str) -> Option<&'static ReasoningRule> {
    RULES.iter().find(|r| r.subtype == subtype)
}

/// Rule for a generated subtype. Every subtype has one; see [`missing_rules`].
pub fn rule_for(subtype: Subtype) -> &'static ReasoningRule {
    find_rule(subtype.as_str()).expect("rule table covers every subtype")
}

/// Subtypes without a rule entry. Empty for a consistent build.
pub fn missing_rules() -> Vec<Subtype> {
    Subtype::ALL
        .iter()
        .copied()
        .filter(|s| find_rule(s.as_str()).is_none())
        .collect()
}
