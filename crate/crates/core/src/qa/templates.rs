//! Question templates and rendering.

use thiserror::Error;

use super::{QuestionSpec, Subtype};
use crate::answer::AnswerKind;
use crate::digest;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("template for {subtype} needs parameter `{param}`")]
    MissingParam { subtype: Subtype, param: String },
    #[error("{subtype} has no template #{index}")]
    NoSuchTemplate { subtype: Subtype, index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedQuestion {
    pub text: String,
    /// `<subtype>#<index>`
    pub template_id: String,
}

/// Answer-format instruction appended to every question.
pub fn answer_format_suffix(kind: AnswerKind) -> &'static str {
    match kind {
        AnswerKind::Binary => "Respond in 'yes' or 'no'.",
        AnswerKind::Scalar => "Return a decimal between 0 and 1.",
        AnswerKind::Count => "Answer with a single number.",
        AnswerKind::Label => "Answer with a single word.",
    }
}

pub fn templates(subtype: Subtype) -> &'static [&'static str] {
    use Subtype::*;
    match subtype {
        ProportionDominance => &[
            "Is the scene dominated by {factor}?",
            "Does {factor} dominate this street view?",
            "Is {factor} the dominant element of the view?",
        ],
        ProportionSparsity => &[
            "Does the scene have sparse {factor}?",
            "Is there only a small amount of {factor} in the scene?",
        ],
        ProportionScalar => &[
            "What is the proportion of {factor} in the scene?",
            "Estimate the proportion of {factor} visible in this image.",
            "How large is the proportion of {factor} in the view?",
        ],
        DepthBinary => &[
            "Does the scene appear visually complex or simple in depth?",
            "Is the depth structure of this scene complex or simple?",
        ],
        DepthCategorical => &[
            "What is the overall depth complexity of this scene: low, moderate, or high?",
            "How would you label the depth range of the scene: low, moderate, or high?",
        ],
        DepthClosestObject => &[
            "Which object is closest to the camera?",
            "What is the nearest object in the scene?",
        ],
        LayoutBinary => &[
            "Are {objects} mostly on the left side of the image?",
            "Are the {objects} concentrated on the left side of the scene?",
        ],
        LayoutLabel => &[
            "On which side of the image are the {objects} located: left side, right side, or even?",
            "Where are {objects} mostly placed in the image: left side, right side, or even?",
        ],
        LayoutTopEntity => &[
            "What object occupies the top part of the image?",
            "Which class dominates the upper part of the scene?",
        ],
        ObjectCount => &[
            "How many {objects} are in the image?",
            "Count the {objects} visible in the scene.",
        ],
        ObjectPresence => &[
            "Is there any {object} in the image?",
            "Can you see any {object} in the scene?",
        ],
        ObjectCooccurrence => &[
            "Do {objects_a} and {objects_b} both appear in the scene?",
            "Are there both {objects_a} and {objects_b} in the image?",
        ],
        NegationAbsence => &[
            "Is there no {object} visible in the scene?",
            "Is it true that no {object} appears in the image?",
        ],
        NegationConjunction => &[
            "Is it incorrect to say the scene is green and open?",
            "Would it be wrong to describe this scene as both green and open?",
        ],
        NegationExclusionChoice => &[
            "Which of these is not present: {options}?",
            "Which of the following is missing from the scene: {options}?",
        ],
        NegationSpatialRefute => &[
            "Is the {object_a} not closer than the {object_b}?",
            "Is it false that the {object_a} is closer to the camera than the {object_b}?",
        ],
        NegationComposite => &[
            "Is it false to say that {statement}?",
            "Would it be incorrect to claim that {statement}?",
        ],
        CfCountPerturbation => &[
            "If two more people entered the scene, would it look crowded?",
            "Would the scene look crowded if two more people walked in?",
        ],
        CfAbsenceProportion => &[
            "Would this scene feel more natural if buildings were removed?",
            "If the buildings were taken away, would the scene feel more natural?",
        ],
        CfAttributeSubstitution => &[
            "If the scene were overcast instead of clear, would the scene feel less open?",
            "Would the scene feel less open under an overcast sky instead of a clear one?",
        ],
        CfOcclusionMovement => &[
            "If the bus were moved forward, would it block the view?",
            "If the bus moved forward, would it hide the pedestrians from view?",
        ],
        MultihopCountCompare => &[
            "Are there more people than cars in the image?",
            "Does the number of people exceed the number of cars?",
        ],
        MultihopWhichIsMore => &[
            "Which is greater: the number of people or the number of cars?",
            "Are there more people or more cars in the scene?",
        ],
    }
}

/// English plural of a vocabulary label.
pub fn plural(label: &str) -> String {
    match label {
        "person" => "people".to_owned(),
        "sky" => "sky".to_owned(),
        "vegetation" | "terrain" => label.to_owned(),
        l if l.ends_with("ch") || l.ends_with("sh") || l.ends_with('s') || l.ends_with('x') => {
            format!("{l}es")
        }
        l => format!("{l}s"),
    }
}

fn with_article(label: &str) -> String {
    let article = match label.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    };
    format!("{article} {label}")
}

/// "a car, a bench, or a tree"
fn option_list(options: &[String]) -> String {
    let items: Vec<String> = options.iter().map(|o| with_article(o)).collect();
    match items.len() {
        0 => String::new(),
        1 => items[0].clone(),
        2 => format!("{} or {}", items[0], items[1]),
        n => format!("{}, or {}", items[..n - 1].join(", "), items[n - 1]),
    }
}

fn placeholder_value(spec: &QuestionSpec, name: &str) -> Option<String> {
    match name {
        "objects" => spec.text("object").map(plural),
        "objects_a" => spec.text("object_a").map(plural),
        "objects_b" => spec.text("object_b").map(plural),
        "options" => spec.list("options").map(option_list),
        other => spec.text(other).map(str::to_owned),
    }
}

/// Parameter a placeholder reads from.
fn source_param(name: &str) -> &str {
    match name {
        "objects" => "object",
        "objects_a" => "object_a",
        "objects_b" => "object_b",
        other => other,
    }
}

/// Renders a specific template of the question's subtype.
pub fn render_with_template(spec: &QuestionSpec, index: usize) -> Result<RenderedQuestion, RenderError> {
    let list = templates(spec.subtype);
    let template = list.get(index).ok_or(RenderError::NoSuchTemplate {
        subtype: spec.subtype,
        index,
    })?;

    let mut text = String::with_capacity(template.len() + 48);
    let mut rest = *template;
    while let Some(open) = rest.find('{') {
        text.push_str(&rest[..open]);
        let close = open + rest[open..].find('}').expect("templates close their braces");
        let name = &rest[open + 1..close];
        let value = placeholder_value(spec, name).ok_or_else(|| RenderError::MissingParam {
            subtype: spec.subtype,
            param: source_param(name).to_owned(),
        })?;
        text.push_str(&value);
        rest = &rest[close + 1..];
    }
    text.push_str(rest);
    text.push(' ');
    text.push_str(answer_format_suffix(spec.subtype.answer_kind()));

    Ok(RenderedQuestion {
        text,
        template_id: format!("{}#{}", spec.subtype, index),
    })
}

/// Renders the question for `spec`, choosing a template by a stable hash of
/// the question spec and `seed`.
pub fn render_question(spec: &QuestionSpec, seed: u64) -> Result<RenderedQuestion, RenderError> {
    let n = templates(spec.subtype).len() as u64;
    let h = digest::stable_u64(&[
        &seed.to_be_bytes(),
        spec.subtype.as_str().as_bytes(),
        spec.canonical_params().as_bytes(),
    ]);
    render_with_template(spec, (h % n) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_subtype_has_two_or_three_templates() {
        for &s in Subtype::ALL {
            let n = templates(s).len();
            assert!((2..=3).contains(&n), "{s} has {n} templates");
        }
    }

    #[test]
    fn absence_template_matches_reference_wording() {
        let spec = QuestionSpec::new(Subtype::NegationAbsence).with("object", "bench");
        let q = render_with_template(&spec, 0).unwrap();
        assert_eq!(q.text, "Is there no bench visible in the scene? Respond in 'yes' or 'no'.");
        assert_eq!(q.template_id, "negation.absence#0");
    }

    #[test]
    fn scalar_templates_mention_proportion() {
        let spec = QuestionSpec::new(Subtype::ProportionScalar).with("factor", "greenery");
        for i in 0..templates(Subtype::ProportionScalar).len() {
            let q = render_with_template(&spec, i).unwrap();
            assert!(q.text.contains("proportion of greenery"), "{}", q.text);
            assert!(q.text.ends_with("Return a decimal between 0 and 1."));
        }
    }

    #[test]
    fn rendering_is_deterministic_and_seed_sensitive() {
        let spec = QuestionSpec::new(Subtype::ProportionDominance).with("factor", "sky");
        let a = render_question(&spec, 42).unwrap();
        assert_eq!(a, render_question(&spec, 42).unwrap());
        let distinct: std::collections::BTreeSet<String> = (0..64)
            .map(|s| render_question(&spec, s).unwrap().template_id)
            .collect();
        assert!(distinct.len() > 1);
    }

    #[test]
    fn missing_param_is_reported() {
        let spec = QuestionSpec::new(Subtype::LayoutBinary);
        assert_eq!(
            render_with_template(&spec, 0),
            Err(RenderError::MissingParam {
                subtype: Subtype::LayoutBinary,
                param: "object".into()
            })
        );
    }

    #[test]
    fn option_lists_read_naturally() {
        let spec = QuestionSpec::new(Subtype::NegationExclusionChoice)
            .with_list("options", ["car", "bench", "tree"]);
        let q = render_with_template(&spec, 0).unwrap();
        assert_eq!(
            q.text,
            "Which of these is not present: a car, a bench, or a tree? Answer with a single word."
        );
        assert_eq!(plural("bus"), "buses");
        assert_eq!(plural("bench"), "benches");
        assert_eq!(plural("traffic light"), "traffic lights");
        assert_eq!(with_article("apple"), "an apple");
    }
}
