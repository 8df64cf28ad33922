//! Deterministic derivation rules: metadata in, base answer out.

use thiserror::Error;

use super::composite::CompositeCatalog;
use super::{QuestionSpec, Subtype};
use crate::answer::{AnswerValue, Hundredths};
use crate::metadata::{is_vocabulary_label, Placement, SceneMetadata, ViewFactor};

pub const DOMINANCE_THRESHOLD: f64 = 0.5;
pub const SPARSITY_THRESHOLD: f64 = 0.2;
pub const DEPTH_COMPLEX_THRESHOLD: f64 = 20.0;
pub const DEPTH_HIGH_THRESHOLD: f64 = 40.0;
pub const CONJUNCTION_THRESHOLD: f64 = 0.2;
pub const CROWD_ADDED_PEOPLE: u32 = 2;
pub const CROWD_THRESHOLD: u32 = 5;
pub const BUILDING_REMOVAL_THRESHOLD: f64 = 0.3;
pub const OVERCAST_SKY_THRESHOLD: f64 = 0.4;

/// Vocabulary label standing in for "pedestrian".
pub const PEDESTRIAN_LABEL: &str = "person";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeriveError {
    #[error("unknown view factor `{0}`")]
    UnknownFactor(String),
    #[error("depth order is empty, no closest object")]
    EmptyDepthOrder,
    #[error("object `{0}` has no layout placement")]
    ObjectNotInLayout(String),
    #[error("`{0}` is not a vocabulary label")]
    UnknownLabel(String),
    #[error("no listed option is absent from the scene")]
    NoAbsentOption,
    #[error("object `{0}` is not in the depth order")]
    ObjectNotInDepthOrder(String),
    #[error("unknown composite statement `{0}`")]
    UnknownCompositeId(String),
    #[error("precondition not met: {0}")]
    PreconditionNotMet(&'static str),
    #[error("person and car counts are tied")]
    TieNotGeneratable,
    #[error("missing parameter `{0}`")]
    MissingParam(&'static str),
    #[error("no top entity recorded")]
    NoTopEntity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProportionRule {
    Dominance,
    Sparsity,
    Scalar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthRule {
    Binary,
    Categorical,
    ClosestObject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutRule<'a> {
    Binary(&'a str),
    Label(&'a str),
    TopEntity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectQuery<'a> {
    Count(&'a str),
    Presence(&'a str),
    Cooccurrence(&'a str, &'a str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegationQuery<'a> {
    Absence(&'a str),
    Conjunction,
    ExclusionChoice(&'a [String]),
    /// "Is `a` not closer than `b`?"
    SpatialRefute(&'a str, &'a str),
    Composite(&'a str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CounterfactualRule {
    CountPerturbation,
    AbsenceProportion,
    AttributeSubstitution,
    OcclusionMovement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultihopRule {
    CountCompare,
    WhichIsMore,
}

pub fn derive_proportion_answer(
    meta: &SceneMetadata,
    factor: ViewFactor,
    rule: ProportionRule,
) -> AnswerValue {
    let p = meta.view_factors.get(factor);
    match rule {
        ProportionRule::Dominance => AnswerValue::Binary(p > DOMINANCE_THRESHOLD),
        ProportionRule::Sparsity => AnswerValue::Binary(p <= SPARSITY_THRESHOLD),
        ProportionRule::Scalar => {
            AnswerValue::Scalar(Hundredths::from_f64(p).expect("validated proportion"))
        }
    }
}

pub fn derive_depth_answer(meta: &SceneMetadata, rule: DepthRule) -> Result<AnswerValue, DeriveError> {
    let range = meta.depth.range;
    Ok(match rule {
        DepthRule::Binary => AnswerValue::label(if range > DEPTH_COMPLEX_THRESHOLD {
            "complex"
        } else {
            "simple"
        }),
        DepthRule::Categorical => AnswerValue::label(if range > DEPTH_HIGH_THRESHOLD {
            "high"
        } else if range > DEPTH_COMPLEX_THRESHOLD {
            "moderate"
        } else {
            "low"
        }),
        DepthRule::ClosestObject => match (&meta.depth.closest_object, meta.depth.order.is_empty()) {
            (Some(closest), false) => AnswerValue::label(closest.as_str()),
            _ => return Err(DeriveError::EmptyDepthOrder),
        },
    })
}

pub fn derive_layout_answer(meta: &SceneMetadata, rule: LayoutRule<'_>) -> Result<AnswerValue, DeriveError> {
    let placement = |object: &str| {
        meta.layout
            .placement
            .get(object)
            .copied()
            .ok_or_else(|| DeriveError::ObjectNotInLayout(object.to_owned()))
    };
    match rule {
        LayoutRule::Binary(object) => Ok(AnswerValue::Binary(placement(object)? == Placement::Left)),
        LayoutRule::Label(object) => Ok(AnswerValue::label(placement(object)?.as_str())),
        LayoutRule::TopEntity => meta
            .layout
            .top_entity
            .as_deref()
            .map(AnswerValue::label)
            .ok_or(DeriveError::NoTopEntity),
    }
}

fn known(label: &str) -> Result<&str, DeriveError> {
    if is_vocabulary_label(label) {
        Ok(label)
    } else {
        Err(DeriveError::UnknownLabel(label.to_owned()))
    }
}

pub fn derive_object_answer(meta: &SceneMetadata, query: ObjectQuery<'_>) -> Result<AnswerValue, DeriveError> {
    let objects = &meta.objects;
    Ok(match query {
        ObjectQuery::Count(obj) => AnswerValue::Count(objects.count(known(obj)?)),
        ObjectQuery::Presence(obj) => AnswerValue::Binary(objects.count(known(obj)?) >= 1),
        ObjectQuery::Cooccurrence(a, b) => {
            AnswerValue::Binary(objects.count(known(a)?) >= 1 && objects.count(known(b)?) >= 1)
        }
    })
}

pub fn derive_negation_answer(
    meta: &SceneMetadata,
    query: NegationQuery<'_>,
    catalog: &CompositeCatalog,
) -> Result<AnswerValue, DeriveError> {
    match query {
        NegationQuery::Absence(obj) => Ok(AnswerValue::Binary(meta.objects.count(known(obj)?) == 0)),
        NegationQuery::Conjunction => {
            let vf = &meta.view_factors;
            Ok(AnswerValue::Binary(
                vf.greenery <= CONJUNCTION_THRESHOLD || vf.sky <= CONJUNCTION_THRESHOLD,
            ))
        }
        NegationQuery::ExclusionChoice(options) => {
            for option in options {
                if meta.objects.count(known(option)?) == 0 {
                    return Ok(AnswerValue::label(option.as_str()));
                }
            }
            Err(DeriveError::NoAbsentOption)
        }
        NegationQuery::SpatialRefute(a, b) => {
            let depth = |o: &str| {
                meta.depth
                    .mean(o)
                    .ok_or_else(|| DeriveError::ObjectNotInDepthOrder(o.to_owned()))
            };
            Ok(AnswerValue::Binary(depth(a)? >= depth(b)?))
        }
        NegationQuery::Composite(id) => {
            let statement = catalog
                .get(id)
                .ok_or_else(|| DeriveError::UnknownCompositeId(id.to_owned()))?;
            Ok(AnswerValue::Binary(!statement.holds(&meta.view_factors)))
        }
    }
}

pub fn derive_counterfactual_answer(
    meta: &SceneMetadata,
    rule: CounterfactualRule,
) -> Result<AnswerValue, DeriveError> {
    let vf = &meta.view_factors;
    Ok(match rule {
        CounterfactualRule::CountPerturbation => AnswerValue::Binary(
            meta.objects.count("person").saturating_add(CROWD_ADDED_PEOPLE) >= CROWD_THRESHOLD,
        ),
        CounterfactualRule::AbsenceProportion => {
            AnswerValue::Binary(vf.building > BUILDING_REMOVAL_THRESHOLD)
        }
        CounterfactualRule::AttributeSubstitution => {
            AnswerValue::Binary(vf.sky > OVERCAST_SKY_THRESHOLD)
        }
        CounterfactualRule::OcclusionMovement => {
            if meta.objects.is_present("bus") && meta.objects.is_present(PEDESTRIAN_LABEL) {
                AnswerValue::yes()
            } else {
                return Err(DeriveError::PreconditionNotMet(
                    "occlusion movement needs both a bus and a pedestrian",
                ));
            }
        }
    })
}

pub fn derive_multihop_answer(meta: &SceneMetadata, rule: MultihopRule) -> Result<AnswerValue, DeriveError> {
    let people = meta.objects.count("person");
    let cars = meta.objects.count("car");
    match rule {
        MultihopRule::CountCompare => Ok(AnswerValue::Binary(people > cars)),
        MultihopRule::WhichIsMore => match people.cmp(&cars) {
            std::cmp::Ordering::Greater => Ok(AnswerValue::label("person")),
            std::cmp::Ordering::Less => Ok(AnswerValue::label("car")),
            std::cmp::Ordering::Equal => Err(DeriveError::TieNotGeneratable),
        },
    }
}

fn text<'a>(spec: &'a QuestionSpec, key: &'static str) -> Result<&'a str, DeriveError> {
    spec.text(key).ok_or(DeriveError::MissingParam(key))
}

fn factor(spec: &QuestionSpec) -> Result<ViewFactor, DeriveError> {
    let name = text(spec, "factor")?;
    name.parse().map_err(|_| DeriveError::UnknownFactor(name.to_owned()))
}

/// Dispatches a question spec to its derivation rule.
pub fn derive_answer(
    meta: &SceneMetadata,
    spec: &QuestionSpec,
    catalog: &CompositeCatalog,
) -> Result<AnswerValue, DeriveError> {
    use Subtype::*;
    match spec.subtype {
        ProportionDominance => Ok(derive_proportion_answer(meta, factor(spec)?, ProportionRule::Dominance)),
        ProportionSparsity => Ok(derive_proportion_answer(meta, factor(spec)?, ProportionRule::Sparsity)),
        ProportionScalar => Ok(derive_proportion_answer(meta, factor(spec)?, ProportionRule::Scalar)),
        DepthBinary => derive_depth_answer(meta, DepthRule::Binary),
        DepthCategorical => derive_depth_answer(meta, DepthRule::Categorical),
        DepthClosestObject => derive_depth_answer(meta, DepthRule::ClosestObject),
        LayoutBinary => derive_layout_answer(meta, LayoutRule::Binary(text(spec, "object")?)),
        LayoutLabel => derive_layout_answer(meta, LayoutRule::Label(text(spec, "object")?)),
        LayoutTopEntity => derive_layout_answer(meta, LayoutRule::TopEntity),
        ObjectCount => derive_object_answer(meta, ObjectQuery::Count(text(spec, "object")?)),
        ObjectPresence => derive_object_answer(meta, ObjectQuery::Presence(text(spec, "object")?)),
        ObjectCooccurrence => derive_object_answer(
            meta,
            ObjectQuery::Cooccurrence(text(spec, "object_a")?, text(spec, "object_b")?),
        ),
        NegationAbsence => {
            derive_negation_answer(meta, NegationQuery::Absence(text(spec, "object")?), catalog)
        }
        NegationConjunction => derive_negation_answer(meta, NegationQuery::Conjunction, catalog),
        NegationExclusionChoice => {
            let options = spec.list("options").ok_or(DeriveError::MissingParam("options"))?;
            derive_negation_answer(meta, NegationQuery::ExclusionChoice(options), catalog)
        }
        NegationSpatialRefute => derive_negation_answer(
            meta,
            NegationQuery::SpatialRefute(text(spec, "object_a")?, text(spec, "object_b")?),
            catalog,
        ),
        NegationComposite => derive_negation_answer(
            meta,
            NegationQuery::Composite(text(spec, "statement_id")?),
            catalog,
        ),
        CfCountPerturbation => derive_counterfactual_answer(meta, CounterfactualRule::CountPerturbation),
        CfAbsenceProportion => derive_counterfactual_answer(meta, CounterfactualRule::AbsenceProportion),
        CfAttributeSubstitution => {
            derive_counterfactual_answer(meta, CounterfactualRule::AttributeSubstitution)
        }
        CfOcclusionMovement => derive_counterfactual_answer(meta, CounterfactualRule::OcclusionMovement),
        MultihopCountCompare => derive_multihop_answer(meta, MultihopRule::CountCompare),
        MultihopWhichIsMore => derive_multihop_answer(meta, MultihopRule::WhichIsMore),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metadata::{example_scene, ObjectInventory};

    fn with_counts(pairs: &[(&str, u32)]) -> SceneMetadata {
        let mut m = example_scene();
        m.objects = pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect::<ObjectInventory>();
        m
    }

    #[test]
    fn proportion_rules_on_example() {
        let m = example_scene();
        assert_eq!(
            derive_proportion_answer(&m, ViewFactor::Building, ProportionRule::Dominance),
            AnswerValue::no()
        );
        assert_eq!(
            derive_proportion_answer(&m, ViewFactor::Sky, ProportionRule::Sparsity),
            AnswerValue::yes()
        );
        assert_eq!(
            derive_proportion_answer(&m, ViewFactor::Greenery, ProportionRule::Scalar).canonical(),
            "0.35"
        );
    }

    #[test]
    fn proportion_boundaries() {
        let mut m = example_scene();
        m.view_factors.sky = 0.2;
        m.view_factors.greenery = 0.5;
        m.view_factors.building = 0.0;
        assert_eq!(
            derive_proportion_answer(&m, ViewFactor::Sky, ProportionRule::Sparsity),
            AnswerValue::yes()
        );
        assert_eq!(
            derive_proportion_answer(&m, ViewFactor::Greenery, ProportionRule::Dominance),
            AnswerValue::no()
        );
    }

    #[test]
    fn depth_rules() {
        let mut m = example_scene();
        assert_eq!(derive_depth_answer(&m, DepthRule::Categorical).unwrap(), AnswerValue::label("high"));
        assert_eq!(derive_depth_answer(&m, DepthRule::Binary).unwrap(), AnswerValue::label("complex"));
        assert_eq!(
            derive_depth_answer(&m, DepthRule::ClosestObject).unwrap(),
            AnswerValue::label("person")
        );
        m.depth.range = 20.0;
        assert_eq!(derive_depth_answer(&m, DepthRule::Binary).unwrap(), AnswerValue::label("simple"));
        assert_eq!(derive_depth_answer(&m, DepthRule::Categorical).unwrap(), AnswerValue::label("low"));
        m.depth.range = 40.0;
        assert_eq!(
            derive_depth_answer(&m, DepthRule::Categorical).unwrap(),
            AnswerValue::label("moderate")
        );
        m.depth = crate::metadata::DepthSummary::from_means(3.0, Default::default());
        assert_eq!(
            derive_depth_answer(&m, DepthRule::ClosestObject),
            Err(DeriveError::EmptyDepthOrder)
        );
    }

    #[test]
    fn layout_rules() {
        let m = example_scene();
        assert_eq!(derive_layout_answer(&m, LayoutRule::Binary("building")).unwrap(), AnswerValue::yes());
        assert_eq!(derive_layout_answer(&m, LayoutRule::Binary("car")).unwrap(), AnswerValue::no());
        assert_eq!(
            derive_layout_answer(&m, LayoutRule::Label("car")).unwrap(),
            AnswerValue::label("right side")
        );
        assert_eq!(
            derive_layout_answer(&m, LayoutRule::TopEntity).unwrap(),
            AnswerValue::label("building")
        );
        assert_eq!(
            derive_layout_answer(&m, LayoutRule::Label("bus")),
            Err(DeriveError::ObjectNotInLayout("bus".into()))
        );
    }

    #[test]
    fn object_rules() {
        let m = example_scene();
        assert_eq!(derive_object_answer(&m, ObjectQuery::Count("person")).unwrap(), AnswerValue::Count(2));
        assert_eq!(derive_object_answer(&m, ObjectQuery::Presence("person")).unwrap(), AnswerValue::yes());
        assert_eq!(derive_object_answer(&m, ObjectQuery::Presence("bench")).unwrap(), AnswerValue::no());
        assert_eq!(
            derive_object_answer(&m, ObjectQuery::Cooccurrence("person", "car")).unwrap(),
            AnswerValue::yes()
        );
        assert_eq!(
            derive_object_answer(&m, ObjectQuery::Count("zeppelin")),
            Err(DeriveError::UnknownLabel("zeppelin".into()))
        );
    }

    #[test]
    fn negation_rules() {
        let catalog = CompositeCatalog::default();
        let m = example_scene();
        assert_eq!(
            derive_negation_answer(&m, NegationQuery::Absence("bicycle"), &catalog).unwrap(),
            AnswerValue::yes()
        );
        assert_eq!(
            derive_negation_answer(&m, NegationQuery::Conjunction, &catalog).unwrap(),
            AnswerValue::yes()
        );
        let only_car = with_counts(&[("car", 3)]);
        let options: Vec<String> = ["car", "bench", "tree"].map(String::from).to_vec();
        assert_eq!(
            derive_negation_answer(&only_car, NegationQuery::ExclusionChoice(&options), &catalog).unwrap(),
            AnswerValue::label("bench")
        );
        let all_present: Vec<String> = ["person", "car"].map(String::from).to_vec();
        assert_eq!(
            derive_negation_answer(&m, NegationQuery::ExclusionChoice(&all_present), &catalog),
            Err(DeriveError::NoAbsentOption)
        );
        // car (14.8) is behind person (6.2)
        assert_eq!(
            derive_negation_answer(&m, NegationQuery::SpatialRefute("car", "person"), &catalog).unwrap(),
            AnswerValue::yes()
        );
        assert_eq!(
            derive_negation_answer(&m, NegationQuery::SpatialRefute("person", "car"), &catalog).unwrap(),
            AnswerValue::no()
        );
        assert_eq!(
            derive_negation_answer(&m, NegationQuery::SpatialRefute("bus", "car"), &catalog),
            Err(DeriveError::ObjectNotInDepthOrder("bus".into()))
        );
        assert_eq!(
            derive_negation_answer(
                &m,
                NegationQuery::Composite("neither_building_nor_sky_dominates"),
                &catalog
            )
            .unwrap(),
            AnswerValue::no()
        );
        assert_eq!(
            derive_negation_answer(&m, NegationQuery::Composite("nope"), &catalog),
            Err(DeriveError::UnknownCompositeId("nope".into()))
        );
    }

    #[test]
    fn counterfactual_rules() {
        let m = example_scene();
        assert_eq!(
            derive_counterfactual_answer(&m, CounterfactualRule::CountPerturbation).unwrap(),
            AnswerValue::no()
        );
        for (people, expected) in [(4, true), (3, true), (2, false), (0, false)] {
            let m = with_counts(&[("person", people)]);
            assert_eq!(
                derive_counterfactual_answer(&m, CounterfactualRule::CountPerturbation).unwrap(),
                AnswerValue::Binary(expected),
                "people = {people}"
            );
        }
        assert_eq!(
            derive_counterfactual_answer(&m, CounterfactualRule::AbsenceProportion).unwrap(),
            AnswerValue::yes()
        );
        assert_eq!(
            derive_counterfactual_answer(&m, CounterfactualRule::AttributeSubstitution).unwrap(),
            AnswerValue::no()
        );
        assert!(matches!(
            derive_counterfactual_answer(&m, CounterfactualRule::OcclusionMovement),
            Err(DeriveError::PreconditionNotMet(_))
        ));
        let bus_stop = with_counts(&[("bus", 1), ("person", 1)]);
        assert_eq!(
            derive_counterfactual_answer(&bus_stop, CounterfactualRule::OcclusionMovement).unwrap(),
            AnswerValue::yes()
        );
    }

    #[test]
    fn multihop_rules() {
        let m = with_counts(&[("car", 7), ("person", 3)]);
        assert_eq!(derive_multihop_answer(&m, MultihopRule::CountCompare).unwrap(), AnswerValue::no());
        assert_eq!(derive_multihop_answer(&m, MultihopRule::WhichIsMore).unwrap(), AnswerValue::label("car"));
        let empty = with_counts(&[]);
        assert_eq!(derive_multihop_answer(&empty, MultihopRule::CountCompare).unwrap(), AnswerValue::no());
        assert_eq!(
            derive_multihop_answer(&empty, MultihopRule::WhichIsMore),
            Err(DeriveError::TieNotGeneratable)
        );
    }

    #[test]
    fn dispatcher_reports_bad_params() {
        let catalog = CompositeCatalog::default();
        let m = example_scene();
        let spec = QuestionSpec::new(Subtype::ProportionScalar).with("factor", "water");
        assert_eq!(
            derive_answer(&m, &spec, &catalog),
            Err(DeriveError::UnknownFactor("water".into()))
        );
        let spec = QuestionSpec::new(Subtype::ObjectCount);
        assert_eq!(derive_answer(&m, &spec, &catalog), Err(DeriveError::MissingParam("object")));
    }
}
