//! Base question-answer generation from scene metadata.
//!
//! Every question belongs to one of 23 subtypes across seven categories.
//! Each subtype has a fixed derivation rule (see [`derive`]), a fixed
//! answer kind, and a small set of question templates (see [`templates`]).

pub mod composite;
pub mod derive;
pub mod generate;
pub mod templates;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::answer::{AnswerKind, AnswerValue};
use crate::digest;

pub use composite::{CompositeCatalog, CompositeStatement};
pub use derive::{derive_answer, DeriveError};
pub use generate::{generate_corpus, generate_for_record, GenerationConfig};
pub use templates::{render_question, RenderError, RenderedQuestion};

/// Question category, in the order used by corpus statistics tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Proportion,
    Depth,
    Layout,
    Object,
    Negation,
    Counterfactual,
    Multihop,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Proportion,
        Category::Depth,
        Category::Layout,
        Category::Object,
        Category::Negation,
        Category::Counterfactual,
        Category::Multihop,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Proportion => "proportion",
            Category::Depth => "depth",
            Category::Layout => "layout",
            Category::Object => "object",
            Category::Negation => "negation",
            Category::Counterfactual => "counterfactual",
            Category::Multihop => "multihop",
        }
    }

    /// Row title used in printed tables.
    pub fn title(self) -> &'static str {
        match self {
            Category::Proportion => "Proportion",
            Category::Depth => "Depth",
            Category::Layout => "Layout",
            Category::Object => "Object",
            Category::Negation => "Negation",
            Category::Counterfactual => "Counterfactual",
            Category::Multihop => "Multi-hop",
        }
    }

    /// Perceptual categories read one attribute; compositional ones combine several.
    pub fn is_perceptual(self) -> bool {
        matches!(
            self,
            Category::Proportion | Category::Depth | Category::Layout | Category::Object
        )
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

macro_rules! subtypes {
    ($( $variant:ident => $id:literal, $cat:ident, $kind:ident; )*) => {
        /// A question subtype, identified on the wire by its dotted id.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Subtype {
            $( $variant, )*
        }

        impl Subtype {
            pub const ALL: &'static [Subtype] = &[ $( Subtype::$variant, )* ];

            pub fn as_str(self) -> &'static str {
                match self {
                    $( Subtype::$variant => $id, )*
                }
            }

            pub fn category(self) -> Category {
                match self {
                    $( Subtype::$variant => Category::$cat, )*
                }
            }

            /// The answer kind every QA of this subtype carries.
            pub fn answer_kind(self) -> AnswerKind {
                match self {
                    $( Subtype::$variant => AnswerKind::$kind, )*
                }
            }
        }
    };
}

subtypes! {
    ProportionDominance => "proportion.dominance", Proportion, Binary;
    ProportionSparsity => "proportion.sparsity", Proportion, Binary;
    ProportionScalar => "proportion.scalar", Proportion, Scalar;
    DepthBinary => "depth.binary", Depth, Label;
    DepthCategorical => "depth.categorical", Depth, Label;
    DepthClosestObject => "depth.closest_object", Depth, Label;
    LayoutBinary => "layout.binary", Layout, Binary;
    LayoutLabel => "layout.label", Layout, Label;
    LayoutTopEntity => "layout.top_entity", Layout, Label;
    ObjectCount => "object.count", Object, Count;
    ObjectPresence => "object.presence", Object, Binary;
    ObjectCooccurrence => "object.cooccurrence", Object, Binary;
    NegationAbsence => "negation.absence", Negation, Binary;
    NegationConjunction => "negation.conjunction", Negation, Binary;
    NegationExclusionChoice => "negation.exclusion_choice", Negation, Label;
    NegationSpatialRefute => "negation.spatial_refute", Negation, Binary;
    NegationComposite => "negation.composite", Negation, Binary;
    CfCountPerturbation => "cf.count_perturbation", Counterfactual, Binary;
    CfAbsenceProportion => "cf.absence_proportion", Counterfactual, Binary;
    CfAttributeSubstitution => "cf.attribute_substitution", Counterfactual, Binary;
    CfOcclusionMovement => "cf.occlusion_movement", Counterfactual, Binary;
    MultihopCountCompare => "multihop.count_compare", Multihop, Binary;
    MultihopWhichIsMore => "multihop.which_is_more", Multihop, Label;
}

impl fmt::Display for Subtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Subtype {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Subtype::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown subtype `{s}`"))
    }
}

impl Serialize for Subtype {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Subtype {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A rule parameter: a single token or an ordered list of tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Text(String),
    List(Vec<String>),
}

impl ParamValue {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            ParamValue::Text(s) => Some(s),
            ParamValue::List(_) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[String]> {
        match self {
            ParamValue::List(v) => Some(v),
            ParamValue::Text(_) => None,
        }
    }
}

/// Rule parameters keyed by name (`factor`, `object`, `object_a`,
/// `object_b`, `options`, `statement_id`, `statement`).
pub type Params = BTreeMap<String, ParamValue>;

/// What to ask: a subtype plus its parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionSpec {
    pub category: Category,
    pub subtype: Subtype,
    #[serde(default)]
    pub params: Params,
}

impl QuestionSpec {
    pub fn new(subtype: Subtype) -> Self {
        QuestionSpec {
            category: subtype.category(),
            subtype,
            params: Params::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.params.insert(key.to_owned(), ParamValue::Text(value.into()));
        self
    }

    pub fn with_list<I, S>(mut self, key: &str, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.params.insert(
            key.to_owned(),
            ParamValue::List(values.into_iter().map(Into::into).collect()),
        );
        self
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.params.get(key).and_then(ParamValue::as_text)
    }

    pub fn list(&self, key: &str) -> Option<&[String]> {
        self.params.get(key).and_then(ParamValue::as_list)
    }

    /// Canonical JSON of the parameters (keys sorted).
    pub fn canonical_params(&self) -> String {
        serde_json::to_string(&self.params).expect("params serialize")
    }
}

/// Stable QA identifier: 16 hex chars of SHA-256 over image id, subtype,
/// and canonical parameters.
pub fn qa_id(image_id: &str, spec: &QuestionSpec) -> String {
    let h = digest::stable_u64(&[
        image_id.as_bytes(),
        spec.subtype.as_str().as_bytes(),
        spec.canonical_params().as_bytes(),
    ]);
    format!("{h:016x}")
}

/// One base question-answer pair. Field order matches the JSONL wire format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAPair {
    pub qa_id: String,
    pub image_id: String,
    pub category: Category,
    pub subtype: Subtype,
    #[serde(default)]
    pub params: Params,
    pub question: String,
    pub answer: AnswerValue,
    /// Template that rendered `question`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_id: Option<String>,
}

impl QAPair {
    pub fn spec(&self) -> QuestionSpec {
        QuestionSpec {
            category: self.category,
            subtype: self.subtype,
            params: self.params.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("qa pair serializes")
    }
}
