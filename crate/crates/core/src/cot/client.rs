//! Text-generation clients: a deterministic rule verbalizer and a generic
//! HTTP chat-completion client.

use std::env;
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

use super::CoTPrompt;
use crate::answer::AnswerValue;
use crate::metadata::{Placement, SceneMetadata};
use crate::qa::templates::plural;
use crate::qa::Subtype;

pub const ENV_ENDPOINT: &str = "URBANVQA_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "URBANVQA_LLM_API_KEY";
pub const ENV_MODEL: &str = "URBANVQA_LLM_MODEL";

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("client configuration: {0}")]
    Config(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("server returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected response: {0}")]
    Malformed(String),
}

impl ClientError {
    fn retryable(&self) -> bool {
        match self {
            ClientError::Transport(_) => true,
            ClientError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// One prompt in, one completion out.
pub trait TextGenerator: Send + Sync {
    fn complete(&self, prompt: &CoTPrompt) -> Result<String, ClientError>;
}

/// Expands the subtype's rule with the record's own values and closes with
/// the base answer, so its output is rule-consistent by construction.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockVerbalizer;

impl TextGenerator for MockVerbalizer {
    fn complete(&self, prompt: &CoTPrompt) -> Result<String, ClientError> {
        let meta: SceneMetadata = serde_json::from_str(&prompt.metadata_block)
            .map_err(|e| ClientError::Malformed(format!("metadata block: {e}")))?;
        Ok(verbalize(prompt, &meta))
    }
}

const NUMBER_WORDS: [&str; 21] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven",
    "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty",
];

fn number_word(n: u32) -> String {
    NUMBER_WORDS
        .get(n as usize)
        .map(|w| (*w).to_owned())
        .unwrap_or_else(|| n.to_string())
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// "one car", "seven cars"
fn counted(n: u32, label: &str) -> String {
    let noun = if n == 1 { label.to_owned() } else { plural(label) };
    format!("{} {noun}", number_word(n))
}

/// How the final answer is written on the `Answer:` line.
pub fn display_answer(answer: &AnswerValue) -> String {
    match answer {
        AnswerValue::Binary(true) => "Yes".to_owned(),
        AnswerValue::Binary(false) => "No".to_owned(),
        other => other.canonical(),
    }
}

fn param<'a>(prompt: &'a CoTPrompt, key: &str) -> &'a str {
    prompt.params.get(key).and_then(|v| v.as_text()).unwrap_or("")
}

fn describe_placement(p: Option<Placement>) -> &'static str {
    match p {
        Some(Placement::Left) => "mostly on the left side of the image",
        Some(Placement::Right) => "mostly on the right side of the image",
        Some(Placement::Even) => "spread evenly across the image",
        None => "hard to place in the image",
    }
}

fn verbalize(prompt: &CoTPrompt, meta: &SceneMetadata) -> String {
    use Subtype::*;
    let yes = prompt.answer == AnswerValue::Binary(true);
    let objects = &meta.objects;
    let person = objects.count("person");
    let car = objects.count("car");
    let mut steps: Vec<String> = Vec::new();

    match prompt.subtype {
        ProportionDominance | ProportionSparsity | ProportionScalar => {
            let factor = param(prompt, "factor");
            let value = factor
                .parse()
                .map(|f| meta.view_factors.get(f))
                .unwrap_or_default();
            steps.push(format!("I look at how much of the view is {factor}."));
            steps.push(format!("{} covers about {:.2} of the scene.", capitalize(factor), value));
            match prompt.subtype {
                ProportionDominance if yes => steps.push("That is more than half of the view.".into()),
                ProportionDominance => steps.push("That is not more than half of the view.".into()),
                ProportionSparsity if yes => steps.push("That is a fifth of the view or less, so it is sparse.".into()),
                ProportionSparsity => steps.push("That is more than a fifth of the view, so it is not sparse.".into()),
                _ => steps.push("Rounded to two decimals, that is the proportion.".into()),
            }
        }
        DepthBinary | DepthCategorical => {
            steps.push(format!(
                "The scene stretches over a depth range of about {:.1}.",
                meta.depth.range
            ));
            let verdict = match prompt.answer.canonical().as_str() {
                "complex" => "That is more than 20, so the depth structure is complex.",
                "simple" => "That is 20 or less, so the depth structure is simple.",
                "high" => "That is more than 40, so the depth complexity is high.",
                "moderate" => "That is more than 20 but not more than 40, so the depth complexity is moderate.",
                _ => "That is 20 or less, so the depth complexity is low.",
            };
            steps.push(verdict.into());
        }
        DepthClosestObject => {
            steps.push("I compare how far each object is from the camera.".into());
            if let Some(first) = meta.depth.order.first() {
                steps.push(format!("The {first} appears nearest."));
            }
            if let Some(second) = meta.depth.order.get(1) {
                steps.push(format!("The {second} is further back."));
            }
        }
        LayoutBinary | LayoutLabel => {
            let object = param(prompt, "object");
            let placement = meta.layout.placement.get(object).copied();
            steps.push(format!("The {} are {}.", plural(object), describe_placement(placement)));
            if prompt.subtype == LayoutBinary {
                steps.push(if yes {
                    "So they are on the left side.".into()
                } else {
                    "So they are not on the left side.".into()
                });
            }
        }
        LayoutTopEntity => {
            let top = meta.layout.top_entity.as_deref().unwrap_or("nothing in particular");
            steps.push(format!("The upper part of the image is taken up by {top}."));
        }
        ObjectCount => {
            let object = param(prompt, "object");
            steps.push(format!("Let's count the {}.", plural(object)));
            steps.push(format!("I can see {}.", counted(objects.count(object), object)));
        }
        ObjectPresence | NegationAbsence => {
            let object = param(prompt, "object");
            let n = objects.count(object);
            steps.push(if n == 0 {
                format!("I look for {} and cannot see any.", plural(object))
            } else {
                format!("I can see {}.", counted(n, object))
            });
        }
        ObjectCooccurrence => {
            for key in ["object_a", "object_b"] {
                let object = param(prompt, key);
                let n = objects.count(object);
                steps.push(if n == 0 {
                    format!("I cannot see any {}.", plural(object))
                } else {
                    format!("I can see {}.", counted(n, object))
                });
            }
            steps.push(if yes {
                "Both appear in the scene.".into()
            } else {
                "They do not both appear in the scene.".into()
            });
        }
        NegationConjunction => {
            let vf = &meta.view_factors;
            steps.push(format!(
                "Greenery covers about {:.2} of the view and the sky about {:.2}.",
                vf.greenery, vf.sky
            ));
            steps.push(if yes {
                "At least one of them is sparse, so calling the scene green and open is wrong.".into()
            } else {
                "Neither is sparse, so the scene can be called green and open.".into()
            });
        }
        NegationExclusionChoice => {
            let options = prompt
                .params
                .get("options")
                .and_then(|v| v.as_list())
                .unwrap_or(&[]);
            for option in options {
                let n = objects.count(option);
                steps.push(if n == 0 {
                    format!("I cannot see any {}.", plural(option))
                } else {
                    format!("I can see {}.", counted(n, option))
                });
            }
        }
        NegationSpatialRefute => {
            let a = param(prompt, "object_a");
            let b = param(prompt, "object_b");
            let da = meta.depth.mean(a).unwrap_or_default();
            let db = meta.depth.mean(b).unwrap_or_default();
            steps.push(format!("The {a} is about {da:.1} away and the {b} about {db:.1} away."));
            steps.push(if yes {
                format!("The {a} is not closer than the {b}.")
            } else {
                format!("The {a} is closer than the {b}.")
            });
        }
        NegationComposite => {
            steps.push(format!("The claim is that {}.", param(prompt, "statement")));
            steps.push(if yes {
                "Looking at the scene, the claim does not hold.".into()
            } else {
                "Looking at the scene, the claim holds.".into()
            });
        }
        CfCountPerturbation => {
            steps.push(format!("I can see {}.", counted(person, "person")));
            steps.push(format!("Two more would make {}.", counted(person + 2, "person")));
            steps.push(if yes {
                "That is five or more, so it would look crowded.".into()
            } else {
                "That is fewer than five, so it would not look crowded.".into()
            });
        }
        CfAbsenceProportion => {
            steps.push(format!(
                "Buildings take up about {:.2} of the view.",
                meta.view_factors.building
            ));
            steps.push(if yes {
                "That is more than 0.3, so removing them would make the scene feel more natural.".into()
            } else {
                "That is not more than 0.3, so removing them would change little.".into()
            });
        }
        CfAttributeSubstitution => {
            steps.push(format!("The sky takes up about {:.2} of the view.", meta.view_factors.sky));
            steps.push(if yes {
                "That is more than 0.4, so an overcast sky would make the scene feel less open.".into()
            } else {
                "That is not more than 0.4, so an overcast sky would change little.".into()
            });
        }
        CfOcclusionMovement => {
            steps.push(format!(
                "I can see {} and {}.",
                counted(objects.count("bus"), "bus"),
                counted(person, "person")
            ));
            steps.push("Moving the bus forward would block the view of the people.".into());
        }
        MultihopCountCompare | MultihopWhichIsMore => {
            if person > 1 && car > 1 {
                steps.push("I see several cars and several people in the image.".into());
            } else {
                steps.push("I look for cars and people in the image.".into());
            }
            steps.push("Let's count them.".into());
            steps.push(format!("I can see at least {}.", counted(car, "car")));
            steps.push(format!("I can also see at least {}.", counted(person, "person")));
            let cars = capitalize(&counted(car, "car"));
            let people = capitalize(&counted(person, "person"));
            if car > person {
                steps.push(format!("{cars} are more than {}.", counted(person, "person")));
                steps.push("Therefore, there are more cars than people.".into());
            } else if person > car {
                steps.push(format!("{people} are more than {}.", counted(car, "car")));
                steps.push("Therefore, there are more people than cars.".into());
            } else {
                steps.push(format!("{people} and {} are the same number.", counted(car, "car")));
                steps.push("Therefore, there are not more people than cars.".into());
            }
        }
    }

    steps.push(format!("Answer: {}.", display_answer(&prompt.answer)));
    steps.join(" ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    /// Chat-completions URL.
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub timeout: Duration,
    /// Extra attempts after the first failure.
    pub retries: u32,
    /// Initial wait between attempts; doubles on each retry.
    pub backoff: Duration,
}

impl HttpConfig {
    /// Reads endpoint, key and model from the environment.
    pub fn from_env() -> Result<Self, ClientError> {
        let endpoint = env::var(ENV_ENDPOINT).map_err(|_| ClientError::Config(format!("{ENV_ENDPOINT} is not set")))?;
        let model = env::var(ENV_MODEL).map_err(|_| ClientError::Config(format!("{ENV_MODEL} is not set")))?;
        Ok(HttpConfig {
            endpoint,
            api_key: env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty()),
            model,
            temperature: 0.0,
            timeout: Duration::from_secs(60),
            retries: 3,
            backoff: Duration::from_millis(500),
        })
    }
}

/// OpenAI-style chat-completion client.
pub struct HttpChatClient {
    agent: ureq::Agent,
    config: HttpConfig,
}

impl HttpChatClient {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpChatClient { agent, config }
    }

    fn attempt(&self, text: &str) -> Result<String, ClientError> {
        let body = json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": text}],
        });
        let mut request = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.config.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request
            .send_json(&body)
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let payload = response
            .body_mut()
            .read_to_string()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(ClientError::Status { status, body: payload });
        }
        let value: Value = serde_json::from_str(&payload).map_err(|e| ClientError::Malformed(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| ClientError::Malformed("missing choices[0].message.content".into()))
    }
}

impl TextGenerator for HttpChatClient {
    fn complete(&self, prompt: &CoTPrompt) -> Result<String, ClientError> {
        let text = prompt.text();
        let mut wait = self.config.backoff;
        let mut attempt = 0;
        loop {
            match self.attempt(&text) {
                Ok(out) => return Ok(out),
                Err(e) if e.retryable() && attempt < self.config.retries => {
                    log::warn!("{}: attempt {} failed: {e}", prompt.qa_id, attempt + 1);
                    thread::sleep(wait);
                    wait *= 2;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}
