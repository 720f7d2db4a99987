//! House-description prompts, output parsing and ROUGE-L deduplication.

use std::time::Duration;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::all_scene_types;
use crate::util::derive_seed;

pub const TASK_INSTRUCTION: &str = "Create a detailed and fluent description for a house based on the given scene type and features in two steps. Step 1: provide the value of each feature. Step 2: write a short phrase to describe the scene type with the values.";

/// Strict upper bound on similarity to any accepted description.
pub const SIMILARITY_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Attribute {
    pub name: &'static str,
    pub example_values: &'static [&'static str],
}

/// Attribute names and example values. The first values of each entry are
/// the published examples; later ones extend the offline generator's pool.
pub const ATTRIBUTES: [Attribute; 12] = [
    Attribute { name: "Room Style", example_values: &["victorian", "rustic", "minimalist", "art deco"] },
    Attribute { name: "Objects in the Room", example_values: &["computers, desks, chairs, servers", "a pool table", "bunk beds", "potted plants"] },
    Attribute { name: "Number of Rooms", example_values: &["single room", "two rooms", "three connected rooms"] },
    Attribute { name: "Configurations", example_values: &["individual cubicles", "an open floor plan", "rows of benches"] },
    Attribute { name: "Users of the Room", example_values: &["children of various ages", "elderly residents", "busy professionals"] },
    Attribute { name: "Era", example_values: &["contemporary", "modern", "mid-century", "medieval"] },
    Attribute { name: "Flooring", example_values: &["soft and cushioned", "hard", "polished oak", "checkered tile"] },
    Attribute { name: "Theme", example_values: &["industrial", "contemporary", "nautical", "tropical"] },
    Attribute { name: "Lighting", example_values: &["bright", "warm ambient", "dim candlelit", "natural daylight"] },
    Attribute { name: "Window", example_values: &["small", "slightly slanted", "floor-to-ceiling", "arched"] },
    Attribute { name: "Room Size", example_values: &["spacious", "medium-sized", "cramped", "cozy"] },
    Attribute { name: "Wall Treatment", example_values: &["artistic paintings", "calming color", "exposed brick", "wood paneling"] },
];

pub fn attribute(name: &str) -> Option<&'static Attribute> {
    ATTRIBUTES.iter().find(|a| a.name == name)
}

struct Exemplar {
    scene_type: &'static str,
    attributes: &'static [&'static str],
    output: &'static str,
}

/// First exemplar is the published one; the other four are ours.
const EXEMPLARS: [Exemplar; 5] = [
    Exemplar {
        scene_type: "arcade",
        attributes: &["Objects in the room"],
        output: "Step 1: (1) a pool table\nStep 2: An arcade with a pool table",
    },
    Exemplar {
        scene_type: "bakery",
        attributes: &["Lighting", "Flooring"],
        output: "Step 1: (1) warm ambient (2) checkered tile\nStep 2: A warmly lit bakery with a checkered tile floor",
    },
    Exemplar {
        scene_type: "library",
        attributes: &["Era", "Room Size", "Window"],
        output: "Step 1: (1) victorian (2) spacious (3) tall arched\nStep 2: A spacious victorian library with tall arched windows",
    },
    Exemplar {
        scene_type: "garage",
        attributes: &["Theme"],
        output: "Step 1: (1) industrial\nStep 2: An industrial garage with metal shelving and tool racks",
    },
    Exemplar {
        scene_type: "classroom",
        attributes: &["Users of the Room", "Configurations"],
        output: "Step 1: (1) children of various ages (2) rows of small desks\nStep 2: A classroom for children of various ages with rows of small desks",
    },
];

fn feature_list(attributes: &[&str]) -> String {
    attributes
        .iter()
        .enumerate()
        .map(|(i, a)| format!("({}) {}", i + 1, a))
        .collect::<Vec<_>>()
        .join(" ")
}

fn input_line(scene_type: &str, attributes: &[&str]) -> String {
    format!(
        "The given house type is \"{}.\" The feature list is: \"{}.\"",
        scene_type,
        feature_list(attributes)
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSample {
    pub scene_type: String,
    pub attributes: Vec<String>,
    pub prompt: String,
}

pub fn build_prompt(scene_type: &str, attributes: &[&str]) -> String {
    let mut parts = vec![format!("Task Instruction: {TASK_INSTRUCTION}")];
    for (i, ex) in EXEMPLARS.iter().enumerate() {
        parts.push(format!(
            "Exemplar{n} Input: {}\nExemplar{n} Output: {}",
            input_line(ex.scene_type, ex.attributes),
            ex.output,
            n = i + 1
        ));
    }
    parts.push(format!("Testing Input: {}", input_line(scene_type, attributes)));
    parts.join("\n\n")
}

/// Scene type uniform over the taxonomy, 1-3 distinct attributes.
pub fn sample_prompt(seed: u64) -> PromptSample {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "prompt"));
    let types: Vec<&str> = all_scene_types().map(|(_, t)| t).collect();
    let scene_type = *types.choose(&mut rng).expect("taxonomy is non-empty");
    let k = rng.gen_range(1..=3);
    let mut idx = (0..ATTRIBUTES.len()).choose_multiple(&mut rng, k);
    idx.shuffle(&mut rng);
    let attributes: Vec<&str> = idx.iter().map(|&i| ATTRIBUTES[i].name).collect();
    PromptSample {
        scene_type: scene_type.to_string(),
        prompt: build_prompt(scene_type, &attributes),
        attributes: attributes.iter().map(|s| s.to_string()).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RejectionReason {
    GenerationFailed,
    UnparsedAttributes,
    MissingDescription,
    TooSimilar,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedOutput {
    pub step1_text: String,
    pub values: Vec<String>,
    pub description: String,
}

/// Splits a raw completion into per-attribute values and the description.
/// Literal `\n` sequences count as line breaks.
pub fn parse_output(raw: &str, attribute_count: usize) -> Result<ParsedOutput, RejectionReason> {
    let text = raw.replace("\\n", "\n");
    let Some(s1) = text.find("Step 1:") else {
        return Err(RejectionReason::UnparsedAttributes);
    };
    let after1 = &text[s1 + "Step 1:".len()..];
    let (step1, step2) = match after1.find("Step 2:") {
        Some(p) => (&after1[..p], Some(&after1[p + "Step 2:".len()..])),
        None => (after1, None),
    };
    let values = parse_values(step1, attribute_count).ok_or(RejectionReason::UnparsedAttributes)?;
    let description = step2
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .ok_or(RejectionReason::MissingDescription)?;
    Ok(ParsedOutput {
        step1_text: step1.trim().to_string(),
        values,
        description,
    })
}

fn parse_values(step1: &str, count: usize) -> Option<Vec<String>> {
    if count == 0 {
        return Some(Vec::new());
    }
    let mut starts = Vec::with_capacity(count);
    let mut from = 0;
    for k in 1..=count {
        let marker = format!("({k})");
        let at = from + step1[from..].find(&marker)?;
        starts.push((at, at + marker.len()));
        from = at + marker.len();
    }
    let mut values = Vec::with_capacity(count);
    for (i, &(_, body)) in starts.iter().enumerate() {
        let end = starts.get(i + 1).map_or(step1.len(), |s| s.0);
        let v = step1[body..end]
            .trim()
            .trim_end_matches([',', ';'])
            .trim();
        if v.is_empty() {
            return None;
        }
        values.push(v.to_string());
    }
    Some(values)
}

fn tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(|t| t.to_lowercase()).collect()
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 over lowercased whitespace tokens; 0 when either side is empty.
pub fn rouge_l_f(candidate: &str, reference: &str) -> f64 {
    let (c, r) = (tokens(candidate), tokens(reference));
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(&c, &r);
    // 2PR/(P+R) with P = lcs/|c|, R = lcs/|r|
    2.0 * lcs as f64 / (c.len() + r.len()) as f64
}

/// Accepts unless some pooled description is more than 0.8 similar.
pub fn dedup_filter<'a>(description: &str, pool: impl IntoIterator<Item = &'a str>) -> bool {
    pool.into_iter()
        .all(|p| rouge_l_f(description, p) <= SIMILARITY_THRESHOLD)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeValue {
    pub name: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptionRecord {
    pub scene_type: String,
    pub sampled_attributes: Vec<AttributeValue>,
    pub step1_text: String,
    pub step2_description: String,
    pub accepted: bool,
    pub rejection_reason: Option<RejectionReason>,
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("missing environment variable {0}")]
    MissingConfig(&'static str),
    #[error("request failed: {0}")]
    Transport(String),
    #[error("unexpected response: {0}")]
    BadResponse(String),
}

pub trait TextGenerator: Sync {
    fn generate(&self, prompt: &PromptSample, seed: u64) -> Result<String, GenerationError>;
}

/// Deterministic template filler answering in the exemplar format.
#[derive(Debug, Clone, Copy, Default)]
pub struct OfflineGenerator;

fn article(word: &str) -> &'static str {
    match word.chars().next().map(|c| c.to_ascii_lowercase()) {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "An",
        _ => "A",
    }
}

impl TextGenerator for OfflineGenerator {
    fn generate(&self, prompt: &PromptSample, seed: u64) -> Result<String, GenerationError> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "offline"));
        let values: Vec<&str> = prompt
            .attributes
            .iter()
            .map(|name| {
                attribute(name)
                    .and_then(|a| a.example_values.choose(&mut rng).copied())
                    .unwrap_or("unspecified")
            })
            .collect();
        let step1 = values
            .iter()
            .enumerate()
            .map(|(i, v)| format!("({}) {}", i + 1, v))
            .collect::<Vec<_>>()
            .join(" ");
        let mut phrase = Vec::new();
        for (name, v) in prompt.attributes.iter().zip(&values) {
            phrase.push(match name.as_str() {
                "Room Style" | "Era" | "Theme" | "Room Size" => format!("{v} style"),
                "Objects in the Room" => format!("{v} inside"),
                "Number of Rooms" => format!("{v} layout"),
                "Configurations" => v.to_string(),
                "Users of the Room" => format!("space for {v}"),
                "Flooring" => format!("{v} floors"),
                "Lighting" => format!("{v} lighting"),
                "Window" => format!("{v} windows"),
                _ => format!("{v} walls"),
            });
        }
        let openers = ["with", "featuring", "offering", "known for"];
        let opener = openers.choose(&mut rng).expect("non-empty");
        Ok(format!(
            "Step 1: {step1}\nStep 2: {} {} {} {}",
            article(&prompt.scene_type),
            prompt.scene_type,
            opener,
            phrase.join(" and ")
        ))
    }
}

pub const ENV_ENDPOINT: &str = "OBJNAV_TEXTGEN_ENDPOINT";
pub const ENV_MODEL: &str = "OBJNAV_TEXTGEN_MODEL";
pub const ENV_TOKEN: &str = "OBJNAV_TEXTGEN_TOKEN";

/// HTTP client posting `{"model", "prompt", "seed"}` and reading `text` or an
/// OpenAI-style `choices[0]` from the reply.
#[derive(Debug, Clone)]
pub struct RemoteGenerator {
    pub endpoint: String,
    pub model: String,
    pub token: Option<String>,
    pub timeout: Duration,
}

impl RemoteGenerator {
    pub fn from_env() -> Result<Self, GenerationError> {
        let endpoint = std::env::var(ENV_ENDPOINT).map_err(|_| GenerationError::MissingConfig(ENV_ENDPOINT))?;
        let model = std::env::var(ENV_MODEL).map_err(|_| GenerationError::MissingConfig(ENV_MODEL))?;
        Ok(RemoteGenerator {
            endpoint,
            model,
            token: std::env::var(ENV_TOKEN).ok(),
            timeout: Duration::from_secs(60),
        })
    }
}

fn extract_text(v: &serde_json::Value) -> Option<String> {
    if let Some(t) = v.get("text").and_then(|t| t.as_str()) {
        return Some(t.to_string());
    }
    let choice = v.get("choices")?.get(0)?;
    choice
        .get("message")
        .and_then(|m| m.get("content"))
        .or_else(|| choice.get("text"))
        .and_then(|t| t.as_str())
        .map(str::to_string)
}

impl TextGenerator for RemoteGenerator {
    fn generate(&self, prompt: &PromptSample, seed: u64) -> Result<String, GenerationError> {
        let agent = ureq::AgentBuilder::new().timeout(self.timeout).build();
        let mut req = agent.post(&self.endpoint);
        if let Some(tok) = &self.token {
            req = req.set("Authorization", &format!("Bearer {tok}"));
        }
        let body = serde_json::json!({
            "model": self.model,
            "prompt": prompt.prompt,
            "seed": seed,
        });
        let resp = req
            .send_json(body)
            .map_err(|e| GenerationError::Transport(e.to_string()))?;
        let value: serde_json::Value = resp
            .into_json()
            .map_err(|e| GenerationError::BadResponse(e.to_string()))?;
        extract_text(&value).ok_or_else(|| GenerationError::BadResponse(value.to_string()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineCounts {
    pub generated: usize,
    pub accepted: usize,
    pub generation_failed: usize,
    pub unparsed_attributes: usize,
    pub missing_description: usize,
    pub too_similar: usize,
}

impl PipelineCounts {
    fn record(&mut self, reason: Option<RejectionReason>) {
        self.generated += 1;
        match reason {
            None => self.accepted += 1,
            Some(RejectionReason::GenerationFailed) => self.generation_failed += 1,
            Some(RejectionReason::UnparsedAttributes) => self.unparsed_attributes += 1,
            Some(RejectionReason::MissingDescription) => self.missing_description += 1,
            Some(RejectionReason::TooSimilar) => self.too_similar += 1,
        }
    }
}

/// Generates `n` candidates (in parallel), then filters them in order: parse,
/// then dedup against the descriptions accepted so far.
pub fn run_pipeline(
    generator: &dyn TextGenerator,
    n: usize,
    seed: u64,
) -> (Vec<DescriptionRecord>, PipelineCounts) {
    use rayon::prelude::*;
    let raw: Vec<(PromptSample, Result<String, GenerationError>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let item_seed = derive_seed(seed, &format!("description-{i}"));
            let prompt = sample_prompt(item_seed);
            let out = generator.generate(&prompt, item_seed);
            (prompt, out)
        })
        .collect();

    let mut counts = PipelineCounts::default();
    let mut records: Vec<DescriptionRecord> = Vec::with_capacity(n);
    let mut pool: Vec<String> = Vec::new();
    for (prompt, out) in raw {
        let mut record = DescriptionRecord {
            scene_type: prompt.scene_type.clone(),
            sampled_attributes: prompt
                .attributes
                .iter()
                .map(|a| AttributeValue {
                    name: a.clone(),
                    value: String::new(),
                })
                .collect(),
            step1_text: String::new(),
            step2_description: String::new(),
            accepted: false,
            rejection_reason: None,
        };
        let reason = match out {
            Err(_) => Some(RejectionReason::GenerationFailed),
            Ok(text) => match parse_output(&text, prompt.attributes.len()) {
                Err(r) => Some(r),
                Ok(parsed) => {
                    for (slot, v) in record.sampled_attributes.iter_mut().zip(parsed.values) {
                        slot.value = v;
                    }
                    record.step1_text = parsed.step1_text;
                    record.step2_description = parsed.description;
                    if dedup_filter(&record.step2_description, pool.iter().map(String::as_str)) {
                        None
                    } else {
                        Some(RejectionReason::TooSimilar)
                    }
                }
            },
        };
        if reason.is_none() {
            record.accepted = true;
            pool.push(record.step2_description.clone());
        }
        record.rejection_reason = reason;
        counts.record(reason);
        records.push(record);
    }
    (records, counts)
}
