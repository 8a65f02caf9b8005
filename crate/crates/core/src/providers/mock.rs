//! Deterministic mock annotator. Identical (seed, prompt hash, request index,
//! decoding) always produce the identical response text, so cached and fresh
//! runs cannot diverge. The mock reads the prompt like a real annotator
//! would: identical title pairs in a meaning-preservation query are rated at
//! the scale maximum.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::prompting::RenderedPrompt;
use crate::types::{DecodingParams, LikertScale, RatingValue};

/// How mock responses are worded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseStyle {
    BareNumber,
    #[default]
    Sentence,
    /// Prepends "On a scale of 1-5, " to stress the parser's echo guard.
    EchoQuestion,
}

/// Configuration of the deterministic mock annotator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockProfile {
    /// Defaults to the run seed when omitted.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Population label -> target mean rating. Unlisted populations get the
    /// scale midpoint.
    #[serde(default)]
    pub per_population_mean: BTreeMap<String, f64>,
    #[serde(default)]
    pub spread: f64,
    /// With this on, temperature T acts as the fraction of unstable
    /// questions: each (item, attribute) draws a fixed stability threshold
    /// v ~ U[0,1) and scatters its samples iff T > v. Sample variance is 0 at
    /// T = 0 and non-decreasing in T for every seed.
    #[serde(default)]
    pub spread_scales_with_temperature: bool,
    #[serde(default)]
    pub refusal_rate: f64,
    /// Restrict refusals to these attributes (the original annotators mostly
    /// refused likability questions). None = all attributes.
    #[serde(default)]
    pub refusal_attributes: Option<BTreeSet<String>>,
    #[serde(default)]
    pub response_style: ResponseStyle,
    /// Rate identical title pairs at the scale maximum.
    #[serde(default = "default_true")]
    pub consistent_on_identical_titles: bool,
}

fn default_true() -> bool {
    true
}

impl Default for MockProfile {
    fn default() -> Self {
        MockProfile {
            seed: None,
            per_population_mean: BTreeMap::new(),
            spread: 0.0,
            spread_scales_with_temperature: false,
            refusal_rate: 0.0,
            refusal_attributes: None,
            response_style: ResponseStyle::default(),
            consistent_on_identical_titles: true,
        }
    }
}

const REFUSAL_TEXT: &str =
    "I am an AI and I do not have the ability to experience enjoyment, so I cannot provide a rating for this question.";

fn seed_bytes_to_u64(digest: &[u8]) -> u64 {
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

fn rng_for(seed: u64, scope: &str, parts: &[&str]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(scope.as_bytes());
    for part in parts {
        hasher.update([0u8]);
        hasher.update(part.as_bytes());
    }
    ChaCha8Rng::seed_from_u64(seed_bytes_to_u64(&hasher.finalize()))
}

/// The two title blocks of a meaning-preservation prompt, if present.
fn title_pair(text: &str) -> Option<(&str, &str)> {
    let t1 = text
        .split_once("News title 1:\n")?
        .1
        .split_once("\n(End of news title 1)")?
        .0;
    let t2 = text
        .split_once("News title 2:\n")?
        .1
        .split_once("\n(End of news title 2)")?
        .0;
    Some((t1, t2))
}

/// Deterministic response text for one request.
pub fn mock_response(
    profile: &MockProfile,
    seed: u64,
    prompt: &RenderedPrompt,
    slot: u32,
    request_index: u32,
    decoding: &DecodingParams,
    scale: &LikertScale,
) -> String {
    let mut rng = rng_for(
        seed,
        "response",
        &[
            &prompt.content_hash,
            &request_index.to_string(),
            &decoding.fingerprint(),
        ],
    );

    let refusal_applies = profile
        .refusal_attributes
        .as_ref()
        .map(|attrs| attrs.contains(&prompt.attribute_id))
        .unwrap_or(true);
    if profile.refusal_rate > 0.0 && refusal_applies && rng.random::<f64>() < profile.refusal_rate {
        return REFUSAL_TEXT.to_string();
    }

    let value = rating_for(profile, seed, prompt, slot, decoding, scale, &mut rng);
    format_response(profile.response_style, value)
}

fn rating_for(
    profile: &MockProfile,
    seed: u64,
    prompt: &RenderedPrompt,
    slot: u32,
    decoding: &DecodingParams,
    scale: &LikertScale,
    rng: &mut ChaCha8Rng,
) -> RatingValue {
    if profile.consistent_on_identical_titles {
        if let Some((t1, t2)) = title_pair(&prompt.text) {
            if t1 == t2 {
                return scale.max();
            }
        }
    }

    let midpoint = (scale.min_value + scale.max_value) as f64 / 2.0;
    let mean = profile
        .per_population_mean
        .get(&prompt.population)
        .copied()
        .unwrap_or(midpoint);

    if profile.spread <= 0.0 {
        return scale.snap(mean);
    }

    if profile.spread_scales_with_temperature {
        // stability threshold fixed per (item, attribute), independent of
        // temperature, slot and retries
        let mut stability_rng = rng_for(
            seed,
            "stability",
            &[&prompt.task_id, &prompt.item_id, &prompt.attribute_id],
        );
        let threshold: f64 = stability_rng.random();
        if decoding.temperature <= threshold {
            return scale.snap(mean);
        }
        return scatter(scale, mean, slot);
    }

    let normal = Normal::new(mean, profile.spread).expect("spread is positive");
    scale.snap(normal.sample(rng))
}

/// Unstable-question sample values: the base grid point for slot 0, then one
/// grid step up, one down, two up, ... clamped into the scale; a step that
/// clamps onto the base flips direction so the slots stay distinct.
fn scatter(scale: &LikertScale, mean: f64, slot: u32) -> RatingValue {
    let base = scale.snap(mean);
    if slot == 0 {
        return base;
    }
    let steps = slot.div_ceil(2) as f64;
    let magnitude = steps * scale.increment.as_f64();
    let up = slot % 2 == 1;
    let offset = if up { magnitude } else { -magnitude };
    let first = scale.snap(base.as_f64() + offset);
    if first != base {
        first
    } else {
        scale.snap(base.as_f64() - offset)
    }
}

fn format_response(style: ResponseStyle, value: RatingValue) -> String {
    match style {
        ResponseStyle::BareNumber => value.to_string(),
        ResponseStyle::Sentence => format!(
            "I would rate it a {value}. The writing is consistent with that score overall."
        ),
        ResponseStyle::EchoQuestion => {
            format!("On a scale of 1-5, I would rate it a {value}.")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parsing::{extract_rating, ParseResult};
    use crate::prompting::{render, InstructionVariant, TemplateStore};
    use crate::types::{builtin_attack_task, builtin_story_task, EvalItem, TaskKind};

    fn prompt_for(population: &str) -> RenderedPrompt {
        let task = builtin_story_task();
        let store = TemplateStore::builtin();
        let item = EvalItem {
            item_id: "i1".into(),
            population: population.into(),
            fields: BTreeMap::from([
                ("story".to_string(), "Some story.".to_string()),
                ("prompt".to_string(), "Some prompt.".to_string()),
            ]),
        };
        render(&store, &task, &item, &task.attributes[0], InstructionVariant::Original).unwrap()
    }

    fn scale() -> LikertScale {
        LikertScale::new(1, 5, RatingValue::new(1, 2)).unwrap()
    }

    #[test]
    fn deterministic_given_same_key() {
        let profile = MockProfile {
            per_population_mean: BTreeMap::from([("human".to_string(), 4.0)]),
            spread: 0.7,
            ..Default::default()
        };
        let p = prompt_for("human");
        let d = DecodingParams::default();
        let a = mock_response(&profile, 42, &p, 0, 0, &d, &scale());
        let b = mock_response(&profile, 42, &p, 0, 0, &d, &scale());
        assert_eq!(a, b);
        let c = mock_response(&profile, 42, &p, 0, 1, &d, &scale());
        assert_ne!(a, c, "distinct request indices draw independently");
    }

    #[test]
    fn zero_spread_yields_snapped_mean() {
        let profile = MockProfile {
            per_population_mean: BTreeMap::from([("human".to_string(), 4.0)]),
            response_style: ResponseStyle::BareNumber,
            ..Default::default()
        };
        let p = prompt_for("human");
        let d = DecodingParams::default();
        for idx in 0..5 {
            let text = mock_response(&profile, 1, &p, idx, idx, &d, &scale());
            assert_eq!(text, "4");
        }
    }

    #[test]
    fn every_style_parses_back_to_the_drawn_value() {
        for style in [ResponseStyle::BareNumber, ResponseStyle::Sentence, ResponseStyle::EchoQuestion] {
            let profile = MockProfile {
                per_population_mean: BTreeMap::from([("human".to_string(), 3.6)]),
                spread: 1.0,
                response_style: style,
                ..Default::default()
            };
            let p = prompt_for("human");
            let d = DecodingParams::default();
            for idx in 0..20 {
                let text = mock_response(&profile, 7, &p, idx % 3, idx, &d, &scale());
                let outcome = extract_rating(&text, TaskKind::Story, &scale());
                assert!(
                    matches!(outcome.result, ParseResult::Rating { .. }),
                    "style {style:?} produced unparseable text: {text}"
                );
            }
        }
    }

    #[test]
    fn refusals_respect_attribute_scope() {
        let profile = MockProfile {
            per_population_mean: BTreeMap::from([("human".to_string(), 4.0)]),
            refusal_rate: 1.0,
            refusal_attributes: Some(BTreeSet::from(["likability".to_string()])),
            ..Default::default()
        };
        let d = DecodingParams::default();
        let grammar = prompt_for("human"); // grammaticality prompt
        let text = mock_response(&profile, 3, &grammar, 0, 0, &d, &scale());
        assert!(!text.contains("I am an AI"));

        let task = builtin_story_task();
        let store = TemplateStore::builtin();
        let item = EvalItem {
            item_id: "i1".into(),
            population: "human".into(),
            fields: BTreeMap::from([
                ("story".to_string(), "Some story.".to_string()),
                ("prompt".to_string(), "Some prompt.".to_string()),
            ]),
        };
        let likability = render(&store, &task, &item, task.attribute("likability").unwrap(), InstructionVariant::Original).unwrap();
        let text = mock_response(&profile, 3, &likability, 0, 0, &d, &scale());
        assert!(text.contains("I am an AI"));
    }

    #[test]
    fn identical_titles_rate_maximum() {
        let task = builtin_attack_task();
        let store = TemplateStore::builtin();
        let item = EvalItem {
            item_id: "b1".into(),
            population: "benign".into(),
            fields: BTreeMap::from([
                ("title_1".to_string(), "Same headline".to_string()),
                ("title_2".to_string(), "Same headline".to_string()),
            ]),
        };
        let attr = task.attribute("meaning_preservation").unwrap();
        let p = render(&store, &task, &item, attr, InstructionVariant::Original).unwrap();
        let profile = MockProfile {
            per_population_mean: BTreeMap::from([("benign".to_string(), 2.0)]),
            response_style: ResponseStyle::BareNumber,
            ..Default::default()
        };
        let text = mock_response(&profile, 9, &p, 0, 0, &DecodingParams::default(), &scale());
        assert_eq!(text, "5");
    }

    #[test]
    fn temperature_zero_is_exact_mean_under_scaling() {
        let profile = MockProfile {
            per_population_mean: BTreeMap::from([("human".to_string(), 4.2)]),
            spread: 0.5,
            spread_scales_with_temperature: true,
            response_style: ResponseStyle::BareNumber,
            ..Default::default()
        };
        let p = prompt_for("human");
        let d = DecodingParams {
            temperature: 0.0,
            ..Default::default()
        };
        for slot in 0..3 {
            let text = mock_response(&profile, 11, &p, slot, slot, &d, &scale());
            assert_eq!(text, "4");
        }
    }

    #[test]
    fn scatter_never_collapses_three_slots() {
        let sc = scale();
        for mean in [1.0, 1.2, 3.0, 4.2, 4.9, 5.0] {
            let values: Vec<RatingValue> = (0..3).map(|s| scatter(&sc, mean, s)).collect();
            assert!(
                values[1] != values[0] || values[2] != values[0],
                "scatter collapsed at mean {mean}: {values:?}"
            );
        }
    }

    #[test]
    fn stability_threshold_is_monotone_in_temperature() {
        // agreement at a higher T implies agreement at every lower T
        let profile = MockProfile {
            per_population_mean: BTreeMap::from([("human".to_string(), 4.0)]),
            spread: 0.5,
            spread_scales_with_temperature: true,
            response_style: ResponseStyle::BareNumber,
            ..Default::default()
        };
        let p = prompt_for("human");
        let sc = scale();
        let agree_at = |t: f64| -> bool {
            let d = DecodingParams {
                temperature: t,
                ..Default::default()
            };
            let texts: Vec<String> = (0..3)
                .map(|s| mock_response(&profile, 5, &p, s, s, &d, &sc))
                .collect();
            texts.iter().all(|x| *x == texts[0])
        };
        let mut last = agree_at(1.0);
        for t in [0.7, 0.3, 0.0] {
            let now = agree_at(t);
            assert!(now || !last, "agreement regressed as temperature fell to {t}");
            last = now;
        }
        assert!(agree_at(0.0));
    }
}
