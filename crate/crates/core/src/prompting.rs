//! Renders the exact query string for each (task, item, attribute, variant)
//! combination. Templates are data files with `${...}` markers, embedded for
//! the two built-in tasks, so the wording is auditable by diff rather than
//! buried in format strings. Item text is substituted verbatim; nothing is
//! trimmed or normalized.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::types::{AttributeSpec, EvalItem, TaskSpec};

/// Sentence the persona variant prepends, as its own first line.
pub const PERSONA_SENTENCE: &str = "(You are a human worker hired to rate the story fragment.)";

/// Sentence the explain variant appends after the question.
pub const EXPLAIN_SENTENCE: &str = "Please also explain your decision.";

/// The three instruction variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstructionVariant {
    #[default]
    Original,
    Persona,
    Explain,
}

impl InstructionVariant {
    pub const ALL: [InstructionVariant; 3] = [
        InstructionVariant::Original,
        InstructionVariant::Persona,
        InstructionVariant::Explain,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            InstructionVariant::Original => "original",
            InstructionVariant::Persona => "persona",
            InstructionVariant::Explain => "explain",
        }
    }
}

impl std::fmt::Display for InstructionVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for InstructionVariant {
    type Err = RenderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(InstructionVariant::Original),
            "persona" => Ok(InstructionVariant::Persona),
            "explain" => Ok(InstructionVariant::Explain),
            other => Err(RenderError::UnknownVariant(other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("unknown instruction variant: {0} (expected original, persona or explain)")]
    UnknownVariant(String),
    #[error("item {item_id}: no source field for placeholder ${{{placeholder}}} needed by attribute {attribute_id}")]
    MissingField {
        item_id: String,
        attribute_id: String,
        placeholder: String,
    },
    #[error("task {task_id} has no template for attribute {attribute_id}")]
    MissingTemplate { task_id: String, attribute_id: String },
    #[error("unknown attribute: {0}")]
    UnknownAttribute(String),
    #[error("template error: {0}")]
    Template(String),
}

/// A fully substituted query with its provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    /// placeholder name -> item field it was filled from
    pub placeholders_filled: BTreeMap<String, String>,
    /// sha256 over the prompt text, hex
    pub content_hash: String,
    pub task_id: String,
    pub item_id: String,
    pub attribute_id: String,
    pub population: String,
    pub variant: InstructionVariant,
}

/// Embedded template files for the built-in tasks, one per (task, attribute).
pub const BUILTIN_TEMPLATES: [(&str, &str, &str); 6] = [
    ("story", "grammaticality", include_str!("../templates/story.grammaticality.txt")),
    ("story", "cohesiveness", include_str!("../templates/story.cohesiveness.txt")),
    ("story", "likability", include_str!("../templates/story.likability.txt")),
    ("story", "relevance", include_str!("../templates/story.relevance.txt")),
    ("attack", "fluency", include_str!("../templates/attack.fluency.txt")),
    ("attack", "meaning_preservation", include_str!("../templates/attack.meaning_preservation.txt")),
];

/// Where templates come from: the embedded built-ins plus any directory of
/// `<task>.<attribute>.txt` overrides for custom tasks.
#[derive(Debug, Clone, Default)]
pub struct TemplateStore {
    custom: BTreeMap<(String, String), String>,
}

impl TemplateStore {
    pub fn builtin() -> Self {
        TemplateStore::default()
    }

    /// Loads every `<task>.<attribute>.txt` file under `dir`.
    pub fn with_dir(dir: &std::path::Path) -> Result<Self, RenderError> {
        let mut store = TemplateStore::default();
        let entries = std::fs::read_dir(dir)
            .map_err(|e| RenderError::Template(format!("{}: {e}", dir.display())))?;
        for entry in entries {
            let entry = entry.map_err(|e| RenderError::Template(e.to_string()))?;
            let path = entry.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            let Some(stem) = name.strip_suffix(".txt") else {
                continue;
            };
            let Some((task, attribute)) = stem.split_once('.') else {
                continue;
            };
            let text = std::fs::read_to_string(&path)
                .map_err(|e| RenderError::Template(format!("{}: {e}", path.display())))?;
            store
                .custom
                .insert((task.to_string(), attribute.to_string()), text);
        }
        Ok(store)
    }

    /// Template body for (task, attribute), custom files shadowing built-ins.
    /// A single trailing newline is a file artifact and is stripped.
    pub fn template(&self, task_id: &str, attribute_id: &str) -> Option<String> {
        let raw = self
            .custom
            .get(&(task_id.to_string(), attribute_id.to_string()))
            .map(|s| s.as_str())
            .or_else(|| {
                BUILTIN_TEMPLATES
                    .iter()
                    .find(|(t, a, _)| *t == task_id && *a == attribute_id)
                    .map(|(_, _, text)| *text)
            })?;
        Some(raw.strip_suffix('\n').unwrap_or(raw).to_string())
    }

    /// Hex sha256 of each shipped built-in template, for `--version`.
    pub fn builtin_hashes() -> Vec<(String, String)> {
        BUILTIN_TEMPLATES
            .iter()
            .map(|(task, attr, text)| {
                (
                    format!("{task}.{attr}"),
                    hex::encode(Sha256::digest(text.as_bytes())),
                )
            })
            .collect()
    }
}

/// Which item field fills each placeholder of the built-in templates.
fn placeholder_source(placeholder: &str) -> Option<&'static str> {
    match placeholder {
        "STORY" => Some("story"),
        "PROMPT" => Some("prompt"),
        "NEWS_TITLE" | "BENIGN_TITLE" => Some("title_1"),
        "ADVERSARIAL_TITLE" => Some("title_2"),
        _ => None,
    }
}

pub fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Renders the query for one (task, item, attribute, variant). Deterministic;
/// byte-identical inputs give byte-identical text.
pub fn render(
    store: &TemplateStore,
    task: &TaskSpec,
    item: &EvalItem,
    attribute: &AttributeSpec,
    variant: InstructionVariant,
) -> Result<RenderedPrompt, RenderError> {
    let template = store
        .template(&task.id, &attribute.id)
        .or_else(|| synthesize_template(task, attribute))
        .ok_or_else(|| RenderError::MissingTemplate {
            task_id: task.id.clone(),
            attribute_id: attribute.id.clone(),
        })?;

    let mut text = String::with_capacity(template.len() + 256);
    let mut placeholders_filled = BTreeMap::new();
    let mut rest = template.as_str();
    while let Some(start) = rest.find("${") {
        text.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find('}').ok_or_else(|| {
            RenderError::Template(format!(
                "unterminated placeholder in template {}.{}",
                task.id, attribute.id
            ))
        })?;
        let placeholder = &after[..end];
        let field = placeholder_source(placeholder)
            .map(|s| s.to_string())
            // custom tasks may name item fields directly
            .or_else(|| {
                task.item_schema
                    .iter()
                    .find(|f| f.name.eq_ignore_ascii_case(placeholder))
                    .map(|f| f.name.clone())
            })
            .ok_or_else(|| RenderError::MissingField {
                item_id: item.item_id.clone(),
                attribute_id: attribute.id.clone(),
                placeholder: placeholder.to_string(),
            })?;
        let value = item
            .fields
            .get(&field)
            .ok_or_else(|| RenderError::MissingField {
                item_id: item.item_id.clone(),
                attribute_id: attribute.id.clone(),
                placeholder: placeholder.to_string(),
            })?;
        text.push_str(value);
        placeholders_filled.insert(placeholder.to_string(), field);
        rest = &after[end + 1..];
    }
    text.push_str(rest);

    let text = match variant {
        InstructionVariant::Original => text,
        InstructionVariant::Persona => format!("{PERSONA_SENTENCE}\n{text}"),
        InstructionVariant::Explain => format!("{text} {EXPLAIN_SENTENCE}"),
    };

    Ok(RenderedPrompt {
        content_hash: content_hash(&text),
        text,
        placeholders_filled,
        task_id: task.id.clone(),
        item_id: item.item_id.clone(),
        attribute_id: attribute.id.clone(),
        population: item.population.clone(),
        variant,
    })
}

/// Generic fallback for custom tasks without template files: preamble, one
/// labeled block per schema field the attribute needs, then the question.
fn synthesize_template(task: &TaskSpec, attribute: &AttributeSpec) -> Option<String> {
    let mut out = String::new();
    if !task.instruction_preamble.is_empty() {
        out.push_str(&task.instruction_preamble);
        out.push('\n');
    }
    let field_count = if attribute.requires_second_field {
        task.item_schema.len().min(2)
    } else {
        1
    };
    for field in task.item_schema.iter().take(field_count) {
        out.push_str(&format!(
            "{}:\n${{{}}}\n(End of {})\n",
            field.name, field.name, field.name
        ));
    }
    out.push_str(&attribute.question_template);
    Some(out)
}

/// Renders every (item, attribute) pair, attributes in task order, items in
/// input order. Errors carry the offending item id.
pub fn render_all(
    store: &TemplateStore,
    task: &TaskSpec,
    items: &[EvalItem],
    variant: InstructionVariant,
) -> Result<Vec<(String, String, RenderedPrompt)>, RenderError> {
    let mut out = Vec::with_capacity(items.len() * task.attributes.len());
    for item in items {
        for attribute in &task.attributes {
            let prompt = render(store, task, item, attribute, variant)?;
            out.push((item.item_id.clone(), attribute.id.clone(), prompt));
        }
    }
    Ok(out)
}
