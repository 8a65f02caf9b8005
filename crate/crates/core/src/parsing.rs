//! Extracts a Likert rating from a free-text annotator response.
//!
//! The pipeline deletes known scale phrases ("1-5", "out of 5", "/5", the
//! attack task's "title 1"/"title 2", and question echoes like "with 1 being
//! the lowest"), then scans for the first number left standing. Every step is
//! traced so a parse can be audited after the fact.

use serde::{Deserialize, Serialize};

use crate::types::{Cell, CellKey, LikertScale, MissingReason, Rating, RatingMatrix, RatingValue, TaskKind, TaskSpec};

/// Deletion applied for every task before the number scan, in order.
const COMMON_DELETIONS: [(&str, &str); 3] = [
    ("delete_1_5", "1-5"),
    ("delete_out_of_5", "out of 5"),
    ("delete_slash_5", "/5"),
];

/// Extra deletions for adversarial-title responses ("title 1 is more
/// natural..." would otherwise scan as a 1).
const ATTACK_DELETIONS: [(&str, &str); 2] = [
    ("delete_title_1", "title 1"),
    ("delete_title_2", "title 2"),
];

/// Question echoes deleted before the scan. Responses frequently restate the
/// question ("On a scale of 1-5, with 1 being the lowest, I would rate..."),
/// and after the "1-5" deletion the echo's "1" would be scanned first.
const ECHO_DELETIONS: [(&str, &str); 3] = [
    ("delete_echo_lowest", "with 1 being the lowest"),
    (
        "delete_echo_agree",
        "with 1 being the strongly disagree and 5 being strongly agree",
    ),
    ("delete_echo_scale_of", "on a scale of"),
];

/// One trace step: the rule that ran and the text before and after it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub rule: String,
    pub before: String,
    pub after: String,
}

/// What a response parsed to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum ParseResult {
    Rating { value: RatingValue },
    Refusal { pattern: String },
    Unparseable,
}

/// Parse result plus the full rule trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub result: ParseResult,
    pub trace: Vec<TraceStep>,
}

impl ParseOutcome {
    pub fn rating(&self) -> Option<RatingValue> {
        match &self.result {
            ParseResult::Rating { value } => Some(*value),
            _ => None,
        }
    }

    pub fn rule_names(&self) -> Vec<String> {
        self.trace.iter().map(|s| s.rule.clone()).collect()
    }
}

/// Refusal detection patterns; substring match, ASCII case-insensitive.
/// The defaults cover the refusal styles the original annotators produced
/// ("I am an AI and I do not have the ability to experience enjoyment",
/// content-policy declines). Configurable because refusal wording drifts
/// across model versions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefusalPatterns(pub Vec<String>);

impl Default for RefusalPatterns {
    fn default() -> Self {
        RefusalPatterns(
            [
                "I am an AI",
                "as an AI",
                "do not have the ability to experience",
                "do not have emotions",
                "content policy",
                "cannot provide a rating",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        )
    }
}

/// Returns the first matching refusal pattern, if any. Empty input never
/// matches.
pub fn detect_refusal(response_text: &str, patterns: &RefusalPatterns) -> Option<String> {
    patterns
        .0
        .iter()
        .find(|p| !p.is_empty() && find_ascii_ci(response_text, p).is_some())
        .cloned()
}

/// Removes every occurrence of `pattern` (ASCII case-insensitive), repeating
/// until a fixpoint so that one application is idempotent even when removals
/// create new occurrences ("11-5-5").
fn delete_all_ci(text: &str, pattern: &str) -> String {
    let mut current = text.to_string();
    loop {
        let next = remove_pass(&current, pattern);
        if next == current {
            return current;
        }
        current = next;
    }
}

/// One left-to-right non-overlapping removal pass.
fn remove_pass(text: &str, pattern: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = find_ascii_ci(rest, pattern) {
        out.push_str(&rest[..pos]);
        rest = &rest[pos + pattern.len()..];
    }
    out.push_str(rest);
    out
}

/// Byte offset of the first ASCII-case-insensitive occurrence of `pattern`.
/// Patterns are ASCII, so matches always fall on UTF-8 boundaries.
fn find_ascii_ci(haystack: &str, pattern: &str) -> Option<usize> {
    let h = haystack.as_bytes();
    let p = pattern.as_bytes();
    if p.is_empty() || p.len() > h.len() {
        return None;
    }
    (0..=h.len() - p.len()).find(|&i| h[i..i + p.len()].eq_ignore_ascii_case(p))
}

/// First unsigned number in the text: a digit run, optionally followed by a
/// single decimal point and another digit run. No signs, no thousands
/// separators.
fn scan_first_number(text: &str) -> Option<RatingValue> {
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let mut end = i;
            if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                end = i;
            }
            let token = &text[start..end];
            // float-sized garbage ("123456789012345678901") is out of range
            // for any Likert scale anyway; give the caller a sentinel that
            // fails the bounds check rather than silently scanning onward.
            return Some(token.parse().unwrap_or(RatingValue::new(i64::MAX, 1)));
        }
        i += 1;
    }
    None
}

/// Applies the deletion pipeline and number scan for one response.
///
/// A first number that is off-grid or out of range yields `Unparseable`
/// rather than scanning onward; recovery is the caller's retry policy.
pub fn extract_rating(response_text: &str, task_kind: TaskKind, scale: &LikertScale) -> ParseOutcome {
    let mut trace = Vec::new();
    let mut text = response_text.to_string();

    let mut apply = |trace: &mut Vec<TraceStep>, text: &mut String, rule: &str, pattern: &str| {
        let after = delete_all_ci(text, pattern);
        if after != *text {
            trace.push(TraceStep {
                rule: rule.to_string(),
                before: text.clone(),
                after: after.clone(),
            });
            *text = after;
        }
    };

    for (rule, pattern) in COMMON_DELETIONS {
        apply(&mut trace, &mut text, rule, pattern);
    }
    if task_kind == TaskKind::Attack {
        for (rule, pattern) in ATTACK_DELETIONS {
            apply(&mut trace, &mut text, rule, pattern);
        }
    }
    for (rule, pattern) in ECHO_DELETIONS {
        apply(&mut trace, &mut text, rule, pattern);
    }

    let scanned = scan_first_number(&text);
    trace.push(TraceStep {
        rule: "scan_first_number".to_string(),
        before: text.clone(),
        after: match scanned {
            Some(v) => v.to_string(),
            None => String::new(),
        },
    });

    let result = match scanned {
        Some(value) if scale.contains(value) => ParseResult::Rating { value },
        Some(_) | None => ParseResult::Unparseable,
    };
    ParseOutcome { result, trace }
}

/// Refusal check first, rating extraction second. When a refusal pattern
/// fires the extractor is never consulted.
pub fn parse_response(
    response_text: &str,
    task_kind: TaskKind,
    scale: &LikertScale,
    patterns: &RefusalPatterns,
) -> ParseOutcome {
    if let Some(pattern) = detect_refusal(response_text, patterns) {
        return ParseOutcome {
            result: ParseResult::Refusal {
                pattern: pattern.clone(),
            },
            trace: vec![TraceStep {
                rule: "detect_refusal".to_string(),
                before: response_text.to_string(),
                after: format!("matched refusal pattern: {pattern}"),
            }],
        };
    }
    extract_rating(response_text, task_kind, scale)
}

/// One response in a batch: where it belongs in the matrix plus its text.
#[derive(Debug, Clone)]
pub struct BatchResponse {
    pub item_id: String,
    pub attribute_id: String,
    pub sample_index: u32,
    pub text: String,
    pub raw_response_ref: Option<String>,
}

/// One failed parse, with the full trace for the audit log.
#[derive(Debug, Clone, Serialize)]
pub struct ParseFailure {
    pub item_id: String,
    pub attribute_id: String,
    pub sample_index: u32,
    pub outcome: ParseResult,
    pub trace: Vec<TraceStep>,
}

/// Parses a batch of responses into matrix cells; failures keep their traces.
/// Output order follows input order; unknown attributes become failures.
pub fn parse_batch(
    responses: &[BatchResponse],
    task: &TaskSpec,
    annotator_id: &str,
    patterns: &RefusalPatterns,
) -> (RatingMatrix, Vec<ParseFailure>) {
    let mut matrix = RatingMatrix::new(&task.id);
    let mut failures = Vec::new();
    for response in responses {
        let key = CellKey {
            item_id: response.item_id.clone(),
            annotator_id: annotator_id.to_string(),
            attribute_id: response.attribute_id.clone(),
            sample_index: response.sample_index,
        };
        let Some(attr) = task.attribute(&response.attribute_id) else {
            failures.push(ParseFailure {
                item_id: response.item_id.clone(),
                attribute_id: response.attribute_id.clone(),
                sample_index: response.sample_index,
                outcome: ParseResult::Unparseable,
                trace: vec![TraceStep {
                    rule: "unknown_attribute".to_string(),
                    before: response.text.clone(),
                    after: String::new(),
                }],
            });
            continue;
        };
        let outcome = parse_response(&response.text, task.kind, &attr.scale, patterns);
        match &outcome.result {
            ParseResult::Rating { value } => {
                matrix.insert(
                    key,
                    Cell::Rated {
                        rating: Rating {
                            value: *value,
                            annotator_id: annotator_id.to_string(),
                            sample_index: response.sample_index,
                            raw_response_ref: response.raw_response_ref.clone(),
                            parse_trace: outcome.rule_names(),
                        },
                        retry_count: 0,
                    },
                );
            }
            ParseResult::Refusal { .. } => {
                matrix.insert(
                    key,
                    Cell::Missing {
                        reason: MissingReason::Refused,
                        retry_count: 0,
                    },
                );
                failures.push(ParseFailure {
                    item_id: response.item_id.clone(),
                    attribute_id: response.attribute_id.clone(),
                    sample_index: response.sample_index,
                    outcome: outcome.result.clone(),
                    trace: outcome.trace,
                });
            }
            ParseResult::Unparseable => {
                matrix.insert(
                    key,
                    Cell::Missing {
                        reason: MissingReason::Unparseable,
                        retry_count: 0,
                    },
                );
                failures.push(ParseFailure {
                    item_id: response.item_id.clone(),
                    attribute_id: response.attribute_id.clone(),
                    sample_index: response.sample_index,
                    outcome: outcome.result.clone(),
                    trace: outcome.trace,
                });
            }
        }
    }
    (matrix, failures)
}
