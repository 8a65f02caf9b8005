//! Shared domain vocabulary: Likert scales, tasks, items, ratings, and the
//! rating matrix every statistic is computed from.
//!
//! Rating values are exact rationals so grid membership is decidable; the
//! statistics convert to `f64` at computation time.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// An exact rational rating value (or grid increment).
///
/// Stored reduced; `4.5` and `9/2` are the same value. Serialized as a
/// decimal string when the denominator allows it, `"n/d"` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RatingValue(Ratio<i64>);

impl RatingValue {
    pub fn new(numer: i64, denom: i64) -> Self {
        RatingValue(Ratio::new(numer, denom))
    }

    pub fn from_integer(v: i64) -> Self {
        RatingValue(Ratio::from_integer(v))
    }

    pub fn as_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub(crate) fn ratio(&self) -> Ratio<i64> {
        self.0
    }

    /// Exact decimal rendering when the reduced denominator is of the form
    /// 2^a * 5^b, e.g. "4", "4.5", "3.25"; falls back to "n/d".
    fn decimal_string(&self) -> Option<String> {
        let numer = *self.0.numer();
        let denom = *self.0.denom();
        if denom == 1 {
            return Some(numer.to_string());
        }
        let mut rest = denom;
        while rest % 2 == 0 {
            rest /= 2;
        }
        while rest % 5 == 0 {
            rest /= 5;
        }
        if rest != 1 {
            return None;
        }
        // smallest power of ten the denominator divides
        let mut pow10: i64 = 1;
        let mut digits = 0usize;
        while pow10 % denom != 0 {
            pow10 = pow10.checked_mul(10)?;
            digits += 1;
        }
        let scaled = numer.checked_mul(pow10 / denom)?;
        let sign = if scaled < 0 { "-" } else { "" };
        let abs = scaled.unsigned_abs();
        let int_part = abs / pow10 as u64;
        let frac = format!("{:0width$}", abs % pow10 as u64, width = digits);
        let frac = frac.trim_end_matches('0');
        if frac.is_empty() {
            Some(format!("{sign}{int_part}"))
        } else {
            Some(format!("{sign}{int_part}.{frac}"))
        }
    }
}

impl fmt::Display for RatingValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.decimal_string() {
            Some(s) => f.write_str(&s),
            None => write!(f, "{}/{}", self.0.numer(), self.0.denom()),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("not a rating value: {0:?}")]
pub struct ParseRatingValueError(String);

impl FromStr for RatingValue {
    type Err = ParseRatingValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || ParseRatingValueError(s.to_string());
        if let Some((n, d)) = s.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|_| bad())?;
            let d: i64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            return Ok(RatingValue(Ratio::new(n, d)));
        }
        if let Some((int, frac)) = s.split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let negative = int.starts_with('-');
            let int: i64 = if int.is_empty() || int == "-" {
                0
            } else {
                int.parse().map_err(|_| bad())?
            };
            let frac_num: i64 = frac.parse().map_err(|_| bad())?;
            let denom = 10i64.checked_pow(frac.len() as u32).ok_or_else(bad)?;
            let magnitude = int
                .checked_abs()
                .and_then(|i| i.checked_mul(denom))
                .and_then(|i| i.checked_add(frac_num))
                .ok_or_else(bad)?;
            let numer = if negative { -magnitude } else { magnitude };
            return Ok(RatingValue(Ratio::new(numer, denom)));
        }
        let n: i64 = s.parse().map_err(|_| bad())?;
        Ok(RatingValue::from_integer(n))
    }
}

impl Serialize for RatingValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

struct RatingValueVisitor;

impl Visitor<'_> for RatingValueVisitor {
    type Value = RatingValue;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a rating value like \"4\", \"4.5\" or \"9/2\"")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<RatingValue, E> {
        v.parse().map_err(E::custom)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<RatingValue, E> {
        Ok(RatingValue::from_integer(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<RatingValue, E> {
        i64::try_from(v)
            .map(RatingValue::from_integer)
            .map_err(E::custom)
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<RatingValue, E> {
        Ratio::approximate_float(v)
            .map(RatingValue)
            .ok_or_else(|| E::custom(format!("not a finite rating value: {v}")))
    }
}

impl<'de> Deserialize<'de> for RatingValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(RatingValueVisitor)
    }
}

/// Validation errors raised when constructing or checking domain values.
#[derive(Debug, Error)]
pub enum TypeError {
    #[error("scale is invalid: {0}")]
    InvalidScale(String),
    #[error("item {item_id} does not match the task schema: {reason}")]
    ItemSchema { item_id: String, reason: String },
    #[error("invalid decoding parameters: {0}")]
    InvalidDecoding(String),
    #[error("failed to parse task file: {0}")]
    TaskFile(String),
}

/// Inclusive Likert bounds plus the grid increment (0.5 in the built-ins, so
/// half-point ratings are admitted).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikertScale {
    pub min_value: i64,
    pub max_value: i64,
    pub increment: RatingValue,
}

impl LikertScale {
    pub fn new(min_value: i64, max_value: i64, increment: RatingValue) -> Result<Self, TypeError> {
        let scale = LikertScale {
            min_value,
            max_value,
            increment,
        };
        scale.check()?;
        Ok(scale)
    }

    pub fn check(&self) -> Result<(), TypeError> {
        if self.min_value >= self.max_value {
            return Err(TypeError::InvalidScale(format!(
                "min_value {} must be below max_value {}",
                self.min_value, self.max_value
            )));
        }
        if !self.increment.is_positive() {
            return Err(TypeError::InvalidScale(format!(
                "increment {} must be positive",
                self.increment
            )));
        }
        let span = Ratio::from_integer(self.max_value - self.min_value);
        if !(span / self.increment.ratio()).is_integer() {
            return Err(TypeError::InvalidScale(format!(
                "span {} is not a multiple of increment {}",
                span, self.increment
            )));
        }
        Ok(())
    }

    /// True iff `value` lies within bounds and on the increment grid.
    pub fn contains(&self, value: RatingValue) -> bool {
        let v = value.ratio();
        let min = Ratio::from_integer(self.min_value);
        let max = Ratio::from_integer(self.max_value);
        if v < min || v > max {
            return false;
        }
        ((v - min) / self.increment.ratio()).is_integer()
    }

    /// Nearest grid point to `x`, clamped into bounds. Ties round away from
    /// the minimum.
    pub fn snap(&self, x: f64) -> RatingValue {
        let inc = self.increment.as_f64();
        let steps_max = ((self.max_value - self.min_value) as f64 / inc).round() as i64;
        let raw = (x - self.min_value as f64) / inc;
        let k = raw.round().clamp(0.0, steps_max as f64) as i64;
        RatingValue(
            Ratio::from_integer(self.min_value) + Ratio::from_integer(k) * self.increment.ratio(),
        )
    }

    pub fn min(&self) -> RatingValue {
        RatingValue::from_integer(self.min_value)
    }

    pub fn max(&self) -> RatingValue {
        RatingValue::from_integer(self.max_value)
    }
}

/// Whether a task's responses are parsed with the story rules or the attack
/// rules (the attack rules additionally delete "title 1"/"title 2").
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Story,
    Attack,
}

/// One named text field of a task's item schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    #[serde(default = "default_true")]
    pub required: bool,
}

fn default_true() -> bool {
    true
}

/// One rated attribute: its question text (with `${...}` placeholders when it
/// needs a second field) and its scale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub id: String,
    pub question_template: String,
    pub scale: LikertScale,
    #[serde(default)]
    pub requires_second_field: bool,
}

/// A named evaluation task: preamble, item schema, ordered attributes, and
/// the default number of sampled answers per question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub kind: TaskKind,
    pub instruction_preamble: String,
    pub item_schema: Vec<FieldSpec>,
    pub attributes: Vec<AttributeSpec>,
    pub samples_per_question: u32,
}

impl TaskSpec {
    pub fn from_toml(text: &str) -> Result<Self, TypeError> {
        let task: TaskSpec = toml::from_str(text).map_err(|e| TypeError::TaskFile(e.to_string()))?;
        task.check()?;
        Ok(task)
    }

    pub fn check(&self) -> Result<(), TypeError> {
        if self.samples_per_question < 1 {
            return Err(TypeError::TaskFile(format!(
                "task {}: samples_per_question must be at least 1",
                self.id
            )));
        }
        let mut seen = BTreeSet::new();
        for attr in &self.attributes {
            if !seen.insert(&attr.id) {
                return Err(TypeError::TaskFile(format!(
                    "task {}: duplicate attribute id {}",
                    self.id, attr.id
                )));
            }
            attr.scale.check()?;
        }
        Ok(())
    }

    pub fn attribute(&self, id: &str) -> Option<&AttributeSpec> {
        self.attributes.iter().find(|a| a.id == id)
    }

    /// The schema's second field, needed by attributes flagged
    /// `requires_second_field` (the story prompt, the adversarial title).
    pub fn second_field(&self) -> Option<&FieldSpec> {
        self.item_schema.get(1)
    }

    /// Checks an item carries exactly the schema fields: every required field
    /// present, no field outside the schema.
    pub fn validate_item(&self, item: &EvalItem) -> Result<(), TypeError> {
        for field in &self.item_schema {
            if field.required && !item.fields.contains_key(&field.name) {
                return Err(TypeError::ItemSchema {
                    item_id: item.item_id.clone(),
                    reason: format!("missing required field {}", field.name),
                });
            }
        }
        for name in item.fields.keys() {
            if !self.item_schema.iter().any(|f| &f.name == name) {
                return Err(TypeError::ItemSchema {
                    item_id: item.item_id.clone(),
                    reason: format!("field {name} is not in the schema"),
                });
            }
        }
        Ok(())
    }
}

/// One unit to judge. `population` is a free token (human, gpt2, benign,
/// textfooler, ...) so new sources need no code change.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalItem {
    pub item_id: String,
    pub population: String,
    pub fields: BTreeMap<String, String>,
}

/// Sampling parameters sent with every annotator request. Temperature 0 is
/// legal and means greedy decoding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub temperature: f64,
    pub nucleus_p: f64,
    pub max_tokens: u32,
}

impl Default for DecodingParams {
    fn default() -> Self {
        DecodingParams {
            temperature: 1.0,
            nucleus_p: 0.9,
            max_tokens: 512,
        }
    }
}

impl DecodingParams {
    pub fn check(&self) -> Result<(), TypeError> {
        if !(self.temperature >= 0.0) {
            return Err(TypeError::InvalidDecoding(format!(
                "temperature {} must be non-negative",
                self.temperature
            )));
        }
        if !(self.nucleus_p > 0.0 && self.nucleus_p <= 1.0) {
            return Err(TypeError::InvalidDecoding(format!(
                "nucleus_p {} must be in (0, 1]",
                self.nucleus_p
            )));
        }
        if self.max_tokens == 0 {
            return Err(TypeError::InvalidDecoding(
                "max_tokens must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Stable token used in cache keys.
    pub fn fingerprint(&self) -> String {
        format!("T{:?}-p{:?}-m{}", self.temperature, self.nucleus_p, self.max_tokens)
    }
}

/// One extracted Likert rating with its parse trace and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub value: RatingValue,
    pub annotator_id: String,
    pub sample_index: u32,
    /// Content hash of the raw response this rating was parsed from; absent
    /// for imported human ratings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_response_ref: Option<String>,
    /// Names of the parse rules that were applied, in order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parse_trace: Vec<String>,
}

/// Why a cell holds no rating. Missing cells are explicit, never imputed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingReason {
    Refused,
    Unparseable,
    NotQueried,
}

/// One sample slot of the matrix: a rating or an explicit miss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Cell {
    Rated {
        #[serde(flatten)]
        rating: Rating,
        #[serde(default)]
        retry_count: u32,
    },
    Missing {
        reason: MissingReason,
        #[serde(default)]
        retry_count: u32,
    },
}

impl Cell {
    pub fn rating(&self) -> Option<&Rating> {
        match self {
            Cell::Rated { rating, .. } => Some(rating),
            Cell::Missing { .. } => None,
        }
    }

    pub fn retry_count(&self) -> u32 {
        match self {
            Cell::Rated { retry_count, .. } | Cell::Missing { retry_count, .. } => *retry_count,
        }
    }
}

/// Whether roster entries are model annotators or imported humans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotatorKind {
    Llm,
    Human,
}

/// Roster entry: annotator id, kind, and how many answers it samples per
/// question (humans always 1).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatorRef {
    pub id: String,
    pub kind: AnnotatorKind,
    pub samples_per_question: u32,
}

/// Position of one sample slot in the matrix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub item_id: String,
    pub annotator_id: String,
    pub attribute_id: String,
    pub sample_index: u32,
}

#[derive(Serialize, Deserialize)]
struct CellRecord {
    #[serde(flatten)]
    key: CellKey,
    #[serde(flatten)]
    cell: Cell,
}

/// Items x annotators x attributes grid of optional ratings — the sole input
/// to all statistics. Item populations ride along so population-split tables
/// need nothing else.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RatingMatrix {
    pub task_id: String,
    pub annotator_roster: Vec<AnnotatorRef>,
    pub item_populations: BTreeMap<String, String>,
    cells: BTreeMap<CellKey, Cell>,
    duplicates: Vec<CellKey>,
}

impl RatingMatrix {
    pub fn new(task_id: &str) -> Self {
        RatingMatrix {
            task_id: task_id.to_string(),
            ..Default::default()
        }
    }

    pub fn add_roster_entry(&mut self, entry: AnnotatorRef) {
        if !self.annotator_roster.iter().any(|a| a.id == entry.id) {
            self.annotator_roster.push(entry);
        }
    }

    pub fn roster_entry(&self, id: &str) -> Option<&AnnotatorRef> {
        self.annotator_roster.iter().find(|a| a.id == id)
    }

    /// Inserts a cell; a second insert at the same key is recorded as a
    /// duplicate (reported by [`validate_matrix`]) and keeps the first value.
    pub fn insert(&mut self, key: CellKey, cell: Cell) {
        if self.cells.contains_key(&key) {
            self.duplicates.push(key);
        } else {
            self.cells.insert(key, cell);
        }
    }

    pub fn set_population(&mut self, item_id: &str, population: &str) {
        self.item_populations
            .insert(item_id.to_string(), population.to_string());
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> impl Iterator<Item = (&CellKey, &Cell)> {
        self.cells.iter()
    }

    pub fn get(&self, key: &CellKey) -> Option<&Cell> {
        self.cells.get(key)
    }

    /// All item ids appearing in any cell, sorted.
    pub fn item_ids(&self) -> Vec<String> {
        let mut set: BTreeSet<String> = self.cells.keys().map(|k| k.item_id.clone()).collect();
        set.extend(self.item_populations.keys().cloned());
        set.into_iter().collect()
    }

    pub fn attribute_ids(&self) -> Vec<String> {
        let set: BTreeSet<String> = self.cells.keys().map(|k| k.attribute_id.clone()).collect();
        set.into_iter().collect()
    }

    /// Rated values for one (item, annotator, attribute) across sample slots.
    pub fn rated_values(&self, item_id: &str, annotator_id: &str, attribute_id: &str) -> Vec<RatingValue> {
        self.cells
            .iter()
            .filter(|(k, _)| {
                k.item_id == item_id && k.annotator_id == annotator_id && k.attribute_id == attribute_id
            })
            .filter_map(|(_, c)| c.rating().map(|r| r.value))
            .collect()
    }

    /// Rater slots for a group and attribute: every (annotator, sample slot)
    /// pair recorded anywhere (rated or missing). For a single sampled LLM
    /// annotator the sample slots play the role of the individual raters.
    pub fn rater_slots(&self, group: &[String], attribute_id: &str) -> Vec<(String, u32)> {
        let mut set = BTreeSet::new();
        for key in self.cells.keys() {
            if key.attribute_id == attribute_id && group.iter().any(|g| *g == key.annotator_id) {
                set.insert((key.annotator_id.clone(), key.sample_index));
            }
        }
        set.into_iter().collect()
    }

    /// The rating a specific rater slot gave an item, if any.
    pub fn rater_value(
        &self,
        item_id: &str,
        attribute_id: &str,
        rater: &(String, u32),
    ) -> Option<RatingValue> {
        let key = CellKey {
            item_id: item_id.to_string(),
            annotator_id: rater.0.clone(),
            attribute_id: attribute_id.to_string(),
            sample_index: rater.1,
        };
        self.cells.get(&key).and_then(|c| c.rating().map(|r| r.value))
    }

    /// All rated values a group gave an item on an attribute, pooled across
    /// annotators and sample slots.
    pub fn group_values(&self, item_id: &str, group: &[String], attribute_id: &str) -> Vec<RatingValue> {
        self.cells
            .iter()
            .filter(|(k, _)| {
                k.item_id == item_id
                    && k.attribute_id == attribute_id
                    && group.iter().any(|g| *g == k.annotator_id)
            })
            .filter_map(|(_, c)| c.rating().map(|r| r.value))
            .collect()
    }

    /// Merges another matrix (human imports into a run matrix, typically).
    /// Duplicate keys are recorded, first value wins.
    pub fn merge(&mut self, other: RatingMatrix) {
        for entry in other.annotator_roster {
            self.add_roster_entry(entry);
        }
        for (item, pop) in other.item_populations {
            self.item_populations.entry(item).or_insert(pop);
        }
        for (key, cell) in other.cells {
            self.insert(key, cell);
        }
    }

    pub fn duplicates(&self) -> &[CellKey] {
        &self.duplicates
    }
}

impl Serialize for RatingMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire<'a> {
            task_id: &'a str,
            annotator_roster: &'a [AnnotatorRef],
            item_populations: &'a BTreeMap<String, String>,
            cells: Vec<CellRecord>,
        }
        let cells = self
            .cells
            .iter()
            .map(|(k, c)| CellRecord {
                key: k.clone(),
                cell: c.clone(),
            })
            .collect();
        Wire {
            task_id: &self.task_id,
            annotator_roster: &self.annotator_roster,
            item_populations: &self.item_populations,
            cells,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RatingMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            task_id: String,
            #[serde(default)]
            annotator_roster: Vec<AnnotatorRef>,
            #[serde(default)]
            item_populations: BTreeMap<String, String>,
            #[serde(default)]
            cells: Vec<CellRecord>,
        }
        let wire = Wire::deserialize(deserializer)?;
        let mut matrix = RatingMatrix::new(&wire.task_id);
        matrix.annotator_roster = wire.annotator_roster;
        matrix.item_populations = wire.item_populations;
        for record in wire.cells {
            matrix.insert(record.key, record.cell);
        }
        Ok(matrix)
    }
}

/// One well-formedness violation found by [`validate_matrix`]. Violations
/// are data, not errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    OffGridValue { key: CellKey, value: RatingValue },
    UnknownAttribute { key: CellKey },
    DuplicateCell { key: CellKey },
    SampleIndexOutOfRange { key: CellKey, limit: u32 },
    UnknownAnnotator { key: CellKey },
}

/// Checks every present cell against the task's scales, attribute ids, the
/// roster, and per-annotator sample bounds. Empty result iff well-formed.
pub fn validate_matrix(matrix: &RatingMatrix, task: &TaskSpec) -> Vec<Violation> {
    let mut violations = Vec::new();
    for (key, cell) in matrix.cells() {
        let attr = task.attribute(&key.attribute_id);
        match attr {
            None => violations.push(Violation::UnknownAttribute { key: key.clone() }),
            Some(attr) => {
                if let Some(rating) = cell.rating() {
                    if !attr.scale.contains(rating.value) {
                        violations.push(Violation::OffGridValue {
                            key: key.clone(),
                            value: rating.value,
                        });
                    }
                }
            }
        }
        match matrix.roster_entry(&key.annotator_id) {
            None => violations.push(Violation::UnknownAnnotator { key: key.clone() }),
            Some(entry) => {
                if key.sample_index >= entry.samples_per_question {
                    violations.push(Violation::SampleIndexOutOfRange {
                        key: key.clone(),
                        limit: entry.samples_per_question,
                    });
                }
            }
        }
    }
    for key in matrix.duplicates() {
        violations.push(Violation::DuplicateCell { key: key.clone() });
    }
    violations
}

pub const STORY_TASK_TOML: &str = include_str!("../tasks/story.toml");
pub const ATTACK_TASK_TOML: &str = include_str!("../tasks/attack.toml");

/// The story-rating task: four attributes (grammaticality, cohesiveness,
/// likability, relevance) on a 1-5 half-point grid, three samples per
/// question. Identical to the shipped `tasks/story.toml`.
pub fn builtin_story_task() -> TaskSpec {
    static TASK: OnceLock<TaskSpec> = OnceLock::new();
    TASK.get_or_init(|| TaskSpec::from_toml(STORY_TASK_TOML).expect("builtin story task parses"))
        .clone()
}

/// The adversarial-title task: fluency over one title, meaning preservation
/// over a title pair. Identical to the shipped `tasks/attack.toml`.
pub fn builtin_attack_task() -> TaskSpec {
    static TASK: OnceLock<TaskSpec> = OnceLock::new();
    TASK.get_or_init(|| TaskSpec::from_toml(ATTACK_TASK_TOML).expect("builtin attack task parses"))
        .clone()
}

/// Looks a task up by id: the two built-ins, or a TOML file path.
pub fn load_task(id_or_path: &str) -> Result<TaskSpec, TypeError> {
    match id_or_path {
        "story" => Ok(builtin_story_task()),
        "attack" => Ok(builtin_attack_task()),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| TypeError::TaskFile(format!("{path}: {e}")))?;
            TaskSpec::from_toml(&text)
        }
    }
}

/// Reads a JSON-lines dataset: one flat object per line with `item_id`,
/// `population`, and the task's schema fields.
pub fn load_dataset(path: &std::path::Path, task: &TaskSpec) -> Result<Vec<EvalItem>, TypeError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| TypeError::TaskFile(format!("{}: {e}", path.display())))?;
    let mut items = Vec::new();
    let mut seen = BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut record: BTreeMap<String, String> = serde_json::from_str(line).map_err(|e| {
            TypeError::TaskFile(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        let item_id = record.remove("item_id").ok_or_else(|| {
            TypeError::TaskFile(format!("{}:{}: missing item_id", path.display(), lineno + 1))
        })?;
        let population = record.remove("population").ok_or_else(|| {
            TypeError::TaskFile(format!("{}:{}: missing population", path.display(), lineno + 1))
        })?;
        if !seen.insert(item_id.clone()) {
            return Err(TypeError::TaskFile(format!(
                "{}:{}: duplicate item_id {item_id}",
                path.display(),
                lineno + 1
            )));
        }
        let item = EvalItem {
            item_id,
            population,
            fields: record,
        };
        task.validate_item(&item)?;
        items.push(item);
    }
    Ok(items)
}
