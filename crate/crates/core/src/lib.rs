//! Evaluation harness that rates text quality by querying LLM annotators
//! with fixed prompt formats, extracting Likert ratings from their free-text
//! answers, and computing the agreement and comparison statistics against
//! imported human ratings.

pub mod parsing;
pub mod prompting;
pub mod providers;
pub mod report;
pub mod runner;
pub mod stats;
pub mod types;

pub use types::{builtin_attack_task, builtin_story_task, RatingMatrix, TaskSpec};
