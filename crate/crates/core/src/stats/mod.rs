//! Every statistic the reports need: per-group mean/std, Krippendorff's
//! alpha, exact-agreement percentage, Kendall's tau-b, and Welch's t-test.
//! All operations are pure; rationals convert to `f64` here.

pub mod alpha;
pub mod kendall;
pub mod special;
pub mod welch;

pub use alpha::{alpha_from_units, krippendorff_alpha, krippendorff_alpha_over, AlphaLevel};
pub use kendall::{kendall_tau, kendall_tau_exact_p, KendallTau};
pub use welch::{welch_t_test, welch_t_test_tailed, Tail, WelchTest};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::RatingMatrix;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("empty input")]
    EmptyInput,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("zero variance in both samples with equal means; t is undefined")]
    ZeroVariance,
    #[error("no ratings for items: {}", items.join(", "))]
    NoRatings { items: Vec<String> },
}

/// Which denominator the standard deviation uses. The sample (n-1) form is
/// the default; reports always label the choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdDenominator {
    #[default]
    Sample,
    Population,
}

impl std::fmt::Display for StdDenominator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StdDenominator::Sample => f.write_str("sample (n-1)"),
            StdDenominator::Population => f.write_str("population (n)"),
        }
    }
}

/// Arithmetic mean and standard deviation (sample denominator).
pub fn mean_std(values: &[f64]) -> Result<(f64, f64), StatsError> {
    mean_std_with(values, StdDenominator::Sample)
}

pub fn mean_std_with(values: &[f64], denom: StdDenominator) -> Result<(f64, f64), StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let var = match denom {
        StdDenominator::Sample => ss / (n - 1.0),
        StdDenominator::Population => ss / n,
    };
    Ok((mean, var.sqrt()))
}

/// Per-item mean of every rating the group gave, pooled across annotators
/// and sample slots, ordered by item id. Errors list every item with no
/// rating at all.
pub fn item_average_ratings(
    matrix: &RatingMatrix,
    group: &[String],
    attribute_id: &str,
) -> Result<Vec<(String, f64)>, StatsError> {
    let items = matrix.item_ids();
    item_average_ratings_over(matrix, group, attribute_id, &items)
}

/// Per-item averages restricted to the given items.
pub fn item_average_ratings_over(
    matrix: &RatingMatrix,
    group: &[String],
    attribute_id: &str,
    items: &[String],
) -> Result<Vec<(String, f64)>, StatsError> {
    let mut averages = Vec::with_capacity(items.len());
    let mut empty = Vec::new();
    for item in items {
        let values = matrix.group_values(item, group, attribute_id);
        if values.is_empty() {
            empty.push(item.clone());
            continue;
        }
        let mean = values.iter().map(|v| v.as_f64()).sum::<f64>() / values.len() as f64;
        averages.push((item.clone(), mean));
    }
    if !empty.is_empty() {
        return Err(StatsError::NoRatings { items: empty });
    }
    averages.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(averages)
}

/// Percentage of items on which every rater slot in the group gave the exact
/// same rating, over items where every rater slot is present. For a single
/// sampled LLM annotator the sample slots are the raters.
pub fn exact_agreement_pct(
    matrix: &RatingMatrix,
    group: &[String],
    attribute_id: &str,
) -> Result<f64, StatsError> {
    let items = matrix.item_ids();
    exact_agreement_pct_over(matrix, group, attribute_id, &items)
}

pub fn exact_agreement_pct_over(
    matrix: &RatingMatrix,
    group: &[String],
    attribute_id: &str,
    items: &[String],
) -> Result<f64, StatsError> {
    if group.is_empty() {
        return Err(StatsError::InsufficientData("empty annotator group".into()));
    }
    let raters = matrix.rater_slots(group, attribute_id);
    if raters.len() < 2 {
        return Err(StatsError::InsufficientData(format!(
            "exact agreement needs at least 2 rater slots, got {}",
            raters.len()
        )));
    }
    let mut complete = 0usize;
    let mut agreeing = 0usize;
    for item in items {
        let values: Vec<_> = raters
            .iter()
            .map(|r| matrix.rater_value(item, attribute_id, r))
            .collect();
        if values.iter().any(|v| v.is_none()) {
            continue; // items with a missing rating leave the denominator
        }
        complete += 1;
        let first = values[0];
        if values.iter().all(|v| *v == first) {
            agreeing += 1;
        }
    }
    if complete == 0 {
        return Err(StatsError::InsufficientData(
            "no item has a complete set of ratings".into(),
        ));
    }
    Ok(100.0 * agreeing as f64 / complete as f64)
}

/// Correlation strength bands for |tau|.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauBand {
    VeryWeak,
    Weak,
    Moderate,
    Strong,
}

impl std::fmt::Display for TauBand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TauBand::VeryWeak => f.write_str("very_weak"),
            TauBand::Weak => f.write_str("weak"),
            TauBand::Moderate => f.write_str("moderate"),
            TauBand::Strong => f.write_str("strong"),
        }
    }
}

/// Band for |tau|: [0, 0.1) very weak, [0.1, 0.2) weak, [0.2, 0.3) moderate,
/// [0.3, 1.0] strong.
pub fn interpret_tau(tau: f64) -> TauBand {
    let t = tau.abs();
    if t < 0.1 {
        TauBand::VeryWeak
    } else if t < 0.2 {
        TauBand::Weak
    } else if t < 0.3 {
        TauBand::Moderate
    } else {
        TauBand::Strong
    }
}

/// Per-attribute, per-population aggregate for one annotator group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub population: String,
    pub attribute_id: String,
    /// Mean of the per-item average ratings.
    pub mean: f64,
    pub std: f64,
    pub n_items: usize,
    /// None when the group has a single rater slot (IAA undefined).
    pub alpha: Option<f64>,
    pub exact_agreement_pct: Option<f64>,
}

/// Tau with its presentation context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub attribute_id: String,
    pub population: String,
    pub tau: f64,
    pub p_value: f64,
    pub n_pairs: usize,
    pub interpretation_band: TauBand,
}

/// Stats configuration a report must disclose with its numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsSettings {
    pub std_denominator: StdDenominator,
    pub alpha_level: AlphaLevel,
    pub welch_tail: Tail,
}

impl Default for StatsSettings {
    fn default() -> Self {
        StatsSettings {
            std_denominator: StdDenominator::Sample,
            alpha_level: AlphaLevel::Interval,
            welch_tail: Tail::TwoSided,
        }
    }
}

/// Builds the Table-1-style aggregate for one (group, attribute, population):
/// mean/std over per-item averages, alpha and exact agreement over the rater
/// slots when there are at least two.
pub fn summarize_group(
    matrix: &RatingMatrix,
    group: &[String],
    attribute_id: &str,
    population: &str,
    items: &[String],
    settings: &StatsSettings,
) -> Result<GroupSummary, StatsError> {
    let averages = item_average_ratings_over(matrix, group, attribute_id, items)?;
    let values: Vec<f64> = averages.iter().map(|(_, v)| *v).collect();
    let (mean, std) = mean_std_with(&values, settings.std_denominator)?;
    let raters = matrix.rater_slots(group, attribute_id);
    let (alpha, exact) = if raters.len() >= 2 {
        (
            krippendorff_alpha_over(matrix, group, attribute_id, items, settings.alpha_level).ok(),
            exact_agreement_pct_over(matrix, group, attribute_id, items).ok(),
        )
    } else {
        (None, None)
    };
    Ok(GroupSummary {
        population: population.to_string(),
        attribute_id: attribute_id.to_string(),
        mean,
        std,
        n_items: values.len(),
        alpha,
        exact_agreement_pct: exact,
    })
}

/// The Table-2 recipe: item-average vectors for both groups over the same
/// items, then tau-b between them.
pub fn correlate_groups(
    matrix: &RatingMatrix,
    group_a: &[String],
    group_b: &[String],
    attribute_id: &str,
    population: &str,
    items: &[String],
) -> Result<CorrelationResult, StatsError> {
    let avg_a = item_average_ratings_over(matrix, group_a, attribute_id, items)?;
    let avg_b = item_average_ratings_over(matrix, group_b, attribute_id, items)?;
    let a: Vec<f64> = avg_a.iter().map(|(_, v)| *v).collect();
    let b: Vec<f64> = avg_b.iter().map(|(_, v)| *v).collect();
    let tau = kendall_tau(&a, &b)?;
    Ok(CorrelationResult {
        attribute_id: attribute_id.to_string(),
        population: population.to_string(),
        tau: tau.tau,
        p_value: tau.p_value,
        n_pairs: a.len(),
        interpretation_band: interpret_tau(tau.tau),
    })
}

/// Average tau over all C(k, 2) annotator pairs inside one group, each
/// annotator reduced to its per-item average vector first.
pub fn pairwise_group_tau(
    matrix: &RatingMatrix,
    group: &[String],
    attribute_id: &str,
    items: &[String],
) -> Result<f64, StatsError> {
    if group.len() < 2 {
        return Err(StatsError::InsufficientData(
            "pairwise tau needs at least 2 annotators".into(),
        ));
    }
    let mut taus = Vec::new();
    for i in 0..group.len() {
        for j in i + 1..group.len() {
            let a = item_average_ratings_over(matrix, &group[i..=i], attribute_id, items)?;
            let b = item_average_ratings_over(matrix, &group[j..=j], attribute_id, items)?;
            let av: Vec<f64> = a.iter().map(|(_, v)| *v).collect();
            let bv: Vec<f64> = b.iter().map(|(_, v)| *v).collect();
            taus.push(kendall_tau(&av, &bv)?.tau);
        }
    }
    Ok(taus.iter().sum::<f64>() / taus.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{AnnotatorKind, AnnotatorRef, Cell, CellKey, Rating, RatingMatrix, RatingValue};
    use approx::assert_abs_diff_eq;

    #[test]
    fn mean_std_constant_list() {
        let (m, s) = mean_std(&[3.0, 3.0, 3.0]).unwrap();
        assert_eq!((m, s), (3.0, 0.0));
    }

    #[test]
    fn mean_std_two_points() {
        let (m, s) = mean_std(&[1.0, 5.0]).unwrap();
        assert_eq!(m, 3.0);
        assert_abs_diff_eq!(s, 2.8284271247461903, epsilon = 1e-12);
    }

    #[test]
    fn mean_std_hand_fixture() {
        let (m, s) = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
        assert_eq!(m, 5.0);
        // sqrt(32/7) by hand
        assert_abs_diff_eq!(s, (32.0f64 / 7.0).sqrt(), epsilon = 1e-12);
        let (_, pop) = mean_std_with(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0], StdDenominator::Population).unwrap();
        assert_eq!(pop, 2.0);
    }

    #[test]
    fn mean_std_empty_rejected() {
        assert!(matches!(mean_std(&[]), Err(StatsError::EmptyInput)));
    }

    #[test]
    fn tau_bands() {
        assert_eq!(interpret_tau(0.05), TauBand::VeryWeak);
        assert_eq!(interpret_tau(0.14), TauBand::Weak);
        assert_eq!(interpret_tau(0.25), TauBand::Moderate);
        assert_eq!(interpret_tau(0.38), TauBand::Strong);
        assert_eq!(interpret_tau(-0.38), TauBand::Strong);
        assert_eq!(interpret_tau(1.0), TauBand::Strong);
    }

    fn matrix(cells: &[(&str, &str, &str, u32, f64)]) -> RatingMatrix {
        let mut m = RatingMatrix::new("story");
        for annot in ["t1", "t2", "t3", "llm"] {
            m.add_roster_entry(AnnotatorRef {
                id: annot.into(),
                kind: if annot == "llm" { AnnotatorKind::Llm } else { AnnotatorKind::Human },
                samples_per_question: if annot == "llm" { 3 } else { 1 },
            });
        }
        for (item, annot, attr, sample, value) in cells {
            m.insert(
                CellKey {
                    item_id: item.to_string(),
                    annotator_id: annot.to_string(),
                    attribute_id: attr.to_string(),
                    sample_index: *sample,
                },
                Cell::Rated {
                    rating: Rating {
                        value: RatingValue::new((value * 2.0).round() as i64, 2),
                        annotator_id: annot.to_string(),
                        sample_index: *sample,
                        raw_response_ref: None,
                        parse_trace: vec![],
                    },
                    retry_count: 0,
                },
            );
            m.set_population(item, "human");
        }
        m
    }

    fn g(ids: &[&str]) -> Vec<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn item_average_pools_annotators() {
        let m = matrix(&[
            ("i1", "t1", "grammaticality", 0, 4.0),
            ("i1", "t2", "grammaticality", 0, 4.0),
            ("i1", "t3", "grammaticality", 0, 5.0),
        ]);
        let avg = item_average_ratings(&m, &g(&["t1", "t2", "t3"]), "grammaticality").unwrap();
        assert_eq!(avg.len(), 1);
        assert_abs_diff_eq!(avg[0].1, 13.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn item_average_pools_llm_samples() {
        let m = matrix(&[
            ("i1", "llm", "grammaticality", 0, 3.0),
            ("i1", "llm", "grammaticality", 1, 4.0),
            ("i1", "llm", "grammaticality", 2, 5.0),
        ]);
        let avg = item_average_ratings(&m, &g(&["llm"]), "grammaticality").unwrap();
        assert_eq!(avg[0].1, 4.0);
    }

    #[test]
    fn item_average_reports_uncovered_items() {
        let m = matrix(&[
            ("i1", "t1", "grammaticality", 0, 4.0),
            ("i2", "t1", "likability", 0, 2.0),
        ]);
        let err = item_average_ratings(&m, &g(&["t1"]), "grammaticality").unwrap_err();
        match err {
            StatsError::NoRatings { items } => assert_eq!(items, vec!["i2".to_string()]),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn exact_agreement_counts() {
        let m = matrix(&[
            ("i1", "t1", "a", 0, 4.0),
            ("i1", "t2", "a", 0, 4.0),
            ("i2", "t1", "a", 0, 4.0),
            ("i2", "t2", "a", 0, 5.0),
            ("i3", "t1", "a", 0, 3.0),
            ("i3", "t2", "a", 0, 3.0),
            ("i4", "t1", "a", 0, 2.0),
            ("i4", "t2", "a", 0, 1.0),
        ]);
        let pct = exact_agreement_pct(&m, &g(&["t1", "t2"]), "a").unwrap();
        assert_eq!(pct, 50.0);
    }

    #[test]
    fn exact_agreement_excludes_incomplete_items() {
        // i2 misses t2's rating: excluded from the denominator
        let m = matrix(&[
            ("i1", "t1", "a", 0, 4.0),
            ("i1", "t2", "a", 0, 4.0),
            ("i2", "t1", "a", 0, 4.0),
            ("i3", "t1", "a", 0, 2.0),
            ("i3", "t2", "a", 0, 1.0),
        ]);
        let pct = exact_agreement_pct(&m, &g(&["t1", "t2"]), "a").unwrap();
        assert_eq!(pct, 50.0);
    }

    #[test]
    fn exact_agreement_all_agree() {
        let m = matrix(&[
            ("i1", "t1", "a", 0, 4.0),
            ("i1", "t2", "a", 0, 4.0),
            ("i2", "t1", "a", 0, 2.0),
            ("i2", "t2", "a", 0, 2.0),
        ]);
        assert_eq!(exact_agreement_pct(&m, &g(&["t1", "t2"]), "a").unwrap(), 100.0);
    }

    #[test]
    fn llm_samples_act_as_raters_for_agreement() {
        let m = matrix(&[
            ("i1", "llm", "a", 0, 4.0),
            ("i1", "llm", "a", 1, 4.0),
            ("i1", "llm", "a", 2, 4.0),
            ("i2", "llm", "a", 0, 3.0),
            ("i2", "llm", "a", 1, 4.0),
            ("i2", "llm", "a", 2, 4.0),
        ]);
        assert_eq!(exact_agreement_pct(&m, &g(&["llm"]), "a").unwrap(), 50.0);
    }

    #[test]
    fn summarize_group_reports_iaa_only_with_multiple_raters() {
        let m = matrix(&[
            ("i1", "t1", "a", 0, 4.0),
            ("i2", "t1", "a", 0, 5.0),
        ]);
        let items = m.item_ids();
        let s = summarize_group(&m, &g(&["t1"]), "a", "human", &items, &StatsSettings::default()).unwrap();
        assert!(s.alpha.is_none());
        assert!(s.exact_agreement_pct.is_none());
        assert_eq!(s.n_items, 2);
    }

    #[test]
    fn correlate_identical_groups_is_one() {
        let m = matrix(&[
            ("i1", "t1", "a", 0, 4.0),
            ("i2", "t1", "a", 0, 2.0),
            ("i3", "t1", "a", 0, 5.0),
            ("i1", "llm", "a", 0, 4.0),
            ("i2", "llm", "a", 0, 2.0),
            ("i3", "llm", "a", 0, 5.0),
        ]);
        let items = m.item_ids();
        let c = correlate_groups(&m, &g(&["t1"]), &g(&["llm"]), "a", "human", &items).unwrap();
        assert_eq!(c.tau, 1.0);
        assert_eq!(c.n_pairs, 3);
        assert_eq!(c.interpretation_band, TauBand::Strong);
    }
}
