//! Krippendorff's alpha with missing data, via the coincidence-matrix
//! formulation. Items with fewer than two ratings are dropped (not pairable);
//! nominal, ordinal, and interval difference functions are selectable.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::stats::StatsError;
use crate::types::{RatingMatrix, RatingValue};

/// Measurement level choosing the difference function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaLevel {
    Nominal,
    Ordinal,
    Interval,
}

impl std::fmt::Display for AlphaLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AlphaLevel::Nominal => f.write_str("nominal"),
            AlphaLevel::Ordinal => f.write_str("ordinal"),
            AlphaLevel::Interval => f.write_str("interval"),
        }
    }
}

/// Alpha over every item in the matrix for one annotator group and attribute.
/// Sample slots count as individual raters, so a single three-sampled LLM
/// annotator forms a three-rater group.
pub fn krippendorff_alpha(
    matrix: &RatingMatrix,
    group: &[String],
    attribute_id: &str,
    level: AlphaLevel,
) -> Result<f64, StatsError> {
    let items = matrix.item_ids();
    krippendorff_alpha_over(matrix, group, attribute_id, &items, level)
}

/// Alpha restricted to the given items (population blocks).
pub fn krippendorff_alpha_over(
    matrix: &RatingMatrix,
    group: &[String],
    attribute_id: &str,
    items: &[String],
    level: AlphaLevel,
) -> Result<f64, StatsError> {
    let raters = matrix.rater_slots(group, attribute_id);
    let units: Vec<Vec<RatingValue>> = items
        .iter()
        .map(|item| {
            raters
                .iter()
                .filter_map(|r| matrix.rater_value(item, attribute_id, r))
                .collect()
        })
        .collect();
    alpha_from_units(&units, level)
}

/// Alpha over raw units: one value list per item, already restricted to the
/// rater group. This is the computational core the matrix wrappers feed.
pub fn alpha_from_units(units: &[Vec<RatingValue>], level: AlphaLevel) -> Result<f64, StatsError> {
    let pairable: Vec<&Vec<RatingValue>> = units.iter().filter(|u| u.len() >= 2).collect();
    if pairable.len() < 2 {
        return Err(StatsError::InsufficientData(format!(
            "alpha needs at least 2 items with at least 2 pairable ratings, got {}",
            pairable.len()
        )));
    }

    // category index in value order
    let mut index: BTreeMap<RatingValue, usize> = BTreeMap::new();
    for unit in &pairable {
        for v in *unit {
            let next = index.len();
            index.entry(*v).or_insert(next);
        }
    }
    let m = index.len();
    let values: Vec<RatingValue> = index.keys().copied().collect();

    // coincidence matrix: each ordered pair within a unit weighted 1/(m_u - 1)
    let mut coincidence = vec![vec![0.0f64; m]; m];
    for unit in &pairable {
        let weight = 1.0 / (unit.len() as f64 - 1.0);
        for (i, a) in unit.iter().enumerate() {
            for (j, b) in unit.iter().enumerate() {
                if i != j {
                    coincidence[index[a]][index[b]] += weight;
                }
            }
        }
    }
    let marginals: Vec<f64> = coincidence.iter().map(|row| row.iter().sum()).collect();
    let total: f64 = marginals.iter().sum();

    let delta2 = difference_matrix(&values, &marginals, level);

    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..m {
        for k in 0..m {
            observed += coincidence[c][k] * delta2[c][k];
            expected += marginals[c] * marginals[k] * delta2[c][k];
        }
    }
    let d_observed = observed / total;
    let d_expected = expected / (total * (total - 1.0));

    if d_observed == 0.0 {
        // perfect agreement, including the degenerate single-category case
        return Ok(1.0);
    }
    Ok(1.0 - d_observed / d_expected)
}

/// Squared difference between categories c and k for the chosen level.
/// Ordinal uses the cumulative-marginal metric; interval the squared value
/// difference.
fn difference_matrix(values: &[RatingValue], marginals: &[f64], level: AlphaLevel) -> Vec<Vec<f64>> {
    let m = values.len();
    let mut delta2 = vec![vec![0.0f64; m]; m];
    for c in 0..m {
        for k in 0..m {
            if c == k {
                continue;
            }
            delta2[c][k] = match level {
                AlphaLevel::Nominal => 1.0,
                AlphaLevel::Interval => {
                    let d = values[c].as_f64() - values[k].as_f64();
                    d * d
                }
                AlphaLevel::Ordinal => {
                    let (lo, hi) = if c < k { (c, k) } else { (k, c) };
                    let between: f64 = marginals[lo..=hi].iter().sum();
                    let d = between - (marginals[c] + marginals[k]) / 2.0;
                    d * d
                }
            };
        }
    }
    delta2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(x: f64) -> RatingValue {
        // test helper: halves and integers only
        RatingValue::new((x * 2.0).round() as i64, 2)
    }

    fn units(raw: &[&[f64]]) -> Vec<Vec<RatingValue>> {
        raw.iter().map(|u| u.iter().map(|x| v(*x)).collect()).collect()
    }

    #[test]
    fn perfect_agreement_is_one() {
        let u = units(&[&[4.0, 4.0, 4.0], &[2.0, 2.0, 2.0], &[5.0, 5.0, 5.0]]);
        for level in [AlphaLevel::Nominal, AlphaLevel::Ordinal, AlphaLevel::Interval] {
            assert_eq!(alpha_from_units(&u, level).unwrap(), 1.0);
        }
    }

    #[test]
    fn single_category_everywhere_is_one() {
        let u = units(&[&[3.0, 3.0], &[3.0, 3.0, 3.0]]);
        assert_eq!(alpha_from_units(&u, AlphaLevel::Interval).unwrap(), 1.0);
    }

    #[test]
    fn insufficient_data_rejected() {
        let u = units(&[&[3.0], &[4.0, 4.0]]);
        assert!(matches!(
            alpha_from_units(&u, AlphaLevel::Interval),
            Err(StatsError::InsufficientData(_))
        ));
    }

    #[test]
    fn unpairable_units_dropped() {
        let with_single = units(&[&[4.0, 4.0], &[1.0], &[2.0, 3.0]]);
        let without = units(&[&[4.0, 4.0], &[2.0, 3.0]]);
        assert_abs_diff_eq!(
            alpha_from_units(&with_single, AlphaLevel::Interval).unwrap(),
            alpha_from_units(&without, AlphaLevel::Interval).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn nominal_two_rater_binary_example() {
        // 10 units, 2 raters, 3 disagreements: n_0 = 15, n_1 = 5, n = 20,
        // off-diagonal coincidences sum to 6.
        let u = units(&[
            &[0.0, 0.0],
            &[1.0, 1.0],
            &[0.0, 1.0],
            &[0.0, 0.0],
            &[0.0, 0.0],
            &[0.0, 0.0],
            &[0.0, 0.0],
            &[0.0, 1.0],
            &[1.0, 0.0],
            &[0.0, 0.0],
        ]);
        let alpha = alpha_from_units(&u, AlphaLevel::Nominal).unwrap();
        let d_o = 6.0 / 20.0;
        let d_e = (15.0 * 5.0 + 5.0 * 15.0) / (20.0 * 19.0);
        assert_abs_diff_eq!(alpha, 1.0 - d_o / d_e, epsilon = 1e-12);
    }

    #[test]
    fn interval_differs_from_nominal_on_graded_disagreement() {
        // near-misses: interval forgives, nominal does not
        let near = units(&[&[4.0, 4.5], &[2.0, 2.5], &[3.0, 3.5], &[5.0, 4.5]]);
        let interval = alpha_from_units(&near, AlphaLevel::Interval).unwrap();
        let nominal = alpha_from_units(&near, AlphaLevel::Nominal).unwrap();
        assert!(interval > nominal, "interval {interval} vs nominal {nominal}");
    }

    #[test]
    fn levels_coincide_on_equally_spaced_two_categories() {
        // with exactly two categories all three metrics are proportional,
        // so alpha coincides
        let u = units(&[&[1.0, 1.0], &[1.0, 2.0], &[2.0, 2.0], &[2.0, 1.0], &[1.0, 1.0]]);
        let a = alpha_from_units(&u, AlphaLevel::Nominal).unwrap();
        let b = alpha_from_units(&u, AlphaLevel::Interval).unwrap();
        let c = alpha_from_units(&u, AlphaLevel::Ordinal).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        assert_abs_diff_eq!(a, c, epsilon = 1e-12);
    }
}
