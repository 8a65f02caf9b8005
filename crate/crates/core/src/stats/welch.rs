//! Welch's two-sample t-test with Welch-Satterthwaite degrees of freedom and
//! p-values from the in-repo Student-t CDF.

use serde::{Deserialize, Serialize};

use crate::stats::special::student_t_two_sided_p;
use crate::stats::StatsError;

/// Which tail to report. Two-sided is the default everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    TwoSided,
    /// P(T >= t): mean of x greater than mean of y.
    OneSidedGreater,
    /// P(T <= t): mean of x less than mean of y.
    OneSidedLess,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
    pub significant_at_0_05: bool,
}

/// Two-sided Welch's t-test.
pub fn welch_t_test(x: &[f64], y: &[f64]) -> Result<WelchTest, StatsError> {
    welch_t_test_tailed(x, y, Tail::TwoSided)
}

pub fn welch_t_test_tailed(x: &[f64], y: &[f64], tail: Tail) -> Result<WelchTest, StatsError> {
    if x.len() < 2 || y.len() < 2 {
        return Err(StatsError::InsufficientData(
            "welch_t_test needs at least 2 observations per sample".into(),
        ));
    }
    let nx = x.len() as f64;
    let ny = y.len() as f64;
    let mx = x.iter().sum::<f64>() / nx;
    let my = y.iter().sum::<f64>() / ny;
    let vx = x.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / (nx - 1.0);
    let vy = y.iter().map(|v| (v - my).powi(2)).sum::<f64>() / (ny - 1.0);

    let sx = vx / nx;
    let sy = vy / ny;
    let se2 = sx + sy;

    if se2 == 0.0 {
        if mx == my {
            return Err(StatsError::ZeroVariance);
        }
        // two constant samples at different levels: infinitely separated
        let t = if mx > my { f64::INFINITY } else { f64::NEG_INFINITY };
        return Ok(finish(t, nx + ny - 2.0, tail));
    }

    let t = (mx - my) / se2.sqrt();
    let df = se2 * se2 / (sx * sx / (nx - 1.0) + sy * sy / (ny - 1.0));
    Ok(finish(t, df, tail))
}

fn finish(t: f64, df: f64, tail: Tail) -> WelchTest {
    let two_sided = student_t_two_sided_p(t, df);
    let p_value = match tail {
        Tail::TwoSided => two_sided,
        Tail::OneSidedGreater => {
            if t >= 0.0 {
                two_sided / 2.0
            } else {
                1.0 - two_sided / 2.0
            }
        }
        Tail::OneSidedLess => {
            if t <= 0.0 {
                two_sided / 2.0
            } else {
                1.0 - two_sided / 2.0
            }
        }
    };
    WelchTest {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value,
        significant_at_0_05: p_value < 0.05,
    }
}
