//! Kendall's tau-b rank correlation with tie correction and a two-sided
//! p-value from the normal approximation of the standardized S statistic.
//! Averaged Likert ratings tie heavily, so the tie-corrected variant is the
//! only one that is not systematically deflated here.

use crate::stats::special::erfc;
use crate::stats::StatsError;

/// Tau-b plus its two-sided p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KendallTau {
    pub tau: f64,
    pub p_value: f64,
}

struct TieStats {
    /// sum over tie runs of t*(t-1)/2
    pairs: f64,
    /// sum of t*(t-1)*(2t+5)
    v: f64,
    /// sum of t*(t-1)
    v1: f64,
    /// sum of t*(t-1)*(t-2)
    v2: f64,
}

fn tie_stats<F: Fn(usize, usize) -> bool>(n: usize, same: F) -> TieStats {
    let mut stats = TieStats {
        pairs: 0.0,
        v: 0.0,
        v1: 0.0,
        v2: 0.0,
    };
    let mut run = 1usize;
    let mut flush = |run: usize, stats: &mut TieStats| {
        let t = run as f64;
        stats.pairs += t * (t - 1.0) / 2.0;
        stats.v += t * (t - 1.0) * (2.0 * t + 5.0);
        stats.v1 += t * (t - 1.0);
        stats.v2 += t * (t - 1.0) * (t - 2.0);
    };
    for i in 1..n {
        if same(i - 1, i) {
            run += 1;
        } else {
            flush(run, &mut stats);
            run = 1;
        }
    }
    flush(run, &mut stats);
    stats
}

/// Merge sort over the y sequence counting the exchanges needed to sort it;
/// the exchange count equals the number of discordant pairs.
fn merge_sort_swaps(values: &mut Vec<f64>) -> f64 {
    let n = values.len();
    let mut buffer = vec![0.0f64; n];
    let mut swaps = 0.0f64;
    let mut width = 1usize;
    while width < n {
        let mut start = 0usize;
        while start < n {
            let mid = (start + width).min(n);
            let end = (start + 2 * width).min(n);
            let (mut i, mut j, mut k) = (start, mid, start);
            while i < mid || j < end {
                if i < mid && (j >= end || values[i] <= values[j]) {
                    buffer[k] = values[i];
                    i += 1;
                } else {
                    buffer[k] = values[j];
                    swaps += (mid - i) as f64;
                    j += 1;
                }
                k += 1;
            }
            start = end;
        }
        values[..n].copy_from_slice(&buffer[..n]);
        width *= 2;
    }
    swaps
}

/// Tau-b between two equal-length vectors with the tie-corrected normal
/// p-value. Constant vectors are degenerate (tau undefined), reported as an
/// error rather than 0.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<KendallTau, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(StatsError::InsufficientData(
            "kendall_tau needs vectors of length at least 2".into(),
        ));
    }
    if a.iter().any(|v| v.is_nan()) || b.iter().any(|v| v.is_nan()) {
        return Err(StatsError::DegenerateInput("NaN in input vector".into()));
    }
    if a.iter().all(|v| *v == a[0]) {
        return Err(StatsError::DegenerateInput("first vector is constant".into()));
    }
    if b.iter().all(|v| *v == b[0]) {
        return Err(StatsError::DegenerateInput("second vector is constant".into()));
    }

    let mut pairs: Vec<(f64, f64)> = a.iter().copied().zip(b.iter().copied()).collect();
    pairs.sort_by(|p, q| p.partial_cmp(q).expect("no NaN"));

    let x_ties = tie_stats(n, |i, j| pairs[i].0 == pairs[j].0);
    let joint = tie_stats(n, |i, j| pairs[i] == pairs[j]);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let discordant = merge_sort_swaps(&mut ys);
    let y_ties = tie_stats(n, |i, j| ys[i] == ys[j]);

    let nf = n as f64;
    let total_pairs = nf * (nf - 1.0) / 2.0;
    // tot = con + dis + (xtie - ntie) + (ytie - ntie) + ntie
    let s = total_pairs - x_ties.pairs - y_ties.pairs + joint.pairs - 2.0 * discordant;
    let denom = ((total_pairs - x_ties.pairs) * (total_pairs - y_ties.pairs)).sqrt();
    let tau = (s / denom).clamp(-1.0, 1.0);

    let v0 = nf * (nf - 1.0) * (2.0 * nf + 5.0);
    let mut var_s = (v0 - x_ties.v - y_ties.v) / 18.0
        + x_ties.v1 * y_ties.v1 / (2.0 * nf * (nf - 1.0));
    if n > 2 {
        var_s += x_ties.v2 * y_ties.v2 / (9.0 * nf * (nf - 1.0) * (nf - 2.0));
    }
    let p_value = if var_s > 0.0 {
        let z = s / var_s.sqrt();
        erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
    } else {
        1.0
    };

    Ok(KendallTau { tau, p_value })
}

/// Exact permutation p-value P(|S_perm| >= |S_obs|) for small vectors,
/// intended as a test oracle for the normal approximation. Refuses n > 10.
pub fn kendall_tau_exact_p(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    if !(2..=10).contains(&n) {
        return Err(StatsError::InsufficientData(
            "exact permutation p-value limited to 2 <= n <= 10".into(),
        ));
    }
    let sign = |x: f64, y: f64| -> i64 {
        match x.partial_cmp(&y).expect("no NaN") {
            std::cmp::Ordering::Less => -1,
            std::cmp::Ordering::Equal => 0,
            std::cmp::Ordering::Greater => 1,
        }
    };
    let s_of = |perm: &[usize]| -> i64 {
        let mut s = 0i64;
        for i in 0..n {
            for j in i + 1..n {
                s += sign(a[i], a[j]) * sign(b[perm[i]], b[perm[j]]);
            }
        }
        s
    };
    let identity: Vec<usize> = (0..n).collect();
    let observed = s_of(&identity).abs();

    let mut perm = identity.clone();
    let mut counts = vec![0usize; n];
    let mut at_least = 0u64;
    let mut total = 0u64;
    // Heap's algorithm, iterative
    let mut record = |perm: &[usize]| {
        total += 1;
        if s_of(perm).abs() >= observed {
            at_least += 1;
        }
    };
    record(&perm);
    let mut i = 0;
    while i < n {
        if counts[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counts[i], i);
            }
            record(&perm);
            counts[i] += 1;
            i = 0;
        } else {
            counts[i] = 0;
            i += 1;
        }
    }
    Ok(at_least as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identical_order_is_one() {
        let r = kendall_tau(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(r.tau, 1.0);
    }

    #[test]
    fn reversed_order_is_minus_one() {
        let r = kendall_tau(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]).unwrap();
        assert_eq!(r.tau, -1.0);
    }

    #[test]
    fn enumerated_pairs_example() {
        // 10 pairs: 8 concordant, 2 discordant -> tau = 0.6
        let r = kendall_tau(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 3.0, 5.0, 4.0]).unwrap();
        assert_abs_diff_eq!(r.tau, 0.6, epsilon = 1e-12);
    }

    #[test]
    fn ties_reference_value() {
        // from a published tau-b worked example
        let x = [1.0, 1.0, 2.0, 2.0, 3.0, 3.0];
        let y = [1.0, 2.0, 2.0, 3.0, 3.0, 4.0];
        let r = kendall_tau(&x, &y).unwrap();
        assert_abs_diff_eq!(r.tau, 0.8006407690254358, epsilon = 1e-12);
    }

    #[test]
    fn constant_vector_is_degenerate() {
        assert!(matches!(
            kendall_tau(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(StatsError::DegenerateInput(_))
        ));
        assert!(matches!(
            kendall_tau(&[1.0, 2.0, 3.0], &[7.0, 7.0, 7.0]),
            Err(StatsError::DegenerateInput(_))
        ));
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(matches!(
            kendall_tau(&[1.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(StatsError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn antisymmetry_under_reversal() {
        let a = [0.5, 2.0, 1.0, 4.0, 3.0, 6.0];
        let b = [1.0, 3.0, 2.0, 5.0, 4.0, 6.0];
        let neg_b: Vec<f64> = b.iter().map(|v| -v).collect();
        let r1 = kendall_tau(&a, &b).unwrap();
        let r2 = kendall_tau(&a, &neg_b).unwrap();
        assert_abs_diff_eq!(r1.tau, -r2.tau, epsilon = 1e-12);
        assert_abs_diff_eq!(r1.p_value, r2.p_value, epsilon = 1e-12);
    }

    #[test]
    fn exact_p_close_to_normal_approximation() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let b = [2.0, 1.0, 4.0, 3.0, 6.0, 5.0, 8.0, 7.0];
        let approx_p = kendall_tau(&a, &b).unwrap().p_value;
        let exact_p = kendall_tau_exact_p(&a, &b).unwrap();
        // the normal approximation is loose at n = 8; coarse agreement only
        assert!((approx_p - exact_p).abs() < 0.08, "approx {approx_p} exact {exact_p}");
    }

    #[test]
    fn exact_p_refuses_large_n() {
        let a: Vec<f64> = (0..11).map(|i| i as f64).collect();
        assert!(kendall_tau_exact_p(&a, &a).is_err());
    }
}
