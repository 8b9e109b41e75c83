//! Metrics and the two statistical tests the experiment reports rely on:
//! bootstrap confidence intervals for medians and the Mann-Whitney U rank
//! test (exact by enumeration for small samples, normal approximation with
//! tie and continuity corrections otherwise).

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Resamples drawn for a bootstrap interval unless the caller picks a count.
pub const BOOTSTRAP_ITERS: usize = 1000;
/// Default confidence level.
pub const CONFIDENCE_LEVEL: f64 = 0.95;
/// Largest combined sample size for which the U test enumerates exactly.
pub const MWU_EXACT_LIMIT: usize = 12;

/// Arithmetic mean of per-task success rates.
pub fn avg_success(rates: &[f64]) -> Result<f64> {
    if rates.is_empty() {
        return Err(Error::Evaluation("cannot average zero success rates".into()));
    }
    for r in rates {
        if !r.is_finite() || !(0.0..=1.0).contains(r) {
            return Err(Error::Evaluation(format!("success rate out of range: {r}")));
        }
    }
    Ok(rates.iter().sum::<f64>() / rates.len() as f64)
}

/// Tasks whose success rate meets the threshold (`rate >= alpha`).
pub fn count_learned(rates: &[f64], alpha: f64) -> usize {
    rates.iter().filter(|r| **r >= alpha).count()
}

/// Strict variant: only rates above the threshold count (`rate > alpha`).
pub fn count_learned_strict(rates: &[f64], alpha: f64) -> usize {
    rates.iter().filter(|r| **r > alpha).count()
}

/// Median of a sample (average of the two middle values for even sizes).
pub fn median(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Evaluation("median of an empty sample is undefined".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("samples must not contain NaN"));
    let n = sorted.len();
    Ok(if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 })
}

/// Linear-interpolation quantile of an already-sorted slice.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// A median point estimate with its bootstrap percentile interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapCi {
    pub low: f64,
    pub high: f64,
    pub median: f64,
}

/// Percentile bootstrap interval for the median: resample with replacement
/// `iters` times, take each resample's median, and cut the sorted medians at
/// `(1 - level) / 2` and `(1 + level) / 2`. The point estimate is the median
/// of the original sample. Deterministic for a fixed generator state.
pub fn bootstrap_ci(
    samples: &[f64],
    iters: usize,
    level: f64,
    rng: &mut ChaCha8Rng,
) -> Result<BootstrapCi> {
    if samples.is_empty() {
        return Err(Error::Evaluation("bootstrap needs at least one sample".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("confidence level must lie in (0, 1), got {level}")));
    }
    if iters == 0 {
        return Err(Error::Config("bootstrap needs at least one resample".into()));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::Evaluation("bootstrap samples must be finite".into()));
    }
    let point = median(samples)?;
    let mut medians = Vec::with_capacity(iters);
    let mut resample = vec![0.0; samples.len()];
    for _ in 0..iters {
        for slot in resample.iter_mut() {
            *slot = samples[rng.random_range(0..samples.len())];
        }
        medians.push(median(&resample)?);
    }
    medians.sort_by(|a, b| a.partial_cmp(b).expect("medians are finite"));
    Ok(BootstrapCi {
        low: quantile_sorted(&medians, (1.0 - level) / 2.0),
        high: quantile_sorted(&medians, (1.0 + level) / 2.0),
        median: point,
    })
}

/// Mann-Whitney U statistic with its two-sided p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MwuResult {
    /// `min(U_a, U_b)` — small values mean strong separation.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    /// Whether `p` came from full enumeration rather than the normal
    /// approximation.
    pub exact: bool,
}

/// Midranks (1-based, ties averaged) of the combined sample.
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("values are finite"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// `min(U_a, U_b)` given the combined midranks and which indices form group a.
fn u_statistic(ranks: &[f64], in_a: &[bool]) -> f64 {
    let na = in_a.iter().filter(|x| **x).count() as f64;
    let nb = in_a.len() as f64 - na;
    let rank_sum_a: f64 =
        ranks.iter().zip(in_a).filter_map(|(r, a)| a.then_some(*r)).sum();
    let ua = rank_sum_a - na * (na + 1.0) / 2.0;
    let ub = na * nb - ua;
    ua.min(ub)
}

/// Abramowitz-Stegun rational approximation of the error function
/// (formula 7.1.26, absolute error below 1.5e-7).
fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let y = 1.0
        - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
            + 0.254829592)
            * t
            * (-x * x).exp();
    sign * y
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// Visit every size-`k` index subset of `0..n` in lexicographic order.
fn for_each_combination(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    let mut indices: Vec<usize> = (0..k).collect();
    loop {
        visit(&indices);
        // Advance the rightmost index that can still move.
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if indices[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        indices[i] += 1;
        for j in i + 1..k {
            indices[j] = indices[j - 1] + 1;
        }
    }
}

/// Two-sided Mann-Whitney U test with midrank tie handling.
///
/// For combined sizes up to [`MWU_EXACT_LIMIT`] the p-value is exact: every
/// assignment of the observed values into two groups of the given sizes is
/// enumerated and `p` is the fraction whose statistic is at least as extreme
/// (as small) as observed. Larger samples use the normal approximation with
/// tie-corrected variance and a 0.5 continuity correction.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MwuResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Evaluation("both samples must be non-empty".into()));
    }
    let combined: Vec<f64> = a.iter().chain(b).copied().collect();
    if combined.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation("samples must be finite".into()));
    }
    let n = combined.len();
    let na = a.len();
    let ranks = midranks(&combined);
    let mut in_a = vec![false; n];
    in_a[..na].fill(true);
    let observed = u_statistic(&ranks, &in_a);

    if n <= MWU_EXACT_LIMIT {
        let mut total = 0u64;
        let mut extreme = 0u64;
        let mut assignment = vec![false; n];
        for_each_combination(n, na, |subset| {
            assignment.fill(false);
            for &i in subset {
                assignment[i] = true;
            }
            total += 1;
            if u_statistic(&ranks, &assignment) <= observed + 1e-9 {
                extreme += 1;
            }
        });
        return Ok(MwuResult { u: observed, p: extreme as f64 / total as f64, exact: true });
    }

    let (na, nb) = (na as f64, (n - na) as f64);
    let mean = na * nb / 2.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    let mut sorted = combined;
    sorted.sort_by(|x, y| x.partial_cmp(y).expect("values are finite"));
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let nf = n as f64;
    let variance = na * nb / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    if variance <= 0.0 {
        // Every value tied: no ordering information at all.
        return Ok(MwuResult { u: observed, p: 1.0, exact: false });
    }
    let z = (observed - mean + 0.5) / variance.sqrt();
    let p = (2.0 * normal_cdf(z)).min(1.0);
    Ok(MwuResult { u: observed, p, exact: false })
}
