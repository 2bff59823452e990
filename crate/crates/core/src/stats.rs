//! Descriptive moments and the paired Wilcoxon signed-rank test.

use crate::curvefit::normal_cdf;
use crate::error::{Error, Result};

/// Largest sample (after dropping zero differences) that gets an exact
/// p-value.
pub const EXACT_LIMIT: usize = 25;

/// Smallest usable sample after dropping zero differences.
pub const MIN_PAIRS: usize = 5;

/// Population moments of a sample. Skewness and excess kurtosis are reported
/// as 0 when the sample has no spread.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MomentSummary {
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub excess_kurtosis: f64,
    pub skewness: f64,
}

pub fn moments(values: &[f64]) -> Result<MomentSummary> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "moments need at least 2 values, got {n}"
        )));
    }
    if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(bad));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let sd = m2.sqrt();
    // treat rounding-level spread as none
    let flat = sd <= 1e-14 * mean.abs().max(f64::MIN_POSITIVE);
    let (skewness, excess_kurtosis) = if flat || m2 == 0.0 {
        (0.0, 0.0)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    };
    Ok(MomentSummary {
        mean,
        median: median(values),
        sd,
        excess_kurtosis,
        skewness,
    })
}

/// Median of a non-empty sample; the mean of the two middle values for even
/// sizes.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WilcoxonTest {
    /// Pairs left after dropping zero differences.
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// `min(w_plus, w_minus)`.
    pub w: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WilcoxonOutcome {
    Test(WilcoxonTest),
    /// Every pair is tied, so the statistic is undefined.
    NoNonzeroDifferences,
}

/// Paired two-sided Wilcoxon signed-rank test of `a` against `b`.
///
/// Zero differences are dropped and tied magnitudes get mid-ranks. Samples
/// of up to [`EXACT_LIMIT`] pairs use the exact null distribution (which
/// accounts for ties); larger ones use the normal approximation with tie and
/// continuity corrections.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonOutcome> {
    if a.len() != b.len() {
        return Err(Error::InsufficientData(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let mut diffs = Vec::with_capacity(a.len());
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        if !d.is_finite() {
            return Err(Error::NonFinite(d));
        }
        if d != 0.0 {
            diffs.push(d);
        }
    }
    if diffs.is_empty() {
        return Ok(WilcoxonOutcome::NoNonzeroDifferences);
    }
    let n = diffs.len();
    if n < MIN_PAIRS {
        return Err(Error::InsufficientData(format!(
            "signed-rank test needs at least {MIN_PAIRS} nonzero differences, got {n}"
        )));
    }

    diffs.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    // doubled mid-ranks stay integral
    let mut ranks2 = vec![0u64; n];
    let mut tie_groups = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[j + 1].abs() == diffs[i].abs() {
            j += 1;
        }
        let r2 = (i + 1 + j + 1) as u64;
        for r in &mut ranks2[i..=j] {
            *r = r2;
        }
        tie_groups.push(j - i + 1);
        i = j + 1;
    }
    let w_plus2: u64 = diffs
        .iter()
        .zip(&ranks2)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total2 = (n * (n + 1)) as u64;
    let w_minus2 = total2 - w_plus2;
    let w2 = w_plus2.min(w_minus2);

    let (p_value, exact) = if n <= EXACT_LIMIT {
        (exact_p(&ranks2, w2), true)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let ties: f64 = tie_groups
            .iter()
            .map(|&t| {
                let t = t as f64;
                t * t * t - t
            })
            .sum();
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
        let w = w2 as f64 / 2.0;
        let z = ((w - mean) + 0.5).min(0.0) / var.sqrt();
        ((2.0 * normal_cdf(z)).min(1.0), false)
    };
    Ok(WilcoxonOutcome::Test(WilcoxonTest {
        n,
        w_plus: w_plus2 as f64 / 2.0,
        w_minus: w_minus2 as f64 / 2.0,
        w: w2 as f64 / 2.0,
        p_value,
        exact,
    }))
}

/// `2 P(T+ <= w)` under the null, counting all sign assignments of the given
/// doubled ranks.
fn exact_p(ranks2: &[u64], w2: u64) -> f64 {
    let total: u64 = ranks2.iter().sum();
    let mut counts = vec![0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in ranks2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            let c = counts[s];
            if c != 0.0 {
                counts[s + r] += c;
            }
        }
        reach += r;
    }
    let below: f64 = counts[..=w2 as usize].iter().sum();
    let all = 2f64.powi(ranks2.len() as i32);
    (2.0 * below / all).min(1.0)
}
