//! Uniformity tests on the unit cube: per-dimension binned chi-square tests,
//! empirical-CDF gaps that locate the best cut, a symmetric-discrepancy
//! z-test, and an exact 1-d star discrepancy used as a test oracle.
//!
//! All inputs are points already rescaled to `[0, 1)^d` (see
//! [`crate::geometry::rescale_to_unit`]).

use crate::geometry::PointSet;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum UniformityError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("need at least two bins, got {0}")]
    TooFewBins(usize),
    #[error("significance must lie strictly inside (0, 1), got {0}")]
    BadSignificance(f64),
    #[error("subsample size must be at least 2, got {0}")]
    BadSubsample(usize),
    #[error("points must be rescaled to the unit cube first")]
    NotUnitScaled,
    #[error("values must be sorted in ascending order")]
    NotSorted,
}

/// Location of a candidate cut: the `cut`-th of `bins - 1` equispaced cuts,
/// so the cut coordinate on the unit interval is `cut / bins`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitHint {
    pub dim: usize,
    /// Cut index, `1 <= cut < bins`.
    pub cut: usize,
    pub bins: usize,
}

impl SplitHint {
    /// Cut coordinate on the unit interval.
    pub fn fraction(&self) -> f64 {
        self.cut as f64 / self.bins as f64
    }
}

/// Which test produced a [`TestVerdict`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    ChiSquare,
    Discrepancy,
}

/// Outcome of a single uniformity test. `split_hint` is present exactly when
/// the test rejects; it is the caller's best cut location (neither test
/// derives one itself).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestVerdict {
    pub reject: bool,
    pub statistic: f64,
    pub which: TestKind,
    pub split_hint: Option<SplitHint>,
}

/// Per-dimension bin occupancies and empirical-CDF gaps at the cut grid.
#[derive(Debug, Clone)]
pub struct BinGapSummary {
    /// `counts[j][i]`: points whose dimension-`j` coordinate falls in bin `i`
    /// of `[i/m, (i+1)/m)`.
    pub counts: Vec<Vec<u64>>,
    /// `gaps[j][k-1] = |#(x_j < k/m)/n - k/m|` for cuts `k = 1..m-1`.
    pub gaps: Vec<Vec<f64>>,
    /// Largest gap over all `(dim, cut)` pairs.
    pub max_gap: f64,
    /// Location of the largest gap; ties go to the smallest dimension, then
    /// the smallest cut index.
    pub argmax: SplitHint,
}

fn require_unit(points: &PointSet) -> Result<(), UniformityError> {
    let b = points.bounds();
    let unit = (0..b.dim()).all(|j| b.lower[j] == 0.0 && b.upper[j] == 1.0);
    if unit {
        Ok(())
    } else {
        Err(UniformityError::NotUnitScaled)
    }
}

/// Bins every dimension of `points` into `m` equal cells and measures the
/// empirical-CDF gaps at the interior cuts `k/m`.
pub fn bin_counts_and_gaps(points: &PointSet, m: usize) -> Result<BinGapSummary, UniformityError> {
    if m < 2 {
        return Err(UniformityError::TooFewBins(m));
    }
    if points.is_empty() {
        return Err(UniformityError::TooFewPoints { needed: 1, got: 0 });
    }
    require_unit(points)?;
    let d = points.dim();
    let n = points.len() as f64;
    let cuts: Vec<f64> = (1..m).map(|k| k as f64 / m as f64).collect();
    let mut counts = vec![vec![0u64; m]; d];
    for p in points.iter() {
        for (j, &x) in p.iter().enumerate() {
            // Bin index = number of cuts at or below x, so bin membership and
            // the prefix counts below agree on every boundary.
            let bin = cuts.iter().take_while(|&&c| c <= x).count();
            counts[j][bin] += 1;
        }
    }
    let mut gaps = vec![vec![0.0; m - 1]; d];
    let mut max_gap = f64::NEG_INFINITY;
    let mut argmax = SplitHint { dim: 0, cut: 1, bins: m };
    for j in 0..d {
        let mut prefix = 0u64;
        for k in 1..m {
            prefix += counts[j][k - 1];
            let gap = (prefix as f64 / n - cuts[k - 1]).abs();
            gaps[j][k - 1] = gap;
            if gap > max_gap {
                max_gap = gap;
                argmax = SplitHint { dim: j, cut: k, bins: m };
            }
        }
    }
    Ok(BinGapSummary { counts, gaps, max_gap, argmax })
}

/// Pearson chi-square test of equal bin occupancy. Rejects when the
/// statistic exceeds the upper `significance` quantile of chi-square with
/// `counts.len() - 1` degrees of freedom.
pub fn chi_square_uniform(
    counts: &[u64],
    significance: f64,
    hint: SplitHint,
) -> Result<TestVerdict, UniformityError> {
    let m = counts.len();
    if m < 2 {
        return Err(UniformityError::TooFewBins(m));
    }
    if !(significance > 0.0 && significance < 1.0) {
        return Err(UniformityError::BadSignificance(significance));
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(UniformityError::TooFewPoints { needed: 1, got: 0 });
    }
    let expected = n as f64 / m as f64;
    let statistic: f64 = counts.iter().map(|&b| (b as f64 - expected).powi(2) / expected).sum();
    let dist = ChiSquared::new((m - 1) as f64).expect("positive degrees of freedom");
    let reject = statistic > dist.inverse_cdf(1.0 - significance);
    Ok(TestVerdict { reject, statistic, which: TestKind::ChiSquare, split_hint: reject.then_some(hint) })
}

/// Averages behind the symmetric-discrepancy statistic: the per-point
/// product mean and the scaled pair-product mean. Both have expectation
/// `(4/3)^d` under uniformity.
fn symmetric_moments(points: &PointSet) -> (f64, f64) {
    let n = points.len();
    let d = points.dim();
    let mut single = 0.0;
    for p in points.iter() {
        single += p.iter().map(|&x| 1.0 + 2.0 * x - 2.0 * x * x).product::<f64>();
    }
    single /= n as f64;
    let mut pairs = 0.0;
    for i in 0..n {
        let pi = points.point(i);
        for j in (i + 1)..n {
            let pj = points.point(j);
            let mut prod = 1.0;
            for k in 0..d {
                prod *= 1.0 - (pi[k] - pj[k]).abs();
            }
            pairs += prod;
        }
    }
    let scale = 2f64.powi(d as i32 + 1) / (n as f64 * (n - 1) as f64);
    (single, scale * pairs)
}

/// Symmetric-discrepancy z-statistic for uniformity on `[0, 1)^d`:
///
/// ```text
/// A = (1/n) sum_i prod_j (1 + 2 x_ij - 2 x_ij^2)
/// B = 2^(d+1) / (n (n-1)) * sum_{i<j} prod_k (1 - |x_ik - x_jk|)
/// C = (4/3)^d
/// eta = (9/5)^d - (16/9)^d
/// z = sqrt(n) * ((A - C) + 2 (B - C)) / (5 sqrt(eta))
/// ```
///
/// `eta` is the variance of the per-point product and `(A - C) + 2 (B - C)`
/// projects onto five times the centered per-point mean, so `z` is
/// asymptotically standard normal under uniformity. Runs in `O(n^2 d)`.
pub fn symmetric_discrepancy_statistic(points: &PointSet) -> Result<f64, UniformityError> {
    let n = points.len();
    if n < 2 {
        return Err(UniformityError::TooFewPoints { needed: 2, got: n });
    }
    require_unit(points)?;
    let d = points.dim() as i32;
    let (a, b) = symmetric_moments(points);
    let c = (4f64 / 3.0).powi(d);
    let eta = (9f64 / 5.0).powi(d) - (16f64 / 9.0).powi(d);
    Ok((n as f64).sqrt() * ((a - c) + 2.0 * (b - c)) / (5.0 * eta.sqrt()))
}

/// Two-sided discrepancy test. When the input exceeds `subsample`, the
/// statistic is computed on that many points drawn without replacement from
/// a ChaCha8 stream seeded with `seed`, so the verdict depends only on
/// `(points, seed)`. `hint` is attached to rejecting verdicts.
pub fn discrepancy_uniformity_test(
    points: &PointSet,
    z_significance: f64,
    subsample: Option<usize>,
    seed: u64,
    hint: SplitHint,
) -> Result<TestVerdict, UniformityError> {
    if !(z_significance > 0.0 && z_significance < 1.0) {
        return Err(UniformityError::BadSignificance(z_significance));
    }
    if let Some(s) = subsample {
        if s < 2 {
            return Err(UniformityError::BadSubsample(s));
        }
    }
    let statistic = match subsample {
        Some(s) if points.len() > s => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let chosen = rand::seq::index::sample(&mut rng, points.len(), s);
            let mut data = Vec::with_capacity(s * points.dim());
            for i in chosen.iter() {
                data.extend_from_slice(points.point(i));
            }
            let sub = PointSet::from_flat(data, points.dim(), crate::geometry::unit_region(points.dim()))
                .expect("subsample of unit-cube points stays inside the unit cube");
            symmetric_discrepancy_statistic(&sub)?
        }
        _ => symmetric_discrepancy_statistic(points)?,
    };
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let reject = statistic.abs() > normal.inverse_cdf(1.0 - z_significance / 2.0);
    Ok(TestVerdict { reject, statistic, which: TestKind::Discrepancy, split_hint: reject.then_some(hint) })
}

/// Exact star discrepancy of a sorted 1-d sample against the uniform law on
/// `[0, 1)`:
///
/// ```text
/// D* = max_i max(i/n - x_(i), x_(i) - (i-1)/n)
/// ```
pub fn star_discrepancy_1d(sorted: &[f64]) -> Result<f64, UniformityError> {
    let n = sorted.len();
    if n == 0 {
        return Err(UniformityError::TooFewPoints { needed: 1, got: 0 });
    }
    for w in sorted.windows(2) {
        if w[0] > w[1] {
            return Err(UniformityError::NotSorted);
        }
    }
    if sorted.iter().any(|&x| !(0.0..1.0).contains(&x)) {
        return Err(UniformityError::NotUnitScaled);
    }
    let nf = n as f64;
    let mut best = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let above = (i + 1) as f64 / nf - x;
        let below = x - i as f64 / nf;
        best = best.max(above).max(below);
    }
    Ok(best)
}
