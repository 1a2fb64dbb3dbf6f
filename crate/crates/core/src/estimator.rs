//! The adaptive histogram: a level-synchronous loop that keeps bisecting
//! every leaf whose points fail a uniformity test, then smooths leaf masses
//! with a Dirichlet-style pseudo-count.
//!
//! Each sweep tests the current leaves independently: a leaf's points are
//! rescaled to the unit cube, each dimension's bin occupancy runs through a
//! chi-square test, and if none rejects, the symmetric-discrepancy z-test
//! gets the final word. A rejected leaf splits at the largest empirical-CDF
//! gap. Decisions depend only on the leaf's own points and its id-keyed
//! subsample seed, so the resulting partition does not depend on the order
//! leaves are visited within a sweep.

use crate::geometry::{rescale_coord, unit_region, GeometryError, PartitionTree, PointSet, Region};
use crate::uniformity::{
    bin_counts_and_gaps, chi_square_uniform, discrepancy_uniformity_test, UniformityError,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Uniformity(#[from] UniformityError),
    #[error("cannot estimate a density from zero points")]
    NoPoints,
    #[error("alpha must be positive and finite, got {0}")]
    BadAlpha(f64),
    #[error("max_depth must be at least 1")]
    BadMaxDepth,
    #[error("cannot trim {levels} levels from a tree whose deepest leaf sits at depth {max_leaf_depth}")]
    BadTrim { levels: usize, max_leaf_depth: usize },
    #[error("leaf masses sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("leaf {id} has mass {mass} inconsistent with density times volume")]
    InconsistentLeaf { id: usize, mass: f64 },
}

/// Knobs of [`estimate_density`].
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// Bins per dimension for the chi-square tests and the cut grid.
    pub bins: usize,
    /// Pseudo-count added to each child when masses are split.
    pub alpha: f64,
    /// Significance of each per-dimension chi-square test.
    pub chi_significance: f64,
    /// Significance of the two-sided discrepancy test.
    pub z_significance: f64,
    /// Cap on the number of points fed to the discrepancy test; `None`
    /// disables subsampling.
    pub subsample: Option<usize>,
    /// Maximum leaf depth (the root sits at depth 0).
    pub max_depth: usize,
    /// Seed for the per-region subsample draws.
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            bins: 3,
            alpha: 0.5,
            chi_significance: 0.001,
            z_significance: 0.001,
            subsample: Some(500),
            max_depth: 30,
            seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<(), EstimatorError> {
        if self.bins < 2 {
            return Err(UniformityError::TooFewBins(self.bins).into());
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(EstimatorError::BadAlpha(self.alpha));
        }
        if !(self.chi_significance > 0.0 && self.chi_significance < 1.0) {
            return Err(UniformityError::BadSignificance(self.chi_significance).into());
        }
        if !(self.z_significance > 0.0 && self.z_significance < 1.0) {
            return Err(UniformityError::BadSignificance(self.z_significance).into());
        }
        if let Some(s) = self.subsample {
            if s < 2 {
                return Err(UniformityError::BadSubsample(s).into());
            }
        }
        if self.max_depth == 0 {
            return Err(EstimatorError::BadMaxDepth);
        }
        Ok(())
    }
}

/// Order in which a sweep visits the current leaves. The estimate is the
/// same either way; the knob exists so tests can prove it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepOrder {
    Ascending,
    Descending,
}

/// A normalized piecewise-constant density: a partition tree whose leaves
/// carry masses summing to one, with `density = mass / volume` on each leaf.
#[derive(Debug, Clone)]
pub struct PiecewiseDensity {
    tree: PartitionTree,
    config: EstimatorConfig,
}

impl PiecewiseDensity {
    /// Validates and wraps a finished tree: leaf masses must be nonnegative,
    /// sum to 1 within 1e-9, and match `density * volume` on every leaf.
    pub fn from_tree(tree: PartitionTree, config: EstimatorConfig) -> Result<Self, EstimatorError> {
        let mut total = 0.0;
        for &id in &tree.leaf_ids() {
            let r = tree.region(id);
            if r.mass < 0.0 || !r.mass.is_finite() {
                return Err(EstimatorError::InconsistentLeaf { id, mass: r.mass });
            }
            let implied = r.density * r.volume();
            let tol = 1e-9 * r.mass.max(1e-12);
            if (implied - r.mass).abs() > tol {
                return Err(EstimatorError::InconsistentLeaf { id, mass: r.mass });
            }
            total += r.mass;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(EstimatorError::NotNormalized(total));
        }
        Ok(PiecewiseDensity { tree, config })
    }

    pub fn tree(&self) -> &PartitionTree {
        &self.tree
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    /// Leaf regions in ascending id order.
    pub fn leaves(&self) -> Vec<&Region> {
        self.tree.leaf_ids().into_iter().map(|id| self.tree.region(id)).collect()
    }

    /// Density at `x`: the density of the unique leaf containing it, or 0
    /// outside the domain box. Runs in tree-depth time.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64, EstimatorError> {
        Ok(match self.tree.leaf_containing(x)? {
            Some(id) => self.tree.region(id).density,
            None => 0.0,
        })
    }

    /// Collapses the deepest `levels` levels: every node deeper than
    /// `max_leaf_depth - levels` is merged into its ancestor at that depth,
    /// which keeps its (subtree) mass and gets its density recomputed.
    pub fn trim(&self, levels: usize) -> Result<PiecewiseDensity, EstimatorError> {
        if levels == 0 {
            return Ok(self.clone());
        }
        let max_leaf_depth = self.tree.max_leaf_depth();
        if levels >= max_leaf_depth {
            return Err(EstimatorError::BadTrim { levels, max_leaf_depth });
        }
        let cutoff = max_leaf_depth - levels;
        let root = self.tree.region(self.tree.root());
        let mut out = PartitionTree::new(root.lower.clone(), root.upper.clone())?;
        let mut map = vec![usize::MAX; self.tree.len()];
        map[self.tree.root()] = out.root();
        // Ascending ids visit parents before children, so replaying splits
        // in id order rebuilds the surviving top of the tree.
        for node in self.tree.nodes() {
            if node.region.depth >= cutoff {
                continue;
            }
            if let (Some((l, r)), Some(split)) = (node.children, node.split) {
                let (nl, nr) = out.split_leaf(map[node.region.id], split.dim, split.at)?;
                map[l] = nl;
                map[r] = nr;
            }
        }
        // Subtree masses are summed from the leaves: only leaf masses are
        // contractual, internal nodes may carry stale values.
        let mut subtree = vec![0.0f64; self.tree.len()];
        for id in (0..self.tree.len()).rev() {
            let node = self.tree.node(id);
            if node.is_leaf() {
                subtree[id] = node.region.mass;
            }
            if let Some(parent) = node.parent {
                subtree[parent] += subtree[id];
            }
        }
        for node in self.tree.nodes() {
            let new_id = map[node.region.id];
            if new_id != usize::MAX {
                out.set_mass(new_id, subtree[node.region.id]);
            }
        }
        PiecewiseDensity::from_tree(out, self.config.clone())
    }
}

/// Estimates a piecewise-constant density of `points` over their enclosing
/// region. See the module docs for the loop; masses follow
/// `mass(left) = mass(parent) * (n_left + alpha) / (n_parent + 2 alpha)`
/// with the remainder going right, so mass is conserved exactly.
pub fn estimate_density(points: &PointSet, config: &EstimatorConfig) -> Result<PiecewiseDensity, EstimatorError> {
    estimate_density_with_order(points, config, SweepOrder::Ascending)
}

/// [`estimate_density`] with an explicit within-sweep visiting order.
pub fn estimate_density_with_order(
    points: &PointSet,
    config: &EstimatorConfig,
    order: SweepOrder,
) -> Result<PiecewiseDensity, EstimatorError> {
    config.validate()?;
    if points.is_empty() {
        return Err(EstimatorError::NoPoints);
    }
    let bounds = points.bounds();
    let mut tree = PartitionTree::new(bounds.lower.clone(), bounds.upper.clone())?;
    let mut frontier: Vec<(usize, Vec<u32>)> = vec![(tree.root(), (0..points.len() as u32).collect())];
    while !frontier.is_empty() {
        let mut plans: Vec<Option<(usize, f64)>> = vec![None; frontier.len()];
        let positions: Vec<usize> = match order {
            SweepOrder::Ascending => (0..frontier.len()).collect(),
            SweepOrder::Descending => (0..frontier.len()).rev().collect(),
        };
        for pos in positions {
            let (id, ref idx) = frontier[pos];
            plans[pos] = decide_split(&tree, id, idx, points, config)?;
        }
        // Splits are applied in ascending region-id order no matter how the
        // sweep visited them, so child ids are canonical.
        let mut order_of: Vec<usize> = (0..frontier.len()).collect();
        order_of.sort_by_key(|&pos| frontier[pos].0);
        let mut next = Vec::new();
        for pos in order_of {
            let Some((dim, at)) = plans[pos] else { continue };
            let (id, idx) = std::mem::take(&mut frontier[pos]);
            let (left, right) = tree.split_leaf(id, dim, at)?;
            let (left_idx, right_idx): (Vec<u32>, Vec<u32>) =
                idx.iter().partition(|&&i| points.point(i as usize)[dim] < at);
            let parent_mass = tree.region(id).mass;
            let left_mass = parent_mass * (left_idx.len() as f64 + config.alpha)
                / (idx.len() as f64 + 2.0 * config.alpha);
            tree.set_leaf_mass(left, left_mass)?;
            tree.set_leaf_mass(right, parent_mass - left_mass)?;
            next.push((left, left_idx));
            next.push((right, right_idx));
        }
        frontier = next;
    }
    PiecewiseDensity::from_tree(tree, config.clone())
}

/// Runs the per-leaf test battery; returns the absolute cut of the winning
/// gap when any test rejects. Leaves with fewer than two points or at the
/// depth cap never split.
fn decide_split(
    tree: &PartitionTree,
    id: usize,
    idx: &[u32],
    points: &PointSet,
    config: &EstimatorConfig,
) -> Result<Option<(usize, f64)>, EstimatorError> {
    let r = tree.region(id);
    if idx.len() < 2 || r.depth >= config.max_depth {
        return Ok(None);
    }
    let d = points.dim();
    let mut data = Vec::with_capacity(idx.len() * d);
    for &i in idx {
        let p = points.point(i as usize);
        for j in 0..d {
            data.push(rescale_coord(p[j], r.lower[j], r.upper[j]));
        }
    }
    let scaled = PointSet::from_flat(data, d, unit_region(d))?;
    let summary = bin_counts_and_gaps(&scaled, config.bins)?;
    let hint = summary.argmax;
    let mut reject = false;
    for counts in &summary.counts {
        if chi_square_uniform(counts, config.chi_significance, hint)?.reject {
            reject = true;
            break;
        }
    }
    if !reject {
        let seed = region_seed(config.seed, id);
        reject = discrepancy_uniformity_test(&scaled, config.z_significance, config.subsample, seed, hint)?
            .reject;
    }
    if !reject {
        return Ok(None);
    }
    let (a, b) = (r.lower[hint.dim], r.upper[hint.dim]);
    let at = a + (b - a) * hint.fraction();
    // Guard against widths so small the cut rounds onto a boundary.
    if !(a < at && at < b) {
        return Ok(None);
    }
    Ok(Some((hint.dim, at)))
}

/// Subsample seed for a region: a splitmix64 hash of the run seed and the
/// region id, so draws are stable across sweeps and visiting orders.
pub fn region_seed(seed: u64, region_id: usize) -> u64 {
    splitmix64(seed ^ splitmix64(region_id as u64 ^ 0x9E37_79B9_7F4A_7C15))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Region;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn half_full_points() -> PointSet {
        let rows: Vec<Vec<f64>> = (0..1000).map(|i| vec![0.5 * (i as f64 + 0.5) / 1000.0]).collect();
        let bounds = Region::new(0, vec![0.0], vec![1.0], 0).unwrap();
        PointSet::from_rows(&rows, bounds).unwrap()
    }

    #[test]
    fn config_validation_catches_bad_fields() {
        let ok = EstimatorConfig::default();
        assert!(ok.validate().is_ok());
        assert!(EstimatorConfig { alpha: 0.0, ..ok.clone() }.validate().is_err());
        assert!(EstimatorConfig { bins: 1, ..ok.clone() }.validate().is_err());
        assert!(EstimatorConfig { chi_significance: 0.0, ..ok.clone() }.validate().is_err());
        assert!(EstimatorConfig { z_significance: 1.0, ..ok.clone() }.validate().is_err());
        assert!(EstimatorConfig { subsample: Some(1), ..ok.clone() }.validate().is_err());
        assert!(EstimatorConfig { max_depth: 0, ..ok }.validate().is_err());
    }

    #[test]
    fn smoothed_masses_match_hand_computation() {
        // 1,000 points packed into [0, 0.5) force one split exactly at 0.5
        // when the cut grid is binary and depth is capped at one level.
        let cfg = EstimatorConfig { bins: 2, max_depth: 1, ..EstimatorConfig::default() };
        let pd = estimate_density(&half_full_points(), &cfg).unwrap();
        let leaves = pd.leaves();
        assert_eq!(leaves.len(), 2);
        assert_relative_eq!(leaves[0].upper[0], 0.5, epsilon = 0.0);
        assert_relative_eq!(leaves[0].mass, 1000.5 / 1001.0, epsilon = 1e-12);
        assert_relative_eq!(leaves[1].mass, 1.0 - 1000.5 / 1001.0, epsilon = 1e-12);
        assert_relative_eq!(pd.evaluate(&[0.25]).unwrap(), (1000.5 / 1001.0) / 0.5, epsilon = 1e-12);
        assert_relative_eq!(pd.evaluate(&[0.75]).unwrap(), (0.5 / 1001.0) / 0.5, epsilon = 1e-12);
        assert_relative_eq!(pd.evaluate(&[2.0]).unwrap(), 0.0, epsilon = 0.0);
    }

    #[test]
    fn single_point_yields_a_single_leaf_of_mass_one() {
        let pts = PointSet::with_padded_bounds(&[vec![3.7, -1.2]], 0.01).unwrap();
        let pd = estimate_density(&pts, &EstimatorConfig::default()).unwrap();
        assert_eq!(pd.leaves().len(), 1);
        assert_relative_eq!(pd.leaves()[0].mass, 1.0, epsilon = 0.0);
    }

    #[test]
    fn uniform_sample_stays_a_single_leaf() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..2000).map(|_| (0..3).map(|_| rng.gen::<f64>()).collect()).collect();
        let pts = PointSet::from_rows(&rows, unit_region(3)).unwrap();
        let pd = estimate_density(&pts, &EstimatorConfig::default()).unwrap();
        assert_eq!(pd.leaves().len(), 1);
    }

    fn gaussian_pair_sample(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let center = if i % 2 == 0 { -3.0 } else { 3.0 };
                vec![center + 0.5 * rng.sample::<f64, _>(StandardNormal)]
            })
            .collect()
    }

    #[test]
    fn masses_stay_normalized_and_consistent() {
        let pts = PointSet::with_padded_bounds(&gaussian_pair_sample(4000, 5), 0.01).unwrap();
        let pd = estimate_density(&pts, &EstimatorConfig::default()).unwrap();
        assert!(pd.leaves().len() > 2);
        let total_mass: f64 = pd.leaves().iter().map(|r| r.mass).sum();
        let total_density_volume: f64 = pd.leaves().iter().map(|r| r.density * r.volume()).sum();
        assert_relative_eq!(total_mass, 1.0, epsilon = 1e-9);
        assert_relative_eq!(total_density_volume, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn estimate_integrates_to_half_per_component()  {
        let rows = gaussian_pair_sample(4000, 9);
        let pts = PointSet::with_padded_bounds(&rows, 0.01).unwrap();
        let pd = estimate_density(&pts, &EstimatorConfig::default()).unwrap();
        let below_zero: f64 = pd
            .leaves()
            .iter()
            .map(|r| {
                let overlap = (r.upper[0].min(0.0) - r.lower[0]).max(0.0).min(r.upper[0] - r.lower[0]);
                r.density * overlap
            })
            .sum();
        assert!((below_zero - 0.5).abs() <= 0.05, "mass below zero was {below_zero}");
    }

    #[test]
    fn estimate_is_deterministic_and_sweep_order_free() {
        let rows = gaussian_pair_sample(3000, 21);
        let pts = PointSet::with_padded_bounds(&rows, 0.01).unwrap();
        let cfg = EstimatorConfig { subsample: Some(200), ..EstimatorConfig::default() };
        let a = estimate_density(&pts, &cfg).unwrap();
        let b = estimate_density(&pts, &cfg).unwrap();
        let c = estimate_density_with_order(&pts, &cfg, SweepOrder::Descending).unwrap();
        for other in [&b, &c] {
            assert_eq!(a.leaves().len(), other.leaves().len());
            for (x, y) in a.leaves().iter().zip(other.leaves()) {
                assert_eq!(x.id, y.id);
                assert_eq!(x.lower, y.lower);
                assert_eq!(x.upper, y.upper);
                assert_eq!(x.mass.to_bits(), y.mass.to_bits());
            }
        }
    }

    #[test]
    fn empty_input_is_an_error() {
        let pts = PointSet::from_rows(&[], unit_region(2)).unwrap();
        assert!(matches!(
            estimate_density(&pts, &EstimatorConfig::default()),
            Err(EstimatorError::NoPoints)
        ));
    }

    /// Balanced depth-3 tree over [0, 1) with eight equal-mass leaves.
    fn balanced_tree() -> PartitionTree {
        let mut t = PartitionTree::new(vec![0.0], vec![1.0]).unwrap();
        let mut level = vec![0usize];
        for _ in 0..3 {
            let mut next = Vec::new();
            for id in level {
                let r = t.region(id);
                let at = 0.5 * (r.lower[0] + r.upper[0]);
                let (l, rr) = t.split_leaf(id, 0, at).unwrap();
                next.push(l);
                next.push(rr);
            }
            level = next;
        }
        for id in t.leaf_ids() {
            t.set_leaf_mass(id, 0.125).unwrap();
        }
        t
    }

    #[test]
    fn trim_merges_the_deepest_levels() {
        let pd = PiecewiseDensity::from_tree(balanced_tree(), EstimatorConfig::default()).unwrap();
        let trimmed = pd.trim(2).unwrap();
        let leaves = trimmed.leaves();
        assert_eq!(leaves.len(), 2);
        for leaf in &leaves {
            assert_relative_eq!(leaf.mass, 0.5, epsilon = 1e-12);
            assert_relative_eq!(leaf.density, 1.0, epsilon = 1e-12);
            assert_eq!(leaf.depth, 1);
        }
    }

    #[test]
    fn trim_zero_is_identity_and_too_deep_errors() {
        let pd = PiecewiseDensity::from_tree(balanced_tree(), EstimatorConfig::default()).unwrap();
        let same = pd.trim(0).unwrap();
        assert_eq!(same.leaves().len(), pd.leaves().len());
        assert!(matches!(pd.trim(3), Err(EstimatorError::BadTrim { levels: 3, max_leaf_depth: 3 })));
        assert!(matches!(pd.trim(9), Err(EstimatorError::BadTrim { .. })));
    }

    #[test]
    fn from_tree_rejects_unnormalized_masses() {
        let mut t = PartitionTree::new(vec![0.0], vec![1.0]).unwrap();
        let (l, r) = t.split_leaf(0, 0, 0.5).unwrap();
        t.set_leaf_mass(l, 0.7).unwrap();
        t.set_leaf_mass(r, 0.7).unwrap();
        assert!(matches!(
            PiecewiseDensity::from_tree(t, EstimatorConfig::default()),
            Err(EstimatorError::NotNormalized(_))
        ));
    }

    #[test]
    fn evaluate_checks_dimensions() {
        let pd = PiecewiseDensity::from_tree(balanced_tree(), EstimatorConfig::default()).unwrap();
        assert!(pd.evaluate(&[0.1, 0.2]).is_err());
    }
}
