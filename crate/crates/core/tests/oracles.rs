//! Brute-force cross-checks: every optimized structure is recomputed here
//! from first principles on seeded inputs and compared exactly.

use denspart::estimator::{
    estimate_density, estimate_density_with_order, EstimatorConfig, PiecewiseDensity, SweepOrder,
};
use denspart::geometry::{unit_region, PointSet, Region};
use denspart::regiongraph::{build_region_graph, RegionGraph};
use denspart::sltree::{build_sublevel_tree, SubLevelTree};
use denspart::uniformity::star_discrepancy_1d;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::collections::BTreeSet;

/// Two lumps plus a uniform background, clipped to the unit square.
fn clustered_points(seed: u64, n: usize) -> PointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lump_a = Normal::new(0.25, 0.06).unwrap();
    let lump_b = Normal::new(0.72, 0.08).unwrap();
    let mut rows = Vec::with_capacity(n);
    while rows.len() < n {
        let row: Vec<f64> = match rows.len() % 4 {
            0 | 1 => (0..2).map(|_| lump_a.sample(&mut rng)).collect(),
            2 => (0..2).map(|_| lump_b.sample(&mut rng)).collect(),
            _ => (0..2).map(|_| rng.gen::<f64>()).collect(),
        };
        if row.iter().all(|x| (0.0..1.0).contains(x)) {
            rows.push(row);
        }
    }
    PointSet::from_rows(&rows, unit_region(2)).unwrap()
}

fn oracle_estimate(seed: u64) -> PiecewiseDensity {
    let config = EstimatorConfig {
        chi_significance: 0.01,
        z_significance: 0.01,
        max_depth: 7,
        ..EstimatorConfig::default()
    };
    estimate_density(&clustered_points(seed, 600), &config).unwrap()
}

/// The adjacency definition, written out directly: boxes touch when their
/// closed hulls intersect in every dimension (corner contact included).
fn touches(a: &Region, b: &Region) -> bool {
    a.lower
        .iter()
        .zip(&a.upper)
        .zip(b.lower.iter().zip(&b.upper))
        .all(|((al, au), (bl, bu))| al.max(*bl) <= au.min(*bu))
}

#[test]
fn region_graph_matches_all_pairs_adjacency() {
    for seed in 0..4u64 {
        let pd = oracle_estimate(seed);
        let leaves = pd.leaves();
        assert!(leaves.len() <= 200, "seed {seed}: {} leaves", leaves.len());
        let graph = build_region_graph(&pd).unwrap();

        let real: Vec<&Region> = leaves.clone();
        let mut expected = BTreeSet::new();
        for (i, a) in real.iter().enumerate() {
            for b in &real[i + 1..] {
                if touches(a, b) {
                    expected.insert((a.id.min(b.id), a.id.max(b.id)));
                }
            }
        }
        let got: BTreeSet<(usize, usize)> = graph
            .edges()
            .into_iter()
            .filter(|&(u, v)| Some(u) != graph.virtual_id() && Some(v) != graph.virtual_id())
            .map(|(u, v)| (u.min(v), u.max(v)))
            .collect();
        assert_eq!(got, expected, "seed {seed}");
    }
}

/// Connected components of the active subgraph, found by plain BFS.
fn bfs_components(graph: &RegionGraph, active: &BTreeSet<usize>) -> BTreeSet<Vec<usize>> {
    let mut seen = BTreeSet::new();
    let mut components = BTreeSet::new();
    for &start in active {
        if seen.contains(&start) {
            continue;
        }
        let mut queue = vec![start];
        let mut comp = Vec::new();
        seen.insert(start);
        while let Some(v) = queue.pop() {
            comp.push(v);
            for &w in graph.neighbors(v).unwrap() {
                if active.contains(&w) && seen.insert(w) {
                    queue.push(w);
                }
            }
        }
        comp.sort_unstable();
        components.insert(comp);
    }
    components
}

/// Components implied by the tree: active nodes linked to their parents
/// whenever the parent is active too.
fn tree_components(t: &SubLevelTree, active: &BTreeSet<usize>) -> BTreeSet<Vec<usize>> {
    let ids: Vec<usize> = active.iter().copied().collect();
    let index = |id: usize| ids.binary_search(&id).unwrap();
    let mut parent: Vec<usize> = (0..ids.len()).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &id in &ids {
        if let Some(p) = t.parent(id).unwrap() {
            if active.contains(&p) {
                let (a, b) = (find(&mut parent, index(id)), find(&mut parent, index(p)));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut by_root: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, &id) in ids.iter().enumerate() {
        by_root.entry(find(&mut parent, i)).or_default().push(id);
    }
    by_root.into_values().collect()
}

#[test]
fn sublevel_components_match_bfs_at_every_threshold() {
    for seed in 0..4u64 {
        let pd = oracle_estimate(seed);
        let graph = build_region_graph(&pd).unwrap();
        let t = build_sublevel_tree(&graph);
        let mut thresholds: Vec<f64> = graph.ids().map(|id| graph.density(id).unwrap()).collect();
        thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
        thresholds.dedup();
        for &eta in &thresholds {
            let active: BTreeSet<usize> =
                graph.ids().filter(|&id| graph.density(id).unwrap() >= eta).collect();
            let expected = bfs_components(&graph, &active);
            let got = tree_components(&t, &active);
            assert_eq!(got, expected, "seed {seed}, threshold {eta}");
        }
    }
}

#[test]
fn parent_density_never_exceeds_child_density() {
    for seed in 0..4u64 {
        let pd = oracle_estimate(seed);
        let graph = build_region_graph(&pd).unwrap();
        let t = build_sublevel_tree(&graph);
        for id in t.ids() {
            if let Some(p) = t.parent(id).unwrap() {
                let child = graph.density(id).unwrap();
                let parent = graph.density(p).unwrap();
                assert!(
                    parent <= child + 1e-12,
                    "seed {seed}: parent {p} ({parent}) denser than child {id} ({child})"
                );
            }
        }
    }
}

#[test]
fn merge_arities_account_for_every_mode() {
    for seed in 0..4u64 {
        let pd = oracle_estimate(seed);
        let graph = build_region_graph(&pd).unwrap();
        let t = build_sublevel_tree(&graph);
        let modes = t.ids().filter(|&id| t.children(id).is_empty()).count();
        let fused: usize = t.merge_events().iter().map(|e| e.absorbed.len() - 1).sum();
        assert_eq!(
            fused,
            modes - 1,
            "seed {seed}: each merge retires arity-1 components until one survives"
        );
    }
}

#[test]
fn sweep_order_does_not_change_a_single_bit() {
    let config = EstimatorConfig {
        chi_significance: 0.01,
        z_significance: 0.01,
        max_depth: 7,
        ..EstimatorConfig::default()
    };
    for seed in 0..4u64 {
        let points = clustered_points(seed, 600);
        let asc = estimate_density_with_order(&points, &config, SweepOrder::Ascending).unwrap();
        let desc = estimate_density_with_order(&points, &config, SweepOrder::Descending).unwrap();
        assert_eq!(asc.tree().len(), desc.tree().len(), "seed {seed}");
        for (a, d) in asc.tree().nodes().zip(desc.tree().nodes()) {
            assert_eq!(a.region.id, d.region.id);
            assert_eq!(a.region.lower, d.region.lower);
            assert_eq!(a.region.upper, d.region.upper);
            assert_eq!(a.region.mass.to_bits(), d.region.mass.to_bits(), "seed {seed}");
            assert_eq!(a.split.map(|s| (s.dim, s.at.to_bits())), d.split.map(|s| (s.dim, s.at.to_bits())));
        }
    }
}

/// Supremum of |F_n(x) - x| computed piece by piece: on each interval where
/// the empirical CDF is constant the extremes sit at the endpoints.
fn brute_force_star_discrepancy(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mut boundaries = vec![0.0];
    boundaries.extend_from_slice(sorted);
    boundaries.push(1.0);
    let mut best = 0.0f64;
    for w in 0..boundaries.len() - 1 {
        let (a, b) = (boundaries[w], boundaries[w + 1]);
        let cdf = sorted.iter().filter(|&&x| x <= a).count() as f64 / n;
        best = best.max((cdf - a).abs()).max((cdf - b).abs());
    }
    best
}

#[test]
fn star_discrepancy_matches_brute_force_supremum() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for n in 1..=50usize {
        let mut xs: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let fast = star_discrepancy_1d(&xs).unwrap();
        let slow = brute_force_star_discrepancy(&xs);
        assert!((fast - slow).abs() <= 1e-9, "n = {n}: {fast} vs {slow}");
    }
    let ties = vec![0.5, 0.5, 0.5];
    assert!(
        (star_discrepancy_1d(&ties).unwrap() - brute_force_star_discrepancy(&ties)).abs() <= 1e-9
    );
}
