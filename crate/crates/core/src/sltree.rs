//! Sub-level tree of a region graph.
//!
//! Regions enter in order of decreasing density (ties toward the smaller
//! id). Each arrival either starts a new component or attaches to the
//! components its neighbors belong to; the arriving region becomes the
//! parent of the last-added region of every component it touches, so the
//! final structure is a tree rooted at the last (least dense) arrival.
//! Mode discovery reads the tree backwards: components alive just before a
//! merge are density modes, and a mode's persistence is the density drop
//! from its birth to the merge that absorbs it (the elder rule keeps the
//! higher-born mode alive through a merge).

use crate::regiongraph::{RegionGraph, RegionGraphError};
use crate::unionfind::UnionFind;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SltError {
    #[error(transparent)]
    Graph(#[from] RegionGraphError),
    #[error("node {0} is not in the tree")]
    UnknownNode(usize),
    #[error("branch count must be at least 1")]
    ZeroBranches,
    #[error("no insertion step leaves exactly {0} components")]
    ComponentCountNeverReached(usize),
    #[error("minimum persistence must be finite and nonnegative, got {0}")]
    BadMinPersistence(f64),
}

/// A step at which two or more components fused.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeEvent {
    /// 1-based insertion step.
    pub step: usize,
    /// The region whose arrival caused the fusion.
    pub region: usize,
    /// Last-added region of each absorbed component, ascending.
    pub absorbed: Vec<usize>,
}

#[derive(Debug, Clone)]
struct SltNode {
    parent: Option<usize>,
    /// Mean density (total mass over total volume) of the component the
    /// region completed at its insertion; a fresh component's first region
    /// keeps its own density.
    color: f64,
}

#[derive(Debug, Clone)]
pub struct SubLevelTree {
    nodes: BTreeMap<usize, SltNode>,
    insertion: Vec<usize>,
    merges: Vec<MergeEvent>,
}

impl SubLevelTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node ids in ascending order.
    pub fn ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.keys().copied()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.nodes.contains_key(&id)
    }

    /// `None` for the root.
    pub fn parent(&self, id: usize) -> Result<Option<usize>, SltError> {
        self.nodes.get(&id).map(|n| n.parent).ok_or(SltError::UnknownNode(id))
    }

    pub fn color(&self, id: usize) -> Result<f64, SltError> {
        self.nodes.get(&id).map(|n| n.color).ok_or(SltError::UnknownNode(id))
    }

    /// Children of `id`, ascending.
    pub fn children(&self, id: usize) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|(_, n)| n.parent == Some(id))
            .map(|(&c, _)| c)
            .collect()
    }

    /// The last inserted (least dense) region.
    pub fn root(&self) -> usize {
        *self.insertion.last().expect("tree is never empty")
    }

    /// Region ids in the order they entered the tree.
    pub fn insertion_order(&self) -> &[usize] {
        &self.insertion
    }

    pub fn merge_events(&self) -> &[MergeEvent] {
        &self.merges
    }
}

/// Orders graph positions by decreasing density, ties toward the smaller id.
fn insertion_positions(ids: &[usize], density: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| {
        density[b]
            .partial_cmp(&density[a])
            .expect("densities are finite")
            .then(ids[a].cmp(&ids[b]))
    });
    order
}

fn graph_tables(g: &RegionGraph) -> (Vec<usize>, BTreeMap<usize, usize>, Vec<f64>) {
    let ids: Vec<usize> = g.ids().collect();
    let pos: BTreeMap<usize, usize> = ids.iter().enumerate().map(|(p, &id)| (id, p)).collect();
    let density: Vec<f64> = ids.iter().map(|&id| g.density(id).expect("own id")).collect();
    (ids, pos, density)
}

pub fn build_sublevel_tree(g: &RegionGraph) -> SubLevelTree {
    let (ids, pos, density) = graph_tables(g);
    let mass: Vec<f64> = ids.iter().map(|&id| g.mass(id).expect("own id")).collect();
    let volume: Vec<f64> = ids.iter().map(|&id| g.volume(id).expect("own id")).collect();
    let order = insertion_positions(&ids, &density);

    let mut uf = UnionFind::new(ids.len());
    let mut inserted = vec![false; ids.len()];
    // Per component root: position of the most recent arrival and the
    // running mass and volume totals.
    let mut last_added: Vec<usize> = (0..ids.len()).collect();
    let mut sum_mass = mass;
    let mut sum_volume = volume;

    let mut nodes: BTreeMap<usize, SltNode> = BTreeMap::new();
    let mut insertion = Vec::with_capacity(ids.len());
    let mut merges = Vec::new();

    for (step0, &p) in order.iter().enumerate() {
        let id = ids[p];
        insertion.push(id);
        let mut roots: Vec<usize> = Vec::new();
        for &nb in g.neighbors(id).expect("own id") {
            let np = pos[&nb];
            if inserted[np] {
                let r = uf.find(np);
                if !roots.contains(&r) {
                    roots.push(r);
                }
            }
        }
        inserted[p] = true;
        if roots.is_empty() {
            nodes.insert(id, SltNode { parent: None, color: density[p] });
            continue;
        }
        let mut absorbed: Vec<usize> = roots.iter().map(|&r| ids[last_added[r]]).collect();
        absorbed.sort_unstable();
        let mut total_mass = sum_mass[p];
        let mut total_volume = sum_volume[p];
        for &r in &roots {
            total_mass += sum_mass[r];
            total_volume += sum_volume[r];
        }
        for &a in &absorbed {
            nodes.get_mut(&a).expect("absorbed regions are inserted").parent = Some(id);
        }
        let color = if total_volume > 0.0 { total_mass / total_volume } else { density[p] };
        nodes.insert(id, SltNode { parent: None, color });
        for &r in &roots {
            uf.union(p, r);
        }
        let root = uf.find(p);
        last_added[root] = p;
        sum_mass[root] = total_mass;
        sum_volume[root] = total_volume;
        if roots.len() >= 2 {
            merges.push(MergeEvent { step: step0 + 1, region: id, absorbed });
        }
    }
    debug_assert_eq!(nodes.values().filter(|n| n.parent.is_none()).count(), 1);
    SubLevelTree { nodes, insertion, merges }
}

/// How many branches `extract_branches` should cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchSelect {
    /// Snapshot the last moment exactly this many components existed.
    Count(usize),
    /// Count the modes whose persistence clears the threshold, then cut
    /// that many (at least one).
    Auto,
}

/// One density mode: the component alive at the snapshot step.
#[derive(Debug, Clone)]
pub struct Branch {
    /// Highest-density member, the component's founding region.
    pub leaf: usize,
    /// Density at which the branch was born.
    pub birth: f64,
    /// Density drop from birth to the merge that absorbed the branch (by
    /// the elder rule, the final survivor dies at the last insertion).
    pub persistence: f64,
    /// Member region ids, ascending.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct BranchDecomposition {
    /// Sorted by decreasing birth density, ties toward the smaller leaf id.
    pub branches: Vec<Branch>,
    /// Regions inserted after the snapshot step, ascending.
    pub unassigned: Vec<usize>,
    /// 1-based insertion step the branches were read off at.
    pub snapshot_step: usize,
    /// Threshold used by automatic selection.
    pub min_persistence: f64,
}

/// 5% of the densest region, the default persistence threshold.
pub fn default_min_persistence(g: &RegionGraph) -> f64 {
    let mut max = 0.0f64;
    for id in g.ids() {
        max = max.max(g.density(id).expect("own id"));
    }
    0.05 * max
}

struct Replay<'a> {
    ids: &'a [usize],
    pos: &'a BTreeMap<usize, usize>,
    density: &'a [f64],
    g: &'a RegionGraph,
    uf: UnionFind,
    inserted: Vec<bool>,
    /// Per component root: position of its earliest arrival.
    elder: Vec<usize>,
    /// Insertion index per position.
    arrival: Vec<usize>,
    components: usize,
}

impl<'a> Replay<'a> {
    fn new(ids: &'a [usize], pos: &'a BTreeMap<usize, usize>, density: &'a [f64], g: &'a RegionGraph) -> Self {
        Replay {
            ids,
            pos,
            density,
            g,
            uf: UnionFind::new(ids.len()),
            inserted: vec![false; ids.len()],
            elder: (0..ids.len()).collect(),
            arrival: vec![0; ids.len()],
            components: 0,
        }
    }

    /// Inserts the region at insertion index `k`; records deaths of the
    /// elders that lose a fusion into `death` keyed by leaf id.
    fn step(&mut self, k: usize, id: usize, death: &mut BTreeMap<usize, f64>) {
        let p = self.pos[&id];
        self.arrival[p] = k;
        let mut roots: Vec<usize> = Vec::new();
        for &nb in self.g.neighbors(id).expect("own id") {
            let np = self.pos[&nb];
            if self.inserted[np] {
                let r = self.uf.find(np);
                if !roots.contains(&r) {
                    roots.push(r);
                }
            }
        }
        self.inserted[p] = true;
        if roots.is_empty() {
            self.components += 1;
            return;
        }
        let winner = roots
            .iter()
            .copied()
            .min_by_key(|&r| self.arrival[self.elder[r]])
            .expect("roots is nonempty");
        if roots.len() >= 2 {
            for &r in &roots {
                if r != winner {
                    death.insert(self.ids[self.elder[r]], self.density[p]);
                }
            }
            self.components -= roots.len() - 1;
        }
        let surviving_elder = self.elder[winner];
        for &r in &roots {
            self.uf.union(p, r);
        }
        let root = self.uf.find(p);
        self.elder[root] = surviving_elder;
    }
}

/// Cuts the tree into its most prominent branches.
///
/// The graph must be the one the tree was built from. The snapshot is taken
/// at the *last* insertion step with exactly the requested component count,
/// so each branch is as large as the density landscape allows.
pub fn extract_branches(
    t: &SubLevelTree,
    g: &RegionGraph,
    select: BranchSelect,
    min_persistence: f64,
) -> Result<BranchDecomposition, SltError> {
    if !(min_persistence >= 0.0 && min_persistence.is_finite()) {
        return Err(SltError::BadMinPersistence(min_persistence));
    }
    let (ids, pos, density) = graph_tables(g);
    let order = t.insertion_order();

    // First replay: birth and death density of every mode, and the
    // component count after each step.
    let mut birth: BTreeMap<usize, f64> = BTreeMap::new();
    let mut death: BTreeMap<usize, f64> = BTreeMap::new();
    let mut counts = Vec::with_capacity(order.len());
    let mut replay = Replay::new(&ids, &pos, &density, g);
    for (k, &id) in order.iter().enumerate() {
        let before = replay.components;
        replay.step(k, id, &mut death);
        if replay.components > before {
            birth.insert(id, density[pos[&id]]);
        }
        counts.push(replay.components);
    }
    let last_density = density[pos[order.last().expect("tree is never empty")]];
    for p in 0..ids.len() {
        let root = replay.uf.find(p);
        death.entry(ids[replay.elder[root]]).or_insert(last_density);
    }

    let persistence_of = |leaf: usize| birth[&leaf] - death[&leaf];
    let want = match select {
        BranchSelect::Count(0) => return Err(SltError::ZeroBranches),
        BranchSelect::Count(k) => k,
        BranchSelect::Auto => {
            birth.keys().filter(|&&leaf| persistence_of(leaf) >= min_persistence).count().max(1)
        }
    };
    let snapshot = counts
        .iter()
        .rposition(|&c| c == want)
        .ok_or(SltError::ComponentCountNeverReached(want))?;

    // Second replay stops at the snapshot and reads the live components.
    let mut replay = Replay::new(&ids, &pos, &density, g);
    let mut scratch = BTreeMap::new();
    for (k, &id) in order.iter().enumerate().take(snapshot + 1) {
        replay.step(k, id, &mut scratch);
    }
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for p in 0..ids.len() {
        if replay.inserted[p] {
            members.entry(replay.uf.find(p)).or_default().push(ids[p]);
        }
    }
    let mut branches: Vec<Branch> = members
        .into_iter()
        .map(|(root, mut ids_in)| {
            ids_in.sort_unstable();
            let leaf = ids[replay.elder[root]];
            Branch { leaf, birth: birth[&leaf], persistence: persistence_of(leaf), members: ids_in }
        })
        .collect();
    branches.sort_by(|a, b| {
        b.birth.partial_cmp(&a.birth).expect("densities are finite").then(a.leaf.cmp(&b.leaf))
    });
    let mut unassigned: Vec<usize> = order[snapshot + 1..].to_vec();
    unassigned.sort_unstable();
    Ok(BranchDecomposition { branches, unassigned, snapshot_step: snapshot + 1, min_persistence })
}

/// Graphviz rendering: parent to child edges, nodes filled on a blue-to-red
/// ramp over the color value.
pub fn export_dot(t: &SubLevelTree) -> String {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for id in t.ids() {
        let c = t.color(id).expect("own id");
        lo = lo.min(c);
        hi = hi.max(c);
    }
    let span = hi - lo;
    let mut out = String::from("digraph sublevel_tree {\n    node [shape=circle, style=filled];\n");
    for id in t.ids() {
        let c = t.color(id).expect("own id");
        let tfrac = if span > 0.0 { (c - lo) / span } else { 0.5 };
        let r = (255.0 * tfrac).round() as u8;
        let b = 255 - r;
        out.push_str(&format!("    \"r{id}\" [fillcolor=\"#{r:02x}00{b:02x}\"];\n"));
    }
    for id in t.ids() {
        if let Some(parent) = t.parent(id).expect("own id") {
            out.push_str(&format!("    \"r{parent}\" -> \"r{id}\";\n"));
        }
    }
    out.push_str("}\n");
    out
}
