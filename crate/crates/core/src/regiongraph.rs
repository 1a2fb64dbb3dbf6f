//! Adjacency graph over the leaves of a partition.
//!
//! Two boxes are adjacent when their closed hulls touch in every dimension,
//! including corner contact; the comparison gets a relative slack of 1e-9 of
//! the larger width per dimension so shared boundaries survive rounding.
//! When the leaves do not form a connected graph (possible for hand-built
//! region sets; a partition of a box is always connected), a virtual region
//! of density zero is wired to the least dense region of each component so
//! the sub-level tree always has a single root.

use crate::estimator::PiecewiseDensity;
use crate::geometry::{GeometryError, Region};
use crate::unionfind::UnionFind;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegionGraphError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("region graph needs at least one region")]
    NoRegions,
    #[error("duplicate region id {0}")]
    DuplicateId(usize),
    #[error("region id {0} is not a node of the graph")]
    UnknownRegion(usize),
    #[error("cannot average density over an empty or zero-volume region set")]
    EmptyAverage,
}

/// Closed-hull contact test on half-open boxes: the boxes are *not* adjacent
/// exactly when some dimension separates their centers by more than the sum
/// of half-widths plus slack.
pub fn is_adjacent(a: &Region, b: &Region) -> Result<bool, RegionGraphError> {
    if a.dim() != b.dim() {
        return Err(GeometryError::DimensionMismatch { expected: a.dim(), got: b.dim() }.into());
    }
    for k in 0..a.dim() {
        let (wa, wb) = (a.width(k), b.width(k));
        let eps = 1e-9 * wa.max(wb);
        if (a.center(k) - b.center(k)).abs() > 0.5 * (wa + wb) + eps {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone)]
struct GraphNode {
    id: usize,
    volume: f64,
    density: f64,
    mass: f64,
    neighbors: Vec<usize>,
}

/// Undirected adjacency graph keyed by region id.
#[derive(Debug, Clone)]
pub struct RegionGraph {
    /// Ascending by id; the virtual node, if any, has the largest id.
    nodes: Vec<GraphNode>,
    index: BTreeMap<usize, usize>,
    virtual_id: Option<usize>,
}

impl RegionGraph {
    /// Builds the all-pairs adjacency graph of `regions` (mass, volume, and
    /// density are read off each region), adding the virtual region if the
    /// graph is disconnected.
    pub fn from_regions(regions: &[&Region]) -> Result<Self, RegionGraphError> {
        if regions.is_empty() {
            return Err(RegionGraphError::NoRegions);
        }
        let mut order: Vec<&Region> = regions.to_vec();
        order.sort_by_key(|r| r.id);
        let mut nodes: Vec<GraphNode> = Vec::with_capacity(order.len());
        let mut index = BTreeMap::new();
        for r in &order {
            if index.insert(r.id, nodes.len()).is_some() {
                return Err(RegionGraphError::DuplicateId(r.id));
            }
            nodes.push(GraphNode {
                id: r.id,
                volume: r.volume(),
                density: r.density,
                mass: r.mass,
                neighbors: Vec::new(),
            });
        }
        let mut uf = UnionFind::new(nodes.len());
        for i in 0..order.len() {
            for j in (i + 1)..order.len() {
                if is_adjacent(order[i], order[j])? {
                    nodes[i].neighbors.push(order[j].id);
                    nodes[j].neighbors.push(order[i].id);
                    uf.union(i, j);
                }
            }
        }
        // Component roots mapped to their least dense member (ties toward
        // the smaller id, which ascending iteration gives for free).
        let mut minima: BTreeMap<usize, usize> = BTreeMap::new();
        for pos in 0..nodes.len() {
            let root = uf.find(pos);
            let entry = minima.entry(root).or_insert(pos);
            if nodes[pos].density < nodes[*entry].density {
                *entry = pos;
            }
        }
        let mut virtual_id = None;
        if minima.len() > 1 {
            let vid = nodes.last().expect("nonempty").id + 1;
            let mut anchors: Vec<usize> = minima.values().map(|&pos| nodes[pos].id).collect();
            anchors.sort_unstable();
            for &a in &anchors {
                let pos = index[&a];
                nodes[pos].neighbors.push(vid);
            }
            index.insert(vid, nodes.len());
            nodes.push(GraphNode { id: vid, volume: 0.0, density: 0.0, mass: 0.0, neighbors: anchors });
            virtual_id = Some(vid);
        }
        for node in &mut nodes {
            node.neighbors.sort_unstable();
        }
        Ok(RegionGraph { nodes, index, virtual_id })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node ids in ascending order (the virtual node comes last).
    pub fn ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().map(|n| n.id)
    }

    pub fn virtual_id(&self) -> Option<usize> {
        self.virtual_id
    }

    fn position(&self, id: usize) -> Result<usize, RegionGraphError> {
        self.index.get(&id).copied().ok_or(RegionGraphError::UnknownRegion(id))
    }

    /// Neighbor ids of `id`, ascending.
    pub fn neighbors(&self, id: usize) -> Result<&[usize], RegionGraphError> {
        Ok(&self.nodes[self.position(id)?].neighbors)
    }

    pub fn density(&self, id: usize) -> Result<f64, RegionGraphError> {
        Ok(self.nodes[self.position(id)?].density)
    }

    pub fn volume(&self, id: usize) -> Result<f64, RegionGraphError> {
        Ok(self.nodes[self.position(id)?].volume)
    }

    pub fn mass(&self, id: usize) -> Result<f64, RegionGraphError> {
        Ok(self.nodes[self.position(id)?].mass)
    }

    /// Undirected edges as `(smaller id, larger id)`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for node in &self.nodes {
            for &m in &node.neighbors {
                if node.id < m {
                    out.push((node.id, m));
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Number of connected components (1 whenever a virtual node was added).
    pub fn component_count(&self) -> usize {
        let mut uf = UnionFind::new(self.nodes.len());
        let mut components = self.nodes.len();
        for node in &self.nodes {
            for &m in &node.neighbors {
                if node.id < m && uf.union(self.index[&node.id], self.index[&m]).is_some() {
                    components -= 1;
                }
            }
        }
        components
    }
}

/// Builds the leaf adjacency graph of an estimate.
pub fn build_region_graph(pd: &PiecewiseDensity) -> Result<RegionGraph, RegionGraphError> {
    RegionGraph::from_regions(&pd.leaves())
}

/// Mass-weighted mean density of a region set: total mass over total volume.
pub fn average_density(g: &RegionGraph, ids: &[usize]) -> Result<f64, RegionGraphError> {
    let mut mass = 0.0;
    let mut volume = 0.0;
    for &id in ids {
        mass += g.mass(id)?;
        volume += g.volume(id)?;
    }
    if volume <= 0.0 {
        return Err(RegionGraphError::EmptyAverage);
    }
    Ok(mass / volume)
}
