//! Axis-aligned half-open boxes, binary partition trees over them, and
//! bounded point sets.
//!
//! Every box is `[lower_j, upper_j)` in each dimension, so the children of a
//! split tile their parent exactly and a point belongs to exactly one leaf.

use thiserror::Error;

/// Errors from box construction, splitting, and point-set validation.
#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("region must have at least one dimension")]
    NoDimensions,
    #[error("bound {dim} is invalid: lower {lower} must lie strictly below upper {upper}")]
    InvalidBounds { dim: usize, lower: f64, upper: f64 },
    #[error("coordinate in dimension {dim} is not finite")]
    NonFinite { dim: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("split dimension {dim} is out of range for a {ndim}-dimensional region")]
    SplitDimension { dim: usize, ndim: usize },
    #[error("split at {at} must lie strictly inside [{lower}, {upper})")]
    SplitLocation { at: f64, lower: f64, upper: f64 },
    #[error("node {id} is not a leaf")]
    NotALeaf { id: usize },
    #[error("node {id} does not exist")]
    NoSuchNode { id: usize },
    #[error("point {index} lies outside the enclosing region")]
    PointOutside { index: usize },
    #[error("flat data of length {len} is not a multiple of dimension {dim}")]
    RaggedData { len: usize, dim: usize },
    #[error("cannot compute bounds of an empty point list")]
    EmptyPoints,
}

/// A half-open axis-aligned box `[lower_j, upper_j)` carrying the mass and
/// density assigned to it by an estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    /// Creation index; unique and increasing within a tree.
    pub id: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Distance from the tree root (the root has depth 0).
    pub depth: usize,
    /// Probability mass assigned to the box.
    pub mass: f64,
    /// `mass / volume`.
    pub density: f64,
}

impl Region {
    /// Builds a region with zero mass. Bounds must be finite with
    /// `lower[j] < upper[j]` in every dimension.
    pub fn new(id: usize, lower: Vec<f64>, upper: Vec<f64>, depth: usize) -> Result<Self, GeometryError> {
        if lower.is_empty() {
            return Err(GeometryError::NoDimensions);
        }
        if lower.len() != upper.len() {
            return Err(GeometryError::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        for (j, (&a, &b)) in lower.iter().zip(&upper).enumerate() {
            if !a.is_finite() || !b.is_finite() {
                return Err(GeometryError::NonFinite { dim: j });
            }
            if !(a < b) {
                return Err(GeometryError::InvalidBounds { dim: j, lower: a, upper: b });
            }
        }
        Ok(Region { id, lower, upper, depth, mass: 0.0, density: 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(a, b)| b - a).product()
    }

    /// Side length in dimension `j`.
    pub fn width(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    /// Center coordinate in dimension `j`.
    pub fn center(&self, j: usize) -> f64 {
        0.5 * (self.lower[j] + self.upper[j])
    }

    /// Half-open membership test.
    pub fn contains(&self, x: &[f64]) -> Result<bool, GeometryError> {
        if x.len() != self.dim() {
            return Err(GeometryError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.contains_unchecked(x))
    }

    pub(crate) fn contains_unchecked(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&v, (&a, &b))| a <= v && v < b)
    }

    /// Bisects the region at absolute coordinate `at` in dimension `dim`.
    /// The children receive ids `left_id` and `left_id + 1`, depth one below
    /// the parent, and no mass.
    pub fn split(&self, dim: usize, at: f64, left_id: usize) -> Result<(Region, Region), GeometryError> {
        if dim >= self.dim() {
            return Err(GeometryError::SplitDimension { dim, ndim: self.dim() });
        }
        if !at.is_finite() || !(self.lower[dim] < at && at < self.upper[dim]) {
            return Err(GeometryError::SplitLocation { at, lower: self.lower[dim], upper: self.upper[dim] });
        }
        let mut left = Region {
            id: left_id,
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            depth: self.depth + 1,
            mass: 0.0,
            density: 0.0,
        };
        left.upper[dim] = at;
        let mut right = left.clone();
        right.id = left_id + 1;
        right.lower[dim] = at;
        right.upper[dim] = self.upper[dim];
        Ok((left, right))
    }
}

/// Split annotation stored on internal tree nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub dim: usize,
    /// Absolute coordinate of the cut.
    pub at: f64,
}

/// One node of a [`PartitionTree`].
#[derive(Debug, Clone)]
pub struct PartitionNode {
    pub region: Region,
    pub parent: Option<usize>,
    /// `(left child, right child)` ids; `None` for leaves.
    pub children: Option<(usize, usize)>,
    pub split: Option<Split>,
}

impl PartitionNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// Binary partition of a root box into half-open leaves. Node ids are
/// creation indices, so parents always have smaller ids than their children.
#[derive(Debug, Clone)]
pub struct PartitionTree {
    nodes: Vec<PartitionNode>,
}

impl PartitionTree {
    /// Creates a single-node tree over `[lower, upper)` holding mass 1.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, GeometryError> {
        let mut root = Region::new(0, lower, upper, 0)?;
        root.mass = 1.0;
        root.density = 1.0 / root.volume();
        Ok(PartitionTree { nodes: vec![PartitionNode { region: root, parent: None, children: None, split: None }] })
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].region.dim()
    }

    /// Panics if `id` was not issued by this tree.
    pub fn node(&self, id: usize) -> &PartitionNode {
        &self.nodes[id]
    }

    pub fn region(&self, id: usize) -> &Region {
        &self.nodes[id].region
    }

    pub fn nodes(&self) -> impl Iterator<Item = &PartitionNode> {
        self.nodes.iter()
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        self.nodes[id].is_leaf()
    }

    /// Leaf ids in ascending order.
    pub fn leaf_ids(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_leaf()).collect()
    }

    pub fn max_leaf_depth(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.is_leaf())
            .map(|n| n.region.depth)
            .max()
            .expect("tree always has a leaf")
    }

    /// Splits leaf `id` at `(dim, at)`; the children keep the parent's mass
    /// split evenly until the caller assigns real masses. Returns the child
    /// ids, left first.
    pub fn split_leaf(&mut self, id: usize, dim: usize, at: f64) -> Result<(usize, usize), GeometryError> {
        if id >= self.nodes.len() {
            return Err(GeometryError::NoSuchNode { id });
        }
        if !self.nodes[id].is_leaf() {
            return Err(GeometryError::NotALeaf { id });
        }
        let left_id = self.nodes.len();
        let (mut left, mut right) = self.nodes[id].region.split(dim, at, left_id)?;
        let parent_mass = self.nodes[id].region.mass;
        left.mass = 0.5 * parent_mass;
        right.mass = parent_mass - left.mass;
        left.density = left.mass / left.volume();
        right.density = right.mass / right.volume();
        let right_id = left_id + 1;
        self.nodes[id].children = Some((left_id, right_id));
        self.nodes[id].split = Some(Split { dim, at });
        self.nodes.push(PartitionNode { region: left, parent: Some(id), children: None, split: None });
        self.nodes.push(PartitionNode { region: right, parent: Some(id), children: None, split: None });
        Ok((left_id, right_id))
    }

    /// Overwrites the mass of leaf `id` and recomputes its density.
    pub fn set_leaf_mass(&mut self, id: usize, mass: f64) -> Result<(), GeometryError> {
        if id >= self.nodes.len() {
            return Err(GeometryError::NoSuchNode { id });
        }
        if !self.nodes[id].is_leaf() {
            return Err(GeometryError::NotALeaf { id });
        }
        self.set_mass(id, mass);
        Ok(())
    }

    /// Overwrites any node's mass (internal nodes carry their subtree mass).
    pub(crate) fn set_mass(&mut self, id: usize, mass: f64) {
        let volume = self.nodes[id].region.volume();
        self.nodes[id].region.mass = mass;
        self.nodes[id].region.density = mass / volume;
    }

    /// Walks from the root to the unique leaf containing `x`, or `None` if
    /// `x` lies outside the root box.
    pub fn leaf_containing(&self, x: &[f64]) -> Result<Option<usize>, GeometryError> {
        if x.len() != self.dim() {
            return Err(GeometryError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        if !self.nodes[0].region.contains_unchecked(x) {
            return Ok(None);
        }
        let mut id = 0;
        while let Some((l, r)) = self.nodes[id].children {
            let split = self.nodes[id].split.expect("internal node has a split");
            id = if x[split.dim] < split.at { l } else { r };
        }
        Ok(Some(id))
    }
}

/// A set of `d`-dimensional points together with an enclosing half-open box.
/// The box doubles as the estimation domain.
#[derive(Debug, Clone)]
pub struct PointSet {
    data: Vec<f64>,
    dim: usize,
    bounds: Region,
}

impl PointSet {
    /// Wraps row-major flat data. Every point must lie inside `bounds`.
    pub fn from_flat(data: Vec<f64>, dim: usize, bounds: Region) -> Result<Self, GeometryError> {
        if dim == 0 {
            return Err(GeometryError::NoDimensions);
        }
        if bounds.dim() != dim {
            return Err(GeometryError::DimensionMismatch { expected: dim, got: bounds.dim() });
        }
        if data.len() % dim != 0 {
            return Err(GeometryError::RaggedData { len: data.len(), dim });
        }
        for (i, p) in data.chunks_exact(dim).enumerate() {
            if !bounds.contains_unchecked(p) {
                return Err(GeometryError::PointOutside { index: i });
            }
        }
        Ok(PointSet { data, dim, bounds })
    }

    pub fn from_rows(rows: &[Vec<f64>], bounds: Region) -> Result<Self, GeometryError> {
        let dim = bounds.dim();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(GeometryError::DimensionMismatch { expected: dim, got: row.len() });
            }
            if !bounds.contains_unchecked(row) {
                return Err(GeometryError::PointOutside { index: i });
            }
            data.extend_from_slice(row);
        }
        Ok(PointSet { data, dim, bounds })
    }

    /// Wraps rows inside their padded bounding box (see [`padded_bounds`]).
    pub fn with_padded_bounds(rows: &[Vec<f64>], pad_fraction: f64) -> Result<Self, GeometryError> {
        let (lower, upper) = padded_bounds(rows, pad_fraction)?;
        let bounds = Region::new(0, lower, upper, 0)?;
        Self::from_rows(rows, bounds)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn bounds(&self) -> &Region {
        &self.bounds
    }
}

/// Smallest box containing all rows, expanded by `pad_fraction` of each
/// side's length on both ends. Degenerate (zero-width) dimensions are padded
/// by a constant 0.5 so the box always has positive volume.
pub fn padded_bounds(rows: &[Vec<f64>], pad_fraction: f64) -> Result<(Vec<f64>, Vec<f64>), GeometryError> {
    let first = rows.first().ok_or(GeometryError::EmptyPoints)?;
    let dim = first.len();
    if dim == 0 {
        return Err(GeometryError::NoDimensions);
    }
    let mut lower = first.clone();
    let mut upper = first.clone();
    for row in rows {
        if row.len() != dim {
            return Err(GeometryError::DimensionMismatch { expected: dim, got: row.len() });
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(GeometryError::NonFinite { dim: j });
            }
            lower[j] = lower[j].min(v);
            upper[j] = upper[j].max(v);
        }
    }
    for j in 0..dim {
        let width = upper[j] - lower[j];
        let pad = if width > 0.0 { pad_fraction * width } else { 0.5 };
        lower[j] -= pad;
        upper[j] += pad;
    }
    Ok((lower, upper))
}

/// Affinely maps points of `r` onto the unit cube via
/// `(x_j - lower_j) / (upper_j - lower_j)`. Errors if any point is outside.
pub fn rescale_to_unit(points: &PointSet, r: &Region) -> Result<PointSet, GeometryError> {
    if points.dim() != r.dim() {
        return Err(GeometryError::DimensionMismatch { expected: r.dim(), got: points.dim() });
    }
    let dim = r.dim();
    let mut data = Vec::with_capacity(points.data.len());
    for (i, p) in points.iter().enumerate() {
        if !r.contains_unchecked(p) {
            return Err(GeometryError::PointOutside { index: i });
        }
        for j in 0..dim {
            data.push(rescale_coord(p[j], r.lower[j], r.upper[j]));
        }
    }
    let unit = unit_region(dim);
    PointSet::from_flat(data, dim, unit)
}

/// `[0, 1)^d` with no mass.
pub fn unit_region(dim: usize) -> Region {
    Region::new(0, vec![0.0; dim], vec![1.0; dim], 0).expect("unit region is valid")
}

/// Maps one coordinate of `[a, b)` onto `[0, 1)`, clamping the rounding edge
/// so in-region points never map to exactly 1.
pub(crate) fn rescale_coord(x: f64, a: f64, b: f64) -> f64 {
    let t = (x - a) / (b - a);
    if t >= 1.0 {
        f64::from_bits(1.0f64.to_bits() - 1)
    } else {
        t
    }
}
