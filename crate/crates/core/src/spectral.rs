//! Community detection through the density landscape of a spectral
//! embedding.
//!
//! Vertices are embedded with the leading eigenvectors of the (negative
//! semidefinite) graph Laplacian, the partition estimator carves the
//! embedding into density regions, and the branches of the sub-level tree
//! become communities. Vertices landing in regions cut off below the
//! branch snapshot are rescued by their neighbors: a vertex touching one
//! community joins it, a vertex touching several is transitional.

use crate::estimator::{estimate_density, EstimatorConfig, EstimatorError, PiecewiseDensity};
use crate::geometry::{GeometryError, PointSet};
use crate::regiongraph::{average_density, build_region_graph, RegionGraph, RegionGraphError};
use crate::sltree::{
    build_sublevel_tree, default_min_persistence, extract_branches, BranchDecomposition,
    BranchSelect, SltError, SubLevelTree,
};
use nalgebra::DMatrix;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("vertex {vertex} is out of range for a {count}-vertex network")]
    VertexOutOfRange { vertex: usize, count: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("a network needs at least one vertex")]
    NoVertices,
    #[error("{got} labels for {want} vertices")]
    LabelCount { got: usize, want: usize },
    #[error("need at least one eigenvector")]
    ZeroEigenvectors,
    #[error("requested {requested} eigenvectors but only {available} are available")]
    TooManyEigenvectors { requested: usize, available: usize },
    #[error("eigensolver did not converge")]
    NoConvergence,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Graph(#[from] RegionGraphError),
    #[error(transparent)]
    Tree(#[from] SltError),
}

/// Undirected simple graph. Edges are stored deduplicated as
/// `(smaller, larger)` in sorted order; self-loops are rejected.
#[derive(Debug, Clone)]
pub struct Network {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    labels: Option<Vec<String>>,
}

impl Network {
    pub fn new(
        vertex_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        labels: Option<Vec<String>>,
    ) -> Result<Self, SpectralError> {
        if vertex_count == 0 {
            return Err(SpectralError::NoVertices);
        }
        if let Some(l) = &labels {
            if l.len() != vertex_count {
                return Err(SpectralError::LabelCount { got: l.len(), want: vertex_count });
            }
        }
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            for w in [u, v] {
                if w >= vertex_count {
                    return Err(SpectralError::VertexOutOfRange { vertex: w, count: vertex_count });
                }
            }
            if u == v {
                return Err(SpectralError::SelfLoop(u));
            }
            set.insert((u.min(v), u.max(v)));
        }
        let edges: Vec<(usize, usize)> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); vertex_count];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Ok(Network { vertex_count, edges, adjacency, labels })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// `(smaller, larger)` pairs in ascending order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Neighbors of `v`, ascending.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, v: usize) -> Option<&str> {
        self.labels.as_ref().map(|l| l[v].as_str())
    }
}

/// Adjacency matrix minus the degree diagonal; negative semidefinite, so
/// the constant vector tops the spectrum at eigenvalue zero on each
/// connected component.
pub fn laplacian(net: &Network) -> DMatrix<f64> {
    let n = net.vertex_count();
    let mut l = DMatrix::zeros(n, n);
    for &(u, v) in net.edges() {
        l[(u, v)] = 1.0;
        l[(v, u)] = 1.0;
    }
    for v in 0..n {
        l[(v, v)] = -(net.degree(v) as f64);
    }
    l
}

/// Rows are vertices, columns the selected eigenvectors in order of
/// decreasing eigenvalue.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    pub eigenvalues: Vec<f64>,
    pub coords: Vec<Vec<f64>>,
}

/// Extracts the `k` leading eigenvectors of a symmetric matrix, optionally
/// dropping the very first (for a connected graph Laplacian that one is
/// constant and carries no geometry). Each eigenvector is normalized to
/// make its first nonnegligible entry positive, which pins the otherwise
/// arbitrary sign.
pub fn leading_eigenvectors(
    matrix: &DMatrix<f64>,
    k: usize,
    skip_first: bool,
) -> Result<SpectralEmbedding, SpectralError> {
    let n = matrix.nrows();
    let available = n.saturating_sub(skip_first as usize);
    if k == 0 {
        return Err(SpectralError::ZeroEigenvectors);
    }
    if k > available {
        return Err(SpectralError::TooManyEigenvectors { requested: k, available });
    }
    let eigen = nalgebra::SymmetricEigen::try_new(matrix.clone(), f64::EPSILON, 100_000)
        .ok_or(SpectralError::NoConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b].partial_cmp(&eigen.eigenvalues[a]).expect("finite eigenvalues")
    });
    let chosen = &order[skip_first as usize..skip_first as usize + k];
    let mut eigenvalues = Vec::with_capacity(k);
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(k);
    for &c in chosen {
        eigenvalues.push(eigen.eigenvalues[c]);
        let mut col: Vec<f64> = eigen.eigenvectors.column(c).iter().copied().collect();
        let scale = col.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        if let Some(&lead) = col.iter().find(|x| x.abs() > 1e-12 * scale) {
            if lead < 0.0 {
                for x in &mut col {
                    *x = -*x;
                }
            }
        }
        columns.push(col);
    }
    let coords: Vec<Vec<f64>> =
        (0..n).map(|i| columns.iter().map(|col| col[i]).collect()).collect();
    Ok(SpectralEmbedding { eigenvalues, coords })
}

#[derive(Debug, Clone)]
pub struct CommunityConfig {
    /// Embedding dimension.
    pub eigenvectors: usize,
    /// Drop the constant top eigenvector before taking `eigenvectors`.
    pub skip_first: bool,
    pub estimator: EstimatorConfig,
    pub branches: BranchSelect,
    /// Defaults to 5% of the peak region density.
    pub min_persistence: Option<f64>,
}

impl Default for CommunityConfig {
    fn default() -> Self {
        CommunityConfig {
            eigenvectors: 2,
            skip_first: true,
            estimator: EstimatorConfig::default(),
            branches: BranchSelect::Auto,
            min_persistence: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Community {
    /// Vertex ids, ascending.
    pub vertices: Vec<usize>,
    /// Mean density of the branch regions backing the community.
    pub cohesion: f64,
}

#[derive(Debug, Clone)]
pub struct CommunityResult {
    /// Community index per vertex; `None` marks a transitional vertex.
    pub assignment: Vec<Option<usize>>,
    pub communities: Vec<Community>,
    /// Transitional vertices, ascending.
    pub transitional: Vec<usize>,
    pub eigenvalues: Vec<f64>,
    /// Embedding rows the density was estimated on.
    pub embedding: Vec<Vec<f64>>,
    pub density: PiecewiseDensity,
    pub region_graph: RegionGraph,
    pub sublevel_tree: SubLevelTree,
    pub branches: BranchDecomposition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VertexState {
    /// Assigned through its embedding region; never reconsidered.
    Fixed(usize),
    /// Assigned through neighbors; reconsidered every round.
    Derived(usize),
    Transitional,
    Open,
}

/// Spreads community membership to vertices whose regions fell below the
/// branch snapshot. Rounds sweep vertices in ascending order, seeing the
/// current round's earlier updates: a vertex touching exactly one
/// community joins it, one touching several becomes transitional, and one
/// touching none waits. Vertices still open when the sweep stabilizes (or
/// after a full round per vertex) are marked transitional.
pub(crate) fn propagate_assignments(adjacency: &[Vec<usize>], states: &mut [VertexState]) {
    for _ in 0..states.len() {
        let mut changed = false;
        for v in 0..states.len() {
            match states[v] {
                VertexState::Fixed(_) | VertexState::Transitional => continue,
                VertexState::Derived(_) | VertexState::Open => {
                    let mut contacts = BTreeSet::new();
                    for &u in &adjacency[v] {
                        match states[u] {
                            VertexState::Fixed(c) | VertexState::Derived(c) => {
                                contacts.insert(c);
                            }
                            _ => {}
                        }
                    }
                    let next = match contacts.len() {
                        0 => VertexState::Open,
                        1 => VertexState::Derived(*contacts.iter().next().expect("len 1")),
                        _ => VertexState::Transitional,
                    };
                    if next != states[v] {
                        states[v] = next;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    for s in states.iter_mut() {
        if *s == VertexState::Open {
            *s = VertexState::Transitional;
        }
    }
}

/// Runs the full pipeline: embed, estimate, cut branches, map vertices to
/// branches through their embedding region, then resolve the leftovers.
/// With fewer than two branches every vertex lands in one community.
pub fn detect_communities(
    net: &Network,
    config: &CommunityConfig,
) -> Result<CommunityResult, SpectralError> {
    let embedding = leading_eigenvectors(&laplacian(net), config.eigenvectors, config.skip_first)?;
    let points = PointSet::with_padded_bounds(&embedding.coords, 0.01)?;
    let density = estimate_density(&points, &config.estimator)?;
    let region_graph = build_region_graph(&density)?;
    let sublevel_tree = build_sublevel_tree(&region_graph);
    let min_persistence =
        config.min_persistence.unwrap_or_else(|| default_min_persistence(&region_graph));
    let branches =
        extract_branches(&sublevel_tree, &region_graph, config.branches, min_persistence)?;

    let mut branch_of_region: BTreeMap<usize, usize> = BTreeMap::new();
    for (b, branch) in branches.branches.iter().enumerate() {
        for &r in &branch.members {
            branch_of_region.insert(r, b);
        }
    }
    let region_of_vertex: Vec<usize> = embedding
        .coords
        .iter()
        .map(|row| {
            density
                .tree()
                .leaf_containing(row)
                .expect("embedding has the estimate's dimension")
                .expect("embedding points lie inside the padded domain")
        })
        .collect();

    let n = net.vertex_count();
    let (assignment, transitional) = if branches.branches.len() < 2 {
        (vec![Some(0); n], Vec::new())
    } else {
        let mut states: Vec<VertexState> = region_of_vertex
            .iter()
            .map(|r| match branch_of_region.get(r) {
                Some(&b) => VertexState::Fixed(b),
                None => VertexState::Open,
            })
            .collect();
        propagate_assignments(&net.adjacency, &mut states);
        let assignment: Vec<Option<usize>> = states
            .iter()
            .map(|s| match s {
                VertexState::Fixed(c) | VertexState::Derived(c) => Some(*c),
                VertexState::Transitional => None,
                VertexState::Open => unreachable!("open states are closed out"),
            })
            .collect();
        let transitional: Vec<usize> =
            (0..n).filter(|&v| assignment[v].is_none()).collect();
        (assignment, transitional)
    };

    let community_count = if branches.branches.len() < 2 { 1 } else { branches.branches.len() };
    let mut communities = Vec::with_capacity(community_count);
    for b in 0..community_count {
        let vertices: Vec<usize> = (0..n).filter(|&v| assignment[v] == Some(b)).collect();
        let cohesion = average_density(&region_graph, &branches.branches[b].members)?;
        communities.push(Community { vertices, cohesion });
    }

    Ok(CommunityResult {
        assignment,
        communities,
        transitional,
        eigenvalues: embedding.eigenvalues,
        embedding: embedding.coords,
        density,
        region_graph,
        sublevel_tree,
        branches,
    })
}

/// Chance-corrected agreement of two labelings of the same items: 1 for
/// identical partitions, about 0 for independent ones.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same items");
    assert!(!a.is_empty(), "labelings must be nonempty");
    let choose2 = |x: usize| (x * x.saturating_sub(1)) as f64 / 2.0;
    let mut cells: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut rows: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cols: BTreeMap<usize, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_insert(0) += 1;
        *rows.entry(x).or_insert(0) += 1;
        *cols.entry(y).or_insert(0) += 1;
    }
    let index: f64 = cells.values().map(|&c| choose2(c)).sum();
    let row_sum: f64 = rows.values().map(|&c| choose2(c)).sum();
    let col_sum: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = row_sum * col_sum / choose2(a.len());
    let maximum = 0.5 * (row_sum + col_sum);
    if (maximum - expected).abs() < 1e-12 {
        return 1.0;
    }
    (index - expected) / (maximum - expected)
}
