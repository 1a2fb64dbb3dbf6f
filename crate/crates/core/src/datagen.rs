//! Seeded generators for the simulation studies: a Gaussian mixture with
//! well separated components, random rigid motions to stress invariance,
//! and a planted three-block network.

use crate::geometry::{GeometryError, PointSet};
use crate::spectral::Network;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("mixture needs at least one component")]
    EmptyMixture,
    #[error("component weights must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("component weights must sum to 1, got {0}")]
    WeightSum(f64),
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("covariance is not positive definite")]
    NotPositiveDefinite,
    #[error("sample size must be positive")]
    NoSamples,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Gaussian mixture: one shared covariance, one mean per component.
#[derive(Debug, Clone)]
pub struct MixtureSpec {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariance: DMatrix<f64>,
}

impl MixtureSpec {
    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.weights.is_empty() || self.means.is_empty() {
            return Err(DatagenError::EmptyMixture);
        }
        if self.weights.len() != self.means.len() {
            return Err(DatagenError::DimensionMismatch {
                expected: self.weights.len(),
                got: self.means.len(),
            });
        }
        for &w in &self.weights {
            if !(w > 0.0) {
                return Err(DatagenError::NonPositiveWeight(w));
            }
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(DatagenError::WeightSum(total));
        }
        let d = self.dim();
        if self.covariance.ncols() != d {
            return Err(DatagenError::DimensionMismatch { expected: d, got: self.covariance.ncols() });
        }
        for mean in &self.means {
            if mean.len() != d {
                return Err(DatagenError::DimensionMismatch { expected: d, got: mean.len() });
            }
        }
        Ok(())
    }
}

/// Four equally weighted components in ten dimensions. The means sit on two
/// well separated pairs and the covariance is tridiagonal: unit variance
/// with 0.1 correlation between consecutive coordinates.
pub fn benchmark_mixture() -> MixtureSpec {
    let d = 10;
    let mut means = vec![vec![0.0; d]; 4];
    means[0][0] = 2.0;
    means[0][1] = 2.0;
    means[1][0] = -2.0;
    means[1][1] = 2.0;
    means[2][1] = -2.0;
    means[2][2] = 2.0;
    means[3][1] = -2.0;
    means[3][2] = -2.0;
    let covariance = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else if i.abs_diff(j) == 1 {
            0.1
        } else {
            0.0
        }
    });
    MixtureSpec { weights: vec![0.25; 4], means, covariance }
}

#[derive(Debug, Clone)]
pub struct MixtureSample {
    /// Bounds are the sample hull padded by 1% per side.
    pub points: PointSet,
    /// Component index per point.
    pub labels: Vec<usize>,
}

/// Draws `n` points. Each point consumes one uniform draw for the
/// component and then `dim` standard normal draws, so samples with the
/// same seed share a prefix.
pub fn sample_mixture(spec: &MixtureSpec, n: usize, seed: u64) -> Result<MixtureSample, DatagenError> {
    spec.validate()?;
    if n == 0 {
        return Err(DatagenError::NoSamples);
    }
    let d = spec.dim();
    let chol = nalgebra::Cholesky::new(spec.covariance.clone())
        .ok_or(DatagenError::NotPositiveDefinite)?;
    let l = chol.l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen();
        let mut component = spec.weights.len() - 1;
        let mut cumulative = 0.0;
        for (c, &w) in spec.weights.iter().enumerate() {
            cumulative += w;
            if u < cumulative {
                component = c;
                break;
            }
        }
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &l * z;
        let row: Vec<f64> = (0..d).map(|j| spec.means[component][j] + x[j]).collect();
        rows.push(row);
        labels.push(component);
    }
    Ok(MixtureSample { points: PointSet::with_padded_bounds(&rows, 0.01)?, labels })
}

/// Rigid motion `x -> R x + t` with `R` orthogonal.
#[derive(Debug, Clone)]
pub struct RigidMotion {
    pub rotation: DMatrix<f64>,
    pub translation: Vec<f64>,
}

impl RigidMotion {
    pub fn dim(&self) -> usize {
        self.rotation.nrows()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let v = &self.rotation * DVector::from_column_slice(x);
        (0..self.dim()).map(|i| v[i] + self.translation[i]).collect()
    }

    /// The motion sending `R x + t` back to `x`.
    pub fn inverse(&self) -> RigidMotion {
        let rt = self.rotation.transpose();
        let t = &rt * DVector::from_column_slice(&self.translation);
        RigidMotion { rotation: rt, translation: (0..self.dim()).map(|i| -t[i]).collect() }
    }
}

/// Haar-ish random rotation (QR of a Gaussian matrix, drawn row by row,
/// with the signs fixed so the factorization is unique) plus a uniform
/// translation in `[-5, 5]` per coordinate, drawn after the matrix.
pub fn random_rigid_motion(dim: usize, seed: u64) -> RigidMotion {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries: Vec<f64> = (0..dim * dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let a = DMatrix::from_row_slice(dim, dim, &entries);
    let qr = a.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            for i in 0..dim {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    let translation: Vec<f64> = (0..dim).map(|_| -5.0 + 10.0 * rng.gen::<f64>()).collect();
    RigidMotion { rotation: q, translation }
}

/// Applies a seeded rigid motion to every point and re-derives padded
/// bounds on the moved sample.
pub fn rotate_translate(points: &PointSet, seed: u64) -> Result<PointSet, DatagenError> {
    let motion = random_rigid_motion(points.dim(), seed);
    let rows: Vec<Vec<f64>> = points.iter().map(|x| motion.apply(x)).collect();
    Ok(PointSet::with_padded_bounds(&rows, 0.01)?)
}

/// Planted three-block network on 1000 vertices: blocks of 300, 300, and
/// 400 with intra-block edge probabilities 0.01, 0.02, and 0.008, faint
/// inter-block noise (0.0001 between the first two pairs, 0.0005 between
/// the first and last block), and a deterministic path 0-1-...-999 so the
/// graph is always connected. Returns the network and the block label per
/// vertex. One uniform draw is consumed per non-path vertex pair, in
/// ascending `(i, j)` order.
pub fn benchmark_network(seed: u64) -> (Network, Vec<usize>) {
    let n = 1000;
    let label = |v: usize| {
        if v < 300 {
            0
        } else if v < 600 {
            1
        } else {
            2
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    for i in 0..n {
        for j in (i + 2)..n {
            let p = match (label(i), label(j)) {
                (0, 0) => 0.01,
                (1, 1) => 0.02,
                (2, 2) => 0.008,
                (0, 1) => 0.0001,
                (1, 2) => 0.0001,
                (0, 2) => 0.0005,
                _ => unreachable!("labels ascend with the vertex id"),
            };
            if rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let net = Network::new(n, edges, None).expect("generated edges are in range");
    (net, (0..n).map(label).collect())
}
