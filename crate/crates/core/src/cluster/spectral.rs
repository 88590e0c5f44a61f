//! Spectral cluster-count estimation and partitioning.
//!
//! The graph is a truncated Gaussian kernel over the 2D points. Eigenpairs
//! come from a dense symmetric solver; clusters handed to this module are
//! at most a few thousand points.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{kmeans, ClusterParams, Labeling2D};
use crate::error::{Error, Result};
use crate::kdtree::KdTree;

/// Kernel support in multiples of the bandwidth.
const TRUNCATION: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LaplacianKind {
    /// `I - D^{-1/2} W D^{-1/2}`; isolated vertices get a zero row.
    #[default]
    SymmetricNormalized,
    /// `D - W`.
    Unnormalized,
}

/// `W_ij = exp(-d^2 / 2 sigma^2)` for `0 < d < 3 sigma`, zero otherwise.
pub fn affinity_graph(points: &[[f64; 2]], sigma: f64) -> DMatrix<f64> {
    let n = points.len();
    let tree = KdTree::new(points);
    let mut w = DMatrix::zeros(n, n);
    let denom = 2.0 * sigma * sigma;
    let mut nbrs = Vec::new();
    for i in 0..n {
        tree.within_into(&points[i], TRUNCATION * sigma, &mut nbrs);
        for &j in &nbrs {
            if j != i {
                let d2 = crate::kdtree::dist2(&points[i], &points[j]);
                w[(i, j)] = (-d2 / denom).exp();
            }
        }
    }
    w
}

pub fn laplacian(w: &DMatrix<f64>, kind: LaplacianKind) -> DMatrix<f64> {
    let n = w.nrows();
    let degree: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
    match kind {
        LaplacianKind::Unnormalized => {
            let mut l = -w.clone();
            for i in 0..n {
                l[(i, i)] += degree[i];
            }
            l
        }
        LaplacianKind::SymmetricNormalized => {
            let inv_sqrt: Vec<f64> = degree
                .iter()
                .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
                .collect();
            DMatrix::from_fn(n, n, |i, j| {
                let off = -w[(i, j)] * inv_sqrt[i] * inv_sqrt[j];
                if i == j && degree[i] > 0.0 {
                    1.0 + off
                } else {
                    off
                }
            })
        }
    }
}

/// Connected components of the thresholded graph `W_ij > 0`.
pub fn graph_components(w: &DMatrix<f64>) -> Labeling2D {
    let n = w.nrows();
    let mut ids = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if ids[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        ids[s] = next;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if w[(i, j)] > 0.0 && ids[j] == usize::MAX {
                    ids[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    Labeling2D::from_raw(&ids)
}

/// Eigen-decomposition of a cluster's Laplacian, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralAnalysis {
    pub eigenvalues: Vec<f64>,
    /// Column `k` pairs with `eigenvalues[k]`.
    pub eigenvectors: DMatrix<f64>,
    pub kind: LaplacianKind,
}

impl SpectralAnalysis {
    pub fn new(points: &[[f64; 2]], params: &ClusterParams) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "spectral analysis needs at least 2 points, got {}",
                points.len()
            )));
        }
        let w = affinity_graph(points, params.spectral_sigma());
        let l = laplacian(&w, params.laplacian);
        let n = l.nrows();
        let eig = SymmetricEigen::try_new(l, f64::EPSILON, 100 * n.max(10))
            .ok_or_else(|| Error::Numerical("symmetric eigen-solver did not converge".into()))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
        let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let eigenvectors = DMatrix::from_fn(n, n, |i, c| eig.eigenvectors[(i, order[c])]);
        Ok(SpectralAnalysis {
            eigenvalues,
            eigenvectors,
            kind: params.laplacian,
        })
    }

    /// Number of eigenvalues below `t_s`, at least 1.
    pub fn near_zero_count(&self, t_s: f64) -> usize {
        self.eigenvalues.iter().filter(|&&v| v < t_s).count().max(1)
    }

    /// k-means on the row-normalized leading `k` eigenvectors.
    pub fn partition(&self, k: usize, restarts: usize, seed: u64) -> Result<Labeling2D> {
        let n = self.eigenvectors.nrows();
        if k == 0 || k > n {
            return Err(Error::InvalidInput(format!(
                "cannot split {n} points into {k} clusters"
            )));
        }
        if k == n {
            return Ok(Labeling2D::from_raw(&(0..n).collect::<Vec<_>>()));
        }
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let r: Vec<f64> = (0..k).map(|c| self.eigenvectors[(i, c)]).collect();
                let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    r.into_iter().map(|v| v / norm).collect()
                } else {
                    r
                }
            })
            .collect();
        Ok(kmeans(&rows, k, restarts, seed).labels)
    }
}

/// Estimated cluster count: Laplacian eigenvalues below `params.t_s`.
pub fn spectral_k(points: &[[f64; 2]], params: &ClusterParams) -> Result<usize> {
    Ok(SpectralAnalysis::new(points, params)?.near_zero_count(params.t_s))
}

/// Splits `points` into `k` groups by normalized spectral clustering.
pub fn spectral_partition(points: &[[f64; 2]], k: usize, params: &ClusterParams) -> Result<Labeling2D> {
    if k > points.len() {
        return Err(Error::InvalidInput(format!(
            "K_s = {k} exceeds the {} points",
            points.len()
        )));
    }
    if k == points.len() {
        return Ok(Labeling2D::from_raw(&(0..k).collect::<Vec<_>>()));
    }
    SpectralAnalysis::new(points, params)?.partition(k, params.kmeans_restarts, params.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blob(center: [f64; 2], radius: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
        let mut out = Vec::new();
        while out.len() < n {
            let p = [rng.gen_range(-radius..radius), rng.gen_range(-radius..radius)];
            if p[0] * p[0] + p[1] * p[1] < radius * radius {
                out.push([center[0] + p[0], center[1] + p[1]]);
            }
        }
        out
    }

    #[test]
    fn one_blob_has_one_component() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = blob([0.0, 0.0], 3.0, 120, &mut rng);
        assert_eq!(spectral_k(&pts, &ClusterParams::new(1.0)).unwrap(), 1);
    }

    #[test]
    fn separated_blobs_counted_and_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut pts = blob([0.0, 0.0], 3.0, 80, &mut rng);
        pts.extend(blob([20.0, 0.0], 3.0, 60, &mut rng));
        let params = ClusterParams::new(1.0);
        assert_eq!(spectral_k(&pts, &params).unwrap(), 2);
        let l = spectral_partition(&pts, 2, &params).unwrap();
        let truth: Vec<usize> = (0..140).map(|i| usize::from(i >= 80)).collect();
        assert!(l.same_partition(&Labeling2D::from_raw(&truth)));
    }

    #[test]
    fn k_equal_n_isolates_points() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let l = spectral_partition(&pts, 3, &ClusterParams::new(1.0)).unwrap();
        assert_eq!(l.count(), 3);
        assert!(spectral_partition(&pts, 4, &ClusterParams::new(1.0)).is_err());
    }

    #[test]
    fn isolated_vertex_counts_as_component() {
        let pts = [[0.0, 0.0], [0.5, 0.0], [100.0, 0.0]];
        assert_eq!(spectral_k(&pts, &ClusterParams::new(1.0)).unwrap(), 2);
    }

    #[test]
    fn unnormalized_laplacian_counts_components_too() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pts = blob([0.0, 0.0], 2.0, 50, &mut rng);
        pts.extend(blob([15.0, 15.0], 2.0, 50, &mut rng));
        pts.extend(blob([-15.0, 15.0], 2.0, 50, &mut rng));
        let mut params = ClusterParams::new(1.0);
        params.laplacian = LaplacianKind::Unnormalized;
        assert_eq!(spectral_k(&pts, &params).unwrap(), 3);
    }

    #[test]
    fn normalized_spectrum_lies_in_zero_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts = blob([0.0, 0.0], 4.0, 90, &mut rng);
        let a = SpectralAnalysis::new(&pts, &ClusterParams::new(1.0)).unwrap();
        assert!(a.eigenvalues.iter().all(|&v| v > -1e-10 && v < 2.0 + 1e-10));
        assert!(a.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }
}
