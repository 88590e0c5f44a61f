//! Grouping primitives on 2D point sets.

mod euclidean;
mod hull;
mod kmeans;
mod linearity;
mod spectral;

pub use euclidean::{euclidean_cluster, euclidean_cluster_nd};
pub use hull::{alpha_shape, convex_hull, polygon_area, solidity, AlphaShape};
pub use kmeans::{kmeans, KMeans};
pub use linearity::{eigen_ratio_2d, linear_points};
pub use spectral::{
    affinity_graph, graph_components, laplacian, spectral_k, spectral_partition, LaplacianKind,
    SpectralAnalysis,
};

use crate::error::{Error, Result};

/// Thresholds for the 2D grouping steps. Distances are in embedding units.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterParams {
    /// Euclidean-clustering hop threshold.
    pub d_e: f64,
    /// PCA neighborhood radius for the linearity test; `2 * d_e` by default.
    pub r_e: f64,
    /// Eigenvalue-ratio threshold below which a point is line-like.
    pub t_e: f64,
    /// Solidity above which a cluster is accepted as convex.
    pub s_e: f64,
    /// Laplacian eigenvalues below this count as zero.
    pub t_s: f64,
    pub laplacian: LaplacianKind,
    pub kmeans_restarts: usize,
    pub seed: u64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams::new(2.0)
    }
}

impl ClusterParams {
    pub fn new(d_e: f64) -> Self {
        ClusterParams {
            d_e,
            r_e: 2.0 * d_e,
            t_e: 0.1,
            s_e: 0.8,
            t_s: 0.0005,
            laplacian: LaplacianKind::SymmetricNormalized,
            kmeans_restarts: 20,
            seed: 0,
        }
    }

    /// Gaussian bandwidth of the spectral affinity graph.
    pub fn spectral_sigma(&self) -> f64 {
        self.d_e
    }

    /// Circumradius bound of the alpha shape used for solidity.
    pub fn alpha(&self) -> f64 {
        2.0 * self.d_e
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("d_e", self.d_e), ("r_e", self.r_e), ("t_s", self.t_s)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [("t_e", self.t_e), ("s_e", self.s_e)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::param(name, format!("must lie in (0, 1), got {v}")));
            }
        }
        if self.kmeans_restarts == 0 {
            return Err(Error::param("kmeans_restarts", "must be positive"));
        }
        Ok(())
    }
}

/// Partition of a point set: one cluster id per point, ids `0..count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labeling2D {
    ids: Vec<usize>,
    count: usize,
}

impl Labeling2D {
    /// Renumbers arbitrary ids to `0..k` in order of first appearance.
    pub fn from_raw(raw: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let ids = raw
            .iter()
            .map(|r| {
                let next = map.len();
                *map.entry(*r).or_insert(next)
            })
            .collect();
        Labeling2D {
            ids,
            count: map.len(),
        }
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Member indices of each cluster, ascending.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut g = vec![Vec::new(); self.count];
        for (i, &c) in self.ids.iter().enumerate() {
            g[c].push(i);
        }
        g
    }

    pub fn as_u32(&self) -> Vec<u32> {
        self.ids.iter().map(|&i| i as u32).collect()
    }

    /// True when both labelings induce the same partition, whatever the ids.
    pub fn same_partition(&self, other: &Labeling2D) -> bool {
        self.len() == other.len() && Labeling2D::from_raw(&self.ids) == Labeling2D::from_raw(&other.ids)
    }
}
