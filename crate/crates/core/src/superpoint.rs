//! Iterative superpoint extraction on a 2D embedding.

use crate::cloud::PointCloud;
use crate::cluster::{
    euclidean_cluster, linear_points, solidity, spectral_partition, ClusterParams,
    SpectralAnalysis,
};
use crate::error::{Error, Result};
use crate::propagate::propagate;

pub const DEFAULT_MAX_ROUNDS: usize = 10;

/// Clusters below this size skip the solidity and spectral tests.
const MIN_CLUSTER: usize = 3;

/// How a superpoint was accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    /// Connected line-like points.
    LinearRegion,
    /// Cluster convex enough on first inspection.
    SolidCluster,
    /// Concave cluster whose Laplacian shows a single component.
    SpectralLeaf,
    /// Sub-cluster produced by a spectral split, then accepted.
    SpectralSplit,
    /// Too small to test, or still pending when the round cap hit.
    Residual,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::LinearRegion => "linear_region",
            Provenance::SolidCluster => "solid_cluster",
            Provenance::SpectralLeaf => "spectral_leaf",
            Provenance::SpectralSplit => "spectral_split",
            Provenance::Residual => "residual",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperpointSet {
    assignments: Vec<usize>,
    provenance: Vec<Provenance>,
    exhausted: bool,
}

impl SuperpointSet {
    /// Superpoint id of every embedded point.
    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn count(&self) -> usize {
        self.provenance.len()
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// True when the round cap stopped the refinement loop.
    pub fn exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count()];
        for (i, &s) in self.assignments.iter().enumerate() {
            out[s].push(i);
        }
        out
    }
}

struct Builder {
    owner: Vec<usize>,
    provenance: Vec<Provenance>,
}

const UNASSIGNED: usize = usize::MAX;

impl Builder {
    fn accept(&mut self, members: &[usize], how: Provenance) {
        let id = self.provenance.len();
        for &i in members {
            assert_eq!(self.owner[i], UNASSIGNED, "point {i} assigned twice");
            self.owner[i] = id;
        }
        self.provenance.push(how);
    }

    /// Every point is either owned by one superpoint or in exactly one pending cluster.
    fn check(&self, pending: &[Pending]) {
        let mut seen: Vec<bool> = self.owner.iter().map(|&o| o != UNASSIGNED).collect();
        for c in pending {
            assert!(!c.members.is_empty(), "empty pending cluster");
            for &i in &c.members {
                assert!(!seen[i], "point {i} in two groups");
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s), "point dropped from the partition");
    }
}

struct Pending {
    members: Vec<usize>,
    from_split: bool,
}

fn gather(y: &[[f64; 2]], members: &[usize]) -> Vec<[f64; 2]> {
    members.iter().map(|&i| y[i]).collect()
}

/// Partitions embedded points into superpoints.
///
/// Linear regions are peeled off first, then clusters are accepted when convex
/// or spectrally single, and split otherwise, for at most `max_rounds` rounds.
pub fn extract_superpoints(
    y: &[[f64; 2]],
    params: &ClusterParams,
    max_rounds: usize,
) -> Result<SuperpointSet> {
    params.validate()?;
    if y.is_empty() {
        return Err(Error::EmptyInput("embedding"));
    }
    if y.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::InvalidInput("embedding has non-finite coordinates".into()));
    }
    let n = y.len();
    let mut b = Builder {
        owner: vec![UNASSIGNED; n],
        provenance: Vec::new(),
    };

    // Steps 1-2: line-like regions inside each Euclidean cluster.
    let initial = euclidean_cluster(y, params.d_e);
    let mut remaining = Vec::with_capacity(n);
    for members in initial.groups() {
        let pts = gather(y, &members);
        let mask = linear_points(&pts, params.r_e, params.t_e);
        let linear: Vec<usize> = (0..members.len()).filter(|&k| mask[k]).collect();
        if !linear.is_empty() {
            let lp: Vec<[f64; 2]> = linear.iter().map(|&k| pts[k]).collect();
            for comp in euclidean_cluster(&lp, params.d_e).groups() {
                let ids: Vec<usize> = comp.iter().map(|&c| members[linear[c]]).collect();
                b.accept(&ids, Provenance::LinearRegion);
            }
        }
        remaining.extend((0..members.len()).filter(|&k| !mask[k]).map(|k| members[k]));
    }
    remaining.sort_unstable();

    // Step 3: regroup what is left.
    let rest = euclidean_cluster(&gather(y, &remaining), params.d_e);
    let mut pending: Vec<Pending> = rest
        .groups()
        .into_iter()
        .map(|g| Pending {
            members: g.into_iter().map(|k| remaining[k]).collect(),
            from_split: false,
        })
        .collect();
    b.check(&pending);

    // Steps 4-7.
    let mut rounds = 0;
    while !pending.is_empty() && rounds < max_rounds {
        rounds += 1;
        let mut next = Vec::new();
        for cluster in pending {
            if cluster.members.len() < MIN_CLUSTER {
                b.accept(&cluster.members, Provenance::Residual);
                continue;
            }
            let pts = gather(y, &cluster.members);
            let convex = match solidity(&pts, params.alpha()) {
                Ok(s) => s > params.s_e,
                Err(Error::DegenerateGeometry(_)) => true,
                Err(e) => return Err(e),
            };
            if convex {
                let how = if cluster.from_split {
                    Provenance::SpectralSplit
                } else {
                    Provenance::SolidCluster
                };
                b.accept(&cluster.members, how);
                continue;
            }
            let analysis = SpectralAnalysis::new(&pts, params)?;
            let k = analysis.near_zero_count(params.t_s).min(pts.len());
            if k == 1 {
                b.accept(&cluster.members, Provenance::SpectralLeaf);
                continue;
            }
            let split = if k == pts.len() {
                spectral_partition(&pts, k, params)?
            } else {
                analysis.partition(k, params.kmeans_restarts, params.seed)?
            };
            for g in split.groups() {
                next.push(Pending {
                    members: g.into_iter().map(|k| cluster.members[k]).collect(),
                    from_split: true,
                });
            }
        }
        pending = next;
        b.check(&pending);
    }

    let exhausted = !pending.is_empty();
    if exhausted {
        log::warn!(
            "superpoint refinement stopped after {max_rounds} rounds with {} clusters pending",
            pending.len()
        );
        for cluster in pending {
            b.accept(&cluster.members, Provenance::Residual);
        }
    }
    b.check(&[]);
    Ok(SuperpointSet {
        assignments: b.owner,
        provenance: b.provenance,
        exhausted,
    })
}

/// Carries superpoint ids from the embedded cloud to a denser cloud by 1-NN.
pub fn lift_superpoints(
    sp: &SuperpointSet,
    low_res: &PointCloud,
    high_res: &PointCloud,
) -> Result<Vec<usize>> {
    if sp.len() != low_res.len() {
        return Err(Error::InvalidInput(format!(
            "{} superpoint assignments for {} points",
            sp.len(),
            low_res.len()
        )));
    }
    propagate(low_res, &sp.assignments, high_res)
}
