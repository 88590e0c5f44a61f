use nalgebra::{Matrix3, SymmetricEigen};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::kdtree::KdTree;

pub const FEATURE_DIM: usize = 9;
pub const DEFAULT_RADII: [f64; 3] = [4.0, 5.0, 6.0];

/// (anisotropy, planarity, sphericity) for each of three radii.
pub type FeatureVector = [f64; FEATURE_DIM];

/// Covariance eigenvalues in descending order.
pub fn covariance_eigenvalues(points: &[[f64; 3]]) -> [f64; 3] {
    let n = points.len() as f64;
    let mut mean = [0.0; 3];
    for p in points {
        for k in 0..3 {
            mean[k] += p[k];
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut c = Matrix3::zeros();
    for p in points {
        let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        for r in 0..3 {
            for s in 0..3 {
                c[(r, s)] += d[r] * d[s];
            }
        }
    }
    c /= n;
    let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().map(|v| v.max(0.0)).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    [ev[0], ev[1], ev[2]]
}

/// Anisotropy, planarity and sphericity from descending eigenvalues.
pub fn shape_features(l: [f64; 3]) -> [f64; 3] {
    if !(l[0] > 0.0) {
        return [0.0; 3];
    }
    [(l[0] - l[2]) / l[0], (l[1] - l[2]) / l[0], l[2] / l[0]]
}

/// Per-point features over neighborhoods `|x - x_i| < r`, self included.
/// Neighborhoods of fewer than 3 points give zeros.
///
/// Radii must be given in ascending order.
pub fn point_features(cloud: &PointCloud, radii: &[f64; 3]) -> Result<Vec<FeatureVector>> {
    if cloud.is_empty() {
        return Err(Error::EmptyInput("point cloud"));
    }
    if radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) || radii.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::param("radii", format!("{radii:?} must be positive and ascending")));
    }
    let pts: Vec<[f64; 3]> = cloud.points().iter().map(|p| p.to_array()).collect();
    let tree = KdTree::new(&pts);
    let mut nbrs = Vec::new();
    let mut local = Vec::new();
    Ok(pts
        .iter()
        .map(|p| {
            tree.within_into(p, radii[2], &mut nbrs);
            let mut f = [0.0; FEATURE_DIM];
            for (k, &r) in radii.iter().enumerate() {
                local.clear();
                local.extend(
                    nbrs.iter()
                        .map(|&j| pts[j])
                        .filter(|q| crate::kdtree::dist2(p, q) < r * r),
                );
                if local.len() >= 3 {
                    f[3 * k..3 * k + 3].copy_from_slice(&shape_features(covariance_eigenvalues(&local)));
                }
            }
            f
        })
        .collect())
}

/// Per-superpoint mean feature and member count. Superpoints with no member
/// keep a zero vector and count 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpointFeatures {
    pub features: Vec<FeatureVector>,
    pub sizes: Vec<usize>,
}

pub fn superpoint_features(
    per_point: &[FeatureVector],
    ids: &[usize],
    count: usize,
) -> Result<SuperpointFeatures> {
    if per_point.len() != ids.len() {
        return Err(Error::InvalidInput(format!(
            "{} feature vectors for {} superpoint ids",
            per_point.len(),
            ids.len()
        )));
    }
    let mut sums = vec![[0.0; FEATURE_DIM]; count];
    let mut sizes = vec![0usize; count];
    for (f, &s) in per_point.iter().zip(ids) {
        if s >= count {
            return Err(Error::InvalidInput(format!("superpoint id {s} out of range {count}")));
        }
        sizes[s] += 1;
        for (acc, v) in sums[s].iter_mut().zip(f) {
            *acc += v;
        }
    }
    for (sum, &n) in sums.iter_mut().zip(&sizes) {
        if n > 0 {
            for v in sum.iter_mut() {
                *v /= n as f64;
            }
        }
    }
    Ok(SuperpointFeatures { features: sums, sizes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalue_formulas() {
        assert_eq!(shape_features([2.0, 1.0, 1.0]), [0.5, 0.0, 0.5]);
        assert_eq!(shape_features([0.0, 0.0, 0.0]), [0.0; 3]);
    }

    #[test]
    fn line_interior_is_anisotropic() {
        let pts: Vec<[f64; 3]> = (0..200).map(|i| [i as f64 * 0.1, 0.0, 0.0]).collect();
        let cloud = PointCloud::from_arrays(&pts).unwrap();
        let f = point_features(&cloud, &DEFAULT_RADII).unwrap();
        for k in 0..3 {
            assert!((f[100][3 * k] - 1.0).abs() < 1e-12);
            assert!(f[100][3 * k + 1].abs() < 1e-12);
            assert!(f[100][3 * k + 2].abs() < 1e-12);
        }
    }

    #[test]
    fn disk_center_is_planar() {
        let mut pts = vec![[0.0, 0.0, 0.0]];
        for i in -40..=40 {
            for j in -40..=40 {
                let (x, y) = (i as f64 * 0.25, j as f64 * 0.25);
                if (i, j) != (0, 0) && x * x + y * y < 100.0 {
                    pts.push([x, y, 0.0]);
                }
            }
        }
        let f = point_features(&PointCloud::from_arrays(&pts).unwrap(), &DEFAULT_RADII).unwrap();
        for k in 0..3 {
            assert!((f[0][3 * k] - 1.0).abs() < 1e-9);
            assert!((f[0][3 * k + 1] - 1.0).abs() < 1e-9);
            assert!(f[0][3 * k + 2].abs() < 1e-9);
        }
    }

    #[test]
    fn sparse_neighborhood_is_zero() {
        let cloud = PointCloud::from_arrays(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [50.0, 0.0, 0.0]]).unwrap();
        let f = point_features(&cloud, &DEFAULT_RADII).unwrap();
        assert!(f.iter().all(|v| v.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn radius_is_strict() {
        // Neighbors sit exactly at distance 4, so only the 5 and 6 neighborhoods see them.
        let cloud = PointCloud::from_arrays(&[
            [0.0, 0.0, 0.0],
            [4.0, 0.0, 0.0],
            [0.0, 4.0, 0.0],
            [-4.0, 0.0, 0.0],
        ])
        .unwrap();
        let f = point_features(&cloud, &DEFAULT_RADII).unwrap();
        assert_eq!(&f[0][..3], &[0.0; 3]);
        assert!(f[0][3] > 0.0);
    }

    #[test]
    fn superpoint_means() {
        let per_point = vec![[0.0; 9], [1.0; 9], [0.25; 9]];
        let sp = superpoint_features(&per_point, &[0, 0, 1], 3).unwrap();
        assert_eq!(sp.features[0], [0.5; 9]);
        assert_eq!(sp.features[1], [0.25; 9]);
        assert_eq!(sp.sizes, vec![2, 1, 0]);
        assert!(superpoint_features(&per_point, &[0, 0], 3).is_err());
        assert!(superpoint_features(&per_point, &[0, 0, 3], 3).is_err());
    }
}
