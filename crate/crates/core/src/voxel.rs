//! Voxel-grid average filtering.

use std::collections::HashMap;

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};

/// Smallest voxel edge the under-population rule will shrink to.
pub const MIN_VOXEL_SIZE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelParams {
    /// Voxel edge length.
    pub v: f64,
    /// If fewer voxels than this are occupied, `v` is halved until the floor is met.
    pub min_points: usize,
}

impl Default for VoxelParams {
    fn default() -> Self {
        VoxelParams {
            v: 1.0,
            min_points: 1000,
        }
    }
}

impl VoxelParams {
    pub fn new(v: f64, min_points: usize) -> Result<Self> {
        let p = VoxelParams { v, min_points };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v > 0.0 && self.v.is_finite()) {
            return Err(Error::param("v", format!("must be positive, got {}", self.v)));
        }
        if self.min_points == 0 {
            return Err(Error::param("min_points", "must be at least 1"));
        }
        Ok(())
    }
}

/// Output of [`voxel_downsample`].
#[derive(Debug, Clone)]
pub struct Downsampled {
    /// One centroid per occupied voxel, ordered by first occupant in the input.
    pub cloud: PointCloud,
    /// For each input point, the index of its voxel's centroid in `cloud`.
    pub index_map: Vec<usize>,
    /// Edge length actually used after any halving.
    pub voxel_size: f64,
}

/// Replaces the points of every occupied voxel by their centroid.
///
/// A point with coordinate `c` falls in cell `floor(c / v)` on each axis, so
/// points on a face belong to the higher cell.
pub fn voxel_downsample(cloud: &PointCloud, params: VoxelParams) -> Result<Downsampled> {
    params.validate()?;
    if cloud.is_empty() {
        return Err(Error::EmptyInput("cannot downsample an empty cloud"));
    }
    let mut v = params.v;
    let mut out = bin(cloud.points(), v)?;
    while out.0.len() < params.min_points
        && out.0.len() < cloud.len()
        && v / 2.0 >= MIN_VOXEL_SIZE
    {
        v /= 2.0;
        out = bin(cloud.points(), v)?;
    }
    if out.0.len() < params.min_points {
        log::debug!(
            "voxel floor not met: {} voxels at v={v} for {} points",
            out.0.len(),
            cloud.len()
        );
    }
    Ok(Downsampled {
        cloud: PointCloud::new(out.0)?,
        index_map: out.1,
        voxel_size: v,
    })
}

fn bin(points: &[Point3], v: f64) -> Result<(Vec<Point3>, Vec<usize>)> {
    let mut cells: HashMap<[i64; 3], usize> = HashMap::new();
    let mut sums: Vec<([f64; 3], usize)> = Vec::new();
    let mut index_map = Vec::with_capacity(points.len());
    for p in points {
        let key = [cell(p.x, v)?, cell(p.y, v)?, cell(p.z, v)?];
        let idx = *cells.entry(key).or_insert_with(|| {
            sums.push(([0.0; 3], 0));
            sums.len() - 1
        });
        let s = &mut sums[idx];
        s.0[0] += p.x;
        s.0[1] += p.y;
        s.0[2] += p.z;
        s.1 += 1;
        index_map.push(idx);
    }
    let centroids = sums
        .into_iter()
        .map(|(s, n)| {
            let n = n as f64;
            Point3::new(s[0] / n, s[1] / n, s[2] / n)
        })
        .collect();
    Ok((centroids, index_map))
}

fn cell(c: f64, v: f64) -> Result<i64> {
    let k = (c / v).floor();
    if !k.is_finite() || k.abs() > (i64::MAX / 2) as f64 {
        return Err(Error::InvalidInput(format!(
            "coordinate {c} out of range for voxel size {v}"
        )));
    }
    Ok(k as i64)
}
