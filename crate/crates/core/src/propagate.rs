//! Nearest-neighbor search and label transfer between resolutions.

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};
use crate::kdtree::KdTree;

/// Exact 1-NN index over a fixed reference cloud.
#[derive(Debug, Clone)]
pub struct NearestIndex {
    tree: KdTree<3>,
}

impl NearestIndex {
    pub fn new(reference: &PointCloud) -> Result<Self> {
        if reference.is_empty() {
            return Err(Error::EmptyInput("nearest-neighbor reference"));
        }
        let pts: Vec<[f64; 3]> = reference.points().iter().map(|p| p.to_array()).collect();
        Ok(NearestIndex {
            tree: KdTree::new(&pts),
        })
    }

    /// Index of the closest reference point; ties go to the lowest index.
    pub fn nearest(&self, query: &Point3) -> usize {
        self.tree
            .nearest(&query.to_array())
            .map(|(i, _)| i)
            .expect("reference is non-empty")
    }
}

/// Index of the point in `reference` closest to `query`.
pub fn knn_1(query: &Point3, reference: &PointCloud) -> Result<usize> {
    Ok(NearestIndex::new(reference)?.nearest(query))
}

/// Gives each high-resolution point the label of its nearest low-resolution point.
pub fn propagate<T: Copy>(
    low_res: &PointCloud,
    labels: &[T],
    high_res: &PointCloud,
) -> Result<Vec<T>> {
    if labels.len() != low_res.len() {
        return Err(Error::InvalidInput(format!(
            "{} labels for {} low-resolution points",
            labels.len(),
            low_res.len()
        )));
    }
    let index = NearestIndex::new(low_res)?;
    Ok(high_res
        .points()
        .iter()
        .map(|p| labels[index.nearest(p)])
        .collect())
}

/// Copies every label layer present on `low_res` onto `high_res` by 1-NN.
pub fn propagate_labels(low_res: &PointCloud, high_res: &PointCloud) -> Result<PointCloud> {
    if low_res.semantic().is_none() && low_res.instance().is_none() {
        return Err(Error::InvalidInput(
            "low-resolution cloud carries no labels to propagate".into(),
        ));
    }
    let index = NearestIndex::new(low_res)?;
    let nn: Vec<usize> = high_res.points().iter().map(|p| index.nearest(p)).collect();
    let mut out = high_res.clone().clear_labels();
    if let Some(s) = low_res.semantic() {
        out = out.with_semantic(nn.iter().map(|&i| s[i]).collect())?;
    }
    if let Some(s) = low_res.instance() {
        out = out.with_instance(nn.iter().map(|&i| s[i]).collect())?;
    }
    Ok(out)
}
