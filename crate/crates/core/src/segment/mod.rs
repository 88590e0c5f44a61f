//! Leaf/stem classification of superpoints and leaf instance segmentation.

mod features;
mod instance;
mod svm;

pub use features::{
    covariance_eigenvalues, point_features, shape_features, superpoint_features, FeatureVector,
    SuperpointFeatures, DEFAULT_RADII, FEATURE_DIM,
};
pub use instance::{instance_segment, InstanceParams, InstanceResult};
pub use svm::{fit_svm, majority_labels, SvmModel, SvmParams, SvmTraining};

use crate::cloud::{PointCloud, SemanticClass};
use crate::cluster::ClusterParams;
use crate::error::{Error, Result};
use crate::superpoint::{extract_superpoints, lift_superpoints, SuperpointSet, DEFAULT_MAX_ROUNDS};
use crate::tsne::{embed, Embedding, TsneConfig};
use crate::voxel::{voxel_downsample, Downsampled, VoxelParams};

/// Settings for turning a cloud into described superpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticParams {
    pub voxel: VoxelParams,
    pub tsne: TsneConfig,
    pub cluster: ClusterParams,
    pub max_rounds: usize,
    pub radii: [f64; 3],
}

impl Default for SemanticParams {
    fn default() -> Self {
        SemanticParams {
            voxel: VoxelParams::default(),
            tsne: TsneConfig::default(),
            cluster: ClusterParams::default(),
            max_rounds: DEFAULT_MAX_ROUNDS,
            radii: DEFAULT_RADII,
        }
    }
}

/// Everything computed for one cloud before classification.
#[derive(Debug, Clone)]
pub struct SuperpointAnalysis {
    pub downsampled: Downsampled,
    pub embedding: Embedding,
    pub superpoints: SuperpointSet,
    /// Superpoint id of every input point.
    pub lifted: Vec<usize>,
    pub features: SuperpointFeatures,
}

/// Downsample, embed, extract superpoints, lift them and describe each one.
pub fn analyze(cloud: &PointCloud, params: &SemanticParams) -> Result<SuperpointAnalysis> {
    let downsampled = voxel_downsample(cloud, params.voxel)?;
    let embedding = embed(&downsampled.cloud, &params.tsne)?;
    let superpoints = extract_superpoints(&embedding.y, &params.cluster, params.max_rounds)?;
    let lifted = lift_superpoints(&superpoints, &downsampled.cloud, cloud)?;
    let per_point = point_features(cloud, &params.radii)?;
    let features = superpoint_features(&per_point, &lifted, superpoints.count())?;
    Ok(SuperpointAnalysis {
        downsampled,
        embedding,
        superpoints,
        lifted,
        features,
    })
}

/// Training samples from one labeled cloud: one per non-empty superpoint,
/// labeled by majority vote.
pub fn training_samples(
    analysis: &SuperpointAnalysis,
    gt: &[SemanticClass],
) -> Result<(Vec<FeatureVector>, Vec<SemanticClass>)> {
    let votes = majority_labels(gt, &analysis.lifted, analysis.superpoints.count())?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (f, label) in analysis.features.features.iter().zip(votes) {
        if let Some(c) = label {
            x.push(*f);
            y.push(c);
        }
    }
    Ok((x, y))
}

/// Labels each superpoint with the model and broadcasts the class to its points.
pub fn classify(
    model: &SvmModel,
    features: &SuperpointFeatures,
    lifted: &[usize],
    high_res: &PointCloud,
) -> Result<PointCloud> {
    if lifted.len() != high_res.len() {
        return Err(Error::InvalidInput(format!(
            "{} superpoint ids for {} points",
            lifted.len(),
            high_res.len()
        )));
    }
    let classes: Vec<SemanticClass> = features.features.iter().map(|f| model.predict(f)).collect();
    let labels = lifted
        .iter()
        .map(|&s| {
            classes
                .get(s)
                .copied()
                .ok_or_else(|| Error::InvalidInput(format!("superpoint id {s} has no features")))
        })
        .collect::<Result<Vec<_>>>()?;
    high_res.clone().clear_labels().with_semantic(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_broadcasts_superpoint_class() {
        let model = SvmModel {
            weights: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            bias: -0.5,
            feature_means: [0.0; FEATURE_DIM],
            feature_stds: [1.0; FEATURE_DIM],
            c: 1.0,
        };
        let mut f = [0.0; FEATURE_DIM];
        f[0] = 1.0;
        let features = SuperpointFeatures {
            features: vec![f, [0.0; FEATURE_DIM]],
            sizes: vec![2, 1],
        };
        let cloud = PointCloud::from_arrays(&[[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]).unwrap();
        let out = classify(&model, &features, &[0, 1, 0], &cloud).unwrap();
        use SemanticClass::*;
        assert_eq!(out.semantic().unwrap(), &[Leaf, Stem, Leaf]);
        assert!(classify(&model, &features, &[0, 5, 0], &cloud).is_err());
    }
}
