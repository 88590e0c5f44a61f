use crate::cloud::PointCloud;
use crate::cluster::euclidean_cluster;
use crate::error::{Error, Result};
use crate::propagate::propagate;
use crate::tsne::{embed, TsneConfig};
use crate::voxel::{voxel_downsample, VoxelParams};

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceParams {
    pub v: f64,
    /// Voxel size is reduced until at least this many points remain.
    pub min_points: usize,
    pub perplexity: f64,
    pub d_e: f64,
}

impl Default for InstanceParams {
    fn default() -> Self {
        InstanceParams {
            v: 1.0,
            min_points: 1000,
            perplexity: 60.0,
            d_e: 2.0,
        }
    }
}

impl InstanceParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("v", self.v), ("perplexity", self.perplexity), ("d_e", self.d_e)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(name, format!("{v} must be positive")));
            }
        }
        Ok(())
    }
}

/// Leaf instances from t-SNE clusters.
#[derive(Debug, Clone)]
pub struct InstanceResult {
    /// Input cloud carrying the instance layer.
    pub cloud: PointCloud,
    pub count: usize,
    /// Embedded downsampled leaf points; empty when the set was too small to embed.
    pub embedding: Vec<[f64; 2]>,
    /// Cluster id of each embedded point.
    pub embedded_ids: Vec<u32>,
    pub perplexity_used: f64,
}

/// Downsamples the leaf points, embeds them, clusters the embedding at `d_e`
/// and lifts cluster ids back to every input point.
///
/// Fewer than 4 points form a single instance. When the downsampled set is
/// too small for the requested perplexity it is lowered to `(N - 1) / 3`.
pub fn instance_segment(
    leaves: &PointCloud,
    params: &InstanceParams,
    tsne: &TsneConfig,
) -> Result<InstanceResult> {
    params.validate()?;
    if leaves.is_empty() {
        return Err(Error::EmptyInput("leaf point set"));
    }
    let base = leaves.clone().clear_labels();
    if leaves.len() < 4 {
        return Ok(InstanceResult {
            cloud: base.with_instance(vec![0; leaves.len()])?,
            count: 1,
            embedding: Vec::new(),
            embedded_ids: Vec::new(),
            perplexity_used: 0.0,
        });
    }
    let low = voxel_downsample(leaves, VoxelParams::new(params.v, params.min_points)?)?;
    let n = low.cloud.len();
    if n < 4 {
        return Ok(InstanceResult {
            cloud: base.with_instance(vec![0; leaves.len()])?,
            count: 1,
            embedding: Vec::new(),
            embedded_ids: Vec::new(),
            perplexity_used: 0.0,
        });
    }
    let cap = (n - 1) as f64 / 3.0;
    let perplexity = if params.perplexity >= (n - 1) as f64 {
        log::warn!(
            "perplexity {} too large for {n} leaf points, using {cap}",
            params.perplexity
        );
        cap
    } else {
        params.perplexity
    };
    let config = TsneConfig {
        perplexity,
        ..tsne.clone()
    };
    let emb = embed(&low.cloud, &config)?;
    let labels = euclidean_cluster(&emb.y, params.d_e);
    let ids = labels.as_u32();
    let lifted = propagate(&low.cloud, &ids, leaves)?;
    Ok(InstanceResult {
        cloud: base.with_instance(lifted)?,
        count: labels.count(),
        embedding: emb.y,
        embedded_ids: ids,
        perplexity_used: perplexity,
    })
}
