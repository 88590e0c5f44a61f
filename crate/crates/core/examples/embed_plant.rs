//! Downsamples a synthetic plant, embeds it and writes a colored scatter plot.
//!
//! `cargo run --release --example embed_plant -- [out.svg]`

use plantsne::cluster::euclidean_cluster;
use plantsne::svg::write_scatter_svg;
use plantsne::synth::{generate, PlantSpec};
use plantsne::tsne::{embed, TsneConfig};
use plantsne::voxel::{voxel_downsample, VoxelParams};

fn main() -> plantsne::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "plant_embedding.svg".into());
    let plant = generate(&PlantSpec { n_leaves: 4, seed: 2, ..PlantSpec::default() })?;
    let low = voxel_downsample(&plant, VoxelParams::default())?;
    println!("{} points -> {} at voxel {}", plant.len(), low.cloud.len(), low.voxel_size);

    let emb = embed(&low.cloud, &TsneConfig::default())?;
    let clusters = euclidean_cluster(&emb.y, 2.0);
    println!("final KL {:.4}, {} clusters", emb.final_kl().unwrap_or(f64::NAN), clusters.count());
    write_scatter_svg(out.as_ref(), &emb.y, clusters.ids(), "synthetic plant")?;
    println!("wrote {out}");
    Ok(())
}
