//! Embeds three Gaussian blobs in 3D and reports how the KL objective falls.

use plantsne::cluster::euclidean_cluster;
use plantsne::tsne::{embed_points, TsneConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> plantsne::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let centers = [[0.0, 0.0, 0.0], [12.0, 0.0, 0.0], [0.0, 12.0, 6.0]];
    let points: Vec<[f64; 3]> = centers
        .iter()
        .flat_map(|c| (0..80).map(|_| [0, 1, 2].map(|k| c[k] + noise.sample(&mut rng))).collect::<Vec<_>>())
        .collect();

    let emb = embed_points(&points, &TsneConfig::default().with_perplexity(20.0))?;
    for it in [1, 100, 101, 250, 500, 1000] {
        println!("iteration {it:>4}: KL = {:.4}", emb.kl_history[it - 1]);
    }
    for d_e in [2.0, 5.0, 10.0] {
        println!("clusters at d_E = {d_e}: {}", euclidean_cluster(&emb.y, d_e).count());
    }
    Ok(())
}
