//! Reads a settings file with overrides, then writes a labeled synthetic plant.
//!
//! `cargo run --example config_and_synth -- [out.txt]`

use plantsne::config::PipelineConfig;
use plantsne::io::write_cloud;
use plantsne::synth::{generate, PlantSpec};

const SETTINGS: &str = "
[tsne]
perplexity = 40
seed = 3

[superpoint]
d_e = 1.5

[instance]
perplexity = 60
";

fn main() -> plantsne::Result<()> {
    let mut cfg = PipelineConfig::parse(SETTINGS, "inline")?;
    cfg.apply_override("svm.c=0.5")?;
    println!(
        "perplexity {}, d_E {}, r_E {}, C {}",
        cfg.semantic.tsne.perplexity, cfg.semantic.cluster.d_e, cfg.semantic.cluster.r_e, cfg.svm.c
    );
    print!("{}", cfg.to_text());

    let out = std::env::args().nth(1).unwrap_or_else(|| "synthetic_plant.txt".into());
    let plant = generate(&PlantSpec { n_leaves: 7, seed: 1, ..PlantSpec::default() })?;
    write_cloud(out.as_ref(), &plant, None)?;
    println!("wrote {} points to {out}", plant.len());
    Ok(())
}
