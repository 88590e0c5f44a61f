//! Splits a plant's embedding into superpoints and checks how pure they are.

use std::collections::BTreeMap;

use plantsne::pipeline::superpoint_purity;
use plantsne::segment::{analyze, SemanticParams};
use plantsne::synth::{generate, PlantSpec};

fn main() -> plantsne::Result<()> {
    let plant = generate(&PlantSpec { n_leaves: 4, seed: 5, ..PlantSpec::default() })?;
    let a = analyze(&plant, &SemanticParams::default())?;

    let mut by_kind = BTreeMap::new();
    for p in a.superpoints.provenance() {
        *by_kind.entry(p.name()).or_insert(0) += 1;
    }
    println!("{} superpoints over {} embedded points", a.superpoints.count(), a.superpoints.len());
    for (kind, n) in by_kind {
        println!("  {kind}: {n}");
    }
    let gt = plant.semantic().expect("synthetic plants are labeled");
    println!("purity {:.3}", superpoint_purity(&a.lifted, gt, a.superpoints.count()));
    Ok(())
}
