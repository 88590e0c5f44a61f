//! Separates the ground-truth leaf points of a plant into individual leaves.

use plantsne::metrics::instance_report;
use plantsne::segment::{instance_segment, InstanceParams};
use plantsne::synth::{generate, PlantSpec};
use plantsne::tsne::TsneConfig;
use plantsne::SemanticClass;

fn main() -> plantsne::Result<()> {
    for bow in [0.0, 0.5] {
        let plant = generate(&PlantSpec { n_leaves: 5, seed: 3, bow, ..PlantSpec::default() })?;
        let leaves = plant.of_class(SemanticClass::Leaf);
        let r = instance_segment(&leaves, &InstanceParams::default(), &TsneConfig::default())?;
        let report = instance_report(r.cloud.instance().expect("instances"), leaves.instance().expect("labeled"))?;
        println!(
            "bow {bow}: {} leaf points, {} embedded, perplexity {}, found {} of {} leaves, SBD {:.3}",
            leaves.len(),
            r.embedding.len(),
            r.perplexity_used,
            report.predicted_instances,
            report.true_instances,
            report.sbd
        );
    }
    Ok(())
}
