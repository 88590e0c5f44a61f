//! Trains the leaf/stem classifier on three synthetic plants and scores a fourth.

use plantsne::metrics::semantic_report;
use plantsne::segment::{analyze, classify, fit_svm, training_samples, SemanticParams, SvmParams};
use plantsne::synth::{generate, PlantSpec};

fn main() -> plantsne::Result<()> {
    let params = SemanticParams::default();
    let plant = |seed| generate(&PlantSpec { n_leaves: 4, seed, ..PlantSpec::default() });

    let (mut x, mut y) = (Vec::new(), Vec::new());
    for seed in 0..3 {
        let c = plant(seed)?;
        let a = analyze(&c, &params)?;
        let (xs, ys) = training_samples(&a, c.semantic().expect("labeled"))?;
        x.extend(xs);
        y.extend(ys);
    }
    let fit = fit_svm(&x, &y, &SvmParams::default())?;
    println!("{} superpoints, {} SMO steps, converged {}", x.len(), fit.iterations, fit.converged);
    println!("weights {:.3?}", fit.model.weights);

    let test = plant(9)?;
    let a = analyze(&test, &params)?;
    let pred = classify(&fit.model, &a.features, &a.lifted, &test)?;
    print!("{}", semantic_report(pred.semantic().expect("classified"), test.semantic().expect("labeled"))?);
    Ok(())
}
