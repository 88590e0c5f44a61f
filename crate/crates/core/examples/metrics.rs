//! IoU and Symmetric Best Dice on small hand-made labelings.

use plantsne::metrics::{sbd, semantic_report};
use plantsne::SemanticClass::{Leaf, Stem};

fn main() -> plantsne::Result<()> {
    let gt = [Leaf, Leaf, Leaf, Leaf, Stem, Stem];
    let pred = [Leaf, Leaf, Leaf, Stem, Stem, Stem];
    print!("{}", semantic_report(&pred, &gt)?);

    let truth = [1, 1, 1, 1, 2, 2, 2, 2];
    let merged = [0, 0, 0, 0, 0, 0, 0, 0];
    let split = [0, 0, 1, 1, 2, 2, 3, 3];
    println!("sbd exact  = {:.4}", sbd(&truth, &truth)?);
    println!("sbd merged = {:.4}", sbd(&merged, &truth)?);
    println!("sbd split  = {:.4}", sbd(&split, &truth)?);
    Ok(())
}
