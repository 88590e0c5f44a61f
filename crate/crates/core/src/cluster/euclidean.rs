use std::collections::VecDeque;

use super::Labeling2D;
use crate::kdtree::KdTree;

/// Groups points connected by chains of hops strictly shorter than `d_e`.
///
/// Clusters are numbered in discovery order, scanning from the lowest index.
pub fn euclidean_cluster(points: &[[f64; 2]], d_e: f64) -> Labeling2D {
    euclidean_cluster_nd(points, d_e)
}

pub fn euclidean_cluster_nd<const D: usize>(points: &[[f64; D]], d_e: f64) -> Labeling2D {
    let tree = KdTree::new(points);
    let mut ids = vec![usize::MAX; points.len()];
    let mut next = 0;
    let mut queue = VecDeque::new();
    let mut nbrs = Vec::new();
    for seed in 0..points.len() {
        if ids[seed] != usize::MAX {
            continue;
        }
        ids[seed] = next;
        queue.push_back(seed);
        while let Some(i) = queue.pop_front() {
            tree.within_into(&points[i], d_e, &mut nbrs);
            for &j in &nbrs {
                if ids[j] == usize::MAX {
                    ids[j] = next;
                    queue.push_back(j);
                }
            }
        }
        next += 1;
    }
    Labeling2D::from_raw(&ids)
}
