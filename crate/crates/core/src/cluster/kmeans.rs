use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Labeling2D;

const MAX_LLOYD_ITERS: usize = 300;

#[derive(Debug, Clone)]
pub struct KMeans {
    pub labels: Labeling2D,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares.
    pub inertia: f64,
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded k-means++ with `restarts` runs; the lowest inertia wins, earliest on ties.
///
/// Panics if `k` is zero or exceeds the number of rows.
pub fn kmeans(rows: &[Vec<f64>], k: usize, restarts: usize, seed: u64) -> KMeans {
    assert!(k >= 1 && k <= rows.len(), "k = {k} for {} rows", rows.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeans> = None;
    for _ in 0..restarts.max(1) {
        let run = lloyd(rows, plus_plus(rows, k, &mut rng));
        if best.as_ref().map_or(true, |b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    best.expect("at least one restart")
}

fn plus_plus(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq(r, &rows[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(pick);
        for (d, r) in d2.iter_mut().zip(rows) {
            *d = d.min(sq(r, &rows[pick]));
        }
    }
    chosen.into_iter().map(|i| rows[i].clone()).collect()
}

fn lloyd(rows: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> KMeans {
    let k = centroids.len();
    let dim = rows[0].len();
    let mut assign = vec![usize::MAX; rows.len()];
    for _ in 0..MAX_LLOYD_ITERS {
        let mut changed = false;
        for (a, r) in assign.iter_mut().zip(rows) {
            let mut best = (0, f64::INFINITY);
            for (c, cent) in centroids.iter().enumerate() {
                let d = sq(r, cent);
                if d < best.1 {
                    best = (c, d);
                }
            }
            if *a != best.0 {
                *a = best.0;
                changed = true;
            }
        }
        // An empty cluster takes the point farthest from its centroid.
        let mut counts = vec![0usize; k];
        for &a in &assign {
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..rows.len())
                    .filter(|&i| counts[assign[i]] > 1)
                    .max_by(|&i, &j| {
                        sq(&rows[i], &centroids[assign[i]])
                            .total_cmp(&sq(&rows[j], &centroids[assign[j]]))
                            .then(j.cmp(&i))
                    });
                if let Some(i) = far {
                    counts[assign[i]] -= 1;
                    assign[i] = c;
                    counts[c] = 1;
                    changed = true;
                }
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        for (a, r) in assign.iter().zip(rows) {
            for (s, v) in sums[*a].iter_mut().zip(r) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for (cv, s) in centroids[c].iter_mut().zip(&sums[c]) {
                    *cv = s / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = assign
        .iter()
        .zip(rows)
        .map(|(a, r)| sq(r, &centroids[*a]))
        .sum();
    KMeans {
        labels: Labeling2D::from_raw(&assign),
        centroids,
        inertia,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_obvious_groups() {
        let mut rows = Vec::new();
        for i in 0..10 {
            rows.push(vec![i as f64 * 0.01, 0.0]);
            rows.push(vec![5.0 + i as f64 * 0.01, 5.0]);
        }
        let km = kmeans(&rows, 2, 20, 1);
        assert_eq!(km.labels.count(), 2);
        for (i, &l) in km.labels.ids().iter().enumerate() {
            assert_eq!(l, i % 2);
        }
    }

    #[test]
    fn k_equal_n_isolates_every_row() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let km = kmeans(&rows, 6, 5, 3);
        assert_eq!(km.labels.count(), 6);
        assert_eq!(km.inertia, 0.0);
    }

    #[test]
    fn duplicate_rows_still_fill_k_groups() {
        let rows = vec![vec![1.0, 1.0]; 5];
        let km = kmeans(&rows, 3, 2, 0);
        assert_eq!(km.labels.count(), 3);
    }

    #[test]
    fn deterministic_for_seed() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i * 7 % 13) as f64, (i % 5) as f64]).collect();
        let a = kmeans(&rows, 4, 20, 9);
        let b = kmeans(&rows, 4, 20, 9);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.inertia, b.inertia);
    }
}
