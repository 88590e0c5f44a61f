use crate::kdtree::KdTree;

/// Eigenvalues `(small, large)` of the 2x2 covariance of `points`.
pub fn eigen_ratio_2d(points: &[[f64; 2]]) -> (f64, f64) {
    let n = points.len() as f64;
    let (mut mx, mut my) = (0.0, 0.0);
    for p in points {
        mx += p[0];
        my += p[1];
    }
    mx /= n;
    my /= n;
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for p in points {
        let dx = p[0] - mx;
        let dy = p[1] - my;
        a += dx * dx;
        b += dx * dy;
        c += dy * dy;
    }
    a /= n;
    b /= n;
    c /= n;
    let mean = 0.5 * (a + c);
    let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    ((mean - disc).max(0.0), mean + disc)
}

/// Marks line-like points: local PCA over the neighbors within `r_e`
/// (self included) gives `small / large < t_e`. Points with fewer than three
/// neighbors are never line-like.
pub fn linear_points(points: &[[f64; 2]], r_e: f64, t_e: f64) -> Vec<bool> {
    let tree = KdTree::new(points);
    let mut nbrs = Vec::new();
    let mut local = Vec::new();
    points
        .iter()
        .map(|p| {
            tree.within_into(p, r_e, &mut nbrs);
            if nbrs.len() < 3 {
                return false;
            }
            local.clear();
            local.extend(nbrs.iter().map(|&j| points[j]));
            let (small, large) = eigen_ratio_2d(&local);
            large > 0.0 && small / large < t_e
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn collinear_points_are_linear() {
        let d_e = 1.0;
        let pts: Vec<[f64; 2]> = (0..50).map(|i| [i as f64 * d_e / 2.0, 0.0]).collect();
        let mask = linear_points(&pts, 2.0 * d_e, 0.1);
        assert!(mask.iter().all(|&m| m));
    }

    #[test]
    fn disk_sample_is_not_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut pts = Vec::new();
        while pts.len() < 800 {
            let p = [rng.gen::<f64>() * 20.0 - 10.0, rng.gen::<f64>() * 20.0 - 10.0];
            if p[0] * p[0] + p[1] * p[1] < 100.0 {
                pts.push(p);
            }
        }
        let mask = linear_points(&pts, 2.0, 0.1);
        let frac = mask.iter().filter(|&&m| m).count() as f64 / pts.len() as f64;
        assert!(frac < 0.05, "{frac}");
    }

    #[test]
    fn isolated_point_is_not_linear() {
        let mask = linear_points(&[[0.0, 0.0], [10.0, 0.0], [20.0, 0.0]], 2.0, 0.1);
        assert_eq!(mask, vec![false; 3]);
    }

    #[test]
    fn eigenvalues_of_axis_aligned_spread() {
        let (s, l) = eigen_ratio_2d(&[[-1.0, 0.0], [1.0, 0.0], [0.0, -0.5], [0.0, 0.5]]);
        assert!((l - 0.5).abs() < 1e-15);
        assert!((s - 0.125).abs() < 1e-15);
    }
}
