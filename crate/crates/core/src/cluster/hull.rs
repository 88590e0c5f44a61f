//! Convex hull, alpha-shape boundary and solidity.

use delaunator::{triangulate, Point, EMPTY};

use crate::error::{Error, Result};

/// Signed area by the shoelace formula; counter-clockwise polygons are positive.
pub fn polygon_area(polygon: &[[f64; 2]]) -> f64 {
    let n = polygon.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        s += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * s
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull in counter-clockwise order (monotone chain), without
/// collinear boundary points.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Union of the Delaunay triangles whose circumradius is below `alpha`.
#[derive(Debug, Clone)]
pub struct AlphaShape {
    /// Kept triangles as counter-clockwise vertex index triples.
    pub triangles: Vec<[usize; 3]>,
    /// Closed boundary loops (vertex indices); outer loops run counter-clockwise,
    /// holes clockwise.
    pub boundary: Vec<Vec<usize>>,
}

impl AlphaShape {
    /// Area enclosed by the boundary loops (shoelace, holes subtract).
    pub fn area(&self, points: &[[f64; 2]]) -> f64 {
        self.boundary
            .iter()
            .map(|l| polygon_area(&l.iter().map(|&i| points[i]).collect::<Vec<_>>()))
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }
}

fn circumradius(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    let ab = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let bc = ((b[0] - c[0]).powi(2) + (b[1] - c[1]).powi(2)).sqrt();
    let ca = ((c[0] - a[0]).powi(2) + (c[1] - a[1]).powi(2)).sqrt();
    let area2 = cross(a, b, c).abs();
    if area2 == 0.0 {
        return f64::INFINITY;
    }
    ab * bc * ca / (2.0 * area2)
}

pub fn alpha_shape(points: &[[f64; 2]], alpha: f64) -> AlphaShape {
    let pts: Vec<Point> = points.iter().map(|p| Point { x: p[0], y: p[1] }).collect();
    let tri = triangulate(&pts);
    let ntri = tri.triangles.len() / 3;
    let mut kept = vec![false; ntri];
    let mut triangles = Vec::new();
    for t in 0..ntri {
        let [a, b, c] = [tri.triangles[3 * t], tri.triangles[3 * t + 1], tri.triangles[3 * t + 2]];
        if circumradius(points[a], points[b], points[c]) < alpha {
            kept[t] = true;
            triangles.push(if cross(points[a], points[b], points[c]) > 0.0 {
                [a, b, c]
            } else {
                [a, c, b]
            });
        }
    }

    // Directed boundary edges, oriented with their triangle's counter-clockwise winding.
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for e in 0..tri.triangles.len() {
        let t = e / 3;
        if !kept[t] {
            continue;
        }
        let twin = tri.halfedges[e];
        if twin != EMPTY && kept[twin / 3] {
            continue;
        }
        let from = tri.triangles[e];
        let to = tri.triangles[if e % 3 == 2 { e - 2 } else { e + 1 }];
        let third = tri.triangles[3 * t + (e % 3 + 2) % 3];
        if cross(points[from], points[to], points[third]) > 0.0 {
            edges.push((from, to));
        } else {
            edges.push((to, from));
        }
    }

    AlphaShape {
        triangles,
        boundary: chain_loops(edges),
    }
}

/// Links directed edges into closed loops. A vertex shared by several loops
/// simply has several outgoing edges; any pairing still closes every loop.
fn chain_loops(mut edges: Vec<(usize, usize)>) -> Vec<Vec<usize>> {
    edges.sort_unstable();
    let mut used = vec![false; edges.len()];
    let mut loops = Vec::new();
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let origin = edges[start].0;
        let mut polygon = vec![origin];
        let mut at = edges[start].1;
        while at != origin {
            polygon.push(at);
            let lo = edges.partition_point(|e| e.0 < at);
            let next = (lo..edges.len())
                .take_while(|&k| edges[k].0 == at)
                .find(|&k| !used[k]);
            match next {
                Some(k) => {
                    used[k] = true;
                    at = edges[k].1;
                }
                None => break,
            }
        }
        loops.push(polygon);
    }
    loops
}

/// Area of the alpha-shape boundary polygon divided by the convex-hull area.
///
/// Falls back to 1 when the alpha shape keeps no triangle.
pub fn solidity(points: &[[f64; 2]], alpha: f64) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "solidity needs at least 3 points, got {}",
            points.len()
        )));
    }
    let hull = convex_hull(points);
    let hull_area = polygon_area(&hull);
    let extent = hull
        .iter()
        .flat_map(|p| hull.iter().map(move |q| (p[0] - q[0]).abs().max((p[1] - q[1]).abs())))
        .fold(0.0f64, f64::max);
    if hull.len() < 3 || hull_area <= 1e-12 * extent * extent {
        return Err(Error::DegenerateGeometry("points are collinear".into()));
    }
    let shape = alpha_shape(points, alpha);
    if shape.is_empty() {
        return Ok(1.0);
    }
    let area = shape.area(points);
    if !(area > 0.0) {
        return Ok(1.0);
    }
    Ok((area / hull_area).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(region: impl Fn(f64, f64) -> bool, lo: f64, hi: f64, n: usize, seed: u64) -> Vec<[f64; 2]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let x = rng.gen_range(lo..hi);
            let y = rng.gen_range(lo..hi);
            if region(x, y) {
                out.push([x, y]);
            }
        }
        out
    }

    #[test]
    fn shoelace_exact_polygons() {
        let square = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert_eq!(polygon_area(&square), 1.0);
        let plus = [
            [1.0, 0.0], [2.0, 0.0], [2.0, 1.0], [3.0, 1.0], [3.0, 2.0], [2.0, 2.0],
            [2.0, 3.0], [1.0, 3.0], [1.0, 2.0], [0.0, 2.0], [0.0, 1.0], [1.0, 1.0],
        ];
        assert_eq!(polygon_area(&plus), 5.0);
        assert_eq!(polygon_area(&convex_hull(&plus)), 7.0);
        let ell = [[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]];
        assert_eq!(polygon_area(&ell), 3.0);
        assert_eq!(polygon_area(&convex_hull(&ell)), 3.5);
    }

    #[test]
    fn hull_drops_interior_and_collinear_points() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0], [1.0, 1.0]];
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
        assert_eq!(polygon_area(&h), 4.0);
    }

    #[test]
    fn square_is_solid() {
        let pts = sample(|_, _| true, 0.0, 1.0, 4000, 1);
        let s = solidity(&pts, 0.1).unwrap();
        assert!((s - 1.0).abs() < 0.05, "{s}");
    }

    #[test]
    fn plus_sign_solidity() {
        let inside = |x: f64, y: f64| (1.0..2.0).contains(&x) || (1.0..2.0).contains(&y);
        let pts = sample(inside, 0.0, 3.0, 20000, 2);
        let s = solidity(&pts, 0.1).unwrap();
        assert!((s - 5.0 / 7.0).abs() < 0.05, "{s}");
    }

    #[test]
    fn l_shape_solidity() {
        let inside = |x: f64, y: f64| x < 1.0 || y < 1.0;
        let pts = sample(inside, 0.0, 2.0, 12000, 3);
        let s = solidity(&pts, 0.1).unwrap();
        assert!((s - 3.0 / 3.5).abs() < 0.05, "{s}");
    }

    #[test]
    fn boundary_area_equals_triangle_sum() {
        let inside = |x: f64, y: f64| (x - 1.0).powi(2) + (y - 1.0).powi(2) > 0.16;
        let pts = sample(inside, 0.0, 2.0, 3000, 4);
        let shape = alpha_shape(&pts, 0.12);
        let tri_sum: f64 = shape
            .triangles
            .iter()
            .map(|t| polygon_area(&[pts[t[0]], pts[t[1]], pts[t[2]]]))
            .sum();
        assert!(shape.triangles.iter().all(|t| polygon_area(&[pts[t[0]], pts[t[1]], pts[t[2]]]) > 0.0));
        assert!((shape.area(&pts) - tri_sum).abs() < 1e-9);
        // The hole around (1, 1) must appear as a clockwise loop.
        assert!(shape
            .boundary
            .iter()
            .any(|l| polygon_area(&l.iter().map(|&i| pts[i]).collect::<Vec<_>>()) < 0.0));
    }

    #[test]
    fn collinear_input_is_degenerate() {
        let pts: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, 2.0 * i as f64]).collect();
        assert!(matches!(solidity(&pts, 1.0), Err(Error::DegenerateGeometry(_))));
        assert!(solidity(&pts[..2], 1.0).is_err());
    }

    #[test]
    fn tiny_alpha_falls_back_to_convex() {
        let pts = sample(|_, _| true, 0.0, 1.0, 200, 5);
        assert_eq!(solidity(&pts, 1e-6).unwrap(), 1.0);
    }
}
