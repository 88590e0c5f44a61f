//! Synthetic plants with exact semantic and instance labels.
//!
//! A plant is a vertical cylindrical stem, thin cylindrical petioles leaving
//! it at distinct heights and azimuths, and elliptical blades at the petiole
//! tips. Stem and petioles are class Stem with instance 0; blade `k` is class
//! Leaf with instance `k` (1-based).

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cloud::{Point3, PointCloud, SemanticClass};
use crate::error::{Error, Result};
use crate::kdtree::KdTree;

const AZIMUTH_TRIES: usize = 50;
const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantSpec {
    pub n_leaves: usize,
    /// Blade length range; width is half the length.
    pub leaf_size_range: (f64, f64),
    pub stem_height: f64,
    pub stem_radius: f64,
    pub petiole_length_range: (f64, f64),
    pub petiole_radius: f64,
    /// Quadratic out-of-plane bow of the blades, as a fraction of blade length.
    pub bow: f64,
    pub point_spacing: f64,
    pub noise_std: f64,
    /// Minimum clearance between distinct blades.
    pub leaf_clearance: f64,
    pub seed: u64,
}

impl Default for PlantSpec {
    fn default() -> Self {
        PlantSpec {
            n_leaves: 6,
            leaf_size_range: (14.0, 20.0),
            stem_height: 40.0,
            stem_radius: 1.2,
            petiole_length_range: (6.0, 9.0),
            petiole_radius: 0.5,
            bow: 0.0,
            point_spacing: 0.7,
            noise_std: 0.05,
            leaf_clearance: 3.0,
            seed: 0,
        }
    }
}

impl PlantSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("leaf_size_range.0", self.leaf_size_range.0),
            ("stem_height", self.stem_height),
            ("stem_radius", self.stem_radius),
            ("petiole_length_range.0", self.petiole_length_range.0),
            ("petiole_radius", self.petiole_radius),
            ("point_spacing", self.point_spacing),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if self.leaf_size_range.1 < self.leaf_size_range.0 {
            return Err(Error::param("leaf_size_range", "max below min"));
        }
        if self.petiole_length_range.1 < self.petiole_length_range.0 {
            return Err(Error::param("petiole_length_range", "max below min"));
        }
        if self.point_spacing > self.leaf_size_range.0 / 2.0 {
            return Err(Error::param(
                "point_spacing",
                "must not exceed the smallest blade width",
            ));
        }
        if !(self.noise_std >= 0.0) || !(self.leaf_clearance >= 0.0) || !self.bow.is_finite() {
            return Err(Error::param("noise_std", "noise, clearance and bow must be finite, noise and clearance non-negative"));
        }
        Ok(())
    }
}

struct Leaf {
    attach_height: f64,
    length: f64,
    petiole_length: f64,
    /// Upward tilt of the petiole/blade axis.
    elevation: f64,
}

/// Orthonormal frame of a leaf: `u` outward along the blade, `v` lateral, `n` normal.
struct Frame {
    u: [f64; 3],
    v: [f64; 3],
    n: [f64; 3],
}

fn frame(azimuth: f64, elevation: f64) -> Frame {
    let (sa, ca) = azimuth.sin_cos();
    let (se, ce) = elevation.sin_cos();
    Frame {
        u: [ca * ce, sa * ce, se],
        v: [-sa, ca, 0.0],
        n: [-ca * se, -sa * se, ce],
    }
}

fn axpy(p: [f64; 3], a: f64, d: [f64; 3]) -> [f64; 3] {
    [p[0] + a * d[0], p[1] + a * d[1], p[2] + a * d[2]]
}

/// Samples a labeled plant.
pub fn generate(spec: &PlantSpec) -> Result<PointCloud> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let leaves: Vec<Leaf> = (0..spec.n_leaves)
        .map(|k| {
            let frac = (k as f64 + 0.5) / spec.n_leaves as f64;
            Leaf {
                attach_height: spec.stem_height * (0.25 + 0.7 * frac),
                length: rng.gen_range(spec.leaf_size_range.0..=spec.leaf_size_range.1),
                petiole_length: rng
                    .gen_range(spec.petiole_length_range.0..=spec.petiole_length_range.1),
                elevation: rng.gen_range(0.15..0.45),
            }
        })
        .collect();

    for _ in 0..AZIMUTH_TRIES {
        let start = rng.gen_range(0.0..TAU);
        let azimuths: Vec<f64> = (0..spec.n_leaves)
            .map(|k| start + k as f64 * GOLDEN_ANGLE + rng.gen_range(-0.2..0.2))
            .collect();
        let mut sample_rng = ChaCha8Rng::seed_from_u64(rng.gen());
        let blades: Vec<Vec<[f64; 3]>> = leaves
            .iter()
            .zip(&azimuths)
            .map(|(leaf, &az)| blade_points(spec, leaf, az, &mut sample_rng))
            .collect();
        if blades_clear(&blades, spec.leaf_clearance) {
            return Ok(assemble(spec, &leaves, &azimuths, blades, &mut sample_rng)?);
        }
    }
    Err(Error::InvalidInput(format!(
        "could not place {} leaves without overlap after {AZIMUTH_TRIES} tries",
        spec.n_leaves
    )))
}

fn blades_clear(blades: &[Vec<[f64; 3]>], clearance: f64) -> bool {
    if clearance <= 0.0 {
        return true;
    }
    let trees: Vec<KdTree<3>> = blades.iter().map(|b| KdTree::new(b)).collect();
    for a in 0..blades.len() {
        for b in (a + 1)..blades.len() {
            if blades[b]
                .iter()
                .any(|p| trees[a].nearest(p).is_some_and(|(_, d2)| d2 < clearance * clearance))
            {
                return false;
            }
        }
    }
    true
}

/// Jittered lattice over the ellipse, optionally bowed along its length.
fn blade_points(spec: &PlantSpec, leaf: &Leaf, azimuth: f64, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let f = frame(azimuth, leaf.elevation);
    let base = axpy(
        [0.0, 0.0, leaf.attach_height],
        spec.stem_radius + leaf.petiole_length,
        f.u,
    );
    let a = leaf.length / 2.0;
    let b = leaf.length / 4.0;
    let h = spec.point_spacing;
    let jitter = 0.25 * h;
    let mut out = Vec::new();
    let mut s = -a;
    while s <= a {
        let mut w = -b;
        while w <= b {
            let ss = s + rng.gen_range(-jitter..=jitter);
            let ww = w + rng.gen_range(-jitter..=jitter);
            if (ss / a).powi(2) + (ww / b).powi(2) <= 1.0 {
                let t = ss / a;
                let lift = spec.bow * leaf.length * t * t;
                let p = axpy(axpy(axpy(base, a + ss, f.u), ww, f.v), lift, f.n);
                out.push(p);
            }
            w += h;
        }
        s += h;
    }
    out
}

/// Points on a cylinder of radius `r` around the segment `from + t * dir`, `t in [0, len]`.
fn tube(from: [f64; 3], dir: [f64; 3], len: f64, r: f64, h: f64, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    // Any unit vector orthogonal to dir, then the third axis.
    let helper = if dir[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
    let e1 = normalize(cross(dir, helper));
    let e2 = cross(dir, e1);
    let per_ring = ((TAU * r / h).round() as usize).max(3);
    let rings = ((len / h).round() as usize).max(1);
    let mut out = Vec::with_capacity(per_ring * (rings + 1));
    for k in 0..=rings {
        let t = len * k as f64 / rings as f64;
        let offset = rng.gen_range(0.0..TAU);
        for m in 0..per_ring {
            let th = offset + TAU * m as f64 / per_ring as f64;
            let (s, c) = th.sin_cos();
            let centre = axpy(from, t, dir);
            out.push(axpy(axpy(centre, r * c, e1), r * s, e2));
        }
    }
    out
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

fn assemble(
    spec: &PlantSpec,
    leaves: &[Leaf],
    azimuths: &[f64],
    blades: Vec<Vec<[f64; 3]>>,
    rng: &mut ChaCha8Rng,
) -> Result<PointCloud> {
    let h = spec.point_spacing;
    let mut points: Vec<[f64; 3]> = Vec::new();
    let mut semantic = Vec::new();
    let mut instance = Vec::new();
    let mut push = |pts: Vec<[f64; 3]>, class: SemanticClass, id: u32| {
        semantic.extend(std::iter::repeat(class).take(pts.len()));
        instance.extend(std::iter::repeat(id).take(pts.len()));
        points.extend(pts);
    };

    push(
        tube([0.0; 3], [0.0, 0.0, 1.0], spec.stem_height, spec.stem_radius, h, rng),
        SemanticClass::Stem,
        0,
    );
    for (leaf, &az) in leaves.iter().zip(azimuths) {
        let f = frame(az, leaf.elevation);
        let start = axpy([0.0, 0.0, leaf.attach_height], spec.stem_radius, f.u);
        push(
            tube(start, f.u, leaf.petiole_length, spec.petiole_radius, h, rng),
            SemanticClass::Stem,
            0,
        );
    }
    for (k, blade) in blades.into_iter().enumerate() {
        push(blade, SemanticClass::Leaf, k as u32 + 1);
    }

    if spec.noise_std > 0.0 {
        let normal = Normal::new(0.0, spec.noise_std)
            .map_err(|e| Error::param("noise_std", e.to_string()))?;
        for p in points.iter_mut() {
            for c in p.iter_mut() {
                *c += normal.sample(rng);
            }
        }
    }
    PointCloud::new(points.into_iter().map(Point3::from).collect())?
        .with_semantic(semantic)?
        .with_instance(instance)
}

/// Blade area of an ellipse with the generator's aspect ratio.
pub fn blade_area(length: f64) -> f64 {
    PI * (length / 2.0) * (length / 4.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn no_leaves_is_all_stem() {
        let c = generate(&PlantSpec {
            n_leaves: 0,
            ..PlantSpec::default()
        })
        .unwrap();
        assert!(c.semantic().unwrap().iter().all(|&s| s == SemanticClass::Stem));
        assert!(c.instance().unwrap().iter().all(|&i| i == 0));
    }

    #[test]
    fn two_leaves_two_instances() {
        let c = generate(&PlantSpec {
            n_leaves: 2,
            ..PlantSpec::default()
        })
        .unwrap();
        let ids: BTreeSet<u32> = c
            .semantic()
            .unwrap()
            .iter()
            .zip(c.instance().unwrap())
            .filter(|(s, _)| **s == SemanticClass::Leaf)
            .map(|(_, i)| *i)
            .collect();
        assert_eq!(ids, BTreeSet::from([1, 2]));
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = PlantSpec {
            seed: 7,
            ..PlantSpec::default()
        };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = PlantSpec { seed: 8, ..spec.clone() };
        assert_ne!(generate(&other).unwrap(), generate(&spec).unwrap());
    }

    #[test]
    fn stem_points_lie_on_stem_or_petioles() {
        let spec = PlantSpec {
            noise_std: 0.0,
            ..PlantSpec::default()
        };
        let c = generate(&spec).unwrap();
        for (p, s) in c.points().iter().zip(c.semantic().unwrap()) {
            if *s == SemanticClass::Leaf {
                // Blades start beyond the petiole tip.
                let radial = (p.x * p.x + p.y * p.y).sqrt();
                assert!(radial > spec.stem_radius + spec.petiole_length_range.0 * 0.5);
            }
        }
    }

    #[test]
    fn crowded_spec_fails() {
        let spec = PlantSpec {
            n_leaves: 12,
            stem_height: 5.0,
            leaf_clearance: 50.0,
            ..PlantSpec::default()
        };
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn invalid_spec() {
        let spec = PlantSpec {
            point_spacing: 0.0,
            ..PlantSpec::default()
        };
        assert!(generate(&spec).is_err());
    }
}
