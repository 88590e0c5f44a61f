//! Point-cloud data model.

use crate::error::{Error, Result};

/// A point in the dataset's native length unit.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance_squared(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        self.distance_squared(other).sqrt()
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

/// Organ category. The discriminant is the on-disk class id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SemanticClass {
    Leaf = 0,
    Stem = 1,
}

impl SemanticClass {
    pub const ALL: [SemanticClass; 2] = [SemanticClass::Leaf, SemanticClass::Stem];

    pub fn id(self) -> u32 {
        self as u32
    }

    pub fn from_id(id: u32) -> Option<Self> {
        match id {
            0 => Some(SemanticClass::Leaf),
            1 => Some(SemanticClass::Stem),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SemanticClass::Leaf => "leaf",
            SemanticClass::Stem => "stem",
        }
    }
}

/// Ordered point set with optional per-point labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point3>,
    semantic: Option<Vec<SemanticClass>>,
    instance: Option<Vec<u32>>,
}

impl PointCloud {
    /// Builds an unlabeled cloud. Fails on non-finite coordinates.
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "point {i} has a non-finite coordinate"
            )));
        }
        Ok(PointCloud {
            points,
            semantic: None,
            instance: None,
        })
    }

    pub fn from_arrays(points: &[[f64; 3]]) -> Result<Self> {
        Self::new(points.iter().copied().map(Point3::from).collect())
    }

    pub fn with_semantic(mut self, labels: Vec<SemanticClass>) -> Result<Self> {
        self.check_len("semantic", labels.len())?;
        self.semantic = Some(labels);
        Ok(self)
    }

    pub fn with_instance(mut self, labels: Vec<u32>) -> Result<Self> {
        self.check_len("instance", labels.len())?;
        self.instance = Some(labels);
        Ok(self)
    }

    fn check_len(&self, what: &str, n: usize) -> Result<()> {
        if n != self.points.len() {
            return Err(Error::InvalidInput(format!(
                "{what} label count {n} does not match point count {}",
                self.points.len()
            )));
        }
        Ok(())
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn semantic(&self) -> Option<&[SemanticClass]> {
        self.semantic.as_deref()
    }

    pub fn instance(&self) -> Option<&[u32]> {
        self.instance.as_deref()
    }

    pub fn clear_labels(mut self) -> Self {
        self.semantic = None;
        self.instance = None;
        self
    }

    /// Keeps the points selected by `keep`, carrying their labels along.
    pub fn select(&self, keep: impl Fn(usize) -> bool) -> PointCloud {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        self.subset(&idx)
    }

    /// Cloud made of the given indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            semantic: self
                .semantic
                .as_ref()
                .map(|s| indices.iter().map(|&i| s[i]).collect()),
            instance: self
                .instance
                .as_ref()
                .map(|s| indices.iter().map(|&i| s[i]).collect()),
        }
    }

    /// Points whose semantic label equals `class`. Unlabeled clouds yield an empty cloud.
    pub fn of_class(&self, class: SemanticClass) -> PointCloud {
        match &self.semantic {
            Some(s) => self.select(|i| s[i] == class),
            None => self.subset(&[]),
        }
    }

    /// Applies a rigid motion `p -> R p + t`.
    pub fn transformed(&self, rotation: &[[f64; 3]; 3], translation: [f64; 3]) -> PointCloud {
        let points = self
            .points
            .iter()
            .map(|p| {
                let a = p.to_array();
                let mut out = [0.0; 3];
                for (r, o) in out.iter_mut().enumerate() {
                    *o = rotation[r][0] * a[0]
                        + rotation[r][1] * a[1]
                        + rotation[r][2] * a[2]
                        + translation[r];
                }
                Point3::from(out)
            })
            .collect();
        PointCloud {
            points,
            semantic: self.semantic.clone(),
            instance: self.instance.clone(),
        }
    }

    /// Axis-aligned bounds `(min, max)`, or `None` for an empty cloud.
    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| {
            (
                Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z)),
                Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z)),
            )
        }))
    }
}
