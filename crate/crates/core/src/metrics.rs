//! IoU, mIoU and Symmetric Best Dice.

use std::collections::BTreeMap;
use std::fmt;

use crate::cloud::SemanticClass;
use crate::error::{Error, Result};

fn same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::InvalidInput(format!(
            "prediction has {a} labels, ground truth {b}"
        )));
    }
    Ok(())
}

/// `|pred ∩ gt| / |pred ∪ gt|` for one class; 1 when neither labeling uses it.
pub fn iou(pred: &[SemanticClass], gt: &[SemanticClass], class: SemanticClass) -> Result<f64> {
    same_len(pred.len(), gt.len())?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &g) in pred.iter().zip(gt) {
        let (a, b) = (p == class, g == class);
        inter += usize::from(a && b);
        union += usize::from(a || b);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemanticReport {
    pub iou_leaf: f64,
    pub iou_stem: f64,
    pub miou: f64,
}

pub fn semantic_report(pred: &[SemanticClass], gt: &[SemanticClass]) -> Result<SemanticReport> {
    let iou_leaf = iou(pred, gt, SemanticClass::Leaf)?;
    let iou_stem = iou(pred, gt, SemanticClass::Stem)?;
    Ok(SemanticReport {
        iou_leaf,
        iou_stem,
        miou: 0.5 * (iou_leaf + iou_stem),
    })
}

impl fmt::Display for SemanticReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "iou_leaf={:.6}", self.iou_leaf)?;
        writeln!(f, "iou_stem={:.6}", self.iou_stem)?;
        writeln!(f, "miou={:.6}", self.miou)
    }
}

/// Sizes of every instance and of every (pred, gt) overlap.
struct Overlaps {
    pred: BTreeMap<u32, usize>,
    gt: BTreeMap<u32, usize>,
    joint: BTreeMap<(u32, u32), usize>,
}

fn overlaps(pred: &[u32], gt: &[u32]) -> Overlaps {
    let mut o = Overlaps {
        pred: BTreeMap::new(),
        gt: BTreeMap::new(),
        joint: BTreeMap::new(),
    };
    for (&p, &g) in pred.iter().zip(gt) {
        *o.pred.entry(p).or_default() += 1;
        *o.gt.entry(g).or_default() += 1;
        *o.joint.entry((p, g)).or_default() += 1;
    }
    o
}

fn dice(inter: usize, a: usize, b: usize) -> f64 {
    2.0 * inter as f64 / (a + b) as f64
}

/// Mean over instances of `from` of the best Dice against any instance of `to`.
fn best_dice(from: &BTreeMap<u32, usize>, to: &BTreeMap<u32, usize>, inter: impl Fn(u32, u32) -> usize) -> f64 {
    let total: f64 = from
        .iter()
        .map(|(&a, &na)| {
            to.iter()
                .map(|(&b, &nb)| dice(inter(a, b), na, nb))
                .fold(0.0, f64::max)
        })
        .sum();
    total / from.len() as f64
}

/// Symmetric Best Dice between two instance labelings of the same points.
pub fn sbd(pred: &[u32], gt: &[u32]) -> Result<f64> {
    same_len(pred.len(), gt.len())?;
    if pred.is_empty() {
        return Err(Error::EmptyInput("instance labeling"));
    }
    let o = overlaps(pred, gt);
    let get = |p: u32, g: u32| o.joint.get(&(p, g)).copied().unwrap_or(0);
    let pg = best_dice(&o.pred, &o.gt, get);
    let gp = best_dice(&o.gt, &o.pred, |g, p| get(p, g));
    Ok(pg.min(gp))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceReport {
    pub sbd: f64,
    pub predicted_instances: usize,
    pub true_instances: usize,
}

pub fn instance_report(pred: &[u32], gt: &[u32]) -> Result<InstanceReport> {
    let value = sbd(pred, gt)?;
    let count = |v: &[u32]| v.iter().collect::<std::collections::BTreeSet<_>>().len();
    Ok(InstanceReport {
        sbd: value,
        predicted_instances: count(pred),
        true_instances: count(gt),
    })
}

impl fmt::Display for InstanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "sbd={:.6}", self.sbd)?;
        writeln!(f, "predicted_instances={}", self.predicted_instances)?;
        writeln!(f, "true_instances={}", self.true_instances)
    }
}

/// Parses `name=value` report lines into a map.
pub fn parse_report(text: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let perr = |message: String| Error::Parse { line: no + 1, message };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| perr(format!("expected name=value, found {line:?}")))?;
        let value = v.trim().parse::<f64>().map_err(|e| perr(format!("{k}: {e}")))?;
        out.insert(k.trim().to_string(), value);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use SemanticClass::*;

    #[test]
    fn iou_cases() {
        let a = [Leaf, Leaf, Stem, Stem];
        assert_eq!(iou(&a, &a, Leaf).unwrap(), 1.0);
        assert_eq!(iou(&[Leaf, Leaf], &[Stem, Stem], Leaf).unwrap(), 0.0);
        assert_eq!(iou(&[Stem, Stem], &[Stem, Stem], Leaf).unwrap(), 1.0);
        assert!(iou(&[Leaf], &[Leaf, Leaf], Leaf).is_err());
        // 100 predicted, 100 true, 50 shared.
        let mut pred = vec![Stem; 150];
        let mut gt = vec![Stem; 150];
        pred[..100].fill(Leaf);
        gt[50..].fill(Leaf);
        assert!((iou(&pred, &gt, Leaf).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn report_lines_parse_back() {
        let r = semantic_report(&[Leaf, Stem, Stem], &[Leaf, Leaf, Stem]).unwrap();
        let m = parse_report(&r.to_string()).unwrap();
        assert_eq!(m.len(), 3);
        assert!((m["miou"] - 0.5 * (m["iou_leaf"] + m["iou_stem"])).abs() < 1e-6);
    }

    #[test]
    fn sbd_halved_leaf() {
        let n = 10;
        let gt = vec![7u32; 2 * n];
        let pred: Vec<u32> = (0..2 * n).map(|i| u32::from(i >= n)).collect();
        assert!((sbd(&pred, &gt).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sbd_identity_and_errors() {
        let x = [3, 3, 1, 1, 1, 9];
        assert_eq!(sbd(&x, &x).unwrap(), 1.0);
        assert!(sbd(&[], &[]).is_err());
        assert!(sbd(&[1], &[1, 2]).is_err());
    }

    fn sbd_brute(pred: &[u32], gt: &[u32]) -> f64 {
        let ids = |v: &[u32]| {
            let mut u = v.to_vec();
            u.sort_unstable();
            u.dedup();
            u
        };
        let (pi, gi) = (ids(pred), ids(gt));
        let d = |a: u32, b: u32| {
            let na = pred.iter().filter(|&&p| p == a).count();
            let nb = gt.iter().filter(|&&g| g == b).count();
            let both = pred.iter().zip(gt).filter(|(&p, &g)| p == a && g == b).count();
            2.0 * both as f64 / (na + nb) as f64
        };
        let pg = pi.iter().map(|&a| gi.iter().map(|&b| d(a, b)).fold(0.0, f64::max)).sum::<f64>() / pi.len() as f64;
        let gp = gi.iter().map(|&b| pi.iter().map(|&a| d(a, b)).fold(0.0, f64::max)).sum::<f64>() / gi.len() as f64;
        pg.min(gp)
    }

    #[test]
    fn sbd_matches_exhaustive_dice_table() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.gen_range(1..60);
            let pred: Vec<u32> = (0..n).map(|_| rng.gen_range(0..5)).collect();
            let gt: Vec<u32> = (0..n).map(|_| rng.gen_range(10..14)).collect();
            let a = sbd(&pred, &gt).unwrap();
            assert!((a - sbd_brute(&pred, &gt)).abs() < 1e-12);
            assert!((a - sbd(&gt, &pred).unwrap()).abs() < 1e-15);
        }
    }
}
