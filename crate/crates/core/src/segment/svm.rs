//! Two-class linear SVM trained by SMO on the dual problem.

use std::fmt::Write as _;
use std::path::Path;

use super::features::{FeatureVector, FEATURE_DIM};
use crate::cloud::SemanticClass;
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SvmParams {
    /// Hinge-loss weight.
    pub c: f64,
    /// Stop once the maximal KKT violation drops below this.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            tolerance: 1e-6,
            max_iter: 1_000_000,
        }
    }
}

/// Linear decision function over standardized features. Positive means Leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub weights: FeatureVector,
    pub bias: f64,
    pub feature_means: FeatureVector,
    pub feature_stds: FeatureVector,
    pub c: f64,
}

#[derive(Debug, Clone)]
pub struct SvmTraining {
    pub model: SvmModel,
    /// Dual objective `1/2 a'Qa - sum(a)` after every SMO step.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn sign(class: SemanticClass) -> f64 {
    match class {
        SemanticClass::Leaf => 1.0,
        SemanticClass::Stem => -1.0,
    }
}

impl SvmModel {
    pub fn standardize(&self, f: &FeatureVector) -> FeatureVector {
        let mut out = [0.0; FEATURE_DIM];
        for k in 0..FEATURE_DIM {
            out[k] = (f[k] - self.feature_means[k]) / self.feature_stds[k];
        }
        out
    }

    pub fn decision(&self, f: &FeatureVector) -> f64 {
        let z = self.standardize(f);
        self.weights.iter().zip(&z).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    /// A decision value of exactly zero goes to Leaf.
    pub fn predict(&self, f: &FeatureVector) -> SemanticClass {
        if self.decision(f) >= 0.0 {
            SemanticClass::Leaf
        } else {
            SemanticClass::Stem
        }
    }

    /// `1/2 |w|^2 + C sum hinge` on the given samples.
    pub fn primal_objective(&self, x: &[FeatureVector], y: &[SemanticClass]) -> f64 {
        let reg = 0.5 * self.weights.iter().map(|w| w * w).sum::<f64>();
        let loss: f64 = x
            .iter()
            .zip(y)
            .map(|(f, &c)| (1.0 - sign(c) * self.decision(f)).max(0.0))
            .sum();
        reg + self.c * loss
    }

    pub fn to_text(&self) -> String {
        let join = |v: &FeatureVector| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::from("# plantsne linear svm\n");
        writeln!(s, "c={}", self.c).unwrap();
        writeln!(s, "bias={}", self.bias).unwrap();
        writeln!(s, "weights={}", join(&self.weights)).unwrap();
        writeln!(s, "means={}", join(&self.feature_means)).unwrap();
        writeln!(s, "stds={}", join(&self.feature_stds)).unwrap();
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = None;
        let mut bias = None;
        let mut weights = None;
        let mut means = None;
        let mut stds = None;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |message: String| Error::Parse { line: no + 1, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| perr(format!("expected key=value, found {line:?}")))?;
            let scalar = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| perr(format!("{key}: {e}")))
            };
            let vector = |v: &str| -> Result<FeatureVector> {
                let parts: Vec<&str> = v.split(',').collect();
                if parts.len() != FEATURE_DIM {
                    return Err(perr(format!("{key}: expected {FEATURE_DIM} values, found {}", parts.len())));
                }
                let mut out = [0.0; FEATURE_DIM];
                for (o, p) in out.iter_mut().zip(parts) {
                    *o = scalar(p)?;
                }
                Ok(out)
            };
            match key.trim() {
                "c" => c = Some(scalar(value)?),
                "bias" => bias = Some(scalar(value)?),
                "weights" => weights = Some(vector(value)?),
                "means" => means = Some(vector(value)?),
                "stds" => stds = Some(vector(value)?),
                other => return Err(perr(format!("unknown key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::InvalidInput(format!("model file lacks {k}"));
        let model = SvmModel {
            c: c.ok_or_else(|| missing("c"))?,
            bias: bias.ok_or_else(|| missing("bias"))?,
            weights: weights.ok_or_else(|| missing("weights"))?,
            feature_means: means.ok_or_else(|| missing("means"))?,
            feature_stds: stds.ok_or_else(|| missing("stds"))?,
        };
        if model.feature_stds.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidInput("model stds must be positive".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Majority ground-truth class of each superpoint; exact ties go to Leaf.
/// Superpoints without members get `None`.
pub fn majority_labels(
    gt: &[SemanticClass],
    ids: &[usize],
    count: usize,
) -> Result<Vec<Option<SemanticClass>>> {
    if gt.len() != ids.len() {
        return Err(Error::InvalidInput(format!(
            "{} labels for {} superpoint ids",
            gt.len(),
            ids.len()
        )));
    }
    let mut votes = vec![[0usize; 2]; count];
    for (&c, &s) in gt.iter().zip(ids) {
        if s >= count {
            return Err(Error::InvalidInput(format!("superpoint id {s} out of range {count}")));
        }
        votes[s][c.id() as usize] += 1;
    }
    Ok(votes
        .into_iter()
        .map(|[leaf, stem]| match (leaf, stem) {
            (0, 0) => None,
            (l, s) if l >= s => Some(SemanticClass::Leaf),
            _ => Some(SemanticClass::Stem),
        })
        .collect())
}

/// Trains on raw (unstandardized) features.
pub fn fit_svm(x: &[FeatureVector], y: &[SemanticClass], params: &SvmParams) -> Result<SvmTraining> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!("{} samples, {} labels", x.len(), y.len())));
    }
    if !(params.c > 0.0) || !(params.tolerance > 0.0) {
        return Err(Error::param("c", "C and tolerance must be positive"));
    }
    if !y.contains(&SemanticClass::Leaf) || !y.contains(&SemanticClass::Stem) {
        return Err(Error::Training("training set needs both Leaf and Stem samples".into()));
    }
    let n = x.len();
    let mut means = [0.0; FEATURE_DIM];
    let mut stds = [0.0; FEATURE_DIM];
    for k in 0..FEATURE_DIM {
        means[k] = x.iter().map(|f| f[k]).sum::<f64>() / n as f64;
        let var = x.iter().map(|f| (f[k] - means[k]).powi(2)).sum::<f64>() / n as f64;
        stds[k] = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    }
    let mut scaled = SvmModel {
        weights: [0.0; FEATURE_DIM],
        bias: 0.0,
        feature_means: means,
        feature_stds: stds,
        c: params.c,
    };
    let z: Vec<FeatureVector> = x.iter().map(|f| scaled.standardize(f)).collect();
    let ys: Vec<f64> = y.iter().map(|&c| sign(c)).collect();
    let dot = |a: &FeatureVector, b: &FeatureVector| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let q: Vec<f64> = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            ys[i] * ys[j] * dot(&z[i], &z[j])
        })
        .collect();
    let sol = smo(&q, &ys, params);
    for i in 0..n {
        for k in 0..FEATURE_DIM {
            scaled.weights[k] += sol.alpha[i] * ys[i] * z[i][k];
        }
    }
    scaled.bias = -sol.rho;
    Ok(SvmTraining {
        model: scaled,
        objective_history: sol.history,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}

struct Solution {
    alpha: Vec<f64>,
    rho: f64,
    history: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Minimizes `1/2 a'Qa - e'a` subject to `0 <= a <= C`, `y'a = 0`, using
/// second-order working-set selection.
fn smo(q: &[f64], y: &[f64], params: &SvmParams) -> Solution {
    let n = y.len();
    let c = params.c;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let objective = |alpha: &[f64], grad: &[f64]| -> f64 {
        0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>()
    };
    let up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iter {
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        for t in 0..n {
            if up(alpha[t], y[t]) && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            if i != usize::MAX && v < gmax {
                let b = gmax - v;
                let mut a = q[i * n + i] + q[t * n + t] - 2.0 * y[i] * y[t] * q[i * n + t];
                if a <= 0.0 {
                    a = TAU;
                }
                if -b * b / a < best {
                    best = -b * b / a;
                    j = t;
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < params.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let (ai, aj) = (alpha[i], alpha[j]);
        let qij = q[i * n + j];
        if y[i] != y[j] {
            let mut quad = q[i * n + i] + q[j * n + j] + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = q[i * n + i] + q[j * n + j] - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for t in 0..n {
            grad[t] += q[i * n + t] * di + q[j * n + t] * dj;
        }
        history.push(objective(&alpha, &grad));
    }
    if !converged {
        log::warn!("SMO stopped at the iteration cap {}", params.max_iter);
    }

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 { free_sum / free as f64 } else { 0.5 * (ub + lb) };
    Solution {
        alpha,
        rho,
        history,
        iterations,
        converged,
    }
}
