//! Student-t low-dimensional model, KL objective and its gradient.

use super::affinity::AffinityMatrix;
use crate::error::{Error, Result};

/// Floor applied to probabilities inside logarithms.
pub const LOG_FLOOR: f64 = 1e-12;

/// Low-dimensional joint probabilities and the Student-t kernel `(1 + d^2)^-1`,
/// both row-major `n x n` with zero diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct LowDim {
    pub q: Vec<f64>,
    pub kernel: Vec<f64>,
}

pub fn low_dim_q(y: &[[f64; 2]]) -> Result<LowDim> {
    let n = y.len();
    if n < 2 {
        return Err(Error::InvalidInput("need at least two embedded points".into()));
    }
    let mut kernel = vec![0.0; n * n];
    let mut z = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let k = 1.0 / (1.0 + dx * dx + dy * dy);
            kernel[i * n + j] = k;
            kernel[j * n + i] = k;
            z += 2.0 * k;
        }
    }
    let q = kernel.iter().map(|k| k / z).collect();
    Ok(LowDim { q, kernel })
}

/// `sum_{i != j} p_ij ln(p_ij / q_ij)`; zero-probability pairs contribute nothing.
pub fn kl_divergence(p: &AffinityMatrix, q: &[f64]) -> Result<f64> {
    let n = p.n();
    if q.len() != n * n {
        return Err(Error::InvalidInput(format!(
            "q has {} entries, expected {}",
            q.len(),
            n * n
        )));
    }
    let mut kl = 0.0;
    for (pv, qv) in p.as_slice().iter().zip(q) {
        if *pv > 0.0 {
            kl += pv * (pv.max(LOG_FLOOR).ln() - qv.max(LOG_FLOOR).ln());
        }
    }
    Ok(kl)
}

/// Gradient of the KL objective with respect to every embedded point:
/// `4 sum_j (p_ij - q_ij)(y_i - y_j)(1 + |y_i - y_j|^2)^-1`.
pub fn kl_gradient(p: &AffinityMatrix, y: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
    let n = y.len();
    if p.n() != n {
        return Err(Error::InvalidInput("affinity and embedding sizes differ".into()));
    }
    let low = low_dim_q(y)?;
    let mut grad = vec![[0.0; 2]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let c = 4.0 * (p.get(i, j) - low.q[i * n + j]) * low.kernel[i * n + j];
            grad[i][0] += c * (y[i][0] - y[j][0]);
            grad[i][1] += c * (y[i][1] - y[j][1]);
        }
    }
    Ok(grad)
}

/// Packed upper-triangle workspace for the optimizer's inner loop.
pub(crate) struct PairWorkspace {
    n: usize,
    /// `p_ij` for `i < j`, row by row.
    p_upper: Vec<f64>,
    kernel: Vec<f64>,
    /// `sum_{i != j} p_ij ln max(p_ij, floor)`, constant over the run.
    p_log_p: f64,
}

impl PairWorkspace {
    pub(crate) fn new(p: &AffinityMatrix) -> Self {
        let n = p.n();
        let mut p_upper = Vec::with_capacity(n * (n - 1) / 2);
        let mut p_log_p = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = p.get(i, j);
                p_upper.push(v);
                if v > 0.0 {
                    p_log_p += 2.0 * v * v.max(LOG_FLOOR).ln();
                }
            }
        }
        PairWorkspace {
            n,
            kernel: vec![0.0; p_upper.len()],
            p_upper,
            p_log_p,
        }
    }

    /// Writes the gradient of `KL(exaggeration * P || Q)` into `grad` and
    /// returns `KL(P || Q)` at `y`.
    pub(crate) fn gradient(&mut self, y: &[[f64; 2]], exaggeration: f64, grad: &mut [[f64; 2]]) -> f64 {
        let n = self.n;
        let mut z = 0.0;
        let mut k = 0;
        for i in 0..n {
            let yi = y[i];
            for yj in &y[i + 1..] {
                let dx = yi[0] - yj[0];
                let dy = yi[1] - yj[1];
                let kv = 1.0 / (1.0 + dx * dx + dy * dy);
                self.kernel[k] = kv;
                z += kv;
                k += 1;
            }
        }
        z *= 2.0;
        let inv_z = 1.0 / z;
        let ln_z = z.ln();
        let ln_floor = LOG_FLOOR.ln();

        for g in grad.iter_mut() {
            *g = [0.0; 2];
        }
        let mut cross = 0.0;
        let mut k = 0;
        for i in 0..n {
            let yi = y[i];
            let mut gi = [0.0; 2];
            for (off, yj) in y[i + 1..].iter().enumerate() {
                let j = i + 1 + off;
                let kv = self.kernel[k];
                let pv = self.p_upper[k];
                k += 1;
                let c = 4.0 * (exaggeration * pv - kv * inv_z) * kv;
                let fx = c * (yi[0] - yj[0]);
                let fy = c * (yi[1] - yj[1]);
                gi[0] += fx;
                gi[1] += fy;
                grad[j][0] -= fx;
                grad[j][1] -= fy;
                if pv > 0.0 {
                    // ln q = ln k - ln z, floored like `kl_divergence`.
                    let ln_q = (kv.ln() - ln_z).max(ln_floor);
                    cross += pv * ln_q;
                }
            }
            grad[i][0] += gi[0];
            grad[i][1] += gi[1];
        }
        self.p_log_p - 2.0 * cross
    }
}
