//! High-dimensional affinities: Gaussian conditionals calibrated to a target
//! perplexity, then symmetrized into joint probabilities.

use crate::error::{Error, Result};

/// Joint probabilities `p_ij` of the input points.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    n: usize,
    /// Row-major `n x n`, symmetric, zero diagonal, summing to one.
    p: Vec<f64>,
    /// Per-point Gaussian bandwidths. Empty when built directly from conditionals.
    sigmas: Vec<f64>,
}

impl AffinityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }

    /// Largest `|p_ij - p_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.p[i * n + j] - self.p[j * n + i]).abs());
            }
        }
        worst
    }
}

/// Conditional probabilities `p_{j|i}` over the *other* points of `i`.
///
/// `distances` holds the distances from `i` to every other point (the point
/// itself excluded). Evaluated with a max-shift so that tight neighborhoods
/// do not underflow.
pub fn conditional_p(distances: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if distances.is_empty() {
        return Err(Error::InvalidInput(
            "conditional distribution needs at least one other point".into(),
        ));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
    }
    if distances.iter().any(|d| d.is_nan() || *d < 0.0) {
        return Err(Error::InvalidInput("distances must be non-negative".into()));
    }
    let d2: Vec<f64> = distances.iter().map(|d| d * d).collect();
    let beta = 1.0 / (2.0 * sigma * sigma);
    let mut out = vec![0.0; d2.len()];
    gaussian_row(&d2, beta, &mut out)
        .ok_or_else(|| Error::Numerical("all neighbor weights underflow".into()))?;
    Ok(out)
}

/// Fills `out` with the normalized Gaussian weights for squared distances
/// `d2` and precision `beta = 1/(2 sigma^2)`. Returns the entropy in bits,
/// or `None` when every weight is zero even after shifting.
fn gaussian_row(d2: &[f64], beta: f64, out: &mut [f64]) -> Option<f64> {
    let min_d2 = d2.iter().copied().fold(f64::INFINITY, f64::min);
    if !min_d2.is_finite() {
        return None;
    }
    // log w_j = -beta (d2_j - min_d2); the largest weight is exactly 1.
    let mut z = 0.0;
    let mut weighted = 0.0;
    for (o, &d) in out.iter_mut().zip(d2) {
        let a = if d == min_d2 { 0.0 } else { -beta * (d - min_d2) };
        let w = a.exp();
        *o = w;
        z += w;
        if w > 0.0 {
            weighted += w * a;
        }
    }
    if !(z > 0.0 && z.is_finite()) {
        return None;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
    // H = -sum p ln p with ln p_j = a_j - ln z.
    let h_nats = z.ln() - weighted / z;
    Some(h_nats / std::f64::consts::LN_2)
}

/// Result of the per-point bandwidth search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaSearch {
    pub sigma: f64,
    /// Perplexity `2^H` reached at `sigma`.
    pub perplexity: f64,
    /// `|log2(perplexity) - log2(target)|`.
    pub residual: f64,
    pub converged: bool,
    /// Set when every distance is zero, so no bandwidth changes the distribution.
    pub degenerate: bool,
}

/// Bisection over `sigma` so that the conditional distribution reaches the
/// target perplexity.
///
/// The search starts from `[1e-20, 1e20]` times the mean distance, widens the
/// bracket if the target is not inside it, then bisects geometrically.
pub fn search_sigma(
    distances: &[f64],
    target_perplexity: f64,
    tol: f64,
    max_steps: usize,
) -> Result<SigmaSearch> {
    if distances.is_empty() {
        return Err(Error::InvalidInput("sigma search needs at least one other point".into()));
    }
    if distances.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(Error::InvalidInput("distances must be finite and non-negative".into()));
    }
    let d2: Vec<f64> = distances.iter().map(|d| d * d).collect();
    let mean = distances.iter().sum::<f64>() / distances.len() as f64;
    let mut row = vec![0.0; d2.len()];
    search_sigma_sq(&d2, mean, target_perplexity, tol, max_steps, &mut row)
}

pub(crate) fn search_sigma_sq(
    d2: &[f64],
    mean_distance: f64,
    target: f64,
    tol: f64,
    max_steps: usize,
    row: &mut [f64],
) -> Result<SigmaSearch> {
    let others = d2.len() as f64;
    if !(target >= 1.0 && target <= others) {
        return Err(Error::param(
            "perplexity",
            format!("target {target} outside [1, {others}]"),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::param("perplexity_tolerance", "must be positive"));
    }
    let log_target = target.log2();

    if mean_distance <= 0.0 {
        let h = gaussian_row(d2, 1.0, row).expect("zero distances give finite weights");
        return Ok(SigmaSearch {
            sigma: f64::MIN_POSITIVE,
            perplexity: h.exp2(),
            residual: (h - log_target).abs(),
            converged: (h - log_target).abs() <= tol,
            degenerate: true,
        });
    }

    let entropy_at = |sigma: f64, row: &mut [f64]| -> f64 {
        let beta = 1.0 / (2.0 * sigma * sigma);
        gaussian_row(d2, beta, row).unwrap_or(0.0)
    };

    let mut lo = 1e-20 * mean_distance;
    let mut hi = 1e20 * mean_distance;
    // Entropy grows with sigma. Widen the bracket until it straddles the target.
    for _ in 0..8 {
        if entropy_at(lo, row) <= log_target {
            break;
        }
        lo *= 1e-20;
    }
    for _ in 0..8 {
        if entropy_at(hi, row) >= log_target {
            break;
        }
        hi *= 1e20;
    }

    let mut best = (f64::INFINITY, hi);
    let mut steps = 0;
    while steps < max_steps {
        steps += 1;
        let mid = (lo * hi).sqrt();
        let h = entropy_at(mid, row);
        let r = (h - log_target).abs();
        if r < best.0 {
            best = (r, mid);
        }
        if r <= tol {
            break;
        }
        if h < log_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let sigma = best.1;
    let h = entropy_at(sigma, row);
    let residual = (h - log_target).abs();
    Ok(SigmaSearch {
        sigma,
        perplexity: h.exp2(),
        residual,
        converged: residual <= tol,
        degenerate: false,
    })
}

/// Symmetrizes row-stochastic conditionals: `p_ij = (p_{j|i} + p_{i|j}) / 2N`.
///
/// `conditionals` is row-major `n x n` with `conditionals[i*n + j] = p_{j|i}`.
pub fn joint_p(conditionals: &[f64], n: usize) -> Result<AffinityMatrix> {
    if n < 2 || conditionals.len() != n * n {
        return Err(Error::InvalidInput(format!(
            "conditional matrix of length {} is not {n} x {n} with n >= 2",
            conditionals.len()
        )));
    }
    for i in 0..n {
        let row = &conditionals[i * n..(i + 1) * n];
        if row[i] != 0.0 {
            return Err(Error::InvalidInput(format!("diagonal entry {i} is non-zero")));
        }
        if row.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidInput(format!("row {i} has a negative or NaN entry")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidInput(format!("row {i} sums to {s}, not 1")));
        }
    }
    let scale = 1.0 / (2.0 * n as f64);
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (conditionals[i * n + j] + conditionals[j * n + i]) * scale;
            p[i * n + j] = v;
            p[j * n + i] = v;
        }
    }
    Ok(AffinityMatrix {
        n,
        p,
        sigmas: Vec::new(),
    })
}

/// Per-point calibration summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub affinities: AffinityMatrix,
    pub max_residual: f64,
    pub degenerate_points: usize,
}

/// Builds the joint affinities of `points` for the given perplexity.
pub fn affinities<const D: usize>(
    points: &[[f64; D]],
    perplexity: f64,
    tol: f64,
    max_steps: usize,
) -> Result<Calibration> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InvalidInput("need at least two points".into()));
    }
    let mut cond = vec![0.0; n * n];
    let mut sigmas = Vec::with_capacity(n);
    let mut d2 = vec![0.0; n - 1];
    let mut row = vec![0.0; n - 1];
    let mut max_residual = 0.0f64;
    let mut degenerate_points = 0;
    for i in 0..n {
        let mut k = 0;
        let mut dsum = 0.0;
        for j in 0..n {
            if j != i {
                let d = crate::kdtree::dist2(&points[i], &points[j]);
                d2[k] = d;
                dsum += d.sqrt();
                k += 1;
            }
        }
        let s = search_sigma_sq(&d2, dsum / (n - 1) as f64, perplexity, tol, max_steps, &mut row)?;
        if s.degenerate {
            degenerate_points += 1;
        }
        max_residual = max_residual.max(s.residual);
        sigmas.push(s.sigma);
        let dst = &mut cond[i * n..(i + 1) * n];
        let mut k = 0;
        for (j, c) in dst.iter_mut().enumerate() {
            if j != i {
                *c = row[k];
                k += 1;
            }
        }
    }
    let mut affinities = joint_p(&cond, n)?;
    affinities.sigmas = sigmas;
    Ok(Calibration {
        affinities,
        max_residual,
        degenerate_points,
    })
}
