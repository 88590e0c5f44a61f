//! Exact t-SNE from 3D (or any fixed dimension) into the plane.
//!
//! Affinities are dense `N x N`; every iteration touches all pairs. The
//! optimizer is plain gradient descent with momentum, early exaggeration and
//! per-coordinate adaptive gains.

mod affinity;
mod objective;

pub use affinity::{
    affinities, conditional_p, joint_p, search_sigma, AffinityMatrix, Calibration, SigmaSearch,
};
pub use objective::{kl_divergence, kl_gradient, low_dim_q, LowDim, LOG_FLOOR};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use objective::PairWorkspace;

#[derive(Debug, Clone, PartialEq)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub n_iter: usize,
    pub learning_rate: f64,
    pub early_exaggeration_factor: f64,
    pub early_exaggeration_iters: usize,
    pub momentum_initial: f64,
    pub momentum_final: f64,
    /// First iteration (1-based) that uses `momentum_final`.
    pub momentum_switch_iter: usize,
    pub seed: u64,
    /// Tolerance on `|log2 Perp - log2 target|`.
    pub perplexity_tolerance: f64,
    pub max_bisection_steps: usize,
    /// Standard deviation of the Gaussian initial layout.
    pub init_std: f64,
    /// Per-coordinate gain adaptation (increase by 0.2 on sign flip, shrink by 0.8 otherwise).
    pub adaptive_gains: bool,
    pub min_gain: f64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            n_iter: 1000,
            learning_rate: 200.0,
            early_exaggeration_factor: 4.0,
            early_exaggeration_iters: 100,
            momentum_initial: 0.5,
            momentum_final: 0.8,
            momentum_switch_iter: 250,
            seed: 0,
            perplexity_tolerance: 1e-5,
            max_bisection_steps: 50,
            init_std: 1e-4,
            adaptive_gains: true,
            min_gain: 0.01,
        }
    }
}

impl TsneConfig {
    pub fn with_perplexity(mut self, perplexity: f64) -> Self {
        self.perplexity = perplexity;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("perplexity", self.perplexity),
            ("learning_rate", self.learning_rate),
            ("perplexity_tolerance", self.perplexity_tolerance),
            ("init_std", self.init_std),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if self.n_iter == 0 {
            return Err(Error::param("n_iter", "must be positive"));
        }
        if self.max_bisection_steps == 0 {
            return Err(Error::param("max_bisection_steps", "must be positive"));
        }
        if !(self.early_exaggeration_factor >= 1.0) {
            return Err(Error::param("early_exaggeration_factor", "must be at least 1"));
        }
        for (name, m) in [
            ("momentum_initial", self.momentum_initial),
            ("momentum_final", self.momentum_final),
        ] {
            if !(0.0..1.0).contains(&m) {
                return Err(Error::param(name, format!("must lie in [0, 1), got {m}")));
            }
        }
        if !(self.min_gain > 0.0) {
            return Err(Error::param("min_gain", "must be positive"));
        }
        Ok(())
    }
}

/// 2D layout of the input points plus solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub y: Vec<[f64; 2]>,
    /// `KL(P || Q)` after each iteration (unexaggerated P).
    pub kl_history: Vec<f64>,
    pub config_used: TsneConfig,
    /// Worst per-point perplexity residual from calibration.
    pub max_perplexity_residual: f64,
}

impl Embedding {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn final_kl(&self) -> Option<f64> {
        self.kl_history.last().copied()
    }
}

/// Embeds the points of `cloud` in 2D.
pub fn embed(cloud: &PointCloud, config: &TsneConfig) -> Result<Embedding> {
    let pts: Vec<[f64; 3]> = cloud.points().iter().map(|p| p.to_array()).collect();
    embed_points(&pts, config)
}

pub fn embed_points<const D: usize>(points: &[[f64; D]], config: &TsneConfig) -> Result<Embedding> {
    config.validate()?;
    let n = points.len();
    if n < 4 {
        return Err(Error::InvalidInput(format!(
            "t-SNE needs at least 4 points, got {n}"
        )));
    }
    if config.perplexity >= (n - 1) as f64 {
        return Err(Error::param(
            "perplexity",
            format!("{} must be below N - 1 = {}", config.perplexity, n - 1),
        ));
    }
    let cal = affinities(
        points,
        config.perplexity,
        config.perplexity_tolerance,
        config.max_bisection_steps,
    )?;
    if cal.degenerate_points > 0 {
        log::warn!(
            "{} points have all-zero distances; their bandwidth is arbitrary",
            cal.degenerate_points
        );
    }
    let mut out = optimize(&cal.affinities, config)?;
    out.max_perplexity_residual = cal.max_residual;
    Ok(out)
}

/// Runs gradient descent on a precomputed affinity matrix.
pub fn optimize(p: &AffinityMatrix, config: &TsneConfig) -> Result<Embedding> {
    config.validate()?;
    let n = p.n();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, config.init_std)
        .map_err(|e| Error::param("init_std", e.to_string()))?;
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)])
        .collect();
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut grad = vec![[0.0f64; 2]; n];
    let mut ws = PairWorkspace::new(p);
    let mut kl_history = Vec::with_capacity(config.n_iter);

    for iter in 1..=config.n_iter {
        let exaggeration = if iter <= config.early_exaggeration_iters {
            config.early_exaggeration_factor
        } else {
            1.0
        };
        let momentum = if iter < config.momentum_switch_iter {
            config.momentum_initial
        } else {
            config.momentum_final
        };
        let kl = ws.gradient(&y, exaggeration, &mut grad);
        if iter > 1 {
            kl_history.push(kl);
        }
        if grad.iter().any(|g| !(g[0].is_finite() && g[1].is_finite())) {
            return Err(Error::NonFiniteGradient { iteration: iter });
        }
        for i in 0..n {
            for d in 0..2 {
                if config.adaptive_gains {
                    gains[i][d] = if (grad[i][d] > 0.0) != (update[i][d] > 0.0) {
                        gains[i][d] + 0.2
                    } else {
                        (gains[i][d] * 0.8).max(config.min_gain)
                    };
                }
                update[i][d] = momentum * update[i][d] - config.learning_rate * gains[i][d] * grad[i][d];
                y[i][d] += update[i][d];
            }
        }
        recenter(&mut y);
    }
    let kl = ws.gradient(&y, 1.0, &mut grad);
    kl_history.push(kl);

    Ok(Embedding {
        y,
        kl_history,
        config_used: config.clone(),
        max_perplexity_residual: 0.0,
    })
}

fn recenter(y: &mut [[f64; 2]]) {
    let n = y.len() as f64;
    let mut mean = [0.0; 2];
    for p in y.iter() {
        mean[0] += p[0];
        mean[1] += p[1];
    }
    mean[0] /= n;
    mean[1] /= n;
    for p in y.iter_mut() {
        p[0] -= mean[0];
        p[1] -= mean[1];
    }
}
