//! Local-search baselines: the iterative active-set heuristic, gradient
//! descent with backtracking, and mini-batch SGD.
//!
//! GD and SGD treat `(β, β₀)` as one vector over rows `(x_i, 1)`, so the
//! intercept is learned. The gradient is the usual ReLU one with the
//! convention `sgn(0) = −1`, i.e. a sample contributes only when its
//! pre-activation is strictly positive. Losses are unnormalized sums.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{relu_objective, Dataset, Params};
use crate::error::{Error, Result};
use crate::loss::{surrogate_objective, ActiveSet};
use crate::numeric::{relu, sum_terms};
use crate::solver::{minimize_surrogate, SolveReport, SolverConfig};

/// Backtracking gives up after this many step reductions.
pub const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GdConfig {
    /// Maximum number of accepted steps (T).
    pub max_iters: usize,
    /// Stop once the loss decreases by at most this much.
    pub eps: f64,
    pub eta0: f64,
    /// Step schedule `η_t = η₀ / (1 + γ t)`.
    pub gamma_step: f64,
    /// Backtracking factor.
    pub alpha: f64,
    /// SGD batch size; `None` means `⌊0.1 n⌋` (at least 1).
    pub batch: Option<usize>,
}

impl Default for GdConfig {
    fn default() -> Self {
        GdConfig {
            max_iters: 1000,
            eps: 0.01,
            eta0: 1.0,
            gamma_step: 0.03,
            alpha: 0.6,
            batch: None,
        }
    }
}

impl GdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("T must be at least 1".into()));
        }
        if !(self.eps > 0.0) || !(self.eta0 > 0.0) {
            return Err(Error::InvalidArgument("eps and eta0 must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument("alpha must lie in (0, 1)".into()));
        }
        if !(self.gamma_step >= 0.0) || !self.gamma_step.is_finite() {
            return Err(Error::InvalidArgument("gamma_step must be nonnegative".into()));
        }
        Ok(())
    }

    /// Batch size for a dataset of `n` samples.
    pub fn batch_size(&self, n: usize) -> Result<usize> {
        let b = self.batch.unwrap_or((n / 10).max(1));
        if b == 0 || b > n {
            return Err(Error::InvalidArgument(format!("batch size {b} must lie in 1..={n}")));
        }
        Ok(b)
    }
}

/// Alternates surrogate solves with re-reading the active set off the
/// solution. `history` holds `z^σ(I^t)` per outer iteration; `converged`
/// means the active set reached a fixed point.
pub fn iterative_heuristic(d: &Dataset, init: &Params, max_iters: usize, cfg: &SolverConfig) -> Result<SolveReport> {
    if max_iters == 0 {
        return Err(Error::InvalidArgument("T must be at least 1".into()));
    }
    d.check_params(init)?;
    let mut active = ActiveSet::from_params(d, init);
    let mut history = Vec::new();
    let mut outer = 0;
    let mut prev: Option<Params> = None;
    loop {
        let mut rep = minimize_surrogate(d, &active, cfg)?;
        // The previous iterate is feasible for the new surrogate and no worse
        // than its old value; keep it if the solve lands a rounding error above.
        if let Some(theta) = prev.take() {
            let carried = surrogate_objective(d, &active, &theta)?;
            if carried < rep.value {
                rep.params = theta;
                rep.value = carried;
            }
        }
        outer += 1;
        history.push(rep.value);
        let next = ActiveSet::from_params(d, &rep.params);
        let fixed = next == active;
        if fixed || outer == max_iters {
            rep.iterations = outer;
            rep.converged = fixed;
            rep.history = history;
            return Ok(rep);
        }
        active = next;
        prev = Some(rep.params);
    }
}

/// Full-batch gradient descent.
pub fn gradient_descent(d: &Dataset, cfg: &GdConfig, init: &Params) -> Result<SolveReport> {
    cfg.validate()?;
    d.check_params(init)?;
    let all: Vec<usize> = (0..d.n()).collect();
    run(d, cfg, init, || all.clone())
}

/// Mini-batch SGD; each iteration draws a fresh batch without replacement.
pub fn sgd(d: &Dataset, cfg: &GdConfig, init: &Params, seed: u64) -> Result<SolveReport> {
    cfg.validate()?;
    d.check_params(init)?;
    let b = cfg.batch_size(d.n())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = d.n();
    run(d, cfg, init, move || {
        let mut idx = sample(&mut rng, n, b).into_vec();
        idx.sort_unstable();
        idx
    })
}

fn pre(d: &Dataset, i: usize, theta: &[f64]) -> f64 {
    let (beta, beta0) = theta.split_at(d.p());
    d.x(i).iter().zip(beta).map(|(a, b)| a * b).sum::<f64>() + beta0[0]
}

fn batch_loss(d: &Dataset, batch: &[usize], theta: &[f64]) -> f64 {
    sum_terms(
        batch.len(),
        batch.iter().map(|&i| {
            let r = relu(pre(d, i, theta)) - d.y(i);
            r * r
        }),
    )
}

/// `(1/|B|) Σ_B (max{0, a_iᵀθ} − y_i)(1 + sgn(a_iᵀθ)) a_i`.
fn batch_grad(d: &Dataset, batch: &[usize], theta: &[f64]) -> Vec<f64> {
    let p = d.p();
    let mut g = vec![0.0; p + 1];
    for &i in batch {
        let x = pre(d, i, theta);
        if x > 0.0 {
            let c = 2.0 * (x - d.y(i));
            for (gj, aj) in g[..p].iter_mut().zip(d.x(i)) {
                *gj += c * aj;
            }
            g[p] += c;
        }
    }
    let inv = 1.0 / batch.len() as f64;
    g.iter_mut().for_each(|v| *v *= inv);
    g
}

fn run<F: FnMut() -> Vec<usize>>(d: &Dataset, cfg: &GdConfig, init: &Params, mut draw: F) -> Result<SolveReport> {
    let mut theta = init.to_vec();
    let mut trial = theta.clone();
    let mut batch = draw();
    let mut prev = f64::INFINITY;
    let mut cur = batch_loss(d, &batch, &theta);
    let mut history = vec![cur];
    let mut eta = cfg.eta0;
    let mut t = 0;
    let mut stuck = false;
    while t < cfg.max_iters && prev - cur > cfg.eps {
        batch = draw();
        let g = batch_grad(d, &batch, &theta);
        let base = batch_loss(d, &batch, &theta);
        if g.iter().all(|&v| v == 0.0) {
            stuck = true;
            break;
        }
        let mut accepted = None;
        for _ in 0..=MAX_BACKTRACKS {
            for ((tj, &th), &gj) in trial.iter_mut().zip(&theta).zip(&g) {
                *tj = th - eta * gj;
            }
            let lt = batch_loss(d, &batch, &trial);
            if !lt.is_finite() {
                return Err(Error::NonFinite("loss during gradient descent".into()));
            }
            if lt < base {
                accepted = Some(lt);
                break;
            }
            eta *= cfg.alpha;
        }
        let Some(lt) = accepted else {
            stuck = true;
            break;
        };
        theta.copy_from_slice(&trial);
        prev = cur;
        cur = lt;
        history.push(cur);
        eta = cfg.eta0 / (1.0 + cfg.gamma_step * t as f64);
        t += 1;
    }
    let params = Params::from_vec(&theta);
    let value = relu_objective(d, &params)?;
    let all: Vec<usize> = (0..d.n()).collect();
    let certificate = batch_grad(d, &all, &theta).iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(SolveReport {
        params,
        value,
        iterations: t,
        converged: stuck || t < cfg.max_iters,
        certificate,
        history,
    })
}
