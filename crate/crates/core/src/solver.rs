//! Minimization of the convex surrogate `z^σ(I)` for a fixed active set.
//!
//! Every term of the surrogate is a convex function of one pre-activation
//! `x_i = a_iᵀθ` with `a_i = (x_i, 1)`. Terms on the active set are plain
//! squares `(x − y)²`. Every other term (σ on inactive positives, the φ
//! terms on non-positive labels) has the shape
//!
//! ```text
//! h(x) = (t − y)²   for x <= t
//!        (x − y)²   for x >  t        with t >= y
//! ```
//!
//! (`t = 2y` for σ, `t = 0` for φ), i.e. flat and then quadratic with a
//! convex kink at the knot `t`. The subdifferential at the knot is
//! `[0, 2(t − y)]`.
//!
//! Phase 1 is steepest descent on a subgradient with Armijo backtracking
//! from `θ = 0`. Phase 2 finishes exactly. At each point it solves a small
//! bounded least-squares problem for the knot multipliers, which yields the
//! minimum-norm subgradient; when that vanishes the point is optimal and the
//! solve stops with a certificate. Otherwise the multipliers say which
//! kinked terms stay on their knot, which go flat and which go quadratic.
//! Freezing those pieces gives an equality-constrained least-squares
//! problem whose minimum-norm solution is the candidate step; if it is not
//! a descent direction for the true surrogate the negative minimum-norm
//! subgradient is used instead. Either way the surrogate is then minimized
//! exactly along the ray by walking its breakpoints.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Params};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::loss::{surrogate_objective, ActiveSet};
use crate::numeric::{dot, sum_terms};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Cap on phase-2 rounds.
    pub max_iters: usize,
    /// Phase 1 stops once an accepted step improves the value by less than
    /// this fraction.
    pub rel_tol: f64,
    /// Phase 1 stops once the subgradient norm falls below this.
    pub grad_tol: f64,
    /// Phase-2 rounds allowed without a strict decrease before giving up.
    pub polish_rounds: usize,
    /// Cap on phase-1 iterations.
    pub descent_iters: usize,
    /// How candidate and subset loops fan out in callers.
    pub execution: Execution,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 5000,
            rel_tol: 1e-10,
            grad_tol: 1e-8,
            polish_rounds: 20,
            descent_iters: 100,
            execution: Execution::Auto,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be positive".into()));
        }
        if !(self.rel_tol > 0.0) || !(self.grad_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        Ok(())
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub params: Params,
    /// Surrogate value at `params`, re-evaluated from the loss definition.
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// 0 when the optimality conditions were verified, otherwise the norm of
    /// the final subgradient.
    pub certificate: f64,
    /// Objective after each accepted step, starting from the initial point.
    #[serde(skip)]
    pub history: Vec<f64>,
}

/// Minimizes the surrogate for active set `active` starting from `θ = 0`.
pub fn minimize_surrogate(d: &Dataset, active: &ActiveSet, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let problem = Surrogate::new(d, active)?;
    let out = problem.solve(cfg)?;
    let params = Params::from_vec(&out.theta);
    let value = surrogate_objective(d, active, &params)?;
    if !value.is_finite() {
        return Err(Error::NonFinite("surrogate objective".into()));
    }
    Ok(SolveReport {
        params,
        value,
        iterations: out.iterations,
        converged: out.converged,
        certificate: out.certificate,
        history: out.history,
    })
}

/// Compiled surrogate: rows `a_i = (x_i, 1)`, targets, optional knots.
#[derive(Debug, Clone)]
pub(crate) struct Surrogate {
    dim: usize,
    rows: Vec<f64>,
    targets: Vec<f64>,
    knots: Vec<Option<f64>>,
}

/// Piece a term sits on at the current point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Piece {
    Quad,
    Flat,
    /// At the knot, within `knot_tol`.
    Kink,
}

/// Bound state of a knot multiplier `ν ∈ [0, cap]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Lower,
    Upper,
    Free,
}

/// First-order picture of the surrogate at a point.
struct Local {
    pieces: Vec<Piece>,
    kinks: Vec<usize>,
    bounds: Vec<Bound>,
    /// `g + Σ ν_j a_j` over the kinks: the minimum-norm subgradient.
    residual: Vec<f64>,
    /// Magnitude of the summed gradient contributions, for tolerances.
    gscale: f64,
}

#[derive(Debug)]
pub(crate) struct Outcome {
    pub theta: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub certificate: f64,
    pub history: Vec<f64>,
}

impl Surrogate {
    pub fn new(d: &Dataset, active: &ActiveSet) -> Result<Self> {
        let n = d.n();
        let dim = d.p() + 1;
        let mask = active.mask(n);
        let mut rows = Vec::with_capacity(n * dim);
        let mut targets = Vec::with_capacity(n);
        let mut knots = Vec::with_capacity(n);
        for i in 0..n {
            let y = d.y(i);
            if mask[i] && y <= 0.0 {
                return Err(Error::NotPositive(i));
            }
            rows.extend_from_slice(d.x(i));
            rows.push(1.0);
            targets.push(y);
            knots.push(if y <= 0.0 {
                Some(0.0)
            } else if mask[i] {
                None
            } else {
                Some(2.0 * y)
            });
        }
        Ok(Surrogate {
            dim,
            rows,
            targets,
            knots,
        })
    }

    fn n(&self) -> usize {
        self.targets.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    fn term(&self, i: usize, x: f64) -> f64 {
        let y = self.targets[i];
        match self.knots[i] {
            Some(t) if x <= t => (t - y) * (t - y),
            _ => (x - y) * (x - y),
        }
    }

    /// Slope of term `i` at `x`, taking the flat side at the knot.
    fn slope(&self, i: usize, x: f64) -> f64 {
        match self.knots[i] {
            Some(t) if x <= t => 0.0,
            _ => 2.0 * (x - self.targets[i]),
        }
    }

    /// Jump of the slope across the knot of term `i`.
    fn cap(&self, i: usize) -> f64 {
        self.knots[i].map_or(0.0, |t| 2.0 * (t - self.targets[i]))
    }

    /// `A v` for a direction or point `v`.
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn value_at(&self, x: &[f64]) -> f64 {
        sum_terms(self.n(), x.iter().enumerate().map(|(i, &xi)| self.term(i, xi)))
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        self.value_at(&self.apply(theta))
    }

    fn subgradient_at(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for (i, &xi) in x.iter().enumerate() {
            let s = self.slope(i, xi);
            if s != 0.0 {
                axpy(&mut g, s, self.row(i));
            }
        }
        g
    }

    /// Slack used to decide that a pre-activation sits on its knot.
    fn knot_tol(&self, i: usize, theta: &[f64], t: f64) -> f64 {
        let mag: f64 = self.row(i).iter().zip(theta).map(|(a, b)| (a * b).abs()).sum();
        1e-11 * (1.0 + t.abs() + mag)
    }

    pub fn solve(&self, cfg: &SolverConfig) -> Result<Outcome> {
        let mut theta = vec![0.0; self.dim];
        let mut history = vec![self.value(&theta)];
        let descent_steps = self.descend(&mut theta, &mut history, cfg)?;
        let mut out = self.polish(theta, history, cfg)?;
        out.iterations += descent_steps;
        Ok(out)
    }

    /// Phase 1: subgradient steps with Armijo backtracking (initial step 1,
    /// halving, sufficient-decrease constant 1e-4, at most 60 halvings).
    fn descend(&self, theta: &mut [f64], history: &mut Vec<f64>, cfg: &SolverConfig) -> Result<usize> {
        const ARMIJO: f64 = 1e-4;
        const MAX_HALVINGS: usize = 60;
        let mut f = *history.last().unwrap();
        let mut trial = vec![0.0; self.dim];
        let mut steps = 0;
        while steps < cfg.descent_iters {
            let g = self.subgradient_at(&self.apply(theta));
            let gg: f64 = g.iter().map(|v| v * v).sum();
            if gg.sqrt() <= cfg.grad_tol {
                break;
            }
            let mut eta = 1.0;
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                for ((tj, &th), &gj) in trial.iter_mut().zip(theta.iter()).zip(&g) {
                    *tj = th - eta * gj;
                }
                let ft = self.value(&trial);
                if !ft.is_finite() {
                    return Err(Error::NonFinite("surrogate objective during descent".into()));
                }
                if ft < f && ft <= f - ARMIJO * eta * gg {
                    accepted = Some(ft);
                    break;
                }
                eta *= 0.5;
            }
            let Some(ft) = accepted else { break };
            theta.copy_from_slice(&trial);
            let gain = f - ft;
            f = ft;
            history.push(f);
            steps += 1;
            if gain <= cfg.rel_tol * f.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
        Ok(steps)
    }

    /// Phase 2. Each round classifies the terms, computes the minimum-norm
    /// subgradient (stop when it vanishes), and moves along the better of a
    /// face Newton step and the steepest-descent direction with an exact
    /// line search.
    fn polish(&self, mut theta: Vec<f64>, mut history: Vec<f64>, cfg: &SolverConfig) -> Result<Outcome> {
        let mut x = self.apply(&theta);
        let mut f = self.value_at(&x);
        let mut rounds = 0;
        let mut stalled = 0;
        let mut converged = false;
        let mut certificate;
        loop {
            let local = self.local(&theta, &x)?;
            certificate = norm(&local.residual);
            if certificate <= STATIONARY_TOL * local.gscale {
                converged = true;
                break;
            }
            if rounds >= cfg.max_iters {
                break;
            }
            rounds += 1;
            let newton = self.face_step(&x, &local)?;
            let steepest: Vec<f64> = local.residual.iter().map(|v| -v).collect();
            let mut moved = false;
            for dir in [newton, steepest] {
                let delta = self.apply(&dir);
                if !(self.slope_along(&local, &x, &delta) < 0.0) {
                    continue;
                }
                let alpha = self.line_search(&local, &x, &delta);
                if !(alpha > 0.0) {
                    continue;
                }
                let cand: Vec<f64> = theta.iter().zip(&dir).map(|(t, s)| t + alpha * s).collect();
                let x_new = self.apply(&cand);
                let f_new = self.value_at(&x_new);
                if !f_new.is_finite() {
                    return Err(Error::NonFinite("surrogate objective during polish".into()));
                }
                if f_new <= f {
                    stalled = if f_new < f { 0 } else { stalled + 1 };
                    theta = cand;
                    x = x_new;
                    f = f_new;
                    history.push(f);
                    moved = true;
                    break;
                }
            }
            if !moved || stalled > cfg.polish_rounds {
                break;
            }
        }
        if converged {
            certificate = 0.0;
        }
        Ok(Outcome {
            theta,
            iterations: rounds,
            converged,
            certificate,
            history,
        })
    }

    fn local(&self, theta: &[f64], x: &[f64]) -> Result<Local> {
        let mut g = vec![0.0; self.dim];
        let mut gscale = 1.0;
        let mut pieces = Vec::with_capacity(self.n());
        let mut kinks = Vec::new();
        for i in 0..self.n() {
            let amax = self.row(i).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let piece = match self.knots[i] {
                None => Piece::Quad,
                Some(t) => {
                    let tol = self.knot_tol(i, theta, t);
                    if x[i] > t + tol {
                        Piece::Quad
                    } else if x[i] < t - tol {
                        Piece::Flat
                    } else {
                        Piece::Kink
                    }
                }
            };
            match piece {
                Piece::Quad => {
                    let s = 2.0 * (x[i] - self.targets[i]);
                    axpy(&mut g, s, self.row(i));
                    gscale += s.abs() * amax;
                }
                Piece::Kink => {
                    kinks.push(i);
                    gscale += self.cap(i) * amax;
                }
                Piece::Flat => {}
            }
            pieces.push(piece);
        }
        let (nu, bounds) = self.bvls(&kinks, &g, gscale)?;
        let mut residual = g;
        for (&i, &v) in kinks.iter().zip(&nu) {
            axpy(&mut residual, v, self.row(i));
        }
        Ok(Local {
            pieces,
            kinks,
            bounds,
            residual,
            gscale,
        })
    }

    /// Minimizes `‖g + Σ ν_j a_j‖` over `0 ≤ ν_j ≤ cap_j` (bounded-variable
    /// least squares, Lawson–Hanson style active set).
    fn bvls(&self, kinks: &[usize], g: &[f64], gscale: f64) -> Result<(Vec<f64>, Vec<Bound>)> {
        let k = kinks.len();
        let mut nu = vec![0.0; k];
        let mut bounds = vec![Bound::Lower; k];
        if k == 0 {
            return Ok((nu, bounds));
        }
        let caps: Vec<f64> = kinks.iter().map(|&i| self.cap(i)).collect();
        let amax = kinks
            .iter()
            .flat_map(|&i| self.row(i).iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let wtol = 1e-13 * gscale * amax;
        let mut blocked = vec![false; k];
        let residual = |nu: &[f64], skip: &dyn Fn(usize) -> bool| {
            let mut r = g.to_vec();
            for (j, &i) in kinks.iter().enumerate() {
                if !skip(j) && nu[j] != 0.0 {
                    axpy(&mut r, nu[j], self.row(i));
                }
            }
            r
        };
        for _ in 0..10 * (k + self.dim) + 10 {
            let r = residual(&nu, &|_| false);
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..k {
                if blocked[j] {
                    continue;
                }
                let w = -dot(self.row(kinks[j]), &r);
                let wants = match bounds[j] {
                    Bound::Lower => caps[j] > 0.0 && w > wtol,
                    Bound::Upper => w < -wtol,
                    Bound::Free => false,
                };
                if wants && enter.is_none_or(|(_, b)| w.abs() > b) {
                    enter = Some((j, w.abs()));
                }
            }
            let Some((j_in, _)) = enter else { break };
            let (from, start) = (bounds[j_in], nu[j_in]);
            bounds[j_in] = Bound::Free;
            loop {
                let free: Vec<usize> = (0..k).filter(|&j| bounds[j] == Bound::Free).collect();
                let c = residual(&nu, &|j| bounds[j] == Bound::Free);
                let b = Mat::from_fn(self.dim, free.len(), |r, q| self.row(kinks[free[q]])[r]);
                let scale = b.norm_l2();
                let neg: Vec<f64> = c.iter().map(|v| -v).collect();
                let z = min_norm_solve(b, &neg, scale)?;
                let mut alpha = 1.0f64;
                for (q, &j) in free.iter().enumerate() {
                    if z[q] < 0.0 && nu[j] - z[q] > 0.0 {
                        alpha = alpha.min(nu[j] / (nu[j] - z[q]));
                    } else if z[q] > caps[j] && z[q] - nu[j] > 0.0 {
                        alpha = alpha.min((caps[j] - nu[j]) / (z[q] - nu[j]));
                    }
                }
                let mut hit = false;
                for (q, &j) in free.iter().enumerate() {
                    nu[j] += alpha * (z[q] - nu[j]);
                    let eps = 1e-14 * caps[j];
                    if nu[j] <= eps {
                        nu[j] = 0.0;
                        bounds[j] = Bound::Lower;
                        hit = true;
                    } else if nu[j] >= caps[j] - eps {
                        nu[j] = caps[j];
                        bounds[j] = Bound::Upper;
                        hit = true;
                    }
                }
                if alpha >= 1.0 || !hit {
                    break;
                }
            }
            if bounds[j_in] == from && nu[j_in] == start {
                // no progress: the column is numerically dependent
                blocked[j_in] = true;
            } else {
                blocked.fill(false);
            }
        }
        Ok((nu, bounds))
    }

    /// Minimum-norm step to the minimizer of the quadratic obtained by
    /// freezing the current pieces: kinks whose multiplier is at its upper
    /// bound join the quadratic terms, free ones stay on their knot.
    fn face_step(&self, x: &[f64], local: &Local) -> Result<Vec<f64>> {
        let mut quad: Vec<usize> = (0..self.n()).filter(|&i| local.pieces[i] == Piece::Quad).collect();
        let mut working = Vec::new();
        for (&i, &b) in local.kinks.iter().zip(&local.bounds) {
            match b {
                Bound::Upper => quad.push(i),
                Bound::Free => working.push(i),
                Bound::Lower => {}
            }
        }
        let proj = NullProjector::new(self, &working)?;
        if quad.is_empty() || proj.rank == self.dim {
            return Ok(vec![0.0; self.dim]);
        }
        let a = Mat::from_fn(quad.len(), self.dim, |r, c| self.row(quad[r])[c]);
        let scale = a.norm_l2();
        let m = &a * &proj.p;
        let r: Vec<f64> = quad.iter().map(|&i| self.targets[i] - x[i]).collect();
        let z = min_norm_solve(m, &r, scale)?;
        Ok((0..self.dim)
            .map(|j| (0..self.dim).map(|c| proj.p[(j, c)] * z[c]).sum())
            .collect())
    }

    /// One-sided directional derivative along `delta = A d`.
    fn slope_along(&self, local: &Local, x: &[f64], delta: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n() {
            s += match local.pieces[i] {
                Piece::Quad => 2.0 * (x[i] - self.targets[i]) * delta[i],
                Piece::Flat => 0.0,
                Piece::Kink => self.cap(i) * delta[i].max(0.0),
            };
        }
        s
    }

    /// Exact minimizer of the surrogate along `x + α·delta`, `α >= 0`.
    fn line_search(&self, local: &Local, x: &[f64], delta: &[f64]) -> f64 {
        let mut curv = 0.0; // Σ δ² over terms on their quadratic piece
        let mut lin = 0.0; // Σ 2δ(x − y) over the same terms
        let mut events: Vec<(f64, usize, bool)> = Vec::new(); // (α, term, entering)
        for i in 0..self.n() {
            let (xi, di) = (x[i], delta[i]);
            let on = match (local.pieces[i], self.knots[i]) {
                (Piece::Quad, Some(t)) => {
                    if di < 0.0 {
                        events.push(((t - xi) / di, i, false));
                    }
                    true
                }
                (Piece::Quad, None) => true,
                (Piece::Flat, Some(t)) => {
                    if di > 0.0 {
                        events.push(((t - xi) / di, i, true));
                    }
                    false
                }
                (Piece::Flat, None) => false,
                (Piece::Kink, _) => di > 0.0,
            };
            if on {
                curv += di * di;
                lin += 2.0 * di * (xi - self.targets[i]);
            }
        }
        if lin >= 0.0 {
            return 0.0;
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut k = 0;
        while k < events.len() {
            let at = events[k].0.max(0.0);
            if curv > 0.0 {
                let star = -lin / (2.0 * curv);
                if star <= at {
                    return star;
                }
            }
            while k < events.len() && events[k].0.max(0.0) == at {
                let (_, i, entering) = events[k];
                let (di, xi) = (delta[i], x[i]);
                let sign = if entering { 1.0 } else { -1.0 };
                curv += sign * di * di;
                lin += sign * 2.0 * di * (xi - self.targets[i]);
                k += 1;
            }
            if lin + 2.0 * curv * at >= 0.0 {
                return at;
            }
        }
        if curv > 0.0 {
            -lin / (2.0 * curv)
        } else {
            events.last().map_or(0.0, |e| e.0.max(0.0))
        }
    }
}

/// Stationarity threshold on the minimum-norm subgradient, relative to the
/// summed gradient magnitudes.
const STATIONARY_TOL: f64 = 1e-10;

fn axpy(acc: &mut [f64], s: f64, v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += s * b;
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Projector onto the null space of the knot-constraint rows.
struct NullProjector {
    p: Mat<f64>,
    rank: usize,
}

impl NullProjector {
    fn new(s: &Surrogate, working: &[usize]) -> Result<Self> {
        let dim = s.dim;
        let mut p = Mat::<f64>::identity(dim, dim);
        if working.is_empty() {
            return Ok(NullProjector { p, rank: 0 });
        }
        let a = Mat::from_fn(working.len(), dim, |r, c| s.row(working[r])[c]);
        let svd = a.thin_svd().map_err(|_| Error::Degenerate("SVD of knot constraints failed".into()))?;
        let sv = svd.S().column_vector();
        let smax = (0..sv.nrows()).fold(0.0f64, |m, k| m.max(sv[k]));
        let eps = smax * 1e-12 * dim as f64;
        let v = svd.V();
        let mut rank = 0;
        for k in 0..sv.nrows() {
            if sv[k] > eps {
                for r in 0..dim {
                    for c in 0..dim {
                        p[(r, c)] -= v[(r, k)] * v[(c, k)];
                    }
                }
                rank += 1;
            }
        }
        Ok(NullProjector { p, rank })
    }
}

/// Minimum-norm least-squares solution of `m z = r`. Singular values below
/// `1e-12 · scale · max(rows, cols)` are treated as zero.
fn min_norm_solve(m: Mat<f64>, r: &[f64], scale: f64) -> Result<Vec<f64>> {
    let (rows, cols) = (m.nrows(), m.ncols());
    let mut z = vec![0.0; cols];
    if rows == 0 || cols == 0 {
        return Ok(z);
    }
    let eps = scale * 1e-12 * rows.max(cols) as f64;
    let svd = m
        .thin_svd()
        .map_err(|_| Error::Degenerate("SVD of least-squares system failed".into()))?;
    let (u, v, sv) = (svd.U(), svd.V(), svd.S().column_vector());
    for k in 0..sv.nrows() {
        if sv[k] > eps {
            let coef = (0..rows).map(|i| u[(i, k)] * r[i]).sum::<f64>() / sv[k];
            for (j, zj) in z.iter_mut().enumerate() {
                *zj += coef * v[(j, k)];
            }
        }
    }
    Ok(z)
}
