//! The σ surrogate, the convex tail φ over non-positive labels, the
//! surrogate objective for a fixed active set, and the asymptotic integrand
//! ψ_y with its empirical average.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Params};
use crate::error::{Error, Result};
use crate::numeric::{relu, sum_terms};

/// Convex majorant of `(max{0,x} − y)²` for `y > 0`: `(x − y)²` when
/// `x > 2y`, otherwise `y²`.
#[inline]
pub fn sigma(x: f64, y: f64) -> f64 {
    if x > 2.0 * y {
        (x - y) * (x - y)
    } else {
        y * y
    }
}

/// Derivative of [`sigma`] in `x`; the kink at `x = 2y` takes the left piece.
#[inline]
pub fn sigma_dx(x: f64, y: f64) -> f64 {
    if x > 2.0 * y {
        2.0 * (x - y)
    } else {
        0.0
    }
}

/// A subset of the positive-label samples assumed to sit on the linear
/// piece of the ReLU. Members are sample ids, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActiveSet {
    members: Vec<usize>,
}

impl ActiveSet {
    /// Validates that every member is in `I⁺` of `d`.
    pub fn new(d: &Dataset, mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        for &i in &members {
            if i >= d.n() || d.y(i) <= 0.0 {
                return Err(Error::NotPositive(i));
            }
        }
        Ok(ActiveSet { members })
    }

    pub fn empty() -> Self {
        ActiveSet { members: Vec::new() }
    }

    /// Every positive-label sample active.
    pub fn all(d: &Dataset) -> Self {
        let mut members = d.pos_idx().to_vec();
        members.sort_unstable();
        ActiveSet { members }
    }

    /// Builds the active set from an inactive set given as ranks (0-based
    /// positions in the `y`-sorted order of `I⁺`).
    pub fn from_inactive_ranks(d: &Dataset, inactive: &[usize]) -> Self {
        let pos = d.pos_idx();
        let mut off = vec![false; pos.len()];
        for &r in inactive {
            off[r] = true;
        }
        let mut members: Vec<usize> = pos
            .iter()
            .zip(&off)
            .filter(|(_, &o)| !o)
            .map(|(&i, _)| i)
            .collect();
        members.sort_unstable();
        ActiveSet { members }
    }

    /// Active positive samples with `x_iᵀβ + β₀ > 0`.
    pub fn from_params(d: &Dataset, theta: &Params) -> Self {
        let mut members: Vec<usize> = d
            .pos_idx()
            .iter()
            .copied()
            .filter(|&i| d.linear(i, theta) > 0.0)
            .collect();
        members.sort_unstable();
        ActiveSet { members }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &i in &self.members {
            m[i] = true;
        }
        m
    }

    fn check(&self, d: &Dataset) -> Result<()> {
        for &i in &self.members {
            if i >= d.n() || d.y(i) <= 0.0 {
                return Err(Error::NotPositive(i));
            }
        }
        Ok(())
    }
}

/// Subgradient with respect to `(β, β₀)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgradientVector {
    pub g_beta: Vec<f64>,
    pub g_beta0: f64,
}

impl SubgradientVector {
    pub fn norm(&self) -> f64 {
        (self.g_beta.iter().map(|v| v * v).sum::<f64>() + self.g_beta0 * self.g_beta0).sqrt()
    }
}

/// `Σ_{i ∈ I⁻} (max{0, x_iᵀβ + β₀} − y_i)²`.
pub fn phi(d: &Dataset, theta: &Params) -> Result<f64> {
    d.check_params(theta)?;
    let neg = d.neg_idx();
    Ok(sum_terms(
        neg.len(),
        neg.iter().map(|&i| {
            let r = relu(d.linear(i, theta)) - d.y(i);
            r * r
        }),
    ))
}

/// Surrogate for a fixed active set: squared residuals on `I`, σ on
/// `I⁺ \ I`, plus φ.
pub fn surrogate_objective(d: &Dataset, active: &ActiveSet, theta: &Params) -> Result<f64> {
    d.check_params(theta)?;
    active.check(d)?;
    let pos = d.pos_idx();
    let head = sum_terms(
        pos.len(),
        pos.iter().map(|&i| {
            let u = d.linear(i, theta);
            if active.contains(i) {
                (u - d.y(i)) * (u - d.y(i))
            } else {
                sigma(u, d.y(i))
            }
        }),
    );
    Ok(head + phi(d, theta)?)
}

/// A subgradient of [`surrogate_objective`]. Kinks (σ at `x = 2y`, φ terms
/// at `x = 0`) contribute zero.
pub fn subgradient_surrogate(
    d: &Dataset,
    active: &ActiveSet,
    theta: &Params,
) -> Result<SubgradientVector> {
    d.check_params(theta)?;
    active.check(d)?;
    let p = d.p();
    let mut g = vec![0.0; p + 1];
    for i in 0..d.n() {
        let u = d.linear(i, theta);
        let y = d.y(i);
        let slope = if y <= 0.0 {
            if u > 0.0 {
                2.0 * (u - y)
            } else {
                0.0
            }
        } else if active.contains(i) {
            2.0 * (u - y)
        } else {
            sigma_dx(u, y)
        };
        if slope != 0.0 {
            for (gj, xj) in g.iter_mut().zip(d.x(i)) {
                *gj += slope * xj;
            }
            g[p] += slope;
        }
    }
    let g_beta0 = g.pop().unwrap();
    Ok(SubgradientVector { g_beta: g, g_beta0 })
}

/// Asymptotic integrand: σ on `0 < Y <= y`, plain squared residual on
/// `Y > y`, ReLU residual on `Y <= 0`.
#[inline]
pub fn psi_y(u: f64, big_y: f64, y: f64) -> f64 {
    if big_y <= 0.0 {
        let r = relu(u) - big_y;
        r * r
    } else if big_y <= y {
        sigma(u, big_y)
    } else {
        (u - big_y) * (u - big_y)
    }
}

/// `(1/n) Σ_i ψ_y(x_iᵀβ + β₀, Y_i)`.
pub fn empirical_s(d: &Dataset, theta: &Params, y: f64) -> Result<f64> {
    d.check_params(theta)?;
    if y.is_nan() || y < 0.0 {
        return Err(Error::InvalidArgument("threshold y must be >= 0".into()));
    }
    let n = d.n();
    let total = sum_terms(n, (0..n).map(|i| psi_y(d.linear(i, theta), d.y(i), y)));
    Ok(total / n as f64)
}
