//! Synthetic instances with a planted ReLU model, the decibel noise scale,
//! and the asymptotic objective bracket with a Monte Carlo estimate.
//!
//! Draw order for [`generate_instance`] is fixed: β*, then the training
//! design row-major, then the training noise, then the test design and the
//! test noise. One ChaCha8 stream per instance.

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{build_dataset, Dataset, Params, Sample};
use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};
use crate::loss::{empirical_s, psi_y};
use crate::numeric::{dot, relu, sum_terms};

/// Noise scale for a signal-to-noise level in decibels: `10^(−dB/20)`.
/// `+∞` maps to 0.
pub fn db_to_rho(db: f64) -> f64 {
    if db == f64::INFINITY {
        0.0
    } else {
        10f64.powf(-db / 20.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatModelSpec {
    pub p: usize,
    pub n: usize,
    /// Probability that a design entry is nonzero.
    pub sparsity: f64,
    pub beta_star_mean: f64,
    pub beta_star_var: f64,
    /// Signal-to-noise ratio in dB; `"inf"` in JSON for the noiseless case.
    #[serde(with = "db_serde")]
    pub db: f64,
    /// Make the first `p` training rows `e_i·sgn(β*_i)`.
    #[serde(default)]
    pub realizable_rows: bool,
    pub seed: u64,
}

impl StatModelSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.p == 0 || self.n == 0 {
            return bad("p and n must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.sparsity) {
            return bad(format!("sparsity {} outside [0, 1]", self.sparsity));
        }
        if !self.beta_star_mean.is_finite() || !(self.beta_star_var >= 0.0) || !self.beta_star_var.is_finite() {
            return bad("beta_star_mean must be finite and beta_star_var finite and >= 0".into());
        }
        if !(self.db > 0.0) {
            return bad(format!("dB must be positive or infinite, got {}", self.db));
        }
        if self.realizable_rows && self.n < self.p {
            return bad(format!("realizable rows need n >= p ({} < {})", self.n, self.p));
        }
        Ok(())
    }

    pub fn rho(&self) -> f64 {
        db_to_rho(self.db)
    }
}

/// Ground truth recorded next to a generated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    /// `β*` with `β₀* = 0`.
    pub params: Params,
    /// Empirical standard deviation of `Xᵀβ*` on the training design.
    pub sigma: f64,
    pub rho: f64,
    /// Population `β*ᵀΣβ*` of the design distribution (`Σ = P·I`).
    pub delta_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub train: Dataset,
    pub test: Dataset,
    pub truth: Truth,
}

fn design_row<R: Rng>(rng: &mut R, p: usize, sparsity: f64) -> Vec<f64> {
    (0..p)
        .map(|_| {
            let u: f64 = rng.random();
            if u < sparsity / 2.0 {
                1.0
            } else if u < sparsity {
                -1.0
            } else {
                0.0
            }
        })
        .collect()
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn generate_instance(spec: &StatModelSpec) -> Result<Instance> {
    spec.validate()?;
    let (p, n) = (spec.p, spec.n);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let prior = Normal::new(spec.beta_star_mean, spec.beta_star_var.sqrt())
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let beta: Vec<f64> = (0..p).map(|_| prior.sample(&mut rng)).collect();

    let fixed = if spec.realizable_rows { p } else { 0 };
    let mut xs: Vec<Vec<f64>> = (0..fixed)
        .map(|i| {
            let mut e = vec![0.0; p];
            e[i] = sgn(beta[i]);
            e
        })
        .collect();
    xs.extend((fixed..n).map(|_| design_row(&mut rng, p, spec.sparsity)));

    let z: Vec<f64> = xs.iter().map(|x| dot(x, &beta)).collect();
    let mean = sum_terms(n, z.iter().copied()) / n as f64;
    let sigma = (sum_terms(n, z.iter().map(|v| (v - mean) * (v - mean))) / n as f64).sqrt();
    let rho = spec.rho();
    if rho > 0.0 && sigma == 0.0 {
        return Err(Error::Degenerate(
            "signal Xᵀβ* is constant on the training design; noise scale ρσ is undefined".into(),
        ));
    }
    let noise_sd = rho * sigma;
    let noise = |rng: &mut ChaCha8Rng| {
        if noise_sd > 0.0 {
            let e: f64 = rng.sample(StandardNormal);
            noise_sd * e
        } else {
            0.0
        }
    };
    let train: Vec<Sample> = xs
        .into_iter()
        .zip(&z)
        .map(|(x, &zi)| Sample::new(x, relu(zi) + noise(&mut rng)))
        .collect();

    let test_x: Vec<Vec<f64>> = (0..n).map(|_| design_row(&mut rng, p, spec.sparsity)).collect();
    let test: Vec<Sample> = test_x
        .into_iter()
        .map(|x| {
            let clean = relu(dot(&x, &beta));
            Sample::new(x, clean + noise(&mut rng))
        })
        .collect();

    let delta_sq = spec.sparsity * dot(&beta, &beta);
    Ok(Instance {
        train: build_dataset(train)?,
        test: build_dataset(test)?,
        truth: Truth {
            params: Params::new(beta, 0.0),
            sigma,
            rho,
            delta_sq,
        },
    })
}

/// `β*ᵀΣβ*`. `sigma` is row-major `p × p` and must be symmetric.
pub fn delta_squared(beta_star: &[f64], sigma: &[Vec<f64>]) -> Result<f64> {
    let p = beta_star.len();
    if sigma.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: sigma.len() });
    }
    for row in sigma {
        if row.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: row.len() });
        }
    }
    for i in 0..p {
        for j in 0..i {
            let (a, b) = (sigma[i][j], sigma[j][i]);
            if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                return Err(Error::InvalidArgument(format!("Sigma is not symmetric at ({i}, {j})")));
            }
        }
    }
    let v: Vec<f64> = sigma.iter().map(|row| dot(row, beta_star)).collect();
    Ok(dot(beta_star, &v))
}

/// Bracket on the asymptotic objective for noise std `γ` and signal
/// variance `Δ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticBracket {
    pub lower: f64,
    pub upper: f64,
    pub gamma: f64,
    pub delta_sq: f64,
    /// `upper / γ²`; absent when `γ = 0`.
    pub ratio_bound: Option<f64>,
}

pub fn asymptotic_bracket(gamma: f64, delta_sq: f64) -> Result<AsymptoticBracket> {
    if !(gamma >= 0.0) || !gamma.is_finite() || !(delta_sq >= 0.0) || !delta_sq.is_finite() {
        return Err(Error::InvalidArgument("gamma and delta_sq must be finite and >= 0".into()));
    }
    let lower = gamma * gamma;
    let slope = (2.0 + 2.0 * delta_sq) / (2.0 * std::f64::consts::PI).sqrt();
    let upper = 1.5 * gamma * gamma + slope * gamma;
    let ratio_bound = (gamma > 0.0).then(|| 1.5 + slope / gamma);
    Ok(AsymptoticBracket { lower, upper, gamma, delta_sq, ratio_bound })
}

/// Gaussian-design model: `X ~ N(0, Σ)`, `Y = max{0, Xᵀβ*} + ε`,
/// `ε ~ N(0, γ²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianModel {
    /// Row-major covariance.
    pub sigma: Vec<Vec<f64>>,
    pub beta_star: Vec<f64>,
    pub gamma: f64,
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    /// `S⁰_n` at `(β*, 0)`.
    pub estimate: f64,
    pub std_error: f64,
    pub bracket: AsymptoticBracket,
}

pub const MIN_MONTE_CARLO_N: usize = 1000;
const CHUNK: usize = 8192;

/// Square factor `L` with `LLᵀ = Σ`, from the symmetric eigendecomposition
/// so that singular PSD covariances work too.
fn covariance_factor(sigma: &[Vec<f64>]) -> Result<Mat<f64>> {
    let p = sigma.len();
    let m = Mat::from_fn(p, p, |i, j| sigma[i][j]);
    let eig = m
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Degenerate(format!("eigendecomposition failed: {e:?}")))?;
    let vals = eig.S().column_vector();
    let scale = (0..p).map(|i| vals[i].abs()).fold(0.0, f64::max);
    for i in 0..p {
        if vals[i] < -1e-10 * scale.max(1.0) {
            return Err(Error::InvalidArgument("Sigma is not positive semidefinite".into()));
        }
    }
    let u = eig.U();
    Ok(Mat::from_fn(p, p, |i, j| u[(i, j)] * vals[j].max(0.0).sqrt()))
}

/// Samples the Gaussian model and evaluates `S⁰_n` at the truth.
///
/// Rows come in chunks of 8192, each with its own ChaCha8 stream, so the
/// result does not depend on `exec`.
pub fn monte_carlo_check(model: &GaussianModel, exec: Execution) -> Result<MonteCarloEstimate> {
    let p = model.beta_star.len();
    if model.n < MIN_MONTE_CARLO_N {
        return Err(Error::InvalidArgument(format!(
            "Monte Carlo needs n >= {MIN_MONTE_CARLO_N}, got {}",
            model.n
        )));
    }
    if p == 0 {
        return Err(Error::InvalidArgument("beta_star must be nonempty".into()));
    }
    let delta_sq = delta_squared(&model.beta_star, &model.sigma)?;
    let bracket = asymptotic_bracket(model.gamma, delta_sq.max(0.0))?;
    let factor = covariance_factor(&model.sigma)?;

    let n = model.n;
    let chunks = n.div_ceil(CHUNK);
    let parts = map_range(exec, chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
        rng.set_stream(c as u64);
        let rows = CHUNK.min(n - c * CHUNK);
        let mut out = Vec::with_capacity(rows);
        let mut w = vec![0.0; p];
        for _ in 0..rows {
            for wj in w.iter_mut() {
                *wj = rng.sample(StandardNormal);
            }
            let x: Vec<f64> = (0..p).map(|i| (0..p).map(|j| factor[(i, j)] * w[j]).sum()).collect();
            let e: f64 = rng.sample(StandardNormal);
            let y = relu(dot(&x, &model.beta_star)) + model.gamma * e;
            out.push(Sample::new(x, y));
        }
        out
    });
    let d = build_dataset(parts.into_iter().flatten().collect())?;
    let truth = Params::new(model.beta_star.clone(), 0.0);
    let estimate = empirical_s(&d, &truth, 0.0)?;
    let var = sum_terms(
        n,
        (0..n).map(|i| {
            let t = psi_y(d.linear(i, &truth), d.y(i), 0.0) - estimate;
            t * t
        }),
    ) / (n - 1) as f64;
    Ok(MonteCarloEstimate {
        estimate,
        std_error: (var / n as f64).sqrt(),
        bracket,
    })
}

mod db_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) => match t.to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
                other => other.parse().map_err(serde::de::Error::custom),
            },
        }
    }
}
