//! Dirichlet distribution on the open simplex: density, sampling,
//! differential entropy, and moment / maximum-likelihood fitting.
//!
//! A point in `K` free coordinates carries the implied completion
//! `x_{K+1} = 1 - sum x_k`; parameter vectors have length `K + 1`.

pub mod special;

use std::f64::consts::LN_2;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
pub use special::{digamma, log_gamma, trigamma};
use special::{digamma_unchecked, log_gamma_unchecked, trigamma_unchecked};

/// Coordinates (and completions) below this are clipped before fitting.
pub const CLIP_FLOOR: f64 = 1e-12;
pub const ALPHA_MIN: f64 = 1e-6;
pub const ALPHA_MAX: f64 = 1e6;

const MLE_GRAD_TOL: f64 = 1e-8;
const MLE_MAX_ITERS: usize = 100;
const MLE_MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams(Vec<f64>);

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::domain(format!(
                "Dirichlet needs at least 2 parameters, got {}",
                alpha.len()
            )));
        }
        if let Some(i) = alpha.iter().position(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::domain(format!(
                "alpha[{i}] = {} is not positive and finite",
                alpha[i]
            )));
        }
        Ok(Self(alpha))
    }

    pub fn alpha(&self) -> &[f64] {
        &self.0
    }

    /// Number of free coordinates `K` (one less than the parameter count).
    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    pub fn concentration(&self) -> f64 {
        self.0.iter().sum()
    }

    /// `ln Γ(α_0) - sum ln Γ(α_k)`.
    pub fn log_normalizer(&self) -> f64 {
        log_gamma_unchecked(self.concentration())
            - self.0.iter().map(|&a| log_gamma_unchecked(a)).sum::<f64>()
    }

    pub fn mean(&self) -> Vec<f64> {
        let a0 = self.concentration();
        self.0.iter().map(|a| a / a0).collect()
    }

    pub fn variance(&self) -> Vec<f64> {
        let a0 = self.concentration();
        self.0
            .iter()
            .map(|a| a * (a0 - a) / (a0 * a0 * (a0 + 1.0)))
            .collect()
    }

    pub fn log_pdf(&self, x: &SimplexPoint) -> Result<f64> {
        if x.dim() != self.dim() {
            return Err(Error::domain(format!(
                "point has {} coordinates, parameters expect {}",
                x.dim(),
                self.dim()
            )));
        }
        Ok(self.log_pdf_full(&x.full()))
    }

    /// Log density at a point given with all `K + 1` coordinates.
    pub(crate) fn log_pdf_full(&self, coords: &[f64]) -> f64 {
        self.log_normalizer()
            + self
                .0
                .iter()
                .zip(coords)
                .map(|(a, x)| (a - 1.0) * x.ln())
                .sum::<f64>()
    }

    /// Differential entropy of the `K`-dimensional density, in bits.
    pub fn entropy_bits(&self) -> f64 {
        let a0 = self.concentration();
        let n = self.0.len() as f64;
        let nats = -self.log_normalizer() + (a0 - n) * digamma_unchecked(a0)
            - self
                .0
                .iter()
                .map(|&a| (a - 1.0) * digamma_unchecked(a))
                .sum::<f64>();
        nats / LN_2
    }

    /// Gamma-normalization draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SimplexPoint {
        let mut g: Vec<f64> = self
            .0
            .iter()
            .map(|&a| Gamma::new(a, 1.0).expect("validated shape").sample(rng))
            .collect();
        let total: f64 = g.iter().sum();
        if total > 0.0 {
            g.iter_mut().for_each(|v| *v /= total);
        }
        clip_to_interior(&mut g);
        g.pop();
        SimplexPoint(g)
    }

    pub fn sample_seeded(&self, seed: u64) -> SimplexPoint {
        self.sample(&mut ChaCha8Rng::seed_from_u64(seed))
    }
}

/// Point in the open simplex, stored as its `K` free coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::domain("simplex point needs at least one coordinate"));
        }
        if let Some(i) = x.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::domain(format!("coordinate {i} = {} is not positive", x[i])));
        }
        let completion = 1.0 - x.iter().sum::<f64>();
        if !(completion > 0.0) {
            return Err(Error::domain(format!(
                "coordinates sum to {} >= 1",
                1.0 - completion
            )));
        }
        Ok(Self(x))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn completion(&self) -> f64 {
        1.0 - self.0.iter().sum::<f64>()
    }

    /// All `K + 1` coordinates including the completion.
    pub fn full(&self) -> Vec<f64> {
        let mut v = self.0.clone();
        v.push(self.completion());
        v
    }
}

/// Clips coordinates below [`CLIP_FLOOR`] and renormalizes to unit sum.
/// Returns whether anything was clipped.
pub(crate) fn clip_to_interior(coords: &mut [f64]) -> bool {
    let mut clipped = false;
    for v in coords.iter_mut() {
        if !(*v >= CLIP_FLOOR) {
            *v = CLIP_FLOOR;
            clipped = true;
        }
    }
    if clipped {
        let total: f64 = coords.iter().sum();
        coords.iter_mut().for_each(|v| *v /= total);
    }
    clipped
}

/// A data set of simplex points with all `K + 1` coordinates and their logs
/// stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexData {
    dim: usize,
    coords: Vec<f64>,
    log_coords: Vec<f64>,
    clipped: usize,
}

impl SimplexData {
    /// Builds from rows of `K` free coordinates. Rows must be finite, of
    /// equal length and sum to less than one up to clipping; coordinates or
    /// completions below [`CLIP_FLOOR`] are clipped and counted.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::domain("no data rows"))?
            .as_ref();
        let dim = first.len();
        if dim == 0 {
            return Err(Error::domain("rows need at least one coordinate"));
        }
        let mut coords = Vec::with_capacity(rows.len() * (dim + 1));
        let mut clipped = 0;
        let mut buf = vec![0.0; dim + 1];
        for (n, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::domain(format!(
                    "row {n} has {} coordinates, expected {dim}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::domain(format!("row {n} has a negative or non-finite coordinate")));
            }
            buf[..dim].copy_from_slice(row);
            buf[dim] = 1.0 - row.iter().sum::<f64>();
            if buf[dim] < -1e-9 {
                return Err(Error::domain(format!("row {n} sums to more than one")));
            }
            if clip_to_interior(&mut buf) {
                clipped += 1;
            }
            coords.extend_from_slice(&buf);
        }
        let log_coords = coords.iter().map(|v| v.ln()).collect();
        Ok(Self {
            dim,
            coords,
            log_coords,
            clipped,
        })
    }

    pub fn from_points(points: &[SimplexPoint]) -> Result<Self> {
        let rows: Vec<&[f64]> = points.iter().map(SimplexPoint::coords).collect();
        Self::from_rows(&rows)
    }

    /// Number of free coordinates `K`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / (self.dim + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Rows that needed clipping on construction.
    pub fn clipped(&self) -> usize {
        self.clipped
    }

    /// Row `n` with all `K + 1` coordinates.
    pub fn row(&self, n: usize) -> &[f64] {
        let w = self.dim + 1;
        &self.coords[n * w..(n + 1) * w]
    }

    pub fn log_row(&self, n: usize) -> &[f64] {
        let w = self.dim + 1;
        &self.log_coords[n * w..(n + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim + 1)
    }

    pub fn log_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.log_coords.chunks_exact(self.dim + 1)
    }
}

fn check_weights(data: &SimplexData, weights: Option<&[f64]>) -> Result<()> {
    if let Some(w) = weights {
        if w.len() != data.len() {
            return Err(Error::domain(format!(
                "{} weights for {} samples",
                w.len(),
                data.len()
            )));
        }
        if let Some(i) = w.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::domain(format!("weight {i} = {} is invalid", w[i])));
        }
        if !w.iter().any(|&v| v > 0.0) {
            return Err(Error::domain("all weights are zero"));
        }
    }
    if data.is_empty() {
        return Err(Error::domain("no data"));
    }
    Ok(())
}

/// Weighted sufficient statistics of the Dirichlet log-likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffStats {
    pub total_weight: f64,
    /// `sum_n w_n ln x_nk` for `k = 1..K+1`.
    pub log_sums: Vec<f64>,
}

impl SuffStats {
    pub fn from_data(data: &SimplexData, weights: Option<&[f64]>) -> Result<Self> {
        check_weights(data, weights)?;
        let mut log_sums = vec![0.0; data.dim() + 1];
        let mut total_weight = 0.0;
        for (n, lr) in data.log_rows().enumerate() {
            let w = weights.map_or(1.0, |w| w[n]);
            total_weight += w;
            log_sums.iter_mut().zip(lr).for_each(|(s, l)| *s += w * l);
        }
        Ok(Self {
            total_weight,
            log_sums,
        })
    }

    /// Weighted log-likelihood at `alpha`.
    pub fn log_likelihood(&self, alpha: &[f64]) -> f64 {
        let a0: f64 = alpha.iter().sum();
        self.total_weight
            * (log_gamma_unchecked(a0) - alpha.iter().map(|&a| log_gamma_unchecked(a)).sum::<f64>())
            + alpha
                .iter()
                .zip(&self.log_sums)
                .map(|(a, s)| (a - 1.0) * s)
                .sum::<f64>()
    }

    pub fn gradient(&self, alpha: &[f64]) -> Vec<f64> {
        let psi0 = digamma_unchecked(alpha.iter().sum());
        alpha
            .iter()
            .zip(&self.log_sums)
            .map(|(&a, s)| self.total_weight * (psi0 - digamma_unchecked(a)) + s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentFit {
    pub params: DirichletParams,
    /// Set when the data had no usable spread and `alpha = mean * 10` was used.
    pub degenerate: bool,
}

/// Method of moments: weighted means, with the precision taken from the
/// summed variances, `α_0 + 1 = sum m_k (1 - m_k) / sum v_k`.
pub fn fit_moments(data: &SimplexData, weights: Option<&[f64]>) -> Result<MomentFit> {
    check_weights(data, weights)?;
    let width = data.dim() + 1;
    let w_at = |n: usize| weights.map_or(1.0, |w| w[n]);
    let total: f64 = (0..data.len()).map(w_at).sum();
    let sq: f64 = (0..data.len()).map(|n| w_at(n) * w_at(n)).sum();
    let mut mean = vec![0.0; width];
    for (n, row) in data.rows().enumerate() {
        let w = w_at(n);
        mean.iter_mut().zip(row).for_each(|(m, x)| *m += w * x);
    }
    mean.iter_mut().for_each(|m| *m /= total);
    let mut var = vec![0.0; width];
    for (n, row) in data.rows().enumerate() {
        let w = w_at(n);
        var.iter_mut()
            .zip(row.iter().zip(&mean))
            .for_each(|(v, (x, m))| *v += w * (x - m) * (x - m));
    }
    var.iter_mut().for_each(|v| *v /= total);

    let spread: f64 = mean.iter().map(|m| m * (1.0 - m)).sum();
    let var_sum: f64 = var.iter().sum();
    let effective = total * total / sq;
    let precision = spread / var_sum - 1.0;
    let degenerate = effective < 2.0 || !(var_sum > 1e-14 * spread) || !(precision > 0.0) || !precision.is_finite();
    let scale = if degenerate { 10.0 } else { precision };
    let alpha = mean
        .iter()
        .map(|m| (m * scale).clamp(ALPHA_MIN, ALPHA_MAX))
        .collect();
    Ok(MomentFit {
        params: DirichletParams::new(alpha)?,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleFit {
    pub params: DirichletParams,
    pub iterations: usize,
    /// Infinity norm of the log-likelihood gradient at the returned point.
    pub gradient_norm: f64,
    pub converged: bool,
    /// Some parameter sits on the `[ALPHA_MIN, ALPHA_MAX]` boundary.
    pub clamped: bool,
    pub log_likelihood: f64,
}

/// Weighted maximum likelihood by safeguarded Newton iteration, starting
/// from `init`.
pub fn fit_mle(
    data: &SimplexData,
    weights: Option<&[f64]>,
    init: &DirichletParams,
) -> Result<MleFit> {
    let stats = SuffStats::from_data(data, weights)?;
    fit_mle_stats(&stats, init)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Newton direction `H^{-1} g` for the diagonal-plus-rank-one Hessian
/// `H = W (ψ'(α_0) 1 1^T - diag ψ'(α_k))`.
fn newton_direction(total_weight: f64, alpha: &[f64], grad: &[f64]) -> Vec<f64> {
    let z = total_weight * trigamma_unchecked(alpha.iter().sum());
    let q: Vec<f64> = alpha
        .iter()
        .map(|&a| -total_weight * trigamma_unchecked(a))
        .collect();
    let num: f64 = grad.iter().zip(&q).map(|(g, q)| g / q).sum();
    let den: f64 = 1.0 / z + q.iter().map(|q| 1.0 / q).sum::<f64>();
    let b = num / den;
    grad.iter().zip(&q).map(|(g, q)| (g - b) / q).collect()
}

pub fn fit_mle_stats(stats: &SuffStats, init: &DirichletParams) -> Result<MleFit> {
    let width = init.alpha().len();
    if stats.log_sums.len() != width {
        return Err(Error::domain(format!(
            "statistics have {} coordinates, init has {width}",
            stats.log_sums.len()
        )));
    }
    if let Some(k) = stats.log_sums.iter().position(|s| !s.is_finite()) {
        return Err(Error::numeric(format!("log-statistic {k} is not finite")));
    }
    if !(stats.total_weight > 0.0) || !stats.total_weight.is_finite() {
        return Err(Error::domain(format!(
            "total weight {} must be positive",
            stats.total_weight
        )));
    }

    let mut alpha: Vec<f64> = init
        .alpha()
        .iter()
        .map(|a| a.clamp(ALPHA_MIN, ALPHA_MAX))
        .collect();
    let mut ll = stats.log_likelihood(&alpha);
    let mut grad = stats.gradient(&alpha);
    let mut gnorm = inf_norm(&grad);
    let mut iterations = 0;

    while gnorm >= MLE_GRAD_TOL && iterations < MLE_MAX_ITERS {
        if !ll.is_finite() {
            return Err(Error::numeric("log-likelihood is not finite".to_string()));
        }
        if let Some(k) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::numeric(format!("gradient component {k} is not finite")));
        }
        let dir = newton_direction(stats.total_weight, &alpha, &grad);
        // near the optimum likelihood differences drown in rounding, so
        // steps inside the slack band must reduce the gradient instead
        let slack = 16.0 * f64::EPSILON * (ll.abs() + 1.0);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=MLE_MAX_HALVINGS {
            let cand: Vec<f64> = alpha
                .iter()
                .zip(&dir)
                .map(|(a, d)| (a - step * d).clamp(ALPHA_MIN, ALPHA_MAX))
                .collect();
            let cand_ll = stats.log_likelihood(&cand);
            if cand_ll.is_finite() {
                if cand_ll > ll + slack {
                    accepted = Some((cand, cand_ll));
                    break;
                }
                if cand_ll >= ll - slack {
                    let cand_grad = stats.gradient(&cand);
                    if inf_norm(&cand_grad) < gnorm {
                        accepted = Some((cand, cand_ll));
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        let Some((cand, cand_ll)) = accepted else {
            break;
        };
        iterations += 1;
        let moved = cand != alpha;
        alpha = cand;
        ll = cand_ll;
        grad = stats.gradient(&alpha);
        gnorm = inf_norm(&grad);
        if !moved {
            break;
        }
    }
    if let Some(k) = alpha.iter().position(|a| !a.is_finite()) {
        return Err(Error::numeric(format!("alpha[{k}] is not finite")));
    }
    let clamped = alpha.iter().any(|&a| a <= ALPHA_MIN || a >= ALPHA_MAX);
    Ok(MleFit {
        params: DirichletParams::new(alpha)?,
        iterations,
        gradient_norm: gnorm,
        converged: gnorm < MLE_GRAD_TOL,
        clamped,
        log_likelihood: ll,
    })
}
