//! High-rate distortion-rate bound for a Dirichlet mixture source: the
//! quantizer coefficient, per-component bit allocation, the ΔLSF to LSF
//! distortion transform, the empirical MSE to LSD polynomial and the
//! minimum transparent rate.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::dirichlet::special::log_gamma_unchecked;
use crate::dmm::{mixture_entropy_terms, DirichletMixture};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoefficientMode {
    /// `(1/π) (K/(K+2)) ((K/2) Γ(K/2))^{2/K}`.
    #[default]
    GammaRatio,
    /// Classical sphere bound `Γ(K/2+1)^{2/K} / ((K+2) π)`.
    SphereBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransformMode {
    /// Linear propagation through the cumulative sum with isotropic cell
    /// error: `D_s = π² (K+1)/2 · D_x`.
    #[default]
    IsotropicCell,
    /// Scaling by the `1/π` normalization only: `D_s = π² · D_x`.
    JacobianOnly,
}

pub fn quantization_coefficient(k: usize, mode: CoefficientMode) -> Result<f64> {
    if k == 0 {
        return Err(Error::domain("dimension must be at least 1"));
    }
    let kf = k as f64;
    // (K/2) Γ(K/2) = Γ(K/2 + 1)
    let g = match gamma_half_integer(k) {
        Some(gamma) => gamma.powf(2.0 / kf),
        None => (2.0 / kf * log_gamma_unchecked(kf / 2.0 + 1.0)).exp(),
    };
    Ok(match mode {
        CoefficientMode::GammaRatio => kf / (kf + 2.0) * g / PI,
        CoefficientMode::SphereBound => g / ((kf + 2.0) * PI),
    })
}

/// `Γ(k/2 + 1)` as an exact product while it stays comfortably finite.
fn gamma_half_integer(k: usize) -> Option<f64> {
    if k > 300 {
        return None;
    }
    let (mut g, mut x) = if k.is_multiple_of(2) { (1.0, 1.0) } else { (PI.sqrt() / 2.0, 1.5) };
    while x < k as f64 / 2.0 + 0.75 {
        g *= x;
        x += 1.0;
    }
    Some(g)
}

fn check_rate(model: &DirichletMixture, rate: f64) -> Result<f64> {
    let min = (model.num_components() as f64).log2();
    if !(rate.is_finite() && rate > min) {
        return Err(Error::InsufficientRate { rate, min });
    }
    Ok(rate - min)
}

/// Rate of each component given the total rate `R`; the component index
/// costs `log2 I` bits and the rest follows the entropy differences.
pub fn component_rates(model: &DirichletMixture, rate: f64) -> Result<Vec<f64>> {
    let rq = check_rate(model, rate)?;
    let h = mixture_entropy_terms(model);
    Ok(h.per_component.iter().map(|hi| rq + hi - h.mean).collect())
}

/// Per-dimension MSE in the ΔLSF domain at `rate` bits per vector.
pub fn distortion_rate(model: &DirichletMixture, rate: f64, mode: CoefficientMode) -> Result<f64> {
    let rq = check_rate(model, rate)?;
    let k = model.dim() as f64;
    let c = quantization_coefficient(model.dim(), mode)?;
    let h = mixture_entropy_terms(model).mean;
    Ok(c * (-(2.0 / k) * (rq - h)).exp2())
}

pub fn transform_distortion(d_x: f64, k: usize, mode: TransformMode) -> Result<f64> {
    if !(d_x >= 0.0 && d_x.is_finite()) {
        return Err(Error::domain(format!("distortion {d_x} must be finite and nonnegative")));
    }
    if k == 0 {
        return Err(Error::domain("dimension must be at least 1"));
    }
    Ok(match mode {
        TransformMode::IsotropicCell => PI * PI * (k as f64 + 1.0) / 2.0 * d_x,
        TransformMode::JacobianOnly => PI * PI * d_x,
    })
}

/// Cubic MSE to LSD map. Stored coefficients are multiplied by
/// `10^scale_exponent` before use.
#[derive(Debug, Clone, PartialEq)]
pub struct LsdPolynomial {
    coeffs: [f64; 4],
    scale_exponent: i32,
    mse_max: f64,
}

pub const DEFAULT_LSD_COEFFS: [f64; 4] = [0.0000, 0.0023, -0.1291, 3.7704];

impl Default for LsdPolynomial {
    fn default() -> Self {
        Self::new(DEFAULT_LSD_COEFFS, 5, 0.01).expect("default polynomial is monotone")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsdValue {
    pub lsd_db: f64,
    /// The argument lies beyond the range on which monotonicity was checked.
    pub out_of_domain: bool,
}

impl LsdPolynomial {
    /// Rejects polynomials whose derivative is not strictly positive on
    /// `[0, mse_max]`.
    pub fn new(coeffs: [f64; 4], scale_exponent: i32, mse_max: f64) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("polynomial coefficients must be finite"));
        }
        if !(mse_max > 0.0 && mse_max.is_finite()) {
            return Err(Error::domain("mse_max must be positive"));
        }
        let p = Self {
            coeffs,
            scale_exponent,
            mse_max,
        };
        if let Some(x) = p.derivative_root_in_domain() {
            return Err(Error::domain(format!(
                "polynomial is not increasing on [0, {mse_max}]: derivative vanishes at MSE {x:e}"
            )));
        }
        Ok(p)
    }

    pub fn coeffs(&self) -> [f64; 4] {
        self.coeffs
    }

    pub fn scale_exponent(&self) -> i32 {
        self.scale_exponent
    }

    pub fn mse_max(&self) -> f64 {
        self.mse_max
    }

    pub fn effective_coeffs(&self) -> [f64; 4] {
        let s = 10f64.powi(self.scale_exponent);
        self.coeffs.map(|c| c * s)
    }

    fn derivative(&self, x: f64) -> f64 {
        let [_, c1, c2, c3] = self.effective_coeffs();
        c1 + x * (2.0 * c2 + x * 3.0 * c3)
    }

    /// A point of `[0, mse_max]` where the derivative is not positive. The
    /// derivative is a quadratic, so it keeps its sign on the interval
    /// unless it has a real root there.
    fn derivative_root_in_domain(&self) -> Option<f64> {
        let [_, c1, c2, c3] = self.effective_coeffs();
        let (a, b, c) = (3.0 * c3, 2.0 * c2, c1);
        let mut roots = Vec::new();
        if a != 0.0 {
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let s = disc.sqrt();
                roots.extend([(-b - s) / (2.0 * a), (-b + s) / (2.0 * a)]);
            }
        } else if b != 0.0 {
            roots.push(-c / b);
        }
        let domain = 0.0..=self.mse_max;
        roots
            .into_iter()
            .find(|x| domain.contains(x))
            .or_else(|| (self.derivative(0.0) <= 0.0).then_some(0.0))
    }

    pub fn mse_to_lsd(&self, d_s: f64) -> Result<LsdValue> {
        if !(d_s >= 0.0 && d_s.is_finite()) {
            return Err(Error::domain(format!("MSE {d_s} must be finite and nonnegative")));
        }
        let [c0, c1, c2, c3] = self.effective_coeffs();
        Ok(LsdValue {
            lsd_db: c0 + d_s * (c1 + d_s * (c2 + d_s * c3)),
            out_of_domain: d_s > self.mse_max,
        })
    }
}

/// Free-function form of [`LsdPolynomial::mse_to_lsd`].
pub fn mse_to_lsd(d_s: f64, poly: &LsdPolynomial) -> Result<LsdValue> {
    poly.mse_to_lsd(d_s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for RateGrid {
    fn default() -> Self {
        Self {
            min: 20.0,
            max: 50.0,
            step: 0.1,
        }
    }
}

impl RateGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        let ok = self.min.is_finite()
            && self.max.is_finite()
            && self.step.is_finite()
            && self.step > 0.0
            && self.min <= self.max;
        if !ok {
            return Err(Error::domain(format!(
                "empty rate grid [{}, {}] step {}",
                self.min, self.max, self.step
            )));
        }
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| self.min + i as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConfig {
    pub coefficient_mode: CoefficientMode,
    pub transform_mode: TransformMode,
    pub lsd_target_db: f64,
    pub rate_grid: RateGrid,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self::new(RateGrid::default())
    }
}

impl BoundConfig {
    pub fn new(rate_grid: RateGrid) -> Self {
        Self {
            coefficient_mode: CoefficientMode::default(),
            transform_mode: TransformMode::default(),
            lsd_target_db: 1.0,
            rate_grid,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lsd_target_db > 0.0 && self.lsd_target_db.is_finite()) {
            return Err(Error::domain("LSD target must be positive"));
        }
        self.rate_grid.points().map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionRatePoint {
    pub rate: f64,
    pub mse_delta: f64,
    pub mse_lsf: f64,
    pub lsd_db: f64,
    pub out_of_domain: bool,
}

/// Distortion pipeline at a single rate.
pub fn evaluate_rate(
    model: &DirichletMixture,
    rate: f64,
    cfg: &BoundConfig,
    poly: &LsdPolynomial,
) -> Result<DistortionRatePoint> {
    let mse_delta = distortion_rate(model, rate, cfg.coefficient_mode)?;
    let mse_lsf = transform_distortion(mse_delta, model.dim(), cfg.transform_mode)?;
    let lsd = poly.mse_to_lsd(mse_lsf)?;
    Ok(DistortionRatePoint {
        rate,
        mse_delta,
        mse_lsf,
        lsd_db: lsd.lsd_db,
        out_of_domain: lsd.out_of_domain,
    })
}

pub fn lsd_rate_curve(
    model: &DirichletMixture,
    cfg: &BoundConfig,
    poly: &LsdPolynomial,
) -> Result<Vec<DistortionRatePoint>> {
    cfg.validate()?;
    let rates = cfg.rate_grid.points()?;
    let curve = rates
        .par_iter()
        .map(|&r| evaluate_rate(model, r, cfg, poly))
        .collect::<Result<Vec<_>>>()?;
    if let Some(w) = curve.windows(2).find(|w| !(w[1].lsd_db < w[0].lsd_db)) {
        return Err(Error::NonMonotone(format!(
            "LSD does not decrease between {} and {} bits ({} dB, {} dB)",
            w[0].rate, w[1].rate, w[0].lsd_db, w[1].lsd_db
        )));
    }
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransparentRate {
    pub rate: f64,
    pub rate_ceil: u64,
    pub lsd_db: f64,
}

const LSD_TOL_DB: f64 = 1e-9;
const MAX_BISECTIONS: usize = 200;

/// Smallest rate at which the bound reaches the LSD target, by bisection
/// inside the configured grid.
pub fn min_transparent_rate(
    model: &DirichletMixture,
    cfg: &BoundConfig,
    poly: &LsdPolynomial,
) -> Result<TransparentRate> {
    // evaluating the whole curve first rules out non-monotone inputs
    lsd_rate_curve(model, cfg, poly)?;
    let target = cfg.lsd_target_db;
    let lsd = |r: f64| evaluate_rate(model, r, cfg, poly).map(|p| p.lsd_db);
    let done = |rate: f64, lsd_db: f64| TransparentRate {
        rate,
        rate_ceil: rate.ceil() as u64,
        lsd_db,
    };
    let (mut lo, mut hi) = (cfg.rate_grid.min, cfg.rate_grid.max);
    let (f_lo, f_hi) = (lsd(lo)?, lsd(hi)?);
    if f_lo == target {
        return Ok(done(lo, f_lo));
    }
    if f_hi == target {
        return Ok(done(hi, f_hi));
    }
    if !(f_lo > target && target > f_hi) {
        return Err(Error::NotBracketed {
            target,
            lsd_at_min: f_lo,
            lsd_at_max: f_hi,
        });
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let f = lsd(mid)?;
        if (f - target).abs() < LSD_TOL_DB {
            return Ok(done(mid, f));
        }
        if mid <= lo || mid >= hi {
            break;
        }
        if f > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::numeric(format!(
        "bisection stalled near {lo} bits without reaching {LSD_TOL_DB} dB accuracy"
    )))
}
