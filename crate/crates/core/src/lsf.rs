//! LPC <-> LSF conversion through the symmetric/antisymmetric polynomials
//! `P(z) = G(z) + z^-(K+1) G(1/z)` and `Q(z) = G(z) - z^-(K+1) G(1/z)`,
//! the normalized difference (ΔLSF) map onto the open simplex, and log
//! spectral distortion between LPC envelopes.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::signal::LpcFrame;

/// Adjacent LSFs (and the end points 0 and π) closer than this are rejected.
pub const MIN_LSF_GAP: f64 = 1e-9;

const SCAN_POINTS_PER_ORDER: usize = 32;
const BISECTION_STEPS: usize = 60;

/// Strictly increasing line spectral frequencies in `(0, π)`, radians.
#[derive(Debug, Clone, PartialEq)]
pub struct LsfVector(Vec<f64>);

impl LsfVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("LSF vector is empty"));
        }
        let mut prev = 0.0;
        for (i, &s) in values.iter().enumerate() {
            if !s.is_finite() || !(s - prev >= MIN_LSF_GAP) {
                return Err(Error::domain(format!(
                    "LSF ordering violated at index {i}: {s} after {prev}"
                )));
            }
            prev = s;
        }
        if !(PI - prev >= MIN_LSF_GAP) {
            return Err(Error::domain(format!("last LSF {prev} is not below π")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }
}

/// ΔLSF coordinates `x_1..x_K`, all positive with `sum < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaLsfVector(Vec<f64>);

impl DeltaLsfVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("ΔLSF vector is empty"));
        }
        if let Some(i) = values.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::domain(format!(
                "ΔLSF coordinate {i} = {} is not positive",
                values[i]
            )));
        }
        let completion = 1.0 - values.iter().sum::<f64>();
        if !(completion > 0.0) {
            return Err(Error::domain(format!(
                "ΔLSF coordinates sum to {} >= 1",
                1.0 - completion
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Implied last coordinate `x_{K+1} = 1 - sum x_k`.
    pub fn completion(&self) -> f64 {
        1.0 - self.0.iter().sum::<f64>()
    }
}

/// Evaluates `c_m + 2 sum_{i<m} c_i T_{m-i}(x)` where `c` holds the first
/// half (plus middle) of a degree-`2m` symmetric polynomial.
fn chebyshev_form(c: &[f64], x: f64) -> f64 {
    let m = c.len() - 1;
    // T_n(x) for n = 0..=m
    let mut t_prev = 1.0;
    let mut t_cur = x;
    let mut acc = c[m];
    for n in 1..=m {
        if n > 1 {
            let t_next = 2.0 * x * t_cur - t_prev;
            t_prev = t_cur;
            t_cur = t_next;
        }
        acc += 2.0 * c[m - n] * t_cur;
    }
    acc
}

/// Roots in `cos ω ∈ [-1, 1]` of a symmetric polynomial, by grid scan and
/// bisection. Returned as angles in ascending order.
fn unit_circle_angles(c: &[f64], scan_points: usize) -> Vec<f64> {
    let f = |x: f64| chebyshev_form(c, x);
    let grid = |i: usize| -1.0 + 2.0 * i as f64 / (scan_points - 1) as f64;
    let mut roots = Vec::new();
    let mut x0 = grid(0);
    let mut f0 = f(x0);
    if f0 == 0.0 {
        roots.push(x0);
    }
    for i in 1..scan_points {
        let x1 = grid(i);
        let f1 = f(x1);
        if f1 == 0.0 {
            roots.push(x1);
        } else if f0 != 0.0 && (f0 < 0.0) != (f1 < 0.0) {
            let (mut lo, mut hi, mut flo) = (x0, x1, f0);
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        x0 = x1;
        f0 = f1;
    }
    let mut angles: Vec<f64> = roots.into_iter().map(f64::acos).collect();
    angles.sort_by(f64::total_cmp);
    angles
}

fn require_even(order: usize) -> Result<()> {
    if !order.is_multiple_of(2) {
        return Err(Error::domain(format!(
            "LSF conversion requires an even order, got {order}"
        )));
    }
    Ok(())
}

/// LPC filter to line spectral frequencies.
pub fn lpc_to_lsf(frame: &LpcFrame) -> Result<LsfVector> {
    let k = frame.order();
    require_even(k)?;
    let half = k / 2;
    // g_0..g_{K+1} with g_{K+1} = 0
    let mut g = Vec::with_capacity(k + 2);
    g.push(1.0);
    g.extend_from_slice(frame.coefficients());
    g.push(0.0);
    let p: Vec<f64> = (0..=k + 1).map(|j| g[j] + g[k + 1 - j]).collect();
    let q: Vec<f64> = (0..=k + 1).map(|j| g[j] - g[k + 1 - j]).collect();
    // divide out (1 + z^-1) from P and (1 - z^-1) from Q
    let mut p_red = vec![0.0; k + 1];
    let mut q_red = vec![0.0; k + 1];
    p_red[0] = p[0];
    q_red[0] = q[0];
    for j in 1..=k {
        p_red[j] = p[j] - p_red[j - 1];
        q_red[j] = q[j] + q_red[j - 1];
    }
    let scan = SCAN_POINTS_PER_ORDER * k;
    let p_angles = unit_circle_angles(&p_red[..=half], scan);
    let q_angles = unit_circle_angles(&q_red[..=half], scan);
    if p_angles.len() != half || q_angles.len() != half {
        return Err(Error::Unstable(format!(
            "found {} P-roots and {} Q-roots on the unit circle, expected {half} each",
            p_angles.len(),
            q_angles.len()
        )));
    }
    let mut lsf = Vec::with_capacity(k);
    for (wp, wq) in p_angles.iter().zip(&q_angles) {
        lsf.push(*wp);
        lsf.push(*wq);
    }
    if lsf.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Unstable(
            "P- and Q-roots are not interleaved on the unit circle".into(),
        ));
    }
    LsfVector::new(lsf).map_err(|e| Error::Unstable(e.to_string()))
}

/// Multiplies a coefficient vector (in powers of z^-1) by `1 + b z^-1 + z^-2`.
fn mul_quadratic(poly: &[f64], b: f64) -> Vec<f64> {
    let mut out = vec![0.0; poly.len() + 2];
    for (i, &c) in poly.iter().enumerate() {
        out[i] += c;
        out[i + 1] += b * c;
        out[i + 2] += c;
    }
    out
}

/// Line spectral frequencies back to LPC coefficients.
pub fn lsf_to_lpc(lsf: &LsfVector) -> Result<LpcFrame> {
    let k = lsf.order();
    require_even(k)?;
    let s = lsf.values();
    let mut p = vec![1.0];
    let mut q = vec![1.0];
    for pair in s.chunks_exact(2) {
        p = mul_quadratic(&p, -2.0 * pair[0].cos());
        q = mul_quadratic(&q, -2.0 * pair[1].cos());
    }
    // restore the fixed roots at z = -1 and z = +1
    let mut a = Vec::with_capacity(k);
    for j in 1..=k {
        let pj = p[j] + p[j - 1];
        let qj = q[j] - q[j - 1];
        a.push(0.5 * (pj + qj));
    }
    LpcFrame::from_coefficients(a)
}

/// `x = A s` with `A` the scaled first-difference matrix.
pub fn lsf_to_delta(lsf: &LsfVector) -> Result<DeltaLsfVector> {
    let s = lsf.values();
    let x = s
        .iter()
        .enumerate()
        .map(|(i, &v)| if i == 0 { v / PI } else { (v - s[i - 1]) / PI })
        .collect();
    DeltaLsfVector::new(x)
}

/// `s_k = π sum_{j<=k} x_j`.
pub fn delta_to_lsf(delta: &DeltaLsfVector) -> Result<LsfVector> {
    let mut acc = 0.0;
    let s = delta
        .values()
        .iter()
        .map(|x| {
            acc += x;
            PI * acc
        })
        .collect();
    LsfVector::new(s)
}

/// Uniform frequency grid over `[0, F_s)` for spectral comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpectrumGrid {
    pub num_points: usize,
    pub sample_rate_hz: u32,
}

impl Default for SpectrumGrid {
    fn default() -> Self {
        Self {
            num_points: 512,
            sample_rate_hz: 16000,
        }
    }
}

impl SpectrumGrid {
    fn check(&self, order: usize) -> Result<()> {
        if self.sample_rate_hz == 0 {
            return Err(Error::domain("sample rate must be positive"));
        }
        if self.num_points < 2 * order || self.num_points < 2 {
            return Err(Error::domain(format!(
                "spectrum grid of {} points is too coarse for order {order}",
                self.num_points
            )));
        }
        Ok(())
    }
}

fn inverse_filter_power(coefficients: &[f64], omega: f64) -> f64 {
    let (mut re, mut im) = (1.0, 0.0);
    for (k, a) in coefficients.iter().enumerate() {
        let phase = omega * (k + 1) as f64;
        re += a * phase.cos();
        im -= a * phase.sin();
    }
    re * re + im * im
}

/// `1 / |A(e^{j 2π f / F_s})|^2` at `f_i = i F_s / N`, `i = 0..N`.
pub fn lpc_power_spectrum(frame: &LpcFrame, grid: &SpectrumGrid) -> Result<Vec<f64>> {
    grid.check(frame.order())?;
    let n = grid.num_points as f64;
    Ok((0..grid.num_points)
        .map(|i| 1.0 / inverse_filter_power(frame.coefficients(), 2.0 * PI * i as f64 / n))
        .collect())
}

/// RMS difference of the two log power spectra in dB over the full band,
/// uniform Riemann sum.
pub fn log_spectral_distortion(
    frame: &LpcFrame,
    frame_hat: &LpcFrame,
    grid: &SpectrumGrid,
) -> Result<f64> {
    if frame.order() != frame_hat.order() {
        return Err(Error::domain(format!(
            "order mismatch: {} vs {}",
            frame.order(),
            frame_hat.order()
        )));
    }
    grid.check(frame.order())?;
    let n = grid.num_points as f64;
    let sum: f64 = (0..grid.num_points)
        .map(|i| {
            let w = 2.0 * PI * i as f64 / n;
            // 10 log10 P - 10 log10 P^ = 10 log10 (|A^|^2 / |A|^2)
            let d = 10.0
                * (inverse_filter_power(frame_hat.coefficients(), w).log10()
                    - inverse_filter_power(frame.coefficients(), w).log10());
            d * d
        })
        .sum();
    Ok((sum / n).sqrt())
}

/// Summary of per-frame LSD values against the transparency criteria.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsdStatistics {
    pub count: usize,
    pub mean_db: f64,
    /// Percentage of frames with LSD in (2, 4] dB.
    pub pct_outliers_2_4: f64,
    /// Percentage of frames with LSD above 4 dB.
    pub pct_outliers_over_4: f64,
    pub transparent: bool,
}

pub fn lsd_statistics(values: &[f64]) -> Result<LsdStatistics> {
    if values.is_empty() {
        return Err(Error::domain("no LSD values to summarize"));
    }
    let n = values.len() as f64;
    let mean_db = values.iter().sum::<f64>() / n;
    let mid = values.iter().filter(|&&v| v > 2.0 && v <= 4.0).count() as f64;
    let high = values.iter().filter(|&&v| v > 4.0).count() as f64;
    let pct_outliers_2_4 = 100.0 * mid / n;
    let pct_outliers_over_4 = 100.0 * high / n;
    Ok(LsdStatistics {
        count: values.len(),
        mean_db,
        pct_outliers_2_4,
        pct_outliers_over_4,
        transparent: mean_db <= 1.0 && pct_outliers_2_4 < 2.0 && high == 0.0,
    })
}
