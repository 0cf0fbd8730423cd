#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;

/// Step-up recursion: reflection coefficients to `a_1..a_K` of
/// `A(z) = 1 + sum a_k z^-k`. Minimum phase whenever every `|k_m| < 1`.
pub fn step_up(reflection: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = Vec::with_capacity(reflection.len());
    for &k in reflection {
        let prev = a.clone();
        let m = prev.len();
        for j in 0..m {
            a[j] = prev[j] + k * prev[m - 1 - j];
        }
        a.push(k);
    }
    a
}

pub fn random_reflection<R: Rng>(rng: &mut R, order: usize, max_abs: f64) -> Vec<f64> {
    (0..order).map(|_| rng.random_range(-max_abs..max_abs)).collect()
}

pub fn random_stable_lpc<R: Rng>(rng: &mut R, order: usize, max_abs: f64) -> Vec<f64> {
    step_up(&random_reflection(rng, order, max_abs))
}

/// `|A(e^{jw})|^2` by direct complex summation.
pub fn inverse_power(a: &[f64], w: f64) -> f64 {
    let (mut re, mut im) = (1.0, 0.0);
    for (k, c) in a.iter().enumerate() {
        let (s, co) = (w * (k + 1) as f64).sin_cos();
        re += c * co;
        im -= c * s;
    }
    re * re + im * im
}

/// Trapezoid rule on `points` intervals of `[0, 2π]`.
pub fn dense_lsd(a: &[f64], b: &[f64], points: usize) -> f64 {
    let f = |w: f64| {
        let d = 10.0 * (inverse_power(b, w) / inverse_power(a, w)).log10();
        d * d
    };
    let h = 2.0 * PI / points as f64;
    let mut sum = 0.5 * (f(0.0) + f(2.0 * PI));
    for i in 1..points {
        sum += f(i as f64 * h);
    }
    (sum * h / (2.0 * PI)).sqrt()
}

/// Even-order all-pole filter from `order / 2` conjugate pole pairs with
/// radii in `[r_min, r_max]` and angles uniform in `(0, π)`.
pub fn random_pole_lpc<R: Rng>(rng: &mut R, order: usize, r_min: f64, r_max: f64) -> Vec<f64> {
    let poles: Vec<(f64, f64)> = (0..order / 2)
        .map(|_| (rng.random_range(r_min..=r_max), rng.random_range(0.0..PI)))
        .collect();
    lpc_from_poles(&poles)
}

pub fn lpc_from_poles(poles: &[(f64, f64)]) -> Vec<f64> {
    let mut poly = vec![1.0];
    for &(r, theta) in poles {
        let q = [1.0, -2.0 * r * theta.cos(), r * r];
        let mut next = vec![0.0; poly.len() + 2];
        for (i, p) in poly.iter().enumerate() {
            for (j, c) in q.iter().enumerate() {
                next[i + j] += p * c;
            }
        }
        poly = next;
    }
    poly[1..].to_vec()
}
