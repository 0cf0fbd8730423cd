//! Acceptance gate. Each criterion runs at its stated tolerance and prints a
//! single PASS/FAIL line; the process exits non-zero if any fails.

mod common;

use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use lsfbound::bound::{
    component_rates, distortion_rate, evaluate_rate, min_transparent_rate, quantization_coefficient,
    BoundConfig, CoefficientMode, LsdPolynomial, RateGrid,
};
use lsfbound::dirichlet::{fit_mle, fit_moments, DirichletParams, SimplexData};
use lsfbound::dmm::{fit_em, DirichletMixture, EmConfig, MixtureComponent, TrainingMeta};
use lsfbound::lsf::{log_spectral_distortion, lpc_to_lsf, lsf_to_lpc, SpectrumGrid};
use lsfbound::signal::LpcFrame;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_coefficient() -> Outcome {
    let p1 = quantization_coefficient(1, CoefficientMode::GammaRatio).unwrap();
    let s1 = quantization_coefficient(1, CoefficientMode::SphereBound).unwrap();
    let p2 = quantization_coefficient(2, CoefficientMode::GammaRatio).unwrap();
    let e = [(p1 - 1.0 / 12.0).abs(), (s1 - 1.0 / 12.0).abs(), (p2 - 0.5 / PI).abs()];
    let worst = e.iter().copied().fold(0.0, f64::max);
    check(worst < 1e-12, format!("max abs error {worst:.3e}"))
}

fn uniform_model() -> DirichletMixture {
    DirichletMixture::new(
        vec![MixtureComponent {
            weight: 1.0,
            params: DirichletParams::new(vec![1.0, 1.0]).unwrap(),
        }],
        TrainingMeta::default(),
    )
    .unwrap()
}

fn c2_uniform_quantizer() -> Outcome {
    let m = uniform_model();
    let mut worst = 0.0f64;
    for r in 1..=8 {
        let d = distortion_rate(&m, r as f64, CoefficientMode::GammaRatio).unwrap();
        let step = 1.0 / f64::from(1u32 << r);
        let oracle = step * step / 12.0;
        worst = worst.max((d - oracle).abs() / oracle);
    }
    // correct to the last couple of bits of the mantissa
    check(worst <= 4.0 * f64::EPSILON, format!("max relative error {worst:.3e}"))
}

fn mc_entropy(p: &DirichletParams, n: usize, seed: u64) -> (f64, f64) {
    const CHUNK: usize = 10_000;
    let parts: Vec<(f64, f64)> = (0..n / CHUNK)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (c as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..CHUNK {
                let x = p.sample(&mut rng);
                let v = -p.log_pdf(&x).unwrap() / std::f64::consts::LN_2;
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let nf = (n / CHUNK * CHUNK) as f64;
    let mean = s / nf;
    let var = (s2 / nf - mean * mean).max(0.0);
    (mean, (var / nf).sqrt())
}

fn c3_entropy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let random16: Vec<f64> = (0..17).map(|_| rng.random_range(0.5..20.0)).collect();
    let cases: Vec<Vec<f64>> = vec![
        vec![1.0, 1.0],
        vec![2.0, 2.0],
        vec![1.0, 1.0, 1.0],
        vec![2.0, 5.0, 3.0],
        random16,
    ];
    let mut details = Vec::new();
    let mut all = true;
    for (i, a) in cases.iter().enumerate() {
        let p = DirichletParams::new(a.clone()).unwrap();
        let h = p.entropy_bits();
        let (mc, se) = mc_entropy(&p, 1_000_000, 100 + i as u64);
        // an exactly uniform density has zero sampling spread
        let z = if se > 0.0 { (h - mc).abs() / se } else if (h - mc).abs() < 1e-9 { 0.0 } else { f64::INFINITY };
        all &= z <= 3.0;
        details.push(format!("K={} z={z:.2}", a.len() - 1));
    }
    check(all, details.join(", "))
}

fn c4_mle() -> Outcome {
    let truth = [2.0, 5.0, 3.0];
    let p = DirichletParams::new(truth.to_vec()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pts: Vec<_> = (0..50_000).map(|_| p.sample(&mut rng)).collect();
    let data = SimplexData::from_points(&pts).unwrap();
    let fit = fit_mle(&data, None, &fit_moments(&data, None).unwrap().params).unwrap();
    let worst = fit
        .params
        .alpha()
        .iter()
        .zip(truth)
        .map(|(a, t)| (a - t).abs() / t)
        .fold(0.0, f64::max);
    check(
        worst < 0.02 && fit.gradient_norm < 1e-8,
        format!("max relative error {worst:.4}, gradient {:.2e}", fit.gradient_norm),
    )
}

fn c5_em() -> Outcome {
    let comps = [(0.4, [2.0, 5.0, 3.0]), (0.6, [20.0, 5.0, 8.0])];
    let params: Vec<DirichletParams> = comps.iter().map(|(_, a)| DirichletParams::new(a.to_vec()).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pts: Vec<_> = (0..100_000)
        .map(|_| {
            let i = usize::from(rng.random::<f64>() >= 0.4);
            params[i].sample(&mut rng)
        })
        .collect();
    let data = SimplexData::from_points(&pts).unwrap();
    let fit = fit_em(&data, &EmConfig { seed: 5, ..EmConfig::with_components(2) }).unwrap();
    let worst_drop = fit
        .history
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(0.0, f64::max);
    let mut w = fit.model.weights();
    w.sort_by(f64::total_cmp);
    let werr = (w[0] - 0.4).abs().max((w[1] - 0.6).abs());
    check(
        worst_drop <= 1e-9 && werr < 0.02,
        format!(
            "{} iterations, largest LL drop {worst_drop:.2e}, weight error {werr:.4}",
            fit.history.len() - 1
        ),
    )
}

fn c6_lsf_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut ordered = true;
    for _ in 0..1000 {
        let a = common::random_pole_lpc(&mut rng, 16, 0.3, 0.97);
        let lsf = match lpc_to_lsf(&LpcFrame::from_coefficients(a.clone()).unwrap()) {
            Ok(l) => l,
            Err(e) => return Err(format!("conversion failed: {e}")),
        };
        let v = lsf.values();
        ordered &= v[0] > 0.0 && v[15] < PI && v.windows(2).all(|w| w[0] < w[1]);
        let back = lsf_to_lpc(&lsf).unwrap();
        for (x, y) in back.coefficients().iter().zip(&a) {
            worst = worst.max((x - y).abs());
        }
    }
    check(worst < 1e-6 && ordered, format!("max coefficient error {worst:.3e}, ordering holds: {ordered}"))
}

fn c7_lsd() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid = SpectrumGrid::default();
    let mut worst = 0.0f64;
    let mut self_zero = true;
    for _ in 0..100 {
        let poles: Vec<(f64, f64)> = (0..8)
            .map(|_| (rng.random_range(0.3..=0.97), rng.random_range(0.0..PI)))
            .collect();
        // a nearby quantized version: small pole displacements
        let moved: Vec<(f64, f64)> = poles
            .iter()
            .map(|&(r, t)| ((r + rng.random_range(-0.01..0.01)).min(0.97), t + rng.random_range(-0.02..0.02)))
            .collect();
        let (a, b) = (common::lpc_from_poles(&poles), common::lpc_from_poles(&moved));
        let fa = LpcFrame::from_coefficients(a.clone()).unwrap();
        let fb = LpcFrame::from_coefficients(b.clone()).unwrap();
        let got = log_spectral_distortion(&fa, &fb, &grid).unwrap();
        worst = worst.max((got - common::dense_lsd(&a, &b, 65536)).abs());
        self_zero &= log_spectral_distortion(&fa, &fa, &grid).unwrap() == 0.0;
    }
    check(worst < 1e-3 && self_zero, format!("max deviation {worst:.3e} dB, LSD(a,a)=0: {self_zero}"))
}

fn c8_polynomial() -> Outcome {
    let p = LsdPolynomial::default();
    let at0 = p.mse_to_lsd(0.0).unwrap().lsd_db;
    let at1 = p.mse_to_lsd(1e-3).unwrap().lsd_db;
    let [_, c1, c2, c3] = p.effective_coeffs();
    let disc = (2.0 * c2).powi(2) - 4.0 * (3.0 * c3) * c1;
    check(
        at0 == 0.0 && (at1 - 0.217467).abs() <= 1e-6 && disc < 0.0,
        format!("LSD(0)={at0}, LSD(1e-3)={at1:.8}, derivative discriminant {disc:.4e}"),
    )
}

fn c9_rate_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut worst_sum, mut worst_ratio) = (0.0f64, 0.0f64);
    for m in 0..50 {
        let k = rng.random_range(1..6);
        let truth: Vec<f64> = (0..=k).map(|_| rng.random_range(1.0..15.0)).collect();
        let p = DirichletParams::new(truth).unwrap();
        let pts: Vec<_> = (0..400).map(|_| p.sample(&mut rng)).collect();
        let data = SimplexData::from_points(&pts).unwrap();
        let i = rng.random_range(1..5);
        let cfg = EmConfig { seed: m, max_iterations: 30, ..EmConfig::with_components(i) };
        let model = fit_em(&data, &cfg).unwrap().model;
        for _ in 0..5 {
            let r = rng.random_range(5.0..60.0);
            let rates = component_rates(&model, r).unwrap();
            let avg: f64 = model.weights().iter().zip(&rates).map(|(w, x)| w * x).sum();
            worst_sum = worst_sum.max((avg - (r - (i as f64).log2())).abs());
            let d0 = distortion_rate(&model, r, CoefficientMode::GammaRatio).unwrap();
            let d1 = distortion_rate(&model, r + k as f64, CoefficientMode::GammaRatio).unwrap();
            worst_ratio = worst_ratio.max((d1 / d0 - 0.25).abs());
        }
    }
    check(
        worst_sum < 1e-12 && worst_ratio < 1e-12,
        format!("allocation identity error {worst_sum:.2e}, scaling error {worst_ratio:.2e}"),
    )
}

fn c10_solver() -> Outcome {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let poly = LsdPolynomial::default();
    let mut details = Vec::new();
    let mut all = true;
    for (name, min, max) in [("uniform_k1.json", 1.0, 12.0), ("twin_k1.json", 1.5, 12.0), ("mixture_k3.json", 1.5, 40.0)] {
        let model = DirichletMixture::load(&fixtures.join(name)).unwrap();
        let cfg = BoundConfig::new(RateGrid { min, max, step: 0.5 });
        let r = match min_transparent_rate(&model, &cfg, &poly) {
            Ok(r) => r,
            Err(e) => return Err(format!("{name}: {e}")),
        };
        let at = evaluate_rate(&model, r.rate, &cfg, &poly).unwrap().lsd_db;
        let steps = ((max - min) / 1e-4).round() as usize;
        let scan = (0..=steps)
            .map(|i| min + i as f64 * 1e-4)
            .find(|&x| evaluate_rate(&model, x, &cfg, &poly).unwrap().lsd_db <= cfg.lsd_target_db)
            .unwrap_or(f64::NAN);
        let ok = (r.rate - scan).abs() < 1e-3 && (at - 1.0).abs() < 1e-9;
        all &= ok;
        details.push(format!("{name}: R*={:.6} scan={scan:.4} LSD(R*)-1={:.1e}", r.rate, at - 1.0));
    }
    check(all, details.join("; "))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("1 quantizer coefficient", c1_coefficient),
        ("2 uniform quantizer oracle", c2_uniform_quantizer),
        ("3 Dirichlet entropy vs Monte Carlo", c3_entropy),
        ("4 Dirichlet MLE recovery", c4_mle),
        ("5 EM monotonicity and weights", c5_em),
        ("6 LSF round trip", c6_lsf_round_trip),
        ("7 LSD against dense oracle", c7_lsd),
        ("8 MSE to LSD polynomial", c8_polynomial),
        ("9 rate identities", c9_rate_identities),
        ("10 transparent-rate solver", c10_solver),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let out = f();
        let secs = t.elapsed().as_secs_f64();
        match out {
            Ok(d) => println!("PASS criterion {name} ({secs:.2}s): {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.2}s): {d}");
            }
        }
    }
    println!("SKIP criterion 11 corpus-scale bound: needs the TIMIT corpus, run the CLI pipeline on it");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
