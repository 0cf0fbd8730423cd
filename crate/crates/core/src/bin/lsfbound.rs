use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lsfbound::bound::{BoundConfig, CoefficientMode, LsdPolynomial, RateGrid, TransformMode, DEFAULT_LSD_COEFFS};
use lsfbound::dmm::{DirichletMixture, EmConfig};
use lsfbound::lsf::SpectrumGrid;
use lsfbound::pipeline::{cmd_bound, cmd_extract, cmd_fit, cmd_lsd_eval, ExtractConfig};
use lsfbound::signal::FrameConfig;
use lsfbound::{Error, Result};

/// LSF quantization bounds from Dirichlet mixture models.
#[derive(Parser)]
#[command(name = "lsfbound", version)]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Shared {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// LPC order K. For `fit` and `bound` it is checked against the data
    /// when given.
    #[arg(long, global = true)]
    order: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Extract ΔLSF vectors from WAV files, WAV directories or LSF CSV files.
    Extract {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 25.0)]
        window_ms: f64,
        #[arg(long, default_value_t = 20.0)]
        step_ms: f64,
        /// Frames quieter than the loudest by more than this are dropped.
        #[arg(long, default_value_t = -60.0, allow_negative_numbers = true)]
        silence_db: f64,
        /// Average multi-channel audio instead of rejecting it.
        #[arg(long)]
        downmix: bool,
    },
    /// Fit one Dirichlet mixture per component count.
    Fit {
        delta_csv: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
        components: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 1e-8)]
        min_weight: f64,
    },
    /// LSD-rate curves and minimum transparent rates for fitted models.
    Bound {
        #[arg(required = true)]
        models: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = CoeffMode::GammaRatio)]
        coeff_mode: CoeffMode,
        #[arg(long, value_enum, default_value_t = XformMode::Isotropic)]
        transform_mode: XformMode,
        #[arg(long, default_value_t = 1.0)]
        lsd_target: f64,
        #[arg(long, default_value_t = 20.0)]
        rate_min: f64,
        #[arg(long, default_value_t = 50.0)]
        rate_max: f64,
        #[arg(long, default_value_t = 0.1)]
        rate_step: f64,
        #[arg(long, default_value_t = 5, allow_negative_numbers = true)]
        poly_scale_exp: i32,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        poly: Option<Vec<f64>>,
        /// Upper end of the range on which the polynomial must be increasing.
        #[arg(long, default_value_t = 0.01)]
        poly_mse_max: f64,
    },
    /// LSD between filter pairs; each row holds the original and the
    /// quantized coefficients.
    LsdEval {
        pairs_csv: PathBuf,
        #[arg(long, default_value_t = 512)]
        grid_points: usize,
        #[arg(long, default_value_t = 16000)]
        sample_rate: u32,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CoeffMode {
    #[value(name = "paper")]
    GammaRatio,
    Sphere,
}

#[derive(Clone, Copy, ValueEnum)]
enum XformMode {
    Isotropic,
    Jacobian,
}

fn check_order(expected: Option<usize>, found: usize, what: &str) -> Result<()> {
    match expected {
        Some(k) if k != found => Err(Error::Domain(format!(
            "--order {k} does not match {what} dimension {found}"
        ))),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<()> {
    let Shared { seed, order, out } = cli.shared;
    match cli.command {
        Command::Extract {
            inputs,
            window_ms,
            step_ms,
            silence_db,
            downmix,
        } => {
            let cfg = ExtractConfig {
                frame: FrameConfig {
                    window_ms,
                    step_ms,
                    lpc_order: order.unwrap_or(16),
                    silence_threshold_db: silence_db,
                    ..FrameConfig::default()
                },
                downmix,
            };
            let s = cmd_extract(&inputs, &cfg, &out)?;
            println!("files: {}", s.files);
            println!("windows: {}", s.analysis.windows);
            println!("silent_dropped: {}", s.analysis.silent);
            println!("unstable_dropped: {}", s.analysis.unstable);
            println!("invalid_dropped: {}", s.invalid);
            println!("vectors: {}", s.vectors);
            println!("output: {}", s.output.display());
        }
        Command::Fit {
            delta_csv,
            components,
            max_iters,
            tol,
            min_weight,
        } => {
            if order.is_some() {
                let data = lsfbound::pipeline::read_delta_csv(&delta_csv)?;
                check_order(order, data.dim(), "data")?;
            }
            let base = EmConfig {
                max_iterations: max_iters,
                rel_tol: tol,
                seed,
                min_weight,
                ..EmConfig::default()
            };
            for s in cmd_fit(&delta_csv, &components, &base, &out)? {
                println!(
                    "I={} loglik={:.10e} iterations={} model={}",
                    s.num_components,
                    s.log_likelihood,
                    s.iterations,
                    s.model_path.display()
                );
            }
        }
        Command::Bound {
            models,
            coeff_mode,
            transform_mode,
            lsd_target,
            rate_min,
            rate_max,
            rate_step,
            poly_scale_exp,
            poly,
            poly_mse_max,
        } => {
            let coeffs = match poly.as_deref() {
                Some([a, b, c, d]) => [*a, *b, *c, *d],
                Some(_) => return Err(Error::Domain("--poly takes exactly four coefficients".into())),
                None => DEFAULT_LSD_COEFFS,
            };
            let poly = LsdPolynomial::new(coeffs, poly_scale_exp, poly_mse_max)?;
            let cfg = BoundConfig {
                coefficient_mode: match coeff_mode {
                    CoeffMode::GammaRatio => CoefficientMode::GammaRatio,
                    CoeffMode::Sphere => CoefficientMode::SphereBound,
                },
                transform_mode: match transform_mode {
                    XformMode::Isotropic => TransformMode::IsotropicCell,
                    XformMode::Jacobian => TransformMode::JacobianOnly,
                },
                lsd_target_db: lsd_target,
                rate_grid: RateGrid {
                    min: rate_min,
                    max: rate_max,
                    step: rate_step,
                },
            };
            if order.is_some() {
                let first = DirichletMixture::load(&models[0])?;
                check_order(order, first.dim(), "model")?;
            }
            let s = cmd_bound(&models, &cfg, &poly, &out)?;
            for m in &s.models {
                println!(
                    "{}: I={} R*={:.9} ceil={} curve={}",
                    m.model_path.display(),
                    m.num_components,
                    m.transparent.rate,
                    m.transparent.rate_ceil,
                    m.curve_path.display()
                );
            }
            for g in &s.gaps {
                println!("gap I={} vs I={}: {:.9} dB", g.smaller, g.larger, g.max_gap_db);
            }
            println!("report: {}", s.report_path.display());
        }
        Command::LsdEval {
            pairs_csv,
            grid_points,
            sample_rate,
        } => {
            let grid = SpectrumGrid {
                num_points: grid_points,
                sample_rate_hz: sample_rate,
            };
            let s = cmd_lsd_eval(&pairs_csv, &grid, &out)?;
            let st = s.statistics;
            println!("pairs: {}", s.per_row.len());
            println!("unstable_excluded: {}", s.unstable);
            println!("mean_lsd_db: {:.9}", st.mean_db);
            println!("pct_2_to_4_db: {:.6}", st.pct_outliers_2_4);
            println!("pct_over_4_db: {:.6}", st.pct_outliers_over_4);
            println!("transparent: {}", st.transparent);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}
