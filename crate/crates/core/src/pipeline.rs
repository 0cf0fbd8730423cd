//! File-level orchestration behind the `lsfbound` command line: extraction
//! of ΔLSF training vectors, mixture fitting, bound computation and LSD
//! evaluation. Each command writes its outputs plus a JSON run manifest into
//! an output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::bound::{lsd_rate_curve, min_transparent_rate, BoundConfig, LsdPolynomial, TransparentRate};
use crate::dirichlet::SimplexData;
use crate::dmm::{fit_em, DirichletMixture, EmConfig};
use crate::error::{Error, Result};
use crate::formats::{fmt_f64, read_numeric_csv, vectors_csv, write_text};
use crate::lsf::{
    log_spectral_distortion, lpc_to_lsf, lsd_statistics, lsf_to_delta, LsdStatistics, LsfVector,
    SpectrumGrid,
};
use crate::signal::{analyze_signal, read_wav, AnalysisCounts, FrameConfig, LpcFrame};

pub const DELTA_CSV: &str = "delta_lsf.csv";
pub const BOUND_REPORT: &str = "bound_report.txt";
pub const LSD_CSV: &str = "lsd.csv";
pub const LSD_REPORT: &str = "lsd_report.txt";

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Present for commands that consume randomness.
    pub seed: Option<u64>,
    pub version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

struct ManifestBuilder {
    command: &'static str,
    config: serde_json::Value,
    inputs: Vec<FileDigest>,
    seed: Option<u64>,
    started: f64,
}

impl ManifestBuilder {
    fn start(command: &'static str, config: serde_json::Value, inputs: &[PathBuf], seed: Option<u64>) -> Result<Self> {
        Ok(Self {
            command,
            config,
            inputs: inputs.iter().map(|p| FileDigest::of(p)).collect::<Result<_>>()?,
            seed,
            started: unix_now(),
        })
    }

    fn finish(self, out_dir: &Path, outputs: &[PathBuf]) -> Result<PathBuf> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            config: self.config,
            inputs: self.inputs,
            outputs: outputs.iter().map(|p| FileDigest::of(p)).collect::<Result<_>>()?,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: self.started,
            finished_unix: unix_now(),
        };
        let path = out_dir.join(format!("{}_manifest.json", self.command));
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Format(format!("manifest: {e}")))?;
        write_text(&path, &(text + "\n"))?;
        Ok(path)
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn has_extension(path: &Path, ext: &str) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

/// Expands directories to the WAV files beneath them and sorts everything
/// by path so output order does not depend on traversal order.
pub fn collect_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            for entry in WalkDir::new(input) {
                let entry = entry.map_err(|e| {
                    let path = e.path().unwrap_or(input).to_path_buf();
                    Error::io(path, e.into())
                })?;
                if entry.file_type().is_file() && has_extension(entry.path(), "wav") {
                    files.push(entry.into_path());
                }
            }
        } else {
            files.push(input.clone());
        }
    }
    files.sort();
    files.dedup();
    if files.is_empty() {
        return Err(Error::domain("no input files"));
    }
    Ok(files)
}

#[derive(Debug, Clone, Default)]
pub struct ExtractConfig {
    pub frame: FrameConfig,
    pub downmix: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractSummary {
    pub files: usize,
    pub vectors: usize,
    pub analysis: AnalysisCounts,
    /// Frames or rows whose LSFs could not be formed or failed the ordering
    /// and simplex checks.
    pub invalid: usize,
    pub output: PathBuf,
}

struct FileVectors {
    deltas: Vec<Vec<f64>>,
    analysis: AnalysisCounts,
    invalid: usize,
}

fn delta_of_lpc(frame: &LpcFrame) -> Option<Vec<f64>> {
    let lsf = lpc_to_lsf(frame).ok()?;
    lsf_to_delta(&lsf).ok().map(|d| d.values().to_vec())
}

fn extract_wav(path: &Path, cfg: &ExtractConfig) -> Result<FileVectors> {
    let signal = read_wav(path, cfg.downmix)?;
    let (frames, analysis) = analyze_signal(&signal, &cfg.frame)?;
    let mut deltas = Vec::with_capacity(frames.len());
    let mut invalid = 0;
    for f in &frames {
        match delta_of_lpc(f) {
            Some(d) => deltas.push(d),
            None => invalid += 1,
        }
    }
    Ok(FileVectors {
        deltas,
        analysis,
        invalid,
    })
}

fn extract_lsf_csv(path: &Path) -> Result<FileVectors> {
    let rows = read_numeric_csv(path, true)?;
    let mut deltas = Vec::with_capacity(rows.len());
    let mut invalid = 0;
    let mut width = None;
    for (line, row) in rows {
        if *width.get_or_insert(row.len()) != row.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("expected {} fields, found {}", width.unwrap(), row.len()),
            });
        }
        match LsfVector::new(row).and_then(|l| lsf_to_delta(&l)) {
            Ok(d) => deltas.push(d.values().to_vec()),
            Err(_) => invalid += 1,
        }
    }
    Ok(FileVectors {
        deltas,
        analysis: AnalysisCounts::default(),
        invalid,
    })
}

/// WAV inputs go through framing, LPC analysis and LSF conversion; `.csv`
/// inputs are read as LSF vectors, one per row. Writes `delta_lsf.csv`.
pub fn cmd_extract(inputs: &[PathBuf], cfg: &ExtractConfig, out_dir: &Path) -> Result<ExtractSummary> {
    cfg.frame.validate()?;
    let files = collect_inputs(inputs)?;
    let manifest = ManifestBuilder::start(
        "extract",
        serde_json::json!({
            "window_ms": cfg.frame.window_ms,
            "step_ms": cfg.frame.step_ms,
            "lpc_order": cfg.frame.lpc_order,
            "silence_threshold_db": cfg.frame.silence_threshold_db,
            "r0_guard": cfg.frame.r0_guard,
            "downmix": cfg.downmix,
        }),
        &files,
        None,
    )?;
    let per_file: Vec<Result<FileVectors>> = files
        .par_iter()
        .map(|p| {
            if has_extension(p, "csv") {
                extract_lsf_csv(p)
            } else {
                extract_wav(p, cfg)
            }
        })
        .collect();

    let mut summary = ExtractSummary {
        files: files.len(),
        ..ExtractSummary::default()
    };
    let mut all = Vec::new();
    for fv in per_file {
        let fv = fv?;
        summary.analysis.windows += fv.analysis.windows;
        summary.analysis.silent += fv.analysis.silent;
        summary.analysis.unstable += fv.analysis.unstable;
        summary.invalid += fv.invalid;
        all.extend(fv.deltas);
    }
    if let Some(w) = all.first().map(Vec::len) {
        if all.iter().any(|d| d.len() != w) {
            return Err(Error::domain("inputs produce vectors of different dimensions"));
        }
    }
    if all.is_empty() {
        return Err(Error::EmptyOutput("no ΔLSF vectors survived extraction".into()));
    }
    summary.vectors = all.len();
    ensure_dir(out_dir)?;
    let output = out_dir.join(DELTA_CSV);
    write_text(&output, &vectors_csv(all.iter().map(Vec::as_slice)))?;
    manifest.finish(out_dir, std::slice::from_ref(&output))?;
    summary.output = output;
    Ok(summary)
}

/// Reads ΔLSF rows and checks the simplex constraints, reporting failures by
/// line number.
pub fn read_delta_csv(path: &Path) -> Result<SimplexData> {
    let rows = read_numeric_csv(path, true)?;
    let width = rows
        .first()
        .map(|(_, r)| r.len())
        .ok_or_else(|| Error::domain(format!("{} has no data rows", path.display())))?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    for (line, row) in &rows {
        if row.len() != width {
            return Err(parse_err(*line, format!("expected {width} fields, found {}", row.len())));
        }
        if row.iter().any(|&v| v < 0.0) {
            return Err(parse_err(*line, "negative coordinate".into()));
        }
        if row.iter().sum::<f64>() > 1.0 + 1e-9 {
            return Err(parse_err(*line, "coordinates sum to more than one".into()));
        }
    }
    let data: Vec<Vec<f64>> = rows.into_iter().map(|(_, r)| r).collect();
    SimplexData::from_rows(&data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub num_components: usize,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub model_path: PathBuf,
}

pub fn model_file_name(num_components: usize) -> String {
    format!("dmm_{num_components}.json")
}

/// Fits one mixture per requested component count. `base` supplies every
/// EM setting except the component count.
pub fn cmd_fit(
    delta_csv: &Path,
    components: &[usize],
    base: &EmConfig,
    out_dir: &Path,
) -> Result<Vec<FitSummary>> {
    if components.is_empty() {
        return Err(Error::domain("no component counts requested"));
    }
    let inputs = [delta_csv.to_path_buf()];
    let manifest = ManifestBuilder::start(
        "fit",
        serde_json::json!({
            "components": components,
            "max_iterations": base.max_iterations,
            "rel_tol": base.rel_tol,
            "min_weight": base.min_weight,
        }),
        &inputs,
        Some(base.seed),
    )?;
    let data = read_delta_csv(delta_csv)?;
    ensure_dir(out_dir)?;
    let mut summaries = Vec::with_capacity(components.len());
    let mut outputs = Vec::new();
    for &i in components {
        let cfg = EmConfig {
            num_components: i,
            ..base.clone()
        };
        let fit = fit_em(&data, &cfg)?;
        let path = out_dir.join(model_file_name(i));
        fit.model.save(&path)?;
        summaries.push(FitSummary {
            num_components: i,
            log_likelihood: fit.model.meta().loglik,
            iterations: fit.model.meta().iterations,
            model_path: path.clone(),
        });
        outputs.push(path);
    }
    manifest.finish(out_dir, &outputs)?;
    Ok(summaries)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBound {
    pub model_path: PathBuf,
    pub num_components: usize,
    pub dim: usize,
    pub curve_path: PathBuf,
    pub curve: Vec<crate::bound::DistortionRatePoint>,
    pub transparent: TransparentRate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveGap {
    pub smaller: usize,
    pub larger: usize,
    pub max_gap_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundSummary {
    pub models: Vec<ModelBound>,
    pub gaps: Vec<CurveGap>,
    pub report_path: PathBuf,
}

pub fn curve_csv(curve: &[crate::bound::DistortionRatePoint]) -> String {
    let mut out = String::from("rate_bits,mse_delta,mse_lsf,lsd_db\n");
    for p in curve {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(p.rate),
            fmt_f64(p.mse_delta),
            fmt_f64(p.mse_lsf),
            fmt_f64(p.lsd_db)
        );
    }
    out
}

fn mode_names(cfg: &BoundConfig) -> (&'static str, &'static str) {
    use crate::bound::{CoefficientMode, TransformMode};
    let c = match cfg.coefficient_mode {
        CoefficientMode::GammaRatio => "paper",
        CoefficientMode::SphereBound => "sphere",
    };
    let t = match cfg.transform_mode {
        TransformMode::IsotropicCell => "isotropic",
        TransformMode::JacobianOnly => "jacobian",
    };
    (c, t)
}

fn bound_report(cfg: &BoundConfig, poly: &LsdPolynomial, models: &[ModelBound], gaps: &[CurveGap]) -> String {
    let (c, t) = mode_names(cfg);
    let mut out = String::new();
    let _ = writeln!(out, "LSD-rate bound report");
    let _ = writeln!(out, "coefficient_mode: {c}");
    let _ = writeln!(out, "transform_mode: {t}");
    let _ = writeln!(out, "lsd_target_db: {}", cfg.lsd_target_db);
    let _ = writeln!(
        out,
        "rate_grid: {} to {} step {}",
        cfg.rate_grid.min, cfg.rate_grid.max, cfg.rate_grid.step
    );
    let pc = poly.coeffs();
    let _ = writeln!(
        out,
        "polynomial: {}, {}, {}, {} x 10^{}",
        pc[0],
        pc[1],
        pc[2],
        pc[3],
        poly.scale_exponent()
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "model\tI\tK\tR*_bits\tceil_R*\tout_of_domain_points");
    for m in models {
        let ood = m.curve.iter().filter(|p| p.out_of_domain).count();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{:.9}\t{}\t{}",
            m.model_path.display(),
            m.num_components,
            m.dim,
            m.transparent.rate,
            m.transparent.rate_ceil,
            ood
        );
    }
    if !gaps.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "I_a\tI_b\tmax_lsd_gap_db");
        for g in gaps {
            let _ = writeln!(out, "{}\t{}\t{:.9}", g.smaller, g.larger, g.max_gap_db);
        }
    }
    out
}

fn model_stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("model")
        .to_string()
}

/// One curve per model, the minimum transparent rate of each and the largest
/// LSD difference between consecutive model orders.
pub fn cmd_bound(
    model_paths: &[PathBuf],
    cfg: &BoundConfig,
    poly: &LsdPolynomial,
    out_dir: &Path,
) -> Result<BoundSummary> {
    if model_paths.is_empty() {
        return Err(Error::domain("no model files given"));
    }
    let (c, t) = mode_names(cfg);
    let manifest = ManifestBuilder::start(
        "bound",
        serde_json::json!({
            "coefficient_mode": c,
            "transform_mode": t,
            "lsd_target_db": cfg.lsd_target_db,
            "rate_min": cfg.rate_grid.min,
            "rate_max": cfg.rate_grid.max,
            "rate_step": cfg.rate_grid.step,
            "poly": poly.coeffs(),
            "poly_scale_exp": poly.scale_exponent(),
        }),
        model_paths,
        None,
    )?;
    let models = model_paths
        .iter()
        .map(|p| DirichletMixture::load(p))
        .collect::<Result<Vec<_>>>()?;
    let k = models[0].dim();
    if let Some(i) = models.iter().position(|m| m.dim() != k) {
        return Err(Error::domain(format!(
            "{} has dimension {}, {} has {k}",
            model_paths[i].display(),
            models[i].dim(),
            model_paths[0].display()
        )));
    }
    ensure_dir(out_dir)?;
    let mut bounds = Vec::with_capacity(models.len());
    let mut outputs = Vec::new();
    for (idx, (path, model)) in model_paths.iter().zip(&models).enumerate() {
        let curve = lsd_rate_curve(model, cfg, poly)?;
        let transparent = min_transparent_rate(model, cfg, poly)?;
        let curve_path = out_dir.join(format!("curve_{idx:02}_{}.csv", model_stem(path)));
        write_text(&curve_path, &curve_csv(&curve))?;
        outputs.push(curve_path.clone());
        bounds.push(ModelBound {
            model_path: path.clone(),
            num_components: model.num_components(),
            dim: model.dim(),
            curve_path,
            curve,
            transparent,
        });
    }

    let mut order: Vec<usize> = (0..bounds.len()).collect();
    order.sort_by_key(|&i| (bounds[i].num_components, i));
    let gaps = order
        .windows(2)
        .map(|w| {
            let (a, b) = (&bounds[w[0]], &bounds[w[1]]);
            let max_gap_db = a
                .curve
                .iter()
                .zip(&b.curve)
                .map(|(x, y)| (x.lsd_db - y.lsd_db).abs())
                .fold(0.0, f64::max);
            CurveGap {
                smaller: a.num_components,
                larger: b.num_components,
                max_gap_db,
            }
        })
        .collect::<Vec<_>>();

    let report_path = out_dir.join(BOUND_REPORT);
    write_text(&report_path, &bound_report(cfg, poly, &bounds, &gaps))?;
    outputs.push(report_path.clone());
    manifest.finish(out_dir, &outputs)?;
    Ok(BoundSummary {
        models: bounds,
        gaps,
        report_path,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum PairOutcome {
    Lsd(f64),
    Unstable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsdEvalSummary {
    pub per_row: Vec<(usize, PairOutcome)>,
    pub unstable: usize,
    pub statistics: LsdStatistics,
    pub csv_path: PathBuf,
    pub report_path: PathBuf,
}

fn pair_lsd(row: &[f64], grid: &SpectrumGrid) -> Result<PairOutcome> {
    let k = row.len() / 2;
    let a = LpcFrame::from_coefficients(row[..k].to_vec())?;
    let a_hat = LpcFrame::from_coefficients(row[k..].to_vec())?;
    if !a.is_minimum_phase() || !a_hat.is_minimum_phase() {
        return Ok(PairOutcome::Unstable);
    }
    Ok(PairOutcome::Lsd(log_spectral_distortion(&a, &a_hat, grid)?))
}

/// Rows hold `2K` coefficients: the original filter followed by its
/// quantized version. Unstable rows are marked and left out of the
/// statistics.
pub fn cmd_lsd_eval(pairs_csv: &Path, grid: &SpectrumGrid, out_dir: &Path) -> Result<LsdEvalSummary> {
    let inputs = [pairs_csv.to_path_buf()];
    let manifest = ManifestBuilder::start(
        "lsd-eval",
        serde_json::json!({
            "num_points": grid.num_points,
            "sample_rate_hz": grid.sample_rate_hz,
        }),
        &inputs,
        None,
    )?;
    let rows = read_numeric_csv(pairs_csv, true)?;
    if rows.is_empty() {
        return Err(Error::domain(format!("{} has no filter pairs", pairs_csv.display())));
    }
    let width = rows[0].1.len();
    for (line, row) in &rows {
        if row.len() != width || row.len() % 2 != 0 || row.is_empty() {
            return Err(Error::Parse {
                path: pairs_csv.to_path_buf(),
                line: *line,
                msg: format!("expected an even number of fields matching the first row ({width})"),
            });
        }
    }
    let per_row = rows
        .par_iter()
        .map(|(line, row)| pair_lsd(row, grid).map(|o| (*line, o)))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = per_row
        .iter()
        .filter_map(|(_, o)| match o {
            PairOutcome::Lsd(v) => Some(*v),
            PairOutcome::Unstable => None,
        })
        .collect();
    let unstable = per_row.len() - values.len();
    let statistics = lsd_statistics(&values)?;

    ensure_dir(out_dir)?;
    let mut csv = String::from("line,lsd_db,status\n");
    for (line, o) in &per_row {
        match o {
            PairOutcome::Lsd(v) => {
                let _ = writeln!(csv, "{line},{},ok", fmt_f64(*v));
            }
            PairOutcome::Unstable => {
                let _ = writeln!(csv, "{line},,unstable");
            }
        }
    }
    let csv_path = out_dir.join(LSD_CSV);
    write_text(&csv_path, &csv)?;

    let mut report = String::new();
    let _ = writeln!(report, "LSD evaluation report");
    let _ = writeln!(report, "grid_points: {}", grid.num_points);
    let _ = writeln!(report, "pairs: {}", per_row.len());
    let _ = writeln!(report, "unstable_excluded: {unstable}");
    let _ = writeln!(report, "mean_lsd_db: {:.9}", statistics.mean_db);
    let _ = writeln!(report, "pct_2_to_4_db: {:.6}", statistics.pct_outliers_2_4);
    let _ = writeln!(report, "pct_over_4_db: {:.6}", statistics.pct_outliers_over_4);
    let _ = writeln!(report, "transparent: {}", statistics.transparent);
    let report_path = out_dir.join(LSD_REPORT);
    write_text(&report_path, &report)?;
    manifest.finish(out_dir, &[csv_path.clone(), report_path.clone()])?;
    Ok(LsdEvalSummary {
        per_row,
        unstable,
        statistics,
        csv_path,
        report_path,
    })
}
