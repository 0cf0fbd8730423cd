//! Finite Dirichlet mixtures fitted by EM, their JSON model file and the
//! entropy terms consumed by the rate-allocation formulas.
//!
//! All parallel reductions run over fixed-size row chunks and are combined
//! in chunk order, so a fit is bit-identical for a given data set and seed
//! regardless of thread count.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::dirichlet::{fit_mle_stats, fit_moments, DirichletParams, SimplexData, SuffStats};
use crate::error::{Error, Result};
use crate::formats::{fmt_f64, write_text};

const CHUNK_ROWS: usize = 2048;
const KMEANS_ITERS: usize = 20;
const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub params: DirichletParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainingMeta {
    pub num_samples: usize,
    pub loglik: f64,
    pub iterations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirichletMixture {
    components: Vec<MixtureComponent>,
    dim: usize,
    meta: TrainingMeta,
}

impl DirichletMixture {
    pub fn new(components: Vec<MixtureComponent>, meta: TrainingMeta) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::domain("mixture needs at least one component"))?;
        let dim = first.params.dim();
        if let Some(i) = components.iter().position(|c| c.params.dim() != dim) {
            return Err(Error::domain(format!(
                "component {i} has dimension {}, component 0 has {dim}",
                components[i].params.dim()
            )));
        }
        if let Some(i) = components
            .iter()
            .position(|c| !(c.weight.is_finite() && c.weight >= 0.0))
        {
            return Err(Error::domain(format!("weight {i} is invalid")));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::domain(format!("weights sum to {total}, not 1")));
        }
        Ok(Self {
            components,
            dim,
            meta,
        })
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    /// Number of free ΔLSF coordinates `K`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn meta(&self) -> &TrainingMeta {
        &self.meta
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn to_json(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(", ");
        let mut out = String::new();
        let _ = writeln!(out, "{{");
        let _ = writeln!(out, "  \"format_version\": 1,");
        let _ = writeln!(out, "  \"K\": {},", self.dim);
        let _ = writeln!(out, "  \"I\": {},", self.num_components());
        let _ = writeln!(out, "  \"weights\": [{}],", list(&self.weights()));
        let _ = writeln!(out, "  \"alphas\": [");
        for (i, c) in self.components.iter().enumerate() {
            let sep = if i + 1 < self.components.len() { "," } else { "" };
            let _ = writeln!(out, "    [{}]{sep}", list(c.params.alpha()));
        }
        let _ = writeln!(out, "  ],");
        let _ = writeln!(out, "  \"trained_on\": {{");
        let _ = writeln!(out, "    \"num_vectors\": {},", self.meta.num_samples);
        let _ = writeln!(out, "    \"loglik\": {},", fmt_f64(self.meta.loglik));
        let _ = writeln!(out, "    \"iterations\": {},", self.meta.iterations);
        let _ = writeln!(out, "    \"seed\": {}", self.meta.seed);
        let _ = writeln!(out, "  }}");
        let _ = writeln!(out, "}}");
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("model file: {e}")))?;
        if file.format_version != 1 {
            return Err(Error::Format(format!(
                "unsupported model format_version {}",
                file.format_version
            )));
        }
        if file.weights.len() != file.i || file.alphas.len() != file.i {
            return Err(Error::Format(format!(
                "model declares I = {} but has {} weights and {} alpha rows",
                file.i,
                file.weights.len(),
                file.alphas.len()
            )));
        }
        if let Some(row) = file.alphas.iter().position(|a| a.len() != file.k + 1) {
            return Err(Error::Format(format!(
                "alpha row {row} does not have K + 1 = {} entries",
                file.k + 1
            )));
        }
        let components = file
            .weights
            .into_iter()
            .zip(file.alphas)
            .map(|(weight, alpha)| {
                Ok(MixtureComponent {
                    weight,
                    params: DirichletParams::new(alpha)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let t = file.trained_on.unwrap_or_default();
        Self::new(
            components,
            TrainingMeta {
                num_samples: t.num_vectors,
                loglik: t.loglik,
                iterations: t.iterations,
                seed: t.seed,
            },
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_json())
    }

    /// Mixture log density of one row given with all `K + 1` log coordinates.
    fn component_log_terms(&self) -> (Vec<f64>, Vec<f64>) {
        let width = self.dim + 1;
        let mut offsets = Vec::with_capacity(self.num_components());
        let mut slopes = Vec::with_capacity(self.num_components() * width);
        for c in &self.components {
            offsets.push(c.weight.ln() + c.params.log_normalizer());
            slopes.extend(c.params.alpha().iter().map(|a| a - 1.0));
        }
        (offsets, slopes)
    }
}

#[derive(Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "I")]
    i: usize,
    weights: Vec<f64>,
    alphas: Vec<Vec<f64>>,
    trained_on: Option<TrainedOn>,
}

#[derive(Deserialize, Default)]
struct TrainedOn {
    num_vectors: usize,
    loglik: f64,
    iterations: usize,
    seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub num_components: usize,
    pub max_iterations: usize,
    /// Stop once `|ΔLL| / |LL|` drops below this.
    pub rel_tol: f64,
    pub seed: u64,
    pub min_weight: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            num_components: 1,
            max_iterations: 200,
            rel_tol: 1e-6,
            seed: 0,
            min_weight: 1e-8,
        }
    }
}

impl EmConfig {
    pub fn with_components(num_components: usize) -> Self {
        Self {
            num_components,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.num_components == 0 {
            return Err(Error::domain("need at least one mixture component"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::domain("rel_tol must be positive"));
        }
        if !(self.min_weight >= 0.0 && self.min_weight * (self.num_components as f64) < 1.0) {
            return Err(Error::domain("min_weight must be in [0, 1/I)"));
        }
        Ok(())
    }
}

fn floor_weights(raw: &[f64], min_weight: f64) -> Vec<f64> {
    let floored: Vec<f64> = raw.iter().map(|w| w.max(min_weight)).collect();
    let total: f64 = floored.iter().sum();
    floored.iter().map(|w| w / total).collect()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(row: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    centroids
        .iter()
        .enumerate()
        .map(|(j, c)| (j, squared_distance(row, c)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

fn assign(data: &SimplexData, centroids: &[Vec<f64>]) -> Vec<(usize, f64)> {
    let rows: Vec<&[f64]> = data.rows().collect();
    rows.par_iter().map(|r| nearest(r, centroids)).collect()
}

/// Seeded k-means++ / Lloyd partition of the rows.
fn kmeans(data: &SimplexData, clusters: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = data.len();
    let rows: Vec<&[f64]> = data.rows().collect();
    let mut centroids: Vec<Vec<f64>> = vec![rows[rng.random_range(0..n)].to_vec()];
    let mut dist: Vec<f64> = rows
        .par_iter()
        .map(|r| squared_distance(r, &centroids[0]))
        .collect();
    while centroids.len() < clusters {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            dist.iter()
                .position(|d| {
                    acc += d;
                    acc > target
                })
                .unwrap_or(n - 1)
        } else {
            rng.random_range(0..n)
        };
        let c = rows[pick].to_vec();
        dist.par_iter_mut()
            .zip(rows.par_iter())
            .for_each(|(d, r)| *d = d.min(squared_distance(r, &c)));
        centroids.push(c);
    }

    let width = data.dim() + 1;
    let mut labels = vec![0usize; n];
    for _ in 0..KMEANS_ITERS {
        let assigned = assign(data, &centroids);
        labels.iter_mut().zip(&assigned).for_each(|(l, a)| *l = a.0);
        let mut sums = vec![vec![0.0; width]; clusters];
        let mut counts = vec![0usize; clusters];
        for (row, &l) in rows.iter().zip(&labels) {
            counts[l] += 1;
            sums[l].iter_mut().zip(*row).for_each(|(s, x)| *s += x);
        }
        for j in 0..clusters {
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        // re-seed empty clusters from the farthest member of the largest one
        for j in 0..clusters {
            if counts[j] > 0 {
                continue;
            }
            let largest = (0..clusters).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap();
            let far = (0..n)
                .filter(|&i| labels[i] == largest)
                .max_by(|&a, &b| {
                    assigned[a]
                        .1
                        .partial_cmp(&assigned[b].1)
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(b.cmp(&a))
                })
                .unwrap();
            centroids[j] = rows[far].to_vec();
            labels[far] = j;
            counts[largest] -= 1;
            counts[j] = 1;
        }
    }
    let assigned = assign(data, &centroids);
    assigned.into_iter().map(|a| a.0).collect()
}

/// k-means partition, per-cluster moment fits and cluster-fraction weights.
pub fn init_model(data: &SimplexData, cfg: &EmConfig) -> Result<DirichletMixture> {
    cfg.validate()?;
    let n = data.len();
    let clusters = cfg.num_components;
    if n < 10 * clusters {
        return Err(Error::domain(format!(
            "{n} samples are too few for {clusters} components (need at least {})",
            10 * clusters
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let labels = if clusters == 1 {
        vec![0; n]
    } else {
        kmeans(data, clusters, &mut rng)
    };
    let mut members: Vec<Vec<&[f64]>> = vec![Vec::new(); clusters];
    for (row, &l) in data.rows().zip(&labels) {
        members[l].push(&row[..data.dim()]);
    }
    let global = fit_moments(data, None)?.params;
    let raw: Vec<f64> = members.iter().map(|m| m.len() as f64 / n as f64).collect();
    let weights = floor_weights(&raw, cfg.min_weight);
    let components = members
        .iter()
        .zip(weights)
        .map(|(m, weight)| {
            let params = if m.is_empty() {
                global.clone()
            } else {
                fit_moments(&SimplexData::from_rows(m)?, None)?.params
            };
            Ok(MixtureComponent { weight, params })
        })
        .collect::<Result<Vec<_>>>()?;
    DirichletMixture::new(
        components,
        TrainingMeta {
            num_samples: n,
            seed: cfg.seed,
            ..TrainingMeta::default()
        },
    )
}

fn check_dims(model: &DirichletMixture, data: &SimplexData) -> Result<()> {
    if model.dim() != data.dim() {
        return Err(Error::domain(format!(
            "model dimension {} does not match data dimension {}",
            model.dim(),
            data.dim()
        )));
    }
    Ok(())
}

/// Fills `resp` (rows x I) for one chunk and returns its log-likelihood.
fn chunk_responsibilities(
    model: &DirichletMixture,
    offsets: &[f64],
    slopes: &[f64],
    data: &SimplexData,
    first_row: usize,
    resp: &mut [f64],
) -> Result<f64> {
    let comps = model.num_components();
    let width = model.dim() + 1;
    let mut ll = 0.0;
    for (r, out) in resp.chunks_exact_mut(comps).enumerate() {
        let n = first_row + r;
        let logs = data.log_row(n);
        for (i, o) in out.iter_mut().enumerate() {
            let s = &slopes[i * width..(i + 1) * width];
            *o = offsets[i] + s.iter().zip(logs).map(|(a, l)| a * l).sum::<f64>();
        }
        let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::numeric(format!(
                "all component densities underflow at sample {n}"
            )));
        }
        let mut total = 0.0;
        for o in out.iter_mut() {
            *o = (*o - max).exp();
            total += *o;
        }
        out.iter_mut().for_each(|o| *o /= total);
        ll += max + total.ln();
    }
    Ok(ll)
}

/// Per-component statistics of one chunk from its responsibility rows.
fn chunk_stats(data: &SimplexData, first_row: usize, resp: &[f64], comps: usize) -> Vec<SuffStats> {
    let width = data.dim() + 1;
    let mut stats = vec![
        SuffStats {
            total_weight: 0.0,
            log_sums: vec![0.0; width],
        };
        comps
    ];
    for (r, row_resp) in resp.chunks_exact(comps).enumerate() {
        let logs = data.log_row(first_row + r);
        for (st, &w) in stats.iter_mut().zip(row_resp) {
            st.total_weight += w;
            st.log_sums.iter_mut().zip(logs).for_each(|(s, l)| *s += w * l);
        }
    }
    stats
}

fn merge_stats(parts: Vec<Vec<SuffStats>>, comps: usize, width: usize) -> Vec<SuffStats> {
    let mut total = vec![
        SuffStats {
            total_weight: 0.0,
            log_sums: vec![0.0; width],
        };
        comps
    ];
    for part in parts {
        for (t, p) in total.iter_mut().zip(part) {
            t.total_weight += p.total_weight;
            t.log_sums.iter_mut().zip(&p.log_sums).for_each(|(a, b)| *a += b);
        }
    }
    total
}

/// Output of [`e_step`]: row-major `N x I` responsibilities.
#[derive(Debug, Clone, PartialEq)]
pub struct EStep {
    pub responsibilities: Vec<f64>,
    pub num_components: usize,
    pub log_likelihood: f64,
}

impl EStep {
    pub fn row(&self, n: usize) -> &[f64] {
        &self.responsibilities[n * self.num_components..(n + 1) * self.num_components]
    }
}

/// Posterior component probabilities and the exact mixture log-likelihood.
pub fn e_step(model: &DirichletMixture, data: &SimplexData) -> Result<EStep> {
    check_dims(model, data)?;
    let comps = model.num_components();
    let (offsets, slopes) = model.component_log_terms();
    let mut resp = vec![0.0; data.len() * comps];
    let parts: Vec<Result<f64>> = resp
        .par_chunks_mut(CHUNK_ROWS * comps)
        .enumerate()
        .map(|(c, chunk)| chunk_responsibilities(model, &offsets, &slopes, data, c * CHUNK_ROWS, chunk))
        .collect();
    let mut ll = 0.0;
    for p in parts {
        ll += p?;
    }
    Ok(EStep {
        responsibilities: resp,
        num_components: comps,
        log_likelihood: ll,
    })
}

/// E-step fused with statistic accumulation; never materializes the full
/// responsibility matrix.
fn e_step_stats(model: &DirichletMixture, data: &SimplexData) -> Result<(Vec<SuffStats>, f64)> {
    check_dims(model, data)?;
    let comps = model.num_components();
    let (offsets, slopes) = model.component_log_terms();
    let chunks = data.len().div_ceil(CHUNK_ROWS);
    let parts: Vec<Result<(Vec<SuffStats>, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let first = c * CHUNK_ROWS;
            let rows = CHUNK_ROWS.min(data.len() - first);
            let mut resp = vec![0.0; rows * comps];
            let ll = chunk_responsibilities(model, &offsets, &slopes, data, first, &mut resp)?;
            Ok((chunk_stats(data, first, &resp, comps), ll))
        })
        .collect();
    let mut ll = 0.0;
    let mut stat_parts = Vec::with_capacity(chunks);
    for p in parts {
        let (s, l) = p?;
        ll += l;
        stat_parts.push(s);
    }
    Ok((merge_stats(stat_parts, comps, data.dim() + 1), ll))
}

fn m_step_from_stats(
    stats: &[SuffStats],
    num_samples: usize,
    prev: &DirichletMixture,
    min_weight: f64,
) -> Result<DirichletMixture> {
    let raw: Vec<f64> = stats
        .iter()
        .map(|s| s.total_weight / num_samples as f64)
        .collect();
    let weights = floor_weights(&raw, min_weight);
    let fits: Vec<Result<DirichletParams>> = stats
        .par_iter()
        .zip(prev.components().par_iter())
        .map(|(s, c)| {
            if s.total_weight > 0.0 {
                fit_mle_stats(s, &c.params).map(|f| f.params)
            } else {
                Ok(c.params.clone())
            }
        })
        .collect();
    let components = fits
        .into_iter()
        .zip(weights)
        .map(|(p, weight)| Ok(MixtureComponent { weight, params: p? }))
        .collect::<Result<Vec<_>>>()?;
    DirichletMixture::new(components, *prev.meta())
}

/// Weights from responsibility column sums (floored at `min_weight`, then
/// renormalized) and per-component weighted Dirichlet MLE warm-started at
/// the previous parameters.
pub fn m_step(
    data: &SimplexData,
    responsibilities: &EStep,
    prev: &DirichletMixture,
    min_weight: f64,
) -> Result<DirichletMixture> {
    check_dims(prev, data)?;
    let comps = prev.num_components();
    if responsibilities.num_components != comps
        || responsibilities.responsibilities.len() != data.len() * comps
    {
        return Err(Error::domain("responsibility matrix shape does not match"));
    }
    let parts: Vec<Vec<SuffStats>> = responsibilities
        .responsibilities
        .par_chunks(CHUNK_ROWS * comps)
        .enumerate()
        .map(|(c, chunk)| chunk_stats(data, c * CHUNK_ROWS, chunk, comps))
        .collect();
    let stats = merge_stats(parts, comps, data.dim() + 1);
    m_step_from_stats(&stats, data.len(), prev, min_weight)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmFit {
    pub model: DirichletMixture,
    /// Log-likelihood of the initial model followed by one entry per
    /// iteration.
    pub history: Vec<f64>,
}

pub fn fit_em(data: &SimplexData, cfg: &EmConfig) -> Result<EmFit> {
    let mut model = init_model(data, cfg)?;
    let (mut stats, ll) = e_step_stats(&model, data)?;
    if !ll.is_finite() {
        return Err(Error::numeric("log-likelihood is not finite at iteration 0"));
    }
    let mut history = vec![ll];
    let mut iterations = 0;
    for it in 1..=cfg.max_iterations {
        model = m_step_from_stats(&stats, data.len(), &model, cfg.min_weight)
            .map_err(|e| Error::numeric(format!("iteration {it}: {e}")))?;
        let (next_stats, ll) = e_step_stats(&model, data)?;
        if !ll.is_finite() {
            return Err(Error::numeric(format!(
                "log-likelihood is not finite at iteration {it}"
            )));
        }
        let prev = *history.last().unwrap();
        history.push(ll);
        stats = next_stats;
        iterations = it;
        if ((ll - prev) / ll).abs() < cfg.rel_tol {
            break;
        }
    }
    model.meta = TrainingMeta {
        num_samples: data.len(),
        loglik: *history.last().unwrap(),
        iterations,
        seed: cfg.seed,
    };
    Ok(EmFit { model, history })
}

/// Per-component differential entropies (bits) and their weighted mean.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyTerms {
    pub per_component: Vec<f64>,
    pub mean: f64,
}

pub fn mixture_entropy_terms(model: &DirichletMixture) -> EntropyTerms {
    let per_component: Vec<f64> = model
        .components()
        .iter()
        .map(|c| c.params.entropy_bits())
        .collect();
    let mean = model
        .components()
        .iter()
        .zip(&per_component)
        .map(|(c, h)| c.weight * h)
        .sum();
    EntropyTerms {
        per_component,
        mean,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirichlet::{fit_mle, SimplexPoint};

    fn params(a: &[f64]) -> DirichletParams {
        DirichletParams::new(a.to_vec()).unwrap()
    }

    fn mixture(parts: &[(f64, &[f64])]) -> DirichletMixture {
        DirichletMixture::new(
            parts
                .iter()
                .map(|(w, a)| MixtureComponent {
                    weight: *w,
                    params: params(a),
                })
                .collect(),
            TrainingMeta::default(),
        )
        .unwrap()
    }

    fn draw_mixture(model: &DirichletMixture, n: usize, seed: u64) -> (SimplexData, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut labels = Vec::with_capacity(n);
        let mut pts = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = model.num_components() - 1;
            for (i, c) in model.components().iter().enumerate() {
                acc += c.weight;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            labels.push(pick);
            pts.push(model.components()[pick].params.sample(&mut rng));
        }
        (SimplexData::from_points(&pts).unwrap(), labels)
    }

    #[test]
    fn construction_invariants() {
        let err = DirichletMixture::new(
            vec![
                MixtureComponent { weight: 0.5, params: params(&[1.0, 1.0]) },
                MixtureComponent { weight: 0.5, params: params(&[1.0, 1.0, 1.0]) },
            ],
            TrainingMeta::default(),
        );
        assert!(err.is_err());
        let err = DirichletMixture::new(
            vec![MixtureComponent { weight: 0.9, params: params(&[1.0, 1.0]) }],
            TrainingMeta::default(),
        );
        assert!(err.is_err());
        assert!(DirichletMixture::new(vec![], TrainingMeta::default()).is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut m = mixture(&[(0.3, &[1.0 / 3.0, 2.5, 7.0]), (0.7, &[0.1, 0.2, 1e5])]);
        m.meta = TrainingMeta { num_samples: 12, loglik: -1234.5678901234567, iterations: 9, seed: 42 };
        let text = m.to_json();
        let back = DirichletMixture::from_json(&text).unwrap();
        assert_eq!(back, m);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["format_version"], 1);
        assert_eq!(v["K"], 2);
        assert_eq!(v["I"], 2);
        assert_eq!(v["trained_on"]["seed"], 42);
    }

    #[test]
    fn json_rejects_bad_files() {
        assert!(DirichletMixture::from_json("{").is_err());
        let wrong_version = r#"{"format_version":2,"K":1,"I":1,"weights":[1],"alphas":[[1,1]]}"#;
        assert!(DirichletMixture::from_json(wrong_version).is_err());
        let bad_shape = r#"{"format_version":1,"K":2,"I":1,"weights":[1],"alphas":[[1,1]]}"#;
        assert!(DirichletMixture::from_json(bad_shape).is_err());
        let minimal = r#"{"format_version":1,"K":1,"I":1,"weights":[1],"alphas":[[1,1]]}"#;
        assert_eq!(DirichletMixture::from_json(minimal).unwrap().dim(), 1);
    }

    #[test]
    fn single_component_init_is_global_moment_fit() {
        let data = draw_mixture(&mixture(&[(1.0, &[2.0, 5.0, 3.0])]), 500, 1).0;
        let m = init_model(&data, &EmConfig::with_components(1)).unwrap();
        assert_eq!(m.weights(), vec![1.0]);
        assert_eq!(m.components()[0].params, fit_moments(&data, None).unwrap().params);
    }

    #[test]
    fn init_separates_clusters_and_is_deterministic() {
        let truth = mixture(&[(0.5, &[50.0, 5.0, 5.0]), (0.5, &[5.0, 5.0, 50.0])]);
        let (data, labels) = draw_mixture(&truth, 2000, 2);
        let cfg = EmConfig { seed: 9, ..EmConfig::with_components(2) };
        let a = init_model(&data, &cfg).unwrap();
        let b = init_model(&data, &cfg).unwrap();
        assert_eq!(a, b);
        let post = e_step(&a, &data).unwrap();
        let hits = (0..data.len())
            .filter(|&n| {
                let r = post.row(n);
                let best = if r[0] > r[1] { 0 } else { 1 };
                best == labels[n]
            })
            .count();
        let purity = hits.max(data.len() - hits) as f64 / data.len() as f64;
        assert!(purity > 0.99, "purity {purity}");
    }

    #[test]
    fn init_needs_enough_samples() {
        let data = draw_mixture(&mixture(&[(1.0, &[2.0, 2.0])]), 15, 3).0;
        assert!(init_model(&data, &EmConfig::with_components(2)).is_err());
    }

    #[test]
    fn e_step_single_and_symmetric() {
        let data = draw_mixture(&mixture(&[(1.0, &[2.0, 5.0, 3.0])]), 100, 4).0;
        let one = mixture(&[(1.0, &[2.0, 5.0, 3.0])]);
        let post = e_step(&one, &data).unwrap();
        assert!(post.responsibilities.iter().all(|&r| r == 1.0));
        let p = params(&[2.0, 5.0, 3.0]);
        let direct: f64 = data.rows().map(|r| p.log_pdf_full(r)).sum();
        assert!((post.log_likelihood - direct).abs() < 1e-9 * direct.abs());

        let twin = mixture(&[(0.5, &[2.0, 5.0, 3.0]), (0.5, &[2.0, 5.0, 3.0])]);
        let post = e_step(&twin, &data).unwrap();
        assert!(post.responsibilities.iter().all(|&r| (r - 0.5).abs() < 1e-15));
    }

    #[test]
    fn e_step_rows_sum_to_one() {
        let m = mixture(&[(0.2, &[2.0, 5.0, 3.0]), (0.5, &[9.0, 1.0, 4.0]), (0.3, &[0.7, 0.8, 0.9])]);
        let data = draw_mixture(&m, 300, 5).0;
        let post = e_step(&m, &data).unwrap();
        for n in 0..data.len() {
            assert!((post.row(n).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn m_step_degenerate_responsibilities() {
        let m = mixture(&[(0.5, &[2.0, 5.0, 3.0]), (0.5, &[3.0, 3.0, 3.0])]);
        let data = draw_mixture(&mixture(&[(1.0, &[2.0, 5.0, 3.0])]), 1000, 6).0;
        let n = data.len();
        let mut resp = vec![0.0; 2 * n];
        (0..n).for_each(|i| resp[2 * i] = 1.0);
        let post = EStep { responsibilities: resp, num_components: 2, log_likelihood: 0.0 };
        let next = m_step(&data, &post, &m, 1e-8).unwrap();
        let w = next.weights();
        assert!((w[0] - 1.0 / (1.0 + 1e-8)).abs() < 1e-15);
        assert!((w[1] - 1e-8 / (1.0 + 1e-8)).abs() < 1e-20);
        let global = fit_mle(&data, None, &params(&[2.0, 5.0, 3.0])).unwrap().params;
        for (a, b) in next.components()[0].params.alpha().iter().zip(global.alpha()) {
            assert!((a - b).abs() < 1e-8 * b);
        }
        assert_eq!(next.components()[1].params, m.components()[1].params);
    }

    #[test]
    fn m_step_uniform_responsibilities_give_twins() {
        let m = mixture(&[(0.5, &[2.0, 5.0, 3.0]), (0.5, &[2.0, 5.0, 3.0])]);
        let data = draw_mixture(&m, 1000, 7).0;
        let post = EStep {
            responsibilities: vec![0.5; 2 * data.len()],
            num_components: 2,
            log_likelihood: 0.0,
        };
        let next = m_step(&data, &post, &m, 1e-8).unwrap();
        assert_eq!(next.components()[0], next.components()[1]);
    }

    #[test]
    fn em_single_component_is_mle() {
        let data = draw_mixture(&mixture(&[(1.0, &[2.0, 5.0, 3.0])]), 5000, 8).0;
        let fit = fit_em(&data, &EmConfig::with_components(1)).unwrap();
        let init = fit_moments(&data, None).unwrap().params;
        let mle = fit_mle(&data, None, &init).unwrap().params;
        for (a, b) in fit.model.components()[0].params.alpha().iter().zip(mle.alpha()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn em_infinite_tolerance_stops_after_one_iteration() {
        let data = draw_mixture(&mixture(&[(1.0, &[2.0, 5.0, 3.0])]), 400, 9).0;
        let cfg = EmConfig { rel_tol: f64::INFINITY, ..EmConfig::with_components(2) };
        let fit = fit_em(&data, &cfg).unwrap();
        assert_eq!(fit.history.len(), 2);
        assert_eq!(fit.model.meta().iterations, 1);
        assert_eq!(fit.model.num_components(), 2);
    }

    #[test]
    fn em_rejects_bad_config() {
        let data = draw_mixture(&mixture(&[(1.0, &[2.0, 5.0, 3.0])]), 400, 9).0;
        assert!(fit_em(&data, &EmConfig { rel_tol: 0.0, ..EmConfig::default() }).is_err());
        assert!(fit_em(&data, &EmConfig::with_components(0)).is_err());
    }

    #[test]
    fn entropy_terms() {
        let one = mixture(&[(1.0, &[2.0, 2.0])]);
        let t = mixture_entropy_terms(&one);
        assert_eq!(t.mean, t.per_component[0]);
        let twin = mixture(&[(0.3, &[2.0, 2.0]), (0.7, &[2.0, 2.0])]);
        let t2 = mixture_entropy_terms(&twin);
        assert!((t2.mean - t.mean).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let m = mixture(&[(1.0, &[2.0, 2.0])]);
        let data = SimplexData::from_points(&[SimplexPoint::new(vec![0.2, 0.3]).unwrap()]).unwrap();
        assert!(e_step(&m, &data).is_err());
    }
}
