//! Parameter sampling, batch solving and dataset persistence.
//!
//! Features are stored column-wise (`n0 × s`) and labels as `k × s` bytes with
//! 1 = GF (positive) and 0 = Darcy.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scenarios::{build_landfill, build_spe10, LandfillConfig, Spe10Config};
use crate::solver::{picard_solve, PicardConfig};

const MAX_RESAMPLES: usize = 100;
pub const CASE1_FEATURES: usize = 12;
pub const CASE2_FEATURES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedNormalSpec {
    pub mu: f64,
    pub sigma: f64,
    pub lo: f64,
    pub hi: f64,
}

impl TruncatedNormalSpec {
    pub fn new(mu: f64, sigma: f64, lo: f64, hi: f64) -> Result<Self> {
        let spec = Self { mu, sigma, lo, hi };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi && self.sigma > 0.0 && self.mu.is_finite()) {
            return Err(Error::Sampling(format!("invalid clipped normal {self:?}")));
        }
        Ok(())
    }

    pub fn clip(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FeatureDistribution {
    ClippedNormal(TruncatedNormalSpec),
    Uniform { lo: f64, hi: f64 },
}

impl FeatureDistribution {
    pub fn influx() -> Self {
        Self::ClippedNormal(TruncatedNormalSpec { mu: 0.0105, sigma: 0.0035, lo: 0.001, hi: 0.1 })
    }

    pub fn forchheimer_coefficient() -> Self {
        Self::ClippedNormal(TruncatedNormalSpec { mu: 0.55, sigma: 0.4, lo: 0.1, hi: 0.9 })
    }

    pub fn forchheimer_exponent() -> Self {
        Self::ClippedNormal(TruncatedNormalSpec { mu: 1.0, sigma: 1.5, lo: 1.0, hi: 4.0 })
    }

    pub fn tolerance() -> Self {
        Self::Uniform { lo: 0.01, hi: 0.25 }
    }

    pub fn well_rate() -> Self {
        Self::ClippedNormal(TruncatedNormalSpec { mu: 100.0, sigma: 30.0, lo: 10.0, hi: 300.0 })
    }

    fn draw(&self, n: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
        match self {
            Self::ClippedNormal(spec) => sample_clipped(spec, n, rng),
            Self::Uniform { lo, hi } => {
                if !(lo < hi) {
                    return Err(Error::Sampling(format!("empty uniform interval [{lo}, {hi}]")));
                }
                Ok(dedup((0..n).map(|_| rng.random_range(*lo..*hi)).collect()))
            }
        }
    }
}

fn dedup(values: Vec<f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(values.len());
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// `n` normal draws clipped into the interval, exact repeats removed (first occurrence kept).
pub fn sample_clipped(spec: &TruncatedNormalSpec, n: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Sampling("at least one draw is required".into()));
    }
    let normal = Normal::new(spec.mu, spec.sigma).map_err(|e| Error::Sampling(e.to_string()))?;
    Ok(dedup((0..n).map(|_| spec.clip(normal.sample(rng))).collect()))
}

/// Number of raw draws and the distinct count that must survive deduplication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeaturePlan {
    pub draws: usize,
    pub distinct: usize,
}

impl FeaturePlan {
    pub const fn new(draws: usize, distinct: usize) -> Self {
        Self { draws, distinct }
    }
}

/// Redraws a feature until its distinct count matches the plan.
pub fn sample_feature(dist: &FeatureDistribution, plan: FeaturePlan, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if plan.distinct == 0 || plan.distinct > plan.draws {
        return Err(Error::Sampling(format!("cannot get {} distinct values from {} draws", plan.distinct, plan.draws)));
    }
    for _ in 0..MAX_RESAMPLES {
        let values = dist.draw(plan.draws, rng)?;
        if values.len() == plan.distinct {
            return Ok(values);
        }
    }
    Err(Error::Sampling(format!(
        "no draw of {} values produced {} distinct values in {MAX_RESAMPLES} attempts",
        plan.draws, plan.distinct
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Case1Plan {
    pub u0: FeaturePlan,
    pub cf: FeaturePlan,
    pub m: FeaturePlan,
    pub delta: FeaturePlan,
}

impl Default for Case1Plan {
    fn default() -> Self {
        Self {
            u0: FeaturePlan::new(7, 7),
            cf: FeaturePlan::new(7, 6),
            m: FeaturePlan::new(7, 4),
            delta: FeaturePlan::new(7, 7),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Case2Plan {
    pub q: FeaturePlan,
    pub cf: FeaturePlan,
    pub m: FeaturePlan,
    pub delta: FeaturePlan,
}

impl Default for Case2Plan {
    fn default() -> Self {
        Self {
            q: FeaturePlan::new(9, 9),
            cf: FeaturePlan::new(9, 8),
            m: FeaturePlan::new(9, 6),
            delta: FeaturePlan::new(9, 9),
        }
    }
}

fn product4(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<[f64; 4]> {
    let mut out = Vec::with_capacity(a.len() * b.len() * c.len() * d.len());
    for &x in a {
        for &y in b {
            for &z in c {
                for &w in d {
                    out.push([x, y, z, w]);
                }
            }
        }
    }
    out
}

/// `[u0, cF, m, δ, n_channels, φ1..φ7]` for every combination, 2-channel block first.
pub fn build_case1_inputs(plan: &Case1Plan, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>> {
    let u0 = sample_feature(&FeatureDistribution::influx(), plan.u0, rng)?;
    let cf = sample_feature(&FeatureDistribution::forchheimer_coefficient(), plan.cf, rng)?;
    let m = sample_feature(&FeatureDistribution::forchheimer_exponent(), plan.m, rng)?;
    let delta = sample_feature(&FeatureDistribution::tolerance(), plan.delta, rng)?;
    let combos = product4(&u0, &cf, &m, &delta);
    let porosity: Vec<[f64; 7]> =
        (0..combos.len()).map(|_| std::array::from_fn(|_| rng.random_range(0.9..0.99))).collect();
    let mut inputs = Vec::with_capacity(2 * combos.len());
    for n_channels in [2usize, 7] {
        for (combo, phi) in combos.iter().zip(&porosity) {
            let mut row = combo.to_vec();
            row.push(n_channels as f64);
            row.extend((0..7).map(|i| if i < n_channels { phi[i] } else { 0.0 }));
            inputs.push(row);
        }
    }
    Ok(inputs)
}

/// `[Q, cF, m, δ]` for every combination.
pub fn build_case2_inputs(plan: &Case2Plan, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>> {
    let q = sample_feature(&FeatureDistribution::well_rate(), plan.q, rng)?;
    let cf = sample_feature(&FeatureDistribution::forchheimer_coefficient(), plan.cf, rng)?;
    let m = sample_feature(&FeatureDistribution::forchheimer_exponent(), plan.m, rng)?;
    let delta = sample_feature(&FeatureDistribution::tolerance(), plan.delta, rng)?;
    Ok(product4(&q, &cf, &m, &delta).into_iter().map(|c| c.to_vec()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseKind {
    Landfill,
    Spe10,
}

impl CaseKind {
    pub fn n_features(self) -> usize {
        match self {
            Self::Landfill => CASE1_FEATURES,
            Self::Spe10 => CASE2_FEATURES,
        }
    }

    pub fn feature_names(self) -> Vec<String> {
        match self {
            Self::Landfill => ["u0", "cf", "m", "delta", "n_channels"]
                .iter()
                .map(|s| s.to_string())
                .chain((1..=7).map(|i| format!("phi{i}")))
                .collect(),
            Self::Spe10 => ["q", "cf", "m", "delta"].iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl std::str::FromStr for CaseKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "landfill" | "case1" | "1" => Ok(Self::Landfill),
            "spe10" | "case2" | "2" => Ok(Self::Spe10),
            other => Err(Error::Config(format!("unknown case {other:?}"))),
        }
    }
}

/// Fixed scenario data; sampled features overwrite the per-example fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CaseTemplate {
    Landfill(LandfillConfig),
    Spe10(Spe10Config),
}

impl CaseTemplate {
    pub fn kind(&self) -> CaseKind {
        match self {
            Self::Landfill(_) => CaseKind::Landfill,
            Self::Spe10(_) => CaseKind::Spe10,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            Self::Landfill(c) => (c.nx, c.ny),
            Self::Spe10(c) => (c.nx, c.ny),
        }
    }

    pub fn build(&self, features: &[f64]) -> Result<crate::solver::FlowProblem> {
        let n0 = self.kind().n_features();
        if features.len() != n0 {
            return Err(Error::Shape(format!("expected {n0} features, got {}", features.len())));
        }
        match self {
            Self::Landfill(base) => {
                let n_channels = features[4].round() as usize;
                if n_channels > 7 {
                    return Err(Error::Config(format!("unsupported channel count {n_channels}")));
                }
                let cfg = LandfillConfig {
                    u0: features[0],
                    cf: features[1],
                    m: features[2],
                    delta: features[3],
                    n_channels,
                    channel_porosities: features[5..5 + n_channels].to_vec(),
                    ..base.clone()
                };
                build_landfill(&cfg)
            }
            Self::Spe10(base) => {
                let cfg = Spe10Config {
                    q_rate: features[0],
                    cf: features[1],
                    m: features[2],
                    delta: features[3],
                    ..base.clone()
                };
                build_spe10(&cfg)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub ubar: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub case: CaseKind,
    pub seed: u64,
    pub nx: usize,
    pub ny: usize,
    /// `n0 × s`.
    pub features: Array2<f64>,
    /// `k × s`, 1 = GF.
    pub labels: Array2<u8>,
    pub records: Vec<RunRecord>,
    /// `k × s` cell flux magnitudes, when kept.
    pub magnitudes: Option<Array2<f64>>,
}

impl Dataset {
    pub fn n_examples(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_cells(&self) -> usize {
        self.labels.nrows()
    }

    pub fn labels_f64(&self) -> Array2<f64> {
        self.labels.mapv(f64::from)
    }

    /// Sub-dataset with the given example columns, in the given order.
    pub fn select(&self, columns: &[usize]) -> Self {
        Self {
            case: self.case,
            seed: self.seed,
            nx: self.nx,
            ny: self.ny,
            features: self.features.select(Axis(1), columns),
            labels: self.labels.select(Axis(1), columns),
            records: columns.iter().map(|&c| self.records[c]).collect(),
            magnitudes: self.magnitudes.as_ref().map(|m| m.select(Axis(1), columns)),
        }
    }

    /// Distinct values per feature row.
    pub fn distinct_counts(&self) -> Vec<usize> {
        self.features.rows().into_iter().map(|row| dedup(row.to_vec()).len()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationOptions {
    pub picard: PicardConfig,
    pub workers: usize,
    pub seed: u64,
    pub keep_magnitudes: bool,
    /// Under-relaxation for one retry of solves that cycle or diverge.
    pub retry_relaxation: Option<f64>,
}

impl Default for GenerationOptions {
    fn default() -> Self {
        Self {
            picard: PicardConfig::default(),
            workers: 4,
            seed: 0,
            keep_magnitudes: false,
            retry_relaxation: Some(0.5),
        }
    }
}

struct Outcome {
    labels: Vec<u8>,
    magnitude: Vec<f64>,
    record: RunRecord,
}

fn solve_one(i: usize, features: &[f64], template: &CaseTemplate, opts: &GenerationOptions) -> Result<Option<Outcome>> {
    let problem = template.build(features)?;
    let mut cfg = opts.picard;
    loop {
        let failure = match picard_solve(&problem, &cfg) {
            Ok(sol) if sol.converged => {
                return Ok(Some(Outcome {
                    labels: sol.labels.iter().map(|l| l.code()).collect(),
                    magnitude: sol.magnitude.into_vec(),
                    record: RunRecord { ubar: sol.ubar, iterations: sol.iterations, converged: true },
                }));
            }
            Ok(sol) => format!("no convergence after {} iterations", sol.iterations),
            Err(Error::Divergence(msg)) => msg,
            Err(e) => return Err(e),
        };
        match opts.retry_relaxation {
            Some(w) if w < cfg.relaxation => {
                log::info!("example {i}: {failure}; retrying with relaxation {w}");
                cfg.relaxation = w;
            }
            _ => {
                log::warn!("dropping example {i} {features:?}: {failure}");
                return Ok(None);
            }
        }
    }
}

/// Solves every input on a pool of `workers` threads; column order follows input order.
pub fn generate_dataset(inputs: &[Vec<f64>], template: &CaseTemplate, opts: &GenerationOptions) -> Result<Dataset> {
    if inputs.is_empty() {
        return Err(Error::Generation("no inputs to solve".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| Error::Generation(e.to_string()))?;
    let done = AtomicUsize::new(0);
    let report = |i: usize| {
        let n = done.fetch_add(1, AtomicOrdering::Relaxed) + 1;
        if n.is_multiple_of(100) || n == inputs.len() {
            log::info!("solved {n}/{} (last: example {i})", inputs.len());
        }
    };
    let results: Vec<Result<Option<Outcome>>> = pool.install(|| {
        inputs
            .par_iter()
            .enumerate()
            .map(|(i, features)| {
                let out = solve_one(i, features, template, opts);
                report(i);
                out
            })
            .collect()
    });

    let (nx, ny) = template.dims();
    let k = nx * ny;
    let mut kept_inputs = Vec::new();
    let mut outcomes = Vec::new();
    for (input, res) in inputs.iter().zip(results) {
        if let Some(o) = res? {
            kept_inputs.push(input);
            outcomes.push(o);
        }
    }
    if outcomes.is_empty() {
        return Err(Error::Generation(format!("all {} solves failed to converge", inputs.len())));
    }
    let s = outcomes.len();
    let n0 = template.kind().n_features();
    let features = Array2::from_shape_fn((n0, s), |(r, c)| kept_inputs[c][r]);
    let labels = Array2::from_shape_fn((k, s), |(r, c)| outcomes[c].labels[r]);
    let magnitudes = opts.keep_magnitudes.then(|| Array2::from_shape_fn((k, s), |(r, c)| outcomes[c].magnitude[r]));
    Ok(Dataset {
        case: template.kind(),
        seed: opts.seed,
        nx,
        ny,
        features,
        labels,
        records: outcomes.iter().map(|o| o.record).collect(),
        magnitudes,
    })
}

/// `floor(s · fraction)` test examples (at least one), chosen by a seeded shuffle.
pub fn split_train_test(dataset: &Dataset, test_fraction: f64, rng: &mut impl Rng) -> Result<(Dataset, Dataset)> {
    let s = dataset.n_examples();
    if s < 2 {
        return Err(Error::Split(format!("need at least 2 examples to split, got {s}")));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Split(format!("test fraction must lie in (0,1), got {test_fraction}")));
    }
    let n_test = test_size(s, test_fraction);
    let mut order: Vec<usize> = (0..s).collect();
    order.shuffle(rng);
    let mut test: Vec<usize> = order[..n_test].to_vec();
    let mut train: Vec<usize> = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((dataset.select(&train), dataset.select(&test)))
}

pub fn test_size(s: usize, test_fraction: f64) -> usize {
    ((s as f64 * test_fraction).floor() as usize).clamp(1, s - 1)
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    case: CaseKind,
    seed: u64,
    nx: usize,
    ny: usize,
    n_features: usize,
    n_examples: usize,
    n_cells: usize,
    feature_names: Vec<String>,
    records: Vec<RunRecord>,
    has_magnitudes: bool,
    checksums: BTreeMap<String, String>,
}

fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// One example per line, optionally preceded by a header.
pub fn columns_to_csv(m: &Array2<f64>, header: Option<&[String]>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        out.push_str(&h.join(","));
        out.push('\n');
    }
    for col in m.columns() {
        let row: Vec<String> = col.iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// One `0`/`1` string per example.
pub fn labels_to_text(labels: &Array2<u8>) -> String {
    let mut out = String::with_capacity(labels.len() + labels.ncols());
    for col in labels.columns() {
        out.extend(col.iter().map(|&b| if b == 1 { '1' } else { '0' }));
        out.push('\n');
    }
    out
}

pub fn save_dataset(dataset: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let names = dataset.case.feature_names();
    let features = columns_to_csv(&dataset.features, Some(&names));
    let labels = labels_to_text(&dataset.labels);
    let mut checksums = BTreeMap::new();
    checksums.insert("features.csv".to_string(), sha256_hex(&features));
    checksums.insert("labels.csv".to_string(), sha256_hex(&labels));
    std::fs::write(dir.join("features.csv"), &features)?;
    std::fs::write(dir.join("labels.csv"), &labels)?;
    if let Some(m) = &dataset.magnitudes {
        let text = columns_to_csv(m, None);
        checksums.insert("magnitudes.csv".to_string(), sha256_hex(&text));
        std::fs::write(dir.join("magnitudes.csv"), &text)?;
    }
    let meta = Meta {
        case: dataset.case,
        seed: dataset.seed,
        nx: dataset.nx,
        ny: dataset.ny,
        n_features: dataset.features.nrows(),
        n_examples: dataset.n_examples(),
        n_cells: dataset.n_cells(),
        feature_names: names,
        records: dataset.records.clone(),
        has_magnitudes: dataset.magnitudes.is_some(),
        checksums,
    };
    std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

fn read_checked(dir: &Path, name: &str, meta: &Meta) -> Result<String> {
    let text =
        std::fs::read_to_string(dir.join(name)).map_err(|e| Error::Format(format!("cannot read {name}: {e}")))?;
    match meta.checksums.get(name) {
        Some(sum) if *sum == sha256_hex(&text) => Ok(text),
        Some(_) => Err(Error::Format(format!("{name} does not match its recorded checksum"))),
        None => Err(Error::Format(format!("meta.json has no checksum for {name}"))),
    }
}

fn parse_matrix(text: &str, rows: usize, cols: usize, skip_header: bool, name: &str) -> Result<Array2<f64>> {
    let lines: Vec<&str> = text.lines().skip(usize::from(skip_header)).filter(|l| !l.is_empty()).collect();
    if lines.len() != cols {
        return Err(Error::Format(format!("{name}: expected {cols} rows, found {}", lines.len())));
    }
    let mut m = Array2::zeros((rows, cols));
    for (c, line) in lines.iter().enumerate() {
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Format(format!("{name} row {}: {e}", c + 1))))
            .collect::<Result<_>>()?;
        if vals.len() != rows {
            return Err(Error::Format(format!("{name} row {}: expected {rows} values, found {}", c + 1, vals.len())));
        }
        for (r, v) in vals.into_iter().enumerate() {
            m[[r, c]] = v;
        }
    }
    Ok(m)
}

/// Parses one example per line into a `rows × s` matrix.
pub fn columns_from_csv(text: &str, rows: usize, skip_header: bool, name: &str) -> Result<Array2<f64>> {
    let cols = text.lines().skip(usize::from(skip_header)).filter(|l| !l.is_empty()).count();
    parse_matrix(text, rows, cols, skip_header, name)
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let meta_text = std::fs::read_to_string(dir.join("meta.json"))
        .map_err(|e| Error::Format(format!("cannot read meta.json: {e}")))?;
    let meta: Meta = serde_json::from_str(&meta_text).map_err(|e| Error::Format(format!("meta.json: {e}")))?;
    if meta.n_cells != meta.nx * meta.ny || meta.n_features != meta.case.n_features() {
        return Err(Error::Format("meta.json dimensions are inconsistent".into()));
    }
    if meta.records.len() != meta.n_examples {
        return Err(Error::Format("meta.json record count differs from example count".into()));
    }
    let s = meta.n_examples;

    let features = parse_matrix(&read_checked(dir, "features.csv", &meta)?, meta.n_features, s, true, "features.csv")?;

    let label_text = read_checked(dir, "labels.csv", &meta)?;
    let lines: Vec<&str> = label_text.lines().filter(|l| !l.is_empty()).collect();
    if lines.len() != s {
        return Err(Error::Format(format!("labels.csv: expected {s} rows, found {}", lines.len())));
    }
    let mut labels = Array2::zeros((meta.n_cells, s));
    for (c, line) in lines.iter().enumerate() {
        if line.len() != meta.n_cells {
            return Err(Error::Format(format!(
                "labels.csv row {}: expected {} labels, found {}",
                c + 1,
                meta.n_cells,
                line.len()
            )));
        }
        for (r, ch) in line.bytes().enumerate() {
            labels[[r, c]] = match ch {
                b'0' => 0,
                b'1' => 1,
                other => {
                    return Err(Error::Format(format!("labels.csv row {}: invalid label {:?}", c + 1, other as char)))
                }
            };
        }
    }
    let magnitudes = if meta.has_magnitudes {
        Some(parse_matrix(&read_checked(dir, "magnitudes.csv", &meta)?, meta.n_cells, s, false, "magnitudes.csv")?)
    } else {
        None
    };
    Ok(Dataset {
        case: meta.case,
        seed: meta.seed,
        nx: meta.nx,
        ny: meta.ny,
        features,
        labels,
        records: meta.records,
        magnitudes,
    })
}

/// Seeded RNG used across the pipeline.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
