//! Dense feed-forward binary multi-label classifier trained by full-batch
//! gradient descent on the mean cross-entropy.
//!
//! Matrices are column-per-example: inputs are `n0 × s`, outputs `k × s`.

use std::cmp::Ordering;
use std::path::Path;

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::datagen::rng_from_seed;
use crate::error::{Error, Result};

const PROB_CLIP: f64 = 1e-12;
const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layer_sizes: Vec<usize>,
}

impl NetworkSpec {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        let spec = Self { layer_sizes };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 || self.layer_sizes.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {:?}", self.layer_sizes)));
        }
        Ok(())
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn n_parameters(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `n_l × n_{l-1}`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParameters {
    pub layers: Vec<Layer>,
}

impl NetworkParameters {
    pub fn spec(&self) -> NetworkSpec {
        let mut sizes = vec![self.layers[0].w.ncols()];
        sizes.extend(self.layers.iter().map(|l| l.w.nrows()));
        NetworkSpec { layer_sizes: sizes }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }
}

/// He-normal hidden weights, LeCun-normal output weights, zero biases.
pub fn init_parameters(spec: &NetworkSpec, rng: &mut impl Rng) -> Result<NetworkParameters> {
    spec.validate()?;
    let n_layers = spec.layer_sizes.len() - 1;
    let layers = spec
        .layer_sizes
        .windows(2)
        .enumerate()
        .map(|(l, w)| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let gain = if l + 1 == n_layers { 1.0 } else { 2.0 };
            let normal = Normal::new(0.0, (gain / fan_in as f64).sqrt()).expect("positive std");
            Layer {
                w: Array2::from_shape_simple_fn((fan_out, fan_in), || normal.sample(rng)),
                b: Array1::zeros(fan_out),
            }
        })
        .collect();
    Ok(NetworkParameters { layers })
}

pub fn relu(z: &Array2<f64>) -> Array2<f64> {
    z.mapv(|v| v.max(0.0))
}

pub fn sigmoid_scalar(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(z: &Array2<f64>) -> Array2<f64> {
    z.mapv(sigmoid_scalar)
}

/// Pre-activations and activations; `a[0]` is the input.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub z: Vec<Array2<f64>>,
    pub a: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.a.last().unwrap()
    }
}

pub fn forward(params: &NetworkParameters, x: &Array2<f64>) -> Result<ForwardCache> {
    let n0 = params.layers[0].w.ncols();
    if x.nrows() != n0 {
        return Err(Error::Shape(format!("input has {} rows, network expects {n0}", x.nrows())));
    }
    let last = params.layers.len() - 1;
    let mut z = Vec::with_capacity(params.layers.len());
    let mut a = vec![x.clone()];
    for (l, layer) in params.layers.iter().enumerate() {
        let zl = layer.w.dot(a.last().unwrap()) + layer.b.view().insert_axis(Axis(1));
        let al = if l == last { sigmoid(&zl) } else { relu(&zl) };
        z.push(zl);
        a.push(al);
    }
    Ok(ForwardCache { z, a })
}

/// Mean binary cross-entropy over all `k × s` entries, probabilities clipped to `[1e-12, 1-1e-12]`.
pub fn cross_entropy(a: &Array2<f64>, y: &Array2<f64>) -> Result<f64> {
    if a.dim() != y.dim() {
        return Err(Error::Shape(format!("prediction {:?} vs target {:?}", a.dim(), y.dim())));
    }
    let total: f64 = Zip::from(a).and(y).fold(0.0, |acc, &a, &y| {
        let a = a.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
        acc + y * a.ln() + (1.0 - y) * (1.0 - a).ln()
    });
    Ok(-total / a.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub dw: Vec<Array2<f64>>,
    pub db: Vec<Array1<f64>>,
}

pub fn backward(params: &NetworkParameters, cache: &ForwardCache, y: &Array2<f64>) -> Result<Gradients> {
    let n = params.layers.len();
    if cache.a.len() != n + 1 || cache.z.len() != n {
        return Err(Error::Shape("forward cache does not match the network".into()));
    }
    let out = cache.output();
    if out.dim() != y.dim() {
        return Err(Error::Shape(format!("cached output {:?} vs target {:?}", out.dim(), y.dim())));
    }
    for (layer, z) in params.layers.iter().zip(&cache.z) {
        if z.nrows() != layer.w.nrows() {
            return Err(Error::Shape("forward cache is stale".into()));
        }
    }
    let mut dz = (out - y) / out.len() as f64;
    let mut dw = vec![Array2::zeros((0, 0)); n];
    let mut db = vec![Array1::zeros(0); n];
    for l in (0..n).rev() {
        dw[l] = dz.dot(&cache.a[l].t());
        db[l] = dz.sum_axis(Axis(1));
        if l > 0 {
            let mut da = params.layers[l].w.t().dot(&dz);
            Zip::from(&mut da).and(&cache.z[l - 1]).for_each(|d, &z| {
                if z <= 0.0 {
                    *d = 0.0;
                }
            });
            dz = da;
        }
    }
    Ok(Gradients { dw, db })
}

pub fn gd_step(params: &mut NetworkParameters, grads: &Gradients, learning_rate: f64) -> Result<()> {
    if grads.dw.len() != params.layers.len() {
        return Err(Error::Shape("gradient count differs from layer count".into()));
    }
    for ((layer, dw), db) in params.layers.iter_mut().zip(&grads.dw).zip(&grads.db) {
        if layer.w.dim() != dw.dim() || layer.b.dim() != db.dim() {
            return Err(Error::Shape("gradient shape differs from parameter shape".into()));
        }
        layer.w.scaled_add(-learning_rate, dw);
        layer.b.scaled_add(-learning_rate, db);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub patience: usize,
    pub improvement_threshold: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.01, max_iterations: 2500, patience: 15, improvement_threshold: 1e-8, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.improvement_threshold > 0.0)
            || self.max_iterations == 0
            || self.patience == 0
        {
            return Err(Error::Config(format!("invalid training configuration {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxIterations,
    /// The best training cost did not improve for `patience` iterations.
    Patience,
    /// The best training cost improved by less than the threshold for `patience` iterations.
    Threshold,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: NetworkParameters,
    pub cost_history: Vec<f64>,
    pub val_cost_history: Vec<f64>,
    pub stop_reason: StopReason,
}

fn compare_columns(x: &Array2<f64>, y: &Array2<f64>, i: usize, j: usize) -> Ordering {
    x.column(i)
        .iter()
        .zip(x.column(j).iter())
        .chain(y.column(i).iter().zip(y.column(j).iter()))
        .map(|(a, b)| a.total_cmp(b))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Sorts examples so that full-batch sums do not depend on the caller's ordering.
fn canonical_order(x: &Array2<f64>, y: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let mut idx: Vec<usize> = (0..x.ncols()).collect();
    idx.sort_by(|&i, &j| compare_columns(x, y, i, j));
    (x.select(Axis(1), &idx), y.select(Axis(1), &idx))
}

/// Full-batch gradient descent with early stopping; returns the last iterate.
pub fn train(
    spec: &NetworkSpec,
    x: &Array2<f64>,
    y: &Array2<f64>,
    cfg: &TrainConfig,
    validation: Option<(&Array2<f64>, &Array2<f64>)>,
) -> Result<TrainOutcome> {
    spec.validate()?;
    cfg.validate()?;
    if x.nrows() != spec.n_inputs() || y.nrows() != spec.n_outputs() || x.ncols() != y.ncols() {
        return Err(Error::Shape(format!(
            "training data {:?}/{:?} does not fit layers {:?}",
            x.dim(),
            y.dim(),
            spec.layer_sizes
        )));
    }
    if x.ncols() == 0 {
        return Err(Error::Shape("empty training set".into()));
    }
    let (x, y) = canonical_order(x, y);
    let validation = validation.map(|(vx, vy)| canonical_order(vx, vy));
    let mut params = init_parameters(spec, &mut rng_from_seed(cfg.seed))?;

    let mut cost_history = Vec::new();
    let mut val_cost_history = Vec::new();
    let mut best = f64::INFINITY;
    let mut no_best = 0;
    let mut stalled = 0;
    let mut stop_reason = StopReason::MaxIterations;
    for it in 0..cfg.max_iterations {
        let cache = forward(&params, &x)?;
        let cost = cross_entropy(cache.output(), &y)?;
        if !cost.is_finite() || !params.is_finite() {
            return Err(Error::Divergence(format!(
                "training cost became non-finite at iteration {it} with learning rate {}",
                cfg.learning_rate
            )));
        }
        cost_history.push(cost);
        if let Some((vx, vy)) = &validation {
            val_cost_history.push(cross_entropy(forward(&params, vx)?.output(), vy)?);
        }

        no_best = if cost < best { 0 } else { no_best + 1 };
        stalled = if cost > best - cfg.improvement_threshold { stalled + 1 } else { 0 };
        best = best.min(cost);
        if no_best >= cfg.patience {
            stop_reason = StopReason::Patience;
            break;
        }
        if stalled >= cfg.patience {
            stop_reason = StopReason::Threshold;
            break;
        }

        let grads = backward(&params, &cache, &y)?;
        gd_step(&mut params, &grads, cfg.learning_rate)?;
    }
    Ok(TrainOutcome { params, cost_history, val_cost_history, stop_reason })
}

/// Per-feature standardization with training-set statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn fit_normalizer(x: &Array2<f64>) -> Result<Normalizer> {
    if x.ncols() < 2 {
        return Err(Error::Shape(format!("need at least 2 examples to normalize, got {}", x.ncols())));
    }
    let s = x.ncols() as f64;
    let (mut mean, mut std) = (Vec::new(), Vec::new());
    for row in x.rows() {
        let first = row[0];
        if row.iter().all(|&v| v == first) {
            mean.push(first);
            std.push(STD_FLOOR);
            continue;
        }
        let m = row.sum() / s;
        let var = row.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / s;
        mean.push(m);
        std.push(var.sqrt().max(STD_FLOOR));
    }
    Ok(Normalizer { mean, std })
}

pub fn apply_normalizer(norm: &Normalizer, x: &Array2<f64>) -> Result<Array2<f64>> {
    if x.nrows() != norm.mean.len() {
        return Err(Error::Shape(format!("input has {} features, normalizer {}", x.nrows(), norm.mean.len())));
    }
    let mut out = x.clone();
    for (r, mut row) in out.rows_mut().into_iter().enumerate() {
        let (m, s) = (norm.mean[r], norm.std[r]);
        row.mapv_inplace(|v| (v - m) / s);
    }
    Ok(out)
}

pub fn predict_proba(params: &NetworkParameters, norm: &Normalizer, x: &Array2<f64>) -> Result<Array2<f64>> {
    let xn = apply_normalizer(norm, x)?;
    Ok(forward(params, &xn)?.a.pop().unwrap())
}

/// 1 (GF) where the probability reaches the threshold.
pub fn predict_labels(proba: &Array2<f64>, threshold: f64) -> Result<Array2<u8>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Domain(format!("threshold must lie in (0,1), got {threshold}")));
    }
    Ok(proba.mapv(|p| u8::from(p >= threshold)))
}

/// A trained network with the statistics needed to apply it.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub params: NetworkParameters,
    pub normalizer: Normalizer,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    layer_sizes: Vec<usize>,
    seed: u64,
    normalizer: Normalizer,
    weights: Vec<[String; 2]>,
}

fn write_blob(path: &Path, values: impl Iterator<Item = f64>) -> Result<()> {
    let bytes: Vec<u8> = values.flat_map(f64::to_le_bytes).collect();
    std::fs::write(path, bytes)?;
    Ok(())
}

fn read_blob(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path).map_err(|e| Error::Format(format!("cannot read {}: {e}", path.display())))?;
    if bytes.len() != 8 * expected {
        return Err(Error::Format(format!(
            "{} holds {} bytes, expected {}",
            path.display(),
            bytes.len(),
            8 * expected
        )));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

impl Model {
    pub fn predict_proba(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        predict_proba(&self.params, &self.normalizer, x)
    }

    /// `model.json` plus one little-endian f64 blob per weight matrix and bias vector.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut weights = Vec::new();
        for (l, layer) in self.params.layers.iter().enumerate() {
            let (wname, bname) = (format!("layer{}_w.bin", l + 1), format!("layer{}_b.bin", l + 1));
            write_blob(&dir.join(&wname), layer.w.iter().copied())?;
            write_blob(&dir.join(&bname), layer.b.iter().copied())?;
            weights.push([wname, bname]);
        }
        let manifest = Manifest {
            layer_sizes: self.params.spec().layer_sizes,
            seed: self.seed,
            normalizer: self.normalizer.clone(),
            weights,
        };
        std::fs::write(dir.join("model.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let text = std::fs::read_to_string(dir.join("model.json"))
            .map_err(|e| Error::Format(format!("cannot read model.json: {e}")))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Format(format!("model.json: {e}")))?;
        let spec = NetworkSpec::new(manifest.layer_sizes).map_err(|e| Error::Format(e.to_string()))?;
        if manifest.weights.len() != spec.layer_sizes.len() - 1 || manifest.normalizer.mean.len() != spec.n_inputs() {
            return Err(Error::Format("model.json is inconsistent with its layer sizes".into()));
        }
        let layers = spec
            .layer_sizes
            .windows(2)
            .zip(&manifest.weights)
            .map(|(w, [wname, bname])| {
                let wv = read_blob(&dir.join(wname), w[0] * w[1])?;
                let bv = read_blob(&dir.join(bname), w[1])?;
                Ok(Layer {
                    w: Array2::from_shape_vec((w[1], w[0]), wv).map_err(|e| Error::Format(e.to_string()))?,
                    b: Array1::from(bv),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { params: NetworkParameters { layers }, normalizer: manifest.normalizer, seed: manifest.seed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;

    fn single_identity() -> NetworkParameters {
        NetworkParameters {
            layers: vec![
                Layer { w: Array2::eye(2), b: Array1::zeros(2) },
                Layer { w: Array2::eye(2), b: Array1::zeros(2) },
            ],
        }
    }

    #[test]
    fn init_rules() {
        let spec = NetworkSpec::new(vec![100, 200, 3]).unwrap();
        let p = init_parameters(&spec, &mut rng_from_seed(4)).unwrap();
        assert!(p.layers.iter().all(|l| l.b.iter().all(|b| *b == 0.0)));
        assert_eq!(p, init_parameters(&spec, &mut rng_from_seed(4)).unwrap());
        let w = &p.layers[0].w;
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        assert!((var / (2.0 / 100.0) - 1.0).abs() < 0.1);
        assert!(NetworkSpec::new(vec![3]).is_err());
        assert!(NetworkSpec::new(vec![3, 0, 1]).is_err());
    }

    #[test]
    fn activations() {
        assert_eq!(relu(&array![[-3.0, 2.5, 0.0]]), array![[0.0, 2.5, 0.0]]);
        assert_eq!(sigmoid_scalar(0.0), 0.5);
        assert!((sigmoid_scalar(40.0) - 1.0).abs() <= 1e-15);
        for z in [-30.0, -2.0, 0.3, 7.0] {
            assert!((sigmoid_scalar(-z) - (1.0 - sigmoid_scalar(z))).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_examples() {
        let p = single_identity();
        let c = forward(&p, &array![[-1.0], [2.0]]).unwrap();
        assert_eq!(c.a[1], array![[0.0], [2.0]]);

        let spec = NetworkSpec::new(vec![3, 4, 2]).unwrap();
        let mut p = init_parameters(&spec, &mut rng_from_seed(1)).unwrap();
        let out = forward(&p, &Array2::zeros((3, 1))).unwrap();
        assert!(out.output().iter().all(|v| *v == 0.5));
        p.layers[0].b.fill(0.3);
        let x = array![[1.0, 1.0], [-2.0, -2.0], [0.5, 0.5]];
        let o = forward(&p, &x).unwrap();
        assert_eq!(o.output().column(0), o.output().column(1));
        assert!(matches!(forward(&p, &Array2::zeros((2, 1))), Err(Error::Shape(_))));
    }

    #[test]
    fn cost_examples() {
        assert!(
            (cross_entropy(
                &Array2::from_elem((4, 3), 0.5),
                &array![[1.0, 0.0, 1.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0], [0.0, 0.0, 0.0]]
            )
            .unwrap()
                - 2f64.ln())
            .abs()
                < 1e-12
        );
        let y = array![[1.0, 0.0], [0.0, 1.0]];
        assert!(cross_entropy(&y, &y).unwrap() <= 1e-11);
        let e = (-1.0f64).exp();
        assert!((cross_entropy(&array![[e]], &array![[1.0]]).unwrap() - 1.0).abs() < 1e-15);
        assert!(cross_entropy(&y, &array![[1.0]]).is_err());
    }

    #[test]
    fn gradient_zero_at_perfect_fit() {
        let spec = NetworkSpec::new(vec![2, 3, 2]).unwrap();
        let p = init_parameters(&spec, &mut rng_from_seed(2)).unwrap();
        let x = array![[0.2, -1.0], [1.5, 0.3]];
        let cache = forward(&p, &x).unwrap();
        let y = cache.output().clone();
        let g = backward(&p, &cache, &y).unwrap();
        assert!(g.dw.iter().flat_map(|d| d.iter()).chain(g.db.iter().flat_map(|d| d.iter())).all(|v| v.abs() <= 1e-11));
    }

    fn loss(p: &NetworkParameters, x: &Array2<f64>, y: &Array2<f64>) -> f64 {
        cross_entropy(forward(p, x).unwrap().output(), y).unwrap()
    }

    /// Max relative error between backprop and central differences.
    pub(crate) fn gradient_check(spec: &NetworkSpec, seed: u64, batch: usize) -> f64 {
        let mut rng = rng_from_seed(seed);
        let mut p = init_parameters(spec, &mut rng).unwrap();
        for l in &mut p.layers {
            l.b.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
        let x = Array2::from_shape_simple_fn((spec.n_inputs(), batch), || rng.random_range(-2.0..2.0));
        let y = Array2::from_shape_simple_fn((spec.n_outputs(), batch), || f64::from(rng.random_bool(0.4)));
        let g = backward(&p, &forward(&p, &x).unwrap(), &y).unwrap();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for l in 0..p.layers.len() {
            for idx in 0..p.layers[l].w.len() {
                let (r, c) = (idx / p.layers[l].w.ncols(), idx % p.layers[l].w.ncols());
                let orig = p.layers[l].w[[r, c]];
                p.layers[l].w[[r, c]] = orig + h;
                let up = loss(&p, &x, &y);
                p.layers[l].w[[r, c]] = orig - h;
                let down = loss(&p, &x, &y);
                p.layers[l].w[[r, c]] = orig;
                let fd = (up - down) / (2.0 * h);
                worst = worst.max((fd - g.dw[l][[r, c]]).abs() / fd.abs().max(g.dw[l][[r, c]].abs()).max(1e-7));
            }
            for r in 0..p.layers[l].b.len() {
                let orig = p.layers[l].b[r];
                p.layers[l].b[r] = orig + h;
                let up = loss(&p, &x, &y);
                p.layers[l].b[r] = orig - h;
                let down = loss(&p, &x, &y);
                p.layers[l].b[r] = orig;
                let fd = (up - down) / (2.0 * h);
                worst = worst.max((fd - g.db[l][r]).abs() / fd.abs().max(g.db[l][r].abs()).max(1e-7));
            }
        }
        worst
    }

    #[test]
    fn finite_difference_small_network() {
        let spec = NetworkSpec::new(vec![3, 5, 4]).unwrap();
        assert!(gradient_check(&spec, 7, 6) <= 1e-5);
    }

    #[test]
    fn duplicated_batch_keeps_gradient() {
        let spec = NetworkSpec::new(vec![2, 4, 3]).unwrap();
        let p = init_parameters(&spec, &mut rng_from_seed(8)).unwrap();
        let x = array![[0.1, 1.0, -0.7], [2.0, -0.3, 0.4]];
        let y = array![[1.0, 0.0, 1.0], [0.0, 0.0, 1.0], [1.0, 1.0, 0.0]];
        let g1 = backward(&p, &forward(&p, &x).unwrap(), &y).unwrap();
        let x2 = ndarray::concatenate![Axis(1), x, x];
        let y2 = ndarray::concatenate![Axis(1), y, y];
        let g2 = backward(&p, &forward(&p, &x2).unwrap(), &y2).unwrap();
        for (a, b) in g1.dw.iter().zip(&g2.dw) {
            assert!(a.iter().zip(b).all(|(u, v)| (u - v).abs() <= 1e-15));
        }
    }

    #[test]
    fn gd_step_examples() {
        let mut p = NetworkParameters { layers: vec![Layer { w: array![[1.0]], b: array![1.0] }] };
        let g = Gradients { dw: vec![array![[2.0]]], db: vec![array![0.0]] };
        gd_step(&mut p, &g, 0.1).unwrap();
        assert!((p.layers[0].w[[0, 0]] - 0.8).abs() < 1e-15);
        assert_eq!(p.layers[0].b[0], 1.0);
        let before = p.clone();
        gd_step(&mut p, &g, 0.0).unwrap();
        assert_eq!(p, before);
    }

    fn separable(n: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
        let mut rng = rng_from_seed(seed);
        let x = Array2::from_shape_simple_fn((2, n), || rng.random_range(-1.0..1.0));
        let y = Array2::from_shape_fn((1, n), |(_, c)| f64::from(x[[0, c]] + 0.5 * x[[1, c]] > 0.0));
        (x, y)
    }

    #[test]
    fn learns_separable_toy_set() {
        let (x, y) = separable(200, 3);
        let spec = NetworkSpec::new(vec![2, 16, 1]).unwrap();
        let out =
            train(&spec, &x, &y, &TrainConfig { learning_rate: 0.1, max_iterations: 2500, ..Default::default() }, None)
                .unwrap();
        assert!(*out.cost_history.last().unwrap() < 0.05);
        assert!(out.cost_history.len() <= 2500 && out.cost_history.iter().all(|c| c.is_finite()));
    }

    #[test]
    fn small_step_rarely_increases_cost() {
        let mut rng = rng_from_seed(31);
        let mut increases = 0;
        for trial in 0..100 {
            let spec = NetworkSpec::new(vec![4, 6, 5, 3]).unwrap();
            let mut p = init_parameters(&spec, &mut rng_from_seed(trial)).unwrap();
            let x = Array2::from_shape_simple_fn((4, 8), || rng.random_range(-2.0..2.0));
            let y = Array2::from_shape_simple_fn((3, 8), || f64::from(rng.random_bool(0.3)));
            let before = loss(&p, &x, &y);
            let g = backward(&p, &forward(&p, &x).unwrap(), &y).unwrap();
            gd_step(&mut p, &g, 1e-3).unwrap();
            if loss(&p, &x, &y) > before + 1e-9 {
                increases += 1;
            }
        }
        assert!(increases <= 5);
    }

    #[test]
    fn permutation_gives_identical_training() {
        let (x, y) = separable(60, 5);
        let mut idx: Vec<usize> = (0..60).collect();
        idx.reverse();
        idx.swap(3, 40);
        let (xp, yp) = (x.select(Axis(1), &idx), y.select(Axis(1), &idx));
        let spec = NetworkSpec::new(vec![2, 8, 1]).unwrap();
        let cfg = TrainConfig { learning_rate: 0.05, max_iterations: 200, ..Default::default() };
        let a = train(&spec, &x, &y, &cfg, None).unwrap();
        let b = train(&spec, &xp, &yp, &cfg, None).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.cost_history, b.cost_history);
    }

    #[test]
    fn stop_rules() {
        let (x, y) = separable(50, 9);
        let spec = NetworkSpec::new(vec![2, 4, 1]).unwrap();
        // a huge threshold makes every step after the first a stall
        let cfg = TrainConfig { learning_rate: 1e-3, improvement_threshold: 1.0, ..Default::default() };
        let out = train(&spec, &x, &y, &cfg, Some((&x, &y))).unwrap();
        assert_eq!(out.stop_reason, StopReason::Threshold);
        assert_eq!(out.cost_history.len(), 16);
        assert_eq!(out.val_cost_history.len(), 16);
        // a step far too large overshoots and never returns to the first cost
        let cfg = TrainConfig { learning_rate: 1e4, ..Default::default() };
        match train(&spec, &x, &y, &cfg, None) {
            Ok(out) => assert_eq!(out.stop_reason, StopReason::Patience),
            Err(e) => assert!(matches!(e, Error::Divergence(_))),
        }
    }

    #[test]
    fn normalizer_rules() {
        let x = array![[1.0, 2.0, 3.0, 6.0], [0.95, 0.95, 0.95, 0.95]];
        let n = fit_normalizer(&x).unwrap();
        let xn = apply_normalizer(&n, &x).unwrap();
        assert!(xn.row(1).iter().all(|v| *v == 0.0));
        let mean = xn.row(0).sum() / 4.0;
        let var = xn.row(0).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-10 && (var.sqrt() - 1.0).abs() < 1e-10);
        let test = array![[3.0], [0.95]];
        assert_eq!(apply_normalizer(&n, &test).unwrap()[[0, 0]], (3.0 - 3.0) / n.std[0]);
        assert!(fit_normalizer(&array![[1.0]]).is_err());
    }

    #[test]
    fn thresholding() {
        let p = array![[0.5, 0.74, 0.75, 0.1]];
        assert_eq!(predict_labels(&p, 0.5).unwrap(), array![[1, 1, 1, 0]]);
        assert_eq!(predict_labels(&p, 0.75).unwrap(), array![[0, 0, 1, 0]]);
        assert!(predict_labels(&p, 1.0).is_err());
    }

    #[test]
    fn model_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = NetworkSpec::new(vec![3, 5, 2]).unwrap();
        let model = Model {
            params: init_parameters(&spec, &mut rng_from_seed(12)).unwrap(),
            normalizer: Normalizer { mean: vec![0.1, 0.2, 1.0 / 3.0], std: vec![1.0, 2.0, 1e-12] },
            seed: 12,
        };
        model.save(dir.path()).unwrap();
        assert_eq!(Model::load(dir.path()).unwrap(), model);
        std::fs::write(dir.path().join("layer1_b.bin"), [0u8; 3]).unwrap();
        assert!(matches!(Model::load(dir.path()), Err(Error::Format(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn backprop_matches_finite_differences(seed in any::<u64>(), h1 in 1usize..6, h2 in 1usize..5, out in 1usize..4) {
            let spec = NetworkSpec::new(vec![3, h1, h2, out]).unwrap();
            prop_assert!(gradient_check(&spec, seed, 5) <= 1e-5);
        }

        #[test]
        fn higher_threshold_shrinks_positive_set(vals in proptest::collection::vec(0.0f64..1.0, 1..50), t1 in 0.01f64..0.99, dt in 0.0f64..0.5) {
            let p = Array2::from_shape_vec((1, vals.len()), vals).unwrap();
            let t2 = (t1 + dt).min(0.99);
            let a = predict_labels(&p, t1).unwrap();
            let b = predict_labels(&p, t2).unwrap();
            prop_assert!(a.iter().zip(b.iter()).all(|(x, y)| *y <= *x));
        }
    }
}
