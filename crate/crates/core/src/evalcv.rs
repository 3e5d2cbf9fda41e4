//! Classification metrics, ROC and precision-recall curves, κ-fold
//! cross-validation and model selection.
//!
//! All metrics are micro-averaged: every cell of every example counts once,
//! with 1 (GF) as the positive class.

use std::fmt::Write as _;
use std::time::Instant;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{rng_from_seed, Dataset};
use crate::error::{Error, Result};
use crate::neural::{apply_normalizer, fit_normalizer, predict_labels, train, NetworkSpec, TrainConfig};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.fp + self.tn
    }

    /// Rows are truth (GF, Darcy), columns are prediction (GF, Darcy).
    pub fn to_csv_string(&self) -> String {
        format!(",pred_gf,pred_darcy\ntrue_gf,{},{}\ntrue_darcy,{},{}\n", self.tp, self.fn_, self.fp, self.tn)
    }
}

fn check_shapes<A, B>(pred: &Array2<A>, truth: &Array2<B>) -> Result<()> {
    if pred.dim() != truth.dim() {
        return Err(Error::Shape(format!("prediction {:?} vs truth {:?}", pred.dim(), truth.dim())));
    }
    Ok(())
}

pub fn confusion(pred: &Array2<u8>, truth: &Array2<u8>) -> Result<ConfusionCounts> {
    check_shapes(pred, truth)?;
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.iter().zip(truth.iter()) {
        match (p != 0, t != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// `(precision, recall)`; an empty denominator means `tp = 0` and scores 1.
pub fn precision_recall(c: &ConfusionCounts) -> (f64, f64) {
    let ratio = |num: u64, den: u64| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    (ratio(c.tp, c.tp + c.fp), ratio(c.tp, c.tp + c.fn_))
}

pub fn error_rate(c: &ConfusionCounts) -> Result<f64> {
    if c.total() == 0 {
        return Err(Error::Domain("error rate of an empty set".into()));
    }
    Ok((c.fp + c.fn_) as f64 / c.total() as f64)
}

/// False-positive rate; 0 when the truth has no negatives.
pub fn fall_out(c: &ConfusionCounts) -> Result<f64> {
    if c.total() == 0 {
        return Err(Error::Domain("fall-out of an empty set".into()));
    }
    Ok(if c.negatives() == 0 { 0.0 } else { c.fp as f64 / c.negatives() as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

fn check_scores(scores: &[f64], truth: &[u8]) -> Result<()> {
    if scores.len() != truth.len() {
        return Err(Error::Shape(format!("{} scores vs {} labels", scores.len(), truth.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Domain("scores contain NaN".into()));
    }
    Ok(())
}

/// Cumulative counts after admitting each distinct score, highest first.
/// The first entry is the empty prediction at threshold `+∞`.
fn sweep(scores: &[f64], truth: &[u8]) -> Vec<(f64, ConfusionCounts)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let pos = truth.iter().filter(|&&t| t != 0).count() as u64;
    let neg = truth.len() as u64 - pos;
    let mut c = ConfusionCounts { tp: 0, fp: 0, tn: neg, fn_: pos };
    let mut out = vec![(f64::INFINITY, c)];
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if truth[order[i]] != 0 {
                c.tp += 1;
                c.fn_ -= 1;
            } else {
                c.fp += 1;
                c.tn -= 1;
            }
            i += 1;
        }
        out.push((s, c));
    }
    out
}

/// ROC points from `(0,0)` to `(1,1)` with the trapezoidal area.
pub fn roc_curve(scores: &[f64], truth: &[u8]) -> Result<RocCurve> {
    check_scores(scores, truth)?;
    let pos = truth.iter().filter(|&&t| t != 0).count();
    if pos == 0 || pos == truth.len() {
        return Err(Error::Degenerate("ROC needs both positive and negative cells".into()));
    }
    let points: Vec<RocPoint> = sweep(scores, truth)
        .into_iter()
        .map(|(threshold, c)| RocPoint {
            threshold,
            fpr: c.fp as f64 / c.negatives() as f64,
            tpr: c.tp as f64 / c.positives() as f64,
        })
        .collect();
    let auc = points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum();
    Ok(RocCurve { points, auc })
}

pub fn pr_curve(scores: &[f64], truth: &[u8]) -> Result<Vec<PrPoint>> {
    check_scores(scores, truth)?;
    if !truth.iter().any(|&t| t != 0) {
        return Err(Error::Degenerate("precision-recall curve needs a positive cell".into()));
    }
    Ok(sweep(scores, truth)
        .into_iter()
        .map(|(threshold, c)| {
            let (precision, recall) = precision_recall(&c);
            PrPoint { threshold, recall, precision }
        })
        .collect())
}

/// The curve point that classifies exactly like `score >= threshold`.
pub fn pr_point_at(curve: &[PrPoint], threshold: f64) -> Option<PrPoint> {
    curve.iter().rev().find(|p| p.threshold >= threshold).copied()
}

pub fn roc_point_at(curve: &RocCurve, threshold: f64) -> Option<RocPoint> {
    curve.points.iter().rev().find(|p| p.threshold >= threshold).copied()
}

pub fn roc_to_csv(curve: &RocCurve) -> String {
    let mut s = String::from("fpr,tpr\n");
    for p in &curve.points {
        writeln!(s, "{},{}", p.fpr, p.tpr).unwrap();
    }
    s
}

pub fn pr_to_csv(curve: &[PrPoint]) -> String {
    let mut s = String::from("recall,precision\n");
    for p in curve {
        writeln!(s, "{},{}", p.recall, p.precision).unwrap();
    }
    s
}

/// Fraction of positive cells.
pub fn prevalence(labels: &[u8]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    labels.iter().filter(|&&l| l != 0).count() as f64 / labels.len() as f64
}

/// `(true prevalence, predicted prevalence)` per example column.
pub fn parity_pairs(pred: &Array2<u8>, truth: &Array2<u8>) -> Result<Vec<(f64, f64)>> {
    check_shapes(pred, truth)?;
    Ok(truth
        .axis_iter(Axis(1))
        .zip(pred.axis_iter(Axis(1)))
        .map(|(t, p)| (prevalence(&t.to_vec()), prevalence(&p.to_vec())))
        .collect())
}

pub fn parity_to_csv(pairs: &[(f64, f64)]) -> String {
    let mut s = String::from("true_prevalence,predicted_prevalence\n");
    for (t, p) in pairs {
        writeln!(s, "{t},{p}").unwrap();
    }
    s
}

/// Relative gap between validation and training cost.
pub fn pct_cost(c_train: f64, c_val: f64) -> Result<f64> {
    if !(c_train > 0.0) {
        return Err(Error::Domain(format!("training cost must be positive, got {c_train}")));
    }
    Ok((c_val - c_train).abs() / c_train)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
    pub error_rate: f64,
    pub accuracy: f64,
    pub fpr: f64,
    /// Absent when the truth holds a single class.
    pub auc: Option<f64>,
    pub counts: ConfusionCounts,
}

pub fn evaluate(proba: &Array2<f64>, truth: &Array2<u8>, threshold: f64) -> Result<MetricsReport> {
    check_shapes(proba, truth)?;
    let counts = confusion(&predict_labels(proba, threshold)?, truth)?;
    let (precision, recall) = precision_recall(&counts);
    let error_rate = error_rate(&counts)?;
    let scores: Vec<f64> = proba.iter().copied().collect();
    let flat: Vec<u8> = truth.iter().copied().collect();
    let auc = match roc_curve(&scores, &flat) {
        Ok(c) => Some(c.auc),
        Err(Error::Degenerate(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricsReport {
        threshold,
        recall,
        precision,
        error_rate,
        accuracy: 1.0 - error_rate,
        fpr: fall_out(&counts)?,
        auc,
        counts,
    })
}

/// Shuffled folds with sizes differing by at most one; split `i` validates on fold `i`.
pub fn kfold_split(s: usize, kappa: usize, rng: &mut impl Rng) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if kappa < 2 || s < kappa {
        return Err(Error::Split(format!("cannot make {kappa} folds from {s} examples")));
    }
    let mut idx: Vec<usize> = (0..s).collect();
    idx.shuffle(rng);
    let mut folds = Vec::with_capacity(kappa);
    let mut start = 0;
    for f in 0..kappa {
        let len = s / kappa + usize::from(f < s % kappa);
        folds.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok((0..kappa)
        .map(|f| {
            let train =
                folds.iter().enumerate().filter(|(g, _)| *g != f).flat_map(|(_, v)| v.iter().copied()).collect();
            (train, folds[f].clone())
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub kappa: usize,
    /// Learning rate is overridden per candidate.
    pub train: TrainConfig,
    pub threshold: f64,
    pub seed: u64,
    pub workers: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            kappa: 5,
            train: TrainConfig { improvement_threshold: 1e-6, ..Default::default() },
            threshold: 0.5,
            seed: 0,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub recall: f64,
    pub precision: f64,
    pub error_rate: f64,
    pub pct_cost: f64,
    pub iterations: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub layer_sizes: Vec<usize>,
    pub learning_rate: f64,
    /// `None` for folds whose training diverged.
    pub folds: Vec<Option<FoldResult>>,
    pub failed_folds: usize,
    /// Means over the completed folds; NaN when none completed.
    pub mean_recall: f64,
    pub mean_precision: f64,
    pub mean_error_rate: f64,
    pub mean_pct_cost: f64,
    /// Population variance of the fold recalls.
    pub recall_variance: f64,
    pub recall_std: f64,
    pub mean_iterations: f64,
    pub wall_time_s: f64,
}

impl CvResult {
    pub fn from_folds(layer_sizes: Vec<usize>, learning_rate: f64, folds: Vec<Option<FoldResult>>) -> Self {
        let done: Vec<&FoldResult> = folds.iter().flatten().collect();
        let n = done.len() as f64;
        // shifted by the first fold so that identical folds average exactly
        let mean = |f: &dyn Fn(&FoldResult) -> f64| match done.first() {
            Some(first) => f(first) + done.iter().map(|r| f(r) - f(first)).sum::<f64>() / n,
            None => f64::NAN,
        };
        let mean_recall = mean(&|r| r.recall);
        let recall_variance = mean(&|r| (r.recall - mean_recall).powi(2));
        Self {
            layer_sizes,
            learning_rate,
            failed_folds: folds.len() - done.len(),
            mean_recall,
            mean_precision: mean(&|r| r.precision),
            mean_error_rate: mean(&|r| r.error_rate),
            mean_pct_cost: mean(&|r| r.pct_cost),
            recall_variance,
            recall_std: recall_variance.sqrt(),
            mean_iterations: mean(&|r| r.iterations as f64),
            wall_time_s: done.iter().map(|r| r.seconds).sum(),
            folds,
        }
    }
}

fn run_fold(
    x: &Array2<f64>,
    y: &Array2<u8>,
    (train_idx, val_idx): &(Vec<usize>, Vec<usize>),
    spec: &NetworkSpec,
    train_cfg: &TrainConfig,
    threshold: f64,
) -> Result<Option<FoldResult>> {
    let start = Instant::now();
    let (xt, yt) = (x.select(Axis(1), train_idx), y.select(Axis(1), train_idx).mapv(f64::from));
    let (xv, yv) = (x.select(Axis(1), val_idx), y.select(Axis(1), val_idx));
    let norm = fit_normalizer(&xt)?;
    let (xt, xv) = (apply_normalizer(&norm, &xt)?, apply_normalizer(&norm, &xv)?);
    let yvf = yv.mapv(f64::from);
    let out = match train(spec, &xt, &yt, train_cfg, Some((&xv, &yvf))) {
        Ok(out) => out,
        Err(Error::Divergence(msg)) => {
            log::warn!("fold of {:?} at lr {} failed: {msg}", spec.layer_sizes, train_cfg.learning_rate);
            return Ok(None);
        }
        Err(e) => return Err(e),
    };
    let proba = crate::neural::forward(&out.params, &xv)?.a.pop().unwrap();
    let counts = confusion(&predict_labels(&proba, threshold)?, &yv)?;
    let (precision, recall) = precision_recall(&counts);
    Ok(Some(FoldResult {
        recall,
        precision,
        error_rate: error_rate(&counts)?,
        pct_cost: pct_cost(*out.cost_history.last().unwrap(), *out.val_cost_history.last().unwrap())?,
        iterations: out.cost_history.len(),
        seconds: start.elapsed().as_secs_f64(),
    }))
}

/// Trains every (spec, learning rate) candidate on the same κ folds.
pub fn cross_validate(
    dataset: &Dataset,
    specs: &[NetworkSpec],
    learning_rates: &[f64],
    cfg: &CvConfig,
) -> Result<Vec<CvResult>> {
    if specs.is_empty() || learning_rates.is_empty() {
        return Err(Error::Config("cross-validation needs at least one spec and one learning rate".into()));
    }
    let folds = kfold_split(dataset.n_examples(), cfg.kappa, &mut rng_from_seed(cfg.seed))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut results = Vec::new();
    for spec in specs {
        for &lr in learning_rates {
            let train_cfg = TrainConfig { learning_rate: lr, ..cfg.train };
            let fold_results = pool.install(|| {
                folds
                    .par_iter()
                    .map(|f| run_fold(&dataset.features, &dataset.labels, f, spec, &train_cfg, cfg.threshold))
                    .collect::<Result<Vec<_>>>()
            })?;
            results.push(CvResult::from_folds(spec.layer_sizes.clone(), lr, fold_results));
        }
    }
    Ok(results)
}

/// Highest mean recall; ties go to the lower error rate, then the shorter wall time.
pub fn select_best(results: &[CvResult]) -> Result<&CvResult> {
    results
        .iter()
        .filter(|r| r.mean_recall.is_finite())
        .max_by(|a, b| {
            a.mean_recall
                .total_cmp(&b.mean_recall)
                .then(b.mean_error_rate.total_cmp(&a.mean_error_rate))
                .then(b.wall_time_s.total_cmp(&a.wall_time_s))
        })
        .ok_or_else(|| Error::Config("no completed cross-validation candidate".into()))
}
