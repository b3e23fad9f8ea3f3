//! Monte Carlo estimates of the expected loss of a design.
//!
//! Every estimator draws the same number of rows from each model and weights
//! the per-model averages by the prior model probabilities.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{grow_tree, train_forest, ForestConfig, TreeConfig};
use crate::dataset::LabeledDataset;
use crate::design::{Design, PriorModelProbabilities};
use crate::error::{Error, Result};
use crate::models::{generate_labeled_set, ModelFamily, SizeSpec};
use crate::rng::RngStream;
use crate::scalar::{argmax, Scalar};

/// Floor applied to probabilities before taking logs.
pub const PROB_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossKind {
    #[serde(rename = "01")]
    ZeroOne,
    #[serde(rename = "mdl")]
    Deviance,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::ZeroOne => "01",
            LossKind::Deviance => "mdl",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "01" | "zero-one" => Ok(LossKind::ZeroOne),
            "mdl" | "deviance" => Ok(LossKind::Deviance),
            _ => Err(Error::Config(format!("unknown loss '{s}' (expected 01 or mdl)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorMethod {
    TreeTrain,
    TreeTest,
    RfOob,
    RfTrain,
    #[serde(rename = "bayes")]
    BayesOracle,
    Abc,
}

impl fmt::Display for EstimatorMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorMethod::TreeTrain => "tree-train",
            EstimatorMethod::TreeTest => "tree-test",
            EstimatorMethod::RfOob => "rf-oob",
            EstimatorMethod::RfTrain => "rf-train",
            EstimatorMethod::BayesOracle => "bayes",
            EstimatorMethod::Abc => "abc",
        })
    }
}

impl FromStr for EstimatorMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "tree-train" => EstimatorMethod::TreeTrain,
            "tree-test" => EstimatorMethod::TreeTest,
            "rf-oob" => EstimatorMethod::RfOob,
            "rf-train" => EstimatorMethod::RfTrain,
            "bayes" | "bayes-oracle" => EstimatorMethod::BayesOracle,
            "abc" => EstimatorMethod::Abc,
            _ => return Err(Error::Config(format!("unknown method '{s}'"))),
        })
    }
}

impl EstimatorMethod {
    /// Held-out predictions put exact zeros on the true model with positive
    /// probability, so deviance is only estimable on the training sample or
    /// with probabilistic oracles.
    pub fn supports(self, kind: LossKind) -> bool {
        kind == LossKind::ZeroOne
            || matches!(
                self,
                EstimatorMethod::TreeTrain | EstimatorMethod::RfTrain | EstimatorMethod::BayesOracle | EstimatorMethod::Abc
            )
    }

    pub fn check(self, kind: LossKind) -> Result<()> {
        if self.supports(kind) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "{self} cannot estimate the deviance loss: held-out or out-of-bag deviance is infinite with \
                 probability close to one; use tree-train, rf-train, bayes or abc"
            )))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossEstimate {
    pub value: f64,
    /// Monte Carlo standard error.
    pub se: f64,
    pub method: EstimatorMethod,
    pub kind: LossKind,
    /// Rows per model used for training (0 when nothing is trained).
    pub j_train: usize,
    /// Rows per model used for evaluation.
    pub j_eval: usize,
    pub design: Design,
    pub stream: RngStream,
    pub wall_time_s: f64,
    /// Evaluation rows that could not be scored (out-of-bag rows in every bag).
    pub shortfall: usize,
}

/// Weighted per-model means and their combined standard error.
#[derive(Clone, Debug)]
pub(crate) struct StratifiedMean {
    sum: Vec<f64>,
    sum2: Vec<f64>,
    n: Vec<usize>,
}

impl StratifiedMean {
    pub fn new(k: usize) -> Self {
        Self { sum: vec![0.0; k], sum2: vec![0.0; k], n: vec![0; k] }
    }

    pub fn add(&mut self, model: usize, x: f64) {
        self.sum[model] += x;
        self.sum2[model] += x * x;
        self.n[model] += 1;
    }

    /// `sum_m p(m) mean_m` and its standard error; models without rows contribute nothing.
    pub fn finish(&self, priors: &[f64]) -> (f64, f64) {
        let mut value = 0.0;
        let mut var = 0.0;
        for m in 0..self.n.len() {
            if self.n[m] == 0 {
                continue;
            }
            let n = self.n[m] as f64;
            let mean = self.sum[m] / n;
            let s2 = (self.sum2[m] / n - mean * mean).max(0.0);
            value += priors[m] * mean;
            var += priors[m] * priors[m] * s2 / n;
        }
        (value, var.sqrt())
    }
}

/// Clamps each entry to `[PROB_FLOOR, 1]` and renormalises.
pub fn clamp_probabilities(p: &[f64]) -> Vec<f64> {
    let c: Vec<f64> = p.iter().map(|&x| x.clamp(PROB_FLOOR, 1.0)).collect();
    let s: f64 = c.iter().sum();
    c.into_iter().map(|x| x / s).collect()
}

/// Per-row loss contribution for a predicted label and probability vector.
pub fn row_loss(kind: LossKind, truth: usize, label: usize, probs: &[f64]) -> f64 {
    match kind {
        LossKind::ZeroOne => (label != truth) as u8 as f64,
        LossKind::Deviance => -clamp_probabilities(probs)[truth].ln(),
    }
}

/// Classifier hyperparameters shared by the classifier-based estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSettings {
    pub tree: TreeConfig,
    pub forest: ForestConfig,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        Self { tree: TreeConfig::default(), forest: ForestConfig::default() }
    }
}

/// Classifier-based estimate. The training set comes from `stream.split(0)`,
/// the test set (tree-test only) from `stream.split(1)` and the forest from `stream.split(2)`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_loss_classifier<T: Scalar>(
    family: &dyn ModelFamily,
    design: &Design,
    method: EstimatorMethod,
    kind: LossKind,
    j_train: usize,
    j_test: usize,
    priors: &PriorModelProbabilities,
    settings: &ClassifierSettings,
    stream: RngStream,
) -> Result<LossEstimate> {
    method.check(kind)?;
    let start = Instant::now();
    let k = family.n_models();
    let mut estimate = LossEstimate {
        value: 0.0,
        se: 0.0,
        method,
        kind,
        j_train,
        j_eval: j_train,
        design: design.clone(),
        stream,
        wall_time_s: 0.0,
        shortfall: 0,
    };
    if k == 1 {
        family.check_design(design)?;
        return Ok(estimate);
    }
    if j_train == 0 {
        return Err(Error::Config("training size must be >= 1 per model".into()));
    }
    let train: LabeledDataset<T> =
        generate_labeled_set(family, design, SizeSpec::Stratified(j_train), priors, stream.split(0))?;
    let mut acc = StratifiedMean::new(k);
    match method {
        EstimatorMethod::TreeTrain | EstimatorMethod::TreeTest => {
            let cfg = settings.tree.clone().with_priors(priors.clone());
            let tree = grow_tree(&train, &cfg)?;
            let eval = if method == EstimatorMethod::TreeTest {
                if j_test == 0 {
                    return Err(Error::Config("tree-test needs a test size >= 1 per model".into()));
                }
                estimate.j_eval = j_test;
                generate_labeled_set(family, design, SizeSpec::Stratified(j_test), priors, stream.split(1))?
            } else {
                train
            };
            for (truth, row) in eval.rows() {
                let leaf = tree.leaf(row);
                acc.add(truth, row_loss(kind, truth, leaf.label, &leaf.probabilities()));
            }
        }
        EstimatorMethod::RfOob | EstimatorMethod::RfTrain => {
            let cfg = settings.forest.clone().with_priors(priors.clone());
            let forest = train_forest(&train, &cfg, stream.split(2))?;
            if method == EstimatorMethod::RfOob {
                let oob = forest.oob_predict(&train)?;
                estimate.shortfall = oob.n_uncovered();
                for (&truth, label) in train.labels().iter().zip(&oob.labels) {
                    if let Some(label) = label {
                        acc.add(truth, (*label != truth) as u8 as f64);
                    }
                }
            } else {
                let losses: Vec<(usize, f64)> = (0..train.len())
                    .into_par_iter()
                    .map(|i| {
                        let (label, probs) = forest.predict(train.row(i))?;
                        Ok((train.label(i), row_loss(kind, train.label(i), label, &probs)))
                    })
                    .collect::<Result<_>>()?;
                for (truth, l) in losses {
                    acc.add(truth, l);
                }
            }
        }
        EstimatorMethod::BayesOracle | EstimatorMethod::Abc => {
            return Err(Error::Config(format!("{method} is not a classifier-based method")));
        }
    }
    let (value, se) = acc.finish(priors.as_slice());
    estimate.value = value;
    estimate.se = se;
    estimate.wall_time_s = start.elapsed().as_secs_f64();
    Ok(estimate)
}

pub fn estimate_loss01_classifier<T: Scalar>(
    family: &dyn ModelFamily,
    design: &Design,
    method: EstimatorMethod,
    j_train: usize,
    j_test: usize,
    priors: &PriorModelProbabilities,
    settings: &ClassifierSettings,
    stream: RngStream,
) -> Result<LossEstimate> {
    estimate_loss_classifier::<T>(family, design, method, LossKind::ZeroOne, j_train, j_test, priors, settings, stream)
}

pub fn estimate_loss_mdl_train<T: Scalar>(
    family: &dyn ModelFamily,
    design: &Design,
    method: EstimatorMethod,
    j_train: usize,
    priors: &PriorModelProbabilities,
    settings: &ClassifierSettings,
    stream: RngStream,
) -> Result<LossEstimate> {
    if !matches!(method, EstimatorMethod::TreeTrain | EstimatorMethod::RfTrain) {
        return Err(Error::Config(format!("training-set deviance needs tree-train or rf-train, not {method}")));
    }
    estimate_loss_classifier::<T>(family, design, method, LossKind::Deviance, j_train, 0, priors, settings, stream)
}

/// Posterior model probabilities for a data vector observed at a fixed design.
pub trait PosteriorOracle: Sync {
    fn posterior(&self, y: &[f64]) -> Result<Vec<f64>>;
}

impl<F: Fn(&[f64]) -> Result<Vec<f64>> + Sync> PosteriorOracle for F {
    fn posterior(&self, y: &[f64]) -> Result<Vec<f64>> {
        self(y)
    }
}

/// Bayes-classifier estimate from `j` fresh rows per model drawn from `stream`.
/// The oracle is queried once per distinct data vector.
pub fn estimate_loss_oracle(
    family: &dyn ModelFamily,
    design: &Design,
    oracle: &dyn PosteriorOracle,
    kind: LossKind,
    j: usize,
    priors: &PriorModelProbabilities,
    stream: RngStream,
) -> Result<LossEstimate> {
    let start = Instant::now();
    let k = family.n_models();
    let data: LabeledDataset<f64> = generate_labeled_set(family, design, SizeSpec::Stratified(j), priors, stream)?;
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut distinct: Vec<&[f64]> = Vec::new();
    let row_slot: Vec<usize> = data
        .rows()
        .map(|(_, row)| {
            let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
            *index.entry(key).or_insert_with(|| {
                distinct.push(row);
                distinct.len() - 1
            })
        })
        .collect();
    let posteriors: Vec<Vec<f64>> = distinct
        .par_iter()
        .map(|y| {
            let p = oracle.posterior(y)?;
            let s: f64 = p.iter().sum();
            if p.len() != k || (s - 1.0).abs() > 1e-6 || p.iter().any(|&x| !(x >= 0.0)) {
                return Err(Error::Oracle(format!("oracle returned {p:?} for {y:?}")));
            }
            Ok(p)
        })
        .collect::<Result<_>>()?;
    let mut acc = StratifiedMean::new(k);
    for (truth, &slot) in data.labels().iter().zip(&row_slot) {
        let p = &posteriors[slot];
        acc.add(*truth, row_loss(kind, *truth, argmax(p), p));
    }
    let (value, se) = acc.finish(priors.as_slice());
    Ok(LossEstimate {
        value,
        se,
        method: EstimatorMethod::BayesOracle,
        kind,
        j_train: 0,
        j_eval: j,
        design: design.clone(),
        stream,
        wall_time_s: start.elapsed().as_secs_f64(),
        shortfall: 0,
    })
}

/// A stochastic loss function of the design, as consumed by the optimiser.
pub trait LossEvaluator: Send + Sync {
    fn evaluate(&self, design: &Design, stream: RngStream) -> Result<LossEstimate>;
}

/// Classifier-based loss bound to a family and fixed sizes.
#[derive(Clone)]
pub struct ClassifierLoss {
    pub family: Arc<dyn ModelFamily>,
    pub method: EstimatorMethod,
    pub kind: LossKind,
    pub j_train: usize,
    pub j_test: usize,
    pub priors: PriorModelProbabilities,
    pub settings: ClassifierSettings,
}

impl ClassifierLoss {
    pub fn new(family: Arc<dyn ModelFamily>, method: EstimatorMethod, kind: LossKind, j_train: usize) -> Result<Self> {
        method.check(kind)?;
        let priors = family.default_priors();
        Ok(Self { family, method, kind, j_train, j_test: j_train, priors, settings: ClassifierSettings::default() })
    }
}

impl LossEvaluator for ClassifierLoss {
    fn evaluate(&self, design: &Design, stream: RngStream) -> Result<LossEstimate> {
        estimate_loss_classifier::<f64>(
            self.family.as_ref(),
            design,
            self.method,
            self.kind,
            self.j_train,
            self.j_test,
            &self.priors,
            &self.settings,
            stream,
        )
    }
}

/// Bayes-classifier loss through a posterior oracle built per design.
pub struct OracleLoss<F> {
    pub family: Arc<dyn ModelFamily>,
    pub kind: LossKind,
    pub j: usize,
    pub priors: PriorModelProbabilities,
    /// Builds the oracle for one design.
    pub make_oracle: F,
}

impl<F, O> LossEvaluator for OracleLoss<F>
where
    F: Fn(&Design) -> Result<O> + Send + Sync,
    O: PosteriorOracle,
{
    fn evaluate(&self, design: &Design, stream: RngStream) -> Result<LossEstimate> {
        let oracle = (self.make_oracle)(design)?;
        estimate_loss_oracle(self.family.as_ref(), design, &oracle, self.kind, self.j, &self.priors, stream)
    }
}
