//! Model families and joint prior-predictive dataset generation.

pub mod epi;
pub mod gillespie;
pub mod logistic;
pub mod macrophage;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetMeta, LabeledDataset};
use crate::design::{Design, PriorModelProbabilities};
use crate::error::{Error, Result};
use crate::rng::{RngStream, StreamRng};
use crate::scalar::Scalar;

/// A set of K competing simulators sharing one design space.
pub trait ModelFamily: Send + Sync {
    fn name(&self) -> String;

    fn n_models(&self) -> usize;

    fn model_names(&self) -> Vec<String>;

    fn default_priors(&self) -> PriorModelProbabilities;

    fn feature_dim(&self, design: &Design) -> usize;

    fn check_design(&self, design: &Design) -> Result<()>;

    /// Draws parameters from model `model`'s prior, simulates at `design` and
    /// appends the encoded features to `out`.
    fn simulate_features(&self, model: usize, design: &Design, rng: &mut StreamRng, out: &mut Vec<f64>) -> Result<()>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SizeSpec {
    /// Exactly `J` rows per model, laid out model by model.
    Stratified(usize),
    /// `total` rows with labels drawn i.i.d. from the model prior.
    Proportional(usize),
}

impl SizeSpec {
    pub fn total(&self, k: usize) -> usize {
        match *self {
            SizeSpec::Stratified(j) => j * k,
            SizeSpec::Proportional(n) => n,
        }
    }
}

/// Rows are simulated independently, row `i` from `stream.split(i)`, so the
/// result does not depend on how rows are scheduled across threads.
pub fn generate_labeled_set<T: Scalar>(
    family: &dyn ModelFamily,
    design: &Design,
    size: SizeSpec,
    priors: &PriorModelProbabilities,
    stream: RngStream,
) -> Result<LabeledDataset<T>> {
    family.check_design(design)?;
    let k = family.n_models();
    if priors.k() != k {
        return Err(Error::DimensionMismatch { expected: k, got: priors.k() });
    }
    let dim = family.feature_dim(design);
    let total = size.total(k);
    let rows: Vec<(usize, Vec<f64>)> = (0..total)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.split(i as u64).rng();
            let label = match size {
                SizeSpec::Stratified(j) => i / j,
                SizeSpec::Proportional(_) => priors.sample(&mut rng),
            };
            let mut out = Vec::with_capacity(dim);
            family.simulate_features(label, design, &mut rng, &mut out)?;
            Ok((label, out))
        })
        .collect::<Result<_>>()?;
    let mut labels = Vec::with_capacity(total);
    let mut features = Vec::with_capacity(total * dim);
    for (label, row) in rows {
        if row.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
        }
        labels.push(label);
        features.extend(row.into_iter().map(T::from_f64_lossy));
    }
    let mut ds = LabeledDataset::from_parts(k, dim, labels, features)?;
    ds.meta = DatasetMeta { family: family.name(), design: Some(design.clone()), stream: Some(stream) };
    Ok(ds)
}

/// K models that all emit the same constant feature vector, whatever the design.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantFamily {
    pub k: usize,
    pub value: f64,
}

impl ModelFamily for ConstantFamily {
    fn name(&self) -> String {
        format!("constant-k{}", self.k)
    }

    fn n_models(&self) -> usize {
        self.k
    }

    fn model_names(&self) -> Vec<String> {
        (1..=self.k).map(|m| format!("model{m}")).collect()
    }

    fn default_priors(&self) -> PriorModelProbabilities {
        PriorModelProbabilities::uniform(self.k)
    }

    fn feature_dim(&self, design: &Design) -> usize {
        design.n_coordinates().max(1)
    }

    fn check_design(&self, _: &Design) -> Result<()> {
        Ok(())
    }

    fn simulate_features(&self, _: usize, design: &Design, _: &mut StreamRng, out: &mut Vec<f64>) -> Result<()> {
        out.extend(std::iter::repeat_n(self.value, self.feature_dim(design)));
        Ok(())
    }
}
