//! Random forests: bagged unpruned trees with per-node feature subsampling.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{Grower, Prepared, Tree, TreeConfig};
use crate::dataset::LabeledDataset;
use crate::design::PriorModelProbabilities;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::{argmax, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features tried per node; `None` means `floor(sqrt(F))`.
    pub mtry: Option<usize>,
    pub tree: TreeConfig,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_trees: 100, mtry: None, tree: TreeConfig::unpruned() }
    }
}

impl ForestConfig {
    pub fn with_trees(n_trees: usize) -> Self {
        Self { n_trees, ..Self::default() }
    }

    pub fn with_priors(mut self, priors: PriorModelProbabilities) -> Self {
        self.tree.priors = Some(priors);
        self
    }

    pub fn mtry_for(&self, dim: usize) -> usize {
        self.mtry.unwrap_or_else(|| (dim as f64).sqrt().floor() as usize).clamp(1, dim.max(1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Forest<T> {
    pub trees: Vec<Tree<T>>,
    /// `inbag[t][i]`: copies of training row `i` in tree `t`'s bootstrap sample.
    pub inbag: Vec<Vec<u16>>,
    pub k: usize,
    pub dim: usize,
    training_fingerprint: u64,
}

/// Out-of-bag labels; `None` marks rows that were in every bootstrap sample.
#[derive(Clone, Debug, PartialEq)]
pub struct OobPrediction {
    pub labels: Vec<Option<usize>>,
}

impl OobPrediction {
    pub fn n_uncovered(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    /// Error over covered rows, with the number of covered rows.
    pub fn error(&self, truth: &[usize]) -> (f64, usize) {
        let mut wrong = 0;
        let mut covered = 0;
        for (l, &t) in self.labels.iter().zip(truth) {
            if let Some(l) = l {
                covered += 1;
                wrong += (*l != t) as usize;
            }
        }
        (if covered > 0 { wrong as f64 / covered as f64 } else { f64::NAN }, covered)
    }
}

/// Trains `cfg.n_trees` trees; tree `t` draws its bootstrap and feature
/// subsets from `stream.split(t)`, so the result is the same at any thread count.
pub fn train_forest<T: Scalar>(data: &LabeledDataset<T>, cfg: &ForestConfig, stream: RngStream) -> Result<Forest<T>> {
    if data.len() < 2 {
        return Err(Error::EmptyDataset);
    }
    if cfg.n_trees == 0 {
        return Err(Error::Config("a forest needs at least one tree".into()));
    }
    cfg.tree.validate()?;
    let n = data.len();
    let mtry = cfg.mtry_for(data.dim());
    let prep = Prepared::new(data);
    let grown: Vec<(Tree<T>, Vec<u16>)> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream.split(t as u64).rng();
            let mut counts = vec![0u16; n];
            for _ in 0..n {
                let i = rng.random_range(0..n);
                counts[i] = counts[i].saturating_add(1);
            }
            let tree = Grower::new(&prep, &cfg.tree, &counts, mtry)?.grow(&mut rng);
            Ok((tree, counts))
        })
        .collect::<Result<_>>()?;
    let (trees, inbag) = grown.into_iter().unzip();
    Ok(Forest { trees, inbag, k: data.k(), dim: data.dim(), training_fingerprint: data.fingerprint() })
}

impl<T: Scalar> Forest<T> {
    fn votes(&self, x: &[T], skip: impl Fn(usize) -> bool) -> (Vec<u32>, usize) {
        let mut votes = vec![0u32; self.k];
        let mut used = 0;
        for (t, tree) in self.trees.iter().enumerate() {
            if !skip(t) {
                votes[tree.leaf(x).label] += 1;
                used += 1;
            }
        }
        (votes, used)
    }

    /// Majority vote (ties to the lowest label) and averaged tree probabilities.
    pub fn predict(&self, x: &[T]) -> Result<(usize, Vec<f64>)> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let mut votes = vec![0u32; self.k];
        let mut probs = vec![0.0; self.k];
        for tree in &self.trees {
            let leaf = tree.leaf(x);
            votes[leaf.label] += 1;
            let total: f64 = leaf.scores.iter().sum();
            for (p, s) in probs.iter_mut().zip(&leaf.scores) {
                *p += if total > 0.0 { s / total } else { 1.0 / self.k as f64 };
            }
        }
        let n = self.trees.len() as f64;
        probs.iter_mut().for_each(|p| *p /= n);
        Ok((argmax(&votes), probs))
    }

    pub fn vote_counts(&self, x: &[T]) -> Vec<u32> {
        self.votes(x, |_| false).0
    }

    /// Predictions for every row of `data` using only trees that left the row out.
    pub fn oob_predict(&self, data: &LabeledDataset<T>) -> Result<OobPrediction> {
        if data.fingerprint() != self.training_fingerprint || data.len() != self.inbag[0].len() {
            return Err(Error::DatasetMismatch("out-of-bag prediction needs the training set".into()));
        }
        let labels = (0..data.len())
            .into_par_iter()
            .map(|i| {
                let (votes, used) = self.votes(data.row(i), |t| self.inbag[t][i] > 0);
                (used > 0).then(|| argmax(&votes))
            })
            .collect();
        Ok(OobPrediction { labels })
    }

    /// Out-of-bag fraction of each tree.
    pub fn oob_fractions(&self) -> Vec<f64> {
        self.inbag
            .iter()
            .map(|c| c.iter().filter(|&&x| x == 0).count() as f64 / c.len() as f64)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable(n: usize) -> LabeledDataset<f64> {
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let feats: Vec<f64> = (0..n).flat_map(|i| [(i % 2) as f64 * 10.0 + (i % 7) as f64, (i % 5) as f64]).collect();
        LabeledDataset::from_parts(2, 2, labels, feats).unwrap()
    }

    #[test]
    fn single_tree_forest_matches_its_tree() {
        let d = separable(200);
        let f = train_forest(&d, &ForestConfig::with_trees(1), RngStream::new(1)).unwrap();
        for (_, row) in d.rows() {
            assert_eq!(f.predict(row).unwrap().0, f.trees[0].predict_label(row).unwrap());
        }
    }

    #[test]
    fn oob_fraction_near_bootstrap_exclusion() {
        let d = separable(1000);
        let f = train_forest(&d, &ForestConfig::with_trees(50), RngStream::new(2)).unwrap();
        let mean = f.oob_fractions().iter().sum::<f64>() / 50.0;
        let expected = (1.0 - 1.0 / 1000.0f64).powi(1000);
        assert!((mean - expected).abs() < 0.02, "{mean}");
        assert!(f.inbag.iter().all(|c| c.iter().map(|&x| x as usize).sum::<usize>() == 1000));
    }

    #[test]
    fn separable_oob_error_small() {
        let d = separable(1000);
        let f = train_forest(&d, &ForestConfig::with_trees(100), RngStream::new(3)).unwrap();
        let oob = f.oob_predict(&d).unwrap();
        assert_eq!(oob.n_uncovered(), 0);
        assert!(oob.error(d.labels()).0 <= 0.02);
    }

    #[test]
    fn oob_rejects_foreign_dataset() {
        let d = separable(100);
        let f = train_forest(&d, &ForestConfig::with_trees(3), RngStream::new(4)).unwrap();
        assert!(matches!(f.oob_predict(&separable(102)), Err(Error::DatasetMismatch(_))));
    }

    #[test]
    fn probabilities_sum_to_one() {
        let d = separable(300);
        let f = train_forest(&d, &ForestConfig::with_trees(20), RngStream::new(5)).unwrap();
        let mut rng = RngStream::new(6).rng();
        for _ in 0..1000 {
            let x = [rng.random_range(-5.0..20.0), rng.random_range(-1.0..6.0)];
            let (label, p) = f.predict(&x).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(label, argmax(&f.vote_counts(&x)));
        }
    }

    #[test]
    fn default_mtry_is_floor_sqrt() {
        let cfg = ForestConfig::default();
        assert_eq!(cfg.mtry_for(1), 1);
        assert_eq!(cfg.mtry_for(8), 2);
        assert_eq!(cfg.mtry_for(22), 4);
    }
}
