//! Classification trees, random forests and misclassification matrices.

pub mod forest;
pub mod tree;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use forest::{train_forest, Forest, ForestConfig, OobPrediction};
pub use tree::{gini, grow_tree, prune_tree, Node, NodeKind, Tree, TreeConfig};

use crate::error::{Error, Result};

/// Row-normalised confusion matrix: entry (i, j) is the share of class-i rows predicted as j.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MisclassificationMatrix {
    pub k: usize,
    pub counts: Vec<Vec<usize>>,
    pub rates: Vec<Vec<f64>>,
    /// Classes without any rows; their rows are all zero.
    pub empty_rows: Vec<usize>,
}

pub fn misclassification_matrix(truth: &[usize], predicted: &[usize], k: usize) -> Result<MisclassificationMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: predicted.len() });
    }
    let mut counts = vec![vec![0usize; k]; k];
    for (&t, &p) in truth.iter().zip(predicted) {
        if let Some(&label) = [t, p].iter().find(|&&l| l >= k) {
            return Err(Error::InvalidLabel { label, k });
        }
        counts[t][p] += 1;
    }
    let mut empty_rows = Vec::new();
    let rates = counts
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let n: usize = row.iter().sum();
            if n == 0 {
                empty_rows.push(i);
                vec![0.0; k]
            } else {
                row.iter().map(|&c| c as f64 / n as f64).collect()
            }
        })
        .collect();
    Ok(MisclassificationMatrix { k, counts, rates, empty_rows })
}

impl MisclassificationMatrix {
    /// Comma-separated table with a `true\predicted` corner and model names on both axes.
    pub fn write_csv<W: Write>(&self, mut w: W, names: &[String]) -> Result<()> {
        if names.len() != self.k {
            return Err(Error::DimensionMismatch { expected: self.k, got: names.len() });
        }
        writeln!(w, "true\\predicted,{}", names.join(","))?;
        for (name, row) in names.iter().zip(&self.rates) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{name},{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn off_diagonal(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            self.rates[i][j]
        }
    }
}
