//! Labeled (model, features) rows drawn from the joint prior predictive.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub family: String,
    pub design: Option<Design>,
    pub stream: Option<RngStream>,
}

/// Rows of `(label, feature vector)`. Labels are 0-based model indices
/// internally; exported tables use 1-based labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset<T> {
    k: usize,
    dim: usize,
    labels: Vec<usize>,
    features: Vec<T>,
    pub meta: DatasetMeta,
}

impl<T: Scalar> LabeledDataset<T> {
    pub fn new(k: usize, dim: usize) -> Self {
        Self { k, dim, labels: Vec::new(), features: Vec::new(), meta: DatasetMeta::default() }
    }

    pub fn from_parts(k: usize, dim: usize, labels: Vec<usize>, features: Vec<T>) -> Result<Self> {
        if features.len() != labels.len() * dim {
            return Err(Error::DimensionMismatch { expected: labels.len() * dim, got: features.len() });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidLabel { label, k });
        }
        Ok(Self { k, dim, labels, features, meta: DatasetMeta::default() })
    }

    pub fn push(&mut self, label: usize, row: &[T]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: row.len() });
        }
        if label >= self.k {
            return Err(Error::InvalidLabel { label, k: self.k });
        }
        self.labels.push(label);
        self.features.extend_from_slice(row);
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = (usize, &[T])> + '_ {
        self.labels.iter().copied().zip(self.features.chunks_exact(self.dim.max(1)))
    }

    pub fn features(&self) -> &[T] {
        &self.features
    }

    /// Column-major copy of the features.
    pub fn columns(&self) -> Vec<Vec<T>> {
        (0..self.dim)
            .map(|f| (0..self.len()).map(|i| self.features[i * self.dim + f]).collect())
            .collect()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.k];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    /// Cheap content hash used to check that a dataset is the one a forest was trained on.
    pub fn fingerprint(&self) -> u64 {
        const PRIME: u64 = 0x0000_0100_0000_01B3;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: u64| {
            h ^= x;
            h = h.wrapping_mul(PRIME);
        };
        eat(self.k as u64);
        eat(self.dim as u64);
        for &l in &self.labels {
            eat(l as u64);
        }
        for &f in &self.features {
            eat(f.to_f64_lossy().to_bits());
        }
        h
    }

    /// Writes `label,f1,...,fF` with 1-based labels.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> =
            std::iter::once("label".to_string()).chain((1..=self.dim).map(|i| format!("f{i}"))).collect();
        writeln!(w, "{}", header.join(","))?;
        for (label, row) in self.rows() {
            let mut line = (label + 1).to_string();
            for v in row {
                line.push(',');
                line.push_str(&v.to_string());
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, k: usize) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Format("missing header".into()))??;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.first() != Some(&"label") {
            return Err(Error::Format("header must start with 'label'".into()));
        }
        let mut ds = Self::new(k, cols.len() - 1);
        let mut row = Vec::with_capacity(ds.dim);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split(',');
            let label: usize = it
                .next()
                .and_then(|s| s.parse().ok())
                .filter(|&l| l >= 1)
                .ok_or_else(|| Error::Format(format!("bad label in '{line}'")))?;
            row.clear();
            for s in it {
                let v: f64 = s.parse().map_err(|_| Error::Format(format!("bad value '{s}'")))?;
                row.push(T::from_f64_lossy(v));
            }
            ds.push(label - 1, &row)?;
        }
        Ok(ds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_checks_dimension_and_label() {
        let mut d = LabeledDataset::<f64>::new(2, 3);
        assert!(d.push(0, &[1.0, 2.0, 3.0]).is_ok());
        assert_eq!(d.push(0, &[1.0]), Err(Error::DimensionMismatch { expected: 3, got: 1 }));
        assert_eq!(d.push(2, &[1.0, 2.0, 3.0]), Err(Error::InvalidLabel { label: 2, k: 2 }));
        assert_eq!(d.counts(), vec![1, 0]);
    }

    #[test]
    fn csv_round_trip() {
        let d = LabeledDataset::from_parts(3, 2, vec![0, 2, 1], vec![1.0, 2.5, 3.0, 0.0, 7.0, 8.0]).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("label,f1,f2\n1,1,2.5\n3,3,0\n"));
        let back = LabeledDataset::<f64>::read_csv(&buf[..], 3).unwrap();
        assert_eq!(back.labels(), d.labels());
        assert_eq!(back.features(), d.features());
    }

    #[test]
    fn fingerprint_sensitive_to_content() {
        let a = LabeledDataset::from_parts(2, 1, vec![0, 1], vec![1.0f64, 2.0]).unwrap();
        let b = LabeledDataset::from_parts(2, 1, vec![0, 1], vec![1.0f64, 2.5]).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
    }

    #[test]
    fn columns_transpose() {
        let d = LabeledDataset::from_parts(2, 2, vec![0, 1], vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(d.columns(), vec![vec![1.0, 3.0], vec![2.0, 4.0]]);
    }
}
