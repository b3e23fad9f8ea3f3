//! Rejection ABC over a pre-simulated reference table of epidemic trajectories.

use std::cmp::Ordering;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{Design, Grid, PriorModelProbabilities};
use crate::error::{Error, Result};
use crate::loss::{estimate_loss_oracle, EstimatorMethod, LossEstimate, LossEvaluator, LossKind, PosteriorOracle};
use crate::models::epi::{simulate_epi, EpiFamily};
use crate::rng::RngStream;

/// Parameter columns stored per row: b1, b2, gamma (NaN where the model lacks one).
pub const PARAM_COLUMNS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableHeader {
    pub family: String,
    pub population: u32,
    pub grid: Vec<f64>,
    pub rows_per_model: usize,
    pub n_models: usize,
    pub seed: u64,
}

/// Prior-predictive draws of every model at every grid time, laid out model-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceTable {
    pub header: TableHeader,
    /// `n_rows * PARAM_COLUMNS`.
    pub params: Vec<f64>,
    /// `n_rows * grid.len()` infected counts.
    pub counts: Vec<u16>,
}

impl ReferenceTable {
    pub fn n_rows(&self) -> usize {
        self.header.rows_per_model * self.header.n_models
    }

    pub fn label(&self, row: usize) -> usize {
        row / self.header.rows_per_model
    }

    pub fn trajectory(&self, row: usize) -> &[u16] {
        let g = self.header.grid.len();
        &self.counts[row * g..(row + 1) * g]
    }

    pub fn params(&self, row: usize) -> &[f64] {
        &self.params[row * PARAM_COLUMNS..(row + 1) * PARAM_COLUMNS]
    }

    /// Grid columns of a single-realisation design.
    pub fn columns_for(&self, design: &Design) -> Result<Vec<usize>> {
        if design.blocks.len() != 1 {
            return Err(Error::InvalidDesign("reference tables hold one realisation per row".into()));
        }
        let grid = Grid::new(self.header.grid.clone())?;
        design.blocks[0]
            .iter()
            .map(|&t| grid.position(t).ok_or_else(|| Error::GridViolation(format!("time {t} is not on the table grid"))))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "{}", serde_json::to_string(&self.header)?)?;
        for v in &self.params {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in &self.counts {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let mut line = String::new();
        r.read_line(&mut line)?;
        let header: TableHeader = serde_json::from_str(line.trim_end())?;
        let n = header.rows_per_model * header.n_models;
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        let want = n * PARAM_COLUMNS * 8 + n * header.grid.len() * 2;
        if buf.len() != want {
            return Err(Error::Format(format!("table body has {} bytes, expected {want}", buf.len())));
        }
        let (pb, cb) = buf.split_at(n * PARAM_COLUMNS * 8);
        let params = pb.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        let counts = cb.chunks_exact(2).map(|c| u16::from_le_bytes(c.try_into().expect("2 bytes"))).collect();
        Ok(Self { header, params, counts })
    }
}

/// Simulates `r` rows per model over the whole grid; row `i` uses `stream.split(i)`.
pub fn build_reference_table(family: &EpiFamily, grid: &Grid, r: usize, stream: RngStream) -> Result<ReferenceTable> {
    if r == 0 {
        return Err(Error::Config("reference table needs at least one row per model".into()));
    }
    if family.population > u16::MAX as u32 {
        return Err(Error::Config("population too large for the table's count type".into()));
    }
    let k = family.models.len();
    let full = Design::single(grid.values().to_vec());
    let rows: Vec<(Vec<f64>, Vec<u16>)> = (0..k * r)
        .into_par_iter()
        .map(|i| {
            let m = i / r;
            let mut rng = stream.split(i as u64).rng();
            let th = family.sample_params(m, &mut rng);
            let counts = simulate_epi(family.models[m], &th, &full, family.population, &mut rng)?;
            let params = vec![th.b1, th.b2.unwrap_or(f64::NAN), th.gamma.unwrap_or(f64::NAN)];
            Ok((params, counts.into_iter().map(|c| c as u16).collect()))
        })
        .collect::<Result<_>>()?;
    let (params, counts): (Vec<Vec<f64>>, Vec<Vec<u16>>) = rows.into_iter().unzip();
    Ok(ReferenceTable {
        header: TableHeader {
            family: family.label.clone(),
            population: family.population,
            grid: grid.values().to_vec(),
            rows_per_model: r,
            n_models: k,
            seed: stream.seed,
        },
        params: params.concat(),
        counts: counts.concat(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbcConfig {
    /// Rows retained per query.
    pub retain: usize,
    /// Fresh draws per model for loss estimation.
    pub draws_per_model: usize,
}

/// Retained-sample model proportions for `y` observed at the table columns `cols`.
pub fn abc_posterior_from_columns(y: &[f64], cols: &[usize], table: &ReferenceTable, retain: usize) -> Result<Vec<f64>> {
    let n = table.n_rows();
    if retain == 0 || retain > n {
        return Err(Error::Config(format!("retain count {retain} must lie in 1..={n}")));
    }
    if y.len() != cols.len() {
        return Err(Error::DimensionMismatch { expected: cols.len(), got: y.len() });
    }
    let mut dist: Vec<(f64, u64, usize)> = (0..n)
        .map(|row| {
            let tr = table.trajectory(row);
            let d2: f64 = cols.iter().zip(y).map(|(&c, &v)| (tr[c] as f64 - v).powi(2)).sum();
            (d2, tie_key(table.header.seed, row), row)
        })
        .collect();
    let cmp = |a: &(f64, u64, usize), b: &(f64, u64, usize)| retention_order(*a, *b);
    if retain < n {
        dist.select_nth_unstable_by(retain - 1, cmp);
    }
    let mut counts = vec![0usize; table.header.n_models];
    for &(_, _, row) in &dist[..retain] {
        counts[table.label(row)] += 1;
    }
    Ok(counts.into_iter().map(|c| c as f64 / retain as f64).collect())
}

pub fn abc_posterior_probs(y: &[f64], design: &Design, table: &ReferenceTable, cfg: &AbcConfig) -> Result<Vec<f64>> {
    let cols = table.columns_for(design)?;
    abc_posterior_from_columns(y, &cols, table, cfg.retain)
}

/// ABC posterior at one design, usable as a loss oracle.
pub struct AbcPosterior<'a> {
    pub table: &'a ReferenceTable,
    pub cols: Vec<usize>,
    pub retain: usize,
}

impl<'a> AbcPosterior<'a> {
    pub fn new(table: &'a ReferenceTable, design: &Design, retain: usize) -> Result<Self> {
        Ok(Self { table, cols: table.columns_for(design)?, retain })
    }
}

impl PosteriorOracle for AbcPosterior<'_> {
    fn posterior(&self, y: &[f64]) -> Result<Vec<f64>> {
        abc_posterior_from_columns(y, &self.cols, self.table, self.retain)
    }
}

/// Expected loss with ABC posteriors for fresh prior-predictive draws from `stream`.
pub fn abc_expected_loss(
    family: &EpiFamily,
    design: &Design,
    table: &ReferenceTable,
    cfg: &AbcConfig,
    kind: LossKind,
    priors: &PriorModelProbabilities,
    stream: RngStream,
) -> Result<LossEstimate> {
    if table.header.n_models != family.models.len() || table.header.population != family.population {
        return Err(Error::DatasetMismatch(format!("table was built for {}", table.header.family)));
    }
    let oracle = AbcPosterior::new(table, design, cfg.retain)?;
    let mut est = estimate_loss_oracle(family, design, &oracle, kind, cfg.draws_per_model, priors, stream)?;
    est.method = EstimatorMethod::Abc;
    Ok(est)
}

/// ABC loss bound to a table, for use by sweeps and the optimiser.
pub struct AbcLoss {
    pub family: EpiFamily,
    pub table: ReferenceTable,
    pub cfg: AbcConfig,
    pub kind: LossKind,
}

impl LossEvaluator for AbcLoss {
    fn evaluate(&self, design: &Design, stream: RngStream) -> Result<LossEstimate> {
        abc_expected_loss(&self.family, design, &self.table, &self.cfg, self.kind, &self.family.model_probs, stream)
    }
}

/// Fixed pseudo-random rank of a row among equal distances. Rows are stored
/// model by model, so ranking ties by index would favour the first model.
pub fn tie_key(seed: u64, row: usize) -> u64 {
    crate::rng::mix64(seed, row as u64)
}

/// Orders rows by distance, then tie key, then index.
pub fn retention_order(a: (f64, u64, usize), b: (f64, u64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
}
