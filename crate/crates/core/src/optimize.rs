//! Coordinate exchange over a discretised design space with terminal
//! re-evaluation of the last visited designs, and seeded multi-start.
//!
//! Stream layout for run `s` (the restart's stream): `s.split(0)` draws the
//! initial design, `s.split(1)` the initial loss, `s.path(&[2, sweep, coord, cand])`
//! each exchange trial and `s.path(&[3, i, rep])` the terminal repetitions.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{canonicalize_design, validate_design, Design, DesignSpace, PointPolicy};
use crate::error::{Error, Result};
use crate::loss::LossEvaluator;
use crate::rng::RngStream;

/// A stochastic loss of the design.
pub trait Objective: Sync {
    fn estimate(&self, design: &Design, stream: RngStream) -> Result<f64>;
}

impl<F: Fn(&Design, RngStream) -> Result<f64> + Sync> Objective for F {
    fn estimate(&self, design: &Design, stream: RngStream) -> Result<f64> {
        self(design, stream)
    }
}

/// Adapts a loss estimator to an objective on its point estimate.
pub struct EstimatorObjective<'a>(pub &'a dyn LossEvaluator);

impl Objective for EstimatorObjective<'_> {
    fn estimate(&self, design: &Design, stream: RngStream) -> Result<f64> {
        Ok(self.0.evaluate(design, stream)?.value)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExchangePolicy {
    /// Every grid value of the coordinate's group, including the current one.
    FullGrid,
    /// Grid values not already used in the coordinate's group.
    ExcludeCurrentPoints,
}

impl ExchangePolicy {
    /// Exclusion for distinct-point spaces, the full grid otherwise.
    pub fn for_space(space: &DesignSpace) -> Self {
        match space.policy {
            PointPolicy::DistinctWithinGroup => ExchangePolicy::ExcludeCurrentPoints,
            PointPolicy::RepeatsAllowed => ExchangePolicy::FullGrid,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Designs re-evaluated at the end of a run.
    pub p: usize,
    /// Repetitions per re-evaluated design.
    pub q: usize,
    pub restarts: usize,
    /// `None` picks the policy matching the space.
    pub policy: Option<ExchangePolicy>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { p: 6, q: 10, restarts: 20, policy: None }
    }
}

impl SearchConfig {
    pub fn validate(&self, space: &DesignSpace) -> Result<()> {
        if self.p == 0 || self.q == 0 || self.restarts == 0 {
            return Err(Error::Config("p, q and restarts must all be >= 1".into()));
        }
        if self.policy == Some(ExchangePolicy::ExcludeCurrentPoints) && space.policy != PointPolicy::DistinctWithinGroup {
            return Err(Error::Config("exclude-current-points needs a distinct-point space".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Initial,
    Exchange,
    Terminal,
}

/// One loss evaluation in a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub restart: usize,
    pub phase: Phase,
    /// Sweep number (from 1) for exchanges; history index for terminal evaluations.
    pub sweep: usize,
    pub coordinate: usize,
    pub candidate: usize,
    pub design: Design,
    pub loss: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub design: Design,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub restart: usize,
    pub init: Design,
    pub init_loss: f64,
    pub design: Design,
    pub min_average_loss: f64,
    /// Accepted designs in order, with the loss that made them accepted.
    pub history: Vec<Visit>,
    /// Terminal averages, most recent design first.
    pub terminal_averages: Vec<f64>,
    pub sweeps: usize,
    pub n_evaluations: usize,
    pub log: Vec<EvalRecord>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub design: Design,
    pub min_average_loss: f64,
    pub best_restart: usize,
    pub runs: Vec<RunResult>,
    pub total_evaluations: usize,
    pub wall_time_s: f64,
}

fn candidates(space: &DesignSpace, design: &Design, group: usize, policy: ExchangePolicy) -> Vec<f64> {
    let grid = &space.groups[group].grid;
    match policy {
        ExchangePolicy::FullGrid => grid.values().to_vec(),
        ExchangePolicy::ExcludeCurrentPoints => {
            let used: Vec<Option<usize>> = design.blocks[group].iter().map(|&b| grid.position(b)).collect();
            grid.values().iter().enumerate().filter(|(i, _)| !used.contains(&Some(*i))).map(|(_, &v)| v).collect()
        }
    }
}

/// One run of coordinate exchange from `init`.
pub fn coordinate_exchange(
    objective: &dyn Objective,
    space: &DesignSpace,
    init: &Design,
    policy: ExchangePolicy,
    p: usize,
    q: usize,
    restart: usize,
    stream: RngStream,
) -> Result<RunResult> {
    if p == 0 || q == 0 {
        return Err(Error::Config("p and q must be >= 1".into()));
    }
    let mut design = canonicalize_design(init, space)?;
    let init = design.clone();
    let mut loss = objective.estimate(&design, stream.split(1))?;
    let init_loss = loss;
    let mut log = vec![EvalRecord {
        restart,
        phase: Phase::Initial,
        sweep: 0,
        coordinate: 0,
        candidate: 0,
        design: design.clone(),
        loss,
        accepted: false,
    }];
    let mut history: Vec<Visit> = Vec::new();
    let mut warnings = Vec::new();
    let mut n_evaluations = 1;
    let mut sweep = 0;
    let mut swaps = true;
    while swaps {
        swaps = false;
        sweep += 1;
        for coord in 0..space.n_coordinates() {
            let (g, pos) = space.locate(coord).expect("coordinate within space");
            let trials: Vec<Design> = candidates(space, &design, g, policy)
                .into_iter()
                .filter_map(|v| canonicalize_design(&design.with_replaced(g, pos, v), space).ok())
                .collect();
            if trials.is_empty() {
                warnings.push(format!("sweep {sweep}: no candidates for coordinate {coord}"));
                continue;
            }
            let losses: Vec<f64> = trials
                .par_iter()
                .enumerate()
                .map(|(j, d)| objective.estimate(d, stream.path(&[2, sweep as u64, coord as u64, j as u64])))
                .collect::<Result<_>>()?;
            n_evaluations += losses.len();
            let mut k = 0;
            for (j, &l) in losses.iter().enumerate() {
                if l < losses[k] {
                    k = j;
                }
            }
            let accept = losses[k] < loss;
            for (j, (d, &l)) in trials.iter().zip(&losses).enumerate() {
                log.push(EvalRecord {
                    restart,
                    phase: Phase::Exchange,
                    sweep,
                    coordinate: coord,
                    candidate: j,
                    design: d.clone(),
                    loss: l,
                    accepted: accept && j == k,
                });
            }
            if accept {
                design = trials[k].clone();
                loss = losses[k];
                swaps = true;
                history.push(Visit { design: design.clone(), loss });
            }
        }
    }
    let finalists: Vec<Design> = if history.is_empty() {
        vec![design.clone()]
    } else {
        history.iter().rev().take(p).map(|v| v.design.clone()).collect()
    };
    let mut terminal_averages = Vec::with_capacity(finalists.len());
    for (i, d) in finalists.iter().enumerate() {
        let reps: Vec<f64> = (0..q)
            .into_par_iter()
            .map(|rep| objective.estimate(d, stream.path(&[3, i as u64, rep as u64])))
            .collect::<Result<_>>()?;
        n_evaluations += q;
        for (rep, &l) in reps.iter().enumerate() {
            log.push(EvalRecord {
                restart,
                phase: Phase::Terminal,
                sweep: i,
                coordinate: 0,
                candidate: rep,
                design: d.clone(),
                loss: l,
                accepted: false,
            });
        }
        terminal_averages.push(reps.iter().sum::<f64>() / q as f64);
    }
    let mut s = 0;
    for (i, &a) in terminal_averages.iter().enumerate() {
        if a < terminal_averages[s] {
            s = i;
        }
    }
    Ok(RunResult {
        restart,
        init,
        init_loss,
        design: finalists[s].clone(),
        min_average_loss: terminal_averages[s],
        history,
        terminal_averages,
        sweeps: sweep,
        n_evaluations,
        log,
        warnings,
    })
}

/// Independent runs from random initial designs; restart `r` uses `stream.split(r)`.
pub fn multi_start_search(objective: &dyn Objective, space: &DesignSpace, cfg: &SearchConfig, stream: RngStream) -> Result<SearchResult> {
    multi_start_from(objective, space, cfg, stream, None)
}

/// As [`multi_start_search`], optionally with explicit initial designs (one per restart).
pub fn multi_start_from(
    objective: &dyn Objective,
    space: &DesignSpace,
    cfg: &SearchConfig,
    stream: RngStream,
    inits: Option<&[Design]>,
) -> Result<SearchResult> {
    cfg.validate(space)?;
    if let Some(inits) = inits {
        if inits.len() != cfg.restarts {
            return Err(Error::Config(format!("{} initial designs for {} restarts", inits.len(), cfg.restarts)));
        }
    }
    let start = Instant::now();
    let policy = cfg.policy.unwrap_or_else(|| ExchangePolicy::for_space(space));
    let runs: Vec<RunResult> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let rs = stream.split(r as u64);
            let init = match inits {
                Some(i) => i[r].clone(),
                None => space.random_design(rs.split(0)),
            };
            coordinate_exchange(objective, space, &init, policy, cfg.p, cfg.q, r, rs)
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.min_average_loss < runs[best].min_average_loss {
            best = i;
        }
    }
    debug_assert!(validate_design(&runs[best].design, space).is_ok());
    Ok(SearchResult {
        design: runs[best].design.clone(),
        min_average_loss: runs[best].min_average_loss,
        best_restart: best,
        total_evaluations: runs.iter().map(|r| r.n_evaluations).sum(),
        runs,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
