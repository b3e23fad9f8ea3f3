//! Sixteen logistic regression models indexed by which of four predictors they include.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ModelFamily;
use crate::design::{Design, PriorModelProbabilities};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

pub const N_PREDICTORS: usize = 4;
pub const N_MODELS: usize = 1 << N_PREDICTORS;
/// Observations per group under the random-effects structure.
pub const RE_GROUP_SIZE: usize = 6;
pub const BETA_BOUNDS: [(f64, f64); 5] = [(-3.0, 3.0), (4.0, 10.0), (5.0, 11.0), (-6.0, 0.0), (-2.5, 3.5)];
/// Upper limits of the triangular priors on the random-effect bounds.
pub const ZETA_UPPER: [f64; 5] = [3.0, 3.0, 3.0, 1.0, 1.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Structure {
    FE,
    RE,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelPrior {
    Equal,
    Multiplicity,
}

/// Inclusion indicators; model index `m = sum_a v_a 2^(a-1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LogisticModel {
    pub v: [bool; N_PREDICTORS],
}

impl LogisticModel {
    pub fn from_index(m: usize) -> Self {
        assert!(m < N_MODELS);
        let mut v = [false; N_PREDICTORS];
        for (a, slot) in v.iter_mut().enumerate() {
            *slot = m >> a & 1 == 1;
        }
        Self { v }
    }

    pub fn index(&self) -> usize {
        self.v.iter().enumerate().map(|(a, &on)| (on as usize) << a).sum()
    }

    pub fn size(&self) -> usize {
        self.v.iter().filter(|&&on| on).count()
    }

    pub fn name(&self) -> String {
        let s: String = self.v.iter().map(|&on| if on { '1' } else { '0' }).collect();
        format!("v{s}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub beta: [f64; 5],
    /// Random-effect bounds; empty under the fixed-effects structure.
    pub zeta: Vec<f64>,
    /// `gamma[i][a]` for group `i`; empty under the fixed-effects structure.
    pub gamma: Vec<[f64; 5]>,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn model_prior_probs(prior: ModelPrior) -> PriorModelProbabilities {
    match prior {
        ModelPrior::Equal => PriorModelProbabilities::uniform(N_MODELS),
        ModelPrior::Multiplicity => {
            let w: Vec<f64> = (0..N_MODELS)
                .map(|m| 1.0 / (5.0 * binomial(N_PREDICTORS, LogisticModel::from_index(m).size())))
                .collect();
            PriorModelProbabilities::from_weights(&w).expect("weights sum to one")
        }
    }
}

pub fn sample_beta<R: Rng + ?Sized>(rng: &mut R) -> [f64; 5] {
    let mut beta = [0.0; 5];
    for (b, &(lo, hi)) in beta.iter_mut().zip(&BETA_BOUNDS) {
        *b = rng.random_range(lo..hi);
    }
    beta
}

/// Parameters for `groups` groups; `structure` decides whether random effects are drawn.
pub fn sample_params<R: Rng + ?Sized>(structure: Structure, groups: usize, rng: &mut R) -> LogisticParams {
    let beta = sample_beta(rng);
    if structure == Structure::FE {
        return LogisticParams { beta, zeta: Vec::new(), gamma: Vec::new() };
    }
    // Inverse CDF of the triangular density 2(U - z)/U^2 on (0, U).
    let zeta: Vec<f64> = ZETA_UPPER.iter().map(|&u| u * (1.0 - (1.0 - rng.random::<f64>()).sqrt())).collect();
    let gamma = (0..groups)
        .map(|_| {
            let mut g = [0.0; 5];
            for (gi, &z) in g.iter_mut().zip(&zeta) {
                *gi = if z > 0.0 { rng.random_range(-z..z) } else { 0.0 };
            }
            g
        })
        .collect();
    LogisticParams { beta, zeta, gamma }
}

pub fn sample_logistic_model_and_params<R: Rng + ?Sized>(
    structure: Structure,
    prior: ModelPrior,
    groups: usize,
    rng: &mut R,
) -> (LogisticModel, LogisticParams) {
    let m = model_prior_probs(prior).sample(rng);
    (LogisticModel::from_index(m), sample_params(structure, groups, rng))
}

fn check_logistic_design(design: &Design) -> Result<usize> {
    let n4 = design.n_coordinates();
    if n4 % N_PREDICTORS != 0 {
        return Err(Error::InvalidDesign(format!("{n4} covariates is not a multiple of {N_PREDICTORS}")));
    }
    Ok(n4 / N_PREDICTORS)
}

/// Linear predictor for observation `o`; covariate `a` of observation `o` is coordinate `4o + a`.
pub fn linear_predictor(model: &LogisticModel, th: &LogisticParams, x: &[f64], o: usize, group_size: usize) -> f64 {
    let g = th.gamma.get(o / group_size.max(1));
    let mut eta = th.beta[0] + g.map_or(0.0, |g| g[0]);
    for a in 0..N_PREDICTORS {
        if model.v[a] {
            eta += (th.beta[a + 1] + g.map_or(0.0, |g| g[a + 1])) * x[N_PREDICTORS * o + a];
        }
    }
    eta
}

pub fn inv_logit(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

pub fn simulate_logistic<R: Rng + ?Sized>(
    model: &LogisticModel,
    th: &LogisticParams,
    design: &Design,
    group_size: usize,
    rng: &mut R,
) -> Result<Vec<u8>> {
    let n = check_logistic_design(design)?;
    let x: Vec<f64> = design.coordinates().collect();
    Ok((0..n)
        .map(|o| (rng.random::<f64>() < inv_logit(linear_predictor(model, th, &x, o, group_size))) as u8)
        .collect())
}

/// Fixed-effects log-likelihood of a binary response vector.
pub fn fe_log_likelihood(model: &LogisticModel, beta: &[f64; 5], x: &[f64], y: &[u8]) -> f64 {
    let th = LogisticParams { beta: *beta, zeta: Vec::new(), gamma: Vec::new() };
    y.iter()
        .enumerate()
        .map(|(o, &yo)| {
            let eta = linear_predictor(model, &th, x, o, 1);
            // log p = -log(1 + e^-eta), log(1 - p) = -log(1 + e^eta), computed stably.
            let s = if yo == 1 { -eta } else { eta };
            -(s.max(0.0) + (-s.abs()).exp().ln_1p())
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticFamily {
    pub structure: Structure,
    pub prior: ModelPrior,
    pub group_size: usize,
}

impl LogisticFamily {
    pub fn new(structure: Structure, prior: ModelPrior) -> Self {
        Self { structure, prior, group_size: RE_GROUP_SIZE }
    }

    fn groups(&self, n: usize) -> usize {
        match self.structure {
            Structure::FE => 1,
            Structure::RE => n.div_ceil(self.group_size),
        }
    }
}

impl ModelFamily for LogisticFamily {
    fn name(&self) -> String {
        let s = match self.structure {
            Structure::FE => "fe",
            Structure::RE => "re",
        };
        let p = match self.prior {
            ModelPrior::Equal => "equal",
            ModelPrior::Multiplicity => "multiplicity",
        };
        format!("logistic-{s}-{p}")
    }

    fn n_models(&self) -> usize {
        N_MODELS
    }

    fn model_names(&self) -> Vec<String> {
        (0..N_MODELS).map(|m| LogisticModel::from_index(m).name()).collect()
    }

    fn default_priors(&self) -> PriorModelProbabilities {
        model_prior_probs(self.prior)
    }

    fn feature_dim(&self, design: &Design) -> usize {
        design.n_coordinates() / N_PREDICTORS
    }

    fn check_design(&self, design: &Design) -> Result<()> {
        if design.coordinates().any(|x| !(-1.0..=1.0).contains(&x)) {
            return Err(Error::InvalidDesign("covariates must lie in [-1, 1]".into()));
        }
        check_logistic_design(design).map(|_| ())
    }

    fn simulate_features(&self, model: usize, design: &Design, rng: &mut StreamRng, out: &mut Vec<f64>) -> Result<()> {
        let n = check_logistic_design(design)?;
        let th = sample_params(self.structure, self.groups(n), rng);
        let y = simulate_logistic(&LogisticModel::from_index(model), &th, design, self.group_size, rng)?;
        out.extend(y.into_iter().map(f64::from));
        Ok(())
    }
}
