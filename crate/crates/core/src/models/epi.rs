//! Epidemic CTMCs (death, SI, SEI, SEI2) in a closed population.
//!
//! Only the infected count is observed. None of the models has a recovery
//! event, so I(t) is non-decreasing along every trajectory.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use super::gillespie::{advance, JumpProcess};
use super::ModelFamily;
use crate::design::{Design, PriorModelProbabilities};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

pub const DEFAULT_POPULATION: u32 = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EpiModelId {
    Death,
    SI,
    SEI,
    SEI2,
}

impl EpiModelId {
    pub const ALL: [EpiModelId; 4] = [EpiModelId::Death, EpiModelId::SI, EpiModelId::SEI, EpiModelId::SEI2];

    pub fn name(self) -> &'static str {
        match self {
            EpiModelId::Death => "death",
            EpiModelId::SI => "SI",
            EpiModelId::SEI => "SEI",
            EpiModelId::SEI2 => "SEI2",
        }
    }

    fn has_b2(self) -> bool {
        matches!(self, EpiModelId::SI | EpiModelId::SEI2)
    }

    fn has_exposed(self) -> bool {
        matches!(self, EpiModelId::SEI | EpiModelId::SEI2)
    }
}

/// Rates per day. `b2` and `gamma` are present only where the model uses them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpiParams {
    pub b1: f64,
    pub b2: Option<f64>,
    pub gamma: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpiState {
    pub s: u32,
    pub e: u32,
    pub i: u32,
}

impl EpiState {
    pub fn initial(n: u32) -> Self {
        Self { s: n, e: 0, i: 0 }
    }

    pub fn total(&self) -> u32 {
        self.s + self.e + self.i
    }
}

/// Log-normal `(location, scale)` where scale is the standard deviation of the log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogNormal {
    pub mu: f64,
    pub sigma: f64,
}

impl LogNormal {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Normal::new(self.mu, self.sigma).expect("valid normal").sample(rng).exp()
    }
}

/// Prior for one epidemic model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpiPrior {
    pub b1: LogNormal,
    pub b2: Option<LogNormal>,
    /// Rate of the exponential prior on gamma.
    pub gamma_rate: Option<f64>,
}

impl EpiPrior {
    /// Default priors; the second log-normal argument is the standard deviation of the log.
    pub fn default_for(model: EpiModelId) -> Self {
        let ln = |mu: f64, sigma: f64| LogNormal { mu, sigma };
        match model {
            EpiModelId::Death => EpiPrior { b1: ln(-0.48, 0.09), b2: None, gamma_rate: None },
            EpiModelId::SI => EpiPrior { b1: ln(-1.1, 0.16), b2: Some(ln(-4.5, 0.4)), gamma_rate: None },
            EpiModelId::SEI => EpiPrior { b1: ln(-0.54, 0.15), b2: None, gamma_rate: Some(0.01) },
            EpiModelId::SEI2 => EpiPrior { b1: ln(-1.34, 0.41), b2: Some(ln(-4.26, 0.25)), gamma_rate: Some(0.01) },
        }
    }

    /// Wider priors used by the two-model variant, given directly as log-scale standard deviations.
    pub fn two_model_for(model: EpiModelId) -> Self {
        let ln = |mu: f64, sigma: f64| LogNormal { mu, sigma };
        match model {
            EpiModelId::Death => EpiPrior { b1: ln(-0.48, 0.3), b2: None, gamma_rate: None },
            EpiModelId::SI => EpiPrior { b1: ln(-1.1, 0.4), b2: Some(ln(-4.5, 0.4f64.sqrt())), gamma_rate: None },
            other => Self::default_for(other),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> EpiParams {
        let b1 = self.b1.sample(rng);
        let b2 = self.b2.map(|p| p.sample(rng));
        let gamma = self.gamma_rate.map(|rate| Exp::new(rate).expect("positive rate").sample(rng));
        EpiParams { b1, b2, gamma }
    }
}

pub fn sample_epi_prior<R: Rng + ?Sized>(model: EpiModelId, rng: &mut R) -> EpiParams {
    EpiPrior::default_for(model).sample(rng)
}

/// Event 0 moves S to E (or straight to I without an exposed class); event 1 moves E to I.
pub struct EpiProcess {
    model: EpiModelId,
    b1: f64,
    b2: f64,
    gamma: f64,
}

impl EpiProcess {
    pub fn new(model: EpiModelId, theta: &EpiParams) -> Result<Self> {
        let b2 = if model.has_b2() {
            theta.b2.ok_or_else(|| Error::ModelDefinition(format!("{} needs b2", model.name())))?
        } else {
            0.0
        };
        let gamma = if model.has_exposed() {
            theta.gamma.ok_or_else(|| Error::ModelDefinition(format!("{} needs gamma", model.name())))?
        } else {
            0.0
        };
        for (name, v) in [("b1", theta.b1), ("b2", b2), ("gamma", gamma)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::ModelDefinition(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        Ok(Self { model, b1: theta.b1, b2, gamma })
    }
}

impl JumpProcess for EpiProcess {
    type State = EpiState;

    fn n_events(&self) -> usize {
        2
    }

    fn rates(&self, st: &EpiState, r: &mut [f64]) {
        let s = st.s as f64;
        r[0] = (self.b1 + self.b2 * st.i as f64) * s;
        r[1] = self.gamma * st.e as f64;
    }

    fn apply(&self, st: &mut EpiState, event: usize) {
        match (event, self.model.has_exposed()) {
            (0, true) => {
                st.s -= 1;
                st.e += 1;
            }
            (0, false) => {
                st.s -= 1;
                st.i += 1;
            }
            _ => {
                st.e -= 1;
                st.i += 1;
            }
        }
    }
}

/// Infected counts at every design time, realisation by realisation.
/// Each block of the design is one independent realisation observed at its (sorted) times.
pub fn simulate_epi<R: Rng + ?Sized>(
    model: EpiModelId,
    theta: &EpiParams,
    design: &Design,
    population: u32,
    rng: &mut R,
) -> Result<Vec<u32>> {
    check_time_blocks(design)?;
    let process = EpiProcess::new(model, theta)?;
    let mut rates = [0.0; 2];
    let mut out = Vec::with_capacity(design.n_coordinates());
    for block in &design.blocks {
        let mut state = EpiState::initial(population);
        let mut t = 0.0;
        for &r in block {
            advance(&process, &mut state, t, r, &mut rates, rng)?;
            t = r;
            out.push(state.i);
        }
    }
    Ok(out)
}

fn check_time_blocks(design: &Design) -> Result<()> {
    for block in &design.blocks {
        if block.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
            return Err(Error::InvalidDesign("observation times must be finite and >= 0".into()));
        }
        if block.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidDesign("observation times must be sorted".into()));
        }
    }
    Ok(())
}

/// A set of competing epidemic models observed through infected counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpiFamily {
    pub label: String,
    pub models: Vec<EpiModelId>,
    pub priors: Vec<EpiPrior>,
    pub population: u32,
    pub model_probs: PriorModelProbabilities,
}

impl EpiFamily {
    pub fn new(label: impl Into<String>, models: Vec<EpiModelId>, population: u32) -> Self {
        let k = models.len();
        Self {
            label: label.into(),
            priors: models.iter().map(|&m| EpiPrior::default_for(m)).collect(),
            models,
            population,
            model_probs: PriorModelProbabilities::uniform(k),
        }
    }

    /// Death, SI, SEI and SEI2 with N = 50.
    pub fn four_model() -> Self {
        Self::new("epi4", EpiModelId::ALL.to_vec(), DEFAULT_POPULATION)
    }

    /// Death and SI only, where exact likelihoods are tractable.
    pub fn two_model(population: u32) -> Self {
        let models = vec![EpiModelId::Death, EpiModelId::SI];
        let priors = models.iter().map(|&m| EpiPrior::two_model_for(m)).collect();
        Self { priors, ..Self::new("epi2", models, population) }
    }

    pub fn sample_params<R: Rng + ?Sized>(&self, model: usize, rng: &mut R) -> EpiParams {
        self.priors[model].sample(rng)
    }
}

impl ModelFamily for EpiFamily {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn n_models(&self) -> usize {
        self.models.len()
    }

    fn model_names(&self) -> Vec<String> {
        self.models.iter().map(|m| m.name().to_string()).collect()
    }

    fn default_priors(&self) -> PriorModelProbabilities {
        self.model_probs.clone()
    }

    fn feature_dim(&self, design: &Design) -> usize {
        design.n_coordinates()
    }

    fn check_design(&self, design: &Design) -> Result<()> {
        check_time_blocks(design)
    }

    fn simulate_features(&self, model: usize, design: &Design, rng: &mut StreamRng, out: &mut Vec<f64>) -> Result<()> {
        let theta = self.sample_params(model, rng);
        let counts = simulate_epi(self.models[model], &theta, design, self.population, rng)?;
        out.extend(counts.into_iter().map(f64::from));
        Ok(())
    }
}
