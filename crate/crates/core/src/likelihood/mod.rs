//! Exact and approximate marginal likelihoods for the families where the
//! likelihood is tractable, and the posterior model probabilities they imply.

pub mod epi;
pub mod expm;
pub mod laplace;
pub mod logistic;

use serde::{Deserialize, Serialize};

pub use epi::{
    death_transition_prob, log_likelihood, si_generator, si_transition_matrix, EpiObservations, EpiTarget, ExactModel,
};
pub use expm::{expm, matrix_exp, TransitionMatrix};
pub use laplace::{
    gh_evidence, hermite_rule, laplace_evidence, posterior_mode_and_hessian, EvidenceMethod, EvidenceResult,
    GaussianPrior, LogTarget, PosteriorSummary, DEFAULT_GH_POINTS,
};
pub use logistic::is_evidence_logistic;

use crate::design::{Design, PriorModelProbabilities};
use crate::error::{Error, Result};
use crate::loss::{estimate_loss_oracle, LossEstimate, LossEvaluator, LossKind, PosteriorOracle};
use crate::models::epi::EpiFamily;
use crate::models::logistic::{LogisticModel, Structure, N_MODELS};
use crate::rng::RngStream;
use crate::scalar::log_sum_exp;

/// Normalised `p(y | m) p(m)` from log evidences.
pub fn posterior_model_probs(log_evidence: &[f64], priors: &PriorModelProbabilities) -> Result<Vec<f64>> {
    if log_evidence.len() != priors.k() {
        return Err(Error::DimensionMismatch { expected: priors.k(), got: log_evidence.len() });
    }
    let joint: Vec<f64> = log_evidence.iter().zip(priors.as_slice()).map(|(&e, &p)| e + p.ln()).collect();
    let norm = log_sum_exp(&joint);
    if !norm.is_finite() {
        return Err(Error::ImpossibleData);
    }
    Ok(joint.iter().map(|j| (j - norm).exp()).collect())
}

/// Evidence approximation for the epidemic models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpiEvidence {
    Laplace,
    /// Points per dimension.
    GaussHermite(usize),
}

/// Log evidence of one epidemic model for the observed data.
pub fn epi_log_evidence(family: &EpiFamily, model: usize, obs: &EpiObservations, method: EpiEvidence) -> Result<f64> {
    let exact = ExactModel::from_epi(family.models[model])?;
    let target = EpiTarget::new(exact, &family.priors[model], obs)?;
    let summary = posterior_mode_and_hessian(&target)?;
    Ok(match method {
        EpiEvidence::Laplace => laplace_evidence(&summary)?.log_value,
        EpiEvidence::GaussHermite(q) => gh_evidence(&target, &summary, q)?.log_value,
    })
}

/// Posterior model probabilities for the epidemic family at one design.
pub struct EpiPosterior<'a> {
    pub family: &'a EpiFamily,
    pub design: Design,
    pub method: EpiEvidence,
}

impl<'a> EpiPosterior<'a> {
    pub fn new(family: &'a EpiFamily, design: &Design, method: EpiEvidence) -> Result<Self> {
        for &m in &family.models {
            ExactModel::from_epi(m)?;
        }
        Ok(Self { family, design: design.clone(), method })
    }
}

impl PosteriorOracle for EpiPosterior<'_> {
    fn posterior(&self, y: &[f64]) -> Result<Vec<f64>> {
        let obs = EpiObservations::from_infected(self.family.population, &self.design, y)?;
        let ev = (0..self.family.models.len())
            .map(|m| epi_log_evidence(self.family, m, &obs, self.method))
            .collect::<Result<Vec<_>>>()?;
        posterior_model_probs(&ev, &self.family.model_probs)
    }
}

/// Prior-sampling posterior over the 16 fixed-effects logistic models.
/// Each data vector draws from a stream derived from the data itself, so
/// results do not depend on evaluation order.
pub struct LogisticPosterior {
    pub design: Design,
    pub draws: usize,
    pub priors: PriorModelProbabilities,
    pub stream: RngStream,
}

impl LogisticPosterior {
    pub fn new(structure: Structure, design: &Design, draws: usize, priors: PriorModelProbabilities, stream: RngStream) -> Result<Self> {
        if structure != Structure::FE {
            return Err(Error::Config("prior-sampling evidence is only available for the fixed-effects structure".into()));
        }
        Ok(Self { design: design.clone(), draws, priors, stream })
    }
}

impl PosteriorOracle for LogisticPosterior {
    fn posterior(&self, y: &[f64]) -> Result<Vec<f64>> {
        let x: Vec<f64> = self.design.coordinates().collect();
        let yb: Vec<u8> = y.iter().map(|&v| (v > 0.5) as u8).collect();
        let key = yb.iter().fold(0u64, |acc, &b| acc.wrapping_mul(3).wrapping_add(b as u64 + 1));
        let ev: Vec<f64> = (0..N_MODELS)
            .map(|m| {
                let mut rng = self.stream.path(&[key, m as u64]).rng();
                is_evidence_logistic(&LogisticModel::from_index(m), &x, &yb, self.draws, &mut rng).log_value
            })
            .collect();
        posterior_model_probs(&ev, &self.priors)
    }
}

/// Bayes-classifier loss for the epidemic family with approximate evidences.
#[derive(Clone, Debug)]
pub struct EpiBayesLoss {
    pub family: EpiFamily,
    pub evidence: EpiEvidence,
    pub kind: LossKind,
    /// Prior-predictive draws per model.
    pub j: usize,
}

impl LossEvaluator for EpiBayesLoss {
    fn evaluate(&self, design: &Design, stream: RngStream) -> Result<LossEstimate> {
        let oracle = EpiPosterior::new(&self.family, design, self.evidence)?;
        estimate_loss_oracle(&self.family, design, &oracle, self.kind, self.j, &self.family.model_probs, stream)
    }
}

/// Bayes-classifier loss for fixed-effects logistic models with prior-sampling evidence.
#[derive(Clone, Debug)]
pub struct LogisticBayesLoss {
    pub family: crate::models::logistic::LogisticFamily,
    pub kind: LossKind,
    pub j: usize,
    pub draws: usize,
}

impl LossEvaluator for LogisticBayesLoss {
    fn evaluate(&self, design: &Design, stream: RngStream) -> Result<LossEstimate> {
        use crate::models::ModelFamily;
        let priors = self.family.default_priors();
        let oracle = LogisticPosterior::new(self.family.structure, design, self.draws, priors.clone(), stream.split(1))?;
        estimate_loss_oracle(&self.family, design, &oracle, self.kind, self.j, &priors, stream.split(0))
    }
}
