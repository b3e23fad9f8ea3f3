//! Family presets and the loss bindings they support.

use std::sync::Arc;

use discrim::abc::{AbcConfig, AbcLoss, ReferenceTable};
use discrim::design::DesignSpace;
use discrim::likelihood::{EpiBayesLoss, EpiEvidence, ExactModel, LogisticBayesLoss};
use discrim::loss::{ClassifierLoss, ClassifierSettings, EstimatorMethod, LossEvaluator};
use discrim::classify::forest::ForestConfig;
use discrim::models::epi::{EpiFamily, DEFAULT_POPULATION};
use discrim::models::logistic::{LogisticFamily, ModelPrior, Structure};
use discrim::models::macrophage::MacroFamily;
use discrim::models::{ConstantFamily, ModelFamily};
use discrim::{Error, Result};

use crate::config::{EvidenceChoice, RunConfig};

#[derive(Clone, Debug)]
pub enum FamilyPreset {
    Epi(EpiFamily),
    Macro(MacroFamily),
    Logistic(LogisticFamily),
    Constant(ConstantFamily),
}

impl FamilyPreset {
    pub fn parse(name: &str) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "unknown family '{name}' (expected epi4, epi2, macro, logistic-{{fe,re}}-{{equal,multiplicity}} or constant-k<K>)"
            ))
        };
        Ok(match name {
            "epi4" => FamilyPreset::Epi(EpiFamily::four_model()),
            "epi2" => FamilyPreset::Epi(EpiFamily::two_model(DEFAULT_POPULATION)),
            "macro" => FamilyPreset::Macro(MacroFamily::default()),
            _ => {
                if let Some(rest) = name.strip_prefix("logistic-") {
                    let (s, p) = rest.split_once('-').ok_or_else(bad)?;
                    let structure = match s {
                        "fe" => Structure::FE,
                        "re" => Structure::RE,
                        _ => return Err(bad()),
                    };
                    let prior = match p {
                        "equal" => ModelPrior::Equal,
                        "multiplicity" => ModelPrior::Multiplicity,
                        _ => return Err(bad()),
                    };
                    FamilyPreset::Logistic(LogisticFamily::new(structure, prior))
                } else if let Some(k) = name.strip_prefix("constant-k") {
                    let k: usize = k.parse().map_err(|_| bad())?;
                    if k == 0 {
                        return Err(bad());
                    }
                    FamilyPreset::Constant(ConstantFamily { k, value: 0.0 })
                } else {
                    return Err(bad());
                }
            }
        })
    }

    pub fn as_dyn(&self) -> Arc<dyn ModelFamily> {
        match self {
            FamilyPreset::Epi(f) => Arc::new(f.clone()),
            FamilyPreset::Macro(f) => Arc::new(f.clone()),
            FamilyPreset::Logistic(f) => Arc::new(f.clone()),
            FamilyPreset::Constant(f) => Arc::new(f.clone()),
        }
    }

    /// Space used when the configuration names none. For random-effects
    /// logistic families `n` counts groups rather than observations.
    pub fn default_space(&self, n: usize) -> Result<DesignSpace> {
        match self {
            FamilyPreset::Epi(f) if f.models.len() == 2 => DesignSpace::epi2(1, n),
            FamilyPreset::Epi(_) | FamilyPreset::Constant(_) => DesignSpace::epi4(n),
            FamilyPreset::Macro(_) => DesignSpace::macrophage(n),
            FamilyPreset::Logistic(f) => match f.structure {
                Structure::FE => DesignSpace::logistic(n),
                Structure::RE => DesignSpace::preset(&format!("logistic-re-G{n}"), n),
            },
        }
    }

    fn has_exact_likelihood(&self) -> bool {
        match self {
            FamilyPreset::Epi(f) => f.models.iter().all(|&m| ExactModel::from_epi(m).is_ok()),
            FamilyPreset::Logistic(f) => f.structure == Structure::FE,
            _ => false,
        }
    }

    pub fn check_method(&self, method: EstimatorMethod) -> Result<()> {
        match method {
            EstimatorMethod::BayesOracle if !self.has_exact_likelihood() => Err(Error::Config(
                "bayes losses and likelihood validation need a tractable likelihood: use epi2 or a logistic-fe family".into(),
            )),
            EstimatorMethod::Abc if !matches!(self, FamilyPreset::Epi(_)) => {
                Err(Error::Config("abc losses are only available for the epidemic families".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn epi_evidence(cfg: &RunConfig) -> EpiEvidence {
        match cfg.evidence {
            EvidenceChoice::Laplace => EpiEvidence::Laplace,
            EvidenceChoice::GaussHermite => EpiEvidence::GaussHermite(cfg.sizes.gh_points),
        }
    }

    /// Loss binding for one estimator. ABC needs the reference table.
    pub fn evaluator(
        &self,
        method: EstimatorMethod,
        cfg: &RunConfig,
        table: Option<&ReferenceTable>,
    ) -> Result<Box<dyn LossEvaluator>> {
        self.check_method(method)?;
        method.check(cfg.loss)?;
        let s = &cfg.sizes;
        Ok(match (method, self) {
            (EstimatorMethod::BayesOracle, FamilyPreset::Epi(f)) => Box::new(EpiBayesLoss {
                family: f.clone(),
                evidence: Self::epi_evidence(cfg),
                kind: cfg.loss,
                j: s.bayes_draws,
            }),
            (EstimatorMethod::BayesOracle, FamilyPreset::Logistic(f)) => {
                Box::new(LogisticBayesLoss { family: f.clone(), kind: cfg.loss, j: s.bayes_draws, draws: s.is_draws })
            }
            (EstimatorMethod::Abc, FamilyPreset::Epi(f)) => {
                let table = table.ok_or_else(|| Error::Config("abc loss needs a reference table".into()))?;
                Box::new(AbcLoss {
                    family: f.clone(),
                    table: table.clone(),
                    cfg: AbcConfig { retain: s.abc_retain, draws_per_model: s.abc_draws },
                    kind: cfg.loss,
                })
            }
            (EstimatorMethod::BayesOracle | EstimatorMethod::Abc, _) => unreachable!("rejected by check_method"),
            _ => {
                let mut loss = ClassifierLoss::new(self.as_dyn(), method, cfg.loss, s.j_train)?;
                loss.j_test = s.j_test;
                loss.settings = ClassifierSettings { forest: ForestConfig::with_trees(s.trees), ..Default::default() };
                Box::new(loss)
            }
        })
    }
}
