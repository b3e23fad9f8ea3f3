//! Run configuration: defaults, file loading, flag overrides and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use discrim::design::{Design, DesignSpace, Grid};
use discrim::loss::{EstimatorMethod, LossKind};
use discrim::optimize::SearchConfig;
use discrim::{Error, Result};

use crate::family::FamilyPreset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Workflow {
    Search,
    Evaluate,
    Sweep,
    AbcSweep,
    Validate,
    ValidateLikelihood,
}

impl Workflow {
    pub fn name(self) -> &'static str {
        match self {
            Workflow::Search => "search",
            Workflow::Evaluate => "evaluate",
            Workflow::Sweep => "sweep",
            Workflow::AbcSweep => "abc-sweep",
            Workflow::Validate => "validate",
            Workflow::ValidateLikelihood => "validate-likelihood",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvidenceChoice {
    Laplace,
    GaussHermite,
}

/// Sample sizes for every estimator and workflow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sizes {
    /// Training rows per model for classifier estimators.
    pub j_train: usize,
    /// Test rows per model for tree-test.
    pub j_test: usize,
    pub trees: usize,
    /// ABC reference rows per model.
    pub abc_rows: usize,
    pub abc_retain: usize,
    /// Fresh ABC query draws per model.
    pub abc_draws: usize,
    /// Prior-predictive draws per model for Bayes losses.
    pub bayes_draws: usize,
    /// Gauss-Hermite points per dimension.
    pub gh_points: usize,
    /// Prior draws per logistic evidence.
    pub is_draws: usize,
    pub validate_train: usize,
    pub validate_test: usize,
    pub validate_trees: usize,
    /// Datasets per model for likelihood validation.
    pub likelihood_datasets: usize,
    /// Repeated estimates per design in `evaluate`.
    pub repeats: usize,
}

impl Default for Sizes {
    fn default() -> Self {
        Self {
            j_train: 5000,
            j_test: 5000,
            trees: 100,
            abc_rows: 100_000,
            abc_retain: 2000,
            abc_draws: 500,
            bayes_draws: 200,
            gh_points: 30,
            is_draws: 10_000,
            validate_train: 10_000,
            validate_test: 10_000,
            validate_trees: 100,
            likelihood_datasets: 250,
            repeats: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSettings {
    pub p: usize,
    pub q: usize,
    pub restarts: usize,
}

impl Default for SearchSettings {
    fn default() -> Self {
        let d = SearchConfig::default();
        Self { p: d.p, q: d.q, restarts: d.restarts }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub workflow: Workflow,
    /// Family preset name, e.g. `epi4`, `epi2`, `macro`, `logistic-fe-equal`, `constant-k1`.
    pub family: String,
    /// Design-space preset; derived from the family and `n_points` when absent.
    pub space: Option<String>,
    /// Replaces the grid of every coordinate group.
    pub grid: Option<Vec<f64>>,
    pub n_points: usize,
    pub method: EstimatorMethod,
    /// Methods traced by sweeps; empty means `method` alone.
    pub methods: Vec<EstimatorMethod>,
    pub loss: LossKind,
    pub evidence: EvidenceChoice,
    pub sizes: Sizes,
    pub search: SearchSettings,
    /// Designs for `evaluate` and the validation workflows, as coordinate blocks.
    pub designs: Vec<Vec<Vec<f64>>>,
    /// Reuse a saved ABC reference table instead of simulating one.
    pub abc_table: Option<PathBuf>,
    /// Write the simulated ABC reference table under `tables/`.
    pub save_abc_table: bool,
    pub seed: u64,
    /// Upper bound on worker threads; results never depend on it.
    pub threads: Option<usize>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            workflow: Workflow::Search,
            family: "epi4".into(),
            space: None,
            grid: None,
            n_points: 1,
            method: EstimatorMethod::RfOob,
            methods: Vec::new(),
            loss: LossKind::ZeroOne,
            evidence: EvidenceChoice::Laplace,
            sizes: Sizes::default(),
            search: SearchSettings::default(),
            designs: Vec::new(),
            abc_table: None,
            save_abc_table: false,
            seed: 1,
            threads: None,
            out: PathBuf::from("out"),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub workflow: Option<Workflow>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub family: Option<String>,
    pub method: Option<EstimatorMethod>,
    pub loss: Option<LossKind>,
    pub n_points: Option<usize>,
    pub restarts: Option<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Flags beat file values, which beat defaults.
    pub fn resolve(file: Option<&Path>, flags: &Overrides) -> Result<Self> {
        let mut cfg = match file {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(flags);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.workflow {
            self.workflow = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.threads {
            self.threads = Some(v);
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
        if let Some(v) = &o.family {
            self.family = v.clone();
        }
        if let Some(v) = o.method {
            self.method = v;
        }
        if let Some(v) = o.loss {
            self.loss = v;
        }
        if let Some(v) = o.n_points {
            self.n_points = v;
        }
        if let Some(v) = o.restarts {
            self.search.restarts = v;
        }
    }

    pub fn methods(&self) -> Vec<EstimatorMethod> {
        if self.methods.is_empty() {
            vec![self.method]
        } else {
            self.methods.clone()
        }
    }

    pub fn family_preset(&self) -> Result<FamilyPreset> {
        FamilyPreset::parse(&self.family)
    }

    pub fn design_space(&self) -> Result<DesignSpace> {
        let mut space = match &self.space {
            Some(name) => DesignSpace::preset(name, self.n_points)?,
            None => self.family_preset()?.default_space(self.n_points)?,
        };
        if let Some(values) = &self.grid {
            let grid = Grid::new(values.clone())?;
            for g in &mut space.groups {
                g.grid = grid.clone();
            }
            space = DesignSpace::new(format!("{}-custom", space.name), space.groups, space.policy)?;
        }
        Ok(space)
    }

    pub fn design_list(&self) -> Vec<Design> {
        self.designs.iter().map(|b| Design::new(b.clone())).collect()
    }

    pub fn search_config(&self) -> SearchConfig {
        SearchConfig { p: self.search.p, q: self.search.q, restarts: self.search.restarts, policy: None }
    }

    pub fn validate(&self) -> Result<()> {
        let family = self.family_preset()?;
        let space = self.design_space()?;
        let s = &self.sizes;
        let sizes = [
            ("j_train", s.j_train),
            ("j_test", s.j_test),
            ("trees", s.trees),
            ("abc_rows", s.abc_rows),
            ("abc_retain", s.abc_retain),
            ("abc_draws", s.abc_draws),
            ("bayes_draws", s.bayes_draws),
            ("gh_points", s.gh_points),
            ("is_draws", s.is_draws),
            ("validate_train", s.validate_train),
            ("validate_test", s.validate_test),
            ("validate_trees", s.validate_trees),
            ("likelihood_datasets", s.likelihood_datasets),
            ("repeats", s.repeats),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("size '{name}' must be positive")));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        for m in self.methods() {
            m.check(self.loss)?;
            family.check_method(m)?;
        }
        match self.workflow {
            Workflow::Search => self.search_config().validate(&space)?,
            Workflow::Sweep | Workflow::AbcSweep => {
                if space.n_coordinates() != 1 {
                    return Err(Error::Config(format!(
                        "sweeps trace one coordinate; space '{}' has {}",
                        space.name,
                        space.n_coordinates()
                    )));
                }
                if self.workflow == Workflow::AbcSweep {
                    family.check_method(EstimatorMethod::Abc)?;
                }
            }
            Workflow::Evaluate | Workflow::Validate | Workflow::ValidateLikelihood => {
                if self.designs.is_empty() {
                    return Err(Error::Config(format!("workflow '{}' needs at least one design", self.workflow.name())));
                }
                if self.workflow == Workflow::ValidateLikelihood {
                    family.check_method(EstimatorMethod::BayesOracle)?;
                }
            }
        }
        Ok(())
    }

    /// Canonical JSON without the fields that cannot change results.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.threads = None;
        c.out = PathBuf::new();
        serde_json::to_string(&c).expect("config serializes")
    }

    /// `<seed>-<first 12 hex digits of the config hash>`.
    pub fn run_id(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
        format!("{}-{hex}", self.seed)
    }
}
