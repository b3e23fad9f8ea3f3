//! Intracellular bacteria in macrophages: three per-cell CTMCs observed
//! through two microscopy samples at each observation time.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::gillespie::{advance, JumpProcess};
use super::ModelFamily;
use crate::design::{Design, PriorModelProbabilities};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::StreamRng;

pub const TOTAL_CELLS: usize = 200;
pub const DEFAULT_K_PLUS: usize = 10;
/// Candidate cells examined per requested infected cell before giving up on sample 2.
pub const CANDIDATE_CAP_FACTOR: usize = 200;
pub const MAX_PRIOR_PROPOSALS: u64 = 10_000_000;
pub const MAX_JITTER: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MacroModelId {
    HeterogeneousBacteria,
    HeterogeneousCells,
    Homogeneous,
}

impl MacroModelId {
    pub const ALL: [MacroModelId; 3] =
        [MacroModelId::HeterogeneousBacteria, MacroModelId::HeterogeneousCells, MacroModelId::Homogeneous];

    pub fn name(self) -> &'static str {
        match self {
            MacroModelId::HeterogeneousBacteria => "model1-heterogeneous-bacteria",
            MacroModelId::HeterogeneousCells => "model2-heterogeneous-cells",
            MacroModelId::Homogeneous => "model3-homogeneous",
        }
    }

    /// Parameter names in prior order.
    pub fn parameter_names(self) -> &'static [&'static str] {
        match self {
            MacroModelId::HeterogeneousBacteria => &["a", "b", "d", "delta", "eps", "p", "phi"],
            MacroModelId::HeterogeneousCells => &["a", "b", "d", "eps", "phi", "q"],
            MacroModelId::Homogeneous => &["a", "b", "d", "phi"],
        }
    }
}

/// Rates are per hour. Parameters a model does not use are zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MacroParams {
    pub phi: f64,
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub delta: f64,
    pub eps: f64,
    pub p: f64,
    pub q: f64,
}

impl MacroParams {
    fn from_vector(model: MacroModelId, x: &[f64]) -> Self {
        let mut th = MacroParams::default();
        for (&name, &v) in model.parameter_names().iter().zip(x) {
            match name {
                "a" => th.a = v,
                "b" => th.b = v,
                "d" => th.d = v,
                "delta" => th.delta = v,
                "eps" => th.eps = v,
                "p" => th.p = v,
                "phi" => th.phi = v,
                "q" => th.q = v,
                _ => unreachable!(),
            }
        }
        th
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [self.phi, self.a, self.b, self.d, self.delta, self.eps];
        if rates.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::ModelDefinition(format!("macrophage rates must be finite and >= 0: {self:?}")));
        }
        if !(0.0..=1.0).contains(&self.p) || !(0.0..=1.0).contains(&self.q) {
            return Err(Error::ModelDefinition(format!("proportions must lie in [0, 1]: {self:?}")));
        }
        Ok(())
    }
}

/// Multivariate normal truncated to a box, sampled by plain rejection.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedMvn {
    pub mean: Vec<f64>,
    pub chol: Matrix<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Diagonal jitter that was needed to make the covariance positive definite.
    pub jitter: f64,
}

impl TruncatedMvn {
    pub fn new(mean: Vec<f64>, cov: &Matrix<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let p = mean.len();
        if cov.rows() != p || cov.cols() != p || lower.len() != p || upper.len() != p {
            return Err(Error::PriorConfiguration("mean, covariance and bounds disagree in size".into()));
        }
        let mut jitter = 0.0;
        let chol = loop {
            let mut c = cov.clone();
            for i in 0..p {
                c[(i, i)] += jitter;
            }
            if let Some(l) = c.cholesky() {
                break l;
            }
            jitter = if jitter == 0.0 { 1e-12 } else { jitter * 10.0 };
            if jitter > MAX_JITTER {
                return Err(Error::PriorConfiguration("covariance is not positive definite".into()));
            }
        };
        Ok(Self { mean, chol, lower, upper, jitter })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let p = self.dim();
        let mut z = vec![0.0; p];
        let mut x = vec![0.0; p];
        for _ in 0..MAX_PRIOR_PROPOSALS {
            for zi in z.iter_mut() {
                *zi = rng.sample(StandardNormal);
            }
            for i in 0..p {
                x[i] = self.mean[i] + (0..=i).map(|k| self.chol[(i, k)] * z[k]).sum::<f64>();
            }
            if x.iter().zip(&self.lower).zip(&self.upper).all(|((&v, &lo), &hi)| v >= lo && v <= hi) {
                return Ok(x);
            }
        }
        Err(Error::PriorConfiguration(format!("no accepted draw after {MAX_PRIOR_PROPOSALS} proposals")))
    }
}

/// Prior for one macrophage model with its published moments.
pub fn macro_prior(model: MacroModelId) -> TruncatedMvn {
    let (mean, lower): (Vec<f64>, Vec<Vec<f64>>) = match model {
        MacroModelId::HeterogeneousBacteria => (
            vec![6.46, 1.54, 0.073, 2.529e-10, 0.035, 0.097, 0.25],
            vec![
                vec![32.8310],
                vec![0.6224, 0.0696],
                vec![0.1991, -0.0017, 0.0487],
                vec![0.1258, 0.0218, -0.0164, 0.0153],
                vec![0.0166, 0.0048, -0.0069, 0.0052, 0.0024],
                vec![0.2142, 0.0252, -0.0061, 0.0102, 0.0039, 0.0192],
                vec![-0.0101, 0.0001, -0.0029, 0.0018, 0.0011, 0.0018, 0.0030],
            ],
        ),
        MacroModelId::HeterogeneousCells => (
            vec![8.54221, 1.450254, 0.09111, 0.03, 0.25948, 0.266837],
            vec![
                vec![33.5250],
                vec![1.1380, 0.3586],
                vec![0.8252, -0.1213, 0.0952],
                vec![0.0253, 0.0077, -0.0023, 0.1067],
                vec![-0.1471, -0.0511, 0.0197, -0.0001, 0.0355],
                vec![0.9048, 0.1962, -0.0658, 0.0097, -0.0284, 0.2765],
            ],
        ),
        MacroModelId::Homogeneous => (
            vec![0.8161965, 0.52672325, 0.20740975, 0.3203258],
            vec![
                vec![0.7518],
                vec![0.1172, 0.0506],
                vec![0.0720, -0.0090, 0.0228],
                vec![0.0008, -0.0106, 0.0100, 0.0287],
            ],
        ),
    };
    let cov = Matrix::from_lower_triangle(&lower).expect("triangular rows");
    let names = model.parameter_names();
    let upper = names.iter().map(|&n| if n == "p" || n == "q" { 1.0 } else { f64::INFINITY }).collect();
    TruncatedMvn::new(mean, &cov, vec![0.0; names.len()], upper).expect("published covariance is usable")
}

pub fn sample_macro_prior<R: Rng + ?Sized>(model: MacroModelId, rng: &mut R) -> Result<MacroParams> {
    sample_from(model, &macro_prior(model), rng)
}

fn sample_from<R: Rng + ?Sized>(model: MacroModelId, prior: &TruncatedMvn, rng: &mut R) -> Result<MacroParams> {
    Ok(MacroParams::from_vector(model, &prior.sample(rng)?))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CellState {
    /// Replicating bacteria.
    pub r: u32,
    /// Non-replicating bacteria.
    pub d: u32,
}

impl CellState {
    pub fn total(&self) -> u32 {
        self.r + self.d
    }
}

/// One macrophage. Events: acquire R, acquire D, division, loss of R, loss of D, switch R to D.
#[derive(Clone, Copy, Debug)]
pub struct CellProcess {
    acq_r: f64,
    acq_d: f64,
    a: f64,
    b: f64,
    loss_r: f64,
    loss_d: f64,
    switch: f64,
}

impl CellProcess {
    /// `refractory` only matters for the heterogeneous-cells model.
    pub fn new(model: MacroModelId, th: &MacroParams, refractory: bool) -> Self {
        let mut c = CellProcess { acq_r: 0.0, acq_d: 0.0, a: th.a, b: th.b, loss_r: th.d, loss_d: 0.0, switch: 0.0 };
        match model {
            MacroModelId::HeterogeneousBacteria => {
                c.acq_r = th.phi * (1.0 - th.p);
                c.acq_d = th.phi * th.p;
                c.loss_d = th.eps;
                c.switch = th.delta;
            }
            MacroModelId::HeterogeneousCells if refractory => {
                c = CellProcess { acq_r: 0.0, acq_d: th.phi, a: 0.0, b: 0.0, loss_r: 0.0, loss_d: th.eps, switch: 0.0 };
            }
            MacroModelId::HeterogeneousCells | MacroModelId::Homogeneous => c.acq_r = th.phi,
        }
        c
    }

    /// The same cell once the antibiotic has stopped uptake.
    pub fn without_acquisition(&self) -> Self {
        CellProcess { acq_r: 0.0, acq_d: 0.0, ..*self }
    }
}

impl JumpProcess for CellProcess {
    type State = CellState;

    fn n_events(&self) -> usize {
        6
    }

    fn rates(&self, s: &CellState, out: &mut [f64]) {
        let r = s.r as f64;
        out[0] = self.acq_r;
        out[1] = self.acq_d;
        out[2] = if s.r > 0 { self.a * (-self.b * r).exp() * r } else { 0.0 };
        out[3] = self.loss_r * r;
        out[4] = self.loss_d * s.d as f64;
        out[5] = self.switch * r;
    }

    fn apply(&self, s: &mut CellState, event: usize) {
        match event {
            0 | 2 => s.r += 1,
            1 => s.d += 1,
            3 => s.r -= 1,
            4 => s.d -= 1,
            _ => {
                s.r -= 1;
                s.d += 1;
            }
        }
    }
}

/// Bacteria in one freshly drawn cell at absolute time `t`, with uptake during `[0, t_exp)`.
pub fn simulate_cell<R: Rng + ?Sized>(
    model: MacroModelId,
    th: &MacroParams,
    t_exp: f64,
    t: f64,
    rng: &mut R,
) -> Result<CellState> {
    let refractory = model == MacroModelId::HeterogeneousCells && rng.random::<f64>() < th.q;
    let uptake = CellProcess::new(model, th, refractory);
    let mut state = CellState::default();
    let mut rates = [0.0; 6];
    let t_switch = t_exp.min(t);
    advance(&uptake, &mut state, 0.0, t_switch, &mut rates, rng)?;
    if state.total() == 0 {
        // Nothing can happen to an empty cell once uptake has stopped.
        return Ok(state);
    }
    advance(&uptake.without_acquisition(), &mut state, t_switch, t, &mut rates, rng)?;
    Ok(state)
}

/// Data from one observation time.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacroObservation {
    /// Infected cells among the `S` cells of the first sample.
    pub infected: u32,
    /// Infected cells binned by bacteria count 1..=K+, the last bin holding K+ or more.
    pub histogram: Vec<u32>,
    /// Infected cells actually collected for the histogram (at most `S`).
    pub attained: u32,
}

/// Cells per sample: the cell budget split over `n` times and two samples each.
pub fn sample_size(n: usize) -> usize {
    TOTAL_CELLS / (2 * n.max(1))
}

fn check_macro_design(design: &Design) -> Result<(f64, &[f64])> {
    if design.blocks.len() != 2 || design.blocks[0].len() != 1 || design.blocks[1].is_empty() {
        return Err(Error::InvalidDesign("macrophage designs are (t_exp; t_obs...) with at least one time".into()));
    }
    let t_exp = design.blocks[0][0];
    let t_obs = &design.blocks[1][..];
    if t_obs.len() > TOTAL_CELLS / 2 {
        return Err(Error::InvalidDesign(format!("{} observation times leave no cells per sample", t_obs.len())));
    }
    if std::iter::once(t_exp).chain(t_obs.iter().copied()).any(|t| !(t >= 0.0) || !t.is_finite()) {
        return Err(Error::InvalidDesign("macrophage times must be finite and >= 0".into()));
    }
    Ok((t_exp, t_obs))
}

/// Observation times are measured from the end of exposure.
pub fn simulate_macro<R: Rng + ?Sized>(
    model: MacroModelId,
    th: &MacroParams,
    design: &Design,
    k_plus: usize,
    rng: &mut R,
) -> Result<Vec<MacroObservation>> {
    th.validate()?;
    let (t_exp, t_obs) = check_macro_design(design)?;
    let s = sample_size(t_obs.len());
    let mut out = Vec::with_capacity(t_obs.len());
    for &t_rel in t_obs {
        let t = t_exp + t_rel;
        let mut infected = 0;
        for _ in 0..s {
            if simulate_cell(model, th, t_exp, t, rng)?.total() > 0 {
                infected += 1;
            }
        }
        let mut histogram = vec![0u32; k_plus];
        let mut attained = 0;
        for _ in 0..CANDIDATE_CAP_FACTOR * s {
            if attained as usize == s {
                break;
            }
            let total = simulate_cell(model, th, t_exp, t, rng)?.total() as usize;
            if total > 0 {
                histogram[total.min(k_plus) - 1] += 1;
                attained += 1;
            }
        }
        out.push(MacroObservation { infected, histogram, attained });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MacroFamily {
    pub k_plus: usize,
    pub model_probs: PriorModelProbabilities,
    priors: Vec<TruncatedMvn>,
}

impl MacroFamily {
    pub fn new(k_plus: usize) -> Self {
        Self {
            k_plus,
            model_probs: PriorModelProbabilities::uniform(3),
            priors: MacroModelId::ALL.iter().map(|&m| macro_prior(m)).collect(),
        }
    }

    pub fn prior(&self, model: usize) -> &TruncatedMvn {
        &self.priors[model]
    }
}

impl Default for MacroFamily {
    fn default() -> Self {
        Self::new(DEFAULT_K_PLUS)
    }
}

impl ModelFamily for MacroFamily {
    fn name(&self) -> String {
        "macro".into()
    }

    fn n_models(&self) -> usize {
        3
    }

    fn model_names(&self) -> Vec<String> {
        MacroModelId::ALL.iter().map(|m| m.name().to_string()).collect()
    }

    fn default_priors(&self) -> PriorModelProbabilities {
        self.model_probs.clone()
    }

    fn feature_dim(&self, design: &Design) -> usize {
        design.blocks.get(1).map_or(0, Vec::len) * (1 + self.k_plus)
    }

    fn check_design(&self, design: &Design) -> Result<()> {
        check_macro_design(design).map(|_| ())
    }

    fn simulate_features(&self, model: usize, design: &Design, rng: &mut StreamRng, out: &mut Vec<f64>) -> Result<()> {
        let id = MacroModelId::ALL[model];
        let th = sample_from(id, &self.priors[model], rng)?;
        for obs in simulate_macro(id, &th, design, self.k_plus, rng)? {
            out.push(obs.infected as f64);
            out.extend(obs.histogram.iter().map(|&h| h as f64));
        }
        Ok(())
    }
}
