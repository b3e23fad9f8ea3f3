//! Exact likelihoods of the death and SI epidemics observed through susceptible counts.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::expm::{clamp_negatives, expm, matrix_exp, TransitionMatrix};
use super::laplace::{GaussianPrior, LogTarget};
use crate::design::Design;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::models::epi::{EpiModelId, EpiPrior};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExactModel {
    Death,
    SI,
}

impl ExactModel {
    pub fn from_epi(m: EpiModelId) -> Result<Self> {
        match m {
            EpiModelId::Death => Ok(ExactModel::Death),
            EpiModelId::SI => Ok(ExactModel::SI),
            other => Err(Error::Config(format!("no exact likelihood for the {} model", other.name()))),
        }
    }

    pub fn n_params(self) -> usize {
        match self {
            ExactModel::Death => 1,
            ExactModel::SI => 2,
        }
    }
}

/// `ln C(n, k)` for `k <= n`.
fn ln_choose(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

fn ln_death_transition(from: u32, to: u32, b1: f64, dt: f64) -> f64 {
    if to > from {
        return f64::NEG_INFINITY;
    }
    let deaths = from - to;
    if deaths == 0 {
        return -(to as f64) * b1 * dt;
    }
    if dt == 0.0 {
        return f64::NEG_INFINITY;
    }
    // Survival p = exp(-b1 dt); log(1 - p) via expm1 for accuracy at small dt.
    ln_choose(from, to) - to as f64 * b1 * dt + deaths as f64 * (-(-b1 * dt).exp_m1()).ln()
}

/// `P(S(t + dt) = to | S(t) = from)` for the death model.
pub fn death_transition_prob(from: u32, to: u32, b1: f64, dt: f64) -> f64 {
    ln_death_transition(from, to, b1, dt).exp()
}

/// Generator on states `0..=n` of susceptibles; state `i` falls to `i - 1` at rate `(b1 + b2 (n - i)) i`.
pub fn si_generator(b1: f64, b2: f64, n: u32) -> Matrix<f64> {
    si_generator_block(b1, b2, n, 0)
}

/// Trailing block of the generator over states `lo..=n`; row `r` is state `lo + r`.
fn si_generator_block(b1: f64, b2: f64, n: u32, lo: u32) -> Matrix<f64> {
    let size = (n - lo + 1) as usize;
    let mut g = Matrix::zeros(size, size);
    for r in 0..size {
        let i = lo as f64 + r as f64;
        let rate = (b1 + b2 * (n as f64 - i)) * i;
        g[(r, r)] = -rate;
        if r > 0 {
            g[(r, r - 1)] = rate;
        }
    }
    g
}

/// Transition matrix of the SI chain over `dt`.
pub fn si_transition_matrix(b1: f64, b2: f64, n: u32, dt: f64) -> Result<TransitionMatrix> {
    matrix_exp(&si_generator(b1, b2, n), dt)
}

/// Susceptible counts, one vector per realisation, aligned with the design blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct EpiObservations {
    pub population: u32,
    pub design: Design,
    pub susceptible: Vec<Vec<u32>>,
}

impl EpiObservations {
    pub fn new(population: u32, design: Design, susceptible: Vec<Vec<u32>>) -> Result<Self> {
        if susceptible.len() != design.blocks.len()
            || susceptible.iter().zip(&design.blocks).any(|(s, b)| s.len() != b.len())
        {
            return Err(Error::DimensionMismatch { expected: design.n_coordinates(), got: susceptible.iter().map(Vec::len).sum() });
        }
        if susceptible.iter().flatten().any(|&s| s > population) {
            return Err(Error::Config(format!("susceptible count above the population {population}")));
        }
        Ok(Self { population, design, susceptible })
    }

    /// From the infected counts emitted by the simulator (S = N - I).
    pub fn from_infected(population: u32, design: &Design, infected: &[f64]) -> Result<Self> {
        if infected.len() != design.n_coordinates() {
            return Err(Error::DimensionMismatch { expected: design.n_coordinates(), got: infected.len() });
        }
        let mut it = infected.iter();
        let susceptible = design
            .blocks
            .iter()
            .map(|b| b.iter().map(|_| population.saturating_sub(*it.next().expect("length checked") as u32)).collect())
            .collect();
        Self::new(population, design.clone(), susceptible)
    }

    /// Smallest susceptible count across realisations.
    fn floor(&self) -> u32 {
        self.susceptible.iter().flatten().copied().min().unwrap_or(self.population)
    }

    /// `(from, to, dt)` for every observed interval, starting from S(0) = N.
    fn intervals(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.design.blocks.iter().zip(&self.susceptible).flat_map(move |(times, s)| {
            let mut prev = (self.population, 0.0);
            times.iter().zip(s).map(move |(&t, &si)| {
                let out = (prev.0, si, t - prev.1);
                prev = (si, t);
                out
            })
        })
    }
}

/// Log-likelihood at natural-scale rates; increasing susceptible counts give `-inf`.
pub fn log_likelihood(model: ExactModel, b1: f64, b2: f64, obs: &EpiObservations) -> Result<f64> {
    if obs.intervals().any(|(from, to, _)| to > from) {
        return Ok(f64::NEG_INFINITY);
    }
    match model {
        ExactModel::Death => Ok(obs.intervals().map(|(from, to, dt)| ln_death_transition(from, to, b1, dt)).sum()),
        ExactModel::SI => {
            let lo = obs.floor();
            let g = si_generator_block(b1, b2, obs.population, lo);
            let mut cache: HashMap<u64, Matrix<f64>> = HashMap::new();
            let mut total = 0.0;
            for (from, to, dt) in obs.intervals() {
                if dt == 0.0 {
                    if from != to {
                        return Ok(f64::NEG_INFINITY);
                    }
                    continue;
                }
                let a = match cache.get(&dt.to_bits()) {
                    Some(a) => a,
                    None => {
                        let mut a = expm(&g.scale(dt));
                        clamp_negatives(&mut a)?;
                        cache.entry(dt.to_bits()).or_insert(a)
                    }
                };
                let p = a[((from - lo) as usize, (to - lo) as usize)];
                if p <= 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                total += p.ln();
            }
            Ok(total)
        }
    }
}

/// Log-posterior target over log-rates with the Gaussian priors of the epidemic family.
pub struct EpiTarget<'a> {
    pub model: ExactModel,
    pub obs: &'a EpiObservations,
    prior: GaussianPrior,
}

impl<'a> EpiTarget<'a> {
    pub fn new(model: ExactModel, prior: &EpiPrior, obs: &'a EpiObservations) -> Result<Self> {
        let mut mean = vec![prior.b1.mu];
        let mut sd = vec![prior.b1.sigma];
        if model == ExactModel::SI {
            let b2 = prior.b2.ok_or_else(|| Error::PriorConfiguration("SI prior needs b2".into()))?;
            mean.push(b2.mu);
            sd.push(b2.sigma);
        }
        Ok(Self { model, obs, prior: GaussianPrior { mean, sd } })
    }
}

impl LogTarget for EpiTarget<'_> {
    fn prior(&self) -> &GaussianPrior {
        &self.prior
    }

    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        let b1 = theta[0].exp();
        let b2 = theta.get(1).map_or(0.0, |v| v.exp());
        if !b1.is_finite() || !b2.is_finite() {
            return f64::NEG_INFINITY;
        }
        log_likelihood(self.model, b1, b2, self.obs).unwrap_or(f64::NEG_INFINITY)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use rand::Rng;

    #[test]
    fn death_transition_edge_cases() {
        assert_eq!(death_transition_prob(10, 10, 0.62, 0.0), 1.0);
        assert_eq!(death_transition_prob(10, 9, 0.62, 0.0), 0.0);
        assert_eq!(death_transition_prob(3, 4, 0.62, 1.0), 0.0);
        let s: f64 = (0..=50).map(|k| death_transition_prob(50, k, 0.62, 1.0)).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generator_rows() {
        let g = si_generator(1.0, 1.0, 2);
        assert_eq!(g.row(0), &[0.0, 0.0, 0.0]);
        assert_eq!(g.row(1), &[2.0, -2.0, 0.0]);
        assert_eq!(g.row(2), &[0.0, 2.0, -2.0]);
        assert_eq!(si_generator(0.0, 0.0, 5), Matrix::zeros(6, 6));
        let mut rng = RngStream::new(1).rng();
        for _ in 0..10 {
            let g = si_generator(rng.random_range(0.01..2.0), rng.random_range(0.0..0.1), 50);
            for i in 0..=50 {
                assert!(g.row(i).iter().sum::<f64>().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn binomial_matches_matrix_exponential() {
        let b1 = 0.62;
        for dt in [0.5, 1.0, 2.0] {
            let a = si_transition_matrix(b1, 0.0, 50, dt).unwrap();
            for from in 0..=50u32 {
                for to in 0..=50u32 {
                    let d = (a.get(from as usize, to as usize) - death_transition_prob(from, to, b1, dt)).abs();
                    assert!(d <= 1e-10, "dt {dt} ({from}, {to}): {d}");
                }
            }
        }
    }

    #[test]
    fn transition_matrices_are_stochastic_and_semigroup() {
        let (b1, b2) = (0.33, 0.011);
        let a1 = si_transition_matrix(b1, b2, 50, 0.7).unwrap();
        let a2 = si_transition_matrix(b1, b2, 50, 1.9).unwrap();
        let a12 = si_transition_matrix(b1, b2, 50, 2.6).unwrap();
        for a in [&a1, &a2, &a12] {
            assert!(a.max_row_sum_error() < 1e-9);
            assert!(a.0.as_slice().iter().all(|&v| v >= 0.0));
        }
        assert!(a1.0.matmul(&a2.0).sub(&a12.0).frobenius() < 1e-8);
    }

    #[test]
    fn block_exponential_matches_full() {
        let (b1, b2, n, lo) = (0.4, 0.02, 50u32, 20u32);
        let full = si_transition_matrix(b1, b2, n, 1.3).unwrap();
        let block = expm(&si_generator_block(b1, b2, n, lo).scale(1.3));
        for i in lo..=n {
            for j in lo..=i {
                let d = full.get(i as usize, j as usize) - block[((i - lo) as usize, (j - lo) as usize)];
                assert!(d.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn likelihood_cases() {
        let empty = EpiObservations::new(50, Design::new(vec![]), vec![]).unwrap();
        assert_eq!(log_likelihood(ExactModel::SI, 0.3, 0.01, &empty).unwrap(), 0.0);
        let one = EpiObservations::new(50, Design::single(vec![1.5]), vec![vec![31]]).unwrap();
        let ll = log_likelihood(ExactModel::Death, 0.6, 0.0, &one).unwrap();
        assert!((ll - death_transition_prob(50, 31, 0.6, 1.5).ln()).abs() < 1e-12);
        let up = EpiObservations::new(50, Design::single(vec![1.0, 2.0]), vec![vec![30, 31]]).unwrap();
        assert_eq!(log_likelihood(ExactModel::Death, 0.6, 0.0, &up).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn si_with_zero_b2_equals_death() {
        let mut rng = RngStream::new(9).rng();
        for _ in 0..20 {
            let times = vec![0.5, 2.0, 4.5];
            let mut s = 50u32;
            let counts: Vec<u32> = times
                .iter()
                .map(|_| {
                    s -= rng.random_range(0..=s.min(15));
                    s
                })
                .collect();
            let obs = EpiObservations::new(50, Design::new(vec![times.clone(), vec![1.0]]), vec![counts, vec![40]]).unwrap();
            let b1 = rng.random_range(0.1..1.5);
            let d = log_likelihood(ExactModel::Death, b1, 0.0, &obs).unwrap();
            let si = log_likelihood(ExactModel::SI, b1, 0.0, &obs).unwrap();
            assert!((d - si).abs() < 1e-8, "{d} vs {si}");
        }
    }
}
