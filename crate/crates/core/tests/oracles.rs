//! Library results checked against independently coded oracles.

use discrim::design::{Design, PriorModelProbabilities};
use discrim::likelihood::{epi_log_evidence, EpiEvidence, EpiObservations, EpiPosterior};
use discrim::loss::{estimate_loss_oracle, LossKind};
use discrim::models::epi::{EpiFamily, EpiModelId};
use discrim::models::macrophage::{macro_prior, MacroModelId};
use discrim::models::ModelFamily;
use discrim::{Result, RngStream};
use rand::Rng;
use rand_distr::StandardNormal;

fn ln_choose(n: u32, k: u32) -> f64 {
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

fn log_sum(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Susceptible counts at the design times, starting from `n` at time zero.
fn susceptible_path(n: u32, times: &[f64], infected: &[f64]) -> Vec<(u32, u32, f64)> {
    let mut prev = (n, 0.0);
    let mut out = Vec::new();
    for (&t, &i) in times.iter().zip(infected) {
        let s = n - i as u32;
        out.push((prev.0, s, t - prev.1));
        prev = (s, t);
    }
    out
}

/// Death-model log evidence by the trapezoid rule over the log-rate.
fn death_evidence_quadrature(n: u32, times: &[f64], infected: &[f64], mu: f64, sigma: f64) -> f64 {
    let steps = 20_000;
    let (lo, hi) = (mu - 12.0 * sigma, mu + 12.0 * sigma);
    let h = (hi - lo) / steps as f64;
    let path = susceptible_path(n, times, infected);
    let terms: Vec<f64> = (0..=steps)
        .map(|i| {
            let u = lo + i as f64 * h;
            let b = u.exp();
            let ll: f64 = path
                .iter()
                .map(|&(a, s, dt)| {
                    let p = (-b * dt).exp();
                    ln_choose(a, s) + s as f64 * p.ln() + (a - s) as f64 * (1.0 - p).ln()
                })
                .sum();
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            ll - 0.5 * ((u - mu) / sigma).powi(2) + (w * h / (sigma * (2.0 * std::f64::consts::PI).sqrt())).ln()
        })
        .collect();
    log_sum(&terms)
}

#[test]
fn death_evidence_approximations_match_quadrature() {
    let fam = EpiFamily::two_model(50);
    let prior = fam.priors[0].b1;
    let mut rng = RngStream::new(17).rng();
    for case in 0..12 {
        let n_times = 1 + case % 3;
        let mut times: Vec<f64> = Vec::new();
        while times.len() < n_times {
            let t = rng.random_range(1..=20) as f64 * 0.5;
            if !times.contains(&t) {
                times.push(t);
            }
        }
        times.sort_by(f64::total_cmp);
        let design = Design::single(times.clone());
        let mut y = Vec::new();
        fam.simulate_features(0, &design, &mut rng, &mut y).unwrap();
        let obs = EpiObservations::from_infected(50, &design, &y).unwrap();
        let oracle = death_evidence_quadrature(50, &times, &y, prior.mu, prior.sigma);
        let laplace = epi_log_evidence(&fam, 0, &obs, EpiEvidence::Laplace).unwrap();
        let gh = epi_log_evidence(&fam, 0, &obs, EpiEvidence::GaussHermite(30)).unwrap();
        assert!(((laplace - oracle).exp() - 1.0).abs() < 0.05, "laplace {laplace} vs {oracle} at {times:?} {y:?}");
        assert!(((gh - oracle).exp() - 1.0).abs() < 1e-3, "gh {gh} vs {oracle} at {times:?} {y:?}");
    }
}

/// SI transition matrix by uniformisation, on susceptible states `0..=n`.
fn si_uniformised(b1: f64, b2: f64, n: u32, dt: f64) -> Vec<Vec<f64>> {
    let size = n as usize + 1;
    let rate = |i: usize| (b1 + b2 * (n as f64 - i as f64)) * i as f64;
    let lambda = (0..size).map(rate).fold(0.0, f64::max).max(1e-300);
    let lt = lambda * dt;
    // Row-vector iteration for each start state.
    let mut out = vec![vec![0.0; size]; size];
    for (start, row) in out.iter_mut().enumerate() {
        let mut v = vec![0.0; size];
        v[start] = 1.0;
        let mut weight = (-lt).exp();
        let kmax = (lt + 20.0 * lt.sqrt() + 60.0) as usize;
        for k in 0..=kmax {
            for (r, x) in row.iter_mut().zip(&v) {
                *r += weight * x;
            }
            let mut next = vec![0.0; size];
            for i in 0..size {
                let leave = rate(i) / lambda;
                next[i] += v[i] * (1.0 - leave);
                if i > 0 {
                    next[i - 1] += v[i] * leave;
                }
            }
            v = next;
            weight *= lt / (k + 1) as f64;
        }
    }
    out
}

/// Exact marginal probability of every susceptible path for both models of
/// the N = 5 toy at two observation times.
fn toy_enumeration(fam: &EpiFamily, times: [f64; 2]) -> Vec<([u32; 2], [f64; 2])> {
    let n = fam.population;
    let gauss_grid = |mu: f64, sigma: f64, m: usize| -> Vec<(f64, f64)> {
        let (lo, hi) = (mu - 9.0 * sigma, mu + 9.0 * sigma);
        let h = (hi - lo) / m as f64;
        (0..=m)
            .map(|i| {
                let u = lo + i as f64 * h;
                let w = if i == 0 || i == m { 0.5 } else { 1.0 };
                let dens = (-0.5 * ((u - mu) / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
                (u.exp(), w * h * dens)
            })
            .collect()
    };
    let paths: Vec<[u32; 2]> = (0..=n).flat_map(|a| (0..=a).map(move |b| [a, b])).collect();
    let mut probs = vec![[0.0; 2]; paths.len()];
    let d = fam.priors[0].b1;
    for (b, w) in gauss_grid(d.mu, d.sigma, 4000) {
        let p = |s0: u32, s1: u32, dt: f64| {
            let q = (-b * dt).exp();
            (ln_choose(s0, s1) + s1 as f64 * q.ln() + (s0 - s1) as f64 * (1.0 - q).ln()).exp()
        };
        for (path, pr) in paths.iter().zip(probs.iter_mut()) {
            pr[0] += w * p(n, path[0], times[0]) * p(path[0], path[1], times[1] - times[0]);
        }
    }
    let (s1, s2) = (fam.priors[1].b1, fam.priors[1].b2.unwrap());
    let g2 = gauss_grid(s2.mu, s2.sigma, 240);
    for (b1, w1) in gauss_grid(s1.mu, s1.sigma, 240) {
        for &(b2, w2) in &g2 {
            let m0 = si_uniformised(b1, b2, n, times[0]);
            let m1 = si_uniformised(b1, b2, n, times[1] - times[0]);
            for (path, pr) in paths.iter().zip(probs.iter_mut()) {
                pr[1] += w1 * w2 * m0[n as usize][path[0] as usize] * m1[path[0] as usize][path[1] as usize];
            }
        }
    }
    paths.into_iter().zip(probs).collect()
}

#[test]
fn toy_monte_carlo_bayes_loss_matches_enumeration() {
    let fam = EpiFamily::two_model(5);
    let times = [1.0, 3.0];
    let table = toy_enumeration(&fam, times);
    for m in 0..2 {
        let total: f64 = table.iter().map(|(_, p)| p[m]).sum();
        assert!((total - 1.0).abs() < 1e-6, "model {m} mass {total}");
    }
    let exact = 1.0 - table.iter().map(|(_, p)| 0.5 * p[0].max(p[1])).sum::<f64>();
    let design = Design::single(times.to_vec());
    let priors = PriorModelProbabilities::uniform(2);

    // Enumerated posteriors as the oracle.
    let lookup = |y: &[f64]| -> Result<Vec<f64>> {
        let s = [5 - y[0] as u32, 5 - y[1] as u32];
        let p = table.iter().find(|(path, _)| *path == s).expect("path enumerated").1;
        Ok(vec![p[0] / (p[0] + p[1]), p[1] / (p[0] + p[1])])
    };
    let mc = estimate_loss_oracle(&fam, &design, &lookup, LossKind::ZeroOne, 4000, &priors, RngStream::new(5)).unwrap();
    assert!((mc.value - exact).abs() <= 3.0 * mc.se, "{} +- {} vs {exact}", mc.value, mc.se);

    // Same draws through the Gauss-Hermite evidences.
    let gh = EpiPosterior::new(&fam, &design, EpiEvidence::GaussHermite(30)).unwrap();
    let est = estimate_loss_oracle(&fam, &design, &gh, LossKind::ZeroOne, 4000, &priors, RngStream::new(5)).unwrap();
    assert!((est.value - exact).abs() <= 3.0 * est.se, "{} +- {} vs {exact}", est.value, est.se);
}

/// Plain rejection sampler from the published moments, coded independently of the library.
fn rejection_mean(mean: &[f64], cov: &[Vec<f64>], upper_unit: &[bool], n: usize, seed: u64) -> Vec<f64> {
    let p = mean.len();
    let mut l = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..=i {
            let s: f64 = cov[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            l[i][j] = if i == j { s.max(1e-12).sqrt() } else { s / l[j][j] };
        }
    }
    let mut rng = RngStream::new(seed).rng();
    let mut acc = vec![0.0; p];
    let mut kept = 0;
    while kept < n {
        let z: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let x: Vec<f64> = (0..p).map(|i| mean[i] + (0..=i).map(|k| l[i][k] * z[k]).sum::<f64>()).collect();
        if x.iter().zip(upper_unit).all(|(&v, &u)| v >= 0.0 && (!u || v <= 1.0)) {
            acc.iter_mut().zip(&x).for_each(|(a, v)| *a += v);
            kept += 1;
        }
    }
    acc.iter().map(|a| a / n as f64).collect()
}

#[test]
fn macro_prior_means_match_rejection_oracle() {
    let n = 20_000;
    for model in MacroModelId::ALL {
        let prior = macro_prior(model);
        let p = prior.dim();
        // Recover the covariance from the factor only to feed the oracle's own factorisation.
        let cov: Vec<Vec<f64>> = (0..p)
            .map(|i| (0..p).map(|j| (0..p).map(|k| prior.chol[(i, k)] * prior.chol[(j, k)]).sum()).collect())
            .collect();
        let unit: Vec<bool> = prior.upper.iter().map(|&u| u == 1.0).collect();
        let oracle = rejection_mean(&prior.mean, &cov, &unit, n, 99);
        let mut rng = RngStream::new(3).rng();
        let mut acc = vec![0.0; p];
        for _ in 0..n {
            let x = prior.sample(&mut rng).unwrap();
            acc.iter_mut().zip(&x).for_each(|(a, v)| *a += v);
        }
        for i in 0..p {
            let mine = acc[i] / n as f64;
            // Two independent means of n draws: tolerance of 5 combined standard errors.
            let tol = 5.0 * (2.0 * cov[i][i] / n as f64).sqrt();
            assert!((mine - oracle[i]).abs() < tol, "{model:?} param {i}: {mine} vs {}", oracle[i]);
        }
    }
}

#[test]
fn single_model_family_has_zero_bayes_loss() {
    let fam = EpiFamily::new("death-only", vec![EpiModelId::Death], 50);
    let d = Design::single(vec![2.0]);
    let oracle = EpiPosterior::new(&fam, &d, EpiEvidence::Laplace).unwrap();
    let e = estimate_loss_oracle(&fam, &d, &oracle, LossKind::ZeroOne, 50, &fam.model_probs, RngStream::new(1)).unwrap();
    assert_eq!(e.value, 0.0);
}
