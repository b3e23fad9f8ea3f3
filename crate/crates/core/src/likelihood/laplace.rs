//! Posterior modes, curvature, and Laplace and Gauss–Hermite evidence.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::log_sum_exp;

/// Central finite-difference step in parameter space.
pub const HESSIAN_STEP: f64 = 1e-4;
/// Simplex convergence tolerance on the objective.
pub const MODE_TOL: f64 = 1e-8;
const MAX_SIMPLEX_ITERS: usize = 5000;
const NEWTON_POLISH_STEPS: usize = 3;
/// Default Gauss–Hermite points per dimension.
pub const DEFAULT_GH_POINTS: usize = 30;

/// Independent Gaussian prior on the (log-)parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPrior {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl GaussianPrior {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.sd)
            .zip(theta)
            .map(|((&m, &s), &x)| {
                let z = (x - m) / s;
                -0.5 * z * z - s.ln() - 0.5 * (2.0 * PI).ln()
            })
            .sum()
    }
}

/// Unnormalised log posterior over an unconstrained parameter vector.
pub trait LogTarget: Sync {
    fn prior(&self) -> &GaussianPrior;

    fn log_likelihood(&self, theta: &[f64]) -> f64;

    fn log_posterior(&self, theta: &[f64]) -> f64 {
        let lp = self.prior().log_density(theta);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        lp + self.log_likelihood(theta)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mode: Vec<f64>,
    /// Inverse of the negative log-posterior Hessian at the mode.
    pub cov: Vec<Vec<f64>>,
    pub log_posterior_at_mode: f64,
    pub converged: bool,
    /// Diagonal jitter added to make the Hessian positive definite (0 when none was needed).
    pub repair: f64,
}

impl PosteriorSummary {
    pub fn cov_matrix(&self) -> Matrix<f64> {
        Matrix::from_rows(&self.cov).expect("square covariance")
    }

    fn require_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::Unconverged(format!(
                "mode {:?}, log posterior {}, Hessian repaired by {}",
                self.mode, self.log_posterior_at_mode, self.repair
            )))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvidenceMethod {
    Laplace,
    GaussHermite,
    ImportanceSampling,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceResult {
    pub log_value: f64,
    pub method: EvidenceMethod,
    /// Quadrature points or Monte Carlo draws (0 for Laplace).
    pub points: usize,
    /// Relative Monte Carlo standard error of the evidence, when sampled.
    pub rel_se: Option<f64>,
}

/// Nelder–Mead minimisation of `f` from `x0` with initial edge `step`.
pub fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, tol: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        simplex.push(x);
    }
    let mut fx: Vec<f64> = simplex.iter().map(|x| f(x)).collect();
    let blend = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(&a, &b)| a + t * (b - a)).collect() };
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| fx[a].total_cmp(&fx[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        fx = order.iter().map(|&i| fx[i]).collect();
        let spread = fx[n] - fx[0];
        if spread.is_finite() && spread <= tol {
            break;
        }
        let centroid: Vec<f64> =
            (0..n).map(|j| simplex[..n].iter().map(|x| x[j]).sum::<f64>() / n as f64).collect();
        let worst = simplex[n].clone();
        let reflected = blend(&centroid, &worst, -1.0);
        let fr = f(&reflected);
        if fr < fx[0] {
            let expanded = blend(&centroid, &worst, -2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                fx[n] = fe;
            } else {
                simplex[n] = reflected;
                fx[n] = fr;
            }
            continue;
        }
        if fr < fx[n - 1] {
            simplex[n] = reflected;
            fx[n] = fr;
            continue;
        }
        let (contracted, fc) = if fr < fx[n] {
            let c = blend(&centroid, &worst, -0.5);
            let fc = f(&c);
            (c, fc)
        } else {
            let c = blend(&centroid, &worst, 0.5);
            let fc = f(&c);
            (c, fc)
        };
        if fc < fx[n].min(fr) {
            simplex[n] = contracted;
            fx[n] = fc;
            continue;
        }
        for i in 1..=n {
            simplex[i] = blend(&simplex[0], &simplex[i], 0.5);
            fx[i] = f(&simplex[i]);
        }
    }
    let best = (0..=n).min_by(|&a, &b| fx[a].total_cmp(&fx[b])).expect("non-empty simplex");
    (simplex[best].clone(), fx[best])
}

/// Central-difference gradient and Hessian of `f` at `x`.
pub fn finite_difference_derivatives(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> (Vec<f64>, Matrix<f64>) {
    let n = x.len();
    let f0 = f(x);
    let at = |shifts: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(i, d) in shifts {
            y[i] += d;
        }
        f(&y)
    };
    let mut grad = vec![0.0; n];
    let mut hess = Matrix::zeros(n, n);
    for i in 0..n {
        let fp = at(&[(i, h)]);
        let fm = at(&[(i, -h)]);
        grad[i] = (fp - fm) / (2.0 * h);
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let v = (at(&[(i, h), (j, h)]) - at(&[(i, h), (j, -h)]) - at(&[(i, -h), (j, h)]) + at(&[(i, -h), (j, -h)]))
                / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    (grad, hess)
}

/// Start points: the prior mean and the mean shifted by +-1 and +-2 prior standard deviations.
fn starts(prior: &GaussianPrior) -> Vec<Vec<f64>> {
    [0.0, 1.0, -1.0, 2.0, -2.0]
        .iter()
        .map(|&k| prior.mean.iter().zip(&prior.sd).map(|(&m, &s)| m + k * s).collect())
        .collect()
}

/// Posterior mode by multi-start simplex search, polished by Newton steps,
/// with the covariance taken from the finite-difference Hessian.
pub fn posterior_mode_and_hessian(target: &dyn LogTarget) -> Result<PosteriorSummary> {
    let prior = target.prior();
    let p = prior.dim();
    let neg = |x: &[f64]| {
        let v = -target.log_posterior(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for x0 in starts(prior) {
        let step = prior.sd.iter().copied().fold(f64::INFINITY, f64::min).max(1e-3);
        let (x, fx) = nelder_mead(&neg, &x0, step, MODE_TOL, MAX_SIMPLEX_ITERS);
        if best.as_ref().is_none_or(|b| fx < b.1) {
            best = Some((x, fx));
        }
    }
    let (mut mode, mut fmode) = best.expect("at least one start");
    if !fmode.is_finite() {
        return Err(Error::ImpossibleData);
    }
    for _ in 0..NEWTON_POLISH_STEPS {
        let (g, h) = finite_difference_derivatives(&neg, &mode, HESSIAN_STEP);
        let Ok(delta) = h.solve(&Matrix::from_rows(&g.iter().map(|&v| vec![v]).collect::<Vec<_>>())?) else {
            break;
        };
        let cand: Vec<f64> = mode.iter().enumerate().map(|(i, &m)| m - delta[(i, 0)]).collect();
        let fc = neg(&cand);
        if fc < fmode {
            mode = cand;
            fmode = fc;
        } else {
            break;
        }
    }
    let (_, h) = finite_difference_derivatives(&neg, &mode, HESSIAN_STEP);
    let h = h.symmetrize();
    let mut repair = 0.0;
    let mut converged = h.cholesky().is_some();
    let mut h_used = h.clone();
    if !converged {
        let scale = (0..p).map(|i| h[(i, i)].abs()).fold(1e-8, f64::max);
        repair = 1e-8 * scale;
        loop {
            let mut trial = h.clone();
            for i in 0..p {
                trial[(i, i)] += repair;
            }
            if trial.cholesky().is_some() {
                h_used = trial;
                break;
            }
            repair *= 10.0;
        }
    }
    let cov = h_used.inverse()?.symmetrize();
    converged &= cov.cholesky().is_some();
    Ok(PosteriorSummary {
        mode,
        cov: (0..p).map(|i| cov.row(i).to_vec()).collect(),
        log_posterior_at_mode: -fmode,
        converged,
        repair,
    })
}

/// `(p/2) log(2 pi) + (1/2) log|Sigma| + log p(y | mode) + log p(mode)`.
pub fn laplace_evidence(summary: &PosteriorSummary) -> Result<EvidenceResult> {
    summary.require_converged()?;
    let p = summary.mode.len() as f64;
    let det = summary.cov_matrix().determinant();
    Ok(EvidenceResult {
        log_value: 0.5 * p * (2.0 * PI).ln() + 0.5 * det.ln() + summary.log_posterior_at_mode,
        method: EvidenceMethod::Laplace,
        points: 0,
        rel_se: None,
    })
}

/// Nodes and weights of the `q`-point rule for the weight `exp(-x^2)`.
pub fn hermite_rule(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; q];
    let mut w = vec![0.0; q];
    let m = q.div_ceil(2);
    let pim4 = PI.powf(-0.25);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * q as f64 + 1.0).sqrt() - 1.85575 * (2.0 * q as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (q as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=q {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / j as f64).sqrt() * p2 - ((j - 1) as f64 / j as f64).sqrt() * p3;
            }
            pp = (2.0 * q as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 3e-14 {
                break;
            }
        }
        x[i] = z;
        x[q - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[q - 1 - i] = w[i];
    }
    (x, w)
}

/// Evidence by a product Hermite rule under the kernel `N(mode, 2 Sigma)`.
pub fn gh_evidence(target: &dyn LogTarget, summary: &PosteriorSummary, q: usize) -> Result<EvidenceResult> {
    summary.require_converged()?;
    if q < 2 {
        return Err(Error::Config("Gauss-Hermite needs at least 2 points per dimension".into()));
    }
    let p = summary.mode.len();
    let kernel_cov = summary.cov_matrix().scale(2.0);
    let l = kernel_cov.cholesky().ok_or_else(|| Error::Unconverged("kernel covariance not positive definite".into()))?;
    let log_det_l: f64 = (0..p).map(|i| l[(i, i)].ln()).sum();
    let (nodes, weights) = hermite_rule(q);
    // Standard-normal rule: z = sqrt(2) x, weight w / sqrt(pi).
    let z1: Vec<f64> = nodes.iter().map(|x| x * 2f64.sqrt()).collect();
    let lw1: Vec<f64> = weights.iter().map(|w| (w / PI.sqrt()).ln()).collect();
    let total = q.pow(p as u32);
    let mut terms = Vec::with_capacity(total);
    let mut idx = vec![0usize; p];
    for _ in 0..total {
        let z: Vec<f64> = idx.iter().map(|&i| z1[i]).collect();
        let lw: f64 = idx.iter().map(|&i| lw1[i]).sum();
        let theta: Vec<f64> = (0..p).map(|i| summary.mode[i] + (0..=i).map(|j| l[(i, j)] * z[j]).sum::<f64>()).collect();
        let log_kernel = -0.5 * z.iter().map(|v| v * v).sum::<f64>() - 0.5 * p as f64 * (2.0 * PI).ln() - log_det_l;
        terms.push(lw + target.log_posterior(&theta) - log_kernel);
        for d in 0..p {
            idx[d] += 1;
            if idx[d] < q {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(EvidenceResult { log_value: log_sum_exp(&terms), method: EvidenceMethod::GaussHermite, points: total, rel_se: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Gaussian likelihood in theta with known mean and precision.
    struct Quadratic {
        prior: GaussianPrior,
        centre: Vec<f64>,
        precision: Vec<Vec<f64>>,
        log_scale: f64,
    }

    impl LogTarget for Quadratic {
        fn prior(&self) -> &GaussianPrior {
            &self.prior
        }
        fn log_likelihood(&self, t: &[f64]) -> f64 {
            let d: Vec<f64> = t.iter().zip(&self.centre).map(|(a, b)| a - b).collect();
            let mut q = 0.0;
            for i in 0..d.len() {
                for j in 0..d.len() {
                    q += d[i] * self.precision[i][j] * d[j];
                }
            }
            self.log_scale - 0.5 * q
        }
    }

    #[test]
    fn hermite_rule_integrates_polynomials() {
        for q in [2, 5, 30] {
            let (x, w) = hermite_rule(q);
            let m0: f64 = w.iter().sum();
            let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * 2.0 * x * x).sum::<f64>() / PI.sqrt();
            assert!((m0 - PI.sqrt()).abs() < 1e-12, "{q}");
            assert!((m2 - 1.0).abs() < 1e-12, "{q}");
        }
    }

    #[test]
    fn gaussian_mode_and_covariance_exact() {
        // Flat-ish prior times a correlated Gaussian: posterior precision = prior + likelihood.
        let t = Quadratic {
            prior: GaussianPrior { mean: vec![0.0, 0.0], sd: vec![1.0, 2.0] },
            centre: vec![0.7, -0.3],
            precision: vec![vec![4.0, 1.0], vec![1.0, 3.0]],
            log_scale: 0.0,
        };
        let s = posterior_mode_and_hessian(&t).unwrap();
        let prec = Matrix::from_rows(&[vec![5.0, 1.0], vec![1.0, 3.25]]).unwrap();
        let cov = prec.inverse().unwrap();
        // mode = prec^{-1} (L c)
        let lc = [4.0 * 0.7 + 1.0 * -0.3, 1.0 * 0.7 + 3.0 * -0.3];
        let mode = cov.mat_vec(&lc);
        for i in 0..2 {
            assert!((s.mode[i] - mode[i]).abs() < 1e-6, "{:?}", s.mode);
            for j in 0..2 {
                assert!((s.cov[i][j] - cov[(i, j)]).abs() < 1e-6);
            }
        }
        assert!(s.converged);
    }

    #[test]
    fn conjugate_normal_laplace_and_gh_exact() {
        // y | theta ~ N(theta, tau^2), theta ~ N(m, s^2): evidence N(y | m, s^2 + tau^2).
        let (m, s, tau, y) = (0.4, 0.8, 0.5, 1.3);
        let t = Quadratic {
            prior: GaussianPrior { mean: vec![m], sd: vec![s] },
            centre: vec![y],
            precision: vec![vec![1.0 / (tau * tau)]],
            log_scale: -(tau * (2.0 * PI).sqrt()).ln(),
        };
        let v: f64 = s * s + tau * tau;
        let exact = -0.5 * (y - m).powi(2) / v - 0.5 * (2.0 * PI * v).ln();
        let sum = posterior_mode_and_hessian(&t).unwrap();
        assert!((laplace_evidence(&sum).unwrap().log_value - exact).abs() < 1e-8);
        assert!((gh_evidence(&t, &sum, 30).unwrap().log_value - exact).abs() < 1e-8);
    }

    #[test]
    fn unit_likelihood_gives_unit_evidence() {
        let t = Quadratic {
            prior: GaussianPrior { mean: vec![-0.48], sd: vec![0.3] },
            centre: vec![0.0],
            precision: vec![vec![0.0]],
            log_scale: 0.0,
        };
        let s = posterior_mode_and_hessian(&t).unwrap();
        assert!((s.mode[0] + 0.48).abs() < 1e-6);
        assert!(laplace_evidence(&s).unwrap().log_value.abs() < 1e-8);
        assert!(gh_evidence(&t, &s, 30).unwrap().log_value.abs() < 1e-8);
    }

    /// Integrand equal to the N(mode, 2 Sigma) kernel makes every ratio one.
    struct KernelShaped(GaussianPrior);

    impl LogTarget for KernelShaped {
        fn prior(&self) -> &GaussianPrior {
            &self.0
        }
        fn log_likelihood(&self, _: &[f64]) -> f64 {
            0.0
        }
    }

    #[test]
    fn kernel_integrand_gives_unit_evidence() {
        let prior = GaussianPrior { mean: vec![0.3, -1.0], sd: vec![0.5 * 2f64.sqrt(), 2f64.sqrt()] };
        let t = KernelShaped(prior);
        let s = PosteriorSummary {
            mode: vec![0.3, -1.0],
            cov: vec![vec![0.25, 0.0], vec![0.0, 1.0]],
            log_posterior_at_mode: 0.0,
            converged: true,
            repair: 0.0,
        };
        for q in [2, 7, 30] {
            assert!(gh_evidence(&t, &s, q).unwrap().log_value.abs() < 1e-10);
        }
    }

    #[test]
    fn unconverged_summary_is_an_error() {
        let s = PosteriorSummary {
            mode: vec![0.0],
            cov: vec![vec![1.0]],
            log_posterior_at_mode: 0.0,
            converged: false,
            repair: 1.0,
        };
        assert!(matches!(laplace_evidence(&s), Err(Error::Unconverged(_))));
    }
}
