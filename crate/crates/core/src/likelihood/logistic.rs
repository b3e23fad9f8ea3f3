//! Prior-sampling evidence for fixed-effects logistic models.

use rand::Rng;

use super::laplace::{EvidenceMethod, EvidenceResult};
use crate::models::logistic::{fe_log_likelihood, sample_beta, LogisticModel};
use crate::scalar::log_sum_exp;

/// Mean likelihood over `s` prior draws, with its relative standard error.
pub fn is_evidence_logistic<R: Rng + ?Sized>(model: &LogisticModel, x: &[f64], y: &[u8], s: usize, rng: &mut R) -> EvidenceResult {
    if y.is_empty() {
        return EvidenceResult { log_value: 0.0, method: EvidenceMethod::ImportanceSampling, points: s, rel_se: Some(0.0) };
    }
    let ll: Vec<f64> = (0..s).map(|_| fe_log_likelihood(model, &sample_beta(rng), x, y)).collect();
    let log_mean = log_sum_exp(&ll) - (s as f64).ln();
    // Second moment relative to the squared mean gives the coefficient of variation of one draw.
    let doubled: Vec<f64> = ll.iter().map(|v| 2.0 * v).collect();
    let log_m2 = log_sum_exp(&doubled) - (s as f64).ln();
    let cv2 = ((log_m2 - 2.0 * log_mean).exp() - 1.0).max(0.0);
    EvidenceResult {
        log_value: log_mean,
        method: EvidenceMethod::ImportanceSampling,
        points: s,
        rel_se: Some((cv2 / s as f64).sqrt()),
    }
}
