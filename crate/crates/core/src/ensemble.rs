//! Unsupervised ensemble predictors: majority vote, the spectral
//! meta-learner, the plug-in maximum-likelihood rule, and Dawid-Skene style
//! EM refinement.
//!
//! Ties resolve to +1 everywhere: labels_j = +1 iff scores_j >= 0.

use crate::accuracies::{clip_accuracies, AccuracyEstimates};
use crate::data::PredictionMatrix;
use crate::exec;
use crate::imbalance::PatternWeights;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("classifier {index} has psi or eta outside (0, 1); clip the estimates first")]
    UnclippedAccuracies { index: usize },
    #[error("truth vector contains a single class; balanced accuracy undefined")]
    OneClassOnly,
    #[error("prediction has {pred} entries but truth has {truth}")]
    LengthMismatch { pred: usize, truth: usize },
}

/// Per-instance labels plus the real-valued decision scores behind them.
#[derive(Debug, Clone)]
pub struct EnsemblePrediction {
    pub labels: Vec<i8>,
    pub scores: Vec<f64>,
}

impl EnsemblePrediction {
    fn from_scores(scores: Vec<f64>) -> Self {
        let labels = scores.iter().map(|&s| if s >= 0.0 { 1 } else { -1 }).collect();
        Self { labels, scores }
    }
}

/// Unweighted vote: scores_j = sum_i f_i(x_j).
pub fn majority_vote(z: &PredictionMatrix) -> EnsemblePrediction {
    let scores = exec::map_indexed(z.n(), |j| z.column(j).map(|e| e as f64).sum());
    EnsemblePrediction::from_scores(scores)
}

/// Spectral meta-learner: scores_j = sum_i f_i(x_j) v_i with a sign-resolved v.
pub fn sml_predict(z: &PredictionMatrix, v: &[f64]) -> EnsemblePrediction {
    assert_eq!(z.m(), v.len(), "weight vector length mismatch");
    let scores = exec::map_indexed(z.n(), |j| {
        z.column(j).zip(v).map(|(e, &w)| e as f64 * w).sum()
    });
    EnsemblePrediction::from_scores(scores)
}

/// Maximum-likelihood rule
/// scores_j = sum_i f_i(x_j) ln alpha_i + ln beta_i, with
/// alpha_i = psi eta / ((1-psi)(1-eta)) and beta_i = psi(1-psi)/(eta(1-eta)).
///
/// Serves as i-SML when `acc` comes from the unsupervised pipeline and as the
/// oracle ML rule when `acc` holds ground truth.
pub fn ml_predict(
    z: &PredictionMatrix,
    acc: &AccuracyEstimates,
) -> Result<EnsemblePrediction, EnsembleError> {
    assert_eq!(z.m(), acc.len(), "accuracy table length mismatch");
    let mut ln_alpha = vec![0.0; z.m()];
    let mut ln_beta_sum = 0.0;
    for i in 0..z.m() {
        let (p, e) = (acc.psi[i], acc.eta[i]);
        if !(0.0 < p && p < 1.0 && 0.0 < e && e < 1.0) {
            return Err(EnsembleError::UnclippedAccuracies { index: i });
        }
        ln_alpha[i] = (p * e / ((1.0 - p) * (1.0 - e))).ln();
        ln_beta_sum += (p * (1.0 - p) / (e * (1.0 - e))).ln();
    }
    let scores = exec::map_indexed(z.n(), |j| {
        // summing the two vote groups separately keeps exact ties at zero
        let mut pos = 0.0;
        let mut neg = 0.0;
        for (f, &la) in z.column(j).zip(&ln_alpha) {
            if f > 0 {
                pos += la;
            } else {
                neg += la;
            }
        }
        (pos - neg) + ln_beta_sum
    });
    Ok(EnsemblePrediction::from_scores(scores))
}

/// Options for [`em_refine`]. The stopping rule is an absolute improvement
/// threshold on the per-instance log-likelihood.
#[derive(Debug, Clone)]
pub struct EmOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Clipping floor applied to every M-step output.
    pub eps: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self { max_iter: 500, tol: 1e-8, eps: 1e-3 }
    }
}

/// Outcome of EM refinement.
#[derive(Debug, Clone)]
pub struct EmResult {
    pub acc: AccuracyEstimates,
    pub b: f64,
    /// E-steps performed.
    pub iterations: usize,
    /// Mean log-likelihood before each update; nondecreasing.
    pub log_likelihood_trace: Vec<f64>,
}

/// Two-class Dawid-Skene EM over the full likelihood, seeded by `init`
/// (typically the i-SML plug-in estimates).
pub fn em_refine(z: &PredictionMatrix, init: &AccuracyEstimates, opts: &EmOptions) -> EmResult {
    let pw = PatternWeights::from_matrix(z);
    em_refine_weighted(&pw, init, opts)
}

/// EM on weighted patterns. Weights may be counts (sample data) or exact
/// pattern probabilities (population fixed-point checks).
pub fn em_refine_weighted(
    pw: &PatternWeights,
    init: &AccuracyEstimates,
    opts: &EmOptions,
) -> EmResult {
    assert!(opts.max_iter >= 1);
    let m = pw.m();
    assert_eq!(init.len(), m, "init accuracy table length mismatch");
    let eps = opts.eps;
    let b_lo = 2.0 * eps - 1.0;
    let b_hi = 1.0 - 2.0 * eps;

    let start = clip_accuracies(init, eps);
    let mut psi = start.psi.clone();
    let mut eta = start.eta.clone();
    let mut b = init.b.clamp(b_lo, b_hi);

    let patterns = pw.patterns();
    let weights = pw.weights();
    let total = pw.total();

    let mut trace = Vec::new();
    let mut q = vec![0.0; patterns.len()];
    let mut iterations = 0;

    for it in 1..=opts.max_iter {
        iterations = it;
        // E-step: posterior of y = +1 per pattern, plus the current
        // mean log-likelihood
        let lp0 = ((1.0 + b) / 2.0).ln();
        let ln0 = ((1.0 - b) / 2.0).ln();
        let ln_psi: Vec<f64> = psi.iter().map(|p| p.ln()).collect();
        let ln_1m_psi: Vec<f64> = psi.iter().map(|p| (1.0 - p).ln()).collect();
        let ln_eta: Vec<f64> = eta.iter().map(|e| e.ln()).collect();
        let ln_1m_eta: Vec<f64> = eta.iter().map(|e| (1.0 - e).ln()).collect();
        let mut ll = 0.0;
        for (t, p) in patterns.iter().enumerate() {
            let mut lp = lp0;
            let mut ln = ln0;
            for i in 0..m {
                if p[i] > 0 {
                    lp += ln_psi[i];
                    ln += ln_1m_eta[i];
                } else {
                    lp += ln_1m_psi[i];
                    ln += ln_eta[i];
                }
            }
            let hi = lp.max(ln);
            let lse = hi + ((lp - hi).exp() + (ln - hi).exp()).ln();
            ll += weights[t] * lse;
            q[t] = 1.0 / (1.0 + (ln - lp).exp());
        }
        ll /= total;

        let improved = trace.last().map_or(f64::INFINITY, |&prev| ll - prev);
        trace.push(ll);
        if improved < opts.tol {
            break;
        }

        // M-step: closed-form box-constrained maximizers
        let q_sum: f64 = q.iter().zip(weights).map(|(qi, w)| qi * w).sum();
        let q_neg = total - q_sum;
        b = (2.0 * q_sum / total - 1.0).clamp(b_lo, b_hi);
        for i in 0..m {
            let mut pos = 0.0;
            let mut neg = 0.0;
            for (t, p) in patterns.iter().enumerate() {
                if p[i] > 0 {
                    pos += q[t] * weights[t];
                } else {
                    neg += (1.0 - q[t]) * weights[t];
                }
            }
            psi[i] = (pos / q_sum).clamp(eps, 1.0 - eps);
            eta[i] = (neg / q_neg).clamp(eps, 1.0 - eps);
        }
    }

    let acc = clip_accuracies(&AccuracyEstimates::exact(psi, eta, b), eps);
    EmResult { acc, b, iterations, log_likelihood_trace: trace }
}

/// Half the sum of the true-positive and true-negative rates.
pub fn balanced_accuracy_score(pred: &[i8], truth: &[i8]) -> Result<f64, EnsembleError> {
    if pred.len() != truth.len() {
        return Err(EnsembleError::LengthMismatch { pred: pred.len(), truth: truth.len() });
    }
    let mut pos = 0usize;
    let mut neg = 0usize;
    let mut tp = 0usize;
    let mut tn = 0usize;
    for (&p, &t) in pred.iter().zip(truth) {
        if t > 0 {
            pos += 1;
            if p > 0 {
                tp += 1;
            }
        } else {
            neg += 1;
            if p <= 0 {
                tn += 1;
            }
        }
    }
    if pos == 0 || neg == 0 {
        return Err(EnsembleError::OneClassOnly);
    }
    Ok(0.5 * (tp as f64 / pos as f64 + tn as f64 / neg as f64))
}
