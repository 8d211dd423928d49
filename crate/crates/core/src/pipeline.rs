//! End-to-end composition of the estimation stages: moments -> eigenvector
//! -> class imbalance -> per-classifier accuracies -> predictions.

use crate::accuracies::{clip_accuracies, psi_eta_from_b, AccuracyEstimates};
use crate::data::PredictionMatrix;
use crate::ensemble::{ml_predict, EnsemblePrediction};
use crate::imbalance::{
    alpha_least_squares, b_from_alpha, estimate_b_likelihood_from_patterns, ImbalanceError,
    ImbalanceEstimate, ImbalanceMethod, LikelihoodOptions, PatternWeights,
};
use crate::moments::{sample_covariance, sample_means, sample_tensor};
use crate::spectral::{estimate_v, SpectralVector};

/// Everything the estimation pipeline produces for one method.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub estimate: ImbalanceEstimate,
    /// Clipped plug-in accuracies at the estimated imbalance.
    pub acc: AccuracyEstimates,
    pub spectral: SpectralVector,
    pub mu: Vec<f64>,
}

/// Runs one imbalance estimator and derives the accuracy table from it.
pub fn estimate_accuracies(
    z: &PredictionMatrix,
    method: ImbalanceMethod,
    opts: &LikelihoodOptions,
) -> Result<PipelineOutput, ImbalanceError> {
    let mu = sample_means(z);
    let cov = sample_covariance(z)?;
    let sv = estimate_v(&cov)?;
    let estimate = match method {
        ImbalanceMethod::Tensor => {
            let tensor = sample_tensor(z);
            let alpha = alpha_least_squares(&tensor, &sv.v)?;
            ImbalanceEstimate {
                b: b_from_alpha(alpha).clamp(-1.0 + opts.delta, 1.0 - opts.delta),
                method: ImbalanceMethod::Tensor,
                alpha: Some(alpha),
                curve: None,
                delta: opts.delta,
            }
        }
        ImbalanceMethod::Likelihood => {
            let pw = PatternWeights::from_matrix(z);
            estimate_b_likelihood_from_patterns(&pw, &mu, &sv.v, opts)
        }
    };
    let raw = psi_eta_from_b(&mu, &sv.v, estimate.b)
        .expect("estimated b is clamped inside (-1, 1)");
    let acc = clip_accuracies(&raw, opts.eps);
    Ok(PipelineOutput { estimate, acc, spectral: sv, mu })
}

/// i-SML: the maximum-likelihood rule with unsupervised plug-in accuracies.
pub fn isml_predict(
    z: &PredictionMatrix,
    method: ImbalanceMethod,
    opts: &LikelihoodOptions,
) -> Result<(EnsemblePrediction, PipelineOutput), ImbalanceError> {
    let out = estimate_accuracies(z, method, opts)?;
    let pred = ml_predict(z, &out.acc).expect("pipeline accuracies are clipped");
    Ok((pred, out))
}
