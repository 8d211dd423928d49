//! Unsupervised estimation of classifier accuracies from unlabeled data.
//!
//! Given only an m x n matrix of binary predictions from m unknown
//! classifiers, this crate estimates each classifier's sensitivity and
//! specificity together with the class imbalance, and builds
//! maximum-likelihood ensemble predictors on top of those estimates --
//! no labels required.
//!
//! The estimators exploit the rank-one structure of the classifiers'
//! covariance matrix and third-order covariance tensor under conditional
//! independence:
//!
//! * [`spectral`] recovers the shared eigenvector from the covariance
//!   off-diagonals;
//! * [`imbalance`] pins down the class imbalance, either from the tensor
//!   (scalar least squares) or by a one-dimensional restricted-likelihood
//!   scan;
//! * [`accuracies`] converts (mean, eigenvector, imbalance) into
//!   per-classifier sensitivities and specificities;
//! * [`ensemble`] provides majority vote, the spectral meta-learner, the
//!   plug-in ML rule (i-SML), and EM refinement;
//! * [`multiclass`] handles K > 2 by one-vs-all reductions;
//! * [`simulation`] generates synthetic data and runs the experiment
//!   harnesses.
//!
//! With the default `parallel` feature the tensor accumulation, likelihood
//! scans and simulation trials run on rayon; results are bit-identical to
//! the sequential build for any thread count.

pub mod accuracies;
pub mod data;
pub mod ensemble;
pub mod exec;
pub mod imbalance;
pub mod moments;
pub mod multiclass;
pub mod pipeline;
pub mod rng;
pub mod simulation;
pub mod spectral;

pub use accuracies::{clip_accuracies, psi_eta_from_b, AccuracyEstimates};
pub use data::{
    parse_multiclass_csv, parse_prediction_csv, parse_prediction_csv_transposed, validate,
    DataError, Encoding, MultiPredictionMatrix, PredictionMatrix, ValidationReport,
};
pub use ensemble::{
    balanced_accuracy_score, em_refine, majority_vote, ml_predict, sml_predict,
    EnsemblePrediction, EmOptions, EmResult,
};
pub use imbalance::{
    b_from_alpha, estimate_b_likelihood, estimate_b_tensor, restricted_log_likelihood,
    ImbalanceError, ImbalanceEstimate, ImbalanceMethod, LikelihoodOptions,
};
pub use moments::{population_moments, sample_covariance, sample_means, sample_tensor, MomentSet};
pub use pipeline::{estimate_accuracies, isml_predict, PipelineOutput};
pub use simulation::{generate, ExperimentResult, SyntheticSpec};
pub use spectral::{estimate_v, resolve_sign, SpectralVector};
