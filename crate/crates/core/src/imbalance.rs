//! Class-imbalance estimation.
//!
//! Two routes recover the scalar b from unlabeled predictions:
//!
//! * the tensor route fits the rank-one structure T = alpha v (x) v (x) v of
//!   the triple covariance tensor by scalar least squares and inverts
//!   b = -alpha / sqrt(4 + alpha^2);
//! * the likelihood route scans a hypothesized b over a grid, slaving the
//!   per-classifier accuracies to it, and maximizes the average mixture
//!   log-likelihood of the observed columns.

use crate::accuracies::{clip_accuracies, psi_eta_from_b};
use crate::data::PredictionMatrix;
use crate::exec;
use crate::moments::{
    compute_moments, sample_covariance, sample_means, MomentSet, MomentsError, TripleTensor,
};
use crate::spectral::{estimate_v, SpectralError};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImbalanceError {
    #[error("tensor design is degenerate (denominator {denominator:.3e}); b is unidentifiable")]
    DegenerateDesign { denominator: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Moments(#[from] MomentsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImbalanceMethod {
    Tensor,
    Likelihood,
}

impl std::fmt::Display for ImbalanceMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ImbalanceMethod::Tensor => write!(f, "tensor"),
            ImbalanceMethod::Likelihood => write!(f, "likelihood"),
        }
    }
}

/// An estimated class imbalance together with method-specific diagnostics.
#[derive(Debug, Clone)]
pub struct ImbalanceEstimate {
    /// Estimate, clamped into [-1+delta, 1-delta].
    pub b: f64,
    pub method: ImbalanceMethod,
    /// Fitted tensor coefficient (tensor route only).
    pub alpha: Option<f64>,
    /// The full (b_tilde, G_n) scan (likelihood route only).
    pub curve: Option<Vec<(f64, f64)>>,
    pub delta: f64,
}

/// Options for the restricted-likelihood scan.
#[derive(Debug, Clone)]
pub struct LikelihoodOptions {
    /// Stay-away margin from b = +/-1.
    pub delta: f64,
    /// Grid spacing of the coarse scan.
    pub grid_step: f64,
    /// Clipping floor for the slaved accuracies.
    pub eps: f64,
}

impl Default for LikelihoodOptions {
    fn default() -> Self {
        Self { delta: 0.05, grid_step: 1e-3, eps: 1e-3 }
    }
}

const DESIGN_FLOOR: f64 = 1e-12;
const REFINE_WIDTH: f64 = 1e-6;

/// Closed-form least-squares coefficient
/// alpha = sum T_ijk v_i v_j v_k / sum (v_i v_j v_k)^2 over i < j < k.
pub fn alpha_least_squares(tensor: &TripleTensor, v: &[f64]) -> Result<f64, ImbalanceError> {
    assert_eq!(tensor.m(), v.len(), "tensor and v disagree on m");
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, j, k, t) in tensor.iter() {
        let p = v[i] * v[j] * v[k];
        num += t * p;
        den += p * p;
    }
    if den <= DESIGN_FLOOR {
        return Err(ImbalanceError::DegenerateDesign { denominator: den });
    }
    Ok(num / den)
}

/// Inverts alpha(b) = -2b / sqrt(1 - b^2); the result is always in (-1, 1).
pub fn b_from_alpha(alpha: f64) -> f64 {
    -alpha / (4.0 + alpha * alpha).sqrt()
}

fn clamp_b(b: f64, delta: f64) -> f64 {
    b.clamp(-1.0 + delta, 1.0 - delta)
}

/// Tensor-route estimate from precomputed moments (population seam).
pub fn estimate_b_tensor_from_moments(
    ms: &MomentSet,
    delta: f64,
) -> Result<ImbalanceEstimate, ImbalanceError> {
    assert!(delta > 0.0 && delta < 0.5, "delta must be in (0, 0.5)");
    let sv = estimate_v(&ms.cov)?;
    let alpha = alpha_least_squares(&ms.tensor, &sv.v)?;
    Ok(ImbalanceEstimate {
        b: clamp_b(b_from_alpha(alpha), delta),
        method: ImbalanceMethod::Tensor,
        alpha: Some(alpha),
        curve: None,
        delta,
    })
}

/// Full tensor pipeline: covariance -> v -> tensor -> alpha -> b.
pub fn estimate_b_tensor(
    z: &PredictionMatrix,
    delta: f64,
) -> Result<ImbalanceEstimate, ImbalanceError> {
    let ms = compute_moments(z)?;
    estimate_b_tensor_from_moments(&ms, delta)
}

/// The observed columns of Z deduplicated into weighted patterns, in a
/// canonical (sorted) order so evaluation is independent of column order.
#[derive(Debug, Clone)]
pub struct PatternWeights {
    m: usize,
    patterns: Vec<Vec<i8>>,
    weights: Vec<f64>,
    total: f64,
}

impl PatternWeights {
    pub fn from_matrix(z: &PredictionMatrix) -> Self {
        let mut map: BTreeMap<Vec<i8>, f64> = BTreeMap::new();
        for j in 0..z.n() {
            let col: Vec<i8> = z.column(j).collect();
            *map.entry(col).or_insert(0.0) += 1.0;
        }
        let mut patterns = Vec::with_capacity(map.len());
        let mut weights = Vec::with_capacity(map.len());
        for (p, w) in map {
            patterns.push(p);
            weights.push(w);
        }
        Self { m: z.m(), patterns, weights, total: z.n() as f64 }
    }

    /// Explicit patterns with probability (or count) weights, e.g. the exact
    /// population distribution over all 2^m label vectors.
    pub fn new(patterns: Vec<Vec<i8>>, weights: Vec<f64>) -> Self {
        assert_eq!(patterns.len(), weights.len());
        assert!(!patterns.is_empty(), "need at least one pattern");
        let m = patterns[0].len();
        assert!(patterns.iter().all(|p| p.len() == m), "ragged patterns");
        let total = weights.iter().sum();
        Self { m, patterns, weights, total }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn num_patterns(&self) -> usize {
        self.patterns.len()
    }

    pub fn patterns(&self) -> &[Vec<i8>] {
        &self.patterns
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.total
    }
}

#[inline]
fn log_sum_exp2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Weighted average of the per-column mixture log-likelihood at a fixed
/// hypothesized imbalance. Accuracies are slaved to b_tilde and clipped.
fn g_hat(pw: &PatternWeights, mu: &[f64], v: &[f64], b_tilde: f64, eps: f64) -> f64 {
    let acc = psi_eta_from_b(mu, v, b_tilde)
        .expect("b_tilde inside (-1, 1) by construction");
    let acc = clip_accuracies(&acc, eps);
    let m = pw.m;
    let mut ln_psi = vec![0.0; m];
    let mut ln_1m_psi = vec![0.0; m];
    let mut ln_eta = vec![0.0; m];
    let mut ln_1m_eta = vec![0.0; m];
    for i in 0..m {
        ln_psi[i] = acc.psi[i].ln();
        ln_1m_psi[i] = (1.0 - acc.psi[i]).ln();
        ln_eta[i] = acc.eta[i].ln();
        ln_1m_eta[i] = (1.0 - acc.eta[i]).ln();
    }
    let lp0 = ((1.0 + b_tilde) / 2.0).ln();
    let ln0 = ((1.0 - b_tilde) / 2.0).ln();
    let mut sum = 0.0;
    for (p, &w) in pw.patterns.iter().zip(&pw.weights) {
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
        sum += w * log_sum_exp2(lp, ln);
    }
    sum / pw.total
}

/// G_n(Z | b_tilde): the restricted log-likelihood of the data at a
/// hypothesized class imbalance, averaged over instances.
pub fn restricted_log_likelihood(
    z: &PredictionMatrix,
    mu: &[f64],
    v: &[f64],
    b_tilde: f64,
    eps: f64,
) -> f64 {
    assert!(b_tilde.abs() < 1.0, "b_tilde must lie in (-1, 1)");
    assert!(eps > 0.0 && eps < 0.5, "eps must be in (0, 0.5)");
    let pw = PatternWeights::from_matrix(z);
    g_hat(&pw, mu, v, b_tilde, eps)
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximization of `f` on [lo, hi] down to REFINE_WIDTH.
fn golden_max(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > REFINE_WIDTH {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Likelihood-route estimate from weighted patterns plus a mean/eigenvector
/// pair (population seam). Grid points evaluate independently; the argmax
/// breaks ties toward the smaller b_tilde.
pub fn estimate_b_likelihood_from_patterns(
    pw: &PatternWeights,
    mu: &[f64],
    v: &[f64],
    opts: &LikelihoodOptions,
) -> ImbalanceEstimate {
    assert!(opts.delta > 0.0 && opts.delta < 0.5, "delta must be in (0, 0.5)");
    assert!(opts.grid_step > 0.0, "grid_step must be positive");
    assert!(mu.len() == pw.m() && v.len() == pw.m(), "mu/v length mismatch");
    let lo = -1.0 + opts.delta;
    let hi = 1.0 - opts.delta;
    let steps = ((hi - lo) / opts.grid_step).round() as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| (lo + k as f64 * opts.grid_step).min(hi)).collect();
    let values = exec::map_indexed(grid.len(), |k| g_hat(pw, mu, v, grid[k], opts.eps));

    let mut best = 0usize;
    for (k, &val) in values.iter().enumerate() {
        if val > values[best] {
            best = k;
        }
    }
    let bracket_lo = if best == 0 { lo } else { grid[best - 1] };
    let bracket_hi = if best + 1 >= grid.len() { hi } else { grid[best + 1] };
    let refined = golden_max(bracket_lo, bracket_hi, |b| g_hat(pw, mu, v, b, opts.eps));

    ImbalanceEstimate {
        b: clamp_b(refined, opts.delta),
        method: ImbalanceMethod::Likelihood,
        alpha: None,
        curve: Some(grid.into_iter().zip(values).collect()),
        delta: opts.delta,
    }
}

/// Full likelihood pipeline: means + covariance -> v -> grid scan -> refine.
pub fn estimate_b_likelihood(
    z: &PredictionMatrix,
    opts: &LikelihoodOptions,
) -> Result<ImbalanceEstimate, ImbalanceError> {
    let mu = sample_means(z);
    let cov = sample_covariance(z)?;
    let sv = estimate_v(&cov)?;
    let pw = PatternWeights::from_matrix(z);
    Ok(estimate_b_likelihood_from_patterns(&pw, &mu, &sv.v, opts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_prediction_csv, Encoding};
    use crate::moments::population_moments;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn alpha_exact_fixed_point() {
        let v = [0.6, 0.4, 0.2, 0.3];
        let t = TripleTensor::from_fn(4, |i, j, k| -1.5 * v[i] * v[j] * v[k]);
        let alpha = alpha_least_squares(&t, &v).unwrap();
        assert!(close(alpha, -1.5, 1e-12));
    }

    #[test]
    fn alpha_zero_tensor() {
        let v = [0.6, 0.4, 0.2];
        let t = TripleTensor::from_fn(3, |_, _, _| 0.0);
        assert_eq!(alpha_least_squares(&t, &v).unwrap(), 0.0);
    }

    #[test]
    fn alpha_degenerate_design() {
        let v = [0.0, 0.0, 0.0, 1e-7];
        let t = TripleTensor::from_fn(4, |_, _, _| 0.1);
        assert!(matches!(
            alpha_least_squares(&t, &v),
            Err(ImbalanceError::DegenerateDesign { .. })
        ));
    }

    #[test]
    fn b_from_alpha_values() {
        assert_eq!(b_from_alpha(0.0), 0.0);
        assert!(close(b_from_alpha(-1.5), 0.6, 1e-15));
        assert!(close(b_from_alpha(1.5), -0.6, 1e-15));
    }

    #[test]
    fn b_alpha_inverse_identity() {
        let mut b: f64 = -0.95 + 1e-9;
        while b < 0.95 {
            let alpha = -2.0 * b / (1.0 - b * b).sqrt();
            assert!(close(b_from_alpha(alpha), b, 1e-12), "b = {b}");
            b += 0.01;
        }
    }

    #[test]
    fn tensor_pipeline_exact_on_population_moments() {
        let psi = [0.8, 0.7, 0.75, 0.65, 0.6];
        let ms = population_moments(&psi, &psi, 0.6).unwrap();
        let est = estimate_b_tensor_from_moments(&ms, 0.05).unwrap();
        assert!(close(est.b, 0.6, 1e-10), "b = {}", est.b);
        assert_eq!(est.method, ImbalanceMethod::Tensor);
        assert!(est.alpha.is_some());
    }

    #[test]
    fn uniform_model_likelihood_is_constant() {
        // mu = v = 0 slaves every accuracy to 1/2, so each column has
        // probability 2^-m no matter what the data say
        let z = parse_prediction_csv("1,-1,1\n-1,-1,1\n1,1,-1", Encoding::PmOne).unwrap();
        let mu = vec![0.0; 3];
        let v = vec![0.0; 3];
        for &bt in &[-0.7, 0.0, 0.42] {
            let g = restricted_log_likelihood(&z, &mu, &v, bt, 1e-3);
            assert!(close(g, -(3.0) * 2f64.ln(), 1e-12), "g = {g}");
        }
    }

    #[test]
    fn likelihood_invariant_to_column_permutation() {
        let z1 = parse_prediction_csv("1,-1,1,1\n-1,-1,1,-1\n1,1,-1,1", Encoding::PmOne).unwrap();
        let z2 = parse_prediction_csv("1,1,-1,1\n-1,-1,-1,1\n1,1,1,-1", Encoding::PmOne).unwrap();
        let mu = vec![0.1, -0.2, 0.05];
        let v = vec![0.5, 0.4, 0.3];
        let g1 = restricted_log_likelihood(&z1, &mu, &v, 0.2, 1e-3);
        let g2 = restricted_log_likelihood(&z2, &mu, &v, 0.2, 1e-3);
        assert_eq!(g1, g2);
    }

    #[test]
    fn likelihood_small_n_stays_in_domain() {
        // n = 50 columns of noise; the estimate must stay in the clamped range
        let mut text = String::new();
        for i in 0..5 {
            let row: Vec<String> = (0..50)
                .map(|j| {
                    if crate::rng::unit_f64(4, 90, i, j) < 0.5 {
                        "1".to_string()
                    } else {
                        "-1".to_string()
                    }
                })
                .collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        let z = parse_prediction_csv(&text, Encoding::PmOne).unwrap();
        if let Ok(est) = estimate_b_likelihood(&z, &LikelihoodOptions::default()) {
            assert!(est.b >= -0.95 && est.b <= 0.95);
            assert!(est.curve.is_some());
        }
    }

    #[test]
    fn grid_has_expected_size() {
        let psi = [0.8, 0.7, 0.75];
        let ms = population_moments(&psi, &psi, 0.0).unwrap();
        let v = crate::moments::population_v(&psi, &psi, 0.0);
        // a tiny two-pattern input suffices to exercise the scan shape
        let pw = PatternWeights::new(vec![vec![1, 1, 1], vec![-1, -1, -1]], vec![3.0, 1.0]);
        let est = estimate_b_likelihood_from_patterns(
            &pw,
            &ms.mu,
            &v,
            &LikelihoodOptions::default(),
        );
        assert_eq!(est.curve.as_ref().unwrap().len(), 1901);
        assert_eq!(est.method, ImbalanceMethod::Likelihood);
    }
}
