//! Per-classifier sensitivity/specificity recovery from (mu, v, b).
//!
//! The plug-in identities are exact in the population limit:
//!   psi = (1 + mu + v sqrt((1-b)/(1+b))) / 2
//!   eta = (1 - mu + v sqrt((1+b)/(1-b))) / 2

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AccuraciesError {
    #[error("class imbalance b = {b} outside (-1, 1)")]
    BOutOfRange { b: f64 },
    #[error("mu has {mu_len} entries but v has {v_len}")]
    LengthMismatch { mu_len: usize, v_len: usize },
}

/// Estimated sensitivities, specificities and balanced accuracies, together
/// with the class imbalance they were derived from.
#[derive(Debug, Clone)]
pub struct AccuracyEstimates {
    pub psi: Vec<f64>,
    pub eta: Vec<f64>,
    /// pi_i = (psi_i + eta_i) / 2, kept exactly in sync.
    pub pi: Vec<f64>,
    pub b: f64,
    /// Per classifier: true when clipping moved psi or eta.
    pub clipped: Vec<bool>,
}

impl AccuracyEstimates {
    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    /// delta_i = (psi_i - eta_i)/2, derived rather than stored.
    pub fn delta(&self, i: usize) -> f64 {
        self.psi[i] - self.pi[i]
    }

    /// Exact population estimates for known parameters (diagnostics, oracles).
    pub fn exact(psi: Vec<f64>, eta: Vec<f64>, b: f64) -> Self {
        let pi = psi.iter().zip(&eta).map(|(p, e)| (p + e) / 2.0).collect();
        let clipped = vec![false; psi.len()];
        Self { psi, eta, pi, b, clipped }
    }
}

/// Raw plug-in estimates; under noise the values may leave [0, 1] and are
/// returned unclipped so diagnostics can see it.
pub fn psi_eta_from_b(mu: &[f64], v: &[f64], b: f64) -> Result<AccuracyEstimates, AccuraciesError> {
    if mu.len() != v.len() {
        return Err(AccuraciesError::LengthMismatch { mu_len: mu.len(), v_len: v.len() });
    }
    if b.abs() >= 1.0 {
        return Err(AccuraciesError::BOutOfRange { b });
    }
    let w_psi = ((1.0 - b) / (1.0 + b)).sqrt();
    let w_eta = ((1.0 + b) / (1.0 - b)).sqrt();
    let psi: Vec<f64> = mu.iter().zip(v).map(|(m, x)| 0.5 * (1.0 + m + x * w_psi)).collect();
    let eta: Vec<f64> = mu.iter().zip(v).map(|(m, x)| 0.5 * (1.0 - m + x * w_eta)).collect();
    let pi: Vec<f64> = psi.iter().zip(&eta).map(|(p, e)| (p + e) / 2.0).collect();
    let clipped = vec![false; mu.len()];
    Ok(AccuracyEstimates { psi, eta, pi, b, clipped })
}

/// Clamps every psi_i, eta_i into [eps, 1-eps], marking what moved and
/// recomputing the balanced accuracies.
pub fn clip_accuracies(acc: &AccuracyEstimates, eps: f64) -> AccuracyEstimates {
    assert!(eps > 0.0 && eps < 0.5, "eps must be in (0, 0.5)");
    let lo = eps;
    let hi = 1.0 - eps;
    let mut out = acc.clone();
    for i in 0..out.len() {
        let p = acc.psi[i].clamp(lo, hi);
        let e = acc.eta[i].clamp(lo, hi);
        out.clipped[i] = p != acc.psi[i] || e != acc.eta[i];
        out.psi[i] = p;
        out.eta[i] = e;
        out.pi[i] = (p + e) / 2.0;
    }
    out
}
