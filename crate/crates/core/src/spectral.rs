//! Rank-one recovery of the balanced-accuracy vector v from the off-diagonal
//! entries of the sample covariance matrix.
//!
//! The estimator completes the unknown diagonal iteratively: starting from
//! the sample variances, it alternates a leading-eigenpair computation with
//! the diagonal update d_i <- lambda u_i^2 until the diagonal settles. The
//! overall sign is then fixed by the better-than-random majority assumption.

use crate::moments::CovMatrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("leading eigenvalue {lambda:.3e} is not positive; no better-than-random structure")]
    DegenerateSpectrum { lambda: f64 },
}

/// Options for [`estimate_v_with`]. The defaults match the library contract.
#[derive(Debug, Clone)]
pub struct SpectralOptions {
    /// Max-norm tolerance on the diagonal between outer iterations.
    pub tol: f64,
    /// Outer iteration cap.
    pub max_iter: usize,
    /// Convergence tolerance of the inner power iteration.
    pub power_tol: f64,
    /// Inner power-iteration cap.
    pub power_max_iter: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 1000, power_tol: 1e-12, power_max_iter: 10_000 }
    }
}

const DEGENERATE_LAMBDA: f64 = 1e-12;

/// The recovered rank-one vector with fit diagnostics.
#[derive(Debug, Clone)]
pub struct SpectralVector {
    pub v: Vec<f64>,
    /// Root-mean-square of r_ij - v_i v_j over i < j.
    pub residual: f64,
    /// Outer (diagonal-completion) iterations performed.
    pub iterations: usize,
    pub sign_resolved: bool,
    /// False when the iteration cap was hit with the diagonal still moving.
    pub converged: bool,
}

/// Leading eigenpair by power iteration with a deterministic all-ones start.
fn power_iteration(a: &CovMatrix, opts: &SpectralOptions) -> (f64, Vec<f64>) {
    let m = a.m();
    let mut x = vec![1.0 / (m as f64).sqrt(); m];
    let mut y = vec![0.0; m];
    for _ in 0..opts.power_max_iter {
        a.mul_vec(&x, &mut y);
        let norm = y.iter().map(|&t| t * t).sum::<f64>().sqrt();
        if norm < 1e-300 {
            // the matrix annihilates the iterate; treat as zero spectrum
            return (0.0, x);
        }
        for t in y.iter_mut() {
            *t /= norm;
        }
        // the iterate flips sign each step when the dominant eigenvalue is
        // negative, so compare against both orientations
        let diff_plus = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let diff_minus = x.iter().zip(&y).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut x, &mut y);
        if diff_plus.min(diff_minus) < opts.power_tol {
            break;
        }
    }
    a.mul_vec(&x, &mut y);
    let lambda: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
    (lambda, x)
}

fn rms_offdiag_residual(cov: &CovMatrix, v: &[f64]) -> f64 {
    let m = cov.m();
    let mut s = 0.0;
    let mut count = 0usize;
    for i in 0..m {
        for j in (i + 1)..m {
            let d = cov.get(i, j) - v[i] * v[j];
            s += d * d;
            count += 1;
        }
    }
    (s / count as f64).sqrt()
}

/// Estimates v from the off-diagonal covariance entries, then resolves sign.
pub fn estimate_v(cov: &CovMatrix) -> Result<SpectralVector, SpectralError> {
    estimate_v_with(cov, &SpectralOptions::default())
}

pub fn estimate_v_with(
    cov: &CovMatrix,
    opts: &SpectralOptions,
) -> Result<SpectralVector, SpectralError> {
    let m = cov.m();
    assert!(m >= 3, "spectral estimation needs at least 3 classifiers");

    // working copy whose diagonal gets replaced each iteration
    let mut work = cov.clone();
    let mut diag: Vec<f64> = (0..m).map(|i| cov.get(i, i)).collect();
    let mut lambda = 0.0;
    let mut u = vec![0.0; m];
    let mut iterations = 0;
    let mut change = f64::INFINITY;

    for it in 1..=opts.max_iter {
        iterations = it;
        for (i, &d) in diag.iter().enumerate() {
            work.set(i, i, d);
        }
        let (l, vec) = power_iteration(&work, opts);
        lambda = l;
        u = vec;
        change = 0.0;
        for i in 0..m {
            let nd = lambda * u[i] * u[i];
            change = change.max((nd - diag[i]).abs());
            diag[i] = nd;
        }
        if change < opts.tol {
            break;
        }
    }

    if lambda <= DEGENERATE_LAMBDA {
        return Err(SpectralError::DegenerateSpectrum { lambda });
    }
    let converged = change <= 100.0 * opts.tol;
    let root = lambda.sqrt();
    let v: Vec<f64> = u.iter().map(|&t| root * t).collect();
    let sv = SpectralVector {
        residual: rms_offdiag_residual(cov, &v),
        v,
        iterations,
        sign_resolved: false,
        converged,
    };
    Ok(resolve_sign(sv))
}

/// Flips the whole vector, if needed, so that strictly positive entries are
/// at least as numerous as strictly negative ones; ties fall back to the
/// entry sum, then to the sign of the largest-magnitude entry.
pub fn resolve_sign(mut sv: SpectralVector) -> SpectralVector {
    let pos = sv.v.iter().filter(|&&x| x > 0.0).count();
    let neg = sv.v.iter().filter(|&&x| x < 0.0).count();
    let flip = if pos != neg {
        pos < neg
    } else {
        let sum: f64 = sv.v.iter().sum();
        if sum != 0.0 {
            sum < 0.0
        } else {
            let mut best = 0usize;
            for (i, x) in sv.v.iter().enumerate() {
                if x.abs() > sv.v[best].abs() {
                    best = i;
                }
            }
            sv.v[best] < 0.0
        }
    };
    if flip {
        for x in sv.v.iter_mut() {
            *x = -*x;
        }
    }
    sv.sign_resolved = true;
    sv
}
