//! One-vs-all reduction for K > 2 classes: estimates class probabilities and
//! the diagonal confusion entries, and provides the perturbation witness that
//! shows off-diagonal entries are not identifiable from binary reductions.
//!
//! Class labels are 1..=K throughout, matching the prediction data.

use crate::data::{MultiPredictionMatrix, PredictionMatrix};
use crate::imbalance::{ImbalanceError, ImbalanceMethod, LikelihoodOptions};
use crate::moments::CovMatrix;
use crate::pipeline::estimate_accuracies;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MulticlassError {
    #[error("subset must be a nonempty proper subset of the classes")]
    BadSubset,
    #[error("perturbation pushes entry ({row}, {col}) of matrix 1 to {value}, outside [0, 1]")]
    PerturbationOutOfRange { row: usize, col: usize, value: f64 },
    #[error("confusion matrix {index} is not column-stochastic: {what}")]
    InvalidConfusions { index: usize, what: String },
}

/// A set of m column-stochastic K x K confusion matrices; entry (k, k') of
/// matrix i is Pr(f_i = k | Y = k').
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionSet {
    k: usize,
    matrices: Vec<Vec<f64>>, // row-major k x k each
}

impl ConfusionSet {
    pub fn new(k: usize, matrices: Vec<Vec<f64>>) -> Result<Self, MulticlassError> {
        assert!(k >= 2, "need at least two classes");
        for (idx, m) in matrices.iter().enumerate() {
            if m.len() != k * k {
                return Err(MulticlassError::InvalidConfusions {
                    index: idx,
                    what: format!("has {} entries, expected {}", m.len(), k * k),
                });
            }
            for col in 0..k {
                let mut sum = 0.0;
                for row in 0..k {
                    let e = m[row * k + col];
                    if !(0.0..=1.0).contains(&e) {
                        return Err(MulticlassError::InvalidConfusions {
                            index: idx,
                            what: format!("entry ({row}, {col}) = {e} outside [0, 1]"),
                        });
                    }
                    sum += e;
                }
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(MulticlassError::InvalidConfusions {
                        index: idx,
                        what: format!("column {col} sums to {sum}"),
                    });
                }
            }
        }
        Ok(Self { k, matrices })
    }

    /// The uniform set: every entry 1/K for all m classifiers.
    pub fn uniform(k: usize, m: usize) -> Self {
        Self { k, matrices: vec![vec![1.0 / k as f64; k * k]; m] }
    }

    /// Identity confusions: every classifier is perfect.
    pub fn identity(k: usize, m: usize) -> Self {
        let mut mat = vec![0.0; k * k];
        for d in 0..k {
            mat[d * k + d] = 1.0;
        }
        Self { k, matrices: vec![mat; m] }
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn num_classifiers(&self) -> usize {
        self.matrices.len()
    }

    /// Pr(f_i = predicted | Y = truth); labels are 1..=K.
    pub fn prob(&self, classifier: usize, predicted: usize, truth: usize) -> f64 {
        debug_assert!((1..=self.k).contains(&predicted) && (1..=self.k).contains(&truth));
        self.matrices[classifier][(predicted - 1) * self.k + (truth - 1)]
    }

    /// Largest absolute entry difference against another set.
    pub fn max_norm_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.k, other.k);
        assert_eq!(self.matrices.len(), other.matrices.len());
        self.matrices
            .iter()
            .zip(&other.matrices)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

fn check_subset(subset: &[usize], k: usize) -> Result<Vec<bool>, MulticlassError> {
    if subset.is_empty() {
        return Err(MulticlassError::BadSubset);
    }
    let mut mask = vec![false; k + 1];
    for &c in subset {
        if c < 1 || c > k || mask[c] {
            return Err(MulticlassError::BadSubset);
        }
        mask[c] = true;
    }
    if mask[1..].iter().all(|&b| b) {
        return Err(MulticlassError::BadSubset);
    }
    Ok(mask)
}

/// Collapses multiclass predictions to +1 (label in `subset`) / -1 (otherwise).
pub fn binarize(
    zm: &MultiPredictionMatrix,
    subset: &[usize],
) -> Result<PredictionMatrix, MulticlassError> {
    let mask = check_subset(subset, zm.num_classes())?;
    let mut entries = Vec::with_capacity(zm.m() * zm.n());
    for i in 0..zm.m() {
        for j in 0..zm.n() {
            entries.push(if mask[zm.get(i, j) as usize] { 1 } else { -1 });
        }
    }
    Ok(PredictionMatrix::new(zm.m(), zm.n(), entries).expect("shape preserved"))
}

/// Per-class estimates from one-vs-all reductions.
#[derive(Debug, Clone)]
pub struct MulticlassEstimates {
    /// p_hat_k = (1 + b_hat) / 2 from the split A = {k}; NaN where the class
    /// pipeline failed.
    pub p: Vec<f64>,
    /// diag[i][k] = estimated Pr(f_i = k+1 | Y = k+1).
    pub diag: Vec<Vec<f64>>,
    pub method: ImbalanceMethod,
    /// Per-class pipeline failures, index k for class k+1.
    pub class_errors: Vec<Option<ImbalanceError>>,
}

impl MulticlassEstimates {
    /// Class probabilities rescaled to sum to one (the raw `p` entries are
    /// estimated independently and need not).
    pub fn normalized_p(&self) -> Vec<f64> {
        let sum: f64 = self.p.iter().filter(|x| x.is_finite()).sum();
        if sum > 0.0 {
            self.p.iter().map(|x| x / sum).collect()
        } else {
            self.p.clone()
        }
    }
}

/// Runs the chosen binary imbalance estimator on every one-vs-all split,
/// returning class probabilities and diagonal confusion entries.
pub fn estimate_probs_and_diagonals(
    zm: &MultiPredictionMatrix,
    method: ImbalanceMethod,
    opts: &LikelihoodOptions,
) -> MulticlassEstimates {
    let k = zm.num_classes();
    let m = zm.m();
    let mut p = vec![f64::NAN; k];
    let mut diag = vec![vec![f64::NAN; k]; m];
    let mut class_errors = vec![None; k];
    for class in 1..=k {
        let zb = binarize(zm, &[class]).expect("singleton subsets are always proper");
        match estimate_accuracies(&zb, method, opts) {
            Ok(out) => {
                p[class - 1] = (1.0 + out.estimate.b) / 2.0;
                for i in 0..m {
                    diag[i][class - 1] = out.acc.psi[i];
                }
            }
            Err(e) => class_errors[class - 1] = Some(e),
        }
    }
    MulticlassEstimates { p, diag, method, class_errors }
}

/// Applies the six-entry perturbation to the first confusion matrix: with
/// distinct classes (j, k, l) and equal priors, the modified set keeps every
/// binary reduction's first and second moments unchanged while being a
/// genuinely different model.
pub fn ambiguity_witness(
    base: &ConfusionSet,
    j: usize,
    k: usize,
    l: usize,
    delta_amt: f64,
) -> Result<ConfusionSet, MulticlassError> {
    let kk = base.k;
    assert!(
        (1..=kk).contains(&j) && (1..=kk).contains(&k) && (1..=kk).contains(&l),
        "classes must be in 1..=K"
    );
    assert!(j != k && k != l && j != l, "classes must be distinct");
    assert!(!base.matrices.is_empty(), "need at least one classifier");

    let mut out = base.clone();
    let mat = &mut out.matrices[0];
    // (row, col, sign): +delta / -delta pattern of the construction
    let edits = [
        (j, k, 1.0),
        (k, j, -1.0),
        (l, j, 1.0),
        (j, l, -1.0),
        (k, l, 1.0),
        (l, k, -1.0),
    ];
    for &(row, col, sign) in &edits {
        let idx = (row - 1) * kk + (col - 1);
        let value = mat[idx] + sign * delta_amt;
        if !(0.0..=1.0).contains(&value) {
            return Err(MulticlassError::PerturbationOutOfRange { row, col, value });
        }
        mat[idx] = value;
    }
    Ok(out)
}

/// Exact population mean vector and covariance matrix of the binarized
/// classifiers f_i^A, by enumeration over classes.
pub fn population_binary_stats(
    confusions: &ConfusionSet,
    priors: &[f64],
    subset: &[usize],
) -> Result<(Vec<f64>, CovMatrix), MulticlassError> {
    let k = confusions.k;
    assert_eq!(priors.len(), k, "priors length mismatch");
    debug_assert!((priors.iter().sum::<f64>() - 1.0).abs() < 1e-9, "priors must sum to 1");
    let mask = check_subset(subset, k)?;
    let m = confusions.num_classifiers();

    // a[i][c] = E[f_i^A | Y = c+1] = 2 Pr(f_i in A | Y = c+1) - 1
    let mut a = vec![vec![0.0; k]; m];
    for i in 0..m {
        for truth in 1..=k {
            let mut p_in = 0.0;
            for predicted in 1..=k {
                if mask[predicted] {
                    p_in += confusions.prob(i, predicted, truth);
                }
            }
            a[i][truth - 1] = 2.0 * p_in - 1.0;
        }
    }
    let mu: Vec<f64> = (0..m)
        .map(|i| (0..k).map(|c| priors[c] * a[i][c]).sum())
        .collect();
    let cov = CovMatrix::from_fn(m, |i, j| {
        if i == j {
            1.0 - mu[i] * mu[i]
        } else {
            let e_ff: f64 = (0..k).map(|c| priors[c] * a[i][c] * a[j][c]).sum();
            e_ff - mu[i] * mu[j]
        }
    });
    Ok((mu, cov))
}

/// All nonempty proper subsets of {1..K} (for witness checks).
pub fn proper_subsets(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for bits in 1..((1usize << k) - 1) {
        let subset: Vec<usize> = (0..k).filter(|c| bits >> c & 1 == 1).map(|c| c + 1).collect();
        out.push(subset);
    }
    out
}
