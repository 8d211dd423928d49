//! First three sample moments of the classifier outputs: means, covariance
//! matrix, and the off-diagonal triple covariance tensor.
//!
//! The covariance uses the unbiased 1/(n-1) normalization while the tensor
//! uses 1/n; the two are deliberately not unified.

use crate::data::PredictionMatrix;
use crate::exec;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MomentsError {
    #[error("need at least 2 samples for a covariance, got {n}")]
    InsufficientSamples { n: usize },
    #[error("model parameter out of range: {what}")]
    ParamOutOfRange { what: String },
}

/// Symmetric m x m matrix, dense row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    m: usize,
    data: Vec<f64>,
}

impl CovMatrix {
    pub fn zeros(m: usize) -> Self {
        Self { m, data: vec![0.0; m * m] }
    }

    pub fn from_fn(m: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut c = Self::zeros(m);
        for i in 0..m {
            for j in 0..m {
                c.data[i * m + j] = f(i, j);
            }
        }
        c
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.m + j] = value;
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.m);
        for i in 0..self.m {
            let row = &self.data[i * self.m..(i + 1) * self.m];
            y[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

/// Dense storage for the C(m,3) strictly ordered tensor entries T_{i<j<k}.
/// Lookups with any index order hit the same entry.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleTensor {
    m: usize,
    data: Vec<f64>,
}

#[inline]
fn choose2(x: usize) -> usize {
    x * x.saturating_sub(1) / 2
}

#[inline]
fn choose3(x: usize) -> usize {
    if x < 3 {
        0
    } else {
        x * (x - 1) * (x - 2) / 6
    }
}

/// Colexicographic rank of the combination {i < j < k}.
#[inline]
fn triple_rank(i: usize, j: usize, k: usize) -> usize {
    debug_assert!(i < j && j < k);
    i + choose2(j) + choose3(k)
}

impl TripleTensor {
    /// Builds all C(m,3) entries; empty when m < 3.
    pub fn from_fn(m: usize, f: impl Fn(usize, usize, usize) -> f64 + Sync + Send) -> Self {
        let triples: Vec<(usize, usize, usize)> = iter_triples(m).collect();
        let data = exec::map_indexed(triples.len(), |t| {
            let (i, j, k) = triples[t];
            f(i, j, k)
        });
        Self { m, data }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Entry for {i,j,k}; the indices may come in any order but must be distinct.
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        let (mut a, mut b, mut c) = (i, j, k);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        if b > c {
            std::mem::swap(&mut b, &mut c);
        }
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        debug_assert!(a < b && b < c, "tensor indices must be distinct");
        self.data[triple_rank(a, b, c)]
    }

    /// Iterates (i, j, k, value) over the stored i < j < k entries.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        iter_triples(self.m).map(move |(i, j, k)| (i, j, k, self.data[triple_rank(i, j, k)]))
    }
}

/// All combinations i < j < k of 0..m in colex (storage) order.
pub fn iter_triples(m: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (2..m).flat_map(move |k| (1..k).flat_map(move |j| (0..j).map(move |i| (i, j, k))))
}

/// Sample mean, covariance and triple tensor of a prediction matrix.
#[derive(Debug, Clone)]
pub struct MomentSet {
    pub mu: Vec<f64>,
    pub cov: CovMatrix,
    pub tensor: TripleTensor,
    /// Sample count behind the estimates; 0 marks exact population moments.
    pub n: usize,
}

/// mu_i = (1/n) sum_k f_i(x_k)
pub fn sample_means(z: &PredictionMatrix) -> Vec<f64> {
    let n = z.n() as f64;
    (0..z.m())
        .map(|i| z.row(i).iter().map(|&e| e as f64).sum::<f64>() / n)
        .collect()
}

fn centered_rows(z: &PredictionMatrix, mu: &[f64]) -> Vec<Vec<f64>> {
    (0..z.m())
        .map(|i| z.row(i).iter().map(|&e| e as f64 - mu[i]).collect())
        .collect()
}

/// r_ij = (1/(n-1)) sum_k (f_i(x_k) - mu_i)(f_j(x_k) - mu_j)
pub fn sample_covariance(z: &PredictionMatrix) -> Result<CovMatrix, MomentsError> {
    if z.n() < 2 {
        return Err(MomentsError::InsufficientSamples { n: z.n() });
    }
    let mu = sample_means(z);
    let c = centered_rows(z, &mu);
    let norm = 1.0 / (z.n() as f64 - 1.0);
    let mut cov = CovMatrix::zeros(z.m());
    for i in 0..z.m() {
        for j in i..z.m() {
            let s: f64 = c[i].iter().zip(&c[j]).map(|(a, b)| a * b).sum();
            cov.set(i, j, s * norm);
            cov.set(j, i, s * norm);
        }
    }
    Ok(cov)
}

/// T_ijk = (1/n) sum_l (f_i - mu_i)(f_j - mu_j)(f_k - mu_k) for i < j < k.
///
/// Each triple is accumulated over instances in a fixed order, so the result
/// is bit-identical for any worker count.
pub fn sample_tensor(z: &PredictionMatrix) -> TripleTensor {
    let mu = sample_means(z);
    let c = centered_rows(z, &mu);
    let norm = 1.0 / z.n() as f64;
    TripleTensor::from_fn(z.m(), |i, j, k| {
        let (ci, cj, ck) = (&c[i], &c[j], &c[k]);
        let mut s = 0.0;
        for l in 0..ci.len() {
            s += ci[l] * cj[l] * ck[l];
        }
        s * norm
    })
}

/// All three sample moments in one pass over the data.
pub fn compute_moments(z: &PredictionMatrix) -> Result<MomentSet, MomentsError> {
    Ok(MomentSet {
        mu: sample_means(z),
        cov: sample_covariance(z)?,
        tensor: sample_tensor(z),
        n: z.n(),
    })
}

/// Exact population moments of the conditional-independence model with
/// sensitivities `psi`, specificities `eta` and class imbalance `b`:
///
///   mu_i  = 2 delta_i + b (2 pi_i - 1)
///   R_ij  = v_i v_j for i != j, with v = sqrt(1-b^2) (2 pi - 1)
///   R_ii  = 1 - mu_i^2
///   T_ijk = -2 b (1-b^2) (2 pi_i - 1)(2 pi_j - 1)(2 pi_k - 1)
pub fn population_moments(psi: &[f64], eta: &[f64], b: f64) -> Result<MomentSet, MomentsError> {
    let m = psi.len();
    if eta.len() != m {
        return Err(MomentsError::ParamOutOfRange {
            what: format!("psi has {} entries but eta has {}", m, eta.len()),
        });
    }
    if !(-1.0..=1.0).contains(&b) || b.abs() >= 1.0 {
        return Err(MomentsError::ParamOutOfRange { what: format!("b = {b} not in (-1, 1)") });
    }
    for (i, (&p, &e)) in psi.iter().zip(eta).enumerate() {
        if !(0.0 < p && p < 1.0 && 0.0 < e && e < 1.0) {
            return Err(MomentsError::ParamOutOfRange {
                what: format!("classifier {i}: psi = {p}, eta = {e} not in (0, 1)"),
            });
        }
    }
    let two_pi_m1: Vec<f64> = psi.iter().zip(eta).map(|(p, e)| p + e - 1.0).collect();
    let delta: Vec<f64> = psi.iter().zip(eta).map(|(p, e)| (p - e) / 2.0).collect();
    let mu: Vec<f64> = (0..m).map(|i| 2.0 * delta[i] + b * two_pi_m1[i]).collect();
    let root = (1.0 - b * b).sqrt();
    let v: Vec<f64> = two_pi_m1.iter().map(|&t| root * t).collect();
    let cov = CovMatrix::from_fn(m, |i, j| {
        if i == j {
            1.0 - mu[i] * mu[i]
        } else {
            v[i] * v[j]
        }
    });
    let coeff = -2.0 * b * (1.0 - b * b);
    let tensor =
        TripleTensor::from_fn(m, |i, j, k| coeff * two_pi_m1[i] * two_pi_m1[j] * two_pi_m1[k]);
    Ok(MomentSet { mu, cov, tensor, n: 0 })
}

/// The rank-one vector v = sqrt(1-b^2)(2 pi - 1) of the population covariance.
pub fn population_v(psi: &[f64], eta: &[f64], b: f64) -> Vec<f64> {
    let root = (1.0 - b * b).sqrt();
    psi.iter().zip(eta).map(|(p, e)| root * (p + e - 1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_prediction_csv, Encoding};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn means_of_simple_rows() {
        let z = parse_prediction_csv("1,1,1,1\n1,-1,1,-1\n1,1,-1,1", Encoding::PmOne).unwrap();
        let mu = sample_means(&z);
        assert_eq!(mu[0], 1.0);
        assert_eq!(mu[1], 0.0);
        let z2 = parse_prediction_csv("1,1,-1\n1,1,1\n-1,-1,-1", Encoding::PmOne).unwrap();
        assert!(close(sample_means(&z2)[0], 1.0 / 3.0, 1e-15));
    }

    #[test]
    fn covariance_of_identical_rows() {
        // n = 4, centered products all 1, normalized by n-1 = 3
        let z =
            parse_prediction_csv("1,-1,1,-1\n1,-1,1,-1\n1,1,-1,-1", Encoding::PmOne).unwrap();
        let cov = sample_covariance(&z).unwrap();
        assert!(close(cov.get(0, 1), 4.0 / 3.0, 1e-15));
    }

    #[test]
    fn covariance_of_negated_rows() {
        let z =
            parse_prediction_csv("1,-1,1,-1\n-1,1,-1,1\n1,1,-1,-1", Encoding::PmOne).unwrap();
        let cov = sample_covariance(&z).unwrap();
        assert!(close(cov.get(0, 1), -4.0 / 3.0, 1e-15));
    }

    #[test]
    fn covariance_against_constant_row_is_zero() {
        let z = parse_prediction_csv("1,1,1,1\n1,-1,1,-1\n-1,1,1,-1", Encoding::PmOne).unwrap();
        let cov = sample_covariance(&z).unwrap();
        assert_eq!(cov.get(0, 1), 0.0);
        assert_eq!(cov.get(0, 2), 0.0);
    }

    #[test]
    fn covariance_needs_two_samples() {
        let z = parse_prediction_csv("1\n-1\n1", Encoding::PmOne).unwrap();
        assert_eq!(
            sample_covariance(&z).unwrap_err(),
            MomentsError::InsufficientSamples { n: 1 }
        );
    }

    #[test]
    fn tensor_of_identical_rows_vanishes() {
        // centered values are +/-1 and their triple products alternate
        let z = parse_prediction_csv(
            "1,-1,1,-1\n1,-1,1,-1\n1,-1,1,-1",
            Encoding::PmOne,
        )
        .unwrap();
        let t = sample_tensor(&z);
        assert!(close(t.get(0, 1, 2), 0.0, 1e-15));
    }

    #[test]
    fn tensor_with_constant_row_vanishes() {
        let z = parse_prediction_csv("1,1,1\n1,-1,1\n-1,1,1", Encoding::PmOne).unwrap();
        let t = sample_tensor(&z);
        assert_eq!(t.get(0, 1, 2), 0.0);
    }

    #[test]
    fn tensor_hand_value() {
        let z = parse_prediction_csv("1,1,-1\n1,-1,1\n-1,1,1", Encoding::PmOne).unwrap();
        let t = sample_tensor(&z);
        assert!(close(t.get(0, 1, 2), -16.0 / 27.0, 1e-15));
    }

    #[test]
    fn tensor_is_permutation_symmetric() {
        let z = parse_prediction_csv(
            "1,1,-1,1,-1\n1,-1,1,1,1\n-1,1,1,-1,1\n1,1,1,-1,-1",
            Encoding::PmOne,
        )
        .unwrap();
        let t = sample_tensor(&z);
        let v = t.get(0, 1, 3);
        assert_eq!(t.get(3, 1, 0), v);
        assert_eq!(t.get(1, 3, 0), v);
        assert_eq!(t.len(), 4);
    }

    #[test]
    fn population_symmetric_case() {
        let ms = population_moments(&[0.75; 4], &[0.75; 4], 0.0).unwrap();
        for i in 0..4 {
            assert_eq!(ms.mu[i], 0.0);
            for j in 0..4 {
                if i != j {
                    assert!(close(ms.cov.get(i, j), 0.25, 1e-15));
                }
            }
        }
        for (_, _, _, t) in ms.tensor.iter() {
            assert_eq!(t, 0.0);
        }
    }

    #[test]
    fn population_tensor_value() {
        let ms = population_moments(&[0.75; 3], &[0.75; 3], 0.6).unwrap();
        assert!(close(ms.tensor.get(0, 1, 2), -0.096, 1e-15));
    }

    #[test]
    fn population_mixed_parameters() {
        let ms = population_moments(&[0.9], &[0.7], 0.5).unwrap();
        assert!(close(ms.mu[0], 0.5, 1e-15));
        let v = population_v(&[0.9], &[0.7], 0.5);
        assert!(close(v[0], 0.75f64.sqrt() * 0.6, 1e-12));
        assert!(close(v[0], 0.519615, 1e-6));
    }

    #[test]
    fn population_rejects_bad_params() {
        assert!(population_moments(&[1.0], &[0.5], 0.0).is_err());
        assert!(population_moments(&[0.5], &[0.5], 1.0).is_err());
    }

    #[test]
    fn population_diag_in_unit_interval() {
        let ms = population_moments(&[0.9, 0.6, 0.8], &[0.7, 0.55, 0.65], 0.4).unwrap();
        for i in 0..3 {
            let d = ms.cov.get(i, i);
            assert!((0.0..=1.0).contains(&d));
        }
    }

    #[test]
    fn triple_rank_is_dense() {
        let m = 7;
        let mut seen = vec![false; choose3(m)];
        for (i, j, k) in iter_triples(m) {
            let r = triple_rank(i, j, k);
            assert!(!seen[r]);
            seen[r] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}
