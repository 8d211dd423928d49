//! Independent oracles used by the integration and acceptance suites.
//!
//! Everything here evaluates the conditional-independence model by direct
//! enumeration -- no centered tensors, no log-space tricks -- so it checks
//! the library's closed forms through an unrelated route.

#![allow(dead_code)]

use unsemble::data::PredictionMatrix;

/// Pr(f_i = +1 | y) under the model.
fn p_plus_given(psi: f64, eta: f64, y: i8) -> f64 {
    if y > 0 {
        psi
    } else {
        1.0 - eta
    }
}

/// E[f_i] by enumeration over the label and the outcome.
pub fn bf_mean(psi: f64, eta: f64, b: f64) -> f64 {
    let mut mu = 0.0;
    for &(y, py) in &[(1i8, (1.0 + b) / 2.0), (-1i8, (1.0 - b) / 2.0)] {
        let p = p_plus_given(psi, eta, y);
        mu += py * (p - (1.0 - p));
    }
    mu
}

/// E[(f_i - mu_i)(f_j - mu_j)] by enumeration over y and the 4 outcomes.
pub fn bf_pair_moment(pi_: (f64, f64), pj: (f64, f64), b: f64) -> f64 {
    let mu_i = bf_mean(pi_.0, pi_.1, b);
    let mu_j = bf_mean(pj.0, pj.1, b);
    let mut e = 0.0;
    for &(y, py) in &[(1i8, (1.0 + b) / 2.0), (-1i8, (1.0 - b) / 2.0)] {
        for &ai in &[1i8, -1i8] {
            for &aj in &[1i8, -1i8] {
                let pr_i = if ai > 0 {
                    p_plus_given(pi_.0, pi_.1, y)
                } else {
                    1.0 - p_plus_given(pi_.0, pi_.1, y)
                };
                let pr_j = if aj > 0 {
                    p_plus_given(pj.0, pj.1, y)
                } else {
                    1.0 - p_plus_given(pj.0, pj.1, y)
                };
                e += py * pr_i * pr_j * (ai as f64 - mu_i) * (aj as f64 - mu_j);
            }
        }
    }
    e
}

/// E[(f_i - mu_i)(f_j - mu_j)(f_k - mu_k)] by enumeration over y and the
/// 8 outcomes of the triple.
pub fn bf_triple_moment(pi_: (f64, f64), pj: (f64, f64), pk: (f64, f64), b: f64) -> f64 {
    let mu = [
        bf_mean(pi_.0, pi_.1, b),
        bf_mean(pj.0, pj.1, b),
        bf_mean(pk.0, pk.1, b),
    ];
    let params = [pi_, pj, pk];
    let mut e = 0.0;
    for &(y, py) in &[(1i8, (1.0 + b) / 2.0), (-1i8, (1.0 - b) / 2.0)] {
        for outcome in 0u8..8 {
            let mut pr = py;
            let mut centered = 1.0;
            for (t, &(psi, eta)) in params.iter().enumerate() {
                let a: i8 = if outcome >> t & 1 == 1 { 1 } else { -1 };
                let p_plus = p_plus_given(psi, eta, y);
                pr *= if a > 0 { p_plus } else { 1.0 - p_plus };
                centered *= a as f64 - mu[t];
            }
            e += pr * centered;
        }
    }
    e
}

/// The mixture probability of one column, evaluated with plain products:
/// Pr(f | b) = (1+b)/2 prod psi^.. (1-psi)^.. + (1-b)/2 prod eta^.. (1-eta)^..
pub fn bf_column_prob(col: &[i8], psi: &[f64], eta: &[f64], b: f64) -> f64 {
    let mut pos = (1.0 + b) / 2.0;
    let mut neg = (1.0 - b) / 2.0;
    for (i, &f) in col.iter().enumerate() {
        if f > 0 {
            pos *= psi[i];
            neg *= 1.0 - eta[i];
        } else {
            pos *= 1.0 - psi[i];
            neg *= eta[i];
        }
    }
    pos + neg
}

/// Brute-force restricted log-likelihood: average of log column probability.
pub fn bf_g(z: &PredictionMatrix, psi: &[f64], eta: &[f64], b: f64) -> f64 {
    let mut s = 0.0;
    for j in 0..z.n() {
        let col: Vec<i8> = z.column(j).collect();
        s += bf_column_prob(&col, psi, eta, b).ln();
    }
    s / z.n() as f64
}

/// All 2^m label vectors in {-1, +1}^m.
pub fn all_patterns(m: usize) -> Vec<Vec<i8>> {
    (0..1usize << m)
        .map(|bits| (0..m).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect())
        .collect()
}

/// Exact pattern probabilities Pr(f | psi, eta, b) over all 2^m patterns.
pub fn population_pattern_weights(psi: &[f64], eta: &[f64], b: f64) -> (Vec<Vec<i8>>, Vec<f64>) {
    let patterns = all_patterns(psi.len());
    let weights = patterns.iter().map(|p| bf_column_prob(p, psi, eta, b)).collect();
    (patterns, weights)
}

/// A deterministic uniform draw for test parameter sweeps.
pub fn unit(seed: u64, tag: u64, a: u64, b: u64) -> f64 {
    unsemble::rng::unit_f64(seed, 1000 + tag, a, b)
}
