//! Synthetic data generation under the conditional-independence model, and
//! the experiment harnesses behind the `simulate` subcommand: imbalance
//! estimation sweeps, ensemble comparisons, and the error-vs-m study.
//!
//! All randomness is counter-based (see [`crate::rng`]): a fixed seed gives
//! bit-identical results for any trial evaluation order or thread count.

use crate::accuracies::{clip_accuracies, AccuracyEstimates};
use crate::data::{MultiPredictionMatrix, PredictionMatrix};
use crate::ensemble::{balanced_accuracy_score, majority_vote, ml_predict, sml_predict};
use crate::exec;
use crate::imbalance::{ImbalanceError, ImbalanceMethod, LikelihoodOptions};
use crate::multiclass::ConfusionSet;
use crate::pipeline::{estimate_accuracies, isml_predict};
use crate::rng::{sub_seed, tag, unit_f64};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("synthetic spec out of range: {what}")]
    SpecOutOfRange { what: String },
    #[error("log-log fit needs strictly positive coordinates")]
    NonPositiveValue,
    #[error("log-log fit needs at least two points, got {got}")]
    InsufficientPoints { got: usize },
}

/// Parameters of one synthetic dataset.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub m: usize,
    pub n: usize,
    pub b: f64,
    pub psi: Vec<f64>,
    pub eta: Vec<f64>,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Symmetric classifiers: psi_i = eta_i = accuracy for all i.
    pub fn symmetric(m: usize, n: usize, b: f64, accuracy: f64, seed: u64) -> Self {
        Self { m, n, b, psi: vec![accuracy; m], eta: vec![accuracy; m], seed }
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.m < 3 {
            return Err(SimulationError::SpecOutOfRange { what: format!("m = {} < 3", self.m) });
        }
        if self.n == 0 {
            return Err(SimulationError::SpecOutOfRange { what: "n = 0".into() });
        }
        if self.b.abs() >= 1.0 {
            return Err(SimulationError::SpecOutOfRange {
                what: format!("b = {} not in (-1, 1)", self.b),
            });
        }
        if self.psi.len() != self.m || self.eta.len() != self.m {
            return Err(SimulationError::SpecOutOfRange {
                what: "psi/eta length differs from m".into(),
            });
        }
        for (i, (&p, &e)) in self.psi.iter().zip(&self.eta).enumerate() {
            if !(0.0 < p && p <= 1.0 && 0.0 < e && e <= 1.0) {
                return Err(SimulationError::SpecOutOfRange {
                    what: format!("classifier {i}: psi = {p}, eta = {e}"),
                });
            }
        }
        Ok(())
    }
}

/// Draws (Z, y): labels y_j are +1 with probability (1+b)/2, and each entry
/// f_i(x_j) follows the classifier's sensitivity or specificity given y_j.
/// Every draw is keyed by (seed, i, j), so output is evaluation-order free.
pub fn generate(spec: &SyntheticSpec) -> Result<(PredictionMatrix, Vec<i8>), SimulationError> {
    spec.validate()?;
    let p_plus = (1.0 + spec.b) / 2.0;
    let y: Vec<i8> = (0..spec.n)
        .map(|j| if unit_f64(spec.seed, tag::LABEL, 0, j as u64) < p_plus { 1 } else { -1 })
        .collect();
    let mut entries = vec![0i8; spec.m * spec.n];
    let rows = exec::map_indexed(spec.m, |i| {
        let mut row = vec![0i8; spec.n];
        for (j, r) in row.iter_mut().enumerate() {
            let p_pos = if y[j] > 0 { spec.psi[i] } else { 1.0 - spec.eta[i] };
            *r = if unit_f64(spec.seed, tag::ENTRY, i as u64, j as u64) < p_pos { 1 } else { -1 };
        }
        row
    });
    for (i, row) in rows.into_iter().enumerate() {
        entries[i * spec.n..(i + 1) * spec.n].copy_from_slice(&row);
    }
    let z = PredictionMatrix::new(spec.m, spec.n, entries)
        .expect("generated entries are valid by construction");
    Ok((z, y))
}

/// Multiclass analogue: y_j ~ priors, then f_i(x_j) ~ column y_j of
/// classifier i's confusion matrix.
pub fn generate_multiclass(
    confusions: &ConfusionSet,
    priors: &[f64],
    n: usize,
    seed: u64,
) -> Result<(MultiPredictionMatrix, Vec<u32>), SimulationError> {
    let k = confusions.num_classes();
    let m = confusions.num_classifiers();
    if m < 3 {
        return Err(SimulationError::SpecOutOfRange { what: format!("m = {m} < 3") });
    }
    if priors.len() != k || (priors.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(SimulationError::SpecOutOfRange { what: "priors must sum to 1".into() });
    }
    let draw_class = |u: f64, probs: &dyn Fn(usize) -> f64| -> u32 {
        let mut cum = 0.0;
        for c in 1..=k {
            cum += probs(c);
            if u < cum {
                return c as u32;
            }
        }
        k as u32
    };
    let y: Vec<u32> = (0..n)
        .map(|j| draw_class(unit_f64(seed, tag::CLASS, 0, j as u64), &|c| priors[c - 1]))
        .collect();
    let mut entries = vec![0u32; m * n];
    for i in 0..m {
        for j in 0..n {
            let u = unit_f64(seed, tag::ENTRY, i as u64, j as u64);
            entries[i * n + j] =
                draw_class(u, &|c| confusions.prob(i, c, y[j] as usize));
        }
    }
    let zm = MultiPredictionMatrix::new(m, n, k, entries)
        .expect("generated entries are valid by construction");
    Ok((zm, y))
}

/// One aggregated metric for one experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentCell {
    pub config: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    /// Successful trials behind `mean`/`std`.
    pub trials: usize,
    /// Trials dropped because an estimator degenerated.
    pub failures: usize,
    /// Raw per-trial values (successes only, in trial order).
    pub values: Vec<f64>,
}

/// A table of experiment cells, serializable to CSV and plot data.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentResult {
    pub cells: Vec<ExperimentCell>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl ExperimentResult {
    fn push(&mut self, config: &str, metric: &str, per_trial: &[Option<f64>]) {
        let values: Vec<f64> = per_trial.iter().filter_map(|v| *v).collect();
        let failures = per_trial.len() - values.len();
        let (mean, std) = mean_std(&values);
        self.cells.push(ExperimentCell {
            config: config.to_string(),
            metric: metric.to_string(),
            mean,
            std,
            trials: values.len(),
            failures,
            values,
        });
    }

    /// One row per cell: config, metric, mean, std, trials, failures.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("config,metric,mean,std,trials,failures\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.config, c.metric, c.mean, c.std, c.trials, c.failures
            ));
        }
        out
    }

    /// Line-oriented raw values: `config metric trial value`, one per line.
    pub fn to_plot_data(&self) -> String {
        let mut out = String::new();
        for c in &self.cells {
            for (t, v) in c.values.iter().enumerate() {
                out.push_str(&format!("{}\t{}\t{}\t{}\n", c.config, c.metric, t, v));
            }
        }
        out
    }

    /// First cell whose config contains `config_part` with the given metric.
    pub fn find(&self, config_part: &str, metric: &str) -> Option<&ExperimentCell> {
        self.cells
            .iter()
            .find(|c| c.config.contains(config_part) && c.metric == metric)
    }
}

/// Ordinary least-squares slope of log(y) against log(x).
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<f64, SimulationError> {
    if points.len() < 2 {
        return Err(SimulationError::InsufficientPoints { got: points.len() });
    }
    if points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return Err(SimulationError::NonPositiveValue);
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// Sweep of both imbalance estimators over (b, n) cells.
#[derive(Debug, Clone)]
pub struct ImbalanceExperimentConfig {
    pub b_values: Vec<f64>,
    pub n_values: Vec<usize>,
    pub trials: usize,
    pub m: usize,
    /// psi_i and eta_i are drawn uniformly from this range per trial.
    pub accuracy_range: (f64, f64),
    pub seed: u64,
    pub methods: Vec<ImbalanceMethod>,
    pub lik_opts: LikelihoodOptions,
}

impl Default for ImbalanceExperimentConfig {
    fn default() -> Self {
        Self {
            b_values: vec![0.0, 0.3, 0.6],
            n_values: vec![1250, 2500, 5000, 10_000, 20_000, 40_000],
            trials: 30,
            m: 10,
            accuracy_range: (0.5, 0.8),
            seed: 42,
            methods: vec![ImbalanceMethod::Tensor, ImbalanceMethod::Likelihood],
            lik_opts: LikelihoodOptions::default(),
        }
    }
}

fn draw_range(seed: u64, tg: u64, i: usize, range: (f64, f64)) -> f64 {
    range.0 + (range.1 - range.0) * unit_f64(seed, tg, i as u64, 0)
}

fn trial_spec(
    cfg_seed: u64,
    cell: usize,
    trial: usize,
    m: usize,
    n: usize,
    b: f64,
    range: (f64, f64),
) -> SyntheticSpec {
    let seed = sub_seed(cfg_seed, tag::TRIAL, cell as u64, trial as u64);
    let psi: Vec<f64> = (0..m).map(|i| draw_range(seed, tag::PSI, i, range)).collect();
    let eta: Vec<f64> = (0..m).map(|i| draw_range(seed, tag::ETA, i, range)).collect();
    SyntheticSpec { m, n, b, psi, eta, seed }
}

/// For every (b, n, trial): generate data, run the configured estimators,
/// record the estimate and its squared error. Failed trials are excluded
/// from the aggregates and counted.
pub fn run_imbalance_experiment(cfg: &ImbalanceExperimentConfig) -> ExperimentResult {
    let mut result = ExperimentResult::default();
    for (bi, &b) in cfg.b_values.iter().enumerate() {
        for (ni, &n) in cfg.n_values.iter().enumerate() {
            let cell = bi * cfg.n_values.len() + ni;
            type TrialOut = Vec<Result<f64, ImbalanceError>>;
            let outcomes: Vec<TrialOut> = exec::map_indexed(cfg.trials, |t| {
                let spec = trial_spec(cfg.seed, cell, t, cfg.m, n, b, cfg.accuracy_range);
                let (z, _) = generate(&spec).expect("trial spec is valid");
                cfg.methods
                    .iter()
                    .map(|&method| {
                        estimate_accuracies(&z, method, &cfg.lik_opts).map(|out| out.estimate.b)
                    })
                    .collect()
            });
            for (mi, &method) in cfg.methods.iter().enumerate() {
                let config = format!("b={b},n={n},method={method}");
                let b_hat: Vec<Option<f64>> =
                    outcomes.iter().map(|o| o[mi].as_ref().ok().copied()).collect();
                let sq_err: Vec<Option<f64>> = b_hat
                    .iter()
                    .map(|v| v.map(|bh| (bh - b) * (bh - b)))
                    .collect();
                result.push(&config, "b_hat", &b_hat);
                result.push(&config, "sq_error", &sq_err);
            }
        }
    }
    result
}

/// Four-way ensemble comparison: majority vote, SML, i-SML, oracle ML.
#[derive(Debug, Clone)]
pub struct EnsembleComparisonConfig {
    /// Template spec; `seed` is re-derived per trial.
    pub base: SyntheticSpec,
    /// When set, psi and eta are redrawn uniformly from this range per trial.
    pub redraw_range: Option<(f64, f64)>,
    pub trials: usize,
    /// Which imbalance estimator feeds the i-SML plug-in accuracies.
    pub b_method: ImbalanceMethod,
    pub lik_opts: LikelihoodOptions,
}

impl EnsembleComparisonConfig {
    /// The heterogeneous divergence scenario: two strong classifiers among
    /// weak ones, where the SML linearization is least accurate.
    pub fn heterogeneous(n: usize, trials: usize, seed: u64) -> Self {
        let m = 10;
        let mut psi = vec![0.55; m];
        psi[0] = 0.9;
        psi[1] = 0.9;
        Self {
            base: SyntheticSpec { m, n, b: 0.0, psi: psi.clone(), eta: psi, seed },
            redraw_range: None,
            trials,
            b_method: ImbalanceMethod::Likelihood,
            lik_opts: LikelihoodOptions::default(),
        }
    }
}

/// Per trial: generate data, predict with all four rules, and score each
/// against the true labels with balanced accuracy.
pub fn run_ensemble_comparison(cfg: &EnsembleComparisonConfig) -> ExperimentResult {
    let base = &cfg.base;
    let outcomes: Vec<Option<[f64; 4]>> = exec::map_indexed(cfg.trials, |t| {
        let seed = sub_seed(base.seed, tag::TRIAL, 0, t as u64);
        let (psi, eta) = match cfg.redraw_range {
            Some(range) => (
                (0..base.m).map(|i| draw_range(seed, tag::PSI, i, range)).collect(),
                (0..base.m).map(|i| draw_range(seed, tag::ETA, i, range)).collect(),
            ),
            None => (base.psi.clone(), base.eta.clone()),
        };
        let spec = SyntheticSpec { m: base.m, n: base.n, b: base.b, psi, eta, seed };
        let (z, y) = generate(&spec).expect("trial spec is valid");

        let (isml, out) = match isml_predict(&z, cfg.b_method, &cfg.lik_opts) {
            Ok(v) => v,
            Err(_) => return None,
        };
        let mv = majority_vote(&z);
        let sml = sml_predict(&z, &out.spectral.v);
        let oracle_acc = clip_accuracies(
            &AccuracyEstimates::exact(spec.psi.clone(), spec.eta.clone(), spec.b),
            cfg.lik_opts.eps,
        );
        let oracle = ml_predict(&z, &oracle_acc).expect("oracle accuracies are clipped");

        let score = |pred: &[i8]| balanced_accuracy_score(pred, &y).ok();
        Some([
            score(&mv.labels)?,
            score(&sml.labels)?,
            score(&isml.labels)?,
            score(&oracle.labels)?,
        ])
    });

    let config = format!("m={},n={},b={}", base.m, base.n, base.b);
    let mut result = ExperimentResult::default();
    for (mi, metric) in ["ba_mv", "ba_sml", "ba_isml", "ba_oracle"].iter().enumerate() {
        let vals: Vec<Option<f64>> = outcomes.iter().map(|o| o.map(|a| a[mi])).collect();
        result.push(&config, metric, &vals);
    }
    result
}

/// Tensor-method error as the ensemble grows.
#[derive(Debug, Clone)]
pub struct MaeVsMConfig {
    pub m_values: Vec<usize>,
    pub trials: usize,
    pub n: usize,
    pub b: f64,
    /// Balanced accuracies are drawn from this range (classifiers symmetric).
    pub accuracy_range: (f64, f64),
    pub seed: u64,
    pub delta: f64,
}

impl Default for MaeVsMConfig {
    fn default() -> Self {
        Self {
            m_values: vec![5, 10, 15],
            trials: 50,
            n: 10_000,
            b: 0.3,
            accuracy_range: (0.69, 0.71),
            seed: 42,
            delta: 0.05,
        }
    }
}

/// Records E[|b_hat - b|] for the tensor method across ensemble sizes.
pub fn run_mae_vs_m_experiment(cfg: &MaeVsMConfig) -> ExperimentResult {
    let mut result = ExperimentResult::default();
    let lik_opts = LikelihoodOptions { delta: cfg.delta, ..LikelihoodOptions::default() };
    for (cell, &m) in cfg.m_values.iter().enumerate() {
        let outcomes: Vec<Option<f64>> = exec::map_indexed(cfg.trials, |t| {
            let seed = sub_seed(cfg.seed, tag::TRIAL, cell as u64, t as u64);
            let pi: Vec<f64> =
                (0..m).map(|i| draw_range(seed, tag::PSI, i, cfg.accuracy_range)).collect();
            let spec =
                SyntheticSpec { m, n: cfg.n, b: cfg.b, psi: pi.clone(), eta: pi, seed };
            let (z, _) = generate(&spec).expect("trial spec is valid");
            estimate_accuracies(&z, ImbalanceMethod::Tensor, &lik_opts)
                .ok()
                .map(|out| (out.estimate.b - cfg.b).abs())
        });
        let config = format!("m={m},n={},b={}", cfg.n, cfg.b);
        result.push(&config, "abs_error", &outcomes);
    }
    result
}
