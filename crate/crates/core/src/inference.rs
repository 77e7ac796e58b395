//! Maximum-likelihood fitting of trust parameters to rated trajectories.
//!
//! The log-likelihood sums `ln Beta(t_k | α_k, β_k)` over every reported trust
//! value, including the initial rating against `Beta(α₀, β₀)`. Because α_k and
//! β_k are non-decreasing linear functions of the parameters and the Beta
//! log-density is concave in its shapes, the objective is concave; projected
//! gradient ascent on the box `α₀, β₀, s, f ≥ ε`, `ŝ, f̂ ≥ 0` reaches the optimum.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{
    experience_basis, replay, ExperienceBasis, TipParams, Trajectory, PARAM_COUNT,
};
use crate::special::{digamma_unchecked, ln_gamma_unchecked};

/// Which model family to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    /// Direct and indirect experience (all six parameters free).
    Tip,
    /// Indirect gains frozen at zero.
    DirectOnly,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Tip => "tip",
            Model::DirectOnly => "direct-only",
        }
    }
}

/// Free/frozen mask over `[alpha0, beta0, s, f, s_hat, f_hat]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreeParams(pub [bool; PARAM_COUNT]);

impl FreeParams {
    pub const ALL: Self = Self([true; PARAM_COUNT]);
    pub const DIRECT_ONLY: Self = Self([true, true, true, true, false, false]);
    pub const PRIORS_ONLY: Self = Self([true, true, false, false, false, false]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    /// Step multiplier after a rejected trial, in (0, 1).
    pub shrink: f64,
    /// Armijo constant, in (0, 0.5].
    pub sufficient_increase: f64,
    pub max_backtracks: usize,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self {
            shrink: 0.5,
            sufficient_increase: 1e-4,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Stop once the ∞-norm of the projected gradient drops below this.
    pub gradient_tolerance: f64,
    /// Lower bound for α₀, β₀, s, f.
    pub parameter_floor: f64,
    /// Starting point; `None` derives one from the trajectory's initial rating.
    pub initial_theta: Option<TipParams>,
    pub line_search: LineSearch,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            gradient_tolerance: 1e-6,
            parameter_floor: 1e-4,
            initial_theta: None,
            line_search: LineSearch::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive".into());
        }
        if !(self.gradient_tolerance > 0.0 && self.gradient_tolerance.is_finite()) {
            return bad(format!(
                "gradient_tolerance {} must be > 0",
                self.gradient_tolerance
            ));
        }
        if !(self.parameter_floor > 0.0 && self.parameter_floor.is_finite()) {
            return bad(format!(
                "parameter_floor {} must be > 0",
                self.parameter_floor
            ));
        }
        let ls = &self.line_search;
        if !(ls.shrink > 0.0 && ls.shrink < 1.0) {
            return bad(format!(
                "line-search shrink {} must lie in (0, 1)",
                ls.shrink
            ));
        }
        if !(ls.sufficient_increase > 0.0 && ls.sufficient_increase <= 0.5) {
            return bad(format!(
                "line-search sufficient increase {} must lie in (0, 0.5]",
                ls.sufficient_increase
            ));
        }
        if let Some(theta) = &self.initial_theta {
            theta.validate()?;
        }
        Ok(())
    }

    fn lower_bounds(&self) -> [f64; PARAM_COUNT] {
        let e = self.parameter_floor;
        [e, e, e, e, 0.0, 0.0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta_star: TipParams,
    pub log_likelihood: f64,
    /// Session index of each event, aligned with the vectors below.
    pub sessions: Vec<u32>,
    /// μ_k at each event under `theta_star`.
    pub expected_trust: Vec<f64>,
    pub reported_trust: Vec<Option<f64>>,
    /// |μ_k − t_k| where a report exists.
    pub fit_errors: Vec<Option<f64>>,
    pub mean_fit_error: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Fewer than two reports: gains are not identifiable.
    pub low_data: bool,
    /// Objective value at every accepted iterate, starting point first.
    pub objective_trace: Vec<f64>,
}

impl FitResult {
    pub fn reported_errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.fit_errors.iter().flatten().copied()
    }
}

struct Term {
    basis: ExperienceBasis,
    ln_t: f64,
    ln_1mt: f64,
}

/// The log-likelihood of one trajectory, pre-reduced to its linear experience basis.
struct Objective {
    terms: Vec<Term>,
}

impl Objective {
    fn new(trajectory: &Trajectory) -> Result<Self> {
        let terms: Vec<Term> = experience_basis(trajectory)
            .into_iter()
            .filter_map(|basis| {
                basis.reported_trust.map(|t| Term {
                    basis,
                    ln_t: t.ln(),
                    ln_1mt: (-t).ln_1p(),
                })
            })
            .collect();
        if terms.is_empty() {
            return Err(Error::InsufficientData(format!(
                "trajectory {}/{} has no reported trust",
                trajectory.human_id, trajectory.robot_id
            )));
        }
        Ok(Self { terms })
    }

    fn value(&self, theta: &TipParams) -> f64 {
        self.terms
            .iter()
            .map(|term| {
                let a = term.basis.alpha(theta);
                let b = term.basis.beta(theta);
                (a - 1.0) * term.ln_t + (b - 1.0) * term.ln_1mt
                    - (ln_gamma_unchecked(a) + ln_gamma_unchecked(b) - ln_gamma_unchecked(a + b))
            })
            .sum()
    }

    fn gradient(&self, theta: &TipParams) -> [f64; PARAM_COUNT] {
        let mut grad = [0.0; PARAM_COUNT];
        for term in &self.terms {
            let a = term.basis.alpha(theta);
            let b = term.basis.beta(theta);
            let psi_ab = digamma_unchecked(a + b);
            let d_alpha = term.ln_t - digamma_unchecked(a) + psi_ab;
            let d_beta = term.ln_1mt - digamma_unchecked(b) + psi_ab;
            grad[0] += d_alpha;
            grad[1] += d_beta;
            grad[2] += d_alpha * term.basis.success_sum;
            grad[3] += d_beta * term.basis.failure_sum;
            grad[4] += d_alpha * term.basis.indirect_gain_sum;
            grad[5] += d_beta * term.basis.indirect_loss_sum;
        }
        grad
    }
}

/// Log-likelihood of every reported trust value in `trajectory` under `theta`.
pub fn log_likelihood(trajectory: &Trajectory, theta: &TipParams) -> Result<f64> {
    theta.validate()?;
    Ok(Objective::new(trajectory)?.value(theta))
}

/// Analytic gradient of [`log_likelihood`] in `[alpha0, beta0, s, f, s_hat, f_hat]` order.
pub fn gradient(trajectory: &Trajectory, theta: &TipParams) -> Result<[f64; PARAM_COUNT]> {
    theta.validate()?;
    Ok(Objective::new(trajectory)?.gradient(theta))
}

/// Starting point: pseudo-count-2 moment match of the initial rating, unit gains.
pub fn default_initial_theta(trajectory: &Trajectory, floor: f64) -> TipParams {
    let t0 = trajectory.events()[0]
        .reported_trust
        .expect("trajectory starts with a rated prior");
    TipParams {
        alpha0: (2.0 * t0).max(floor),
        beta0: (2.0 * (1.0 - t0)).max(floor),
        s: 1.0,
        f: 1.0,
        s_hat: 1.0,
        f_hat: 1.0,
    }
}

fn project(x: [f64; PARAM_COUNT], lower: &[f64; PARAM_COUNT]) -> [f64; PARAM_COUNT] {
    let mut out = x;
    for (v, lo) in out.iter_mut().zip(lower) {
        *v = v.max(*lo);
    }
    out
}

fn dot(a: &[f64; PARAM_COUNT], b: &[f64; PARAM_COUNT]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximizes the log-likelihood over the parameters marked free in `free`.
///
/// Frozen parameters keep their starting values; for the indirect gains of the
/// direct-only model that value is zero.
pub fn fit_with(
    trajectory: &Trajectory,
    config: &FitConfig,
    free: FreeParams,
) -> Result<FitResult> {
    config.validate()?;
    let objective = Objective::new(trajectory)?;
    let lower = config.lower_bounds();
    let mut start = config
        .initial_theta
        .unwrap_or_else(|| default_initial_theta(trajectory, config.parameter_floor))
        .to_array();
    // Frozen coordinates are left untouched by projection and steps.
    for i in 0..PARAM_COUNT {
        if free.0[i] {
            start[i] = start[i].max(lower[i]);
        }
    }
    let theta0 = TipParams::from_array(start);
    theta0.validate()?;

    let masked_gradient = |theta: &TipParams| {
        let mut g = objective.gradient(theta);
        for (gi, &is_free) in g.iter_mut().zip(&free.0) {
            if !is_free {
                *gi = 0.0;
            }
        }
        g
    };
    let effective_lower = {
        let mut lo = lower;
        for i in 0..PARAM_COUNT {
            if !free.0[i] {
                lo[i] = start[i];
            }
        }
        lo
    };

    let mut x = start;
    let mut h = objective.value(&theta0);
    if !h.is_finite() {
        return Err(Error::NonFinite(format!(
            "initial log-likelihood {h} for {}/{}",
            trajectory.human_id, trajectory.robot_id
        )));
    }
    let mut g = masked_gradient(&theta0);
    let mut trace = vec![h];
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    let ls = config.line_search;

    while iterations < config.max_iterations {
        let probe = project(std::array::from_fn(|i| x[i] + g[i]), &effective_lower);
        let pg_norm = (0..PARAM_COUNT)
            .map(|i| (probe[i] - x[i]).abs())
            .fold(0.0, f64::max);
        if pg_norm < config.gradient_tolerance {
            converged = true;
            break;
        }

        let mut trial = step;
        let mut accepted = None;
        for _ in 0..ls.max_backtracks {
            let cand = project(
                std::array::from_fn(|i| x[i] + trial * g[i]),
                &effective_lower,
            );
            let d: [f64; PARAM_COUNT] = std::array::from_fn(|i| cand[i] - x[i]);
            let predicted = dot(&g, &d);
            let theta = TipParams::from_array(cand);
            let hc = objective.value(&theta);
            if hc.is_finite() && hc >= h + ls.sufficient_increase * predicted {
                accepted = Some((cand, hc, d));
                break;
            }
            trial *= ls.shrink;
        }
        let Some((cand, hc, d)) = accepted else {
            // No ascent step at floating-point resolution.
            break;
        };

        let gc = masked_gradient(&TipParams::from_array(cand));
        let y: [f64; PARAM_COUNT] = std::array::from_fn(|i| gc[i] - g[i]);
        let sy = dot(&d, &y);
        step = if sy < 0.0 {
            (dot(&d, &d) / -sy).clamp(1e-10, 1e10)
        } else {
            (trial * 2.0).min(1e10)
        };

        x = cand;
        h = hc;
        g = gc;
        iterations += 1;
        trace.push(h);
    }
    if !converged {
        let probe = project(std::array::from_fn(|i| x[i] + g[i]), &effective_lower);
        converged = (0..PARAM_COUNT).all(|i| (probe[i] - x[i]).abs() < config.gradient_tolerance);
    }

    let theta_star = TipParams::from_array(x);
    summarize(trajectory, theta_star, h, converged, iterations, trace)
}

fn summarize(
    trajectory: &Trajectory,
    theta_star: TipParams,
    log_likelihood: f64,
    converged: bool,
    iterations: usize,
    objective_trace: Vec<f64>,
) -> Result<FitResult> {
    let steps = replay(trajectory, &theta_star)?;
    let reported_trust: Vec<Option<f64>> = trajectory
        .events()
        .iter()
        .map(|e| e.reported_trust)
        .collect();
    let expected_trust: Vec<f64> = steps.iter().map(|s| s.expected_trust).collect();
    let fit_errors: Vec<Option<f64>> = expected_trust
        .iter()
        .zip(&reported_trust)
        .map(|(mu, t)| t.map(|t| (mu - t).abs()))
        .collect();
    let errors: Vec<f64> = fit_errors.iter().flatten().copied().collect();
    let mean_fit_error = errors.iter().sum::<f64>() / errors.len() as f64;
    Ok(FitResult {
        theta_star,
        log_likelihood,
        sessions: steps.iter().map(|s| s.session).collect(),
        expected_trust,
        reported_trust,
        fit_errors,
        mean_fit_error,
        converged,
        iterations,
        low_data: errors.len() < 2,
        objective_trace,
    })
}

/// Fits all six parameters.
pub fn fit(trajectory: &Trajectory, config: &FitConfig) -> Result<FitResult> {
    fit_with(trajectory, config, FreeParams::ALL)
}

/// Fits the direct-update-only baseline (ŝ = f̂ = 0).
pub fn fit_direct_only(trajectory: &Trajectory, config: &FitConfig) -> Result<FitResult> {
    let start = config
        .initial_theta
        .unwrap_or_else(|| default_initial_theta(trajectory, config.parameter_floor));
    let config = FitConfig {
        initial_theta: Some(start.without_indirect()),
        ..config.clone()
    };
    fit_with(trajectory, &config, FreeParams::DIRECT_ONLY)
}

pub fn fit_model(trajectory: &Trajectory, config: &FitConfig, model: Model) -> Result<FitResult> {
    match model {
        Model::Tip => fit(trajectory, config),
        Model::DirectOnly => fit_direct_only(trajectory, config),
    }
}

/// Fits every trajectory in parallel; results keep the map's key order.
pub fn fit_all<K>(
    trajectories: &BTreeMap<K, Trajectory>,
    config: &FitConfig,
    model: Model,
) -> Result<Vec<(K, FitResult)>>
where
    K: Clone + Send + Sync,
{
    let items: Vec<(&K, &Trajectory)> = trajectories.iter().collect();
    items
        .par_iter()
        .map(|(key, traj)| fit_model(traj, config, model).map(|r| ((*key).clone(), r)))
        .collect()
}

/// Scores fixed parameters against a trajectory without optimizing.
///
/// The result has `iterations = 0` and `converged = false`; only the fit
/// errors, expected trust and log-likelihood are meaningful.
pub fn evaluate(trajectory: &Trajectory, theta: &TipParams) -> Result<FitResult> {
    let h = log_likelihood(trajectory, theta)?;
    summarize(trajectory, *theta, h, false, 0, vec![h])
}

/// Root-mean-square fit error across participants: the square root of the
/// participant-average of each participant's mean squared error.
pub fn rmse<'a>(results: impl IntoIterator<Item = &'a FitResult>) -> Result<f64> {
    let mut total = 0.0;
    let mut participants = 0usize;
    for result in results {
        let errors: Vec<f64> = result.reported_errors().collect();
        if errors.is_empty() {
            return Err(Error::InsufficientData(
                "fit result without reported trust".into(),
            ));
        }
        total += errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64;
        participants += 1;
    }
    if participants == 0 {
        return Err(Error::InsufficientData("no fit results for RMSE".into()));
    }
    Ok((total / participants as f64).sqrt())
}

/// [`rmse`] grouped by robot identifier.
pub fn rmse_by_robot<'a>(
    results: impl IntoIterator<Item = (&'a str, &'a FitResult)>,
) -> Result<BTreeMap<String, f64>> {
    let mut groups: BTreeMap<String, Vec<&FitResult>> = BTreeMap::new();
    for (robot, result) in results {
        groups.entry(robot.to_string()).or_default().push(result);
    }
    groups
        .into_iter()
        .map(|(robot, rs)| rmse(rs).map(|v| (robot, v)))
        .collect()
}

/// Sample mean and (n − 1)-denominator standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Paired comparison of two per-participant error samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedSummary {
    pub n: usize,
    pub mean_first: f64,
    pub sd_first: f64,
    pub mean_second: f64,
    pub sd_second: f64,
    pub mean_difference: f64,
    pub sd_difference: f64,
    /// mean(d) / (sd(d)/√n) with d = first − second; degrees of freedom n − 1.
    pub t_statistic: f64,
    pub degrees_of_freedom: usize,
}

pub fn paired_summary(first: &[f64], second: &[f64]) -> Result<PairedSummary> {
    if first.len() != second.len() {
        return Err(Error::InsufficientData(format!(
            "paired samples differ in length ({} vs {})",
            first.len(),
            second.len()
        )));
    }
    if first.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "paired comparison needs at least 2 participants, got {}",
            first.len()
        )));
    }
    let diffs: Vec<f64> = first.iter().zip(second).map(|(a, b)| a - b).collect();
    let (mean_first, sd_first) = mean_sd(first);
    let (mean_second, sd_second) = mean_sd(second);
    let (mean_difference, sd_difference) = mean_sd(&diffs);
    let n = first.len();
    let t_statistic = if sd_difference > 0.0 {
        mean_difference / (sd_difference / (n as f64).sqrt())
    } else if mean_difference == 0.0 {
        0.0
    } else {
        mean_difference.signum() * f64::INFINITY
    };
    Ok(PairedSummary {
        n,
        mean_first,
        sd_first,
        mean_second,
        sd_second,
        mean_difference,
        sd_difference,
        t_statistic,
        degrees_of_freedom: n - 1,
    })
}
