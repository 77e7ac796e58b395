//! Trust state and its update rules.
//!
//! A trustor's trust in a trustee is `Beta(α, β)`, where α and β accumulate
//! positive and negative experience. Direct interaction adds performance-weighted
//! experience; a teammate's communicated trust adds indirect experience in
//! proportion to how far it sits above or below the trustor's own last report,
//! discounted by the trustor's trust in that teammate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::BetaParams;

pub const PARAM_COUNT: usize = 6;
pub const PARAM_NAMES: [&str; PARAM_COUNT] = ["alpha0", "beta0", "s", "f", "s_hat", "f_hat"];

/// Per (human, robot) model parameters: priors, direct gains, indirect gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipParams {
    pub alpha0: f64,
    pub beta0: f64,
    pub s: f64,
    pub f: f64,
    pub s_hat: f64,
    pub f_hat: f64,
}

impl TipParams {
    pub fn new(alpha0: f64, beta0: f64, s: f64, f: f64, s_hat: f64, f_hat: f64) -> Result<Self> {
        let params = Self {
            alpha0,
            beta0,
            s,
            f,
            s_hat,
            f_hat,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let values = self.to_array();
        for (i, (&name, &value)) in PARAM_NAMES.iter().zip(values.iter()).enumerate() {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite",
                });
            }
            if i < 4 && value <= 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be > 0",
                });
            }
            if i >= 4 && value < 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be >= 0",
                });
            }
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; PARAM_COUNT] {
        [
            self.alpha0,
            self.beta0,
            self.s,
            self.f,
            self.s_hat,
            self.f_hat,
        ]
    }

    /// Builds parameters from `[alpha0, beta0, s, f, s_hat, f_hat]` without validation.
    pub fn from_array(v: [f64; PARAM_COUNT]) -> Self {
        Self {
            alpha0: v[0],
            beta0: v[1],
            s: v[2],
            f: v[3],
            s_hat: v[4],
            f_hat: v[5],
        }
    }

    /// Same parameters with the indirect gains zeroed (the direct-update-only model).
    pub fn without_indirect(self) -> Self {
        Self {
            s_hat: 0.0,
            f_hat: 0.0,
            ..self
        }
    }
}

/// Cumulative experience and the trustor's most recent reported trust.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperienceState {
    pub alpha: f64,
    pub beta: f64,
    pub last_reported_trust: Option<f64>,
}

impl ExperienceState {
    pub fn prior(params: &TipParams) -> Self {
        Self {
            alpha: params.alpha0,
            beta: params.beta0,
            last_reported_trust: None,
        }
    }

    /// μ = α / (α + β)
    pub fn expected_trust(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn distribution(&self) -> Result<BetaParams> {
        BetaParams::new(self.alpha, self.beta)
    }
}

fn check_open_unit(function: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            function,
            value,
            expected: "0 < t < 1",
        })
    }
}

fn check_measurement(value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            function: "direct_update",
            value,
            expected: "finite performance measurement >= 0",
        })
    }
}

/// Direct experience: α += s·p, β += f·p̄.
pub fn direct_update(
    state: &ExperienceState,
    params: &TipParams,
    perf_success: f64,
    perf_failure: f64,
) -> Result<ExperienceState> {
    check_measurement(perf_success)?;
    check_measurement(perf_failure)?;
    Ok(ExperienceState {
        alpha: state.alpha + params.s * perf_success,
        beta: state.beta + params.f * perf_failure,
        last_reported_trust: state.last_reported_trust,
    })
}

/// Indirect experience from a recommender's communicated trust.
///
/// With Δ = `recommender_trust − own_previous_trust`, a non-negative Δ adds
/// `ŝ · trust_in_recommender · Δ` to α; a negative Δ adds
/// `f̂ · trust_in_recommender · |Δ|` to β. A zero Δ changes nothing.
pub fn indirect_update(
    state: &ExperienceState,
    params: &TipParams,
    trust_in_recommender: f64,
    recommender_trust: f64,
    own_previous_trust: f64,
) -> Result<ExperienceState> {
    check_open_unit("indirect_update", trust_in_recommender)?;
    check_open_unit("indirect_update", recommender_trust)?;
    check_open_unit("indirect_update", own_previous_trust)?;
    let (gain, loss) =
        indirect_evidence(trust_in_recommender, recommender_trust, own_previous_trust);
    Ok(ExperienceState {
        alpha: state.alpha + params.s_hat * gain,
        beta: state.beta + params.f_hat * loss,
        last_reported_trust: state.last_reported_trust,
    })
}

/// Discounted positive and negative parts of the trust gap. At most one is non-zero.
fn indirect_evidence(
    trust_in_recommender: f64,
    recommender_trust: f64,
    own_previous_trust: f64,
) -> (f64, f64) {
    let delta = recommender_trust - own_previous_trust;
    if delta >= 0.0 {
        (trust_in_recommender * delta, 0.0)
    } else {
        (0.0, trust_in_recommender * -delta)
    }
}

/// Limit of expected trust under endlessly repeated direct updates with fixed performance.
pub fn asymptotic_trust(params: &TipParams, perf_success: f64, perf_failure: f64) -> Result<f64> {
    check_measurement(perf_success)?;
    check_measurement(perf_failure)?;
    if perf_success + perf_failure <= 0.0 {
        return Err(Error::Domain {
            function: "asymptotic_trust",
            value: perf_success + perf_failure,
            expected: "perf_success + perf_failure > 0",
        });
    }
    let positive = params.s * perf_success;
    Ok(positive / (positive + params.f * perf_failure))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    /// Initial rating before any interaction.
    Prior,
    /// The trustor worked with the robot; `success`/`failure` are its performance measurements.
    Direct { success: f64, failure: f64 },
    /// A teammate communicated `recommender_trust` in the robot; `trust_in_recommender`
    /// is the trustor's trust in that teammate.
    Indirect {
        trust_in_recommender: f64,
        recommender_trust: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustEvent {
    pub session: u32,
    pub kind: EventKind,
    pub reported_trust: Option<f64>,
}

impl TrustEvent {
    pub fn prior(initial_trust: f64) -> Self {
        Self {
            session: 0,
            kind: EventKind::Prior,
            reported_trust: Some(initial_trust),
        }
    }

    pub fn direct(session: u32, success: f64, failure: f64, reported_trust: Option<f64>) -> Self {
        Self {
            session,
            kind: EventKind::Direct { success, failure },
            reported_trust,
        }
    }

    pub fn indirect(
        session: u32,
        trust_in_recommender: f64,
        recommender_trust: f64,
        reported_trust: Option<f64>,
    ) -> Self {
        Self {
            session,
            kind: EventKind::Indirect {
                trust_in_recommender,
                recommender_trust,
            },
            reported_trust,
        }
    }

    fn validate_values(&self) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Error::MalformedTrajectory(format!(
                "session {}: {what} = {v} out of range",
                self.session
            ))
        };
        if let Some(t) = self.reported_trust {
            if !(t > 0.0 && t < 1.0) {
                return Err(bad("reported_trust", t));
            }
        }
        match self.kind {
            EventKind::Prior => {}
            EventKind::Direct { success, failure } => {
                for (name, v) in [("perf_success", success), ("perf_failure", failure)] {
                    if !(v.is_finite() && v >= 0.0) {
                        return Err(bad(name, v));
                    }
                }
            }
            EventKind::Indirect {
                trust_in_recommender,
                recommender_trust,
            } => {
                for (name, v) in [
                    ("trust_in_recommender", trust_in_recommender),
                    ("recommender_trust", recommender_trust),
                ] {
                    if !(v > 0.0 && v < 1.0) {
                        return Err(bad(name, v));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Ordered events for one (human, robot) pair.
///
/// Always starts with a rated `Prior` event at session 0; sessions strictly increase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub human_id: String,
    pub robot_id: String,
    events: Vec<TrustEvent>,
}

impl Trajectory {
    pub fn new(
        human_id: impl Into<String>,
        robot_id: impl Into<String>,
        events: Vec<TrustEvent>,
    ) -> Result<Self> {
        let mut iter = events.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::MalformedTrajectory("no events".into()))?;
        let mut trajectory = Self::start(human_id, robot_id, first)?;
        for event in iter {
            trajectory.push(event)?;
        }
        Ok(trajectory)
    }

    /// Starts a trajectory from its prior event.
    pub fn start(
        human_id: impl Into<String>,
        robot_id: impl Into<String>,
        prior: TrustEvent,
    ) -> Result<Self> {
        if prior.kind != EventKind::Prior || prior.session != 0 {
            return Err(Error::MalformedTrajectory(
                "first event must be a prior at session 0".into(),
            ));
        }
        if prior.reported_trust.is_none() {
            return Err(Error::MalformedTrajectory(
                "prior event needs a reported trust".into(),
            ));
        }
        prior.validate_values()?;
        Ok(Self {
            human_id: human_id.into(),
            robot_id: robot_id.into(),
            events: vec![prior],
        })
    }

    pub fn push(&mut self, event: TrustEvent) -> Result<()> {
        if event.kind == EventKind::Prior {
            return Err(Error::MalformedTrajectory(format!(
                "session {}: duplicate prior event",
                event.session
            )));
        }
        let last = self.events.last().map_or(0, |e| e.session);
        if event.session <= last {
            return Err(Error::MalformedTrajectory(format!(
                "session {} does not follow session {last}",
                event.session
            )));
        }
        event.validate_values()?;
        self.events.push(event);
        Ok(())
    }

    pub fn events(&self) -> &[TrustEvent] {
        &self.events
    }

    pub fn report_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.reported_trust.is_some())
            .count()
    }

    pub fn has_indirect_events(&self) -> bool {
        self.events
            .iter()
            .any(|e| matches!(e.kind, EventKind::Indirect { .. }))
    }

    /// Copy of this trajectory with every indirect event removed.
    pub fn direct_only(&self) -> Self {
        Self {
            human_id: self.human_id.clone(),
            robot_id: self.robot_id.clone(),
            events: self
                .events
                .iter()
                .filter(|e| !matches!(e.kind, EventKind::Indirect { .. }))
                .copied()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayStep {
    pub session: u32,
    pub state: ExperienceState,
    pub expected_trust: f64,
}

/// Applies every event of `trajectory` in order starting from `(α₀, β₀)`.
///
/// Indirect events compare against the trustor's most recent *reported* trust,
/// which keeps α and β linear in the parameters.
pub fn replay(trajectory: &Trajectory, params: &TipParams) -> Result<Vec<ReplayStep>> {
    params.validate()?;
    let mut state = ExperienceState::prior(params);
    let mut steps = Vec::with_capacity(trajectory.events.len());
    for event in &trajectory.events {
        state = match event.kind {
            EventKind::Prior => state,
            EventKind::Direct { success, failure } => {
                direct_update(&state, params, success, failure)?
            }
            EventKind::Indirect {
                trust_in_recommender,
                recommender_trust,
            } => {
                let own_previous = state.last_reported_trust.ok_or_else(|| {
                    Error::MalformedTrajectory(format!(
                        "session {}: indirect event before any reported trust",
                        event.session
                    ))
                })?;
                indirect_update(
                    &state,
                    params,
                    trust_in_recommender,
                    recommender_trust,
                    own_previous,
                )?
            }
        };
        if let Some(t) = event.reported_trust {
            state.last_reported_trust = Some(t);
        }
        steps.push(ReplayStep {
            session: event.session,
            state,
            expected_trust: state.expected_trust(),
        });
    }
    Ok(steps)
}

/// Coefficients expressing one event's (α, β) as linear functions of the parameters:
///
/// α = α₀ + s·`success_sum` + ŝ·`indirect_gain_sum`,
/// β = β₀ + f·`failure_sum` + f̂·`indirect_loss_sum`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperienceBasis {
    pub session: u32,
    pub success_sum: f64,
    pub failure_sum: f64,
    pub indirect_gain_sum: f64,
    pub indirect_loss_sum: f64,
    pub reported_trust: Option<f64>,
}

impl ExperienceBasis {
    pub fn alpha(&self, params: &TipParams) -> f64 {
        params.alpha0 + params.s * self.success_sum + params.s_hat * self.indirect_gain_sum
    }

    pub fn beta(&self, params: &TipParams) -> f64 {
        params.beta0 + params.f * self.failure_sum + params.f_hat * self.indirect_loss_sum
    }
}

/// Running sums for each event; independent of the parameters.
pub fn experience_basis(trajectory: &Trajectory) -> Vec<ExperienceBasis> {
    let mut acc = ExperienceBasis {
        session: 0,
        success_sum: 0.0,
        failure_sum: 0.0,
        indirect_gain_sum: 0.0,
        indirect_loss_sum: 0.0,
        reported_trust: None,
    };
    let mut last_report: Option<f64> = None;
    let mut rows = Vec::with_capacity(trajectory.events.len());
    for event in &trajectory.events {
        match event.kind {
            EventKind::Prior => {}
            EventKind::Direct { success, failure } => {
                acc.success_sum += success;
                acc.failure_sum += failure;
            }
            EventKind::Indirect {
                trust_in_recommender,
                recommender_trust,
            } => {
                // Trajectory construction guarantees a prior report exists.
                let own_previous = last_report.expect("prior report present");
                let (gain, loss) =
                    indirect_evidence(trust_in_recommender, recommender_trust, own_previous);
                acc.indirect_gain_sum += gain;
                acc.indirect_loss_sum += loss;
            }
        }
        if event.reported_trust.is_some() {
            last_report = event.reported_trust;
        }
        acc.session = event.session;
        acc.reported_trust = event.reported_trust;
        rows.push(acc);
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha0: f64, beta0: f64, s: f64, f: f64, s_hat: f64, f_hat: f64) -> TipParams {
        TipParams::new(alpha0, beta0, s, f, s_hat, f_hat).unwrap()
    }

    fn state(alpha: f64, beta: f64) -> ExperienceState {
        ExperienceState {
            alpha,
            beta,
            last_reported_trust: Some(0.5),
        }
    }

    #[test]
    fn direct_update_examples() {
        let out = direct_update(
            &state(2.0, 2.0),
            &params(1.0, 1.0, 1.0, 1.0, 0.0, 0.0),
            0.9,
            0.1,
        )
        .unwrap();
        assert!((out.alpha - 2.9).abs() < 1e-15 && (out.beta - 2.1).abs() < 1e-15);
        assert_eq!(out.last_reported_trust, Some(0.5));

        let out = direct_update(
            &state(2.0, 2.0),
            &params(1.0, 1.0, 1.0, 1.0, 0.0, 0.0),
            0.0,
            0.0,
        )
        .unwrap();
        assert_eq!(out, state(2.0, 2.0));

        let out = direct_update(
            &state(2.0, 2.0),
            &params(1.0, 1.0, 2.0, 0.5, 0.0, 0.0),
            1.0,
            0.0,
        )
        .unwrap();
        assert_eq!((out.alpha, out.beta), (4.0, 2.0));
    }

    #[test]
    fn direct_update_rejects_negative_measurements() {
        let p = params(1.0, 1.0, 1.0, 1.0, 0.0, 0.0);
        assert!(direct_update(&state(2.0, 2.0), &p, -0.1, 0.5).is_err());
        assert!(direct_update(&state(2.0, 2.0), &p, 0.1, f64::NAN).is_err());
    }

    #[test]
    fn indirect_update_examples() {
        let p = params(1.0, 1.0, 1.0, 1.0, 1.0, 2.0);
        let out = indirect_update(&state(2.0, 2.0), &p, 0.8, 0.9, 0.5).unwrap();
        assert!((out.alpha - 2.32).abs() < 1e-15);
        assert_eq!(out.beta, 2.0);

        let out = indirect_update(&state(2.0, 2.0), &p, 0.8, 0.6, 0.6).unwrap();
        assert_eq!(out, state(2.0, 2.0));

        let out = indirect_update(&state(2.0, 2.0), &p, 0.5, 0.3, 0.7).unwrap();
        assert_eq!(out.alpha, 2.0);
        assert!((out.beta - 2.4).abs() < 1e-15);
    }

    #[test]
    fn indirect_update_rejects_out_of_range_trust() {
        let p = params(1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        for bad in [0.0, 1.0, -0.2, 1.3] {
            assert!(indirect_update(&state(2.0, 2.0), &p, bad, 0.5, 0.5).is_err());
            assert!(indirect_update(&state(2.0, 2.0), &p, 0.5, bad, 0.5).is_err());
            assert!(indirect_update(&state(2.0, 2.0), &p, 0.5, 0.5, bad).is_err());
        }
    }

    #[test]
    fn params_validation() {
        assert!(TipParams::new(1.0, 1.0, 1.0, 1.0, 0.0, 0.0).is_ok());
        assert!(TipParams::new(0.0, 1.0, 1.0, 1.0, 0.0, 0.0).is_err());
        assert!(TipParams::new(1.0, 1.0, 0.0, 1.0, 0.0, 0.0).is_err());
        assert!(TipParams::new(1.0, 1.0, 1.0, 1.0, -1e-9, 0.0).is_err());
        assert!(TipParams::new(1.0, 1.0, 1.0, f64::INFINITY, 0.0, 0.0).is_err());
    }

    #[test]
    fn replay_prior_only() {
        let traj = Trajectory::new("x", "A", vec![TrustEvent::prior(0.4)]).unwrap();
        let steps = replay(&traj, &params(2.0, 3.0, 1.0, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!((steps[0].state.alpha, steps[0].state.beta), (2.0, 3.0));
        assert!((steps[0].expected_trust - 0.4).abs() < 1e-15);
    }

    #[test]
    fn replay_uses_last_reported_trust_for_indirect() {
        let traj = Trajectory::new(
            "x",
            "A",
            vec![
                TrustEvent::prior(0.5),
                TrustEvent::direct(1, 0.9, 0.1, Some(0.7)),
                TrustEvent::direct(2, 0.5, 0.5, None),
                TrustEvent::indirect(3, 0.5, 0.9, Some(0.8)),
            ],
        )
        .unwrap();
        let p = params(2.0, 2.0, 1.0, 1.0, 2.0, 2.0);
        let steps = replay(&traj, &p).unwrap();
        // last report before session 3 is 0.7 (session 2 had none)
        let expected_alpha = 2.0 + 0.9 + 0.5 + 2.0 * 0.5 * (0.9 - 0.7);
        assert!((steps[3].state.alpha - expected_alpha).abs() < 1e-14);
        assert!((steps[3].state.beta - 2.6).abs() < 1e-14);
    }

    #[test]
    fn trajectory_structure_is_enforced() {
        assert!(Trajectory::new("x", "A", vec![]).is_err());
        assert!(
            Trajectory::new("x", "A", vec![TrustEvent::direct(0, 1.0, 0.0, Some(0.5))]).is_err()
        );
        let unrated = TrustEvent {
            reported_trust: None,
            ..TrustEvent::prior(0.5)
        };
        assert!(Trajectory::new("x", "A", vec![unrated]).is_err());
        assert!(Trajectory::new(
            "x",
            "A",
            vec![TrustEvent::prior(0.5), TrustEvent::prior(0.6)]
        )
        .is_err());
        assert!(Trajectory::new(
            "x",
            "A",
            vec![
                TrustEvent::prior(0.5),
                TrustEvent::direct(2, 1.0, 0.0, Some(0.5)),
                TrustEvent::direct(2, 1.0, 0.0, Some(0.5)),
            ]
        )
        .is_err());
        assert!(Trajectory::new(
            "x",
            "A",
            vec![
                TrustEvent::prior(0.5),
                TrustEvent::indirect(1, 1.2, 0.4, Some(0.5))
            ]
        )
        .is_err());
    }

    #[test]
    fn basis_reproduces_replay() {
        let traj = Trajectory::new(
            "x",
            "A",
            vec![
                TrustEvent::prior(0.3),
                TrustEvent::direct(1, 0.8, 0.2, Some(0.45)),
                TrustEvent::indirect(2, 0.6, 0.2, Some(0.4)),
                TrustEvent::indirect(3, 0.9, 0.95, Some(0.6)),
                TrustEvent::direct(4, 0.3, 0.7, Some(0.5)),
            ],
        )
        .unwrap();
        let p = params(1.5, 2.5, 1.2, 0.7, 3.0, 4.0);
        let steps = replay(&traj, &p).unwrap();
        for (row, step) in experience_basis(&traj).iter().zip(&steps) {
            assert!((row.alpha(&p) - step.state.alpha).abs() < 1e-12);
            assert!((row.beta(&p) - step.state.beta).abs() < 1e-12);
        }
    }

    #[test]
    fn asymptotic_trust_examples() {
        let sym = params(1.0, 1.0, 1.7, 1.7, 0.0, 0.0);
        assert!((asymptotic_trust(&sym, 0.4, 0.4).unwrap() - 0.5).abs() < 1e-15);
        let p = params(1.0, 1.0, 2.0, 1.0, 0.0, 0.0);
        assert!((asymptotic_trust(&p, 0.9, 0.1).unwrap() - 18.0 / 19.0).abs() < 1e-15);
        let unit = params(1.0, 1.0, 1.0, 1.0, 0.0, 0.0);
        assert!((asymptotic_trust(&unit, 0.6, 0.4).unwrap() - 0.6).abs() < 1e-15);
        assert!(asymptotic_trust(&unit, 0.0, 0.0).is_err());
    }

    #[test]
    fn asymptotic_trust_matches_long_replay() {
        let p = params(1.0, 1.0, 2.0, 1.0, 0.0, 0.0);
        let mut s = ExperienceState::prior(&p);
        for _ in 0..100_000 {
            s = direct_update(&s, &p, 0.9, 0.1).unwrap();
        }
        assert!((s.expected_trust() - 18.0 / 19.0).abs() < 1e-3);
    }
}
