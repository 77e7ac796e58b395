//! Seeded simulation of the two-human, two-drone detection experiment.
//!
//! Each session every human works with one robot. The robot's number of correct
//! detections is `Binomial(n_locations, accuracy)`, giving `p = correct / n` and
//! `p̄ = 1 − p`. Within a session the rating order is fixed: each human updates and
//! reports trust in their own robot, reports are exchanged, then each human
//! updates and reports trust in the robots their teammates used.
//!
//! Randomness comes from ChaCha8 streams keyed by `(seed, team, purpose)` so that
//! robot assignment, robot performance, and reporting noise are independent and
//! reproducible on every platform.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{
    direct_update, indirect_update, ExperienceState, TipParams, Trajectory, TrustEvent,
};

const STREAM_ASSIGNMENT: u64 = 0;
const STREAM_PERFORMANCE: u64 = 1;
const STREAM_REPORTS: u64 = 2;
const STREAMS_PER_TEAM: u64 = 4;

/// Identifies one trustor/trustee pair within a team.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairKey {
    pub team_id: String,
    pub human_id: String,
    pub robot_id: String,
}

impl PairKey {
    pub fn new(
        team_id: impl Into<String>,
        human_id: impl Into<String>,
        robot_id: impl Into<String>,
    ) -> Self {
        Self {
            team_id: team_id.into(),
            human_id: human_id.into(),
            robot_id: robot_id.into(),
        }
    }
}

impl std::fmt::Display for PairKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}/{}", self.team_id, self.human_id, self.robot_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentRule {
    /// Robots randomly permuted over humans every session.
    RandomEachSession,
    /// Human `i` always works with robot `i`.
    Fixed,
    /// Human `i` works with robot `(i + k − 1) mod M` in session `k`.
    Alternating,
    /// Taken from `ExperimentConfig::schedule`.
    Explicit,
}

/// A human's reported trust in their teammate, indexed by session `0..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TeammateTrust {
    Constant(f64),
    PerSession(Vec<f64>),
}

impl TeammateTrust {
    pub fn at(&self, session: u32) -> f64 {
        match self {
            TeammateTrust::Constant(v) => *v,
            TeammateTrust::PerSession(v) => v[session as usize],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub id: String,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanSpec {
    pub id: String,
    /// Exogenous trust in the teammate(s).
    pub teammate_trust: TeammateTrust,
    /// Ground-truth parameters keyed by robot id.
    pub params: BTreeMap<String, TipParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_sessions: u32,
    pub n_locations: u32,
    pub n_teams: u32,
    pub seed: u64,
    pub assignment: AssignmentRule,
    /// `schedule[k − 1][i]` is the robot index used by human `i` in session `k`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<Vec<usize>>>,
    pub robots: Vec<RobotSpec>,
    pub humans: Vec<HumanSpec>,
}

impl Default for ExperimentConfig {
    /// Two humans, drones A (90 %) and B (60 %), 15 sessions of 10 locations.
    fn default() -> Self {
        let robots = vec![
            RobotSpec {
                id: "A".into(),
                accuracy: 0.9,
            },
            RobotSpec {
                id: "B".into(),
                accuracy: 0.6,
            },
        ];
        let human = |id: &str, params: TipParams| HumanSpec {
            id: id.into(),
            teammate_trust: TeammateTrust::Constant(0.7),
            params: robots.iter().map(|r| (r.id.clone(), params)).collect(),
        };
        let humans = vec![
            human("x", TipParams::from_array([3.0, 2.0, 1.5, 2.5, 4.0, 4.0])),
            human("y", TipParams::from_array([2.0, 2.0, 2.0, 2.0, 3.0, 5.0])),
        ];
        Self {
            n_sessions: 15,
            n_locations: 10,
            n_teams: 1,
            seed: 0,
            assignment: AssignmentRule::RandomEachSession,
            schedule: None,
            robots,
            humans,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_sessions == 0 || self.n_locations == 0 || self.n_teams == 0 {
            return bad("n_sessions, n_locations and n_teams must be positive".into());
        }
        if self.robots.is_empty() || self.humans.is_empty() {
            return bad("need at least one robot and one human".into());
        }
        let robot_ids: BTreeSet<&str> = self.robots.iter().map(|r| r.id.as_str()).collect();
        if robot_ids.len() != self.robots.len() {
            return bad("duplicate robot id".into());
        }
        let human_ids: BTreeSet<&str> = self.humans.iter().map(|h| h.id.as_str()).collect();
        if human_ids.len() != self.humans.len() {
            return bad("duplicate human id".into());
        }
        for r in &self.robots {
            if !(0.0..=1.0).contains(&r.accuracy) {
                return bad(format!(
                    "robot {} accuracy {} outside [0, 1]",
                    r.id, r.accuracy
                ));
            }
        }
        if self.humans.len() > self.robots.len() {
            return bad("each human needs its own robot every session".into());
        }
        for h in &self.humans {
            let keys: BTreeSet<&str> = h.params.keys().map(String::as_str).collect();
            if keys != robot_ids {
                return bad(format!(
                    "human {} must have parameters for exactly the configured robots",
                    h.id
                ));
            }
            for (robot, p) in &h.params {
                p.validate()
                    .map_err(|e| Error::Config(format!("human {} robot {robot}: {e}", h.id)))?;
            }
            let values: Vec<f64> = match &h.teammate_trust {
                TeammateTrust::Constant(v) => vec![*v],
                TeammateTrust::PerSession(v) => {
                    if v.len() < self.n_sessions as usize + 1 {
                        return bad(format!(
                            "human {} teammate_trust lists {} values, need {}",
                            h.id,
                            v.len(),
                            self.n_sessions + 1
                        ));
                    }
                    v.clone()
                }
            };
            if let Some(v) = values.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
                return bad(format!("human {} teammate trust {v} outside (0, 1)", h.id));
            }
        }
        let two_by_two = self.humans.len() == 2 && self.robots.len() == 2;
        match (self.assignment, &self.schedule) {
            (AssignmentRule::Explicit, None) => {
                return bad("assignment = explicit requires a schedule".into())
            }
            (AssignmentRule::Explicit, Some(schedule)) => {
                if schedule.len() != self.n_sessions as usize {
                    return bad(format!(
                        "schedule has {} sessions, need {}",
                        schedule.len(),
                        self.n_sessions
                    ));
                }
                for (k, row) in schedule.iter().enumerate() {
                    let distinct: BTreeSet<usize> = row.iter().copied().collect();
                    if row.len() != self.humans.len()
                        || distinct.len() != row.len()
                        || row.iter().any(|&r| r >= self.robots.len())
                    {
                        return bad(format!(
                            "schedule row {} must give each human a distinct valid robot index",
                            k + 1
                        ));
                    }
                }
            }
            (_, Some(_)) => return bad("schedule is only used with assignment = explicit".into()),
            (_, None) if !two_by_two => {
                return bad("teams other than 2 humans x 2 robots need an explicit schedule".into())
            }
            _ => {}
        }
        Ok(())
    }

    pub fn team_id(&self, team: u32) -> String {
        format!("team-{:02}", team + 1)
    }
}

/// How simulated humans report trust.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportNoise {
    /// Reported trust is a draw from the current Beta distribution.
    BetaSampled,
    /// Reported trust equals the expected trust (noise-free).
    ExpectedValue,
}

/// One human's view of one robot at the end of a session.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub human_id: String,
    pub robot_id: String,
    /// The human worked with this robot in this session.
    pub assigned: bool,
    /// The robot's correct detections, if it was deployed this session.
    pub correct: Option<u32>,
    /// The human's reported trust in the robot, if it was updated this session.
    pub reported_trust: Option<f64>,
    /// The human's reported trust in the teammate.
    pub teammate_trust: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub team_id: String,
    pub session: u32,
    pub n_locations: u32,
    pub entries: Vec<LogEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub logs: Vec<SessionLog>,
    pub trajectories: BTreeMap<PairKey, Trajectory>,
}

fn stream(seed: u64, team: u32, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(team as u64 * STREAMS_PER_TEAM + purpose);
    rng
}

fn report(state: &ExperienceState, noise: ReportNoise, rng: &mut ChaCha8Rng) -> Result<f64> {
    Ok(match noise {
        ReportNoise::ExpectedValue => state.expected_trust(),
        ReportNoise::BetaSampled => state.distribution()?.sample(rng),
    })
}

/// Runs every team of the configured experiment with Beta-sampled trust reports.
pub fn run_experiment(config: &ExperimentConfig) -> Result<SimulationOutput> {
    simulate(config, ReportNoise::BetaSampled)
}

/// Trajectories only, with a choice of reporting noise.
pub fn generate_synthetic(
    config: &ExperimentConfig,
    noise: ReportNoise,
) -> Result<BTreeMap<PairKey, Trajectory>> {
    Ok(simulate(config, noise)?.trajectories)
}

pub fn simulate(config: &ExperimentConfig, noise: ReportNoise) -> Result<SimulationOutput> {
    config.validate()?;
    let mut output = SimulationOutput {
        logs: Vec::new(),
        trajectories: BTreeMap::new(),
    };
    for team in 0..config.n_teams {
        simulate_team(config, team, noise, &mut output)?;
    }
    Ok(output)
}

fn simulate_team(
    config: &ExperimentConfig,
    team: u32,
    noise: ReportNoise,
    out: &mut SimulationOutput,
) -> Result<()> {
    let team_id = config.team_id(team);
    let mut assign_rng = stream(config.seed, team, STREAM_ASSIGNMENT);
    let mut perf_rng = stream(config.seed, team, STREAM_PERFORMANCE);
    let mut report_rng = stream(config.seed, team, STREAM_REPORTS);
    let n_humans = config.humans.len();
    let n_robots = config.robots.len();

    // states[h][r], trajectories[h][r]
    let mut states: Vec<Vec<ExperienceState>> = Vec::with_capacity(n_humans);
    let mut trajectories: Vec<Vec<Trajectory>> = Vec::with_capacity(n_humans);
    let mut entries = Vec::new();
    for human in &config.humans {
        let mut row_states = Vec::with_capacity(n_robots);
        let mut row_traj = Vec::with_capacity(n_robots);
        for robot in &config.robots {
            let params = &human.params[&robot.id];
            let mut state = ExperienceState::prior(params);
            let t0 = report(&state, noise, &mut report_rng)?;
            state.last_reported_trust = Some(t0);
            row_traj.push(Trajectory::start(
                &human.id,
                &robot.id,
                TrustEvent::prior(t0),
            )?);
            row_states.push(state);
            entries.push(LogEntry {
                human_id: human.id.clone(),
                robot_id: robot.id.clone(),
                assigned: false,
                correct: None,
                reported_trust: Some(t0),
                teammate_trust: human.teammate_trust.at(0),
            });
        }
        states.push(row_states);
        trajectories.push(row_traj);
    }
    out.logs.push(SessionLog {
        team_id: team_id.clone(),
        session: 0,
        n_locations: config.n_locations,
        entries,
    });

    let mut robot_order: Vec<usize> = (0..n_robots).collect();
    for k in 1..=config.n_sessions {
        let assignment: Vec<usize> = match config.assignment {
            AssignmentRule::RandomEachSession => {
                robot_order.sort_unstable();
                robot_order.shuffle(&mut assign_rng);
                robot_order[..n_humans].to_vec()
            }
            AssignmentRule::Fixed => (0..n_humans).collect(),
            AssignmentRule::Alternating => (0..n_humans)
                .map(|i| (i + k as usize - 1) % n_robots)
                .collect(),
            AssignmentRule::Explicit => {
                config.schedule.as_ref().expect("validated schedule")[k as usize - 1].clone()
            }
        };
        let mut user_of: Vec<Option<usize>> = vec![None; n_robots];
        for (h, &r) in assignment.iter().enumerate() {
            user_of[r] = Some(h);
        }

        let mut correct: Vec<Option<u32>> = vec![None; n_robots];
        for (r, robot) in config.robots.iter().enumerate() {
            if user_of[r].is_some() {
                let binomial = Binomial::new(config.n_locations as u64, robot.accuracy)
                    .map_err(|e| Error::Config(format!("robot {}: {e}", robot.id)))?;
                correct[r] = Some(binomial.sample(&mut perf_rng) as u32);
            }
        }

        let mut reports: Vec<Vec<Option<f64>>> = vec![vec![None; n_robots]; n_humans];

        // Own robot first.
        for (h, &r) in assignment.iter().enumerate() {
            let success =
                correct[r].expect("deployed robot has a count") as f64 / config.n_locations as f64;
            let failure = 1.0 - success;
            let params = &config.humans[h].params[&config.robots[r].id];
            let mut state = direct_update(&states[h][r], params, success, failure)?;
            let t = report(&state, noise, &mut report_rng)?;
            state.last_reported_trust = Some(t);
            states[h][r] = state;
            reports[h][r] = Some(t);
            trajectories[h][r].push(TrustEvent::direct(k, success, failure, Some(t)))?;
        }

        // Then the robots teammates used, from their fresh reports.
        for h in 0..n_humans {
            let human = &config.humans[h];
            let trust_in_teammate = human.teammate_trust.at(k - 1);
            for r in 0..n_robots {
                let Some(teammate) = user_of[r] else { continue };
                if teammate == h {
                    continue;
                }
                let recommender_trust =
                    reports[teammate][r].expect("teammate reported on own robot");
                let params = &human.params[&config.robots[r].id];
                let own_previous = states[h][r]
                    .last_reported_trust
                    .expect("prior report present");
                let mut state = indirect_update(
                    &states[h][r],
                    params,
                    trust_in_teammate,
                    recommender_trust,
                    own_previous,
                )?;
                let t = report(&state, noise, &mut report_rng)?;
                state.last_reported_trust = Some(t);
                states[h][r] = state;
                reports[h][r] = Some(t);
                trajectories[h][r].push(TrustEvent::indirect(
                    k,
                    trust_in_teammate,
                    recommender_trust,
                    Some(t),
                ))?;
            }
        }

        let mut entries = Vec::with_capacity(n_humans * n_robots);
        for (h, human) in config.humans.iter().enumerate() {
            for (r, robot) in config.robots.iter().enumerate() {
                entries.push(LogEntry {
                    human_id: human.id.clone(),
                    robot_id: robot.id.clone(),
                    assigned: assignment[h] == r,
                    correct: correct[r],
                    reported_trust: reports[h][r],
                    teammate_trust: human.teammate_trust.at(k),
                });
            }
        }
        out.logs.push(SessionLog {
            team_id: team_id.clone(),
            session: k,
            n_locations: config.n_locations,
            entries,
        });
    }

    for row in trajectories {
        for traj in row {
            let key = PairKey::new(&team_id, &traj.human_id, &traj.robot_id);
            out.trajectories.insert(key, traj);
        }
    }
    Ok(())
}
