//! CSV and TOML persistence.
//!
//! All row formats are comma-separated UTF-8 with a mandatory header. Floats are
//! written in shortest round-trip form. Trust values on disk must lie in [0, 1];
//! on load they are clamped to `[CLAMP_EPS, 1 − CLAMP_EPS]` because the Beta
//! log-density is infinite at the boundary. This is the only place clamping happens.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::FitResult;
use crate::kernel::{EventKind, TipParams, Trajectory, TrustEvent};
use crate::simulator::{ExperimentConfig, LogEntry, PairKey, SessionLog};

pub const CLAMP_EPS: f64 = 1e-3;

pub const TRAJECTORY_HEADER: [&str; 10] = [
    "team_id",
    "human_id",
    "robot_id",
    "session",
    "event",
    "perf_success",
    "perf_failure",
    "trust_in_teammate",
    "teammate_trust",
    "reported_trust",
];

pub const PARAMS_HEADER: [&str; 15] = [
    "team_id",
    "human_id",
    "robot_id",
    "alpha0",
    "beta0",
    "s",
    "f",
    "s_hat",
    "f_hat",
    "log_likelihood",
    "mean_fit_error",
    "converged",
    "iterations",
    "low_data",
    "model",
];

pub const SESSION_LOG_HEADER: [&str; 9] = [
    "team_id",
    "session",
    "human_id",
    "robot_id",
    "assigned",
    "correct",
    "n_locations",
    "reported_trust",
    "teammate_trust",
];

pub const REPORT_HEADER: [&str; 8] = [
    "team_id",
    "human_id",
    "robot_id",
    "session",
    "reported_trust",
    "expected_trust",
    "q05",
    "q95",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventLabel {
    Prior,
    Direct,
    Indirect,
}

/// One row of a trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub team_id: String,
    pub human_id: String,
    pub robot_id: String,
    pub session: u32,
    pub event: EventLabel,
    pub perf_success: Option<f64>,
    pub perf_failure: Option<f64>,
    pub trust_in_teammate: Option<f64>,
    pub teammate_trust: Option<f64>,
    pub reported_trust: Option<f64>,
}

/// One row of a fitted-parameters file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsRecord {
    pub team_id: String,
    pub human_id: String,
    pub robot_id: String,
    pub alpha0: f64,
    pub beta0: f64,
    pub s: f64,
    pub f: f64,
    pub s_hat: f64,
    pub f_hat: f64,
    pub log_likelihood: f64,
    pub mean_fit_error: f64,
    pub converged: bool,
    pub iterations: usize,
    pub low_data: bool,
    pub model: String,
}

impl ParamsRecord {
    pub fn from_fit(key: &PairKey, model: &str, fit: &FitResult) -> Self {
        let t = fit.theta_star;
        Self {
            team_id: key.team_id.clone(),
            human_id: key.human_id.clone(),
            robot_id: key.robot_id.clone(),
            alpha0: t.alpha0,
            beta0: t.beta0,
            s: t.s,
            f: t.f,
            s_hat: t.s_hat,
            f_hat: t.f_hat,
            log_likelihood: fit.log_likelihood,
            mean_fit_error: fit.mean_fit_error,
            converged: fit.converged,
            iterations: fit.iterations,
            low_data: fit.low_data,
            model: model.to_string(),
        }
    }

    pub fn key(&self) -> PairKey {
        PairKey::new(&self.team_id, &self.human_id, &self.robot_id)
    }

    pub fn theta(&self) -> Result<TipParams> {
        TipParams::new(
            self.alpha0,
            self.beta0,
            self.s,
            self.f,
            self.s_hat,
            self.f_hat,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLogRecord {
    pub team_id: String,
    pub session: u32,
    pub human_id: String,
    pub robot_id: String,
    pub assigned: bool,
    pub correct: Option<u32>,
    pub n_locations: u32,
    pub reported_trust: Option<f64>,
    pub teammate_trust: f64,
}

/// Per-session interval table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub team_id: String,
    pub human_id: String,
    pub robot_id: String,
    pub session: u32,
    pub reported_trust: Option<f64>,
    pub expected_trust: f64,
    pub q05: f64,
    pub q95: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedTrajectories {
    pub trajectories: BTreeMap<PairKey, Trajectory>,
    /// Number of trust values moved onto `[CLAMP_EPS, 1 − CLAMP_EPS]`.
    pub clamped: usize,
}

fn row_err(line: usize, message: impl Into<String>) -> Error {
    Error::Row {
        line,
        message: message.into(),
    }
}

fn clamp_trust(line: usize, name: &str, value: f64, clamped: &mut usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&value) {
        return Err(row_err(line, format!("{name} = {value} outside [0, 1]")));
    }
    let c = value.clamp(CLAMP_EPS, 1.0 - CLAMP_EPS);
    if c != value {
        *clamped += 1;
    }
    Ok(c)
}

fn check_header(line_header: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = line_header.iter().collect();
    if got != expected {
        return Err(row_err(
            1,
            format!(
                "header must be `{}`, found `{}`",
                expected.join(","),
                got.join(",")
            ),
        ));
    }
    Ok(())
}

/// Reads rows of `T` from CSV, checking the header and reporting line numbers.
fn read_rows<T: DeserializeOwned, R: Read>(reader: R, header: &[&str]) -> Result<Vec<(usize, T)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| row_err(1, e.to_string()))?
        .clone();
    check_header(&headers, header)?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            row_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row: T = record
            .deserialize(Some(&headers))
            .map_err(|e| row_err(line, e.to_string()))?;
        rows.push((line, row));
    }
    Ok(rows)
}

fn write_rows<T: Serialize, W: Write>(writer: W, header: &[&str], rows: &[T]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    let csv_err = |e: csv::Error| Error::Parse {
        path: "<output>".into(),
        message: e.to_string(),
    };
    wtr.write_record(header).map_err(csv_err)?;
    for row in rows {
        wtr.serialize(row).map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

/// Writes through a temporary file in the destination directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn save_rows<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    write_rows(&mut buf, header, rows)?;
    write_atomic(path, &buf)
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::io(path, e))
}

fn record_to_event(line: usize, rec: &SessionRecord, clamped: &mut usize) -> Result<TrustEvent> {
    let reported = rec
        .reported_trust
        .map(|t| clamp_trust(line, "reported_trust", t, clamped))
        .transpose()?;
    let has_perf = rec.perf_success.is_some() || rec.perf_failure.is_some();
    let has_teammate = rec.trust_in_teammate.is_some() || rec.teammate_trust.is_some();
    let missing = |field: &str| row_err(line, format!("{:?} row missing {field}", rec.event));
    let extra = |what: &str| {
        row_err(
            line,
            format!("{:?} row must not carry {what} fields", rec.event),
        )
    };
    let kind = match rec.event {
        EventLabel::Prior => {
            if has_perf {
                return Err(extra("performance"));
            }
            if has_teammate {
                return Err(extra("teammate"));
            }
            if reported.is_none() {
                return Err(missing("reported_trust"));
            }
            if rec.session != 0 {
                return Err(row_err(
                    line,
                    format!("prior row at session {} (must be 0)", rec.session),
                ));
            }
            EventKind::Prior
        }
        EventLabel::Direct => {
            if has_teammate {
                return Err(extra("teammate"));
            }
            let success = rec.perf_success.ok_or_else(|| missing("perf_success"))?;
            let failure = rec.perf_failure.ok_or_else(|| missing("perf_failure"))?;
            for (name, v) in [("perf_success", success), ("perf_failure", failure)] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(row_err(line, format!("{name} = {v} must be >= 0")));
                }
            }
            EventKind::Direct { success, failure }
        }
        EventLabel::Indirect => {
            if has_perf {
                return Err(extra("performance"));
            }
            let tx = rec
                .trust_in_teammate
                .ok_or_else(|| missing("trust_in_teammate"))?;
            let ty = rec
                .teammate_trust
                .ok_or_else(|| missing("teammate_trust"))?;
            EventKind::Indirect {
                trust_in_recommender: clamp_trust(line, "trust_in_teammate", tx, clamped)?,
                recommender_trust: clamp_trust(line, "teammate_trust", ty, clamped)?,
            }
        }
    };
    for (name, id) in [
        ("team_id", &rec.team_id),
        ("human_id", &rec.human_id),
        ("robot_id", &rec.robot_id),
    ] {
        if id.trim().is_empty() {
            return Err(row_err(line, format!("empty {name}")));
        }
    }
    Ok(TrustEvent {
        session: rec.session,
        kind,
        reported_trust: reported,
    })
}

/// Parses and validates a trajectory CSV stream.
pub fn read_trajectories<R: Read>(reader: R) -> Result<LoadedTrajectories> {
    let rows: Vec<(usize, SessionRecord)> = read_rows(reader, &TRAJECTORY_HEADER)?;
    let mut clamped = 0;
    let mut grouped: BTreeMap<PairKey, Vec<(usize, TrustEvent)>> = BTreeMap::new();
    for (line, rec) in &rows {
        let event = record_to_event(*line, rec, &mut clamped)?;
        grouped
            .entry(PairKey::new(&rec.team_id, &rec.human_id, &rec.robot_id))
            .or_default()
            .push((*line, event));
    }
    let mut trajectories = BTreeMap::new();
    for (key, mut events) in grouped {
        events.sort_by_key(|(_, e)| e.session);
        let priors: Vec<usize> = events
            .iter()
            .filter(|(_, e)| e.kind == EventKind::Prior)
            .map(|(l, _)| *l)
            .collect();
        match priors.len() {
            0 => {
                return Err(row_err(
                    events[0].0,
                    format!("{key}: no prior row (session 0 initial rating)"),
                ))
            }
            1 => {}
            _ => {
                return Err(row_err(
                    priors[1],
                    format!("{key}: duplicate prior (first at line {})", priors[0]),
                ))
            }
        }
        for w in events.windows(2) {
            if w[0].1.session == w[1].1.session {
                return Err(row_err(
                    w[1].0,
                    format!(
                        "{key}: duplicate session {} (also line {})",
                        w[1].1.session, w[0].0
                    ),
                ));
            }
        }
        let first_line = events[0].0;
        let traj = Trajectory::new(
            &key.human_id,
            &key.robot_id,
            events.into_iter().map(|(_, e)| e).collect(),
        )
        .map_err(|e| row_err(first_line, format!("{key}: {e}")))?;
        trajectories.insert(key, traj);
    }
    Ok(LoadedTrajectories {
        trajectories,
        clamped,
    })
}

pub fn load_trajectories(path: &Path) -> Result<LoadedTrajectories> {
    read_trajectories(open(path)?).map_err(|e| with_path(path, e))
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Row { line, message } => Error::Parse {
            path: path.to_path_buf(),
            message: format!("line {line}: {message}"),
        },
        other => other,
    }
}

pub fn trajectory_records(trajectories: &BTreeMap<PairKey, Trajectory>) -> Vec<SessionRecord> {
    let mut rows = Vec::new();
    for (key, traj) in trajectories {
        for e in traj.events() {
            let mut rec = SessionRecord {
                team_id: key.team_id.clone(),
                human_id: key.human_id.clone(),
                robot_id: key.robot_id.clone(),
                session: e.session,
                event: EventLabel::Prior,
                perf_success: None,
                perf_failure: None,
                trust_in_teammate: None,
                teammate_trust: None,
                reported_trust: e.reported_trust,
            };
            match e.kind {
                EventKind::Prior => {}
                EventKind::Direct { success, failure } => {
                    rec.event = EventLabel::Direct;
                    rec.perf_success = Some(success);
                    rec.perf_failure = Some(failure);
                }
                EventKind::Indirect {
                    trust_in_recommender,
                    recommender_trust,
                } => {
                    rec.event = EventLabel::Indirect;
                    rec.trust_in_teammate = Some(trust_in_recommender);
                    rec.teammate_trust = Some(recommender_trust);
                }
            }
            rows.push(rec);
        }
    }
    rows
}

pub fn write_trajectories<W: Write>(
    writer: W,
    trajectories: &BTreeMap<PairKey, Trajectory>,
) -> Result<()> {
    write_rows(
        writer,
        &TRAJECTORY_HEADER,
        &trajectory_records(trajectories),
    )
}

pub fn save_trajectories(path: &Path, trajectories: &BTreeMap<PairKey, Trajectory>) -> Result<()> {
    save_rows(path, &TRAJECTORY_HEADER, &trajectory_records(trajectories))
}

pub fn write_fit_results<W: Write>(writer: W, results: &[ParamsRecord]) -> Result<()> {
    write_rows(writer, &PARAMS_HEADER, results)
}

pub fn save_fit_results(path: &Path, results: &[ParamsRecord]) -> Result<()> {
    save_rows(path, &PARAMS_HEADER, results)
}

pub fn read_fit_results<R: Read>(reader: R) -> Result<Vec<ParamsRecord>> {
    let rows: Vec<(usize, ParamsRecord)> = read_rows(reader, &PARAMS_HEADER)?;
    rows.into_iter()
        .map(|(line, rec)| {
            rec.theta().map_err(|e| row_err(line, e.to_string()))?;
            Ok(rec)
        })
        .collect()
}

pub fn load_fit_results(path: &Path) -> Result<Vec<ParamsRecord>> {
    read_fit_results(open(path)?).map_err(|e| with_path(path, e))
}

pub fn session_log_records(logs: &[SessionLog]) -> Vec<SessionLogRecord> {
    logs.iter()
        .flat_map(|log| {
            log.entries.iter().map(move |e| SessionLogRecord {
                team_id: log.team_id.clone(),
                session: log.session,
                human_id: e.human_id.clone(),
                robot_id: e.robot_id.clone(),
                assigned: e.assigned,
                correct: e.correct,
                n_locations: log.n_locations,
                reported_trust: e.reported_trust,
                teammate_trust: e.teammate_trust,
            })
        })
        .collect()
}

pub fn write_session_logs<W: Write>(writer: W, logs: &[SessionLog]) -> Result<()> {
    write_rows(writer, &SESSION_LOG_HEADER, &session_log_records(logs))
}

pub fn save_session_logs(path: &Path, logs: &[SessionLog]) -> Result<()> {
    save_rows(path, &SESSION_LOG_HEADER, &session_log_records(logs))
}

/// Rebuilds session logs; consecutive rows sharing (team, session) form one log.
pub fn read_session_logs<R: Read>(reader: R) -> Result<Vec<SessionLog>> {
    let rows: Vec<(usize, SessionLogRecord)> = read_rows(reader, &SESSION_LOG_HEADER)?;
    let mut logs: Vec<SessionLog> = Vec::new();
    for (line, rec) in rows {
        if let Some(c) = rec.correct {
            if c > rec.n_locations {
                return Err(row_err(
                    line,
                    format!("correct = {c} exceeds n_locations = {}", rec.n_locations),
                ));
            }
        }
        let entry = LogEntry {
            human_id: rec.human_id,
            robot_id: rec.robot_id,
            assigned: rec.assigned,
            correct: rec.correct,
            reported_trust: rec.reported_trust,
            teammate_trust: rec.teammate_trust,
        };
        match logs.last_mut() {
            Some(log) if log.team_id == rec.team_id && log.session == rec.session => {
                log.entries.push(entry)
            }
            _ => logs.push(SessionLog {
                team_id: rec.team_id,
                session: rec.session,
                n_locations: rec.n_locations,
                entries: vec![entry],
            }),
        }
    }
    Ok(logs)
}

pub fn load_session_logs(path: &Path) -> Result<Vec<SessionLog>> {
    read_session_logs(open(path)?).map_err(|e| with_path(path, e))
}

pub fn save_report(path: &Path, rows: &[ReportRecord]) -> Result<()> {
    save_rows(path, &REPORT_HEADER, rows)
}

/// Generic CSV output for ad-hoc tables (comparison summaries and the like).
pub fn save_table<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    save_rows(path, header, rows)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse {
        path: "<config>".into(),
        message: e.to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

pub fn config_to_string(config: &ExperimentConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| Error::Config(e.to_string()))
}

pub fn save_config(path: &Path, config: &ExperimentConfig) -> Result<()> {
    write_atomic(path, config_to_string(config)?.as_bytes())
}
