//! Per-episode and per-update CSV logs.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

use crate::env::EpisodeOutcome;
use crate::sac::{EpisodeRecord, UpdateMetrics};
use crate::{Error, Result};

/// Episodes in the success moving average.
pub const SUCCESS_WINDOW: usize = 30;
pub const EPISODE_SCHEMA: &str = "#schema=episodes/1";
pub const UPDATE_SCHEMA: &str = "#schema=updates/1";
const EPISODE_COLUMNS: [&str; 6] = ["timestep", "episode", "outcome", "return", "length", "success_ma"];
const UPDATE_COLUMNS: [&str; 8] = [
    "timestep",
    "updates",
    "critic1_loss",
    "critic2_loss",
    "actor_loss",
    "alpha",
    "entropy",
    "rounds",
];

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRow {
    pub timestep: u64,
    pub episode: u64,
    pub outcome: EpisodeOutcome,
    pub ret: f32,
    pub length: u32,
    /// Success fraction of the last `min(30, episodes)` episodes.
    pub success_ma: f32,
}

/// Episode rows with the running success average.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLog {
    rows: Vec<EpisodeRow>,
    window: VecDeque<bool>,
}

fn write_csv<const N: usize>(path: &Path, schema: &str, header: [&str; N], rows: Vec<[String; N]>) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(schema.as_bytes());
    out.push(b'\n');
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

impl RunLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rows(&self) -> &[EpisodeRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last_success_ma(&self) -> Option<f32> {
        self.rows.last().map(|r| r.success_ma)
    }

    /// Appends an episode; timesteps must strictly increase.
    pub fn push(&mut self, timestep: u64, outcome: EpisodeOutcome, ret: f32, length: u32) -> Result<&EpisodeRow> {
        if let Some(last) = self.rows.last() {
            if timestep <= last.timestep {
                return Err(Error::InvalidArgument(format!(
                    "episode timestep {timestep} does not follow {}",
                    last.timestep
                )));
            }
        }
        self.window.push_back(outcome == EpisodeOutcome::Success);
        if self.window.len() > SUCCESS_WINDOW {
            self.window.pop_front();
        }
        let wins = self.window.iter().filter(|&&s| s).count();
        let row = EpisodeRow {
            timestep,
            episode: self.rows.len() as u64,
            outcome,
            ret,
            length,
            success_ma: wins as f32 / self.window.len() as f32,
        };
        self.rows.push(row);
        Ok(self.rows.last().expect("just pushed"))
    }

    pub fn push_record(&mut self, rec: &EpisodeRecord, timestep_offset: u64) -> Result<&EpisodeRow> {
        self.push(rec.timestep + timestep_offset, rec.outcome, rec.ret, rec.length)
    }

    /// First timestep whose moving average is at least `threshold`.
    pub fn first_reaching(&self, threshold: f32) -> Option<u64> {
        self.rows.iter().find(|r| r.success_ma >= threshold).map(|r| r.timestep)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.timestep.to_string(),
                    r.episode.to_string(),
                    r.outcome.to_string(),
                    r.ret.to_string(),
                    r.length.to_string(),
                    r.success_ma.to_string(),
                ]
            })
            .collect();
        write_csv(path, EPISODE_SCHEMA, EPISODE_COLUMNS, rows)
    }

    /// Reads a log written by [`Self::write_csv`], recomputing the moving
    /// average and checking it against the stored column.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let first = text.lines().next().unwrap_or("");
        if first != EPISODE_SCHEMA {
            return Err(Error::InvalidArgument(format!(
                "{}: expected schema line {EPISODE_SCHEMA:?}, found {first:?}",
                path.display()
            )));
        }
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        if rdr.headers()?.iter().ne(EPISODE_COLUMNS) {
            return Err(Error::InvalidArgument(format!("{}: unexpected columns", path.display())));
        }
        let mut log = RunLog::new();
        for rec in rdr.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let num = |i: usize| -> Result<f64> {
                field(i).parse().map_err(|_| {
                    Error::InvalidArgument(format!("{}: bad {} {:?}", path.display(), EPISODE_COLUMNS[i], field(i)))
                })
            };
            let row = log.push(num(0)? as u64, field(2).parse()?, num(3)? as f32, num(4)? as u32)?;
            if row.success_ma.to_string() != field(5) {
                return Err(Error::InvalidArgument(format!(
                    "{}: success_ma at episode {} disagrees with the outcomes",
                    path.display(),
                    row.episode
                )));
            }
        }
        Ok(log)
    }
}

/// One row per training iteration that ran updates: the last round's
/// metrics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct UpdateLog {
    rows: Vec<(u64, u64, usize, UpdateMetrics)>,
}

impl UpdateLog {
    pub fn push(&mut self, timestep: u64, total_updates: u64, rounds: &[UpdateMetrics]) {
        if let Some(m) = rounds.last() {
            self.rows.push((timestep, total_updates, rounds.len(), m.clone()));
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows = self
            .rows
            .iter()
            .map(|(t, u, n, m)| {
                [
                    t.to_string(),
                    u.to_string(),
                    m.critic1_loss.to_string(),
                    m.critic2_loss.to_string(),
                    m.actor_loss.to_string(),
                    m.alpha.to_string(),
                    m.entropy.to_string(),
                    n.to_string(),
                ]
            })
            .collect();
        write_csv(path, UPDATE_SCHEMA, UPDATE_COLUMNS, rows)
    }
}

/// Result of comparing when two curves first reach a success threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Speedup {
    /// `t_b / t_a`.
    Ratio { t_a: u64, t_b: u64, ratio: f64 },
    /// Curve `b` never reached the threshold (the ratio is unbounded).
    BaselineNotReached { t_a: u64 },
    /// Curve `a` never reached the threshold.
    NotReached,
}

impl fmt::Display for Speedup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Speedup::Ratio { t_a, t_b, ratio } => write!(f, "{ratio:.3} ({t_b} / {t_a})"),
            Speedup::BaselineNotReached { t_a } => write!(f, "not reached (a at {t_a}, b never)"),
            Speedup::NotReached => write!(f, "not reached (a never)"),
        }
    }
}

pub fn speedup_report(a: &RunLog, b: &RunLog, threshold: f32) -> Result<Speedup> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} outside [0, 1]")));
    }
    Ok(match (a.first_reaching(threshold), b.first_reaching(threshold)) {
        (None, _) => Speedup::NotReached,
        (Some(t_a), None) => Speedup::BaselineNotReached { t_a },
        (Some(t_a), Some(t_b)) => Speedup::Ratio {
            t_a,
            t_b,
            ratio: t_b as f64 / t_a as f64,
        },
    })
}
