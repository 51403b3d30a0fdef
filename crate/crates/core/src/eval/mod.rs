//! Replay evaluation: run an agent over held-out samples, score its
//! proposals against the credited rewards, and lay the results out as
//! per-participant tables.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, AgentError, ProposeContext};
use crate::cnn::ActiveMode;
use crate::dataset::SmdpSample;
use crate::level::{Placement, SpriteId};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("mode: {0}")]
    Mode(String),
    #[error("table layout: {0}")]
    Layout(String),
    #[error("participant {participant}, sample {index}: {source}")]
    Agent {
        participant: String,
        index: usize,
        #[source]
        source: AgentError,
    },
    #[error(transparent)]
    Setup(#[from] AgentError),
}

/// Credited reward of every logged addition in one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardMap {
    rewards: HashMap<(usize, usize, SpriteId), f64>,
    pub max_positive: f64,
}

impl RewardMap {
    pub fn from_sample(sample: &SmdpSample) -> Self {
        let rewards: HashMap<_, _> = sample.actions.iter().map(|a| ((a.x, a.y, a.sprite), a.reward)).collect();
        let max_positive = sample.actions.iter().map(|a| a.reward.max(0.0)).sum();
        RewardMap { rewards, max_positive }
    }

    pub fn get(&self, x: usize, y: usize, sprite: SpriteId) -> Option<f64> {
        self.rewards.get(&(x, y, sprite)).copied()
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Sum of the map's rewards over the proposals; unknown additions score 0.
pub fn score_actions(proposed: &[Placement], map: &RewardMap) -> f64 {
    proposed.iter().map(|p| map.get(p.x, p.y, p.sprite).unwrap_or(0.0)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticipantResult {
    pub participant: String,
    pub sum: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub agent: String,
    pub mode: ActiveMode,
    /// Column heading in rendered tables.
    pub label: String,
    pub rows: Vec<ParticipantResult>,
}

impl EvalReport {
    /// Mean of `100 · sum / max` over participants with a positive maximum;
    /// 0 when there are none.
    pub fn avg_percent(&self) -> f64 {
        let pct: Vec<f64> = self.rows.iter().filter(|r| r.max > 0.0).map(|r| 100.0 * r.sum / r.max).collect();
        if pct.is_empty() {
            0.0
        } else {
            pct.iter().sum::<f64>() / pct.len() as f64
        }
    }
}

/// Samples grouped by participant, in order of first appearance.
pub fn group_by_participant(samples: &[SmdpSample]) -> Vec<(String, Vec<&SmdpSample>)> {
    let mut groups: Vec<(String, Vec<&SmdpSample>)> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for s in samples {
        let i = *index.entry(&s.participant_id).or_insert_with(|| {
            groups.push((s.participant_id.clone(), Vec::new()));
            groups.len() - 1
        });
        groups[i].1.push(s);
    }
    groups
}

/// Simulated interaction with held-out participants.
///
/// The agent is reset to its trained state first. For each participant (in
/// order) and each of their samples (in order) it proposes on the sample's
/// chunk, the proposal is scored, and in active modes the agent then takes
/// one update on that sample. Episodic mode resets at every participant
/// boundary; continuous mode never does.
pub fn simulate(
    agent: &mut dyn Agent,
    groups: &[(String, Vec<&SmdpSample>)],
    mode: ActiveMode,
    seed: u64,
    label: &str,
) -> Result<EvalReport, EvalError> {
    if mode != ActiveMode::None && !agent.supports_active() {
        return Err(EvalError::Mode(format!("{} cannot run in {mode} mode", agent.name())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    agent.reset()?;
    let mut rows = Vec::with_capacity(groups.len());
    for (k, (participant, samples)) in groups.iter().enumerate() {
        if mode == ActiveMode::Episodic && k > 0 {
            agent.reset()?;
        }
        let mut sum = 0.0;
        let mut max = 0.0;
        for (index, sample) in samples.iter().enumerate() {
            let wrap = |source| EvalError::Agent { participant: participant.clone(), index, source };
            let map = RewardMap::from_sample(sample);
            let proposal = agent.propose(&mut ProposeContext::chunk(&sample.state, &mut rng)).map_err(wrap)?;
            sum += score_actions(&proposal, &map);
            max += map.max_positive;
            if mode != ActiveMode::None {
                agent.active_update(sample).map_err(wrap)?;
            }
        }
        rows.push(ParticipantResult { participant: participant.clone(), sum, max });
    }
    Ok(EvalReport { agent: agent.name().to_string(), mode, label: label.to_string(), rows })
}

/// One rendered column.
#[derive(Clone, Debug, PartialEq)]
pub struct TableColumn {
    pub label: String,
    pub sums: Vec<f64>,
    pub avg_percent: f64,
}

impl From<&EvalReport> for TableColumn {
    fn from(r: &EvalReport) -> Self {
        TableColumn { label: r.label.clone(), sums: r.rows.iter().map(|r| r.sum).collect(), avg_percent: r.avg_percent() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderedTable {
    pub text: String,
    pub csv: String,
}

/// Three significant figures for magnitudes below 100 (`1.45`, `-10.1`,
/// `0.00`); whole numbers above.
pub fn format_sum(v: f64) -> String {
    let two = format!("{v:.2}");
    if two.trim_start_matches('-').len() <= 4 {
        return two;
    }
    let one = format!("{v:.1}");
    if one.trim_start_matches('-').len() <= 4 {
        return one;
    }
    format!("{v:.0}")
}

pub fn format_percent(v: f64) -> String {
    format!("{v:.1}")
}

/// Lays reports side by side. Every report must cover the same participants
/// in the same order.
pub fn render_table(reports: &[EvalReport]) -> Result<RenderedTable, EvalError> {
    let first = reports.first().ok_or_else(|| EvalError::Layout("no reports".into()))?;
    let participants: Vec<String> = first.rows.iter().map(|r| r.participant.clone()).collect();
    for r in reports {
        let p: Vec<&String> = r.rows.iter().map(|r| &r.participant).collect();
        if p.len() != participants.len() || p.iter().zip(&participants).any(|(a, b)| *a != b) {
            return Err(EvalError::Layout(format!("{} covers different participants", r.label)));
        }
    }
    let cols: Vec<TableColumn> = reports.iter().map(TableColumn::from).collect();
    render_columns(&participants, &cols)
}

pub fn render_columns(participants: &[String], columns: &[TableColumn]) -> Result<RenderedTable, EvalError> {
    if columns.iter().any(|c| c.sums.len() != participants.len()) {
        return Err(EvalError::Layout("column length differs from participant count".into()));
    }
    let mut grid: Vec<Vec<String>> = Vec::new();
    grid.push(std::iter::once("participant".to_string()).chain(columns.iter().map(|c| c.label.clone())).collect());
    for (i, p) in participants.iter().enumerate() {
        grid.push(std::iter::once(p.clone()).chain(columns.iter().map(|c| format_sum(c.sums[i]))).collect());
    }
    grid.push(std::iter::once("Avg %".to_string()).chain(columns.iter().map(|c| format_percent(c.avg_percent))).collect());

    let csv: String = grid.iter().map(|row| row.join(",") + "\n").collect();
    let widths: Vec<usize> = (0..grid[0].len()).map(|j| grid.iter().map(|r| r[j].len()).max().unwrap_or(0)).collect();
    let mut text = String::new();
    for (i, row) in grid.iter().enumerate() {
        if i == grid.len() - 1 {
            text.push_str(&"-".repeat(widths.iter().sum::<usize>() + 3 * (widths.len() - 1)));
            text.push('\n');
        }
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(j, c)| if j == 0 { format!("{c:<w$}", w = widths[j]) } else { format!("{c:>w$}", w = widths[j]) })
            .collect();
        text.push_str(cells.join(" | ").trim_end());
        text.push('\n');
    }
    Ok(RenderedTable { text, csv })
}
