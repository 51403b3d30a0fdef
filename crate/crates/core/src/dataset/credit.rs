use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::events::{segment_turns, Actor, EventKind, SessionLog};
use crate::level::Placement;

use super::DatasetError;

/// Discount and penalty used to spread the session-final reward over AI turns.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreditConfig {
    pub gamma: f64,
    pub deletion_penalty: f64,
}

impl Default for CreditConfig {
    fn default() -> Self {
        CreditConfig { gamma: 0.1, deletion_penalty: -0.1 }
    }
}

impl CreditConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(DatasetError::Config(format!("gamma {} outside (0, 1]", self.gamma)));
        }
        if self.deletion_penalty.is_nan() || self.deletion_penalty > 0.0 {
            return Err(DatasetError::Config(format!(
                "deletion penalty {} must be <= 0",
                self.deletion_penalty
            )));
        }
        Ok(())
    }
}

/// +1 for the partner ranked first on reuse, -1 for the one ranked second.
pub fn final_reward(reuse_rank: u8) -> Result<f64, DatasetError> {
    match reuse_rank {
        1 => Ok(1.0),
        2 => Ok(-1.0),
        r => Err(DatasetError::Credit(format!("reuse rank {r} is not 1 or 2"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CreditedAddition {
    pub turn: usize,
    /// Position within the turn's concurrent action.
    pub order: usize,
    pub placement: Placement,
    /// Turns between this one and the session's final AI turn.
    pub discount_exponent: u32,
    pub deleted: bool,
    pub reward: f64,
}

/// Credited reward for every AI addition of one session, in log order.
#[derive(Clone, Debug, PartialEq)]
pub struct CreditMap {
    pub final_reward: f64,
    pub turn_count: usize,
    pub additions: Vec<CreditedAddition>,
}

impl CreditMap {
    pub fn for_turn(&self, turn: usize) -> impl Iterator<Item = &CreditedAddition> {
        self.additions.iter().filter(move |a| a.turn == turn)
    }

    pub fn total(&self) -> f64 {
        self.additions.iter().map(|a| a.reward).sum()
    }
}

/// Assigns `final_reward * gamma^t` to every addition of the AI turn `t`
/// steps before the last one, plus the undiscounted deletion penalty for
/// additions the human later removed.
pub fn assign_credit(log: &SessionLog, cfg: &CreditConfig) -> Result<CreditMap, DatasetError> {
    cfg.validate()?;
    let ranking = log
        .ranking()
        .ok_or_else(|| DatasetError::Credit(format!("session {} has no rank event", log.session_id)))?;
    let final_reward = final_reward(ranking.reuse_rank)?;
    let turns = segment_turns(log)?;
    if turns.is_empty() {
        return Err(DatasetError::Credit(format!("session {} has no turns", log.session_id)));
    }
    let last = turns.len() - 1;

    let mut additions = Vec::new();
    for t in &turns {
        let exponent = (last - t.index) as u32;
        for (order, p) in t.ai_additions.iter().enumerate() {
            additions.push(CreditedAddition {
                turn: t.index,
                order,
                placement: *p,
                discount_exponent: exponent,
                deleted: false,
                reward: final_reward * cfg.gamma.powi(exponent as i32),
            });
        }
    }

    // Match human deletions of AI sprites to the addition occupying the cell.
    let mut live: HashMap<(usize, usize), usize> = HashMap::new();
    let mut next = 0;
    for e in &log.events {
        match (&e.kind, e.actor) {
            (EventKind::Place { x, y, .. }, Actor::Ai) => {
                live.insert((*x, *y), next);
                next += 1;
            }
            (EventKind::Delete { x, y, deleted_actor: Actor::Ai }, _) => {
                if let Some(i) = live.remove(&(*x, *y)) {
                    let a = &mut additions[i];
                    a.deleted = true;
                    a.reward += cfg.deletion_penalty;
                }
            }
            _ => {}
        }
    }
    Ok(CreditMap { final_reward, turn_count: turns.len(), additions })
}
