//! Live co-creative sessions: phase rules, the AI turn, rankings and
//! append-only log files. Transport-agnostic; the HTTP layer wraps this.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, AgentError, ProposeContext};
use crate::events::{
    event_line, header_line, log_file_name, Actor, EventKind, LogError, Ranking, Replayer, SessionEvent,
    SessionLog, Task,
};
use crate::level::{Placement, SpriteId, TileGrid, LEVEL_HEIGHT, SPRITE_COUNT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    HumanTurn,
    AiTurn,
    Ended,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::HumanTurn => "human_turn",
            Phase::AiTurn => "ai_turn",
            Phase::Ended => "ended",
        })
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("unknown agent {0:?}")]
    UnknownAgent(String),
    #[error("no session {0:?}")]
    NotFound(String),
    #[error("session is in {actual}, request needs {expected}")]
    WrongPhase { expected: Phase, actual: Phase },
    #[error("rejected: {0}")]
    Rejected(String),
    #[error("ranking: {0}")]
    Rank(String),
    #[error("agent failed, turn aborted: {0}")]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SessionError>;

/// Builds a fresh agent instance; every session owns its own.
pub type AgentFactory = Box<dyn Fn() -> std::result::Result<Box<dyn Agent>, AgentError> + Send + Sync>;

#[derive(Clone, Debug)]
pub struct SessionConfig {
    pub level_width: usize,
    /// Soft limit; sessions past it are flagged, never stopped.
    pub time_limit: Duration,
    /// Where `{participant}_{session}.jsonl` files are appended, if anywhere.
    pub data_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig { level_width: 100, time_limit: Duration::from_secs(15 * 60), data_dir: None, seed: 0 }
    }
}

/// Read-only view returned to clients.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionStatus {
    pub session_id: String,
    pub participant_id: String,
    pub agent: String,
    pub task: Task,
    pub phase: Phase,
    pub over_time: bool,
    pub camera_x: usize,
    /// Completed human turns.
    pub turns: usize,
    pub events: usize,
}

/// Reuse rank is mandatory; the rest are optional.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankRequest {
    pub first: Ranking,
    pub second: Ranking,
}

struct Session {
    log: SessionLog,
    live: Replayer,
    /// Absent while the agent is thinking outside the lock.
    agent: Option<Box<dyn Agent>>,
    phase: Phase,
    camera_x: usize,
    started: Instant,
    rng: ChaCha8Rng,
    file: Option<PathBuf>,
    ranked: bool,
}

impl Session {
    fn now(&self) -> u64 {
        let t = self.started.elapsed().as_millis() as u64;
        // never behind the previous event
        self.log.events.last().map_or(t, |e| t.max(e.timestamp_ms))
    }

    fn require(&self, expected: Phase) -> Result<()> {
        if self.phase != expected {
            return Err(SessionError::WrongPhase { expected, actual: self.phase });
        }
        Ok(())
    }

    fn push(&mut self, actor: Actor, kind: EventKind) -> Result<()> {
        let e = SessionEvent::new(self.now(), actor, kind);
        self.live.apply(&e)?;
        if let Some(path) = &self.file {
            let mut f = OpenOptions::new().append(true).open(path)?;
            writeln!(f, "{}", event_line(&e))?;
        }
        self.log.events.push(e);
        Ok(())
    }
}

pub struct SessionManager {
    config: SessionConfig,
    agents: BTreeMap<String, AgentFactory>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    counter: AtomicU64,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    // a panicking agent must not take the whole server down
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl SessionManager {
    pub fn new(config: SessionConfig) -> Self {
        SessionManager { config, agents: BTreeMap::new(), sessions: Mutex::new(HashMap::new()), counter: AtomicU64::new(0) }
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn register(&mut self, name: impl Into<String>, factory: AgentFactory) {
        self.agents.insert(name.into(), factory);
    }

    pub fn agent_names(&self) -> Vec<String> {
        self.agents.keys().cloned().collect()
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>> {
        lock(&self.sessions).get(id).cloned().ok_or_else(|| SessionError::NotFound(id.to_string()))
    }

    pub fn create(&self, participant: &str, agent: &str, task: Task) -> Result<String> {
        self.create_with_width(participant, agent, task, self.config.level_width)
    }

    pub fn create_with_width(&self, participant: &str, agent: &str, task: Task, width: usize) -> Result<String> {
        let factory = self.agents.get(agent).ok_or_else(|| SessionError::UnknownAgent(agent.to_string()))?;
        if width == 0 {
            return Err(SessionError::Rejected("level width must be at least 1".into()));
        }
        if participant.is_empty() || participant.contains(['/', '\\']) {
            return Err(SessionError::Rejected(format!("bad participant id {participant:?}")));
        }
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let id = format!("s{n:04}-{:08x}", rand::random::<u32>());
        let mut session = Session {
            log: SessionLog::new(id.clone(), participant, agent, task, width),
            live: Replayer::new(width),
            agent: Some(factory()?),
            phase: Phase::HumanTurn,
            camera_x: 0,
            started: Instant::now(),
            rng: ChaCha8Rng::seed_from_u64(self.config.seed ^ n.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
            file: None,
            ranked: false,
        };
        if let Some(dir) = &self.config.data_dir {
            fs::create_dir_all(dir)?;
            let path = dir.join(log_file_name(participant, &id));
            fs::write(&path, format!("{}\n", header_line(&session.log)))?;
            session.file = Some(path);
        }
        session.push(Actor::Human, EventKind::SessionStart)?;
        lock(&self.sessions).insert(id.clone(), Arc::new(Mutex::new(session)));
        log::info!("session {id}: participant {participant} with {agent}");
        Ok(id)
    }

    pub fn place(&self, id: &str, x: usize, y: usize, sprite: SpriteId) -> Result<()> {
        let s = self.get(id)?;
        let mut s = lock(&s);
        s.require(Phase::HumanTurn)?;
        if x >= s.live.grid().width() || y >= LEVEL_HEIGHT || sprite.index() >= SPRITE_COUNT {
            return Err(SessionError::Rejected(format!("({x},{y},{}) is outside the level", sprite.index())));
        }
        if !s.live.grid().is_empty_at(x, y) {
            return Err(SessionError::Rejected(format!("cell ({x},{y}) is occupied")));
        }
        s.push(Actor::Human, EventKind::Place { x, y, sprite })
    }

    /// Returns who had placed the removed sprite.
    pub fn delete(&self, id: &str, x: usize, y: usize) -> Result<Actor> {
        let s = self.get(id)?;
        let mut s = lock(&s);
        s.require(Phase::HumanTurn)?;
        let owner = s.live.owner(x, y).ok_or_else(|| SessionError::Rejected(format!("cell ({x},{y}) is empty")))?;
        s.push(Actor::Human, EventKind::Delete { x, y, deleted_actor: owner })?;
        Ok(owner)
    }

    /// Playtest request. Logged, nothing else.
    pub fn run(&self, id: &str) -> Result<()> {
        let s = self.get(id)?;
        let mut s = lock(&s);
        s.require(Phase::HumanTurn)?;
        s.push(Actor::Human, EventKind::Run)
    }

    /// Ends the human turn and lets the agent answer. The agent runs without
    /// holding the session lock; requests arriving meanwhile see `ai_turn`.
    pub fn end_turn(&self, id: &str, camera_x: Option<usize>) -> Result<Vec<Placement>> {
        let handle = self.get(id)?;
        let (mut agent, grid, mut rng, camera) = {
            let mut s = lock(&handle);
            s.require(Phase::HumanTurn)?;
            let camera = camera_x.unwrap_or(s.camera_x).min(s.live.grid().width() - 1);
            s.camera_x = camera;
            s.push(Actor::Human, EventKind::EndTurn { camera_x: Some(camera) })?;
            s.phase = Phase::AiTurn;
            let agent = s.agent.take().expect("agent present outside ai turn");
            (agent, s.live.grid().clone(), s.rng.clone(), camera)
        };
        let proposed = agent.propose(&mut ProposeContext::live(&grid, camera, &mut rng));

        let mut s = lock(&handle);
        s.agent = Some(agent);
        s.rng = rng;
        s.phase = Phase::HumanTurn;
        let additions = match proposed.map_err(SessionError::from).and_then(|a| validate_additions(&grid, a)) {
            Ok(a) => a,
            Err(e) => {
                log::error!("session {id}: {e}");
                return Err(e);
            }
        };
        for p in &additions {
            s.push(Actor::Ai, EventKind::Place { x: p.x, y: p.y, sprite: p.sprite })?;
        }
        Ok(additions)
    }

    pub fn end(&self, id: &str) -> Result<()> {
        let s = self.get(id)?;
        let mut s = lock(&s);
        s.require(Phase::HumanTurn)?;
        s.push(Actor::Human, EventKind::SessionEnd)?;
        s.phase = Phase::Ended;
        Ok(())
    }

    /// Appends a rank event to both of a participant's finished sessions.
    pub fn rank(&self, participant: &str, first: &str, second: &str, ranks: RankRequest) -> Result<()> {
        if first == second {
            return Err(SessionError::Rank("the two sessions must differ".into()));
        }
        let mut pair = [ranks.first.reuse_rank, ranks.second.reuse_rank];
        pair.sort();
        if pair != [1, 2] {
            return Err(SessionError::Rank(format!(
                "reuse ranks must be 1 and 2, got {} and {}",
                ranks.first.reuse_rank, ranks.second.reuse_rank
            )));
        }
        let (a, b) = (self.get(first)?, self.get(second)?);
        let (mut a, mut b) = (lock(&a), lock(&b));
        for s in [&a, &b] {
            if s.log.participant_id != participant {
                return Err(SessionError::Rank(format!("session {} belongs to another participant", s.log.session_id)));
            }
            if s.phase != Phase::Ended {
                return Err(SessionError::Rank(format!("session {} is not finished", s.log.session_id)));
            }
            if s.ranked {
                return Err(SessionError::Rank(format!("session {} is already ranked", s.log.session_id)));
            }
        }
        if !ranks.first.is_valid() || !ranks.second.is_valid() {
            return Err(SessionError::Rank("every rank must be 1 or 2".into()));
        }
        a.push(Actor::Human, EventKind::Rank(ranks.first))?;
        b.push(Actor::Human, EventKind::Rank(ranks.second))?;
        a.ranked = true;
        b.ranked = true;
        Ok(())
    }

    pub fn level(&self, id: &str) -> Result<TileGrid> {
        let s = self.get(id)?;
        let grid = lock(&s).live.grid().clone();
        Ok(grid)
    }

    pub fn log(&self, id: &str) -> Result<SessionLog> {
        let s = self.get(id)?;
        let log = lock(&s).log.clone();
        Ok(log)
    }

    pub fn status(&self, id: &str) -> Result<SessionStatus> {
        let s = self.get(id)?;
        let s = lock(&s);
        Ok(SessionStatus {
            session_id: s.log.session_id.clone(),
            participant_id: s.log.participant_id.clone(),
            agent: s.log.agent_name.clone(),
            task: s.log.task,
            phase: s.phase,
            over_time: s.started.elapsed() > self.config.time_limit,
            camera_x: s.camera_x,
            turns: s.log.events.iter().filter(|e| matches!(e.kind, EventKind::EndTurn { .. })).count(),
            events: s.log.events.len(),
        })
    }

    /// Logs of all sessions, in creation order.
    pub fn logs(&self) -> Vec<SessionLog> {
        let handles: Vec<_> = lock(&self.sessions).values().cloned().collect();
        let mut logs: Vec<SessionLog> = handles.iter().map(|h| lock(h).log.clone()).collect();
        logs.sort_by(|a, b| a.session_id.cmp(&b.session_id));
        logs
    }
}

/// Agents are trusted to follow the contract, but the live level must never
/// be corrupted by one that does not.
fn validate_additions(grid: &TileGrid, additions: Vec<Placement>) -> Result<Vec<Placement>> {
    let mut probe = grid.clone();
    for p in &additions {
        if p.x >= probe.width() || p.y >= LEVEL_HEIGHT || p.sprite.index() >= SPRITE_COUNT || !probe.is_empty_at(p.x, p.y) {
            return Err(SessionError::Rejected(format!(
                "agent proposed an invalid addition ({},{},{})",
                p.x,
                p.y,
                p.sprite.index()
            )));
        }
        probe.place(p.x, p.y, p.sprite).map_err(|e| SessionError::Rejected(e.to_string()))?;
    }
    Ok(additions)
}
