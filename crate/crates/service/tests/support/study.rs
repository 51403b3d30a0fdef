//! Scripted user bots that design levels with the baseline partners through
//! the HTTP API, and the pipeline from their logs to an evaluated CNN.

use std::sync::Arc;

use morai_core::agents::{Agent, LstmAgent, LstmConfig, MarkovAgent, MarkovModel, RandomAgent, ShapeAgent, ShapeModel};
use morai_core::cnn::{CnnConfig, CnnModel, Head, TrainConfig};
use morai_core::dataset::{build_log_dataset, split_by_participant, CreditConfig};
use morai_core::eval::{group_by_participant, simulate, EvalReport};
use morai_core::events::{parse_jsonl, SessionLog};
use morai_core::level::{synth_level, to_abstract, Symbol, SpritePalette, BRICK, GROUND, QUESTION_BLOCK};
use morai_core::cnn::ActiveMode;
use morai_core::session::{AgentFactory, SessionConfig, SessionManager};
use morai_service::http::{router, AppState};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::Api;

pub const BOTS: usize = 6;
pub const WIDTH: usize = 80;
/// Partner pairs, assigned round robin. Every bot meets the LSTM and one of
/// the other two, so all three baselines are used.
pub const PAIRS: [[&str; 2]; 2] = [["lstm", "markov"], ["shape", "lstm"]];

fn factory<A: Agent + Clone + Sync + 'static>(a: A) -> AgentFactory {
    Box::new(move || Ok(Box::new(a.clone()) as Box<dyn Agent>))
}

/// Baselines trained on a small synthetic corpus.
pub fn baseline_manager(seed: u64) -> SessionManager {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let palette = SpritePalette::standard();
    let levels: Vec<_> = (0..4).map(|_| synth_level(WIDTH, &mut rng)).collect();
    let abs: Vec<_> = levels.iter().map(|l| to_abstract(l, palette)).collect();
    let lstm_cfg = LstmConfig { hidden: 32, epochs: 8, train_columns: 8, ..LstmConfig::default() };
    let (lstm, _) = LstmAgent::train(&abs, lstm_cfg, &mut rng).unwrap();
    let mut m = SessionManager::new(SessionConfig { level_width: WIDTH, seed, ..SessionConfig::default() });
    m.register("markov", factory(MarkovAgent::new(MarkovModel::train(&abs))));
    m.register("shape", factory(ShapeAgent::new(ShapeModel::train(&levels, palette))));
    m.register("lstm", factory(lstm));
    m
}

/// A bot keeps the partner additions whose class it likes and deletes the rest.
pub struct Bot {
    pub id: String,
    pub likes: Vec<Symbol>,
    rng: ChaCha8Rng,
}

impl Bot {
    pub fn new(index: usize, seed: u64) -> Self {
        let likes = match index % 3 {
            0 => vec![Symbol::Solid, Symbol::Pipe, Symbol::Breakable],
            1 => vec![Symbol::Coin, Symbol::Question, Symbol::Breakable, Symbol::Solid],
            _ => vec![Symbol::Enemy, Symbol::Pipe, Symbol::Cannon, Symbol::Solid],
        };
        Bot { id: format!("bot{index}"), likes, rng: ChaCha8Rng::seed_from_u64(seed * 1000 + index as u64) }
    }

    /// One session; returns (session id, kept, deleted).
    pub async fn design(&mut self, api: &Api, partner: &str) -> (String, usize, usize) {
        let palette = SpritePalette::standard();
        let v = api.ok("/sessions", json!({ "participant_id": self.id, "agent": partner, "level_width": WIDTH })).await;
        let sid = v["session_id"].as_str().unwrap().to_string();
        let (mut kept, mut deleted) = (0, 0);
        for x0 in [0, 40] {
            let (_, text) = api.get(&format!("/sessions/{sid}/level")).await;
            let level: serde_json::Value = serde_json::from_str(&text).unwrap();
            let mut occupied = std::collections::HashSet::new();
            for t in level["tiles"].as_array().unwrap() {
                occupied.insert((t[0].as_u64().unwrap() as usize, t[1].as_u64().unwrap() as usize));
            }
            let gaps: Vec<usize> = (0..2).map(|_| x0 + self.rng.gen_range(4..36)).collect();
            for x in x0..x0 + 40 {
                if !gaps.iter().any(|&g| x == g || x == g + 1) && !occupied.contains(&(x, 14)) {
                    api.ok(&format!("/sessions/{sid}/place"), json!({ "x": x, "y": 14, "sprite": GROUND.index() })).await;
                }
            }
            let bx = x0 + self.rng.gen_range(2..34);
            for i in (0..4).filter(|i| !occupied.contains(&(bx + i, 10))) {
                let s = if i == 1 { QUESTION_BLOCK } else { BRICK };
                api.ok(&format!("/sessions/{sid}/place"), json!({ "x": bx + i, "y": 10, "sprite": s.index() })).await;
            }
            let turn = api.ok(&format!("/sessions/{sid}/end-turn"), json!({ "camera_x": x0 + 20 })).await;
            for a in turn["additions"].as_array().unwrap() {
                let (x, y, s) = (a["x"].as_u64().unwrap(), a["y"].as_u64().unwrap(), a["sprite"].as_u64().unwrap());
                let class = palette.class_of(morai_core::level::SpriteId(s as u8));
                if self.likes.contains(&class) {
                    kept += 1;
                } else {
                    api.ok(&format!("/sessions/{sid}/delete"), json!({ "x": x, "y": y })).await;
                    deleted += 1;
                }
            }
        }
        api.ok(&format!("/sessions/{sid}/end"), json!({})).await;
        (sid, kept, deleted)
    }
}

pub struct StudyOutcome {
    pub logs: Vec<SessionLog>,
    pub model: CnnModel,
    pub test: Vec<morai_core::dataset::SmdpSample>,
    pub train_samples: usize,
    pub test_samples: usize,
    pub cnn: EvalReport,
    pub random: EvalReport,
}

/// Every bot runs two sessions with different partners, then ranks them.
pub async fn run_sessions(api: &Api, seed: u64) -> Vec<SessionLog> {
    let mut logs = Vec::new();
    for i in 0..BOTS {
        let mut bot = Bot::new(i, seed);
        let pair = PAIRS[i % PAIRS.len()];
        let a = bot.design(api, pair[0]).await;
        let b = bot.design(api, pair[1]).await;
        let score = |r: &(String, usize, usize)| r.1 as i64 - r.2 as i64;
        let first_wins = score(&a) >= score(&b);
        api.ok(
            "/rankings",
            json!({
                "participant_id": bot.id,
                "first_session": a.0,
                "second_session": b.0,
                "first": { "reuse_rank": if first_wins { 1 } else { 2 } },
                "second": { "reuse_rank": if first_wins { 2 } else { 1 } },
            }),
        )
        .await;
        for sid in [&a.0, &b.0] {
            let (status, text) = api.get(&format!("/sessions/{sid}/log")).await;
            assert!(status.is_success());
            logs.push(parse_jsonl(&text).unwrap());
        }
    }
    logs
}

pub fn study_cnn_config() -> (CnnConfig, TrainConfig) {
    (
        CnnConfig { head: Head::Structured { rank: 8 }, ..CnnConfig::default() },
        // positives are a handful of cells per chunk, so the plateau test
        // fires long before they are fit; run the full budget instead
        TrainConfig { batch_size: 16, max_epochs: 300, floor: 0.0, threshold: 0.05, ..TrainConfig::default() },
    )
}

pub async fn run_study(seed: u64) -> StudyOutcome {
    let (cfg, train) = study_cnn_config();
    let api = Api::new(router(AppState::new(Arc::new(baseline_manager(seed)))));
    let logs = run_sessions(&api, seed).await;
    let ds = build_log_dataset(&logs, &CreditConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let split = split_by_participant(ds.samples, &ds.incomplete_participants, 2.0 / 3.0, &mut rng).unwrap();
    let mut cnn = CnnModel::new(cfg, train, &mut rng).unwrap();
    cnn.pretrain(&split.train, &mut rng).unwrap();
    let groups = group_by_participant(&split.test);
    let cnn_report = simulate(&mut cnn, &groups, ActiveMode::None, seed, "CNN").unwrap();
    let random = simulate(&mut RandomAgent, &groups, ActiveMode::None, seed, "Random").unwrap();
    StudyOutcome { logs, model: cnn.clone(), test: split.test.clone(), train_samples: split.train.len(), test_samples: split.test.len(), cnn: cnn_report, random }
}
