use std::path::Path;

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::level::{to_abstract, AbstractGrid, Placement, SpritePalette, Symbol, LEVEL_HEIGHT};
use crate::nn::{Adam, AdamConfig, BiLstm, Tensor, WeightsContainer};

use super::{realize_symbols, Agent, AgentError, ProposeContext, MAX_ADDITIONS};

/// Token closing each serialized column.
pub const SEPARATOR: usize = Symbol::COUNT;
/// Columns the agent may edit, centered on the camera.
pub const LSTM_WINDOW: usize = 65;

const COLUMN_TOKENS: usize = LEVEL_HEIGHT + 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmConfig {
    pub hidden: usize,
    /// Minimum probability of the predicted symbol.
    pub threshold: f64,
    /// Training sequences span this many columns.
    pub train_columns: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    /// Global gradient-norm clip per step.
    pub clip_norm: f64,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig { hidden: 128, threshold: 0.5, train_columns: 16, epochs: 20, adam: AdamConfig::default(), clip_norm: 5.0 }
    }
}

/// Columns `[x0, x1)` bottom to top, each followed by the separator.
pub fn serialize_columns(grid: &AbstractGrid, x0: usize, x1: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity((x1 - x0) * COLUMN_TOKENS);
    for x in x0..x1 {
        for y in (0..LEVEL_HEIGHT).rev() {
            out.push(grid.get(x, y).index());
        }
        out.push(SEPARATOR);
    }
    out
}

/// Position of cell `(x0 + column, y)` in [`serialize_columns`] output.
pub fn token_position(column: usize, y: usize) -> usize {
    column * COLUMN_TOKENS + (LEVEL_HEIGHT - 1 - y)
}

#[derive(Clone)]
pub struct LstmAgent {
    pub net: BiLstm,
    pub config: LstmConfig,
    palette: &'static SpritePalette,
}

impl LstmAgent {
    pub fn new(net: BiLstm, config: LstmConfig) -> Self {
        LstmAgent { net, config, palette: SpritePalette::standard() }
    }

    /// Cross-entropy training on column windows; returns the agent and the
    /// mean loss of each epoch.
    pub fn train(levels: &[AbstractGrid], config: LstmConfig, rng: &mut dyn RngCore) -> Result<(Self, Vec<f64>), AgentError> {
        if levels.is_empty() {
            return Err(AgentError::Train("empty corpus".into()));
        }
        let span = config.train_columns.max(1);
        let mut seqs = Vec::new();
        for level in levels {
            let w = level.width();
            let stride = (span / 2).max(1);
            let mut x0 = 0;
            loop {
                let x1 = (x0 + span).min(w);
                seqs.push(serialize_columns(level, x0, x1));
                if x1 == w {
                    break;
                }
                x0 += stride;
            }
        }
        let net = BiLstm::new(SEPARATOR + 1, config.hidden, rng);
        let mut agent = LstmAgent::new(net, config);
        let mut adam = Adam::new(agent.config.adam);
        let mut curve = Vec::with_capacity(agent.config.epochs);
        let mut order: Vec<usize> = (0..seqs.len()).collect();
        for epoch in 0..agent.config.epochs {
            order.shuffle(rng);
            let mut total = 0.0;
            for &i in &order {
                let (loss, mut grads) = agent
                    .net
                    .loss_and_grad(&seqs[i], &seqs[i])
                    .map_err(|e| AgentError::Train(format!("epoch {epoch}: {e}")))?;
                clip(&mut grads, agent.config.clip_norm);
                adam.step(agent.net.params_mut(), &grads).map_err(|e| AgentError::Train(format!("epoch {epoch}: {e}")))?;
                total += loss;
            }
            let mean = total / seqs.len() as f64;
            if !mean.is_finite() {
                return Err(AgentError::Train(format!("loss diverged at epoch {epoch}")));
            }
            ::log::debug!("lstm epoch {epoch}: loss {mean:.5}");
            curve.push(mean);
        }
        Ok((agent, curve))
    }

    pub fn to_container(&self) -> WeightsContainer {
        WeightsContainer {
            header: serde_json::json!({ "kind": "lstm", "vocab": self.net.vocab(), "config": self.config }),
            tensors: self.net.params().to_vec(),
        }
    }

    pub fn from_container(c: WeightsContainer) -> Result<Self, AgentError> {
        if c.header.get("kind").and_then(|k| k.as_str()) != Some("lstm") {
            return Err(AgentError::Format("not an lstm weights file".into()));
        }
        let config: LstmConfig = serde_json::from_value(c.header["config"].clone()).map_err(|e| AgentError::Format(e.to_string()))?;
        let net = BiLstm::from_params(SEPARATOR + 1, config.hidden, c.tensors)?;
        Ok(LstmAgent::new(net, config))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), AgentError> {
        Ok(self.to_container().write(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AgentError> {
        Self::from_container(WeightsContainer::read(path)?)
    }

    /// Column range the agent edits for a camera position.
    pub fn window(width: usize, camera_x: usize) -> (usize, usize) {
        let half = LSTM_WINDOW / 2;
        (camera_x.saturating_sub(half), (camera_x + half + 1).min(width))
    }
}

fn clip(grads: &mut [Tensor], max_norm: f64) {
    let norm = grads.iter().flat_map(|g| g.data()).map(|v| v * v).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        grads.iter_mut().for_each(|g| g.scale(max_norm / norm));
    }
}

impl Agent for LstmAgent {
    fn name(&self) -> &str {
        "lstm"
    }

    fn propose(&mut self, ctx: &mut ProposeContext<'_>) -> Result<Vec<Placement>, AgentError> {
        let level = ctx.level;
        let (x0, x1) = Self::window(level.width(), ctx.camera_x);
        if x0 >= x1 {
            return Ok(Vec::new());
        }
        let abs = to_abstract(level, self.palette);
        let seq = serialize_columns(&abs, x0, x1);
        let trace = self.net.forward(&seq)?;
        let mut cands = Vec::new();
        for x in x0..x1 {
            for y in (0..LEVEL_HEIGHT).rev() {
                if !level.is_empty_at(x, y) {
                    continue;
                }
                let probs = &trace.probs[token_position(x - x0, y)];
                let (best, p) = probs[..Symbol::COUNT]
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc });
                let sym = Symbol::from_index(best).expect("in alphabet");
                if sym != Symbol::Empty && p >= self.config.threshold {
                    cands.push((p, (x, y, sym)));
                }
            }
        }
        // stable: equal probabilities keep serialization order
        cands.sort_by(|a, b| b.0.total_cmp(&a.0));
        cands.truncate(MAX_ADDITIONS);
        let picks: Vec<_> = cands.into_iter().map(|(_, c)| c).collect();
        realize_symbols(level, &picks, self.palette, ctx.rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::{TileGrid, GROUND};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn flat(width: usize) -> AbstractGrid {
        let mut g = AbstractGrid::filled(width, Symbol::Empty);
        for x in 0..width {
            g.set(x, 14, Symbol::Solid);
        }
        g
    }

    fn small() -> LstmConfig {
        LstmConfig { hidden: 12, epochs: 40, train_columns: 6, adam: AdamConfig { lr: 0.01, ..AdamConfig::default() }, ..LstmConfig::default() }
    }

    #[test]
    fn serialization_layout() {
        let g = flat(2);
        let s = serialize_columns(&g, 0, 2);
        assert_eq!(s.len(), 32);
        assert_eq!(s[0], Symbol::Solid.index());
        assert_eq!(s[15], SEPARATOR);
        assert_eq!(s[token_position(1, 14)], Symbol::Solid.index());
        assert_eq!(s[token_position(1, 0)], Symbol::Empty.index());
    }

    #[test]
    fn window_clips_at_edges() {
        assert_eq!(LstmAgent::window(200, 0), (0, 33));
        assert_eq!(LstmAgent::window(200, 100), (68, 133));
        assert_eq!(LstmAgent::window(50, 45), (13, 50));
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(LstmAgent::train(&[], small(), &mut rng), Err(AgentError::Train(_))));
    }

    #[test]
    fn training_lowers_loss_and_learns_ground() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (mut agent, curve) = LstmAgent::train(&[flat(30), flat(24)], small(), &mut rng).unwrap();
        assert!(curve.last().unwrap() < &curve[0]);
        let level = TileGrid::empty(20);
        let out = agent.propose(&mut ProposeContext::live(&level, 0, &mut rng)).unwrap();
        for x in 0..20 {
            assert!(out.contains(&Placement::new(x, 14, GROUND)), "{out:?}");
        }
        assert!(out.len() <= 22, "{out:?}");
    }

    #[test]
    fn one_symbol_corpus_is_predicted_with_certainty() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = LstmConfig { epochs: 100, ..small() };
        let (agent, _) = LstmAgent::train(&[AbstractGrid::filled(8, Symbol::Empty)], cfg, &mut rng).unwrap();
        let seq = serialize_columns(&AbstractGrid::filled(8, Symbol::Empty), 0, 8);
        let trace = agent.net.forward(&seq).unwrap();
        assert!(trace.probs[token_position(3, 7)][Symbol::Empty.index()] > 0.95);
    }

    #[test]
    fn full_window_adds_nothing_and_weights_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut agent, _) = LstmAgent::train(&[flat(10)], LstmConfig { epochs: 2, ..small() }, &mut rng).unwrap();
        let mut full = TileGrid::empty(5);
        for x in 0..5 {
            for y in 0..LEVEL_HEIGHT {
                full.place(x, y, GROUND).unwrap();
            }
        }
        assert!(agent.propose(&mut ProposeContext::live(&full, 2, &mut rng)).unwrap().is_empty());
        let back = LstmAgent::from_container(WeightsContainer::from_bytes(&agent.to_container().to_bytes()).unwrap()).unwrap();
        assert_eq!(back.net, agent.net);
        assert_eq!(back.config, agent.config);
    }
}
