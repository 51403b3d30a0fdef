//! The convolutional partner: a chunk goes in, a 40×15×32 value for every
//! (cell, sprite) comes out. Pretrained on credited samples with MSE and
//! Adam, optionally updated online during evaluation.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::agents::{drop_supported_flyers, Agent, AgentError, ProposeContext};
use crate::dataset::SmdpSample;
use crate::level::{encode_chunk, ChunkTensor, Placement, SpriteId, SpritePalette, TileGrid, CHUNK_WIDTH, LEVEL_HEIGHT, SPRITE_COUNT};
use crate::nn::{mse_loss, Adam, AdamConfig, LayerSpec, Network, Tensor, WeightsContainer};

/// Final fully connected map from the last conv features to the output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Head {
    /// Unrestricted dense layer. Its weight matrix has `(w·h·32)²` entries,
    /// which is only practical for small inputs.
    Dense,
    /// Per-cell dense block plus a rank-`rank` global term.
    Structured { rank: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub width: usize,
    pub height: usize,
    pub slope: f64,
    pub head: Head,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig { width: CHUNK_WIDTH, height: LEVEL_HEIGHT, slope: 0.01, head: Head::Structured { rank: 64 } }
    }
}

impl CnnConfig {
    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        let (w, h, c) = (self.width, self.height, SPRITE_COUNT);
        let act = LayerSpec::LeakyRelu { slope: self.slope };
        let head = match self.head {
            Head::Dense => LayerSpec::Dense { inputs: w * h * c, units: w * h * c },
            Head::Structured { rank } => {
                LayerSpec::StructuredDense { width: w, height: h, in_channels: c, out_channels: c, rank }
            }
        };
        vec![
            LayerSpec::Conv2d { in_channels: c, filters: 8, size: 4 },
            act.clone(),
            LayerSpec::Conv2d { in_channels: 8, filters: 16, size: 3 },
            act.clone(),
            LayerSpec::Conv2d { in_channels: 16, filters: 32, size: 3 },
            act,
            head,
            LayerSpec::Reshape { shape: vec![w, h, c] },
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop once the loss improved by less than `floor` (relative) over
    /// the last `window` epochs.
    pub window: usize,
    pub floor: f64,
    /// Stop as soon as the epoch loss drops below this.
    pub target_loss: Option<f64>,
    pub threshold: f64,
    pub cap: usize,
    pub adam: AdamConfig,
    /// Learning rate of online updates during evaluation.
    pub active_lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            max_epochs: 500,
            window: 10,
            floor: 1e-4,
            target_loss: None,
            threshold: 0.5,
            cap: 30,
            adam: AdamConfig::default(),
            active_lr: 1e-4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let ok = self.batch_size > 0
            && self.max_epochs > 0
            && self.window > 0
            && self.floor >= 0.0
            && self.cap > 0
            && self.adam.lr >= 0.0
            && self.active_lr >= 0.0
            && self.target_loss.is_none_or(|t| t > 0.0);
        if ok {
            Ok(())
        } else {
            Err(AgentError::Train(format!("invalid training config {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActiveMode {
    None,
    Episodic,
    Continuous,
}

impl std::str::FromStr for ActiveMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(ActiveMode::None),
            "episodic" => Ok(ActiveMode::Episodic),
            "continuous" => Ok(ActiveMode::Continuous),
            other => Err(format!("unknown mode {other:?} (none|episodic|continuous)")),
        }
    }
}

impl std::fmt::Display for ActiveMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ActiveMode::None => "none",
            ActiveMode::Episodic => "episodic",
            ActiveMode::Continuous => "continuous",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss of each epoch, measured before that epoch's steps.
    pub losses: Vec<f64>,
    /// Loss over the whole training set after the last step.
    pub final_loss: f64,
    pub stop: StopReason,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    TargetReached,
    MaxEpochs,
}

/// Regression target: credited reward (clamped to ±1) on each action's
/// (cell, sprite), zero elsewhere.
pub fn make_target(sample: &SmdpSample) -> Result<ChunkTensor, AgentError> {
    sample.validate().map_err(|e| AgentError::State(e.to_string()))?;
    let mut t = ChunkTensor::zeros();
    for a in &sample.actions {
        t.set(a.x, a.y, a.sprite.index(), a.reward.clamp(-1.0, 1.0));
    }
    Ok(t)
}

#[derive(Clone)]
pub struct CnnModel {
    name: String,
    pub config: CnnConfig,
    pub train: TrainConfig,
    net: Network,
    pristine: Option<Vec<Tensor>>,
    adam: Adam,
    palette: &'static SpritePalette,
}

impl CnnModel {
    pub fn new(config: CnnConfig, train: TrainConfig, rng: &mut dyn RngCore) -> Result<Self, AgentError> {
        train.validate()?;
        let net = Network::new(&[config.width, config.height, SPRITE_COUNT], config.layer_specs(), rng)?;
        Ok(CnnModel {
            name: "cnn".into(),
            adam: Self::online_adam(&train),
            config,
            train,
            net,
            pristine: None,
            palette: SpritePalette::standard(),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn params(&self) -> &[Tensor] {
        self.net.params()
    }

    pub fn pristine(&self) -> Option<&[Tensor]> {
        self.pristine.as_deref()
    }

    pub fn optimizer(&self) -> &Adam {
        &self.adam
    }

    /// Sets the online learning rate.
    pub fn set_learning_rate(&mut self, lr: f64) {
        self.train.active_lr = lr;
        self.adam.config.lr = lr;
    }

    fn online_adam(train: &TrainConfig) -> Adam {
        Adam::new(AdamConfig { lr: train.active_lr, ..train.adam })
    }

    fn check_dims(&self) -> Result<(), AgentError> {
        if (self.config.width, self.config.height) != (CHUNK_WIDTH, LEVEL_HEIGHT) {
            return Err(AgentError::State(format!(
                "model input is {}×{}, chunks are {CHUNK_WIDTH}×{LEVEL_HEIGHT}",
                self.config.width, self.config.height
            )));
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, AgentError> {
        Ok(self.net.forward(input)?)
    }

    /// Mean MSE over samples.
    pub fn loss(&self, samples: &[SmdpSample]) -> Result<f64, AgentError> {
        self.check_dims()?;
        let mut total = 0.0;
        for s in samples {
            let out = self.net.forward(s.state_tensor().values())?;
            total += mse_loss(&out, make_target(s)?.values())?.0;
        }
        Ok(total / samples.len().max(1) as f64)
    }

    fn step(net: &mut Network, adam: &mut Adam, batch: &[(Vec<f64>, Vec<f64>)]) -> Result<f64, AgentError> {
        let refs: Vec<(&[f64], &[f64])> = batch.iter().map(|(i, t)| (i.as_slice(), t.as_slice())).collect();
        let (loss, grads) = net.batch_gradient(&refs)?;
        if !loss.is_finite() {
            return Err(AgentError::Train("loss is not finite".into()));
        }
        adam.step(net.params_mut(), &grads)?;
        Ok(loss)
    }

    /// Mini-batch training until the convergence rule, the target loss or the
    /// epoch cap stops it. Afterwards the weights are snapshotted as the
    /// pristine state and the optimizer starts fresh for online updates.
    pub fn pretrain(&mut self, samples: &[SmdpSample], rng: &mut dyn RngCore) -> Result<TrainReport, AgentError> {
        self.check_dims()?;
        if samples.is_empty() {
            return Err(AgentError::Train("no training samples".into()));
        }
        let data: Vec<(Vec<f64>, Vec<f64>)> = samples
            .iter()
            .map(|s| Ok((s.state_tensor().into_values(), make_target(s)?.into_values())))
            .collect::<Result<_, AgentError>>()?;
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut adam = Adam::new(self.train.adam);
        let mut losses = Vec::new();
        let mut stop = StopReason::MaxEpochs;
        for epoch in 0..self.train.max_epochs {
            order.shuffle(rng);
            let mut total = 0.0;
            for chunk in order.chunks(self.train.batch_size) {
                let batch: Vec<_> = chunk.iter().map(|&i| data[i].clone()).collect();
                total += Self::step(&mut self.net, &mut adam, &batch)? * chunk.len() as f64;
            }
            let loss = total / data.len() as f64;
            ::log::debug!("cnn epoch {epoch}: loss {loss:.6e}");
            losses.push(loss);
            if self.train.target_loss.is_some_and(|t| loss < t) {
                stop = StopReason::TargetReached;
                break;
            }
            let w = self.train.window;
            if losses.len() > w {
                let old = losses[losses.len() - 1 - w];
                if old > 0.0 && (old - loss) / old < self.train.floor {
                    stop = StopReason::Converged;
                    break;
                }
            }
        }
        let final_loss = self.loss(samples)?;
        self.pristine = Some(self.net.params().to_vec());
        self.adam = Self::online_adam(&self.train);
        Ok(TrainReport { losses, final_loss, stop })
    }

    /// One Adam step on a single sample at the online learning rate, keeping
    /// optimizer state between calls.
    pub fn active_update(&mut self, sample: &SmdpSample) -> Result<f64, AgentError> {
        self.check_dims()?;
        let item = (sample.state_tensor().into_values(), make_target(sample)?.into_values());
        Self::step(&mut self.net, &mut self.adam, &[item])
    }

    pub fn reset_to_pristine(&mut self) -> Result<(), AgentError> {
        let p = self.pristine.as_ref().ok_or_else(|| AgentError::State("no pristine snapshot; pretrain first".into()))?;
        self.net.params_mut().clone_from_slice(p);
        self.adam = Self::online_adam(&self.train);
        Ok(())
    }

    /// Decodes the value tensor for the window at `window_x`.
    pub fn propose_window(&self, level: &TileGrid, window_x: usize) -> Result<Vec<Placement>, AgentError> {
        self.check_dims()?;
        let input = encode_chunk(level, window_x as i64)?;
        let out = self.net.forward(input.values())?;
        let mut cands = Vec::new();
        for x in 0..CHUNK_WIDTH {
            let lx = window_x + x;
            if lx >= level.width() {
                break;
            }
            for y in 0..LEVEL_HEIGHT {
                if !level.is_empty_at(lx, y) {
                    continue;
                }
                let cell = &out[ChunkTensor::offset(x, y, 0)..ChunkTensor::offset(x, y, 0) + SPRITE_COUNT];
                let (s, v) = cell.iter().enumerate().fold((0, f64::NEG_INFINITY), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
                if v > self.train.threshold {
                    cands.push((v, Placement::new(lx, y, SpriteId(s as u8))));
                }
            }
        }
        cands.sort_by(|a, b| b.0.total_cmp(&a.0));
        cands.truncate(self.train.cap);
        Ok(drop_supported_flyers(level, cands.into_iter().map(|c| c.1).collect(), self.palette))
    }

    pub fn to_container(&self) -> WeightsContainer {
        WeightsContainer {
            header: serde_json::json!({
                "kind": "cnn",
                "name": self.name,
                "config": self.config,
                "train": self.train,
                "layers": self.net.specs(),
            }),
            tensors: self.net.params().to_vec(),
        }
    }

    /// Loaded weights count as the pristine post-training state.
    pub fn from_container(c: WeightsContainer) -> Result<Self, AgentError> {
        if c.header.get("kind").and_then(|k| k.as_str()) != Some("cnn") {
            return Err(AgentError::Format("not a cnn weights file".into()));
        }
        let parse = |k: &str| c.header.get(k).cloned().ok_or_else(|| AgentError::Format(format!("header lacks {k}")));
        let config: CnnConfig = serde_json::from_value(parse("config")?).map_err(|e| AgentError::Format(e.to_string()))?;
        let train: TrainConfig = serde_json::from_value(parse("train")?).map_err(|e| AgentError::Format(e.to_string()))?;
        let name = c.header.get("name").and_then(|n| n.as_str()).unwrap_or("cnn").to_string();
        let net = Network::from_params(&[config.width, config.height, SPRITE_COUNT], config.layer_specs(), c.tensors)?;
        Ok(CnnModel {
            name,
            adam: Self::online_adam(&train),
            pristine: Some(net.params().to_vec()),
            config,
            train,
            net,
            palette: SpritePalette::standard(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), AgentError> {
        Ok(self.to_container().write(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AgentError> {
        Self::from_container(WeightsContainer::read(path)?)
    }
}

impl Agent for CnnModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn propose(&mut self, ctx: &mut ProposeContext<'_>) -> Result<Vec<Placement>, AgentError> {
        self.propose_window(ctx.level, ctx.window_x)
    }

    fn supports_active(&self) -> bool {
        true
    }

    fn active_update(&mut self, sample: &SmdpSample) -> Result<(), AgentError> {
        CnnModel::active_update(self, sample).map(|_| ())
    }

    fn reset(&mut self) -> Result<(), AgentError> {
        self.reset_to_pristine()
    }
}

/// Seed, configuration and outcome of a training run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub config: CnnConfig,
    pub train: TrainConfig,
    pub train_samples: usize,
    pub participants: usize,
    pub epochs: usize,
    pub final_loss: f64,
    pub stop: StopReason,
    pub parameters: usize,
}

pub fn write_loss_curve(path: impl AsRef<Path>, losses: &[f64]) -> Result<(), AgentError> {
    let mut s = String::from("epoch,loss\n");
    for (i, l) in losses.iter().enumerate() {
        s.push_str(&format!("{},{l:e}\n", i + 1));
    }
    Ok(fs::write(path, s)?)
}

pub fn write_run_metadata(path: impl AsRef<Path>, meta: &RunMetadata) -> Result<(), AgentError> {
    Ok(fs::write(path, serde_json::to_string_pretty(meta).expect("serializes"))?)
}
