//! `morai` command line. Each command is a thin wrapper over the engine.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use morai_core::agents::{Agent, AgentError, LstmAgent, MarkovAgent, MarkovModel, RandomAgent, ShapeAgent, ShapeModel};
use morai_core::cnn::{write_loss_curve, write_run_metadata, ActiveMode, CnnModel, RunMetadata};
use morai_core::dataset::{
    build_log_dataset, build_smb_samples, read_samples, split_by_participant, write_samples, DatasetError,
};
use morai_core::eval::{group_by_participant, render_table, simulate, EvalError};
use morai_core::events::{read_jsonl_lenient, SessionLog};
use morai_core::level::{
    parse_level_text, serialize_level_text, synth_level, to_abstract, LevelError, SpritePalette, TileGrid,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ConfigError, ServiceConfig};
use crate::http::{serve, AppState};
use crate::registry::build_manager;

#[derive(Debug, Parser)]
#[command(name = "morai", version, about = "Co-creative level design engine")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TrainAgent {
    Markov,
    Shape,
    Lstm,
    Cnn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EvalAgent {
    Markov,
    Shape,
    Lstm,
    Cnn,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    None,
    Episodic,
    Continuous,
}

impl From<Mode> for ActiveMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::None => ActiveMode::None,
            Mode::Episodic => ActiveMode::Episodic,
            Mode::Continuous => ActiveMode::Continuous,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate text levels (and/or generate synthetic ones) into the corpus.
    IngestLevels {
        /// Level files or directories of `.txt` levels.
        paths: Vec<PathBuf>,
        /// Also generate this many synthetic levels.
        #[arg(long, default_value_t = 0)]
        synth: usize,
        #[arg(long, default_value_t = 120)]
        width: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to `<data_dir>/levels`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one partner and write its model file.
    Train {
        #[arg(long, value_enum)]
        agent: TrainAgent,
        /// Level corpus for markov, shape and lstm.
        #[arg(long)]
        levels: Option<PathBuf>,
        /// Sample file for cnn.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Approximate samples from complete levels.
    BuildSmbDataset {
        #[arg(long)]
        levels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Credit session logs and split them by participant into train/test files.
    BuildLogDataset {
        /// Defaults to `<data_dir>/logs`.
        #[arg(long)]
        logs: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        train_ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Simulated replay of a sample file, one row per participant.
    Eval {
        #[arg(long, value_enum)]
        agent: EvalAgent,
        /// Model file; not needed for random.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "none")]
        mode: Mode,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Column label; defaults to the agent name.
        #[arg(long)]
        label: Option<String>,
    },
    /// Run the session server.
    Serve {
        /// Overrides `server.bind`.
        #[arg(long)]
        bind: Option<String>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("no such file or directory: {}", .0.display())]
    Missing(PathBuf),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Level(#[from] LevelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for missing inputs and bad usage, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Missing(_) | CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn need(p: &Path) -> Result<&Path> {
    if p.exists() {
        Ok(p)
    } else {
        Err(CliError::Missing(p.to_path_buf()))
    }
}

fn write_parent(p: &Path) -> Result<()> {
    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

/// Sorted files with the given extension; a plain file is returned as is.
fn files_in(p: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    if need(p)?.is_file() {
        return Ok(vec![p.to_path_buf()]);
    }
    let mut out: Vec<PathBuf> = fs::read_dir(p)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|f| f.extension().is_some_and(|e| e == ext))
        .collect();
    out.sort();
    Ok(out)
}

pub fn read_levels(dir: &Path) -> Result<Vec<TileGrid>> {
    let files = files_in(dir, "txt")?;
    if files.is_empty() {
        return Err(CliError::Usage(format!("no .txt levels in {}", dir.display())));
    }
    files
        .iter()
        .map(|f| {
            let text = fs::read_to_string(f)?;
            parse_level_text(&text, SpritePalette::standard())
                .map_err(|e| CliError::Usage(format!("{}: {e}", f.display())))
        })
        .collect()
}

pub fn read_logs(dir: &Path) -> Result<Vec<SessionLog>> {
    let mut logs = Vec::new();
    for f in files_in(dir, "jsonl")? {
        match read_jsonl_lenient(&f) {
            Ok((log, _)) => logs.push(log),
            Err(e) => log::warn!("{}: {e}; skipped", f.display()),
        }
    }
    Ok(logs)
}

pub fn load_agent(agent: EvalAgent, model: Option<&Path>) -> Result<Box<dyn Agent>> {
    let path = || -> Result<&Path> {
        need(model.ok_or_else(|| CliError::Usage(format!("--model is required for {agent:?}")))?)
    };
    Ok(match agent {
        EvalAgent::Random => Box::new(RandomAgent),
        EvalAgent::Markov => Box::new(MarkovAgent::new(MarkovModel::load(path()?)?)),
        EvalAgent::Shape => Box::new(ShapeAgent::new(ShapeModel::load(path()?)?)),
        EvalAgent::Lstm => Box::new(LstmAgent::load(path()?)?),
        EvalAgent::Cnn => Box::new(CnnModel::load(path()?)?),
    })
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(p) = &cli.config {
        need(p)?;
    }
    let cfg = ServiceConfig::load(cli.config.as_deref())?;
    let palette = SpritePalette::standard();
    match cli.command {
        Command::IngestLevels { paths, synth, width, seed, out } => {
            let out = out.unwrap_or_else(|| cfg.data_dir().join("levels"));
            if paths.is_empty() && synth == 0 {
                return Err(CliError::Usage("give level paths or --synth N".into()));
            }
            let mut inputs = Vec::new();
            for p in &paths {
                inputs.extend(files_in(p, "txt")?);
            }
            fs::create_dir_all(&out)?;
            for f in &inputs {
                let text = fs::read_to_string(f)?;
                let g = parse_level_text(&text, palette)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", f.display())))?;
                fs::write(out.join(f.file_name().expect("file")), serialize_level_text(&g, palette))?;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in 0..synth {
                let g = synth_level(width, &mut rng);
                fs::write(out.join(format!("synth_{seed}_{i:03}.txt")), serialize_level_text(&g, palette))?;
            }
            println!("{} levels written to {}", inputs.len() + synth, out.display());
        }
        Command::Train { agent, levels, data, out, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            write_parent(&out)?;
            let level_dir = || levels.clone().unwrap_or_else(|| cfg.data_dir().join("levels"));
            match agent {
                TrainAgent::Markov => {
                    let levels = read_levels(&level_dir())?;
                    let abs: Vec<_> = levels.iter().map(|l| to_abstract(l, palette)).collect();
                    MarkovModel::train(&abs).save(&out)?;
                }
                TrainAgent::Shape => ShapeModel::train(&read_levels(&level_dir())?, palette).save(&out)?,
                TrainAgent::Lstm => {
                    let levels = read_levels(&level_dir())?;
                    let abs: Vec<_> = levels.iter().map(|l| to_abstract(l, palette)).collect();
                    let (agent, curve) = LstmAgent::train(&abs, cfg.lstm.config(), &mut rng)?;
                    agent.save(&out)?;
                    write_loss_curve(out.with_extension("loss.csv"), &curve)?;
                }
                TrainAgent::Cnn => {
                    let data = data.ok_or_else(|| CliError::Usage("--data is required for cnn".into()))?;
                    let samples = read_samples(need(&data)?)?;
                    let mut model = CnnModel::new(cfg.cnn.model_config(), cfg.cnn.train_config(), &mut rng)?;
                    let report = model.pretrain(&samples, &mut rng)?;
                    model.save(&out)?;
                    write_loss_curve(out.with_extension("loss.csv"), &report.losses)?;
                    let participants = group_by_participant(&samples).len();
                    let meta = RunMetadata {
                        seed,
                        config: model.config.clone(),
                        train: model.train.clone(),
                        train_samples: samples.len(),
                        participants,
                        epochs: report.losses.len(),
                        final_loss: report.final_loss,
                        stop: report.stop,
                        parameters: model.network().param_count(),
                    };
                    write_run_metadata(out.with_extension("meta.json"), &meta)?;
                    println!("{} epochs, final loss {:e} ({:?})", meta.epochs, meta.final_loss, meta.stop);
                }
            }
            println!("model written to {}", out.display());
        }
        Command::BuildSmbDataset { levels, out } => {
            let levels = read_levels(&levels.unwrap_or_else(|| cfg.data_dir().join("levels")))?;
            let samples = build_smb_samples(&levels)?;
            write_parent(&out)?;
            write_samples(&samples, &out)?;
            println!("{} samples written to {}", samples.len(), out.display());
        }
        Command::BuildLogDataset { logs, out_dir, train_ratio, seed } => {
            let logs = read_logs(&logs.unwrap_or_else(|| cfg.data_dir().join("logs")))?;
            let ds = build_log_dataset(&logs, &cfg.credit.config());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let split = split_by_participant(ds.samples, &ds.incomplete_participants, train_ratio, &mut rng)?;
            fs::create_dir_all(&out_dir)?;
            write_samples(&split.train, out_dir.join("train.jsonl"))?;
            write_samples(&split.test, out_dir.join("test.jsonl"))?;
            let test: Vec<&String> = split.test_participants.iter().collect();
            fs::write(out_dir.join("split.json"), serde_json::to_string_pretty(&serde_json::json!({
                "seed": seed,
                "train_ratio": train_ratio,
                "test_participants": test,
            })).expect("serializes"))?;
            println!("{} train / {} test samples in {}", split.train.len(), split.test.len(), out_dir.display());
        }
        Command::Eval { agent, model, mode, data, seed, out, label } => {
            let samples = read_samples(need(&data)?)?;
            let mut a = load_agent(agent, model.as_deref())?;
            let label = label.unwrap_or_else(|| a.name().to_string());
            let groups = group_by_participant(&samples);
            let report = simulate(a.as_mut(), &groups, mode.into(), seed, &label)?;
            let table = render_table(std::slice::from_ref(&report))?;
            write_parent(&out)?;
            fs::write(&out, &table.csv)?;
            print!("{}", table.text);
        }
        Command::Serve { bind } => {
            let manager = build_manager(&cfg)?;
            let bind = bind.unwrap_or_else(|| cfg.server.bind.clone());
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(AppState::new(Arc::new(manager)), &bind))?;
        }
    }
    Ok(())
}
