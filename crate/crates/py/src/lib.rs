//! Python bindings. Levels travel as text, logs and sample files as JSONL
//! strings, placements as `(x, y, sprite)` tuples.

use std::path::PathBuf;
use std::sync::Mutex;

use morai_core::agents::{Agent, LstmAgent, MarkovAgent, MarkovModel, ProposeContext, RandomAgent, ShapeAgent, ShapeModel};
use morai_core::cnn::{ActiveMode, CnnModel};
use morai_core::dataset::{self, samples_from_jsonl, samples_to_jsonl, CreditConfig};
use morai_core::eval::{group_by_participant, simulate};
use morai_core::events::parse_jsonl;
use morai_core::level::{self, parse_level_text, serialize_level_text, SpriteId, SpritePalette, TileGrid, SPRITE_COUNT};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_level(text: &str) -> PyResult<TileGrid> {
    parse_level_text(text, SpritePalette::standard()).map_err(value_err)
}

/// Sprite names by index.
#[pyfunction]
fn sprite_names() -> Vec<&'static str> {
    let p = SpritePalette::standard();
    (0..SPRITE_COUNT).map(|i| p.get(SpriteId(i as u8)).name).collect()
}

/// A seeded synthetic level as text.
#[pyfunction]
#[pyo3(signature = (width, seed=0))]
fn synth_level(width: usize, seed: u64) -> PyResult<String> {
    if width < 16 {
        return Err(PyValueError::new_err("synthetic levels are at least 16 columns wide"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(serialize_level_text(&level::synth_level(width, &mut rng), SpritePalette::standard()))
}

/// Occupied cells of a text level.
#[pyfunction]
fn level_tiles(text: &str) -> PyResult<Vec<(usize, usize, usize)>> {
    Ok(parse_level(text)?.occupied().map(|(x, y, s)| (x, y, s.index())).collect())
}

/// Raises `ValueError` unless the JSONL log parses and validates.
#[pyfunction]
fn validate_log(jsonl: &str) -> PyResult<()> {
    parse_jsonl(jsonl).and_then(|l| l.validate()).map_err(value_err)
}

type CreditRow = (usize, usize, usize, usize, f64, bool);
type EvalRows = (f64, Vec<(String, f64, f64)>);

/// Credited AI additions of one ranked log:
/// `(turn, x, y, sprite, reward, deleted)` in log order.
#[pyfunction]
#[pyo3(signature = (jsonl, gamma=0.1, deletion_penalty=-0.1))]
fn assign_credit(jsonl: &str, gamma: f64, deletion_penalty: f64) -> PyResult<Vec<CreditRow>> {
    let log = parse_jsonl(jsonl).map_err(value_err)?;
    let credit = dataset::assign_credit(&log, &CreditConfig { gamma, deletion_penalty }).map_err(value_err)?;
    Ok(credit
        .additions
        .iter()
        .map(|a| (a.turn, a.placement.x, a.placement.y, a.placement.sprite.index(), a.reward, a.deleted))
        .collect())
}

/// Sample JSONL from a list of JSONL logs. Incomplete logs are skipped.
#[pyfunction]
#[pyo3(signature = (logs, gamma=0.1, deletion_penalty=-0.1))]
fn build_log_dataset(logs: Vec<String>, gamma: f64, deletion_penalty: f64) -> PyResult<String> {
    let logs = logs.iter().map(|t| parse_jsonl(t)).collect::<Result<Vec<_>, _>>().map_err(value_err)?;
    let ds = dataset::build_log_dataset(&logs, &CreditConfig { gamma, deletion_penalty });
    Ok(samples_to_jsonl(&ds.samples))
}

/// Sample JSONL approximated from complete text levels.
#[pyfunction]
fn build_smb_samples(levels: Vec<String>) -> PyResult<String> {
    let levels = levels.iter().map(|t| parse_level(t)).collect::<PyResult<Vec<_>>>()?;
    Ok(samples_to_jsonl(&dataset::build_smb_samples(&levels).map_err(value_err)?))
}

/// A trained partner.
#[pyclass(name = "Agent")]
struct PyAgent {
    inner: Mutex<Box<dyn Agent>>,
}

impl PyAgent {
    fn with<T>(&self, f: impl FnOnce(&mut dyn Agent) -> T) -> T {
        let mut guard = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        f(guard.as_mut())
    }
}

#[pymethods]
impl PyAgent {
    /// `kind` is one of random, markov, shape, lstm, cnn; all but random
    /// need a model file.
    #[staticmethod]
    #[pyo3(signature = (kind, path=None))]
    fn load(kind: &str, path: Option<PathBuf>) -> PyResult<Self> {
        let path = || path.clone().ok_or_else(|| PyValueError::new_err(format!("{kind} needs a model path")));
        let io = |e: morai_core::agents::AgentError| match e {
            morai_core::agents::AgentError::Io(e) => PyOSError::new_err(e.to_string()),
            e => value_err(e),
        };
        let inner: Box<dyn Agent> = match kind {
            "random" => Box::new(RandomAgent),
            "markov" => Box::new(MarkovAgent::new(MarkovModel::load(path()?).map_err(io)?)),
            "shape" => Box::new(ShapeAgent::new(ShapeModel::load(path()?).map_err(io)?)),
            "lstm" => Box::new(LstmAgent::load(path()?).map_err(io)?),
            "cnn" => Box::new(CnnModel::load(path()?).map_err(io)?),
            _ => return Err(PyValueError::new_err(format!("unknown agent {kind:?}"))),
        };
        Ok(PyAgent { inner: Mutex::new(inner) })
    }

    #[getter]
    fn name(&self) -> String {
        self.with(|a| a.name().to_string())
    }

    /// Additions for one turn on a text level with the view centered on
    /// `camera_x`.
    #[pyo3(signature = (level, camera_x=0, seed=0))]
    fn propose(&self, py: Python<'_>, level: &str, camera_x: usize, seed: u64) -> PyResult<Vec<(usize, usize, usize)>> {
        let grid = parse_level(level)?;
        let out = py.detach(|| {
            self.with(|a| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                a.propose(&mut ProposeContext::live(&grid, camera_x, &mut rng))
            })
        });
        Ok(out.map_err(value_err)?.iter().map(|p| (p.x, p.y, p.sprite.index())).collect())
    }

    /// Replay evaluation over sample JSONL. Returns
    /// `(avg_percent, [(participant, sum, max), ...])`.
    #[pyo3(signature = (samples, mode="none", seed=0))]
    fn evaluate(&self, py: Python<'_>, samples: &str, mode: &str, seed: u64) -> PyResult<EvalRows> {
        let mode = match mode {
            "none" => ActiveMode::None,
            "episodic" => ActiveMode::Episodic,
            "continuous" => ActiveMode::Continuous,
            m => return Err(PyValueError::new_err(format!("unknown mode {m:?}"))),
        };
        let samples = samples_from_jsonl(samples).map_err(value_err)?;
        let report = py
            .detach(|| {
                self.with(|a| {
                    let label = a.name().to_string();
                    simulate(a, &group_by_participant(&samples), mode, seed, &label)
                })
            })
            .map_err(value_err)?;
        let rows = report.rows.iter().map(|r| (r.participant.clone(), r.sum, r.max)).collect();
        Ok((report.avg_percent(), rows))
    }
}

#[pymodule]
fn morai(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(sprite_names, m)?)?;
    m.add_function(wrap_pyfunction!(synth_level, m)?)?;
    m.add_function(wrap_pyfunction!(level_tiles, m)?)?;
    m.add_function(wrap_pyfunction!(validate_log, m)?)?;
    m.add_function(wrap_pyfunction!(assign_credit, m)?)?;
    m.add_function(wrap_pyfunction!(build_log_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(build_smb_samples, m)?)?;
    m.add_class::<PyAgent>()?;
    Ok(())
}
