//! Sparse JSONL sample files:
//! `{"pid":"7","state":[[x,y,s],...],"actions":[[x,y,s,r],...]}` per line.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::level::{SpriteId, TileGrid, CHUNK_WIDTH, LEVEL_HEIGHT, SPRITE_COUNT};

use super::samples::{ActionEntry, SmdpSample};
use super::DatasetError;

#[derive(Serialize, Deserialize)]
struct RawSample {
    pid: String,
    state: Vec<(usize, usize, usize)>,
    actions: Vec<(usize, usize, usize, f64)>,
}

fn to_raw(s: &SmdpSample) -> RawSample {
    RawSample {
        pid: s.participant_id.clone(),
        state: s.state.occupied().map(|(x, y, sp)| (x, y, sp.index())).collect(),
        actions: s.actions.iter().map(|a| (a.x, a.y, a.sprite.index(), a.reward)).collect(),
    }
}

fn from_raw(raw: RawSample) -> Result<SmdpSample, String> {
    let check = |x: usize, y: usize, s: usize| {
        if x >= CHUNK_WIDTH || y >= LEVEL_HEIGHT || s >= SPRITE_COUNT {
            Err(format!("entry ({x},{y},{s}) outside the 40x15x32 chunk"))
        } else {
            Ok(())
        }
    };
    let mut state = TileGrid::empty(CHUNK_WIDTH);
    for (x, y, s) in raw.state {
        check(x, y, s)?;
        state.place(x, y, SpriteId(s as u8)).map_err(|e| e.to_string())?;
    }
    let mut actions = Vec::with_capacity(raw.actions.len());
    for (x, y, s, reward) in raw.actions {
        check(x, y, s)?;
        actions.push(ActionEntry { x, y, sprite: SpriteId(s as u8), reward });
    }
    let sample = SmdpSample { participant_id: raw.pid, state, actions };
    sample.validate().map_err(|e| e.to_string())?;
    Ok(sample)
}

pub fn samples_to_jsonl(samples: &[SmdpSample]) -> String {
    let mut out = String::new();
    for s in samples {
        out.push_str(&serde_json::to_string(&to_raw(s)).expect("sample serializes"));
        out.push('\n');
    }
    out
}

pub fn samples_from_jsonl(text: &str) -> Result<Vec<SmdpSample>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawSample = serde_json::from_str(line)
            .map_err(|e| DatasetError::Parse { line: i + 1, message: e.to_string() })?;
        out.push(from_raw(raw).map_err(|message| DatasetError::Parse { line: i + 1, message })?);
    }
    Ok(out)
}

pub fn write_samples(samples: &[SmdpSample], path: impl AsRef<Path>) -> Result<(), DatasetError> {
    fs::write(path, samples_to_jsonl(samples))?;
    Ok(())
}

pub fn read_samples(path: impl AsRef<Path>) -> Result<Vec<SmdpSample>, DatasetError> {
    samples_from_jsonl(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_sample() -> impl Strategy<Value = SmdpSample> {
        (
            proptest::collection::btree_map((0usize..40, 0usize..15), (0u8..32, any::<bool>(), -1.5f64..1.5), 0..40),
            "[a-z0-9]{1,6}",
        )
            .prop_map(|(cells, pid)| {
                let mut state = TileGrid::empty(CHUNK_WIDTH);
                let mut actions = Vec::new();
                for ((x, y), (s, is_action, r)) in cells {
                    if is_action {
                        actions.push(ActionEntry { x, y, sprite: SpriteId(s), reward: r });
                    } else {
                        state.place(x, y, SpriteId(s)).unwrap();
                    }
                }
                SmdpSample { participant_id: pid, state, actions }
            })
    }

    proptest! {
        #[test]
        fn jsonl_round_trip(samples in proptest::collection::vec(arb_sample(), 0..5)) {
            let text = samples_to_jsonl(&samples);
            prop_assert_eq!(samples_from_jsonl(&text).unwrap(), samples);
        }
    }

    #[test]
    fn rejects_action_on_occupied_cell() {
        let line = r#"{"pid":"1","state":[[0,14,0]],"actions":[[0,14,0,1.0]]}"#;
        assert!(matches!(samples_from_jsonl(line), Err(DatasetError::Parse { line: 1, .. })));
        let line = r#"{"pid":"1","state":[[40,14,0]],"actions":[]}"#;
        assert!(samples_from_jsonl(line).is_err());
    }
}
