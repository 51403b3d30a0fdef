use std::collections::BTreeSet;

use log::warn;

use crate::level::{TileGrid, CHUNK_WIDTH};

use super::samples::{ActionEntry, SmdpSample};
use super::DatasetError;

/// Participant id given to samples approximated from existing levels.
pub const SMB_PARTICIPANT: &str = "smb";

/// Approximates co-creative samples from complete levels.
///
/// Every 40-column window (stride 1) and every sprite type present in it
/// yields one sample: the window with that type removed is the state, and
/// restoring the removed sprites, each rewarded 1.0, is the action.
pub fn build_smb_samples(levels: &[TileGrid]) -> Result<Vec<SmdpSample>, DatasetError> {
    if levels.is_empty() {
        return Err(DatasetError::Empty("no levels given".into()));
    }
    let mut out = Vec::new();
    for (i, level) in levels.iter().enumerate() {
        if level.width() < CHUNK_WIDTH {
            warn!("level {i} is {} columns wide, narrower than a chunk; skipped", level.width());
            continue;
        }
        for x0 in 0..=level.width() - CHUNK_WIDTH {
            let window = level.window(x0, CHUNK_WIDTH);
            let types: BTreeSet<_> = window.occupied().map(|(_, _, s)| s).collect();
            for sprite in types {
                let mut state = window.clone();
                let mut actions = Vec::new();
                for (x, y, s) in window.occupied().filter(|c| c.2 == sprite) {
                    state.set(x, y, None)?;
                    actions.push(ActionEntry { x, y, sprite: s, reward: 1.0 });
                }
                out.push(SmdpSample { participant_id: SMB_PARTICIPANT.to_string(), state, actions });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::{SpriteId, GROUND};

    #[test]
    fn ground_only_window_makes_one_sample() {
        let mut g = TileGrid::empty(CHUNK_WIDTH);
        for x in 0..CHUNK_WIDTH {
            g.place(x, 14, GROUND).unwrap();
        }
        let s = build_smb_samples(&[g.clone()]).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].state.occupied_count(), 0);
        assert_eq!(s[0].actions.len(), CHUNK_WIDTH);
        assert!(s[0].actions.iter().all(|a| a.reward == 1.0 && a.sprite == GROUND));
        assert_eq!(s[0].completed(), g);
    }

    #[test]
    fn two_windows_three_types_make_six() {
        let mut g = TileGrid::empty(41);
        for x in 0..41 {
            g.place(x, 14, GROUND).unwrap();
        }
        g.place(5, 10, SpriteId(3)).unwrap();
        g.place(20, 9, SpriteId(5)).unwrap();
        let s = build_smb_samples(&[g]).unwrap();
        assert_eq!(s.len(), 6);
        for sample in &s {
            sample.validate().unwrap();
        }
    }

    #[test]
    fn empty_window_and_narrow_level() {
        assert!(build_smb_samples(&[TileGrid::empty(40)]).unwrap().is_empty());
        assert!(build_smb_samples(&[TileGrid::empty(39)]).unwrap().is_empty());
        assert!(build_smb_samples(&[]).is_err());
    }
}
