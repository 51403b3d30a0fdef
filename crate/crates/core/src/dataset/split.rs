use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::RngCore;

use super::samples::SmdpSample;
use super::DatasetError;

#[derive(Clone, Debug, Default)]
pub struct DatasetSplit {
    pub train: Vec<SmdpSample>,
    pub test: Vec<SmdpSample>,
    pub test_participants: BTreeSet<String>,
}

/// Number of test participants for `n` participants at train `ratio`.
pub fn test_count(n: usize, ratio: f64) -> usize {
    (((1.0 - ratio) * n as f64) - 1e-9).ceil().max(1.0) as usize
}

/// Holds out whole participants for testing.
///
/// Participants are shuffled with `rng`; the test set is taken from the end
/// of the shuffled order, skipping anyone in `incomplete`, until it holds
/// `ceil((1 - ratio) * n)` participants. Sample order is preserved.
pub fn split_by_participant(
    samples: Vec<SmdpSample>,
    incomplete: &HashSet<String>,
    ratio: f64,
    rng: &mut dyn RngCore,
) -> Result<DatasetSplit, DatasetError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DatasetError::Split(format!("ratio {ratio} outside (0, 1)")));
    }
    let participants: BTreeSet<&str> = samples.iter().map(|s| s.participant_id.as_str()).collect();
    if participants.len() < 2 {
        return Err(DatasetError::Split(format!("need at least 2 participants, got {}", participants.len())));
    }
    let mut order: Vec<&str> = participants.into_iter().collect();
    order.shuffle(rng);
    let wanted = test_count(order.len(), ratio);
    let test_participants: BTreeSet<String> = order
        .iter()
        .rev()
        .filter(|p| !incomplete.contains(**p))
        .take(wanted)
        .map(|p| p.to_string())
        .collect();
    if test_participants.is_empty() {
        return Err(DatasetError::Split("no participant has only complete sessions".into()));
    }
    let (test, train) = samples.into_iter().partition(|s| test_participants.contains(&s.participant_id));
    Ok(DatasetSplit { train, test, test_participants })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::TileGrid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn samples(n: usize) -> Vec<SmdpSample> {
        (0..n)
            .flat_map(|p| {
                (0..3).map(move |_| SmdpSample {
                    participant_id: format!("p{p}"),
                    state: TileGrid::empty(40),
                    actions: vec![],
                })
            })
            .collect()
    }

    #[test]
    fn ten_participants_hold_out_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = split_by_participant(samples(10), &HashSet::new(), 0.8, &mut rng).unwrap();
        assert_eq!(s.test_participants.len(), 2);
        assert_eq!(s.test.len(), 6);
        assert_eq!(s.train.len(), 24);
        assert!(s.train.iter().all(|x| !s.test_participants.contains(&x.participant_id)));
    }

    #[test]
    fn incomplete_participants_never_tested() {
        let incomplete: HashSet<String> = (0..8).map(|p| format!("p{p}")).collect();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = split_by_participant(samples(10), &incomplete, 0.8, &mut rng).unwrap();
            let expected: BTreeSet<String> = ["p8".to_string(), "p9".to_string()].into();
            assert_eq!(s.test_participants, expected);
        }
    }

    #[test]
    fn same_seed_same_split() {
        let a = split_by_participant(samples(10), &HashSet::new(), 0.8, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = split_by_participant(samples(10), &HashSet::new(), 0.8, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a.test_participants, b.test_participants);
        assert_eq!(a.train, b.train);
    }

    #[test]
    fn errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(split_by_participant(samples(1), &HashSet::new(), 0.8, &mut rng).is_err());
        let all: HashSet<String> = (0..3).map(|p| format!("p{p}")).collect();
        assert!(split_by_participant(samples(3), &all, 0.8, &mut rng).is_err());
    }

    #[test]
    fn test_count_arithmetic() {
        assert_eq!(test_count(10, 0.8), 2);
        assert_eq!(test_count(11, 0.8), 3);
        assert_eq!(test_count(6, 0.8), 2);
        assert_eq!(test_count(2, 0.8), 1);
    }
}
