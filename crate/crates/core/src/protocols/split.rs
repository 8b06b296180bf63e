//! Participant-grouped and class-stratified splits.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use super::ProtocolError;
use crate::rng::rng_from_seed;

/// Splits participant ids into `(train, test)` groups. The training side gets
/// `round(fraction * n)` participants, clamped so both sides are non-empty.
pub fn group_split(
    participants: &[u32],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<u32>, Vec<u32>), ProtocolError> {
    let mut ids: Vec<u32> = participants.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if ids.len() < 2 {
        return Err(ProtocolError::TooFewParticipants {
            needed: 2,
            found: ids.len(),
        });
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(ProtocolError::InvalidConfig(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    ids.shuffle(&mut rng_from_seed(seed));
    let n_train = ((train_fraction * ids.len() as f64).round() as usize).clamp(1, ids.len() - 1);
    let mut test = ids.split_off(n_train);
    ids.sort_unstable();
    test.sort_unstable();
    Ok((ids, test))
}

/// Assigns each group id to one of `k` folds (shuffled, round-robin).
/// Returns, per fold, the sorted group ids it holds out.
pub fn group_kfold(groups: &[u32], k: usize, seed: u64) -> Result<Vec<Vec<u32>>, ProtocolError> {
    let mut ids: Vec<u32> = groups.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if k < 2 || ids.len() < k {
        return Err(ProtocolError::TooFewParticipants {
            needed: k.max(2),
            found: ids.len(),
        });
    }
    ids.shuffle(&mut rng_from_seed(seed));
    let mut folds = vec![Vec::new(); k];
    for (i, id) in ids.into_iter().enumerate() {
        folds[i % k].push(id);
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

/// Stratified k-fold over sample labels: each class's samples are shuffled
/// and dealt round-robin, continuing the deal across classes so fold sizes
/// stay balanced. Returns the fold index of every sample.
pub fn stratified_kfold(labels: &[u32], k: usize, seed: u64) -> Result<Vec<usize>, ProtocolError> {
    if k < 2 {
        return Err(ProtocolError::InvalidConfig(format!("need at least 2 folds, got {k}")));
    }
    let classes: BTreeSet<u32> = labels.iter().copied().collect();
    let mut rng = rng_from_seed(seed);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for c in classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if members.len() < 2 {
            return Err(ProtocolError::Stratification(format!(
                "class {c} has {} sample(s); every training fold needs it",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for i in members {
            assignment[i] = next % k;
            next += 1;
        }
    }
    Ok(assignment)
}

/// Checks that every class appears in the training side of every fold.
pub fn check_stratification(labels: &[u32], folds: &[usize], k: usize) -> Result<(), ProtocolError> {
    let classes: BTreeSet<u32> = labels.iter().copied().collect();
    for f in 0..k {
        let present: BTreeSet<u32> = labels
            .iter()
            .zip(folds)
            .filter(|(_, &fold)| fold != f)
            .map(|(&l, _)| l)
            .collect();
        if let Some(missing) = classes.difference(&present).next() {
            return Err(ProtocolError::Stratification(format!(
                "class {missing} missing from the training side of fold {f}"
            )));
        }
    }
    Ok(())
}
