use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, SpecificityLabel, Turn, TurnKey};

/// Fold index per turn, aligned with the turn order it was built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    k: usize,
    keys: Vec<TurnKey>,
    folds: Vec<usize>,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }

    /// Fold of the i-th input turn.
    pub fn fold(&self, i: usize) -> usize {
        self.folds[i]
    }

    pub fn fold_of(&self, key: &TurnKey) -> Option<usize> {
        self.keys.iter().position(|k| k == key).map(|i| self.folds[i])
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] != fold).collect()
    }

    pub fn as_map(&self) -> BTreeMap<TurnKey, usize> {
        self.keys.iter().cloned().zip(self.folds.iter().copied()).collect()
    }
}

fn labels_of(turns: &[Turn]) -> Result<Vec<SpecificityLabel>, CorpusError> {
    turns
        .iter()
        .map(|t| {
            t.gold_label.ok_or_else(|| CorpusError::Unlabeled {
                transcript_id: t.transcript_id.clone(),
                turn_id: t.turn_id.clone(),
            })
        })
        .collect()
}

/// Per-label shuffles dealt round-robin. The starting fold of each label
/// continues where the previous label stopped, so fold sizes also balance.
pub fn stratified_folds(turns: &[Turn], k: usize, seed: u64) -> Result<FoldAssignment, CorpusError> {
    let labels = labels_of(turns)?;
    if k < 2 {
        return Err(CorpusError::Folds {
            k,
            reason: "need at least 2 folds".into(),
        });
    }
    let mut by_label: BTreeMap<SpecificityLabel, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_label.entry(*l).or_default().push(i);
    }
    if let Some((label, idx)) = by_label.iter().find(|(_, idx)| idx.len() < k) {
        return Err(CorpusError::Folds {
            k,
            reason: format!("label {label} has only {} turns", idx.len()),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; turns.len()];
    let mut offset = 0;
    for idx in by_label.values_mut() {
        idx.shuffle(&mut rng);
        for (j, &i) in idx.iter().enumerate() {
            folds[i] = (offset + j) % k;
        }
        offset = (offset + idx.len()) % k;
    }
    Ok(FoldAssignment {
        k,
        keys: turns.iter().map(Turn::key).collect(),
        folds,
    })
}

/// Whole transcripts per fold: largest transcripts first, each into the
/// currently smallest fold.
pub fn transcript_folds(turns: &[Turn], k: usize, seed: u64) -> Result<FoldAssignment, CorpusError> {
    labels_of(turns)?;
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, t) in turns.iter().enumerate() {
        groups.entry(&t.transcript_id).or_default().push(i);
    }
    if k < 2 || groups.len() < k {
        return Err(CorpusError::Folds {
            k,
            reason: format!("{} transcripts cannot fill {k} folds", groups.len()),
        });
    }
    let mut order: Vec<Vec<usize>> = groups.into_values().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.sort_by_key(|g| std::cmp::Reverse(g.len()));
    let mut sizes = vec![0usize; k];
    let mut folds = vec![0; turns.len()];
    for group in order {
        let target = (0..k).min_by_key(|&f| (sizes[f], f)).unwrap();
        sizes[target] += group.len();
        for i in group {
            folds[i] = target;
        }
    }
    Ok(FoldAssignment {
        k,
        keys: turns.iter().map(Turn::key).collect(),
        folds,
    })
}
