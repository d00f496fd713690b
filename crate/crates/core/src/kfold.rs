//! Stratified k-fold partitioning.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Splits `0..labels.len()` into `k` disjoint folds preserving class
/// proportions. Each class is shuffled with the seeded generator, the
/// classes are concatenated, and positions are dealt round-robin, so per-fold
/// class counts and fold sizes each differ from the ideal by at most one.
/// Indices inside each fold are sorted.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidArgument(alloc::format!("k must be ≥ 2, got {k}")));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let minority = by_class.values().map(Vec::len).min().unwrap_or(0);
    if k > minority {
        return Err(Error::InvalidArgument(alloc::format!(
            "k = {k} exceeds the smallest class count {minority}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[next % k].push(i);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Folds given by explicit per-sample assignments `0..k`.
pub fn folds_from_assignment(assignment: &[usize]) -> Result<Vec<Vec<usize>>> {
    let k = assignment.iter().max().map_or(0, |m| m + 1);
    if k < 2 {
        return Err(Error::InvalidArgument("fixed fold assignment needs at least two folds".into()));
    }
    let mut folds = vec![Vec::new(); k];
    for (i, &f) in assignment.iter().enumerate() {
        folds[f].push(i);
    }
    if let Some(empty) = folds.iter().position(Vec::is_empty) {
        return Err(Error::InvalidArgument(alloc::format!("fold {empty} is empty")));
    }
    Ok(folds)
}
