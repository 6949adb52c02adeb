use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PairedRecord, UnpairedRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit<T> {
    pub train: Vec<T>,
    pub test: Vec<T>,
    pub seed: u64,
    pub ratio: f64,
}

/// Stratified random split: each stratum sends `round(ratio * size)` of its
/// items to the training side. Both sides keep the input order.
pub fn split<T: Clone, K: Ord>(
    items: &[T],
    stratum: impl Fn(&T) -> K,
    ratio: f64,
    seed: u64,
) -> Result<DatasetSplit<T>> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!(
            "split ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let mut strata: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        strata.entry(stratum(item)).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; items.len()];
    for members in strata.values_mut() {
        members.shuffle(&mut rng);
        let n_train = (ratio * members.len() as f64).round() as usize;
        for &i in &members[..n_train] {
            in_train[i] = true;
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (item, &t) in items.iter().zip(&in_train) {
        if t {
            train.push(item.clone());
        } else {
            test.push(item.clone());
        }
    }
    Ok(DatasetSplit {
        train,
        test,
        seed,
        ratio,
    })
}

/// Splits whole pairs, stratified by the labels of both variants, so the two
/// variants of a pair always land on the same side.
pub fn split_paired(
    records: &[PairedRecord],
    ratio: f64,
    seed: u64,
) -> Result<DatasetSplit<PairedRecord>> {
    split(records, |r| (r.a.label, r.b.label), ratio, seed)
}

/// Splits records stratified by label and subgroup.
pub fn split_unpaired(
    records: &[UnpairedRecord],
    ratio: f64,
    seed: u64,
) -> Result<DatasetSplit<UnpairedRecord>> {
    split(records, |r| (r.label, r.subgroup.clone()), ratio, seed)
}
