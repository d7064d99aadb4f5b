use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Disjoint 40/30/30 partition of dataset indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSplit {
    /// Trains the target embedding model.
    pub target_train: Vec<usize>,
    /// The adversary's auxiliary dataset.
    pub attack_train: Vec<usize>,
    /// Target graphs the attacks are evaluated on.
    pub attack_test: Vec<usize>,
}

pub const MIN_SPLIT_SIZE: usize = 10;

/// Shuffles `0..len` with `seed` and slices it 40% / 30% / 30%.
pub fn split_dataset(len: usize, seed: u64) -> Result<DataSplit> {
    if len < MIN_SPLIT_SIZE {
        return Err(Error::InvalidArgument(format!(
            "dataset of {len} graphs is too small to split (need {MIN_SPLIT_SIZE})"
        )));
    }
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_target = (len as f64 * 0.4).round() as usize;
    let n_attack = (len as f64 * 0.3).round() as usize;
    let attack_test = order.split_off(n_target + n_attack);
    let attack_train = order.split_off(n_target);
    Ok(DataSplit {
        target_train: order,
        attack_train,
        attack_test,
    })
}
