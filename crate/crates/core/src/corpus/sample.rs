use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use super::Utterance;
use crate::error::{Error, Result};

/// Uniform sample of `size` records without replacement, fixed by `seed`.
pub fn sample_subset(data: &[Utterance], size: usize, seed: u64) -> Result<Vec<Utterance>> {
    if size > data.len() {
        return Err(Error::Argument(format!(
            "cannot sample {size} records from {}",
            data.len()
        )));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, data.len(), size)
        .into_iter()
        .map(|i| data[i].clone())
        .collect())
}
