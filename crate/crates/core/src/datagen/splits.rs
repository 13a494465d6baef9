use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::hin::{HinGraph, Split, TypeId};
use crate::rng;

/// Random split of the labeled objects of `t`: `train_percent`% for
/// training, the rest halved into validation and test (validation gets the
/// odd one out).
pub fn make_splits(g: &HinGraph, t: TypeId, train_percent: f64, seed: u64) -> Result<Split> {
    if !(train_percent > 0.0 && train_percent < 100.0) {
        return Err(Error::Config(format!(
            "train percentage {train_percent} not in (0, 100)"
        )));
    }
    let mut idx = g.labeled_indices(t);
    if idx.len() < 3 {
        return Err(Error::Data(format!(
            "type {} has {} labeled objects, need at least 3",
            g.schema().type_name(t),
            idx.len()
        )));
    }
    idx.shuffle(&mut rng::stream(seed, rng::ids::SPLITS + ((t as u64) << 8)));
    let n = idx.len();
    let n_train = ((n as f64 * train_percent / 100.0).round() as usize).clamp(1, n - 2);
    let rest = n - n_train;
    let n_val = rest.div_ceil(2);
    let test = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    Ok(Split {
        train: idx,
        val,
        test,
    })
}

/// The graph with fresh splits for every labeled type.
pub fn with_random_splits(g: &HinGraph, train_percent: f64, seed: u64) -> Result<HinGraph> {
    let splits = (0..g.schema().n_types())
        .map(|t| {
            if g.labeled_types().contains(&t) {
                make_splits(g, t, train_percent, seed).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(g.with_splits(splits))
}
