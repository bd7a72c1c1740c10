use rand::seq::SliceRandom;

use super::{Dataset, SplitTag};
use crate::error::{Error, Result};

/// Class-stratified split: roughly `fraction` of every class goes to the
/// first output, the rest to the second. Each class keeps at least one item
/// on either side.
pub fn split(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid("fraction", format!("{fraction} outside (0, 1)")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.num_classes()];
    for (i, it) in ds.items().iter().enumerate() {
        by_class[it.label].push(i);
    }
    let mut rng = crate::rng::seeded(seed);
    let (mut first, mut second) = (Vec::new(), Vec::new());
    for (class, idx) in by_class.iter_mut().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(Error::invalid("ds", format!("class {class} has fewer than 2 items")));
        }
        idx.shuffle(&mut rng);
        let k = ((fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        first.extend_from_slice(&idx[..k]);
        second.extend_from_slice(&idx[k..]);
    }
    first.sort_unstable();
    second.sort_unstable();
    let pick = |ix: &[usize], tag| Dataset::new(ix.iter().map(|&i| ds.items()[i].clone()).collect(), ds.num_classes(), tag);
    Ok((pick(&first, ds.split())?, pick(&second, SplitTag::Val)?))
}
