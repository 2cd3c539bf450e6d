use crate::corpus::sample::allocate;
use crate::seed;
use crate::{Error, Result};
use rand::seq::SliceRandom;

/// Train/test partition as indices into the labeled input, each ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified train/test split.
///
/// The training size is `round(ratio · n)`, shared out between the two
/// classes by largest remainder and kept within `[1, n_c − 1]` per class so
/// both sides see both labels. Each class is shuffled with its own seeded
/// stream and the first members go to training.
pub fn split(labels: &[bool], ratio: f64, seed: u64) -> Result<Split> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!("split ratio must be in (0, 1), got {ratio}")));
    }
    let mut classes: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &y) in labels.iter().enumerate() {
        classes[usize::from(y)].push(i);
    }
    for (c, members) in classes.iter().enumerate() {
        if members.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "class {} has {} member(s); stratified split needs at least 2",
                c == 1,
                members.len()
            )));
        }
    }
    let n_train = (ratio * labels.len() as f64).round() as usize;
    let sizes = [classes[0].len(), classes[1].len()];
    let mut quota = allocate(n_train, &sizes);
    for (q, &s) in quota.iter_mut().zip(&sizes) {
        *q = (*q).clamp(1, s - 1);
    }

    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(labels.len() - n_train);
    for (c, mut members) in classes.into_iter().enumerate() {
        members.shuffle(&mut seed::rng(seed::substream(seed, c as u64)));
        let (a, b) = members.split_at(quota[c]);
        train.extend_from_slice(a);
        test.extend_from_slice(b);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}
