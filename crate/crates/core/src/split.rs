//! Train/test partitions stratified by event status.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is in the graph
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Sends `round(test_fraction · size)` subjects of each status stratum to
/// the test side, chosen uniformly at random. Both index lists are sorted.
pub fn stratified_split<R: Rng + ?Sized>(status: &[bool], test_fraction: f64, rng: &mut R) -> Split {
    let mut train = Vec::with_capacity(status.len());
    let mut test = Vec::new();
    for stratum in [true, false] {
        let mut members: Vec<usize> = (0..status.len()).filter(|&i| status[i] == stratum).collect();
        members.shuffle(rng);
        let n_test = (members.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Split { train, test }
}
