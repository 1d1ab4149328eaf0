use log::warn;
use rand::seq::SliceRandom;

use super::DtfdError;
use crate::diffcore::{bag_seed, rng_for, stream, Rng};

/// Disjoint, near-equal index groups covering a bag's instances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoBagPartition {
    pub bag_id: Option<String>,
    pub groups: Vec<Vec<usize>>,
    /// Seed of the generator that produced the permutation, when known.
    pub seed: Option<u64>,
}

impl PseudoBagPartition {
    pub fn m(&self) -> usize {
        self.groups.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }
}

/// Shuffles `0..k` and deals it round-robin into `m` groups.
pub fn split_pseudobags(k: usize, m: usize, rng: &mut Rng) -> Result<PseudoBagPartition, DtfdError> {
    if m == 0 || k < m {
        return Err(DtfdError::Config(format!(
            "cannot split {k} instances into {m} non-empty pseudo-bags"
        )));
    }
    let mut perm: Vec<usize> = (0..k).collect();
    perm.shuffle(rng);
    let mut groups = vec![Vec::with_capacity(k / m + 1); m];
    for (i, idx) in perm.into_iter().enumerate() {
        groups[i % m].push(idx);
    }
    Ok(PseudoBagPartition {
        bag_id: None,
        groups,
        seed: None,
    })
}

/// Pseudo-bag count actually used for a bag of `k` instances: bags smaller
/// than `m` fall back to one instance per pseudo-bag.
pub fn effective_m(k: usize, m: usize, bag_id: &str) -> usize {
    if k < m {
        warn!("bag {bag_id} has {k} instances < {m} pseudo-bags; using {k} pseudo-bags");
        k
    } else {
        m
    }
}

/// Fixed evaluation partition, seeded from the bag id.
pub fn eval_partition(bag_id: &str, k: usize, m: usize) -> Result<PseudoBagPartition, DtfdError> {
    let m = effective_m(k, m, bag_id);
    let seed = bag_seed(bag_id);
    let mut part = split_pseudobags(k, m, &mut rng_for(seed, stream::EVAL_PARTITION))?;
    part.bag_id = Some(bag_id.to_string());
    part.seed = Some(seed);
    Ok(part)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_sizes(k: usize, m: usize) -> Vec<usize> {
        let mut s = split_pseudobags(k, m, &mut rng_for(1, 0)).unwrap().sizes();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }

    #[test]
    fn sizes() {
        assert_eq!(sorted_sizes(9, 3), vec![3, 3, 3]);
        assert_eq!(sorted_sizes(10, 3), vec![4, 3, 3]);
    }

    #[test]
    fn too_few_instances() {
        assert!(matches!(
            split_pseudobags(2, 3, &mut rng_for(1, 0)),
            Err(DtfdError::Config(_))
        ));
        assert_eq!(effective_m(2, 3, "tiny"), 2);
        assert_eq!(eval_partition("tiny", 2, 5).unwrap().m(), 2);
    }

    #[test]
    fn eval_partition_is_fixed_per_bag() {
        assert_eq!(eval_partition("b1", 50, 5).unwrap(), eval_partition("b1", 50, 5).unwrap());
        assert_ne!(
            eval_partition("b1", 50, 5).unwrap().groups,
            eval_partition("b2", 50, 5).unwrap().groups
        );
    }
}
