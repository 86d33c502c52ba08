//! Largest test subset whose (group × label) cell proportions match the
//! training set's.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::confound::Group;
use crate::error::{Error, Result};

/// Cell order: (below, 0), (below, 1), (above, 0), (above, 1).
pub const CELLS: [(Group, bool); 4] = [
    (Group::Below, false),
    (Group::Below, true),
    (Group::Above, false),
    (Group::Above, true),
];

pub fn cell_index(group: Group, label: bool) -> usize {
    2 * usize::from(group == Group::Above) + usize::from(label)
}

pub fn cell_counts(groups: &[Group], labels: &[bool]) -> [usize; 4] {
    let mut counts = [0; 4];
    for (&g, &l) in groups.iter().zip(labels) {
        counts[cell_index(g, l)] += 1;
    }
    counts
}

/// Largest-remainder apportionment of `m` over integer `weights`. Exact
/// integer arithmetic; ties in the remainder go to the lower cell index.
pub fn largest_remainder(m: usize, weights: &[usize; 4]) -> [usize; 4] {
    let total: u128 = weights.iter().map(|&w| w as u128).sum();
    assert!(total > 0, "weights must not all be zero");
    let mut quota = [0usize; 4];
    let mut remainders = [(0u128, 0usize); 4];
    for c in 0..4 {
        let scaled = m as u128 * weights[c] as u128;
        quota[c] = (scaled / total) as usize;
        remainders[c] = (scaled % total, c);
    }
    let left = m - quota.iter().sum::<usize>();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, c) in remainders.iter().take(left) {
        quota[c] += 1;
    }
    quota
}

/// Largest `m` whose apportionment fits inside `available`, with its targets.
pub fn largest_feasible(train_counts: &[usize; 4], available: &[usize; 4]) -> Result<(usize, [usize; 4])> {
    let total: usize = train_counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidData("training cells are all empty".into()));
    }
    for c in 0..4 {
        if train_counts[c] > 0 && available[c] == 0 {
            let (group, label) = CELLS[c];
            return Err(Error::EmptyCellRequired {
                group: group.as_str(),
                label,
            });
        }
    }
    // A quota never exceeds ceil(m·w/T), so m·w/T ≤ count + 1 bounds m.
    let upper = (0..4)
        .filter(|&c| train_counts[c] > 0)
        .map(|c| ((available[c] + 1) as u128 * total as u128 / train_counts[c] as u128) as usize)
        .min()
        .expect("some cell has mass");
    let upper = upper.min(available.iter().sum());
    for m in (0..=upper).rev() {
        let targets = largest_remainder(m, train_counts);
        if targets.iter().zip(available).all(|(t, a)| t <= a) {
            return Ok((m, targets));
        }
    }
    unreachable!("m = 0 is always feasible")
}

/// Samples the apportioned number of test indices from each cell, without
/// replacement. The result is ascending.
pub fn confounded_test_subset(
    test_groups: &[Group],
    test_labels: &[bool],
    train_counts: &[usize; 4],
    seed: u64,
) -> Result<Vec<usize>> {
    if test_groups.len() != test_labels.len() {
        return Err(Error::DimensionMismatch {
            expected: test_labels.len(),
            actual: test_groups.len(),
            context: "test groups",
        });
    }
    let available = cell_counts(test_groups, test_labels);
    let (_, targets) = largest_feasible(train_counts, &available)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(targets.iter().sum());
    for (c, &target) in targets.iter().enumerate() {
        let mut members: Vec<usize> = (0..test_labels.len())
            .filter(|&i| cell_index(test_groups[i], test_labels[i]) == c)
            .collect();
        members.shuffle(&mut rng);
        chosen.extend_from_slice(&members[..target]);
    }
    chosen.sort_unstable();
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        // Proportions (.45, .45, .05, .05) as integer weights.
        let (m, targets) = largest_feasible(&[9, 9, 1, 1], &[50; 4]).unwrap();
        assert_eq!(targets, [50, 50, 6, 6]);
        assert_eq!(m, 112);
        assert_eq!(largest_remainder(111, &[9, 9, 1, 1]), [50, 50, 6, 5]);
    }

    #[test]
    fn matching_proportions_take_everything() {
        let (m, targets) = largest_feasible(&[10, 20, 30, 40], &[5, 10, 15, 20]).unwrap();
        assert_eq!((m, targets), (50, [5, 10, 15, 20]));
    }

    #[test]
    fn single_cell() {
        let (m, targets) = largest_feasible(&[0, 7, 0, 0], &[3, 8, 2, 1]).unwrap();
        assert_eq!((m, targets), (8, [0, 8, 0, 0]));
    }

    #[test]
    fn missing_cell() {
        let err = largest_feasible(&[1, 1, 1, 0], &[3, 0, 2, 1]).unwrap_err();
        assert!(matches!(err, Error::EmptyCellRequired { group: "below", label: true }));
    }
}
