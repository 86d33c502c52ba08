use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label-stratified assignment of samples to folds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub fold_count: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    /// `(train, test)` indices for fold `k`, both ascending.
    pub fn split(&self, k: usize) -> (Vec<usize>, Vec<usize>) {
        assert!(k < self.fold_count, "fold {k} out of range");
        (0..self.assignments.len()).partition(|&i| self.assignments[i] != k)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.fold_count];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Shuffles each class, then deals samples to folds round robin, continuing
/// the dealer position from one class to the next. Fold sizes and per-class
/// fold counts therefore each differ by at most one.
pub fn make_folds(labels: &[bool], fold_count: usize, seed: u64) -> Result<FoldPlan> {
    if fold_count < 2 {
        return Err(Error::Config("fold_count must be at least 2".into()));
    }
    for class in [false, true] {
        let count = labels.iter().filter(|&&l| l == class).count();
        if count < fold_count {
            return Err(Error::TooFewSamples {
                folds: fold_count,
                detail: format!("class {} has {count} samples", u8::from(class)),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0; labels.len()];
    let mut dealer = 0;
    for class in [false, true] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for i in members {
            assignments[i] = dealer;
            dealer = (dealer + 1) % fold_count;
        }
    }
    Ok(FoldPlan {
        fold_count,
        assignments,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_into_five() {
        let labels: Vec<bool> = (0..10).map(|i| i < 5).collect();
        let plan = make_folds(&labels, 5, 1).unwrap();
        assert_eq!(plan.fold_sizes(), vec![2; 5]);
    }

    #[test]
    fn too_few() {
        let labels = [true, true, true, false, false, false, true];
        assert!(matches!(make_folds(&labels, 4, 0), Err(Error::TooFewSamples { .. })));
    }
}
