use std::collections::BTreeSet;
use std::io::Write;

use deconfound::confound::*;
use deconfound::data::{Covariate, CovariateSet, DataMatrix, Dataset};
use ndarray::{Array1, Array2};
use proptest::prelude::*;

const MALE_CANCER: Cell = Cell {
    group: Group::Above,
    label: true,
};
const FEMALE_HEALTHY: Cell = Cell {
    group: Group::Below,
    label: false,
};

fn cohort(n: usize) -> (Vec<f64>, Vec<bool>) {
    // Sex and label independent and balanced.
    ((0..n).map(|i| (i % 2) as f64).collect(), (0..n).map(|i| (i / 2) % 2 == 0).collect())
}

fn sex_rule(sex: &[f64], p: f64) -> BiasSubsampleRule {
    BiasSubsampleRule::thresholded(sex, 0.5, p, [MALE_CANCER, FEMALE_HEALTHY]).unwrap()
}

fn in_drop_cell(rule: &BiasSubsampleRule, labels: &[bool], i: usize) -> bool {
    rule.drop_cells.contains(&Cell {
        group: rule.groups[i],
        label: labels[i],
    })
}

#[test]
fn zero_probability_keeps_everything() {
    let (sex, labels) = cohort(200);
    let kept = subsample_indices(&labels, &sex_rule(&sex, 0.0), 1).unwrap();
    assert_eq!(kept, (0..200).collect::<Vec<_>>());
}

#[test]
fn unit_probability_empties_drop_cells() {
    let (sex, labels) = cohort(200);
    let rule = sex_rule(&sex, 1.0);
    let kept = subsample_indices(&labels, &rule, 1).unwrap();
    assert!(kept.iter().all(|&i| !in_drop_cell(&rule, &labels, i)));
    assert_eq!(kept.len(), 100);
}

#[test]
fn retained_count_is_binomial() {
    let labels = vec![true; 1000];
    let rule = BiasSubsampleRule::new(vec![Group::Above; 1000], 0.9, [MALE_CANCER]).unwrap();
    for seed in 0..20 {
        let kept = subsample_indices(&labels, &rule, seed).unwrap().len();
        assert!((70..=130).contains(&kept), "seed {seed}: {kept}");
    }
}

fn point_biserial(indicator: &[bool], labels: &[bool]) -> f64 {
    let x: Vec<f64> = indicator.iter().map(|&b| b as u8 as f64).collect();
    let y: Vec<f64> = labels.iter().map(|&b| b as u8 as f64).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[test]
fn gc_rule_creates_dropout_label_association() {
    let n = 2000;
    let dropout: Vec<f64> = (0..n).map(|i| 2.0 + 3.0 * ((i * 7919) % n) as f64 / n as f64).collect();
    let labels: Vec<bool> = (0..n).map(|i| i % 3 != 0).collect();
    let rule = gc_confound_rule(&dropout, DEFAULT_GC_THRESHOLD, DEFAULT_DROP_PROBABILITY).unwrap();
    let high: Vec<bool> = dropout.iter().map(|&d| d >= 3.5).collect();
    let before = point_biserial(&high, &labels);
    let kept = subsample_indices(&labels, &rule, 3).unwrap();
    let after = point_biserial(
        &kept.iter().map(|&i| high[i]).collect::<Vec<_>>(),
        &kept.iter().map(|&i| labels[i]).collect::<Vec<_>>(),
    );
    // Healthy samples survive only at high dropout, cancer only at low.
    assert!(after.abs() > before.abs() + 0.3, "{before} -> {after}");
    assert!(after < 0.0);
}

#[test]
fn threshold_boundary_and_all_below() {
    let rule = gc_confound_rule(&[3.5, 3.4999], 3.5, 0.9).unwrap();
    assert_eq!(rule.groups, vec![Group::Above, Group::Below]);

    let labels: Vec<bool> = (0..400).map(|i| i % 2 == 0).collect();
    let rule = gc_confound_rule(&vec![1.0; 400], 3.5, 0.5).unwrap();
    let kept = subsample_indices(&labels, &rule, 0).unwrap();
    assert_eq!(kept.iter().filter(|&&i| labels[i]).count(), 200);
    assert!(kept.iter().filter(|&&i| !labels[i]).count() < 200);
}

#[test]
fn subsample_is_deterministic_and_seed_sensitive() {
    let (sex, labels) = cohort(500);
    let rule = sex_rule(&sex, 0.9);
    let a = subsample_indices(&labels, &rule, 11).unwrap();
    assert_eq!(a, subsample_indices(&labels, &rule, 11).unwrap());
    assert_ne!(a, subsample_indices(&labels, &rule, 12).unwrap());
}

#[test]
fn dataset_subsample_keeps_rows_aligned() {
    let (sex, labels) = cohort(60);
    let x = DataMatrix::new(Array2::from_shape_fn((60, 2), |(i, j)| (i * 10 + j) as f64)).unwrap();
    let covs = CovariateSet::new(vec![Covariate::binary("sex", Array1::from(sex.clone()))], labels.clone()).unwrap();
    let ds = Dataset::new(x, covs).unwrap();
    let spec: SubsampleRuleSpec = serde_json::from_str(
        r#"{"group_column": "sex", "threshold": 0.5, "drop_cells": [{"group": "above", "label": true}]}"#,
    )
    .unwrap();
    assert_eq!(spec.drop_probability, DEFAULT_DROP_PROBABILITY);
    let rule = spec.resolve(&ds).unwrap();
    let out = biased_subsample(&ds, &rule, 4).unwrap();
    let kept = subsample_indices(&labels, &rule, 4).unwrap();
    for (row, &i) in kept.iter().enumerate() {
        assert_eq!(out.x.values()[[row, 0]], (i * 10) as f64);
        assert_eq!(out.labels()[row], labels[i]);
        assert_eq!(out.covariates.confounders[0].values[row], sex[i]);
    }
    let missing = SubsampleRuleSpec {
        group_column: "age".into(),
        ..spec
    };
    assert!(missing.resolve(&ds).is_err());
}

#[test]
fn dropout_examples() {
    let e = Array1::from_elem(GC_BINS, 0.005);
    let same = GcProfile::new(e.clone(), e.clone()).unwrap();
    assert_eq!(at_dropout(&same), 0.0);
    let none = GcProfile::new(e.clone(), Array1::zeros(GC_BINS)).unwrap();
    assert!((at_dropout(&none) - 51.0 * 0.005).abs() < 1e-15);
}

#[test]
fn gc_profile_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gc.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "gc,expected_fraction,observed_fraction").unwrap();
    for gc in (0..GC_BINS).rev() {
        let observed = if gc <= 50 { 0.002 } else { 0.008 };
        writeln!(f, "{gc},0.005,{observed}").unwrap();
    }
    drop(f);
    let profile = GcProfile::read_csv(&path).unwrap();
    assert!((at_dropout(&profile) - 51.0 * 0.003).abs() < 1e-12);

    std::fs::write(&path, "gc,expected_fraction,observed_fraction\n0,0.1,0.1\n").unwrap();
    let err = GcProfile::read_csv(&path).unwrap_err().to_string();
    assert!(err.contains("gc 1 missing"), "{err}");
}

fn profile_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        proptest::collection::vec(0.0..1.0 / GC_BINS as f64, GC_BINS),
        proptest::collection::vec(0.0..1.0 / GC_BINS as f64, GC_BINS),
    )
}

proptest! {
    #[test]
    fn dropout_is_monotone_in_observed(
        (e, o) in profile_strategy(),
        cuts in proptest::collection::vec(0.0..1.0f64, GC_BINS),
    ) {
        let base = GcProfile::new(Array1::from(e.clone()), Array1::from(o.clone())).unwrap();
        let lowered: Vec<f64> = o.iter().zip(&cuts).enumerate()
            .map(|(gc, (v, c))| if gc <= AT_RICH_MAX_GC { v * c } else { *v })
            .collect();
        let lower = GcProfile::new(Array1::from(e.clone()), Array1::from(lowered)).unwrap();
        prop_assert!(at_dropout(&lower) >= at_dropout(&base));
        prop_assert!(at_dropout(&base) >= 0.0);
        let covered = (0..=AT_RICH_MAX_GC).all(|gc| o[gc] >= e[gc]);
        prop_assert_eq!(at_dropout(&base) == 0.0, covered);
    }

    #[test]
    fn samples_outside_drop_cells_survive(
        sex in proptest::collection::vec(0u8..2, 4..200),
        labels in proptest::collection::vec(any::<bool>(), 200),
        p in 0.0..=1.0f64,
        seed in any::<u64>(),
    ) {
        let n = sex.len();
        let labels = &labels[..n];
        prop_assume!(labels.contains(&true) && labels.contains(&false));
        let values: Vec<f64> = sex.iter().map(|&s| s as f64).collect();
        let rule = sex_rule(&values, p);
        match subsample_indices(labels, &rule, seed) {
            Ok(kept) => {
                let kept: BTreeSet<usize> = kept.into_iter().collect();
                let outside: BTreeSet<usize> = (0..n).filter(|&i| !in_drop_cell(&rule, labels, i)).collect();
                let kept_outside: BTreeSet<usize> = kept.iter().copied().filter(|&i| !in_drop_cell(&rule, labels, i)).collect();
                prop_assert_eq!(kept_outside, outside);
            }
            Err(deconfound::Error::EmptyClass { .. }) => {}
            Err(e) => prop_assert!(false, "{}", e),
        }
    }
}
