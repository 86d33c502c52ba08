use deconfound::eval::{cell_counts, cell_index};
use deconfound::confound::Group;
use deconfound::simulate::*;
use ndarray::Axis;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn concentrated_dirichlet_is_uniform() {
    let config = SimConfig {
        concentration: vec![1e9, 1e9],
        ..SimConfig::default()
    };
    let world = sim_world::<f64>(&config).unwrap();
    assert!((world.alpha[0] - 0.5).abs() < 1e-3);
    assert!((world.alpha[1] - 0.5).abs() < 1e-3);
}

#[test]
fn worlds_are_seed_determined() {
    let config = SimConfig::default();
    assert_eq!(sim_world::<f64>(&config).unwrap(), sim_world::<f64>(&config).unwrap());
    let other = SimConfig { seed: 1, ..config.clone() };
    assert_ne!(sim_world::<f64>(&config).unwrap(), sim_world::<f64>(&other).unwrap());
}

#[test]
fn dirichlet_mean_over_many_worlds() {
    let mut r = rng(0);
    let trials = 10_000;
    let mut sum = [0.0; 2];
    for _ in 0..trials {
        let a = dirichlet(&[40.0, 50.0], &mut r);
        assert!(a.iter().all(|&v| v >= 0.0));
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        sum[0] += a[0];
        sum[1] += a[1];
    }
    assert!((sum[0] / trials as f64 - 4.0 / 9.0).abs() < 0.01);
    assert!((sum[1] / trials as f64 - 5.0 / 9.0).abs() < 0.01);
}

#[test]
fn noise_free_single_factor_label_follows_latent() {
    let config = SimConfig {
        k: 1,
        concentration: vec![1.0],
        sigma: 1e-12,
        d: 5,
        p: 4,
        ..SimConfig::default()
    };
    let world = sim_world::<f64>(&config).unwrap();
    let draw = sim_draw_with_latents(&world, &config, 500, &mut rng(1)).unwrap();
    let signal = draw.latents[0].dot(&world.wy[0]);
    for (s, &label) in signal.iter().zip(draw.dataset.labels()) {
        assert_eq!(*s > 0.0, label);
    }
    assert!(draw.dataset.covariates.confounders.is_empty());
}

#[test]
fn confounder_direction_dominates_cross_covariance() {
    let config = SimConfig {
        sigma: 0.1,
        ..SimConfig::default()
    };
    let world = sim_world::<f64>(&config).unwrap();
    let ds = sim_draw(&world, &config, 50_000, &mut rng(2)).unwrap();
    let y = &ds.covariates.confounders[0].values;
    let yc = y - y.mean().unwrap();
    let cross = ds.x.values().t().dot(&yc);
    let expected = world.wx[0].t().dot(&world.wy[0]);
    let corr = pearson(cross.as_slice().unwrap(), expected.as_slice().unwrap());
    assert!(corr > 0.9, "correlation {corr}");
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn label_prevalence_is_balanced() {
    let config = SimConfig::default();
    let world = sim_world::<f64>(&config).unwrap();
    let ds = sim_draw(&world, &config, 10_000, &mut rng(3)).unwrap();
    let prevalence = ds.labels().iter().filter(|&&b| b).count() as f64 / ds.n() as f64;
    assert!((prevalence - 0.5).abs() < 0.02, "{prevalence}");
}

#[test]
fn feature_variance_matches_model() {
    let config = SimConfig::default();
    let world = sim_world::<f64>(&config).unwrap();
    let ds = sim_draw(&world, &config, 50_000, &mut rng(4)).unwrap();
    let var = ds.x.values().var_axis(Axis(0), 0.0);
    let mean_var = var.mean().unwrap();
    let analytic = (config.d * config.k) as f64 + config.sigma * config.sigma;
    assert!((mean_var / analytic - 1.0).abs() < 0.05, "{mean_var} vs {analytic}");
    let means = ds.x.values().mean_axis(Axis(0)).unwrap();
    assert!(means.iter().all(|m| m.abs() < 0.2));
}

#[test]
fn confounded_split_filters_training_only() {
    let config = SimConfig {
        n: 6000,
        ..SimConfig::default()
    };
    let world = sim_world::<f64>(&config).unwrap();
    let (train, test) = simulate_confounded(&world, &config, 0.25, &mut rng(5)).unwrap();
    assert_eq!(train.n(), 6000);
    let y1 = &train.covariates.confounders[0].values;
    for (v, &label) in y1.iter().zip(train.labels()) {
        assert!(admitted_to_training(*v, label));
        // The sign of Y1 alone predicts the label perfectly.
        assert_eq!(*v < 0.0, label);
    }

    let groups: Vec<Group> = test.covariates.confounders[0].values.iter().map(|&v| Group::of(v, 0.0)).collect();
    let counts = cell_counts(&groups, test.labels());
    assert!(counts.iter().all(|&c| c > 0), "{counts:?}");
    let rejected = counts[cell_index(Group::Below, false)] + counts[cell_index(Group::Above, true)];
    assert!(rejected > 0);
}

#[test]
fn quadrant_balancing_equalizes_cells() {
    let config = SimConfig {
        p: 10,
        ..SimConfig::default()
    };
    let world = sim_world::<f64>(&config).unwrap();
    let ds = sim_draw(&world, &config, 4000, &mut rng(6)).unwrap();
    let kept = balance_quadrants(&ds, &mut rng(7)).unwrap();
    let sub = ds.select(&kept);
    let groups: Vec<Group> = sub.covariates.confounders[0].values.iter().map(|&v| Group::of(v, 0.0)).collect();
    let counts = cell_counts(&groups, sub.labels());
    assert!(counts.iter().all(|&c| c == counts[0] && c > 0), "{counts:?}");
}

#[test]
fn admitted_draws_are_deterministic() {
    let config = SimConfig {
        p: 20,
        ..SimConfig::default()
    };
    let world = sim_world::<f64>(&config).unwrap();
    let a = draw_admitted(&world, &config, 700, &mut rng(8)).unwrap();
    let b = draw_admitted(&world, &config, 700, &mut rng(8)).unwrap();
    assert_eq!(a.x, b.x);
    assert_eq!(a.labels(), b.labels());
    assert_eq!(training_filter(&a).unwrap().len(), 700);
}

#[test]
fn cohort_proxies_depend_only_on_sex() {
    let config = CohortConfig::default();
    let ds = sex_like_cohort::<f64>(&config).unwrap();
    assert_eq!(ds.n(), config.n);
    assert_eq!(ds.x.p(), 2 + config.label_features + config.noise_features);
    let prevalence = ds.labels().iter().filter(|&&b| b).count() as f64 / ds.n() as f64;
    assert!((prevalence - config.prevalence).abs() < 0.05);
    let sex = &ds.covariates.confounder(SEX_COLUMN).unwrap().values;
    let male = (0..ds.n()).find(|&i| sex[i] == 1.0).unwrap();
    let female = (0..ds.n()).find(|&i| sex[i] == 0.0).unwrap();
    for i in 0..ds.n() {
        let reference = if sex[i] == 1.0 { male } else { female };
        for j in 0..2 {
            assert_eq!(ds.x.values()[[i, j]], ds.x.values()[[reference, j]]);
        }
    }
    let x = ds.x.values();
    assert!((x[[female, 0]] / x[[male, 0]] - 2.0).abs() < 1e-12);
    assert!((x[[female, 1]] / x[[male, 1]] - 1e-3).abs() < 1e-15);
}
