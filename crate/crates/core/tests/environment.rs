mod common;

use proptest::prelude::*;
use rwre_boundary::environment::{
    disorder, for_each_assignment, imbalance, imbalance_of_law, pair_moment, sample_window, validate_assumption_b,
    DisorderEnvironment, DisorderSpec, Environment, EtaLaw, JumpLaw, SeededEnvironment, DEFAULT_BUDGET_BYTES,
};
use rwre_boundary::geometry::{boundary_sites, Direction, Face, LatticeSite};
use rwre_boundary::Error;

fn grid_sites(side: i64) -> Vec<Vec<i64>> {
    let mut v = Vec::new();
    for a in -side..side {
        for b in -side..side {
            for c in -side..side {
                v.push(vec![a, b, c, a - b]);
            }
        }
    }
    v
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn site_means_match_alpha() {
    let spec = common::skewed_spec(0.7);
    let env = SeededEnvironment::new(&spec, 9);
    let sites = grid_sites(12);
    for e in 0..8 {
        let xs: Vec<f64> = sites.iter().map(|s| env.omega(s, e)).collect();
        let (m, se) = mean_se(&xs);
        let a = spec.alpha.at(e);
        assert!((m - a).abs() <= 4.0 * se, "direction {e}: mean {m} vs {a} (se {se})");
    }
}

#[test]
fn pair_moments_match_empirical() {
    let spec = common::skewed_spec(0.7);
    let env = SeededEnvironment::new(&spec, 10);
    let sites = grid_sites(12);
    for e in 0..8 {
        for f in 0..8 {
            let xs: Vec<f64> = sites.iter().map(|s| env.omega(s, e) * env.omega(s, f)).collect();
            let (m, se) = mean_se(&xs);
            let want = pair_moment(&spec, Direction::from_index(e), Direction::from_index(f));
            assert!((m - want).abs() <= 4.0 * se.max(1e-15), "({e},{f}): {m} vs {want}");
        }
    }
}

#[test]
fn neighbouring_sites_are_uncorrelated() {
    let spec = common::two_point_spec(4, 0.5);
    let env = SeededEnvironment::new(&spec, 3);
    let sites = grid_sites(12);
    let xs: Vec<f64> = sites
        .iter()
        .map(|s| {
            let mut t = s.clone();
            t[0] += 1;
            let a = env.atom(s) as f64 - 0.5;
            let b = env.atom(&t) as f64 - 0.5;
            a * b
        })
        .collect();
    let (m, se) = mean_se(&xs);
    assert!(m.abs() <= 4.0 * se, "lag-one correlation {m} (se {se})");
}

#[test]
fn common_random_numbers_across_eps() {
    let spec = common::skewed_spec(0.2);
    let a = SeededEnvironment::new(&spec, 5);
    let b = SeededEnvironment::new(&spec.with_eps(0.9), 5);
    let c = SeededEnvironment::new(&spec, 6);
    let sites = grid_sites(4);
    assert!(sites.iter().all(|s| a.atom(s) == b.atom(s)));
    assert!(sites.iter().any(|s| a.atom(s) != c.atom(s)));
}

proptest! {
    /// Every realized row is a probability vector, elliptic with kappa = (1 - eps) min alpha.
    #[test]
    fn rows_are_elliptic_kernels(eps in 0.0f64..0.99, seed in any::<u64>(), site in prop::collection::vec(-50i64..50, 4)) {
        let spec = common::skewed_spec(eps);
        let env = SeededEnvironment::new(&spec, seed);
        let row = env.omega_vec(&site);
        prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let kappa = spec.ellipticity();
        prop_assert!(row.iter().all(|&w| w >= kappa - 1e-15));
        for (e, &w) in row.iter().enumerate() {
            prop_assert!((w / spec.alpha.at(e) - 1.0).abs() <= eps + 1e-12);
        }
    }

    /// Window disorder and imbalance never exceed the law's values.
    #[test]
    fn window_statistics_bounded(eps in 0.0f64..0.95, seed in any::<u64>()) {
        let spec = common::skewed_spec(eps);
        let face = Face::new(vec![1, -1, 1, -1]).unwrap();
        let region: Vec<LatticeSite> = (0..5).flat_map(|n| boundary_sites(&face, n)).collect();
        let w = sample_window(&spec, seed, &region, DEFAULT_BUDGET_BYTES).unwrap();
        prop_assert!(disorder(&w) <= spec.disorder() + 1e-12);
        prop_assert!(imbalance(&w, &face) <= imbalance_of_law(&spec, &face) + 1e-12);
    }
}

#[test]
fn window_agrees_with_generator_and_writes_csv() {
    let spec = common::two_point_spec(3, 0.4);
    let region: Vec<LatticeSite> = (0..4).flat_map(|n| boundary_sites(&Face::positive(3).unwrap(), n)).collect();
    let w = sample_window(&spec, 21, &region, DEFAULT_BUDGET_BYTES).unwrap();
    let env = SeededEnvironment::new(&spec, 21);
    for s in &region {
        assert_eq!(w.get(&s.coords).unwrap(), env.omega_vec(&s.coords).as_slice());
    }
    // Outside the stored region the window regenerates the same field.
    assert_eq!(w.omega_vec(&[-7, 3, 2]), env.omega_vec(&[-7, 3, 2]));
    let mut buf = Vec::new();
    w.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x1,x2,x3,w+e1,w-e1,w+e2,w-e2,w+e3,w-e3");
    assert_eq!(lines.count(), region.len());
    assert!(matches!(sample_window(&spec, 21, &region, 100), Err(Error::ResourceLimit { .. })));
}

#[test]
fn assumption_b_checks() {
    let alpha = JumpLaw::uniform(2).unwrap();
    assert!(validate_assumption_b(&EtaLaw::default_two_point(&alpha).unwrap(), &alpha).passes());
    let skewed = common::skewed_spec(0.5);
    assert!(validate_assumption_b(&skewed.eta, &skewed.alpha).passes());

    let r = vec![1.0, -1.0, 1.0, -1.0];
    let single = EtaLaw::new(vec![r.clone()], vec![1.0]);
    let rep = validate_assumption_b(&single, &alpha);
    assert!(!rep.support_not_singleton && !rep.mean_zero);

    let off_mean = EtaLaw::new(vec![r.clone(), vec![0.0, 0.0, 1.0, -1.0]], vec![0.5, 0.5]);
    assert!(!validate_assumption_b(&off_mean, &alpha).mean_zero);

    let not_in_e = EtaLaw::new(vec![vec![1.0, 1.0, 1.0, 1.0], vec![-1.0; 4]], vec![0.5, 0.5]);
    assert!(!validate_assumption_b(&not_in_e, &alpha).in_e_alpha);

    let bad_weights = EtaLaw::new(vec![r.clone(), r.iter().map(|x| -x).collect()], vec![0.7, 0.7]);
    assert!(!validate_assumption_b(&bad_weights, &alpha).weights_valid);

    assert!(DisorderSpec::new(alpha.clone(), EtaLaw::default_two_point(&alpha).unwrap(), 1.0).is_err());
    assert!(DisorderSpec::new(alpha.clone(), single, 0.5).is_err());
}

#[test]
fn assignment_enumeration_is_a_distribution() {
    let spec = common::skewed_spec(0.5);
    let sites: Vec<Vec<i64>> = vec![vec![0, 0, 0, 0], vec![1, 0, 0, 0], vec![0, 1, 0, 0], vec![0, 0, 1, 0]];
    let mut total = 0.0;
    let mut count = 0;
    let mut mean = 0.0;
    for_each_assignment(&spec, &sites, 1000, |env, p| {
        total += p;
        count += 1;
        mean += p * env.omega(&sites[2], 3);
    })
    .unwrap();
    assert_eq!(count, 81);
    assert!((total - 1.0).abs() <= 1e-14);
    assert!((mean - spec.alpha.at(3)).abs() <= 1e-14);
    assert!(matches!(
        for_each_assignment(&spec, &sites, 80, |_, _| {}),
        Err(Error::ResourceLimit { .. })
    ));
}
