mod common;

use proptest::prelude::*;
use rwre_boundary::environment::{JumpLaw, SeededEnvironment, DEFAULT_BUDGET_BYTES};
use rwre_boundary::geometry::Face;
use rwre_boundary::rng::task_seed;
use rwre_boundary::stochastics::{
    chi, difference_moments, fourier_bound, green_function, green_terms, khasminskii_bound, max_collision_potential,
    occupation_exponential, pair_walk, simulate_walk, tilted_weight, TiltedLaw,
};
use rwre_boundary::Error;

const BUDGET: u128 = DEFAULT_BUDGET_BYTES;

fn law(d: usize, theta: &[f64]) -> TiltedLaw<f64> {
    let alpha = if d == 4 { common::skewed_spec(0.0).alpha } else { JumpLaw::uniform(d).unwrap() };
    TiltedLaw::new(&alpha, &Face::positive(d).unwrap(), theta)
}

#[test]
fn green_terms_match_convolution() {
    for (d, theta, jmax) in [
        (3, vec![0.4, -0.2], 24),
        (4, vec![0.0, 0.0, 0.0], 24),
        (4, vec![0.7, -0.3, 0.2], 24),
        (5, vec![0.1, 0.2, -0.3, 0.0], 10),
    ] {
        let l = law(d, &theta);
        let want = common::convolution_return_probs(&l.weights, jmax);
        let got = green_terms(&l, jmax, BUDGET).unwrap();
        let (_, at_zero) = pair_walk(&l.weights, jmax, |_, _| 1.0, BUDGET).unwrap();
        for j in 0..=jmax {
            assert!((got[j] - want[j]).abs() <= 1e-14, "d={d} j={j}: {} vs {}", got[j], want[j]);
            assert!((at_zero[j] - want[j]).abs() <= 1e-14);
        }
    }
}

#[test]
fn green_sums_increase_and_stay_below_fourier() {
    for theta in [[0.0, 0.0, 0.0], [0.5, 0.5, -0.5], [-1.0, 0.2, 0.6]] {
        let l = law(4, &theta);
        let g = green_function(&l, 2000, BUDGET).unwrap();
        assert!(!g.divergent);
        assert!(g.terms.iter().all(|&t| t > 0.0 && t <= 1.0));
        let fb = fourier_bound(&l, 1.0, 32, None).unwrap();
        assert!(fb.rigorous);
        assert!(fb.bound >= g.partial_sum + g.tail_estimate, "{} vs {}", fb.bound, g.partial_sum);
        // Decay like j^{-3/2} in projected dimension 3.
        assert!((g.tail_exponent - 1.5).abs() < 0.05, "exponent {}", g.tail_exponent);
    }
}

#[test]
fn low_dimensions_are_recurrent() {
    for d in [2, 3] {
        let l = law(d, &vec![0.0; d - 1]);
        let g = green_function(&l, 500, BUDGET).unwrap();
        assert!(g.divergent);
        let fb = fourier_bound(&l, 0.5, 16, None).unwrap();
        assert!(fb.bound.is_infinite());
    }
}

proptest! {
    /// The certified minorant holds on the inner ball.
    #[test]
    fn inner_minorant_holds(theta in prop::collection::vec(-1.0f64..1.0, 3), dir in prop::collection::vec(-1.0f64..1.0, 3), s in 0.0f64..1.0) {
        let l = law(4, &theta);
        let fb = fourier_bound(&l, 1.0, 8, None).unwrap();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-6);
        let r = s * fb.inner_radius;
        let xi: Vec<f64> = dir.iter().map(|v| v / norm * r).collect();
        prop_assert!(1.0 - chi(&l.weights, &xi) >= fb.c0 * r * r - 1e-15);
    }

    /// chi is a squared characteristic function: in [0, 1] and 1 at the origin.
    #[test]
    fn chi_range(theta in prop::collection::vec(-1.0f64..1.0, 3), xi in prop::collection::vec(-3.0f64..3.0, 3)) {
        let l = law(4, &theta);
        let c = chi(&l.weights, &xi);
        prop_assert!((-1e-15..=1.0 + 1e-15).contains(&c));
        prop_assert!((chi(&l.weights, &[0.0; 3]) - 1.0).abs() <= 1e-15);
    }
}

#[test]
fn fourier_bound_is_monotone_in_c0() {
    let l = law(4, &[0.2, -0.1, 0.3]);
    let base = fourier_bound(&l, 1.0, 16, None).unwrap();
    let smaller = fourier_bound(&l, 1.0, 16, Some(base.c0 / 2.0)).unwrap();
    assert!(smaller.bound > base.bound && smaller.rigorous);
    let larger = fourier_bound(&l, 1.0, 16, Some(base.c0 * 2.0)).unwrap();
    assert!(larger.bound < base.bound && !larger.rigorous);
    assert!(matches!(fourier_bound(&l, 3.0, 16, None), Err(Error::Invalid(_))));
    let (mean, cov) = difference_moments(&l);
    assert!(mean.iter().all(|m| m.abs() <= 1e-15));
    assert!((0..3).all(|i| cov[i][i] > 0.0));
}

#[test]
fn khasminskii_chain() {
    let spec = common::two_point_spec(4, 0.4);
    let face = Face::positive(4).unwrap();
    let l = TiltedLaw::new(&spec.alpha, &face, &[0.0, 0.0, 0.0]);
    let g = green_function(&l, 4000, BUDGET).unwrap();
    let v = max_collision_potential(&spec, &face);
    assert!(v > 0.0);
    let bound = khasminskii_bound(v, g.partial_sum).unwrap();
    let mut prev = 1.0;
    for n in [0, 1, 5, 10, 20, 30] {
        let occ = occupation_exponential(&l, v, n, BUDGET).unwrap();
        assert!(occ >= prev - 1e-15 && occ <= bound, "n={n}: {occ} vs {bound}");
        prev = occ;
    }
    assert!(matches!(khasminskii_bound(2.0, 0.5), Err(Error::BoundInapplicable { .. })));
    assert_eq!(khasminskii_bound(0.0, 3.0).unwrap(), 1.0);
}

#[test]
fn pair_walk_respects_budget() {
    let l = law(4, &[0.0; 3]);
    assert!(matches!(pair_walk(&l.weights, 200, |_, _| 1.0, 1 << 20), Err(Error::ResourceLimit { .. })));
}

#[test]
fn face_event_frequency() {
    // Averaged over environments, every face path keeps probability prod alpha, so P(B_8) = 2^{-8}.
    let spec = common::two_point_spec(4, 0.6);
    let face = Face::new(vec![1, -1, 1, 1]).unwrap();
    let m = 400_000u64;
    let hits = (0..m)
        .filter(|&r| {
            let env = SeededEnvironment::new(&spec, task_seed(1, r));
            simulate_walk(&env, &face, 8, task_seed(2, r)).in_face
        })
        .count() as f64;
    let p = 1.0 / 256.0;
    let se = (p * (1.0 - p) / m as f64).sqrt();
    assert!((hits / m as f64 - p).abs() <= 4.0 * se, "{} vs {p}", hits / m as f64);
}

#[test]
fn tilted_weights_average_to_one() {
    let spec = common::two_point_spec(3, 0.5);
    let face = Face::positive(3).unwrap();
    let theta = [0.4, -0.3];
    let m = 200_000u64;
    let ws: Vec<f64> = (0..m)
        .map(|r| {
            let env = SeededEnvironment::new(&spec, task_seed(3, r));
            let t = simulate_walk(&env, &face, 6, task_seed(4, r));
            assert_eq!(t.path.len(), 7);
            if let Some(p) = &t.projected_end {
                let c = face.counts_of_site(t.path.last().unwrap()).unwrap();
                assert_eq!(p, &vec![c[0] as i64 - c[2] as i64, c[1] as i64 - c[2] as i64]);
            }
            tilted_weight(&t, &spec.alpha, &face, &theta)
        })
        .collect();
    let mean = ws.iter().sum::<f64>() / m as f64;
    let var = ws.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0);
    let se = (var / m as f64).sqrt();
    assert!((mean - 1.0).abs() <= 4.0 * se, "{mean} (se {se})");
}
