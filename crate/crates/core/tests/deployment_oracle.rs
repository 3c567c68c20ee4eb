use proptest::prelude::*;

use aeromec::deployment::{deploy_with_weights, wkd_deploy, WkdConfig};
use aeromec::scenario::{generate_scenario, GenConfig, Scenario};

mod common;

/// Best weighted squared-distance cost over every split of the users into two
/// non-empty groups, each served from its weighted centroid.
fn best_two_split(s: &Scenario, w: &[f64]) -> f64 {
    let m = s.num_users();
    let h = s.uavs[0].altitude;
    let mut best = f64::INFINITY;
    for mask in 1..(1u32 << m) - 1 {
        let mut cost = 0.0;
        for side in [true, false] {
            let members: Vec<usize> = (0..m).filter(|&i| (mask >> i & 1 == 1) == side).collect();
            let sw: f64 = members.iter().map(|&i| w[i]).sum();
            let cx = members.iter().map(|&i| w[i] * s.users[i].position[0]).sum::<f64>() / sw;
            let cy = members.iter().map(|&i| w[i] * s.users[i].position[1]).sum::<f64>() / sw;
            cost += members
                .iter()
                .map(|&i| {
                    let p = s.users[i].position;
                    w[i] * ((p[0] - cx).powi(2) + (p[1] - cy).powi(2) + h * h)
                })
                .sum::<f64>();
        }
        best = best.min(cost);
    }
    best
}

#[test]
fn two_uavs_reach_the_brute_force_optimum() {
    let mut hits = 0;
    for seed in 0..30 {
        let s = generate_scenario(9, 2, seed, &GenConfig::default()).unwrap();
        let cfg = WkdConfig {
            seed,
            restarts: 8,
            ..Default::default()
        };
        let d = wkd_deploy(&s, &cfg).unwrap();
        let opt = best_two_split(&s, &d.weights);
        assert!(d.weighted_cost >= opt * (1.0 - 1e-9), "below the global optimum");
        if d.weighted_cost <= opt * (1.0 + 1e-9) {
            hits += 1;
        }
    }
    assert!(hits >= 27, "optimum found on {hits}/30 instances");
}

#[test]
fn uniform_weights_match_plain_kmeans() {
    for seed in 0..20 {
        let s = generate_scenario(25, 5, seed, &GenConfig::default()).unwrap();
        let cfg = WkdConfig {
            seed: seed * 7,
            ..Default::default()
        };
        let d = deploy_with_weights(&s, &vec![1.0; 25], &cfg).unwrap();
        let (pos, conn) = common::kmeans(&s, &cfg);
        assert_eq!(d.positions, pos);
        assert_eq!(d.connection, conn);
    }
}

#[test]
fn final_state_is_a_lloyd_fixed_point() {
    let s = generate_scenario(30, 6, 42, &GenConfig::default()).unwrap();
    let d = wkd_deploy(&s, &WkdConfig::default()).unwrap();
    for (m, u) in s.users.iter().enumerate() {
        let serving = d.serving_uav(m).unwrap();
        let dist = |n: usize| {
            let c = d.positions[n];
            (u.position[0] - c[0]).powi(2) + (u.position[1] - c[1]).powi(2)
        };
        assert!((0..6).all(|n| dist(serving) <= dist(n) + 1e-9));
    }
}

#[test]
fn no_users_is_an_error() {
    let mut s = generate_scenario(3, 2, 0, &GenConfig::default()).unwrap();
    s.users.clear();
    s.tasks.clear();
    s.uncertainty.clear();
    assert!(wkd_deploy(&s, &WkdConfig::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cost_never_increases(seed in 0u64..10_000, m in 2usize..40, n in 1usize..7) {
        let s = generate_scenario(m, n, seed, &GenConfig::default()).unwrap();
        let d = wkd_deploy(&s, &WkdConfig { seed, ..Default::default() }).unwrap();
        prop_assert!(d.cost_trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        prop_assert!(d.iterations < 100);
        prop_assert!(d.is_valid());
        prop_assert!(d.positions.iter().all(|&p| s.bounds.contains(p)));
    }

    #[test]
    fn relabeling_users_changes_nothing(seed in 0u64..10_000, rot in 1usize..20) {
        let s = generate_scenario(20, 4, seed, &GenConfig::default()).unwrap();
        let mut t = s.clone();
        t.users.rotate_left(rot);
        t.tasks.rotate_left(rot);
        t.uncertainty.rotate_left(rot);
        let a = wkd_deploy(&s, &WkdConfig::default()).unwrap();
        let b = wkd_deploy(&t, &WkdConfig::default()).unwrap();
        prop_assert_eq!(&a.positions, &b.positions);
        prop_assert_eq!(a.weighted_cost, b.weighted_cost);
        for m in 0..20 {
            prop_assert_eq!(a.serving_uav((m + rot) % 20), b.serving_uav(m));
        }
    }
}
