mod common;

use boundprop::engine::{estimate_alpha, estimate_alpha_with_limit, IMPROVEMENT_EPS};
use boundprop::netgen::{gen_ring, RingProfile};
use boundprop::{propagate, BoundsStore, Factor, Network, PropagationConfig, Propagator, VarSet};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{brute_marginals, random_network, sparse_network};

fn assert_sandwich(net: &Network, store: &BoundsStore) -> Result<(), TestCaseError> {
    let sets: Vec<VarSet> = store.iter().map(|(s, _)| s.clone()).collect();
    let exact = brute_marginals(net, &sets, &[]);
    for (set, p) in sets.iter().zip(&exact) {
        let e = store.get(set).unwrap();
        for (s, &x) in p.iter().enumerate() {
            prop_assert!(
                e.lower[s] - 1e-9 <= x && x <= e.upper[s] + 1e-9,
                "{:?} state {}: {} not in [{}, {}]",
                set,
                s,
                x,
                e.lower[s],
                e.upper[s]
            );
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn every_sweep_is_sound_and_tightening(seed in 0u64..100_000, n in 3usize..11, sparse: bool, parallel: bool) {
        let net = if sparse { sparse_network(seed, n, n, 0.25) } else { random_network(seed, n, n + 2, 3) };
        let cfg = PropagationConfig { omega_schedule: vec![16, 64], parallel, max_sweeps: 30, ..PropagationConfig::default() };
        let mut prop = Propagator::new(&net, cfg).unwrap();
        for budget in [16u128, 64] {
            prop.begin_stage(budget).unwrap();
            for _ in 0..30 {
                let before = prop.store().clone();
                let stats = prop.sweep().unwrap();
                prop.store().check_invariants(1e-9).unwrap();
                assert_sandwich(&net, prop.store())?;
                for (set, old) in before.iter() {
                    let new = prop.store().get(set).unwrap();
                    for s in 0..old.num_states() {
                        prop_assert!(new.upper[s] <= old.upper[s] && new.lower[s] >= old.lower[s]);
                    }
                }
                if stats.converged {
                    break;
                }
            }
        }
    }

    #[test]
    fn any_cluster_order_is_sound(seed in 0u64..100_000, n in 4usize..11, shuffle_seed: u64) {
        let net = random_network(seed, n, n + 2, 3);
        let mut prop = Propagator::new(&net, PropagationConfig::with_omega(32)).unwrap();
        prop.begin_stage(32).unwrap();
        let mut order: Vec<usize> = (0..prop.plans().len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
        prop.reorder_plans(&order);
        prop.run_stage().unwrap();
        assert_sandwich(&net, prop.store())?;
    }
}

fn ring4() -> Network {
    let f = |a, b| Factor::new(vec![a, b], vec![2.0, 0.5, 0.5, 2.0]);
    let mut factors = vec![f(0, 1), f(1, 2), f(2, 3), f(0, 3)];
    factors.push(Factor::new(vec![0], vec![0.3, 0.7]));
    factors.push(Factor::new(vec![2], vec![0.6, 0.4]));
    Network::new(vec![2; 4], factors).unwrap()
}

#[test]
fn four_node_ring_two_sweeps() {
    let net = ring4();
    let mut prop = Propagator::new(&net, PropagationConfig::with_omega(8)).unwrap();
    prop.begin_stage(8).unwrap();
    prop.sweep().unwrap();
    let first = prop.store().clone();
    prop.sweep().unwrap();
    let second = prop.store().clone();
    let singles: Vec<VarSet> = (0..4).map(|v| vec![v]).collect();
    let exact = brute_marginals(&net, &singles, &[]);
    for (v, p) in exact.iter().enumerate() {
        let (a, b) = (first.get(&[v]).unwrap(), second.get(&[v]).unwrap());
        for s in 0..2 {
            assert!(b.lower[s] >= a.lower[s] && b.upper[s] <= a.upper[s]);
            assert!(a.lower[s] <= p[s] + 1e-12 && p[s] <= a.upper[s] + 1e-12);
            assert!(b.lower[s] <= p[s] + 1e-12 && p[s] <= b.upper[s] + 1e-12);
        }
    }
}

#[test]
fn independent_nodes_are_exact_in_one_sweep() {
    let net = Network::new(
        vec![2, 2],
        vec![Factor::new(vec![0], vec![1.0, 3.0]), Factor::new(vec![1], vec![2.0, 2.0])],
    )
    .unwrap();
    let (store, report) = propagate(&net, &PropagationConfig::default()).unwrap();
    assert_eq!(report.sweeps.len(), 1);
    assert!(report.converged);
    let e = store.get(&[0]).unwrap();
    assert_eq!(e.lower, vec![0.25, 0.75]);
    assert_eq!(e.upper, vec![0.25, 0.75]);
    assert_eq!(store.get(&[1]).unwrap().gap(), 0.0);
}

#[test]
fn uncoupled_ring_closes_every_gap() {
    for theta in [-1.0, 0.0, 0.4] {
        let net = gen_ring(10, RingProfile::Constant { w: 0.0, theta }).unwrap();
        let (store, _) = propagate(&net, &PropagationConfig::with_omega(8)).unwrap();
        for v in 0..10 {
            assert!(store.get(&[v]).unwrap().gap() < 1e-9);
        }
    }
}

#[test]
fn homogeneous_ring_single_nodes_agree() {
    for (w, theta) in [(0.5, 0.2), (-0.8, 0.3), (1.2, -0.4)] {
        let net = gen_ring(12, RingProfile::Constant { w, theta }).unwrap();
        for parallel in [false, true] {
            let cfg = PropagationConfig {
                convergence_threshold: 1e-12,
                max_sweeps: 50_000,
                parallel,
                ..PropagationConfig::with_omega(8)
            };
            let (store, report) = propagate(&net, &cfg).unwrap();
            assert!(report.converged);
            let first = store.get(&[0]).unwrap().clone();
            for v in 1..12 {
                let e = store.get(&[v]).unwrap();
                for s in 0..2 {
                    assert!((e.lower[s] - first.lower[s]).abs() < 1e-9, "w {w} node {v}");
                    assert!((e.upper[s] - first.upper[s]).abs() < 1e-9, "w {w} node {v}");
                }
            }
        }
    }
}

#[test]
fn warm_start_never_loosens() {
    let net = gen_ring(16, RingProfile::Fig3Like).unwrap();
    let (small, _) = propagate(&net, &PropagationConfig::with_omega(8)).unwrap();
    let cfg = PropagationConfig {
        omega_schedule: vec![8, 16, 32],
        ..PropagationConfig::default()
    };
    let (staged, report) = propagate(&net, &cfg).unwrap();
    assert_eq!(report.stages.len(), 3);
    for v in 0..16 {
        let (a, b) = (small.get(&[v]).unwrap(), staged.get(&[v]).unwrap());
        assert!(b.gap() <= a.gap() + 1e-12);
    }
}

#[test]
fn gap_history_is_recorded_per_entry() {
    let net = gen_ring(8, RingProfile::Constant { w: 0.7, theta: 0.1 }).unwrap();
    let (_, report) = propagate(&net, &PropagationConfig::with_omega(8)).unwrap();
    for gaps in report.gap_history.values() {
        assert_eq!(gaps.len(), report.sweeps.len() + 1);
        assert!(gaps.windows(2).all(|w| w[1] <= w[0]));
    }
    // converged: every still-open entry improved by under 1% in the last sweep
    for (set, &r) in &report.improvement_ratios {
        if *report.gap_history[set].last().unwrap() > IMPROVEMENT_EPS {
            assert!(r < 0.01);
        }
    }
    let alphas = estimate_alpha(&report);
    assert_eq!(alphas.len(), report.gap_history.len());
}

#[test]
fn alpha_of_exact_geometric_sequence() {
    let est = estimate_alpha_with_limit(&[1.0, 0.5, 0.25, 0.125, 0.0625], 0.0).unwrap();
    assert!((est.alpha - 0.5).abs() < 1e-12);
    assert!(est.reliable);
}

#[test]
fn alpha_undefined_when_converged_at_once() {
    let net = gen_ring(10, RingProfile::Constant { w: 0.0, theta: 0.5 }).unwrap();
    let (_, report) = propagate(&net, &PropagationConfig::with_omega(8)).unwrap();
    for est in estimate_alpha(&report).values() {
        assert!(est.is_err());
    }
}

#[test]
fn bad_configs_are_rejected() {
    let net = ring4();
    for cfg in [
        PropagationConfig {
            omega_schedule: vec![],
            ..PropagationConfig::default()
        },
        PropagationConfig {
            omega_schedule: vec![64, 16],
            ..PropagationConfig::default()
        },
        PropagationConfig {
            convergence_threshold: 0.0,
            ..PropagationConfig::default()
        },
        PropagationConfig {
            convergence_threshold: 1.5,
            ..PropagationConfig::default()
        },
    ] {
        assert!(propagate(&net, &cfg).is_err());
    }
}
