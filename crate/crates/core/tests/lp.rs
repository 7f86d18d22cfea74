mod common;

use boundprop::lp::{build_constraints, solve_lp, Constraint, LpProblem, LpStatus, Sense};
use boundprop::{BoundEntry, BoundsStore};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_lp, vertex_optimum};

fn problem(c: &[f64], rows: &[(Vec<f64>, f64)], sense: Sense) -> LpProblem {
    LpProblem {
        num_vars: c.len(),
        objective: c.to_vec(),
        rows: rows
            .iter()
            .map(|(a, b)| Constraint {
                coeffs: a.clone(),
                rhs: *b,
            })
            .collect(),
        sense,
    }
}

/// Store with a random subset of the nonempty subsets of `sep` bounded by
/// intervals around a random distribution (so the LP stays feasible).
fn random_store(rng: &mut ChaCha8Rng, cards: &[usize], sep: &[usize]) -> BoundsStore {
    let mut store = BoundsStore::new();
    for mask in 1u32..(1 << sep.len()) {
        if !rng.gen_bool(0.6) {
            continue;
        }
        let set: Vec<usize> = sep.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, &v)| v).collect();
        let states: usize = set.iter().map(|&v| cards[v]).product();
        let mut p: Vec<f64> = (0..states).map(|_| rng.gen::<f64>()).collect();
        let z: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= z);
        let lower = p.iter().map(|x| (x - rng.gen::<f64>() * 0.2).max(0.0)).collect();
        let upper = p.iter().map(|x| (x + rng.gen::<f64>() * 0.2).min(1.0)).collect();
        store.insert(
            set,
            BoundEntry {
                lower,
                upper,
                last_gap: 0.0,
            },
        );
    }
    // an entry outside the separator must not contribute rows
    store.insert(vec![99], BoundEntry::trivial(2));
    store
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn simplex_matches_vertex_enumeration(seed in any::<u64>(), maximize: bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, rows) = random_lp(&mut rng);
        let sense = if maximize { Sense::Maximize } else { Sense::Minimize };
        let sol = solve_lp(&problem(&c, &rows, sense)).unwrap();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        let want = vertex_optimum(&c, &rows, maximize).unwrap();
        prop_assert!((sol.value - want).abs() <= 1e-8, "{} vs {}", sol.value, want);
        // the returned point is feasible and attains the value
        prop_assert!(sol.point.iter().all(|&x| x >= -1e-12));
        for (a, b) in &rows {
            let ax: f64 = a.iter().zip(&sol.point).map(|(p, q)| p * q).sum();
            prop_assert!(ax <= b + 1e-8);
        }
        let cx: f64 = c.iter().zip(&sol.point).map(|(p, q)| p * q).sum();
        prop_assert!((cx - sol.value).abs() <= 1e-9);
    }

    #[test]
    fn optimum_ignores_row_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, mut rows) = random_lp(&mut rng);
        let before = solve_lp(&problem(&c, &rows, Sense::Maximize)).unwrap().value;
        for i in (1..rows.len()).rev() {
            rows.swap(i, rng.gen_range(0..=i));
        }
        let after = solve_lp(&problem(&c, &rows, Sense::Maximize)).unwrap().value;
        prop_assert!((before - after).abs() <= 1e-9);
    }

    #[test]
    fn normalization_only_gives_column_extremes(c in prop::collection::vec(-5.0f64..5.0, 1..12)) {
        let cs = build_constraints(&vec![2; 8], &[], &BoundsStore::new(), &[], usize::MAX);
        prop_assert_eq!(cs.rows.len(), 2);
        let n = c.len();
        let rows = vec![(vec![1.0; n], 1.0), (vec![-1.0; n], -1.0)];
        let max = solve_lp(&problem(&c, &rows, Sense::Maximize)).unwrap().value;
        let min = solve_lp(&problem(&c, &rows, Sense::Minimize)).unwrap().value;
        prop_assert_eq!(max, c.iter().cloned().fold(f64::MIN, f64::max));
        prop_assert_eq!(min, c.iter().cloned().fold(f64::MAX, f64::min));
    }

    #[test]
    fn row_count_formula(seed in any::<u64>(), sep_len in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cards: Vec<usize> = (0..100).map(|_| rng.gen_range(2..4)).collect();
        let mut sep: Vec<usize> = (0..sep_len).map(|i| 10 * i + rng.gen_range(0..10)).collect();
        sep.sort_unstable();
        let store = random_store(&mut rng, &cards, &sep);
        let cols: usize = sep.iter().map(|&v| cards[v]).product();
        let dead: Vec<usize> = (0..cols).filter(|_| rng.gen_bool(0.1)).collect();
        let cs = build_constraints(&cards, &sep, &store, &dead, usize::MAX);
        let bound_rows: usize = store
            .iter()
            .filter(|(s, _)| s.iter().all(|v| sep.contains(v)))
            .map(|(_, e)| 2 * e.num_states())
            .sum();
        prop_assert_eq!(cs.rows_before_drop, 2 + bound_rows + dead.len());
        prop_assert_eq!(cs.rows.len(), cs.rows_before_drop);
        prop_assert_eq!(cs.num_vars, cols);

        // dropping keeps normalization and dead rows, loses bound rows only
        let cap = 2 + dead.len() + bound_rows / 2;
        let dropped = build_constraints(&cards, &sep, &store, &dead, cap);
        prop_assert_eq!(dropped.rows_before_drop, cs.rows_before_drop);
        prop_assert_eq!(dropped.rows.len(), cap.min(cs.rows.len()));
        prop_assert_eq!(&dropped.rows[..2], &cs.rows[..2]);
        for r in &cs.rows[cs.rows.len() - dead.len()..] {
            prop_assert!(dropped.rows.contains(r));
        }
        // fewer rows can only loosen the bound
        let c: Vec<f64> = (0..cols).map(|_| rng.gen::<f64>()).collect();
        let full = solve_lp(&cs.with_objective(c.clone(), Sense::Maximize)).unwrap();
        let loose = solve_lp(&dropped.with_objective(c, Sense::Maximize)).unwrap();
        if full.status == LpStatus::Optimal {
            prop_assert!(loose.value >= full.value - 1e-9);
        }
    }
}

#[test]
fn identity_rows_for_full_separator_bound() {
    let mut store = BoundsStore::new();
    store.insert(
        vec![0, 1],
        BoundEntry {
            lower: vec![0.1; 4],
            upper: vec![0.4; 4],
            last_gap: 1.2,
        },
    );
    let cs = build_constraints(&[2, 2], &[0, 1], &store, &[], usize::MAX);
    assert_eq!(cs.rows.len(), 10);
    for (k, pair) in cs.rows[2..].chunks(2).enumerate() {
        let mut unit = vec![0.0; 4];
        unit[k] = 1.0;
        assert_eq!(pair[0].coeffs, unit);
        assert_eq!(pair[0].rhs, 0.4);
        assert_eq!(pair[1].coeffs, unit.iter().map(|x| -x).collect::<Vec<_>>());
        assert_eq!(pair[1].rhs, -0.1);
    }
}

#[test]
fn tiny_conflict_is_absorbed_large_is_infeasible() {
    let c = [1.0, 0.0];
    // x1 <= 0.3 and x1 >= 0.3 + eps
    for (eps, ok) in [(5e-9, true), (1e-3, false)] {
        let rows = vec![
            (vec![1.0, 1.0], 1.0),
            (vec![-1.0, -1.0], -1.0),
            (vec![1.0, 0.0], 0.3),
            (vec![-1.0, 0.0], -0.3 - eps),
        ];
        let sol = solve_lp(&problem(&c, &rows, Sense::Maximize)).unwrap();
        assert_eq!(sol.status == LpStatus::Optimal, ok, "eps {eps}");
        if ok {
            assert!(sol.relaxation > 0.0 && sol.relaxation <= 1e-7);
        } else {
            assert!(sol.relaxation > 1e-7);
        }
    }
}
