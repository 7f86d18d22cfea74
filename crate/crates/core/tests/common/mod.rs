// Test-side reference implementations. Nothing here calls into the library
// beyond reading a network's structure, so agreement is a real cross-check.
#![allow(dead_code)]

use boundprop::{Factor, Network, VarSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Binary network with `n` variables: one unary factor per variable plus
/// `extra` random factors of scope size 2..=max_scope, uniform(0,1) tables.
pub fn random_network(seed: u64, n: usize, extra: usize, max_scope: usize) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut factors = Vec::new();
    for v in 0..n {
        factors.push(Factor::new(vec![v], vec![rng.gen(), rng.gen()]));
    }
    for _ in 0..extra {
        let k = rng.gen_range(2..=max_scope.min(n));
        let mut scope: Vec<usize> = Vec::new();
        while scope.len() < k {
            let v = rng.gen_range(0..n);
            if !scope.contains(&v) {
                scope.push(v);
            }
        }
        let table = (0..1 << k).map(|_| rng.gen::<f64>()).collect();
        factors.push(Factor::new(scope, table));
    }
    Network::new(vec![2; n], factors).unwrap()
}

/// Like `random_network` but with roughly `zero_frac` of the entries of
/// multi-variable factors set to zero, so some conditionals have dead
/// columns. A random witness assignment keeps its entries, so Z > 0.
pub fn sparse_network(seed: u64, n: usize, extra: usize, zero_frac: f64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let witness: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
    let base = random_network(seed, n, extra, 3);
    let factors = base
        .factors()
        .iter()
        .map(|f| {
            let mut t = f.table().to_vec();
            if f.scope().len() > 1 {
                let keep = f.scope().iter().fold(0, |i, &v| 2 * i + witness[v]);
                for (i, x) in t.iter_mut().enumerate() {
                    if i != keep && rng.gen::<f64>() < zero_frac {
                        *x = 0.0;
                    }
                }
            }
            Factor::new(f.scope().to_vec(), t)
        })
        .collect();
    Network::new(vec![2; n], factors).unwrap()
}

/// Unnormalized weight of a full assignment, last scope variable fastest.
pub fn weight(net: &Network, states: &[usize]) -> f64 {
    let cards = net.cardinalities();
    net.factors()
        .iter()
        .map(|f| {
            let idx = f.scope().iter().fold(0, |i, &v| i * cards[v] + states[v]);
            f.table()[idx]
        })
        .product()
}

/// Visits every full assignment consistent with `clamp` (var, state) pairs.
pub fn for_each_state(net: &Network, clamp: &[(usize, usize)], mut visit: impl FnMut(&[usize], f64)) {
    let cards = net.cardinalities();
    let n = cards.len();
    let mut states = vec![0usize; n];
    for &(v, s) in clamp {
        states[v] = s;
    }
    let free: Vec<usize> = (0..n).filter(|v| !clamp.iter().any(|c| c.0 == *v)).collect();
    loop {
        visit(&states, weight(net, &states));
        let mut k = free.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            let v = free[k];
            states[v] += 1;
            if states[v] < cards[v] {
                break;
            }
            states[v] = 0;
        }
    }
}

fn set_index(cards: &[usize], set: &[usize], states: &[usize]) -> usize {
    set.iter().fold(0, |i, &v| i * cards[v] + states[v])
}

/// Exact marginals of every set in `sets`, conditioned on `clamp`.
pub fn brute_marginals(net: &Network, sets: &[VarSet], clamp: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let cards = net.cardinalities().to_vec();
    let mut acc: Vec<Vec<f64>> = sets
        .iter()
        .map(|s| vec![0.0; s.iter().map(|&v| cards[v]).product()])
        .collect();
    let mut z = 0.0;
    for_each_state(net, clamp, |states, w| {
        z += w;
        for (set, a) in sets.iter().zip(acc.iter_mut()) {
            a[set_index(&cards, set, states)] += w;
        }
    });
    for a in &mut acc {
        for x in a.iter_mut() {
            *x /= z;
        }
    }
    acc
}

/// Joint table over `vars` (unnormalized weights summed over everything else).
pub fn brute_joint(net: &Network, vars: &[usize]) -> Vec<f64> {
    let cards = net.cardinalities().to_vec();
    let mut acc = vec![0.0; vars.iter().map(|&v| cards[v]).product()];
    for_each_state(net, &[], |states, w| acc[set_index(&cards, vars, states)] += w);
    acc
}

/// Optimum of c.x over {x >= 0, A x <= b} by enumerating every basic
/// solution. `None` when no vertex is feasible.
pub fn vertex_optimum(c: &[f64], rows: &[(Vec<f64>, f64)], maximize: bool) -> Option<f64> {
    let n = c.len();
    let mut all: Vec<(Vec<f64>, f64)> = rows.to_vec();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        all.push((e, 0.0));
    }
    let mut best: Option<f64> = None;
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        let a: Vec<Vec<f64>> = pick.iter().map(|&k| all[k].0.clone()).collect();
        let b: Vec<f64> = pick.iter().map(|&k| all[k].1).collect();
        if let Some(x) = gauss(a, b) {
            let ok = all
                .iter()
                .all(|(r, h)| r.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= h + 1e-9);
            if ok {
                let v: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                best = Some(match best {
                    None => v,
                    Some(b) if maximize => b.max(v),
                    Some(b) => b.min(v),
                });
            }
        }
        // next n-subset of all.len()
        let m = all.len();
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < m - n + i {
                pick[i] += 1;
                for j in i + 1..n {
                    pick[j] = pick[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let mut p = col;
        for r in col + 1..n {
            if a[r][col].abs() > a[p][col].abs() {
                p = r;
            }
        }
        if a[p][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for k in col..n {
                    a[r][k] -= f * a[col][k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// A random LP that is feasible and bounded by construction: a hidden point
/// x0 >= 0 satisfies every row, and a cap row bounds the total mass. Some
/// rows are tight at x0 to provoke degenerate pivots.
pub fn random_lp(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<(Vec<f64>, f64)>) {
    let n = rng.gen_range(1..=6);
    let m = rng.gen_range(1..=12);
    let cap: f64 = rng.gen_range(0.5..3.0);
    let mut x0: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let s: f64 = x0.iter().sum();
    for x in &mut x0 {
        *x *= 0.9 * cap / s.max(1e-9);
    }
    let mut rows = vec![(vec![1.0; n], cap)];
    while rows.len() < m {
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ax: f64 = a.iter().zip(&x0).map(|(p, q)| p * q).sum();
        let slack = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..0.5) };
        rows.push((a, ax + slack));
    }
    let c = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (c, rows)
}
