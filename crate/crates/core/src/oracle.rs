//! Ground truth: brute-force marginals and the scalar fixed point of bound
//! propagation on a homogeneous spin ring.
//!
//! Nothing here touches the simplex solver or the cluster machinery, so the
//! engine can be checked against it.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{increment, Network, VarSet};

/// Default ceiling on the number of joint states enumerated.
pub const DEFAULT_STATE_CAP: u128 = 1 << 24;

#[derive(Debug, Clone, Serialize)]
pub struct ExactMarginals {
    pub partition: f64,
    pub marginals: BTreeMap<VarSet, Vec<f64>>,
}

impl ExactMarginals {
    pub fn get(&self, set: &[usize]) -> Option<&[f64]> {
        self.marginals.get(set).map(Vec::as_slice)
    }
}

/// Enumerates every joint state and accumulates the requested marginals.
pub fn exact_marginals(net: &Network, sets: &[VarSet], cap: u128) -> Result<ExactMarginals> {
    let all: Vec<usize> = (0..net.num_vars()).collect();
    let size = net.state_space(&all);
    if size > cap {
        return Err(Error::StateSpaceExceeded { size, cap });
    }
    for set in sets {
        if let Some(&v) = set.iter().find(|&&v| v >= net.num_vars()) {
            return Err(Error::VariableOutOfRange {
                var: v,
                num_vars: net.num_vars(),
            });
        }
    }
    let cards = net.cardinalities();
    let mut acc: Vec<Vec<f64>> = sets.iter().map(|s| vec![0.0; net.state_space(s) as usize]).collect();
    let mut states = vec![0usize; net.num_vars()];
    let mut partition = 0.0;
    for _ in 0..size {
        let w = net.weight(&states);
        if w != 0.0 {
            partition += w;
            for (set, a) in sets.iter().zip(acc.iter_mut()) {
                let idx = set.iter().fold(0, |i, &v| i * cards[v] + states[v]);
                a[idx] += w;
            }
        }
        increment(&mut states, cards);
    }
    if partition <= 0.0 {
        return Err(Error::ZeroPartition);
    }
    let marginals = sets
        .iter()
        .cloned()
        .zip(acc.into_iter().map(|a| a.into_iter().map(|x| x / partition).collect()))
        .collect();
    Ok(ExactMarginals { partition, marginals })
}

/// Every single-variable set of `net`.
pub fn single_sets(net: &Network) -> Vec<VarSet> {
    (0..net.num_vars()).map(|v| vec![v]).collect()
}

/// Every unordered pair of variables.
pub fn pair_sets(net: &Network) -> Vec<VarSet> {
    let n = net.num_vars();
    (0..n).flat_map(|a| (a + 1..n).map(move |b| vec![a, b])).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct RingFixedPoint {
    pub w: f64,
    pub theta: f64,
    /// Bounds on the spin mean.
    pub mean_upper: f64,
    pub mean_lower: f64,
    /// Bounds on p(s = +1).
    pub p_upper: f64,
    pub p_lower: f64,
    pub alpha: f64,
    /// False when too few iterations were seen to measure a rate.
    pub alpha_reliable: bool,
    pub iterations: usize,
    /// Gap between the mean bounds after each iteration, starting from 2.
    pub gap_history: Vec<f64>,
}

impl RingFixedPoint {
    pub fn gap(&self) -> f64 {
        self.mean_upper - self.mean_lower
    }
}

/// p(s = +1 | neighbours a, b) for the ring conditional, spins in {-1, +1}.
fn spin_up_probability(w: f64, theta: f64, a: f64, b: f64) -> f64 {
    let field = theta + w * (a + b);
    1.0 / (1.0 + (-2.0 * field).exp())
}

/// Iterates the symmetric one-node bound map of a homogeneous ring from the
/// trivial bounds until the bounds move less than `tol`.
///
/// Each step solves the four-state LP over the two neighbours exactly by
/// enumerating the vertices of its feasible polytope.
pub fn ring_fixed_point(w: f64, theta: f64, tol: f64, max_iterations: usize) -> Result<RingFixedPoint> {
    if !w.is_finite() || !theta.is_finite() || !(tol > 0.0) {
        return Err(Error::Config(format!("invalid ring parameters w={w} theta={theta} tol={tol}")));
    }
    // joint neighbour states (a, b), state 0 = spin -1, last fastest
    let spins = [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)];
    let objective: Vec<f64> = spins.iter().map(|&(a, b)| spin_up_probability(w, theta, a, b)).collect();

    let (mut upper, mut lower) = (1.0f64, 0.0f64);
    let mut gaps = vec![2.0 * (upper - lower)];
    let mut last_change = f64::INFINITY;
    for iteration in 1..=max_iterations {
        let vertices = neighbour_polytope_vertices(lower, upper);
        let values = vertices.iter().map(|q| dot(&objective, q));
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let new_upper = hi.min(upper);
        let new_lower = lo.max(lower);
        last_change = (new_upper - upper).abs().max((new_lower - lower).abs());
        upper = new_upper;
        lower = new_lower;
        gaps.push(2.0 * (upper - lower));
        if last_change < tol {
            let (alpha, alpha_reliable) = rate_from_gaps(&gaps);
            return Ok(RingFixedPoint {
                w,
                theta,
                mean_upper: 2.0 * upper - 1.0,
                mean_lower: 2.0 * lower - 1.0,
                p_upper: upper,
                p_lower: lower,
                alpha,
                alpha_reliable,
                iterations: iteration,
                gap_history: gaps,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iterations,
        last_change,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Geometric mean of the last few successive gap-decrement ratios that sit
/// well above rounding noise.
fn rate_from_gaps(gaps: &[f64]) -> (f64, bool) {
    let steps: Vec<f64> = gaps.windows(2).map(|p| p[0] - p[1]).collect();
    let usable: Vec<f64> = steps
        .windows(2)
        .filter(|p| p[0] > 1e-9 && p[1] > 1e-11)
        .map(|p| p[1] / p[0])
        .collect();
    if usable.is_empty() {
        return (0.0, false);
    }
    let tail = &usable[usable.len().saturating_sub(3)..];
    let alpha = tail.iter().map(|r| r.ln()).sum::<f64>() / tail.len() as f64;
    (alpha.exp(), tail.len() >= 2)
}

/// Vertices of {q in R^4 : q >= 0, sum q = 1, lower <= q(a=+1) <= upper,
/// lower <= q(b=+1) <= upper} with q indexed by (a, b), last fastest.
fn neighbour_polytope_vertices(lower: f64, upper: f64) -> Vec<Vec<f64>> {
    let mut ineq: Vec<(Vec<f64>, f64)> = (0..4)
        .map(|k| {
            let mut g = vec![0.0; 4];
            g[k] = -1.0;
            (g, 0.0)
        })
        .collect();
    let a_up = vec![0.0, 0.0, 1.0, 1.0];
    let b_up = vec![0.0, 1.0, 0.0, 1.0];
    for g in [a_up, b_up] {
        ineq.push((g.clone(), upper));
        ineq.push((g.iter().map(|x| -x).collect(), -lower));
    }
    polytope_vertices(&[(vec![1.0; 4], 1.0)], &ineq, 1e-12)
}

/// Brute-force vertex enumeration of `{x : E x = e, G x <= g}`.
///
/// Tries every choice of `n - |E|` inequalities as active, solves the square
/// system and keeps feasible solutions. Exponential; meant for tiny problems.
pub fn polytope_vertices(eq: &[(Vec<f64>, f64)], ineq: &[(Vec<f64>, f64)], tol: f64) -> Vec<Vec<f64>> {
    let n = eq.first().or(ineq.first()).map_or(0, |r| r.0.len());
    let need = n.saturating_sub(eq.len());
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut choice: Vec<usize> = (0..need).collect();
    if need > ineq.len() {
        return out;
    }
    loop {
        let mut a: Vec<Vec<f64>> = eq.iter().map(|r| r.0.clone()).collect();
        let mut b: Vec<f64> = eq.iter().map(|r| r.1).collect();
        for &k in &choice {
            a.push(ineq[k].0.clone());
            b.push(ineq[k].1);
        }
        if let Some(x) = solve_square(a, b) {
            let feasible = eq.iter().all(|(r, e)| (dot(r, &x) - e).abs() <= tol * 10.0)
                && ineq.iter().all(|(r, g)| dot(r, &x) <= g + tol * 10.0);
            if feasible && !out.iter().any(|v| v.iter().zip(&x).all(|(p, q)| (p - q).abs() <= tol)) {
                out.push(x);
            }
        }
        // next combination
        let mut i = need;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if choice[i] < ineq.len() - need + i {
                choice[i] += 1;
                for j in i + 1..need {
                    choice[j] = choice[j - 1] + 1;
                }
                break;
            }
        }
        if need == 0 {
            return out;
        }
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}
