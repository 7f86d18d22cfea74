//! Seeded generators for spin rings, Ising grids and bi-partite networks.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64`, so a given
//! seed reproduces the same network on every run of this implementation.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Evidence, Factor, Network};

/// Coupling and field along a ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RingProfile {
    Constant { w: f64, theta: f64 },
    /// Smooth periodic profiles: w sweeps [-2, 2] once, θ sweeps [-1, 1] twice.
    Fig3Like,
}

impl RingProfile {
    pub fn weight(&self, i: usize, n: usize) -> f64 {
        match *self {
            RingProfile::Constant { w, .. } => w,
            RingProfile::Fig3Like => 2.0 * (2.0 * PI * i as f64 / n as f64).sin(),
        }
    }

    pub fn threshold(&self, i: usize, n: usize) -> f64 {
        match *self {
            RingProfile::Constant { theta, .. } => theta,
            RingProfile::Fig3Like => (4.0 * PI * i as f64 / n as f64 + 0.5).cos(),
        }
    }
}

/// Boltzmann ring with spins encoded as state 0 = -1, state 1 = +1.
///
/// Emits the `n` pairwise factors exp(w(i) s_i s_{i+1}) first, then the `n`
/// unary factors exp(θ(i) s_i).
pub fn gen_ring(n: usize, profile: RingProfile) -> Result<Network> {
    if n < 3 {
        return Err(Error::Generator(format!("ring needs at least 3 nodes, got {n}")));
    }
    let mut factors = Vec::with_capacity(2 * n);
    for i in 0..n {
        let w = profile.weight(i, n);
        let (a, b) = (i, (i + 1) % n);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        factors.push(Factor::new(vec![lo, hi], vec![w.exp(), (-w).exp(), (-w).exp(), w.exp()]));
    }
    for i in 0..n {
        let t = profile.threshold(i, n);
        factors.push(Factor::new(vec![i], vec![(-t).exp(), t.exp()]));
    }
    Network::new(vec![2; n], factors)
}

/// Binary grid with one 2x2 uniform(0, 1) table per lattice edge.
///
/// Variable `(r, c)` has index `r * cols + c`. Horizontal edges are drawn
/// first in row-major order, then vertical edges.
pub fn gen_ising_grid(rows: usize, cols: usize, seed: u64) -> Result<Network> {
    if rows < 2 || cols < 2 {
        return Err(Error::Generator(format!("grid needs at least 2x2, got {rows}x{cols}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut factors = Vec::new();
    let mut edge = |a: usize, b: usize, rng: &mut ChaCha8Rng| {
        let table = (0..4).map(|_| rng.gen::<f64>()).collect();
        factors.push(Factor::new(vec![a, b], table));
    };
    for r in 0..rows {
        for c in 0..cols - 1 {
            edge(r * cols + c, r * cols + c + 1, &mut rng);
        }
    }
    for r in 0..rows - 1 {
        for c in 0..cols {
            edge(r * cols + c, (r + 1) * cols + c, &mut rng);
        }
    }
    Network::new(vec![2; rows * cols], factors)
}

const MAX_WIRING_ATTEMPTS: usize = 1000;

/// Two-layer directed network: parents `0..n`, children `n..2n`.
///
/// Every child has three distinct parents and every parent three children,
/// wired by a seeded configuration model. Parent priors and child CPTs hold
/// uniform(0, 1) draws normalized per parent configuration. Child `j` is
/// clamped to state 0 whenever `j % evidence_every == 0` (0 disables).
pub fn gen_bipartite(n: usize, seed: u64, evidence_every: usize) -> Result<(Network, Evidence)> {
    if n < 3 {
        return Err(Error::Generator(format!("bi-partite network needs n >= 3, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parents_of = wire(n, &mut rng).ok_or_else(|| {
        Error::Generator(format!(
            "no simple 3-regular wiring after {MAX_WIRING_ATTEMPTS} attempts (seed {seed})"
        ))
    })?;

    let mut factors = Vec::with_capacity(2 * n);
    for p in 0..n {
        factors.push(Factor::new(vec![p], normalized_pairs(1, &mut rng)));
    }
    for (j, parents) in parents_of.iter().enumerate() {
        let mut scope = parents.clone();
        scope.push(n + j);
        factors.push(Factor::new(scope, normalized_pairs(8, &mut rng)));
    }
    let net = Network::new(vec![2; 2 * n], factors)?;
    let mut evidence = Evidence::new();
    if evidence_every > 0 {
        for j in (0..n).step_by(evidence_every) {
            evidence.observe(n + j, 0)?;
        }
    }
    Ok((net, evidence))
}

fn normalized_pairs(count: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * count);
    for _ in 0..count {
        let a: f64 = rng.gen();
        let b: f64 = rng.gen();
        out.push(a / (a + b));
        out.push(b / (a + b));
    }
    out
}

/// Sorted parent lists per child, or `None` if every attempt had a multi-edge.
fn wire(n: usize, rng: &mut ChaCha8Rng) -> Option<Vec<Vec<usize>>> {
    let mut stubs: Vec<usize> = (0..n).flat_map(|p| [p; 3]).collect();
    for _ in 0..MAX_WIRING_ATTEMPTS {
        stubs.shuffle(rng);
        let parents: Vec<Vec<usize>> = stubs
            .chunks(3)
            .map(|c| {
                let mut v = c.to_vec();
                v.sort_unstable();
                v
            })
            .collect();
        if parents.iter().all(|p| p[0] != p[1] && p[1] != p[2]) {
            return Some(parents);
        }
    }
    None
}
