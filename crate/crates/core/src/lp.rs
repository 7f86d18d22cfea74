//! Standard-form linear programs over separator distributions and a dense
//! two-phase primal simplex.
//!
//! Every problem has the form `max/min c·x` subject to `x >= 0` and
//! `A x <= b`, where the columns of `A` are joint separator states.

use crate::error::{Error, Result};
use crate::model::{decode_index, state_space};
use crate::store::BoundsStore;

/// Residual phase-1 infeasibility accepted by relaxing every right-hand side.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-7;
/// Phase-1 residual treated as exactly feasible.
const ZERO_RESIDUAL: f64 = 1e-10;
const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-11;
const DEGENERATE_STEP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub rows: Vec<Constraint>,
    pub sense: Sense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: f64,
    pub point: Vec<f64>,
    /// Amount added to every right-hand side to absorb rounding infeasibility;
    /// the unresolved phase-1 residual when infeasible.
    pub relaxation: f64,
}

/// The `(A, b)` part of a bounding LP, shared by all objectives of a cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    pub num_vars: usize,
    pub rows: Vec<Constraint>,
    /// Row count before any were dropped to honour `max_rows`.
    pub rows_before_drop: usize,
}

impl ConstraintSet {
    pub fn dropped(&self) -> usize {
        self.rows_before_drop - self.rows.len()
    }

    pub fn with_objective(&self, objective: Vec<f64>, sense: Sense) -> LpProblem {
        LpProblem {
            num_vars: self.num_vars,
            objective,
            rows: self.rows.clone(),
            sense,
        }
    }
}

/// Builds the constraint rows for a separator.
///
/// Row order: the normalization pair; then for every stored set inside `sep`
/// (by size, then lexicographic) and each of its joint states an upper row
/// followed by a lower row; then `x_j <= 0` for each dead column. When more
/// than `max_rows` rows result, bound rows are dropped from the tail first;
/// the normalization pair is always kept.
pub fn build_constraints(
    cardinalities: &[usize],
    sep: &[usize],
    store: &BoundsStore,
    dead: &[usize],
    max_rows: usize,
) -> ConstraintSet {
    let num_vars = state_space(cardinalities, sep) as usize;
    let sep_states: Vec<Vec<usize>> = (0..num_vars).map(|j| decode_index(cardinalities, sep, j)).collect();

    let mut rows = vec![
        Constraint {
            coeffs: vec![1.0; num_vars],
            rhs: 1.0,
        },
        Constraint {
            coeffs: vec![-1.0; num_vars],
            rhs: -1.0,
        },
    ];
    let mut bound_rows = Vec::new();
    for (set, entry) in store.subsets_of(sep) {
        let positions: Vec<usize> = set.iter().map(|v| sep.binary_search(v).expect("subset")).collect();
        // projection of each separator state onto the stored set
        let projected: Vec<usize> = sep_states
            .iter()
            .map(|states| positions.iter().fold(0, |acc, &k| acc * cardinalities[sep[k]] + states[k]))
            .collect();
        for s in 0..entry.num_states() {
            let delta: Vec<f64> = projected.iter().map(|&p| if p == s { 1.0 } else { 0.0 }).collect();
            let negated = delta.iter().map(|d| -d).collect();
            bound_rows.push(Constraint {
                coeffs: delta,
                rhs: entry.upper[s],
            });
            bound_rows.push(Constraint {
                coeffs: negated,
                rhs: -entry.lower[s],
            });
        }
    }
    let dead_rows: Vec<Constraint> = dead
        .iter()
        .map(|&j| {
            let mut coeffs = vec![0.0; num_vars];
            coeffs[j] = 1.0;
            Constraint { coeffs, rhs: 0.0 }
        })
        .collect();

    let rows_before_drop = 2 + bound_rows.len() + dead_rows.len();
    let room = max_rows.max(2) - 2;
    let keep_dead = dead_rows.len().min(room);
    let keep_bounds = bound_rows.len().min(room - keep_dead);
    bound_rows.truncate(keep_bounds);
    rows.extend(bound_rows);
    rows.extend(dead_rows.into_iter().take(keep_dead));
    ConstraintSet {
        num_vars,
        rows,
        rows_before_drop,
    }
}

/// Solves a single problem from scratch.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution> {
    match FeasibleTableau::new(problem.num_vars, &problem.rows) {
        Ok(tableau) => tableau.optimize(&problem.objective, problem.sense),
        Err(Error::Infeasible { residual }) => Ok(LpSolution {
            status: LpStatus::Infeasible,
            value: f64::NAN,
            point: Vec::new(),
            relaxation: residual,
        }),
        Err(e) => Err(e),
    }
}

/// A phase-1 feasible basis, reusable for any number of objectives.
#[derive(Debug, Clone)]
pub struct FeasibleTableau {
    num_vars: usize,
    // structural + slack columns; artificials follow and are never re-entered
    num_cols: usize,
    width: usize,
    rows: usize,
    table: Vec<f64>,
    basis: Vec<usize>,
    relaxation: f64,
}

impl FeasibleTableau {
    /// Runs phase 1. Fails with [`Error::Infeasible`] when the residual
    /// infeasibility exceeds [`FEASIBILITY_TOLERANCE`].
    pub fn new(num_vars: usize, rows: &[Constraint]) -> Result<Self> {
        let residual = match Self::phase_one(num_vars, rows, 0.0)? {
            Ok(t) => return Ok(t),
            Err(residual) => residual,
        };
        if residual > FEASIBILITY_TOLERANCE {
            return Err(Error::Infeasible { residual });
        }
        Self::phase_one(num_vars, rows, residual)?.map_err(|residual| Error::Infeasible { residual })
    }

    fn phase_one(num_vars: usize, rows: &[Constraint], relax: f64) -> Result<std::result::Result<Self, f64>> {
        let m = rows.len();
        let num_cols = num_vars + m;
        let flipped: Vec<bool> = rows.iter().map(|r| r.rhs + relax < 0.0).collect();
        let num_art = flipped.iter().filter(|&&f| f).count();
        let width = num_cols + num_art + 1;
        let mut table = vec![0.0; m * width];
        let mut basis = vec![0; m];
        let mut art = num_cols;
        for (i, row) in rows.iter().enumerate() {
            debug_assert_eq!(row.coeffs.len(), num_vars);
            let sign = if flipped[i] { -1.0 } else { 1.0 };
            let t = &mut table[i * width..(i + 1) * width];
            for (j, &a) in row.coeffs.iter().enumerate() {
                t[j] = sign * a;
            }
            t[num_vars + i] = sign;
            t[width - 1] = sign * (row.rhs + relax);
            if flipped[i] {
                t[art] = 1.0;
                basis[i] = art;
                art += 1;
            } else {
                basis[i] = num_vars + i;
            }
        }
        let mut tab = Self {
            num_vars,
            num_cols,
            width,
            rows: m,
            table,
            basis,
            relaxation: relax,
        };
        if num_art == 0 {
            return Ok(Ok(tab));
        }
        // maximize -sum(artificials)
        let mut cost = vec![0.0; width - 1];
        cost[num_cols..].iter_mut().for_each(|c| *c = -1.0);
        let mut z = tab.reduced_costs(&cost);
        match tab.iterate(&mut z, width - 1)? {
            Pivoting::Optimal => {}
            Pivoting::Unbounded => unreachable!("phase 1 objective is bounded by zero"),
        }
        let residual = z[width - 1];
        if residual > ZERO_RESIDUAL {
            return Ok(Err(residual));
        }
        tab.expel_artificials();
        Ok(Ok(tab))
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.table[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.table[i * self.width + self.width - 1]
    }

    /// Reduced-cost row for `max cost·x` under the current basis; the last
    /// slot holds minus the objective value.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.width];
        z[..cost.len()].copy_from_slice(cost);
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost.get(b).copied().unwrap_or(0.0);
            if cb != 0.0 {
                let row = &self.table[i * self.width..(i + 1) * self.width];
                for (zj, &a) in z.iter_mut().zip(row) {
                    *zj -= cb * a;
                }
            }
        }
        z
    }

    fn pivot(&mut self, z: &mut [f64], p: usize, q: usize) {
        let w = self.width;
        let piv = self.table[p * w + q];
        for a in &mut self.table[p * w..(p + 1) * w] {
            *a /= piv;
        }
        let prow: Vec<f64> = self.table[p * w..(p + 1) * w].to_vec();
        for i in 0..self.rows {
            if i == p {
                continue;
            }
            let f = self.table[i * w + q];
            if f != 0.0 {
                for (a, &b) in self.table[i * w..(i + 1) * w].iter_mut().zip(&prow) {
                    *a -= f * b;
                }
                self.table[i * w + q] = 0.0;
            }
        }
        let f = z[q];
        if f != 0.0 {
            for (a, &b) in z.iter_mut().zip(&prow) {
                *a -= f * b;
            }
            z[q] = 0.0;
        }
        self.basis[p] = q;
    }

    /// Primal simplex over columns `< allowed`. Dantzig pricing with
    /// lowest-index ties; Bland's rule once degenerate pivots pile up.
    fn iterate(&mut self, z: &mut [f64], allowed: usize) -> Result<Pivoting> {
        let degenerate_limit = 2 * (self.rows + allowed);
        let max_pivots = 50 * (self.rows + allowed) + 1000;
        let mut degenerate = 0usize;
        let mut bland = false;
        for _ in 0..max_pivots {
            let entering = if bland {
                (0..allowed).find(|&j| z[j] > COST_EPS)
            } else {
                let mut best = None;
                let mut best_cost = COST_EPS;
                for (j, &c) in z[..allowed].iter().enumerate() {
                    if c > best_cost {
                        best_cost = c;
                        best = Some(j);
                    }
                }
                best
            };
            let Some(q) = entering else {
                return Ok(Pivoting::Optimal);
            };
            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, q);
                if a > PIVOT_EPS {
                    let ratio = self.rhs(i).max(0.0) / a;
                    let better = match leaving {
                        None => true,
                        Some((l, r)) => ratio < r - 1e-14 || (ratio <= r + 1e-14 && self.basis[i] < self.basis[l]),
                    };
                    if better {
                        leaving = Some((i, ratio));
                    }
                }
            }
            let Some((p, step)) = leaving else {
                return Ok(Pivoting::Unbounded);
            };
            if step <= DEGENERATE_STEP {
                degenerate += 1;
                if degenerate > degenerate_limit {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            self.pivot(z, p, q);
        }
        Err(Error::IterationLimit(max_pivots))
    }

    /// Pivots zero-level artificials out of the basis where possible.
    fn expel_artificials(&mut self) {
        let mut dummy = vec![0.0; self.width];
        for i in 0..self.rows {
            if self.basis[i] < self.num_cols {
                continue;
            }
            self.table[i * self.width + self.width - 1] = 0.0;
            let best = (0..self.num_cols)
                .map(|j| (j, self.at(i, j).abs()))
                .filter(|&(_, a)| a > 1e-9)
                .max_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((q, _)) = best {
                self.pivot(&mut dummy, i, q);
            }
        }
    }

    /// Phase 2 for one objective; the tableau itself is left untouched.
    pub fn optimize(&self, objective: &[f64], sense: Sense) -> Result<LpSolution> {
        let mut tab = self.clone();
        let sign = match sense {
            Sense::Maximize => 1.0,
            Sense::Minimize => -1.0,
        };
        let mut cost = vec![0.0; self.num_cols];
        for (c, &o) in cost.iter_mut().zip(objective) {
            *c = sign * o;
        }
        let mut z = tab.reduced_costs(&cost);
        if let Pivoting::Unbounded = tab.iterate(&mut z, self.num_cols)? {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                value: sign * f64::INFINITY,
                point: Vec::new(),
                relaxation: self.relaxation,
            });
        }
        let mut point = vec![0.0; self.num_vars];
        for (i, &b) in tab.basis.iter().enumerate() {
            if b < self.num_vars {
                point[b] = tab.rhs(i).max(0.0);
            }
        }
        let value = objective.iter().zip(&point).map(|(c, x)| c * x).sum();
        Ok(LpSolution {
            status: LpStatus::Optimal,
            value,
            point,
            relaxation: self.relaxation,
        })
    }

    pub fn relaxation(&self) -> f64 {
        self.relaxation
    }
}

enum Pivoting {
    Optimal,
    Unbounded,
}
