//! The propagation loop: repeatedly re-bound every marginal set from the
//! current bounds on its separator until no bound improves appreciably.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::clusters::{derive_marginal_sets, enumerate_clusters, ClusterSpec};
use crate::conditionals::{conditional_table, ConditionalTable};
use crate::error::{Error, Result};
use crate::lp::{build_constraints, FeasibleTableau, Sense};
use crate::model::{Network, VarSet};
use crate::store::BoundsStore;

pub use crate::store::{init_bounds, BoundEntry};

/// A bound only replaces the stored one when it is tighter by more than this.
pub const IMPROVEMENT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct PropagationConfig {
    /// Cluster state-space budgets, run in order; bounds carry over.
    pub omega_schedule: Vec<u128>,
    /// Largest joint state space of a bounded marginal set.
    pub mar_state_cap: u128,
    /// A sweep converges when every entry's relative gap reduction is below this.
    pub convergence_threshold: f64,
    pub max_sweeps: usize,
    /// Cap on LP rows per cluster; excess bound rows are dropped.
    pub max_rows: usize,
    /// Update clusters concurrently against a snapshot taken at sweep start.
    pub parallel: bool,
    /// Recorded in reports; the engine itself is deterministic.
    pub seed: Option<u64>,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            omega_schedule: vec![1 << 8],
            mar_state_cap: 16,
            convergence_threshold: 0.01,
            max_sweeps: 1000,
            max_rows: 20_000,
            parallel: false,
            seed: None,
        }
    }
}

impl PropagationConfig {
    pub fn with_omega(budget: u128) -> Self {
        Self {
            omega_schedule: vec![budget],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega_schedule.is_empty() {
            return Err(Error::Config("empty omega schedule".into()));
        }
        if self.omega_schedule.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config("omega schedule must be ascending".into()));
        }
        if !(self.convergence_threshold > 0.0 && self.convergence_threshold < 1.0) {
            return Err(Error::Config(format!(
                "convergence threshold {} not in (0, 1)",
                self.convergence_threshold
            )));
        }
        if self.mar_state_cap < 2 {
            return Err(Error::Config("mar_state_cap must be at least 2".into()));
        }
        Ok(())
    }
}

/// A cluster with its marginal tasks and their (fixed) conditional tables.
#[derive(Debug, Clone)]
pub struct ClusterPlan {
    pub spec: ClusterSpec,
    pub tables: Vec<ConditionalTable>,
}

impl ClusterPlan {
    pub fn new(net: &Network, spec: ClusterSpec, mar_state_cap: u128) -> Result<Self> {
        let budget = spec.state_space;
        let tables = derive_marginal_sets(net, &spec, mar_state_cap)
            .iter()
            .map(|task| conditional_table(net, task, budget))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spec, tables })
    }

    fn dead_columns(&self) -> &[usize] {
        self.tables.first().map_or(&[], |t| t.dead_columns.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Candidate {
    set_index: usize,
    state: usize,
    lower: f64,
    upper: f64,
}

/// Changes made by one cluster update.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ImprovementSummary {
    pub tightened: usize,
    pub rows_dropped: usize,
    /// Total gap removed, per marginal set.
    pub gap_reduction: BTreeMap<VarSet, f64>,
}

/// Solves the bounding LPs of one plan against `store` without modifying it.
fn cluster_candidates(net: &Network, plan: &ClusterPlan, store: &BoundsStore, max_rows: usize) -> Result<(Vec<Candidate>, usize)> {
    let mut out = Vec::new();
    if plan.spec.separator.is_empty() {
        // isolated region: the local conditional is the exact marginal
        for (set_index, table) in plan.tables.iter().enumerate() {
            if !table.dead_columns.is_empty() {
                return Err(Error::ZeroPartition);
            }
            for m in 0..table.mar_states {
                let p = table.get(m, 0);
                out.push(Candidate {
                    set_index,
                    state: m,
                    lower: p,
                    upper: p,
                });
            }
        }
        return Ok((out, 0));
    }
    let constraints = build_constraints(net.cardinalities(), &plan.spec.separator, store, plan.dead_columns(), max_rows);
    let tableau = FeasibleTableau::new(constraints.num_vars, &constraints.rows)?;
    for (set_index, table) in plan.tables.iter().enumerate() {
        for m in 0..table.mar_states {
            let c = table.row(m);
            let upper = tableau.optimize(c, Sense::Maximize)?;
            let lower = tableau.optimize(c, Sense::Minimize)?;
            for sol in [&upper, &lower] {
                if sol.status != crate::lp::LpStatus::Optimal {
                    return Err(Error::Unbounded);
                }
            }
            out.push(Candidate {
                set_index,
                state: m,
                lower: lower.value,
                upper: upper.value,
            });
        }
    }
    Ok((out, constraints.dropped()))
}

fn apply_candidates(plan: &ClusterPlan, store: &mut BoundsStore, candidates: &[Candidate], summary: &mut ImprovementSummary) {
    for c in candidates {
        let set = &plan.tables[c.set_index].task.mar;
        let entry = store.get_mut(set).expect("store holds every task set");
        let before = entry.gap();
        let mut changed = 0;
        changed += entry.offer_upper(c.state, c.upper, IMPROVEMENT_EPS) as usize;
        changed += entry.offer_lower(c.state, c.lower, IMPROVEMENT_EPS) as usize;
        if changed > 0 {
            summary.tightened += changed;
            *summary.gap_reduction.entry(set.clone()).or_default() += before - entry.gap();
        }
    }
}

fn ensure_entries(net: &Network, plan: &ClusterPlan, store: &mut BoundsStore) {
    for t in &plan.tables {
        store.ensure(t.task.mar.clone(), net.state_space(&t.task.mar) as usize);
    }
}

/// Re-bounds every marginal set of one cluster from the current store.
///
/// The constraint matrix is built once; each joint state of each marginal
/// set is maximized and minimized over it. A candidate is kept only if it
/// tightens the stored bound.
pub fn update_cluster(net: &Network, spec: &ClusterSpec, store: &mut BoundsStore, cfg: &PropagationConfig) -> Result<ImprovementSummary> {
    let plan = ClusterPlan::new(net, spec.clone(), cfg.mar_state_cap)?;
    update_plan(net, &plan, store, cfg.max_rows)
}

pub fn update_plan(net: &Network, plan: &ClusterPlan, store: &mut BoundsStore, max_rows: usize) -> Result<ImprovementSummary> {
    ensure_entries(net, plan, store);
    let (candidates, rows_dropped) = cluster_candidates(net, plan, store, max_rows)?;
    let mut summary = ImprovementSummary {
        rows_dropped,
        ..Default::default()
    };
    apply_candidates(plan, store, &candidates, &mut summary);
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepStats {
    pub stage: usize,
    pub sweep: usize,
    pub total_gap: f64,
    pub mean_gap: f64,
    pub max_gap: f64,
    /// Largest per-entry relative gap reduction in this sweep.
    pub max_relative_improvement: f64,
    pub tightened: usize,
    pub rows_dropped: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub budget: u128,
    pub clusters: usize,
    pub tasks: usize,
    pub uncovered: VarSet,
    pub sweeps: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ConvergenceReport {
    pub stages: Vec<StageReport>,
    pub sweeps: Vec<SweepStats>,
    /// Total gap of each entry when it was created and after every sweep.
    pub gap_history: BTreeMap<VarSet, Vec<f64>>,
    /// Last-sweep relative gap reduction per entry.
    pub improvement_ratios: BTreeMap<VarSet, f64>,
    pub converged: bool,
}

/// Stateful driver; `propagate` runs it to completion.
pub struct Propagator<'a> {
    net: &'a Network,
    cfg: PropagationConfig,
    store: BoundsStore,
    plans: Vec<ClusterPlan>,
    report: ConvergenceReport,
}

impl<'a> Propagator<'a> {
    pub fn new(net: &'a Network, cfg: PropagationConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            net,
            cfg,
            store: BoundsStore::new(),
            plans: Vec::new(),
            report: ConvergenceReport::default(),
        })
    }

    pub fn store(&self) -> &BoundsStore {
        &self.store
    }

    pub fn plans(&self) -> &[ClusterPlan] {
        &self.plans
    }

    pub fn report(&self) -> &ConvergenceReport {
        &self.report
    }

    /// Replaces the cluster order used by subsequent sweeps.
    pub fn reorder_plans(&mut self, order: &[usize]) {
        let plans = std::mem::take(&mut self.plans);
        self.plans = order.iter().map(|&i| plans[i].clone()).collect();
    }

    /// Enumerates clusters for `budget` and adds any new marginal sets to
    /// the store, keeping existing bounds.
    pub fn begin_stage(&mut self, budget: u128) -> Result<()> {
        let set = enumerate_clusters(self.net, budget);
        let mut specs = set.clusters;
        specs.sort_by(|a, b| (a.interior[0], &a.interior).cmp(&(b.interior[0], &b.interior)));
        let net = self.net;
        let cap = self.cfg.mar_state_cap;
        self.plans = specs
            .into_par_iter()
            .map(|spec| ClusterPlan::new(net, spec, cap))
            .collect::<Result<Vec<_>>>()?;
        for plan in &self.plans {
            ensure_entries(self.net, plan, &mut self.store);
        }
        for (set, entry) in self.store.iter_mut() {
            entry.last_gap = entry.gap();
            self.report.gap_history.entry(set.clone()).or_insert_with(|| vec![entry.last_gap]);
        }
        self.report.stages.push(StageReport {
            budget,
            clusters: self.plans.len(),
            tasks: self.plans.iter().map(|p| p.tables.len()).sum(),
            uncovered: set.uncovered,
            sweeps: 0,
            converged: false,
        });
        Ok(())
    }

    /// One pass over every cluster of the current stage.
    pub fn sweep(&mut self) -> Result<SweepStats> {
        let mut tightened = 0;
        let mut rows_dropped = 0;
        if self.cfg.parallel {
            let snapshot = self.store.clone();
            let net = self.net;
            let max_rows = self.cfg.max_rows;
            let results = self
                .plans
                .par_iter()
                .map(|plan| cluster_candidates(net, plan, &snapshot, max_rows))
                .collect::<Result<Vec<_>>>()?;
            for (plan, (candidates, dropped)) in self.plans.iter().zip(results) {
                let mut summary = ImprovementSummary::default();
                apply_candidates(plan, &mut self.store, &candidates, &mut summary);
                tightened += summary.tightened;
                rows_dropped += dropped;
            }
        } else {
            for plan in &self.plans {
                let summary = update_plan(self.net, plan, &mut self.store, self.cfg.max_rows)?;
                tightened += summary.tightened;
                rows_dropped += summary.rows_dropped;
            }
        }

        let mut max_rel: f64 = 0.0;
        let mut total = 0.0;
        let mut max_gap: f64 = 0.0;
        for (set, entry) in self.store.iter_mut() {
            let before = entry.last_gap;
            let after = entry.gap();
            let rel = if before > 0.0 { (before - after) / before } else { 0.0 };
            // a closed gap cannot improve further
            if after > IMPROVEMENT_EPS {
                max_rel = max_rel.max(rel);
            }
            total += after;
            max_gap = max_gap.max(after);
            entry.last_gap = after;
            self.report.gap_history.entry(set.clone()).or_default().push(after);
            self.report.improvement_ratios.insert(set.clone(), rel);
        }
        let converged = max_rel < self.cfg.convergence_threshold;
        let stage = self.report.stages.len().saturating_sub(1);
        let stage_report = self.report.stages.last_mut();
        let sweep = stage_report.as_ref().map_or(0, |s| s.sweeps);
        if let Some(s) = stage_report {
            s.sweeps += 1;
            s.converged = converged;
        }
        let stats = SweepStats {
            stage,
            sweep,
            total_gap: total,
            mean_gap: if self.store.is_empty() { 0.0 } else { total / self.store.len() as f64 },
            max_gap,
            max_relative_improvement: max_rel,
            tightened,
            rows_dropped,
            converged,
        };
        self.report.sweeps.push(stats.clone());
        Ok(stats)
    }

    /// Sweeps the current stage until convergence or `max_sweeps`.
    pub fn run_stage(&mut self) -> Result<bool> {
        for _ in 0..self.cfg.max_sweeps {
            if self.sweep()?.converged {
                return Ok(true);
            }
        }
        Ok(false)
    }

    pub fn run(mut self) -> Result<(BoundsStore, ConvergenceReport)> {
        let schedule = self.cfg.omega_schedule.clone();
        let mut converged = true;
        for budget in schedule {
            self.begin_stage(budget)?;
            converged &= self.run_stage()?;
        }
        self.report.converged = converged;
        Ok((self.store, self.report))
    }
}

/// Runs bound propagation over the whole budget schedule.
pub fn propagate(net: &Network, cfg: &PropagationConfig) -> Result<(BoundsStore, ConvergenceReport)> {
    Propagator::new(net, cfg.clone())?.run()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaEstimate {
    pub alpha: f64,
    pub ratios: Vec<f64>,
    pub reliable: bool,
}

/// Gaps closer than this to their final value are treated as converged.
const ALPHA_NOISE_FLOOR: f64 = 1e-9;
const ALPHA_WINDOW: usize = 5;

/// Asymptotic per-sweep contraction of a gap sequence, taking the final gap
/// as its limit.
pub fn estimate_alpha_from_gaps(gaps: &[f64]) -> Result<AlphaEstimate> {
    let limit = *gaps.last().ok_or(Error::InsufficientHistory {
        needed: ALPHA_WINDOW,
        available: 0,
    })?;
    estimate_alpha_with_limit(gaps, limit)
}

/// Geometric mean of `(g[n] - limit) / (g[n-1] - limit)` over the last (up
/// to five) ratios whose distances are still above the noise floor. Needs
/// five such gaps.
pub fn estimate_alpha_with_limit(gaps: &[f64], limit: f64) -> Result<AlphaEstimate> {
    let dist: Vec<f64> = gaps.iter().map(|g| g - limit).collect();
    let end = dist.iter().rposition(|&d| d > ALPHA_NOISE_FLOOR);
    let available = end.map_or(0, |e| e + 1);
    let Some(end) = end.filter(|&e| e + 1 >= ALPHA_WINDOW) else {
        return Err(Error::InsufficientHistory {
            needed: ALPHA_WINDOW,
            available,
        });
    };
    let start = (end + 1).saturating_sub(ALPHA_WINDOW).max(1);
    let ratios: Vec<f64> = (start..=end).map(|k| dist[k] / dist[k - 1]).collect();
    let k = ratios.len() as f64;
    let alpha = (ratios.iter().map(|r| r.ln()).sum::<f64>() / k).exp();
    let mean = ratios.iter().sum::<f64>() / k;
    let variance = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / k;
    Ok(AlphaEstimate {
        alpha,
        reliable: alpha.is_finite() && variance <= 0.1,
        ratios,
    })
}

/// Per-entry α from a propagation report.
pub fn estimate_alpha(report: &ConvergenceReport) -> BTreeMap<VarSet, Result<AlphaEstimate>> {
    report
        .gap_history
        .iter()
        .map(|(set, gaps)| (set.clone(), estimate_alpha_from_gaps(gaps)))
        .collect()
}
