//! Local conditional tables p(mar | sep), computed by direct summation over
//! the cluster.

use crate::clusters::MarginalTask;
use crate::error::{Error, Result};
use crate::model::{increment, union, Network};

/// Rows are joint states of `mar`, columns joint states of `sep`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTable {
    pub task: MarginalTask,
    pub mar_states: usize,
    pub sep_states: usize,
    values: Vec<f64>,
    /// Separator states with zero local support; their columns are all zero.
    pub dead_columns: Vec<usize>,
}

impl ConditionalTable {
    pub fn get(&self, mar_state: usize, sep_state: usize) -> f64 {
        self.values[mar_state * self.sep_states + sep_state]
    }

    /// Objective vector for one marginal state.
    pub fn row(&self, mar_state: usize) -> &[f64] {
        let start = mar_state * self.sep_states;
        &self.values[start..start + self.sep_states]
    }

    pub fn column(&self, sep_state: usize) -> Vec<f64> {
        (0..self.mar_states).map(|m| self.get(m, sep_state)).collect()
    }
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Computes p(mar | sep) using only the factors touching `mar ∪ oth`.
///
/// Fails when the cluster exceeds `budget` states or when `sep` does not
/// actually enclose `mar ∪ oth`.
pub fn conditional_table(net: &Network, task: &MarginalTask, budget: u128) -> Result<ConditionalTable> {
    let inner = union(&task.mar, &task.oth);
    let order: Vec<usize> = task
        .sep
        .iter()
        .chain(&task.mar)
        .chain(&task.oth)
        .copied()
        .collect();
    let size = net.state_space(&order);
    if size > budget {
        return Err(Error::StateSpaceExceeded { size, cap: budget });
    }
    let radices: Vec<usize> = order.iter().map(|&v| net.cardinality(v)).collect();
    let sep_states = net.state_space(&task.sep) as usize;
    let mar_states = net.state_space(&task.mar) as usize;
    let oth_states = net.state_space(&task.oth) as usize;

    // per relevant factor: stride of each local position into its table
    let mut position = vec![usize::MAX; net.num_vars()];
    for (k, &v) in order.iter().enumerate() {
        position[v] = k;
    }
    let mut local_strides = Vec::new();
    for fi in net.factors_touching(&inner) {
        let f = &net.factors()[fi];
        let strides = f.strides(net.cardinalities());
        let mut local = vec![0usize; order.len()];
        for (k, &v) in f.scope().iter().enumerate() {
            if position[v] == usize::MAX {
                return Err(Error::Config(format!(
                    "factor {fi} reaches variable {v} outside the cluster; separator does not enclose the task"
                )));
            }
            local[position[v]] = strides[k];
        }
        local_strides.push((f.table(), local));
    }

    let mut values = vec![0.0; mar_states * sep_states];
    let mut dead_columns = Vec::new();
    let mut states = vec![0usize; order.len()];
    let mut joint = vec![CompensatedSum::default(); mar_states];
    for s in 0..sep_states {
        joint.iter_mut().for_each(|acc| *acc = CompensatedSum::default());
        for acc in joint.iter_mut() {
            for _ in 0..oth_states {
                let w: f64 = local_strides
                    .iter()
                    .map(|(table, local)| {
                        let idx: usize = states.iter().zip(local).map(|(a, b)| a * b).sum();
                        table[idx]
                    })
                    .product();
                acc.add(w);
                increment(&mut states, &radices);
            }
        }
        let mut total = CompensatedSum::default();
        joint.iter().for_each(|acc| total.add(acc.value()));
        let total = total.value();
        if total > 0.0 {
            for (m, acc) in joint.iter().enumerate() {
                values[m * sep_states + s] = acc.value() / total;
            }
        } else {
            dead_columns.push(s);
        }
    }
    Ok(ConditionalTable {
        task: task.clone(),
        mar_states,
        sep_states,
        values,
        dead_columns,
    })
}
