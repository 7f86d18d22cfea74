//! Per-marginal-set lower/upper bound storage.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::clusters::MarginalTask;
use crate::error::{Error, Result};
use crate::model::{Network, VarSet};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundEntry {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Total gap recorded at the end of the previous sweep.
    pub last_gap: f64,
}

impl BoundEntry {
    pub fn trivial(states: usize) -> Self {
        Self {
            lower: vec![0.0; states],
            upper: vec![1.0; states],
            last_gap: states as f64,
        }
    }

    pub fn num_states(&self) -> usize {
        self.lower.len()
    }

    /// Sum over states of `upper - lower`.
    pub fn gap(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).sum()
    }

    pub fn state_gap(&self, state: usize) -> f64 {
        self.upper[state] - self.lower[state]
    }

    /// Tightens the upper bound of `state` if `candidate` is lower by more
    /// than `eps`. Never crosses the stored lower bound.
    pub fn offer_upper(&mut self, state: usize, candidate: f64, eps: f64) -> bool {
        let candidate = candidate.clamp(0.0, 1.0).max(self.lower[state]);
        if candidate < self.upper[state] - eps {
            self.upper[state] = candidate;
            true
        } else {
            false
        }
    }

    /// Tightens the lower bound of `state` if `candidate` is higher by more
    /// than `eps`. Never crosses the stored upper bound.
    pub fn offer_lower(&mut self, state: usize, candidate: f64, eps: f64) -> bool {
        let candidate = candidate.clamp(0.0, 1.0).min(self.upper[state]);
        if candidate > self.lower[state] + eps {
            self.lower[state] = candidate;
            true
        } else {
            false
        }
    }

    pub fn check(&self, slack: f64) -> std::result::Result<(), String> {
        for (s, (&l, &u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(l >= -slack && l <= u + slack && u <= 1.0 + slack) {
                return Err(format!("state {s}: lower {l} upper {u}"));
            }
        }
        let lo: f64 = self.lower.iter().sum();
        let hi: f64 = self.upper.iter().sum();
        if lo > 1.0 + slack || hi < 1.0 - slack {
            return Err(format!("sum of lower {lo}, sum of upper {hi}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BoundsStore {
    entries: BTreeMap<VarSet, BoundEntry>,
}

impl BoundsStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, set: &[usize]) -> Option<&BoundEntry> {
        self.entries.get(set)
    }

    pub fn get_mut(&mut self, set: &[usize]) -> Option<&mut BoundEntry> {
        self.entries.get_mut(set)
    }

    /// Adds a trivial [0, 1] entry unless one exists already.
    pub fn ensure(&mut self, set: VarSet, states: usize) -> bool {
        let mut added = false;
        self.entries.entry(set).or_insert_with(|| {
            added = true;
            BoundEntry::trivial(states)
        });
        added
    }

    pub fn insert(&mut self, set: VarSet, entry: BoundEntry) {
        self.entries.insert(set, entry);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VarSet, &BoundEntry)> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&VarSet, &mut BoundEntry)> {
        self.entries.iter_mut()
    }

    /// Entries whose variable set lies inside `sep`, ordered by set size then
    /// lexicographically.
    pub fn subsets_of<'a>(&'a self, sep: &[usize]) -> Vec<(&'a VarSet, &'a BoundEntry)> {
        let mut out: Vec<_> = self
            .entries
            .iter()
            .filter(|(set, _)| crate::model::is_subset(set, sep))
            .collect();
        out.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(b.0)));
        out
    }

    pub fn total_gap(&self) -> f64 {
        self.entries.values().map(BoundEntry::gap).sum()
    }

    pub fn check_invariants(&self, slack: f64) -> Result<()> {
        for (set, e) in &self.entries {
            e.check(slack)
                .map_err(|m| Error::Soundness(format!("entry {set:?}: {m}")))?;
        }
        Ok(())
    }
}

/// One trivial entry per distinct marginal set among `tasks`.
pub fn init_bounds(net: &Network, tasks: &[MarginalTask]) -> Result<BoundsStore> {
    if tasks.is_empty() {
        return Err(Error::NoTasks);
    }
    let mut store = BoundsStore::new();
    for t in tasks {
        store.ensure(t.mar.clone(), net.state_space(&t.mar) as usize);
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Factor;

    fn task(mar: Vec<usize>) -> MarginalTask {
        MarginalTask {
            mar,
            oth: vec![],
            sep: vec![],
        }
    }

    #[test]
    fn init_two_sets() {
        let net = Network::new(vec![2, 2], vec![Factor::new(vec![0, 1], vec![1.0; 4])]).unwrap();
        let store = init_bounds(&net, &[task(vec![0]), task(vec![0, 1])]).unwrap();
        assert_eq!(store.len(), 2);
        assert_eq!(store.get(&[0]).unwrap().lower, vec![0.0, 0.0]);
        assert_eq!(store.get(&[0]).unwrap().upper, vec![1.0, 1.0]);
        assert_eq!(store.get(&[0, 1]).unwrap().lower, vec![0.0; 4]);
        assert_eq!(store.get(&[0, 1]).unwrap().upper, vec![1.0; 4]);
    }

    #[test]
    fn init_dedups_and_rejects_empty() {
        let net = Network::new(vec![2, 2], vec![Factor::new(vec![0, 1], vec![1.0; 4])]).unwrap();
        let store = init_bounds(&net, &[task(vec![0]), task(vec![0])]).unwrap();
        assert_eq!(store.len(), 1);
        assert!(matches!(init_bounds(&net, &[]), Err(Error::NoTasks)));
    }

    #[test]
    fn gating() {
        let mut e = BoundEntry::trivial(2);
        assert!(e.offer_upper(0, 0.7, 1e-12));
        assert!(!e.offer_upper(0, 0.8, 1e-12));
        assert_eq!(e.upper[0], 0.7);
        assert!(!e.offer_upper(0, 0.7 - 1e-13, 1e-12));
        assert!(e.offer_lower(0, 0.2, 1e-12));
        assert!(!e.offer_lower(0, 0.1, 1e-12));
        // candidates are clipped to [0, 1] and never cross the other bound
        assert!(!e.offer_upper(1, 1.5, 1e-12));
        assert!(e.offer_upper(0, 0.1, 1e-12));
        assert_eq!(e.upper[0], 0.2);
    }

    #[test]
    fn subset_ordering() {
        let mut store = BoundsStore::new();
        store.ensure(vec![1, 2], 4);
        store.ensure(vec![2], 2);
        store.ensure(vec![1], 2);
        store.ensure(vec![3], 2);
        let keys: Vec<_> = store.subsets_of(&[1, 2]).into_iter().map(|(k, _)| k.clone()).collect();
        assert_eq!(keys, vec![vec![1], vec![2], vec![1, 2]]);
    }
}
