//! Discrete factorized models, evidence clamping and state indexing.
//!
//! Joint states over an ordered variable list are indexed in mixed radix with
//! the last variable fastest. The same convention is used for factor tables,
//! conditional tables, LP columns and reports.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Sorted, duplicate-free list of variable indices.
pub type VarSet = Vec<usize>;

/// Non-negative potential over an ordered scope.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    scope: Vec<usize>,
    table: Vec<f64>,
}

impl Factor {
    pub fn new(scope: Vec<usize>, table: Vec<f64>) -> Self {
        Self { scope, table }
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Strides of each scope variable into the table.
    pub fn strides(&self, cardinalities: &[usize]) -> Vec<usize> {
        let mut strides = vec![0; self.scope.len()];
        let mut acc = 1;
        for (k, &v) in self.scope.iter().enumerate().rev() {
            strides[k] = acc;
            acc *= cardinalities[v];
        }
        strides
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    cardinalities: Vec<usize>,
    factors: Vec<Factor>,
    // factor indices touching each variable
    var_factors: Vec<Vec<usize>>,
}

impl Network {
    /// Validates and builds a network. Factor order is preserved.
    pub fn new(cardinalities: Vec<usize>, factors: Vec<Factor>) -> Result<Self> {
        let num_vars = cardinalities.len();
        if let Some(v) = cardinalities.iter().position(|&c| c < 2) {
            return Err(Error::Cardinality(v));
        }
        let mut var_factors = vec![Vec::new(); num_vars];
        for (fi, f) in factors.iter().enumerate() {
            let mut seen = vec![false; num_vars];
            let mut expected = 1usize;
            for &v in &f.scope {
                if v >= num_vars {
                    return Err(Error::VariableOutOfRange { var: v, num_vars });
                }
                if seen[v] {
                    return Err(Error::DuplicateScopeVariable { factor: fi, var: v });
                }
                seen[v] = true;
                expected = expected.saturating_mul(cardinalities[v]);
            }
            if f.table.len() != expected {
                return Err(Error::TableLength {
                    factor: fi,
                    expected,
                    actual: f.table.len(),
                });
            }
            if let Some((index, &value)) = f
                .table
                .iter()
                .enumerate()
                .find(|(_, w)| !w.is_finite() || **w < 0.0)
            {
                return Err(Error::InvalidWeight {
                    factor: fi,
                    index,
                    value,
                });
            }
            for &v in &f.scope {
                var_factors[v].push(fi);
            }
        }
        Ok(Self {
            cardinalities,
            factors,
            var_factors,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn cardinality(&self, var: usize) -> usize {
        self.cardinalities[var]
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Indices of factors whose scope contains `var`.
    pub fn factors_of(&self, var: usize) -> &[usize] {
        &self.var_factors[var]
    }

    /// Indices of factors whose scope intersects `vars`, ascending.
    pub fn factors_touching(&self, vars: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = vars
            .iter()
            .flat_map(|&v| self.var_factors[v].iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Joint state-space size of `vars`, saturating.
    pub fn state_space(&self, vars: &[usize]) -> u128 {
        state_space(&self.cardinalities, vars)
    }

    /// The union of all factor scopes meeting `vars`, minus `vars` itself.
    pub fn markov_blanket(&self, vars: &[usize]) -> VarSet {
        let mut inside = vec![false; self.num_vars()];
        for &v in vars {
            inside[v] = true;
        }
        let mut out = Vec::new();
        let mut added = vec![false; self.num_vars()];
        for fi in self.factors_touching(vars) {
            for &u in &self.factors[fi].scope {
                if !inside[u] && !added[u] {
                    added[u] = true;
                    out.push(u);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Unnormalized weight of a full state (one entry per variable).
    pub fn weight(&self, states: &[usize]) -> f64 {
        self.factors
            .iter()
            .map(|f| {
                let idx = f
                    .scope
                    .iter()
                    .fold(0, |acc, &v| acc * self.cardinalities[v] + states[v]);
                f.table[idx]
            })
            .product()
    }

    /// Returns a copy with every factor divided by its largest entry.
    pub fn max_normalized(&self) -> Network {
        let factors = self
            .factors
            .iter()
            .map(|f| {
                let m = f.table.iter().cloned().fold(0.0, f64::max);
                let table = if m > 0.0 {
                    f.table.iter().map(|w| w / m).collect()
                } else {
                    f.table.clone()
                };
                Factor::new(f.scope.clone(), table)
            })
            .collect();
        Network {
            cardinalities: self.cardinalities.clone(),
            factors,
            var_factors: self.var_factors.clone(),
        }
    }
}

/// Free-function form of [`Network::new`].
pub fn build_network(cardinalities: Vec<usize>, factors: Vec<Factor>) -> Result<Network> {
    Network::new(cardinalities, factors)
}

/// Free-function form of [`Network::markov_blanket`].
pub fn markov_blanket(net: &Network, vars: &[usize]) -> VarSet {
    net.markov_blanket(vars)
}

pub fn state_space(cardinalities: &[usize], vars: &[usize]) -> u128 {
    vars.iter()
        .fold(1u128, |acc, &v| acc.saturating_mul(cardinalities[v] as u128))
}

/// Observed states keyed by variable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Evidence {
    assignments: BTreeMap<usize, usize>,
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (usize, usize)>>(pairs: I) -> Result<Self> {
        let mut ev = Self::new();
        for (var, state) in pairs {
            ev.observe(var, state)?;
        }
        Ok(ev)
    }

    pub fn observe(&mut self, var: usize, state: usize) -> Result<()> {
        if self.assignments.insert(var, state).is_some() {
            return Err(Error::DuplicateAssignment(var));
        }
        Ok(())
    }

    pub fn get(&self, var: usize) -> Option<usize> {
        self.assignments.get(&var).copied()
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.assignments.iter().map(|(&v, &s)| (v, s))
    }

    pub fn validate(&self, net: &Network) -> Result<()> {
        for (var, state) in self.iter() {
            if var >= net.num_vars() {
                return Err(Error::VariableOutOfRange {
                    var,
                    num_vars: net.num_vars(),
                });
            }
            let cardinality = net.cardinality(var);
            if state >= cardinality {
                return Err(Error::StateOutOfRange {
                    var,
                    state,
                    cardinality,
                });
            }
        }
        Ok(())
    }
}

/// Network over the unobserved variables after clamping.
#[derive(Debug, Clone)]
pub struct ReducedNetwork {
    pub network: Network,
    /// Product of all fully-observed factor weights.
    pub constant: f64,
    pub old_to_new: Vec<Option<usize>>,
    pub new_to_old: Vec<usize>,
    /// Set when some factor became identically zero, i.e. the evidence has
    /// zero probability.
    pub zero_weight: bool,
}

pub fn apply_evidence(net: &Network, ev: &Evidence) -> Result<ReducedNetwork> {
    ev.validate(net)?;
    let mut old_to_new = vec![None; net.num_vars()];
    let mut new_to_old = Vec::new();
    for v in 0..net.num_vars() {
        if ev.get(v).is_none() {
            old_to_new[v] = Some(new_to_old.len());
            new_to_old.push(v);
        }
    }
    let cardinalities: Vec<usize> = new_to_old.iter().map(|&v| net.cardinality(v)).collect();

    let mut constant = 1.0;
    let mut zero_weight = false;
    let mut factors = Vec::new();
    for f in net.factors() {
        let strides = f.strides(net.cardinalities());
        let mut offset = 0;
        let mut free = Vec::new();
        for (k, &v) in f.scope().iter().enumerate() {
            match ev.get(v) {
                Some(s) => offset += s * strides[k],
                None => free.push(k),
            }
        }
        if free.is_empty() {
            let w = f.table()[offset];
            constant *= w;
            if w == 0.0 {
                zero_weight = true;
            }
            continue;
        }
        let free_cards: Vec<usize> = free.iter().map(|&k| net.cardinality(f.scope()[k])).collect();
        let size: usize = free_cards.iter().product();
        let mut table = Vec::with_capacity(size);
        let mut states = vec![0usize; free.len()];
        for _ in 0..size {
            let idx = offset
                + free
                    .iter()
                    .zip(&states)
                    .map(|(&k, &s)| s * strides[k])
                    .sum::<usize>();
            table.push(f.table()[idx]);
            increment(&mut states, &free_cards);
        }
        if table.iter().all(|&w| w == 0.0) {
            zero_weight = true;
        }
        let scope = free
            .iter()
            .map(|&k| old_to_new[f.scope()[k]].expect("free variable is unobserved"))
            .collect();
        factors.push(Factor::new(scope, table));
    }
    Ok(ReducedNetwork {
        network: Network::new(cardinalities, factors)?,
        constant,
        old_to_new,
        new_to_old,
        zero_weight: zero_weight || constant == 0.0,
    })
}

/// Ordered (variable, state) pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment(pub Vec<(usize, usize)>);

/// Mixed-radix index of `assignment` over `over`, last variable fastest.
pub fn linear_index(cardinalities: &[usize], assignment: &Assignment, over: &[usize]) -> Result<usize> {
    if assignment.0.len() != over.len() {
        return Err(Error::AssignmentMismatch(format!(
            "{} assigned, {} expected",
            assignment.0.len(),
            over.len()
        )));
    }
    let mut index = 0;
    for &v in over {
        let mut hits = assignment.0.iter().filter(|(var, _)| *var == v);
        let (_, state) = hits
            .next()
            .ok_or_else(|| Error::AssignmentMismatch(format!("variable {v} missing")))?;
        if hits.next().is_some() {
            return Err(Error::DuplicateAssignment(v));
        }
        let cardinality = *cardinalities
            .get(v)
            .ok_or(Error::VariableOutOfRange { var: v, num_vars: cardinalities.len() })?;
        if *state >= cardinality {
            return Err(Error::StateOutOfRange {
                var: v,
                state: *state,
                cardinality,
            });
        }
        index = index * cardinality + state;
    }
    Ok(index)
}

/// Inverse of [`linear_index`]: per-variable states of `index` over `over`.
pub fn decode_index(cardinalities: &[usize], over: &[usize], mut index: usize) -> Vec<usize> {
    let mut states = vec![0; over.len()];
    for (k, &v) in over.iter().enumerate().rev() {
        states[k] = index % cardinalities[v];
        index /= cardinalities[v];
    }
    states
}

/// Advances a mixed-radix odometer (last position fastest). Returns false on wrap.
pub fn increment(states: &mut [usize], radices: &[usize]) -> bool {
    for k in (0..states.len()).rev() {
        states[k] += 1;
        if states[k] < radices[k] {
            return true;
        }
        states[k] = 0;
    }
    false
}

/// Sorted union of two sorted sets.
pub fn union(a: &[usize], b: &[usize]) -> VarSet {
    let mut out: VarSet = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Elements of sorted `a` not in sorted `b`.
pub fn difference(a: &[usize], b: &[usize]) -> VarSet {
    a.iter().filter(|v| b.binary_search(v).is_err()).copied().collect()
}

pub fn is_subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|v| b.binary_search(v).is_ok())
}
