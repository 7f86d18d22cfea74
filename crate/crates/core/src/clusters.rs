//! Separator enumeration under a state-space budget and the marginal tasks
//! each separator supports.

use itertools::Itertools;
use serde::Serialize;

use crate::model::{union, Network, VarSet};

/// A separated region together with its Markov blanket.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClusterSpec {
    pub interior: VarSet,
    pub separator: VarSet,
    pub cluster: VarSet,
    pub state_space: u128,
}

impl ClusterSpec {
    pub fn from_interior(net: &Network, interior: VarSet) -> Self {
        let separator = net.markov_blanket(&interior);
        let cluster = union(&interior, &separator);
        let state_space = net.state_space(&cluster);
        Self {
            interior,
            separator,
            cluster,
            state_space,
        }
    }
}

/// One bounding job: the marginal over `mar`, summing out `oth`, given `sep`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MarginalTask {
    pub mar: VarSet,
    pub oth: VarSet,
    pub sep: VarSet,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ClusterSet {
    pub clusters: Vec<ClusterSpec>,
    /// Variables not inside the interior of any emitted cluster.
    pub uncovered: VarSet,
}

/// Grows a cluster from every variable and keeps the distinct maximal ones.
///
/// Growth adds, one at a time, the variable outside the interior whose
/// addition yields the smallest cluster state space (lowest index on ties),
/// recomputing the blanket each time, while the budget allows. Seeds whose
/// smallest cluster already exceeds the budget produce nothing.
pub fn enumerate_clusters(net: &Network, budget: u128) -> ClusterSet {
    let n = net.num_vars();
    let mut clusters: Vec<ClusterSpec> = Vec::new();
    for seed in 0..n {
        let mut current = ClusterSpec::from_interior(net, vec![seed]);
        if current.state_space > budget {
            continue;
        }
        loop {
            let best = (0..n)
                .filter(|v| current.interior.binary_search(v).is_err())
                .map(|v| ClusterSpec::from_interior(net, union(&current.interior, &[v])))
                .enumerate()
                .min_by_key(|(i, c)| (c.state_space, *i))
                .map(|(_, c)| c);
            match best {
                Some(next) if next.state_space <= budget => current = next,
                _ => break,
            }
        }
        if !clusters.iter().any(|c| c.interior == current.interior) {
            clusters.push(current);
        }
    }
    clusters.sort_by(|a, b| a.interior.cmp(&b.interior));
    let mut covered = vec![false; n];
    for c in &clusters {
        for &v in &c.interior {
            covered[v] = true;
        }
    }
    let uncovered = (0..n).filter(|&v| !covered[v]).collect();
    ClusterSet {
        clusters,
        uncovered,
    }
}

/// True when adding any outside variable to the interior pushes the cluster
/// over budget.
pub fn is_maximal(net: &Network, spec: &ClusterSpec, budget: u128) -> bool {
    (0..net.num_vars())
        .filter(|v| spec.cluster.binary_search(v).is_err())
        .all(|v| ClusterSpec::from_interior(net, union(&spec.interior, &[v])).state_space > budget)
}

/// All nonempty subsets of the interior whose joint state space fits
/// `mar_state_cap`, by size then lexicographically.
pub fn derive_marginal_sets(net: &Network, spec: &ClusterSpec, mar_state_cap: u128) -> Vec<MarginalTask> {
    let mut tasks = Vec::new();
    let mut sorted_cards: Vec<u128> = spec.interior.iter().map(|&v| net.cardinality(v) as u128).collect();
    sorted_cards.sort_unstable();
    for k in 1..=spec.interior.len() {
        let smallest: u128 = sorted_cards[..k].iter().product();
        if smallest > mar_state_cap {
            break;
        }
        for mar in spec.interior.iter().copied().combinations(k) {
            if net.state_space(&mar) > mar_state_cap {
                continue;
            }
            let oth = spec
                .interior
                .iter()
                .copied()
                .filter(|v| !mar.contains(v))
                .collect();
            tasks.push(MarginalTask {
                mar,
                oth,
                sep: spec.separator.clone(),
            });
        }
    }
    tasks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{is_subset, Factor};

    pub(crate) fn ring(n: usize) -> Network {
        let factors = (0..n)
            .map(|i| Factor::new(vec![i, (i + 1) % n], vec![1.0, 2.0, 2.0, 1.0]))
            .collect();
        Network::new(vec![2; n], factors).unwrap()
    }

    fn grid(rows: usize, cols: usize) -> Network {
        let mut factors = Vec::new();
        for r in 0..rows {
            for c in 0..cols - 1 {
                factors.push(Factor::new(vec![r * cols + c, r * cols + c + 1], vec![1.0; 4]));
            }
        }
        for r in 0..rows - 1 {
            for c in 0..cols {
                factors.push(Factor::new(vec![r * cols + c, (r + 1) * cols + c], vec![1.0; 4]));
            }
        }
        Network::new(vec![2; rows * cols], factors).unwrap()
    }

    #[test]
    fn ring_of_six_at_eight_states() {
        let net = ring(6);
        let set = enumerate_clusters(&net, 8);
        assert_eq!(set.clusters.len(), 6);
        for c in &set.clusters {
            let i = c.interior[0];
            assert_eq!(c.interior.len(), 1);
            let mut expect = vec![(i + 5) % 6, (i + 1) % 6];
            expect.sort();
            assert_eq!(c.separator, expect);
            assert!(is_maximal(&net, c, 8));
        }
        assert!(set.uncovered.is_empty());
    }

    #[test]
    fn ring_matches_exhaustive_connected_search() {
        // Exhaustive: every connected arc whose cluster fits and is maximal.
        let net = ring(6);
        let mut exhaustive = Vec::new();
        for mask in 1u32..(1 << 6) - 1 {
            let interior: Vec<usize> = (0..6).filter(|v| mask & (1 << v) != 0).collect();
            let spec = ClusterSpec::from_interior(&net, interior);
            if spec.state_space <= 8 && is_maximal(&net, &spec, 8) {
                exhaustive.push(spec.interior);
            }
        }
        let greedy: Vec<VarSet> = enumerate_clusters(&net, 8).clusters.into_iter().map(|c| c.interior).collect();
        assert_eq!(greedy, exhaustive);
    }

    #[test]
    fn grid_at_thirty_two_states_is_node_plus_neighbours() {
        let net = grid(5, 5);
        let set = enumerate_clusters(&net, 32);
        for c in &set.clusters {
            assert!(c.state_space <= 32);
            assert!(is_maximal(&net, c, 32));
            // away from the border the budget admits exactly one node and its four neighbours
            let (r, col) = (c.interior[0] / 5, c.interior[0] % 5);
            if (1..4).contains(&r) && (1..4).contains(&col) {
                assert_eq!(c.interior.len(), 1);
                assert_eq!(c.separator.len(), 4);
            }
        }
        let centre = set.clusters.iter().find(|c| c.interior == vec![12]).unwrap();
        assert_eq!(centre.separator, vec![7, 11, 13, 17]);
    }

    #[test]
    fn high_degree_seed_is_uncovered() {
        // star: hub 0 with 6 leaves
        let factors = (1..=6).map(|i| Factor::new(vec![0, i], vec![1.0; 4])).collect();
        let net = Network::new(vec![2; 7], factors).unwrap();
        let set = enumerate_clusters(&net, 32);
        assert!(set.uncovered.contains(&0));
        // exhaustive: no interior containing the hub fits the budget
        for mask in 1u32..(1 << 7) {
            if mask & 1 == 0 {
                continue;
            }
            let interior: Vec<usize> = (0..7).filter(|v| mask & (1 << v) != 0).collect();
            assert!(ClusterSpec::from_interior(&net, interior).state_space > 32);
        }
        assert_eq!(net.state_space(&[0, 1, 2, 3, 4, 5, 6]), 128);
    }

    #[test]
    fn separators_separate() {
        let net = grid(4, 4);
        for budget in [32u128, 64, 256] {
            for c in enumerate_clusters(&net, budget).clusters {
                for f in net.factors() {
                    let hits_interior = f.scope().iter().any(|v| c.interior.contains(v));
                    let hits_outside = f.scope().iter().any(|v| !c.cluster.contains(v));
                    assert!(!(hits_interior && hits_outside));
                }
                assert!(is_maximal(&net, &c, budget));
            }
        }
    }

    #[test]
    fn marginal_sets_single() {
        let net = ring(3);
        let spec = ClusterSpec::from_interior(&net, vec![1]);
        let tasks = derive_marginal_sets(&net, &spec, 16);
        assert_eq!(
            tasks,
            vec![MarginalTask {
                mar: vec![1],
                oth: vec![],
                sep: vec![0, 2]
            }]
        );
    }

    #[test]
    fn marginal_sets_pair() {
        let net = ring(6);
        let spec = ClusterSpec::from_interior(&net, vec![1, 2]);
        let tasks = derive_marginal_sets(&net, &spec, 4);
        let mars: Vec<VarSet> = tasks.iter().map(|t| t.mar.clone()).collect();
        assert_eq!(mars, vec![vec![1], vec![2], vec![1, 2]]);
        assert_eq!(tasks[0].oth, vec![2]);
    }

    #[test]
    fn marginal_sets_counting() {
        let net = ring(8);
        let spec = ClusterSpec::from_interior(&net, vec![1, 2, 3, 4, 5]);
        assert_eq!(derive_marginal_sets(&net, &spec, 4).len(), 15);
        for t in derive_marginal_sets(&net, &spec, 4) {
            assert!(is_subset(&net.markov_blanket(&union(&t.mar, &t.oth)), &t.sep));
        }
    }
}
