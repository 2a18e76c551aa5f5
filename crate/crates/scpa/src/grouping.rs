//! Groups active sources and derives scheduling intervals. Sources that
//! collaborate for a region must end up with a divisibility chain of
//! intervals, so the collaboration graph is split into connected components,
//! components are clustered around candidate base intervals by distance, and
//! each group's intervals are rounded down onto a chain.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::activation::ActivationResult;
use crate::arith::{ceil_div, gcd};
use crate::model::SourceId;

/// Sources co-activated for at least one region, with connected components.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollaborationGraph {
    pub vertices: Vec<SourceId>,
    /// Undirected edges, stored with the smaller id first.
    pub edges: Vec<(SourceId, SourceId)>,
    /// Vertex sets of the connected components, each ascending, ordered by
    /// their smallest member.
    pub components: Vec<Vec<SourceId>>,
}

/// Builds the collaboration graph from the activation's per-region sets.
pub fn build_graph(act: &ActivationResult) -> CollaborationGraph {
    let vertices: Vec<SourceId> = act.active_sources();
    let index: BTreeMap<SourceId, usize> =
        vertices.iter().enumerate().map(|(i, &m)| (m, i)).collect();
    let mut edges = Vec::new();
    for chosen in &act.chosen {
        for (i, &a) in chosen.members.iter().enumerate() {
            for &b in &chosen.members[i + 1..] {
                let edge = (a.min(b), a.max(b));
                if !edges.contains(&edge) {
                    edges.push(edge);
                }
            }
        }
    }
    edges.sort_unstable();

    // Union-find over the vertex indices.
    let mut parent: Vec<usize> = (0..vertices.len()).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    for &(a, b) in &edges {
        let ra = find(&mut parent, index[&a]);
        let rb = find(&mut parent, index[&b]);
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut by_root: BTreeMap<usize, Vec<SourceId>> = BTreeMap::new();
    for (i, &m) in vertices.iter().enumerate() {
        by_root.entry(find(&mut parent, i)).or_default().push(m);
    }
    let components = by_root.into_values().collect();
    CollaborationGraph { vertices, edges, components }
}

/// Extra rate a component pays to join a group with base `e`: each member's
/// cap is rounded down to a multiple of the base. Infinite when some member's
/// cap is below the base.
pub fn distance(base: u64, component: &[SourceId], caps: &BTreeMap<SourceId, u64>) -> f64 {
    component
        .iter()
        .map(|m| {
            let cap = caps[m];
            if cap >= base {
                1.0 / ((cap / base) * base) as f64 - 1.0 / cap as f64
            } else {
                f64::INFINITY
            }
        })
        .sum()
}

/// Rounds each member's cap down onto a divisibility chain seeded at `base`:
/// members ascending by cap, each interval the largest multiple of the chain
/// value so far that fits under the member's cap.
pub fn derive_cd_intervals(
    members: &[(SourceId, u64)],
    base: u64,
) -> BTreeMap<SourceId, u64> {
    debug_assert!(members.iter().all(|&(_, cap)| cap >= base));
    let mut ordered: Vec<(SourceId, u64)> = members.to_vec();
    ordered.sort_by_key(|&(m, cap)| (cap, m));
    let mut chain = base;
    let mut intervals = BTreeMap::new();
    for (m, cap) in ordered {
        let c = (cap / chain) * chain;
        intervals.insert(m, c);
        chain = c;
    }
    intervals
}

/// One interval group of the final plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub members: Vec<SourceId>,
    /// Base of the derived chain: its smallest interval.
    pub base: u64,
    pub intervals: BTreeMap<SourceId, u64>,
}

/// Grouping outcome: groups with chain intervals and the rate-sum objective.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingPlan {
    pub groups: Vec<Group>,
    /// Sum over groups of ceil(sum of 1/c), the channel-count estimate.
    pub objective: u64,
}

impl GroupingPlan {
    /// Union of the per-group interval maps.
    pub fn intervals(&self) -> BTreeMap<SourceId, u64> {
        self.groups
            .iter()
            .flat_map(|g| g.intervals.iter().map(|(&m, &c)| (m, c)))
            .collect()
    }
}

/// Search limits for [`run_dc`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DcConfig {
    /// Cap on the number of groups tried; None means min(components, caps).
    pub max_groups: Option<usize>,
    /// When set, the only base combination tried for two groups. Used by the
    /// experiment preset that pairs bases 2 and 3.
    pub two_group_bases: Option<(u64, u64)>,
}

impl DcConfig {
    /// Full search over all base subsets.
    pub fn unrestricted() -> Self {
        Self { max_groups: None, two_group_bases: None }
    }

    /// At most two groups; the only two-group base pair is {2, 3}.
    pub fn experiment_preset() -> Self {
        Self { max_groups: Some(2), two_group_bases: Some((2, 3)) }
    }
}

impl Default for DcConfig {
    fn default() -> Self {
        Self::unrestricted()
    }
}

/// Distance-based clustering: tries every candidate (group count, base set),
/// assigns each component to its minimum-distance group, derives chain
/// intervals per group, and keeps the plan with the smallest objective.
/// Ties go to fewer groups, then to the lexicographically smaller base set.
pub fn run_dc(
    act: &ActivationResult,
    graph: &CollaborationGraph,
    config: &DcConfig,
) -> GroupingPlan {
    let caps = &act.max_interval;
    let mut cap_values: Vec<u64> = caps.values().copied().collect();
    cap_values.sort_unstable();
    cap_values.dedup();

    let hard_limit = graph.components.len().min(cap_values.len()).max(1);
    let limit = config.max_groups.map_or(hard_limit, |m| m.min(hard_limit).max(1));

    let mut best: Option<(u64, usize, Vec<u64>, GroupingPlan)> = None;
    for group_count in 1..=limit {
        for bases in base_combinations(&cap_values, group_count, config) {
            let min_base = *bases.iter().min().expect("nonempty base set");
            // A source whose cap falls below every base fits no group.
            if caps.values().any(|&cap| cap < min_base) {
                continue;
            }
            let plan = assign_and_derive(graph, caps, &bases);
            let candidate = (plan.objective, group_count, bases, plan);
            let better = match &best {
                None => true,
                Some((obj, count, base_set, _)) => {
                    (candidate.0, candidate.1, &candidate.2) < (*obj, *count, base_set)
                }
            };
            if better {
                best = Some(candidate);
            }
        }
    }
    best.expect("single-group base at the minimum cap is always finite").3
}

fn base_combinations(cap_values: &[u64], count: usize, config: &DcConfig) -> Vec<Vec<u64>> {
    if count == 2 {
        if let Some((a, b)) = config.two_group_bases {
            let pair = vec![a.min(b), a.max(b)];
            return if pair[0] == pair[1] { vec![vec![pair[0]]] } else { vec![pair] };
        }
    }
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(count);
    subsets(cap_values, count, 0, &mut current, &mut out);
    out
}

fn subsets(values: &[u64], want: usize, start: usize, current: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
    if current.len() == want {
        out.push(current.clone());
        return;
    }
    for i in start..values.len() {
        current.push(values[i]);
        subsets(values, want, i + 1, current, out);
        current.pop();
    }
}

fn assign_and_derive(
    graph: &CollaborationGraph,
    caps: &BTreeMap<SourceId, u64>,
    bases: &[u64],
) -> GroupingPlan {
    let mut group_members: Vec<Vec<(SourceId, u64)>> = vec![Vec::new(); bases.len()];
    for component in &graph.components {
        let chosen = bases
            .iter()
            .enumerate()
            .map(|(i, &e)| (distance(e, component, caps), e, i))
            .filter(|(d, _, _)| d.is_finite())
            // Ties between groups go to the smaller base.
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)))
            .map(|(_, _, i)| i)
            .expect("skip test keeps one finite group per component");
        for &m in component {
            group_members[chosen].push((m, caps[&m]));
        }
    }
    let mut groups = Vec::new();
    let mut objective = 0u64;
    for (i, members) in group_members.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let intervals = derive_cd_intervals(&members, bases[i]);
        // Exact rate-sum ceiling: with chain intervals the largest interval is
        // a common multiple of all of them.
        let chain_max = *intervals.values().max().unwrap();
        let scaled: u64 = intervals.values().map(|&c| chain_max / c).sum();
        objective += ceil_div(scaled, chain_max);
        let mut ids: Vec<SourceId> = intervals.keys().copied().collect();
        ids.sort_unstable();
        let base = *intervals.values().min().unwrap();
        groups.push(Group { members: ids, base, intervals });
    }
    GroupingPlan { groups, objective }
}

/// Smallest fusion tolerance any offsets can achieve for a member with
/// interval `c_m` against a trigger source with interval `c_z`.
pub fn min_alignment_tolerance(c_m: u64, c_z: u64) -> u64 {
    c_m - gcd(c_m, c_z)
}

/// Whether offsets exist keeping the member/trigger gap within `tolerance` at
/// every trigger transmission.
pub fn alignment_feasible(c_m: u64, c_z: u64, tolerance: u64) -> bool {
    tolerance >= min_alignment_tolerance(c_m, c_z)
}
