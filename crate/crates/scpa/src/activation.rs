//! Active-source selection: pick exactly one direct source or one fusable
//! combination per region so that the total minimal updating rate is smallest.
//! Solved exactly by depth-first branch-and-bound over regions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{Instance, RegionSpec, SourceId};

/// Default exploration budget before falling back to the greedy pass.
pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

/// One way to serve a region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActivationOption {
    /// A single source from the region's direct set.
    Direct(SourceId),
    /// All members of one fusable combination.
    Combo { index: usize, members: Vec<SourceId> },
}

impl ActivationOption {
    pub fn members(&self) -> &[SourceId] {
        match self {
            ActivationOption::Direct(m) => std::slice::from_ref(m),
            ActivationOption::Combo { members, .. } => members,
        }
    }
}

/// Options for a region: its direct sources first, then its combinations.
pub fn enumerate_options(region: &RegionSpec) -> Vec<ActivationOption> {
    let mut options: Vec<ActivationOption> =
        region.direct.iter().map(|&m| ActivationOption::Direct(m)).collect();
    for (index, combo) in region.combos.iter().enumerate() {
        let mut members = combo.clone();
        members.sort_unstable();
        options.push(ActivationOption::Combo { index, members });
    }
    options
}

/// The option picked for one region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChosenOption {
    pub region: u32,
    /// Index into [`enumerate_options`] for that region.
    pub option_index: usize,
    pub members: Vec<SourceId>,
}

/// Output of the activation solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationResult {
    /// Chosen option per region, in instance order.
    pub chosen: Vec<ChosenOption>,
    /// Maximum scheduling interval per active source: its smallest deadline.
    pub max_interval: BTreeMap<SourceId, u64>,
    /// Regions each active source serves, ascending.
    pub regions_of: BTreeMap<SourceId, Vec<u32>>,
    /// Sum of minimal updating rates of the active sources.
    pub objective: f64,
    /// False when the node budget ran out and the greedy fallback answered.
    pub certified: bool,
}

impl ActivationResult {
    pub fn active_sources(&self) -> Vec<SourceId> {
        self.max_interval.keys().copied().collect()
    }

    /// Active set per region id.
    pub fn active_sets(&self) -> BTreeMap<u32, Vec<SourceId>> {
        self.chosen.iter().map(|c| (c.region, c.members.clone())).collect()
    }

    /// Minimal updating rate per active source (zero-rate sources omitted).
    pub fn rates(&self) -> BTreeMap<SourceId, f64> {
        self.max_interval.iter().map(|(&m, &u)| (m, 1.0 / u as f64)).collect()
    }

    /// The activation matrix: `q[m - 1][n - 1]` is true iff source m is
    /// activated for region n.
    pub fn q_matrix(&self, inst: &Instance) -> Vec<Vec<bool>> {
        let mut q = vec![vec![false; inst.regions.len()]; inst.num_sources as usize];
        for c in &self.chosen {
            for m in &c.members {
                q[m.0 as usize - 1][c.region as usize - 1] = true;
            }
        }
        q
    }
}

struct SearchContext<'a> {
    /// Regions in processing order (ascending deadline, then id).
    order: Vec<usize>,
    options: Vec<Vec<ActivationOption>>,
    regions: &'a [RegionSpec],
    /// Suffix lower bounds on remaining incremental cost, per order position.
    suffix_lb: Vec<f64>,
    budget: u64,
}

struct SearchState {
    /// Current smallest deadline per source (None = inactive).
    min_deadline: Vec<Option<u64>>,
    chosen: Vec<usize>,
    partial: f64,
    nodes: u64,
    exhausted: bool,
    best_objective: f64,
    best_chosen: Option<Vec<usize>>,
}

/// Exact solve with the default node budget.
pub fn solve_activation(inst: &Instance) -> ActivationResult {
    solve_activation_with_budget(inst, DEFAULT_NODE_BUDGET)
}

pub fn solve_activation_with_budget(inst: &Instance, budget: u64) -> ActivationResult {
    let num_sources = inst.num_sources as usize;
    let mut order: Vec<usize> = (0..inst.regions.len()).collect();
    order.sort_by_key(|&i| (inst.regions[i].deadline, inst.regions[i].id));
    let options: Vec<Vec<ActivationOption>> =
        inst.regions.iter().map(enumerate_options).collect();

    // The cheapest deadline any region could ever impose on each source; used
    // for an admissible bound on the incremental cost of unassigned regions.
    let mut cheapest_deadline = vec![u64::MAX; num_sources];
    for (i, opts) in options.iter().enumerate() {
        for option in opts {
            for m in option.members() {
                let slot = &mut cheapest_deadline[m.0 as usize - 1];
                *slot = (*slot).min(inst.regions[i].deadline);
            }
        }
    }
    let mut suffix_lb = vec![0.0; order.len() + 1];
    for pos in (0..order.len()).rev() {
        let region_idx = order[pos];
        let d = inst.regions[region_idx].deadline as f64;
        let region_lb = options[region_idx]
            .iter()
            .map(|option| {
                option
                    .members()
                    .iter()
                    .map(|m| {
                        let best = cheapest_deadline[m.0 as usize - 1] as f64;
                        (1.0 / d - 1.0 / best).max(0.0)
                    })
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        suffix_lb[pos] = suffix_lb[pos + 1] + region_lb;
    }

    let ctx = SearchContext { order, options, regions: &inst.regions, suffix_lb, budget };
    let mut state = SearchState {
        min_deadline: vec![None; num_sources],
        chosen: vec![0; inst.regions.len()],
        partial: 0.0,
        nodes: 0,
        exhausted: false,
        best_objective: f64::INFINITY,
        best_chosen: None,
    };
    descend(&ctx, &mut state, 0);

    let (chosen_indices, certified) = match state.best_chosen {
        Some(indices) if !state.exhausted => (indices, true),
        _ => (greedy_assignment(&ctx, num_sources), false),
    };
    assemble(inst, &ctx.options, &chosen_indices, certified)
}

fn descend(ctx: &SearchContext, state: &mut SearchState, pos: usize) {
    if state.exhausted {
        return;
    }
    if pos == ctx.order.len() {
        let objective = canonical_objective(&state.min_deadline);
        if objective < state.best_objective {
            state.best_objective = objective;
            state.best_chosen = Some(state.chosen.clone());
        }
        return;
    }
    let region_idx = ctx.order[pos];
    let deadline = ctx.regions[region_idx].deadline;
    for (option_index, option) in ctx.options[region_idx].iter().enumerate() {
        state.nodes += 1;
        if state.nodes > ctx.budget {
            state.exhausted = true;
            return;
        }
        let delta = incremental_cost(option, &state.min_deadline, deadline);
        // Guarded comparison: never prune a branch that exact arithmetic
        // would keep (the slack only admits extra exploration).
        if state.partial + delta + ctx.suffix_lb[pos + 1] >= state.best_objective + 1e-9 {
            continue;
        }
        let saved: Vec<(usize, Option<u64>)> = option
            .members()
            .iter()
            .map(|m| {
                let idx = m.0 as usize - 1;
                let old = state.min_deadline[idx];
                state.min_deadline[idx] =
                    Some(old.map_or(deadline, |cur| cur.min(deadline)));
                (idx, old)
            })
            .collect();
        state.chosen[region_idx] = option_index;
        state.partial += delta;
        descend(ctx, state, pos + 1);
        state.partial -= delta;
        for (idx, old) in saved.into_iter().rev() {
            state.min_deadline[idx] = old;
        }
    }
}

fn incremental_cost(option: &ActivationOption, min_deadline: &[Option<u64>], d: u64) -> f64 {
    option
        .members()
        .iter()
        .map(|m| match min_deadline[m.0 as usize - 1] {
            Some(cur) if cur <= d => 0.0,
            Some(cur) => 1.0 / d as f64 - 1.0 / cur as f64,
            None => 1.0 / d as f64,
        })
        .sum()
}

/// Objective recomputed from scratch in a fixed order, so equal assignments
/// always produce bit-identical sums.
fn canonical_objective(min_deadline: &[Option<u64>]) -> f64 {
    min_deadline
        .iter()
        .map(|d| d.map_or(0.0, |d| 1.0 / d as f64))
        .sum()
}

/// Budget fallback: cheapest incremental option per region, processing order
/// unchanged, ties to the lowest option index.
fn greedy_assignment(ctx: &SearchContext, num_sources: usize) -> Vec<usize> {
    let mut min_deadline = vec![None; num_sources];
    let mut chosen = vec![0usize; ctx.regions.len()];
    for &region_idx in &ctx.order {
        let deadline = ctx.regions[region_idx].deadline;
        let (best_index, _) = ctx.options[region_idx]
            .iter()
            .enumerate()
            .map(|(i, o)| (i, incremental_cost(o, &min_deadline, deadline)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
            .expect("regions always have at least one option");
        chosen[region_idx] = best_index;
        for m in ctx.options[region_idx][best_index].members() {
            let slot = &mut min_deadline[m.0 as usize - 1];
            *slot = Some(slot.map_or(deadline, |cur: u64| cur.min(deadline)));
        }
    }
    chosen
}

fn assemble(
    inst: &Instance,
    options: &[Vec<ActivationOption>],
    chosen_indices: &[usize],
    certified: bool,
) -> ActivationResult {
    let mut chosen = Vec::with_capacity(inst.regions.len());
    let mut max_interval: BTreeMap<SourceId, u64> = BTreeMap::new();
    let mut regions_of: BTreeMap<SourceId, Vec<u32>> = BTreeMap::new();
    for (region, &option_index) in inst.regions.iter().zip(chosen_indices) {
        let option = &options[region.id as usize - 1][option_index];
        let members = option.members().to_vec();
        for &m in &members {
            let entry = max_interval.entry(m).or_insert(region.deadline);
            *entry = (*entry).min(region.deadline);
            regions_of.entry(m).or_default().push(region.id);
        }
        chosen.push(ChosenOption { region: region.id, option_index, members });
    }
    for regions in regions_of.values_mut() {
        regions.sort_unstable();
    }
    let objective = max_interval.values().map(|&u| 1.0 / u as f64).sum();
    ActivationResult { chosen, max_interval, regions_of, objective, certified }
}

/// Test oracle: tries every combination of options. Exponential; only for
/// small instances.
pub fn solve_activation_exhaustive(inst: &Instance) -> ActivationResult {
    let options: Vec<Vec<ActivationOption>> =
        inst.regions.iter().map(enumerate_options).collect();
    let mut chosen = vec![0usize; inst.regions.len()];
    let mut best: Option<(f64, Vec<usize>)> = None;
    fn recurse(
        inst: &Instance,
        options: &[Vec<ActivationOption>],
        chosen: &mut Vec<usize>,
        region: usize,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        if region == inst.regions.len() {
            let mut min_deadline = vec![None; inst.num_sources as usize];
            for (r, &idx) in inst.regions.iter().zip(chosen.iter()) {
                for m in options[r.id as usize - 1][idx].members() {
                    let slot = &mut min_deadline[m.0 as usize - 1];
                    *slot = Some(slot.map_or(r.deadline, |cur: u64| cur.min(r.deadline)));
                }
            }
            let objective = canonical_objective(&min_deadline);
            if best.as_ref().is_none_or(|(b, _)| objective < *b) {
                *best = Some((objective, chosen.clone()));
            }
            return;
        }
        for idx in 0..options[region].len() {
            chosen[region] = idx;
            recurse(inst, options, chosen, region + 1, best);
        }
    }
    recurse(inst, &options, &mut chosen, 0, &mut best);
    let (_, indices) = best.expect("nonempty option space");
    assemble(inst, &options, &indices, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RegionSpec;

    fn region(id: u32, d: u64, direct: &[u32], combos: &[&[u32]]) -> RegionSpec {
        RegionSpec {
            id,
            deadline: d,
            tolerance: 1,
            direct: direct.iter().map(|&m| SourceId(m)).collect(),
            combos: combos
                .iter()
                .map(|c| c.iter().map(|&m| SourceId(m)).collect())
                .collect(),
        }
    }

    #[test]
    fn option_enumeration_counts() {
        let r = region(2, 5, &[2], &[&[1, 5]]);
        assert_eq!(enumerate_options(&r).len(), 2);
        let r = region(1, 5, &[1, 2], &[]);
        assert_eq!(enumerate_options(&r).len(), 2);
        let r = region(1, 5, &[1], &[&[2, 3], &[2, 4]]);
        assert_eq!(enumerate_options(&r).len(), 3);
    }

    #[test]
    fn single_region_direct_activation() {
        let inst = Instance {
            label: "single".into(),
            num_sources: 1,
            regions: vec![region(1, 5, &[1], &[])],
        };
        let act = solve_activation(&inst);
        assert_eq!(act.active_sources(), vec![SourceId(1)]);
        assert_eq!(act.max_interval[&SourceId(1)], 5);
        assert!((act.rates()[&SourceId(1)] - 0.2).abs() < 1e-12);
        assert!(act.certified);
    }

    #[test]
    fn shared_sources_make_combos_free() {
        // Sources 1 and 2 are forced by their own regions; region 3 then
        // prefers the zero-cost combination over a fresh direct source.
        let inst = Instance {
            label: "combo wins".into(),
            num_sources: 3,
            regions: vec![
                region(1, 4, &[1], &[]),
                region(2, 4, &[2], &[]),
                region(3, 8, &[3], &[&[1, 2]]),
            ],
        };
        let act = solve_activation(&inst);
        assert_eq!(act.active_sources(), vec![SourceId(1), SourceId(2)]);
        assert_eq!(act.chosen[2].option_index, 1);
        assert_eq!(act.regions_of[&SourceId(1)], vec![1, 3]);
    }

    #[test]
    fn exactly_one_option_per_region_in_q() {
        let inst = Instance {
            label: "exactly one".into(),
            num_sources: 4,
            regions: vec![
                region(1, 3, &[1], &[&[2, 3]]),
                region(2, 5, &[2, 4], &[]),
            ],
        };
        let act = solve_activation(&inst);
        let q = act.q_matrix(&inst);
        for region in &inst.regions {
            let n = region.id as usize - 1;
            let direct_hits = region
                .direct
                .iter()
                .filter(|m| q[m.0 as usize - 1][n])
                .count();
            let combo_hits = region
                .combos
                .iter()
                .filter(|combo| combo.iter().all(|m| q[m.0 as usize - 1][n]))
                .count();
            assert_eq!(direct_hits + combo_hits, 1, "region {}", region.id);
        }
    }

    #[test]
    fn objective_matches_recomputation() {
        let inst = Instance {
            label: "objective".into(),
            num_sources: 4,
            regions: vec![
                region(1, 2, &[1], &[]),
                region(2, 6, &[2], &[&[3, 4]]),
                region(3, 3, &[3], &[]),
            ],
        };
        let act = solve_activation(&inst);
        let recomputed: f64 = act.rates().values().sum();
        assert_eq!(act.objective, recomputed);
    }

    #[test]
    fn branch_and_bound_matches_exhaustive_small() {
        let inst = Instance {
            label: "cross check".into(),
            num_sources: 5,
            regions: vec![
                region(1, 4, &[1], &[&[2, 3]]),
                region(2, 3, &[2], &[&[4, 5]]),
                region(3, 7, &[5], &[&[1, 4]]),
            ],
        };
        let fast = solve_activation(&inst);
        let slow = solve_activation_exhaustive(&inst);
        assert_eq!(fast.objective, slow.objective);
        assert_eq!(fast.chosen, slow.chosen);
    }

    #[test]
    fn budget_exhaustion_falls_back_to_greedy() {
        let regions: Vec<RegionSpec> = (1..=6u32)
            .map(|id| region(id, 4 + id as u64, &[id], &[&[((id % 6) + 1), ((id % 3) + 1)]]))
            .collect();
        let mut inst = Instance { label: "budget".into(), num_sources: 6, regions };
        for r in &mut inst.regions {
            r.combos.retain(|c| !c.contains(&r.direct[0]) && c[0] != c[1]);
        }
        let act = solve_activation_with_budget(&inst, 3);
        assert!(!act.certified);
        // The greedy answer still activates a valid option per region.
        assert_eq!(act.chosen.len(), inst.regions.len());
    }
}
