//! Offset selection: given fixed intervals, choose first-transmission offsets
//! that keep every fusion aligned within its region's tolerance while
//! minimizing the number of channels (the peak per-slot load over one
//! hyperperiod). Exact branch-and-bound.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::arith::{ceil_div, gcd, lcm_all, pos_mod};
use crate::error::{Error, Result};
use crate::model::SourceId;
use crate::sim::MAX_HYPERPERIOD;

/// Alignment requirements of one region: its members, the trigger source
/// whose every transmission must fuse, and the generation-time tolerance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionConstraint {
    pub region: u32,
    pub members: Vec<SourceId>,
    /// The member with the largest interval; each of its transmissions must
    /// trigger a fusion.
    pub trigger: SourceId,
    pub tolerance: u64,
}

/// The offset problem: intervals are fixed, offsets are free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffsetProblem {
    pub intervals: BTreeMap<SourceId, u64>,
    pub regions: Vec<RegionConstraint>,
    pub hyperperiod: u64,
}

/// The member with the largest interval; ties go to the largest id. With equal
/// intervals the trigger role is symmetric, so any deterministic choice keeps
/// the search exact.
pub fn designate_trigger(members: &[SourceId], intervals: &BTreeMap<SourceId, u64>) -> SourceId {
    *members
        .iter()
        .max_by_key(|&&m| (intervals[&m], m))
        .expect("regions have at least one member")
}

impl OffsetProblem {
    /// Builds the problem: designates each region's trigger and checks the
    /// hyperperiod is workable. `regions` pairs member lists with tolerances.
    pub fn new(
        intervals: BTreeMap<SourceId, u64>,
        regions: Vec<(u32, Vec<SourceId>, u64)>,
    ) -> Result<Self> {
        for (&m, &c) in &intervals {
            if c == 0 {
                return Err(Error::InvalidInstance(format!(
                    "source {m}: interval must be >= 1"
                )));
            }
        }
        for (region, members, _) in &regions {
            if members.is_empty() {
                return Err(Error::InvalidInstance(format!(
                    "region {region}: member list is empty"
                )));
            }
            for m in members {
                if !intervals.contains_key(m) {
                    return Err(Error::InvalidInstance(format!(
                        "region {region}: member {m} has no interval"
                    )));
                }
            }
        }
        let hyperperiod = lcm_all(intervals.values().copied())?;
        if hyperperiod > MAX_HYPERPERIOD {
            return Err(Error::HyperperiodTooLarge {
                hyperperiod,
                limit: MAX_HYPERPERIOD,
            });
        }
        let regions = regions
            .into_iter()
            .map(|(region, mut members, tolerance)| {
                members.sort_unstable();
                let trigger = designate_trigger(&members, &intervals);
                RegionConstraint { region, members, trigger, tolerance }
            })
            .collect();
        Ok(Self { intervals, regions, hyperperiod })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ProblemFile = serde_json::from_str(text)?;
        let intervals = file
            .intervals
            .into_iter()
            .map(|e| (SourceId(e.m), e.c))
            .collect();
        let regions = file
            .regions
            .into_iter()
            .map(|r| (r.id, r.members.into_iter().map(SourceId).collect(), r.tolerance))
            .collect();
        Self::new(intervals, regions)
    }

    pub fn to_json_string(&self) -> String {
        let file = ProblemFile {
            intervals: self
                .intervals
                .iter()
                .map(|(&m, &c)| IntervalEntry { m: m.0, c })
                .collect(),
            regions: self
                .regions
                .iter()
                .map(|r| RegionEntry {
                    id: r.region,
                    members: r.members.iter().map(|m| m.0).collect(),
                    tolerance: r.tolerance,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("problem serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct ProblemFile {
    intervals: Vec<IntervalEntry>,
    regions: Vec<RegionEntry>,
}

#[derive(Serialize, Deserialize)]
struct IntervalEntry {
    m: u32,
    c: u64,
}

#[derive(Serialize, Deserialize)]
struct RegionEntry {
    id: u32,
    members: Vec<u32>,
    #[serde(rename = "T")]
    tolerance: u64,
}

/// Gap between the trigger's (i+1)-th transmission and the latest transmission
/// of a member with interval `c_m` and offset `o_m`.
pub fn staleness(o_m: u64, c_m: u64, o_z: u64, c_z: u64, i: u64) -> u64 {
    pos_mod((i * c_z + o_z) as i64 - o_m as i64, c_m)
}

/// Checks the alignment constraints: members never transmit after their
/// trigger's offset, and the gap at trigger transmissions stays within the
/// tolerance.
pub fn constraints_satisfied(offsets: &BTreeMap<SourceId, u64>, p: &OffsetProblem) -> bool {
    p.regions.iter().all(|r| region_ok(r, offsets, &p.intervals))
}

fn region_ok(
    r: &RegionConstraint,
    offsets: &BTreeMap<SourceId, u64>,
    intervals: &BTreeMap<SourceId, u64>,
) -> bool {
    let o_z = offsets[&r.trigger];
    r.members.iter().all(|&m| {
        let o_m = offsets[&m];
        m == r.trigger
            || (o_m <= o_z && pos_mod(o_z as i64 - o_m as i64, intervals[&m]) <= r.tolerance)
    })
}

/// A feasible offset map and the channel count it achieves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffsetSolution {
    pub offsets: BTreeMap<SourceId, u64>,
    pub channels: u64,
    /// True when the search ran to completion: the count is proven minimal.
    /// False means the node budget ran out and this is the best found.
    pub certified: bool,
}

/// Search knobs for [`solve_offsets_with`].
#[derive(Debug, Clone, Default)]
pub struct OffsetSearchOptions {
    /// Node cap; `None` uses [`DEFAULT_OFFSET_NODE_BUDGET`].
    pub node_budget: Option<u64>,
    /// A feasible assignment used as the initial incumbent. The result is
    /// never worse than the warm start.
    pub warm_start: Option<BTreeMap<SourceId, u64>>,
}

/// Nodes explored before the search settles for the best assignment found.
pub const DEFAULT_OFFSET_NODE_BUDGET: u64 = 2_000_000;

/// Minimum-peak offsets with default search options.
pub fn solve_offsets(p: &OffsetProblem) -> Result<OffsetSolution> {
    solve_offsets_with(p, &OffsetSearchOptions::default())
}

/// Minimum-peak offsets by depth-first branch-and-bound. Sources are placed
/// in descending interval order (ties by descending id), which puts every
/// region's trigger before its other members, so each member's candidates can
/// be filtered against already-fixed triggers. Symmetric sources keep
/// non-increasing offsets, and residue-class bounds close subtrees whose
/// congruence structure already forces the incumbent. The search is exact
/// whenever it finishes inside the node budget.
pub fn solve_offsets_with(
    p: &OffsetProblem,
    options: &OffsetSearchOptions,
) -> Result<OffsetSolution> {
    if p.intervals.is_empty() {
        return Ok(OffsetSolution { offsets: BTreeMap::new(), channels: 0, certified: true });
    }
    let mut order: Vec<SourceId> = p.intervals.keys().copied().collect();
    order.sort_by_key(|&m| (std::cmp::Reverse(p.intervals[&m]), std::cmp::Reverse(m)));

    let horizon = p.hyperperiod as usize;
    let total_firings: u64 = p.intervals.values().map(|&c| p.hyperperiod / c).sum();
    let global_lb = ceil_div(total_firings, p.hyperperiod).max(1);

    // Per source, the member-side constraints it must honor: (trigger,
    // tolerance) pairs.
    let mut member_constraints: BTreeMap<SourceId, Vec<(SourceId, u64)>> = BTreeMap::new();
    for r in &p.regions {
        for &m in &r.members {
            if m != r.trigger {
                member_constraints.entry(m).or_default().push((r.trigger, r.tolerance));
            }
        }
    }
    for constraints in member_constraints.values_mut() {
        constraints.sort_unstable();
    }

    // Interchangeability classes: sources with the same interval, the same
    // member-side constraints, and no trigger role can be permuted freely, so
    // their offsets are forced non-increasing along the placement order.
    let triggers: std::collections::BTreeSet<SourceId> = p
        .regions
        .iter()
        .filter(|r| r.members.len() >= 2)
        .map(|r| r.trigger)
        .collect();
    let mut class_ids: BTreeMap<SourceId, usize> = BTreeMap::new();
    let mut signatures: Vec<(u64, Vec<(SourceId, u64)>)> = Vec::new();
    for (&m, &c) in &p.intervals {
        if triggers.contains(&m) {
            continue;
        }
        let signature = (c, member_constraints.get(&m).cloned().unwrap_or_default());
        let id = match signatures.iter().position(|s| *s == signature) {
            Some(id) => id,
            None => {
                signatures.push(signature);
                signatures.len() - 1
            }
        };
        class_ids.insert(m, id);
    }

    let residue_bounds = build_residue_bounds(p);
    let mut search = OffsetSearch {
        problem: p,
        order,
        member_constraints,
        class_ids,
        class_stack: vec![Vec::new(); signatures.len()],
        residue_bounds,
        loads: vec![0u32; horizon],
        offsets: BTreeMap::new(),
        peak: 0,
        global_lb,
        best: None,
        nodes: 0,
        node_budget: options.node_budget.unwrap_or(DEFAULT_OFFSET_NODE_BUDGET),
        exhausted: false,
    };
    search.global_lb = search.lower_bound().max(chain_tree_bound(p));
    for warm in [options.warm_start.clone(), balanced_construction(p)].into_iter().flatten() {
        if warm.len() == p.intervals.len() && constraints_satisfied(&warm, p) {
            let peak = peak_load(&warm, p);
            if peak < search.incumbent() {
                search.best = Some((warm, peak));
            }
        }
    }
    search.descend(0);
    let certified = !search.exhausted;
    match search.best {
        Some((offsets, channels)) => Ok(OffsetSolution { offsets, channels, certified }),
        None => Err(Error::OffsetConstraintsUnsatisfiable),
    }
}

/// Exact minimum peak of every chain-structured subset of sources, maximized
/// over the maximal divisibility chains among the distinct interval values.
///
/// A source with interval c loads every slot of one residue class mod c, so
/// along a chain v1 | v2 | .. the classes refine into a tree and a slot's
/// load from the subset is the sum on its root-to-leaf path. Balancing each
/// level greedily minimizes the maximum path sum, and the subset's own peak
/// lower-bounds the whole schedule's.
fn chain_tree_bound(p: &OffsetProblem) -> u64 {
    let mut values: Vec<u64> = p.intervals.values().copied().collect();
    values.sort_unstable();
    values.dedup();
    if values.is_empty() || *values.last().unwrap() > 4096 {
        return 0;
    }
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for &c in p.intervals.values() {
        *counts.entry(c).or_insert(0) += 1;
    }
    let mut best = 0;
    let mut chain = Vec::new();
    enumerate_chains(&values, 0, &mut chain, &mut |chain| {
        best = best.max(balanced_chain_peak(chain, &counts));
    });
    best
}

/// Visits every maximal divisibility chain of `values` (ascending).
fn enumerate_chains(values: &[u64], start: usize, chain: &mut Vec<u64>, visit: &mut impl FnMut(&[u64])) {
    let mut extended = false;
    for i in start..values.len() {
        let v = values[i];
        if chain.last().is_none_or(|&prev| v.is_multiple_of(prev) && v > prev) {
            extended = true;
            chain.push(v);
            enumerate_chains(values, i + 1, chain, visit);
            chain.pop();
        }
    }
    if !extended && !chain.is_empty() {
        visit(chain);
    }
}

fn balanced_chain_peak(chain: &[u64], counts: &BTreeMap<u64, u64>) -> u64 {
    let mut classes: Vec<u64> = Vec::new();
    let mut width = 1;
    for &v in chain {
        let grow = (v / width) as usize;
        width = v;
        if classes.is_empty() {
            classes = vec![0; grow];
        } else {
            classes = classes.iter().flat_map(|&l| std::iter::repeat_n(l, grow)).collect();
        }
        for _ in 0..counts.get(&v).copied().unwrap_or(0) {
            let lightest = (0..classes.len()).min_by_key(|&i| classes[i]).unwrap();
            classes[lightest] += 1;
        }
    }
    classes.into_iter().max().unwrap_or(0)
}

/// Greedy balanced construction used as a warm start: sources ascending by
/// interval, each taking the feasible offset with the lightest footprint.
/// On chain-structured interval sets this mirrors the level-wise balancing of
/// [`chain_tree_bound`], so it often starts at the optimum; where the
/// alignment constraints get in the way it may fail, which is fine.
fn balanced_construction(p: &OffsetProblem) -> Option<BTreeMap<SourceId, u64>> {
    let mut order: Vec<SourceId> = p.intervals.keys().copied().collect();
    order.sort_by_key(|&m| (p.intervals[&m], m));
    let mut loads = vec![0u64; p.hyperperiod as usize];
    let mut offsets: BTreeMap<SourceId, u64> = BTreeMap::new();
    for &m in &order {
        let c = p.intervals[&m];
        let candidate = (1..=c)
            .filter(|&o| pairwise_allowed(p, &offsets, m, o))
            .map(|o| {
                let mut tallest = 0;
                let mut sum = 0;
                let mut t = o;
                while t <= p.hyperperiod {
                    let load = loads[(t - 1) as usize];
                    tallest = tallest.max(load + 1);
                    sum += load;
                    t += c;
                }
                (tallest, sum, o)
            })
            .min()?;
        let o = candidate.2;
        let mut t = o;
        while t <= p.hyperperiod {
            loads[(t - 1) as usize] += 1;
            t += c;
        }
        offsets.insert(m, o);
    }
    Some(offsets)
}

/// Alignment check of one tentative offset against every already-placed
/// counterpart, in either role.
fn pairwise_allowed(
    p: &OffsetProblem,
    placed: &BTreeMap<SourceId, u64>,
    m: SourceId,
    o: u64,
) -> bool {
    p.regions.iter().all(|r| {
        if !r.members.contains(&m) {
            return true;
        }
        if m == r.trigger {
            r.members.iter().filter(|&&other| other != m).all(|other| {
                match placed.get(other) {
                    Some(&o_member) => {
                        o_member <= o
                            && pos_mod(o as i64 - o_member as i64, p.intervals[other])
                                <= r.tolerance
                    }
                    None => true,
                }
            })
        } else {
            match placed.get(&r.trigger) {
                Some(&o_z) => {
                    o <= o_z && pos_mod(o_z as i64 - o as i64, p.intervals[&m]) <= r.tolerance
                }
                None => true,
            }
        }
    })
}

/// Residue-class load bounds, one per divisor q of the hyperperiod. A source
/// whose interval is divisible by q fires only in one residue class mod q; a
/// source with interval coprime to q spreads evenly; anything in between is
/// relaxed to fluid load. Whichever class ends up fullest forces the peak.
fn build_residue_bounds(p: &OffsetProblem) -> Vec<ResidueBound> {
    (2u64..=32)
        .filter(|&q| p.hyperperiod.is_multiple_of(q) && q < p.hyperperiod)
        .map(|q| {
            let mut even_per_class = 0;
            let mut fluid = 0;
            let mut rem_flexible = 0;
            for &c in p.intervals.values() {
                let firings = p.hyperperiod / c;
                if c.is_multiple_of(q) {
                    rem_flexible += firings;
                } else if gcd(c, q) == 1 {
                    even_per_class += firings / q;
                } else {
                    fluid += firings;
                }
            }
            ResidueBound {
                q,
                class_fixed: vec![0; q as usize],
                even_per_class,
                fluid,
                rem_flexible,
            }
        })
        .collect()
}

/// Per-modulus bookkeeping for the residue-class bound.
struct ResidueBound {
    q: u64,
    /// Placed load per residue class from sources with q-divisible intervals.
    class_fixed: Vec<u64>,
    /// Per-class load from sources that spread evenly; offset-independent.
    even_per_class: u64,
    /// Load from sources pinned to a strict subset of classes, relaxed to
    /// freely distributable; offset-independent.
    fluid: u64,
    /// Firings of still-flexible q-divisible sources (placed ones removed).
    rem_flexible: u64,
}

impl ResidueBound {
    /// Admissible peak bound: distribute the flexible firings as favorably as
    /// possible, then divide the fullest class by its slot count.
    fn bound(&self, hyperperiod: u64) -> u64 {
        let q = self.q;
        let tallest = self.class_fixed.iter().max().copied().unwrap_or(0) + self.even_per_class;
        let total: u64 = self.class_fixed.iter().sum::<u64>()
            + q * self.even_per_class
            + self.fluid
            + self.rem_flexible;
        let balanced = ceil_div(total, q);
        ceil_div(tallest.max(balanced), hyperperiod / q)
    }
}

struct OffsetSearch<'a> {
    problem: &'a OffsetProblem,
    order: Vec<SourceId>,
    member_constraints: BTreeMap<SourceId, Vec<(SourceId, u64)>>,
    /// Interchangeability class per symmetric source.
    class_ids: BTreeMap<SourceId, usize>,
    /// Offsets already placed per class; the next member may not exceed the
    /// last one.
    class_stack: Vec<Vec<u64>>,
    residue_bounds: Vec<ResidueBound>,
    loads: Vec<u32>,
    offsets: BTreeMap<SourceId, u64>,
    peak: u64,
    /// Root bound: the peak can never fall below it, so matching it ends the
    /// search.
    global_lb: u64,
    best: Option<(BTreeMap<SourceId, u64>, u64)>,
    nodes: u64,
    node_budget: u64,
    exhausted: bool,
}

impl OffsetSearch<'_> {
    fn incumbent(&self) -> u64 {
        self.best.as_ref().map_or(u64::MAX, |(_, k)| *k)
    }

    fn optimal_found(&self) -> bool {
        self.incumbent() <= self.global_lb
    }

    /// Largest admissible bound available in the current state.
    fn lower_bound(&self) -> u64 {
        self.residue_bounds
            .iter()
            .map(|rb| rb.bound(self.problem.hyperperiod))
            .fold(self.global_lb.max(self.peak), u64::max)
    }

    fn descend(&mut self, pos: usize) {
        if self.optimal_found() || self.exhausted {
            return;
        }
        if pos == self.order.len() {
            if self.peak < self.incumbent() {
                self.best = Some((self.offsets.clone(), self.peak));
            }
            return;
        }
        if self.lower_bound() >= self.incumbent() {
            return;
        }
        let m = self.order[pos];
        let c = self.problem.intervals[&m];
        let cap = self
            .class_ids
            .get(&m)
            .and_then(|&id| self.class_stack[id].last().copied())
            .unwrap_or(c);
        let mut candidates: Vec<(u64, u64)> = (1..=cap.min(c))
            .filter(|&o| self.offset_allowed(m, o))
            .map(|o| (self.projected_peak(o, c), o))
            .collect();
        candidates.sort_unstable();
        for (projected, o) in candidates {
            if projected >= self.incumbent() {
                // Candidates are sorted by projected peak; the rest only get worse.
                break;
            }
            self.nodes += 1;
            if self.nodes > self.node_budget {
                self.exhausted = true;
                return;
            }
            let saved_peak = self.peak;
            self.apply(m, o, c, projected);
            self.descend(pos + 1);
            self.unapply(m, o, c, saved_peak);
            if self.optimal_found() || self.exhausted {
                return;
            }
        }
    }

    /// Member-side filtering against triggers fixed earlier in the order.
    fn offset_allowed(&self, m: SourceId, o: u64) -> bool {
        let Some(constraints) = self.member_constraints.get(&m) else {
            return true;
        };
        let c_m = self.problem.intervals[&m];
        constraints.iter().all(|&(trigger, tolerance)| {
            match self.offsets.get(&trigger) {
                Some(&o_z) => o <= o_z && pos_mod(o_z as i64 - o as i64, c_m) <= tolerance,
                None => true,
            }
        })
    }

    fn projected_peak(&self, o: u64, c: u64) -> u64 {
        let mut highest = self.peak;
        let mut t = o;
        while t <= self.problem.hyperperiod {
            highest = highest.max(self.loads[(t - 1) as usize] as u64 + 1);
            t += c;
        }
        highest
    }

    fn apply(&mut self, m: SourceId, o: u64, c: u64, projected: u64) {
        let mut t = o;
        while t <= self.problem.hyperperiod {
            self.loads[(t - 1) as usize] += 1;
            t += c;
        }
        self.peak = projected;
        self.offsets.insert(m, o);
        if let Some(&id) = self.class_ids.get(&m) {
            self.class_stack[id].push(o);
        }
        let firings = self.problem.hyperperiod / c;
        for rb in &mut self.residue_bounds {
            if c.is_multiple_of(rb.q) {
                rb.class_fixed[(o % rb.q) as usize] += firings;
                rb.rem_flexible -= firings;
            }
        }
    }

    fn unapply(&mut self, m: SourceId, o: u64, c: u64, saved_peak: u64) {
        let mut t = o;
        while t <= self.problem.hyperperiod {
            self.loads[(t - 1) as usize] -= 1;
            t += c;
        }
        self.peak = saved_peak;
        self.offsets.remove(&m);
        if let Some(&id) = self.class_ids.get(&m) {
            self.class_stack[id].pop();
        }
        let firings = self.problem.hyperperiod / c;
        for rb in &mut self.residue_bounds {
            if c.is_multiple_of(rb.q) {
                rb.class_fixed[(o % rb.q) as usize] -= firings;
                rb.rem_flexible += firings;
            }
        }
    }
}

/// Test oracle: enumerate every offset tuple, filter by the constraints, and
/// take the smallest peak. Exponential; only for small problems.
pub fn solve_offsets_exhaustive(p: &OffsetProblem) -> Result<OffsetSolution> {
    let ids: Vec<SourceId> = p.intervals.keys().copied().collect();
    if ids.is_empty() {
        return Ok(OffsetSolution { offsets: BTreeMap::new(), channels: 0, certified: true });
    }
    let mut assignment: BTreeMap<SourceId, u64> =
        ids.iter().map(|&m| (m, 1)).collect();
    let mut best: Option<(BTreeMap<SourceId, u64>, u64)> = None;
    loop {
        if constraints_satisfied(&assignment, p) {
            let peak = peak_load(&assignment, p);
            if best.as_ref().is_none_or(|(_, b)| peak < *b) {
                best = Some((assignment.clone(), peak));
            }
        }
        // Odometer increment over the offset ranges.
        let mut done = true;
        for &m in &ids {
            let slot = assignment.get_mut(&m).unwrap();
            if *slot < p.intervals[&m] {
                *slot += 1;
                done = false;
                break;
            }
            *slot = 1;
        }
        if done {
            break;
        }
    }
    match best {
        Some((offsets, channels)) => Ok(OffsetSolution { offsets, channels, certified: true }),
        None => Err(Error::OffsetConstraintsUnsatisfiable),
    }
}

fn peak_load(offsets: &BTreeMap<SourceId, u64>, p: &OffsetProblem) -> u64 {
    let mut loads = vec![0u64; p.hyperperiod as usize];
    for (m, &o) in offsets {
        let c = p.intervals[m];
        let mut t = o;
        while t <= p.hyperperiod {
            loads[(t - 1) as usize] += 1;
            t += c;
        }
    }
    loads.into_iter().max().unwrap_or(0)
}
