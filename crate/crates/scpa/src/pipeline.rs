//! End-to-end solve: activation, grouping, offsets, schedule assembly,
//! verification by simulation, and the channel lower bound, packaged into one
//! deterministic report.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::activation::{self, ActivationResult, ChosenOption};
use crate::error::{Error, Result};
use crate::grouping::{self, DcConfig, Group};
use crate::lower_bound;
use crate::model::{HomogeneousSchedule, Instance, SourceId};
use crate::offsets::{self, OffsetProblem, OffsetSearchOptions};
use crate::sim;

/// Knobs for one pipeline run.
#[derive(Debug, Clone, Default)]
pub struct SolveConfig {
    pub dc: DcConfig,
    /// Simulation horizon; None picks the verification default.
    pub horizon: Option<u64>,
    /// Activation node cap; None uses the module default.
    pub activation_node_budget: Option<u64>,
    pub offset_search: OffsetSearchOptions,
}

/// Age statistics of the verification run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub horizon: u64,
    /// Largest age seen per region id.
    pub max_age: BTreeMap<u32, u64>,
    pub violations: u64,
}

/// Everything one solve produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub label: String,
    /// False when either search settled for a fallback answer: the greedy
    /// activation pass or a budget-capped offset search.
    pub certified: bool,
    pub active_sources: Vec<SourceId>,
    pub chosen: Vec<ChosenOption>,
    pub groups: Vec<Group>,
    pub intervals: BTreeMap<SourceId, u64>,
    pub offsets: BTreeMap<SourceId, u64>,
    pub schedule: HomogeneousSchedule,
    pub channels: u64,
    pub lower_bound: u64,
    pub lower_bound_rate_sum: f64,
    pub trace: TraceSummary,
    pub feasible: bool,
}

impl SolveReport {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Runs the whole pipeline on a validated instance.
pub fn solve_scpa(inst: &Instance, config: &SolveConfig) -> Result<SolveReport> {
    let report = inst.validate();
    if !report.is_ok() {
        return Err(Error::InvalidInstance(report.violations.join("; ")));
    }

    let act = activation::solve_activation_with_budget(
        inst,
        config.activation_node_budget.unwrap_or(activation::DEFAULT_NODE_BUDGET),
    );
    let graph = grouping::build_graph(&act);
    let plan = grouping::run_dc(&act, &graph, &config.dc);
    let problem = offset_problem_from_parts(inst, &act, &plan.intervals())?;
    let solution = offsets::solve_offsets_with(&problem, &config.offset_search)?;

    let schedule = HomogeneousSchedule::from_pairs(
        problem
            .intervals
            .iter()
            .map(|(&m, &c)| (m, c, solution.offsets[&m])),
    );
    debug_assert_eq!(sim::required_channels(&schedule)?, solution.channels);

    let horizon = match config.horizon {
        Some(h) => h,
        None => sim::default_horizon(inst, &schedule)?,
    };
    let trace = sim::simulate(inst, &schedule, horizon);
    let feasible = trace.violations.is_empty();
    let summary = TraceSummary {
        horizon,
        max_age: sim::max_ages(inst, &trace),
        violations: trace.violations.len() as u64,
    };

    let lb = lower_bound::solve_lb(inst)?;

    Ok(SolveReport {
        label: inst.label.clone(),
        certified: act.certified && solution.certified,
        active_sources: act.active_sources(),
        chosen: act.chosen.clone(),
        groups: plan.groups.clone(),
        intervals: plan.intervals(),
        offsets: solution.offsets,
        schedule,
        channels: solution.channels,
        lower_bound: lb.channels,
        lower_bound_rate_sum: lb.rate_sum,
        trace: summary,
        feasible,
    })
}

/// Builds the offset problem from the activation's per-region sets and the
/// grouping's intervals. Within any multi-source region the grouped intervals
/// form a chain, so every member interval divides the trigger's; that
/// guarantee is what makes the alignment constraints satisfiable.
pub fn offset_problem_from_parts(
    inst: &Instance,
    act: &ActivationResult,
    intervals: &BTreeMap<SourceId, u64>,
) -> Result<OffsetProblem> {
    let regions: Vec<(u32, Vec<SourceId>, u64)> = act
        .chosen
        .iter()
        .map(|c| {
            let tolerance = inst.regions[c.region as usize - 1].tolerance;
            (c.region, c.members.clone(), tolerance)
        })
        .collect();
    for (region, members, _) in &regions {
        if members.len() >= 2 {
            let z_interval = members.iter().map(|m| intervals[m]).max().unwrap();
            for m in members {
                assert_eq!(
                    z_interval % intervals[m],
                    0,
                    "region {region}: member {m} interval {} does not divide {}",
                    intervals[m],
                    z_interval
                );
            }
        }
    }
    OffsetProblem::new(intervals.clone(), regions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RegionSpec;
    use crate::scenario;

    #[test]
    fn trivial_single_region_solve() {
        let inst = Instance {
            label: "one region".into(),
            num_sources: 1,
            regions: vec![RegionSpec {
                id: 1,
                deadline: 3,
                tolerance: 1,
                direct: vec![SourceId(1)],
                combos: vec![],
            }],
        };
        let report = solve_scpa(&inst, &SolveConfig::default()).unwrap();
        assert_eq!(report.channels, 1);
        assert_eq!(report.intervals[&SourceId(1)], 3);
        assert!(report.feasible);
        assert!(report.lower_bound <= report.channels);
    }

    #[test]
    fn invalid_instance_is_rejected() {
        let inst = Instance {
            label: "broken".into(),
            num_sources: 1,
            regions: vec![RegionSpec {
                id: 1,
                deadline: 3,
                tolerance: 3,
                direct: vec![SourceId(1)],
                combos: vec![],
            }],
        };
        assert!(matches!(
            solve_scpa(&inst, &SolveConfig::default()),
            Err(Error::InvalidInstance(_))
        ));
    }

    #[test]
    fn report_is_byte_deterministic() {
        let inst = scenario::nine_region_fixture();
        let a = solve_scpa(&inst, &SolveConfig::default()).unwrap();
        let b = solve_scpa(&inst, &SolveConfig::default()).unwrap();
        assert_eq!(a.to_json_string(), b.to_json_string());
    }

    #[test]
    fn report_round_trips_through_json() {
        let inst = scenario::nine_region_fixture();
        let report = solve_scpa(&inst, &SolveConfig::default()).unwrap();
        let round = SolveReport::from_json_str(&report.to_json_string()).unwrap();
        assert_eq!(report, round);
    }
}
