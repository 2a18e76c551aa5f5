//! Exact discrete-time simulator of the per-region age recursion. Used to
//! verify schedules against the hard deadlines and to count the channels a
//! schedule occupies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HomogeneousSchedule, Instance, ScheduleWindow, SourceId};

/// Hyperperiods larger than this are refused rather than allocated.
pub const MAX_HYPERPERIOD: u64 = 1 << 24;

/// Age sequences per region plus every deadline violation found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AoiTrace {
    /// `ages[n][t - 1]` is region n+1's age at slot t, starting at 1.
    pub ages: Vec<Vec<u64>>,
    /// (region id, slot) pairs where the age exceeded the region's deadline.
    pub violations: Vec<(u32, u64)>,
}

impl AoiTrace {
    pub fn max_age(&self, region_idx: usize) -> u64 {
        self.ages[region_idx].iter().copied().max().unwrap_or(1)
    }

    /// CSV with columns `t, A_1, .., A_N`.
    pub fn to_csv(&self) -> String {
        let n = self.ages.len();
        let horizon = self.ages.first().map_or(0, |a| a.len());
        let mut out = String::from("t");
        for i in 1..=n {
            out.push_str(&format!(",A_{i}"));
        }
        out.push('\n');
        for t in 0..horizon {
            out.push_str(&format!("{}", t + 1));
            for region in &self.ages {
                out.push_str(&format!(",{}", region[t]));
            }
            out.push('\n');
        }
        out
    }
}

/// Generation time of the freshest update from `m` available at slot `t`:
/// the largest t' <= t in m's transmission pattern. An update transmitted in
/// slot t is received at the end oft and already counts for slot t.
pub fn latest_generation_time(s: &HomogeneousSchedule, m: SourceId, t: u64) -> Option<u64> {
    debug_assert!(t >= 1);
    let e = s.entries.get(&m)?;
    if t < e.offset || e.interval == 0 || e.offset == 0 {
        return None;
    }
    Some(e.offset + (t - e.offset) / e.interval * e.interval)
}

/// One step of the age recursion: the ages for slot t+1 given those at t.
///
/// A region resets to 1 when a direct source transmits at t, or when some
/// combination has a member transmitting at t while the latest updates of all
/// its members were generated within the region's tolerance. Otherwise it ages.
pub fn step_aoi(inst: &Instance, s: &HomogeneousSchedule, t: u64, ages: &[u64]) -> Vec<u64> {
    debug_assert_eq!(ages.len(), inst.regions.len());
    inst.regions
        .iter()
        .zip(ages)
        .map(|(region, &age)| {
            if resets_at(region, s, t) {
                1
            } else {
                age + 1
            }
        })
        .collect()
}

fn resets_at(region: &crate::model::RegionSpec, s: &HomogeneousSchedule, t: u64) -> bool {
    if region.direct.iter().any(|&m| s.decision_at(m, t)) {
        return true;
    }
    region.combos.iter().any(|combo| {
        combo.iter().any(|&m| s.decision_at(m, t)) && fusion_spread_ok(combo, s, t, region.tolerance)
    })
}

fn fusion_spread_ok(combo: &[SourceId], s: &HomogeneousSchedule, t: u64, tolerance: u64) -> bool {
    let mut oldest = u64::MAX;
    for &m in combo {
        match latest_generation_time(s, m, t) {
            Some(g) => oldest = oldest.min(g),
            // A member that has never transmitted leaves the fusion undefined.
            None => return false,
        }
    }
    t - oldest <= tolerance
}

/// Runs the recursion from all-ones initial ages over `horizon` slots and
/// records every deadline violation.
pub fn simulate(inst: &Instance, s: &HomogeneousSchedule, horizon: u64) -> AoiTrace {
    debug_assert!(horizon >= 1);
    let n = inst.regions.len();
    let mut ages: Vec<u64> = vec![1; n];
    let mut trace: Vec<Vec<u64>> = vec![Vec::with_capacity(horizon as usize); n];
    let mut violations = Vec::new();
    for t in 1..=horizon {
        for (idx, region) in inst.regions.iter().enumerate() {
            trace[idx].push(ages[idx]);
            if ages[idx] > region.deadline {
                violations.push((region.id, t));
            }
        }
        if t < horizon {
            let next = step_aoi(inst, s, t, &ages);
            for (idx, (&old, &new)) in ages.iter().zip(&next).enumerate() {
                debug_assert!(
                    new == 1 || new == old + 1,
                    "region {} age moved {} -> {}",
                    idx + 1,
                    old,
                    new
                );
            }
            ages = next;
        }
    }
    AoiTrace { ages: trace, violations }
}

/// Verification horizon that provably exposes any violation: two hyperperiods
/// past the transient plus the largest deadline.
pub fn default_horizon(inst: &Instance, s: &HomogeneousSchedule) -> Result<u64> {
    let period = checked_hyperperiod(s)?;
    Ok(2 * period + inst.max_deadline())
}

fn checked_hyperperiod(s: &HomogeneousSchedule) -> Result<u64> {
    let period = s.hyperperiod()?;
    if period > MAX_HYPERPERIOD {
        return Err(Error::HyperperiodTooLarge { hyperperiod: period, limit: MAX_HYPERPERIOD });
    }
    Ok(period)
}

/// Number of channels the schedule occupies: the largest per-slot transmission
/// count over one hyperperiod. Empty schedules need no channel.
pub fn required_channels(s: &HomogeneousSchedule) -> Result<u64> {
    if s.entries.is_empty() {
        return Ok(0);
    }
    let period = checked_hyperperiod(s)?;
    Ok(slot_loads(s, period).into_iter().max().unwrap_or(0))
}

/// Transmissions per slot for t in 1..=horizon.
pub fn slot_loads(s: &HomogeneousSchedule, horizon: u64) -> Vec<u64> {
    let mut loads = vec![0u64; horizon as usize];
    for e in s.entries.values().filter(|e| e.interval > 0 && e.offset > 0) {
        let mut t = e.offset;
        while t <= horizon {
            loads[(t - 1) as usize] += 1;
            t += e.interval;
        }
    }
    loads
}

/// First-fit channel table over `horizon` slots: in each slot the transmitting
/// sources, ascending by id, fill channels 1..K.
pub fn channel_window(s: &HomogeneousSchedule, horizon: u64) -> Result<ScheduleWindow> {
    let channels = required_channels(s)?;
    let sources: Vec<SourceId> = s.entries.keys().copied().collect();
    let mut decisions = Vec::with_capacity(horizon as usize);
    let mut table = Vec::with_capacity(horizon as usize);
    for t in 1..=horizon {
        let row: Vec<bool> = sources.iter().map(|&m| s.decision_at(m, t)).collect();
        let mut cells: Vec<Option<SourceId>> = vec![None; channels as usize];
        for (slot_cell, m) in cells.iter_mut().zip(s.scheduled_at(t)) {
            *slot_cell = Some(m);
        }
        decisions.push(row);
        table.push(cells);
    }
    Ok(ScheduleWindow { horizon, sources, decisions, channels: Some(table) })
}

/// Channel table over one hyperperiod.
pub fn assign_channels(s: &HomogeneousSchedule) -> Result<ScheduleWindow> {
    let period = checked_hyperperiod(s)?;
    channel_window(s, period)
}

/// Max age per region over a trace, keyed by region id.
pub fn max_ages(inst: &Instance, trace: &AoiTrace) -> BTreeMap<u32, u64> {
    inst.regions
        .iter()
        .enumerate()
        .map(|(idx, r)| (r.id, trace.max_age(idx)))
        .collect()
}
