//! Domain types: problem instances, homogeneous schedules and the decision
//! windows they induce, plus instance validation and the JSON wire formats
//! consumed by the CLI.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::arith::lcm_all;
use crate::error::Result;

/// Identifier of an update source, 1-based. Rendered as a letter (`A`, `B`,
/// ..) in tables, as an integer everywhere else.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SourceId(pub u32);

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Letter label for a source id: 1 -> A, 26 -> Z, 27 -> AA.
pub fn source_label(id: SourceId) -> String {
    let mut n = id.0 as u64;
    debug_assert!(n >= 1);
    let mut out = Vec::new();
    while n > 0 {
        let rem = (n - 1) % 26;
        out.push((b'A' + rem as u8) as char);
        n = (n - 1) / 26;
    }
    out.iter().rev().collect()
}

/// One monitored region: its hard age deadline, fusion tolerance, direct
/// sources and fusable source combinations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSpec {
    /// 1-based region index.
    pub id: u32,
    /// Hard deadline: the region's age must never exceed this many slots.
    #[serde(rename = "d")]
    pub deadline: u64,
    /// Maximum spread between generation times of updates fused for this region.
    #[serde(rename = "T")]
    pub tolerance: u64,
    /// Sources whose single update reconstructs the region.
    #[serde(rename = "F")]
    pub direct: Vec<SourceId>,
    /// Source combinations whose updates fuse into full information.
    pub combos: Vec<Vec<SourceId>>,
}

impl RegionSpec {
    /// All sources mentioned by this region.
    pub fn sources(&self) -> impl Iterator<Item = SourceId> + '_ {
        self.direct
            .iter()
            .copied()
            .chain(self.combos.iter().flatten().copied())
    }
}

/// A full problem instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub label: String,
    pub num_sources: u32,
    pub regions: Vec<RegionSpec>,
}

impl Instance {
    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn max_deadline(&self) -> u64 {
        self.regions.iter().map(|r| r.deadline).max().unwrap_or(1)
    }

    /// Checks every structural invariant and reports all violations found.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        for (pos, region) in self.regions.iter().enumerate() {
            if region.id != pos as u32 + 1 {
                violations.push(format!(
                    "region ids must be 1..N with no gaps: position {} holds id {}",
                    pos + 1,
                    region.id
                ));
            }
            if region.deadline < 2 {
                violations.push(format!("region {}: deadline must be >= 2", region.id));
            }
            if region.tolerance == 0 {
                violations.push(format!("region {}: tolerance must be >= 1", region.id));
            }
            if region.tolerance >= region.deadline {
                violations.push(format!(
                    "region {}: tolerance must be < deadline ({} >= {})",
                    region.id, region.tolerance, region.deadline
                ));
            }
            if region.direct.is_empty() {
                violations.push(format!("region {}: direct source set must be non-empty", region.id));
            }
            let mut direct_sorted = region.direct.clone();
            direct_sorted.sort_unstable();
            direct_sorted.dedup();
            if direct_sorted.len() != region.direct.len() {
                violations.push(format!("region {}: duplicate direct sources", region.id));
            }
            for (j, combo) in region.combos.iter().enumerate() {
                if combo.len() < 2 {
                    violations.push(format!(
                        "region {}: combo {} must have size >= 2",
                        region.id,
                        j + 1
                    ));
                }
                let mut members = combo.clone();
                members.sort_unstable();
                members.dedup();
                if members.len() != combo.len() {
                    violations.push(format!(
                        "region {}: combo {} has duplicate members",
                        region.id,
                        j + 1
                    ));
                }
                if combo.iter().any(|m| region.direct.contains(m)) {
                    violations.push(format!(
                        "region {}: combo {} overlaps the direct source set",
                        region.id,
                        j + 1
                    ));
                }
                for (k, other) in region.combos.iter().enumerate() {
                    if j != k && combo.iter().all(|m| other.contains(m)) {
                        violations.push(format!(
                            "region {}: combo {} is a subset of combo {}",
                            region.id,
                            j + 1,
                            k + 1
                        ));
                    }
                }
            }
            for m in region.sources() {
                if m.0 == 0 || m.0 > self.num_sources {
                    violations.push(format!(
                        "region {}: source {} outside [1, {}]",
                        region.id, m, self.num_sources
                    ));
                }
            }
        }
        ValidationReport { violations }
    }
}

/// Outcome of [`Instance::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Interval and first-transmission offset of one source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    #[serde(rename = "c")]
    pub interval: u64,
    #[serde(rename = "o")]
    pub offset: u64,
}

/// A periodic schedule: every source transmits with a fixed interval, first at
/// its offset. Sources absent from the map are never scheduled.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HomogeneousSchedule {
    pub entries: BTreeMap<SourceId, ScheduleEntry>,
}

impl HomogeneousSchedule {
    pub fn from_pairs<I: IntoIterator<Item = (SourceId, u64, u64)>>(pairs: I) -> Self {
        let entries = pairs
            .into_iter()
            .map(|(m, interval, offset)| (m, ScheduleEntry { interval, offset }))
            .collect();
        Self { entries }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }

    /// 1 iff source `m` transmits in slot `t` (slots are 1-based). Entries
    /// with a zero interval or offset are invalid and never fire.
    pub fn decision_at(&self, m: SourceId, t: u64) -> bool {
        debug_assert!(t >= 1);
        match self.entries.get(&m) {
            Some(e) if e.interval > 0 && e.offset > 0 => {
                t >= e.offset && (t - e.offset).is_multiple_of(e.interval)
            }
            _ => false,
        }
    }

    /// Sources transmitting in slot `t`, ascending by id.
    pub fn scheduled_at(&self, t: u64) -> Vec<SourceId> {
        self.entries
            .keys()
            .copied()
            .filter(|&m| self.decision_at(m, t))
            .collect()
    }

    /// lcm of all intervals; 1 for an empty schedule. Zero intervals are
    /// invalid and ignored.
    pub fn hyperperiod(&self) -> Result<u64> {
        lcm_all(self.entries.values().map(|e| e.interval).filter(|&c| c > 0))
    }

    /// Entry-level sanity: positive intervals and offsets within them.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        for (m, e) in &self.entries {
            if e.interval == 0 {
                violations.push(format!("source {m}: interval must be >= 1"));
            }
            if e.offset == 0 || e.offset > e.interval {
                violations.push(format!(
                    "source {m}: offset must satisfy 1 <= offset <= interval ({} vs {})",
                    e.offset, e.interval
                ));
            }
        }
        ValidationReport { violations }
    }
}

/// A finite window of scheduling decisions, optionally with a per-slot channel
/// assignment. Row `t` matches the decision rule of the schedule it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleWindow {
    pub horizon: u64,
    /// Column order of `decisions`.
    pub sources: Vec<SourceId>,
    /// `decisions[t - 1][k]` is true iff `sources[k]` transmits in slot `t`.
    pub decisions: Vec<Vec<bool>>,
    /// Per slot, channels 1..K hold the transmitting sources (None = idle).
    pub channels: Option<Vec<Vec<Option<SourceId>>>>,
}

impl ScheduleWindow {
    /// Largest number of simultaneous transmissions in the window.
    pub fn max_row_sum(&self) -> u64 {
        self.decisions
            .iter()
            .map(|row| row.iter().filter(|&&d| d).count() as u64)
            .max()
            .unwrap_or(0)
    }
}
