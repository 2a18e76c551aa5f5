//! The three-case sweep: shared topology and deadlines per trial, one solve
//! per tolerance case, the no-fusion fallback rule, and CSV output.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grouping::DcConfig;
use crate::offsets::OffsetSearchOptions;
use crate::pipeline::{solve_scpa, SolveConfig};
use crate::scenario::{build_grid_instance, CoverageShape, FusionCase, GridScenario};

/// Sweep parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub width: u32,
    pub height: u32,
    pub coverages: Vec<u8>,
    pub cases: Vec<u8>,
    pub trials: u32,
    pub d_lo: u64,
    pub d_hi: u64,
    pub seed: u64,
    pub dc: DcConfig,
    pub parallel: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            width: 6,
            height: 6,
            coverages: vec![1, 2, 3],
            cases: vec![1, 2, 3],
            trials: 50,
            d_lo: 2,
            d_hi: 10,
            seed: 0,
            dc: DcConfig::experiment_preset(),
            parallel: true,
        }
    }
}

/// One solved (coverage, trial, case) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub coverage: u8,
    pub trial: u32,
    pub case: u8,
    pub channels: u64,
    pub lower_bound: u64,
    pub gap_pct: f64,
    pub num_active: u32,
    pub feasible: bool,
    /// Which policy produced the channel count; the fallback marker means the
    /// no-fusion policy was cheaper and replaces this case's own.
    pub solver: String,
}

/// Per (coverage, case) averages over the trials that solved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRow {
    pub coverage: u8,
    pub case: u8,
    pub mean_channels: f64,
    pub mean_lower_bound: f64,
    pub mean_gap_pct: f64,
    pub trials_ok: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub rows: Vec<TrialRow>,
    pub means: Vec<MeanRow>,
}

/// Deterministic per-trial seed derivation (splitmix64 over the key).
fn trial_seed(base: u64, coverage: u8, trial: u32) -> u64 {
    let mut x = base
        .wrapping_add((coverage as u64) << 40)
        .wrapping_add(trial as u64 + 1)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Runs the sweep. Rows come back ordered by (coverage, trial, case)
/// regardless of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> ExperimentOutput {
    let keys: Vec<(u8, u32)> = cfg
        .coverages
        .iter()
        .flat_map(|&coverage| (0..cfg.trials).map(move |trial| (coverage, trial)))
        .collect();
    let mut rows: Vec<TrialRow> = if cfg.parallel {
        keys.par_iter().flat_map_iter(|&(coverage, trial)| run_trial(cfg, coverage, trial)).collect()
    } else {
        keys.iter().flat_map(|&(coverage, trial)| run_trial(cfg, coverage, trial)).collect()
    };
    rows.sort_by_key(|r| (r.coverage, r.trial, r.case));

    let mut means = Vec::new();
    for &coverage in &cfg.coverages {
        for &case in &cfg.cases {
            let picked: Vec<&TrialRow> = rows
                .iter()
                .filter(|r| r.coverage == coverage && r.case == case && r.solver != "error")
                .collect();
            if picked.is_empty() {
                continue;
            }
            let count = picked.len() as f64;
            means.push(MeanRow {
                coverage,
                case,
                mean_channels: picked.iter().map(|r| r.channels as f64).sum::<f64>() / count,
                mean_lower_bound: picked.iter().map(|r| r.lower_bound as f64).sum::<f64>()
                    / count,
                mean_gap_pct: picked.iter().map(|r| r.gap_pct).sum::<f64>() / count,
                trials_ok: picked.len() as u32,
            });
        }
    }
    ExperimentOutput { rows, means }
}

/// Solves every requested case on one shared topology, then applies the
/// fallback: a fusion case never reports more channels than the no-fusion
/// policy for the same draw.
fn run_trial(cfg: &ExperimentConfig, coverage: u8, trial: u32) -> Vec<TrialRow> {
    let scenario = GridScenario {
        width: cfg.width,
        height: cfg.height,
        coverage,
        shape: CoverageShape::Straight,
        d_lo: cfg.d_lo,
        d_hi: cfg.d_hi,
        case: FusionCase::UnitTolerance, // placeholder; variants rebuilt below
        seed: trial_seed(cfg.seed, coverage, trial),
    };
    let (placements, deadlines) = scenario.sample();

    let solve_case = |case: FusionCase, offset_search: OffsetSearchOptions| {
        let label = format!(
            "grid {}x{} coverage {} case {} trial {}",
            cfg.width,
            cfg.height,
            coverage,
            case.number(),
            trial
        );
        let inst = build_grid_instance(
            cfg.width,
            cfg.height,
            &placements,
            &deadlines,
            case,
            CoverageShape::Straight,
            &label,
        );
        let config = SolveConfig { dc: cfg.dc.clone(), offset_search, ..SolveConfig::default() };
        solve_scpa(&inst, &config)
    };

    // The no-fusion policy backs the fallback rule, so solve it regardless.
    let no_fusion = solve_case(FusionCase::NoFusion, OffsetSearchOptions::default());
    let fallback_channels = no_fusion.as_ref().ok().map(|r| r.channels);

    // The case variants share intervals (activation and grouping ignore the
    // tolerance), and loosening tolerances only widens the feasible offsets.
    // Warm-starting the loose case from the unit-tolerance solution therefore
    // keeps the per-case channel counts monotone even if a budget binds.
    let need_unit = cfg.cases.iter().any(|&c| c == 1 || c == 2);
    let unit = need_unit
        .then(|| solve_case(FusionCase::UnitTolerance, OffsetSearchOptions::default()));
    let loose = cfg.cases.contains(&1).then(|| {
        solve_case(
            FusionCase::LooseTolerance,
            OffsetSearchOptions {
                warm_start: unit
                    .as_ref()
                    .and_then(|u| u.as_ref().ok())
                    .map(|r| r.offsets.clone()),
                ..OffsetSearchOptions::default()
            },
        )
    });

    let mut rows = Vec::new();
    for &case_no in &cfg.cases {
        let case = FusionCase::from_number(case_no).expect("cases are 1..=3");
        let outcome = match case {
            FusionCase::LooseTolerance => loose.as_ref().expect("solved when requested"),
            FusionCase::UnitTolerance => unit.as_ref().expect("solved when requested"),
            FusionCase::NoFusion => &no_fusion,
        };
        let row = match outcome {
            Ok(report) => {
                let mut channels = report.channels;
                let mut solver = "scpa".to_string();
                if case != FusionCase::NoFusion {
                    if let Some(k3) = fallback_channels {
                        if k3 < channels {
                            channels = k3;
                            solver = "scpa+no-fusion-fallback".to_string();
                        }
                    }
                }
                let lb = report.lower_bound;
                TrialRow {
                    coverage,
                    trial,
                    case: case_no,
                    channels,
                    lower_bound: lb,
                    gap_pct: if lb > 0 {
                        (channels as f64 - lb as f64) / lb as f64 * 100.0
                    } else {
                        f64::NAN
                    },
                    num_active: report.active_sources.len() as u32,
                    feasible: report.feasible,
                    solver,
                }
            }
            Err(err) => TrialRow {
                coverage,
                trial,
                case: case_no,
                channels: 0,
                lower_bound: 0,
                gap_pct: f64::NAN,
                num_active: 0,
                feasible: false,
                solver: format!("error ({err})").replace(',', ";"),
            },
        };
        rows.push(row);
    }
    rows
}

/// CSV with per-trial rows followed by mean rows (trial column `mean`).
pub fn to_csv(output: &ExperimentOutput) -> String {
    let mut out = String::new();
    out.push_str("# no-fusion rows use the combo-free covering program as their lower bound\n");
    out.push_str("coverage,trial,case,K,lower_bound,gap_pct,num_active,feasible,solver\n");
    for r in &output.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.coverage,
            r.trial,
            r.case,
            r.channels,
            r.lower_bound,
            fmt_pct(r.gap_pct),
            r.num_active,
            r.feasible,
            r.solver
        ));
    }
    for m in &output.means {
        out.push_str(&format!(
            "{},mean,{},{:.3},{:.3},{},{},{},{}\n",
            m.coverage,
            m.case,
            m.mean_channels,
            m.mean_lower_bound,
            fmt_pct(m.mean_gap_pct),
            "",
            "",
            m.trials_ok
        ));
    }
    out
}

fn fmt_pct(v: f64) -> String {
    if v.is_nan() { String::new() } else { format!("{v:.3}") }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            width: 3,
            height: 3,
            coverages: vec![1, 2],
            cases: vec![1, 2, 3],
            trials: 3,
            seed: 5,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn csv_is_deterministic_under_fixed_seed() {
        let cfg = tiny_config();
        let a = to_csv(&run_experiment(&cfg));
        let b = to_csv(&run_experiment(&cfg));
        assert_eq!(a, b);
    }

    #[test]
    fn coverage_one_identical_across_cases() {
        let cfg = tiny_config();
        let output = run_experiment(&cfg);
        for trial in 0..cfg.trials {
            let ks: Vec<u64> = output
                .rows
                .iter()
                .filter(|r| r.coverage == 1 && r.trial == trial)
                .map(|r| r.channels)
                .collect();
            assert_eq!(ks.len(), 3);
            assert!(ks.windows(2).all(|w| w[0] == w[1]), "trial {trial}: {ks:?}");
        }
    }

    #[test]
    fn fallback_never_exceeds_no_fusion_channels() {
        let cfg = tiny_config();
        let output = run_experiment(&cfg);
        for trial in 0..cfg.trials {
            for coverage in [1u8, 2] {
                let by_case = |case: u8| {
                    output
                        .rows
                        .iter()
                        .find(|r| r.coverage == coverage && r.trial == trial && r.case == case)
                        .unwrap()
                        .channels
                };
                assert!(by_case(1) <= by_case(3));
                assert!(by_case(2) <= by_case(3));
            }
        }
    }

    #[test]
    fn rows_are_ordered_and_sandwiched() {
        let cfg = tiny_config();
        let output = run_experiment(&cfg);
        let mut expected = Vec::new();
        for &coverage in &cfg.coverages {
            for trial in 0..cfg.trials {
                for &case in &cfg.cases {
                    expected.push((coverage, trial, case));
                }
            }
        }
        let got: Vec<(u8, u32, u8)> =
            output.rows.iter().map(|r| (r.coverage, r.trial, r.case)).collect();
        assert_eq!(got, expected);
        for r in &output.rows {
            assert!(r.channels >= r.lower_bound, "{r:?}");
            assert!(r.feasible, "{r:?}");
        }
    }
}
