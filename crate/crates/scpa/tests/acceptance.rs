//! Acceptance suite: one test per release criterion, each printing a summary
//! line with its runtime. Budgets are asserted, so run with optimized tests.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use num::bigint::BigInt;
use num::rational::BigRational;

use scpa::activation::{solve_activation, solve_activation_exhaustive};
use scpa::arith::{gcd, lcm, pos_mod};
use scpa::experiment::{run_experiment, ExperimentConfig};
use scpa::grouping::{alignment_feasible, build_graph, run_dc, DcConfig};
use scpa::lower_bound::solve_lb;
use scpa::model::{HomogeneousSchedule, Instance, RegionSpec, SourceId};
use scpa::offsets::{
    constraints_satisfied, solve_offsets, solve_offsets_exhaustive, staleness, OffsetProblem,
};
use scpa::pipeline::{offset_problem_from_parts, solve_scpa, SolveConfig};
use scpa::scenario::{nine_region_fixture, ten_source_fixture};
use scpa::sim::{required_channels, simulate};

fn finish(name: &str, started: Instant, budget: Duration) {
    let elapsed = started.elapsed();
    println!("acceptance {name}: PASS ({} ms)", elapsed.as_millis());
    assert!(
        elapsed <= budget,
        "{name} exceeded its {budget:?} budget: {elapsed:?}"
    );
}

fn ids(values: &[u32]) -> Vec<SourceId> {
    values.iter().map(|&m| SourceId(m)).collect()
}

/// Criterion 1: the nine-region worked example reproduces exactly — active
/// sources, caps, chain intervals, three channels, the published offsets
/// accepted at peak three, and a violation-free simulation.
#[test]
fn acceptance_1_nine_region_worked_example() {
    let started = Instant::now();
    let inst = nine_region_fixture();
    let report = solve_scpa(&inst, &SolveConfig::default()).unwrap();

    assert_eq!(report.active_sources, ids(&[1, 3, 4, 5, 6, 7, 9]));
    let act = solve_activation(&inst);
    let caps: Vec<u64> = report.active_sources.iter().map(|m| act.max_interval[m]).collect();
    assert_eq!(caps, vec![5, 2, 2, 5, 4, 3, 7]);
    let intervals: Vec<u64> =
        report.active_sources.iter().map(|m| report.intervals[m]).collect();
    assert_eq!(intervals, vec![4, 2, 2, 4, 4, 2, 4]);
    assert_eq!(report.channels, 3);

    // The published offsets must be accepted and land on the same peak.
    let problem = offset_problem_from_parts(&inst, &act, &report.intervals).unwrap();
    let published: BTreeMap<SourceId, u64> = report
        .active_sources
        .iter()
        .copied()
        .zip([3u64, 2, 2, 3, 1, 1, 4])
        .collect();
    assert!(constraints_satisfied(&published, &problem));
    let published_schedule = HomogeneousSchedule::from_pairs(
        published.iter().map(|(&m, &o)| (m, report.intervals[&m], o)),
    );
    assert_eq!(required_channels(&published_schedule).unwrap(), 3);

    // Zero violations, both for the solved schedule and the published one.
    let horizon = 2 * published_schedule.hyperperiod().unwrap() + 10;
    assert!(simulate(&inst, &report.schedule, horizon.max(100)).violations.is_empty());
    assert!(simulate(&inst, &published_schedule, 100).violations.is_empty());

    finish("1 nine-region worked example", started, Duration::from_secs(1));
}

/// Criterion 2: the ten-source layout groups onto bases {4, 5} with intervals
/// [4,4,8,8,8,5,5,5,5,5], solves to two channels, and simulates cleanly.
#[test]
fn acceptance_2_ten_source_two_channels() {
    let started = Instant::now();
    let inst = ten_source_fixture();

    let act = solve_activation(&inst);
    let graph = build_graph(&act);
    let plan = run_dc(&act, &graph, &DcConfig::unrestricted());
    assert_eq!(plan.groups.iter().map(|g| g.base).collect::<Vec<_>>(), vec![4, 5]);
    let intervals = plan.intervals();
    let got: Vec<u64> = (1..=10).map(|m| intervals[&SourceId(m)]).collect();
    assert_eq!(got, vec![4, 4, 8, 8, 8, 5, 5, 5, 5, 5]);

    let report = solve_scpa(&inst, &SolveConfig::default()).unwrap();
    assert_eq!(report.channels, 2);
    assert!(report.feasible);

    // The published two-channel policy also simulates cleanly.
    let published = HomogeneousSchedule::from_pairs(
        [(1u32, 4u64, 1u64), (2, 4, 2), (3, 8, 3), (4, 8, 4), (5, 8, 7),
         (6, 5, 1), (7, 5, 2), (8, 5, 3), (9, 5, 4), (10, 5, 5)]
            .map(|(m, c, o)| (SourceId(m), c, o)),
    );
    assert_eq!(required_channels(&published).unwrap(), 2);
    assert!(simulate(&inst, &published, 120).violations.is_empty());

    // Fractional relaxation: the rate sum stays under the chain rate sum
    // 1.875 and the induced bound does not exceed two channels.
    let lb = solve_lb(&inst).unwrap();
    assert!(lb.rate_sum <= 1.875 + 1e-12);
    assert!(lb.channels <= 2);
    let expected = BigRational::new(BigInt::from(53), BigInt::from(30));
    assert_eq!(lb.rate_sum_exact, expected);

    finish("2 ten-source two channels", started, Duration::from_secs(1));
}

/// Criterion 3: for one fused pair, exhaustive search proves interval 3 next
/// to interval 4 needs two channels, while interval 2 fits one channel with
/// the staggered offsets among the optima.
#[test]
fn acceptance_3_pair_offset_minima() {
    let started = Instant::now();

    let coprime = OffsetProblem::new(
        [(SourceId(1), 4u64), (SourceId(2), 3)].into_iter().collect(),
        vec![(1, ids(&[1, 2]), 2)],
    )
    .unwrap();
    assert_eq!(solve_offsets_exhaustive(&coprime).unwrap().channels, 2);
    assert_eq!(solve_offsets(&coprime).unwrap().channels, 2);

    let halved = OffsetProblem::new(
        [(SourceId(1), 4u64), (SourceId(2), 2)].into_iter().collect(),
        vec![(1, ids(&[1, 2]), 2)],
    )
    .unwrap();
    assert_eq!(solve_offsets_exhaustive(&halved).unwrap().channels, 1);
    assert_eq!(solve_offsets(&halved).unwrap().channels, 1);
    let staggered: BTreeMap<SourceId, u64> =
        [(SourceId(1), 2), (SourceId(2), 1)].into_iter().collect();
    assert!(constraints_satisfied(&staggered, &halved));
    let schedule = HomogeneousSchedule::from_pairs([(SourceId(1), 4, 2), (SourceId(2), 2, 1)]);
    assert_eq!(required_channels(&schedule).unwrap(), 1);

    finish("3 pair offset minima", started, Duration::from_secs(1));
}

/// Criterion 4: the alignment-tolerance formula agrees with brute force over
/// offsets for all interval pairs up to 12 and tolerances up to 12, and the
/// gap value set is an arithmetic progression stepping by the gcd.
#[test]
fn acceptance_4_alignment_formula_oracle() {
    let started = Instant::now();

    for c_m in 1u64..=12 {
        for c_z in 1u64..=12 {
            // Smallest achievable worst-case gap over all offset pairs.
            let period = lcm(c_m, c_z).unwrap() / c_z;
            let mut best_worst = u64::MAX;
            for o_m in 1..=c_m {
                for o_z in 1..=c_z {
                    let worst = (0..period)
                        .map(|i| staleness(o_m, c_m, o_z, c_z, i))
                        .max()
                        .unwrap();
                    best_worst = best_worst.min(worst);
                }
            }
            for tolerance in 0u64..=12 {
                assert_eq!(
                    alignment_feasible(c_m, c_z, tolerance),
                    tolerance >= best_worst,
                    "c_m={c_m} c_z={c_z} T={tolerance}"
                );
            }
        }
    }

    for c_m in 1u64..=10 {
        for c_z in 1u64..=10 {
            let g = gcd(c_z, c_m);
            for o_m in 1..=c_m {
                for o_z in 1..=c_z {
                    let r = pos_mod(o_z as i64 - o_m as i64, g);
                    let mut seen: Vec<u64> =
                        (0..c_m / g).map(|i| staleness(o_m, c_m, o_z, c_z, i)).collect();
                    seen.sort_unstable();
                    let expected: Vec<u64> = (0..c_m / g).map(|k| r + k * g).collect();
                    assert_eq!(seen, expected, "c_m={c_m} c_z={c_z} o_m={o_m} o_z={o_z}");
                }
            }
        }
    }

    finish("4 alignment formula oracle", started, Duration::from_secs(10));
}

/// Criterion 5: the full three-case sweep keeps every channel count above its
/// lower bound, coverage-one draws are case-invariant, mean channel counts
/// order by case, and the coverage-two mean gap stays under the fence.
#[test]
fn acceptance_5_lower_bound_sandwich_sweep() {
    let started = Instant::now();
    let cfg = ExperimentConfig { seed: 20260809, ..ExperimentConfig::default() };
    let output = run_experiment(&cfg);

    assert_eq!(output.rows.len(), 3 * 3 * cfg.trials as usize);
    for row in &output.rows {
        assert!(!row.solver.starts_with("error"), "{row:?}");
        assert!(row.feasible, "{row:?}");
        assert!(row.channels >= row.lower_bound, "{row:?}");
    }

    for trial in 0..cfg.trials {
        let pick = |case: u8| {
            output
                .rows
                .iter()
                .find(|r| r.coverage == 1 && r.trial == trial && r.case == case)
                .unwrap()
        };
        let (a, b, c) = (pick(1), pick(2), pick(3));
        assert!(a.channels == b.channels && b.channels == c.channels, "trial {trial}");
        assert!(
            a.lower_bound == b.lower_bound && b.lower_bound == c.lower_bound,
            "trial {trial}"
        );
    }

    for coverage in [2u8, 3] {
        let mean = |case: u8| {
            output
                .means
                .iter()
                .find(|m| m.coverage == coverage && m.case == case)
                .unwrap()
                .mean_channels
        };
        assert!(mean(1) <= mean(2) + 1e-9, "coverage {coverage}");
        assert!(mean(2) <= mean(3) + 1e-9, "coverage {coverage}");
    }

    for m in &output.means {
        if m.coverage == 2 {
            println!(
                "  coverage 2 case {}: mean K {:.3}, mean LB {:.3}, mean gap {:.2}%",
                m.case, m.mean_channels, m.mean_lower_bound, m.mean_gap_pct
            );
            assert!(m.mean_gap_pct.is_finite());
            assert!(m.mean_gap_pct <= 60.0, "case {} gap {:.2}%", m.case, m.mean_gap_pct);
        }
    }

    finish("5 lower-bound sandwich sweep", started, Duration::from_secs(60));
}

/// Criterion 6: two hundred random small instances all solve to schedules
/// that simulate without a single deadline violation.
#[test]
fn acceptance_6_end_to_end_feasibility() {
    let started = Instant::now();
    use scpa::scenario::{CoverageShape, FusionCase, GridScenario};

    for i in 0..200u64 {
        let scenario = GridScenario {
            width: 1 + (i % 4) as u32,
            height: 1 + ((i / 4) % 4) as u32,
            coverage: 1 + (i % 3) as u8,
            shape: CoverageShape::Straight,
            d_lo: 2,
            d_hi: 10,
            case: FusionCase::from_number(1 + ((i / 3) % 3) as u8).unwrap(),
            seed: 0xACCE_0000 + i,
        };
        let inst = scenario.generate();
        let report = solve_scpa(&inst, &SolveConfig::default())
            .unwrap_or_else(|e| panic!("instance {i}: {e}"));
        assert!(report.feasible, "instance {i}: {} violations", report.trace.violations);
        assert_eq!(report.trace.violations, 0, "instance {i}");
        assert!(report.channels >= report.lower_bound, "instance {i}");
    }

    finish("6 end-to-end feasibility", started, Duration::from_secs(120));
}

/// Criterion 7: on a hundred random small instances the activation search
/// matches exhaustive enumeration exactly.
#[test]
fn acceptance_7_activation_oracle() {
    let started = Instant::now();
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    let mut rng = StdRng::seed_from_u64(0xAC7);
    for trial in 0..100 {
        let num_sources = rng.random_range(3..=8u32);
        let num_regions = rng.random_range(1..=6usize);
        let regions: Vec<RegionSpec> = (1..=num_regions as u32)
            .map(|id| {
                let deadline = rng.random_range(2..=10u64);
                let direct = vec![SourceId(rng.random_range(1..=num_sources))];
                let mut combos: Vec<Vec<SourceId>> = Vec::new();
                // At most two combos so each region offers at most 3 options.
                for _ in 0..rng.random_range(0..=2u32) {
                    let size = rng.random_range(2..=3u32.min(num_sources - 1)) as usize;
                    let mut pool: Vec<SourceId> = (1..=num_sources)
                        .map(SourceId)
                        .filter(|m| !direct.contains(m))
                        .collect();
                    let mut combo = Vec::new();
                    for _ in 0..size.min(pool.len()) {
                        combo.push(pool.swap_remove(rng.random_range(0..pool.len())));
                    }
                    combo.sort_unstable();
                    if combo.len() >= 2
                        && !combos.iter().any(|c: &Vec<SourceId>| {
                            c.iter().all(|m| combo.contains(m))
                                || combo.iter().all(|m| c.contains(m))
                        })
                    {
                        combos.push(combo);
                    }
                }
                RegionSpec { id, deadline, tolerance: 1, direct, combos }
            })
            .collect();
        let inst =
            Instance { label: format!("activation oracle {trial}"), num_sources, regions };
        assert!(inst.validate().is_ok(), "trial {trial}");

        let fast = solve_activation(&inst);
        let slow = solve_activation_exhaustive(&inst);
        assert!(fast.certified, "trial {trial}");
        assert_eq!(fast.objective, slow.objective, "trial {trial}");
    }

    finish("7 activation oracle", started, Duration::from_secs(30));
}

/// Criterion 8: on fifty random small offset problems the branch-and-bound
/// channel count matches exhaustive enumeration exactly.
#[test]
fn acceptance_8_offset_search_oracle() {
    let started = Instant::now();
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    let mut rng = StdRng::seed_from_u64(0x0FF_5E7);
    let mut accepted = 0;
    while accepted < 50 {
        let n = rng.random_range(2..=5usize);
        let choices = [1u64, 2, 2, 3, 4, 4, 6, 8, 12, 24];
        let intervals: BTreeMap<SourceId, u64> = (1..=n as u32)
            .map(|m| (SourceId(m), choices[rng.random_range(0..choices.len())]))
            .collect();
        let hyperperiod = intervals
            .values()
            .try_fold(1u64, |acc, &c| lcm(acc, c).ok())
            .unwrap_or(u64::MAX);
        let state_space: u64 = intervals.values().product();
        if hyperperiod > 24 || state_space > 60_000 {
            continue;
        }
        let mut regions = Vec::new();
        for region_id in 1..=rng.random_range(0..=2u32) {
            let members: Vec<SourceId> = (1..=n as u32)
                .map(SourceId)
                .filter(|_| rng.random_bool(0.6))
                .collect();
            if members.len() >= 2 {
                regions.push((region_id, members, rng.random_range(0..=3u64)));
            }
        }
        let problem = OffsetProblem::new(intervals, regions).unwrap();
        accepted += 1;

        let fast = solve_offsets(&problem).unwrap();
        let slow = solve_offsets_exhaustive(&problem).unwrap();
        assert_eq!(fast.channels, slow.channels, "problem {accepted}");
        assert!(constraints_satisfied(&fast.offsets, &problem));
    }

    finish("8 offset search oracle", started, Duration::from_secs(60));
}
