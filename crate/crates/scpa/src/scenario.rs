//! Grid scenario generation: one source per region, oriented coverage runs,
//! direct sets from location and fusable pairs from overlap. Also ships the
//! two worked-example fixtures used throughout the tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Instance, RegionSpec, SourceId};

/// Direction a source faces on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Up,
    Down,
    Left,
    Right,
}

impl Orientation {
    pub const ALL: [Orientation; 4] =
        [Orientation::Up, Orientation::Down, Orientation::Left, Orientation::Right];
}

/// How a multi-region footprint extends from the source's cell. The paper
/// figure for the 3-region footprint is not recoverable from text, so the
/// shape is a knob; `Straight` is the recorded default reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageShape {
    /// A straight run of cells in the orientation direction.
    #[default]
    Straight,
    /// One step forward, then the remaining steps turned clockwise.
    Bent,
}

/// Tolerance regime of an experiment case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionCase {
    /// Tolerance one slot below each deadline.
    LooseTolerance,
    /// Tolerance of a single slot.
    UnitTolerance,
    /// Fusion disabled: only direct sources count.
    NoFusion,
}

impl FusionCase {
    pub fn number(self) -> u8 {
        match self {
            FusionCase::LooseTolerance => 1,
            FusionCase::UnitTolerance => 2,
            FusionCase::NoFusion => 3,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(FusionCase::LooseTolerance),
            2 => Some(FusionCase::UnitTolerance),
            3 => Some(FusionCase::NoFusion),
            _ => None,
        }
    }
}

/// Scenario parameters: a width x height grid with one source per region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridScenario {
    pub width: u32,
    pub height: u32,
    /// Regions covered per source: 1, 2 or 3 (truncated at grid borders).
    pub coverage: u8,
    pub shape: CoverageShape,
    pub d_lo: u64,
    pub d_hi: u64,
    pub case: FusionCase,
    pub seed: u64,
}

impl GridScenario {
    /// Draws orientations and deadlines from the seed and materializes the
    /// instance. Same seed, same instance.
    pub fn generate(&self) -> Instance {
        let (placements, deadlines) = self.sample();
        let label = format!(
            "grid {}x{} coverage {} case {} seed {}",
            self.width,
            self.height,
            self.coverage,
            self.case.number(),
            self.seed
        );
        build_grid_instance(
            self.width,
            self.height,
            &placements,
            &deadlines,
            self.case,
            self.shape,
            &label,
        )
    }

    /// Orientations (one per source) and deadlines (one per region) drawn
    /// from a counter-based generator seeded with `seed`.
    pub fn sample(&self) -> (Vec<(Orientation, u8)>, Vec<u64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let cells = (self.width * self.height) as usize;
        let placements = (0..cells)
            .map(|_| (Orientation::ALL[rng.random_range(0..4)], self.coverage))
            .collect();
        let deadlines = (0..cells).map(|_| rng.random_range(self.d_lo..=self.d_hi)).collect();
        (placements, deadlines)
    }
}

/// Regions covered by a source located in `region` (1-based, row-major): a run
/// of `coverage` cells starting at its own cell, truncated at the border.
pub fn covered_regions(
    width: u32,
    height: u32,
    region: u32,
    orientation: Orientation,
    coverage: u8,
    shape: CoverageShape,
) -> Vec<u32> {
    let idx = region - 1;
    let (mut col, mut row) = ((idx % width) as i64, (idx / width) as i64);
    let mut covered = vec![region];
    let mut dir = step(orientation);
    for hop in 1..coverage as i64 {
        if shape == CoverageShape::Bent && hop == 2 {
            dir = step(clockwise(orientation));
        }
        col += dir.0;
        row += dir.1;
        if col < 0 || row < 0 || col >= width as i64 || row >= height as i64 {
            break;
        }
        covered.push((row * width as i64 + col) as u32 + 1);
    }
    covered
}

fn step(orientation: Orientation) -> (i64, i64) {
    match orientation {
        Orientation::Up => (0, -1),
        Orientation::Down => (0, 1),
        Orientation::Left => (-1, 0),
        Orientation::Right => (1, 0),
    }
}

fn clockwise(orientation: Orientation) -> Orientation {
    match orientation {
        Orientation::Up => Orientation::Right,
        Orientation::Right => Orientation::Down,
        Orientation::Down => Orientation::Left,
        Orientation::Left => Orientation::Up,
    }
}

/// Deterministic core of the generator. Source i sits in region i; its update
/// alone serves that region. Every pair of sources covering a region from
/// outside forms a fusable combination, unless the case disables fusion.
pub fn build_grid_instance(
    width: u32,
    height: u32,
    placements: &[(Orientation, u8)],
    deadlines: &[u64],
    case: FusionCase,
    shape: CoverageShape,
    label: &str,
) -> Instance {
    let cells = (width * height) as usize;
    assert_eq!(placements.len(), cells);
    assert_eq!(deadlines.len(), cells);
    let coverage_of: Vec<Vec<u32>> = placements
        .iter()
        .enumerate()
        .map(|(i, &(orientation, coverage))| {
            covered_regions(width, height, i as u32 + 1, orientation, coverage, shape)
        })
        .collect();

    let regions = (1..=cells as u32)
        .map(|n| {
            let deadline = deadlines[n as usize - 1];
            let outside_coverers: Vec<SourceId> = (1..=cells as u32)
                .filter(|&m| m != n && coverage_of[m as usize - 1].contains(&n))
                .map(SourceId)
                .collect();
            let combos = if case == FusionCase::NoFusion {
                Vec::new()
            } else {
                pairs(&outside_coverers)
            };
            let tolerance = match case {
                FusionCase::LooseTolerance => deadline - 1,
                FusionCase::UnitTolerance | FusionCase::NoFusion => 1,
            };
            RegionSpec {
                id: n,
                deadline,
                tolerance,
                direct: vec![SourceId(n)],
                combos,
            }
        })
        .collect();
    Instance { label: label.to_string(), num_sources: cells as u32, regions }
}

fn pairs(sources: &[SourceId]) -> Vec<Vec<SourceId>> {
    let mut out = Vec::new();
    for (i, &a) in sources.iter().enumerate() {
        for &b in &sources[i + 1..] {
            out.push(vec![a, b]);
        }
    }
    out
}

/// The 3x3 worked example: nine sources A..I with coverage 2, fixed
/// orientations, deadlines [6,5,2,2,7,4,3,8,7] and unit tolerance.
pub fn nine_region_fixture() -> Instance {
    use Orientation::*;
    let orientations = [Right, Up, Up, Right, Up, Down, Right, Down, Left];
    let placements: Vec<(Orientation, u8)> = orientations.iter().map(|&o| (o, 2)).collect();
    let deadlines = [6, 5, 2, 2, 7, 4, 3, 8, 7];
    build_grid_instance(
        3,
        3,
        &placements,
        &deadlines,
        FusionCase::UnitTolerance,
        CoverageShape::Straight,
        "nine regions, coverage 2, unit tolerance",
    )
}

/// The five-region, ten-source layout whose best plan needs two channels.
/// Regions 1..5 carry the collaborating sets {A,B}, {C,D}, {E}, {F,G,H},
/// {H,I,J}; regions 6..14 pin each collaborating source to its cap through a
/// singleton direct region, which makes the fusable sets the cheapest choice;
/// sources 11..14 are decoy direct options that stay inactive.
pub fn ten_source_fixture() -> Instance {
    let mut regions = Vec::new();
    // (deadline, tolerance, direct, combo)
    let mains: [(u64, u64, u32, &[u32]); 5] = [
        (4, 1, 11, &[1, 2]),
        (9, 1, 12, &[3, 4]),
        (9, 1, 5, &[]),
        (5, 2, 13, &[6, 7, 8]),
        (6, 2, 14, &[8, 9, 10]),
    ];
    for (i, &(deadline, tolerance, direct, combo)) in mains.iter().enumerate() {
        let combos = if combo.is_empty() {
            Vec::new()
        } else {
            vec![combo.iter().map(|&m| SourceId(m)).collect()]
        };
        regions.push(RegionSpec {
            id: i as u32 + 1,
            deadline,
            tolerance,
            direct: vec![SourceId(direct)],
            combos,
        });
    }
    // Singleton regions forcing each collaborating source active at its cap.
    let caps: [(u32, u64); 9] =
        [(1, 4), (2, 4), (3, 9), (4, 9), (6, 5), (7, 5), (8, 5), (9, 6), (10, 6)];
    for (i, &(source, deadline)) in caps.iter().enumerate() {
        regions.push(RegionSpec {
            id: i as u32 + 6,
            deadline,
            tolerance: 1,
            direct: vec![SourceId(source)],
            combos: Vec::new(),
        });
    }
    Instance {
        label: "ten collaborating sources, two-channel optimum".into(),
        num_sources: 14,
        regions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ValidationReport;

    #[test]
    fn coverage_truncates_at_border() {
        // Top-row source pointing up covers only its own cell.
        let covered =
            covered_regions(3, 3, 2, Orientation::Up, 2, CoverageShape::Straight);
        assert_eq!(covered, vec![2]);
        // Mid-grid run of two to the right.
        let covered =
            covered_regions(3, 3, 4, Orientation::Right, 2, CoverageShape::Straight);
        assert_eq!(covered, vec![4, 5]);
        // Straight run of three downward from the top-left corner.
        let covered =
            covered_regions(3, 3, 1, Orientation::Down, 3, CoverageShape::Straight);
        assert_eq!(covered, vec![1, 4, 7]);
    }

    #[test]
    fn bent_shape_differs_from_straight_for_coverage_three() {
        let straight =
            covered_regions(3, 3, 1, Orientation::Right, 3, CoverageShape::Straight);
        let bent = covered_regions(3, 3, 1, Orientation::Right, 3, CoverageShape::Bent);
        assert_eq!(straight, vec![1, 2, 3]);
        assert_eq!(bent, vec![1, 2, 5]);
    }

    #[test]
    fn coverage_one_has_no_combos() {
        let scenario = GridScenario {
            width: 6,
            height: 6,
            coverage: 1,
            shape: CoverageShape::Straight,
            d_lo: 2,
            d_hi: 10,
            case: FusionCase::UnitTolerance,
            seed: 3,
        };
        let inst = scenario.generate();
        assert!(inst.regions.iter().all(|r| r.combos.is_empty()));
        assert!(inst
            .regions
            .iter()
            .all(|r| r.direct == vec![SourceId(r.id)]));
    }

    #[test]
    fn generated_instances_validate() {
        for seed in 0..20u64 {
            for case in [FusionCase::LooseTolerance, FusionCase::UnitTolerance, FusionCase::NoFusion] {
                for coverage in 1..=3u8 {
                    let scenario = GridScenario {
                        width: 4,
                        height: 3,
                        coverage,
                        shape: CoverageShape::Straight,
                        d_lo: 2,
                        d_hi: 10,
                        case,
                        seed,
                    };
                    let report: ValidationReport = scenario.generate().validate();
                    assert!(report.is_ok(), "seed {seed}: {:?}", report.violations);
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let scenario = GridScenario {
            width: 3,
            height: 3,
            coverage: 2,
            shape: CoverageShape::Straight,
            d_lo: 2,
            d_hi: 10,
            case: FusionCase::UnitTolerance,
            seed: 42,
        };
        assert_eq!(scenario.generate(), scenario.generate());
    }

    #[test]
    fn nine_region_fixture_geometry() {
        let inst = nine_region_fixture();
        assert!(inst.validate().is_ok());
        let r2 = &inst.regions[1];
        assert_eq!(r2.direct, vec![SourceId(2)]);
        assert_eq!(r2.combos, vec![vec![SourceId(1), SourceId(5)]]);
        // Region 5: the only outside coverer is source 4, too few for a pair.
        let r5 = &inst.regions[4];
        assert_eq!(r5.direct, vec![SourceId(5)]);
        assert!(r5.combos.is_empty());
        // Region 1: nothing else covers the top-left corner.
        let r1 = &inst.regions[0];
        assert!(r1.combos.is_empty());
        // Region 8 pairs its two outside coverers.
        let r8 = &inst.regions[7];
        assert_eq!(r8.combos, vec![vec![SourceId(7), SourceId(9)]]);
        assert_eq!(
            inst.regions.iter().map(|r| r.deadline).collect::<Vec<_>>(),
            vec![6, 5, 2, 2, 7, 4, 3, 8, 7]
        );
    }

    #[test]
    fn ten_source_fixture_validates() {
        let inst = ten_source_fixture();
        assert!(inst.validate().is_ok());
    }
}
