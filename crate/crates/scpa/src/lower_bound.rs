//! Channel lower bound: the fractional covering program over per-source
//! updating rates, solved exactly with a small dense simplex on rationals.

use std::collections::BTreeMap;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::model::{Instance, SourceId};

/// One covering row: `sum coeff_m * l_m >= 1 / deadline`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LbRow {
    pub region: u32,
    /// Per-source coefficient: 1 if direct, plus 1 per combination membership.
    pub coeffs: BTreeMap<SourceId, u64>,
    pub deadline: u64,
}

/// The assembled constraint system: N covering rows over M box-bounded rates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LbConstraints {
    pub num_sources: u32,
    pub rows: Vec<LbRow>,
}

/// Builds the covering rows. A source appearing in several combinations of the
/// same region is counted once per appearance.
pub fn build_lb_constraints(inst: &Instance) -> LbConstraints {
    let rows = inst
        .regions
        .iter()
        .map(|region| {
            let mut coeffs: BTreeMap<SourceId, u64> = BTreeMap::new();
            for &m in &region.direct {
                *coeffs.entry(m).or_insert(0) += 1;
            }
            for combo in &region.combos {
                for &m in combo {
                    *coeffs.entry(m).or_insert(0) += 1;
                }
            }
            LbRow { region: region.id, coeffs, deadline: region.deadline }
        })
        .collect();
    LbConstraints { num_sources: inst.num_sources, rows }
}

/// Optimal fractional rates and the induced channel lower bound.
#[derive(Debug, Clone)]
pub struct LowerBound {
    /// Optimal rate per source (sources with zero rate included).
    pub rates: BTreeMap<SourceId, f64>,
    pub rate_sum: f64,
    /// Exact optimum of the rate sum.
    pub rate_sum_exact: BigRational,
    /// ceil of the exact rate sum.
    pub channels: u64,
}

/// Minimizes the total updating rate subject to the covering rows and the
/// `0 <= l <= 1` box. Always feasible: all-ones rates satisfy every row.
pub fn solve_lb(inst: &Instance) -> Result<LowerBound> {
    let constraints = build_lb_constraints(inst);
    solve_lb_constraints(&constraints)
}

pub fn solve_lb_constraints(constraints: &LbConstraints) -> Result<LowerBound> {
    let n = constraints.num_sources as usize;
    let objective = vec![BigRational::one(); n];
    let mut rows = Vec::new();
    for row in &constraints.rows {
        let mut coeffs = vec![BigRational::zero(); n];
        for (&m, &c) in &row.coeffs {
            coeffs[m.0 as usize - 1] = big(c);
        }
        let rhs = BigRational::new(BigInt::from(1), BigInt::from(row.deadline));
        rows.push((coeffs, Relation::Ge, rhs));
    }
    for j in 0..n {
        let mut coeffs = vec![BigRational::zero(); n];
        coeffs[j] = BigRational::one();
        rows.push((coeffs, Relation::Le, BigRational::one()));
    }
    let lp = DenseLp { num_vars: n, objective, rows };
    let (solution, value) = simplex_min(&lp)?;
    let rates: BTreeMap<SourceId, f64> = (0..n)
        .map(|j| (SourceId(j as u32 + 1), solution[j].to_f64().unwrap_or(0.0)))
        .collect();
    // Exact arithmetic makes the ceiling immune to the float artifacts the
    // 1e-9 guard would otherwise absorb.
    let channels = value.ceil().to_integer().to_u64().unwrap_or(0);
    Ok(LowerBound {
        rates,
        rate_sum: value.to_f64().unwrap_or(f64::NAN),
        rate_sum_exact: value,
        channels,
    })
}

fn big(v: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Relation {
    Ge,
    Le,
}

/// A dense LP in inequality form with nonnegative variables.
pub(crate) struct DenseLp {
    pub num_vars: usize,
    pub objective: Vec<BigRational>,
    /// (coefficients, relation, rhs) with rhs >= 0.
    pub rows: Vec<(Vec<BigRational>, Relation, BigRational)>,
}

/// Two-phase primal simplex with Bland's rule; exact rational pivoting.
pub(crate) fn simplex_min(lp: &DenseLp) -> Result<(Vec<BigRational>, BigRational)> {
    let m = lp.rows.len();
    let n = lp.num_vars;
    let num_slack = m;
    let num_artificial = lp.rows.iter().filter(|r| r.1 == Relation::Ge).count();
    let total = n + num_slack + num_artificial;

    // tableau[i] = [coeffs.., rhs]
    let mut tab: Vec<Vec<BigRational>> = vec![vec![BigRational::zero(); total + 1]; m];
    let mut basis = vec![0usize; m];
    let mut artificial_cols = Vec::new();
    let mut next_artificial = n + num_slack;
    for (i, (coeffs, rel, rhs)) in lp.rows.iter().enumerate() {
        debug_assert!(!rhs.is_negative());
        for (j, c) in coeffs.iter().enumerate() {
            tab[i][j] = c.clone();
        }
        tab[i][total] = rhs.clone();
        match rel {
            Relation::Le => {
                tab[i][n + i] = BigRational::one();
                basis[i] = n + i;
            }
            Relation::Ge => {
                tab[i][n + i] = -BigRational::one();
                tab[i][next_artificial] = BigRational::one();
                basis[i] = next_artificial;
                artificial_cols.push(next_artificial);
                next_artificial += 1;
            }
        }
    }

    // Phase 1: minimize the sum of artificials.
    if num_artificial > 0 {
        let mut obj = vec![BigRational::zero(); total + 1];
        for &col in &artificial_cols {
            obj[col] = BigRational::one();
        }
        for i in 0..m {
            if artificial_cols.contains(&basis[i]) {
                for (slot, cell) in obj.iter_mut().zip(&tab[i]) {
                    *slot -= cell;
                }
            }
        }
        run_simplex(&mut tab, &mut obj, &mut basis, total)?;
        if !obj[total].is_zero() {
            // Sum of artificials positive at optimum: infeasible. The covering
            // rows always admit all-ones rates, so this indicates a caller bug.
            return Err(Error::LpDidNotConverge);
        }
        // Drive any artificial still basic (at zero) out of the basis.
        for i in 0..m {
            if artificial_cols.contains(&basis[i]) {
                if let Some(j) = (0..n + num_slack).find(|&j| !tab[i][j].is_zero()) {
                    pivot(&mut tab, &mut [], i, j);
                    basis[i] = j;
                }
            }
        }
        // Forbid artificials from re-entering.
        for row in tab.iter_mut() {
            for &col in &artificial_cols {
                row[col] = BigRational::zero();
            }
        }
    }

    // Phase 2: the real objective, canonicalized against the current basis.
    let mut obj = vec![BigRational::zero(); total + 1];
    obj[..n].clone_from_slice(&lp.objective[..n]);
    for i in 0..m {
        let c_b = if basis[i] < n { lp.objective[basis[i]].clone() } else { BigRational::zero() };
        if !c_b.is_zero() {
            for (slot, cell) in obj.iter_mut().zip(&tab[i]) {
                *slot -= &c_b * cell;
            }
        }
    }
    run_simplex(&mut tab, &mut obj, &mut basis, total)?;

    let mut solution = vec![BigRational::zero(); n];
    for i in 0..m {
        if basis[i] < n {
            solution[basis[i]] = tab[i][total].clone();
        }
    }
    let value = -obj[total].clone();
    Ok((solution, value))
}

/// Pivots until no reduced cost is negative. Bland's rule on both choices.
fn run_simplex(
    tab: &mut [Vec<BigRational>],
    obj: &mut [BigRational],
    basis: &mut [usize],
    total: usize,
) -> Result<()> {
    let max_iters = 50_000;
    for _ in 0..max_iters {
        let entering = (0..total).find(|&j| obj[j].is_negative());
        let Some(col) = entering else { return Ok(()) };
        let mut leaving: Option<(usize, BigRational)> = None;
        for (i, row) in tab.iter().enumerate() {
            if row[col].is_positive() {
                let ratio = &row[total] / &row[col];
                let better = match &leaving {
                    None => true,
                    Some((best_i, best)) => {
                        ratio < *best || (ratio == *best && basis[i] < basis[*best_i])
                    }
                };
                if better {
                    leaving = Some((i, ratio));
                }
            }
        }
        let Some((row_idx, _)) = leaving else {
            // Unbounded direction; impossible for the box-bounded rate program.
            return Err(Error::LpDidNotConverge);
        };
        pivot(tab, obj, row_idx, col);
        basis[row_idx] = col;
    }
    Err(Error::LpDidNotConverge)
}

fn pivot(tab: &mut [Vec<BigRational>], obj: &mut [BigRational], row: usize, col: usize) {
    let pivot_val = tab[row][col].clone();
    for v in tab[row].iter_mut() {
        *v /= &pivot_val;
    }
    let pivot_row = tab[row].clone();
    for (i, r) in tab.iter_mut().enumerate() {
        if i != row && !r[col].is_zero() {
            let factor = r[col].clone();
            for (slot, cell) in r.iter_mut().zip(&pivot_row) {
                *slot -= &factor * cell;
            }
        }
    }
    // The objective row may be absent (post-phase-1 basis repair).
    if obj.get(col).is_some_and(|v| !v.is_zero()) {
        let factor = obj[col].clone();
        for (slot, cell) in obj.iter_mut().zip(&pivot_row) {
            *slot -= &factor * cell;
        }
    }
}
