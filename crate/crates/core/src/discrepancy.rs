//! Exact local and star discrepancy of point sets in [0,1)^d, tuple
//! extraction from driving sequences, and the analytic bounds used as
//! computable references.
//!
//! The star discrepancy scan is exact: the supremum over anchored boxes
//! is attained on the critical grid whose per-dimension coordinates are
//! the point coordinates plus 1. Boxes in the defining count are closed;
//! the supremum from below at a point coordinate is captured by also
//! evaluating the open count at every grid corner.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seq::DrivingSequence;
use crate::seqgen::totient;

/// Default refusal threshold for the exact scan, in corner-count
/// operations.
pub const DEFAULT_WORK_BUDGET: u128 = 1_000_000_000;

/// n points in [0,1)^d, stored flat row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    flat: Vec<f64>,
    n: usize,
    d: usize,
}

impl PointSet {
    pub fn from_flat(flat: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::domain("dimension must be positive"));
        }
        if flat.is_empty() || flat.len() % d != 0 {
            return Err(Error::domain(format!(
                "flat buffer of {} values is not a positive multiple of d = {d}",
                flat.len()
            )));
        }
        for &v in &flat {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::domain(format!("coordinate out of [0,1): {v}")));
            }
        }
        let n = flat.len() / d;
        Ok(PointSet { flat, n, d })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.flat[i * self.d..(i + 1) * self.d]
    }

    pub fn iter_points(&self) -> impl Iterator<Item = &[f64]> {
        self.flat.chunks(self.d)
    }
}

/// Tuple extraction mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TupleMode {
    Overlapping,
    NonOverlapping,
}

impl TupleMode {
    pub fn tag(&self) -> &'static str {
        match self {
            TupleMode::Overlapping => "overlap",
            TupleMode::NonOverlapping => "block",
        }
    }
}

/// The n-d+1 overlapping d-tuples (u_i, ..., u_{i+d-1}).
pub fn overlapping_tuples(u: &DrivingSequence, d: usize) -> Result<PointSet> {
    let vals = u.values();
    if d == 0 {
        return Err(Error::domain("tuple dimension must be positive"));
    }
    if d > vals.len() {
        return Err(Error::domain(format!(
            "cannot form {d}-tuples from {} values",
            vals.len()
        )));
    }
    let n = vals.len() - d + 1;
    let mut flat = Vec::with_capacity(n * d);
    for i in 0..n {
        flat.extend_from_slice(&vals[i..i + d]);
    }
    PointSet::from_flat(flat, d)
}

/// The floor(n/d) non-overlapping d-tuples; a trailing remainder is
/// dropped.
pub fn nonoverlapping_tuples(u: &DrivingSequence, d: usize) -> Result<PointSet> {
    let vals = u.values();
    if d == 0 {
        return Err(Error::domain("tuple dimension must be positive"));
    }
    if d > vals.len() {
        return Err(Error::domain(format!(
            "cannot form {d}-tuples from {} values",
            vals.len()
        )));
    }
    let blocks = vals.len() / d;
    PointSet::from_flat(vals[..blocks * d].to_vec(), d)
}

/// Local discrepancy at anchor `z`: |closed count / n - Vol([0,z])|.
pub fn local_discrepancy(points: &PointSet, z: &[f64]) -> Result<f64> {
    if z.len() != points.dim() {
        return Err(Error::domain(format!(
            "anchor dimension {} does not match point dimension {}",
            z.len(),
            points.dim()
        )));
    }
    for &c in z {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::domain(format!("anchor coordinate out of [0,1]: {c}")));
        }
    }
    let inside = points
        .iter_points()
        .filter(|p| p.iter().zip(z).all(|(x, zz)| x <= zz))
        .count();
    let vol: f64 = z.iter().product();
    Ok((inside as f64 / points.len() as f64 - vol).abs())
}

/// Exact star discrepancy with the default work budget.
pub fn star_discrepancy_default(points: &PointSet) -> Result<f64> {
    star_discrepancy(points, DEFAULT_WORK_BUDGET)
}

/// Exact star discrepancy: sup over anchored boxes of the local
/// discrepancy. Refuses with `Error::BudgetExceeded` when the critical
/// grid would need more than `budget` corner operations.
pub fn star_discrepancy(points: &PointSet, budget: u128) -> Result<f64> {
    if points.dim() == 1 {
        let mut vals: Vec<f64> = points.iter_points().map(|p| p[0]).collect();
        return Ok(star_discrepancy_sorted(&mut vals));
    }
    star_discrepancy_grid(points, budget)
}

/// One-dimensional star discrepancy by the sorted formula, adjusted for
/// the closed-box convention (ties contribute their full closed count).
pub fn star_discrepancy_sorted(values: &mut [f64]) -> f64 {
    let n = values.len() as f64;
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best = 0.0f64;
    let mut i = 0;
    while i < values.len() {
        let v = values[i];
        let before = i;
        while i < values.len() && values[i] == v {
            i += 1;
        }
        let closed = i;
        best = best.max(closed as f64 / n - v).max(v - before as f64 / n);
    }
    best
}

/// Grid-scan star discrepancy for any dimension (also valid at d = 1;
/// used there only for cross-checking against the sorted formula).
pub fn star_discrepancy_grid(points: &PointSet, budget: u128) -> Result<f64> {
    let d = points.dim();
    let n = points.len();
    // per-dimension critical coordinates: distinct point coords plus 1
    let grids: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut g: Vec<f64> = (0..n).map(|i| points.point(i)[j]).collect();
            g.sort_by(|a, b| a.partial_cmp(b).unwrap());
            g.dedup();
            g.push(1.0);
            g
        })
        .collect();
    let corners: u128 = grids.iter().map(|g| g.len() as u128).product();
    if corners > budget {
        return Err(Error::BudgetExceeded {
            required: corners,
            budget,
        });
    }

    // subset entries carry (point index, inherited strictness)
    let root: Vec<(u32, bool)> = (0..n as u32).map(|i| (i, true)).collect();

    // parallelize over the first grid dimension; max-reduction is order
    // independent, so the result does not depend on the thread count
    let top = &grids[0];
    let best = top
        .par_iter()
        .map(|&z0| {
            if d == 1 {
                // single dimension: the top level is already the leaf
                let closed = (0..n).filter(|&i| points.point(i)[0] <= z0).count();
                let open = (0..n).filter(|&i| points.point(i)[0] < z0).count();
                return (closed as f64 / n as f64 - z0).max(z0 - open as f64 / n as f64);
            }
            let mut child: Vec<(u32, bool)> = Vec::with_capacity(n);
            for &(idx, strict) in &root {
                let x = points.point(idx as usize)[0];
                if x <= z0 {
                    child.push((idx, strict && x < z0));
                }
            }
            scan_level(points, &grids, 1, z0, &child)
        })
        .reduce(|| 0.0f64, f64::max);
    Ok(best)
}

fn scan_level(
    points: &PointSet,
    grids: &[Vec<f64>],
    dim: usize,
    vol: f64,
    subset: &[(u32, bool)],
) -> f64 {
    let n = points.len() as f64;
    let grid = &grids[dim];
    let last = dim + 1 == grids.len();

    if subset.is_empty() {
        // no closed count can beat the volume term; the volume is
        // maximized with every remaining coordinate at 1
        return vol;
    }

    let mut order: Vec<(f64, u32, bool)> = subset
        .iter()
        .map(|&(idx, strict)| (points.point(idx as usize)[dim], idx, strict))
        .collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut best = 0.0f64;
    if last {
        // sweep: closed = #{x <= z}, strict_open = #{strict && x < z}
        let mut closed = 0usize;
        let mut open = 0usize;
        let mut strict_open = 0usize;
        for &z in grid {
            while open < order.len() && order[open].0 < z {
                if order[open].2 {
                    strict_open += 1;
                }
                open += 1;
            }
            while closed < order.len() && order[closed].0 <= z {
                closed += 1;
            }
            let v = vol * z;
            best = best
                .max(closed as f64 / n - v)
                .max(v - strict_open as f64 / n);
        }
        best
    } else {
        let mut included = 0usize;
        for &z in grid {
            while included < order.len() && order[included].0 <= z {
                included += 1;
            }
            if included == 0 {
                best = best.max(vol * z);
                continue;
            }
            let child: Vec<(u32, bool)> = order[..included]
                .iter()
                .map(|&(x, idx, strict)| (idx, strict && x < z))
                .collect();
            best = best.max(scan_level(points, grids, dim + 1, vol * z, &child));
        }
        best
    }
}

/// Niederreiter's discrepancy bound for the overlapping s-tuples of a
/// well-chosen full-period LCG modulo the prime N.
pub fn niederreiter_bound(n: u64, s: u32) -> Result<f64> {
    if n < 3 || !crate::seqgen::is_prime(n) {
        return Err(Error::domain(format!("N must be a prime >= 3, got {n}")));
    }
    if s == 0 {
        return Err(Error::domain("dimension s must be positive"));
    }
    let nf = n as f64;
    let phi = totient(n - 1)? as f64;
    let lead = 1.0 / (nf - 1.0);
    let middle = 1.0 + (nf - 2.0) * (s as f64 - 1.0) / phi;
    let log_factor = (2.0 / std::f64::consts::PI) * nf.ln() + 7.0 / 5.0;
    Ok(lead * middle * log_factor.powi(s as i32))
}

/// Non-asymptotic bound on |Pr(z in [0,z]) - Vol| for a randomly
/// reordered point set of star discrepancy at most `d_star`, regrouped
/// from s-tuples into d-tuples.
pub fn lemma3_bound(d_star: f64, n: usize, s: usize, d: usize) -> Result<f64> {
    if !(0.0..1.0 / 3.0).contains(&d_star) {
        return Err(Error::domain(format!(
            "bound requires 0 <= D < 1/3, got {d_star}"
        )));
    }
    if s == 0 || d == 0 {
        return Err(Error::domain("s and d must be positive"));
    }
    let chunks = (d - 1).div_ceil(s); // ceil((d-1)/s)
    if n <= 3 * chunks {
        return Err(Error::domain(format!(
            "bound requires n > 3*ceil((d-1)/s) = {}",
            3 * chunks
        )));
    }
    let factor = 2f64.powi(1 + chunks as i32) - 1.0;
    Ok(1.5 * factor * (d_star + chunks as f64 / n as f64))
}

/// One row of a diagnostic report: the exact star discrepancy of the
/// d-tuples of a sequence, one value per replication.
#[derive(Debug, Clone)]
pub struct DiscrepancyRecord {
    pub d: usize,
    pub mode: TupleMode,
    pub n_tuples: usize,
    pub d_star: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct DiscrepancyReport {
    pub records: Vec<DiscrepancyRecord>,
}

impl DiscrepancyReport {
    /// CSV with columns d, mode, n_tuples, d_star (one row per rep).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("d,mode,n_tuples,d_star\n");
        for rec in &self.records {
            for v in &rec.d_star {
                out.push_str(&format!(
                    "{},{},{},{:.16e}\n",
                    rec.d,
                    rec.mode.tag(),
                    rec.n_tuples,
                    v
                ));
            }
        }
        out
    }
}

/// Empirical WCUD battery: exact D* of overlapping and non-overlapping
/// d-tuples for each requested dimension, over `reps` independently
/// seeded realizations of the sequence.
pub fn wcud_diagnostic<F>(
    generate: F,
    dims: &[usize],
    reps: u64,
    budget: u128,
) -> Result<DiscrepancyReport>
where
    F: Fn(u64) -> Result<DrivingSequence>,
{
    let mut report = DiscrepancyReport::default();
    for &d in dims {
        let mut over = DiscrepancyRecord {
            d,
            mode: TupleMode::Overlapping,
            n_tuples: 0,
            d_star: Vec::new(),
        };
        let mut non = DiscrepancyRecord {
            d,
            mode: TupleMode::NonOverlapping,
            n_tuples: 0,
            d_star: Vec::new(),
        };
        for rep in 0..reps {
            let seq = generate(rep)?;
            let po = overlapping_tuples(&seq, d)?;
            over.n_tuples = po.len();
            over.d_star.push(star_discrepancy(&po, budget)?);
            let pn = nonoverlapping_tuples(&seq, d)?;
            non.n_tuples = pn.len();
            non.d_star.push(star_discrepancy(&pn, budget)?);
        }
        report.records.push(over);
        report.records.push(non);
    }
    Ok(report)
}
