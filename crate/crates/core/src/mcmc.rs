//! Finite-state Metropolis-Hastings driven by an arbitrary unit stream,
//! plus acceptance-rejection sampling with IID padding.
//!
//! Proposals must be piecewise-constant maps of the uniforms whose
//! preimage cells are finite unions of axis-parallel boxes; the engine
//! cannot verify this for arbitrary user proposals, it can only document
//! the requirement. The bundled matrix proposal (inversion of a single
//! uniform against a row-stochastic matrix) satisfies it by construction.

use std::io::Write;

use crate::error::{Error, Result};
use crate::seq::DrivingSequence;

/// A proposal map Ψ(ω, u_1..u_{m-1}) on states {0, ..., K-1}.
pub trait Proposal: Send + Sync {
    /// Number of uniforms consumed per proposal (m - 1).
    fn uniforms(&self) -> usize;
    /// Candidate state proposed from `from` given the uniforms.
    fn propose(&self, from: usize, u: &[f64]) -> usize;
    /// Proposal probability p(from -> to).
    fn prob(&self, from: usize, to: usize) -> f64;
}

/// Row-stochastic proposal matrix realized by inversion of one uniform:
/// the candidate is the first state whose cumulative row sum exceeds u.
#[derive(Debug, Clone)]
pub struct MatrixProposal {
    rows: Vec<Vec<f64>>,
}

impl MatrixProposal {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::validation("empty proposal matrix"));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::validation(format!(
                    "proposal row {i} has {} entries, expected {k}",
                    row.len()
                )));
            }
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::validation(format!(
                    "proposal row {i} has entries outside [0,1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::validation(format!(
                    "proposal row {i} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(MatrixProposal { rows })
    }
}

impl Proposal for MatrixProposal {
    fn uniforms(&self) -> usize {
        1
    }

    fn propose(&self, from: usize, u: &[f64]) -> usize {
        let row = &self.rows[from];
        let mut acc = 0.0;
        for (j, &p) in row.iter().enumerate() {
            acc += p;
            if u[0] < acc {
                return j;
            }
        }
        row.len() - 1
    }

    fn prob(&self, from: usize, to: usize) -> f64 {
        self.rows[from][to]
    }
}

/// A finite-state target with a proposal kernel.
pub struct FiniteMhModel {
    target: Vec<f64>,
    proposal: Box<dyn Proposal>,
}

impl FiniteMhModel {
    pub fn new(target: Vec<f64>, proposal: Box<dyn Proposal>) -> Result<Self> {
        if target.is_empty() {
            return Err(Error::validation("empty target distribution"));
        }
        if target.iter().any(|&p| p <= 0.0) {
            return Err(Error::validation("target must be strictly positive"));
        }
        let sum: f64 = target.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!(
                "target sums to {sum}, expected 1"
            )));
        }
        Ok(FiniteMhModel { target, proposal })
    }

    pub fn k(&self) -> usize {
        self.target.len()
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    /// Uniforms consumed per step: proposal draws plus the accept draw.
    pub fn m(&self) -> usize {
        self.proposal.uniforms() + 1
    }

    /// Parse a plain-text model: K on the first line, then the K target
    /// probabilities, then K rows of the proposal matrix. Blank lines
    /// and `#` comments are ignored; the matrix proposal uses inversion
    /// of the first uniform.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| l.split_whitespace())
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .into_iter();
        let k: usize = tokens
            .next()
            .ok_or_else(|| Error::validation("model file is empty"))?
            .parse()
            .map_err(|_| Error::validation("first token must be the state count K"))?;
        let mut need = |what: &str| -> Result<f64> {
            tokens
                .next()
                .ok_or_else(|| Error::validation(format!("missing {what}")))?
                .parse()
                .map_err(|_| Error::validation(format!("unparsable {what}")))
        };
        let target: Vec<f64> = (0..k)
            .map(|i| need(&format!("target probability {i}")))
            .collect::<Result<_>>()?;
        let mut rows = Vec::with_capacity(k);
        for i in 0..k {
            let row: Vec<f64> = (0..k)
                .map(|j| need(&format!("proposal entry ({i},{j})")))
                .collect::<Result<_>>()?;
            rows.push(row);
        }
        FiniteMhModel::new(target, Box::new(MatrixProposal::new(rows)?))
    }
}

/// The Metropolis-Hastings acceptance probability
/// min(1, π(to)·p(to→from) / (π(from)·p(from→to))).
pub fn acceptance_probability(model: &FiniteMhModel, from: usize, to: usize) -> Result<f64> {
    let fwd = model.proposal.prob(from, to);
    if fwd <= 0.0 {
        return Err(Error::domain(format!(
            "proposal probability {from} -> {to} is zero"
        )));
    }
    let ratio = model.target[to] * model.proposal.prob(to, from) / (model.target[from] * fwd);
    Ok(ratio.min(1.0))
}

/// One transition: propose from u_1..u_{m-1}, accept iff u_m <= A.
pub fn mh_step(model: &FiniteMhModel, current: usize, u: &[f64]) -> Result<usize> {
    let m = model.m();
    if u.len() != m {
        return Err(Error::domain(format!(
            "step needs exactly {m} uniforms, got {}",
            u.len()
        )));
    }
    let candidate = model.proposal.propose(current, &u[..m - 1]);
    let a = acceptance_probability(model, current, candidate)?;
    Ok(if u[m - 1] <= a { candidate } else { current })
}

/// States visited after the start state (the start is excluded from
/// empirical frequencies).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub start: usize,
    pub states: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// CSV dump: step, state (step 0 is the start state).
    pub fn dump_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "step,state")?;
        writeln!(w, "0,{}", self.start)?;
        for (i, s) in self.states.iter().enumerate() {
            writeln!(w, "{},{s}", i + 1)?;
        }
        Ok(())
    }
}

/// Run exactly floor(len/m) steps, consuming uniforms in order; leftover
/// uniforms are discarded.
pub fn run_chain(
    model: &FiniteMhModel,
    driving: &DrivingSequence,
    start: usize,
) -> Result<Trajectory> {
    let m = model.m();
    if start >= model.k() {
        return Err(Error::domain(format!(
            "start state {start} out of range 0..{}",
            model.k()
        )));
    }
    let vals = driving.values();
    if vals.len() < m {
        return Err(Error::domain(format!(
            "driving sequence of length {} is shorter than one step (m = {m})",
            vals.len()
        )));
    }
    let steps = vals.len() / m;
    let mut states = Vec::with_capacity(steps);
    let mut current = start;
    for i in 0..steps {
        current = mh_step(model, current, &vals[i * m..(i + 1) * m])?;
        states.push(current);
    }
    Ok(Trajectory { start, states })
}

/// Fraction of time spent in each state over ω^(1)..ω^(n).
pub fn empirical_distribution(t: &Trajectory, k: usize) -> Result<Vec<f64>> {
    if t.states.is_empty() {
        return Err(Error::domain("empty trajectory"));
    }
    let mut counts = vec![0usize; k];
    for &s in &t.states {
        if s >= k {
            return Err(Error::domain(format!("state {s} out of range 0..{k}")));
        }
        counts[s] += 1;
    }
    let n = t.states.len() as f64;
    Ok(counts.iter().map(|&c| c as f64 / n).collect())
}

/// Consistency report: sup-norm errors of a series of empirical
/// distributions against the target, at increasing sample sizes.
#[derive(Debug, Clone)]
pub struct ConsistencyReport {
    pub sample_sizes: Vec<usize>,
    pub sup_errors: Vec<f64>,
    pub epsilon: f64,
    pub pass: bool,
}

/// Empirical counterpart of the consistency predicates: the chain passes
/// if the largest-n sup-norm error falls below `epsilon`.
pub fn consistency_check(
    series: &[(usize, Vec<f64>)],
    target: &[f64],
    epsilon: f64,
) -> Result<ConsistencyReport> {
    if series.len() < 2 {
        return Err(Error::domain("need at least two sample sizes"));
    }
    let mut sample_sizes = Vec::with_capacity(series.len());
    let mut sup_errors = Vec::with_capacity(series.len());
    for (n, pi_hat) in series {
        if pi_hat.len() != target.len() {
            return Err(Error::domain(format!(
                "distribution over {} states, target has {}",
                pi_hat.len(),
                target.len()
            )));
        }
        let err = pi_hat
            .iter()
            .zip(target)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        sample_sizes.push(*n);
        sup_errors.push(err);
    }
    let pass = *sup_errors.last().unwrap() < epsilon;
    Ok(ConsistencyReport {
        sample_sizes,
        sup_errors,
        epsilon,
        pass,
    })
}

/// Acceptance-rejection specification: target density f, envelope
/// density g with inverse CDF, and a constant c with f <= c·g.
pub struct ArSpec {
    pub f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub g: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub g_inv_cdf: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub c: f64,
}

impl ArSpec {
    pub fn new(
        f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
        g: Box<dyn Fn(f64) -> f64 + Send + Sync>,
        g_inv_cdf: Box<dyn Fn(f64) -> f64 + Send + Sync>,
        c: f64,
    ) -> Result<Self> {
        if c < 1.0 {
            return Err(Error::domain(format!(
                "envelope constant must be >= 1, got {c}"
            )));
        }
        Ok(ArSpec { f, g, g_inv_cdf, c })
    }

    /// Acceptance ratio f(y) / (c·g(y)); errors if the envelope is
    /// violated at y (checked lazily, at sampled points only).
    fn ratio(&self, y: f64) -> Result<f64> {
        let gy = (self.g)(y);
        if gy <= 0.0 {
            return Err(Error::domain(format!(
                "envelope density is zero at sampled point {y}"
            )));
        }
        let r = (self.f)(y) / (self.c * gy);
        if r > 1.0 {
            return Err(Error::domain(format!(
                "envelope violated at {y}: f exceeds c*g"
            )));
        }
        Ok(r)
    }
}

/// One accepted draw and the number of fallback pairs consumed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArDraw {
    pub value: f64,
    pub fallback_pairs: usize,
}

/// Acceptance-rejection with padding: the primary pair drives the first
/// proposal and decision; rejections fall back to an auxiliary IID
/// stream, so each transition consumes a fixed driving budget.
pub fn ar_sample(
    spec: &ArSpec,
    primary: (f64, f64),
    fallback: &mut impl FnMut() -> f64,
) -> Result<ArDraw> {
    let y = (spec.g_inv_cdf)(primary.0);
    if primary.1 <= spec.ratio(y)? {
        return Ok(ArDraw {
            value: y,
            fallback_pairs: 0,
        });
    }
    let mut pairs = 0;
    loop {
        pairs += 1;
        let y = (spec.g_inv_cdf)(fallback());
        if fallback() <= spec.ratio(y)? {
            return Ok(ArDraw {
                value: y,
                fallback_pairs: pairs,
            });
        }
    }
}
