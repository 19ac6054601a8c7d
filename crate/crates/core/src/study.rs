//! Replication study orchestration: assemble driving sequences per
//! method, run independent probit chains, and reduce them to
//! variance-reduction and bias tables plus plottable summaries.
//!
//! Everything here is a pure function of (config, master seed). Each
//! replication owns labelled sub-streams keyed by its index, and
//! aggregation is an ordered reduction over replication indices, so the
//! output is byte-identical regardless of how many workers run.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::discrepancy::nonoverlapping_tuples;
use crate::error::{Error, Result};
use crate::probit::{param_labels, run_posterior_means, ProbitData, GIBBS_M};
use crate::rng::{draw_units, StreamFactory};
use crate::seq::{DrivingSequence, Method};
use crate::seqgen::{cp_rotate, liao_shuffle, random_permutation, tableau_sequence, LatticeSpec};

/// One (method, N) study arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub method: Method,
    pub n: u64,
    /// lattice multiplier; ignored for the IID baseline
    pub a: u64,
    pub reps: u64,
    pub seed: u64,
    pub burn: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps < 2 {
            return Err(Error::validation(format!(
                "need at least 2 replications, got {}",
                self.reps
            )));
        }
        match self.method {
            Method::Iid => Ok(()),
            Method::LcgCp | Method::Liao => {
                LatticeSpec::new(self.n, self.a, GIBBS_M).map(|_| ())
            }
            other => Err(Error::validation(format!(
                "study method must be iid, lcg-cp or liao, got {other}"
            ))),
        }
    }
}

/// Driving sequence for one replication: N·42 units.
///
/// iid draws fresh pseudorandom units; lcg-cp flattens the lattice
/// tableau with every row shifted by one fresh 42-dimensional rotation;
/// liao additionally reorders the rotated rows by a fresh uniform
/// permutation.
pub fn build_driver(config: &ExperimentConfig, rep: u64) -> Result<DrivingSequence> {
    config.validate()?;
    let factory = StreamFactory::new(config.seed);
    match config.method {
        Method::Iid => {
            let len = config.n as usize * GIBBS_M;
            DrivingSequence::new(
                draw_units(&mut factory.stream("iid-driver", rep), len),
                Method::Iid,
                crate::seq::SeqMeta {
                    n: Some(config.n),
                    m: Some(GIBBS_M),
                    seed: Some(config.seed),
                },
            )
        }
        Method::LcgCp | Method::Liao => {
            let spec = LatticeSpec::new(config.n, config.a, GIBBS_M)?;
            let base = tableau_sequence(&spec);
            let rotation = draw_units(&mut factory.stream("rotation", rep), GIBBS_M);
            let rotated = cp_rotate(&base, &rotation, GIBBS_M)?;
            if config.method == Method::LcgCp {
                return Ok(rotated);
            }
            let rows = nonoverlapping_tuples(&rotated, GIBBS_M)?;
            let tau = random_permutation(rows.len(), &mut factory.stream("tau", rep))?;
            liao_shuffle(&rows, &tau)
        }
        other => Err(Error::validation(format!("unsupported study method {other}"))),
    }
}

/// Cross-replication summary for one study arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationReport {
    pub method: Method,
    pub n: u64,
    pub reps: u64,
    /// per-replication posterior means, indexed [rep][param]
    pub rep_means: Vec<Vec<f64>>,
    /// replication average of the posterior mean, per parameter
    pub means: Vec<f64>,
    /// unbiased cross-replication variance, per parameter
    pub variances: Vec<f64>,
}

/// Run R independent chains of N sweeps each and reduce to per-parameter
/// cross-replication mean and unbiased variance.
pub fn run_replications(config: &ExperimentConfig, data: &ProbitData) -> Result<ReplicationReport> {
    config.validate()?;
    let rep_means: Vec<Vec<f64>> = (0..config.reps)
        .into_par_iter()
        .map(|rep| {
            let driver = build_driver(config, rep)?;
            Ok(run_posterior_means(data, &driver, config.burn)?.params)
        })
        .collect::<Result<_>>()?;

    let p = rep_means[0].len();
    let r = config.reps as f64;
    let mut means = vec![0.0f64; p];
    for rm in &rep_means {
        for (m, v) in means.iter_mut().zip(rm) {
            *m += v / r;
        }
    }
    let mut variances = vec![0.0f64; p];
    for rm in &rep_means {
        for j in 0..p {
            variances[j] += (rm[j] - means[j]).powi(2) / (r - 1.0);
        }
    }
    Ok(ReplicationReport {
        method: config.method,
        n: config.n,
        reps: config.reps,
        rep_means,
        means,
        variances,
    })
}

/// Per-parameter variance-reduction factors of `method` against
/// `baseline`, with the two-sided F significance threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct VrfTable {
    pub method: Method,
    pub baseline: Method,
    pub n: u64,
    pub ratios: Vec<f64>,
    /// ratios inside (1/threshold, threshold) are not significant
    pub threshold: f64,
}

/// 0.975 quantile of F with (r-1, r-1) degrees of freedom; the paper's
/// 1.25 rule at R = 300, recomputed for other replication counts.
pub fn vrf_threshold(reps: u64) -> Result<f64> {
    if reps < 2 {
        return Err(Error::domain("need at least 2 replications".to_string()));
    }
    let df = (reps - 1) as f64;
    let f = FisherSnedecor::new(df, df)
        .map_err(|e| Error::domain(format!("F distribution setup: {e}")))?;
    Ok(f.inverse_cdf(0.975))
}

pub fn variance_reduction(
    baseline: &ReplicationReport,
    method: &ReplicationReport,
) -> Result<VrfTable> {
    if baseline.n != method.n {
        return Err(Error::validation(format!(
            "mismatched N: {} vs {}",
            baseline.n, method.n
        )));
    }
    if baseline.reps != method.reps {
        return Err(Error::validation(format!(
            "mismatched replication counts: {} vs {}",
            baseline.reps, method.reps
        )));
    }
    if baseline.variances.len() != method.variances.len() {
        return Err(Error::validation("mismatched parameter sets".to_string()));
    }
    let ratios = baseline
        .variances
        .iter()
        .zip(&method.variances)
        .map(|(b, m)| b / m)
        .collect();
    Ok(VrfTable {
        method: method.method,
        baseline: baseline.method,
        n: method.n,
        ratios,
        threshold: vrf_threshold(method.reps)?,
    })
}

/// Quantile by linear interpolation between order statistics: the
/// quantile at q is value[(n-1)q] with fractional indices interpolated.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("quantile of an empty sample".to_string()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::domain(format!("quantile level out of [0,1]: {q}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Summary of paired parameter-mean differences between two methods,
/// pooled over N.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasRow {
    pub label: String,
    pub min: f64,
    pub q25: f64,
    pub q75: f64,
    pub max: f64,
}

/// Differences of replication-averaged posterior means, a minus b,
/// matched by N and pooled, reduced to min/Q.25/Q.75/max.
pub fn bias_summary(a: &[&ReplicationReport], b: &[&ReplicationReport]) -> Result<BiasRow> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::validation(
            "bias summary needs matching non-empty report lists".to_string(),
        ));
    }
    let mut diffs = Vec::new();
    for (ra, rb) in a.iter().zip(b) {
        if ra.n != rb.n {
            return Err(Error::validation(format!(
                "mismatched N in bias pair: {} vs {}",
                ra.n, rb.n
            )));
        }
        if ra.means.len() != rb.means.len() {
            return Err(Error::validation("mismatched parameter sets".to_string()));
        }
        diffs.extend(ra.means.iter().zip(&rb.means).map(|(x, y)| x - y));
    }
    Ok(BiasRow {
        label: format!("{}-{}", a[0].method, b[0].method),
        min: quantile(&diffs, 0.0)?,
        q25: quantile(&diffs, 0.25)?,
        q75: quantile(&diffs, 0.75)?,
        max: quantile(&diffs, 1.0)?,
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV of one arm's cross-replication summary:
/// method,n,param,mean,variance.
pub fn report_csv(reports: &[&ReplicationReport]) -> String {
    let labels = param_labels();
    let mut out = String::from("method,n,param,mean,variance\n");
    for rep in reports {
        for (j, label) in labels.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{label},{},{}\n",
                rep.method,
                rep.n,
                fmt(rep.means[j]),
                fmt(rep.variances[j])
            ));
        }
    }
    out
}

/// CSV of per-replication posterior means: method,n,rep,<42 params>.
pub fn rep_means_csv(report: &ReplicationReport) -> String {
    let mut out = format!("method,n,rep,{}\n", param_labels().join(","));
    for (rep, row) in report.rep_means.iter().enumerate() {
        let values: Vec<String> = row.iter().map(|&v| fmt(v)).collect();
        out.push_str(&format!(
            "{},{},{rep},{}\n",
            report.method,
            report.n,
            values.join(",")
        ));
    }
    out
}

/// CSV of variance-reduction factors:
/// method,baseline,n,param,vrf,significant.
pub fn vrf_csv(tables: &[&VrfTable]) -> String {
    let labels = param_labels();
    let mut out = String::from("method,baseline,n,param,vrf,significant\n");
    for t in tables {
        for (j, label) in labels.iter().enumerate() {
            let significant = t.ratios[j] > t.threshold || t.ratios[j] < 1.0 / t.threshold;
            out.push_str(&format!(
                "{},{},{},{label},{},{significant}\n",
                t.method,
                t.baseline,
                t.n,
                fmt(t.ratios[j])
            ));
        }
    }
    out
}

/// CSV of bias summaries: pair,min,q25,q75,max.
pub fn bias_csv(rows: &[BiasRow]) -> String {
    let mut out = String::from("pair,min,q25,q75,max\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.label,
            fmt(r.min),
            fmt(r.q25),
            fmt(r.q75),
            fmt(r.max)
        ));
    }
    out
}

/// Scatter of per-latent-variable sampling variance (log scale) against
/// the posterior mean of that latent variable, one series per method.
pub fn variance_scatter_svg(reports: &[&ReplicationReport]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const ML: f64 = 70.0;
    const MR: f64 = 20.0;
    const MT: f64 = 20.0;
    const MB: f64 = 50.0;
    const COLORS: [&str; 6] = [
        "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
    ];

    // latent-variable slices only (params 3..42)
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for rep in reports {
        for j in 3..rep.means.len() {
            xs.push(rep.means[j]);
            ys.push(rep.variances[j].max(1e-300).log10());
        }
    }
    let (x0, x1) = bounds(&xs);
    let (y0, y1) = bounds(&ys);
    let sx = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
    let sy = |y: f64| H - MB - (y - y0) / (y1 - y0) * (H - MT - MB);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    );
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MB,
        W - MR,
        H - MB
    ));
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MB
    ));
    // axis ticks: 5 per axis
    for k in 0..=4 {
        let x = x0 + (x1 - x0) * k as f64 / 4.0;
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{:.2}</text>\n",
            sx(x),
            H - MB + 16.0,
            x
        ));
        let y = y0 + (y1 - y0) * k as f64 / 4.0;
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">1e{:.1}</text>\n",
            ML - 6.0,
            sy(y) + 4.0,
            y
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">\
         latent-variable posterior mean</text>\n",
        ML + (W - ML - MR) / 2.0,
        H - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {:.1})\">sampling variance of the mean</text>\n",
        MT + (H - MT - MB) / 2.0,
        MT + (H - MT - MB) / 2.0
    ));

    for (ri, rep) in reports.iter().enumerate() {
        let color = COLORS[ri % COLORS.len()];
        for j in 3..rep.means.len() {
            let x = sx(rep.means[j]);
            let y = sy(rep.variances[j].max(1e-300).log10());
            svg.push_str(&format!(
                "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"{color}\" \
                 fill-opacity=\"0.7\"/>\n"
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"{color}\">{} N={}</text>\n",
            W - MR - 130.0,
            MT + 16.0 * (ri + 1) as f64,
            rep.method,
            rep.n
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}
