//! `wcud` command line: build driving sequences, report discrepancies,
//! run the 3-state consistency demo, single probit chains, and the full
//! replication study.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use wcud::discrepancy::{self, DEFAULT_WORK_BUDGET};
use wcud::probit::{param_labels, run_posterior_means, ProbitData, GIBBS_M};
use wcud::rng::{draw_units, StreamFactory};
use wcud::seq::{DrivingSequence, Method, SeqMeta};
use wcud::seqgen::{
    cp_rotate, liao_shuffle, random_permutation, search_multiplier, tableau_sequence, LatticeSpec,
};
use wcud::study::{
    bias_csv, bias_summary, build_driver, report_csv, rep_means_csv, run_replications,
    variance_reduction, variance_scatter_svg, vrf_csv, ExperimentConfig, ReplicationReport,
};
use wcud::{mcmc, STUDY_LATTICES};

#[derive(Parser)]
#[command(
    name = "wcud",
    about = "Weakly completely-uniformly-distributed driving sequences for MCMC",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a driving sequence to a file, one unit per line
    Gen {
        /// iid | lcg | lcg-cp | liao
        #[arg(long)]
        method: String,
        /// modulus (prime); also the row count of the lattice tableau
        #[arg(long = "N")]
        n: u64,
        /// lattice multiplier; tabulated or searched when omitted
        #[arg(long)]
        a: Option<u64>,
        /// tuple dimension of the tableau
        #[arg(long, default_value_t = GIBBS_M)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// output file; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Discrepancy report for a sequence file (one unit per line)
    Disc {
        #[arg(long)]
        input: PathBuf,
        /// tuple dimensions, comma separated
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 3])]
        dims: Vec<usize>,
        /// overlap | block | both
        #[arg(long, default_value = "both")]
        mode: String,
        /// work budget in corner operations
        #[arg(long, default_value_t = DEFAULT_WORK_BUDGET)]
        budget: u128,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// 3-state Metropolis-Hastings consistency demo
    Finite {
        #[arg(long = "N")]
        n: u64,
        /// iid | lcg | lcg-cp
        #[arg(long, default_value = "lcg")]
        method: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// optional plain-text model file (K, target, proposal matrix)
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Single probit Gibbs chain: posterior means to stdout or CSV
    Probit {
        /// iid | lcg-cp | liao
        #[arg(long, default_value = "lcg-cp")]
        method: String,
        #[arg(long = "N", default_value_t = 1021)]
        n: u64,
        #[arg(long)]
        a: Option<u64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        burn: usize,
        /// CSV with header volume,rate,y; bundled data when omitted
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full replication study: VRF and bias tables plus a variance plot
    Bench {
        /// methods to compare against the iid baseline
        #[arg(long, value_delimiter = ',', default_values_t = ["lcg-cp".to_string(), "liao".to_string()])]
        methods: Vec<String>,
        /// lattice sizes; defaults to the desk-scale pair
        #[arg(long = "Ns", value_delimiter = ',', default_values_t = [1021u64, 4093])]
        ns: Vec<u64>,
        #[arg(long, default_value_t = 100)]
        reps: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        burn: usize,
        #[arg(long)]
        out_dir: PathBuf,
        /// full-scale run: R=300 over all five tabulated primes
        #[arg(long)]
        full: bool,
    },
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Gen {
            method,
            n,
            a,
            m,
            seed,
            out,
        } => gen(&method, n, a, m, seed, out.as_deref()),
        Command::Disc {
            input,
            dims,
            mode,
            budget,
            out,
        } => disc(&input, &dims, &mode, budget, out.as_deref()),
        Command::Finite {
            n,
            method,
            seed,
            model,
        } => finite(n, &method, seed, model.as_deref()),
        Command::Probit {
            method,
            n,
            a,
            seed,
            burn,
            data,
            out,
        } => probit(&method, n, a, seed, burn, data.as_deref(), out.as_deref()),
        Command::Bench {
            methods,
            ns,
            reps,
            seed,
            burn,
            out_dir,
            full,
        } => bench(&methods, &ns, reps, seed, burn, &out_dir, full),
    }
}

fn multiplier(n: u64, a: Option<u64>) -> Result<u64> {
    match a {
        Some(a) => Ok(a),
        None => search_multiplier(n, DEFAULT_WORK_BUDGET)
            .with_context(|| format!("no multiplier available for N = {n}")),
    }
}

fn write_out(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn gen(method: &str, n: u64, a: Option<u64>, m: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    let method = Method::parse(method)?;
    let factory = StreamFactory::new(seed);
    let seq = match method {
        Method::Iid => DrivingSequence::new(
            draw_units(&mut factory.stream("iid-driver", 0), n as usize * m),
            Method::Iid,
            SeqMeta {
                n: Some(n),
                m: Some(m),
                seed: Some(seed),
            },
        )?,
        Method::Lcg => tableau_sequence(&LatticeSpec::new(n, multiplier(n, a)?, m)?),
        Method::LcgCp => {
            let base = tableau_sequence(&LatticeSpec::new(n, multiplier(n, a)?, m)?);
            let rot = draw_units(&mut factory.stream("rotation", 0), m);
            cp_rotate(&base, &rot, m)?
        }
        Method::Liao => {
            let base = tableau_sequence(&LatticeSpec::new(n, multiplier(n, a)?, m)?);
            let rot = draw_units(&mut factory.stream("rotation", 0), m);
            let rotated = cp_rotate(&base, &rot, m)?;
            let rows = discrepancy::nonoverlapping_tuples(&rotated, m)?;
            let tau = random_permutation(rows.len(), &mut factory.stream("tau", 0))?;
            liao_shuffle(&rows, &tau)?
        }
        other => bail!("gen does not support method {other}"),
    };
    let mut buf = Vec::new();
    seq.dump(&mut buf)?;
    write_out(out, std::str::from_utf8(&buf)?)
}

fn disc(input: &Path, dims: &[usize], mode: &str, budget: u128, out: Option<&Path>) -> Result<()> {
    let file = fs::File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let seq = DrivingSequence::load(BufReader::new(file), Method::Iid)?;
    let modes: Vec<discrepancy::TupleMode> = match mode {
        "overlap" => vec![discrepancy::TupleMode::Overlapping],
        "block" => vec![discrepancy::TupleMode::NonOverlapping],
        "both" => vec![
            discrepancy::TupleMode::Overlapping,
            discrepancy::TupleMode::NonOverlapping,
        ],
        other => bail!("unknown mode `{other}`; use overlap, block or both"),
    };
    let mut report = discrepancy::DiscrepancyReport::default();
    for &d in dims {
        for &m in &modes {
            let points = match m {
                discrepancy::TupleMode::Overlapping => discrepancy::overlapping_tuples(&seq, d)?,
                discrepancy::TupleMode::NonOverlapping => {
                    discrepancy::nonoverlapping_tuples(&seq, d)?
                }
            };
            report.records.push(discrepancy::DiscrepancyRecord {
                d,
                mode: m,
                n_tuples: points.len(),
                d_star: vec![discrepancy::star_discrepancy(&points, budget)?],
            });
        }
    }
    write_out(out, &report.to_csv())
}

const DEMO_MODEL: &str = "\
# 3-state demo model
3
0.2 0.3 0.5
0.4 0.3 0.3
0.3 0.4 0.3
0.3 0.3 0.4
";

fn finite(n: u64, method: &str, seed: u64, model_path: Option<&Path>) -> Result<()> {
    let text = match model_path {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => DEMO_MODEL.to_string(),
    };
    let model = mcmc::FiniteMhModel::parse(&text)?;
    let m = model.m();
    let factory = StreamFactory::new(seed);
    let driver = match Method::parse(method)? {
        Method::Iid => DrivingSequence::new(
            draw_units(&mut factory.stream("finite", 0), n as usize * m),
            Method::Iid,
            SeqMeta::default(),
        )?,
        Method::Lcg => tableau_sequence(&LatticeSpec::new(n, multiplier(n, None)?, m)?),
        Method::LcgCp => {
            let base = tableau_sequence(&LatticeSpec::new(n, multiplier(n, None)?, m)?);
            let rot = draw_units(&mut factory.stream("rotation", 0), m);
            cp_rotate(&base, &rot, m)?
        }
        other => bail!("finite does not support method {other}"),
    };
    // empirical distributions at geometrically increasing prefixes
    let mut series = Vec::new();
    for frac in [4usize, 2, 1] {
        let len = driver.len() / frac / m * m;
        let prefix =
            DrivingSequence::new(driver.values()[..len].to_vec(), driver.method, SeqMeta::default())?;
        let traj = mcmc::run_chain(&model, &prefix, 0)?;
        series.push((traj.len(), mcmc::empirical_distribution(&traj, model.k())?));
    }
    let report = mcmc::consistency_check(&series, model.target(), 0.02)?;
    println!("n,sup_error");
    for (n, e) in report.sample_sizes.iter().zip(&report.sup_errors) {
        println!("{n},{e:.16e}");
    }
    println!(
        "# target sup-norm error at largest n {} epsilon {}: {}",
        report.sup_errors.last().unwrap(),
        report.epsilon,
        if report.pass { "pass" } else { "fail" }
    );
    if !report.pass {
        std::process::exit(1);
    }
    Ok(())
}

fn probit(
    method: &str,
    n: u64,
    a: Option<u64>,
    seed: u64,
    burn: usize,
    data_path: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let data = match data_path {
        Some(p) => ProbitData::load(p)?,
        None => ProbitData::bundled()?,
    };
    let cfg = ExperimentConfig {
        method: Method::parse(method)?,
        n,
        a: multiplier(n, a).unwrap_or(0),
        reps: 2, // validation floor; only replication 0 runs here
        seed,
        burn,
    };
    cfg.validate()?;
    let driver = build_driver(&cfg, 0)?;
    let est = run_posterior_means(&data, &driver, burn)?;
    let mut csv = String::from("param,mean\n");
    for (label, v) in param_labels().iter().zip(&est.params) {
        csv.push_str(&format!("{label},{v:.16e}\n"));
    }
    write_out(out, &csv)
}

fn bench(
    methods: &[String],
    ns: &[u64],
    reps: u64,
    seed: u64,
    burn: usize,
    out_dir: &Path,
    full: bool,
) -> Result<()> {
    let (ns, reps) = if full {
        (STUDY_LATTICES.iter().map(|&(n, _)| n).collect(), 300)
    } else {
        (ns.to_vec(), reps)
    };
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let data = ProbitData::bundled()?;

    let mut all_reports: Vec<ReplicationReport> = Vec::new();
    let mut baselines: Vec<ReplicationReport> = Vec::new();
    let mut vrf_tables = Vec::new();
    for &n in &ns {
        let base_cfg = ExperimentConfig {
            method: Method::Iid,
            n,
            a: 0,
            reps,
            seed,
            burn,
        };
        let baseline = run_replications(&base_cfg, &data)?;
        for method in methods {
            let cfg = ExperimentConfig {
                method: Method::parse(method)?,
                n,
                a: multiplier(n, None)?,
                reps,
                seed,
                burn,
            };
            let report = run_replications(&cfg, &data)?;
            vrf_tables.push(variance_reduction(&baseline, &report)?);
            all_reports.push(report);
        }
        baselines.push(baseline);
    }

    // bias rows: each method against the iid baseline, pooled over N
    let mut bias_rows = Vec::new();
    for method in methods {
        let m = Method::parse(method)?;
        let a: Vec<&ReplicationReport> =
            all_reports.iter().filter(|r| r.method == m).collect();
        let b: Vec<&ReplicationReport> = baselines.iter().collect();
        bias_rows.push(bias_summary(&a, &b)?);
    }

    let mut summary_refs: Vec<&ReplicationReport> = baselines.iter().collect();
    summary_refs.extend(all_reports.iter());
    fs::write(out_dir.join("summary.csv"), report_csv(&summary_refs))?;
    let mut rep_csv = String::new();
    for (i, r) in summary_refs.iter().enumerate() {
        let csv = rep_means_csv(r);
        rep_csv.push_str(if i == 0 { &csv } else { csv.split_once('\n').unwrap().1 });
    }
    fs::write(out_dir.join("replications.csv"), rep_csv)?;
    fs::write(
        out_dir.join("vrf.csv"),
        vrf_csv(&vrf_tables.iter().collect::<Vec<_>>()),
    )?;
    fs::write(out_dir.join("bias.csv"), bias_csv(&bias_rows))?;
    fs::write(
        out_dir.join("variance_scatter.svg"),
        variance_scatter_svg(&summary_refs),
    )?;
    println!(
        "wrote summary.csv, replications.csv, vrf.csv, bias.csv, variance_scatter.svg to {}",
        out_dir.display()
    );
    Ok(())
}
