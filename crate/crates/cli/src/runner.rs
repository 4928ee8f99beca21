//! Replication management and CSV rows.

use std::io::Write;

use rayon::prelude::*;

use dosnet::engine::RunResult;
use dosnet::metrics::{aggregate, Estimate, FairnessReport};
use dosnet::oracle::OracleError;
use dosnet::{simulate_run, ScenarioConfig};

pub const CSV_HEADER: [&str; 12] = [
    "run_id",
    "seed",
    "station_id",
    "policy",
    "throughput_bps",
    "p_i_mean",
    "threshold_mean",
    "p_e_hat",
    "sum_log",
    "jfi",
    "windowed_sum_log_mean",
    "ci_halfwidth",
];

/// Relative CI half-width above which a point is reported as imprecise.
pub const DEFAULT_CI_TARGET: f64 = 0.01;

/// One scenario to be replicated.
#[derive(Debug, Clone)]
pub struct Job {
    pub label: String,
    /// Validated configuration; its seed is the base seed.
    pub config: ScenarioConfig,
    pub replications: usize,
    /// Keep every full [`RunResult`], not only its summary.
    pub keep_results: bool,
}

pub fn replication_seed(base: u64, replication: usize) -> u64 {
    base.wrapping_add(replication as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationSummary {
    pub id: u32,
    pub policy: String,
    pub throughput: f64,
    pub p_mean: f64,
    pub threshold_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub seed: u64,
    pub stations: Vec<StationSummary>,
    pub total: f64,
    pub p_e_hat: f64,
    pub sum_log: f64,
    pub jfi: f64,
    pub windowed_sum_log: f64,
    pub starved_windows: u64,
}

pub fn summarize(run: &RunResult) -> Summary {
    let report = FairnessReport::from_run(run).unwrap_or(FairnessReport {
        per_station: vec![0.0; run.stations.len()],
        total: 0.0,
        sum_log: f64::NEG_INFINITY,
        jfi: 0.0,
        windowed: dosnet::metrics::windowed_sum_log(run),
    });
    Summary {
        seed: run.seed,
        stations: run
            .stations
            .iter()
            .zip(&report.per_station)
            .map(|(s, &r)| StationSummary {
                id: s.id,
                policy: s.policy.to_string(),
                throughput: r,
                p_mean: s.p_mean(),
                threshold_mean: s.threshold_mean(),
            })
            .collect(),
        total: report.total,
        p_e_hat: run.p_e_hat(),
        sum_log: report.sum_log,
        jfi: report.jfi,
        windowed_sum_log: report.windowed.mean,
        starved_windows: report.windowed.starved,
    }
}

#[derive(Debug, Clone)]
pub struct JobOutput {
    pub label: String,
    pub base_seed: u64,
    pub runs: Vec<Summary>,
    /// Full results, kept only when the job asks for them.
    pub results: Vec<RunResult>,
}

impl JobOutput {
    pub fn estimate<F: Fn(&Summary) -> f64>(&self, f: F) -> Estimate {
        aggregate(&self.runs.iter().map(f).collect::<Vec<_>>())
    }

    pub fn total(&self) -> Estimate {
        self.estimate(|s| s.total)
    }

    pub fn sum_log(&self) -> Estimate {
        self.estimate(|s| s.sum_log)
    }
}

/// Runs all replications of all jobs in parallel; the output order is the
/// job order, then the replication order.
pub fn execute(jobs: &[Job]) -> Result<Vec<JobOutput>, OracleError> {
    let tasks: Vec<(usize, usize)> = jobs
        .iter()
        .enumerate()
        .flat_map(|(j, job)| (0..job.replications).map(move |r| (j, r)))
        .collect();
    let results: Vec<(usize, Summary, Option<RunResult>)> = tasks
        .par_iter()
        .map(|&(j, r)| {
            let mut cfg = jobs[j].config.clone();
            cfg.seed = replication_seed(jobs[j].config.seed, r);
            let run = simulate_run(&cfg)?;
            Ok((j, summarize(&run), jobs[j].keep_results.then_some(run)))
        })
        .collect::<Result<_, OracleError>>()?;
    let mut out: Vec<JobOutput> = jobs
        .iter()
        .map(|j| JobOutput {
            label: j.label.clone(),
            base_seed: j.config.seed,
            runs: Vec::with_capacity(j.replications),
            results: Vec::new(),
        })
        .collect();
    for (j, s, r) in results {
        out[j].runs.push(s);
        if let Some(r) = r {
            out[j].results.push(r);
        }
    }
    Ok(out)
}

fn fmt(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

fn common_policy(stations: &[StationSummary]) -> String {
    match stations.first() {
        Some(first) if stations.iter().all(|s| s.policy == first.policy) => first.policy.clone(),
        _ => "mixed".into(),
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Writes the per-run and aggregate rows of `outputs`.
pub fn write_rows<W: Write>(w: &mut csv::Writer<W>, outputs: &[JobOutput]) -> csv::Result<()> {
    for out in outputs {
        for (r, s) in out.runs.iter().enumerate() {
            let run_id = format!("{}/r{r}", out.label);
            let run_cols = [fmt(s.p_e_hat), fmt(s.sum_log), fmt(s.jfi), fmt(s.windowed_sum_log)];
            for st in &s.stations {
                let mut row = vec![
                    run_id.clone(),
                    s.seed.to_string(),
                    st.id.to_string(),
                    st.policy.clone(),
                    fmt(st.throughput),
                    fmt(st.p_mean),
                    fmt(st.threshold_mean),
                ];
                row.extend(run_cols.iter().cloned());
                row.push(String::new());
                w.write_record(&row)?;
            }
            if s.stations.len() > 1 {
                let mut row = vec![
                    run_id.clone(),
                    s.seed.to_string(),
                    "all".into(),
                    common_policy(&s.stations),
                    fmt(s.total),
                    fmt(mean(s.stations.iter().map(|x| x.p_mean))),
                    fmt(mean(s.stations.iter().map(|x| x.threshold_mean))),
                ];
                row.extend(run_cols.iter().cloned());
                row.push(String::new());
                w.write_record(&row)?;
            }
        }
        let Some(first) = out.runs.first() else { continue };
        let run_id = format!("{}/mean", out.label);
        let agg = [
            fmt(out.estimate(|s| s.p_e_hat).mean),
            fmt(out.sum_log().mean),
            fmt(out.estimate(|s| s.jfi).mean),
            fmt(out.estimate(|s| s.windowed_sum_log).mean),
        ];
        for (k, st) in first.stations.iter().enumerate() {
            let thr = out.estimate(|s| s.stations[k].throughput);
            let mut row = vec![
                run_id.clone(),
                out.base_seed.to_string(),
                st.id.to_string(),
                st.policy.clone(),
                fmt(thr.mean),
                fmt(out.estimate(|s| s.stations[k].p_mean).mean),
                fmt(out.estimate(|s| s.stations[k].threshold_mean).mean),
            ];
            row.extend(agg.iter().cloned());
            row.push(fmt(thr.half_width));
            w.write_record(&row)?;
        }
        if first.stations.len() > 1 {
            let total = out.total();
            let mut row = vec![
                run_id.clone(),
                out.base_seed.to_string(),
                "all".into(),
                common_policy(&first.stations),
                fmt(total.mean),
                fmt(out.estimate(|s| mean(s.stations.iter().map(|x| x.p_mean))).mean),
                fmt(out.estimate(|s| mean(s.stations.iter().map(|x| x.threshold_mean))).mean),
            ];
            row.extend(agg.iter().cloned());
            row.push(fmt(total.half_width));
            w.write_record(&row)?;
        }
    }
    Ok(())
}

/// Full CSV text (header included) for `outputs`.
pub fn csv_string(outputs: &[JobOutput]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    write_rows(&mut w, outputs).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// Labels of outputs whose total-throughput interval is wider than
/// `target` relative to the mean.
pub fn imprecise_points(outputs: &[JobOutput], target: f64) -> Vec<String> {
    outputs
        .iter()
        .filter(|o| o.runs.len() > 1 && !o.total().is_precise(target))
        .map(|o| o.label.clone())
        .collect()
}
