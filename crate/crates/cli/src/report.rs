//! Text report of the analytic optimum and controller gains of a scenario.

use std::fmt::Write;

use dosnet::oracle::{optimal_configuration, predict_throughput, OracleError, RateDistribution};
use dosnet::ScenarioConfig;

use crate::presets::RhoTracker;

/// Mean SNR of every station at slot 0, ignoring join times.
pub fn initial_rho(cfg: &ScenarioConfig) -> Vec<f64> {
    let mut all = cfg.clone();
    for s in &mut all.stations {
        s.join_at = 0;
    }
    RhoTracker::new(&all).at(0).into_iter().map(|r| r.expect("present")).collect()
}

pub fn oracle_report(cfg: &ScenarioConfig) -> Result<String, OracleError> {
    let tb = cfg.time_base;
    let b = cfg.bandwidth;
    let rho = initial_rho(cfg);
    let dists: Vec<RateDistribution> = rho
        .iter()
        .map(|&r| RateDistribution::for_channel(r, b, &cfg.channel))
        .collect();
    let opt = optimal_configuration(&dists, &tb)?;
    let rates = predict_throughput(&opt, &dists, &tb);
    let g = cfg.effective_gains();

    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "stations       {}", cfg.stations.len());
    let _ = writeln!(w, "tau            {} s", tb.tau);
    let _ = writeln!(w, "hold/tau       {}", tb.ratio());
    let _ = writeln!(w, "bandwidth      {} Hz", b);
    let _ = writeln!(w);
    let _ = writeln!(w, "gains          per slot      per second");
    let mut gain = |name: &str, v: f64| {
        let _ = writeln!(w, "{name:<14} {:<13.7} {:.7e}", v * tb.tau, v);
    };
    gain("k_p", g.k_p);
    gain("k_p stability", g.k_p_stability);
    gain("k_p noise", g.k_p_noise);
    let _ = writeln!(w, "{:<14} {:<13.7} (dimensionless)", "k_r", g.k_r);
    let _ = writeln!(w, "{:<14} {:.7}", "k_r stability", g.k_r_stability);
    let _ = writeln!(w, "{:<14} {:.7}", "k_r noise", g.k_r_noise);
    let _ = writeln!(w, "alpha_p        {}", g.alpha_p);
    let _ = writeln!(w, "alpha_r        {}", g.alpha_r);
    let _ = writeln!(w, "gain scale     {}", cfg.gain_scale);
    let _ = writeln!(w);
    let p_e: f64 = opt.p.iter().map(|p| 1.0 - p).product();
    let _ = writeln!(w, "empty-slot probability {p_e:.10}");
    let _ = writeln!(w, "station_id,rho,p_star,threshold_bps,threshold_over_b,predicted_bps");
    for (k, s) in cfg.stations.iter().enumerate() {
        let _ = writeln!(
            w,
            "{},{},{:.10},{:.10e},{:.10},{:.10e}",
            s.id,
            rho[k],
            opt.p[k],
            opt.thresholds[k],
            opt.thresholds[k] / b,
            rates[k]
        );
    }
    let total: f64 = rates.iter().sum();
    let _ = writeln!(w, "total predicted {total:.10e} bps ({:.6} B)", total / b);
    let _ = writeln!(w, "sum log         {:.10}", opt.objective());
    Ok(out)
}
