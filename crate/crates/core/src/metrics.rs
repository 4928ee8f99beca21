//! Throughput and fairness metrics, and aggregation over replications.

use crate::engine::RunResult;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("no measured time")]
    ZeroElapsed,
    #[error("all throughputs are zero")]
    AllZero,
    #[error("empty throughput vector")]
    Empty,
}

/// Per-station post-warmup throughput, bits/s.
pub fn throughput(run: &RunResult) -> Result<Vec<f64>, MetricsError> {
    if run.elapsed_slots == 0 {
        return Err(MetricsError::ZeroElapsed);
    }
    let secs = run.elapsed_seconds();
    Ok(run.stations.iter().map(|s| s.delivered_bits / secs).collect())
}

/// `sum log r`, or negative infinity if any station got nothing.
pub fn sum_log(r: &[f64]) -> f64 {
    if r.iter().any(|&x| x <= 0.0) {
        f64::NEG_INFINITY
    } else {
        r.iter().map(|x| x.ln()).sum()
    }
}

pub fn jain_index(r: &[f64]) -> Result<f64, MetricsError> {
    if r.is_empty() {
        return Err(MetricsError::Empty);
    }
    let s: f64 = r.iter().sum();
    let s2: f64 = r.iter().map(|x| x * x).sum();
    if s2 == 0.0 {
        return Err(MetricsError::AllZero);
    }
    Ok(s * s / (r.len() as f64 * s2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedFairness {
    /// `sum log r` of every complete window.
    pub series: Vec<f64>,
    pub mean: f64,
    /// Station-windows that delivered nothing and were floored.
    pub starved: u64,
}

/// Short-term fairness: `sum log r` over consecutive windows of the run's
/// window length. A station with nothing delivered in a window counts as
/// one bit in that window.
pub fn windowed_sum_log(run: &RunResult) -> WindowedFairness {
    let secs = run.window as f64 * run.tau;
    let floor = 1.0 / secs;
    let mut starved = 0;
    let series: Vec<f64> = run
        .window_bits
        .iter()
        .map(|w| {
            w.iter()
                .map(|&b| {
                    let r = b / secs;
                    if r <= 0.0 {
                        starved += 1;
                        floor.ln()
                    } else {
                        r.ln()
                    }
                })
                .sum()
        })
        .collect();
    let mean = if series.is_empty() {
        f64::NAN
    } else {
        series.iter().sum::<f64>() / series.len() as f64
    };
    WindowedFairness { series, mean, starved }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairnessReport {
    pub per_station: Vec<f64>,
    pub total: f64,
    pub sum_log: f64,
    pub jfi: f64,
    pub windowed: WindowedFairness,
}

impl FairnessReport {
    pub fn from_run(run: &RunResult) -> Result<Self, MetricsError> {
        let per_station = throughput(run)?;
        let total = per_station.iter().sum();
        // an all-zero run is reported with index 0 rather than failing
        let jfi = jain_index(&per_station).unwrap_or(0.0);
        Ok(Self {
            sum_log: sum_log(&per_station),
            total,
            jfi,
            windowed: windowed_sum_log(run),
            per_station,
        })
    }
}

/// Mean and 95% normal-approximation half-width across replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
    pub n: usize,
}

impl Estimate {
    pub fn relative_half_width(&self) -> f64 {
        (self.half_width / self.mean).abs()
    }

    /// Whether the interval meets a relative precision target.
    pub fn is_precise(&self, target: f64) -> bool {
        self.relative_half_width() <= target
    }

    /// Whether this interval lies entirely above `other`'s.
    pub fn separated_above(&self, other: &Estimate) -> bool {
        self.mean - self.half_width > other.mean + other.half_width
    }
}

pub fn aggregate(samples: &[f64]) -> Estimate {
    let n = samples.len();
    if n == 0 {
        return Estimate { mean: f64::NAN, half_width: f64::NAN, n };
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 || !mean.is_finite() {
        return Estimate { mean, half_width: 0.0, n };
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Estimate {
        mean,
        half_width: 1.96 * (var / n as f64).sqrt(),
        n,
    }
}

/// Coefficient of variation of a series.
pub fn coefficient_of_variation(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean.abs()
}
