//! Per-station channel gains and the SNR-to-rate pipeline.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

/// Doppler frequency used by the time-correlated experiments, in radians
/// per mini slot.
pub const DEFAULT_DOPPLER: f64 = 2.0 * PI / 100.0;
pub const DEFAULT_OSCILLATORS: usize = 16;

/// Rates available to the discrete-rate experiments, in bits/s.
pub const WIFI_RATES_BPS: [f64; 7] = [1e6, 2e6, 5.5e6, 12e6, 24e6, 48e6, 54e6];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fading {
    /// Independent unit-mean exponential power gain at every probe.
    IidRayleigh,
    /// Sum-of-sinusoids process.
    Jakes { doppler: f64, oscillators: usize },
    /// Unit gain on every probe; the rate is a deterministic function of
    /// the mean SNR.
    Constant,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RateMap {
    /// `B log2(1 + snr)`.
    Shannon,
    /// Largest listed rate strictly below the Shannon value, or 0.
    DiscreteSet(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimation {
    Perfect,
    /// The station sees `snr (1 - eps)` with `eps ~ U[0, 2 mean_error]` and
    /// backs the resulting rate off by the factor `1 - mean_error`.
    Linear { mean_error: f64 },
}

impl Estimation {
    pub fn mean_error(&self) -> f64 {
        match *self {
            Estimation::Perfect => 0.0,
            Estimation::Linear { mean_error } => mean_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModelSpec {
    pub fading: Fading,
    pub rate_map: RateMap,
    pub estimation: Estimation,
}

impl Default for ChannelModelSpec {
    fn default() -> Self {
        Self {
            fading: Fading::IidRayleigh,
            rate_map: RateMap::Shannon,
            estimation: Estimation::Perfect,
        }
    }
}

impl ChannelModelSpec {
    pub fn check(&self) -> Result<(), String> {
        if let Fading::Jakes { doppler, oscillators } = self.fading {
            if !(doppler.is_finite() && doppler >= 0.0) {
                return Err(format!("doppler must be finite and >= 0, got {doppler}"));
            }
            if oscillators == 0 {
                return Err("jakes needs at least one oscillator".into());
            }
        }
        if let RateMap::DiscreteSet(rates) = &self.rate_map {
            if rates.is_empty() {
                return Err("discrete rate list is empty".into());
            }
            if rates[0] <= 0.0 || rates.windows(2).any(|w| w[1] <= w[0]) {
                return Err("discrete rates must be positive and strictly ascending".into());
            }
        }
        let eps = self.estimation.mean_error();
        if !(0.0..1.0).contains(&eps) {
            return Err(format!("mean estimation error outside [0,1): {eps}"));
        }
        if self.fading == Fading::Constant && eps > 0.0 {
            return Err("constant fading requires perfect estimation".into());
        }
        Ok(())
    }
}

/// Outcome of one channel probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSample {
    /// Rate the channel supports, bits/s.
    pub true_rate: f64,
    /// Rate the station believes it can use after estimation error and
    /// back-off, bits/s. This is the rate it transmits at.
    pub measured_rate: f64,
    /// Power gain `|h|^2`.
    pub gain: f64,
}

/// Unit-mean exponential power gain (Rayleigh amplitude).
pub fn sample_gain_iid<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

/// Sum of equal-amplitude complex sinusoids with uniformly spaced arrival
/// angles and random phases.
///
/// The angles are offset by a quarter spacing so no two oscillators share a
/// Doppler shift; this also cancels the first aliasing term of the
/// autocorrelation, which then tracks `J0(doppler * lag)` closely.
#[derive(Debug, Clone)]
pub struct JakesState {
    freqs: Vec<f64>,
    phases: Vec<f64>,
    scale: f64,
}

impl JakesState {
    pub fn new<R: Rng + ?Sized>(doppler: f64, oscillators: usize, rng: &mut R) -> Self {
        let m = oscillators as f64;
        let freqs = (0..oscillators)
            .map(|n| doppler * (2.0 * PI * (n as f64 + 0.25) / m).cos())
            .collect();
        let phases = (0..oscillators).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
        Self {
            freqs,
            phases,
            scale: 1.0 / m.sqrt(),
        }
    }

    /// Complex gain at mini slot `t`.
    pub fn complex_at(&self, t: u64) -> (f64, f64) {
        let t = t as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (f, ph) in self.freqs.iter().zip(&self.phases) {
            let (s, c) = (f * t + ph).sin_cos();
            re += c;
            im += s;
        }
        (re * self.scale, im * self.scale)
    }

    pub fn gain_at(&self, t: u64) -> f64 {
        let (re, im) = self.complex_at(t);
        re * re + im * im
    }
}

/// Power gain at mini slot `t` of a Jakes process.
pub fn sample_gain_jakes(state: &JakesState, t: u64) -> f64 {
    state.gain_at(t)
}

/// Per-station fading generator.
#[derive(Debug, Clone)]
pub enum FadingState {
    Iid,
    Jakes(JakesState),
    Constant,
}

impl FadingState {
    pub fn new<R: Rng + ?Sized>(fading: &Fading, rng: &mut R) -> Self {
        match *fading {
            Fading::IidRayleigh => FadingState::Iid,
            Fading::Constant => FadingState::Constant,
            Fading::Jakes { doppler, oscillators } => {
                FadingState::Jakes(JakesState::new(doppler, oscillators, rng))
            }
        }
    }

    pub fn gain<R: Rng + ?Sized>(&self, t: u64, rng: &mut R) -> f64 {
        match self {
            FadingState::Iid => sample_gain_iid(rng),
            FadingState::Jakes(s) => s.gain_at(t),
            FadingState::Constant => 1.0,
        }
    }
}

pub fn shannon_rate(snr: f64, bandwidth: f64) -> f64 {
    bandwidth * snr.ln_1p() / std::f64::consts::LN_2
}

pub fn snr_to_rate(snr: f64, bandwidth: f64, map: &RateMap) -> f64 {
    let c = shannon_rate(snr.max(0.0), bandwidth);
    match map {
        RateMap::Shannon => c,
        RateMap::DiscreteSet(rates) => quantize_rate(c, rates),
    }
}

/// Largest entry of the ascending list `rates` strictly below `capacity`.
pub fn quantize_rate(capacity: f64, rates: &[f64]) -> f64 {
    let idx = rates.partition_point(|&r| r < capacity);
    if idx == 0 {
        0.0
    } else {
        rates[idx - 1]
    }
}

/// Runs a probe of true SNR `true_snr` through the estimator.
pub fn apply_estimation<R: Rng + ?Sized>(
    true_snr: f64,
    gain: f64,
    bandwidth: f64,
    spec: &ChannelModelSpec,
    rng: &mut R,
) -> RateSample {
    let true_rate = snr_to_rate(true_snr, bandwidth, &spec.rate_map);
    let measured_rate = match spec.estimation {
        Estimation::Perfect => true_rate,
        Estimation::Linear { mean_error } => {
            let eps = rng.random::<f64>() * 2.0 * mean_error;
            estimated_rate(true_snr, eps, mean_error, bandwidth, &spec.rate_map)
        }
    };
    RateSample {
        true_rate,
        measured_rate,
        gain,
    }
}

/// Backed-off rate for a given realized estimation error `eps`.
pub fn estimated_rate(true_snr: f64, eps: f64, mean_error: f64, bandwidth: f64, map: &RateMap) -> f64 {
    let snr_meas = (true_snr * (1.0 - eps)).max(0.0);
    snr_to_rate(snr_meas, bandwidth, map) * (1.0 - mean_error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn iid_gain_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mut xs: Vec<f64> = (0..n).map(|_| sample_gain_iid(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let above = xs.iter().filter(|&&x| x > 1.0).count() as f64 / n as f64;
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = xs[n / 2];
        assert!((0.995..=1.005).contains(&mean), "mean {mean}");
        assert!((above - (-1.0f64).exp()).abs() <= 0.003, "tail {above}");
        assert!((median - 2f64.ln()).abs() <= 0.003, "median {median}");
    }

    #[test]
    fn jakes_mean_power_is_unity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = JakesState::new(DEFAULT_DOPPLER, DEFAULT_OSCILLATORS, &mut rng);
        let n = 10_000_000u64;
        let mean = (0..n).map(|t| s.gain_at(t)).sum::<f64>() / n as f64;
        assert!((0.99..=1.01).contains(&mean), "mean {mean}");
    }

    fn bessel_j0(x: f64) -> f64 {
        // Trapezoid rule on the integral representation; converges
        // geometrically for a periodic integrand.
        let n = 2_000;
        (0..n)
            .map(|k| (x * (PI * (k as f64 + 0.5) / n as f64).sin()).cos())
            .sum::<f64>()
            / n as f64
    }

    #[test]
    fn jakes_autocorrelation_tracks_bessel() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = JakesState::new(DEFAULT_DOPPLER, DEFAULT_OSCILLATORS, &mut rng);
        let n = 400_000u64;
        let samples: Vec<(f64, f64)> = (0..n + 201).map(|t| s.complex_at(t)).collect();
        let power = samples[..n as usize].iter().map(|(a, b)| a * a + b * b).sum::<f64>() / n as f64;
        for lag in [0usize, 1, 5, 10, 25, 38, 50, 100, 150, 200] {
            let mut acc = 0.0;
            for t in 0..n as usize {
                let (a, b) = samples[t];
                let (c, d) = samples[t + lag];
                // Re{h(t) conj(h(t+lag))}
                acc += a * c + b * d;
            }
            let rho = acc / n as f64 / power;
            let j0 = bessel_j0(DEFAULT_DOPPLER * lag as f64);
            assert!((rho - j0).abs() < 0.05, "lag {lag}: {rho} vs {j0}");
        }
        let p0 = samples[0].0.powi(2) + samples[0].1.powi(2);
        assert!((s.gain_at(0) - p0).abs() < 1e-15);
    }

    #[test]
    fn jakes_is_reproducible() {
        let a = JakesState::new(DEFAULT_DOPPLER, 16, &mut ChaCha8Rng::seed_from_u64(5));
        let b = JakesState::new(DEFAULT_DOPPLER, 16, &mut ChaCha8Rng::seed_from_u64(5));
        for t in [0, 17, 1_000_003] {
            assert_eq!(a.gain_at(t), b.gain_at(t));
        }
    }

    #[test]
    fn shannon_examples() {
        assert!((snr_to_rate(1.0, 1e7, &RateMap::Shannon) - 1e7).abs() < 1e-6);
        assert!((snr_to_rate(3.0, 1e7, &RateMap::Shannon) - 2e7).abs() < 1e-6);
    }

    #[test]
    fn discrete_examples() {
        let rates = WIFI_RATES_BPS.to_vec();
        assert_eq!(quantize_rate(30e6, &rates), 24e6);
        assert_eq!(quantize_rate(0.9e6, &rates), 0.0);
        // strictly below
        assert_eq!(quantize_rate(24e6, &rates), 12e6);
        assert_eq!(quantize_rate(1e9, &rates), 54e6);
    }

    #[test]
    fn perfect_estimation_is_identity() {
        let spec = ChannelModelSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for snr in [0.0, 0.3, 1.0, 12.0] {
            let s = apply_estimation(snr, snr, 1.0, &spec, &mut rng);
            assert_eq!(s.true_rate, s.measured_rate);
        }
    }

    #[test]
    fn linear_estimation_pipeline() {
        // eps drawn exactly at its mean
        let eps = 0.2;
        let r = estimated_rate(3.0, eps, eps, 1.0, &RateMap::Shannon);
        assert!((r - (1.0 + 3.0 * 0.8f64).log2() * 0.8).abs() < 1e-12);
        // eps = 0, mean error 0.2: 2 * 0.8
        let r0 = estimated_rate(3.0, 0.0, 0.2, 1.0, &RateMap::Shannon);
        assert!((r0 - 1.6).abs() < 1e-12);
        assert!(r0 <= snr_to_rate(3.0, 1.0, &RateMap::Shannon));
    }

    #[test]
    fn linear_estimation_draws_within_support() {
        let spec = ChannelModelSpec {
            estimation: Estimation::Linear { mean_error: 0.2 },
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let s = apply_estimation(3.0, 3.0, 1.0, &spec, &mut rng);
            let lo = estimated_rate(3.0, 0.4, 0.2, 1.0, &RateMap::Shannon);
            assert!(s.measured_rate >= lo - 1e-12 && s.measured_rate <= 1.6 + 1e-12);
        }
    }

    #[test]
    fn check_rejects_bad_specs() {
        let mut spec = ChannelModelSpec::default();
        spec.rate_map = RateMap::DiscreteSet(vec![2.0, 1.0]);
        assert!(spec.check().is_err());
        spec.rate_map = RateMap::Shannon;
        spec.estimation = Estimation::Linear { mean_error: 1.0 };
        assert!(spec.check().is_err());
    }

    proptest! {
        #[test]
        fn rate_maps_are_monotone(a in 0.0f64..1e3, b in 0.0f64..1e3) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let set = RateMap::DiscreteSet(WIFI_RATES_BPS.to_vec());
            prop_assert!(snr_to_rate(lo, 1e7, &RateMap::Shannon) <= snr_to_rate(hi, 1e7, &RateMap::Shannon));
            prop_assert!(snr_to_rate(lo, 1e7, &set) <= snr_to_rate(hi, 1e7, &set));
        }

        #[test]
        fn discrete_output_is_listed_or_zero(snr in 0.0f64..1e4) {
            let r = snr_to_rate(snr, 1e7, &RateMap::DiscreteSet(WIFI_RATES_BPS.to_vec()));
            prop_assert!(r == 0.0 || WIFI_RATES_BPS.contains(&r));
        }
    }
}
