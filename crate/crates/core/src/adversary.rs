//! The eavesdropper at the base station: arrival log, rate estimators,
//! the Cramér–Rao benchmark and a Kolmogorov–Smirnov check for exponential gaps.

use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::report::fmt_num;
use crate::sim::SimTime;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdversaryError {
    #[error("need at least 2 arrivals to estimate from inter-arrival gaps, got {0}")]
    InsufficientSamples(usize),
    #[error("no arrivals in window [{start}, {end}]")]
    EmptyWindow { start: f64, end: f64 },
    #[error("window end {end} must be after start {start}")]
    InvalidWindow { start: f64, end: f64 },
    #[error("KS test needs at least {min} gaps, got {got}")]
    TooFewSamples { got: usize, min: usize },
    #[error("rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("sample count must be at least 1")]
    ZeroSamples,
}

/// Arrival instants seen at the base station, in observation order.
/// Simultaneous deliveries are kept as separate entries with equal times.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ObservationLog {
    arrivals: Vec<f64>,
}

impl ObservationLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// # Panics
    /// If `t` precedes the last recorded arrival.
    pub fn record(&mut self, t: SimTime) {
        let t = t.secs();
        if let Some(&last) = self.arrivals.last() {
            assert!(t >= last, "arrival at {t} precedes {last}");
        }
        self.arrivals.push(t);
    }

    pub fn from_times(times: impl IntoIterator<Item = f64>) -> Self {
        let mut log = Self::new();
        for t in times {
            log.record(SimTime::from_secs(t));
        }
        log
    }

    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.arrivals
    }

    pub fn view(&self) -> LogView<'_> {
        LogView {
            times: &self.arrivals,
        }
    }

    /// Arrivals with `start <= t <= end`.
    pub fn window(&self, start: f64, end: f64) -> LogView<'_> {
        let lo = self.arrivals.partition_point(|&t| t < start);
        let hi = self.arrivals.partition_point(|&t| t <= end);
        LogView {
            times: &self.arrivals[lo..hi.max(lo)],
        }
    }

    /// `seq,t_s` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["seq", "t_s"])?;
        for (i, &t) in self.arrivals.iter().enumerate() {
            w.write_record([i.to_string(), fmt_num(t)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Borrowed, read-only slice of an [`ObservationLog`].
#[derive(Clone, Copy, Debug)]
pub struct LogView<'a> {
    times: &'a [f64],
}

impl<'a> LogView<'a> {
    pub fn times(&self) -> &'a [f64] {
        self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateMethod {
    InterarrivalMean,
    CountOverWindow,
}

impl fmt::Display for EstimateMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimateMethod::InterarrivalMean => "interarrival-mean",
            EstimateMethod::CountOverWindow => "count-over-window",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateEstimate {
    pub lambda_hat: f64,
    pub n: usize,
    pub method: EstimateMethod,
    pub at: f64,
}

/// Reciprocal of the mean gap: `(n - 1) / (t_n - t_1)`.
///
/// All arrivals at one instant give an infinite estimate; callers that can
/// hit that case should treat a non-finite `lambda_hat` as unusable.
pub fn estimate_interarrival(view: LogView<'_>) -> Result<RateEstimate, AdversaryError> {
    let times = view.times();
    let n = times.len();
    if n < 2 {
        return Err(AdversaryError::InsufficientSamples(n));
    }
    let span = times[n - 1] - times[0];
    Ok(RateEstimate {
        lambda_hat: (n - 1) as f64 / span,
        n,
        method: EstimateMethod::InterarrivalMean,
        at: times[n - 1],
    })
}

/// Arrival count in `[start, end]` divided by the window length.
pub fn estimate_count(
    log: &ObservationLog,
    start: f64,
    end: f64,
) -> Result<RateEstimate, AdversaryError> {
    if !(end > start) {
        return Err(AdversaryError::InvalidWindow { start, end });
    }
    let n = log.window(start, end).len();
    if n == 0 {
        return Err(AdversaryError::EmptyWindow { start, end });
    }
    Ok(RateEstimate {
        lambda_hat: n as f64 / (end - start),
        n,
        method: EstimateMethod::CountOverWindow,
        at: end,
    })
}

/// Cramér–Rao lower bound `lambda^2 / n` on the variance of an unbiased
/// rate estimate from `n` exponential gaps.
pub fn crlb_variance(lambda: f64, n: usize) -> Result<f64, AdversaryError> {
    if !(lambda > 0.0) {
        return Err(AdversaryError::NonPositiveRate(lambda));
    }
    if n == 0 {
        return Err(AdversaryError::ZeroSamples);
    }
    Ok(lambda * lambda / n as f64)
}

/// Inter-arrival estimate over `[0, k * every]` for `k = 1, 2, ...` while
/// `k * every <= until`. Checkpoints seeing fewer than two arrivals are skipped.
pub fn running_estimates(log: &ObservationLog, every: f64, until: f64) -> Vec<RateEstimate> {
    assert!(every > 0.0, "checkpoint spacing must be positive");
    let mut out = Vec::new();
    let mut k = 1u64;
    loop {
        let t = k as f64 * every;
        if t > until {
            break;
        }
        let view = log.window(0.0, t);
        if let Ok(mut est) = estimate_interarrival(view) {
            est.at = t;
            out.push(est);
        }
        k += 1;
    }
    out
}

/// `|lambda_hat - lambda_true| / lambda_true`.
///
/// # Panics
/// If `lambda_true` is not positive.
pub fn relative_error(lambda_hat: f64, lambda_true: f64) -> f64 {
    assert!(lambda_true > 0.0, "true rate must be positive");
    (lambda_hat - lambda_true).abs() / lambda_true
}

/// `t_s,n,lambda_hat_per_s,method` rows.
pub fn write_estimates_csv<W: Write>(estimates: &[RateEstimate], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_s", "n", "lambda_hat_per_s", "method"])?;
    for e in estimates {
        w.write_record([
            fmt_num(e.at),
            e.n.to_string(),
            fmt_num(e.lambda_hat),
            e.method.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Significance levels with tabulated asymptotic KS critical constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KsLevel {
    Alpha01,
    Alpha05,
}

impl KsLevel {
    pub fn constant(self) -> f64 {
        match self {
            KsLevel::Alpha01 => 1.63,
            KsLevel::Alpha05 => 1.36,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub critical: f64,
    pub n: usize,
    pub passed: bool,
}

pub const KS_MIN_SAMPLES: usize = 50;

/// One-sample KS test of `gaps` against Exponential(`rate`) with the rate
/// treated as known.
pub fn ks_exponential(gaps: &[f64], rate: f64, level: KsLevel) -> Result<KsOutcome, AdversaryError> {
    if gaps.len() < KS_MIN_SAMPLES {
        return Err(AdversaryError::TooFewSamples {
            got: gaps.len(),
            min: KS_MIN_SAMPLES,
        });
    }
    if !(rate > 0.0) {
        return Err(AdversaryError::NonPositiveRate(rate));
    }
    let mut sorted = gaps.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = if x <= 0.0 { 0.0 } else { -(-rate * x).exp_m1() };
            let above = (i + 1) as f64 / n - cdf;
            let below = cdf - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max);
    let critical = level.constant() / n.sqrt();
    Ok(KsOutcome {
        statistic,
        critical,
        n: sorted.len(),
        passed: statistic < critical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::RngStream;

    fn poisson_log(rate: f64, horizon: f64, seed: u64) -> ObservationLog {
        let mut s = RngStream::new(seed, "arrivals");
        let mut t = s.exponential(rate).unwrap();
        let mut log = ObservationLog::new();
        while t <= horizon {
            log.record(SimTime::from_secs(t));
            t += s.exponential(rate).unwrap();
        }
        log
    }

    #[test]
    fn interarrival_examples() {
        let log = ObservationLog::from_times([0.0, 5.0, 10.0, 15.0]);
        let e = estimate_interarrival(log.view()).unwrap();
        assert!((e.lambda_hat - 0.2).abs() < 1e-15);
        assert_eq!(e.n, 4);
        let one = ObservationLog::from_times([0.0]);
        assert_eq!(
            estimate_interarrival(one.view()),
            Err(AdversaryError::InsufficientSamples(1))
        );
    }

    #[test]
    fn interarrival_on_long_poisson_log() {
        let log = poisson_log(0.2, 1e5, 42);
        let e = estimate_interarrival(log.view()).unwrap();
        assert!((0.19..=0.21).contains(&e.lambda_hat), "{}", e.lambda_hat);
    }

    #[test]
    fn consistency_at_ten_thousand_samples() {
        for seed in 0..10 {
            let mut s = RngStream::new(seed, "gaps");
            let mut t = 0.0;
            let log = ObservationLog::from_times((0..10_001).map(|_| {
                t += s.exponential(0.2).unwrap();
                t
            }));
            let e = estimate_interarrival(log.view()).unwrap();
            assert!(relative_error(e.lambda_hat, 0.2) < 0.05, "seed {seed}");
        }
    }

    #[test]
    fn count_examples() {
        let log = ObservationLog::from_times((0..60).map(|i| 1000.0 + 5.0 * i as f64));
        let e = estimate_count(&log, 1000.0, 1300.0 - 1e-9).unwrap();
        assert!((e.lambda_hat - 0.2).abs() < 1e-9);
        assert_eq!(e.n, 60);
        assert!(matches!(
            estimate_count(&log, 0.0, 500.0),
            Err(AdversaryError::EmptyWindow { .. })
        ));
        assert!(matches!(
            estimate_count(&log, 5.0, 5.0),
            Err(AdversaryError::InvalidWindow { .. })
        ));
    }

    #[test]
    fn count_and_interarrival_agree_over_full_run() {
        for seed in 0..5 {
            let horizon = 3600.0;
            let log = poisson_log(0.2, horizon, seed);
            let a = estimate_count(&log, 0.0, horizon).unwrap().lambda_hat;
            let b = estimate_interarrival(log.view()).unwrap().lambda_hat;
            assert!((a - b).abs() <= 2.0 / horizon + 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn windows_do_not_mutate() {
        let log = ObservationLog::from_times([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(log.window(2.0, 3.0).times(), &[2.0, 3.0]);
        assert!(log.window(3.5, 3.6).is_empty());
        assert_eq!(log.len(), 4);
    }

    #[test]
    fn crlb_examples() {
        assert!((crlb_variance(0.2, 1000).unwrap() - 4.0e-5).abs() < 1e-18);
        assert_eq!(crlb_variance(1.0, 1).unwrap(), 1.0);
        assert!(crlb_variance(0.0, 3).is_err());
        assert!(crlb_variance(1.0, 0).is_err());
    }

    #[test]
    fn running_estimate_examples() {
        let log = ObservationLog::from_times([0.0, 2.0, 4.0]);
        let series = running_estimates(&log, 2.0, 4.0);
        let got: Vec<(f64, f64)> = series.iter().map(|e| (e.at, e.lambda_hat)).collect();
        assert_eq!(got, vec![(2.0, 0.5), (4.0, 0.5)]);
        assert!(running_estimates(&ObservationLog::new(), 2.0, 100.0).is_empty());
    }

    #[test]
    fn running_estimates_tighten() {
        // Dispersion across seeds at the last checkpoint is below that of the first.
        let finals: Vec<Vec<f64>> = (0..30)
            .map(|seed| {
                let log = poisson_log(0.2, 3600.0, seed);
                running_estimates(&log, 100.0, 3600.0)
                    .iter()
                    .map(|e| e.lambda_hat)
                    .collect()
            })
            .collect();
        let spread = |k: usize| {
            let xs: Vec<f64> = finals.iter().map(|s| s[k]).collect();
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64
        };
        assert!(spread(35) < spread(0));
    }

    #[test]
    fn relative_error_examples() {
        assert!((relative_error(0.4, 0.2) - 1.0).abs() < 1e-15);
        assert_eq!(relative_error(0.2, 0.2), 0.0);
        assert!((relative_error(0.1, 0.2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ks_accepts_exponential_rejects_uniform() {
        let mut s = RngStream::new(42, "ks");
        let exp: Vec<f64> = (0..10_000).map(|_| s.exponential(0.2).unwrap()).collect();
        assert!(ks_exponential(&exp, 0.2, KsLevel::Alpha01).unwrap().passed);
        let uni: Vec<f64> = (0..10_000).map(|_| 10.0 * s.uniform_open_closed()).collect();
        assert!(!ks_exponential(&uni, 0.2, KsLevel::Alpha01).unwrap().passed);
        assert_eq!(
            ks_exponential(&exp[..10], 0.2, KsLevel::Alpha05),
            Err(AdversaryError::TooFewSamples { got: 10, min: 50 })
        );
    }

    #[test]
    fn ks_statistic_by_hand() {
        // Gaps at the exact quantiles (i - 0.5)/n give D = 0.5/n.
        let n = 100;
        let gaps: Vec<f64> = (1..=n)
            .map(|i| -(1.0 - (i as f64 - 0.5) / n as f64).ln() / 0.5)
            .collect();
        let out = ks_exponential(&gaps, 0.5, KsLevel::Alpha05).unwrap();
        assert!((out.statistic - 0.005).abs() < 1e-12);
        assert!((out.critical - 0.136).abs() < 1e-12);
    }

    #[test]
    fn csv_exports() {
        let log = ObservationLog::from_times([0.5, 1.25]);
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "seq,t_s\n0,0.5\n1,1.25\n");
        let mut buf = Vec::new();
        write_estimates_csv(&running_estimates(&ObservationLog::from_times([0.0, 2.0, 4.0]), 2.0, 4.0), &mut buf)
            .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t_s,n,lambda_hat_per_s,method\n2,2,0.5,interarrival-mean\n4,3,0.5,interarrival-mean\n"
        );
    }
}
