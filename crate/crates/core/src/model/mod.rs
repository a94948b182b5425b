//! Shared domain types: arrival traces, bucket parameters, split
//! specifications, per-job outcomes, and the curve primitives.
//!
//! Everything here is an immutable value after construction and safe to share
//! across threads.

mod curve;

pub use curve::{Breakpoint, PiecewiseLinearCurve, StepCurve};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::routing::RoutingPolicy;

/// Relative tolerance for the aggregate rate/burst sum checks.
pub const SPLIT_SUM_REL_TOLERANCE: f64 = 1e-12;

/// Absolute tolerance, in seconds, for every cross-system curve and delay
/// comparison in this crate.
pub const TIME_TOLERANCE: f64 = 1e-9;

/// Nondecreasing sequence of job arrival instants, in seconds.
///
/// Simultaneous arrivals are allowed; ties keep their sequence order, and all
/// downstream code honors that order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArrivalTrace {
    times: Vec<f64>,
}

impl ArrivalTrace {
    /// Validates and wraps a sequence of arrival instants.
    pub fn new(times: Vec<f64>) -> Result<Self> {
        for (index, &value) in times.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::BadArrivalTime { index, value });
            }
            if index > 0 && value < times[index - 1] {
                return Err(Error::UnsortedTrace { index, value });
            }
        }
        Ok(Self { times })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Raw form used for (de)serialization so invariants hold after decode.
#[derive(Deserialize)]
struct RawBucketParams {
    rate: f64,
    burst: f64,
    #[serde(default)]
    initial_tokens: Option<f64>,
}

/// Token rate and burst size of one (sub-)bucket.
///
/// `initial_tokens` defaults to a full bucket; the bucket accrues tokens at
/// `rate` per second up to `burst`, and every job consumes exactly one token.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBucketParams")]
pub struct BucketParams {
    rate: f64,
    burst: f64,
    initial_tokens: f64,
}

impl TryFrom<RawBucketParams> for BucketParams {
    type Error = Error;

    fn try_from(raw: RawBucketParams) -> Result<Self> {
        match raw.initial_tokens {
            Some(initial) => Self::with_initial_tokens(raw.rate, raw.burst, initial),
            None => Self::new(raw.rate, raw.burst),
        }
    }
}

impl BucketParams {
    /// A bucket starting full.
    pub fn new(rate: f64, burst: f64) -> Result<Self> {
        Self::with_initial_tokens(rate, burst, burst)
    }

    pub fn with_initial_tokens(rate: f64, burst: f64, initial_tokens: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::BadBucketParams {
                reason: format!("rate must be finite and > 0, got {rate}"),
            });
        }
        if !(burst.is_finite() && burst > 0.0) {
            return Err(Error::BadBucketParams {
                reason: format!("burst must be finite and > 0, got {burst}"),
            });
        }
        if !(initial_tokens.is_finite() && (0.0..=burst).contains(&initial_tokens)) {
            return Err(Error::BadBucketParams {
                reason: format!(
                    "initial_tokens must lie in [0, burst], got {initial_tokens} with burst {burst}"
                ),
            });
        }
        Ok(Self {
            rate,
            burst,
            initial_tokens,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn burst(&self) -> f64 {
        self.burst
    }

    pub fn initial_tokens(&self) -> f64 {
        self.initial_tokens
    }

    /// Token deficit at time 0 relative to a full bucket, in token units.
    pub fn initial_work(&self) -> f64 {
        self.burst - self.initial_tokens
    }
}

/// A set of sub-bucket parameters plus the policy that routes jobs to them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub sub_buckets: Vec<BucketParams>,
    pub policy: RoutingPolicy,
}

impl SplitSpec {
    pub fn new(sub_buckets: Vec<BucketParams>, policy: RoutingPolicy) -> Self {
        Self {
            sub_buckets,
            policy,
        }
    }

    pub fn k(&self) -> usize {
        self.sub_buckets.len()
    }

    pub fn rate_sum(&self) -> f64 {
        self.sub_buckets.iter().map(|b| b.rate()).sum()
    }

    pub fn burst_sum(&self) -> f64 {
        self.sub_buckets.iter().map(|b| b.burst()).sum()
    }
}

/// One constraint violated by a proposed split.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitViolation {
    EmptySplit,
    RateSumMismatch { expected: f64, actual: f64 },
    BurstSumMismatch { expected: f64, actual: f64 },
}

impl std::fmt::Display for SplitViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::EmptySplit => write!(f, "split must contain at least one sub-bucket"),
            Self::RateSumMismatch { expected, actual } => {
                write!(f, "rate sum {actual} does not match aggregate rate {expected}")
            }
            Self::BurstSumMismatch { expected, actual } => {
                write!(f, "burst sum {actual} does not match aggregate burst {expected}")
            }
        }
    }
}

/// Outcome of [`validate_split`]: the violated constraints, if any, plus a
/// warning flag for sub-unit bursts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitValidation {
    pub violations: Vec<SplitViolation>,
    /// Set when any sub-bucket has burst < 1: such buckets can never hold a
    /// full token at rest, so every job routed there waits.
    pub sub_unit_burst_warning: bool,
}

impl SplitValidation {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// Renders the violation list for error messages.
    pub fn describe(&self) -> String {
        self.violations
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Checks a split against its declared aggregate: rate and burst sums must
/// match within [`SPLIT_SUM_REL_TOLERANCE`] (relative). Never aborts; all
/// violated constraints are reported together.
pub fn validate_split(aggregate: &BucketParams, split: &SplitSpec) -> SplitValidation {
    let mut violations = Vec::new();
    if split.sub_buckets.is_empty() {
        violations.push(SplitViolation::EmptySplit);
    }
    let rel_mismatch = |expected: f64, actual: f64| {
        (actual - expected).abs() > SPLIT_SUM_REL_TOLERANCE * expected.abs()
    };
    if !split.sub_buckets.is_empty() {
        let rate_sum = split.rate_sum();
        if rel_mismatch(aggregate.rate(), rate_sum) {
            violations.push(SplitViolation::RateSumMismatch {
                expected: aggregate.rate(),
                actual: rate_sum,
            });
        }
        let burst_sum = split.burst_sum();
        if rel_mismatch(aggregate.burst(), burst_sum) {
            violations.push(SplitViolation::BurstSumMismatch {
                expected: aggregate.burst(),
                actual: burst_sum,
            });
        }
    }
    SplitValidation {
        violations,
        sub_unit_burst_warning: split.sub_buckets.iter().any(|b| b.burst() < 1.0),
    }
}

/// Per-job record: where the job went and how long it waited for a token.
///
/// `departure` is always constructed as `arrival + delay`, so the identity
/// holds bit-exactly within a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JobOutcome {
    pub job_index: usize,
    pub arrival: f64,
    pub bucket: usize,
    pub delay: f64,
    pub departure: f64,
}

impl JobOutcome {
    pub fn new(job_index: usize, arrival: f64, bucket: usize, delay: f64) -> Self {
        Self {
            job_index,
            arrival,
            bucket,
            delay,
            departure: arrival + delay,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bucket(rate: f64, burst: f64) -> BucketParams {
        BucketParams::new(rate, burst).unwrap()
    }

    #[test]
    fn trace_rejects_unsorted_and_bad_times() {
        assert!(ArrivalTrace::new(vec![0.0, 1.0, 0.5]).is_err());
        assert!(ArrivalTrace::new(vec![-1.0]).is_err());
        assert!(ArrivalTrace::new(vec![f64::NAN]).is_err());
        assert!(ArrivalTrace::new(vec![f64::INFINITY]).is_err());
        assert!(ArrivalTrace::new(vec![0.0, 0.0, 1.0]).is_ok());
        assert!(ArrivalTrace::new(vec![]).is_ok());
    }

    #[test]
    fn bucket_params_invariants() {
        assert!(BucketParams::new(0.0, 1.0).is_err());
        assert!(BucketParams::new(1.0, 0.0).is_err());
        assert!(BucketParams::new(-1.0, 1.0).is_err());
        assert!(BucketParams::with_initial_tokens(1.0, 1.0, 2.0).is_err());
        assert!(BucketParams::with_initial_tokens(1.0, 1.0, -0.5).is_err());
        let b = bucket(2.0, 3.0);
        assert_eq!(b.initial_tokens(), 3.0);
        assert_eq!(b.initial_work(), 0.0);
    }

    #[test]
    fn validate_split_accepts_exact_halves() {
        let aggregate = bucket(1.0, 2.0);
        let split = SplitSpec::new(
            vec![bucket(0.5, 1.0), bucket(0.5, 1.0)],
            RoutingPolicy::RoundRobin,
        );
        let report = validate_split(&aggregate, &split);
        assert!(report.is_valid(), "{}", report.describe());
        assert!(!report.sub_unit_burst_warning);
    }

    #[test]
    fn validate_split_rejects_rate_mismatch() {
        let aggregate = bucket(1.0, 2.0);
        let split = SplitSpec::new(
            vec![bucket(0.5, 1.0), bucket(0.6, 1.0)],
            RoutingPolicy::RoundRobin,
        );
        let report = validate_split(&aggregate, &split);
        assert!(!report.is_valid());
        assert!(matches!(
            report.violations.as_slice(),
            [SplitViolation::RateSumMismatch { .. }]
        ));
    }

    #[test]
    fn validate_split_accepts_degenerate_single_bucket() {
        let aggregate = bucket(1.0, 2.0);
        let split = SplitSpec::new(vec![bucket(1.0, 2.0)], RoutingPolicy::RoundRobin);
        assert!(validate_split(&aggregate, &split).is_valid());
    }

    #[test]
    fn validate_split_flags_sub_unit_bursts() {
        let aggregate = bucket(1.0, 1.0);
        let split = SplitSpec::new(
            vec![bucket(0.5, 0.5), bucket(0.5, 0.5)],
            RoutingPolicy::RoundRobin,
        );
        let report = validate_split(&aggregate, &split);
        assert!(report.is_valid());
        assert!(report.sub_unit_burst_warning);
    }

    #[test]
    fn validate_split_reports_empty_split() {
        let aggregate = bucket(1.0, 2.0);
        let split = SplitSpec::new(vec![], RoutingPolicy::RoundRobin);
        let report = validate_split(&aggregate, &split);
        assert!(report
            .violations
            .contains(&SplitViolation::EmptySplit));
    }

    #[test]
    fn job_outcome_departure_is_arrival_plus_delay() {
        let o = JobOutcome::new(3, 1.25, 0, 0.1);
        assert_eq!(o.departure.to_bits(), (1.25f64 + 0.1).to_bits());
    }
}
