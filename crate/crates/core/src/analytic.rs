//! Closed-form computation path.
//!
//! A token bucket `(r, b)` fed one-token jobs behaves like a single-server
//! queue with unit-sized work and service rate `r`. This module tracks that
//! queue's unfinished work `U(t)` in token units: `U` jumps by one at each
//! arrival and drains at slope `-r`, truncated at zero. A job waits exactly
//! when the work it finds plus its own token exceeds the burst, giving the
//! per-job delay
//!
//! ```text
//! d_i = max{0, U(a_i^-) + 1 - b} / r
//! ```
//!
//! The unit-rate form of this delay is exact by construction; the general-`r`
//! form follows by rescaling time so that one token accrues per unit, and is
//! validated against the independent event simulator in `simcore`.
//!
//! The number of waiting jobs is `N(t) = ceil(max{0, U(t) - b})` and the
//! accrued latency is `S(t) = integral of N over [0, t]`, computed here as
//! exact step-function areas over the event partition.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    ArrivalTrace, Breakpoint, BucketParams, PiecewiseLinearCurve, SplitSpec, StepCurve,
};

/// Unfinished work seen by each arrival plus the full `U(t)` curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnfinishedWorkProfile {
    pre_arrival_values: Vec<f64>,
    curve: PiecewiseLinearCurve,
}

impl UnfinishedWorkProfile {
    /// `U(a_i^-)` for each job, in token units.
    pub fn pre_arrival_values(&self) -> &[f64] {
        &self.pre_arrival_values
    }

    /// The full `U(t)` curve; jumps by one at arrivals, drains at the token
    /// rate, truncated at zero.
    pub fn curve(&self) -> &PiecewiseLinearCurve {
        &self.curve
    }
}

/// Unfinished work with an empty system at time 0 (full bucket).
pub fn unfinished_work_at_arrivals(trace: &ArrivalTrace, rate: f64) -> Result<UnfinishedWorkProfile> {
    unfinished_work_with_initial(trace, rate, 0.0)
}

/// Unfinished work starting from `initial_work` tokens of backlog at time 0.
///
/// A bucket that starts with `c` of its `b` tokens corresponds to
/// `initial_work = b - c`.
pub fn unfinished_work_with_initial(
    trace: &ArrivalTrace,
    rate: f64,
    initial_work: f64,
) -> Result<UnfinishedWorkProfile> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::BadBucketParams {
            reason: format!("rate must be finite and > 0, got {rate}"),
        });
    }
    if !(initial_work.is_finite() && initial_work >= 0.0) {
        return Err(Error::BadBucketParams {
            reason: format!("initial work must be finite and >= 0, got {initial_work}"),
        });
    }

    let mut pre_arrival_values = Vec::with_capacity(trace.len());
    let mut breakpoints: Vec<Breakpoint> = vec![Breakpoint {
        time: 0.0,
        value: initial_work,
        slope: if initial_work > 0.0 { -rate } else { 0.0 },
    }];
    // (time, value) anchor of the current declining segment.
    let mut anchor_time = 0.0_f64;
    let mut value = initial_work;

    let mut push = |bps: &mut Vec<Breakpoint>, bp: Breakpoint| {
        if let Some(last) = bps.last_mut() {
            if last.time == bp.time {
                *last = bp;
                return;
            }
        }
        bps.push(bp);
    };

    for &arrival in trace.times() {
        let declined = value - rate * (arrival - anchor_time);
        let pre = if declined > 0.0 {
            declined
        } else {
            if value > 0.0 {
                // Work hit zero strictly inside the gap; clamp the computed
                // hit time so rounding cannot push it past the arrival.
                let hit = (anchor_time + value / rate).min(arrival);
                push(
                    &mut breakpoints,
                    Breakpoint {
                        time: hit,
                        value: 0.0,
                        slope: 0.0,
                    },
                );
            }
            0.0
        };
        pre_arrival_values.push(pre);
        let post = pre + 1.0;
        push(
            &mut breakpoints,
            Breakpoint {
                time: arrival,
                value: post,
                slope: -rate,
            },
        );
        anchor_time = arrival;
        value = post;
    }

    if value > 0.0 {
        push(
            &mut breakpoints,
            Breakpoint {
                time: anchor_time + value / rate,
                value: 0.0,
                slope: 0.0,
            },
        );
    }

    Ok(UnfinishedWorkProfile {
        pre_arrival_values,
        curve: PiecewiseLinearCurve::new(breakpoints),
    })
}

/// Per-job token-bucket delays, in seconds.
pub fn token_bucket_delays(trace: &ArrivalTrace, params: &BucketParams) -> Result<Vec<f64>> {
    let profile = unfinished_work_with_initial(trace, params.rate(), params.initial_work())?;
    Ok(delays_from_profile(&profile, params))
}

fn delays_from_profile(profile: &UnfinishedWorkProfile, params: &BucketParams) -> Vec<f64> {
    profile
        .pre_arrival_values()
        .iter()
        .map(|&u| (u + 1.0 - params.burst()).max(0.0) / params.rate())
        .collect()
}

fn ceil_positive(x: f64) -> u64 {
    if x <= 0.0 {
        0
    } else {
        x.ceil() as u64
    }
}

/// The waiting-job count `N(t)` as a right-continuous step curve.
///
/// At an instant where `U(t) - b` equals a positive integer `m` exactly, the
/// value is `m`: the job whose token just completed counts as departed.
pub fn waiting_count_curve(trace: &ArrivalTrace, params: &BucketParams) -> Result<StepCurve> {
    let profile = unfinished_work_with_initial(trace, params.rate(), params.initial_work())?;
    Ok(waiting_curve_from_profile(&profile, params))
}

fn waiting_curve_from_profile(profile: &UnfinishedWorkProfile, params: &BucketParams) -> StepCurve {
    let burst = params.burst();
    let rate = params.rate();
    let bps = profile.curve().breakpoints();
    let mut changes: Vec<(f64, u64)> = Vec::new();
    for (i, bp) in bps.iter().enumerate() {
        let start_count = ceil_positive(bp.value - burst);
        changes.push((bp.time, start_count));
        if bp.slope >= 0.0 || start_count == 0 {
            continue;
        }
        let end = bps.get(i + 1).map(|next| next.time);
        let end_value = end.map_or(0.0, |t| bp.value + bp.slope * (t - bp.time));
        // Step down each time U crosses burst + m from above.
        for m in (0..start_count).rev() {
            let level = burst + m as f64;
            if level >= bp.value {
                continue;
            }
            if level < end_value {
                break;
            }
            let mut hit = bp.time + (bp.value - level) / rate;
            if let Some(end_time) = end {
                hit = hit.min(end_time);
            }
            changes.push((hit, m));
        }
    }
    StepCurve::from_changes(changes)
}

/// Exact integral of a waiting-count curve over `[0, t]`, in job-seconds.
///
/// With `t = f64::INFINITY` this is the total accrued latency, equal to the
/// sum of the per-job delays.
pub fn latency_integral(curve: &StepCurve, t: f64) -> f64 {
    curve.integral(t)
}

/// Analytic curves for a split system on a fixed assignment.
#[derive(Debug, Clone, Serialize)]
pub struct SystemCurves {
    per_bucket: Vec<UnfinishedWorkProfile>,
    per_bucket_waiting: Vec<StepCurve>,
    combined_waiting: StepCurve,
    combined_latency: PiecewiseLinearCurve,
    delays: Vec<f64>,
}

impl SystemCurves {
    /// Per-sub-bucket unfinished-work profiles, on each bucket's sub-trace.
    pub fn per_bucket(&self) -> &[UnfinishedWorkProfile] {
        &self.per_bucket
    }

    pub fn per_bucket_waiting(&self) -> &[StepCurve] {
        &self.per_bucket_waiting
    }

    /// Pointwise sum of the sub-bucket waiting counts.
    pub fn combined_waiting(&self) -> &StepCurve {
        &self.combined_waiting
    }

    /// Accrued latency of the whole split system.
    pub fn combined_latency(&self) -> &PiecewiseLinearCurve {
        &self.combined_latency
    }

    /// Delays indexed by the original job position in the trace.
    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn total_delay(&self) -> f64 {
        self.delays.iter().sum()
    }
}

/// Computes each sub-bucket's profile on its assigned sub-stream and the
/// combined waiting and latency curves.
pub fn system_curves(
    trace: &ArrivalTrace,
    split: &SplitSpec,
    assignment: &[usize],
) -> Result<SystemCurves> {
    let k = split.k();
    if k == 0 {
        return Err(Error::InvalidSplit("split has no sub-buckets".into()));
    }
    if assignment.len() != trace.len() {
        return Err(Error::AssignmentLength {
            assignment: assignment.len(),
            trace: trace.len(),
        });
    }
    if let Some(&bad) = assignment.iter().find(|&&b| b >= k) {
        return Err(Error::BucketOrdinal { ordinal: bad, k });
    }

    let mut sub_times: Vec<Vec<f64>> = vec![Vec::new(); k];
    let mut sub_jobs: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (job, (&t, &bucket)) in trace.times().iter().zip(assignment).enumerate() {
        sub_times[bucket].push(t);
        sub_jobs[bucket].push(job);
    }

    let mut per_bucket = Vec::with_capacity(k);
    let mut per_bucket_waiting = Vec::with_capacity(k);
    let mut delays = vec![0.0; trace.len()];
    for (bucket, params) in split.sub_buckets.iter().enumerate() {
        let sub_trace = ArrivalTrace::new(std::mem::take(&mut sub_times[bucket]))?;
        let profile =
            unfinished_work_with_initial(&sub_trace, params.rate(), params.initial_work())?;
        for (&job, delay) in sub_jobs[bucket]
            .iter()
            .zip(delays_from_profile(&profile, params))
        {
            delays[job] = delay;
        }
        per_bucket_waiting.push(waiting_curve_from_profile(&profile, params));
        per_bucket.push(profile);
    }

    let combined_waiting = StepCurve::sum(per_bucket_waiting.iter());
    let combined_latency = combined_waiting.integrate();
    Ok(SystemCurves {
        per_bucket,
        per_bucket_waiting,
        combined_waiting,
        combined_latency,
        delays,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routing::RoutingPolicy;
    use crate::testutil::brute_force_delays;

    fn trace(times: &[f64]) -> ArrivalTrace {
        ArrivalTrace::new(times.to_vec()).unwrap()
    }

    fn bucket(rate: f64, burst: f64) -> BucketParams {
        BucketParams::new(rate, burst).unwrap()
    }

    #[test]
    fn unfinished_work_three_simultaneous_arrivals() {
        let p = unfinished_work_at_arrivals(&trace(&[0.0, 0.0, 0.0]), 1.0).unwrap();
        assert_eq!(p.pre_arrival_values(), &[0.0, 1.0, 2.0]);
        // U(0) = 3, drains at slope -1, hits zero at t = 3.
        assert_eq!(p.curve().value_at(0.0), 3.0);
        assert_eq!(p.curve().value_at(1.5), 1.5);
        assert_eq!(p.curve().value_at(3.0), 0.0);
        assert_eq!(p.curve().value_at(10.0), 0.0);
    }

    #[test]
    fn unfinished_work_long_gap_clears_backlog() {
        let p = unfinished_work_at_arrivals(&trace(&[0.0, 10.0]), 1.0).unwrap();
        assert_eq!(p.pre_arrival_values(), &[0.0, 0.0]);
        assert_eq!(p.curve().value_at(0.5), 0.5);
        assert_eq!(p.curve().value_at(1.0), 0.0);
        assert_eq!(p.curve().value_at(9.0), 0.0);
        assert_eq!(p.curve().value_at(10.0), 1.0);
    }

    #[test]
    fn unfinished_work_fast_rate_keeps_up() {
        let p = unfinished_work_at_arrivals(&trace(&[0.0, 0.5, 1.0]), 2.0).unwrap();
        assert_eq!(p.pre_arrival_values(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn unfinished_work_rejects_bad_rate() {
        assert!(unfinished_work_at_arrivals(&trace(&[0.0]), 0.0).is_err());
        assert!(unfinished_work_at_arrivals(&trace(&[0.0]), -1.0).is_err());
    }

    #[test]
    fn unfinished_work_jump_left_limits() {
        let p = unfinished_work_at_arrivals(&trace(&[0.0, 0.5]), 1.0).unwrap();
        assert_eq!(p.curve().left_limit_at(0.5), 0.5);
        assert_eq!(p.curve().value_at(0.5), 1.5);
    }

    #[test]
    fn delays_match_hand_applied_recursion() {
        let d = token_bucket_delays(&trace(&[0.0, 0.0, 0.0]), &bucket(1.0, 2.0)).unwrap();
        assert_eq!(d, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn single_job_full_bucket_never_waits() {
        for (r, b) in [(1.0, 1.0), (0.3, 2.5), (7.0, 9.0)] {
            let d = token_bucket_delays(&trace(&[0.0]), &bucket(r, b)).unwrap();
            assert_eq!(d, vec![0.0]);
        }
    }

    #[test]
    fn slow_rate_delay_scales_by_rate() {
        let d = token_bucket_delays(&trace(&[0.0, 0.0]), &bucket(0.5, 1.0)).unwrap();
        assert_eq!(d, vec![0.0, 2.0]);
    }

    #[test]
    fn depleted_bucket_first_job_waits_for_full_token() {
        let params = BucketParams::with_initial_tokens(2.0, 4.0, 0.0).unwrap();
        let d = token_bucket_delays(&trace(&[0.0]), &params).unwrap();
        assert_eq!(d, vec![0.5]);
    }

    #[test]
    fn sub_unit_burst_job_waits_for_missing_fraction() {
        let params = BucketParams::new(1.0, 0.5).unwrap();
        let d = token_bucket_delays(&trace(&[0.0]), &params).unwrap();
        assert_eq!(d, vec![0.5]);
    }

    #[test]
    fn waiting_curve_one_second_of_one_waiter() {
        let n = waiting_count_curve(&trace(&[0.0, 0.0, 0.0]), &bucket(1.0, 2.0)).unwrap();
        assert_eq!(n.breakpoints(), &[(0.0, 1), (1.0, 0)]);
    }

    #[test]
    fn waiting_curve_empty_trace_is_zero() {
        let n = waiting_count_curve(&ArrivalTrace::empty(), &bucket(1.0, 2.0)).unwrap();
        assert!(n.is_empty());
    }

    #[test]
    fn waiting_curve_slow_bucket() {
        let n = waiting_count_curve(&trace(&[0.0, 0.0]), &bucket(0.5, 1.0)).unwrap();
        assert_eq!(n.breakpoints(), &[(0.0, 1), (2.0, 0)]);
    }

    #[test]
    fn waiting_curve_steps_down_through_levels() {
        // Four simultaneous jobs, burst 1: three wait, departing at 1, 2, 3.
        let n = waiting_count_curve(&trace(&[0.0, 0.0, 0.0, 0.0]), &bucket(1.0, 1.0)).unwrap();
        assert_eq!(n.breakpoints(), &[(0.0, 3), (1.0, 2), (2.0, 1), (3.0, 0)]);
    }

    #[test]
    fn latency_integral_rectangles() {
        let n = StepCurve::from_changes([(0.0, 1), (1.0, 0)]);
        assert_eq!(latency_integral(&n, 0.5), 0.5);
        assert_eq!(latency_integral(&n, 1.0), 1.0);
        assert_eq!(latency_integral(&n, 5.0), 1.0);
        assert_eq!(latency_integral(&StepCurve::zero(), f64::INFINITY), 0.0);
    }

    #[test]
    fn latency_integral_matches_delay_sum() {
        let params = bucket(0.5, 1.0);
        let t = trace(&[0.0, 0.0]);
        let n = waiting_count_curve(&t, &params).unwrap();
        let total: f64 = token_bucket_delays(&t, &params).unwrap().iter().sum();
        assert_eq!(latency_integral(&n, f64::INFINITY), total);
        assert_eq!(total, 2.0);
    }

    fn even_split(k: usize, rate: f64, burst: f64) -> SplitSpec {
        let sub = BucketParams::new(rate / k as f64, burst / k as f64).unwrap();
        SplitSpec::new(vec![sub; k], RoutingPolicy::RoundRobin)
    }

    #[test]
    fn system_curves_all_to_one_pair() {
        let t = trace(&[0.0, 0.0]);
        let curves = system_curves(&t, &even_split(2, 1.0, 2.0), &[0, 0]).unwrap();
        assert_eq!(curves.delays(), &[0.0, 2.0]);
        assert_eq!(curves.combined_latency().value_at_infinity(), 2.0);
    }

    #[test]
    fn system_curves_spread_pair_is_free() {
        let t = trace(&[0.0, 0.0]);
        let curves = system_curves(&t, &even_split(2, 1.0, 2.0), &[0, 1]).unwrap();
        assert_eq!(curves.delays(), &[0.0, 0.0]);
        assert_eq!(curves.combined_latency().value_at_infinity(), 0.0);
    }

    #[test]
    fn system_curves_degenerate_split_matches_one_bucket() {
        let t = trace(&[0.0, 0.25, 0.5, 3.0, 3.0]);
        let params = bucket(1.0, 2.0);
        let split = SplitSpec::new(vec![params], RoutingPolicy::RoundRobin);
        let curves = system_curves(&t, &split, &[0; 5]).unwrap();
        let one = waiting_count_curve(&t, &params).unwrap();
        assert_eq!(curves.combined_waiting(), &one);
        assert_eq!(
            curves.delays().to_vec(),
            token_bucket_delays(&t, &params).unwrap()
        );
    }

    #[test]
    fn system_curves_rejects_mismatches() {
        let t = trace(&[0.0, 1.0]);
        let split = even_split(2, 1.0, 2.0);
        assert!(matches!(
            system_curves(&t, &split, &[0]),
            Err(Error::AssignmentLength { .. })
        ));
        assert!(matches!(
            system_curves(&t, &split, &[0, 2]),
            Err(Error::BucketOrdinal { .. })
        ));
    }

    #[test]
    fn delays_agree_with_brute_force_stepper() {
        let cases: &[(&[f64], f64, f64)] = &[
            (&[0.0, 0.0, 0.0], 1.0, 2.0),
            (&[0.0, 0.1, 0.2, 0.3, 4.0, 4.0, 4.0], 0.5, 1.5),
            (&[0.0, 0.0, 1.0, 1.0, 1.0, 2.5], 2.0, 1.0),
            (&[0.5, 0.5, 0.5, 0.5], 1.0, 0.7),
        ];
        for &(times, rate, burst) in cases {
            let dt = 1e-4;
            let exact =
                token_bucket_delays(&trace(times), &bucket(rate, burst)).unwrap();
            let approx = brute_force_delays(times, rate, burst, burst, dt);
            for (i, (e, a)) in exact.iter().zip(&approx).enumerate() {
                assert!(
                    (e - a).abs() <= 10.0 * dt,
                    "job {i}: exact {e} vs stepper {a} (rate {rate}, burst {burst})"
                );
            }
        }
    }
}
