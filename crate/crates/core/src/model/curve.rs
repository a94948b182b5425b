//! Step and piecewise-linear curves over simulation time.
//!
//! Both curve kinds use right-continuous semantics: the value stored at a
//! breakpoint is the value on `[t_i, t_{i+1})`. A [`PiecewiseLinearCurve`]
//! may jump between segments (the unfinished-work curve jumps at arrivals);
//! the left limit at a breakpoint is recoverable via
//! [`PiecewiseLinearCurve::left_limit_at`].

use serde::Serialize;

/// Right-continuous, integer-valued step function of time.
///
/// The value before the first breakpoint is 0. Breakpoint times are strictly
/// increasing and the value changes at every breakpoint.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct StepCurve {
    breakpoints: Vec<(f64, u64)>,
}

impl StepCurve {
    /// The identically-zero curve.
    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds a curve from `(time, new_value)` change records.
    ///
    /// Input times must be nondecreasing. Records sharing a time are collapsed
    /// to the last one; records that do not change the value are dropped.
    ///
    /// # Panics
    /// Panics if the input times decrease (an internal logic error in the
    /// caller, not a data error).
    pub fn from_changes<I: IntoIterator<Item = (f64, u64)>>(changes: I) -> Self {
        let mut breakpoints: Vec<(f64, u64)> = Vec::new();
        let mut current: u64 = 0;
        for (time, value) in changes {
            if let Some(&(last_time, _)) = breakpoints.last() {
                assert!(
                    time >= last_time,
                    "step curve changes must be time-ordered: {time} < {last_time}"
                );
                if time == last_time {
                    // Collapse same-instant records to the final value.
                    let prev = breakpoints[..breakpoints.len() - 1]
                        .last()
                        .map_or(0, |&(_, v)| v);
                    breakpoints.pop();
                    current = prev;
                }
            }
            if value != current {
                breakpoints.push((time, value));
                current = value;
            }
        }
        Self { breakpoints }
    }

    pub fn breakpoints(&self) -> &[(f64, u64)] {
        &self.breakpoints
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }

    /// Value at time `t` (right-continuous; 0 before the first breakpoint).
    pub fn value_at(&self, t: f64) -> u64 {
        match self.breakpoints.partition_point(|&(bt, _)| bt <= t) {
            0 => 0,
            i => self.breakpoints[i - 1].1,
        }
    }

    /// Value after the last breakpoint (0 for an empty curve).
    pub fn final_value(&self) -> u64 {
        self.breakpoints.last().map_or(0, |&(_, v)| v)
    }

    /// Exact integral over `[0, t]`.
    ///
    /// `t = f64::INFINITY` is allowed and yields a finite result only when the
    /// final value is 0.
    pub fn integral(&self, t: f64) -> f64 {
        let mut total = 0.0;
        for (i, &(start, value)) in self.breakpoints.iter().enumerate() {
            if start >= t {
                break;
            }
            let end = self
                .breakpoints
                .get(i + 1)
                .map_or(f64::INFINITY, |&(next, _)| next);
            let end = end.min(t);
            if value > 0 && end > start {
                total += value as f64 * (end - start);
            }
        }
        total
    }

    /// Pointwise sum of several step curves.
    pub fn sum<'a, I: IntoIterator<Item = &'a StepCurve>>(curves: I) -> StepCurve {
        let mut events: Vec<(f64, u64)> = Vec::new();
        let curves: Vec<&StepCurve> = curves.into_iter().collect();
        let mut times: Vec<f64> = curves
            .iter()
            .flat_map(|c| c.breakpoints.iter().map(|&(t, _)| t))
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        for t in times {
            let value = curves.iter().map(|c| c.value_at(t)).sum();
            events.push((t, value));
        }
        StepCurve::from_changes(events)
    }

    /// Cumulative integral as a continuous piecewise-linear curve starting at
    /// `(0, 0)`; the slope on each segment equals the step value there.
    pub fn integrate(&self) -> PiecewiseLinearCurve {
        let mut breakpoints = Vec::with_capacity(self.breakpoints.len() + 1);
        let mut accumulated = 0.0;
        let mut prev: Option<(f64, u64)> = if self.breakpoints.first().is_some_and(|&(t, _)| t > 0.0)
        {
            Some((0.0, 0))
        } else {
            None
        };
        if let Some((t, v)) = prev {
            breakpoints.push(Breakpoint {
                time: t,
                value: 0.0,
                slope: v as f64,
            });
        }
        for &(time, value) in &self.breakpoints {
            if let Some((pt, pv)) = prev {
                accumulated += pv as f64 * (time - pt);
            }
            breakpoints.push(Breakpoint {
                time,
                value: accumulated,
                slope: value as f64,
            });
            prev = Some((time, value));
        }
        if breakpoints.is_empty() {
            breakpoints.push(Breakpoint {
                time: 0.0,
                value: 0.0,
                slope: 0.0,
            });
        }
        PiecewiseLinearCurve { breakpoints }
    }
}

/// One node of a [`PiecewiseLinearCurve`]: right value and right slope at
/// `time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Breakpoint {
    pub time: f64,
    pub value: f64,
    pub slope: f64,
}

/// Piecewise-linear function of time, possibly with jump discontinuities at
/// breakpoints.
///
/// On `[t_i, t_{i+1})` the function is `value_i + slope_i * (t - t_i)`; beyond
/// the last breakpoint the final segment extends indefinitely. Before the
/// first breakpoint the first value is used.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseLinearCurve {
    breakpoints: Vec<Breakpoint>,
}

impl PiecewiseLinearCurve {
    /// Builds a curve from time-ordered breakpoints.
    ///
    /// # Panics
    /// Panics on an empty or time-decreasing breakpoint list.
    pub fn new(breakpoints: Vec<Breakpoint>) -> Self {
        assert!(!breakpoints.is_empty(), "curve needs at least one breakpoint");
        for pair in breakpoints.windows(2) {
            assert!(
                pair[0].time <= pair[1].time,
                "curve breakpoints must be time-ordered"
            );
        }
        Self { breakpoints }
    }

    /// A constant-zero curve anchored at t = 0.
    pub fn zero() -> Self {
        Self::new(vec![Breakpoint {
            time: 0.0,
            value: 0.0,
            slope: 0.0,
        }])
    }

    pub fn breakpoints(&self) -> &[Breakpoint] {
        &self.breakpoints
    }

    /// Right-continuous value at `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        let i = self.breakpoints.partition_point(|bp| bp.time <= t);
        if i == 0 {
            return self.breakpoints[0].value;
        }
        let bp = &self.breakpoints[i - 1];
        bp.value + bp.slope * (t - bp.time)
    }

    /// Left limit at `t`: the value approached from below. Differs from
    /// [`value_at`](Self::value_at) only at jump breakpoints.
    pub fn left_limit_at(&self, t: f64) -> f64 {
        let i = self.breakpoints.partition_point(|bp| bp.time < t);
        if i == 0 {
            return self.breakpoints[0].value;
        }
        let bp = &self.breakpoints[i - 1];
        bp.value + bp.slope * (t - bp.time)
    }

    /// Value as `t -> infinity`; infinite unless the final slope is 0.
    pub fn value_at_infinity(&self) -> f64 {
        let last = self.breakpoints.last().expect("nonempty");
        if last.slope == 0.0 {
            last.value
        } else if last.slope > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn first_time(&self) -> f64 {
        self.breakpoints[0].time
    }

    pub fn last_time(&self) -> f64 {
        self.breakpoints.last().expect("nonempty").time
    }
}
