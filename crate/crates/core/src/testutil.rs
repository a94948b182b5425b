//! Test-only brute-force oracle: a small-step time-marching token bucket.
//!
//! Independent of both production computation paths; accuracy is bounded by
//! the step size, so assertions against it use a multiple of `dt`.

use std::collections::VecDeque;

/// FCFS delays from a fixed-step march of the token level.
///
/// Tokens accrue `rate * dt` per step, capped at `burst` while nobody waits;
/// a waiting job departs at the first step where the level reaches one full
/// token. Each delay is accurate to about one step.
pub(crate) fn brute_force_delays(
    times: &[f64],
    rate: f64,
    burst: f64,
    initial_tokens: f64,
    dt: f64,
) -> Vec<f64> {
    let mut delays = vec![0.0; times.len()];
    let mut tokens = initial_tokens;
    let mut queue: VecDeque<usize> = VecDeque::new();
    let mut next_arrival = 0;
    let horizon = times.last().copied().unwrap_or(0.0) + (times.len() as f64 + burst) / rate + 1.0;
    let steps = (horizon / dt).ceil() as u64 + 2;

    for step in 0..=steps {
        let now = step as f64 * dt;
        if step > 0 {
            tokens += rate * dt;
            if queue.is_empty() {
                tokens = tokens.min(burst);
            }
        }
        // Serve before admitting arrivals at this step, mirroring the
        // departure-before-arrival tie rule.
        while tokens >= 1.0 && !queue.is_empty() {
            let job = queue.pop_front().expect("nonempty");
            delays[job] = now - times[job];
            tokens -= 1.0;
        }
        while next_arrival < times.len() && times[next_arrival] <= now {
            let job = next_arrival;
            next_arrival += 1;
            if queue.is_empty() && tokens >= 1.0 {
                tokens -= 1.0;
                delays[job] = now - times[job];
            } else {
                queue.push_back(job);
            }
        }
    }
    assert!(queue.is_empty(), "stepper horizon too short");
    delays
}
