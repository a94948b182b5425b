//! Job-to-sub-bucket routing policies.
//!
//! Offline policies can produce a full assignment vector ahead of time;
//! `jsq` decides online from the per-bucket state observed at each arrival
//! instant (after same-instant departures). Policies never look ahead.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ArrivalTrace;

/// How arriving jobs are distributed across sub-buckets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum RoutingPolicy {
    /// Cycle through buckets 0..k-1 in trace order.
    RoundRobin,
    /// Independent uniform draw per job, reproducible from the seed.
    UniformRandom { seed: u64 },
    /// Join the bucket with the fewest waiting jobs; ties go to the lowest
    /// ordinal. Online-only.
    Jsq,
    /// Send every job to one fixed bucket.
    AllToOne { target: usize },
    /// Explicit per-job assignment; the vector length must equal the trace
    /// length. Supports adversarial offline splits.
    Custom { assignment: Vec<usize> },
}

impl RoutingPolicy {
    /// True when decisions need simulation state at the arrival instant.
    pub fn is_online_only(&self) -> bool {
        matches!(self, Self::Jsq)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::RoundRobin => "round_robin",
            Self::UniformRandom { .. } => "uniform_random",
            Self::Jsq => "jsq",
            Self::AllToOne { .. } => "all_to_one",
            Self::Custom { .. } => "custom",
        }
    }
}

/// Per-bucket state visible to online policies at an arrival instant:
/// the waiting-job count and the token level, both after any departures due
/// at that same instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BucketSnapshot {
    pub waiting: usize,
    pub tokens: f64,
}

/// Deterministic decision state owned by one simulation run.
#[derive(Debug)]
pub struct PolicyEngine {
    policy: RoutingPolicy,
    k: usize,
    next_job: usize,
    rng: Option<ChaCha8Rng>,
}

impl PolicyEngine {
    pub fn new(policy: RoutingPolicy, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidSplit("k must be at least 1".into()));
        }
        if let RoutingPolicy::AllToOne { target } = &policy {
            if *target >= k {
                return Err(Error::BucketOrdinal {
                    ordinal: *target,
                    k,
                });
            }
        }
        if let RoutingPolicy::Custom { assignment } = &policy {
            if let Some(&bad) = assignment.iter().find(|&&b| b >= k) {
                return Err(Error::BucketOrdinal { ordinal: bad, k });
            }
        }
        let rng = match &policy {
            RoutingPolicy::UniformRandom { seed } => Some(ChaCha8Rng::seed_from_u64(*seed)),
            _ => None,
        };
        Ok(Self {
            policy,
            k,
            next_job: 0,
            rng,
        })
    }

    /// Decides the bucket for the next arriving job.
    ///
    /// `snapshot` must describe all `k` buckets at the arrival instant; it is
    /// only consulted by state-dependent policies.
    pub fn decide(&mut self, snapshot: &[BucketSnapshot]) -> Result<usize> {
        debug_assert_eq!(snapshot.len(), self.k);
        let job = self.next_job;
        self.next_job += 1;
        match &self.policy {
            RoutingPolicy::RoundRobin => Ok(job % self.k),
            RoutingPolicy::UniformRandom { .. } => {
                let rng = self.rng.as_mut().expect("seeded rng");
                Ok(rng.gen_range(0..self.k))
            }
            RoutingPolicy::Jsq => Ok(snapshot
                .iter()
                .enumerate()
                .min_by_key(|(_, s)| s.waiting)
                .map(|(i, _)| i)
                .expect("k >= 1")),
            RoutingPolicy::AllToOne { target } => Ok(*target),
            RoutingPolicy::Custom { assignment } => {
                assignment
                    .get(job)
                    .copied()
                    .ok_or(Error::AssignmentLength {
                        assignment: assignment.len(),
                        trace: job + 1,
                    })
            }
        }
    }
}

/// Builds the full assignment vector for an offline-capable policy.
///
/// Deterministic given the policy (including any seed). Rejects `jsq`, whose
/// decisions need live state, and `custom` vectors of the wrong length.
pub fn assign_offline(trace: &ArrivalTrace, policy: &RoutingPolicy, k: usize) -> Result<Vec<usize>> {
    if policy.is_online_only() {
        return Err(Error::OnlineOnlyPolicy {
            policy: policy.name().into(),
        });
    }
    if let RoutingPolicy::Custom { assignment } = policy {
        if assignment.len() != trace.len() {
            return Err(Error::AssignmentLength {
                assignment: assignment.len(),
                trace: trace.len(),
            });
        }
    }
    let mut engine = PolicyEngine::new(policy.clone(), k)?;
    let blank = vec![
        BucketSnapshot {
            waiting: 0,
            tokens: 0.0,
        };
        k
    ];
    (0..trace.len()).map(|_| engine.decide(&blank)).collect()
}

/// One-shot online decision from a state snapshot.
///
/// Stateful policies (`round_robin`, `uniform_random`, `custom`) decide as a
/// fresh [`PolicyEngine`] would for its first job; simulations should hold an
/// engine instead of calling this repeatedly.
pub fn online_decide(snapshot: &[BucketSnapshot], policy: &RoutingPolicy) -> Result<usize> {
    let mut engine = PolicyEngine::new(policy.clone(), snapshot.len())?;
    engine.decide(snapshot)
}
