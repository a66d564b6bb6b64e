//! Monte Carlo estimates of realized capacity violations.

use crate::capacity::ConstraintSpec;
use crate::error::{Error, Result};
use crate::online::Assignment;
use crate::par::{self, Execution};
use crate::workload::Job;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Default realizations per machine.
pub const DEFAULT_SAMPLES: usize = 5000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationEstimate {
    pub per_machine_violation_rate: Vec<f64>,
    /// Mean of the per-machine rates (every machine uses the same sample count).
    pub aggregate_rate: f64,
    pub samples: usize,
    pub seed: u64,
}

impl ViolationEstimate {
    /// Binomial standard error of the aggregate rate.
    pub fn standard_error(&self) -> f64 {
        let n = (self.samples * self.per_machine_violation_rate.len()).max(1) as f64;
        (self.aggregate_rate * (1.0 - self.aggregate_rate) / n).sqrt()
    }

    pub fn max_rate(&self) -> f64 {
        self.per_machine_violation_rate.iter().copied().fold(0.0, f64::max)
    }
}

/// Random stream for machine `machine` under `seed`; streams never overlap.
pub fn machine_rng(seed: u64, machine: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(machine as u64);
    rng
}

/// Fraction of `samples` joint realizations of `jobs` whose total exceeds `capacity`.
pub fn machine_violation_rate(jobs: &[&Job], capacity: f64, samples: usize, rng: &mut ChaCha8Rng) -> f64 {
    if jobs.iter().map(|j| j.upper()).sum::<f64>() <= capacity {
        return 0.0;
    }
    let mut over = 0usize;
    for _ in 0..samples {
        let total: f64 = jobs.iter().map(|j| j.sample(rng)).sum();
        if total > capacity {
            over += 1;
        }
    }
    over as f64 / samples as f64
}

/// Samples every machine of `assignment` independently.
pub fn estimate_violations(
    assignment: &Assignment,
    jobs: &[Job],
    spec: &ConstraintSpec,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<ViolationEstimate> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    if assignment.job_to_machine.len() != jobs.len() {
        return Err(Error::InvalidArgument(format!(
            "assignment covers {} jobs but {} were given",
            assignment.job_to_machine.len(),
            jobs.len()
        )));
    }
    let rates = par::map_slice(exec, &assignment.machines, |i, m| {
        let hosted: Vec<&Job> = m.jobs.iter().map(|&j| &jobs[j]).collect();
        machine_violation_rate(&hosted, spec.capacity, samples, &mut machine_rng(seed, i))
    });
    let aggregate_rate = if rates.is_empty() {
        0.0
    } else {
        rates.iter().sum::<f64>() / rates.len() as f64
    };
    Ok(ViolationEstimate {
        per_machine_violation_rate: rates,
        aggregate_rate,
        samples,
        seed,
    })
}
