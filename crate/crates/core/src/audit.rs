//! Randomized audits of the packing guarantees against the exact optimum.

use crate::bounds::{audit_run, cost_of_set, f_bound, sum_mu_plus_b, AuditInput, Theorem};
use crate::capacity::{CapacityModel, Item};
use crate::error::Result;
use crate::experiment::mix_seed;
use crate::offline::{exact_optimal_items, DEFAULT_ORACLE_CAP};
use crate::online::{pack_items, Algorithm, PackOptions};
use crate::par::{self, Execution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub instances: usize,
    pub max_jobs: usize,
    pub lemma_sets: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            instances: 500,
            max_jobs: DEFAULT_ORACLE_CAP,
            lemma_sets: 100_000,
            seed: 0,
            execution: Execution::Parallel,
        }
    }
}

/// One normalized job with `μ + √b ≤ 1`. A third of jobs are shrunk tenfold
/// and a quarter are deterministic, so instances mix scales and shapes.
pub fn random_item<R: Rng + ?Sized>(rng: &mut R, id: u64) -> Item {
    let mean: f64 = rng.random_range(0.0..0.7);
    let mut sqrt_b: f64 = if rng.random_bool(0.25) { 0.0 } else { rng.random_range(0.0..=(1.0 - mean)) };
    let mut mean = mean;
    if rng.random_bool(1.0 / 3.0) {
        mean *= 0.1;
        sqrt_b *= 0.1;
    }
    Item::abstract_item(id, mean, sqrt_b * sqrt_b)
}

pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, max_jobs: usize) -> Vec<Item> {
    let n = rng.random_range(1..=max_jobs.max(1));
    (0..n as u64).map(|id| random_item(rng, id)).collect()
}

pub const AUDITED: [Algorithm; 5] = [
    Algorithm::FirstFit,
    Algorithm::BestFit,
    Algorithm::NextFit,
    Algorithm::Bucketed,
    Algorithm::LocalSearch,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub checks: usize,
    pub violations: usize,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub config: AuditConfig,
    pub algorithms: Vec<AlgorithmSummary>,
    /// Instances where `OPT < Σ(μ+b)` or `OPT < Σf`.
    pub lower_bound_violations: usize,
    pub infeasible_sets: usize,
    /// Infeasible sets with `Σ(μ+b) ≤ 3/4`.
    pub lemma_violations: usize,
    /// Human-readable description of each failure.
    pub failures: Vec<String>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn render(&self) -> String {
        let c = &self.config;
        let mut s = format!(
            "audit seed={} instances={} max_jobs={} lemma_sets={}\n",
            c.seed, c.instances, c.max_jobs, c.lemma_sets
        );
        for a in &self.algorithms {
            s.push_str(&format!(
                "  {:<13} checks={:<6} violations={:<3} max m/OPT={:.4}\n",
                a.algorithm.name(),
                a.checks,
                a.violations,
                a.max_ratio
            ));
        }
        s.push_str(&format!("  lower bounds: violations={}\n", self.lower_bound_violations));
        s.push_str(&format!(
            "  infeasible-set lemma: infeasible={} violations={}\n",
            self.infeasible_sets, self.lemma_violations
        ));
        for f in &self.failures {
            s.push_str(&format!("  FAIL {f}\n"));
        }
        s.push_str(if self.passed() { "PASS\n" } else { "FAIL\n" });
        s
    }
}

struct InstanceResult {
    per_alg: Vec<(usize, usize, f64)>,
    lower_ok: bool,
    failures: Vec<String>,
}

fn audit_instance(seed: u64, index: usize, max_jobs: usize) -> Result<InstanceResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed ^ mix_seed(index as u64)));
    let items = random_instance(&mut rng, max_jobs);
    let model = CapacityModel::normalized();
    let opt = exact_optimal_items(&items, &model, max_jobs.max(DEFAULT_ORACLE_CAP))?.count;
    let norm: Vec<(f64, f64)> = items.iter().map(|it| (it.mean, it.b)).collect();
    let mut failures = Vec::new();
    let lower_ok = opt as f64 + 1e-9 >= sum_mu_plus_b(&norm) && opt as f64 + 1e-9 >= f_bound(&norm);
    if !lower_ok {
        failures.push(format!("instance {index}: OPT={opt} below a lower bound"));
    }
    let opts = PackOptions::default();
    let mut per_alg = Vec::new();
    for alg in AUDITED {
        let a = pack_items(&items, &model, alg, &opts)?;
        let audit = audit_run(
            &a,
            &items,
            &model,
            &AuditInput {
                algorithm: alg,
                options: Some(&opts),
                oracle_opt: Some(opt),
            },
        );
        let bad: Vec<Theorem> = audit.violations();
        if a.machine_count() < opt {
            failures.push(format!("instance {index}: {} used {} < OPT {opt}", alg.name(), a.machine_count()));
        }
        for t in &bad {
            failures.push(format!("instance {index}: {} violates {t:?} (m={}, OPT={opt})", alg.name(), a.machine_count()));
        }
        per_alg.push((audit.checks.len(), bad.len(), a.machine_count() as f64 / opt as f64));
    }
    Ok(InstanceResult { per_alg, lower_ok, failures })
}

/// Counts infeasible random sets and those among them with `Σ(μ+b) ≤ 3/4`.
pub fn lemma_audit(seed: u64, sets: usize) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed ^ 0x004c_454d_4d41));
    let (mut infeasible, mut bad) = (0, 0);
    for _ in 0..sets {
        let k = rng.random_range(1..=8);
        let set: Vec<(f64, f64)> = (0..k)
            .map(|i| {
                let it = random_item(&mut rng, i);
                (it.mean, it.b)
            })
            .collect();
        if cost_of_set(&set) > 1.0 {
            infeasible += 1;
            if sum_mu_plus_b(&set) <= 0.75 {
                bad += 1;
            }
        }
    }
    (infeasible, bad)
}

pub fn run_audit(cfg: &AuditConfig) -> Result<AuditReport> {
    let results: Vec<InstanceResult> = par::map_range(cfg.execution, cfg.instances, |i| audit_instance(cfg.seed, i, cfg.max_jobs))
        .into_iter()
        .collect::<Result<_>>()?;
    let mut algorithms: Vec<AlgorithmSummary> = AUDITED
        .iter()
        .map(|&algorithm| AlgorithmSummary {
            algorithm,
            checks: 0,
            violations: 0,
            max_ratio: 0.0,
        })
        .collect();
    let mut failures = Vec::new();
    let mut lower_bound_violations = 0;
    for r in results {
        for (s, (checks, bad, ratio)) in algorithms.iter_mut().zip(r.per_alg) {
            s.checks += checks;
            s.violations += bad;
            s.max_ratio = s.max_ratio.max(ratio);
        }
        lower_bound_violations += usize::from(!r.lower_ok);
        failures.extend(r.failures);
    }
    let (infeasible_sets, lemma_violations) = lemma_audit(cfg.seed, cfg.lemma_sets);
    if lemma_violations > 0 {
        failures.push(format!("{lemma_violations} infeasible sets with sum(mu+b) <= 3/4"));
    }
    Ok(AuditReport {
        config: cfg.clone(),
        algorithms,
        lower_bound_violations,
        infeasible_sets,
        lemma_violations,
        failures,
    })
}
