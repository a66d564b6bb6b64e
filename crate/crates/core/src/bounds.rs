//! Lower bounds, overcommitment metrics and the theorem auditor.
//!
//! Functions over `(μ, b)` pairs expect normalized units: capacity 1 and
//! `D(α) = 1`, so a set is feasible iff `Σμ + √Σb ≤ 1`.

use crate::capacity::{CapacityModel, Item, LoadSummary};
use crate::error::{Error, Result};
use crate::online::{Algorithm, Assignment, PackOptions};
use serde::{Deserialize, Serialize};

/// `Σμ + √Σb`.
pub fn cost_of_set(jobs: &[(f64, f64)]) -> f64 {
    let (m, b) = jobs.iter().fold((0.0, 0.0), |a, &(m, b)| (a.0 + m, a.1 + b));
    m + b.sqrt()
}

/// `Σ(μ + b)`; above 3/4 for every infeasible set.
pub fn sum_mu_plus_b(jobs: &[(f64, f64)]) -> f64 {
    jobs.iter().map(|&(m, b)| m + b).sum()
}

/// `f(a, b) = (2a + b + √(b(4a + b)))/2`.
pub fn f_value(a: f64, b: f64) -> f64 {
    (2.0 * a + b + (b * (4.0 * a + b)).sqrt()) / 2.0
}

/// `Σ f(μ_j, b_j)`, a lower bound on the optimum.
pub fn f_bound(jobs: &[(f64, f64)]) -> f64 {
    jobs.iter().map(|&(m, b)| f_value(m, b)).sum()
}

/// `2 / f(p)` with `f(p) = 1 − (1−p)·p^(1/p − 1)`.
pub fn p_norm_ratio_bound(p: f64) -> Result<f64> {
    if !(0.5..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p must lie in [0.5, 1], got {p}")));
    }
    Ok(2.0 / (1.0 - (1.0 - p) * p.powf(1.0 / p - 1.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OvercommitReport {
    pub b_alpha: u64,
    pub b_one: u64,
    pub ocf_alpha: f64,
    pub ocf_one: f64,
    pub savings: f64,
}

pub fn overcommit_report(b_alpha: u64, b_one: u64, total_upper: f64, capacity: f64) -> Result<OvercommitReport> {
    if b_alpha == 0 || b_one == 0 || !(capacity > 0.0) {
        return Err(Error::InvalidArgument(
            "machine counts must be at least 1 and capacity positive".into(),
        ));
    }
    Ok(OvercommitReport {
        b_alpha,
        b_one,
        ocf_alpha: total_upper / (capacity * b_alpha as f64),
        ocf_one: total_upper / (capacity * b_one as f64),
        savings: 1.0 - b_alpha as f64 / b_one as f64,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundSource {
    Oracle,
    SumMean,
    SumMuPlusB,
    SumF,
    ConflictClique,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    /// Any lazy packer: `m ≤ 8/3·OPT`.
    LazyEightThirds,
    /// First-Fit: `m ≤ 9/4·OPT + 1`.
    FirstFitNineQuarters,
    /// First-Fit with at least `K` jobs per machine: `m ≤ 4/3·(1 + 1/K)·OPT`.
    FirstFitKJobs,
    /// Every machine `ε`-full, `ε ≤ 0.3`: `m ≤ (4/3 + 3ε)·LB`.
    FullMachines,
    /// `ε`-full and `δ`-homogeneous: `m ≤ Σf / ((1−ε)²(1−δ)) + 1`.
    FullHomogeneous,
    /// Local-Search: `m ≤ 2·OPT + 11`.
    LocalSearch,
    /// Lazy packer under the `p`-power constraint: `m ≤ 2/f(p)·OPT`.
    PNormLazy,
    /// Every pair of machines of a lazy run is jointly infeasible, and
    /// every such union has `Σ(μ + b) > 3/4`.
    PairwiseConflict,
    /// Pairing machines of a lazy run: `Σ(μ + b) > 3/4·⌊m/2⌋`.
    LazyPairing,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremCheck {
    pub theorem: Theorem,
    /// Left side, typically the machine count.
    pub lhs: f64,
    /// The bound it must not exceed (or, for sums, must stay below).
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioAudit {
    pub algorithm: Algorithm,
    pub machines_used: usize,
    pub lower_bound: f64,
    pub bound_source: BoundSource,
    pub ratio: f64,
    /// Ratio cap of the algorithm's main guarantee; infinite when none applies.
    pub theorem_bound: f64,
    pub hypothesis_met: bool,
    /// Measured fullness `1 − min Cost` (normalized), when defined.
    pub epsilon: Option<f64>,
    /// Measured homogeneity spread, when defined.
    pub delta: Option<f64>,
    /// Every check whose hypothesis held.
    pub checks: Vec<TheoremCheck>,
}

impl RatioAudit {
    pub fn violations(&self) -> Vec<Theorem> {
        self.checks.iter().filter(|c| !c.holds).map(|c| c.theorem).collect()
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    /// `;`-separated names of violated checks, empty when all pass.
    pub fn flags(&self) -> String {
        self.violations()
            .iter()
            .map(|t| serde_json::to_value(t).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default())
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Context for [`audit_run`].
#[derive(Clone, Debug, Default)]
pub struct AuditInput<'a> {
    pub algorithm: Algorithm,
    pub options: Option<&'a PackOptions>,
    pub oracle_opt: Option<usize>,
}

/// Largest set of jobs that pairwise cannot share a machine, found greedily
/// from the largest mean down.
pub fn conflict_clique(items: &[Item], model: &CapacityModel) -> usize {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| items[b].mean.total_cmp(&items[a].mean).then(a.cmp(&b)));
    let mut clique: Vec<usize> = Vec::new();
    for j in order {
        if clique
            .iter()
            .all(|&k| !model.is_feasible(&LoadSummary::of([&items[k], &items[j]])))
        {
            clique.push(j);
        }
    }
    clique.len()
}

fn ceil_bound(x: f64) -> f64 {
    (x - 1e-9).ceil().max(0.0)
}

fn merged(a: &LoadSummary, b: &LoadSummary) -> LoadSummary {
    LoadSummary {
        sum_mean: a.sum_mean + b.sum_mean,
        sum_b: a.sum_b + b.sum_b,
        sum_sqrt_b: a.sum_sqrt_b + b.sum_sqrt_b,
        sum_upper: a.sum_upper + b.sum_upper,
        count: a.count + b.count,
    }
}

/// Measured `δ` of one machine: `max(b/μ) / min(b/μ) − 1`.
fn homogeneity(norm: &[(f64, f64)]) -> f64 {
    let ratios: Vec<f64> = norm
        .iter()
        .map(|&(m, b)| if m == 0.0 { f64::INFINITY } else { b / m })
        .collect();
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    if hi == lo {
        0.0
    } else if lo == 0.0 || hi.is_infinite() {
        f64::INFINITY
    } else {
        hi / lo - 1.0
    }
}

/// Computes all lower bounds for `assignment` and checks every guarantee
/// whose hypothesis holds.
///
/// Ratio guarantees against the optimum are checked only when an oracle
/// optimum is given and clipping cannot change feasibility, since the
/// theory is stated for the unclipped constraint. Certificate checks rest on
/// infeasibility alone and hold under clipping too.
pub fn audit_run(assignment: &Assignment, items: &[Item], model: &CapacityModel, input: &AuditInput) -> RatioAudit {
    let m = assignment.machine_count();
    let clip_active = model.clip && items.iter().any(|it| it.upper.is_finite());
    let norm: Option<Vec<(f64, f64)>> = items.iter().map(|it| model.normalize(it)).collect();
    let mut checks = Vec::new();
    let mut check = |theorem, lhs: f64, rhs: f64, holds: bool| checks.push(TheoremCheck { theorem, lhs, rhs, holds });

    // Lower bounds.
    let mut bounds = vec![
        (BoundSource::SumMean, ceil_bound(items.iter().map(|it| it.mean).sum::<f64>() / model.capacity)),
        (BoundSource::ConflictClique, conflict_clique(items, model) as f64),
    ];
    if let (Some(norm), false) = (&norm, clip_active) {
        bounds.push((BoundSource::SumMuPlusB, ceil_bound(sum_mu_plus_b(norm))));
        bounds.push((BoundSource::SumF, ceil_bound(f_bound(norm))));
    }
    let (bound_source, lower_bound) = match input.oracle_opt {
        Some(opt) => (BoundSource::Oracle, opt as f64),
        None => bounds
            .iter()
            .copied()
            .fold((BoundSource::SumMean, 0.0), |best, b| if b.1 > best.1 { b } else { best }),
    };
    let ratio = if lower_bound > 0.0 { m as f64 / lower_bound } else if m == 0 { 1.0 } else { f64::INFINITY };

    // Laziness certificates: pairs of machines, grouped by bucket for the bucketed packer.
    let lazy_groups: Option<Vec<usize>> = match input.algorithm {
        Algorithm::FirstFit | Algorithm::BestFit => Some(vec![0; m]),
        Algorithm::Bucketed => {
            let policy = input.options.map(|o| o.bucketing.clone()).unwrap_or_default();
            Some(assignment.machines.iter().map(|mc| policy.bucket_of(&items[mc.jobs[0]])).collect())
        }
        _ => None,
    };
    let sharded = input.options.is_some_and(|o| o.shard_size.is_some());
    if let (Some(groups), false) = (&lazy_groups, sharded) {
        let mut all_ok = true;
        let mut worst = f64::INFINITY;
        for i in 0..m {
            for k in (i + 1)..m {
                if groups[i] != groups[k] {
                    continue;
                }
                let (a, b) = (&assignment.machines[i], &assignment.machines[k]);
                let infeasible = !model.is_feasible(&merged(&a.load, &b.load));
                let lemma = norm.as_ref().map(|n| {
                    a.jobs.iter().chain(&b.jobs).map(|&j| n[j].0 + n[j].1).sum::<f64>()
                });
                if let Some(s) = lemma {
                    worst = worst.min(s);
                }
                all_ok &= infeasible && lemma.is_none_or(|s| s > 0.75);
            }
        }
        check(Theorem::PairwiseConflict, worst, 0.75, all_ok);
        if let (Some(norm), true) = (&norm, groups.iter().all(|&g| g == groups[0])) {
            if m >= 2 {
                let s = sum_mu_plus_b(norm);
                let need = 0.75 * (m / 2) as f64;
                check(Theorem::LazyPairing, s, need, s > need);
            }
        }
    }

    // Fullness and homogeneity, measured per machine.
    let (epsilon, delta) = match &norm {
        Some(norm) if m > 0 => {
            let mut min_cost = f64::INFINITY;
            let mut max_delta: f64 = 0.0;
            for mc in &assignment.machines {
                let set: Vec<(f64, f64)> = mc.jobs.iter().map(|&j| norm[j]).collect();
                min_cost = min_cost.min(cost_of_set(&set));
                max_delta = max_delta.max(homogeneity(&set));
            }
            (Some((1.0 - min_cost).max(0.0)), Some(max_delta))
        }
        _ => (None, None),
    };
    if let (Some(norm), Some(eps)) = (&norm, epsilon) {
        if eps <= 0.3 {
            let lb = sum_mu_plus_b(norm);
            let cap = 4.0 / 3.0 + 3.0 * eps;
            check(Theorem::FullMachines, m as f64, cap * lb, m as f64 <= cap * lb + 1e-9);
        }
        if let Some(d) = delta.filter(|d| *d < 1.0) {
            if eps < 1.0 {
                let bound = f_bound(norm) / ((1.0 - eps).powi(2) * (1.0 - d)) + 1.0;
                check(Theorem::FullHomogeneous, m as f64, bound, m as f64 <= bound + 1e-9);
            }
        }
    }

    // Ratio guarantees against the oracle optimum.
    let mut theorem_bound = f64::INFINITY;
    let mut hypothesis_met = false;
    if let (Some(opt), false) = (input.oracle_opt, clip_active) {
        let opt_f = opt as f64;
        let m_f = m as f64;
        let sqrt_shape = matches!(model.shape, crate::capacity::Shape::Power(p) if p == 0.5);
        let p_shape = match model.shape {
            crate::capacity::Shape::Power(p) => Some(p),
            _ => None,
        };
        if input.algorithm.is_lazy() && sqrt_shape {
            check(Theorem::LazyEightThirds, m_f, 8.0 / 3.0 * opt_f, m_f <= 8.0 / 3.0 * opt_f + 1e-9);
            theorem_bound = 8.0 / 3.0;
            hypothesis_met = true;
        }
        if input.algorithm.is_lazy() && !sqrt_shape {
            if let Some(p) = p_shape {
                let cap = p_norm_ratio_bound(p).unwrap_or(f64::INFINITY);
                check(Theorem::PNormLazy, m_f, cap * opt_f, m_f <= cap * opt_f + 1e-9);
                theorem_bound = cap;
                hypothesis_met = true;
            }
        }
        if input.algorithm == Algorithm::FirstFit && sqrt_shape {
            let b = 2.25 * opt_f + 1.0;
            check(Theorem::FirstFitNineQuarters, m_f, b, m_f <= b + 1e-9);
            if opt > 0 {
                theorem_bound = theorem_bound.min(b / opt_f);
            }
            hypothesis_met = true;
            let k = assignment.machines.iter().map(|mc| mc.jobs.len()).min().unwrap_or(0);
            if k >= 1 {
                let b = 4.0 / 3.0 * (1.0 + 1.0 / k as f64) * opt_f;
                check(Theorem::FirstFitKJobs, m_f, b, m_f <= b + 1e-9);
            }
        }
        if input.algorithm == Algorithm::LocalSearch && sqrt_shape {
            let b = 2.0 * opt_f + 11.0;
            check(Theorem::LocalSearch, m_f, b, m_f <= b);
            if opt > 0 {
                theorem_bound = b / opt_f;
            }
            hypothesis_met = true;
        }
        if let (true, Some(eps)) = (sqrt_shape, epsilon) {
            if eps <= 0.3 {
                let cap = 4.0 / 3.0 + 3.0 * eps;
                check(Theorem::FullMachines, m_f, cap * opt_f, m_f <= cap * opt_f + 1e-9);
            }
        }
    }

    RatioAudit {
        algorithm: input.algorithm,
        machines_used: m,
        lower_bound,
        bound_source,
        ratio,
        theorem_bound,
        hypothesis_met,
        epsilon,
        delta,
        checks,
    }
}
