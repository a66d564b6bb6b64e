//! Reproducible α sweeps: pack, sample, audit, and summarize.

use crate::bounds::{audit_run, overcommit_report, AuditInput};
use crate::capacity::{ConstraintSpec, RiskFamily, Variant};
use crate::error::{Error, Result};
use crate::monte_carlo::{estimate_violations, DEFAULT_SAMPLES};
use crate::online::{pack_items, Algorithm, PackOptions};
use crate::par::{self, Execution};
use crate::workload::{generate_workload, Job, UsageKind, WorkloadSpec};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const DEFAULT_ALPHA_GRID: [f64; 6] = [0.5, 0.9, 0.99, 0.999, 0.9999, 0.99999];

/// Risk targets reported by [`summarize`].
pub const TARGET_RISKS: [f64; 2] = [0.001, 0.01];

fn default_alpha_grid() -> Vec<f64> {
    DEFAULT_ALPHA_GRID.to_vec()
}
fn default_replicas() -> usize {
    50
}
fn default_samples() -> usize {
    DEFAULT_SAMPLES
}
fn default_p() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}

/// A constraint without `α` and `V`, which the sweep fills in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantTemplate {
    pub variant: Variant,
    #[serde(default = "default_p")]
    pub p_exponent: f64,
    #[serde(default)]
    pub family: RiskFamily,
    #[serde(default = "default_true")]
    pub clip: bool,
    /// Replaces the experiment-wide grid for this variant.
    #[serde(default)]
    pub alpha_grid: Option<Vec<f64>>,
}

impl VariantTemplate {
    pub fn new(variant: Variant) -> Self {
        VariantTemplate {
            variant,
            p_exponent: 0.5,
            family: RiskFamily::default(),
            clip: true,
            alpha_grid: None,
        }
    }

    pub fn with_alpha_grid(mut self, grid: Vec<f64>) -> Self {
        self.alpha_grid = Some(grid);
        self
    }

    pub fn spec(&self, alpha: f64, capacity: f64) -> ConstraintSpec {
        ConstraintSpec {
            variant: self.variant,
            alpha,
            p_exponent: self.p_exponent,
            capacity,
            family: self.family,
            clip: self.clip,
        }
    }

    /// Row label; distinguishes templates that share a variant.
    pub fn label(&self) -> String {
        let mut s = self.variant.name().to_string();
        match self.variant {
            Variant::PNorm => s.push_str(&format!("(p={},{})", self.p_exponent, family_name(self.family))),
            Variant::LogBuffer => s.push_str(&format!("({})", family_name(self.family))),
            _ => {}
        }
        if !self.clip {
            s.push_str("-unclipped");
        }
        s
    }

    fn alphas<'a>(&'a self, default: &'a [f64]) -> &'a [f64] {
        if self.variant == Variant::NoOvercommit {
            &[1.0]
        } else {
            self.alpha_grid.as_deref().unwrap_or(default)
        }
    }
}

fn family_name(f: RiskFamily) -> &'static str {
    match f {
        RiskFamily::Gaussian => "gaussian",
        RiskFamily::Hoeffding => "hoeffding",
        RiskFamily::Robust => "robust",
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Generator parameters; its `seed` is replaced per replica.
    pub workload: WorkloadSpec,
    pub machine_sizes: Vec<f64>,
    pub variants: Vec<VariantTemplate>,
    #[serde(default = "default_alpha_grid")]
    pub alpha_grid: Vec<f64>,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub algorithm: Algorithm,
    #[serde(default)]
    pub pack_options: PackOptions,
    #[serde(default)]
    pub execution: Execution,
}

impl ExperimentConfig {
    /// The standard protocol: 50 replicas of 1000 jobs, Best-Fit, 5000 samples.
    pub fn standard(kind: UsageKind, machine_sizes: Vec<f64>, variants: Vec<VariantTemplate>) -> Self {
        ExperimentConfig {
            workload: WorkloadSpec::production(kind, 0),
            machine_sizes,
            variants,
            alpha_grid: default_alpha_grid(),
            replicas: default_replicas(),
            mc_samples: DEFAULT_SAMPLES,
            base_seed: 0,
            output_path: None,
            algorithm: Algorithm::BestFit,
            pack_options: PackOptions::default(),
            execution: Execution::Parallel,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.workload.validate()?;
        if self.replicas == 0 {
            return bad("replicas must be at least 1".into());
        }
        if self.mc_samples == 0 {
            return bad("mc_samples must be at least 1".into());
        }
        if self.machine_sizes.is_empty() || self.machine_sizes.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("machine_sizes must be a non-empty list of positive numbers".into());
        }
        if self.variants.is_empty() {
            return bad("variants must not be empty".into());
        }
        if let Some(a) = self.alpha_grid.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return bad(format!("alpha_grid entries must lie in (0, 1), got {a}"));
        }
        self.pack_options.bucketing.validate()?;
        for t in &self.variants {
            for &a in t.alphas(&self.alpha_grid) {
                if t.variant != Variant::NoOvercommit && !(a > 0.0 && a < 1.0) {
                    return bad(format!("{}: alpha must lie in (0, 1), got {a}", t.label()));
                }
                for &v in &self.machine_sizes {
                    t.spec(a, v).validate().map_err(|e| Error::Config(format!("{}: {e}", t.label())))?;
                }
            }
        }
        Ok(())
    }
}

/// One packed-and-sampled cell of the sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub variant: String,
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub d_alpha: f64,
    pub machine_size: f64,
    pub replica: usize,
    pub workload_seed: u64,
    pub mc_seed: u64,
    pub machines_used: usize,
    pub baseline_machines: usize,
    pub violation_rate: f64,
    pub max_machine_violation_rate: f64,
    pub ocf: f64,
    pub savings_vs_no_overcommit: f64,
    pub audit_flags: String,
}

/// SplitMix64 finalizer.
pub fn mix_seed(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn workload_seed(base: u64, replica: usize) -> u64 {
    mix_seed(base ^ mix_seed(replica as u64))
}

fn cell_seed(workload_seed: u64, variant: usize, alpha: usize, size: usize) -> u64 {
    mix_seed(workload_seed ^ mix_seed(((variant as u64) << 40) ^ ((alpha as u64) << 20) ^ size as u64))
}

struct Cell {
    replica: usize,
    variant: usize,
    alpha: usize,
    size: usize,
}

fn machines_for(jobs: &[Job], spec: &ConstraintSpec, cfg: &ExperimentConfig) -> Result<(crate::online::Assignment, Vec<crate::capacity::Item>, crate::capacity::CapacityModel)> {
    let model = spec.model()?;
    let items = model.items(jobs);
    let a = pack_items(&items, &model, cfg.algorithm, &cfg.pack_options)?;
    Ok((a, items, model))
}

/// Runs the whole sweep; rows come out ordered by (replica, variant, α, size).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let exec = cfg.execution;
    let workloads: Vec<(u64, Vec<Job>)> = par::map_range(exec, cfg.replicas, |r| {
        let seed = workload_seed(cfg.base_seed, r);
        generate_workload(&WorkloadSpec { seed, ..cfg.workload.clone() }).map(|jobs| (seed, jobs))
    })
    .into_iter()
    .collect::<Result<_>>()?;

    // NoOvercommit machine counts per (replica, size).
    let baselines: Vec<Vec<usize>> = par::map_range(exec, cfg.replicas, |r| {
        cfg.machine_sizes
            .iter()
            .map(|&v| machines_for(&workloads[r].1, &ConstraintSpec::no_overcommit(v), cfg).map(|x| x.0.machine_count()))
            .collect::<Result<Vec<_>>>()
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for replica in 0..cfg.replicas {
        for (variant, t) in cfg.variants.iter().enumerate() {
            for alpha in 0..t.alphas(&cfg.alpha_grid).len() {
                for size in 0..cfg.machine_sizes.len() {
                    cells.push(Cell { replica, variant, alpha, size });
                }
            }
        }
    }

    par::map_slice(exec, &cells, |_, c| {
        let t = &cfg.variants[c.variant];
        let alpha = t.alphas(&cfg.alpha_grid)[c.alpha];
        let v = cfg.machine_sizes[c.size];
        let (wseed, jobs) = &workloads[c.replica];
        let spec = t.spec(alpha, v);
        let (assignment, items, model) = machines_for(jobs, &spec, cfg)?;
        let mc_seed = cell_seed(*wseed, c.variant, c.alpha, c.size);
        // Machines are sampled sequentially here; cells already run in parallel.
        let est = estimate_violations(&assignment, jobs, &spec, cfg.mc_samples, mc_seed, Execution::Sequential)?;
        let audit = audit_run(
            &assignment,
            &items,
            &model,
            &AuditInput {
                algorithm: cfg.algorithm,
                options: Some(&cfg.pack_options),
                oracle_opt: None,
            },
        );
        let baseline = baselines[c.replica][c.size];
        let total_upper: f64 = jobs.iter().map(|j| j.upper()).sum();
        let m = assignment.machine_count();
        let (ocf, savings) = if m > 0 && baseline > 0 {
            let r = overcommit_report(m as u64, baseline as u64, total_upper, v)?;
            (r.ocf_alpha, r.savings)
        } else {
            (0.0, 0.0)
        };
        Ok(ExperimentRow {
            variant: t.label(),
            algorithm: cfg.algorithm,
            alpha,
            d_alpha: model.d,
            machine_size: v,
            replica: c.replica,
            workload_seed: *wseed,
            mc_seed,
            machines_used: m,
            baseline_machines: baseline,
            violation_rate: est.aggregate_rate,
            max_machine_violation_rate: est.max_rate(),
            ocf,
            savings_vs_no_overcommit: savings,
            audit_flags: audit.flags(),
        })
    })
    .into_iter()
    .collect()
}

pub fn write_csv<W: std::io::Write>(rows: &[ExperimentRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(rows: &[ExperimentRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<ExperimentRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// Machines needed at risk `target`, read off the lower-left frontier of
/// `(risk, machines)` points by linear interpolation.
pub fn interpolate_machines(points: &[(f64, f64)], target: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut frontier: Vec<(f64, f64)> = Vec::new();
    for p in pts {
        if frontier.last().is_none_or(|l| p.1 < l.1) {
            if frontier.last().is_some_and(|l| l.0 == p.0) {
                frontier.pop();
            }
            frontier.push(p);
        }
    }
    let first = frontier.first()?;
    if target < first.0 {
        return None;
    }
    for w in frontier.windows(2) {
        let (a, b) = (w[0], w[1]);
        if target < b.0 {
            return Some(a.1 + (b.1 - a.1) * (target - a.0) / (b.0 - a.0));
        }
    }
    frontier.last().map(|l| l.1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variant: String,
    pub machine_size: f64,
    pub target_risk: f64,
    pub baseline_machines: f64,
    pub machines: f64,
    /// Percent.
    pub savings: f64,
}

type Sums = (f64, f64, f64);

/// Average curves per (variant, size), then savings at each target risk.
///
/// Machine counts and violation rates are averaged over replicas for every
/// α; the NoOvercommit average is added as the zero-risk anchor.
pub fn summarize(rows: &[ExperimentRow], targets: &[f64]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no rows to summarize".into()));
    }
    // (variant, size bits) -> alpha bits -> (machines, risk, count)
    let mut curves: BTreeMap<(String, u64), BTreeMap<u64, Sums>> = BTreeMap::new();
    let mut baseline: BTreeMap<u64, BTreeMap<usize, usize>> = BTreeMap::new();
    let mut order: Vec<(String, u64)> = Vec::new();
    for r in rows {
        let key = (r.variant.clone(), r.machine_size.to_bits());
        if !curves.contains_key(&key) {
            order.push(key.clone());
        }
        let e = curves.entry(key).or_default().entry(r.alpha.to_bits()).or_insert((0.0, 0.0, 0.0));
        e.0 += r.machines_used as f64;
        e.1 += r.violation_rate;
        e.2 += 1.0;
        baseline.entry(r.machine_size.to_bits()).or_default().insert(r.replica, r.baseline_machines);
    }
    let mut out = Vec::new();
    for key in order {
        let size_bits = key.1;
        let base = &baseline[&size_bits];
        let b1 = base.values().sum::<usize>() as f64 / base.len() as f64;
        let mut pts: Vec<(f64, f64)> = vec![(0.0, b1)];
        pts.extend(curves[&key].values().map(|&(m, risk, n)| (risk / n, m / n)));
        for &t in targets {
            let m = interpolate_machines(&pts, t).unwrap_or(b1);
            out.push(SummaryRow {
                variant: key.0.clone(),
                machine_size: f64::from_bits(size_bits),
                target_risk: t,
                baseline_machines: b1,
                machines: m,
                savings: 100.0 * (1.0 - m / b1),
            });
        }
    }
    Ok(out)
}

/// Savings (fraction) of one replica's curve at `target`.
pub fn replica_savings(rows: &[ExperimentRow], variant: &str, machine_size: f64, replica: usize, target: f64) -> Option<f64> {
    let sel: Vec<&ExperimentRow> = rows
        .iter()
        .filter(|r| r.variant == variant && r.machine_size == machine_size && r.replica == replica)
        .collect();
    let b1 = sel.first()?.baseline_machines as f64;
    let mut pts = vec![(0.0, b1)];
    pts.extend(sel.iter().map(|r| (r.violation_rate, r.machines_used as f64)));
    interpolate_machines(&pts, target).map(|m| 1.0 - m / b1)
}

pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut s = format!(
        "{:<36} {:>6} {:>8} {:>10} {:>10} {:>9}\n",
        "variant", "size", "risk", "baseline", "machines", "savings%"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<36} {:>6} {:>8} {:>10.2} {:>10.2} {:>9.2}\n",
            r.variant, r.machine_size, r.target_risk, r.baseline_machines, r.machines, r.savings
        ));
    }
    s
}
