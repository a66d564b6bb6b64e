//! Online packers: jobs arrive in sequence and are placed immediately.
//!
//! All packers work on [`Item`]s in arrival order; job positions in the input
//! slice are the job handles stored in [`Machine::jobs`].

use crate::capacity::{CapacityModel, ConstraintSpec, Item, LoadSummary};
use crate::error::{Error, Result};
use crate::workload::Job;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq)]
pub struct Machine {
    /// Purchase order, equal to the machine's index in [`Assignment::machines`].
    pub id: usize,
    pub load: LoadSummary,
    /// Positions of the hosted jobs in the input sequence, in arrival order.
    pub jobs: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Assignment {
    pub machines: Vec<Machine>,
    /// Machine id of every job position.
    pub job_to_machine: Vec<usize>,
}

impl Assignment {
    pub fn machine_count(&self) -> usize {
        self.machines.len()
    }

    /// Builds an assignment from job groups, dropping empty groups and
    /// renumbering machines in the given order.
    pub fn from_groups(groups: Vec<Vec<usize>>, items: &[Item]) -> Self {
        let mut a = Assignment {
            machines: Vec::with_capacity(groups.len()),
            job_to_machine: vec![usize::MAX; items.len()],
        };
        for mut jobs in groups.into_iter().filter(|g| !g.is_empty()) {
            jobs.sort_unstable();
            let id = a.machines.len();
            for &j in &jobs {
                a.job_to_machine[j] = id;
            }
            a.machines.push(Machine {
                id,
                load: LoadSummary::of(jobs.iter().map(|&j| &items[j])),
                jobs,
            });
        }
        a
    }

    /// Job groups, one per machine.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        self.machines.iter().map(|m| m.jobs.clone()).collect()
    }

    /// Checks the partition and feasibility invariants against fresh sums.
    pub fn validate(&self, items: &[Item], model: &CapacityModel) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidArgument(msg));
        if self.job_to_machine.len() != items.len() {
            return invalid(format!(
                "assignment covers {} jobs, expected {}",
                self.job_to_machine.len(),
                items.len()
            ));
        }
        let mut seen = vec![false; items.len()];
        for (i, m) in self.machines.iter().enumerate() {
            if m.id != i {
                return invalid(format!("machine at index {i} has id {}", m.id));
            }
            if m.jobs.is_empty() {
                return invalid(format!("machine {i} is empty"));
            }
            for &j in &m.jobs {
                if j >= items.len() || seen[j] || self.job_to_machine[j] != i {
                    return invalid(format!("job {j} is not assigned exactly once to machine {i}"));
                }
                seen[j] = true;
            }
            let load = LoadSummary::of(m.jobs.iter().map(|&j| &items[j]));
            if !model.is_feasible(&load) {
                return Err(Error::InfeasibleAssignment {
                    machine: i,
                    load: model.effective_load(&load),
                    capacity: model.capacity,
                });
            }
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return invalid(format!("job {j} is unassigned"));
        }
        Ok(())
    }
}

/// Routes jobs by their dispersion ratio `r = b/μ`.
///
/// Bucket `k` holds ratios in `[boundaries[k-1], boundaries[k])` with
/// implicit outer bounds `0` and `∞`. Jobs with `μ = 0` get a bucket of their
/// own whenever at least one boundary is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BucketingPolicy {
    pub boundaries: Vec<f64>,
}

impl Default for BucketingPolicy {
    fn default() -> Self {
        Self::geometric(2f64.powi(-10), 2f64.powi(10), 2.0)
    }
}

impl BucketingPolicy {
    /// A single bucket `[0, ∞)`.
    pub fn single() -> Self {
        BucketingPolicy { boundaries: Vec::new() }
    }

    /// Boundaries `lo, lo·ratio, lo·ratio², …` up to `hi`.
    pub fn geometric(lo: f64, hi: f64, ratio: f64) -> Self {
        let mut boundaries = Vec::new();
        let mut x = lo;
        while x <= hi * (1.0 + 1e-12) {
            boundaries.push(x);
            x *= ratio;
        }
        BucketingPolicy { boundaries }
    }

    pub fn validate(&self) -> Result<()> {
        if self.boundaries.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::InvalidArgument("bucket boundaries must be positive and finite".into()));
        }
        if self.boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("bucket boundaries must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn bucket_count(&self) -> usize {
        if self.boundaries.is_empty() {
            1
        } else {
            self.boundaries.len() + 2
        }
    }

    pub fn bucket_of(&self, item: &Item) -> usize {
        if self.boundaries.is_empty() {
            return 0;
        }
        if item.mean == 0.0 {
            return self.boundaries.len() + 1;
        }
        let r = item.b / item.mean;
        self.boundaries.partition_point(|&x| x <= r)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    FirstFit,
    #[default]
    BestFit,
    NextFit,
    Bucketed,
    LocalSearch,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::FirstFit,
        Algorithm::BestFit,
        Algorithm::NextFit,
        Algorithm::Bucketed,
        Algorithm::LocalSearch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::FirstFit => "first-fit",
            Algorithm::BestFit => "best-fit",
            Algorithm::NextFit => "next-fit",
            Algorithm::Bucketed => "bucketed",
            Algorithm::LocalSearch => "local-search",
        }
    }

    /// Lazy packers buy a machine only when nothing open fits.
    pub fn is_lazy(self) -> bool {
        matches!(self, Algorithm::FirstFit | Algorithm::BestFit)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackOptions {
    #[serde(default)]
    pub bucketing: BucketingPolicy,
    /// Only the most recently purchased `shard_size` machines of a pool are
    /// candidates. Packers stop being lazy when this is set.
    #[serde(default)]
    pub shard_size: Option<usize>,
}

#[derive(Clone, Copy, PartialEq)]
enum Rule {
    First,
    Best,
    Next,
}

/// Incremental packing state shared by every online rule.
struct Packer<'a> {
    items: &'a [Item],
    model: &'a CapacityModel,
    out: Assignment,
}

impl<'a> Packer<'a> {
    fn new(items: &'a [Item], model: &'a CapacityModel) -> Self {
        Packer {
            items,
            model,
            out: Assignment {
                machines: Vec::new(),
                job_to_machine: vec![usize::MAX; items.len()],
            },
        }
    }

    fn check_singleton(&self, j: usize) -> Result<()> {
        let it = &self.items[j];
        if self.model.fits(&LoadSummary::default(), it) {
            Ok(())
        } else {
            Err(Error::OversizedJob {
                id: it.id,
                capacity: self.model.capacity,
            })
        }
    }

    /// Picks a machine among `candidates` (ascending ids) or returns `None`.
    fn choose(&self, rule: Rule, candidates: &[usize], j: usize) -> Option<usize> {
        let it = &self.items[j];
        match rule {
            Rule::First => candidates
                .iter()
                .copied()
                .find(|&m| self.model.fits(&self.out.machines[m].load, it)),
            Rule::Next => candidates
                .last()
                .copied()
                .filter(|&m| self.model.fits(&self.out.machines[m].load, it)),
            Rule::Best => {
                let mut best: Option<(usize, f64)> = None;
                for &m in candidates {
                    let load = &self.out.machines[m].load;
                    if self.model.fits(load, it) {
                        let slack = self.model.slack(load);
                        if best.is_none_or(|(_, s)| slack < s) {
                            best = Some((m, slack));
                        }
                    }
                }
                best.map(|(m, _)| m)
            }
        }
    }

    fn place(&mut self, j: usize, m: usize) {
        let machine = &mut self.out.machines[m];
        machine.load.add(&self.items[j]);
        machine.jobs.push(j);
        self.out.job_to_machine[j] = m;
        debug_assert!(self.model.is_feasible(&machine.load));
    }

    fn open(&mut self, j: usize) -> usize {
        let id = self.out.machines.len();
        self.out.machines.push(Machine {
            id,
            load: LoadSummary::default(),
            jobs: Vec::new(),
        });
        self.place(j, id);
        id
    }

    /// Packs every job into pools chosen by `pool_of`.
    fn run(mut self, rule: Rule, pools: usize, pool_of: impl Fn(&Item) -> usize, shard: Option<usize>) -> Result<Assignment> {
        let mut pool_machines: Vec<Vec<usize>> = vec![Vec::new(); pools];
        for j in 0..self.items.len() {
            self.check_singleton(j)?;
            let pool = &mut pool_machines[pool_of(&self.items[j])];
            let start = shard.map_or(0, |s| pool.len().saturating_sub(s.max(1)));
            match self.choose(rule, &pool[start..], j) {
                Some(m) => self.place(j, m),
                None => {
                    let m = self.open(j);
                    pool.push(m);
                }
            }
        }
        Ok(self.out)
    }
}

pub fn first_fit_items(items: &[Item], model: &CapacityModel) -> Result<Assignment> {
    Packer::new(items, model).run(Rule::First, 1, |_| 0, None)
}

pub fn best_fit_items(items: &[Item], model: &CapacityModel) -> Result<Assignment> {
    Packer::new(items, model).run(Rule::Best, 1, |_| 0, None)
}

pub fn next_fit_items(items: &[Item], model: &CapacityModel) -> Result<Assignment> {
    Packer::new(items, model).run(Rule::Next, 1, |_| 0, None)
}

/// First-Fit inside private per-bucket machine pools.
pub fn bucketed_fit_items(items: &[Item], model: &CapacityModel, policy: &BucketingPolicy) -> Result<Assignment> {
    policy.validate()?;
    Packer::new(items, model).run(Rule::First, policy.bucket_count(), |it| policy.bucket_of(it), None)
}

/// Dispatches to any packer in the suite.
pub fn pack_items(items: &[Item], model: &CapacityModel, algorithm: Algorithm, opts: &PackOptions) -> Result<Assignment> {
    let packer = Packer::new(items, model);
    let shard = opts.shard_size;
    match algorithm {
        Algorithm::FirstFit => packer.run(Rule::First, 1, |_| 0, shard),
        Algorithm::BestFit => packer.run(Rule::Best, 1, |_| 0, shard),
        Algorithm::NextFit => packer.run(Rule::Next, 1, |_| 0, None),
        Algorithm::Bucketed => {
            opts.bucketing.validate()?;
            let policy = &opts.bucketing;
            packer.run(Rule::First, policy.bucket_count(), |it| policy.bucket_of(it), shard)
        }
        Algorithm::LocalSearch => {
            let initial = packer.run(Rule::First, 1, |_| 0, shard)?;
            Ok(crate::offline::local_search_items(&initial, items, model)?.assignment)
        }
    }
}

pub fn first_fit(jobs: &[Job], spec: &ConstraintSpec) -> Result<Assignment> {
    let model = spec.model()?;
    first_fit_items(&model.items(jobs), &model)
}

pub fn best_fit(jobs: &[Job], spec: &ConstraintSpec) -> Result<Assignment> {
    let model = spec.model()?;
    best_fit_items(&model.items(jobs), &model)
}

pub fn next_fit(jobs: &[Job], spec: &ConstraintSpec) -> Result<Assignment> {
    let model = spec.model()?;
    next_fit_items(&model.items(jobs), &model)
}

pub fn bucketed_fit(jobs: &[Job], spec: &ConstraintSpec, policy: &BucketingPolicy) -> Result<Assignment> {
    let model = spec.model()?;
    bucketed_fit_items(&model.items(jobs), &model, policy)
}

pub fn pack(jobs: &[Job], spec: &ConstraintSpec, algorithm: Algorithm, opts: &PackOptions) -> Result<Assignment> {
    let model = spec.model()?;
    pack_items(&model.items(jobs), &model, algorithm, opts)
}

/// Machines whose first job would have fit some machine open at its arrival.
///
/// Replays history from the assignment alone: the load of an older machine
/// at time `t` is the sum of its jobs with positions below `t`.
pub fn laziness_violations(assignment: &Assignment, items: &[Item], model: &CapacityModel) -> Vec<usize> {
    let firsts: Vec<usize> = assignment
        .machines
        .iter()
        .map(|m| m.jobs.iter().copied().min().unwrap_or(usize::MAX))
        .collect();
    let mut bad = Vec::new();
    for (i, &f) in firsts.iter().enumerate() {
        let item = &items[f];
        let fits_earlier = assignment.machines.iter().enumerate().any(|(k, m)| {
            firsts[k] < f && {
                let load = LoadSummary::of(m.jobs.iter().filter(|&&j| j < f).map(|&j| &items[j]));
                model.fits(&load, item)
            }
        });
        if fits_earlier {
            bad.push(i);
        }
    }
    bad
}
