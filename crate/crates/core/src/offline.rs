//! Offline packing: Local-Search and the exact subset-DP oracle.

use crate::capacity::{CapacityModel, ConstraintSpec, Item, LoadSummary};
use crate::error::{Error, Result};
use crate::online::{first_fit_items, Assignment};
use crate::workload::Job;

/// Number of single-job machines a job must fit to count as good.
pub const GOOD_THRESHOLD: usize = 6;

/// Default job-count cap of [`exact_optimal`].
pub const DEFAULT_ORACLE_CAP: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MachineCategory {
    /// Exactly one job.
    SingleJob,
    /// 2 to 4 jobs, at most one of them not good.
    MediumOneNonGood,
    /// 2 to 4 jobs, two or more not good.
    MediumManyNonGood,
    /// 5 or more jobs.
    Large,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalSearchOutcome {
    pub assignment: Assignment,
    /// Successful update operations.
    pub operations: usize,
}

struct State<'a> {
    items: &'a [Item],
    model: &'a CapacityModel,
    groups: Vec<Vec<usize>>,
    loads: Vec<LoadSummary>,
}

impl<'a> State<'a> {
    fn load_of(&self, jobs: &[usize]) -> LoadSummary {
        LoadSummary::of(jobs.iter().map(|&j| &self.items[j]))
    }

    fn refresh(&mut self, m: usize) {
        self.groups[m].sort_unstable();
        self.loads[m] = self.load_of(&self.groups[m]);
    }

    fn drop_empty(&mut self) {
        let mut k = 0;
        while k < self.groups.len() {
            if self.groups[k].is_empty() {
                self.groups.remove(k);
                self.loads.remove(k);
            } else {
                k += 1;
            }
        }
    }

    fn fits(&self, m: usize, j: usize) -> bool {
        self.model.fits(&self.loads[m], &self.items[j])
    }

    fn single_job_machines(&self) -> Vec<usize> {
        (0..self.groups.len()).filter(|&m| self.groups[m].len() == 1).collect()
    }

    fn a1_fits(&self, j: usize, a1: &[usize]) -> usize {
        a1.iter().filter(|&&m| self.fits(m, j)).count()
    }

    /// Move one job to a lower-id machine.
    fn op_move_lower(&mut self) -> bool {
        for i in (1..self.groups.len()).rev() {
            for pos in 0..self.groups[i].len() {
                let j = self.groups[i][pos];
                if let Some(t) = (0..i).find(|&t| self.fits(t, j)) {
                    self.groups[i].remove(pos);
                    self.groups[t].push(j);
                    self.refresh(i);
                    self.refresh(t);
                    self.drop_empty();
                    return true;
                }
            }
        }
        false
    }

    /// Sends `jobs` to pairwise distinct machines of `a1`, lowest id first.
    fn scatter(&self, jobs: &[usize], a1: &[usize]) -> Option<Vec<(usize, usize)>> {
        let mut used: Vec<usize> = Vec::with_capacity(jobs.len());
        let mut plan = Vec::with_capacity(jobs.len());
        for &j in jobs {
            let t = a1.iter().copied().find(|m| !used.contains(m) && self.fits(*m, j))?;
            used.push(t);
            plan.push((j, t));
        }
        Some(plan)
    }

    fn apply(&mut self, plan: &[(usize, usize)], release: &[usize]) {
        for &(j, t) in plan {
            self.groups[t].push(j);
        }
        for &(_, t) in plan {
            self.refresh(t);
        }
        for &m in release {
            self.groups[m].clear();
        }
        self.drop_empty();
    }

    /// Evacuate a medium machine: either all its jobs are good, or exactly
    /// one is not good and that one fits some single-job machine.
    fn op_evacuate(&mut self, allow_one_placeable: bool) -> bool {
        let a1 = self.single_job_machines();
        if a1.is_empty() {
            return false;
        }
        for i in 0..self.groups.len() {
            let n = self.groups[i].len();
            if !(2..=4).contains(&n) {
                continue;
            }
            let mut non_good = Vec::new();
            let mut good = Vec::new();
            for &j in &self.groups[i] {
                let k = self.a1_fits(j, &a1);
                if k >= GOOD_THRESHOLD {
                    good.push(j);
                } else {
                    non_good.push((j, k));
                }
            }
            let order: Vec<usize> = match (allow_one_placeable, non_good.as_slice()) {
                (false, []) => good,
                (true, [(j, k)]) if *k >= 1 => std::iter::once(*j).chain(good).collect(),
                _ => continue,
            };
            if let Some(plan) = self.scatter(&order, &a1) {
                self.apply(&plan, &[i]);
                return true;
            }
        }
        false
    }

    /// Merge the stuck jobs of two critical machines onto a fresh machine.
    fn op_merge_critical(&mut self) -> bool {
        let a1 = self.single_job_machines();
        if a1.is_empty() {
            return false;
        }
        // (machine, stuck job, good jobs)
        let mut critical: Vec<(usize, usize, Vec<usize>)> = Vec::new();
        for i in 0..self.groups.len() {
            if !(2..=4).contains(&self.groups[i].len()) {
                continue;
            }
            let mut stuck = Vec::new();
            let mut good = Vec::new();
            let mut other = false;
            for &j in &self.groups[i] {
                match self.a1_fits(j, &a1) {
                    0 => stuck.push(j),
                    k if k >= GOOD_THRESHOLD => good.push(j),
                    _ => other = true,
                }
            }
            if !other && stuck.len() == 1 {
                critical.push((i, stuck[0], good));
            }
        }
        for x in 0..critical.len() {
            for y in (x + 1)..critical.len() {
                let (i1, j1, ref g1) = critical[x];
                let (i2, j2, ref g2) = critical[y];
                let mut pair = vec![j1, j2];
                pair.sort_unstable();
                if !self.model.is_feasible(&self.load_of(&pair)) {
                    continue;
                }
                let rest: Vec<usize> = g1.iter().chain(g2).copied().collect();
                if let Some(plan) = self.scatter(&rest, &a1) {
                    self.groups.push(pair);
                    self.loads.push(LoadSummary::default());
                    let fresh = self.groups.len() - 1;
                    self.refresh(fresh);
                    self.apply(&plan, &[i1, i2]);
                    return true;
                }
            }
        }
        false
    }

    fn step(&mut self) -> bool {
        self.op_move_lower() || self.op_evacuate(false) || self.op_evacuate(true) || self.op_merge_critical()
    }
}

/// Runs Local-Search from `initial` until no update operation applies.
pub fn local_search_items(initial: &Assignment, items: &[Item], model: &CapacityModel) -> Result<LocalSearchOutcome> {
    initial.validate(items, model)?;
    let mut state = State {
        items,
        model,
        groups: initial.groups(),
        loads: Vec::new(),
    };
    state.loads = vec![LoadSummary::default(); state.groups.len()];
    for m in 0..state.groups.len() {
        state.refresh(m);
    }
    let limit = items.len().pow(3);
    let mut operations = 0;
    while state.step() {
        operations += 1;
        debug_assert!(state.groups.iter().zip(&state.loads).all(|(g, l)| !g.is_empty() && model.is_feasible(l)));
        assert!(operations <= limit, "local search exceeded N^3 operations");
    }
    Ok(LocalSearchOutcome {
        assignment: Assignment::from_groups(state.groups, items),
        operations,
    })
}

/// Local-Search started from a First-Fit packing.
pub fn local_search(jobs: &[Job], spec: &ConstraintSpec) -> Result<LocalSearchOutcome> {
    let model = spec.model()?;
    let items = model.items(jobs);
    let initial = first_fit_items(&items, &model)?;
    local_search_items(&initial, &items, &model)
}

/// Categories of every machine, for a final Local-Search assignment.
pub fn categorize(assignment: &Assignment, items: &[Item], model: &CapacityModel) -> Vec<MachineCategory> {
    let a1: Vec<&LoadSummary> = assignment
        .machines
        .iter()
        .filter(|m| m.jobs.len() == 1)
        .map(|m| &m.load)
        .collect();
    let good = |j: usize| a1.iter().filter(|l| model.fits(l, &items[j])).count() >= GOOD_THRESHOLD;
    assignment
        .machines
        .iter()
        .map(|m| match m.jobs.len() {
            1 => MachineCategory::SingleJob,
            2..=4 if m.jobs.iter().filter(|&&j| !good(j)).count() <= 1 => MachineCategory::MediumOneNonGood,
            2..=4 => MachineCategory::MediumManyNonGood,
            _ => MachineCategory::Large,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactSolution {
    pub count: usize,
    pub assignment: Assignment,
}

/// Minimum machine count by dynamic programming over job subsets.
pub fn exact_optimal_items(items: &[Item], model: &CapacityModel, cap: usize) -> Result<ExactSolution> {
    let n = items.len();
    if n > cap || n >= usize::BITS as usize {
        return Err(Error::InstanceTooLarge { jobs: n, cap });
    }
    for it in items {
        if !model.fits(&LoadSummary::default(), it) {
            return Err(Error::OversizedJob {
                id: it.id,
                capacity: model.capacity,
            });
        }
    }
    let full = (1usize << n) - 1;
    // Sums run in increasing job order, as in every packer.
    let mut loads = vec![LoadSummary::default(); full + 1];
    let mut feasible = vec![false; full + 1];
    feasible[0] = true;
    for mask in 1..=full {
        let high = usize::BITS - 1 - mask.leading_zeros();
        let rest = mask ^ (1 << high);
        loads[mask] = loads[rest].with(&items[high as usize]);
        feasible[mask] = feasible[rest] && model.is_feasible(&loads[mask]);
    }
    let mut best = vec![usize::MAX; full + 1];
    let mut choice = vec![0usize; full + 1];
    best[0] = 0;
    for mask in 1..=full {
        let low = mask & mask.wrapping_neg();
        let others = mask ^ low;
        // Enumerate subsets of `others`, each joined with the lowest job.
        let mut sub = others;
        loop {
            let part = sub | low;
            if feasible[part] {
                let cand = best[mask ^ part].saturating_add(1);
                if cand < best[mask] {
                    best[mask] = cand;
                    choice[mask] = part;
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & others;
        }
    }
    let mut groups = Vec::new();
    let mut mask = full;
    while mask != 0 {
        let part = choice[mask];
        groups.push((0..n).filter(|&j| part >> j & 1 == 1).collect::<Vec<_>>());
        mask ^= part;
    }
    groups.sort();
    Ok(ExactSolution {
        count: best[full],
        assignment: Assignment::from_groups(groups, items),
    })
}

pub fn exact_optimal(jobs: &[Job], spec: &ConstraintSpec, cap: usize) -> Result<ExactSolution> {
    let model = spec.model()?;
    exact_optimal_items(&model.items(jobs), &model, cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::Variant;
    use crate::online::best_fit_items;
    use crate::workload::UsageDistribution;
    use proptest::prelude::*;

    fn theory_items(raw: &[(f64, f64)]) -> Vec<Item> {
        raw.iter()
            .enumerate()
            .map(|(i, &(m, b))| Item::abstract_item(i as u64, m, b))
            .collect()
    }

    fn singletons(n: usize, items: &[Item]) -> Assignment {
        Assignment::from_groups((0..n).map(|j| vec![j]).collect(), items)
    }

    #[test]
    fn single_machine_is_left_alone() {
        let model = CapacityModel::normalized();
        let items = theory_items(&[(0.1, 0.0), (0.2, 0.0)]);
        let init = first_fit_items(&items, &model).unwrap();
        let out = local_search_items(&init, &items, &model).unwrap();
        assert_eq!(out.assignment, init);
        assert_eq!(out.operations, 0);
    }

    #[test]
    fn tiny_singletons_collapse() {
        let model = CapacityModel::normalized();
        let items = theory_items(&[(0.1, 0.01); 4]);
        let out = local_search_items(&singletons(4, &items), &items, &model).unwrap();
        assert!(out.assignment.machine_count() <= 2);
        assert_eq!(out.assignment.machine_count(), 1);
    }

    #[test]
    fn evacuation_of_all_good_medium_machine() {
        let model = CapacityModel::normalized();
        // Six single-job machines at 0.5, one machine holding two 0.3 jobs
        // that cannot join each other's machine once 0.5 jobs come first.
        let mut raw = vec![(0.5, 0.0); 6];
        raw.push((0.3, 0.0));
        raw.push((0.3, 0.0));
        let items = theory_items(&raw);
        let groups: Vec<Vec<usize>> = vec![vec![6, 7], vec![0], vec![1], vec![2], vec![3], vec![4], vec![5]];
        let init = Assignment::from_groups(groups, &items);
        let out = local_search_items(&init, &items, &model).unwrap();
        assert!(out.assignment.machine_count() < 7);
        out.assignment.validate(&items, &model).unwrap();
    }

    #[test]
    fn infeasible_initial_is_rejected() {
        let model = CapacityModel::normalized();
        let items = theory_items(&[(0.6, 0.0), (0.6, 0.0)]);
        let bad = Assignment::from_groups(vec![vec![0, 1]], &items);
        assert!(matches!(
            local_search_items(&bad, &items, &model),
            Err(Error::InfeasibleAssignment { .. })
        ));
    }

    #[test]
    fn oracle_basics() {
        let model = CapacityModel::normalized();
        let one = theory_items(&[(0.4, 0.1)]);
        assert_eq!(exact_optimal_items(&one, &model, 12).unwrap().count, 1);
        let two = theory_items(&[(0.6, 0.0), (0.5, 0.0)]);
        assert_eq!(exact_optimal_items(&two, &model, 12).unwrap().count, 2);
        let empty: Vec<Item> = Vec::new();
        assert_eq!(exact_optimal_items(&empty, &model, 12).unwrap().count, 0);
        let many = theory_items(&[(0.01, 0.0); 13]);
        assert!(matches!(
            exact_optimal_items(&many, &model, 12),
            Err(Error::InstanceTooLarge { jobs: 13, cap: 12 })
        ));
    }

    #[test]
    fn oracle_small_two_point_instance() {
        // Seven symmetric two-point jobs on [0.3, 1.0]: V = 6.75 holds all
        // seven under the Gaussian buffer at 0.99 but only six when reserving Ā.
        let jobs: Vec<Job> = (0..7)
            .map(|i| Job::new(i, 1.0, UsageDistribution::two_point(0.3, 1.0, 0.65).unwrap()).unwrap())
            .collect();
        let gauss = ConstraintSpec::new(Variant::Gaussian, 0.99, 6.75);
        let none = ConstraintSpec::no_overcommit(6.75);
        let g = exact_optimal(&jobs, &gauss, 12).unwrap();
        let n = exact_optimal(&jobs, &none, 12).unwrap();
        assert_eq!((g.count, n.count), (1, 2));
        let gm = gauss.model().unwrap();
        let items = gm.items(&jobs);
        assert!(gm.is_feasible(&LoadSummary::of(&items)));
        g.assignment.validate(&items, &gm).unwrap();
        let nm = none.model().unwrap();
        n.assignment.validate(&nm.items(&jobs), &nm).unwrap();
    }

    fn arb_theory(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0.0f64..0.6, 0.0f64..0.16), 0..=max)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn local_search_improves_and_stays_feasible(raw in arb_theory(40)) {
            let model = CapacityModel::normalized();
            let items = theory_items(&raw);
            for init in [first_fit_items(&items, &model).unwrap(), singletons(items.len(), &items)] {
                let out = local_search_items(&init, &items, &model).unwrap();
                prop_assert!(out.assignment.machine_count() <= init.machine_count());
                prop_assert!(out.operations <= items.len().pow(3));
                prop_assert!(out.assignment.validate(&items, &model).is_ok());
            }
        }

        #[test]
        fn oracle_is_a_lower_bound(raw in arb_theory(10)) {
            let model = CapacityModel::normalized();
            let items = theory_items(&raw);
            let opt = exact_optimal_items(&items, &model, 12).unwrap();
            prop_assert!(opt.assignment.validate(&items, &model).is_ok());
            prop_assert_eq!(opt.assignment.machine_count(), opt.count);
            let ff = first_fit_items(&items, &model).unwrap();
            prop_assert!(opt.count <= ff.machine_count());
            prop_assert!(opt.count <= best_fit_items(&items, &model).unwrap().machine_count());
            prop_assert!(opt.count <= local_search_items(&ff, &items, &model).unwrap().assignment.machine_count());
        }

        #[test]
        fn oracle_is_permutation_invariant(raw in arb_theory(9), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let model = CapacityModel::normalized();
            let mut shuffled = raw.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = exact_optimal_items(&theory_items(&raw), &model, 12).unwrap().count;
            let b = exact_optimal_items(&theory_items(&shuffled), &model, 12).unwrap().count;
            prop_assert_eq!(a, b);
        }
    }
}
