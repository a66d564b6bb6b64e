//! Planning when jobs fall into a few statistical classes.
//!
//! Every closed form here is only a starting guess: the returned integers
//! come from direct evaluation of the capacity model, so they always agree
//! with [`CapacityModel::is_feasible`].

use crate::capacity::{CapacityModel, ConstraintSpec, Item, LoadSummary, Shape};
use crate::error::{Error, Result};
use std::collections::HashMap;

/// Default bound on the number of classes [`solve_cutting_stock`] accepts.
pub const MAX_CLASSES: usize = 4;

/// A group of statistically identical jobs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JobClass {
    pub mu: f64,
    pub b: f64,
    /// `Ā` of one job; infinite when the class has no upper bound.
    pub upper: f64,
    pub count: u64,
}

impl JobClass {
    pub fn new(mu: f64, b: f64) -> Self {
        JobClass {
            mu,
            b,
            upper: f64::INFINITY,
            count: 0,
        }
    }

    pub fn with_upper(mut self, upper: f64) -> Self {
        self.upper = upper;
        self
    }

    pub fn with_count(mut self, count: u64) -> Self {
        self.count = count;
        self
    }

    fn item(&self, id: usize) -> Item {
        Item {
            id: id as u64,
            mean: self.mu,
            b: self.b,
            sqrt_b: self.b.sqrt(),
            upper: self.upper,
        }
    }

    fn validate(&self, k: usize) -> Result<()> {
        if !(self.mu >= 0.0 && self.b >= 0.0 && self.mu.is_finite() && self.b.is_finite()) || self.upper.is_nan() {
            return Err(Error::InvalidArgument(format!("class {k} has invalid parameters {self:?}")));
        }
        Ok(())
    }
}

/// Load of a machine holding `counts[k]` jobs of class `k`, summed class by class.
pub fn pattern_load(classes: &[JobClass], counts: &[u64]) -> LoadSummary {
    let mut load = LoadSummary::default();
    for (k, (c, &n)) in classes.iter().zip(counts).enumerate() {
        let it = c.item(k);
        for _ in 0..n {
            load.add(&it);
        }
    }
    load
}

/// Real root `n(α)` of `nμ + D√(nb) = V`.
pub fn identical_jobs_root(mu: f64, b: f64, d: f64, v: f64) -> f64 {
    if b == 0.0 || d == 0.0 {
        return v / mu;
    }
    let bd2 = b * d * d;
    v / mu + (bd2 - (bd2 * bd2 + 4.0 * bd2 * v * mu).sqrt()) / (2.0 * mu * mu)
}

/// Largest `n` with `feasible(n)`, searched outward from `guess`.
/// `feasible` must be monotone; `None` when even `0` fails.
fn largest_feasible(guess: f64, limit: u64, feasible: impl Fn(u64) -> bool) -> Option<u64> {
    if !feasible(0) {
        return None;
    }
    let mut lo = if guess.is_finite() && guess > 0.0 {
        (guess.floor() as u64).min(limit)
    } else {
        0
    };
    if !feasible(lo) {
        // Gallop down to a feasible point.
        let mut step = 1;
        let mut hi = lo;
        loop {
            let next = lo.saturating_sub(step);
            if feasible(next) {
                lo = next;
                break;
            }
            hi = next;
            step *= 2;
        }
        return Some(bisect(lo, hi, &feasible));
    }
    let mut step = 1;
    loop {
        let next = lo.saturating_add(step).min(limit);
        if next == lo {
            return Some(lo);
        }
        if !feasible(next) {
            return Some(bisect(lo, next, &feasible));
        }
        lo = next;
        step *= 2;
    }
}

/// With `feasible(lo)` and `!feasible(hi)`, the last feasible integer.
fn bisect(mut lo: u64, mut hi: u64, feasible: &impl Fn(u64) -> bool) -> u64 {
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Upper limit on jobs per machine; guards classes with `μ = 0`.
const JOB_LIMIT: u64 = 1 << 24;

fn guess_identical(model: &CapacityModel, c: &JobClass) -> f64 {
    let v = model.capacity;
    let g = match model.shape {
        Shape::Upper => v / c.upper,
        Shape::Power(0.5) => identical_jobs_root(c.mu, c.b, model.d, v),
        Shape::Linear => v / (c.mu + model.d * c.b.sqrt()),
        Shape::Power(_) | Shape::Log => v / c.mu,
    };
    if model.clip {
        g.max(v / c.upper)
    } else {
        g
    }
}

/// Largest `n` such that `n` copies of the class fit one machine.
pub fn max_identical_jobs_model(class: &JobClass, model: &CapacityModel) -> Result<u64> {
    class.validate(0)?;
    let feasible = |n: u64| model.is_feasible(&pattern_load(std::slice::from_ref(class), &[n]));
    if feasible(JOB_LIMIT) {
        return Err(Error::InvalidArgument(format!(
            "class {class:?} fits without limit on one machine"
        )));
    }
    Ok(largest_feasible(guess_identical(model, class), JOB_LIMIT, feasible).unwrap_or(0))
}

pub fn max_identical_jobs(class: &JobClass, spec: &ConstraintSpec) -> Result<u64> {
    max_identical_jobs_model(class, &spec.model()?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrontierPoint {
    pub n2: u64,
    /// `None` when `n2` class-2 jobs alone already overflow a machine.
    pub max_n1: Option<u64>,
}

/// Real root in `n₁` of `n₁μ₁ + n₂μ₂ + D√(n₁b₁ + n₂b₂) = V`.
pub fn two_class_root(c1: &JobClass, c2: &JobClass, n2: f64, d: f64, v: f64) -> f64 {
    let r = v - n2 * c2.mu;
    let b0 = n2 * c2.b;
    if c1.b == 0.0 || d == 0.0 {
        return (r - d * b0.sqrt()) / c1.mu;
    }
    let (mu, b) = (c1.mu, c1.b);
    let disc = d * d * b * b + 4.0 * mu * (r * b + mu * b0);
    if disc < 0.0 {
        return -1.0;
    }
    let s = (-d * b + disc.sqrt()) / (2.0 * mu);
    (s * s - b0) / b
}

pub fn two_class_frontier_model(c1: &JobClass, c2: &JobClass, model: &CapacityModel, n2_grid: &[u64]) -> Result<Vec<FrontierPoint>> {
    c1.validate(0)?;
    c2.validate(1)?;
    if !(c1.mu > 0.0) {
        return Err(Error::InvalidArgument("class 1 needs a positive mean".into()));
    }
    let classes = [*c1, *c2];
    Ok(n2_grid
        .iter()
        .map(|&n2| {
            let feasible = |n1: u64| model.is_feasible(&pattern_load(&classes, &[n1, n2]));
            let guess = match model.shape {
                Shape::Power(0.5) => two_class_root(c1, c2, n2 as f64, model.d, model.capacity),
                _ => (model.capacity - n2 as f64 * c2.mu) / c1.mu,
            };
            FrontierPoint {
                n2,
                max_n1: largest_feasible(guess, JOB_LIMIT, feasible),
            }
        })
        .collect())
}

pub fn two_class_frontier(c1: &JobClass, c2: &JobClass, spec: &ConstraintSpec, n2_grid: &[u64]) -> Result<Vec<FrontierPoint>> {
    two_class_frontier_model(c1, c2, &spec.model()?, n2_grid)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MixPattern {
    pub per_class_counts: Vec<u64>,
    pub uses: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CuttingStockSolution {
    pub machine_count: u64,
    /// Patterns with `uses > 0`.
    pub patterns: Vec<MixPattern>,
    /// Optimal value of the linear relaxation.
    pub lp_bound: f64,
    /// Number of Pareto-maximal patterns enumerated.
    pub maximal_patterns: usize,
}

/// All feasible patterns that no single extra job (within the class counts)
/// can extend.
pub fn maximal_patterns(classes: &[JobClass], model: &CapacityModel) -> Vec<Vec<u64>> {
    fn rec(classes: &[JobClass], model: &CapacityModel, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        let k = prefix.len();
        if k == classes.len() {
            let maximal = (0..classes.len()).all(|c| {
                prefix[c] == classes[c].count || {
                    let mut next = prefix.clone();
                    next[c] += 1;
                    !model.is_feasible(&pattern_load(classes, &next))
                }
            });
            if maximal && prefix.iter().any(|&x| x > 0) {
                out.push(prefix.clone());
            }
            return;
        }
        prefix.push(0);
        loop {
            let mut probe = prefix.clone();
            probe.resize(classes.len(), 0);
            if !model.is_feasible(&pattern_load(classes, &probe)) {
                break;
            }
            rec(classes, model, prefix, out);
            if prefix[k] == classes[k].count {
                break;
            }
            prefix[k] += 1;
        }
        prefix.pop();
    }
    let mut out = Vec::new();
    rec(classes, model, &mut Vec::with_capacity(classes.len()), &mut out);
    out
}

/// Solves `max N·y` subject to `P y ≤ 1`, `y ≥ 0` (the dual of the covering
/// relaxation) with a dense tableau and Bland's rule.
fn covering_dual(patterns: &[Vec<u64>], demand: &[u64]) -> Vec<f64> {
    let k = demand.len();
    let m = patterns.len();
    let cols = k + m + 1;
    let mut t = vec![0.0; (m + 1) * cols];
    for (r, p) in patterns.iter().enumerate() {
        for c in 0..k {
            t[r * cols + c] = p[c] as f64;
        }
        t[r * cols + k + r] = 1.0;
        t[r * cols + cols - 1] = 1.0;
    }
    let obj = m * cols;
    for c in 0..k {
        t[obj + c] = -(demand[c] as f64);
    }
    let mut basis: Vec<usize> = (k..k + m).collect();
    const EPS: f64 = 1e-12;
    for _ in 0..100_000 {
        let Some(enter) = (0..cols - 1).find(|&c| t[obj + c] < -EPS) else {
            break;
        };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            let a = t[r * cols + enter];
            if a > EPS {
                let ratio = t[r * cols + cols - 1] / a;
                let better = match leave {
                    None => true,
                    Some((lr, lv)) => ratio < lv - EPS || (ratio <= lv + EPS && basis[r] < basis[lr]),
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let Some((pr, _)) = leave else {
            break;
        };
        let pivot = t[pr * cols + enter];
        for c in 0..cols {
            t[pr * cols + c] /= pivot;
        }
        for r in 0..=m {
            if r != pr {
                let f = t[r * cols + enter];
                if f != 0.0 {
                    for c in 0..cols {
                        t[r * cols + c] -= f * t[pr * cols + c];
                    }
                }
            }
        }
        basis[pr] = enter;
    }
    let mut y = vec![0.0; k];
    for (r, &b) in basis.iter().enumerate() {
        if b < k {
            y[b] = t[r * cols + cols - 1].max(0.0);
        }
    }
    // Rescale so the dual stays feasible despite rounding.
    let worst = patterns
        .iter()
        .map(|p| p.iter().zip(&y).map(|(&a, &w)| a as f64 * w).sum::<f64>())
        .fold(0.0, f64::max);
    if worst > 1.0 {
        y.iter_mut().for_each(|w| *w /= worst);
    }
    y
}

struct Search<'a> {
    patterns: &'a [Vec<u64>],
    dual: &'a [f64],
    best: u64,
    best_plan: Vec<usize>,
    plan: Vec<usize>,
    seen: HashMap<Vec<u64>, u64>,
}

impl Search<'_> {
    fn bound(&self, rem: &[u64]) -> u64 {
        let lp: f64 = rem.iter().zip(self.dual).map(|(&r, &w)| r as f64 * w).sum();
        let lp = (lp - 1e-9).ceil().max(0.0) as u64;
        let single = rem
            .iter()
            .enumerate()
            .filter(|(_, &r)| r > 0)
            .map(|(c, &r)| {
                let most = self.patterns.iter().map(|p| p[c]).max().unwrap_or(0).max(1);
                r.div_ceil(most)
            })
            .max()
            .unwrap_or(0);
        lp.max(single)
    }

    fn dfs(&mut self, rem: Vec<u64>, depth: u64) {
        let Some(first) = rem.iter().position(|&r| r > 0) else {
            if depth < self.best {
                self.best = depth;
                self.best_plan = self.plan.clone();
            }
            return;
        };
        if depth + self.bound(&rem) >= self.best {
            return;
        }
        match self.seen.get(&rem) {
            Some(&d) if d <= depth => return,
            _ => {
                self.seen.insert(rem.clone(), depth);
            }
        }
        let mut order: Vec<usize> = (0..self.patterns.len()).filter(|&p| self.patterns[p][first] > 0).collect();
        let covered = |p: usize| -> u64 { self.patterns[p].iter().zip(&rem).map(|(&a, &r)| a.min(r)).sum() };
        order.sort_by_key(|&p| std::cmp::Reverse(covered(p)));
        for p in order {
            let next: Vec<u64> = rem.iter().zip(&self.patterns[p]).map(|(&r, &a)| r.saturating_sub(a)).collect();
            self.plan.push(p);
            self.dfs(next, depth + 1);
            self.plan.pop();
        }
    }
}

/// Minimum machines to host every job of every class, solved exactly.
pub fn solve_cutting_stock_model(classes: &[JobClass], model: &CapacityModel, max_classes: usize) -> Result<CuttingStockSolution> {
    if classes.len() > max_classes {
        return Err(Error::InvalidArgument(format!(
            "{} classes exceeds the limit of {max_classes}",
            classes.len()
        )));
    }
    for (k, c) in classes.iter().enumerate() {
        c.validate(k)?;
        if !model.fits(&LoadSummary::default(), &c.item(k)) {
            return Err(Error::InfeasibleClass { class: k });
        }
        if c.count > 0 && c.mu == 0.0 && c.b == 0.0 {
            return Err(Error::InvalidArgument(format!("class {k} has zero size")));
        }
    }
    let demand: Vec<u64> = classes.iter().map(|c| c.count).collect();
    if demand.iter().all(|&n| n == 0) {
        return Ok(CuttingStockSolution {
            machine_count: 0,
            patterns: Vec::new(),
            lp_bound: 0.0,
            maximal_patterns: 0,
        });
    }
    let patterns = maximal_patterns(classes, model);
    let dual = covering_dual(&patterns, &demand);
    let lp_bound: f64 = demand.iter().zip(&dual).map(|(&n, &w)| n as f64 * w).sum();

    // Greedy incumbent: repeatedly take the pattern covering the most demand.
    let mut rem = demand.clone();
    let mut greedy = Vec::new();
    while rem.iter().any(|&r| r > 0) {
        let p = (0..patterns.len())
            .max_by_key(|&p| {
                let cov: u64 = patterns[p].iter().zip(&rem).map(|(&a, &r)| a.min(r)).sum();
                (cov, std::cmp::Reverse(p))
            })
            .expect("at least one pattern");
        rem = rem.iter().zip(&patterns[p]).map(|(&r, &a)| r.saturating_sub(a)).collect();
        greedy.push(p);
    }
    let mut search = Search {
        patterns: &patterns,
        dual: &dual,
        best: greedy.len() as u64,
        best_plan: greedy,
        plan: Vec::new(),
        seen: HashMap::new(),
    };
    search.dfs(demand.clone(), 0);

    let mut uses: Vec<u64> = vec![0; patterns.len()];
    for &p in &search.best_plan {
        uses[p] += 1;
    }
    let chosen = patterns
        .iter()
        .zip(&uses)
        .filter(|(_, &u)| u > 0)
        .map(|(p, &u)| MixPattern {
            per_class_counts: p.clone(),
            uses: u,
        })
        .collect();
    Ok(CuttingStockSolution {
        machine_count: search.best,
        patterns: chosen,
        lp_bound,
        maximal_patterns: patterns.len(),
    })
}

pub fn solve_cutting_stock(classes: &[JobClass], spec: &ConstraintSpec) -> Result<CuttingStockSolution> {
    solve_cutting_stock_model(classes, &spec.model()?, MAX_CLASSES)
}
