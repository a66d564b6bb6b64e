//! Jobs with uncertain usage and the synthetic workload generator.
//!
//! Usage is described as a fraction of the requested size; every derived
//! statistic on [`Job`] is in absolute units (cores).

use crate::error::{Error, Result};
use crate::normal;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UsageKind {
    /// Usage is either the lower or the upper bound (the "Bernoulli" workload).
    TwoPoint,
    /// A normal law truncated to `[lower, upper]`.
    TruncatedGaussian,
}

/// Usage law of one job, as fractions of its requested size.
///
/// For [`UsageKind::TwoPoint`] `loc` is the mean and fixes the probability of
/// the upper outcome. For [`UsageKind::TruncatedGaussian`] `loc` and `scale`
/// are the location and scale of the normal law *before* truncation; `loc`
/// may lie outside `[lower, upper]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UsageDistribution {
    pub kind: UsageKind,
    pub lower: f64,
    pub upper: f64,
    pub loc: f64,
    #[serde(default)]
    pub scale: f64,
}

impl UsageDistribution {
    pub fn two_point(lower: f64, upper: f64, mean: f64) -> Result<Self> {
        let d = UsageDistribution {
            kind: UsageKind::TwoPoint,
            lower,
            upper,
            loc: mean,
            scale: 0.0,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn truncated_gaussian(lower: f64, upper: f64, loc: f64, scale: f64) -> Result<Self> {
        let d = UsageDistribution {
            kind: UsageKind::TruncatedGaussian,
            lower,
            upper,
            loc,
            scale,
        };
        d.validate()?;
        Ok(d)
    }

    /// A usage that always equals `value`.
    pub fn point(value: f64) -> Result<Self> {
        Self::two_point(value, value, value)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDistribution(msg));
        if !(self.lower.is_finite() && self.upper.is_finite() && self.loc.is_finite()) {
            return bad(format!("non-finite parameter in {self:?}"));
        }
        if !(0.0 <= self.lower && self.lower <= self.upper && self.upper <= 1.0) {
            return bad(format!(
                "bounds must satisfy 0 <= lower <= upper <= 1, got [{}, {}]",
                self.lower, self.upper
            ));
        }
        match self.kind {
            UsageKind::TwoPoint => {
                if !(self.lower <= self.loc && self.loc <= self.upper) {
                    return bad(format!(
                        "two-point mean {} outside [{}, {}]",
                        self.loc, self.lower, self.upper
                    ));
                }
            }
            UsageKind::TruncatedGaussian => {
                if !(self.scale > 0.0 && self.scale.is_finite()) {
                    return bad(format!("truncated gaussian scale must be > 0, got {}", self.scale));
                }
            }
        }
        Ok(())
    }

    /// Exact mean and variance (fractions of the requested size).
    pub fn moments(&self) -> (f64, f64) {
        if self.upper == self.lower {
            return (self.lower, 0.0);
        }
        match self.kind {
            UsageKind::TwoPoint => {
                let m = self.loc;
                (m, ((self.upper - m) * (m - self.lower)).max(0.0))
            }
            UsageKind::TruncatedGaussian => truncated_normal_moments(self.lower, self.upper, self.loc, self.scale),
        }
    }

    /// Probability of the upper outcome for a two-point law.
    pub fn upper_probability(&self) -> Option<f64> {
        match self.kind {
            UsageKind::TwoPoint if self.upper > self.lower => {
                Some((self.loc - self.lower) / (self.upper - self.lower))
            }
            UsageKind::TwoPoint => Some(0.0),
            UsageKind::TruncatedGaussian => None,
        }
    }
}

/// Mean and variance of N(loc, scale²) truncated to `[lower, upper]`.
fn truncated_normal_moments(lower: f64, upper: f64, loc: f64, scale: f64) -> (f64, f64) {
    let a = (lower - loc) / scale;
    let b = (upper - loc) / scale;
    let z = normal::interval_mass(a, b);
    if !(z > 0.0) {
        // All mass sits numerically on the bound nearest to loc.
        let edge = if loc >= upper { upper } else { lower };
        return (edge, 0.0);
    }
    let (pa, pb) = (normal::pdf(a), normal::pdf(b));
    let lambda = (pa - pb) / z;
    let mean = (loc + scale * lambda).clamp(lower, upper);
    let var = scale * scale * (1.0 + (a * pa - b * pb) / z - lambda * lambda);
    (mean, var.max(0.0))
}

/// Precomputed sampling state, in absolute units.
#[derive(Clone, Copy, Debug)]
enum Sampler {
    Point(f64),
    TwoPoint { lo: f64, hi: f64, p_hi: f64 },
    Truncated {
        loc: f64,
        scale: f64,
        lo: f64,
        hi: f64,
        u_lo: f64,
        u_width: f64,
        // Invert through the upper tail when the whole interval sits right of loc.
        mirrored: bool,
    },
}

impl Sampler {
    fn new(usage: &UsageDistribution, size: f64) -> Self {
        let (lo, hi) = (usage.lower * size, usage.upper * size);
        if usage.upper == usage.lower {
            return Sampler::Point(lo);
        }
        match usage.kind {
            UsageKind::TwoPoint => Sampler::TwoPoint {
                lo,
                hi,
                p_hi: usage.upper_probability().unwrap_or(0.0),
            },
            UsageKind::TruncatedGaussian => {
                let a = (usage.lower - usage.loc) / usage.scale;
                let b = (usage.upper - usage.loc) / usage.scale;
                let mirrored = a >= 0.0;
                let (u_lo, u_hi) = if mirrored {
                    (normal::sf(b), normal::sf(a))
                } else {
                    (normal::cdf(a), normal::cdf(b))
                };
                if !(u_hi > u_lo) {
                    let edge = if usage.loc >= usage.upper { hi } else { lo };
                    return Sampler::Point(edge);
                }
                Sampler::Truncated {
                    loc: usage.loc * size,
                    scale: usage.scale * size,
                    lo,
                    hi,
                    u_lo,
                    u_width: u_hi - u_lo,
                    mirrored,
                }
            }
        }
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Sampler::Point(v) => v,
            Sampler::TwoPoint { lo, hi, p_hi } => {
                if rng.random::<f64>() < p_hi {
                    hi
                } else {
                    lo
                }
            }
            Sampler::Truncated {
                loc,
                scale,
                lo,
                hi,
                u_lo,
                u_width,
                mirrored,
            } => {
                let u = u_lo + u_width * rng.random::<f64>();
                let z = normal::inverse_cdf_fast(u);
                let z = if mirrored { -z } else { z };
                (loc + scale * z).clamp(lo, hi)
            }
        }
    }
}

/// One schedulable unit.
#[derive(Clone, Debug)]
pub struct Job {
    pub id: u64,
    /// Requested cores; the sellable upper bound is `requested_size * usage.upper`.
    pub requested_size: f64,
    pub usage: UsageDistribution,
    /// Exact mean usage in cores.
    pub mean: f64,
    /// Exact usage variance in cores².
    pub variance: f64,
    /// Squared usage range in cores².
    pub range_sq: f64,
    sampler: Sampler,
}

// The sampler is a function of `usage`.
impl PartialEq for Job {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.requested_size == other.requested_size
            && self.usage == other.usage
            && self.mean == other.mean
            && self.variance == other.variance
            && self.range_sq == other.range_sq
    }
}

impl Job {
    pub fn new(id: u64, requested_size: f64, usage: UsageDistribution) -> Result<Self> {
        if !(requested_size > 0.0 && requested_size.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "job {id}: requested size must be positive, got {requested_size}"
            )));
        }
        usage.validate()?;
        let (m, v) = usage.moments();
        let range = (usage.upper - usage.lower) * requested_size;
        Ok(Job {
            id,
            requested_size,
            usage,
            mean: m * requested_size,
            variance: v * requested_size * requested_size,
            range_sq: range * range,
            sampler: Sampler::new(&usage, requested_size),
        })
    }

    /// Lower usage bound in cores.
    #[inline]
    pub fn lower(&self) -> f64 {
        self.usage.lower * self.requested_size
    }

    /// Upper usage bound in cores (what a no-overcommit scheduler reserves).
    #[inline]
    pub fn upper(&self) -> f64 {
        self.usage.upper * self.requested_size
    }

    /// Draws one usage realization in cores, always within `[lower, upper]`.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sampler.sample(rng)
    }
}

/// How a two-point job's location draw is turned into its law.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TwoPointMapping {
    /// The location draw is the probability of the upper outcome.
    #[default]
    UpperProbability,
    /// The location draw is the mean, clamped into `[lower, upper]`.
    ClampedMean,
}

/// Generator parameters for a synthetic workload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub job_count: usize,
    /// `(cores, probability)` pairs.
    pub size_mix: Vec<(f64, f64)>,
    pub lower_range: (f64, f64),
    pub upper_range: (f64, f64),
    pub loc_range: (f64, f64),
    pub scale_range: (f64, f64),
    pub kind: UsageKind,
    #[serde(default)]
    pub two_point_mapping: TwoPointMapping,
    #[serde(default)]
    pub seed: u64,
}

/// VM size mix observed in one production data center, in percent.
///
/// The published percentages add up to 99.9; [`production_size_mix`]
/// rescales them to probabilities.
pub const PRODUCTION_SIZE_PERCENT: [(f64, f64); 6] = [
    (1.0, 36.3),
    (2.0, 13.8),
    (4.0, 21.3),
    (8.0, 23.1),
    (16.0, 3.5),
    (32.0, 1.9),
];

pub fn production_size_mix() -> Vec<(f64, f64)> {
    let total: f64 = PRODUCTION_SIZE_PERCENT.iter().map(|&(_, p)| p).sum();
    PRODUCTION_SIZE_PERCENT.iter().map(|&(c, p)| (c, p / total)).collect()
}

impl WorkloadSpec {
    /// 1000 jobs with the production size mix and the usual bound ranges.
    pub fn production(kind: UsageKind, seed: u64) -> Self {
        WorkloadSpec {
            job_count: 1000,
            size_mix: production_size_mix(),
            lower_range: (0.3, 0.6),
            upper_range: (0.7, 1.0),
            loc_range: (0.1, 0.5),
            scale_range: (0.1, 0.5),
            kind,
            two_point_mapping: TwoPointMapping::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidWorkload(msg));
        if self.size_mix.is_empty() && self.job_count > 0 {
            return bad("size mix is empty".into());
        }
        let mut total = 0.0;
        for &(cores, p) in &self.size_mix {
            if !(cores > 0.0 && cores.is_finite()) {
                return bad(format!("core count must be positive, got {cores}"));
            }
            if !(p >= 0.0 && p.is_finite()) {
                return bad(format!("probability must be non-negative, got {p}"));
            }
            total += p;
        }
        if !self.size_mix.is_empty() && (total - 1.0).abs() > 1e-9 {
            return bad(format!("size mix probabilities sum to {total}, expected 1"));
        }
        for (name, (lo, hi)) in [
            ("lower_range", self.lower_range),
            ("upper_range", self.upper_range),
            ("loc_range", self.loc_range),
            ("scale_range", self.scale_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return bad(format!("{name} is not a well-ordered interval: ({lo}, {hi})"));
            }
        }
        if self.lower_range.0 < 0.0 || self.upper_range.1 > 1.0 {
            return bad("usage bounds must lie in [0, 1]".into());
        }
        if self.lower_range.1 > self.upper_range.0 {
            return bad(format!(
                "lower_range {:?} overlaps upper_range {:?}",
                self.lower_range, self.upper_range
            ));
        }
        match self.kind {
            UsageKind::TruncatedGaussian if self.scale_range.0 <= 0.0 => {
                bad("scale_range must be strictly positive".into())
            }
            UsageKind::TwoPoint
                if self.two_point_mapping == TwoPointMapping::UpperProbability
                    && (self.loc_range.0 < 0.0 || self.loc_range.1 > 1.0) =>
            {
                bad("loc_range must lie in [0, 1] when used as a probability".into())
            }
            _ => Ok(()),
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        // Keep the stream aligned with the non-degenerate case.
        let _ = rng.random::<f64>();
        lo
    } else {
        lo + (hi - lo) * rng.random::<f64>()
    }
}

/// Generates the workload described by `spec`; a pure function of `spec`.
pub fn generate_workload(spec: &WorkloadSpec) -> Result<Vec<Job>> {
    spec.validate()?;
    if spec.job_count == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sizes = WeightedIndex::new(spec.size_mix.iter().map(|&(_, p)| p))
        .map_err(|e| Error::InvalidWorkload(e.to_string()))?;
    (0..spec.job_count)
        .map(|i| {
            let cores = spec.size_mix[sizes.sample(&mut rng)].0;
            let lower = draw(&mut rng, spec.lower_range);
            let upper = draw(&mut rng, spec.upper_range);
            let loc = draw(&mut rng, spec.loc_range);
            let scale = draw(&mut rng, spec.scale_range);
            let usage = match spec.kind {
                UsageKind::TruncatedGaussian => UsageDistribution::truncated_gaussian(lower, upper, loc, scale)?,
                UsageKind::TwoPoint => {
                    let mean = match spec.two_point_mapping {
                        TwoPointMapping::UpperProbability => lower + loc * (upper - lower),
                        TwoPointMapping::ClampedMean => loc.clamp(lower, upper),
                    };
                    UsageDistribution::two_point(lower, upper, mean.clamp(lower, upper))?
                }
            };
            Job::new(i as u64, cores, usage)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand_distr::Normal;

    #[test]
    fn symmetric_two_point_moments() {
        let d = UsageDistribution::two_point(0.3, 1.0, 0.65).unwrap();
        let (m, v) = d.moments();
        assert_abs_diff_eq!(m, 0.65, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.1225, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_two_point_has_zero_variance() {
        let d = UsageDistribution::two_point(0.3, 1.0, 0.3).unwrap();
        assert_eq!(d.moments(), (0.3, 0.0));
        let job = Job::new(0, 4.0, d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            assert_eq!(job.sample(&mut rng), job.lower());
        }
    }

    #[test]
    fn two_point_grid_matches_brute_force() {
        // Enumerate the two outcomes directly.
        for i in 0..=20 {
            for j in (i + 1)..=20 {
                let (lo, hi) = (i as f64 / 20.0, j as f64 / 20.0);
                for k in 0..=10 {
                    let mean = (lo + (hi - lo) * k as f64 / 10.0).min(hi);
                    let d = UsageDistribution::two_point(lo, hi, mean).unwrap();
                    let p = (mean - lo) / (hi - lo);
                    let m = p * hi + (1.0 - p) * lo;
                    let v = p * (hi - m).powi(2) + (1.0 - p) * (lo - m).powi(2);
                    let (am, av) = d.moments();
                    assert_abs_diff_eq!(am, m, epsilon = 1e-12);
                    assert_abs_diff_eq!(av, v, epsilon = 1e-12);
                }
            }
        }
    }

    /// Independent oracle: rejection sampling from the untruncated normal.
    fn rejection_moments(lower: f64, upper: f64, loc: f64, scale: f64, n: usize, seed: u64) -> (f64, f64, f64) {
        let normal = Normal::new(loc, scale).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut s, mut s2, mut k) = (0.0, 0.0, 0usize);
        while k < n {
            let x: f64 = rng.sample(normal);
            if (lower..=upper).contains(&x) {
                s += x;
                s2 += x * x;
                k += 1;
            }
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        (mean, var, (var / n as f64).sqrt())
    }

    #[test]
    fn truncated_gaussian_moments_match_monte_carlo() {
        let d = UsageDistribution::truncated_gaussian(0.3, 0.9, 0.4, 0.3).unwrap();
        let (m, v) = d.moments();
        let (mc_m, mc_v, se) = rejection_moments(0.3, 0.9, 0.4, 0.3, 10_000_000, 11);
        assert!((m - mc_m).abs() <= 3.0 * se, "mean {m} vs {mc_m} (se {se})");
        // Standard error of the sample variance is about sqrt((m4 - v²)/n); bound it loosely by v*sqrt(2/n).
        let se_v = v * (2.0 / 1e7f64).sqrt();
        assert!((v - mc_v).abs() <= 3.0 * se_v, "var {v} vs {mc_v} (se {se_v})");
    }

    #[test]
    fn truncated_gaussian_grid_agrees_with_sampler() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(lo, hi) in &[(0.3, 0.7), (0.6, 1.0), (0.45, 0.85)] {
            for &loc in &[0.1, 0.3, 0.5, 0.9] {
                for &scale in &[0.1, 0.3, 0.5] {
                    let d = UsageDistribution::truncated_gaussian(lo, hi, loc, scale).unwrap();
                    let job = Job::new(0, 1.0, d).unwrap();
                    let n = 1_000_000;
                    let (mut s, mut s2) = (0.0, 0.0);
                    for _ in 0..n {
                        let x = job.sample(&mut rng);
                        assert!((lo..=hi).contains(&x));
                        s += x;
                        s2 += x * x;
                    }
                    let mean = s / n as f64;
                    let var = s2 / n as f64 - mean * mean;
                    let se = (var / n as f64).sqrt();
                    let (am, av) = d.moments();
                    assert!((am - mean).abs() <= 4.0 * se, "{d:?}: {am} vs {mean}");
                    let se_v = (av.max(1e-12) * (2.0 / n as f64).sqrt()).max(1e-9);
                    assert!((av - var).abs() <= 4.0 * se_v, "{d:?}: {av} vs {var}");
                }
            }
        }
    }

    #[test]
    fn extreme_truncation_stays_finite() {
        let d = UsageDistribution::truncated_gaussian(0.6, 1.0, 0.1, 0.05).unwrap();
        let (m, v) = d.moments();
        assert!((0.6..=1.0).contains(&m) && v >= 0.0 && v.is_finite());
        assert!(m - 0.6 < 0.01);
    }

    #[test]
    fn job_scales_moments_to_cores() {
        let d = UsageDistribution::two_point(0.3, 1.0, 0.65).unwrap();
        let job = Job::new(7, 4.0, d).unwrap();
        assert_abs_diff_eq!(job.mean, 2.6, epsilon = 1e-12);
        assert_abs_diff_eq!(job.variance, 0.1225 * 16.0, epsilon = 1e-12);
        assert_abs_diff_eq!(job.range_sq, 0.49 * 16.0, epsilon = 1e-12);
        assert_abs_diff_eq!(job.upper(), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(job.lower(), 1.2, epsilon = 1e-12);
    }

    #[test]
    fn invalid_distributions_are_rejected() {
        assert!(UsageDistribution::two_point(0.5, 0.4, 0.45).is_err());
        assert!(UsageDistribution::two_point(0.3, 1.0, 0.2).is_err());
        assert!(UsageDistribution::truncated_gaussian(0.3, 1.0, 0.2, 0.0).is_err());
        assert!(UsageDistribution::truncated_gaussian(0.3, 1.2, 0.2, 0.1).is_err());
        assert!(Job::new(0, 0.0, UsageDistribution::point(0.5).unwrap()).is_err());
    }

    #[test]
    fn empty_workload() {
        let mut spec = WorkloadSpec::production(UsageKind::TwoPoint, 1);
        spec.job_count = 0;
        assert!(generate_workload(&spec).unwrap().is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = WorkloadSpec::production(UsageKind::TruncatedGaussian, 42);
        let a = generate_workload(&spec).unwrap();
        let b = generate_workload(&spec).unwrap();
        assert_eq!(a.len(), 1000);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.requested_size, y.requested_size);
            assert_eq!(x.usage, y.usage);
            assert_eq!(x.mean, y.mean);
        }
        let c = generate_workload(&WorkloadSpec { seed: 43, ..spec }).unwrap();
        assert!(a.iter().zip(&c).any(|(x, y)| x.usage != y.usage));
    }

    #[test]
    fn production_mix_frequencies() {
        // 20 workloads of 1000 jobs, pooled.
        let mut counts = [0usize; 6];
        let mut total = 0;
        for seed in 0..20 {
            let jobs = generate_workload(&WorkloadSpec::production(UsageKind::TwoPoint, seed)).unwrap();
            for j in &jobs {
                let k = PRODUCTION_SIZE_PERCENT.iter().position(|&(c, _)| c == j.requested_size).unwrap();
                counts[k] += 1;
            }
            total += jobs.len();
        }
        for (k, &(cores, pct)) in PRODUCTION_SIZE_PERCENT.iter().enumerate() {
            let freq = counts[k] as f64 / total as f64;
            assert!((freq - pct / 100.0).abs() <= 0.03, "size {cores}: {freq} vs {pct}%");
            assert!((freq - pct / 99.9).abs() <= 0.012, "size {cores}: {freq} vs {pct}%");
        }
    }

    #[test]
    fn generated_jobs_respect_ranges() {
        for kind in [UsageKind::TwoPoint, UsageKind::TruncatedGaussian] {
            let jobs = generate_workload(&WorkloadSpec::production(kind, 9)).unwrap();
            for j in &jobs {
                assert!((0.3..=0.6).contains(&j.usage.lower));
                assert!((0.7..=1.0).contains(&j.usage.upper));
                assert!(j.lower() <= j.mean && j.mean <= j.upper());
            }
        }
    }

    #[test]
    fn spec_validation() {
        let good = WorkloadSpec::production(UsageKind::TwoPoint, 0);
        assert!(good.validate().is_ok());
        let mut s = good.clone();
        s.size_mix[0].1 += 0.01;
        assert!(s.validate().is_err());
        let mut s = good.clone();
        s.lower_range = (0.6, 0.3);
        assert!(s.validate().is_err());
        let mut s = good.clone();
        s.lower_range = (0.3, 0.8);
        assert!(s.validate().is_err());
        let mut s = good;
        s.kind = UsageKind::TruncatedGaussian;
        s.scale_range = (0.0, 0.5);
        assert!(s.validate().is_err());
    }
}
