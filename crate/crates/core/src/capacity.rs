//! The modified capacity constraint and all of its variants.
//!
//! A machine holding jobs `S` is feasible when
//! `Σμ + D(α)·g(Σb) ≤ V`, where `g` is a square root, a `p`-power or a
//! logarithm depending on the variant. Linear variants sum per-job buffered
//! sizes `μ + D√b` instead. Every variant is clipped at `ΣĀ` unless
//! clipping is turned off explicitly.

use crate::error::{Error, Result};
use crate::normal;
use crate::workload::Job;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    NoOvercommit,
    Gaussian,
    Hoeffding,
    RobustMeanVar,
    LinearGaussian,
    LinearHoeffding,
    LinearRobust,
    PNorm,
    LogBuffer,
}

impl Variant {
    pub const ALL: [Variant; 9] = [
        Variant::NoOvercommit,
        Variant::Gaussian,
        Variant::Hoeffding,
        Variant::RobustMeanVar,
        Variant::LinearGaussian,
        Variant::LinearHoeffding,
        Variant::LinearRobust,
        Variant::PNorm,
        Variant::LogBuffer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::NoOvercommit => "no-overcommit",
            Variant::Gaussian => "gaussian",
            Variant::Hoeffding => "hoeffding",
            Variant::RobustMeanVar => "robust-mean-var",
            Variant::LinearGaussian => "linear-gaussian",
            Variant::LinearHoeffding => "linear-hoeffding",
            Variant::LinearRobust => "linear-robust",
            Variant::PNorm => "p-norm",
            Variant::LogBuffer => "log-buffer",
        }
    }

    pub fn is_linear(self) -> bool {
        matches!(
            self,
            Variant::LinearGaussian | Variant::LinearHoeffding | Variant::LinearRobust
        )
    }

    /// The square-root variant a linear benchmark approximates, and vice versa.
    pub fn counterpart(self) -> Option<Variant> {
        match self {
            Variant::Gaussian => Some(Variant::LinearGaussian),
            Variant::Hoeffding => Some(Variant::LinearHoeffding),
            Variant::RobustMeanVar => Some(Variant::LinearRobust),
            Variant::LinearGaussian => Some(Variant::Gaussian),
            Variant::LinearHoeffding => Some(Variant::Hoeffding),
            Variant::LinearRobust => Some(Variant::RobustMeanVar),
            _ => None,
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant {s:?}")))
    }
}

/// Where `b_j` and `D(α)` come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiskFamily {
    /// `b = σ²`, `D = Φ⁻¹(α)`.
    Gaussian,
    /// `b = (Ā − A̲)²`, `D = √(−½ ln(1−α))`.
    #[default]
    Hoeffding,
    /// `b = σ²`, `D = √(α/(1−α))`.
    Robust,
}

impl std::str::FromStr for RiskFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(RiskFamily::Gaussian),
            "hoeffding" => Ok(RiskFamily::Hoeffding),
            "robust" => Ok(RiskFamily::Robust),
            _ => Err(Error::InvalidArgument(format!("unknown risk family {s:?}"))),
        }
    }
}

impl RiskFamily {
    pub fn d_of_alpha(self, alpha: f64) -> f64 {
        match self {
            RiskFamily::Gaussian => normal::inverse_cdf(alpha),
            RiskFamily::Hoeffding => (-0.5 * (-alpha).ln_1p()).sqrt(),
            RiskFamily::Robust => (alpha / (1.0 - alpha)).sqrt(),
        }
    }

    pub fn b_value(self, job: &Job) -> f64 {
        match self {
            RiskFamily::Gaussian | RiskFamily::Robust => job.variance,
            RiskFamily::Hoeffding => job.range_sq,
        }
    }
}

fn default_p() -> f64 {
    0.5
}

fn default_true() -> bool {
    true
}

/// Which capacity model governs feasibility.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub variant: Variant,
    pub alpha: f64,
    /// Buffer exponent, used by [`Variant::PNorm`] only.
    #[serde(default = "default_p")]
    pub p_exponent: f64,
    pub capacity: f64,
    /// Source of `b` and `D` for [`Variant::PNorm`] and [`Variant::LogBuffer`];
    /// ignored by the other variants, whose family is fixed.
    #[serde(default)]
    pub family: RiskFamily,
    /// Cap the effective load at `ΣĀ`.
    #[serde(default = "default_true")]
    pub clip: bool,
}

impl ConstraintSpec {
    pub fn new(variant: Variant, alpha: f64, capacity: f64) -> Self {
        ConstraintSpec {
            variant,
            alpha,
            p_exponent: 0.5,
            capacity,
            family: RiskFamily::default(),
            clip: true,
        }
    }

    pub fn no_overcommit(capacity: f64) -> Self {
        Self::new(Variant::NoOvercommit, 1.0, capacity)
    }

    pub fn p_norm(p: f64, family: RiskFamily, alpha: f64, capacity: f64) -> Self {
        ConstraintSpec {
            p_exponent: p,
            family,
            ..Self::new(Variant::PNorm, alpha, capacity)
        }
    }

    pub fn with_family(mut self, family: RiskFamily) -> Self {
        self.family = family;
        self
    }

    pub fn with_clip(mut self, clip: bool) -> Self {
        self.clip = clip;
        self
    }

    /// The family actually in effect, `None` for [`Variant::NoOvercommit`].
    pub fn risk_family(&self) -> Option<RiskFamily> {
        match self.variant {
            Variant::NoOvercommit => None,
            Variant::Gaussian | Variant::LinearGaussian => Some(RiskFamily::Gaussian),
            Variant::Hoeffding | Variant::LinearHoeffding => Some(RiskFamily::Hoeffding),
            Variant::RobustMeanVar | Variant::LinearRobust => Some(RiskFamily::Robust),
            Variant::PNorm | Variant::LogBuffer => Some(self.family),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.capacity > 0.0 && self.capacity.is_finite()) {
            return Err(Error::InvalidConstraint(format!(
                "capacity must be positive, got {}",
                self.capacity
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConstraint(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(0.5..=1.0).contains(&self.p_exponent) {
            return Err(Error::InvalidConstraint(format!(
                "p exponent must lie in [0.5, 1], got {}",
                self.p_exponent
            )));
        }
        match self.risk_family() {
            None => Ok(()),
            Some(_) if self.alpha == 1.0 => Err(Error::DegenerateConfidence {
                variant: self.variant.name().into(),
                alpha: self.alpha,
            }),
            Some(RiskFamily::Gaussian) if self.alpha < 0.5 => Err(Error::InvalidConstraint(format!(
                "gaussian multiplier is negative for alpha = {} < 0.5",
                self.alpha
            ))),
            Some(_) => Ok(()),
        }
    }

    /// `D(α)`; zero for [`Variant::NoOvercommit`].
    pub fn d_of_alpha(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.risk_family().map_or(0.0, |f| f.d_of_alpha(self.alpha)))
    }

    /// `b_j` under this spec.
    pub fn b_value(&self, job: &Job) -> f64 {
        self.risk_family().map_or(0.0, |f| f.b_value(job))
    }

    pub fn model(&self) -> Result<CapacityModel> {
        CapacityModel::new(self)
    }
}

/// Per-job quantities a capacity model needs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Item {
    pub id: u64,
    pub mean: f64,
    pub b: f64,
    pub sqrt_b: f64,
    /// `Ā`; infinite for abstract items that are never clipped.
    pub upper: f64,
}

impl Item {
    /// An abstract `(μ, b)` item with no upper bound.
    pub fn abstract_item(id: u64, mean: f64, b: f64) -> Self {
        Item {
            id,
            mean,
            b,
            sqrt_b: b.sqrt(),
            upper: f64::INFINITY,
        }
    }
}

/// Additive per-machine aggregates.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LoadSummary {
    pub sum_mean: f64,
    pub sum_b: f64,
    /// `Σ√b`, the buffer of the linear variants.
    pub sum_sqrt_b: f64,
    pub sum_upper: f64,
    pub count: usize,
}

impl LoadSummary {
    pub fn of<'a>(items: impl IntoIterator<Item = &'a Item>) -> Self {
        let mut load = LoadSummary::default();
        for it in items {
            load.add(it);
        }
        load
    }

    #[inline]
    pub fn add(&mut self, it: &Item) {
        self.sum_mean += it.mean;
        self.sum_b += it.b;
        self.sum_sqrt_b += it.sqrt_b;
        self.sum_upper += it.upper;
        self.count += 1;
    }

    #[inline]
    pub fn with(&self, it: &Item) -> Self {
        let mut next = *self;
        next.add(it);
        next
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    /// `ΣĀ`.
    Upper,
    /// `Σμ + D·(Σb)^p`.
    Power(f64),
    /// `Σμ + D·Σ√b`.
    Linear,
    /// `Σμ + D·ln(1 + Σb)`.
    Log,
}

/// A validated [`ConstraintSpec`] with `D(α)` precomputed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CapacityModel {
    pub shape: Shape,
    pub d: f64,
    pub capacity: f64,
    pub clip: bool,
    pub family: Option<RiskFamily>,
}

impl CapacityModel {
    pub fn new(spec: &ConstraintSpec) -> Result<Self> {
        let d = spec.d_of_alpha()?;
        let shape = match spec.variant {
            Variant::NoOvercommit => Shape::Upper,
            Variant::Gaussian | Variant::Hoeffding | Variant::RobustMeanVar => Shape::Power(0.5),
            Variant::LinearGaussian | Variant::LinearHoeffding | Variant::LinearRobust => Shape::Linear,
            Variant::PNorm => Shape::Power(spec.p_exponent),
            Variant::LogBuffer => Shape::Log,
        };
        Ok(CapacityModel {
            shape,
            d,
            capacity: spec.capacity,
            clip: spec.clip,
            family: spec.risk_family(),
        })
    }

    /// The normalized model of the theory: `Σμ + √Σb ≤ 1`, never clipped.
    pub fn normalized() -> Self {
        CapacityModel {
            shape: Shape::Power(0.5),
            d: 1.0,
            capacity: 1.0,
            clip: false,
            family: None,
        }
    }

    pub fn item(&self, job: &Job) -> Item {
        let b = self.family.map_or(0.0, |f| f.b_value(job));
        Item {
            id: job.id,
            mean: job.mean,
            b,
            sqrt_b: b.sqrt(),
            upper: job.upper(),
        }
    }

    pub fn items(&self, jobs: &[Job]) -> Vec<Item> {
        jobs.iter().map(|j| self.item(j)).collect()
    }

    /// Unclipped left-hand side of the constraint.
    #[inline]
    pub fn raw_load(&self, load: &LoadSummary) -> f64 {
        match self.shape {
            Shape::Upper => load.sum_upper,
            Shape::Power(p) => {
                let buffer = if p == 0.5 {
                    load.sum_b.sqrt()
                } else {
                    load.sum_b.powf(p)
                };
                load.sum_mean + self.d * buffer
            }
            Shape::Linear => load.sum_mean + self.d * load.sum_sqrt_b,
            Shape::Log => load.sum_mean + self.d * load.sum_b.ln_1p(),
        }
    }

    #[inline]
    pub fn effective_load(&self, load: &LoadSummary) -> f64 {
        let raw = self.raw_load(load);
        if self.clip {
            raw.min(load.sum_upper)
        } else {
            raw
        }
    }

    #[inline]
    pub fn is_feasible(&self, load: &LoadSummary) -> bool {
        self.effective_load(load) <= self.capacity
    }

    #[inline]
    pub fn fits(&self, load: &LoadSummary, item: &Item) -> bool {
        self.is_feasible(&load.with(item))
    }

    /// `capacity − effective_load`.
    #[inline]
    pub fn slack(&self, load: &LoadSummary) -> f64 {
        self.capacity - self.effective_load(load)
    }

    /// Coordinates `(μ, b)` of an item in the normalized model where the
    /// unclipped constraint reads `Σμ + √Σb ≤ 1`. `None` when the shape has
    /// no such form.
    pub fn normalize(&self, it: &Item) -> Option<(f64, f64)> {
        let v = self.capacity;
        match self.shape {
            Shape::Upper => Some((it.upper / v, 0.0)),
            Shape::Linear => Some(((it.mean + self.d * it.sqrt_b) / v, 0.0)),
            Shape::Power(0.5) => Some((it.mean / v, it.b * self.d * self.d / (v * v))),
            Shape::Power(_) | Shape::Log => None,
        }
    }
}

/// Fraction of `samples` joint realizations whose total usage stays within
/// `spec.capacity`.
pub fn chance_satisfaction<R: Rng + ?Sized>(
    jobs: &[&Job],
    spec: &ConstraintSpec,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    let v = spec.capacity;
    if jobs.iter().map(|j| j.upper()).sum::<f64>() <= v {
        return Ok(1.0);
    }
    let mut ok = 0usize;
    for _ in 0..samples {
        let total: f64 = jobs.iter().map(|j| j.sample(rng)).sum();
        if total <= v {
            ok += 1;
        }
    }
    Ok(ok as f64 / samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::UsageDistribution;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn symmetric_job(id: u64) -> Job {
        Job::new(id, 1.0, UsageDistribution::two_point(0.3, 1.0, 0.65).unwrap()).unwrap()
    }

    fn load_of(model: &CapacityModel, jobs: &[Job]) -> LoadSummary {
        LoadSummary::of(&model.items(jobs))
    }

    #[test]
    fn names_parse_back() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            assert_eq!(serde_json::to_value(v).unwrap(), v.name());
        }
        assert_eq!("robust".parse::<RiskFamily>().unwrap(), RiskFamily::Robust);
        assert!("nope".parse::<Variant>().is_err());
    }

    #[test]
    fn d_of_alpha_values() {
        let h = ConstraintSpec::new(Variant::Hoeffding, 0.99, 30.0);
        assert_abs_diff_eq!(h.d_of_alpha().unwrap(), (-0.5 * 0.01f64.ln()).sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(h.d_of_alpha().unwrap(), 1.51743, epsilon = 5e-6);
        let r = ConstraintSpec::new(Variant::RobustMeanVar, 0.99, 30.0);
        assert_abs_diff_eq!(r.d_of_alpha().unwrap(), 99f64.sqrt(), epsilon = 1e-12);
        let g = ConstraintSpec::new(Variant::Gaussian, 0.5, 30.0);
        assert_abs_diff_eq!(g.d_of_alpha().unwrap(), 0.0, epsilon = 1e-12);
        let g = ConstraintSpec::new(Variant::LinearGaussian, 0.99, 30.0);
        assert_abs_diff_eq!(g.d_of_alpha().unwrap(), 2.326_347_874_040_841, epsilon = 1e-9);
        assert_eq!(ConstraintSpec::no_overcommit(30.0).d_of_alpha().unwrap(), 0.0);
    }

    #[test]
    fn degenerate_confidence_is_an_error() {
        for v in Variant::ALL {
            let r = ConstraintSpec::new(v, 1.0, 30.0).d_of_alpha();
            if v == Variant::NoOvercommit {
                assert!(r.is_ok());
            } else {
                assert!(matches!(r, Err(Error::DegenerateConfidence { .. })), "{v}");
            }
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(ConstraintSpec::new(Variant::Gaussian, 0.3, 30.0).validate().is_err());
        assert!(ConstraintSpec::new(Variant::Hoeffding, 0.3, 30.0).validate().is_ok());
        assert!(ConstraintSpec::new(Variant::Hoeffding, 0.9, 0.0).validate().is_err());
        assert!(ConstraintSpec::new(Variant::Hoeffding, 0.0, 1.0).validate().is_err());
        assert!(ConstraintSpec::p_norm(0.4, RiskFamily::Hoeffding, 0.9, 1.0).validate().is_err());
        assert!(ConstraintSpec::p_norm(1.1, RiskFamily::Hoeffding, 0.9, 1.0).validate().is_err());
    }

    #[test]
    fn b_values() {
        let job = symmetric_job(0);
        let det = Job::new(1, 3.0, UsageDistribution::point(0.5).unwrap()).unwrap();
        for v in Variant::ALL {
            let spec = ConstraintSpec::new(v, 0.9, 30.0);
            assert_eq!(spec.b_value(&det), 0.0, "{v}");
        }
        let h = ConstraintSpec::new(Variant::Hoeffding, 0.9, 30.0);
        assert_abs_diff_eq!(h.b_value(&job), 0.49, epsilon = 1e-12);
        let g = ConstraintSpec::new(Variant::Gaussian, 0.9, 30.0);
        assert_abs_diff_eq!(g.b_value(&job), 0.1225, epsilon = 1e-12);
        assert_eq!(ConstraintSpec::no_overcommit(30.0).b_value(&job), 0.0);
    }

    #[test]
    fn empty_load_is_zero() {
        for v in Variant::ALL {
            let model = ConstraintSpec::new(v, if v == Variant::NoOvercommit { 1.0 } else { 0.9 }, 30.0)
                .model()
                .unwrap();
            assert_eq!(model.effective_load(&LoadSummary::default()), 0.0);
        }
    }

    #[test]
    fn identical_jobs_example() {
        let model = ConstraintSpec::new(Variant::Hoeffding, 0.992, 30.0).model().unwrap();
        let d = (-0.5 * 0.008f64.ln()).sqrt();
        let jobs: Vec<Job> = (0..37).map(symmetric_job).collect();
        let l36 = load_of(&model, &jobs[..36]);
        let l37 = load_of(&model, &jobs);
        assert_abs_diff_eq!(model.effective_load(&l36), 23.4 + d * 4.2, epsilon = 1e-9);
        assert_abs_diff_eq!(model.effective_load(&l36), 29.926, epsilon = 1e-3);
        assert_abs_diff_eq!(model.effective_load(&l37), 30.67, epsilon = 1e-2);
        assert!(model.is_feasible(&l36));
        assert!(!model.is_feasible(&l37));
        assert!(!model.fits(&l36, &model.item(&jobs[36])));
    }

    #[test]
    fn clipping_caps_at_sum_upper() {
        let model = ConstraintSpec::new(Variant::RobustMeanVar, 0.999, 30.0).model().unwrap();
        let jobs: Vec<Job> = (0..3).map(symmetric_job).collect();
        let load = load_of(&model, &jobs);
        assert!(model.raw_load(&load) > 3.0);
        assert_eq!(model.effective_load(&load), load.sum_upper);
        let unclipped = ConstraintSpec::new(Variant::RobustMeanVar, 0.999, 30.0)
            .with_clip(false)
            .model()
            .unwrap();
        assert_eq!(unclipped.effective_load(&load), unclipped.raw_load(&load));
    }

    #[test]
    fn singleton_fits_iff_upper_within_capacity() {
        let big = Job::new(0, 32.0, UsageDistribution::two_point(0.3, 1.0, 0.65).unwrap()).unwrap();
        let small = Job::new(1, 30.0, UsageDistribution::two_point(0.3, 1.0, 0.65).unwrap()).unwrap();
        for v in Variant::ALL {
            let model = ConstraintSpec::new(v, if v == Variant::NoOvercommit { 1.0 } else { 0.999 }, 30.0)
                .model()
                .unwrap();
            let empty = LoadSummary::default();
            assert!(model.fits(&empty, &model.item(&small)), "{v}");
            assert!(!model.fits(&empty, &model.item(&big)), "{v}");
        }
    }

    #[test]
    fn normalized_coordinates() {
        let model = ConstraintSpec::new(Variant::Hoeffding, 0.992, 30.0)
            .with_clip(false)
            .model()
            .unwrap();
        let jobs: Vec<Job> = (0..36).map(symmetric_job).collect();
        let items = model.items(&jobs);
        let (mu, b): (f64, f64) = items
            .iter()
            .map(|it| model.normalize(it).unwrap())
            .fold((0.0, 0.0), |a, x| (a.0 + x.0, a.1 + x.1));
        let load = LoadSummary::of(&items);
        assert_abs_diff_eq!(mu + b.sqrt(), model.effective_load(&load) / 30.0, epsilon = 1e-12);
    }

    /// Exact `P(#high ≥ k)` for `n` fair coin flips.
    fn binomial_upper_tail(n: u32, k: u32) -> f64 {
        let mut c = 1.0f64;
        let mut total = 0.0;
        for i in 0..=n {
            if i >= k {
                total += c;
            }
            c = c * (n - i) as f64 / (i + 1) as f64;
        }
        total / 2f64.powi(n as i32)
    }

    #[test]
    fn satisfaction_matches_binomial_tail() {
        let jobs: Vec<Job> = (0..36).map(symmetric_job).collect();
        let refs: Vec<&Job> = jobs.iter().collect();
        let spec = ConstraintSpec::new(Variant::Hoeffding, 0.992, 30.0);
        // 10.8 + 0.7·h > 30 ⇔ h ≥ 28.
        let p_violate = binomial_upper_tail(36, 28);
        assert_abs_diff_eq!(p_violate, 40_999_516.0 / 2f64.powi(36), epsilon = 1e-15);
        let n = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sat = chance_satisfaction(&refs, &spec, n, &mut rng).unwrap();
        let se = (p_violate * (1.0 - p_violate) / n as f64).sqrt();
        assert!((sat - (1.0 - p_violate)).abs() <= 3.0 * se, "{sat}");
        assert!(sat >= 0.992);
    }

    #[test]
    fn satisfaction_trivial_cases() {
        let jobs: Vec<Job> = (0..30).map(symmetric_job).collect();
        let refs: Vec<&Job> = jobs.iter().collect();
        let spec = ConstraintSpec::new(Variant::Hoeffding, 0.9, 30.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(chance_satisfaction(&refs, &spec, 100, &mut rng).unwrap(), 1.0);
        assert_eq!(chance_satisfaction(&refs[..1], &spec, 100, &mut rng).unwrap(), 1.0);
        assert!(chance_satisfaction(&refs, &spec, 0, &mut rng).is_err());
    }

    fn arb_items(max: usize) -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
        prop::collection::vec((0.01f64..2.0, 0.0f64..1.0, 0.0f64..2.0), 0..max)
    }

    fn to_items(raw: &[(f64, f64, f64)]) -> Vec<Item> {
        raw.iter()
            .enumerate()
            .map(|(i, &(m, b, extra))| Item {
                id: i as u64,
                mean: m,
                b,
                sqrt_b: b.sqrt(),
                upper: m + extra,
            })
            .collect()
    }

    const BUFFERED: [Variant; 8] = [
        Variant::Gaussian,
        Variant::Hoeffding,
        Variant::RobustMeanVar,
        Variant::LinearGaussian,
        Variant::LinearHoeffding,
        Variant::LinearRobust,
        Variant::PNorm,
        Variant::LogBuffer,
    ];

    proptest! {
        #[test]
        fn monotone_in_alpha(raw in arb_items(20), a1 in 0.5f64..0.9999, a2 in 0.5f64..0.9999, p in 0.5f64..=1.0) {
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            let load = LoadSummary::of(&to_items(&raw));
            for v in BUFFERED {
                let mk = |a| ConstraintSpec { p_exponent: p, ..ConstraintSpec::new(v, a, 10.0) }.model().unwrap();
                prop_assert!(mk(lo).effective_load(&load) <= mk(hi).effective_load(&load));
            }
        }

        #[test]
        fn diminishing_increments(raw in arb_items(20), split in 0usize..20, extra in (0.01f64..2.0, 0.0f64..1.0), alpha in 0.5f64..0.999, p in 0.5f64..=1.0) {
            let items = to_items(&raw);
            let k = split.min(items.len());
            let small = LoadSummary::of(&items[..k]);
            let large = LoadSummary::of(&items);
            let j = Item::abstract_item(99, extra.0, extra.1);
            for v in [Variant::Hoeffding, Variant::PNorm, Variant::LogBuffer] {
                let m = ConstraintSpec { p_exponent: p, ..ConstraintSpec::new(v, alpha, 10.0) }
                    .with_clip(false).model().unwrap();
                let d_large = m.effective_load(&large.with(&j)) - m.effective_load(&large);
                let d_small = m.effective_load(&small.with(&j)) - m.effective_load(&small);
                prop_assert!(d_large <= d_small + 1e-9, "{v}: {d_large} > {d_small}");
            }
        }

        #[test]
        fn linear_is_more_conservative(raw in arb_items(20), alpha in 0.5f64..0.9999) {
            let load = LoadSummary::of(&to_items(&raw));
            for v in [Variant::Gaussian, Variant::Hoeffding, Variant::RobustMeanVar] {
                let sq = ConstraintSpec::new(v, alpha, 10.0).with_clip(false).model().unwrap();
                let lin = ConstraintSpec::new(v.counterpart().unwrap(), alpha, 10.0).with_clip(false).model().unwrap();
                prop_assert!(lin.effective_load(&load) >= sq.effective_load(&load) - 1e-9);
            }
        }

        #[test]
        fn p_half_matches_square_root(raw in arb_items(20), alpha in 0.5f64..0.9999) {
            let load = LoadSummary::of(&to_items(&raw));
            for (fam, v) in [(RiskFamily::Gaussian, Variant::Gaussian), (RiskFamily::Hoeffding, Variant::Hoeffding), (RiskFamily::Robust, Variant::RobustMeanVar)] {
                let a = ConstraintSpec::p_norm(0.5, fam, alpha, 10.0).model().unwrap();
                let b = ConstraintSpec::new(v, alpha, 10.0).model().unwrap();
                prop_assert_eq!(a.effective_load(&load), b.effective_load(&load));
            }
        }

        #[test]
        fn never_worse_than_no_overcommit(raw in arb_items(20), alpha in 0.5f64..0.9999) {
            let load = LoadSummary::of(&to_items(&raw));
            let base = ConstraintSpec::no_overcommit(10.0).model().unwrap().effective_load(&load);
            for v in BUFFERED {
                let m = ConstraintSpec::new(v, alpha, 10.0).model().unwrap();
                prop_assert!(m.effective_load(&load) <= base);
            }
        }
    }
}
