//! Latent behavioural traits of the travelling population.
//!
//! Each traveller carries a value of time `β_t` (currency per hour) and a
//! penalty for sharing `β_s` (a multiplier on in-vehicle plus pickup time).
//! The operator does not observe either, only their population distribution:
//! a finite mixture of classes, each an independent bivariate normal.
//!
//! Pricing works on a finite support, so the mixture is discretized into a
//! [`DiscretizedGrid`] of atoms with joint probability weights.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

const SHARE_TOLERANCE: f64 = 1e-9;
const ATOM_MERGE: f64 = 1e-12;

/// Selects one marginal of the two-dimensional trait distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Marginal {
    ValueOfTime,
    PenaltyForSharing,
}

/// One latent class. Within a class `β_t` and `β_s` are independent normals.
///
/// A zero standard deviation is accepted and treated as a point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehavioralClass {
    pub mean_vot: f64,
    pub std_vot: f64,
    pub mean_pfs: f64,
    pub std_pfs: f64,
    pub share: f64,
}

impl BehavioralClass {
    pub fn new(mean_vot: f64, std_vot: f64, mean_pfs: f64, std_pfs: f64, share: f64) -> Result<Self> {
        let class = BehavioralClass { mean_vot, std_vot, mean_pfs, std_pfs, share };
        class.validate()?;
        Ok(class)
    }

    fn validate(&self) -> Result<()> {
        let all = [self.mean_vot, self.std_vot, self.mean_pfs, self.std_pfs, self.share];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("behavioural class parameters must be finite"));
        }
        if self.std_vot < 0.0 || self.std_pfs < 0.0 {
            return Err(Error::domain("behavioural class standard deviations must be >= 0"));
        }
        if !(self.share > 0.0 && self.share <= 1.0) {
            return Err(Error::domain(format!("class share {} outside (0, 1]", self.share)));
        }
        Ok(())
    }

    fn params(&self, which: Marginal) -> (f64, f64) {
        match which {
            Marginal::ValueOfTime => (self.mean_vot, self.std_vot),
            Marginal::PenaltyForSharing => (self.mean_pfs, self.std_pfs),
        }
    }
}

/// Lower bounds applied to trait values. Values below the floor are moved onto
/// the floor (censoring), so the floor itself may carry probability mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truncation {
    pub vot_floor: Option<f64>,
    pub pfs_floor: Option<f64>,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation { vot_floor: Some(0.0), pfs_floor: Some(1.0) }
    }
}

impl Truncation {
    pub fn none() -> Self {
        Truncation { vot_floor: None, pfs_floor: None }
    }

    fn floor(&self, which: Marginal) -> Option<f64> {
        match which {
            Marginal::ValueOfTime => self.vot_floor,
            Marginal::PenaltyForSharing => self.pfs_floor,
        }
    }

    fn apply(&self, which: Marginal, x: f64) -> f64 {
        match self.floor(which) {
            Some(f) => x.max(f),
            None => x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehavioralMixture {
    classes: Vec<BehavioralClass>,
    truncation: Truncation,
}

impl BehavioralMixture {
    pub fn new(classes: Vec<BehavioralClass>, truncation: Truncation) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::domain("mixture needs at least one class"));
        }
        for c in &classes {
            c.validate()?;
        }
        let total: f64 = classes.iter().map(|c| c.share).sum();
        if (total - 1.0).abs() > SHARE_TOLERANCE {
            return Err(Error::domain(format!("class shares sum to {total}, expected 1")));
        }
        Ok(BehavioralMixture { classes, truncation })
    }

    /// Four latent classes fitted to a Dutch stated-preference survey and
    /// used for a Manhattan demand study: value of time in $/h, penalty for
    /// sharing as a multiplier.
    // 0.318 is a fitted standard deviation, not 1/π
    #[allow(clippy::approx_constant)]
    pub fn nyc_4class() -> Self {
        let classes = vec![
            BehavioralClass { mean_vot: 16.98, std_vot: 0.318, mean_pfs: 1.22, std_pfs: 0.082, share: 0.29 },
            BehavioralClass { mean_vot: 14.02, std_vot: 0.201, mean_pfs: 1.135, std_pfs: 0.071, share: 0.28 },
            BehavioralClass { mean_vot: 26.25, std_vot: 5.777, mean_pfs: 1.049, std_pfs: 0.06, share: 0.24 },
            BehavioralClass { mean_vot: 7.78, std_vot: 1.0, mean_pfs: 1.18, std_pfs: 0.076, share: 0.19 },
        ];
        BehavioralMixture::new(classes, Truncation::default()).expect("preset is valid")
    }

    /// Looks up a named preset.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "nyc-4class" => Ok(Self::nyc_4class()),
            other => Err(Error::Config(format!("unknown behavioural preset `{other}`"))),
        }
    }

    pub fn classes(&self) -> &[BehavioralClass] {
        &self.classes
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn with_truncation(mut self, truncation: Truncation) -> Self {
        self.truncation = truncation;
        self
    }

    /// Mixture cdf of one marginal, after censoring at the floor.
    pub fn cdf(&self, which: Marginal, x: f64) -> f64 {
        if let Some(floor) = self.truncation.floor(which) {
            if x < floor {
                return 0.0;
            }
        }
        self.classes
            .iter()
            .map(|c| {
                let (mean, std) = c.params(which);
                c.share * normal_cdf(mean, std, x)
            })
            .sum()
    }

    /// Mean of one marginal, accounting for censoring at the floor.
    pub fn mean(&self, which: Marginal) -> f64 {
        let floor = self.truncation.floor(which);
        self.classes
            .iter()
            .map(|c| {
                let (mean, std) = c.params(which);
                c.share * censored_normal_mean(mean, std, floor)
            })
            .sum()
    }

    /// Generalised inverse of the marginal cdf: the smallest `x` with
    /// `cdf(x) >= alpha`, found by bracketing and bisection.
    pub fn quantile(&self, which: Marginal, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!("quantile level {alpha} outside (0, 1)")));
        }
        let floor = self.truncation.floor(which);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in &self.classes {
            let (mean, std) = c.params(which);
            lo = lo.min(mean - 40.0 * std - 1.0);
            hi = hi.max(mean + 40.0 * std + 1.0);
        }
        if let Some(f) = floor {
            lo = lo.min(f - 1.0);
            hi = hi.max(f + 1.0);
        }
        // invariant: cdf(lo) < alpha <= cdf(hi)
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(which, mid) >= alpha {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Discretizes every class into equal-probability quantile midpoints
    /// (`q = (j - 0.5) / n`) per dimension and merges the class grids.
    pub fn discretize(&self, n_vot: usize, n_pfs: usize) -> Result<DiscretizedGrid> {
        if n_vot == 0 || n_pfs == 0 {
            return Err(Error::domain("discretization needs at least one point per dimension"));
        }
        let per_class: Vec<(Vec<f64>, Vec<f64>)> = self
            .classes
            .iter()
            .map(|c| {
                (
                    self.class_atoms(c, Marginal::ValueOfTime, n_vot),
                    self.class_atoms(c, Marginal::PenaltyForSharing, n_pfs),
                )
            })
            .collect();

        let vot_points = merge_sorted(per_class.iter().flat_map(|(v, _)| v.iter().copied()));
        let pfs_points = merge_sorted(per_class.iter().flat_map(|(_, s)| s.iter().copied()));

        let n_s = pfs_points.len();
        let mut weights = vec![0.0; vot_points.len() * n_s];
        for (class, (vots, pfss)) in self.classes.iter().zip(&per_class) {
            let w = class.share / (n_vot * n_pfs) as f64;
            for &v in vots {
                let i = locate(&vot_points, v);
                for &s in pfss {
                    let j = locate(&pfs_points, s);
                    weights[i * n_s + j] += w;
                }
            }
        }
        DiscretizedGrid::new(vot_points, pfs_points, weights)
    }

    fn class_atoms(&self, class: &BehavioralClass, which: Marginal, n: usize) -> Vec<f64> {
        let (mean, std) = class.params(which);
        (1..=n)
            .map(|j| {
                let q = (j as f64 - 0.5) / n as f64;
                let x = if std > 0.0 { mean + std * standard_normal().inverse_cdf(q) } else { mean };
                self.truncation.apply(which, x)
            })
            .collect()
    }
}

fn standard_normal() -> Normal {
    Normal::standard()
}

fn normal_cdf(mean: f64, std: f64, x: f64) -> f64 {
    if std > 0.0 {
        standard_normal().cdf((x - mean) / std)
    } else if x >= mean {
        1.0
    } else {
        0.0
    }
}

// E[max(X, c)] for X ~ N(mean, std).
fn censored_normal_mean(mean: f64, std: f64, floor: Option<f64>) -> f64 {
    let Some(c) = floor else { return mean };
    if std == 0.0 {
        return mean.max(c);
    }
    let a = (mean - c) / std;
    let phi = (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt();
    c + (mean - c) * standard_normal().cdf(a) + std * phi
}

fn merge_sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|b, a| (*b - *a).abs() <= ATOM_MERGE * a.abs().max(1.0));
    v
}

fn locate(points: &[f64], x: f64) -> usize {
    let i = points.partition_point(|&p| p < x - ATOM_MERGE * x.abs().max(1.0));
    debug_assert!(i < points.len());
    i.min(points.len() - 1)
}

/// Finite joint support of `(β_t, β_s)` with probability weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedGrid {
    vot_points: Vec<f64>,
    pfs_points: Vec<f64>,
    /// Row-major `vot_points.len() x pfs_points.len()`.
    weights: Vec<f64>,
}

/// One support point of a [`DiscretizedGrid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub vot: f64,
    pub pfs: f64,
    pub weight: f64,
}

impl DiscretizedGrid {
    pub fn new(vot_points: Vec<f64>, pfs_points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if vot_points.is_empty() || pfs_points.is_empty() {
            return Err(Error::domain("grid needs at least one atom per dimension"));
        }
        let strictly_increasing = |p: &[f64]| p.windows(2).all(|w| w[0] < w[1]);
        if !strictly_increasing(&vot_points) || !strictly_increasing(&pfs_points) {
            return Err(Error::domain("grid atoms must be strictly increasing"));
        }
        if vot_points.iter().chain(&pfs_points).any(|v| !v.is_finite()) {
            return Err(Error::domain("grid atoms must be finite"));
        }
        if weights.len() != vot_points.len() * pfs_points.len() {
            return Err(Error::contract(format!(
                "weight matrix has {} entries, expected {}x{}",
                weights.len(),
                vot_points.len(),
                pfs_points.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::domain("grid weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SHARE_TOLERANCE {
            return Err(Error::domain(format!("grid weights sum to {total}, expected 1")));
        }
        Ok(DiscretizedGrid { vot_points, pfs_points, weights })
    }

    pub fn vot_points(&self) -> &[f64] {
        &self.vot_points
    }

    pub fn pfs_points(&self) -> &[f64] {
        &self.pfs_points
    }

    pub fn weight(&self, vot_index: usize, pfs_index: usize) -> f64 {
        self.weights[vot_index * self.pfs_points.len() + pfs_index]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Atoms with positive weight, row-major.
    pub fn atoms(&self) -> impl Iterator<Item = Atom> + '_ {
        let n_s = self.pfs_points.len();
        self.weights.iter().enumerate().filter(|(_, w)| **w > 0.0).map(move |(k, &weight)| Atom {
            vot: self.vot_points[k / n_s],
            pfs: self.pfs_points[k % n_s],
            weight,
        })
    }

    pub fn mean(&self, which: Marginal) -> f64 {
        self.atoms().map(|a| a.weight * pick(a, which)).sum()
    }

    pub fn variance(&self, which: Marginal) -> f64 {
        let m = self.mean(which);
        self.atoms().map(|a| a.weight * (pick(a, which) - m).powi(2)).sum()
    }

    pub fn sampler(&self) -> GridSampler<'_> {
        let index = WeightedIndex::new(&self.weights).expect("grid weights validated at construction");
        GridSampler { grid: self, index }
    }
}

fn pick(a: Atom, which: Marginal) -> f64 {
    match which {
        Marginal::ValueOfTime => a.vot,
        Marginal::PenaltyForSharing => a.pfs,
    }
}

/// Draws `(β_t, β_s)` pairs from a grid.
pub struct GridSampler<'a> {
    grid: &'a DiscretizedGrid,
    index: WeightedIndex<f64>,
}

impl GridSampler<'_> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let k = self.index.sample(rng);
        let n_s = self.grid.pfs_points.len();
        (self.grid.vot_points[k / n_s], self.grid.pfs_points[k % n_s])
    }
}

/// How the penalty for sharing grows with the number of co-travellers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DegreeRule {
    /// `β_{s,k} = 1 + (β_s - 1)(1 + ε(k - 2))`.
    Linear { epsilon: f64 },
    /// `β_{s,k} = β_s` for every degree.
    Constant,
}

impl Default for DegreeRule {
    fn default() -> Self {
        DegreeRule::Linear { epsilon: 0.1 }
    }
}

/// Penalty for sharing a ride of degree `k` (i.e. with `k - 1` co-travellers).
pub fn pfs_for_degree(beta_s: f64, k: usize, rule: DegreeRule) -> Result<f64> {
    if k < 2 {
        return Err(Error::domain(format!("ride degree {k} has no sharing penalty")));
    }
    Ok(match rule {
        DegreeRule::Linear { epsilon } => 1.0 + (beta_s - 1.0) * (1.0 + epsilon * (k - 2) as f64),
        DegreeRule::Constant => beta_s,
    })
}
