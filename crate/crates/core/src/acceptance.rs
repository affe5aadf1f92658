//! Acceptance probability as a function of the personalised discount.
//!
//! A traveller with traits `(β_t, β_s)` accepts a shared ride at discount `λ`
//! when the shared utility is at least the private one:
//!
//! ```text
//! λ ρ d_i  >=  β_t (β_{s,k} (t̂_i + t̂ᵖ_i) - t_i)
//! ```
//!
//! Over a discretized trait grid every atom contributes one threshold, so the
//! acceptance probability is a right-continuous, non-decreasing step function
//! of `λ`. Only its breakpoints matter when optimizing: between two of them
//! the acceptance is flat and a lower discount earns more.

use serde::{Deserialize, Serialize};

use crate::demand::TravellerId;
use crate::error::{Error, Result};
use crate::population::{pfs_for_degree, DegreeRule, DiscretizedGrid};
use crate::shareability::ShareableRide;

const MERGE_EPS: f64 = 1e-12;
const SATURATED: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceCurve {
    /// Strictly increasing discounts at which the probability jumps.
    pub breakpoints: Vec<f64>,
    /// Acceptance probability on `[breakpoints[j], breakpoints[j + 1])`.
    pub cum_probs: Vec<f64>,
    /// Acceptance probability below the first breakpoint.
    pub base_prob: f64,
}

impl AcceptanceCurve {
    pub fn from_steps(base_prob: f64, breakpoints: Vec<f64>, cum_probs: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != cum_probs.len() {
            return Err(Error::contract("breakpoints and probabilities differ in length"));
        }
        if !breakpoints.windows(2).all(|w| w[0] < w[1]) || breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::domain("breakpoints must be finite and strictly increasing"));
        }
        let in_unit = |p: f64| (0.0..=1.0).contains(&p);
        if !in_unit(base_prob) || !cum_probs.iter().copied().all(in_unit) {
            return Err(Error::domain("probabilities must lie in [0, 1]"));
        }
        if cum_probs.first().is_some_and(|&p| p < base_prob) || !cum_probs.windows(2).all(|w| w[0] <= w[1]) {
            return Err(Error::domain("acceptance must be non-decreasing"));
        }
        Ok(AcceptanceCurve { breakpoints, cum_probs, base_prob })
    }

    /// Probability of accepting at discount `lambda`.
    pub fn evaluate(&self, lambda: f64) -> f64 {
        match self.breakpoints.partition_point(|&b| b <= lambda) {
            0 => self.base_prob,
            j => self.cum_probs[j - 1],
        }
    }

    /// Discount at which acceptance first reaches one, if it does.
    pub fn saturation(&self) -> Option<f64> {
        if self.base_prob >= SATURATED {
            return Some(0.0);
        }
        self.cum_probs.iter().position(|&p| p >= SATURATED).map(|j| self.breakpoints[j])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Acceptance curve of one ride member over the trait grid.
pub fn build_curve(
    ride: &ShareableRide,
    member: TravellerId,
    grid: &DiscretizedGrid,
    fare_per_km: f64,
    rule: DegreeRule,
) -> Result<AcceptanceCurve> {
    let i = ride
        .member_index(member)
        .ok_or_else(|| Error::contract(format!("traveller {member} is not in ride {}", ride.id)))?;
    let degree = ride.degree();
    let d = ride.private_km[i];
    if !(d > 0.0) {
        return Err(Error::domain("private distance must be positive"));
    }
    let exposed = ride.shared_time_s[i] + ride.pickup_delay_s[i];
    let t = ride.private_time_s[i];

    let mut base = 0.0;
    let mut steps: Vec<(f64, f64)> = Vec::new();
    for atom in grid.atoms() {
        let pfs = pfs_for_degree(atom.pfs, degree, rule)?;
        let disutility = atom.vot / 3600.0 * (pfs * exposed - t);
        let threshold = disutility / (fare_per_km * d);
        if threshold <= 0.0 {
            base += atom.weight;
        } else {
            steps.push((threshold, atom.weight));
        }
    }
    steps.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut breakpoints: Vec<f64> = Vec::with_capacity(steps.len());
    let mut cum_probs: Vec<f64> = Vec::with_capacity(steps.len());
    let mut acc = base;
    for (lambda, w) in steps {
        acc += w;
        match breakpoints.last() {
            Some(&last) if lambda - last <= MERGE_EPS => *cum_probs.last_mut().unwrap() = acc.min(1.0),
            _ => {
                breakpoints.push(lambda);
                cum_probs.push(acc.min(1.0));
            }
        }
    }
    AcceptanceCurve::from_steps(base.min(1.0), breakpoints, cum_probs)
}

/// Curves for every member of a shared ride, in member order.
pub fn ride_curves(
    ride: &ShareableRide,
    grid: &DiscretizedGrid,
    fare_per_km: f64,
    rule: DegreeRule,
) -> Result<Vec<AcceptanceCurve>> {
    ride.members.iter().map(|&m| build_curve(ride, m, grid, fare_per_km, rule)).collect()
}

/// Probability that every member accepts; members decide independently.
pub fn ride_acceptance(curves: &[AcceptanceCurve], discounts: &[f64]) -> Result<f64> {
    if curves.len() != discounts.len() {
        return Err(Error::contract(format!("{} curves but {} discounts", curves.len(), discounts.len())));
    }
    Ok(curves.iter().zip(discounts).map(|(c, &l)| c.evaluate(l)).product())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CandidateOptions {
    /// Maximum candidates per member including the guaranteed discount;
    /// `0` keeps every breakpoint.
    pub thinning: usize,
    /// Breakpoints above this discount are never offered.
    pub lambda_cap: f64,
}

impl Default for CandidateOptions {
    fn default() -> Self {
        CandidateOptions { thinning: 20, lambda_cap: 1.0 }
    }
}

impl CandidateOptions {
    pub fn unthinned() -> Self {
        CandidateOptions { thinning: 0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thinning == 1 {
            return Err(Error::domain("thinning must be 0 (off) or at least 2"));
        }
        if !(self.lambda_cap > 0.0 && self.lambda_cap <= 1.0) {
            return Err(Error::domain("lambda_cap must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Discounts worth trying for one member: the guaranteed discount plus every
/// breakpoint above it, up to the first one where acceptance is certain.
pub fn candidate_discounts(curve: &AcceptanceCurve, lambda_hat: f64, opts: CandidateOptions) -> Vec<f64> {
    let mut out = vec![lambda_hat];
    if curve.evaluate(lambda_hat) >= SATURATED {
        return out;
    }
    let start = curve.breakpoints.partition_point(|&b| b <= lambda_hat);
    let mut pool: Vec<usize> = Vec::new();
    for j in start..curve.breakpoints.len() {
        if curve.breakpoints[j] > opts.lambda_cap {
            break;
        }
        pool.push(j);
        if curve.cum_probs[j] >= SATURATED {
            break;
        }
    }
    if opts.thinning >= 2 && pool.len() + 1 > opts.thinning {
        pool = thin(curve, &pool, opts.thinning - 1);
    }
    out.extend(pool.iter().map(|&j| curve.breakpoints[j]));
    out
}

// Keeps `budget` breakpoints spread at roughly equal acceptance increments,
// always including the first and the last.
fn thin(curve: &AcceptanceCurve, pool: &[usize], budget: usize) -> Vec<usize> {
    let last = *pool.last().unwrap();
    if budget <= 1 {
        return vec![last];
    }
    let p_lo = curve.cum_probs[pool[0]];
    let p_hi = curve.cum_probs[last];
    let mut keep = vec![pool[0]];
    for step in 1..budget - 1 {
        let target = p_lo + (p_hi - p_lo) * step as f64 / (budget - 1) as f64;
        let pos = pool.partition_point(|&j| curve.cum_probs[j] < target);
        let j = pool[pos.min(pool.len() - 1)];
        if *keep.last().unwrap() != j && j != last {
            keep.push(j);
        }
    }
    keep.push(last);
    keep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::BehavioralMixture;
    use crate::shareability::Stop;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair_ride(that: f64, tp: f64, t: f64, d: f64) -> ShareableRide {
        ShareableRide::new(
            vec![1, 2],
            vec![Stop::pickup(1), Stop::pickup(2), Stop::dropoff(1), Stop::dropoff(2)],
            d * 1.5,
            vec![that, t],
            vec![tp, 0.0],
            vec![d, d],
            vec![t, t],
        )
        .unwrap()
    }

    #[test]
    fn no_disutility_means_certain_acceptance() {
        let ride = pair_ride(600.0, 0.0, 600.0, 5.0);
        let grid = DiscretizedGrid::new(vec![5.0, 15.0, 30.0], vec![1.0], vec![0.2, 0.5, 0.3]).unwrap();
        let c = build_curve(&ride, 1, &grid, 1.5, DegreeRule::default()).unwrap();
        assert_eq!(c.base_prob, 1.0);
        assert!(c.breakpoints.is_empty());
        for l in [0.0, 0.3, 1.0] {
            assert_eq!(c.evaluate(l), 1.0);
        }
    }

    #[test]
    fn single_atom_is_one_step() {
        let ride = pair_ride(900.0, 60.0, 600.0, 5.0);
        let grid = DiscretizedGrid::new(vec![20.0], vec![1.2], vec![1.0]).unwrap();
        let c = build_curve(&ride, 1, &grid, 1.5, DegreeRule::default()).unwrap();
        let y = 20.0 / 3600.0 * (1.2 * 960.0 - 600.0);
        let step = y / (1.5 * 5.0);
        assert_eq!(c.breakpoints.len(), 1);
        assert!((c.breakpoints[0] - step).abs() < 1e-15);
        assert_eq!(c.evaluate(step - 1e-9), 0.0);
        assert_eq!(c.evaluate(step), 1.0);
        assert_eq!(c.evaluate(step + 0.5), 1.0);
    }

    #[test]
    fn non_member_is_a_contract_error() {
        let ride = pair_ride(900.0, 60.0, 600.0, 5.0);
        let grid = DiscretizedGrid::new(vec![20.0], vec![1.2], vec![1.0]).unwrap();
        assert!(matches!(build_curve(&ride, 7, &grid, 1.5, DegreeRule::default()), Err(Error::Contract(_))));
    }

    #[test]
    fn curve_matches_monte_carlo_over_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let vot: Vec<f64> = (0..8).map(|i| 5.0 + 4.0 * i as f64 + rng.random::<f64>()).collect();
        let pfs: Vec<f64> = (0..8).map(|i| 1.0 + 0.05 * i as f64 + 0.01 * rng.random::<f64>()).collect();
        let raw: Vec<f64> = (0..64).map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let grid = DiscretizedGrid::new(vot, pfs, raw.iter().map(|w| w / total).collect()).unwrap();
        let ride = pair_ride(780.0, 90.0, 600.0, 5.0);
        let c = build_curve(&ride, 1, &grid, 1.5, DegreeRule::default()).unwrap();

        let n = 1_000_000;
        let sampler = grid.sampler();
        let thresholds: Vec<f64> = (0..n)
            .map(|_| {
                let (v, s) = sampler.sample(&mut rng);
                let pfs2 = pfs_for_degree(s, 2, DegreeRule::default()).unwrap();
                v / 3600.0 * (pfs2 * 870.0 - 600.0) / (1.5 * 5.0)
            })
            .collect();
        for probe in 0..50 {
            let lambda = probe as f64 * 0.02;
            let freq = thresholds.iter().filter(|&&y| y <= lambda).count() as f64 / n as f64;
            let p = c.evaluate(lambda);
            let se = (p * (1.0 - p) / n as f64).sqrt().max(1.0 / n as f64);
            assert!((freq - p).abs() <= 3.0 * se, "lambda {lambda}: curve {p} vs mc {freq}");
        }
    }

    #[test]
    fn ride_acceptance_examples() {
        let step = |p: f64| AcceptanceCurve::from_steps(0.0, vec![0.1], vec![p]).unwrap();
        let v = ride_acceptance(&[step(0.7), step(0.95)], &[0.2, 0.2]).unwrap();
        assert!((v - 0.665).abs() < 1e-15);
        assert_eq!(ride_acceptance(&[step(0.0), step(0.95)], &[0.2, 0.2]).unwrap(), 0.0);
        assert_eq!(ride_acceptance(&[step(1.0), step(1.0), step(1.0)], &[0.2; 3]).unwrap(), 1.0);
        assert!(matches!(ride_acceptance(&[step(1.0)], &[0.1, 0.2]), Err(Error::Contract(_))));
    }

    #[test]
    fn candidates_examples() {
        let saturated = AcceptanceCurve::from_steps(1.0, vec![], vec![]).unwrap();
        assert_eq!(candidate_discounts(&saturated, 0.05, CandidateOptions::default()), vec![0.05]);

        let two = AcceptanceCurve::from_steps(0.2, vec![0.10, 0.30], vec![0.6, 1.0]).unwrap();
        assert_eq!(candidate_discounts(&two, 0.05, CandidateOptions::default()), vec![0.05, 0.10, 0.30]);

        // beyond saturation and above the cap nothing is offered
        let long = AcceptanceCurve::from_steps(0.0, vec![0.1, 0.2, 0.3, 1.4], vec![0.3, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(candidate_discounts(&long, 0.05, CandidateOptions::default()), vec![0.05, 0.1, 0.2]);
        let capped = AcceptanceCurve::from_steps(0.0, vec![0.1, 0.9, 1.4], vec![0.3, 0.5, 1.0]).unwrap();
        assert_eq!(candidate_discounts(&capped, 0.05, CandidateOptions::default()), vec![0.05, 0.1, 0.9]);
    }

    #[test]
    fn thinning_keeps_first_and_saturation() {
        let n = 400;
        let bps: Vec<f64> = (1..=n).map(|i| i as f64 / (n as f64 + 1.0)).collect();
        let cum: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
        let c = AcceptanceCurve::from_steps(0.0, bps.clone(), cum).unwrap();
        let cand = candidate_discounts(&c, 0.0, CandidateOptions { thinning: 20, lambda_cap: 1.0 });
        assert_eq!(cand.len(), 20);
        assert_eq!(cand[1], bps[0]);
        assert_eq!(*cand.last().unwrap(), bps[n - 1]);
        assert!(cand.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn nyc_curve_reaches_one() {
        let grid = BehavioralMixture::nyc_4class().discretize(10, 10).unwrap();
        let ride = pair_ride(720.0, 120.0, 600.0, 5.0);
        let c = build_curve(&ride, 1, &grid, 1.5, DegreeRule::default()).unwrap();
        assert!((c.cum_probs.last().unwrap() - 1.0).abs() < 1e-9);
        let json = c.to_json().unwrap();
        let back: AcceptanceCurve = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }

    proptest! {
        #[test]
        fn curve_is_exact_and_monotone(
            that in 0.0..2000.0f64,
            tp in 0.0..600.0f64,
            t in 60.0..1500.0f64,
            d in 0.5..10.0f64,
            probes in prop::collection::vec(0.0..1.5f64, 1..20),
        ) {
            let grid = BehavioralMixture::nyc_4class().discretize(4, 4).unwrap();
            let ride = pair_ride(that, tp, t, d);
            let c = build_curve(&ride, 1, &grid, 1.5, DegreeRule::default()).unwrap();
            let mut sorted = probes.clone();
            sorted.sort_by(f64::total_cmp);
            let vals: Vec<f64> = sorted.iter().map(|&l| c.evaluate(l)).collect();
            prop_assert!(vals.windows(2).all(|w| w[0] <= w[1]));
            for &l in &probes {
                // direct sum over atoms
                let direct: f64 = grid.atoms().filter(|a| {
                    let s = pfs_for_degree(a.pfs, 2, DegreeRule::default()).unwrap();
                    a.vot / 3600.0 * (s * (that + tp) - t) <= l * 1.5 * d
                }).map(|a| a.weight).sum();
                prop_assert!((c.evaluate(l) - direct).abs() < 1e-9, "{} vs {}", c.evaluate(l), direct);
            }
            for lh in [0.0, 0.05, 0.3] {
                let cand = candidate_discounts(&c, lh, CandidateOptions::default());
                prop_assert!(cand.iter().all(|&x| x >= lh));
                prop_assert!(cand.len() <= 20);
            }
        }
    }
}
