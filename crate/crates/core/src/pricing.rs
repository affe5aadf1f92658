//! Expected revenue, mileage and profitability of a ride under probabilistic
//! acceptance, and the search for the best personalised discount vector.
//!
//! A shared ride is realised only if every member accepts. Members who accept
//! a ride that does not materialise travel alone at the guaranteed discount
//! `λ̂`; members who reject pay full fare.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acceptance::{candidate_discounts, ride_acceptance, AcceptanceCurve, CandidateOptions};
use crate::error::{Error, Result};
use crate::population::{pfs_for_degree, DegreeRule, DiscretizedGrid};
use crate::shareability::{join, ShareableRide};

/// Relative slack when screening candidates by their fast score.
const SCREEN_MARGIN: f64 = 1e-9;

/// Weights of `α0·γ/ψ + α1·γ − α2·ψ − C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectiveWeights {
    pub profitability: f64,
    pub revenue: f64,
    pub distance: f64,
    pub flat_cost: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        ObjectiveWeights { profitability: 1.0, revenue: 0.0, distance: 0.0, flat_cost: 0.0 }
    }
}

impl ObjectiveWeights {
    pub fn score(&self, gamma: f64, psi: f64) -> f64 {
        self.score_with(gamma / psi, gamma, psi)
    }

    fn score_with(&self, profitability: f64, gamma: f64, psi: f64) -> f64 {
        self.profitability * profitability + self.revenue * gamma - self.distance * psi - self.flat_cost
    }

    fn validate(&self) -> Result<()> {
        if [self.profitability, self.revenue, self.distance, self.flat_cost].iter().all(|w| w.is_finite()) {
            Ok(())
        } else {
            Err(Error::domain("objective weights must be finite"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchOptions {
    /// Candidate discounts per member when the full product is too large.
    pub thinning: usize,
    pub lambda_cap: f64,
    /// Largest candidate product searched exhaustively without thinning.
    pub exhaustive_limit: usize,
    /// Coordinate ascent over the unthinned candidates after a thinned search,
    /// started from the thinned optimum and from uniform discount vectors.
    pub polish: bool,
    /// Spacing of the uniform starting vectors.
    pub uniform_step: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { thinning: 20, lambda_cap: 1.0, exhaustive_limit: 250_000, polish: true, uniform_step: 0.05 }
    }
}

impl SearchOptions {
    /// Plain exhaustive search over thinned candidates.
    pub fn thinned_only(thinning: usize) -> Self {
        SearchOptions { thinning, exhaustive_limit: 0, polish: false, ..Self::default() }
    }

    /// Exhaustive search over every breakpoint.
    pub fn unthinned() -> Self {
        SearchOptions { thinning: 0, exhaustive_limit: usize::MAX, polish: false, ..Self::default() }
    }

    pub fn candidate_options(&self) -> CandidateOptions {
        CandidateOptions { thinning: self.thinning, lambda_cap: self.lambda_cap }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PricingConfig {
    /// Fare per kilometre, ρ.
    pub fare_per_km: f64,
    /// Guaranteed discount λ̂.
    pub guaranteed_discount: f64,
    pub degree_rule: DegreeRule,
    pub private_weights: ObjectiveWeights,
    pub shared_weights: ObjectiveWeights,
    pub search: SearchOptions,
}

impl Default for PricingConfig {
    fn default() -> Self {
        PricingConfig {
            fare_per_km: 1.5,
            guaranteed_discount: 0.05,
            degree_rule: DegreeRule::default(),
            private_weights: ObjectiveWeights::default(),
            shared_weights: ObjectiveWeights::default(),
            search: SearchOptions::default(),
        }
    }
}

impl PricingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fare_per_km > 0.0 && self.fare_per_km.is_finite()) {
            return Err(Error::domain("fare per km must be positive"));
        }
        if !(0.0..1.0).contains(&self.guaranteed_discount) {
            return Err(Error::domain("guaranteed discount must lie in [0, 1)"));
        }
        self.private_weights.validate()?;
        self.shared_weights.validate()?;
        self.search.candidate_options().validate()?;
        if self.search.lambda_cap < self.guaranteed_discount {
            return Err(Error::domain("lambda_cap below the guaranteed discount"));
        }
        if !(self.search.uniform_step > 0.0) {
            return Err(Error::domain("uniform_step must be positive"));
        }
        Ok(())
    }

    fn weights_for(&self, degree: usize) -> &ObjectiveWeights {
        if degree == 1 {
            &self.private_weights
        } else {
            &self.shared_weights
        }
    }
}

/// Fare paid for `d` km at discount `lambda`.
pub fn revenue(d: f64, lambda: f64, cfg: &PricingConfig) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::domain(format!("discount {lambda} outside [0, 1]")));
    }
    Ok(cfg.fare_per_km * (1.0 - lambda) * d)
}

/// Per-member revenue in the three possible outcomes.
#[derive(Debug, Clone, Copy)]
struct Fares {
    offered: f64,
    guaranteed: f64,
    full: f64,
}

fn fares(d: f64, lambda: f64, cfg: &PricingConfig) -> Result<Fares> {
    Ok(Fares {
        offered: revenue(d, lambda, cfg)?,
        guaranteed: revenue(d, cfg.guaranteed_discount, cfg)?,
        full: revenue(d, 0.0, cfg)?,
    })
}

/// `(γ, ψ, P)` from per-member fares and acceptance probabilities. Every
/// evaluation path goes through here so equal inputs give equal bits.
fn outcome(shared_km: f64, private_total: f64, fares: &[Fares], probs: &[f64]) -> (f64, f64, f64) {
    let all: f64 = probs.iter().product();
    let gamma =
        fares.iter().zip(probs).map(|(f, &p)| all * f.offered + (p - all) * f.guaranteed + (1.0 - p) * f.full).sum();
    let psi = all * shared_km + (1.0 - all) * private_total;
    (gamma, psi, all)
}

fn check_discounts(ride: &ShareableRide, discounts: &[f64], cfg: &PricingConfig) -> Result<()> {
    if discounts.len() != ride.degree() {
        return Err(Error::contract(format!(
            "ride {} has {} members but {} discounts",
            ride.id,
            ride.degree(),
            discounts.len()
        )));
    }
    if let Some(l) = discounts.iter().find(|&&l| !(l >= cfg.guaranteed_discount && l <= 1.0)) {
        return Err(Error::domain(format!("discount {l} outside [{}, 1]", cfg.guaranteed_discount)));
    }
    Ok(())
}

/// Expected revenue and distance given per-member acceptance probabilities.
pub fn expected_outcome_with(
    ride: &ShareableRide,
    discounts: &[f64],
    probs: &[f64],
    cfg: &PricingConfig,
) -> Result<(f64, f64)> {
    check_discounts(ride, discounts, cfg)?;
    if probs.len() != discounts.len() {
        return Err(Error::contract("one acceptance probability per member required"));
    }
    let fares = ride.private_km.iter().zip(discounts).map(|(&d, &l)| fares(d, l, cfg)).collect::<Result<Vec<_>>>()?;
    let (gamma, psi, _) = outcome(ride.shared_km, ride.total_private_km(), &fares, probs);
    Ok((gamma, psi))
}

fn probabilities(curves: &[AcceptanceCurve], discounts: &[f64]) -> Result<Vec<f64>> {
    ride_acceptance(curves, discounts)?;
    Ok(curves.iter().zip(discounts).map(|(c, &l)| c.evaluate(l)).collect())
}

pub fn expected_revenue(
    ride: &ShareableRide,
    curves: &[AcceptanceCurve],
    discounts: &[f64],
    cfg: &PricingConfig,
) -> Result<f64> {
    let probs = probabilities(curves, discounts)?;
    Ok(expected_outcome_with(ride, discounts, &probs, cfg)?.0)
}

pub fn expected_distance(ride: &ShareableRide, curves: &[AcceptanceCurve], discounts: &[f64]) -> Result<f64> {
    let all = ride_acceptance(curves, discounts)?;
    if curves.len() != ride.degree() {
        return Err(Error::contract("one curve per member required"));
    }
    Ok(all * ride.shared_km + (1.0 - all) * ride.total_private_km())
}

pub fn expected_profitability(
    ride: &ShareableRide,
    curves: &[AcceptanceCurve],
    discounts: &[f64],
    cfg: &PricingConfig,
) -> Result<f64> {
    let probs = probabilities(curves, discounts)?;
    let (gamma, psi) = expected_outcome_with(ride, discounts, &probs, cfg)?;
    Ok(gamma / psi)
}

pub fn generalized_objective(
    ride: &ShareableRide,
    curves: &[AcceptanceCurve],
    discounts: &[f64],
    weights: &ObjectiveWeights,
    cfg: &PricingConfig,
) -> Result<f64> {
    let probs = probabilities(curves, discounts)?;
    let (gamma, psi) = expected_outcome_with(ride, discounts, &probs, cfg)?;
    Ok(weights.score(gamma, psi))
}

/// A ride with its chosen discounts and their expected value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricedRide {
    pub ride_id: usize,
    pub degree: usize,
    pub discounts: Vec<f64>,
    /// Expected revenue γ.
    pub gamma: f64,
    /// Expected distance ψ.
    pub psi: f64,
    /// Expected profitability Γ = γ / ψ.
    pub profitability: f64,
    /// Generalized objective; equals Γ under default weights.
    pub score: f64,
    /// Matching objective O = score × degree.
    pub objective: f64,
    pub accept_prob: f64,
}

fn assemble(ride: &ShareableRide, discounts: Vec<f64>, probs: &[f64], cfg: &PricingConfig) -> Result<PricedRide> {
    check_discounts(ride, &discounts, cfg)?;
    let fares = ride.private_km.iter().zip(&discounts).map(|(&d, &l)| fares(d, l, cfg)).collect::<Result<Vec<_>>>()?;
    let (gamma, psi, all) = outcome(ride.shared_km, ride.total_private_km(), &fares, probs);
    let score = cfg.weights_for(ride.degree()).score(gamma, psi);
    Ok(PricedRide {
        ride_id: ride.id,
        degree: ride.degree(),
        discounts,
        gamma,
        psi,
        profitability: gamma / psi,
        score,
        objective: score * ride.degree() as f64,
        accept_prob: all,
    })
}

/// Evaluates a shared ride at a given discount vector.
pub fn evaluate(
    ride: &ShareableRide,
    curves: &[AcceptanceCurve],
    discounts: &[f64],
    cfg: &PricingConfig,
) -> Result<PricedRide> {
    let probs = probabilities(curves, discounts)?;
    assemble(ride, discounts.to_vec(), &probs, cfg)
}

/// A private ride at the given discount; it is always realised.
pub fn price_private(ride: &ShareableRide, discount: f64, cfg: &PricingConfig) -> Result<PricedRide> {
    if ride.degree() != 1 {
        return Err(Error::contract(format!("ride {} is not private", ride.id)));
    }
    let gamma = revenue(ride.private_km[0], discount, cfg)?;
    let psi = ride.private_km[0];
    // closed form, independent of trip length
    let profitability = cfg.fare_per_km * (1.0 - discount);
    let score = cfg.private_weights.score_with(profitability, gamma, psi);
    Ok(PricedRide {
        ride_id: ride.id,
        degree: 1,
        discounts: vec![discount],
        gamma,
        psi,
        profitability,
        score,
        objective: score,
        accept_prob: 1.0,
    })
}

/// Every member offered the same discount, raised to `λ̂` if lower.
pub fn evaluate_flat(
    ride: &ShareableRide,
    curves: &[AcceptanceCurve],
    flat: f64,
    cfg: &PricingConfig,
) -> Result<PricedRide> {
    let lambda = flat.max(cfg.guaranteed_discount);
    evaluate(ride, curves, &vec![lambda; ride.degree()], cfg)
}

/// Precomputed per-candidate data for one member.
struct Column {
    lambdas: Vec<f64>,
    probs: Vec<f64>,
    fares: Vec<Fares>,
    /// `offered − guaranteed`, the revenue gained when the ride happens.
    gain: Vec<f64>,
    /// Revenue if the ride does not happen, weighted by acceptance.
    fallback: Vec<f64>,
}

struct Search<'a> {
    ride: &'a ShareableRide,
    cols: Vec<Column>,
    weights: &'a ObjectiveWeights,
    private_total: f64,
}

/// Candidate ordering: higher score, then lower total discount, then the
/// lexicographically smaller vector.
#[derive(Debug, Clone)]
struct Best {
    score: f64,
    total: f64,
    lambdas: Vec<f64>,
    idx: Vec<usize>,
}

impl Best {
    fn beats(&self, other: &Best) -> bool {
        if self.score != other.score {
            return self.score > other.score;
        }
        if self.total != other.total {
            return self.total < other.total;
        }
        self.lambdas < other.lambdas
    }
}

impl<'a> Search<'a> {
    fn new(
        ride: &'a ShareableRide,
        lists: Vec<Vec<f64>>,
        curves: &[AcceptanceCurve],
        cfg: &'a PricingConfig,
    ) -> Result<Self> {
        let cols = lists
            .into_iter()
            .zip(curves)
            .zip(&ride.private_km)
            .map(|((lambdas, curve), &d)| {
                let probs = lambdas.iter().map(|&l| curve.evaluate(l)).collect();
                let fares: Vec<Fares> = lambdas.iter().map(|&l| fares(d, l, cfg)).collect::<Result<_>>()?;
                let gain = fares.iter().map(|f| f.offered - f.guaranteed).collect();
                let fallback = fares.iter().zip(&probs).map(|(f, &p)| p * f.guaranteed + (1.0 - p) * f.full).collect();
                Ok(Column { lambdas, probs, fares, gain, fallback })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Search { ride, cols, weights: &cfg.shared_weights, private_total: ride.total_private_km() })
    }

    fn point(&self, idx: &[usize], fares: &mut Vec<Fares>, probs: &mut Vec<f64>) -> Best {
        fares.clear();
        probs.clear();
        for (c, &i) in self.cols.iter().zip(idx) {
            fares.push(c.fares[i]);
            probs.push(c.probs[i]);
        }
        let (gamma, psi, _) = outcome(self.ride.shared_km, self.private_total, fares, probs);
        let lambdas: Vec<f64> = self.cols.iter().zip(idx).map(|(c, &i)| c.lambdas[i]).collect();
        Best { score: self.weights.score(gamma, psi), total: lambdas.iter().sum(), lambdas, idx: idx.to_vec() }
    }

    fn product(&self) -> usize {
        self.cols.iter().fold(1usize, |acc, c| acc.saturating_mul(c.lambdas.len()))
    }

    /// Score from accumulated `Π p`, `Σ gain` and `Σ fallback`. Rounds
    /// differently from `outcome`, so it only screens candidates.
    fn quick_score(&self, all: f64, gain: f64, fallback: f64) -> f64 {
        let gamma = all * gain + fallback;
        let psi = all * self.ride.shared_km + (1.0 - all) * self.private_total;
        self.weights.score(gamma, psi)
    }

    /// Replaces `best` if the candidate at `idx` beats it. `quick` is the
    /// screening score of the candidate.
    fn offer(&self, idx: &[usize], quick: f64, best: &mut (Best, f64), scratch: &mut (Vec<Fares>, Vec<f64>)) {
        let (ref current, current_quick) = *best;
        if quick < current_quick - SCREEN_MARGIN * current_quick.abs().max(1.0) {
            return;
        }
        let cand = self.point(idx, &mut scratch.0, &mut scratch.1);
        if cand.beats(current) {
            *best = (cand, quick);
        }
    }

    fn start(&self, idx: &[usize], scratch: &mut (Vec<Fares>, Vec<f64>)) -> (Best, f64) {
        let best = self.point(idx, &mut scratch.0, &mut scratch.1);
        let (mut all, mut gain, mut fallback) = (1.0, 0.0, 0.0);
        for (c, &i) in self.cols.iter().zip(idx) {
            all *= c.probs[i];
            gain += c.gain[i];
            fallback += c.fallback[i];
        }
        let quick = self.quick_score(all, gain, fallback);
        (best, quick)
    }

    fn exhaustive(&self) -> Best {
        let k = self.cols.len();
        let mut idx = vec![0usize; k];
        let mut scratch = (Vec::with_capacity(k), Vec::with_capacity(k));
        let mut best = self.start(&idx, &mut scratch);
        self.descend(0, (1.0, 0.0, 0.0), &mut idx, &mut best, &mut scratch);
        best.0
    }

    fn descend(
        &self,
        j: usize,
        acc: (f64, f64, f64),
        idx: &mut [usize],
        best: &mut (Best, f64),
        scratch: &mut (Vec<Fares>, Vec<f64>),
    ) {
        let c = &self.cols[j];
        let last = j + 1 == self.cols.len();
        for i in 0..c.lambdas.len() {
            idx[j] = i;
            let next = (acc.0 * c.probs[i], acc.1 + c.gain[i], acc.2 + c.fallback[i]);
            if last {
                let quick = self.quick_score(next.0, next.1, next.2);
                self.offer(idx, quick, best, scratch);
            } else {
                self.descend(j + 1, next, idx, best, scratch);
            }
        }
    }

    fn ascend(&self, idx: &[usize]) -> Best {
        let k = self.cols.len();
        let mut scratch = (Vec::with_capacity(k), Vec::with_capacity(k));
        let mut best = self.start(idx, &mut scratch);
        loop {
            let mut improved = false;
            for j in 0..k {
                let mut idx = best.0.idx.clone();
                let (mut all, mut gain, mut fallback) = (1.0, 0.0, 0.0);
                for (m, (c, &i)) in self.cols.iter().zip(&idx).enumerate() {
                    if m != j {
                        all *= c.probs[i];
                        gain += c.gain[i];
                        fallback += c.fallback[i];
                    }
                }
                let c = &self.cols[j];
                for i in 0..c.lambdas.len() {
                    idx[j] = i;
                    let quick = self.quick_score(all * c.probs[i], gain + c.gain[i], fallback + c.fallback[i]);
                    let before = best.0.idx[j];
                    self.offer(&idx, quick, &mut best, &mut scratch);
                    improved |= best.0.idx[j] != before;
                }
            }
            if !improved {
                return best.0;
            }
        }
    }

    /// Index of the largest candidate not above `level`; candidates are sorted
    /// and start at `λ̂`.
    fn floor_index(&self, j: usize, level: f64) -> usize {
        self.cols[j].lambdas.partition_point(|&l| l <= level).saturating_sub(1)
    }
}

/// Exhaustive search over explicit per-member candidate lists.
pub fn optimize_over_candidates(
    ride: &ShareableRide,
    curves: &[AcceptanceCurve],
    candidates: &[Vec<f64>],
    cfg: &PricingConfig,
) -> Result<PricedRide> {
    if candidates.len() != ride.degree() || curves.len() != ride.degree() {
        return Err(Error::contract("one curve and one candidate list per member required"));
    }
    if candidates.iter().any(Vec::is_empty) {
        return Err(Error::contract("empty candidate list"));
    }
    let search = Search::new(ride, candidates.to_vec(), curves, cfg)?;
    let best = search.exhaustive();
    evaluate(ride, curves, &best.lambdas, cfg)
}

/// Best personalised discount vector for a shared ride.
pub fn optimize_discounts(ride: &ShareableRide, curves: &[AcceptanceCurve], cfg: &PricingConfig) -> Result<PricedRide> {
    if ride.degree() < 2 {
        return Err(Error::contract("private rides are priced with price_private"));
    }
    if curves.len() != ride.degree() {
        return Err(Error::contract("one curve per member required"));
    }
    let opts = &cfg.search;
    let lambda_hat = cfg.guaranteed_discount;
    let full_opts = CandidateOptions { thinning: 0, lambda_cap: opts.lambda_cap };
    let full: Vec<Vec<f64>> = curves.iter().map(|c| candidate_discounts(c, lambda_hat, full_opts)).collect();
    let full_search = Search::new(ride, full.clone(), curves, cfg)?;
    if full_search.product() <= opts.exhaustive_limit {
        return evaluate(ride, curves, &full_search.exhaustive().lambdas, cfg);
    }

    let thinned: Vec<Vec<f64>> =
        curves.iter().map(|c| candidate_discounts(c, lambda_hat, opts.candidate_options())).collect();
    let coarse = Search::new(ride, thinned, curves, cfg)?.exhaustive();
    if !opts.polish {
        return evaluate(ride, curves, &coarse.lambdas, cfg);
    }

    let k = ride.degree();
    let idx: Vec<usize> = (0..k).map(|j| locate(&full[j], coarse.lambdas[j])).collect();
    let mut best = full_search.ascend(&idx);
    let steps = (opts.lambda_cap / opts.uniform_step).floor() as usize;
    for s in 1..=steps {
        let level = s as f64 * opts.uniform_step;
        if level < lambda_hat {
            continue;
        }
        let idx: Vec<usize> = (0..k).map(|j| full_search.floor_index(j, level)).collect();
        let cand = full_search.ascend(&idx);
        if cand.beats(&best) {
            best = cand;
        }
    }
    evaluate(ride, curves, &best.lambdas, cfg)
}

fn locate(list: &[f64], value: f64) -> usize {
    list.iter().position(|&l| l == value).unwrap_or(0)
}

/// Expected revenue and distance by summing all `2^k` accept/reject outcomes.
pub fn enumeration_oracle(
    ride: &ShareableRide,
    curves: &[AcceptanceCurve],
    discounts: &[f64],
    cfg: &PricingConfig,
) -> Result<(f64, f64)> {
    let k = ride.degree();
    if k > 20 {
        return Err(Error::domain(format!("enumeration refused for degree {k}")));
    }
    check_discounts(ride, discounts, cfg)?;
    let probs = probabilities(curves, discounts)?;
    let mut rev = 0.0;
    let mut dist = 0.0;
    for mask in 0u32..(1u32 << k) {
        let mut weight = 1.0;
        let mut paid = 0.0;
        for j in 0..k {
            let accepts = mask & (1 << j) != 0;
            weight *= if accepts { probs[j] } else { 1.0 - probs[j] };
            let lambda = match (accepts, mask == (1 << k) - 1) {
                (true, true) => discounts[j],
                (true, false) => cfg.guaranteed_discount,
                (false, _) => 0.0,
            };
            paid += revenue(ride.private_km[j], lambda, cfg)?;
        }
        let km = if mask == (1 << k) - 1 { ride.shared_km } else { ride.total_private_km() };
        rev += weight * paid;
        dist += weight * km;
    }
    Ok((rev, dist))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub revenue: f64,
    pub distance: f64,
    pub revenue_se: f64,
    pub distance_se: f64,
}

/// Simulates member decisions by drawing traits from the grid and comparing
/// utilities directly.
pub fn monte_carlo_oracle(
    ride: &ShareableRide,
    grid: &DiscretizedGrid,
    discounts: &[f64],
    cfg: &PricingConfig,
    n_draws: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    check_discounts(ride, discounts, cfg)?;
    if n_draws < 2 {
        return Err(Error::domain("need at least two draws"));
    }
    let k = ride.degree();
    let sampler = grid.sampler();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = cfg.fare_per_km;
    let (mut sr, mut sr2, mut sd, mut sd2) = (0.0, 0.0, 0.0, 0.0);
    let mut accepted = vec![false; k];
    for _ in 0..n_draws {
        for (j, slot) in accepted.iter_mut().enumerate() {
            let (vot, pfs) = sampler.sample(&mut rng);
            let pfs_k = if k >= 2 { pfs_for_degree(pfs, k, cfg.degree_rule)? } else { pfs };
            let d = ride.private_km[j];
            let shared = -(1.0 - discounts[j]) * rho * d
                - vot / 3600.0 * pfs_k * (ride.shared_time_s[j] + ride.pickup_delay_s[j]);
            let private = -rho * d - vot / 3600.0 * ride.private_time_s[j];
            *slot = shared >= private;
        }
        let realised = accepted.iter().all(|&a| a);
        let mut paid = 0.0;
        for j in 0..k {
            let lambda = match (accepted[j], realised) {
                (true, true) => discounts[j],
                (true, false) => cfg.guaranteed_discount,
                (false, _) => 0.0,
            };
            paid += rho * (1.0 - lambda) * ride.private_km[j];
        }
        let km = if realised { ride.shared_km } else { ride.total_private_km() };
        sr += paid;
        sr2 += paid * paid;
        sd += km;
        sd2 += km * km;
    }
    let n = n_draws as f64;
    let se = |s: f64, s2: f64| {
        let mean = s / n;
        ((s2 / n - mean * mean).max(0.0) / (n - 1.0)).sqrt()
    };
    Ok(MonteCarloEstimate { revenue: sr / n, distance: sd / n, revenue_se: se(sr, sr2), distance_se: se(sd, sd2) })
}

/// How discounts are set for every ride before matching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Strategy {
    Personalised,
    Flat(f64),
    /// Private rides only, at full fare.
    Private,
}

impl Strategy {
    pub fn name(&self) -> String {
        match self {
            Strategy::Personalised => "personalised".into(),
            Strategy::Flat(x) => format!("flat:{x}"),
            Strategy::Private => "private".into(),
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "personalised" | "personalized" => Ok(Strategy::Personalised),
            "private" => Ok(Strategy::Private),
            other => {
                let value = other
                    .strip_prefix("flat:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown strategy '{other}'")))?;
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::Config(format!("flat discount {value} outside [0, 1]")));
                }
                Ok(Strategy::Flat(value))
            }
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

/// Prices one ride under a strategy. Returns `None` for shared rides under
/// the private strategy. Private rides of pooling strategies get `λ̂`.
pub fn price_ride(
    ride: &ShareableRide,
    curves: &[AcceptanceCurve],
    cfg: &PricingConfig,
    strategy: Strategy,
) -> Result<Option<PricedRide>> {
    if ride.degree() == 1 {
        let lambda = match strategy {
            Strategy::Private => 0.0,
            _ => cfg.guaranteed_discount,
        };
        return price_private(ride, lambda, cfg).map(Some);
    }
    match strategy {
        Strategy::Private => Ok(None),
        Strategy::Flat(x) => evaluate_flat(ride, curves, x, cfg).map(Some),
        Strategy::Personalised => optimize_discounts(ride, curves, cfg).map(Some),
    }
}

/// Writes `priced.csv`: `ride_id,degree,discounts,gamma,psi,Gamma,O,accept_prob`.
pub fn write_priced_csv(path: &Path, priced: &[PricedRide]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["ride_id", "degree", "discounts", "gamma", "psi", "Gamma", "O", "accept_prob"])?;
    for p in priced {
        w.write_record([
            p.ride_id.to_string(),
            p.degree.to_string(),
            join(&p.discounts),
            p.gamma.to_string(),
            p.psi.to_string(),
            p.profitability.to_string(),
            p.objective.to_string(),
            p.accept_prob.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::Strategy;
    use super::*;
    use crate::shareability::Stop;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn example_ride() -> ShareableRide {
        ShareableRide::new(
            vec![1, 2],
            vec![Stop::pickup(1), Stop::pickup(2), Stop::dropoff(1), Stop::dropoff(2)],
            4.8,
            vec![900.0, 700.0],
            vec![0.0, 60.0],
            vec![3.6, 3.2],
            vec![600.0, 640.0],
        )
        .unwrap()
    }

    fn step(p: f64) -> AcceptanceCurve {
        AcceptanceCurve::from_steps(0.0, vec![0.1], vec![p]).unwrap()
    }

    #[test]
    fn revenue_examples() {
        let cfg = PricingConfig::default();
        assert!((revenue(3.2, 0.05, &cfg).unwrap() - 4.56).abs() < 1e-12);
        assert_eq!(revenue(3.2, 0.0, &cfg).unwrap(), 1.5 * 3.2);
        assert_eq!(revenue(3.2, 1.0, &cfg).unwrap(), 0.0);
        assert!(revenue(3.2, 1.2, &cfg).is_err());
    }

    #[test]
    fn worked_example_values() {
        let cfg = PricingConfig::default();
        let ride = example_ride();
        let curves = [step(0.7), step(0.95)];
        let d = [0.2, 0.2];
        let rev = expected_revenue(&ride, &curves, &d, &cfg).unwrap();
        let dist = expected_distance(&ride, &curves, &d).unwrap();
        assert!((rev - 8.76555).abs() < 1e-9);
        assert!((dist - 5.47).abs() < 1e-9);
        let g = expected_profitability(&ride, &curves, &d, &cfg).unwrap();
        assert!((g - 8.76555 / 5.47).abs() < 1e-12);
        let w = ObjectiveWeights::default();
        assert_eq!(generalized_objective(&ride, &curves, &d, &w, &cfg).unwrap(), g);
        let rev_only = ObjectiveWeights { profitability: 0.0, revenue: 1.0, ..w };
        assert_eq!(generalized_objective(&ride, &curves, &d, &rev_only, &cfg).unwrap(), rev);
        let cost = ObjectiveWeights { profitability: 0.0, revenue: 0.0, distance: 1.0, flat_cost: 5.0 };
        assert!((generalized_objective(&ride, &curves, &d, &cost, &cfg).unwrap() - (-5.47 - 5.0)).abs() < 1e-12);
        let (er, ed) = enumeration_oracle(&ride, &curves, &d, &cfg).unwrap();
        assert!((er - 8.76555).abs() < 1e-9 && (ed - 5.47).abs() < 1e-9);
    }

    #[test]
    fn certain_outcomes() {
        let cfg = PricingConfig::default();
        let ride = example_ride();
        let d = [0.2, 0.3];
        let yes = [step(1.0), step(1.0)];
        let rev = expected_revenue(&ride, &yes, &d, &cfg).unwrap();
        assert!((rev - (1.5 * 0.8 * 3.6 + 1.5 * 0.7 * 3.2)).abs() < 1e-12);
        assert_eq!(expected_distance(&ride, &yes, &d).unwrap(), 4.8);
        let no = [step(0.0), step(0.0)];
        assert!((expected_revenue(&ride, &no, &d, &cfg).unwrap() - 1.5 * 6.8).abs() < 1e-12);
        assert!((expected_distance(&ride, &no, &d).unwrap() - 6.8).abs() < 1e-12);
    }

    #[test]
    fn private_constants() {
        let cfg = PricingConfig::default();
        for d in [0.7, 3.0, 12.5] {
            let r = ShareableRide::private(4, d, 100.0).unwrap();
            assert_eq!(price_private(&r, 0.05, &cfg).unwrap().profitability, 1.5 * 0.95);
            assert_eq!(price_private(&r, 0.0, &cfg).unwrap().profitability, 1.5);
        }
    }

    #[test]
    fn discounts_below_guarantee_rejected() {
        let cfg = PricingConfig::default();
        let ride = example_ride();
        assert!(matches!(expected_revenue(&ride, &[step(0.5), step(0.5)], &[0.01, 0.2], &cfg), Err(Error::Domain(_))));
        assert!(matches!(expected_revenue(&ride, &[step(0.5)], &[0.2], &cfg), Err(Error::Contract(_))));
    }

    #[test]
    fn saturated_members_keep_guarantee() {
        let cfg = PricingConfig::default();
        let one = AcceptanceCurve::from_steps(1.0, vec![], vec![]).unwrap();
        let p = optimize_discounts(&example_ride(), &[one.clone(), one], &cfg).unwrap();
        assert_eq!(p.discounts, vec![0.05, 0.05]);
        assert_eq!(p.accept_prob, 1.0);
    }

    fn random_curve(rng: &mut impl Rng, n: usize) -> AcceptanceCurve {
        let mut bps: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.9)).collect();
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        let base = rng.random_range(0.0..0.3);
        let mut w: Vec<f64> = (0..bps.len()).map(|_| rng.random::<f64>()).collect();
        let s: f64 = w.iter().sum();
        let mut acc = base;
        let cum = w
            .iter_mut()
            .map(|x| {
                acc += *x / s * (1.0 - base);
                acc.min(1.0)
            })
            .collect();
        AcceptanceCurve::from_steps(base, bps, cum).unwrap()
    }

    #[test]
    fn small_grids_match_full_brute_force() {
        let cfg = PricingConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let curves = [random_curve(&mut rng, 6), random_curve(&mut rng, 6)];
            let ride = example_ride();
            let got = optimize_discounts(&ride, &curves, &cfg).unwrap();
            // every pair of breakpoints or guaranteed discount
            let mut best = f64::NEG_INFINITY;
            let opts = |c: &AcceptanceCurve| {
                let mut v = vec![0.05];
                v.extend(c.breakpoints.iter().copied().filter(|&b| b > 0.05));
                v
            };
            for &a in &opts(&curves[0]) {
                for &b in &opts(&curves[1]) {
                    best = best.max(expected_profitability(&ride, &curves, &[a, b], &cfg).unwrap());
                }
            }
            assert_eq!(got.profitability, best);
        }
    }

    #[test]
    fn result_ignores_candidate_order() {
        let cfg = PricingConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ride = example_ride();
        for _ in 0..20 {
            let curves = [random_curve(&mut rng, 8), random_curve(&mut rng, 8)];
            let mut lists: Vec<Vec<f64>> =
                curves.iter().map(|c| candidate_discounts(c, 0.05, CandidateOptions::unthinned())).collect();
            let a = optimize_over_candidates(&ride, &curves, &lists, &cfg).unwrap();
            for l in &mut lists {
                l.shuffle(&mut rng);
            }
            let b = optimize_over_candidates(&ride, &curves, &lists, &cfg).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn thinned_search_keeps_value() {
        let cfg = PricingConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let curves = [random_curve(&mut rng, 400), random_curve(&mut rng, 400)];
            let ride = example_ride();
            let full = optimize_discounts(
                &ride,
                &curves,
                &PricingConfig { search: SearchOptions::unthinned(), ..cfg.clone() },
            )
            .unwrap();
            let thin = optimize_discounts(
                &ride,
                &curves,
                &PricingConfig { search: SearchOptions::thinned_only(20), ..cfg.clone() },
            )
            .unwrap();
            assert!(thin.profitability >= 0.99 * full.profitability);
            assert!(thin.profitability <= full.profitability);
        }
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("personalised".parse::<Strategy>().unwrap(), Strategy::Personalised);
        assert_eq!("flat:0.15".parse::<Strategy>().unwrap(), Strategy::Flat(0.15));
        assert_eq!("private".parse::<Strategy>().unwrap(), Strategy::Private);
        assert!("flat:abc".parse::<Strategy>().is_err());
        assert!("flat:1.5".parse::<Strategy>().is_err());
        assert_eq!(Strategy::Flat(0.2).name(), "flat:0.2");
    }

    proptest! {
        #[test]
        fn factored_form_matches_enumeration(
            k in 2usize..7,
            seed in any::<u64>(),
        ) {
            let cfg = PricingConfig::default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let members: Vec<u64> = (1..=k as u64).collect();
            let mut seq: Vec<Stop> = members.iter().map(|&m| Stop::pickup(m)).collect();
            seq.extend(members.iter().map(|&m| Stop::dropoff(m)));
            let d: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..10.0)).collect();
            let ride = ShareableRide::new(
                members, seq, rng.random_range(1.0..20.0),
                vec![600.0; k], vec![0.0; k], d, vec![500.0; k],
            ).unwrap();
            let curves: Vec<AcceptanceCurve> = (0..k).map(|_| random_curve(&mut rng, 10)).collect();
            let disc: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
            let (er, ed) = enumeration_oracle(&ride, &curves, &disc, &cfg).unwrap();
            let rev = expected_revenue(&ride, &curves, &disc, &cfg).unwrap();
            let dist = expected_distance(&ride, &curves, &disc).unwrap();
            prop_assert!((er - rev).abs() <= 1e-9);
            prop_assert!((ed - dist).abs() <= 1e-9);
            let lo = ride.shared_km.min(ride.total_private_km());
            let hi = ride.shared_km.max(ride.total_private_km());
            prop_assert!(dist >= lo - 1e-12 && dist <= hi + 1e-12);
        }
    }
}
