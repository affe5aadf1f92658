//! Shareability graph: every pooled ride that a deterministic, pooling-friendly
//! traveller would prefer over riding alone.
//!
//! A ride visits all pickups before any drop-off. The vehicle reaches the first
//! origin at that traveller's request time and waits at later origins when it
//! arrives before the traveller's request time. For every member this gives
//!
//! * `t̂_i`: drop-off minus pickup (in-vehicle time, including any wait while on board);
//! * `t̂ᵖ_i`: pickup minus request time.
//!
//! Under that schedule removing a member never increases the drop-off or pickup
//! time of anyone else when travel times obey the triangle inequality, so a
//! feasible ride of degree `k` always has feasible sub-rides of degree `k - 1`.
//! The builder exploits this: degree-`k` member sets are only examined when
//! every `(k - 1)`-subset is already feasible.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demand::{private_metrics, TravelTimeProvider, TravellerId, TripRequest};
use crate::error::{Error, Result};
use crate::population::{BehavioralMixture, Marginal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StopKind {
    Pickup,
    Dropoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Stop {
    pub traveller: TravellerId,
    pub kind: StopKind,
}

impl Stop {
    pub fn pickup(traveller: TravellerId) -> Self {
        Stop { traveller, kind: StopKind::Pickup }
    }

    pub fn dropoff(traveller: TravellerId) -> Self {
        Stop { traveller, kind: StopKind::Dropoff }
    }
}

impl fmt::Display for Stop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            StopKind::Pickup => write!(f, "o{}", self.traveller),
            StopKind::Dropoff => write!(f, "d{}", self.traveller),
        }
    }
}

/// A feasible ride. Per-member vectors follow the order of `members`, which is
/// ascending by traveller id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareableRide {
    pub id: usize,
    pub members: Vec<TravellerId>,
    pub sequence: Vec<Stop>,
    /// Vehicle distance from first pickup to last drop-off, km.
    pub shared_km: f64,
    /// In-vehicle time per member, seconds.
    pub shared_time_s: Vec<f64>,
    /// Pickup delay per member, seconds.
    pub pickup_delay_s: Vec<f64>,
    pub private_km: Vec<f64>,
    pub private_time_s: Vec<f64>,
}

impl ShareableRide {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        members: Vec<TravellerId>,
        sequence: Vec<Stop>,
        shared_km: f64,
        shared_time_s: Vec<f64>,
        pickup_delay_s: Vec<f64>,
        private_km: Vec<f64>,
        private_time_s: Vec<f64>,
    ) -> Result<Self> {
        let k = members.len();
        if k == 0 {
            return Err(Error::contract("ride needs at least one member"));
        }
        if [shared_time_s.len(), pickup_delay_s.len(), private_km.len(), private_time_s.len()].iter().any(|&n| n != k) {
            return Err(Error::contract("per-member vectors must match member count"));
        }
        if !members.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::contract("ride members must be sorted and unique"));
        }
        if !valid_precedence(&members, &sequence) {
            return Err(Error::contract("sequence must pick up each member once before dropping them off"));
        }
        if !(shared_km > 0.0 && shared_km.is_finite()) {
            return Err(Error::domain("shared distance must be positive"));
        }
        let nonneg = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x >= 0.0);
        if !nonneg(&shared_time_s) || !nonneg(&pickup_delay_s) || !nonneg(&private_time_s) {
            return Err(Error::domain("ride times must be non-negative"));
        }
        if private_km.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::domain("private distances must be positive"));
        }
        Ok(ShareableRide {
            id: 0,
            members,
            sequence,
            shared_km,
            shared_time_s,
            pickup_delay_s,
            private_km,
            private_time_s,
        })
    }

    /// Degree-1 ride: the traveller alone on the direct path.
    pub fn private(traveller: TravellerId, distance_km: f64, time_s: f64) -> Result<Self> {
        ShareableRide::new(
            vec![traveller],
            vec![Stop::pickup(traveller), Stop::dropoff(traveller)],
            distance_km,
            vec![time_s],
            vec![0.0],
            vec![distance_km],
            vec![time_s],
        )
    }

    pub fn degree(&self) -> usize {
        self.members.len()
    }

    pub fn member_index(&self, traveller: TravellerId) -> Option<usize> {
        self.members.binary_search(&traveller).ok()
    }

    pub fn total_private_km(&self) -> f64 {
        self.private_km.iter().sum()
    }

    /// Relative mileage reduction if the ride is realised: `1 - d_s / Σ d_i`.
    pub fn distance_saved(&self) -> f64 {
        1.0 - self.shared_km / self.total_private_km()
    }
}

fn valid_precedence(members: &[TravellerId], sequence: &[Stop]) -> bool {
    if sequence.len() != 2 * members.len() {
        return false;
    }
    let mut picked = vec![false; members.len()];
    let mut dropped = vec![false; members.len()];
    for s in sequence {
        let Ok(i) = members.binary_search(&s.traveller) else { return false };
        match s.kind {
            StopKind::Pickup if !picked[i] => picked[i] = true,
            StopKind::Dropoff if picked[i] && !dropped[i] => dropped[i] = true,
            _ => return false,
        }
    }
    true
}

/// Deterministic behavioural parameters and flat discount used to decide
/// whether a ride enters the graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityParams {
    /// Value of time, currency per hour.
    pub vot: f64,
    pub pfs: f64,
    pub flat_discount: f64,
    pub fare_per_km: f64,
}

/// Shared minus private utility for one member.
pub fn utility_gain(ride: &ShareableRide, member: usize, p: &FeasibilityParams) -> f64 {
    let shared = -(1.0 - p.flat_discount) * p.fare_per_km * ride.private_km[member]
        - p.vot / 3600.0 * p.pfs * (ride.shared_time_s[member] + ride.pickup_delay_s[member]);
    let private = -p.fare_per_km * ride.private_km[member] - p.vot / 3600.0 * ride.private_time_s[member];
    shared - private
}

/// True when every member weakly prefers the shared ride at the flat
/// parameters.
pub fn exmas_feasible(ride: &ShareableRide, p: &FeasibilityParams) -> bool {
    (0..ride.degree()).all(|i| utility_gain(ride, i, p) >= 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphConfig {
    /// Quantile level of the behavioural distribution used for the filter.
    pub alpha: f64,
    /// Flat discount assumed when filtering.
    pub flat_discount: f64,
    pub max_degree: usize,
    pub max_pickup_delay_s: f64,
    /// Member sets up to this degree try every pickup/drop-off order; above it
    /// the new member is inserted into the parent ride's order.
    pub full_search_max_degree: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            alpha: 0.2,
            flat_discount: 0.4,
            max_degree: 4,
            max_pickup_delay_s: 600.0,
            full_search_max_degree: 4,
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_degree < 1 {
            return Err(Error::domain("max_degree must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.flat_discount) {
            return Err(Error::domain("flat discount must lie in [0, 1]"));
        }
        if !(self.max_pickup_delay_s >= 0.0) {
            return Err(Error::domain("max pickup delay must be non-negative"));
        }
        Ok(())
    }

    /// Filter parameters: the `alpha`-quantiles of both traits.
    pub fn feasibility_params(&self, mix: &BehavioralMixture, fare_per_km: f64) -> Result<FeasibilityParams> {
        Ok(FeasibilityParams {
            vot: mix.quantile(Marginal::ValueOfTime, self.alpha)?,
            pfs: mix.quantile(Marginal::PenaltyForSharing, self.alpha)?,
            flat_discount: self.flat_discount,
            fare_per_km,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareabilityGraph {
    rides: Vec<ShareableRide>,
    by_traveller: BTreeMap<TravellerId, Vec<usize>>,
}

impl ShareabilityGraph {
    /// Sorts rides by `(degree, members)`, assigns ids and indexes travellers.
    pub fn from_rides(mut rides: Vec<ShareableRide>) -> Result<Self> {
        rides.sort_by(|a, b| (a.degree(), &a.members).cmp(&(b.degree(), &b.members)));
        let mut seen = HashSet::new();
        let mut by_traveller: BTreeMap<TravellerId, Vec<usize>> = BTreeMap::new();
        for (id, ride) in rides.iter_mut().enumerate() {
            ride.id = id;
            if !seen.insert((ride.members.clone(), ride.sequence.clone())) {
                return Err(Error::contract(format!("duplicate ride {:?}", ride.members)));
            }
            for &m in &ride.members {
                by_traveller.entry(m).or_default().push(id);
            }
        }
        for (t, ids) in &by_traveller {
            let privates = ids.iter().filter(|&&i| rides[i].degree() == 1).count();
            if privates != 1 {
                return Err(Error::contract(format!("traveller {t} has {privates} private rides")));
            }
        }
        Ok(ShareabilityGraph { rides, by_traveller })
    }

    pub fn rides(&self) -> &[ShareableRide] {
        &self.rides
    }

    pub fn ride(&self, id: usize) -> &ShareableRide {
        &self.rides[id]
    }

    pub fn travellers(&self) -> impl Iterator<Item = TravellerId> + '_ {
        self.by_traveller.keys().copied()
    }

    pub fn traveller_count(&self) -> usize {
        self.by_traveller.len()
    }

    pub fn rides_of(&self, traveller: TravellerId) -> &[usize] {
        self.by_traveller.get(&traveller).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn shared_rides(&self) -> impl Iterator<Item = &ShareableRide> {
        self.rides.iter().filter(|r| r.degree() > 1)
    }

    /// Writes `rides.csv`: `ride_id,members,sequence,degree,d_s_km,that_s,tp_s`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["ride_id", "members", "sequence", "degree", "d_s_km", "that_s", "tp_s"])?;
        for r in &self.rides {
            w.write_record([
                r.id.to_string(),
                join(&r.members),
                join(&r.sequence),
                r.degree().to_string(),
                r.shared_km.to_string(),
                join(&r.shared_time_s),
                join(&r.pickup_delay_s),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

/// Request with its private-ride metrics resolved.
#[derive(Debug, Clone, Copy)]
struct Trip {
    req: TripRequest,
    km: f64,
    secs: f64,
}

/// Evaluates a pickup/drop-off sequence for the given requests under the
/// waiting schedule described in the module docs.
pub fn evaluate_sequence(
    requests: &[TripRequest],
    sequence: &[Stop],
    provider: &TravelTimeProvider,
) -> Result<ShareableRide> {
    let trips = requests
        .iter()
        .map(|r| {
            let (km, secs) = private_metrics(r, provider)?;
            Ok(Trip { req: *r, km, secs })
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Trip> = trips.iter().collect();
    let local = to_local(&refs, sequence)?;
    schedule(&refs, &local, provider)
}

fn to_local(trips: &[&Trip], sequence: &[Stop]) -> Result<Vec<(usize, StopKind)>> {
    sequence
        .iter()
        .map(|s| {
            trips
                .iter()
                .position(|t| t.req.id == s.traveller)
                .map(|i| (i, s.kind))
                .ok_or_else(|| Error::contract(format!("stop for unknown traveller {}", s.traveller)))
        })
        .collect()
}

/// `trips` must be sorted by id; `seq` holds local indices into `trips`.
fn schedule(trips: &[&Trip], seq: &[(usize, StopKind)], provider: &TravelTimeProvider) -> Result<ShareableRide> {
    let k = trips.len();
    let at = |(i, kind): (usize, StopKind)| match kind {
        StopKind::Pickup => trips[i].req.origin,
        StopKind::Dropoff => trips[i].req.destination,
    };
    let mut pick = vec![f64::NAN; k];
    let mut drop = vec![f64::NAN; k];
    let mut clock = trips[seq[0].0].req.request_time_s;
    let mut km = 0.0;
    pick[seq[0].0] = clock;
    for w in seq.windows(2) {
        let (from, to) = (at(w[0]), at(w[1]));
        km += provider.distance_km(from, to)?;
        clock += provider.travel_time_s(from, to)?;
        let (i, kind) = w[1];
        match kind {
            StopKind::Pickup => {
                clock = clock.max(trips[i].req.request_time_s);
                pick[i] = clock;
            }
            StopKind::Dropoff => drop[i] = clock,
        }
    }
    let members = trips.iter().map(|t| t.req.id).collect();
    let sequence = seq.iter().map(|&(i, kind)| Stop { traveller: trips[i].req.id, kind }).collect();
    let shared_time_s = (0..k).map(|i| drop[i] - pick[i]).collect();
    let pickup_delay_s = (0..k).map(|i| pick[i] - trips[i].req.request_time_s).collect();
    let private_km = trips.iter().map(|t| t.km).collect();
    let private_time_s = trips.iter().map(|t| t.secs).collect();
    if k == 1 {
        return ShareableRide::private(trips[0].req.id, trips[0].km, trips[0].secs);
    }
    ShareableRide::new(members, sequence, km, shared_time_s, pickup_delay_s, private_km, private_time_s)
}

/// Every ordering of `0..k`, lexicographic.
pub(crate) fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (0..k.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else { break };
        let j = (i + 1..k).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
    out
}

/// All sequences of `k` members in which every pickup precedes every drop-off.
pub(crate) fn pooled_sequences(k: usize) -> Vec<Vec<(usize, StopKind)>> {
    let perms = permutations(k);
    let mut out = Vec::with_capacity(perms.len() * perms.len());
    for p in &perms {
        for d in &perms {
            let mut s: Vec<(usize, StopKind)> = p.iter().map(|&i| (i, StopKind::Pickup)).collect();
            s.extend(d.iter().map(|&i| (i, StopKind::Dropoff)));
            out.push(s);
        }
    }
    out
}

/// Ranking among feasible orders of one member set: larger total utility
/// gain, then shorter vehicle distance. Earlier candidates win exact ties.
fn better(candidate: &(f64, f64), incumbent: &(f64, f64)) -> bool {
    candidate.0 > incumbent.0 || (candidate.0 == incumbent.0 && candidate.1 < incumbent.1)
}

/// Ride passes the filter and the pickup-delay cap.
pub fn admissible(ride: &ShareableRide, p: &FeasibilityParams, max_pickup_delay_s: f64) -> bool {
    ride.pickup_delay_s.iter().all(|&d| d <= max_pickup_delay_s) && exmas_feasible(ride, p)
}

/// Total utility gain over members, used to pick among feasible orders.
pub fn ride_score(ride: &ShareableRide, p: &FeasibilityParams) -> f64 {
    (0..ride.degree()).map(|i| utility_gain(ride, i, p)).sum()
}

fn best_of(
    trips: &[&Trip],
    sequences: impl Iterator<Item = Vec<(usize, StopKind)>>,
    provider: &TravelTimeProvider,
    p: &FeasibilityParams,
    cfg: &GraphConfig,
) -> Result<Option<ShareableRide>> {
    let mut best: Option<((f64, f64), ShareableRide)> = None;
    for seq in sequences {
        let ride = schedule(trips, &seq, provider)?;
        if !admissible(&ride, p, cfg.max_pickup_delay_s) {
            continue;
        }
        let key = (ride_score(&ride, p), ride.shared_km);
        if best.as_ref().is_none_or(|(b, _)| better(&key, b)) {
            best = Some((key, ride));
        }
    }
    Ok(best.map(|(_, r)| r))
}

/// Builds the graph with filter parameters taken from the mixture quantiles.
pub fn build_graph(
    requests: &[TripRequest],
    provider: &TravelTimeProvider,
    mix: &BehavioralMixture,
    fare_per_km: f64,
    cfg: &GraphConfig,
) -> Result<ShareabilityGraph> {
    cfg.validate()?;
    let params = cfg.feasibility_params(mix, fare_per_km)?;
    build_graph_with(requests, provider, &params, cfg)
}

/// Builds the graph with explicit filter parameters.
pub fn build_graph_with(
    requests: &[TripRequest],
    provider: &TravelTimeProvider,
    params: &FeasibilityParams,
    cfg: &GraphConfig,
) -> Result<ShareabilityGraph> {
    cfg.validate()?;
    let mut sorted: Vec<TripRequest> = requests.to_vec();
    sorted.sort_by_key(|r| r.id);
    if sorted.windows(2).any(|w| w[0].id == w[1].id) {
        return Err(Error::contract("request ids must be unique"));
    }
    let trips = sorted
        .iter()
        .map(|r| {
            let (km, secs) = private_metrics(r, provider)?;
            Ok(Trip { req: *r, km, secs })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rides: Vec<ShareableRide> =
        trips.iter().map(|t| ShareableRide::private(t.req.id, t.km, t.secs)).collect::<Result<_>>()?;

    // feasible member sets of the previous degree, as sorted local indices
    let mut level: Vec<(Vec<usize>, ShareableRide)> = Vec::new();
    let n = trips.len();
    for k in 2..=cfg.max_degree.min(n) {
        let candidates: Vec<Vec<usize>> = if k == 2 {
            (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| vec![i, j]))
                .filter(|s| pair_plausible(&trips[s[0]], &trips[s[1]], params, cfg))
                .collect()
        } else {
            extend(&level, n)
        };
        let full = k <= cfg.full_search_max_degree;
        let all_orders = if full { pooled_sequences(k) } else { Vec::new() };
        let next: Vec<(Vec<usize>, ShareableRide)> = candidates
            .par_iter()
            .map(|set| {
                let members: Vec<&Trip> = set.iter().map(|&i| &trips[i]).collect();
                let found = if full {
                    best_of(&members, all_orders.iter().cloned(), provider, params, cfg)?
                } else {
                    let parents = parent_orders(&level, set);
                    best_of(&members, parents.into_iter(), provider, params, cfg)?
                };
                Ok(found.map(|r| (set.clone(), r)))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        if next.is_empty() {
            break;
        }
        rides.extend(next.iter().map(|(_, r)| r.clone()));
        level = next;
    }
    ShareabilityGraph::from_rides(rides)
}

// Sound pre-filter on request times. If the earlier traveller `a` is picked
// up first they ride at least until the later request time, which bounds the
// gap through `a`'s utility gain; if `b` goes first, `a` waits at least the gap.
fn pair_plausible(a: &Trip, b: &Trip, p: &FeasibilityParams, cfg: &GraphConfig) -> bool {
    let (early, late) = if a.req.request_time_s <= b.req.request_time_s { (a, b) } else { (b, a) };
    let gap = late.req.request_time_s - early.req.request_time_s;
    if gap <= cfg.max_pickup_delay_s || p.vot <= 0.0 || p.pfs <= 0.0 {
        return true;
    }
    let ride_bound = (p.flat_discount * p.fare_per_km * early.km * 3600.0 / p.vot + early.secs) / p.pfs;
    gap <= ride_bound
}

/// Member sets of size `k` whose every `(k - 1)`-subset is in `level`.
fn extend(level: &[(Vec<usize>, ShareableRide)], n: usize) -> Vec<Vec<usize>> {
    let known: HashSet<&[usize]> = level.iter().map(|(s, _)| s.as_slice()).collect();
    let mut out = Vec::new();
    for (set, _) in level {
        let last = *set.last().unwrap();
        'next: for j in last + 1..n {
            let mut cand = set.clone();
            cand.push(j);
            for skip in 0..cand.len() - 1 {
                let sub: Vec<usize> = cand.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, &v)| v).collect();
                if !known.contains(sub.as_slice()) {
                    continue 'next;
                }
            }
            out.push(cand);
        }
    }
    out
}

/// Orders obtained by inserting the newest member into every feasible parent
/// ride's order (pickup among pickups, drop-off among drop-offs).
fn parent_orders(level: &[(Vec<usize>, ShareableRide)], set: &[usize]) -> Vec<Vec<(usize, StopKind)>> {
    let k = set.len();
    let mut out = Vec::new();
    for skip in 0..k {
        let sub: Vec<usize> = set.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, &v)| v).collect();
        let Some((_, parent)) = level.iter().find(|(s, _)| *s == sub) else { continue };
        // parent stops as local indices within `set`
        let local =
            |t: TravellerId| parent.members.iter().position(|&m| m == t).map(|p| if p >= skip { p + 1 } else { p });
        let base: Vec<(usize, StopKind)> =
            parent.sequence.iter().map(|s| (local(s.traveller).unwrap(), s.kind)).collect();
        let (pickups, drops) = base.split_at(k - 1);
        for pi in 0..k {
            for di in 0..k {
                let mut p = pickups.to_vec();
                p.insert(pi, (skip, StopKind::Pickup));
                let mut d = drops.to_vec();
                d.insert(di, (skip, StopKind::Dropoff));
                p.extend(d);
                out.push(p);
            }
        }
    }
    out
}
