//! Offer selection: an exact partition of travellers into priced rides that
//! maximizes the total objective.
//!
//! The set-partitioning program is solved by depth-first branch-and-bound.
//! Each node covers the uncovered traveller with the smallest id by one of its
//! rides. Nodes are pruned with a per-traveller share bound and, on larger
//! subproblems, the linear relaxation. Independent groups of travellers (no
//! ride links them) are solved separately.
//!
//! Among optimal offers (objectives within a relative `1e-10`) the one with the
//! lexicographically smallest assignment vector wins: ride id of the first
//! traveller, then of the next traveller, and so on.

use std::collections::BTreeMap;
use std::path::Path;

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, Solution, Variable};
use serde::Serialize;

use crate::acceptance::{candidate_discounts, ride_curves, AcceptanceCurve};
use crate::demand::TravellerId;
use crate::error::{Error, Result};
use crate::population::DiscretizedGrid;
use crate::pricing::{evaluate, optimize_over_candidates, price_private, PricedRide, PricingConfig};
use crate::shareability::ShareabilityGraph;

const TIE_TOLERANCE: f64 = 1e-10;
const LAGRANGE_ITERATIONS: usize = 2000;
/// Distance from 0 or 1 below which a relaxed value counts as integral.
const INTEGRAL: f64 = 1e-9;

/// A set of items (local traveller indices) with its value.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub members: Vec<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveStats {
    pub nodes: usize,
    pub lp_solves: usize,
    pub components: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Chosen column indices, ascending.
    pub chosen: Vec<usize>,
    pub value: f64,
    pub stats: SolveStats,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchOptions {
    pub use_lp: bool,
    /// Subproblems with fewer uncovered travellers rely on the share bound only.
    pub lp_min_items: usize,
    /// Components with more columns are first cut down by reduced cost and
    /// searched in batches of this size.
    pub restricted_columns: usize,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions { use_lp: true, lp_min_items: 10, restricted_columns: 1500 }
    }
}

/// Tolerance below which two partition values count as tied. Relative to
/// the total absolute value of the singletons, so scaling all values by a
/// positive constant leaves the choice unchanged.
pub fn tie_tolerance(cols: &[Column]) -> f64 {
    let singles: f64 = cols.iter().filter(|c| c.members.len() == 1).map(|c| c.value.abs()).sum();
    TIE_TOLERANCE * singles
}

/// Maximum-value exact cover of `0..n_items` by `cols`. Every item needs a
/// singleton column.
pub fn solve_partition(n_items: usize, cols: &[Column], opts: MatchOptions) -> Result<Partition> {
    let mut single = vec![false; n_items];
    for c in cols {
        if c.members.is_empty() || c.members.iter().any(|&m| m >= n_items) {
            return Err(Error::contract("column members out of range"));
        }
        if !c.members.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::contract("column members must be sorted and unique"));
        }
        if !c.value.is_finite() {
            return Err(Error::domain("column value must be finite"));
        }
        if c.members.len() == 1 {
            single[c.members[0]] = true;
        }
    }
    if let Some(i) = single.iter().position(|s| !s) {
        return Err(Error::contract(format!("item {i} has no singleton column")));
    }
    let tol = tie_tolerance(cols);

    let mut stats = SolveStats { nodes: 0, lp_solves: 0, components: 0 };
    let mut chosen = Vec::new();
    for (items, col_ids) in components(n_items, cols) {
        stats.components += 1;
        let (sub_chosen, sub_stats) = solve_component(&items, &col_ids, cols, opts, tol)?;
        stats.nodes += sub_stats.nodes;
        stats.lp_solves += sub_stats.lp_solves;
        chosen.extend(sub_chosen);
    }
    chosen.sort_unstable();
    let value = chosen.iter().map(|&c| cols[c].value).sum();
    Ok(Partition { chosen, value, stats })
}

/// Groups of items linked by multi-item columns, with their column indices.
fn components(n_items: usize, cols: &[Column]) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut parent: Vec<usize> = (0..n_items).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        let mut y = x;
        while parent[y] != r {
            let next = parent[y];
            parent[y] = r;
            y = next;
        }
        r
    }
    for c in cols {
        let a = find(&mut parent, c.members[0]);
        for &m in &c.members[1..] {
            let b = find(&mut parent, m);
            if a != b {
                parent[b.max(a)] = a.min(b);
            }
        }
    }
    let mut groups: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for i in 0..n_items {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().0.push(i);
    }
    for (ci, c) in cols.iter().enumerate() {
        let r = find(&mut parent, c.members[0]);
        groups.get_mut(&r).unwrap().1.push(ci);
    }
    groups.into_values().collect()
}

fn solve_component(
    items: &[usize],
    col_ids: &[usize],
    all: &[Column],
    opts: MatchOptions,
    tol: f64,
) -> Result<(Vec<usize>, SolveStats)> {
    let local_of: BTreeMap<usize, usize> = items.iter().enumerate().map(|(l, &g)| (g, l)).collect();
    let members: Vec<Vec<usize>> =
        col_ids.iter().map(|&c| all[c].members.iter().map(|m| local_of[m]).collect()).collect();
    let values: Vec<f64> = col_ids.iter().map(|&c| all[c].value).collect();
    let n = items.len();
    let mut stats = SolveStats { nodes: 0, lp_solves: 0, components: 1 };
    let everything: Vec<usize> = (0..members.len()).collect();
    if !(opts.use_lp && n >= opts.lp_min_items && members.len() > opts.restricted_columns) {
        let mut comp = Component::new(n, &members, &values, &everything, opts, None);
        let best = comp.optimum(f64::NEG_INFINITY)?;
        let chosen = comp.first_within(best - tol)?;
        comp.merge_stats(&mut stats);
        return Ok((chosen.iter().map(|&c| col_ids[c]).collect(), stats));
    }

    // Any partition using column c is worth at most reach[c]. The optimum is
    // found over batches of the most promising columns until the columns
    // left out are provably below it; the assignment is then chosen among
    // the columns that can come within the tie tolerance.
    let lag = lagrangian(n, &members, &values);
    let reach: Vec<f64> = members
        .iter()
        .zip(&values)
        .map(|(m, &v)| lag.bound + v - m.iter().map(|&i| lag.prices[i]).sum::<f64>())
        .collect();
    let safety = 1e-9 * (1.0 + lag.bound.abs());
    let forced = |c: usize| members[c].len() == 1 || lag.incumbent_cols.binary_search(&c).is_ok();
    let within = |floor: f64| -> Vec<usize> {
        everything.iter().copied().filter(|&c| forced(c) || reach[c] >= floor - tol - safety).collect()
    };
    let mut floor = lag.incumbent;
    let mut cap = opts.restricted_columns.max(n + lag.incumbent_cols.len());
    let best = loop {
        let mut batch = within(floor);
        let complete = batch.len() <= cap;
        let mut dropped = f64::NEG_INFINITY;
        if !complete {
            batch.sort_by(|&a, &b| forced(b).cmp(&forced(a)).then(reach[b].total_cmp(&reach[a])).then(a.cmp(&b)));
            dropped = batch[cap..].iter().map(|&c| reach[c]).fold(f64::NEG_INFINITY, f64::max);
            batch.truncate(cap);
            batch.sort_unstable();
        }
        let mut comp = Component::new(n, &members, &values, &batch, opts, Some(&lag.prices));
        let value = comp.optimum(lag.incumbent)?;
        comp.merge_stats(&mut stats);
        if complete || dropped < value - tol - safety {
            break value;
        }
        floor = floor.max(value);
        cap *= 2;
    };
    let finalists = within(best);
    let mut comp = Component::new(n, &members, &values, &finalists, opts, Some(&lag.prices));
    let chosen = comp.first_within(best - tol)?;
    comp.merge_stats(&mut stats);
    Ok((chosen.iter().map(|&c| col_ids[c]).collect(), stats))
}

struct Lagrangian {
    /// Upper bound on the value of any partition.
    bound: f64,
    prices: Vec<f64>,
    /// Value of a feasible partition found on the way.
    incumbent: f64,
    /// Its columns, ascending.
    incumbent_cols: Vec<usize>,
}

/// Subgradient descent on the Lagrangian dual of the covering constraints.
/// Any prices give a valid bound; the descent only makes it tighter.
fn lagrangian(n: usize, members: &[Vec<usize>], values: &[f64]) -> Lagrangian {
    let mut prices = vec![f64::NEG_INFINITY; n];
    for (m, &v) in members.iter().zip(values) {
        for &i in m {
            prices[i] = prices[i].max(v / m.len() as f64);
        }
    }
    let mut best = Lagrangian {
        bound: f64::INFINITY,
        prices: prices.clone(),
        incumbent: f64::NEG_INFINITY,
        incumbent_cols: Vec::new(),
    };
    let mut step_scale = 2.0;
    let mut stall = 0;
    let mut reduced = vec![0.0; members.len()];
    for it in 0..LAGRANGE_ITERATIONS {
        let mut bound: f64 = prices.iter().sum();
        let mut grad = vec![1.0; n];
        for (c, (m, &v)) in members.iter().zip(values).enumerate() {
            reduced[c] = v - m.iter().map(|&i| prices[i]).sum::<f64>();
            if reduced[c] > 0.0 {
                bound += reduced[c];
                for &i in m {
                    grad[i] -= 1.0;
                }
            }
        }
        if bound < best.bound {
            best.bound = bound;
            best.prices.clone_from(&prices);
            stall = 0;
        } else {
            stall += 1;
            if stall >= 30 {
                step_scale /= 2.0;
                stall = 0;
            }
        }
        if it % 10 == 0 {
            let (value, cols) = greedy(n, members, values, &reduced);
            if value > best.incumbent {
                best.incumbent = value;
                best.incumbent_cols = cols;
            }
        }
        let norm: f64 = grad.iter().map(|g| g * g).sum();
        let gap = best.bound - best.incumbent;
        if norm == 0.0 || step_scale < 1e-6 || gap <= 1e-12 * (1.0 + best.bound.abs()) {
            break;
        }
        let step = step_scale * gap / norm;
        for (p, g) in prices.iter_mut().zip(&grad) {
            *p -= step * g;
        }
    }
    best
}

/// Disjoint columns in order of decreasing reduced value; every column has
/// its singletons to fall back on, so the result is a partition.
fn greedy(n: usize, members: &[Vec<usize>], values: &[f64], reduced: &[f64]) -> (f64, Vec<usize>) {
    let mut order: Vec<usize> = (0..members.len()).collect();
    order.sort_by(|&a, &b| reduced[b].total_cmp(&reduced[a]).then(a.cmp(&b)));
    let mut covered = vec![false; n];
    let mut chosen = Vec::new();
    for c in order {
        if members[c].iter().all(|&i| !covered[i]) {
            for &i in &members[c] {
                covered[i] = true;
            }
            chosen.push(c);
        }
    }
    chosen.sort_unstable();
    (chosen.iter().map(|&c| values[c]).sum(), chosen)
}

/// Branch-and-bound over a subset of a component's columns.
struct Component {
    /// Component column index of each local column.
    subset: Vec<usize>,
    values: Vec<f64>,
    members: Vec<Vec<usize>>,
    /// Lagrangian prices of the items and reduced values of the columns.
    prices: Option<(Vec<f64>, Vec<f64>)>,
    /// Columns covering each item, ascending.
    by_item: Vec<Vec<usize>>,
    opts: MatchOptions,
    stats: SolveStats,
    vars: Vec<Variable>,
}

struct Node {
    covered: Vec<bool>,
    chosen: Vec<usize>,
    value: f64,
    lp: Option<Solution>,
}

impl Component {
    fn new(
        n: usize,
        members: &[Vec<usize>],
        values: &[f64],
        subset: &[usize],
        opts: MatchOptions,
        prices: Option<&[f64]>,
    ) -> Self {
        let members: Vec<Vec<usize>> = subset.iter().map(|&c| members[c].clone()).collect();
        let values: Vec<f64> = subset.iter().map(|&c| values[c]).collect();
        let mut by_item = vec![Vec::new(); n];
        for (c, m) in members.iter().enumerate() {
            for &i in m {
                by_item[i].push(c);
            }
        }
        let prices = prices.map(|p| {
            let reduced = members.iter().zip(&values).map(|(m, &v)| v - m.iter().map(|&i| p[i]).sum::<f64>()).collect();
            (p.to_vec(), reduced)
        });
        Component {
            subset: subset.to_vec(),
            values,
            members,
            prices,
            by_item,
            opts,
            stats: SolveStats { nodes: 0, lp_solves: 0, components: 0 },
            vars: Vec::new(),
        }
    }

    fn merge_stats(&self, stats: &mut SolveStats) {
        stats.nodes += self.stats.nodes;
        stats.lp_solves += self.stats.lp_solves;
    }

    /// Best total value of a partition, given the value of one that is known
    /// to exist among the columns.
    fn optimum(&mut self, known: f64) -> Result<f64> {
        let root = self.root()?;
        let mut best: f64 = (0..self.by_item.len())
            .map(|i| self.by_item[i].iter().find(|&&c| self.members[c].len() == 1).map(|&c| self.values[c]).unwrap())
            .sum();
        best = best.max(known);
        self.improve(&root, &mut best)?;
        Ok(best)
    }

    /// Lexicographically first assignment worth at least `threshold`, as
    /// component column indices.
    fn first_within(&mut self, threshold: f64) -> Result<Vec<usize>> {
        let root = self.root()?;
        let mut found = None;
        self.search_first(&root, threshold, &mut found)?;
        let chosen = found.ok_or_else(|| Error::Lp("no assignment reached the optimum".into()))?;
        Ok(chosen.iter().map(|&c| self.subset[c]).collect())
    }

    fn root(&mut self) -> Result<Node> {
        let n = self.by_item.len();
        let lp = if self.opts.use_lp && n >= self.opts.lp_min_items {
            match self.cold_lp(&[])? {
                Some(sol) => Some(sol),
                None => return Err(Error::Lp("relaxation infeasible despite singletons".into())),
            }
        } else {
            None
        };
        Ok(Node { covered: vec![false; n], chosen: Vec::new(), value: 0.0, lp })
    }

    /// Linear relaxation with the columns in `fixed` forced to one.
    fn cold_lp(&mut self, fixed: &[usize]) -> Result<Option<Solution>> {
        let mut problem = Problem::new(OptimizationDirection::Maximize);
        self.vars = self
            .values
            .iter()
            .enumerate()
            .map(|(c, &v)| problem.add_var(v, (if fixed.contains(&c) { 1.0 } else { 0.0 }, 1.0)))
            .collect();
        for cover in &self.by_item {
            let expr: LinearExpr = cover.iter().map(|&c| (self.vars[c], 1.0)).collect();
            problem.add_constraint(expr, ComparisonOp::Eq, 1.0);
        }
        self.stats.lp_solves += 1;
        match problem.solve() {
            Ok(outcome) => Ok(Some(outcome.into_solution().map_err(|_| Error::Lp("relaxation interrupted".into()))?)),
            Err(microlp::Error::Infeasible) => Ok(None),
            Err(e) => Err(Error::Lp(e.to_string())),
        }
    }

    fn available(&self, covered: &[bool], c: usize) -> bool {
        self.members[c].iter().all(|&m| !covered[m])
    }

    /// Upper bound from giving every uncovered item its best per-member share.
    fn share_bound(&self, covered: &[bool], value: f64) -> f64 {
        let mut total = value;
        for (i, cover) in self.by_item.iter().enumerate() {
            if covered[i] {
                continue;
            }
            total += cover
                .iter()
                .filter(|&&c| self.available(covered, c))
                .map(|&c| self.values[c] / self.members[c].len() as f64)
                .fold(f64::NEG_INFINITY, f64::max);
        }
        total
    }

    /// Upper bound from the Lagrangian prices; infinite without them.
    fn price_bound(&self, covered: &[bool], value: f64) -> f64 {
        let Some((prices, reduced)) = &self.prices else { return f64::INFINITY };
        let mut total = value;
        for (i, &p) in prices.iter().enumerate() {
            if !covered[i] {
                total += p;
            }
        }
        for (c, &r) in reduced.iter().enumerate() {
            if r > 0.0 && self.available(covered, c) {
                total += r;
            }
        }
        // the sums above round differently from the partition values
        total + 1e-9 * (1.0 + total.abs())
    }

    /// Uncovered item whose cover is split most evenly by the relaxation.
    fn most_fractional(&self, node: &Node, x: &[f64]) -> usize {
        let mut pick = (usize::MAX, f64::NEG_INFINITY);
        for (i, cover) in self.by_item.iter().enumerate() {
            if node.covered[i] {
                continue;
            }
            let largest = cover.iter().map(|&c| x[c]).fold(0.0, f64::max);
            if 1.0 - largest > pick.1 {
                pick = (i, 1.0 - largest);
            }
        }
        pick.0
    }

    /// Available columns covering `item`, with the bound of choosing each.
    fn branches(&self, node: &Node, item: usize) -> Vec<(usize, f64)> {
        let mut covered = node.covered.clone();
        let mut out = Vec::new();
        for &c in &self.by_item[item] {
            if !self.available(&node.covered, c) {
                continue;
            }
            for &m in &self.members[c] {
                covered[m] = true;
            }
            let value = node.value + self.values[c];
            let bound = self.share_bound(&covered, value).min(self.price_bound(&covered, value));
            out.push((c, bound));
            for &m in &self.members[c] {
                covered[m] = false;
            }
        }
        out
    }

    /// Child with column `c` chosen, or `None` when its relaxation is
    /// infeasible.
    fn child(&mut self, node: &Node, c: usize) -> Result<Option<Node>> {
        self.stats.nodes += 1;
        let mut covered = node.covered.clone();
        for &m in &self.members[c] {
            covered[m] = true;
        }
        let remaining = covered.iter().filter(|c| !**c).count();
        let mut chosen = node.chosen.clone();
        chosen.push(c);
        let lp = match &node.lp {
            Some(parent) if remaining >= self.opts.lp_min_items => {
                self.stats.lp_solves += 1;
                match parent.clone().fix_var(self.vars[c], 1.0) {
                    Ok(outcome) => {
                        Some(outcome.into_solution().map_err(|_| Error::Lp("relaxation interrupted".into()))?)
                    }
                    // warm starts occasionally report infeasibility wrongly;
                    // a cold solve settles it
                    Err(microlp::Error::Infeasible) => match self.cold_lp(&chosen)? {
                        Some(sol) => Some(sol),
                        None => return Ok(None),
                    },
                    Err(e) => return Err(Error::Lp(e.to_string())),
                }
            }
            _ => None,
        };
        Ok(Some(Node { covered, chosen, value: node.value + self.values[c], lp }))
    }

    // The relaxation fixes the columns chosen along the path, so its
    // objective already includes `node.value`.
    fn lp_bound(node: &Node) -> f64 {
        node.lp.as_ref().map_or(f64::INFINITY, |s| {
            let obj = s.objective();
            obj + 1e-9 * (1.0 + obj.abs())
        })
    }

    fn improve(&mut self, node: &Node, best: &mut f64) -> Result<()> {
        if node.covered.iter().all(|&c| c) {
            if node.value > *best {
                *best = node.value;
            }
            return Ok(());
        }
        let item = match &node.lp {
            Some(sol) => {
                let x: Vec<f64> = self.vars.iter().map(|&v| sol.var_value(v)).collect();
                if x.iter().all(|&v| v.min(1.0 - v).abs() <= INTEGRAL) {
                    // the relaxation is a partition already
                    let value = x.iter().zip(&self.values).filter(|(v, _)| **v > 0.5).map(|(_, w)| w).sum();
                    if value > *best {
                        *best = value;
                    }
                    return Ok(());
                }
                self.most_fractional(node, &x)
            }
            None => node.covered.iter().position(|c| !c).unwrap(),
        };
        let mut branches = self.branches(node, item);
        // columns the relaxation likes first, to raise the incumbent early
        let weight = |c: usize| node.lp.as_ref().map_or(0.0, |s| s.var_value(self.vars[c]));
        let mut keyed: Vec<(f64, f64, usize)> = branches.drain(..).map(|(c, b)| (weight(c), b, c)).collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));
        for (_, share, c) in keyed {
            if share <= *best {
                continue;
            }
            let Some(kid) = self.child(node, c)? else { continue };
            if Self::lp_bound(&kid) <= *best {
                continue;
            }
            self.improve(&kid, best)?;
        }
        Ok(())
    }

    fn search_first(&mut self, node: &Node, threshold: f64, found: &mut Option<Vec<usize>>) -> Result<()> {
        if node.covered.iter().all(|&c| c) {
            if node.value >= threshold {
                let mut chosen = node.chosen.clone();
                chosen.sort_unstable();
                *found = Some(chosen);
            }
            return Ok(());
        }
        let first = node.covered.iter().position(|c| !c).unwrap();
        for (c, share) in self.branches(node, first) {
            if share < threshold {
                continue;
            }
            let Some(kid) = self.child(node, c)? else { continue };
            if Self::lp_bound(&kid) < threshold {
                continue;
            }
            self.search_first(&kid, threshold, found)?;
            if found.is_some() {
                return Ok(());
            }
        }
        Ok(())
    }
}

/// A selected offer: which rides are proposed and to whom.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Offer {
    /// Selected ride ids, ascending.
    pub selected: Vec<usize>,
    pub assignment: BTreeMap<TravellerId, usize>,
    pub total_objective: f64,
    pub stats: SolveStats,
}

/// Solves the offer over every priced ride of the graph. Rides without a
/// pricing are left out.
pub fn solve_offer(graph: &ShareabilityGraph, priced: &[PricedRide]) -> Result<Offer> {
    solve_offer_with(graph, priced, MatchOptions::default())
}

pub fn solve_offer_with(graph: &ShareabilityGraph, priced: &[PricedRide], opts: MatchOptions) -> Result<Offer> {
    let travellers: Vec<TravellerId> = graph.travellers().collect();
    let index: BTreeMap<TravellerId, usize> = travellers.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let mut by_ride: BTreeMap<usize, &PricedRide> = BTreeMap::new();
    for p in priced {
        if p.ride_id >= graph.rides().len() {
            return Err(Error::contract(format!("priced ride {} not in graph", p.ride_id)));
        }
        if by_ride.insert(p.ride_id, p).is_some() {
            return Err(Error::contract(format!("ride {} priced twice", p.ride_id)));
        }
    }
    let ride_ids: Vec<usize> = by_ride.keys().copied().collect();
    let cols: Vec<Column> = ride_ids
        .iter()
        .map(|&id| Column {
            members: graph.ride(id).members.iter().map(|m| index[m]).collect(),
            value: by_ride[&id].objective,
        })
        .collect();
    for (t, &i) in &index {
        if !cols.iter().any(|c| c.members == [i]) {
            return Err(Error::contract(format!("traveller {t} has no priced private ride")));
        }
    }
    let part = solve_partition(travellers.len(), &cols, opts)?;
    let selected: Vec<usize> = part.chosen.iter().map(|&c| ride_ids[c]).collect();
    let mut assignment = BTreeMap::new();
    for &r in &selected {
        for &m in &graph.ride(r).members {
            assignment.insert(m, r);
        }
    }
    Ok(Offer { selected, assignment, total_objective: part.value, stats: part.stats })
}

/// Writes `offer.csv`: `traveller_id,ride_id,degree,discount,expected_profitability`.
pub fn write_offer_csv(path: &Path, offer: &Offer, graph: &ShareabilityGraph, priced: &[PricedRide]) -> Result<()> {
    let by_ride: BTreeMap<usize, &PricedRide> = priced.iter().map(|p| (p.ride_id, p)).collect();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["traveller_id", "ride_id", "degree", "discount", "expected_profitability"])?;
    for (&t, &r) in &offer.assignment {
        let ride = graph.ride(r);
        let p = by_ride.get(&r).ok_or_else(|| Error::contract(format!("selected ride {r} has no pricing")))?;
        let i = ride.member_index(t).unwrap();
        w.write_record([
            t.to_string(),
            r.to_string(),
            ride.degree().to_string(),
            p.discounts[i].to_string(),
            p.profitability.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoremCheck {
    /// Per-ride optimal pricing followed by matching.
    pub decomposed: f64,
    /// Best total over every matching and every combination of candidate
    /// discount vectors of its rides.
    pub joint: f64,
    pub holds: bool,
}

/// Compares ride-by-ride pricing plus matching against a joint brute force
/// over pricings and matchings. Limited to six travellers.
pub fn verify_local_global(
    graph: &ShareabilityGraph,
    grid: &DiscretizedGrid,
    cfg: &PricingConfig,
) -> Result<TheoremCheck> {
    let n = graph.traveller_count();
    if n > 6 {
        return Err(Error::domain(format!("joint brute force limited to 6 travellers, got {n}")));
    }
    let opts = cfg.search.candidate_options();
    // every discount vector of every ride with its objective
    let mut tables: Vec<Vec<f64>> = Vec::with_capacity(graph.rides().len());
    let mut priced = Vec::with_capacity(graph.rides().len());
    for ride in graph.rides() {
        if ride.degree() == 1 {
            let p = price_private(ride, cfg.guaranteed_discount, cfg)?;
            tables.push(vec![p.objective]);
            priced.push(p);
            continue;
        }
        let curves: Vec<AcceptanceCurve> = ride_curves(ride, grid, cfg.fare_per_km, cfg.degree_rule)?;
        let lists: Vec<Vec<f64>> =
            curves.iter().map(|c| candidate_discounts(c, cfg.guaranteed_discount, opts)).collect();
        priced.push(optimize_over_candidates(ride, &curves, &lists, cfg)?);
        let mut table = Vec::new();
        let mut idx = vec![0usize; lists.len()];
        'all: loop {
            let v: Vec<f64> = idx.iter().zip(&lists).map(|(&i, l)| l[i]).collect();
            table.push(evaluate(ride, &curves, &v, cfg)?.objective);
            for j in (0..idx.len()).rev() {
                idx[j] += 1;
                if idx[j] < lists[j].len() {
                    continue 'all;
                }
                idx[j] = 0;
            }
            break;
        }
        tables.push(table);
    }
    let decomposed = solve_offer(graph, &priced)?.total_objective;

    let travellers: Vec<TravellerId> = graph.travellers().collect();
    let mut joint = f64::NEG_INFINITY;
    let mut stack = Vec::new();
    all_matchings(graph, &travellers, &mut vec![false; n], &mut stack, &mut |rides| {
        // every combination of one vector per ride
        let mut idx = vec![0usize; rides.len()];
        'combo: loop {
            let total: f64 = rides.iter().zip(&idx).map(|(&r, &i)| tables[r][i]).sum();
            joint = joint.max(total);
            for j in (0..idx.len()).rev() {
                idx[j] += 1;
                if idx[j] < tables[rides[j]].len() {
                    continue 'combo;
                }
                idx[j] = 0;
            }
            break;
        }
    });
    Ok(TheoremCheck { decomposed, joint, holds: (decomposed - joint).abs() <= 1e-9 })
}

fn all_matchings(
    graph: &ShareabilityGraph,
    travellers: &[TravellerId],
    covered: &mut Vec<bool>,
    stack: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]),
) {
    let Some(first) = covered.iter().position(|c| !c) else {
        visit(stack);
        return;
    };
    for &r in graph.rides_of(travellers[first]) {
        let idx: Vec<usize> = graph.ride(r).members.iter().map(|m| travellers.binary_search(m).unwrap()).collect();
        if idx.iter().any(|&i| covered[i]) {
            continue;
        }
        for &i in &idx {
            covered[i] = true;
        }
        stack.push(r);
        all_matchings(graph, travellers, covered, stack, visit);
        stack.pop();
        for &i in &idx {
            covered[i] = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn col(members: &[usize], value: f64) -> Column {
        Column { members: members.to_vec(), value }
    }

    #[test]
    fn single_item() {
        let p = solve_partition(1, &[col(&[0], 1.425)], MatchOptions::default()).unwrap();
        assert_eq!(p.chosen, vec![0]);
        assert_eq!(p.value, 1.425);
    }

    #[test]
    fn shared_pair_beats_privates() {
        let cols = [col(&[0], 1.425), col(&[1], 1.425), col(&[0, 1], 3.3)];
        let p = solve_partition(2, &cols, MatchOptions::default()).unwrap();
        assert_eq!(p.chosen, vec![2]);
        let worse = [col(&[0], 1.425), col(&[1], 1.425), col(&[0, 1], 2.8)];
        assert_eq!(solve_partition(2, &worse, MatchOptions::default()).unwrap().chosen, vec![0, 1]);
    }

    #[test]
    fn missing_singleton_is_contract_error() {
        let cols = [col(&[0], 1.0), col(&[0, 1], 3.0)];
        assert!(matches!(solve_partition(2, &cols, MatchOptions::default()), Err(Error::Contract(_))));
    }

    #[test]
    fn ties_pick_smallest_assignment() {
        // {0,1}+{2} and {0}+{1,2} are worth the same
        let cols = [col(&[0], 1.0), col(&[1], 1.0), col(&[2], 1.0), col(&[0, 1], 3.0), col(&[1, 2], 3.0)];
        let p = solve_partition(3, &cols, MatchOptions::default()).unwrap();
        assert_eq!(p.chosen, vec![0, 4]);
    }

    fn brute(n: usize, cols: &[Column]) -> f64 {
        fn go(cols: &[Column], covered: &mut Vec<bool>, value: f64, best: &mut f64) {
            let Some(first) = covered.iter().position(|c| !c) else {
                *best = best.max(value);
                return;
            };
            for c in cols.iter().filter(|c| c.members[0] == first) {
                if c.members.iter().any(|&m| covered[m]) {
                    continue;
                }
                c.members.iter().for_each(|&m| covered[m] = true);
                go(cols, covered, value + c.value, best);
                c.members.iter().for_each(|&m| covered[m] = false);
            }
        }
        let mut best = f64::NEG_INFINITY;
        go(cols, &mut vec![false; n], 0.0, &mut best);
        best
    }

    fn random_instance(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> Vec<Column> {
        let mut cols: Vec<Column> = (0..n).map(|i| col(&[i], 1.425)).collect();
        for _ in 0..extra {
            let k = rng.random_range(2..=4.min(n));
            let mut m: Vec<usize> = rand::seq::index::sample(rng, n, k).into_vec();
            m.sort_unstable();
            if cols.iter().any(|c| c.members == m) {
                continue;
            }
            cols.push(col(&m, rng.random_range(1.3..1.8) * k as f64));
        }
        cols
    }

    #[test]
    fn lp_and_share_bounds_agree_with_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.random_range(2..=10);
            let cols = random_instance(&mut rng, n, 25);
            let lp = MatchOptions { use_lp: true, lp_min_items: 2, restricted_columns: usize::MAX };
            let plain = MatchOptions { use_lp: false, ..lp };
            let reduced = MatchOptions { restricted_columns: 0, ..lp };
            let lp = solve_partition(n, &cols, lp).unwrap();
            let plain = solve_partition(n, &cols, plain).unwrap();
            let reduced = solve_partition(n, &cols, reduced).unwrap();
            let b = brute(n, &cols);
            assert!((lp.value - b).abs() < 1e-9);
            assert_eq!(lp.chosen, plain.chosen);
            assert_eq!(lp.chosen, reduced.chosen);
        }
    }

    #[test]
    fn offer_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let n = 8;
            let cols = random_instance(&mut rng, n, 20);
            let p = solve_partition(n, &cols, MatchOptions::default()).unwrap();
            assert!(p.value >= 1.425 * n as f64 - 1e-12);
            // dropping an unselected column changes nothing
            let drop = (0..cols.len()).find(|c| !p.chosen.contains(c)).unwrap();
            if cols[drop].members.len() > 1 {
                let mut fewer = cols.clone();
                fewer.remove(drop);
                let q = solve_partition(n, &fewer, MatchOptions::default()).unwrap();
                let remap: Vec<usize> = p.chosen.iter().map(|&c| if c > drop { c - 1 } else { c }).collect();
                assert_eq!(q.chosen, remap);
            }
            let scaled: Vec<Column> = cols.iter().map(|c| col(&c.members, c.value * 3.7)).collect();
            assert_eq!(solve_partition(n, &scaled, MatchOptions::default()).unwrap().chosen, p.chosen);
        }
    }
}
