//! Study pipeline: demand, graph, acceptance curves, pricing under each
//! strategy, matching, and the report files behind the KPI table and plots.
//!
//! Scenario files are TOML. Every section is optional; unknown keys are
//! rejected.
//!
//! ```toml
//! seed = 42
//! strategies = ["personalised", "flat:0.15", "flat:0.2", "private"]
//!
//! [pricing]
//! fare_per_km = 1.5
//! guaranteed_discount = 0.05
//!
//! [graph]
//! alpha = 0.2
//! flat_discount = 0.4
//! max_degree = 4
//!
//! [population]
//! preset = "nyc-4class"
//! n_vot = 10
//! n_pfs = 10
//!
//! [demand]
//! rate_per_hour = 300
//! batch_minutes = 30
//!
//! [travel]
//! mode = "euclidean"
//! speed_kmh = 18
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acceptance::{ride_curves, AcceptanceCurve};
use crate::demand::{load_requests, Point, TravelMatrix, TravelTimeProvider, TripRequest};
use crate::error::{Error, Result};
use crate::matching::{solve_offer, Offer};
use crate::population::{BehavioralClass, BehavioralMixture, DiscretizedGrid, Truncation};
use crate::pricing::{price_ride, PricedRide, PricingConfig, Strategy};
use crate::shareability::{build_graph, GraphConfig, ShareabilityGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PopulationConfig {
    /// Named mixture; ignored when `classes` is given.
    pub preset: Option<String>,
    pub classes: Option<Vec<BehavioralClass>>,
    pub truncation: Truncation,
    /// Grid points per class for the value of time.
    pub n_vot: usize,
    /// Grid points per class for the penalty for sharing.
    pub n_pfs: usize,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        PopulationConfig {
            preset: Some("nyc-4class".into()),
            classes: None,
            truncation: Truncation::default(),
            n_vot: 10,
            n_pfs: 10,
        }
    }
}

impl PopulationConfig {
    pub fn mixture(&self) -> Result<BehavioralMixture> {
        match (&self.classes, &self.preset) {
            (Some(classes), _) => BehavioralMixture::new(classes.clone(), self.truncation),
            (None, Some(name)) => Ok(BehavioralMixture::preset(name)?.with_truncation(self.truncation)),
            (None, None) => Err(Error::Config("population needs a preset or classes".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemandConfig {
    /// Request file; when absent requests are generated.
    pub requests: Option<PathBuf>,
    pub rate_per_hour: f64,
    pub batch_minutes: f64,
    /// Side of the square service area, km.
    pub area_km: f64,
    pub min_trip_km: f64,
}

impl Default for DemandConfig {
    fn default() -> Self {
        DemandConfig { requests: None, rate_per_hour: 300.0, batch_minutes: 30.0, area_km: 8.0, min_trip_km: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TravelMode {
    Euclidean,
    Manhattan,
    Haversine,
    Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TravelConfig {
    pub mode: TravelMode,
    /// Door-to-door speed; 18 km/h is typical of Manhattan traffic.
    pub speed_kmh: f64,
    /// Square CSV of seconds, required for the matrix mode.
    pub matrix: Option<PathBuf>,
}

impl Default for TravelConfig {
    fn default() -> Self {
        TravelConfig { mode: TravelMode::Euclidean, speed_kmh: 18.0, matrix: None }
    }
}

impl TravelConfig {
    pub fn provider(&self) -> Result<TravelTimeProvider> {
        if !(self.speed_kmh > 0.0 && self.speed_kmh.is_finite()) {
            return Err(Error::Config("speed_kmh must be positive".into()));
        }
        let speed_kmh = self.speed_kmh;
        Ok(match self.mode {
            TravelMode::Euclidean => TravelTimeProvider::Euclidean { speed_kmh },
            TravelMode::Manhattan => TravelTimeProvider::Manhattan { speed_kmh },
            TravelMode::Haversine => TravelTimeProvider::Haversine { speed_kmh },
            TravelMode::Matrix => {
                let path =
                    self.matrix.as_ref().ok_or_else(|| Error::Config("matrix mode needs a matrix file".into()))?;
                TravelTimeProvider::Matrix(TravelMatrix::load(path, speed_kmh)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub strategies: Vec<String>,
    pub pricing: PricingConfig,
    pub graph: GraphConfig,
    pub population: PopulationConfig,
    pub demand: DemandConfig,
    pub travel: TravelConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 42,
            strategies: ["personalised", "flat:0.15", "flat:0.2", "private"].map(String::from).to_vec(),
            pricing: PricingConfig::default(),
            graph: GraphConfig::default(),
            population: PopulationConfig::default(),
            demand: DemandConfig::default(),
            travel: TravelConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a scenario file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(inner) = p.as_mut() {
                if inner.is_relative() {
                    *inner = base.join(&*inner);
                }
            }
        };
        resolve(&mut cfg.demand.requests);
        resolve(&mut cfg.travel.matrix);
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let config = |e: Error| match e {
            Error::Domain(m) => Error::Config(m),
            other => other,
        };
        self.parsed_strategies()?;
        self.pricing.validate().map_err(config)?;
        self.graph.validate().map_err(config)?;
        self.population.mixture().map_err(config)?;
        if self.population.n_vot == 0 || self.population.n_pfs == 0 {
            return Err(Error::Config("grid sizes must be at least 1".into()));
        }
        let d = &self.demand;
        if !(d.rate_per_hour >= 0.0 && d.batch_minutes >= 0.0 && d.area_km > 0.0 && d.min_trip_km >= 0.0) {
            return Err(Error::Config("demand generator parameters out of range".into()));
        }
        if d.min_trip_km >= d.area_km * std::f64::consts::SQRT_2 {
            return Err(Error::Config("min_trip_km longer than the service area allows".into()));
        }
        Ok(())
    }

    pub fn parsed_strategies(&self) -> Result<Vec<Strategy>> {
        if self.strategies.is_empty() {
            return Err(Error::Config("no strategies configured".into()));
        }
        self.strategies.iter().map(|s| s.parse()).collect()
    }
}

/// Uniform origins and destinations over the square area, trips shorter than
/// `min_trip_km` redrawn, request times uniform over the batch window. Ids
/// follow request time.
pub fn generate_demand(params: &DemandConfig, seed: u64) -> Result<Vec<TripRequest>> {
    let count = (params.rate_per_hour * params.batch_minutes / 60.0).round() as usize;
    let window = params.batch_minutes * 60.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(count);
    let side = params.area_km;
    for _ in 0..count {
        let (o, d) = loop {
            let o = Point::new(rng.random_range(0.0..side), rng.random_range(0.0..side));
            let d = Point::new(rng.random_range(0.0..side), rng.random_range(0.0..side));
            if (o.x - d.x).hypot(o.y - d.y) >= params.min_trip_km && o != d {
                break (o, d);
            }
        };
        let t = rng.random_range(0.0..window);
        draws.push((t, o, d));
    }
    draws.sort_by(|a, b| a.0.total_cmp(&b.0));
    draws.into_iter().enumerate().map(|(i, (t, o, d))| TripRequest::new(i as u64 + 1, o, d, t)).collect()
}

/// Requests of the scenario: the configured file or a generated batch.
pub fn scenario_requests(cfg: &ScenarioConfig) -> Result<Vec<TripRequest>> {
    match &cfg.demand.requests {
        Some(path) => load_requests(path),
        None => generate_demand(&cfg.demand, cfg.seed),
    }
}

/// Per-traveller discount bins of 5 %.
pub const DISCOUNT_BIN: f64 = 0.05;
/// Acceptance-probability bins of 10 %.
pub const ACCEPTANCE_BIN: f64 = 0.1;
/// Heatmap bins for distance saved and profitability.
pub const HEATMAP_BIN: f64 = 0.05;

fn bin(value: f64, width: f64) -> i64 {
    (value / width + 1e-9).floor() as i64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RideRecord {
    pub ride_id: usize,
    pub degree: usize,
    pub profitability: f64,
    pub distance_saved: f64,
    pub accept_prob: f64,
    pub selected: bool,
}

/// Aggregate figures of one strategy. Histogram keys are degrees and
/// lower bin edges in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub strategy: String,
    pub travellers: usize,
    pub selected_rides: usize,
    /// Σ Γ·degree over the offer divided by the number of travellers.
    pub average_profitability: f64,
    pub total_expected_distance: f64,
    pub total_objective: f64,
    /// Degree of the ride offered to the average traveller.
    pub mean_degree: f64,
    /// Mean discount over travellers offered a shared ride.
    pub mean_shared_discount: Option<f64>,
    pub degree_histogram: BTreeMap<usize, usize>,
    pub discount_histogram: BTreeMap<i64, usize>,
    #[serde(skip)]
    pub rides: Vec<RideRecord>,
}

#[derive(Debug, Clone)]
pub struct StrategyRun {
    pub strategy: Strategy,
    pub priced: Vec<PricedRide>,
    pub offer: Offer,
    pub report: StrategyReport,
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub requests: Vec<TripRequest>,
    pub grid: DiscretizedGrid,
    pub graph: ShareabilityGraph,
    /// Acceptance curves by ride id; empty for private rides.
    pub curves: Vec<Vec<AcceptanceCurve>>,
    pub runs: Vec<StrategyRun>,
}

pub fn build_curves(
    graph: &ShareabilityGraph,
    grid: &DiscretizedGrid,
    cfg: &PricingConfig,
) -> Result<Vec<Vec<AcceptanceCurve>>> {
    graph
        .rides()
        .par_iter()
        .map(|r| if r.degree() == 1 { Ok(Vec::new()) } else { ride_curves(r, grid, cfg.fare_per_km, cfg.degree_rule) })
        .collect()
}

pub fn price_all(
    graph: &ShareabilityGraph,
    curves: &[Vec<AcceptanceCurve>],
    cfg: &PricingConfig,
    strategy: Strategy,
) -> Result<Vec<PricedRide>> {
    let priced: Vec<Option<PricedRide>> = graph
        .rides()
        .par_iter()
        .zip(curves.par_iter())
        .map(|(r, c)| price_ride(r, c, cfg, strategy))
        .collect::<Result<_>>()?;
    Ok(priced.into_iter().flatten().collect())
}

/// Graph, curves, then pricing and matching for every strategy.
pub fn run_pipeline(cfg: &ScenarioConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let requests = scenario_requests(cfg).map_err(|e| e.in_stage("demand"))?;
    run_pipeline_on(cfg, requests)
}

pub fn run_pipeline_on(cfg: &ScenarioConfig, requests: Vec<TripRequest>) -> Result<StudyResult> {
    cfg.validate()?;
    let strategies = cfg.parsed_strategies()?;
    let mix = cfg.population.mixture()?;
    let grid = mix.discretize(cfg.population.n_vot, cfg.population.n_pfs).map_err(|e| e.in_stage("population"))?;
    let provider = cfg.travel.provider().map_err(|e| e.in_stage("demand"))?;
    let graph = build_graph(&requests, &provider, &mix, cfg.pricing.fare_per_km, &cfg.graph)
        .map_err(|e| e.in_stage("graph"))?;
    let curves = build_curves(&graph, &grid, &cfg.pricing).map_err(|e| e.in_stage("acceptance"))?;
    let mut runs = Vec::with_capacity(strategies.len());
    for strategy in strategies {
        let priced = price_all(&graph, &curves, &cfg.pricing, strategy).map_err(|e| e.in_stage("pricing"))?;
        let offer = solve_offer(&graph, &priced).map_err(|e| e.in_stage("matching"))?;
        let report = summarize(strategy, &graph, &priced, &offer);
        runs.push(StrategyRun { strategy, priced, offer, report });
    }
    Ok(StudyResult { requests, grid, graph, curves, runs })
}

pub fn summarize(
    strategy: Strategy,
    graph: &ShareabilityGraph,
    priced: &[PricedRide],
    offer: &Offer,
) -> StrategyReport {
    let by_ride: BTreeMap<usize, &PricedRide> = priced.iter().map(|p| (p.ride_id, p)).collect();
    let travellers = graph.traveller_count();
    let mut degree_histogram = BTreeMap::new();
    let mut discount_histogram = BTreeMap::new();
    let mut weighted = 0.0;
    let mut distance = 0.0;
    let mut shared_discounts = Vec::new();
    for &r in &offer.selected {
        let p = by_ride[&r];
        *degree_histogram.entry(p.degree).or_insert(0) += 1;
        weighted += p.profitability * p.degree as f64;
        distance += p.psi;
        for &d in &p.discounts {
            *discount_histogram.entry(bin(d, DISCOUNT_BIN) * 5).or_insert(0) += 1;
            if p.degree > 1 {
                shared_discounts.push(d);
            }
        }
    }
    let rides = priced
        .iter()
        .filter(|p| p.degree > 1)
        .map(|p| RideRecord {
            ride_id: p.ride_id,
            degree: p.degree,
            profitability: p.profitability,
            distance_saved: graph.ride(p.ride_id).distance_saved(),
            accept_prob: p.accept_prob,
            selected: offer.selected.binary_search(&p.ride_id).is_ok(),
        })
        .collect();
    StrategyReport {
        strategy: strategy.name(),
        travellers,
        selected_rides: offer.selected.len(),
        average_profitability: if travellers == 0 { 0.0 } else { weighted / travellers as f64 },
        total_expected_distance: distance,
        total_objective: offer.total_objective,
        mean_degree: if travellers == 0 {
            0.0
        } else {
            degree_histogram.iter().map(|(&d, &n)| (d * d * n) as f64).sum::<f64>() / travellers as f64
        },
        mean_shared_discount: if shared_discounts.is_empty() {
            None
        } else {
            Some(shared_discounts.iter().sum::<f64>() / shared_discounts.len() as f64)
        },
        degree_histogram,
        discount_histogram,
        rides,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kpis {
    pub strategies: Vec<StrategyReport>,
}

pub fn read_kpis(path: &Path) -> Result<Kpis> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Directory-safe strategy label, e.g. `flat_0.15`.
pub fn slug(strategy: &str) -> String {
    strategy.replace(':', "_")
}

/// Writes the KPI table and plot datasets:
///
/// * `kpis.json`: per-strategy aggregates;
/// * `discount_hist.csv`: `strategy,bin_lo,bin_hi,graph_count,offer_count`;
/// * `degree_hist.csv`: `strategy,degree,rides,travellers`;
/// * `profitability_per_ride.csv`: `strategy,ride_id,degree,Gamma,selected`;
/// * `savings_vs_profitability.csv`: `strategy,ride_id,degree,distance_saved,Gamma,accept_prob,selected`;
/// * `acceptance_hist.csv`: `strategy,bin_lo,bin_hi,rides,selected`;
/// * `heatmap_bins.csv`: `strategy,saved_lo,gamma_lo,rides,mean_accept_prob`.
///
/// Per-ride files cover shared rides only.
pub fn emit_reports(runs: &[StrategyRun], out_dir: &Path) -> Result<()> {
    if runs.is_empty() {
        return Err(Error::Config("nothing to report: no strategies".into()));
    }
    fs::create_dir_all(out_dir)?;
    let kpis = Kpis { strategies: runs.iter().map(|r| r.report.clone()).collect() };
    fs::write(out_dir.join("kpis.json"), serde_json::to_string_pretty(&kpis)? + "\n")?;

    let mut w = csv::Writer::from_path(out_dir.join("discount_hist.csv"))?;
    w.write_record(["strategy", "bin_lo", "bin_hi", "graph_count", "offer_count"])?;
    for run in runs {
        let mut graph_bins: BTreeMap<i64, usize> = BTreeMap::new();
        for p in run.priced.iter().filter(|p| p.degree > 1) {
            for &d in &p.discounts {
                *graph_bins.entry(bin(d, DISCOUNT_BIN)).or_insert(0) += 1;
            }
        }
        let mut offer_bins: BTreeMap<i64, usize> = BTreeMap::new();
        for p in run.priced.iter().filter(|p| run.offer.selected.binary_search(&p.ride_id).is_ok()) {
            for &d in &p.discounts {
                *offer_bins.entry(bin(d, DISCOUNT_BIN)).or_insert(0) += 1;
            }
        }
        let keys: std::collections::BTreeSet<i64> = graph_bins.keys().chain(offer_bins.keys()).copied().collect();
        for b in keys {
            w.write_record([
                run.report.strategy.clone(),
                format!("{:.2}", b as f64 * DISCOUNT_BIN),
                format!("{:.2}", (b + 1) as f64 * DISCOUNT_BIN),
                graph_bins.get(&b).copied().unwrap_or(0).to_string(),
                offer_bins.get(&b).copied().unwrap_or(0).to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out_dir.join("degree_hist.csv"))?;
    w.write_record(["strategy", "degree", "rides", "travellers"])?;
    for run in runs {
        for (&deg, &count) in &run.report.degree_histogram {
            w.write_record([
                run.report.strategy.clone(),
                deg.to_string(),
                count.to_string(),
                (deg * count).to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out_dir.join("profitability_per_ride.csv"))?;
    w.write_record(["strategy", "ride_id", "degree", "Gamma", "selected"])?;
    for run in runs {
        for r in &run.report.rides {
            w.write_record([
                run.report.strategy.clone(),
                r.ride_id.to_string(),
                r.degree.to_string(),
                r.profitability.to_string(),
                r.selected.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out_dir.join("savings_vs_profitability.csv"))?;
    w.write_record(["strategy", "ride_id", "degree", "distance_saved", "Gamma", "accept_prob", "selected"])?;
    for run in runs {
        for r in &run.report.rides {
            w.write_record([
                run.report.strategy.clone(),
                r.ride_id.to_string(),
                r.degree.to_string(),
                r.distance_saved.to_string(),
                r.profitability.to_string(),
                r.accept_prob.to_string(),
                r.selected.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out_dir.join("acceptance_hist.csv"))?;
    w.write_record(["strategy", "bin_lo", "bin_hi", "rides", "selected"])?;
    for run in runs {
        let mut bins: BTreeMap<i64, (usize, usize)> = BTreeMap::new();
        for r in &run.report.rides {
            // probability one belongs to the last bin
            let b = bin(r.accept_prob, ACCEPTANCE_BIN).min(9);
            let e = bins.entry(b).or_insert((0, 0));
            e.0 += 1;
            e.1 += r.selected as usize;
        }
        for (b, (rides, selected)) in bins {
            w.write_record([
                run.report.strategy.clone(),
                format!("{:.1}", b as f64 * ACCEPTANCE_BIN),
                format!("{:.1}", (b + 1) as f64 * ACCEPTANCE_BIN),
                rides.to_string(),
                selected.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out_dir.join("heatmap_bins.csv"))?;
    w.write_record(["strategy", "saved_lo", "gamma_lo", "rides", "mean_accept_prob"])?;
    for run in runs {
        let mut cells: BTreeMap<(i64, i64), (usize, f64)> = BTreeMap::new();
        for r in &run.report.rides {
            let key = (bin(r.distance_saved, HEATMAP_BIN), bin(r.profitability, HEATMAP_BIN));
            let e = cells.entry(key).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += r.accept_prob;
        }
        for ((s, g), (n, p)) in cells {
            w.write_record([
                run.report.strategy.clone(),
                format!("{:.2}", s as f64 * HEATMAP_BIN),
                format!("{:.2}", g as f64 * HEATMAP_BIN),
                n.to_string(),
                (p / n as f64).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_batch_size() {
        let d = DemandConfig::default();
        assert_eq!(generate_demand(&d, 1).unwrap().len(), 150);
        let none = DemandConfig { batch_minutes: 0.0, ..d.clone() };
        assert!(generate_demand(&none, 1).unwrap().is_empty());
        let reqs = generate_demand(&d, 3).unwrap();
        assert!(reqs.windows(2).all(|w| w[0].request_time_s <= w[1].request_time_s));
        assert!(reqs.iter().all(|r| (r.origin.x - r.destination.x).hypot(r.origin.y - r.destination.y) >= 2.0));
        assert_eq!(reqs, generate_demand(&d, 3).unwrap());
    }

    #[test]
    fn config_rejects_unknown_keys_and_empty_strategies() {
        assert!(matches!(ScenarioConfig::from_toml_str("sed = 1"), Err(Error::Config(_))));
        assert!(matches!(ScenarioConfig::from_toml_str("[graph]\nalfa = 0.3"), Err(Error::Config(_))));
        assert!(matches!(ScenarioConfig::from_toml_str("strategies = []"), Err(Error::Config(_))));
        assert!(matches!(ScenarioConfig::from_toml_str("strategies = [\"flat\"]"), Err(Error::Config(_))));
        assert!(matches!(ScenarioConfig::from_toml_str("[graph]\nalpha = 1.5"), Err(Error::Config(_))));
        let cfg = ScenarioConfig::from_toml_str("seed = 9\n[pricing]\nfare_per_km = 2.0").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.pricing.fare_per_km, 2.0);
        assert_eq!(cfg.graph, GraphConfig::default());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = ScenarioConfig::default();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn inline_mixture() {
        let text = r#"
            [population]
            n_vot = 2
            n_pfs = 2
            [[population.classes]]
            mean_vot = 12.0
            std_vot = 2.0
            mean_pfs = 1.2
            std_pfs = 0.1
            share = 1.0
        "#;
        let cfg = ScenarioConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.population.mixture().unwrap().classes().len(), 1);
    }

    #[test]
    fn private_strategy_on_single_traveller() {
        let cfg =
            ScenarioConfig { strategies: vec!["private".into(), "flat:0.05".into()], ..ScenarioConfig::default() };
        let reqs = vec![TripRequest::new(1, Point::new(0.0, 0.0), Point::new(3.0, 4.0), 0.0).unwrap()];
        let study = run_pipeline_on(&cfg, reqs).unwrap();
        assert_eq!(study.runs[0].report.average_profitability, 1.5);
        assert!((study.runs[1].report.average_profitability - 1.425).abs() < 1e-15);
        assert_eq!(study.runs[0].report.degree_histogram, BTreeMap::from([(1, 1)]));
        let dir = tempfile::tempdir().unwrap();
        emit_reports(&study.runs, dir.path()).unwrap();
        let back = read_kpis(&dir.path().join("kpis.json")).unwrap();
        assert_eq!(back.strategies.len(), 2);
        assert!((back.strategies[1].average_profitability - 1.425).abs() < 1e-9);
        assert!(emit_reports(&[], &dir.path().join("none")).is_err());
        assert!(!dir.path().join("none").exists());
    }
}
