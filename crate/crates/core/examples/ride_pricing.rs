//! Personalised discounts against flat ones on the shared rides of the
//! default batch with the largest distance savings.

use ridepool::acceptance::ride_curves;
use ridepool::experiment::ScenarioConfig;
use ridepool::pricing::{evaluate_flat, optimize_discounts};
use ridepool::shareability::build_graph;

fn main() -> ridepool::Result<()> {
    let cfg = ScenarioConfig::default();
    let mix = cfg.population.mixture()?;
    let grid = mix.discretize(cfg.population.n_vot, cfg.population.n_pfs)?;
    let requests = ridepool::experiment::scenario_requests(&cfg)?;
    let graph = build_graph(&requests, &cfg.travel.provider()?, &mix, cfg.pricing.fare_per_km, &cfg.graph)?;

    let mut shared: Vec<_> = graph.shared_rides().collect();
    shared.sort_by(|a, b| b.distance_saved().total_cmp(&a.distance_saved()));
    println!("{:>6} {:>3} {:>8} {:>8} {:>8}  discounts", "ride", "k", "Γ pers", "Γ 0.15", "Γ 0.20");
    for ride in shared.into_iter().take(8) {
        let curves = ride_curves(ride, &grid, cfg.pricing.fare_per_km, cfg.pricing.degree_rule)?;
        let best = optimize_discounts(ride, &curves, &cfg.pricing)?;
        let f15 = evaluate_flat(ride, &curves, 0.15, &cfg.pricing)?;
        let f20 = evaluate_flat(ride, &curves, 0.2, &cfg.pricing)?;
        println!(
            "{:>6} {:>3} {:>8.4} {:>8.4} {:>8.4}  {:.3?}",
            ride.id,
            ride.degree(),
            best.profitability,
            f15.profitability,
            f20.profitability,
            best.discounts
        );
    }
    Ok(())
}
