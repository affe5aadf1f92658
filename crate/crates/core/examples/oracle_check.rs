//! Closed-form expected revenue and distance of one shared ride against the
//! 2^k outcome enumeration and a Monte Carlo simulation of travellers.

use ridepool::acceptance::ride_curves;
use ridepool::experiment::{scenario_requests, ScenarioConfig};
use ridepool::pricing::{enumeration_oracle, evaluate, monte_carlo_oracle};
use ridepool::shareability::build_graph;

fn main() -> ridepool::Result<()> {
    let cfg = ScenarioConfig::default();
    let mix = cfg.population.mixture()?;
    let grid = mix.discretize(cfg.population.n_vot, cfg.population.n_pfs)?;
    let graph =
        build_graph(&scenario_requests(&cfg)?, &cfg.travel.provider()?, &mix, cfg.pricing.fare_per_km, &cfg.graph)?;
    let ride = graph.shared_rides().find(|r| r.degree() == 4).expect("a degree-4 ride");
    let curves = ride_curves(ride, &grid, cfg.pricing.fare_per_km, cfg.pricing.degree_rule)?;
    let discounts = vec![0.2, 0.3, 0.25, 0.35];

    let closed = evaluate(ride, &curves, &discounts, &cfg.pricing)?;
    let (rev, dist) = enumeration_oracle(ride, &curves, &discounts, &cfg.pricing)?;
    let mc = monte_carlo_oracle(ride, &grid, &discounts, &cfg.pricing, 200_000, 1)?;
    println!("             revenue     distance");
    println!("closed form  {:.9} {:.9}", closed.gamma, closed.psi);
    println!("enumeration  {rev:.9} {dist:.9}");
    println!("monte carlo  {:.4}±{:.4} {:.4}±{:.4}", mc.revenue, mc.revenue_se, mc.distance, mc.distance_se);
    Ok(())
}
