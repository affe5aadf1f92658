//! Pricing each ride on its own and then matching gives the same total as
//! searching discounts and matchings jointly. Checked on a few small batches.

use ridepool::demand::TravelTimeProvider;
use ridepool::experiment::{generate_demand, DemandConfig};
use ridepool::matching::verify_local_global;
use ridepool::population::BehavioralMixture;
use ridepool::pricing::{PricingConfig, SearchOptions};
use ridepool::shareability::{build_graph, GraphConfig};

fn main() -> ridepool::Result<()> {
    let mix = BehavioralMixture::nyc_4class();
    let grid = mix.discretize(6, 6)?;
    let cfg = PricingConfig { search: SearchOptions::thinned_only(5), ..PricingConfig::default() };
    let demand = DemandConfig {
        rate_per_hour: 60.0,
        batch_minutes: 5.0,
        area_km: 4.0,
        min_trip_km: 1.0,
        ..DemandConfig::default()
    };
    let provider = TravelTimeProvider::Euclidean { speed_kmh: 18.0 };
    for seed in 0..5 {
        let requests = generate_demand(&demand, seed)?;
        let graph = build_graph(&requests, &provider, &mix, cfg.fare_per_km, &GraphConfig::default())?;
        let check = verify_local_global(&graph, &grid, &cfg)?;
        println!(
            "seed {seed}: {} rides, decomposed {:.9}, joint {:.9}, {}",
            graph.rides().len(),
            check.decomposed,
            check.joint,
            if check.holds { "equal" } else { "DIFFERENT" }
        );
    }
    Ok(())
}
