//! Builds the graph for a small generated batch and prints its make-up.

use std::collections::BTreeMap;

use ridepool::demand::TravelTimeProvider;
use ridepool::experiment::{generate_demand, DemandConfig};
use ridepool::population::BehavioralMixture;
use ridepool::shareability::{build_graph, GraphConfig};

fn main() -> ridepool::Result<()> {
    let demand = DemandConfig { rate_per_hour: 120.0, batch_minutes: 20.0, ..DemandConfig::default() };
    let requests = generate_demand(&demand, 7)?;
    let provider = TravelTimeProvider::Euclidean { speed_kmh: 18.0 };
    let graph = build_graph(&requests, &provider, &BehavioralMixture::nyc_4class(), 1.5, &GraphConfig::default())?;

    let mut by_degree: BTreeMap<usize, usize> = BTreeMap::new();
    for ride in graph.rides() {
        *by_degree.entry(ride.degree()).or_default() += 1;
    }
    println!("{} requests -> {} rides", requests.len(), graph.rides().len());
    for (degree, count) in by_degree {
        println!("  degree {degree}: {count}");
    }
    if let Some(best) = graph.shared_rides().max_by(|a, b| a.distance_saved().total_cmp(&b.distance_saved())) {
        println!("largest saving: ride {} {:?}, {:.1}% fewer km", best.id, best.members, 100.0 * best.distance_saved());
    }
    Ok(())
}
