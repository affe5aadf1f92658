//! Acceptance probability of each member of a pooled ride as the discount
//! grows.

use ridepool::acceptance::ride_curves;
use ridepool::demand::TravelTimeProvider;
use ridepool::experiment::{generate_demand, DemandConfig};
use ridepool::population::{BehavioralMixture, DegreeRule};
use ridepool::shareability::{build_graph, GraphConfig};

fn main() -> ridepool::Result<()> {
    let mix = BehavioralMixture::nyc_4class();
    let grid = mix.discretize(10, 10)?;
    let requests = generate_demand(&DemandConfig::default(), 42)?;
    let provider = TravelTimeProvider::Euclidean { speed_kmh: 18.0 };
    let graph = build_graph(&requests, &provider, &mix, 1.5, &GraphConfig::default())?;
    let ride = graph.shared_rides().find(|r| r.degree() == 3).expect("a degree-3 ride");
    let curves = ride_curves(ride, &grid, 1.5, DegreeRule::default())?;

    println!("ride {} with travellers {:?}", ride.id, ride.members);
    print!("{:>8}", "discount");
    for m in &ride.members {
        print!("{:>10}", format!("#{m}"));
    }
    println!();
    for step in 0..=10 {
        let lambda = step as f64 * 0.05;
        print!("{lambda:>8.2}");
        for c in &curves {
            print!("{:>10.3}", c.evaluate(lambda));
        }
        println!();
    }
    for (m, c) in ride.members.iter().zip(&curves) {
        match c.saturation() {
            Some(s) => println!("#{m}: {} breakpoints, certain from {s:.3}", c.breakpoints.len()),
            None => println!("#{m}: {} breakpoints, never certain", c.breakpoints.len()),
        }
    }
    Ok(())
}
