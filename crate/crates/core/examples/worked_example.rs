//! Two travellers, 3.6 and 3.2 km alone, 4.8 km together, both offered a
//! flat 20 % discount. They accept with probability 0.7 and 0.95.

use ridepool::pricing::{expected_outcome_with, PricingConfig};
use ridepool::shareability::{ShareableRide, Stop};

fn main() -> ridepool::Result<()> {
    let ride = ShareableRide::new(
        vec![1, 2],
        vec![Stop::pickup(1), Stop::pickup(2), Stop::dropoff(1), Stop::dropoff(2)],
        4.8,
        vec![900.0, 700.0],
        vec![0.0, 60.0],
        vec![3.6, 3.2],
        vec![600.0, 640.0],
    )?;
    let cfg = PricingConfig::default();
    let (revenue, distance) = expected_outcome_with(&ride, &[0.2, 0.2], &[0.7, 0.95], &cfg)?;
    println!("expected revenue       {revenue:.5}");
    println!("expected distance      {distance:.5}");
    println!("expected profitability {:.6}", revenue / distance);
    Ok(())
}
