//! Discretizes the four-class NYC trait mixture and compares grid moments
//! with the continuous ones.

use ridepool::population::{BehavioralMixture, Marginal};

fn main() -> ridepool::Result<()> {
    let mix = BehavioralMixture::nyc_4class();
    let grid = mix.discretize(10, 10)?;
    for (name, m) in [("value of time", Marginal::ValueOfTime), ("sharing penalty", Marginal::PenaltyForSharing)] {
        println!(
            "{name:<16} mean {:.4} (grid {:.4}), 20% quantile {:.4}",
            mix.mean(m),
            grid.mean(m),
            mix.quantile(m, 0.2)?
        );
    }
    println!("VOT points: {:.2?}", grid.vot_points());
    println!("PFS points: {:.3?}", grid.pfs_points());
    let heaviest = grid.atoms().max_by(|a, b| a.weight.total_cmp(&b.weight)).unwrap();
    println!("heaviest atom: vot {:.2}, pfs {:.3}, weight {:.4}", heaviest.vot, heaviest.pfs, heaviest.weight);
    Ok(())
}
