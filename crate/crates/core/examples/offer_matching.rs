//! Exact set partitioning on a toy instance: four travellers, their
//! private rides and a handful of pooled ones.

use ridepool::matching::{solve_partition, Column, MatchOptions};

fn main() -> ridepool::Result<()> {
    let col = |members: &[usize], value: f64| Column { members: members.to_vec(), value };
    let cols = vec![
        col(&[0], 1.425),
        col(&[1], 1.425),
        col(&[2], 1.425),
        col(&[3], 1.425),
        col(&[0, 1], 3.30),
        col(&[2, 3], 3.10),
        col(&[1, 2], 3.45),
        col(&[0, 2, 3], 4.90),
    ];
    let part = solve_partition(4, &cols, MatchOptions::default())?;
    println!("total objective {:.3}", part.value);
    for &c in &part.chosen {
        println!("  travellers {:?} (O = {:.3})", cols[c].members, cols[c].value);
    }
    println!("{} nodes explored", part.stats.nodes);
    Ok(())
}
