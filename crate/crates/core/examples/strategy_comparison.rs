//! Runs the default 150-request scenario under personalised, flat and
//! private-only pricing and prints the KPI table.

use std::time::Instant;

use ridepool::experiment::{run_pipeline, ScenarioConfig};

fn main() -> ridepool::Result<()> {
    let cfg = ScenarioConfig::default();
    let started = Instant::now();
    let study = run_pipeline(&cfg)?;
    println!(
        "{} requests, {} rides ({} shared), {:.1?}",
        study.requests.len(),
        study.graph.rides().len(),
        study.graph.shared_rides().count(),
        started.elapsed()
    );
    println!("{:<14} {:>8} {:>10} {:>8} {:>9}", "strategy", "avg Γ", "total ψ", "degree", "discount");
    for run in &study.runs {
        let r = &run.report;
        println!(
            "{:<14} {:>8.4} {:>10.2} {:>8.3} {:>9}",
            r.strategy,
            r.average_profitability,
            r.total_expected_distance,
            r.mean_degree,
            r.mean_shared_discount.map_or("-".into(), |d| format!("{:.3}", d)),
        );
    }
    Ok(())
}
