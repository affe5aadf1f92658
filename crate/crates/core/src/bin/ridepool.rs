use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ridepool::demand::write_requests;
use ridepool::experiment::{
    build_curves, emit_reports, price_all, run_pipeline_on, scenario_requests, slug, ScenarioConfig, StudyResult,
};
use ridepool::matching::write_offer_csv;
use ridepool::pricing::write_priced_csv;
use ridepool::shareability::build_graph;
use ridepool::{Error, Result};

#[derive(Parser)]
#[command(name = "ridepool", version, about = "Personalised ride-pooling discounts and offer matching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the shareability graph and write rides.csv.
    Graph(Common),
    /// Price every ride under each strategy and write <strategy>/priced.csv.
    Price(Common),
    /// Price and match; writes <strategy>/priced.csv and <strategy>/offer.csv.
    Match(Common),
    /// Full study: requests, graph, per-strategy files and reports.
    Run(Common),
    /// Full study, writing only the report files and printing the KPI table.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Request CSV to use instead of generated demand.
    #[arg(long)]
    requests: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Strategy to evaluate (personalised, flat:<x>, private); repeatable.
    #[arg(long = "strategy")]
    strategies: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn scenario(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        if let Some(path) = &self.requests {
            cfg.demand.requests = Some(path.clone());
        }
        if !self.strategies.is_empty() {
            cfg.strategies = self.strategies.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command) -> Result<()> {
    let common = match &command {
        Command::Graph(c) | Command::Price(c) | Command::Match(c) | Command::Run(c) | Command::Report(c) => c,
    };
    let cfg = common.scenario()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match &command {
        Command::Graph(c) => graph(&cfg, &c.out),
        Command::Price(c) => price(&cfg, &c.out),
        Command::Match(c) => {
            let study = study(&cfg)?;
            write_strategy_files(&study, &c.out)
        }
        Command::Run(c) => {
            let study = study(&cfg)?;
            fs::create_dir_all(&c.out)?;
            write_requests(&c.out.join("requests.csv"), &study.requests)?;
            study.graph.write_csv(&c.out.join("rides.csv"))?;
            write_strategy_files(&study, &c.out)?;
            emit_reports(&study.runs, &c.out)
        }
        Command::Report(c) => {
            let study = study(&cfg)?;
            emit_reports(&study.runs, &c.out)?;
            print_kpis(&study);
            Ok(())
        }
    })
}

fn study(cfg: &ScenarioConfig) -> Result<StudyResult> {
    let requests = scenario_requests(cfg).map_err(|e| e.in_stage("demand"))?;
    run_pipeline_on(cfg, requests)
}

fn graph(cfg: &ScenarioConfig, out: &Path) -> Result<()> {
    let requests = scenario_requests(cfg).map_err(|e| e.in_stage("demand"))?;
    let mix = cfg.population.mixture()?;
    let provider = cfg.travel.provider()?;
    let graph = build_graph(&requests, &provider, &mix, cfg.pricing.fare_per_km, &cfg.graph)
        .map_err(|e| e.in_stage("graph"))?;
    fs::create_dir_all(out)?;
    graph.write_csv(&out.join("rides.csv"))
}

fn price(cfg: &ScenarioConfig, out: &Path) -> Result<()> {
    let requests = scenario_requests(cfg).map_err(|e| e.in_stage("demand"))?;
    let mix = cfg.population.mixture()?;
    let grid = mix.discretize(cfg.population.n_vot, cfg.population.n_pfs).map_err(|e| e.in_stage("population"))?;
    let provider = cfg.travel.provider()?;
    let graph = build_graph(&requests, &provider, &mix, cfg.pricing.fare_per_km, &cfg.graph)
        .map_err(|e| e.in_stage("graph"))?;
    let curves = build_curves(&graph, &grid, &cfg.pricing).map_err(|e| e.in_stage("acceptance"))?;
    for strategy in cfg.parsed_strategies()? {
        let priced = price_all(&graph, &curves, &cfg.pricing, strategy).map_err(|e| e.in_stage("pricing"))?;
        let dir = out.join(slug(&strategy.name()));
        fs::create_dir_all(&dir)?;
        write_priced_csv(&dir.join("priced.csv"), &priced)?;
    }
    Ok(())
}

fn write_strategy_files(study: &StudyResult, out: &Path) -> Result<()> {
    for run in &study.runs {
        let dir = out.join(slug(&run.report.strategy));
        fs::create_dir_all(&dir)?;
        write_priced_csv(&dir.join("priced.csv"), &run.priced)?;
        write_offer_csv(&dir.join("offer.csv"), &run.offer, &study.graph, &run.priced)?;
    }
    Ok(())
}

fn print_kpis(study: &StudyResult) {
    println!("{:<14} {:>10} {:>12} {:>8} {:>10}", "strategy", "avg Gamma", "total psi", "degree", "discount");
    for run in &study.runs {
        let r = &run.report;
        let discount = r.mean_shared_discount.map_or("-".to_string(), |d| format!("{d:.3}"));
        println!(
            "{:<14} {:>10.4} {:>12.2} {:>8.3} {:>10}",
            r.strategy, r.average_profitability, r.total_expected_distance, r.mean_degree, discount
        );
    }
}
