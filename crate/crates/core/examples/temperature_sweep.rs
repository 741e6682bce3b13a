//! Sharpening temperature sweep on the overlapping-blobs task.
//!
//! cargo run --release --example temperature_sweep -- [threads]

use adt_ssl::cli::run_ablation;
use adt_ssl::config::RunConfig;

fn main() -> adt_ssl::Result<()> {
    let threads: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let cfg = RunConfig::from_toml_str(include_str!("../../../configs/blobs_temperature.toml"))?;
    println!("{:>5}  {:>6}  {:>6}  {:>9}", "T", "median", "mined", "precision");
    for row in run_ablation(&cfg, threads) {
        let n = row.results.len().max(1) as f64;
        let mined = row.results.iter().map(|r| r.mined_ratio).sum::<f64>() / n;
        let precision = row.results.iter().map(|r| r.pseudo_precision).sum::<f64>() / n;
        println!(
            "{:>5}  {:>6.3}  {mined:>6.3}  {precision:>9.3}",
            row.variant.temperature,
            row.median_acc().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
