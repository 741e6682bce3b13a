//! Component ablation on four overlapping Gaussian blobs: adaptive
//! threshold and similar loss switched on and off, plus a supervised-only
//! row for reference.
//!
//! cargo run --release --example blobs_ablation -- [threads]

use adt_ssl::cli::{median, run_ablation, run_single};
use adt_ssl::config::{AblationGrid, RunConfig};
use adt_ssl::LossWeights;

fn main() -> adt_ssl::Result<()> {
    let threads: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let cfg = RunConfig::from_toml_str(include_str!("../../../configs/blobs_ablation.toml"))?;

    println!("{:<10} {:<8} {:>8}  per seed", "adaptive", "similar", "median");
    for row in run_ablation(&cfg, threads) {
        let accs: Vec<String> = row.results.iter().map(|r| format!("{:.3}", r.val_acc)).collect();
        let mid: usize = row.results.iter().map(|r| r.mid_count).sum();
        println!(
            "{:<10} {:<8} {:>8.3}  [{}]  mid-confidence views {mid}",
            row.variant.adaptive_threshold,
            row.variant.similar_loss,
            row.median_acc().unwrap_or(f64::NAN),
            accs.join(" ")
        );
        if let Some(e) = &row.error {
            println!("  failed: {e}");
        }
    }

    let mut sup = cfg.clone();
    sup.train.weights = LossWeights::supervised_only();
    sup.ablate = AblationGrid::default();
    let mut accs = Vec::new();
    for &seed in &cfg.ablate.seeds {
        accs.push(run_single(&sup.with_seed(seed))?.val_acc);
    }
    println!("{:<19} {:>8.3}  {accs:?}", "supervised only", median(&accs).unwrap_or(f64::NAN));
    Ok(())
}
