//! Two-moons with 10 labels: supervised-only baseline against the full
//! method, median validation accuracy over seeds.
//!
//! cargo run --release --example two_moons -- [seeds]

use adt_ssl::cli::{median, run_single};
use adt_ssl::config::RunConfig;
use adt_ssl::LossWeights;

fn main() -> adt_ssl::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let full = RunConfig::from_toml_str(include_str!("../../../configs/moons.toml"))?;
    let mut sup = full.clone();
    sup.train.weights = LossWeights::supervised_only();

    let (mut a, mut b) = (Vec::new(), Vec::new());
    for seed in 0..seeds {
        let s = run_single(&sup.with_seed(seed))?;
        let f = run_single(&full.with_seed(seed))?;
        println!(
            "seed {seed}: supervised {:.3}  adt-ssl {:.3}  (mined {:.3}, precision {:.3})",
            s.val_acc, f.val_acc, f.mined_ratio, f.pseudo_precision
        );
        a.push(s.val_acc);
        b.push(f.val_acc);
    }
    let (ma, mb) = (median(&a).unwrap_or(0.0), median(&b).unwrap_or(0.0));
    println!("median: supervised {ma:.3}  adt-ssl {mb:.3}  gap {:+.1} points", 100.0 * (mb - ma));
    Ok(())
}
