//! Per-class adaptive thresholds as a small MLP learns two-moons.
//!
//! Each row is one epoch: the thresholds in force and the validation
//! accuracy. A threshold drops to the lowest confidence the model showed on
//! a correctly classified labeled sample of that class during the epoch.
//!
//! cargo run --release --example adaptive_thresholds -- [epochs]

use adt_ssl::config::{Prepared, RunConfig};
use adt_ssl::trainer::{train, TrainState};

fn main() -> adt_ssl::Result<()> {
    let epochs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(15);
    let mut cfg = RunConfig::from_toml_str(include_str!("../../../configs/moons.toml"))?;
    cfg.train.epochs = epochs;

    let Prepared { splits, arch, .. } = cfg.prepare()?;
    let mut state = TrainState::new(arch, &cfg.train)?;
    println!("start: {:?}", state.reg.current());
    println!("epoch  T_0     T_1     mid  high  val_acc");
    train(&mut state, &cfg.train, &splits, |m, _| {
        println!(
            "{:>5}  {:.4}  {:.4}  {:>4}  {:>4}  {:.3}",
            m.epoch,
            m.thresholds[0],
            m.thresholds[1],
            m.mid_count,
            m.high_count,
            m.val_acc.unwrap_or(f64::NAN)
        );
        Ok(())
    })?;
    Ok(())
}
