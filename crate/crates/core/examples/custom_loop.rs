//! A training loop written against the step-level API instead of
//! `trainer::train`, reporting the gate counts every few steps.
//!
//! cargo run --release --example custom_loop

use adt_ssl::config::{Prepared, RunConfig};
use adt_ssl::trainer::{evaluate, run_augmenter, step_seed, train_step, BatchSampler, TrainState};
use adt_ssl::Sample;

fn main() -> adt_ssl::Result<()> {
    let cfg = RunConfig::from_toml_str(include_str!("../../../configs/moons.toml"))?;
    let t = &cfg.train;
    let Prepared { splits, arch, .. } = cfg.prepare()?;
    let mut state = TrainState::new(arch, t)?;
    let aug = run_augmenter(&splits, t)?;
    let mut lab = BatchSampler::new(splits.labeled.samples.len(), 1)?;
    let mut unl = BatchSampler::new(splits.unlabeled.samples.len(), 2)?;

    for epoch in 0..t.epochs {
        state.reg.begin_epoch();
        let (mut high, mut mid) = (0, 0);
        for it in 0..t.iterations_per_epoch {
            let labeled: Vec<(&Sample, usize)> = lab
                .next_batch(t.batch_size)
                .into_iter()
                .map(|i| (&splits.labeled.samples[i], splits.labeled.labels[i]))
                .collect();
            let unlabeled: Vec<&Sample> =
                unl.next_batch(t.batch_size).into_iter().map(|i| &splits.unlabeled.samples[i]).collect();
            let global = (epoch * t.iterations_per_epoch + it) as u64;
            let m = train_step(&labeled, &unlabeled, &mut state, t, &aug, step_seed(t.seed, global))?;
            high += m.high_count;
            mid += m.mid_count;
        }
        state.reg.end_epoch();
        state.epoch += 1;
        if epoch % 5 == 4 {
            let acc = evaluate(state.eval_params(t), &splits.validation)?.accuracy;
            println!("epoch {epoch:>3}: high {high:>4}  mid {mid:>3}  val_acc {acc:.3}");
        }
    }
    Ok(())
}
