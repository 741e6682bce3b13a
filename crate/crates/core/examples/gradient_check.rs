//! Central finite differences against the analytic gradient of the full
//! objective on one frozen step.
//!
//! Inputs are kept close together so every loss term is active at
//! initialization.
//!
//! cargo run --release --example gradient_check -- [coordinates]

use adt_ssl::data::gen_blobs;
use adt_ssl::trainer::{objective, prepare_step, TrainConfig, TrainState};
use adt_ssl::{Architecture, Augmenter, LossWeights, ModelParams, Route, Sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> adt_ssl::Result<()> {
    let coords: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(12);
    let ds = gen_blobs(3, 20, 2, 1.0, 11)?;
    let cfg = TrainConfig {
        tau: 0.97,
        sim_threshold: 0.8,
        weights: LossWeights::new(1.0, 2.0, 0.5)?,
        ..TrainConfig::default()
    };
    let mut state = TrainState::new(Architecture::mlp(2, 3), &cfg)?;

    let samples = ds.samples();
    let labeled: Vec<(&Sample, usize)> = (0..8).map(|i| (&samples[i], ds.labels()[i])).collect();
    let unlabeled: Vec<&Sample> = samples[20..52].iter().collect();
    let plan = prepare_step(&labeled, &unlabeled, &mut state, &cfg, &Augmenter::default(), 99)?;
    let count = |r: Route| plan.entries.iter().filter(|e| e.route == r).count();
    println!(
        "entries: {} high, {} mid, {} discarded; {} similar pairs",
        count(Route::HighConf),
        count(Route::MidConf),
        count(Route::Discarded),
        plan.similar_pairs.len()
    );

    let (losses, grads) = objective(&state.params, &plan)?;
    println!(
        "L_X {:.5}  L_U1 {:.5}  L_U2 {:.6}  L_S {:.6}  total {:.5}\n",
        losses.l_x, losses.l_u1, losses.l_u2, losses.l_s, losses.total
    );

    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = state.params.values().len();
    let mut worst = 0.0f64;
    println!("{:>6} {:>14} {:>14} {:>10}", "index", "analytic", "numeric", "rel err");
    for _ in 0..coords {
        let i = rng.random_range(0..n);
        let at = |delta: f64| -> adt_ssl::Result<f64> {
            let mut v = state.params.values().to_vec();
            v[i] += delta;
            let p = ModelParams::from_values(state.params.arch().clone(), v)?;
            Ok(objective(&p, &plan)?.0.total)
        };
        let numeric = (at(h)? - at(-h)?) / (2.0 * h);
        let analytic = grads.0[i];
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
        println!("{i:>6} {analytic:>14.8} {numeric:>14.8} {rel:>10.2e}");
    }
    println!("\nworst relative error {worst:.2e}");
    Ok(())
}
