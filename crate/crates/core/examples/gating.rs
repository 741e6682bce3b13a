//! Routes a handful of predictions through the dual-threshold gate.
//!
//! cargo run --example gating

use adt_ssl::losses::gate;
use adt_ssl::prob::sharpen;
use adt_ssl::{ProbVector, ThresholdRegistry};

fn main() -> adt_ssl::Result<()> {
    let tau = 0.95;
    let temperature = 0.5;
    let mut reg = ThresholdRegistry::new(3)?;
    reg.set_threshold(0, 0.55)?;
    reg.set_threshold(1, 0.80)?;
    println!("tau = {tau}, T = {temperature}, class thresholds {:?}\n", reg.current());

    let cases = [
        vec![0.90, 0.05, 0.05],
        vec![0.75, 0.20, 0.05],
        vec![0.60, 0.30, 0.10],
        vec![0.50, 0.40, 0.10],
        vec![0.15, 0.70, 0.15],
        vec![0.10, 0.85, 0.05],
        vec![0.20, 0.20, 0.60],
    ];
    println!("{:<20} {:>9} {:>9}  route", "q_bar", "max q_bar", "max q_hat");
    for values in cases {
        let q_bar = ProbVector::new(values)?;
        let q_hat = sharpen(&q_bar, temperature)?;
        let decision = gate(&q_bar, &q_hat, tau, &reg)?;
        println!(
            "{:<20} {:>9.4} {:>9.4}  {:?} (T_{} = {})",
            format!("{:?}", q_bar.as_slice()),
            q_bar.max(),
            q_hat.max(),
            decision.route,
            q_bar.argmax(),
            reg.threshold_for(q_bar.argmax())?
        );
    }
    Ok(())
}
