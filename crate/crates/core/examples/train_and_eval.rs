//! The `train` and `eval` commands driven from code: train into a temporary
//! directory, list what was written, then re-evaluate the checkpoint.
//!
//! cargo run --release --example train_and_eval

use adt_ssl::checkpoint::Checkpoint;
use adt_ssl::cli::{cmd_train, run_eval, DataArg, EXIT_OK};

fn main() -> adt_ssl::Result<()> {
    let out = std::env::temp_dir().join(format!("adt-ssl-example-{}", std::process::id()));
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/smoke.toml");
    let code = cmd_train(config.as_ref(), &out, Some(3));
    assert_eq!(code, EXIT_OK, "train failed");

    let mut files: Vec<String> = std::fs::read_dir(&out)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    println!("wrote {}: {}", out.display(), files.join(", "));
    print!("{}", std::fs::read_to_string(out.join("thresholds.csv"))?);

    let ck = Checkpoint::load(&out.join("checkpoint.json"))?;
    println!("checkpoint after {} epochs, {} steps", ck.epoch, ck.step_count);
    let eval = run_eval(&out.join("checkpoint.json"), &DataArg::Embedded)?;
    println!("eval: accuracy {:.3} on {} samples, per class {:?}", eval.accuracy, eval.samples, eval.per_class);

    std::fs::remove_dir_all(&out)?;
    Ok(())
}
