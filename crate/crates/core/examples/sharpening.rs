//! Sharpening, one-hot collapse and Bhattacharyya similarity on a few
//! hand-picked distributions.
//!
//! cargo run --example sharpening

use adt_ssl::prob::{bhattacharyya, mean_prediction, one_hot, sharpen};
use adt_ssl::ProbVector;

fn show(label: &str, p: &ProbVector) {
    let cells: Vec<String> = p.as_slice().iter().map(|v| format!("{v:.4}")).collect();
    println!("{label:>24}  [{}]  max {:.4}  H {:.4}", cells.join(", "), p.max(), p.entropy());
}

fn main() -> adt_ssl::Result<()> {
    let p = ProbVector::new(vec![0.6, 0.4])?;
    show("p", &p);
    for t in [1.0, 0.5, 0.25, 0.1] {
        show(&format!("sharpen(p, {t})"), &sharpen(&p, t)?);
    }

    let q = ProbVector::new(vec![0.5, 0.3, 0.2])?;
    show("q", &q);
    show("one_hot(q)", &one_hot(&q));
    show("one_hot(tie)", &one_hot(&ProbVector::new(vec![0.4, 0.4, 0.2])?));

    // two weak views of the same sample
    let views = [ProbVector::new(vec![0.7, 0.2, 0.1])?, ProbVector::new(vec![0.5, 0.4, 0.1])?];
    let q_bar = mean_prediction(&views)?;
    show("mean of two views", &q_bar);

    println!();
    let others = [
        ("identical", q_bar.clone()),
        ("close", ProbVector::new(vec![0.55, 0.35, 0.1])?),
        ("other class", ProbVector::new(vec![0.1, 0.2, 0.7])?),
        ("disjoint support", ProbVector::new(vec![0.0, 0.0, 1.0])?),
    ];
    for (name, other) in &others {
        println!("BC(q_bar, {name:<16}) = {:.4}", bhattacharyya(&q_bar, other)?);
    }
    Ok(())
}
