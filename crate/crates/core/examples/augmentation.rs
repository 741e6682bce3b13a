//! Weak and strong views of a feature vector and of a tiny image.
//!
//! cargo run --example augmentation

use adt_ssl::augment::{view_seed, FeatureRange, StrongOp};
use adt_ssl::{Augmenter, Image, Sample, SampleData};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn print_image(label: &str, img: &Image) {
    println!("{label}:");
    for y in 0..img.height {
        let row: String = (0..img.width)
            .map(|x| match img.at(y, x, 0) {
                v if v > 0.66 => '#',
                v if v > 0.33 => '+',
                v if v > 0.0 => '.',
                _ => ' ',
            })
            .collect();
        println!("  |{row}|");
    }
}

fn main() -> adt_ssl::Result<()> {
    let sample = Sample::vector(7, vec![0.5, -1.0, 2.0, 0.0]);
    let range = FeatureRange { min: vec![-3.0; 4], max: vec![3.0; 4] };
    let aug = Augmenter::new(2, 0.5, Some(range))?;
    println!("vector {:?}", sample.features());
    for v in 0..3 {
        let seed = view_seed(42, sample.id, v);
        println!("  weak   #{v}: {:?}", rounded(aug.weak(&sample, seed).features()));
        println!("  strong #{v}: {:?}", rounded(aug.strong(&sample, seed).features()));
    }
    let again = aug.weak(&sample, view_seed(42, sample.id, 0));
    println!("  same seed, same view: {}", again == aug.weak(&sample, view_seed(42, sample.id, 0)));

    let (h, w) = (8, 8);
    let pixels: Vec<f64> = (0..h * w)
        .map(|i| if (2..6).contains(&(i / w)) && (1..4).contains(&(i % w)) { 1.0 } else { 0.0 })
        .collect();
    let img = Image::new(h, w, 1, pixels)?;
    let img_sample = Sample::image(1, img.clone());
    println!();
    print_image("original", &img);
    if let SampleData::Image(weak) = aug.weak(&img_sample, 3).data {
        print_image("weak (flip + shift)", &weak);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for op in [StrongOp::Rotate, StrongOp::ShearX, StrongOp::Invert] {
        print_image(&format!("{op:?} at magnitude 0.8"), &op.apply(&img, 0.8, &mut rng));
    }
    Ok(())
}

fn rounded(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1000.0).round() / 1000.0).collect()
}
