//! Samples a few subsets, applies them to one batch and prints the label
//! vector each batch would be trained against. Cutout at the end.

use safeaug::rng;
use safeaug::transform::{apply_cutout, apply_pipeline_batch, sample_subset, AugmentationSet, Image, SubsetMode};

fn main() -> safeaug::Result<()> {
    let batch: Vec<Image> = (0..4)
        .map(|i| Image::from_fn(32, 32, 3, |y, x, c| ((y + 2 * x + 7 * c + i) % 32 + 1) as f32 / 33.0))
        .collect::<safeaug::Result<_>>()?;
    let set = AugmentationSet::catalog(32, 32, 0.5);
    let mut r = rng::seeded(42);
    for round in 0..5 {
        let subset = sample_subset(&set, SubsetMode::RandomSize { max: 5 }, &mut r)?;
        let offered: Vec<&str> = subset.indices.iter().map(|&i| set.specs()[i].name()).collect();
        let out = apply_pipeline_batch(&batch, None, &set, &subset, 0.5, &mut r)?;
        println!(
            "batch {round}: offered {offered:?}, fired {:?}, labels {:?}, shape {}",
            out.labels.fired_names(),
            out.labels.as_f64().map(|v| v as u8),
            out.images[0].shape()
        );
    }
    let cut = apply_cutout(&batch[0], 16, &[0.0, 0.0, 0.0], &mut r)?;
    let zeros = cut.data().iter().filter(|&&v| v == 0.0).count();
    println!("cutout 16x16 zeroed {zeros} values of {}", cut.data().len());
    Ok(())
}
