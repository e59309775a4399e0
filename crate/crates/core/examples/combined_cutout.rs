//! Baseline recipe, a k-subset of a safe set, then Cutout, next to the
//! baseline alone.

use safeaug::transform::AugmentationSet;
use safeaug::workflows::{load_data, train_baseline, train_combined, ExperimentConfig};

fn main() -> safeaug::Result<()> {
    let config = ExperimentConfig {
        probe_samples: 2000,
        epochs: 5,
        cutout: 4,
        ..ExperimentConfig::for_dataset("probe")
    };
    let data = load_data(&config)?;
    let safe = AugmentationSet::catalog(data.input.height, data.input.width, config.p).restrict(&[
        "HorizontalFlip",
        "RandomBrightness",
        "RandomGamma",
        "RandomContrast",
    ])?;
    let base = train_baseline(&config, &data)?;
    let combined = train_combined(&config, &data, &safe)?;
    println!("baseline:                {:.2}%", base.record.metric());
    println!("safe + baseline + cutout {:.2}%", combined.record.metric());
    for line in &combined.record.augmentations {
        println!("  {line}");
    }
    Ok(())
}
