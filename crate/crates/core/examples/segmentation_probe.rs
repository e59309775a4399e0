//! Steps 1-4 on the three-class segmentation probe, then mIoU with and
//! without the learned safe set.

use safeaug::analyzer::render_table;
use safeaug::workflows::{learn_safe, load_data, mean_iou, train_with_set, ExperimentConfig};

fn main() -> safeaug::Result<()> {
    let toy = mean_iou(&[0, 0, 1, 1], &[0, 1, 1, 1], 2, 255)?;
    println!("toy mIoU {:?} = {:.4}%", toy.exact, toy.percent);

    let config = ExperimentConfig {
        probe_samples: 400,
        epochs: 3,
        lr: 1e-3,
        eval_batch_size: 8,
        eval_rounds: 10,
        ..ExperimentConfig::for_dataset("seg-probe")
    };
    let data = load_data(&config)?;
    let learned = learn_safe(&config, &data)?;
    print!("{}", render_table(&learned.report));
    let safe = learned.safe_set.to_augmentation_set(data.input.height, data.input.width, config.p)?;
    let none = train_with_set(&config, &data, None)?;
    let with = train_with_set(&config, &data, Some(&safe))?;
    println!("mIoU without {:.2}%, with safe set {:.2}%", none.record.metric(), with.record.metric());
    Ok(())
}
