//! Pretrain with every augmentation, learn the safe set, then continue
//! training on the safe set only. Runs on the probe; pass a run root to
//! keep checkpoints and records.
//!
//! cargo run --release --example finetune_protocol -- [out_dir]

use safeaug::workflows::{dataset_catalog, finetune, learn_safe, load_data, train_with_set, ExperimentConfig};

fn main() -> safeaug::Result<()> {
    let out = std::env::args().nth(1).map(Into::into);
    let learn = ExperimentConfig {
        out,
        ..ExperimentConfig::for_dataset("probe")
    };
    let data = load_data(&learn)?;
    let learned = learn_safe(&learn, &data)?;
    let config = ExperimentConfig { epochs: 4, ..learn };
    println!("safe set: {}", learned.safe_set.members.join(", "));

    let (all, _) = dataset_catalog(&data, config.p)?;
    let pre = train_with_set(&config, &data, Some(&all))?;
    println!("pretrained on all 15: {:.2}%", pre.record.metric());

    let safe = learned.safe_set.to_augmentation_set(data.input.height, data.input.width, config.p)?;
    let tuned = finetune(&ExperimentConfig { epochs: 3, ..config.clone() }, &data, &pre.checkpoint, &safe)?;
    println!("fine-tuned on safe: {:.2}% (epochs {}..{})", tuned.record.metric(), pre.checkpoint.epoch, tuned.checkpoint.epoch);
    let none = train_with_set(&config, &data, None)?;
    println!("no augmentation:   {:.2}%", none.record.metric());
    Ok(())
}
