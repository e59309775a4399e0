//! Learns the safe set on the synthetic probe: vertical flips are
//! detectable (every image is brighter at the top), global brightness is
//! already random in the raw data.
//!
//! cargo run --release --example learn_safe_probe -- [seed] [epochs]

use safeaug::analyzer::render_table;
use safeaug::workflows::{learn_safe, load_data, ExperimentConfig};

fn main() -> safeaug::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().map_or(0, |s| s.parse().expect("seed"));
    let epochs = args.next().map_or(10, |s| s.parse().expect("epochs"));
    let config = ExperimentConfig {
        seed,
        epochs,
        ..ExperimentConfig::for_dataset("probe")
    };
    let data = load_data(&config)?;
    let started = std::time::Instant::now();
    let out = learn_safe(&config, &data)?;
    for e in &out.run.record.epochs {
        println!(
            "epoch {:>2}  l_augm {:.4}  l_task {:.4}  val {:.2}%",
            e.epoch,
            e.l_augm.unwrap_or(0.0),
            e.l_task,
            e.val_metric.unwrap_or(f64::NAN)
        );
    }
    print!("{}", render_table(&out.report));
    println!("test top-1 {:.2}%  ({:.1}s)", out.run.record.metric(), started.elapsed().as_secs_f64());
    Ok(())
}
