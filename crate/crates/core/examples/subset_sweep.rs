//! Task accuracy against the fixed subset size k, for the whole catalog
//! and for a safe set. Writes the sweep figure as SVG.
//!
//! cargo run --release --example subset_sweep -- [figure.svg]

use safeaug::transform::AugmentationSet;
use safeaug::workflows::{load_data, render_sweep_figure, subset_size_sweep, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let figure = std::env::args().nth(1).unwrap_or_else(|| "sweep.svg".into());
    let config = ExperimentConfig {
        probe_samples: 1000,
        epochs: 3,
        ..ExperimentConfig::for_dataset("probe")
    };
    let data = load_data(&config)?;
    let safe = AugmentationSet::catalog(data.input.height, data.input.width, config.p).restrict(&[
        "HorizontalFlip",
        "RandomBrightness",
        "RandomGamma",
        "RandomContrast",
        "Blur",
    ])?;
    let table = subset_size_sweep(&config, &data, &safe, &[0, 1, 3, 5])?;
    print!("{}", table.to_csv());
    println!("best k: all {:?}, safe {:?}", table.best_size("all"), table.best_size("safe"));
    std::fs::write(&figure, render_sweep_figure(&table)?)?;
    println!("figure: {figure}");
    Ok(())
}
