//! Builds a safety report from hand-written metrics, writes the JSON and
//! the false-positive figure, and re-thresholds it.
//!
//! cargo run --example report_figure -- [dir]

use std::path::PathBuf;

use safeaug::analyzer::{
    emit_report, load_report, render_table, select_safe_set, LabelMetrics, SafetyMetrics, SafetyReport, Thresholds,
};
use safeaug::transform::CATALOG_NAMES;

fn main() -> safeaug::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let metrics = SafetyMetrics {
        labels: CATALOG_NAMES
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let detectable = i % 3 == 1;
                LabelMetrics {
                    name: (*name).into(),
                    clean_fp_rate: if i == 12 { 0.2 } else { 0.01 * (i % 4) as f64 },
                    aug_accuracy: if detectable { 0.95 } else { 0.83 },
                    aug_recall: Some(if detectable { 0.8 } else { 0.0 }),
                    aug_balanced_accuracy: if detectable { 0.88 } else { 0.5 },
                    clean_support: 40,
                    aug_support: 400,
                    fired_support: 65,
                }
            })
            .collect(),
    };
    let safe = select_safe_set(&metrics, Thresholds::default())?;
    let report = SafetyReport::new("handmade", &metrics, &safe, None);
    let (json, svg) = (dir.join("report.json"), dir.join("figure.svg"));
    emit_report(&report, &json, Some(&svg))?;
    print!("{}", render_table(&load_report(&json)?));
    println!("wrote {} and {}", json.display(), svg.display());

    let strict = Thresholds {
        fp_max: 0.0,
        ..Thresholds::default()
    };
    println!("with fp_max 0: {}", select_safe_set(&metrics, strict)?.members.join(", "));
    Ok(())
}
