use std::fmt::Write as _;
use std::path::Path;

use plotters::prelude::*;
use plotters::style::FontTransform;
use serde::{Deserialize, Serialize};

use super::{SafeSet, SafetyMetrics, Thresholds};
use crate::transform::label_mapping;
use crate::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Task accuracy (top-1 or mIoU, in percent) of models trained with a single
/// augmentation, against the model trained without augmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskAccuracies {
    pub metric: String,
    pub without_augmentation: f64,
    pub per_augmentation: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyReport {
    pub schema_version: u32,
    /// Augmentation label order.
    pub mapping: Vec<String>,
    pub dataset: String,
    pub run_id: Option<String>,
    pub thresholds: Thresholds,
    pub metrics: SafetyMetrics,
    pub safe_set: Vec<String>,
    pub refinements: Vec<String>,
    pub task_accuracy: Option<TaskAccuracies>,
}

impl SafetyReport {
    pub fn new(dataset: &str, metrics: &SafetyMetrics, safe: &SafeSet, task_accuracy: Option<TaskAccuracies>) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            mapping: label_mapping(),
            dataset: dataset.to_string(),
            run_id: safe.provenance.run_id.clone(),
            thresholds: safe.thresholds,
            metrics: metrics.clone(),
            safe_set: safe.members.clone(),
            refinements: safe.provenance.refinements.clone(),
            task_accuracy,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn parse_report(text: &str) -> Result<SafetyReport> {
    let raw: serde_json::Value = serde_json::from_str(text)?;
    let found = raw.get("schema_version").and_then(serde_json::Value::as_u64).unwrap_or(0) as u32;
    if found != REPORT_SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found,
            expected: REPORT_SCHEMA_VERSION,
        });
    }
    let report: SafetyReport = serde_json::from_value(raw)?;
    let expected = label_mapping();
    if report.mapping != expected {
        return Err(Error::MappingMismatch {
            expected,
            found: report.mapping,
        });
    }
    report.metrics.validate()?;
    Ok(report)
}

pub fn load_report(path: &Path) -> Result<SafetyReport> {
    parse_report(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

/// Writes the JSON report and, when `figure` is given, the SVG figure.
pub fn emit_report(report: &SafetyReport, json: &Path, figure: Option<&Path>) -> Result<()> {
    std::fs::write(json, report.to_json()?).map_err(|e| Error::io(json, e))?;
    if let Some(fig) = figure {
        std::fs::write(fig, render_figure(report)?).map_err(|e| Error::io(fig, e))?;
    }
    Ok(())
}

/// Fixed-width table of every label.
pub fn render_table(report: &SafetyReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<18} {:>8} {:>8} {:>8} {:>8} {:>6} {:>9}  safe",
        "augmentation", "fp_rate", "aug_acc", "balanced", "recall", "fired", "task"
    );
    for m in &report.metrics.labels {
        let recall = m.aug_recall.map_or("-".to_string(), |r| format!("{r:.3}"));
        let task = report
            .task_accuracy
            .as_ref()
            .and_then(|t| t.per_augmentation.iter().find(|(n, _)| *n == m.name))
            .map_or("-".to_string(), |(_, v)| format!("{v:.2}"));
        let safe = if report.safe_set.contains(&m.name) { "yes" } else { "no" };
        let _ = writeln!(
            out,
            "{:<18} {:>8.3} {:>8.3} {:>8.3} {:>8} {:>6} {:>9}  {safe}",
            m.name, m.clean_fp_rate, m.aug_accuracy, m.aug_balanced_accuracy, recall, m.fired_support, task
        );
    }
    let t = &report.thresholds;
    let _ = writeln!(
        out,
        "thresholds: fp_max={} acc_max={} ({} accuracy) decision={}",
        t.fp_max,
        t.acc_max,
        t.accuracy.name(),
        t.decision_threshold
    );
    if let Some(ta) = &report.task_accuracy {
        let _ = writeln!(out, "without augmentation: {:.2} ({})", ta.without_augmentation, ta.metric);
    }
    let _ = writeln!(out, "safe set: [{}]", report.safe_set.join(", "));
    out
}

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

/// Grouped bars per augmentation (false-positive rate, augmentation
/// accuracy and, when present, task accuracy, all in percent) with a red
/// line at the no-augmentation task accuracy.
pub fn render_figure(report: &SafetyReport) -> Result<String> {
    let labels = &report.metrics.labels;
    let kind = report.thresholds.accuracy;
    let n = labels.len();
    let task: Option<Vec<f64>> = report.task_accuracy.as_ref().map(|t| {
        labels
            .iter()
            .map(|m| {
                t.per_augmentation
                    .iter()
                    .find(|(name, _)| *name == m.name)
                    .map_or(0.0, |(_, v)| *v)
            })
            .collect()
    });
    let groups = if task.is_some() { 3 } else { 2 };
    let width = 0.8 / groups as f64;
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (1200, 640)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(format!("Augmentation safety: {}", report.dataset), ("sans-serif", 22))
            .margin(15)
            .x_label_area_size(150)
            .y_label_area_size(55)
            .build_cartesian_2d(0f64..n as f64, 0f64..100f64)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .disable_x_mesh()
            .x_labels(0)
            .y_desc("%")
            .draw()
            .map_err(plot_err)?;

        let mut series: Vec<(&str, RGBColor, Vec<f64>)> = vec![
            (
                "Augmentation false positives (clean set)",
                RGBColor(70, 110, 190),
                labels.iter().map(|m| 100.0 * m.clean_fp_rate).collect(),
            ),
            (
                "Augmentation classification (augmented set)",
                RGBColor(240, 150, 40),
                labels.iter().map(|m| 100.0 * kind.of(m)).collect(),
            ),
        ];
        if let Some(t) = task {
            series.insert(0, ("Image classification", RGBColor(90, 170, 90), t));
        }
        for (g, (name, colour, values)) in series.into_iter().enumerate() {
            let bars = values.into_iter().enumerate().map(move |(i, v)| {
                let x0 = i as f64 + 0.1 + g as f64 * width;
                Rectangle::new([(x0, 0.0), (x0 + width, v.clamp(0.0, 100.0))], colour.filled())
            });
            chart
                .draw_series(bars)
                .map_err(plot_err)?
                .label(name)
                .legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 12, y + 5)], colour.filled()));
        }
        if let Some(t) = &report.task_accuracy {
            let v = t.without_augmentation;
            chart
                .draw_series(LineSeries::new([(0.0, v), (n as f64, v)], RED.stroke_width(2)))
                .map_err(plot_err)?
                .label(format!("Without augmentation ({v:.2})"))
                .legend(|(x, y)| PathElement::new([(x, y), (x + 12, y)], RED.stroke_width(2)));
        }
        chart
            .configure_series_labels()
            .position(SeriesLabelPosition::UpperRight)
            .background_style(WHITE.mix(0.85))
            .border_style(BLACK)
            .draw()
            .map_err(plot_err)?;

        let style = ("sans-serif", 13).into_font().transform(FontTransform::Rotate90);
        for (i, m) in labels.iter().enumerate() {
            let (px, py) = chart.backend_coord(&(i as f64 + 0.5, 0.0));
            let mark = if report.safe_set.contains(&m.name) { "* " } else { "" };
            root.draw(&Text::new(format!("{mark}{}", m.name), (px + 6, py + 8), style.clone()))
                .map_err(plot_err)?;
        }
        root.present().map_err(plot_err)?;
    }
    Ok(svg)
}
