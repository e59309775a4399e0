use plotters::prelude::*;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{dataset_catalog, train_with_set, ExperimentConfig};
use crate::data::{DatasetHandle, RunRegistry};
use crate::transform::AugmentationSet;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub size: usize,
    /// `all` or `safe`.
    pub set: String,
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub metric: String,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = format!("size,set,{}\n", self.metric);
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.size, r.set, r.metric));
        }
        out
    }

    /// Subset size with the best metric for `set`.
    pub fn best_size(&self, set: &str) -> Option<usize> {
        self.rows
            .iter()
            .filter(|r| r.set == set)
            .max_by(|a, b| a.metric.total_cmp(&b.metric))
            .map(|r| r.size)
    }
}

/// One training run per `(size, set)` with `set` in {all, safe}; runs are
/// independent and execute on a pool of `config.workers` threads. Results
/// come back in `(size, all), (size, safe)` order.
pub fn subset_size_sweep(
    config: &ExperimentConfig,
    data: &DatasetHandle,
    safe: &AugmentationSet,
    sizes: &[usize],
) -> Result<SweepTable> {
    config.validate()?;
    if let Some(s) = sizes.iter().find(|&&s| s > crate::transform::NUM_TRANSFORMS) {
        return Err(Error::InvalidArgument(format!("subset size {s} exceeds the catalog")));
    }
    let (all, _) = dataset_catalog(data, config.p)?;
    let jobs: Vec<(usize, &str, &AugmentationSet)> = sizes
        .iter()
        .flat_map(|&s| [(s, "all", &all), (s, "safe", safe)])
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let results: Vec<Result<(SweepRow, String)>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(size, name, set)| {
                let cfg = ExperimentConfig {
                    k: size,
                    out: None,
                    ..config.clone()
                };
                let run = train_with_set(&cfg, data, Some(set))?;
                let metric_name = run.record.test_metric.as_ref().map_or("top1".into(), |m| m.name.clone());
                Ok((
                    SweepRow {
                        size,
                        set: name.to_string(),
                        metric: run.record.metric(),
                    },
                    metric_name,
                ))
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(results.len());
    let mut metric = "top1".to_string();
    for r in results {
        let (row, m) = r?;
        metric = m;
        rows.push(row);
    }
    let table = SweepTable { metric, rows };
    if let Some(reg) = config.out.as_ref().map(RunRegistry::new) {
        let paths = reg.create("sweep", &config.hash())?;
        config.save(&paths.config)?;
        let write = |name: &str, text: String| {
            let p = paths.dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        write("sweep.csv", table.to_csv())?;
        write("sweep.svg", render_sweep_figure(&table)?)?;
        write("record.json", serde_json::to_string_pretty(&table)?)?;
    }
    Ok(table)
}

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

/// Metric against subset size, one line per set.
pub fn render_sweep_figure(table: &SweepTable) -> Result<String> {
    let max_size = table.rows.iter().map(|r| r.size).max().unwrap_or(0).max(1);
    let values = table.rows.iter().map(|r| r.metric).filter(|v| v.is_finite());
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (lo, hi) = if lo.is_finite() { ((lo - 2.0).max(0.0), (hi + 2.0).min(100.0)) } else { (0.0, 100.0) };
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (800, 500)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption("Task metric vs subset size", ("sans-serif", 20))
            .margin(15)
            .x_label_area_size(40)
            .y_label_area_size(55)
            .build_cartesian_2d(0f64..max_size as f64, lo..hi.max(lo + 1.0))
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc("subset size")
            .y_desc(format!("{} (%)", table.metric))
            .draw()
            .map_err(plot_err)?;
        for (name, colour) in [("all", RGBColor(200, 60, 60)), ("safe", RGBColor(50, 100, 200))] {
            let pts: Vec<(f64, f64)> = table
                .rows
                .iter()
                .filter(|r| r.set == name)
                .map(|r| (r.size as f64, r.metric))
                .collect();
            chart
                .draw_series(LineSeries::new(pts.clone(), colour.stroke_width(2)))
                .map_err(plot_err)?
                .label(name)
                .legend(move |(x, y)| PathElement::new([(x, y), (x + 14, y)], colour.stroke_width(2)));
            chart
                .draw_series(pts.into_iter().map(|p| Circle::new(p, 4, colour.filled())))
                .map_err(plot_err)?;
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.85))
            .border_style(BLACK)
            .draw()
            .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    Ok(svg)
}
