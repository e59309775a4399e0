//! The `safeaug` command line. Every subcommand resolves an
//! [`ExperimentConfig`] (defaults for the dataset, then `--config`, then
//! flags) and calls the matching library function.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::analyzer::{emit_report, load_report, render_table, select_safe_set, AccuracyKind, SafetyReport};
use crate::data::{load_checkpoint, save_probe_dir, RunRegistry, DATA_ROOT_ENV};
use crate::transform::{AugmentationSet, Transform, CATALOG_NAMES};
use crate::workflows::{
    dataset_catalog, finetune, learn_safe, load_data, load_safe_set, run_repeats, subset_size_sweep, AugmentationMode,
    ExperimentConfig,
};
use crate::{Error, Result};

/// Registry root used when neither the config nor `--out` names one.
pub const DEFAULT_OUT: &str = "runs";

#[derive(Debug, Parser)]
#[command(name = "safeaug", version, about = "Learn and train with distribution-preserving augmentations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Joint training, then safe-set selection; writes report, figure and safe_set.toml.
    LearnSafe(Overrides),
    /// Trains one augmentation mode (`--repeats` seeds).
    Train(Overrides),
    /// Continues a finished run (`--run`) on the set chosen by `--mode`.
    Finetune(Overrides),
    /// Task metric against subset size for the full and the safe set.
    Sweep(Overrides),
    /// Prints the table of a learn-safe run and redraws its figure,
    /// re-thresholding when `--fp-max` / `--acc-max` are given.
    Report(Overrides),
    /// Lists the catalog with default magnitudes.
    ListTransforms {
        /// Image side used to size the crops.
        #[arg(long, default_value_t = 32)]
        size: usize,
    },
    /// Writes a synthetic probe dataset to a directory.
    Probe {
        #[command(flatten)]
        overrides: Overrides,
        /// Target directory.
        #[arg(long)]
        dir: PathBuf,
    },
}

/// Flags shared by the experiment subcommands. Each maps to one
/// [`ExperimentConfig`] field.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML experiment config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long, env = DATA_ROOT_ENV)]
    pub data_root: Option<PathBuf>,
    #[arg(long)]
    pub subset_size: Option<usize>,
    /// Image count of the synthetic datasets.
    #[arg(long)]
    pub probe_samples: Option<usize>,
    /// Side length of the synthetic datasets.
    #[arg(long)]
    pub probe_size: Option<usize>,
    #[arg(long)]
    pub model: Option<String>,
    /// none, baseline, safe, all, safe_v2 or safe+baseline+cutout.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub finetune_lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub cutout: Option<usize>,
    #[arg(long)]
    pub fp_max: Option<f64>,
    #[arg(long)]
    pub acc_max: Option<f64>,
    /// balanced or binary.
    #[arg(long)]
    pub acc_metric: Option<String>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Comma-separated subset sizes for `sweep`.
    #[arg(long, value_delimiter = ',')]
    pub sweep_sizes: Option<Vec<usize>>,
    /// Safe-set file, or the id of a learn-safe run.
    #[arg(long)]
    pub safe_set: Option<String>,
    /// Run id (or folder) this command operates on.
    #[arg(long)]
    pub run: Option<String>,
    /// Run registry root.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Overrides {
    /// Dataset defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::for_dataset(self.dataset.as_deref().unwrap_or("probe")),
        };
        if let Some(v) = &self.dataset {
            c.dataset = v.clone();
        }
        if let Some(v) = &self.data_root {
            c.data_root = Some(v.clone());
        }
        if let Some(v) = self.subset_size {
            c.subset_size = Some(v);
        }
        if let Some(v) = &self.model {
            c.model = v.clone();
        }
        if let Some(v) = &self.mode {
            c.mode = AugmentationMode::parse(v)?;
        }
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    c.$field = v;
                }
            )*};
        }
        set!(probe_samples, probe_size, k, p, epochs, seed, lr, batch_size, cutout, fp_max, acc_max, repeats, workers);
        if let Some(v) = self.finetune_lr {
            c.finetune_lr = Some(v);
        }
        if let Some(v) = &self.acc_metric {
            c.accuracy = AccuracyKind::parse(v)?;
        }
        if let Some(v) = &self.sweep_sizes {
            c.sweep_sizes = v.clone();
        }
        if let Some(v) = &self.out {
            c.out = Some(v.clone());
        }
        if c.out.is_none() {
            c.out = Some(PathBuf::from(DEFAULT_OUT));
        }
        if let Some(s) = &self.safe_set {
            c.safe_set = Some(safe_set_path(s, &registry(&c))?);
        }
        c.validate()?;
        Ok(c)
    }
}

fn registry(c: &ExperimentConfig) -> RunRegistry {
    RunRegistry::new(c.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)))
}

/// A file path as given, otherwise the safe set of the named run.
fn safe_set_path(value: &str, reg: &RunRegistry) -> Result<PathBuf> {
    let path = Path::new(value);
    if path.is_file() {
        return Ok(path.to_path_buf());
    }
    let run = reg.open(value)?;
    if !run.safe_set.is_file() {
        return Err(Error::InvalidArgument(format!("run `{value}` has no safe set")));
    }
    Ok(run.safe_set)
}

fn require_run(o: &Overrides) -> Result<&str> {
    o.run
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("this command needs --run <id>".into()))
}

/// Parses `args` (including the program name) and runs the subcommand,
/// writing the human-readable summary to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            return out.write_all(e.to_string().as_bytes()).map_err(|e| Error::io("<stdout>", e));
        }
        Err(e) => return Err(Error::Usage(e.to_string())),
    };
    execute(&cli.command, out)
}

pub fn execute(command: &Command, out: &mut dyn Write) -> Result<()> {
    let mut text = String::new();
    match command {
        Command::ListTransforms { size } => text = list_transforms(*size)?,
        Command::Probe { overrides, dir } => {
            let c = overrides.resolve()?;
            let data = load_data(&c)?;
            save_probe_dir(&data, dir)?;
            text.push_str(&format!(
                "{}: {} train / {} val / {} test images of {} in {}\n",
                data.name,
                data.train.len(),
                data.val.len(),
                data.test.len(),
                data.input,
                dir.display()
            ));
            for n in &data.notes {
                text.push_str(&format!("note: {n}\n"));
            }
        }
        Command::LearnSafe(o) => {
            let c = o.resolve()?;
            let data = load_data(&c)?;
            let r = learn_safe(&c, &data)?;
            text.push_str(&render_table(&r.report));
            text.push_str(&format!("test {:.2}%\n", r.run.record.metric()));
            text.push_str(&run_line(&r.run.record.run_id));
        }
        Command::Train(o) => {
            let c = o.resolve()?;
            let data = load_data(&c)?;
            let (runs, mean) = run_repeats(&c, &data, None)?;
            for r in &runs {
                text.push_str(&format!(
                    "seed {}  {}  test {:.2}%  {}\n",
                    r.record.seed,
                    r.record.mode,
                    r.record.metric(),
                    r.record.run_id.as_deref().unwrap_or("-")
                ));
            }
            text.push_str(&format!("mean test {mean:.2}% over {} run(s)\n", runs.len()));
        }
        Command::Finetune(o) => {
            let c = o.resolve()?;
            let data = load_data(&c)?;
            let parent = load_checkpoint(&registry(&c).open(require_run(o)?)?.checkpoint)?;
            let set = finetune_set(&c, &data)?;
            let r = finetune(&c, &data, &parent, &set)?;
            text.push_str(&format!(
                "fine-tuned from epoch {} on [{}]: test {:.2}%\n",
                parent.epoch,
                set.names().join(", "),
                r.record.metric()
            ));
            text.push_str(&run_line(&r.record.run_id));
        }
        Command::Sweep(o) => {
            let c = o.resolve()?;
            let data = load_data(&c)?;
            let safe = load_safe_set(&c, &data)?;
            let table = subset_size_sweep(&c, &data, &safe, &c.sweep_sizes)?;
            text.push_str(&table.to_csv());
            for set in ["all", "safe"] {
                if let Some(s) = table.best_size(set) {
                    text.push_str(&format!("best size for {set}: {s}\n"));
                }
            }
        }
        Command::Report(o) => {
            let c = o.resolve()?;
            let paths = registry(&c).open(require_run(o)?)?;
            let mut report = load_report(&paths.report)?;
            if o.fp_max.is_some() || o.acc_max.is_some() || o.acc_metric.is_some() {
                report = rethreshold(&report, &c)?;
            }
            emit_report(&report, &paths.report, Some(&paths.figure))?;
            text.push_str(&render_table(&report));
            text.push_str(&format!("figure: {}\n", paths.figure.display()));
        }
    }
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn run_line(id: &Option<String>) -> String {
    id.as_ref().map_or(String::new(), |id| format!("run: {id}\n"))
}

fn finetune_set(c: &ExperimentConfig, data: &crate::data::DatasetHandle) -> Result<AugmentationSet> {
    match c.mode {
        AugmentationMode::All => Ok(dataset_catalog(data, c.p)?.0),
        AugmentationMode::Safe => load_safe_set(c, data),
        AugmentationMode::SafeV2 => {
            let s = load_safe_set(c, data)?;
            let kept: Vec<String> = s.names().into_iter().filter(|n| !c.exclusions.contains(n)).collect();
            s.restrict(&kept)
        }
        other => Err(Error::InvalidArgument(format!(
            "finetune supports modes all, safe and safe_v2, not {}",
            other.name()
        ))),
    }
}

fn rethreshold(report: &SafetyReport, c: &ExperimentConfig) -> Result<SafetyReport> {
    let safe = select_safe_set(&report.metrics, c.thresholds())?;
    let mut r = SafetyReport::new(&report.dataset, &report.metrics, &safe, report.task_accuracy.clone());
    r.run_id = report.run_id.clone();
    Ok(r)
}

/// One row per catalog entry: label index, name and default magnitudes at
/// `size×size`.
pub fn list_transforms(size: usize) -> Result<String> {
    let mut text = String::new();
    for (i, name) in CATALOG_NAMES.iter().enumerate() {
        let t = Transform::default_for(name, size, size)?;
        let debug = format!("{t:?}");
        let params = debug.find('{').map_or("-", |at| &debug[at..]);
        text.push_str(&format!("{i:>2}  {name:<18} {params}\n"));
    }
    Ok(text)
}
