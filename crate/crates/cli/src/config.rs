//! Run configuration: command-line flags layered over an optional TOML file
//! layered over defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;

use ncr_core::data::{SynthSpec, DEFAULT_SEED};
use ncr_core::models::{Gamma, Kernel, ModelKind};
use ncr_core::tuning::{AlphaGrid, GridResolution, Objective};

/// Error in the user's configuration or dataset selection (exit code 2).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Keys accepted in a `--config` file; all optional.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dataset: Option<PathBuf>,
    pub target: Option<String>,
    pub model: Option<String>,
    pub augmented: Option<bool>,
    pub objective: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub coarse_grid: Option<bool>,
    pub kernel: Option<String>,
    pub alpha_grid: Option<String>,
    pub dump_cells: Option<bool>,
    pub n: Option<usize>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub variance: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Flags shared by the commands that tune models; `None` means "not given".
#[derive(Debug, Default, Clone, clap::Args)]
pub struct TuneFlags {
    /// TOML file with defaults for any of these flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// ols | ridge | lasso | svr
    #[arg(long)]
    pub model: Option<String>,
    /// Append Tracemean features
    #[arg(long)]
    pub augmented: bool,
    /// r2 | mse (default: r2 for CSV data, mse for synthetic)
    #[arg(long)]
    pub objective: Option<String>,
    /// Seed for data generation and splitting (default: $NCR_SEED, then 42)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for the grid search (default: all cores)
    #[arg(long)]
    pub workers: Option<usize>,
    /// Use the stride-reduced q/eps grid (labelled "coarse" in reports)
    #[arg(long)]
    pub coarse_grid: bool,
    /// SVR kernel: linear | rbf (default: linear for synthetic, rbf for CSV)
    #[arg(long)]
    pub kernel: Option<String>,
    /// standard {0.1,1,10} | small {0.0001,0.001,0.01}
    #[arg(long)]
    pub alpha_grid: Option<String>,
    /// Also write the per-cell cross-validation table
    #[arg(long)]
    pub dump_cells: bool,
}

#[derive(Debug, Default, Clone, clap::Args)]
pub struct SynthFlags {
    /// Number of generated samples
    #[arg(long)]
    pub n: Option<usize>,
    /// Slope of the generating line
    #[arg(long, allow_hyphen_values = true)]
    pub slope: Option<f64>,
    /// Intercept of the generating line
    #[arg(long, allow_hyphen_values = true)]
    pub intercept: Option<f64>,
    /// Noise variance
    #[arg(long)]
    pub variance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv { path: PathBuf, target: String },
    Synthetic(SynthSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: Option<DataSource>,
    pub model: ModelKind,
    pub augmented: bool,
    pub objective: Option<Objective>,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub resolution: GridResolution,
    pub kernel: Option<Kernel<f64>>,
    pub alpha_grid: AlphaGrid,
    pub dump_cells: bool,
}

fn env_seed() -> anyhow::Result<Option<u64>> {
    match std::env::var("NCR_SEED") {
        Ok(s) if !s.trim().is_empty() => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("NCR_SEED={s} is not an unsigned integer"))),
        _ => Ok(None),
    }
}

fn parse_kernel(s: &str) -> anyhow::Result<Kernel<f64>> {
    match s.to_ascii_lowercase().as_str() {
        "linear" => Ok(Kernel::Linear),
        "rbf" => Ok(Kernel::Rbf { gamma: Gamma::Auto }),
        other => Err(usage(format!("unknown kernel `{other}`"))),
    }
}

fn parsed<T: std::str::FromStr<Err = ncr_core::Error>>(v: Option<String>) -> anyhow::Result<Option<T>> {
    v.map(|s| s.parse::<T>().map_err(|e| usage(e.to_string()))).transpose()
}

impl RunConfig {
    /// Merges flags over the config file (if any) over defaults.
    pub fn resolve(
        flags: &TuneFlags,
        synth: &SynthFlags,
        dataset: Option<PathBuf>,
        target: Option<String>,
    ) -> anyhow::Result<Self> {
        let file = match &flags.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let seed = match flags.seed.or(file.seed) {
            Some(s) => s,
            None => env_seed()?.unwrap_or(DEFAULT_SEED),
        };

        let dataset = dataset.or(file.dataset);
        let target = target.or(file.target);
        let n = synth.n.or(file.n);
        let source = match (dataset, n) {
            (Some(_), Some(_)) => bail!(usage("give either --dataset or --n, not both")),
            (Some(path), None) => {
                let target = target.ok_or_else(|| usage("--dataset requires --target"))?;
                Some(DataSource::Csv { path, target })
            }
            (None, Some(n)) => {
                let mut spec = SynthSpec::new(
                    n,
                    synth.slope.or(file.slope).unwrap_or(2.0),
                    synth.variance.or(file.variance).unwrap_or(1.0),
                    seed,
                );
                spec.intercept = synth.intercept.or(file.intercept).unwrap_or(0.0);
                spec.validate().map_err(|e| usage(e.to_string()))?;
                Some(DataSource::Synthetic(spec))
            }
            (None, None) => None,
        };

        let model = parsed::<ModelKind>(flags.model.clone().or(file.model))?.unwrap_or(ModelKind::Ols);
        let objective = parsed::<Objective>(flags.objective.clone().or(file.objective))?;
        let alpha_grid = parsed::<AlphaGrid>(flags.alpha_grid.clone().or(file.alpha_grid))?.unwrap_or(AlphaGrid::Standard);
        let kernel = flags.kernel.clone().or(file.kernel).map(|k| parse_kernel(&k)).transpose()?;
        let workers = flags.workers.or(file.workers);
        if workers == Some(0) {
            bail!(usage("--workers must be at least 1"));
        }
        let coarse = flags.coarse_grid || file.coarse_grid.unwrap_or(false);
        Ok(Self {
            source,
            model,
            augmented: flags.augmented || file.augmented.unwrap_or(false),
            objective,
            seed,
            out: flags.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("ncr-out")),
            workers,
            resolution: if coarse { GridResolution::Coarse } else { GridResolution::Full },
            kernel,
            alpha_grid,
            dump_cells: flags.dump_cells || file.dump_cells.unwrap_or(false),
        })
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(self.source, Some(DataSource::Synthetic(_)))
    }

    /// MSE for synthetic data, R² for CSV data, unless overridden.
    pub fn objective(&self) -> Objective {
        self.objective.unwrap_or(if self.is_synthetic() {
            Objective::MinimizeMse
        } else {
            Objective::MaximizeR2
        })
    }

    pub fn kernel(&self) -> Kernel<f64> {
        self.kernel.unwrap_or(if self.is_synthetic() {
            Kernel::Linear
        } else {
            Kernel::Rbf { gamma: Gamma::Auto }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_which_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        std::fs::write(&cfg, "model = \"lasso\"\nseed = 7\nn = 50\nvariance = 5.0\ncoarse_grid = true\n").unwrap();
        let flags = TuneFlags {
            config: Some(cfg),
            model: Some("ridge".into()),
            ..Default::default()
        };
        let rc = RunConfig::resolve(&flags, &SynthFlags::default(), None, None).unwrap();
        assert_eq!(rc.model, ModelKind::Ridge);
        assert_eq!(rc.seed, 7);
        assert_eq!(rc.resolution, GridResolution::Coarse);
        match rc.source {
            Some(DataSource::Synthetic(s)) => {
                assert_eq!((s.n, s.noise_variance, s.slope, s.seed), (50, 5.0, 2.0, 7));
            }
            other => panic!("unexpected source {other:?}"),
        }
        assert_eq!(rc.objective(), Objective::MinimizeMse);
        assert_eq!(rc.kernel(), Kernel::Linear);
    }

    #[test]
    fn csv_source_needs_target() {
        let r = RunConfig::resolve(&TuneFlags::default(), &SynthFlags::default(), Some("d.csv".into()), None);
        assert!(r.unwrap_err().downcast_ref::<UsageError>().is_some());
        let rc = RunConfig::resolve(&TuneFlags::default(), &SynthFlags::default(), Some("d.csv".into()), Some("y".into()))
            .unwrap();
        assert_eq!(rc.objective(), Objective::MaximizeR2);
        assert_eq!(rc.kernel(), Kernel::Rbf { gamma: Gamma::Auto });
    }

    #[test]
    fn two_sources_rejected() {
        let synth = SynthFlags {
            n: Some(10),
            ..Default::default()
        };
        assert!(RunConfig::resolve(&TuneFlags::default(), &synth, Some("d.csv".into()), Some("y".into())).is_err());
    }

    #[test]
    fn unknown_config_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        std::fs::write(&cfg, "modle = \"lasso\"\n").unwrap();
        let flags = TuneFlags {
            config: Some(cfg),
            ..Default::default()
        };
        assert!(RunConfig::resolve(&flags, &SynthFlags::default(), None, None).is_err());
    }
}
