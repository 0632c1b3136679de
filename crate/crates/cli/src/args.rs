use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dirimult_core::{ClassPriorSource, PriorFamily};

/// Explicit class priors must already sum to 1 this closely.
pub const EXPLICIT_PRIOR_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(
    name = "dirimult",
    version,
    about = "Classify count vectors (e.g. artefact type counts per site) with Dirichlet-multinomial posteriors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit per-class Dirichlet posteriors from a training CSV and write a model file
    Train(TrainArgs),
    /// Score a query CSV against a model file
    Classify(ClassifyArgs),
    /// Draw posterior means and marginal densities as SVG
    Plot(PlotArgs),
    /// Leave-one-out cross-validation and Monte-Carlo check of the predictive
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PriorArg {
    Perks,
    Jeffreys,
    Laplace,
    Haldane,
}

impl From<PriorArg> for PriorFamily {
    fn from(p: PriorArg) -> Self {
        match p {
            PriorArg::Perks => PriorFamily::Perks,
            PriorArg::Jeffreys => PriorFamily::Jeffreys,
            PriorArg::Laplace => PriorFamily::Laplace,
            PriorArg::Haldane => PriorFamily::Haldane,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassPriorArg {
    Empirical,
    Uniform,
    Explicit,
}

#[derive(Debug, Args)]
pub struct ClassPriorArgs {
    /// Where the class prior comes from [default: empirical when training]
    #[arg(long, value_enum)]
    pub class_prior: Option<ClassPriorArg>,
    /// Class prior values in class order, summing to 1 (implies --class-prior explicit)
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
    pub explicit_prior: Option<Vec<f64>>,
}

impl ClassPriorArgs {
    /// `None` when neither flag was given.
    pub fn source(&self) -> Result<Option<ClassPriorSource>> {
        match (self.class_prior, &self.explicit_prior) {
            (None, None) => Ok(None),
            (Some(ClassPriorArg::Explicit) | None, Some(values)) => {
                check_explicit(values)?;
                Ok(Some(ClassPriorSource::Explicit(values.clone())))
            }
            (Some(ClassPriorArg::Explicit), None) => {
                bail!("--class-prior explicit needs --explicit-prior v1,..,vI")
            }
            (Some(_), Some(_)) => {
                bail!("--explicit-prior only applies with --class-prior explicit")
            }
            (Some(ClassPriorArg::Empirical), None) => Ok(Some(ClassPriorSource::Empirical)),
            (Some(ClassPriorArg::Uniform), None) => Ok(Some(ClassPriorSource::Uniform)),
        }
    }
}

fn check_explicit(values: &[f64]) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        bail!("--explicit-prior values must be finite and non-negative, got {v}");
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > EXPLICIT_PRIOR_TOLERANCE {
        bail!("--explicit-prior values must sum to 1 (within {EXPLICIT_PRIOR_TOLERANCE:e}), got {sum}");
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training CSV: site_id,class,t1..tJ
    pub training: PathBuf,
    /// Where to write the model file
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = PriorArg::Perks)]
    pub prior: PriorArg,
    #[command(flatten)]
    pub class_prior: ClassPriorArgs,
    /// Roster CSV (site_id,class) used instead of the training sites for the empirical class prior
    #[arg(long)]
    pub roster: Option<PathBuf>,
    /// Print posterior means with full precision
    #[arg(long)]
    pub full_precision: bool,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Model file written by `train`
    pub model: PathBuf,
    /// Query CSV: site_id,t1..tJ
    pub queries: PathBuf,
    /// Override the model's class prior (uniform or explicit)
    #[command(flatten)]
    pub class_prior: ClassPriorArgs,
    /// Print probabilities with full precision instead of 4 decimals
    #[arg(long)]
    pub full_precision: bool,
    /// Write the table here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Model file written by `train`
    pub model: PathBuf,
    /// Output directory for posterior_means.svg and marginals.svg
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Training CSV: site_id,class,t1..tJ
    pub training: PathBuf,
    #[arg(long, value_enum, default_value_t = PriorArg::Perks)]
    pub prior: PriorArg,
    #[command(flatten)]
    pub class_prior: ClassPriorArgs,
    /// Roster CSV (site_id,class) for the empirical class prior
    #[arg(long)]
    pub roster: Option<PathBuf>,
    /// Query CSV for the Monte-Carlo check; random queries are drawn when absent
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Number of random queries when --queries is absent
    #[arg(long, default_value_t = 10)]
    pub oracle_queries: usize,
    /// Largest total count of a random query
    #[arg(long, default_value_t = 6)]
    pub oracle_max_total: u64,
    /// Monte-Carlo samples per (query, class) pair
    #[arg(long, default_value_t = 100_000)]
    pub oracle_samples: usize,
    #[arg(long, env = "DIRIMULT_SEED", default_value_t = 1)]
    pub seed: u64,
    /// Directory for loo.csv, oracle.csv and report.txt
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(class_prior: Option<ClassPriorArg>, explicit: Option<Vec<f64>>) -> ClassPriorArgs {
        ClassPriorArgs {
            class_prior,
            explicit_prior: explicit,
        }
    }

    #[test]
    fn class_prior_resolution() {
        assert_eq!(args(None, None).source().unwrap(), None);
        assert_eq!(
            args(Some(ClassPriorArg::Uniform), None).source().unwrap(),
            Some(ClassPriorSource::Uniform)
        );
        let v = vec![0.15, 0.20, 0.35, 0.15, 0.15];
        assert_eq!(
            args(None, Some(v.clone())).source().unwrap(),
            Some(ClassPriorSource::Explicit(v.clone()))
        );
        assert!(args(Some(ClassPriorArg::Explicit), None).source().is_err());
        assert!(args(Some(ClassPriorArg::Uniform), Some(v))
            .source()
            .is_err());
        assert!(args(None, Some(vec![0.5, 0.4])).source().is_err());
        assert!(args(None, Some(vec![1.5, -0.5])).source().is_err());
        assert!(args(None, Some(vec![0.5, 0.5 + 5e-10])).source().is_ok());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
