use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use glam_core::family::Family;
use glam_core::{PenaltySpec, WeightMode};

use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "glam", version, about = "Penalized regression for array data without forming the design matrix")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a regularization path.
    Fit(FitArgs),
    /// Fitted means from a fit directory, optionally scored on held-out cells.
    Predict(PredictArgs),
    /// Generate the three-dimensional simulation design and responses.
    Simulate(SimulateArgs),
    /// Time the matrix-free fit against a dense matrix-vector baseline.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    Binomial,
    Poisson,
    Gamma,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Gaussian => Family::Gaussian,
            FamilyArg::Binomial => Family::Binomial,
            FamilyArg::Poisson => Family::Poisson,
            FamilyArg::Gamma => Family::Gamma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PenaltyArg {
    Lasso,
    Ridge,
    Elasticnet,
}

impl PenaltyArg {
    pub fn spec(self, alpha: f64) -> Result<PenaltySpec> {
        match self {
            PenaltyArg::Lasso => Ok(PenaltySpec::lasso()),
            PenaltyArg::Ridge => Ok(PenaltySpec::ridge()),
            PenaltyArg::Elasticnet => Ok(PenaltySpec::elastic_net(alpha)?),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PenaltyArg::Lasso => "lasso",
            PenaltyArg::Ridge => "ridge",
            PenaltyArg::Elasticnet => "elasticnet",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IwlsArg {
    Exact,
    Unit,
    Tensor,
}

impl IwlsArg {
    pub fn mode(self) -> WeightMode {
        match self {
            IwlsArg::Exact => WeightMode::Exact,
            IwlsArg::Unit => WeightMode::Unit,
            IwlsArg::Tensor => WeightMode::TensorApprox,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            IwlsArg::Exact => "exact",
            IwlsArg::Unit => "unit",
            IwlsArg::Tensor => "tensor",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Response array (binomial: proportions).
    #[arg(long)]
    pub response: PathBuf,
    /// Marginal CSV matrices, component-major: all d dimensions of the first
    /// component, then the second, and so on.
    #[arg(long = "design", required_unless_present = "bspline")]
    pub design: Vec<PathBuf>,
    /// Cubic B-spline marginals on an equispaced grid over [0, 1].
    #[arg(long, conflicts_with = "design")]
    pub bspline: bool,
    /// Observations per basis function with --bspline.
    #[arg(long, default_value_t = 5, requires = "bspline")]
    pub basis_ratio: usize,
    #[arg(long, value_enum, default_value_t = FamilyArg::Gaussian)]
    pub family: FamilyArg,
    #[arg(long, value_enum, default_value_t = PenaltyArg::Lasso)]
    pub penalty: PenaltyArg,
    /// Weight of the squared 2-norm for the elastic net.
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 100)]
    pub nlambda: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lambda_min_ratio: f64,
    /// Explicit decreasing penalty levels; overrides --nlambda.
    #[arg(long, value_delimiter = ',')]
    pub lambda: Vec<f64>,
    /// Inner stepsize policy in [0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    #[arg(long, value_enum, default_value_t = IwlsArg::Exact)]
    pub iwls: IwlsArg,
    /// Prior weights array (binomial: trial counts; zero masks a cell).
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Relative objective change that stops the outer and inner loops.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Outer iterations per penalty level.
    #[arg(long, default_value_t = 200)]
    pub maxit: usize,
    /// Inner iterations per outer step.
    #[arg(long, default_value_t = 2000)]
    pub inner_maxit: usize,
    /// Also write the fitted mean array of every model.
    #[arg(long)]
    pub fitted: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// Directory written by `glam fit`.
    #[arg(long)]
    pub fit: PathBuf,
    /// Complete observed array to score against.
    #[arg(long, requires = "mask")]
    pub truth: Option<PathBuf>,
    /// 0/1 array, one on the held-out cells.
    #[arg(long, requires = "truth")]
    pub mask: Option<PathBuf>,
    /// Also write the linear predictor arrays.
    #[arg(long)]
    pub linear: bool,
    /// Output directory; defaults to the fit directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Size scalar: n = (60r, 20r, 10r).
    #[arg(long)]
    pub r: f64,
    /// Parameter-to-observation ratio per dimension.
    #[arg(long, default_value_t = 0.5)]
    pub q: f64,
    /// Off-diagonal covariance of the design rows.
    #[arg(long, default_value_t = 0.0)]
    pub kappa: f64,
    /// Diagonal covariance of the design rows.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Probability that a coefficient is active.
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = FamilyArg::Gaussian)]
    pub family: FamilyArg,
    /// Fraction of cells to hold out through zero weights.
    #[arg(long, default_value_t = 0.0)]
    pub holdout: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapeArg {
    /// n = (60r, 20r, 10r), p_j = max(3, q n_j).
    Simulation,
    /// n_j = p_j = size in all three dimensions.
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Full regularization path.
    Path,
    /// A single linear-predictor evaluation.
    Hmap,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = ShapeArg::Simulation)]
    pub shape: ShapeArg,
    /// Problem sizes: r for the simulation shape, n_j for the square shape.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub q: f64,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub nlambda: usize,
    /// What the matrix-free row times.
    #[arg(long, value_enum, default_value_t = MethodArg::Path)]
    pub method: MethodArg,
    /// Largest dense matrix, in entries, the baseline may build.
    #[arg(long, default_value_t = 100_000_000)]
    pub dense_cap: usize,
    /// Write the table here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub(crate) fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
