//! Regularization paths with warm starts, prediction and held-out error.

use crate::array::{h_map, CoefficientBlocks, DenseArray, TensorDesign};
use crate::error::{GlamError, Result};
use crate::family::{mean, FamilySpec, ObservationData};
use crate::outer::{outer_solve, OuterConfig, OuterTrace};
use crate::penalty::{lambda_max, PenaltySpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathConfig {
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    pub outer: OuterConfig,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self { n_lambda: 100, lambda_min_ratio: 1e-4, outer: OuterConfig::default() }
    }
}

/// Fitted models along a decreasing `λ` sequence.
#[derive(Debug, Clone)]
pub struct FitPath {
    pub lambdas: Vec<f64>,
    pub fits: Vec<CoefficientBlocks>,
    pub objectives: Vec<f64>,
    pub diagnostics: Vec<OuterTrace>,
    /// Set when a model failed to converge; `lambdas` then holds only the
    /// completed prefix.
    pub truncated: bool,
}

impl FitPath {
    pub fn len(&self) -> usize {
        self.fits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fits.is_empty()
    }

    pub fn nonzero_counts(&self) -> Vec<usize> {
        self.fits.iter().map(CoefficientBlocks::count_nonzero).collect()
    }
}

/// `n_lambda` log-uniform values from `λ_max` down to `λ_max · ratio`.
pub fn lambda_sequence(lambda_max: f64, config: &PathConfig) -> Result<Vec<f64>> {
    if !(lambda_max > 0.0) || !lambda_max.is_finite() {
        return Err(GlamError::InvalidInput(format!("lambda_max must be positive, got {lambda_max}")));
    }
    if config.n_lambda == 0 || !(config.lambda_min_ratio > 0.0 && config.lambda_min_ratio < 1.0) {
        return Err(GlamError::InvalidInput("need n_lambda >= 1 and lambda_min_ratio in (0, 1)".into()));
    }
    if config.n_lambda == 1 {
        return Ok(vec![lambda_max]);
    }
    let log_step = config.lambda_min_ratio.ln() / (config.n_lambda - 1) as f64;
    Ok((0..config.n_lambda).map(|t| lambda_max * (log_step * t as f64).exp()).collect())
}

/// Fits the whole path, computing `λ_max` from the score at zero.
pub fn fit_path(
    design: &TensorDesign,
    spec: &FamilySpec,
    data: &ObservationData,
    penalty: &PenaltySpec,
    config: &PathConfig,
) -> Result<FitPath> {
    let lmax = lambda_max(design, spec, data, penalty)?;
    if lmax == 0.0 {
        // θ = 0 is optimal for every λ ≥ 0 the ℓ1 term can act on.
        let zero = CoefficientBlocks::zeros(design);
        return fit_path_with_lambdas(design, spec, data, penalty, &config.outer, &[0.0], &zero);
    }
    let lambdas = lambda_sequence(lmax, config)?;
    fit_path_with_lambdas(design, spec, data, penalty, &config.outer, &lambdas, &CoefficientBlocks::zeros(design))
}

/// Fits an explicit decreasing `λ` list, warm-starting each model at the
/// previous solution.
pub fn fit_path_with_lambdas(
    design: &TensorDesign,
    spec: &FamilySpec,
    data: &ObservationData,
    penalty: &PenaltySpec,
    outer: &OuterConfig,
    lambdas: &[f64],
    init: &CoefficientBlocks,
) -> Result<FitPath> {
    if lambdas.is_empty() {
        return Err(GlamError::InvalidInput("empty lambda sequence".into()));
    }
    if lambdas.windows(2).any(|w| !(w[1] < w[0])) || lambdas.iter().any(|&l| !(l >= 0.0)) {
        return Err(GlamError::InvalidInput("lambdas must be nonnegative and strictly decreasing".into()));
    }
    let mut path = FitPath {
        lambdas: Vec::with_capacity(lambdas.len()),
        fits: Vec::with_capacity(lambdas.len()),
        objectives: Vec::with_capacity(lambdas.len()),
        diagnostics: Vec::with_capacity(lambdas.len()),
        truncated: false,
    };
    let mut warm = init.clone();
    for (t, &lambda) in lambdas.iter().enumerate() {
        let fit = outer_solve(design, spec, data, lambda, penalty, outer, &warm)?;
        if !fit.trace.converged() {
            if t == 0 {
                return Err(GlamError::InvalidInput(format!(
                    "first model (lambda = {lambda}) did not converge: {:?}",
                    fit.trace.status
                )));
            }
            path.truncated = true;
            break;
        }
        path.lambdas.push(lambda);
        path.objectives.push(fit.trace.final_objective());
        path.diagnostics.push(fit.trace);
        warm = fit.coef.clone();
        path.fits.push(fit.coef);
    }
    Ok(path)
}

/// Linear predictor and fitted mean on the full grid.
pub fn predict(
    design: &TensorDesign,
    spec: &FamilySpec,
    coef: &CoefficientBlocks,
) -> Result<(DenseArray, DenseArray)> {
    let eta = h_map(design, coef)?;
    let mu = mean(spec, &eta);
    Ok((eta, mu))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeldoutMse {
    /// `Σ_{x∈D} (Ŷ_x - Y_x)²` per model.
    pub mse: Vec<f64>,
    /// 0-based index of the smallest error.
    pub best: usize,
}

/// Squared prediction error over the cells where `mask` is one.
pub fn mse_heldout(
    path: &FitPath,
    design: &TensorDesign,
    spec: &FamilySpec,
    y_full: &DenseArray,
    heldout_mask: &DenseArray,
) -> Result<HeldoutMse> {
    y_full.check_same_dims(heldout_mask)?;
    if y_full.dims() != design.row_dims() {
        return Err(GlamError::Dimension("truth array does not match the design".into()));
    }
    if heldout_mask.values().iter().any(|&m| m != 0.0 && m != 1.0) {
        return Err(GlamError::InvalidInput("held-out mask must contain only 0 and 1".into()));
    }
    if !heldout_mask.values().contains(&1.0) {
        return Err(GlamError::EmptyMask);
    }
    if path.is_empty() {
        return Err(GlamError::InvalidInput("path has no fitted models".into()));
    }
    let mse = path
        .fits
        .iter()
        .map(|coef| {
            let (_, mu) = predict(design, spec, coef)?;
            Ok(mu
                .values()
                .iter()
                .zip(y_full.values())
                .zip(heldout_mask.values())
                .filter(|(_, &m)| m == 1.0)
                .map(|((&f, &y), _)| (f - y) * (f - y))
                .sum())
        })
        .collect::<Result<Vec<f64>>>()?;
    let best = mse
        .iter()
        .enumerate()
        .fold(0, |best, (t, &v)| if v < mse[best] { t } else { best });
    Ok(HeldoutMse { mse, best })
}
