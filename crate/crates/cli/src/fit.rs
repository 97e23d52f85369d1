//! `glam fit`: load inputs, run the path, write the fit directory.

use std::fs;
use std::path::{Path, PathBuf};

use glam_core::basis::{bspline_design, default_basis_count, BasisSpec, MarginalGrid};
use glam_core::family::{FamilySpec, ObservationData};
use glam_core::path::{fit_path, fit_path_with_lambdas, predict, FitPath, PathConfig};
use glam_core::{CoefficientBlocks, DenseArray, InnerConfig, MarginalMatrix, OuterConfig, PenaltySpec, TensorDesign};
use serde::{Deserialize, Serialize};

use crate::args::{usage, FitArgs};
use crate::arrayfile::{read_array, write_array};
use crate::error::{CliError, Result};
use crate::marginal::{read_marginal, write_marginal};

pub const MANIFEST: &str = "path.json";

/// Everything a path fit needs, resolved from the command line.
#[derive(Debug, Clone)]
pub struct FitProblem {
    pub design: TensorDesign,
    pub spec: FamilySpec,
    pub data: ObservationData,
    pub penalty: PenaltySpec,
    pub config: PathConfig,
    /// Explicit penalty levels; empty means a log-uniform sequence from `λ_max`.
    pub lambdas: Vec<f64>,
}

impl FitProblem {
    pub fn solve(&self) -> Result<FitPath> {
        let path = if self.lambdas.is_empty() {
            fit_path(&self.design, &self.spec, &self.data, &self.penalty, &self.config)?
        } else {
            let zero = CoefficientBlocks::zeros(&self.design);
            fit_path_with_lambdas(&self.design, &self.spec, &self.data, &self.penalty, &self.config.outer, &self.lambdas, &zero)?
        };
        Ok(path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub lambda: f64,
    pub objective: f64,
    pub nonzero: usize,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub converged: bool,
    /// One array file per design component.
    pub coefficients: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fitted: Option<String>,
}

/// `path.json`, the machine-readable summary of a fit directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathManifest {
    pub format: u32,
    pub family: String,
    pub penalty: String,
    pub alpha: f64,
    pub iwls: String,
    pub response_dims: Vec<usize>,
    /// Marginal CSV files, `design[r][j]` for component `r`, dimension `j`.
    pub design: Vec<Vec<String>>,
    pub truncated: bool,
    pub models: Vec<ModelRecord>,
}

impl PathManifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|source| CliError::Json { path, source })
    }

    pub fn load_design(&self, dir: &Path) -> Result<TensorDesign> {
        let components = self
            .design
            .iter()
            .map(|files| files.iter().map(|f| read_marginal(&dir.join(f))).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(TensorDesign::new(components)?)
    }

    pub fn load_coefficients(&self, dir: &Path, model: &ModelRecord) -> Result<CoefficientBlocks> {
        let blocks = model.coefficients.iter().map(|f| read_array(&dir.join(f))).collect::<Result<Vec<_>>>()?;
        Ok(CoefficientBlocks::new(blocks))
    }

    pub fn family_spec(&self) -> Result<FamilySpec> {
        Ok(FamilySpec::of(self.family.parse()?))
    }
}

fn bspline_marginals(dims: &[usize], ratio: usize) -> Result<Vec<MarginalMatrix>> {
    dims.iter()
        .map(|&n| {
            let p = default_basis_count(n, ratio)?;
            let grid = MarginalGrid::uniform(0.0, 1.0, n)?;
            Ok(bspline_design(&grid, &BasisSpec::cubic(p))?)
        })
        .collect()
}

pub fn load_problem(args: &FitArgs) -> Result<FitProblem> {
    let response = read_array(&args.response)?;
    let dims = response.dims().as_slice().to_vec();
    let design = if args.bspline {
        TensorDesign::single(bspline_marginals(&dims, args.basis_ratio)?)?
    } else {
        let d = dims.len();
        if args.design.is_empty() || !args.design.len().is_multiple_of(d) {
            return Err(usage(format!(
                "--design needs a multiple of {d} files (one per dimension per component), got {}",
                args.design.len()
            )));
        }
        let marginals = args.design.iter().map(|p| read_marginal(p)).collect::<Result<Vec<_>>>()?;
        TensorDesign::new(marginals.chunks(d).map(<[MarginalMatrix]>::to_vec).collect())?
    };
    let prior = match &args.weights {
        Some(p) => read_array(p)?,
        None => DenseArray::filled(response.dims().clone(), 1.0),
    };
    let data = ObservationData::new(response, prior)?;
    let spec = FamilySpec::of(args.family.into());
    let penalty = args.penalty.spec(args.alpha)?;
    let inner = InnerConfig { nu: args.nu, max_iters: args.inner_maxit, tol: args.tol, ..InnerConfig::default() };
    let outer =
        OuterConfig { max_outer: args.maxit, weight_mode: args.iwls.mode(), outer_tol: args.tol, inner, ..OuterConfig::default() };
    let config = PathConfig { n_lambda: args.nlambda, lambda_min_ratio: args.lambda_min_ratio, outer };
    Ok(FitProblem { design, spec, data, penalty, config, lambdas: args.lambda.clone() })
}

pub fn coefficient_file(t: usize, r: usize) -> String {
    format!("coef_{t:03}_{}.glam", r + 1)
}

pub fn fitted_file(t: usize) -> String {
    format!("mean_{t:03}.glam")
}

/// Writes design, coefficients and `path.json` into `out`.
pub fn write_fit(out: &Path, args: &FitArgs, problem: &FitProblem, path: &FitPath) -> Result<PathManifest> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut design_files = Vec::new();
    for (r, component) in problem.design.components().iter().enumerate() {
        let mut files = Vec::new();
        for (j, m) in component.iter().enumerate() {
            let name = format!("design_{}_{}.csv", r + 1, j + 1);
            write_marginal(&out.join(&name), m)?;
            files.push(name);
        }
        design_files.push(files);
    }
    let mut models = Vec::with_capacity(path.len());
    for t in 0..path.len() {
        let coef = &path.fits[t];
        let mut coefficients = Vec::new();
        for (r, block) in coef.blocks().iter().enumerate() {
            let name = coefficient_file(t, r);
            write_array(&out.join(&name), block)?;
            coefficients.push(name);
        }
        let fitted = if args.fitted {
            let name = fitted_file(t);
            let (_, mu) = predict(&problem.design, &problem.spec, coef)?;
            write_array(&out.join(&name), &mu)?;
            Some(name)
        } else {
            None
        };
        let trace = &path.diagnostics[t];
        models.push(ModelRecord {
            lambda: path.lambdas[t],
            objective: path.objectives[t],
            nonzero: coef.count_nonzero(),
            outer_iters: trace.iterations.len(),
            inner_iters: trace.inner_iterations(),
            converged: trace.converged(),
            coefficients,
            fitted,
        });
    }
    let manifest = PathManifest {
        format: 1,
        family: problem.spec.family().to_string(),
        penalty: args.penalty.name().to_string(),
        alpha: args.alpha,
        iwls: args.iwls.name().to_string(),
        response_dims: problem.design.row_dims().as_slice().to_vec(),
        design: design_files,
        truncated: path.truncated,
        models,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let target: PathBuf = out.join(MANIFEST);
    fs::write(&target, json + "\n").map_err(|e| CliError::io(&target, e))?;
    Ok(manifest)
}

/// Returns whether the path was truncated.
pub fn run(args: &FitArgs) -> Result<bool> {
    let problem = load_problem(args)?;
    let path = problem.solve()?;
    let manifest = write_fit(&args.out, args, &problem, &path)?;
    eprintln!(
        "fitted {} of {} models{}",
        manifest.models.len(),
        if problem.lambdas.is_empty() { problem.config.n_lambda } else { problem.lambdas.len() },
        if path.truncated { " (path truncated: a model did not converge)" } else { "" }
    );
    Ok(path.truncated)
}
