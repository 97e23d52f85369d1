//! Dense reference implementations for verifying the matrix-free solver.
//!
//! Everything here materializes `X` explicitly and is meant for small
//! instances only.

use crate::array::{ArrayDims, CoefficientBlocks, DenseArray, TensorDesign};
use crate::error::{GlamError, Result};
use crate::family::{loglik, score, FamilySpec, ObservationData};
use crate::penalty::PenaltySpec;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Default limit on `n · p` for [`dense_materialize`].
pub const DEFAULT_MATERIALIZATION_CAP: usize = 10_000_000;

pub fn dense_materialize(design: &TensorDesign) -> Result<DMatrix<f64>> {
    dense_materialize_with_cap(design, DEFAULT_MATERIALIZATION_CAP)
}

/// `[X_1 | … | X_c]` with `X_r = X_{r,d} ⊗ … ⊗ X_{r,1}`, so column blocks
/// line up with the column-major `vec(Θ_r)`.
pub fn dense_materialize_with_cap(design: &TensorDesign, cap: usize) -> Result<DMatrix<f64>> {
    let n = design.n_obs();
    let p = design.n_params();
    let required = n.saturating_mul(p);
    if required > cap {
        return Err(GlamError::MaterializationCap { required, cap });
    }
    let mut out = DMatrix::<f64>::zeros(n, p);
    let mut col = 0;
    for factors in design.components() {
        let to_dense = |j: usize| {
            let a = factors[j].as_array();
            DMatrix::from_fn(a.nrows(), a.ncols(), |i, k| a[[i, k]])
        };
        let mut kron = to_dense(factors.len() - 1);
        for j in (0..factors.len() - 1).rev() {
            kron = kron.kronecker(&to_dense(j));
        }
        out.columns_mut(col, kron.ncols()).copy_from(&kron);
        col += kron.ncols();
    }
    Ok(out)
}

/// A penalized GLM with an explicit design matrix.
#[derive(Debug, Clone)]
pub struct DenseProblem {
    pub x: DMatrix<f64>,
    pub row_dims: ArrayDims,
    pub spec: FamilySpec,
    pub data: ObservationData,
    pub penalty: PenaltySpec,
    pub lambda: f64,
}

impl DenseProblem {
    pub fn new(
        design: &TensorDesign,
        spec: FamilySpec,
        data: ObservationData,
        penalty: PenaltySpec,
        lambda: f64,
    ) -> Result<Self> {
        Self::with_cap(design, spec, data, penalty, lambda, DEFAULT_MATERIALIZATION_CAP)
    }

    pub fn with_cap(
        design: &TensorDesign,
        spec: FamilySpec,
        data: ObservationData,
        penalty: PenaltySpec,
        lambda: f64,
        cap: usize,
    ) -> Result<Self> {
        if data.response().dims() != design.row_dims() {
            return Err(GlamError::Dimension("response does not match the design".into()));
        }
        if !(lambda >= 0.0) {
            return Err(GlamError::InvalidInput(format!("lambda must be >= 0, got {lambda}")));
        }
        data.validate_for(&spec)?;
        let x = dense_materialize_with_cap(design, cap)?;
        Ok(Self { x, row_dims: design.row_dims().clone(), spec, data, penalty, lambda })
    }

    pub fn n_obs(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.x.ncols()
    }

    fn eta(&self, theta: &DVector<f64>) -> Result<DenseArray> {
        let eta = &self.x * theta;
        DenseArray::new(self.row_dims.clone(), eta.as_slice().to_vec())
    }

    /// `-(1/n) Xᵀ u(Xθ)`.
    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let eta = self.eta(&self.check_theta(theta)?)?;
        let u = score(&self.spec, &self.data, &eta)?;
        let g = self.x.tr_mul(&DVector::from_column_slice(u.values())) / -(self.n_obs() as f64);
        Ok(g.as_slice().to_vec())
    }

    fn check_theta(&self, theta: &[f64]) -> Result<DVector<f64>> {
        if theta.len() != self.n_params() {
            return Err(GlamError::Dimension(format!(
                "theta has {} entries, expected {}",
                theta.len(),
                self.n_params()
            )));
        }
        Ok(DVector::from_column_slice(theta))
    }
}

/// `-l(Xθ)/n + λJ(θ)`.
pub fn dense_objective(problem: &DenseProblem, theta: &[f64]) -> Result<f64> {
    let eta = problem.eta(&problem.check_theta(theta)?)?;
    let ll = loglik(&problem.spec, &problem.data, &eta)?;
    Ok(-ll / problem.n_obs() as f64 + problem.lambda * problem.penalty.value(theta.iter().copied()))
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix.
pub fn dense_spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    if !a.is_square() {
        return Err(GlamError::Dimension("spectral radius needs a square matrix".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(GlamError::NonFiniteScalar("matrix entry"));
    }
    let eig = SymmetricEigen::new(a.clone());
    Ok(eig.eigenvalues.iter().fold(0.0_f64, |m, &v| m.max(v.abs())))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseSolveOptions {
    pub max_iters: usize,
    /// Stops once `max|θ⁺ - θ| ≤ step_tol · max(1, max|θ|)`; zero disables.
    pub step_tol: f64,
}

impl Default for DenseSolveOptions {
    fn default() -> Self {
        Self { max_iters: 100_000, step_tol: 1e-15 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseSolution {
    pub theta: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

pub fn dense_reference_solve(problem: &DenseProblem, iters: usize) -> Result<Vec<f64>> {
    let opts = DenseSolveOptions { max_iters: iters, ..DenseSolveOptions::default() };
    Ok(dense_reference_solve_from(problem, &vec![0.0; problem.n_params()], &opts)?.theta)
}

/// Plain proximal gradient on `F`. The step uses `1/L` with
/// `L = max_i(a_i w_i) ϱ(XᵀX) / n` at the current iterate, doubled until the
/// quadratic upper model holds at the trial point.
pub fn dense_reference_solve_from(
    problem: &DenseProblem,
    init: &[f64],
    opts: &DenseSolveOptions,
) -> Result<DenseSolution> {
    let n = problem.n_obs() as f64;
    let gram_radius = dense_spectral_radius(&problem.x.tr_mul(&problem.x))?;
    let mut theta = problem.check_theta(init)?.as_slice().to_vec();
    let mut f = dense_objective(problem, &theta)?;
    if !f.is_finite() {
        return Err(GlamError::NonFiniteScalar("dense objective"));
    }
    let smooth = |t: &[f64]| -> Result<f64> { Ok(dense_objective(problem, t)? - problem.lambda * problem.penalty.value(t.iter().copied())) };
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let eta = problem.eta(&DVector::from_column_slice(&theta))?;
        let max_w = eta
            .values()
            .iter()
            .zip(problem.data.prior_weights().values())
            .fold(0.0_f64, |m, (&e, &a)| m.max(a * problem.spec.weight_at(e)));
        let mut lip = (max_w * gram_radius / n).max(f64::MIN_POSITIVE);
        let grad = problem.gradient(&theta)?;
        let h0 = f - problem.lambda * problem.penalty.value(theta.iter().copied());
        let (next, f_next) = loop {
            let step = 1.0 / lip;
            let cand: Vec<f64> = theta
                .iter()
                .zip(&grad)
                .map(|(&t, &g)| problem.penalty.prox_scalar(problem.lambda * step, t - step * g))
                .collect();
            let diff: Vec<f64> = cand.iter().zip(&theta).map(|(a, b)| a - b).collect();
            let model = h0
                + diff.iter().zip(&grad).map(|(d, g)| d * g).sum::<f64>()
                + 0.5 * lip * diff.iter().map(|d| d * d).sum::<f64>();
            let h1 = smooth(&cand)?;
            if h1.is_finite() && h1 <= model + 1e-15 * model.abs().max(1.0) {
                let f1 = h1 + problem.lambda * problem.penalty.value(cand.iter().copied());
                break (cand, f1);
            }
            lip *= 2.0;
            if !lip.is_finite() {
                return Err(GlamError::NonFiniteScalar("dense step size"));
            }
        };
        let scale = theta.iter().fold(1.0_f64, |m, t| m.max(t.abs()));
        let change = next.iter().zip(&theta).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        theta = next;
        f = f_next;
        if change <= opts.step_tol * scale {
            break;
        }
    }
    Ok(DenseSolution { theta, objective: f, iterations })
}

/// `(F_a - F_b) / |F_b|`.
pub fn relative_deviation(f_a: f64, f_b: f64) -> Result<f64> {
    if f_b == 0.0 {
        return Err(GlamError::UndefinedRatio);
    }
    Ok((f_a - f_b) / f_b.abs())
}

/// Flattens blocks in the column order used by [`dense_materialize`].
pub fn flatten(coef: &CoefficientBlocks) -> Vec<f64> {
    coef.to_flat()
}
