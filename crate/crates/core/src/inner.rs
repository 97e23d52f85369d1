//! Inner solver: accelerated proximal gradient for the weighted penalized
//! least-squares problem
//!
//! ```text
//! G(θ) = (1/2n) ‖√W (Xθ - z)‖² + λ J(θ)
//! ```
//!
//! The design enters only through the H/G maps, or through the small Gram
//! factors when the weights are a tensor product.

use ndarray::{Array1, ArrayView2};

use crate::array::{
    dot, g_map, h_map, xtwx_apply, xtwx_apply_tensor, CoefficientBlocks, DenseArray, TensorDesign,
    TensorGram, TensorWeights,
};
use crate::error::{GlamError, Result};
use crate::penalty::PenaltySpec;

const POWER_MAX_ITERS: usize = 10_000;
const POWER_TOL: f64 = 1e-14;
const MAX_BACKTRACKS_PER_STEP: usize = 200;
const DIVERGENCE_STREAK: usize = 3;

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration on the Rayleigh quotient.
pub fn spectral_radius_psd(a: ArrayView2<'_, f64>) -> Result<f64> {
    let p = a.nrows();
    if p != a.ncols() {
        return Err(GlamError::Dimension(format!("spectral radius of a {}x{} matrix", p, a.ncols())));
    }
    if p == 1 {
        return Ok(a[[0, 0]].abs());
    }
    // A start vector with no special alignment to coordinate axes.
    let mut v = Array1::from_iter((0..p).map(|i| 1.0 + 0.1 * ((i + 1) as f64).sin()));
    v /= v.dot(&v).sqrt();
    let mut mu = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = a.dot(&v);
        let mu_new = v.dot(&w);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        v = w / norm;
        if (mu_new - mu).abs() <= POWER_TOL * mu_new.abs() {
            return Ok(mu_new);
        }
        mu = mu_new;
    }
    Err(GlamError::PowerIteration { iterations: POWER_MAX_ITERS })
}

/// `L̂ = (max_i w_i / n) Σ_r Π_j ϱ(X_{r,j}ᵀ X_{r,j})`, an upper bound on the
/// Lipschitz constant `‖XᵀWX‖₂ / n` of `∇h`.
pub fn lipschitz_upper(design: &TensorDesign, weights: &DenseArray) -> Result<f64> {
    if weights.dims() != design.row_dims() {
        return Err(GlamError::Dimension("weights do not match the design rows".into()));
    }
    let max_w = weights.values().iter().fold(0.0_f64, |m, &w| m.max(w));
    if weights.values().iter().any(|&w| !(w >= 0.0)) || max_w == 0.0 {
        return Err(GlamError::InvalidInput("weights must be nonnegative and not all zero".into()));
    }
    let mut sum = 0.0;
    for comp in design.components() {
        let mut prod = 1.0;
        for x in comp {
            let gram = x.view().t().dot(&x.view());
            prod *= spectral_radius_psd(gram.view())?;
        }
        sum += prod;
    }
    Ok(max_w * sum / design.n_obs() as f64)
}

/// Exact Lipschitz constant `(1/n) Π_j ϱ(X_{1,j}ᵀ W_j X_{1,j})` for a single
/// component and tensor product weights.
pub fn lipschitz_tensor_exact(design: &TensorDesign, weights: &TensorWeights) -> Result<f64> {
    if design.n_components() != 1 {
        return Err(GlamError::Unsupported(format!(
            "exact tensor Lipschitz constant needs one component, design has {}",
            design.n_components()
        )));
    }
    if weights.factors().len() != design.ndim() {
        return Err(GlamError::Dimension("weight factors do not match the design".into()));
    }
    let mut prod = 1.0;
    for (x, w) in design.components()[0].iter().zip(weights.factors()) {
        prod *= spectral_radius_psd(x.weighted_cross(w, x)?.view())?;
    }
    Ok(prod / design.n_obs() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extrapolation {
    /// `ω_l = (l - 1)/(l + 2)`.
    Fista,
    /// `ω_l = 0`: plain proximal gradient.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerConfig {
    /// Stepsize policy: `1` uses `1/L̂` without backtracking, `0` starts at
    /// `1` and backtracks every iteration, anything in between starts at
    /// `1/(ν L̂)` and backtracks only on divergence.
    pub nu: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub extrapolation: Extrapolation,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self { nu: 1.0, max_iters: 2000, tol: 1e-8, extrapolation: Extrapolation::Fista }
    }
}

impl InnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.nu) {
            return Err(GlamError::InvalidInput(format!("nu must be in [0, 1], got {}", self.nu)));
        }
        if self.max_iters == 0 || !(self.tol > 0.0) {
            return Err(GlamError::InvalidInput("inner max_iters and tol must be positive".into()));
        }
        Ok(())
    }
}

/// One weighted penalized least-squares subproblem.
#[derive(Debug, Clone)]
pub struct InnerProblem<'a> {
    design: &'a TensorDesign,
    weights: DenseArray,
    working: DenseArray,
    lambda: f64,
    penalty: PenaltySpec,
    tensor_weights: Option<TensorWeights>,
    lipschitz: f64,
    // X'Wz, z'Wz and the Gram factors, fixed for the whole solve.
    xtwz: CoefficientBlocks,
    zwz: f64,
    gram: Option<TensorGram>,
}

impl<'a> InnerProblem<'a> {
    /// Subproblem with full diagonal weights `V`; the stepsize bound is
    /// [`lipschitz_upper`].
    pub fn new(
        design: &'a TensorDesign,
        weights: DenseArray,
        working: DenseArray,
        lambda: f64,
        penalty: PenaltySpec,
    ) -> Result<Self> {
        let lipschitz = lipschitz_upper(design, &weights)?;
        Self::build(design, weights, working, lambda, penalty, None, lipschitz)
    }

    /// Subproblem with tensor product weights. The stepsize bound is exact
    /// for one component and [`lipschitz_upper`] on the expanded weights
    /// otherwise.
    pub fn with_tensor_weights(
        design: &'a TensorDesign,
        tensor_weights: TensorWeights,
        working: DenseArray,
        lambda: f64,
        penalty: PenaltySpec,
    ) -> Result<Self> {
        let weights = tensor_weights.expand()?;
        let lipschitz = if design.n_components() == 1 {
            lipschitz_tensor_exact(design, &tensor_weights)?
        } else {
            lipschitz_upper(design, &weights)?
        };
        Self::build(design, weights, working, lambda, penalty, Some(tensor_weights), lipschitz)
    }

    fn build(
        design: &'a TensorDesign,
        weights: DenseArray,
        working: DenseArray,
        lambda: f64,
        penalty: PenaltySpec,
        tensor_weights: Option<TensorWeights>,
        lipschitz: f64,
    ) -> Result<Self> {
        if weights.dims() != design.row_dims() || working.dims() != design.row_dims() {
            return Err(GlamError::Dimension("weights/working response do not match the design".into()));
        }
        if weights.values().iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(GlamError::InvalidInput("inner weights must be finite and nonnegative".into()));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(GlamError::InvalidInput(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        let vz = weights.hadamard(&working)?;
        let xtwz = g_map(design, &vz)?;
        let zwz = dot(vz.values(), working.values());
        let gram = match &tensor_weights {
            Some(t) => Some(TensorGram::new(design, t)?),
            None => None,
        };
        Ok(Self { design, weights, working, lambda, penalty, tensor_weights, lipschitz, xtwz, zwz, gram })
    }

    /// Replace the stepsize bound.
    pub fn with_lipschitz(mut self, lipschitz: f64) -> Self {
        self.lipschitz = lipschitz;
        self
    }

    pub fn design(&self) -> &TensorDesign {
        self.design
    }

    pub fn weights(&self) -> &DenseArray {
        &self.weights
    }

    pub fn working(&self) -> &DenseArray {
        &self.working
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn penalty(&self) -> &PenaltySpec {
        &self.penalty
    }

    pub fn tensor_weights(&self) -> Option<&TensorWeights> {
        self.tensor_weights.as_ref()
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `Xᵀ W z`, computed once per subproblem.
    pub fn xtwz(&self) -> &CoefficientBlocks {
        &self.xtwz
    }

    fn n(&self) -> f64 {
        self.design.n_obs() as f64
    }

    /// `h(θ)` from the linear predictor `Xθ`.
    pub fn smooth_loss_from_eta(&self, eta: &DenseArray) -> f64 {
        let s: f64 = self
            .weights
            .values()
            .iter()
            .zip(eta.values())
            .zip(self.working.values())
            .map(|((&v, &e), &z)| v * (e - z) * (e - z))
            .sum();
        s / (2.0 * self.n())
    }

    /// `h(θ)` from `XᵀWXθ`: `(θᵀXᵀWXθ - 2θᵀXᵀWz + zᵀWz) / 2n`.
    fn smooth_loss_from_quadratic(&self, coef: &CoefficientBlocks, q: &CoefficientBlocks) -> Result<f64> {
        let quad = coef.dot(q)?;
        let lin = coef.dot(&self.xtwz)?;
        Ok(((quad - 2.0 * lin + self.zwz) / (2.0 * self.n())).max(0.0))
    }

    /// `G(θ) = h(θ) + λJ(θ)`.
    pub fn objective(&self, coef: &CoefficientBlocks) -> Result<f64> {
        let eta = h_map(self.design, coef)?;
        Ok(self.smooth_loss_from_eta(&eta) + self.lambda * self.penalty.value(coef.iter_values()))
    }

    /// `XᵀWXθ`, through the Gram factors when the weights are a tensor product.
    pub fn curvature_apply(&self, coef: &CoefficientBlocks) -> Result<CoefficientBlocks> {
        match &self.gram {
            Some(gram) => xtwx_apply_tensor(self.design, gram, coef),
            None => xtwx_apply(self.design, &self.weights, coef),
        }
    }

    /// Linear image used to recover gradients and objectives without extra
    /// passes: `Xθ` for full weights, `XᵀWXθ` for tensor weights.
    fn image(&self, coef: &CoefficientBlocks) -> Result<Image> {
        match &self.gram {
            Some(gram) => Ok(Image::Curvature(xtwx_apply_tensor(self.design, gram, coef)?)),
            None => Ok(Image::Predictor(h_map(self.design, coef)?)),
        }
    }

    fn grad_from_image(&self, image: &Image) -> Result<CoefficientBlocks> {
        let inv_n = 1.0 / self.n();
        let q = match image {
            Image::Predictor(eta) => g_map(self.design, &self.weights.hadamard(eta)?)?,
            Image::Curvature(q) => q.clone(),
        };
        q.lincomb(inv_n, &self.xtwz, -inv_n)
    }

    fn smooth_loss_from_image(&self, coef: &CoefficientBlocks, image: &Image) -> Result<f64> {
        match image {
            Image::Predictor(eta) => Ok(self.smooth_loss_from_eta(eta)),
            Image::Curvature(q) => self.smooth_loss_from_quadratic(coef, q),
        }
    }
}

#[derive(Debug, Clone)]
enum Image {
    Predictor(DenseArray),
    Curvature(CoefficientBlocks),
}

impl Image {
    fn extrapolate(&self, prev: &Image, omega: f64) -> Result<Image> {
        match (self, prev) {
            (Image::Predictor(a), Image::Predictor(b)) => {
                Ok(Image::Predictor(a.zip_map(b, |x, y| x + omega * (x - y))?))
            }
            (Image::Curvature(a), Image::Curvature(b)) => {
                Ok(Image::Curvature(a.zip_with(b, |x, y| x + omega * (x - y))?))
            }
            _ => unreachable!("images of one problem share a kind"),
        }
    }
}

/// `∇h(θ) = (1/n)(XᵀWXθ - XᵀWz)` with `XᵀWz` supplied by the caller.
pub fn grad_h(
    problem: &InnerProblem<'_>,
    coef: &CoefficientBlocks,
    precomputed_xtwz: &CoefficientBlocks,
) -> Result<CoefficientBlocks> {
    let inv_n = 1.0 / problem.n();
    problem.curvature_apply(coef)?.lincomb(inv_n, precomputed_xtwz, -inv_n)
}

#[derive(Debug, Clone)]
pub struct InnerResult {
    pub coef: CoefficientBlocks,
    /// `G(coef)`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Stepsize halvings, including divergence restarts.
    pub backtracks: usize,
    /// Final stepsize `δ`.
    pub step: f64,
    /// `G` after each proximal step.
    pub history: Vec<f64>,
}

struct Iterate {
    coef: CoefficientBlocks,
    image: Image,
    objective: f64,
}

/// Accelerated proximal gradient from `init`:
///
/// ```text
/// y       = x_l + ω_l (x_l - x_{l-1})
/// x_{l+1} = prox_{δλ}(y - δ ∇h(y))
/// ```
pub fn fista_solve(
    problem: &InnerProblem<'_>,
    config: &InnerConfig,
    init: &CoefficientBlocks,
) -> Result<InnerResult> {
    config.validate()?;
    init.check_matches(problem.design)?;
    let lambda = problem.lambda;
    let penalty = problem.penalty;
    let g_of = |coef: &CoefficientBlocks, image: &Image| -> Result<f64> {
        Ok(problem.smooth_loss_from_image(coef, image)? + lambda * penalty.value(coef.iter_values()))
    };

    let image0 = problem.image(init)?;
    let g0 = g_of(init, &image0)?;
    if !g0.is_finite() {
        return Err(GlamError::Divergence { iteration: 0 });
    }
    let mut current = Iterate { coef: init.clone(), image: image0, objective: g0 };
    let mut previous = Iterate { coef: init.clone(), image: current.image.clone(), objective: g0 };
    let mut best_coef = init.clone();
    let mut best_objective = g0;

    let lipschitz = problem.lipschitz;
    let adaptive = config.nu > 0.0 && config.nu < 1.0;
    let backtrack_every_step = config.nu == 0.0;
    let mut delta = if backtrack_every_step { 1.0 } else { 1.0 / (config.nu * lipschitz) };

    let mut history = Vec::new();
    let mut backtracks = 0;
    let mut converged = false;
    let mut l = 1usize;
    let mut increase_streak = 0usize;
    let mut iterations = 0usize;

    while iterations < config.max_iters {
        iterations += 1;
        let omega = match config.extrapolation {
            Extrapolation::Fista => (l as f64 - 1.0) / (l as f64 + 2.0),
            Extrapolation::None => 0.0,
        };
        let (y, y_image) = if omega == 0.0 {
            (current.coef.clone(), current.image.clone())
        } else {
            (
                current.coef.lincomb(1.0 + omega, &previous.coef, -omega)?,
                current.image.extrapolate(&previous.image, omega)?,
            )
        };
        let grad = problem.grad_from_image(&y_image)?;
        let h_y = if backtrack_every_step { problem.smooth_loss_from_image(&y, &y_image)? } else { 0.0 };

        let mut step_backtracks = 0;
        let (x_new, x_image, h_new) = loop {
            let mut x = y.lincomb(1.0, &grad, -delta)?;
            for block in x.blocks_mut() {
                penalty.prox_in_place(delta * lambda, block.values_mut());
            }
            let image = problem.image(&x)?;
            let h = problem.smooth_loss_from_image(&x, &image)?;
            if backtrack_every_step {
                let diff = x.lincomb(1.0, &y, -1.0)?;
                let model = h_y + grad.dot(&diff)? + diff.norm_sq() / (2.0 * delta);
                let slack = 1e-13 * h_y.abs().max(1.0);
                if !(h <= model + slack) {
                    step_backtracks += 1;
                    if step_backtracks > MAX_BACKTRACKS_PER_STEP {
                        return Err(GlamError::Divergence { iteration: iterations });
                    }
                    delta *= 0.5;
                    continue;
                }
            }
            break (x, image, h);
        };
        backtracks += step_backtracks;

        let g_new = h_new + lambda * penalty.value(x_new.iter_values());
        if !g_new.is_finite() {
            if adaptive {
                restart(problem, &mut current, &mut previous, &best_coef, best_objective)?;
                delta *= 0.5;
                backtracks += 1;
                l = 1;
                increase_streak = 0;
                continue;
            }
            return Err(GlamError::Divergence { iteration: iterations });
        }
        history.push(g_new);

        if adaptive {
            increase_streak = if g_new > current.objective { increase_streak + 1 } else { 0 };
            if increase_streak >= DIVERGENCE_STREAK {
                restart(problem, &mut current, &mut previous, &best_coef, best_objective)?;
                delta *= 0.5;
                backtracks += 1;
                l = 1;
                increase_streak = 0;
                continue;
            }
        }

        let rel = (g_new - current.objective).abs() / g_new.abs().max(1.0);
        if g_new < best_objective {
            best_objective = g_new;
            best_coef = x_new.clone();
        }
        previous = std::mem::replace(&mut current, Iterate { coef: x_new, image: x_image, objective: g_new });
        l += 1;
        if rel < config.tol {
            converged = true;
            break;
        }
    }

    Ok(InnerResult {
        coef: best_coef,
        objective: best_objective,
        iterations,
        converged,
        backtracks,
        step: delta,
        history,
    })
}

fn restart(
    problem: &InnerProblem<'_>,
    current: &mut Iterate,
    previous: &mut Iterate,
    best_coef: &CoefficientBlocks,
    best_objective: f64,
) -> Result<()> {
    let image = problem.image(best_coef)?;
    *current = Iterate { coef: best_coef.clone(), image: image.clone(), objective: best_objective };
    *previous = Iterate { coef: best_coef.clone(), image, objective: best_objective };
    Ok(())
}
