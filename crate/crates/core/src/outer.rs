//! Outer descent loop: GLM weights and working response, an inner
//! proximal-gradient solve for the search direction, and an Armijo line
//! search on the penalized objective.
//!
//! The objective is scaled per observation, `F(θ) = -l(Xθ)/n + λJ(θ)`, so
//! that it matches the `1/2n` scaling of the inner least-squares problem.

use crate::array::{dot, h_map, CoefficientBlocks, DenseArray, TensorDesign, TensorWeights};
use crate::error::{GlamError, Result};
use crate::family::{
    glm_weights, loglik, score, working_response, working_response_from_score, Family, FamilySpec,
    ObservationData,
};
use crate::inner::{fista_solve, InnerConfig, InnerProblem};
use crate::penalty::PenaltySpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightMode {
    /// GLM weights `ϑ'(η)(g⁻¹)'(η)`.
    Exact,
    /// All weights one.
    Unit,
    /// Geometric-mean tensor product approximation of the GLM weights.
    TensorApprox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterConfig {
    pub max_outer: usize,
    pub armijo_alpha0: f64,
    pub armijo_b: f64,
    pub armijo_v: f64,
    pub armijo_max_steps: usize,
    pub weight_mode: WeightMode,
    pub outer_tol: f64,
    pub inner: InnerConfig,
}

impl Default for OuterConfig {
    fn default() -> Self {
        Self {
            max_outer: 200,
            armijo_alpha0: 1.0,
            armijo_b: 0.5,
            armijo_v: 0.1,
            armijo_max_steps: 50,
            weight_mode: WeightMode::Exact,
            outer_tol: 1e-8,
            inner: InnerConfig::default(),
        }
    }
}

impl OuterConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(GlamError::InvalidInput(what.to_string()));
        if self.max_outer == 0 {
            return bad("max_outer must be positive");
        }
        if !(self.armijo_alpha0 > 0.0) {
            return bad("armijo alpha0 must be positive");
        }
        if !(self.armijo_b > 0.0 && self.armijo_b < 1.0) || !(self.armijo_v > 0.0 && self.armijo_v < 1.0) {
            return bad("armijo b and v must lie in (0, 1)");
        }
        if !(self.outer_tol > 0.0) {
            return bad("outer tolerance must be positive");
        }
        self.inner.validate()
    }
}

/// Weights for one outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    Full(DenseArray),
    Tensor(TensorWeights),
}

impl Weights {
    pub fn to_array(&self) -> Result<DenseArray> {
        match self {
            Weights::Full(v) => Ok(v.clone()),
            Weights::Tensor(t) => t.expand(),
        }
    }
}

pub fn compute_weights(mode: WeightMode, spec: &FamilySpec, eta: &DenseArray) -> Result<Weights> {
    match mode {
        WeightMode::Exact => Ok(Weights::Full(glm_weights(spec, eta))),
        WeightMode::Unit => Ok(Weights::Full(DenseArray::filled(eta.dims().clone(), 1.0))),
        WeightMode::TensorApprox => Ok(Weights::Tensor(tensor_approx_weights(&glm_weights(spec, eta))?)),
    }
}

/// Rank-one approximation of a positive weight array by slice geometric
/// means: `v̂_{j,i} = exp(mean over the slice i_j = i of log V - log V̄)`,
/// with `V̄` the overall geometric mean. The first factor is multiplied by
/// `V̄` so a rank-one `V` is reproduced exactly.
///
/// For `d ≥ 2` the raw product can leave `[min V, max V]`. The log
/// deviations from `log V̄` are then scaled by the largest `t ∈ [0, 1]` that
/// keeps every entry inside; `t = 1` whenever the raw product already fits.
pub fn tensor_approx_weights(v: &DenseArray) -> Result<TensorWeights> {
    if let Some(cell) = v.values().iter().position(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(GlamError::InvalidInput(format!(
            "tensor approximation needs positive finite weights (cell {})",
            cell + 1
        )));
    }
    let dims = v.dims().as_slice();
    let n = v.len();
    let logs: Vec<f64> = v.values().iter().map(|w| w.ln()).collect();
    let log_mean = logs.iter().sum::<f64>() / n as f64;
    let (log_lo, log_hi) = logs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));

    let mut sums: Vec<Vec<f64>> = dims.iter().map(|&nj| vec![0.0; nj]).collect();
    let mut index = vec![0usize; dims.len()];
    for &lv in &logs {
        for (j, &i) in index.iter().enumerate() {
            sums[j][i] += lv;
        }
        // advance the column-major counter
        for (j, i) in index.iter_mut().enumerate() {
            *i += 1;
            if *i < dims[j] {
                break;
            }
            *i = 0;
        }
    }
    let log_factors: Vec<Vec<f64>> = sums
        .into_iter()
        .enumerate()
        .map(|(j, s)| {
            let m_j = (n / dims[j]) as f64;
            let shift = if j == 0 { 0.0 } else { log_mean };
            s.into_iter().map(|sum| sum / m_j - shift).collect()
        })
        .collect();

    // extremes of a sum of per-dimension terms are sums of extremes
    let (raw_lo, raw_hi) = log_factors.iter().fold((0.0, 0.0), |(lo, hi), f| {
        let (a, b) = f.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        (lo + a, hi + b)
    });
    let mut t: f64 = 1.0;
    if raw_hi > log_hi {
        t = t.min((log_hi - log_mean) / (raw_hi - log_mean));
    }
    if raw_lo < log_lo {
        t = t.min((log_mean - log_lo) / (log_mean - raw_lo));
    }
    let t = t.clamp(0.0, 1.0);

    let factors = log_factors
        .into_iter()
        .enumerate()
        .map(|(j, f)| {
            if t == 1.0 {
                return f.into_iter().map(f64::exp).collect();
            }
            let base = if j == 0 { (1.0 - t) * log_mean } else { 0.0 };
            f.into_iter().map(|l| (t * l + base).exp()).collect()
        })
        .collect();
    TensorWeights::new(factors)
}

/// Evaluates `F(θ) = -l(η)/n + λJ(θ)` from a predictor and coefficients.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveEval<'a> {
    pub spec: &'a FamilySpec,
    pub data: &'a ObservationData,
    pub lambda: f64,
    pub penalty: &'a PenaltySpec,
    pub n: f64,
}

impl ObjectiveEval<'_> {
    pub fn eval(&self, eta: &DenseArray, coef: &CoefficientBlocks) -> Result<f64> {
        Ok(-loglik(self.spec, self.data, eta)? / self.n + self.lambda * self.penalty.value(coef.iter_values()))
    }
}

/// `F(θ)` for the coefficients on a design.
pub fn objective(
    design: &TensorDesign,
    spec: &FamilySpec,
    data: &ObservationData,
    lambda: f64,
    penalty: &PenaltySpec,
    coef: &CoefficientBlocks,
) -> Result<f64> {
    let eta = h_map(design, coef)?;
    ObjectiveEval { spec, data, lambda, penalty, n: design.n_obs() as f64 }.eval(&eta, coef)
}

/// Current point and the candidate from the inner solve, with their
/// predictors.
#[derive(Debug, Clone, Copy)]
pub struct LinePoints<'a> {
    pub theta: &'a CoefficientBlocks,
    pub eta: &'a DenseArray,
    pub objective: f64,
    pub theta_tilde: &'a CoefficientBlocks,
    pub eta_tilde: &'a DenseArray,
}

#[derive(Debug, Clone)]
pub struct ArmijoStep {
    pub alpha: f64,
    /// Number of reductions `j`.
    pub reductions: usize,
    pub theta: CoefficientBlocks,
    pub eta: DenseArray,
    pub objective: f64,
    /// `Δ_k`.
    pub decrease_bound: f64,
}

/// `Δ_k = -(1/n) uᵀX d + λ(J(θ̃) - J(θ))`, with `Xd` taken as the difference
/// of the two predictors.
pub fn armijo_decrease_bound(eval: &ObjectiveEval<'_>, points: &LinePoints<'_>, score: &DenseArray) -> Result<f64> {
    let ud = dot(score.values(), points.eta_tilde.values()) - dot(score.values(), points.eta.values());
    let dj = eval.penalty.value(points.theta_tilde.iter_values()) - eval.penalty.value(points.theta.iter_values());
    Ok(-ud / eval.n + eval.lambda * dj)
}

/// First `α = b^j α_0` with `F(θ + αd) ≤ F(θ) + αvΔ_k`. Trial predictors are
/// convex combinations of the two given predictors.
pub fn armijo_search(
    eval: &ObjectiveEval<'_>,
    points: &LinePoints<'_>,
    score: &DenseArray,
    config: &OuterConfig,
) -> Result<ArmijoStep> {
    let delta_k = armijo_decrease_bound(eval, points, score)?;
    let mut alpha = config.armijo_alpha0;
    for j in 0..=config.armijo_max_steps {
        let theta = points.theta.lincomb(1.0 - alpha, points.theta_tilde, alpha)?;
        let eta = points.eta.zip_map(points.eta_tilde, |a, b| a + alpha * (b - a))?;
        // a non-finite trial is treated as a failed decrease
        if let Ok(f) = eval.eval(&eta, &theta) {
            if f <= points.objective + alpha * config.armijo_v * delta_k {
                return Ok(ArmijoStep { alpha, reductions: j, theta, eta, objective: f, decrease_bound: delta_k });
            }
        }
        alpha *= config.armijo_b;
    }
    Err(GlamError::LineSearch { steps: config.armijo_max_steps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterStatus {
    Converged,
    MaxIterations,
    LineSearchFailed,
    InnerDiverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterIteration {
    /// `F(θ^{(k+1)})`.
    pub objective: f64,
    pub alpha: f64,
    pub decrease_bound: f64,
    pub inner_iterations: usize,
    pub inner_converged: bool,
    pub lipschitz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterTrace {
    /// `F(θ^{(0)})`.
    pub initial_objective: f64,
    pub iterations: Vec<OuterIteration>,
    pub weight_evaluations: usize,
    pub status: OuterStatus,
}

impl OuterTrace {
    /// `F(θ^{(0)}), F(θ^{(1)}), …`.
    pub fn objectives(&self) -> Vec<f64> {
        std::iter::once(self.initial_objective).chain(self.iterations.iter().map(|it| it.objective)).collect()
    }

    pub fn final_objective(&self) -> f64 {
        self.iterations.last().map_or(self.initial_objective, |it| it.objective)
    }

    pub fn inner_iterations(&self) -> usize {
        self.iterations.iter().map(|it| it.inner_iterations).sum()
    }

    pub fn converged(&self) -> bool {
        self.status == OuterStatus::Converged
    }

    /// Whether `F` never increased between recorded iterates.
    pub fn is_monotone(&self) -> bool {
        self.objectives().windows(2).all(|w| w[1] <= w[0])
    }
}

#[derive(Debug, Clone)]
pub struct OuterFit {
    pub coef: CoefficientBlocks,
    pub eta: DenseArray,
    pub trace: OuterTrace,
}

/// Gaussian/identity with unit prior weights and unit GLM weights: the
/// inner problem is the objective itself, up to a constant.
fn quadratic_model_is_exact(spec: &FamilySpec, data: &ObservationData) -> bool {
    spec.family() == Family::Gaussian && data.prior_weights().values().iter().all(|&a| a == 1.0)
}

/// Runs the outer loop at one `λ` from `init`.
pub fn outer_solve(
    design: &TensorDesign,
    spec: &FamilySpec,
    data: &ObservationData,
    lambda: f64,
    penalty: &PenaltySpec,
    config: &OuterConfig,
    init: &CoefficientBlocks,
) -> Result<OuterFit> {
    config.validate()?;
    init.check_matches(design)?;
    if data.response().dims() != design.row_dims() {
        return Err(GlamError::Dimension(format!(
            "response dims {:?}, design rows {:?}",
            data.response().dims().as_slice(),
            design.row_dims().as_slice()
        )));
    }
    if init.iter_values().any(|v| !v.is_finite()) {
        return Err(GlamError::InvalidInput("initial coefficients must be finite".into()));
    }
    data.validate_for(spec)?;

    let eval = ObjectiveEval { spec, data, lambda, penalty, n: design.n_obs() as f64 };
    let exact_model = quadratic_model_is_exact(spec, data);
    let mut theta = init.clone();
    let mut eta = h_map(design, &theta)?;
    let mut f = eval.eval(&eta, &theta)?;
    let mut trace = OuterTrace {
        initial_objective: f,
        iterations: Vec::new(),
        weight_evaluations: 0,
        status: OuterStatus::MaxIterations,
    };

    for _ in 0..config.max_outer {
        let u = score(spec, data, &eta)?;
        let weights = compute_weights(config.weight_mode, spec, &eta)?;
        trace.weight_evaluations += 1;
        let problem = match weights {
            Weights::Full(v) => {
                let z = match config.weight_mode {
                    WeightMode::Exact => working_response(spec, data, &eta)?,
                    _ => working_response_from_score(&u, &v, &eta)?,
                };
                InnerProblem::new(design, v, z, lambda, *penalty)?
            }
            Weights::Tensor(t) => {
                let v = t.expand()?;
                let z = working_response_from_score(&u, &v, &eta)?;
                InnerProblem::with_tensor_weights(design, t, z, lambda, *penalty)?
            }
        };
        let inner = match fista_solve(&problem, &config.inner, &theta) {
            Ok(res) => res,
            Err(GlamError::Divergence { .. }) => {
                trace.status = OuterStatus::InnerDiverged;
                break;
            }
            Err(e) => return Err(e),
        };
        let eta_tilde = h_map(design, &inner.coef)?;
        let points =
            LinePoints { theta: &theta, eta: &eta, objective: f, theta_tilde: &inner.coef, eta_tilde: &eta_tilde };

        let step = match armijo_search(&eval, &points, &u, config) {
            Ok(step) => step,
            Err(GlamError::LineSearch { .. }) => {
                let delta_k = armijo_decrease_bound(&eval, &points, &u)?;
                // No representable decrease left: numerically stationary.
                trace.status = if delta_k.abs() <= 1e-10 * f.abs().max(1.0) {
                    OuterStatus::Converged
                } else {
                    OuterStatus::LineSearchFailed
                };
                break;
            }
            Err(e) => return Err(e),
        };

        let rel = (f - step.objective).abs() / f.abs().max(1.0);
        trace.iterations.push(OuterIteration {
            objective: step.objective,
            alpha: step.alpha,
            decrease_bound: step.decrease_bound,
            inner_iterations: inner.iterations,
            inner_converged: inner.converged,
            lipschitz: problem.lipschitz(),
        });
        theta = step.theta;
        eta = step.eta;
        f = step.objective;

        if exact_model {
            trace.status = if inner.converged { OuterStatus::Converged } else { OuterStatus::MaxIterations };
            break;
        }
        if rel < config.outer_tol {
            trace.status = OuterStatus::Converged;
            break;
        }
    }

    Ok(OuterFit { coef: theta, eta, trace })
}
