//! Exponential families with their links: log-likelihood kernel, score,
//! GLM weights and working responses.
//!
//! Binomial responses are success proportions with the trial counts carried
//! by the prior weights. The gamma family uses `ϑ = -1/μ`,
//! `b(ϑ) = -log(-ϑ)`, so under the log link `ϑ(η) = -e^{-η}` and the GLM
//! weight is identically one. The dispersion is fixed at one.

use std::fmt;
use std::str::FromStr;

use crate::array::DenseArray;
use crate::error::{GlamError, Result};

/// Linear predictors entering `exp` are clamped to `[-ETA_CLAMP, ETA_CLAMP]`.
pub const ETA_CLAMP: f64 = 30.0;
/// Lower bound applied to GLM weights and inverse-link derivatives.
pub const WEIGHT_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Gaussian,
    Binomial,
    Poisson,
    Gamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Link {
    Identity,
    Logit,
    Log,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Gaussian => "gaussian",
            Family::Binomial => "binomial",
            Family::Poisson => "poisson",
            Family::Gamma => "gamma",
        })
    }
}

impl FromStr for Family {
    type Err = GlamError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Family::Gaussian),
            "binomial" => Ok(Family::Binomial),
            "poisson" => Ok(Family::Poisson),
            "gamma" => Ok(Family::Gamma),
            other => Err(GlamError::Unsupported(format!("family '{other}'"))),
        }
    }
}

#[inline]
fn clamp_eta(eta: f64) -> f64 {
    eta.clamp(-ETA_CLAMP, ETA_CLAMP)
}

#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// A supported family/link pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilySpec {
    family: Family,
    link: Link,
    dispersion: f64,
}

impl FamilySpec {
    pub fn new(family: Family, link: Link) -> Result<Self> {
        let ok = matches!(
            (family, link),
            (Family::Gaussian, Link::Identity)
                | (Family::Binomial, Link::Logit)
                | (Family::Poisson, Link::Log)
                | (Family::Gamma, Link::Log)
        );
        if !ok {
            return Err(GlamError::Unsupported(format!("{family} family with {link:?} link")));
        }
        Ok(Self { family, link, dispersion: 1.0 })
    }

    /// The family with the only link supported for it.
    pub fn of(family: Family) -> Self {
        let link = match family {
            Family::Gaussian => Link::Identity,
            Family::Binomial => Link::Logit,
            Family::Poisson | Family::Gamma => Link::Log,
        };
        Self { family, link, dispersion: 1.0 }
    }

    pub fn gaussian() -> Self {
        Self::of(Family::Gaussian)
    }

    pub fn binomial() -> Self {
        Self::of(Family::Binomial)
    }

    pub fn poisson() -> Self {
        Self::of(Family::Poisson)
    }

    pub fn gamma() -> Self {
        Self::of(Family::Gamma)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn link(&self) -> Link {
        self.link
    }

    pub fn dispersion(&self) -> f64 {
        self.dispersion
    }

    pub fn is_canonical(&self) -> bool {
        self.family != Family::Gamma
    }

    /// Inverse link `g⁻¹(η)`.
    pub fn mean_at(&self, eta: f64) -> f64 {
        match self.link {
            Link::Identity => eta,
            Link::Logit => 1.0 / (1.0 + (-clamp_eta(eta)).exp()),
            Link::Log => clamp_eta(eta).exp(),
        }
    }

    /// `(g⁻¹)'(η)`.
    pub fn mean_derivative_at(&self, eta: f64) -> f64 {
        match self.link {
            Link::Identity => 1.0,
            Link::Logit => {
                let mu = self.mean_at(eta);
                mu * (1.0 - mu)
            }
            Link::Log => clamp_eta(eta).exp(),
        }
    }

    /// Canonical parameter `ϑ(η)`.
    pub fn canonical_at(&self, eta: f64) -> f64 {
        match self.family {
            Family::Gamma => -(-clamp_eta(eta)).exp(),
            _ => eta,
        }
    }

    /// `ϑ'(η)`.
    pub fn canonical_derivative_at(&self, eta: f64) -> f64 {
        match self.family {
            Family::Gamma => (-clamp_eta(eta)).exp(),
            _ => 1.0,
        }
    }

    /// Log-normalizer evaluated along the predictor, `b(ϑ(η))`.
    pub fn log_normalizer_at(&self, eta: f64) -> f64 {
        match self.family {
            Family::Gaussian => 0.5 * eta * eta,
            Family::Binomial => softplus(eta),
            Family::Poisson => clamp_eta(eta).exp(),
            // b(ϑ) = -log(-ϑ) with ϑ = -e^{-η}
            Family::Gamma => clamp_eta(eta),
        }
    }

    /// Log-normalizer as a function of the canonical parameter, `b(ϑ)`.
    pub fn log_normalizer(&self, theta: f64) -> f64 {
        match self.family {
            Family::Gaussian => 0.5 * theta * theta,
            Family::Binomial => softplus(theta),
            Family::Poisson => theta.exp(),
            Family::Gamma => -(-theta).ln(),
        }
    }

    /// GLM weight `ϑ'(η)(g⁻¹)'(η)`, floored at [`WEIGHT_FLOOR`].
    pub fn weight_at(&self, eta: f64) -> f64 {
        let w = match self.family {
            Family::Gaussian | Family::Gamma => 1.0,
            _ => self.canonical_derivative_at(eta) * self.mean_derivative_at(eta),
        };
        w.max(WEIGHT_FLOOR)
    }

    /// Range `[floor, max]` every GLM weight of this family lies in.
    pub fn weight_bounds(&self) -> (f64, f64) {
        match self.family {
            Family::Gaussian | Family::Gamma => (1.0, 1.0),
            Family::Binomial => (WEIGHT_FLOOR, 0.25),
            Family::Poisson => (WEIGHT_FLOOR, ETA_CLAMP.exp()),
        }
    }

    /// Whether `y` is in the support of the family (checked where `a > 0`).
    pub fn supports_response(&self, y: f64) -> bool {
        y.is_finite()
            && match self.family {
                Family::Gaussian => true,
                Family::Binomial => (0.0..=1.0).contains(&y),
                Family::Poisson => y >= 0.0,
                Family::Gamma => y > 0.0,
            }
    }
}

/// Responses and prior weights on the observation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationData {
    response: DenseArray,
    prior_weights: DenseArray,
}

impl ObservationData {
    pub fn new(response: DenseArray, prior_weights: DenseArray) -> Result<Self> {
        response.check_same_dims(&prior_weights)?;
        if let Some(cell) = prior_weights.values().iter().position(|&a| !(a >= 0.0) || !a.is_finite()) {
            return Err(GlamError::InvalidInput(format!(
                "prior weight at cell {} is not a finite nonnegative number",
                cell + 1
            )));
        }
        Ok(Self { response, prior_weights })
    }

    pub fn unweighted(response: DenseArray) -> Self {
        let prior_weights = DenseArray::filled(response.dims().clone(), 1.0);
        Self { response, prior_weights }
    }

    pub fn response(&self) -> &DenseArray {
        &self.response
    }

    pub fn prior_weights(&self) -> &DenseArray {
        &self.prior_weights
    }

    /// Checks the responses lie in the family's support wherever `a > 0`.
    pub fn validate_for(&self, spec: &FamilySpec) -> Result<()> {
        let bad = self
            .response
            .values()
            .iter()
            .zip(self.prior_weights.values())
            .position(|(&y, &a)| a > 0.0 && !spec.supports_response(y));
        match bad {
            Some(cell) => Err(GlamError::InvalidInput(format!(
                "response {} at cell {} is outside the {} support",
                self.response.values()[cell],
                cell + 1,
                spec.family()
            ))),
            None => Ok(()),
        }
    }

    fn check_eta(&self, eta: &DenseArray) -> Result<()> {
        self.response.check_same_dims(eta)
    }
}

/// Entrywise inverse link.
pub fn mean(spec: &FamilySpec, eta: &DenseArray) -> DenseArray {
    eta.map(|e| spec.mean_at(e))
}

/// `Σ a_i (y_i ϑ(η_i) - b(ϑ(η_i)))`; cells with `a_i = 0` are skipped.
pub fn loglik(spec: &FamilySpec, data: &ObservationData, eta: &DenseArray) -> Result<f64> {
    data.check_eta(eta)?;
    let mut total = 0.0;
    for (cell, ((&y, &a), &e)) in data
        .response
        .values()
        .iter()
        .zip(data.prior_weights.values())
        .zip(eta.values())
        .enumerate()
    {
        if a == 0.0 {
            continue;
        }
        let term = a * (y * spec.canonical_at(e) - spec.log_normalizer_at(e));
        if !term.is_finite() {
            return Err(GlamError::NonFinite { what: "log-likelihood", cell: cell + 1 });
        }
        total += term;
    }
    Ok(total)
}

/// Score `u_i = a_i ϑ'(η_i)(y_i - g⁻¹(η_i))`.
pub fn score(spec: &FamilySpec, data: &ObservationData, eta: &DenseArray) -> Result<DenseArray> {
    data.check_eta(eta)?;
    let mut out = Vec::with_capacity(eta.len());
    for (cell, ((&y, &a), &e)) in data
        .response
        .values()
        .iter()
        .zip(data.prior_weights.values())
        .zip(eta.values())
        .enumerate()
    {
        let u = if a == 0.0 { 0.0 } else { a * spec.canonical_derivative_at(e) * (y - spec.mean_at(e)) };
        if !u.is_finite() {
            return Err(GlamError::NonFinite { what: "score", cell: cell + 1 });
        }
        out.push(u);
    }
    DenseArray::new(eta.dims().clone(), out)
}

/// GLM weights `ϑ'(η)(g⁻¹)'(η)`, floored.
pub fn glm_weights(spec: &FamilySpec, eta: &DenseArray) -> DenseArray {
    eta.map(|e| spec.weight_at(e))
}

/// Working response for the GLM weights, computed without the score:
/// `z_i = a_i(y_i - g⁻¹(η_i)) g'(g⁻¹(η_i)) + η_i`.
pub fn working_response(spec: &FamilySpec, data: &ObservationData, eta: &DenseArray) -> Result<DenseArray> {
    data.check_eta(eta)?;
    let mut out = Vec::with_capacity(eta.len());
    for (cell, ((&y, &a), &e)) in data
        .response
        .values()
        .iter()
        .zip(data.prior_weights.values())
        .zip(eta.values())
        .enumerate()
    {
        let z = if a == 0.0 {
            e
        } else {
            let mu = spec.mean_at(e);
            // g'(μ) = 1 / (g⁻¹)'(η); for the gamma/log pair the weight is one
            // and the same identity holds through ϑ'.
            let link_slope = match spec.family() {
                Family::Gamma => spec.canonical_derivative_at(e),
                _ => 1.0 / spec.weight_at(e),
            };
            a * (y - mu) * link_slope + e
        };
        if !z.is_finite() {
            return Err(GlamError::NonFinite { what: "working response", cell: cell + 1 });
        }
        out.push(z);
    }
    DenseArray::new(eta.dims().clone(), out)
}

/// Generic working response `z = W⁻¹u + η` for arbitrary positive weights.
pub fn working_response_from_score(
    score: &DenseArray,
    weights: &DenseArray,
    eta: &DenseArray,
) -> Result<DenseArray> {
    score.check_same_dims(weights)?;
    score.check_same_dims(eta)?;
    let values = score
        .values()
        .iter()
        .zip(weights.values())
        .zip(eta.values())
        .map(|((&u, &w), &e)| u / w.max(WEIGHT_FLOOR) + e)
        .collect();
    DenseArray::new(eta.dims().clone(), values)
}
