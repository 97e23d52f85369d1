//! Convex penalties `J`, their proximal operators and `λ_max`.

use crate::array::{g_map, CoefficientBlocks, DenseArray, TensorDesign};
use crate::error::{GlamError, Result};
use crate::family::{score, FamilySpec, ObservationData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PenaltyKind {
    Lasso,
    Ridge,
    ElasticNet,
}

/// `lasso`: `‖θ‖₁`; `ridge`: `‖θ‖₂²`; `elastic_net`: `‖θ‖₁ + α‖θ‖₂²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySpec {
    kind: PenaltyKind,
    alpha: f64,
}

impl PenaltySpec {
    pub fn lasso() -> Self {
        Self { kind: PenaltyKind::Lasso, alpha: 0.0 }
    }

    pub fn ridge() -> Self {
        Self { kind: PenaltyKind::Ridge, alpha: 0.0 }
    }

    pub fn elastic_net(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(GlamError::InvalidInput(format!("elastic-net alpha must be >= 0, got {alpha}")));
        }
        Ok(Self { kind: PenaltyKind::ElasticNet, alpha })
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn has_l1(&self) -> bool {
        self.kind != PenaltyKind::Ridge
    }

    pub fn value(&self, theta: impl IntoIterator<Item = f64>) -> f64 {
        let (l1, l2) = theta.into_iter().fold((0.0, 0.0), |(l1, l2), t| (l1 + t.abs(), l2 + t * t));
        match self.kind {
            PenaltyKind::Lasso => l1,
            PenaltyKind::Ridge => l2,
            PenaltyKind::ElasticNet => l1 + self.alpha * l2,
        }
    }

    /// `prox_γ` applied to one coordinate.
    #[inline]
    pub fn prox_scalar(&self, gamma: f64, z: f64) -> f64 {
        match self.kind {
            PenaltyKind::Lasso => soft_threshold(z, gamma),
            PenaltyKind::Ridge => z / (1.0 + 2.0 * gamma),
            PenaltyKind::ElasticNet => soft_threshold(z, gamma) / (1.0 + 2.0 * self.alpha * gamma),
        }
    }

    pub fn prox_in_place(&self, gamma: f64, z: &mut [f64]) {
        for v in z {
            *v = self.prox_scalar(gamma, *v);
        }
    }

    pub fn prox_blocks(&self, gamma: f64, z: &CoefficientBlocks) -> CoefficientBlocks {
        z.map(|v| self.prox_scalar(gamma, v))
    }
}

#[inline]
fn soft_threshold(z: f64, gamma: f64) -> f64 {
    let m = z.abs() - gamma;
    if m > 0.0 {
        m.copysign(z)
    } else {
        0.0
    }
}

pub fn penalty_value(spec: &PenaltySpec, theta: &[f64]) -> f64 {
    spec.value(theta.iter().copied())
}

/// `argmin_x ½‖x - z‖² + γJ(x)`.
pub fn prox(spec: &PenaltySpec, gamma: f64, z: &[f64]) -> Result<Vec<f64>> {
    if !(gamma > 0.0) {
        return Err(GlamError::InvalidInput(format!("prox parameter must be positive, got {gamma}")));
    }
    let mut out = z.to_vec();
    spec.prox_in_place(gamma, &mut out);
    Ok(out)
}

/// Smallest `λ` for which `θ = 0` minimizes `-l/n + λJ`:
/// `‖(1/n) Xᵀ u(0)‖_∞`. Only the ℓ1 part matters since the quadratic part
/// has zero gradient at the origin.
pub fn lambda_max(
    design: &TensorDesign,
    spec: &FamilySpec,
    data: &ObservationData,
    penalty: &PenaltySpec,
) -> Result<f64> {
    if !penalty.has_l1() {
        return Err(GlamError::Unsupported("ridge penalty has no finite lambda_max".into()));
    }
    let eta0 = DenseArray::zeros(design.row_dims().clone());
    let u0 = score(spec, data, &eta0)?;
    let grad = g_map(design, &u0)?;
    let n = design.n_obs() as f64;
    Ok(grad.iter_values().fold(0.0_f64, |m, v| m.max(v.abs())) / n)
}
