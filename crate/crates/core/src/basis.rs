//! Tensor-product B-spline marginals and scatter-to-grid binning.

use crate::array::{ArrayDims, DenseArray, MarginalMatrix};
use crate::error::{GlamError, Result};
use ndarray::Array2;

/// Strictly increasing evaluation points of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalGrid {
    points: Vec<f64>,
}

impl MarginalGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(GlamError::InvalidInput("a marginal grid needs at least two points".into()));
        }
        if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(GlamError::InvalidInput("grid points must be finite and strictly increasing".into()));
        }
        Ok(Self { points })
    }

    /// `n` equispaced points covering `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(hi > lo) {
            return Err(GlamError::InvalidInput("uniform grid needs n >= 2 and hi > lo".into()));
        }
        let h = (hi - lo) / (n - 1) as f64;
        Self::new((0..n).map(|k| if k == n - 1 { hi } else { lo + h * k as f64 }).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lower(&self) -> f64 {
        self.points[0]
    }

    pub fn upper(&self) -> f64 {
        self.points[self.points.len() - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisSpec {
    pub order: usize,
    pub n_basis: usize,
}

impl BasisSpec {
    pub fn cubic(n_basis: usize) -> Self {
        Self { order: 4, n_basis }
    }

    fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(GlamError::InvalidInput("spline order must be >= 1".into()));
        }
        if self.n_basis < self.order {
            return Err(GlamError::InvalidInput(format!(
                "number of basis functions ({}) is below the order ({})",
                self.n_basis, self.order
            )));
        }
        Ok(())
    }
}

/// Clamped knot vector of length `p + order`: `order` copies of each end
/// and `p - order` uniform interior knots.
pub fn clamped_uniform_knots(lo: f64, hi: f64, spec: &BasisSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let spans = spec.n_basis - spec.order + 1;
    let h = (hi - lo) / spans as f64;
    let mut knots = Vec::with_capacity(spec.n_basis + spec.order);
    knots.extend(std::iter::repeat_n(lo, spec.order));
    knots.extend((1..spans).map(|i| lo + h * i as f64));
    knots.extend(std::iter::repeat_n(hi, spec.order));
    Ok(knots)
}

/// Index `μ` with `t_μ ≤ x < t_{μ+1}`, clamped into `[order-1, p-1]` so the
/// right endpoint belongs to the last span.
fn find_span(knots: &[f64], order: usize, n_basis: usize, x: f64) -> usize {
    let (lo, hi) = (order - 1, n_basis - 1);
    if x >= knots[hi + 1] {
        return hi;
    }
    if x <= knots[lo] {
        return lo;
    }
    // knots[lo..=hi+1] is nondecreasing; first index with knot > x, minus one
    lo + knots[lo..=hi + 1].partition_point(|&t| t <= x) - 1
}

/// Nonzero basis values `B_{μ-order+1}, …, B_μ` at `x`, by the two-term
/// recursion arranged in a single triangular sweep.
fn nonzero_basis(knots: &[f64], order: usize, span: usize, x: f64, out: &mut [f64]) {
    let deg = order - 1;
    let mut left = vec![0.0; order];
    let mut right = vec![0.0; order];
    out[0] = 1.0;
    for j in 1..=deg {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom > 0.0 { out[r] / denom } else { 0.0 };
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
}

/// `Φ_{k,m} = B_m(x_k)`, an `n × p` marginal design.
pub fn bspline_design(grid: &MarginalGrid, spec: &BasisSpec) -> Result<MarginalMatrix> {
    spec.validate()?;
    let knots = clamped_uniform_knots(grid.lower(), grid.upper(), spec)?;
    let mut phi = Array2::<f64>::zeros((grid.len(), spec.n_basis));
    let mut vals = vec![0.0; spec.order];
    for (k, &x) in grid.points().iter().enumerate() {
        let span = find_span(&knots, spec.order, spec.n_basis, x);
        nonzero_basis(&knots, spec.order, span, x, &mut vals);
        for (r, &v) in vals.iter().enumerate() {
            phi[[k, span + 1 - spec.order + r]] = v;
        }
    }
    MarginalMatrix::new(phi)
}

/// `max(⌈n / ratio⌉, 5)`.
pub fn default_basis_count(n: usize, ratio: usize) -> Result<usize> {
    if n == 0 || ratio == 0 {
        return Err(GlamError::InvalidInput("basis count needs n >= 1 and ratio >= 1".into()));
    }
    Ok(n.div_ceil(ratio).max(5))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinnedCounts {
    pub counts: DenseArray,
    pub dropped: usize,
}

/// Counts points in equal-width bins per dimension. Bins are right-open
/// except the last, which also takes the upper bound; points outside the
/// bounds are dropped.
pub fn bin_scatter(points: &[Vec<f64>], bounds: &[(f64, f64)], bins: &[usize]) -> Result<BinnedCounts> {
    if bounds.len() != bins.len() || bins.is_empty() {
        return Err(GlamError::Dimension("bounds and bins must have the same nonzero length".into()));
    }
    if bounds.iter().any(|&(lo, hi)| !(hi > lo) || !lo.is_finite() || !hi.is_finite()) {
        return Err(GlamError::InvalidInput("each bound must satisfy lo < hi".into()));
    }
    let dims = ArrayDims::new(bins.to_vec())?;
    let mut counts = DenseArray::zeros(dims);
    let mut dropped = 0;
    'points: for p in points {
        if p.len() != bins.len() {
            return Err(GlamError::Dimension(format!(
                "point has {} coordinates, expected {}",
                p.len(),
                bins.len()
            )));
        }
        let mut offset = 0;
        let mut stride = 1;
        for ((&x, &(lo, hi)), &b) in p.iter().zip(bounds).zip(bins) {
            if !(x >= lo && x <= hi) {
                dropped += 1;
                continue 'points;
            }
            let idx = (((x - lo) / (hi - lo)) * b as f64).floor() as usize;
            offset += idx.min(b - 1) * stride;
            stride *= b;
        }
        counts.values_mut()[offset] += 1.0;
    }
    Ok(BinnedCounts { counts, dropped })
}
