//! Column-major arrays, tensor designs and the matrix-free H/G maps.
//!
//! Arrays are stored flat with the first index varying fastest, so the
//! position of entry `(i_1, …, i_d)` is `i_1 + n_1((i_2 - 1) + n_2(…))`
//! (1-based). The rotated contraction [`rho`] consumes the first dimension
//! and appends the contracted one last; applying it once per dimension
//! therefore returns the original dimension order and no permutation of the
//! buffer is ever needed.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2};

use crate::error::{GlamError, Result};

/// Shape `(n_1, …, n_d)` of a d-dimensional array. Always non-empty with
/// positive extents.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ArrayDims(Vec<usize>);

impl ArrayDims {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(GlamError::Dimension("an array needs at least one dimension".into()));
        }
        if dims.contains(&0) {
            return Err(GlamError::Dimension(format!("zero extent in dims {dims:?}")));
        }
        dims.iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| GlamError::Dimension(format!("total size of {dims:?} overflows")))?;
        Ok(Self(dims))
    }

    pub fn ndim(&self) -> usize {
        self.0.len()
    }

    /// Total number of cells `n = Π n_j`.
    pub fn size(&self) -> usize {
        self.0.iter().product()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Dimensions after one application of [`rho`] with an `r`-row matrix.
    fn rotated(&self, r: usize) -> Self {
        let mut out: Vec<usize> = self.0[1..].to_vec();
        out.push(r);
        Self(out)
    }
}

impl std::ops::Index<usize> for ArrayDims {
    type Output = usize;
    fn index(&self, j: usize) -> &usize {
        &self.0[j]
    }
}

/// Column-major position of a 1-based multi-index, itself 1-based.
pub fn linear_index(multi_index: &[usize], dims: &ArrayDims) -> Result<usize> {
    let out_of_range = || GlamError::IndexOutOfRange {
        index: multi_index.to_vec(),
        dims: dims.as_slice().to_vec(),
    };
    if multi_index.len() != dims.ndim() {
        return Err(out_of_range());
    }
    let mut pos = 0usize;
    for (&i, &n) in multi_index.iter().zip(dims.as_slice()).rev() {
        if i == 0 || i > n {
            return Err(out_of_range());
        }
        pos = pos * n + (i - 1);
    }
    Ok(pos + 1)
}

/// Inverse of [`linear_index`]: 1-based position to 1-based multi-index.
pub fn multi_index(position: usize, dims: &ArrayDims) -> Result<Vec<usize>> {
    if position == 0 || position > dims.size() {
        return Err(GlamError::IndexOutOfRange {
            index: vec![position],
            dims: dims.as_slice().to_vec(),
        });
    }
    let mut rest = position - 1;
    Ok(dims
        .as_slice()
        .iter()
        .map(|&n| {
            let i = rest % n;
            rest /= n;
            i + 1
        })
        .collect())
}

/// A d-dimensional array of reals in column-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseArray {
    dims: ArrayDims,
    values: Vec<f64>,
}

impl DenseArray {
    pub fn new(dims: ArrayDims, values: Vec<f64>) -> Result<Self> {
        if values.len() != dims.size() {
            return Err(GlamError::Dimension(format!(
                "{} values for dims {:?} (expected {})",
                values.len(),
                dims.as_slice(),
                dims.size()
            )));
        }
        Ok(Self { dims, values })
    }

    pub fn from_shape(dims: &[usize], values: Vec<f64>) -> Result<Self> {
        Self::new(ArrayDims::new(dims.to_vec())?, values)
    }

    pub fn filled(dims: ArrayDims, value: f64) -> Self {
        let values = vec![value; dims.size()];
        Self { dims, values }
    }

    pub fn zeros(dims: ArrayDims) -> Self {
        Self::filled(dims, 0.0)
    }

    pub fn dims(&self) -> &ArrayDims {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The flat buffer, i.e. `vec(A)`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Entry at a 1-based multi-index.
    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.values[linear_index(index, &self.dims)? - 1])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dims: self.dims.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Entrywise combination of two arrays of identical shape.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_dims(other)?;
        Ok(Self {
            dims: self.dims.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Hadamard product.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_same_dims(other)?;
        Ok(dot(&self.values, &other.values))
    }

    pub fn check_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(GlamError::Dimension(format!(
                "{:?} vs {:?}",
                self.dims.as_slice(),
                other.dims.as_slice()
            )));
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// An `n_j × p_{r,j}` marginal design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalMatrix(Array2<f64>);

impl MarginalMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(GlamError::Dimension(format!(
                "marginal matrix must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        Ok(Self(values))
    }

    /// Build from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        let arr = Array2::from_shape_vec((rows, cols), values)
            .map_err(|e| GlamError::Dimension(e.to_string()))?;
        Self::new(arr)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(GlamError::Dimension("ragged rows".into()));
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(Array2::eye(n))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    /// Gram matrix `Xᵀ diag(w) Y` for two matrices sharing their row count.
    pub fn weighted_cross(&self, weights: &[f64], other: &MarginalMatrix) -> Result<Array2<f64>> {
        if self.rows() != other.rows() || weights.len() != self.rows() {
            return Err(GlamError::Dimension(format!(
                "weighted cross product of {}x{} and {}x{} with {} weights",
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols(),
                weights.len()
            )));
        }
        let mut scaled = other.0.clone();
        for (mut row, &w) in scaled.rows_mut().into_iter().zip(weights) {
            row *= w;
        }
        Ok(self.0.t().dot(&scaled))
    }
}

/// `X = [X_1 | … | X_c]` with `X_r = X_{r,d} ⊗ … ⊗ X_{r,1}`, stored as its
/// marginal factors only.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorDesign {
    components: Vec<Vec<MarginalMatrix>>,
    row_dims: ArrayDims,
}

impl TensorDesign {
    /// `components[r][j]` is the factor for component `r` and dimension `j`.
    pub fn new(components: Vec<Vec<MarginalMatrix>>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| GlamError::Dimension("design needs at least one component".into()))?;
        let row_dims = ArrayDims::new(first.iter().map(MarginalMatrix::rows).collect())?;
        for (r, comp) in components.iter().enumerate() {
            if comp.len() != row_dims.ndim() {
                return Err(GlamError::Dimension(format!(
                    "component {} has {} factors, expected {}",
                    r + 1,
                    comp.len(),
                    row_dims.ndim()
                )));
            }
            for (j, factor) in comp.iter().enumerate() {
                if factor.rows() != row_dims[j] {
                    return Err(GlamError::Dimension(format!(
                        "factor ({}, {}) has {} rows, expected {}",
                        r + 1,
                        j + 1,
                        factor.rows(),
                        row_dims[j]
                    )));
                }
            }
        }
        Ok(Self { components, row_dims })
    }

    /// Single tensor component.
    pub fn single(factors: Vec<MarginalMatrix>) -> Result<Self> {
        Self::new(vec![factors])
    }

    pub fn components(&self) -> &[Vec<MarginalMatrix>] {
        &self.components
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn ndim(&self) -> usize {
        self.row_dims.ndim()
    }

    /// `(n_1, …, n_d)`.
    pub fn row_dims(&self) -> &ArrayDims {
        &self.row_dims
    }

    /// `(p_{r,1}, …, p_{r,d})` for component `r` (0-based).
    pub fn col_dims(&self, r: usize) -> ArrayDims {
        ArrayDims(self.components[r].iter().map(MarginalMatrix::cols).collect())
    }

    pub fn n_obs(&self) -> usize {
        self.row_dims.size()
    }

    /// `p = Σ_r p_r`.
    pub fn n_params(&self) -> usize {
        (0..self.n_components()).map(|r| self.col_dims(r).size()).sum()
    }
}

/// `⟨Θ_1, …, Θ_c⟩`; their vec-concatenation is `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientBlocks {
    blocks: Vec<DenseArray>,
}

impl CoefficientBlocks {
    pub fn new(blocks: Vec<DenseArray>) -> Self {
        Self { blocks }
    }

    pub fn zeros(design: &TensorDesign) -> Self {
        Self {
            blocks: (0..design.n_components())
                .map(|r| DenseArray::zeros(design.col_dims(r)))
                .collect(),
        }
    }

    /// Split a flat `θ` into blocks shaped for `design`.
    pub fn from_flat(design: &TensorDesign, theta: &[f64]) -> Result<Self> {
        if theta.len() != design.n_params() {
            return Err(GlamError::Dimension(format!(
                "theta has length {}, design has p = {}",
                theta.len(),
                design.n_params()
            )));
        }
        let mut offset = 0;
        let blocks = (0..design.n_components())
            .map(|r| {
                let dims = design.col_dims(r);
                let size = dims.size();
                let block = DenseArray::new(dims, theta[offset..offset + size].to_vec());
                offset += size;
                block
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { blocks })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.values().iter().copied()).collect()
    }

    pub fn blocks(&self) -> &[DenseArray] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [DenseArray] {
        &mut self.blocks
    }

    pub fn into_blocks(self) -> Vec<DenseArray> {
        self.blocks
    }

    pub fn iter_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks.iter().flat_map(|b| b.values().iter().copied())
    }

    pub fn len(&self) -> usize {
        self.blocks.iter().map(DenseArray::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn count_nonzero(&self) -> usize {
        self.iter_values().filter(|&v| v != 0.0).count()
    }

    pub fn check_matches(&self, design: &TensorDesign) -> Result<()> {
        if self.blocks.len() != design.n_components() {
            return Err(GlamError::Dimension(format!(
                "{} coefficient blocks for {} components",
                self.blocks.len(),
                design.n_components()
            )));
        }
        for (r, block) in self.blocks.iter().enumerate() {
            if *block.dims() != design.col_dims(r) {
                return Err(GlamError::Dimension(format!(
                    "block {} has dims {:?}, design expects {:?}",
                    r + 1,
                    block.dims().as_slice(),
                    design.col_dims(r).as_slice()
                )));
            }
        }
        Ok(())
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.blocks.len() != other.blocks.len() {
            return Err(GlamError::Dimension("block counts differ".into()));
        }
        self.blocks.iter().zip(&other.blocks).try_for_each(|(a, b)| a.check_same_dims(b))
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.blocks.iter().zip(&other.blocks).map(|(a, b)| dot(a.values(), b.values())).sum())
    }

    pub fn norm_sq(&self) -> f64 {
        self.iter_values().map(|v| v * v).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.iter_values().zip(other.iter_values()).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// `a·self + b·other`.
    pub fn lincomb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.zip_with(other, |x, y| a * x + b * y)
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|x| a * x)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { blocks: self.blocks.iter().map(|b| b.map(&f)).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_shape(other)?;
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.zip_map(b, &f))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { blocks })
    }
}

/// The rotated contraction `ρ(X, A)`: contracts `A`'s first dimension
/// against the columns of the `r × n_1` matrix `X` and places the result's
/// new dimension last, giving an `n_2 × … × n_d × r` array.
pub fn rho(x: ArrayView2<'_, f64>, a: &DenseArray) -> Result<DenseArray> {
    let n1 = a.dims()[0];
    if x.ncols() != n1 {
        return Err(GlamError::Dimension(format!(
            "rho: matrix has {} columns, array's first dimension is {}",
            x.ncols(),
            n1
        )));
    }
    let m = a.len() / n1;
    let r = x.nrows();
    // The flat buffer read row-major as m × n_1 is A reshaped to n_1 × m.
    let a_t = ArrayView2::from_shape((m, n1), a.values())
        .map_err(|e| GlamError::Dimension(e.to_string()))?;
    let mut out = vec![0.0; r * m];
    {
        // Row-major r × m output is the column-major m × r array we want.
        let mut out_view = ArrayViewMut2::from_shape((r, m), &mut out)
            .map_err(|e| GlamError::Dimension(e.to_string()))?;
        general_mat_mul(1.0, &x, &a_t.t(), 0.0, &mut out_view);
    }
    Ok(DenseArray { dims: a.dims().rotated(r), values: out })
}

fn rho_chain<'a>(
    mut factors: impl Iterator<Item = ArrayView2<'a, f64>>,
    init: &DenseArray,
) -> Result<DenseArray> {
    let first = factors
        .next()
        .ok_or_else(|| GlamError::Dimension("empty factor chain".into()))?;
    let mut acc = rho(first, init)?;
    for f in factors {
        acc = rho(f, &acc)?;
    }
    Ok(acc)
}

/// `H(⟨X_{r,j}⟩, ⟨Θ_r⟩) = Σ_r ρ(X_{r,d}, …, ρ(X_{r,1}, Θ_r)…)`; its vec is `Xθ`.
pub fn h_map(design: &TensorDesign, coef: &CoefficientBlocks) -> Result<DenseArray> {
    coef.check_matches(design)?;
    let mut total = DenseArray::zeros(design.row_dims().clone());
    for (comp, block) in design.components().iter().zip(coef.blocks()) {
        let part = rho_chain(comp.iter().map(MarginalMatrix::view), block)?;
        for (t, v) in total.values.iter_mut().zip(&part.values) {
            *t += v;
        }
    }
    Ok(total)
}

/// `G(⟨X_{r,j}⟩, U)`: the tuple of `ρ(X_{r,d}ᵀ, …, ρ(X_{r,1}ᵀ, U)…)`, i.e. `Xᵀ vec(U)`.
pub fn g_map(design: &TensorDesign, u: &DenseArray) -> Result<CoefficientBlocks> {
    if u.dims() != design.row_dims() {
        return Err(GlamError::Dimension(format!(
            "g_map: array dims {:?}, design rows {:?}",
            u.dims().as_slice(),
            design.row_dims().as_slice()
        )));
    }
    let blocks = design
        .components()
        .iter()
        .map(|comp| rho_chain(comp.iter().map(|x| x.view().reversed_axes()), u))
        .collect::<Result<Vec<_>>>()?;
    Ok(CoefficientBlocks::new(blocks))
}

/// `XᵀWXθ` as `G(X, V ⊙ H(X, Θ))`.
pub fn xtwx_apply(
    design: &TensorDesign,
    weights: &DenseArray,
    coef: &CoefficientBlocks,
) -> Result<CoefficientBlocks> {
    let eta = h_map(design, coef)?;
    g_map(design, &weights.hadamard(&eta)?)
}

/// Diagonal weight factors `(W_1, …, W_d)` of a tensor product weight
/// matrix `W = W_d ⊗ … ⊗ W_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorWeights {
    factors: Vec<Vec<f64>>,
}

impl TensorWeights {
    pub fn new(factors: Vec<Vec<f64>>) -> Result<Self> {
        if factors.is_empty() || factors.iter().any(Vec::is_empty) {
            return Err(GlamError::Dimension("tensor weights need non-empty factors".into()));
        }
        if factors.iter().flatten().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(GlamError::InvalidInput("tensor weight factors must be finite and nonnegative".into()));
        }
        Ok(Self { factors })
    }

    pub fn unit(dims: &ArrayDims) -> Self {
        Self { factors: dims.as_slice().iter().map(|&n| vec![1.0; n]).collect() }
    }

    pub fn factors(&self) -> &[Vec<f64>] {
        &self.factors
    }

    pub fn dims(&self) -> Result<ArrayDims> {
        ArrayDims::new(self.factors.iter().map(Vec::len).collect())
    }

    /// The full weight array `V_{i_1…i_d} = Π_j w_{j,i_j}`.
    pub fn expand(&self) -> Result<DenseArray> {
        let dims = self.dims()?;
        let mut values = vec![1.0];
        for factor in &self.factors {
            // Each new dimension varies slower than all previous ones.
            values = factor.iter().flat_map(|&w| values.iter().map(move |&v| v * w)).collect();
        }
        DenseArray::new(dims, values)
    }
}

/// Precomputed `X_{r,j}ᵀ W_j X_{m,j}` for every `(r, m, j)`.
#[derive(Debug, Clone)]
pub struct TensorGram {
    blocks: Vec<Vec<Vec<Array2<f64>>>>,
}

impl TensorGram {
    pub fn new(design: &TensorDesign, weights: &TensorWeights) -> Result<Self> {
        if weights.factors.len() != design.ndim() {
            return Err(GlamError::Dimension(format!(
                "{} weight factors for a {}-dimensional design",
                weights.factors.len(),
                design.ndim()
            )));
        }
        let comps = design.components();
        let blocks = comps
            .iter()
            .map(|left| {
                comps
                    .iter()
                    .map(|right| {
                        left.iter()
                            .zip(right)
                            .zip(&weights.factors)
                            .map(|((xl, xr), w)| xl.weighted_cross(w, xr))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { blocks })
    }

    /// Factor `j` of the `(r, m)` block.
    pub fn block(&self, r: usize, m: usize, j: usize) -> &Array2<f64> {
        &self.blocks[r][m][j]
    }
}

/// `XᵀWXθ` for tensor product weights, evaluated block by block on the
/// small `p_{r,j} × p_{m,j}` Gram factors.
pub fn xtwx_apply_tensor(
    design: &TensorDesign,
    gram: &TensorGram,
    coef: &CoefficientBlocks,
) -> Result<CoefficientBlocks> {
    coef.check_matches(design)?;
    let c = design.n_components();
    if gram.blocks.len() != c || gram.blocks.iter().any(|row| row.len() != c) {
        return Err(GlamError::Dimension("gram blocks do not match the design".into()));
    }
    let mut out = Vec::with_capacity(c);
    for r in 0..c {
        let mut acc = DenseArray::zeros(design.col_dims(r));
        for (m, block) in coef.blocks().iter().enumerate() {
            let factors = &gram.blocks[r][m];
            for (j, g) in factors.iter().enumerate() {
                if g.nrows() != design.col_dims(r)[j] || g.ncols() != design.col_dims(m)[j] {
                    return Err(GlamError::Dimension(format!(
                        "gram factor ({}, {}, {}) is {}x{}",
                        r + 1,
                        m + 1,
                        j + 1,
                        g.nrows(),
                        g.ncols()
                    )));
                }
            }
            let part = rho_chain(factors.iter().map(|f| f.view()), block)?;
            for (t, v) in acc.values.iter_mut().zip(&part.values) {
                *t += v;
            }
        }
        out.push(acc);
    }
    Ok(CoefficientBlocks::new(out))
}
