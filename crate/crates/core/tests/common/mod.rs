//! Shared generators for the integration tests.
#![allow(dead_code)]

use glam_core::family::{Family, FamilySpec, ObservationData};
use glam_core::{h_map, ArrayDims, CoefficientBlocks, DenseArray, MarginalMatrix, TensorDesign};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, Normal, Poisson, StandardNormal};

pub const FAMILIES: [Family; 4] = [Family::Gaussian, Family::Binomial, Family::Poisson, Family::Gamma];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> MarginalMatrix {
    let values = (0..rows * cols).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    MarginalMatrix::from_row_major(rows, cols, values).unwrap()
}

/// `d ≤ d_max`, `c ≤ c_max`, `n_j ≤ n_max`, `p_{r,j} ≤ p_max`.
pub fn random_design(rng: &mut ChaCha8Rng, d_max: usize, c_max: usize, n_max: usize, p_max: usize) -> TensorDesign {
    let d = rng.random_range(1..=d_max);
    let c = rng.random_range(1..=c_max);
    let rows: Vec<usize> = (0..d).map(|_| rng.random_range(1..=n_max)).collect();
    let components = (0..c)
        .map(|_| {
            rows.iter()
                .map(|&n| {
                    let p = rng.random_range(1..=p_max);
                    normal_matrix(rng, n, p, 1.0)
                })
                .collect()
        })
        .collect();
    TensorDesign::new(components).unwrap()
}

/// Single-component design with the given row and column extents.
pub fn tensor_design(rng: &mut ChaCha8Rng, rows: &[usize], cols: &[usize], scale: f64) -> TensorDesign {
    let factors = rows.iter().zip(cols).map(|(&n, &p)| normal_matrix(rng, n, p, scale)).collect();
    TensorDesign::single(factors).unwrap()
}

pub fn random_coef(rng: &mut ChaCha8Rng, design: &TensorDesign, scale: f64) -> CoefficientBlocks {
    let flat: Vec<f64> = (0..design.n_params()).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    CoefficientBlocks::from_flat(design, &flat).unwrap()
}

pub fn random_array(rng: &mut ChaCha8Rng, dims: &ArrayDims, lo: f64, hi: f64) -> DenseArray {
    let values = (0..dims.size()).map(|_| rng.random_range(lo..hi)).collect();
    DenseArray::new(dims.clone(), values).unwrap()
}

pub fn to_dvector(values: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(values)
}

pub fn sup_norm(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}

/// Draws a response for `η = Xθ` with the family's own sampler. Binomial
/// responses are proportions over `trials` draws, stored as prior weights.
pub fn simulate(rng: &mut ChaCha8Rng, spec: &FamilySpec, eta: &DenseArray) -> ObservationData {
    let dims = eta.dims().clone();
    match spec.family() {
        Family::Gaussian => {
            let noise = Normal::new(0.0, 0.5).unwrap();
            let y = eta.values().iter().map(|&e| e + noise.sample(rng)).collect();
            ObservationData::unweighted(DenseArray::new(dims, y).unwrap())
        }
        Family::Poisson => {
            let y = eta
                .values()
                .iter()
                .map(|&e| Poisson::new(spec.mean_at(e)).unwrap().sample(rng))
                .collect();
            ObservationData::unweighted(DenseArray::new(dims, y).unwrap())
        }
        Family::Binomial => {
            let trials: Vec<f64> = eta.values().iter().map(|_| rng.random_range(1..=6) as f64).collect();
            let y = eta
                .values()
                .iter()
                .zip(&trials)
                .map(|(&e, &m)| Binomial::new(m as u64, spec.mean_at(e)).unwrap().sample(rng) as f64 / m)
                .collect();
            ObservationData::new(DenseArray::new(dims.clone(), y).unwrap(), DenseArray::new(dims, trials).unwrap())
                .unwrap()
        }
        Family::Gamma => {
            let shape = 4.0;
            let y = eta
                .values()
                .iter()
                .map(|&e| Gamma::new(shape, spec.mean_at(e) / shape).unwrap().sample(rng))
                .collect();
            ObservationData::unweighted(DenseArray::new(dims, y).unwrap())
        }
    }
}

/// A desk-scale instance: design, truth and simulated data.
pub struct Instance {
    pub design: TensorDesign,
    pub spec: FamilySpec,
    pub truth: CoefficientBlocks,
    pub data: ObservationData,
}

pub fn instance(seed: u64, family: Family, rows: &[usize], cols: &[usize]) -> Instance {
    let mut rng = rng(seed);
    let spec = FamilySpec::of(family);
    let design = tensor_design(&mut rng, rows, cols, 1.0 / (cols.len() as f64).sqrt());
    let coef_scale = match family {
        Family::Gaussian => 1.0,
        _ => 0.3,
    };
    let truth = random_coef(&mut rng, &design, coef_scale);
    let eta = h_map(&design, &truth).unwrap();
    let data = simulate(&mut rng, &spec, &eta);
    Instance { design, spec, truth, data }
}

/// Dense `XᵀWX` with `W = diag(w)`.
pub fn dense_xtwx(x: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut wx = x.clone();
    for (mut row, &wi) in wx.row_iter_mut().zip(w) {
        row *= wi;
    }
    x.tr_mul(&wx)
}
