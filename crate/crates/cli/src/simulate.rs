//! `glam simulate`: three gaussian marginals with equicorrelated rows,
//! alternating decaying coefficients and family responses.

use std::fs;
use std::path::Path;

use glam_core::family::{Family, FamilySpec};
use glam_core::{h_map, ArrayDims, CoefficientBlocks, DenseArray, MarginalMatrix, TensorDesign};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::Serialize;

use crate::args::{usage, SimulateArgs};
use crate::arrayfile::write_array;
use crate::error::{CliError, Result};
use crate::marginal::write_marginal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub r: f64,
    pub q: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub s: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(usage("r must be positive"));
        }
        if !(self.q > 0.0) || !self.q.is_finite() {
            return Err(usage("q must be positive"));
        }
        if !(self.sigma > 0.0) || !(self.kappa >= 0.0) || self.kappa > self.sigma {
            return Err(usage("need sigma > 0 and 0 <= kappa <= sigma for a valid covariance"));
        }
        if !(0.0..=1.0).contains(&self.s) {
            return Err(usage("s must be in [0, 1]"));
        }
        Ok(())
    }

    /// `n = (60r, 20r, 10r)`, rounded and at least one.
    pub fn rows(&self) -> [usize; 3] {
        [60.0, 20.0, 10.0].map(|k| ((k * self.r).round() as usize).max(1))
    }

    /// `p_j = max(3, q n_j)`, rounded.
    pub fn cols(&self) -> [usize; 3] {
        self.rows().map(|n| ((self.q * n as f64).round() as usize).max(3))
    }
}

/// `n × p` with rows from `N(0, Σ)`, `Σ = (σ - κ)I + κ11ᵀ`: a shared
/// `√κ z₀` per row plus independent `√(σ - κ) z`.
pub fn equicorrelated_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize, sigma: f64, kappa: f64) -> MarginalMatrix {
    let (own, shared) = ((sigma - kappa).sqrt(), kappa.sqrt());
    let mut values = Vec::with_capacity(n * p);
    for _ in 0..n {
        let z0: f64 = rng.sample(StandardNormal);
        for _ in 0..p {
            let z: f64 = rng.sample(StandardNormal);
            values.push(own * z + shared * z0);
        }
    }
    MarginalMatrix::from_row_major(n, p, values).expect("sizes agree")
}

/// `θ_m = (-1)^m e^{-(m-1)/10} B_m`, `m = 1..p`, `B_m ~ Bernoulli(s)`.
pub fn coefficients(rng: &mut ChaCha8Rng, p: usize, s: f64) -> Vec<f64> {
    (1..=p)
        .map(|m| {
            let active = rng.random_bool(s);
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            if active {
                sign * (-((m - 1) as f64) / 10.0).exp()
            } else {
                0.0
            }
        })
        .collect()
}

pub struct Simulation {
    pub design: TensorDesign,
    pub theta: CoefficientBlocks,
    pub eta: DenseArray,
    pub response: DenseArray,
}

pub fn simulate(config: &SimConfig, family: Family) -> Result<Simulation> {
    config.validate()?;
    let spec = FamilySpec::of(family);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (rows, cols) = (config.rows(), config.cols());
    let factors = rows.iter().zip(&cols).map(|(&n, &p)| equicorrelated_matrix(&mut rng, n, p, config.sigma, config.kappa)).collect();
    let design = TensorDesign::single(factors)?;
    let theta = CoefficientBlocks::from_flat(&design, &coefficients(&mut rng, design.n_params(), config.s))?;
    let eta = h_map(&design, &theta)?;
    let values = match family {
        Family::Gaussian => {
            let noise = Normal::new(0.0, 1.0).expect("unit variance");
            eta.values().iter().map(|&e| e + noise.sample(&mut rng)).collect()
        }
        Family::Poisson => eta
            .values()
            .iter()
            .map(|&e| {
                let mu = spec.mean_at(e);
                Poisson::new(mu).map(|d| d.sample(&mut rng)).map_err(|_| usage(format!("poisson mean {mu} out of range")))
            })
            .collect::<Result<Vec<f64>>>()?,
        other => return Err(usage(format!("simulation supports gaussian and poisson responses, not {other}"))),
    };
    let response = DenseArray::new(eta.dims().clone(), values)?;
    Ok(Simulation { design, theta, eta, response })
}

/// Bernoulli(`fraction`) hold-out mask from its own stream of the seed, so
/// the design and response do not depend on the hold-out fraction.
pub fn holdout_mask(dims: &ArrayDims, fraction: f64, seed: u64) -> Result<DenseArray> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(usage("holdout must be in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let values = (0..dims.size()).map(|_| if rng.random_bool(fraction) { 1.0 } else { 0.0 }).collect();
    Ok(DenseArray::new(dims.clone(), values)?)
}

#[derive(Serialize)]
struct SimRecord<'a> {
    config: &'a SimConfig,
    family: String,
    rows: [usize; 3],
    cols: [usize; 3],
    holdout: f64,
}

pub fn run(args: &SimulateArgs) -> Result<()> {
    let config = SimConfig { r: args.r, q: args.q, kappa: args.kappa, sigma: args.sigma, s: args.s, seed: args.seed };
    let family: Family = args.family.into();
    let sim = simulate(&config, family)?;
    let out = &args.out;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    for (j, m) in sim.design.components()[0].iter().enumerate() {
        write_marginal(&out.join(format!("design_1_{}.csv", j + 1)), m)?;
    }
    write_array(&out.join("theta.glam"), &sim.theta.blocks()[0])?;
    write_array(&out.join("eta.glam"), &sim.eta)?;
    write_array(&out.join("response.glam"), &sim.response)?;
    let spec = FamilySpec::of(family);
    write_array(&out.join("mean.glam"), &sim.eta.map(|e| spec.mean_at(e)))?;
    let dims = sim.response.dims().clone();
    let mask = holdout_mask(&dims, args.holdout, args.seed)?;
    write_array(&out.join("mask.glam"), &mask)?;
    write_array(&out.join("weights.glam"), &mask.map(|m| 1.0 - m))?;
    let record = SimRecord { config: &config, family: family.to_string(), rows: config.rows(), cols: config.cols(), holdout: args.holdout };
    write_json(&out.join("simulation.json"), &record)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("record serializes");
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}
