//! `glam bench`: matrix-free timing against a dense matrix-vector product.

use std::io::Write;
use std::time::Instant;

use glam_core::family::{Family, FamilySpec, ObservationData};
use glam_core::oracle::dense_materialize_with_cap;
use glam_core::path::{fit_path, PathConfig};
use glam_core::{h_map, PenaltySpec, TensorDesign};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::alloc::peak_during;
use crate::args::{usage, BenchArgs, MethodArg, ShapeArg};
use crate::error::{CliError, Result};
use crate::simulate::{coefficients, equicorrelated_matrix, simulate, SimConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub size: f64,
    pub method: &'static str,
    /// Fastest repetition; `None` when the dense matrix exceeds the cap.
    pub seconds: Option<f64>,
    pub peak_alloc: usize,
    /// Nonzero count (path) or predictor sum (matvec) of the last repetition.
    pub checksum: f64,
}

struct Instance {
    design: TensorDesign,
    theta: Vec<f64>,
    data: ObservationData,
}

fn instance(args: &BenchArgs, size: f64) -> Result<Instance> {
    match args.shape {
        ShapeArg::Simulation => {
            let config = SimConfig { r: size, q: args.q, kappa: 0.0, sigma: 1.0, s: 1.0, seed: args.seed };
            let sim = simulate(&config, Family::Gaussian)?;
            Ok(Instance { theta: sim.theta.to_flat(), data: ObservationData::unweighted(sim.response), design: sim.design })
        }
        ShapeArg::Square => {
            if size < 1.0 || size.fract() != 0.0 {
                return Err(usage("square sizes must be positive integers"));
            }
            let n = size as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let design = TensorDesign::single((0..3).map(|_| equicorrelated_matrix(&mut rng, n, n, 1.0, 0.0)).collect())?;
            let theta = coefficients(&mut rng, design.n_params(), 1.0);
            let coef = glam_core::CoefficientBlocks::from_flat(&design, &theta)?;
            let response = h_map(&design, &coef)?;
            Ok(Instance { design, theta, data: ObservationData::unweighted(response) })
        }
    }
}

pub fn bench(args: &BenchArgs) -> Result<Vec<BenchRow>> {
    if args.reps == 0 {
        return Err(usage("reps must be positive"));
    }
    let mut rows = Vec::new();
    for &size in &args.sizes {
        let inst = instance(args, size)?;
        let (n, p) = (inst.design.n_obs(), inst.design.n_params());

        let mut best = f64::INFINITY;
        let mut peak = 0;
        let mut checksum = 0.0;
        for _ in 0..args.reps {
            let start = Instant::now();
            let (value, bytes) = match args.method {
                MethodArg::Path => peak_during(|| -> Result<f64> {
                    let config = PathConfig { n_lambda: args.nlambda, ..PathConfig::default() };
                    let path = fit_path(&inst.design, &FamilySpec::gaussian(), &inst.data, &PenaltySpec::lasso(), &config)?;
                    Ok(path.fits.last().map_or(0, |c| c.count_nonzero()) as f64)
                }),
                MethodArg::Hmap => peak_during(|| -> Result<f64> {
                    let coef = glam_core::CoefficientBlocks::from_flat(&inst.design, &inst.theta)?;
                    Ok(h_map(&inst.design, &coef)?.values().iter().sum())
                }),
            };
            best = best.min(start.elapsed().as_secs_f64());
            peak = peak.max(bytes);
            checksum = value?;
        }
        let method = match args.method {
            MethodArg::Path => "glam_path",
            MethodArg::Hmap => "glam_hmap",
        };
        rows.push(BenchRow { size, method, seconds: Some(best), peak_alloc: peak, checksum });

        if n.checked_mul(p).is_none_or(|np| np > args.dense_cap) {
            rows.push(BenchRow { size, method: "dense_matvec", seconds: None, peak_alloc: 0, checksum: f64::NAN });
            continue;
        }
        let (dense, bytes) = peak_during(|| -> Result<(f64, f64)> {
            let x = dense_materialize_with_cap(&inst.design, args.dense_cap)?;
            let v = DVector::from_column_slice(&inst.theta);
            let mut best = f64::INFINITY;
            let mut sum = 0.0;
            for _ in 0..args.reps {
                let start = Instant::now();
                let eta = &x * &v;
                best = best.min(start.elapsed().as_secs_f64());
                sum = eta.sum();
            }
            Ok((best, sum))
        });
        let (seconds, sum) = dense?;
        rows.push(BenchRow { size, method: "dense_matvec", seconds: Some(seconds), peak_alloc: bytes, checksum: sum });
    }
    Ok(rows)
}

pub fn write_table(w: &mut impl Write, rows: &[BenchRow]) -> std::io::Result<()> {
    writeln!(w, "size,method,seconds,peak_alloc")?;
    for r in rows {
        let secs = r.seconds.map_or_else(|| "NA".to_string(), |s| format!("{s:.6e}"));
        writeln!(w, "{},{},{},{}", r.size, r.method, secs, r.peak_alloc)?;
    }
    Ok(())
}

pub fn run(args: &BenchArgs) -> Result<()> {
    let rows = bench(args)?;
    match &args.out {
        Some(path) => {
            let mut buf = Vec::new();
            write_table(&mut buf, &rows).map_err(|e| CliError::io(path, e))?;
            std::fs::write(path, buf).map_err(|e| CliError::io(path, e))
        }
        None => write_table(&mut std::io::stdout().lock(), &rows).map_err(|e| CliError::io("<stdout>", e)),
    }
}
