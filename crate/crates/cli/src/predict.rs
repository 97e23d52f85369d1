//! `glam predict`: fitted arrays per model and an optional held-out table.

use std::fs;
use std::io::Write;
use std::path::Path;

use glam_core::path::{mse_heldout, predict, FitPath};

use crate::args::PredictArgs;
use crate::arrayfile::{read_array, write_array};
use crate::error::{CliError, Result};
use crate::fit::{fitted_file, PathManifest};

#[derive(Debug, Clone, PartialEq)]
pub struct MseRow {
    pub model: usize,
    pub lambda: f64,
    /// Sum of squared errors over the held-out cells.
    pub sse: f64,
    pub mse: f64,
    pub best: bool,
}

pub fn run(args: &PredictArgs) -> Result<Option<Vec<MseRow>>> {
    let manifest = PathManifest::read(&args.fit)?;
    let design = manifest.load_design(&args.fit)?;
    let spec = manifest.family_spec()?;
    let out = args.out.as_deref().unwrap_or(&args.fit);
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;

    let mut fits = Vec::with_capacity(manifest.models.len());
    for (t, model) in manifest.models.iter().enumerate() {
        let coef = manifest.load_coefficients(&args.fit, model)?;
        let (eta, mu) = predict(&design, &spec, &coef)?;
        write_array(&out.join(fitted_file(t)), &mu)?;
        if args.linear {
            write_array(&out.join(format!("eta_{t:03}.glam")), &eta)?;
        }
        fits.push(coef);
    }

    let (Some(truth), Some(mask)) = (&args.truth, &args.mask) else {
        return Ok(None);
    };
    let truth = read_array(truth)?;
    let mask = read_array(mask)?;
    let held = mask.values().iter().filter(|&&m| m == 1.0).count();
    let path = FitPath {
        lambdas: manifest.models.iter().map(|m| m.lambda).collect(),
        objectives: manifest.models.iter().map(|m| m.objective).collect(),
        fits,
        diagnostics: Vec::new(),
        truncated: manifest.truncated,
    };
    let scored = mse_heldout(&path, &design, &spec, &truth, &mask)?;
    let rows: Vec<MseRow> = scored
        .mse
        .iter()
        .enumerate()
        .map(|(t, &sse)| MseRow { model: t, lambda: path.lambdas[t], sse, mse: sse / held as f64, best: t == scored.best })
        .collect();
    write_table(&out.join("mse.csv"), &rows)?;
    let stdout = std::io::stdout();
    write_rows(&mut stdout.lock(), &rows).map_err(|e| CliError::io("<stdout>", e))?;
    Ok(Some(rows))
}

fn write_rows(w: &mut impl Write, rows: &[MseRow]) -> std::io::Result<()> {
    writeln!(w, "model,lambda,sse,mse,best")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.model, r.lambda, r.sse, r.mse, if r.best { "*" } else { "" })?;
    }
    Ok(())
}

fn write_table(path: &Path, rows: &[MseRow]) -> Result<()> {
    let mut buf = Vec::new();
    write_rows(&mut buf, rows).map_err(|e| CliError::io(path, e))?;
    fs::write(path, buf).map_err(|e| CliError::io(path, e))
}
