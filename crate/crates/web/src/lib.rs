//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every exported function returns a flat `Float64Array`; the page draws
//! straight from it.

use bloch_fermi::bands::{band_functions, BandData, BandOptions};
use bloch_fermi::driver::run_butterfly;
use bloch_fermi::fermi_surface::fermi_surface;
use bloch_fermi::lattice::{haar_grid, LatticeGroup};
use bloch_fermi::magnetic::Flux;
use bloch_fermi::measures::{default_flat_tol, ids};
use bloch_fermi::model::{harper, lieb, square_laplacian, LatticeModel};
use wasm_bindgen::prelude::*;

const MAX_GRID: usize = 256;

fn model(name: &str, p: i32, q: i32) -> Result<LatticeModel, String> {
    match name {
        "square_laplacian" => Ok(square_laplacian()),
        "lieb" => Ok(lieb()),
        "harper" => Flux::new(p as i64, q as i64).map(harper).map_err(|e| e.to_string()),
        other => Err(format!("unknown model '{other}'")),
    }
}

fn bands(m: &LatticeModel, grid_n: usize) -> Result<BandData, String> {
    if !(2..=MAX_GRID).contains(&grid_n) {
        return Err(format!("grid must be between 2 and {MAX_GRID}"));
    }
    let grid =
        haar_grid(&LatticeGroup::new(m.rank()).map_err(|e| e.to_string())?, grid_n).map_err(|e| e.to_string())?;
    band_functions(
        m,
        &grid,
        BandOptions {
            with_vectors: false,
            parallel: false,
        },
    )
    .map_err(|e| e.to_string())
}

/// `[flux, lo, hi]` triples for every rational flux with denominator up to `q_max`.
pub fn butterfly_points(q_max: u32, grid_n: usize) -> Result<Vec<f64>, String> {
    if !(1..=40).contains(&q_max) {
        return Err("q_max must be between 1 and 40".into());
    }
    let b = run_butterfly(q_max, grid_n, false).map_err(|e| e.to_string())?;
    Ok(b.rows.iter().flat_map(|r| [r.flux, r.lo, r.hi]).collect())
}

/// Contour vertices `k1, k2` in unwrapped torus coordinates; polylines are
/// separated by a `NaN, NaN` pair and closed loops repeat their first vertex.
pub fn contour_points(name: &str, p: i32, q: i32, energy: f64, grid_n: usize) -> Result<Vec<f64>, String> {
    let m = model(name, p, q)?;
    let b = bands(&m, grid_n)?;
    let s = fermi_surface(&b, energy, default_flat_tol(&b));
    let mut out = Vec::new();
    for c in &s.contours {
        for v in &c.vertices {
            out.extend_from_slice(v);
        }
        if c.closed {
            out.extend_from_slice(&c.vertices[0]);
        }
        out.extend_from_slice(&[f64::NAN, f64::NAN]);
    }
    Ok(out)
}

/// `[E, ids(E)]` pairs on `steps + 1` equally spaced energies covering the spectrum.
pub fn ids_points(name: &str, p: i32, q: i32, steps: usize, grid_n: usize) -> Result<Vec<f64>, String> {
    if steps == 0 || steps > 10_000 {
        return Err("steps must be between 1 and 10000".into());
    }
    let m = model(name, p, q)?;
    let b = bands(&m, grid_n)?;
    let (lo, hi) = b.global_range();
    let pad = 0.05 * (hi - lo).max(1.0);
    let (lo, hi) = (lo - pad, hi + pad);
    Ok((0..=steps)
        .flat_map(|i| {
            let e = lo + (hi - lo) * i as f64 / steps as f64;
            [e, ids(&b, e, true).value]
        })
        .collect())
}

/// `[min, max]` of the sampled spectrum.
pub fn spectrum_range(name: &str, p: i32, q: i32, grid_n: usize) -> Result<Vec<f64>, String> {
    let b = bands(&model(name, p, q)?, grid_n)?;
    let (lo, hi) = b.global_range();
    Ok(vec![lo, hi])
}

#[wasm_bindgen]
pub fn butterfly(q_max: u32, grid_n: usize) -> Result<Vec<f64>, JsError> {
    butterfly_points(q_max, grid_n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn fermi_contours(model: &str, p: i32, q: i32, energy: f64, grid_n: usize) -> Result<Vec<f64>, JsError> {
    contour_points(model, p, q, energy, grid_n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn ids_curve(model: &str, p: i32, q: i32, steps: usize, grid_n: usize) -> Result<Vec<f64>, JsError> {
    ids_points(model, p, q, steps, grid_n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn energy_range(model: &str, p: i32, q: i32, grid_n: usize) -> Result<Vec<f64>, JsError> {
    spectrum_range(model, p, q, grid_n).map_err(|e| JsError::new(&e))
}
