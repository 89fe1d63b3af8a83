//! Bounded generalized eigensections obtained by spreading a fiber
//! eigenvector quasi-periodically over a patch of cells.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bands::solve_fiber;
use crate::error::{Error, Result};
use crate::fiber::assemble_fiber;
use crate::lattice::{character_pairing, Character};
use crate::model::LatticeModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochLift {
    pub k: Vec<f64>,
    pub band: usize,
    pub energy: f64,
    pub cells_per_dim: usize,
    /// Cell-major (first coordinate slowest), then site.
    pub values: Vec<Complex64>,
    pub sup_norm: f64,
    pub max_cell_amplitude: f64,
    /// `max |(H - E) s|` over cells whose whole hopping range lies in the patch.
    pub residual: f64,
}

impl BlochLift {
    pub fn value(&self, cell: &[i64], site: usize, sites: usize) -> Complex64 {
        let p = self.cells_per_dim as i64;
        let idx = cell.iter().fold(0, |acc, &c| acc * p + c) as usize;
        self.values[idx * sites + site]
    }
}

fn cell_of(mut index: usize, p: usize, rank: usize) -> Vec<i64> {
    let mut c = vec![0; rank];
    for d in (0..rank).rev() {
        c[d] = (index % p) as i64;
        index /= p;
    }
    c
}

/// `s(c, j) = chi_k(c) v_j` on `cells_per_dim^n` cells.
pub fn reverse_bloch_lift(model: &LatticeModel, k: &Character, band: usize, cells_per_dim: usize) -> Result<BlochLift> {
    if k.rank() != model.rank() {
        return Err(Error::input("character rank does not match model rank"));
    }
    let range = model.range() as usize;
    let need = (2 * range + 1).max(3);
    if cells_per_dim < need {
        return Err(Error::domain(format!(
            "patch of {cells_per_dim} cells per dimension is too small for hopping range {range} (need {need})"
        )));
    }
    let sys = solve_fiber(&assemble_fiber(model, k)?)?;
    if band >= sys.values.len() {
        return Err(Error::input(format!(
            "band {band} out of range 0..{}",
            sys.values.len()
        )));
    }
    let energy = sys.values[band];
    let v = sys.vectors.column(band);
    let rank = model.rank();
    let d = model.sites();
    let total_cells = cells_per_dim.pow(rank as u32);

    let mut values = Vec::with_capacity(total_cells * d);
    for idx in 0..total_cells {
        let phase = character_pairing(k, &cell_of(idx, cells_per_dim, rank))?;
        values.extend(v.iter().map(|x| phase * x));
    }

    let p = cells_per_dim as i64;
    let r = range as i64;
    let flat = |c: &[i64]| c.iter().fold(0, |acc, &x| acc * p + x) as usize;
    let mut residual = 0.0_f64;
    for idx in 0..total_cells {
        let c = cell_of(idx, cells_per_dim, rank);
        if c.iter().any(|&x| x < r || x >= p - r) {
            continue;
        }
        let mut hs = vec![Complex64::new(0.0, 0.0); d];
        for h in model.hoppings() {
            let target: Vec<i64> = c.iter().zip(&h.offset).map(|(a, b)| a + b).collect();
            hs[h.from] += h.amplitude * values[flat(&target) * d + h.to];
        }
        for (i, x) in hs.iter().enumerate() {
            residual = residual.max((x - energy * values[idx * d + i]).norm());
        }
    }

    let sup_norm = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let max_cell_amplitude = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(BlochLift {
        k: k.coords().to_vec(),
        band,
        energy,
        cells_per_dim,
        values,
        sup_norm,
        max_cell_amplitude,
        residual,
    })
}
