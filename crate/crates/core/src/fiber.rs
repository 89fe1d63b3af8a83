//! Assembly of the finite Hermitian fiber `M(k)` from a periodic model.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{pairing_unchecked, Character, CharacterGrid};
use crate::model::{LatticeModel, ModelKind};

#[derive(Clone, Debug)]
pub struct FiberOperator {
    pub k: Character,
    pub matrix: DMatrix<Complex64>,
}

impl FiberOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max |M - M^dagger|` relative to `max |M|`.
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.matrix)
    }
}

pub(crate) fn hermiticity_defect(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    let mut scale = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            scale = scale.max(m[(i, j)].norm());
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

/// `M[i, j] = sum over hoppings (i, j, gamma, t) of t chi_k(gamma)`.
pub fn assemble_fiber_raw(model: &LatticeModel, k: &[f64]) -> Result<DMatrix<Complex64>> {
    if k.len() != model.rank() {
        return Err(Error::input(format!(
            "character of rank {} for a rank-{} model",
            k.len(),
            model.rank()
        )));
    }
    let d = model.sites();
    let mut m = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
    for h in model.hoppings() {
        m[(h.from, h.to)] += h.amplitude * pairing_unchecked(k, &h.offset);
    }
    Ok(m)
}

/// Fiber of any model kind.
pub fn assemble_fiber(model: &LatticeModel, k: &Character) -> Result<FiberOperator> {
    Ok(FiberOperator {
        k: k.clone(),
        matrix: assemble_fiber_raw(model, k.coords())?,
    })
}

pub fn assemble_tb_fiber(model: &LatticeModel, k: &Character) -> Result<FiberOperator> {
    if model.kind() != &ModelKind::TightBinding {
        return Err(Error::model(format!("{} is not a tight-binding model", model.name())));
    }
    assemble_fiber(model, k)
}

/// Fiber of a finite-difference model: the periodic stencil with the boundary
/// wrap twisted by `chi_k`.
pub fn assemble_continuum_fiber(model: &LatticeModel, k: &Character) -> Result<FiberOperator> {
    match model.kind() {
        ModelKind::ContinuumFd { grid_per_dim } if *grid_per_dim >= 4 => assemble_fiber(model, k),
        ModelKind::ContinuumFd { grid_per_dim } => {
            Err(Error::model(format!("continuum grid needs m >= 4, got {grid_per_dim}")))
        }
        ModelKind::TightBinding => Err(Error::model(format!("{} is not a continuum model", model.name()))),
    }
}

/// Spectral norm of a Hermitian matrix.
pub(crate) fn hermitian_norm(m: DMatrix<Complex64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, e| acc.max(e.abs()))
}

/// Largest `||M(k) - M(k')||_2 / dist(k, k')` over neighbouring grid points.
pub fn family_lipschitz_check(model: &LatticeModel, grid: &CharacterGrid) -> Result<f64> {
    if grid.points_per_dim() < 4 {
        return Err(Error::input("Lipschitz check needs at least 4 points per dimension"));
    }
    if grid.rank() != model.rank() {
        return Err(Error::input("grid rank does not match model rank"));
    }
    let fibers: Vec<DMatrix<Complex64>> = grid
        .iter()
        .map(|k| assemble_fiber_raw(model, k))
        .collect::<Result<_>>()?;
    let spacing = 1.0 / grid.points_per_dim() as f64;
    let mut worst = 0.0_f64;
    for i in 0..grid.len() {
        let multi: Vec<i64> = grid.multi_index(i).into_iter().map(|j| j as i64).collect();
        for axis in 0..grid.rank() {
            let mut next = multi.clone();
            next[axis] += 1;
            let j = grid.flat_index(&next);
            let diff = &fibers[j] - &fibers[i];
            worst = worst.max(hermitian_norm(diff) / spacing);
        }
    }
    Ok(worst)
}
