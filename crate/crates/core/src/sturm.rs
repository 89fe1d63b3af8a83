//! Root counting for the characteristic polynomial `det(M(k) - x)` without
//! diagonalizing.
//!
//! A Hermitian fiber is reduced by Householder reflections to a real
//! symmetric tridiagonal matrix `T` with the same characteristic polynomial.
//! The leading principal minors of `T - x` form a Sturm sequence; the number
//! of sign changes equals the number of roots below `x`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fiber::assemble_fiber_raw;
use crate::lattice::CharacterGrid;
use crate::model::LatticeModel;

/// Real symmetric tridiagonal matrix: `diag[i]`, and `off[i]` coupling `i` and `i + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiagonal {
    /// Unitary reduction of a Hermitian matrix.
    pub fn from_hermitian(mut a: DMatrix<Complex64>) -> Self {
        let n = a.nrows();
        let zero = Complex64::new(0.0, 0.0);
        for j in 0..n.saturating_sub(2) {
            let norm: f64 = (j + 1..n).map(|i| a[(i, j)].norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let x0 = a[(j + 1, j)];
            let phase = if x0.norm() > 0.0 {
                x0 / x0.norm()
            } else {
                Complex64::new(1.0, 0.0)
            };
            // v = x + phase * |x| e_1 avoids cancellation in the first entry
            let mut v: Vec<Complex64> = (j + 1..n).map(|i| a[(i, j)]).collect();
            v[0] += phase * norm;
            let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            if vnorm2 == 0.0 {
                continue;
            }
            let beta = 2.0 / vnorm2;
            // A <- H A H with H = I - beta v v^dagger acting on rows/cols j+1..n
            for col in 0..n {
                let dot: Complex64 = v
                    .iter()
                    .enumerate()
                    .map(|(r, vr)| vr.conj() * a[(j + 1 + r, col)])
                    .sum();
                let s = dot * beta;
                for (r, vr) in v.iter().enumerate() {
                    a[(j + 1 + r, col)] -= vr * s;
                }
            }
            for row in 0..n {
                let dot: Complex64 = v.iter().enumerate().map(|(c, vc)| a[(row, j + 1 + c)] * vc).sum();
                let s = dot * beta;
                for (c, vc) in v.iter().enumerate() {
                    a[(row, j + 1 + c)] -= s * vc.conj();
                }
            }
            for i in j + 2..n {
                a[(i, j)] = zero;
                a[(j, i)] = zero;
            }
        }
        // a diagonal unitary rotates every sub-diagonal entry onto the
        // positive real axis
        let diag = (0..n).map(|i| a[(i, i)].re).collect();
        let off = (0..n.saturating_sub(1)).map(|i| a[(i + 1, i)].norm()).collect();
        Tridiagonal { diag, off }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Number of roots of `det(T - x)` strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let scale = self.off.iter().fold(1.0_f64, |acc, b| acc.max(b * b));
        let pivmin = f64::MIN_POSITIVE * scale;
        let mut count = 0;
        let mut d = 1.0_f64;
        for i in 0..self.dim() {
            let coupling = if i == 0 {
                0.0
            } else {
                self.off[i - 1] * self.off[i - 1] / d
            };
            d = (self.diag[i] - x) - coupling;
            if d.abs() < pivmin {
                d = -pivmin;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Number of roots in `[lo, hi]`.
    pub fn count_in_closed(&self, lo: f64, hi: f64) -> usize {
        if lo > hi {
            return 0;
        }
        self.count_below(hi.next_up()).saturating_sub(self.count_below(lo))
    }
}

/// Tridiagonal forms of every fiber over a grid.
#[derive(Clone, Debug)]
pub struct CharPolyFamily {
    grid: CharacterGrid,
    forms: Vec<Tridiagonal>,
}

impl CharPolyFamily {
    pub fn new(model: &LatticeModel, grid: &CharacterGrid) -> Result<Self> {
        if grid.rank() != model.rank() {
            return Err(Error::input("grid rank does not match model rank"));
        }
        let forms = grid
            .iter()
            .map(|k| assemble_fiber_raw(model, k).map(Tridiagonal::from_hermitian))
            .collect::<Result<_>>()?;
        Ok(CharPolyFamily {
            grid: grid.clone(),
            forms,
        })
    }

    pub fn grid(&self) -> &CharacterGrid {
        &self.grid
    }

    pub fn forms(&self) -> &[Tridiagonal] {
        &self.forms
    }
}
