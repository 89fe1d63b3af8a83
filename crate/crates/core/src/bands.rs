//! Diagonalization of fibers over a character grid: band functions, band
//! ranges and the spectrum as a union of closed intervals.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fiber::{assemble_fiber_raw, hermiticity_defect, FiberOperator};
use crate::lattice::CharacterGrid;
use crate::model::LatticeModel;

/// Ascending eigenvalues with matching orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

const HERMITIAN_TOL: f64 = 1e-13;

fn check_hermitian(m: &DMatrix<Complex64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::contract("fiber matrix is not square"));
    }
    let defect = hermiticity_defect(m);
    if defect > HERMITIAN_TOL {
        return Err(Error::contract(format!(
            "fiber matrix is not Hermitian (relative defect {defect:e})"
        )));
    }
    Ok(())
}

/// Full spectral decomposition of a Hermitian matrix. Each eigenvector is
/// normalized so that its largest-modulus entry is real and positive.
pub fn solve_matrix(m: DMatrix<Complex64>) -> Result<Eigensystem> {
    check_hermitian(&m)?;
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for (col, &src) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for i in 1..n {
            if v[i].norm() > v[pivot].norm() {
                pivot = i;
            }
        }
        let phase = if v[pivot].norm() > 0.0 {
            v[pivot].conj() / v[pivot].norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n {
            vectors[(i, col)] = v[i] * phase;
        }
        vectors[(pivot, col)].im = 0.0;
    }
    Ok(Eigensystem { values, vectors })
}

pub fn solve_fiber(f: &FiberOperator) -> Result<Eigensystem> {
    solve_matrix(f.matrix.clone())
}

/// Ascending eigenvalues only.
pub fn eigenvalues(m: DMatrix<Complex64>) -> Result<Vec<f64>> {
    check_hermitian(&m)?;
    let mut e: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    Ok(e)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BandOptions {
    pub with_vectors: bool,
    pub parallel: bool,
}

impl Default for BandOptions {
    fn default() -> Self {
        BandOptions {
            with_vectors: false,
            parallel: true,
        }
    }
}

/// Sorted band energies `E_n(k)` for every grid point.
#[derive(Clone, Debug)]
pub struct BandData {
    grid: CharacterGrid,
    band_count: usize,
    energies: Vec<f64>,
    vectors: Option<Vec<DMatrix<Complex64>>>,
}

impl BandData {
    pub fn grid(&self) -> &CharacterGrid {
        &self.grid
    }

    pub fn band_count(&self) -> usize {
        self.band_count
    }

    /// Ascending energies at grid point `i`.
    pub fn at(&self, i: usize) -> &[f64] {
        &self.energies[i * self.band_count..(i + 1) * self.band_count]
    }

    pub fn energy(&self, i: usize, band: usize) -> f64 {
        self.energies[i * self.band_count + band]
    }

    /// Flat array, point-major.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Values of band `n` over the grid, in grid order.
    pub fn band(&self, n: usize) -> Vec<f64> {
        (0..self.grid.len()).map(|i| self.energy(i, n)).collect()
    }

    pub fn vectors(&self) -> Option<&[DMatrix<Complex64>]> {
        self.vectors.as_deref()
    }

    pub fn global_range(&self) -> (f64, f64) {
        self.energies
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| {
                (lo.min(e), hi.max(e))
            })
    }

    /// Width of the sampled spectrum, floored so that tolerances derived
    /// from it stay positive.
    pub fn scale(&self) -> f64 {
        let (lo, hi) = self.global_range();
        let width = hi - lo;
        if width > 0.0 {
            width
        } else {
            lo.abs().max(hi.abs()).max(1.0)
        }
    }

    /// Per band `(min, argmin, max, argmax)` over the grid.
    pub fn band_ranges(&self) -> Vec<BandRange> {
        (0..self.band_count)
            .map(|n| {
                let mut r = BandRange {
                    min: f64::INFINITY,
                    argmin: 0,
                    max: f64::NEG_INFINITY,
                    argmax: 0,
                };
                for i in 0..self.grid.len() {
                    let e = self.energy(i, n);
                    if e < r.min {
                        r.min = e;
                        r.argmin = i;
                    }
                    if e > r.max {
                        r.max = e;
                        r.argmax = i;
                    }
                }
                r
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandRange {
    pub min: f64,
    pub argmin: usize,
    pub max: f64,
    pub argmax: usize,
}

impl BandRange {
    pub fn width(&self) -> f64 {
        self.max - self.min
    }
}

fn solve_point(model: &LatticeModel, k: &[f64], with_vectors: bool) -> Result<(Vec<f64>, Option<DMatrix<Complex64>>)> {
    let attach = |e: Error| Error::AtPoint {
        k: k.to_vec(),
        source: Box::new(e),
    };
    let m = assemble_fiber_raw(model, k).map_err(attach)?;
    if with_vectors {
        let sys = solve_matrix(m).map_err(attach)?;
        Ok((sys.values, Some(sys.vectors)))
    } else {
        Ok((eigenvalues(m).map_err(attach)?, None))
    }
}

pub fn band_functions(model: &LatticeModel, grid: &CharacterGrid, opts: BandOptions) -> Result<BandData> {
    if grid.rank() != model.rank() {
        return Err(Error::input(format!(
            "grid rank {} does not match model rank {}",
            grid.rank(),
            model.rank()
        )));
    }
    let points: Vec<&[f64]> = grid.iter().collect();
    let solve = |k: &&[f64]| solve_point(model, k, opts.with_vectors);

    #[cfg(feature = "parallel")]
    let results: Vec<_> = if opts.parallel {
        use rayon::prelude::*;
        points.par_iter().map(solve).collect::<Result<_>>()?
    } else {
        points.iter().map(solve).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = points.iter().map(solve).collect::<Result<_>>()?;

    let band_count = model.sites();
    let mut energies = Vec::with_capacity(grid.len() * band_count);
    let mut vectors = opts.with_vectors.then(|| Vec::with_capacity(grid.len()));
    for (e, v) in results {
        energies.extend_from_slice(&e);
        if let (Some(all), Some(v)) = (vectors.as_mut(), v) {
            all.push(v);
        }
    }
    Ok(BandData {
        grid: grid.clone(),
        band_count,
        energies,
        vectors,
    })
}

/// Sorted, pairwise disjoint closed intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumIntervals {
    pub intervals: Vec<[f64; 2]>,
}

impl SpectrumIntervals {
    /// Merges overlapping ranges, and ranges separated by at most `touch`.
    pub fn merge(mut ranges: Vec<[f64; 2]>, touch: f64) -> Self {
        ranges.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        let mut out: Vec<[f64; 2]> = Vec::with_capacity(ranges.len());
        for r in ranges {
            match out.last_mut() {
                Some(last) if r[0] <= last[1] + touch => last[1] = last[1].max(r[1]),
                _ => out.push(r),
            }
        }
        SpectrumIntervals { intervals: out }
    }

    pub fn contains(&self, e: f64, tol: f64) -> bool {
        self.intervals.iter().any(|[lo, hi]| e >= lo - tol && e <= hi + tol)
    }

    /// Every interval of `self` lies inside some interval of `other`, up to `tol`.
    pub fn is_subset_of(&self, other: &SpectrumIntervals, tol: f64) -> bool {
        self.intervals.iter().all(|[lo, hi]| {
            other
                .intervals
                .iter()
                .any(|[olo, ohi]| *lo >= olo - tol && *hi <= ohi + tol)
        })
    }
}

/// Relative tolerance under which touching band ranges are merged.
pub const TOUCH_TOL: f64 = 1e-10;

pub fn spectrum_union(bands: &BandData) -> SpectrumIntervals {
    let ranges = bands.band_ranges().iter().map(|r| [r.min, r.max]).collect();
    SpectrumIntervals::merge(ranges, TOUCH_TOL * bands.scale())
}

/// Band ranges with every endpoint refined by golden-section searches in `k`
/// started from the grid extremum.
pub fn polished_band_ranges(model: &LatticeModel, bands: &BandData) -> Result<Vec<[f64; 2]>> {
    let grid = bands.grid();
    let h = 1.0 / grid.points_per_dim() as f64;
    bands
        .band_ranges()
        .iter()
        .enumerate()
        .map(|(n, r)| {
            let lo = polish_extremum(model, n, grid.coords(r.argmin), h, 1.0)?.min(r.min);
            let hi = (-polish_extremum(model, n, grid.coords(r.argmax), h, -1.0)?).max(r.max);
            Ok([lo, hi])
        })
        .collect()
}

pub fn spectrum_union_polished(model: &LatticeModel, bands: &BandData) -> Result<SpectrumIntervals> {
    let ranges = polished_band_ranges(model, bands)?;
    Ok(SpectrumIntervals::merge(ranges, TOUCH_TOL * bands.scale()))
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

fn golden_min(f: &mut dyn FnMut(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

/// Minimizes `sign * E_n(k)` by cyclic coordinate golden-section searches
/// within one grid spacing of `start`; returns the minimal `sign * E_n`.
fn polish_extremum(model: &LatticeModel, n: usize, start: &[f64], h: f64, sign: f64) -> Result<f64> {
    let eval = |k: &[f64]| -> Result<f64> {
        let e = eigenvalues(assemble_fiber_raw(model, k)?)?;
        Ok(sign * e[n])
    };
    let mut k = start.to_vec();
    let mut best = eval(&k)?;
    for _sweep in 0..8 {
        let before = best;
        for axis in 0..k.len() {
            let centre = k[axis];
            let mut probe = k.clone();
            let mut f = |t: f64| {
                probe[axis] = t;
                eval(&probe)
            };
            let (t, v) = golden_min(&mut f, centre - h, centre + h, 1e-10)?;
            if v < best {
                best = v;
                k[axis] = t;
            }
        }
        if before - best <= 1e-15 * best.abs().max(1.0) {
            break;
        }
    }
    Ok(best)
}
