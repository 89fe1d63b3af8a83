//! The symmetry lattice `Z^n`, its character torus with normalized Haar
//! measure, uniform sampling grids, and superlattices for rational flux.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::magnetic::Flux;

pub const MAX_RANK: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeGroup {
    rank: usize,
    generator_labels: Vec<String>,
}

impl LatticeGroup {
    pub fn new(rank: usize) -> Result<Self> {
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::input(format!(
                "lattice rank must be in 1..={MAX_RANK}, got {rank}"
            )));
        }
        let generator_labels = (1..=rank).map(|i| format!("e{i}")).collect();
        Ok(LatticeGroup { rank, generator_labels })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn generator_labels(&self) -> &[String] {
        &self.generator_labels
    }

    /// Standard basis vectors of `Z^n`.
    pub fn generators(&self) -> Vec<Vec<i64>> {
        (0..self.rank)
            .map(|i| {
                let mut g = vec![0; self.rank];
                g[i] = 1;
                g
            })
            .collect()
    }
}

/// A point `k` of the torus `[0,1)^n`, standing for `gamma -> exp(2 pi i k.gamma)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Character {
    k: Vec<f64>,
}

impl Character {
    /// Builds a character, reducing every coordinate into `[0, 1)`.
    pub fn new(k: impl Into<Vec<f64>>) -> Result<Self> {
        let mut k = k.into();
        if k.is_empty() || k.len() > MAX_RANK {
            return Err(Error::input(format!(
                "character needs 1..={MAX_RANK} coordinates, got {}",
                k.len()
            )));
        }
        for c in k.iter_mut() {
            if !c.is_finite() {
                return Err(Error::input("character coordinate is not finite"));
            }
            *c = reduce_unit(*c);
        }
        Ok(Character { k })
    }

    pub fn trivial(rank: usize) -> Self {
        Character { k: vec![0.0; rank] }
    }

    pub fn coords(&self) -> &[f64] {
        &self.k
    }

    pub fn rank(&self) -> usize {
        self.k.len()
    }

    /// Geodesic distance on the flat torus (minimum image, Euclidean).
    pub fn torus_distance(&self, other: &Character) -> f64 {
        self.k
            .iter()
            .zip(&other.k)
            .map(|(a, b)| {
                let d = (a - b).abs();
                let d = d.min(1.0 - d);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

fn reduce_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Nearest-integer reduction to `[-1/2, 1/2]`; odd in `x`, so that
/// `chi_k(-gamma)` is the exact conjugate of `chi_k(gamma)`.
fn reduce_centered(x: f64) -> f64 {
    x - x.round()
}

/// `exp(2 pi i t)` with exact values at quarter turns.
pub(crate) fn unit_phase(t: f64) -> Complex64 {
    let t = reduce_centered(t);
    if t == 0.0 {
        Complex64::new(1.0, 0.0)
    } else if t == 0.25 {
        Complex64::new(0.0, 1.0)
    } else if t.abs() == 0.5 {
        Complex64::new(-1.0, 0.0)
    } else if t == -0.25 {
        Complex64::new(0.0, -1.0)
    } else {
        let (s, c) = (TAU * t).sin_cos();
        Complex64::new(c, s)
    }
}

/// Raw pairing without dimension checks; `gamma.len()` must match.
#[inline]
pub(crate) fn pairing_unchecked(k: &[f64], gamma: &[i64]) -> Complex64 {
    // Exact product splitting keeps the fractional part accurate to a few
    // ulp of 1 even for long lattice vectors.
    let t: f64 = k
        .iter()
        .zip(gamma)
        .map(|(&ki, &gi)| {
            let g = gi as f64;
            let prod = ki * g;
            let err = ki.mul_add(g, -prod);
            reduce_centered(prod) + err
        })
        .sum();
    unit_phase(t)
}

/// `chi_k(gamma) = exp(2 pi i k . gamma)`.
pub fn character_pairing(k: &Character, gamma: &[i64]) -> Result<Complex64> {
    if gamma.len() != k.rank() {
        return Err(Error::input(format!(
            "lattice vector has dimension {}, character has rank {}",
            gamma.len(),
            k.rank()
        )));
    }
    Ok(pairing_unchecked(&k.k, gamma))
}

/// Uniform `N^n` grid on the torus with equal Haar weights `1/N^n`.
///
/// Points are stored row-major: the first coordinate varies slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacterGrid {
    rank: usize,
    points_per_dim: usize,
    coords: Vec<f64>,
}

impl CharacterGrid {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.rank
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.len() as f64
    }

    pub fn coords(&self, index: usize) -> &[f64] {
        &self.coords[index * self.rank..(index + 1) * self.rank]
    }

    pub fn point(&self, index: usize) -> Character {
        Character {
            k: self.coords(index).to_vec(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.rank)
    }

    /// Integer grid coordinates `(j_1, ..., j_n)` of a flat index.
    pub fn multi_index(&self, mut index: usize) -> Vec<usize> {
        let n = self.points_per_dim;
        let mut out = vec![0; self.rank];
        for slot in out.iter_mut().rev() {
            *slot = index % n;
            index /= n;
        }
        out
    }

    /// Flat index of integer grid coordinates, wrapped periodically.
    pub fn flat_index(&self, multi: &[i64]) -> usize {
        let n = self.points_per_dim as i64;
        multi
            .iter()
            .fold(0usize, |acc, &j| acc * n as usize + j.rem_euclid(n) as usize)
    }

    /// Sum of all Haar weights with Neumaier compensation.
    pub fn weight_sum(&self) -> f64 {
        let w = self.weight();
        let mut sum = 0.0_f64;
        let mut comp = 0.0_f64;
        for _ in 0..self.len() {
            let t = sum + w;
            if sum.abs() >= w.abs() {
                comp += (sum - t) + w;
            } else {
                comp += (w - t) + sum;
            }
            sum = t;
        }
        sum + comp
    }

    /// Haar average of `chi_k(gamma)` over the grid.
    pub fn character_sum(&self, gamma: &[i64]) -> Result<Complex64> {
        if gamma.len() != self.rank {
            return Err(Error::input("lattice vector dimension does not match grid"));
        }
        let total: Complex64 = self.iter().map(|k| pairing_unchecked(k, gamma)).sum();
        Ok(total / self.len() as f64)
    }
}

pub fn haar_grid(lattice: &LatticeGroup, points_per_dim: usize) -> Result<CharacterGrid> {
    if points_per_dim == 0 {
        return Err(Error::input("grid needs at least one point per dimension"));
    }
    let rank = lattice.rank();
    let total = points_per_dim
        .checked_pow(rank as u32)
        .ok_or_else(|| Error::input("grid size overflows"))?;
    let mut grid = CharacterGrid {
        rank,
        points_per_dim,
        coords: Vec::with_capacity(total * rank),
    };
    for i in 0..total {
        for j in grid.multi_index(i) {
            grid.coords.push(j as f64 / points_per_dim as f64);
        }
    }
    Ok(grid)
}

/// A finite-index sublattice, generated by the columns of `index_matrix`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Superlattice {
    index_matrix: Vec<Vec<i64>>,
    index: u64,
}

impl Superlattice {
    pub fn index_matrix(&self) -> &[Vec<i64>] {
        &self.index_matrix
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn generators(&self) -> Vec<Vec<i64>> {
        let n = self.index_matrix.len();
        (0..n)
            .map(|c| (0..n).map(|r| self.index_matrix[r][c]).collect())
            .collect()
    }
}

/// Enlarges the unit cell along the first axis so a uniform flux `p/q` per
/// plaquette becomes the integer `p` per cell.
pub fn superlattice_for_flux(flux: Flux, lattice: &LatticeGroup) -> Result<Superlattice> {
    if lattice.rank() != 2 {
        return Err(Error::input(format!(
            "magnetic superlattices are two-dimensional, lattice has rank {}",
            lattice.rank()
        )));
    }
    let q = flux.denom();
    Ok(Superlattice {
        index_matrix: vec![vec![q, 0], vec![0, 1]],
        index: q as u64,
    })
}
