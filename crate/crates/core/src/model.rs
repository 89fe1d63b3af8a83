//! Periodic lattice operators given by hopping tables, and the built-in
//! model library.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::MAX_RANK;
use crate::magnetic::{Flux, FluxData};

/// Matrix element `H[(from, c), (to, c + offset)] = amplitude` for every cell `c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hopping {
    pub from: usize,
    pub to: usize,
    pub offset: Vec<i64>,
    pub amplitude: Complex64,
}

impl Hopping {
    pub fn new(from: usize, to: usize, offset: impl Into<Vec<i64>>, amplitude: Complex64) -> Self {
        Hopping {
            from,
            to,
            offset: offset.into(),
            amplitude,
        }
    }

    pub fn reversed(&self) -> Hopping {
        Hopping {
            from: self.to,
            to: self.from,
            offset: self.offset.iter().map(|g| -g).collect(),
            amplitude: self.amplitude.conj(),
        }
    }

    fn is_self_adjoint(&self) -> bool {
        self.from == self.to && self.offset.iter().all(|&g| g == 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ModelKind {
    TightBinding,
    /// Finite-difference discretization with `grid_per_dim` points per axis
    /// on the fundamental domain.
    ContinuumFd {
        grid_per_dim: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeModel {
    name: String,
    kind: ModelKind,
    rank: usize,
    sites: usize,
    hoppings: Vec<Hopping>,
    flux: FluxData,
}

/// Accumulates hoppings together with their Hermitian partners.
#[derive(Default)]
pub struct HoppingList {
    hoppings: Vec<Hopping>,
}

impl HoppingList {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `t` and its reverse `(to, from, -offset, conj t)`.
    pub fn pair(&mut self, from: usize, to: usize, offset: impl Into<Vec<i64>>, t: Complex64) -> &mut Self {
        let h = Hopping::new(from, to, offset, t);
        if h.is_self_adjoint() {
            self.hoppings.push(Hopping {
                amplitude: Complex64::new(t.re, 0.0),
                ..h
            });
        } else {
            self.hoppings.push(h.reversed());
            self.hoppings.push(h);
        }
        self
    }

    pub fn onsite(&mut self, site: usize, rank: usize, v: f64) -> &mut Self {
        self.hoppings
            .push(Hopping::new(site, site, vec![0; rank], Complex64::new(v, 0.0)));
        self
    }

    pub fn into_vec(self) -> Vec<Hopping> {
        self.hoppings
    }
}

impl LatticeModel {
    /// Validates indices, finiteness and Hermitian closure of the table.
    pub fn tight_binding(
        name: impl Into<String>,
        rank: usize,
        sites: usize,
        hoppings: Vec<Hopping>,
        flux: FluxData,
    ) -> Result<Self> {
        let model = LatticeModel {
            name: name.into(),
            kind: ModelKind::TightBinding,
            rank,
            sites,
            hoppings,
            flux,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.rank == 0 || self.rank > MAX_RANK {
            return Err(Error::model(format!("rank {} unsupported", self.rank)));
        }
        if self.sites == 0 {
            return Err(Error::model("model needs at least one site per cell"));
        }
        let mut table: BTreeMap<(usize, usize, Vec<i64>), Complex64> = BTreeMap::new();
        let mut scale = 0.0_f64;
        for h in &self.hoppings {
            if h.from >= self.sites || h.to >= self.sites {
                return Err(Error::model(format!(
                    "hopping {} -> {} references a site outside 0..{}",
                    h.from, h.to, self.sites
                )));
            }
            if h.offset.len() != self.rank {
                return Err(Error::model(format!(
                    "hopping offset {:?} does not have rank {}",
                    h.offset, self.rank
                )));
            }
            if !(h.amplitude.re.is_finite() && h.amplitude.im.is_finite()) {
                return Err(Error::model("hopping amplitude is not finite"));
            }
            scale = scale.max(h.amplitude.norm());
            *table
                .entry((h.from, h.to, h.offset.clone()))
                .or_insert(Complex64::new(0.0, 0.0)) += h.amplitude;
        }
        let tol = 1e-13 * scale.max(1.0);
        for ((i, j, g), t) in &table {
            let back: Vec<i64> = g.iter().map(|x| -x).collect();
            let partner = table.get(&(*j, *i, back)).copied().unwrap_or(Complex64::new(0.0, 0.0));
            if (partner - t.conj()).norm() > tol {
                return Err(Error::model(format!(
                    "hopping ({i}, {j}, {g:?}) = {t} has no Hermitian partner (found {partner})"
                )));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Fiber dimension `d`.
    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn hoppings(&self) -> &[Hopping] {
        &self.hoppings
    }

    pub fn flux(&self) -> &FluxData {
        &self.flux
    }

    /// Longest cell offset (sup norm) among the hoppings.
    pub fn range(&self) -> i64 {
        self.hoppings
            .iter()
            .flat_map(|h| h.offset.iter().map(|g| g.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Largest absolute row sum; bounds the operator norm of every fiber.
    pub fn norm_bound(&self) -> f64 {
        let mut rows = vec![0.0; self.sites];
        for h in &self.hoppings {
            rows[h.from] += h.amplitude.norm();
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    /// `2 pi sum |t| |gamma|_1`, a Lipschitz constant of `k -> M(k)`.
    pub fn lipschitz_bound(&self) -> f64 {
        TAU * self
            .hoppings
            .iter()
            .map(|h| h.amplitude.norm() * h.offset.iter().map(|g| g.abs() as f64).sum::<f64>())
            .sum::<f64>()
    }

    /// Conjugates by the diagonal unitary `exp(i theta)`: `t_ij -> e^{i(theta_i - theta_j)} t_ij`.
    pub fn gauge_transform(&self, theta: &[f64]) -> Result<LatticeModel> {
        if theta.len() != self.sites {
            return Err(Error::input("gauge needs one phase per site"));
        }
        let mut out = self.clone();
        for h in out.hoppings.iter_mut() {
            h.amplitude *= Complex64::from_polar(1.0, theta[h.from] - theta[h.to]);
        }
        Ok(out)
    }
}

/// One-dimensional chain with nearest-neighbour hopping `-1`.
pub fn free_chain() -> LatticeModel {
    let mut list = HoppingList::new();
    list.pair(0, 0, [1], Complex64::new(-1.0, 0.0));
    LatticeModel::tight_binding("free_chain", 1, 1, list.into_vec(), FluxData::uniform(Flux::zero()))
        .expect("free chain is well formed")
}

/// Discrete Laplacian on `Z^2`: diagonal 4, nearest-neighbour hopping `-1`.
pub fn square_laplacian() -> LatticeModel {
    let mut list = HoppingList::new();
    list.onsite(0, 2, 4.0)
        .pair(0, 0, [1, 0], Complex64::new(-1.0, 0.0))
        .pair(0, 0, [0, 1], Complex64::new(-1.0, 0.0));
    LatticeModel::tight_binding(
        "square_laplacian",
        2,
        1,
        list.into_vec(),
        FluxData::uniform(Flux::zero()),
    )
    .expect("square Laplacian is well formed")
}

/// Harper operator with flux `p/q` per plaquette on the `q x 1` magnetic cell.
///
/// Unit hopping, Landau gauge `a_y(m) = 2 pi (p/q) m`; site `j` of the cell
/// sits at column `j`. Hops leaving the cell along x become cell offsets.
pub fn harper(flux: Flux) -> LatticeModel {
    let q = flux.denom() as usize;
    let one = Complex64::new(1.0, 0.0);
    let mut list = HoppingList::new();
    for j in 0..q {
        // x-direction: column j -> j+1, wrapping into the next magnetic cell
        if j + 1 < q {
            list.pair(j, j + 1, [0, 0], one);
        } else {
            list.pair(j, 0, [1, 0], one);
        }
        // y-direction: H[(j,n),(j,n+1)] = exp(-i a_y(j))
        let phase = -TAU * ((flux.numer() * j as i64).rem_euclid(flux.denom())) as f64 / q as f64;
        list.pair(j, j, [0, 1], Complex64::from_polar(1.0, phase));
    }
    let flux_data = FluxData {
        cell: [q as i64, 1],
        plaquettes: vec![flux.phase(); q],
        uniform: Some(flux),
        total_per_cell: TAU * flux.numer() as f64,
    };
    LatticeModel::tight_binding(format!("harper({flux})"), 2, q, list.into_vec(), flux_data)
        .expect("Harper model is well formed")
}

/// Lieb lattice: corner site 0 and edge-centre sites 1 (x) and 2 (y), hopping `-1`.
pub fn lieb() -> LatticeModel {
    let t = Complex64::new(-1.0, 0.0);
    let mut list = HoppingList::new();
    list.pair(0, 1, [0, 0], t)
        .pair(1, 0, [1, 0], t)
        .pair(0, 2, [0, 0], t)
        .pair(2, 0, [0, 1], t);
    LatticeModel::tight_binding("lieb", 2, 3, list.into_vec(), FluxData::uniform(Flux::zero()))
        .expect("Lieb lattice is well formed")
}

/// `sites` decoupled orbitals with onsite energies and no hopping.
pub fn diagonal(rank: usize, energies: &[f64]) -> Result<LatticeModel> {
    let mut list = HoppingList::new();
    for (i, &v) in energies.iter().enumerate() {
        list.onsite(i, rank, v);
    }
    LatticeModel::tight_binding(
        "diagonal",
        rank,
        energies.len(),
        list.into_vec(),
        FluxData::uniform(Flux::zero()),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PotentialSpec {
    Zero,
    Constant(f64),
    /// `amp * sum_i cos(2 pi x_i)` on the unit fundamental domain.
    Cosine(f64),
    /// Explicit values on the `m^n` grid, row-major.
    Values(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuumSpec {
    pub rank: usize,
    pub grid_per_dim: usize,
    pub potential: PotentialSpec,
    /// Integer flux quanta through the fundamental domain (rank 2 only).
    pub flux_quanta: i64,
    /// Optional periodic scalar `phi` on the grid; adds `d phi` to the link phases.
    pub gauge: Option<Vec<f64>>,
}

impl ContinuumSpec {
    pub fn new(rank: usize, grid_per_dim: usize) -> Self {
        ContinuumSpec {
            rank,
            grid_per_dim,
            potential: PotentialSpec::Zero,
            flux_quanta: 0,
            gauge: None,
        }
    }
}

fn grid_multi(mut idx: usize, m: usize, rank: usize) -> Vec<usize> {
    let mut out = vec![0; rank];
    for slot in out.iter_mut().rev() {
        *slot = idx % m;
        idx /= m;
    }
    out
}

fn grid_flat(multi: &[usize], m: usize) -> usize {
    multi.iter().fold(0, |acc, &j| acc * m + j)
}

/// Second-order central differences for `(d - i a)^*(d - i a) + V` on the
/// fundamental domain, scaled by `m^2`. Links that leave the domain carry the
/// cell offset of the face they cross, so the fiber picks up `chi_k` there.
pub fn continuum(spec: &ContinuumSpec) -> Result<LatticeModel> {
    let ContinuumSpec {
        rank, grid_per_dim: m, ..
    } = *spec;
    if rank == 0 || rank > MAX_RANK {
        return Err(Error::model(format!("continuum rank {rank} unsupported")));
    }
    if m < 4 {
        return Err(Error::model(format!("continuum grid needs m >= 4, got {m}")));
    }
    if spec.flux_quanta != 0 && rank != 2 {
        return Err(Error::model("magnetic flux needs a two-dimensional continuum model"));
    }
    let d = m.pow(rank as u32);
    let potential: Vec<f64> = match &spec.potential {
        PotentialSpec::Zero => vec![0.0; d],
        PotentialSpec::Constant(c) => vec![*c; d],
        PotentialSpec::Cosine(amp) => (0..d)
            .map(|i| {
                grid_multi(i, m, rank)
                    .iter()
                    .map(|&j| amp * (TAU * j as f64 / m as f64).cos())
                    .sum()
            })
            .collect(),
        PotentialSpec::Values(v) => {
            if v.len() != d {
                return Err(Error::model(format!("potential has {} values, grid has {d}", v.len())));
            }
            v.clone()
        }
    };
    if potential.iter().any(|v| !v.is_finite()) {
        return Err(Error::model("potential must be real and finite"));
    }
    if let Some(g) = &spec.gauge {
        if g.len() != d || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::model("gauge scalar needs one finite value per grid point"));
        }
    }

    let scale = (m * m) as f64;
    let p = spec.flux_quanta as f64;
    let mf = m as f64;
    // Landau gauge on the fine grid: plaquette phase 2 pi p / m^2. The wrap
    // links along axis 0 absorb the transition function of the flux bundle.
    let link_phase = |site: &[usize], axis: usize| -> f64 {
        if spec.flux_quanta == 0 {
            return 0.0;
        }
        match axis {
            0 if site[0] == m - 1 => -TAU * p * site[1] as f64 / mf,
            0 => 0.0,
            _ => TAU * p * site[0] as f64 / (mf * mf),
        }
    };

    let mut list = HoppingList::new();
    for i in 0..d {
        list.onsite(i, rank, 2.0 * rank as f64 * scale + potential[i]);
        let here = grid_multi(i, m, rank);
        for axis in 0..rank {
            let mut there = here.clone();
            let mut offset = vec![0i64; rank];
            if here[axis] + 1 == m {
                there[axis] = 0;
                offset[axis] = 1;
            } else {
                there[axis] += 1;
            }
            let j = grid_flat(&there, m);
            let mut a = link_phase(&here, axis);
            if let Some(g) = &spec.gauge {
                a += g[j] - g[i];
            }
            list.pair(i, j, offset, Complex64::from_polar(-scale, -a));
        }
    }
    let name = format!("continuum(m={m},flux={})", spec.flux_quanta);
    let flux = FluxData {
        cell: [1, 1],
        plaquettes: vec![TAU * p],
        uniform: Some(Flux::new(spec.flux_quanta, 1)?),
        total_per_cell: TAU * p,
    };
    let mut model = LatticeModel::tight_binding(name, rank, d, list.into_vec(), flux)?;
    model.kind = ModelKind::ContinuumFd { grid_per_dim: m };
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_closed() {
        for m in [
            free_chain(),
            square_laplacian(),
            harper(Flux::new(2, 5).unwrap()),
            lieb(),
        ] {
            assert!(m.validate().is_ok(), "{}", m.name());
        }
    }

    #[test]
    fn open_hopping_list_is_rejected() {
        let h = vec![Hopping::new(0, 0, vec![1], Complex64::new(-1.0, 0.0))];
        let err = LatticeModel::tight_binding("broken", 1, 1, h, FluxData::uniform(Flux::zero()));
        assert!(matches!(err, Err(Error::Model(m)) if m.contains("partner")));
    }

    #[test]
    fn bad_indices_are_rejected() {
        let h = vec![Hopping::new(0, 3, vec![0], Complex64::new(1.0, 0.0))];
        assert!(LatticeModel::tight_binding("x", 1, 2, h, FluxData::uniform(Flux::zero())).is_err());
        let h = vec![Hopping::new(0, 0, vec![0, 0], Complex64::new(1.0, 0.0))];
        assert!(LatticeModel::tight_binding("x", 1, 1, h, FluxData::uniform(Flux::zero())).is_err());
    }

    #[test]
    fn continuum_validation() {
        assert!(continuum(&ContinuumSpec::new(1, 3)).is_err());
        let mut spec = ContinuumSpec::new(1, 8);
        spec.potential = PotentialSpec::Values(vec![0.0, f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(continuum(&spec).is_err());
        let mut spec = ContinuumSpec::new(1, 8);
        spec.flux_quanta = 1;
        assert!(continuum(&spec).is_err());
        let m = continuum(&ContinuumSpec::new(2, 4)).unwrap();
        assert_eq!(m.sites(), 16);
        assert_eq!(m.kind(), &ModelKind::ContinuumFd { grid_per_dim: 4 });
    }

    #[test]
    fn harper_flux_bookkeeping() {
        let m = harper(Flux::new(1, 3).unwrap());
        assert_eq!(m.sites(), 3);
        assert!(crate::magnetic::is_integral_flux(m.flux()));
        assert_eq!(m.range(), 1);
    }

    #[test]
    fn norm_bound_of_laplacian() {
        assert_eq!(square_laplacian().norm_bound(), 8.0);
        assert!((free_chain().lipschitz_bound() - 2.0 * TAU).abs() < 1e-15);
    }
}
