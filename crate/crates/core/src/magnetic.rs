//! Discrete magnetic data on the square lattice `Z^2`.
//!
//! A vector potential assigns a real phase `a(e)` to every directed edge,
//! with `a(reversed e) = -a(e)`. The magnetic Hamiltonian uses the minimal
//! coupling convention: the amplitude for hopping from `y` into `x` carries
//! the factor `exp(-i a(x -> y))`. Translations act on potentials by pulling
//! back along `gamma^-1`, i.e. `(gamma.a)(e) = a(e - gamma)`, and a gauge
//! function `chi_gamma` solves `d chi_gamma = a - gamma.a`. The magnetic
//! translation `(T_gamma s)(x) = exp(i chi_gamma(x)) s(x - gamma)` then
//! commutes with the Hamiltonian whenever the field is periodic.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Site = [i64; 2];

/// Rational flux `p/q` per plaquette, in units of the flux quantum (phase `2 pi p/q`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Flux {
    p: i64,
    q: i64,
}

impl Flux {
    /// Reduces to lowest terms with a positive denominator.
    pub fn new(p: i64, q: i64) -> Result<Self> {
        if q == 0 {
            return Err(Error::input("flux denominator must be nonzero"));
        }
        let g = p.gcd(&q).max(1);
        let (mut p, mut q) = (p / g, q / g);
        if q < 0 {
            p = -p;
            q = -q;
        }
        Ok(Flux { p, q })
    }

    pub fn zero() -> Self {
        Flux { p: 0, q: 1 }
    }

    pub fn numer(&self) -> i64 {
        self.p
    }

    pub fn denom(&self) -> i64 {
        self.q
    }

    pub fn value(&self) -> f64 {
        self.p as f64 / self.q as f64
    }

    pub fn is_integral(&self) -> bool {
        self.q == 1
    }

    /// Phase per plaquette, `2 pi p/q`.
    pub fn phase(&self) -> f64 {
        TAU * self.value()
    }
}

impl std::fmt::Display for Flux {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.p, self.q)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn unit(self) -> Site {
        match self {
            Axis::X => [1, 0],
            Axis::Y => [0, 1],
        }
    }
}

fn add(a: Site, b: Site) -> Site {
    [a[0] + b[0], a[1] + b[1]]
}

fn sub(a: Site, b: Site) -> Site {
    [a[0] - b[0], a[1] - b[1]]
}

/// Phases on the positively oriented edges `site -> site + e_axis`.
pub trait VectorPotential: Send + Sync {
    fn edge(&self, site: Site, axis: Axis) -> f64;

    /// Phase on the directed nearest-neighbour edge `from -> to`.
    fn directed(&self, from: Site, to: Site) -> f64 {
        match sub(to, from) {
            [1, 0] => self.edge(from, Axis::X),
            [-1, 0] => -self.edge(to, Axis::X),
            [0, 1] => self.edge(from, Axis::Y),
            [0, -1] => -self.edge(to, Axis::Y),
            d => panic!("{from:?} -> {to:?} is not a lattice edge (step {d:?})"),
        }
    }

    /// Counter-clockwise edge sum around the plaquette with lower-left corner `site`.
    fn plaquette(&self, site: Site) -> f64 {
        self.edge(site, Axis::X) + self.edge(add(site, [1, 0]), Axis::Y)
            - self.edge(add(site, [0, 1]), Axis::X)
            - self.edge(site, Axis::Y)
    }
}

impl<T: VectorPotential + ?Sized> VectorPotential for &T {
    fn edge(&self, site: Site, axis: Axis) -> f64 {
        (**self).edge(site, axis)
    }
}

impl<T: VectorPotential + ?Sized> VectorPotential for Box<T> {
    fn edge(&self, site: Site, axis: Axis) -> f64 {
        (**self).edge(site, axis)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroPotential;

impl VectorPotential for ZeroPotential {
    fn edge(&self, _: Site, _: Axis) -> f64 {
        0.0
    }
}

/// Landau gauge for uniform flux: zero on x-edges, `2 pi phi m` on the
/// y-edges of column `m`.
#[derive(Clone, Copy, Debug)]
pub struct LandauGauge {
    pub flux: Flux,
}

impl VectorPotential for LandauGauge {
    fn edge(&self, site: Site, axis: Axis) -> f64 {
        match axis {
            Axis::X => 0.0,
            Axis::Y => TAU * (self.flux.numer() * site[0]) as f64 / self.flux.denom() as f64,
        }
    }
}

/// Discrete gradient `a(x -> y) = phi(y) - phi(x)` of a scalar.
pub struct GradientPotential<F> {
    pub scalar: F,
}

impl<F: Fn(Site) -> f64 + Send + Sync> VectorPotential for GradientPotential<F> {
    fn edge(&self, site: Site, axis: Axis) -> f64 {
        (self.scalar)(add(site, axis.unit())) - (self.scalar)(site)
    }
}

/// `base + d(phi)`: the gauge-transformed potential.
pub struct GaugeShifted<A, F> {
    pub base: A,
    pub scalar: F,
}

impl<A: VectorPotential, F: Fn(Site) -> f64 + Send + Sync> VectorPotential for GaugeShifted<A, F> {
    fn edge(&self, site: Site, axis: Axis) -> f64 {
        self.base.edge(site, axis) + (self.scalar)(add(site, axis.unit())) - (self.scalar)(site)
    }
}

/// Edge table over one cell `[0,Lx) x [0,Ly)`, repeated periodically.
#[derive(Clone, Debug)]
pub struct PeriodicPotential {
    period: [i64; 2],
    x_edges: Vec<f64>,
    y_edges: Vec<f64>,
}

impl PeriodicPotential {
    /// `edges` lists `(site, axis, phase)` for positively oriented edges
    /// starting inside the cell; every such edge must be present exactly once.
    pub fn from_edges(period: [i64; 2], edges: &[(Site, Axis, f64)]) -> Result<Self> {
        if period[0] < 1 || period[1] < 1 {
            return Err(Error::input("potential period must be positive"));
        }
        let cells = (period[0] * period[1]) as usize;
        let mut x_edges = vec![None; cells];
        let mut y_edges = vec![None; cells];
        for &(site, axis, value) in edges {
            if !(0..period[0]).contains(&site[0]) || !(0..period[1]).contains(&site[1]) {
                return Err(Error::input(format!("edge at {site:?} lies outside the cell")));
            }
            if !value.is_finite() {
                return Err(Error::input(format!("edge phase at {site:?} is not finite")));
            }
            let idx = (site[1] * period[0] + site[0]) as usize;
            let slot = match axis {
                Axis::X => &mut x_edges[idx],
                Axis::Y => &mut y_edges[idx],
            };
            if slot.replace(value).is_some() {
                return Err(Error::input(format!("edge {site:?} {axis:?} given twice")));
            }
        }
        let collect = |v: Vec<Option<f64>>, axis: Axis| -> Result<Vec<f64>> {
            v.into_iter()
                .enumerate()
                .map(|(i, e)| {
                    e.ok_or_else(|| {
                        let i = i as i64;
                        Error::input(format!("missing {axis:?} edge at {:?}", [i % period[0], i / period[0]]))
                    })
                })
                .collect()
        };
        Ok(PeriodicPotential {
            period,
            x_edges: collect(x_edges, Axis::X)?,
            y_edges: collect(y_edges, Axis::Y)?,
        })
    }

    pub fn period(&self) -> [i64; 2] {
        self.period
    }
}

impl VectorPotential for PeriodicPotential {
    fn edge(&self, site: Site, axis: Axis) -> f64 {
        let x = site[0].rem_euclid(self.period[0]);
        let y = site[1].rem_euclid(self.period[1]);
        let idx = (y * self.period[0] + x) as usize;
        match axis {
            Axis::X => self.x_edges[idx],
            Axis::Y => self.y_edges[idx],
        }
    }
}

/// `gamma.a`, the potential transported by `gamma`: `e -> a(e - gamma)`.
pub struct Translated<'a> {
    pub base: &'a dyn VectorPotential,
    pub gamma: Site,
}

impl VectorPotential for Translated<'_> {
    fn edge(&self, site: Site, axis: Axis) -> f64 {
        self.base.edge(sub(site, self.gamma), axis)
    }
}

fn reduce_phase(x: f64) -> f64 {
    // into (-pi, pi]
    let r = (x + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

fn phases_agree(a: f64, b: f64, tol: f64) -> bool {
    reduce_phase(a - b).abs() <= tol
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxData {
    /// Cell size over which plaquettes were summed.
    pub cell: [i64; 2],
    /// Raw plaquette sums, row-major with x fastest.
    pub plaquettes: Vec<f64>,
    /// Exact flux per plaquette when known to be uniform and rational.
    pub uniform: Option<Flux>,
    /// Total phase through the cell (sum of raw plaquettes).
    pub total_per_cell: f64,
}

impl FluxData {
    /// One plaquette carrying the uniform rational flux.
    pub fn uniform(flux: Flux) -> Self {
        FluxData {
            cell: [1, 1],
            plaquettes: vec![flux.phase()],
            uniform: Some(flux),
            total_per_cell: flux.phase(),
        }
    }

    /// Plaquette phases reduced into `(-pi, pi]`.
    pub fn reduced(&self) -> Vec<f64> {
        self.plaquettes.iter().map(|&b| reduce_phase(b)).collect()
    }

    pub fn plaquette(&self, x: i64, y: i64) -> f64 {
        let x = x.rem_euclid(self.cell[0]);
        let y = y.rem_euclid(self.cell[1]);
        self.plaquettes[(y * self.cell[0] + x) as usize]
    }
}

/// Plaquette sums of `a` over the cell `[0,Lx) x [0,Ly)`; the field must
/// repeat (mod `2 pi`) under unit translations.
pub fn flux_from_potential(a: &dyn VectorPotential, cell: [i64; 2]) -> Result<FluxData> {
    if cell[0] < 1 || cell[1] < 1 {
        return Err(Error::input("flux cell must be nonempty"));
    }
    let mut plaquettes = Vec::with_capacity((cell[0] * cell[1]) as usize);
    let mut scale = 1.0_f64;
    for y in 0..cell[1] {
        for x in 0..cell[0] {
            let b = a.plaquette([x, y]);
            if !b.is_finite() {
                return Err(Error::input(format!("non-finite phase near plaquette {:?}", [x, y])));
            }
            scale = scale.max(a.edge([x, y], Axis::Y).abs());
            plaquettes.push(b);
        }
    }
    let tol = 1e-12 * scale.max(1.0) * 8.0;
    for y in 0..cell[1] {
        for x in 0..cell[0] {
            for shift in [[1, 0], [0, 1]] {
                let there = a.plaquette([x + shift[0], y + shift[1]]);
                let here = plaquettes[(((y + shift[1]) % cell[1]) * cell[0] + (x + shift[0]) % cell[0]) as usize];
                if !phases_agree(there, here, tol) {
                    return Err(Error::contract(format!(
                        "field is not periodic: plaquette {:?} differs from its translate",
                        [x + shift[0], y + shift[1]]
                    )));
                }
            }
        }
    }
    let total_per_cell = plaquettes.iter().sum();
    Ok(FluxData {
        cell,
        plaquettes,
        uniform: None,
        total_per_cell,
    })
}

/// Total flux through the cell is an integer number of flux quanta.
pub fn is_integral_flux(flux: &FluxData) -> bool {
    if let Some(f) = flux.uniform {
        let cells = flux.cell[0] * flux.cell[1];
        return (f.numer() * cells) % f.denom() == 0;
    }
    let quanta = flux.total_per_cell / TAU;
    (quanta - quanta.round()).abs() <= 1e-12 * quanta.abs().max(1.0)
}

/// Axis-aligned rectangle of sites `origin + [0,w) x [0,h)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Patch {
    pub origin: Site,
    pub size: [i64; 2],
}

impl Patch {
    pub fn new(origin: Site, size: [i64; 2]) -> Self {
        Patch { origin, size }
    }

    /// Square patch `[-r, r]^2` centred on the origin.
    pub fn centered(radius: i64) -> Self {
        Patch {
            origin: [-radius, -radius],
            size: [2 * radius + 1, 2 * radius + 1],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.size[0] <= 0 || self.size[1] <= 0
    }

    pub fn len(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            (self.size[0] * self.size[1]) as usize
        }
    }

    pub fn contains(&self, s: Site) -> bool {
        (0..2).all(|i| s[i] >= self.origin[i] && s[i] < self.origin[i] + self.size[i])
    }

    pub fn index(&self, s: Site) -> usize {
        ((s[1] - self.origin[1]) * self.size[0] + (s[0] - self.origin[0])) as usize
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        let [ox, oy] = self.origin;
        let [w, h] = self.size;
        (0..h.max(0)).flat_map(move |y| (0..w.max(0)).map(move |x| [ox + x, oy + y]))
    }

    /// Sites at distance at least `margin` from the boundary.
    pub fn shrink(&self, margin: i64) -> Patch {
        Patch {
            origin: [self.origin[0] + margin, self.origin[1] + margin],
            size: [self.size[0] - 2 * margin, self.size[1] - 2 * margin],
        }
    }

    pub fn intersect(&self, other: &Patch) -> Patch {
        let lo = [self.origin[0].max(other.origin[0]), self.origin[1].max(other.origin[1])];
        let hi = [
            (self.origin[0] + self.size[0]).min(other.origin[0] + other.size[0]),
            (self.origin[1] + self.size[1]).min(other.origin[1] + other.size[1]),
        ];
        Patch {
            origin: lo,
            size: [hi[0] - lo[0], hi[1] - lo[1]],
        }
    }

    pub fn translate(&self, gamma: Site) -> Patch {
        Patch {
            origin: add(self.origin, gamma),
            size: self.size,
        }
    }
}

/// Complex values on a patch.
#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    pub patch: Patch,
    pub values: Vec<Complex64>,
}

impl Section {
    pub fn from_fn(patch: Patch, f: impl Fn(Site) -> Complex64) -> Self {
        Section {
            patch,
            values: patch.sites().map(f).collect(),
        }
    }

    pub fn random(patch: Patch, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Section {
            patch,
            values: (0..patch.len())
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        }
    }

    pub fn get(&self, s: Site) -> Complex64 {
        self.values[self.patch.index(s)]
    }

    pub fn restrict(&self, patch: Patch) -> Section {
        Section::from_fn(patch, |s| self.get(s))
    }

    pub fn norm2(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest pointwise difference on the overlap of the two patches.
    pub fn max_diff(&self, other: &Section) -> f64 {
        let common = self.patch.intersect(&other.patch);
        common
            .sites()
            .map(|s| (self.get(s) - other.get(s)).norm())
            .fold(0.0, f64::max)
    }
}

/// Which order to walk a lattice path: along x first, or along y first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathOrder {
    XFirst,
    YFirst,
}

fn walk_axis(w: &dyn Fn(Site, Axis) -> f64, from: Site, to_coord: i64, axis: Axis) -> (f64, Site) {
    let i = match axis {
        Axis::X => 0,
        Axis::Y => 1,
    };
    let mut sum = 0.0;
    let mut s = from;
    while s[i] < to_coord {
        sum += w(s, axis);
        s[i] += 1;
    }
    while s[i] > to_coord {
        s[i] -= 1;
        sum -= w(s, axis);
    }
    (sum, s)
}

/// Sum of the edge form `w` along the axis-ordered path `from -> to`.
pub fn path_sum(w: &dyn Fn(Site, Axis) -> f64, from: Site, to: Site, order: PathOrder) -> f64 {
    match order {
        PathOrder::XFirst => {
            let (a, mid) = walk_axis(w, from, to[0], Axis::X);
            let (b, _) = walk_axis(w, mid, to[1], Axis::Y);
            a + b
        }
        PathOrder::YFirst => {
            let (a, mid) = walk_axis(w, from, to[1], Axis::Y);
            let (b, _) = walk_axis(w, mid, to[0], Axis::X);
            a + b
        }
    }
}

#[derive(Clone, Debug)]
pub struct GaugeFunction {
    pub gamma: Site,
    pub base_point: Site,
    pub patch: Patch,
    pub values: Vec<f64>,
    /// Largest disagreement between the x-first and y-first path sums.
    pub path_discrepancy: f64,
}

impl GaugeFunction {
    pub fn get(&self, s: Site) -> f64 {
        self.values[self.patch.index(s)]
    }
}

/// `chi_gamma(x) = sum over the canonical path base -> x of (a - gamma.a)`.
pub fn gauge_function(gamma: Site, a: &dyn VectorPotential, base_point: Site, patch: Patch) -> Result<GaugeFunction> {
    if !patch.contains(base_point) {
        return Err(Error::input(format!(
            "base point {base_point:?} lies outside the patch"
        )));
    }
    let shifted = Translated { base: a, gamma };
    let w = |s: Site, axis: Axis| a.edge(s, axis) - shifted.edge(s, axis);

    let mut scale = 1.0_f64;
    for s in patch.sites() {
        scale = scale.max(a.edge(s, Axis::X).abs()).max(a.edge(s, Axis::Y).abs());
    }
    // a - gamma.a must be closed: its curl is b - gamma.b
    for s in patch.sites() {
        if !patch.contains(add(s, [1, 1])) {
            continue;
        }
        let curl = w(s, Axis::X) + w(add(s, [1, 0]), Axis::Y) - w(add(s, [0, 1]), Axis::X) - w(s, Axis::Y);
        if curl.abs() > 1e-10 * scale {
            return Err(Error::contract(format!(
                "field is not invariant under {gamma:?}: plaquette {s:?} has curl {curl:e}"
            )));
        }
    }

    let mut values = Vec::with_capacity(patch.len());
    let mut path_discrepancy = 0.0_f64;
    for s in patch.sites() {
        let x_first = path_sum(&w, base_point, s, PathOrder::XFirst);
        let y_first = path_sum(&w, base_point, s, PathOrder::YFirst);
        path_discrepancy = path_discrepancy.max((x_first - y_first).abs());
        values.push(x_first);
    }
    Ok(GaugeFunction {
        gamma,
        base_point,
        patch,
        values,
        path_discrepancy,
    })
}

/// `(T_gamma s)(x) = exp(i chi_gamma(x)) s(x - gamma)` on the sites where
/// `x - gamma` stays inside the patch.
pub fn magnetic_translation_apply(
    gamma: Site,
    s: &Section,
    a: &dyn VectorPotential,
    base_point: Site,
) -> Result<Section> {
    let valid = s.patch.intersect(&s.patch.translate(gamma));
    if valid.is_empty() {
        return Err(Error::domain(format!(
            "patch of size {:?} is too small for translation by {gamma:?}: needs more than {} sites per axis",
            s.patch.size,
            gamma[0].abs().max(gamma[1].abs())
        )));
    }
    let chi = gauge_function(gamma, a, base_point, s.patch)?;
    Ok(Section::from_fn(valid, |x| {
        Complex64::from_polar(1.0, chi.get(x)) * s.get(sub(x, gamma))
    }))
}

/// Plain translation without gauge phase.
pub fn naive_translation_apply(gamma: Site, s: &Section) -> Result<Section> {
    let valid = s.patch.intersect(&s.patch.translate(gamma));
    if valid.is_empty() {
        return Err(Error::domain(format!("patch too small for translation by {gamma:?}")));
    }
    Ok(Section::from_fn(valid, |x| s.get(sub(x, gamma))))
}

/// `Theta(g1, g2) = exp(i sum_{x0 -> x0 + g1} ((g1 g2).a - g1.a))`, so that
/// `T_g1 T_g2 = Theta(g1, g2) T_{g1 g2}`.
pub fn cocycle(g1: Site, g2: Site, a: &dyn VectorPotential, base_point: Site) -> Complex64 {
    let g12 = add(g1, g2);
    let w = |s: Site, axis: Axis| a.edge(sub(s, g12), axis) - a.edge(sub(s, g1), axis);
    let phase = path_sum(&w, base_point, add(base_point, g1), PathOrder::XFirst);
    Complex64::from_polar(1.0, phase)
}

/// `Theta(g1,g2) / Theta(g2,g1)`.
pub fn commutator_phase(g1: Site, g2: Site, a: &dyn VectorPotential, base_point: Site) -> Complex64 {
    cocycle(g1, g2, a, base_point) / cocycle(g2, g1, a, base_point)
}

/// Residual of `Theta(g1,g2) Theta(g1g2,g3) = Theta(g2,g3) Theta(g1,g2g3)`.
pub fn cocycle_identity_residual(g1: Site, g2: Site, g3: Site, a: &dyn VectorPotential, base_point: Site) -> f64 {
    let lhs = cocycle(g1, g2, a, base_point) * cocycle(add(g1, g2), g3, a, base_point);
    let rhs = cocycle(g2, g3, a, base_point) * cocycle(g1, add(g2, g3), a, base_point);
    (lhs - rhs).norm()
}

/// A finite-range operator evaluated on patches.
pub trait PatchOperator {
    /// Largest hop length; the output patch shrinks by this margin.
    fn range(&self) -> i64;

    fn apply(&self, s: &Section) -> Result<Section>;
}

/// `(H s)(x) = onsite s(x) + t sum_{y ~ x} exp(-i a(x -> y)) s(y)`.
pub struct SiteHamiltonian<A> {
    pub potential: A,
    pub hopping: f64,
    pub onsite: f64,
}

impl<A: VectorPotential> SiteHamiltonian<A> {
    /// The Harper operator: unit hopping, no onsite term.
    pub fn harper(potential: A) -> Self {
        SiteHamiltonian {
            potential,
            hopping: 1.0,
            onsite: 0.0,
        }
    }
}

impl<A: VectorPotential> PatchOperator for SiteHamiltonian<A> {
    fn range(&self) -> i64 {
        1
    }

    fn apply(&self, s: &Section) -> Result<Section> {
        let inner = s.patch.shrink(1);
        if inner.is_empty() {
            return Err(Error::domain("patch needs at least 3 sites per axis"));
        }
        Ok(Section::from_fn(inner, |x| {
            let mut acc = s.get(x) * self.onsite;
            for d in [[1, 0], [-1, 0], [0, 1], [0, -1]] {
                let y = add(x, d);
                let phase = -self.potential.directed(x, y);
                acc += Complex64::from_polar(self.hopping, phase) * s.get(y);
            }
            acc
        }))
    }
}

/// Max over `gammas` and `samples` random sections of `|(T H - H T) s|` on
/// the common valid interior.
pub fn check_periodicity(
    h: &dyn PatchOperator,
    gammas: &[Site],
    translate: &dyn Fn(Site, &Section) -> Result<Section>,
    patch: Patch,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let reach = gammas.iter().map(|g| g[0].abs().max(g[1].abs())).max().unwrap_or(0);
    let need = 2 * (h.range() + reach) + 1;
    if patch.size[0] < need || patch.size[1] < need {
        return Err(Error::domain(format!(
            "patch {:?} too small: commutator needs at least {need} sites per axis",
            patch.size
        )));
    }
    let mut worst = 0.0_f64;
    for (i, &gamma) in gammas.iter().enumerate() {
        for j in 0..samples {
            let s = Section::random(patch, seed ^ ((i as u64) << 32) ^ j as u64);
            let th = translate(gamma, &h.apply(&s)?)?;
            let ht = h.apply(&translate(gamma, &s)?)?;
            worst = worst.max(th.max_diff(&ht));
        }
    }
    Ok(worst)
}
