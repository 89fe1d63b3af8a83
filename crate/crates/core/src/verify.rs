//! Invariant suite run against one model on one grid.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bands::{band_functions, solve_fiber, spectrum_union, BandOptions};
use crate::error::Result;
use crate::fermi_surface::{closure_defect, fermi_surface, interpolation_defect};
use crate::fiber::{assemble_fiber, assemble_fiber_raw, family_lipschitz_check, hermitian_norm};
use crate::lattice::{character_pairing, haar_grid, superlattice_for_flux, Character, CharacterGrid, LatticeGroup};
use crate::lift::reverse_bloch_lift;
use crate::magnetic::{
    check_periodicity, cocycle_identity_residual, commutator_phase, gauge_function, magnetic_translation_apply,
    naive_translation_apply, LandauGauge, Patch, Section, Site, SiteHamiltonian,
};
use crate::measures::{
    classify_spectrum, default_flat_tol, density_refinement, detect_atoms, determinant_measure, fermi_measure, ids,
    ids_jumps, ids_measure, spectral_measure_at, sup_norm_sq, AtomReport, ClassifiedInterval, DensitySample,
    EnergyBorelSet, EnergyInterval,
};
use crate::model::{LatticeModel, ModelKind};
use crate::sturm::CharPolyFamily;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
    /// Reported only; does not affect the overall verdict.
    pub informational: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub model: String,
    pub grid_n: usize,
    pub checks: Vec<Check>,
    pub atoms: AtomReport,
    pub classification: Vec<ClassifiedInterval>,
    pub density: Vec<DensitySample>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.informational)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed && !c.informational).collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub grid_n: usize,
    pub flat_tol: Option<f64>,
    pub seed: u64,
    /// Use plain translations in the periodicity check (negative control).
    pub broken_gauge: bool,
    pub parallel: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            grid_n: 64,
            flat_tol: None,
            seed: 0x5eed,
            broken_gauge: false,
            parallel: true,
        }
    }
}

struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    fn at_most(&mut self, name: &str, residual: f64, tolerance: f64) {
        self.checks.push(Check {
            name: name.to_string(),
            passed: residual <= tolerance,
            residual,
            tolerance,
            informational: false,
        });
    }

    fn info(&mut self, name: &str, residual: f64, tolerance: f64) {
        self.checks.push(Check {
            name: name.to_string(),
            passed: residual <= tolerance,
            residual,
            tolerance,
            informational: true,
        });
    }
}

fn random_set(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> EnergyBorelSet {
    let count = rng.gen_range(1..4);
    let intervals = (0..count)
        .map(|_| {
            let a = rng.gen_range(lo..hi);
            let w = rng.gen_range(0.0..(hi - lo) / 4.0);
            EnergyInterval {
                lo: a,
                hi: a + w,
                lo_closed: rng.gen(),
                hi_closed: rng.gen(),
            }
        })
        .collect();
    EnergyBorelSet::from_intervals(intervals)
}

fn random_k(rng: &mut ChaCha8Rng, rank: usize) -> Character {
    Character::new((0..rank).map(|_| rng.gen::<f64>()).collect::<Vec<_>>()).expect("finite coordinates")
}

fn grid_for(model: &LatticeModel, n: usize) -> Result<CharacterGrid> {
    haar_grid(&LatticeGroup::new(model.rank())?, n)
}

pub fn run_verify(model: &LatticeModel, opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut suite = Suite { checks: Vec::new() };
    let rank = model.rank();
    let grid = grid_for(model, opts.grid_n)?;
    let n = grid.points_per_dim();

    // lattice characters
    suite.at_most("haar_weights", (grid.weight_sum() - 1.0).abs(), 1e-15);
    let mut ortho = 0.0_f64;
    for t in 0..64 {
        let gamma: Vec<i64> = (0..rank)
            .map(|_| {
                if t == 0 {
                    0
                } else {
                    rng.gen_range(-(n as i64 - 1)..n as i64)
                }
            })
            .collect();
        let delta = if gamma.iter().all(|&g| g == 0) { 1.0 } else { 0.0 };
        ortho = ortho.max((grid.character_sum(&gamma)? - delta).norm());
    }
    suite.at_most("discrete_orthogonality", ortho, 1e-12);
    let mut hom = 0.0_f64;
    for _ in 0..100 {
        let k = random_k(&mut rng, rank);
        let g1: Vec<i64> = (0..rank).map(|_| rng.gen_range(-50..50)).collect();
        let g2: Vec<i64> = (0..rank).map(|_| rng.gen_range(-50..50)).collect();
        let sum: Vec<i64> = g1.iter().zip(&g2).map(|(a, b)| a + b).collect();
        let lhs = character_pairing(&k, &sum)?;
        let rhs = character_pairing(&k, &g1)? * character_pairing(&k, &g2)?;
        hom = hom.max((lhs - rhs).norm());
    }
    suite.at_most("character_homomorphism", hom, 1e-14);

    // fibers and bands
    let bands = band_functions(
        model,
        &grid,
        BandOptions {
            with_vectors: false,
            parallel: opts.parallel,
        },
    )?;
    let scale = bands.scale();
    let mut herm = 0.0_f64;
    let mut trace = 0.0_f64;
    for (i, k) in grid.iter().enumerate() {
        let m = assemble_fiber_raw(model, k)?;
        herm = herm.max(crate::fiber::hermiticity_defect(&m));
        let tr: f64 = (0..m.nrows()).map(|j| m[(j, j)].re).sum();
        let sum: f64 = bands.at(i).iter().sum();
        trace = trace.max((tr - sum).abs() / scale.max(tr.abs()));
    }
    suite.at_most("fiber_hermiticity", herm, 1e-13);
    suite.at_most("trace", trace, 1e-10);

    let mut period = 0.0_f64;
    let mut weyl = 0.0_f64;
    let mut recon = 0.0_f64;
    let mut gauge = 0.0_f64;
    let theta: Vec<f64> = (0..model.sites())
        .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
        .collect();
    let gauged = model.gauge_transform(&theta)?;
    for _ in 0..24 {
        let k = random_k(&mut rng, rank);
        let m = assemble_fiber_raw(model, k.coords())?;
        for axis in 0..rank {
            let mut shifted = k.coords().to_vec();
            shifted[axis] += 1.0;
            let diff = assemble_fiber_raw(model, &shifted)? - &m;
            period = period.max(diff.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        let k2 = random_k(&mut rng, rank);
        let m2 = assemble_fiber_raw(model, k2.coords())?;
        let e1 = crate::bands::eigenvalues(m.clone())?;
        let e2 = crate::bands::eigenvalues(m2.clone())?;
        let bound = hermitian_norm(&m - &m2);
        for (a, b) in e1.iter().zip(&e2) {
            weyl = weyl.max((a - b).abs() - bound);
        }
        let sys = solve_fiber(&assemble_fiber(model, &k)?)?;
        let lambda = DMatrix::from_diagonal(&DVector::from_iterator(
            sys.values.len(),
            sys.values.iter().map(|&e| Complex64::new(e, 0.0)),
        ));
        let rebuilt = &sys.vectors * lambda * sys.vectors.adjoint();
        recon = recon.max((&m - rebuilt).norm() / m.norm().max(1e-300));
        let eg = crate::bands::eigenvalues(assemble_fiber_raw(&gauged, k.coords())?)?;
        for (a, b) in e1.iter().zip(&eg) {
            gauge = gauge.max((a - b).abs());
        }
    }
    suite.at_most("k_periodicity", period, 1e-13 * scale);
    suite.at_most("weyl_bound", weyl.max(0.0), 1e-12);
    suite.at_most("reconstruction", recon, 1e-12);
    suite.at_most("gauge_covariance", gauge, 1e-12 * scale.max(1.0));

    #[cfg(feature = "parallel")]
    {
        let serial = band_functions(
            model,
            &grid,
            BandOptions {
                with_vectors: false,
                parallel: false,
            },
        )?;
        let same = serial
            .energies()
            .iter()
            .zip(bands.energies())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        suite.at_most("serial_parallel_identical", if same { 0.0 } else { 1.0 }, 0.0);
    }

    // refinement pair: (N/2, N) when nested, else (N, 2N)
    let (coarse, fine) = if n % 2 == 0 && n / 2 >= 4 {
        let g = grid_for(model, n / 2)?;
        (
            band_functions(
                model,
                &g,
                BandOptions {
                    with_vectors: false,
                    parallel: opts.parallel,
                },
            )?,
            bands.clone(),
        )
    } else {
        let g = grid_for(model, 2 * n)?;
        (
            bands.clone(),
            band_functions(
                model,
                &g,
                BandOptions {
                    with_vectors: false,
                    parallel: opts.parallel,
                },
            )?,
        )
    };
    let cu = spectrum_union(&coarse);
    let fu = spectrum_union(&fine);
    let mut refine = 0.0_f64;
    for [lo, hi] in &cu.intervals {
        let best = fu
            .intervals
            .iter()
            .map(|[flo, fhi]| (flo - lo).max(0.0).max((hi - fhi).max(0.0)))
            .fold(f64::INFINITY, f64::min);
        refine = refine.max(best);
    }
    suite.at_most("refinement_monotone", refine, 1e-9);

    let lc = coarse.grid().points_per_dim();
    if lc >= 4 {
        let l1 = family_lipschitz_check(model, coarse.grid())?;
        let l2 = family_lipschitz_check(model, fine.grid())?;
        let drift = if l2 == 0.0 { 0.0 } else { (l1 - l2).abs() / l2 };
        suite.at_most("lipschitz_drift", drift, 0.1);
        suite.at_most("lipschitz_bound", l2 - model.lipschitz_bound() * (1.0 + 1e-9), 0.0);
    }

    // measures
    let (glo, ghi) = bands.global_range();
    let margin = 0.1 * scale;
    let family = CharPolyFamily::new(model, &grid)?;
    let mut det_diff = 0.0_f64;
    let mut null_mismatch = 0.0_f64;
    let mut subadd = 0.0_f64;
    let mut mono = 0.0_f64;
    for _ in 0..100 {
        let b1 = random_set(&mut rng, glo - margin, ghi + margin);
        let b2 = random_set(&mut rng, glo - margin, ghi + margin);
        let f1 = fermi_measure(&bands, &b1).value;
        det_diff = det_diff.max((f1 - determinant_measure(&family, scale, &b1).value).abs());
        if (ids_measure(&bands, &b1).value == 0.0) != (f1 == 0.0) {
            null_mismatch = 1.0;
        }
        let u = b1.union(&b2);
        let fu = fermi_measure(&bands, &u).value;
        let f2 = fermi_measure(&bands, &b2).value;
        subadd = subadd.max(fu - (f1 + f2));
        mono = mono
            .max(f1 - fu)
            .max(ids_measure(&bands, &b1).value - ids_measure(&bands, &u).value);
    }
    suite.at_most("determinant_equals_fermi", det_diff, 0.0);
    suite.at_most("null_set_equivalence", null_mismatch, 0.0);
    suite.at_most("subadditivity", subadd.max(0.0), 4.0 * f64::EPSILON);
    suite.at_most("monotonicity", mono.max(0.0), 0.0);

    // spectral measures need vectors; keep the grid small
    let vgrid = grid_for(model, n.min(16))?;
    let vbands = band_functions(
        model,
        &vgrid,
        BandOptions {
            with_vectors: true,
            parallel: opts.parallel,
        },
    )?;
    let d = model.sites();
    let mut domination = f64::NEG_INFINITY;
    for _ in 0..200 {
        let field: Vec<DVector<Complex64>> = (0..vgrid.len())
            .map(|_| {
                DVector::from_fn(d, |_, _| {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                })
            })
            .collect();
        let set = random_set(&mut rng, glo - margin, ghi + margin);
        let mu = spectral_measure_at(&field, &vbands, &set)?.value;
        domination = domination.max(mu - sup_norm_sq(&field) * ids_measure(&vbands, &set).value);
    }
    suite.at_most("domination", domination.max(0.0), 1e-12);

    // atoms and spectral type
    let flat_tol = opts.flat_tol.unwrap_or_else(|| default_flat_tol(&bands));
    let atoms = detect_atoms(&bands, flat_tol)?;
    let eps = 10.0 * flat_tol;
    let mut jump_defect = 0.0_f64;
    for a in &atoms.atoms {
        let jump = ids(&bands, a.energy + eps, false).value - ids(&bands, a.energy - eps, false).value;
        jump_defect = jump_defect.max(1.0 - 1e-9 - jump);
    }
    let mut stray_jumps = 0.0_f64;
    for (e, _) in ids_jumps(&bands, eps, 0.5) {
        if !atoms.atoms.iter().any(|a| (a.energy - e).abs() <= 2.0 * eps) {
            stray_jumps += 1.0;
        }
    }
    suite.at_most("atom_ids_jump", jump_defect.max(0.0), 0.0);
    suite.at_most("ids_jumps_at_atoms", stray_jumps, 0.0);
    let classification = classify_spectrum(&bands, flat_tol)?;
    let density = density_refinement(&coarse, &fine, flat_tol)?;
    let worst_drift = density.iter().map(|s| s.drift).fold(0.0, f64::max);
    suite.info("ac_density_drift", worst_drift, 0.2);

    if rank == 2 {
        let mut closure = 0.0_f64;
        let mut interp = 0.0_f64;
        for t in [0.2, 0.4, 0.6, 0.8] {
            let s = fermi_surface(&bands, glo + t * (ghi - glo), flat_tol);
            closure = closure.max(closure_defect(&s.contours));
            interp = interp.max(interpolation_defect(&bands, &s));
        }
        suite.at_most("contour_closure", closure, 1e-12);
        suite.at_most("contour_interpolation", interp, 1e-9 * scale);
    }

    // reverse Bloch lift
    let cells = (2 * model.range() as usize + 1).max(3);
    let mut lift_res = 0.0_f64;
    let mut lift_sup = 0.0_f64;
    for _ in 0..5 {
        let k = random_k(&mut rng, rank);
        let band = rng.gen_range(0..d);
        let l = reverse_bloch_lift(model, &k, band, cells)?;
        lift_res = lift_res.max(l.residual);
        lift_sup = lift_sup.max((l.sup_norm - l.max_cell_amplitude).abs());
    }
    suite.at_most("lift_residual", lift_res, 1e-10 * model.norm_bound().max(1.0));
    suite.at_most("lift_bounded", lift_sup, 1e-14);

    if rank == 2 && matches!(model.kind(), ModelKind::TightBinding) {
        if let Some(flux) = model.flux().uniform {
            magnetic_checks(&mut suite, flux, opts, &mut rng)?;
        }
    }

    Ok(VerifyReport {
        model: model.name().to_string(),
        grid_n: n,
        checks: suite.checks,
        atoms,
        classification,
        density,
    })
}

fn magnetic_checks(
    suite: &mut Suite,
    flux: crate::magnetic::Flux,
    opts: &VerifyOptions,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let a = LandauGauge { flux };
    let origin: Site = [0, 0];
    let mut ident = 0.0_f64;
    for _ in 0..50 {
        let mut g = || [rng.gen_range(-4..5), rng.gen_range(-4..5)];
        ident = ident.max(cocycle_identity_residual(g(), g(), g(), &a, origin));
    }
    suite.at_most("cocycle_identity", ident, 1e-12);

    let mut comm = 0.0_f64;
    for _ in 0..20 {
        let g1: Site = [rng.gen_range(-3..4), rng.gen_range(-3..4)];
        let g2: Site = [rng.gen_range(-3..4), rng.gen_range(-3..4)];
        let wedge = (g1[0] * g2[1] - g1[1] * g2[0]) as f64;
        let expected = Complex64::from_polar(1.0, flux.phase() * wedge);
        comm = comm.max((commutator_phase(g1, g2, &a, origin) - expected).norm());
    }
    suite.at_most("commutator_phase", comm, 1e-12);

    let lattice = LatticeGroup::new(2)?;
    let sup: Vec<Site> = superlattice_for_flux(flux, &lattice)?
        .generators()
        .iter()
        .map(|g| [g[0], g[1]])
        .collect();
    let trivial = (commutator_phase(sup[0], sup[1], &a, origin) - Complex64::new(1.0, 0.0)).norm();
    suite.at_most("superlattice_phases_trivial", trivial, 1e-13);

    let q = flux.denom();
    let patch = Patch::centered(q + 3);
    let mut iso = 0.0_f64;
    let mut path = 0.0_f64;
    for g in [[1, 0], [0, 1], sup[0], sup[1]] {
        let chi = gauge_function(g, &a, origin, patch)?;
        path = path.max(chi.path_discrepancy);
        let s = Section::random(patch, opts.seed);
        let t = magnetic_translation_apply(g, &s, &a, origin)?;
        let inner = t.patch;
        let src = s.restrict(inner.translate([-g[0], -g[1]]));
        iso = iso.max((t.norm2() - src.norm2()).abs() / src.norm2().max(1e-300));
    }
    suite.at_most("gauge_path_independence", path, 1e-12);
    suite.at_most("translation_isometry", iso, 1e-13);

    let h = SiteHamiltonian::harper(a);
    let translate = |g: Site, s: &Section| {
        if opts.broken_gauge {
            naive_translation_apply(g, s)
        } else {
            magnetic_translation_apply(g, s, &a, origin)
        }
    };
    let generators = [[1, 0], [0, 1]];
    let r = check_periodicity(&h, &generators, &translate, patch, 2, opts.seed)?;
    suite.at_most("periodicity_generators", r, 1e-12);
    let r = check_periodicity(&h, &sup, &translate, patch, 2, opts.seed)?;
    suite.at_most("periodicity_superlattice", r, 1e-12);
    Ok(())
}
