//! Runs the tasks of a configuration and writes their records.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::bands::{band_functions, spectrum_union, spectrum_union_polished, BandData, BandOptions, SpectrumIntervals};
use crate::config::{Format, RunConfig, Task};
use crate::error::{Error, Result};
use crate::fermi_surface::fermi_surface;
use crate::lattice::{haar_grid, Character, LatticeGroup};
use crate::lift::reverse_bloch_lift;
use crate::magnetic::Flux;
use crate::measures::{
    classify_spectrum, default_flat_tol, detect_atoms, fermi_measure, ids, EnergyBorelSet, ENERGY_RESOLUTION,
};
use crate::model::{harper, LatticeModel};
use crate::output::{
    emit, BandsPayload, ButterflyPayload, ButterflyRow, FermiPayload, FileNamer, FluxSummary, IdsPayload, OutputRecord,
    Payload, Provenance, SCHEMA_VERSION,
};
use crate::verify::{run_verify, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub format: Format,
    pub parallel: bool,
    pub threads: Option<usize>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub records: Vec<OutputRecord>,
    pub files: Vec<PathBuf>,
    pub verify_passed: bool,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.verify_passed {
            EXIT_OK
        } else {
            EXIT_VERIFY_FAILED
        }
    }
}

pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => EXIT_IO,
        Error::AtPoint { source, .. } => exit_code_for(source),
        _ => EXIT_CONFIG,
    }
}

fn bands_for(model: &LatticeModel, n: usize, parallel: bool) -> Result<BandData> {
    let grid = haar_grid(&LatticeGroup::new(model.rank())?, n)?;
    band_functions(
        model,
        &grid,
        BandOptions {
            with_vectors: false,
            parallel,
        },
    )
}

fn max_endpoint_gap(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    if a.len() != b.len() {
        return f64::MAX;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| (x[0] - y[0]).abs().max((x[1] - y[1]).abs()))
        .fold(0.0, f64::max)
}

/// Spectrum of the Harper operator for every flux `p/q`, `0 <= p < q <= q_max`,
/// in lowest terms.
pub fn run_butterfly(q_max: u32, grid_n: usize, parallel: bool) -> Result<ButterflyPayload> {
    if q_max < 1 {
        return Err(Error::input("q_max must be at least 1"));
    }
    let mut spectra: Vec<(Flux, SpectrumIntervals)> = Vec::new();
    for q in 1..=q_max as i64 {
        for p in 0..q {
            if num_integer::gcd(p, q) != 1 {
                continue;
            }
            let flux = Flux::new(p, q)?;
            let bands = bands_for(&harper(flux), grid_n, parallel)?;
            spectra.push((flux, spectrum_union(&bands)));
        }
    }
    spectra.sort_by(|a, b| a.0.value().total_cmp(&b.0.value()));
    let mut rows = Vec::new();
    let mut fluxes = Vec::new();
    for (flux, s) in &spectra {
        let (p, q) = (flux.numer(), flux.denom());
        for [lo, hi] in &s.intervals {
            rows.push(ButterflyRow {
                p,
                q,
                flux: flux.value(),
                lo: *lo,
                hi: *hi,
            });
        }
        let mirrored: Vec<[f64; 2]> = s.intervals.iter().rev().map(|[lo, hi]| [-hi, -lo]).collect();
        let partner = Flux::new(q - p, q)?;
        let conjugate = spectra
            .iter()
            .find(|(f, _)| *f == partner)
            .map_or(0.0, |(_, t)| max_endpoint_gap(&s.intervals, &t.intervals));
        fluxes.push(FluxSummary {
            p,
            q,
            symmetry_residual: max_endpoint_gap(&s.intervals, &mirrored),
            conjugate_residual: conjugate,
        });
    }
    Ok(ButterflyPayload { q_max, rows, fluxes })
}

fn run_task(cfg: &RunConfig, model: &LatticeModel, task: &Task, parallel: bool) -> Result<(Payload, f64)> {
    let n = cfg.grid_n;
    let payload_and_tol = match task {
        Task::Bands => {
            let bands = bands_for(model, n, parallel)?;
            let flat_tol = cfg.flat_tol.unwrap_or_else(|| default_flat_tol(&bands));
            let spectrum = if cfg.polish {
                spectrum_union_polished(model, &bands)?
            } else {
                spectrum_union(&bands)
            };
            let grid = bands.grid();
            let payload = BandsPayload {
                rank: model.rank(),
                band_count: bands.band_count(),
                k: grid.iter().map(<[f64]>::to_vec).collect(),
                energies: (0..grid.len()).map(|i| bands.at(i).to_vec()).collect(),
                spectrum: spectrum.intervals,
                polished: cfg.polish,
                atoms: detect_atoms(&bands, flat_tol)?,
                classification: classify_spectrum(&bands, flat_tol)?,
            };
            (Payload::Bands(payload), flat_tol)
        }
        Task::Butterfly { q_max } => (
            Payload::Butterfly(run_butterfly(*q_max, n, parallel)?),
            cfg.flat_tol.unwrap_or(0.0),
        ),
        Task::Fermi { energy } => {
            let bands = bands_for(model, n, parallel)?;
            let tol = cfg.flat_tol.unwrap_or_else(|| default_flat_tol(&bands));
            let surface = fermi_surface(&bands, *energy, tol);
            let window = EnergyBorelSet::closed(energy - tol, energy + tol)?.with_resolution(0.0);
            let point_coords = surface
                .points
                .iter()
                .map(|&i| bands.grid().coords(i).to_vec())
                .collect();
            let payload = FermiPayload {
                measure: fermi_measure(&bands, &window).value,
                surface,
                point_coords,
            };
            (Payload::Fermi(payload), tol)
        }
        Task::Ids { lo, hi, steps } => {
            let bands = bands_for(model, n, parallel)?;
            let rows = (0..=*steps)
                .map(|i| {
                    let e = if i == *steps {
                        *hi
                    } else {
                        lo + (hi - lo) * i as f64 / *steps as f64
                    };
                    [e, ids(&bands, e, cfg.ids_per_site).value]
                })
                .collect();
            let tol = cfg.flat_tol.unwrap_or_else(|| default_flat_tol(&bands));
            (
                Payload::Ids(IdsPayload {
                    per_site: cfg.ids_per_site,
                    rows,
                }),
                tol,
            )
        }
        Task::Verify => {
            let opts = VerifyOptions {
                grid_n: n,
                flat_tol: cfg.flat_tol,
                seed: cfg.seed,
                broken_gauge: cfg.broken_gauge,
                parallel,
            };
            let report = run_verify(model, &opts)?;
            let tol = cfg.flat_tol.unwrap_or(report.atoms.flat_tol);
            (Payload::Verify(report), tol)
        }
        Task::Lift { band, k } => {
            let ch = Character::new(k.clone())?;
            let cells = (2 * model.range() as usize + 1).max(3);
            let lift = reverse_bloch_lift(model, &ch, *band, cells)?;
            (Payload::Lift(lift), cfg.flat_tol.unwrap_or(0.0))
        }
    };
    Ok(payload_and_tol)
}

/// One record per task, in task order.
pub fn run_tasks(cfg: &RunConfig, parallel: bool, threads: Option<usize>) -> Result<Vec<OutputRecord>> {
    let model = cfg.model.build()?;
    let mut records = Vec::with_capacity(cfg.tasks.len());
    for task in &cfg.tasks {
        let start = Instant::now();
        let (data, flat_tol) = run_task(cfg, &model, task, parallel)?;
        let model_echo = match task {
            Task::Butterfly { .. } => "harper(p,q)".to_string(),
            _ => cfg.model.to_string(),
        };
        records.push(OutputRecord {
            schema_version: SCHEMA_VERSION,
            task: task.kind().to_string(),
            model: model_echo,
            data,
            provenance: Provenance {
                grid_n: cfg.grid_n,
                flat_tol,
                energy_resolution: ENERGY_RESOLUTION,
                threads,
                wall_time_s: start.elapsed().as_secs_f64(),
                timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            },
        });
    }
    Ok(records)
}

pub fn run_config(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let records = run_tasks(cfg, opts.parallel, opts.threads)?;
    let mut namer = FileNamer::default();
    let mut files = Vec::new();
    for r in &records {
        files.extend(emit(r, opts.format, &opts.out_dir, &mut namer)?);
    }
    let verify_passed = records.iter().all(|r| match &r.data {
        Payload::Verify(v) => v.passed(),
        _ => true,
    });
    Ok(RunOutcome {
        records,
        files,
        verify_passed,
    })
}

pub fn default_out_dir(cfg: &RunConfig) -> &Path {
    cfg.output_dir.as_deref().unwrap_or(Path::new("out"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use crate::output::{parse_csv, parse_csv_numbers, parse_record};
    use std::fs;

    fn opts(dir: &Path, format: Format) -> RunOptions {
        RunOptions {
            out_dir: dir.to_path_buf(),
            format,
            parallel: true,
            threads: None,
        }
    }

    #[test]
    fn butterfly_examples() {
        let b = run_butterfly(1, 16, true).unwrap();
        assert_eq!(b.rows.len(), 1);
        let r = b.rows[0];
        assert_eq!((r.p, r.q), (0, 1));
        assert!((r.lo + 4.0).abs() < 1e-12 && (r.hi - 4.0).abs() < 1e-12);

        let b = run_butterfly(5, 16, true).unwrap();
        let half: Vec<_> = b.rows.iter().filter(|r| r.q == 2).collect();
        assert_eq!(half.len(), 1);
        let s = 2.0 * 2.0_f64.sqrt();
        assert!((half[0].lo + s).abs() < 1e-12 && (half[0].hi - s).abs() < 1e-12);
        assert_eq!(b.fluxes.len(), 1 + 1 + 2 + 2 + 4);
        for f in &b.fluxes {
            assert!(f.symmetry_residual <= 1e-10, "{f:?}");
            assert!(f.conjugate_residual <= 1e-10, "{f:?}");
        }
    }

    #[test]
    fn bands_csv_shape() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config("model=free_chain grid_N=2 task=bands").unwrap();
        let out = run_config(&cfg, &opts(dir.path(), Format::Csv)).unwrap();
        assert_eq!(out.exit_code(), 0);
        let text = fs::read_to_string(dir.path().join("bands.csv")).unwrap();
        let (header, rows) = parse_csv_numbers(&text).unwrap();
        assert_eq!(header, vec!["k1", "E0"]);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0], vec![0.0, -2.0]);
        assert!(dir.path().join("bands.meta.json").exists());
    }

    #[test]
    fn ids_rows_and_gnuplot_loops() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config("model=square_laplacian grid_N=16 task=ids(-1,9,100) task=fermi(2)").unwrap();
        run_config(&cfg, &opts(dir.path(), Format::Csv)).unwrap();
        let (_, rows) = parse_csv_numbers(&fs::read_to_string(dir.path().join("ids.csv")).unwrap()).unwrap();
        assert_eq!(rows.len(), 101);
        assert!(rows.windows(2).all(|w| w[1][1] >= w[0][1]));
        assert_eq!(rows[100], vec![9.0, 1.0]);

        run_config(&cfg, &opts(dir.path(), Format::Gnuplot)).unwrap();
        let text = fs::read_to_string(dir.path().join("fermi.dat")).unwrap();
        for block in text.split("\n\n\n") {
            let rows: Vec<&str> = block.lines().filter(|l| !l.starts_with('#') && !l.is_empty()).collect();
            assert!(rows.len() > 3);
            assert_eq!(rows.first(), rows.last());
        }
    }

    #[test]
    fn json_round_trip_and_repeat_names() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config(
            "model=lieb grid_N=8 task=bands task=fermi(0.7) task=fermi(-1) task=lift(1,0.1,0.2) task=verify",
        )
        .unwrap();
        let out = run_config(&cfg, &opts(dir.path(), Format::Json)).unwrap();
        assert!(out.verify_passed);
        for (rec, name) in out.records.iter().zip(["bands", "fermi", "fermi_2", "lift", "verify"]) {
            let text = fs::read_to_string(dir.path().join(format!("{name}.json"))).unwrap();
            let back = parse_record(&text).unwrap();
            assert_eq!(&back, rec);
            assert_eq!(
                serde_json::to_string(&back).unwrap(),
                serde_json::to_string(rec).unwrap()
            );
        }
    }

    #[test]
    fn csv_is_deterministic_and_parses() {
        let cfg =
            parse_config("model=harper p=1 q=3 grid_N=8 task=bands task=verify task=butterfly(4) task=lift(0,0.3,0.1)")
                .unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let mut oa = opts(a.path(), Format::Csv);
        oa.parallel = false;
        let ra = run_config(&cfg, &oa).unwrap();
        run_config(&cfg, &opts(b.path(), Format::Csv)).unwrap();
        for f in &ra.files {
            let name = f.file_name().unwrap();
            if name.to_string_lossy().ends_with(".meta.json") {
                continue;
            }
            let x = fs::read(f).unwrap();
            assert_eq!(x, fs::read(b.path().join(name)).unwrap(), "{name:?}");
            parse_csv(&String::from_utf8(x).unwrap()).unwrap();
        }
    }

    #[test]
    fn broken_gauge_exit_code() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config("model=harper p=1 q=2 grid_N=8 broken_gauge=true task=verify").unwrap();
        let out = run_config(&cfg, &opts(dir.path(), Format::Json)).unwrap();
        assert_eq!(out.exit_code(), EXIT_VERIFY_FAILED);
    }

    #[test]
    fn io_errors_map_to_three() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let cfg = parse_config("model=free_chain grid_N=4 task=bands").unwrap();
        let err = run_config(&cfg, &opts(&blocker.join("sub"), Format::Csv)).unwrap_err();
        assert_eq!(exit_code_for(&err), EXIT_IO);
    }
}
