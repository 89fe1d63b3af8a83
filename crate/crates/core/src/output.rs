//! Output records and their CSV, JSON and gnuplot renderings.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::Format;
use crate::error::{Error, Result};
use crate::fermi_surface::FermiSurfaceSet;
use crate::lift::BlochLift;
use crate::measures::{AtomReport, ClassifiedInterval};
use crate::verify::VerifyReport;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub grid_n: usize,
    pub flat_tol: f64,
    pub energy_resolution: f64,
    pub threads: Option<usize>,
    pub wall_time_s: f64,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub schema_version: u32,
    pub task: String,
    pub model: String,
    pub data: Payload,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Bands(BandsPayload),
    Butterfly(ButterflyPayload),
    Fermi(FermiPayload),
    Ids(IdsPayload),
    Verify(VerifyReport),
    Lift(BlochLift),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandsPayload {
    pub rank: usize,
    pub band_count: usize,
    pub k: Vec<Vec<f64>>,
    pub energies: Vec<Vec<f64>>,
    pub spectrum: Vec<[f64; 2]>,
    pub polished: bool,
    pub atoms: AtomReport,
    pub classification: Vec<ClassifiedInterval>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ButterflyRow {
    pub p: i64,
    pub q: i64,
    pub flux: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxSummary {
    pub p: i64,
    pub q: i64,
    /// Largest endpoint mismatch between the spectrum and its mirror image.
    pub symmetry_residual: f64,
    /// Largest endpoint mismatch against flux `(q - p)/q`.
    pub conjugate_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ButterflyPayload {
    pub q_max: u32,
    pub rows: Vec<ButterflyRow>,
    pub fluxes: Vec<FluxSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FermiPayload {
    pub surface: FermiSurfaceSet,
    pub point_coords: Vec<Vec<f64>>,
    /// Fermi measure of `[E - tol, E + tol]`.
    pub measure: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdsPayload {
    pub per_site: bool,
    pub rows: Vec<[f64; 2]>,
}

enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format!("{x:.16e}"),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

struct Table {
    suffix: &'static str,
    header: Vec<String>,
    /// Rows grouped into blocks; gnuplot separates blocks by a blank line.
    blocks: Vec<Vec<Vec<Cell>>>,
}

impl Table {
    fn single(suffix: &'static str, header: Vec<String>, rows: Vec<Vec<Cell>>) -> Self {
        Table {
            suffix,
            header,
            blocks: vec![rows],
        }
    }

    fn csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in self.blocks.iter().flatten() {
            let line: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    fn gnuplot(&self) -> String {
        let mut out = format!("# {}\n", self.header.join(" "));
        for (i, block) in self.blocks.iter().enumerate() {
            if i > 0 {
                out.push_str("\n\n");
            }
            for row in block {
                let line: Vec<String> = row.iter().map(Cell::render).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
        }
        out
    }
}

fn k_header(rank: usize) -> Vec<String> {
    (1..=rank).map(|i| format!("k{i}")).collect()
}

fn nums(xs: &[f64]) -> Vec<Cell> {
    xs.iter().map(|&x| Cell::Num(x)).collect()
}

fn tables(data: &Payload, gnuplot: bool) -> Vec<Table> {
    match data {
        Payload::Bands(b) => {
            let mut header = k_header(b.rank);
            header.extend((0..b.band_count).map(|n| format!("E{n}")));
            let main = if gnuplot {
                // one block per band: k..., E_n
                let mut h = k_header(b.rank);
                h.push("E".into());
                Table {
                    suffix: "",
                    header: h,
                    blocks: (0..b.band_count)
                        .map(|n| {
                            b.k.iter()
                                .zip(&b.energies)
                                .map(|(k, e)| {
                                    let mut row = nums(k);
                                    row.push(Cell::Num(e[n]));
                                    row
                                })
                                .collect()
                        })
                        .collect(),
                }
            } else {
                let rows =
                    b.k.iter()
                        .zip(&b.energies)
                        .map(|(k, e)| {
                            let mut row = nums(k);
                            row.extend(nums(e));
                            row
                        })
                        .collect();
                Table::single("", header, rows)
            };
            let spectrum = Table::single(
                "_spectrum",
                vec!["lo".into(), "hi".into()],
                b.spectrum.iter().map(|r| nums(r)).collect(),
            );
            let classes = Table::single(
                "_classes",
                vec!["lo".into(), "hi".into(), "type".into()],
                b.classification
                    .iter()
                    .map(|c| vec![Cell::Num(c.lo), Cell::Num(c.hi), Cell::Text(c.kind.to_string())])
                    .collect(),
            );
            vec![main, spectrum, classes]
        }
        Payload::Butterfly(b) => {
            let main = if gnuplot {
                Table {
                    suffix: "",
                    header: vec!["flux".into(), "E".into()],
                    blocks: b
                        .rows
                        .iter()
                        .map(|r| vec![nums(&[r.flux, r.lo]), nums(&[r.flux, r.hi])])
                        .collect(),
                }
            } else {
                Table::single(
                    "",
                    ["p", "q", "flux", "lo", "hi"].map(String::from).to_vec(),
                    b.rows
                        .iter()
                        .map(|r| {
                            vec![
                                Cell::Int(r.p),
                                Cell::Int(r.q),
                                Cell::Num(r.flux),
                                Cell::Num(r.lo),
                                Cell::Num(r.hi),
                            ]
                        })
                        .collect(),
                )
            };
            let checks = Table::single(
                "_checks",
                ["p", "q", "symmetry_residual", "conjugate_residual"]
                    .map(String::from)
                    .to_vec(),
                b.fluxes
                    .iter()
                    .map(|f| {
                        vec![
                            Cell::Int(f.p),
                            Cell::Int(f.q),
                            Cell::Num(f.symmetry_residual),
                            Cell::Num(f.conjugate_residual),
                        ]
                    })
                    .collect(),
            );
            vec![main, checks]
        }
        Payload::Fermi(f) => {
            let rank = f.point_coords.first().map_or(2, Vec::len);
            let main = if gnuplot {
                Table {
                    suffix: "",
                    header: vec!["k1".into(), "k2".into()],
                    blocks: f
                        .surface
                        .contours
                        .iter()
                        .map(|c| {
                            let mut rows: Vec<Vec<Cell>> = c.vertices.iter().map(|v| nums(v)).collect();
                            if c.closed {
                                rows.push(nums(&c.vertices[0]));
                            }
                            rows
                        })
                        .collect(),
                }
            } else {
                let mut rows = Vec::new();
                for (i, c) in f.surface.contours.iter().enumerate() {
                    for v in &c.vertices {
                        rows.push(vec![
                            Cell::Int(i as i64),
                            Cell::Int(c.band as i64),
                            Cell::Int(c.closed as i64),
                            Cell::Num(v[0]),
                            Cell::Num(v[1]),
                        ]);
                    }
                }
                Table::single(
                    "",
                    ["contour", "band", "closed", "k1", "k2"].map(String::from).to_vec(),
                    rows,
                )
            };
            let points = Table::single(
                "_points",
                k_header(rank),
                f.point_coords.iter().map(|k| nums(k)).collect(),
            );
            vec![main, points]
        }
        Payload::Ids(d) => vec![Table::single(
            "",
            vec!["E".into(), "ids".into()],
            d.rows.iter().map(|r| nums(r)).collect(),
        )],
        Payload::Verify(v) => {
            let checks = Table::single(
                "",
                ["check", "passed", "residual", "tolerance", "informational"]
                    .map(String::from)
                    .to_vec(),
                v.checks
                    .iter()
                    .map(|c| {
                        vec![
                            Cell::Text(c.name.clone()),
                            Cell::Int(c.passed as i64),
                            Cell::Num(c.residual),
                            Cell::Num(c.tolerance),
                            Cell::Int(c.informational as i64),
                        ]
                    })
                    .collect(),
            );
            let atoms = Table::single(
                "_atoms",
                vec!["energy".into(), "measure".into(), "bands".into()],
                v.atoms
                    .atoms
                    .iter()
                    .map(|a| {
                        let bands: Vec<String> = a.bands.iter().map(usize::to_string).collect();
                        vec![Cell::Num(a.energy), Cell::Num(a.measure), Cell::Text(bands.join(" "))]
                    })
                    .collect(),
            );
            let density = Table::single(
                "_density",
                ["energy", "coarse", "fine", "drift"].map(String::from).to_vec(),
                v.density
                    .iter()
                    .map(|s| nums(&[s.energy, s.coarse, s.fine, s.drift]))
                    .collect(),
            );
            vec![checks, atoms, density]
        }
        Payload::Lift(l) => {
            let rank = l.k.len();
            let p = l.cells_per_dim;
            let cells = p.pow(rank as u32);
            let sites = l.values.len() / cells.max(1);
            let mut header: Vec<String> = (1..=rank).map(|i| format!("c{i}")).collect();
            header.extend(["site", "re", "im"].map(String::from));
            let mut rows = Vec::with_capacity(l.values.len());
            for (idx, z) in l.values.iter().enumerate() {
                let mut cell = idx / sites;
                let mut c = vec![0i64; rank];
                for slot in c.iter_mut().rev() {
                    *slot = (cell % p) as i64;
                    cell /= p;
                }
                let mut row: Vec<Cell> = c.into_iter().map(Cell::Int).collect();
                row.push(Cell::Int((idx % sites) as i64));
                row.push(Cell::Num(z.re));
                row.push(Cell::Num(z.im));
                rows.push(row);
            }
            vec![Table::single("", header, rows)]
        }
    }
}

#[derive(Serialize)]
struct Meta<'a> {
    schema_version: u32,
    task: &'a str,
    model: &'a str,
    provenance: &'a Provenance,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Picks `<kind>` or `<kind>_2`, `<kind>_3`, ... so that repeated tasks do
/// not overwrite each other.
#[derive(Default)]
pub struct FileNamer {
    used: HashMap<String, usize>,
}

impl FileNamer {
    pub fn stem(&mut self, kind: &str) -> String {
        let count = self.used.entry(kind.to_string()).or_insert(0);
        *count += 1;
        if *count == 1 {
            kind.to_string()
        } else {
            format!("{kind}_{count}")
        }
    }
}

pub fn emit(record: &OutputRecord, format: Format, dir: &Path, namer: &mut FileNamer) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let stem = namer.stem(&record.task);
    let mut files = Vec::new();
    match format {
        Format::Json => {
            let path = dir.join(format!("{stem}.json"));
            let text = serde_json::to_string_pretty(record).map_err(|e| Error::contract(e.to_string()))?;
            write(&path, &text)?;
            files.push(path);
        }
        Format::Csv | Format::Gnuplot => {
            for t in tables(&record.data, format == Format::Gnuplot) {
                let path = dir.join(format!("{stem}{}.{}", t.suffix, format.extension()));
                let text = if format == Format::Csv { t.csv() } else { t.gnuplot() };
                write(&path, &text)?;
                files.push(path);
            }
            let meta = Meta {
                schema_version: record.schema_version,
                task: &record.task,
                model: &record.model,
                provenance: &record.provenance,
            };
            let path = dir.join(format!("{stem}.meta.json"));
            let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::contract(e.to_string()))?;
            write(&path, &text)?;
            files.push(path);
        }
    }
    Ok(files)
}

pub fn parse_record(text: &str) -> Result<OutputRecord> {
    serde_json::from_str(text).map_err(|e| Error::input(format!("malformed output record: {e}")))
}

/// Header and rows of an emitted CSV file.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::input("empty CSV"))?
        .split(',')
        .map(String::from)
        .collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let row: Vec<String> = l.split(',').map(String::from).collect();
            if row.len() != header.len() {
                Err(Error::input(format!(
                    "CSV row has {} fields, header has {}",
                    row.len(),
                    header.len()
                )))
            } else {
                Ok(row)
            }
        })
        .collect::<Result<_>>()?;
    Ok((header, rows))
}

/// Numeric rows of an emitted CSV file; every field must parse as `f64`.
pub fn parse_csv_numbers(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let (header, rows) = parse_csv(text)?;
    let rows = rows
        .into_iter()
        .map(|r| {
            r.iter()
                .map(|x| x.parse().map_err(|_| Error::input(format!("not a number: '{x}'"))))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok((header, rows))
}
