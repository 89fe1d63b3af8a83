//! Level sets of the band functions on the character torus.

use serde::{Deserialize, Serialize};

use crate::bands::BandData;

/// Polyline in unwrapped torus coordinates. A closed contour does not repeat
/// its first vertex; an open one ends at `first + winding`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub band: usize,
    pub vertices: Vec<[f64; 2]>,
    pub closed: bool,
    pub winding: [i64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FermiSurfaceSet {
    pub level: f64,
    pub tol: f64,
    /// Grid indices with some band within `tol` of the level.
    pub points: Vec<usize>,
    pub contours: Vec<Contour>,
    /// Flat bands sitting at the level; their sheet is the whole torus.
    pub full_bands: Vec<usize>,
}

impl FermiSurfaceSet {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty() && self.contours.is_empty() && self.full_bands.is_empty()
    }
}

pub fn fermi_surface(bands: &BandData, level: f64, tol: f64) -> FermiSurfaceSet {
    let mut out = FermiSurfaceSet {
        level,
        tol,
        points: Vec::new(),
        contours: Vec::new(),
        full_bands: Vec::new(),
    };
    let (lo, hi) = bands.global_range();
    if level < lo - tol || level > hi + tol {
        return out;
    }
    let grid = bands.grid();
    out.points = (0..grid.len())
        .filter(|&i| bands.at(i).iter().any(|e| (e - level).abs() <= tol))
        .collect();
    for (n, r) in bands.band_ranges().iter().enumerate() {
        if r.width() <= tol {
            if (0.5 * (r.min + r.max) - level).abs() <= tol {
                out.full_bands.push(n);
            }
            continue;
        }
        if grid.rank() == 2 && level >= r.min && level <= r.max {
            out.contours
                .extend(march(&bands.band(n), grid.points_per_dim(), level, n));
        }
    }
    out
}

// corners of cell (i, j): c0 = (i, j), c1 = (i+1, j), c2 = (i+1, j+1), c3 = (i, j+1)
// edges: e0 = c0c1, e1 = c1c2, e2 = c3c2, e3 = c0c3
const EDGE_CORNERS: [(usize, usize); 4] = [(0, 1), (1, 2), (3, 2), (0, 3)];
const CORNER_OFFSET: [(i64, i64); 4] = [(0, 0), (1, 0), (1, 1), (0, 1)];
// neighbour across an edge, and the edge's name seen from there
const ACROSS: [((i64, i64), usize); 4] = [((0, -1), 2), ((1, 0), 3), ((0, 1), 0), ((-1, 0), 1)];

struct Sheet<'a> {
    f: &'a [f64],
    n: usize,
    level: f64,
}

impl Sheet<'_> {
    fn value(&self, i: i64, j: i64) -> f64 {
        let n = self.n as i64;
        self.f[(i.rem_euclid(n) * n + j.rem_euclid(n)) as usize]
    }

    fn corners(&self, i: i64, j: i64) -> [f64; 4] {
        CORNER_OFFSET.map(|(a, b)| self.value(i + a, j + b))
    }

    fn segments(&self, i: i64, j: i64) -> Vec<(usize, usize)> {
        let c = self.corners(i, j);
        let inside = c.map(|v| v >= self.level);
        let crossed: Vec<usize> = (0..4)
            .filter(|&e| inside[EDGE_CORNERS[e].0] != inside[EDGE_CORNERS[e].1])
            .collect();
        match crossed.len() {
            2 => vec![(crossed[0], crossed[1])],
            4 => {
                let centre = 0.25 * c.iter().sum::<f64>() >= self.level;
                if centre == inside[0] {
                    // c1 and c3 are cut off
                    vec![(0, 1), (2, 3)]
                } else {
                    vec![(0, 3), (1, 2)]
                }
            }
            _ => Vec::new(),
        }
    }

    fn vertex(&self, i: i64, j: i64, edge: usize) -> [f64; 2] {
        let c = self.corners(i, j);
        let (a, b) = EDGE_CORNERS[edge];
        let t = (self.level - c[a]) / (c[b] - c[a]);
        let (ax, ay) = CORNER_OFFSET[a];
        let (bx, by) = CORNER_OFFSET[b];
        let x = (i + ax) as f64 + t * (bx - ax) as f64;
        let y = (j + ay) as f64 + t * (by - ay) as f64;
        [x / self.n as f64, y / self.n as f64]
    }
}

fn march(f: &[f64], n: usize, level: f64, band: usize) -> Vec<Contour> {
    let sheet = Sheet { f, n, level };
    let ni = n as i64;
    let segs: Vec<Vec<(usize, usize)>> = (0..n * n)
        .map(|c| sheet.segments((c / n) as i64, (c % n) as i64))
        .collect();
    let mut used: Vec<Vec<bool>> = segs.iter().map(|s| vec![false; s.len()]).collect();
    let mut contours = Vec::new();
    for start_cell in 0..n * n {
        for start_seg in 0..segs[start_cell].len() {
            if used[start_cell][start_seg] {
                continue;
            }
            let (si, sj) = ((start_cell / n) as i64, (start_cell % n) as i64);
            let (entry, exit0) = segs[start_cell][start_seg];
            let mut vertices = vec![sheet.vertex(si, sj, entry)];
            let (mut ci, mut cj, mut seg, mut exit) = (si, sj, start_seg, exit0);
            loop {
                let cell = (ci.rem_euclid(ni) * ni + cj.rem_euclid(ni)) as usize;
                used[cell][seg] = true;
                vertices.push(sheet.vertex(ci, cj, exit));
                let ((di, dj), enter) = ACROSS[exit];
                ci += di;
                cj += dj;
                let next = (ci.rem_euclid(ni) * ni + cj.rem_euclid(ni)) as usize;
                if next == start_cell && segs[next][start_seg] == (entry, exit0) && enter == entry {
                    break;
                }
                let (k, &(a, b)) = segs[next]
                    .iter()
                    .enumerate()
                    .find(|(_, &(a, b))| a == enter || b == enter)
                    .expect("crossed edge belongs to a segment on both sides");
                seg = k;
                exit = if a == enter { b } else { a };
            }
            let winding = [(ci - si) / ni, (cj - sj) / ni];
            let closed = winding == [0, 0];
            if closed {
                vertices.pop();
            }
            contours.push(Contour {
                band,
                vertices,
                closed,
                winding,
            });
        }
    }
    contours
}

/// Largest deviation of `first + winding` from the last vertex over open
/// contours; zero when every contour closes on the torus.
pub fn closure_defect(contours: &[Contour]) -> f64 {
    contours
        .iter()
        .filter(|c| !c.closed)
        .map(|c| {
            let first = c.vertices[0];
            let last = c.vertices[c.vertices.len() - 1];
            (0..2)
                .map(|d| (first[d] + c.winding[d] as f64 - last[d]).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Largest `|f(v) - level|` over contour vertices, with `f` the band
/// function linearly interpolated along the grid edge holding `v`.
pub fn interpolation_defect(bands: &BandData, surface: &FermiSurfaceSet) -> f64 {
    let n = bands.grid().points_per_dim();
    let sheets: Vec<Vec<f64>> = (0..bands.band_count()).map(|b| bands.band(b)).collect();
    let mut worst = 0.0_f64;
    for c in &surface.contours {
        let sheet = Sheet {
            f: &sheets[c.band],
            n,
            level: surface.level,
        };
        for v in &c.vertices {
            let x = v[0] * n as f64;
            let y = v[1] * n as f64;
            let value = if (x - x.round()).abs() <= (y - y.round()).abs() {
                let i = x.round() as i64;
                let j = y.floor() as i64;
                let t = y - j as f64;
                (1.0 - t) * sheet.value(i, j) + t * sheet.value(i, j + 1)
            } else {
                let j = y.round() as i64;
                let i = x.floor() as i64;
                let t = x - i as f64;
                (1.0 - t) * sheet.value(i, j) + t * sheet.value(i + 1, j)
            };
            worst = worst.max((value - surface.level).abs());
        }
    }
    worst
}
