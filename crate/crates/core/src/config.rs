//! Flat `key=value` run configuration.
//!
//! One or more whitespace-separated `key=value` pairs per line, `#` starts a
//! comment. `task` and `hopping` may repeat; every other key may appear once.
//!
//! ```text
//! model=harper p=1 q=3
//! grid_N=64
//! task=bands task=fermi(0.5) task=ids(-3,3,100)
//! ```

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::magnetic::{Flux, FluxData};
use crate::model::{
    continuum, free_chain, harper, lieb, square_laplacian, ContinuumSpec, Hopping, LatticeModel, PotentialSpec,
};

pub const DEFAULT_GRID: usize = 64;
pub const DEFAULT_Q_MAX: u32 = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ModelSpec {
    FreeChain,
    SquareLaplacian,
    Harper {
        p: i64,
        q: i64,
    },
    Lieb,
    Continuum(ContinuumSpec),
    Inline {
        rank: usize,
        sites: usize,
        hoppings: Vec<Hopping>,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<LatticeModel> {
        match self {
            ModelSpec::FreeChain => Ok(free_chain()),
            ModelSpec::SquareLaplacian => Ok(square_laplacian()),
            ModelSpec::Harper { p, q } => Ok(harper(Flux::new(*p, *q)?)),
            ModelSpec::Lieb => Ok(lieb()),
            ModelSpec::Continuum(spec) => continuum(spec),
            ModelSpec::Inline { rank, sites, hoppings } => LatticeModel::tight_binding(
                "inline",
                *rank,
                *sites,
                hoppings.clone(),
                FluxData::uniform(Flux::zero()),
            ),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::FreeChain => write!(f, "free_chain"),
            ModelSpec::SquareLaplacian => write!(f, "square_laplacian"),
            ModelSpec::Harper { p, q } => write!(f, "harper({p},{q})"),
            ModelSpec::Lieb => write!(f, "lieb"),
            ModelSpec::Continuum(s) => write!(
                f,
                "continuum(rank={},m={},flux={},V={:?})",
                s.rank, s.grid_per_dim, s.flux_quanta, s.potential
            ),
            ModelSpec::Inline { rank, sites, hoppings } => {
                write!(f, "inline(rank={rank},sites={sites},hoppings={})", hoppings.len())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    Bands,
    Butterfly { q_max: u32 },
    Fermi { energy: f64 },
    Ids { lo: f64, hi: f64, steps: usize },
    Verify,
    Lift { band: usize, k: Vec<f64> },
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::Bands => "bands",
            Task::Butterfly { .. } => "butterfly",
            Task::Fermi { .. } => "fermi",
            Task::Ids { .. } => "ids",
            Task::Verify => "verify",
            Task::Lift { .. } => "lift",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
    Gnuplot,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Gnuplot => "dat",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "gnuplot" => Ok(Format::Gnuplot),
            _ => Err(format!("unknown format '{s}' (expected csv, json or gnuplot)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub grid_n: usize,
    pub tasks: Vec<Task>,
    pub output_dir: Option<PathBuf>,
    pub format: Format,
    /// `None` means 1e-9 of the spectral width.
    pub flat_tol: Option<f64>,
    pub threads: Option<usize>,
    pub polish: bool,
    pub ids_per_site: bool,
    pub broken_gauge: bool,
    pub seed: u64,
}

struct Entry {
    line: usize,
    value: String,
}

fn split_args(line: usize, s: &str, name: &str) -> Result<Vec<String>> {
    let inner = s
        .strip_prefix(name)
        .and_then(|r| r.strip_prefix('('))
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| Error::config(line, format!("malformed task '{s}'")))?;
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    Ok(inner.split(',').map(|x| x.trim().to_string()).collect())
}

fn num<T: std::str::FromStr>(line: usize, key: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::config(line, format!("{key}: cannot parse '{s}'")))
}

fn finite(line: usize, key: &str, s: &str) -> Result<f64> {
    let v: f64 = num(line, key, s)?;
    if !v.is_finite() {
        return Err(Error::config(line, format!("{key}: value must be finite")));
    }
    Ok(v)
}

fn flag(line: usize, key: &str, s: &str) -> Result<bool> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(line, format!("{key}: expected true or false, got '{s}'"))),
    }
}

fn parse_task(line: usize, s: &str, q_max: Option<u32>) -> Result<Task> {
    let name = s.split('(').next().unwrap_or("");
    let args = if s.contains('(') {
        split_args(line, s, name)?
    } else {
        Vec::new()
    };
    let want = |n: usize| -> Result<()> {
        if args.len() == n {
            Ok(())
        } else {
            Err(Error::config(
                line,
                format!("task {name} expects {n} argument(s), got {}", args.len()),
            ))
        }
    };
    match name {
        "bands" => want(0).map(|_| Task::Bands),
        "verify" => want(0).map(|_| Task::Verify),
        "butterfly" => {
            let q_max = match args.len() {
                0 => q_max.unwrap_or(DEFAULT_Q_MAX),
                1 => num(line, "butterfly", &args[0])?,
                _ => return Err(Error::config(line, "butterfly takes at most one argument")),
            };
            if q_max < 1 {
                return Err(Error::config(line, "q_max must be at least 1"));
            }
            Ok(Task::Butterfly { q_max })
        }
        "fermi" => {
            want(1)?;
            Ok(Task::Fermi {
                energy: finite(line, "fermi", &args[0])?,
            })
        }
        "ids" => {
            want(3)?;
            let lo = finite(line, "ids", &args[0])?;
            let hi = finite(line, "ids", &args[1])?;
            let steps: usize = num(line, "ids", &args[2])?;
            if lo >= hi {
                return Err(Error::config(
                    line,
                    format!("ids range needs lo < hi, got {lo} >= {hi}"),
                ));
            }
            if steps == 0 {
                return Err(Error::config(line, "ids steps must be positive"));
            }
            Ok(Task::Ids { lo, hi, steps })
        }
        "lift" => {
            if args.len() < 2 {
                return Err(Error::config(line, "lift expects a band index and k coordinates"));
            }
            let band = num(line, "lift", &args[0])?;
            let k = args[1..]
                .iter()
                .map(|a| finite(line, "lift", a))
                .collect::<Result<_>>()?;
            Ok(Task::Lift { band, k })
        }
        _ => Err(Error::config(line, format!("unknown task '{s}'"))),
    }
}

fn parse_potential(line: usize, s: &str) -> Result<PotentialSpec> {
    if s == "zero" {
        return Ok(PotentialSpec::Zero);
    }
    if let Some(c) = s.strip_prefix("const:") {
        return Ok(PotentialSpec::Constant(finite(line, "potential", c)?));
    }
    if let Some(a) = s.strip_prefix("cosine:") {
        return Ok(PotentialSpec::Cosine(finite(line, "potential", a)?));
    }
    Err(Error::config(
        line,
        format!("potential: expected zero, const:<c> or cosine:<a>, got '{s}'"),
    ))
}

fn parse_hopping(line: usize, s: &str, rank: usize) -> Result<Hopping> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != rank + 4 {
        return Err(Error::config(
            line,
            format!("hopping expects from,to,{rank} offset(s),re,im; got '{s}'"),
        ));
    }
    let from = num(line, "hopping", parts[0])?;
    let to = num(line, "hopping", parts[1])?;
    let offset = parts[2..2 + rank]
        .iter()
        .map(|p| num(line, "hopping", p))
        .collect::<Result<Vec<i64>>>()?;
    let re = finite(line, "hopping", parts[rank + 2])?;
    let im = finite(line, "hopping", parts[rank + 3])?;
    Ok(Hopping::new(from, to, offset, Complex64::new(re, im)))
}

const KEYS: &[&str] = &[
    "model",
    "p",
    "q",
    "rank",
    "m",
    "potential",
    "flux_quanta",
    "sites",
    "hopping",
    "grid_N",
    "task",
    "q_max",
    "output_dir",
    "format",
    "flat_tol",
    "threads",
    "polish",
    "ids_per_site",
    "broken_gauge",
    "seed",
];

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut single: HashMap<&'static str, Entry> = HashMap::new();
    let mut tasks: Vec<Entry> = Vec::new();
    let mut hoppings: Vec<Entry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        for token in content.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| Error::config(line, format!("expected key=value, got '{token}'")))?;
            let key = KEYS
                .iter()
                .copied()
                .find(|k| *k == key)
                .ok_or_else(|| Error::config(line, format!("unknown key '{key}'")))?;
            let entry = Entry {
                line,
                value: value.to_string(),
            };
            match key {
                "task" => tasks.push(entry),
                "hopping" => hoppings.push(entry),
                _ => {
                    if let Some(prev) = single.insert(key, entry) {
                        return Err(Error::config(
                            line,
                            format!("duplicate key '{key}' (first set on line {})", prev.line),
                        ));
                    }
                }
            }
        }
    }

    let get = |k: &str| single.get(k);
    let model_entry = get("model").ok_or_else(|| Error::config(0, "missing required key 'model'"))?;
    let int_or = |k: &str, default: i64| -> Result<i64> { get(k).map_or(Ok(default), |e| num(e.line, k, &e.value)) };
    let require = |k: &str| -> Result<&Entry> {
        get(k).ok_or_else(|| {
            Error::config(
                model_entry.line,
                format!("model {} requires key '{k}'", model_entry.value),
            )
        })
    };

    let model_keys: &[&str] = match model_entry.value.as_str() {
        "harper" => &["p", "q"],
        "continuum" => &["rank", "m", "potential", "flux_quanta"],
        "inline" => &["rank", "sites"],
        _ => &[],
    };
    for k in ["p", "q", "rank", "m", "potential", "flux_quanta", "sites"] {
        if let Some(e) = get(k) {
            if !model_keys.contains(&k) {
                return Err(Error::config(
                    e.line,
                    format!("key '{k}' does not apply to model {}", model_entry.value),
                ));
            }
        }
    }
    if model_entry.value != "inline" {
        if let Some(e) = hoppings.first() {
            return Err(Error::config(e.line, "hopping entries need model=inline"));
        }
    }

    let model = match model_entry.value.as_str() {
        "free_chain" => ModelSpec::FreeChain,
        "square_laplacian" => ModelSpec::SquareLaplacian,
        "lieb" => ModelSpec::Lieb,
        "harper" => {
            let p = int_or("p", 1)?;
            let q_entry = require("q")?;
            let q: i64 = num(q_entry.line, "q", &q_entry.value)?;
            if q < 1 {
                return Err(Error::config(q_entry.line, "q must be at least 1"));
            }
            ModelSpec::Harper { p, q }
        }
        "continuum" => {
            let rank = int_or("rank", 1)?;
            if !(1..=3).contains(&rank) {
                return Err(Error::config(
                    get("rank").map_or(model_entry.line, |e| e.line),
                    "rank must be 1, 2 or 3",
                ));
            }
            let m_entry = require("m")?;
            let m: usize = num(m_entry.line, "m", &m_entry.value)?;
            if m < 4 {
                return Err(Error::config(m_entry.line, "m must be at least 4"));
            }
            let mut spec = ContinuumSpec::new(rank as usize, m);
            if let Some(e) = get("potential") {
                spec.potential = parse_potential(e.line, &e.value)?;
            }
            if let Some(e) = get("flux_quanta") {
                spec.flux_quanta = num(e.line, "flux_quanta", &e.value)?;
                if spec.flux_quanta != 0 && rank != 2 {
                    return Err(Error::config(e.line, "flux_quanta needs rank 2"));
                }
            }
            ModelSpec::Continuum(spec)
        }
        "inline" => {
            let r = require("rank")?;
            let rank: usize = num(r.line, "rank", &r.value)?;
            if !(1..=3).contains(&rank) {
                return Err(Error::config(r.line, "rank must be 1, 2 or 3"));
            }
            let s = require("sites")?;
            let sites: usize = num(s.line, "sites", &s.value)?;
            if sites == 0 {
                return Err(Error::config(s.line, "sites must be positive"));
            }
            let hops = hoppings
                .iter()
                .map(|e| parse_hopping(e.line, &e.value, rank))
                .collect::<Result<_>>()?;
            ModelSpec::Inline {
                rank,
                sites,
                hoppings: hops,
            }
        }
        other => return Err(Error::config(
            model_entry.line,
            format!(
                "unknown model '{other}' (expected free_chain, square_laplacian, harper, lieb, continuum or inline)"
            ),
        )),
    };
    // surface model validation errors with the model line
    model
        .build()
        .map_err(|e| Error::config(model_entry.line, e.to_string()))?;

    let grid_n = match get("grid_N") {
        Some(e) => {
            let n: usize = num(e.line, "grid_N", &e.value)?;
            if n < 2 {
                return Err(Error::config(e.line, format!("grid_N must be at least 2, got {n}")));
            }
            n
        }
        None => DEFAULT_GRID,
    };
    let q_max = match get("q_max") {
        Some(e) => {
            let q: u32 = num(e.line, "q_max", &e.value)?;
            if q < 1 {
                return Err(Error::config(e.line, "q_max must be at least 1"));
            }
            Some(q)
        }
        None => None,
    };
    let tasks = tasks
        .iter()
        .map(|e| parse_task(e.line, &e.value, q_max))
        .collect::<Result<Vec<_>>>()?;
    if tasks.is_empty() {
        return Err(Error::config(0, "no task given"));
    }
    let format = match get("format") {
        Some(e) => e.value.parse().map_err(|m: String| Error::config(e.line, m))?,
        None => Format::default(),
    };
    let flat_tol = match get("flat_tol") {
        Some(e) => {
            let t = finite(e.line, "flat_tol", &e.value)?;
            if t <= 0.0 {
                return Err(Error::config(e.line, "flat_tol must be positive"));
            }
            Some(t)
        }
        None => None,
    };
    let threads = match get("threads") {
        Some(e) => {
            let t: usize = num(e.line, "threads", &e.value)?;
            if t == 0 {
                return Err(Error::config(e.line, "threads must be positive"));
            }
            Some(t)
        }
        None => None,
    };
    let bool_or =
        |k: &str, default: bool| -> Result<bool> { get(k).map_or(Ok(default), |e| flag(e.line, k, &e.value)) };
    Ok(RunConfig {
        model,
        grid_n,
        tasks,
        output_dir: get("output_dir").map(|e| PathBuf::from(&e.value)),
        format,
        flat_tol,
        threads,
        polish: bool_or("polish", true)?,
        ids_per_site: bool_or("ids_per_site", false)?,
        broken_gauge: bool_or("broken_gauge", false)?,
        seed: get("seed").map_or(Ok(0x5eed), |e| num(e.line, "seed", &e.value))?,
    })
}
