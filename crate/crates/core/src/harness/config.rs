//! JSON run configuration. Parsed by hand from `serde_json::Value` so that
//! every error carries the path of the offending field.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::family::GroverRepresentation;
use crate::policy::NumericalPolicy;
use crate::propagate::{Substeps, TimeGrid};
use crate::spectral::BandSelector;

pub const DEFAULT_GRID_POINTS: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Grover {
        n: Vec<u32>,
        representation: GroverRepresentation,
        marked: u64,
    },
    Random {
        dim: usize,
        seed: u64,
        harmonics: usize,
    },
    /// JSON file `{"h0": M, "h1": M}`; entries are numbers or `[re, im]`.
    MatrixFile { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TauSpec {
    Values(Vec<f64>),
    /// `tau = constant / g_min^gmin_exponent`, per problem instance.
    Scaled { constant: f64, gmin_exponent: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundSelection {
    pub theorem3: bool,
    pub theorem4: bool,
}

impl Default for BoundSelection {
    fn default() -> Self {
        Self {
            theorem3: true,
            theorem4: true,
        }
    }
}

/// Dynamical checks computed alongside the diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckSelection {
    pub intertwining: bool,
    pub volterra: bool,
}

impl Default for CheckSelection {
    fn default() -> Self {
        Self {
            intertwining: true,
            volterra: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub schedules: Vec<String>,
    pub tau: TauSpec,
    pub grid: usize,
    pub band: BandSelector,
    pub bounds: BoundSelection,
    pub checks: CheckSelection,
    pub theorem4_c: f64,
    pub output: Option<PathBuf>,
    pub policy: NumericalPolicy,
    pub workers: Option<usize>,
    /// Record wall-clock time; off by default so output is reproducible.
    pub timing: bool,
    pub substeps: Substeps,
}

fn err(path: &str, message: impl Into<String>) -> Error {
    Error::config(path, message)
}

fn join(parent: &str, key: &str) -> String {
    if parent.is_empty() {
        key.to_string()
    } else {
        format!("{parent}.{key}")
    }
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| err(path, "expected an object"))
}

fn check_keys(map: &Map<String, Value>, path: &str, allowed: &[&str]) -> Result<()> {
    for key in map.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(err(&join(path, key), format!("unknown key (expected one of: {})", allowed.join(", "))));
        }
    }
    Ok(())
}

fn required<'a>(map: &'a Map<String, Value>, path: &str, key: &str) -> Result<&'a Value> {
    map.get(key).ok_or_else(|| err(&join(path, key), "missing required field"))
}

fn as_f64(v: &Value, path: &str) -> Result<f64> {
    let x = v.as_f64().ok_or_else(|| err(path, "expected a number"))?;
    if !x.is_finite() {
        return Err(err(path, "expected a finite number"));
    }
    Ok(x)
}

fn as_u64(v: &Value, path: &str) -> Result<u64> {
    v.as_u64().ok_or_else(|| err(path, "expected a non-negative integer"))
}

fn as_usize(v: &Value, path: &str) -> Result<usize> {
    usize::try_from(as_u64(v, path)?).map_err(|_| err(path, "integer too large"))
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| err(path, "expected a string"))
}

/// A scalar or a non-empty list of scalars.
fn one_or_many<T>(v: &Value, path: &str, f: impl Fn(&Value, &str) -> Result<T>) -> Result<Vec<T>> {
    match v {
        Value::Array(items) => {
            if items.is_empty() {
                return Err(err(path, "list must not be empty"));
            }
            items
                .iter()
                .enumerate()
                .map(|(i, x)| f(x, &format!("{path}[{i}]")))
                .collect()
        }
        other => Ok(vec![f(other, path)?]),
    }
}

/// The single key of a tagged object like `{"grover": {...}}`.
fn tagged<'a>(v: &'a Value, path: &str, tags: &[&str]) -> Result<(&'a str, &'a Value)> {
    let map = object(v, path)?;
    if map.len() != 1 {
        return Err(err(path, format!("expected exactly one of: {}", tags.join(", "))));
    }
    let (k, inner) = map.iter().next().unwrap();
    if !tags.contains(&k.as_str()) {
        return Err(err(&join(path, k), format!("unknown variant (expected one of: {})", tags.join(", "))));
    }
    Ok((k.as_str(), inner))
}

fn parse_problem(v: &Value, path: &str) -> Result<ProblemSpec> {
    let (tag, inner) = tagged(v, path, &["grover", "random", "matrix_file"])?;
    let path = join(path, tag);
    let map = object(inner, &path)?;
    match tag {
        "grover" => {
            check_keys(map, &path, &["n", "representation", "marked"])?;
            let np = join(&path, "n");
            let n = one_or_many(required(map, &path, "n")?, &np, |x, p| {
                let n = as_u64(x, p)?;
                u32::try_from(n).map_err(|_| err(p, "qubit count too large"))
            })?;
            let representation = match map.get("representation") {
                None => GroverRepresentation::Full,
                Some(r) => {
                    let rp = join(&path, "representation");
                    match as_str(r, &rp)? {
                        "full" => GroverRepresentation::Full,
                        "reduced" => GroverRepresentation::Reduced,
                        other => return Err(err(&rp, format!("unknown representation {other:?} (full, reduced)"))),
                    }
                }
            };
            let marked = match map.get("marked") {
                None => 0,
                Some(m) => as_u64(m, &join(&path, "marked"))?,
            };
            Ok(ProblemSpec::Grover {
                n,
                representation,
                marked,
            })
        }
        "random" => {
            check_keys(map, &path, &["dim", "seed", "harmonics"])?;
            Ok(ProblemSpec::Random {
                dim: as_usize(required(map, &path, "dim")?, &join(&path, "dim"))?,
                seed: match map.get("seed") {
                    None => 0,
                    Some(s) => as_u64(s, &join(&path, "seed"))?,
                },
                harmonics: match map.get("harmonics") {
                    None => 2,
                    Some(h) => as_usize(h, &join(&path, "harmonics"))?,
                },
            })
        }
        _ => {
            check_keys(map, &path, &["path"])?;
            Ok(ProblemSpec::MatrixFile {
                path: PathBuf::from(as_str(required(map, &path, "path")?, &join(&path, "path"))?),
            })
        }
    }
}

fn parse_tau(v: &Value, path: &str) -> Result<TauSpec> {
    if let Value::Object(_) = v {
        let (_, inner) = tagged(v, path, &["scaled"])?;
        let sp = join(path, "scaled");
        let map = object(inner, &sp)?;
        check_keys(map, &sp, &["constant", "gmin_exponent"])?;
        let constant = as_f64(required(map, &sp, "constant")?, &join(&sp, "constant"))?;
        if constant <= 0.0 {
            return Err(err(&join(&sp, "constant"), "must be positive"));
        }
        let gmin_exponent = as_f64(required(map, &sp, "gmin_exponent")?, &join(&sp, "gmin_exponent"))?;
        return Ok(TauSpec::Scaled {
            constant,
            gmin_exponent,
        });
    }
    let values = one_or_many(v, path, |x, p| {
        let t = as_f64(x, p)?;
        if t < 0.0 {
            return Err(err(p, "tau must be non-negative"));
        }
        Ok(t)
    })?;
    Ok(TauSpec::Values(values))
}

fn parse_band(v: &Value, path: &str) -> Result<BandSelector> {
    if let Some(s) = v.as_str() {
        return match s {
            "ground" => Ok(BandSelector::ground()),
            other => Err(err(path, format!("unknown band {other:?} (ground, {{\"clusters\": [...]}}, {{\"window\": [lo, hi]}})"))),
        };
    }
    let (tag, inner) = tagged(v, path, &["clusters", "window"])?;
    let p = join(path, tag);
    match tag {
        "clusters" => {
            let items = inner.as_array().ok_or_else(|| err(&p, "expected a list of cluster indices"))?;
            if items.is_empty() {
                return Err(err(&p, "list must not be empty"));
            }
            let idx = items
                .iter()
                .enumerate()
                .map(|(i, x)| as_usize(x, &format!("{p}[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            Ok(BandSelector::Clusters(idx))
        }
        _ => {
            let items = inner.as_array().ok_or_else(|| err(&p, "expected [lo, hi]"))?;
            if items.len() != 2 {
                return Err(err(&p, "expected [lo, hi]"));
            }
            let lo = as_f64(&items[0], &format!("{p}[0]"))?;
            let hi = as_f64(&items[1], &format!("{p}[1]"))?;
            if lo >= hi {
                return Err(err(&p, "window must satisfy lo < hi"));
            }
            Ok(BandSelector::Window { lo, hi })
        }
    }
}

fn parse_names(v: &Value, path: &str, allowed: &[&str]) -> Result<BTreeSet<String>> {
    let items = v.as_array().ok_or_else(|| err(path, "expected a list of names"))?;
    let mut out = BTreeSet::new();
    for (i, x) in items.iter().enumerate() {
        let p = format!("{path}[{i}]");
        let name = as_str(x, &p)?;
        if !allowed.contains(&name) {
            return Err(err(&p, format!("unknown name {name:?} (expected one of: {})", allowed.join(", "))));
        }
        out.insert(name.to_string());
    }
    Ok(out)
}

fn parse_policy(v: &Value, path: &str) -> Result<NumericalPolicy> {
    let map = object(v, path)?;
    let defaults = serde_json::to_value(NumericalPolicy::default()).expect("policy serializes");
    let known: Vec<&str> = defaults.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    check_keys(map, path, &known)?;
    serde_json::from_value(v.clone()).map_err(|e| err(path, e.to_string()))
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| err("", format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_json_str(&text)?;
        if let ProblemSpec::MatrixFile { path: p } = &mut config.problem {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(config)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| err("", format!("invalid JSON: {e}")))?;
        Self::from_value(&v)
    }

    pub fn from_value(v: &Value) -> Result<Self> {
        let map = object(v, "")?;
        check_keys(
            map,
            "",
            &[
                "problem",
                "schedule",
                "tau",
                "grid",
                "band",
                "bounds",
                "checks",
                "theorem4_c",
                "output",
                "policy",
                "workers",
                "timing",
                "substeps",
            ],
        )?;
        let problem = parse_problem(required(map, "", "problem")?, "problem")?;
        let schedules = match map.get("schedule") {
            None => vec!["linear".to_string()],
            Some(s) => one_or_many(s, "schedule", |x, p| Ok(as_str(x, p)?.to_string()))?,
        };
        let tau = parse_tau(required(map, "", "tau")?, "tau")?;
        let grid = match map.get("grid") {
            None => DEFAULT_GRID_POINTS,
            Some(g) => {
                let n = as_usize(g, "grid")?;
                if n < TimeGrid::MIN_POINTS {
                    return Err(err("grid", format!("need at least {} points", TimeGrid::MIN_POINTS)));
                }
                n
            }
        };
        let band = match map.get("band") {
            None => BandSelector::ground(),
            Some(b) => parse_band(b, "band")?,
        };
        let bounds = match map.get("bounds") {
            None => BoundSelection::default(),
            Some(b) => {
                let names = parse_names(b, "bounds", &["theorem3", "theorem4"])?;
                BoundSelection {
                    theorem3: names.contains("theorem3"),
                    theorem4: names.contains("theorem4"),
                }
            }
        };
        let checks = match map.get("checks") {
            None => CheckSelection::default(),
            Some(c) => {
                let names = parse_names(c, "checks", &["intertwining", "volterra"])?;
                CheckSelection {
                    intertwining: names.contains("intertwining"),
                    volterra: names.contains("volterra"),
                }
            }
        };
        let theorem4_c = match map.get("theorem4_c") {
            None => 1.0,
            Some(c) => {
                let c = as_f64(c, "theorem4_c")?;
                if c <= 0.0 {
                    return Err(err("theorem4_c", "must be positive"));
                }
                c
            }
        };
        let output = match map.get("output") {
            None | Some(Value::Null) => None,
            Some(o) => Some(PathBuf::from(as_str(o, "output")?)),
        };
        let policy = match map.get("policy") {
            None => NumericalPolicy::default(),
            Some(p) => parse_policy(p, "policy")?,
        };
        let workers = match map.get("workers") {
            None => None,
            Some(w) => {
                let w = as_usize(w, "workers")?;
                if w == 0 {
                    return Err(err("workers", "must be at least 1"));
                }
                Some(w)
            }
        };
        let timing = match map.get("timing") {
            None => false,
            Some(t) => t.as_bool().ok_or_else(|| err("timing", "expected a boolean"))?,
        };
        let substeps = match map.get("substeps") {
            None => Substeps::Auto,
            Some(Value::String(s)) if s == "auto" => Substeps::Auto,
            Some(s) => {
                let n = as_usize(s, "substeps").map_err(|_| err("substeps", "expected \"auto\" or a positive integer"))?;
                if n == 0 {
                    return Err(err("substeps", "must be at least 1"));
                }
                Substeps::Fixed(n)
            }
        };
        Ok(Self {
            problem,
            schedules,
            tau,
            grid,
            band,
            bounds,
            checks,
            theorem4_c,
            output,
            policy,
            workers,
            timing,
            substeps,
        })
    }
}
