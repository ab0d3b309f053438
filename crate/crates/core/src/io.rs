//! Run configuration files and initial data.
//!
//! The format is one `key=value` per line, `#` starts a comment. Species
//! blocks use dotted keys numbered from 1:
//!
//! ```text
//! dim=1
//! n=512
//! length=64
//! T=1
//! dt=0.001
//! species.1.alpha=1
//! species.1.beta=1
//! species.1.u0.kind=gaussian
//! species.1.u0.amplitude=0.5
//! species.1.u0.width=2
//! V0.kind=gaussian
//! V0.amplitude=0.1
//! V0.width=2
//! ```
//!
//! A species exists when its `u0.kind` is given. `V0` and `V1` default to
//! zero. Parsing reports every problem it finds, each with its line.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{ConfigError, Error, Result};
use crate::grid::snapshot::read_snapshot_on;
use crate::grid::{step_count, Grid, ScalarField};
use crate::scalar::{lit, Real};
use crate::sim::{SolverConfig, Species, WrapPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DataKind {
    Gaussian,
    DGaussian,
    Mode,
    File,
}

impl FromStr for DataKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "dgaussian" => Ok(Self::DGaussian),
            "mode" => Ok(Self::Mode),
            "file" => Ok(Self::File),
            _ => Err(format!(
                "unknown kind `{s}` (expected gaussian, dgaussian, mode or file)"
            )),
        }
    }
}

impl DataKind {
    fn name(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::DGaussian => "dgaussian",
            Self::Mode => "mode",
            Self::File => "file",
        }
    }
}

/// Recipe for one initial field.
///
/// * `gaussian`: `A exp(-d^2 / (2 w^2))`, `d` the periodic distance to the
///   center.
/// * `dgaussian`: `A (d_x / w) exp(-d^2 / (2 w^2))`, sign-changing.
/// * `mode`: `A cos(2 pi (k1 x + k2 y) / L)`.
/// * `file`: a DBW1 snapshot on the run's grid.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialDataSpec {
    pub kind: DataKind,
    pub amplitude: f64,
    /// Center per axis; `None` means the middle of the box.
    pub center: [Option<f64>; 2],
    pub width: f64,
    pub wavenumber: [i64; 2],
    pub path: Option<PathBuf>,
}

impl InitialDataSpec {
    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        Self {
            kind: DataKind::Gaussian,
            amplitude,
            center: [None, None],
            width,
            wavenumber: [0, 0],
            path: None,
        }
    }

    pub fn dgaussian(amplitude: f64, width: f64) -> Self {
        Self {
            kind: DataKind::DGaussian,
            ..Self::gaussian(amplitude, width)
        }
    }

    pub fn mode(amplitude: f64, k: [i64; 2]) -> Self {
        Self {
            kind: DataKind::Mode,
            wavenumber: k,
            ..Self::gaussian(amplitude, 1.0)
        }
    }

    pub fn with_center(mut self, c: [f64; 2]) -> Self {
        self.center = [Some(c[0]), Some(c[1])];
        self
    }

    /// Samples the field on `grid`; relative file paths resolve against
    /// `base`.
    pub fn realize<T: Real>(&self, grid: &Grid<T>, base: &Path) -> Result<ScalarField<T>> {
        let l = grid.length();
        let half = l / lit(2.0);
        let c = [
            self.center[0].map(lit).unwrap_or(half),
            self.center[1].map(lit).unwrap_or(half),
        ];
        // minimal-image offset
        let offset = |x: T, c: T| {
            let mut d = x - c;
            d = d - l * (d / l).round();
            d
        };
        let amp: T = lit(self.amplitude);
        let w: T = lit(self.width);
        let two: T = lit(2.0);
        let dim = grid.dim();
        match self.kind {
            DataKind::Gaussian | DataKind::DGaussian => {
                let deriv = self.kind == DataKind::DGaussian;
                Ok(ScalarField::from_fn(grid, |x| {
                    let dx = offset(x[0], c[0]);
                    let dy = if dim == 2 { offset(x[1], c[1]) } else { T::zero() };
                    let e = (-(dx * dx + dy * dy) / (two * w * w)).exp();
                    if deriv {
                        amp * dx / w * e
                    } else {
                        amp * e
                    }
                }))
            }
            DataKind::Mode => {
                let k: [T; 2] = [lit(self.wavenumber[0] as f64), lit(self.wavenumber[1] as f64)];
                let f = T::PI() * two / l;
                Ok(ScalarField::from_fn(grid, |x| {
                    let y = if dim == 2 { x[1] } else { T::zero() };
                    amp * (f * (k[0] * x[0] + k[1] * y)).cos()
                }))
            }
            DataKind::File => {
                let p = self
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument("file data without a path".into()))?;
                let p = if p.is_relative() { base.join(p) } else { p.clone() };
                let file = File::open(&p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
                read_snapshot_on(grid, BufReader::new(file))
            }
        }
    }

    fn canonical(&self, prefix: &str, out: &mut Vec<String>) {
        out.push(format!("{prefix}.kind={}", self.kind.name()));
        match self.kind {
            DataKind::Gaussian | DataKind::DGaussian => {
                out.push(format!("{prefix}.amplitude={:?}", self.amplitude));
                out.push(format!("{prefix}.width={:?}", self.width));
                for (name, c) in ["center", "center2"].iter().zip(self.center) {
                    if let Some(c) = c {
                        out.push(format!("{prefix}.{name}={c:?}"));
                    }
                }
            }
            DataKind::Mode => {
                out.push(format!("{prefix}.amplitude={:?}", self.amplitude));
                out.push(format!("{prefix}.wavenumber={}", self.wavenumber[0]));
                out.push(format!("{prefix}.wavenumber2={}", self.wavenumber[1]));
            }
            DataKind::File => {
                let p = self.path.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
                out.push(format!("{prefix}.path={p}"));
            }
        }
    }
}

/// Output options of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputOptions {
    /// Write a snapshot every `stride` steps; 0 writes only the first and
    /// last frames.
    pub snapshot_stride: usize,
    pub seed: u64,
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self {
            snapshot_stride: 0,
            seed: 0,
        }
    }
}

/// Species block of a parsed configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeciesSpec {
    pub alpha: f64,
    pub beta: f64,
    pub u0: InitialDataSpec,
}

/// A validated configuration file.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
    pub t_final: f64,
    pub dt: f64,
    pub wrap_policy: WrapPolicy,
    pub species: Vec<SpeciesSpec>,
    pub v0: Option<InitialDataSpec>,
    pub v1: Option<InitialDataSpec>,
    pub output: OutputOptions,
}

impl RunSpec {
    pub fn grid<T: Real>(&self) -> Result<Grid<T>> {
        Grid::new(self.dim, self.n, lit(self.length))
    }

    pub fn solver_config<T: Real>(&self) -> Result<SolverConfig<T>> {
        SolverConfig::new(
            self.grid()?,
            lit(self.t_final),
            lit(self.dt),
            self.species
                .iter()
                .map(|s| Species::new(lit(s.alpha), lit(s.beta)))
                .collect(),
            self.wrap_policy,
        )
    }

    /// `(u0 per species, V0, V1)` sampled on `grid`.
    pub fn initial_data<T: Real>(
        &self,
        grid: &Grid<T>,
        base: &Path,
    ) -> Result<(Vec<ScalarField<T>>, ScalarField<T>, ScalarField<T>)> {
        let u0 = self
            .species
            .iter()
            .map(|s| s.u0.realize(grid, base))
            .collect::<Result<Vec<_>>>()?;
        let wave = |d: &Option<InitialDataSpec>| match d {
            Some(d) => d.realize(grid, base),
            None => Ok(ScalarField::zeros(grid)),
        };
        Ok((u0, wave(&self.v0)?, wave(&self.v1)?))
    }

    /// Sorted `key=value` lines with defaults filled in and numbers in
    /// shortest round-trip form.
    pub fn canonical(&self) -> String {
        let mut lines = vec![
            format!("dim={}", self.dim),
            format!("n={}", self.n),
            format!("length={:?}", self.length),
            format!("T={:?}", self.t_final),
            format!("dt={:?}", self.dt),
            format!("wrap_policy={}", self.wrap_policy),
            format!("seed={}", self.output.seed),
            format!("output.snapshot_stride={}", self.output.snapshot_stride),
        ];
        for (i, s) in self.species.iter().enumerate() {
            let p = format!("species.{}", i + 1);
            lines.push(format!("{p}.alpha={:?}", s.alpha));
            lines.push(format!("{p}.beta={:?}", s.beta));
            s.u0.canonical(&format!("{p}.u0"), &mut lines);
        }
        for (name, d) in [("V0", &self.v0), ("V1", &self.v1)] {
            if let Some(d) = d {
                d.canonical(name, &mut lines);
            }
        }
        lines.sort();
        lines.join("\n")
    }

    /// First 64 bits of the SHA-256 of [`RunSpec::canonical`], in hex.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

struct Entry {
    line: usize,
    value: String,
}

struct Parser {
    entries: BTreeMap<String, Entry>,
    errors: Vec<ConfigError>,
    used: BTreeSet<String>,
}

impl Parser {
    fn err(&mut self, line: usize, message: impl Into<String>) {
        self.errors.push(ConfigError {
            line,
            message: message.into(),
        });
    }

    fn take<V: FromStr>(&mut self, key: &str, what: &str) -> Option<(V, usize)> {
        self.used.insert(key.to_string());
        let (line, raw) = {
            let e = self.entries.get(key)?;
            (e.line, e.value.clone())
        };
        match raw.parse::<V>() {
            Ok(v) => Some((v, line)),
            Err(_) => {
                self.err(line, format!("`{key}` must be {what}, got `{raw}`"));
                None
            }
        }
    }

    fn real(&mut self, key: &str) -> Option<(f64, usize)> {
        let r = self.take::<f64>(key, "a number")?;
        if !r.0.is_finite() {
            self.err(r.1, format!("`{key}` must be finite"));
            return None;
        }
        Some(r)
    }

    fn required<V>(&mut self, key: &str, v: Option<V>) -> Option<V> {
        if v.is_none() && !self.entries.contains_key(key) {
            self.err(0, format!("missing required key `{key}`"));
        }
        v
    }

    fn data(&mut self, prefix: &str, dim: usize) -> Option<InitialDataSpec> {
        let kind_key = format!("{prefix}.kind");
        let (kind, kind_line) = self.take::<String>(&kind_key, "a kind")?;
        let kind = match kind.parse::<DataKind>() {
            Ok(k) => k,
            Err(m) => {
                self.err(kind_line, m);
                return None;
            }
        };
        let amplitude = self.real(&format!("{prefix}.amplitude")).map(|v| v.0).unwrap_or(1.0);
        let mut spec = InitialDataSpec::gaussian(amplitude, 1.0);
        spec.kind = kind;
        let allowed: &[&str] = match kind {
            DataKind::Gaussian | DataKind::DGaussian => &["kind", "amplitude", "center", "center2", "width"],
            DataKind::Mode => &["kind", "amplitude", "wavenumber", "wavenumber2"],
            DataKind::File => &["kind", "path"],
        };
        let stray: Vec<(String, usize)> = self
            .entries
            .iter()
            .filter_map(|(k, e)| {
                let rest = k.strip_prefix(prefix)?.strip_prefix('.')?;
                (!allowed.contains(&rest)).then(|| (k.clone(), e.line))
            })
            .collect();
        for (k, line) in stray {
            self.used.insert(k.clone());
            self.err(line, format!("`{k}` does not apply to kind `{}`", kind.name()));
        }
        match kind {
            DataKind::Gaussian | DataKind::DGaussian => {
                let wkey = format!("{prefix}.width");
                match self.real(&wkey) {
                    Some((w, line)) if w <= 0.0 => self.err(line, format!("`{wkey}` must be positive")),
                    Some((w, _)) => spec.width = w,
                    None => {
                        if !self.entries.contains_key(&wkey) {
                            self.err(kind_line, format!("missing `{wkey}`"));
                        }
                    }
                }
                spec.center[0] = self.real(&format!("{prefix}.center")).map(|v| v.0);
                spec.center[1] = self.real(&format!("{prefix}.center2")).map(|v| v.0).or(spec.center[0]);
            }
            DataKind::Mode => {
                let k1 = self.take::<i64>(&format!("{prefix}.wavenumber"), "an integer").map(|v| v.0);
                let k2 = self.take::<i64>(&format!("{prefix}.wavenumber2"), "an integer");
                if let Some((k, line)) = k2 {
                    if dim == 1 && k != 0 {
                        self.err(line, format!("`{prefix}.wavenumber2` needs dim=2"));
                    }
                }
                spec.wavenumber = [k1.unwrap_or(1), k2.map(|v| v.0).unwrap_or(0)];
            }
            DataKind::File => {
                let key = format!("{prefix}.path");
                match self.take::<String>(&key, "a path") {
                    Some((p, _)) => spec.path = Some(PathBuf::from(p)),
                    None => self.err(kind_line, format!("missing `{key}`")),
                }
            }
        }
        Some(spec)
    }
}

/// Parses a configuration file, collecting all errors.
pub fn parse_config(text: &str) -> Result<RunSpec> {
    let mut p = Parser {
        entries: BTreeMap::new(),
        errors: Vec::new(),
        used: BTreeSet::new(),
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            p.err(line, format!("expected key=value, got `{content}`"));
            continue;
        };
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if k.is_empty() {
            p.err(line, "empty key");
            continue;
        }
        if let Some(prev) = p.entries.get(&k) {
            let first = prev.line;
            p.err(line, format!("duplicate key `{k}` (first set on line {first})"));
            continue;
        }
        p.entries.insert(k, Entry { line, value: v });
    }

    let dim = p.take::<usize>("dim", "an integer").map(|v| v.0);
    let dim = p.required("dim", dim).unwrap_or(1);
    if dim != 1 && dim != 2 {
        let line = p.entries.get("dim").map(|e| e.line).unwrap_or(0);
        p.err(line, "dim must be 1 or 2");
    }
    let n = p.take::<usize>("n", "an integer");
    let n = p.required("n", n);
    if let Some((n, line)) = n {
        if !n.is_power_of_two() {
            p.err(line, "n must be a power of two");
        } else if n < 16 {
            p.err(line, "n must be at least 16");
        }
    }
    let positive = |p: &mut Parser, key: &str| -> Option<f64> {
        let v = p.real(key);
        let v = p.required(key, v)?;
        if v.0 <= 0.0 {
            p.err(v.1, format!("{key} must be positive"));
            return None;
        }
        Some(v.0)
    };
    let length = positive(&mut p, "length");
    let t_final = positive(&mut p, "T");
    let dt = positive(&mut p, "dt");
    if let (Some(t), Some(d)) = (t_final, dt) {
        if let Err(e) = step_count(t, d) {
            let line = p.entries.get("dt").map(|e| e.line).unwrap_or(0);
            p.err(line, e.to_string());
        }
    }
    let wrap_policy = match p.take::<String>("wrap_policy", "warn or error") {
        Some((s, line)) => match s.parse::<WrapPolicy>() {
            Ok(w) => w,
            Err(e) => {
                p.err(line, e.to_string());
                WrapPolicy::Warn
            }
        },
        None => WrapPolicy::Warn,
    };
    let seed = p.take::<u64>("seed", "a nonnegative integer").map(|v| v.0).unwrap_or(0);
    let stride = p
        .take::<usize>("output.snapshot_stride", "a nonnegative integer")
        .map(|v| v.0)
        .unwrap_or(0);

    // species blocks
    let mut indices: BTreeMap<usize, Vec<(String, usize)>> = BTreeMap::new();
    let keys: Vec<(String, usize)> = p.entries.iter().map(|(k, e)| (k.clone(), e.line)).collect();
    for (k, line) in &keys {
        let Some(rest) = k.strip_prefix("species.") else { continue };
        let idx = rest.split('.').next().unwrap_or("");
        match idx.parse::<usize>() {
            Ok(i) if i >= 1 => indices.entry(i).or_default().push((k.clone(), *line)),
            _ => {
                p.used.insert(k.clone());
                p.err(*line, format!("`{k}`: species are numbered from 1"));
            }
        }
    }
    let mut species = Vec::new();
    let declared: Vec<usize> = indices
        .keys()
        .copied()
        .filter(|i| p.entries.contains_key(&format!("species.{i}.u0.kind")))
        .collect();
    for (&i, keys) in &indices {
        if !declared.contains(&i) {
            for (k, line) in keys {
                p.used.insert(k.clone());
                p.err(
                    *line,
                    format!("orphan key `{k}`: species {i} has no `species.{i}.u0.kind`"),
                );
            }
        }
    }
    for (pos, &i) in declared.iter().enumerate() {
        if i != pos + 1 {
            let line = p.entries[&format!("species.{i}.u0.kind")].line;
            p.err(line, format!("species must be numbered 1..m without gaps; found species {i}"));
            continue;
        }
        let alpha = p.real(&format!("species.{i}.alpha")).map(|v| v.0).unwrap_or(1.0);
        let beta = p.real(&format!("species.{i}.beta")).map(|v| v.0).unwrap_or(1.0);
        if let Some(u0) = p.data(&format!("species.{i}.u0"), dim) {
            species.push(SpeciesSpec { alpha, beta, u0 });
        }
    }
    if declared.is_empty() {
        p.err(0, "at least one species block (`species.1.u0.kind`) is required");
    }
    let v0 = p.data("V0", dim);
    let v1 = p.data("V1", dim);

    let unknown: Vec<(String, usize)> = p
        .entries
        .iter()
        .filter(|(k, _)| !p.used.contains(*k))
        .map(|(k, e)| (k.clone(), e.line))
        .collect();
    for (k, line) in unknown {
        p.err(line, format!("unknown key `{k}`"));
    }

    if !p.errors.is_empty() {
        p.errors.sort_by_key(|e| e.line);
        return Err(Error::Config(p.errors));
    }
    Ok(RunSpec {
        dim,
        n: n.map(|v| v.0).unwrap_or(0),
        length: length.unwrap_or(0.0),
        t_final: t_final.unwrap_or(0.0),
        dt: dt.unwrap_or(0.0),
        wrap_policy,
        species,
        v0,
        v1,
        output: OutputOptions {
            snapshot_stride: stride,
            seed,
        },
    })
}
