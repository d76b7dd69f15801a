//! Plain-text serialization of noise paths.
//!
//! ```text
//! # kind=qwiener seed=5 dt=0.01 t0=-1 t1=1 modes=8
//! # length=1
//! # n_interior=16
//! # weights=1,0.00390625,...
//! # first_index=-100
//! # fallback=false
//! -1.0000000000000000e0 v1 ... vn
//! ```
//!
//! Lines starting with `##` are comments.
//!
//! Parameters are written with shortest round-trip formatting and values with
//! seventeen significant digits, so reading back reproduces the path exactly.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::{AmplitudeLaw, JumpLaw, ModeWeights, NoiseKind, NoisePath, NoiseSpec};
use crate::error::{Error, Result};
use crate::field_space::{Field, SpatialGrid};

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
}

fn amplitude_text(a: &AmplitudeLaw) -> String {
    match *a {
        AmplitudeLaw::Constant(c) => format!("constant:{c}"),
        AmplitudeLaw::Normal { mean, std } => format!("normal:{mean}:{std}"),
        AmplitudeLaw::Uniform { low, high } => format!("uniform:{low}:{high}"),
    }
}

/// Writes `path` in the text format.
pub fn write_path<W: Write>(path: &NoisePath, out: &mut W) -> Result<()> {
    let spec = path.spec();
    let grid = spec.grid();
    writeln!(
        out,
        "# kind={} seed={} dt={} t0={} t1={} modes={}",
        spec.kind().name(),
        path.seed(),
        path.dt(),
        path.t_start(),
        path.t_end(),
        spec.kind().modes()
    )?;
    writeln!(out, "# length={}", grid.length())?;
    writeln!(out, "# n_interior={}", grid.n_interior())?;
    match spec.kind() {
        NoiseKind::Zero => {}
        NoiseKind::QWiener { weights } => writeln!(out, "# weights={}", join(weights.weights()))?,
        NoiseKind::Fbm { hurst, weights } => {
            writeln!(out, "# hurst={hurst}")?;
            writeln!(out, "# weights={}", join(weights.weights()))?;
        }
        NoiseKind::Levy { drift_modes, weights, jump_rate, jump } => {
            writeln!(out, "# weights={}", join(weights.weights()))?;
            writeln!(out, "# drift={}", join(drift_modes))?;
            writeln!(out, "# jump_rate={jump_rate}")?;
            writeln!(out, "# jump_mode={}", jump.mode)?;
            writeln!(out, "# amplitude={}", amplitude_text(&jump.amplitude))?;
        }
    }
    writeln!(out, "# first_index={}", path.first_index())?;
    writeln!(out, "# fallback={}", path.used_cholesky_fallback())?;
    for (i, s) in path.snapshots().iter().enumerate() {
        write!(out, "{:.16e}", path.time(i))?;
        for v in s.values() {
            write!(out, " {v:.16e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

struct Header {
    values: HashMap<String, (usize, String)>,
}

impl Header {
    fn raw(&self, key: &str) -> Result<(usize, &str)> {
        self.values
            .get(key)
            .map(|(l, v)| (*l, v.as_str()))
            .ok_or_else(|| parse_err(0, format!("missing header key `{key}`")))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let (line, v) = self.raw(key)?;
        v.parse().map_err(|_| parse_err(line, format!("bad value `{v}` for `{key}`")))
    }

    fn list(&self, key: &str) -> Result<Vec<f64>> {
        let (line, v) = self.raw(key)?;
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|x| x.parse().map_err(|_| parse_err(line, format!("bad number `{x}` in `{key}`"))))
            .collect()
    }

    fn amplitude(&self) -> Result<AmplitudeLaw> {
        let (line, v) = self.raw("amplitude")?;
        let parts: Vec<&str> = v.split(':').collect();
        let num = |s: &str| s.parse::<f64>().map_err(|_| parse_err(line, format!("bad amplitude `{v}`")));
        match parts.as_slice() {
            ["constant", c] => Ok(AmplitudeLaw::Constant(num(c)?)),
            ["normal", m, s] => Ok(AmplitudeLaw::Normal { mean: num(m)?, std: num(s)? }),
            ["uniform", a, b] => Ok(AmplitudeLaw::Uniform { low: num(a)?, high: num(b)? }),
            _ => Err(parse_err(line, format!("bad amplitude `{v}`"))),
        }
    }
}

/// Reads a path written by [`write_path`].
pub fn read_path<R: BufRead>(input: R) -> Result<NoisePath> {
    let mut header = Header { values: HashMap::new() };
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with("##") {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            for token in rest.split_whitespace() {
                let (k, v) = token
                    .split_once('=')
                    .ok_or_else(|| parse_err(lineno, format!("expected key=value, got `{token}`")))?;
                header.values.insert(k.to_string(), (lineno, v.to_string()));
            }
            continue;
        }
        let nums = trimmed
            .split_whitespace()
            .map(|x| x.parse::<f64>().map_err(|_| parse_err(lineno, format!("bad number `{x}`"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push((lineno, nums));
    }
    let n: usize = header.get("n_interior")?;
    let length: f64 = header.get("length")?;
    let grid = SpatialGrid::new(n, length)?;
    let kind = match header.raw("kind")?.1 {
        "zero" => NoiseKind::Zero,
        "qwiener" => NoiseKind::QWiener { weights: ModeWeights::new(header.list("weights")?)? },
        "fbm" => NoiseKind::Fbm {
            hurst: header.get("hurst")?,
            weights: ModeWeights::new(header.list("weights")?)?,
        },
        "levy" => NoiseKind::Levy {
            drift_modes: header.list("drift")?,
            weights: ModeWeights::new(header.list("weights")?)?,
            jump_rate: header.get("jump_rate")?,
            jump: JumpLaw { mode: header.get("jump_mode")?, amplitude: header.amplitude()? },
        },
        other => {
            let line = header.raw("kind")?.0;
            return Err(parse_err(line, format!("unknown noise kind `{other}`")));
        }
    };
    let spec = NoiseSpec::new(kind, grid)?;
    let seed: u64 = header.get("seed")?;
    let dt: f64 = header.get("dt")?;
    let first_index: i64 = header.get("first_index")?;
    let fallback: bool = header.get("fallback")?;
    let mut snapshots = Vec::with_capacity(rows.len());
    for (k, (lineno, row)) in rows.into_iter().enumerate() {
        if row.len() != n + 1 {
            return Err(parse_err(lineno, format!("expected {} columns, got {}", n + 1, row.len())));
        }
        let t = (first_index + k as i64) as f64 * dt;
        if (row[0] - t).abs() > 1e-9 * t.abs().max(dt) {
            return Err(parse_err(lineno, format!("time {} does not match grid time {t}", row[0])));
        }
        snapshots.push(Field::new(grid, row[1..].to_vec())?);
    }
    let mut path = NoisePath::from_snapshots(spec, seed, dt, first_index, snapshots)?;
    path.cholesky_fallback = fallback;
    Ok(path)
}
