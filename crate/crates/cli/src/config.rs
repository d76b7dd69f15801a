//! Experiment configuration: `[section]` headers followed by `key = value`
//! lines. `#` starts a comment line. Unknown and duplicate keys are errors;
//! omitted optional keys take the defaults shown by [`ExperimentConfig::to_text`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use attractor_forge::drift::{Condition, DriftFamily};
use attractor_forge::field_space::TripleKind;
use attractor_forge::noise::AmplitudeLaw;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Certify,
    Simulate,
    Pullback,
    Rates,
    NoiseGen,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Certify => "certify",
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Pullback => "pullback",
            ExperimentKind::Rates => "rates",
            ExperimentKind::NoiseGen => "noise-gen",
        }
    }

    fn section(&self) -> Option<&'static str> {
        match self {
            ExperimentKind::NoiseGen => None,
            k => Some(k.name()),
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "certify" => ExperimentKind::Certify,
            "simulate" => ExperimentKind::Simulate,
            "pullback" => ExperimentKind::Pullback,
            "rates" => ExperimentKind::Rates,
            "noise-gen" => ExperimentKind::NoiseGen,
            _ => return Err(format!("unknown experiment kind `{s}`")),
        })
    }
}

/// Initial condition on the grid `(0, L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialField {
    Zero,
    Constant(f64),
    /// `a sin(kπx/L)`.
    Sine { amplitude: f64, mode: usize },
    /// Random sine series scaled by `a`, drawn from the experiment seed.
    Random { amplitude: f64 },
}

impl InitialField {
    fn text(&self) -> String {
        match *self {
            InitialField::Zero => "zero".into(),
            InitialField::Constant(c) => format!("const:{c}"),
            InitialField::Sine { amplitude, mode } => format!("sine:{amplitude}:{mode}"),
            InitialField::Random { amplitude } => format!("random:{amplitude}"),
        }
    }
}

impl FromStr for InitialField {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || format!("bad initial field `{s}` (zero, const:c, sine:a:k or random:a)");
        let num = |x: &str| x.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(bad);
        match parts.as_slice() {
            ["zero"] => Ok(InitialField::Zero),
            ["const", c] => Ok(InitialField::Constant(num(c)?)),
            ["sine", a, k] => {
                let mode = k.parse::<usize>().ok().filter(|k| *k >= 1).ok_or_else(bad)?;
                Ok(InitialField::Sine { amplitude: num(a)?, mode })
            }
            ["random", a] => Ok(InitialField::Random { amplitude: num(a)? }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridBlock {
    pub n: usize,
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftBlock {
    pub family: DriftFamily,
    /// Multiplies the declared dissipation constant `λ`.
    pub lambda_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripleBlock {
    /// `None` selects the natural triple of the drift.
    pub kind: Option<TripleKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKindName {
    Zero,
    QWiener,
    Fbm,
    Levy,
}

impl NoiseKindName {
    fn name(&self) -> &'static str {
        match self {
            NoiseKindName::Zero => "zero",
            NoiseKindName::QWiener => "qwiener",
            NoiseKindName::Fbm => "fbm",
            NoiseKindName::Levy => "levy",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBlock {
    pub kind: NoiseKindName,
    pub dt: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Weights `c k^{-q}` for `k = 1..=modes`.
    pub weight_scale: f64,
    pub weight_decay: f64,
    pub modes: usize,
    pub hurst: f64,
    pub levy_drift: Vec<f64>,
    pub jump_rate: f64,
    pub jump_mode: usize,
    pub amplitude: AmplitudeLaw,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverBlock {
    pub dt: f64,
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub step_halving_max: usize,
    pub damping: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyBlock {
    pub conditions: Vec<Condition>,
    pub trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulateBlock {
    pub t0: f64,
    pub t1: f64,
    pub initial: InitialField,
    pub energy: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullbackBlock {
    pub s_list: Vec<f64>,
    pub eval_time: f64,
    pub bundle_size: usize,
    /// Bundle members are scaled into the `H` ball of this radius.
    pub bundle_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatesBlock {
    pub x: InitialField,
    pub y: InitialField,
    pub s1: f64,
    pub s2: f64,
    pub times: Vec<f64>,
    /// `η = λ − eta_margin` for the exponential bound.
    pub eta_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KindBlock {
    Certify(CertifyBlock),
    Simulate(SimulateBlock),
    Pullback(PullbackBlock),
    Rates(RatesBlock),
    NoiseGen,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub output: String,
    pub save_noise: bool,
    pub grid: GridBlock,
    pub drift: Option<DriftBlock>,
    pub triple: TripleBlock,
    pub noise: NoiseBlock,
    pub solver: SolverBlock,
    pub block: KindBlock,
}

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

struct Section {
    name: String,
    line: usize,
    entries: BTreeMap<String, Entry>,
}

fn cfg_err(line: usize, message: impl Into<String>) -> CliError {
    CliError::Config { line, message: message.into() }
}

impl Section {
    fn raw(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.line, e.value.clone())
        })
    }

    fn opt<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|_| {
                cfg_err(line, format!("malformed value `{v}` for `{key}` in [{}]", self.name))
            }),
        }
    }

    fn or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.opt(key)?.unwrap_or(default))
    }

    fn req<T: FromStr>(&mut self, key: &str) -> Result<T, CliError> {
        let line = self.line;
        let name = self.name.clone();
        self.opt(key)?
            .ok_or_else(|| cfg_err(line, format!("missing required key `{key}` in [{name}]")))
    }

    fn parsed<T, F: Fn(&str) -> Result<T, String>>(&mut self, key: &str, f: F) -> Result<Option<T>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => f(&v).map(Some).map_err(|m| cfg_err(line, m)),
        }
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.parsed(key, |v| {
            if v.trim().is_empty() {
                return Ok(Vec::new());
            }
            v.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| format!("malformed number `{x}` in `{key}`")))
                .collect()
        })
    }

    fn finish(self) -> Result<(), CliError> {
        match self.entries.iter().find(|(_, e)| !e.used) {
            Some((k, e)) => Err(cfg_err(e.line, format!("unknown key `{k}` in [{}]", self.name))),
            None => Ok(()),
        }
    }
}

fn lex(text: &str) -> Result<Vec<Section>, CliError> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        if let Some(inner) = s.strip_prefix('[') {
            let name = inner
                .strip_suffix(']')
                .ok_or_else(|| cfg_err(line, format!("malformed section header `{s}`")))?
                .trim()
                .to_string();
            if sections.iter().any(|sec| sec.name == name) {
                return Err(cfg_err(line, format!("duplicate section [{name}]")));
            }
            sections.push(Section { name, line, entries: BTreeMap::new() });
            continue;
        }
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| cfg_err(line, format!("expected `key = value`, got `{s}`")))?;
        let section = sections
            .last_mut()
            .ok_or_else(|| cfg_err(line, "key outside of any [section]"))?;
        let key = k.trim().to_string();
        if let Some(prev) = section.entries.get(&key) {
            return Err(cfg_err(
                line,
                format!("duplicate key `{key}` in [{}] (first set on line {})", section.name, prev.line),
            ));
        }
        section.entries.insert(key, Entry { line, value: v.trim().to_string(), used: false });
    }
    Ok(sections)
}

fn parse_amplitude(v: &str) -> Result<AmplitudeLaw, String> {
    let parts: Vec<&str> = v.split(':').collect();
    let bad = || format!("bad amplitude `{v}` (constant:c, normal:m:s or uniform:a:b)");
    let num = |x: &str| x.parse::<f64>().map_err(|_| bad());
    match parts.as_slice() {
        ["constant", c] => Ok(AmplitudeLaw::Constant(num(c)?)),
        ["normal", m, s] => Ok(AmplitudeLaw::Normal { mean: num(m)?, std: num(s)? }),
        ["uniform", a, b] => Ok(AmplitudeLaw::Uniform { low: num(a)?, high: num(b)? }),
        _ => Err(bad()),
    }
}

fn amplitude_text(a: &AmplitudeLaw) -> String {
    match *a {
        AmplitudeLaw::Constant(c) => format!("constant:{c}"),
        AmplitudeLaw::Normal { mean, std } => format!("normal:{mean}:{std}"),
        AmplitudeLaw::Uniform { low, high } => format!("uniform:{low}:{high}"),
    }
}

fn list_text(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ")
}

fn parse_drift(sec: &mut Section) -> Result<DriftBlock, CliError> {
    let line = sec.line;
    let family: String = sec.req("family")?;
    let eta = |s: &mut Section| s.or("eta", 0.0);
    let family = match family.as_str() {
        "pointwise" => DriftFamily::Pointwise { p: sec.req("p")?, eta: eta(sec)? },
        "rde" => DriftFamily::Rde { p: sec.req("p")?, eta: eta(sec)? },
        "pme" => DriftFamily::Pme { r: sec.req("r")?, eta: eta(sec)? },
        "ple" => DriftFamily::Ple {
            p: sec.req("p")?,
            p_tilde: sec.or("p_tilde", 2.0)?,
            eta1: sec.or("eta1", 0.0)?,
            eta2: sec.or("eta2", 0.0)?,
        },
        other => return Err(cfg_err(line, format!("unknown drift family `{other}`"))),
    };
    let lambda_scale = sec.or("lambda_scale", 1.0)?;
    Ok(DriftBlock { family, lambda_scale })
}

fn parse_triple(sec: &mut Section) -> Result<TripleBlock, CliError> {
    let line = sec.line;
    let kind: String = sec.or("kind", "natural".to_string())?;
    let kind = match kind.as_str() {
        "natural" => None,
        "rde" => Some(TripleKind::Rde),
        "pme" => Some(TripleKind::Pme { r: sec.req("exponent")? }),
        "ple" => Some(TripleKind::Ple { p: sec.req("exponent")? }),
        "pointwise" => Some(TripleKind::Pointwise { p: sec.req("exponent")? }),
        other => return Err(cfg_err(line, format!("unknown triple kind `{other}`"))),
    };
    Ok(TripleBlock { kind })
}

fn parse_noise(sec: Option<&mut Section>) -> Result<NoiseBlock, CliError> {
    let mut empty = Section { name: "noise".into(), line: 0, entries: BTreeMap::new() };
    let sec = sec.unwrap_or(&mut empty);
    let line = sec.line;
    let kind: String = sec.or("kind", "zero".to_string())?;
    let kind = match kind.as_str() {
        "zero" => NoiseKindName::Zero,
        "qwiener" => NoiseKindName::QWiener,
        "fbm" => NoiseKindName::Fbm,
        "levy" => NoiseKindName::Levy,
        other => return Err(cfg_err(line, format!("unknown noise kind `{other}`"))),
    };
    let mut block = NoiseBlock {
        kind,
        dt: sec.or("dt", 0.01)?,
        t_start: sec.or("t_start", -10.0)?,
        t_end: sec.or("t_end", 1.0)?,
        weight_scale: 1.0,
        weight_decay: 8.0,
        modes: 8,
        hurst: 0.5,
        levy_drift: Vec::new(),
        jump_rate: 0.0,
        jump_mode: 1,
        amplitude: AmplitudeLaw::Constant(0.0),
    };
    if kind != NoiseKindName::Zero {
        block.weight_scale = sec.or("weight_scale", 1.0)?;
        block.weight_decay = sec.or("weight_decay", 8.0)?;
        block.modes = sec.or("modes", if kind == NoiseKindName::Levy { 0 } else { 8 })?;
    }
    if kind == NoiseKindName::Fbm {
        block.hurst = sec.req("hurst")?;
    }
    if kind == NoiseKindName::Levy {
        block.levy_drift = sec.list("drift")?.unwrap_or_default();
        block.jump_rate = sec.or("jump_rate", 0.0)?;
        block.jump_mode = sec.or("jump_mode", 1)?;
        block.amplitude = sec.parsed("amplitude", parse_amplitude)?.unwrap_or(AmplitudeLaw::Constant(0.0));
    }
    Ok(block)
}

fn parse_solver(sec: Option<&mut Section>) -> Result<SolverBlock, CliError> {
    let mut empty = Section { name: "solver".into(), line: 0, entries: BTreeMap::new() };
    let sec = sec.unwrap_or(&mut empty);
    Ok(SolverBlock {
        dt: sec.or("dt", 0.01)?,
        newton_tol: sec.or("newton_tol", 1e-10)?,
        newton_max_iters: sec.or("newton_max_iters", 50)?,
        step_halving_max: sec.or("step_halving_max", 8)?,
        damping: sec.or("damping", 1.0)?,
    })
}

fn parse_block(kind: ExperimentKind, sec: &mut Section) -> Result<KindBlock, CliError> {
    let init = |s: &str| s.parse::<InitialField>();
    Ok(match kind {
        ExperimentKind::Certify => {
            let conditions = sec
                .parsed("condition", |v| {
                    v.split(',')
                        .map(|c| c.trim().parse::<Condition>().map_err(|e| e.to_string()))
                        .collect::<Result<Vec<_>, _>>()
                })?
                .ok_or_else(|| cfg_err(sec.line, "missing required key `condition` in [certify]"))?;
            KindBlock::Certify(CertifyBlock { conditions, trials: sec.or("trials", 200)? })
        }
        ExperimentKind::Simulate => KindBlock::Simulate(SimulateBlock {
            t0: sec.or("t0", 0.0)?,
            t1: sec.or("t1", 1.0)?,
            initial: sec.parsed("initial", init)?.unwrap_or(InitialField::Sine { amplitude: 1.0, mode: 1 }),
            energy: sec.or("energy", true)?,
        }),
        ExperimentKind::Pullback => KindBlock::Pullback(PullbackBlock {
            s_list: sec
                .list("s_list")?
                .ok_or_else(|| cfg_err(sec.line, "missing required key `s_list` in [pullback]"))?,
            eval_time: sec.or("eval_time", 0.0)?,
            bundle_size: sec.or("bundle_size", 10)?,
            bundle_radius: sec.or("bundle_radius", 1.0)?,
        }),
        ExperimentKind::Rates => KindBlock::Rates(RatesBlock {
            x: sec.parsed("x", init)?.unwrap_or(InitialField::Sine { amplitude: 1.0, mode: 1 }),
            y: sec.parsed("y", init)?.unwrap_or(InitialField::Zero),
            s1: sec.or("s1", 0.0)?,
            s2: sec.or("s2", 0.0)?,
            times: sec
                .list("times")?
                .ok_or_else(|| cfg_err(sec.line, "missing required key `times` in [rates]"))?,
            eta_margin: sec.or("eta_margin", 1.0)?,
        }),
        ExperimentKind::NoiseGen => KindBlock::NoiseGen,
    })
}

/// Parses a configuration. `kind` (from the command line) is used when the
/// `[experiment]` section does not name one; a conflicting name is an error.
pub fn parse_config(text: &str, kind: Option<ExperimentKind>) -> Result<ExperimentConfig, CliError> {
    let mut sections = lex(text)?;
    let mut take = |name: &str| -> Option<Section> {
        sections.iter().position(|s| s.name == name).map(|i| sections.remove(i))
    };
    let mut exp = take("experiment")
        .unwrap_or(Section { name: "experiment".into(), line: 0, entries: BTreeMap::new() });
    let declared: Option<ExperimentKind> = exp.opt("kind")?;
    let kind = match (declared, kind) {
        (Some(a), Some(b)) if a != b => {
            let line = exp.entries.get("kind").map_or(0, |e| e.line);
            return Err(cfg_err(
                line,
                format!("config declares kind `{}` but `{}` was requested", a.name(), b.name()),
            ));
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => return Err(cfg_err(exp.line, "missing experiment kind")),
    };
    let seed = exp.or("seed", 0u64)?;
    let output = exp.or("output", "out".to_string())?;
    let save_noise = exp.or("save_noise", kind == ExperimentKind::NoiseGen)?;
    exp.finish()?;

    let mut grid_sec = take("grid").ok_or_else(|| cfg_err(0, "missing section [grid]"))?;
    let grid = GridBlock { n: grid_sec.req("n")?, length: grid_sec.or("length", 1.0)? };
    grid_sec.finish()?;

    let drift = match take("drift") {
        Some(mut sec) => {
            let d = parse_drift(&mut sec)?;
            sec.finish()?;
            Some(d)
        }
        None if kind == ExperimentKind::NoiseGen => None,
        None => return Err(cfg_err(0, "missing section [drift]")),
    };
    let triple = match take("triple") {
        Some(mut sec) => {
            let t = parse_triple(&mut sec)?;
            sec.finish()?;
            t
        }
        None => TripleBlock { kind: None },
    };
    let mut noise_sec = take("noise");
    let noise = parse_noise(noise_sec.as_mut())?;
    if let Some(sec) = noise_sec {
        sec.finish()?;
    }
    let mut solver_sec = take("solver");
    let solver = parse_solver(solver_sec.as_mut())?;
    if let Some(sec) = solver_sec {
        sec.finish()?;
    }
    let block = match kind.section() {
        Some(name) => {
            let mut sec = take(name).ok_or_else(|| cfg_err(0, format!("missing section [{name}]")))?;
            let b = parse_block(kind, &mut sec)?;
            sec.finish()?;
            b
        }
        None => KindBlock::NoiseGen,
    };
    if let Some(extra) = sections.first() {
        return Err(cfg_err(extra.line, format!("unknown section [{}]", extra.name)));
    }
    Ok(ExperimentConfig { kind, seed, output, save_noise, grid, drift, triple, noise, solver, block })
}

impl ExperimentConfig {
    /// Canonical text with every default filled in; parsing it gives back
    /// `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[experiment]");
        let _ = writeln!(s, "kind = {}", self.kind.name());
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "output = {}", self.output);
        let _ = writeln!(s, "save_noise = {}", self.save_noise);
        let _ = writeln!(s, "\n[grid]\nn = {}\nlength = {}", self.grid.n, self.grid.length);
        if let Some(d) = &self.drift {
            let _ = writeln!(s, "\n[drift]\nfamily = {}", d.family.name());
            match d.family {
                DriftFamily::Pointwise { p, eta } | DriftFamily::Rde { p, eta } => {
                    let _ = writeln!(s, "p = {p}\neta = {eta}");
                }
                DriftFamily::Pme { r, eta } => {
                    let _ = writeln!(s, "r = {r}\neta = {eta}");
                }
                DriftFamily::Ple { p, p_tilde, eta1, eta2 } => {
                    let _ = writeln!(s, "p = {p}\np_tilde = {p_tilde}\neta1 = {eta1}\neta2 = {eta2}");
                }
            }
            let _ = writeln!(s, "lambda_scale = {}", d.lambda_scale);
        }
        let _ = writeln!(s, "\n[triple]");
        let _ = match self.triple.kind {
            None => writeln!(s, "kind = natural"),
            Some(TripleKind::Rde) => writeln!(s, "kind = rde"),
            Some(TripleKind::Pme { r }) => writeln!(s, "kind = pme\nexponent = {r}"),
            Some(TripleKind::Ple { p }) => writeln!(s, "kind = ple\nexponent = {p}"),
            Some(TripleKind::Pointwise { p }) => writeln!(s, "kind = pointwise\nexponent = {p}"),
        };
        let n = &self.noise;
        let _ = writeln!(
            s,
            "\n[noise]\nkind = {}\ndt = {}\nt_start = {}\nt_end = {}",
            n.kind.name(),
            n.dt,
            n.t_start,
            n.t_end
        );
        if n.kind != NoiseKindName::Zero {
            let _ = writeln!(
                s,
                "weight_scale = {}\nweight_decay = {}\nmodes = {}",
                n.weight_scale, n.weight_decay, n.modes
            );
        }
        if n.kind == NoiseKindName::Fbm {
            let _ = writeln!(s, "hurst = {}", n.hurst);
        }
        if n.kind == NoiseKindName::Levy {
            let _ = writeln!(
                s,
                "drift = {}\njump_rate = {}\njump_mode = {}\namplitude = {}",
                list_text(&n.levy_drift),
                n.jump_rate,
                n.jump_mode,
                amplitude_text(&n.amplitude)
            );
        }
        let v = &self.solver;
        let _ = writeln!(
            s,
            "\n[solver]\ndt = {}\nnewton_tol = {}\nnewton_max_iters = {}\nstep_halving_max = {}\ndamping = {}",
            v.dt, v.newton_tol, v.newton_max_iters, v.step_halving_max, v.damping
        );
        match &self.block {
            KindBlock::Certify(c) => {
                let names: Vec<&str> = c.conditions.iter().map(|c| c.id()).collect();
                let _ = writeln!(s, "\n[certify]\ncondition = {}\ntrials = {}", names.join(", "), c.trials);
            }
            KindBlock::Simulate(b) => {
                let _ = writeln!(
                    s,
                    "\n[simulate]\nt0 = {}\nt1 = {}\ninitial = {}\nenergy = {}",
                    b.t0,
                    b.t1,
                    b.initial.text(),
                    b.energy
                );
            }
            KindBlock::Pullback(b) => {
                let _ = writeln!(
                    s,
                    "\n[pullback]\ns_list = {}\neval_time = {}\nbundle_size = {}\nbundle_radius = {}",
                    list_text(&b.s_list),
                    b.eval_time,
                    b.bundle_size,
                    b.bundle_radius
                );
            }
            KindBlock::Rates(b) => {
                let _ = writeln!(
                    s,
                    "\n[rates]\nx = {}\ny = {}\ns1 = {}\ns2 = {}\ntimes = {}\neta_margin = {}",
                    b.x.text(),
                    b.y.text(),
                    b.s1,
                    b.s2,
                    list_text(&b.times),
                    b.eta_margin
                );
            }
            KindBlock::NoiseGen => {}
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_CERTIFY: &str = "\
[grid]
n = 100

[drift]
family = pme
r = 3
eta = 0

[certify]
condition = H2'
";

    #[test]
    fn minimal_certify_fills_defaults() {
        let cfg = parse_config(MINIMAL_CERTIFY, Some(ExperimentKind::Certify)).unwrap();
        assert_eq!(cfg.grid, GridBlock { n: 100, length: 1.0 });
        assert_eq!(cfg.drift.unwrap().family, DriftFamily::Pme { r: 3.0, eta: 0.0 });
        assert_eq!(cfg.seed, 0);
        match &cfg.block {
            KindBlock::Certify(c) => {
                assert_eq!(c.conditions, vec![Condition::H2Prime]);
                assert_eq!(c.trials, 200);
            }
            other => panic!("unexpected block {other:?}"),
        }
        let echo = cfg.to_text();
        assert!(echo.contains("trials = 200"));
        assert!(echo.contains("newton_tol = 0.0000000001"));
        assert_eq!(parse_config(&echo, None).unwrap(), cfg);
    }

    #[test]
    fn duplicate_key_names_the_line() {
        let text = MINIMAL_CERTIFY.replace("eta = 0", "eta = 0\nr = 4");
        match parse_config(&text, Some(ExperimentKind::Certify)) {
            Err(CliError::Config { line, message }) => {
                assert_eq!(line, 8);
                assert!(message.contains("duplicate key `r`"), "{message}");
                assert!(message.contains("line 6"), "{message}");
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_and_section_are_rejected() {
        let text = MINIMAL_CERTIFY.replace("eta = 0", "eta = 0\ngamma = 1");
        assert!(matches!(
            parse_config(&text, Some(ExperimentKind::Certify)),
            Err(CliError::Config { line: 8, .. })
        ));
        let text = format!("{MINIMAL_CERTIFY}\n[extras]\na = 1\n");
        assert!(matches!(parse_config(&text, Some(ExperimentKind::Certify)), Err(CliError::Config { .. })));
        // `p` does not belong to the porous-medium family.
        let text = MINIMAL_CERTIFY.replace("r = 3", "r = 3\np = 2");
        assert!(matches!(
            parse_config(&text, Some(ExperimentKind::Certify)),
            Err(CliError::Config { line: 7, .. })
        ));
    }

    #[test]
    fn malformed_number_and_missing_section() {
        let text = MINIMAL_CERTIFY.replace("n = 100", "n = ten");
        assert!(matches!(
            parse_config(&text, Some(ExperimentKind::Certify)),
            Err(CliError::Config { line: 2, .. })
        ));
        let text = MINIMAL_CERTIFY.replace("[certify]\ncondition = H2'\n", "");
        assert!(matches!(parse_config(&text, Some(ExperimentKind::Certify)), Err(CliError::Config { .. })));
    }

    #[test]
    fn kind_conflict_is_rejected() {
        let text = format!("[experiment]\nkind = rates\n{MINIMAL_CERTIFY}");
        assert!(matches!(
            parse_config(&text, Some(ExperimentKind::Certify)),
            Err(CliError::Config { line: 2, .. })
        ));
    }

    #[test]
    fn initial_fields_parse() {
        assert_eq!("sine:2:3".parse::<InitialField>(), Ok(InitialField::Sine { amplitude: 2.0, mode: 3 }));
        assert_eq!("zero".parse::<InitialField>(), Ok(InitialField::Zero));
        assert!("sine:1:0".parse::<InitialField>().is_err());
        assert!("cosine:1".parse::<InitialField>().is_err());
    }
}
