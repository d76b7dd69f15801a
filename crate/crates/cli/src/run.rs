//! Experiment dispatch and artifact writing.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use attractor_forge::attractor::{
    pullback_run, verify_exponential_bound, verify_polynomial_bound, BOUND_SLACK,
};
use attractor_forge::drift::{certify, DriftSpec};
use attractor_forge::field_space::{norm_h, Field, SineSeriesSampler, SpatialGrid, TripleSpec};
use attractor_forge::flow::{energy_diagnostics, solve_transformed, EnergyConstants, SolverConfig};
use attractor_forge::noise::{gen_path, write_path, JumpLaw, ModeWeights, NoiseKind, NoisePath, NoiseSpec};
use attractor_forge::rng::{derive_seed, stream};

use crate::config::{ExperimentConfig, InitialField, KindBlock, NoiseKindName};
use crate::CliError;

/// Result of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Some asserted condition or bound failed.
    pub violated: bool,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        i32::from(self.violated)
    }
}

const NOISE_STREAM: u64 = 0;
const CERTIFY_STREAM: u64 = 1;
const FIELD_STREAM: u64 = 1000;

fn provenance(cfg: &ExperimentConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "## attractor-forge v{}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "## experiment = {}", cfg.kind.name());
    let _ = writeln!(s, "## seed = {}", cfg.seed);
    let _ = writeln!(s, "## config:");
    // The output location does not affect results and is left out so that
    // artifacts are byte-identical across directories.
    for line in cfg.to_text().lines().filter(|l| !l.is_empty() && !l.starts_with("output = ")) {
        let _ = writeln!(s, "##   {line}");
    }
    s
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io { path: path.display().to_string(), message: e.to_string() }
}

/// Writes through a sibling temporary file and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

struct Artifacts<'a> {
    dir: &'a Path,
    header: String,
    files: Vec<PathBuf>,
}

impl Artifacts<'_> {
    fn emit(&mut self, name: &str, body: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut bytes = self.header.clone().into_bytes();
        bytes.extend_from_slice(body);
        write_atomic(&path, &bytes)?;
        self.files.push(path);
        Ok(())
    }
}

fn build_drift(cfg: &ExperimentConfig, grid: &SpatialGrid) -> Result<DriftSpec, CliError> {
    let block = cfg.drift.ok_or_else(|| CliError::Config {
        line: 0,
        message: format!("experiment `{}` needs a [drift] section", cfg.kind.name()),
    })?;
    let drift = DriftSpec::new(block.family, grid)?;
    if block.lambda_scale == 1.0 {
        return Ok(drift);
    }
    let mut constants = *drift.constants();
    constants.lambda *= block.lambda_scale;
    Ok(drift.with_constants(constants)?)
}

fn build_triple(cfg: &ExperimentConfig, drift: &DriftSpec) -> Result<TripleSpec, CliError> {
    match cfg.triple.kind {
        None => Ok(drift.natural_triple()),
        Some(kind) => Ok(TripleSpec::new(kind)?),
    }
}

fn build_noise(cfg: &ExperimentConfig, grid: SpatialGrid) -> Result<NoisePath, CliError> {
    let n = &cfg.noise;
    let weights = || -> Result<ModeWeights, CliError> {
        Ok(ModeWeights::power_law(n.weight_scale, n.weight_decay, n.modes)?)
    };
    let kind = match n.kind {
        NoiseKindName::Zero => NoiseKind::Zero,
        NoiseKindName::QWiener => NoiseKind::QWiener { weights: weights()? },
        NoiseKindName::Fbm => NoiseKind::Fbm { hurst: n.hurst, weights: weights()? },
        NoiseKindName::Levy => NoiseKind::Levy {
            drift_modes: n.levy_drift.clone(),
            weights: weights()?,
            jump_rate: n.jump_rate,
            jump: JumpLaw { mode: n.jump_mode, amplitude: n.amplitude },
        },
    };
    let spec = NoiseSpec::new(kind, grid)?;
    Ok(gen_path(&spec, n.t_start, n.t_end, n.dt, derive_seed(cfg.seed, NOISE_STREAM))?)
}

fn build_solver(cfg: &ExperimentConfig) -> Result<SolverConfig, CliError> {
    let s = cfg.solver;
    let solver = SolverConfig {
        dt: s.dt,
        newton_tol: s.newton_tol,
        newton_max_iters: s.newton_max_iters,
        step_halving_max: s.step_halving_max,
        damping: s.damping,
    };
    solver.validate()?;
    Ok(solver)
}

fn initial_field(init: &InitialField, grid: &SpatialGrid, seed: u64, index: u64) -> Result<Field, CliError> {
    let l = grid.length();
    Ok(match *init {
        InitialField::Zero => Field::zeros(*grid),
        InitialField::Constant(c) => Field::constant(*grid, c)?,
        InitialField::Sine { amplitude, mode } => {
            grid.sample(|x| amplitude * (mode as f64 * std::f64::consts::PI * x / l).sin())?
        }
        InitialField::Random { amplitude } => SineSeriesSampler::default()
            .sample(grid, &mut stream(seed, FIELD_STREAM + index))
            .scaled(amplitude),
    })
}

fn e(x: f64) -> String {
    format!("{x:.16e}")
}

/// Runs `cfg`, writing artifacts into `out_dir` (created if missing).
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    fs::create_dir_all(out_dir).map_err(|err| io_err(out_dir, err))?;
    let grid = SpatialGrid::new(cfg.grid.n, cfg.grid.length)?;
    let mut art = Artifacts { dir: out_dir, header: provenance(cfg), files: Vec::new() };

    if let KindBlock::Certify(block) = &cfg.block {
        let drift = build_drift(cfg, &grid)?;
        let triple = build_triple(cfg, &drift)?;
        let sampler = SineSeriesSampler::certification();
        let mut body = String::from("condition,trials,worst_margin,tolerance,satisfied,estimated_constants\n");
        let mut violated = false;
        let mut summary = Vec::new();
        for (i, cond) in block.conditions.iter().enumerate() {
            let seed = derive_seed(cfg.seed, CERTIFY_STREAM + i as u64);
            let rep = certify(&drift, &triple, *cond, &sampler, &grid, block.trials, seed)?;
            let constants: Vec<String> =
                rep.estimated_constants.iter().map(|(k, v)| format!("{k}={}", e(*v))).collect();
            let _ = writeln!(
                body,
                "{},{},{},{},{},{}",
                cond.id(),
                rep.trials,
                e(rep.worst_margin),
                e(rep.tolerance),
                rep.satisfied,
                constants.join(";")
            );
            violated |= !rep.satisfied;
            summary.push(format!("{}: {} (margin {:.3e})", cond.id(), if rep.satisfied { "ok" } else { "violated" }, rep.worst_margin));
        }
        art.emit("certify.csv", body.as_bytes())?;
        return Ok(Outcome { violated, files: art.files, summary: summary.join("; ") });
    }

    let noise = build_noise(cfg, grid)?;
    if cfg.save_noise {
        let mut buf = Vec::new();
        write_path(&noise, &mut buf)?;
        art.emit("noise.txt", &buf)?;
    }

    let (violated, summary) = match &cfg.block {
        KindBlock::Certify(_) => unreachable!("handled above"),
        KindBlock::NoiseGen => (false, format!("{} noise snapshots", noise.snapshots().len())),
        KindBlock::Simulate(b) => {
            let drift = build_drift(cfg, &grid)?;
            let triple = build_triple(cfg, &drift)?;
            let solver = build_solver(cfg)?;
            let x = initial_field(&b.initial, &grid, cfg.seed, 0)?;
            let traj = solve_transformed(&drift, &triple, &noise, &x, b.t0, b.t1, &solver)?;
            let mut buf = Vec::new();
            traj.write_csv(&triple, &mut buf)?;
            art.emit("trajectory.csv", &buf)?;
            let mut violated = false;
            let mut summary = format!("{} steps to t = {}", traj.len().saturating_sub(1), b.t1);
            if b.energy {
                let constants = EnergyConstants::from_drift(&drift, &triple, &grid)?;
                let series = energy_diagnostics(&traj, &drift, &triple, &noise, &constants)?;
                let mut body = String::from("t,d_energy,pairing,v_power,forcing,slack\n");
                for i in 0..series.times.len() {
                    let _ = writeln!(
                        body,
                        "{},{},{},{},{},{}",
                        e(series.times[i]),
                        e(series.d_energy[i]),
                        e(series.pairing[i]),
                        e(series.v_power[i]),
                        e(series.forcing[i]),
                        e(series.slack[i])
                    );
                }
                let slack = series.integrated_slack();
                let _ = writeln!(body, "# integrated_lhs={}", e(series.integrated_lhs));
                let _ = writeln!(body, "# integrated_rhs={}", e(series.integrated_rhs));
                let _ = writeln!(body, "# min_slack={}", e(series.min_slack()));
                art.emit("energy.csv", body.as_bytes())?;
                violated = slack < -1e-8 * (1.0 + series.integrated_rhs.abs());
                let _ = write!(summary, "; integrated energy slack {slack:.3e}");
            }
            (violated, summary)
        }
        KindBlock::Pullback(b) => {
            let drift = build_drift(cfg, &grid)?;
            let triple = build_triple(cfg, &drift)?;
            let solver = build_solver(cfg)?;
            let sampler = SineSeriesSampler::default();
            let bundle = (0..b.bundle_size as u64)
                .map(|m| {
                    let f = sampler.sample(&grid, &mut stream(cfg.seed, FIELD_STREAM + m));
                    let n = norm_h(&f, &triple)?;
                    Ok(f.scaled(b.bundle_radius / n.max(b.bundle_radius)))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let res = pullback_run(&drift, &triple, &noise, &bundle, &b.s_list, b.eval_time, &solver)?;
            let mut buf = Vec::new();
            res.write_csv(&mut buf)?;
            art.emit("pullback.csv", &buf)?;
            let mut body = String::from("x,eta0\n");
            for (x, v) in grid.nodes().zip(res.eta0.values()) {
                let _ = writeln!(body, "{},{}", e(x), e(*v));
            }
            let _ = writeln!(body, "# eta0_error={}", e(res.eta0_error));
            art.emit("eta0.csv", body.as_bytes())?;
            let violated = res.bound_violations > 0 || !res.monotone;
            let summary = format!(
                "diameter at s = {} is {:.3e}; {} bound violations; monotone {}",
                res.s_list.last().copied().unwrap_or(f64::NAN),
                res.diameters.last().copied().unwrap_or(f64::NAN),
                res.bound_violations,
                res.monotone
            );
            (violated, summary)
        }
        KindBlock::Rates(b) => {
            let drift = build_drift(cfg, &grid)?;
            let triple = build_triple(cfg, &drift)?;
            let solver = build_solver(cfg)?;
            let x = initial_field(&b.x, &grid, cfg.seed, 0)?;
            let y = initial_field(&b.y, &grid, cfg.seed, 1)?;
            let mut body = String::from("t,dist_H_sq,bound_value,ratio\n");
            let row = |body: &mut String, t: f64, d: f64, bound: f64| {
                let ratio = if bound > 0.0 { d / bound } else { f64::NAN };
                let _ = writeln!(body, "{},{},{},{}", e(t), e(d), e(bound), e(ratio));
            };
            let (violated, summary) = match drift.beta() {
                Some(beta) if beta > 2.0 => {
                    let rep = verify_polynomial_bound(&drift, &triple, &noise, &x, &y, b.s1, b.s2, &b.times, &solver)?;
                    for i in 0..rep.times.len() {
                        row(&mut body, rep.times[i], rep.dist_sq[i], rep.bounds[i]);
                    }
                    let _ = writeln!(body, "# kind=polynomial beta={beta} max_ratio={}", e(rep.max_ratio));
                    (
                        rep.max_ratio > BOUND_SLACK,
                        format!("polynomial bound, max ratio {:.4} (limit {BOUND_SLACK})", rep.max_ratio),
                    )
                }
                Some(_) => {
                    let rep = verify_exponential_bound(
                        &drift, &triple, &noise, &x, &y, b.eta_margin, b.s1, b.s2, &b.times, &solver,
                    )?;
                    for i in 0..rep.times.len() {
                        row(&mut body, rep.times[i], rep.dist_sq[i], rep.bounds[i]);
                    }
                    let _ = writeln!(
                        body,
                        "# kind=exponential lambda_hat={} certified_lambda={} k_eta={} violations={}",
                        rep.lambda_hat.map_or("nan".into(), e),
                        e(rep.certified_lambda),
                        e(rep.k_eta),
                        rep.bound_violations
                    );
                    (
                        rep.bound_violations > 0,
                        format!(
                            "exponential bound, fitted rate {:?} vs {:.4}, {} violations",
                            rep.lambda_hat, rep.certified_lambda, rep.bound_violations
                        ),
                    )
                }
                None => {
                    return Err(CliError::Config {
                        line: 0,
                        message: "rates need a strongly monotone drift".into(),
                    })
                }
            };
            art.emit("rates.csv", body.as_bytes())?;
            (violated, summary)
        }
    };
    Ok(Outcome { violated, files: art.files, summary })
}
