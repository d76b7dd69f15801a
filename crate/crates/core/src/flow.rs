//! Pathwise solver for the transformed equation `Z' = A(Z + N)`,
//! `Z_s = x − N_s`, and the flow `S(t, s)x = Z_t + N_t`.
//!
//! Each step is backward Euler in the unknown `U = Z_{k+1} + N_{k+1}`:
//!
//! ```text
//! U − h A(U) = Z_k + N_{k+1}
//! ```
//!
//! solved by damped Newton with the tridiagonal Jacobian of the drift. The
//! noise is read at the right endpoint of each step.

use std::io::Write;

use crate::drift::{apply_drift, drift_jacobian, Condition, ConditionReport, DriftSpec};
use crate::error::{Error, Result};
use crate::field_space::{duality, norm_h, norm_s, norm_v, Field, SpatialGrid, TripleSpec};
use crate::noise::{grid_index, wiener_shift, NoisePath, GRID_TOLERANCE};
use crate::tridiag::Tridiagonal;

/// Largest accepted number of step halvings.
pub const MAX_STEP_HALVINGS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Nominal step; must be a positive multiple of the noise step.
    pub dt: f64,
    /// Newton stops when `‖G(U)‖₂ ≤ newton_tol · max(1, ‖rhs‖₂)`.
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub step_halving_max: usize,
    /// Initial Newton step length in `(0, 1]`.
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            newton_tol: 1e-10,
            newton_max_iters: 50,
            step_halving_max: 8,
            damping: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn with_dt(dt: f64) -> Result<Self> {
        let cfg = Self { dt, ..Self::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("solver dt must be positive, got {}", self.dt)));
        }
        if !(self.newton_tol > 0.0 && self.newton_tol.is_finite()) {
            return Err(Error::Config(format!("newton_tol must be positive, got {}", self.newton_tol)));
        }
        if self.newton_max_iters == 0 {
            return Err(Error::Config("newton_max_iters must be at least 1".into()));
        }
        if self.step_halving_max > MAX_STEP_HALVINGS {
            return Err(Error::Config(format!(
                "step_halving_max must be at most {MAX_STEP_HALVINGS}, got {}",
                self.step_halving_max
            )));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        Ok(())
    }
}

/// Recorded solution on `[s, t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrajectory {
    s: f64,
    t: f64,
    times: Vec<f64>,
    z: Vec<Field>,
    states: Vec<Field>,
    newton_iters: Vec<usize>,
    accepted_dt: Vec<f64>,
}

impl FlowTrajectory {
    pub fn start(&self) -> f64 {
        self.s
    }

    pub fn end(&self) -> f64 {
        self.t
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `Z` at each recorded time.
    pub fn z(&self) -> &[Field] {
        &self.z
    }

    /// `S = Z + N` at each recorded time.
    pub fn states(&self) -> &[Field] {
        &self.states
    }

    /// Newton iterations per step (one entry fewer than `times`).
    pub fn newton_iters(&self) -> &[usize] {
        &self.newton_iters
    }

    /// Smallest sub-step accepted within each step.
    pub fn accepted_dt(&self) -> &[f64] {
        &self.accepted_dt
    }

    pub fn final_state(&self) -> &Field {
        self.states.last().expect("trajectory has at least one snapshot")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with columns `t,norm_H_S,norm_V_S,norm_S_S,newton_iters`.
    /// `norm_S_S` is `NaN` for triples without an intermediate space.
    pub fn write_csv<W: Write>(&self, triple: &TripleSpec, out: &mut W) -> Result<()> {
        writeln!(out, "t,norm_H_S,norm_V_S,norm_S_S,newton_iters")?;
        for (i, (t, s)) in self.times.iter().zip(&self.states).enumerate() {
            let ns = norm_s(s, triple).unwrap_or(f64::NAN);
            let iters = if i == 0 { 0 } else { self.newton_iters[i - 1] };
            writeln!(
                out,
                "{t:.16e},{:.16e},{:.16e},{ns:.16e},{iters}",
                norm_h(s, triple)?,
                norm_v(s, triple)?
            )?;
        }
        Ok(())
    }
}

/// Outcome of one Newton solve.
struct NewtonOutcome {
    u: Field,
    iters: usize,
}

fn euclid(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `U − h A(U) − rhs`.
fn residual(drift: &DriftSpec, h: f64, u: &Field, rhs: &Field) -> Result<Vec<f64>> {
    let a = apply_drift(drift, u)?;
    Ok(u.values()
        .iter()
        .zip(a.values())
        .zip(rhs.values())
        .map(|((u, a), r)| u - h * a - r)
        .collect())
}

/// Solves `U − h A(U) = rhs` by damped Newton with backtracking.
fn newton(
    drift: &DriftSpec,
    h: f64,
    rhs: &Field,
    guess: Field,
    cfg: &SolverConfig,
) -> std::result::Result<NewtonOutcome, String> {
    let grid = *rhs.grid();
    let target = cfg.newton_tol * euclid(rhs.values()).max(1.0);
    let mut u = guess;
    let mut g = residual(drift, h, &u, rhs).map_err(|e| e.to_string())?;
    let mut gn = euclid(&g);
    for iter in 0..cfg.newton_max_iters {
        if gn <= target {
            return Ok(NewtonOutcome { u, iters: iter });
        }
        let jac = drift_jacobian(drift, &u);
        let system = Tridiagonal {
            lower: jac.lower.iter().map(|x| -h * x).collect(),
            diag: jac.diag.iter().map(|x| 1.0 - h * x).collect(),
            upper: jac.upper.iter().map(|x| -h * x).collect(),
        };
        let delta = system.solve(&g).map_err(|e| e.to_string())?;
        if delta.iter().any(|d| !d.is_finite()) {
            return Err("singular Newton system".into());
        }
        let mut theta = cfg.damping;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = u.values().iter().zip(&delta).map(|(x, d)| x - theta * d).collect();
            if let Ok(trial) = Field::new(grid, trial) {
                if let Ok(tg) = residual(drift, h, &trial, rhs) {
                    let tn = euclid(&tg);
                    if tn <= target || tn < (1.0 - 1e-4 * theta) * gn {
                        accepted = Some((trial, tg, tn));
                        break;
                    }
                }
            }
            theta *= 0.5;
        }
        match accepted {
            Some((nu, ng, nn)) => {
                u = nu;
                g = ng;
                gn = nn;
            }
            None => {
                // At the rounding floor the residual cannot decrease further.
                if euclid(&delta) <= 1e-14 * (1.0 + euclid(u.values())) {
                    return Ok(NewtonOutcome { u, iters: iter + 1 });
                }
                return Err(format!("line search failed at residual {gn:.3e}"));
            }
        }
    }
    if gn <= target {
        Ok(NewtonOutcome { u, iters: cfg.newton_max_iters })
    } else {
        Err(format!(
            "no convergence in {} iterations (residual {gn:.3e})",
            cfg.newton_max_iters
        ))
    }
}

/// Result of one (possibly subdivided) step.
struct StepOutcome {
    z: Field,
    u: Field,
    iters: usize,
    min_dt: f64,
}

/// Advances `z` from `ta` to `tb`; `na`, `nb` are the noise values at the
/// endpoints. On Newton failure the step is split in two with the noise
/// interpolated linearly at the midpoint.
#[allow(clippy::too_many_arguments)]
fn advance(
    drift: &DriftSpec,
    cfg: &SolverConfig,
    z: &Field,
    ta: f64,
    tb: f64,
    na: &Field,
    nb: &Field,
    depth: usize,
) -> std::result::Result<StepOutcome, String> {
    let h = tb - ta;
    let rhs = z.axpy(1.0, nb).map_err(|e| e.to_string())?;
    match newton(drift, h, &rhs, rhs.clone(), cfg) {
        Ok(out) => {
            let znew = out.u.axpy(-1.0, nb).map_err(|e| e.to_string())?;
            Ok(StepOutcome { z: znew, u: out.u, iters: out.iters, min_dt: h })
        }
        Err(reason) => {
            if depth >= cfg.step_halving_max {
                return Err(format!("{reason} after {depth} halvings"));
            }
            let tm = 0.5 * (ta + tb);
            let nm = na.axpy(1.0, nb).map_err(|e| e.to_string())?.scaled(0.5);
            let first = advance(drift, cfg, z, ta, tm, na, &nm, depth + 1)?;
            let second = advance(drift, cfg, &first.z, tm, tb, &nm, nb, depth + 1)?;
            Ok(StepOutcome {
                z: second.z,
                u: second.u,
                iters: first.iters + second.iters,
                min_dt: first.min_dt.min(second.min_dt),
            })
        }
    }
}

/// Integer step plan `(k_s, k_t, stride)` on the noise grid.
fn plan(noise: &NoisePath, s: f64, t: f64, cfg: &SolverConfig) -> Result<(i64, i64, i64)> {
    cfg.validate()?;
    if s > t {
        return Err(Error::Config(format!("flow needs s <= t, got s = {s}, t = {t}")));
    }
    let ks = grid_index(s, noise.dt())?;
    let kt = grid_index(t, noise.dt())?;
    noise.at_index(ks).map_err(|_| window_error(noise, s))?;
    noise.at_index(kt).map_err(|_| window_error(noise, t))?;
    let ratio = cfg.dt / noise.dt();
    let stride = ratio.round();
    if stride < 1.0 || (ratio - stride).abs() > GRID_TOLERANCE * stride {
        return Err(Error::Config(format!(
            "solver dt {} is not a positive multiple of the noise step {}",
            cfg.dt,
            noise.dt()
        )));
    }
    Ok((ks, kt, stride as i64))
}

fn window_error(noise: &NoisePath, t: f64) -> Error {
    Error::Range(format!(
        "time {t} outside the noise window [{}, {}]",
        noise.t_start(),
        noise.t_end()
    ))
}

/// Runs the scheme, calling `visit(step, t, z, s, iters, min_dt)` after every
/// accepted step.
fn drive<F>(
    drift: &DriftSpec,
    noise: &NoisePath,
    x: &Field,
    s: f64,
    t: f64,
    cfg: &SolverConfig,
    mut visit: F,
) -> Result<Field>
where
    F: FnMut(f64, &Field, &Field, usize, f64),
{
    let (ks, kt, stride) = plan(noise, s, t, cfg)?;
    if x.grid() != noise.spec().grid() {
        return Err(Error::GridMismatch);
    }
    x.check_finite()?;
    let dtn = noise.dt();
    let mut z = x.axpy(-1.0, noise.at_index(ks)?)?;
    let mut state = x.clone();
    let mut k = ks;
    let mut step = 0usize;
    while k < kt {
        let next = (k + stride).min(kt);
        let (ta, tb) = (k as f64 * dtn, next as f64 * dtn);
        let (na, nb) = (noise.at_index(k)?, noise.at_index(next)?);
        let out = advance(drift, cfg, &z, ta, tb, na, nb, 0).map_err(|reason| Error::SolverFailure {
            step,
            time: ta,
            reason,
        })?;
        z = out.z;
        state = out.u;
        visit(tb, &z, &state, out.iters, out.min_dt);
        k = next;
        step += 1;
    }
    Ok(state)
}

/// Solves on `[s, t]` and records every step.
pub fn solve_transformed(
    drift: &DriftSpec,
    triple: &TripleSpec,
    noise: &NoisePath,
    x: &Field,
    s: f64,
    t: f64,
    cfg: &SolverConfig,
) -> Result<FlowTrajectory> {
    let _ = triple;
    let (ks, _, _) = plan(noise, s, t, cfg)?;
    let z0 = x.axpy(-1.0, noise.at_index(ks)?)?;
    let mut traj = FlowTrajectory {
        s,
        t,
        times: vec![ks as f64 * noise.dt()],
        z: vec![z0],
        states: vec![x.clone()],
        newton_iters: Vec::new(),
        accepted_dt: Vec::new(),
    };
    drive(drift, noise, x, s, t, cfg, |tb, z, u, iters, min_dt| {
        traj.times.push(tb);
        traj.z.push(z.clone());
        traj.states.push(u.clone());
        traj.newton_iters.push(iters);
        traj.accepted_dt.push(min_dt);
    })?;
    Ok(traj)
}

/// `S(t, s)x` without storing the trajectory.
pub fn flow_map(
    drift: &DriftSpec,
    triple: &TripleSpec,
    noise: &NoisePath,
    x: &Field,
    s: f64,
    t: f64,
    cfg: &SolverConfig,
) -> Result<Field> {
    let _ = triple;
    drive(drift, noise, x, s, t, cfg, |_, _, _, _, _| {})
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CocycleResidual {
    /// `‖S(t, r)S(r, s)x − S(t, s)x‖_H`.
    pub composition: f64,
    /// `‖S(t, s; ω)x − S(t − s, 0; θ_s ω)x‖_H`.
    pub shift: f64,
}

impl CocycleResidual {
    pub fn max(&self) -> f64 {
        self.composition.max(self.shift)
    }
}

/// Composition and shift residuals of the discrete flow.
#[allow(clippy::too_many_arguments)]
pub fn check_cocycle(
    drift: &DriftSpec,
    triple: &TripleSpec,
    noise: &NoisePath,
    x: &Field,
    s: f64,
    r: f64,
    t: f64,
    cfg: &SolverConfig,
) -> Result<CocycleResidual> {
    if !(s <= r && r <= t) {
        return Err(Error::Config(format!("cocycle check needs s <= r <= t, got {s}, {r}, {t}")));
    }
    let direct = flow_map(drift, triple, noise, x, s, t, cfg)?;
    let mid = flow_map(drift, triple, noise, x, s, r, cfg)?;
    let composed = flow_map(drift, triple, noise, &mid, r, t, cfg)?;
    let shifted_noise = wiener_shift(noise, s)?;
    let ks = grid_index(s, noise.dt())?;
    let kt = grid_index(t, noise.dt())?;
    let shifted = flow_map(
        drift,
        triple,
        &shifted_noise,
        x,
        0.0,
        (kt - ks) as f64 * noise.dt(),
        cfg,
    )?;
    Ok(CocycleResidual {
        composition: norm_h(&composed.axpy(-1.0, &direct)?, triple)?,
        shift: norm_h(&shifted.axpy(-1.0, &direct)?, triple)?,
    })
}

/// Constants of the energy inequality
/// `d/dt ‖Z‖_H² + (δ₀/2)‖Z‖_V^α ≤ −λ‖Z‖_H² + f_t + C_E` with
/// `f_t = 2K‖N_t‖_H² + C_f(‖N_t‖_V^α + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyConstants {
    pub alpha: f64,
    /// `δ₀ = 2^{-α} δ`.
    pub delta0: f64,
    pub k: f64,
    pub c_f: f64,
    /// Dissipation rate; may be negative when `K` dominates for `α = 2`.
    pub lambda: f64,
    pub c_extra: f64,
    /// `c_e` with `‖v‖_H ≤ c_e ‖v‖_V`.
    pub embedding: f64,
}

impl EnergyConstants {
    /// Derived from the declared drift constants, with `C` serving both as
    /// the coercivity and the growth constant.
    pub fn from_drift(drift: &DriftSpec, triple: &TripleSpec, grid: &SpatialGrid) -> Result<Self> {
        let c = drift.constants();
        let (alpha, delta, k, cc) = (c.alpha, c.delta, c.k, c.c);
        if !(alpha > 1.0) {
            return Err(Error::Config(format!("energy constants need alpha > 1, got {alpha}")));
        }
        let delta0 = 2f64.powf(-alpha) * delta;
        let q = alpha / (alpha - 1.0);
        let eps = (q * delta / 2.0).powf(1.0 / q);
        let c_young = (2.0 * cc).powf(alpha) / (alpha * eps.powf(alpha));
        let c_f = (cc + 2.0 * cc).max(c_young + delta / 2.0 + 2.0 * cc);
        let ce = triple.h_over_v_bound(grid);
        let (lambda, c_extra) = if alpha == 2.0 {
            (delta0 / (2.0 * ce * ce) - 2.0 * k, 0.0)
        } else {
            let lambda = delta0 / (2.0 * ce * ce);
            let a = 2.0 * k + lambda;
            let b = 0.5 * delta0 * ce.powf(-alpha);
            let xm = (2.0 * a / (alpha * b)).powf(1.0 / (alpha - 2.0));
            (lambda, a * xm * xm - b * xm.powf(alpha))
        };
        Ok(Self { alpha, delta0, k, c_f, lambda, c_extra, embedding: ce })
    }

    /// As [`EnergyConstants::from_drift`], but only once the coercivity and
    /// growth conditions are present in `reports` and satisfied.
    pub fn from_certified(
        drift: &DriftSpec,
        triple: &TripleSpec,
        grid: &SpatialGrid,
        reports: &[ConditionReport],
    ) -> Result<Self> {
        for cond in [Condition::H3, Condition::H4] {
            match reports.iter().find(|r| r.condition == cond) {
                Some(r) if r.satisfied => {}
                Some(r) => {
                    return Err(Error::Config(format!(
                        "{cond} failed certification (worst margin {:.3e})",
                        r.worst_margin
                    )))
                }
                None => return Err(Error::Config(format!("missing certified constants for {cond}"))),
            }
        }
        Self::from_drift(drift, triple, grid)
    }

    /// `f_t` for a noise value.
    pub fn forcing(&self, noise_value: &Field, triple: &TripleSpec) -> Result<f64> {
        let nh = norm_h(noise_value, triple)?;
        let nv = norm_v(noise_value, triple)?;
        Ok(2.0 * self.k * nh * nh + self.c_f * (nv.powf(self.alpha) + 1.0))
    }
}

/// Per-step energy balance at the right endpoint of each step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergySeries {
    pub times: Vec<f64>,
    /// `(‖Z_{k+1}‖_H² − ‖Z_k‖_H²) / h`.
    pub d_energy: Vec<f64>,
    /// `2⟨A(S_{k+1}), Z_{k+1}⟩`.
    pub pairing: Vec<f64>,
    /// `‖Z_{k+1}‖_V^α`.
    pub v_power: Vec<f64>,
    pub forcing: Vec<f64>,
    /// Right side minus left side of the inequality; `≥ 0` when it holds.
    pub slack: Vec<f64>,
    /// `(δ₀/2) Σ h ‖Z‖_V^α`.
    pub integrated_lhs: f64,
    /// `‖Z_s‖_H² + Σ h (f + C_E + λ⁻ ‖Z‖_H²)`.
    pub integrated_rhs: f64,
}

impl EnergySeries {
    pub fn min_slack(&self) -> f64 {
        self.slack.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn integrated_slack(&self) -> f64 {
        self.integrated_rhs - self.integrated_lhs
    }
}

/// Evaluates the energy inequality along a trajectory.
pub fn energy_diagnostics(
    traj: &FlowTrajectory,
    drift: &DriftSpec,
    triple: &TripleSpec,
    noise: &NoisePath,
    constants: &EnergyConstants,
) -> Result<EnergySeries> {
    let mut out = EnergySeries::default();
    let e0 = norm_h(&traj.z[0], triple)?.powi(2);
    out.integrated_rhs = e0;
    let mut prev = e0;
    for i in 1..traj.len() {
        let t = traj.times[i];
        let h = t - traj.times[i - 1];
        let z = &traj.z[i];
        let e = norm_h(z, triple)?.powi(2);
        let vp = norm_v(z, triple)?.powf(constants.alpha);
        let f = constants.forcing(noise.at(t)?, triple)?;
        let de = (e - prev) / h;
        let pairing = 2.0 * duality(&apply_drift(drift, &traj.states[i])?, z, triple)?;
        let rhs = -constants.lambda * e + f + constants.c_extra;
        out.times.push(t);
        out.d_energy.push(de);
        out.pairing.push(pairing);
        out.v_power.push(vp);
        out.forcing.push(f);
        out.slack.push(rhs - de - 0.5 * constants.delta0 * vp);
        out.integrated_lhs += h * 0.5 * constants.delta0 * vp;
        out.integrated_rhs += h * (f + constants.c_extra + (-constants.lambda).max(0.0) * e);
        prev = e;
    }
    Ok(out)
}
