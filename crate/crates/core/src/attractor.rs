//! Pullback experiments: bundle contraction, rate fits against the
//! comparison ODE `h' = −λ h^{β/2}`, absorbing radii, and the random fixed
//! point.

use std::io::Write;

use rayon::prelude::*;

use crate::drift::DriftSpec;
use crate::error::{Error, Result};
use crate::field_space::{norm_h, norm_s, norm_v, Field, TripleSpec};
use crate::flow::{flow_map, EnergyConstants, SolverConfig};
use crate::noise::{grid_index, wiener_shift, NoisePath};
use crate::stats::linear_fit;

/// Default pullback start times.
pub const DEFAULT_PULLBACK_LADDER: [f64; 6] = [-1.0, -2.0, -5.0, -10.0, -20.0, -40.0];

/// Relative weight below which an exponentially weighted tail is dropped.
pub const TAIL_WEIGHT: f64 = 1e-12;

/// Slack factor for bound comparisons.
pub const BOUND_SLACK: f64 = 1.1;

/// Solution of `h' = −λ h^{β/2}`, `h(0) = h0`, after `elapsed`.
///
/// For `β > 2`, `h0 = ∞` gives the start-independent bound
/// `{(λ/2)(β − 2) elapsed}^{−2/(β−2)}`.
pub fn comparison_oracle(h0: f64, lambda: f64, beta: f64, elapsed: f64) -> Result<f64> {
    if !(beta >= 2.0) {
        return Err(Error::Domain(format!("comparison ODE needs beta >= 2, got {beta}")));
    }
    if !(lambda > 0.0) || !(elapsed >= 0.0) || !(h0 >= 0.0) {
        return Err(Error::Domain(format!(
            "comparison ODE needs lambda > 0, elapsed >= 0, h0 >= 0; got {lambda}, {elapsed}, {h0}"
        )));
    }
    if elapsed == 0.0 {
        return Ok(h0);
    }
    if beta == 2.0 {
        return Ok(h0 * (-lambda * elapsed).exp());
    }
    let base = if h0.is_infinite() { 0.0 } else { h0.powf((2.0 - beta) / 2.0) };
    Ok((base + 0.5 * lambda * (beta - 2.0) * elapsed).powf(-2.0 / (beta - 2.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateKind {
    /// Log-log slope of the squared diameter against elapsed time.
    Polynomial,
    /// Decay rate `λ̂` of the squared diameter (negated semilog slope).
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub kind: RateKind,
    pub value: f64,
    pub points: usize,
}

fn fit_rate(kind: RateKind, elapsed: &[f64], dist_sq: &[f64], floor: f64) -> Option<RateFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = elapsed
        .iter()
        .zip(dist_sq)
        .filter(|(e, d)| **e > 0.0 && **d > floor && d.is_finite())
        .map(|(e, d)| match kind {
            RateKind::Polynomial => (e.ln(), d.ln()),
            RateKind::Exponential => (*e, d.ln()),
        })
        .unzip();
    if xs.len() < 2 {
        return None;
    }
    let (slope, _) = linear_fit(&xs, &ys)?;
    let value = match kind {
        RateKind::Polynomial => slope,
        RateKind::Exponential => -slope,
    };
    Some(RateFit { kind, value, points: xs.len() })
}

/// Squared distances are not resolved below this level.
fn distance_floor(cfg: &SolverConfig) -> f64 {
    (10.0 * cfg.newton_tol).powi(2)
}

/// Contraction of squared distances by the implicit scheme with step `dt` under
/// `β = 2`: each step divides the distance by at least `1 + dt λ/2`.
/// Tends to `e^{-λ elapsed}` as `dt → 0`.
pub fn implicit_contraction_factor(lambda: f64, dt: f64, elapsed: f64) -> f64 {
    (-2.0 * elapsed / dt * (0.5 * lambda * dt).ln_1p()).exp()
}

fn rate_kind(beta: f64) -> RateKind {
    if beta > 2.0 {
        RateKind::Polynomial
    } else {
        RateKind::Exponential
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullbackResult {
    /// Start times, sorted from closest to `eval_time` to most negative.
    pub s_list: Vec<f64>,
    pub eval_time: f64,
    /// `endpoints[i][m] = S(eval_time, s_i) x_m`.
    pub endpoints: Vec<Vec<Field>>,
    /// Largest pairwise `H` distance per start time.
    pub diameters: Vec<f64>,
    /// `dist_sq[i][m] = ‖S(eval, s_i)x_m − S(eval, s_i)x_0‖_H²`.
    pub dist_sq: Vec<Vec<f64>>,
    /// Comparison bound per entry of `dist_sq` (`NaN` when unavailable).
    pub bounds: Vec<Vec<f64>>,
    /// Bundle mean at the most negative start time.
    pub eta0: Field,
    /// Error bar of `eta0`: the diameter at the most negative start time.
    pub eta0_error: f64,
    pub fitted_rate: Option<RateFit>,
    pub bound_violations: usize,
    /// Diameters are non-increasing as `s` decreases (up to `2 newton_tol`).
    pub monotone: bool,
}

impl PullbackResult {
    /// CSV with columns `s,t,member_id,dist_H_sq,bound_value,ratio`,
    /// followed by a `#` summary block.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "s,t,member_id,dist_H_sq,bound_value,ratio")?;
        for (i, s) in self.s_list.iter().enumerate() {
            for (m, (d, b)) in self.dist_sq[i].iter().zip(&self.bounds[i]).enumerate() {
                let ratio = if *b > 0.0 { d / b } else { f64::NAN };
                writeln!(out, "{s:.16e},{:.16e},{m},{d:.16e},{b:.16e},{ratio:.16e}", self.eval_time)?;
            }
        }
        for (s, d) in self.s_list.iter().zip(&self.diameters) {
            writeln!(out, "# diameter s={s} value={d:.16e}")?;
        }
        match &self.fitted_rate {
            Some(f) => writeln!(out, "# fitted_rate kind={:?} value={:.16e} points={}", f.kind, f.value, f.points)?,
            None => writeln!(out, "# fitted_rate none")?,
        }
        writeln!(out, "# eta0_error={:.16e}", self.eta0_error)?;
        writeln!(out, "# bound_violations={}", self.bound_violations)?;
        writeln!(out, "# monotone={}", self.monotone)?;
        Ok(())
    }
}

fn attach_s(err: Error, s: f64) -> Error {
    match err {
        Error::SolverFailure { step, time, reason } => Error::SolverFailure {
            step,
            time,
            reason: format!("pullback from s = {s}: {reason}"),
        },
        other => other,
    }
}

/// Evolves every bundle member from each `s` to `eval_time` on the same
/// noise path.
#[allow(clippy::too_many_arguments)]
pub fn pullback_run(
    drift: &DriftSpec,
    triple: &TripleSpec,
    noise: &NoisePath,
    bundle: &[Field],
    s_list: &[f64],
    eval_time: f64,
    cfg: &SolverConfig,
) -> Result<PullbackResult> {
    if bundle.is_empty() {
        return Err(Error::Config("pullback needs a nonempty bundle".into()));
    }
    if s_list.is_empty() {
        return Err(Error::Config("pullback needs at least one start time".into()));
    }
    if let Some(s) = s_list.iter().find(|s| **s > eval_time) {
        return Err(Error::Config(format!("start time {s} is after the evaluation time {eval_time}")));
    }
    let mut s_sorted = s_list.to_vec();
    s_sorted.sort_by(|a, b| b.total_cmp(a));
    for s in &s_sorted {
        grid_index(*s, noise.dt())?;
        noise.at(*s).map_err(|_| {
            Error::Range(format!(
                "start time {s} outside the noise window [{}, {}]",
                noise.t_start(),
                noise.t_end()
            ))
        })?;
    }
    let jobs: Vec<(usize, usize)> = (0..s_sorted.len())
        .flat_map(|i| (0..bundle.len()).map(move |m| (i, m)))
        .collect();
    let results: Vec<Result<Field>> = jobs
        .par_iter()
        .map(|&(i, m)| {
            let s = s_sorted[i];
            flow_map(drift, triple, noise, &bundle[m], s, eval_time, cfg).map_err(|e| attach_s(e, s))
        })
        .collect();
    let mut endpoints: Vec<Vec<Field>> = vec![Vec::with_capacity(bundle.len()); s_sorted.len()];
    for ((i, _), r) in jobs.iter().zip(results) {
        endpoints[*i].push(r?);
    }

    let beta = drift.beta();
    let lambda = drift.constants().lambda;
    let floor = distance_floor(cfg);
    let mut initial_sq = Vec::with_capacity(bundle.len());
    for x in bundle {
        initial_sq.push(norm_h(&x.axpy(-1.0, &bundle[0])?, triple)?.powi(2));
    }
    let mut diameters = Vec::with_capacity(s_sorted.len());
    let mut dist_sq = Vec::with_capacity(s_sorted.len());
    let mut bounds = Vec::with_capacity(s_sorted.len());
    let mut violations = 0;
    for (i, ends) in endpoints.iter().enumerate() {
        let mut diam: f64 = 0.0;
        for a in 0..ends.len() {
            for b in a + 1..ends.len() {
                diam = diam.max(norm_h(&ends[a].axpy(-1.0, &ends[b])?, triple)?);
            }
        }
        diameters.push(diam);
        let elapsed = eval_time - s_sorted[i];
        let mut row_d = Vec::with_capacity(ends.len());
        let mut row_b = Vec::with_capacity(ends.len());
        for (m, e) in ends.iter().enumerate() {
            let d = norm_h(&e.axpy(-1.0, &ends[0])?, triple)?.powi(2);
            let bound = match beta {
                Some(b) if b > 2.0 => comparison_oracle(f64::INFINITY, lambda, b, elapsed)?,
                Some(_) => initial_sq[m] * implicit_contraction_factor(lambda, cfg.dt, elapsed),
                None => f64::NAN,
            };
            if bound.is_finite() && d > BOUND_SLACK * bound + floor {
                violations += 1;
            }
            row_d.push(d);
            row_b.push(bound);
        }
        dist_sq.push(row_d);
        bounds.push(row_b);
    }
    let monotone = diameters.windows(2).all(|w| w[1] <= w[0] + 2.0 * cfg.newton_tol);
    let last = endpoints.last().expect("nonempty");
    let mut eta0 = Field::zeros(*bundle[0].grid());
    for e in last {
        eta0 = eta0.axpy(1.0 / last.len() as f64, e)?;
    }
    let fitted_rate = beta.and_then(|b| {
        let elapsed: Vec<f64> = s_sorted.iter().map(|s| eval_time - s).collect();
        let sq: Vec<f64> = diameters.iter().map(|d| d * d).collect();
        fit_rate(rate_kind(b), &elapsed, &sq, floor)
    });
    Ok(PullbackResult {
        s_list: s_sorted,
        eval_time,
        endpoints,
        eta0_error: *diameters.last().expect("nonempty"),
        diameters,
        dist_sq,
        bounds,
        eta0,
        fitted_rate,
        bound_violations: violations,
        monotone,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub times: Vec<f64>,
    pub dist_sq: Vec<f64>,
    pub bounds: Vec<f64>,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

#[allow(clippy::too_many_arguments)]
fn pair_distances(
    drift: &DriftSpec,
    triple: &TripleSpec,
    noise: &NoisePath,
    x: &Field,
    y: &Field,
    s1: f64,
    s2: f64,
    times: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    if !(s1 <= s2) {
        return Err(Error::Config(format!("need s1 <= s2, got {s1} > {s2}")));
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    if sorted.first().is_none_or(|t| *t <= s2) {
        return Err(Error::Config("sample times must be nonempty and after s2".into()));
    }
    let pairs: Vec<Result<f64>> = times
        .par_iter()
        .map(|&t| {
            let a = flow_map(drift, triple, noise, x, s1, t, cfg)?;
            let b = flow_map(drift, triple, noise, y, s2, t, cfg)?;
            Ok(norm_h(&a.axpy(-1.0, &b)?, triple)?.powi(2))
        })
        .collect();
    pairs.into_iter().collect()
}

/// Compares `‖S(t, s1)x − S(t, s2)y‖_H²` with the start-independent
/// polynomial bound `{(λ/2)(β − 2)(t − s2)}^{−2/(β−2)}`.
#[allow(clippy::too_many_arguments)]
pub fn verify_polynomial_bound(
    drift: &DriftSpec,
    triple: &TripleSpec,
    noise: &NoisePath,
    x: &Field,
    y: &Field,
    s1: f64,
    s2: f64,
    sample_times: &[f64],
    cfg: &SolverConfig,
) -> Result<BoundReport> {
    let beta = match drift.beta() {
        Some(b) if b > 2.0 => b,
        other => {
            return Err(Error::Config(format!(
                "polynomial bound needs beta > 2, drift has {other:?}"
            )))
        }
    };
    let lambda = drift.constants().lambda;
    let dist_sq = pair_distances(drift, triple, noise, x, y, s1, s2, sample_times, cfg)?;
    let bounds = sample_times
        .iter()
        .map(|t| comparison_oracle(f64::INFINITY, lambda, beta, t - s2))
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = dist_sq.iter().zip(&bounds).map(|(d, b)| d / b).collect();
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(BoundReport {
        times: sample_times.to_vec(),
        dist_sq,
        bounds,
        ratios,
        max_ratio,
    })
}

/// Constants entering `C_η(r)` of the exponential contraction estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionConstants {
    pub eta: f64,
    pub eta_tilde: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub c_eps2: f64,
    /// `ε₁ C + (1 − ε₁) C_η̃ + ε₂ C'`.
    pub constant_part: f64,
}

impl ContractionConstants {
    /// Built from the drift constants `(α, δ, K, C, λ)`; the growth bound is
    /// raised to `‖A(w)‖^{α/(α−1)} ≤ C'(1 + ‖w‖_V^α)` with
    /// `C' = 2^{1/(α−1)} C^{α/(α−1)}`, and `C_η̃ = 0` since `A(0) = 0`.
    pub fn new(drift: &DriftSpec, eta: f64) -> Result<Self> {
        let c = drift.constants();
        if !(eta > 0.0 && eta < c.lambda) {
            return Err(Error::Config(format!("eta must lie in (0, {}), got {eta}", c.lambda)));
        }
        let alpha = c.alpha;
        let q = alpha / (alpha - 1.0);
        let eta_tilde = 0.5 * (eta + c.lambda);
        let eps1 = ((eta_tilde - eta) / (eta_tilde + c.k)).min(1.0);
        let c_growth = 2f64.powf(q - 1.0) * c.c.powf(q);
        let eps2 = c.delta * eps1 / c_growth;
        let e = (q * eps2).powf(1.0 / q);
        let c_eps2 = 2f64.powf(alpha) / (alpha * e.powf(alpha));
        Ok(Self {
            eta,
            eta_tilde,
            eps1,
            eps2,
            c_eps2,
            constant_part: eps1 * c.c + eps2 * c_growth,
        })
    }

    pub fn c_eta(&self, noise_value: &Field, triple: &TripleSpec, alpha: f64) -> Result<f64> {
        let nh = norm_h(noise_value, triple)?;
        let nv = norm_v(noise_value, triple)?;
        Ok(self.eta * nh * nh + self.c_eps2 * nv.powf(alpha) + self.constant_part)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialReport {
    pub times: Vec<f64>,
    pub dist_sq: Vec<f64>,
    /// `None` when all distances are below resolution (e.g. `x = y`).
    pub lambda_hat: Option<f64>,
    pub fit_skipped: bool,
    pub certified_lambda: f64,
    pub meets_certified: bool,
    pub k_eta: f64,
    /// Lower end of the `K_η` quadrature.
    pub k_eta_horizon: f64,
    /// `2(‖x‖² e^{η s1/2} + K_η + ‖y‖²) e^{(λ−η) s2} e^{−λ t}` (for `s2 ≤ 0`).
    pub bounds: Vec<f64>,
    pub bound_violations: usize,
}

/// Weights `(w_a, w_b)` with `∫_a^b e^{c r} g(r) dr = w_a g(a) + w_b g(b)` for
/// linear `g`.
fn exp_trapezoid_weights(c: f64, a: f64, b: f64) -> (f64, f64) {
    let h = b - a;
    let x = c * h;
    if x.abs() < 1e-6 {
        let ea = (c * a).exp();
        let mid = h * ea;
        // Series for small c h.
        return (mid * (0.5 + x / 6.0), mid * (0.5 + x / 3.0));
    }
    let ea = (c * a).exp();
    let eb = (c * b).exp();
    let integral = (eb - ea) / c;
    let first_moment = (eb * (x - 1.0) + ea) / (c * c * h);
    (integral - first_moment, first_moment)
}

/// `∫_{t0}^{t1} e^{c r} g(r) dr` on the noise grid with `g` linear between
/// nodes.
fn exp_weighted_integral<G: Fn(&Field) -> Result<f64>>(
    noise: &NoisePath,
    c: f64,
    t0: f64,
    t1: f64,
    g: G,
) -> Result<f64> {
    let (i0, i1) = (noise.position(t0)?, noise.position(t1)?);
    let mut total = 0.0;
    let mut prev = g(&noise.snapshots()[i0])?;
    for i in i0..i1 {
        let next = g(&noise.snapshots()[i + 1])?;
        let (wa, wb) = exp_trapezoid_weights(c, noise.time(i), noise.time(i + 1));
        total += wa * prev + wb * next;
        prev = next;
    }
    Ok(total)
}

/// Semilog rate fit of `‖S(t, s1)x − S(t, s2)y‖_H²` and the constant `K_η`.
#[allow(clippy::too_many_arguments)]
pub fn verify_exponential_bound(
    drift: &DriftSpec,
    triple: &TripleSpec,
    noise: &NoisePath,
    x: &Field,
    y: &Field,
    eta_margin: f64,
    s1: f64,
    s2: f64,
    sample_times: &[f64],
    cfg: &SolverConfig,
) -> Result<ExponentialReport> {
    if drift.beta() != Some(2.0) {
        return Err(Error::Config(format!(
            "exponential bound needs beta = 2, drift has {:?}",
            drift.beta()
        )));
    }
    let constants = drift.constants();
    let lambda = constants.lambda;
    let eta = lambda - eta_margin;
    let cc = ContractionConstants::new(drift, eta)?;
    let dist_sq = pair_distances(drift, triple, noise, x, y, s1, s2, sample_times, cfg)?;
    let floor = distance_floor(cfg);
    let elapsed: Vec<f64> = sample_times.iter().map(|t| t - s2).collect();
    let fit = fit_rate(RateKind::Exponential, &elapsed, &dist_sq, floor);
    let lambda_hat = fit.map(|f| f.value);
    let horizon_wanted = 2.0 * TAIL_WEIGHT.ln() / eta;
    let horizon = ((horizon_wanted / noise.dt()).floor() * noise.dt()).max(noise.t_start());
    let k_eta = if horizon < 0.0 && noise.t_end() >= 0.0 {
        exp_weighted_integral(noise, 0.5 * eta, horizon, 0.0, |n| cc.c_eta(n, triple, constants.alpha))?
    } else {
        f64::NAN
    };
    let nx = norm_h(x, triple)?.powi(2);
    let ny = norm_h(y, triple)?.powi(2);
    let bounds: Vec<f64> = sample_times
        .iter()
        .map(|t| {
            if s2 <= 0.0 && k_eta.is_finite() {
                2.0 * (nx * (0.5 * eta * s1).exp() + k_eta + ny) * ((lambda - eta) * s2).exp() * (-lambda * t).exp()
            } else {
                f64::NAN
            }
        })
        .collect();
    let bound_violations = dist_sq
        .iter()
        .zip(&bounds)
        .filter(|(d, b)| b.is_finite() && **d > **b + floor)
        .count();
    Ok(ExponentialReport {
        times: sample_times.to_vec(),
        dist_sq,
        fit_skipped: lambda_hat.is_none(),
        meets_certified: lambda_hat.is_some_and(|l| l >= lambda * (1.0 - 1e-6)),
        lambda_hat,
        certified_lambda: lambda,
        k_eta,
        k_eta_horizon: horizon,
        bounds,
        bound_violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadiusKind {
    R1,
    R2,
}

/// Constants of the absorbing-ball estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusConstants {
    pub lambda: f64,
    pub k: f64,
    pub c: f64,
    pub alpha: f64,
}

impl RadiusConstants {
    /// From energy constants, using one constant `C ≥ max(C_f, C_E)`.
    pub fn from_energy(e: &EnergyConstants) -> Result<Self> {
        if !(e.lambda > 0.0) {
            return Err(Error::Config(format!("absorption needs a positive rate, got {}", e.lambda)));
        }
        Ok(Self { lambda: e.lambda, k: e.k, c: e.c_f.max(e.c_extra), alpha: e.alpha })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadiusEstimate {
    pub which: RadiusKind,
    /// The radius (not squared).
    pub value: f64,
    pub value_sq: f64,
    pub truncation_horizon: f64,
    /// Estimate of the neglected part of the integral beyond the horizon.
    pub tail_estimate: f64,
    pub constants: Option<RadiusConstants>,
    /// Fitted `C₂` of the affine bound `‖Z_0‖_S² ≤ C₂(‖Z_{−1}‖_H² + 1)` (r2 only).
    pub c2_hat: Option<f64>,
}

/// `r₁² = 2 + 2 sup_{r ≤ −1} e^{−λ(−1−r)}‖N_r‖_H² + ∫_{−∞}^{−1} e^{−λ(−1−r)}(f_r + C) dr`
/// truncated at `horizon` (default: where the weight falls to `1e-12`).
pub fn absorbing_radius_r1(
    noise: &NoisePath,
    triple: &TripleSpec,
    constants: &RadiusConstants,
    horizon: Option<f64>,
) -> Result<RadiusEstimate> {
    let RadiusConstants { lambda, k, c, alpha } = *constants;
    if !(lambda > 0.0) {
        return Err(Error::Config(format!("r1 needs lambda > 0, got {lambda}")));
    }
    let wanted = horizon.unwrap_or(-1.0 + TAIL_WEIGHT.ln() / lambda);
    let kh = (wanted / noise.dt()).floor() as i64;
    let horizon = kh as f64 * noise.dt();
    if !(horizon < -1.0) {
        return Err(Error::Config(format!("truncation horizon {horizon} must lie below -1")));
    }
    if horizon < noise.t_start() - 1e-12 || noise.t_end() < -1.0 {
        return Err(Error::Range(format!(
            "noise window [{}, {}] does not cover [{horizon}, -1]",
            noise.t_start(),
            noise.t_end()
        )));
    }
    grid_index(-1.0, noise.dt())?;
    let integrand = |n: &Field| -> Result<f64> {
        let nh = norm_h(n, triple)?;
        let nv = norm_v(n, triple)?;
        Ok(2.0 * k * nh * nh + c * (nv.powf(alpha) + 1.0) + c)
    };
    // e^{−λ(−1−r)} = e^{λ} e^{λ r}.
    let integral = lambda.exp() * exp_weighted_integral(noise, lambda, horizon, -1.0, integrand)?;
    let (i0, i1) = (noise.position(horizon)?, noise.position(-1.0)?);
    let mut sup: f64 = 0.0;
    for i in i0..=i1 {
        let r = noise.time(i);
        sup = sup.max((-lambda * (-1.0 - r)).exp() * norm_h(&noise.snapshots()[i], triple)?.powi(2));
    }
    let weight = (-lambda * (-1.0 - horizon)).exp();
    let tail_estimate = weight * integrand(noise.at(horizon)?)? / lambda;
    let value_sq = 2.0 + 2.0 * sup + integral;
    Ok(RadiusEstimate {
        which: RadiusKind::R1,
        value: value_sq.sqrt(),
        value_sq,
        truncation_horizon: horizon,
        tail_estimate,
        constants: Some(*constants),
        c2_hat: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct R2Diagnostics {
    pub estimate: RadiusEstimate,
    /// Per start time: `(s, max_x ‖Z(0, s)x‖_S, max_x ‖Z(0, s)x‖_{L²})`.
    pub per_s: Vec<(f64, f64, f64)>,
    /// `max ‖Z(−1, s)x‖_H²` over all samples and start times.
    pub max_z_minus1_sq: f64,
}

/// Empirical `r₂ = max ‖Z(0, s)x‖_S` over samples and start times `s ≤ −2`.
pub fn absorbing_radius_r2(
    drift: &DriftSpec,
    triple: &TripleSpec,
    noise: &NoisePath,
    x_samples: &[Field],
    s_list: &[f64],
    cfg: &SolverConfig,
) -> Result<R2Diagnostics> {
    if x_samples.is_empty() {
        return Err(Error::Config("r2 needs at least one initial field".into()));
    }
    if s_list.is_empty() || s_list.iter().any(|s| *s > -2.0) {
        return Err(Error::Config("r2 start times must be nonempty and at most -2".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..s_list.len())
        .flat_map(|i| (0..x_samples.len()).map(move |m| (i, m)))
        .collect();
    let n_minus1 = noise.at(-1.0)?.clone();
    let n0 = noise.at(0.0)?.clone();
    let results: Vec<Result<(f64, f64, f64)>> = jobs
        .par_iter()
        .map(|&(i, m)| {
            let s = s_list[i];
            let a = flow_map(drift, triple, noise, &x_samples[m], s, -1.0, cfg).map_err(|e| attach_s(e, s))?;
            let b = flow_map(drift, triple, noise, &a, -1.0, 0.0, cfg).map_err(|e| attach_s(e, s))?;
            let z1 = a.axpy(-1.0, &n_minus1)?;
            let z0 = b.axpy(-1.0, &n0)?;
            Ok((norm_h(&z1, triple)?.powi(2), norm_s(&z0, triple)?, z0.lp_norm(2.0)))
        })
        .collect();
    let mut per_s: Vec<(f64, f64, f64)> = s_list.iter().map(|s| (*s, 0.0, 0.0)).collect();
    let mut r2: f64 = 0.0;
    let mut c2: f64 = 0.0;
    let mut zmax: f64 = 0.0;
    for ((i, _), r) in jobs.iter().zip(results) {
        let (z1sq, zs, zl2) = r?;
        per_s[*i].1 = per_s[*i].1.max(zs);
        per_s[*i].2 = per_s[*i].2.max(zl2);
        r2 = r2.max(zs);
        c2 = c2.max(zs * zs / (z1sq + 1.0));
        zmax = zmax.max(z1sq);
    }
    Ok(R2Diagnostics {
        estimate: RadiusEstimate {
            which: RadiusKind::R2,
            value: r2,
            value_sq: r2 * r2,
            truncation_horizon: s_list.iter().cloned().fold(f64::INFINITY, f64::min),
            tail_estimate: 0.0,
            constants: None,
            c2_hat: Some(c2),
        },
        per_s,
        max_z_minus1_sq: zmax,
    })
}

/// `‖φ(t, ω) η̂₀(ω) − η̂₀(θ_t ω)‖_H`, where `η̂₀(ω) = S(0, depth; ω) x0`.
#[allow(clippy::too_many_arguments)]
pub fn random_fixed_point_check(
    drift: &DriftSpec,
    triple: &TripleSpec,
    noise: &NoisePath,
    x0: &Field,
    t_shift: f64,
    depth: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    if drift.beta().is_none() {
        return Err(Error::Config("random fixed point needs a strongly monotone drift".into()));
    }
    if !(depth < 0.0) || !(t_shift >= 0.0) {
        return Err(Error::Config(format!(
            "need depth < 0 and t_shift >= 0, got {depth}, {t_shift}"
        )));
    }
    grid_index(t_shift, noise.dt())?;
    let eta_here = flow_map(drift, triple, noise, x0, depth, 0.0, cfg)?;
    let moved = flow_map(drift, triple, noise, &eta_here, 0.0, t_shift, cfg)?;
    let shifted = wiener_shift(noise, t_shift)?;
    let eta_there = flow_map(drift, triple, &shifted, x0, depth, 0.0, cfg)?;
    norm_h(&moved.axpy(-1.0, &eta_there)?, triple)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::DriftFamily;
    use crate::field_space::SpatialGrid;
    use crate::noise::{gen_path, ModeWeights, NoiseSpec};

    #[test]
    fn oracle_examples() {
        assert!((comparison_oracle(1.0, 2.0, 4.0, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(comparison_oracle(0.7, 2.0, 3.0, 0.0).unwrap(), 0.7);
        assert!((comparison_oracle(4.0, 1.0, 2.0, 2f64.ln()).unwrap() - 2.0).abs() < 1e-14);
        assert!(matches!(comparison_oracle(1.0, 1.0, 1.5, 1.0), Err(Error::Domain(_))));
        // Start-independent form.
        assert!((comparison_oracle(f64::INFINITY, 0.5, 4.0, 10.0).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn implicit_factor_matches_scalar_recursion() {
        // u' = -(λ/2) u under backward Euler: u_k = u_0 (1 + hλ/2)^{-k}.
        let (lambda, dt) = (6.0, 0.05);
        let mut u: f64 = 1.0;
        for _ in 0..40 {
            u /= 1.0 + 0.5 * lambda * dt;
        }
        assert!((implicit_contraction_factor(lambda, dt, 2.0) / (u * u) - 1.0).abs() < 1e-12);
        let fine = implicit_contraction_factor(lambda, 1e-7, 2.0);
        assert!((fine / (-lambda * 2.0f64).exp() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn oracle_matches_rk4() {
        let (lambda, beta, h0) = (2.0, 4.0, 1.0);
        let f = |h: f64| -lambda * h.powf(beta / 2.0);
        let mut h = h0;
        let dt = 1e-3;
        for _ in 0..1000 {
            let k1 = f(h);
            let k2 = f(h + 0.5 * dt * k1);
            let k3 = f(h + 0.5 * dt * k2);
            let k4 = f(h + dt * k3);
            h += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert!((h - comparison_oracle(h0, lambda, beta, 1.0).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn exp_weights_are_exact_for_linear_integrands() {
        let (c, a, b) = (0.7, -2.0, -1.5);
        let (wa, wb) = exp_trapezoid_weights(c, a, b);
        // ∫ e^{cr} (1 + r) dr by antiderivative e^{cr}((1 + r)/c − 1/c²).
        let anti = |r: f64| (c * r).exp() * ((1.0 + r) / c - 1.0 / (c * c));
        assert!((wa * (1.0 + a) + wb * (1.0 + b) - (anti(b) - anti(a))).abs() < 1e-14);
        let (sa, sb) = exp_trapezoid_weights(1e-9, 0.0, 1.0);
        assert!((sa - 0.5).abs() < 1e-8 && (sb - 0.5).abs() < 1e-8);
    }

    #[test]
    fn singleton_bundle_has_zero_diameter() {
        let g = SpatialGrid::unit(8).unwrap();
        let drift = DriftSpec::new(DriftFamily::Rde { p: 2.0, eta: 0.0 }, &g).unwrap();
        let triple = drift.natural_triple();
        let noise = gen_path(&NoiseSpec::qwiener(ModeWeights::default_law(), g), -2.0, 0.0, 0.01, 1).unwrap();
        let res = pullback_run(&drift, &triple, &noise, &[g.sine_mode(1)], &[-0.5, -1.0, -2.0], 0.0, &SolverConfig::with_dt(0.01).unwrap()).unwrap();
        assert!(res.diameters.iter().all(|d| *d == 0.0));
        assert!(res.fitted_rate.is_none());
        assert_eq!(res.s_list, vec![-0.5, -1.0, -2.0]);
    }

    #[test]
    fn pullback_rejects_bad_input() {
        let g = SpatialGrid::unit(8).unwrap();
        let drift = DriftSpec::new(DriftFamily::Rde { p: 2.0, eta: 0.0 }, &g).unwrap();
        let triple = drift.natural_triple();
        let noise = gen_path(&NoiseSpec::zero(g), -2.0, 0.0, 0.01, 1).unwrap();
        let cfg = SolverConfig::with_dt(0.01).unwrap();
        assert!(matches!(pullback_run(&drift, &triple, &noise, &[], &[-1.0], 0.0, &cfg), Err(Error::Config(_))));
        assert!(matches!(
            pullback_run(&drift, &triple, &noise, &[g.sine_mode(1)], &[-3.0], 0.0, &cfg),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn r1_zero_noise_closed_form() {
        let g = SpatialGrid::unit(8).unwrap();
        let noise = gen_path(&NoiseSpec::zero(g), -40.0, 0.0, 0.01, 0).unwrap();
        let rc = RadiusConstants { lambda: 1.0, k: 0.0, c: 1.0, alpha: 2.0 };
        let est = absorbing_radius_r1(&noise, &TripleSpec::rde(), &rc, None).unwrap();
        assert!((est.value_sq - 4.0).abs() < 1e-6, "{est:?}");
        assert!((est.value - 2.0).abs() < 1e-6);
        let scaled = noise.scaled(0.0);
        let again = absorbing_radius_r1(&scaled, &TripleSpec::rde(), &rc, None).unwrap();
        assert_eq!(again.value_sq, est.value_sq);
        assert!(matches!(
            absorbing_radius_r1(&noise, &TripleSpec::rde(), &rc, Some(-60.0)),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn fixed_point_of_zero_noise_is_origin() {
        let g = SpatialGrid::unit(16).unwrap();
        let drift = DriftSpec::new(DriftFamily::Rde { p: 2.0, eta: 0.0 }, &g).unwrap();
        let triple = drift.natural_triple();
        let noise = gen_path(&NoiseSpec::zero(g), -5.0, 1.0, 0.01, 0).unwrap();
        let cfg = SolverConfig::with_dt(0.01).unwrap();
        let x0 = g.sine_mode(1);
        let r = random_fixed_point_check(&drift, &triple, &noise, &x0, 1.0, -4.0, &cfg).unwrap();
        assert!(r <= 1e-8);
        let r0 = random_fixed_point_check(&drift, &triple, &noise, &x0, 0.0, -4.0, &cfg).unwrap();
        assert_eq!(r0, 0.0);
    }

    #[test]
    fn r2_needs_samples() {
        let g = SpatialGrid::unit(8).unwrap();
        let drift = DriftSpec::new(DriftFamily::Rde { p: 2.0, eta: 0.0 }, &g).unwrap();
        let noise = gen_path(&NoiseSpec::zero(g), -4.0, 0.0, 0.01, 0).unwrap();
        let cfg = SolverConfig::with_dt(0.01).unwrap();
        assert!(absorbing_radius_r2(&drift, &drift.natural_triple(), &noise, &[], &[-2.0], &cfg).is_err());
    }

    #[test]
    fn exponential_fit_skipped_for_identical_pair() {
        let g = SpatialGrid::unit(8).unwrap();
        let drift = DriftSpec::new(DriftFamily::Rde { p: 2.0, eta: 0.0 }, &g).unwrap();
        let triple = drift.natural_triple();
        let noise = gen_path(&NoiseSpec::zero(g), -4.0, 1.0, 0.01, 0).unwrap();
        let cfg = SolverConfig::with_dt(0.01).unwrap();
        let x = g.sine_mode(1);
        let rep = verify_exponential_bound(&drift, &triple, &noise, &x, &x, 1.0, 0.0, 0.0, &[0.1, 0.2, 0.3], &cfg).unwrap();
        assert!(rep.fit_skipped);
        assert!(rep.dist_sq.iter().all(|d| *d == 0.0));
        assert!(rep.k_eta.is_finite() && rep.k_eta > 0.0);
    }
}
