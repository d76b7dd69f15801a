//! Two-sided noise paths with stationary increments.
//!
//! A path is stored on the integer time grid `t_i = i * dt` anchored at zero,
//! with `N_0 = 0`. Spatial structure comes from the sine modes
//! `e_k = sqrt(2/L) sin(kπx/L)`; a Gaussian noise is `Σ_k sqrt(λ_k) b_k(t) e_k`
//! with independent scalar processes `b_k`.

pub mod fbm;
pub mod io;
pub mod validate;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::field_space::{Field, SpatialGrid};
use crate::rng::{derive_seed, stream};

pub use io::{read_path, write_path};
pub use validate::{
    check_growth, check_stationary_increments, holder_seminorm, moment_scaling_fit, GrowthReport,
    MomentFit, StationarityReport,
};

/// Relative tolerance for "t lies on the time grid".
pub const GRID_TOLERANCE: f64 = 1e-9;

/// Smallest decay exponent accepted for mode weights.
pub const MIN_WEIGHT_DECAY: f64 = 6.0;

/// Spectral weights `λ_1, …, λ_K` of a trace-class covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeWeights {
    weights: Vec<f64>,
}

impl ModeWeights {
    /// Validates `λ_k ≥ 0` and the decay envelope `λ_k ≤ (max_j λ_j) k^{-6}`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(k) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config(format!(
                "mode weight {} must be finite and nonnegative, got {}",
                k + 1,
                weights[k]
            )));
        }
        let top = weights.iter().cloned().fold(0.0, f64::max);
        for (i, w) in weights.iter().enumerate() {
            let k = (i + 1) as f64;
            if *w > top * k.powf(-MIN_WEIGHT_DECAY) * (1.0 + 1e-12) {
                return Err(Error::Config(format!(
                    "mode weight {} = {w} decays slower than k^-{MIN_WEIGHT_DECAY}",
                    i + 1
                )));
            }
        }
        Ok(Self { weights })
    }

    /// `λ_k = c k^{-q}` for `k = 1..=modes`.
    pub fn power_law(c: f64, q: f64, modes: usize) -> Result<Self> {
        if !(q >= MIN_WEIGHT_DECAY) {
            return Err(Error::Config(format!(
                "weight decay exponent must be at least {MIN_WEIGHT_DECAY}, got {q}"
            )));
        }
        Self::new((1..=modes).map(|k| c * (k as f64).powf(-q)).collect())
    }

    /// `λ_k = k^{-8}`, eight modes.
    pub fn default_law() -> Self {
        Self::power_law(1.0, 8.0, 8).expect("default weights are valid")
    }

    pub fn empty() -> Self {
        Self { weights: Vec::new() }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Law of the jump amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AmplitudeLaw {
    Constant(f64),
    Normal { mean: f64, std: f64 },
    Uniform { low: f64, high: f64 },
}

impl AmplitudeLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            AmplitudeLaw::Constant(a) => a,
            AmplitudeLaw::Normal { mean, .. } => mean,
            AmplitudeLaw::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            AmplitudeLaw::Constant(a) => a.is_finite(),
            AmplitudeLaw::Normal { mean, std } => mean.is_finite() && std.is_finite() && std >= 0.0,
            AmplitudeLaw::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid jump amplitude law {self:?}")))
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            AmplitudeLaw::Constant(a) => a,
            AmplitudeLaw::Normal { mean, std } => {
                Normal::new(mean, std).expect("validated").sample(rng)
            }
            AmplitudeLaw::Uniform { low, high } => rng.random_range(low..high),
        }
    }
}

/// Jumps of size `amplitude * e_mode`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpLaw {
    pub mode: usize,
    pub amplitude: AmplitudeLaw,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    Zero,
    QWiener { weights: ModeWeights },
    Fbm { hurst: f64, weights: ModeWeights },
    /// Drift `Σ_k drift_modes[k-1] e_k`, a Q-Wiener part, and compound
    /// Poisson jumps with rate `jump_rate`.
    Levy {
        drift_modes: Vec<f64>,
        weights: ModeWeights,
        jump_rate: f64,
        jump: JumpLaw,
    },
}

impl NoiseKind {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseKind::Zero => "zero",
            NoiseKind::QWiener { .. } => "qwiener",
            NoiseKind::Fbm { .. } => "fbm",
            NoiseKind::Levy { .. } => "levy",
        }
    }

    /// Number of spatial modes involved.
    pub fn modes(&self) -> usize {
        match self {
            NoiseKind::Zero => 0,
            NoiseKind::QWiener { weights } | NoiseKind::Fbm { weights, .. } => weights.len(),
            NoiseKind::Levy { drift_modes, weights, jump, .. } => {
                drift_modes.len().max(weights.len()).max(jump.mode)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    kind: NoiseKind,
    grid: SpatialGrid,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, grid: SpatialGrid) -> Result<Self> {
        match &kind {
            NoiseKind::Zero | NoiseKind::QWiener { .. } => {}
            NoiseKind::Fbm { hurst, .. } => {
                if !(*hurst > 0.0 && *hurst < 1.0) {
                    return Err(Error::Config(format!("Hurst parameter must lie in (0, 1), got {hurst}")));
                }
            }
            NoiseKind::Levy { drift_modes, jump_rate, jump, .. } => {
                if drift_modes.iter().any(|m| !m.is_finite()) {
                    return Err(Error::Config("Levy drift coefficients must be finite".into()));
                }
                if !(jump_rate.is_finite() && *jump_rate >= 0.0) {
                    return Err(Error::Config(format!(
                        "jump rate must be finite and nonnegative, got {jump_rate}"
                    )));
                }
                if *jump_rate > 0.0 && jump.mode == 0 {
                    return Err(Error::Config("jump mode index starts at 1".into()));
                }
                jump.amplitude.validate()?;
            }
        }
        Ok(Self { kind, grid })
    }

    pub fn zero(grid: SpatialGrid) -> Self {
        Self { kind: NoiseKind::Zero, grid }
    }

    pub fn qwiener(weights: ModeWeights, grid: SpatialGrid) -> Self {
        Self { kind: NoiseKind::QWiener { weights }, grid }
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    /// Expected value of `N_1`: `m + ρ E[amplitude] e_mode` (zero for the
    /// Gaussian kinds).
    pub fn mean_rate(&self) -> Field {
        match &self.kind {
            NoiseKind::Levy { drift_modes, jump_rate, jump, .. } => {
                let mut f = mode_combination(&self.grid, drift_modes);
                if *jump_rate > 0.0 {
                    let e = self.grid.sine_mode(jump.mode);
                    f = f
                        .axpy(jump_rate * jump.amplitude.mean(), &e)
                        .expect("same grid");
                }
                f
            }
            _ => Field::zeros(self.grid),
        }
    }
}

/// `Σ_k c[k-1] e_k`.
pub fn mode_combination(grid: &SpatialGrid, coefficients: &[f64]) -> Field {
    let mut values = vec![0.0; grid.n_interior()];
    for (i, &c) in coefficients.iter().enumerate() {
        if c != 0.0 {
            let e = grid.sine_mode(i + 1);
            for (v, ei) in values.iter_mut().zip(e.values()) {
                *v += c * ei;
            }
        }
    }
    Field::from_raw(*grid, values)
}

/// Realized path on `t_i = (first_index + i) * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    spec: NoiseSpec,
    seed: u64,
    dt: f64,
    first_index: i64,
    snapshots: Vec<Field>,
    cholesky_fallback: bool,
}

/// Nearest grid index of `t`, or an alignment error.
pub fn grid_index(t: f64, dt: f64) -> Result<i64> {
    let x = t / dt;
    let k = x.round();
    if (x - k).abs() > GRID_TOLERANCE * k.abs().max(1.0) {
        return Err(Error::Alignment(format!("time {t} is not a multiple of dt = {dt}")));
    }
    Ok(k as i64)
}

impl NoisePath {
    /// Assembles a path from stored snapshots (used by readers and tests).
    pub fn from_snapshots(
        spec: NoiseSpec,
        seed: u64,
        dt: f64,
        first_index: i64,
        snapshots: Vec<Field>,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        if snapshots.is_empty() {
            return Err(Error::Config("a path needs at least one snapshot".into()));
        }
        for s in &snapshots {
            if s.grid() != spec.grid() {
                return Err(Error::GridMismatch);
            }
            s.check_finite()?;
        }
        Ok(Self {
            spec,
            seed,
            dt,
            first_index,
            snapshots,
            cholesky_fallback: false,
        })
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn first_index(&self) -> i64 {
        self.first_index
    }

    pub fn last_index(&self) -> i64 {
        self.first_index + self.snapshots.len() as i64 - 1
    }

    pub fn t_start(&self) -> f64 {
        self.first_index as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.last_index() as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn snapshots(&self) -> &[Field] {
        &self.snapshots
    }

    pub fn used_cholesky_fallback(&self) -> bool {
        self.cholesky_fallback
    }

    pub fn time(&self, i: usize) -> f64 {
        (self.first_index + i as i64) as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// Storage position of grid time `t`.
    pub fn position(&self, t: f64) -> Result<usize> {
        let k = grid_index(t, self.dt)?;
        if k < self.first_index || k > self.last_index() {
            return Err(Error::Range(format!(
                "time {t} outside the noise window [{}, {}]",
                self.t_start(),
                self.t_end()
            )));
        }
        Ok((k - self.first_index) as usize)
    }

    pub fn at(&self, t: f64) -> Result<&Field> {
        Ok(&self.snapshots[self.position(t)?])
    }

    /// Snapshot at global grid index `k`.
    pub fn at_index(&self, k: i64) -> Result<&Field> {
        if k < self.first_index || k > self.last_index() {
            return Err(Error::Range(format!("grid index {k} outside the noise window")));
        }
        Ok(&self.snapshots[(k - self.first_index) as usize])
    }

    /// The path restricted to `[t0, t1]`.
    pub fn restrict(&self, t0: f64, t1: f64) -> Result<NoisePath> {
        let (a, b) = (self.position(t0)?, self.position(t1)?);
        if a > b {
            return Err(Error::Range(format!("empty window [{t0}, {t1}]")));
        }
        Ok(NoisePath {
            first_index: self.first_index + a as i64,
            snapshots: self.snapshots[a..=b].to_vec(),
            ..self.clone()
        })
    }

    /// `c * N`.
    pub fn scaled(&self, c: f64) -> NoisePath {
        NoisePath {
            snapshots: self.snapshots.iter().map(|f| f.scaled(c)).collect(),
            ..self.clone()
        }
    }

    /// `N + f` with a time-constant field `f`.
    pub fn plus_constant(&self, f: &Field) -> Result<NoisePath> {
        let snapshots = self
            .snapshots
            .iter()
            .map(|s| s.axpy(1.0, f))
            .collect::<Result<Vec<_>>>()?;
        Ok(NoisePath { snapshots, ..self.clone() })
    }

    /// Integrated regularity `Σ dt ‖N_t‖^α` for a given norm.
    pub fn integrated_power<F: Fn(&Field) -> Result<f64>>(&self, alpha: f64, norm: F) -> Result<f64> {
        let mut total = 0.0;
        for s in &self.snapshots {
            total += self.dt * norm(s)?.powf(alpha);
        }
        Ok(total)
    }
}

/// Generates the path of `spec` on `[t_start, t_end]` with step `dt`.
///
/// Both endpoints must lie on the grid `dt * Z`. The forward side (`t ≥ 0`)
/// and the backward side (`t ≤ 0`) are independent one-sided processes glued
/// at `N_0 = 0`; the backward side is `N_{-u} = -L̃_u` for an independent
/// copy `L̃`.
pub fn gen_path(spec: &NoiseSpec, t_start: f64, t_end: f64, dt: f64, seed: u64) -> Result<NoisePath> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    if !(t_start < t_end) {
        return Err(Error::Config(format!("empty time window [{t_start}, {t_end}]")));
    }
    let i0 = grid_index(t_start, dt).map_err(|e| Error::Config(e.to_string()))?;
    let i1 = grid_index(t_end, dt).map_err(|e| Error::Config(e.to_string()))?;
    let forward_steps = i1.max(0) as usize;
    let backward_steps = (-i0).max(0) as usize;
    let (forward, fb1) = one_sided(spec, dt, forward_steps, derive_seed(seed, 0))?;
    let (backward, fb2) = one_sided(spec, dt, backward_steps, derive_seed(seed, 1))?;
    let grid = *spec.grid();
    let snapshots = (i0..=i1)
        .map(|k| {
            if k >= 0 {
                Field::from_raw(grid, forward[k as usize].clone())
            } else {
                Field::from_raw(grid, backward[(-k) as usize].iter().map(|v| -v).collect())
            }
        })
        .collect();
    Ok(NoisePath {
        spec: spec.clone(),
        seed,
        dt,
        first_index: i0,
        snapshots,
        cholesky_fallback: fb1 || fb2,
    })
}

/// One-sided process at `0, dt, …, steps·dt` as nodal value vectors.
fn one_sided(spec: &NoiseSpec, dt: f64, steps: usize, seed: u64) -> Result<(Vec<Vec<f64>>, bool)> {
    let grid = spec.grid();
    let n = grid.n_interior();
    let mut out = vec![vec![0.0; n]; steps + 1];
    if steps == 0 {
        return Ok((out, false));
    }
    let add_mode = |out: &mut Vec<Vec<f64>>, k: usize, scalar: &[f64]| {
        let e = grid.sine_mode(k);
        for (row, &b) in out.iter_mut().zip(scalar) {
            if b != 0.0 {
                for (v, ei) in row.iter_mut().zip(e.values()) {
                    *v += b * ei;
                }
            }
        }
    };
    let mut fallback = false;
    match spec.kind() {
        NoiseKind::Zero => {}
        NoiseKind::QWiener { weights } => {
            for (i, &w) in weights.weights().iter().enumerate() {
                let b = brownian(dt, steps, &mut stream(seed, i as u64 + 1));
                add_mode(&mut out, i + 1, &scale(&b, w.sqrt()));
            }
        }
        NoiseKind::Fbm { hurst, weights } => {
            for (i, &w) in weights.weights().iter().enumerate() {
                let (b, fb) = fbm::fbm_path(*hurst, dt, steps, &mut stream(seed, i as u64 + 1))?;
                fallback |= fb;
                add_mode(&mut out, i + 1, &scale(&b, w.sqrt()));
            }
        }
        NoiseKind::Levy { drift_modes, weights, jump_rate, jump } => {
            for (i, &c) in drift_modes.iter().enumerate() {
                let line: Vec<f64> = (0..=steps).map(|j| c * j as f64 * dt).collect();
                add_mode(&mut out, i + 1, &line);
            }
            for (i, &w) in weights.weights().iter().enumerate() {
                let b = brownian(dt, steps, &mut stream(seed, i as u64 + 1));
                add_mode(&mut out, i + 1, &scale(&b, w.sqrt()));
            }
            if *jump_rate > 0.0 {
                let jumps = compound_poisson(*jump_rate, &jump.amplitude, dt, steps, &mut stream(seed, u64::MAX));
                add_mode(&mut out, jump.mode, &jumps);
            }
        }
    }
    Ok((out, fallback))
}

fn scale(xs: &[f64], c: f64) -> Vec<f64> {
    xs.iter().map(|x| c * x).collect()
}

/// Standard Brownian motion at `0, dt, …, steps·dt`.
pub fn brownian<R: Rng + ?Sized>(dt: f64, steps: usize, rng: &mut R) -> Vec<f64> {
    let sd = dt.sqrt();
    let mut out = Vec::with_capacity(steps + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for _ in 0..steps {
        let z: f64 = rng.sample(StandardNormal);
        acc += sd * z;
        out.push(acc);
    }
    out
}

/// Sum of jump amplitudes up to each grid time (right-continuous).
pub fn compound_poisson<R: Rng + ?Sized>(
    rate: f64,
    amplitude: &AmplitudeLaw,
    dt: f64,
    steps: usize,
    rng: &mut R,
) -> Vec<f64> {
    let horizon = steps as f64 * dt;
    let exp = Exp::new(rate).expect("positive rate");
    let mut out = vec![0.0; steps + 1];
    let mut t = exp.sample(rng);
    let mut acc = 0.0;
    let mut filled = 0usize;
    while t <= horizon {
        let idx = ((t / dt).ceil() as usize).min(steps);
        for slot in out.iter_mut().take(idx).skip(filled) {
            *slot = acc;
        }
        filled = filled.max(idx);
        acc += amplitude.sample(rng);
        t += exp.sample(rng);
    }
    for slot in out.iter_mut().skip(filled) {
        *slot = acc;
    }
    out
}

/// `θ_τ N`: the path `s ↦ N(s + τ) − N(τ)` on the shifted window.
pub fn wiener_shift(path: &NoisePath, tau: f64) -> Result<NoisePath> {
    let k = grid_index(tau, path.dt)?;
    if k < path.first_index || k > path.last_index() {
        return Err(Error::Range(format!(
            "shift {tau} leaves the window [{}, {}]",
            path.t_start(),
            path.t_end()
        )));
    }
    let anchor = path.snapshots[(k - path.first_index) as usize].clone();
    let snapshots = path
        .snapshots
        .iter()
        .map(|s| s.axpy(-1.0, &anchor))
        .collect::<Result<Vec<_>>>()?;
    Ok(NoisePath {
        first_index: path.first_index - k,
        snapshots,
        ..path.clone()
    })
}
