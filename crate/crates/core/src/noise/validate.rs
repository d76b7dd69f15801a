//! Statistical checks of generated noise: stationarity of increments,
//! growth at large times, moment scaling, and Hölder seminorms.

use rayon::prelude::*;

use super::{gen_path, grid_index, NoiseKind, NoisePath, NoiseSpec};
use crate::error::{Error, Result};
use crate::field_space::{dual_pairing, norm_v, Field, TripleSpec};
use crate::rng::derive_seed;
use crate::stats::linear_fit;

/// Sums of `x^1 … x^8` for one scalar sample.
#[derive(Debug, Clone, Copy, Default)]
struct Sums8 {
    count: f64,
    s: [f64; 8],
}

impl Sums8 {
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let mut p = 1.0;
        for slot in self.s.iter_mut() {
            p *= x;
            *slot += p;
        }
    }

    fn add(&mut self, other: &Sums8) {
        self.count += other.count;
        for (a, b) in self.s.iter_mut().zip(&other.s) {
            *a += b;
        }
    }

    fn raw(&self, k: usize) -> f64 {
        self.s[k - 1] / self.count
    }

    /// Sample raw moment of order `k` and its standard error.
    fn moment_with_error(&self, k: usize) -> (f64, f64) {
        let m = self.raw(k);
        let var = (self.raw(2 * k) - m * m).max(0.0);
        (m, (var / self.count).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationarityReport {
    pub windows: usize,
    pub samples: usize,
    /// Largest standardized discrepancy over mean, second and fourth moments
    /// and over all windows compared with the first.
    pub max_discrepancy: f64,
    pub mean_discrepancy: f64,
    pub variance_discrepancy: f64,
    pub fourth_discrepancy: f64,
    /// Mean and variance of the pooled increment functional.
    pub pooled_mean: f64,
    pub pooled_variance: f64,
}

fn standardized(a: (f64, f64), b: (f64, f64)) -> f64 {
    let diff = (a.0 - b.0).abs();
    let se = (a.1 * a.1 + b.1 * b.1).sqrt();
    let floor = 1e-12 * (1.0 + a.0.abs().max(b.0.abs()));
    if diff <= floor {
        0.0
    } else if se == 0.0 {
        f64::INFINITY
    } else {
        diff / se
    }
}

/// Compares moments of `⟨N_{t+lag} − N_t, Σ_k e_k⟩` across `window_count`
/// disjoint forward windows, over `samples` independent paths.
pub fn check_stationary_increments(
    spec: &NoiseSpec,
    lag: f64,
    window_count: usize,
    samples: usize,
    seed: u64,
) -> Result<StationarityReport> {
    if window_count < 2 || samples < 2 {
        return Err(Error::Config("need at least two windows and two samples".into()));
    }
    if !(lag > 0.0) {
        return Err(Error::Config(format!("lag must be positive, got {lag}")));
    }
    let grid = *spec.grid();
    let probe = super::mode_combination(&grid, &vec![1.0; spec.kind().modes().max(1)]);
    let horizon = lag * window_count as f64;
    let per_sample: Vec<Result<Vec<f64>>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let path = gen_path(spec, 0.0, horizon, lag, derive_seed(seed, i as u64))?;
            (0..window_count)
                .map(|w| {
                    let inc = path.snapshots()[w + 1].axpy(-1.0, &path.snapshots()[w])?;
                    dual_pairing(&inc, &probe)
                })
                .collect()
        })
        .collect();
    let mut sums = vec![Sums8::default(); window_count];
    let mut pooled = Sums8::default();
    for row in per_sample {
        for (w, x) in row?.into_iter().enumerate() {
            sums[w].push(x);
            pooled.push(x);
        }
    }
    let mut disc = [0.0f64; 3];
    for w in 1..window_count {
        for (j, k) in [1usize, 2, 4].into_iter().enumerate() {
            let d = standardized(sums[0].moment_with_error(k), sums[w].moment_with_error(k));
            disc[j] = disc[j].max(d);
        }
    }
    let mut total = Sums8::default();
    for s in &sums {
        total.add(s);
    }
    let mean = total.raw(1);
    Ok(StationarityReport {
        windows: window_count,
        samples,
        max_discrepancy: disc.iter().cloned().fold(0.0, f64::max),
        mean_discrepancy: disc[0],
        variance_discrepancy: disc[1],
        fourth_discrepancy: disc[2],
        pooled_mean: pooled.raw(1),
        pooled_variance: (total.raw(2) - mean * mean).max(0.0),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    /// `max_t ‖N_t‖_V / (1 + t²)`.
    pub max_quadratic_ratio: f64,
    /// `‖N_T‖_V / |T|` at the endpoint of largest `|T|`.
    pub terminal_ratio: f64,
    /// `‖N_T‖_V / T²` at the same endpoint.
    pub terminal_quadratic_ratio: f64,
    pub terminal_time: f64,
    /// Relative `L²` error of `N_T / T` against `m + ρ E[jump]` (Lévy only).
    pub levy_relative_error: Option<f64>,
}

/// Growth diagnostics of a path covering `|t| ≥ 100`.
pub fn check_growth(path: &NoisePath, triple: &TripleSpec) -> Result<GrowthReport> {
    let reach = path.t_start().abs().max(path.t_end().abs());
    if reach < 100.0 {
        return Err(Error::Range(format!("growth check needs |t| >= 100, path reaches {reach}")));
    }
    let mut max_ratio: f64 = 0.0;
    for (i, s) in path.snapshots().iter().enumerate() {
        let t = path.time(i);
        max_ratio = max_ratio.max(norm_v(s, triple)? / (1.0 + t * t));
    }
    let terminal_time = if path.t_end().abs() >= path.t_start().abs() {
        path.t_end()
    } else {
        path.t_start()
    };
    let terminal = path.at(terminal_time)?;
    let tv = norm_v(terminal, triple)?;
    let levy_relative_error = match path.spec().kind() {
        NoiseKind::Levy { .. } => {
            let expected = path.spec().mean_rate();
            let observed = terminal.scaled(1.0 / terminal_time);
            let err = observed.axpy(-1.0, &expected)?.lp_norm(2.0);
            let scale = expected.lp_norm(2.0);
            Some(if scale > 0.0 { err / scale } else { err })
        }
        _ => None,
    };
    Ok(GrowthReport {
        max_quadratic_ratio: max_ratio,
        terminal_ratio: tv / terminal_time.abs(),
        terminal_quadratic_ratio: tv / (terminal_time * terminal_time),
        terminal_time,
        levy_relative_error,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentFit {
    pub slope: f64,
    pub intercept: f64,
    /// `(lag, E‖N_lag − N_0‖_V^γ)` pairs.
    pub moments: Vec<(f64, f64)>,
}

/// Least-squares slope of `log E‖N_{lag} − N_0‖_V^γ` against `log lag`.
///
/// Paths are generated with step equal to the smallest lag, which must divide
/// every other lag.
pub fn moment_scaling_fit(
    spec: &NoiseSpec,
    triple: &TripleSpec,
    gamma: f64,
    lags: &[f64],
    samples: usize,
    seed: u64,
) -> Result<MomentFit> {
    let mut sorted: Vec<f64> = lags.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    sorted.dedup();
    if sorted.len() < 4 {
        return Err(Error::Config(format!("need at least 4 distinct lags, got {}", sorted.len())));
    }
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if !(lo > 0.0) || hi / lo < 10.0 - 1e-9 {
        return Err(Error::Config("lags must be positive and span a decade".into()));
    }
    if samples == 0 {
        return Err(Error::Config("need at least one sample".into()));
    }
    let steps: Vec<usize> = sorted
        .iter()
        .map(|&l| grid_index(l, lo).map(|k| k as usize).map_err(|e| Error::Config(e.to_string())))
        .collect::<Result<_>>()?;
    let per_sample: Vec<Result<Vec<f64>>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let path = gen_path(spec, 0.0, hi, lo, derive_seed(seed, i as u64))?;
            steps
                .iter()
                .map(|&k| Ok(norm_v(&path.snapshots()[k], triple)?.powf(gamma)))
                .collect()
        })
        .collect();
    let mut acc = vec![0.0; sorted.len()];
    for row in per_sample {
        for (a, x) in acc.iter_mut().zip(row?) {
            *a += x;
        }
    }
    let moments: Vec<(f64, f64)> = sorted
        .iter()
        .zip(&acc)
        .map(|(&l, &s)| (l, s / samples as f64))
        .collect();
    let xs: Vec<f64> = moments.iter().map(|m| m.0.ln()).collect();
    let ys: Vec<f64> = moments.iter().map(|m| m.1.ln()).collect();
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::Domain("moment vanished; the slope is undefined".into()));
    }
    let (slope, intercept) = linear_fit(&xs, &ys).ok_or_else(|| Error::Internal("degenerate fit".into()))?;
    Ok(MomentFit { slope, intercept, moments })
}

/// `max ‖N_u − N_v‖_V / |u − v|^b` over grid pairs in `[s0, t0]`.
pub fn holder_seminorm(path: &NoisePath, triple: &TripleSpec, b: f64, s0: f64, t0: f64) -> Result<f64> {
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::Config(format!("Hölder exponent must lie in (0, 1), got {b}")));
    }
    let (i, j) = (path.position(s0)?, path.position(t0)?);
    if i > j {
        return Err(Error::Range(format!("empty window [{s0}, {t0}]")));
    }
    let snaps: &[Field] = &path.snapshots()[i..=j];
    let mut best: f64 = 0.0;
    for a in 0..snaps.len() {
        for c in a + 1..snaps.len() {
            let d = snaps[c].axpy(-1.0, &snaps[a])?;
            let gap = (c - a) as f64 * path.dt();
            best = best.max(norm_v(&d, triple)? / gap.powf(b));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::super::{AmplitudeLaw, JumpLaw, ModeWeights};
    use super::*;
    use crate::field_space::SpatialGrid;

    fn grid() -> SpatialGrid {
        SpatialGrid::unit(16).unwrap()
    }

    #[test]
    fn zero_noise_has_zero_discrepancy() {
        let rep = check_stationary_increments(&NoiseSpec::zero(grid()), 0.5, 4, 10, 1).unwrap();
        assert_eq!(rep.max_discrepancy, 0.0);
        assert_eq!(rep.pooled_variance, 0.0);
    }

    #[test]
    fn qwiener_increments_are_stationary() {
        let g = grid();
        let spec = NoiseSpec::qwiener(ModeWeights::default_law(), g);
        let lag = 0.25;
        let rep = check_stationary_increments(&spec, lag, 4, 10_000, 7).unwrap();
        assert!(rep.max_discrepancy < 4.0, "{rep:?}");
        // Exact law: N(0, lag Σ_k λ_k ⟨e_k, Σ_j e_j⟩²) = N(0, lag Σ λ_k).
        let var: f64 = lag * ModeWeights::default_law().weights().iter().sum::<f64>();
        assert!((rep.pooled_variance - var).abs() < 0.05 * var);
    }

    #[test]
    fn drift_only_levy_has_constant_increments() {
        let g = grid();
        let spec = NoiseSpec::new(
            NoiseKind::Levy {
                drift_modes: vec![0.3, 0.0, -0.1],
                weights: ModeWeights::empty(),
                jump_rate: 0.0,
                jump: JumpLaw { mode: 1, amplitude: AmplitudeLaw::Constant(1.0) },
            },
            g,
        )
        .unwrap();
        let lag = 0.5;
        let rep = check_stationary_increments(&spec, lag, 5, 20, 3).unwrap();
        assert_eq!(rep.max_discrepancy, 0.0);
        assert!(rep.pooled_variance < 1e-24);
        // ⟨m, Σ e_k⟩ = 0.3 − 0.1 for orthonormal modes.
        assert!((rep.pooled_mean - lag * 0.2).abs() < 1e-12);
    }

    #[test]
    fn levy_law_of_large_numbers() {
        let g = grid();
        let spec = NoiseSpec::new(
            NoiseKind::Levy {
                drift_modes: vec![0.2],
                weights: ModeWeights::empty(),
                jump_rate: 1.0,
                jump: JumpLaw { mode: 1, amplitude: AmplitudeLaw::Constant(0.1) },
            },
            g,
        )
        .unwrap();
        let path = gen_path(&spec, 0.0, 1000.0, 0.5, 17).unwrap();
        let rep = check_growth(&path, &TripleSpec::rde()).unwrap();
        assert!(rep.levy_relative_error.unwrap() < 0.05, "{rep:?}");
    }

    #[test]
    fn zero_noise_growth_ratios_vanish() {
        let path = gen_path(&NoiseSpec::zero(grid()), -100.0, 0.0, 1.0, 0).unwrap();
        let rep = check_growth(&path, &TripleSpec::rde()).unwrap();
        assert_eq!(rep.max_quadratic_ratio, 0.0);
        assert_eq!(rep.terminal_ratio, 0.0);
        assert_eq!(rep.terminal_time, -100.0);
        let short = gen_path(&NoiseSpec::zero(grid()), 0.0, 10.0, 1.0, 0).unwrap();
        assert!(check_growth(&short, &TripleSpec::rde()).is_err());
    }

    #[test]
    fn brownian_second_moment_is_linear() {
        let spec = NoiseSpec::qwiener(ModeWeights::default_law(), grid());
        let fit = moment_scaling_fit(&spec, &TripleSpec::rde(), 2.0, &[0.1, 0.2, 0.5, 1.0], 4000, 2).unwrap();
        assert!((fit.slope - 1.0).abs() < 0.05, "{fit:?}");
    }

    #[test]
    fn moment_fit_rejects_bad_lags() {
        let spec = NoiseSpec::zero(grid());
        let t = TripleSpec::rde();
        assert!(moment_scaling_fit(&spec, &t, 2.0, &[0.1, 0.2, 0.5], 10, 0).is_err());
        assert!(moment_scaling_fit(&spec, &t, 2.0, &[0.1, 0.2, 0.3, 0.5], 10, 0).is_err());
        assert!(moment_scaling_fit(&spec, &t, 2.0, &[0.1, 0.25, 0.5, 1.0, 0.15], 10, 0).is_err());
    }

    #[test]
    fn holder_of_linear_path() {
        let g = grid();
        let m = g.sine_mode(1);
        let triple = TripleSpec::pme(3.0).unwrap();
        let m = m.scaled(1.0 / norm_v(&m, &triple).unwrap());
        let dt = 0.01;
        let snaps = (0..=100).map(|i| m.scaled(i as f64 * dt)).collect();
        let path = NoisePath::from_snapshots(NoiseSpec::zero(g), 0, dt, 0, snaps).unwrap();
        let h = holder_seminorm(&path, &triple, 0.5, 0.0, 1.0).unwrap();
        assert!((h - 1.0).abs() < 1e-12);
        let z = gen_path(&NoiseSpec::zero(g), 0.0, 1.0, 0.1, 0).unwrap();
        assert_eq!(holder_seminorm(&z, &triple, 0.5, 0.0, 1.0).unwrap(), 0.0);
        assert!(holder_seminorm(&z, &triple, 0.5, 0.0, 2.0).is_err());
    }
}
