//! Scalar fractional Brownian motion on a uniform grid.
//!
//! Fractional Gaussian noise is drawn by circulant embedding (Davies–Harte)
//! and summed; when the embedding is not positive semidefinite a Cholesky
//! factorization of the increment covariance is used instead.

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Largest step count accepted by the Cholesky fallback.
pub const CHOLESKY_MAX_STEPS: usize = 2048;

/// `Cov(b(t_{i+k}) − b(t_{i+k-1}), b(t_i) − b(t_{i-1}))` for step `dt`.
pub fn fgn_covariance(hurst: f64, dt: f64, lag: usize) -> f64 {
    let two_h = 2.0 * hurst;
    let k = lag as f64;
    let term = |x: f64| x.abs().powf(two_h);
    0.5 * dt.powf(two_h) * (term(k + 1.0) - 2.0 * term(k) + term(k - 1.0))
}

/// `½(t^{2H} + s^{2H} − |t − s|^{2H})`.
pub fn fbm_covariance(hurst: f64, t: f64, s: f64) -> f64 {
    let two_h = 2.0 * hurst;
    0.5 * (t.abs().powf(two_h) + s.abs().powf(two_h) - (t - s).abs().powf(two_h))
}

/// Eigenvalues of the circulant of size `2m` embedding the first `m + 1`
/// increment autocovariances.
pub fn circulant_eigenvalues(hurst: f64, dt: f64, m: usize) -> Vec<f64> {
    let size = 2 * m;
    let mut row: Vec<Complex<f64>> = (0..size)
        .map(|j| {
            let lag = if j <= m { j } else { size - j };
            Complex::new(fgn_covariance(hurst, dt, lag), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(size).process(&mut row);
    row.into_iter().map(|c| c.re).collect()
}

/// Davies–Harte draw of `b(0), b(dt), …, b(m dt)`; `None` when the embedding
/// has a significantly negative eigenvalue.
pub fn fbm_davies_harte<R: Rng + ?Sized>(hurst: f64, dt: f64, m: usize, rng: &mut R) -> Option<Vec<f64>> {
    if m == 0 {
        return Some(vec![0.0]);
    }
    let size = 2 * m;
    let eig = circulant_eigenvalues(hurst, dt, m);
    let top = eig.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if eig.iter().any(|&l| l < -1e-10 * top) {
        return None;
    }
    let scale = |l: f64, d: f64| (l.max(0.0) / d).sqrt();
    let mut v = vec![Complex::new(0.0, 0.0); size];
    let n = size as f64;
    v[0] = Complex::new(scale(eig[0], n) * rng.sample::<f64, _>(StandardNormal), 0.0);
    v[m] = Complex::new(scale(eig[m], n) * rng.sample::<f64, _>(StandardNormal), 0.0);
    for j in 1..m {
        let s = scale(eig[j], 2.0 * n);
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        v[j] = Complex::new(s * re, s * im);
        v[size - j] = v[j].conj();
    }
    FftPlanner::new().plan_fft_forward(size).process(&mut v);
    Some(cumulative(v[..m].iter().map(|c| c.re)))
}

/// Cholesky draw of the same law; exact but cubic in `m`.
pub fn fbm_cholesky<R: Rng + ?Sized>(hurst: f64, dt: f64, m: usize, rng: &mut R) -> Result<Vec<f64>> {
    if m > CHOLESKY_MAX_STEPS {
        return Err(Error::Config(format!(
            "Cholesky fallback limited to {CHOLESKY_MAX_STEPS} steps, got {m}"
        )));
    }
    let mut l = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = fgn_covariance(hurst, dt, i - j);
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::Internal(format!(
                        "increment covariance not positive definite at row {i}"
                    )));
                }
                l[i * m + i] = s.sqrt();
            } else {
                l[i * m + j] = s / l[j * m + j];
            }
        }
    }
    let z: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
    let increments = (0..m).map(|i| (0..=i).map(|k| l[i * m + k] * z[k]).sum::<f64>());
    Ok(cumulative(increments))
}

/// Path `b(0..=m)` and whether the Cholesky fallback was used.
pub fn fbm_path<R: Rng + ?Sized>(hurst: f64, dt: f64, m: usize, rng: &mut R) -> Result<(Vec<f64>, bool)> {
    match fbm_davies_harte(hurst, dt, m, rng) {
        Some(path) => Ok((path, false)),
        None => Ok((fbm_cholesky(hurst, dt, m, rng)?, true)),
    }
}

fn cumulative<I: Iterator<Item = f64>>(increments: I) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut acc = 0.0;
    for x in increments {
        acc += x;
        out.push(acc);
    }
    out
}
