//! One-dimensional Dirichlet discretization of `(0, L)` and the norms and
//! pairings of the four Gelfand triples used by the drift families.
//!
//! A [`Field`] stores values at the `n` interior nodes `x_i = i * h`,
//! `h = L / (n + 1)`; boundary values are implicitly zero. Integrals use the
//! weight `h` per node and gradients are forward differences on the `n + 1`
//! edges, so the discrete Dirichlet form is `h * sum_e ((v_{e+1} - v_e) / h)^2`.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;

use crate::error::{Error, Result};
use crate::tridiag::Tridiagonal;

/// Uniform grid on `(0, length)` with `n_interior` unknowns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    n_interior: usize,
    length: f64,
    spacing: f64,
}

impl SpatialGrid {
    pub fn new(n_interior: usize, length: f64) -> Result<Self> {
        if n_interior < 2 {
            return Err(Error::Config(format!(
                "grid needs at least 2 interior nodes, got {n_interior}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Config(format!("domain length must be positive, got {length}")));
        }
        Ok(Self {
            n_interior,
            length,
            spacing: length / (n_interior as f64 + 1.0),
        })
    }

    /// Grid on the unit interval.
    pub fn unit(n_interior: usize) -> Result<Self> {
        Self::new(n_interior, 1.0)
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Total quadrature weight `n * h` (the discrete measure of the domain).
    pub fn measure(&self) -> f64 {
        self.n_interior as f64 * self.spacing
    }

    pub fn node(&self, i: usize) -> f64 {
        (i as f64 + 1.0) * self.spacing
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_interior).map(move |i| self.node(i))
    }

    /// `k`-th eigenvalue of the discrete Dirichlet operator `-Δ_h`,
    /// `4 sin^2(kπh / 2L) / h^2`.
    pub fn dirichlet_eigenvalue(&self, k: usize) -> f64 {
        let h = self.spacing;
        let s = (k as f64 * PI * h / (2.0 * self.length)).sin();
        4.0 * s * s / (h * h)
    }

    pub fn principal_eigenvalue(&self) -> f64 {
        self.dirichlet_eigenvalue(1)
    }

    /// Samples `f` at the interior nodes.
    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Result<Field> {
        Field::new(*self, self.nodes().map(f).collect())
    }

    /// Orthonormal sine mode `e_k(x) = sqrt(2/L) sin(kπx/L)`.
    pub fn sine_mode(&self, k: usize) -> Field {
        let scale = (2.0 / self.length).sqrt();
        let values = self
            .nodes()
            .map(|x| scale * (k as f64 * PI * x / self.length).sin())
            .collect();
        Field::from_raw(*self, values)
    }
}

/// Nodal values of a grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: SpatialGrid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_interior() {
            return Err(Error::Config(format!(
                "field has {} values but the grid has {} interior nodes",
                values.len(),
                grid.n_interior()
            )));
        }
        let field = Self { grid, values };
        field.check_finite()?;
        Ok(field)
    }

    pub(crate) fn from_raw(grid: SpatialGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_interior());
        Self { grid, values }
    }

    pub fn zeros(grid: SpatialGrid) -> Self {
        Self::from_raw(grid, vec![0.0; grid.n_interior()])
    }

    pub fn constant(grid: SpatialGrid, c: f64) -> Result<Self> {
        Self::new(grid, vec![c; grid.n_interior()])
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::InvalidField {
                index,
                value: self.values[index],
            }),
            None => Ok(()),
        }
    }

    pub fn ensure_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Field) -> Result<Field> {
        self.ensure_same_grid(other)?;
        Ok(Field::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + c * b)
                .collect(),
        ))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Euclidean norm of the raw value vector (no quadrature weight).
    pub fn euclidean_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `(h * sum |v_i|^p)^(1/p)`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let h = self.grid.spacing();
        let sum: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
        (h * sum).powf(1.0 / p)
    }

    /// Forward differences on the `n + 1` edges, with zero boundary values.
    pub fn edge_gradients(&self) -> Vec<f64> {
        let h = self.grid.spacing();
        let n = self.values.len();
        (0..=n)
            .map(|e| {
                let right = if e < n { self.values[e] } else { 0.0 };
                let left = if e > 0 { self.values[e - 1] } else { 0.0 };
                (right - left) / h
            })
            .collect()
    }

    /// `(h * sum_e |g_e|^p)^(1/p)` over edge gradients.
    pub fn gradient_lp_norm(&self, p: f64) -> f64 {
        let h = self.grid.spacing();
        let sum: f64 = self.edge_gradients().iter().map(|g| g.abs().powf(p)).sum();
        (h * sum).powf(1.0 / p)
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        assert_eq!(self.grid, rhs.grid, "grid mismatch in field addition");
        Field::from_raw(
            self.grid,
            self.values.iter().zip(&rhs.values).map(|(a, b)| a + b).collect(),
        )
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        assert_eq!(self.grid, rhs.grid, "grid mismatch in field subtraction");
        Field::from_raw(
            self.grid,
            self.values.iter().zip(&rhs.values).map(|(a, b)| a - b).collect(),
        )
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, rhs: f64) -> Field {
        self.scaled(rhs)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.scaled(-1.0)
    }
}

/// Which Gelfand triple `V ⊆ H ⊆ V*` a field is measured in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TripleKind {
    /// `W^{1,2}_0 ⊆ L^2 ⊆ W^{-1,2}`.
    Rde,
    /// `L^{r+1} ⊆ W^{-1,2}_0 ⊆ (L^{r+1})^*`.
    Pme { r: f64 },
    /// `W^{1,p} ⊆ L^2 ⊆ (W^{1,p})^*` (Dirichlet realization).
    Ple { p: f64 },
    /// `L^p ⊆ L^2 ⊆ L^{p/(p-1)}`.
    Pointwise { p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripleSpec {
    kind: TripleKind,
    alpha: f64,
}

impl TripleSpec {
    pub fn new(kind: TripleKind) -> Result<Self> {
        let alpha = match kind {
            TripleKind::Rde => 2.0,
            TripleKind::Pme { r } => {
                if !(r > 1.0 && r.is_finite()) {
                    return Err(Error::Config(format!("porous-medium exponent r must exceed 1, got {r}")));
                }
                r + 1.0
            }
            TripleKind::Ple { p } => {
                if !(p > 2.0 && p.is_finite()) {
                    return Err(Error::Config(format!("p-Laplace exponent must exceed 2, got {p}")));
                }
                p
            }
            TripleKind::Pointwise { p } => {
                if !(p >= 2.0 && p.is_finite()) {
                    return Err(Error::Config(format!("pointwise exponent must be at least 2, got {p}")));
                }
                p
            }
        };
        Ok(Self { kind, alpha })
    }

    pub fn rde() -> Self {
        Self { kind: TripleKind::Rde, alpha: 2.0 }
    }

    pub fn pme(r: f64) -> Result<Self> {
        Self::new(TripleKind::Pme { r })
    }

    pub fn ple(p: f64) -> Result<Self> {
        Self::new(TripleKind::Ple { p })
    }

    pub fn pointwise(p: f64) -> Result<Self> {
        Self::new(TripleKind::Pointwise { p })
    }

    pub fn kind(&self) -> TripleKind {
        self.kind
    }

    /// Coercivity exponent.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            TripleKind::Rde => "rde",
            TripleKind::Pme { .. } => "pme",
            TripleKind::Ple { .. } => "ple",
            TripleKind::Pointwise { .. } => "pointwise",
        }
    }

    /// True when `H` is the negative Sobolev space (porous medium).
    pub fn h_is_negative_sobolev(&self) -> bool {
        matches!(self.kind, TripleKind::Pme { .. })
    }

    /// Upper bound `c` with `‖v‖_H ≤ c ‖v‖_V` on the given grid.
    pub fn h_over_v_bound(&self, grid: &SpatialGrid) -> f64 {
        let mu1 = grid.principal_eigenvalue();
        let m = grid.measure();
        match self.kind {
            TripleKind::Rde => 1.0 / (mu1 + 1.0).sqrt(),
            TripleKind::Pme { r } => m.powf(0.5 - 1.0 / (r + 1.0)) / mu1.sqrt(),
            TripleKind::Ple { p } | TripleKind::Pointwise { p } => m.powf(0.5 - 1.0 / p),
        }
    }
}

/// Dirichlet discrete Laplacian `Δ_h v`.
pub fn laplacian(v: &Field) -> Field {
    let h2 = v.grid.spacing().powi(2);
    let n = v.len();
    let x = &v.values;
    let values = (0..n)
        .map(|i| {
            let left = if i > 0 { x[i - 1] } else { 0.0 };
            let right = if i + 1 < n { x[i + 1] } else { 0.0 };
            (left - 2.0 * x[i] + right) / h2
        })
        .collect();
    Field::from_raw(v.grid, values)
}

/// Tridiagonal matrix of `I - c Δ_h`.
pub(crate) fn shifted_laplacian_matrix(grid: &SpatialGrid, c: f64) -> Tridiagonal {
    let n = grid.n_interior();
    let w = c / grid.spacing().powi(2);
    Tridiagonal {
        lower: vec![-w; n],
        diag: vec![1.0 + 2.0 * w; n],
        upper: vec![-w; n],
    }
}

/// Solves `-Δ_h u = f` with zero boundary values.
pub fn inverse_dirichlet_laplacian(f: &Field) -> Result<Field> {
    f.check_finite()?;
    let grid = f.grid;
    let n = grid.n_interior();
    let w = 1.0 / grid.spacing().powi(2);
    let matrix = Tridiagonal {
        lower: vec![-w; n],
        diag: vec![2.0 * w; n],
        upper: vec![-w; n],
    };
    Ok(Field::from_raw(grid, matrix.solve(&f.values)?))
}

/// Solves `(I - Δ_h / level) w = v`.
pub fn dirichlet_resolvent(v: &Field, level: f64) -> Result<Field> {
    v.check_finite()?;
    let matrix = shifted_laplacian_matrix(&v.grid, 1.0 / level);
    Ok(Field::from_raw(v.grid, matrix.solve(&v.values)?))
}

/// Quadrature `h * sum fstar_i v_i`; the duality on the discrete
/// representation for all four triples.
pub fn dual_pairing(fstar: &Field, v: &Field) -> Result<f64> {
    fstar.ensure_same_grid(v)?;
    let h = v.grid.spacing();
    Ok(h * fstar.values.iter().zip(&v.values).map(|(a, b)| a * b).sum::<f64>())
}

/// Inner product of `H`: `L^2` quadrature, or `⟨a, (-Δ_h)^{-1} b⟩` for the
/// porous-medium triple.
pub fn inner_h(a: &Field, b: &Field, triple: &TripleSpec) -> Result<f64> {
    a.ensure_same_grid(b)?;
    if triple.h_is_negative_sobolev() {
        dual_pairing(a, &inverse_dirichlet_laplacian(b)?)
    } else {
        dual_pairing(a, b)
    }
}

/// Duality `_{V*}⟨fstar, v⟩_V` where `fstar` is the nodal representation of
/// a drift value. In the porous-medium triple `H = W^{-1,2}` is identified
/// with its own dual, so the pairing is the `H` inner product.
pub fn duality(fstar: &Field, v: &Field, triple: &TripleSpec) -> Result<f64> {
    inner_h(fstar, v, triple)
}

pub fn norm_h(v: &Field, triple: &TripleSpec) -> Result<f64> {
    v.check_finite()?;
    Ok(inner_h(v, v, triple)?.max(0.0).sqrt())
}

pub fn norm_v(v: &Field, triple: &TripleSpec) -> Result<f64> {
    v.check_finite()?;
    Ok(match triple.kind {
        TripleKind::Rde => {
            let g = v.gradient_lp_norm(2.0);
            let l2 = v.lp_norm(2.0);
            (g * g + l2 * l2).sqrt()
        }
        TripleKind::Pme { r } => v.lp_norm(r + 1.0),
        TripleKind::Ple { p } => {
            let g = v.gradient_lp_norm(p).powf(p);
            let l = v.lp_norm(p).powf(p);
            (g + l).powf(1.0 / p)
        }
        TripleKind::Pointwise { p } => v.lp_norm(p),
    })
}

/// Norm of the intermediate space `S` with compact embedding into `H`:
/// the Dirichlet-form norm `‖∇_h v‖_{L^2}` for the reaction-diffusion and
/// p-Laplace triples, `L^2` for the porous-medium triple.
pub fn norm_s(v: &Field, triple: &TripleSpec) -> Result<f64> {
    v.check_finite()?;
    match triple.kind {
        TripleKind::Rde | TripleKind::Ple { .. } => Ok(v.gradient_lp_norm(2.0)),
        TripleKind::Pme { .. } => Ok(v.lp_norm(2.0)),
        TripleKind::Pointwise { .. } => Err(Error::Config(
            "the pointwise triple has no intermediate space S".into(),
        )),
    }
}

/// Random truncated sine series `sum_{k ≤ K} a_k sin(kπx/L)`,
/// `a_k ~ U[-1, 1] k^{-decay}`, `K = min(n, max_modes)`, optionally scaled by
/// a log-uniform amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineSeriesSampler {
    pub max_modes: usize,
    pub decay: f64,
    /// Log10 range of the overall amplitude factor; `(0, 0)` disables it.
    pub log10_amplitude: (f64, f64),
}

impl Default for SineSeriesSampler {
    fn default() -> Self {
        Self {
            max_modes: 32,
            decay: 2.0,
            log10_amplitude: (0.0, 0.0),
        }
    }
}

impl SineSeriesSampler {
    /// Certification law: default series times an amplitude in `[10^-2, 10]`.
    pub fn certification() -> Self {
        Self {
            log10_amplitude: (-2.0, 1.0),
            ..Self::default()
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, grid: &SpatialGrid, rng: &mut R) -> Field {
        let modes = grid.n_interior().min(self.max_modes);
        let coeffs: Vec<f64> = (1..=modes)
            .map(|k| rng.random_range(-1.0..=1.0) * (k as f64).powf(-self.decay))
            .collect();
        let (lo, hi) = self.log10_amplitude;
        let amplitude = if hi > lo {
            10f64.powf(rng.random_range(lo..hi))
        } else {
            10f64.powf(lo)
        };
        let l = grid.length();
        let values = grid
            .nodes()
            .map(|x| {
                amplitude
                    * coeffs
                        .iter()
                        .enumerate()
                        .map(|(j, a)| a * ((j + 1) as f64 * PI * x / l).sin())
                        .sum::<f64>()
            })
            .collect();
        Field::from_raw(*grid, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn unit(n: usize) -> SpatialGrid {
        SpatialGrid::unit(n).unwrap()
    }

    #[test]
    fn grid_invariants() {
        assert!(SpatialGrid::unit(1).is_err());
        assert!(SpatialGrid::new(10, 0.0).is_err());
        let g = SpatialGrid::new(99, 3.0).unwrap();
        assert!((g.spacing() * 100.0 - 3.0).abs() <= f64::EPSILON * 3.0);
    }

    #[test]
    fn non_finite_field_is_rejected() {
        let g = unit(4);
        let err = Field::new(g, vec![0.0, f64::NAN, 1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidField { index: 1, .. }));
    }

    #[test]
    fn constant_one_has_unit_l2_norm_up_to_boundary_cell() {
        // Dirichlet nodes carry no weight, so the constant loses one cell.
        let g = unit(1000);
        let one = Field::constant(g, 1.0).unwrap();
        let nh = norm_h(&one, &TripleSpec::rde()).unwrap();
        assert!((nh - 1.0).abs() <= g.spacing());
        let two = Field::constant(g, 2.0).unwrap();
        let nv = norm_v(&two, &TripleSpec::pme(3.0).unwrap()).unwrap();
        assert!((nv - 2.0).abs() <= 2.0 * g.spacing());
        let ns = norm_s(&one, &TripleSpec::pme(3.0).unwrap()).unwrap();
        assert!((ns - 1.0).abs() <= g.spacing());
    }

    #[test]
    fn zero_field_has_zero_norms() {
        let g = unit(20);
        let z = Field::zeros(g);
        for t in [
            TripleSpec::rde(),
            TripleSpec::pme(3.0).unwrap(),
            TripleSpec::ple(3.0).unwrap(),
            TripleSpec::pointwise(4.0).unwrap(),
        ] {
            assert_eq!(norm_h(&z, &t).unwrap(), 0.0);
            assert_eq!(norm_v(&z, &t).unwrap(), 0.0);
        }
    }

    #[test]
    fn pme_h_norm_of_first_sine() {
        // Dense oracle: assemble -Δ_h, solve by Gaussian elimination.
        let g = unit(200);
        let v = g.sample(|x| (PI * x).sin()).unwrap();
        let n = g.n_interior();
        let h2 = g.spacing().powi(2);
        let mut a = vec![vec![0.0; n + 1]; n];
        for i in 0..n {
            a[i][i] = 2.0 / h2;
            if i > 0 {
                a[i][i - 1] = -1.0 / h2;
            }
            if i + 1 < n {
                a[i][i + 1] = -1.0 / h2;
            }
            a[i][n] = v.values()[i];
        }
        for col in 0..n {
            for row in col + 1..n.min(col + 2) {
                let f = a[row][col] / a[col][col];
                for k in col..=n {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
        let mut u = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = a[i][n];
            if i + 1 < n {
                s -= a[i][i + 1] * u[i + 1];
            }
            u[i] = s / a[i][i];
        }
        let oracle = (g.spacing() * u.iter().zip(v.values()).map(|(a, b)| a * b).sum::<f64>()).sqrt();
        let got = norm_h(&v, &TripleSpec::pme(3.0).unwrap()).unwrap();
        assert!((got - oracle).abs() < 1e-12 * oracle);
        let continuum = 1.0 / PI / 2f64.sqrt();
        assert!((got - continuum).abs() < 1e-4);
    }

    #[test]
    fn rde_v_norm_of_parabola() {
        let exact = (1.0 / 3.0 + 1.0 / 30.0f64).sqrt();
        let g = unit(400);
        let v = g.sample(|x| x * (1.0 - x)).unwrap();
        let got = norm_v(&v, &TripleSpec::rde()).unwrap();
        assert!((got - exact).abs() < 10.0 * g.spacing().powi(2));
    }

    #[test]
    fn rde_s_norm_of_second_sine() {
        // ∫ (2π cos 2πx)^2 = 2π^2; the discrete form equals μ_2 / 2 exactly.
        let g = unit(200);
        let v = g.sample(|x| (2.0 * PI * x).sin()).unwrap();
        let got = norm_s(&v, &TripleSpec::rde()).unwrap();
        let discrete = (g.dirichlet_eigenvalue(2) / 2.0).sqrt();
        assert!((got - discrete).abs() < 1e-12 * discrete);
        assert!((got - (2.0 * PI * PI).sqrt()).abs() < 1e-3);
    }

    #[test]
    fn inverse_laplacian_on_first_sine() {
        let g = unit(100);
        let f = g.sample(|x| (PI * x).sin()).unwrap();
        let u = inverse_dirichlet_laplacian(&f).unwrap();
        let mu = g.principal_eigenvalue();
        for (ui, fi) in u.values().iter().zip(f.values()) {
            assert!((ui - fi / mu).abs() < 1e-13);
            assert!((ui - fi / (PI * PI)).abs() < 1e-4);
        }
        let residual = &laplacian(&u) + &f;
        assert!(residual.euclidean_norm() <= 1e-10 * f.euclidean_norm());
        assert_eq!(inverse_dirichlet_laplacian(&Field::zeros(g)).unwrap(), Field::zeros(g));
    }

    #[test]
    fn inverse_laplacian_residual_bound() {
        let g = unit(64);
        let mut rng = stream(11, 0);
        for _ in 0..20 {
            let f = SineSeriesSampler::default().sample(&g, &mut rng);
            let u = inverse_dirichlet_laplacian(&f).unwrap();
            let r = &laplacian(&u) + &f;
            assert!(r.euclidean_norm() <= 1e-12 * f.euclidean_norm().max(1.0));
        }
    }

    #[test]
    fn inverse_laplacian_is_linear() {
        let g = unit(50);
        let mut rng = stream(3, 1);
        let s = SineSeriesSampler::default();
        let (f, h) = (s.sample(&g, &mut rng), s.sample(&g, &mut rng));
        let (a, b) = (1.7, -0.4);
        let lhs = inverse_dirichlet_laplacian(&f.scaled(a).axpy(b, &h).unwrap()).unwrap();
        let rhs = inverse_dirichlet_laplacian(&f)
            .unwrap()
            .scaled(a)
            .axpy(b, &inverse_dirichlet_laplacian(&h).unwrap())
            .unwrap();
        assert!((&lhs - &rhs).max_abs() < 1e-12 * lhs.max_abs().max(1.0));
    }

    #[test]
    fn pairing_examples() {
        let g = unit(30);
        let mut rng = stream(5, 2);
        let s = SineSeriesSampler::default();
        let (f, v) = (s.sample(&g, &mut rng), s.sample(&g, &mut rng));
        let l2 = v.lp_norm(2.0);
        assert!((dual_pairing(&v, &v).unwrap() - l2 * l2).abs() < 1e-12);
        assert_eq!(dual_pairing(&f, &Field::zeros(g)).unwrap(), 0.0);
        assert_eq!(dual_pairing(&f, &v).unwrap(), dual_pairing(&v, &f).unwrap());
        let other = Field::zeros(unit(31));
        assert_eq!(dual_pairing(&f, &other), Err(Error::GridMismatch));
    }

    #[test]
    fn pme_h_norm_identity() {
        let g = unit(80);
        let mut rng = stream(9, 0);
        let t = TripleSpec::pme(2.0).unwrap();
        for _ in 0..50 {
            let f = SineSeriesSampler::default().sample(&g, &mut rng);
            let sq = norm_h(&f, &t).unwrap().powi(2);
            let via = dual_pairing(&f, &inverse_dirichlet_laplacian(&f).unwrap()).unwrap();
            assert!((sq - via).abs() <= 1e-10 * via.abs());
        }
    }

    #[test]
    fn embedding_bounds_dominate_samples() {
        let g = unit(60);
        let mut rng = stream(21, 0);
        let sampler = SineSeriesSampler::certification();
        for t in [
            TripleSpec::rde(),
            TripleSpec::pme(3.0).unwrap(),
            TripleSpec::ple(3.0).unwrap(),
            TripleSpec::pointwise(4.0).unwrap(),
        ] {
            let c = t.h_over_v_bound(&g);
            for _ in 0..1000 {
                let v = sampler.sample(&g, &mut rng);
                let ratio = norm_h(&v, &t).unwrap() / norm_v(&v, &t).unwrap();
                assert!(ratio <= c * (1.0 + 1e-12), "{} ratio {ratio} > {c}", t.name());
            }
        }
    }

    #[test]
    fn pointwise_triple_has_no_s_norm() {
        let g = unit(5);
        assert!(norm_s(&Field::zeros(g), &TripleSpec::pointwise(3.0).unwrap()).is_err());
    }

    #[test]
    fn triple_exponent_validation() {
        assert!(TripleSpec::pme(1.0).is_err());
        assert!(TripleSpec::ple(2.0).is_err());
        assert!(TripleSpec::pointwise(1.5).is_err());
        assert_eq!(TripleSpec::pme(3.0).unwrap().alpha(), 4.0);
        assert_eq!(TripleSpec::ple(3.5).unwrap().alpha(), 3.5);
        assert_eq!(TripleSpec::rde().alpha(), 2.0);
    }
}
