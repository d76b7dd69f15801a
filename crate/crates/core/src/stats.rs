//! Small statistics helpers shared by validators and experiments.

/// Power sums of a scalar sample; merging is order-independent up to
/// floating-point summation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PowerSums {
    pub count: u64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub s4: f64,
}

impl PowerSums {
    pub fn push(&mut self, x: f64) {
        let x2 = x * x;
        self.count += 1;
        self.s1 += x;
        self.s2 += x2;
        self.s3 += x2 * x;
        self.s4 += x2 * x2;
    }

    pub fn merge(mut self, other: PowerSums) -> PowerSums {
        self.count += other.count;
        self.s1 += other.s1;
        self.s2 += other.s2;
        self.s3 += other.s3;
        self.s4 += other.s4;
        self
    }

    pub fn from_slice(xs: &[f64]) -> PowerSums {
        let mut acc = PowerSums::default();
        for &x in xs {
            acc.push(x);
        }
        acc
    }

    pub fn mean(&self) -> f64 {
        self.s1 / self.count as f64
    }

    /// Raw moment `E[x^k]`, `k ∈ 1..=4`.
    pub fn raw_moment(&self, k: u32) -> f64 {
        let s = match k {
            1 => self.s1,
            2 => self.s2,
            3 => self.s3,
            4 => self.s4,
            _ => panic!("raw moment of order {k} is not tracked"),
        };
        s / self.count as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let n = self.count as f64;
        if self.count < 2 {
            return 0.0;
        }
        let m = self.s1 / n;
        ((self.s2 - n * m * m) / (n - 1.0)).max(0.0)
    }

    /// Central fourth moment (biased estimator).
    pub fn central_fourth(&self) -> f64 {
        let n = self.count as f64;
        let m = self.s1 / n;
        let (e2, e3, e4) = (self.s2 / n, self.s3 / n, self.s4 / n);
        (e4 - 4.0 * m * e3 + 6.0 * m * m * e2 - 3.0 * m.powi(4)).max(0.0)
    }
}

/// Ordinary least squares `y ≈ slope * x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_sums_match_direct_formulas() {
        let xs = [1.0, 2.0, 4.0, -3.0, 0.5];
        let p = PowerSums::from_slice(&xs);
        let m = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 4.0;
        let c4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / 5.0;
        assert!((p.mean() - m).abs() < 1e-15);
        assert!((p.variance() - var).abs() < 1e-12);
        assert!((p.central_fourth() - c4).abs() < 1e-10);
        let split = PowerSums::from_slice(&xs[..2]).merge(PowerSums::from_slice(&xs[2..]));
        assert_eq!(split.count, 5);
        assert!((split.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn exact_line_is_recovered() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| -2.5 * v + 1.0).collect();
        let (s, b) = linear_fit(&x, &y).unwrap();
        assert!((s + 2.5).abs() < 1e-14 && (b - 1.0).abs() < 1e-14);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }
}
