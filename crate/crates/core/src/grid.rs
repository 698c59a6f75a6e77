//! Uniform space-time grid on the fixed domain `[0, 1] x [0, T]`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Values at the spatial nodes of one time level.
pub type SpaceField = Vec<f64>;

/// Equidistant nodes `0 = y_0 < ... < y_{n_y - 1} = 1` and `n_t` steps of
/// length `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub n_y: usize,
    pub dt: f64,
    pub n_t: usize,
}

impl Grid {
    pub fn new(n_y: usize, dt: f64, n_t: usize) -> Result<Self> {
        let g = Self { n_y, dt, n_t };
        g.validate()?;
        Ok(g)
    }

    /// 30 nodes, 50 steps of 0.01.
    pub fn standard() -> Self {
        Self {
            n_y: 30,
            dt: 0.01,
            n_t: 50,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_y < 3 {
            return Err(Error::Config(format!("n_y must be >= 3 (got {})", self.n_y)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive (got {})", self.dt)));
        }
        Ok(())
    }

    /// Spatial spacing.
    pub fn h(&self) -> f64 {
        1.0 / (self.n_y - 1) as f64
    }

    pub fn horizon(&self) -> f64 {
        self.n_t as f64 * self.dt
    }

    pub fn y(&self, i: usize) -> f64 {
        if i + 1 == self.n_y {
            1.0
        } else {
            i as f64 * self.h()
        }
    }

    pub fn t(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_y).map(|i| self.y(i)).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_t).map(|k| self.t(k)).collect()
    }

    pub fn levels(&self) -> usize {
        self.n_t + 1
    }

    /// Composite trapezoid rule for `∫_0^1 f dy`.
    pub fn trapezoid(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.n_y);
        trapezoid_uniform(f, self.h())
    }

    /// Composite trapezoid rule for `∫_0^T g dt` over the `n_t + 1` levels.
    pub fn time_trapezoid(&self, g: &[f64]) -> f64 {
        debug_assert_eq!(g.len(), self.levels());
        trapezoid_uniform(g, self.dt)
    }

    /// Trapezoid weights of the spatial nodes.
    pub fn space_weights(&self) -> Vec<f64> {
        uniform_weights(self.n_y, self.h())
    }

    /// Trapezoid weights of the time levels.
    pub fn time_weights(&self) -> Vec<f64> {
        uniform_weights(self.levels(), self.dt)
    }
}

fn uniform_weights(n: usize, step: f64) -> Vec<f64> {
    let mut w = vec![step; n];
    w[0] *= 0.5;
    w[n - 1] *= 0.5;
    w
}

fn trapezoid_uniform(f: &[f64], step: f64) -> f64 {
    match f.len() {
        0 | 1 => 0.0,
        n => step * (0.5 * (f[0] + f[n - 1]) + f[1..n - 1].iter().sum::<f64>()),
    }
}

/// A grid function on all time levels, stored level by level.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    n_y: usize,
    data: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(n_y: usize, levels: usize) -> Self {
        Self {
            n_y,
            data: vec![0.0; n_y * levels],
        }
    }

    pub fn from_levels(levels: Vec<SpaceField>) -> Result<Self> {
        let n_y = levels.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_y * levels.len());
        for l in &levels {
            check_len("space-time level", n_y, l.len())?;
            data.extend_from_slice(l);
        }
        Ok(Self { n_y, data })
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn levels(&self) -> usize {
        self.data.len().checked_div(self.n_y).unwrap_or(0)
    }

    pub fn level(&self, k: usize) -> &[f64] {
        &self.data[k * self.n_y..(k + 1) * self.n_y]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.n_y..(k + 1) * self.n_y]
    }

    pub fn set_level(&mut self, k: usize, values: &[f64]) {
        self.level_mut(k).copy_from_slice(values);
    }

    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.data[k * self.n_y + i]
    }

    pub fn iter_levels(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_y.max(1))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn check_shape(&self, grid: &Grid, what: &'static str) -> Result<()> {
        check_len(what, grid.n_y, self.n_y)?;
        check_len(what, grid.levels(), self.levels())
    }
}

/// Central differences in the interior, second-order one-sided at the ends.
pub fn derivative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    }
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    d
}

/// Linear interpolation of nodal values at `y` on the uniform grid.
pub(crate) fn interpolate(f: &[f64], h: f64, y: f64) -> f64 {
    let n = f.len();
    let s = (y / h).clamp(0.0, (n - 1) as f64);
    let i = (s.floor() as usize).min(n - 2);
    let w = s - i as f64;
    (1.0 - w) * f[i] + w * f[i + 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sample(g: &Grid, f: impl Fn(f64) -> f64) -> Vec<f64> {
        g.nodes().into_iter().map(f).collect()
    }

    #[test]
    fn invalid_grids_are_rejected() {
        assert!(Grid::new(2, 0.01, 10).is_err());
        assert!(Grid::new(10, 0.0, 10).is_err());
        assert!(Grid::new(10, f64::NAN, 10).is_err());
        let g = Grid::new(30, 0.01, 50).unwrap();
        assert_relative_eq!(g.horizon(), 0.5);
        assert_eq!(g.y(29), 1.0);
        assert_relative_eq!(g.h(), 1.0 / 29.0);
    }

    #[test]
    fn trapezoid_exact_cases() {
        let g = Grid::standard();
        assert_relative_eq!(g.trapezoid(&vec![1.0; 30]), 1.0, max_relative = 1e-14);
        for n_y in [3, 7, 30, 101] {
            let g = Grid::new(n_y, 0.1, 1).unwrap();
            assert_relative_eq!(g.trapezoid(&sample(&g, |y| y)), 0.5, max_relative = 1e-14);
        }
    }

    #[test]
    fn trapezoid_quadratic_error_bound() {
        let g = Grid::standard();
        let err = (g.trapezoid(&sample(&g, |y| y * y)) - 1.0 / 3.0).abs();
        // |E| = h^2/12 * max|f''| = h^2/6
        assert!(err <= g.h().powi(2) / 6.0 + 1e-15);
        assert!(err > 0.0);
    }

    #[test]
    fn time_trapezoid_cases() {
        let g = Grid::standard();
        let times = g.times();
        assert_relative_eq!(g.time_trapezoid(&vec![1.0; 51]), 0.5, max_relative = 1e-14);
        let lin: Vec<f64> = times.to_vec();
        assert_relative_eq!(g.time_trapezoid(&lin), 0.125, max_relative = 1e-13);
        let sq: Vec<f64> = times.iter().map(|t| t * t).collect();
        let err = (g.time_trapezoid(&sq) - 1.0 / 24.0).abs();
        assert!(err <= g.horizon() * g.dt.powi(2) / 6.0 + 1e-15);
    }

    #[test]
    fn quadrature_error_quarters_under_refinement() {
        let errs: Vec<f64> = [11, 21, 41]
            .iter()
            .map(|&n| {
                let g = Grid::new(n, 0.1, 1).unwrap();
                (g.trapezoid(&sample(&g, |y| (2.0 * y).exp())) - ((2.0f64).exp() - 1.0) / 2.0).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
        }
    }

    #[test]
    fn derivative_is_exact_for_quadratics() {
        let g = Grid::new(11, 0.1, 1).unwrap();
        let d = derivative(&sample(&g, |y| 3.0 * y * y - y + 2.0), g.h());
        for (i, y) in g.nodes().into_iter().enumerate() {
            assert_relative_eq!(d[i], 6.0 * y - 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn space_time_field_levels() {
        let f = SpaceTimeField::from_levels(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(f.levels(), 2);
        assert_eq!(f.level(1), &[3.0, 4.0]);
        assert_eq!(f.get(0, 1), 2.0);
        assert!(SpaceTimeField::from_levels(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    proptest! {
        #[test]
        fn quadrature_is_linear_and_exact_for_affine(
            a in -5.0f64..5.0, b in -5.0f64..5.0, n_y in 3usize..60,
            u in proptest::collection::vec(-1.0f64..1.0, 60),
            v in proptest::collection::vec(-1.0f64..1.0, 60),
        ) {
            let g = Grid::new(n_y, 0.1, 1).unwrap();
            let aff = sample(&g, |y| a + b * y);
            prop_assert!((g.trapezoid(&aff) - (a + 0.5 * b)).abs() < 1e-12);
            let u = &u[..n_y];
            let v = &v[..n_y];
            let comb: Vec<f64> = u.iter().zip(v).map(|(x, y)| a * x + b * y).collect();
            let lhs = g.trapezoid(&comb);
            let rhs = a * g.trapezoid(u) + b * g.trapezoid(v);
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
