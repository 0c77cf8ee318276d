//! Convergence of SDC sweeps on the scalar test equation `y' = λ y`.
//!
//! For a scalar `z = λΔt` the sweep error obeys `e^{k+1} = K(z) e^k` with
//! `K(z) = (I − z Q_I)⁻¹ z (Q − Q_I)`; its spectral radius is the asymptotic
//! damping factor per sweep.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::par;
use crate::quadrature::QuadratureTable;

/// Error propagation matrix `(I − z Q_I)⁻¹ z (Q − Q_I)` of size `(M+1)²`.
pub fn iteration_matrix(table: &QuadratureTable, z: f64) -> Result<DMatrix<f64>> {
    let n = table.nodes.len();
    let lhs = DMatrix::<f64>::identity(n, n) - &table.q_implicit * z;
    let rhs = (&table.q - &table.q_implicit) * z;
    lhs.lu().solve(&rhs).ok_or(Error::Singular)
}

/// Spectral radius of the iteration matrix restricted to nodes `1..=M`.
pub fn damping_factor(table: &QuadratureTable, z: f64) -> Result<f64> {
    let k = iteration_matrix(table, z)?;
    let m = table.substeps();
    let active = k.view((1, 1), (m, m)).into_owned();
    Ok(spectral_radius(active))
}

fn spectral_radius(a: DMatrix<f64>) -> f64 {
    if a.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    a.complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}

/// Damping factors sampled along the negative real axis.
#[derive(Debug, Clone, PartialEq)]
pub struct DampingScan {
    /// `(λΔt, ρ)` pairs with `λΔt` strictly decreasing.
    pub samples: Vec<(f64, f64)>,
}

impl DampingScan {
    /// Largest sampled factor and where it occurs.
    pub fn peak(&self) -> Option<(f64, f64)> {
        self.samples
            .iter()
            .copied()
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Largest jump between neighbouring samples.
    pub fn max_step(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].1 - w[0].1).abs())
            .fold(0.0, f64::max)
    }
}

/// `points` values `−10^e`, `e` evenly spaced in `[log10 lo, log10 hi]`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    match points {
        0 => Vec::new(),
        1 => vec![-lo],
        _ => (0..points)
            .map(|j| -(10f64).powf(a + (b - a) * j as f64 / (points - 1) as f64))
            .collect(),
    }
}

/// 200 points, `|λΔt|` from `1e-3` to `1e6`.
pub fn default_grid() -> Vec<f64> {
    log_grid(1e-3, 1e6, 200)
}

/// Evaluates [`damping_factor`] on each grid value (in parallel when enabled).
pub fn damping_scan(table: &QuadratureTable, grid: &[f64]) -> Result<DampingScan> {
    check_grid(grid)?;
    let samples = par::map(grid, |&z| damping_factor(table, z).map(|r| (z, r)))
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(DampingScan { samples })
}

pub fn damping_scan_seq(table: &QuadratureTable, grid: &[f64]) -> Result<DampingScan> {
    check_grid(grid)?;
    let samples = par::map_seq(grid, |&z| damping_factor(table, z).map(|r| (z, r)))
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(DampingScan { samples })
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if let Some(z) = grid.iter().find(|z| !(**z <= 0.0)) {
        return Err(Error::Config(format!("scan value {z} is not <= 0")));
    }
    if grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("scan values must be strictly decreasing".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    fn table(m: usize) -> QuadratureTable {
        QuadratureTable::uniform(m).unwrap()
    }

    /// Largest eigenvalue magnitude from the mean log growth of `A^k x`.
    fn power_radius(a: &DMatrix<f64>) -> f64 {
        let mut x = DVector::from_fn(a.nrows(), |i, _| 1.0 + 0.1 * i as f64);
        let mut log_growth = 0.0;
        let steps = 4000;
        for _ in 0..steps {
            x = a * x;
            let n = x.norm();
            if n == 0.0 {
                return 0.0;
            }
            log_growth += n.ln();
            x /= n;
        }
        (log_growth / steps as f64).exp()
    }

    #[test]
    fn trivial_cases_vanish() {
        assert_eq!(iteration_matrix(&table(4), 0.0).unwrap(), DMatrix::zeros(5, 5));
        for z in [-0.1, -3.0, -1e4] {
            assert!(iteration_matrix(&table(1), z).unwrap().iter().all(|&v| v == 0.0));
            assert_eq!(damping_factor(&table(1), z).unwrap(), 0.0);
        }
        assert_eq!(damping_factor(&table(2), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn first_row_and_column_are_zero() {
        let k = iteration_matrix(&table(4), -2.5).unwrap();
        for i in 0..5 {
            assert_eq!(k[(0, i)], 0.0);
            assert_eq!(k[(i, 0)], 0.0);
        }
    }

    #[test]
    fn stiff_limit_for_two_substeps() {
        let k = iteration_matrix(&table(2), -1e12).unwrap();
        let expect = [[0.5, -0.5], [0.5, -0.5]];
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(-k[(i + 1, j + 1)], expect[i][j], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn radius_matches_power_iteration() {
        for (m, z) in [(2, -1.0), (2, -0.1), (4, -1.0), (4, -13.0), (8, -70.0)] {
            let t = table(m);
            let k = iteration_matrix(&t, z).unwrap();
            let active = k.view((1, 1), (m, m)).into_owned();
            let rho = damping_factor(&t, z).unwrap();
            let oracle = power_radius(&active);
            assert!((rho - oracle).abs() < 1e-3 * rho, "M={m} z={z}: {rho} vs {oracle}");
        }
    }

    #[test]
    fn reference_values() {
        let cases = [
            (2, -1e-3, 2.498e-4),
            (2, -0.1, 2.268e-2),
            (2, -1.0, 1.111e-1),
            (2, -10.0, 6.944e-2),
            (4, -1e-3, 1.25e-4),
            (4, -1.0, 9.746e-2),
        ];
        for (m, z, expect) in cases {
            let rho = damping_factor(&table(m), z).unwrap();
            assert!((rho - expect).abs() < 1e-3 * expect, "M={m} z={z}: {rho}");
        }
        assert_abs_diff_eq!(damping_factor(&table(2), -1.0).unwrap(), 1.0 / 9.0, epsilon = 1e-14);
    }

    #[test]
    fn scans_and_peaks() {
        let grid = default_grid();
        assert_eq!(grid.len(), 200);
        assert_abs_diff_eq!(grid[0], -1e-3, epsilon = 1e-15);
        assert_abs_diff_eq!(grid[199], -1e6, epsilon = 1e-6);
        let one = damping_scan(&table(1), &grid).unwrap();
        assert!(one.samples.iter().all(|s| s.1 == 0.0));
        for (m, peak, at) in [(2, 0.12500, -2.002), (4, 0.27855, -13.049), (8, 0.6231, -69.06)] {
            let s = damping_scan(&table(m), &grid).unwrap();
            assert_eq!(s, damping_scan_seq(&table(m), &grid).unwrap());
            let (z, p) = s.peak().unwrap();
            assert!(p > 0.0 && p < 1.0);
            assert!((p - peak).abs() < 2e-3, "M={m}: {p} at {z}");
            assert!((z / at - 1.0).abs() < 0.06, "M={m}: {p} at {z}");
            assert!(s.max_step() < 0.1);
            assert!(s.samples.iter().all(|&(_, r)| r < 1.0));
        }
    }

    #[test]
    fn scan_rejects_bad_grids() {
        assert!(damping_scan(&table(2), &[-1.0, 0.5]).is_err());
        assert!(damping_scan(&table(2), &[-1.0, -0.5]).is_err());
    }
}
