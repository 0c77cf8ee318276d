//! Structured Dirichlet grids, finite-difference Laplacians and the heat
//! equation reference solutions.
//!
//! Unknowns live on interior points only; boundary values are pinned to zero.
//! Storage is lexicographic with `x` fastest.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::par;

/// Uniform grid on `[0, L]^dim` with `N` intervals per dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    length: f64,
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}D N={} L={}", self.dim, self.n, self.length)
    }
}

impl Grid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "N = {n} must be a power of two >= 2"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidGrid(format!("length {length} must be positive")));
        }
        Ok(Self { dim, n, length })
    }

    /// Unit-length grid.
    pub fn unit(dim: usize, n: usize) -> Result<Self> {
        Self::new(dim, n, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of intervals `N` per dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Interior points per dimension (`N − 1`).
    pub fn interior(&self) -> usize {
        self.n - 1
    }

    /// Total number of unknowns.
    pub fn len(&self) -> usize {
        self.interior().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Interior extent per axis, padded with 1 for unused axes.
    pub fn shape(&self) -> [usize; 3] {
        let mut s = [1; 3];
        for d in s.iter_mut().take(self.dim) {
            *d = self.interior();
        }
        s
    }

    /// Same domain with half the intervals, if at least one interior point remains.
    pub fn coarsen(&self) -> Option<Self> {
        (self.n >= 4).then_some(Self {
            n: self.n / 2,
            ..*self
        })
    }

    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(self.dim, n, self.length)
    }

    /// Interior coordinates (0-based) of a flat index.
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let m = self.interior();
        match self.dim {
            1 => [idx, 0, 0],
            2 => [idx % m, idx / m, 0],
            _ => [idx % m, (idx / m) % m, idx / (m * m)],
        }
    }

    /// Physical coordinate of interior index `i` along any axis.
    pub fn position(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.dx()
    }

    fn strides(&self) -> [usize; 3] {
        let m = self.interior();
        [1, m, m * m]
    }
}

/// Values of a field on the interior points of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch {
                expected: format!("{} values on {grid}", grid.len()),
                found: format!("{} values", values.len()),
            });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x, y, z)` at interior points (unused coordinates are 0).
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let c = grid.coords(idx);
                let mut x = [0.0; 3];
                for d in 0..grid.dim() {
                    x[d] = grid.position(c[d]);
                }
                f(x)
            })
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
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

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if &self.grid != grid {
            return Err(Error::GridMismatch {
                expected: grid.to_string(),
                found: self.grid.to_string(),
            });
        }
        Ok(())
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &GridFunction) {
        debug_assert_eq!(self.grid, x.grid);
        for (s, v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.values.iter_mut().for_each(|v| *v *= a);
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn norm2(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Max-norm of `self − other`.
    pub fn max_diff(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Order of the finite-difference Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StencilOrder {
    Second,
    Fourth,
}

impl StencilOrder {
    pub fn from_order(order: usize) -> Result<Self> {
        match order {
            2 => Ok(Self::Second),
            4 => Ok(Self::Fourth),
            _ => Err(Error::Unsupported(format!("stencil order {order}"))),
        }
    }

    pub fn as_usize(self) -> usize {
        match self {
            Self::Second => 2,
            Self::Fourth => 4,
        }
    }
}

const SECOND: [(isize, f64); 3] = [(-1, 1.0), (0, -2.0), (1, 1.0)];
const FOURTH: [(isize, f64); 5] = [
    (-2, -1.0 / 12.0),
    (-1, 16.0 / 12.0),
    (0, -30.0 / 12.0),
    (1, 16.0 / 12.0),
    (2, -1.0 / 12.0),
];

/// `ν Δ_h` on a grid with homogeneous Dirichlet boundaries.
///
/// The fourth-order stencil drops to the second-order one at the interior
/// points adjacent to the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatOperator {
    pub grid: Grid,
    pub nu: f64,
    pub order: StencilOrder,
}

impl HeatOperator {
    pub fn new(grid: Grid, nu: f64, order: StencilOrder) -> Self {
        Self { grid, nu, order }
    }

    /// Same physics and stencil order on another grid.
    pub fn rediscretize(&self, grid: Grid) -> Self {
        Self { grid, ..*self }
    }

    fn axis_stencil(&self, c: usize) -> &'static [(isize, f64)] {
        let last = self.grid.interior() - 1;
        match self.order {
            StencilOrder::Fourth if c != 0 && c != last => &FOURTH,
            _ => &SECOND,
        }
    }

    /// Value of `ν Δ_h u` at one interior point.
    #[inline]
    pub fn apply_at(&self, u: &[f64], idx: usize) -> f64 {
        let g = &self.grid;
        let m = g.interior() as isize;
        let c = g.coords(idx);
        let strides = g.strides();
        let mut acc = 0.0;
        for d in 0..g.dim() {
            let cd = c[d] as isize;
            for &(off, w) in self.axis_stencil(c[d]) {
                let pos = cd + off;
                if pos >= 0 && pos < m {
                    let j = (idx as isize + off * strides[d] as isize) as usize;
                    acc += w * u[j];
                }
            }
        }
        acc * self.nu / (g.dx() * g.dx())
    }

    /// Diagonal entry of `ν Δ_h` at one interior point.
    pub fn diagonal_at(&self, idx: usize) -> f64 {
        let g = &self.grid;
        let c = g.coords(idx);
        let mut acc = 0.0;
        for &cd in c.iter().take(g.dim()) {
            acc += self
                .axis_stencil(cd)
                .iter()
                .find(|(off, _)| *off == 0)
                .map(|(_, w)| *w)
                .unwrap_or(0.0);
        }
        acc * self.nu / (g.dx() * g.dx())
    }

    /// `out = ν Δ_h u` on raw slices.
    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        let row = self.grid.interior();
        par::for_each_chunk(out, row, |r, piece| {
            let base = r * row;
            for (i, v) in piece.iter_mut().enumerate() {
                *v = self.apply_at(u, base + i);
            }
        });
    }

    /// Dense matrix of `ν Δ_h` (small grids only: oracles and coarse solves).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.grid.len();
        let mut a = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            for i in 0..n {
                a[(i, j)] = self.apply_at(&e, i);
            }
            e[j] = 0.0;
        }
        a
    }

    /// Sequential twin of [`apply_into`](Self::apply_into).
    pub fn apply_into_seq(&self, u: &[f64], out: &mut [f64]) {
        let row = self.grid.interior();
        par::for_each_chunk_seq(out, row, |r, piece| {
            let base = r * row;
            for (i, v) in piece.iter_mut().enumerate() {
                *v = self.apply_at(u, base + i);
            }
        });
    }
}

/// Applies the heat operator: returns `ν Δ_h u`.
pub fn apply_operator(op: &HeatOperator, u: &GridFunction) -> Result<GridFunction> {
    u.check_grid(&op.grid)?;
    let mut out = GridFunction::zeros(op.grid);
    op.apply_into(u.values(), out.values_mut());
    Ok(out)
}

/// Eigenvalue symbol of the 1D second-order stencil for sine mode `k`,
/// without the `ν` factor: `d(k) = (−2 + 2 cos(kπΔx/L)) / Δx²`.
pub fn discrete_symbol(grid: &Grid, k: usize) -> Result<f64> {
    if grid.dim() != 1 {
        return Err(Error::Unsupported(
            "discrete symbol is defined for 1D grids only".into(),
        ));
    }
    if k == 0 || k >= grid.n() {
        return Err(Error::ModeOutOfRange {
            k,
            max: grid.n() - 1,
        });
    }
    let dx = grid.dx();
    Ok((-2.0 + 2.0 * (k as f64 * PI * dx / grid.length()).cos()) / (dx * dx))
}

/// Product of sine modes `sin(kπx_d/L)` over all dimensions.
pub fn initial_condition(grid: &Grid, k: usize) -> GridFunction {
    let dim = grid.dim();
    let l = grid.length();
    GridFunction::from_fn(*grid, |x| {
        x.iter()
            .take(dim)
            .map(|&xd| (k as f64 * PI * xd / l).sin())
            .product()
    })
}

/// Exact solution of the heat equation for the sine initial condition.
pub fn exact_pde(grid: &Grid, k: usize, nu: f64, t: f64) -> GridFunction {
    let wave = k as f64 * PI / grid.length();
    let rate = nu * grid.dim() as f64 * wave * wave;
    let mut u = initial_condition(grid, k);
    u.scale((-rate * t).exp());
    u
}

/// Exact solution of the semi-discrete ODE system for the sine initial
/// condition (1D, second-order stencil): `exp(ν d(k) t) u₀`.
///
/// The decaying sign is used; `d(k) < 0`.
pub fn exact_ode(op: &HeatOperator, k: usize, t: f64) -> Result<GridFunction> {
    if op.grid.dim() != 1 || op.order != StencilOrder::Second {
        return Err(Error::Unsupported(
            "exact ODE solution needs a 1D second-order operator".into(),
        ));
    }
    let d = discrete_symbol(&op.grid, k)?;
    let mut u = initial_condition(&op.grid, k);
    u.scale((op.nu * d * t).exp());
    Ok(u)
}
