//! Geometric multigrid for the shifted systems `(I − σ ν Δ_h) u = b` of the
//! implicit sub-steps.
//!
//! Coarse operators are rediscretized (same `ν`, `σ` and stencil order);
//! residuals are restricted by full weighting and corrections interpolated
//! linearly. The coarsest grid is solved with a dense LU factorization.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::heat::{Grid, GridFunction, HeatOperator};
use crate::par;
use crate::transfer::{self, Transfer1d};

/// `I − σ A` for a heat operator `A` and shift `σ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedOperator {
    pub heat: HeatOperator,
    pub shift: f64,
}

impl ShiftedOperator {
    pub fn new(heat: HeatOperator, shift: f64) -> Self {
        Self { heat, shift }
    }

    pub fn grid(&self) -> &Grid {
        &self.heat.grid
    }

    #[inline]
    pub fn apply_at(&self, u: &[f64], idx: usize) -> f64 {
        u[idx] - self.shift * self.heat.apply_at(u, idx)
    }

    pub fn diagonal_at(&self, idx: usize) -> f64 {
        1.0 - self.shift * self.heat.diagonal_at(idx)
    }

    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        let row = self.grid().interior();
        par::for_each_chunk(out, row, |r, piece| {
            let base = r * row;
            for (i, v) in piece.iter_mut().enumerate() {
                *v = self.apply_at(u, base + i);
            }
        });
    }

    /// `r = b − (I − σA) u`
    pub fn residual_into(&self, u: &[f64], b: &[f64], r: &mut [f64]) {
        let row = self.grid().interior();
        par::for_each_chunk(r, row, |ri, piece| {
            let base = ri * row;
            for (i, v) in piece.iter_mut().enumerate() {
                *v = b[base + i] - self.apply_at(u, base + i);
            }
        });
    }

    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        u.check_grid(self.grid())?;
        let mut out = GridFunction::zeros(*self.grid());
        self.apply_into(u.values(), out.values_mut());
        Ok(out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.grid().len();
        DMatrix::identity(n, n) - self.heat.to_dense() * self.shift
    }

    pub fn rediscretize(&self, grid: Grid) -> Self {
        Self {
            heat: self.heat.rediscretize(grid),
            shift: self.shift,
        }
    }
}

/// Point smoother used inside the V-cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoother {
    /// Simultaneous update `u ← u + ω D⁻¹ (b − S u)`.
    WeightedJacobi { omega: f64 },
    /// In-place lexicographic sweep.
    GaussSeidelLex,
    /// Damped Jacobi update on red (even index sum) then black points.
    JorRedBlack { omega: f64 },
}

impl Smoother {
    pub fn jacobi() -> Self {
        Self::WeightedJacobi { omega: 2.0 / 3.0 }
    }

    pub fn jor_red_black() -> Self {
        Self::JorRedBlack { omega: 2.0 / 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgConfig {
    pub smoother: Smoother,
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
    /// Number of intervals `N` of the coarsest grid.
    pub coarsest_n: usize,
}

impl Default for MgConfig {
    fn default() -> Self {
        Self {
            smoother: Smoother::jacobi(),
            pre_sweeps: 2,
            post_sweeps: 2,
            coarsest_n: 2,
        }
    }
}

impl MgConfig {
    pub fn with_smoother(smoother: Smoother) -> Self {
        Self {
            smoother,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let omega = match self.smoother {
            Smoother::WeightedJacobi { omega } | Smoother::JorRedBlack { omega } => omega,
            Smoother::GaussSeidelLex => 1.0,
        };
        if !(omega > 0.0 && omega < 2.0) {
            return Err(Error::Config(format!("smoother weight {omega} not in (0, 2)")));
        }
        if self.coarsest_n < 2 || !self.coarsest_n.is_power_of_two() {
            return Err(Error::Config(format!(
                "coarsest N = {} must be a power of two >= 2",
                self.coarsest_n
            )));
        }
        Ok(())
    }
}

/// How each implicit sub-step system is solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolvePolicy {
    /// Exactly `n` V-cycles, no residual test.
    FixedCycles(usize),
    /// V-cycles until `‖b − Su‖₂ ≤ tol ‖b‖₂`, stopping early when a cycle
    /// fails to reduce the residual below `stall_factor` times the previous.
    ToTolerance { tol: f64, stall_factor: f64 },
}

impl SolvePolicy {
    /// Full solve: relative tolerance 1e-12 with a 75 % stall test.
    pub const FULL: SolvePolicy = SolvePolicy::ToTolerance {
        tol: 1e-12,
        stall_factor: 0.75,
    };

    pub fn validate(&self) -> Result<()> {
        match *self {
            SolvePolicy::FixedCycles(0) => {
                Err(Error::Config("fixed cycle count must be >= 1".into()))
            }
            SolvePolicy::ToTolerance { tol, stall_factor }
                if !(tol > 0.0) || !(stall_factor > 0.0 && stall_factor < 1.0) =>
            {
                Err(Error::Config(format!(
                    "tolerance {tol} must be > 0 and stall factor {stall_factor} in (0, 1)"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Hard cap on V-cycles for tolerance-driven solves.
pub const MAX_CYCLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Fixed budget spent.
    Budget,
    Converged,
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub cycles: usize,
    pub status: SolveStatus,
}

struct MgLevel {
    op: ShiftedOperator,
    inv_diag: Vec<f64>,
    /// Transfers to and from the next coarser level.
    restrict: Option<Transfer1d>,
    prolong: Option<Transfer1d>,
}

/// Multigrid hierarchy for one shifted operator.
pub struct Multigrid {
    levels: Vec<MgLevel>,
    cfg: MgConfig,
    coarse_lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl std::fmt::Debug for Multigrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Multigrid")
            .field("levels", &self.levels.len())
            .field("cfg", &self.cfg)
            .finish()
    }
}

impl Multigrid {
    pub fn new(op: ShiftedOperator, cfg: &MgConfig) -> Result<Self> {
        cfg.validate()?;
        let n = op.grid().n();
        if cfg.coarsest_n > n {
            return Err(Error::NotCoarsenable {
                n,
                coarsest: cfg.coarsest_n,
            });
        }
        let mut levels = Vec::new();
        let mut grid = *op.grid();
        loop {
            let level_op = op.rediscretize(grid);
            let inv_diag = (0..grid.len())
                .map(|i| 1.0 / level_op.diagonal_at(i))
                .collect();
            let coarser = (grid.n() > cfg.coarsest_n).then(|| grid.coarsen()).flatten();
            levels.push(MgLevel {
                op: level_op,
                inv_diag,
                restrict: coarser.map(|_| transfer::full_weighting_1d(grid.n())),
                prolong: coarser.map(|c| transfer::linear_1d(c.n())),
            });
            match coarser {
                Some(c) => grid = c,
                None => break,
            }
        }
        let coarse = &levels.last().expect("at least one level").op;
        let coarse_lu = coarse.to_dense().lu();
        if !coarse_lu.is_invertible() {
            return Err(Error::Singular);
        }
        Ok(Self {
            levels,
            cfg: *cfg,
            coarse_lu,
        })
    }

    pub fn operator(&self) -> &ShiftedOperator {
        &self.levels[0].op
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Runs `count` smoother sweeps on the finest level.
    pub fn smooth(&self, u: &mut [f64], b: &[f64], count: usize) {
        smooth_level(&self.levels[0], &self.cfg.smoother, u, b, count);
    }

    /// One V-cycle on the finest level, in place.
    pub fn v_cycle(&self, u: &mut [f64], b: &[f64]) {
        self.cycle(0, u, b);
    }

    fn cycle(&self, l: usize, u: &mut [f64], b: &[f64]) {
        let level = &self.levels[l];
        if l + 1 == self.levels.len() {
            let x = self.coarse_lu.solve(&DVector::from_column_slice(b)).expect("factorized");
            u.copy_from_slice(x.as_slice());
            return;
        }
        let smoother = &self.cfg.smoother;
        smooth_level(level, smoother, u, b, self.cfg.pre_sweeps);

        let grid = *level.op.grid();
        let mut r = vec![0.0; grid.len()];
        level.op.residual_into(u, b, &mut r);
        let restrict = level.restrict.as_ref().expect("non-coarsest level");
        let mut shape = grid.shape();
        for axis in 0..grid.dim() {
            let (next, s) = transfer::apply_axis(&r, shape, axis, restrict);
            r = next;
            shape = s;
        }
        let mut e = vec![0.0; r.len()];
        self.cycle(l + 1, &mut e, &r);

        let prolong = level.prolong.as_ref().expect("non-coarsest level");
        for axis in 0..grid.dim() {
            let (next, s) = transfer::apply_axis(&e, shape, axis, prolong);
            e = next;
            shape = s;
        }
        for (ui, ei) in u.iter_mut().zip(&e) {
            *ui += ei;
        }
        smooth_level(level, smoother, u, b, self.cfg.post_sweeps);
    }

    /// Relative residual `‖b − S u‖₂ / ‖b‖₂` (absolute when `b = 0`).
    pub fn relative_residual(&self, u: &[f64], b: &[f64]) -> f64 {
        let (res, bn) = self.residual_norms(u, b);
        if bn > 0.0 {
            res / bn
        } else {
            res
        }
    }

    fn residual_norms(&self, u: &[f64], b: &[f64]) -> (f64, f64) {
        let mut r = vec![0.0; b.len()];
        self.levels[0].op.residual_into(u, b, &mut r);
        let res = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        (res, bn)
    }

    /// Solves in place according to `policy`, starting from `u`.
    pub fn solve_in_place(&self, u: &mut [f64], b: &[f64], policy: &SolvePolicy) -> Result<SolveReport> {
        match *policy {
            SolvePolicy::FixedCycles(n) => {
                for _ in 0..n {
                    self.v_cycle(u, b);
                }
                Ok(SolveReport {
                    cycles: n,
                    status: SolveStatus::Budget,
                })
            }
            SolvePolicy::ToTolerance { tol, stall_factor } => {
                let (mut res, bn) = self.residual_norms(u, b);
                let target = tol * bn;
                let mut cycles = 0;
                loop {
                    if res <= target {
                        return Ok(SolveReport {
                            cycles,
                            status: SolveStatus::Converged,
                        });
                    }
                    if cycles == MAX_CYCLES {
                        return Err(Error::NotConverged {
                            cycles,
                            residual: if bn > 0.0 { res / bn } else { res },
                        });
                    }
                    self.v_cycle(u, b);
                    cycles += 1;
                    let new = self.residual_norms(u, b).0;
                    if new > target && new >= stall_factor * res {
                        return Ok(SolveReport {
                            cycles,
                            status: SolveStatus::Stalled,
                        });
                    }
                    res = new;
                }
            }
        }
    }
}

fn smooth_level(level: &MgLevel, smoother: &Smoother, u: &mut [f64], b: &[f64], count: usize) {
    let op = &level.op;
    let row = op.grid().interior();
    match *smoother {
        Smoother::WeightedJacobi { omega } => {
            let mut r = vec![0.0; u.len()];
            for _ in 0..count {
                op.residual_into(u, b, &mut r);
                for ((ui, ri), di) in u.iter_mut().zip(&r).zip(&level.inv_diag) {
                    *ui += omega * ri * di;
                }
            }
        }
        Smoother::GaussSeidelLex => {
            for _ in 0..count {
                for i in 0..u.len() {
                    let r = b[i] - op.apply_at(u, i);
                    u[i] += r * level.inv_diag[i];
                }
            }
        }
        Smoother::JorRedBlack { omega } => {
            let grid = *op.grid();
            let mut delta = vec![0.0; u.len()];
            for _ in 0..count {
                for color in 0..2 {
                    {
                        let uu: &[f64] = u;
                        par::for_each_chunk(&mut delta, row, |r, piece| {
                            let base = r * row;
                            for (i, d) in piece.iter_mut().enumerate() {
                                let idx = base + i;
                                let c = grid.coords(idx);
                                *d = if (c[0] + c[1] + c[2]) % 2 == color {
                                    omega * (b[idx] - op.apply_at(uu, idx)) * level.inv_diag[idx]
                                } else {
                                    0.0
                                };
                            }
                        });
                    }
                    for (ui, d) in u.iter_mut().zip(&delta) {
                        *ui += d;
                    }
                }
            }
        }
    }
}

/// Applies `count` smoother sweeps to `u` (the multigrid smoothing step in
/// isolation).
pub fn smooth(
    op: &ShiftedOperator,
    u: &GridFunction,
    b: &GridFunction,
    cfg: &MgConfig,
    count: usize,
) -> Result<GridFunction> {
    u.check_grid(op.grid())?;
    b.check_grid(op.grid())?;
    let inv_diag = (0..op.grid().len()).map(|i| 1.0 / op.diagonal_at(i)).collect();
    let level = MgLevel {
        op: *op,
        inv_diag,
        restrict: None,
        prolong: None,
    };
    let mut out = u.clone();
    smooth_level(&level, &cfg.smoother, out.values_mut(), b.values(), count);
    Ok(out)
}

/// One V-cycle starting from `u`.
pub fn v_cycle(op: &ShiftedOperator, u: &GridFunction, b: &GridFunction, cfg: &MgConfig) -> Result<GridFunction> {
    u.check_grid(op.grid())?;
    b.check_grid(op.grid())?;
    let mg = Multigrid::new(*op, cfg)?;
    let mut out = u.clone();
    mg.v_cycle(out.values_mut(), b.values());
    Ok(out)
}

/// Solves `S u = b` from the initial guess `u0` according to `policy`.
pub fn solve(
    op: &ShiftedOperator,
    u0: &GridFunction,
    b: &GridFunction,
    cfg: &MgConfig,
    policy: &SolvePolicy,
) -> Result<(GridFunction, SolveReport)> {
    u0.check_grid(op.grid())?;
    b.check_grid(op.grid())?;
    policy.validate()?;
    let mg = Multigrid::new(*op, cfg)?;
    let mut u = u0.clone();
    let report = mg.solve_in_place(u.values_mut(), b.values(), policy)?;
    Ok((u, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::{initial_condition, StencilOrder};

    fn shifted(dim: usize, n: usize, order: StencilOrder, shift: f64) -> ShiftedOperator {
        let g = Grid::unit(dim, n).unwrap();
        ShiftedOperator::new(HeatOperator::new(g, 1.0, order), shift)
    }

    fn pseudo_random(grid: Grid, seed: u64) -> GridFunction {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let vals = (0..grid.len())
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            })
            .collect();
        GridFunction::from_values(grid, vals).unwrap()
    }

    const SMOOTHERS: [Smoother; 3] = [
        Smoother::WeightedJacobi { omega: 2.0 / 3.0 },
        Smoother::GaussSeidelLex,
        Smoother::JorRedBlack { omega: 2.0 / 3.0 },
    ];

    #[test]
    fn smoothers_fix_the_exact_solution() {
        for (dim, n) in [(1, 32), (2, 16), (3, 8)] {
            for order in [StencilOrder::Second, StencilOrder::Fourth] {
                let op = shifted(dim, n, order, 0.01);
                let w = pseudo_random(*op.grid(), 7);
                let b = op.apply(&w).unwrap();
                for sm in SMOOTHERS {
                    let cfg = MgConfig::with_smoother(sm);
                    let out = smooth(&op, &w, &b, &cfg, 3).unwrap();
                    let scale = w.max_norm() * (1.0 + 0.01 * op.heat.diagonal_at(0).abs());
                    assert!(out.max_diff(&w) <= 10.0 * f64::EPSILON * scale * 10.0, "{sm:?}");
                }
            }
        }
    }

    #[test]
    fn zero_stays_zero() {
        let op = shifted(2, 16, StencilOrder::Second, 0.1);
        let z = GridFunction::zeros(*op.grid());
        for sm in SMOOTHERS {
            let cfg = MgConfig::with_smoother(sm);
            assert_eq!(smooth(&op, &z, &z, &cfg, 2).unwrap(), z);
            assert_eq!(v_cycle(&op, &z, &z, &cfg).unwrap(), z);
        }
    }

    #[test]
    fn jacobi_damps_highest_mode_like_dense_iteration_matrix() {
        let sigma = 1e3;
        let op = shifted(1, 8, StencilOrder::Second, sigma);
        let n = op.grid().len();
        let omega = 2.0 / 3.0;
        let a = op.to_dense();
        let dinv = DMatrix::from_diagonal(&DVector::from_iterator(n, (0..n).map(|i| 1.0 / a[(i, i)])));
        let iter = DMatrix::identity(n, n) - dinv * &a * omega;
        let mode = initial_condition(op.grid(), 7);
        let zero = GridFunction::zeros(*op.grid());
        // error propagation with b = 0: e ← (I − ωD⁻¹S) e
        let out = smooth(&op, &mode, &zero, &MgConfig::with_smoother(Smoother::jacobi()), 1).unwrap();
        let oracle = &iter * DVector::from_column_slice(mode.values());
        for i in 0..n {
            assert!((out.values()[i] - oracle[i]).abs() < 1e-13);
        }
        let dx = op.grid().dx();
        let diag = 1.0 + 2.0 * sigma / (dx * dx);
        let factor = (1.0 - omega * (sigma / (dx * dx)) * 2.0 * (1.0 - (7.0 * std::f64::consts::PI * dx).cos()) / diag
            - omega / diag)
            .abs();
        let measured = out.max_norm() / mode.max_norm();
        assert!((measured - factor).abs() < 1e-12, "{measured} vs {factor}");
    }

    #[test]
    fn v_cycle_reduces_residual_quickly() {
        // σν/Δx² = 1e4 on N = 64
        let n = 64;
        let dx = 1.0 / n as f64;
        let op = shifted(1, n, StencilOrder::Second, 1e4 * dx * dx);
        let cfg = MgConfig::with_smoother(Smoother::GaussSeidelLex);
        let mg = Multigrid::new(op, &cfg).unwrap();
        let b = pseudo_random(*op.grid(), 3);
        let mut u = vec![0.0; b.len()];
        let mut prev = mg.relative_residual(&u, b.values());
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            mg.v_cycle(&mut u, b.values());
            let r = mg.relative_residual(&u, b.values());
            worst = worst.max(r / prev);
            prev = r;
        }
        // measured baseline: 0.064 per cycle
        assert!(worst <= 0.2, "worst factor {worst}");
    }

    #[test]
    fn identity_system_returns_rhs() {
        let op = shifted(1, 16, StencilOrder::Second, 0.0);
        let b = pseudo_random(*op.grid(), 11);
        let cfg = MgConfig::with_smoother(Smoother::GaussSeidelLex);
        let u = v_cycle(&op, &GridFunction::zeros(*op.grid()), &b, &cfg).unwrap();
        assert!(u.max_diff(&b) < 1e-15);
    }

    #[test]
    fn exact_input_is_a_fixed_point_of_the_cycle() {
        for sm in SMOOTHERS {
            let op = shifted(2, 16, StencilOrder::Fourth, 0.05);
            let w = pseudo_random(*op.grid(), 5);
            let b = op.apply(&w).unwrap();
            let cfg = MgConfig::with_smoother(sm);
            let u = v_cycle(&op, &w, &b, &cfg).unwrap();
            assert!(u.max_diff(&w) <= 1e-12, "{sm:?}: {}", u.max_diff(&w));
        }
    }

    #[test]
    fn solve_policies() {
        let op = shifted(1, 32, StencilOrder::Second, 0.01);
        let w = pseudo_random(*op.grid(), 2);
        let b = op.apply(&w).unwrap();
        let cfg = MgConfig::default();
        let (_, rep) = solve(&op, &w, &b, &cfg, &SolvePolicy::FULL).unwrap();
        assert_eq!(rep.cycles, 0);
        assert_eq!(rep.status, SolveStatus::Converged);
        let zero = GridFunction::zeros(*op.grid());
        let (_, rep) = solve(&op, &zero, &b, &cfg, &SolvePolicy::FixedCycles(2)).unwrap();
        assert_eq!(rep.cycles, 2);
        let (u, rep) = solve(&op, &zero, &b, &cfg, &SolvePolicy::FULL).unwrap();
        assert!(rep.cycles > 0 && rep.cycles < MAX_CYCLES);
        assert!(u.max_diff(&w) < 1e-10);
        assert!(SolvePolicy::FixedCycles(0).validate().is_err());
        assert!(SolvePolicy::ToTolerance { tol: 1e-9, stall_factor: 1.5 }.validate().is_err());
    }

    #[test]
    fn non_coarsenable_grid_is_rejected() {
        let op = shifted(1, 4, StencilOrder::Second, 0.1);
        let cfg = MgConfig {
            coarsest_n: 8,
            ..MgConfig::default()
        };
        assert!(matches!(Multigrid::new(op, &cfg), Err(Error::NotCoarsenable { .. })));
    }

    #[test]
    fn three_d_fourth_order_full_solve_converges() {
        let op = shifted(3, 32, StencilOrder::Fourth, 1.0 / 96.0 / 3.0);
        let cfg = MgConfig::with_smoother(Smoother::jor_red_black());
        let b = initial_condition(op.grid(), 1);
        let (_, rep) = solve(&op, &GridFunction::zeros(*op.grid()), &b, &cfg, &SolvePolicy::FULL).unwrap();
        // measured baseline: 16 cycles
        assert!(rep.cycles <= 24, "{rep:?}");
    }
}
