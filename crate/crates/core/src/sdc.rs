//! Single-level spectral deferred corrections for `y' = A y`.
//!
//! One time step of size `Δt` carries `M + 1` node values `Y = [y_0 … y_M]`
//! and the cached operator values `F = A Y`. A sweep performs `M` implicit
//! Euler sub-steps corrected by the spectral integral `Δt Q F`; its fixed
//! point is the collocation solution of `(I − Δt Q A) Y = Y_0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::heat::{GridFunction, HeatOperator};
use crate::multigrid::{MgConfig, Multigrid, ShiftedOperator, SolvePolicy, SolveStatus};
use crate::par;
use crate::quadrature::QuadratureTable;

/// Largest dense collocation system (total unknowns) `collocation_solve` builds.
pub const DENSE_LIMIT: usize = 4096;

/// Node values and their cached operator applications.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeStates {
    pub y: Vec<GridFunction>,
    pub f: Vec<GridFunction>,
}

impl NodeStates {
    /// Copies `y0` to all `nodes` nodes.
    pub fn spread(op: &HeatOperator, y0: &GridFunction, nodes: usize) -> Result<Self> {
        y0.check_grid(&op.grid)?;
        let f0 = crate::heat::apply_operator(op, y0)?;
        Ok(Self {
            y: vec![y0.clone(); nodes],
            f: vec![f0; nodes],
        })
    }

    pub fn from_values(op: &HeatOperator, y: Vec<GridFunction>) -> Result<Self> {
        let f = y
            .iter()
            .map(|v| crate::heat::apply_operator(op, v))
            .collect::<Result<_>>()?;
        Ok(Self { y, f })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn last(&self) -> &GridFunction {
        self.y.last().expect("non-empty node states")
    }

    /// Recomputes `f_m = A y_m` at node `m`.
    pub fn refresh_node(&mut self, op: &HeatOperator, m: usize) {
        op.apply_into(self.y[m].values(), self.f[m].values_mut());
    }

    pub fn refresh(&mut self, op: &HeatOperator) {
        for m in 0..self.len() {
            self.refresh_node(op, m);
        }
    }

    /// Largest deviation of the cache from `A y`.
    pub fn cache_error(&self, op: &HeatOperator) -> f64 {
        self.y
            .iter()
            .zip(&self.f)
            .map(|(y, f)| {
                let fresh = crate::heat::apply_operator(op, y).expect("same grid");
                fresh.max_diff(f)
            })
            .fold(0.0, f64::max)
    }
}

/// Parameters of one sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub op: HeatOperator,
    pub dt: f64,
    pub policy: SolvePolicy,
    pub mg: MgConfig,
}

impl SweepConfig {
    pub fn new(op: HeatOperator, dt: f64, policy: SolvePolicy, mg: MgConfig) -> Self {
        Self { op, dt, policy, mg }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt >= 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("time step {} must be >= 0", self.dt)));
        }
        self.policy.validate()?;
        self.mg.validate()
    }
}

/// Work done by one sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepStats {
    pub vcycles: usize,
    pub stalled_substeps: usize,
}

impl std::ops::AddAssign for SweepStats {
    fn add_assign(&mut self, o: Self) {
        self.vcycles += o.vcycles;
        self.stalled_substeps += o.stalled_substeps;
    }
}

/// Sweeper for a fixed operator, table and step size. Holds one multigrid
/// hierarchy per distinct sub-step shift.
#[derive(Debug)]
pub struct Sweeper {
    cfg: SweepConfig,
    table: QuadratureTable,
    solvers: Vec<(f64, Multigrid)>,
    solver_of: Vec<usize>,
}

impl Sweeper {
    pub fn new(cfg: SweepConfig, table: QuadratureTable) -> Result<Self> {
        cfg.validate()?;
        let mut solvers: Vec<(f64, Multigrid)> = Vec::new();
        let mut solver_of = Vec::with_capacity(table.substeps());
        for m in 1..=table.substeps() {
            let shift = cfg.dt * table.nodes.gamma(m);
            let idx = match solvers.iter().position(|(s, _)| *s == shift) {
                Some(i) => i,
                None => {
                    let mg = Multigrid::new(ShiftedOperator::new(cfg.op, shift), &cfg.mg)?;
                    solvers.push((shift, mg));
                    solvers.len() - 1
                }
            };
            solver_of.push(idx);
        }
        Ok(Self {
            cfg,
            table,
            solvers,
            solver_of,
        })
    }

    pub fn op(&self) -> &HeatOperator {
        &self.cfg.op
    }

    pub fn table(&self) -> &QuadratureTable {
        &self.table
    }

    pub fn dt(&self) -> f64 {
        self.cfg.dt
    }

    pub fn config(&self) -> &SweepConfig {
        &self.cfg
    }

    pub fn spread(&self, y0: &GridFunction) -> Result<NodeStates> {
        NodeStates::spread(&self.cfg.op, y0, self.table.nodes.len())
    }

    /// Node integrals `Δt (Q F)_m`.
    pub fn integrate(&self, states: &NodeStates) -> Vec<GridFunction> {
        let q = &self.table.q;
        (0..states.len())
            .map(|m| {
                let coeffs: Vec<f64> = (0..states.len()).map(|i| self.cfg.dt * q[(m, i)]).collect();
                combine(&states.f, &coeffs, None)
            })
            .collect()
    }

    /// One SDC sweep in place. Node 0 is reset to `y0`.
    pub fn sweep(
        &self,
        states: &mut NodeStates,
        y0: &GridFunction,
        tau: Option<&[GridFunction]>,
    ) -> Result<SweepStats> {
        let grid = self.cfg.op.grid;
        y0.check_grid(&grid)?;
        check_states(states, &self.table, tau)?;
        let nodes = states.len();
        let q = &self.table.q;
        let dt = self.cfg.dt;
        let old_f = states.f.clone();
        if states.y[0] != *y0 {
            states.y[0] = y0.clone();
            states.refresh_node(&self.cfg.op, 0);
        }
        let mut stats = SweepStats::default();
        let mut rhs = GridFunction::zeros(grid);
        for m in 0..nodes - 1 {
            let dtm = dt * self.table.nodes.gamma(m + 1);
            let coeffs: Vec<f64> = (0..nodes)
                .map(|i| {
                    let c = dt * (q[(m + 1, i)] - q[(m, i)]);
                    if i == m + 1 {
                        c - dtm
                    } else {
                        c
                    }
                })
                .collect();
            let tau_pair = tau.map(|t| (&t[m + 1], &t[m]));
            fill_rhs(rhs.values_mut(), &states.y[m], &old_f, &coeffs, tau_pair);

            let mg = &self.solvers[self.solver_of[m]].1;
            let report = mg
                .solve_in_place(states.y[m + 1].values_mut(), rhs.values(), &self.cfg.policy)
                .map_err(|e| Error::Substep {
                    substep: m,
                    source: Box::new(e),
                })?;
            stats.vcycles += report.cycles;
            if report.status == SolveStatus::Stalled {
                stats.stalled_substeps += 1;
            }
            states.refresh_node(&self.cfg.op, m + 1);
        }
        Ok(stats)
    }

    /// `max_m ‖y0 + (τ_m − τ_0) − y_m + Δt (Q F)_m‖_∞`.
    pub fn residual(&self, states: &NodeStates, y0: &GridFunction, tau: Option<&[GridFunction]>) -> f64 {
        let integrals = self.integrate(states);
        let mut worst: f64 = 0.0;
        for m in 1..states.len() {
            let y = states.y[m].values();
            let iq = integrals[m].values();
            let r = y0
                .values()
                .iter()
                .enumerate()
                .map(|(p, &v)| {
                    let t = tau.map_or(0.0, |t| t[m].values()[p] - t[0].values()[p]);
                    (v + t - y[p] + iq[p]).abs()
                })
                .fold(0.0, f64::max);
            worst = worst.max(r);
        }
        worst
    }
}

fn check_states(states: &NodeStates, table: &QuadratureTable, tau: Option<&[GridFunction]>) -> Result<()> {
    let nodes = table.nodes.len();
    if states.len() != nodes || states.f.len() != nodes {
        return Err(Error::InvalidHierarchy(format!(
            "expected {nodes} node states, got {}",
            states.len()
        )));
    }
    if let Some(t) = tau {
        if t.len() != nodes {
            return Err(Error::InvalidHierarchy(format!(
                "expected {nodes} correction terms, got {}",
                t.len()
            )));
        }
    }
    Ok(())
}

/// `Σ_i c_i x_i (+ base)`.
fn combine(xs: &[GridFunction], coeffs: &[f64], base: Option<&GridFunction>) -> GridFunction {
    let grid = *xs[0].grid();
    let mut out = match base {
        Some(b) => b.clone(),
        None => GridFunction::zeros(grid),
    };
    for (x, &c) in xs.iter().zip(coeffs) {
        if c != 0.0 {
            out.axpy(c, x);
        }
    }
    out
}

fn fill_rhs(
    out: &mut [f64],
    y_m: &GridFunction,
    f: &[GridFunction],
    coeffs: &[f64],
    tau: Option<(&GridFunction, &GridFunction)>,
) {
    let row = y_m.grid().interior();
    let y = y_m.values();
    par::for_each_chunk(out, row, |r, piece| {
        let base = r * row;
        for (j, v) in piece.iter_mut().enumerate() {
            let p = base + j;
            let mut acc = y[p];
            for (fi, &c) in f.iter().zip(coeffs) {
                acc += c * fi.values()[p];
            }
            if let Some((hi, lo)) = tau {
                acc += hi.values()[p] - lo.values()[p];
            }
            *v = acc;
        }
    });
}

/// Solves the collocation system `(I − Δt Q A) Y = Y_0 (+ τ − τ_0)` with a
/// dense LU factorization.
pub fn collocation_solve(
    op: &HeatOperator,
    table: &QuadratureTable,
    y0: &GridFunction,
    dt: f64,
    tau: Option<&[GridFunction]>,
) -> Result<NodeStates> {
    y0.check_grid(&op.grid)?;
    let nodes = table.nodes.len();
    let dof = op.grid.len();
    let unknowns = nodes * dof;
    if unknowns > DENSE_LIMIT {
        return Err(Error::SizeLimit {
            unknowns,
            limit: DENSE_LIMIT,
        });
    }
    let a = op.to_dense();
    let mut sys = DMatrix::<f64>::identity(unknowns, unknowns);
    let mut rhs = DVector::<f64>::zeros(unknowns);
    for m in 0..nodes {
        for i in 0..nodes {
            let c = dt * table.q[(m, i)];
            if c != 0.0 {
                let mut block = sys.view_mut((m * dof, i * dof), (dof, dof));
                block -= &a * c;
            }
        }
        for p in 0..dof {
            let t = tau.map_or(0.0, |t| t[m].values()[p] - t[0].values()[p]);
            rhs[m * dof + p] = y0.values()[p] + t;
        }
    }
    let lu = sys.lu();
    let sol = lu.solve(&rhs).ok_or(Error::Singular)?;
    let y = (0..nodes)
        .map(|m| GridFunction::from_values(op.grid, sol.rows(m * dof, dof).iter().copied().collect()))
        .collect::<Result<Vec<_>>>()?;
    NodeStates::from_values(op, y)
}

/// Free-function form of [`Sweeper::sweep`]; builds the solvers on each call.
pub fn sdc_sweep(
    states: &mut NodeStates,
    y0: &GridFunction,
    tau: Option<&[GridFunction]>,
    cfg: &SweepConfig,
    table: &QuadratureTable,
) -> Result<SweepStats> {
    Sweeper::new(*cfg, table.clone())?.sweep(states, y0, tau)
}

/// Free-function form of [`Sweeper::residual`].
pub fn residual(
    states: &NodeStates,
    y0: &GridFunction,
    tau: Option<&[GridFunction]>,
    table: &QuadratureTable,
    dt: f64,
) -> f64 {
    let mut r: f64 = 0.0;
    for m in 1..states.len() {
        let coeffs: Vec<f64> = (0..states.len()).map(|i| dt * table.q[(m, i)]).collect();
        let integral = combine(&states.f, &coeffs, None);
        for p in 0..y0.len() {
            let t = tau.map_or(0.0, |t| t[m].values()[p] - t[0].values()[p]);
            r = r.max((y0.values()[p] + t - states.y[m].values()[p] + integral.values()[p]).abs());
        }
    }
    r
}

/// Stopping rule for serial time stepping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Iteration {
    /// Residual tolerance; `0` runs exactly `max_iter` sweeps.
    pub tol: f64,
    pub max_iter: usize,
}

/// Outcome of [`run_sdc`].
#[derive(Debug, Clone, PartialEq)]
pub struct SdcRun {
    pub final_state: GridFunction,
    /// Residual after each sweep, per step.
    pub residuals: Vec<Vec<f64>>,
    /// V-cycles spent in each sweep, per step.
    pub vcycles_per_sweep: Vec<Vec<usize>>,
    pub iterations: Vec<usize>,
    pub vcycles: usize,
    /// Steps that reached `max_iter` above tolerance.
    pub unconverged_steps: Vec<usize>,
}

impl SdcRun {
    pub fn final_residual(&self) -> f64 {
        self.residuals
            .last()
            .and_then(|r| r.last())
            .copied()
            .unwrap_or(0.0)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals
            .iter()
            .filter_map(|r| r.last())
            .copied()
            .fold(0.0, f64::max)
    }
}

/// Integrates from `0` to `t_end` with `steps` SDC steps.
pub fn run_sdc(
    op: &HeatOperator,
    table: &QuadratureTable,
    u0: &GridFunction,
    t_end: f64,
    steps: usize,
    stop: Iteration,
    policy: SolvePolicy,
    mg: MgConfig,
) -> Result<SdcRun> {
    if steps == 0 {
        return Err(Error::Config("number of time steps must be >= 1".into()));
    }
    if stop.max_iter == 0 {
        return Err(Error::Config("max_iter must be >= 1".into()));
    }
    let dt = t_end / steps as f64;
    let sweeper = Sweeper::new(SweepConfig::new(*op, dt, policy, mg), table.clone())?;
    let mut y0 = u0.clone();
    let mut run = SdcRun {
        final_state: u0.clone(),
        residuals: Vec::with_capacity(steps),
        vcycles_per_sweep: Vec::with_capacity(steps),
        iterations: Vec::with_capacity(steps),
        vcycles: 0,
        unconverged_steps: Vec::new(),
    };
    for step in 0..steps {
        let mut states = sweeper.spread(&y0)?;
        let mut history = Vec::new();
        let mut cycles = Vec::new();
        let mut converged = false;
        for _ in 0..stop.max_iter {
            let stats = sweeper.sweep(&mut states, &y0, None)?;
            cycles.push(stats.vcycles);
            run.vcycles += stats.vcycles;
            let r = sweeper.residual(&states, &y0, None);
            history.push(r);
            if stop.tol > 0.0 && r <= stop.tol {
                converged = true;
                break;
            }
        }
        if stop.tol > 0.0 && !converged {
            run.unconverged_steps.push(step);
        }
        run.iterations.push(history.len());
        run.residuals.push(history);
        run.vcycles_per_sweep.push(cycles);
        y0 = states.last().clone();
    }
    run.final_state = y0;
    Ok(run)
}
