//! Multilevel SDC: a space-time level hierarchy with FAS coupling.
//!
//! Level 0 is the finest. Coarser levels may halve the grid, drop nodes
//! (nested uniform sets) and lower the stencil order. States move down by
//! pointwise selection in time and injection in space, and corrections move
//! up by Lagrange interpolation in time and linear or cubic interpolation in
//! space.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::heat::{Grid, GridFunction, HeatOperator, StencilOrder};
use crate::multigrid::{MgConfig, SolvePolicy};
use crate::quadrature::{time_interpolation, time_restriction, QuadratureTable};
use crate::sdc::{Iteration, NodeStates, SweepConfig, SweepStats, Sweeper};
use crate::transfer;

/// One rung of the hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub op: HeatOperator,
    pub table: QuadratureTable,
    pub mg: MgConfig,
    pub policy: SolvePolicy,
    /// Order (2 or 4) of the spatial interpolation into this level.
    pub interp_order: usize,
}

impl Level {
    pub fn new(
        grid: Grid,
        nu: f64,
        order: StencilOrder,
        substeps: usize,
        mg: MgConfig,
        policy: SolvePolicy,
        interp_order: usize,
    ) -> Result<Self> {
        if interp_order != 2 && interp_order != 4 {
            return Err(Error::Config(format!("interpolation order {interp_order} not in {{2, 4}}")));
        }
        Ok(Self {
            op: HeatOperator::new(grid, nu, order),
            table: QuadratureTable::uniform(substeps)?,
            mg,
            policy,
            interp_order,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.op.grid
    }
}

/// Transfer data between level `l` and `l + 1`.
#[derive(Debug, Clone)]
struct LevelPair {
    /// Fine node index for each coarse node.
    selection: Vec<usize>,
    /// `(M_f + 1) × (M_c + 1)` Lagrange interpolation.
    p_time: DMatrix<f64>,
    fine_grid: Grid,
    coarse_grid: Grid,
    interp_order: usize,
}

impl LevelPair {
    fn new(fine: &Level, coarse: &Level) -> Result<Self> {
        let (fg, cg) = (*fine.grid(), *coarse.grid());
        if fg.dim() != cg.dim() || fg.length() != cg.length() || (cg.n() != fg.n() && 2 * cg.n() != fg.n()) {
            return Err(Error::InvalidHierarchy(format!(
                "grid {cg} is not {fg} or its factor-2 coarsening"
            )));
        }
        if coarse.op.order.as_usize() > fine.op.order.as_usize() {
            return Err(Error::InvalidHierarchy("coarse stencil order exceeds fine order".into()));
        }
        if coarse.op.nu != fine.op.nu {
            return Err(Error::InvalidHierarchy("levels must share the diffusion coefficient".into()));
        }
        if coarse.table.substeps() > fine.table.substeps() {
            return Err(Error::InvalidHierarchy("coarse level has more nodes than fine level".into()));
        }
        let r = time_restriction(&fine.table.nodes, &coarse.table.nodes)?;
        let selection = (0..r.nrows())
            .map(|mc| (0..r.ncols()).find(|&mf| r[(mc, mf)] == 1.0).expect("selection row"))
            .collect();
        Ok(Self {
            selection,
            p_time: time_interpolation(&coarse.table.nodes, &fine.table.nodes)?,
            fine_grid: fg,
            coarse_grid: cg,
            interp_order: fine.interp_order,
        })
    }

    fn inject(&self, u: &GridFunction) -> GridFunction {
        transfer::inject(u, self.coarse_grid).expect("validated pair")
    }

    fn interpolate(&self, u: &GridFunction) -> GridFunction {
        transfer::interpolate(u, self.fine_grid, self.interp_order).expect("validated pair")
    }

    /// Time interpolation of coarse node values onto fine node `mf`.
    fn time_combine(&self, coarse: &[GridFunction], mf: usize) -> GridFunction {
        let row = self.p_time.row(mf);
        if let Some(mc) = (0..row.len()).find(|&j| row[j] == 1.0) {
            if row.iter().filter(|&&w| w != 0.0).count() == 1 {
                return coarse[mc].clone();
            }
        }
        let mut out = GridFunction::zeros(self.coarse_grid);
        for (mc, &w) in row.iter().enumerate() {
            if w != 0.0 {
                out.axpy(w, &coarse[mc]);
            }
        }
        out
    }
}

/// Per-level iterate of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct MlState {
    pub states: Vec<NodeStates>,
    /// Initial value on each level.
    pub y0: Vec<GridFunction>,
    /// FAS terms; `None` on the finest level.
    pub tau: Vec<Option<Vec<GridFunction>>>,
}

impl MlState {
    pub fn fine(&self) -> &NodeStates {
        &self.states[0]
    }

    pub fn fine_final(&self) -> &GridFunction {
        self.states[0].last()
    }
}

/// Hooks invoked around the coarsest sweep of an iteration.
pub trait CoarseExchange {
    /// May replace the coarsest initial value before it is swept.
    fn receive(&mut self, _y0: &mut GridFunction) -> Result<()> {
        Ok(())
    }

    /// Called with the coarsest final-node value after its sweep.
    fn send(&mut self, _value: &GridFunction) -> Result<()> {
        Ok(())
    }
}

/// No communication (serial MLSDC).
#[derive(Debug, Clone, Copy, Default)]
pub struct NoExchange;

impl CoarseExchange for NoExchange {}

/// Restricted fine states saved on the way down, used by the coarse correction.
pub type Restricted = Vec<Option<NodeStates>>;

/// The level hierarchy with one sweeper per level for a fixed step size.
#[derive(Debug)]
pub struct Hierarchy {
    levels: Vec<Level>,
    sweepers: Vec<Sweeper>,
    pairs: Vec<LevelPair>,
}

impl Hierarchy {
    pub fn new(levels: Vec<Level>, dt: f64) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidHierarchy("at least one level required".into()));
        }
        let pairs = levels
            .windows(2)
            .map(|w| LevelPair::new(&w[0], &w[1]))
            .collect::<Result<Vec<_>>>()?;
        let sweepers = levels
            .iter()
            .map(|l| Sweeper::new(SweepConfig::new(l.op, dt, l.policy, l.mg), l.table.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            levels,
            sweepers,
            pairs,
        })
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn coarsest(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, l: usize) -> &Level {
        &self.levels[l]
    }

    pub fn sweeper(&self, l: usize) -> &Sweeper {
        &self.sweepers[l]
    }

    pub fn dt(&self) -> f64 {
        self.sweepers[0].dt()
    }

    /// Injects a level-`l` grid function onto level `l + 1`.
    pub fn restrict_value(&self, l: usize, u: &GridFunction) -> GridFunction {
        self.pairs[l].inject(u)
    }

    /// Spreads `u0` over all nodes of all levels.
    pub fn spread(&self, u0: &GridFunction) -> Result<MlState> {
        u0.check_grid(self.levels[0].grid())?;
        let mut y0 = vec![u0.clone()];
        for l in 0..self.pairs.len() {
            let next = self.restrict_value(l, &y0[l]);
            y0.push(next);
        }
        let states = y0
            .iter()
            .zip(&self.sweepers)
            .map(|(v, s)| s.spread(v))
            .collect::<Result<_>>()?;
        Ok(MlState {
            states,
            y0,
            tau: vec![None; self.depth()],
        })
    }

    /// Time selection plus spatial injection of level-`l` states onto `l + 1`.
    pub fn restrict_state(&self, l: usize, fine: &NodeStates) -> Result<NodeStates> {
        let pair = &self.pairs[l];
        let y = pair.selection.iter().map(|&mf| pair.inject(&fine.y[mf])).collect();
        NodeStates::from_values(&self.levels[l + 1].op, y)
    }

    /// FAS term for level `l + 1`:
    /// `R(Δt Q_f F_f + τ_f) − Δt Q_c F_c(R Y_f)`.
    pub fn compute_fas(
        &self,
        l: usize,
        fine: &NodeStates,
        restricted: &NodeStates,
        fine_tau: Option<&[GridFunction]>,
    ) -> Vec<GridFunction> {
        let pair = &self.pairs[l];
        let fine_int = self.sweepers[l].integrate(fine);
        let coarse_int = self.sweepers[l + 1].integrate(restricted);
        pair.selection
            .iter()
            .zip(coarse_int)
            .map(|(&mf, ci)| {
                let mut v = fine_int[mf].clone();
                if let Some(t) = fine_tau {
                    v.axpy(1.0, &t[mf]);
                }
                let mut r = pair.inject(&v);
                r.axpy(-1.0, &ci);
                r
            })
            .collect()
    }

    /// `Y_f ← Y_f + P(Y_c^new − Y_c^old)` on all nodes, cache refreshed.
    pub fn coarse_correction(
        &self,
        l: usize,
        fine: &mut NodeStates,
        old: &NodeStates,
        new: &NodeStates,
    ) -> Result<()> {
        let pair = &self.pairs[l];
        if old.len() != new.len() || old.len() != pair.selection.len() || fine.len() != pair.p_time.nrows() {
            return Err(Error::InvalidHierarchy("coarse correction shape mismatch".into()));
        }
        for mf in 0..fine.len() {
            let pn = pair.interpolate(&pair.time_combine(&new.y, mf));
            let po = pair.interpolate(&pair.time_combine(&old.y, mf));
            // P(new) + (fine − P(old)) is exact when the levels coincide
            let y = &mut fine.y[mf];
            for ((v, n), o) in y.values_mut().iter_mut().zip(pn.values()).zip(po.values()) {
                *v = n + (*v - o);
            }
        }
        fine.refresh(&self.levels[l].op);
        Ok(())
    }

    /// `y0_f ← y0_f + P(y0_c − R y0_f)`; a no-op while the coarse initial
    /// value is the restriction of the fine one.
    pub fn correct_initial_value(&self, ml: &mut MlState, l: usize) {
        let pair = &self.pairs[l];
        let mut d = ml.y0[l + 1].clone();
        let r = pair.inject(&ml.y0[l]);
        if d == r {
            return;
        }
        for (v, w) in d.values_mut().iter_mut().zip(r.values()) {
            *v -= w;
        }
        let p = pair.interpolate(&d);
        for (v, w) in ml.y0[l].values_mut().iter_mut().zip(p.values()) {
            *v += w;
        }
    }

    /// Down pass: restrict every level onto the next and set its FAS term.
    /// Returns the restricted states for the up pass.
    pub fn down(&self, ml: &mut MlState) -> Result<Restricted> {
        let mut old = vec![None; self.depth()];
        for l in 0..self.pairs.len() {
            let r = self.restrict_state(l, &ml.states[l])?;
            let tau = self.compute_fas(l, &ml.states[l], &r, ml.tau[l].as_deref());
            ml.tau[l + 1] = Some(tau);
            ml.states[l + 1] = r.clone();
            old[l + 1] = Some(r);
        }
        Ok(old)
    }

    /// One sweep on level `l` with its own initial value and FAS term.
    pub fn sweep_level(&self, ml: &mut MlState, l: usize) -> Result<SweepStats> {
        self.sweepers[l].sweep(&mut ml.states[l], &ml.y0[l], ml.tau[l].as_deref())
    }

    /// Up pass: coarse correction into each finer level, optionally followed
    /// by one sweep there. Returns the sweep work per level.
    pub fn up(&self, ml: &mut MlState, old: &Restricted, sweep: bool) -> Result<Vec<SweepStats>> {
        let mut stats = vec![SweepStats::default(); self.depth()];
        for l in (0..self.pairs.len()).rev() {
            let o = old[l + 1].as_ref().expect("down pass ran");
            let (finer, coarser) = ml.states.split_at_mut(l + 1);
            self.coarse_correction(l, &mut finer[l], o, &coarser[0])?;
            self.correct_initial_value(ml, l);
            if sweep {
                stats[l] = self.sweep_level(ml, l)?;
            }
        }
        Ok(stats)
    }

    /// One MLSDC iteration: down pass, coarsest sweep, up pass with sweeps.
    pub fn iteration(&self, ml: &mut MlState, comm: &mut dyn CoarseExchange) -> Result<Vec<SweepStats>> {
        let old = self.down(ml)?;
        let c = self.coarsest();
        comm.receive(&mut ml.y0[c])?;
        let coarse = self.sweep_level(ml, c)?;
        comm.send(ml.states[c].last())?;
        let mut stats = self.up(ml, &old, true)?;
        stats[c] = coarse;
        Ok(stats)
    }

    /// Residual on level `l` including its FAS term.
    pub fn residual(&self, ml: &MlState, l: usize) -> f64 {
        self.sweepers[l].residual(&ml.states[l], &ml.y0[l], ml.tau[l].as_deref())
    }

    /// Fine-level residual.
    pub fn fine_residual(&self, ml: &MlState) -> f64 {
        self.residual(ml, 0)
    }
}

/// Free-function forms of the level operations on a two-level slice.
pub fn restrict_state(h: &Hierarchy, l: usize, fine: &NodeStates) -> Result<NodeStates> {
    h.restrict_state(l, fine)
}

pub fn compute_fas(h: &Hierarchy, l: usize, fine: &NodeStates, restricted: &NodeStates) -> Vec<GridFunction> {
    h.compute_fas(l, fine, restricted, None)
}

pub fn coarse_correction(
    h: &Hierarchy,
    l: usize,
    fine: &mut NodeStates,
    old: &NodeStates,
    new: &NodeStates,
) -> Result<()> {
    h.coarse_correction(l, fine, old, new)
}

/// Runs one MLSDC iteration without communication.
pub fn mlsdc_iteration(h: &Hierarchy, ml: &mut MlState) -> Result<Vec<SweepStats>> {
    h.iteration(ml, &mut NoExchange)
}

/// Spreads `u0` over all levels and sets the FAS terms from the spread
/// state. Returns the restricted states for the first up pass.
pub fn initialize_parts(h: &Hierarchy, u0: &GridFunction) -> Result<(MlState, Restricted)> {
    let mut ml = h.spread(u0)?;
    let old = h.down(&mut ml)?;
    Ok((ml, old))
}

/// Initial iterate for one step: [`initialize_parts`], then
/// `coarse_sweeps` coarsest sweeps and an upward correction with one sweep
/// per finer level.
pub fn initialize(h: &Hierarchy, u0: &GridFunction, coarse_sweeps: usize) -> Result<(MlState, Vec<SweepStats>)> {
    let (mut ml, old) = initialize_parts(h, u0)?;
    let c = h.coarsest();
    let mut stats = vec![SweepStats::default(); h.depth()];
    for _ in 0..coarse_sweeps {
        stats[c] += h.sweep_level(&mut ml, c)?;
    }
    let up = h.up(&mut ml, &old, true)?;
    for (s, u) in stats.iter_mut().zip(&up[..c]) {
        *s += *u;
    }
    Ok((ml, stats))
}

/// Outcome of [`run_mlsdc`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlsdcRun {
    pub final_state: GridFunction,
    /// Fine residual after each iteration, per step.
    pub residuals: Vec<Vec<f64>>,
    pub iterations: Vec<usize>,
    /// V-cycles per level summed over the run.
    pub vcycles: Vec<usize>,
    pub unconverged_steps: Vec<usize>,
}

impl MlsdcRun {
    pub fn total_vcycles(&self) -> usize {
        self.vcycles.iter().sum()
    }
}

/// Serial MLSDC over `steps` steps of size `t_end / steps`.
pub fn run_mlsdc(levels: Vec<Level>, u0: &GridFunction, t_end: f64, steps: usize, stop: Iteration) -> Result<MlsdcRun> {
    if steps == 0 || stop.max_iter == 0 {
        return Err(Error::Config("steps and max_iter must be >= 1".into()));
    }
    let h = Hierarchy::new(levels, t_end / steps as f64)?;
    run_steps(&h, u0, steps, stop, |_, _, _| {})
}

/// Serial MLSDC with a per-iteration observer `(step, iteration, state)`.
pub fn run_steps(
    h: &Hierarchy,
    u0: &GridFunction,
    steps: usize,
    stop: Iteration,
    mut observe: impl FnMut(usize, usize, &MlState),
) -> Result<MlsdcRun> {
    let mut run = MlsdcRun {
        final_state: u0.clone(),
        residuals: Vec::with_capacity(steps),
        iterations: Vec::with_capacity(steps),
        vcycles: vec![0; h.depth()],
        unconverged_steps: Vec::new(),
    };
    let mut y0 = u0.clone();
    for step in 0..steps {
        let (mut ml, init) = initialize(h, &y0, 1)?;
        accumulate(&mut run.vcycles, &init);
        let mut history = Vec::new();
        let mut converged = false;
        for k in 1..=stop.max_iter {
            let stats = h.iteration(&mut ml, &mut NoExchange)?;
            accumulate(&mut run.vcycles, &stats);
            let r = h.fine_residual(&ml);
            history.push(r);
            observe(step, k, &ml);
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
        y0 = ml.fine_final().clone();
    }
    run.final_state = y0;
    Ok(run)
}

fn accumulate(total: &mut [usize], stats: &[SweepStats]) {
    for (t, s) in total.iter_mut().zip(stats) {
        *t += s.vcycles;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::initial_condition;
    use crate::multigrid::Smoother;
    use crate::sdc::collocation_solve;

    fn level(n: usize, order: StencilOrder, m: usize, policy: SolvePolicy) -> Level {
        Level::new(
            Grid::unit(1, n).unwrap(),
            1.0,
            order,
            m,
            MgConfig::with_smoother(Smoother::GaussSeidelLex),
            policy,
            2,
        )
        .unwrap()
    }

    fn two_level(dt: f64) -> Hierarchy {
        Hierarchy::new(
            vec![
                level(8, StencilOrder::Second, 2, SolvePolicy::FULL),
                level(4, StencilOrder::Second, 1, SolvePolicy::FULL),
            ],
            dt,
        )
        .unwrap()
    }

    #[test]
    fn identical_levels_restrict_to_themselves() {
        let l = level(8, StencilOrder::Second, 2, SolvePolicy::FULL);
        let h = Hierarchy::new(vec![l.clone(), l], 0.1).unwrap();
        let ml = h.spread(&initial_condition(&Grid::unit(1, 8).unwrap(), 1)).unwrap();
        let r = h.restrict_state(0, &ml.states[0]).unwrap();
        assert_eq!(r, ml.states[0]);
        let tau = h.compute_fas(0, &ml.states[0], &r, None);
        assert!(tau.iter().all(|t| t.values().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn restriction_samples_the_coarse_mode() {
        let h = two_level(0.1);
        let fine = initial_condition(&Grid::unit(1, 8).unwrap(), 3);
        let ml = h.spread(&fine).unwrap();
        let r = h.restrict_state(0, &ml.states[0]).unwrap();
        let coarse = initial_condition(&Grid::unit(1, 4).unwrap(), 3);
        for y in &r.y {
            assert!(y.max_diff(&coarse) < 1e-15);
        }
        assert_eq!(r.cache_error(&h.level(1).op), 0.0);
        let tau = h.compute_fas(0, &ml.states[0], &r, None);
        assert!(tau[0].values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fas_makes_restricted_collocation_consistent() {
        let dt = 0.1;
        let h = two_level(dt);
        let fl = h.level(0);
        let cl = h.level(1);
        let u0 = GridFunction::from_fn(*fl.grid(), |x| x[0] * (1.0 - x[0]) * (2.0 + x[0]));
        let fine = collocation_solve(&fl.op, &fl.table, &u0, dt, None).unwrap();
        let restricted = h.restrict_state(0, &fine).unwrap();
        let tau = h.compute_fas(0, &fine, &restricted, None);
        let y0c = h.restrict_value(0, &u0);
        let coarse = collocation_solve(&cl.op, &cl.table, &y0c, dt, Some(&tau)).unwrap();
        for (a, b) in coarse.y.iter().zip(&restricted.y) {
            assert!(a.max_diff(b) < 1e-12, "{}", a.max_diff(b));
        }
    }

    #[test]
    fn zero_change_leaves_fine_untouched() {
        let h = two_level(0.1);
        let mut ml = h.spread(&initial_condition(&Grid::unit(1, 8).unwrap(), 1)).unwrap();
        let before = ml.states[0].clone();
        let r = h.restrict_state(0, &ml.states[0]).unwrap();
        h.coarse_correction(0, &mut ml.states[0], &r, &r).unwrap();
        assert_eq!(ml.states[0], before);
    }

    #[test]
    fn coarse_sine_correction_interpolates_to_the_fine_mode() {
        let err = |n: usize, order: usize| {
            let mut fine_level = level(2 * n, StencilOrder::Second, 1, SolvePolicy::FULL);
            fine_level.interp_order = order;
            let h = Hierarchy::new(vec![fine_level, level(n, StencilOrder::Second, 1, SolvePolicy::FULL)], 0.1).unwrap();
            let fg = *h.level(0).grid();
            let cg = *h.level(1).grid();
            let mut fine = h.sweeper(0).spread(&GridFunction::zeros(fg)).unwrap();
            let old = h.sweeper(1).spread(&GridFunction::zeros(cg)).unwrap();
            let new = h.sweeper(1).spread(&initial_condition(&cg, 1)).unwrap();
            h.coarse_correction(0, &mut fine, &old, &new).unwrap();
            fine.y[1].max_diff(&initial_condition(&fg, 1))
        };
        for (order, slope) in [(2, 1.9), (4, 3.7)] {
            let e: Vec<f64> = [8, 16, 32].iter().map(|&n| err(n, order)).collect();
            for w in e.windows(2) {
                assert!((w[0] / w[1]).log2() > slope, "order {order}: {e:?}");
            }
        }
    }

    #[test]
    fn one_level_iteration_is_a_plain_sweep() {
        let l = level(16, StencilOrder::Second, 2, SolvePolicy::FixedCycles(1));
        let h = Hierarchy::new(vec![l], 0.1).unwrap();
        let u0 = initial_condition(h.level(0).grid(), 1);
        let mut ml = h.spread(&u0).unwrap();
        let mut plain = ml.states[0].clone();
        mlsdc_iteration(&h, &mut ml).unwrap();
        h.sweeper(0).sweep(&mut plain, &u0, None).unwrap();
        assert_eq!(ml.states[0], plain);
    }

    #[test]
    fn identical_levels_equal_two_plain_sweeps() {
        let l = level(16, StencilOrder::Second, 2, SolvePolicy::FixedCycles(1));
        let h = Hierarchy::new(vec![l.clone(), l], 0.1).unwrap();
        let u0 = initial_condition(h.level(0).grid(), 1);
        let mut ml = h.spread(&u0).unwrap();
        let mut plain = ml.states[0].clone();
        for _ in 0..3 {
            mlsdc_iteration(&h, &mut ml).unwrap();
            h.sweeper(0).sweep(&mut plain, &u0, None).unwrap();
            h.sweeper(0).sweep(&mut plain, &u0, None).unwrap();
            assert_eq!(ml.states[0], plain);
        }
    }

    #[test]
    fn rejects_invalid_hierarchies() {
        let f = level(8, StencilOrder::Second, 2, SolvePolicy::FULL);
        let c = level(4, StencilOrder::Fourth, 1, SolvePolicy::FULL);
        assert!(Hierarchy::new(vec![f.clone(), c], 0.1).is_err());
        assert!(Hierarchy::new(vec![f.clone(), level(2, StencilOrder::Second, 1, SolvePolicy::FULL)], 0.1).is_err());
        assert!(Hierarchy::new(vec![f.clone(), level(4, StencilOrder::Second, 4, SolvePolicy::FULL)], 0.1).is_err());
        assert!(Hierarchy::new(vec![level(8, StencilOrder::Second, 3, SolvePolicy::FULL), level(4, StencilOrder::Second, 2, SolvePolicy::FULL)], 0.1).is_err());
        assert!(Hierarchy::new(vec![], 0.1).is_err());
    }

    #[test]
    fn mlsdc_converges_to_fine_collocation() {
        let dt = 0.05;
        let h = Hierarchy::new(
            vec![
                level(16, StencilOrder::Second, 4, SolvePolicy::FULL),
                level(8, StencilOrder::Second, 2, SolvePolicy::FULL),
                level(4, StencilOrder::Second, 1, SolvePolicy::FULL),
            ],
            dt,
        )
        .unwrap();
        let u0 = initial_condition(h.level(0).grid(), 1);
        let exact = collocation_solve(&h.level(0).op, &h.level(0).table, &u0, dt, None).unwrap();
        let (mut ml, _) = initialize(&h, &u0, 1).unwrap();
        for _ in 0..40 {
            mlsdc_iteration(&h, &mut ml).unwrap();
        }
        assert!(h.fine_residual(&ml) < 1e-10);
        assert!(ml.fine_final().max_diff(exact.last()) < 1e-11);
    }
}
