//! Drivers for the six experiments.

use crate::analysis::{damping_scan, log_grid, DampingScan};
use crate::heat::{exact_ode, exact_pde, initial_condition, GridFunction};
use crate::hierarchy::{run_mlsdc, Level};
use crate::par;
use crate::pfasst::{pfasst_run, PfasstConfig, PfasstRun, TraceRow};
use crate::quadrature::QuadratureTable;
use crate::sdc::{run_sdc, Iteration, SdcRun};

use super::config::{Experiment, ExperimentConfig, Method, Problem};
use super::table::{num, Table};
use super::HarnessError;

/// Everything an experiment produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub table: Table,
    /// Some run stopped at `max_iter` above tolerance.
    pub unconverged: bool,
    /// Human-readable lines for stderr.
    pub summary: Vec<String>,
    pub trace: Option<Vec<TraceRow>>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    match cfg.experiment {
        Experiment::Damping => damping_outcome(cfg),
        Experiment::OrderStudy => order_outcome(cfg),
        Experiment::VcycleStudy => vcycle_outcome(cfg),
        Experiment::WeakScaling => weak_outcome(cfg),
        Experiment::Strong3d => strong_outcome(cfg),
        Experiment::SingleRun => single_outcome(cfg),
    }
}

/// Final-time errors against the semi-discrete and continuous solutions.
/// The first is `None` where no closed form exists.
pub fn errors(problem: &Problem, fine: &Level, u: &GridFunction) -> (Option<f64>, f64) {
    let ode = exact_ode(&fine.op, problem.k, problem.t_end).ok().map(|e| u.max_diff(&e));
    let pde = u.max_diff(&exact_pde(fine.grid(), problem.k, problem.nu, problem.t_end));
    (ode, pde)
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn status(converged: bool) -> String {
    if converged { "converged" } else { "unconverged" }.to_string()
}

/// First iteration (1-based) whose error is within `factor` of the last one.
pub fn iterations_to_floor(errors: &[f64], factor: f64) -> Option<usize> {
    let floor = *errors.last()?;
    errors.iter().position(|&e| e <= factor * floor).map(|i| i + 1)
}

pub fn damping(cfg: &ExperimentConfig) -> Result<Vec<(usize, DampingScan)>, HarnessError> {
    let grid = log_grid(cfg.z_min, cfg.z_max, cfg.points);
    cfg.orders
        .iter()
        .map(|&m| Ok((m, damping_scan(&QuadratureTable::uniform(m)?, &grid)?)))
        .collect()
}

fn damping_outcome(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let mut table = Table::new(&["order", "lambda_dt", "damping"]);
    let mut summary = Vec::new();
    for (m, scan) in damping(cfg)? {
        for &(z, rho) in &scan.samples {
            table.push(vec![m.to_string(), num(z), num(rho)]);
        }
        if let Some((z, rho)) = scan.peak() {
            summary.push(format!("order {m}: peak damping {rho:.4} at lambda*dt = {z:.4}"));
        }
    }
    Ok(Outcome { table, unconverged: false, summary, trace: None })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderRow {
    pub order: usize,
    pub steps: usize,
    pub ode_error: Option<f64>,
    pub pde_error: f64,
    /// Largest final residual over all steps.
    pub residual: f64,
    pub converged: bool,
}

pub fn order_study(cfg: &ExperimentConfig) -> Result<Vec<OrderRow>, HarnessError> {
    let p = cfg.problem;
    let fine = single_level(cfg, cfg.method.stencil[0], 1)?;
    let u0 = initial_condition(fine.grid(), p.k);
    let jobs: Vec<(usize, usize)> = cfg
        .orders
        .iter()
        .flat_map(|&m| (cfg.min_log2_steps..=cfg.max_log2_steps).map(move |e| (m, 1usize << e)))
        .collect();
    let runs = par::map(&jobs, |&(m, steps)| -> Result<OrderRow, HarnessError> {
        let table = QuadratureTable::uniform(m)?;
        let run = run_sdc(&fine.op, &table, &u0, p.t_end, steps, cfg.method.stop, cfg.method.policy, cfg.method.mg)?;
        let (ode_error, pde_error) = errors(&p, &fine, &run.final_state);
        Ok(OrderRow {
            order: m,
            steps,
            ode_error,
            pde_error,
            residual: run.max_residual(),
            converged: run.unconverged_steps.is_empty(),
        })
    });
    runs.into_iter().collect()
}

/// Observed orders `log2(e(N) / e(2N))` between consecutive step counts of
/// one order, skipping pairs where either ODE error is at or below `floor`.
pub fn pairwise_slopes(rows: &[OrderRow], order: usize, floor: f64) -> Vec<(usize, f64)> {
    let pts: Vec<(usize, f64)> = rows
        .iter()
        .filter(|r| r.order == order)
        .filter_map(|r| r.ode_error.map(|e| (r.steps, e)))
        .collect();
    pts.windows(2)
        .filter(|w| w[1].0 == 2 * w[0].0 && w[0].1 > floor && w[1].1 > floor)
        .map(|w| (w[0].0, (w[0].1 / w[1].1).log2()))
        .collect()
}

/// Slope of the finest pair above `floor`, the asymptotic order estimate.
pub fn asymptotic_slope(rows: &[OrderRow], order: usize, floor: f64) -> Option<f64> {
    pairwise_slopes(rows, order, floor).last().map(|p| p.1)
}

/// ODE errors below this carry accumulated iteration error.
pub const SLOPE_FLOOR: f64 = 1e-9;

fn order_outcome(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let rows = order_study(cfg)?;
    let mut table = Table::new(&["order", "n_t", "ode_error", "pde_error", "residual", "status"]);
    for r in &rows {
        table.push(vec![
            r.order.to_string(),
            r.steps.to_string(),
            opt(r.ode_error),
            num(r.pde_error),
            num(r.residual),
            status(r.converged),
        ]);
    }
    let mut summary = Vec::new();
    for &m in &cfg.orders {
        if let Some(s) = asymptotic_slope(&rows, m, SLOPE_FLOOR) {
            summary.push(format!("order {m}: observed ODE-error order {s:.2} (finest pair above {SLOPE_FLOOR:e})"));
        }
    }
    Ok(Outcome {
        unconverged: rows.iter().any(|r| !r.converged),
        table,
        summary,
        trace: None,
    })
}

fn single_level(cfg: &ExperimentConfig, stencil: usize, nodes: usize) -> Result<Level, HarnessError> {
    let m = Method {
        levels: 1,
        nodes: vec![nodes],
        stencil: vec![stencil],
        ..cfg.method.clone()
    };
    Ok(m.build_levels(&cfg.problem)?.remove(0))
}

/// Per-iteration errors and residual of the last rank of a PFASST run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRow {
    /// V-cycles per solve (vcycle-study) or `N` (weak-scaling).
    pub group: usize,
    pub iter: usize,
    pub ode_error: Option<f64>,
    pub pde_error: f64,
    pub residual: f64,
}

fn pfasst_history(
    problem: &Problem,
    method: &Method,
    ranks: usize,
    cfg: &ExperimentConfig,
    group: usize,
) -> Result<Vec<IterRow>, HarnessError> {
    let levels = method.build_levels(problem)?;
    let fine = levels[0].clone();
    let u0 = initial_condition(fine.grid(), problem.k);
    let mut pc = PfasstConfig::new(ranks, Iteration { tol: 0.0, max_iter: method.stop.max_iter });
    pc.executor = cfg.executor;
    pc.record_history = true;
    let run = pfasst_run(levels, &u0, problem.t_end, &pc)?;
    let last = run.blocks.last().expect("one block").last();
    Ok(last
        .history
        .iter()
        .zip(&last.residuals)
        .enumerate()
        .map(|(i, (u, &residual))| {
            let (ode_error, pde_error) = errors(problem, &fine, u);
            IterRow { group, iter: i + 1, ode_error, pde_error, residual }
        })
        .collect())
}

fn iter_table(first: &'static str, rows: &[IterRow]) -> Table {
    let mut table = Table::new(&[first, "iter", "ode_error", "pde_error", "residual"]);
    for r in rows {
        table.push(vec![
            r.group.to_string(),
            r.iter.to_string(),
            opt(r.ode_error),
            num(r.pde_error),
            num(r.residual),
        ]);
    }
    table
}

pub fn vcycle_study(cfg: &ExperimentConfig) -> Result<Vec<IterRow>, HarnessError> {
    let runs = par::map(&cfg.vcycle_list, |&v| {
        pfasst_history(&cfg.problem, &cfg.method_with_cycles(v), cfg.ranks, cfg, v)
    });
    Ok(runs.into_iter().collect::<Result<Vec<_>, _>>()?.concat())
}

fn vcycle_outcome(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let rows = vcycle_study(cfg)?;
    let summary = cfg
        .vcycle_list
        .iter()
        .filter_map(|&v| rows.iter().rfind(|r| r.group == v))
        .map(|r| format!("{} V-cycles: final pde error {:.3e}, residual {:.3e}", r.group, r.pde_error, r.residual))
        .collect();
    Ok(Outcome { table: iter_table("vcycles", &rows), unconverged: false, summary, trace: None })
}

pub fn weak_scaling(cfg: &ExperimentConfig) -> Result<Vec<IterRow>, HarnessError> {
    let runs = par::map(&cfg.sizes, |&n| pfasst_history(&cfg.problem.with_n(n), &cfg.method, n, cfg, n));
    Ok(runs.into_iter().collect::<Result<Vec<_>, _>>()?.concat())
}

/// `(N, floor, iteration reaching it)` from the PDE errors of each size.
pub fn weak_floors(rows: &[IterRow], sizes: &[usize], factor: f64) -> Vec<(usize, f64, Option<usize>)> {
    sizes
        .iter()
        .map(|&n| {
            let e: Vec<f64> = rows.iter().filter(|r| r.group == n).map(|r| r.pde_error).collect();
            (n, e.last().copied().unwrap_or(f64::NAN), iterations_to_floor(&e, factor))
        })
        .collect()
}

fn weak_outcome(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let rows = weak_scaling(cfg)?;
    let summary = weak_floors(&rows, &cfg.sizes, cfg.floor_factor)
        .into_iter()
        .map(|(n, floor, k)| match k {
            Some(k) => format!("N = {n}: floor {floor:.3e} reached at iteration {k}"),
            None => format!("N = {n}: no iterations"),
        })
        .collect();
    Ok(Outcome { table: iter_table("n", &rows), unconverged: false, summary, trace: None })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Strong3d {
    pub pfasst: PfasstRun,
    pub pfasst_error: f64,
    pub isdc: SdcRun,
    pub isdc_error: f64,
}

pub fn strong_3d(cfg: &ExperimentConfig) -> Result<Strong3d, HarnessError> {
    let p = cfg.problem;
    let levels = cfg.method.build_levels(&p)?;
    let fine = levels[0].clone();
    let u0 = initial_condition(fine.grid(), p.k);
    let mut pc = PfasstConfig::new(cfg.ranks, cfg.method.stop);
    pc.blocks = cfg.steps / cfg.ranks;
    pc.executor = cfg.executor;
    let pfasst = pfasst_run(levels, &u0, p.t_end, &pc)?;
    let isdc = run_sdc(&fine.op, &fine.table, &u0, p.t_end, cfg.steps, cfg.method.stop, fine.policy, fine.mg)?;
    let exact = exact_pde(fine.grid(), p.k, p.nu, p.t_end);
    Ok(Strong3d {
        pfasst_error: pfasst.final_state.max_diff(&exact),
        isdc_error: isdc.final_state.max_diff(&exact),
        pfasst,
        isdc,
    })
}

fn strong_outcome(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let s = strong_3d(cfg)?;
    let mut table = Table::new(&["method", "block", "rank", "iterations", "vcycles", "residual", "pde_error", "status"]);
    let blocks = s.pfasst.blocks.len();
    for (b, block) in s.pfasst.blocks.iter().enumerate() {
        for r in &block.ranks {
            let last = b + 1 == blocks && r.rank + 1 == block.ranks.len();
            table.push(vec![
                "IPFASST".into(),
                b.to_string(),
                r.rank.to_string(),
                r.iterations.to_string(),
                r.vcycles.to_string(),
                num(r.residuals.last().copied().unwrap_or(f64::NAN)),
                if last { num(s.pfasst_error) } else { String::new() },
                status(r.converged),
            ]);
        }
    }
    table.push(vec![
        "ISDC".into(),
        String::new(),
        String::new(),
        s.isdc.iterations.iter().sum::<usize>().to_string(),
        s.isdc.vcycles.to_string(),
        num(s.isdc.max_residual()),
        num(s.isdc_error),
        status(s.isdc.unconverged_steps.is_empty()),
    ]);
    let per_rank = s.pfasst.vcycles_per_rank();
    let last = s.pfasst.blocks.last().expect("one block").last();
    let summary = vec![
        format!("IPFASST: error {:.3e}, last-rank iterations {}", s.pfasst_error, last.iterations),
        format!(
            "V-cycles: IPFASST max per rank {}, ISDC total {}",
            per_rank.iter().max().copied().unwrap_or(0),
            s.isdc.vcycles
        ),
        format!("ISDC: error {:.3e}", s.isdc_error),
    ];
    Ok(Outcome {
        unconverged: !s.pfasst.unconverged().is_empty() || !s.isdc.unconverged_steps.is_empty(),
        table,
        summary,
        trace: Some(s.pfasst.trace),
    })
}

/// Per-step outcome of a single run.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleRun {
    pub iterations: Vec<usize>,
    pub residuals: Vec<f64>,
    pub converged: Vec<bool>,
    pub final_state: GridFunction,
    pub ode_error: Option<f64>,
    pub pde_error: f64,
    pub vcycles: usize,
    pub trace: Option<Vec<TraceRow>>,
}

pub fn single_run(cfg: &ExperimentConfig) -> Result<SingleRun, HarnessError> {
    let p = cfg.problem;
    let levels = cfg.method.build_levels(&p)?;
    let fine = levels[0].clone();
    let u0 = initial_condition(fine.grid(), p.k);
    let stop = cfg.method.stop;
    let done = |residuals: &[f64]| residuals.iter().map(|&r| stop.tol == 0.0 || r <= stop.tol).collect();
    let (iterations, residuals, final_state, vcycles, trace) = if cfg.variant.parallel() {
        let mut pc = PfasstConfig::new(cfg.ranks, stop);
        pc.blocks = cfg.steps / cfg.ranks;
        pc.executor = cfg.executor;
        let run = pfasst_run(levels, &u0, p.t_end, &pc)?;
        let ranks = run.blocks.iter().flat_map(|b| b.ranks.iter());
        let iterations = ranks.clone().map(|r| r.iterations).collect();
        let residuals: Vec<f64> = ranks.map(|r| r.residuals.last().copied().unwrap_or(f64::NAN)).collect();
        let vcycles = run.vcycles_per_rank().iter().sum();
        (iterations, residuals, run.final_state, vcycles, Some(run.trace))
    } else if cfg.variant.multilevel() {
        let run = run_mlsdc(levels, &u0, p.t_end, cfg.steps, stop)?;
        let residuals: Vec<f64> = run.residuals.iter().map(|r| r.last().copied().unwrap_or(f64::NAN)).collect();
        let vcycles = run.total_vcycles();
        (run.iterations, residuals, run.final_state, vcycles, None)
    } else {
        let run = run_sdc(&fine.op, &fine.table, &u0, p.t_end, cfg.steps, stop, fine.policy, fine.mg)?;
        let residuals: Vec<f64> = run.residuals.iter().map(|r| r.last().copied().unwrap_or(f64::NAN)).collect();
        (run.iterations, residuals, run.final_state, run.vcycles, None)
    };
    let (ode_error, pde_error) = errors(&p, &fine, &final_state);
    Ok(SingleRun {
        converged: done(&residuals),
        iterations,
        residuals,
        final_state,
        ode_error,
        pde_error,
        vcycles,
        trace,
    })
}

fn single_outcome(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let s = single_run(cfg)?;
    let dt = cfg.problem.t_end / cfg.steps as f64;
    let mut table = Table::new(&["step", "t", "iterations", "residual", "status", "ode_error", "pde_error"]);
    let steps = s.iterations.len();
    for i in 0..steps {
        let last = i + 1 == steps;
        table.push(vec![
            i.to_string(),
            num((i + 1) as f64 * dt),
            s.iterations[i].to_string(),
            num(s.residuals[i]),
            status(s.converged[i]),
            if last { opt(s.ode_error) } else { String::new() },
            if last { num(s.pde_error) } else { String::new() },
        ]);
    }
    let mut summary = vec![format!("{}: pde error {:.3e}, V-cycles {}", cfg.variant.name(), s.pde_error, s.vcycles)];
    if let Some(e) = s.ode_error {
        summary.push(format!("ode error {e:.3e}"));
    }
    Ok(Outcome {
        unconverged: s.converged.iter().any(|c| !c),
        table,
        summary,
        trace: s.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::parse_config;

    #[test]
    fn floor_detection() {
        assert_eq!(iterations_to_floor(&[1.0, 0.1, 0.011, 0.01], 2.0), Some(3));
        assert_eq!(iterations_to_floor(&[1.0, 1e-4, 0.5, 0.01], 2.0), Some(2));
        assert_eq!(iterations_to_floor(&[], 2.0), None);
    }

    #[test]
    fn slopes_of_a_power_law() {
        let rows: Vec<OrderRow> = [4usize, 8, 16, 32]
            .iter()
            .map(|&n| OrderRow {
                order: 2,
                steps: n,
                ode_error: Some(3.0 * (n as f64).powi(-2)),
                pde_error: 0.0,
                residual: 0.0,
                converged: true,
            })
            .collect();
        let s = pairwise_slopes(&rows, 2, 1e-3);
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|(_, x)| (x - 2.0).abs() < 1e-12));
        assert!(pairwise_slopes(&rows, 4, 0.0).is_empty());
        assert_eq!(pairwise_slopes(&rows, 2, 0.01).len(), 2);
        assert!(asymptotic_slope(&rows, 2, 1.0).is_none());
    }

    #[test]
    fn one_backward_euler_step() {
        let cfg = parse_config(
            Experiment::SingleRun,
            "variant = SDC\nn = 16\nsteps = 1\nnodes = 1\nt_end = 0.1",
            &[],
        )
        .unwrap();
        let s = single_run(&cfg).unwrap();
        assert_eq!(s.iterations, vec![1]);
        // (I − Δt A) u1 = u0 on the sine mode: u1 = u0 / (1 − Δt ν d)
        let grid = crate::heat::Grid::unit(1, 16).unwrap();
        let d = crate::heat::discrete_symbol(&grid, 1).unwrap();
        let mut expect = initial_condition(&grid, 1);
        expect.scale(1.0 / (1.0 - 0.1 * d));
        assert!(s.final_state.max_diff(&expect) < 1e-11);
    }

    #[test]
    fn small_experiments_produce_tables() {
        let cfg = parse_config(Experiment::Damping, "points = 5", &[]).unwrap();
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.table.rows.len(), 10);
        let cfg = parse_config(Experiment::OrderStudy, "n = 16\norders = 1,2\nmin_log2_steps = 2\nmax_log2_steps = 3\ntol = 1e-10", &[]).unwrap();
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.table.rows.len(), 4);
        assert!(!out.unconverged);
        let cfg = parse_config(Experiment::WeakScaling, "sizes = 16\nmax_iter = 3", &[]).unwrap();
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.table.rows.len(), 3);
        let cfg = parse_config(
            Experiment::SingleRun,
            "variant = IPFASST\nlevels = 2\nnodes = 2,1\nn = 16\nsteps = 4\nranks = 2\ntol = 1e-8",
            &[],
        )
        .unwrap();
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.table.rows.len(), 4);
        assert!(out.trace.is_some());
    }
}
