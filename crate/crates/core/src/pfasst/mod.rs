//! PFASST: MLSDC iterations pipelined over a block of time steps.
//!
//! Rank `n` owns step `n` of a block. Communication only flows forward:
//!
//! * coarse channel: the coarsest final-node value after every coarse sweep
//!   (predictor phases and iterations); the successor blocks on it before
//!   its own coarse sweep;
//! * packet channel: at the end of every iteration, the final-node values of
//!   all finer levels plus the sender's convergence flag.
//!
//! A rank converges once its fine residual, measured against the newest
//! initial value, is below tolerance and its predecessor has converged.
//! After that it neither sends nor receives, so its successor's inflow is
//! frozen. Both executors run the same per-rank program against different
//! channel implementations, so their results agree bit for bit.

mod rank;
mod serial;
mod threaded;
mod trace;

pub use rank::{Link, Packet, RankState};
pub use trace::{write_trace, TraceRow};

use crate::error::{Error, Result};
use crate::heat::GridFunction;
use crate::hierarchy::{Hierarchy, Level};
use crate::sdc::Iteration;

/// How ranks are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Executor {
    /// Round-robin over ranks within each phase on the calling thread.
    #[default]
    Serial,
    /// One OS thread per rank with FIFO channels per edge.
    Threaded,
}

impl std::str::FromStr for Executor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "serial" => Ok(Self::Serial),
            "threaded" => Ok(Self::Threaded),
            _ => Err(Error::Config(format!("unknown executor '{s}' (serial|threaded)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfasstConfig {
    /// Time ranks per block.
    pub ranks: usize,
    /// Consecutive blocks; total steps = `ranks * blocks`.
    pub blocks: usize,
    pub stop: Iteration,
    pub executor: Executor,
    /// Keep the last rank's fine final value after every iteration.
    pub record_history: bool,
}

impl PfasstConfig {
    pub fn new(ranks: usize, stop: Iteration) -> Self {
        Self {
            ranks,
            blocks: 1,
            stop,
            executor: Executor::Serial,
            record_history: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ranks == 0 || self.blocks == 0 {
            return Err(Error::Config("ranks and blocks must be >= 1".into()));
        }
        if self.stop.max_iter == 0 {
            return Err(Error::Config("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-rank outcome of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub rank: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Fine residual after each iteration.
    pub residuals: Vec<f64>,
    /// Coarse sweeps in the predictor.
    pub predictor_sweeps: usize,
    /// V-cycles over all levels, predictor included.
    pub vcycles: usize,
    pub final_state: GridFunction,
    /// Fine final value after each iteration (last rank only, when recorded).
    pub history: Vec<GridFunction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockReport {
    pub ranks: Vec<RankReport>,
}

impl BlockReport {
    pub fn last(&self) -> &RankReport {
        self.ranks.last().expect("non-empty block")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PfasstRun {
    pub final_state: GridFunction,
    pub blocks: Vec<BlockReport>,
    pub trace: Vec<TraceRow>,
}

impl PfasstRun {
    /// V-cycles summed over blocks, indexed by rank.
    pub fn vcycles_per_rank(&self) -> Vec<usize> {
        let ranks = self.blocks.first().map_or(0, |b| b.ranks.len());
        (0..ranks)
            .map(|r| self.blocks.iter().map(|b| b.ranks[r].vcycles).sum())
            .collect()
    }

    pub fn unconverged(&self) -> Vec<(usize, usize)> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(b, blk)| {
                blk.ranks
                    .iter()
                    .filter(|r| !r.converged)
                    .map(move |r| (b, r.rank))
            })
            .collect()
    }
}

/// Runs PFASST from `0` to `t_end` over `cfg.ranks * cfg.blocks` steps.
pub fn pfasst_run(levels: Vec<Level>, u0: &GridFunction, t_end: f64, cfg: &PfasstConfig) -> Result<PfasstRun> {
    cfg.validate()?;
    if !(t_end > 0.0) {
        return Err(Error::Config(format!("end time {t_end} must be > 0")));
    }
    let steps = cfg.ranks * cfg.blocks;
    let h = Hierarchy::new(levels, t_end / steps as f64)?;
    run_blocks(&h, u0, cfg)
}

/// Runs all blocks on a prepared hierarchy (its step size is used as is).
pub fn run_blocks(h: &Hierarchy, u0: &GridFunction, cfg: &PfasstConfig) -> Result<PfasstRun> {
    cfg.validate()?;
    u0.check_grid(h.level(0).grid())?;
    let mut y0 = u0.clone();
    let mut blocks = Vec::with_capacity(cfg.blocks);
    let mut trace = Vec::new();
    for b in 0..cfg.blocks {
        let ranks: Vec<RankState> = (0..cfg.ranks)
            .map(|n| RankState::new(h, n, cfg, b, &y0))
            .collect::<Result<_>>()?;
        let done = match cfg.executor {
            Executor::Serial => serial::run(h, ranks, cfg)?,
            Executor::Threaded => threaded::run(h, ranks, cfg)?,
        };
        let mut reports = Vec::with_capacity(done.len());
        for r in done {
            let (report, rows) = r.into_report();
            trace.extend(rows);
            reports.push(report);
        }
        y0 = reports.last().expect("ranks >= 1").final_state.clone();
        blocks.push(BlockReport { ranks: reports });
    }
    trace.sort_by_key(|r| (r.block, r.iter, r.rank, r.level));
    Ok(PfasstRun {
        final_state: y0,
        blocks,
        trace,
    })
}
