use crate::error::Result;
use crate::heat::GridFunction;
use crate::hierarchy::{initialize_parts, CoarseExchange, Hierarchy, MlState, Restricted};
use crate::sdc::SweepStats;

use super::trace::TraceRow;
use super::{PfasstConfig, RankReport};

/// End-of-iteration message: final-node values of the finer levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub values: Vec<GridFunction>,
    pub converged: bool,
}

/// Channel endpoints of one rank. Receives block until the message exists.
pub trait Link {
    fn recv_coarse(&mut self) -> Result<GridFunction>;
    fn send_coarse(&mut self, value: GridFunction) -> Result<()>;
    fn recv_packet(&mut self) -> Result<Packet>;
    fn send_packet(&mut self, packet: Packet) -> Result<()>;
}

/// State of the worker owning one step of a block.
#[derive(Debug)]
pub struct RankState {
    pub rank: usize,
    ranks: usize,
    block: usize,
    tol: f64,
    max_iter: usize,
    record_history: bool,
    pub ml: MlState,
    old: Option<Restricted>,
    pub iteration: usize,
    pub converged: bool,
    pub pred_converged: bool,
    done: bool,
    predictor_sweeps: usize,
    vcycles: usize,
    residuals: Vec<f64>,
    history: Vec<GridFunction>,
    trace: Vec<TraceRow>,
}

struct Adapter<'a> {
    link: &'a mut dyn Link,
    receive: bool,
    send: bool,
}

impl CoarseExchange for Adapter<'_> {
    fn receive(&mut self, y0: &mut GridFunction) -> Result<()> {
        if self.receive {
            *y0 = self.link.recv_coarse()?;
        }
        Ok(())
    }

    fn send(&mut self, value: &GridFunction) -> Result<()> {
        if self.send {
            self.link.send_coarse(value.clone())?;
        }
        Ok(())
    }
}

impl RankState {
    /// All levels spread from `u0`, FAS terms set from the spread state.
    pub fn new(h: &Hierarchy, rank: usize, cfg: &PfasstConfig, block: usize, u0: &GridFunction) -> Result<Self> {
        let (ml, old) = initialize_parts(h, u0)?;
        Ok(Self {
            rank,
            ranks: cfg.ranks,
            block,
            tol: cfg.stop.tol,
            max_iter: cfg.stop.max_iter,
            record_history: cfg.record_history,
            ml,
            old: Some(old),
            iteration: 0,
            converged: false,
            pred_converged: rank == 0,
            done: false,
            predictor_sweeps: 0,
            vcycles: 0,
            residuals: Vec::new(),
            history: Vec::new(),
            trace: Vec::new(),
        })
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    fn is_last(&self) -> bool {
        self.rank + 1 == self.ranks
    }

    /// Predictor phase `p`: ranks `n >= p` sweep the coarsest level once,
    /// receiving first when `p > 0`.
    pub fn predictor_phase(&mut self, h: &Hierarchy, p: usize, link: &mut dyn Link) -> Result<()> {
        if self.rank < p {
            return Ok(());
        }
        let c = h.coarsest();
        if p > 0 {
            self.ml.y0[c] = link.recv_coarse()?;
        }
        let stats = h.sweep_level(&mut self.ml, c)?;
        self.vcycles += stats.vcycles;
        self.predictor_sweeps += 1;
        if !self.is_last() {
            link.send_coarse(self.ml.states[c].last().clone())?;
        }
        Ok(())
    }

    /// Corrects and sweeps the finer levels after the coarse predictor, then
    /// exchanges the
    /// iteration-0 packets.
    pub fn predictor_finish(&mut self, h: &Hierarchy, link: &mut dyn Link) -> Result<()> {
        let old = self.old.take().expect("predictor runs once");
        let stats = h.up(&mut self.ml, &old, true)?;
        self.vcycles += stats.iter().map(|s| s.vcycles).sum::<usize>();
        self.exchange_packets(h, link)?;
        Ok(())
    }

    fn exchange_packets(&mut self, h: &Hierarchy, link: &mut dyn Link) -> Result<()> {
        let c = h.coarsest();
        if self.rank > 0 && !self.pred_converged {
            let packet = link.recv_packet()?;
            for (l, v) in packet.values.into_iter().enumerate().take(c) {
                self.ml.y0[l] = v;
            }
            self.pred_converged = packet.converged;
        }
        if self.iteration > 0 {
            let r = h.fine_residual(&self.ml);
            self.residuals.push(r);
            self.converged = self.pred_converged && self.tol > 0.0 && r <= self.tol;
            self.done = self.converged || self.iteration >= self.max_iter;
        }
        if !self.is_last() {
            let values = (0..c).map(|l| self.ml.states[l].last().clone()).collect();
            link.send_packet(Packet {
                values,
                converged: self.converged,
            })?;
        }
        Ok(())
    }

    /// One PFASST iteration; no-op once the rank is done.
    pub fn iterate(&mut self, h: &Hierarchy, link: &mut dyn Link) -> Result<()> {
        if self.done {
            return Ok(());
        }
        self.iteration += 1;
        let stats: Vec<SweepStats> = {
            let mut adapter = Adapter {
                receive: self.rank > 0 && !self.pred_converged,
                send: !self.is_last(),
                link: &mut *link,
            };
            h.iteration(&mut self.ml, &mut adapter)?
        };
        self.exchange_packets(h, link)?;
        for (l, s) in stats.iter().enumerate() {
            self.vcycles += s.vcycles;
            self.trace.push(TraceRow {
                block: self.block,
                rank: self.rank,
                iter: self.iteration,
                level: l,
                residual: h.residual(&self.ml, l),
                vcycles: s.vcycles,
            });
        }
        if self.record_history && self.is_last() {
            self.history.push(self.ml.fine_final().clone());
        }
        Ok(())
    }

    pub(super) fn into_report(self) -> (RankReport, Vec<TraceRow>) {
        (
            RankReport {
                rank: self.rank,
                iterations: self.iteration,
                converged: self.converged,
                residuals: self.residuals,
                predictor_sweeps: self.predictor_sweeps,
                vcycles: self.vcycles,
                final_state: self.ml.fine_final().clone(),
                history: self.history,
            },
            self.trace,
        )
    }
}
