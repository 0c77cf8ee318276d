use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::heat::GridFunction;
use crate::hierarchy::Hierarchy;

use super::rank::{Link, Packet, RankState};
use super::PfasstConfig;

/// Inboxes indexed by receiving rank.
#[derive(Default)]
struct Mailboxes {
    coarse: Vec<VecDeque<GridFunction>>,
    packets: Vec<VecDeque<Packet>>,
}

struct QueueLink<'a> {
    boxes: &'a mut Mailboxes,
    rank: usize,
}

fn empty(rank: usize, what: &str) -> Error {
    Error::InvalidHierarchy(format!("rank {rank}: {what} message missing in serial schedule"))
}

impl Link for QueueLink<'_> {
    fn recv_coarse(&mut self) -> Result<GridFunction> {
        self.boxes.coarse[self.rank]
            .pop_front()
            .ok_or_else(|| empty(self.rank, "coarse"))
    }

    fn send_coarse(&mut self, value: GridFunction) -> Result<()> {
        self.boxes.coarse[self.rank + 1].push_back(value);
        Ok(())
    }

    fn recv_packet(&mut self) -> Result<Packet> {
        self.boxes.packets[self.rank]
            .pop_front()
            .ok_or_else(|| empty(self.rank, "end-of-iteration"))
    }

    fn send_packet(&mut self, packet: Packet) -> Result<()> {
        self.boxes.packets[self.rank + 1].push_back(packet);
        Ok(())
    }
}

/// Round-robin over ranks within every phase. Messages only flow forward,
/// so each receive finds its message already queued.
pub(super) fn run(h: &Hierarchy, mut ranks: Vec<RankState>, cfg: &PfasstConfig) -> Result<Vec<RankState>> {
    let p = ranks.len();
    let mut boxes = Mailboxes {
        coarse: vec![VecDeque::new(); p],
        packets: vec![VecDeque::new(); p],
    };
    for phase in 0..p {
        for r in ranks.iter_mut() {
            let rank = r.rank;
            r.predictor_phase(h, phase, &mut QueueLink { boxes: &mut boxes, rank })?;
        }
    }
    for r in ranks.iter_mut() {
        let rank = r.rank;
        r.predictor_finish(h, &mut QueueLink { boxes: &mut boxes, rank })?;
    }
    for _ in 0..cfg.stop.max_iter {
        if ranks.iter().all(|r| r.is_done()) {
            break;
        }
        for r in ranks.iter_mut() {
            let rank = r.rank;
            r.iterate(h, &mut QueueLink { boxes: &mut boxes, rank })?;
        }
    }
    Ok(ranks)
}
