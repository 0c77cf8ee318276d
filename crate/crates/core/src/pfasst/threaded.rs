use std::sync::mpsc::{channel, Receiver, Sender};

use crate::error::{Error, Result};
use crate::heat::GridFunction;
use crate::hierarchy::Hierarchy;

use super::rank::{Link, Packet, RankState};
use super::PfasstConfig;

struct ChannelLink {
    rank: usize,
    coarse_in: Option<Receiver<GridFunction>>,
    coarse_out: Option<Sender<GridFunction>>,
    packet_in: Option<Receiver<Packet>>,
    packet_out: Option<Sender<Packet>>,
}

fn closed(rank: usize) -> Error {
    Error::InvalidHierarchy(format!("rank {rank}: neighbour channel closed"))
}

impl Link for ChannelLink {
    fn recv_coarse(&mut self) -> Result<GridFunction> {
        self.coarse_in
            .as_ref()
            .ok_or_else(|| closed(self.rank))?
            .recv()
            .map_err(|_| closed(self.rank))
    }

    fn send_coarse(&mut self, value: GridFunction) -> Result<()> {
        self.coarse_out
            .as_ref()
            .ok_or_else(|| closed(self.rank))?
            .send(value)
            .map_err(|_| closed(self.rank))
    }

    fn recv_packet(&mut self) -> Result<Packet> {
        self.packet_in
            .as_ref()
            .ok_or_else(|| closed(self.rank))?
            .recv()
            .map_err(|_| closed(self.rank))
    }

    fn send_packet(&mut self, packet: Packet) -> Result<()> {
        self.packet_out
            .as_ref()
            .ok_or_else(|| closed(self.rank))?
            .send(packet)
            .map_err(|_| closed(self.rank))
    }
}

fn program(h: &Hierarchy, mut r: RankState, mut link: ChannelLink, ranks: usize, max_iter: usize) -> Result<RankState> {
    for phase in 0..ranks {
        r.predictor_phase(h, phase, &mut link)?;
    }
    r.predictor_finish(h, &mut link)?;
    for _ in 0..max_iter {
        if r.is_done() {
            break;
        }
        r.iterate(h, &mut link)?;
    }
    Ok(r)
}

/// One scoped thread per rank, one FIFO channel per (edge, kind).
pub(super) fn run(h: &Hierarchy, ranks: Vec<RankState>, cfg: &PfasstConfig) -> Result<Vec<RankState>> {
    let p = ranks.len();
    let mut links: Vec<ChannelLink> = (0..p)
        .map(|rank| ChannelLink {
            rank,
            coarse_in: None,
            coarse_out: None,
            packet_in: None,
            packet_out: None,
        })
        .collect();
    for n in 1..p {
        let (cs, cr) = channel();
        let (ps, pr) = channel();
        links[n - 1].coarse_out = Some(cs);
        links[n - 1].packet_out = Some(ps);
        links[n].coarse_in = Some(cr);
        links[n].packet_in = Some(pr);
    }
    let max_iter = cfg.stop.max_iter;
    std::thread::scope(|s| {
        let handles: Vec<_> = ranks
            .into_iter()
            .zip(links)
            .map(|(r, link)| s.spawn(move || program(h, r, link, p, max_iter)))
            .collect();
        handles
            .into_iter()
            .map(|hd| hd.join().unwrap_or_else(|e| std::panic::resume_unwind(e)))
            .collect()
    })
}
