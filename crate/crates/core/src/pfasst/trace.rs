use std::io::Write;

use crate::error::{Error, Result};

/// One line of the per-iteration progress log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub block: usize,
    pub rank: usize,
    pub iter: usize,
    pub level: usize,
    pub residual: f64,
    pub vcycles: usize,
}

/// Writes rows as CSV with columns `block,rank,iter,level,residual,vcycles`.
pub fn write_trace<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Config(format!("trace output: {e}"));
    w.write_record(["block", "rank", "iter", "level", "residual", "vcycles"])
        .map_err(io)?;
    for r in rows {
        w.write_record([
            r.block.to_string(),
            r.rank.to_string(),
            r.iter.to_string(),
            r.level.to_string(),
            format!("{:e}", r.residual),
            r.vcycles.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Config(format!("trace output: {e}")))?;
    Ok(())
}
