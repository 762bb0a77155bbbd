//! Per-worker computation and storage and total communication: closed
//! forms and the values measured from a transcript.

use crate::error::{Error, Result};
use crate::protocol::Transcript;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Costs {
    /// Scalar multiplications per worker.
    pub xi: u128,
    /// Scalars stored per worker.
    pub sigma: u128,
    /// Scalars exchanged among all workers.
    pub zeta: u128,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostReport {
    pub predicted: Costs,
    pub measured: Option<Costs>,
}

impl CostReport {
    pub fn agrees(&self) -> bool {
        self.measured == Some(self.predicted)
    }
}

/// `ξ = m³/(st²) + m² + N(t²+z-1)m²/t²`, `σ = (2N+z+1)m²/t² + 2m²/(st) + t²`,
/// `ζ = N(N-1)m²/t²`.
pub fn predicted_costs(m: u64, s: u64, t: u64, z: u64, n: u64) -> Result<Costs> {
    for by in [s, t] {
        if by == 0 || m % by != 0 {
            return Err(Error::IndivisibleDimension { m: m as usize, by: by as usize });
        }
    }
    let (m, s, t, z, n) = (m as u128, s as u128, t as u128, z as u128, n as u128);
    let blk = (m / t) * (m / t);
    Ok(Costs {
        xi: (m / t) * (m / s) * (m / t) + m * m + n * (t * t + z - 1) * blk,
        sigma: (2 * n + z + 1) * blk + 2 * (m / s) * (m / t) + t * t,
        zeta: n * n.saturating_sub(1) * blk,
    })
}

/// Reads the counters back out of a transcript. Every worker must report
/// the same computation and storage.
pub fn audit(transcript: &Transcript) -> Result<Costs> {
    let Some(first) = transcript.workers.first() else {
        return Err(Error::AuditIncomplete("no workers recorded".into()));
    };
    if transcript.workers.len() != transcript.n_workers {
        return Err(Error::AuditIncomplete(format!(
            "{} of {} workers recorded",
            transcript.workers.len(),
            transcript.n_workers
        )));
    }
    let b = transcript.g_block.0 * transcript.g_block.1;
    for (n, w) in transcript.workers.iter().enumerate() {
        if w.received.len() != transcript.n_workers * b {
            return Err(Error::AuditIncomplete(format!("worker {n} is missing exchanged values")));
        }
        if w.mults != first.mults || w.stored != first.stored {
            return Err(Error::AuditIncomplete(format!("worker {n} counters differ from worker 0")));
        }
    }
    let sent: u64 = transcript.workers.iter().map(|w| w.sent).sum();
    if sent != transcript.scalars_exchanged {
        return Err(Error::AuditIncomplete("sent scalars do not match the exchange total".into()));
    }
    Ok(Costs { xi: first.mults as u128, sigma: first.stored as u128, zeta: transcript.scalars_exchanged as u128 })
}

pub fn cost_report(transcript: &Transcript) -> Result<CostReport> {
    let p = &transcript.params;
    let predicted = predicted_costs(transcript.m as u64, p.s(), p.t(), p.z(), transcript.n_workers as u64)?;
    Ok(CostReport { predicted, measured: Some(audit(transcript)?) })
}
