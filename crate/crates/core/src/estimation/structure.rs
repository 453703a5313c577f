//! Agglomerative structure estimation from a Kendall's tau matrix.

use crate::error::{HopacError, Result};
use crate::tree::Structure;

/// Estimated binary structure and the tau attached to each fork.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureEstimate {
    pub structure: Structure,
    /// `fork_taus[k]` belongs to fork `d + 1 + k`.
    pub fork_taus: Vec<f64>,
}

impl StructureEstimate {
    pub fn tau(&self, fork: usize) -> f64 {
        self.fork_taus[fork - self.structure.d() - 1]
    }
}

/// Order-independent sum (ascending values).
pub(crate) fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

/// Average-linkage agglomeration: repeatedly joins the two clusters with the
/// largest mean tau over their cross leaf pairs. Ties go to the
/// lexicographically smallest pair of node ids.
pub fn estimate_structure(tau: &[Vec<f64>]) -> Result<StructureEstimate> {
    let d = tau.len();
    if d < 2 || tau.iter().any(|r| r.len() != d) {
        return Err(HopacError::Data("tau matrix must be square with d >= 2".into()));
    }
    for i in 0..d {
        for j in 0..d {
            if (tau[i][j] - tau[j][i]).abs() > 1e-12 || !tau[i][j].is_finite() {
                return Err(HopacError::Data("tau matrix must be finite and symmetric".into()));
            }
        }
    }
    // active clusters: (node id, leaves 0-based)
    let mut active: Vec<(usize, Vec<usize>)> = (0..d).map(|j| (j + 1, vec![j])).collect();
    let mut forks = Vec::with_capacity(d - 1);
    let mut fork_taus = Vec::with_capacity(d - 1);
    let mut next = d + 1;
    while active.len() > 1 {
        let mut best: Option<(usize, usize, f64)> = None;
        for a in 0..active.len() {
            for b in a + 1..active.len() {
                let mut vals = Vec::with_capacity(active[a].1.len() * active[b].1.len());
                for &i in &active[a].1 {
                    for &j in &active[b].1 {
                        vals.push(tau[i][j]);
                    }
                }
                let n = vals.len() as f64;
                let avg = sorted_sum(vals) / n;
                let better = match best {
                    None => true,
                    Some((ba, bb, bv)) => {
                        let key = (active[a].0.min(active[b].0), active[a].0.max(active[b].0));
                        let bkey = (active[ba].0.min(active[bb].0), active[ba].0.max(active[bb].0));
                        avg > bv || (avg == bv && key < bkey)
                    }
                };
                if better {
                    best = Some((a, b, avg));
                }
            }
        }
        let (a, b, avg) = best.unwrap();
        let (ib, lb) = active.remove(b);
        let (ia, la) = active.remove(a);
        let mut leaves = la;
        leaves.extend(lb);
        leaves.sort_unstable();
        forks.push((next, [ia.min(ib), ia.max(ib)]));
        fork_taus.push(avg);
        active.push((next, leaves));
        next += 1;
    }
    let structure = Structure::new(d, &forks)?;
    Ok(StructureEstimate { structure, fork_taus })
}
