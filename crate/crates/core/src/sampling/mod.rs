//! Exact sampling of OPACs and nested HOPACs via frailty mixtures.

pub mod frailty;
pub mod stable;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

pub use frailty::{sample_frailty, sample_inner_frailty, sample_op_frailty};
pub use stable::sample_positive_stable;

use crate::data::SampleMatrix;
use crate::error::{HopacError, Result};
use crate::generator::Generator;
use crate::rng::RngStream;
use crate::tree::HacTree;

const U_MIN: f64 = f64::MIN_POSITIVE;
const U_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

#[inline]
fn clamp_open(u: f64) -> f64 {
    u.clamp(U_MIN, U_MAX)
}

/// `n` rows from the `d`-variate OPAC: `U_j = psi_beta(E_j / V)`.
pub fn sample_opac(g: &Generator, d: usize, n: usize, stream: &RngStream) -> Result<SampleMatrix> {
    if d < 2 {
        return Err(HopacError::Domain(format!("dimension {d} < 2")));
    }
    let mut out = SampleMatrix::zeros(n, d);
    for i in 0..n {
        let mut rng = stream.row_rng(i as u64);
        let v = sample_op_frailty(g, &mut rng);
        for u in out.row_mut(i) {
            let e: f64 = Exp1.sample(&mut rng);
            *u = clamp_open(g.psi_unchecked(e / v));
        }
    }
    Ok(out)
}

/// `n` rows from a nested HOPAC. The root frailty is drawn first and every
/// fork's frailty conditionally on its parent's.
pub fn sample_hopac(tree: &HacTree, n: usize, stream: &RngStream) -> Result<SampleMatrix> {
    tree.require_snc()?;
    let d = tree.d();
    let order = tree.structure().preorder_forks();
    let mut out = SampleMatrix::zeros(n, d);
    let mut frailty = vec![0.0; 2 * d];
    for i in 0..n {
        let mut rng = stream.row_rng(i as u64);
        for &f in &order {
            let g = tree.generator(f);
            frailty[f] = match tree.structure().parent_of(f) {
                None => sample_op_frailty(g, &mut rng),
                Some(p) => sample_inner_frailty(tree.generator(p), g, frailty[p], &mut rng)?,
            };
        }
        let row = out.row_mut(i);
        for &f in &order {
            let g = tree.generator(f);
            for c in tree.children_of(f) {
                if c <= d {
                    let e: f64 = Exp1.sample(&mut rng);
                    row[c - 1] = clamp_open(g.psi_unchecked(e / frailty[f]));
                }
            }
        }
    }
    Ok(out)
}

/// Laplace transform estimate `mean(exp(-t X))` of a sample.
pub fn empirical_laplace(draws: &[f64], t: f64) -> f64 {
    draws.iter().map(|x| (-t * x).exp()).sum::<f64>() / draws.len() as f64
}

/// Convenience wrapper drawing `n` OP frailties.
pub fn op_frailties<R: Rng>(g: &Generator, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| sample_op_frailty(g, rng)).collect()
}
