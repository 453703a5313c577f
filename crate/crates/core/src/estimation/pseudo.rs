//! Pseudo-observations and sample Kendall's tau.

use crate::data::{PseudoSample, SampleMatrix};
use crate::error::{HopacError, Result};

/// Average ranks (1-based) of `x`.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        // positions i..j share the mean of ranks i+1..=j
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Column-wise ranks divided by `n + 1`, ties averaged.
pub fn pseudo_observations(x: &SampleMatrix) -> Result<PseudoSample> {
    let (n, d) = (x.n(), x.d());
    if n < 2 {
        return Err(HopacError::Data(format!("need at least 2 observations, got {n}")));
    }
    let mut out = SampleMatrix::zeros(n, d);
    for j in 0..d {
        let col = x.column(j);
        if col.iter().any(|v| !v.is_finite()) {
            return Err(HopacError::Data(format!("column {} contains non-finite values", j + 1)));
        }
        if col.iter().all(|&v| v == col[0]) {
            return Err(HopacError::Data(format!("column {} is constant", j + 1)));
        }
        for (i, r) in average_ranks(&col).into_iter().enumerate() {
            out.set(i, j, r / (n as f64 + 1.0));
        }
    }
    Ok(out)
}

fn tie_pairs(sorted: impl Iterator<Item = f64>) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev: Option<f64> = None;
    for v in sorted {
        if prev == Some(v) {
            run += 1;
        } else {
            total += run * (run + 1) / 2;
            run = 0;
        }
        prev = Some(v);
    }
    total + run * (run + 1) / 2
}

/// Kendall's tau-b in O(n log n) (Knight's algorithm). Returns 0 when either
/// variable is constant.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n < 2 {
        return 0.0;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));
    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let n1 = tie_pairs(idx.iter().map(|&i| x[i]));
    // joint ties
    let mut n3 = 0u64;
    let mut run = 0u64;
    for w in 1..n {
        let (a, b) = (idx[w - 1], idx[w]);
        if x[a] == x[b] && y[a] == y[b] {
            run += 1;
        } else {
            n3 += run * (run + 1) / 2;
            run = 0;
        }
    }
    n3 += run * (run + 1) / 2;
    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);
    let n2 = tie_pairs(ys.iter().copied());
    let denom = ((n0 - n1) as f64 * (n0 - n2) as f64).sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    let s = n0 as i64 - n1 as i64 - n2 as i64 + n3 as i64 - 2 * swaps as i64;
    s as f64 / denom
}

/// Sorts `v` ascending, returning the number of inversions (strict).
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let (left, right) = v.split_at_mut(mid);
    let (bl, br) = buf.split_at_mut(mid);
    let mut swaps = merge_count(left, bl) + merge_count(right, br);
    let (mut i, mut j, mut k) = (0, 0, 0);
    while i < left.len() && j < right.len() {
        if right[j] < left[i] {
            buf[k] = right[j];
            swaps += (left.len() - i) as u64;
            j += 1;
        } else {
            buf[k] = left[i];
            i += 1;
        }
        k += 1;
    }
    while i < left.len() {
        buf[k] = left[i];
        i += 1;
        k += 1;
    }
    while j < right.len() {
        buf[k] = right[j];
        j += 1;
        k += 1;
    }
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Symmetric matrix of pairwise tau-b with unit diagonal.
pub fn kendall_matrix(u: &SampleMatrix) -> Vec<Vec<f64>> {
    let d = u.d();
    let cols: Vec<Vec<f64>> = (0..d).map(|j| u.column(j)).collect();
    let mut m = vec![vec![1.0; d]; d];
    for i in 0..d {
        for j in i + 1..d {
            let t = kendall_tau_b(&cols[i], &cols[j]);
            m[i][j] = t;
            m[j][i] = t;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_tau_b(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let (mut c, mut dsc, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
        for i in 0..n {
            for j in i + 1..n {
                let sx = (x[i] - x[j]).signum() * if x[i] == x[j] { 0.0 } else { 1.0 };
                let sy = (y[i] - y[j]).signum() * if y[i] == y[j] { 0.0 } else { 1.0 };
                if sx == 0.0 && sy == 0.0 {
                    continue;
                } else if sx == 0.0 {
                    tx += 1;
                } else if sy == 0.0 {
                    ty += 1;
                } else if sx == sy {
                    c += 1;
                } else {
                    dsc += 1;
                }
            }
        }
        let denom = (((c + dsc + tx) * (c + dsc + ty)) as f64).sqrt();
        if denom == 0.0 {
            0.0
        } else {
            (c - dsc) as f64 / denom
        }
    }

    #[test]
    fn pseudo_examples() {
        let x = SampleMatrix::from_rows(&[vec![3.2, 1.0], vec![-1.0, 1.0], vec![0.5, 2.0]]).unwrap();
        let u = pseudo_observations(&x).unwrap();
        assert_eq!(u.column(0), vec![0.75, 0.25, 0.5]);
        assert_eq!(u.column(1), vec![0.375, 0.375, 0.75]);
        let c = SampleMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        assert!(pseudo_observations(&c).is_err());
    }

    #[test]
    fn tau_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((kendall_tau_b(&x, &[1.0, 3.0, 2.0, 4.0]) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(kendall_tau_b(&x, &x), 1.0);
        assert_eq!(kendall_tau_b(&x, &[4.0, 3.0, 2.0, 1.0]), -1.0);
    }

    proptest! {
        #[test]
        fn knight_matches_brute_force(pairs in prop::collection::vec((0u8..6, 0u8..6), 2..40)) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            prop_assert!((kendall_tau_b(&x, &y) - brute_tau_b(&x, &y)).abs() < 1e-12);
        }

        #[test]
        fn pseudo_columns_are_rank_permutations(v in prop::collection::vec(-1e6f64..1e6, 2..50)) {
            let n = v.len();
            let m = SampleMatrix::from_columns(&[v.clone()]).unwrap();
            if let Ok(u) = pseudo_observations(&m) {
                let sum: f64 = u.column(0).iter().sum();
                prop_assert!((sum - n as f64 / 2.0).abs() < 1e-9);
            }
        }
    }
}
