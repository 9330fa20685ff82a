//! Moments of Haar-distributed orthogonal matrices up to order four.
//!
//! Indices are 1-based as in `H_r^i` (row r, column i). The fourth moment and
//! cumulant are sums over bi-partitions: ordered pairs (π, σ) of pair
//! partitions of the four positions, π acting on the row indices and σ on the
//! column indices. The coefficient depends only on whether π = σ.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{trace_product, Matrix};

/// A perfect matching of {0, …, m−1}, as a list of pairs.
pub type Matching = Vec<(usize, usize)>;

/// All perfect matchings of an even-sized set, (m−1)!! of them.
pub fn perfect_matchings(m: usize) -> Result<Vec<Matching>> {
    if !m.is_multiple_of(2) {
        return Err(Error::domain(format!("cannot pair up {m} elements")));
    }
    fn rec(rest: &[usize], acc: &mut Matching, out: &mut Vec<Matching>) {
        let Some((&first, tail)) = rest.split_first() else {
            out.push(acc.clone());
            return;
        };
        for (i, &partner) in tail.iter().enumerate() {
            let remaining: Vec<usize> = tail.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &v)| v).collect();
            acc.push((first, partner));
            rec(&remaining, acc, out);
            acc.pop();
        }
    }
    let items: Vec<usize> = (0..m).collect();
    let mut out = Vec::new();
    rec(&items, &mut Vec::new(), &mut out);
    Ok(out)
}

// Blocks of the join of two pair partitions = cycles of their union graph.
fn join_blocks(m: usize, a: &Matching, b: &Matching) -> usize {
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut c = x;
        while p[c] != r {
            let next = p[c];
            p[c] = r;
            c = next;
        }
        r
    }
    for &(u, v) in a.iter().chain(b) {
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru != rv {
            parent[ru] = rv;
        }
    }
    (0..m).filter(|&x| find(&mut parent, x) == x).count()
}

/// Number of bi-partitions of {1, …, order}, keyed by the number of blocks of
/// the least upper bound of the two pair partitions.
pub fn bipartition_pair_counts(order: usize) -> Result<BTreeMap<usize, usize>> {
    let ms = perfect_matchings(order)?;
    let mut counts = BTreeMap::new();
    for a in &ms {
        for b in &ms {
            *counts.entry(join_blocks(order, a, b)).or_insert(0) += 1;
        }
    }
    Ok(counts)
}

fn check_indices(n: usize, idx: &[usize]) -> Result<()> {
    if n < 2 {
        return Err(Error::domain("moment formulas need n >= 2"));
    }
    if let Some(&bad) = idx.iter().find(|&&i| i == 0 || i > n) {
        return Err(Error::domain(format!("index {bad} outside 1..={n}")));
    }
    Ok(())
}

fn delta(idx: &[usize; 4], m: &[(usize, usize)]) -> bool {
    m.iter().all(|&(a, b)| idx[a] == idx[b])
}

fn pairings4() -> &'static [[(usize, usize); 2]; 3] {
    &[[(0, 1), (2, 3)], [(0, 2), (1, 3)], [(0, 3), (1, 2)]]
}

// Σ over the 9 bi-partitions of coef(π == σ) · δ_π(rows) δ_σ(cols).
fn bipartition_sum(rows: &[usize; 4], cols: &[usize; 4], diag: f64, off: f64) -> f64 {
    let ps = pairings4();
    let mut s = 0.0;
    for (a, pa) in ps.iter().enumerate() {
        if !delta(rows, pa) {
            continue;
        }
        for (b, pb) in ps.iter().enumerate() {
            if delta(cols, pb) {
                s += if a == b { diag } else { off };
            }
        }
    }
    s
}

/// E(H_r^i H_s^j) = δ_rs δ^ij / n.
pub fn haar_second_moment(n: usize, rows: [usize; 2], cols: [usize; 2]) -> Result<f64> {
    check_indices(n, &[rows[0], rows[1], cols[0], cols[1]])?;
    Ok(if rows[0] == rows[1] && cols[0] == cols[1] { 1.0 / n as f64 } else { 0.0 })
}

/// E(H_r^i H_s^j H_t^k H_u^l) for rows (r, s, t, u) and columns (i, j, k, l).
pub fn haar_fourth_moment(n: usize, rows: [usize; 4], cols: [usize; 4]) -> Result<f64> {
    check_indices(n, &rows)?;
    check_indices(n, &cols)?;
    let nf = n as f64;
    Ok(bipartition_sum(&rows, &cols, nf + 1.0, -1.0) / (nf * (nf - 1.0) * (nf + 2.0)))
}

/// Fourth joint cumulant of the four entries.
pub fn haar_fourth_cumulant(n: usize, rows: [usize; 4], cols: [usize; 4]) -> Result<f64> {
    check_indices(n, &rows)?;
    check_indices(n, &cols)?;
    let nf = n as f64;
    Ok(bipartition_sum(&rows, &cols, 2.0, -nf) / (nf * nf * (nf - 1.0) * (nf + 2.0)))
}

/// Closed-form values of E tr(H²), E tr²(H), E tr(H⁴) and E tr²(H²),
/// evaluated by summing the moment formulas over all index tuples.
pub fn trace_moment_expectations(n: usize) -> Result<[f64; 4]> {
    if n < 2 {
        return Err(Error::domain("moment formulas need n >= 2"));
    }
    let mut tr_h2 = 0.0;
    let mut tr2_h = 0.0;
    for r in 1..=n {
        for s in 1..=n {
            // tr(H²) = H_r^s H_s^r ; tr²(H) = H_r^r H_s^s
            tr_h2 += haar_second_moment(n, [r, s], [s, r])?;
            tr2_h += haar_second_moment(n, [r, s], [r, s])?;
        }
    }
    let mut tr_h4 = 0.0;
    let mut tr2_h2 = 0.0;
    for r in 1..=n {
        for s in 1..=n {
            for t in 1..=n {
                for u in 1..=n {
                    // tr(H⁴) = H_r^s H_s^t H_t^u H_u^r ; tr²(H²) = H_r^s H_s^r H_t^u H_u^t
                    tr_h4 += haar_fourth_moment(n, [r, s, t, u], [s, t, u, r])?;
                    tr2_h2 += haar_fourth_moment(n, [r, s, t, u], [s, r, u, t])?;
                }
            }
        }
    }
    Ok([tr_h2, tr2_h, tr_h4, tr2_h2])
}

fn check_quad(a: &Matrix, k: usize) -> Result<usize> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::domain("matrix must be square"));
    }
    if k > n {
        return Err(Error::domain(format!("k = {k} exceeds n = {n}")));
    }
    Ok(n)
}

/// E tr(Z'AZ) = k tr(A)/n for Z the first k columns of a Haar matrix.
pub fn expected_tr_quad(a: &Matrix, k: usize) -> Result<f64> {
    let n = check_quad(a, k)?;
    Ok(k as f64 * a.trace() / n as f64)
}

/// (E[tr(Z'AZ) tr(Z'BZ)], cov(tr(Z'AZ), tr(Z'BZ))).
pub fn product_and_cov_tr_quad(a: &Matrix, b: &Matrix, k: usize) -> Result<(f64, f64)> {
    let n = check_quad(a, k)?;
    if b.shape() != a.shape() {
        return Err(Error::domain("A and B must have the same shape"));
    }
    if n < 2 {
        return Err(Error::domain("moment formulas need n >= 2"));
    }
    let (nf, kf) = (n as f64, k as f64);
    let (ta, tb, tab) = (a.trace(), b.trace(), trace_product(a, b));
    let denom = nf * (nf - 1.0) * (nf + 2.0);
    let product = (kf * (nf * kf + kf - 2.0) * ta * tb + 2.0 * kf * (nf - kf) * tab) / denom;
    let cov = 2.0 * kf * (nf - kf) * (tab - ta * tb / nf) / denom;
    Ok((product, cov))
}
