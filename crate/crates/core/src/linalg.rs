//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value threshold used for every rank decision.
pub const RANK_RTOL: f64 = 1e-8;

/// Singular values in decreasing order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Numerical rank with the relative threshold `rtol · σ_max`.
pub fn rank_with(sv: &[f64], rtol: f64) -> usize {
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax <= 0.0 || !smax.is_finite() {
        return 0;
    }
    sv.iter().filter(|&&s| s > rtol * smax).count()
}

pub fn rank(a: &DMatrix<f64>) -> usize {
    rank_with(&singular_values(a), RANK_RTOL)
}

/// Orthonormal basis of the right nullspace, as columns.
pub fn nullspace(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    // Pad to a square matrix so the SVD returns a full right basis.
    let rows = a.nrows().max(n);
    let mut sq = DMatrix::zeros(rows, n);
    sq.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..sv.len())
        .filter(|&i| smax <= 0.0 || sv[i] <= RANK_RTOL * smax)
        .collect();
    let mut out = DMatrix::zeros(n, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        out.set_column(c, &vt.row(i).transpose());
    }
    out
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return DVector::zeros(a.ncols());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = (RANK_RTOL * smax).max(f64::MIN_POSITIVE);
    svd.solve(b, eps).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

pub fn from_rows(rows: &[Vec<f64>], ncols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Largest `t` such that some `c` with `|c_j| ≤ bound` satisfies
/// `(s + N c)_i ≥ t` for every `i` in `positive`, capped at 1.
///
/// Solves the small linear program by vertex enumeration; the dimension of
/// `c` is tiny for multiplier cones.
pub fn max_min_margin(
    s: &DVector<f64>,
    nmat: &DMatrix<f64>,
    positive: &[usize],
    bound: f64,
) -> (f64, DVector<f64>) {
    let d = nmat.ncols();
    // constraints a·(c,t) ≤ b
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for &i in positive {
        let mut a = vec![0.0; d + 1];
        for j in 0..d {
            a[j] = -nmat[(i, j)];
        }
        a[d] = 1.0;
        rows.push((a, s[i]));
    }
    for j in 0..d {
        let mut a = vec![0.0; d + 1];
        a[j] = 1.0;
        rows.push((a.clone(), bound));
        a[j] = -1.0;
        rows.push((a, bound));
    }
    let mut cap = vec![0.0; d + 1];
    cap[d] = 1.0;
    rows.push((cap, 1.0));
    let dim = d + 1;
    let mut best = (f64::NEG_INFINITY, DVector::zeros(d));
    let mut idx: Vec<usize> = (0..dim).collect();
    if rows.len() < dim {
        return best;
    }
    loop {
        let a = DMatrix::from_fn(dim, dim, |r, c| rows[idx[r]].0[c]);
        let b = DVector::from_fn(dim, |r, _| rows[idx[r]].1);
        if let Some(x) = a.lu().solve(&b) {
            let feasible = rows.iter().all(|(ar, br)| {
                let lhs: f64 = ar.iter().zip(x.iter()).map(|(p, q)| p * q).sum();
                lhs <= br + 1e-12 * (1.0 + br.abs())
            });
            if feasible && x[d] > best.0 {
                best = (x[d], x.rows(0, d).into_owned());
            }
        }
        // next combination
        let mut k = dim;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if idx[k] != k + rows.len() - dim {
                break;
            }
            if k == 0 {
                return best;
            }
        }
        idx[k] += 1;
        for r in (k + 1)..dim {
            idx[r] = idx[r - 1] + 1;
        }
    }
}
