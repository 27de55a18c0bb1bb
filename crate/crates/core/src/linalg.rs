//! Small dense complex linear algebra used cell by cell.

use nalgebra::DMatrix;

use crate::{CMatrix, CVector, C64};

/// Singular values in non-increasing order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return vec![];
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Largest singular value; zero for empty matrices.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Smallest singular value of a square matrix; `+∞` for the empty matrix.
pub fn smallest_singular_value(m: &CMatrix) -> f64 {
    singular_values(m).last().copied().unwrap_or(f64::INFINITY)
}

/// Number of singular values strictly above `rank_tol · scale`.
pub fn numerical_rank(svals: &[f64], rank_tol: f64, scale: f64) -> usize {
    let threshold = rank_tol * scale;
    svals.iter().filter(|&&s| s > threshold).count()
}

/// Unitary DFT matrix `F_{jk} = e^{-2πi jk/n}/√n`.
pub fn dft_unitary(n: usize) -> CMatrix {
    let s = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(n, n, |j, k| {
        C64::from_polar(s, -2.0 * std::f64::consts::PI * ((j * k) % n) as f64 / n as f64)
    })
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Orthogonal projector `B B*` onto the span of orthonormal columns.
pub fn projector(basis: &CMatrix) -> CMatrix {
    basis * basis.adjoint()
}

/// Modified Gram–Schmidt with one re-orthogonalisation pass. Columns whose
/// residual falls below `drop_tol` (relative to their original norm) are
/// dropped.
pub fn gram_schmidt(m: &CMatrix, drop_tol: f64) -> CMatrix {
    let rows = m.nrows();
    let mut out: Vec<CVector> = Vec::with_capacity(m.ncols());
    for j in 0..m.ncols() {
        let orig = m.column(j).into_owned();
        let n0 = orig.norm();
        if n0 == 0.0 {
            continue;
        }
        let mut v = orig;
        for _ in 0..2 {
            for q in &out {
                let c = q.dotc(&v);
                v -= q * c;
            }
        }
        let nv = v.norm();
        if nv > drop_tol * n0 {
            out.push(v / C64::from(nv));
        }
    }
    if out.is_empty() {
        return CMatrix::zeros(rows, 0);
    }
    CMatrix::from_columns(&out)
}

/// Column order of a column-pivoted modified Gram–Schmidt sweep: at each step
/// the column with the largest residual norm is taken, ties going to the
/// lowest index. Returns the first `k` pivots and the orthonormalised
/// columns in pivot order.
pub fn pivoted_orthonormal(m: &CMatrix, k: usize) -> (Vec<usize>, CMatrix) {
    let rows = m.nrows();
    let mut work: Vec<CVector> = (0..m.ncols()).map(|j| m.column(j).into_owned()).collect();
    let mut used = vec![false; m.ncols()];
    let mut pivots = Vec::with_capacity(k);
    let mut q: Vec<CVector> = Vec::with_capacity(k);
    for _ in 0..k.min(m.ncols()) {
        let mut best: Option<(usize, f64)> = None;
        for (j, w) in work.iter().enumerate() {
            if used[j] {
                continue;
            }
            let n = w.norm();
            match best {
                Some((_, b)) if n <= b => {}
                _ => best = Some((j, n)),
            }
        }
        let Some((j, n)) = best else { break };
        if n == 0.0 {
            break;
        }
        used[j] = true;
        pivots.push(j);
        let mut v = work[j].clone();
        // second pass against the accepted directions
        for p in &q {
            let c = p.dotc(&v);
            v -= p * c;
        }
        let nv = v.norm();
        let qj = v / C64::from(nv);
        for (i, w) in work.iter_mut().enumerate() {
            if !used[i] {
                let c = qj.dotc(w);
                *w -= &qj * c;
            }
        }
        q.push(qj);
    }
    let basis = if q.is_empty() {
        CMatrix::zeros(rows, 0)
    } else {
        CMatrix::from_columns(&q)
    };
    (pivots, basis)
}

/// Orthonormal basis of the null space: right singular vectors whose
/// singular value is at most `abs_tol`.
pub fn null_space(m: &CMatrix, abs_tol: f64) -> CMatrix {
    let n = m.ncols();
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return identity(n);
    }
    // pad so the SVD returns a full set of right singular vectors
    let rows = m.nrows().max(n);
    let mut padded = CMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^*");
    let mut cols = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= abs_tol {
            cols.push(v_t.row(i).adjoint());
        }
    }
    if cols.is_empty() {
        CMatrix::zeros(n, 0)
    } else {
        gram_schmidt(&CMatrix::from_columns(&cols), 1e-8)
    }
}

/// Orthonormal basis of the orthogonal complement of the span of the
/// orthonormal columns of `basis` inside `C^n`.
pub fn orthogonal_complement(basis: &CMatrix, n: usize) -> CMatrix {
    if basis.ncols() == 0 {
        return identity(n);
    }
    null_space(&basis.adjoint(), 1e-10)
}

/// Sine of the largest principal angle between two subspaces given by
/// orthonormal bases. Returns 1 when the dimensions differ.
pub fn subspace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    if a.ncols() != b.ncols() {
        return 1.0;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    let residual = b - a * (a.adjoint() * b);
    spectral_norm(&residual)
}

/// Stack column blocks side by side.
pub fn hstack(blocks: &[&CMatrix], rows: usize) -> CMatrix {
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        out.view_mut((0, c), (rows, b.ncols())).copy_from(*b);
        c += b.ncols();
    }
    out
}

/// Largest absolute entry.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn from_real_rows(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
    DMatrix::from_row_slice(rows, cols, &data.iter().map(|&x| C64::from(x)).collect::<Vec<_>>())
}

/// Inverse of a square matrix via LU; `None` if singular.
pub fn inverse(m: &CMatrix) -> Option<CMatrix> {
    if m.nrows() == 0 {
        return Some(CMatrix::zeros(0, 0));
    }
    m.clone().try_inverse()
}

/// Moore–Penrose pseudo-inverse with relative cutoff.
pub fn pseudo_inverse(m: &CMatrix, rel_tol: f64) -> CMatrix {
    if m.nrows() == 0 || m.ncols() == 0 {
        return CMatrix::zeros(m.ncols(), m.nrows());
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = rel_tol * smax;
    svd.pseudo_inverse(eps.max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| CMatrix::zeros(m.ncols(), m.nrows()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_wide_matrix() {
        let m = from_real_rows(1, 3, &[1.0, 1.0, 0.0]);
        let ns = null_space(&m, 1e-12);
        assert_eq!(ns.ncols(), 2);
        assert!((&m * &ns).norm() < 1e-14);
        assert!((ns.adjoint() * &ns - identity(2)).norm() < 1e-14);
    }

    #[test]
    fn complement_of_line() {
        let line = from_real_rows(2, 1, &[1.0, 0.0]);
        let c = orthogonal_complement(&line, 2);
        assert_eq!(c.ncols(), 1);
        assert!((c[(1, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pivoting_prefers_lowest_index_on_ties() {
        let m = identity(3);
        let (p, q) = pivoted_orthonormal(&m, 3);
        assert_eq!(p, vec![0, 1, 2]);
        assert!((q - identity(3)).norm() < 1e-15);
    }
}
