//! Small dense linear-algebra helpers shared by the knowledge-space modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Thin SVD with singular triplets sorted by decreasing singular value.
pub(crate) struct SortedSvd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    /// Right singular vectors as rows.
    pub v_t: DMatrix<f64>,
}

/// SVD through faer. nalgebra's bidiagonal SVD can return factorizations
/// that miss the input by O(1) on rank-deficient matrices (duplicated
/// columns, for instance), which are routine here.
pub(crate) fn sorted_svd(m: &DMatrix<f64>) -> Result<SortedSvd> {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(SortedSvd {
            u: DMatrix::zeros(rows, 0),
            singular_values: Vec::new(),
            v_t: DMatrix::zeros(0, cols),
        });
    }
    check_finite(m.iter(), "svd input")?;
    let svd = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)])
        .thin_svd()
        .map_err(|_| Error::Numerical("svd did not converge"))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    Ok(SortedSvd {
        u: DMatrix::from_fn(rows, k, |i, t| u[(i, order[t])]),
        singular_values: order.iter().map(|&t| s[t]).collect(),
        v_t: DMatrix::from_fn(k, cols, |t, j| v[(j, order[t])]),
    })
}

/// Rank and null space of the column space of `m` (`m` is tall: rows are
/// probe points, columns are functions).
///
/// Columns are equilibrated to unit norm before the SVD so that features of
/// very different magnitude over the domain do not masquerade as dependent.
/// Null vectors are returned in the original (unscaled) coordinates,
/// orthonormalized.
pub(crate) fn rank_and_null_space(m: &DMatrix<f64>, rel_tol: f64) -> Result<(usize, DMatrix<f64>)> {
    let cols = m.ncols();
    let scales: Vec<f64> = (0..cols).map(|j| m.column(j).norm()).collect();
    let mut scaled = m.clone();
    let mut zero_cols = Vec::new();
    for (j, &s) in scales.iter().enumerate() {
        if s > 0.0 {
            scaled.column_mut(j).scale_mut(1.0 / s);
        } else {
            zero_cols.push(j);
        }
    }
    let svd = sorted_svd(&scaled)?;
    let s_max = svd.singular_values.first().copied().unwrap_or(0.0);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > rel_tol * s_max && s > 0.0)
        .count();

    let mut null: Vec<DVector<f64>> = Vec::new();
    for k in rank..cols.min(svd.v_t.nrows()) {
        let mut v: DVector<f64> = svd.v_t.row(k).transpose();
        for j in 0..cols {
            if scales[j] > 0.0 {
                v[j] /= scales[j];
            }
        }
        null.push(v);
    }
    // A column that vanishes on every probe is its own null direction.
    for &j in &zero_cols {
        if !null.iter().any(|v| v[j].abs() > 0.5) {
            let mut v = DVector::zeros(cols);
            v[j] = 1.0;
            null.push(v);
        }
    }
    let null = orthonormalize(&null, cols);
    Ok((rank.min(cols - null.ncols()), null))
}

/// Numerical rank of any matrix (columns equilibrated after orienting it tall).
pub(crate) fn matrix_rank(m: &DMatrix<f64>, rel_tol: f64) -> Result<usize> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0);
    }
    if m.nrows() >= m.ncols() {
        Ok(rank_and_null_space(m, rel_tol)?.0)
    } else {
        Ok(rank_and_null_space(&m.transpose(), rel_tol)?.0)
    }
}

/// Modified Gram-Schmidt (two passes); drops vectors that collapse to zero.
pub(crate) fn orthonormalize(vectors: &[DVector<f64>], dim: usize) -> DMatrix<f64> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&w);
                w.axpy(-c, b, 1.0);
            }
        }
        let n = w.norm();
        if n > 1e-12 * v.norm().max(f64::MIN_POSITIVE) {
            basis.push(w / n);
        }
    }
    if basis.is_empty() {
        DMatrix::zeros(dim, 0)
    } else {
        DMatrix::from_columns(&basis)
    }
}

/// Orthonormal rows spanning the orthogonal complement of the columns of
/// `null` (which must be orthonormal). Each row is sign-fixed so that its
/// largest-magnitude entry is positive.
pub(crate) fn orthonormal_complement(null: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = null.nrows();
    if null.ncols() == 0 {
        return Ok(DMatrix::identity(dim, dim));
    }
    let projector = DMatrix::identity(dim, dim) - null * null.transpose();
    let (values, vectors) = symmetric_eigen(&projector);
    let mut rows = Vec::new();
    for (k, &lambda) in values.iter().enumerate() {
        if lambda > 0.5 {
            let mut v = vectors.column(k).into_owned();
            fix_sign(&mut v);
            rows.push(v.transpose());
        }
    }
    if rows.len() + null.ncols() != dim {
        return Err(Error::Numerical("complement dimension mismatch"));
    }
    Ok(DMatrix::from_rows(&rows))
}

/// Flip `v` so that its largest-magnitude entry is positive.
pub(crate) fn fix_sign(v: &mut DVector<f64>) {
    let pivot = v
        .iter()
        .copied()
        .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if pivot < 0.0 {
        v.neg_mut();
    }
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted
/// decreasingly; eigenvectors are the matching columns.
pub(crate) fn symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = symmetrize(m);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Minimum-norm least-squares solution of `a x = b`; singular values at or
/// below `rel_tol * s_max` are treated as zero. Returns the solution and the
/// numerical rank.
pub(crate) fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> Result<(DVector<f64>, usize)> {
    let svd = sorted_svd(a)?;
    let s_max = svd.singular_values.first().copied().unwrap_or(0.0);
    let mut x = DVector::zeros(a.ncols());
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > rel_tol * s_max && s > 0.0 {
            let coef = svd.u.column(k).dot(b) / s;
            x.axpy(coef, &svd.v_t.row(k).transpose(), 1.0);
            rank += 1;
        }
    }
    Ok((x, rank))
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

pub(crate) fn check_finite<'a>(values: impl IntoIterator<Item = &'a f64>, what: &'static str) -> Result<()> {
    if values.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
