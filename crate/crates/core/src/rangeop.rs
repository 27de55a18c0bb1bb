//! Range operators as per-cell matrices in a fiber frame.

use crate::error::{Error, Result};
use crate::fiberize::FiberFrame;
use crate::fields::{certified_lower_bound, FrequencyGrid, MatrixField, MeasurableMask, ScalarField};
use crate::linalg;
use crate::{CMatrix, CVector, C64};

/// Relative tolerance for "the action stays inside J(ω)".
pub const RANGE_TOL: f64 = 1e-8;

/// Exact pivot enumeration is used up to this fiber dimension.
pub const EXACT_PIVOT_MAX_DIM: usize = 4;

/// `[R](ω)` in the orthonormal frame of `J(ω)`, one `n(ω) × n(ω)` matrix per
/// cell, with `K_R = ess sup ‖[R](ω)‖`.
#[derive(Debug, Clone)]
pub struct RangeOperatorField {
    frame: FiberFrame,
    matrices: Vec<CMatrix>,
    bound: f64,
}

impl RangeOperatorField {
    pub fn from_matrices(frame: FiberFrame, matrices: Vec<CMatrix>) -> Result<Self> {
        if matrices.len() != frame.grid().len() {
            return Err(Error::DimensionMismatch(format!(
                "{} matrices for {} cells",
                matrices.len(),
                frame.grid().len()
            )));
        }
        for (t, m) in matrices.iter().enumerate() {
            let n = frame.dim(t);
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "cell {t}: matrix is {}x{}, fiber dimension is {n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        let bound = matrices
            .iter()
            .map(linalg::spectral_norm)
            .fold(0.0, f64::max);
        Ok(Self {
            frame,
            matrices,
            bound,
        })
    }

    /// Square matrix field of constant size, read in the standard frame.
    pub fn from_matrix_field(field: &MatrixField) -> Result<Self> {
        let grid = field.grid();
        let full = MeasurableMask::full(grid);
        let (r, c) = field
            .shape_on(&full)
            .ok_or_else(|| Error::DimensionMismatch("matrix size varies over the grid".into()))?;
        if r != c {
            return Err(Error::DimensionMismatch(format!("{r}x{c} matrices are not square")));
        }
        Self::from_matrices(FiberFrame::standard(grid, r), field.matrices().to_vec())
    }

    /// Operator given by an action on generator coefficients: `A(ω)` is
    /// `ℓ × ℓ` and the operator sends `Σ x_i Tφ_i(ω)` to `Σ (A x)_i Tφ_i(ω)`.
    /// In the frame this is `C A C⁺` with `C` the generator coordinates.
    /// Fails if the action does not respect the linear relations among the
    /// generators on some cell.
    pub fn from_generator_action(frame: FiberFrame, actions: &[CMatrix]) -> Result<Self> {
        let grid = frame.grid();
        if actions.len() != grid.len() {
            return Err(Error::DimensionMismatch("one generator action per cell".into()));
        }
        let mut mats = Vec::with_capacity(grid.len());
        for (t, a) in actions.iter().enumerate() {
            let c = frame.coords(t);
            if a.nrows() != c.ncols() || a.ncols() != c.ncols() {
                return Err(Error::DimensionMismatch(format!(
                    "cell {t}: action is {}x{}, {} generators",
                    a.nrows(),
                    a.ncols(),
                    c.ncols()
                )));
            }
            let ca = c * a;
            let r = &ca * linalg::pseudo_inverse(c, 1e-10);
            let defect = (&r * c - &ca).norm();
            let scale = ca.norm().max(1.0);
            if defect > RANGE_TOL * scale {
                return Err(Error::NotRangeOperator {
                    cell: t,
                    defect: defect / scale,
                });
            }
            mats.push(r);
        }
        Self::from_matrices(frame, mats)
    }

    pub fn frame(&self) -> &FiberFrame {
        &self.frame
    }

    pub fn grid(&self) -> FrequencyGrid {
        self.frame.grid()
    }

    pub fn get(&self, cell: usize) -> &CMatrix {
        &self.matrices[cell]
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    /// `K_R`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Per-cell spectral norms.
    pub fn norm_field(&self) -> ScalarField<f64> {
        ScalarField::from_cells(self.grid(), |t| linalg::spectral_norm(&self.matrices[t]))
    }

    fn map(&self, f: impl Fn(usize, &CMatrix) -> CMatrix) -> Self {
        let mats = self
            .matrices
            .iter()
            .enumerate()
            .map(|(t, m)| f(t, m))
            .collect();
        Self::from_matrices(self.frame.clone(), mats).expect("shape preserved")
    }

    /// Restriction to the subspace with spectrum inside `mask`.
    pub fn restrict(&self, mask: &MeasurableMask) -> Result<Self> {
        let frame = self.frame.restrict(mask)?;
        let mats = self
            .matrices
            .iter()
            .enumerate()
            .map(|(t, m)| if mask.contains(t) { m.clone() } else { CMatrix::zeros(0, 0) })
            .collect();
        Self::from_matrices(frame, mats)
    }

    /// `R(ω) − λ(ω) I`.
    pub fn shifted(&self, lam: &ScalarField<C64>) -> Self {
        self.map(|t, m| {
            let n = m.nrows();
            m - linalg::identity(n) * *lam.get(t)
        })
    }

    /// Cellwise product `self · other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.frame.dims() != other.frame.dims() {
            return Err(Error::DimensionMismatch("fiber dimensions differ".into()));
        }
        Ok(self.map(|t, m| m * other.get(t)))
    }

    /// Cellwise conjugate transpose.
    pub fn adjoint(&self) -> Self {
        self.map(|_, m| m.adjoint())
    }

    /// Largest per-cell `‖R R* − R* R‖`.
    pub fn normality_defect(&self) -> f64 {
        self.matrices
            .iter()
            .map(|m| {
                let a = m.adjoint();
                linalg::spectral_norm(&(m * &a - &a * m))
            })
            .fold(0.0, f64::max)
    }

    /// Largest per-cell `‖R − R*‖`.
    pub fn hermitian_defect(&self) -> f64 {
        self.matrices
            .iter()
            .map(|m| linalg::spectral_norm(&(m - m.adjoint())))
            .fold(0.0, f64::max)
    }

    /// Commutator within `tol · K_R²` on every cell.
    pub fn is_normal(&self, tol: f64) -> bool {
        self.normality_defect() <= tol * self.bound * self.bound
    }

    /// Hermitian defect within `tol · K_R` on every cell.
    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol * self.bound
    }

    /// Default invertibility tolerance `1e-8 · K_R`.
    pub fn default_lower_bound_tol(&self) -> f64 {
        1e-8 * self.bound
    }

    /// Cellwise inverse, provided the smallest singular value is certified
    /// to stay above `lower_bound_tol` over the spectrum.
    pub fn invert(&self, lower_bound_tol: f64) -> Result<Self> {
        if !(lower_bound_tol >= 0.0) {
            return Err(Error::InvalidTolerance {
                name: "lower_bound_tol",
                value: lower_bound_tol,
            });
        }
        let support = self.frame.spectrum();
        if !support.is_empty() {
            let smin = ScalarField::from_cells(self.grid(), |t| {
                linalg::smallest_singular_value(&self.matrices[t])
            });
            let (bound, raw, cell) = certified_lower_bound(&smin, &support)?;
            if bound < lower_bound_tol || bound <= 0.0 {
                return Err(Error::NotBoundedBelow {
                    cell,
                    sigma_min: raw,
                    bound,
                });
            }
        }
        let mut mats = Vec::with_capacity(self.matrices.len());
        for (t, m) in self.matrices.iter().enumerate() {
            let inv = linalg::inverse(m).ok_or(Error::NotBoundedBelow {
                cell: t,
                sigma_min: 0.0,
                bound: 0.0,
            })?;
            mats.push(inv);
        }
        Self::from_matrices(self.frame.clone(), mats)
    }

    /// Measurable kernel with rank threshold `rank_tol · max(K_R, σ_1(ω))`.
    pub fn kernel_field(&self, rank_tol: f64) -> KernelField {
        self.kernel_field_with_scale(rank_tol, self.bound)
    }

    /// As [`Self::kernel_field`] with `K_R` replaced by `scale`.
    pub fn kernel_field_with_scale(&self, rank_tol: f64, scale: f64) -> KernelField {
        let mut bases = Vec::with_capacity(self.matrices.len());
        let mut ranks = Vec::with_capacity(self.matrices.len());
        for m in &self.matrices {
            let (k, b) = cell_kernel(m, rank_tol, scale);
            ranks.push(k);
            bases.push(b);
        }
        KernelField {
            grid: self.grid(),
            dims: self.frame.dims().to_vec(),
            bases,
            ranks,
        }
    }
}

/// Matrix representation of an action on fiber vectors `C^M`: the entry
/// `(i, j)` is `⟨action(q_j), q_i⟩` for the frame columns `q`.
pub fn matrix_rep(
    frame: &FiberFrame,
    action: impl Fn(usize, &CVector) -> CVector,
) -> Result<RangeOperatorField> {
    let mut mats = Vec::with_capacity(frame.grid().len());
    for t in 0..frame.grid().len() {
        let b = frame.basis(t);
        let n = b.ncols();
        let mut m = CMatrix::zeros(n, n);
        for j in 0..n {
            let y = action(t, &b.column(j).into_owned());
            if y.len() != frame.ambient() {
                return Err(Error::DimensionMismatch(format!(
                    "action returned length {} at cell {t}",
                    y.len()
                )));
            }
            let coeffs = b.adjoint() * &y;
            let defect = (&y - b * &coeffs).norm();
            if defect > RANGE_TOL * y.norm().max(1.0) {
                return Err(Error::NotRangeOperator { cell: t, defect });
            }
            m.set_column(j, &coeffs);
        }
        mats.push(m);
    }
    RangeOperatorField::from_matrices(frame.clone(), mats)
}

/// `K_R = ess sup_ω ‖[R](ω)‖`.
pub fn op_norm(r: &RangeOperatorField) -> f64 {
    r.bound()
}

/// Per-cell orthonormal kernel bases with the rank partition `B_k`.
#[derive(Debug, Clone)]
pub struct KernelField {
    grid: FrequencyGrid,
    dims: Vec<usize>,
    bases: Vec<CMatrix>,
    ranks: Vec<usize>,
}

impl KernelField {
    pub fn from_bases(grid: FrequencyGrid, dims: Vec<usize>, bases: Vec<CMatrix>) -> Result<Self> {
        if dims.len() != grid.len() || bases.len() != grid.len() {
            return Err(Error::DimensionMismatch("one kernel basis per cell".into()));
        }
        let mut ranks = Vec::with_capacity(dims.len());
        for (t, (b, &n)) in bases.iter().zip(&dims).enumerate() {
            if b.nrows() != n || b.ncols() > n {
                return Err(Error::DimensionMismatch(format!("kernel basis shape at cell {t}")));
            }
            ranks.push(n - b.ncols());
        }
        Ok(Self {
            grid,
            dims,
            bases,
            ranks,
        })
    }

    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    pub fn basis(&self, cell: usize) -> &CMatrix {
        &self.bases[cell]
    }

    pub fn bases(&self) -> &[CMatrix] {
        &self.bases
    }

    pub fn nullity(&self, cell: usize) -> usize {
        self.bases[cell].ncols()
    }

    pub fn rank(&self, cell: usize) -> usize {
        self.ranks[cell]
    }

    pub fn ambient_dim(&self, cell: usize) -> usize {
        self.dims[cell]
    }

    /// `B_k = {ω : rank [R](ω) = k}`.
    pub fn rank_mask(&self, k: usize) -> MeasurableMask {
        MeasurableMask::from_cells(self.grid, |t| self.ranks[t] == k)
    }

    pub fn rank_masks(&self) -> Vec<MeasurableMask> {
        let top = self.dims.iter().copied().max().unwrap_or(0);
        (0..=top).map(|k| self.rank_mask(k)).collect()
    }

    /// Cells with a nonzero kernel.
    pub fn support(&self) -> MeasurableMask {
        MeasurableMask::from_cells(self.grid, |t| self.nullity(t) > 0)
    }
}

/// Numerical rank (threshold `rank_tol · max(scale, σ_1)`) and kernel basis
/// of one matrix.
pub fn cell_kernel(m: &CMatrix, rank_tol: f64, scale: f64) -> (usize, CMatrix) {
    let s = linalg::singular_values(m);
    let scale = scale.max(s.first().copied().unwrap_or(0.0));
    let k = linalg::numerical_rank(&s, rank_tol, scale);
    (k, kernel_basis(m, k))
}

/// Row and column indices of the pivot `k × k` submatrix.
///
/// Up to [`EXACT_PIVOT_MAX_DIM`] every submatrix is tried and the largest
/// `|det|` wins, ties going to the first in lexicographic (rows, cols)
/// order. Beyond that, columns come from a column-pivoted orthogonal sweep
/// and rows from the same sweep on the selected columns.
pub fn pivot_submatrix(m: &CMatrix, k: usize) -> (Vec<usize>, Vec<usize>) {
    let (rows, cols) = (m.nrows(), m.ncols());
    if k == 0 {
        return (vec![], vec![]);
    }
    if rows.max(cols) <= EXACT_PIVOT_MAX_DIM {
        let row_sets = subsets(rows, k);
        let col_sets = subsets(cols, k);
        let mut best: Option<(f64, usize, usize)> = None;
        for (ri, r) in row_sets.iter().enumerate() {
            for (ci, c) in col_sets.iter().enumerate() {
                let d = m.select_rows(r).select_columns(c).determinant().norm();
                match best {
                    Some((b, _, _)) if d <= b => {}
                    _ => best = Some((d, ri, ci)),
                }
            }
        }
        let (_, ri, ci) = best.expect("nonempty subset lists");
        return (row_sets[ri].clone(), col_sets[ci].clone());
    }
    let (mut c, _) = linalg::pivoted_orthonormal(m, k);
    c.sort_unstable();
    let sub = m.select_columns(&c).transpose();
    let (mut r, _) = linalg::pivoted_orthonormal(&sub, k);
    r.sort_unstable();
    (r, c)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Kernel basis of `m` assuming rank `k`: for each non-pivot column `f`,
/// `x_C = −M[R,C]⁻¹ M[R,f]`, `x_f = 1`, then Gram–Schmidt.
pub fn kernel_basis(m: &CMatrix, k: usize) -> CMatrix {
    let n = m.ncols();
    if k >= n {
        return CMatrix::zeros(n, 0);
    }
    if k == 0 {
        return linalg::identity(n);
    }
    let (r, c) = pivot_submatrix(m, k);
    let sub = m.select_rows(&r).select_columns(&c);
    let Some(inv) = linalg::inverse(&sub) else {
        return linalg::null_space(m, 0.0);
    };
    let free: Vec<usize> = (0..n).filter(|j| !c.contains(j)).collect();
    let mut raw = CMatrix::zeros(n, free.len());
    for (col, &f) in free.iter().enumerate() {
        let rhs: CVector = CVector::from_iterator(k, r.iter().map(|&i| m[(i, f)]));
        let x = -(&inv * rhs);
        for (p, &ci) in c.iter().enumerate() {
            raw[(ci, col)] = x[p];
        }
        raw[(f, col)] = C64::from(1.0);
    }
    linalg::gram_schmidt(&raw, 1e-12)
}
