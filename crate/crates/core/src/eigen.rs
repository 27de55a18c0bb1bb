//! Per-fiber eigenvalues and measurable pasting of eigenvalue functions.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::fields::{FrequencyGrid, MeasurableMask, ScalarField};
use crate::linalg;
use crate::rangeop::{cell_kernel, KernelField, RangeOperatorField};
use crate::{CMatrix, C64};

/// Schur iteration cap per cell.
const SCHUR_MAX_ITER: usize = 10_000;

/// Default clustering tolerance `1e-6 · max(1, K_R)`.
pub fn default_cluster_tol(k_r: f64) -> f64 {
    1e-6 * k_r.max(1.0)
}

/// Canonical order: real part, then imaginary part (each compared up to
/// `tol`), then modulus.
pub fn canonical_cmp(a: C64, b: C64, tol: f64) -> Ordering {
    if (a.re - b.re).abs() > tol {
        return a.re.total_cmp(&b.re);
    }
    if (a.im - b.im).abs() > tol {
        return a.im.total_cmp(&b.im);
    }
    a.norm().total_cmp(&b.norm())
}

/// Stable insertion sort under [`canonical_cmp`]. The comparison is not
/// transitive near the tolerance, so a fixed algorithm keeps the result
/// reproducible.
pub fn canonical_sort(values: &mut [C64], tol: f64) {
    for i in 1..values.len() {
        let mut j = i;
        while j > 0 && canonical_cmp(values[j - 1], values[j], tol) == Ordering::Greater {
            values.swap(j - 1, j);
            j -= 1;
        }
    }
}

/// Single-linkage clusters of `values` at distance `tol`. Returns the
/// cluster means and sizes, in canonical order.
pub fn cluster(values: &[C64], tol: f64) -> Vec<(C64, usize)> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut i = i;
        while p[i] != r {
            let next = p[i];
            p[i] = r;
            i = next;
        }
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<(usize, C64, usize)> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        match groups.iter_mut().find(|g| g.0 == r) {
            Some(g) => {
                g.1 += values[i];
                g.2 += 1;
            }
            None => groups.push((r, values[i], 1)),
        }
    }
    let mut out: Vec<(C64, usize)> = groups
        .into_iter()
        .map(|(_, s, c)| (s / c as f64, c))
        .collect();
    for i in 1..out.len() {
        let mut j = i;
        while j > 0 && canonical_cmp(out[j - 1].0, out[j].0, tol) == Ordering::Greater {
            out.swap(j - 1, j);
            j -= 1;
        }
    }
    out
}

/// Eigenvalues of one square matrix via complex Schur form.
///
/// Leftover 2×2 diagonal blocks of the Schur factor (which occur for
/// exactly repeated eigenvalues) are solved directly. If the iteration does
/// not converge it is retried on a fixed unitary rotation of `m`.
pub fn cell_eigenvalues(m: &CMatrix) -> Option<Vec<C64>> {
    let n = m.nrows();
    if n == 0 {
        return Some(vec![]);
    }
    let t = match m.clone().try_schur(f64::EPSILON, SCHUR_MAX_ITER) {
        Some(s) => s.unpack().1,
        None => {
            let q = linalg::dft_unitary(n);
            (q.adjoint() * m * &q).try_schur(f64::EPSILON, SCHUR_MAX_ITER)?.unpack().1
        }
    };
    let scale = linalg::max_abs(&t).max(f64::MIN_POSITIVE);
    let mut ev = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].norm() > f64::EPSILON * scale {
            let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let half = (a - d) * 0.5;
            let root = (half * half + b * c).sqrt();
            let mean = (a + d) * 0.5;
            ev.push(mean + root);
            ev.push(mean - root);
            i += 2;
        } else {
            ev.push(t[(i, i)]);
            i += 1;
        }
    }
    if ev.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    Some(ev)
}

/// Eigenvalues of `[R](ω)` on every cell, with their distinct values.
#[derive(Debug, Clone)]
pub struct FiberSpectrum {
    grid: FrequencyGrid,
    dims: Vec<usize>,
    eigenvalues: Vec<Vec<C64>>,
    distinct: Vec<Vec<(C64, usize)>>,
    cluster_tol: f64,
}

impl FiberSpectrum {
    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    pub fn cluster_tol(&self) -> f64 {
        self.cluster_tol
    }

    /// Eigenvalues with algebraic multiplicity, canonical order.
    pub fn eigenvalues(&self, cell: usize) -> &[C64] {
        &self.eigenvalues[cell]
    }

    /// Distinct eigenvalues `Σ(ω)` (cluster means), canonical order.
    pub fn distinct(&self, cell: usize) -> Vec<C64> {
        self.distinct[cell].iter().map(|d| d.0).collect()
    }

    /// Algebraic multiplicities matching [`Self::distinct`].
    pub fn multiplicities(&self, cell: usize) -> Vec<usize> {
        self.distinct[cell].iter().map(|d| d.1).collect()
    }

    /// `i(ω) = #Σ(ω)`.
    pub fn distinct_count(&self, cell: usize) -> usize {
        self.distinct[cell].len()
    }

    pub fn count_field(&self) -> ScalarField<usize> {
        ScalarField::from_cells(self.grid, |t| self.distinct_count(t))
    }

    pub fn fiber_dim(&self, cell: usize) -> usize {
        self.dims[cell]
    }

    /// `A_{n,i} = {ω : dim J(ω) = n, #Σ(ω) = i}`.
    pub fn partition_mask(&self, n: usize, i: usize) -> MeasurableMask {
        MeasurableMask::from_cells(self.grid, |t| self.dims[t] == n && self.distinct_count(t) == i)
    }

    /// `𝔤 = max_ω #Σ(ω)`.
    pub fn g(&self) -> usize {
        self.distinct.iter().map(|d| d.len()).max().unwrap_or(0)
    }

    /// `‖Π_i ([R](ω) − λ_i I)‖ / max(1, ‖[R](ω)‖)^n` on one cell.
    pub fn char_poly_residual(&self, r: &RangeOperatorField, cell: usize) -> f64 {
        let m = r.get(cell);
        let n = m.nrows();
        if n == 0 {
            return 0.0;
        }
        let mut p = linalg::identity(n);
        for &l in &self.eigenvalues[cell] {
            p = &p * (m - linalg::identity(n) * l);
        }
        let scale = linalg::spectral_norm(m).max(1.0).powi(n as i32);
        linalg::spectral_norm(&p) / scale
    }
}

/// Eigendecomposition and distinct-value clustering on every cell.
pub fn fiber_spectra(r: &RangeOperatorField, cluster_tol: f64) -> Result<FiberSpectrum> {
    if !(cluster_tol > 0.0) || !cluster_tol.is_finite() {
        return Err(Error::InvalidTolerance {
            name: "cluster_tol",
            value: cluster_tol,
        });
    }
    let grid = r.grid();
    let mut eigenvalues = Vec::with_capacity(grid.len());
    let mut distinct = Vec::with_capacity(grid.len());
    for t in 0..grid.len() {
        let mut ev = cell_eigenvalues(r.get(t)).ok_or(Error::EigenSolver(t))?;
        canonical_sort(&mut ev, cluster_tol);
        distinct.push(cluster(&ev, cluster_tol));
        eigenvalues.push(ev);
    }
    Ok(FiberSpectrum {
        grid,
        dims: r.frame().dims().to_vec(),
        eigenvalues,
        distinct,
        cluster_tol,
    })
}

/// Eigenvalue function `λ_j` over the whole grid.
#[derive(Debug, Clone)]
pub struct PastedEigenvalue {
    index: usize,
    values: ScalarField<C64>,
    support: MeasurableMask,
    padding: f64,
}

impl PastedEigenvalue {
    pub fn new(index: usize, values: ScalarField<C64>, support: MeasurableMask, padding: f64) -> Self {
        Self {
            index,
            values,
            support,
            padding,
        }
    }

    /// One-based index `j`.
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn values(&self) -> &ScalarField<C64> {
        &self.values
    }

    pub fn get(&self, cell: usize) -> C64 {
        *self.values.get(cell)
    }

    /// `C_j`, where `λ_j(ω)` is an actual eigenvalue.
    pub fn support(&self) -> &MeasurableMask {
        &self.support
    }

    /// `K_R + j`, used off the support.
    pub fn padding(&self) -> f64 {
        self.padding
    }
}

/// Exactly `𝔤` functions: `λ_j(ω)` is the `j`-th distinct eigenvalue in
/// canonical order where `#Σ(ω) ≥ j`, and `K_R + j` elsewhere.
pub fn paste_eigenvalues(spectra: &FiberSpectrum, k_r: f64) -> Vec<PastedEigenvalue> {
    let grid = spectra.grid();
    (1..=spectra.g())
        .map(|j| {
            let padding = k_r + j as f64;
            let support = MeasurableMask::from_cells(grid, |t| spectra.distinct_count(t) >= j);
            let values = ScalarField::from_cells(grid, |t| {
                spectra.distinct[t]
                    .get(j - 1)
                    .map_or(C64::from(padding), |d| d.0)
            });
            PastedEigenvalue::new(j, values, support, padding)
        })
        .collect()
}

/// `ker([R](ω) − λ_j(ω) I)` on every cell, with rank threshold relative to
/// `K_R`.
pub fn eigenspace_field(r: &RangeOperatorField, lam: &PastedEigenvalue, rank_tol: f64) -> KernelField {
    r.shifted(lam.values()).kernel_field_with_scale(rank_tol, r.bound())
}

/// Whether geometric multiplicities add up to `n(ω)` on every cell, and the
/// mask of cells where they do not.
pub fn diagonalizable_field(
    r: &RangeOperatorField,
    spectra: &FiberSpectrum,
    rank_tol: f64,
) -> (bool, MeasurableMask) {
    let defect = MeasurableMask::from_cells(r.grid(), |t| {
        geometric_total(r, spectra, t, rank_tol) != r.frame().dim(t)
    });
    (defect.is_empty(), defect)
}

/// `Σ_μ dim ker([R](ω) − μ I)` over the distinct eigenvalues of one cell.
pub fn geometric_total(r: &RangeOperatorField, spectra: &FiberSpectrum, cell: usize, rank_tol: f64) -> usize {
    let m = r.get(cell);
    let n = m.nrows();
    spectra
        .distinct(cell)
        .iter()
        .map(|&mu| {
            let (k, _) = cell_kernel(&(m - linalg::identity(n) * mu), rank_tol, r.bound());
            n - k
        })
        .sum()
}
