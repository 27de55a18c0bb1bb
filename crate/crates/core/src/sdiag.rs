//! s-eigenvalues, the angle test, s-diagonalizations and their synthesis.

use std::fmt;

use crate::eigen::{
    default_cluster_tol, eigenspace_field, fiber_spectra, paste_eigenvalues, FiberSpectrum,
    PastedEigenvalue,
};
use crate::error::{Error, Result};
use crate::fiberize::LatticeWindow;
use crate::fields::{
    certified_lower_bound, ess_sup_at, exp_mode, FrequencyGrid, MeasurableMask, ScalarField,
    TrigPoly,
};
use crate::linalg;
use crate::rangeop::{KernelField, RangeOperatorField};
use crate::{CMatrix, CVector, C64};

pub const DEFAULT_MARGIN: f64 = 0.01;
pub const DEFAULT_FIT_DEGREE: i64 = 16;
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Commutator tolerance (relative to `K_R²`) for spectral synthesis.
pub const NORMAL_TOL: f64 = 1e-8;

/// Tolerance set shared by the pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative singular-value threshold for ranks and kernels.
    pub rank: f64,
    /// Eigenvalue clustering distance; `None` means `1e-6 · max(1, K_R)`.
    pub cluster: Option<f64>,
    /// Required gap below 1 for `ess sup C_b`.
    pub margin: f64,
    /// Invertibility threshold; `None` means `1e-8 · K_R`.
    pub lower: Option<f64>,
    /// Degree of the trigonometric fit of each eigenvalue function.
    pub fit_degree: i64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank: DEFAULT_RANK_TOL,
            cluster: None,
            margin: DEFAULT_MARGIN,
            lower: None,
            fit_degree: DEFAULT_FIT_DEGREE,
        }
    }
}

impl Tolerances {
    pub fn cluster_for(&self, k_r: f64) -> f64 {
        self.cluster.unwrap_or_else(|| default_cluster_tol(k_r))
    }

    pub fn lower_for(&self, k_r: f64) -> f64 {
        self.lower.unwrap_or(1e-8 * k_r)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, value: f64| Err(Error::InvalidTolerance { name, value });
        if !(self.rank > 0.0 && self.rank < 1.0) {
            return bad("rank", self.rank);
        }
        if let Some(c) = self.cluster {
            if !(c > 0.0) || !c.is_finite() {
                return bad("cluster", c);
            }
        }
        if !(0.0..1.0).contains(&self.margin) {
            return bad("margin", self.margin);
        }
        if let Some(l) = self.lower {
            if !(l >= 0.0) || !l.is_finite() {
                return bad("lower", l);
            }
        }
        if self.fit_degree < 0 {
            return bad("fit_degree", self.fit_degree as f64);
        }
        Ok(())
    }
}

/// Finite sequence `a` with its symbol `â(ω) = Σ a_k e^{-2πi⟨ω,k⟩}` sampled
/// on a grid.
#[derive(Debug, Clone)]
pub struct SymbolSequence {
    dim: usize,
    coeffs: Vec<(Vec<i64>, C64)>,
    samples: ScalarField<C64>,
    bound: f64,
    residual: f64,
}

impl SymbolSequence {
    /// Duplicate indices are summed; coefficients are kept in lexicographic
    /// index order.
    pub fn from_coefficients(grid: FrequencyGrid, coeffs: Vec<(Vec<i64>, C64)>) -> Result<Self> {
        let dim = grid.dim();
        let mut merged: Vec<(Vec<i64>, C64)> = Vec::with_capacity(coeffs.len());
        for (k, c) in coeffs {
            if k.len() != dim {
                return Err(Error::DimensionMismatch(format!("index {k:?} in dimension {dim}")));
            }
            match merged.iter_mut().find(|(m, _)| *m == k) {
                Some(e) => e.1 += c,
                None => merged.push((k, c)),
            }
        }
        merged.sort_by(|a, b| a.0.cmp(&b.0));
        let poly = TrigPoly::new(dim, merged.clone())?;
        let samples = poly.sample(grid);
        let bound = samples.values().iter().map(|z| z.norm()).fold(0.0, f64::max);
        Ok(Self {
            dim,
            coeffs: merged,
            samples,
            bound,
            residual: 0.0,
        })
    }

    /// `a = c δ_0`.
    pub fn constant(grid: FrequencyGrid, c: C64) -> Self {
        Self::from_coefficients(grid, vec![(vec![0; grid.dim()], c)]).expect("matching dimension")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> FrequencyGrid {
        self.samples.grid()
    }

    pub fn coefficients(&self) -> &[(Vec<i64>, C64)] {
        &self.coeffs
    }

    /// Largest `‖k‖_∞` in the support.
    pub fn radius(&self) -> i64 {
        self.coeffs
            .iter()
            .flat_map(|(k, _)| k.iter().map(|x| x.abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, omega: &[f64]) -> C64 {
        self.coeffs.iter().map(|(k, c)| c * exp_mode(omega, k)).sum()
    }

    pub fn samples(&self) -> &ScalarField<C64> {
        &self.samples
    }

    /// `max |â|` over the grid.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Largest fit error against the field it was fitted to.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn with_residual(mut self, residual: f64) -> Self {
        self.residual = residual;
        self
    }

    pub fn trig(&self) -> TrigPoly {
        TrigPoly::new(self.dim, self.coeffs.clone()).expect("matching dimension")
    }
}

/// Least-squares trigonometric fit of degree at most `fit_degree` on the
/// whole grid.
pub fn symbol_from_field(lam: &ScalarField<C64>, fit_degree: i64) -> Result<SymbolSequence> {
    symbol_from_field_on(lam, &MeasurableMask::full(lam.grid()), fit_degree)
}

/// Least-squares fit restricted to the cells of `mask`. The degree is
/// lowered when the mask has too few cells to determine it.
pub fn symbol_from_field_on(
    lam: &ScalarField<C64>,
    mask: &MeasurableMask,
    fit_degree: i64,
) -> Result<SymbolSequence> {
    let grid = lam.grid();
    let d = grid.dim() as u32;
    if fit_degree < 0 {
        return Err(Error::InvalidTolerance {
            name: "fit_degree",
            value: fit_degree as f64,
        });
    }
    let count = mask.count();
    if count == 0 {
        return Ok(SymbolSequence::constant(grid, C64::from(0.0)));
    }
    let full = count == grid.len();
    let capacity = if full { grid.len() } else { (count / 2).max(1) };
    let mut k = fit_degree;
    while k > 0 && (((2 * k + 1) as usize).pow(d) > capacity || (full && (2 * k + 1) as usize > grid.n_per_dim())) {
        k -= 1;
    }
    let modes = LatticeWindow::new(grid.dim(), k)?.points().to_vec();
    let cells: Vec<usize> = mask.cells().collect();
    let centers: Vec<Vec<f64>> = cells.iter().map(|&t| grid.center(t)).collect();

    let raw: Vec<C64> = if full {
        // the modes are orthogonal on the full grid, so the fit is a DFT
        modes
            .iter()
            .map(|m| {
                let s: C64 = cells
                    .iter()
                    .zip(&centers)
                    .map(|(&t, w)| lam.get(t) * exp_mode(w, m).conj())
                    .sum();
                s / count as f64
            })
            .collect()
    } else {
        let a = CMatrix::from_fn(cells.len(), modes.len(), |i, j| exp_mode(&centers[i], &modes[j]));
        let b = CVector::from_iterator(cells.len(), cells.iter().map(|&t| *lam.get(t)));
        let pinv = linalg::pseudo_inverse(&a, 1e-13);
        let mut x = &pinv * &b;
        // one refinement step recovers accuracy lost to the cutoff
        x += &pinv * (&b - &a * &x);
        x.iter().copied().collect()
    };
    let top = raw.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let coeffs: Vec<(Vec<i64>, C64)> = modes
        .into_iter()
        .zip(raw)
        .filter(|(_, c)| c.norm() > 1e-13 * top)
        .collect();
    let sym = SymbolSequence::from_coefficients(grid, coeffs)?;
    let residual = cells
        .iter()
        .map(|&t| (lam.get(t) - sym.samples().get(t)).norm())
        .fold(0.0, f64::max);
    Ok(sym.with_residual(residual))
}

/// `c_b(M_1, …, M_r) = ‖P_{M_r} ⋯ P_{M_1} P_{M_0^⊥}‖` with `M_0 = ∩ M_j`,
/// for orthonormal bases in `C^n`.
pub fn angle_cb(subspaces: &[CMatrix], n: usize) -> f64 {
    if subspaces.len() < 2 || n == 0 {
        return 0.0;
    }
    let mut stacked = CMatrix::zeros(subspaces.len() * n, n);
    for (i, b) in subspaces.iter().enumerate() {
        let c = linalg::identity(n) - linalg::projector(b);
        stacked.view_mut((i * n, 0), (n, n)).copy_from(&c);
    }
    let m0 = linalg::null_space(&stacked, 1e-9);
    let mut prod = linalg::identity(n) - linalg::projector(&m0);
    for b in subspaces {
        prod = linalg::projector(b) * prod;
    }
    linalg::spectral_norm(&prod)
}

/// Per-cell `C_b(ω)`: the angle of the complements of the nonzero
/// eigenspaces. Also returns the cells where the eigenspaces do not add up
/// to the fiber dimension; `C_b` is set to 1 there.
pub fn cb_from_eigenspaces(
    dims: &[usize],
    eigenspaces: &[&KernelField],
    grid: FrequencyGrid,
) -> (ScalarField<f64>, MeasurableMask) {
    let defect = MeasurableMask::from_cells(grid, |t| {
        eigenspaces.iter().map(|e| e.nullity(t)).sum::<usize>() != dims[t]
    });
    let cb = ScalarField::from_cells(grid, |t| {
        if defect.contains(t) {
            return 1.0;
        }
        let n = dims[t];
        let comps: Vec<CMatrix> = eigenspaces
            .iter()
            .filter(|e| e.nullity(t) > 0)
            .map(|e| linalg::orthogonal_complement(e.basis(t), n))
            .collect();
        if comps.len() <= 1 {
            0.0
        } else {
            angle_cb(&comps, n)
        }
    });
    (cb, defect)
}

/// `C_b(ω)` for the eigenspaces of the pasted eigenvalues.
pub fn cb_field(
    r: &RangeOperatorField,
    pasted: &[PastedEigenvalue],
    rank_tol: f64,
) -> Result<ScalarField<f64>> {
    let spaces: Vec<KernelField> = pasted.iter().map(|l| eigenspace_field(r, l, rank_tol)).collect();
    let refs: Vec<&KernelField> = spaces.iter().collect();
    let (cb, defect) = cb_from_eigenspaces(r.frame().dims(), &refs, r.grid());
    if !defect.is_empty() {
        return Err(Error::DefectiveFibers {
            count: defect.count(),
            mask: defect,
        });
    }
    Ok(cb)
}

/// One s-eigenvalue with its eigenspace.
#[derive(Debug, Clone)]
pub struct SEigenpair {
    lambda: ScalarField<C64>,
    symbol: Option<SymbolSequence>,
    eigenspace: KernelField,
    spectrum: MeasurableMask,
}

impl SEigenpair {
    pub fn new(
        lambda: ScalarField<C64>,
        symbol: Option<SymbolSequence>,
        eigenspace: KernelField,
        spectrum: MeasurableMask,
    ) -> Self {
        Self {
            lambda,
            symbol,
            eigenspace,
            spectrum,
        }
    }

    /// Sampled `â(ω)`.
    pub fn lambda(&self) -> &ScalarField<C64> {
        &self.lambda
    }

    pub fn symbol(&self) -> Option<&SymbolSequence> {
        self.symbol.as_ref()
    }

    /// `J_{V_a}(ω)` in frame coordinates.
    pub fn eigenspace(&self) -> &KernelField {
        &self.eigenspace
    }

    /// `σ(V_a)`.
    pub fn spectrum(&self) -> &MeasurableMask {
        &self.spectrum
    }

    /// Tolerance for signal-level checks: `max(1e-8, 10 × fit residual)`.
    pub fn action_tol(&self) -> f64 {
        let fit = self.symbol.as_ref().map_or(0.0, |s| s.residual());
        (10.0 * fit).max(1e-8)
    }
}

/// Ordered direct-sum decomposition of `V` into s-eigenspaces.
#[derive(Debug, Clone)]
pub struct SDiagonalization {
    grid: FrequencyGrid,
    dims: Vec<usize>,
    pairs: Vec<SEigenpair>,
    g: usize,
    k_r: f64,
    cluster_tol: f64,
    fit_degree: i64,
    ess_sup_cb: f64,
}

impl SDiagonalization {
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        grid: FrequencyGrid,
        dims: Vec<usize>,
        pairs: Vec<SEigenpair>,
        g: usize,
        k_r: f64,
        cluster_tol: f64,
        fit_degree: i64,
        ess_sup_cb: f64,
    ) -> Result<Self> {
        if dims.len() != grid.len() {
            return Err(Error::InvalidDecomposition("dimension field length".into()));
        }
        for (j, p) in pairs.iter().enumerate() {
            if p.lambda.grid() != grid || p.spectrum.grid() != grid || p.eigenspace.grid() != grid {
                return Err(Error::InvalidDecomposition(format!("pair {} on another grid", j + 1)));
            }
            for (t, &n) in dims.iter().enumerate() {
                if p.eigenspace.ambient_dim(t) != n {
                    return Err(Error::InvalidDecomposition(format!(
                        "pair {} has eigenspace ambient {} at cell {t}, fiber dimension {n}",
                        j + 1,
                        p.eigenspace.ambient_dim(t)
                    )));
                }
            }
        }
        Ok(Self {
            grid,
            dims,
            pairs,
            g,
            k_r,
            cluster_tol,
            fit_degree,
            ess_sup_cb,
        })
    }

    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn pairs(&self) -> &[SEigenpair] {
        &self.pairs
    }

    /// Number of pairs `m`.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn g(&self) -> usize {
        self.g
    }

    /// Minimal decomposition size, `β(V, L) = 𝔤`.
    pub fn beta(&self) -> usize {
        self.g
    }

    pub fn is_minimal(&self) -> bool {
        self.pairs.len() == self.beta()
    }

    /// `σ(V_{a_{j+1}}) ⊆ σ(V_{a_j})` for all `j`.
    pub fn is_nested(&self) -> bool {
        self.pairs
            .windows(2)
            .all(|w| w[1].spectrum.is_subset(&w[0].spectrum))
    }

    pub fn k_r(&self) -> f64 {
        self.k_r
    }

    pub fn cluster_tol(&self) -> f64 {
        self.cluster_tol
    }

    pub fn fit_degree(&self) -> i64 {
        self.fit_degree
    }

    pub fn ess_sup_cb(&self) -> f64 {
        self.ess_sup_cb
    }

    /// Eigenspace bases side by side, `n(ω) × Σ_j dim`.
    pub fn direct_sum_basis(&self, cell: usize) -> CMatrix {
        let blocks: Vec<&CMatrix> = self.pairs.iter().map(|p| p.eigenspace.basis(cell)).collect();
        linalg::hstack(&blocks, self.dims[cell])
    }

    /// Eigenvalue of each basis column of [`Self::direct_sum_basis`].
    pub fn direct_sum_eigenvalues(&self, cell: usize) -> Vec<C64> {
        self.pairs
            .iter()
            .flat_map(|p| std::iter::repeat_n(*p.lambda.get(cell), p.eigenspace.nullity(cell)))
            .collect()
    }

    /// `C_b(ω)` recomputed from the stored eigenspaces.
    pub fn cb(&self) -> ScalarField<f64> {
        let refs: Vec<&KernelField> = self.pairs.iter().map(|p| &p.eigenspace).collect();
        cb_from_eigenspaces(&self.dims, &refs, self.grid).0
    }

    /// Checks every structural invariant against `r` (and, when given,
    /// the fiber spectra for `h = k`).
    pub fn validate(&self, r: &RangeOperatorField, spectra: Option<&FiberSpectrum>) -> DecompositionCheck {
        let mut failures = Vec::new();
        let scale = self.k_r.max(1.0);
        if r.frame().dims() != self.dims.as_slice() {
            failures.push("fiber dimensions differ from the operator".to_string());
            return DecompositionCheck {
                failures,
                ..DecompositionCheck::default()
            };
        }
        let mut eigen_residual = 0.0f64;
        let mut min_sigma = f64::INFINITY;
        let mut min_separation = f64::INFINITY;
        let mut orthonormality = 0.0f64;
        for t in 0..self.grid.len() {
            let n = self.dims[t];
            let m = r.get(t);
            for (j, p) in self.pairs.iter().enumerate() {
                let b = p.eigenspace.basis(t);
                let nz = b.ncols() > 0;
                if nz != p.spectrum.contains(t) {
                    failures.push(format!("pair {}: eigenspace and spectrum disagree at cell {t}", j + 1));
                }
                if nz {
                    let lam = *p.lambda.get(t);
                    let res = linalg::spectral_norm(&(m * b - b * lam));
                    eigen_residual = eigen_residual.max(res / scale);
                    let gram = b.adjoint() * b - linalg::identity(b.ncols());
                    orthonormality = orthonormality.max(linalg::max_abs(&gram));
                }
                for q in &self.pairs[j + 1..] {
                    if p.spectrum.contains(t) && q.spectrum.contains(t) {
                        min_separation = min_separation.min((p.lambda.get(t) - q.lambda.get(t)).norm());
                    }
                }
            }
            let s = self.direct_sum_basis(t);
            if s.ncols() != n {
                failures.push(format!("cell {t}: {} eigenvectors for dimension {n}", s.ncols()));
            } else if n > 0 {
                min_sigma = min_sigma.min(linalg::smallest_singular_value(&s));
            }
        }
        if eigen_residual > 1e-8 {
            failures.push(format!("eigen residual {eigen_residual:e}"));
        }
        if orthonormality > 1e-10 {
            failures.push(format!("eigenspace bases not orthonormal ({orthonormality:e})"));
        }
        if min_separation < self.cluster_tol {
            failures.push(format!("eigenvalues {min_separation:e} apart on a shared support"));
        }
        if min_sigma.is_finite() && min_sigma < 1e-12 {
            failures.push(format!("eigenspaces not independent (σ_min {min_sigma:e})"));
        }
        let h_equals_k = spectra.map(|s| verify_h_equals_k(self, s));
        if h_equals_k == Some(false) {
            failures.push("h(ω) differs from k(ω)".to_string());
        }
        DecompositionCheck {
            eigen_residual,
            min_direct_sum_sigma: min_sigma,
            min_separation,
            orthonormality,
            h_equals_k,
            nested: self.is_nested(),
            failures,
        }
    }
}

/// Outcome of [`SDiagonalization::validate`].
#[derive(Debug, Clone)]
pub struct DecompositionCheck {
    /// `max ‖[R]B − λB‖ / max(1, K_R)` over pairs and cells.
    pub eigen_residual: f64,
    /// Smallest singular value of the stacked eigenspace bases.
    pub min_direct_sum_sigma: f64,
    /// Smallest eigenvalue gap where two spectra overlap.
    pub min_separation: f64,
    pub orthonormality: f64,
    pub h_equals_k: Option<bool>,
    pub nested: bool,
    pub failures: Vec<String>,
}

impl Default for DecompositionCheck {
    fn default() -> Self {
        Self {
            eigen_residual: 0.0,
            min_direct_sum_sigma: f64::INFINITY,
            min_separation: f64::INFINITY,
            orthonormality: 0.0,
            h_equals_k: None,
            nested: true,
            failures: vec![],
        }
    }
}

impl DecompositionCheck {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Why a field is not s-diagonalizable.
#[derive(Debug, Clone)]
pub enum NoReason {
    DefectiveFibers(MeasurableMask),
    AngleDegeneration { ess_sup: f64, cell: usize },
}

impl NoReason {
    pub fn label(&self) -> &'static str {
        match self {
            NoReason::DefectiveFibers(_) => "defective fibers",
            NoReason::AngleDegeneration { .. } => "angle degeneration",
        }
    }
}

impl fmt::Display for NoReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoReason::DefectiveFibers(mask) => {
                write!(f, "defective fibers on {} cells", mask.count())
            }
            NoReason::AngleDegeneration { ess_sup, cell } => {
                write!(f, "angle degeneration: ess sup C_b = {ess_sup} at cell {cell}")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum Verdict {
    Yes,
    No(NoReason),
}

impl Verdict {
    pub fn is_yes(&self) -> bool {
        matches!(self, Verdict::Yes)
    }
}

/// Result of [`decide_s_diagonalizable`] with the intermediate fields.
#[derive(Debug, Clone)]
pub struct Decision {
    pub verdict: Verdict,
    pub g: usize,
    pub k_r: f64,
    pub cluster_tol: f64,
    pub spectra: FiberSpectrum,
    pub pasted: Vec<PastedEigenvalue>,
    pub eigenspaces: Vec<KernelField>,
    pub defect_mask: MeasurableMask,
    /// Present when no fiber is defective.
    pub cb: Option<ScalarField<f64>>,
    pub ess_sup_cb: Option<f64>,
    /// Present on a YES verdict.
    pub decomposition: Option<SDiagonalization>,
    /// `σ(V_{a_j}) = {k(ω) ≥ j}` for every `j` (YES only).
    pub spectra_characterized: bool,
}

/// YES iff every fiber is diagonalizable and `ess sup C_b ≤ 1 − margin`.
/// On YES the decomposition has one pair per pasted eigenvalue.
pub fn decide_s_diagonalizable(r: &RangeOperatorField, tol: &Tolerances) -> Result<Decision> {
    tol.validate()?;
    let k_r = r.bound();
    let cluster_tol = tol.cluster_for(k_r);
    let spectra = fiber_spectra(r, cluster_tol)?;
    let pasted = paste_eigenvalues(&spectra, k_r);
    let g = pasted.len();
    let eigenspaces: Vec<KernelField> = pasted.iter().map(|l| eigenspace_field(r, l, tol.rank)).collect();
    let refs: Vec<&KernelField> = eigenspaces.iter().collect();
    let (cb, defect_mask) = cb_from_eigenspaces(r.frame().dims(), &refs, r.grid());

    let mut decision = Decision {
        verdict: Verdict::Yes,
        g,
        k_r,
        cluster_tol,
        spectra,
        pasted,
        eigenspaces,
        defect_mask: defect_mask.clone(),
        cb: None,
        ess_sup_cb: None,
        decomposition: None,
        spectra_characterized: false,
    };
    if !defect_mask.is_empty() {
        decision.verdict = Verdict::No(NoReason::DefectiveFibers(defect_mask));
        return Ok(decision);
    }
    let (ess, cell) = ess_sup_at(&cb, &MeasurableMask::full(r.grid()))?;
    decision.cb = Some(cb);
    decision.ess_sup_cb = Some(ess);
    if ess > 1.0 - tol.margin {
        decision.verdict = Verdict::No(NoReason::AngleDegeneration { ess_sup: ess, cell });
        return Ok(decision);
    }

    let mut pairs = Vec::with_capacity(g);
    for (lam, space) in decision.pasted.iter().zip(&decision.eigenspaces) {
        let spectrum = space.support();
        let symbol = symbol_from_field_on(lam.values(), &spectrum, tol.fit_degree)?;
        pairs.push(SEigenpair::new(lam.values().clone(), Some(symbol), space.clone(), spectrum));
    }
    decision.spectra_characterized = pairs.iter().enumerate().all(|(j, p)| {
        *p.spectrum() == MeasurableMask::from_cells(r.grid(), |t| decision.spectra.distinct_count(t) > j)
    });
    decision.decomposition = Some(SDiagonalization::from_parts(
        r.grid(),
        r.frame().dims().to_vec(),
        pairs,
        g,
        k_r,
        cluster_tol,
        tol.fit_degree,
        ess,
    )?);
    Ok(decision)
}

/// `‖[R](ω) − Σ_j λ_j(ω) P_j(ω)‖` with orthogonal projectors `P_j`.
pub fn spectral_synthesis(dec: &SDiagonalization, r: &RangeOperatorField) -> Result<ScalarField<f64>> {
    if !r.is_normal(NORMAL_TOL) {
        return Err(Error::NotNormal {
            defect: r.normality_defect(),
        });
    }
    if r.frame().dims() != dec.dims() {
        return Err(Error::InvalidDecomposition("fiber dimensions differ".into()));
    }
    Ok(ScalarField::from_cells(r.grid(), |t| {
        let mut sum = CMatrix::zeros(dec.dims[t], dec.dims[t]);
        for p in dec.pairs() {
            let b = p.eigenspace.basis(t);
            if b.ncols() > 0 {
                sum += linalg::projector(b) * *p.lambda.get(t);
            }
        }
        linalg::spectral_norm(&(r.get(t) - sum))
    }))
}

/// Result of [`oblique_synthesis`].
#[derive(Debug, Clone)]
pub struct ObliqueSynthesis {
    pub residual: ScalarField<f64>,
    /// Largest condition number of the stacked eigenspace bases.
    pub max_condition: f64,
    pub worst_cell: usize,
    /// Set when `max_condition` exceeds `1/(1 − ess sup C_b)²`.
    pub warning: Option<String>,
}

/// `‖[R](ω) − S Λ S⁻¹‖` with `S` the stacked eigenspace bases, i.e. the sum
/// of the eigenvalues times the oblique projectors of the direct sum.
pub fn oblique_synthesis(dec: &SDiagonalization, r: &RangeOperatorField) -> Result<ObliqueSynthesis> {
    if r.frame().dims() != dec.dims() {
        return Err(Error::InvalidDecomposition("fiber dimensions differ".into()));
    }
    let grid = r.grid();
    let mut residual = Vec::with_capacity(grid.len());
    let mut max_condition = 1.0f64;
    let mut worst_cell = 0;
    for t in 0..grid.len() {
        let n = dec.dims[t];
        let s = dec.direct_sum_basis(t);
        if s.ncols() != n {
            return Err(Error::InvalidDecomposition(format!(
                "cell {t}: {} eigenvectors for dimension {n}",
                s.ncols()
            )));
        }
        if n == 0 {
            residual.push(0.0);
            continue;
        }
        let inv = linalg::inverse(&s).ok_or_else(|| {
            Error::InvalidDecomposition(format!("cell {t}: eigenspaces are dependent"))
        })?;
        let lam = CMatrix::from_diagonal(&CVector::from_vec(dec.direct_sum_eigenvalues(t)));
        residual.push(linalg::spectral_norm(&(r.get(t) - &s * lam * inv)));
        let sv = linalg::singular_values(&s);
        let cond = sv[0] / sv[sv.len() - 1];
        if cond > max_condition {
            max_condition = cond;
            worst_cell = t;
        }
    }
    let c = dec.ess_sup_cb();
    let limit = if c < 1.0 { 1.0 / ((1.0 - c) * (1.0 - c)) } else { f64::INFINITY };
    let warning = (max_condition > limit).then(|| {
        format!("condition number {max_condition} at cell {worst_cell} exceeds 1/(1-c)^2 = {limit}")
    });
    Ok(ObliqueSynthesis {
        residual: ScalarField::new(grid, residual)?,
        max_condition,
        worst_cell,
        warning,
    })
}

/// Decomposition of `L⁻¹`: symbols `1/â_j`, same eigenspaces. Each `|â_j|`
/// must stay certifiably above `lower_bound_tol` on its spectrum.
pub fn invert_decomposition(dec: &SDiagonalization, lower_bound_tol: f64) -> Result<SDiagonalization> {
    let mut pairs = Vec::with_capacity(dec.len());
    let mut bound = 0.0f64;
    for p in dec.pairs() {
        if !p.spectrum.is_empty() {
            let modulus = p.lambda.map(|z| z.norm());
            let (b, raw, cell) = certified_lower_bound(&modulus, &p.spectrum)?;
            if b < lower_bound_tol || b <= 0.0 {
                return Err(Error::NotBoundedBelow {
                    cell,
                    sigma_min: raw,
                    bound: b,
                });
            }
        }
        let inv = p.lambda.map(|z| z.inv());
        for t in p.spectrum.cells() {
            bound = bound.max(inv.get(t).norm());
        }
        let symbol = match p.symbol {
            Some(_) => Some(symbol_from_field_on(&inv, &p.spectrum, dec.fit_degree)?),
            None => None,
        };
        pairs.push(SEigenpair::new(inv, symbol, p.eigenspace.clone(), p.spectrum.clone()));
    }
    SDiagonalization::from_parts(
        dec.grid,
        dec.dims.clone(),
        pairs,
        dec.g,
        bound,
        default_cluster_tol(bound).min(dec.cluster_tol),
        dec.fit_degree,
        dec.ess_sup_cb,
    )
}

/// `h(ω) = Σ_j χ_{σ(V_{a_j})}(ω)`.
pub fn h_field(dec: &SDiagonalization) -> ScalarField<usize> {
    ScalarField::from_cells(dec.grid, |t| {
        dec.pairs.iter().filter(|p| p.spectrum.contains(t)).count()
    })
}

/// `h(ω) = k(ω) = #Σ(ω)` on every cell.
pub fn verify_h_equals_k(dec: &SDiagonalization, spectra: &FiberSpectrum) -> bool {
    let h = h_field(dec);
    (0..dec.grid.len()).all(|t| *h.get(t) == spectra.distinct_count(t))
}

/// Splits pair `index` (zero-based) along `mask`: the pair keeps
/// `σ ∖ mask` and a new last pair takes `σ ∩ mask`. Off its support each
/// new symbol is padded with a value outside the spectrum.
pub fn split_spectrum(dec: &SDiagonalization, index: usize, mask: &MeasurableMask) -> Result<SDiagonalization> {
    let p = dec
        .pairs
        .get(index)
        .ok_or_else(|| Error::InvalidDecomposition(format!("no pair {}", index + 1)))?;
    let inside = p.spectrum.intersection(mask);
    let outside = p.spectrum.difference(mask);
    if inside.is_empty() || outside.is_empty() {
        return Err(Error::InvalidDecomposition(
            "split must leave both parts of the spectrum nonempty".into(),
        ));
    }
    let m = dec.len();
    let part = |keep: &MeasurableMask, padding: f64| -> Result<SEigenpair> {
        let lambda = ScalarField::from_cells(dec.grid, |t| {
            if keep.contains(t) {
                *p.lambda.get(t)
            } else {
                C64::from(padding)
            }
        });
        let bases = (0..dec.grid.len())
            .map(|t| {
                if keep.contains(t) {
                    p.eigenspace.basis(t).clone()
                } else {
                    CMatrix::zeros(dec.dims[t], 0)
                }
            })
            .collect();
        let space = KernelField::from_bases(dec.grid, dec.dims.clone(), bases)?;
        let symbol = match p.symbol {
            Some(_) => Some(symbol_from_field_on(&lambda, keep, dec.fit_degree)?),
            None => None,
        };
        Ok(SEigenpair::new(lambda, symbol, space, keep.clone()))
    };
    let kept = part(&outside, dec.k_r + (index + 1) as f64)?;
    let added = part(&inside, dec.k_r + (m + 1) as f64)?;
    let mut pairs = dec.pairs.clone();
    pairs[index] = kept;
    pairs.push(added);
    SDiagonalization::from_parts(
        dec.grid,
        dec.dims.clone(),
        pairs,
        dec.g,
        dec.k_r,
        dec.cluster_tol,
        dec.fit_degree,
        dec.ess_sup_cb,
    )
}
