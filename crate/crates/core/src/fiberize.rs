//! Fiberization and range-function frames.
//!
//! The fiber of `f` at `ω` is the sequence `{f̂(ω+k)}_k`. We truncate
//! `ℓ²(ℤ^d)` to a [`LatticeWindow`] of `M = (2K+1)^d` lattice points, so a
//! fiber is a vector in `C^M`. A finite generator family gives one `M × ℓ`
//! matrix per cell, and the fiber space `J(ω)` is its column span.

use crate::error::{Error, Result};
use crate::fields::{FrequencyGrid, MeasurableMask, TrigPoly, VectorField};
use crate::linalg;
use crate::{CMatrix, CVector, C64};

/// Default relative rank threshold on singular values.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Lattice points `k ∈ ℤ^d` with `‖k‖_∞ ≤ K`, enumerated lexicographically
/// (first coordinate slowest, each coordinate ascending from `-K`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeWindow {
    dim: usize,
    radius: i64,
    points: Vec<Vec<i64>>,
}

impl LatticeWindow {
    pub fn new(dim: usize, radius: i64) -> Result<Self> {
        if !(1..=2).contains(&dim) || radius < 0 {
            return Err(Error::WindowMismatch(format!(
                "window with dim {dim} and radius {radius}"
            )));
        }
        let side = 2 * radius + 1;
        let total = (side as usize).pow(dim as u32);
        let points = (0..total)
            .map(|mut idx| {
                let mut k = vec![0i64; dim];
                for axis in (0..dim).rev() {
                    k[axis] = (idx % side as usize) as i64 - radius;
                    idx /= side as usize;
                }
                k
            })
            .collect();
        Ok(Self {
            dim,
            radius,
            points,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    /// `M = (2K+1)^d`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<i64>] {
        &self.points
    }

    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        if k.len() != self.dim || k.iter().any(|x| x.abs() > self.radius) {
            return None;
        }
        let side = 2 * self.radius + 1;
        Some(k.iter().fold(0i64, |acc, &x| acc * side + (x + self.radius)) as usize)
    }
}

/// Per-cell fiber vectors `Tφ_i(ω) ∈ C^M` of a finite generator family.
#[derive(Debug, Clone)]
pub struct GeneratorSet {
    window: LatticeWindow,
    grid: FrequencyGrid,
    fibers: Vec<VectorField>,
}

impl GeneratorSet {
    pub fn from_fibers(
        window: LatticeWindow,
        grid: FrequencyGrid,
        fibers: Vec<VectorField>,
    ) -> Result<Self> {
        if window.dim() != grid.dim() {
            return Err(Error::WindowMismatch(format!(
                "window dim {} vs grid dim {}",
                window.dim(),
                grid.dim()
            )));
        }
        for (i, f) in fibers.iter().enumerate() {
            if f.grid() != grid {
                return Err(Error::WindowMismatch(format!("generator {i} lives on another grid")));
            }
            if let Some(v) = f.vectors().iter().find(|v| v.len() != window.len()) {
                return Err(Error::WindowMismatch(format!(
                    "generator {i} has fibers of length {}, window has {} points",
                    v.len(),
                    window.len()
                )));
            }
        }
        Ok(Self {
            window,
            grid,
            fibers,
        })
    }

    /// Generators whose fiber components are trigonometric polynomials:
    /// `components[i]` lists `(lattice point, polynomial)` pairs giving
    /// `(Tφ_i(ω))_k`. Unlisted components are zero.
    pub fn from_trig(
        window: LatticeWindow,
        grid: FrequencyGrid,
        components: &[Vec<(Vec<i64>, TrigPoly)>],
    ) -> Result<Self> {
        let mut fibers = Vec::with_capacity(components.len());
        for comps in components {
            let mut idx = Vec::with_capacity(comps.len());
            for (k, p) in comps {
                let i = window.index_of(k).ok_or_else(|| {
                    Error::WindowMismatch(format!("lattice point {k:?} outside the window"))
                })?;
                if p.dim() != grid.dim() {
                    return Err(Error::WindowMismatch("polynomial dimension".into()));
                }
                idx.push((i, p));
            }
            let vectors = grid
                .centers()
                .map(|w| {
                    let mut v = CVector::zeros(window.len());
                    for (i, p) in &idx {
                        v[*i] += p.eval(&w);
                    }
                    v
                })
                .collect();
            fibers.push(VectorField::new(grid, vectors)?);
        }
        Self::from_fibers(window, grid, fibers)
    }

    pub fn window(&self) -> &LatticeWindow {
        &self.window
    }

    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    pub fn count(&self) -> usize {
        self.fibers.len()
    }

    pub fn fibers(&self) -> &[VectorField] {
        &self.fibers
    }

    /// `M × ℓ` matrix whose columns are the generator fibers at `cell`.
    pub fn matrix(&self, cell: usize) -> CMatrix {
        let cols: Vec<CVector> = self.fibers.iter().map(|f| f.get(cell).clone()).collect();
        if cols.is_empty() {
            CMatrix::zeros(self.window.len(), 0)
        } else {
            CMatrix::from_columns(&cols)
        }
    }
}

/// Orthonormal frames of the fiber spaces `J(ω)`.
///
/// `basis(t)` is `M × n(t)` with orthonormal columns; `coords(t)` is the
/// `n(t) × ℓ` matrix of generator fibers expressed in that basis, so the
/// generator matrix equals `basis(t) * coords(t)` up to the rank cutoff.
#[derive(Debug, Clone)]
pub struct FiberFrame {
    grid: FrequencyGrid,
    ambient: usize,
    dims: Vec<usize>,
    bases: Vec<CMatrix>,
    coords: Vec<CMatrix>,
}

impl FiberFrame {
    /// Frame of `C^n` on every cell, with the unit vectors as generators.
    pub fn standard(grid: FrequencyGrid, n: usize) -> Self {
        let eye = CMatrix::identity(n, n);
        Self {
            grid,
            ambient: n,
            dims: vec![n; grid.len()],
            bases: vec![eye.clone(); grid.len()],
            coords: vec![eye; grid.len()],
        }
    }

    /// Frame from explicit orthonormal bases; the basis columns double as
    /// generators.
    pub fn from_bases(grid: FrequencyGrid, ambient: usize, bases: Vec<CMatrix>) -> Result<Self> {
        if bases.len() != grid.len() {
            return Err(Error::DimensionMismatch("one basis per cell".into()));
        }
        let mut dims = Vec::with_capacity(bases.len());
        let mut coords = Vec::with_capacity(bases.len());
        for (t, b) in bases.iter().enumerate() {
            if b.nrows() != ambient {
                return Err(Error::DimensionMismatch(format!("basis at cell {t} has wrong height")));
            }
            let gram = b.adjoint() * b;
            if (gram - linalg::identity(b.ncols())).norm() > 1e-10 {
                return Err(Error::DimensionMismatch(format!(
                    "basis at cell {t} is not orthonormal"
                )));
            }
            dims.push(b.ncols());
            coords.push(CMatrix::identity(b.ncols(), b.ncols()));
        }
        Ok(Self {
            grid,
            ambient,
            dims,
            bases,
            coords,
        })
    }

    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    /// `M`, the length of the truncated fiber vectors.
    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self, cell: usize) -> usize {
        self.dims[cell]
    }

    pub fn basis(&self, cell: usize) -> &CMatrix {
        &self.bases[cell]
    }

    pub fn coords(&self, cell: usize) -> &CMatrix {
        &self.coords[cell]
    }

    pub fn generator_count(&self) -> usize {
        self.coords.first().map_or(0, |c| c.ncols())
    }

    /// `A_n = {ω : dim J(ω) = n}`.
    pub fn partition(&self, n: usize) -> MeasurableMask {
        MeasurableMask::from_cells(self.grid, |t| self.dims[t] == n)
    }

    /// `A_0, …, A_L`.
    pub fn partitions(&self) -> Vec<MeasurableMask> {
        (0..=self.length()).map(|n| self.partition(n)).collect()
    }

    /// `σ(V) = {ω : J(ω) ≠ 0}`.
    pub fn spectrum(&self) -> MeasurableMask {
        MeasurableMask::from_cells(self.grid, |t| self.dims[t] > 0)
    }

    /// Length estimate `L(V) = max_ω dim J(ω)`.
    pub fn length(&self) -> usize {
        self.dims.iter().copied().max().unwrap_or(0)
    }

    /// The same frame with `J(ω) = 0` outside `mask`.
    pub fn restrict(&self, mask: &MeasurableMask) -> Result<Self> {
        if mask.grid() != self.grid {
            return Err(Error::DimensionMismatch("mask lives on another grid".into()));
        }
        let l = self.generator_count();
        let mut out = self.clone();
        for t in mask.complement().cells() {
            out.dims[t] = 0;
            out.bases[t] = CMatrix::zeros(self.ambient, 0);
            out.coords[t] = CMatrix::zeros(0, l);
        }
        Ok(out)
    }

    /// Generators re-expressed as the orthonormal frame columns, for
    /// re-running [`frame_from_generators`].
    pub fn as_generators(&self, window: &LatticeWindow) -> Result<GeneratorSet> {
        if window.len() != self.ambient {
            return Err(Error::WindowMismatch("window length vs frame ambient".into()));
        }
        let l = self.length();
        let fibers = (0..l)
            .map(|j| {
                let vectors = self
                    .bases
                    .iter()
                    .map(|b| {
                        if j < b.ncols() {
                            b.column(j).into_owned()
                        } else {
                            CVector::zeros(self.ambient)
                        }
                    })
                    .collect();
                VectorField::new(self.grid, vectors)
            })
            .collect::<Result<Vec<_>>>()?;
        GeneratorSet::from_fibers(window.clone(), self.grid, fibers)
    }
}

/// `Tf(ω) = {f̂(ω+k)}_{k ∈ window}` on every cell.
pub fn fiberize_signal(
    fhat: impl Fn(&[f64]) -> C64,
    grid: FrequencyGrid,
    window: &LatticeWindow,
) -> Result<VectorField> {
    if grid.dim() != window.dim() {
        return Err(Error::WindowMismatch(format!(
            "grid dim {} vs window dim {}",
            grid.dim(),
            window.dim()
        )));
    }
    let mut xi = vec![0.0; grid.dim()];
    let vectors = grid
        .centers()
        .map(|w| {
            CVector::from_iterator(
                window.len(),
                window.points().iter().map(|k| {
                    for (x, (wi, ki)) in xi.iter_mut().zip(w.iter().zip(k)) {
                        *x = wi + *ki as f64;
                    }
                    fhat(&xi)
                }),
            )
        })
        .collect();
    VectorField::new(grid, vectors)
}

/// Per-cell orthonormal frame of `span{Tφ_i(ω)}`.
///
/// The dimension `n(ω)` counts singular values `σ_i ≥ rank_tol · σ_1(ω)`,
/// ignoring anything below `1e-12` times the largest singular value over the
/// grid so that vanishing fibers get dimension zero. The basis comes from a
/// column-pivoted Gram–Schmidt sweep over the generators (largest residual
/// first, ties to the lower generator index).
pub fn frame_from_generators(gens: &GeneratorSet, rank_tol: f64) -> Result<FiberFrame> {
    if !(rank_tol > 0.0) || !rank_tol.is_finite() {
        return Err(Error::InvalidTolerance {
            name: "rank_tol",
            value: rank_tol,
        });
    }
    let grid = gens.grid();
    let mats: Vec<CMatrix> = (0..grid.len()).map(|t| gens.matrix(t)).collect();
    let svals: Vec<Vec<f64>> = mats.iter().map(linalg::singular_values).collect();
    let global = svals
        .iter()
        .filter_map(|s| s.first().copied())
        .fold(0.0, f64::max);
    let floor = 1e-12 * global;

    let mut dims = Vec::with_capacity(grid.len());
    let mut bases = Vec::with_capacity(grid.len());
    let mut coords = Vec::with_capacity(grid.len());
    for (g, s) in mats.iter().zip(&svals) {
        let s1 = s.first().copied().unwrap_or(0.0);
        let n = s
            .iter()
            .filter(|&&x| x >= rank_tol * s1 && x > floor)
            .count();
        let (_, basis) = linalg::pivoted_orthonormal(g, n);
        let n = basis.ncols();
        coords.push(basis.adjoint() * g);
        bases.push(basis);
        dims.push(n);
    }
    Ok(FiberFrame {
        grid,
        ambient: gens.window().len(),
        dims,
        bases,
        coords,
    })
}

/// `T(P_V f)(ω) = P_{J(ω)} Tf(ω)`, computed as `B B* v` per cell.
pub fn project_onto_fiber(frame: &FiberFrame, v: &VectorField) -> Result<VectorField> {
    if v.grid() != frame.grid() {
        return Err(Error::DimensionMismatch("field and frame grids differ".into()));
    }
    let vectors = (0..frame.grid().len())
        .map(|t| {
            let x = v.get(t);
            if x.len() != frame.ambient() {
                return Err(Error::DimensionMismatch(format!(
                    "vector of length {} at cell {t}, frame ambient {}",
                    x.len(),
                    frame.ambient()
                )));
            }
            let b = frame.basis(t);
            Ok(b * (b.adjoint() * x))
        })
        .collect::<Result<Vec<_>>>()?;
    VectorField::new(frame.grid(), vectors)
}
