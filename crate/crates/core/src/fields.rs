//! Sampled fields over the frequency torus `[0,1)^d`.
//!
//! A [`FrequencyGrid`] splits the torus into `n^d` congruent cells and samples
//! each one at its centre `(t + 1/2)/n`. Masks stand in for measurable sets and
//! [`ess_sup`] for the essential supremum: every "a.e." statement turns into a
//! statement about every cell.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::{CMatrix, CVector, C64};

/// Uniform cell-centred grid on `[0,1)^d`.
///
/// Cells are enumerated lexicographically with the first axis slowest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrequencyGrid {
    dim: usize,
    n_per_dim: usize,
}

impl FrequencyGrid {
    pub fn new(dim: usize, n_per_dim: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=2")));
        }
        if n_per_dim == 0 {
            return Err(Error::InvalidGrid("zero samples per axis".into()));
        }
        Ok(Self { dim, n_per_dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_per_dim(&self) -> usize {
        self.n_per_dim
    }

    /// Number of cells, `n^d`.
    pub fn len(&self) -> usize {
        self.n_per_dim.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Side length of a cell.
    pub fn spacing(&self) -> f64 {
        1.0 / self.n_per_dim as f64
    }

    pub fn multi_index(&self, cell: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        let mut rest = cell;
        for axis in (0..self.dim).rev() {
            idx[axis] = rest % self.n_per_dim;
            rest /= self.n_per_dim;
        }
        idx
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n_per_dim + i)
    }

    /// Centre `ω_t` of a cell.
    pub fn center(&self, cell: usize) -> Vec<f64> {
        let n = self.n_per_dim as f64;
        self.multi_index(cell)
            .into_iter()
            .map(|i| (i as f64 + 0.5) / n)
            .collect()
    }

    pub fn centers(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |t| self.center(t))
    }

    /// Periodic neighbours of `cell` along `axis`: `(previous, next)`.
    pub fn neighbors(&self, cell: usize, axis: usize) -> (usize, usize) {
        let mut idx = self.multi_index(cell);
        let i = idx[axis];
        idx[axis] = (i + self.n_per_dim - 1) % self.n_per_dim;
        let prev = self.linear_index(&idx);
        idx[axis] = (i + 1) % self.n_per_dim;
        let next = self.linear_index(&idx);
        (prev, next)
    }

    pub fn refine(&self, factor: usize) -> Self {
        Self {
            dim: self.dim,
            n_per_dim: self.n_per_dim * factor,
        }
    }
}

/// Cell mask: the grid surrogate of a measurable subset of the torus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurableMask {
    grid: FrequencyGrid,
    member: Vec<bool>,
}

impl MeasurableMask {
    pub fn full(grid: FrequencyGrid) -> Self {
        Self {
            grid,
            member: vec![true; grid.len()],
        }
    }

    pub fn empty(grid: FrequencyGrid) -> Self {
        Self {
            grid,
            member: vec![false; grid.len()],
        }
    }

    pub fn from_members(grid: FrequencyGrid, member: Vec<bool>) -> Result<Self> {
        if member.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "mask has {} cells, grid has {}",
                member.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, member })
    }

    /// Mask of cells whose centre satisfies `pred`.
    pub fn from_fn(grid: FrequencyGrid, pred: impl Fn(&[f64]) -> bool) -> Self {
        let member = grid.centers().map(|w| pred(&w)).collect();
        Self { grid, member }
    }

    /// Mask of cells (by index) satisfying `pred`.
    pub fn from_cells(grid: FrequencyGrid, pred: impl Fn(usize) -> bool) -> Self {
        let member = (0..grid.len()).map(pred).collect();
        Self { grid, member }
    }

    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.member[cell]
    }

    pub fn members(&self) -> &[bool] {
        &self.member
    }

    pub fn count(&self) -> usize {
        self.member.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.member.iter().any(|&b| b)
    }

    pub fn measure(&self) -> f64 {
        mask_measure(self)
    }

    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.member
            .iter()
            .enumerate()
            .filter_map(|(t, &b)| b.then_some(t))
    }

    pub fn complement(&self) -> Self {
        Self {
            grid: self.grid,
            member: self.member.iter().map(|b| !b).collect(),
        }
    }

    fn zip(&self, other: &Self, op: impl Fn(bool, bool) -> bool) -> Self {
        assert_eq!(self.grid, other.grid, "masks live on different grids");
        Self {
            grid: self.grid,
            member: self
                .member
                .iter()
                .zip(&other.member)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a && !b)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.member
            .iter()
            .zip(&other.member)
            .all(|(&a, &b)| !a || b)
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.member
            .iter()
            .zip(&other.member)
            .all(|(&a, &b)| !(a && b))
    }
}

/// Fraction of cells in the mask.
pub fn mask_measure(mask: &MeasurableMask) -> f64 {
    mask.count() as f64 / mask.grid.len() as f64
}

/// One value per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T> {
    grid: FrequencyGrid,
    values: Vec<T>,
}

impl<T: Clone> ScalarField<T> {
    pub fn new(grid: FrequencyGrid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: FrequencyGrid, value: T) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: FrequencyGrid, f: impl Fn(&[f64]) -> T) -> Self {
        Self {
            grid,
            values: grid.centers().map(|w| f(&w)).collect(),
        }
    }

    pub fn from_cells(grid: FrequencyGrid, f: impl Fn(usize) -> T) -> Self {
        Self {
            grid,
            values: (0..grid.len()).map(f).collect(),
        }
    }

    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, cell: usize) -> &T {
        &self.values[cell]
    }

    pub fn map<U: Clone>(&self, f: impl Fn(&T) -> U) -> ScalarField<U> {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(f).collect(),
        }
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

/// Per-cell complex vectors (fibers). Lengths may vary from cell to cell.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: FrequencyGrid,
    vectors: Vec<CVector>,
}

impl VectorField {
    pub fn new(grid: FrequencyGrid, vectors: Vec<CVector>) -> Result<Self> {
        if vectors.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "vector field has {} cells, grid has {}",
                vectors.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, vectors })
    }

    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    pub fn get(&self, cell: usize) -> &CVector {
        &self.vectors[cell]
    }

    pub fn vectors(&self) -> &[CVector] {
        &self.vectors
    }

    /// Quadrature of `∫ ‖v(ω)‖² dω`: the mean of squared norms over cells.
    pub fn mean_square_norm(&self) -> f64 {
        self.vectors.iter().map(|v| v.norm_squared()).sum::<f64>() / self.grid.len() as f64
    }
}

/// Per-cell complex matrices with possibly varying shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    grid: FrequencyGrid,
    matrices: Vec<CMatrix>,
}

impl MatrixField {
    pub fn new(grid: FrequencyGrid, matrices: Vec<CMatrix>) -> Result<Self> {
        if matrices.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "matrix field has {} cells, grid has {}",
                matrices.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, matrices })
    }

    pub fn from_fn(grid: FrequencyGrid, f: impl Fn(&[f64]) -> CMatrix) -> Self {
        Self {
            grid,
            matrices: grid.centers().map(|w| f(&w)).collect(),
        }
    }

    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    pub fn get(&self, cell: usize) -> &CMatrix {
        &self.matrices[cell]
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    pub fn into_matrices(self) -> Vec<CMatrix> {
        self.matrices
    }

    /// Common shape on `mask`, or `None` if shapes vary there.
    pub fn shape_on(&self, mask: &MeasurableMask) -> Option<(usize, usize)> {
        let mut shape = None;
        for t in mask.cells() {
            let s = self.matrices[t].shape();
            match shape {
                None => shape = Some(s),
                Some(prev) if prev != s => return None,
                _ => {}
            }
        }
        shape
    }
}

/// Grid surrogate of the essential supremum: the maximum over the cells of
/// `mask`.
pub fn ess_sup(field: &ScalarField<f64>, mask: &MeasurableMask) -> Result<f64> {
    ess_sup_at(field, mask).map(|(v, _)| v)
}

/// [`ess_sup`] together with the first cell attaining it.
pub fn ess_sup_at(field: &ScalarField<f64>, mask: &MeasurableMask) -> Result<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for t in mask.cells() {
        let v = field.values[t];
        match best {
            Some((b, _)) if v <= b => {}
            _ => best = Some((v, t)),
        }
    }
    best.ok_or(Error::NullSet)
}

/// Certified lower bound of a nonnegative sampled quantity on `mask`.
///
/// A sample only speaks for the centre of its cell. Each cell value is
/// extrapolated to the cell boundary with the gentler of the two one-sided
/// slopes along every axis (neighbours outside `mask` are ignored), so a
/// quantity that decays linearly to zero at a cell edge certifies zero.
/// Returns `(bound, raw value, cell)` for the worst cell.
pub fn certified_lower_bound(
    field: &ScalarField<f64>,
    mask: &MeasurableMask,
) -> Result<(f64, f64, usize)> {
    let grid = field.grid;
    let mut worst: Option<(f64, f64, usize)> = None;
    for t in mask.cells() {
        let v = field.values[t];
        let mut slack = 0.0f64;
        if grid.n_per_dim() > 1 {
            for axis in 0..grid.dim() {
                let (p, q) = grid.neighbors(t, axis);
                let slopes: Vec<f64> = [p, q]
                    .iter()
                    .filter(|&&s| s != t && mask.contains(s))
                    .map(|&s| (field.values[s] - v).abs())
                    .collect();
                if let Some(m) = slopes.iter().cloned().reduce(f64::min) {
                    slack = slack.max(0.5 * m);
                }
            }
        }
        let bound = v - slack;
        match worst {
            Some((b, _, _)) if bound >= b => {}
            _ => worst = Some((bound, v, t)),
        }
    }
    worst.ok_or(Error::NullSet)
}

/// Trigonometric polynomial `p(ω) = Σ_m c_m e^{-2πi⟨ω,m⟩}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    dim: usize,
    terms: Vec<(Vec<i64>, C64)>,
}

impl TrigPoly {
    pub fn new(dim: usize, terms: Vec<(Vec<i64>, C64)>) -> Result<Self> {
        if let Some((m, _)) = terms.iter().find(|(m, _)| m.len() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "frequency {m:?} in a {dim}-dimensional polynomial"
            )));
        }
        Ok(Self { dim, terms })
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: vec![] }
    }

    pub fn constant(dim: usize, c: C64) -> Self {
        Self {
            dim,
            terms: vec![(vec![0; dim], c)],
        }
    }

    /// Single mode `c e^{-2πi⟨ω,m⟩}`.
    pub fn mode(m: Vec<i64>, c: C64) -> Self {
        Self {
            dim: m.len(),
            terms: vec![(m, c)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[(Vec<i64>, C64)] {
        &self.terms
    }

    pub fn push(&mut self, m: Vec<i64>, c: C64) {
        debug_assert_eq!(m.len(), self.dim);
        self.terms.push((m, c));
    }

    /// Largest `|m|_∞` among the terms.
    pub fn degree(&self) -> i64 {
        self.terms
            .iter()
            .flat_map(|(m, _)| m.iter().map(|x| x.abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, omega: &[f64]) -> C64 {
        self.terms
            .iter()
            .map(|(m, c)| c * exp_mode(omega, m))
            .sum()
    }

    pub fn sample(&self, grid: FrequencyGrid) -> ScalarField<C64> {
        ScalarField::from_fn(grid, |w| self.eval(w))
    }
}

/// `e_k(ω) = e^{-2πi⟨ω,k⟩}`.
pub fn exp_mode(omega: &[f64], k: &[i64]) -> C64 {
    let phase: f64 = omega.iter().zip(k).map(|(w, &k)| w * k as f64).sum();
    C64::from_polar(1.0, -2.0 * PI * phase)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(n: usize) -> FrequencyGrid {
        FrequencyGrid::new(1, n).unwrap()
    }

    #[test]
    fn cell_centres() {
        let g = FrequencyGrid::new(2, 4).unwrap();
        assert_eq!(g.len(), 16);
        assert_eq!(g.center(0), vec![0.125, 0.125]);
        assert_eq!(g.center(5), vec![0.375, 0.375]);
        assert_eq!(g.multi_index(6), vec![1, 2]);
        assert_eq!(g.linear_index(&[1, 2]), 6);
    }

    #[test]
    fn ess_sup_examples() {
        let g = grid1(1000);
        let full = MeasurableMask::full(g);
        let five = ScalarField::constant(g, 5.0);
        assert_eq!(ess_sup(&five, &full).unwrap(), 5.0);

        let omega = ScalarField::from_fn(g, |w| w[0]);
        assert!((ess_sup(&omega, &full).unwrap() - 0.9995).abs() < 1e-15);

        let s = ScalarField::from_fn(g, |w| (2.0 * PI * w[0]).sin().abs());
        // dense evaluation oracle: the cell centre nearest 1/4 sits 5e-4 away
        let oracle = (0..1000)
            .map(|t| (2.0 * PI * (t as f64 + 0.5) / 1000.0).sin().abs())
            .fold(0.0, f64::max);
        let got = ess_sup(&s, &full).unwrap();
        assert_eq!(got, oracle);
        assert!((got - 1.0).abs() < 1e-4);
    }

    #[test]
    fn ess_sup_null_set() {
        let g = grid1(8);
        let f = ScalarField::constant(g, 1.0);
        let err = ess_sup(&f, &MeasurableMask::empty(g)).unwrap_err();
        assert_eq!(err.to_string(), "ess-sup over null set");
    }

    #[test]
    fn measures() {
        let g = grid1(1000);
        assert_eq!(MeasurableMask::full(g).measure(), 1.0);
        assert_eq!(MeasurableMask::empty(g).measure(), 0.0);
        let quarter = MeasurableMask::from_fn(g, |w| w[0] < 0.25);
        assert_eq!(quarter.count(), 250);
        assert_eq!(quarter.measure(), 0.25);
    }

    #[test]
    fn certified_bound_sees_linear_decay() {
        let g = grid1(512);
        let full = MeasurableMask::full(g);
        let omega = ScalarField::from_fn(g, |w| w[0]);
        let (bound, raw, cell) = certified_lower_bound(&omega, &full).unwrap();
        assert_eq!(cell, 0);
        assert!((raw - 0.5 / 512.0).abs() < 1e-15);
        assert!(bound.abs() < 1e-15);

        let shifted = ScalarField::from_fn(g, |w| 1e-3 + w[0]);
        let (bound, _, _) = certified_lower_bound(&shifted, &full).unwrap();
        assert!((bound - 1e-3).abs() < 1e-12);

        let sign = ScalarField::from_fn(g, |w| if w[0] < 0.5 { 1.0 } else { 2.0 });
        let (bound, _, _) = certified_lower_bound(&sign, &full).unwrap();
        assert_eq!(bound, 1.0);
    }

    #[test]
    fn trig_poly_eval() {
        let p = TrigPoly::mode(vec![1], C64::new(1.0, 0.0));
        let v = p.eval(&[0.25]);
        assert!((v - C64::new(0.0, -1.0)).norm() < 1e-15);
        assert_eq!(p.degree(), 1);
    }
}
