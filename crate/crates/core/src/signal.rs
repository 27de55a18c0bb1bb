//! Coefficient-level action of shift-preserving operators.
//!
//! A signal in `V` is `f = Σ_i Σ_k b_i(k) T_k φ_i`, stored as one finite
//! sequence per generator. Its fiber is `Tf(ω) = Σ_i b̂_i(ω) Tφ_i(ω)`, so in
//! frame coordinates `x(ω) = C(ω) b̂(ω)` with `C` the generator coordinates.
//!
//! Sampling `b̂` at the cell centres `(t + 1/2)/n` identifies indices modulo
//! `n` with an alternating sign: `e_{k+nm}(ω_t) = (−1)^m e_k(ω_t)`. Grid
//! reconstructions therefore live on the window `−⌊n/2⌋ ≤ k < ⌈n/2⌉` per
//! axis, and [`fold_to_grid`] maps any sequence onto it.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::fiberize::FiberFrame;
use crate::fields::{exp_mode, FrequencyGrid};
use crate::linalg;
use crate::rangeop::{KernelField, RangeOperatorField};
use crate::sdiag::SymbolSequence;
use crate::{CMatrix, CVector, C64};

/// Hard cap on the number of stored entries of a sequence.
pub const MAX_SUPPORT: usize = 1 << 22;

/// Finite-support sequence on `ℤ^d`, stored densely on the box
/// `lo ≤ k < lo + shape`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    lo: Vec<i64>,
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl Sequence {
    pub fn zeros(lo: Vec<i64>, shape: Vec<usize>) -> Result<Self> {
        if lo.len() != shape.len() || !(1..=2).contains(&lo.len()) {
            return Err(Error::DimensionMismatch("sequence box dimension".into()));
        }
        let len = shape.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s));
        match len {
            Some(len) if len <= MAX_SUPPORT => Ok(Self {
                lo,
                shape,
                data: vec![C64::from(0.0); len],
            }),
            _ => Err(Error::SupportTooLarge(format!("box of shape {shape:?}"))),
        }
    }

    /// Smallest box holding the given entries; repeated indices add up.
    pub fn from_entries(dim: usize, entries: &[(Vec<i64>, C64)]) -> Result<Self> {
        if entries.is_empty() {
            return Self::zeros(vec![0; dim], vec![1; dim]);
        }
        let mut lo = vec![i64::MAX; dim];
        let mut hi = vec![i64::MIN; dim];
        for (k, _) in entries {
            if k.len() != dim {
                return Err(Error::DimensionMismatch(format!("index {k:?} in dimension {dim}")));
            }
            for a in 0..dim {
                lo[a] = lo[a].min(k[a]);
                hi[a] = hi[a].max(k[a]);
            }
        }
        let shape = lo.iter().zip(&hi).map(|(l, h)| (h - l + 1) as usize).collect();
        let mut s = Self::zeros(lo, shape)?;
        for (k, c) in entries {
            let i = s.offset(k).expect("inside the bounding box");
            s.data[i] += c;
        }
        Ok(s)
    }

    /// `c δ_k`.
    pub fn delta(k: Vec<i64>, c: C64) -> Self {
        let dim = k.len();
        Self {
            lo: k,
            shape: vec![1; dim],
            data: vec![c],
        }
    }

    pub fn from_symbol(a: &SymbolSequence) -> Result<Self> {
        Self::from_entries(a.dim(), a.coefficients())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    fn offset(&self, k: &[i64]) -> Option<usize> {
        let mut off = 0usize;
        for a in 0..self.dim() {
            let r = k[a] - self.lo[a];
            if r < 0 || r as usize >= self.shape[a] {
                return None;
            }
            off = off * self.shape[a] + r as usize;
        }
        Some(off)
    }

    fn index_at(&self, mut off: usize) -> Vec<i64> {
        let mut k = vec![0i64; self.dim()];
        for a in (0..self.dim()).rev() {
            k[a] = self.lo[a] + (off % self.shape[a]) as i64;
            off /= self.shape[a];
        }
        k
    }

    pub fn get(&self, k: &[i64]) -> C64 {
        if k.len() != self.dim() {
            return C64::from(0.0);
        }
        self.offset(k).map_or(C64::from(0.0), |i| self.data[i])
    }

    /// Stored entries in lexicographic index order, zeros included.
    pub fn entries(&self) -> impl Iterator<Item = (Vec<i64>, C64)> + '_ {
        self.data.iter().enumerate().map(|(i, &c)| (self.index_at(i), c))
    }

    /// Nonzero entries in lexicographic index order.
    pub fn nonzero(&self) -> Vec<(Vec<i64>, C64)> {
        self.entries().filter(|(_, c)| *c != C64::from(0.0)).collect()
    }

    /// `ℓ²` norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut s = self.clone();
        s.data.iter_mut().for_each(|z| *z *= c);
        s
    }

    /// Coefficients of `T_k f`: `b'(m) = b(m − k)`.
    pub fn shift(&self, k: &[i64]) -> Self {
        let mut s = self.clone();
        for (l, d) in s.lo.iter_mut().zip(k) {
            *l += d;
        }
        s
    }

    /// Entrywise combination over the union of the two boxes.
    pub fn combine(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch("sequence dimensions differ".into()));
        }
        let lo: Vec<i64> = self.lo.iter().zip(&other.lo).map(|(a, b)| *a.min(b)).collect();
        let shape = (0..self.dim())
            .map(|a| {
                let hi = (self.lo[a] + self.shape[a] as i64).max(other.lo[a] + other.shape[a] as i64);
                (hi - lo[a]) as usize
            })
            .collect();
        let mut out = Self::zeros(lo, shape)?;
        for i in 0..out.data.len() {
            let k = out.index_at(i);
            out.data[i] = f(self.get(&k), other.get(&k));
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a + b)
    }

    /// `b̂(ω) = Σ_k b(k) e^{-2πi⟨ω,k⟩}`.
    pub fn transform(&self, omega: &[f64]) -> C64 {
        self.entries()
            .filter(|(_, c)| *c != C64::from(0.0))
            .map(|(k, c)| c * exp_mode(omega, &k))
            .sum()
    }
}

/// Exact discrete convolution `(a ∗ b)(k) = Σ_m a(m) b(k − m)`.
pub fn convolve_sequences(a: &Sequence, b: &Sequence) -> Result<Sequence> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch("sequence dimensions differ".into()));
    }
    let d = a.dim();
    let lo: Vec<i64> = (0..d).map(|i| a.lo[i] + b.lo[i]).collect();
    let shape: Vec<usize> = (0..d).map(|i| a.shape[i] + b.shape[i] - 1).collect();
    let mut out = Sequence::zeros(lo, shape)?;
    for (i, &ca) in a.data.iter().enumerate() {
        if ca == C64::from(0.0) {
            continue;
        }
        let ka = a.index_at(i);
        for (j, &cb) in b.data.iter().enumerate() {
            let kb = b.index_at(j);
            let k: Vec<i64> = ka.iter().zip(&kb).map(|(x, y)| x + y).collect();
            let o = out.offset(&k).expect("inside the sum box");
            out.data[o] += ca * cb;
        }
    }
    Ok(out)
}

/// `a ∗ b` for a symbol sequence `a`.
pub fn convolve(a: &SymbolSequence, b: &Sequence) -> Result<Sequence> {
    convolve_sequences(&Sequence::from_symbol(a)?, b)
}

/// Canonical grid window `−⌊n/2⌋ ≤ k < ⌈n/2⌉` along each axis.
pub fn grid_window(grid: FrequencyGrid) -> (Vec<i64>, Vec<usize>) {
    let n = grid.n_per_dim();
    (vec![-((n / 2) as i64); grid.dim()], vec![n; grid.dim()])
}

/// Sequence with the same samples at the cell centres of `grid`, supported
/// on the canonical grid window.
pub fn fold_to_grid(s: &Sequence, grid: FrequencyGrid) -> Result<Sequence> {
    if s.dim() != grid.dim() {
        return Err(Error::DimensionMismatch("sequence and grid dimensions differ".into()));
    }
    let n = grid.n_per_dim() as i64;
    let (lo, shape) = grid_window(grid);
    let mut out = Sequence::zeros(lo.clone(), shape)?;
    for (k, c) in s.entries() {
        if c == C64::from(0.0) {
            continue;
        }
        let mut sign = 1.0;
        let folded: Vec<i64> = k
            .iter()
            .zip(&lo)
            .map(|(&x, &l)| {
                let m = (x - l).div_euclid(n);
                if m % 2 != 0 {
                    sign = -sign;
                }
                x - m * n
            })
            .collect();
        let o = out.offset(&folded).expect("folded into the window");
        out.data[o] += c * sign;
    }
    Ok(out)
}

/// Per-generator coefficient sequences `b_1, …, b_ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    channels: Vec<Sequence>,
}

impl CoefficientVector {
    pub fn new(channels: Vec<Sequence>) -> Result<Self> {
        if let Some(first) = channels.first() {
            if channels.iter().any(|c| c.dim() != first.dim()) {
                return Err(Error::DimensionMismatch("channels of different dimension".into()));
            }
        }
        Ok(Self { channels })
    }

    pub fn channels(&self) -> &[Sequence] {
        &self.channels
    }

    pub fn channel(&self, i: usize) -> &Sequence {
        &self.channels[i]
    }

    pub fn count(&self) -> usize {
        self.channels.len()
    }

    pub fn dim(&self) -> usize {
        self.channels.first().map_or(1, |c| c.dim())
    }

    /// `(Σ_i ‖b_i‖²)^{1/2}`.
    pub fn norm(&self) -> f64 {
        self.channels.iter().map(|c| c.norm().powi(2)).sum::<f64>().sqrt()
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&Sequence, &Sequence) -> Result<Sequence>) -> Result<Self> {
        if self.count() != other.count() {
            return Err(Error::DimensionMismatch("channel counts differ".into()));
        }
        let channels = self
            .channels
            .iter()
            .zip(&other.channels)
            .map(|(a, b)| f(a, b))
            .collect::<Result<Vec<_>>>()?;
        Self::new(channels)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.sub(b))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.add(b))
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            channels: self.channels.iter().map(|s| s.scale(c)).collect(),
        }
    }

    /// Coefficients of `T_k f`.
    pub fn shift(&self, k: &[i64]) -> Self {
        Self {
            channels: self.channels.iter().map(|s| s.shift(k)).collect(),
        }
    }

    pub fn fold_to_grid(&self, grid: FrequencyGrid) -> Result<Self> {
        let channels = self
            .channels
            .iter()
            .map(|s| fold_to_grid(s, grid))
            .collect::<Result<Vec<_>>>()?;
        Self::new(channels)
    }

    /// `b̂(ω_t) ∈ C^ℓ` on every cell.
    pub fn sample(&self, grid: FrequencyGrid) -> Vec<CVector> {
        let entries: Vec<Vec<(Vec<i64>, C64)>> = self.channels.iter().map(|c| c.nonzero()).collect();
        grid.centers()
            .map(|w| {
                CVector::from_iterator(
                    self.count(),
                    entries
                        .iter()
                        .map(|e| e.iter().map(|(k, c)| c * exp_mode(&w, k)).sum::<C64>()),
                )
            })
            .collect()
    }

    /// Inverse of [`Self::sample`] onto the canonical grid window.
    pub fn from_samples(grid: FrequencyGrid, samples: &[CVector]) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::DimensionMismatch("one sample per cell".into()));
        }
        let l = samples.first().map_or(0, |v| v.len());
        let (lo, shape) = grid_window(grid);
        let centers: Vec<Vec<f64>> = grid.centers().collect();
        let mut channels = vec![Sequence::zeros(lo, shape)?; l];
        let len = channels.first().map_or(0, |c| c.data.len());
        let inv_n = 1.0 / grid.len() as f64;
        for o in 0..len {
            let k = channels[0].index_at(o);
            let twiddle: Vec<C64> = centers.iter().map(|w| exp_mode(w, &k).conj()).collect();
            for (i, ch) in channels.iter_mut().enumerate() {
                let s: C64 = samples.iter().zip(&twiddle).map(|(v, e)| v[i] * e).sum();
                ch.data[o] = s * inv_n;
            }
        }
        Self::new(channels)
    }

    /// Uniform random coefficients in the unit square on `|k|_∞ ≤ radius`.
    pub fn random(rng: &mut impl Rng, count: usize, dim: usize, radius: i64) -> Self {
        let side = (2 * radius + 1) as usize;
        let channels = (0..count)
            .map(|_| {
                let mut s = Sequence::zeros(vec![-radius; dim], vec![side; dim]).expect("small box");
                for z in s.data.iter_mut() {
                    *z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                }
                s
            })
            .collect();
        Self { channels }
    }
}

/// `Λ_a f`: channelwise `a ∗ b_i`.
pub fn apply_lambda(a: &SymbolSequence, coeffs: &CoefficientVector) -> Result<CoefficientVector> {
    let a = Sequence::from_symbol(a)?;
    let channels = coeffs
        .channels()
        .iter()
        .map(|b| convolve_sequences(&a, b))
        .collect::<Result<Vec<_>>>()?;
    CoefficientVector::new(channels)
}

/// Frame coordinates `x(ω) = C(ω) b̂(ω)` of the fibers of `f`.
pub fn frame_coordinates(frame: &FiberFrame, coeffs: &CoefficientVector) -> Result<Vec<CVector>> {
    if coeffs.count() != frame.generator_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficient channels for {} generators",
            coeffs.count(),
            frame.generator_count()
        )));
    }
    Ok(coeffs
        .sample(frame.grid())
        .iter()
        .enumerate()
        .map(|(t, b)| frame.coords(t) * b)
        .collect())
}

/// Coefficients whose fibers have frame coordinates `x(ω)`. Requires the
/// generators to be independent on every cell.
pub fn pull_back(frame: &FiberFrame, x: &[CVector]) -> Result<CoefficientVector> {
    let grid = frame.grid();
    let l = frame.generator_count();
    let mut samples = Vec::with_capacity(grid.len());
    for (t, v) in x.iter().enumerate() {
        let c = frame.coords(t);
        if c.nrows() != l || linalg::smallest_singular_value(c) <= 1e-10 * linalg::spectral_norm(c).max(1.0) {
            return Err(Error::NotRiesz(t));
        }
        let inv = linalg::inverse(c).ok_or(Error::NotRiesz(t))?;
        samples.push(inv * v);
    }
    CoefficientVector::from_samples(grid, &samples)
}

/// `L f` computed fiberwise and pulled back to coefficients on the
/// canonical grid window.
pub fn apply_operator(r: &RangeOperatorField, coeffs: &CoefficientVector) -> Result<CoefficientVector> {
    let frame = r.frame();
    let x = frame_coordinates(frame, coeffs)?;
    let y: Vec<CVector> = x.iter().enumerate().map(|(t, v)| r.get(t) * v).collect();
    pull_back(frame, &y)
}

/// `L f` for `f` given by its fibers in `C^M`; each fiber must lie in
/// `J(ω)`. Returns the image fibers.
pub fn apply_operator_to_fibers(r: &RangeOperatorField, fibers: &[CVector]) -> Result<Vec<CVector>> {
    let frame = r.frame();
    fibers
        .iter()
        .enumerate()
        .map(|(t, v)| {
            let b = frame.basis(t);
            if v.len() != frame.ambient() {
                return Err(Error::DimensionMismatch(format!("fiber length at cell {t}")));
            }
            let x = b.adjoint() * v;
            let defect = (v - b * &x).norm();
            if defect > 1e-8 * v.norm().max(1.0) {
                return Err(Error::NotInSpace { cell: t, defect });
            }
            Ok(b * (r.get(t) * x))
        })
        .collect()
}

/// Projects a seed signal fiberwise onto `space` (frame coordinates), giving
/// a signal of the corresponding subspace of `V`.
pub fn synthesize_in(frame: &FiberFrame, space: &KernelField, seed: &CoefficientVector) -> Result<CoefficientVector> {
    let x = frame_coordinates(frame, seed)?;
    let y: Vec<CVector> = x
        .iter()
        .enumerate()
        .map(|(t, v)| {
            let e = space.basis(t);
            e * (e.adjoint() * v)
        })
        .collect();
    pull_back(frame, &y)
}

/// Applies a per-cell map to the frame coordinates of `f`.
pub fn map_fibers(
    frame: &FiberFrame,
    coeffs: &CoefficientVector,
    f: impl Fn(usize, &CVector) -> CVector,
) -> Result<CoefficientVector> {
    let x = frame_coordinates(frame, coeffs)?;
    let y: Vec<CVector> = x.iter().enumerate().map(|(t, v)| f(t, v)).collect();
    pull_back(frame, &y)
}

/// `(1/N Σ_t ‖Tf(ω_t)‖²)^{1/2}` for the fibers in `C^M`.
pub fn fiber_norm(frame: &FiberFrame, coeffs: &CoefficientVector) -> Result<f64> {
    let x = frame_coordinates(frame, coeffs)?;
    let total: f64 = x.iter().map(|v| v.norm_squared()).sum();
    Ok((total / frame.grid().len() as f64).sqrt())
}

/// Signal-level check of `L f = Λ_a f` for `f` obtained by projecting `seed`
/// onto `space`. Returns `(‖L f − a ∗ b‖, ‖f‖)`, both measured fiberwise.
pub fn eigen_action_defect(
    r: &RangeOperatorField,
    symbol: &SymbolSequence,
    space: &KernelField,
    seed: &CoefficientVector,
) -> Result<(f64, f64)> {
    let frame = r.frame();
    let f = synthesize_in(frame, space, seed)?;
    let lf = apply_operator(r, &f)?;
    let af = apply_lambda(symbol, &f)?.fold_to_grid(frame.grid())?;
    Ok((fiber_norm(frame, &lf.sub(&af)?)?, fiber_norm(frame, &f)?))
}

/// Oblique projector `S diag(χ_j) S⁻¹` onto one block of a direct sum.
pub fn oblique_projector(blocks: &[&CMatrix], j: usize, n: usize) -> Option<CMatrix> {
    let s = linalg::hstack(blocks, n);
    if s.ncols() != n {
        return None;
    }
    let inv = linalg::inverse(&s)?;
    let start: usize = blocks[..j].iter().map(|b| b.ncols()).sum();
    let width = blocks[j].ncols();
    let mut d = CMatrix::zeros(n, n);
    for i in start..start + width {
        d[(i, i)] = C64::from(1.0);
    }
    Some(&s * d * inv)
}

/// Parses `i k_1 … k_d re im` lines (one-based channel `i`); `#` starts a
/// comment.
pub fn parse_coefficients(text: &str, dim: usize, channels: usize) -> Result<CoefficientVector> {
    let mut entries: Vec<Vec<(Vec<i64>, C64)>> = vec![vec![]; channels];
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: no + 1, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != dim + 3 {
            return Err(err(format!("expected {} fields, found {}", dim + 3, fields.len())));
        }
        let i: usize = fields[0].parse().map_err(|_| err(format!("bad channel {:?}", fields[0])))?;
        if i == 0 || i > channels {
            return Err(err(format!("channel {i} outside 1..={channels}")));
        }
        let k = fields[1..=dim]
            .iter()
            .map(|s| s.parse::<i64>().map_err(|_| err(format!("bad index {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let re: f64 = fields[dim + 1].parse().map_err(|_| err("bad real part".into()))?;
        let im: f64 = fields[dim + 2].parse().map_err(|_| err("bad imaginary part".into()))?;
        entries[i - 1].push((k, C64::new(re, im)));
    }
    let seqs = entries
        .iter()
        .map(|e| Sequence::from_entries(dim, e))
        .collect::<Result<Vec<_>>>()?;
    CoefficientVector::new(seqs)
}

/// Writes the nonzero entries in the format read by [`parse_coefficients`].
pub fn format_coefficients(coeffs: &CoefficientVector) -> String {
    let mut out = String::new();
    for (i, ch) in coeffs.channels().iter().enumerate() {
        for (k, c) in ch.nonzero() {
            let _ = write!(out, "{}", i + 1);
            for x in &k {
                let _ = write!(out, " {x}");
            }
            let _ = writeln!(out, " {} {}", c.re, c.im);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> FrequencyGrid {
        FrequencyGrid::new(1, n).unwrap()
    }

    #[test]
    fn delta_zero_is_the_unit() {
        let g = grid(16);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = CoefficientVector::random(&mut rng, 1, 1, 3);
        let a = SymbolSequence::constant(g, C64::from(1.0));
        let out = convolve(&a, b.channel(0)).unwrap();
        assert_eq!(out, *b.channel(0));
    }

    #[test]
    fn delta_shift() {
        let g = grid(16);
        let a = SymbolSequence::from_coefficients(g, vec![(vec![1], C64::from(1.0))]).unwrap();
        let out = convolve(&a, &Sequence::delta(vec![0], C64::from(1.0))).unwrap();
        assert_eq!(out.nonzero(), vec![(vec![1], C64::from(1.0))]);
    }

    #[test]
    fn folding_preserves_samples() {
        let g = grid(8);
        let s = Sequence::from_entries(1, &[(vec![5], C64::new(1.0, 2.0)), (vec![-9], C64::from(3.0))]).unwrap();
        let f = fold_to_grid(&s, g).unwrap();
        for w in g.centers() {
            assert!((s.transform(&w) - f.transform(&w)).norm() < 1e-13);
        }
        assert_eq!(f.lo(), &[-4]);
        assert_eq!(f.shape(), &[8]);
    }

    #[test]
    fn sample_round_trip() {
        let g = FrequencyGrid::new(2, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = CoefficientVector::random(&mut rng, 2, 2, 2);
        let back = CoefficientVector::from_samples(g, &b.sample(g)).unwrap();
        let diff = back.sub(&b).unwrap();
        assert!(diff.norm() < 1e-12);
    }

    #[test]
    fn coefficient_text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = CoefficientVector::random(&mut rng, 3, 1, 2);
        let text = format_coefficients(&b);
        let back = parse_coefficients(&text, 1, 3).unwrap();
        assert_eq!(back, b);
        assert!(parse_coefficients("4 0 1 0", 1, 3).is_err());
    }

    #[test]
    fn identity_operator_keeps_coefficients() {
        let g = grid(32);
        let frame = FiberFrame::standard(g, 2);
        let r = RangeOperatorField::from_matrices(frame, vec![linalg::identity(2); 32]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = CoefficientVector::random(&mut rng, 2, 1, 4);
        let out = apply_operator(&r, &b).unwrap();
        assert!(out.sub(&b).unwrap().norm() < 1e-10);
    }

    #[test]
    fn fibers_outside_the_space_are_rejected() {
        let g = grid(4);
        let b = CMatrix::from_column_slice(2, 1, &[C64::from(1.0), C64::from(0.0)]);
        let frame = FiberFrame::from_bases(g, 2, vec![b; 4]).unwrap();
        let r = RangeOperatorField::from_matrices(frame, vec![linalg::identity(1); 4]).unwrap();
        let bad = vec![CVector::from_column_slice(&[C64::from(0.0), C64::from(1.0)]); 4];
        let err = apply_operator_to_fibers(&r, &bad).unwrap_err();
        assert!(err.to_string().starts_with("f not in V"));
    }
}
