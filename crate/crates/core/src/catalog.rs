//! Named operator fields and seeded random families used by the examples,
//! the test-suite and the bundled problems.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::Rng;

use crate::fields::{exp_mode, FrequencyGrid, MatrixField, ScalarField, TrigPoly};
use crate::linalg;
use crate::rangeop::RangeOperatorField;
use crate::{CMatrix, CVector, C64};

fn re(x: f64) -> C64 {
    C64::from(x)
}

fn op(grid: FrequencyGrid, f: impl Fn(&[f64]) -> CMatrix) -> RangeOperatorField {
    RangeOperatorField::from_matrix_field(&MatrixField::from_fn(grid, f)).expect("square field")
}

fn diag(entries: &[C64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_column_slice(entries))
}

/// `I_n`.
pub fn identity(grid: FrequencyGrid, n: usize) -> RangeOperatorField {
    op(grid, |_| linalg::identity(n))
}

/// `[[0, 1], [0, 0]]` on every cell.
pub fn jordan(grid: FrequencyGrid) -> RangeOperatorField {
    op(grid, |_| linalg::from_real_rows(2, 2, &[0.0, 1.0, 0.0, 0.0]))
}

/// `diag(1, ω_1)`.
pub fn diag_one_omega(grid: FrequencyGrid) -> RangeOperatorField {
    op(grid, |w| diag(&[re(1.0), re(w[0])]))
}

/// `ω_1 I_n`, not bounded below near the origin.
pub fn omega_identity(grid: FrequencyGrid, n: usize) -> RangeOperatorField {
    op(grid, |w| linalg::identity(n) * re(w[0]))
}

/// `diag(â, b̂)` with `â = e^{-2πiω_1}`, `b̂ = 3 + e^{-2πiω_1}/2`.
pub fn normal_diagonal(grid: FrequencyGrid) -> RangeOperatorField {
    op(grid, |w| {
        let e = exp_mode(&w[..1], &[1]);
        diag(&[e, re(3.0) + e * 0.5])
    })
}

/// `[[1, 1], [0, 1 + ω_1]]`: eigenvectors `(1, 0)` and `(1, ω_1)` merge as
/// `ω_1 → 0`, so `C_b(ω) = 1/√(1 + ω_1²)`.
pub fn coalescing(grid: FrequencyGrid) -> RangeOperatorField {
    op(grid, |w| linalg::from_real_rows(2, 2, &[1.0, 1.0, 0.0, 1.0 + w[0]]))
}

/// Closed form of `C_b` for [`coalescing`].
pub fn coalescing_cb(omega: &[f64]) -> f64 {
    1.0 / (1.0 + omega[0] * omega[0]).sqrt()
}

/// Eigenbasis `e_1`, `(e_1 + e_2)/√2` (a 45° skew, constant in ω) with
/// eigenvalues `1 + e^{-2πiω_1}/2` and `−1 + e^{-2πiω_1}/2`.
pub fn skewed(grid: FrequencyGrid) -> RangeOperatorField {
    let s = linalg::from_real_rows(2, 2, &[1.0, FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2]);
    let inv = linalg::inverse(&s).expect("invertible skew");
    op(grid, move |w| {
        let e = exp_mode(&w[..1], &[1]) * 0.5;
        &s * diag(&[re(1.0) + e, re(-1.0) + e]) * &inv
    })
}

/// `diag(1, 1)` for `ω_1 < 1/2`, `diag(1, 2)` otherwise.
pub fn step(grid: FrequencyGrid) -> RangeOperatorField {
    op(grid, |w| diag(&[re(1.0), re(if w[0] < 0.5 { 1.0 } else { 2.0 })]))
}

/// `[[1, ω_1], [ω_1, ω_1²]]`, rank one everywhere.
pub fn rank_one(grid: FrequencyGrid) -> RangeOperatorField {
    op(grid, |w| {
        let x = w[0];
        linalg::from_real_rows(2, 2, &[1.0, x, x, x * x])
    })
}

/// Random trigonometric polynomial with coefficients in the unit square
/// and `|m|_∞ ≤ degree`.
pub fn random_poly(rng: &mut impl Rng, dim: usize, degree: i64) -> TrigPoly {
    let mut p = TrigPoly::zero(dim);
    let side = 2 * degree + 1;
    for idx in 0..side.pow(dim as u32) {
        let mut m = vec![0i64; dim];
        let mut r = idx;
        for a in (0..dim).rev() {
            m[a] = r % side - degree;
            r /= side;
        }
        p.push(m, C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    }
    p
}

/// Matrix of trigonometric polynomials.
#[derive(Debug, Clone)]
pub struct TrigMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<TrigPoly>,
}

impl TrigMatrix {
    pub fn eval(&self, omega: &[f64]) -> CMatrix {
        CMatrix::from_fn(self.rows, self.cols, |i, j| self.entries[i * self.cols + j].eval(omega))
    }

    pub fn sample(&self, grid: FrequencyGrid) -> MatrixField {
        MatrixField::from_fn(grid, |w| self.eval(w))
    }
}

pub fn random_trig_matrix(rng: &mut impl Rng, dim: usize, n: usize, degree: i64) -> TrigMatrix {
    TrigMatrix {
        rows: n,
        cols: n,
        entries: (0..n * n).map(|_| random_poly(rng, dim, degree)).collect(),
    }
}

/// Hermitian field `Σ_m H_m e^{-2πi⟨ω,m⟩}` with `H_{−m} = H_m*`.
pub fn random_hermitian(rng: &mut impl Rng, dim: usize, n: usize, degree: i64) -> TrigMatrix {
    let a = random_trig_matrix(rng, dim, n, degree);
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            // (A + A*)/2 with A*(ω)_{ij} = conj(a_ji(ω)) = Σ conj(c_m) e^{+2πi⟨ω,m⟩}
            let mut p = TrigPoly::zero(dim);
            for (m, c) in a.entries[i * n + j].terms() {
                p.push(m.clone(), c * 0.5);
            }
            for (m, c) in a.entries[j * n + i].terms() {
                p.push(m.iter().map(|x| -x).collect(), c.conj() * 0.5);
            }
            entries.push(p);
        }
    }
    TrigMatrix {
        rows: n,
        cols: n,
        entries,
    }
}

/// Haar-like random unitary from the QR factorization of a Gaussian-ish
/// matrix.
pub fn random_unitary(rng: &mut impl Rng, n: usize) -> CMatrix {
    let m = CMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    linalg::gram_schmidt(&m, 1e-12)
}

/// `U D(ω) U*` with a constant random unitary `U` and random diagonal
/// trigonometric polynomials `D`.
pub fn random_normal(rng: &mut impl Rng, dim: usize, n: usize, degree: i64) -> (CMatrix, Vec<TrigPoly>) {
    let u = random_unitary(rng, n);
    let d = (0..n).map(|_| random_poly(rng, dim, degree)).collect();
    (u, d)
}

/// Similarity `S D(ω) S⁻¹` with a constant, reasonably conditioned `S`.
/// Returns the field together with the exact diagonal entries.
pub struct Diagonalizable {
    pub field: RangeOperatorField,
    pub eigenvalues: Vec<ScalarField<C64>>,
}

/// Random diagonalizable field. Each diagonal entry is a random
/// trigonometric polynomial offset by `2j`; with probability `repeat_prob`
/// an entry copies an earlier one, so fibers have repeated eigenvalues.
pub fn random_diagonalizable(
    rng: &mut impl Rng,
    grid: FrequencyGrid,
    n: usize,
    degree: i64,
    repeat_prob: f64,
) -> Diagonalizable {
    let s = loop {
        let s = CMatrix::from_fn(n, n, |i, j| {
            let base = if i == j { 2.0 } else { 0.0 };
            C64::new(base + rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5))
        });
        let sv = linalg::singular_values(&s);
        if sv[n - 1] > 0.2 * sv[0] {
            break s;
        }
    };
    let inv = linalg::inverse(&s).expect("well conditioned");
    let mut polys: Vec<TrigPoly> = Vec::with_capacity(n);
    for j in 0..n {
        if j > 0 && rng.gen_bool(repeat_prob) {
            let k = rng.gen_range(0..j);
            polys.push(polys[k].clone());
        } else {
            let mut p = random_poly(rng, grid.dim(), degree);
            p.push(vec![0; grid.dim()], C64::from(2.0 * j as f64));
            polys.push(p);
        }
    }
    let eigenvalues: Vec<ScalarField<C64>> = polys.iter().map(|p| p.sample(grid)).collect();
    let field = op(grid, |w| {
        let d = CVector::from_iterator(n, polys.iter().map(|p| p.eval(w)));
        &s * CMatrix::from_diagonal(&d) * &inv
    });
    Diagonalizable { field, eigenvalues }
}
