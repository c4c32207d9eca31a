use num_complex::Complex64;

use crate::error::{CoreError, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Dense complex matrix, row-major.
///
/// Sized for truncated Fock spaces of a few hundred levels, so every
/// operation is a straightforward dense loop; no sparsity, no blocking.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    /// Diagonal matrix from real entries.
    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &x) in entries.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = Self::zeros(self.rows, other.cols);
        // i-k-j order keeps the inner loop contiguous in both operands
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                let src = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        let mut out = vec![ZERO; self.rows];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            *o = row.iter().zip(v).map(|(a, x)| a * x).sum();
        }
        out
    }

    /// Kronecker product; `self` indexes the slower-varying factor.
    pub fn kron(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows * other.rows, self.cols * other.cols);
        for r1 in 0..self.rows {
            for c1 in 0..self.cols {
                let a = self[(r1, c1)];
                if a == ZERO {
                    continue;
                }
                for r2 in 0..other.rows {
                    for c2 in 0..other.cols {
                        out[(r1 * other.rows + r2, c1 * other.cols + c2)] = a * other[(r2, c2)];
                    }
                }
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest |m[i][j] - conj(m[j][i])| over all entries.
    pub fn hermitian_deviation(&self) -> f64 {
        assert!(self.is_square());
        let mut dev: f64 = 0.0;
        for r in 0..self.rows {
            for c in r..self.cols {
                dev = dev.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        dev
    }

    /// (m + m^dag) / 2; projects out antihermitian roundoff.
    pub fn hermitize(&self) -> Self {
        self.add(&self.dagger()).scale(C64::new(0.5, 0.0))
    }

    /// Determinant by LU with partial pivoting.
    pub fn det_lu(&self) -> C64 {
        assert!(self.is_square());
        let n = self.rows;
        let mut lu = self.clone();
        let mut det = ONE;
        for k in 0..n {
            let pivot = (k..n)
                .max_by(|&a, &b| {
                    lu[(a, k)]
                        .norm()
                        .partial_cmp(&lu[(b, k)].norm())
                        .unwrap()
                })
                .unwrap();
            if lu[(pivot, k)].norm() == 0.0 {
                return ZERO;
            }
            if pivot != k {
                for c in 0..n {
                    let tmp = lu[(k, c)];
                    lu[(k, c)] = lu[(pivot, c)];
                    lu[(pivot, c)] = tmp;
                }
                det = -det;
            }
            det *= lu[(k, k)];
            for r in (k + 1)..n {
                let factor = lu[(r, k)] / lu[(k, k)];
                for c in (k + 1)..n {
                    let sub = factor * lu[(k, c)];
                    lu[(r, c)] -= sub;
                }
            }
        }
        det
    }

    /// Cholesky factor L with self = L L^dag, or None if any pivot is
    /// nonpositive. Cheap positive-definiteness certificate; callers shift
    /// by a small multiple of the identity to test semidefiniteness.
    pub fn cholesky(&self) -> Option<Self> {
        assert!(self.is_square());
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut s = self[(j, j)].re;
            for k in 0..j {
                s -= l[(j, k)].norm_sqr();
            }
            if s <= 0.0 {
                return None;
            }
            let d = s.sqrt();
            l[(j, j)] = C64::new(d, 0.0);
            for i in (j + 1)..n {
                let mut z = self[(i, j)];
                for k in 0..j {
                    z -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = z / d;
            }
        }
        Some(l)
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Tensor-product structure of a multimode truncated space.
///
/// Mode 0 is the slowest-varying factor: for cutoffs `[d0, d1]` the basis
/// state |n0 n1> sits at index `n0 * d1 + n1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertLayout {
    dims: Vec<usize>,
}

impl HilbertLayout {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(CoreError::InvalidDimension {
                dim: 0,
                reason: "layout needs at least one mode",
            });
        }
        for &d in &dims {
            if d < 2 {
                return Err(CoreError::InvalidDimension {
                    dim: d,
                    reason: "each mode needs at least two levels",
                });
            }
        }
        Ok(Self { dims })
    }

    pub fn single(dim: usize) -> Result<Self> {
        Self::new(vec![dim])
    }

    pub fn n_modes(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self, mode: usize) -> usize {
        self.dims[mode]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.dims.len() {
            return Err(CoreError::ModeOutOfRange {
                mode,
                n_modes: self.dims.len(),
            });
        }
        Ok(())
    }

    /// Flat index of a product basis state.
    pub fn index(&self, occupations: &[usize]) -> usize {
        assert_eq!(occupations.len(), self.dims.len());
        let mut idx = 0;
        for (n, d) in occupations.iter().zip(&self.dims) {
            debug_assert!(n < d);
            idx = idx * d + n;
        }
        idx
    }

    /// Per-mode occupations of a flat index.
    pub fn decode(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = idx % d;
            idx /= d;
        }
        out
    }

    /// Lift a single-mode operator to the full space.
    pub fn embed(&self, op: &ComplexMatrix, mode: usize) -> Result<ComplexMatrix> {
        self.check_mode(mode)?;
        if !op.is_square() || op.rows() != self.dims[mode] {
            return Err(CoreError::DimensionMismatch {
                context: "embed",
                expected: self.dims[mode],
                got: op.rows(),
            });
        }
        let before: usize = self.dims[..mode].iter().product();
        let after: usize = self.dims[mode + 1..].iter().product();
        let mut out = ComplexMatrix::identity(before).kron(op);
        if after > 1 {
            out = out.kron(&ComplexMatrix::identity(after));
        }
        Ok(out)
    }
}

/// Truncated annihilation operator: a[n-1][n] = sqrt(n).
pub fn annihilation(dim: usize) -> ComplexMatrix {
    let mut a = ComplexMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

pub fn creation(dim: usize) -> ComplexMatrix {
    annihilation(dim).dagger()
}

/// Photon number operator diag(0, 1, ..., dim-1).
pub fn number_op(dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, dim, |r, c| {
        if r == c {
            C64::new(r as f64, 0.0)
        } else {
            ZERO
        }
    })
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_fn(2, 2, |r, c| if r != c { ONE } else { ZERO })
}

pub fn pauli_y() -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(2, 2);
    m[(0, 1)] = -I;
    m[(1, 0)] = I;
    m
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::diag(&[1.0, -1.0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn annihilation_entries() {
        let a = annihilation(4);
        assert_eq!(a[(0, 1)], ONE);
        assert_relative_eq!(a[(1, 2)].re, 2f64.sqrt());
        assert_relative_eq!(a[(2, 3)].re, 3f64.sqrt());
        assert_eq!(a[(1, 0)], ZERO);
    }

    #[test]
    fn commutator_has_truncation_corner() {
        // [a, a^dag] = 1 everywhere except the top level, where it is 1 - d
        let d = 5;
        let a = annihilation(d);
        let ad = creation(d);
        let comm = a.mul(&ad).sub(&ad.mul(&a));
        for n in 0..d - 1 {
            assert_relative_eq!(comm[(n, n)].re, 1.0, epsilon = 1e-14);
        }
        assert_relative_eq!(comm[(d - 1, d - 1)].re, 1.0 - d as f64, epsilon = 1e-14);
    }

    #[test]
    fn embed_mode_zero_is_slowest() {
        let layout = HilbertLayout::new(vec![2, 2]).unwrap();
        let z = layout.embed(&pauli_z(), 0).unwrap();
        for (i, want) in [1.0, 1.0, -1.0, -1.0].into_iter().enumerate() {
            assert_relative_eq!(z[(i, i)].re, want);
        }
        let z1 = layout.embed(&pauli_z(), 1).unwrap();
        for (i, want) in [1.0, -1.0, 1.0, -1.0].into_iter().enumerate() {
            assert_relative_eq!(z1[(i, i)].re, want);
        }
    }

    #[test]
    fn layout_index_round_trip() {
        let layout = HilbertLayout::new(vec![3, 4, 2]).unwrap();
        assert_eq!(layout.total_dim(), 24);
        for idx in 0..24 {
            let occ = layout.decode(idx);
            assert_eq!(layout.index(&occ), idx);
        }
        assert_eq!(layout.index(&[1, 0, 0]), 8);
        assert_eq!(layout.index(&[0, 1, 1]), 3);
    }

    #[test]
    fn embed_rejects_bad_mode_and_shape() {
        let layout = HilbertLayout::new(vec![2, 3]).unwrap();
        assert!(matches!(
            layout.embed(&pauli_z(), 2),
            Err(CoreError::ModeOutOfRange { .. })
        ));
        assert!(matches!(
            layout.embed(&pauli_z(), 1),
            Err(CoreError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn kron_against_hand_expansion() {
        let a = ComplexMatrix::from_fn(2, 2, |r, c| C64::new((2 * r + c) as f64 + 1.0, 0.0));
        let b = ComplexMatrix::identity(2);
        let k = a.kron(&b);
        assert_eq!(k.rows(), 4);
        assert_relative_eq!(k[(0, 0)].re, 1.0);
        assert_relative_eq!(k[(1, 1)].re, 1.0);
        assert_relative_eq!(k[(0, 2)].re, 2.0);
        assert_relative_eq!(k[(2, 0)].re, 3.0);
        assert_relative_eq!(k[(3, 3)].re, 4.0);
        assert_eq!(k[(0, 1)], ZERO);
    }

    #[test]
    fn dagger_and_trace() {
        let m = ComplexMatrix::from_fn(2, 2, |r, c| C64::new(r as f64, c as f64));
        let d = m.dagger();
        assert_eq!(d[(0, 1)], C64::new(1.0, -0.0));
        assert_eq!(d[(1, 0)], C64::new(0.0, -1.0));
        assert_eq!(m.trace(), C64::new(1.0, 1.0));
    }

    #[test]
    fn det_of_known_matrices() {
        let m = ComplexMatrix::from_fn(2, 2, |r, c| match (r, c) {
            (0, 0) => C64::new(1.0, 0.0),
            (0, 1) => C64::new(2.0, 0.0),
            (1, 0) => C64::new(3.0, 0.0),
            _ => C64::new(4.0, 0.0),
        });
        assert_relative_eq!(m.det_lu().re, -2.0, epsilon = 1e-12);

        // det(i * I_3) = i^3 = -i
        let m = ComplexMatrix::identity(3).scale(I);
        let d = m.det_lu();
        assert_relative_eq!(d.re, 0.0, epsilon = 1e-12);
        assert_relative_eq!(d.im, -1.0, epsilon = 1e-12);

        let singular = ComplexMatrix::from_fn(2, 2, |_, _| ONE);
        assert_relative_eq!(singular.det_lu().norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cholesky_accepts_psd_rejects_indefinite() {
        let psd = ComplexMatrix::diag(&[2.0, 1.0, 0.5]);
        let l = psd.cholesky().unwrap();
        let rec = l.mul(&l.dagger());
        assert_relative_eq!(rec.sub(&psd).max_abs(), 0.0, epsilon = 1e-14);

        let indef = ComplexMatrix::diag(&[1.0, -0.1]);
        assert!(indef.cholesky().is_none());

        // non-diagonal PSD with complex off-diagonal
        let mut m = ComplexMatrix::identity(2);
        m[(0, 1)] = C64::new(0.3, 0.4);
        m[(1, 0)] = C64::new(0.3, -0.4);
        let l = m.cholesky().unwrap();
        assert_relative_eq!(l.mul(&l.dagger()).sub(&m).max_abs(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn matvec_matches_mul() {
        let m = ComplexMatrix::from_fn(3, 3, |r, c| C64::new(r as f64 - c as f64, 1.0));
        let v = vec![ONE, I, C64::new(2.0, -1.0)];
        let got = m.matvec(&v);
        for i in 0..3 {
            let want: C64 = (0..3).map(|j| m[(i, j)] * v[j]).sum();
            assert_relative_eq!((got[i] - want).norm(), 0.0, epsilon = 1e-14);
        }
    }
}
