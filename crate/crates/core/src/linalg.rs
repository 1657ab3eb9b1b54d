//! Fixed-size dense complex matrices and a Hermitian eigensolver.
//!
//! Everything here is sized at compile time (2x2 and 4x4 in practice), so
//! matrices are plain `Copy` arrays and no allocation happens.

use core::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
// Float supplies the libm-backed methods when std is not linked.
#[allow(unused_imports)]
use num_traits::Float;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Column vector of length `N`.
pub type Ket<const N: usize> = [C64; N];

/// Square complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CMatrix<const N: usize> {
    pub rows: [[C64; N]; N],
}

pub type Mat2 = CMatrix<2>;
pub type Mat4 = CMatrix<4>;

impl<const N: usize> Default for CMatrix<N> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<const N: usize> CMatrix<N> {
    pub const fn from_rows(rows: [[C64; N]; N]) -> Self {
        Self { rows }
    }

    pub const fn zeros() -> Self {
        Self { rows: [[ZERO; N]; N] }
    }

    pub fn identity() -> Self {
        Self::diag_real([1.0; N])
    }

    pub fn diag_real(d: [f64; N]) -> Self {
        let mut m = Self::zeros();
        for (i, v) in d.iter().enumerate() {
            m.rows[i][i] = C64::new(*v, 0.0);
        }
        m
    }

    /// `|v><v|`
    pub fn outer(v: &Ket<N>) -> Self {
        Self::outer2(v, v)
    }

    /// `|u><v|`
    pub fn outer2(u: &Ket<N>, v: &Ket<N>) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                m.rows[i][j] = u[i] * v[j].conj();
            }
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                m.rows[i][j] = self.rows[j][i].conj();
            }
        }
        m
    }

    pub fn conj(&self) -> Self {
        let mut m = *self;
        m.rows.iter_mut().flatten().for_each(|z| *z = z.conj());
        m
    }

    pub fn trace(&self) -> C64 {
        (0..N).map(|i| self.rows[i][i]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut m = *self;
        m.rows.iter_mut().flatten().for_each(|z| *z *= s);
        m
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn apply(&self, v: &Ket<N>) -> Ket<N> {
        let mut out = [ZERO; N];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..N).map(|j| self.rows[i][j] * v[j]).sum();
        }
        out
    }

    /// `<u|A|v>`
    pub fn sandwich(&self, u: &Ket<N>, v: &Ket<N>) -> C64 {
        let av = self.apply(v);
        (0..N).map(|i| u[i].conj() * av[i]).sum()
    }

    /// `Tr(A B)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> C64 {
        let mut acc = ZERO;
        for i in 0..N {
            for k in 0..N {
                acc += self.rows[i][k] * other.rows[k][i];
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.rows.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.rows
            .iter()
            .flatten()
            .zip(other.rows.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermitian_deviation(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    /// `(A + A†)/2`
    pub fn hermitian_part(&self) -> Self {
        (*self + self.adjoint()).scale_real(0.5)
    }

    pub fn is_finite(&self) -> bool {
        self.rows.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Eigen-decomposition of a Hermitian matrix (the anti-Hermitian part is
    /// ignored). Eigenvalues are returned in ascending order.
    pub fn hermitian_eigen(&self) -> HermitianEigen<N> {
        jacobi_eigen(&self.hermitian_part())
    }

    /// Principal square root of a Hermitian positive semidefinite matrix;
    /// negative eigenvalues are floored at zero.
    pub fn sqrt_psd(&self) -> Self {
        let eig = self.hermitian_eigen();
        eig.map_values(|v| v.max(0.0).sqrt())
    }

    /// Lower-triangular `L` with `A = L L†`, `None` if `A` is not numerically
    /// positive definite.
    pub fn cholesky_lower(&self) -> Option<Self> {
        let mut l = Self::zeros();
        for j in 0..N {
            let mut d = self.rows[j][j].re;
            for k in 0..j {
                d -= l.rows[j][k].norm_sqr();
            }
            if !(d > 0.0) {
                return None;
            }
            let djj = d.sqrt();
            l.rows[j][j] = C64::new(djj, 0.0);
            for i in (j + 1)..N {
                let mut s = self.rows[i][j];
                for k in 0..j {
                    s -= l.rows[i][k] * l.rows[j][k].conj();
                }
                l.rows[i][j] = s / djj;
            }
        }
        Some(l)
    }
}

impl<const N: usize> Add for CMatrix<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for (a, b) in self.rows.iter_mut().flatten().zip(rhs.rows.iter().flatten()) {
            *a += b;
        }
        self
    }
}

impl<const N: usize> Sub for CMatrix<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for (a, b) in self.rows.iter_mut().flatten().zip(rhs.rows.iter().flatten()) {
            *a -= b;
        }
        self
    }
}

impl<const N: usize> Mul for CMatrix<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            for k in 0..N {
                let a = self.rows[i][k];
                if a == ZERO {
                    continue;
                }
                for j in 0..N {
                    m.rows[i][j] += a * rhs.rows[k][j];
                }
            }
        }
        m
    }
}

impl<const N: usize> Index<(usize, usize)> for CMatrix<N> {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.rows[i][j]
    }
}

impl<const N: usize> IndexMut<(usize, usize)> for CMatrix<N> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.rows[i][j]
    }
}

/// Kronecker product of two 2x2 matrices, `A ⊗ B`, in the ordering where the
/// first factor is the slow index.
pub fn kron(a: &Mat2, b: &Mat2) -> Mat4 {
    let mut m = Mat4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    m.rows[2 * i + k][2 * j + l] = a.rows[i][j] * b.rows[k][l];
                }
            }
        }
    }
    m
}

pub fn kron_ket(a: &Ket<2>, b: &Ket<2>) -> Ket<4> {
    [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]]
}

/// Result of [`CMatrix::hermitian_eigen`]. Column `k` of `vectors` is the
/// eigenvector for `values[k]`; values ascend.
#[derive(Debug, Clone, Copy)]
pub struct HermitianEigen<const N: usize> {
    pub values: [f64; N],
    pub vectors: CMatrix<N>,
}

impl<const N: usize> HermitianEigen<N> {
    pub fn vector(&self, k: usize) -> Ket<N> {
        let mut v = [ZERO; N];
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = self.vectors.rows[i][k];
        }
        v
    }

    /// `V f(Λ) V†`
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> CMatrix<N> {
        let mut m = CMatrix::zeros();
        for k in 0..N {
            let w = f(self.values[k]);
            if w == 0.0 {
                continue;
            }
            let v = self.vector(k);
            for i in 0..N {
                for j in 0..N {
                    m.rows[i][j] += v[i] * v[j].conj() * w;
                }
            }
        }
        m
    }
}

const MAX_SWEEPS: usize = 64;

/// Cyclic complex Jacobi rotations. Each step first removes the phase of the
/// pivot `a_pq` and then applies the real symmetric Jacobi rotation.
fn jacobi_eigen<const N: usize>(a0: &CMatrix<N>) -> HermitianEigen<N> {
    let mut a = *a0;
    let mut v = CMatrix::<N>::identity();
    let scale = a.frobenius_norm();
    if scale == 0.0 || N < 2 {
        return finish(a, v);
    }
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..N)
            .flat_map(|i| (0..N).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.rows[i][j].norm_sqr())
            .sum();
        if off.sqrt() <= 1e-17 * scale {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                let apq = a.rows[p][q];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = apq / mag;
                let app = a.rows[p][p].re;
                let aqq = a.rows[q][q].re;
                let theta = (aqq - app) / (2.0 * mag);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // U = diag(1, e^{-i arg a_pq}) · [[c, s], [-s, c]] on the (p, q) plane.
                let u_pp = C64::new(c, 0.0);
                let u_pq = C64::new(s, 0.0);
                let u_qp = -phase.conj() * s;
                let u_qq = phase.conj() * c;
                // A ← A U (columns p, q)
                for i in 0..N {
                    let aip = a.rows[i][p];
                    let aiq = a.rows[i][q];
                    a.rows[i][p] = aip * u_pp + aiq * u_qp;
                    a.rows[i][q] = aip * u_pq + aiq * u_qq;
                }
                // A ← U† A (rows p, q)
                for j in 0..N {
                    let apj = a.rows[p][j];
                    let aqj = a.rows[q][j];
                    a.rows[p][j] = u_pp.conj() * apj + u_qp.conj() * aqj;
                    a.rows[q][j] = u_pq.conj() * apj + u_qq.conj() * aqj;
                }
                a.rows[p][q] = ZERO;
                a.rows[q][p] = ZERO;
                for i in 0..N {
                    let vip = v.rows[i][p];
                    let viq = v.rows[i][q];
                    v.rows[i][p] = vip * u_pp + viq * u_qp;
                    v.rows[i][q] = vip * u_pq + viq * u_qq;
                }
            }
        }
    }
    finish(a, v)
}

fn finish<const N: usize>(a: CMatrix<N>, v: CMatrix<N>) -> HermitianEigen<N> {
    let mut order = [0usize; N];
    for (i, o) in order.iter_mut().enumerate() {
        *o = i;
    }
    order.sort_by(|&i, &j| a.rows[i][i].re.total_cmp(&a.rows[j][j].re));
    let mut values = [0.0; N];
    let mut vectors = CMatrix::zeros();
    for (k, &src) in order.iter().enumerate() {
        values[k] = a.rows[src][src].re;
        for i in 0..N {
            vectors.rows[i][k] = v.rows[i][src];
        }
    }
    HermitianEigen { values, vectors }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn arb_hermitian4() -> impl Strategy<Value = Mat4> {
        proptest::collection::vec(-1.0f64..1.0, 32).prop_map(|xs| {
            let mut m = Mat4::zeros();
            for i in 0..4 {
                for j in 0..4 {
                    let k = 2 * (4 * i + j);
                    m.rows[i][j] = c(xs[k], xs[k + 1]);
                }
            }
            m.hermitian_part()
        })
    }

    #[test]
    fn eigen_of_diagonal_is_sorted() {
        let m = Mat4::diag_real([3.0, -1.0, 2.0, 0.5]);
        let e = m.hermitian_eigen();
        assert_eq!(e.values, [-1.0, 0.5, 2.0, 3.0]);
    }

    #[test]
    fn eigen_of_pauli_y() {
        let y = Mat2::from_rows([[ZERO, -I], [I, ZERO]]);
        let e = y.hermitian_eigen();
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        let v = e.vector(1);
        let yv = y.apply(&v);
        for k in 0..2 {
            assert!((yv[k] - v[k]).norm() < 1e-14);
        }
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = Mat4::from_rows([
            [c(4.0, 0.0), c(1.0, 1.0), c(0.0, 0.5), c(0.2, 0.0)],
            [c(1.0, -1.0), c(3.0, 0.0), c(0.3, 0.0), c(0.0, -0.1)],
            [c(0.0, -0.5), c(0.3, 0.0), c(2.0, 0.0), c(0.1, 0.1)],
            [c(0.2, 0.0), c(0.0, 0.1), c(0.1, -0.1), c(1.0, 0.0)],
        ]);
        let l = a.cholesky_lower().unwrap();
        assert!((l * l.adjoint()).max_abs_diff(&a) < 1e-13);
        for i in 0..4 {
            for j in (i + 1)..4 {
                assert_eq!(l.rows[i][j], ZERO);
            }
        }
        assert!(Mat4::diag_real([1.0, 0.0, 1.0, 1.0]).cholesky_lower().is_none());
    }

    #[test]
    fn kron_matches_index_convention() {
        let a = Mat2::from_rows([[c(1.0, 0.0), c(2.0, 0.0)], [c(3.0, 0.0), c(4.0, 0.0)]]);
        let b = Mat2::from_rows([[c(0.0, 1.0), ONE], [ZERO, c(5.0, 0.0)]]);
        let k = kron(&a, &b);
        assert_eq!(k[(0, 0)], c(0.0, 1.0));
        assert_eq!(k[(1, 3)], c(10.0, 0.0));
        assert_eq!(k[(3, 2)], ZERO);
        assert_eq!(k[(2, 1)], c(3.0, 0.0));
    }

    proptest! {
        #[test]
        fn eigen_reconstructs_and_is_unitary(m in arb_hermitian4()) {
            let e = m.hermitian_eigen();
            let back = e.map_values(|v| v);
            prop_assert!(back.max_abs_diff(&m) < 1e-12);
            let vv = e.vectors.adjoint() * e.vectors;
            prop_assert!(vv.max_abs_diff(&Mat4::identity()) < 1e-12);
            for k in 1..4 {
                prop_assert!(e.values[k - 1] <= e.values[k]);
            }
        }

        #[test]
        fn sqrt_psd_squares_back(m in arb_hermitian4()) {
            let psd = m * m.adjoint();
            let r = psd.sqrt_psd();
            prop_assert!((r * r).max_abs_diff(&psd) < 1e-10);
        }
    }
}
