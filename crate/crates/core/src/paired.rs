//! Paired-real representation of complex `d x d` matrices.
//!
//! A complex matrix `A + iB` is stored as the pair `(A, B)` and realized,
//! when needed, as the real matrix `[[A, -B], [B, A]]`. Matrices of that
//! shape are exactly the real matrices commuting with the standard complex
//! structure, and unitaries correspond to orthosymplectic matrices. Keeping
//! the pair explicit lets the crate stay free of complex scalar types.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PairedMatrix {
    pub re: DMatrix<f64>,
    pub im: DMatrix<f64>,
}

impl PairedMatrix {
    pub fn zeros(d: usize) -> Self {
        Self {
            re: DMatrix::zeros(d, d),
            im: DMatrix::zeros(d, d),
        }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            re: DMatrix::identity(d, d),
            im: DMatrix::zeros(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.re.nrows()
    }

    /// Real realization `[[re, -im], [im, re]]`.
    pub fn to_real(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(2 * d, 2 * d);
        m.view_mut((0, 0), (d, d)).copy_from(&self.re);
        m.view_mut((d, d), (d, d)).copy_from(&self.re);
        m.view_mut((0, d), (d, d)).copy_from(&(-&self.im));
        m.view_mut((d, 0), (d, d)).copy_from(&self.im);
        m
    }

    /// Orthogonal projection of an arbitrary real `2d x 2d` matrix onto the
    /// paired class.
    pub fn from_real_projected(m: &DMatrix<f64>) -> Self {
        let d = m.nrows() / 2;
        let m11 = m.view((0, 0), (d, d));
        let m12 = m.view((0, d), (d, d));
        let m21 = m.view((d, 0), (d, d));
        let m22 = m.view((d, d), (d, d));
        Self {
            re: (m11 + m22) * 0.5,
            im: (m21 - m12) * 0.5,
        }
    }

    /// Distance of a real matrix from its paired-class projection.
    #[cfg(test)]
    pub fn structure_residual(m: &DMatrix<f64>) -> f64 {
        (Self::from_real_projected(m).to_real() - m).norm()
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        Self {
            re: &self.re * &rhs.re - &self.im * &rhs.im,
            im: &self.re * &rhs.im + &self.im * &rhs.re,
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            re: self.re.transpose(),
            im: -self.im.transpose(),
        }
    }

    pub fn column(&self, j: usize) -> (DVector<f64>, DVector<f64>) {
        (
            self.re.column(j).into_owned(),
            self.im.column(j).into_owned(),
        )
    }

    pub fn set_column(&mut self, j: usize, col: &(DVector<f64>, DVector<f64>)) {
        self.re.column_mut(j).copy_from(&col.0);
        self.im.column_mut(j).copy_from(&col.1);
    }
}

/// Complex inner product `<a|b>` of paired column vectors, returned as
/// `(re, im)`.
pub(crate) fn cdot(
    a: &(DVector<f64>, DVector<f64>),
    b: &(DVector<f64>, DVector<f64>),
) -> (f64, f64) {
    (a.0.dot(&b.0) + a.1.dot(&b.1), a.0.dot(&b.1) - a.1.dot(&b.0))
}

pub(crate) fn cnorm(a: &(DVector<f64>, DVector<f64>)) -> f64 {
    (a.0.norm_squared() + a.1.norm_squared()).sqrt()
}

/// `a -= (cr + i*ci) * b`
fn axpy_conj(
    a: &mut (DVector<f64>, DVector<f64>),
    (cr, ci): (f64, f64),
    b: &(DVector<f64>, DVector<f64>),
) {
    a.0 -= &b.0 * cr - &b.1 * ci;
    a.1 -= &b.0 * ci + &b.1 * cr;
}

/// Remove the complex span of `basis` from `v` (done twice for stability).
pub(crate) fn project_out(
    v: &mut (DVector<f64>, DVector<f64>),
    basis: &[(DVector<f64>, DVector<f64>)],
) {
    for _ in 0..2 {
        for b in basis {
            let c = cdot(b, v);
            axpy_conj(v, c, b);
        }
    }
}

fn scale(v: &mut (DVector<f64>, DVector<f64>), s: f64) {
    v.0 *= s;
    v.1 *= s;
}

/// Modified Gram-Schmidt over the complex inner product, in place. Returns
/// false when a column collapses below `tol` (rank deficiency).
pub(crate) fn complex_gram_schmidt(m: &mut PairedMatrix, tol: f64) -> bool {
    let d = m.dim();
    let mut done: Vec<(DVector<f64>, DVector<f64>)> = Vec::with_capacity(d);
    for j in 0..d {
        let mut col = m.column(j);
        project_out(&mut col, &done);
        let n = cnorm(&col);
        if n <= tol {
            return false;
        }
        scale(&mut col, 1.0 / n);
        m.set_column(j, &col);
        done.push(col);
    }
    true
}

/// Haar-ish random unitary: complex Ginibre sample orthonormalized.
pub(crate) fn random_unitary<R: Rng>(d: usize, rng: &mut R) -> PairedMatrix {
    loop {
        let mut m = PairedMatrix {
            re: DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal)),
            im: DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal)),
        };
        if complex_gram_schmidt(&mut m, 1e-8) {
            return m;
        }
    }
}

/// Complex orthonormal eigenbasis of a Hermitian paired matrix, eigenvalues
/// descending. The planes are read off the real symmetric realization.
pub(crate) fn complex_eigenbasis(h: &PairedMatrix) -> (Vec<f64>, PairedMatrix) {
    let d = h.dim();
    let (vals, vecs) = crate::numerics::symmetric_eigen_sorted(&h.to_real());
    let mut out_vals = Vec::with_capacity(d);
    let mut basis: Vec<(DVector<f64>, DVector<f64>)> = Vec::with_capacity(d);
    for (j, &val) in vals.iter().enumerate() {
        if basis.len() == d {
            break;
        }
        let col = vecs.column(j);
        let mut cand = (
            DVector::from_column_slice(&col.as_slice()[..d]),
            DVector::from_column_slice(&col.as_slice()[d..]),
        );
        project_out(&mut cand, &basis);
        let n = cnorm(&cand);
        if n > 1e-6 {
            scale(&mut cand, 1.0 / n);
            basis.push(cand);
            out_vals.push(val);
        }
    }
    let mut v = PairedMatrix::zeros(d);
    for (j, b) in basis.iter().enumerate() {
        v.set_column(j, b);
    }
    (out_vals, v)
}

/// Unitary polar factor of a (possibly singular) paired matrix, via the
/// eigendecomposition of `x^H x` with Gram-Schmidt completion of the
/// left singular vectors.
pub(crate) fn unitary_polar(x: &PairedMatrix) -> PairedMatrix {
    let d = x.dim();
    let h = x.adjoint().mul(x);
    let (_, v) = complex_eigenbasis(&h);

    // Images of the right singular directions; their norms are the singular
    // values, read off directly from x so squaring noise cannot inflate them.
    let images: Vec<(DVector<f64>, DVector<f64>)> = (0..d)
        .map(|j| {
            let vj = v.column(j);
            (&x.re * &vj.0 - &x.im * &vj.1, &x.re * &vj.1 + &x.im * &vj.0)
        })
        .collect();
    let smax = images.iter().map(cnorm).fold(0.0f64, f64::max);
    let thresh = 1e-7 * smax;

    let mut left: Vec<(DVector<f64>, DVector<f64>)> = Vec::with_capacity(d);
    let mut kept: Vec<(DVector<f64>, DVector<f64>)> = Vec::new();
    let mut missing = Vec::new();
    for (j, w) in images.into_iter().enumerate() {
        let mut uj = w;
        project_out(&mut uj, &kept);
        let n = cnorm(&uj);
        if n > thresh {
            scale(&mut uj, 1.0 / n);
            kept.push(uj.clone());
            left.push(uj);
        } else {
            left.push((DVector::zeros(d), DVector::zeros(d)));
            missing.push(j);
        }
    }
    if !missing.is_empty() {
        let mut pool = kept;
        let mut fill = missing.into_iter();
        let mut slot = fill.next();
        for b in 0..d {
            let Some(s) = slot else { break };
            let mut cand = (DVector::zeros(d), DVector::zeros(d));
            cand.0[b] = 1.0;
            project_out(&mut cand, &pool);
            let n = cnorm(&cand);
            if n > 1e-6 {
                scale(&mut cand, 1.0 / n);
                left[s] = cand.clone();
                pool.push(cand);
                slot = fill.next();
            }
        }
        assert!(slot.is_none(), "left singular basis completion failed");
    }

    // u * v^H, assembled column against column
    let mut u = PairedMatrix::zeros(d);
    for (j, c) in left.iter().enumerate() {
        u.set_column(j, c);
    }
    u.mul(&v.adjoint())
}

/// Orthogonal polar factor of a real square matrix by Newton iteration,
/// for inputs that are already close to orthogonal (retraction use).
/// Falls back to an SVD when the iteration stalls.
pub(crate) fn polar_retract(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut q = m.clone();
    for _ in 0..30 {
        let res = (q.transpose() * &q - &eye).norm();
        if res < 1e-14 {
            return q;
        }
        match q.clone().try_inverse() {
            Some(inv) => q = (&q + inv.transpose()) * 0.5,
            None => break,
        }
    }
    let svd = m.clone().svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}
