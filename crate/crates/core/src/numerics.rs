//! Tolerance-aware real-matrix kernels: PSD certification of Hermitian pairs,
//! PSD square roots, skew-symmetric canonical forms, pseudo-inverse and rank.
//!
//! Every Hermitian eigenproblem is solved through the real symmetric 2n x 2n
//! embedding `[[re, -im], [im, re]]`, whose spectrum is the Hermitian spectrum
//! doubled. One real symmetric eigensolver therefore serves the whole crate and
//! no complex arithmetic is needed anywhere.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Tolerances used by every certification and synthesis routine.
///
/// `eig_tol` is relative (comparisons are scaled by an input-dependent
/// magnitude), `residual_tol` bounds matrix reconstruction residuals and
/// `reg_eps` is the base regularization magnitude for singular-noise
/// dilations (the actual shift is `reg_eps * (1 + ||Y||_2)`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceConfig {
    pub eig_tol: f64,
    pub residual_tol: f64,
    pub reg_eps: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            eig_tol: 1e-9,
            residual_tol: 1e-8,
            reg_eps: 1e-10,
        }
    }
}

impl ToleranceConfig {
    pub fn new(eig_tol: f64, residual_tol: f64, reg_eps: f64) -> Result<Self> {
        if !(eig_tol > 0.0 && residual_tol > 0.0 && reg_eps > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "all tolerances must be strictly positive, got eig_tol={eig_tol}, \
                 residual_tol={residual_tol}, reg_eps={reg_eps}"
            )));
        }
        Ok(Self {
            eig_tol,
            residual_tol,
            reg_eps,
        })
    }
}

/// A Hermitian matrix `re + i*im` stored as its real and imaginary parts.
///
/// `re` must be symmetric and `im` skew-symmetric; inputs within
/// `residual_tol` of those symmetry classes are snapped onto them on
/// construction, anything further off is rejected.
#[derive(Debug, Clone)]
pub struct HermitianPair {
    re: DMatrix<f64>,
    im: DMatrix<f64>,
}

impl HermitianPair {
    pub fn new(re: DMatrix<f64>, im: DMatrix<f64>, cfg: &ToleranceConfig) -> Result<Self> {
        let n = re.nrows();
        if re.ncols() != n || im.nrows() != n || im.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "re is {}x{}, im is {}x{}",
                re.nrows(),
                re.ncols(),
                im.nrows(),
                im.ncols()
            )));
        }
        let re = symmetrize(&re, cfg)?;
        let im = antisymmetrize(&im, cfg)?;
        Ok(Self { re, im })
    }

    pub fn dim(&self) -> usize {
        self.re.nrows()
    }

    pub fn re(&self) -> &DMatrix<f64> {
        &self.re
    }

    pub fn im(&self) -> &DMatrix<f64> {
        &self.im
    }

    /// The transpose pair `(re, -im)`, representing the transposed Hermitian
    /// matrix. It has the same spectrum as the original.
    pub fn transpose(&self) -> Self {
        Self {
            re: self.re.clone(),
            im: -&self.im,
        }
    }

    /// The real symmetric `2n x 2n` embedding `[[re, -im], [im, re]]`.
    pub fn real_embedding(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&self.re);
        m.view_mut((n, n), (n, n)).copy_from(&self.re);
        m.view_mut((0, n), (n, n)).copy_from(&(-&self.im));
        m.view_mut((n, 0), (n, n)).copy_from(&self.im);
        m
    }
}

/// Canonical form of a skew-symmetric matrix under orthogonal conjugation:
/// `r^T k r = [[0, D], [-D, 0]]`, padded by one zero row/column when the
/// dimension is odd.
#[derive(Debug, Clone)]
pub struct SkewCanonicalForm {
    pub r: DMatrix<f64>,
    pub d_vals: Vec<f64>,
    pub zero_dim: usize,
}

impl SkewCanonicalForm {
    /// The canonical block matrix `[[0, D], [-D, 0]]` (plus the odd padding).
    pub fn block_form(&self) -> DMatrix<f64> {
        let m = self.d_vals.len();
        let n = 2 * m + self.zero_dim;
        let mut b = DMatrix::<f64>::zeros(n, n);
        for (j, d) in self.d_vals.iter().enumerate() {
            b[(j, m + j)] = *d;
            b[(m + j, j)] = -*d;
        }
        b
    }
}

/// Minimum eigenvalue of the Hermitian matrix `re + i*im`.
///
/// Computed from the real symmetric embedding, whose spectrum is the doubled
/// Hermitian spectrum.
pub fn psd_min_eig(h: &HermitianPair, _cfg: &ToleranceConfig) -> f64 {
    let eigs = symmetric_eigenvalues(&h.real_embedding());
    eigs.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Symmetric PSD square root `B` of `a` with `B * B = a`.
///
/// Eigenvalues within `-eig_tol * ||a||_2` of zero are clamped to zero;
/// anything further below zero is rejected as `NotPsd`.
pub fn sqrt_psd(a: &DMatrix<f64>, cfg: &ToleranceConfig) -> Result<DMatrix<f64>> {
    let a = symmetrize(a, cfg)?;
    let (vals, vecs) = symmetric_eigen_sorted(&a);
    let spectral = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = -cfg.eig_tol * spectral.max(1.0);
    let mut roots = Vec::with_capacity(vals.len());
    for &v in &vals {
        if v < floor {
            return Err(Error::NotPsd { min_eig: v });
        }
        roots.push(v.max(0.0).sqrt());
    }
    let mut b = DMatrix::<f64>::zeros(a.nrows(), a.ncols());
    for (j, root) in roots.iter().enumerate() {
        let col = vecs.column(j);
        // b += root * col * col^T, accumulated column by column
        for p in 0..a.nrows() {
            for q in 0..a.ncols() {
                b[(p, q)] += root * col[p] * col[q];
            }
        }
    }
    Ok(symmetrize_unchecked(&b))
}

/// Orthogonal reduction of a skew-symmetric matrix to the canonical
/// `[[0, D], [-D, 0]]` block form, `D` diagonal with nonnegative entries
/// sorted descending.
///
/// The 2-planes are read off the symmetric eigendecomposition of `k^T k`;
/// within each plane the partner of `u` is `-k u / ||k u||`. Eigenvector signs
/// are fixed (first entry above 1e-6 in absolute value made positive) so the
/// output is reproducible across runs.
pub fn skew_canonical(k: &DMatrix<f64>, cfg: &ToleranceConfig) -> Result<SkewCanonicalForm> {
    let n = k.nrows();
    if k.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "skew input must be square, got {}x{}",
            n,
            k.ncols()
        )));
    }
    let k = antisymmetrize(k, cfg)?;
    if n == 0 {
        return Ok(SkewCanonicalForm {
            r: DMatrix::zeros(0, 0),
            d_vals: vec![],
            zero_dim: 0,
        });
    }

    let ktk = symmetrize_unchecked(&(k.transpose() * &k));
    let (vals, vecs) = symmetric_eigen_sorted(&ktk);
    let spectral = vals[0].max(0.0).sqrt(); // ||k||_2
    let zero_thresh = cfg.eig_tol * (1.0 + spectral);

    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n); // everything chosen so far
    let mut pairs: Vec<(f64, DVector<f64>, DVector<f64>)> = Vec::new();
    let mut kernel: Vec<DVector<f64>> = Vec::new();

    let consider = |cand: &DVector<f64>,
                    basis: &mut Vec<DVector<f64>>,
                    pairs: &mut Vec<(f64, DVector<f64>, DVector<f64>)>,
                    kernel: &mut Vec<DVector<f64>>| {
        let mut c = cand.clone();
        for _ in 0..2 {
            for b in basis.iter() {
                let coeff = b.dot(&c);
                c -= b * coeff;
            }
        }
        if c.norm() <= 1e-6 {
            return;
        }
        let u = fix_sign(c.normalize());
        let ku = &k * &u;
        let d = ku.norm();
        if d > zero_thresh {
            let v = -(ku / d);
            basis.push(u.clone());
            basis.push(v.clone());
            pairs.push((d, u, v));
        } else {
            basis.push(u.clone());
            kernel.push(u);
        }
    };

    for j in 0..n {
        let cand = DVector::from_column_slice(vecs.column(j).as_slice());
        consider(&cand, &mut basis, &mut pairs, &mut kernel);
    }
    // Sweep the standard basis in case roundoff left a direction uncovered.
    if basis.len() < n {
        for j in 0..n {
            if basis.len() == n {
                break;
            }
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            consider(&e, &mut basis, &mut pairs, &mut kernel);
        }
    }
    if 2 * pairs.len() + kernel.len() != n {
        return Err(Error::ExtensionFailed(format!(
            "skew canonical grouping covered {} of {} directions",
            2 * pairs.len() + kernel.len(),
            n
        )));
    }

    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    // Zero planes are packed out of the kernel in discovery order.
    let mut kernel_iter = kernel.into_iter();
    while pairs.len() < n / 2 {
        let u = kernel_iter.next().expect("kernel exhausted");
        let v = kernel_iter
            .next()
            .expect("kernel pairing requires two vectors");
        pairs.push((0.0, u, v));
    }
    let leftover = kernel_iter.next();
    let zero_dim = usize::from(leftover.is_some());

    let m = pairs.len();
    let mut r = DMatrix::<f64>::zeros(n, n);
    let mut d_vals = Vec::with_capacity(m);
    for (j, (d, u, v)) in pairs.iter().enumerate() {
        r.column_mut(j).copy_from(u);
        r.column_mut(m + j).copy_from(v);
        d_vals.push(*d);
    }
    if let Some(z) = leftover {
        r.column_mut(n - 1).copy_from(&z);
    }
    Ok(SkewCanonicalForm {
        r,
        d_vals,
        zero_dim,
    })
}

/// Moore-Penrose pseudo-inverse together with the numerical rank
/// (singular values above `eig_tol * sigma_max`).
pub fn pinv_rank(a: &DMatrix<f64>, cfg: &ToleranceConfig) -> (DMatrix<f64>, usize) {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("svd with u requested");
    let v_t = svd.v_t.expect("svd with v_t requested");
    let sigma = &svd.singular_values;
    let smax = sigma.iter().fold(0.0f64, |m, s| m.max(*s));
    let thresh = cfg.eig_tol * smax;
    let mut rank = 0;
    let mut inv = DVector::<f64>::zeros(sigma.len());
    for (i, &s) in sigma.iter().enumerate() {
        if s > thresh {
            inv[i] = 1.0 / s;
            rank += 1;
        }
    }
    let mut scaled_vt = v_t.clone();
    for i in 0..sigma.len() {
        scaled_vt.row_mut(i).scale_mut(inv[i]);
    }
    (scaled_vt.transpose() * u.transpose(), rank)
}

/// Numerical rank with the threshold floored at an external scale:
/// counts singular values above `eig_tol * max(sigma_max, scale_floor)`.
/// A rank read off a matrix that is an exact cancellation (true value
/// zero) is meaningless against its own noise-level sigma_max; flooring
/// anchors the threshold to the scale of the problem that produced it.
pub(crate) fn rank_with_scale(a: &DMatrix<f64>, scale_floor: f64, cfg: &ToleranceConfig) -> usize {
    let svd = a.clone().svd(false, false);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, s| m.max(*s));
    let thresh = cfg.eig_tol * smax.max(scale_floor);
    svd.singular_values.iter().filter(|&&s| s > thresh).count()
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0f64, |m, s| m.max(*s))
}

/// Symmetric eigendecomposition, eigenvalues sorted descending, eigenvector
/// signs fixed for reproducibility. Returns `(values, vectors)` with the
/// eigenvectors in columns.
pub(crate) fn symmetric_eigen_sorted(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = a.clone().symmetric_eigen();
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let mut vals = Vec::with_capacity(n);
    let mut vecs = DMatrix::<f64>::zeros(n, n);
    for (slot, &idx) in order.iter().enumerate() {
        vals.push(eig.eigenvalues[idx]);
        let col = fix_sign(DVector::from_column_slice(
            eig.eigenvectors.column(idx).as_slice(),
        ));
        vecs.column_mut(slot).copy_from(&col);
    }
    (vals, vecs)
}

pub(crate) fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let sym = symmetrize_unchecked(a);
    sym.symmetric_eigen().eigenvalues.iter().cloned().collect()
}

/// Flip the sign of a vector so its first entry above 1e-6 in absolute value
/// is positive. Unit vectors of the dimensions used here always have one.
fn fix_sign(mut v: DVector<f64>) -> DVector<f64> {
    for i in 0..v.len() {
        if v[i].abs() > 1e-6 {
            if v[i] < 0.0 {
                v.neg_mut();
            }
            break;
        }
    }
    v
}

/// Snap onto the symmetric class, rejecting inputs further than
/// `residual_tol * (1 + ||a||_F)` from it.
pub(crate) fn symmetrize(a: &DMatrix<f64>, cfg: &ToleranceConfig) -> Result<DMatrix<f64>> {
    let residual = (a - a.transpose()).norm();
    // non-finite residuals (NaN entries) must be rejected, not admitted
    if residual > cfg.residual_tol * (1.0 + a.norm()) || !residual.is_finite() {
        return Err(Error::NotSymmetric { residual });
    }
    Ok(symmetrize_unchecked(a))
}

/// Snap onto the skew-symmetric class, rejecting inputs too far from it.
pub(crate) fn antisymmetrize(a: &DMatrix<f64>, cfg: &ToleranceConfig) -> Result<DMatrix<f64>> {
    let residual = (a + a.transpose()).norm();
    if residual > cfg.residual_tol * (1.0 + a.norm()) || !residual.is_finite() {
        return Err(Error::NotSkewSymmetric { residual });
    }
    Ok((a - a.transpose()) * 0.5)
}

pub(crate) fn symmetrize_unchecked(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}
