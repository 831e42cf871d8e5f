//! Symplectic forms and the operations the channel calculus is built on:
//! form matrices and their permutation bridges, symplectic and
//! orthosymplectic predicates, contraction embeddings, symplectic basis
//! completion, random sampling, and symbolic Gaussian unitaries.
//!
//! Convention: vectors are stored in the blocked ordering `x_1..x_d,
//! y_1..y_d` per subsystem, and every multi-subsystem object carries its
//! `SymplecticForm` explicitly. The form matrix of a single block is
//! `J = [[0, I], [-I, 0]]`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::{symmetrize, ToleranceConfig};
use crate::paired;

/// Block structure of a symplectic form: an ordered list of mode counts,
/// one entry per subsystem. The form matrix is the direct sum of the
/// per-block `J_{2d}` matrices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymplecticForm {
    blocks: Vec<usize>,
}

impl SymplecticForm {
    pub fn new(blocks: Vec<usize>) -> Result<Self> {
        if blocks.is_empty() || blocks.contains(&0) {
            return Err(Error::InvalidForm(format!(
                "block mode counts must be >= 1, got {blocks:?}"
            )));
        }
        Ok(Self { blocks })
    }

    /// Single-block form on `d` modes.
    pub fn single(d: usize) -> Result<Self> {
        Self::new(vec![d])
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn is_single_block(&self) -> bool {
        self.blocks.len() == 1
    }

    /// Total number of modes.
    pub fn modes(&self) -> usize {
        self.blocks.iter().sum()
    }

    /// Total real dimension `2 * modes`.
    pub fn dim(&self) -> usize {
        2 * self.modes()
    }

    /// The form matrix `J = J_{2 d_1} (+) ... (+) J_{2 d_k}`, exact 0/±1
    /// entries. Satisfies `J J^T = I` and `J^T = -J` exactly.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut j = DMatrix::<f64>::zeros(n, n);
        let mut off = 0;
        for &d in &self.blocks {
            for k in 0..d {
                j[(off + k, off + d + k)] = 1.0;
                j[(off + d + k, off + k)] = -1.0;
            }
            off += 2 * d;
        }
        j
    }

    /// `J v`, computed by exact index shuffling and negation.
    pub(crate) fn apply_j(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        let mut off = 0;
        for &d in &self.blocks {
            for k in 0..d {
                out[off + k] = v[off + d + k];
                out[off + d + k] = -v[off + k];
            }
            off += 2 * d;
        }
        out
    }

    /// Positions `(x, y)` of each mode's coordinate pair in the blocked
    /// layout, enumerated across blocks.
    fn mode_positions(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.modes());
        let mut off = 0;
        for &d in &self.blocks {
            for k in 0..d {
                out.push((off + k, off + d + k));
            }
            off += 2 * d;
        }
        out
    }

    /// Index/sign tables for the exact map `m -> J^T m J`: entry `(a, b)` of
    /// the result is `sign[a] * sign[b] * m[row[a], row[b]]`.
    fn jt_conj_tables(&self) -> (Vec<usize>, Vec<f64>) {
        let n = self.dim();
        let mut row = vec![0usize; n];
        let mut sign = vec![0.0f64; n];
        let mut off = 0;
        for &d in &self.blocks {
            for k in 0..d {
                // column off+d+k of J holds +1 at row off+k
                row[off + d + k] = off + k;
                sign[off + d + k] = 1.0;
                // column off+k of J holds -1 at row off+d+k
                row[off + k] = off + d + k;
                sign[off + k] = -1.0;
            }
            off += 2 * d;
        }
        (row, sign)
    }
}

impl std::fmt::Display for SymplecticForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self.blocks)
    }
}

/// The symplectic pairing `omega(a, b) = a^T J b`.
pub fn omega(form: &SymplecticForm, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.dot(&form.apply_j(b))
}

/// Frobenius norm of `l^T J l - J`.
pub fn symplectic_residual(l: &DMatrix<f64>, form: &SymplecticForm) -> Result<f64> {
    let n = form.dim();
    if l.nrows() != n || l.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{}, form {} needs {n}x{n}",
            l.nrows(),
            l.ncols(),
            form
        )));
    }
    let j = form.matrix();
    Ok((l.transpose() * &j * l - &j).norm())
}

/// Inverse of a symplectic matrix via `L^{-1} = J^T L^T J` (exact index
/// shuffling, no arithmetic beyond sign flips).
pub fn symplectic_inverse(
    l: &DMatrix<f64>,
    form: &SymplecticForm,
    cfg: &ToleranceConfig,
) -> Result<DMatrix<f64>> {
    let residual = symplectic_residual(l, form)?;
    if residual > cfg.residual_tol * (1.0 + l.norm_squared()) {
        return Err(Error::NotSymplectic { residual });
    }
    Ok(jt_conj(&l.transpose(), form))
}

/// `J^T m J` without tolerance checks.
pub(crate) fn jt_conj(m: &DMatrix<f64>, form: &SymplecticForm) -> DMatrix<f64> {
    let n = form.dim();
    let (row, sign) = form.jt_conj_tables();
    DMatrix::from_fn(n, n, |a, b| sign[a] * sign[b] * m[(row[a], row[b])])
}

/// Block decomposition of an orthosymplectic matrix under a single-block
/// form: `l = [[A, B], [-B, A]]` with `A^T A + B^T B = I` and `A^T B`
/// symmetric. Fails with `NotOrthogonal`, `NotSymplectic` or
/// `BlockStructureViolated`, checked in that order.
pub fn orthosymplectic_blocks(
    l: &DMatrix<f64>,
    form: &SymplecticForm,
    cfg: &ToleranceConfig,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !form.is_single_block() {
        return Err(Error::FormMismatch(format!(
            "orthosymplectic block form is defined for a single block, got {form}"
        )));
    }
    let n = form.dim();
    if l.nrows() != n || l.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{}, expected {n}x{n}",
            l.nrows(),
            l.ncols()
        )));
    }
    let scale = 1.0 + l.norm_squared();
    let ortho = (l.transpose() * l - DMatrix::<f64>::identity(n, n)).norm();
    if ortho > cfg.residual_tol * scale {
        return Err(Error::NotOrthogonal { residual: ortho });
    }
    let sym = symplectic_residual(l, form)?;
    if sym > cfg.residual_tol * scale {
        return Err(Error::NotSymplectic { residual: sym });
    }
    let d = n / 2;
    let a = l.view((0, 0), (d, d)).into_owned();
    let b = l.view((0, d), (d, d)).into_owned();
    let block_res = (l.view((d, 0), (d, d)) + &b)
        .norm()
        .hypot((l.view((d, d), (d, d)) - &a).norm());
    if block_res > cfg.residual_tol * scale {
        return Err(Error::BlockStructureViolated {
            residual: block_res,
        });
    }
    Ok((a, b))
}

/// Positions of dst-layout coordinates inside the src layout: entry `a`
/// is the src position of the coordinate that sits at position `a` in dst.
pub(crate) fn form_permutation_indices(
    src: &SymplecticForm,
    dst: &SymplecticForm,
) -> Result<Vec<usize>> {
    if src.dim() != dst.dim() {
        return Err(Error::DimensionMismatch(format!(
            "forms {src} and {dst} differ in total dimension"
        )));
    }
    let sp = src.mode_positions();
    let dp = dst.mode_positions();
    let mut map = vec![0usize; src.dim()];
    for m in 0..sp.len() {
        map[dp[m].0] = sp[m].0;
        map[dp[m].1] = sp[m].1;
    }
    Ok(map)
}

/// Permutation matrix `P` with `dst.matrix() = P^T src.matrix() P`
/// exactly; `P z` carries a dst-layout vector into the src layout.
pub fn form_permutation(src: &SymplecticForm, dst: &SymplecticForm) -> Result<DMatrix<f64>> {
    let map = form_permutation_indices(src, dst)?;
    let n = src.dim();
    let mut p = DMatrix::<f64>::zeros(n, n);
    for (a, &r) in map.iter().enumerate() {
        p[(r, a)] = 1.0;
    }
    Ok(p)
}

/// The `2 x 4` isometry contracting two single-mode symplectic planes into
/// one with pairing strength `cos(2 theta)`:
/// `Q Q^T = I_2` and `Q (J_2 (+) J_2) Q^T = [[0, cos 2t], [-cos 2t, 0]]`.
pub fn plane_contraction(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 4, &[c, 0.0, -s, 0.0, 0.0, c, 0.0, s])
}

/// Embed a positive contraction `a` (d x d) as the pairing defect of an
/// isometry: returns `Q` (2d x 4d) with `Q Q^T = I` and
/// `Q J_{4d} Q^T = [[0, a], [-a, 0]]`.
///
/// Built by diagonalizing `a`, applying `plane_contraction` with
/// `theta_j = arccos(lambda_j) / 2` per eigenvalue, and permuting between
/// the per-mode interleaved and the blocked coordinate layouts.
pub fn contraction_embedding(a: &DMatrix<f64>, cfg: &ToleranceConfig) -> Result<DMatrix<f64>> {
    let a = symmetrize(a, cfg)?;
    let d = a.nrows();
    let (vals, u) = crate::numerics::symmetric_eigen_sorted(&a);
    for &v in &vals {
        if v < -cfg.eig_tol || v > 1.0 + cfg.eig_tol {
            return Err(Error::NotContraction { eig: v });
        }
    }

    // Per-plane contractions in the interleaved layout (x_1, y_1, x_2, ...).
    let mut q_int = DMatrix::<f64>::zeros(2 * d, 4 * d);
    for (j, &v) in vals.iter().enumerate() {
        let theta = 0.5 * v.clamp(0.0, 1.0).acos();
        q_int
            .view_mut((2 * j, 4 * j), (2, 4))
            .copy_from(&plane_contraction(theta));
    }

    // Interleaved position of blocked position `a` among `m` modes.
    let inter = |a: usize, m: usize| if a < m { 2 * a } else { 2 * (a - m) + 1 };
    let q_lambda = DMatrix::from_fn(2 * d, 4 * d, |r, c| q_int[(inter(r, d), inter(c, 2 * d))]);

    let mut uu = DMatrix::<f64>::zeros(2 * d, 2 * d);
    uu.view_mut((0, 0), (d, d)).copy_from(&u);
    uu.view_mut((d, d), (d, d)).copy_from(&u);
    Ok(uu * q_lambda)
}

/// Extend a symplectic set to a full symplectic basis.
///
/// The inputs are `k` u-columns and `k` v-columns satisfying the pairings
/// `omega(u_i, u_j) = omega(v_i, v_j) = 0`, `omega(u_i, v_j) = delta_ij`.
/// Pair `i` of the output occupies the form's x- and y-coordinate column
/// slots of mode `i` (for a single block that is the ordering
/// `u_1..u_n v_1..v_n`); the supplied columns land in the slots of the
/// first `k` modes bitwise. Completion is by symplectic Gram-Schmidt over
/// the standard basis: the first candidate whose symplectic projection
/// keeps norm above 1e-6 becomes the next `u`, its partner is scaled so
/// the pairing is exactly one.
pub fn symplectic_extend(
    us: &[DVector<f64>],
    vs: &[DVector<f64>],
    form: &SymplecticForm,
    cfg: &ToleranceConfig,
) -> Result<DMatrix<f64>> {
    let n = form.modes();
    let dim = form.dim();
    let k = us.len();
    if vs.len() != k || k > n {
        return Err(Error::DimensionMismatch(format!(
            "{} u-columns and {} v-columns for {n} modes",
            us.len(),
            vs.len()
        )));
    }
    for c in us.iter().chain(vs.iter()) {
        if c.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "column has length {}, form {form} needs {dim}",
                c.len()
            )));
        }
    }
    let mut worst = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            let pair_scale = |a: &DVector<f64>, b: &DVector<f64>| 1.0 + a.norm() * b.norm();
            let e_uu = omega(form, &us[i], &us[j]).abs() / pair_scale(&us[i], &us[j]);
            let e_vv = omega(form, &vs[i], &vs[j]).abs() / pair_scale(&vs[i], &vs[j]);
            let e_uv = (omega(form, &us[i], &vs[j]) - target).abs() / pair_scale(&us[i], &vs[j]);
            worst = worst.max(e_uu).max(e_vv).max(e_uv);
        }
    }
    if worst > cfg.residual_tol {
        return Err(Error::NotSymplecticSet { residual: worst });
    }

    let mut pu: Vec<DVector<f64>> = us.to_vec();
    let mut pv: Vec<DVector<f64>> = vs.to_vec();

    // c - sum_i omega(c, v_i) u_i + sum_i omega(c, u_i) v_i, applied twice.
    let project = |c: &DVector<f64>, pu: &[DVector<f64>], pv: &[DVector<f64>]| {
        let mut out = c.clone();
        for _ in 0..2 {
            for i in 0..pu.len() {
                let a = omega(form, &out, &pv[i]);
                let b = omega(form, &out, &pu[i]);
                out = out - &pu[i] * a + &pv[i] * b;
            }
        }
        out
    };
    // Transpose of the projection, for locating partners in one scan.
    let project_t = |c: &DVector<f64>, pu: &[DVector<f64>], pv: &[DVector<f64>]| {
        let mut out = c.clone();
        for _ in 0..2 {
            for i in 0..pu.len() {
                let a = pu[i].dot(&out);
                let b = pv[i].dot(&out);
                out = out - form.apply_j(&pv[i]) * a + form.apply_j(&pu[i]) * b;
            }
        }
        out
    };

    let mut cursor = 0usize;
    while pu.len() < n {
        let mut next_u = None;
        while cursor < dim {
            let mut e = DVector::zeros(dim);
            e[cursor] = 1.0;
            cursor += 1;
            let c = project(&e, &pu, &pv);
            if c.norm() > 1e-6 {
                next_u = Some(c.normalize());
                break;
            }
        }
        let u = next_u.ok_or_else(|| {
            Error::ExtensionFailed(format!("no candidate left after {} pairs", pu.len()))
        })?;

        // omega(u, project(e_b)) for all b at once; the partner candidate
        // with the largest pairing keeps the division below well away from
        // its noise floor
        let z = project_t(&form.apply_j(&u), &pu, &pv);
        let b = (0..dim).max_by(|&i, &j| z[i].abs().partial_cmp(&z[j].abs()).unwrap());
        let b = match b {
            Some(b) if z[b].abs() > 1e-6 => b,
            _ => {
                return Err(Error::ExtensionFailed(format!(
                    "no symplectic partner for pair {}",
                    pu.len() + 1
                )))
            }
        };
        let mut e = DVector::zeros(dim);
        e[b] = 1.0;
        let mut v = project(&e, &pu, &pv);
        let pairing = omega(form, &u, &v);
        if pairing.abs() <= 1e-9 {
            return Err(Error::ExtensionFailed(format!(
                "degenerate pairing {pairing:.3e} for pair {}",
                pu.len() + 1
            )));
        }
        v /= pairing;
        // remove the Euclidean component along u; symplectically neutral
        let along = u.dot(&v);
        v -= &u * along;
        // balance the pair: omega(s u, v / s) stays one
        let s = v.norm().max(1e-12).sqrt();
        pu.push(u * s);
        pv.push(v / s);
    }

    let slots = form.mode_positions();
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for (j, (u, v)) in pu.iter().zip(pv.iter()).enumerate() {
        m.column_mut(slots[j].0).copy_from(u);
        m.column_mut(slots[j].1).copy_from(v);
    }
    Ok(m)
}

/// Random symplectic matrix `exp(J H)` for `H` random symmetric, scaled so
/// `||J H|| <= 2`. Deterministic for a fixed seed.
pub fn random_symplectic(form: &SymplecticForm, seed: u64) -> DMatrix<f64> {
    let n = form.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let x: f64 = rng.sample(StandardNormal);
            h[(i, j)] = x;
            h[(j, i)] = x;
        }
    }
    let mut a = form.matrix() * h;
    let norm = a.norm();
    if norm > 2.0 {
        a *= 2.0 / norm;
    }
    a.exp()
}

/// Random orthosymplectic matrix under a single-block form, sampled by
/// orthonormalizing a paired-representation Gaussian draw. Deterministic
/// for a fixed seed; always passes `orthosymplectic_blocks`.
pub fn random_orthosymplectic(form: &SymplecticForm, seed: u64) -> Result<DMatrix<f64>> {
    if !form.is_single_block() {
        return Err(Error::FormMismatch(format!(
            "orthosymplectic sampling needs a single-block form, got {form}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(paired::random_unitary(form.modes(), &mut rng).to_real())
}

/// A Gaussian unitary recorded as its displacement `u` and symplectic
/// matrix `l` (global phases carry no covariance-level signal and are not
/// tracked).
#[derive(Debug, Clone)]
pub struct GaussianUnitary {
    u: DVector<f64>,
    l: DMatrix<f64>,
    form: SymplecticForm,
}

impl GaussianUnitary {
    pub fn new(
        u: DVector<f64>,
        l: DMatrix<f64>,
        form: SymplecticForm,
        cfg: &ToleranceConfig,
    ) -> Result<Self> {
        if u.len() != form.dim() {
            return Err(Error::DimensionMismatch(format!(
                "displacement has length {}, form {form} needs {}",
                u.len(),
                form.dim()
            )));
        }
        let residual = symplectic_residual(&l, &form)?;
        if residual > cfg.residual_tol * (1.0 + l.norm_squared()) {
            return Err(Error::NotSymplectic { residual });
        }
        Ok(Self { u, l, form })
    }

    pub fn identity(form: SymplecticForm) -> Self {
        let n = form.dim();
        Self {
            u: DVector::zeros(n),
            l: DMatrix::identity(n, n),
            form,
        }
    }

    pub fn displacement(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn form(&self) -> &SymplecticForm {
        &self.form
    }

    /// Composition `(u_1 + L_1 u_2, L_1 L_2)`, the product of the two
    /// unitaries modulo global phase.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.form != other.form {
            return Err(Error::FormMismatch(format!(
                "{} vs {}",
                self.form, other.form
            )));
        }
        Ok(Self {
            u: &self.u + &self.l * &other.u,
            l: &self.l * &other.l,
            form: self.form.clone(),
        })
    }

    /// Inverse `(-L^{-1} u, L^{-1})`.
    pub fn inverse(&self) -> Self {
        let l_inv = jt_conj(&self.l.transpose(), &self.form);
        Self {
            u: -(&l_inv * &self.u),
            l: l_inv,
            form: self.form.clone(),
        }
    }
}
