//! Gaussian states as (mean, covariance) pairs: admissibility certification,
//! characteristic-function evaluation, and the action of Gaussian unitaries.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::{psd_min_eig, symmetrize, HermitianPair, ToleranceConfig};
use crate::symplectic::{jt_conj, random_symplectic, GaussianUnitary, SymplecticForm};

/// A Gaussian state: phase-space mean `m` and covariance `S` with
/// `S + iJ >= 0`. Admissibility is enforced at construction (with
/// `eig_tol` slack) and never silently projected.
#[derive(Debug, Clone)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    form: SymplecticForm,
}

impl GaussianState {
    pub fn new(
        mean: DVector<f64>,
        cov: DMatrix<f64>,
        form: SymplecticForm,
        cfg: &ToleranceConfig,
    ) -> Result<Self> {
        let n = form.dim();
        if mean.len() != n || cov.nrows() != n || cov.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "mean has length {}, cov is {}x{}, form {form} needs dimension {n}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        let (ok, min_eig) = is_admissible_cov(&cov, &form, cfg)?;
        if !ok {
            return Err(Error::NotAdmissible { min_eig });
        }
        let cov = symmetrize(&cov, cfg)?;
        Ok(Self { mean, cov, form })
    }

    /// Vacuum state `(0, I)`.
    pub fn vacuum(form: SymplecticForm) -> Self {
        let n = form.dim();
        Self {
            mean: DVector::zeros(n),
            cov: DMatrix::identity(n, n),
            form,
        }
    }

    /// Thermal state `(0, diag(nu_1..nu_d, nu_1..nu_d))` per block; each
    /// occupation must satisfy `nu >= 1`.
    pub fn thermal(form: SymplecticForm, nus: &[f64]) -> Result<Self> {
        if nus.len() != form.modes() {
            return Err(Error::DimensionMismatch(format!(
                "{} occupations for {} modes",
                nus.len(),
                form.modes()
            )));
        }
        if let Some(&nu) = nus.iter().find(|&&nu| nu < 1.0 || nu.is_nan()) {
            return Err(Error::InvalidTemperature { nu });
        }
        let n = form.dim();
        let mut cov = DMatrix::<f64>::zeros(n, n);
        let mut off = 0;
        let mut mode = 0;
        for &d in form.blocks() {
            for k in 0..d {
                cov[(off + k, off + k)] = nus[mode];
                cov[(off + d + k, off + d + k)] = nus[mode];
                mode += 1;
            }
            off += 2 * d;
        }
        Ok(Self {
            mean: DVector::zeros(n),
            cov,
            form,
        })
    }

    /// Random admissible state: mean standard normal, covariance
    /// `L^T N L` with `L` a seeded random symplectic and `N` thermal with
    /// `nu = 1 + Exp(1)` occupations. Deterministic for a fixed seed.
    pub fn random(form: &SymplecticForm, seed: u64, cfg: &ToleranceConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = form.dim();
        let mean = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let nus: Vec<f64> = (0..form.modes())
            .map(|_| 1.0 + rng.sample::<f64, _>(Exp1))
            .collect();
        let l_seed: u64 = rng.random();
        let l = random_symplectic(form, l_seed);
        let thermal = Self::thermal(form.clone(), &nus).expect("nu >= 1 by construction");
        let cov = l.transpose() * thermal.cov * &l;
        Self::new(mean, cov, form.clone(), cfg).expect("conjugated thermal state is admissible")
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn form(&self) -> &SymplecticForm {
        &self.form
    }

    /// Characteristic function `exp(-i m^T z - z^T S z / 2)` as an
    /// `(re, im)` pair.
    pub fn char_fn(&self, z: &DVector<f64>) -> Result<(f64, f64)> {
        if z.len() != self.form.dim() {
            return Err(Error::DimensionMismatch(format!(
                "argument has length {}, state needs {}",
                z.len(),
                self.form.dim()
            )));
        }
        let quad = 0.5 * z.dot(&(&self.cov * z));
        let phase = -self.mean.dot(z);
        let modulus = (-quad).exp();
        Ok((modulus * phase.cos(), modulus * phase.sin()))
    }
}

/// Membership of a symmetric matrix in the admissible covariance set:
/// returns `(min_eig >= -eig_tol * (1 + ||s||_F), min_eig)` where
/// `min_eig` is the smallest eigenvalue of `S + iJ`.
pub fn is_admissible_cov(
    s: &DMatrix<f64>,
    form: &SymplecticForm,
    cfg: &ToleranceConfig,
) -> Result<(bool, f64)> {
    let n = form.dim();
    if s.nrows() != n || s.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {}x{}, form {form} needs {n}x{n}",
            s.nrows(),
            s.ncols()
        )));
    }
    let s = symmetrize(s, cfg)?;
    let scale = 1.0 + s.norm();
    let pair = HermitianPair::new(s, form.matrix(), cfg)?;
    let min_eig = psd_min_eig(&pair, cfg);
    Ok((min_eig >= -cfg.eig_tol * scale, min_eig))
}

/// Action of a Gaussian unitary on a state:
/// mean `(L^{-1})^T m + 2 J u`, covariance `(L^{-1})^T S L^{-1}`.
pub fn gu_action(
    g: &GaussianUnitary,
    st: &GaussianState,
    cfg: &ToleranceConfig,
) -> Result<GaussianState> {
    if g.form() != st.form() {
        return Err(Error::FormMismatch(format!(
            "unitary form {} vs state form {}",
            g.form(),
            st.form()
        )));
    }
    let form = st.form().clone();
    let l_inv = jt_conj(&g.matrix().transpose(), &form);
    let mut mean = l_inv.transpose() * st.mean();
    mean += 2.0 * form.matrix() * g.displacement();
    let cov = l_inv.transpose() * st.cov() * &l_inv;
    GaussianState::new(mean, cov, form, cfg)
}
