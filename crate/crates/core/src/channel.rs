//! The (X, Y, w) channel calculus: existence certification, state
//! evolution, the dual Weyl action, composition, membership tests for the
//! two noise sets, the swap counterexample separating them, and the
//! environment-mode upper bound.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::{
    pinv_rank, psd_min_eig, spectral_norm, symmetric_eigenvalues, symmetrize, HermitianPair,
    ToleranceConfig,
};
use crate::states::{is_admissible_cov, GaussianState};
use crate::symplectic::SymplecticForm;

/// Parameters of a (would-be) Gaussian channel acting as `m -> X^T m + w`,
/// `S -> X^T S X + Y` on a single-block system.
///
/// Construction only enforces structure (dimensions, symmetry of `Y`);
/// whether the triple defines an actual channel is decided by [`validity`].
///
/// [`validity`]: ChannelParams::validity
#[derive(Debug, Clone)]
pub struct ChannelParams {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    w: DVector<f64>,
    form: SymplecticForm,
}

/// Certificate values for channel existence: the minimum eigenvalues of
/// `Y -+ i(J - X^T J X)` (equal up to tolerance, being transposes of each
/// other), the minimum eigenvalue of `Y`, and the verdict.
///
/// `valid` holds iff `min_eig_minus >= -eig_tol * scale` with
/// `scale = 1 + ||Y||_2 + ||X||_2^2`.
#[derive(Debug, Clone, Copy)]
pub struct ValidityReport {
    pub min_eig_minus: f64,
    pub min_eig_plus: f64,
    pub y_min_eig: f64,
    pub scale: f64,
    pub valid: bool,
}

/// Monte-Carlo verdict for membership of `Y` in the state-quantified noise
/// set. `NotFalsified` is evidence, not a proof.
#[derive(Debug, Clone)]
pub enum SampleVerdict {
    Falsified {
        witness: DMatrix<f64>,
        sample_index: usize,
    },
    NotFalsified,
}

impl SampleVerdict {
    pub fn is_falsified(&self) -> bool {
        matches!(self, SampleVerdict::Falsified { .. })
    }
}

impl ChannelParams {
    pub fn new(
        x: DMatrix<f64>,
        y: DMatrix<f64>,
        w: DVector<f64>,
        form: SymplecticForm,
        cfg: &ToleranceConfig,
    ) -> Result<Self> {
        if !form.is_single_block() {
            return Err(Error::FormMismatch(format!(
                "channel parameters are defined on a single block, got {form}"
            )));
        }
        let n = form.dim();
        if x.nrows() != n || x.ncols() != n || y.nrows() != n || y.ncols() != n || w.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "X is {}x{}, Y is {}x{}, w has length {}, form {form} needs {n}",
                x.nrows(),
                x.ncols(),
                y.nrows(),
                y.ncols(),
                w.len()
            )));
        }
        let y = symmetrize(&y, cfg)?;
        Ok(Self { x, y, w, form })
    }

    /// The identity channel `(I, 0, 0)`.
    pub fn identity(form: SymplecticForm) -> Self {
        let n = form.dim();
        Self {
            x: DMatrix::identity(n, n),
            y: DMatrix::zeros(n, n),
            w: DVector::zeros(n),
            form,
        }
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn w(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn form(&self) -> &SymplecticForm {
        &self.form
    }

    /// `K = J - X^T J X`, the pairing defect of `X`.
    pub fn pairing_defect(&self) -> DMatrix<f64> {
        let j = self.form.matrix();
        &j - self.x.transpose() * &j * &self.x
    }

    /// Evaluate the existence certificate `Y - i(J - X^T J X) >= 0`
    /// together with its transpose partner.
    pub fn validity(&self, cfg: &ToleranceConfig) -> ValidityReport {
        let k = self.pairing_defect();
        let y_eigs = symmetric_eigenvalues(&self.y);
        let y_min_eig = y_eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        let y_norm = y_eigs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let x_norm = spectral_norm(&self.x);
        let scale = 1.0 + y_norm + x_norm * x_norm;
        let minus = HermitianPair::new(self.y.clone(), -&k, cfg)
            .map(|h| psd_min_eig(&h, cfg))
            .unwrap_or(f64::NEG_INFINITY);
        let plus = HermitianPair::new(self.y.clone(), k, cfg)
            .map(|h| psd_min_eig(&h, cfg))
            .unwrap_or(f64::NEG_INFINITY);
        ValidityReport {
            min_eig_minus: minus,
            min_eig_plus: plus,
            y_min_eig,
            scale,
            valid: minus >= -cfg.eig_tol * scale,
        }
    }

    /// Evolve a state through the channel: `(X^T m + w, X^T S X + Y)`.
    pub fn apply(&self, st: &GaussianState, cfg: &ToleranceConfig) -> Result<GaussianState> {
        if st.form() != &self.form {
            return Err(Error::FormMismatch(format!(
                "channel form {} vs state form {}",
                self.form,
                st.form()
            )));
        }
        let report = self.validity(cfg);
        if !report.valid {
            return Err(Error::InvalidChannel {
                min_eig: report.min_eig_minus,
            });
        }
        let (mean, cov) = self.apply_raw(st.mean(), st.cov());
        GaussianState::new(mean, cov, self.form.clone(), cfg)
    }

    /// The affine action on (mean, covariance) with no validity or
    /// admissibility gate. Deviation measurements on candidate dilations
    /// need this even when the candidate fails certification.
    pub(crate) fn apply_raw(
        &self,
        mean: &DVector<f64>,
        cov: &DMatrix<f64>,
    ) -> (DVector<f64>, DMatrix<f64>) {
        let m = self.x.transpose() * mean + &self.w;
        let s = self.x.transpose() * cov * &self.x + &self.y;
        (m, s)
    }

    /// Dual action on Weyl operators: returns
    /// `(log-magnitude -z^T Y z / 2, phase -w^T z, argument X z)`.
    pub fn dual_weyl(&self, z: &DVector<f64>) -> Result<(f64, f64, DVector<f64>)> {
        if z.len() != self.form.dim() {
            return Err(Error::DimensionMismatch(format!(
                "argument has length {}, channel needs {}",
                z.len(),
                self.form.dim()
            )));
        }
        let log_coeff = -0.5 * z.dot(&(&self.y * z));
        let phase = -self.w.dot(z);
        Ok((log_coeff, phase, &self.x * z))
    }

    /// Composition: `self` applied first, `second` applied after. The
    /// result is `(X1 X2, X2^T Y1 X2 + Y2, X2^T w1 + w2)`.
    pub fn compose(&self, second: &Self) -> Result<Self> {
        if self.form != second.form {
            return Err(Error::FormMismatch(format!(
                "{} vs {}",
                self.form, second.form
            )));
        }
        Ok(Self {
            x: &self.x * &second.x,
            y: crate::numerics::symmetrize_unchecked(
                &(second.x.transpose() * &self.y * &second.x + &second.y),
            ),
            w: second.x.transpose() * &self.w + &second.w,
            form: self.form.clone(),
        })
    }

    /// Upper bound on the number of environment modes needed to dilate the
    /// channel, from Moore-Penrose rank arithmetic:
    /// `rank(Y) - rank(Y - K Y^+ K^T)` with `K` the pairing defect.
    ///
    /// This is an upper bound only; the attenuator evaluates to 2 although
    /// one physical mode suffices.
    pub fn env_mode_bound(&self, cfg: &ToleranceConfig) -> Result<usize> {
        let report = self.validity(cfg);
        if !report.valid {
            return Err(Error::InvalidChannel {
                min_eig: report.min_eig_minus,
            });
        }
        let k = self.pairing_defect();
        let (y_pinv, _) = pinv_rank(&self.y, cfg);
        let residual = &self.y - &k * y_pinv * k.transpose();
        // Both ranks are taken against the channel's own scale: the
        // residual is an exact cancellation for boundary channels and a
        // rank relative to its noise-level sigma_max would be arbitrary.
        let floor = spectral_norm(&self.y) + spectral_norm(&k);
        let y_rank = crate::numerics::rank_with_scale(&self.y, floor, cfg);
        let res_rank = crate::numerics::rank_with_scale(&residual, floor, cfg);
        Ok(y_rank.saturating_sub(res_rank))
    }
}

/// Membership of `Y` in the certificate noise set of `X`:
/// `Y + i(J - X^T J X) >= 0`. Agrees with `validity` by the transpose
/// equivalence.
pub fn fd0_member(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    form: &SymplecticForm,
    cfg: &ToleranceConfig,
) -> Result<bool> {
    let ch = ChannelParams::new(
        x.clone(),
        y.clone(),
        DVector::zeros(form.dim()),
        form.clone(),
        cfg,
    )?;
    let report = ch.validity(cfg);
    Ok(report.min_eig_plus >= -cfg.eig_tol * report.scale)
}

/// Sufficient condition for membership in the state-quantified noise set:
/// if `Y` is itself an admissible covariance then `X^T S X + Y` is
/// admissible for every admissible `S` and every `X`.
pub fn fd_sufficient(
    y: &DMatrix<f64>,
    form: &SymplecticForm,
    cfg: &ToleranceConfig,
) -> Result<bool> {
    Ok(is_admissible_cov(y, form, cfg)?.0)
}

/// Deterministic per-sample seed derivation (splitmix64 over the root
/// seed and the sample index), so verdict and witness do not depend on how
/// samples are sharded.
pub(crate) fn shard_seed(root: u64, index: usize) -> u64 {
    let mut z = root ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Monte-Carlo falsification of `Y`'s membership in the state-quantified
/// noise set: draws `n_samples` random admissible covariances `S` and
/// reports the first (by index) `S` with `X^T S X + Y` inadmissible.
/// `NotFalsified` is not a proof of membership.
pub fn fd_member_sample(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    form: &SymplecticForm,
    n_samples: usize,
    seed: u64,
    cfg: &ToleranceConfig,
) -> Result<SampleVerdict> {
    let y = symmetrize(y, cfg)?;
    let y_eigs = symmetric_eigenvalues(&y);
    let y_min = y_eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    if y_min < -cfg.eig_tol * (1.0 + y.norm()) {
        return Err(Error::NotPsd { min_eig: y_min });
    }
    for i in 0..n_samples {
        let st = GaussianState::random(form, shard_seed(seed, i), cfg);
        let moved = x.transpose() * st.cov() * x + &y;
        let (ok, _) = is_admissible_cov(&moved, form, cfg)?;
        if !ok {
            return Ok(SampleVerdict::Falsified {
                witness: st.cov().clone(),
                sample_index: i,
            });
        }
    }
    Ok(SampleVerdict::NotFalsified)
}

/// Live report accompanying the swap counterexample.
#[derive(Debug, Clone)]
pub struct CounterexampleReport {
    pub validity: ValidityReport,
    pub fd_sufficient: bool,
    pub fd0_member: bool,
}

/// The swap-noise pair `X = [[0, I], [I, 0]]`, `Y = I`: the noise is an
/// admissible covariance (so every `X^T S X + Y` stays admissible), yet
/// the existence certificate fails with minimum eigenvalue -1. It
/// separates the state-quantified noise set from the certificate set.
pub fn counterexample_channel(
    d: usize,
    cfg: &ToleranceConfig,
) -> Result<(ChannelParams, CounterexampleReport)> {
    let form = SymplecticForm::single(d)?;
    let n = form.dim();
    let mut x = DMatrix::<f64>::zeros(n, n);
    for k in 0..d {
        x[(k, d + k)] = 1.0;
        x[(d + k, k)] = 1.0;
    }
    let ch = ChannelParams::new(x, DMatrix::identity(n, n), DVector::zeros(n), form, cfg)?;
    let report = CounterexampleReport {
        validity: ch.validity(cfg),
        fd_sufficient: fd_sufficient(&ch.y, &ch.form, cfg)?,
        fd0_member: fd0_member(&ch.x, &ch.y, &ch.form, cfg)?,
    };
    Ok((ch, report))
}

/// Covariance-level transpose map `X = diag(I, -I)`, `Y = 0`. It sends
/// admissible covariances to admissible covariances but is not a channel:
/// the certificate fails with minimum eigenvalue -2.
pub fn transpose_map(d: usize, cfg: &ToleranceConfig) -> Result<ChannelParams> {
    let form = SymplecticForm::single(d)?;
    let n = form.dim();
    let mut x = DMatrix::<f64>::identity(n, n);
    for k in 0..d {
        x[(d + k, d + k)] = -1.0;
    }
    ChannelParams::new(x, DMatrix::zeros(n, n), DVector::zeros(n), form, cfg)
}
