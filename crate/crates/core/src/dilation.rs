//! Synthesis of symplectic Stinespring dilations: from valid `(X, Y, w)`,
//! build the environment coupling `L21` with `L21^T L21 = Y` and
//! `L21^T J_env L21 = J - X^T J X`, complete `[X; L21]` to a
//! `(J_{2d} (+) J_{4d})`-symplectic matrix, attach the Weyl displacement,
//! and verify the round trip against the channel action.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::{shard_seed, ChannelParams};
use crate::error::{Error, Result};
use crate::numerics::{
    skew_canonical, symmetric_eigen_sorted, symmetrize_unchecked, ToleranceConfig,
};
use crate::states::GaussianState;
use crate::symplectic::{
    contraction_embedding, form_permutation_indices, random_symplectic, symplectic_extend,
    symplectic_residual, SymplecticForm,
};

/// A symplectic Stinespring dilation of a channel on `d_in` modes with
/// `d_env` environment modes: a `(J_in (+) J_env)`-symplectic matrix `g`
/// whose inverse is the Bogoliubov argument of the physical unitary
/// `W(u) Gamma(g^{-1})`, plus the Weyl displacement `u` (environment part
/// zero for built dilations).
///
/// For outputs of [`build_dilation`] the top-left block of `g` equals the
/// source channel's `X` bitwise and the coupling block reproduces `Y`
/// within the documented bound.
#[derive(Debug, Clone)]
pub struct DilationSpec {
    g: DMatrix<f64>,
    u: DVector<f64>,
    d_in: usize,
    d_env: usize,
}

impl DilationSpec {
    /// Validating constructor: checks dimensions and the symplectic
    /// residual of `g` under the `[d_in, d_env]` form.
    pub fn new(
        g: DMatrix<f64>,
        u: DVector<f64>,
        d_in: usize,
        d_env: usize,
        cfg: &ToleranceConfig,
    ) -> Result<Self> {
        let spec = Self::from_parts_unchecked(g, u, d_in, d_env)?;
        let residual = symplectic_residual(&spec.g, &spec.form())?;
        if residual > cfg.residual_tol * (1.0 + spec.g.norm_squared()) {
            return Err(Error::NotSymplectic { residual });
        }
        Ok(spec)
    }

    /// Dimension checks only. Deviation measurement on candidate dilations
    /// (e.g. loaded from disk) must be possible even when `g` fails the
    /// symplectic certificate.
    pub fn from_parts_unchecked(
        g: DMatrix<f64>,
        u: DVector<f64>,
        d_in: usize,
        d_env: usize,
    ) -> Result<Self> {
        if d_in == 0 || d_env == 0 {
            return Err(Error::InvalidForm(
                "dilation needs at least one system and one environment mode".into(),
            ));
        }
        let n = 2 * (d_in + d_env);
        if g.nrows() != n || g.ncols() != n || u.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "g is {}x{}, u has length {}, expected dimension {n}",
                g.nrows(),
                g.ncols(),
                u.len()
            )));
        }
        Ok(Self { g, u, d_in, d_env })
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn u(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_env(&self) -> usize {
        self.d_env
    }

    /// The two-block form `[d_in, d_env]` that `g` is symplectic under.
    pub fn form(&self) -> SymplecticForm {
        SymplecticForm::new(vec![self.d_in, self.d_env]).expect("nonzero blocks")
    }

    pub fn system_form(&self) -> SymplecticForm {
        SymplecticForm::single(self.d_in).expect("nonzero block")
    }

    /// Top-left `2 d_in` square block (the induced channel's `X`).
    pub fn system_block(&self) -> DMatrix<f64> {
        let n = 2 * self.d_in;
        self.g.view((0, 0), (n, n)).into_owned()
    }

    /// Lower-left environment coupling block.
    pub fn coupling(&self) -> DMatrix<f64> {
        let n = 2 * self.d_in;
        self.g.view((n, 0), (2 * self.d_env, n)).into_owned()
    }

    /// The channel realized by tracing out the environment:
    /// `X = g_11`, `Y = g_21^T g_21`, `w = 2 J u_sys`.
    pub fn induced_channel(&self, cfg: &ToleranceConfig) -> Result<ChannelParams> {
        let form = self.system_form();
        let n = form.dim();
        let x = self.system_block();
        let g21 = self.coupling();
        let y = symmetrize_unchecked(&(g21.transpose() * &g21));
        let u_sys = self.u.rows(0, n).into_owned();
        let w = 2.0 * form.matrix() * u_sys;
        ChannelParams::new(x, y, w, form, cfg)
    }
}

/// Random dilation on `d_in` system and `2 d_in` environment modes:
/// a seeded random `(J (+) J)`-symplectic matrix with a random system
/// displacement. Its induced channel is the independent generator of
/// valid channels used throughout the test suites.
pub fn random_dilation(d_in: usize, seed: u64, cfg: &ToleranceConfig) -> Result<DilationSpec> {
    let form = SymplecticForm::new(vec![d_in, 2 * d_in])?;
    let g = random_symplectic(&form, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6f9c_21d3_44aa_01e7);
    let mut u = DVector::zeros(form.dim());
    for i in 0..2 * d_in {
        u[i] = rng.sample::<f64, _>(StandardNormal);
    }
    DilationSpec::new(g, u, d_in, 2 * d_in, cfg)
}

/// Independent oracle for valid channels: the channel induced by a random
/// dilation.
pub fn random_valid_channel(d: usize, seed: u64, cfg: &ToleranceConfig) -> Result<ChannelParams> {
    random_dilation(d, seed, cfg)?.induced_channel(cfg)
}

/// Valid channel whose noise matrix is rank deficient: an oracle channel
/// on `d - 1` modes direct-summed with the identity channel on one mode,
/// so `Y` vanishes on one symplectic pair. Requires `d >= 2`.
pub fn rank_deficient_channel(d: usize, seed: u64, cfg: &ToleranceConfig) -> Result<ChannelParams> {
    if d < 2 {
        return Err(Error::InvalidForm(
            "rank-deficient fixture needs at least two modes".into(),
        ));
    }
    let inner = random_valid_channel(d - 1, seed, cfg)?;
    let split = SymplecticForm::new(vec![d - 1, 1])?;
    let single = SymplecticForm::single(d)?;
    let n = single.dim();
    let ni = 2 * (d - 1);
    let mut x_mb = DMatrix::<f64>::identity(n, n);
    x_mb.view_mut((0, 0), (ni, ni)).copy_from(inner.x());
    let mut y_mb = DMatrix::<f64>::zeros(n, n);
    y_mb.view_mut((0, 0), (ni, ni)).copy_from(inner.y());
    let mut w_mb = DVector::<f64>::zeros(n);
    w_mb.rows_mut(0, ni).copy_from(inner.w());

    // carry the multi-block data into the single-block layout
    let map = form_permutation_indices(&single, &split)?;
    let mut x = DMatrix::<f64>::zeros(n, n);
    let mut y = DMatrix::<f64>::zeros(n, n);
    let mut w = DVector::<f64>::zeros(n);
    for a in 0..n {
        w[map[a]] = w_mb[a];
        for b in 0..n {
            x[(map[a], map[b])] = x_mb[(a, b)];
            y[(map[a], map[b])] = y_mb[(a, b)];
        }
    }
    ChannelParams::new(x, y, w, single, cfg)
}

/// The environment coupling factor `L21` (size `4d x 2d`) with
/// `L21^T L21 = Y` and `L21^T J_{4d} L21 = J - X^T J X`, both within
/// `residual_tol` for invertible `Y` and within an
/// `O(sqrt(reg_eps))`-degraded bound for singular `Y` (which is shifted
/// by `reg_eps * (1 + ||Y||_2)` before factoring).
pub fn coupling_block(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    form: &SymplecticForm,
    cfg: &ToleranceConfig,
) -> Result<DMatrix<f64>> {
    let ch = ChannelParams::new(
        x.clone(),
        y.clone(),
        DVector::zeros(form.dim()),
        form.clone(),
        cfg,
    )?;
    let report = ch.validity(cfg);
    if !report.valid {
        return Err(Error::InvalidChannel {
            min_eig: report.min_eig_minus,
        });
    }
    let n = form.dim();
    let d = form.modes();
    let k = ch.pairing_defect();

    let (vals, vecs) = symmetric_eigen_sorted(ch.y());
    let y_norm = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rank = vals.iter().filter(|&&v| v > cfg.eig_tol * y_norm).count();
    if rank == 0 {
        // Y ~ 0 forces K ~ 0 for valid channels; nothing couples.
        return Ok(DMatrix::zeros(2 * n, n));
    }
    let regularized = rank < n;
    let eps = if regularized {
        cfg.reg_eps * (1.0 + y_norm)
    } else {
        0.0
    };
    let mut root = DMatrix::<f64>::zeros(n, n);
    let mut inv_root = DMatrix::<f64>::zeros(n, n);
    for (j, &v) in vals.iter().enumerate() {
        let lam = v.max(0.0) + eps;
        let s = lam.sqrt();
        let col = vecs.column(j).into_owned();
        let outer = &col * col.transpose();
        root += s * &outer;
        inv_root += (1.0 / s) * outer;
    }

    // exactly skew in exact arithmetic; antisymmetrize the roundoff away
    let raw = &inv_root * &k * &inv_root;
    let ktilde = (&raw - raw.transpose()) * 0.5;
    let canon = skew_canonical(&ktilde, cfg)?;

    // The certificate makes the canonical values contractions; the
    // regularized path is allowed the wider O(sqrt(reg_eps)) excess that
    // forming Y_eps^{-1/2} K Y_eps^{-1/2} can introduce.
    let slack = if regularized {
        cfg.reg_eps.sqrt() * (1.0 + k.norm())
    } else {
        cfg.eig_tol * (1.0 + k.norm())
    };
    let mut dvals = canon.d_vals.clone();
    for v in &mut dvals {
        if *v > 1.0 + slack {
            return Err(Error::NotContraction { eig: *v });
        }
        *v = v.min(1.0);
    }
    let dmat = DMatrix::from_fn(d, d, |i, j| if i == j { dvals[i] } else { 0.0 });
    let q = contraction_embedding(&dmat, cfg)?;
    Ok(q.transpose() * canon.r.transpose() * root)
}

/// Build a full Stinespring dilation of a valid channel with `2 d`
/// environment modes: couple through [`coupling_block`], lift the columns
/// of `[X; L21]` into the single-block convention, complete them to a
/// symplectic basis, conjugate back, and attach `u = J^T w / 2 (+) 0`.
pub fn build_dilation(ch: &ChannelParams, cfg: &ToleranceConfig) -> Result<DilationSpec> {
    let report = ch.validity(cfg);
    if !report.valid {
        return Err(Error::InvalidChannel {
            min_eig: report.min_eig_minus,
        });
    }
    let d = ch.form().modes();
    let n = 2 * d;
    let l21 = coupling_block(ch.x(), ch.y(), ch.form(), cfg)?;

    let two_block = SymplecticForm::new(vec![d, 2 * d])?;
    let single = SymplecticForm::single(3 * d)?;
    let dim = single.dim();
    let map = form_permutation_indices(&single, &two_block)?;
    let lift = |sys: nalgebra::DVectorView<f64>, env: nalgebra::DVectorView<f64>| {
        let mut stacked = DVector::<f64>::zeros(dim);
        stacked.rows_mut(0, n).copy_from(&sys);
        stacked.rows_mut(n, 2 * n).copy_from(&env);
        let mut out = DVector::<f64>::zeros(dim);
        for a in 0..dim {
            out[map[a]] = stacked[a];
        }
        out
    };
    let mut us = Vec::with_capacity(d);
    let mut vs = Vec::with_capacity(d);
    for i in 0..d {
        us.push(lift(ch.x().column(i), l21.column(i)));
        vs.push(lift(ch.x().column(d + i), l21.column(d + i)));
    }
    let m = symplectic_extend(&us, &vs, &single, cfg)?;
    let g = DMatrix::from_fn(dim, dim, |a, b| m[(map[a], map[b])]);

    let mut u = DVector::<f64>::zeros(dim);
    u.rows_mut(0, n)
        .copy_from(&(0.5 * ch.form().matrix().transpose() * ch.w()));
    DilationSpec::new(g, u, d, 2 * d, cfg)
}

/// Compare a dilation against a channel on random states: the maximum
/// entrywise deviation between the channel action and the induced-channel
/// action over `n_states` seeded random states. The affine actions are
/// compared directly, so deviations of deliberately broken dilations are
/// measurable.
pub fn verify_dilation(
    dil: &DilationSpec,
    ch: &ChannelParams,
    n_states: usize,
    seed: u64,
    cfg: &ToleranceConfig,
) -> Result<f64> {
    if dil.d_in() != ch.form().modes() {
        return Err(Error::FormMismatch(format!(
            "dilation acts on {} system modes, channel on {}",
            dil.d_in(),
            ch.form().modes()
        )));
    }
    let induced = dil.induced_channel(cfg)?;
    let mut max_dev = 0.0f64;
    for i in 0..n_states {
        let st = GaussianState::random(ch.form(), shard_seed(seed, i), cfg);
        let (m_ch, s_ch) = ch.apply_raw(st.mean(), st.cov());
        let (m_dil, s_dil) = induced.apply_raw(st.mean(), st.cov());
        let dev = (&m_ch - m_dil).amax().max((&s_ch - s_dil).amax());
        max_dev = max_dev.max(dev);
    }
    Ok(max_dev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::counterexample_channel;
    use crate::numerics::{pinv_rank, sqrt_psd};
    use approx::assert_relative_eq;

    fn cfg() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn attenuator_params(d: usize, theta: f64) -> ChannelParams {
        let form = SymplecticForm::single(d).unwrap();
        let n = form.dim();
        ChannelParams::new(
            DMatrix::<f64>::identity(n, n) * theta.cos(),
            DMatrix::<f64>::identity(n, n) * theta.sin().powi(2),
            DVector::zeros(n),
            form,
            &cfg(),
        )
        .unwrap()
    }

    fn coupling_residuals(ch: &ChannelParams, l21: &DMatrix<f64>) -> (f64, f64) {
        let k = ch.pairing_defect();
        let env = SymplecticForm::single(2 * ch.form().modes()).unwrap();
        let res_y = (l21.transpose() * l21 - ch.y()).norm();
        let res_k = (l21.transpose() * env.matrix() * l21 - k).norm();
        (res_y, res_k)
    }

    #[test]
    fn coupling_block_of_reversible_channel_is_zero() {
        let c = cfg();
        let form = SymplecticForm::single(2).unwrap();
        let l = random_symplectic(&form, 3);
        let l21 = coupling_block(&l, &DMatrix::zeros(4, 4), &form, &c).unwrap();
        assert_eq!(l21, DMatrix::zeros(8, 4));
    }

    #[test]
    fn coupling_block_attenuator_case() {
        // K = sin^2(t) J, Y = sin^2(t) I: the whitened defect is exactly J
        // with unit canonical values.
        let c = cfg();
        let ch = attenuator_params(1, 0.9);
        let l21 = coupling_block(ch.x(), ch.y(), ch.form(), &c).unwrap();
        let (res_y, res_k) = coupling_residuals(&ch, &l21);
        assert!(res_y <= c.residual_tol, "{res_y}");
        assert!(res_k <= c.residual_tol, "{res_k}");
    }

    #[test]
    fn coupling_block_rejects_invalid_channel() {
        let c = cfg();
        let (ch, _) = counterexample_channel(1, &c).unwrap();
        assert!(matches!(
            coupling_block(ch.x(), ch.y(), ch.form(), &c),
            Err(Error::InvalidChannel { .. })
        ));
    }

    #[test]
    fn coupling_block_reconstruction_on_oracle_channels() {
        let c = cfg();
        for seed in 0..60 {
            let d = 1 + seed as usize % 3;
            let ch = random_valid_channel(d, 100 + seed, &c).unwrap();
            let l21 = coupling_block(ch.x(), ch.y(), ch.form(), &c).unwrap();
            let (res_y, res_k) = coupling_residuals(&ch, &l21);
            let scale = 1.0 + ch.y().norm();
            assert!(
                res_y <= c.residual_tol * scale,
                "seed {seed}: Y residual {res_y}"
            );
            assert!(
                res_k <= c.residual_tol * scale,
                "seed {seed}: K residual {res_k}"
            );
        }
    }

    #[test]
    fn whitened_defect_is_a_contraction_on_oracle_channels() {
        let c = cfg();
        for seed in 0..40 {
            let d = 1 + seed as usize % 2;
            let ch = random_valid_channel(d, 700 + seed, &c).unwrap();
            let root = sqrt_psd(ch.y(), &c).unwrap();
            let (inv_root, _) = pinv_rank(&root, &c);
            let ktilde = &inv_root * ch.pairing_defect() * &inv_root;
            let ktilde = (&ktilde - ktilde.transpose()) * 0.5;
            let canon = crate::numerics::skew_canonical(&ktilde, &c).unwrap();
            let dmax = canon.d_vals.iter().cloned().fold(0.0f64, f64::max);
            assert!(dmax <= 1.0 + c.eig_tol * 10.0, "seed {seed}: {dmax}");
        }
    }

    #[test]
    fn build_dilation_identity_channel() {
        let c = cfg();
        let form = SymplecticForm::single(1).unwrap();
        let ch = ChannelParams::identity(form);
        let dil = build_dilation(&ch, &c).unwrap();
        assert_eq!(dil.system_block(), DMatrix::identity(2, 2));
        assert_eq!(dil.coupling(), DMatrix::zeros(4, 2));
        let induced = dil.induced_channel(&c).unwrap();
        assert_eq!(induced.x(), ch.x());
        assert_eq!(induced.y(), ch.y());
        assert_eq!(induced.w(), ch.w());
        assert_relative_eq!(
            verify_dilation(&dil, &ch, 5, 1, &c).unwrap(),
            0.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn build_dilation_attenuator() {
        let c = cfg();
        let ch = attenuator_params(1, 0.5);
        let dil = build_dilation(&ch, &c).unwrap();
        assert_eq!(dil.d_env(), 2);
        assert_eq!(dil.system_block(), ch.x().clone());
        let residual = symplectic_residual(dil.g(), &dil.form()).unwrap();
        assert!(residual <= c.residual_tol, "{residual}");
        let dev = verify_dilation(&dil, &ch, 20, 2, &c).unwrap();
        assert!(dev <= 1e-8, "{dev}");
    }

    #[test]
    fn build_dilation_rejects_invalid_channel() {
        let c = cfg();
        let (ch, _) = counterexample_channel(2, &c).unwrap();
        assert!(matches!(
            build_dilation(&ch, &c),
            Err(Error::InvalidChannel { .. })
        ));
    }

    #[test]
    fn round_trip_on_oracle_channels() {
        let c = cfg();
        for seed in 0..30 {
            let d = 1 + seed as usize % 3;
            let ch = random_valid_channel(d, 4000 + seed, &c).unwrap();
            let dil = build_dilation(&ch, &c).unwrap();
            // top-left block is X bitwise
            assert_eq!(dil.system_block(), ch.x().clone(), "seed {seed}");
            let induced = dil.induced_channel(&c).unwrap();
            let dev = (induced.x() - ch.x())
                .amax()
                .max((induced.y() - ch.y()).amax())
                .max((induced.w() - ch.w()).amax());
            assert!(dev <= 1e-8, "seed {seed}: parameter deviation {dev}");
            let state_dev = verify_dilation(&dil, &ch, 10, 5000 + seed, &c).unwrap();
            assert!(
                state_dev <= 1e-8,
                "seed {seed}: state deviation {state_dev}"
            );
        }
    }

    #[test]
    fn oracle_channels_always_pass_validity() {
        // generator/oracle agreement: channels read off random symplectic
        // dilations certify as channels
        let c = cfg();
        for seed in 0..100 {
            let d = 1 + seed as usize % 3;
            let dil = random_dilation(d, 6000 + seed, &c).unwrap();
            let ch = dil.induced_channel(&c).unwrap();
            assert!(ch.validity(&c).valid, "seed {seed}");
        }
    }

    #[test]
    fn round_trip_with_zero_noise() {
        let c = cfg();
        for seed in 0..20 {
            let d = 1 + seed as usize % 3;
            let form = SymplecticForm::single(d).unwrap();
            let n = form.dim();
            let x = random_symplectic(&form, 7000 + seed);
            let ch =
                ChannelParams::new(x, DMatrix::zeros(n, n), DVector::zeros(n), form, &c).unwrap();
            let dil = build_dilation(&ch, &c).unwrap();
            let induced = dil.induced_channel(&c).unwrap();
            assert_eq!(induced.x(), ch.x(), "seed {seed}: X must survive bitwise");
            assert_eq!(
                induced.y(),
                ch.y(),
                "seed {seed}: Y = 0 must survive exactly"
            );
            let dev = verify_dilation(&dil, &ch, 10, 42, &c).unwrap();
            assert!(dev <= 1e-6, "seed {seed}: {dev}");
        }
    }

    #[test]
    fn round_trip_with_rank_deficient_noise() {
        let c = cfg();
        for seed in 0..20 {
            let d = 2 + seed as usize % 2;
            let ch = rank_deficient_channel(d, 8000 + seed, &c).unwrap();
            let (_, y_rank) = pinv_rank(ch.y(), &c);
            assert!(y_rank < ch.form().dim(), "fixture must be rank deficient");
            let dil = build_dilation(&ch, &c).unwrap();
            let induced = dil.induced_channel(&c).unwrap();
            let dev = (induced.x() - ch.x())
                .amax()
                .max((induced.y() - ch.y()).amax())
                .max((induced.w() - ch.w()).amax());
            assert!(dev <= 1e-6, "seed {seed}: parameter deviation {dev}");
        }
    }

    #[test]
    fn verify_dilation_flags_perturbed_dilations() {
        let c = cfg();
        let ch = random_valid_channel(1, 123, &c).unwrap();
        let dil = build_dilation(&ch, &c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = DMatrix::from_fn(6, 6, |_, _| 1e-3 * rng.sample::<f64, _>(StandardNormal));
        let broken =
            DilationSpec::from_parts_unchecked(dil.g() + noise, dil.u().clone(), 1, 2).unwrap();
        let dev = verify_dilation(&broken, &ch, 20, 9, &c).unwrap();
        assert!(dev > 1e-4, "detector must notice 1e-3 noise, got {dev}");
    }

    #[test]
    fn dilation_spec_validates_residual() {
        let c = cfg();
        let g = DMatrix::<f64>::identity(6, 6) * 1.5;
        assert!(matches!(
            DilationSpec::new(g, DVector::zeros(6), 1, 2, &c),
            Err(Error::NotSymplectic { .. })
        ));
    }
}
