//! Implementability by passive linear optics (multiport interferometers):
//! the trace condition `X^T X + Y = I`, the search for an orthogonal `Q`
//! making `X^T Q sqrt(Y)` symmetric, and the assembled orthosymplectic
//! dilation `[[X, B], [-B, X]]` with `B = Q sqrt(Y)`.
//!
//! The assembled matrix is symplectic for the monolithic form `J_{4d}`
//! whenever the symmetry condition holds, but a physical dilation must
//! also preserve the two-block form `J_{2d} (+) J_{2d}` (the same two
//! forms are exchanged by `form_permutation`). The search therefore runs
//! over the orthogonal matrices commuting with `J_{2d}` (the unitary
//! subgroup in the paired representation); for every certified channel
//! with the trace condition, a solution exists in that subgroup and both
//! form certificates then hold at once.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::ChannelParams;
use crate::dilation::DilationSpec;
use crate::error::Result;
use crate::numerics::{sqrt_psd, ToleranceConfig};
use crate::paired::{self, PairedMatrix};
use crate::symplectic::{orthosymplectic_blocks, symplectic_residual, SymplecticForm};

/// Verdict of the implementability decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionStatus {
    Yes,
    No,
    Undecided,
}

/// Why the decision came out the way it did. Negative verdicts are always
/// certificate-backed; an exhausted search yields `Undecided`, never `No`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionReason {
    QFound,
    TraceConditionFailed,
    InvalidChannel,
    SearchExhausted,
}

impl DecisionReason {
    pub fn code(&self) -> &'static str {
        match self {
            DecisionReason::QFound => "q_found",
            DecisionReason::TraceConditionFailed => "trace_condition_failed",
            DecisionReason::InvalidChannel => "invalid_channel",
            DecisionReason::SearchExhausted => "search_exhausted",
        }
    }
}

/// Outcome of [`decide`]: on `Yes`, the witness `q`, the coupling
/// `b = q sqrt(Y)` and the orthosymplectic `l_inv = [[X, B], [-B, X]]`
/// are present and certified.
#[derive(Debug, Clone)]
pub struct InterferometerDecision {
    pub status: DecisionStatus,
    pub reason: DecisionReason,
    pub q: Option<DMatrix<f64>>,
    pub b: Option<DMatrix<f64>>,
    pub l_inv: Option<DMatrix<f64>>,
    pub symmetry_residual: f64,
}

impl InterferometerDecision {
    fn negative(reason: DecisionReason) -> Self {
        Self {
            status: DecisionStatus::No,
            reason,
            q: None,
            b: None,
            l_inv: None,
            symmetry_residual: f64::INFINITY,
        }
    }

    /// The dilation under the two-block form `[d, d]` realized by `l_inv`
    /// with zero displacement; present exactly on `Yes`.
    pub fn dilation(&self, cfg: &ToleranceConfig) -> Option<DilationSpec> {
        let l_inv = self.l_inv.as_ref()?;
        let d = l_inv.nrows() / 4;
        DilationSpec::new(l_inv.clone(), DVector::zeros(4 * d), d, d, cfg).ok()
    }
}

/// Search budget for [`find_q`]. The defaults (32 restarts of 2000
/// iterations) are far beyond what the closed-form start needs on
/// certified inputs.
#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub restarts: usize,
    pub iters: usize,
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            restarts: 32,
            iters: 2000,
            seed: 0,
        }
    }
}

/// The attenuator family `X = cos(theta) I`, `Y = sin^2(theta) I`,
/// `w = 0`: valid for every `theta` and satisfying the trace condition.
pub fn attenuator(form: &SymplecticForm, theta: f64) -> Result<ChannelParams> {
    let n = form.dim();
    ChannelParams::new(
        DMatrix::<f64>::identity(n, n) * theta.cos(),
        DMatrix::<f64>::identity(n, n) * theta.sin().powi(2),
        DVector::zeros(n),
        form.clone(),
        &ToleranceConfig::default(),
    )
}

/// `X^T X + Y = I` within tolerance and no displacement.
pub fn trace_condition(ch: &ChannelParams, cfg: &ToleranceConfig) -> bool {
    let n = ch.form().dim();
    let gram = ch.x().transpose() * ch.x() + ch.y();
    let defect = (&gram - DMatrix::<f64>::identity(n, n)).norm();
    defect <= cfg.residual_tol * (1.0 + gram.norm()) && ch.w().norm() <= cfg.residual_tol
}

/// Asymmetry residual `|| X^T Q B - (X^T Q B)^T ||_F`.
fn sym_residual(x: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    let f = x.transpose() * q * b;
    (&f - f.transpose()).norm()
}

/// One descent run from `q0`: projected gradient with polar retraction and
/// backtracking, accepting only improvements. Returns the final point, its
/// residual and the per-iteration residual trace (nonincreasing).
fn descend(
    x: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q0: PairedMatrix,
    iters: usize,
    floor: f64,
) -> (PairedMatrix, f64, Vec<f64>) {
    let mut q = q0;
    let mut q_real = q.to_real();
    let mut res = sym_residual(x, b, &q_real);
    let mut history = vec![res];
    let mut alpha = 0.25;
    for _ in 0..iters {
        if res <= floor {
            break;
        }
        let f = x.transpose() * &q_real * b;
        let asym = &f - f.transpose();
        let grad = PairedMatrix::from_real_projected(&(x * asym * b.transpose()));
        let grad_real = grad.to_real();
        let gnorm = grad_real.norm();
        if gnorm < 1e-300 {
            break;
        }
        let mut improved = false;
        while alpha > 1e-18 {
            let trial_real = paired::polar_retract(&(&q_real - &grad_real * (alpha / gnorm)));
            let trial = PairedMatrix::from_real_projected(&trial_real);
            let trial_real = trial.to_real();
            let trial_res = sym_residual(x, b, &trial_real);
            if trial_res < res {
                q = trial;
                q_real = trial_real;
                res = trial_res;
                alpha = (alpha * 1.5).min(1e6);
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        history.push(res);
        if !improved {
            break;
        }
    }
    (q, res, history)
}

/// Best orthogonal (and `J`-commuting) `q` found minimizing the asymmetry
/// of `X^T q B` over the unitary subgroup, by multi-restart descent with
/// polar retraction. Restart 0 starts from the paired polar factor of `X`
/// (which solves certified trace-condition instances outright), restart 1
/// from the identity, later restarts from seeded random unitaries. The
/// result is the lowest-residual restart, ties broken by restart index;
/// the restart loop short-circuits once the residual falls three decades
/// below the eigenvalue tolerance.
pub fn find_q(
    x: &DMatrix<f64>,
    sqrt_y: &DMatrix<f64>,
    opts: &SearchOptions,
    cfg: &ToleranceConfig,
) -> (DMatrix<f64>, f64) {
    let d = x.nrows() / 2;
    // converged three decades below the eigenvalue tolerance
    let floor = 1e-3 * cfg.eig_tol * (1.0 + x.norm() * sqrt_y.norm());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(DMatrix<f64>, f64)> = None;
    for restart in 0..opts.restarts.max(1) {
        let q0 = match restart {
            0 => paired::unitary_polar(&PairedMatrix::from_real_projected(x)),
            1 => PairedMatrix::identity(d),
            _ => paired::random_unitary(d, &mut rng),
        };
        let (q, res, _) = descend(x, sqrt_y, q0, opts.iters, floor);
        if best.as_ref().is_none_or(|(_, b)| res < *b) {
            best = Some((q.to_real(), res));
        }
        if best.as_ref().is_some_and(|(_, b)| *b <= floor) {
            break;
        }
    }
    best.expect("at least one restart")
}

/// Decide implementability by a multiport interferometer with `d`
/// environment modes. The pipeline is: existence certificate, trace
/// condition, noise square root, `q` search, assembly and verification of
/// the orthosymplectic dilation. A failed search is `Undecided`, never
/// `No`.
pub fn decide(
    ch: &ChannelParams,
    opts: &SearchOptions,
    cfg: &ToleranceConfig,
) -> InterferometerDecision {
    let report = ch.validity(cfg);
    if !report.valid {
        return InterferometerDecision::negative(DecisionReason::InvalidChannel);
    }
    if !trace_condition(ch, cfg) {
        return InterferometerDecision::negative(DecisionReason::TraceConditionFailed);
    }
    let Ok(root) = sqrt_psd(ch.y(), cfg) else {
        return InterferometerDecision::negative(DecisionReason::InvalidChannel);
    };
    let (q, res) = find_q(ch.x(), &root, opts, cfg);
    let undecided = |res| InterferometerDecision {
        status: DecisionStatus::Undecided,
        reason: DecisionReason::SearchExhausted,
        q: None,
        b: None,
        l_inv: None,
        symmetry_residual: res,
    };
    if res > cfg.residual_tol * report.scale {
        return undecided(res);
    }
    let n = ch.form().dim();
    let d = ch.form().modes();
    let b = &q * &root;
    let mut l_inv = DMatrix::<f64>::zeros(2 * n, 2 * n);
    l_inv.view_mut((0, 0), (n, n)).copy_from(ch.x());
    l_inv.view_mut((0, n), (n, n)).copy_from(&b);
    l_inv.view_mut((n, 0), (n, n)).copy_from(&(-&b));
    l_inv.view_mut((n, n), (n, n)).copy_from(ch.x());

    // Certify under both conventions: the monolithic block form and the
    // physical two-block form.
    let monolithic = SymplecticForm::single(n).expect("n >= 2");
    let physical = SymplecticForm::new(vec![d, d]).expect("d >= 1");
    let scale = cfg.residual_tol * (1.0 + l_inv.norm_squared());
    let mono_ok = orthosymplectic_blocks(&l_inv, &monolithic, cfg).is_ok();
    let phys_ok = symplectic_residual(&l_inv, &physical)
        .map(|r| r <= scale)
        .unwrap_or(false);
    if !mono_ok || !phys_ok {
        return undecided(res);
    }
    InterferometerDecision {
        status: DecisionStatus::Yes,
        reason: DecisionReason::QFound,
        q: Some(q),
        b: Some(b),
        l_inv: Some(l_inv),
        symmetry_residual: res,
    }
}
