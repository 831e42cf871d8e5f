//! Python bindings for the gchan toolkit: channels, states, dilations and
//! the certification/synthesis entry points, with matrices passed as
//! nested lists of floats.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use gchan::channel::{self, ChannelParams};
use gchan::dilation::{self, DilationSpec};
use gchan::interferometer::{self, DecisionStatus, SearchOptions};
use gchan::numerics::ToleranceConfig;
use gchan::states::{self, GaussianState};
use gchan::symplectic::SymplecticForm;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix_from_rows(name: &str, rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let nr = rows.len();
    let nc = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.iter().any(|r| r.len() != nc) {
        return Err(PyValueError::new_err(format!("{name}: ragged rows")));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn cfg() -> ToleranceConfig {
    ToleranceConfig::default()
}

/// A Gaussian channel `(X, Y, w)` acting as `m -> X^T m + w`,
/// `S -> X^T S X + Y`.
#[pyclass(name = "Channel", skip_from_py_object)]
#[derive(Clone)]
struct PyChannel {
    inner: ChannelParams,
}

#[pymethods]
impl PyChannel {
    #[new]
    fn new(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>, w: Vec<f64>) -> PyResult<Self> {
        if !w.len().is_multiple_of(2) || w.is_empty() {
            return Err(PyValueError::new_err("w must have even positive length 2d"));
        }
        let form = SymplecticForm::single(w.len() / 2).map_err(err)?;
        let inner = ChannelParams::new(
            matrix_from_rows("X", &x)?,
            matrix_from_rows("Y", &y)?,
            DVector::from_column_slice(&w),
            form,
            &cfg(),
        )
        .map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn identity(d: usize) -> PyResult<Self> {
        let form = SymplecticForm::single(d).map_err(err)?;
        Ok(Self {
            inner: ChannelParams::identity(form),
        })
    }

    #[staticmethod]
    fn attenuator(d: usize, theta: f64) -> PyResult<Self> {
        let form = SymplecticForm::single(d).map_err(err)?;
        Ok(Self {
            inner: interferometer::attenuator(&form, theta).map_err(err)?,
        })
    }

    /// The swap-noise pair separating the two noise sets: an admissible
    /// noise matrix that still fails the existence certificate.
    #[staticmethod]
    fn counterexample(d: usize) -> PyResult<Self> {
        let (inner, _) = channel::counterexample_channel(d, &cfg()).map_err(err)?;
        Ok(Self { inner })
    }

    /// Covariance-level transpose map: positivity-preserving but not a
    /// channel.
    #[staticmethod]
    fn transpose_map(d: usize) -> PyResult<Self> {
        Ok(Self {
            inner: channel::transpose_map(d, &cfg()).map_err(err)?,
        })
    }

    #[staticmethod]
    fn random_valid(d: usize, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: dilation::random_valid_channel(d, seed, &cfg()).map_err(err)?,
        })
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.form().modes()
    }

    #[getter]
    fn x(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(self.inner.x())
    }

    #[getter]
    fn y(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(self.inner.y())
    }

    #[getter]
    fn w(&self) -> Vec<f64> {
        self.inner.w().iter().cloned().collect()
    }

    /// Existence certificate: dict with `valid`, `min_eig_minus`,
    /// `min_eig_plus`, `y_min_eig` and the tolerance `scale`.
    fn validity<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let rep = self.inner.validity(&cfg());
        let out = PyDict::new(py);
        out.set_item("valid", rep.valid)?;
        out.set_item("min_eig_minus", rep.min_eig_minus)?;
        out.set_item("min_eig_plus", rep.min_eig_plus)?;
        out.set_item("y_min_eig", rep.y_min_eig)?;
        out.set_item("scale", rep.scale)?;
        Ok(out)
    }

    fn apply(&self, state: &PyState) -> PyResult<PyState> {
        Ok(PyState {
            inner: self.inner.apply(&state.inner, &cfg()).map_err(err)?,
        })
    }

    /// Composition with `second` applied after `self`.
    fn compose(&self, second: &PyChannel) -> PyResult<PyChannel> {
        Ok(PyChannel {
            inner: self.inner.compose(&second.inner).map_err(err)?,
        })
    }

    fn env_mode_bound(&self) -> PyResult<usize> {
        self.inner.env_mode_bound(&cfg()).map_err(err)
    }

    /// Dual Weyl action on the argument `z`: `(log_magnitude, phase,
    /// transformed_argument)`.
    fn dual_weyl(&self, z: Vec<f64>) -> PyResult<(f64, f64, Vec<f64>)> {
        let (lc, ph, arg) = self
            .inner
            .dual_weyl(&DVector::from_column_slice(&z))
            .map_err(err)?;
        Ok((lc, ph, arg.iter().cloned().collect()))
    }

    fn __repr__(&self) -> String {
        format!("Channel(d={})", self.inner.form().modes())
    }
}

/// A Gaussian state `(mean, cov)` with `cov + iJ >= 0`.
#[pyclass(name = "State", skip_from_py_object)]
#[derive(Clone)]
struct PyState {
    inner: GaussianState,
}

#[pymethods]
impl PyState {
    #[new]
    fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> PyResult<Self> {
        if !mean.len().is_multiple_of(2) || mean.is_empty() {
            return Err(PyValueError::new_err(
                "mean must have even positive length 2d",
            ));
        }
        let form = SymplecticForm::single(mean.len() / 2).map_err(err)?;
        let inner = GaussianState::new(
            DVector::from_column_slice(&mean),
            matrix_from_rows("cov", &cov)?,
            form,
            &cfg(),
        )
        .map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn vacuum(d: usize) -> PyResult<Self> {
        let form = SymplecticForm::single(d).map_err(err)?;
        Ok(Self {
            inner: GaussianState::vacuum(form),
        })
    }

    #[staticmethod]
    fn thermal(nus: Vec<f64>) -> PyResult<Self> {
        let form = SymplecticForm::single(nus.len().max(1)).map_err(err)?;
        Ok(Self {
            inner: GaussianState::thermal(form, &nus).map_err(err)?,
        })
    }

    #[staticmethod]
    fn random(d: usize, seed: u64) -> PyResult<Self> {
        let form = SymplecticForm::single(d).map_err(err)?;
        Ok(Self {
            inner: GaussianState::random(&form, seed, &cfg()),
        })
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.form().modes()
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.inner.mean().iter().cloned().collect()
    }

    #[getter]
    fn cov(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(self.inner.cov())
    }

    /// Characteristic function value at `z` as `(re, im)`.
    fn char_fn(&self, z: Vec<f64>) -> PyResult<(f64, f64)> {
        self.inner
            .char_fn(&DVector::from_column_slice(&z))
            .map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("State(d={})", self.inner.form().modes())
    }
}

/// A symplectic Stinespring dilation.
#[pyclass(name = "Dilation", skip_from_py_object)]
#[derive(Clone)]
struct PyDilation {
    inner: DilationSpec,
}

#[pymethods]
impl PyDilation {
    #[getter]
    fn d_in(&self) -> usize {
        self.inner.d_in()
    }

    #[getter]
    fn d_env(&self) -> usize {
        self.inner.d_env()
    }

    #[getter]
    fn g(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(self.inner.g())
    }

    #[getter]
    fn u(&self) -> Vec<f64> {
        self.inner.u().iter().cloned().collect()
    }

    fn induced_channel(&self) -> PyResult<PyChannel> {
        Ok(PyChannel {
            inner: self.inner.induced_channel(&cfg()).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Dilation(d_in={}, d_env={})",
            self.inner.d_in(),
            self.inner.d_env()
        )
    }
}

/// Build a symplectic Stinespring dilation of a valid channel.
#[pyfunction]
fn build_dilation(channel: &PyChannel) -> PyResult<PyDilation> {
    Ok(PyDilation {
        inner: dilation::build_dilation(&channel.inner, &cfg()).map_err(err)?,
    })
}

/// Maximum deviation between the channel action and the dilation's induced
/// action over random states.
#[pyfunction]
#[pyo3(signature = (dilation, channel, n_states = 20, seed = 0))]
fn verify_dilation(
    dilation: &PyDilation,
    channel: &PyChannel,
    n_states: usize,
    seed: u64,
) -> PyResult<f64> {
    dilation::verify_dilation(&dilation.inner, &channel.inner, n_states, seed, &cfg()).map_err(err)
}

/// Decide implementability by a multiport interferometer. Returns a dict
/// with `status`, `reason`, `symmetry_residual` and, on yes, the witness
/// `q`, the coupling `b` and the `dilation`.
#[pyfunction]
#[pyo3(signature = (channel, restarts = 32, iters = 2000, seed = 0))]
fn decide_interferometer<'py>(
    py: Python<'py>,
    channel: &PyChannel,
    restarts: usize,
    iters: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = SearchOptions {
        restarts,
        iters,
        seed,
    };
    let c = cfg();
    let decision = interferometer::decide(&channel.inner, &opts, &c);
    let out = PyDict::new(py);
    out.set_item(
        "status",
        match decision.status {
            DecisionStatus::Yes => "yes",
            DecisionStatus::No => "no",
            DecisionStatus::Undecided => "undecided",
        },
    )?;
    out.set_item("reason", decision.reason.code())?;
    out.set_item("symmetry_residual", decision.symmetry_residual)?;
    if let Some(q) = &decision.q {
        out.set_item("q", matrix_to_rows(q))?;
    }
    if let Some(b) = &decision.b {
        out.set_item("b", matrix_to_rows(b))?;
    }
    if let Some(dil) = decision.dilation(&c) {
        out.set_item("dilation", PyDilation { inner: dil })?;
    }
    Ok(out)
}

/// Membership of `Y` in the certificate noise set of `X` (ignoring `w`).
#[pyfunction]
fn fd0_member(channel: &PyChannel) -> PyResult<bool> {
    let ch = &channel.inner;
    channel::fd0_member(ch.x(), ch.y(), ch.form(), &cfg()).map_err(err)
}

/// Sufficient condition for membership in the state-quantified noise set.
#[pyfunction]
fn fd_sufficient(channel: &PyChannel) -> PyResult<bool> {
    channel::fd_sufficient(channel.inner.y(), channel.inner.form(), &cfg()).map_err(err)
}

/// Monte-Carlo falsification of membership in the state-quantified noise
/// set; returns `{"falsified", "sample_index"?, "witness"?}`.
#[pyfunction]
#[pyo3(signature = (channel, n_samples = 200, seed = 0))]
fn fd_member_sample<'py>(
    py: Python<'py>,
    channel: &PyChannel,
    n_samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let ch = &channel.inner;
    let verdict = channel::fd_member_sample(ch.x(), ch.y(), ch.form(), n_samples, seed, &cfg())
        .map_err(err)?;
    let out = PyDict::new(py);
    match verdict {
        channel::SampleVerdict::Falsified {
            witness,
            sample_index,
        } => {
            out.set_item("falsified", true)?;
            out.set_item("sample_index", sample_index)?;
            out.set_item("witness", matrix_to_rows(&witness))?;
        }
        channel::SampleVerdict::NotFalsified => out.set_item("falsified", false)?,
    }
    Ok(out)
}

/// Evolve a state through a Gaussian unitary given as `(u, L)`.
#[pyfunction]
fn unitary_action(u: Vec<f64>, l: Vec<Vec<f64>>, state: &PyState) -> PyResult<PyState> {
    let form = state.inner.form().clone();
    let g = gchan::symplectic::GaussianUnitary::new(
        DVector::from_column_slice(&u),
        matrix_from_rows("L", &l)?,
        form,
        &cfg(),
    )
    .map_err(err)?;
    Ok(PyState {
        inner: states::gu_action(&g, &state.inner, &cfg()).map_err(err)?,
    })
}

#[pymodule]
fn gchan_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChannel>()?;
    m.add_class::<PyState>()?;
    m.add_class::<PyDilation>()?;
    m.add_function(wrap_pyfunction!(build_dilation, m)?)?;
    m.add_function(wrap_pyfunction!(verify_dilation, m)?)?;
    m.add_function(wrap_pyfunction!(decide_interferometer, m)?)?;
    m.add_function(wrap_pyfunction!(fd0_member, m)?)?;
    m.add_function(wrap_pyfunction!(fd_sufficient, m)?)?;
    m.add_function(wrap_pyfunction!(fd_member_sample, m)?)?;
    m.add_function(wrap_pyfunction!(unitary_action, m)?)?;
    Ok(())
}
