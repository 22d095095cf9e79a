//! Python bindings: `import clockstat`.

use clockstat::ldp::{self, LdpError};
use clockstat::lindblad::{self, build_two_level_model, LindbladModel, ModelError, TwoLevelParams};
use clockstat::qjmc::{self, InitialState, QjmcError, Simulator, Trajectory};
use clockstat::wtd::{self, WtdError};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

/// Invalid arguments map to ValueError, numerical failures to RuntimeError.
trait IntoPyErr {
    fn py(self) -> PyErr;
}

impl IntoPyErr for ModelError {
    fn py(self) -> PyErr {
        match self {
            ModelError::InvalidParams(_)
            | ModelError::InvalidModel(_)
            | ModelError::InvalidState(_)
            | ModelError::Parse(_) => PyValueError::new_err(self.to_string()),
            _ => PyRuntimeError::new_err(self.to_string()),
        }
    }
}

impl IntoPyErr for LdpError {
    fn py(self) -> PyErr {
        match self {
            LdpError::Domain(_) | LdpError::NoCountedChannel => {
                PyValueError::new_err(self.to_string())
            }
            LdpError::Model(e) => e.py(),
            _ => PyRuntimeError::new_err(self.to_string()),
        }
    }
}

impl IntoPyErr for QjmcError {
    fn py(self) -> PyErr {
        match self {
            QjmcError::Domain(_) | QjmcError::InitialState(_) => {
                PyValueError::new_err(self.to_string())
            }
            QjmcError::Ldp(e) => e.py(),
            _ => PyRuntimeError::new_err(self.to_string()),
        }
    }
}

impl IntoPyErr for WtdError {
    fn py(self) -> PyErr {
        match self {
            WtdError::Domain(_) => PyValueError::new_err(self.to_string()),
            WtdError::Qjmc(e) => e.py(),
            WtdError::Ldp(e) => e.py(),
            _ => PyRuntimeError::new_err(self.to_string()),
        }
    }
}

fn to_rows(m: &clockstat::linalg::ComplexMatrix) -> Vec<Vec<Complex64>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Lindblad model: Hamiltonian plus counted and uncounted jump channels.
#[pyclass(name = "Model", frozen)]
struct PyModel {
    inner: LindbladModel,
}

#[pymethods]
impl PyModel {
    /// Resonantly driven two-level atom with detection efficiency `eta`.
    #[staticmethod]
    #[pyo3(signature = (omega, gamma, eta = 1.0))]
    fn tla(omega: f64, gamma: f64, eta: f64) -> PyResult<Self> {
        let p = TwoLevelParams::new(omega, gamma, eta).map_err(IntoPyErr::py)?;
        Ok(Self {
            inner: build_two_level_model(&p).map_err(IntoPyErr::py)?,
        })
    }

    /// Parses the model JSON format (explicit operators or `{"tla": {...}}`).
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: LindbladModel::from_json(text).map_err(IntoPyErr::py)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn liouvillian(&self) -> Vec<Vec<Complex64>> {
        to_rows(&lindblad::liouvillian(&self.inner))
    }

    fn steady_state(&self) -> PyResult<Vec<Vec<Complex64>>> {
        let rho = lindblad::steady_state(&self.inner).map_err(IntoPyErr::py)?;
        Ok(to_rows(rho.matrix()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(dim={}, channels={})",
            self.inner.dim(),
            self.inner.channels().len()
        )
    }
}

#[pyclass(name = "Cumulants", frozen, get_all)]
struct PyCumulants {
    rate: f64,
    rate_steady_state: f64,
    variance_rate: f64,
    fano: f64,
}

#[pymethods]
impl PyCumulants {
    fn delta_tau(&self, t: f64) -> f64 {
        (self.variance_rate * t).sqrt() / self.rate.abs()
    }

    fn __repr__(&self) -> String {
        format!(
            "Cumulants(rate={}, variance_rate={}, fano={})",
            self.rate, self.variance_rate, self.fano
        )
    }
}

/// Scaled cumulant generating function θ(s).
#[pyfunction]
fn theta(model: &PyModel, s: f64) -> PyResult<f64> {
    ldp::theta(&model.inner, s).map_err(IntoPyErr::py)
}

/// Closed-form θ(s) of the two-level atom at unit efficiency.
#[pyfunction]
fn theta_closed_form(omega: f64, gamma: f64, s: f64) -> PyResult<f64> {
    ldp::theta_closed_form_tla(omega, gamma, s).map_err(IntoPyErr::py)
}

#[pyfunction]
fn cumulants(model: &PyModel) -> PyResult<PyCumulants> {
    let c = ldp::counting_cumulants(&model.inner).map_err(IntoPyErr::py)?;
    Ok(PyCumulants {
        rate: c.rate,
        rate_steady_state: c.rate_steady_state,
        variance_rate: c.variance_rate,
        fano: c.fano,
    })
}

#[pyfunction]
fn delta_tau(model: &PyModel, t: f64) -> PyResult<f64> {
    ldp::delta_tau(&model.inner, t).map_err(IntoPyErr::py)
}

/// `(mean, std)` of the click count after time `t`.
#[pyfunction]
fn n_statistics(model: &PyModel, t: f64) -> PyResult<(f64, f64)> {
    let n = ldp::n_statistics(&model.inner, t).map_err(IntoPyErr::py)?;
    Ok((n.mean, n.std))
}

/// δτ over `omegas × gammas`: list of `(omega, gamma, rate, theta2, delta_tau, error)`.
#[pyfunction]
#[pyo3(signature = (omegas, gammas, eta = 1.0, t = 1000.0))]
fn sweep_delta_tau(
    py: Python<'_>,
    omegas: Vec<f64>,
    gammas: Vec<f64>,
    eta: f64,
    t: f64,
) -> Vec<(f64, f64, f64, f64, f64, Option<String>)> {
    py.detach(|| ldp::sweep_delta_tau(&omegas, &gammas, eta, t))
        .into_iter()
        .map(|p| (p.omega, p.gamma, p.rate, p.theta2, p.delta_tau, p.error))
        .collect()
}

/// Click times of one trajectory started in basis state `initial`.
#[pyfunction]
#[pyo3(signature = (model, t_max, seed, index = 0, initial = 0))]
fn simulate(
    py: Python<'_>,
    model: &PyModel,
    t_max: f64,
    seed: u64,
    index: u64,
    initial: usize,
) -> PyResult<Vec<f64>> {
    let sim = Simulator::new(&model.inner).map_err(IntoPyErr::py)?;
    py.detach(|| sim.run(t_max, seed, index, &InitialState::Basis(initial)))
        .map(|tr| tr.click_times)
        .map_err(IntoPyErr::py)
}

/// `τ(t) = N(t)/rate` on `grid` for a click record ending at `t_max`.
#[pyfunction]
fn clock_readout(
    click_times: Vec<f64>,
    t_max: f64,
    rate: f64,
    grid: Vec<f64>,
) -> PyResult<Vec<f64>> {
    if click_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(PyValueError::new_err(
            "click times must be strictly increasing",
        ));
    }
    let tr = Trajectory {
        click_times,
        t_max,
        seed: 0,
        index: 0,
        model_id: None,
    };
    qjmc::clock_readout(&tr, rate, &grid)
        .map(|s| s.tau)
        .map_err(IntoPyErr::py)
}

#[pyclass(name = "EnsembleStats", frozen, get_all)]
struct PyEnsembleStats {
    grid: Vec<f64>,
    mean_tau: Vec<f64>,
    std_tau: Vec<f64>,
    mean_n: Vec<f64>,
    std_n: Vec<f64>,
    n_traj: usize,
}

#[pyfunction]
fn ensemble_statistics(
    py: Python<'_>,
    model: &PyModel,
    n_traj: usize,
    grid: Vec<f64>,
    seed: u64,
) -> PyResult<PyEnsembleStats> {
    let s = py
        .detach(|| qjmc::ensemble_statistics(&model.inner, n_traj, &grid, seed))
        .map_err(IntoPyErr::py)?;
    Ok(PyEnsembleStats {
        grid: s.grid,
        mean_tau: s.mean_tau,
        std_tau: s.std_tau,
        mean_n: s.mean_n,
        std_n: s.std_n,
        n_traj: s.n_traj,
    })
}

#[pyfunction]
fn wtd_pdf(omega: f64, gamma: f64, t: f64) -> PyResult<f64> {
    wtd::wtd_pdf(omega, gamma, t).map_err(IntoPyErr::py)
}

/// Tabulated waiting-time CDF with moments.
#[pyclass(name = "WtdProfile", frozen)]
struct PyWtdProfile {
    inner: wtd::WtdProfile,
}

#[pymethods]
impl PyWtdProfile {
    #[new]
    fn new(py: Python<'_>, omega: f64, gamma: f64) -> PyResult<Self> {
        let inner = py
            .detach(|| wtd::WtdProfile::build(omega, gamma))
            .map_err(IntoPyErr::py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn normalization(&self) -> f64 {
        self.inner.normalization
    }

    #[getter]
    fn mean(&self) -> f64 {
        self.inner.mean
    }

    #[getter]
    fn variance(&self) -> f64 {
        self.inner.variance
    }

    #[getter]
    fn t_cut(&self) -> f64 {
        self.inner.t_cut
    }

    fn cdf(&self, t: f64) -> f64 {
        self.inner.cdf(t)
    }

    fn quantile(&self, u: f64) -> f64 {
        self.inner.quantile(u)
    }

    fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        self.inner.sample_waiting_times(n, seed)
    }

    /// KS distance of `samples` (sorted here) against this profile.
    fn ks_distance(&self, mut samples: Vec<f64>) -> PyResult<f64> {
        samples.sort_by(f64::total_cmp);
        wtd::ks_distance(&samples, &self.inner).map_err(IntoPyErr::py)
    }
}

/// Local maxima `(t, w)` of the waiting-time density with `w ≥ threshold`.
#[pyfunction]
#[pyo3(signature = (omega, gamma, threshold = 0.014))]
fn peak_census(omega: f64, gamma: f64, threshold: f64) -> PyResult<Vec<(f64, f64)>> {
    let r = wtd::peak_census(omega, gamma, threshold).map_err(IntoPyErr::py)?;
    Ok(r.peaks.into_iter().map(|p| (p.t, p.w)).collect())
}

#[pymodule(name = "clockstat")]
fn clockstat_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyCumulants>()?;
    m.add_class::<PyEnsembleStats>()?;
    m.add_class::<PyWtdProfile>()?;
    m.add_function(wrap_pyfunction!(theta, m)?)?;
    m.add_function(wrap_pyfunction!(theta_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(cumulants, m)?)?;
    m.add_function(wrap_pyfunction!(delta_tau, m)?)?;
    m.add_function(wrap_pyfunction!(n_statistics, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_delta_tau, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(clock_readout, m)?)?;
    m.add_function(wrap_pyfunction!(ensemble_statistics, m)?)?;
    m.add_function(wrap_pyfunction!(wtd_pdf, m)?)?;
    m.add_function(wrap_pyfunction!(peak_census, m)?)?;
    Ok(())
}
