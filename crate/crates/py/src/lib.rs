//! Python bindings: `import smdi`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use smdi_core::config::parse_config;
use smdi_core::model::{arm_transmittance, gain_qber, single_photon_truth};
use smdi_core::optimizer::{self, IntensityRange};
use smdi_core::{numerics, report, Basis, Error, Mode, Probability, TrustedSourceModel};

fn py_err(err: Error) -> PyErr {
    match err {
        Error::Io { .. } | Error::Csv(_) | Error::EstimationFailure(_) => {
            PyRuntimeError::new_err(err.to_string())
        }
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn parse_basis(basis: &str) -> PyResult<Basis> {
    match basis {
        "Z" | "ZZ" => Ok(Basis::Z),
        "X" | "XX" => Ok(Basis::X),
        _ => Err(PyValueError::new_err(format!(
            "unknown basis `{basis}`, expected Z or X"
        ))),
    }
}

fn parse_mode(mode: &str) -> PyResult<Mode> {
    mode.parse().map_err(PyValueError::new_err)
}

fn trust(eta_s: f64) -> PyResult<TrustedSourceModel> {
    TrustedSourceModel::new(eta_s).map_err(py_err)
}

/// Detector and fiber parameters.
#[pyclass(name = "ChannelParams", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyChannelParams(smdi_core::ChannelParams);

#[pymethods]
impl PyChannelParams {
    #[new]
    #[pyo3(signature = (eta_d=0.4, e_d=0.015, p_d=3e-6, f=1.16, alpha=0.2))]
    fn new(eta_d: f64, e_d: f64, p_d: f64, f: f64, alpha: f64) -> PyResult<Self> {
        smdi_core::ChannelParams::new(eta_d, e_d, p_d, f, alpha)
            .map(PyChannelParams)
            .map_err(py_err)
    }

    #[getter]
    fn eta_d(&self) -> f64 {
        self.0.eta_d.value()
    }
    #[getter]
    fn e_d(&self) -> f64 {
        self.0.e_d.value()
    }
    #[getter]
    fn p_d(&self) -> f64 {
        self.0.p_d.value()
    }
    #[getter]
    fn f(&self) -> f64 {
        self.0.f
    }
    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha
    }

    fn __repr__(&self) -> String {
        format!(
            "ChannelParams(eta_d={}, e_d={}, p_d={}, f={}, alpha={})",
            self.eta_d(),
            self.e_d(),
            self.p_d(),
            self.0.f,
            self.0.alpha
        )
    }
}

fn channel(c: Option<PyRef<'_, PyChannelParams>>) -> smdi_core::ChannelParams {
    c.map(|c| c.0).unwrap_or_default()
}

/// Vacuum, weak decoy and signal intensity.
#[pyclass(name = "IntensitySet", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyIntensitySet(smdi_core::IntensitySet);

#[pymethods]
impl PyIntensitySet {
    #[new]
    #[pyo3(signature = (signal, decoy=optimizer::DEFAULT_WEAK_DECOY))]
    fn new(signal: f64, decoy: f64) -> PyResult<Self> {
        smdi_core::IntensitySet::new(decoy, signal)
            .map(PyIntensitySet)
            .map_err(py_err)
    }

    #[getter]
    fn signal(&self) -> f64 {
        self.0.mu2
    }
    #[getter]
    fn decoy(&self) -> f64 {
        self.0.mu1
    }

    fn __repr__(&self) -> String {
        format!("IntensitySet(signal={}, decoy={})", self.0.mu2, self.0.mu1)
    }
}

#[pyfunction]
fn bessel_i0(x: f64) -> PyResult<f64> {
    numerics::bessel_i0(x).map_err(py_err)
}

#[pyfunction]
fn binary_entropy(p: f64) -> PyResult<f64> {
    Ok(numerics::binary_entropy(
        Probability::new(p).map_err(py_err)?,
    ))
}

/// `(gain, qber)` of the closed-form model in basis `"Z"` or `"X"`.
#[pyfunction]
#[pyo3(signature = (basis, mu, nu, distance_km, channel_params=None))]
fn gain_and_qber(
    basis: &str,
    mu: f64,
    nu: f64,
    distance_km: f64,
    channel_params: Option<PyRef<'_, PyChannelParams>>,
) -> PyResult<(f64, f64)> {
    let p = channel(channel_params);
    let arms = arm_transmittance(&p, distance_km).map_err(py_err)?;
    let s = gain_qber(parse_basis(basis)?, mu, nu, &arms, &p).map_err(py_err)?;
    Ok((s.gain.value(), s.qber.value()))
}

/// `(y11, e11, q11)` of the honest channel.
#[pyfunction]
#[pyo3(signature = (mu, nu, distance_km, channel_params=None))]
fn single_photon(
    mu: f64,
    nu: f64,
    distance_km: f64,
    channel_params: Option<PyRef<'_, PyChannelParams>>,
) -> PyResult<(f64, f64, f64)> {
    let p = channel(channel_params);
    let arms = arm_transmittance(&p, distance_km).map_err(py_err)?;
    let t = single_photon_truth(mu, nu, &arms, &p).map_err(py_err)?;
    Ok((t.y11.value(), t.e11.value(), t.q11_zz.value()))
}

/// `(rate, flags)` at one distance; flags is a `;`-separated label.
#[pyfunction]
#[pyo3(signature = (distance_km, intensities, eta_s=1.0, mode="asymptotic", channel_params=None))]
fn key_rate(
    distance_km: f64,
    intensities: PyRef<'_, PyIntensitySet>,
    eta_s: f64,
    mode: &str,
    channel_params: Option<PyRef<'_, PyChannelParams>>,
) -> PyResult<(f64, String)> {
    let p = smdi_core::keyrate::rate_at(
        &channel(channel_params),
        distance_km,
        &intensities.0,
        trust(eta_s)?,
        parse_mode(mode)?,
    )
    .map_err(py_err)?;
    Ok((p.rate, p.flags.label()))
}

/// `(mu, rate)` maximizing the rate over the signal intensity.
#[pyfunction]
#[pyo3(signature = (
    distance_km, eta_s=1.0, mode="asymptotic", mu_min=0.01, mu_max=1.0,
    decoy=optimizer::DEFAULT_WEAK_DECOY, tol=1e-4, channel_params=None
))]
#[allow(clippy::too_many_arguments)]
fn optimize_signal(
    distance_km: f64,
    eta_s: f64,
    mode: &str,
    mu_min: f64,
    mu_max: f64,
    decoy: f64,
    tol: f64,
    channel_params: Option<PyRef<'_, PyChannelParams>>,
) -> PyResult<(f64, f64)> {
    let range = IntensityRange::new(mu_min, mu_max)
        .and_then(|r| r.with_decoy(decoy))
        .map_err(py_err)?;
    let o = optimizer::optimize_signal_intensity(
        &channel(channel_params),
        distance_km,
        trust(eta_s)?,
        parse_mode(mode)?,
        range,
        tol,
    )
    .map_err(py_err)?;
    Ok((o.mu, o.rate))
}

/// Largest distance in km with a positive rate (0 if there is none).
#[pyfunction]
#[pyo3(signature = (intensities, eta_s=1.0, mode="asymptotic", tol_km=0.1, channel_params=None))]
fn max_distance(
    intensities: PyRef<'_, PyIntensitySet>,
    eta_s: f64,
    mode: &str,
    tol_km: f64,
    channel_params: Option<PyRef<'_, PyChannelParams>>,
) -> PyResult<f64> {
    let m = optimizer::max_distance(
        &channel(channel_params),
        &intensities.0,
        trust(eta_s)?,
        parse_mode(mode)?,
        tol_km,
    )
    .map_err(py_err)?;
    Ok(m.distance_km)
}

type SweepRow = (f64, f64, String, f64, f64, f64, String);

/// Rows `(distance_km, eta_s, mode, mu, nu, rate, flags)` for a config text.
#[pyfunction]
fn sweep(py: Python<'_>, config_text: &str) -> PyResult<Vec<SweepRow>> {
    let cfg = parse_config(config_text).map_err(py_err)?;
    let points = py.detach(|| report::sweep_points(&cfg)).map_err(py_err)?;
    Ok(points
        .into_iter()
        .map(|p| {
            (
                p.distance_km,
                p.eta_s.value(),
                p.mode.to_string(),
                p.mu,
                p.nu,
                p.rate,
                p.flags.label(),
            )
        })
        .collect())
}

/// `(report_text, passed)` of the Monte Carlo cross-validation.
#[pyfunction]
#[pyo3(signature = (config_text="", model_e_d=None))]
fn validate(py: Python<'_>, config_text: &str, model_e_d: Option<f64>) -> PyResult<(String, bool)> {
    let cfg = parse_config(config_text).map_err(py_err)?;
    let model = model_e_d
        .map(|e_d| {
            let c = cfg.channel;
            smdi_core::ChannelParams::new(c.eta_d.value(), e_d, c.p_d.value(), c.f, c.alpha)
        })
        .transpose()
        .map_err(py_err)?;
    let out = py
        .detach(|| report::run_validate(&cfg, model))
        .map_err(py_err)?;
    Ok((out.text, out.pass))
}

/// `(report_text, passed)` of the dimension-attack demonstration.
#[pyfunction]
fn attack_report() -> (String, bool) {
    report::run_attack_report()
}

#[pymodule(name = "smdi")]
fn smdi_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChannelParams>()?;
    m.add_class::<PyIntensitySet>()?;
    m.add_function(wrap_pyfunction!(bessel_i0, m)?)?;
    m.add_function(wrap_pyfunction!(binary_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(gain_and_qber, m)?)?;
    m.add_function(wrap_pyfunction!(single_photon, m)?)?;
    m.add_function(wrap_pyfunction!(key_rate, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_signal, m)?)?;
    m.add_function(wrap_pyfunction!(max_distance, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(attack_report, m)?)?;
    Ok(())
}
