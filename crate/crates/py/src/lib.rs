//! Python module `pytubalkit`.
//!
//! Tensors cross the boundary as a dims list plus flat column-major data,
//! which keeps the module free of any array-library dependency.

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tubalkit::experiment::{run_seeds, ExperimentConfig};
use tubalkit::{
    certificate_check, dual_gap_smooth, gen_completion, gen_rpca, project_tnn, rank_r_tsvd,
    slice_spectrum, spectral_norm, t_product, tnn, tsvd, tubal_rank, DenseTensor, ProjectionMode,
    SmoothObjective, TnnProjector, TubalError,
};

fn to_py(e: TubalError) -> PyErr {
    if e.is_numerical() {
        PyArithmeticError::new_err(e.to_string())
    } else if matches!(e, TubalError::Io(_)) {
        PyOSError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

/// Dense real tensor in column-major order.
#[pyclass(name = "Tensor", module = "pytubalkit", skip_from_py_object)]
#[derive(Clone)]
pub struct PyTensor {
    inner: DenseTensor,
}

impl From<DenseTensor> for PyTensor {
    fn from(inner: DenseTensor) -> Self {
        Self { inner }
    }
}

#[pymethods]
impl PyTensor {
    #[new]
    fn new(dims: Vec<usize>, data: Vec<f64>) -> PyResult<Self> {
        Ok(DenseTensor::new(dims, data).map_err(to_py)?.into())
    }

    #[staticmethod]
    fn zeros(dims: Vec<usize>) -> PyResult<Self> {
        Ok(DenseTensor::zeros(&dims).map_err(to_py)?.into())
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(tubalkit::io::load_tensor(path).map_err(to_py)?.into())
    }

    fn save(&self, path: &str) -> PyResult<()> {
        tubalkit::io::save_tensor(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.dims().to_vec()
    }

    #[getter]
    fn data(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn get(&self, idx: Vec<usize>) -> PyResult<f64> {
        if idx.len() != self.inner.order() || idx.iter().zip(self.inner.dims()).any(|(i, n)| i >= n) {
            return Err(PyValueError::new_err(format!(
                "index {idx:?} out of bounds for dims {:?}",
                self.inner.dims()
            )));
        }
        Ok(self.inner.get(&idx))
    }

    fn fro_norm(&self) -> f64 {
        self.inner.fro_norm()
    }

    fn t_transpose(&self) -> Self {
        self.inner.t_transpose().into()
    }

    fn distance(&self, other: &PyTensor) -> PyResult<f64> {
        self.inner.distance(&other.inner).map_err(to_py)
    }

    fn __matmul__(&self, other: &PyTensor) -> PyResult<Self> {
        Ok(t_product(&self.inner, &other.inner).map_err(to_py)?.into())
    }

    fn __repr__(&self) -> String {
        format!("Tensor(dims={:?})", self.inner.dims())
    }
}

#[pyfunction(name = "t_product")]
fn py_t_product(x: &PyTensor, y: &PyTensor) -> PyResult<PyTensor> {
    Ok(t_product(&x.inner, &y.inner).map_err(to_py)?.into())
}

#[pyfunction(name = "tnn")]
fn py_tnn(x: &PyTensor) -> f64 {
    tnn(&x.inner)
}

#[pyfunction(name = "spectral_norm")]
fn py_spectral_norm(x: &PyTensor) -> f64 {
    spectral_norm(&x.inner)
}

#[pyfunction(name = "tubal_rank")]
fn py_tubal_rank(x: &PyTensor) -> usize {
    tubal_rank(&x.inner)
}

/// Singular values of every Fourier slice.
#[pyfunction]
fn slice_singular_values(x: &PyTensor) -> Vec<Vec<f64>> {
    slice_spectrum(&x.inner).values().to_vec()
}

/// `(U, S, V)` with `x = U * S * V^T`, truncated to `rank` when given.
#[pyfunction(name = "tsvd", signature = (x, rank=None))]
fn py_tsvd(x: &PyTensor, rank: Option<usize>) -> PyResult<(PyTensor, PyTensor, PyTensor)> {
    let f = match rank {
        Some(r) => rank_r_tsvd(&x.inner, r),
        None => tsvd(&x.inner),
    }
    .map_err(to_py)?;
    Ok((f.u.into(), f.s.into(), f.v.into()))
}

/// Projection onto the TNN ball. Returns `(projected, threshold, escalated)`;
/// with `rank` the certified truncated path is tried first.
#[pyfunction(name = "project_tnn", signature = (x, tau, rank=None))]
fn py_project_tnn(x: &PyTensor, tau: f64, rank: Option<usize>) -> PyResult<(PyTensor, f64, bool)> {
    match rank {
        Some(r) => {
            let mut p = TnnProjector::new(tau, ProjectionMode::TruncatedCertified(r)).map_err(to_py)?;
            let o = p.project(&x.inner).map_err(to_py)?;
            Ok((o.result.projected.into(), o.result.threshold, o.escalated))
        }
        None => {
            let p = project_tnn(&x.inner, tau).map_err(to_py)?;
            Ok((p.projected.into(), p.threshold, false))
        }
    }
}

/// `(holds, value)` of the rank-`r` certificate.
#[pyfunction]
fn certificate(x: &PyTensor, tau: f64, r: usize) -> PyResult<(bool, f64)> {
    let c = certificate_check(&slice_spectrum(&x.inner), tau, r).map_err(to_py)?;
    Ok((c.holds, c.value))
}

#[pyfunction(name = "dual_gap_smooth")]
fn py_dual_gap_smooth(x: &PyTensor, grad: &PyTensor, tau: f64) -> PyResult<f64> {
    dual_gap_smooth(&x.inner, &grad.inner, tau).map_err(to_py)
}

/// Completion instance as a dict with `truth`, `observed`, `mask`, `tau`
/// and `init` (rank-`r` start).
#[pyfunction]
fn completion_instance<'py>(
    py: Python<'py>,
    dims: Vec<usize>,
    r: usize,
    rho: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let inst = gen_completion(&dims, r, rho, seed).map_err(to_py)?;
    let mask = DenseTensor::from_fn(&dims, |idx| {
        f64::from(u8::from(inst.mask.contains(tubalkit::tensor::ravel(idx, &dims))))
    })
    .map_err(to_py)?;
    let obj = inst.objective();
    let init = inst.init(r).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("init_gradient", PyTensor::from(obj.gradient(&init)))?;
    d.set_item("init", PyTensor::from(init))?;
    d.set_item("truth", PyTensor::from(inst.truth.clone()))?;
    d.set_item("observed", PyTensor::from(inst.observed.clone()))?;
    d.set_item("mask", PyTensor::from(mask))?;
    d.set_item("tau", inst.tau)?;
    Ok(d)
}

/// Robust PCA instance as a dict with `truth`, `corrupted` and `tau`.
#[pyfunction]
fn rpca_instance<'py>(py: Python<'py>, n: usize, r: usize, m: f64, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let inst = gen_rpca(n, r, m, seed).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("truth", PyTensor::from(inst.truth.clone()))?;
    d.set_item("corrupted", PyTensor::from(inst.corrupted.clone()))?;
    d.set_item("tau", inst.tau)?;
    Ok(d)
}

/// Runs an experiment from `key = value` text plus overrides and returns one
/// dict per seed. Nothing is written to disk.
#[pyfunction(signature = (config="", overrides=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    config: &str,
    overrides: Option<Vec<(String, String)>>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = ExperimentConfig::from_sources(Some(config), &overrides.unwrap_or_default()).map_err(to_py)?;
    let res = py.detach(|| run_seeds(&cfg)).map_err(to_py)?;
    res.runs
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("seed", r.seed)?;
            d.set_item("init_error", r.init_error)?;
            d.set_item("recovery_error", r.recovery_error)?;
            d.set_item("dual_gap", r.dual_gap)?;
            d.set_item("sc_measure", r.sc_measure)?;
            d.set_item("first_certified_iteration", r.first_certified_iteration)?;
            d.set_item("wall_time", r.wall_time)?;
            d.set_item("escalations", r.escalations)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn pytubalkit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTensor>()?;
    m.add_function(wrap_pyfunction!(py_t_product, m)?)?;
    m.add_function(wrap_pyfunction!(py_tnn, m)?)?;
    m.add_function(wrap_pyfunction!(py_spectral_norm, m)?)?;
    m.add_function(wrap_pyfunction!(py_tubal_rank, m)?)?;
    m.add_function(wrap_pyfunction!(slice_singular_values, m)?)?;
    m.add_function(wrap_pyfunction!(py_tsvd, m)?)?;
    m.add_function(wrap_pyfunction!(py_project_tnn, m)?)?;
    m.add_function(wrap_pyfunction!(certificate, m)?)?;
    m.add_function(wrap_pyfunction!(py_dual_gap_smooth, m)?)?;
    m.add_function(wrap_pyfunction!(completion_instance, m)?)?;
    m.add_function(wrap_pyfunction!(rpca_instance, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
