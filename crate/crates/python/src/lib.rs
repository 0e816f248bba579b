//! Python bindings. Volumes cross the boundary as flat lists in
//! x-fastest order (voxel-major for probabilities) plus `(nx, ny, nz)`.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyList;

use labelfuse::{self as lf, Dims, Spacing};

fn py_err(e: lf::Error) -> PyErr {
    match e {
        lf::Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn grid(dims: (usize, usize, usize), spacing: (f64, f64, f64)) -> PyResult<(Dims, Spacing)> {
    let d = Dims::new(dims.0, dims.1, dims.2).map_err(py_err)?;
    let s = Spacing::new(spacing.0, spacing.1, spacing.2).map_err(py_err)?;
    Ok((d, s))
}

#[pyclass(
    name = "LabelVolume",
    module = "labelfuse_py",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
pub struct PyLabelVolume(lf::LabelVolume);

#[pymethods]
impl PyLabelVolume {
    #[new]
    #[pyo3(signature = (dims, data, k = 3, spacing = (1.0, 1.0, 1.0)))]
    fn new(
        dims: (usize, usize, usize),
        data: Vec<u8>,
        k: usize,
        spacing: (f64, f64, f64),
    ) -> PyResult<Self> {
        let (d, s) = grid(dims, spacing)?;
        lf::LabelVolume::new(d, s, k, data)
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn dims(&self) -> (usize, usize, usize) {
        let d = self.0.dims();
        (d.nx, d.ny, d.nz)
    }

    #[getter]
    fn spacing(&self) -> (f64, f64, f64) {
        let s = self.0.spacing();
        (s.dx, s.dy, s.dz)
    }

    #[getter]
    fn k(&self) -> usize {
        self.0.k()
    }

    /// Labels as a list of ints (not `bytes`).
    #[getter]
    fn data<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        PyList::new(py, self.0.data())
    }

    fn flip_lr(&self) -> Self {
        Self(lf::FlipLr::flip_lr(&self.0))
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }

    fn __repr__(&self) -> String {
        format!("LabelVolume(dims={}, k={})", self.0.dims(), self.0.k())
    }
}

#[pyclass(name = "ProbVolume", module = "labelfuse_py", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyProbVolume(lf::ProbVolume);

#[pymethods]
impl PyProbVolume {
    #[new]
    #[pyo3(signature = (dims, k, data, spacing = (1.0, 1.0, 1.0)))]
    fn new(
        dims: (usize, usize, usize),
        k: usize,
        data: Vec<f64>,
        spacing: (f64, f64, f64),
    ) -> PyResult<Self> {
        let (d, s) = grid(dims, spacing)?;
        lf::ProbVolume::new(d, s, k, data).map(Self).map_err(py_err)
    }

    #[getter]
    fn dims(&self) -> (usize, usize, usize) {
        let d = self.0.dims();
        (d.nx, d.ny, d.nz)
    }

    #[getter]
    fn spacing(&self) -> (f64, f64, f64) {
        let s = self.0.spacing();
        (s.dx, s.dy, s.dz)
    }

    #[getter]
    fn k(&self) -> usize {
        self.0.k()
    }

    #[getter]
    fn data(&self) -> Vec<f64> {
        self.0.data().to_vec()
    }

    fn argmax(&self) -> PyLabelVolume {
        PyLabelVolume(lf::argmax_labels(&self.0))
    }

    fn __repr__(&self) -> String {
        format!("ProbVolume(dims={}, k={})", self.0.dims(), self.0.k())
    }
}

#[pyclass(
    name = "ParamVector",
    module = "labelfuse_py",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
pub struct PyParamVector(lf::ParamVector);

#[pymethods]
impl PyParamVector {
    #[new]
    fn new(values: Vec<f64>) -> PyResult<Self> {
        lf::ParamVector::new(values).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        lf::ParamVector::load(&path).map(Self).map_err(py_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(py_err)
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "ConfidentJoint", module = "labelfuse_py", frozen, get_all)]
pub struct PyConfidentJoint {
    counts: Vec<Vec<u64>>,
    thresholds: Vec<f64>,
    n: u64,
}

#[pyfunction]
#[pyo3(signature = (path, k = 3))]
fn load_label(path: PathBuf, k: usize) -> PyResult<PyLabelVolume> {
    lf::load_label(&path, k).map(PyLabelVolume).map_err(py_err)
}

#[pyfunction]
fn load_prob(path: PathBuf) -> PyResult<PyProbVolume> {
    lf::load_prob(&path).map(PyProbVolume).map_err(py_err)
}

#[pyfunction]
fn save_label(vol: &PyLabelVolume, path: PathBuf) -> PyResult<()> {
    lf::io::save_label(&vol.0, &path).map_err(py_err)
}

#[pyfunction]
fn save_prob(vol: &PyProbVolume, path: PathBuf) -> PyResult<()> {
    lf::io::save_prob(&vol.0, &path).map_err(py_err)
}

#[pyfunction]
fn one_hot(vol: &PyLabelVolume) -> PyProbVolume {
    PyProbVolume(lf::one_hot(&vol.0))
}

#[pyfunction]
fn argmax_labels(probs: &PyProbVolume) -> PyLabelVolume {
    PyLabelVolume(lf::argmax_labels(&probs.0))
}

#[pyfunction]
fn confident_joint(noisy: &PyLabelVolume, probs: &PyProbVolume) -> PyResult<PyConfidentJoint> {
    let j = lf::confident_joint(&noisy.0, &probs.0).map_err(py_err)?;
    Ok(PyConfidentJoint {
        counts: j.counts,
        thresholds: j.thresholds,
        n: j.n,
    })
}

/// Per-voxel error flags and the suggested replacement (None when unflagged).
#[pyfunction]
fn find_label_errors(
    noisy: &PyLabelVolume,
    probs: &PyProbVolume,
) -> PyResult<(Vec<bool>, Vec<Option<u8>>)> {
    let f = lf::find_label_errors(&noisy.0, &probs.0).map_err(py_err)?;
    Ok((f.flags, f.suggested))
}

#[pyfunction]
fn fuse_pair(noisy: &PyLabelVolume, probs: &PyProbVolume) -> PyResult<PyLabelVolume> {
    lf::fuse_pair(&noisy.0, &probs.0)
        .map(PyLabelVolume)
        .map_err(py_err)
}

#[pyfunction]
fn fuse_chain(models: Vec<PyProbVolume>) -> PyResult<PyLabelVolume> {
    let models: Vec<lf::ProbVolume> = models.into_iter().map(|m| m.0).collect();
    lf::fuse_chain(&models).map(PyLabelVolume).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (mask, vs_label = 1, cochlea_label = 2, z_max = 15.0))]
fn postprocess_pipeline(
    mask: &PyLabelVolume,
    vs_label: u8,
    cochlea_label: u8,
    z_max: f64,
) -> PyResult<PyLabelVolume> {
    lf::postprocess_pipeline(&mask.0, vs_label, cochlea_label, z_max)
        .map(PyLabelVolume)
        .map_err(py_err)
}

/// Component sizes of one class, largest first.
#[pyfunction]
fn component_sizes(mask: &PyLabelVolume, class_label: u8) -> Vec<usize> {
    lf::connected_components(&mask.0, class_label)
        .stats
        .iter()
        .map(|s| s.voxel_count)
        .collect()
}

#[pyfunction]
fn dice_score(pred: &PyLabelVolume, gt: &PyLabelVolume, class_label: u8) -> PyResult<f64> {
    lf::dice_score(&pred.0, &gt.0, class_label).map_err(py_err)
}

#[pyfunction]
fn assd(pred: &PyLabelVolume, gt: &PyLabelVolume, class_label: u8) -> PyResult<f64> {
    lf::assd(&pred.0, &gt.0, class_label).map_err(py_err)
}

/// `(class, dice, assd_mm)` per requested class.
#[pyfunction]
#[pyo3(signature = (pred, gt, classes = vec![1, 2]))]
fn evaluate(
    pred: &PyLabelVolume,
    gt: &PyLabelVolume,
    classes: Vec<u8>,
) -> PyResult<Vec<(u8, f64, f64)>> {
    let rec = lf::evaluate(&pred.0, &gt.0, &classes).map_err(py_err)?;
    Ok(rec
        .classes
        .iter()
        .map(|c| (c.class_label, c.dice, c.assd_mm))
        .collect())
}

#[pyfunction]
#[pyo3(signature = (probs, labels, eps = lf::DEFAULT_DICE_EPS))]
fn dice_loss(probs: &PyProbVolume, labels: &PyLabelVolume, eps: f64) -> PyResult<f64> {
    lf::dice_loss(&probs.0, &labels.0, eps, false)
        .map(|l| l.value)
        .map_err(py_err)
}

#[pyfunction]
fn ce_loss(probs: &PyProbVolume, labels: &PyLabelVolume) -> PyResult<f64> {
    lf::ce_loss(&probs.0, &labels.0, false)
        .map(|l| l.value)
        .map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (probs, labels, eps = lf::DEFAULT_DICE_EPS))]
fn seg_loss(probs: &PyProbVolume, labels: &PyLabelVolume, eps: f64) -> PyResult<f64> {
    lf::seg_loss(&probs.0, &labels.0, eps, false)
        .map(|l| l.value)
        .map_err(py_err)
}

#[pyfunction]
fn consistency_loss(teacher: &PyProbVolume, student: &PyProbVolume) -> PyResult<f64> {
    lf::consistency_loss(&teacher.0, &student.0, false)
        .map(|l| l.value)
        .map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (teacher, student, decay = lf::DEFAULT_DECAY))]
fn ema_update(
    teacher: &PyParamVector,
    student: &PyParamVector,
    decay: f64,
) -> PyResult<PyParamVector> {
    lf::ema_update(&teacher.0, &student.0, decay)
        .map(PyParamVector)
        .map_err(py_err)
}

#[pymodule]
fn labelfuse_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLabelVolume>()?;
    m.add_class::<PyProbVolume>()?;
    m.add_class::<PyParamVector>()?;
    m.add_class::<PyConfidentJoint>()?;
    m.add_function(wrap_pyfunction!(load_label, m)?)?;
    m.add_function(wrap_pyfunction!(load_prob, m)?)?;
    m.add_function(wrap_pyfunction!(save_label, m)?)?;
    m.add_function(wrap_pyfunction!(save_prob, m)?)?;
    m.add_function(wrap_pyfunction!(one_hot, m)?)?;
    m.add_function(wrap_pyfunction!(argmax_labels, m)?)?;
    m.add_function(wrap_pyfunction!(confident_joint, m)?)?;
    m.add_function(wrap_pyfunction!(find_label_errors, m)?)?;
    m.add_function(wrap_pyfunction!(fuse_pair, m)?)?;
    m.add_function(wrap_pyfunction!(fuse_chain, m)?)?;
    m.add_function(wrap_pyfunction!(postprocess_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(component_sizes, m)?)?;
    m.add_function(wrap_pyfunction!(dice_score, m)?)?;
    m.add_function(wrap_pyfunction!(assd, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(dice_loss, m)?)?;
    m.add_function(wrap_pyfunction!(ce_loss, m)?)?;
    m.add_function(wrap_pyfunction!(seg_loss, m)?)?;
    m.add_function(wrap_pyfunction!(consistency_loss, m)?)?;
    m.add_function(wrap_pyfunction!(ema_update, m)?)?;
    Ok(())
}
