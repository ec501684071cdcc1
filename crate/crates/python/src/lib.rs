//! Python bindings: configuration, the frame-by-frame filter, the batch
//! pipeline and the evaluation metrics.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use tracker::cube_io;
use tracker::filter::TbdGlmbFilter;
use tracker::measurement::RadarCube;
use tracker::metrics;
use tracker::pipeline;
use tracker::rfs::Label;
use tracker::RunConfig;

fn runtime_err(e: tracker::TrackingError) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Run configuration, parsed from the key-value text format.
#[pyclass(name = "Config")]
#[derive(Clone)]
struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    /// Default configuration: the canned two-vehicle scenario.
    #[new]
    fn new() -> Self {
        Self {
            inner: RunConfig::default(),
        }
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        RunConfig::parse(text)
            .map(|inner| Self { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        RunConfig::parse_file(&path)
            .map(|inner| Self { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn serialize(&self) -> String {
        self.inner.serialize()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn n_frames(&self) -> usize {
        self.inner.n_frames
    }

    #[setter]
    fn set_n_frames(&mut self, n: usize) {
        self.inner.n_frames = n;
    }
}

/// One cube of intensities.
#[pyclass(name = "RadarCube")]
struct PyRadarCube {
    inner: RadarCube,
}

#[pymethods]
impl PyRadarCube {
    #[getter]
    fn timestamp(&self) -> f64 {
        self.inner.timestamp
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        let d = self.inner.grid.dims();
        (d[0], d[1], d[2])
    }

    fn intensities(&self) -> Vec<f64> {
        self.inner.intensities.clone()
    }
}

/// Read every cube record from a stream file.
#[pyfunction]
fn read_cubes(path: PathBuf) -> PyResult<Vec<PyRadarCube>> {
    let cubes = cube_io::read_stream(&path).map_err(runtime_err)?;
    Ok(cubes.into_iter().map(|inner| PyRadarCube { inner }).collect())
}

/// Frame-by-frame tracker. Feed cubes in order; each step returns the state
/// estimates as (birth_time, birth_index, x, xdot, y, ydot, theta) tuples.
#[pyclass(name = "Filter")]
struct PyFilter {
    inner: TbdGlmbFilter,
}

#[pymethods]
impl PyFilter {
    #[new]
    fn new(config: &PyConfig) -> PyResult<Self> {
        config
            .inner
            .validate()
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self {
            inner: TbdGlmbFilter::new(
                config.inner.sensor_model(),
                config.inner.motion_params(),
                config.inner.birth_params(),
                config.inner.filter_params(),
                config.inner.seed,
            ),
        })
    }

    fn step(&mut self, cube: &PyRadarCube) -> PyResult<Vec<(u32, u32, f64, f64, f64, f64, f64)>> {
        let estimates = self.inner.step(&cube.inner).map_err(runtime_err)?;
        Ok(estimates
            .into_iter()
            .map(|(l, s)| (l.birth_time, l.birth_index, s[0], s[1], s[2], s[3], s[4]))
            .collect())
    }

    /// Posterior cardinality distribution after the last step.
    fn cardinality_distribution(&self) -> Vec<f64> {
        self.inner.density.cardinality_distribution()
    }

    #[getter]
    fn n_hypotheses(&self) -> usize {
        self.inner.density.hypotheses.len()
    }
}

/// Render the configured scenario; writes cubes.tbdc and truth.csv.
#[pyfunction]
#[pyo3(signature = (config, out_dir, threads=None))]
fn simulate(config: &PyConfig, out_dir: PathBuf, threads: Option<usize>) -> PyResult<(String, String)> {
    let out = pipeline::simulate(&config.inner, &out_dir, threads).map_err(runtime_err)?;
    Ok((
        out.cubes_path.display().to_string(),
        out.truth_path.display().to_string(),
    ))
}

/// Track a cube stream; writes the track CSV and run summary JSON.
#[pyfunction]
#[pyo3(signature = (config, cubes, out_csv, max_frames=None, threads=None))]
fn track(
    config: &PyConfig,
    cubes: PathBuf,
    out_csv: PathBuf,
    max_frames: Option<usize>,
    threads: Option<usize>,
) -> PyResult<usize> {
    let out = pipeline::track(&config.inner, &cubes, &out_csv, max_frames, threads)
        .map_err(runtime_err)?;
    Ok(out.records.len())
}

/// Join tracks with truth; writes the metrics CSV and returns
/// (mean_ospa, label_consistency).
#[pyfunction]
#[pyo3(signature = (tracks_csv, truth_csv, out_csv, ospa_cutoff=5.0, ospa_order=1.0, gate=2.0))]
fn evaluate(
    tracks_csv: PathBuf,
    truth_csv: PathBuf,
    out_csv: PathBuf,
    ospa_cutoff: f64,
    ospa_order: f64,
    gate: f64,
) -> PyResult<(f64, f64)> {
    let out = pipeline::evaluate(&tracks_csv, &truth_csv, &out_csv, ospa_cutoff, ospa_order, gate)
        .map_err(runtime_err)?;
    Ok((out.mean_ospa, out.label_consistency))
}

/// OSPA distance between two planar point sets.
#[pyfunction]
#[pyo3(signature = (estimates, truth, cutoff=5.0, order=1.0))]
fn ospa(estimates: Vec<(f64, f64)>, truth: Vec<(f64, f64)>, cutoff: f64, order: f64) -> f64 {
    metrics::ospa(&estimates, &truth, cutoff, order)
}

/// Per-target label consistency from record tuples
/// (k, birth_time, birth_index, x, y) and truth tuples (k, id, x, y).
#[pyfunction]
#[pyo3(signature = (estimates, truth, gate=2.0))]
fn label_consistency(
    estimates: Vec<(usize, u32, u32, f64, f64)>,
    truth: Vec<(usize, u32, f64, f64)>,
    gate: f64,
) -> Vec<(u32, f64)> {
    let est: Vec<metrics::EstimateRecord> = estimates
        .into_iter()
        .map(|(k, bt, bi, x, y)| metrics::EstimateRecord {
            k,
            label: Label::new(bt, bi),
            x,
            y,
        })
        .collect();
    let tru: Vec<metrics::TruthRecord> = truth
        .into_iter()
        .map(|(k, id, x, y)| metrics::TruthRecord { k, id, x, y })
        .collect();
    metrics::label_consistency_per_target(&est, &tru, gate)
        .into_iter()
        .collect()
}

#[pymodule]
fn tbd_glmb(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyRadarCube>()?;
    m.add_class::<PyFilter>()?;
    m.add_function(wrap_pyfunction!(read_cubes, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(track, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(ospa, m)?)?;
    m.add_function(wrap_pyfunction!(label_consistency, m)?)?;
    Ok(())
}
