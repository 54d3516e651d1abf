//! Python module `cchannels`: thin wrappers over the coupled-channel solvers.

use std::path::Path;

use coupled_channels::diagnostics::{
    classify_coupling, classify_term as classify_term_core, detect_inversion_intervals,
    effective_kinetic_energy,
};
use coupled_channels::oracle2d::{self, Grid2D};
use coupled_channels::reduction::{ReductionRecipe, TwoBodyPotential};
use coupled_channels::scattering::{
    solve_scattering, solve_scattering_from_right, ScatteringResult,
};
use coupled_channels::scenario::{load_scenario, ScenarioFile};
use coupled_channels::spectra::{find_bound_states, BoundStateResult};
use coupled_channels::{
    build_grid, validate_scenario, BoundaryKind, ChannelSet, Error, PotentialMatrixField,
    Scenario as CoreScenario,
};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Validation(v) => PyValueError::new_err(v.join("; ")),
        Error::Scenario(m) | Error::Domain(m) => PyValueError::new_err(m),
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse_boundary(name: &str) -> PyResult<BoundaryKind> {
    serde_json::from_value(serde_json::Value::String(name.into()))
        .map_err(|_| PyValueError::new_err(format!("unknown boundary {name:?}")))
}

#[pyclass(name = "Scenario", module = "cchannels", frozen)]
struct PyScenario {
    inner: CoreScenario,
}

#[pymethods]
impl PyScenario {
    /// `potential[i][a][b]` on a uniform grid from `x_min` to `x_max`.
    #[new]
    #[pyo3(signature = (x_min, x_max, thresholds, potential, boundary = "bound-box"))]
    fn new(
        x_min: f64,
        x_max: f64,
        thresholds: Vec<f64>,
        potential: Vec<Vec<Vec<f64>>>,
        boundary: &str,
    ) -> PyResult<Self> {
        let n = thresholds.len();
        let grid = build_grid(x_min, x_max, potential.len()).map_err(to_py)?;
        let mut field = PotentialMatrixField::zeros(grid, n);
        for (i, m) in potential.iter().enumerate() {
            if m.len() != n || m.iter().any(|r| r.len() != n) {
                return Err(PyValueError::new_err(format!(
                    "potential[{i}] is not {n}x{n}"
                )));
            }
            for a in 0..n {
                for b in a..n {
                    field.set_symmetric(i, a, b, m[a][b]);
                }
            }
        }
        let inner = CoreScenario::new(
            ChannelSet::new(thresholds),
            field,
            parse_boundary(boundary)?,
        );
        Ok(PyScenario { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (path, n_ch = None))]
    fn from_file(path: &str, n_ch: Option<usize>) -> PyResult<Self> {
        let l = load_scenario(Path::new(path), n_ch).map_err(to_py)?;
        Ok(PyScenario { inner: l.scenario })
    }

    /// Scenario JSON text; tabulated paths resolve against `base_dir`.
    #[staticmethod]
    #[pyo3(signature = (text, base_dir = ".", n_ch = None))]
    fn from_json(text: &str, base_dir: &str, n_ch: Option<usize>) -> PyResult<Self> {
        let f = ScenarioFile::parse(text).map_err(to_py)?;
        let l = f.build(Path::new(base_dir), n_ch).map_err(to_py)?;
        Ok(PyScenario { inner: l.scenario })
    }

    #[getter]
    fn n_channels(&self) -> usize {
        self.inner.n_channels()
    }

    #[getter]
    fn thresholds(&self) -> Vec<f64> {
        self.inner.channels.thresholds().to_vec()
    }

    #[getter]
    fn x(&self) -> Vec<f64> {
        self.inner.grid.points()
    }

    /// Every validation problem, empty when the scenario is usable.
    fn validate(&self) -> Vec<String> {
        validate_scenario(&self.inner)
    }

    fn potential(&self, a: usize, b: usize) -> PyResult<Vec<f64>> {
        let n = self.inner.n_channels();
        if a >= n || b >= n {
            return Err(PyValueError::new_err("channel index out of range"));
        }
        Ok((0..self.inner.grid.n_points())
            .map(|i| self.inner.potential.get(i, a, b))
            .collect())
    }

    fn with_diagonal_shift(&self, c: f64) -> Self {
        PyScenario {
            inner: self.inner.with_diagonal_shift(c),
        }
    }

    fn bound_states(&self, py: Python<'_>, e_min: f64, e_max: f64) -> PyResult<Vec<PyBoundState>> {
        self.inner.ensure_valid().map_err(to_py)?;
        let states = py
            .detach(|| find_bound_states(&self.inner, e_min, e_max))
            .map_err(to_py)?;
        Ok(states
            .into_iter()
            .map(|inner| PyBoundState { inner })
            .collect())
    }

    #[pyo3(signature = (energy, from_right = false))]
    fn scatter(&self, py: Python<'_>, energy: f64, from_right: bool) -> PyResult<PyScattering> {
        let r = py
            .detach(|| {
                if from_right {
                    solve_scattering_from_right(&self.inner, energy)
                } else {
                    solve_scattering(&self.inner, energy)
                }
            })
            .map_err(to_py)?;
        Ok(PyScattering { inner: r })
    }

    /// `E_kin[alpha][i]`, `None` at nodes of component `alpha`.
    fn effective_kinetic_energy(&self, state: &PyBoundState) -> PyResult<Vec<Vec<Option<f64>>>> {
        let p = effective_kinetic_energy(&self.inner, &state.inner.wavefunction).map_err(to_py)?;
        Ok((0..p.n_channels())
            .map(|a| (0..p.n_points()).map(|i| p.get(i, a)).collect())
            .collect())
    }

    /// Class codes `A`/`R`/`N`/`U` keyed by 0-based `(target, source)`.
    fn classify(&self, state: &PyBoundState) -> PyResult<Vec<((usize, usize), String)>> {
        let diags = classify_coupling(&self.inner, &state.inner.wavefunction).map_err(to_py)?;
        let n = self.inner.n_channels();
        let mut out: Vec<((usize, usize), String)> = (0..n)
            .flat_map(|a| {
                (0..n)
                    .filter(move |&b| b != a)
                    .map(move |b| ((a, b), String::new()))
            })
            .collect();
        for d in diags {
            let slot = out
                .iter_mut()
                .find(|(k, _)| *k == (d.target, d.source))
                .expect("pair present");
            slot.1.push(d.classification.code());
        }
        Ok(out)
    }

    /// `(target, source, x_start, x_end)` for each inverted run.
    fn inversion_intervals(&self, state: &PyBoundState) -> PyResult<Vec<(usize, usize, f64, f64)>> {
        let diags = classify_coupling(&self.inner, &state.inner.wavefunction).map_err(to_py)?;
        Ok(detect_inversion_intervals(&diags)
            .into_iter()
            .map(|iv| (iv.target, iv.source, iv.x_start, iv.x_end))
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(n_channels={}, x=[{}, {}], n_points={}, boundary={:?})",
            self.inner.n_channels(),
            self.inner.grid.x_min(),
            self.inner.grid.x_max(),
            self.inner.grid.n_points(),
            self.inner.boundary
        )
    }
}

#[pyclass(name = "BoundState", module = "cchannels", frozen)]
struct PyBoundState {
    inner: BoundStateResult,
}

#[pymethods]
impl PyBoundState {
    #[getter]
    fn energy(&self) -> f64 {
        self.inner.energy
    }

    #[getter]
    fn nodes(&self) -> Vec<usize> {
        self.inner.nodes_per_channel.clone()
    }

    #[getter]
    fn matching_residual(&self) -> f64 {
        self.inner.matching_residual
    }

    /// Component `alpha` on the grid.
    fn component(&self, alpha: usize) -> PyResult<Vec<f64>> {
        if alpha >= self.inner.wavefunction.n_channels() {
            return Err(PyValueError::new_err("channel index out of range"));
        }
        Ok(self.inner.wavefunction.component(alpha))
    }

    fn __repr__(&self) -> String {
        format!(
            "BoundState(energy={}, nodes={:?})",
            self.inner.energy, self.inner.nodes_per_channel
        )
    }
}

#[pyclass(name = "ScatteringResult", module = "cchannels", frozen)]
struct PyScattering {
    inner: ScatteringResult,
}

#[pymethods]
impl PyScattering {
    #[getter]
    fn energy(&self) -> f64 {
        self.inner.energy
    }

    /// Channels open on the incident side.
    #[getter]
    fn open_channels(&self) -> Vec<usize> {
        self.inner.open_channels.clone()
    }

    #[getter]
    fn open_far_side(&self) -> Vec<usize> {
        self.inner.open_right.clone()
    }

    #[getter]
    fn unitarity_defect(&self) -> f64 {
        self.inner.unitarity_defect
    }

    /// `R2[out][in]`, flux-weighted, indices into `open_channels`.
    #[getter]
    fn reflection(&self) -> Vec<Vec<f64>> {
        let n = self.inner.open_channels.len();
        (0..n)
            .map(|b| {
                (0..n)
                    .map(|a| self.inner.reflection_probability(b, a))
                    .collect()
            })
            .collect()
    }

    /// `T2[out][in]`, `out` indexes `open_far_side`.
    #[getter]
    fn transmission(&self) -> Vec<Vec<f64>> {
        let n = self.inner.open_channels.len();
        (0..self.inner.open_right.len())
            .map(|b| {
                (0..n)
                    .map(|a| self.inner.transmission_probability(b, a))
                    .collect()
            })
            .collect()
    }
}

/// Classification code of one coupling term at one point.
#[pyfunction]
#[pyo3(signature = (coupling, psi_target, psi_source, target_scale = None))]
fn classify_term(
    coupling: f64,
    psi_target: f64,
    psi_source: f64,
    target_scale: Option<f64>,
) -> String {
    let scale = target_scale.unwrap_or(psi_target.abs());
    classify_term_core(coupling, psi_target, psi_source, scale)
        .2
        .code()
        .to_string()
}

/// Lowest eigenvalues of the 2D finite-difference problem. `spec` is the JSON
/// form of a two-variable potential.
#[pyfunction]
fn solve_2d_eigen(
    py: Python<'_>,
    spec: &str,
    x: (f64, f64, usize),
    xi: (f64, f64, usize),
    n_states: usize,
) -> PyResult<Vec<f64>> {
    let spec: TwoBodyPotential =
        serde_json::from_str(spec).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let g = Grid2D::new(x, xi).map_err(to_py)?;
    py.detach(|| oracle2d::solve_2d_eigen(&spec, &g, n_states))
        .map_err(to_py)
}

/// `[(n_ch, E0), ...]` and the monotonicity flag. `recipe` is reduction JSON
/// (`basis`, `spec`, optional `n_xi`).
#[pyfunction]
fn convergence_study(
    py: Python<'_>,
    recipe: &str,
    x: (f64, f64, usize),
    channel_counts: Vec<usize>,
) -> PyResult<(Vec<(usize, f64)>, bool)> {
    let recipe: ReductionRecipe =
        serde_json::from_str(recipe).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let grid = build_grid(x.0, x.1, x.2).map_err(to_py)?;
    let s = py
        .detach(|| oracle2d::convergence_study(&recipe, &grid, &channel_counts))
        .map_err(to_py)?;
    Ok((s.rows, s.monotone))
}

#[pymodule]
fn cchannels(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyBoundState>()?;
    m.add_class::<PyScattering>()?;
    m.add_function(wrap_pyfunction!(classify_term, m)?)?;
    m.add_function(wrap_pyfunction!(solve_2d_eigen, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_study, m)?)?;
    Ok(())
}
