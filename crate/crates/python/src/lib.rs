//! Python bindings: model construction, exact ground states, mean field,
//! embedding, guiding-state overlaps, cost estimates and the experiment
//! runner.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use embedguide::analysis::{natural_orbitals, one_rdm as rdm_of};
use embedguide::embedding::{
    dmet_effective, embed_solve, huzinaga_effective, schmidt_bath, DEFAULT_LEVEL_SHIFT, SCHMIDT_TOL,
};
use embedguide::fock::DEFAULT_MAX_DIM;
use embedguide::harness::{self, ExperimentConfig};
use embedguide::io::{model_hash, read_integrals, write_integrals};
use embedguide::meanfield::{hartree_fock as scf, MeanFieldOptions, MeanFieldResult};
use embedguide::model::{self, EpsilonSpec, Hybridization, ImpuritySpec, MolecularIntegrals};
use embedguide::qpecost::{self, GateParams, GuidingKind, QpeMode};
use embedguide::solver::{self, SolverOptions};
use embedguide::states::{determinant_to_wavefunction, mps_compress, sum_of_slater};
use embedguide::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::NotConverged { .. } | Error::Io(_) | Error::ZeroProjection { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Second-quantized Hamiltonian with chemists'-order two-body integrals.
#[pyclass(name = "Hamiltonian", module = "embedguide_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyHamiltonian {
    inner: MolecularIntegrals,
}

#[pymethods]
impl PyHamiltonian {
    /// Shipped model by name; returns `(hamiltonian, n_electrons)`.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<(Self, usize)> {
        let m = harness::builtin(name).map_err(py_err)?;
        Ok((PyHamiltonian { inner: m.integrals }, m.n_electrons))
    }

    #[staticmethod]
    fn random(n_modes: usize, seed: u64) -> PyResult<Self> {
        Ok(PyHamiltonian {
            inner: model::random_model(n_modes, seed).map_err(py_err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (n_sites, t, u, periodic=false))]
    fn hubbard(n_sites: usize, t: f64, u: f64, periodic: bool) -> PyResult<Self> {
        Ok(PyHamiltonian {
            inner: model::hubbard(n_sites, t, u, periodic).map_err(py_err)?,
        })
    }

    /// Gapped impurity model with random interactions on modes `0..m`.
    #[staticmethod]
    #[pyo3(signature = (n_modes, m, gap, seed, n_negative=None, magnitude=0.5))]
    fn impurity(
        n_modes: usize,
        m: usize,
        gap: f64,
        seed: u64,
        n_negative: Option<usize>,
        magnitude: f64,
    ) -> PyResult<Self> {
        let model = model::build_impurity_model(
            n_modes,
            m,
            &EpsilonSpec::Gapped { gap, n_negative },
            &ImpuritySpec::Random { magnitude },
            Hybridization::RandomOrthogonal,
            seed,
        )
        .map_err(py_err)?;
        Ok(PyHamiltonian { inner: model.integrals })
    }

    /// Reads an integral file; returns `(hamiltonian, n_electrons)`.
    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<(Self, usize)> {
        let f = read_integrals(&path).map_err(py_err)?;
        Ok((PyHamiltonian { inner: f.integrals }, f.n_electrons))
    }

    fn to_file(&self, path: PathBuf, n_electrons: usize) -> PyResult<()> {
        write_integrals(&self.inner, n_electrons, &path).map_err(py_err)
    }

    fn model_hash(&self, n_electrons: usize) -> String {
        model_hash(&self.inner, n_electrons)
    }

    #[getter]
    fn n_modes(&self) -> usize {
        self.inner.n_modes()
    }

    #[getter]
    fn e_core(&self) -> f64 {
        self.inner.e_core()
    }

    /// One-body matrix as nested lists.
    #[getter]
    fn h(&self) -> Vec<Vec<f64>> {
        let h = self.inner.h();
        (0..h.nrows()).map(|i| h.row(i).iter().copied().collect()).collect()
    }

    /// `(pq|rs)`
    fn g(&self, p: usize, q: usize, r: usize, s: usize) -> PyResult<f64> {
        let n = self.inner.n_modes();
        if [p, q, r, s].iter().any(|&x| x >= n) {
            return Err(PyValueError::new_err(format!("index out of range for {n} modes")));
        }
        Ok(self.inner.g(p, q, r, s))
    }

    fn __repr__(&self) -> String {
        format!("Hamiltonian(n_modes={})", self.inner.n_modes())
    }
}

/// State in a fixed particle-number sector.
#[pyclass(name = "WaveFunction", module = "embedguide_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyWaveFunction {
    inner: embedguide::WaveFunction,
}

#[pymethods]
impl PyWaveFunction {
    #[getter]
    fn n_modes(&self) -> usize {
        self.inner.n_modes()
    }

    #[getter]
    fn n_electrons(&self) -> usize {
        self.inner.n_electrons()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Occupation bitmasks, bit `p` for mode `p`.
    #[getter]
    fn states(&self) -> Vec<u64> {
        self.inner.basis().states().to_vec()
    }

    #[getter]
    fn coeffs(&self) -> Vec<Complex64> {
        self.inner.coeffs().to_vec()
    }

    fn norm(&self) -> f64 {
        self.inner.norm()
    }

    /// `<self|other>`
    fn overlap(&self, other: &PyWaveFunction) -> PyResult<Complex64> {
        self.inner.inner(&other.inner).map_err(py_err)
    }

    fn energy(&self, ham: &PyHamiltonian) -> PyResult<f64> {
        solver::expectation(&ham.inner, &self.inner).map_err(py_err)
    }

    /// `gamma_pq = <a_p^dag a_q>` as nested lists.
    fn one_rdm(&self) -> PyResult<Vec<Vec<Complex64>>> {
        let g = rdm_of(&self.inner).map_err(py_err)?.gamma;
        Ok((0..g.nrows()).map(|i| g.row(i).iter().copied().collect()).collect())
    }

    /// Natural occupation numbers, descending.
    fn natural_occupations(&self) -> PyResult<Vec<f64>> {
        let rdm = rdm_of(&self.inner).map_err(py_err)?;
        Ok(natural_orbitals(&rdm).0)
    }

    /// `|<SOS(L)|self>|` and the captured weight.
    fn sos_overlap(&self, l: usize) -> PyResult<(f64, f64)> {
        let s = sum_of_slater(&self.inner, l).map_err(py_err)?;
        let wf = s.to_wavefunction(self.inner.basis()).map_err(py_err)?;
        Ok((wf.inner(&self.inner).map_err(py_err)?.norm(), s.captured_weight))
    }

    /// `|<MPS(D)|self>|` with the MPS normalized on the full Fock space.
    fn mps_overlap(&self, d: usize) -> PyResult<f64> {
        let m = mps_compress(&self.inner, d).map_err(py_err)?;
        Ok(m.overlap(&self.inner).map_err(py_err)?.norm())
    }

    fn __repr__(&self) -> String {
        format!(
            "WaveFunction(n_modes={}, n_electrons={}, dim={})",
            self.inner.n_modes(),
            self.inner.n_electrons(),
            self.inner.dim()
        )
    }
}

#[pyclass(name = "MeanField", module = "embedguide_py", frozen, skip_from_py_object)]
struct PyMeanField {
    inner: MeanFieldResult,
}

#[pymethods]
impl PyMeanField {
    #[getter]
    fn energy(&self) -> f64 {
        self.inner.energy
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn orbital_energies(&self) -> Vec<f64> {
        self.inner.orbital_energies.clone()
    }

    /// The Hartree-Fock determinant as a sector state.
    fn state(&self) -> PyResult<PyWaveFunction> {
        Ok(PyWaveFunction {
            inner: determinant_to_wavefunction(&self.inner.determinant, DEFAULT_MAX_DIM).map_err(py_err)?,
        })
    }
}

/// `(energy, state)` of the lowest eigenpair in the `n`-electron sector.
#[pyfunction]
#[pyo3(signature = (ham, n_electrons, seed=None))]
fn ground_state(ham: &PyHamiltonian, n_electrons: usize, seed: Option<u64>) -> PyResult<(f64, PyWaveFunction)> {
    let mut opts = SolverOptions::default();
    if let Some(s) = seed {
        opts.seed = s;
    }
    let gs = solver::ground_state(&ham.inner, n_electrons, &opts).map_err(py_err)?;
    Ok((gs.energy, PyWaveFunction { inner: gs.state }))
}

/// Full ascending spectrum by dense diagonalization.
#[pyfunction]
fn dense_spectrum(ham: &PyHamiltonian, n_electrons: usize) -> PyResult<Vec<f64>> {
    solver::dense_spectrum(&ham.inner, n_electrons).map_err(py_err)
}

#[pyfunction]
fn hartree_fock(ham: &PyHamiltonian, n_electrons: usize) -> PyResult<PyMeanField> {
    Ok(PyMeanField {
        inner: scf(&ham.inner, n_electrons, &MeanFieldOptions::default()).map_err(py_err)?,
    })
}

/// Builds and solves a DMET or Huzinaga embedding problem.
#[pyfunction]
#[pyo3(signature = (ham, n_electrons, scheme, fragment, mu=None))]
fn embed<'py>(
    py: Python<'py>,
    ham: &PyHamiltonian,
    n_electrons: usize,
    scheme: &str,
    fragment: Vec<usize>,
    mu: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let mf = scf(&ham.inner, n_electrons, &MeanFieldOptions::default()).map_err(py_err)?;
    let prob = match scheme {
        "dmet" => {
            let part = schmidt_bath(&mf.determinant, &fragment, SCHMIDT_TOL).map_err(py_err)?;
            dmet_effective(&ham.inner, &part)
        }
        "huzinaga" => huzinaga_effective(&ham.inner, &mf, &fragment, mu.unwrap_or(DEFAULT_LEVEL_SHIFT)),
        other => return Err(PyValueError::new_err(format!("unknown scheme '{other}'"))),
    }
    .map_err(py_err)?;
    let sol = embed_solve(&prob, &SolverOptions::default()).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("e_total", sol.e_total)?;
    d.set_item("e_active", sol.e_active)?;
    d.set_item("env_energy", prob.env_energy)?;
    d.set_item("n_active_modes", prob.n_active_modes())?;
    d.set_item("n_active", prob.n_active)?;
    d.set_item("leakage", sol.leakage)?;
    d.set_item("guiding", PyWaveFunction { inner: sol.guiding })?;
    Ok(d)
}

#[pyfunction]
fn qpe_cost<'py>(py: Python<'py>, eta: f64, eps: f64, mode: &str) -> PyResult<Bound<'py, PyDict>> {
    let mode: QpeMode = mode.parse().map_err(py_err)?;
    let r = qpecost::qpe_cost(eta, eps, mode).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("repetitions", r.repetitions)?;
    d.set_item("max_evolution_time", r.max_evolution_time)?;
    d.set_item("total_evolution_time", r.total_evolution_time)?;
    d.set_item("delta", r.delta)?;
    d.set_item("assumptions", r.assumptions)?;
    Ok(d)
}

/// `(two_qubit, toffoli)` preparation cost of a guiding state.
#[pyfunction]
#[pyo3(signature = (kind, n_modes=None, n_electrons=None, l=None, k_exc=None, bond_dim=None))]
fn gate_counts(
    kind: &str,
    n_modes: Option<usize>,
    n_electrons: Option<usize>,
    l: Option<usize>,
    k_exc: Option<usize>,
    bond_dim: Option<usize>,
) -> PyResult<(f64, Option<f64>)> {
    let kind: GuidingKind = kind.parse().map_err(py_err)?;
    let params = GateParams {
        n_modes,
        n_electrons,
        l,
        k_exc,
        bond_dim,
    };
    let g = qpecost::guiding_gate_counts(kind, &params).map_err(py_err)?;
    Ok((g.two_qubit, g.toffoli))
}

/// Static diagnostics for a config file; empty when it can run.
#[pyfunction]
fn validate_config(path: PathBuf) -> PyResult<Vec<String>> {
    let cfg = ExperimentConfig::load(&path).map_err(py_err)?;
    Ok(harness::validate(&cfg).iter().map(|d| d.to_string()).collect())
}

/// Runs a config and returns the written file names.
#[pyfunction]
#[pyo3(signature = (path, out=None))]
fn run_config(path: PathBuf, out: Option<PathBuf>) -> PyResult<Vec<String>> {
    let mut cfg = ExperimentConfig::load(&path).map_err(py_err)?;
    if let Some(o) = out {
        cfg.output = o;
    }
    let report = harness::run(&cfg).map_err(|e| match e {
        harness::RunError::Validation(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    })?;
    Ok(report.manifest.tasks.iter().flat_map(|t| t.files.clone()).collect())
}

#[pymodule]
fn embedguide_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHamiltonian>()?;
    m.add_class::<PyWaveFunction>()?;
    m.add_class::<PyMeanField>()?;
    m.add_function(wrap_pyfunction!(ground_state, m)?)?;
    m.add_function(wrap_pyfunction!(dense_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(hartree_fock, m)?)?;
    m.add_function(wrap_pyfunction!(embed, m)?)?;
    m.add_function(wrap_pyfunction!(qpe_cost, m)?)?;
    m.add_function(wrap_pyfunction!(gate_counts, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
