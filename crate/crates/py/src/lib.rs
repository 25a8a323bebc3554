//! Python bindings for `abelian_degen`.
//!
//! Documents (subdivisions, measures) cross the boundary as JSON strings in
//! the same schema the command line tool writes.

use abelian_degen::balanced::{self as bal, AbelianFiber};
use abelian_degen::heisenberg::generators;
use abelian_degen::lattice::{self, LatticeVector};
use abelian_degen::linalg::{format_rational, parse_rational, to_f64};
use abelian_degen::monge_ampere::{self as ma, AtomicMeasure, MeasureDoc, TestFunction};
use abelian_degen::subdivision::{self, SubdivisionDoc};
use abelian_degen::theta;
use abelian_degen::Error;
use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

fn err(e: Error) -> PyErr {
    match e {
        Error::WindowExhausted(_)
        | Error::UnsupportedChart(_)
        | Error::OutsideImBand { .. }
        | Error::NotPositiveDefiniteMetric(_)
        | Error::SingularGenerator(_) => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rationals(ys: &[String]) -> PyResult<Vec<abelian_degen::linalg::Rational>> {
    ys.iter()
        .map(|s| parse_rational(s).ok_or_else(|| PyValueError::new_err(format!("cannot parse rational {s:?}"))))
        .collect()
}

/// Even positive definite integral quadratic form.
#[pyclass(name = "QForm", frozen, from_py_object)]
#[derive(Clone)]
struct PyQForm(lattice::QForm);

#[pymethods]
impl PyQForm {
    #[new]
    fn new(entries: Vec<Vec<i64>>) -> PyResult<Self> {
        lattice::QForm::new(entries).map(PyQForm).map_err(err)
    }

    #[getter]
    fn rank(&self) -> usize {
        self.0.rank()
    }

    #[getter]
    fn entries(&self) -> Vec<Vec<i64>> {
        self.0.entries().to_vec()
    }

    /// Determinant as a `p/q` string.
    fn det(&self) -> String {
        format_rational(&self.0.det())
    }

    /// `phi_bar(y) = y.Zy / 2` for rational `y` given as strings.
    fn phi_bar(&self, y: Vec<String>) -> PyResult<String> {
        lattice::phi_bar(&self.0, &rationals(&y)?).map(|v| format_rational(&v)).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("QForm({:?})", self.0.entries())
    }
}

#[pyclass(name = "Subdivision", frozen)]
struct PySubdivision(subdivision::PeriodicSubdivision);

#[pymethods]
impl PySubdivision {
    #[new]
    fn new(form: &PyQForm, k: u32) -> PyResult<Self> {
        subdivision::build_subdivision(&form.0, k).map(PySubdivision).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let doc: SubdivisionDoc = serde_json::from_str(text).map_err(json_err)?;
        subdivision::PeriodicSubdivision::from_doc(&doc).map(PySubdivision).map_err(err)
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.0.to_doc()).expect("serializable")
    }

    #[getter]
    fn level(&self) -> u32 {
        self.0.level()
    }

    /// Number of cell classes of each dimension in the quotient.
    fn cell_counts(&self) -> Vec<usize> {
        let qc = self.0.quotient_complex();
        (0..=self.0.rank()).map(|d| qc.count(d)).collect()
    }

    fn euler_characteristic(&self) -> i64 {
        self.0.quotient_complex().euler_characteristic()
    }

    /// `phi` at a rational point, exact.
    fn phi(&self, y: Vec<String>) -> PyResult<String> {
        self.0.eval_phi(&rationals(&y)?).map(|v| format_rational(&v)).map_err(err)
    }

    fn phi_f64(&self, y: Vec<String>) -> PyResult<f64> {
        self.0.eval_phi(&rationals(&y)?).map(|v| to_f64(&v)).map_err(err)
    }

    /// Monge-Ampere measure as a JSON document.
    fn ma_measure(&self) -> PyResult<String> {
        let m = ma::ma_measure(&self.0).map_err(err)?;
        Ok(serde_json::to_string(&m.to_doc()).expect("serializable"))
    }
}

/// Total mass of a measure document, as `p/q`.
#[pyfunction]
fn measure_total(text: &str) -> PyResult<String> {
    let doc: MeasureDoc = serde_json::from_str(text).map_err(json_err)?;
    let m = AtomicMeasure::from_doc(&doc).map_err(err)?;
    Ok(format_rational(&m.total()))
}

#[pyfunction]
fn rescaled_sup_gap(form: &PyQForm, k: u32) -> PyResult<String> {
    ma::rescaled_sup_gap(&form.0, k).map(|g| format_rational(&g)).map_err(err)
}

/// `(lhs, rhs)` of the weak pairing for a named test function.
#[pyfunction]
#[pyo3(signature = (form, k, f, samples=None))]
fn weak_pairing(form: &PyQForm, k: u32, f: &str, samples: Option<usize>) -> PyResult<(f64, f64)> {
    let f = TestFunction::parse(f).ok_or_else(|| PyValueError::new_err(format!("unknown test function {f:?}")))?;
    let samples = samples.unwrap_or_else(|| ma::default_reference_samples(form.0.rank()));
    ma::weak_convergence_pairing(&form.0, k, |y: &[f64]| f.eval(y), samples).map_err(err)
}

/// Residues `m` in `(Z/k)^n`, in the order used for theta vectors.
#[pyfunction]
fn residues(k: u32, n: usize) -> Vec<Vec<i64>> {
    lattice::residues(k, n).into_iter().map(|m| m.0).collect()
}

#[pyclass(name = "ThetaContext", frozen)]
struct PyThetaContext(theta::ThetaContext);

#[pymethods]
impl PyThetaContext {
    #[new]
    #[pyo3(signature = (form, k, t, eps=theta::DEFAULT_EPS, im_w_bound=theta::DEFAULT_IM_W_BOUND))]
    fn new(form: &PyQForm, k: u32, t: Complex64, eps: f64, im_w_bound: f64) -> PyResult<Self> {
        theta::ThetaContext::with_policy(form.0.clone(), k, t, eps, im_w_bound).map(PyThetaContext).map_err(err)
    }

    #[getter]
    fn truncation_radius(&self) -> usize {
        self.0.truncation_radius()
    }

    fn eval(&self, m: Vec<i64>, w: Vec<Complex64>) -> PyResult<Complex64> {
        self.0.theta_eval(&LatticeVector(m), &w).map_err(err)
    }

    fn grad(&self, m: Vec<i64>, w: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        self.0.theta_grad(&LatticeVector(m), &w).map_err(err)
    }

    /// All `theta_m(w)` in residue order.
    fn vector(&self, w: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        self.0.theta_vector(&w).map(|v| v.values).map_err(err)
    }

    /// Relative defect of the automorphy law under `w -> w + mu + k tau(p)`.
    fn quasi_periodicity_defect(&self, m: Vec<i64>, w: Vec<Complex64>, mu: Vec<i64>, p: Vec<i64>) -> PyResult<f64> {
        self.0.quasi_periodicity_defect(&LatticeVector(m), &w, &LatticeVector(mu), &LatticeVector(p)).map_err(err)
    }
}

/// Gram matrix of the theta basis with balanced-embedding diagnostics.
#[pyclass(name = "GramMatrix", frozen, get_all)]
struct PyGramMatrix {
    entries: Vec<Vec<Complex64>>,
    grid: usize,
    volume: f64,
    estimated_error: f64,
    balanced_defect: f64,
}

#[pymethods]
impl PyGramMatrix {
    fn hermitian_defect(&self) -> f64 {
        bal::GramMatrix {
            dim: self.entries.len(),
            entries: self.entries.clone(),
            grid: self.grid,
            volume: self.volume,
            estimated_error: self.estimated_error,
        }
        .hermitian_defect()
    }
}

#[pyfunction]
#[pyo3(signature = (form, k, t, grid=64))]
fn gram_matrix(form: &PyQForm, k: u32, t: Complex64, grid: usize) -> PyResult<PyGramMatrix> {
    let fiber = AbelianFiber::new(form.0.clone(), k, t).map_err(err)?;
    let g = bal::gram_matrix(&fiber, grid).map_err(err)?;
    Ok(PyGramMatrix {
        balanced_defect: bal::balanced_defect(&g),
        entries: g.entries,
        grid: g.grid,
        volume: g.volume,
        estimated_error: g.estimated_error,
    })
}

/// Dimension of the commutant of the level-`k` Heisenberg action.
#[pyfunction]
fn commutant_dimension(k: u32, n: usize) -> PyResult<usize> {
    let gens: Vec<_> = generators(k, n).iter().map(|g| g.to_dense()).collect();
    bal::commutant_dimension(&gens).map_err(err)
}

#[pymodule]
#[pyo3(name = "abelian_degen")]
fn abelian_degen_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyQForm>()?;
    m.add_class::<PySubdivision>()?;
    m.add_class::<PyThetaContext>()?;
    m.add_class::<PyGramMatrix>()?;
    m.add_function(wrap_pyfunction!(measure_total, m)?)?;
    m.add_function(wrap_pyfunction!(rescaled_sup_gap, m)?)?;
    m.add_function(wrap_pyfunction!(weak_pairing, m)?)?;
    m.add_function(wrap_pyfunction!(residues, m)?)?;
    m.add_function(wrap_pyfunction!(gram_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(commutant_dimension, m)?)?;
    Ok(())
}
