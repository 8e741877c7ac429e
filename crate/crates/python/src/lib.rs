//! Python bindings. Matrices cross the boundary as lists of rows.

use eigengeo::experiments::{bias_to_csv, figure3_grid};
use eigengeo::{EnsembleSpec, Experiment, ExperimentConfig};
use nalgebra::DMatrix;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: eigengeo::Error) -> PyErr {
    if e.is_numeric_failure() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let p = rows.len();
    if p == 0 || rows.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("expected a non-empty square list of rows"));
    }
    Ok(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn spec(ensemble: Option<&str>, p: usize) -> PyResult<EnsembleSpec> {
    match ensemble {
        Some(s) => s.parse().map_err(to_py),
        None => Ok(EnsembleSpec::estimation_default(p)),
    }
}

/// Symmetric positive-definite matrix.
#[pyclass(name = "SpdMatrix", frozen)]
struct PySpd(eigengeo::SpdMatrix);

#[pymethods]
impl PySpd {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        eigengeo::SpdMatrix::new(rows_to_matrix(&rows)?).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn diagonal(values: Vec<f64>) -> PyResult<Self> {
        eigengeo::SpdMatrix::diagonal(&values).map(Self).map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        self.0.to_rows()
    }

    /// Descending.
    fn eigenvalues(&self) -> Vec<f64> {
        self.0.eigenvalues()
    }

    fn log_det(&self) -> f64 {
        self.0.log_det()
    }

    /// `(λ, Γ)` with `λ` descending.
    fn spectral(&self) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        let sp = eigengeo::spectral_decompose(&self.0).map_err(to_py)?;
        Ok((sp.lambda().to_vec(), matrix_to_rows(sp.gamma())))
    }

    fn __repr__(&self) -> String {
        format!("SpdMatrix({:?})", self.0.to_rows())
    }
}

/// `(g_λ, g_u)`: the diagonal of the Fisher metric in spectral coordinates.
#[pyfunction]
fn metric_spectral(lambda: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let g = eigengeo::metric_spectral(&lambda).map_err(to_py)?;
    Ok((g.g_lambda().to_vec(), g.g_u().to_vec()))
}

/// Curvature slabs of the fixed-eigenvalue submanifold, one per pair `s < t`.
#[pyfunction]
fn curvature_tensor(lambda: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let t = eigengeo::curvature_tensor(&lambda).map_err(to_py)?;
    let pairs = lambda.len() * (lambda.len() - 1) / 2;
    Ok((0..pairs).map(|k| t.slab(k).to_vec()).collect())
}

#[pyfunction]
fn statistical_curvature(lambda: Vec<f64>) -> PyResult<f64> {
    eigengeo::statistical_curvature(&lambda).map_err(to_py)
}

#[pyfunction]
fn loss_first_order(lambda: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let b = eigengeo::loss_first_order(&lambda).map_err(to_py)?;
    Ok(matrix_to_rows(b.as_matrix()))
}

/// `(matrix, positive_definite)`.
#[pyfunction]
fn info_carried_by_l(lambda: Vec<f64>, n: usize) -> PyResult<(Vec<Vec<f64>>, bool)> {
    let c = eigengeo::info_carried_by_l(&lambda, n).map_err(to_py)?;
    Ok((matrix_to_rows(&c.matrix), c.positive_definite))
}

#[pyfunction]
fn kl_divergence(s: &PySpd, t: &PySpd) -> PyResult<f64> {
    eigengeo::kl_divergence(&s.0, &t.0).map_err(to_py)
}

#[pyfunction]
fn lbar(s: &PySpd, n: usize) -> PyResult<Vec<f64>> {
    Ok(eigengeo::lbar(&s.0, n).map_err(to_py)?.lambda_hat)
}

#[pyfunction]
fn lambda_hat(s: &PySpd, n: usize, gamma: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    Ok(eigengeo::lambda_hat(&s.0, n, &rows_to_matrix(&gamma)?).map_err(to_py)?.lambda_hat)
}

/// `ensemble` is `"equidistant:K"` or `"haar:m"`; the default depends on the dimension.
#[pyfunction]
#[pyo3(signature = (s, n, ensemble=None, seed=0))]
fn lambda_star(s: &PySpd, n: usize, ensemble: Option<&str>, seed: u64) -> PyResult<Vec<f64>> {
    let ens = spec(ensemble, s.0.dim())?.build(s.0.dim(), seed).map_err(to_py)?;
    Ok(eigengeo::lambda_star(&s.0, n, &ens).map_err(to_py)?.lambda_hat)
}

#[pyfunction]
fn full_lrt_stat(s: &PySpd, n: usize) -> PyResult<f64> {
    Ok(eigengeo::full_lrt_stat(&s.0, n).map_err(to_py)?.value)
}

/// Log likelihood ratio of `Σ = I` from the eigenvalues `l` of the product-sum matrix.
#[pyfunction]
#[pyo3(signature = (l, n, ensemble=None, seed=0))]
fn eigen_lrt_stat(l: Vec<f64>, n: usize, ensemble: Option<&str>, seed: u64) -> PyResult<f64> {
    let p = l.len();
    let s = match ensemble {
        Some(s) => s.parse().map_err(to_py)?,
        None => EnsembleSpec::testing_default(p),
    };
    let ens = s.build(p, seed).map_err(to_py)?;
    Ok(eigengeo::eigen_lrt_stat(&l, n, &ens).map_err(to_py)?.value)
}

/// Runs `fig3`..`fig6` or `bias` and returns the CSV text.
#[pyfunction]
#[pyo3(signature = (name, reps, seed=0, lambda=None, n=10, full_grid=false))]
fn run_experiment(
    py: Python<'_>,
    name: &str,
    reps: usize,
    seed: u64,
    lambda: Option<Vec<f64>>,
    n: usize,
    full_grid: bool,
) -> PyResult<String> {
    let exp = Experiment::from_name(name).map_err(to_py)?;
    let mut cfg = match exp {
        Experiment::Bias => ExperimentConfig::bias(&lambda.unwrap_or(vec![1.0, 1.0]), n, reps, seed),
        _ => ExperimentConfig::standard(exp, reps, seed),
    };
    cfg.n = n;
    if full_grid && exp == Experiment::Figure3 {
        cfg.grid = figure3_grid();
    }
    py.detach(|| match exp {
        Experiment::Figure3 => eigengeo::figure3_experiment(&cfg).map(|r| r.to_csv()),
        Experiment::Figure4 => eigengeo::figure4_experiment(&cfg).map(|r| r.to_csv()),
        Experiment::Figure5 => eigengeo::figure5_experiment(&cfg).map(|r| r.to_csv()),
        Experiment::Figure6 => eigengeo::figure6_experiment(&cfg).map(|r| r.to_csv()),
        Experiment::Bias => eigengeo::bias_experiment(&cfg).map(|r| bias_to_csv(&r)),
    })
    .map_err(to_py)
}

#[pymodule]
fn pyeigengeo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", eigengeo::VERSION)?;
    m.add_class::<PySpd>()?;
    m.add_function(wrap_pyfunction!(metric_spectral, m)?)?;
    m.add_function(wrap_pyfunction!(curvature_tensor, m)?)?;
    m.add_function(wrap_pyfunction!(statistical_curvature, m)?)?;
    m.add_function(wrap_pyfunction!(loss_first_order, m)?)?;
    m.add_function(wrap_pyfunction!(info_carried_by_l, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(lbar, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_hat, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_star, m)?)?;
    m.add_function(wrap_pyfunction!(full_lrt_stat, m)?)?;
    m.add_function(wrap_pyfunction!(eigen_lrt_stat, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
