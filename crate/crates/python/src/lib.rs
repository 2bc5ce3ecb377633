//! Python bindings: specs, realizations, counts, measures, criteria and embeddings.
//! Structured results come back as plain dicts (via their JSON form).

use moranlab::counting;
use moranlab::criteria;
use moranlab::embedding::{self, Source};
use moranlab::expr::Expr;
use moranlab::io::{self, LoadedSpec};
use moranlab::measure;
use moranlab::profiles;
use moranlab::realization::{self, Realization};
use moranlab::reproduce;
use moranlab::svg;
use moranlab::{corpus, Error, Scalar, Word};
use num_bigint::BigUint;
use num_rational::BigRational;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(moranlab, MoranError, PyException, "Raised for every moranlab error; the message starts with the error kind.");

fn err(e: Error) -> PyErr {
    MoranError::new_err(format!("{}: {e}", e.name()))
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| MoranError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Reads an exact value such as `"1/3"`, `"0.25"` or `"6^-4"`.
fn exact(src: &str) -> PyResult<BigRational> {
    let v = Expr::parse(src).and_then(|e| e.eval(&[])).map_err(|e| err(e.into()))?;
    match v {
        Scalar::Exact(q) => Ok(q),
        Scalar::Real(_) => Err(MoranError::new_err(format!("`{src}` is not an exact rational"))),
    }
}

#[pyclass(name = "Spec", module = "moranlab", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySpec {
    inner: LoadedSpec,
}

#[pymethods]
impl PySpec {
    /// A named corpus construction, e.g. `"cantor"` or `"pab"`.
    #[staticmethod]
    fn corpus(name: &str) -> PyResult<Self> {
        let n = corpus::by_name(name).ok_or_else(|| err(Error::UnknownExample(name.to_string())))?;
        let text = io::spec_to_toml(n.name, &n.spec, &n.placement);
        Ok(PySpec { inner: io::parse_spec(&text, n.name).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (text, name = "spec"))]
    fn from_toml(text: &str, name: &str) -> PyResult<Self> {
        Ok(PySpec { inner: io::parse_spec(text, name).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(PySpec { inner: io::load_spec(&path).map_err(err)? })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn placement(&self) -> &'static str {
        self.inner.placement.name()
    }

    /// Hex SHA-256 of the source text.
    #[getter]
    fn digest(&self) -> &str {
        &self.inner.digest
    }

    fn to_toml(&self) -> String {
        io::spec_to_toml(&self.inner.name, &self.inner.spec, &self.inner.placement)
    }

    fn n(&self, k: usize) -> PyResult<u64> {
        self.inner.spec.n(k).map_err(err)
    }

    fn c(&self, k: usize) -> PyResult<f64> {
        Ok(self.inner.spec.c(k).map_err(err)?.to_f64())
    }

    /// `r_k |J|` as an exact fraction string, or None when irrational.
    fn scale(&self, k: usize) -> PyResult<Option<String>> {
        Ok(self.inner.spec.scale_exact(k).map_err(err)?.map(|q| q.to_string()))
    }

    fn alpha(&self, k: usize) -> PyResult<f64> {
        self.inner.spec.alpha(k).map_err(err)
    }

    /// Level `k` with `r_k |J| < r <= r_(k-1) |J|`.
    fn scale_index(&self, r: &str) -> PyResult<usize> {
        self.inner.spec.scale_index(&Scalar::Exact(exact(r)?)).map_err(err)
    }

    /// `n_1 ⋯ n_k`.
    fn phi(&self, k: usize) -> PyResult<BigUint> {
        self.inner.spec.phi_level(k).map_err(err)
    }

    fn exact_limit(&self) -> Option<f64> {
        self.inner.spec.exact_limit()
    }

    #[pyo3(signature = (depth = 1000, window_fraction = 0.5))]
    fn dims<'py>(&self, py: Python<'py>, depth: usize, window_fraction: f64) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &profiles::dims(&self.inner.spec, depth, window_fraction).map_err(err)?)
    }

    fn realize(&self, depth: usize) -> PyResult<PyRealization> {
        let r = realization::realize(&self.inner.spec, self.inner.placement.clone(), depth).map_err(err)?;
        Ok(PyRealization { inner: r })
    }

    fn __repr__(&self) -> String {
        format!("Spec({:?}, placement={:?})", self.inner.name, self.inner.placement.name())
    }
}

#[pyclass(name = "Realization", module = "moranlab", frozen)]
struct PyRealization {
    inner: Realization,
}

#[pymethods]
impl PyRealization {
    #[getter]
    fn depth(&self) -> usize {
        self.inner.depth
    }

    fn count_at(&self, level: usize) -> PyResult<u128> {
        self.inner.count_at(level).map_err(err)
    }

    /// Level-`level` intervals as `(left, right)` fraction strings.
    fn intervals(&self, level: usize) -> PyResult<Vec<(String, String)>> {
        let iv = self.inner.intervals(level).map_err(err)?;
        Ok(iv.into_iter().map(|(a, b)| (a.to_string(), b.to_string())).collect())
    }

    fn covering_number(&self, r: &str) -> PyResult<BigUint> {
        counting::covering_number(&self.inner, &exact(r)?).map_err(err)
    }

    fn packing_number(&self, r: &str) -> PyResult<BigUint> {
        counting::packing_number(&self.inner, &exact(r)?).map_err(err)
    }

    /// Mass of the cylinder named by a word such as `"121"`.
    fn cylinder_mass(&self, word: &str) -> PyResult<String> {
        let w = Word::parse(word).map_err(err)?;
        Ok(measure::cylinder_measure(&self.inner.spec, &w).map_err(err)?.mass.to_string())
    }

    /// Certified bracket `(lo, hi, level)` for the ball of radius `r` about the point `x`.
    fn ball_measure(&self, x: &str, r: &str) -> PyResult<(String, String, usize)> {
        let b = measure::ball_measure_at(&self.inner, &exact(x)?, &exact(r)?, None).map_err(err)?;
        Ok((b.lo.to_string(), b.hi.to_string(), b.level))
    }

    #[pyo3(signature = (depth = None))]
    fn svg(&self, depth: Option<usize>) -> PyResult<String> {
        svg::render_realization(&self.inner, depth.unwrap_or(self.inner.depth)).map_err(err)
    }
}

#[pyfunction]
fn corpus_names() -> Vec<&'static str> {
    corpus::all().into_iter().map(|n| n.name).collect()
}

#[pyfunction]
#[pyo3(signature = (a, b, depth = 1000, tail_fraction = 0.5))]
fn chi<'py>(py: Python<'py>, a: &PySpec, b: &PySpec, depth: usize, tail_fraction: f64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &profiles::chi(&a.inner.spec, &b.inner.spec, depth, tail_fraction).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (spec, k0 = 1, depth = 1000, slack = criteria::DEFAULT_SLACK))]
fn ud_sufficient<'py>(py: Python<'py>, spec: &PySpec, k0: usize, depth: usize, slack: f64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &criteria::ud_sufficient(&spec.inner.spec, k0, depth, slack).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (a, b, depth = 1000, slack = criteria::DEFAULT_SLACK))]
fn embed_condition<'py>(py: Python<'py>, a: &PySpec, b: &PySpec, depth: usize, slack: f64) -> PyResult<Bound<'py, PyAny>> {
    let grid = criteria::default_r0_grid(&a.inner.spec, &b.inner.spec);
    to_dict(py, &criteria::embed_condition(&a.inner.spec, &b.inner.spec, &grid, depth, slack).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (a, b, depth = 1000, slack = criteria::DEFAULT_SLACK))]
fn ql_equivalent<'py>(py: Python<'py>, a: &PySpec, b: &PySpec, depth: usize, slack: f64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &criteria::ql_equivalent(&a.inner.spec, &b.inner.spec, depth, slack).map_err(err)?)
}

/// Greedy ball embedding of `source` into `target`; returns the distortion statistics.
#[pyfunction]
#[pyo3(signature = (source, target, eta = "1/5", levels = 6))]
fn build_embedding<'py>(py: Python<'py>, source: &PyRealization, target: &PyRealization, eta: &str, levels: usize) -> PyResult<Bound<'py, PyAny>> {
    let map = embedding::build_embedding(Source::Moran(&source.inner), &target.inner, &exact(eta)?, levels).map_err(err)?;
    to_dict(py, &map.stats)
}

/// Quasi-Lipschitz bijection between two specs; returns the sampled distortion statistics.
#[pyfunction]
#[pyo3(signature = (a, b, eta = "1/6", levels = 12, pairs = embedding::PAIRS_PER_LEVEL, seed = 0))]
fn ql_bijection<'py>(py: Python<'py>, a: &PySpec, b: &PySpec, eta: &str, levels: usize, pairs: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let q = embedding::ql_bijection(
        (&a.inner.spec, &a.inner.placement),
        (&b.inner.spec, &b.inner.placement),
        &exact(eta)?,
        levels,
        pairs,
        seed,
    )
    .map_err(err)?;
    to_dict(py, &q.map.stats)
}

/// Binary codes of `m` siblings, as `"0"`/`"1"` strings.
#[pyfunction]
fn sigma_codes(m: u64) -> PyResult<Vec<String>> {
    let sc = embedding::sigma_children(m).map_err(err)?;
    Ok(sc.codes.iter().map(|c| c.iter().map(|b| char::from(b'0' + b)).collect()).collect())
}

/// Re-runs one of the worked examples (Example1, Example2, EX, PAB, ExUD).
#[pyfunction(name = "reproduce")]
fn reproduce_example<'py>(py: Python<'py>, example: &str) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &reproduce::reproduce(example).map_err(err)?)
}

#[pymodule(name = "moranlab")]
fn python_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MoranError", m.py().get_type::<MoranError>())?;
    m.add_class::<PySpec>()?;
    m.add_class::<PyRealization>()?;
    m.add_function(wrap_pyfunction!(corpus_names, m)?)?;
    m.add_function(wrap_pyfunction!(chi, m)?)?;
    m.add_function(wrap_pyfunction!(ud_sufficient, m)?)?;
    m.add_function(wrap_pyfunction!(embed_condition, m)?)?;
    m.add_function(wrap_pyfunction!(ql_equivalent, m)?)?;
    m.add_function(wrap_pyfunction!(build_embedding, m)?)?;
    m.add_function(wrap_pyfunction!(ql_bijection, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_codes, m)?)?;
    m.add_function(wrap_pyfunction!(reproduce_example, m)?)?;
    Ok(())
}
