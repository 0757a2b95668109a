use heat_content::asymptotics::{fit_sqrt_t, AsymptoticFit};
use heat_content::domains::{euclidean_curvature_coefficient, predict_coefficients, Factor, WeightSpec};
use heat_content::kernels;
use heat_content::mc::{self, CurveKind, HeatContentCurve, SdeConfig};
use heat_content::models::{ModelKind, ModelSpace};
use heat_content::opalg::{self, OpPoly};
use heat_content::pipeline::Experiment as CoreExperiment;
use heat_content::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: Error) -> PyErr {
    match heat_content::pipeline::exit_code(&e) {
        2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn model(name: &str) -> PyResult<ModelSpace> {
    let kind: ModelKind = name.parse().map_err(err)?;
    Ok(ModelSpace::new(kind))
}

/// Smooth weight χ (unit or product of bumps).
#[pyclass(name = "Weight", from_py_object)]
#[derive(Clone)]
struct PyWeight {
    inner: WeightSpec,
}

#[pymethods]
impl PyWeight {
    #[staticmethod]
    fn unit(dim: usize) -> Self {
        PyWeight {
            inner: WeightSpec::unit(dim),
        }
    }

    /// Product of C^∞ bumps equal to 1 at `center`, supported in `center ± width`.
    #[staticmethod]
    fn bump(center: Vec<f64>, width: f64) -> PyResult<Self> {
        let factors = center
            .iter()
            .enumerate()
            .map(|(axis, &c)| Factor::Bump {
                axis,
                center: c,
                radius: width,
            })
            .collect();
        Ok(PyWeight {
            inner: WeightSpec::product("bump", center.len(), factors).map_err(err)?,
        })
    }

    fn __call__(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.value(&x).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Weight('{}')", self.inner.name())
    }
}

/// Built-in domain, e.g. `Domain("disc R=1")`.
#[pyclass(name = "Domain")]
struct PyDomain {
    inner: heat_content::domains::Domain,
}

#[pymethods]
impl PyDomain {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(PyDomain {
            inner: heat_content::domains::Domain::parse(spec).map_err(err)?,
        })
    }

    #[getter]
    fn model(&self) -> &'static str {
        self.inner.model().name()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn contains(&self, x: Vec<f64>) -> bool {
        self.inner.contains(&x)
    }

    fn delta(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.delta(&x).map_err(err)
    }

    fn volume(&self) -> PyResult<f64> {
        self.inner.volume().map_err(err)
    }

    fn perimeter(&self) -> PyResult<f64> {
        self.inner.perimeter().map_err(err)
    }

    /// Predicted c₀…c₄ of the (weighted) heat content.
    #[pyo3(signature = (weight=None))]
    fn predict_coefficients(&self, weight: Option<PyWeight>) -> PyResult<Vec<f64>> {
        let w = weight.map_or_else(|| WeightSpec::unit(self.inner.dim()), |w| w.inner);
        Ok(predict_coefficients(&self.inner, &w).map_err(err)?.c.to_vec())
    }

    fn curvature_coefficient(&self) -> PyResult<f64> {
        euclidean_curvature_coefficient(&self.inner).map_err(err)
    }

    fn exact_heat_content(&self, t: f64) -> PyResult<f64> {
        kernels::exact_heat_content(&self.inner, t).map_err(err)
    }

    fn exact_temperature(&self, t: f64, x: Vec<f64>) -> PyResult<f64> {
        kernels::exact_temperature(&self.inner, t, &x).map_err(err)
    }

    /// Monte Carlo heat-content curve (`kind` one of H, K, Q, Hchi).
    #[pyo3(signature = (times, n_paths, seed, kind="H", weight=None, dt=1e-3, steps_per_t=400))]
    #[allow(clippy::too_many_arguments)]
    fn estimate_heat_content(
        &self,
        py: Python<'_>,
        times: Vec<f64>,
        n_paths: usize,
        seed: u64,
        kind: &str,
        weight: Option<PyWeight>,
        dt: f64,
        steps_per_t: u32,
    ) -> PyResult<PyCurve> {
        let kind: CurveKind = kind.parse().map_err(err)?;
        let cfg = SdeConfig {
            dt,
            steps_per_t: Some(steps_per_t),
            ..SdeConfig::new(n_paths, seed)
        };
        cfg.validate().map_err(err)?;
        let dom = &self.inner;
        let w = weight.map(|w| w.inner);
        let curve = py
            .detach(|| mc::estimate_heat_content(dom.model(), dom, kind, w.as_ref(), &times, &cfg))
            .map_err(err)?;
        Ok(PyCurve { inner: curve })
    }

    fn __repr__(&self) -> String {
        format!("Domain('{}')", self.inner.kind())
    }
}

/// Sampled curve with values, standard errors and backend tag.
#[pyclass(name = "Curve")]
struct PyCurve {
    inner: HeatContentCurve,
}

#[pymethods]
impl PyCurve {
    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind.name()
    }

    #[getter]
    fn backend(&self) -> &'static str {
        self.inner.backend().name()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values()
    }

    #[getter]
    fn stderrs(&self) -> Vec<f64> {
        self.inner.stderrs()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Power-basis fit; returns `{exponent: (coefficient, stderr)}`.
    #[pyo3(signature = (exponents, window=None, pin=None))]
    fn fit(&self, exponents: Vec<f64>, window: Option<(f64, f64)>, pin: Option<f64>) -> PyResult<Vec<(f64, f64, f64)>> {
        let f: AsymptoticFit = fit_sqrt_t(&self.inner, &exponents, window, pin).map_err(err)?;
        Ok(f.exponents
            .iter()
            .zip(f.coefficients.iter().zip(&f.stderrs))
            .map(|(e, (c, s))| (*e, *c, *s))
            .collect())
    }
}

/// Config-driven experiment (same TOML schema as the command-line runner).
#[pyclass(name = "Experiment")]
struct PyExperiment {
    inner: CoreExperiment,
}

#[pymethods]
impl PyExperiment {
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PyExperiment {
            inner: CoreExperiment::from_toml(text).map_err(err)?,
        })
    }

    fn predict(&self) -> PyResult<Vec<f64>> {
        Ok(self.inner.predict().map_err(err)?.c.to_vec())
    }

    fn estimate(&self, py: Python<'_>) -> PyResult<Vec<PyCurve>> {
        let exp = &self.inner;
        let curves = py.detach(|| exp.estimate()).map_err(err)?;
        Ok(curves.into_iter().map(|c| PyCurve { inner: c }).collect())
    }

    /// Fits the configured curve and returns `(pass, report_text)`.
    fn verify(&self, py: Python<'_>) -> PyResult<(bool, String)> {
        let exp = &self.inner;
        let v = py
            .detach(|| exp.estimate().and_then(|c| exp.verify(&c[0])))
            .map_err(err)?;
        Ok((v.pass, v.report.to_string()))
    }
}

/// Exact operator polynomial in `D` (sub-Laplacian) and `N`.
#[pyclass(name = "OpPoly")]
struct PyOpPoly {
    inner: OpPoly,
}

#[pymethods]
impl PyOpPoly {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        Ok(PyOpPoly {
            inner: text.parse().map_err(err)?,
        })
    }

    fn __add__(&self, o: PyRef<'_, PyOpPoly>) -> Self {
        PyOpPoly {
            inner: &self.inner + &o.inner,
        }
    }

    fn __sub__(&self, o: PyRef<'_, PyOpPoly>) -> Self {
        PyOpPoly {
            inner: &self.inner - &o.inner,
        }
    }

    fn __mul__(&self, o: PyRef<'_, PyOpPoly>) -> Self {
        PyOpPoly {
            inner: &self.inner * &o.inner,
        }
    }

    fn __eq__(&self, o: PyRef<'_, PyOpPoly>) -> bool {
        self.inner == o.inner
    }

    fn is_zero(&self) -> bool {
        self.inner.is_zero()
    }

    /// Applies the operator to a weight at a point near the boundary of `domain`.
    fn evaluate(&self, domain: PyRef<'_, PyDomain>, weight: PyWeight, x: Vec<f64>) -> PyResult<f64> {
        self.inner.evaluate(&domain.inner, &weight.inner, &x).map_err(err)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("OpPoly('{}')", self.inner)
    }
}

/// `M_kj` for `j = 0..=k`, each as a 2×2 nested list of canonical strings.
#[pyfunction]
fn recursion(k: usize) -> PyResult<Vec<[[String; 2]; 2]>> {
    Ok(opalg::recursion(k)
        .map_err(err)?
        .iter()
        .map(|m| {
            let e = |i, j| m.entry(i, j).to_string();
            [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
        })
        .collect())
}

#[pyfunction]
fn expansion_coefficient_operators() -> PyResult<Vec<(String, String)>> {
    Ok(opalg::expansion_coefficient_operators()
        .map_err(err)?
        .into_iter()
        .map(|(n, p)| (n.to_string(), p.to_string()))
        .collect())
}

#[pyfunction]
fn heat_kernel(model_name: &str, t: f64, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    kernels::heat_kernel(&model(model_name)?, t, &x, &y).map_err(err)
}

#[pyfunction]
fn geometric_ladder(t_min: f64, t_max: f64, count: usize) -> PyResult<Vec<f64>> {
    mc::geometric_ladder(t_min, t_max, count).map_err(err)
}

#[pymodule]
pub fn heat_content_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyWeight>()?;
    m.add_class::<PyDomain>()?;
    m.add_class::<PyCurve>()?;
    m.add_class::<PyExperiment>()?;
    m.add_class::<PyOpPoly>()?;
    m.add_function(wrap_pyfunction!(recursion, m)?)?;
    m.add_function(wrap_pyfunction!(expansion_coefficient_operators, m)?)?;
    m.add_function(wrap_pyfunction!(heat_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(geometric_ladder, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
