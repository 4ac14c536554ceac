//! Python bindings: velocity-space collision kernel, domains and the
//! axial decay solver, plus the closed-form frequency constants.

use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use bte_core::collision::{maxwellian, CollisionKernel, QuadratureRule};
use bte_core::geometry::Domain;
use bte_core::transport::{
    solve_linear, theta_a, PhaseGridFunction, Scheme, SolverConfig, SpatialGrid,
};
use bte_core::Vec3;

fn err(e: bte_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn vec3(v: (f64, f64, f64)) -> Vec3 {
    Vec3::new(v.0, v.1, v.2)
}

/// Hard-sphere collision kernel tabulated on a cubic velocity grid.
#[pyclass(name = "Kernel")]
struct PyKernel {
    inner: Arc<CollisionKernel>,
}

#[pymethods]
impl PyKernel {
    #[new]
    #[pyo3(signature = (v_max = 4.0, n_v = 8, c_k = 1.6))]
    fn new(v_max: f64, n_v: usize, c_k: f64) -> Self {
        PyKernel {
            inner: Arc::new(CollisionKernel::with_c_k(v_max, n_v, QuadratureRule::Midpoint, c_k)),
        }
    }

    /// Collision frequency at each grid node, row-major.
    #[getter]
    fn nu(&self) -> Vec<f64> {
        self.inner.nu.clone()
    }

    /// Quadrature-error estimate of the tabulated frequency.
    #[getter]
    fn nu_err(&self) -> f64 {
        self.inner.nu_err
    }

    /// Dense gain matrix, row-major `len x len`.
    fn k_matrix(&self) -> Vec<f64> {
        self.inner.k_matrix()
    }

    fn node(&self, i: usize) -> PyResult<(f64, f64, f64)> {
        if i >= self.inner.grid.len() {
            return Err(PyValueError::new_err("node index out of range"));
        }
        let v = self.inner.grid.node(i);
        Ok((v.x, v.y, v.z))
    }

    fn __len__(&self) -> usize {
        self.inner.grid.len()
    }
}

/// Rescaled ball or finite-cylinder domain with Maxwell walls.
#[pyclass(name = "Domain")]
struct PyDomain {
    inner: Domain,
}

#[pymethods]
impl PyDomain {
    /// Ball of base radius `radius` stretched by 1/epsilon, constant
    /// accommodation `iota`.
    #[staticmethod]
    fn ball(radius: f64, epsilon: f64, iota: f64) -> PyResult<Self> {
        Ok(PyDomain { inner: Domain::ball(radius, epsilon, iota).map_err(err)? })
    }

    /// Cylinder with diffuse caps and specular lateral wall.
    #[staticmethod]
    fn cylinder(half_length: f64, radius: f64, epsilon: f64) -> PyResult<Self> {
        Ok(PyDomain { inner: Domain::cylinder(half_length, radius, epsilon).map_err(err)? })
    }

    /// Positive inside, zero on the wall, negative outside.
    fn signed_distance(&self, x: (f64, f64, f64)) -> f64 {
        self.inner.signed_distance(vec3(x))
    }

    #[getter]
    fn half_length(&self) -> f64 {
        self.inner.half_length()
    }
}

/// Collision frequency of the hard-sphere kernel, with the quadrature
/// error of the radial closed form.
#[pyfunction]
fn collision_frequency(v: (f64, f64, f64)) -> (f64, f64) {
    bte_core::collision::collision_frequency(vec3(v))
}

/// Global Maxwellian, unit mass.
#[pyfunction(name = "maxwellian")]
fn py_maxwellian(v: (f64, f64, f64)) -> f64 {
    maxwellian(vec3(v))
}

/// Lower frequency constant: nu(v) >= nu_0 <v>.
#[pyfunction]
fn nu_0() -> f64 {
    bte_core::collision::nu_0()
}

/// Upper frequency constant: nu(v) <= nu_1 <v>.
#[pyfunction]
fn nu_1() -> f64 {
    bte_core::collision::nu_1()
}

/// Wall-weight normalization integral for the blended weight with
/// cross-over radius `a`; tends to 1 as `a` grows.
#[pyfunction]
#[pyo3(signature = (a, q = 10.0))]
fn theta(a: f64, q: f64) -> f64 {
    let omega1 = move |r: f64| (1.0 + r * r).powf(q / 2.0);
    theta_a(&omega1, a)
}

/// March the linearized equation on the axial cylinder reduction from a
/// sinusoidal-in-x Maxwellian datum and report the fitted decay.
#[pyfunction]
#[pyo3(signature = (kernel, epsilon, horizon = 30.0, dt = 0.02, cells_per_unit = 4.0, weight_exponent = 10.0))]
fn linear_decay(
    py: Python<'_>,
    kernel: &PyKernel,
    epsilon: f64,
    horizon: f64,
    dt: f64,
    cells_per_unit: f64,
    weight_exponent: f64,
) -> PyResult<Py<PyDict>> {
    let kern = Arc::clone(&kernel.inner);
    let km = kern.k_matrix();
    let domain = Domain::cylinder(1.0, 1.0, epsilon).map_err(err)?;
    let l = domain.half_length();
    let nx = (2.0 * l * cells_per_unit).round().max(4.0) as usize;
    let grid = Arc::new(SpatialGrid::axial(domain, nx).map_err(err)?);
    let f0 = PhaseGridFunction::sample(grid, kern, |x, v| {
        (std::f64::consts::PI * x.x / l).sin() * maxwellian(v)
    });
    let cfg = SolverConfig {
        alpha: 1.0,
        a_radius: 6.0,
        tol: 1e-7,
        max_iter: 30,
        dt,
        horizon,
        scheme: Scheme::MildDuhamel,
    };
    let omega = move |v: Vec3| (1.0 + v.norm_sq()).powf(weight_exponent / 2.0);
    let rep = solve_linear(&f0, None, &km, &cfg, &omega).map_err(err)?;
    let out = PyDict::new_bound(py);
    out.set_item("decay_rate", rep.decay_rate)?;
    out.set_item("decay_r2", rep.decay_r2)?;
    out.set_item("mass_drift", rep.mass_drift)?;
    out.set_item("times", rep.trace.times)?;
    out.set_item("sup_norms", rep.trace.sup_norms)?;
    out.set_item("masses", rep.trace.masses)?;
    Ok(out.into())
}

#[pymodule]
fn _native(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernel>()?;
    m.add_class::<PyDomain>()?;
    m.add_function(wrap_pyfunction!(collision_frequency, m)?)?;
    m.add_function(wrap_pyfunction!(py_maxwellian, m)?)?;
    m.add_function(wrap_pyfunction!(nu_0, m)?)?;
    m.add_function(wrap_pyfunction!(nu_1, m)?)?;
    m.add_function(wrap_pyfunction!(theta, m)?)?;
    m.add_function(wrap_pyfunction!(linear_decay, m)?)?;
    Ok(())
}
