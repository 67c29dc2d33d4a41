use std::sync::Once;

use pyo3::prelude::*;
use pyo3::types::PyModule;
use pyvendorest::pyvendorest;

static INIT: Once = Once::new();

fn module<R>(f: impl FnOnce(&Bound<'_, PyModule>) -> PyResult<R>) -> R {
    INIT.call_once(|| {
        pyo3::append_to_inittab!(pyvendorest);
        Python::initialize();
    });
    Python::attach(|py| {
        let m = py.import("pyvendorest").expect("module imports");
        f(&m).expect("python call succeeds")
    })
}

#[test]
fn ratio_total_matches_closed_form() {
    let (value, se): (f64, Option<f64>) = module(|m| {
        let e = m.getattr("ratio_total")?.call1((5100u64, 1051u64, 349u64))?;
        Ok((e.getattr("value")?.extract()?, e.getattr("se")?.extract()?))
    });
    assert!((value - (5100.0 * 1051.0 / 349.0 + 5100.0)).abs() < 1e-9);
    let lambda = 5100.0 * 1051.0 / 349.0;
    let expected = lambda * (1.0 / 1051.0 + 1.0 / 349.0 - 1.0 / 5100.0_f64).sqrt();
    assert!((se.unwrap() - expected).abs() < 1e-9);
}

#[test]
fn degenerate_subregion_has_no_se() {
    let (deg, se): (bool, Option<f64>) = module(|m| {
        let e = m.getattr("subregion")?.call1((100u64, 0u64, 5u64))?;
        Ok((e.getattr("degenerate")?.extract()?, e.getattr("se")?.extract()?))
    });
    assert!(deg);
    assert!(se.is_none());
}

#[test]
fn errors_map_to_python_exceptions() {
    let (estimation, value_error): (bool, bool) = module(|m| {
        let py = m.py();
        let est = m.getattr("subregion")?.call1((100u64, 3u64, 0u64)).unwrap_err();
        let val = m.getattr("ratio_total")?.call1((10u64, 1u64, 11u64)).unwrap_err();
        Ok((
            est.is_instance(py, &m.getattr("EstimationError")?),
            val.is_instance_of::<pyo3::exceptions::PyValueError>(py),
        ))
    });
    assert!(estimation);
    assert!(value_error);
}

#[test]
fn mle_is_exposed() {
    let total: f64 = module(|m| {
        let (lam, _p, _q): (Vec<f64>, f64, Vec<f64>) =
            m.getattr("mle")?.call1((vec![12u64, 7], vec![4u64, 6], 50u64))?.extract()?;
        Ok(lam.iter().sum())
    });
    assert!((total - 50.0 * 19.0 / 10.0).abs() < 1e-6);
}
