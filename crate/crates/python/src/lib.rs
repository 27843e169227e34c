use pyo3::prelude::*;

#[pymodule]
fn voltflow(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
