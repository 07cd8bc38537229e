//! Parsing of numeric arguments.
//!
//! Every argument is either inline JSON or `@path` naming a JSON file.
//! Complex numbers are `[re, im]` pairs; a bare number is real. Matrices are
//! nested rows, a flat row-major list, a scalar (meaning a multiple of the
//! identity), or an object `{"re": .., "im": ..}`.

use serde_json::Value;
use thetaquant::matrix::{CMat, RMat};
use thetaquant::Complex64;

use crate::error::{params, CliResult};

pub fn parse_value(arg: &str) -> CliResult<Value> {
    let text = match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path)?,
        None => arg.to_string(),
    };
    Ok(serde_json::from_str(text.trim())?)
}

fn as_f64(v: &Value) -> CliResult<f64> {
    v.as_f64().ok_or_else(|| params(format!("expected a number, found {v}")))
}

fn is_pair(v: &Value) -> bool {
    matches!(v, Value::Array(a) if a.len() == 2 && a.iter().all(Value::is_number))
}

pub fn complex(v: &Value) -> CliResult<Complex64> {
    match v {
        Value::Number(_) => Ok(Complex64::new(as_f64(v)?, 0.0)),
        Value::Array(a) if is_pair(v) => Ok(Complex64::new(as_f64(&a[0])?, as_f64(&a[1])?)),
        _ => Err(params(format!("expected a complex number [re, im], found {v}"))),
    }
}

fn flatten_complex(v: &Value, out: &mut Vec<Complex64>) -> CliResult<()> {
    if v.is_number() || is_pair(v) {
        out.push(complex(v)?);
        return Ok(());
    }
    match v {
        Value::Array(a) => a.iter().try_for_each(|x| flatten_complex(x, out)),
        _ => Err(params(format!("expected complex entries, found {v}"))),
    }
}

fn flatten_real(v: &Value, out: &mut Vec<f64>) -> CliResult<()> {
    match v {
        Value::Number(_) => {
            out.push(as_f64(v)?);
            Ok(())
        }
        Value::Array(a) => a.iter().try_for_each(|x| flatten_real(x, out)),
        _ => Err(params(format!("expected real entries, found {v}"))),
    }
}

pub fn complex_vec(v: &Value) -> CliResult<Vec<Complex64>> {
    let mut out = Vec::new();
    flatten_complex(v, &mut out)?;
    Ok(out)
}

pub fn real_vec(v: &Value) -> CliResult<Vec<f64>> {
    let mut out = Vec::new();
    flatten_real(v, &mut out)?;
    Ok(out)
}

pub fn int_vec(v: &Value) -> CliResult<Vec<i64>> {
    real_vec(v)?
        .into_iter()
        .map(|x| {
            if x.fract() == 0.0 && x.abs() < 1e15 {
                Ok(x as i64)
            } else {
                Err(params(format!("expected an integer, found {x}")))
            }
        })
        .collect()
}

pub fn complex_matrix(v: &Value, g: usize) -> CliResult<CMat> {
    if let Value::Object(map) = v {
        let re = map.get("re").map(|x| real_matrix(x, g)).transpose()?.unwrap_or_else(|| RMat::zeros(g, g));
        let im = map.get("im").map(|x| real_matrix(x, g)).transpose()?.unwrap_or_else(|| RMat::zeros(g, g));
        return Ok(thetaquant::matrix::complexify(&re, &im));
    }
    let entries = complex_vec(v)?;
    match entries.len() {
        1 => Ok(CMat::identity(g, g) * entries[0]),
        n if n == g * g => Ok(CMat::from_row_slice(g, g, &entries)),
        n => Err(params(format!("expected {} complex entries for a {g}x{g} matrix, found {n}", g * g))),
    }
}

pub fn real_matrix(v: &Value, g: usize) -> CliResult<RMat> {
    let entries = real_vec(v)?;
    match entries.len() {
        1 => Ok(RMat::identity(g, g) * entries[0]),
        n if n == g * g => Ok(RMat::from_row_slice(g, g, &entries)),
        n => Err(params(format!("expected {} real entries for a {g}x{g} matrix, found {n}", g * g))),
    }
}

/// Genus implied by a square complex matrix value, if unambiguous.
pub fn infer_dim(v: &Value) -> Option<usize> {
    if let Value::Object(map) = v {
        return map.get("re").or_else(|| map.get("im")).and_then(infer_dim);
    }
    let n = complex_vec(v).ok()?.len();
    let g = (n as f64).sqrt().round() as usize;
    (g * g == n && g > 0).then_some(g)
}

pub fn field<'a>(v: &'a Value, names: &[&str]) -> Option<&'a Value> {
    names.iter().find_map(|n| v.get(*n))
}

pub fn complex_to_json(z: Complex64) -> Value {
    serde_json::json!([z.re, z.im])
}

pub fn cmat_to_json(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| complex_to_json(m[(i, j)])).collect()))
            .collect(),
    )
}

pub fn rmat_to_json(m: &RMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| serde_json::json!(m[(i, j)])).collect()))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_forms() {
        let v = parse_value("[[1, 2], 3]").unwrap();
        assert_eq!(complex_vec(&v).unwrap(), vec![Complex64::new(1.0, 2.0), Complex64::new(3.0, 0.0)]);
        let m = complex_matrix(&parse_value("[0, 1]").unwrap(), 2).unwrap();
        assert_eq!(m[(1, 1)], Complex64::new(0.0, 1.0));
        assert_eq!(m[(0, 1)], Complex64::new(0.0, 0.0));
        let m = complex_matrix(&parse_value(r#"{"re": [[1, 0.5], [0.5, 2]], "im": 1}"#).unwrap(), 2).unwrap();
        assert_eq!(m[(0, 1)], Complex64::new(0.5, 0.0));
        assert_eq!(m[(1, 1)], Complex64::new(2.0, 1.0));
        assert_eq!(infer_dim(&parse_value("[[[0,1],0],[0,[0,2]]]").unwrap()), Some(2));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(complex_matrix(&parse_value("[1, 2, 3]").unwrap(), 2).is_err());
        assert!(int_vec(&parse_value("[1.5]").unwrap()).is_err());
        assert!(parse_value("@/nonexistent/file.json").is_err());
    }
}
