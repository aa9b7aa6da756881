//! Serialization helpers: fixed-precision JSON, complex-entry conventions,
//! and CSV writers shared by the library and the command-line front end.
//!
//! JSON convention for complex scalars: a bare number means a real value; a
//! two-element array `[re, im]` is a general complex entry. Serialization
//! always emits the two-element form so round trips are unambiguous.

use ndarray::{Array1, Array2};
use ndarray_linalg::c64;
use serde::{Deserialize, Serialize, Serializer};
use std::io::Write;

use crate::error::Result;

/// Complex scalar with the `number | [re, im]` JSON representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexScalar(pub c64);

impl Serialize for ComplexScalar {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.0.re, self.0.im].serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexScalar {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Real(f64),
            Pair([f64; 2]),
        }
        Ok(match Repr::deserialize(d)? {
            Repr::Real(x) => ComplexScalar(c64::new(x, 0.0)),
            Repr::Pair([re, im]) => ComplexScalar(c64::new(re, im)),
        })
    }
}

/// Rows-of-entries JSON form of a complex matrix.
pub fn matrix_to_rows(m: &Array2<c64>) -> Vec<Vec<ComplexScalar>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| ComplexScalar(m[(i, j)])).collect())
        .collect()
}

/// Parse a rows-of-entries matrix; all rows must have equal length.
pub fn matrix_from_rows(rows: &[Vec<ComplexScalar>]) -> Option<Array2<c64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    let mut out = Array2::zeros((nrows, ncols));
    for (i, row) in rows.iter().enumerate() {
        for (j, z) in row.iter().enumerate() {
            out[(i, j)] = z.0;
        }
    }
    Some(out)
}

pub fn vector_to_entries(v: &Array1<c64>) -> Vec<ComplexScalar> {
    v.iter().map(|&z| ComplexScalar(z)).collect()
}

pub fn vector_from_entries(entries: &[ComplexScalar]) -> Array1<c64> {
    Array1::from_iter(entries.iter().map(|z| z.0))
}

/// JSON serializer writing every float with 17 significant digits
/// (`{:.16e}`), so identical inputs produce byte-identical reports.
struct Precise17;

impl serde_json::ser::Formatter for Precise17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

/// Serialize any value to deterministic JSON with fixed float precision.
pub fn to_json_17<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Precise17);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits utf-8"))
}

/// Trajectory CSV with the layout
/// `t, x_0..x_{n-1} (re/im pairs), y_1..y_p, e_1..e_p`.
/// Output and error columns carry real parts; their imaginary parts are
/// negligible for real-data systems and are not written.
pub fn trajectory_csv(traj: &crate::closed_loop::Trajectory) -> String {
    let n = traj.states.ncols();
    let p = traj.outputs.ncols();
    let mut out = String::new();
    out.push('t');
    for i in 0..n {
        out.push_str(&format!(",x_{i}_re,x_{i}_im"));
    }
    for i in 1..=p {
        out.push_str(&format!(",y_{i}"));
    }
    for i in 1..=p {
        out.push_str(&format!(",e_{i}"));
    }
    out.push('\n');
    for (r, &t) in traj.times.iter().enumerate() {
        out.push_str(&format!("{t:.16e}"));
        for j in 0..n {
            let z = traj.states[(r, j)];
            out.push_str(&format!(",{:.16e},{:.16e}", z.re, z.im));
        }
        for j in 0..p {
            out.push_str(&format!(",{:.16e}", traj.outputs[(r, j)].re));
        }
        for j in 0..p {
            out.push_str(&format!(",{:.16e}", traj.errors[(r, j)].re));
        }
        out.push('\n');
    }
    out
}

/// Sigma columns as CSV rows `flat_index,re,im`, column-major over the
/// exosystem's flat order: `flat_index = col * state_dim + row`.
pub fn sigma_csv(sigma: &Array2<c64>) -> String {
    let mut out = String::from("flat_index,re,im\n");
    let dim = sigma.nrows();
    for col in 0..sigma.ncols() {
        for row in 0..dim {
            let z = sigma[(row, col)];
            out.push_str(&format!("{},{:.16e},{:.16e}\n", col * dim + row, z.re, z.im));
        }
    }
    out
}
