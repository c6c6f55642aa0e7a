//! Serialization helpers: complex numbers are `[re, im]` pairs.

use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;

use crate::{CMat, C64};

/// Complex number serialized as `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cx(pub C64);

impl Serialize for Cx {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.0.re, self.0.im].serialize(s)
    }
}

pub fn ser_c64<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
    Cx(*z).serialize(s)
}

pub fn ser_cvec<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&Cx(*z))?;
    }
    seq.end()
}

/// Row-major nested arrays of `[re, im]`.
pub fn ser_cmat<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
    matrix_rows(m).serialize(s)
}

pub fn matrix_rows(m: &CMat) -> Vec<Vec<Cx>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| Cx(m[(i, j)])).collect())
        .collect()
}

/// Pretty JSON with a trailing newline.
pub fn to_string<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serialization");
    s.push('\n');
    s
}
