//! JSON encodings for complex data: numbers as `[re, im]`, matrices as
//! row-major arrays of such pairs.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg::{DMat, C64};

pub fn to_pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn from_pair(p: [f64; 2]) -> C64 {
    C64::new(p[0], p[1])
}

pub mod complex {
    use super::*;

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        to_pair(*z).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        Ok(from_pair(<[f64; 2]>::deserialize(d)?))
    }
}

pub mod complex_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| to_pair(*z)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        Ok(Vec::<[f64; 2]>::deserialize(d)?.into_iter().map(from_pair).collect())
    }
}

/// Square or rectangular matrix stored as `{ "rows", "cols", "data" }` with
/// row-major `[re, im]` entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixRepr {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl From<&DMat> for MatrixRepr {
    fn from(m: &DMat) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(to_pair(m[(i, j)]));
            }
        }
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }
}

impl MatrixRepr {
    pub fn to_matrix(&self) -> Option<DMat> {
        (self.data.len() == self.rows * self.cols).then(|| {
            DMat::from_fn(self.rows, self.cols, |i, j| from_pair(self.data[i * self.cols + j]))
        })
    }
}

pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMat, s: S) -> Result<S::Ok, S::Error> {
        MatrixRepr::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMat, D::Error> {
        MatrixRepr::deserialize(d)?
            .to_matrix()
            .ok_or_else(|| serde::de::Error::custom("matrix data length does not match rows*cols"))
    }
}
