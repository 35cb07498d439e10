//! Shared JSON encodings.
//!
//! Floats are written with 17 significant digits so that every value
//! round-trips exactly.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::linalg::{ComplexMatrix, C64};

/// A float that serializes with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F17(pub f64);

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom(format!(
                "cannot encode non-finite value {}",
                self.0
            )));
        }
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for F17 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        f64::deserialize(deserializer).map(F17)
    }
}

#[derive(Serialize)]
struct MatrixOut {
    rows: usize,
    cols: usize,
    data: Vec<[F17; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixIn {
    rows: usize,
    cols: usize,
    data: Vec<[f64; 2]>,
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        MatrixOut {
            rows: self.rows(),
            cols: self.cols(),
            data: self.row_major().into_iter().map(|z| [F17(z.re), F17(z.im)]).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let m = MatrixIn::deserialize(deserializer)?;
        let entries = m.data.into_iter().map(|[re, im]| C64::new(re, im)).collect();
        ComplexMatrix::new(m.rows, m.cols, entries).map_err(D::Error::custom)
    }
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> crate::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn matrix_from_json(text: &str) -> crate::Result<ComplexMatrix> {
    Ok(serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_ginibre;

    #[test]
    fn matrix_round_trip_is_exact() {
        let m = random_ginibre(5, 99);
        let text = to_json_string(&m).unwrap();
        let back = matrix_from_json(&text).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn floats_have_seventeen_digits() {
        let text = serde_json::to_string(&F17(0.1)).unwrap();
        assert_eq!(text, "1.0000000000000001e-1");
        let text = serde_json::to_string(&F17(-2.0)).unwrap();
        assert_eq!(text, "-2.0000000000000000e0");
    }

    #[test]
    fn rejects_wrong_length() {
        let text = r#"{"rows": 2, "cols": 2, "data": [[1, 0], [0, 0], [0, 0]]}"#;
        assert!(matrix_from_json(text).is_err());
    }

    #[test]
    fn rejects_overflowing_values() {
        let text = r#"{"rows": 1, "cols": 1, "data": [[1e400, 0]]}"#;
        assert!(matrix_from_json(text).is_err());
    }

    #[test]
    fn reads_plain_integers() {
        let text = r#"{"rows": 1, "cols": 2, "data": [[1, 2], [3, -4]]}"#;
        let m = matrix_from_json(text).unwrap();
        assert_eq!(m[(0, 1)], C64::new(3.0, -4.0));
    }
}
