//! Serde helpers that write reals with exactly four decimals (`0.5` becomes
//! `0.5000`). Reading accepts any JSON number.

use serde::ser::Error as _;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

pub(crate) struct Fixed4(pub f64);

impl Serialize for Fixed4 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(S::Error::custom("non-finite metric value"));
        }
        // Avoid printing "-0.0000" for values that round to zero from below.
        let v = if self.0.abs() < 5e-5 { 0.0 } else { self.0 };
        let raw = RawValue::from_string(format!("{v:.4}")).map_err(S::Error::custom)?;
        raw.serialize(s)
    }
}

pub(crate) fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    Fixed4(*v).serialize(s)
}

pub(crate) mod option {
    use super::*;

    pub(crate) fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.map(Fixed4).serialize(s)
    }
}
