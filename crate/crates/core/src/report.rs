//! Serialization helpers shared by the report types.

use serde::Serializer;

/// Writes non-finite numbers as strings (`"inf"`, `"-inf"`, `"nan"`), which
/// plain JSON cannot represent.
pub fn ser_f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else if x.is_nan() {
        s.serialize_str("nan")
    } else if *x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}
